//! Chains of parabolic subsystems coupled on the boundary (Robin data
//! `d_j = u_{j-1}`) or over the domain (source `f_j = u_{j-1}`), either
//! open (driven by an external input at the head) or closed into a cycle
//! (`u_k` feeds subsystem 1).

use std::fmt;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::expr::{Expr, SPACE_TIME};
use crate::gains::{
    cascade_a0, cascade_bound_dirichlet, cascade_bound_robin, cascade_m0, rkes_gains, BoundaryKind, CascadeMode,
    Exponent, SobolevConstants,
};
use crate::grid::{argmax_abs, sup_norm_space, Field, Trajectory};
use crate::harness::{level_set_diagnostic, Location, Report, SampleMargin, Tolerance};
use crate::solver::{
    grid_from_config, reaction_from_config, sobolev_from_config, solve, solve_with_data, BoundaryData, BoundarySpec,
    Coefficients, NodalData, Scenario, Stepper,
};

/// Sweeps stop once no field changes by more than this.
pub const SWEEP_TOL: f64 = 1e-10;
pub const MAX_SWEEPS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    RobinOpen,
    RobinCycle,
    DirichletOpen,
    DirichletCycle,
}

impl Topology {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "robin-open" => Ok(Topology::RobinOpen),
            "robin-cycle" => Ok(Topology::RobinCycle),
            "dirichlet-open" => Ok(Topology::DirichletOpen),
            "dirichlet-cycle" => Ok(Topology::DirichletCycle),
            other => Err(Error::config(format!("unknown cascade topology '{other}'"))),
        }
    }

    pub fn kind(self) -> BoundaryKind {
        match self {
            Topology::RobinOpen | Topology::RobinCycle => BoundaryKind::Robin,
            Topology::DirichletOpen | Topology::DirichletCycle => BoundaryKind::Dirichlet,
        }
    }

    pub fn mode(self) -> CascadeMode {
        match self {
            Topology::RobinOpen | Topology::DirichletOpen => CascadeMode::Open,
            Topology::RobinCycle | Topology::DirichletCycle => CascadeMode::Cycle,
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::RobinOpen => "robin-open",
            Topology::RobinCycle => "robin-cycle",
            Topology::DirichletOpen => "dirichlet-open",
            Topology::DirichletCycle => "dirichlet-cycle",
        })
    }
}

/// A resolved cascade.
///
/// Each subsystem is a full scenario sharing grid, step and horizon. Its
/// `u0` is `phi_j`. For Robin chains every `f` is zero and the boundary
/// data of subsystem 1 is the external input `d` (open chains only). For
/// Dirichlet chains every subsystem keeps its own boundary data `d_j`, and
/// the `f` of subsystem 1 is the external input (open chains only). Coupled
/// inputs replace the corresponding entries during simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeSpec {
    pub topology: Topology,
    pub subsystems: Vec<Scenario>,
    /// `Phi_j = max_{i <= j} sup |phi_i|` on nodes.
    pub phi: Vec<f64>,
    /// `m0` for Robin chains, `a0` for Dirichlet chains.
    pub small_gain: f64,
    pub small_gain_holds: bool,
    pub warnings: Vec<String>,
    pub consts: SobolevConstants,
    pub q: Exponent,
}

impl CascadeSpec {
    pub fn new(topology: Topology, subsystems: Vec<Scenario>, consts: &SobolevConstants, q: Exponent) -> Result<Self> {
        let k = subsystems.len();
        if k < 2 {
            return Err(Error::config(format!("a cascade needs k >= 2 subsystems, got {k}")));
        }
        let first = &subsystems[0];
        for (j, s) in subsystems.iter().enumerate() {
            s.validate()?;
            if s.grid != first.grid || s.dt != first.dt || s.horizon != first.horizon {
                return Err(Error::config(format!(
                    "subsystem {} does not share grid, dt and horizon",
                    j + 1
                )));
            }
            if s.startup_steps != first.startup_steps {
                return Err(Error::config(format!(
                    "subsystem {} uses different start-up steps",
                    j + 1
                )));
            }
            if s.boundary.kind != topology.kind() {
                return Err(Error::config(format!(
                    "subsystem {} has {} data in a {topology} cascade",
                    j + 1,
                    s.boundary.kind
                )));
            }
        }
        let mut phi = Vec::with_capacity(k);
        let mut running: f64 = 0.0;
        for s in &subsystems {
            running = running.max(sup_norm_space(&s.initial_field())?);
            phi.push(running);
        }
        let small_gain = match topology.kind() {
            BoundaryKind::Robin => cascade_m0(
                &subsystems
                    .iter()
                    .map(|s| s.coefficients.bounds().m_min)
                    .collect::<Vec<_>>(),
            )?,
            BoundaryKind::Dirichlet => {
                let pairs: Vec<(f64, f64)> = subsystems
                    .iter()
                    .map(|s| (s.coefficients.bounds().a_min, s.coefficients.bounds().c_min))
                    .collect();
                cascade_a0(&pairs, first.grid.domain().volume(), consts.c_s, consts.c_p, q)?
            }
        };
        let small_gain_holds = small_gain > 1.0;
        let mut warnings = Vec::new();
        if topology.mode() == CascadeMode::Cycle && !small_gain_holds {
            let name = if topology.kind() == BoundaryKind::Robin {
                "m0"
            } else {
                "a0"
            };
            warnings.push(format!(
                "small-gain violated ({name} = {small_gain} <= 1); no bound asserted"
            ));
        }
        Ok(CascadeSpec {
            topology,
            subsystems,
            phi,
            small_gain,
            small_gain_holds,
            warnings,
            consts: consts.clone(),
            q,
        })
    }

    pub fn k(&self) -> usize {
        self.subsystems.len()
    }

    /// Index of the subsystem feeding subsystem `j` (0-based).
    pub fn source(&self, j: usize) -> Option<usize> {
        match (j, self.topology.mode()) {
            (0, CascadeMode::Open) => None,
            (0, CascadeMode::Cycle) => Some(self.k() - 1),
            (j, _) => Some(j - 1),
        }
    }

    /// Inputs of subsystem `j` at `t` given the source field.
    fn inputs(&self, j: usize, t: f64, source: Option<&[f64]>) -> NodalData {
        let own = &self.subsystems[j];
        let mut data = own.nodal_data(t);
        if let Some(src) = source {
            match self.topology.kind() {
                BoundaryKind::Robin => {
                    for node in own.grid.boundary_nodes() {
                        data.d[node] = src[node];
                    }
                }
                BoundaryKind::Dirichlet => data.f = src.to_vec(),
            }
        }
        data
    }
}

fn expr_for(cfg: &Config, key: &str, j: usize, default: &str, vars: &[crate::expr::Var]) -> Result<Expr> {
    let name = format!("{key}_{j}");
    if cfg.get("cascade", &name).is_some() {
        cfg.expr_or("cascade", &name, default, vars)
    } else {
        cfg.expr_or("cascade", key, default, vars)
    }
}

/// Builds a cascade from `[cascade]`: `topology`, `k`, per-subsystem
/// entries `a`, `c`, `m`, `u0`, `d` (each overridable as `a_2`, ...), the
/// external input `d` (robin-open) or `f` (dirichlet-open). Reactions come
/// from `[reaction_j]`, falling back to `[reaction]`.
pub fn build_cascade(cfg: &Config) -> Result<CascadeSpec> {
    let topology = Topology::parse(cfg.require("cascade", "topology")?)?;
    let k = cfg.usize_or("cascade", "k", 2)?;
    if k < 2 {
        return Err(Error::config(format!("a cascade needs k >= 2 subsystems, got {k}")));
    }
    let grid = grid_from_config(cfg)?;
    let (consts, q) = sobolev_from_config(cfg, &grid)?;
    let kind = topology.kind();
    let space = &[crate::expr::Var::X, crate::expr::Var::Y];
    let zero = Expr::constant(0.0);
    let mut subsystems = Vec::with_capacity(k);
    for j in 1..=k {
        let declared = |key: &str| -> Result<Option<f64>> {
            match cfg.f64_opt("cascade", &format!("{key}_{j}"))? {
                Some(v) => Ok(Some(v)),
                None => cfg.f64_opt("cascade", key),
            }
        };
        let coefficients = Coefficients::new(
            expr_for(cfg, "a", j, "1", space)?,
            expr_for(cfg, "c", j, "0", space)?,
            expr_for(cfg, "m", j, "1", space)?,
            &grid,
            kind,
            [declared("a_min")?, declared("c_min")?, declared("m_min")?],
        )?;
        let section = format!("reaction_{j}");
        let reaction = reaction_from_config(
            cfg,
            if cfg.has_section(&section) {
                &section
            } else {
                "reaction"
            },
        )?;
        let (f, d) = match (kind, j) {
            (BoundaryKind::Robin, 1) if topology.mode() == CascadeMode::Open => {
                (zero.clone(), cfg.expr_or("cascade", "d", "0", SPACE_TIME)?)
            }
            (BoundaryKind::Robin, _) => (zero.clone(), zero.clone()),
            (BoundaryKind::Dirichlet, 1) if topology.mode() == CascadeMode::Open => (
                cfg.expr_or("cascade", "f", "0", SPACE_TIME)?,
                expr_for(cfg, "d", j, "0", SPACE_TIME)?,
            ),
            (BoundaryKind::Dirichlet, _) => (zero.clone(), expr_for(cfg, "d", j, "0", SPACE_TIME)?),
        };
        subsystems.push(Scenario {
            grid,
            horizon: cfg.f64_or("grid", "horizon", 1.0)?,
            dt: cfg.f64_or("grid", "dt", 1e-3)?,
            coefficients,
            reaction,
            f,
            boundary: BoundarySpec {
                kind,
                data: BoundaryData::Surface(d),
            },
            u0: expr_for(cfg, "u0", j, "0", SPACE_TIME)?,
            startup_steps: cfg.usize_or("grid", "startup_steps", 2)?,
        });
    }
    CascadeSpec::new(topology, subsystems, &consts, q)
}

/// Nodal values of `traj` at `t`, linear in time between samples.
fn sample_at(traj: &Trajectory, t: f64) -> Vec<f64> {
    let times = traj.times();
    let idx = times.partition_point(|&s| s < t).min(times.len() - 1);
    if idx == 0 || times[idx] == t {
        return traj.fields()[idx].values().to_vec();
    }
    let (t0, t1) = (times[idx - 1], times[idx]);
    let s = (t - t0) / (t1 - t0);
    lerp(traj.fields()[idx - 1].values(), traj.fields()[idx].values(), s)
}

fn lerp(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - s) * x + s * y).collect()
}

/// Open chains are solved subsystem by subsystem, each reading the previous
/// trajectory (linear in time between samples). Cycles advance all
/// subsystems together, with Gauss-Seidel sweeps per step until no field
/// changes by more than `1e-10` (at most 30 sweeps).
pub fn simulate_cascade(spec: &CascadeSpec) -> Result<Vec<Trajectory>> {
    match spec.topology.mode() {
        CascadeMode::Open => {
            let mut out: Vec<Trajectory> = Vec::with_capacity(spec.k());
            for j in 0..spec.k() {
                let traj = match spec.source(j) {
                    None => solve(&spec.subsystems[j])?,
                    Some(src) => {
                        let prev = &out[src];
                        solve_with_data(&spec.subsystems[j], |t| {
                            Ok(spec.inputs(j, t, Some(&sample_at(prev, t))))
                        })?
                    }
                };
                out.push(traj);
            }
            Ok(out)
        }
        CascadeMode::Cycle => simulate_cycle(spec),
    }
}

fn simulate_cycle(spec: &CascadeSpec) -> Result<Vec<Trajectory>> {
    let k = spec.k();
    let steppers = spec.subsystems.iter().map(Stepper::new).collect::<Result<Vec<_>>>()?;
    let grid = spec.subsystems[0].grid;
    let mut u: Vec<Vec<f64>> = spec
        .subsystems
        .iter()
        .map(|s| s.initial_field().into_values())
        .collect();
    let mut trajs: Vec<Trajectory> = u
        .iter()
        .map(|v| Ok(Trajectory::starting_at(0.0, Field::new(grid, v.clone())?)))
        .collect::<Result<_>>()?;
    let times = spec.subsystems[0].time_samples();
    for (n, w) in times.windows(2).enumerate() {
        let (t0, t1) = (w[0], w[1]);
        let old = u.clone();
        let data0: Vec<NodalData> = (0..k)
            .map(|j| spec.inputs(j, t0, spec.source(j).map(|s| old[s].as_slice())))
            .collect();
        let mut new = old.clone();
        let mut history = Vec::new();
        loop {
            let mut change: f64 = 0.0;
            for j in 0..k {
                let src = spec.source(j).expect("cycles feed every subsystem");
                let (a, b) = (&old[src], &new[src]);
                let mut provider = |t: f64| Ok(spec.inputs(j, t, Some(&lerp(a, b, (t - t0) / (t1 - t0)))));
                let r = steppers[j].advance(&old[j], t0, t1, &data0[j], &mut provider, steppers[j].scheme_for(n))?;
                let gap = r
                    .values
                    .iter()
                    .zip(&new[j])
                    .fold(0.0_f64, |m, (p, q)| m.max((p - q).abs()));
                change = change.max(gap);
                new[j] = r.values;
            }
            history.push(change);
            if change < SWEEP_TOL {
                break;
            }
            if history.len() >= MAX_SWEEPS || !change.is_finite() {
                return Err(Error::SweepDiverged { t: t1, history });
            }
        }
        for (traj, v) in trajs.iter_mut().zip(&new) {
            traj.push(t1, Field::new(grid, v.clone())?)?;
        }
        u = new;
    }
    Ok(trajs)
}

fn running_sup(values: impl Iterator<Item = f64>, acc: &mut f64) {
    for v in values {
        *acc = acc.max(v.abs());
    }
}

/// Checks every subsystem at every sample against the chain bounds: the
/// space-time sup over `Q_T` always, and the spatial sup at `T` with the
/// `e^{-c_j T}` envelope when `c_j > 0`. Cycles without the small-gain
/// condition, and chains with a non-monotone reaction, are not asserted.
pub fn verify_cascade(spec: &CascadeSpec, trajectories: &[Trajectory], tol: Tolerance) -> Result<Report> {
    let k = spec.k();
    if trajectories.len() != k {
        return Err(Error::Mismatch(format!(
            "{} trajectories for {k} subsystems",
            trajectories.len()
        )));
    }
    let times = spec.subsystems[0].time_samples();
    for (j, traj) in trajectories.iter().enumerate() {
        if *traj.grid() != spec.subsystems[j].grid || traj.times() != times.as_slice() {
            return Err(Error::Mismatch(format!(
                "trajectory {} does not match the cascade",
                j + 1
            )));
        }
    }
    let name = format!("cascade ({})", spec.topology);
    let mode = spec.topology.mode();
    let reason = if mode == CascadeMode::Cycle && !spec.small_gain_holds {
        Some("small-gain violated; no bound asserted".to_string())
    } else {
        spec.subsystems
            .iter()
            .position(|s| !s.reaction.monotone)
            .map(|j| format!("reaction of subsystem {} is not monotone; no bound asserted", j + 1))
    };
    if let Some(reason) = reason {
        let parts = trajectories
            .iter()
            .enumerate()
            .map(|(j, traj)| {
                let obs = traj
                    .times()
                    .iter()
                    .zip(traj.fields())
                    .map(|(t, f)| {
                        let (node, v) = argmax_abs(f);
                        let (x, y) = traj.grid().coords(node);
                        (Location { x, y, t: *t }, v)
                    })
                    .collect();
                Report::not_asserted(format!("subsystem {}", j + 1), reason.clone(), obs)
            })
            .collect();
        return Ok(Report::merge(name, parts).with_note(reason));
    }

    let grid = spec.subsystems[0].grid;
    let boundary = grid.boundary_nodes();
    let all: Vec<usize> = (0..grid.node_count()).collect();
    // running sups of the external input and of each subsystem's own boundary data
    let mut ext_sup: f64 = 0.0;
    let mut own_d = vec![0.0_f64; k];
    let mut st_sup = vec![0.0_f64; k];
    let mut st_loc = vec![Location::default(); k];
    let mut details: Vec<Vec<SampleMargin>> = vec![Vec::new(); k];
    for (n, &t) in times.iter().enumerate() {
        let head = spec.subsystems[0].nodal_data(t);
        match (spec.topology, mode) {
            (Topology::RobinOpen, _) => running_sup(boundary.iter().map(|&i| head.d[i]), &mut ext_sup),
            (Topology::DirichletOpen, _) => running_sup(all.iter().map(|&i| head.f[i]), &mut ext_sup),
            _ => {}
        }
        if spec.topology.kind() == BoundaryKind::Dirichlet {
            for (j, s) in spec.subsystems.iter().enumerate() {
                let d = s.nodal_data(t).d;
                running_sup(boundary.iter().map(|&i| d[i]), &mut own_d[j]);
            }
        }
        for j in 0..k {
            let field = &trajectories[j].fields()[n];
            let (node, spatial) = argmax_abs(field);
            let (x, y) = grid.coords(node);
            if spatial > st_sup[j] || n == 0 {
                st_sup[j] = st_sup[j].max(spatial);
                st_loc[j] = Location { x, y, t };
            }
            let jj = (j + 1) as u32;
            let phi = match mode {
                CascadeMode::Open => spec.phi[j],
                CascadeMode::Cycle => spec.phi[k - 1],
            };
            let bound = |decay: Option<f64>| -> Result<f64> {
                match spec.topology.kind() {
                    BoundaryKind::Robin => cascade_bound_robin(jj, phi, ext_sup, spec.small_gain, decay, t, mode),
                    BoundaryKind::Dirichlet => {
                        let d_sups = match mode {
                            CascadeMode::Open => &own_d[..=j],
                            CascadeMode::Cycle => &own_d[..],
                        };
                        cascade_bound_dirichlet(jj, phi, ext_sup, d_sups, spec.small_gain, decay, t, mode)
                    }
                }
            };
            let b = bound(None)?;
            details[j].push(SampleMargin::new(st_loc[j], st_sup[j], b, tol.at(b)));
            let c_j = spec.subsystems[j].coefficients.bounds().c_min;
            if c_j > 0.0 {
                let b = bound(Some(c_j))?;
                details[j].push(SampleMargin::new(Location { x, y, t }, spatial, b, tol.at(b)));
            }
        }
    }
    let parts = details
        .into_iter()
        .enumerate()
        .map(|(j, d)| Report::from_samples(format!("subsystem {}", j + 1), d))
        .collect();
    let mut report = Report::merge(name, parts);
    report.notes.extend(spec.warnings.iter().cloned());
    Ok(report)
}

/// Level-set diagnostic of every subsystem with the inputs it actually
/// received: `k0` from its initial field and boundary input (divided by
/// `m_min` for Robin data), `rhs = L_f sup |f|` with its own gains.
/// Subsystems whose reaction is not monotone, or Robin subsystems with
/// `c_min = 0`, are not asserted.
pub fn cascade_level_sets(spec: &CascadeSpec, trajectories: &[Trajectory], tol: Tolerance) -> Result<Report> {
    let k = spec.k();
    if trajectories.len() != k {
        return Err(Error::Mismatch(format!(
            "{} trajectories for {k} subsystems",
            trajectories.len()
        )));
    }
    let grid = spec.subsystems[0].grid;
    let boundary = grid.boundary_nodes();
    let mut parts = Vec::with_capacity(k);
    for (j, (s, traj)) in spec.subsystems.iter().zip(trajectories).enumerate() {
        let name = format!("level sets (subsystem {})", j + 1);
        let bounds = s.coefficients.bounds();
        if !s.reaction.monotone {
            parts.push(Report::not_asserted(name, "reaction is not monotone", Vec::new()));
            continue;
        }
        let g = match rkes_gains(s.boundary.kind, &bounds, grid.domain().volume(), &spec.consts, spec.q) {
            Ok(g) => g,
            Err(e) => {
                parts.push(Report::not_asserted(name, e.to_string(), Vec::new()));
                continue;
            }
        };
        let scale = match s.boundary.kind {
            BoundaryKind::Robin => 1.0 / bounds.m_min,
            BoundaryKind::Dirichlet => 1.0,
        };
        let u0 = traj.fields()[0].values();
        let mut hi = u0.iter().cloned().fold(0.0_f64, f64::max);
        let mut lo = u0.iter().map(|v| -v).fold(0.0_f64, f64::max);
        let mut f_sup: f64 = 0.0;
        for (n, &t) in traj.times().iter().enumerate() {
            let source = spec.source(j).map(|src| trajectories[src].fields()[n].values());
            let data = spec.inputs(j, t, source);
            running_sup(data.f.iter().copied(), &mut f_sup);
            for &node in &boundary {
                hi = hi.max(data.d[node] * scale);
                lo = lo.max(-data.d[node] * scale);
            }
        }
        let rhs = g.l_f * f_sup;
        parts.push(level_set_diagnostic(traj, hi, lo, rhs, tol.at(hi.max(lo) + rhs))?.with_note(name.clone()));
    }
    Ok(Report::merge(format!("level sets ({})", spec.topology), parts))
}
