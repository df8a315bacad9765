use crate::error::{Error, Result};
use crate::gains::BoundaryKind;
use crate::grid::{Field, Trajectory};

use super::linalg::{pcg, thomas};
use super::Scenario;

/// Newton stops once `dt |F_i| / |cell_i| <= NEWTON_TOL * max(1, sup|u|)`.
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
const CG_TOL: f64 = 1e-12;
const MAX_HALVINGS: usize = 12;

/// Source `f` and boundary value `d` at every node for one time instant.
/// Entries of `d` at interior nodes are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalData {
    pub f: Vec<f64>,
    pub d: Vec<f64>,
}

impl NodalData {
    pub fn zeros(n: usize) -> Self {
        NodalData {
            f: vec![0.0; n],
            d: vec![0.0; n],
        }
    }

    /// `(1-s) a + s b`.
    pub fn lerp(a: &NodalData, b: &NodalData, s: f64) -> NodalData {
        let mix = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (1.0 - s) * p + s * q).collect();
        NodalData {
            f: mix(&a.f, &b.f),
            d: mix(&a.d, &b.d),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    CrankNicolson,
    BackwardEuler,
    /// Two backward-Euler half steps; damps start-up oscillations.
    Rannacher,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub values: Vec<f64>,
    /// Data at the end of the step, reusable as the next step's start.
    pub end_data: NodalData,
    pub newton_iterations: usize,
    /// Final scaled residual of the last (sub)step.
    pub residual: f64,
}

/// Finite-volume discretization of one scenario, reusable across steps.
///
/// Unknowns live on all nodes. Each node owns a control cell (half cells
/// on edges); fluxes between neighbours use `a` at the face midpoint.
/// Robin data enter as `|boundary piece| (m u - d)`, Dirichlet nodes are
/// pinned to `d`.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    scenario: &'a Scenario,
    weight: Vec<f64>,
    c: Vec<f64>,
    robin: Vec<f64>,
    boundary_weight: Vec<f64>,
    east: Vec<f64>,
    north: Vec<f64>,
    fixed: Vec<bool>,
    coords: Vec<(f64, f64)>,
}

impl<'a> Stepper<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        scenario.validate()?;
        let g = &scenario.grid;
        let n = g.node_count();
        let coef = &scenario.coefficients;
        let point = |x: f64, y: f64| crate::expr::Point::new(x, y, 0.0);
        let coords: Vec<(f64, f64)> = (0..n).map(|k| g.coords(k)).collect();
        let weight: Vec<f64> = (0..n).map(|k| g.cell_measure(k)).collect();
        let c: Vec<f64> = coords.iter().map(|&(x, y)| coef.c.eval(&point(x, y))).collect();
        let robin_kind = scenario.boundary.kind == BoundaryKind::Robin;
        let boundary_weight: Vec<f64> = (0..n)
            .map(|k| if robin_kind { g.boundary_measure(k) } else { 0.0 })
            .collect();
        let robin: Vec<f64> = (0..n)
            .map(|k| {
                let (x, y) = coords[k];
                boundary_weight[k]
                    * if boundary_weight[k] > 0.0 {
                        coef.m.eval(&point(x, y))
                    } else {
                        0.0
                    }
            })
            .collect();
        let fixed: Vec<bool> = (0..n).map(|k| !robin_kind && g.is_boundary(k)).collect();

        let (n_x, n_y) = (g.n_x(), g.n_y());
        let (h_x, h_y) = (g.h_x(), g.h_y());
        let two_d = g.dim() == 2;
        let mut east = vec![0.0; n];
        let mut north = vec![0.0; n];
        for j in 0..n_y {
            for i in 0..n_x {
                let k = g.index(i, j);
                let (x, y) = coords[k];
                if i + 1 < n_x {
                    let xm = 0.5 * (x + g.x_at(i + 1));
                    let face = if two_d { edge_factor(j, n_y) * h_y } else { 1.0 };
                    east[k] = coef.a.eval(&point(xm, y)) * face / h_x;
                }
                if two_d && j + 1 < n_y {
                    let ym = 0.5 * (y + g.y_at(j + 1));
                    let face = edge_factor(i, n_x) * h_x;
                    north[k] = coef.a.eval(&point(x, ym)) * face / h_y;
                }
            }
        }
        for (k, v) in east.iter().chain(&north).enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::config(format!("non-positive diffusion at face {k}")));
            }
        }
        Ok(Stepper {
            scenario,
            weight,
            c,
            robin,
            boundary_weight,
            east,
            north,
            fixed,
            coords,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    fn n_x(&self) -> usize {
        self.scenario.grid.n_x()
    }

    /// `out = K u`: diffusion plus the Robin `m` term.
    fn apply_k(&self, u: &[f64], out: &mut [f64]) {
        let n_x = self.n_x();
        for i in 0..u.len() {
            out[i] = self.robin[i] * u[i];
        }
        for i in 0..u.len() {
            let g = self.east[i];
            if g != 0.0 {
                let flux = g * (u[i] - u[i + 1]);
                out[i] += flux;
                out[i + 1] -= flux;
            }
            let g = self.north[i];
            if g != 0.0 {
                let flux = g * (u[i] - u[i + n_x]);
                out[i] += flux;
                out[i + n_x] -= flux;
            }
        }
    }

    /// `K u + W (c u + h(t, u) - f) - b`.
    fn spatial_residual(&self, t: f64, u: &[f64], data: &NodalData, out: &mut [f64]) {
        self.apply_k(u, out);
        let h = &self.scenario.reaction;
        for i in 0..u.len() {
            let (x, y) = self.coords[i];
            out[i] += self.weight[i] * (self.c[i] * u[i] + h.value(x, y, t, u[i]) - data.f[i])
                - self.boundary_weight[i] * data.d[i];
        }
    }

    /// One theta-scheme step from `t0` to `t1`.
    fn theta_step(
        &self,
        u_old: &[f64],
        t0: f64,
        t1: f64,
        data0: &NodalData,
        data1: &NodalData,
        theta: f64,
    ) -> Result<(Vec<f64>, usize, f64)> {
        let n = u_old.len();
        let dt = t1 - t0;
        let mut old_part = vec![0.0; n];
        if theta < 1.0 {
            self.spatial_residual(t0, u_old, data0, &mut old_part);
            old_part.iter_mut().for_each(|v| *v *= 1.0 - theta);
        }
        let mut u = u_old.to_vec();
        for i in 0..n {
            if self.fixed[i] {
                u[i] = data1.d[i];
            }
        }
        let mut scratch = vec![0.0; n];
        let residual = |u: &[f64], out: &mut [f64], scratch: &mut [f64]| -> f64 {
            self.spatial_residual(t1, u, data1, scratch);
            let mut worst: f64 = 0.0;
            for i in 0..n {
                if self.fixed[i] {
                    out[i] = 0.0;
                    continue;
                }
                out[i] = self.weight[i] * (u[i] - u_old[i]) / dt + theta * scratch[i] + old_part[i];
                let r = dt * out[i].abs() / self.weight[i];
                if !r.is_finite() {
                    return f64::NAN;
                }
                worst = worst.max(r);
            }
            worst
        };
        let sup = |u: &[f64]| u.iter().fold(1.0_f64, |m, v| m.max(v.abs()));

        let mut f = vec![0.0; n];
        let mut norm = residual(&u, &mut f, &mut scratch);
        let mut history = vec![norm];
        let mut trial = vec![0.0; n];
        let mut f_trial = vec![0.0; n];
        for iter in 0..=NEWTON_MAX_ITER {
            if !norm.is_finite() {
                break;
            }
            if norm <= NEWTON_TOL * sup(&u) {
                return Ok((u, iter, norm));
            }
            if iter == NEWTON_MAX_ITER {
                break;
            }
            let delta = self.newton_direction(&u, t1, dt, theta, &f)?;
            let mut alpha = 1.0;
            let mut best: Option<(f64, f64)> = None;
            for _ in 0..MAX_HALVINGS {
                for i in 0..n {
                    trial[i] = u[i] + alpha * delta[i];
                }
                let r = residual(&trial, &mut f_trial, &mut scratch);
                if r.is_finite() && best.is_none_or(|(_, b)| r < b) {
                    best = Some((alpha, r));
                }
                if r.is_finite() && r <= (1.0 - 1e-4 * alpha) * norm {
                    break;
                }
                alpha *= 0.5;
            }
            let (alpha, _) = best.unwrap_or((1.0, f64::NAN));
            for i in 0..n {
                u[i] += alpha * delta[i];
            }
            norm = residual(&u, &mut f, &mut scratch);
            history.push(norm);
        }
        Err(Error::NewtonDiverged { t: t1, history })
    }

    /// Solves `J delta = -F` with
    /// `J = W/dt + theta (K + W diag(c + h'(u)))`; pinned nodes get `delta = 0`.
    fn newton_direction(&self, u: &[f64], t: f64, dt: f64, theta: f64, f: &[f64]) -> Result<Vec<f64>> {
        let n = u.len();
        let n_x = self.n_x();
        let h = &self.scenario.reaction;
        let mut diag = vec![0.0; n];
        for i in 0..n {
            if self.fixed[i] {
                diag[i] = 1.0;
                continue;
            }
            let (x, y) = self.coords[i];
            let mut k_diag = self.robin[i] + self.east[i] + self.north[i];
            if i >= 1 {
                k_diag += self.east[i - 1];
            }
            if i >= n_x {
                k_diag += self.north[i - n_x];
            }
            diag[i] =
                self.weight[i] / dt + theta * (k_diag + self.weight[i] * (self.c[i] + h.derivative(x, y, t, u[i])));
        }
        let rhs: Vec<f64> = (0..n).map(|i| if self.fixed[i] { 0.0 } else { -f[i] }).collect();
        let coupled = |a: usize, b: usize| !self.fixed[a] && !self.fixed[b];

        if self.scenario.grid.dim() == 1 {
            let mut lower = vec![0.0; n];
            let mut upper = vec![0.0; n];
            for i in 0..n.saturating_sub(1) {
                if coupled(i, i + 1) {
                    upper[i] = -theta * self.east[i];
                    lower[i + 1] = -theta * self.east[i];
                }
            }
            return thomas(&lower, &diag, &upper, &rhs);
        }
        let apply = |x: &[f64], out: &mut [f64]| {
            for i in 0..n {
                out[i] = diag[i] * x[i];
            }
            for i in 0..n {
                let g = self.east[i];
                if g != 0.0 && coupled(i, i + 1) {
                    out[i] -= theta * g * x[i + 1];
                    out[i + 1] -= theta * g * x[i];
                }
                let g = self.north[i];
                if g != 0.0 && coupled(i, i + n_x) {
                    out[i] -= theta * g * x[i + n_x];
                    out[i + n_x] -= theta * g * x[i];
                }
            }
        };
        pcg(apply, &diag, &rhs, CG_TOL, 20 * n + 100)
    }

    /// Advances from `t0` to `t1`. `data0` holds the inputs at `t0`;
    /// `provider` supplies inputs at later instants.
    pub fn advance(
        &self,
        u_old: &[f64],
        t0: f64,
        t1: f64,
        data0: &NodalData,
        provider: &mut dyn FnMut(f64) -> Result<NodalData>,
        scheme: Scheme,
    ) -> Result<StepResult> {
        if u_old.len() != self.weight.len() {
            return Err(Error::Mismatch(format!(
                "state has {} values, grid has {} nodes",
                u_old.len(),
                self.weight.len()
            )));
        }
        if !(t1 > t0) {
            return Err(Error::invalid(format!("step end {t1} must exceed start {t0}")));
        }
        let (values, iters, residual, end_data) = match scheme {
            Scheme::CrankNicolson => {
                let d1 = provider(t1)?;
                let (v, k, r) = self.theta_step(u_old, t0, t1, data0, &d1, 0.5)?;
                (v, k, r, d1)
            }
            Scheme::BackwardEuler => {
                let d1 = provider(t1)?;
                let (v, k, r) = self.theta_step(u_old, t0, t1, data0, &d1, 1.0)?;
                (v, k, r, d1)
            }
            Scheme::Rannacher => {
                let tm = 0.5 * (t0 + t1);
                let dm = provider(tm)?;
                let (vm, k1, _) = self.theta_step(u_old, t0, tm, data0, &dm, 1.0)?;
                let d1 = provider(t1)?;
                let (v, k2, r) = self.theta_step(&vm, tm, t1, &dm, &d1, 1.0)?;
                (v, k1 + k2, r, d1)
            }
        };
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node });
        }
        Ok(StepResult {
            values,
            end_data,
            newton_iterations: iters,
            residual,
        })
    }

    pub fn scheme_for(&self, step_index: usize) -> Scheme {
        if step_index < self.scenario.startup_steps {
            Scheme::Rannacher
        } else {
            Scheme::CrankNicolson
        }
    }
}

fn edge_factor(index: usize, count: usize) -> f64 {
    if index == 0 || index + 1 == count {
        0.5
    } else {
        1.0
    }
}

/// One Crank-Nicolson step of `scenario` from `t` to `t + dt`.
pub fn step(state: &Field, t: f64, dt: f64, scenario: &Scenario) -> Result<Field> {
    if state.grid() != &scenario.grid {
        return Err(Error::Mismatch("state is not on the scenario grid".into()));
    }
    let stepper = Stepper::new(scenario)?;
    let data0 = scenario.nodal_data(t);
    let r = stepper.advance(
        state.values(),
        t,
        t + dt,
        &data0,
        &mut |s| Ok(scenario.nodal_data(s)),
        Scheme::CrankNicolson,
    )?;
    Field::new(scenario.grid, r.values)
}

/// Integrates `scenario` over its horizon with its own data.
pub fn solve(scenario: &Scenario) -> Result<Trajectory> {
    solve_with_data(scenario, |t| Ok(scenario.nodal_data(t)))
}

/// Integrates `scenario` with inputs supplied by `provider` instead of the
/// scenario's disturbance expressions.
pub fn solve_with_data(scenario: &Scenario, mut provider: impl FnMut(f64) -> Result<NodalData>) -> Result<Trajectory> {
    let stepper = Stepper::new(scenario)?;
    let times = scenario.time_samples();
    let mut u = scenario.initial_field().into_values();
    let mut traj = Trajectory::starting_at(0.0, Field::new(scenario.grid, u.clone())?);
    let mut data = provider(0.0)?;
    for (k, w) in times.windows(2).enumerate() {
        let r = stepper.advance(&u, w[0], w[1], &data, &mut provider, stepper.scheme_for(k))?;
        u = r.values;
        data = r.end_data;
        traj.push(w[1], Field::new(scenario.grid, u.clone())?)?;
    }
    Ok(traj)
}
