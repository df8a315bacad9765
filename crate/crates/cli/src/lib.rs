//! Config-driven pipelines behind the `isslab` binary. Each command reads
//! one scenario file, runs its pipeline and writes CSV artifacts into an
//! output directory.

pub mod csv;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rayon::prelude::*;

use isslab::backstepping::{
    check_closed_loop_bound, closed_loop_from_config, closed_loop_level_sets, simulate_closed_loop, simulate_open_loop,
};
use isslab::cascade::{build_cascade, cascade_level_sets, simulate_cascade, verify_cascade};
use isslab::gains::{backstepping_c, series_constant_m_cached, superlinear_gain, GainEntry};
use isslab::grid::{sup_norm_space, sup_norm_spacetime};
use isslab::harness::{
    self, check_decay, check_iss, check_rkes, level_set_check, monotonicity_probe_seeded, running_data_sups,
};
use isslab::solver::{boundary_data_from_config, scenario_gains, sobolev_from_config, solve};
use isslab::solver::{convergence_order, Order};
use isslab::{assemble_scenario, Config, Error, Report, Scenario, Tolerance, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Solve a scenario and write its trajectory.
    Simulate,
    /// Evaluate the explicit gain constants of a scenario.
    Gains,
    /// Check the ISS envelope along a simulated trajectory.
    VerifyIss,
    /// Check the Lipschitz estimate on a pair of runs.
    VerifyRkes,
    /// Check exponential decay of an unforced run.
    VerifyDecay,
    /// Simulate the backstepping closed loop and check its envelope.
    Backstep,
    /// Simulate a cascade and check its small-gain bounds.
    Cascade,
    /// Observed convergence orders against an exact solution.
    Convergence,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = self.to_possible_value().expect("no skipped variants");
        f.write_str(name.get_name())
    }
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Pass = 0,
    Fail = 1,
    Config = 2,
    Numerical = 3,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }

    fn of_error(e: &Error) -> Self {
        if e.is_numerical() {
            Status::Numerical
        } else {
            Status::Config
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub out: PathBuf,
    /// Absolute tolerance replacing the grid-dependent rule.
    pub tol: Option<f64>,
    /// Seed for the reaction probes.
    pub seed: u64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            out: PathBuf::from("isslab-out"),
            tol: None,
            seed: harness::DEFAULT_PROBE_SEED,
        }
    }
}

/// Result of one pipeline run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    pub reports: Vec<Report>,
    /// Human-readable lines for the terminal.
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    fn failed(status: Status, message: String) -> Self {
        Outcome {
            status,
            reports: Vec::new(),
            lines: vec![format!("error: {message}")],
            files: Vec::new(),
        }
    }
}

#[derive(Debug)]
enum Failure {
    Core(Error),
    Io(PathBuf, std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

struct Run<'a> {
    cfg: Config,
    opts: &'a Options,
    out: Outcome,
}

impl Run<'_> {
    fn write(&mut self, name: &str, text: String) -> Result<(), Failure> {
        let path = self.opts.out.join(name);
        fs::write(&path, text).map_err(|e| Failure::Io(path.clone(), e))?;
        self.out.files.push(path);
        Ok(())
    }

    fn say(&mut self, line: impl Into<String>) {
        self.out.lines.push(line.into());
    }

    fn tolerance(&self, h: f64, dt: f64) -> Result<Tolerance, Failure> {
        let tol = match self.opts.tol {
            Some(v) => Some(v),
            None => self.cfg.f64_opt("check", "tol")?,
        };
        Ok(tol.map_or(Tolerance::rule(h, dt), Tolerance::fixed))
    }

    fn scenario_tolerance(&self, s: &Scenario) -> Result<Tolerance, Failure> {
        self.tolerance(s.grid.h_max(), s.dt)
    }

    fn report(&mut self, r: Report) {
        let line = summary(&r);
        self.say(line);
        for n in &r.notes {
            self.say(format!("  note: {n}"));
        }
        self.out.reports.push(r);
    }

    /// Flags a reaction declared monotone that fails the random probe.
    fn probe(&mut self, s: &Scenario) {
        if s.reaction.monotone && !monotonicity_probe_seeded(&s.reaction, 2000, self.opts.seed) {
            let name = s.reaction.name();
            self.say(format!(
                "warning: reaction '{name}' is declared monotone but the probe found a violation"
            ));
        }
    }
}

/// One-line verdict summary of a report.
pub fn summary(r: &Report) -> String {
    let witness = r
        .worst_location
        .map(|l| {
            if l.t.is_nan() {
                format!(" at level k={:.4}", l.x)
            } else {
                format!(" at (x={:.4}, y={:.4}, t={:.4})", l.x, l.y, l.t)
            }
        })
        .unwrap_or_default();
    format!(
        "{}: {} (worst margin {:.6e}{witness}, {} samples)",
        r.check, r.verdict, r.worst_margin, r.samples_checked
    )
}

/// Runs `command` on one config file, writing artifacts under `opts.out`.
pub fn run(command: Command, config: &Path, opts: &Options) -> Outcome {
    let cfg = match Config::from_file(config) {
        Ok(c) => c,
        Err(e) => return Outcome::failed(Status::Config, e.to_string()),
    };
    if let Err(e) = fs::create_dir_all(&opts.out) {
        return Outcome::failed(Status::Config, format!("cannot create {}: {e}", opts.out.display()));
    }
    let mut run = Run {
        cfg,
        opts,
        out: Outcome {
            status: Status::Pass,
            reports: Vec::new(),
            lines: Vec::new(),
            files: Vec::new(),
        },
    };
    let result = match command {
        Command::Simulate => simulate(&mut run),
        Command::Gains => gains(&mut run),
        Command::VerifyIss => verify_iss(&mut run),
        Command::VerifyRkes => verify_rkes(&mut run),
        Command::VerifyDecay => verify_decay(&mut run),
        Command::Backstep => backstep(&mut run),
        Command::Cascade => cascade(&mut run),
        Command::Convergence => convergence(&mut run),
    };
    let mut out = run.out;
    match result {
        Ok(()) => {
            if out.reports.iter().any(|r| r.verdict == Verdict::Fail) {
                out.status = Status::Fail;
            }
        }
        Err(Failure::Core(e)) => {
            out.status = Status::of_error(&e);
            out.lines.push(format!("error: {e}"));
        }
        Err(Failure::Io(path, e)) => {
            out.status = Status::Config;
            out.lines.push(format!("error: cannot write {}: {e}", path.display()));
        }
    }
    if !out.reports.is_empty() {
        let text = csv::reports(&out.reports);
        let path = opts.out.join("report.csv");
        match fs::write(&path, text) {
            Ok(()) => out.files.push(path),
            Err(e) => {
                out.status = out.status.max(Status::Config);
                out.lines.push(format!("error: cannot write {}: {e}", path.display()));
            }
        }
    }
    out
}

/// Runs `command` on several configs concurrently. With more than one
/// config each run writes into `out/<config stem>`; outcomes keep the
/// order of `configs`.
pub fn run_many(command: Command, configs: &[PathBuf], opts: &Options) -> Vec<Outcome> {
    if configs.len() == 1 {
        return vec![run(command, &configs[0], opts)];
    }
    configs
        .par_iter()
        .enumerate()
        .map(|(k, path)| {
            let stem = path
                .file_stem()
                .map_or_else(|| format!("run{k}"), |s| s.to_string_lossy().into_owned());
            let sub = Options {
                out: opts.out.join(stem),
                ..opts.clone()
            };
            run(command, path, &sub)
        })
        .collect()
}

fn simulate(run: &mut Run) -> Result<(), Failure> {
    let s = assemble_scenario(&run.cfg)?;
    let traj = solve(&s)?;
    let running = running_data_sups(&traj, &s);
    run.write("trajectory.csv", csv::trajectory(&traj))?;
    run.write("supnorms.csv", csv::supnorms(&traj, &running, None))?;
    let sup = sup_norm_spacetime(&traj)?;
    run.say(format!(
        "simulated {} samples to t = {}, space-time sup {sup:.6e}",
        traj.len(),
        s.horizon
    ));
    Ok(())
}

fn gains(run: &mut Run) -> Result<(), Failure> {
    let mut entries: Vec<GainEntry> = Vec::new();
    if run.cfg.has_section("backstepping") {
        let spec = closed_loop_from_config(&run.cfg)?;
        let m = series_constant_m_cached(spec.c, spec.sigma)?;
        entries.push(GainEntry::new(
            "C",
            backstepping_c(spec.c),
            "min(8*sqrt(2)/pi, 2*sqrt(2)/min(1,c))",
        ));
        entries.push(GainEntry::new("M", m, "sum (c+sigma)^(i+1) 4^i / (i!)^2"));
        let plant = spec.plant()?;
        let (consts, q) = sobolev_from_config(&run.cfg, &plant.grid)?;
        entries.extend(scenario_gains(&plant, &consts, q)?.entries());
    } else {
        let s = assemble_scenario(&run.cfg)?;
        let (consts, q) = sobolev_from_config(&run.cfg, &s.grid)?;
        entries.extend(scenario_gains(&s, &consts, q)?.entries());
    }
    if let Some(n) = run.cfg.f64_opt("check", "superlinear_n")? {
        if n.fract() != 0.0 || n < 0.0 {
            return Err(Error::Config(format!("superlinear_n must be a whole number, got {n}")).into());
        }
        let volume = run.cfg.f64_or("check", "superlinear_volume", 1.0)?;
        let g = superlinear_gain(n as u32, volume)?;
        entries.push(GainEntry::new(
            "superlinear_gain",
            g,
            format!("n = {n}, |Omega| = {volume}"),
        ));
    }
    for e in &entries {
        let line = format!("{:<18} {:>24.16e}  {}", e.name, e.value, e.provenance);
        run.say(line);
    }
    run.write("gains.csv", csv::gains(&entries))
}

fn verify_iss(run: &mut Run) -> Result<(), Failure> {
    let s = assemble_scenario(&run.cfg)?;
    run.probe(&s);
    let (consts, q) = sobolev_from_config(&run.cfg, &s.grid)?;
    let g = scenario_gains(&s, &consts, q)?;
    let traj = solve(&s)?;
    let tol = run.scenario_tolerance(&s)?;
    let iss = check_iss(&traj, &s, &g, tol)?;
    let running = running_data_sups(&traj, &s);
    run.write("trajectory.csv", csv::trajectory(&traj))?;
    run.write("supnorms.csv", csv::supnorms(&traj, &running, Some(&iss)))?;
    let asserted = iss.verdict != Verdict::NotAsserted;
    run.report(iss);
    if asserted {
        let levels = level_set_check(&traj, &s, &g, tol)?;
        run.report(levels);
    }
    Ok(())
}

fn verify_rkes(run: &mut Run) -> Result<(), Failure> {
    let s1 = assemble_scenario(&run.cfg)?;
    let f2 = run.cfg.expr_or("disturbances", "f2", "0", isslab::expr::SPACE_TIME)?;
    let d2 = boundary_data_from_config(&run.cfg, &s1.grid, "2")?;
    let s2 = s1.with_disturbances(f2, d2);
    s2.validate()?;
    let (consts, q) = sobolev_from_config(&run.cfg, &s1.grid)?;
    let g = scenario_gains(&s1, &consts, q)?;
    let (a, b) = rayon::join(|| solve(&s1), || solve(&s2));
    let (t1, t2) = (a?, b?);
    let tol = run.scenario_tolerance(&s1)?;
    let report = check_rkes((&t1, &s1), (&t2, &s2), &g, tol)?;
    run.write("trajectory.csv", csv::trajectory(&t1))?;
    run.write("trajectory2.csv", csv::trajectory(&t2))?;
    let diff = isslab::grid::diff_trajectory(&t1, &t2)?;
    let rows = diff
        .times()
        .iter()
        .copied()
        .zip(report.details.iter().map(|d| d.observed));
    run.write("difference.csv", csv::series("t,running_sup_diff", rows))?;
    run.say(format!("L_f = {:.6e}, L_d = {:.6e}", g.l_f, g.l_d));
    run.report(report);
    Ok(())
}

fn verify_decay(run: &mut Run) -> Result<(), Failure> {
    let s = assemble_scenario(&run.cfg)?;
    run.probe(&s);
    let c_min = s.coefficients.bounds().c_min;
    let traj = solve(&s)?;
    let u0_sup = sup_norm_space(&traj.fields()[0])?;
    let tol = run.scenario_tolerance(&s)?;
    let report = check_decay(&traj, &s, c_min, u0_sup, tol)?;
    let running = running_data_sups(&traj, &s);
    run.write("trajectory.csv", csv::trajectory(&traj))?;
    run.write("supnorms.csv", csv::supnorms(&traj, &running, Some(&report)))?;
    run.report(report);
    let (consts, q) = sobolev_from_config(&run.cfg, &s.grid)?;
    let g = scenario_gains(&s, &consts, q)?;
    let levels = level_set_check(&traj, &s, &g, tol)?;
    run.report(levels);
    Ok(())
}

fn backstep(run: &mut Run) -> Result<(), Failure> {
    let spec = closed_loop_from_config(&run.cfg)?;
    let cl = simulate_closed_loop(&spec)?;
    let tol = run.tolerance(spec.grid.h_x(), spec.dt)?;
    let report = check_closed_loop_bound(&cl.u, &spec, tol)?;
    let plant = spec.plant()?;
    let running = running_data_sups(&cl.u, &plant);
    run.write("trajectory.csv", csv::trajectory(&cl.u))?;
    run.write("target.csv", csv::trajectory(&cl.w))?;
    run.write("supnorms.csv", csv::supnorms(&cl.u, &running, Some(&report)))?;
    let control = cl.u.times().iter().copied().zip(cl.control.iter().copied());
    run.write("control.csv", csv::series("t,control", control))?;
    run.say(format!("M = {:.6e}, C = {:.6e}", cl.m, backstepping_c(spec.c)));
    if run.cfg.bool_or("backstepping", "open_loop", false)? {
        let open = simulate_open_loop(&spec)?;
        let sups = open.sup_series()?;
        let growth = sups[sups.len() - 1] / sups[0];
        run.say(format!(
            "open loop: sup-norm grows by a factor {growth:.6e} up to t = {}",
            spec.horizon
        ));
        let rows = open.times().iter().copied().zip(sups);
        run.write("open_loop.csv", csv::series("t,sup_space", rows))?;
    }
    run.report(report);
    let levels = closed_loop_level_sets(&cl, &spec, tol)?;
    run.report(levels);
    Ok(())
}

fn cascade(run: &mut Run) -> Result<(), Failure> {
    let spec = build_cascade(&run.cfg)?;
    for s in &spec.subsystems {
        run.probe(s);
    }
    for w in &spec.warnings {
        run.say(format!("warning: {w}"));
    }
    let trajs = simulate_cascade(&spec)?;
    let first = &spec.subsystems[0];
    let tol = run.scenario_tolerance(first)?;
    let report = verify_cascade(&spec, &trajs, tol)?;
    for (j, traj) in trajs.iter().enumerate() {
        run.write(&format!("trajectory_{}.csv", j + 1), csv::trajectory(traj))?;
    }
    run.report(report);
    let levels = cascade_level_sets(&spec, &trajs, tol)?;
    run.report(levels);
    Ok(())
}

fn convergence(run: &mut Run) -> Result<(), Failure> {
    let s = assemble_scenario(&run.cfg)?;
    let exact = run.cfg.expr_opt("check", "exact", isslab::expr::SPACE_TIME)?;
    let exact = exact.ok_or_else(|| Error::Config("convergence needs [check] exact".into()))?;
    let levels = run.cfg.usize_or("check", "refinements", 4)?;
    let min_order = run.cfg.f64_or("check", "min_order", 1.9)?;
    let res = convergence_order(&s, &exact, levels)?;
    let mut text = String::from("ladder,step,sup_error\n");
    for (label, rows) in [("space", &res.space_errors), ("time", &res.time_errors)] {
        for (step, err) in rows {
            text.push_str(&format!("{label},{},{}\n", csv::real(*step), csv::real(*err)));
        }
    }
    run.write("convergence.csv", text)?;
    for w in &res.warnings {
        run.say(format!("warning: {w}"));
    }
    for (label, order) in [("space", res.p_space), ("time", res.p_time)] {
        let margin = match order {
            Order::Rate(p) => p - min_order,
            Order::Exact => f64::INFINITY,
        };
        let verdict = if order.at_least(min_order) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        run.report(Report {
            check: format!("order in {label} (observed {order}, required {min_order})"),
            verdict,
            worst_margin: margin,
            worst_location: None,
            samples_checked: levels,
            details: Vec::new(),
            notes: Vec::new(),
        });
    }
    Ok(())
}
