//! Boundary feedback for `u_t = u_xx + c u + f` on `(0, 1)` with
//! `u(0) = d0`, `u(1) = d1 + U`, through the Volterra transform
//! `w = u + int_0^x k(x, y) u(y) dy` onto `w_t = w_xx - sigma w`.
//!
//! The kernel solves `k_xx - k_yy = lambda k`, `k(x, 0) = 0`,
//! `k(x, x) = lambda x / 2` with `lambda = c + sigma`. In the variables
//! `xi = x + y`, `eta = x - y` this is the integral equation
//! `G = (lambda/4)(xi - eta) + (lambda/4) int_eta^xi int_0^eta G`, solved
//! here by successive approximation with exact polynomial integration.

use std::collections::BTreeMap;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::expr::{Expr, Point, SPACE_TIME};
use crate::gains::{
    bound_prop2, rkes_gains, series_constant_m_cached, sobolev_constants_interval, BoundaryKind, CoefficientBounds,
    Exponent,
};
use crate::grid::{sup_norm_space, Domain, Field, SpatialGrid, Trajectory};
use crate::harness::{level_set_diagnostic, Location, Report, SampleMargin, Tolerance};
use crate::solver::{
    grid_from_config, BoundaryData, BoundarySpec, Coefficients, NodalData, ReactionTerm, Scenario, Stepper,
};
use crate::special::i1_over_z;

pub const DEFAULT_KERNEL_NODES: usize = 201;
pub const MAX_SERIES_TERMS: usize = 200;
const SWEEP_TOL: f64 = 1e-12;
const MIN_SWEEPS: usize = 2;
const MAX_SWEEPS: usize = 20;

/// Bivariate polynomial in `(xi, eta)`, keyed by exponents.
type Poly = BTreeMap<(u32, u32), f64>;

fn poly_eval(p: &Poly, xi: f64, eta: f64) -> f64 {
    p.iter()
        .map(|(&(a, b), c)| c * xi.powi(a as i32) * eta.powi(b as i32))
        .sum()
}

/// `(lambda/4) int_eta^xi int_0^eta p(tau, s) ds dtau`.
fn picard_image(p: &Poly, lambda: f64) -> Poly {
    let mut out = Poly::new();
    for (&(a, b), &c) in p {
        let coef = c * lambda / 4.0 / ((b + 1) as f64 * (a + 1) as f64);
        *out.entry((a + 1, b + 1)).or_insert(0.0) += coef;
        *out.entry((0, a + b + 2)).or_insert(0.0) -= coef;
    }
    out.retain(|_, c| *c != 0.0);
    out
}

/// Backstepping kernel on `[0,1]^2` sampled at `n_k` nodes per edge. Only
/// the triangle `0 <= y <= x <= 1` is meaningful; the polynomial extension
/// beyond the diagonal keeps bilinear interpolation well defined.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    lambda: f64,
    n_k: usize,
    values: Vec<f64>,
    series: Poly,
    terms_used: usize,
}

impl Kernel {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn nodes_per_edge(&self) -> usize {
        self.n_k
    }

    pub fn series_terms_used(&self) -> usize {
        self.terms_used
    }

    fn h(&self) -> f64 {
        1.0 / (self.n_k - 1) as f64
    }

    /// Stored value at grid node `(x_i, y_j)`.
    pub fn node(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_k + j]
    }

    /// Values on the triangle `j <= i` as `(x, y, k)`.
    pub fn triangle(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let h = self.h();
        (0..self.n_k).flat_map(move |i| (0..=i).map(move |j| (i as f64 * h, j as f64 * h, self.node(i, j))))
    }

    /// Bilinear interpolation of the stored grid.
    pub fn at(&self, x: f64, y: f64) -> f64 {
        let h = self.h();
        let last = self.n_k - 2;
        let fx = (x / h).clamp(0.0, (self.n_k - 1) as f64);
        let fy = (y / h).clamp(0.0, (self.n_k - 1) as f64);
        let i = (fx.floor() as usize).min(last);
        let j = (fy.floor() as usize).min(last);
        let (sx, sy) = (fx - i as f64, fy - j as f64);
        let v00 = self.node(i, j);
        let v10 = self.node(i + 1, j);
        let v01 = self.node(i, j + 1);
        let v11 = self.node(i + 1, j + 1);
        (1.0 - sx) * ((1.0 - sy) * v00 + sy * v01) + sx * ((1.0 - sy) * v10 + sy * v11)
    }

    /// Truncated series evaluated directly, without interpolation.
    pub fn series_at(&self, x: f64, y: f64) -> f64 {
        poly_eval(&self.series, x + y, x - y)
    }

    /// `dk/dy (x, 0)` from the series.
    pub fn dy_at_zero(&self, x: f64) -> f64 {
        // d/dy = d/dxi - d/deta, evaluated at xi = eta = x
        self.series
            .iter()
            .map(|(&(a, b), c)| {
                let d_xi = if a > 0 {
                    a as f64 * x.powi(a as i32 - 1) * x.powi(b as i32)
                } else {
                    0.0
                };
                let d_eta = if b > 0 {
                    b as f64 * x.powi(a as i32) * x.powi(b as i32 - 1)
                } else {
                    0.0
                };
                c * (d_xi - d_eta)
            })
            .sum()
    }

    /// Largest `|k|` over the stored triangle.
    pub fn sup_abs(&self) -> f64 {
        self.triangle().fold(0.0, |m, (_, _, v)| m.max(v.abs()))
    }
}

fn series_kernel(lambda: f64, n_k: usize, tol: f64) -> Result<Kernel> {
    if n_k < 11 {
        return Err(Error::invalid(format!(
            "kernel needs at least 11 nodes per edge, got {n_k}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tol must be > 0, got {tol}")));
    }
    let h = 1.0 / (n_k - 1) as f64;
    let mut values = vec![0.0; n_k * n_k];
    let mut term: Poly = [((1, 0), lambda / 4.0), ((0, 1), -lambda / 4.0)].into_iter().collect();
    let mut series = Poly::new();
    for n in 0..MAX_SERIES_TERMS {
        let mut sup: f64 = 0.0;
        for i in 0..n_k {
            let x = i as f64 * h;
            for j in 0..n_k {
                let y = j as f64 * h;
                let v = poly_eval(&term, x + y, x - y);
                values[i * n_k + j] += v;
                if j <= i {
                    sup = sup.max(v.abs());
                }
            }
        }
        for (&key, &c) in &term {
            *series.entry(key).or_insert(0.0) += c;
        }
        if !sup.is_finite() {
            return Err(Error::SeriesOverflow {
                terms: n + 1,
                partial_sum: f64::NAN,
            });
        }
        if sup < tol {
            return Ok(Kernel {
                lambda,
                n_k,
                values,
                series,
                terms_used: n + 1,
            });
        }
        term = picard_image(&term, lambda);
    }
    let partial = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Err(Error::SeriesOverflow {
        terms: MAX_SERIES_TERMS,
        partial_sum: partial,
    })
}

/// Kernel `k` for `lambda = c + sigma`.
pub fn kernel_series(c: f64, sigma: f64, n_k: usize, tol: f64) -> Result<Kernel> {
    check_params(c, sigma)?;
    series_kernel(c + sigma, n_k, tol)
}

/// Kernel `l` of the inverse transform: the same equation with `lambda`
/// replaced by `-(c + sigma)`.
pub fn inverse_kernel_series(c: f64, sigma: f64, n_k: usize, tol: f64) -> Result<Kernel> {
    check_params(c, sigma)?;
    series_kernel(-(c + sigma), n_k, tol)
}

fn check_params(c: f64, sigma: f64) -> Result<()> {
    if !(c > 0.0 && sigma > 0.0) {
        return Err(Error::invalid(format!(
            "c and sigma must be > 0, got c = {c}, sigma = {sigma}"
        )));
    }
    Ok(())
}

/// Closed form `lambda y I1(z)/z`, `z = sqrt(lambda (x^2 - y^2))`.
pub fn kernel_bessel_oracle(c: f64, sigma: f64, x: f64, y: f64) -> f64 {
    let lambda = c + sigma;
    lambda * y * i1_over_z(lambda * (x * x - y * y))
}

/// Closed form of the inverse kernel, `-lambda y J1(w)/w`,
/// `w = sqrt(lambda (x^2 - y^2))`.
pub fn inverse_kernel_bessel_oracle(c: f64, sigma: f64, x: f64, y: f64) -> f64 {
    let lambda = -(c + sigma);
    lambda * y * i1_over_z(lambda * (x * x - y * y))
}

/// Weights (in units of `h`) for integrating over `m` equal intervals:
/// closed Newton-Cotes for `m <= 4`, and from `m = 5` on the trapezoid
/// rule with Gregory end corrections `(3/8, 7/6, 23/24)`. Exact for cubics
/// whenever `m >= 2`.
pub fn volterra_weights(m: usize) -> Vec<f64> {
    match m {
        0 => vec![0.0],
        1 => vec![0.5, 0.5],
        2 => vec![1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0],
        3 => vec![3.0 / 8.0, 9.0 / 8.0, 9.0 / 8.0, 3.0 / 8.0],
        4 => vec![14.0 / 45.0, 64.0 / 45.0, 24.0 / 45.0, 64.0 / 45.0, 14.0 / 45.0],
        _ => {
            let mut w = vec![1.0; m + 1];
            for (k, v) in [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0].into_iter().enumerate() {
                w[k] = v;
                w[m - k] = v;
            }
            w
        }
    }
}

/// `int_0^h` from the nodes `0, h, 2h, 3h` (exact for cubics); the kernel
/// is evaluated past the diagonal through its polynomial extension.
const FIRST_INTERVAL: [f64; 4] = [9.0 / 24.0, 19.0 / 24.0, -5.0 / 24.0, 1.0 / 24.0];

fn unit_interval_grid(field: &Field) -> Result<&SpatialGrid> {
    let g = field.grid();
    match g.domain() {
        Domain::Interval { x_lo, x_hi } if *x_lo == 0.0 && *x_hi == 1.0 => Ok(g),
        _ => Err(Error::Mismatch("backstepping transforms need a field on (0, 1)".into())),
    }
}

fn volterra(u: &Field, k: &Kernel) -> Result<Field> {
    let g = unit_interval_grid(u)?;
    let h = g.h_x();
    let n = g.n_x();
    let vals = u.values();
    let xs: Vec<f64> = (0..n).map(|i| g.x_at(i)).collect();
    let out = (0..n)
        .map(|i| {
            let integral: f64 = if i == 1 && n >= 4 {
                // a lone trapezoid would leave an O(h^3) error here
                FIRST_INTERVAL
                    .iter()
                    .enumerate()
                    .map(|(j, w)| w * k.at(xs[1], xs[j]) * vals[j])
                    .sum()
            } else {
                let w = volterra_weights(i);
                (0..=i).map(|j| w[j] * k.at(xs[i], xs[j]) * vals[j]).sum()
            };
            vals[i] + h * integral
        })
        .collect();
    Field::new(*g, out)
}

/// `w(x) = u(x) + int_0^x k(x, y) u(y) dy`.
pub fn forward_transform(u: &Field, k: &Kernel) -> Result<Field> {
    volterra(u, k)
}

/// `u(x) = w(x) + int_0^x l(x, y) w(y) dy`.
pub fn inverse_transform(w: &Field, l: &Kernel) -> Result<Field> {
    volterra(w, l)
}

/// `U = -int_0^1 k(1, y) u(y) dy`, with the transform's quadrature.
pub fn control_signal(u: &Field, k: &Kernel) -> Result<f64> {
    let g = unit_interval_grid(u)?;
    let n = g.n_x();
    let w = volterra_weights(n - 1);
    let s: f64 = (0..n).map(|j| w[j] * k.at(1.0, g.x_at(j)) * u.values()[j]).sum();
    Ok(-g.h_x() * s)
}

/// Problem data of a closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopSpec {
    pub c: f64,
    pub sigma: f64,
    pub u0: Expr,
    pub f: Expr,
    pub d0: Expr,
    pub d1: Expr,
    pub grid: SpatialGrid,
    pub dt: f64,
    pub horizon: f64,
    pub kernel_nodes: usize,
    pub startup_steps: usize,
}

impl ClosedLoopSpec {
    /// Plant `u_t = u_xx + c u + f` as a solver scenario: the destabilizing
    /// term enters as the reaction `-c u`.
    pub fn plant(&self) -> Result<Scenario> {
        let s = Scenario {
            grid: self.grid,
            horizon: self.horizon,
            dt: self.dt,
            coefficients: Coefficients::constant(1.0, 0.0, 1.0)?,
            reaction: ReactionTerm::linear(-self.c),
            f: self.f.clone(),
            boundary: BoundarySpec {
                kind: BoundaryKind::Dirichlet,
                data: BoundaryData::Ends {
                    left: self.d0.clone(),
                    right: self.d1.clone(),
                },
            },
            u0: self.u0.clone(),
            startup_steps: self.startup_steps,
        };
        s.validate()?;
        Ok(s)
    }
}

/// Closed-loop problem from `[backstepping]` (`c`, `sigma`, `kernel_nodes`),
/// `[disturbances]` (`u0`, `f`), `[boundary]` (`d_left`, `d_right`) and
/// `[grid]`. The domain must be the unit interval.
pub fn closed_loop_from_config(cfg: &Config) -> Result<ClosedLoopSpec> {
    let grid = grid_from_config(cfg)?;
    if grid.dim() != 1 || grid.domain().x_bounds() != (0.0, 1.0) {
        return Err(Error::Config("the closed loop lives on the interval (0, 1)".into()));
    }
    let c = cfg.require_f64("backstepping", "c")?;
    let sigma = cfg.require_f64("backstepping", "sigma")?;
    if !(c > 0.0 && sigma > 0.0) {
        return Err(Error::Config(format!(
            "need c > 0 and sigma > 0, got c = {c}, sigma = {sigma}"
        )));
    }
    let spec = ClosedLoopSpec {
        c,
        sigma,
        u0: cfg.expr_or("disturbances", "u0", "sin(pi*x)", SPACE_TIME)?,
        f: cfg.expr_or("disturbances", "f", "0", SPACE_TIME)?,
        d0: cfg.expr_or("boundary", "d_left", "0", SPACE_TIME)?,
        d1: cfg.expr_or("boundary", "d_right", "0", SPACE_TIME)?,
        grid,
        dt: cfg.f64_or("grid", "dt", 1e-3)?,
        horizon: cfg.f64_or("grid", "horizon", 1.0)?,
        kernel_nodes: cfg.usize_or("backstepping", "kernel_nodes", DEFAULT_KERNEL_NODES)?,
        startup_steps: cfg.usize_or("grid", "startup_steps", 2)?,
    };
    spec.plant()?;
    Ok(spec)
}

/// Closed-loop output.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    pub u: Trajectory,
    pub w: Trajectory,
    /// Control value at every sample.
    pub control: Vec<f64>,
    pub report: Report,
    pub m: f64,
}

/// Open-loop run (`U = 0`) of the same plant.
pub fn simulate_open_loop(spec: &ClosedLoopSpec) -> Result<Trajectory> {
    crate::solver::solve(&spec.plant()?)
}

/// Steps the plant with `u(1, t) = d1(t) + U(t)`. Within a step the
/// control is interpolated linearly between its start and end values; the
/// end value is iterated until the control recomputed from the new field
/// agrees with it to `1e-12 (1 + |U|)`.
pub fn simulate_closed_loop(spec: &ClosedLoopSpec) -> Result<ClosedLoop> {
    let plant = spec.plant()?;
    let kernel = kernel_series(spec.c, spec.sigma, spec.kernel_nodes, 1e-12)?;
    let stepper = Stepper::new(&plant)?;
    let last = spec.grid.n_x() - 1;
    let times = plant.time_samples();

    let u0 = plant.initial_field();
    let mut u = u0.values().to_vec();
    let mut u_traj = Trajectory::starting_at(0.0, u0.clone());
    let mut w_traj = Trajectory::starting_at(0.0, forward_transform(&u0, &kernel)?);
    let mut control = vec![control_signal(&u0, &kernel)?];
    let mut data0 = plant.nodal_data(0.0);
    data0.d[last] += control[0];

    for (k, win) in times.windows(2).enumerate() {
        let (t0, t1) = (win[0], win[1]);
        let c0 = *control.last().expect("non-empty");
        // secant iteration on r(U) = G(U) - U, where G maps the end value
        // of the control to the control computed from the resulting field
        let mut guess = match control.len() {
            1 => c0,
            n => 2.0 * c0 - control[n - 2],
        };
        let mut prev: Option<(f64, f64)> = None;
        let mut history = Vec::new();
        let result = loop {
            let c1 = guess;
            let mut provider = |t: f64| -> Result<NodalData> {
                let mut d = plant.nodal_data(t);
                d.d[last] += c0 + (t - t0) / (t1 - t0) * (c1 - c0);
                Ok(d)
            };
            let r = stepper.advance(&u, t0, t1, &data0, &mut provider, stepper.scheme_for(k))?;
            let next = control_signal(&Field::new(spec.grid, r.values.clone())?, &kernel)?;
            let gap = next - guess;
            history.push(gap.abs());
            if gap.abs() <= SWEEP_TOL * (1.0 + next.abs()) && history.len() >= MIN_SWEEPS {
                break r;
            }
            if history.len() >= MAX_SWEEPS || !gap.is_finite() {
                return Err(Error::SweepDiverged { t: t1, history });
            }
            let updated = match prev {
                Some((g0, r0)) if gap != r0 => guess - gap * (guess - g0) / (gap - r0),
                _ => next,
            };
            prev = Some((guess, gap));
            guess = updated;
        };
        let c1 = guess;
        u = result.values;
        data0 = result.end_data;
        let field = Field::new(spec.grid, u.clone())?;
        w_traj.push(t1, forward_transform(&field, &kernel)?)?;
        u_traj.push(t1, field)?;
        control.push(c1);
    }

    let m = series_constant_m_cached(spec.c, spec.sigma)?;
    let report = check_closed_loop_bound(&u_traj, spec, Tolerance::rule(spec.grid.h_x(), spec.dt))?;
    Ok(ClosedLoop {
        u: u_traj,
        w: w_traj,
        control,
        report,
        m,
    })
}

/// The closed-loop EISS envelope at every sample, with running sups of
/// `f` (over nodes), `d0` and `d1` up to the sample.
pub fn check_closed_loop_bound(u: &Trajectory, spec: &ClosedLoopSpec, tol: Tolerance) -> Result<Report> {
    let g = u.grid();
    let u0_sup = sup_norm_space(&u.fields()[0])?;
    let (mut f_sup, mut d0_sup, mut d1_sup) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut details = Vec::with_capacity(u.len());
    for (t, field) in u.times().iter().zip(u.fields()) {
        for i in 0..g.n_x() {
            f_sup = f_sup.max(spec.f.eval(&Point::new(g.x_at(i), 0.0, *t)).abs());
        }
        d0_sup = d0_sup.max(spec.d0.eval(&Point::new(0.0, 0.0, *t)).abs());
        d1_sup = d1_sup.max(spec.d1.eval(&Point::new(1.0, 0.0, *t)).abs());
        let bound = bound_prop2(*t, u0_sup, f_sup, d0_sup, d1_sup, spec.c, spec.sigma)?;
        let (node, observed) = crate::grid::argmax_abs(field);
        let loc = Location {
            x: g.x_at(node),
            y: 0.0,
            t: *t,
        };
        details.push(SampleMargin::new(loc, observed, bound, tol.at(bound)));
    }
    Ok(Report::from_samples("closed-loop EISS", details))
}

/// Level-set diagnostics of a closed-loop run. The target state `w` obeys
/// `w_t = w_xx - sigma w + F` with Dirichlet data `(d0, d1)`, so its
/// thresholds are `k0 = max(sup w(., 0), sup d)` and `rhs = L_f sup |F|`
/// with the target-system gains, using
/// `sup |F| <= sup |f| (1 + sup |k|) + sup |k_y(., 0)| sup |d0|`. The plant
/// state `u` is checked against the largest closed-loop envelope.
pub fn closed_loop_level_sets(cl: &ClosedLoop, spec: &ClosedLoopSpec, tol: Tolerance) -> Result<Report> {
    let kernel = kernel_series(spec.c, spec.sigma, spec.kernel_nodes, 1e-12)?;
    let g = spec.grid;
    let (mut f_sup, mut d0_sup) = (0.0_f64, 0.0_f64);
    let w0 = cl.w.fields().first().ok_or(Error::EmptyTrajectory)?.values();
    let mut hi = w0.iter().cloned().fold(0.0_f64, f64::max);
    let mut lo = w0.iter().map(|v| -v).fold(0.0_f64, f64::max);
    for &t in cl.w.times() {
        for i in 0..g.n_x() {
            f_sup = f_sup.max(spec.f.eval(&Point::new(g.x_at(i), 0.0, t)).abs());
        }
        let d0 = spec.d0.eval(&Point::new(0.0, 0.0, t));
        let d1 = spec.d1.eval(&Point::new(1.0, 0.0, t));
        d0_sup = d0_sup.max(d0.abs());
        hi = hi.max(d0).max(d1);
        lo = lo.max(-d0).max(-d1);
    }
    let ky = (0..g.n_x()).fold(0.0_f64, |m, i| m.max(kernel.dy_at_zero(g.x_at(i)).abs()));
    let target = CoefficientBounds::new(1.0, spec.sigma, 1.0)?;
    let gains = rkes_gains(
        BoundaryKind::Dirichlet,
        &target,
        1.0,
        &sobolev_constants_interval(1.0)?,
        Exponent::Infinite,
    )?;
    let rhs = gains.l_f * (f_sup * (1.0 + kernel.sup_abs()) + ky * d0_sup);
    let target_report = level_set_diagnostic(&cl.w, hi, lo, rhs, tol.at(hi.max(lo) + rhs))?.with_note("target state");

    let envelope = cl.report.details.iter().map(|d| d.bound).fold(0.0_f64, f64::max);
    let plant_report = level_set_diagnostic(&cl.u, envelope, envelope, 0.0, tol.at(envelope))?.with_note("plant state");
    Ok(Report::merge(
        "level sets (closed loop)",
        vec![target_report, plant_report],
    ))
}

/// Residual of the target system `w_t = w_xx - sigma w + F` in
/// Crank-Nicolson form at interior nodes, where
/// `F = f + int_0^x k(x,y) f(y) dy + k_y(x, 0) d0(t)` (the last two terms
/// vanish when `f = 0` and `d0 = 0`). Also returns the largest boundary
/// mismatch `|w(0) - d0|, |w(1) - d1|` after `t = 0`. Steps taken with the
/// start-up scheme are skipped.
pub fn target_residual(cl: &ClosedLoop, spec: &ClosedLoopSpec, kernel: &Kernel, t_from: f64) -> Result<(f64, f64)> {
    let g = spec.grid;
    let n = g.n_x();
    let h = g.h_x();
    let times = cl.w.times();
    let forcing = |t: f64| -> Result<Vec<f64>> {
        let f = Field::from_fn(g, |x, _| spec.f.eval(&Point::new(x, 0.0, t)));
        let kf = forward_transform(&f, kernel)?;
        let d0 = spec.d0.eval(&Point::new(0.0, 0.0, t));
        Ok((0..n)
            .map(|i| kf.values()[i] + kernel.dy_at_zero(g.x_at(i)) * d0)
            .collect())
    };
    let mut worst: f64 = 0.0;
    let mut boundary: f64 = 0.0;
    let mut f_prev = forcing(times[0])?;
    for k in 0..times.len() {
        // the initial field need not satisfy the feedback law at x = 1
        if k == 0 {
            continue;
        }
        let w = cl.w.fields()[k].values();
        let t = times[k];
        boundary = boundary
            .max((w[0] - spec.d0.eval(&Point::new(0.0, 0.0, t))).abs())
            .max((w[n - 1] - spec.d1.eval(&Point::new(1.0, 0.0, t))).abs());
        let f_next = forcing(t)?;
        if k > spec.startup_steps && times[k - 1] >= t_from {
            let dt = t - times[k - 1];
            let wo = cl.w.fields()[k - 1].values();
            for i in 1..n - 1 {
                let lap = |v: &[f64]| (v[i - 1] - 2.0 * v[i] + v[i + 1]) / (h * h);
                let r = (w[i] - wo[i]) / dt - 0.5 * (lap(w) + lap(wo)) + 0.5 * spec.sigma * (w[i] + wo[i])
                    - 0.5 * (f_next[i] + f_prev[i]);
                worst = worst.max(r.abs());
            }
        }
        f_prev = f_next;
    }
    Ok((worst, boundary))
}
