//! Observed convergence orders against a known exact solution.

use std::fmt;

use crate::error::{Error, Result};
use crate::expr::{Expr, Point};
use crate::grid::Trajectory;

use super::{solve, Scenario};

/// Errors below this (relative to the solution size) count as exact.
const EXACT_LEVEL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Order {
    Rate(f64),
    /// Every error on the ladder is at rounding level.
    Exact,
}

impl Order {
    /// True when the order is exact or at least `p`.
    pub fn at_least(&self, p: f64) -> bool {
        match self {
            Order::Exact => true,
            Order::Rate(r) => *r >= p,
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Order::Rate(r) => write!(f, "{r:.4}"),
            Order::Exact => f.write_str("exact"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceResult {
    pub p_space: Order,
    pub p_time: Order,
    /// `(h, sup error)` per level of the spatial ladder.
    pub space_errors: Vec<(f64, f64)>,
    /// `(dt, sup error)` per level of the temporal ladder.
    pub time_errors: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

/// Sup-norm error of a trajectory against `exact` over all samples and nodes.
pub fn trajectory_error(traj: &Trajectory, exact: &Expr) -> f64 {
    let g = traj.grid();
    let mut worst: f64 = 0.0;
    for (t, field) in traj.times().iter().zip(traj.fields()) {
        for (k, v) in field.values().iter().enumerate() {
            let (x, y) = g.coords(k);
            worst = worst.max((v - exact.eval(&Point::new(x, y, *t))).abs());
        }
    }
    worst
}

fn solution_scale(traj: &Trajectory) -> f64 {
    traj.fields()
        .iter()
        .flat_map(|f| f.values())
        .fold(1.0_f64, |m, v| m.max(v.abs()))
}

/// Spatial ladder: the scenario grid refined by `2^k`, `k < refinements`,
/// at the time step `dt / 2^(refinements + 1)`. Temporal ladder: `dt / 2^k`
/// on the grid refined by `2^(refinements + 1)`. Orders are least-squares
/// slopes of `log error` against `log h` (resp. `log dt`).
pub fn convergence_order(scenario: &Scenario, exact: &Expr, refinements: usize) -> Result<ConvergenceResult> {
    if refinements < 3 {
        return Err(Error::invalid(format!(
            "a slope needs at least 3 refinement levels, got {refinements}"
        )));
    }
    let fine = 1usize << (refinements + 1);
    let mut warnings = Vec::new();

    let mut space_errors = Vec::with_capacity(refinements);
    let mut space_scale: f64 = 1.0;
    for k in 0..refinements {
        let s = Scenario {
            grid: scenario.grid.refined(1 << k),
            dt: scenario.dt / fine as f64,
            ..scenario.clone()
        };
        let traj = solve(&s)?;
        space_scale = space_scale.max(solution_scale(&traj));
        space_errors.push((s.grid.h_max(), trajectory_error(&traj, exact)));
    }

    let mut time_errors = Vec::with_capacity(refinements);
    let mut time_scale: f64 = 1.0;
    for k in 0..refinements {
        let s = Scenario {
            grid: scenario.grid.refined(fine),
            dt: scenario.dt / (1u64 << k) as f64,
            ..scenario.clone()
        };
        let traj = solve(&s)?;
        time_scale = time_scale.max(solution_scale(&traj));
        time_errors.push((s.dt, trajectory_error(&traj, exact)));
    }

    let p_space = order_of(&space_errors, space_scale, "spatial", &mut warnings);
    let p_time = order_of(&time_errors, time_scale, "temporal", &mut warnings);
    Ok(ConvergenceResult {
        p_space,
        p_time,
        space_errors,
        time_errors,
        warnings,
    })
}

fn order_of(errors: &[(f64, f64)], scale: f64, label: &str, warnings: &mut Vec<String>) -> Order {
    if errors.iter().all(|&(_, e)| e <= EXACT_LEVEL * scale) {
        return Order::Exact;
    }
    if errors.windows(2).any(|w| !(w[1].1 < w[0].1)) {
        warnings.push(format!("{label} errors do not decrease monotonically: {errors:?}"));
    }
    Order::Rate(least_squares_slope(errors))
}

/// Slope of the least-squares line through `(ln s, ln e)`.
pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(s, e)| (s.ln(), e.max(f64::MIN_POSITIVE).ln()))
        .collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::expr::parse_expression;
    use crate::solver::assemble_scenario;

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&h: &f64| (h, 3.0 * h.powf(2.5)))
            .collect();
        assert!((least_squares_slope(&pts) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn manufactured_solution_is_second_order() {
        let s = assemble_scenario(
            &Config::parse(
                "[domain]\nx_hi = pi/2\n[grid]\nn_x = 11\ndt = 0.1\nhorizon = 2\n\
                 [disturbances]\nf = sqrt(2)*sin(x)*cos(t-pi/4)\n\
                 [boundary]\nkind = dirichlet\nd_right = sin(t)\n",
            )
            .unwrap(),
        )
        .unwrap();
        let r = convergence_order(&s, &parse_expression("sin(t)*sin(x)").unwrap(), 3).unwrap();
        assert!(r.p_space.at_least(1.9), "{r:?}");
        assert!(r.p_time.at_least(1.9), "{r:?}");
    }

    #[test]
    fn linear_solution_is_exact() {
        let s = assemble_scenario(
            &Config::parse(
                "[grid]\nn_x = 5\ndt = 0.1\nhorizon = 0.3\n[coefficients]\nc = 1\n\
                 [disturbances]\nu0 = x\nf = x\n[boundary]\nkind = dirichlet\nd_right = 1\n",
            )
            .unwrap(),
        )
        .unwrap();
        let r = convergence_order(&s, &parse_expression("x").unwrap(), 3).unwrap();
        assert_eq!(r.p_space, Order::Exact);
        assert_eq!(r.p_time, Order::Exact);
        assert!(convergence_order(&s, &parse_expression("x").unwrap(), 2).is_err());
    }
}
