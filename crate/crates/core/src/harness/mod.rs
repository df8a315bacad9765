//! Numerical consistency checks of the stability estimates against
//! simulated trajectories, plus sampled probes of the structural
//! hypotheses on the reaction term.

mod report;

pub use report::{Location, Report, SampleMargin, Tolerance, Verdict};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::Point;
use crate::gains::{iss_bound, BoundaryKind, GainSet};
use crate::grid::{argmax_abs, sup_norm_space, SpatialGrid, Trajectory};
use crate::solver::{ReactionTerm, Scenario};

/// Seed used by the probes when none is given.
pub const DEFAULT_PROBE_SEED: u64 = 0x15_57ab;
const PROBE_SLACK: f64 = 1e-12;
const LADDER_STEPS: usize = 32;

fn location(grid: &SpatialGrid, node: usize, t: f64) -> Location {
    let (x, y) = grid.coords(node);
    Location { x, y, t }
}

/// Sup of `|f|` over all nodes and of `|d|` over boundary nodes at `t`.
fn data_sups(scenario: &Scenario, t: f64) -> (f64, f64) {
    let g = &scenario.grid;
    let mut f_sup: f64 = 0.0;
    for node in 0..g.node_count() {
        let (x, y) = g.coords(node);
        f_sup = f_sup.max(scenario.f.eval(&Point::new(x, y, t)).abs());
    }
    let d_sup = g
        .boundary_nodes()
        .into_iter()
        .fold(0.0_f64, |m, node| m.max(scenario.boundary.value_at(g, node, t).abs()));
    (f_sup, d_sup)
}

/// Running sups of `|f|` (all nodes) and `|d|` (boundary nodes) over the
/// samples of `traj` up to and including each sample.
pub fn running_data_sups(traj: &Trajectory, scenario: &Scenario) -> Vec<(f64, f64)> {
    let (mut f_sup, mut d_sup) = (0.0_f64, 0.0_f64);
    traj.times()
        .iter()
        .map(|&t| {
            let (f, d) = data_sups(scenario, t);
            f_sup = f_sup.max(f);
            d_sup = d_sup.max(d);
            (f_sup, d_sup)
        })
        .collect()
}

fn check_samples(traj: &Trajectory, scenario: &Scenario) -> Result<()> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    if *traj.grid() != scenario.grid {
        return Err(Error::Mismatch("trajectory and scenario use different grids".into()));
    }
    Ok(())
}

fn observations(traj: &Trajectory) -> Vec<(Location, f64)> {
    traj.times()
        .iter()
        .zip(traj.fields())
        .map(|(t, f)| {
            let (node, v) = argmax_abs(f);
            (location(traj.grid(), node, *t), v)
        })
        .collect()
}

/// Spatial sup-norm of `u(., T)` against the ISS envelope at every sample
/// `T`, with sups of `f` and `d` running over samples up to `T`. The
/// envelope is only asserted when `c_min > 0` and the reaction is monotone.
pub fn check_iss(traj: &Trajectory, scenario: &Scenario, g: &GainSet, tol: Tolerance) -> Result<Report> {
    check_samples(traj, scenario)?;
    if g.boundary_kind != scenario.boundary.kind {
        return Err(Error::Mismatch(format!(
            "gain set is for {} data, scenario has {}",
            g.boundary_kind, scenario.boundary.kind
        )));
    }
    let name = format!("iss ({})", scenario.boundary.kind);
    let c_min = scenario.coefficients.bounds().c_min;
    if !(c_min > 0.0) {
        return Ok(Report::not_asserted(name, "c_min = 0", observations(traj)));
    }
    if !scenario.reaction.monotone {
        return Ok(Report::not_asserted(
            name,
            "reaction is not monotone",
            observations(traj),
        ));
    }
    let u0_sup = sup_norm_space(&traj.fields()[0])?;
    let sups = running_data_sups(traj, scenario);
    let mut details = Vec::with_capacity(traj.len());
    for ((t, field), &(f_sup, d_sup)) in traj.times().iter().zip(traj.fields()).zip(&sups) {
        let bound = iss_bound(*t, u0_sup, f_sup, d_sup, g)?;
        let (node, observed) = argmax_abs(field);
        details.push(SampleMargin::new(
            location(&scenario.grid, node, *t),
            observed,
            bound,
            tol.at(bound),
        ));
    }
    let mut report = Report::from_samples(name, details);
    if scenario.grid.dim() > 1 {
        report = report.with_note(format!("conditional on supplied constants ({})", g.constants_source));
    }
    Ok(report)
}

fn same_apart_from_data(a: &Scenario, b: &Scenario) -> Result<()> {
    let same = a.grid == b.grid
        && a.dt == b.dt
        && a.horizon == b.horizon
        && a.coefficients == b.coefficients
        && a.reaction == b.reaction
        && a.u0 == b.u0
        && a.boundary.kind == b.boundary.kind
        && a.startup_steps == b.startup_steps;
    if same {
        Ok(())
    } else {
        Err(Error::Mismatch("scenarios differ beyond their disturbances".into()))
    }
}

/// Space-time sup of `u1 - u2` over `Q_T` against
/// `L_f sup|f1 - f2| + L_d sup|d1 - d2|` over the same window, for every
/// sample `T`.
pub fn check_rkes(
    first: (&Trajectory, &Scenario),
    second: (&Trajectory, &Scenario),
    g: &GainSet,
    tol: Tolerance,
) -> Result<Report> {
    let (t1, s1) = first;
    let (t2, s2) = second;
    check_samples(t1, s1)?;
    check_samples(t2, s2)?;
    same_apart_from_data(s1, s2)?;
    if g.boundary_kind != s1.boundary.kind {
        return Err(Error::Mismatch(
            "gain set and scenarios have different boundary kinds".into(),
        ));
    }
    if t1.times() != t2.times() {
        return Err(Error::Mismatch("trajectories are sampled at different times".into()));
    }
    let grid = s1.grid;
    let (mut df, mut dd, mut diff) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut witness = location(&grid, 0, 0.0);
    let mut details = Vec::with_capacity(t1.len());
    for (k, &t) in t1.times().iter().enumerate() {
        for node in 0..grid.node_count() {
            let (x, y) = grid.coords(node);
            let p = Point::new(x, y, t);
            df = df.max((s1.f.eval(&p) - s2.f.eval(&p)).abs());
            if grid.is_boundary(node) {
                let gap = s1.boundary.value_at(&grid, node, t) - s2.boundary.value_at(&grid, node, t);
                dd = dd.max(gap.abs());
            }
            let gap = (t1.fields()[k].values()[node] - t2.fields()[k].values()[node]).abs();
            if gap > diff {
                diff = gap;
                witness = Location { x, y, t };
            }
        }
        let bound = g.l_f * df + g.l_d * dd;
        let loc = if diff > 0.0 { witness } else { location(&grid, 0, t) };
        details.push(SampleMargin::new(loc, diff, bound, tol.at(bound)));
    }
    Ok(Report::from_samples(format!("rkes ({})", s1.boundary.kind), details))
}

/// `sup_x |u(x, t)| <= u0_sup e^{-c_min t}` at every sample of an
/// unforced run.
pub fn check_decay(traj: &Trajectory, scenario: &Scenario, c_min: f64, u0_sup: f64, tol: Tolerance) -> Result<Report> {
    check_samples(traj, scenario)?;
    if !scenario.is_unforced() {
        return Err(Error::invalid("decay check needs f = 0 and d = 0"));
    }
    if !(c_min > 0.0) {
        return Err(Error::invalid(format!("c_min must be > 0, got {c_min}")));
    }
    if !(u0_sup >= 0.0) {
        return Err(Error::invalid(format!("u0_sup must be >= 0, got {u0_sup}")));
    }
    let details = traj
        .times()
        .iter()
        .zip(traj.fields())
        .map(|(t, field)| {
            let bound = u0_sup * (-c_min * t).exp();
            let (node, observed) = argmax_abs(field);
            SampleMargin::new(location(traj.grid(), node, *t), observed, bound, tol.at(bound))
        })
        .collect();
    Ok(Report::from_samples("decay", details))
}

/// Arguments `u` drawn from a mix of moderate uniform values and
/// log-uniform magnitudes up to `1e3`.
fn sample_u(rng: &mut ChaCha8Rng) -> f64 {
    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    if rng.gen::<bool>() {
        rng.gen_range(-10.0..10.0)
    } else {
        sign * 10f64.powf(rng.gen_range(-6.0..3.0))
    }
}

fn sample_xyt(rng: &mut ChaCha8Rng) -> (f64, f64, f64) {
    (
        rng.gen_range(0.0..1.0),
        rng.gen_range(0.0..1.0),
        rng.gen_range(0.0..10.0),
    )
}

/// Samples `(h(u1) - h(u2))(u1 - u2)` at random points and arguments;
/// false on the first value below `-1e-12` (relative to the size of `h`).
pub fn monotonicity_probe(reaction: &ReactionTerm, n_samples: usize) -> bool {
    monotonicity_probe_seeded(reaction, n_samples, DEFAULT_PROBE_SEED)
}

pub fn monotonicity_probe_seeded(reaction: &ReactionTerm, n_samples: usize, seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_samples).all(|_| {
        let (x, y, t) = sample_xyt(&mut rng);
        let (u1, u2) = (sample_u(&mut rng), sample_u(&mut rng));
        let (h1, h2) = (reaction.value(x, y, t, u1), reaction.value(x, y, t, u2));
        let scale = 1.0_f64.max(h1.abs() + h2.abs()) * (u1 - u2).abs();
        (h1 - h2) * (u1 - u2) >= -PROBE_SLACK * scale
    })
}

/// Samples `|h(u)| <= c0 (1 + |u|^lambda)` for `|u| <= 1e3`, including
/// both endpoints.
pub fn growth_probe(reaction: &ReactionTerm, lambda: f64, c0: f64, n_samples: usize) -> bool {
    growth_probe_seeded(reaction, lambda, c0, n_samples, DEFAULT_PROBE_SEED)
}

pub fn growth_probe_seeded(reaction: &ReactionTerm, lambda: f64, c0: f64, n_samples: usize, seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let within = |x: f64, y: f64, t: f64, u: f64| {
        let h = reaction.value(x, y, t, u);
        h.is_finite() && h.abs() <= c0 * (1.0 + u.abs().powf(lambda)) * (1.0 + PROBE_SLACK)
    };
    let ends = [-1e3, 0.0, 1e3].into_iter().all(|u| within(0.5, 0.5, 0.0, u));
    ends && (0..n_samples).all(|_| {
        let (x, y, t) = sample_xyt(&mut rng);
        within(x, y, t, sample_u(&mut rng))
    })
}

/// Largest measure over time of the level set `{w > k}`, each measured as
/// node fraction times domain volume.
pub fn level_set_measure(traj: &Trajectory, k: f64) -> f64 {
    let g = traj.grid();
    let volume = g.domain().volume();
    let n = g.node_count() as f64;
    traj.fields()
        .iter()
        .map(|f| f.values().iter().filter(|&&w| w > k).count() as f64 / n * volume)
        .fold(0.0, f64::max)
}

fn one_sided(traj: &Trajectory, sign: f64, k0: f64, rhs: f64, tol: f64) -> Vec<SampleMargin> {
    let g = traj.grid();
    let bound = k0 + rhs;
    let mut out: Vec<SampleMargin> = traj
        .times()
        .iter()
        .zip(traj.fields())
        .map(|(t, f)| {
            let (node, w) =
                f.values()
                    .iter()
                    .map(|v| sign * v)
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |best, (i, v)| if v > best.1 { (i, v) } else { best },
                    );
            SampleMargin::new(location(g, node, *t), w, bound, tol)
        })
        .collect();

    // ladder k0 = k_0 < ... < k_N = k0 + rhs + tol; measures must not grow
    let top = bound + tol;
    let flipped;
    let view = if sign > 0.0 {
        traj
    } else {
        flipped = traj.zip_with(traj, |v, _| -v).expect("same trajectory");
        &flipped
    };
    let mut prev = f64::INFINITY;
    for step in 0..=LADDER_STEPS {
        let k = k0 + (top - k0) * step as f64 / LADDER_STEPS as f64;
        let mu = level_set_measure(view, k);
        let loc = Location {
            x: k,
            y: 0.0,
            t: f64::NAN,
        };
        if prev.is_finite() {
            out.push(SampleMargin::new(loc, mu, prev, 0.0));
        }
        prev = mu;
    }
    out.push(SampleMargin::new(
        Location {
            x: top,
            y: 0.0,
            t: f64::NAN,
        },
        prev,
        0.0,
        0.0,
    ));
    out
}

/// Pointwise check `w <= k0 + rhs + tol` (and `-w <= k0_lower + rhs + tol`)
/// over all samples, plus the level-set ladder: for `k` from `k0` up to
/// `k0 + rhs + tol` the measures of `{w > k}` must be non-increasing and
/// vanish at the top. Ladder rows carry `k` in `location.x`.
pub fn level_set_diagnostic(traj: &Trajectory, k0: f64, k0_lower: f64, rhs: f64, tol: f64) -> Result<Report> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    for (name, v) in [("k0", k0), ("k0_lower", k0_lower), ("rhs", rhs), ("tol", tol)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    let mut details = one_sided(traj, 1.0, k0, rhs, tol);
    details.extend(one_sided(traj, -1.0, k0_lower, rhs, tol));
    Ok(Report::from_samples("level sets", details))
}

/// Level-set thresholds of one run: `k0 = max(0, sup u0, sup d / m_min)`
/// for Robin data, `max(0, sup u0, sup d)` for Dirichlet (and mirrored for
/// the lower side), with `rhs = L_f sup|f|`.
pub fn level_set_thresholds(traj: &Trajectory, scenario: &Scenario, g: &GainSet) -> Result<(f64, f64, f64)> {
    check_samples(traj, scenario)?;
    let grid = &scenario.grid;
    let u0 = traj.fields()[0].values();
    let mut hi = u0.iter().cloned().fold(0.0_f64, f64::max);
    let mut lo = u0.iter().map(|v| -v).fold(0.0_f64, f64::max);
    let scale = match scenario.boundary.kind {
        BoundaryKind::Robin => 1.0 / scenario.coefficients.bounds().m_min,
        BoundaryKind::Dirichlet => 1.0,
    };
    let mut f_sup: f64 = 0.0;
    for &t in traj.times() {
        let (f, _) = data_sups(scenario, t);
        f_sup = f_sup.max(f);
        for node in grid.boundary_nodes() {
            let d = scenario.boundary.value_at(grid, node, t) * scale;
            hi = hi.max(d);
            lo = lo.max(-d);
        }
    }
    Ok((hi, lo, g.l_f * f_sup))
}

/// Level-set diagnostic of one run with the thresholds of
/// [`level_set_thresholds`] and the tolerance rule at the top level. Not
/// asserted for a non-monotone reaction.
pub fn level_set_check(traj: &Trajectory, scenario: &Scenario, g: &GainSet, tol: Tolerance) -> Result<Report> {
    if !scenario.reaction.monotone {
        check_samples(traj, scenario)?;
        return Ok(Report::not_asserted(
            "level sets",
            "reaction is not monotone",
            observations(traj),
        ));
    }
    let (hi, lo, rhs) = level_set_thresholds(traj, scenario, g)?;
    level_set_diagnostic(traj, hi, lo, rhs, tol.at(hi.max(lo) + rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::expr::{parse_expression, parse_with_vars, REACTION};
    use crate::gains::rkes_gains;
    use crate::grid::Field;
    use crate::solver::{assemble_scenario, solve, BoundaryData};
    use proptest::prelude::*;

    fn scenario(text: &str) -> Scenario {
        assemble_scenario(&Config::parse(text).unwrap()).unwrap()
    }

    fn gains_for(s: &Scenario) -> GainSet {
        let consts = crate::gains::sobolev_constants_interval(s.grid.domain().volume()).unwrap();
        rkes_gains(
            s.boundary.kind,
            &s.coefficients.bounds(),
            s.grid.domain().volume(),
            &consts,
            crate::gains::Exponent::Infinite,
        )
        .unwrap()
    }

    const PROP1: &str = "[grid]\nn_x = 41\ndt = 5e-4\nhorizon = 1\n[coefficients]\nc = 1\n\
                         [reaction]\nkind = log_poly\n[disturbances]\nu0 = sin(pi*x)\n\
                         f = 0.1*sin(2*pi*x)*sin(t)\n[boundary]\nd = 0.05\n";

    #[test]
    fn iss_passes_on_log_poly_robin() {
        let s = scenario(PROP1);
        let traj = solve(&s).unwrap();
        let g = gains_for(&s);
        let r = check_iss(&traj, &s, &g, Tolerance::rule(s.grid.h_x(), s.dt)).unwrap();
        assert!(r.passed(), "{:?} {:?}", r.worst_margin, r.worst_location);
        assert!(r.details.iter().all(|d| d.margin > 0.0));
        assert_eq!(r.samples_checked, traj.len());
        let again = check_iss(&traj, &s, &g, Tolerance::rule(s.grid.h_x(), s.dt)).unwrap();
        assert_eq!(r, again);
        let lv = level_set_check(&traj, &s, &g, Tolerance::rule(s.grid.h_x(), s.dt)).unwrap();
        assert!(lv.passed(), "{:?} {:?}", lv.worst_margin, lv.worst_location);
    }

    #[test]
    fn iss_fails_with_undersized_gains() {
        let s = scenario(&PROP1.replace("0.1*sin(2*pi*x)*sin(t)", "20").replace("0.05", "2"));
        let traj = solve(&s).unwrap();
        let mut g = gains_for(&s);
        g.l_f *= 1e-3;
        g.l_d *= 1e-3;
        g.decay_rate *= 50.0;
        let r = check_iss(&traj, &s, &g, Tolerance::rule(s.grid.h_x(), s.dt)).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        let w = r.worst_location.unwrap();
        assert!(w.t > 0.0 && (0.0..=1.0).contains(&w.x));
    }

    #[test]
    fn iss_not_asserted_without_hypotheses() {
        let s = scenario(&PROP1.replace("c = 1", "c = 0"));
        let traj = solve(&s).unwrap();
        let robin = gains_for(&scenario(PROP1));
        let r = check_iss(&traj, &s, &robin, Tolerance::fixed(0.0)).unwrap();
        assert_eq!(r.verdict, Verdict::NotAsserted);
        let mut s2 = scenario(PROP1);
        s2.reaction = ReactionTerm::odd_cubic(-1.0);
        s2.reaction.monotone = false;
        let r = check_iss(&traj, &s2, &gains_for(&s2), Tolerance::fixed(0.0)).unwrap();
        assert_eq!(r.verdict, Verdict::NotAsserted);
        let mut dir = scenario(PROP1);
        dir.boundary.kind = BoundaryKind::Dirichlet;
        assert!(check_iss(&traj, &dir, &robin, Tolerance::fixed(0.0)).is_err());
    }

    #[test]
    fn decay_with_log_poly() {
        let s = scenario(&PROP1.replace("0.1*sin(2*pi*x)*sin(t)", "0").replace("0.05", "0"));
        let traj = solve(&s).unwrap();
        let tol = Tolerance::rule(s.grid.h_x(), s.dt);
        let r = check_decay(&traj, &s, 1.0, 1.0, tol).unwrap();
        assert!(r.passed());
        assert!(r.details[0].margin.abs() <= tol.at(1.0));
        assert!(r.details.last().unwrap().margin > 0.3);
        // undersized envelope: pretend the decay rate is 40
        assert_eq!(check_decay(&traj, &s, 40.0, 1.0, tol).unwrap().verdict, Verdict::Fail);
        assert!(check_decay(&traj, &scenario(PROP1), 1.0, 1.0, tol).is_err());
        let zero = Trajectory::starting_at(0.0, Field::zeros(s.grid));
        assert!(check_decay(&zero, &s, 1.0, 0.0, Tolerance::fixed(0.0))
            .unwrap()
            .passed());
    }

    const EXPLICIT: &str = "[domain]\nx_hi = pi/2\n[grid]\nn_x = 41\ndt = 1e-3\nhorizon = 2\n\
                            [boundary]\nkind = dirichlet\n";

    fn explicit_pair() -> (Scenario, Scenario) {
        let base = scenario(EXPLICIT);
        let one = |k: f64| {
            base.with_disturbances(
                parse_expression(&format!("{k}*sqrt(2)*sin(x)*cos(t-pi/4)")).unwrap(),
                BoundaryData::Ends {
                    left: parse_expression("0").unwrap(),
                    right: parse_expression(&format!("{k}*sin(t)")).unwrap(),
                },
            )
        };
        (one(1.0), one(3.0))
    }

    #[test]
    fn rkes_on_explicit_pair() {
        let (a, b) = explicit_pair();
        let (ta, tb) = (solve(&a).unwrap(), solve(&b).unwrap());
        let g = gains_for(&a);
        // C_P^2 = 2 on (0, pi/2), geometry (pi/2) 2^(3/2)
        let expected = 2.0 * std::f64::consts::FRAC_PI_2 * 2f64.powf(1.5);
        assert!((g.l_f - expected).abs() < 1e-12 * expected, "{}", g.l_f);
        let r = check_rkes((&ta, &a), (&tb, &b), &g, Tolerance::rule(a.grid.h_x(), a.dt)).unwrap();
        assert!(r.passed(), "{:?} {:?}", r.worst_margin, r.worst_location);
        let diff = crate::grid::diff_trajectory(&ta, &tb).unwrap();
        let sup = crate::grid::sup_norm_spacetime(&diff).unwrap();
        assert!((sup - 2.0).abs() < 1e-3, "{sup}");
        let same = check_rkes((&ta, &a), (&ta, &a), &g, Tolerance::fixed(0.0)).unwrap();
        assert!(same.passed() && same.worst_margin == 0.0);
        let mut other = b.clone();
        other.u0 = parse_expression("x").unwrap();
        assert!(check_rkes((&ta, &a), (&tb, &other), &g, Tolerance::fixed(0.0)).is_err());
        let mut small = g.clone();
        small.l_f *= 0.01;
        small.l_d *= 0.01;
        assert_eq!(
            check_rkes((&ta, &a), (&tb, &b), &small, Tolerance::rule(a.grid.h_x(), a.dt))
                .unwrap()
                .verdict,
            Verdict::Fail
        );
        let lv = level_set_diagnostic(&diff, 2.0, 2.0, g.l_f * 4.0, 1e-6).unwrap();
        assert!(lv.passed());
    }

    #[test]
    fn probes() {
        assert!(monotonicity_probe(&ReactionTerm::log_poly(), 10_000));
        assert!(monotonicity_probe(&ReactionTerm::zero(), 100));
        assert!(!monotonicity_probe(&ReactionTerm::odd_cubic(-1.0), 100));
        let minus_cube = ReactionTerm::custom(parse_with_vars("-u^3", REACTION).unwrap(), false);
        assert!(!monotonicity_probe(&minus_cube, 100));
        assert!(growth_probe(&ReactionTerm::zero(), 1.0, 1.0, 100));
        assert!(growth_probe(&ReactionTerm::log_poly(), 3.0, 10.0, 10_000));
        let quintic = ReactionTerm::custom(parse_with_vars("u^5", REACTION).unwrap(), true);
        assert!(!growth_probe(&quintic, 3.0, 10.0, 1000));
        assert_eq!(
            monotonicity_probe_seeded(&quintic, 500, 7),
            monotonicity_probe_seeded(&quintic, 500, 7)
        );
    }

    #[test]
    fn level_sets_of_zero_and_bad_bound() {
        let g = SpatialGrid::interval(crate::grid::Domain::interval(0.0, 1.0).unwrap(), 11).unwrap();
        let zero = Trajectory::starting_at(0.0, Field::zeros(g));
        assert!(level_set_diagnostic(&zero, 0.0, 0.0, 0.0, 0.0).unwrap().passed());
        let bump = Trajectory::starting_at(0.0, Field::from_fn(g, |x, _| x));
        let r = level_set_diagnostic(&bump, 0.0, 0.0, 0.5, 1e-9).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(level_set_diagnostic(&bump, 1.0, 0.0, 0.0, 0.0).unwrap().passed());
        assert!(level_set_diagnostic(&bump, -1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn level_set_check_needs_a_monotone_reaction() {
        let mut s = scenario(PROP1);
        s.reaction = ReactionTerm::linear(-5.0);
        let traj = solve(&s).unwrap();
        let g = gains_for(&s);
        let r = level_set_check(&traj, &s, &g, Tolerance::rule(s.grid.h_x(), s.dt)).unwrap();
        assert_eq!(r.verdict, Verdict::NotAsserted);
        assert_eq!(r.samples_checked, traj.len());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn measures_do_not_grow(vals in proptest::collection::vec(-5.0f64..5.0, 22),
                                k1 in -6.0f64..6.0, dk in 0.0f64..4.0) {
            let g = SpatialGrid::interval(crate::grid::Domain::interval(0.0, 2.0).unwrap(), 11).unwrap();
            let mut traj = Trajectory::starting_at(0.0, Field::new(g, vals[..11].to_vec()).unwrap());
            traj.push(1.0, Field::new(g, vals[11..].to_vec()).unwrap()).unwrap();
            prop_assert!(level_set_measure(&traj, k1 + dk) <= level_set_measure(&traj, k1));
            prop_assert!(level_set_measure(&traj, 6.0) == 0.0);
        }

        #[test]
        fn tolerance_verdicts(obs in 0.0f64..2.0, bound in 0.0f64..2.0, tol in 0.0f64..0.1) {
            let r = Report::from_samples("p", vec![SampleMargin::new(Location::default(), obs, bound, tol)]);
            prop_assert_eq!(r.passed(), bound - obs >= -tol);
        }
    }

    #[test]
    fn composition_of_rkes_and_decay() {
        // RKES against the unforced run plus decay of that run implies the ISS envelope
        for (f, d) in [("0.3*cos(3*t)", "0.1"), ("0.5*x", "-0.2*sin(t)"), ("1", "0")] {
            let s = scenario(&PROP1.replace("0.1*sin(2*pi*x)*sin(t)", f).replace("0.05", d));
            let zero = crate::expr::Expr::constant(0.0);
            let free = s.with_disturbances(zero.clone(), BoundaryData::Surface(zero));
            let (tu, tf) = (solve(&s).unwrap(), solve(&free).unwrap());
            let g = gains_for(&s);
            let tol = Tolerance::rule(s.grid.h_x(), s.dt);
            let rk = check_rkes((&tu, &s), (&tf, &free), &g, tol).unwrap();
            let dec = check_decay(&tf, &free, g.decay_rate, 1.0, tol).unwrap();
            let iss = check_iss(&tu, &s, &g, tol).unwrap();
            assert!(rk.passed() && dec.passed());
            assert!(iss.passed());
        }
    }
}
