//! Implicit finite-volume solver for
//! `u_t - div(a grad u) + c u + h(x, t, u) = f` with Robin
//! (`a du/dn + m u = d`) or Dirichlet (`u = d`) boundary data.

mod convergence;
pub mod linalg;
mod stepper;

pub use convergence::{convergence_order, least_squares_slope, trajectory_error, ConvergenceResult, Order};
pub use stepper::{solve, solve_with_data, step, NodalData, Scheme, StepResult, Stepper, NEWTON_MAX_ITER, NEWTON_TOL};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::expr::{Expr, Point, Var, REACTION, SPACE_TIME};
use crate::gains::{
    rkes_gains, sobolev_constants_interval, BoundaryKind, CoefficientBounds, Exponent, GainSet, SobolevConstants,
};
use crate::grid::{Domain, Field, SpatialGrid};

/// Coefficient sampling refines each grid spacing by this factor.
pub const SAMPLING_FACTOR: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub a: Expr,
    pub c: Expr,
    pub m: Expr,
    bounds: CoefficientBounds,
}

impl Coefficients {
    /// Compiles the coefficients and caches their minima, sampled on the
    /// grid refined by [`SAMPLING_FACTOR`] unless a minimum is declared.
    /// `m` is only checked on boundary samples and only for Robin data.
    pub fn new(
        a: Expr,
        c: Expr,
        m: Expr,
        grid: &SpatialGrid,
        kind: BoundaryKind,
        declared: [Option<f64>; 3],
    ) -> Result<Self> {
        let fine = grid.refined(SAMPLING_FACTOR);
        let mut a_min = f64::INFINITY;
        let mut c_min = f64::INFINITY;
        let mut m_min = f64::INFINITY;
        for node in 0..fine.node_count() {
            let (x, y) = fine.coords(node);
            let p = Point::new(x, y, 0.0);
            let av = a.eval(&p);
            if !(av > 0.0) {
                return Err(Error::config(format!(
                    "a = {av} is not positive at sample (x={x}, y={y})"
                )));
            }
            let cv = c.eval(&p);
            if !(cv >= 0.0) {
                return Err(Error::config(format!("c = {cv} is negative at sample (x={x}, y={y})")));
            }
            a_min = a_min.min(av);
            c_min = c_min.min(cv);
            if kind == BoundaryKind::Robin && fine.is_boundary(node) {
                let mv = m.eval(&p);
                if !(mv > 0.0) {
                    return Err(Error::config(format!(
                        "m = {mv} is not positive at boundary sample (x={x}, y={y})"
                    )));
                }
                m_min = m_min.min(mv);
            }
        }
        if kind == BoundaryKind::Dirichlet {
            m_min = 1.0;
        }
        let [da, dc, dm] = declared;
        let bounds = CoefficientBounds::new(da.unwrap_or(a_min), dc.unwrap_or(c_min), dm.unwrap_or(m_min))
            .map_err(|e| Error::config(e.to_string()))?;
        Ok(Coefficients { a, c, m, bounds })
    }

    /// Constant coefficients with exact minima.
    pub fn constant(a: f64, c: f64, m: f64) -> Result<Self> {
        let bounds = CoefficientBounds::new(a, c, m)?;
        Ok(Coefficients {
            a: Expr::constant(a),
            c: Expr::constant(c),
            m: Expr::constant(m),
            bounds,
        })
    }

    pub fn bounds(&self) -> CoefficientBounds {
        self.bounds
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReactionKind {
    Zero,
    /// `h = rate * u`.
    Linear {
        rate: f64,
    },
    /// `h = u ln(1 + u^2)`.
    LogPoly,
    /// `h = coef * u^3`.
    OddCubic {
        coef: f64,
    },
    /// Expression in `x`, `y`, `t`, `u`.
    Custom(Expr),
}

/// Nonlinear term `h(x, t, u)` with its declared structural data.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionTerm {
    pub kind: ReactionKind,
    /// Growth exponent `lambda` in `|h| <= c0 (1 + |u|^lambda)`.
    pub growth_exponent: f64,
    pub c0: f64,
    pub monotone: bool,
}

impl ReactionTerm {
    pub fn zero() -> Self {
        ReactionTerm {
            kind: ReactionKind::Zero,
            growth_exponent: 1.0,
            c0: 1.0,
            monotone: true,
        }
    }

    pub fn linear(rate: f64) -> Self {
        ReactionTerm {
            kind: ReactionKind::Linear { rate },
            growth_exponent: 1.0,
            c0: rate.abs().max(1e-300),
            monotone: rate >= 0.0,
        }
    }

    pub fn log_poly() -> Self {
        ReactionTerm {
            kind: ReactionKind::LogPoly,
            growth_exponent: 3.0,
            c0: 10.0,
            monotone: true,
        }
    }

    pub fn odd_cubic(coef: f64) -> Self {
        ReactionTerm {
            kind: ReactionKind::OddCubic { coef },
            growth_exponent: 3.0,
            c0: coef.abs().max(1e-300),
            monotone: coef >= 0.0,
        }
    }

    pub fn custom(expr: Expr, monotone: bool) -> Self {
        ReactionTerm {
            kind: ReactionKind::Custom(expr),
            growth_exponent: 3.0,
            c0: 1.0,
            monotone,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, ReactionKind::Zero)
    }

    pub fn value(&self, x: f64, y: f64, t: f64, u: f64) -> f64 {
        match &self.kind {
            ReactionKind::Zero => 0.0,
            ReactionKind::Linear { rate } => rate * u,
            ReactionKind::LogPoly => u * (1.0 + u * u).ln(),
            ReactionKind::OddCubic { coef } => coef * u * u * u,
            ReactionKind::Custom(e) => e.eval(&Point::new(x, y, t).with_u(u)),
        }
    }

    /// `dh/du`; central difference with relative step `1e-7` for custom terms.
    pub fn derivative(&self, x: f64, y: f64, t: f64, u: f64) -> f64 {
        match &self.kind {
            ReactionKind::Zero => 0.0,
            ReactionKind::Linear { rate } => *rate,
            ReactionKind::LogPoly => {
                let s = u * u;
                (1.0 + s).ln() + 2.0 * s / (1.0 + s)
            }
            ReactionKind::OddCubic { coef } => 3.0 * coef * u * u,
            ReactionKind::Custom(_) => {
                let step = 1e-7 * u.abs().max(1.0);
                (self.value(x, y, t, u + step) - self.value(x, y, t, u - step)) / (2.0 * step)
            }
        }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            ReactionKind::Zero => "zero".into(),
            ReactionKind::Linear { rate } => format!("linear({rate})"),
            ReactionKind::LogPoly => "log_poly".into(),
            ReactionKind::OddCubic { coef } => format!("odd_cubic({coef})"),
            ReactionKind::Custom(e) => format!("custom({e})"),
        }
    }
}

/// Boundary disturbance data.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryData {
    /// Interval endpoints, each an expression in `t`.
    Ends { left: Expr, right: Expr },
    /// One expression `d(x, y, t)` on the whole boundary.
    Surface(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    pub kind: BoundaryKind,
    pub data: BoundaryData,
}

impl BoundarySpec {
    pub fn zero(kind: BoundaryKind) -> Self {
        BoundarySpec {
            kind,
            data: BoundaryData::Surface(Expr::constant(0.0)),
        }
    }

    /// Value of the disturbance at a boundary node.
    pub fn value_at(&self, grid: &SpatialGrid, node: usize, t: f64) -> f64 {
        let (x, y) = grid.coords(node);
        let p = Point::new(x, y, t);
        match &self.data {
            BoundaryData::Surface(e) => e.eval(&p),
            BoundaryData::Ends { left, right } => {
                if node == 0 {
                    left.eval(&p)
                } else {
                    right.eval(&p)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub grid: SpatialGrid,
    pub horizon: f64,
    pub dt: f64,
    pub coefficients: Coefficients,
    pub reaction: ReactionTerm,
    pub f: Expr,
    pub boundary: BoundarySpec,
    pub u0: Expr,
    /// Leading steps taken as two backward-Euler half steps each.
    pub startup_steps: usize,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt * (1.0 - 1e-12)) {
            return Err(Error::config(format!(
                "horizon {} must be at least dt = {}",
                self.horizon, self.dt
            )));
        }
        if let (BoundaryData::Ends { .. }, 2) = (&self.boundary.data, self.grid.dim()) {
            return Err(Error::config("rectangles take a single boundary expression d"));
        }
        self.initial_field()
            .validate()
            .map_err(|_| Error::config("u0 is not finite on every node"))?;
        Ok(())
    }

    pub fn initial_field(&self) -> Field {
        Field::from_fn(self.grid, |x, y| self.u0.eval(&Point::new(x, y, 0.0)))
    }

    /// Time samples `0, dt, 2 dt, ..., T`; the last step is shortened to
    /// land on `T` when `T` is not a multiple of `dt`.
    pub fn time_samples(&self) -> Vec<f64> {
        let n = ((self.horizon / self.dt) - 1e-9).ceil().max(1.0) as usize;
        let mut ts: Vec<f64> = (0..n).map(|k| k as f64 * self.dt).collect();
        ts.push(self.horizon);
        ts
    }

    /// Source and boundary values at every node at time `t`.
    pub fn nodal_data(&self, t: f64) -> NodalData {
        let g = &self.grid;
        let mut f = vec![0.0; g.node_count()];
        let mut d = vec![0.0; g.node_count()];
        for node in 0..g.node_count() {
            let (x, y) = g.coords(node);
            f[node] = self.f.eval(&Point::new(x, y, t));
            if g.is_boundary(node) {
                d[node] = self.boundary.value_at(g, node, t);
            }
        }
        NodalData { f, d }
    }

    /// Copy with different disturbances; everything else shared.
    pub fn with_disturbances(&self, f: Expr, data: BoundaryData) -> Scenario {
        Scenario {
            f,
            boundary: BoundarySpec {
                kind: self.boundary.kind,
                data,
            },
            ..self.clone()
        }
    }

    /// True when no in-domain or boundary disturbance is present.
    pub fn is_unforced(&self) -> bool {
        let zero = |e: &Expr| e.as_constant() == Some(0.0);
        zero(&self.f)
            && match &self.boundary.data {
                BoundaryData::Surface(e) => zero(e),
                BoundaryData::Ends { left, right } => zero(left) && zero(right),
            }
    }
}

fn parse_kind(cfg: &Config) -> Result<BoundaryKind> {
    match cfg.get("boundary", "kind").unwrap_or("robin") {
        "robin" => Ok(BoundaryKind::Robin),
        "dirichlet" => Ok(BoundaryKind::Dirichlet),
        other => Err(Error::config(format!("unknown boundary kind '{other}'"))),
    }
}

pub fn domain_from_config(cfg: &Config) -> Result<Domain> {
    let kind = cfg.get("domain", "kind").unwrap_or("interval");
    let x_lo = cfg.f64_or("domain", "x_lo", 0.0)?;
    let x_hi = cfg.f64_or("domain", "x_hi", 1.0)?;
    let domain = match kind {
        "interval" => Domain::interval(x_lo, x_hi),
        "rectangle" => Domain::rectangle(
            x_lo,
            x_hi,
            cfg.f64_or("domain", "y_lo", 0.0)?,
            cfg.f64_or("domain", "y_hi", 1.0)?,
        ),
        other => return Err(Error::config(format!("unknown domain kind '{other}'"))),
    };
    domain.map_err(|e| Error::config(e.to_string()))
}

pub fn grid_from_config(cfg: &Config) -> Result<SpatialGrid> {
    let domain = domain_from_config(cfg)?;
    let n_x = cfg.usize_or("grid", "n_x", 101)?;
    let n_y = cfg.usize_or("grid", "n_y", n_x)?;
    SpatialGrid::new(domain, n_x, n_y).map_err(|e| Error::config(e.to_string()))
}

/// Reaction term described by `kind` and its parameters in `section`.
pub fn reaction_from_config(cfg: &Config, section: &str) -> Result<ReactionTerm> {
    let mut r = match cfg.get(section, "kind").unwrap_or("zero") {
        "zero" => ReactionTerm::zero(),
        "linear" => ReactionTerm::linear(cfg.require_f64(section, "rate")?),
        "log_poly" => ReactionTerm::log_poly(),
        "odd_cubic" => ReactionTerm::odd_cubic(cfg.f64_or(section, "coef", 1.0)?),
        "custom" => {
            let e = cfg.expr_or(section, "expr", "0", REACTION)?;
            let mono = cfg.bool_or(section, "monotone", false)?;
            ReactionTerm::custom(e, mono)
        }
        other => return Err(Error::config(format!("unknown reaction kind '{other}'"))),
    };
    if let Some(l) = cfg.f64_opt(section, "growth_exponent")? {
        r.growth_exponent = l;
    }
    if let Some(c0) = cfg.f64_opt(section, "c0")? {
        r.c0 = c0;
    }
    Ok(r)
}

/// Boundary data from `[boundary]`; `suffix` picks the alternate entries
/// (`d_left2`, ...) used for the second run of a difference pair.
pub fn boundary_data_from_config(cfg: &Config, grid: &SpatialGrid, suffix: &str) -> Result<BoundaryData> {
    let key = |k: &str| format!("{k}{suffix}");
    if grid.dim() == 1 && cfg.get("boundary", &key("d")).is_none() {
        Ok(BoundaryData::Ends {
            left: cfg.expr_or("boundary", &key("d_left"), "0", SPACE_TIME)?,
            right: cfg.expr_or("boundary", &key("d_right"), "0", SPACE_TIME)?,
        })
    } else {
        Ok(BoundaryData::Surface(cfg.expr_or(
            "boundary",
            &key("d"),
            "0",
            SPACE_TIME,
        )?))
    }
}

/// Embedding constants and exponent from `[check]`: `c_s`, `c_p` (required
/// on rectangles, the interval values otherwise) and `q` (default `inf`).
pub fn sobolev_from_config(cfg: &Config, grid: &SpatialGrid) -> Result<(SobolevConstants, Exponent)> {
    let q = Exponent::parse(cfg.get("check", "q").unwrap_or("inf"))?;
    let given = (cfg.f64_opt("check", "c_s")?, cfg.f64_opt("check", "c_p")?);
    let consts = match (given, grid.dim()) {
        ((Some(c_s), Some(c_p)), _) => SobolevConstants {
            c_s,
            c_p,
            source: cfg
                .get("check", "constants_source")
                .unwrap_or("user supplied")
                .to_string(),
        },
        ((None, None), 1) => sobolev_constants_interval(grid.domain().volume())?,
        (_, 1) => return Err(Error::config("give both c_s and c_p in [check], or neither")),
        _ => return Err(Error::config("rectangles need c_s and c_p in [check]")),
    };
    for (name, v) in [("c_s", consts.c_s), ("c_p", consts.c_p)] {
        if !(v > 0.0) {
            return Err(Error::config(format!("{name} must be > 0, got {v}")));
        }
    }
    Ok((consts, q))
}

/// Gains of a scenario from its coefficient bounds and domain volume.
pub fn scenario_gains(scenario: &Scenario, consts: &SobolevConstants, q: Exponent) -> Result<GainSet> {
    rkes_gains(
        scenario.boundary.kind,
        &scenario.coefficients.bounds(),
        scenario.grid.domain().volume(),
        consts,
        q,
    )
}

/// Builds and validates a scenario from a parsed config.
pub fn assemble_scenario(cfg: &Config) -> Result<Scenario> {
    let grid = grid_from_config(cfg)?;
    let kind = parse_kind(cfg)?;
    let space = &[Var::X, Var::Y];
    let coefficients = Coefficients::new(
        cfg.expr_or("coefficients", "a", "1", space)?,
        cfg.expr_or("coefficients", "c", "0", space)?,
        cfg.expr_or("coefficients", "m", "1", space)?,
        &grid,
        kind,
        [
            cfg.f64_opt("coefficients", "a_min")?,
            cfg.f64_opt("coefficients", "c_min")?,
            cfg.f64_opt("coefficients", "m_min")?,
        ],
    )?;
    let scenario = Scenario {
        grid,
        horizon: cfg.f64_or("grid", "horizon", 1.0)?,
        dt: cfg.f64_or("grid", "dt", 1e-3)?,
        coefficients,
        reaction: reaction_from_config(cfg, "reaction")?,
        f: cfg.expr_or("disturbances", "f", "0", SPACE_TIME)?,
        boundary: BoundarySpec {
            kind,
            data: boundary_data_from_config(cfg, &grid, "")?,
        },
        u0: cfg.expr_or("disturbances", "u0", "0", SPACE_TIME)?,
        startup_steps: cfg.usize_or("grid", "startup_steps", 2)?,
    };
    scenario.validate()?;
    Ok(scenario)
}
