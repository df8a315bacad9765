//! Explicit stability constants: Sobolev embedding constants, relative
//! (difference) gains, exponential ISS envelopes, the super-linear example
//! gain, the backstepping constants `C` and `M`, and the cascade constants
//! with their chain bounds.
//!
//! Every quantity is a closed-form expression; nothing here simulates.

use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};

/// Integrability exponent `q` of the embedding inequalities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    /// The `q -> infinity` limit.
    Infinite,
}

impl Exponent {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "oo" => Ok(Exponent::Infinite),
            other => other
                .parse::<f64>()
                .map(Exponent::Finite)
                .map_err(|_| Error::config(format!("bad exponent q = '{other}'"))),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(q) => write!(f, "{q}"),
            Exponent::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Robin,
    Dirichlet,
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryKind::Robin => "robin",
            BoundaryKind::Dirichlet => "dirichlet",
        })
    }
}

/// Lower bounds of the diffusion `a`, reaction `c` and boundary `m` coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientBounds {
    pub a_min: f64,
    pub c_min: f64,
    pub m_min: f64,
}

impl CoefficientBounds {
    pub fn new(a_min: f64, c_min: f64, m_min: f64) -> Result<Self> {
        if !(a_min > 0.0) {
            return Err(Error::invalid(format!("a_min must be > 0, got {a_min}")));
        }
        if !(c_min >= 0.0) {
            return Err(Error::invalid(format!("c_min must be >= 0, got {c_min}")));
        }
        if !(m_min > 0.0) {
            return Err(Error::invalid(format!("m_min must be > 0, got {m_min}")));
        }
        Ok(CoefficientBounds { a_min, c_min, m_min })
    }
}

/// Embedding constants together with where they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolevConstants {
    pub c_s: f64,
    pub c_p: f64,
    pub source: String,
}

/// Linear gains of a scalar system: `sup|u1-u2| <= l_f sup|f1-f2| + l_d sup|d1-d2|`,
/// plus the exponential decay rate of the zero-input envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    pub l_f: f64,
    pub l_d: f64,
    pub decay_rate: f64,
    pub q: Exponent,
    pub c_s: f64,
    pub c_p: f64,
    /// Prefactor of the geometry factor in `l_f`: `2 C_S^2 / min(a, c)` for
    /// Robin, the combined minimum (or `C_P^2 / a` when `c = 0`) for Dirichlet.
    pub c_0: f64,
    pub geometry: f64,
    pub boundary_kind: BoundaryKind,
    pub constants_source: String,
}

/// One row of a gains table.
#[derive(Debug, Clone, PartialEq)]
pub struct GainEntry {
    pub name: String,
    pub value: f64,
    pub provenance: String,
}

impl GainEntry {
    pub fn new(name: &str, value: f64, provenance: impl Into<String>) -> Self {
        GainEntry {
            name: name.into(),
            value,
            provenance: provenance.into(),
        }
    }
}

impl GainSet {
    pub fn entries(&self) -> Vec<GainEntry> {
        let kind = self.boundary_kind;
        let prefactor = match kind {
            BoundaryKind::Robin => "2*C_S^2/min(a,c)",
            BoundaryKind::Dirichlet if self.decay_rate > 0.0 => "min(2*C_S^2/min(a,c), C_P^2/a)",
            BoundaryKind::Dirichlet => "C_P^2/a",
        };
        let l_d = match kind {
            BoundaryKind::Robin => "1/m_min",
            BoundaryKind::Dirichlet => "unit boundary gain",
        };
        vec![
            GainEntry::new("C_S", self.c_s, self.constants_source.clone()),
            GainEntry::new("C_P", self.c_p, self.constants_source.clone()),
            GainEntry::new("q", exponent_value(self.q), "embedding exponent"),
            GainEntry::new("geometry", self.geometry, "|Omega|^((q-2)/q) * 2^((3q-4)/(2q-4))"),
            GainEntry::new("C_0", self.c_0, format!("{kind}: {prefactor}")),
            GainEntry::new("L_f", self.l_f, "C_0 * geometry"),
            GainEntry::new("L_d", self.l_d, format!("{kind}: {l_d}")),
            GainEntry::new("decay_rate", self.decay_rate, "c_min"),
        ]
    }
}

fn exponent_value(q: Exponent) -> f64 {
    match q {
        Exponent::Finite(q) => q,
        Exponent::Infinite => f64::INFINITY,
    }
}

/// `(C_S, C_P) = (1/sqrt 2, 2/sqrt pi)` for zero-trace functions on a unit
/// interval, any `q` in `(2, inf]`.
pub fn sobolev_constants_1d() -> (f64, f64) {
    (1.0 / SQRT_2, 2.0 / PI.sqrt())
}

/// `(C_S, C_P) = (1/sqrt 2, 2 sqrt(L/pi))` on an interval of length `L`:
/// Agmon's inequality does not see the length, the Wirtinger constant
/// scales with it.
pub fn sobolev_constants_interval(length: f64) -> Result<SobolevConstants> {
    check_volume(length)?;
    Ok(SobolevConstants {
        c_s: 1.0 / SQRT_2,
        c_p: 2.0 * (length / PI).sqrt(),
        source: format!("1-D Agmon/Wirtinger constants on an interval of length {length}"),
    })
}

pub fn default_sobolev_constants_1d() -> SobolevConstants {
    let (c_s, c_p) = sobolev_constants_1d();
    SobolevConstants {
        c_s,
        c_p,
        source: "1-D Agmon/Wirtinger constants on a unit interval".into(),
    }
}

/// `C_S = 24 (n-1)/(n-2) |Omega|^{(2* - q)/(2* q)}` with `2* = 2n/(n-2)`,
/// for domains with a flat boundary piece. `q = 2*` is accepted as the limit.
pub fn sobolev_constant_flat(n: u32, volume: f64, q: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::invalid(format!("dimension must be >= 3, got {n}")));
    }
    check_volume(volume)?;
    let crit = critical_exponent(n);
    if !(q > 2.0 && q <= crit) {
        return Err(Error::invalid(format!("q must lie in (2, {crit}), got {q}")));
    }
    let n = n as f64;
    Ok(24.0 * (n - 1.0) / (n - 2.0) * volume.powf((crit - q) / (crit * q)))
}

/// Sobolev critical exponent `2n/(n-2)`.
pub fn critical_exponent(n: u32) -> f64 {
    let n = n as f64;
    2.0 * n / (n - 2.0)
}

fn check_volume(volume: f64) -> Result<()> {
    if !(volume > 0.0 && volume.is_finite()) {
        return Err(Error::invalid(format!("volume must be > 0, got {volume}")));
    }
    Ok(())
}

/// `|Omega|^{(q-2)/q} * 2^{(3q-4)/(2q-4)}`; at `q = inf`, `|Omega| * 2^{3/2}`.
pub fn geometry_factor(volume: f64, q: Exponent) -> Result<f64> {
    check_volume(volume)?;
    match q {
        Exponent::Infinite => Ok(volume * 2f64.powf(1.5)),
        Exponent::Finite(q) if q > 2.0 => Ok(volume.powf((q - 2.0) / q) * 2f64.powf((3.0 * q - 4.0) / (2.0 * q - 4.0))),
        Exponent::Finite(q) => Err(Error::invalid(format!("q must exceed 2, got {q}"))),
    }
}

/// Robin-boundary gains; needs `c_min > 0`.
pub fn rkes_gains_robin(
    cb: &CoefficientBounds,
    volume: f64,
    consts: &SobolevConstants,
    q: Exponent,
) -> Result<GainSet> {
    if !(cb.c_min > 0.0) {
        return Err(Error::invalid("Robin gains require c_min > 0"));
    }
    let geometry = geometry_factor(volume, q)?;
    let c_0 = 2.0 * consts.c_s * consts.c_s / cb.a_min.min(cb.c_min);
    Ok(GainSet {
        l_f: c_0 * geometry,
        l_d: 1.0 / cb.m_min,
        decay_rate: cb.c_min,
        q,
        c_s: consts.c_s,
        c_p: consts.c_p,
        c_0,
        geometry,
        boundary_kind: BoundaryKind::Robin,
        constants_source: consts.source.clone(),
    })
}

/// Dirichlet-boundary gains. With `c_min > 0` the smaller of the two
/// embedding routes is used; the boundary gain is always 1.
pub fn rkes_gains_dirichlet(
    cb: &CoefficientBounds,
    volume: f64,
    consts: &SobolevConstants,
    q: Exponent,
) -> Result<GainSet> {
    let geometry = geometry_factor(volume, q)?;
    let poincare = consts.c_p * consts.c_p / cb.a_min;
    let c_0 = if cb.c_min > 0.0 {
        (2.0 * consts.c_s * consts.c_s / cb.a_min.min(cb.c_min)).min(poincare)
    } else {
        poincare
    };
    Ok(GainSet {
        l_f: c_0 * geometry,
        l_d: 1.0,
        decay_rate: cb.c_min,
        q,
        c_s: consts.c_s,
        c_p: consts.c_p,
        c_0,
        geometry,
        boundary_kind: BoundaryKind::Dirichlet,
        constants_source: consts.source.clone(),
    })
}

pub fn rkes_gains(
    kind: BoundaryKind,
    cb: &CoefficientBounds,
    volume: f64,
    consts: &SobolevConstants,
    q: Exponent,
) -> Result<GainSet> {
    match kind {
        BoundaryKind::Robin => rkes_gains_robin(cb, volume, consts, q),
        BoundaryKind::Dirichlet => rkes_gains_dirichlet(cb, volume, consts, q),
    }
}

fn check_sups(values: &[f64]) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::invalid(format!("sup-norm inputs must be >= 0, got {v}")));
    }
    Ok(())
}

/// `u0_sup e^{-c t} + L_f f_sup + L_d d_sup` for a Robin gain set.
pub fn iss_bound_robin(t: f64, u0_sup: f64, f_sup: f64, d_sup: f64, g: &GainSet) -> Result<f64> {
    check_sups(&[u0_sup, f_sup, d_sup])?;
    if g.boundary_kind != BoundaryKind::Robin {
        return Err(Error::invalid("gain set is not a Robin gain set"));
    }
    Ok(u0_sup * (-g.decay_rate * t).exp() + g.l_f * f_sup + g.l_d * d_sup)
}

/// `u0_sup e^{-c t} + L_f f_sup + d_sup` for a Dirichlet gain set with `c_min > 0`.
pub fn iss_bound_dirichlet(t: f64, u0_sup: f64, f_sup: f64, d_sup: f64, g: &GainSet) -> Result<f64> {
    check_sups(&[u0_sup, f_sup, d_sup])?;
    if g.boundary_kind != BoundaryKind::Dirichlet {
        return Err(Error::invalid("gain set is not a Dirichlet gain set"));
    }
    if !(g.decay_rate > 0.0) {
        return Err(Error::invalid("Dirichlet ISS envelope requires c_min > 0"));
    }
    Ok(u0_sup * (-g.decay_rate * t).exp() + g.l_f * f_sup + d_sup)
}

pub fn iss_bound(t: f64, u0_sup: f64, f_sup: f64, d_sup: f64, g: &GainSet) -> Result<f64> {
    match g.boundary_kind {
        BoundaryKind::Robin => iss_bound_robin(t, u0_sup, f_sup, d_sup, g),
        BoundaryKind::Dirichlet => iss_bound_dirichlet(t, u0_sup, f_sup, d_sup, g),
    }
}

/// In-domain gain of the super-linear example in dimension `n >= 3`:
/// `9 (n-1)^2/(n-2)^2 |Omega|^{2/n} 2^{n/4+8}`.
pub fn superlinear_gain(n: u32, volume: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::invalid(format!("dimension must be >= 3, got {n}")));
    }
    check_volume(volume)?;
    let nf = n as f64;
    let r = (nf - 1.0) / (nf - 2.0);
    Ok(9.0 * r * r * volume.powf(2.0 / nf) * 2f64.powf(nf / 4.0 + 8.0))
}

/// The same gain before the `q -> 2*` limit: the Robin in-domain gain with
/// `a = 1`, `min(1, c) = 1` and the flat-boundary `C_S(q)`.
pub fn superlinear_gain_prelimit(n: u32, volume: f64, q: f64) -> Result<f64> {
    let c_s = sobolev_constant_flat(n, volume, q)?;
    Ok(c_s * c_s * volume.powf((q - 2.0) / q) * 2f64.powf((5.0 * q - 8.0) / (2.0 * q - 4.0)))
}

/// `M = sum_{i>=0} (c+sigma)^{i+1} 4^i / (i!)^2`, summed until the next
/// term drops below `tol`.
pub fn series_constant_m(c: f64, sigma: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tol must be > 0, got {tol}")));
    }
    let lambda = c + sigma;
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!("c + sigma must be > 0, got {lambda}")));
    }
    let mut term = lambda;
    let mut sum = 0.0;
    let mut i = 0usize;
    loop {
        sum += term;
        if !sum.is_finite() {
            return Err(Error::SeriesOverflow {
                terms: i + 1,
                partial_sum: sum - term,
            });
        }
        term *= 4.0 * lambda / ((i + 1) as f64 * (i + 1) as f64);
        i += 1;
        if term < tol {
            return Ok(sum);
        }
    }
}

/// `series_constant_m` at `tol = 1e-12`, memoized per `(c, sigma)`.
pub fn series_constant_m_cached(c: f64, sigma: f64) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), f64>>> = OnceLock::new();
    let key = (c.to_bits(), sigma.to_bits());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&m) = cache.lock().expect("cache lock").get(&key) {
        return Ok(m);
    }
    let m = series_constant_m(c, sigma, 1e-12)?;
    cache.lock().expect("cache lock").insert(key, m);
    Ok(m)
}

/// `C = min(8 sqrt2 / pi, 2 sqrt2 / min(1, c))`.
pub fn backstepping_c(c: f64) -> f64 {
    (8.0 * SQRT_2 / PI).min(2.0 * SQRT_2 / c.min(1.0))
}

/// Closed-loop envelope of the backstepping-stabilized destabilized heat
/// equation: `(1+M)((1+M) u0 e^{-sigma t} + C f + d0 + d1)`.
pub fn bound_prop2(t: f64, u0_sup: f64, f_sup: f64, d0_sup: f64, d1_sup: f64, c: f64, sigma: f64) -> Result<f64> {
    if !(c > 0.0 && sigma > 0.0) {
        return Err(Error::invalid("c and sigma must be > 0"));
    }
    check_sups(&[u0_sup, f_sup, d0_sup, d1_sup])?;
    let m = series_constant_m_cached(c, sigma)?;
    let big_c = backstepping_c(c);
    Ok((1.0 + m) * ((1.0 + m) * u0_sup * (-sigma * t).exp() + big_c * f_sup + d0_sup + d1_sup))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CascadeMode {
    /// Chain driven by an external input at its head.
    Open,
    /// Last subsystem feeds the first.
    Cycle,
}

/// Minimum of the per-subsystem boundary coefficients.
pub fn cascade_m0(m_mins: &[f64]) -> Result<f64> {
    if m_mins.is_empty() {
        return Err(Error::invalid("cascade needs at least one subsystem"));
    }
    if let Some(m) = m_mins.iter().find(|m| !(**m > 0.0)) {
        return Err(Error::invalid(format!("boundary coefficients must be > 0, got {m}")));
    }
    Ok(m_mins.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Per-subsystem Dirichlet in-domain prefactor.
pub fn cascade_tau(a_min: f64, c_min: f64, c_s: f64, c_p: f64) -> f64 {
    let poincare = c_p * c_p / a_min;
    if c_min > 0.0 {
        (2.0 * c_s * c_s / a_min.min(c_min)).min(poincare)
    } else {
        poincare
    }
}

/// `a0 = 1 / (geometry * min_j tau_j)`.
pub fn cascade_a0(per_subsystem: &[(f64, f64)], volume: f64, c_s: f64, c_p: f64, q: Exponent) -> Result<f64> {
    if per_subsystem.is_empty() {
        return Err(Error::invalid("cascade needs at least one subsystem"));
    }
    if let Some((a, _)) = per_subsystem.iter().find(|(a, _)| !(*a > 0.0)) {
        return Err(Error::invalid(format!("a_min must be > 0, got {a}")));
    }
    let tau = per_subsystem
        .iter()
        .map(|&(a, c)| cascade_tau(a, c, c_s, c_p))
        .fold(f64::INFINITY, f64::min);
    Ok(1.0 / (geometry_factor(volume, q)? * tau))
}

/// `1 + 1/r + ... + 1/r^{j-1}` in the closed form `r/(r-1) (1 - r^{-j})`.
pub fn geometric_coefficient(ratio: f64, j: u32) -> f64 {
    if (ratio - 1.0).abs() < 1e-12 {
        return j as f64;
    }
    ratio / (ratio - 1.0) * (1.0 - ratio.powi(-(j as i32)))
}

fn decay_factor(decay: Option<f64>, t: f64) -> f64 {
    match decay {
        Some(c) if c > 0.0 => (-c * t).exp(),
        _ => 1.0,
    }
}

/// Chain bound for boundary-coupled Robin cascades. `decay = Some(c_j)`
/// selects the spatial sup-norm form with envelope `e^{-c_j t}`; `None`
/// the space-time form. In `Cycle` mode `phi` is `Phi_k` and `d_sup` is unused.
pub fn cascade_bound_robin(
    j: u32,
    phi: f64,
    d_sup: f64,
    m0: f64,
    decay: Option<f64>,
    t: f64,
    mode: CascadeMode,
) -> Result<f64> {
    if j == 0 {
        return Err(Error::invalid("subsystem index is 1-based"));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("t must be >= 0, got {t}")));
    }
    check_sups(&[phi, d_sup])?;
    let dt = decay_factor(decay, t);
    match mode {
        CascadeMode::Open => Ok(geometric_coefficient(m0, j) * phi * dt + d_sup / m0.powi(j as i32)),
        CascadeMode::Cycle => {
            if !(m0 > 1.0) {
                return Err(Error::SmallGain(format!("m0 = {m0} <= 1")));
            }
            Ok(m0 / (m0 - 1.0) * phi * dt)
        }
    }
}

/// Chain bound for domain-coupled Dirichlet cascades. `d_sups[i]` is the
/// boundary disturbance sup of subsystem `i+1`; it needs `j` entries in
/// `Open` mode and `k` in `Cycle` mode (where `f_sup` is unused).
pub fn cascade_bound_dirichlet(
    j: u32,
    phi: f64,
    f_sup: f64,
    d_sups: &[f64],
    a0: f64,
    decay: Option<f64>,
    t: f64,
    mode: CascadeMode,
) -> Result<f64> {
    if j == 0 {
        return Err(Error::invalid("subsystem index is 1-based"));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("t must be >= 0, got {t}")));
    }
    check_sups(&[phi, f_sup])?;
    check_sups(d_sups)?;
    let dt = decay_factor(decay, t);
    let weighted = |n: usize| -> f64 {
        d_sups
            .iter()
            .enumerate()
            .map(|(i, d)| d / a0.powi((n - 1 - i) as i32))
            .sum()
    };
    match mode {
        CascadeMode::Open => {
            if d_sups.len() != j as usize {
                return Err(Error::invalid(format!(
                    "open chain bound for j = {j} needs {j} boundary sups, got {}",
                    d_sups.len()
                )));
            }
            Ok(geometric_coefficient(a0, j) * phi * dt + f_sup / a0.powi(j as i32) + weighted(j as usize))
        }
        CascadeMode::Cycle => {
            if !(a0 > 1.0) {
                return Err(Error::SmallGain(format!("a0 = {a0} <= 1")));
            }
            let k = d_sups.len();
            if k == 0 {
                return Err(Error::invalid("cycle bound needs k boundary sups"));
            }
            let ak = a0.powi(k as i32);
            Ok(a0 / (a0 - 1.0) * phi * dt + ak / (ak - 1.0) * weighted(k))
        }
    }
}
