//! Modified Bessel functions by power series.

const SERIES_TOL: f64 = 1e-16;
const MAX_TERMS: usize = 500;

/// `I_0(z) = sum (z/2)^{2m} / (m!)^2`.
pub fn bessel_i0(z: f64) -> f64 {
    let q = 0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..MAX_TERMS {
        term *= q / (m as f64 * m as f64);
        sum += term;
        if term.abs() <= SERIES_TOL * sum.abs() {
            break;
        }
    }
    sum
}

/// `I_1(z) = sum (z/2)^{2m+1} / (m! (m+1)!)`.
pub fn bessel_i1(z: f64) -> f64 {
    z * i1_over_z(z * z)
}

/// `I_1(z)/z` as a series in `s = z^2`:
/// `sum (s/4)^m / (2 m! (m+1)!)`.
///
/// Negative `s` gives `J_1(w)/w` with `w = sqrt(-s)`. At `s = 0` the value
/// is the limit `1/2`.
pub fn i1_over_z(s: f64) -> f64 {
    let q = 0.25 * s;
    let mut term = 0.5;
    let mut sum = 0.5;
    for m in 1..MAX_TERMS {
        term *= q / (m as f64 * (m + 1) as f64);
        sum += term;
        if term.abs() <= SERIES_TOL * sum.abs().max(1e-300) && m > 2 {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // I_n(z) = (1/pi) * int_0^pi exp(z cos th) cos(n th) dth; the periodic
    // trapezoid rule converges geometrically.
    fn bessel_integral(n: f64, z: f64) -> f64 {
        let m = 2000;
        let h = PI / m as f64;
        let mut s = 0.0;
        for k in 0..=m {
            let th = k as f64 * h;
            let w = if k == 0 || k == m { 0.5 } else { 1.0 };
            s += w * (z * th.cos()).exp() * (n * th).cos();
        }
        s * h / PI
    }

    #[test]
    fn series_match_integral_representation() {
        for &z in &[0.0, 0.3, 1.0, 2.5, 4.0, 5.656854249492381, 9.0] {
            let i0 = bessel_i0(z);
            assert!((i0 - bessel_integral(0.0, z)).abs() <= 1e-13 * i0, "I0({z})");
            let i1 = bessel_i1(z);
            assert!((i1 - bessel_integral(1.0, z)).abs() <= 1e-13 * i0, "I1({z})");
        }
    }

    #[test]
    fn small_argument_limit() {
        assert_eq!(i1_over_z(0.0), 0.5);
        assert!((i1_over_z(1e-10) - 0.5).abs() < 1e-10);
    }

    #[test]
    fn negative_argument_gives_j1() {
        // J_1(w)/w = (1/pi) int_0^pi cos(w sin th - th) dth / w
        let w: f64 = 3.0;
        let m = 4000;
        let h = PI / m as f64;
        let mut s = 0.0;
        for k in 0..=m {
            let th = k as f64 * h;
            let wt = if k == 0 || k == m { 0.5 } else { 1.0 };
            s += wt * (w * th.sin() - th).cos();
        }
        let j1 = s * h / PI;
        assert!((i1_over_z(-w * w) - j1 / w).abs() < 1e-13);
    }
}
