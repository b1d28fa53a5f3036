//! Special functions: Heaviside step, Hermite polynomials, oscillator
//! eigenfunctions, the Macdonald function of imaginary order and the Planck
//! factor.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{ensure, Error, Result};
use crate::quadrature::{integrate_adaptive, Domain, IntegrandSpec};

/// Highest Hermite order supported.
pub const MAX_HERMITE_ORDER: usize = 64;

/// Gaps with `|Δ/a|` below this are treated as infrared divergent.
pub const IR_CUTOFF: f64 = 1e-8;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Θ(x) with the convention Θ(0) = 1.
pub fn heaviside(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

fn check_order(n: usize) -> Result<()> {
    if n > MAX_HERMITE_ORDER {
        Err(Error::UnsupportedOrder { order: n, max: MAX_HERMITE_ORDER })
    } else {
        Ok(())
    }
}

/// Physicists' Hermite polynomial H_n(x).
pub fn hermite(n: usize, x: f64) -> Result<f64> {
    check_order(n)?;
    let (mut h0, mut h1) = (1.0, 2.0 * x);
    if n == 0 {
        return Ok(h0);
    }
    for k in 1..n {
        let h2 = 2.0 * x * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    Ok(h1)
}

/// φ_0(x) .. φ_nmax(x), computed with the normalized recurrence so that
/// nothing overflows for large orders.
pub(crate) fn wavefunctions_upto(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(nmax + 1);
    out.push(PI.powf(-0.25) * (-0.5 * x * x).exp());
    if nmax >= 1 {
        out.push(std::f64::consts::SQRT_2 * x * out[0]);
    }
    for k in 1..nmax {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
        out.push(next);
    }
    out
}

/// Normalized oscillator eigenfunction φ_n(x) = N_n H_n(x) e^{-x²/2} with
/// N_n = (2^n n! √π)^{-1/2}.
pub fn oscillator_wavefunction(n: usize, x: f64) -> Result<f64> {
    check_order(n)?;
    Ok(wavefunctions_upto(n, x)[n])
}

/// dφ_n/dx = √(n/2) φ_{n-1} − √((n+1)/2) φ_{n+1}; needs n + 1 ≤ 64.
pub fn oscillator_wavefunction_derivative(n: usize, x: f64) -> Result<f64> {
    check_order(n + 1)?;
    let phi = wavefunctions_upto(n + 1, x);
    let nf = n as f64;
    let lower = if n == 0 { 0.0 } else { (nf / 2.0).sqrt() * phi[n - 1] };
    Ok(lower - ((nf + 1.0) / 2.0).sqrt() * phi[n + 1])
}

/// How a value of K_{iν}(x) was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BesselMethod {
    IntegralRepresentation,
    SeriesSmallX,
    AsymptoticLargeX,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEvalReport {
    pub value: f64,
    pub est_error: f64,
    pub method: BesselMethod,
}

/// K_{iν}(x) to absolute tolerance `tol`.
///
/// The integral representation `∫_0^∞ e^{-x cosh t} cos νt dt` is the
/// reference; a convergent series (small x) or the Hankel expansion (large
/// x) is used where it meets `tol` more cheaply.
pub fn bessel_k_imag(nu: f64, x: f64, tol: f64) -> Result<BesselEvalReport> {
    validate_bessel_args(nu, x, tol)?;
    let nu = nu.abs();
    if x >= 25.0 {
        if let Ok(r) = bessel_k_asymptotic(nu, x) {
            if r.est_error <= tol {
                return Ok(r);
            }
        }
    } else if x <= 2.0 && (nu >= 0.5 || nu < 1e-8) {
        let r = bessel_k_series(nu, x);
        if r.est_error <= tol {
            return Ok(r);
        }
    }
    bessel_k_integral(nu, x, tol)
}

/// K_{iν}(x) by a forced method; fails if that method cannot meet `tol`.
pub fn bessel_k_imag_with(nu: f64, x: f64, tol: f64, method: BesselMethod) -> Result<BesselEvalReport> {
    validate_bessel_args(nu, x, tol)?;
    let nu = nu.abs();
    let r = match method {
        BesselMethod::IntegralRepresentation => return bessel_k_integral(nu, x, tol),
        BesselMethod::SeriesSmallX => bessel_k_series(nu, x),
        BesselMethod::AsymptoticLargeX => bessel_k_asymptotic(nu, x)?,
    };
    if r.est_error <= tol && r.value.is_finite() {
        Ok(r)
    } else {
        Err(Error::NotConverged { estimate: Complex64::new(r.value, 0.0), est_error: r.est_error })
    }
}

fn validate_bessel_args(nu: f64, x: f64, tol: f64) -> Result<()> {
    ensure(nu.is_finite(), || format!("order must be finite, got {nu}"))?;
    ensure(x > 0.0 && x.is_finite(), || format!("argument must be positive and finite, got {x}"))?;
    ensure(tol > 0.0 && tol.is_finite(), || format!("tolerance must be positive, got {tol}"))
}

/// Contour-shifted integral representation.
///
/// Moving the path to Im t = θ gives
/// `K_{iν}(x) = e^{-νθ} ∫_0^∞ e^{-x cosθ cosh u} cos(x sinθ sinh u − νu) du`,
/// whose integrand is of the same size as the result. θ = 0 is the plain
/// representation; θ sits at the saddle point when ν < x and just below π/2
/// otherwise, which keeps relative accuracy when K_{iν} ~ e^{-πν/2}.
fn bessel_k_integral(nu: f64, x: f64, tol: f64) -> Result<BesselEvalReport> {
    let theta = if nu == 0.0 {
        0.0
    } else {
        let eps = (2.0 / nu).min(std::f64::consts::FRAC_PI_4);
        (nu / x).min(1.0).asin().min(std::f64::consts::FRAC_PI_2 - eps)
    };
    let (sin_t, cos_t) = theta.sin_cos();
    let scale = (-nu * theta).exp();
    let inner_tol = (0.5 * tol / scale).min(1e300);
    let decay = x * cos_t;
    let c = (1.0 / inner_tol).ln().max(0.0) + 10.0;
    let u_max = (1.0 + c / decay).acosh();
    let tail = scale * (-decay * u_max.cosh()).exp() / (decay * u_max.sinh());
    let spec = IntegrandSpec::new(
        |u: f64| Complex64::new((-decay * u.cosh()).exp() * (x * sin_t * u.sinh() - nu * u).cos(), 0.0),
        Domain::Finite(0.0, u_max),
    );
    let q = integrate_adaptive(&spec, inner_tol)?;
    let value = scale * q.value.re;
    let est_error = scale * q.est_error + tail;
    if q.converged && est_error <= tol {
        Ok(BesselEvalReport { value, est_error, method: BesselMethod::IntegralRepresentation })
    } else {
        Err(Error::NotConverged { estimate: Complex64::new(value, 0.0), est_error })
    }
}

/// Rough size of K_{iν}(x): e^{-πν/2} below the turning point x = ν and the
/// exponential factor of the uniform expansion above it.
pub(crate) fn bessel_k_magnitude(nu: f64, x: f64) -> f64 {
    let nu = nu.abs();
    if x > nu {
        let r = (x * x - nu * nu).sqrt();
        (-(r + nu * (nu / x).asin())).exp().max(f64::MIN_POSITIVE)
    } else {
        (-0.5 * PI * nu).exp().max(f64::MIN_POSITIVE)
    }
}

/// Im ln Γ(z) for Re z > 0, via the Stirling series after shifting to Re z ≥ 15.
pub(crate) fn ln_gamma(z: Complex64) -> Complex64 {
    const COEF: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
        -3617.0 / 122_400.0,
    ];
    let mut shift = Complex64::new(0.0, 0.0);
    let mut w = z;
    while w.re < 15.0 {
        shift += w.ln();
        w += 1.0;
    }
    let inv = w.inv();
    let inv2 = inv * inv;
    let mut series = Complex64::new(0.0, 0.0);
    let mut pow = inv;
    for c in COEF {
        series += pow * c;
        pow *= inv2;
    }
    (w - 0.5) * w.ln() - w + 0.5 * (2.0 * PI).ln() + series - shift
}

fn bessel_k_series(nu: f64, x: f64) -> BesselEvalReport {
    let q = 0.25 * x * x;
    if nu < 1e-8 {
        // K_0 series; K_{iν} differs from K_0 by O(ν²).
        let mut term = 1.0;
        let mut i0 = 1.0;
        let mut harmonic = 0.0;
        let mut rest = 0.0;
        let mut k = 1.0;
        loop {
            term *= q / (k * k);
            harmonic += 1.0 / k;
            i0 += term;
            rest += term * harmonic;
            if term * harmonic < 1e-18 * rest.abs().max(1e-300) || k > 500.0 {
                break;
            }
            k += 1.0;
        }
        let log_part = (0.5 * x).ln() + EULER_GAMMA;
        let value = -log_part * i0 + rest;
        let est_error = 8.0 * f64::EPSILON * (log_part.abs() * i0 + rest) + nu * nu * (1.0 + log_part * log_part) * i0;
        return BesselEvalReport { value, est_error, method: BesselMethod::SeriesSmallX };
    }
    let arg_gamma = ln_gamma(Complex64::new(1.0, nu)).im;
    let phase = nu * (0.5 * x).ln() - arg_gamma;
    // π / sqrt(πν sinh πν), written to avoid overflow at large ν.
    let amp = PI / ((0.5 * PI * nu).sqrt() * (-(-2.0 * PI * nu).exp_m1()).sqrt()) * (-0.5 * PI * nu).exp();
    let mut term = Complex64::from_polar(amp, phase);
    let mut sum = term;
    let mut abs_sum = term.norm();
    let mut k = 1.0;
    loop {
        term = term * q / (Complex64::new(k, nu) * k);
        sum += term;
        let t = term.norm();
        abs_sum += t;
        if t <= 1e-17 * abs_sum || k > 1000.0 {
            break;
        }
        k += 1.0;
    }
    let est_error = 8.0 * f64::EPSILON * abs_sum * k.sqrt().max(1.0) + term.norm();
    BesselEvalReport { value: -sum.im, est_error, method: BesselMethod::SeriesSmallX }
}

fn bessel_k_asymptotic(nu: f64, x: f64) -> Result<BesselEvalReport> {
    let prefactor = (PI / (2.0 * x)).sqrt() * (-x).exp();
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut abs_sum = 1.0;
    let mut k: f64 = 1.0;
    let mut omitted = f64::INFINITY;
    while k < 200.0 {
        let next = term * -(mu + (2.0 * k - 1.0).powi(2)) / (8.0 * k * x);
        if next.abs() >= term.abs() {
            omitted = next.abs();
            break;
        }
        term = next;
        sum += term;
        abs_sum += term.abs();
        if term.abs() < 1e-17 * sum.abs() {
            omitted = term.abs();
            break;
        }
        k += 1.0;
    }
    if !omitted.is_finite() {
        omitted = term.abs();
    }
    let est_error = prefactor * (omitted + 4.0 * f64::EPSILON * abs_sum);
    Ok(BesselEvalReport { value: prefactor * sum, est_error, method: BesselMethod::AsymptoticLargeX })
}

/// Planck factor n(Δ) = 1/(e^{2πΔ/a} − 1), evaluated without overflow.
pub fn planck_factor(delta: f64, accel: f64) -> Result<f64> {
    ensure(accel > 0.0 && accel.is_finite(), || format!("acceleration must be positive, got {accel}"))?;
    ensure(delta.is_finite(), || format!("gap must be finite, got {delta}"))?;
    if (delta / accel).abs() < IR_CUTOFF {
        return Err(Error::InfraredDivergence { delta, cutoff: IR_CUTOFF });
    }
    let x = 2.0 * PI * delta / accel;
    Ok(if x > 0.0 { (-x).exp() / -(-x).exp_m1() } else { 1.0 / x.exp_m1() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn heaviside_at_zero_is_one() {
        assert_eq!(heaviside(0.0), 1.0);
        assert_eq!(heaviside(-1e-300), 0.0);
        assert_eq!(heaviside(2.0), 1.0);
    }

    #[test]
    fn hermite_low_orders() {
        assert_eq!(hermite(3, 2.0).unwrap(), 40.0);
        assert_eq!(hermite(4, 1.0).unwrap(), -20.0);
        assert!(matches!(hermite(65, 0.0), Err(Error::UnsupportedOrder { order: 65, .. })));
    }

    #[test]
    fn wavefunction_matches_explicit_normalization() {
        for n in 0..12usize {
            let fact: f64 = (1..=n).map(|k| k as f64).product();
            let norm = (2f64.powi(n as i32) * fact * PI.sqrt()).powf(-0.5);
            for &x in &[-2.3, 0.0, 0.7, 3.1] {
                let expect = norm * hermite(n, x).unwrap() * (-x * x / 2.0).exp();
                let got = oscillator_wavefunction(n, x).unwrap();
                assert!((got - expect).abs() < 1e-13, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn wavefunctions_are_orthonormal() {
        let (nodes, weights) = crate::quadrature::gauss_legendre(200);
        let inner = |m: usize, n: usize| -> f64 {
            nodes
                .iter()
                .zip(&weights)
                .map(|(&t, &w)| {
                    let x = 14.0 * t;
                    14.0 * w * oscillator_wavefunction(m, x).unwrap() * oscillator_wavefunction(n, x).unwrap()
                })
                .sum()
        };
        for (m, n) in [(0, 0), (3, 3), (10, 10), (0, 2), (4, 7), (20, 20)] {
            let expect = if m == n { 1.0 } else { 0.0 };
            assert!((inner(m, n) - expect).abs() < 1e-12, "({m},{n})");
        }
    }

    #[test]
    fn derivative_of_phi3_closed_form() {
        let n3 = (8.0 * 6.0 * PI.sqrt()).powf(-0.5);
        for &x in &[-1.5f64, 0.0, 0.4, 2.2] {
            let expect = -4.0 * n3 * (-x * x / 2.0).exp() * (2.0 * x.powi(4) - 9.0 * x * x + 3.0);
            assert!((oscillator_wavefunction_derivative(3, x).unwrap() - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn k_i0_at_one() {
        let r = bessel_k_imag(0.0, 1.0, 1e-12).unwrap();
        assert!((r.value - 0.421_024_438_2).abs() < 1e-9);
    }

    #[test]
    fn arg_gamma_small_shift() {
        // Γ(1+i) = 0.4980156681183560 - 0.1549498283018107 i
        let g = ln_gamma(Complex64::new(1.0, 1.0)).exp();
        assert!((g.re - 0.498_015_668_118_356).abs() < 1e-13);
        assert!((g.im + 0.154_949_828_301_810_7).abs() < 1e-13);
    }

    #[test]
    fn series_and_integral_agree_on_small_x() {
        for &nu in &[0.5, 1.0, 2.0, 5.0, 12.0] {
            for &x in &[0.05, 0.3, 1.0, 2.0] {
                let s = bessel_k_imag_with(nu, x, 1e-11, BesselMethod::SeriesSmallX).unwrap();
                let i = bessel_k_imag_with(nu, x, 1e-11, BesselMethod::IntegralRepresentation).unwrap();
                assert!((s.value - i.value).abs() <= 2e-11, "nu={nu} x={x}: {} vs {}", s.value, i.value);
            }
        }
    }

    #[test]
    fn asymptotic_and_integral_agree_on_large_x() {
        for &nu in &[0.0, 1.0, 3.0] {
            for &x in &[30.0, 45.0] {
                let a = bessel_k_imag_with(nu, x, 1e-20, BesselMethod::AsymptoticLargeX).unwrap();
                let i = bessel_k_imag_with(nu, x, 1e-20, BesselMethod::IntegralRepresentation).unwrap();
                assert!((a.value - i.value).abs() <= 2e-20, "nu={nu} x={x}");
            }
        }
    }

    #[test]
    fn integral_keeps_relative_accuracy_at_large_order() {
        let cases = [
            (40.0, 10.0, 1.187_117_008_397_564_6e-28),
            (20.0, 15.0, -4.564_848_969_604_686_9e-15),
            (50.0, 0.5, 2.415_896_114_956_703_4e-35),
            (8.0, 3.0, 5.261_513_033_613_132e-7),
            (30.0, 40.0, 6.938_634_183_536_447e-24),
        ];
        for (nu, x, expect) in cases {
            let tol = 1e-9 * bessel_k_magnitude(nu, x);
            let r = bessel_k_imag_with(nu, x, tol, BesselMethod::IntegralRepresentation).unwrap();
            assert!(((r.value - expect) / expect).abs() < 1e-7, "nu={nu} x={x}: {} vs {expect}", r.value);
            let auto = bessel_k_imag(nu, x, tol).unwrap();
            assert!(((auto.value - expect) / expect).abs() < 1e-7, "auto nu={nu} x={x}");
        }
    }

    #[test]
    fn forced_asymptotic_fails_at_small_x() {
        assert!(matches!(
            bessel_k_imag_with(2.0, 0.5, 1e-10, BesselMethod::AsymptoticLargeX),
            Err(Error::NotConverged { .. })
        ));
    }

    #[test]
    fn very_small_argument_and_large_order() {
        let r = bessel_k_imag(3.0, 1e-6, 1e-12).unwrap();
        assert!((r.value - 0.007_308_780_163_299_853).abs() < 1e-12);
        let r = bessel_k_imag(50.0, 0.5, 1e-40).unwrap();
        assert!((r.value / 2.415_896_114_956_703_4e-35 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bessel_rejects_bad_arguments() {
        assert!(bessel_k_imag(1.0, 0.0, 1e-10).is_err());
        assert!(bessel_k_imag(1.0, -2.0, 1e-10).is_err());
        assert!(bessel_k_imag(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn planck_examples() {
        let n = planck_factor(1.0, 2.0 * PI).unwrap();
        assert!((n - 1.0 / (std::f64::consts::E - 1.0)).abs() < 1e-15);
        assert!(planck_factor(1e3, 1.0).unwrap() >= 0.0);
        assert!(planck_factor(-1e3, 1.0).unwrap().is_finite());
        assert!(matches!(planck_factor(1e-12, 1.0), Err(Error::InfraredDivergence { .. })));
    }

    proptest! {
        #[test]
        fn planck_reflection(d in 1e-6f64..50.0, a in 0.05f64..5.0) {
            let lhs = planck_factor(-d, a).unwrap();
            let rhs = -1.0 - planck_factor(d, a).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }

        #[test]
        fn bessel_even_in_order(nu in 0.0f64..8.0, x in 0.05f64..20.0) {
            let p = bessel_k_imag(nu, x, 1e-11).unwrap();
            let m = bessel_k_imag(-nu, x, 1e-11).unwrap();
            prop_assert_eq!(p.value, m.value);
            prop_assert!(p.est_error <= 1e-11);
        }

        #[test]
        fn bessel_positive_and_decreasing_above_order(nu in 0.0f64..6.0, dx in 0.0f64..20.0) {
            let x = nu.max(0.05) + dx;
            let x2 = x * 1.05 + 0.01;
            let tol = 1e-6 * (-x2).exp() / x2.sqrt();
            let k1 = bessel_k_imag(nu, x, tol).unwrap().value;
            let k2 = bessel_k_imag(nu, x2, tol).unwrap().value;
            prop_assert!(k1 > 0.0);
            prop_assert!(k2 < k1);
        }

        #[test]
        fn wavefunction_parity(n in 0usize..40, x in -6.0f64..6.0) {
            let a = oscillator_wavefunction(n, x).unwrap();
            let b = oscillator_wavefunction(n, -x).unwrap();
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert!((a - sign * b).abs() < 1e-14);
        }
    }
}
