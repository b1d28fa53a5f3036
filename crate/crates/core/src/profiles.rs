//! Spatial profiles and their frequency windows.

use std::cell::Cell;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{ensure, Error, Result};
use crate::quadrature::{fourier_window_1d, integrate_adaptive_with, Domain, IntegrandSpec, QuadOptions};
use crate::specfun::{bessel_k_imag, bessel_k_magnitude, wavefunctions_upto, MAX_HERMITE_ORDER};

/// Smearing function of the detector along its longitudinal direction.
///
/// Construct through the checked constructors; [`SpatialProfile::validate`]
/// re-checks a value built by hand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpatialProfile {
    /// δ(x): represented symbolically, window ≡ 1.
    PointLike,
    /// `norm · e^{-x²/2σ²} · 2cos(λx)`
    DoubleGaussian { sigma: f64, lambda: f64, norm: f64 },
    /// `φ_n(x) · φ_m'(x)` with n even and m odd.
    HermiteCoupling { n: usize, m: usize },
    /// `norm · e^{-2aξ} e^{-ξ²/2σ²} · 2cos(λ̃ξ)`
    RindlerDoubleGaussian { sigma: f64, lambda: f64, accel: f64, norm: f64 },
}

/// Normalisation giving a unit-peak window: (2πσ²)^{-1/2}.
pub fn unit_peak_norm(sigma: f64) -> f64 {
    1.0 / (2.0 * PI * sigma * sigma).sqrt()
}

impl SpatialProfile {
    pub fn double_gaussian(sigma: f64, lambda: f64) -> Result<Self> {
        Self::double_gaussian_with_norm(sigma, lambda, unit_peak_norm(sigma))
    }

    pub fn double_gaussian_with_norm(sigma: f64, lambda: f64, norm: f64) -> Result<Self> {
        let p = SpatialProfile::DoubleGaussian { sigma, lambda, norm };
        p.validate()?;
        Ok(p)
    }

    pub fn hermite_coupling(n: usize, m: usize) -> Result<Self> {
        let p = SpatialProfile::HermiteCoupling { n, m };
        p.validate()?;
        Ok(p)
    }

    pub fn rindler_double_gaussian(sigma: f64, lambda: f64, accel: f64) -> Result<Self> {
        Self::rindler_double_gaussian_with_norm(sigma, lambda, accel, unit_peak_norm(sigma))
    }

    pub fn rindler_double_gaussian_with_norm(sigma: f64, lambda: f64, accel: f64, norm: f64) -> Result<Self> {
        let p = SpatialProfile::RindlerDoubleGaussian { sigma, lambda, accel, norm };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| ensure(v > 0.0 && v.is_finite(), || format!("{name} must be positive, got {v}"));
        match *self {
            SpatialProfile::PointLike => Ok(()),
            SpatialProfile::DoubleGaussian { sigma, lambda, norm } => {
                positive("sigma", sigma)?;
                positive("norm", norm)?;
                ensure(lambda >= 0.0 && lambda.is_finite(), || format!("lambda must be non-negative, got {lambda}"))
            }
            SpatialProfile::HermiteCoupling { n, m } => {
                ensure(n % 2 == 0 && m % 2 == 1, || {
                    format!("Hermite coupling needs n even and m odd, got ({n}, {m}); other parities give an odd profile")
                })?;
                ensure(m > n, || format!("Hermite coupling needs m > n, got ({n}, {m})"))?;
                if m + 1 > MAX_HERMITE_ORDER {
                    return Err(Error::UnsupportedOrder { order: m + 1, max: MAX_HERMITE_ORDER });
                }
                Ok(())
            }
            SpatialProfile::RindlerDoubleGaussian { sigma, lambda, accel, norm } => {
                positive("sigma", sigma)?;
                positive("norm", norm)?;
                positive("acceleration", accel)?;
                ensure(lambda >= 0.0 && lambda.is_finite(), || format!("lambda must be non-negative, got {lambda}"))
            }
        }
    }

    /// Config-file name of the variant.
    pub fn kind_name(&self) -> &'static str {
        match self {
            SpatialProfile::PointLike => "point_like",
            SpatialProfile::DoubleGaussian { .. } => "double_gaussian",
            SpatialProfile::HermiteCoupling { .. } => "hermite_coupling",
            SpatialProfile::RindlerDoubleGaussian { .. } => "rindler_double_gaussian",
        }
    }

    /// Profiles written in Rindler coordinates; only these suit an accelerated detector.
    pub fn is_rindler(&self) -> bool {
        matches!(self, SpatialProfile::RindlerDoubleGaussian { .. })
    }

    pub fn is_point_like(&self) -> bool {
        matches!(self, SpatialProfile::PointLike)
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        self.weighted(x, 0.0)
    }

    /// `e^{2aξ} f(ξ)`, with Gaussian exponents combined so that large `a`
    /// does not overflow an intermediate factor.
    pub(crate) fn weighted(&self, x: f64, a: f64) -> Result<f64> {
        ensure(x.is_finite(), || format!("position must be finite, got {x}"))?;
        Ok(match *self {
            SpatialProfile::PointLike => return Err(Error::DistributionalProfile),
            SpatialProfile::DoubleGaussian { sigma, lambda, norm } => {
                norm * (2.0 * a * x - x * x / (2.0 * sigma * sigma)).exp() * 2.0 * (lambda * x).cos()
            }
            SpatialProfile::HermiteCoupling { n, m } => {
                let phi = wavefunctions_upto(m + 1, x);
                let mf = m as f64;
                let dphi = (mf / 2.0).sqrt() * phi[m - 1] - ((mf + 1.0) / 2.0).sqrt() * phi[m + 1];
                let v = phi[n] * dphi;
                if v == 0.0 || a == 0.0 {
                    v
                } else {
                    v * (2.0 * a * x).exp()
                }
            }
            SpatialProfile::RindlerDoubleGaussian { sigma, lambda, accel, norm } => {
                norm * (2.0 * a * x - 2.0 * accel * x - x * x / (2.0 * sigma * sigma)).exp() * 2.0 * (lambda * x).cos()
            }
        })
    }

    /// Interval outside which `e^{2aξ} f(ξ)` is negligible.
    pub(crate) fn weighted_support(&self, a: f64) -> Option<(f64, f64)> {
        match *self {
            SpatialProfile::PointLike => None,
            SpatialProfile::DoubleGaussian { sigma, .. } => {
                let c = 2.0 * a * sigma * sigma;
                Some((c - 12.0 * sigma, c + 12.0 * sigma))
            }
            SpatialProfile::RindlerDoubleGaussian { sigma, accel, .. } => {
                let c = 2.0 * (a - accel) * sigma * sigma;
                Some((c - 12.0 * sigma, c + 12.0 * sigma))
            }
            SpatialProfile::HermiteCoupling { m, .. } => {
                let w = 12.0 + 1.5 * (2.0 * (m as f64 + 1.0)).sqrt();
                Some((a - w, a + w))
            }
        }
    }
}

/// Pointwise profile value; rejects the point-like distribution.
pub fn evaluate_profile(p: &SpatialProfile, x: f64) -> Result<f64> {
    p.evaluate(x)
}

/// Transverse factor of a separable 3-D profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransverseProfile {
    PointLike,
    /// `norm · e^{-|y|²/2w²}`
    Gaussian { width: f64, norm: f64 },
}

impl TransverseProfile {
    /// Gaussian normalised so that its transform is 1 at k⊥ = 0.
    pub fn gaussian(width: f64) -> Result<Self> {
        ensure(width > 0.0 && width.is_finite(), || format!("transverse width must be positive, got {width}"))?;
        Ok(TransverseProfile::Gaussian { width, norm: 1.0 / (2.0 * PI * width * width) })
    }

    /// 2-D Fourier transform at `k_perp`.
    pub fn factor(&self, k_perp: [f64; 2]) -> f64 {
        match *self {
            TransverseProfile::PointLike => 1.0,
            TransverseProfile::Gaussian { width, norm } => {
                let k2 = k_perp[0] * k_perp[0] + k_perp[1] * k_perp[1];
                norm * 2.0 * PI * width * width * (-0.5 * width * width * k2).exp()
            }
        }
    }

    /// |k⊥| beyond which the squared factor is negligible.
    pub(crate) fn k_cutoff(&self) -> Option<f64> {
        match *self {
            TransverseProfile::PointLike => None,
            TransverseProfile::Gaussian { width, .. } => Some(9.0 / width),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WindowPath {
    ClosedForm,
    Quadrature,
}

impl WindowPath {
    pub fn as_str(&self) -> &'static str {
        match self {
            WindowPath::ClosedForm => "closed_form",
            WindowPath::Quadrature => "quadrature",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransformKind {
    Minkowski,
    Rindler1p1 { accel: f64 },
    Rindler3p1 { accel: f64, mass: f64 },
}

/// A profile bound to a transform, ready to be evaluated at frequencies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyWindow {
    profile: SpatialProfile,
    transverse: TransverseProfile,
    kind: TransformKind,
    path: WindowPath,
    tol: f64,
}

impl FrequencyWindow {
    pub fn minkowski(profile: SpatialProfile, tol: f64) -> Result<Self> {
        Self::build(profile, TransverseProfile::PointLike, TransformKind::Minkowski, tol)
    }

    pub fn rindler_1p1(profile: SpatialProfile, accel: f64, tol: f64) -> Result<Self> {
        ensure(accel > 0.0 && accel.is_finite(), || format!("acceleration must be positive, got {accel}"))?;
        Self::build(profile, TransverseProfile::PointLike, TransformKind::Rindler1p1 { accel }, tol)
    }

    pub fn rindler_3p1(profile: SpatialProfile, transverse: TransverseProfile, accel: f64, mass: f64, tol: f64) -> Result<Self> {
        ensure(accel > 0.0 && accel.is_finite(), || format!("acceleration must be positive, got {accel}"))?;
        ensure(mass >= 0.0 && mass.is_finite(), || format!("mass must be non-negative, got {mass}"))?;
        Self::build(profile, transverse, TransformKind::Rindler3p1 { accel, mass }, tol)
    }

    fn build(profile: SpatialProfile, transverse: TransverseProfile, kind: TransformKind, tol: f64) -> Result<Self> {
        profile.validate()?;
        ensure(tol > 0.0 && tol.is_finite(), || format!("tolerance must be positive, got {tol}"))?;
        let closed = match (kind, profile) {
            (_, SpatialProfile::PointLike) => true,
            (TransformKind::Minkowski, SpatialProfile::DoubleGaussian { .. }) => true,
            (TransformKind::Rindler1p1 { accel }, SpatialProfile::RindlerDoubleGaussian { accel: pa, .. }) => accel == pa,
            _ => false,
        };
        let path = if closed { WindowPath::ClosedForm } else { WindowPath::Quadrature };
        Ok(Self { profile, transverse, kind, path, tol })
    }

    /// Force the quadrature path; point-like profiles have none.
    pub fn with_quadrature(mut self) -> Result<Self> {
        if self.profile.is_point_like() {
            return Err(Error::DistributionalProfile);
        }
        self.path = WindowPath::Quadrature;
        Ok(self)
    }

    pub fn path(&self) -> WindowPath {
        self.path
    }

    pub fn profile(&self) -> &SpatialProfile {
        &self.profile
    }

    pub fn transverse(&self) -> &TransverseProfile {
        &self.transverse
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    /// Window at frequency `freq` (k⊥ = 0 for the 3+1 kind).
    pub fn evaluate(&self, freq: f64) -> Result<Complex64> {
        self.evaluate_3p1(freq, [0.0, 0.0])
    }

    pub fn evaluate_3p1(&self, freq: f64, k_perp: [f64; 2]) -> Result<Complex64> {
        ensure(freq.is_finite(), || format!("frequency must be finite, got {freq}"))?;
        match self.kind {
            TransformKind::Minkowski => match self.path {
                WindowPath::ClosedForm => Ok(Complex64::new(closed_form_1d(&self.profile, freq), 0.0)),
                WindowPath::Quadrature => weighted_transform(&self.profile, 0.0, freq, self.tol),
            },
            TransformKind::Rindler1p1 { accel } => match self.path {
                WindowPath::ClosedForm => Ok(Complex64::new(closed_form_1d(&self.profile, freq), 0.0)),
                WindowPath::Quadrature => weighted_transform(&self.profile, accel, freq, self.tol),
            },
            TransformKind::Rindler3p1 { accel, mass } => {
                let big_m = (k_perp[0] * k_perp[0] + k_perp[1] * k_perp[1] + mass * mass).sqrt();
                let long = rindler_longitudinal_profile(&self.profile, freq, accel, big_m, self.tol)?;
                Ok(Complex64::new(long * self.transverse.factor(k_perp), 0.0))
            }
        }
    }

    /// Frequency above which |f̃|² is negligible, when known in advance.
    pub fn support_hint(&self) -> Option<f64> {
        match self.profile {
            SpatialProfile::PointLike => None,
            SpatialProfile::DoubleGaussian { sigma, lambda, .. } | SpatialProfile::RindlerDoubleGaussian { sigma, lambda, .. } => {
                Some(lambda + 9.0 / sigma)
            }
            SpatialProfile::HermiteCoupling { n, m } => Some(20.0 + 2.0 * ((n + m + 1) as f64).sqrt()),
        }
    }
}

/// Closed-form unit-peak windows; only called for variants that have one.
fn closed_form_1d(p: &SpatialProfile, k: f64) -> f64 {
    match *p {
        SpatialProfile::PointLike => 1.0,
        SpatialProfile::DoubleGaussian { sigma, lambda, norm } | SpatialProfile::RindlerDoubleGaussian { sigma, lambda, norm, .. } => {
            let s2 = sigma * sigma;
            norm * (2.0 * PI).sqrt() * sigma * ((-0.5 * s2 * (k - lambda).powi(2)).exp() + (-0.5 * s2 * (k + lambda).powi(2)).exp())
        }
        SpatialProfile::HermiteCoupling { .. } => unreachable!("Hermite windows have no closed form"),
    }
}

/// `∫ e^{2aξ} f(ξ) e^{ikξ} dξ` by quadrature; `a = 0` is the Minkowski transform.
fn weighted_transform(p: &SpatialProfile, a: f64, k: f64, tol: f64) -> Result<Complex64> {
    let failure = Cell::new(None);
    let f = |x: f64| match p.weighted(x, a) {
        Ok(v) => v,
        Err(e) => {
            failure.set(Some(e));
            0.0
        }
    };
    let r = fourier_window_1d(f, k, tol)?;
    if let Some(e) = failure.take() {
        return Err(e);
    }
    if !r.converged {
        return Err(Error::NotConverged { estimate: r.value, est_error: r.est_error });
    }
    Ok(r.value)
}

/// Minkowski window f̃(k) with the closed form where one exists.
pub fn minkowski_window(p: &SpatialProfile, k: f64, tol: f64) -> Result<Complex64> {
    FrequencyWindow::minkowski(*p, tol)?.evaluate(k)
}

/// Minkowski window by quadrature regardless of closed-form availability.
pub fn minkowski_window_quadrature(p: &SpatialProfile, k: f64, tol: f64) -> Result<Complex64> {
    FrequencyWindow::minkowski(*p, tol)?.with_quadrature()?.evaluate(k)
}

/// Product of 1-D windows for a separable profile.
pub fn minkowski_window_separable(factors: &[SpatialProfile], k: &[f64], tol: f64) -> Result<Complex64> {
    ensure(factors.len() == k.len(), || format!("{} profile factors but {} wavenumbers", factors.len(), k.len()))?;
    factors.iter().zip(k).try_fold(Complex64::new(1.0, 0.0), |acc, (p, &ki)| Ok(acc * minkowski_window(p, ki, tol)?))
}

pub fn rindler_window_1p1(p: &SpatialProfile, omega: f64, accel: f64, tol: f64) -> Result<Complex64> {
    FrequencyWindow::rindler_1p1(*p, accel, tol)?.evaluate(omega)
}

pub fn rindler_window_1p1_quadrature(p: &SpatialProfile, omega: f64, accel: f64, tol: f64) -> Result<Complex64> {
    FrequencyWindow::rindler_1p1(*p, accel, tol)?.with_quadrature()?.evaluate(omega)
}

/// 3+1 Rindler window of a separable profile at (Ω, k⊥).
pub fn rindler_window_3p1(
    p: &SpatialProfile,
    transverse: &TransverseProfile,
    omega: f64,
    k_perp: [f64; 2],
    accel: f64,
    mass: f64,
    tol: f64,
) -> Result<Complex64> {
    FrequencyWindow::rindler_3p1(*p, *transverse, accel, mass, tol)?.evaluate_3p1(omega, k_perp)
}

fn rindler_longitudinal_profile(p: &SpatialProfile, omega: f64, accel: f64, big_m: f64, tol: f64) -> Result<f64> {
    if big_m == 0.0 {
        return Err(Error::KernelDegeneracy);
    }
    let nu = omega / accel;
    match p.weighted_support(accel) {
        None => {
            let x = big_m / accel;
            Ok(bessel_k_imag(nu, x, tol * bessel_k_magnitude(nu, x))?.value)
        }
        Some(support) => {
            let weighted = |xi: f64| p.weighted(xi, accel);
            longitudinal_quadrature(weighted, support, nu, accel, big_m, tol)
        }
    }
}

/// `∫ e^{2aξ} f(ξ) K_{iΩ/a}(M e^{aξ}/a) dξ` for a callable profile `f`
/// supported (to negligible tails) on `support`.
pub fn rindler_longitudinal<F>(f: F, support: (f64, f64), omega: f64, accel: f64, big_m: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    ensure(accel > 0.0, || format!("acceleration must be positive, got {accel}"))?;
    ensure(tol > 0.0, || format!("tolerance must be positive, got {tol}"))?;
    if big_m == 0.0 {
        return Err(Error::KernelDegeneracy);
    }
    let weighted = |xi: f64| Ok(f(xi) * (2.0 * accel * xi).exp());
    longitudinal_quadrature(weighted, support, omega / accel, accel, big_m, tol)
}

fn longitudinal_quadrature<W>(weighted: W, support: (f64, f64), nu: f64, accel: f64, big_m: f64, tol: f64) -> Result<f64>
where
    W: Fn(f64) -> Result<f64>,
{
    ensure(big_m > 0.0 && big_m.is_finite(), || format!("transverse mass must be positive, got {big_m}"))?;
    let failure = Cell::new(None);
    let integrand = |xi: f64| {
        let x = big_m / accel * (accel * xi).exp();
        if !(x > 0.0 && x.is_finite()) {
            return Complex64::new(0.0, 0.0);
        }
        let w = match weighted(xi) {
            Ok(w) if w != 0.0 => w,
            Ok(_) => return Complex64::new(0.0, 0.0),
            Err(e) => {
                failure.set(Some(e));
                return Complex64::new(0.0, 0.0);
            }
        };
        // Kernels far past the turning point are below any representable product.
        if x > nu + 800.0 {
            return Complex64::new(0.0, 0.0);
        }
        match bessel_k_imag(nu, x, 1e-3 * tol * bessel_k_magnitude(nu, x)) {
            Ok(r) => Complex64::new(w * r.value, 0.0),
            Err(e) => {
                failure.set(Some(e));
                Complex64::new(0.0, 0.0)
            }
        }
    };
    let spec = IntegrandSpec::new(integrand, Domain::Finite(support.0, support.1));
    let floor = tol * (-0.5 * PI * nu).exp() * 1e-6;
    let opts = QuadOptions::new(floor.max(f64::MIN_POSITIVE)).with_rel_tol(tol);
    let r = integrate_adaptive_with(&spec, &opts)?;
    if let Some(e) = failure.take() {
        return Err(e);
    }
    if !r.converged {
        return Err(Error::NotConverged { estimate: r.value, est_error: r.est_error });
    }
    Ok(r.value.re)
}

/// Least-squares double-Gaussian approximation of a Hermite coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteFit {
    pub lambda: f64,
    pub sigma: f64,
    pub amplitude: f64,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

const FIT_POINTS: usize = 4001;
const FIT_HALF_WIDTH: f64 = 8.0;

fn fit_grid() -> impl Iterator<Item = f64> {
    (0..FIT_POINTS).map(|i| -FIT_HALF_WIDTH + 2.0 * FIT_HALF_WIDTH * i as f64 / (FIT_POINTS - 1) as f64)
}

struct FitTarget {
    xs: Vec<f64>,
    values: Vec<f64>,
    norm2: f64,
}

impl FitTarget {
    fn new(n: usize, m: usize) -> Result<Self> {
        let p = SpatialProfile::hermite_coupling(n, m)?;
        let xs: Vec<f64> = fit_grid().collect();
        let values = xs.iter().map(|&x| p.evaluate(x)).collect::<Result<Vec<_>>>()?;
        let norm2 = values.iter().map(|v| v * v).sum();
        Ok(Self { xs, values, norm2 })
    }

    /// (relative L² residual, optimal amplitude) for shape e^{-x²/2σ²}·2cos λx.
    fn residual(&self, lambda: f64, sigma: f64) -> (f64, f64) {
        if !(sigma > 0.0) {
            return (f64::INFINITY, 0.0);
        }
        let inv = 1.0 / (2.0 * sigma * sigma);
        let (mut fg, mut gg) = (0.0, 0.0);
        for (&x, &f) in self.xs.iter().zip(&self.values) {
            let g = (-x * x * inv).exp() * 2.0 * (lambda * x).cos();
            fg += f * g;
            gg += g * g;
        }
        if gg == 0.0 || self.norm2 == 0.0 {
            return (1.0, 0.0);
        }
        let r2 = (1.0 - fg * fg / (self.norm2 * gg)).max(0.0);
        (r2.sqrt(), fg / gg)
    }
}

/// Relative L² residual of the best amplitude-rescaled double Gaussian with
/// the given (λ, σ), on 4001 points over [−8, 8].
pub fn hermite_fit_residual(n: usize, m: usize, lambda: f64, sigma: f64) -> Result<(f64, f64)> {
    Ok(FitTarget::new(n, m)?.residual(lambda, sigma))
}

/// Fit (λ, σ): coarse grid search followed by Nelder–Mead refinement.
pub fn hermite_fit_report(n: usize, m: usize) -> Result<HermiteFit> {
    let target = FitTarget::new(n, m)?;
    let cost = |v: [f64; 2]| target.residual(v[0], v[1]).0;

    let mut best = ([0.0, 1.0], f64::INFINITY);
    for i in 0..=160 {
        let lambda = 0.05 * i as f64;
        for j in 1..=80 {
            let sigma = 0.05 * j as f64;
            let c = cost([lambda, sigma]);
            if c < best.1 {
                best = ([lambda, sigma], c);
            }
        }
    }

    let (point, value, iterations, converged) = nelder_mead(cost, best.0, [0.05, 0.05], 1e-12, 2000);
    let (residual, amplitude) = target.residual(point[0], point[1]);
    debug_assert!((residual - value).abs() < 1e-15);
    Ok(HermiteFit { lambda: point[0].abs(), sigma: point[1], amplitude, residual, converged, iterations })
}

/// Nelder–Mead minimisation in two dimensions. Returns (point, value,
/// iterations, converged).
fn nelder_mead<F>(f: F, start: [f64; 2], step: [f64; 2], ftol: f64, max_iter: usize) -> ([f64; 2], f64, usize, bool)
where
    F: Fn([f64; 2]) -> f64,
{
    let mut simplex = [start, [start[0] + step[0], start[1]], [start[0], start[1] + step[1]]];
    let mut values = simplex.map(&f);
    let combine = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    for iter in 0..max_iter {
        let mut order = [0, 1, 2];
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);
        if (values[2] - values[0]).abs() <= ftol * (values[0].abs() + values[2].abs() + 1e-300) {
            return (simplex[0], values[0], iter, true);
        }
        let centroid = combine(simplex[0], simplex[1], 0.5);
        let reflected = combine(centroid, simplex[2], -1.0);
        let fr = f(reflected);
        if fr < values[0] {
            let expanded = combine(centroid, simplex[2], -2.0);
            let fe = f(expanded);
            if fe < fr {
                simplex[2] = expanded;
                values[2] = fe;
            } else {
                simplex[2] = reflected;
                values[2] = fr;
            }
        } else if fr < values[1] {
            simplex[2] = reflected;
            values[2] = fr;
        } else {
            let (contracted, fc) = if fr < values[2] {
                let c = combine(centroid, simplex[2], -0.5);
                (c, f(c))
            } else {
                let c = combine(centroid, simplex[2], 0.5);
                (c, f(c))
            };
            if fc < values[2].min(fr) {
                simplex[2] = contracted;
                values[2] = fc;
            } else {
                for i in 1..3 {
                    simplex[i] = combine(simplex[0], simplex[i], 0.5);
                    values[i] = f(simplex[i]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap_or(0);
    (simplex[best], values[best], max_iter, false)
}
