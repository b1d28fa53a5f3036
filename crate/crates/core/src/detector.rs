//! Transition rates of an Unruh–DeWitt detector.
//!
//! Every Wightman function here carries an overall 1/(2π), the convention
//! under which integrating it along the worldline reproduces the
//! closed-form rates exactly.

use std::cell::Cell;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{ensure, Error, Result};
use crate::profiles::{FrequencyWindow, SpatialProfile, TransverseProfile};
use crate::quadrature::{
    auto_horizon, integrate_adaptive, integrate_adaptive_with, oscillatory_halfline, oscillatory_integral, Domain, HalflineOptions,
    IntegrandSpec, QuadOptions, QuadratureResult,
};
use crate::specfun::{heaviside, planck_factor, IR_CUTOFF};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trajectory {
    Inertial,
    /// Right-wedge hyperbola with proper acceleration `accel`.
    UniformlyAccelerated { accel: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Spacetime {
    OnePlusOneMassless,
    ThreePlusOne { mass: f64 },
}

impl Spacetime {
    pub fn mass(&self) -> f64 {
        match *self {
            Spacetime::OnePlusOneMassless => 0.0,
            Spacetime::ThreePlusOne { mass } => mass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Wedge {
    R,
    L,
}

/// Φ(ω) = (2πw²)^{-1/4} e^{-(ω-c)²/4w²}, normalised on ω > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPacket {
    center: f64,
    width: f64,
}

/// Allowed deviation of ∫_0^∞ |Φ|² from one.
pub const PACKET_NORM_TOL: f64 = 1e-8;

impl GaussianPacket {
    pub fn new(center: f64, width: f64) -> Result<Self> {
        ensure(width > 0.0 && width.is_finite(), || format!("packet width must be positive, got {width}"))?;
        ensure(center.is_finite(), || format!("packet centre must be finite, got {center}"))?;
        let p = Self { center, width };
        let norm = p.norm_squared()?;
        ensure((norm - 1.0).abs() <= PACKET_NORM_TOL, || {
            format!("packet (centre {center}, width {width}) has ∫|Φ|² = {norm} on ω > 0; it must be 1 within {PACKET_NORM_TOL:e}")
        })?;
        Ok(p)
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn amplitude(&self, omega: f64) -> f64 {
        let w = self.width;
        (2.0 * PI * w * w).powf(-0.25) * (-(omega - self.center).powi(2) / (4.0 * w * w)).exp()
    }

    /// ∫_0^∞ |Φ|² dω.
    pub fn norm_squared(&self) -> Result<f64> {
        let spec = IntegrandSpec::new(|w: f64| Complex64::new(self.amplitude(w).powi(2), 0.0), Domain::HalfLine(0.0));
        Ok(integrate_adaptive(&spec, 1e-13)?.value.re)
    }

    /// Frequency interval carrying all but a negligible part of Φ.
    pub fn support(&self) -> (f64, f64) {
        ((self.center - 12.0 * self.width).max(0.0), self.center + 12.0 * self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldState {
    Vacuum,
    MinkowskiParticle(GaussianPacket),
    UnruhParticle { packet: GaussianPacket, wedge: Wedge },
}

/// Rindler mode normalisation convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum NormConvention {
    #[default]
    Standard,
    /// N ≡ 1, for testing alternative conventions.
    Unit,
}

/// Default infrared regulator scale for the accelerated 1+1 Wightman function.
pub const DEFAULT_IR_REGULATOR: f64 = 0.1;

/// A validated detector model. Energy gaps and times are passed per call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    spacetime: Spacetime,
    trajectory: Trajectory,
    profile: SpatialProfile,
    transverse: TransverseProfile,
    state: FieldState,
    normalisation: NormConvention,
    ir_regulator: f64,
}

impl ModelSpec {
    pub fn new(spacetime: Spacetime, trajectory: Trajectory, profile: SpatialProfile) -> Result<Self> {
        let spec = Self {
            spacetime,
            trajectory,
            profile,
            transverse: TransverseProfile::PointLike,
            state: FieldState::Vacuum,
            normalisation: NormConvention::Standard,
            ir_regulator: DEFAULT_IR_REGULATOR,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_state(mut self, state: FieldState) -> Result<Self> {
        self.state = state;
        self.validate()?;
        Ok(self)
    }

    pub fn with_transverse(mut self, transverse: TransverseProfile) -> Result<Self> {
        self.transverse = transverse;
        self.validate()?;
        Ok(self)
    }

    pub fn with_normalisation(mut self, normalisation: NormConvention) -> Result<Self> {
        self.normalisation = normalisation;
        self.validate()?;
        Ok(self)
    }

    pub fn with_ir_regulator(mut self, scale: f64) -> Result<Self> {
        self.ir_regulator = scale;
        self.validate()?;
        Ok(self)
    }

    pub fn spacetime(&self) -> Spacetime {
        self.spacetime
    }
    pub fn trajectory(&self) -> Trajectory {
        self.trajectory
    }
    pub fn profile(&self) -> &SpatialProfile {
        &self.profile
    }
    pub fn transverse(&self) -> &TransverseProfile {
        &self.transverse
    }
    pub fn state(&self) -> FieldState {
        self.state
    }
    pub fn normalisation(&self) -> NormConvention {
        self.normalisation
    }
    pub fn ir_regulator(&self) -> f64 {
        self.ir_regulator
    }

    pub fn accel(&self) -> Option<f64> {
        match self.trajectory {
            Trajectory::Inertial => None,
            Trajectory::UniformlyAccelerated { accel } => Some(accel),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        if let Spacetime::ThreePlusOne { mass } = self.spacetime {
            ensure(mass >= 0.0 && mass.is_finite(), || format!("mass must be non-negative, got {mass}"))?;
        }
        ensure(self.ir_regulator > 0.0 && self.ir_regulator.is_finite(), || {
            format!("IR regulator scale must be positive, got {}", self.ir_regulator)
        })?;
        match self.trajectory {
            Trajectory::Inertial => {
                if self.profile.is_rindler() {
                    return Err(Error::Inconsistent(format!(
                        "profile `{}` is written in Rindler coordinates but the trajectory is inertial",
                        self.profile.kind_name()
                    )));
                }
            }
            Trajectory::UniformlyAccelerated { accel } => {
                ensure(accel > 0.0 && accel.is_finite(), || format!("acceleration must be positive, got {accel}"))?;
                match self.profile {
                    SpatialProfile::PointLike => {}
                    SpatialProfile::RindlerDoubleGaussian { accel: pa, .. } if pa == accel => {}
                    SpatialProfile::RindlerDoubleGaussian { accel: pa, .. } => {
                        return Err(Error::Inconsistent(format!(
                            "profile acceleration {pa} differs from trajectory acceleration {accel}"
                        )))
                    }
                    other => {
                        return Err(Error::Inconsistent(format!(
                            "profile `{}` is a Minkowski profile but the trajectory is accelerated",
                            other.kind_name()
                        )))
                    }
                }
            }
        }
        let three_plus_one_accel =
            matches!((self.spacetime, self.trajectory), (Spacetime::ThreePlusOne { .. }, Trajectory::UniformlyAccelerated { .. }));
        if !matches!(self.transverse, TransverseProfile::PointLike) && !three_plus_one_accel {
            return Err(Error::Inconsistent("a transverse profile applies only to an accelerated 3+1 detector".into()));
        }
        match self.state {
            FieldState::Vacuum => {}
            FieldState::MinkowskiParticle(_) | FieldState::UnruhParticle { .. } if self.spacetime != Spacetime::OnePlusOneMassless => {
                return Err(Error::Unsupported("particle states are implemented for the 1+1 massless field only".into()))
            }
            FieldState::MinkowskiParticle(_) => {
                if self.accel().is_some() {
                    return Err(Error::Inconsistent("Minkowski particle states pair with an inertial detector".into()));
                }
            }
            FieldState::UnruhParticle { .. } => {
                if self.accel().is_none() {
                    return Err(Error::Inconsistent("Unruh particle states pair with an accelerated detector".into()));
                }
            }
        }
        Ok(())
    }

    /// The frequency window matching the trajectory.
    pub fn window(&self, tol: f64) -> Result<FrequencyWindow> {
        match (self.trajectory, self.spacetime) {
            (Trajectory::Inertial, _) => FrequencyWindow::minkowski(self.profile, tol),
            (Trajectory::UniformlyAccelerated { accel }, Spacetime::OnePlusOneMassless) => {
                FrequencyWindow::rindler_1p1(self.profile, accel, tol)
            }
            (Trajectory::UniformlyAccelerated { accel }, Spacetime::ThreePlusOne { mass }) => {
                FrequencyWindow::rindler_3p1(self.profile, self.transverse, accel, mass, tol)
            }
        }
    }

    fn norm(&self, omega: f64, accel: f64) -> Result<f64> {
        rindler_norm(omega, accel, self.spacetime, self.normalisation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RatePath {
    ClosedForm,
    Numeric,
}

impl RatePath {
    pub fn as_str(&self) -> &'static str {
        match self {
            RatePath::ClosedForm => "closed_form",
            RatePath::Numeric => "numeric",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateResult {
    pub rate: f64,
    pub path: RatePath,
    pub est_error: f64,
    /// Present only for state-dependent rates.
    pub tau: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateOptions {
    pub quad_tol: f64,
    pub tail_tol: f64,
    pub max_horizon: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self { quad_tol: 1e-8, tail_tol: 1e-10, max_horizon: 4096.0 }
    }
}

impl RateOptions {
    pub fn with_tol(quad_tol: f64) -> Self {
        Self { quad_tol, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        ensure(self.quad_tol > 0.0, || format!("quad_tol must be positive, got {}", self.quad_tol))?;
        ensure(self.tail_tol > 0.0, || format!("tail_tol must be positive, got {}", self.tail_tol))?;
        ensure(self.max_horizon > 0.0, || "max_horizon must be positive".into())
    }
}

/// Rindler mode normalisation N_{Ω/a}.
pub fn rindler_norm(omega: f64, accel: f64, spacetime: Spacetime, convention: NormConvention) -> Result<f64> {
    ensure(accel > 0.0 && accel.is_finite(), || format!("acceleration must be positive, got {accel}"))?;
    if !(omega >= accel * IR_CUTOFF) {
        return Err(Error::InfraredDivergence { delta: omega, cutoff: IR_CUTOFF });
    }
    if convention == NormConvention::Unit {
        return Ok(1.0);
    }
    Ok(match spacetime {
        Spacetime::OnePlusOneMassless => 1.0 / (4.0 * PI * omega).sqrt(),
        Spacetime::ThreePlusOne { .. } => (PI * omega / accel).sinh().sqrt() / (2.0 * PI * PI * accel.sqrt()),
    })
}

/// (cosh r, sinh r) with tanh r = e^{-πΩ/a}.
pub fn unruh_weights(omega: f64, accel: f64) -> Result<(f64, f64)> {
    ensure(omega > 0.0 && omega.is_finite(), || format!("frequency must be positive, got {omega}"))?;
    ensure(accel > 0.0 && accel.is_finite(), || format!("acceleration must be positive, got {accel}"))?;
    Ok(thermal_weights(omega, accel))
}

fn thermal_weights(omega: f64, accel: f64) -> (f64, f64) {
    let x = PI * omega / accel;
    let denom = (-(-2.0 * x).exp_m1()).sqrt();
    (1.0 / denom, (-x).exp() / denom)
}

fn check_vacuum(spec: &ModelSpec) -> Result<()> {
    spec.validate()?;
    if spec.state != FieldState::Vacuum {
        return Err(Error::Inconsistent("vacuum rate requested for a particle state".into()));
    }
    Ok(())
}

/// Θ(−Δ−m) √(Δ²−m²) |f̃(−Δ)|².
pub fn vacuum_rate_inertial(spec: &ModelSpec, delta: f64) -> Result<RateResult> {
    check_vacuum(spec)?;
    ensure(spec.trajectory == Trajectory::Inertial, || "inertial rate needs an inertial trajectory".into())?;
    inertial_closed_form(spec, delta, RateOptions::default().quad_tol)
}

fn inertial_closed_form(spec: &ModelSpec, delta: f64, tol: f64) -> Result<RateResult> {
    ensure(delta.is_finite(), || format!("gap must be finite, got {delta}"))?;
    let m = spec.spacetime.mass();
    let gate = heaviside(-delta - m);
    let (rate, est_error) = if gate == 0.0 {
        (0.0, 0.0)
    } else {
        let window = spec.window(tol)?;
        let f = window.evaluate(-delta)?.norm();
        let density = (delta * delta - m * m).max(0.0).sqrt();
        let err = if window.path() == crate::profiles::WindowPath::Quadrature { 2.0 * density * f * tol } else { 0.0 };
        (density * f * f, err)
    };
    Ok(RateResult { rate, path: RatePath::ClosedForm, est_error, tau: None, converged: true })
}

/// Thermal rate n(Δ) Ξ(Δ) of the accelerated detector.
pub fn vacuum_rate_accelerated(spec: &ModelSpec, delta: f64) -> Result<RateResult> {
    vacuum_rate_accelerated_with(spec, delta, &RateOptions::default())
}

pub fn vacuum_rate_accelerated_with(spec: &ModelSpec, delta: f64, opts: &RateOptions) -> Result<RateResult> {
    check_vacuum(spec)?;
    opts.validate()?;
    accelerated_closed_form(spec, delta, opts.quad_tol)
}

fn accelerated_closed_form(spec: &ModelSpec, delta: f64, tol: f64) -> Result<RateResult> {
    let accel = spec.accel().ok_or_else(|| Error::Inconsistent("accelerated rate needs an accelerated trajectory".into()))?;
    let n = planck_factor(delta, accel)?;
    let (xi, xi_err) = detailed_balance_kernel(spec, delta, accel, tol)?;
    Ok(RateResult { rate: n * xi, path: RatePath::ClosedForm, est_error: (n * xi_err).abs(), tau: None, converged: true })
}

/// Ξ(Δ) = sign(Δ) · (mode density) N²_{|Δ|/a} |f̃(|Δ|)|².
fn detailed_balance_kernel(spec: &ModelSpec, delta: f64, accel: f64, tol: f64) -> Result<(f64, f64)> {
    let omega = delta.abs();
    let sign = delta.signum();
    let window = spec.window(tol)?;
    match spec.spacetime {
        Spacetime::OnePlusOneMassless => {
            let n = spec.norm(omega, accel)?;
            let f = window.evaluate(omega)?.norm();
            let err = if window.path() == crate::profiles::WindowPath::Quadrature { 2.0 * n * n * f * tol } else { 0.0 };
            Ok((sign * n * n * f * f, err))
        }
        Spacetime::ThreePlusOne { mass } => {
            if omega / accel > 200.0 {
                return Err(Error::Unsupported(format!(
                    "Ω/a = {} is beyond the range of the 3+1 Bessel kernel (≤ 200)",
                    omega / accel
                )));
            }
            let n = spec.norm(omega, accel)?;
            let k_max = radial_cutoff(spec, &window, omega, accel);
            let failure = Cell::new(None);
            let integrand = |k: f64| {
                if k <= 0.0 && mass == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                match window.evaluate_3p1(omega, [k, 0.0]) {
                    Ok(w) => Complex64::new(2.0 * PI * k * n * n * w.norm_sqr(), 0.0),
                    Err(e) => {
                        failure.set(Some(e));
                        Complex64::new(0.0, 0.0)
                    }
                }
            };
            let spec_q = IntegrandSpec::new(integrand, Domain::Finite(0.0, k_max));
            let r = integrate_adaptive_with(&spec_q, &QuadOptions::new(1e-300).with_rel_tol(tol))?;
            if let Some(e) = failure.take() {
                return Err(e);
            }
            if !r.converged {
                return Err(Error::NotConverged { estimate: r.value, est_error: r.est_error });
            }
            Ok((sign * r.value.re, r.est_error))
        }
    }
}

/// |k⊥| beyond which the 3+1 kernel and transverse factor are negligible.
fn radial_cutoff(spec: &ModelSpec, window: &FrequencyWindow, omega: f64, accel: f64) -> f64 {
    let spread = match spec.profile {
        SpatialProfile::PointLike => 0.0,
        SpatialProfile::DoubleGaussian { sigma, .. } | SpatialProfile::RindlerDoubleGaussian { sigma, .. } => 6.0 * sigma,
        SpatialProfile::HermiteCoupling { .. } => 6.0,
    };
    let kernel = (omega + 40.0 * accel) * (accel * spread).exp();
    window.transverse().k_cutoff().map_or(kernel, |k| kernel.min(k))
}

/// Closed-form vacuum rate for either trajectory.
pub fn vacuum_rate(spec: &ModelSpec, delta: f64, opts: &RateOptions) -> Result<RateResult> {
    check_vacuum(spec)?;
    opts.validate()?;
    vacuum_closed_form(spec, delta, opts.quad_tol)
}

fn vacuum_closed_form(spec: &ModelSpec, delta: f64, tol: f64) -> Result<RateResult> {
    match spec.trajectory {
        Trajectory::Inertial => inertial_closed_form(spec, delta, tol),
        Trajectory::UniformlyAccelerated { .. } => accelerated_closed_form(spec, delta, tol),
    }
}

/// Smooth infrared regulator χ(Ω) = 1 − exp(−(Ω/Ω_IR)⁸); equal to 1 within
/// rounding for Ω > 1.6 Ω_IR.
fn ir_regulator(omega: f64, scale: f64) -> f64 {
    -(-(omega / scale).powi(8)).exp_m1()
}

/// Upper end of the mode integral: where |f̃|² becomes negligible.
fn spectral_cutoff(window: &FrequencyWindow, tol: f64) -> Result<f64> {
    if let Some(u) = window.support_hint() {
        return Ok(u);
    }
    let peak = (0..=40).map(|i| window.evaluate(0.5 * i as f64).map(|w| w.norm())).try_fold(0.0f64, |m, v| v.map(|v| m.max(v)))?;
    let mut k = 20.0;
    while k < 1e4 {
        let tail = (0..5).map(|j| window.evaluate(k * (1.0 + 0.1 * j as f64)).map(|w| w.norm())).try_fold(0.0f64, |m, v| v.map(|v| m.max(v)))?;
        if tail <= 1e-8 * tol * peak.max(1e-300) {
            return Ok(k);
        }
        k *= 1.5;
    }
    Err(Error::Unsupported("window does not decay; no spectral cutoff found".into()))
}

/// Vacuum Wightman function W(τ, τ′) along the trajectory.
pub fn wightman_vacuum(spec: &ModelSpec, tau: f64, tau_p: f64, tol: f64) -> Result<QuadratureResult> {
    spec.validate()?;
    if spec.profile.is_point_like() {
        return Err(Error::DistributionalProfile);
    }
    let window = spec.window(tol)?;
    let upper = spectral_cutoff(&window, tol)?;
    wightman_at(spec, &window, upper, tau - tau_p, tol)
}

fn wightman_at(spec: &ModelSpec, window: &FrequencyWindow, upper: f64, s: f64, tol: f64) -> Result<QuadratureResult> {
    let failure = Cell::new(None);
    let win2 = |w: f64| match window.evaluate(w) {
        Ok(v) => v.norm_sqr(),
        Err(e) => {
            failure.set(Some(e));
            0.0
        }
    };
    let opts = QuadOptions::new(tol);
    let r = match (spec.trajectory, spec.spacetime) {
        (Trajectory::Inertial, sp) => {
            let m = sp.mass();
            if upper <= m {
                return Ok(QuadratureResult { value: Complex64::new(0.0, 0.0), est_error: 0.0, evaluations: 0, converged: true });
            }
            let g = |w: f64| Complex64::new((w * w - m * m).max(0.0).sqrt() / (2.0 * PI) * win2(w), 0.0);
            oscillatory_integral(g, s, m, upper, &opts)?
        }
        (Trajectory::UniformlyAccelerated { accel }, Spacetime::OnePlusOneMassless) => {
            let amp = |w: f64| {
                if w <= 0.0 {
                    return 0.0;
                }
                let n2 = match spec.normalisation {
                    NormConvention::Standard => 1.0 / (4.0 * PI * w),
                    NormConvention::Unit => 1.0,
                };
                ir_regulator(w, spec.ir_regulator) * n2 * win2(w) / (2.0 * PI)
            };
            let emit = |w: f64| {
                let (ch, _) = thermal_weights(w, accel);
                Complex64::new(amp(w) * ch * ch, 0.0)
            };
            let absorb = |w: f64| {
                let (_, sh) = thermal_weights(w, accel);
                Complex64::new(amp(w) * sh * sh, 0.0)
            };
            let a = oscillatory_integral(emit, s, 0.0, upper, &opts)?;
            let b = oscillatory_integral(absorb, -s, 0.0, upper, &opts)?;
            QuadratureResult {
                value: a.value + b.value,
                est_error: a.est_error + b.est_error,
                evaluations: a.evaluations + b.evaluations,
                converged: a.converged && b.converged,
            }
        }
        (Trajectory::UniformlyAccelerated { .. }, Spacetime::ThreePlusOne { .. }) => {
            return Err(Error::Unsupported("numeric Wightman function of the accelerated 3+1 field".into()))
        }
    };
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(r)
}

/// Smallest t (on a doubling ladder from `start`) past which `envelope`
/// stays below `threshold` on [t, 1.5t].
fn decay_extent<F: Fn(f64) -> Result<f64>>(envelope: F, threshold: f64, start: f64, cap: f64) -> Result<(f64, bool)> {
    let mut t = start;
    while t <= cap {
        let mut worst = 0.0f64;
        for j in 0..6 {
            worst = worst.max(envelope(t * (1.0 + 0.1 * j as f64))?);
        }
        if worst <= threshold {
            return Ok((t * 1.5, true));
        }
        t *= 2.0;
    }
    Ok((cap, false))
}

/// Vacuum rate from the Wightman function: 2 Re ∫_0^∞ e^{-iΔs} W(s) ds.
pub fn vacuum_rate_numeric(spec: &ModelSpec, delta: f64, opts: &RateOptions) -> Result<RateResult> {
    check_vacuum(spec)?;
    opts.validate()?;
    if spec.profile.is_point_like() {
        return Err(Error::DistributionalProfile);
    }
    if let Some(accel) = spec.accel() {
        if (delta / accel).abs() < IR_CUTOFF {
            return Err(Error::InfraredDivergence { delta, cutoff: IR_CUTOFF });
        }
    }
    let inner_tol = opts.quad_tol * 1e-3;
    let window = spec.window(inner_tol)?;
    let upper = spectral_cutoff(&window, inner_tol)?;
    let w_at = |s: f64| wightman_at(spec, &window, upper, s, inner_tol);
    let (horizon, settled) = decay_extent(|s| Ok(w_at(s)?.value.norm()), opts.tail_tol, 4.0, opts.max_horizon)?;

    let failure = Cell::new(None);
    let g = |s: f64| match w_at(s) {
        Ok(r) => r.value,
        Err(e) => {
            failure.set(Some(e));
            Complex64::new(0.0, 0.0)
        }
    };
    let h = HalflineOptions::new(0.5 * opts.quad_tol, opts.tail_tol, horizon);
    let r = oscillatory_halfline(g, delta, &h)?;
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let est_error = 2.0 * r.est_error + 2.0 * inner_tol * horizon;
    Ok(RateResult { rate: 2.0 * r.value.re, path: RatePath::Numeric, est_error, tau: None, converged: r.converged && settled })
}

/// Packet overlap I(τ): Minkowski ∫ Φ f̃ ω^{-1/2} e^{-iωτ} dω, or the Unruh
/// analogue with N cosh r e^{-iΩτ} (R) or N sinh r e^{+iΩτ} (L).
pub fn packet_overlap(spec: &ModelSpec, tau: f64, tol: f64) -> Result<QuadratureResult> {
    spec.validate()?;
    let window = spec.window(tol)?;
    overlap_with(spec, &window, tau, tol)
}

fn overlap_with(spec: &ModelSpec, window: &FrequencyWindow, tau: f64, tol: f64) -> Result<QuadratureResult> {
    let failure = Cell::new(None);
    let win = |w: f64| match window.evaluate(w) {
        Ok(v) => v,
        Err(e) => {
            failure.set(Some(e));
            Complex64::new(0.0, 0.0)
        }
    };
    let opts = QuadOptions::new(tol);
    let r = match spec.state {
        FieldState::Vacuum => return Err(Error::Inconsistent("packet overlap needs a particle state".into())),
        FieldState::MinkowskiParticle(packet) => {
            let (lo, hi) = packet.support();
            let g = |w: f64| if w > 0.0 { win(w) * (packet.amplitude(w) / w.sqrt()) } else { Complex64::new(0.0, 0.0) };
            oscillatory_integral(g, tau, lo, hi, &opts)?
        }
        FieldState::UnruhParticle { packet, wedge } => {
            let accel = spec.accel().ok_or_else(|| Error::Inconsistent("Unruh particle without acceleration".into()))?;
            let (lo, hi) = packet.support();
            let lo = lo.max(accel * IR_CUTOFF);
            let g = |w: f64| {
                let n = match spec.norm(w, accel) {
                    Ok(n) => n,
                    Err(_) => return Complex64::new(0.0, 0.0),
                };
                let (ch, sh) = thermal_weights(w, accel);
                let weight = match wedge {
                    Wedge::R => ch,
                    Wedge::L => sh,
                };
                win(w) * (packet.amplitude(w) * n * weight)
            };
            let omega = match wedge {
                Wedge::R => tau,
                Wedge::L => -tau,
            };
            oscillatory_integral(g, omega, lo, hi, &opts)?
        }
    };
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(r)
}

/// State-dependent part of the rate, with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleCorrection {
    pub value: f64,
    pub est_error: f64,
    /// Largest imaginary part seen in the particle Wightman kernel, which
    /// must be real.
    pub imag_residue: f64,
    pub converged: bool,
}

struct ParticleSetup {
    window: FrequencyWindow,
    inner_tol: f64,
    horizon_extent: f64,
    settled: bool,
}

fn particle_setup(spec: &ModelSpec, opts: &RateOptions) -> Result<ParticleSetup> {
    spec.validate()?;
    opts.validate()?;
    if spec.state == FieldState::Vacuum {
        return Err(Error::Inconsistent("particle rate requested for the vacuum".into()));
    }
    let inner_tol = opts.quad_tol * 1e-3;
    let window = spec.window(inner_tol)?;
    let peak = overlap_with(spec, &window, 0.0, inner_tol)?.value.norm();
    let threshold = opts.tail_tol.max(1e-12 * peak);
    // I(τ − s) is centred at s = τ; its extent on the far side sets the horizon.
    let (extent, settled) = decay_extent(|t| Ok(overlap_with(spec, &window, -t, inner_tol)?.value.norm()), threshold, 1.0, opts.max_horizon)?;
    Ok(ParticleSetup { window, inner_tol, horizon_extent: extent, settled })
}

/// ι_τ(Δ) = ∫_0^∞ e^{-isΔ} I(τ−s) ds.
pub fn iota(spec: &ModelSpec, tau: f64, delta: f64, opts: &RateOptions) -> Result<QuadratureResult> {
    half_line_overlap(spec, tau, delta, opts, false)
}

/// κ_τ(Δ) = ∫_0^∞ e^{-isΔ} I*(τ−s) ds.
pub fn kappa(spec: &ModelSpec, tau: f64, delta: f64, opts: &RateOptions) -> Result<QuadratureResult> {
    half_line_overlap(spec, tau, delta, opts, true)
}

fn half_line_overlap(spec: &ModelSpec, tau: f64, delta: f64, opts: &RateOptions, conjugate: bool) -> Result<QuadratureResult> {
    let setup = particle_setup(spec, opts)?;
    let failure = Cell::new(None);
    let g = |s: f64| match overlap_with(spec, &setup.window, tau - s, setup.inner_tol) {
        Ok(r) if conjugate => r.value.conj(),
        Ok(r) => r.value,
        Err(e) => {
            failure.set(Some(e));
            Complex64::new(0.0, 0.0)
        }
    };
    let horizon = auto_horizon(tau, setup.horizon_extent);
    let r = oscillatory_halfline(g, delta, &HalflineOptions::new(opts.quad_tol, opts.tail_tol, horizon))?;
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(r)
}

/// (1/π) Re[I*(τ) ι_τ(Δ) + I(τ) κ_τ(Δ)], integrated as one real kernel.
pub fn particle_correction(spec: &ModelSpec, tau: f64, delta: f64, opts: &RateOptions) -> Result<ParticleCorrection> {
    ensure(tau.is_finite() && delta.is_finite(), || "time and gap must be finite".into())?;
    let setup = particle_setup(spec, opts)?;
    let i_tau = overlap_with(spec, &setup.window, tau, setup.inner_tol)?.value;
    let residue = Cell::new(0.0f64);
    let failure = Cell::new(None);
    let kernel = |s: f64| match overlap_with(spec, &setup.window, tau - s, setup.inner_tol) {
        Ok(r) => {
            let k = i_tau.conj() * r.value + i_tau * r.value.conj();
            residue.set(residue.get().max(k.im.abs()));
            Complex64::new(k.re, 0.0)
        }
        Err(e) => {
            failure.set(Some(e));
            Complex64::new(0.0, 0.0)
        }
    };
    let horizon = auto_horizon(tau, setup.horizon_extent);
    let tail_tol = opts.tail_tol * i_tau.norm().max(1e-300);
    let r = oscillatory_halfline(kernel, delta, &HalflineOptions::new(opts.quad_tol, tail_tol.max(1e-300), horizon))?;
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(ParticleCorrection {
        value: r.value.re / PI,
        est_error: r.est_error / PI,
        imag_residue: residue.get(),
        converged: r.converged && setup.settled,
    })
}

/// Vacuum rate plus the particle correction at proper time τ.
pub fn particle_rate(spec: &ModelSpec, tau: f64, delta: f64, opts: &RateOptions) -> Result<RateResult> {
    let vacuum_spec = spec.with_state(FieldState::Vacuum)?;
    let vacuum = vacuum_closed_form(&vacuum_spec, delta, opts.quad_tol)?;
    let c = particle_correction(spec, tau, delta, opts)?;
    Ok(RateResult {
        rate: vacuum.rate + c.value,
        path: RatePath::Numeric,
        est_error: vacuum.est_error + c.est_error,
        tau: Some(tau),
        converged: c.converged,
    })
}
