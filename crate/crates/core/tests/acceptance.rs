//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

use std::f64::consts::PI;
use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use udw::detector::{
    packet_overlap, particle_correction, particle_rate, vacuum_rate_accelerated, vacuum_rate_inertial, vacuum_rate_numeric, FieldState,
    GaussianPacket, ModelSpec, RateOptions, Spacetime, Trajectory, Wedge,
};
use udw::io::{figure_preset, parse_table_csv, run_sweep};
use udw::profiles::{hermite_fit_report, minkowski_window, rindler_window_1p1, rindler_window_1p1_quadrature, SpatialProfile};
use udw::specfun::bessel_k_imag;

/// Written past the test harness capture so the line shows for passing tests too.
fn report(id: u32, pass: bool, detail: &str) {
    let line = format!("criterion {id:>2}: {} | {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

#[test]
fn criterion_01_window_reproduction() {
    let t0 = Instant::now();
    let cfg = figure_preset("fig1").unwrap();
    let table = run_sweep(&cfg, None).unwrap();
    let elapsed = t0.elapsed();
    let (sigma, lambda) = (1.0f64, 5.0f64);
    let exact = |k: f64| (-(k - lambda).powi(2) * sigma * sigma / 2.0).exp() + (-(k + lambda).powi(2) * sigma * sigma / 2.0).exp();
    let max_err = table.rows.iter().map(|r| (r.rate - exact(r.axis)).abs()).fold(0.0, f64::max);
    let argmax = |pos: bool| {
        table.rows.iter().filter(|r| (r.axis > 0.0) == pos).max_by(|a, b| a.rate.total_cmp(&b.rate)).map(|r| r.axis).unwrap()
    };
    let h = 20.0 / 2000.0;
    let (kp, km) = (argmax(true), argmax(false));
    let pass = table.rows.len() == 2001 && max_err <= 1e-12 && (kp - 5.0).abs() <= h && (km + 5.0).abs() <= h && secs(elapsed) < 1.0;
    report(1, pass, &format!("points {} max|err| {max_err:.2e} peaks ({km}, {kp}) time {:.3}s", table.rows.len(), secs(elapsed)));
    assert!(pass);
}

/// Best residual of a 0.05-step (λ, σ) grid search over λ ∈ [0, 8], σ ∈ [0.05, 4],
/// from an independent brute-force run (4001 samples on [−8, 8]).
const GRID_RESIDUAL_01: f64 = 0.006356;
const GRID_RESIDUAL_03: f64 = 0.068362;

#[test]
fn criterion_02_hermite_fits() {
    let t0 = Instant::now();
    let cases = [((0usize, 1usize), (1.66, 1.0 / 0.89f64.sqrt()), GRID_RESIDUAL_01), ((0, 3), (2.5, 1.0), GRID_RESIDUAL_03)];
    let mut pass = true;
    let mut detail = Vec::new();
    for ((n, m), (lr, sr), threshold) in cases {
        let fit = hermite_fit_report(n, m).unwrap();
        let ok = (fit.lambda - lr).abs() <= 0.05 && (fit.sigma - sr).abs() <= 0.05 && fit.residual < threshold;
        pass &= ok;
        detail.push(format!(
            "({n},{m}) λ {:.4} (ref {lr:.3}) σ {:.4} (ref {sr:.3}) residual {:.6} < {threshold} {}",
            fit.lambda,
            fit.sigma,
            fit.residual,
            if ok { "ok" } else { "miss" }
        ));
    }
    let elapsed = t0.elapsed();
    pass &= secs(elapsed) < 30.0;
    report(2, pass, &format!("{}; time {:.2}s", detail.join("; "), secs(elapsed)));
    assert!(pass);
}

#[test]
fn criterion_03_point_like_inertial() {
    let cfg = figure_preset("fig4").unwrap();
    let table = run_sweep(&cfg, None).unwrap();
    let mut pass = true;
    let mut checked = 0;
    for (label, m) in [("m=0", 0.0f64), ("m=1", 1.0), ("m=1.5", 1.5)] {
        for r in table.rows.iter().filter(|r| r.series == label) {
            let d = r.axis;
            let expected = if -d - m >= 0.0 { (d * d - m * m).max(0.0).sqrt() } else { 0.0 };
            pass &= r.rate == expected;
            if -d < m {
                pass &= r.rate == 0.0;
            }
            if m == 0.0 {
                pass &= r.rate == if d <= 0.0 { d.abs() } else { 0.0 };
            }
            checked += 1;
        }
    }
    report(3, pass, &format!("{checked} points compared exactly"));
    assert!(pass);
}

#[test]
fn criterion_04_gaussian_inertial_shape() {
    let (sigma, lambda) = (1.0f64, 5.0f64);
    let threshold = lambda + 6.0 / sigma * sigma * sigma;
    let profile = SpatialProfile::double_gaussian(sigma, lambda).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for m in [0.0, 1.0, 1.5] {
        let spec = ModelSpec::new(Spacetime::ThreePlusOne { mass: m }, Trajectory::Inertial, profile).unwrap();
        let grid: Vec<f64> = (0..=4000).map(|i| -20.0 + 0.005 * i as f64).collect();
        let rates: Vec<(f64, f64)> = grid.iter().map(|&d| (d, vacuum_rate_inertial(&spec, d).unwrap().rate)).collect();
        let max = rates.iter().map(|r| r.1).fold(0.0, f64::max);
        let beyond = rates.iter().filter(|r| -r.0 > threshold).map(|r| r.1).fold(0.0, f64::max);
        let near = vacuum_rate_inertial(&spec, -lambda).unwrap().rate;
        let ok = beyond <= 1e-6 * max && near > 0.1 * max;
        pass &= ok;
        detail.push(format!("m={m}: tail/max {:.1e}, rate(−λ)/max {:.3}", beyond / max, near / max));
    }
    report(4, pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_05_kms() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    let mut pass = true;
    for a in [0.1, 1.0, 1.5] {
        for profile in [SpatialProfile::PointLike, SpatialProfile::rindler_double_gaussian(1.0, 5.0, a).unwrap()] {
            let spec = ModelSpec::new(Spacetime::OnePlusOneMassless, Trajectory::UniformlyAccelerated { accel: a }, profile).unwrap();
            for d in [0.25, 0.5, 1.0, 2.0, 4.0] {
                let up = vacuum_rate_accelerated(&spec, d).unwrap().rate;
                let down = vacuum_rate_accelerated(&spec, -d).unwrap().rate;
                let rel = (up / down / (-2.0 * PI * d / a).exp() - 1.0).abs();
                pass &= rel <= 1e-9 && up > 0.0 && down > 0.0;
                worst = worst.max(rel);
            }
        }
    }
    let elapsed = t0.elapsed();
    pass &= secs(elapsed) < 5.0;
    report(5, pass, &format!("30 pairs, worst relative error {worst:.2e}, time {:.3}s", secs(elapsed)));
    assert!(pass);
}

#[test]
fn criterion_06_numeric_matches_closed_form() {
    let t0 = Instant::now();
    let spec = ModelSpec::new(Spacetime::OnePlusOneMassless, Trajectory::Inertial, SpatialProfile::double_gaussian(1.0, 5.0).unwrap()).unwrap();
    let mut worst = 0.0f64;
    let mut pass = true;
    for d in [-6.0, -5.0, -4.0] {
        let closed = vacuum_rate_inertial(&spec, d).unwrap().rate;
        let numeric = vacuum_rate_numeric(&spec, d, &RateOptions::default()).unwrap();
        let rel = ((numeric.rate - closed) / closed).abs();
        worst = worst.max(rel);
        pass &= rel <= 1e-4 && numeric.converged;
    }
    let elapsed = t0.elapsed();
    pass &= secs(elapsed) < 60.0;
    report(6, pass, &format!("worst relative deviation {worst:.2e}, time {:.2}s", secs(elapsed)));
    assert!(pass);
}

/// ∫_0^∞ e^{−x cosh t} cos(νt) dt by the trapezoid rule on a fine uniform grid.
fn dense_trapezoid_k(nu: f64, x: f64) -> f64 {
    let h = 1e-3;
    let upper = (60.0 / x).acosh();
    let n = (upper / h).ceil() as usize;
    let mut sum = 0.5 * (-x).exp();
    for i in 1..=n {
        let t = i as f64 * h;
        sum += (-x * t.cosh()).exp() * (nu * t).cos();
    }
    sum * h
}

#[test]
fn criterion_07_bessel_accuracy() {
    let mut worst = 0.0f64;
    let mut pass = true;
    for nu in [0.0, 0.5, 1.0, 2.0, 5.0] {
        for x in [0.1, 1.0, 5.0, 10.0] {
            let oracle = dense_trapezoid_k(nu, x);
            let got = bessel_k_imag(nu, x, 1e-13).unwrap().value;
            let rel = ((got - oracle) / oracle).abs();
            worst = worst.max(rel);
            pass &= rel <= 1e-10;
        }
    }
    let k0 = bessel_k_imag(0.0, 1.0, 1e-13).unwrap().value;
    pass &= (k0 - 0.4210244382).abs() <= 1e-9;
    report(7, pass, &format!("20 grid points, worst relative error {worst:.2e}; K_i0(1) = {k0:.12}"));
    assert!(pass);
}

#[test]
fn criterion_08_metric_cancellation() {
    let mut worst = 0.0f64;
    for a in [0.1, 1.0, 1.5] {
        let p = SpatialProfile::rindler_double_gaussian(1.0, 5.0, a).unwrap();
        for i in 0..=40 {
            let omega = 0.25 * i as f64;
            let closed = rindler_window_1p1(&p, omega, a, 1e-12).unwrap();
            let quad = rindler_window_1p1_quadrature(&p, omega, a, 1e-12).unwrap();
            worst = worst.max((closed - quad).norm());
        }
    }
    let a = 1e-4;
    let rdg = SpatialProfile::rindler_double_gaussian(1.0, 5.0, a).unwrap();
    let dg = SpatialProfile::double_gaussian(1.0, 5.0).unwrap();
    let sup = (0..=400)
        .map(|i| {
            let w = 0.05 * i as f64 - 10.0;
            let mink = minkowski_window(&dg, w, 1e-12).unwrap();
            let closed = (rindler_window_1p1(&rdg, w, a, 1e-12).unwrap() - mink).norm();
            let quad = (rindler_window_1p1_quadrature(&rdg, w.abs(), a, 1e-12).unwrap() - minkowski_window(&dg, w.abs(), 1e-12).unwrap()).norm();
            closed.max(quad)
        })
        .fold(0.0, f64::max);
    let pass = worst <= 1e-8 && sup < 1e-6;
    report(8, pass, &format!("quadrature vs closed form {worst:.2e}; a=1e-4 sup distance to Minkowski {sup:.2e}"));
    assert!(pass);
}

fn unruh_packet_model(a: f64) -> ModelSpec {
    let rdg = SpatialProfile::rindler_double_gaussian(1.0, 5.0, a).unwrap();
    ModelSpec::new(Spacetime::OnePlusOneMassless, Trajectory::UniformlyAccelerated { accel: a }, rdg)
        .unwrap()
        .with_state(FieldState::UnruhParticle { packet: GaussianPacket::new(5.0, 0.5).unwrap(), wedge: Wedge::R })
        .unwrap()
}

#[test]
fn criterion_09_riemann_lebesgue() {
    let mut pass = true;
    let mut detail = Vec::new();
    let minkowski = ModelSpec::new(Spacetime::OnePlusOneMassless, Trajectory::Inertial, SpatialProfile::double_gaussian(1.0, 5.0).unwrap())
        .unwrap()
        .with_state(FieldState::MinkowskiParticle(GaussianPacket::new(5.0, 0.5).unwrap()))
        .unwrap();
    for (name, spec) in [("minkowski", minkowski), ("unruh", unruh_packet_model(1.0))] {
        let peak = (-200..=200).map(|i| packet_overlap(&spec, 0.05 * i as f64, 1e-12).unwrap().value.norm()).fold(0.0, f64::max);
        let edge = [-50.0, 50.0].map(|t| packet_overlap(&spec, t, 1e-12).unwrap().value.norm());
        let ratio = edge[0].max(edge[1]) / peak;
        pass &= ratio < 1e-3;

        let vacuum_spec = spec.with_state(FieldState::Vacuum).unwrap();
        let delta = -5.0;
        let vac = udw::detector::vacuum_rate(&vacuum_spec, delta, &RateOptions::default()).unwrap().rate;
        let edges = [-50.0, 50.0].map(|t| particle_rate(&spec, t, delta, &RateOptions::default()).unwrap().rate);
        let dev = edges.iter().map(|r| ((r - vac) / vac).abs()).fold(0.0, f64::max);
        pass &= dev < 1e-3;
        detail.push(format!("{name}: |I(±50)|/max {ratio:.1e}, edge rate deviation {dev:.1e}"));
    }
    report(9, pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_10_high_acceleration_suppression() {
    let opts = RateOptions::default();
    let max_correction = |a: f64| {
        let spec = unruh_packet_model(a);
        (-40..=40).map(|i| particle_correction(&spec, 0.25 * i as f64, -5.0, &opts).unwrap().value.abs()).fold(0.0, f64::max)
    };
    let low = max_correction(1.0);
    let high = max_correction(20.0);
    let ratio = high / low;
    let pass = ratio < 0.05;
    report(10, pass, &format!("max |correction| a=1: {low:.4e}, a=20: {high:.4e}, ratio {ratio:.3} (need < 0.05)"));
    assert!(pass);
}

fn udw(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_udw")).args(args).env_remove("UDW_WORKERS").output().unwrap();
    (out.status.code().unwrap_or(-1), out.stdout)
}

#[test]
fn criterion_11_cli_contract() {
    let dir = tempfile::tempdir().unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    let runs: [&[&str]; 6] = [
        &["window", "--preset", "fig1"],
        &["rate", "--preset", "fig4"],
        &["particle-rate", "--preset", "minkowski-packet"],
        &["kms-check", "--preset", "fig7"],
        &["fit-hermite", "--preset", "fig3"],
        &["figure", "fig6"],
    ];
    for args in runs {
        let (code, stdout) = udw(args);
        pass &= code == 0 && !stdout.is_empty();
        detail.push(format!("{} -> {code}", args[0]));
    }

    let out = dir.path().join("fig5.csv");
    let out_s = out.to_str().unwrap();
    let (c1, _) = udw(&["figure", "fig5", "--out", out_s, "--workers", "4"]);
    let first = std::fs::read(&out).unwrap();
    let (c2, _) = udw(&["figure", "fig5", "--out", out_s, "--workers", "1"]);
    let second = std::fs::read(&out).unwrap();
    let identical = c1 == 0 && c2 == 0 && first == second;

    let reparsed = parse_table_csv(&first).unwrap();
    let direct = run_sweep(&figure_preset("fig5").unwrap(), None).unwrap();
    let round_trip = reparsed.rows == direct.rows;
    pass &= identical && round_trip;
    report(11, pass, &format!("{}; byte-identical {identical}; CSV round-trip {round_trip}", detail.join(", ")));
    assert!(pass);
}
