//! Acceptance criteria. Each prints one PASS/FAIL line; the test fails at the
//! end if any criterion failed.

use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cvbell::bell::{bell_s, paper_angle_s, sweep_r0, AngleMode, SweepSettings};
use cvbell::fock::circle_state_coeffs;
use cvbell::homodyne::{convergence_report, outcome_gram, site_distribution_from_gram, BlockSolver, LocalOscillator};
use cvbell::lhv::{
    husimi_density, lhv_noisy_s_exact, macroscopic_limit_check, random_angles, sample_hidden_variables,
    NoisyJointDensity,
};
use cvbell::quadrature::{
    density_grid, joint_density, joint_sign_prob, marginal_positive_prob, quadrant_probability_by_integration,
    slope_sign_changes, GridSpec, Outcome, SignProfile, SignStatistics,
};
use cvbell::sampling::sample_sign_probability;
use cvbell::{BellAngles, CircleStateCoeffs, Execution};

const EXEC: Execution = Execution::Parallel;

fn state(r0: f64) -> CircleStateCoeffs {
    circle_state_coeffs(r0, 1e-12).unwrap()
}

struct Outcomes {
    failed: Vec<usize>,
}

impl Outcomes {
    fn record(&mut self, id: usize, pass: bool, detail: String, elapsed: Duration) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {id}: {detail} [{:.2} s]", elapsed.as_secs_f64());
        if !pass {
            self.failed.push(id);
        }
    }
}

/// `⟨x|α⟩` for `X = a + a†`.
fn coherent_wavefunction(alpha: Complex64, x: f64) -> Complex64 {
    let peak = (TAU).powf(-0.25);
    (Complex64::new(-x * x / 4.0, 0.0) + alpha * x - alpha * alpha / 2.0 - alpha.norm_sqr() / 2.0).exp() * peak
}

/// Joint density at separate angles from the phase-integral form of the
/// state, `∝ |∫ ⟨x|r0 e^{i(ς-θ)}⟩ ⟨y|r0 e^{-i(ς+φ)}⟩ dς|²`.
fn phase_integral_density(r0: f64, theta: f64, phi: f64, x: f64, y: f64) -> f64 {
    let n = 256;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let s = TAU * k as f64 / n as f64;
        let a = Complex64::from_polar(r0, s - theta);
        let b = Complex64::from_polar(r0, -s - phi);
        acc += coherent_wavefunction(a, x) * coherent_wavefunction(b, y);
    }
    acc /= n as f64;
    // (1/2π)∫dς |r0e^{iς}⟩|r0e^{-iς}⟩ has norm² e^{-2r0²} I0(2r0²).
    let norm2 = (-2.0 * r0 * r0).exp() * state(r0).normalizer();
    acc.norm_sqr() / norm2
}

fn criterion_1(out: &mut Outcomes) {
    let t = Instant::now();
    let s = paper_angle_s(&state(1.1)).s;
    let el = t.elapsed();
    let pass = (s - 1.0157).abs() <= 0.002 && el < Duration::from_secs(1);
    out.record(1, pass, format!("S(1.1) at paper angles = {s:.6} (target 1.0157 ± 0.002)"), el);
}

fn criterion_2(out: &mut Outcomes) {
    let t = Instant::now();
    let settings = SweepSettings::new(0.01, 2.0, 0.01, AngleMode::Paper);
    let report = sweep_r0(&settings, EXEC).unwrap();
    let el = t.elapsed();
    let points = report.points.len();
    let pass = match report.windows.as_slice() {
        [w] => {
            !w.lower_open
                && !w.upper_open
                && (w.lower - 0.96).abs() <= 0.03
                && (w.upper - 1.41).abs() <= 0.03
                && points == 200
                && el < Duration::from_secs(10)
        }
        _ => false,
    };
    let detail = format!(
        "{points}-point sweep, violation windows {:?}",
        report.windows.iter().map(|w| (w.lower, w.upper)).collect::<Vec<_>>()
    );
    out.record(2, pass, detail, el);
}

fn criterion_3(out: &mut Outcomes) {
    let t = Instant::now();
    let s0 = paper_angle_s(&state(0.0)).s;
    let s0_any = bell_s(&state(0.0), &BellAngles::new(0.4, 1.3, -2.2, 0.9)).s;
    let s_paper = paper_angle_s(&state(2.5)).s;
    let opt = macroscopic_limit_check(2.5, 48, EXEC).unwrap();
    let el = t.elapsed();
    let pass = (s0 - 0.5).abs() <= 1e-12 && (s0_any - 0.5).abs() <= 1e-12 && s_paper <= 1.0 && opt.result.s <= 1.0;
    let detail = format!(
        "S(0) = {s0}, S(2.5) paper = {s_paper:.9}, S(2.5) optimized = {:.9}",
        opt.result.s
    );
    out.record(3, pass, detail, el);
}

fn criterion_4(out: &mut Outcomes) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_marginal: f64 = 0.0;
    for _ in 0..20 {
        let r0 = rng.random::<f64>() * 3.0;
        let (theta, phi) = (rng.random::<f64>() * TAU - PI, rng.random::<f64>() * TAU - PI);
        let c = state(r0);
        // P+(θ) summed out of the joint distribution at a random partner angle.
        let chi = theta + phi;
        let pa = joint_sign_prob(&c, chi, Outcome::Plus, Outcome::Plus) + joint_sign_prob(&c, chi, Outcome::Plus, Outcome::Minus);
        let pb = joint_sign_prob(&c, chi, Outcome::Plus, Outcome::Plus) + joint_sign_prob(&c, chi, Outcome::Minus, Outcome::Plus);
        for p in [pa, pb, marginal_positive_prob(&c)] {
            worst_marginal = worst_marginal.max((p - 0.5).abs());
        }
    }
    let (mut worst_even, mut worst_sum, mut worst_oracle): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..100 {
        let r0 = 0.2 + rng.random::<f64>() * 2.3;
        let c = state(r0);
        let profile = SignProfile::ideal(&c);
        let (theta, phi, shift) = (
            rng.random::<f64>() * TAU - PI,
            rng.random::<f64>() * TAU - PI,
            rng.random::<f64>() * TAU - PI,
        );
        let chi = theta + phi;
        worst_even = worst_even.max((profile.joint_plus(chi) - profile.joint_plus(-chi)).abs());
        let (x, y) = (rng.random::<f64>() * 6.0 - 3.0, rng.random::<f64>() * 6.0 - 3.0);
        let d1 = phase_integral_density(r0, theta, phi, x, y);
        let d2 = phase_integral_density(r0, theta + shift, phi - shift, x, y);
        let converged = CircleStateCoeffs::with_cutoff(r0, 2 * c.cutoff() + 1).unwrap();
        let series = joint_density(&converged, chi, x, y);
        worst_sum = worst_sum.max((d1 - d2).abs());
        worst_oracle = worst_oracle.max((d1 - series).abs());
    }
    let el = t.elapsed();
    let pass = worst_marginal <= 1e-12 && worst_even <= 1e-9 && worst_sum <= 1e-9 && worst_oracle <= 1e-9;
    let detail = format!(
        "max |P+ - 1/2| = {worst_marginal:.1e}, max |P++(χ) - P++(-χ)| = {worst_even:.1e}, \
         max density change at fixed θ+φ = {worst_sum:.1e} (series vs phase integral {worst_oracle:.1e})"
    );
    out.record(4, pass, detail, el);
}

fn criterion_5(out: &mut Outcomes) {
    let t = Instant::now();
    let points = [
        (0.5, 0.3),
        (0.5, 2.0),
        (0.9, FRAC_PI_4),
        (1.1, FRAC_PI_4),
        (1.1, 3.0 * FRAC_PI_4),
        (1.4, 1.0),
        (1.6, 0.0),
        (2.0, 2.6),
        (2.5, 0.4),
        (3.0, PI),
    ];
    let (mut worst_int, mut worst_z): (f64, f64) = (0.0, 0.0);
    for (i, &(r0, chi)) in points.iter().enumerate() {
        let c = state(r0);
        let series = joint_sign_prob(&c, chi, Outcome::Plus, Outcome::Plus);
        let integral = quadrant_probability_by_integration(&c, chi, Outcome::Plus, Outcome::Plus, EXEC);
        let mc = sample_sign_probability(&c, chi, Outcome::Plus, Outcome::Plus, 1_000_000, 500 + i as u64, EXEC).unwrap();
        worst_int = worst_int.max((series - integral).abs());
        worst_z = worst_z.max(mc.z_score(series).abs());
    }
    let el = t.elapsed();
    let pass = worst_int <= 1e-6 && worst_z <= 3.0;
    let detail = format!("10 points: max |series - integral| = {worst_int:.1e}, max MC |z| = {worst_z:.2} (10^6 samples each)");
    out.record(5, pass, detail, el);
}

fn criterion_6(out: &mut Outcomes) {
    let t = Instant::now();
    let angles = random_angles(1000, 6);
    let mut worst = f64::NEG_INFINITY;
    for r0 in [0.5, 1.1, 2.0] {
        let c = state(r0);
        for a in &angles {
            worst = worst.max(lhv_noisy_s_exact(&c, a).s);
        }
        worst = worst.max(lhv_noisy_s_exact(&c, &BellAngles::PAPER).s);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut negative = 0usize;
    let mut evaluated = 0usize;
    for r0 in [0.5, 1.1, 2.5] {
        let c = state(r0);
        let half = 2.0 + r0;
        let mut draw = || Complex64::new(rng.random::<f64>() * 2.0 * half - half, rng.random::<f64>() * 2.0 * half - half);
        for _ in 0..1_000_000 {
            let q = husimi_density(&c, draw(), draw());
            evaluated += 1;
            if !(q >= 0.0) {
                negative += 1;
            }
        }
    }
    let el = t.elapsed();
    let pass = worst <= 1.0 + 1e-9 && negative == 0 && el < Duration::from_secs(300);
    let detail = format!(
        "max exact LHV S over 3 × 1001 angle sets = {worst:.9}; Husimi negative or NaN at {negative} of {evaluated} points"
    );
    out.record(6, pass, detail, el);
}

fn criterion_7(out: &mut Outcomes) {
    let t = Instant::now();
    let c = state(1.1);
    let (theta, phi) = (0.0, -FRAC_PI_4);
    let n: u64 = 1_000_000;
    let width = 0.5;
    let edges: Vec<f64> = (0..=21).map(|i| -5.25 + width * i as f64).collect();
    let exact = NoisyJointDensity::new(&c, theta, phi).unwrap().cell_probabilities(&edges, &edges, EXEC);
    let samples = sample_hidden_variables(&c, n, 7, EXEC).unwrap();
    let mut counts = vec![0u64; 441];
    let cell = |v: f64| {
        let k = ((v - edges[0]) / width).floor();
        (0.0..21.0).contains(&k).then_some(k as usize)
    };
    for s in &samples {
        let x = 2.0 * (s.alpha * Complex64::from_polar(1.0, -theta)).re;
        let y = 2.0 * (s.beta * Complex64::from_polar(1.0, -phi)).re;
        if let (Some(i), Some(j)) = (cell(x), cell(y)) {
            counts[i * 21 + j] += 1;
        }
    }
    let nf = n as f64;
    let mut exceed = 0;
    let mut worst: f64 = 0.0;
    let mut min_expected = f64::INFINITY;
    // Pearson statistic over cells expecting at least 5, plus the remainder.
    let (mut chi2, mut dof, mut rest_obs, mut rest_exp) = (0.0, 0usize, nf, nf);
    for (k, &p) in exact.iter().enumerate() {
        if nf * p >= 5.0 {
            chi2 += (counts[k] as f64 - nf * p).powi(2) / (nf * p);
            dof += 1;
            rest_obs -= counts[k] as f64;
            rest_exp -= nf * p;
        }
    }
    if rest_exp >= 5.0 {
        chi2 += (rest_obs - rest_exp).powi(2) / rest_exp;
        dof += 1;
    }
    dof -= 1;
    for (k, &p) in exact.iter().enumerate() {
        let se = (nf * p * (1.0 - p)).sqrt();
        let z = (counts[k] as f64 - nf * p) / se;
        worst = worst.max(z.abs());
        min_expected = min_expected.min(nf * p);
        if z.abs() > 3.0 {
            exceed += 1;
        }
    }
    let el = t.elapsed();
    let pass = exceed == 0;
    let detail = format!(
        "21×21 cells, 10^6 Husimi samples (seed 7): {exceed} cells beyond 3 SE, max |z| = {worst:.2}, min expected count {min_expected:.0}; \
         Pearson χ² = {chi2:.1} on {dof} dof (normal score {:.2})",
        (chi2 - dof as f64) / (2.0 * dof as f64).sqrt()
    );
    out.record(7, pass, detail, el);
}

fn criterion_8(out: &mut Outcomes) {
    let t = Instant::now();
    let c = state(1.1);
    let report = convergence_report(&c, &BellAngles::PAPER, &[2.0, 5.0, 10.0, 20.0], BlockSolver::Analytic, EXEC).unwrap();
    let errors: Vec<f64> = report.iter().map(|p| p.error).collect();
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    let lo = LocalOscillator::new(10.0).unwrap();
    let gram = outcome_gram(c.cutoff(), &lo, BlockSolver::Analytic, EXEC).unwrap();
    let ks = site_distribution_from_gram(&c, &gram).ks_against_quadrature(&c, 10.0).unwrap();
    let el = t.elapsed();
    let pass = decreasing && errors[3] < 0.01 && ks.smoothed < 0.02 && el < Duration::from_secs(120);
    let detail = format!(
        "|S_E - S_ideal| at E = 2, 5, 10, 20: {:.2e}, {:.2e}, {:.2e}, {:.2e}; KS at E = 10: {:.2e} (lattice {:.2e})",
        errors[0], errors[1], errors[2], errors[3], ks.smoothed, ks.lattice
    );
    out.record(8, pass, detail, el);
}

fn criterion_9(out: &mut Outcomes) {
    let t = Instant::now();
    let r0 = 2.5;
    let grid = GridSpec::default();
    let g = density_grid(&state(r0), 0.0, &grid, &grid, EXEC);
    let maxima = g.local_maxima();
    let target = 2.0 * r0;
    let near = |x: f64, y: f64| {
        [(target, target), (-target, -target), (target, -target), (-target, target)]
            .iter()
            .any(|&(a, b)| (x - a).abs() <= 0.5 && (y - b).abs() <= 0.5)
    };
    let located = maxima.len() >= 2 && maxima[..2].iter().all(|&(_, x, y)| near(x, y));
    let profile: Vec<f64> = g.anti_diagonal().unwrap().iter().map(|p| p.1).collect();
    let changes = slope_sign_changes(&profile);
    let el = t.elapsed();
    let pass = located && changes >= 3;
    let top: Vec<(f64, f64)> = maxima.iter().take(2).map(|&(_, x, y)| (x, y)).collect();
    let detail = format!(
        "two largest maxima at {top:.2?} (required within 0.5 of (±{target}, ±{target})); {changes} slope changes along the anti-diagonal"
    );
    out.record(9, pass, detail, el);
}

#[test]
fn acceptance() {
    let mut out = Outcomes { failed: Vec::new() };
    criterion_1(&mut out);
    criterion_2(&mut out);
    criterion_3(&mut out);
    criterion_4(&mut out);
    criterion_5(&mut out);
    criterion_6(&mut out);
    criterion_7(&mut out);
    criterion_8(&mut out);
    criterion_9(&mut out);
    assert!(out.failed.is_empty(), "failed criteria: {:?}", out.failed);
}
