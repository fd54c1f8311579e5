//! Local hidden variable model: quadrature results blurred by vacuum-scale
//! Gaussian noise.
//!
//! The noisy statistics are generated by the Husimi density of the state,
//! `Q(α, β) = π^{-2} |⟨α, β|Ψ⟩|²`, read as a probability distribution over the
//! hidden variable `λ = (α, β)`. Each site answers deterministically with the
//! sign of `2 Re(α e^{-iθ})` (resp. `β`, `φ`), which is the quadrature result
//! plus unit-variance noise.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{weighted::WeightedIndex, Distribution, Gamma};
use serde::Serialize;

use crate::bell::{bell_s_with, optimize_angles_with, BellAngles, BellResult, OptimizedAngles, OptimizerSettings};
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::fock::{circle_state_coeffs, fill_eigenfunctions, CircleStateCoeffs, DEFAULT_TAIL_TOL};
use crate::integrate::GaussLegendre;
use crate::matrix::SymMatrix;
use crate::quadrature::{support_radius, GridSpec, JointDensityGrid, Outcome, SignProfile};
use crate::sampling::{batch_rng, batch_sizes, Estimate, MAX_PROPOSALS_PER_SAMPLE};
use crate::special::{ln_factorial, ln_gamma_half};

/// Hidden variable `λ = (α, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HiddenVariableSample {
    pub alpha: Complex64,
    pub beta: Complex64,
}

impl HiddenVariableSample {
    /// Site A's answer; a function of `α` and `θ` only.
    pub fn outcome_a(&self, theta: f64) -> Outcome {
        local_response(self.alpha, theta)
    }

    /// Site B's answer; a function of `β` and `φ` only.
    pub fn outcome_b(&self, phi: f64) -> Outcome {
        local_response(self.beta, phi)
    }
}

/// Sign of `2 Re(a e^{-i angle})`, zero counted as `Plus`.
pub fn local_response(amplitude: Complex64, angle: f64) -> Outcome {
    Outcome::of(2.0 * noisy_quadrature(amplitude, angle))
}

fn noisy_quadrature(amplitude: Complex64, angle: f64) -> f64 {
    (amplitude * Complex64::from_polar(1.0, -angle)).re
}

/// `(ln |t_n|)_n` for `t_n = c_n |z|^n / n!` and their maximum.
fn log_terms(c: &[f64], modulus: f64) -> (Vec<f64>, f64) {
    let ln_mod = modulus.ln();
    let terms: Vec<f64> = c
        .iter()
        .enumerate()
        .map(|(n, &cn)| {
            if n == 0 {
                cn.ln()
            } else {
                cn.ln() + n as f64 * ln_mod - ln_factorial(n)
            }
        })
        .collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (terms, max)
}

/// `|Σ_n t_n e^{inφ}|² e^{-2L}` with `L` the largest `ln t_n`.
fn scaled_series_modulus(terms: &[f64], max: f64, phase: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (n, &t) in terms.iter().enumerate() {
        let w = (t - max).exp();
        let (s, c) = (n as f64 * phase).sin_cos();
        re += w * c;
        im += w * s;
    }
    re * re + im * im
}

/// `π^{-2} e^{-|α|²-|β|²} |Σ_n c_n (ᾱβ̄)^n / n!|²`.
pub fn husimi_density(coeffs: &CircleStateCoeffs, alpha: Complex64, beta: Complex64) -> f64 {
    let c = coeffs.coefficients();
    let z = (alpha * beta).conj();
    let gauss = -alpha.norm_sqr() - beta.norm_sqr();
    let modulus = z.norm();
    if modulus == 0.0 {
        return (gauss.exp() * c[0] * c[0]) / (PI * PI);
    }
    let (terms, max) = log_terms(c, modulus);
    let s = scaled_series_modulus(&terms, max, z.arg());
    if s == 0.0 {
        return 0.0;
    }
    (gauss + 2.0 * max + s.ln()).exp() / (PI * PI)
}

/// Exact sampler for the Husimi density.
///
/// With `z = ᾱβ̄`, `|Σ c_n z^n/n!|² ≤ (Σ c_n) Σ c_n |z|^{2n}/(n!)²`, and the
/// right-hand side times `π^{-2} e^{-|α|²-|β|²}` is `(Σ c) Σ_n c_n Q_n(α) Q_n(β)`
/// where `Q_n` is the Husimi density of `|n⟩`. Proposals therefore pick `n`
/// with probability `c_n / Σ c` and draw `|α|², |β|² ~ Gamma(n+1, 1)` with
/// uniform phases. The acceptance rate is `1/(Σ c)²`.
#[derive(Debug, Clone)]
pub struct HusimiSampler {
    c: Vec<f64>,
    sum_c: f64,
    index: WeightedIndex<f64>,
    radial: Vec<Gamma<f64>>,
}

impl HusimiSampler {
    pub fn new(coeffs: &CircleStateCoeffs) -> Result<Self> {
        let c = coeffs.coefficients().to_vec();
        let sum_c = c.iter().sum();
        let index = WeightedIndex::new(&c).map_err(|e| Error::Sampler(format!("mixture weights: {e}")))?;
        let radial = (0..c.len())
            .map(|n| Gamma::new((n + 1) as f64, 1.0).expect("positive shape"))
            .collect();
        Ok(Self { c, sum_c, index, radial })
    }

    pub fn acceptance(&self) -> f64 {
        1.0 / (self.sum_c * self.sum_c)
    }

    /// Draws one hidden variable and reports how many proposals it took.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(HiddenVariableSample, u64)> {
        for attempt in 1..=MAX_PROPOSALS_PER_SAMPLE {
            let n = self.index.sample(rng);
            let ra = self.radial[n].sample(rng).sqrt();
            let rb = self.radial[n].sample(rng).sqrt();
            let alpha = Complex64::from_polar(ra, TAU * rng.random::<f64>());
            let beta = Complex64::from_polar(rb, TAU * rng.random::<f64>());
            if rng.random::<f64>() < self.acceptance_ratio(alpha, beta) {
                return Ok((HiddenVariableSample { alpha, beta }, attempt));
            }
        }
        Err(Error::Sampler(format!(
            "Husimi sampler accepted nothing in {MAX_PROPOSALS_PER_SAMPLE} proposals \
             (expected acceptance {:.3e}, Σc = {:.4})",
            self.acceptance(),
            self.sum_c
        )))
    }

    /// Target over envelope, in `[0, 1]`.
    fn acceptance_ratio(&self, alpha: Complex64, beta: Complex64) -> f64 {
        let z = (alpha * beta).conj();
        let modulus = z.norm();
        if modulus == 0.0 {
            return self.c[0] / self.sum_c;
        }
        let (terms, max) = log_terms(&self.c, modulus);
        let num = scaled_series_modulus(&terms, max, z.arg());
        let den: f64 = terms
            .iter()
            .zip(&self.c)
            .map(|(&t, &cn)| (2.0 * (t - max)).exp() / cn)
            .sum();
        num / (self.sum_c * den)
    }
}

/// `n` Husimi samples, batched and seeded like every other estimator.
pub fn sample_hidden_variables(
    coeffs: &CircleStateCoeffs,
    n: u64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<HiddenVariableSample>> {
    let sampler = HusimiSampler::new(coeffs)?;
    let sizes = batch_sizes(n);
    let batches = exec.try_map_collect(sizes.len(), |i| -> Result<Vec<HiddenVariableSample>> {
        let mut rng = batch_rng(seed, i as u64);
        (0..sizes[i]).map(|_| sampler.sample(&mut rng).map(|s| s.0)).collect()
    })?;
    Ok(batches.concat())
}

/// `G_nm = ⟨n| Π̃_+ |m⟩` for the noisy measurement, whose "+" outcome has the
/// operator `∫_{Re(α) ≥ 0} |α⟩⟨α| d²α / π`.
///
/// `G_nn = 1/2`; for odd `d = n - m`,
/// `G_nm = Γ((n+m)/2 + 1) sin(dπ/2) / (π d √(n! m!))`; zero otherwise.
pub fn noisy_overlaps(cutoff: usize) -> SymMatrix {
    SymMatrix::from_upper(cutoff + 1, |n, m| {
        if n == m {
            return 0.5;
        }
        let d = m - n;
        if d % 2 == 0 {
            return 0.0;
        }
        let sign = if d % 4 == 1 { 1.0 } else { -1.0 };
        let ln = ln_gamma_half(n + m + 2) - 0.5 * (ln_factorial(n) + ln_factorial(m));
        sign * ln.exp() / (PI * d as f64)
    })
}

/// Sign statistics of the noisy measurement at both sites.
pub fn noisy_profile(coeffs: &CircleStateCoeffs) -> SignProfile {
    let g = noisy_overlaps(coeffs.cutoff());
    SignProfile::from_kernels(coeffs, &g, &g)
}

/// Exact `S` of the local hidden variable model.
pub fn lhv_noisy_s_exact(coeffs: &CircleStateCoeffs, angles: &BellAngles) -> BellResult {
    bell_s_with(&noisy_profile(coeffs), angles)
}

const NOISE_REACH: f64 = 10.0;

/// Matrix elements of the noisy single-site density,
/// `F_nm(x̃) = ∫ ψ_n(x) ψ_m(x) N(x̃ - x; 0, 1) dx`, by composite Gauss-Legendre
/// over `|x - x̃| ≤ 10` (absolute error well below 1e-10).
#[derive(Debug, Clone)]
pub struct NoiseConvolution {
    len: usize,
    radius: f64,
    rule: GaussLegendre,
}

impl NoiseConvolution {
    pub fn new(cutoff: usize) -> Self {
        Self {
            len: cutoff + 1,
            radius: support_radius(cutoff),
            rule: GaussLegendre::new(10),
        }
    }

    pub fn kernel(&self, x_tilde: f64) -> SymMatrix {
        let mut out = SymMatrix::zeros(self.len);
        let lo = (x_tilde - NOISE_REACH).max(-self.radius);
        let hi = (x_tilde + NOISE_REACH).min(self.radius);
        if lo >= hi {
            return out;
        }
        let panels = ((hi - lo) / 0.25).ceil() as usize;
        let (xs, ws) = self.rule.composite_nodes(lo, hi, panels);
        let mut psi = vec![0.0; self.len];
        let norm = 1.0 / TAU.sqrt();
        for (&x, &w) in xs.iter().zip(&ws) {
            fill_eigenfunctions(x, &mut psi);
            let g = w * norm * (-0.5 * (x_tilde - x).powi(2)).exp();
            for v in psi.iter_mut() {
                *v *= g.sqrt();
            }
            out.add_outer(&psi);
        }
        out
    }
}

/// Joint density of the noisy results `(x̃, ỹ)` at angle sum `chi`:
/// `Σ_{nm} c_n c_m cos((n-m)χ) F_nm(x̃) F_nm(ỹ)`.
#[derive(Debug, Clone)]
pub struct NoisyJointDensity {
    chi: f64,
    weights: SymMatrix,
    conv: NoiseConvolution,
}

impl NoisyJointDensity {
    pub fn new(coeffs: &CircleStateCoeffs, theta: f64, phi: f64) -> Result<Self> {
        if !(theta.is_finite() && phi.is_finite()) {
            return invalid("non-finite measurement angle");
        }
        let chi = theta + phi;
        let c = coeffs.coefficients();
        Ok(Self {
            chi,
            weights: SymMatrix::from_upper(c.len(), |n, m| c[n] * c[m] * ((n as f64 - m as f64) * chi).cos()),
            conv: NoiseConvolution::new(coeffs.cutoff()),
        })
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    fn pair(&self, fx: &SymMatrix, fy: &SymMatrix) -> f64 {
        let d = self.weights.dim();
        let mut acc = 0.0;
        for n in 0..d {
            acc += self.weights.get(n, n) * fx.get(n, n) * fy.get(n, n);
            for m in n + 1..d {
                acc += 2.0 * self.weights.get(n, m) * fx.get(n, m) * fy.get(n, m);
            }
        }
        acc
    }

    pub fn density(&self, x_tilde: f64, y_tilde: f64) -> f64 {
        self.pair(&self.conv.kernel(x_tilde), &self.conv.kernel(y_tilde))
    }

    /// `∫_{x0}^{x1} F(x̃) dx̃`, Gauss-Legendre in panels of width ≤ 0.5.
    fn integrated_kernel(&self, x0: f64, x1: f64) -> SymMatrix {
        let rule = GaussLegendre::new(8);
        let panels = ((x1 - x0) / 0.5).ceil().max(1.0) as usize;
        let (xs, ws) = rule.composite_nodes(x0, x1, panels);
        let mut acc = SymMatrix::zeros(self.weights.dim());
        for (&x, &w) in xs.iter().zip(&ws) {
            let mut k = self.conv.kernel(x);
            k.scale(w);
            acc.add_assign(&k);
        }
        acc
    }

    /// Probability of `x̃ ∈ [x0, x1], ỹ ∈ [y0, y1]`.
    pub fn box_probability(&self, x: (f64, f64), y: (f64, f64)) -> f64 {
        self.pair(&self.integrated_kernel(x.0, x.1), &self.integrated_kernel(y.0, y.1))
    }

    /// Probabilities of the cells `[x_edges[i], x_edges[i+1]) × [y_edges[j], y_edges[j+1])`,
    /// row-major in `i`.
    pub fn cell_probabilities(&self, x_edges: &[f64], y_edges: &[f64], exec: Execution) -> Vec<f64> {
        let strips = |edges: &[f64]| exec.map_collect(edges.len().saturating_sub(1), |i| self.integrated_kernel(edges[i], edges[i + 1]));
        let (kx, ky) = (strips(x_edges), strips(y_edges));
        exec.map_collect(kx.len(), |i| ky.iter().map(|fy| self.pair(&kx[i], fy)).collect::<Vec<_>>())
            .concat()
    }

    /// Density on a grid, one convolution kernel per grid node.
    pub fn grid(&self, xs: &GridSpec, ys: &GridSpec, exec: Execution) -> JointDensityGrid {
        let x_grid = xs.nodes();
        let y_grid = ys.nodes();
        let kx = exec.map_slice(&x_grid, |&x| self.conv.kernel(x));
        let ky = exec.map_slice(&y_grid, |&y| self.conv.kernel(y));
        let rows = exec.map_collect(x_grid.len(), |i| ky.iter().map(|fy| self.pair(&kx[i], fy)).collect::<Vec<_>>());
        JointDensityGrid {
            chi: self.chi,
            x_grid,
            y_grid,
            values: rows.concat(),
        }
    }
}

/// Convenience wrapper for a single point.
pub fn noisy_joint_density(coeffs: &CircleStateCoeffs, theta: f64, phi: f64, x_tilde: f64, y_tilde: f64) -> Result<f64> {
    Ok(NoisyJointDensity::new(coeffs, theta, phi)?.density(x_tilde, y_tilde))
}

/// Monte-Carlo estimate of `S` from Husimi samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LhvEstimate {
    pub r0: f64,
    pub s: Estimate,
    /// `P++` at `θ+φ, θ+φ', θ'+φ, θ'+φ'`.
    pub p_pp: [Estimate; 4],
    pub marginal_a: Estimate,
    pub marginal_b: Estimate,
    pub angles: BellAngles,
    pub seed: u64,
    /// Accepted over proposed samples.
    pub acceptance: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    pp: [u64; 4],
    a: u64,
    b: u64,
    // Per-sample numerator u and denominator v of S.
    su: i64,
    sv: i64,
    suu: i64,
    svv: i64,
    suv: i64,
    proposals: u64,
}

impl Tally {
    fn merge(mut self, o: &Tally) -> Self {
        for k in 0..4 {
            self.pp[k] += o.pp[k];
        }
        self.a += o.a;
        self.b += o.b;
        self.su += o.su;
        self.sv += o.sv;
        self.suu += o.suu;
        self.svv += o.svv;
        self.suv += o.suv;
        self.proposals += o.proposals;
        self
    }
}

pub const MIN_LHV_SAMPLES: u64 = 10_000;

/// Samples `λ` from the Husimi density and applies the local responses.
/// `S` is a ratio of means; its standard error comes from the delta method.
pub fn lhv_noisy_s(
    coeffs: &CircleStateCoeffs,
    angles: &BellAngles,
    n_samples: u64,
    seed: u64,
    exec: Execution,
) -> Result<LhvEstimate> {
    if n_samples < MIN_LHV_SAMPLES {
        return invalid(format!("need at least {MIN_LHV_SAMPLES} samples, got {n_samples}"));
    }
    if !angles.is_finite() {
        return invalid("non-finite measurement angle");
    }
    let sampler = HusimiSampler::new(coeffs)?;
    let sizes = batch_sizes(n_samples);
    let tallies = exec.try_map_collect(sizes.len(), |i| -> Result<Tally> {
        let mut rng = batch_rng(seed, i as u64);
        let mut t = Tally::default();
        for _ in 0..sizes[i] {
            let (lambda, tries) = sampler.sample(&mut rng)?;
            t.proposals += tries;
            let a = [lambda.outcome_a(angles.theta), lambda.outcome_a(angles.theta_p)];
            let b = [lambda.outcome_b(angles.phi), lambda.outcome_b(angles.phi_p)];
            let plus = |o: Outcome| (o == Outcome::Plus) as i64;
            let pp = [
                plus(a[0]) * plus(b[0]),
                plus(a[0]) * plus(b[1]),
                plus(a[1]) * plus(b[0]),
                plus(a[1]) * plus(b[1]),
            ];
            for k in 0..4 {
                t.pp[k] += pp[k] as u64;
            }
            t.a += plus(a[1]) as u64;
            t.b += plus(b[0]) as u64;
            let u = pp[0] - pp[1] + pp[2] + pp[3];
            let v = plus(a[1]) + plus(b[0]);
            t.su += u;
            t.sv += v;
            t.suu += u * u;
            t.svv += v * v;
            t.suv += u * v;
        }
        Ok(t)
    })?;
    let t = tallies.iter().fold(Tally::default(), |acc, x| acc.merge(x));
    let n = n_samples as f64;
    let (mu, mv) = (t.su as f64 / n, t.sv as f64 / n);
    let s = mu / mv;
    // Var(u - S v) with population moments.
    let var = (t.suu as f64 / n - mu * mu) - 2.0 * s * (t.suv as f64 / n - mu * mv) + s * s * (t.svv as f64 / n - mv * mv);
    Ok(LhvEstimate {
        r0: coeffs.r0(),
        s: Estimate {
            mean: s,
            std_err: (var.max(0.0) / n).sqrt() / mv,
            samples: n_samples,
        },
        p_pp: t.pp.map(|h| Estimate::proportion(h, n_samples)),
        marginal_a: Estimate::proportion(t.a, n_samples),
        marginal_b: Estimate::proportion(t.b, n_samples),
        angles: *angles,
        seed,
        acceptance: n_samples as f64 / t.proposals as f64,
    })
}

/// `n` angle quadruples drawn uniformly from `[-π, π)⁴`.
pub fn random_angles(n: usize, seed: u64) -> Vec<BellAngles> {
    let mut rng = batch_rng(seed, 0);
    let mut draw = || rng.random::<f64>() * TAU - PI;
    (0..n).map(|_| BellAngles::new(draw(), draw(), draw(), draw())).collect()
}

/// Largest exact local-hidden-variable `S` over the given angle quadruples.
pub fn max_exact_lhv_s(coeffs: &CircleStateCoeffs, angles: &[BellAngles], exec: Execution) -> Option<BellResult> {
    let profile = noisy_profile(coeffs);
    exec.map_slice(angles, |a| bell_s_with(&profile, a))
        .into_iter()
        .max_by(|a, b| a.s.total_cmp(&b.s))
}

/// Angle search used for the large-amplitude check: a fine coarse grid and
/// several refined candidates.
pub fn exhaustive_settings(grid_points: usize) -> OptimizerSettings {
    OptimizerSettings {
        grid_points,
        candidates: 8,
        ..OptimizerSettings::default()
    }
}

/// Noise-free `S` maximised over all angles.
pub fn exhaustive_max_s(coeffs: &CircleStateCoeffs, grid_points: usize, exec: Execution) -> Result<OptimizedAngles> {
    optimize_angles_with(&SignProfile::ideal(coeffs), &exhaustive_settings(grid_points), exec)
}

pub const MACROSCOPIC_R0: f64 = 2.5;

/// Maximal ideal-measurement `S` at large amplitude.
pub fn macroscopic_limit_check(r0: f64, grid_points: usize, exec: Execution) -> Result<OptimizedAngles> {
    if !(r0 >= MACROSCOPIC_R0) {
        return invalid(format!("macroscopic check needs r0 >= {MACROSCOPIC_R0}, got {r0}"));
    }
    let coeffs = circle_state_coeffs(r0, DEFAULT_TAIL_TOL)?;
    exhaustive_max_s(&coeffs, grid_points, exec)
}
