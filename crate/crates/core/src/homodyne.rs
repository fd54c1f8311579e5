//! Balanced homodyne detection with a finite local oscillator.
//!
//! Mode 1 carries the signal and mode 2 the local oscillator `|E⟩`. Mixing on
//! a 50:50 beam splitter and subtracting the photocurrents measures
//! `s_θ = a₂† a₁ e^{-iθ} + a₂ a₁† e^{iθ}`, which conserves `N = n₁ + n₂`. On
//! the block of fixed `N`, in the basis `|k, N-k⟩`, `s_0` is tridiagonal with
//! off-diagonal `√((k+1)(N-k))`; it is `2 J_x` for spin `N/2`, so the outcomes
//! are the integers `μ = 2p - N`, `p = 0..=N`, and the eigenvector components
//! follow a three-term recurrence from `v(0) = 2^{-N/2} √C(N, p)`.
//!
//! The angle only rotates eigenvectors by `e^{-ikθ}`, so every probability
//! below is assembled from the real amplitudes at `θ = 0` and the angle sum.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::bell::{bell_s_with, BellAngles, BellResult};
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::fock::{CircleStateCoeffs, HARD_CUTOFF_CAP};
use crate::matrix::SymMatrix;
use crate::quadrature::{marginal_cdf, SignProfile};
use crate::special::{ln_binomial, ln_factorial, poisson_upper_tail};

pub const DEFAULT_LEAKAGE_TOL: f64 = 1e-10;

/// Largest local-oscillator cutoff accepted.
pub const LO_CUTOFF_CAP: usize = 4096;

/// Coherent local oscillator of real amplitude `E`, truncated in the number
/// basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalOscillator {
    amplitude: f64,
    cutoff: usize,
    tolerance: f64,
    leakage: f64,
}

impl LocalOscillator {
    /// `⌈E² + 8E + 20⌉`: the Poisson mean plus eight standard deviations,
    /// padded.
    pub fn default_cutoff(amplitude: f64) -> usize {
        (amplitude * amplitude + 8.0 * amplitude + 20.0).ceil() as usize
    }

    pub fn new(amplitude: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return invalid(format!("local oscillator amplitude must be finite and >= 0, got {amplitude}"));
        }
        Self::with_cutoff(amplitude, Self::default_cutoff(amplitude), DEFAULT_LEAKAGE_TOL)
    }

    pub fn with_cutoff(amplitude: f64, cutoff: usize, tolerance: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return invalid(format!("local oscillator amplitude must be finite and >= 0, got {amplitude}"));
        }
        if !(tolerance > 0.0 && tolerance < 1.0) {
            return invalid(format!("leakage tolerance must lie in (0, 1), got {tolerance}"));
        }
        if cutoff > LO_CUTOFF_CAP {
            return invalid(format!("lo_cutoff {cutoff} above the cap {LO_CUTOFF_CAP}"));
        }
        let leakage = poisson_upper_tail(amplitude * amplitude, cutoff);
        if leakage > tolerance {
            return Err(Error::Leakage {
                cutoff,
                leakage,
                tolerance,
            });
        }
        Ok(Self {
            amplitude,
            cutoff,
            tolerance,
            leakage,
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Weight of the coherent state beyond the cutoff.
    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    /// `⟨j|E⟩ = e^{-E²/2} E^j / √j!` for `j = 0..=cutoff`.
    pub fn coherent_amplitudes(&self) -> Vec<f64> {
        let e = self.amplitude;
        if e == 0.0 {
            let mut v = vec![0.0; self.cutoff + 1];
            v[0] = 1.0;
            return v;
        }
        let ln_e = e.ln();
        (0..=self.cutoff)
            .map(|j| (-0.5 * e * e + j as f64 * ln_e - 0.5 * ln_factorial(j)).exp())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum BlockSolver {
    /// Closed-form spectrum and recurrence for the components.
    #[default]
    Analytic,
    /// Dense symmetric eigensolver; cubic in the block size.
    Dense,
}

/// Eigen-decomposition of one fixed-`N` block, restricted to the leading
/// components `k < components` (signal photon numbers that can occur).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Block {
    pub total: usize,
    /// `2p - N` for `p = 0..=N`.
    pub eigenvalues: Vec<i64>,
    components: usize,
    vectors: Vec<f64>,
}

impl Block {
    /// Component `k` of eigenvector `p`, sign fixed by `v_p(0) > 0`.
    pub fn component(&self, p: usize, k: usize) -> f64 {
        self.vectors[p * self.components + k]
    }

    pub fn components(&self) -> usize {
        self.components
    }
}

pub fn block_eigenvectors(total: usize, components: usize, solver: BlockSolver) -> Result<Block> {
    let components = components.min(total + 1);
    let vectors = match solver {
        BlockSolver::Analytic => analytic_vectors(total, components),
        BlockSolver::Dense => dense_vectors(total, components)?,
    };
    Ok(Block {
        total,
        eigenvalues: (0..=total).map(|p| 2 * p as i64 - total as i64).collect(),
        components,
        vectors,
    })
}

fn analytic_vectors(total: usize, components: usize) -> Vec<f64> {
    let nf = total as f64;
    let ln_2 = std::f64::consts::LN_2;
    let mut out = vec![0.0; (total + 1) * components];
    for p in 0..=total {
        let mu = 2.0 * p as f64 - nf;
        let row = &mut out[p * components..(p + 1) * components];
        // Unit start, rescaled at the end so tiny v(0) cannot underflow early.
        row[0] = 1.0;
        if components > 1 {
            row[1] = mu / nf.sqrt();
        }
        for k in 1..components.saturating_sub(1) {
            let kf = k as f64;
            row[k + 1] = (mu * row[k] - (kf * (nf - kf + 1.0)).sqrt() * row[k - 1]) / ((kf + 1.0) * (nf - kf)).sqrt();
        }
        let ln_v0 = 0.5 * (ln_binomial(total, p) - nf * ln_2);
        for v in row.iter_mut() {
            *v = if *v == 0.0 { 0.0 } else { v.signum() * (v.abs().ln() + ln_v0).exp() };
        }
    }
    out
}

fn dense_vectors(total: usize, components: usize) -> Result<Vec<f64>> {
    let dim = total + 1;
    let m = DMatrix::from_fn(dim, dim, |i, j| {
        if i + 1 == j {
            (((i + 1) * (total - i)) as f64).sqrt()
        } else if j + 1 == i {
            (((j + 1) * (total - j)) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(m);
    let mut out = vec![f64::NAN; dim * components];
    let mut seen = vec![false; dim];
    for (col, &lambda) in eig.eigenvalues.iter().enumerate() {
        let mu = lambda.round();
        let p2 = mu + total as f64;
        if (lambda - mu).abs() > 1e-8 * (1.0 + total as f64) || p2 < 0.0 || !(p2 as usize).is_multiple_of(2) {
            return Err(Error::Spectrum(format!("block N = {total}: eigenvalue {lambda} is not of the form 2p - N")));
        }
        let p = p2 as usize / 2;
        if p > total || seen[p] {
            return Err(Error::Spectrum(format!("block N = {total}: eigenvalue {mu} repeated")));
        }
        seen[p] = true;
        let v = eig.eigenvectors.column(col);
        let sign = v[0].signum();
        for k in 0..components {
            out[p * components + k] = sign * v[k];
        }
    }
    Ok(out)
}

/// Eigenvalues of the photocurrent difference and the amplitudes
/// `M[n][(N, p)] = ⟨v_{N,p}| (|n⟩ ⊗ |E⟩)`.
#[derive(Debug, Clone, Serialize)]
pub struct PhotocurrentDecomposition {
    signal_cutoff: usize,
    theta: f64,
    lo: LocalOscillator,
    coherent: Vec<f64>,
    blocks: Vec<Block>,
}

impl PhotocurrentDecomposition {
    pub fn signal_cutoff(&self) -> usize {
        self.signal_cutoff
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn local_oscillator(&self) -> &LocalOscillator {
        &self.lo
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn leakage(&self) -> f64 {
        self.lo.leakage()
    }

    /// Real part of the amplitude at `θ = 0`.
    fn real_amplitude(&self, block: &Block, p: usize, n: usize) -> f64 {
        let total = block.total;
        if n >= block.components() || total - n > self.lo.cutoff() {
            return 0.0;
        }
        block.component(p, n) * self.coherent[total - n]
    }

    /// `M[n][(N, p)]` including the `e^{-inθ}` phase.
    pub fn amplitude(&self, total: usize, p: usize, n: usize) -> Complex64 {
        let Some(block) = self.blocks.get(total) else {
            return Complex64::new(0.0, 0.0);
        };
        if p > total {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(self.real_amplitude(block, p, n), -(n as f64) * self.theta)
    }

    /// `Σ_k |M[n][k]|²` for each signal number `n`.
    pub fn signal_norms(&self) -> Vec<f64> {
        let mut norms = vec![0.0; self.signal_cutoff + 1];
        for b in &self.blocks {
            for p in 0..=b.total {
                for (n, acc) in norms.iter_mut().enumerate() {
                    *acc += self.real_amplitude(b, p, n).powi(2);
                }
            }
        }
        norms
    }

    /// All eigenvalues, sorted.
    pub fn eigenvalues(&self) -> Vec<i64> {
        let mut all: Vec<i64> = self.blocks.iter().flat_map(|b| b.eigenvalues.iter().copied()).collect();
        all.sort_unstable();
        all
    }

    /// `R_nm(μ) = Σ_{(N,p): 2p-N=μ} M[n] M[m]` with the angle phase removed.
    pub fn outcome_gram(&self) -> OutcomeResolvedGram {
        let max_outcome = self.blocks.len() as i64 - 1;
        let dim = self.signal_cutoff + 1;
        let mut per_outcome = vec![SymMatrix::zeros(dim); (2 * max_outcome + 1) as usize];
        let mut a = vec![0.0; dim];
        for b in &self.blocks {
            for p in 0..=b.total {
                for (n, v) in a.iter_mut().enumerate() {
                    *v = self.real_amplitude(b, p, n);
                }
                let mu = b.eigenvalues[p];
                per_outcome[(mu + max_outcome) as usize].add_outer(&a);
            }
        }
        OutcomeResolvedGram {
            max_outcome,
            per_outcome,
            leakage: self.leakage(),
        }
    }
}

pub fn photocurrent_decomposition(
    signal_cutoff: usize,
    lo: &LocalOscillator,
    theta: f64,
    solver: BlockSolver,
    exec: Execution,
) -> Result<PhotocurrentDecomposition> {
    if signal_cutoff > HARD_CUTOFF_CAP {
        return invalid(format!("signal cutoff {signal_cutoff} above the cap {HARD_CUTOFF_CAP}"));
    }
    if !theta.is_finite() {
        return invalid("non-finite oscillator phase");
    }
    let max_total = signal_cutoff + lo.cutoff();
    let blocks = exec.try_map_collect(max_total + 1, |total| {
        block_eigenvectors(total, total.min(signal_cutoff) + 1, solver)
    })?;
    Ok(PhotocurrentDecomposition {
        signal_cutoff,
        theta,
        lo: *lo,
        coherent: lo.coherent_amplitudes(),
        blocks,
    })
}

/// Outcome-resolved matrices `R(μ)`; for a site measured at angle `θ` on a
/// diagonal-in-`n` pair state, `⟨n| Π_μ |m⟩ = e^{-i(n-m)θ} R_nm(μ)`.
#[derive(Debug, Clone, Serialize)]
pub struct OutcomeResolvedGram {
    max_outcome: i64,
    per_outcome: Vec<SymMatrix>,
    leakage: f64,
}

impl OutcomeResolvedGram {
    pub fn dim(&self) -> usize {
        self.per_outcome[0].dim()
    }

    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    pub fn outcomes(&self) -> impl Iterator<Item = i64> + '_ {
        -self.max_outcome..=self.max_outcome
    }

    pub fn at(&self, mu: i64) -> Option<&SymMatrix> {
        if mu.abs() > self.max_outcome {
            None
        } else {
            self.per_outcome.get((mu + self.max_outcome) as usize)
        }
    }

    /// `Σ_{μ ≥ threshold} R(μ)`.
    pub fn kernel_at_or_above(&self, threshold: f64) -> SymMatrix {
        let mut out = SymMatrix::zeros(self.dim());
        for mu in self.outcomes().filter(|&mu| mu as f64 >= threshold) {
            out.add_assign(self.at(mu).expect("in range"));
        }
        out
    }

    /// Projector matrix of "outcome ≥ 0".
    pub fn plus_kernel(&self) -> SymMatrix {
        self.kernel_at_or_above(0.0)
    }
}

pub fn outcome_gram(
    signal_cutoff: usize,
    lo: &LocalOscillator,
    solver: BlockSolver,
    exec: Execution,
) -> Result<OutcomeResolvedGram> {
    Ok(photocurrent_decomposition(signal_cutoff, lo, 0.0, solver, exec)?.outcome_gram())
}

/// Joint outcome probabilities `P(μ, ν)`, row-major over `outcomes`.
#[derive(Debug, Clone, Serialize)]
pub struct JointOutcomeTable {
    pub chi: f64,
    pub outcomes: Vec<i64>,
    pub probs: Vec<f64>,
    /// Upper bound on the total-variation error from the oscillator cutoff.
    pub leakage: f64,
}

impl JointOutcomeTable {
    pub fn prob(&self, mu: i64, nu: i64) -> f64 {
        let n = self.outcomes.len();
        let offset = -self.outcomes[0];
        let (i, j) = (mu + offset, nu + offset);
        if i < 0 || j < 0 || i as usize >= n || j as usize >= n {
            return 0.0;
        }
        self.probs[i as usize * n + j as usize]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn marginal_a(&self) -> Vec<f64> {
        self.probs.chunks(self.outcomes.len()).map(|row| row.iter().sum()).collect()
    }

    pub fn marginal_b(&self) -> Vec<f64> {
        let n = self.outcomes.len();
        (0..n).map(|j| (0..n).map(|i| self.probs[i * n + j]).sum()).collect()
    }

    /// `P(μ ≥ 0, ν ≥ 0)`.
    pub fn plus_plus(&self) -> f64 {
        let n = self.outcomes.len();
        let start = self.outcomes.iter().position(|&m| m >= 0).unwrap_or(n);
        (start..n).map(|i| self.probs[i * n + start..(i + 1) * n].iter().sum::<f64>()).sum()
    }
}

/// Joint distribution from a precomputed gram, `P(μ, ν) = Σ_{nm} c_n c_m
/// cos((n-m)χ) R_nm(μ) R_nm(ν)`.
pub fn joint_table_from_gram(
    coeffs: &CircleStateCoeffs,
    gram: &OutcomeResolvedGram,
    theta: f64,
    phi: f64,
    exec: Execution,
) -> Result<JointOutcomeTable> {
    if !(theta.is_finite() && phi.is_finite()) {
        return invalid("non-finite measurement angle");
    }
    let c = coeffs.coefficients();
    if gram.dim() < c.len() {
        return invalid("outcome gram smaller than the state cutoff");
    }
    let chi = theta + phi;
    let len = c.len();
    // Upper-triangle weights, off-diagonal doubled.
    let mut pairs = Vec::with_capacity(len * (len + 1) / 2);
    for n in 0..len {
        for m in n..len {
            let w = c[n] * c[m] * ((n as f64 - m as f64) * chi).cos();
            pairs.push((n, m, if n == m { w } else { 2.0 * w }));
        }
    }
    let outcomes: Vec<i64> = gram.outcomes().collect();
    let mats: Vec<&SymMatrix> = outcomes.iter().map(|&mu| gram.at(mu).expect("in range")).collect();
    let packed: Vec<Vec<f64>> = mats.iter().map(|r| pairs.iter().map(|&(n, m, _)| r.get(n, m)).collect()).collect();
    let weighted: Vec<Vec<f64>> = packed
        .iter()
        .map(|row| row.iter().zip(&pairs).map(|(v, &(_, _, w))| v * w).collect())
        .collect();
    let rows = exec.map_collect(outcomes.len(), |i| {
        packed
            .iter()
            .map(|col| weighted[i].iter().zip(col).map(|(a, b)| a * b).sum::<f64>())
            .collect::<Vec<f64>>()
    });
    Ok(JointOutcomeTable {
        chi,
        outcomes,
        probs: rows.concat(),
        leakage: gram.leakage(),
    })
}

pub fn joint_photocurrent_dist(
    coeffs: &CircleStateCoeffs,
    lo: &LocalOscillator,
    theta: f64,
    phi: f64,
    solver: BlockSolver,
    exec: Execution,
) -> Result<JointOutcomeTable> {
    let gram = outcome_gram(coeffs.cutoff(), lo, solver, exec)?;
    joint_table_from_gram(coeffs, &gram, theta, phi, exec)
}

/// Sign statistics of finite-`E` homodyne detection, outcome 0 counted `+`.
pub fn finite_e_profile(
    coeffs: &CircleStateCoeffs,
    lo: &LocalOscillator,
    solver: BlockSolver,
    exec: Execution,
) -> Result<SignProfile> {
    let plus = outcome_gram(coeffs.cutoff(), lo, solver, exec)?.plus_kernel();
    Ok(SignProfile::from_kernels(coeffs, &plus, &plus))
}

pub fn finite_e_s(
    coeffs: &CircleStateCoeffs,
    lo: &LocalOscillator,
    angles: &BellAngles,
    solver: BlockSolver,
    exec: Execution,
) -> Result<BellResult> {
    Ok(bell_s_with(&finite_e_profile(coeffs, lo, solver, exec)?, angles))
}

/// Single-site outcome distribution; independent of the oscillator phase.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeDistribution {
    pub outcomes: Vec<i64>,
    pub probs: Vec<f64>,
}

/// Kolmogorov-Smirnov distances between `μ / scale` and a continuous law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsDistance {
    /// Each lattice outcome spread uniformly over its unit cell first.
    pub smoothed: f64,
    /// Raw lattice distribution.
    pub lattice: f64,
}

impl OutcomeDistribution {
    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Compares with the continuous cumulative distribution `cdf`, evaluated
    /// on a sorted list of points.
    pub fn ks_distance<F>(&self, scale: f64, cdf: F) -> Result<KsDistance>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>>,
    {
        if !(scale > 0.0) {
            return invalid("KS scale must be positive");
        }
        // Points per outcome: lower cell edge, centre, upper cell edge.
        let points: Vec<f64> = self
            .outcomes
            .iter()
            .flat_map(|&mu| {
                let m = mu as f64;
                [(m - 0.5) / scale, m / scale, (m + 0.5) / scale]
            })
            .collect();
        let reference = cdf(&points)?;
        let mut below = 0.0;
        let (mut smoothed, mut lattice): (f64, f64) = (0.0, 0.0);
        for (i, &p) in self.probs.iter().enumerate() {
            let [lo, mid, hi] = [reference[3 * i], reference[3 * i + 1], reference[3 * i + 2]];
            smoothed = smoothed
                .max((below - lo).abs())
                .max((below + 0.5 * p - mid).abs())
                .max((below + p - hi).abs());
            lattice = lattice.max((below - mid).abs()).max((below + p - mid).abs());
            below += p;
        }
        Ok(KsDistance { smoothed, lattice })
    }

    /// KS distances of `μ / E` from the exact quadrature marginal.
    pub fn ks_against_quadrature(&self, coeffs: &CircleStateCoeffs, amplitude: f64) -> Result<KsDistance> {
        self.ks_distance(amplitude, |pts| marginal_cdf(coeffs, pts))
    }
}

pub fn site_distribution_from_gram(coeffs: &CircleStateCoeffs, gram: &OutcomeResolvedGram) -> OutcomeDistribution {
    let c = coeffs.coefficients();
    let outcomes: Vec<i64> = gram.outcomes().collect();
    let probs = outcomes
        .iter()
        .map(|&mu| {
            let r = gram.at(mu).expect("in range");
            c.iter().enumerate().map(|(n, cn)| cn * cn * r.get(n, n)).sum()
        })
        .collect();
    OutcomeDistribution { outcomes, probs }
}

pub fn site_outcome_distribution(
    coeffs: &CircleStateCoeffs,
    lo: &LocalOscillator,
    solver: BlockSolver,
    exec: Execution,
) -> Result<OutcomeDistribution> {
    let gram = outcome_gram(coeffs.cutoff(), lo, solver, exec)?;
    Ok(site_distribution_from_gram(coeffs, &gram))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergencePoint {
    pub amplitude: f64,
    pub lo_cutoff: usize,
    pub s_e: f64,
    pub s_ideal: f64,
    pub error: f64,
    pub leakage: f64,
}

/// `S_E` against the ideal-quadrature `S` for each amplitude.
pub fn convergence_report(
    coeffs: &CircleStateCoeffs,
    angles: &BellAngles,
    amplitudes: &[f64],
    solver: BlockSolver,
    exec: Execution,
) -> Result<Vec<ConvergencePoint>> {
    let s_ideal = bell_s_with(&SignProfile::ideal(coeffs), angles).s;
    amplitudes
        .iter()
        .map(|&e| {
            let lo = LocalOscillator::new(e)?;
            let s_e = finite_e_s(coeffs, &lo, angles, solver, exec)?.s;
            Ok(ConvergencePoint {
                amplitude: e,
                lo_cutoff: lo.cutoff(),
                s_e,
                s_ideal,
                error: (s_e - s_ideal).abs(),
                leakage: lo.leakage(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoarseGrainPoint {
    pub width: f64,
    pub s: f64,
}

/// `S` after rounding each outcome to the nearest multiple of `width`
/// (ties upward) before taking its sign; `width = 0` means no binning.
///
/// `w ⌊μ/w + 1/2⌋ ≥ 0` exactly when `μ ≥ -w/2`.
pub fn coarse_grained_s(
    coeffs: &CircleStateCoeffs,
    lo: &LocalOscillator,
    angles: &BellAngles,
    widths: &[f64],
    solver: BlockSolver,
    exec: Execution,
) -> Result<Vec<CoarseGrainPoint>> {
    if widths.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return invalid("bin widths must be finite and >= 0");
    }
    let gram = outcome_gram(coeffs.cutoff(), lo, solver, exec)?;
    Ok(widths
        .iter()
        .map(|&w| {
            let plus = gram.kernel_at_or_above(-0.5 * w);
            let profile = SignProfile::from_kernels(coeffs, &plus, &plus);
            CoarseGrainPoint {
                width: w,
                s: bell_s_with(&profile, angles).s,
            }
        })
        .collect())
}
