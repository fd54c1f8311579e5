//! Seeded Monte-Carlo estimators.
//!
//! Work is split into fixed-size batches; batch `i` draws from the ChaCha8
//! stream `i` of the run's seed, so estimates are identical for any number of
//! worker threads.

use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use rand_distr::{weighted::WeightedIndex, Distribution, Normal};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::fock::{fill_eigenfunctions, CircleStateCoeffs};
use crate::quadrature::{support_radius, Outcome};

pub const BATCH_SIZE: u64 = 10_000;

/// Proposals allowed per accepted sample before a sampler gives up.
pub const MAX_PROPOSALS_PER_SAMPLE: u64 = 100_000;

pub fn batch_rng(seed: u64, batch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    rng
}

/// Sizes of the batches covering `n` samples.
pub(crate) fn batch_sizes(n: u64) -> Vec<u64> {
    let full = n / BATCH_SIZE;
    let mut sizes = vec![BATCH_SIZE; full as usize];
    if !n.is_multiple_of(BATCH_SIZE) {
        sizes.push(n % BATCH_SIZE);
    }
    sizes
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: u64,
}

impl Estimate {
    /// Binomial proportion `hits / n`.
    pub fn proportion(hits: u64, n: u64) -> Self {
        let p = hits as f64 / n as f64;
        Self {
            mean: p,
            std_err: (p * (1.0 - p) / n as f64).sqrt(),
            samples: n,
        }
    }

    /// Deviation from `value` in units of the standard error.
    pub fn z_score(&self, value: f64) -> f64 {
        if self.std_err == 0.0 {
            if self.mean == value {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - value) / self.std_err
        }
    }

    pub fn agrees_with(&self, value: f64, sigmas: f64) -> bool {
        self.z_score(value).abs() <= sigmas
    }
}

/// Rejection sampler for the joint quadrature density at angle sum `chi`.
///
/// Envelope: `P(x, y) ≤ A(x) A(y)` with `A(x) = Σ_n c_n ψ_n(x)²` (Cauchy-
/// Schwarz). `A` is dominated by a piecewise-constant table on `[-R, R]`
/// (cell maximum over endpoints and midpoint, padded by 5%) joined to a
/// scaled normal beyond `R`. Every proposal re-checks the bound; a
/// violation aborts the run.
#[derive(Debug, Clone)]
pub struct JointDensitySampler {
    len: usize,
    cre: Vec<f64>,
    cim: Vec<f64>,
    weights: Vec<f64>,
    envelope: Envelope,
}

/// Unnormalised one-dimensional envelope `E(x) ≥ A(x)`.
#[derive(Debug, Clone)]
struct Envelope {
    radius: f64,
    width: f64,
    heights: Vec<f64>,
    /// Cells `0..heights.len()` and, last, the tail component.
    pick: WeightedIndex<f64>,
    tail: Normal<f64>,
    sigma: f64,
    tail_scale: f64,
    mass: f64,
}

const ENVELOPE_CELL: f64 = 0.01;
const ENVELOPE_PAD: f64 = 1.05;

impl Envelope {
    fn new(weights: &[f64], mean_photons: f64, radius: f64) -> Result<Self> {
        let mut psi = vec![0.0; weights.len()];
        let mut a = |x: f64| {
            fill_eigenfunctions(x, &mut psi);
            weights.iter().zip(&psi).map(|(c, p)| c * p * p).sum::<f64>()
        };
        let cells = (2.0 * radius / ENVELOPE_CELL).ceil() as usize;
        let width = 2.0 * radius / cells as f64;
        let mut heights = Vec::with_capacity(cells);
        let mut left = a(-radius);
        for i in 0..cells {
            let x0 = -radius + width * i as f64;
            let right = a(x0 + width);
            let mid = a(x0 + 0.5 * width);
            heights.push(ENVELOPE_PAD * left.max(mid).max(right));
            left = right;
        }
        let sigma = (2.0 * mean_photons + 1.0).sqrt();
        let tail = Normal::new(0.0, sigma).expect("positive width");
        let mut sup: f64 = 0.0;
        for i in 0..=4000 {
            let x = radius + 40.0 * i as f64 / 4000.0;
            let q = normal_pdf(x, sigma);
            if q < f64::MIN_POSITIVE {
                break;
            }
            sup = sup.max(a(x).max(a(-x)) / q);
        }
        let tail_scale = ENVELOPE_PAD * sup;
        let tail_mass = tail_scale * 2.0 * normal_upper_tail(radius / sigma);
        let mut masses: Vec<f64> = heights.iter().map(|h| h * width).collect();
        masses.push(tail_mass);
        let mass = masses.iter().sum();
        let pick = WeightedIndex::new(&masses).map_err(|e| Error::Sampler(format!("envelope weights: {e}")))?;
        Ok(Self {
            radius,
            width,
            heights,
            pick,
            tail,
            sigma,
            tail_scale,
            mass,
        })
    }

    fn at(&self, x: f64) -> f64 {
        if x.abs() <= self.radius {
            let i = (((x + self.radius) / self.width) as usize).min(self.heights.len() - 1);
            self.heights[i]
        } else {
            self.tail_scale * normal_pdf(x, self.sigma)
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let i = self.pick.sample(rng);
        if i < self.heights.len() {
            -self.radius + self.width * (i as f64 + rng.random::<f64>())
        } else {
            // Picked only when the tail has mass, so this loop terminates.
            loop {
                let x = self.tail.sample(rng);
                if x.abs() > self.radius {
                    return x;
                }
            }
        }
    }
}

impl JointDensitySampler {
    pub fn new(coeffs: &CircleStateCoeffs, chi: f64) -> Result<Self> {
        if !chi.is_finite() {
            return invalid("non-finite angle sum");
        }
        let c = coeffs.coefficients();
        let len = c.len();
        let envelope = Envelope::new(c, coeffs.mean_photon_number(), support_radius(coeffs.cutoff()))?;
        let (cre, cim) = c
            .iter()
            .enumerate()
            .map(|(n, &cn)| {
                let (s, co) = (n as f64 * chi).sin_cos();
                (cn * co, -cn * s)
            })
            .unzip();
        Ok(Self {
            len,
            cre,
            cim,
            weights: c.to_vec(),
            envelope,
        })
    }

    /// Expected fraction of accepted proposals.
    pub fn acceptance(&self) -> f64 {
        1.0 / (self.envelope.mass * self.envelope.mass)
    }

    /// Draws one `(x, y)`, returning it with the number of proposals used.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, scratch: &mut [Vec<f64>; 2]) -> Result<((f64, f64), u64)> {
        for attempt in 1..=MAX_PROPOSALS_PER_SAMPLE {
            let x = self.envelope.sample(rng);
            let y = self.envelope.sample(rng);
            let [px, py] = scratch;
            fill_eigenfunctions(x, px);
            fill_eigenfunctions(y, py);
            let (mut re, mut im) = (0.0, 0.0);
            let (mut ax, mut ay) = (0.0, 0.0);
            for n in 0..self.len {
                let t = px[n] * py[n];
                re += self.cre[n] * t;
                im += self.cim[n] * t;
                ax += self.weights[n] * px[n] * px[n];
                ay += self.weights[n] * py[n] * py[n];
            }
            let density = re * re + im * im;
            let (ex, ey) = (self.envelope.at(x), self.envelope.at(y));
            if ax > ex * (1.0 + 1e-12) || ay > ey * (1.0 + 1e-12) {
                return Err(Error::Sampler(format!(
                    "proposal envelope violated at ({x}, {y}); ratio {:.6}",
                    (ax / ex).max(ay / ey)
                )));
            }
            if rng.random::<f64>() * ex * ey < density {
                return Ok(((x, y), attempt));
            }
        }
        Err(Error::Sampler(format!(
            "no sample accepted after {MAX_PROPOSALS_PER_SAMPLE} proposals (expected acceptance {:.3e})",
            self.acceptance()
        )))
    }

    fn scratch(&self) -> [Vec<f64>; 2] {
        [vec![0.0; self.len], vec![0.0; self.len]]
    }
}

fn normal_pdf(x: f64, sigma: f64) -> f64 {
    (-0.5 * (x / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// `P(Z > z)` for a standard normal by Laplace's continued fraction; used
/// only for `z` well past 1, where it converges quickly.
fn normal_upper_tail(z: f64) -> f64 {
    let mut f = 0.0;
    for k in (1..=200).rev() {
        f = k as f64 / (z + f);
    }
    (-0.5 * z * z).exp() / ((2.0 * std::f64::consts::PI).sqrt() * (z + f))
}

/// Monte-Carlo estimate of the probability of the sign pair `(a, b)` from
/// `n` exact samples of the joint density.
pub fn sample_sign_probability(
    coeffs: &CircleStateCoeffs,
    chi: f64,
    a: Outcome,
    b: Outcome,
    n: u64,
    seed: u64,
    exec: Execution,
) -> Result<Estimate> {
    if n == 0 {
        return invalid("need at least one sample");
    }
    let sampler = JointDensitySampler::new(coeffs, chi)?;
    let sizes = batch_sizes(n);
    let hits = exec.try_map_collect(sizes.len(), |i| -> Result<u64> {
        let mut rng = batch_rng(seed, i as u64);
        let mut scratch = sampler.scratch();
        let mut hits = 0;
        for _ in 0..sizes[i] {
            let ((x, y), _) = sampler.sample(&mut rng, &mut scratch)?;
            if Outcome::of(x) == a && Outcome::of(y) == b {
                hits += 1;
            }
        }
        Ok(hits)
    })?;
    Ok(Estimate::proportion(hits.iter().sum(), n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::circle_state_coeffs;

    #[test]
    fn batches_cover_exactly() {
        assert_eq!(batch_sizes(25_000), vec![10_000, 10_000, 5_000]);
        assert_eq!(batch_sizes(20_000), vec![10_000, 10_000]);
        assert!(batch_sizes(0).is_empty());
    }

    #[test]
    fn estimate_z() {
        let e = Estimate::proportion(500, 1000);
        assert!((e.std_err - (0.25f64 / 1000.0).sqrt()).abs() < 1e-15);
        assert!(e.agrees_with(0.5, 0.0));
        assert!(!e.agrees_with(0.6, 3.0));
    }

    #[test]
    fn vacuum_quadrant_probability() {
        let s = circle_state_coeffs(0.0, 1e-12).unwrap();
        let est = sample_sign_probability(&s, 0.3, Outcome::Plus, Outcome::Plus, 40_000, 1, Execution::Parallel)
            .unwrap();
        assert!(est.agrees_with(0.25, 4.0), "{est:?}");
    }

    #[test]
    fn deterministic_across_policies() {
        let s = circle_state_coeffs(1.1, 1e-12).unwrap();
        let run = |exec| {
            sample_sign_probability(&s, 0.7, Outcome::Plus, Outcome::Minus, 25_000, 9, exec).unwrap()
        };
        assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
    }

    #[test]
    fn normal_tail_values() {
        assert!((normal_upper_tail(1.0) - 0.158_655_253_931_457_05).abs() < 1e-12);
        assert!((normal_upper_tail(5.0) - 2.866_515_718_791_939e-7).abs() < 1e-18);
    }

    #[test]
    fn envelope_acceptance_is_high() {
        for r0 in [0.5, 1.1, 2.5] {
            let s = circle_state_coeffs(r0, 1e-12).unwrap();
            let sampler = JointDensitySampler::new(&s, 0.4).unwrap();
            // Ideal value is 1/(Σ c_n)²; the table adds its 5% pad per axis.
            let ideal = 1.0 / s.coefficients().iter().sum::<f64>().powi(2);
            assert!(sampler.acceptance() > 0.85 * ideal, "r0 {r0}: {} vs {ideal}", sampler.acceptance());
        }
    }

    #[test]
    fn rejects_empty_run() {
        let s = circle_state_coeffs(1.1, 1e-12).unwrap();
        assert!(sample_sign_probability(&s, 0.0, Outcome::Plus, Outcome::Plus, 0, 1, Execution::Sequential).is_err());
    }
}
