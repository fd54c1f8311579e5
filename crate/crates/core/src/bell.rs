//! The Clauser-Horne functional
//!
//! ```text
//! S = [P++(θ,φ) - P++(θ,φ') + P++(θ',φ) + P++(θ',φ')] / [P+(θ') + P+(φ)]
//! ```
//!
//! which every local hidden variable model keeps at or below 1.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::fock::{circle_state_coeffs, CircleStateCoeffs};
use crate::nelder_mead::{minimize, SimplexSettings};
use crate::quadrature::{SignProfile, SignStatistics};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellAngles {
    pub theta: f64,
    pub theta_p: f64,
    pub phi: f64,
    pub phi_p: f64,
}

impl BellAngles {
    /// `(θ, φ, θ', φ') = (0, -π/4, π/2, -3π/4)`.
    pub const PAPER: BellAngles = BellAngles {
        theta: 0.0,
        theta_p: FRAC_PI_2,
        phi: -FRAC_PI_4,
        phi_p: -3.0 * FRAC_PI_4,
    };

    pub fn new(theta: f64, phi: f64, theta_p: f64, phi_p: f64) -> Self {
        Self {
            theta,
            theta_p,
            phi,
            phi_p,
        }
    }

    /// The four angle sums entering the numerator, in order
    /// `θ+φ, θ+φ', θ'+φ, θ'+φ'`.
    pub fn chi_sums(&self) -> [f64; 4] {
        [
            self.theta + self.phi,
            self.theta + self.phi_p,
            self.theta_p + self.phi,
            self.theta_p + self.phi_p,
        ]
    }

    pub fn reduced(&self) -> ReducedAngles {
        let [chi1, chi2, chi3, _] = self.chi_sums();
        ReducedAngles { chi1, chi2, chi3 }
    }

    pub fn is_finite(&self) -> bool {
        [self.theta, self.theta_p, self.phi, self.phi_p]
            .iter()
            .all(|a| a.is_finite())
    }
}

/// `(χ₁, χ₂, χ₃) = (θ+φ, θ+φ', θ'+φ)`; the fourth sum is `χ₂ + χ₃ - χ₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedAngles {
    pub chi1: f64,
    pub chi2: f64,
    pub chi3: f64,
}

/// Wraps into `[-π, π)`.
pub fn wrap_angle(x: f64) -> f64 {
    x - TAU * ((x + PI) / TAU).floor()
}

impl ReducedAngles {
    pub fn new(chi1: f64, chi2: f64, chi3: f64) -> Self {
        Self { chi1, chi2, chi3 }
    }

    pub fn chi4(&self) -> f64 {
        self.chi2 + self.chi3 - self.chi1
    }

    /// A quadruple realising these sums, with `θ = 0`.
    pub fn to_angles(&self) -> BellAngles {
        BellAngles {
            theta: 0.0,
            phi: self.chi1,
            phi_p: self.chi2,
            theta_p: self.chi3 - self.chi1,
        }
    }

    fn wrapped(&self) -> Self {
        Self::new(wrap_angle(self.chi1), wrap_angle(self.chi2), wrap_angle(self.chi3))
    }

    /// Images under the operations that leave `S` unchanged for any state
    /// with `P++(χ) = P++(-χ)`: reversing every sum, and exchanging the roles
    /// of `χ₁` and `χ₄`. Each image is wrapped into `[-π, π)`.
    pub fn symmetry_images(&self) -> [ReducedAngles; 4] {
        let swapped = Self::new(self.chi4(), self.chi2, self.chi3);
        let neg = |r: &Self| Self::new(-r.chi1, -r.chi2, -r.chi3);
        [
            self.wrapped(),
            swapped.wrapped(),
            neg(self).wrapped(),
            neg(&swapped).wrapped(),
        ]
    }

    /// Representative with `χ₁ ∈ [0, π)` and, where possible, `χ₂ ≥ χ₁`.
    pub fn canonical(&self) -> ReducedAngles {
        let images = self.symmetry_images();
        let first_half = |r: &&ReducedAngles| (0.0..PI).contains(&r.chi1);
        images
            .iter()
            .find(|r| first_half(r) && r.chi2 >= r.chi1)
            .or_else(|| images.iter().find(first_half))
            .copied()
            .unwrap_or(images[0])
    }

    /// Largest per-coordinate circular distance to `other`, minimised over
    /// the symmetry images of `self`.
    pub fn distance_mod_symmetry(&self, other: &ReducedAngles) -> f64 {
        let circ = |a: f64, b: f64| wrap_angle(a - b).abs();
        self.symmetry_images()
            .iter()
            .map(|r| {
                circ(r.chi1, other.chi1)
                    .max(circ(r.chi2, other.chi2))
                    .max(circ(r.chi3, other.chi3))
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BellResult {
    pub r0: f64,
    pub s: f64,
    /// `P++` at `θ+φ, θ+φ', θ'+φ, θ'+φ'`.
    pub p_pp: [f64; 4],
    /// `P+(θ') + P+(φ)`.
    pub denominator: f64,
    pub angles: BellAngles,
}

impl BellResult {
    pub fn violates(&self) -> bool {
        self.s > 1.0
    }
}

pub fn bell_s_with<S: SignStatistics + ?Sized>(stats: &S, angles: &BellAngles) -> BellResult {
    let chis = angles.chi_sums();
    let p_pp = chis.map(|chi| stats.joint_plus(chi));
    let denominator = stats.marginal_plus_a(angles.theta_p) + stats.marginal_plus_b(angles.phi);
    BellResult {
        r0: stats.r0(),
        s: (p_pp[0] - p_pp[1] + p_pp[2] + p_pp[3]) / denominator,
        p_pp,
        denominator,
        angles: *angles,
    }
}

/// `S` for ideal quadrature measurements on the circle state.
pub fn bell_s(coeffs: &CircleStateCoeffs, angles: &BellAngles) -> BellResult {
    bell_s_with(&SignProfile::ideal(coeffs), angles)
}

/// `S` evaluated directly from the three independent angle sums.
pub fn bell_s_reduced<S: SignStatistics + ?Sized>(stats: &S, r: &ReducedAngles) -> f64 {
    let num = stats.joint_plus(r.chi1) - stats.joint_plus(r.chi2)
        + stats.joint_plus(r.chi3)
        + stats.joint_plus(r.chi4());
    num / (stats.marginal_plus_a(r.chi3 - r.chi1) + stats.marginal_plus_b(r.chi1))
}

/// `S = 3 P++(π/4) - P++(3π/4)` over the computed denominator, valid at
/// [`BellAngles::PAPER`] for any state with `P++(χ) = P++(-χ)`.
pub fn paper_angle_s_with<S: SignStatistics + ?Sized>(stats: &S) -> BellResult {
    let p1 = stats.joint_plus(FRAC_PI_4);
    let p3 = stats.joint_plus(3.0 * FRAC_PI_4);
    let angles = BellAngles::PAPER;
    let denominator = stats.marginal_plus_a(angles.theta_p) + stats.marginal_plus_b(angles.phi);
    BellResult {
        r0: stats.r0(),
        s: (3.0 * p1 - p3) / denominator,
        p_pp: [p1, p3, p1, p1],
        denominator,
        angles,
    }
}

pub fn paper_angle_s(coeffs: &CircleStateCoeffs) -> BellResult {
    paper_angle_s_with(&SignProfile::ideal(coeffs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    /// Coarse grid points per axis over `[-π, π)`.
    pub grid_points: usize,
    /// Refinement stops once the simplex's spread in `S` is below this.
    pub tolerance: f64,
    /// ...and its diameter in radians is below this.
    pub angle_tolerance: f64,
    pub max_iterations: usize,
    /// Number of best coarse-grid local maxima refined.
    pub candidates: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            grid_points: 32,
            tolerance: 1e-10,
            angle_tolerance: 1e-7,
            max_iterations: 5000,
            candidates: 4,
        }
    }
}

impl OptimizerSettings {
    fn validate(&self) -> Result<()> {
        if self.grid_points < 4 {
            return invalid("optimizer needs at least 4 grid points per axis");
        }
        if !(self.tolerance > 0.0 && self.angle_tolerance > 0.0) {
            return invalid("optimizer tolerances must be positive");
        }
        if self.max_iterations == 0 || self.candidates == 0 {
            return invalid("optimizer needs a positive iteration budget and candidate count");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizedAngles {
    pub result: BellResult,
    /// Canonical representative of the optimum.
    pub reduced: ReducedAngles,
    /// Best value on the coarse grid, before refinement.
    pub grid_best: f64,
    /// False when the refinement hit `max_iterations`; the result is then
    /// the best point found so far.
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
}

/// Maximises `S` over all angle quadruples: exhaustive coarse grid in
/// `(χ₁, χ₂, χ₃)`, then simplex refinement from the best grid maxima.
pub fn optimize_angles_with<S: SignStatistics + ?Sized>(
    stats: &S,
    settings: &OptimizerSettings,
    exec: Execution,
) -> Result<OptimizedAngles> {
    settings.validate()?;
    let g = settings.grid_points;
    let nodes: Vec<f64> = (0..g).map(|i| -PI + TAU * i as f64 / g as f64).collect();
    // Sums and differences of grid angles fall back on the grid, so each
    // ingredient is needed at g points only.
    let pp: Vec<f64> = nodes.iter().map(|&x| stats.joint_plus(x)).collect();
    let ma: Vec<f64> = nodes.iter().map(|&x| stats.marginal_plus_a(x)).collect();
    let mb: Vec<f64> = nodes.iter().map(|&x| stats.marginal_plus_b(x)).collect();
    // Node k is -π + 2πk/g, so χ₄ = χ₂ + χ₃ - χ₁ is node j + k - i and
    // θ' = χ₃ - χ₁ is node k - i + g/2 (mod g, even g only).
    let value = |i: usize, j: usize, k: usize| {
        let num = pp[i] - pp[j] + pp[k] + pp[(j + k + g - i) % g];
        let den_a = if g.is_multiple_of(2) {
            ma[(k + g - i + g / 2) % g]
        } else {
            stats.marginal_plus_a(nodes[k] - nodes[i])
        };
        num / (den_a + mb[i])
    };
    let cube: Vec<Vec<f64>> = exec.map_collect(g, |i| {
        let mut plane = Vec::with_capacity(g * g);
        for j in 0..g {
            for k in 0..g {
                plane.push(value(i, j, k));
            }
        }
        plane
    });
    let at = |i: usize, j: usize, k: usize| cube[i % g][(j % g) * g + k % g];

    let mut maxima: Vec<(f64, [usize; 3])> = Vec::new();
    let mut grid_best = f64::NEG_INFINITY;
    for i in 0..g {
        for j in 0..g {
            for k in 0..g {
                let v = at(i, j, k);
                grid_best = grid_best.max(v);
                let neighbours = [
                    at(i + 1, j, k),
                    at(i + g - 1, j, k),
                    at(i, j + 1, k),
                    at(i, j + g - 1, k),
                    at(i, j, k + 1),
                    at(i, j, k + g - 1),
                ];
                if neighbours.iter().all(|&n| n <= v) {
                    maxima.push((v, [i, j, k]));
                }
            }
        }
    }
    maxima.sort_by(|a, b| b.0.total_cmp(&a.0));
    // A flat landscape marks every point as a maximum; the first few suffice.
    maxima.truncate(settings.candidates);

    let simplex = SimplexSettings {
        step: TAU / g as f64,
        ftol: settings.tolerance,
        xtol: settings.angle_tolerance,
        max_iterations: settings.max_iterations,
    };
    let refined = maxima
        .iter()
        .map(|(_, [i, j, k])| {
            let x0 = [nodes[*i], nodes[*j], nodes[*k]];
            minimize(
                |x| -bell_s_reduced(stats, &ReducedAngles::new(x[0], x[1], x[2])),
                &x0,
                simplex,
            )
        })
        .collect::<Vec<_>>();
    let best = refined
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one candidate");
    let reduced = ReducedAngles::new(best.x[0], best.x[1], best.x[2]).canonical();
    let result = bell_s_with(stats, &reduced.to_angles());
    Ok(OptimizedAngles {
        result,
        reduced,
        grid_best,
        converged: best.converged,
        iterations: refined.iter().map(|m| m.iterations).sum(),
        evaluations: refined.iter().map(|m| m.evaluations).sum::<usize>() + g * g * g,
    })
}

pub fn optimize_angles(
    coeffs: &CircleStateCoeffs,
    settings: &OptimizerSettings,
    exec: Execution,
) -> Result<OptimizedAngles> {
    optimize_angles_with(&SignProfile::ideal(coeffs), settings, exec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleMode {
    Paper,
    Optimized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub r0_min: f64,
    pub r0_max: f64,
    pub step: f64,
    pub mode: AngleMode,
    pub tail_tol: f64,
    pub optimizer: OptimizerSettings,
    /// Bisection tolerance on the violation-window endpoints.
    pub window_tolerance: f64,
}

impl SweepSettings {
    pub fn new(r0_min: f64, r0_max: f64, step: f64, mode: AngleMode) -> Self {
        Self {
            r0_min,
            r0_max,
            step,
            mode,
            tail_tol: crate::fock::DEFAULT_TAIL_TOL,
            optimizer: OptimizerSettings::default(),
            window_tolerance: 1e-4,
        }
    }

    pub fn r0_values(&self) -> Vec<f64> {
        let n = ((self.r0_max - self.r0_min) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.r0_min + i as f64 * self.step).collect()
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.r0_min, self.r0_max, self.step, self.window_tolerance]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.r0_min < 0.0 || self.r0_min >= self.r0_max || self.step <= 0.0 {
            return invalid(format!(
                "sweep needs 0 <= r0_min < r0_max and step > 0, got {}:{}:{}",
                self.r0_min, self.r0_max, self.step
            ));
        }
        if self.window_tolerance <= 0.0 {
            return invalid("window tolerance must be positive");
        }
        Ok(())
    }

    fn evaluate(&self, r0: f64) -> Result<BellResult> {
        let coeffs = circle_state_coeffs(r0, self.tail_tol)?;
        Ok(match self.mode {
            AngleMode::Paper => paper_angle_s(&coeffs),
            AngleMode::Optimized => {
                optimize_angles(&coeffs, &self.optimizer, Execution::Sequential)?.result
            }
        })
    }
}

/// A maximal r0 interval on which `S > 1`. An open side means the interval
/// reaches the edge of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ViolationWindow {
    pub lower: f64,
    pub upper: f64,
    pub lower_open: bool,
    pub upper_open: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub settings: SweepSettings,
    pub points: Vec<BellResult>,
    pub windows: Vec<ViolationWindow>,
}

impl SweepReport {
    pub fn argmax(&self) -> &BellResult {
        self.points
            .iter()
            .max_by(|a, b| a.s.total_cmp(&b.s))
            .expect("sweep has at least one point")
    }
}

/// Bisects on `S(r0) - 1` between a non-violating and a violating r0.
fn bisect_crossing(settings: &SweepSettings, mut inside: f64, mut outside: f64) -> Result<f64> {
    while (inside - outside).abs() > settings.window_tolerance {
        let mid = 0.5 * (inside + outside);
        if settings.evaluate(mid)?.violates() {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    Ok(0.5 * (inside + outside))
}

pub fn sweep_r0(settings: &SweepSettings, exec: Execution) -> Result<SweepReport> {
    settings.validate()?;
    let r0s = settings.r0_values();
    let points = exec.try_map_collect(r0s.len(), |i| settings.evaluate(r0s[i]))?;

    let mut windows = Vec::new();
    let mut i = 0;
    while i < points.len() {
        if !points[i].violates() {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < points.len() && points[i + 1].violates() {
            i += 1;
        }
        let end = i;
        let (lower, lower_open) = if start == 0 {
            (r0s[0], true)
        } else {
            (bisect_crossing(settings, r0s[start], r0s[start - 1])?, false)
        };
        let (upper, upper_open) = if end + 1 == points.len() {
            (r0s[end], true)
        } else {
            (bisect_crossing(settings, r0s[end], r0s[end + 1])?, false)
        };
        windows.push(ViolationWindow {
            lower,
            upper,
            lower_open,
            upper_open,
        });
        i += 1;
    }
    Ok(SweepReport {
        settings: *settings,
        points,
        windows,
    })
}
