//! Joint quadrature statistics of the circle state.
//!
//! For measurement angles `θ` at A and `φ` at B the joint amplitude is
//! `Σ_n c_n e^{-in(θ+φ)} ψ_n(x) ψ_n(y)`, so every statistic depends on the
//! angles only through `χ = θ + φ`.

use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::fock::{fill_eigenfunctions, CircleStateCoeffs, OscillatorBasis, HARD_CUTOFF_CAP};
use crate::integrate::GaussLegendre;
use crate::matrix::SymMatrix;

/// Sign classification of a measurement result; `0` counts as `Plus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    #[inline]
    pub fn of(value: f64) -> Self {
        if value >= 0.0 {
            Outcome::Plus
        } else {
            Outcome::Minus
        }
    }
}

/// Half-range overlaps `K[n][m] = ∫_0^∞ ψ_n(x) ψ_m(x) dx`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapMatrix {
    cutoff: usize,
    k: SymMatrix,
}

impl OverlapMatrix {
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.k.get(n, m)
    }

    pub fn as_matrix(&self) -> &SymMatrix {
        &self.k
    }

    /// Overlaps over the negative half-line, `δ_{nm} - K[n][m]`.
    pub fn complement(&self) -> SymMatrix {
        SymMatrix::from_upper(self.cutoff + 1, |n, m| {
            if n == m {
                1.0 - self.get(n, m)
            } else {
                -self.get(n, m)
            }
        })
    }

    /// Matrix of the projector onto `outcome` for a site measured at angle 0.
    pub fn projector(&self, outcome: Outcome) -> SymMatrix {
        match outcome {
            Outcome::Plus => self.k.clone(),
            Outcome::Minus => self.complement(),
        }
    }
}

/// Closed form: for `n - m` odd, integrating `ψ_m Hψ_n - ψ_n Hψ_m` over the
/// half-line leaves only the boundary term at the origin,
/// `K[n][m] = (ψ_m(0) ψ_n'(0) - ψ_n(0) ψ_m'(0)) / (n - m)`.
/// Even differences vanish by parity and the diagonal is exactly 1/2.
fn overlaps_closed_form(cutoff: usize) -> SymMatrix {
    let basis = OscillatorBasis::new(cutoff).expect("cutoff within cap");
    let (psi, dpsi) = basis.at_origin();
    SymMatrix::from_upper(cutoff + 1, |n, m| {
        if n == m {
            0.5
        } else if (m - n) % 2 == 0 {
            0.0
        } else {
            (psi[m] * dpsi[n] - psi[n] * dpsi[m]) / (n as f64 - m as f64)
        }
    })
}

fn overlap_cache() -> &'static SymMatrix {
    static CACHE: OnceLock<SymMatrix> = OnceLock::new();
    CACHE.get_or_init(|| overlaps_closed_form(HARD_CUTOFF_CAP))
}

pub fn half_range_overlaps(cutoff: usize) -> Result<OverlapMatrix> {
    if cutoff > HARD_CUTOFF_CAP {
        return invalid(format!("cutoff {cutoff} above the cap {HARD_CUTOFF_CAP}"));
    }
    Ok(OverlapMatrix {
        cutoff,
        k: overlap_cache().leading(cutoff + 1),
    })
}

/// Sign-binned statistics of a two-site measurement on the circle state.
pub trait SignStatistics: Sync {
    fn r0(&self) -> f64;
    /// `P++` for angle sum `chi = θ + φ`.
    fn joint_plus(&self, chi: f64) -> f64;
    /// `P+` at site A for angle `theta`.
    fn marginal_plus_a(&self, theta: f64) -> f64;
    /// `P+` at site B for angle `phi`.
    fn marginal_plus_b(&self, phi: f64) -> f64;
}

/// `P++(χ)` as a cosine series, `a_0 + 2 Σ_{d ≥ 1} a_d cos(dχ)` with
/// `a_d = Σ_n c_n c_{n+d} Π^A_{n,n+d} Π^B_{n,n+d}`.
///
/// `Π^A`, `Π^B` are the matrices of the sites' "result ≥ 0" projectors at
/// angle zero; the measurement angle only rotates them by `e^{i(n-m)θ}`, and
/// the circle state's reduced states are diagonal, so the marginals are
/// `Σ c_n² Π_{nn}` for every angle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignProfile {
    r0: f64,
    series: Vec<f64>,
    marginal_a: f64,
    marginal_b: f64,
}

impl SignProfile {
    pub fn from_kernels(coeffs: &CircleStateCoeffs, plus_a: &SymMatrix, plus_b: &SymMatrix) -> Self {
        let c = coeffs.coefficients();
        let len = c.len();
        assert!(
            plus_a.dim() >= len && plus_b.dim() >= len,
            "projector matrices smaller than the state cutoff"
        );
        let series = (0..len)
            .map(|d| {
                (0..len - d)
                    .map(|n| c[n] * c[n + d] * plus_a.get(n, n + d) * plus_b.get(n, n + d))
                    .sum()
            })
            .collect();
        let marginal = |k: &SymMatrix| (0..len).map(|n| c[n] * c[n] * k.get(n, n)).sum();
        Self {
            r0: coeffs.r0(),
            series,
            marginal_a: marginal(plus_a),
            marginal_b: marginal(plus_b),
        }
    }

    /// Ideal quadrature measurement at both sites.
    pub fn ideal(coeffs: &CircleStateCoeffs) -> Self {
        let k = half_range_overlaps(coeffs.cutoff()).expect("cutoff within cap");
        Self::from_kernels(coeffs, k.as_matrix(), k.as_matrix())
    }

    pub fn cosine_series(&self) -> &[f64] {
        &self.series
    }

    #[inline]
    pub fn eval(&self, chi: f64) -> f64 {
        let mut acc = 0.0;
        for (d, a) in self.series.iter().enumerate().skip(1).rev() {
            acc += a * (d as f64 * chi).cos();
        }
        self.series[0] + 2.0 * acc
    }
}

impl SignStatistics for SignProfile {
    fn r0(&self) -> f64 {
        self.r0
    }

    fn joint_plus(&self, chi: f64) -> f64 {
        self.eval(chi)
    }

    fn marginal_plus_a(&self, _theta: f64) -> f64 {
        self.marginal_a
    }

    fn marginal_plus_b(&self, _phi: f64) -> f64 {
        self.marginal_b
    }
}

/// `|Σ_n c_n e^{-inχ} ψ_n(x) ψ_n(y)|²`.
pub fn joint_density(coeffs: &CircleStateCoeffs, chi: f64, x: f64, y: f64) -> f64 {
    let len = coeffs.cutoff() + 1;
    let mut px = vec![0.0; len];
    let mut py = vec![0.0; len];
    fill_eigenfunctions(x, &mut px);
    fill_eigenfunctions(y, &mut py);
    let (re, im) = amplitude(coeffs.coefficients(), chi, &px, &py);
    re * re + im * im
}

#[inline]
fn amplitude(c: &[f64], chi: f64, px: &[f64], py: &[f64]) -> (f64, f64) {
    let mut re = 0.0;
    let mut im = 0.0;
    for n in 0..c.len() {
        let t = c[n] * px[n] * py[n];
        if t != 0.0 {
            let (s, co) = (n as f64 * chi).sin_cos();
            re += t * co;
            im -= t * s;
        }
    }
    (re, im)
}

/// Phase factors `c_n cos(nχ)`, `-c_n sin(nχ)` for repeated amplitude evaluation.
fn phased_coefficients(c: &[f64], chi: f64) -> (Vec<f64>, Vec<f64>) {
    c.iter()
        .enumerate()
        .map(|(n, &cn)| {
            let (s, co) = (n as f64 * chi).sin_cos();
            (cn * co, -cn * s)
        })
        .unzip()
}

/// Probability of the sign pair `(a, b)` by the double series over the
/// half-range overlaps.
pub fn joint_sign_prob(coeffs: &CircleStateCoeffs, chi: f64, a: Outcome, b: Outcome) -> f64 {
    let k = half_range_overlaps(coeffs.cutoff()).expect("cutoff within cap");
    let pa = k.projector(a);
    let pb = k.projector(b);
    let c = coeffs.coefficients();
    let mut total = 0.0;
    for n in 0..c.len() {
        for m in 0..c.len() {
            total += c[n] * c[m] * ((n as f64 - m as f64) * chi).cos() * pa.get(n, m) * pb.get(n, m);
        }
    }
    total
}

/// `P++(χ) = Σ_{n,m} c_n c_m cos((n-m)χ) K[n][m]²`.
pub fn joint_positive_prob(coeffs: &CircleStateCoeffs, chi: f64) -> f64 {
    joint_sign_prob(coeffs, chi, Outcome::Plus, Outcome::Plus)
}

/// `P+` at one site: `Σ_n c_n² K[n][n]`, which is 1/2 for every angle.
pub fn marginal_positive_prob(coeffs: &CircleStateCoeffs) -> f64 {
    let k = half_range_overlaps(coeffs.cutoff()).expect("cutoff within cap");
    coeffs
        .coefficients()
        .iter()
        .enumerate()
        .map(|(n, c)| c * c * k.get(n, n))
        .sum()
}

/// Sampling positions of one grid axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            min: -12.0,
            max: 12.0,
            points: 241,
        }
    }
}

impl GridSpec {
    pub fn new(min: f64, max: f64, points: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) || points < 2 {
            return invalid(format!("bad grid {min}:{max}:{points}"));
        }
        Ok(Self { min, max, points })
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.points - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.points).map(|i| self.min + i as f64 * h).collect()
    }
}

/// Joint density sampled on a rectangular grid; `values[i * ny + j]` is the
/// density at `(x_grid[i], y_grid[j])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointDensityGrid {
    pub chi: f64,
    pub x_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl JointDensityGrid {
    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.y_grid.len() + j]
    }

    /// Trapezoid-rule integral over the grid.
    pub fn trapezoid_mass(&self) -> f64 {
        let (nx, ny) = (self.x_grid.len(), self.y_grid.len());
        let weights = |g: &[f64]| -> Vec<f64> {
            let n = g.len();
            (0..n)
                .map(|i| {
                    let left = if i > 0 { g[i] - g[i - 1] } else { 0.0 };
                    let right = if i + 1 < n { g[i + 1] - g[i] } else { 0.0 };
                    0.5 * (left + right)
                })
                .collect()
        };
        let wx = weights(&self.x_grid);
        let wy = weights(&self.y_grid);
        let mut total = 0.0;
        for i in 0..nx {
            for j in 0..ny {
                total += wx[i] * wy[j] * self.value(i, j);
            }
        }
        total
    }

    /// Interior points not exceeded by any of their eight neighbours,
    /// largest first, as `(value, x, y)`.
    pub fn local_maxima(&self) -> Vec<(f64, f64, f64)> {
        let (nx, ny) = (self.x_grid.len(), self.y_grid.len());
        let mut out = Vec::new();
        for i in 1..nx.saturating_sub(1) {
            for j in 1..ny.saturating_sub(1) {
                let v = self.value(i, j);
                let is_max = (i - 1..=i + 1)
                    .flat_map(|a| (j - 1..=j + 1).map(move |b| (a, b)))
                    .all(|(a, b)| self.value(a, b) <= v);
                if is_max && v > 0.0 {
                    out.push((v, self.x_grid[i], self.y_grid[j]));
                }
            }
        }
        out.sort_by(|a, b| b.0.total_cmp(&a.0));
        out
    }

    /// Density along `y = -x` for square grids symmetric about zero, as
    /// `(x, value)` pairs.
    pub fn anti_diagonal(&self) -> Option<Vec<(f64, f64)>> {
        let n = self.x_grid.len();
        if self.y_grid.len() != n {
            return None;
        }
        let symmetric = (0..n).all(|i| (self.x_grid[i] + self.y_grid[n - 1 - i]).abs() < 1e-9);
        symmetric.then(|| (0..n).map(|i| (self.x_grid[i], self.value(i, n - 1 - i))).collect())
    }
}

/// Number of sign changes of the discrete slope along a profile, ignoring
/// flat steps.
pub fn slope_sign_changes(profile: &[f64]) -> usize {
    let signs: Vec<i8> = profile
        .windows(2)
        .filter_map(|w| {
            let d = w[1] - w[0];
            (d != 0.0).then_some(if d > 0.0 { 1 } else { -1 })
        })
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

pub fn density_grid(
    coeffs: &CircleStateCoeffs,
    chi: f64,
    xs: &GridSpec,
    ys: &GridSpec,
    exec: Execution,
) -> JointDensityGrid {
    let len = coeffs.cutoff() + 1;
    let x_grid = xs.nodes();
    let y_grid = ys.nodes();
    let table = |g: &[f64]| -> Vec<Vec<f64>> {
        g.iter()
            .map(|&x| {
                let mut v = vec![0.0; len];
                fill_eigenfunctions(x, &mut v);
                v
            })
            .collect()
    };
    let tx = table(&x_grid);
    let ty = table(&y_grid);
    let (cre, cim) = phased_coefficients(coeffs.coefficients(), chi);
    let rows = exec.map_collect(x_grid.len(), |i| {
        ty.iter()
            .map(|py| {
                let (mut re, mut im) = (0.0, 0.0);
                for n in 0..len {
                    let t = tx[i][n] * py[n];
                    re += cre[n] * t;
                    im += cim[n] * t;
                }
                re * re + im * im
            })
            .collect::<Vec<f64>>()
    });
    JointDensityGrid {
        chi,
        x_grid,
        y_grid,
        values: rows.concat(),
    }
}

/// Half-width beyond which every `ψ_n`, `n <= cutoff`, is negligible.
pub(crate) fn support_radius(cutoff: usize) -> f64 {
    2.0 * ((cutoff + 1) as f64).sqrt() + 14.0
}

fn half_line(outcome: Outcome, radius: f64) -> (f64, f64) {
    match outcome {
        Outcome::Plus => (0.0, radius),
        Outcome::Minus => (-radius, 0.0),
    }
}

/// Probability of the sign pair `(a, b)` by direct two-dimensional
/// Gauss-Legendre integration of [`joint_density`] over the quadrant.
///
/// Independent of the overlap kernel; used to cross-check the series.
pub fn quadrant_probability_by_integration(
    coeffs: &CircleStateCoeffs,
    chi: f64,
    a: Outcome,
    b: Outcome,
    exec: Execution,
) -> f64 {
    let len = coeffs.cutoff() + 1;
    let radius = support_radius(coeffs.cutoff());
    let rule = GaussLegendre::new(12);
    let panels = (radius / 0.5).ceil() as usize;
    let (xa, xb) = half_line(a, radius);
    let (ya, yb) = half_line(b, radius);
    let (xs, wx) = rule.composite_nodes(xa, xb, panels);
    let (ys, wy) = rule.composite_nodes(ya, yb, panels);
    let table = |g: &[f64]| -> Vec<Vec<f64>> {
        g.iter()
            .map(|&x| {
                let mut v = vec![0.0; len];
                fill_eigenfunctions(x, &mut v);
                v
            })
            .collect()
    };
    let tx = table(&xs);
    let ty = table(&ys);
    let (cre, cim) = phased_coefficients(coeffs.coefficients(), chi);
    let rows = exec.map_collect(xs.len(), |i| {
        let mut acc = 0.0;
        for (j, py) in ty.iter().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for n in 0..len {
                let t = tx[i][n] * py[n];
                re += cre[n] * t;
                im += cim[n] * t;
            }
            acc += wy[j] * (re * re + im * im);
        }
        wx[i] * acc
    });
    rows.iter().sum()
}

/// Single-site quadrature density `Σ_n c_n² ψ_n(x)²`, the same for every angle.
pub fn marginal_density(coeffs: &CircleStateCoeffs, x: f64) -> f64 {
    let mut psi = vec![0.0; coeffs.cutoff() + 1];
    fill_eigenfunctions(x, &mut psi);
    coeffs
        .coefficients()
        .iter()
        .zip(&psi)
        .map(|(c, p)| c * c * p * p)
        .sum()
}

/// Cumulative distribution of [`marginal_density`] at increasing `points`.
pub fn marginal_cdf(coeffs: &CircleStateCoeffs, points: &[f64]) -> Result<Vec<f64>> {
    if points.windows(2).any(|w| w[1] < w[0]) {
        return invalid("marginal_cdf points must be sorted");
    }
    let radius = support_radius(coeffs.cutoff());
    let rule = GaussLegendre::new(16);
    let mut out = Vec::with_capacity(points.len());
    let mut last = -radius;
    let mut acc = 0.0;
    for &p in points {
        let p = p.clamp(-radius, radius);
        if p > last {
            let panels = ((p - last) / 0.25).ceil().max(1.0) as usize;
            acc += rule.composite(last, p, panels, |x| marginal_density(coeffs, x));
            last = p;
        }
        out.push(acc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::circle_state_coeffs;
    use crate::integrate::adaptive;
    use std::f64::consts::{FRAC_PI_4, PI};

    #[test]
    fn overlap_examples() {
        let k = half_range_overlaps(4).unwrap();
        assert_eq!(k.get(0, 0), 0.5);
        assert!((k.get(0, 1) - (2.0 * PI).powf(-0.5)).abs() < 1e-15);
        assert!((k.get(0, 1) - 0.398942).abs() < 1e-6);
        assert_eq!(k.get(0, 2), 0.0);
        assert!(half_range_overlaps(HARD_CUTOFF_CAP + 1).is_err());
    }

    #[test]
    fn overlaps_match_adaptive_quadrature() {
        let basis = OscillatorBasis::new(40).unwrap();
        let k = half_range_overlaps(40).unwrap();
        for n in (0..=40).step_by(3) {
            for m in n..=40 {
                let want = adaptive(
                    |x| basis.eigenfunction(n, x).unwrap() * basis.eigenfunction(m, x).unwrap(),
                    0.0,
                    40.0,
                    1e-13,
                    5000,
                )
                .unwrap();
                assert!((k.get(n, m) - want).abs() < 1e-10, "K[{n}][{m}] = {} vs {want}", k.get(n, m));
            }
        }
    }

    #[test]
    fn vacuum_statistics() {
        let s = circle_state_coeffs(0.0, 1e-12).unwrap();
        for chi in [0.0, 0.3, PI] {
            assert!((joint_positive_prob(&s, chi) - 0.25).abs() < 1e-15);
            let d = joint_density(&s, chi, 0.4, -1.3);
            let want = (-(0.4f64.powi(2) + 1.3f64.powi(2)) / 2.0).exp() / (2.0 * PI);
            assert!((d - want).abs() < 1e-15);
        }
        assert_eq!(marginal_positive_prob(&s), 0.5);
    }

    #[test]
    fn complementary_kernel_sums_to_marginal() {
        for r0 in [0.5, 1.1, 2.5] {
            let s = circle_state_coeffs(r0, 1e-12).unwrap();
            for chi in [0.0, 0.7, 2.0] {
                let pp = joint_positive_prob(&s, chi);
                let pm = joint_sign_prob(&s, chi, Outcome::Plus, Outcome::Minus);
                assert!((pp + pm - 0.5).abs() < 1e-12);
                assert!((0.0..=0.5).contains(&pp));
            }
            assert!((marginal_positive_prob(&s) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn profile_matches_double_sum() {
        let s = circle_state_coeffs(1.7, 1e-12).unwrap();
        let profile = SignProfile::ideal(&s);
        for chi in [-2.0, -FRAC_PI_4, 0.0, 1.0, 3.0] {
            assert!((profile.eval(chi) - joint_positive_prob(&s, chi)).abs() < 1e-14);
        }
    }

    #[test]
    fn integration_matches_series() {
        let s = circle_state_coeffs(1.1, 1e-12).unwrap();
        let chi = FRAC_PI_4;
        let series = joint_positive_prob(&s, chi);
        let integral =
            quadrant_probability_by_integration(&s, chi, Outcome::Plus, Outcome::Plus, Execution::Parallel);
        assert!((series - integral).abs() < 1e-6, "{series} vs {integral}");
    }

    #[test]
    fn grid_examples() {
        let s = circle_state_coeffs(1.1, 1e-12).unwrap();
        let g = density_grid(&s, 0.0, &GridSpec::default(), &GridSpec::default(), Execution::Parallel);
        assert!((g.trapezoid_mass() - 1.0).abs() < 1e-6);
        assert!(g.values.iter().all(|&v| v >= 0.0));
        let n = g.x_grid.len();
        for i in (0..n).step_by(17) {
            for j in (0..n).step_by(13) {
                assert!((g.value(i, j) - g.value(j, i)).abs() < 1e-15);
            }
        }
        assert_eq!(g.anti_diagonal().unwrap().len(), n);
    }

    #[test]
    fn slope_changes() {
        assert_eq!(slope_sign_changes(&[0.0, 1.0, 0.0, 1.0, 1.0, 0.0]), 3);
        assert_eq!(slope_sign_changes(&[1.0, 2.0, 3.0]), 0);
    }

    #[test]
    fn vacuum_marginal_cdf() {
        let s = circle_state_coeffs(0.0, 1e-12).unwrap();
        let cdf = marginal_cdf(&s, &[-1.0, 0.0, 1.0]).unwrap();
        assert!((cdf[1] - 0.5).abs() < 1e-13);
        // Φ(1) - Φ(-1)
        assert!((cdf[2] - cdf[0] - 0.682_689_492_137_085_9).abs() < 1e-12);
        assert!(marginal_cdf(&s, &[1.0, 0.0]).is_err());
    }
}
