//! Number-basis representation of the circle state and the oscillator
//! eigenfunctions in the convention where the vacuum quadrature variance is 1.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::special::ln_factorial;

/// Default bound on the discarded weight `Σ_{n > N_c} c_n²`.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Largest number-state index any representation is allowed to reach.
pub const HARD_CUTOFF_CAP: usize = 256;

/// `(2π)^{-1/4}`, the value of the vacuum wavefunction at the origin.
pub const VACUUM_PEAK: f64 = 0.631_618_777_746_064_7;

/// Normalised coefficients of `Σ c_n |n, n⟩`, `c_n ∝ r0^{2n} / n!`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircleStateCoeffs {
    r0: f64,
    cutoff: usize,
    c: Vec<f64>,
    tail_bound: f64,
    ln_normalizer: f64,
}

impl CircleStateCoeffs {
    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// `c_0 ..= c_{cutoff}`, normalised so that `Σ c_n² = 1`.
    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    /// Weight discarded by the truncation, relative to the untruncated state.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// The untruncated normaliser `Σ_k r0^{4k} / (k!)²`, i.e. `I_0(2 r0²)`.
    pub fn normalizer(&self) -> f64 {
        self.ln_normalizer.exp()
    }

    /// Mean photon number per mode, `Σ n c_n²`.
    pub fn mean_photon_number(&self) -> f64 {
        self.c.iter().enumerate().map(|(n, c)| n as f64 * c * c).sum()
    }

    pub fn basis(&self) -> OscillatorBasis {
        OscillatorBasis::new(self.cutoff).expect("cutoff already validated")
    }

    /// Same state with an explicit cutoff instead of the tail rule.
    pub fn with_cutoff(r0: f64, cutoff: usize) -> Result<Self> {
        validate_r0(r0)?;
        if cutoff > HARD_CUTOFF_CAP {
            return invalid(format!("cutoff {cutoff} above the cap {HARD_CUTOFF_CAP}"));
        }
        let weights = SquaredWeights::new(r0, cutoff);
        Ok(weights.truncate(cutoff))
    }
}

fn validate_r0(r0: f64) -> Result<()> {
    if !r0.is_finite() || r0 < 0.0 {
        return invalid(format!("r0 must be finite and non-negative, got {r0}"));
    }
    Ok(())
}

/// Un-normalised `w_n = r0^{4n} / (n!)²`, scaled by `exp(-ln_scale)`.
struct SquaredWeights {
    r0: f64,
    w: Vec<f64>,
    ln_scale: f64,
    total: f64,
}

impl SquaredWeights {
    /// Keeps at least `min_len + 1` terms and sums the series to convergence.
    fn new(r0: f64, min_len: usize) -> Self {
        if r0 == 0.0 {
            let mut w = vec![0.0; min_len + 1];
            w[0] = 1.0;
            return Self {
                r0,
                w,
                ln_scale: 0.0,
                total: 1.0,
            };
        }
        let ln_r0 = r0.ln();
        let ln_w = |n: usize| 4.0 * n as f64 * ln_r0 - 2.0 * ln_factorial(n);
        // The terms peak at n ≈ r0² and decay faster than geometrically past it.
        let peak = (r0 * r0).floor() as usize;
        let ln_scale = ln_w(peak).max(ln_w(peak + 1));
        let mut w = Vec::new();
        let mut total = 0.0;
        let mut n = 0;
        loop {
            let t = (ln_w(n) - ln_scale).exp();
            w.push(t);
            total += t;
            if n >= min_len && n > peak && t < total * 1e-20 {
                break;
            }
            n += 1;
        }
        Self {
            r0,
            w,
            ln_scale,
            total,
        }
    }

    /// Discarded weight beyond index `n`, summed from the far end.
    fn tails(&self) -> Vec<f64> {
        let mut tails = vec![0.0; self.w.len()];
        let mut acc = 0.0;
        for n in (0..self.w.len()).rev() {
            tails[n] = acc / self.total;
            acc += self.w[n];
        }
        tails
    }

    fn truncate(&self, cutoff: usize) -> CircleStateCoeffs {
        let tail = self.tails()[cutoff];
        let kept: f64 = self.w[..=cutoff].iter().sum();
        let c = self.w[..=cutoff]
            .iter()
            .map(|w| (w / kept).sqrt())
            .collect();
        CircleStateCoeffs {
            r0: self.r0,
            cutoff,
            c,
            tail_bound: tail,
            ln_normalizer: self.total.ln() + self.ln_scale,
        }
    }
}

/// Builds the circle state with the smallest cutoff whose discarded weight is
/// below `tail_tol`, within [`HARD_CUTOFF_CAP`].
pub fn circle_state_coeffs(r0: f64, tail_tol: f64) -> Result<CircleStateCoeffs> {
    circle_state_coeffs_capped(r0, tail_tol, HARD_CUTOFF_CAP)
}

pub fn circle_state_coeffs_capped(r0: f64, tail_tol: f64, cap: usize) -> Result<CircleStateCoeffs> {
    validate_r0(r0)?;
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return invalid(format!("tail_tol must lie in (0, 1), got {tail_tol}"));
    }
    let cap = cap.min(HARD_CUTOFF_CAP);
    if r0 * r0 > 2.0 * HARD_CUTOFF_CAP as f64 {
        // The weight peaks near n = r0², far past any admissible cutoff.
        return Err(Error::Truncation {
            r0,
            cap,
            tail: 1.0,
            tol: tail_tol,
        });
    }
    let weights = SquaredWeights::new(r0, 0);
    let tails = weights.tails();
    match tails.iter().position(|&t| t < tail_tol) {
        Some(cutoff) if cutoff <= cap => Ok(weights.truncate(cutoff)),
        _ => Err(Error::Truncation {
            r0,
            cap,
            tail: tails.get(cap).copied().unwrap_or(0.0),
            tol: tail_tol,
        }),
    }
}

/// Eigenfunctions `ψ_n(x) = ⟨x|n⟩` of the quadrature `X = a + a†`.
///
/// `ψ_n(x) = (2π)^{-1/4} (2^n n!)^{-1/2} H_n(x/√2) e^{-x²/4}`, evaluated through
/// `√(n+1) ψ_{n+1} = x ψ_n - √n ψ_{n-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OscillatorBasis {
    cutoff: usize,
}

impl OscillatorBasis {
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff > HARD_CUTOFF_CAP {
            return invalid(format!("cutoff {cutoff} above the cap {HARD_CUTOFF_CAP}"));
        }
        Ok(Self { cutoff })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn eigenfunction(&self, n: usize, x: f64) -> Result<f64> {
        if n > self.cutoff {
            return invalid(format!("index {n} above cutoff {}", self.cutoff));
        }
        if !x.is_finite() {
            return invalid(format!("non-finite position {x}"));
        }
        let mut buf = vec![0.0; n + 1];
        fill_eigenfunctions(x, &mut buf);
        Ok(buf[n])
    }

    /// `ψ_0(x) ..= ψ_cutoff(x)`.
    pub fn eval_all(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.cutoff + 1];
        fill_eigenfunctions(x, &mut out);
        out
    }

    /// Values and first derivatives at the origin, `(ψ_n(0), ψ_n'(0))`.
    pub fn at_origin(&self) -> (Vec<f64>, Vec<f64>) {
        let mut psi = vec![0.0; self.cutoff + 2];
        fill_eigenfunctions(0.0, &mut psi);
        // d/dx = (a - a†)/2
        let dpsi = (0..=self.cutoff)
            .map(|n| {
                let down = if n > 0 { (n as f64).sqrt() * psi[n - 1] } else { 0.0 };
                0.5 * (down - ((n + 1) as f64).sqrt() * psi[n + 1])
            })
            .collect();
        psi.truncate(self.cutoff + 1);
        (psi, dpsi)
    }
}

/// Fills `out[n] = ψ_n(x)` for `n < out.len()`.
pub(crate) fn fill_eigenfunctions(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = VACUUM_PEAK * (-0.25 * x * x).exp();
    if out.len() > 1 {
        out[1] = x * out[0];
    }
    for n in 1..out.len().saturating_sub(1) {
        out[n + 1] = (x * out[n] - (n as f64).sqrt() * out[n - 1]) / ((n + 1) as f64).sqrt();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_limit() {
        let s = circle_state_coeffs(0.0, 1e-12).unwrap();
        assert_eq!(s.coefficients(), &[1.0]);
        assert_eq!(s.cutoff(), 0);
        assert_eq!(s.tail_bound(), 0.0);
    }

    #[test]
    fn c0_at_1_1() {
        // c_0 = I_0(2.42)^{-1/2}; the Bessel series summed directly.
        let z: f64 = 2.42;
        let mut term = 1.0;
        let mut i0 = 1.0;
        for k in 1..60 {
            term *= (z / 2.0).powi(2) / (k * k) as f64;
            i0 += term;
        }
        let s = circle_state_coeffs(1.1, 1e-12).unwrap();
        assert!((s.coefficients()[0] - i0.powf(-0.5)).abs() < 1e-12);
        assert!((s.coefficients()[0] - 0.568).abs() < 5e-4);
    }

    #[test]
    fn normalised_and_tail_below_tolerance() {
        for r0 in [0.0, 0.5, 1.1, 2.5, 4.0] {
            let s = circle_state_coeffs(r0, 1e-12).unwrap();
            let norm: f64 = s.coefficients().iter().map(|c| c * c).sum();
            assert!((norm - 1.0).abs() < 1e-12, "r0={r0}");
            assert!(s.tail_bound() < 1e-12);
            if s.cutoff() > 0 {
                // Minimal: one fewer term would violate the tolerance.
                let shorter = CircleStateCoeffs::with_cutoff(r0, s.cutoff() - 1).unwrap();
                assert!(shorter.tail_bound() >= 1e-12);
            }
        }
    }

    #[test]
    fn coefficient_ratio() {
        let r0: f64 = 2.5;
        let s = circle_state_coeffs(r0, 1e-12).unwrap();
        let c = s.coefficients();
        for n in 0..c.len() - 1 {
            let ratio = c[n + 1] / c[n];
            assert!((ratio - r0 * r0 / (n + 1) as f64).abs() < 1e-12 * ratio.max(1.0));
            assert!(c[n] > 0.0);
            if (n as f64) >= r0 * r0 {
                assert!(c[n + 1] < c[n]);
            }
        }
    }

    #[test]
    fn input_errors() {
        assert!(matches!(circle_state_coeffs(f64::NAN, 1e-12), Err(Error::InvalidInput(_))));
        assert!(matches!(circle_state_coeffs(-1.0, 1e-12), Err(Error::InvalidInput(_))));
        assert!(matches!(circle_state_coeffs(1.0, 0.0), Err(Error::InvalidInput(_))));
        assert!(matches!(circle_state_coeffs(1.0, 1.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn truncation_error_names_r0() {
        let err = circle_state_coeffs_capped(3.0, 1e-12, 10).unwrap_err();
        match &err {
            Error::Truncation { r0, cap, .. } => {
                assert_eq!(*r0, 3.0);
                assert_eq!(*cap, 10);
            }
            e => panic!("unexpected {e}"),
        }
        assert!(err.to_string().contains("r0 = 3"));
        // Beyond the hard cap regardless of the requested cap.
        assert!(circle_state_coeffs(16.0, 1e-12).is_err());
    }

    #[test]
    fn eigenfunction_values() {
        let b = OscillatorBasis::new(4).unwrap();
        assert_eq!(b.eigenfunction(1, 0.0).unwrap(), 0.0);
        assert!((b.eigenfunction(0, 0.0).unwrap() - (2.0 * std::f64::consts::PI).powf(-0.25)).abs() < 1e-15);
        assert!((b.eigenfunction(0, 0.0).unwrap() - 0.63162).abs() < 1e-5);
        // ψ_2 = (x² - 1)/√2 ψ_0
        let x = 0.7;
        let want = (x * x - 1.0) / 2f64.sqrt() * b.eigenfunction(0, x).unwrap();
        assert!((b.eigenfunction(2, x).unwrap() - want).abs() < 1e-15);
        assert!(b.eigenfunction(5, 0.0).is_err());
        assert!(b.eigenfunction(0, f64::INFINITY).is_err());
        assert!(OscillatorBasis::new(HARD_CUTOFF_CAP + 1).is_err());
    }

    #[test]
    fn derivative_at_origin() {
        let b = OscillatorBasis::new(6).unwrap();
        let (psi, dpsi) = b.at_origin();
        let h = 1e-5;
        for n in 0..=6 {
            let fd = (b.eigenfunction(n, h).unwrap() - b.eigenfunction(n, -h).unwrap()) / (2.0 * h);
            assert!((dpsi[n] - fd).abs() < 1e-9, "n={n}");
            assert_eq!(psi[n], b.eigenfunction(n, 0.0).unwrap());
        }
    }
}
