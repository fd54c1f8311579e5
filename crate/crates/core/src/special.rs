//! Log-factorials and friends.

use std::sync::OnceLock;

const TABLE_LEN: usize = 8192;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(TABLE_LEN);
        t.push(0.0);
        let mut acc = 0.0;
        for i in 1..TABLE_LEN {
            acc += (i as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln n!`, tabulated below 8192 and from the Stirling series above.
pub fn ln_factorial(n: usize) -> f64 {
    if n < TABLE_LEN {
        return ln_factorial_table()[n];
    }
    let x = (n + 1) as f64;
    // ln Γ(x), Stirling with three correction terms; relative error < 1e-16 here.
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x.powi(3))
        + 1.0 / (1260.0 * x.powi(5))
}

/// `ln Γ(k/2)` for a positive integer `k`.
pub fn ln_gamma_half(k: usize) -> f64 {
    assert!(k > 0, "ln Γ(0) is undefined");
    if k.is_multiple_of(2) {
        ln_factorial(k / 2 - 1)
    } else {
        // Γ(j + 1/2) = (2j)! √π / (4^j j!)
        let j = (k - 1) / 2;
        ln_factorial(2 * j) + 0.5 * std::f64::consts::PI.ln()
            - (j as f64) * 4f64.ln()
            - ln_factorial(j)
    }
}

/// `ln C(n, k)`.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Upper tail `P(X > k)` of a Poisson distribution with the given mean.
pub fn poisson_upper_tail(mean: f64, k: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    // Sum terms beyond k until they stop contributing.
    let ln_mean = mean.ln();
    let mut tail = 0.0;
    let mut j = k + 1;
    loop {
        let term = (j as f64 * ln_mean - mean - ln_factorial(j)).exp();
        tail += term;
        if (j as f64) > mean && term <= tail * 1e-17 {
            break;
        }
        if term == 0.0 && (j as f64) > mean {
            break;
        }
        j += 1;
    }
    tail
}
