//! Elementary probability facts the analysis relies on.

use crate::bounds::binary_entropy;
use crate::error::AnalysisError;

/// `E[X^2] = np(1-p) + n^2 p^2` for `X ~ Bin(n, p)`.
pub fn second_moment_binomial(n: f64, p: f64) -> f64 {
    n * p * (1.0 - p) + n * n * p * p
}

/// `P[X >= (1+δ)μ] <= e^{-μδ²/3}` for `0 < δ <= 1`.
pub fn chernoff_upper(mu: f64, delta: f64) -> Result<f64, AnalysisError> {
    if !(delta > 0.0 && delta <= 1.0) || mu < 0.0 {
        return Err(AnalysisError::Domain(format!("Chernoff needs 0 < delta <= 1, got {delta}")));
    }
    Ok((-mu * delta * delta / 3.0).exp())
}

/// `E[XY] <= 3np E[Y]` for `X ~ Bin(n, p)`, valid when `n >= -3 ln(p)/p`.
pub fn product_expectation_bound(n: f64, p: f64, ey: f64) -> Result<f64, AnalysisError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(AnalysisError::Domain(format!("p = {p} outside (0, 1]")));
    }
    let need = -3.0 * p.ln() / p;
    if n < need {
        return Err(AnalysisError::GuardFailed(format!("n = {n} below -3 ln(p)/p = {need}")));
    }
    Ok(3.0 * n * p * ey)
}

/// The general form `E[Y](n e^{-np/3} + 2np)`, without a guard.
pub fn product_expectation_general(n: f64, p: f64, ey: f64) -> f64 {
    ey * (n * (-n * p / 3.0).exp() + 2.0 * n * p)
}

/// Both sides of `(1-x)^N < e^{-xN}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl DecayCheck {
    pub fn holds(&self) -> bool {
        self.lhs < self.rhs
    }
}

/// Evaluates both sides in log space. The strict inequality needs
/// `0 < x < 1` and `N > 0`; at `x = 0` the sides are equal.
pub fn exp_decay_check(x: f64, n: f64) -> Result<DecayCheck, AnalysisError> {
    if !(x > 0.0 && x < 1.0) || n <= 0.0 {
        return Err(AnalysisError::Domain(format!("need 0 < x < 1 and N > 0, got x={x}, N={n}")));
    }
    Ok(DecayCheck {
        lhs: n * (-x).ln_1p(),
        rhs: -x * n,
    })
}

/// `ln C(n, k)`, exact for `n <= 60` and by log-gamma beyond.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    assert!(k <= n);
    if n <= 60 {
        let k = k.min(n - k);
        let mut c: u128 = 1;
        for j in 0..k {
            c = c * (n - j) as u128 / (j + 1) as u128;
        }
        (c as f64).ln()
    } else {
        statrs::function::factorial::ln_binomial(n, k)
    }
}

/// Both sides of `C(n, k) <= 2^{h(k/n) n}`, as natural logs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyBinom {
    pub ln_binom: f64,
    pub ln_bound: f64,
}

impl EntropyBinom {
    /// With a relative slack of `1e-12` for rounding at the endpoints.
    pub fn holds(&self) -> bool {
        self.ln_binom <= self.ln_bound + 1e-12 * self.ln_bound.abs().max(1.0)
    }
}

pub fn entropy_binom_bound(n: u64, k: u64) -> Result<EntropyBinom, AnalysisError> {
    if n == 0 || k > n {
        return Err(AnalysisError::Domain(format!("need 0 <= k <= n, n > 0, got n={n}, k={k}")));
    }
    Ok(EntropyBinom {
        ln_binom: ln_binomial(n, k),
        ln_bound: binary_entropy(k as f64 / n as f64)? * n as f64 * std::f64::consts::LN_2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(second_moment_binomial(10.0, 0.5), 27.5);
        let e = entropy_binom_bound(10, 5).unwrap();
        assert!((e.ln_binom.exp() - 252.0).abs() < 1e-9);
        assert!((e.ln_bound.exp() - 1024.0).abs() < 1e-9);
        assert!(e.holds());
        assert!((chernoff_upper(30.0, 1.0).unwrap() - (-10f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn guards() {
        assert!(chernoff_upper(1.0, 0.0).is_err());
        assert!(chernoff_upper(1.0, 1.5).is_err());
        assert!(exp_decay_check(0.0, 5.0).is_err());
        assert!(exp_decay_check(0.5, 0.0).is_err());
        // p = 0.1 needs n >= 30 ln 10 ≈ 69.08.
        assert!(matches!(product_expectation_bound(69.0, 0.1, 1.0), Err(AnalysisError::GuardFailed(_))));
        assert!((product_expectation_bound(70.0, 0.1, 2.0).unwrap() - 42.0).abs() < 1e-12);
        assert!(entropy_binom_bound(0, 0).is_err());
    }

    #[test]
    fn guarded_form_dominates_general_form() {
        for p in [0.5, 0.1, 0.01] {
            let n0 = (-3.0 * f64::ln(p) / p).ceil();
            for n in [n0, 2.0 * n0, 10.0 * n0] {
                assert!(product_expectation_general(n, p, 1.0) <= product_expectation_bound(n, p, 1.0).unwrap() + 1e-9);
            }
        }
    }

    #[test]
    fn ln_binomial_branches_agree() {
        let exact = ln_binomial(60, 30);
        let gamma = statrs::function::factorial::ln_binomial(60, 30);
        assert!((exact - gamma).abs() < 1e-9);
    }
}
