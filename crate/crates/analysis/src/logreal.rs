//! Non-negative reals stored by their natural logarithm.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul};

/// A non-negative real `e^ln`. Products of huge and tiny factors stay exact
/// in the exponent where plain `f64` would overflow or flush to zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogReal {
    ln: f64,
}

impl LogReal {
    pub const ZERO: LogReal = LogReal { ln: f64::NEG_INFINITY };
    pub const ONE: LogReal = LogReal { ln: 0.0 };

    /// `x` must be non-negative.
    pub fn new(x: f64) -> Self {
        debug_assert!(x >= 0.0, "negative value {x}");
        LogReal { ln: x.ln() }
    }

    pub fn from_ln(ln: f64) -> Self {
        LogReal { ln }
    }

    /// `e^x`.
    pub fn exp(x: f64) -> Self {
        LogReal { ln: x }
    }

    /// `2^x`.
    pub fn exp2(x: f64) -> Self {
        LogReal {
            ln: x * std::f64::consts::LN_2,
        }
    }

    pub fn ln(self) -> f64 {
        self.ln
    }

    pub fn log10(self) -> f64 {
        self.ln / std::f64::consts::LN_10
    }

    /// The value as `f64`; may underflow to 0 or overflow to infinity.
    pub fn value(self) -> f64 {
        self.ln.exp()
    }

    pub fn powf(self, k: f64) -> Self {
        if self.ln == f64::NEG_INFINITY {
            return if k == 0.0 { Self::ONE } else { Self::ZERO };
        }
        LogReal { ln: self.ln * k }
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }
}

impl Mul for LogReal {
    type Output = LogReal;
    fn mul(self, o: LogReal) -> LogReal {
        if self.ln == f64::NEG_INFINITY || o.ln == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        LogReal { ln: self.ln + o.ln }
    }
}

impl Div for LogReal {
    type Output = LogReal;
    fn div(self, o: LogReal) -> LogReal {
        if self.ln == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        LogReal { ln: self.ln - o.ln }
    }
}

impl Add for LogReal {
    type Output = LogReal;
    fn add(self, o: LogReal) -> LogReal {
        let (hi, lo) = if self.ln >= o.ln { (self.ln, o.ln) } else { (o.ln, self.ln) };
        if lo == f64::NEG_INFINITY {
            return LogReal { ln: hi };
        }
        LogReal {
            ln: hi + (lo - hi).exp().ln_1p(),
        }
    }
}

impl PartialOrd for LogReal {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        self.ln.partial_cmp(&o.ln)
    }
}

impl From<f64> for LogReal {
    fn from(x: f64) -> Self {
        LogReal::new(x)
    }
}

impl fmt::Display for LogReal {
    /// Scientific notation that survives exponents beyond `f64` range.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ln == f64::NEG_INFINITY {
            return write!(f, "0");
        }
        let l = self.log10();
        let e = l.floor();
        let mant = 10f64.powf(l - e);
        write!(f, "{mant:.4}e{e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_matches_f64() {
        let a = LogReal::new(3.0);
        let b = LogReal::new(0.25);
        assert!(((a * b).value() - 0.75).abs() < 1e-12);
        assert!(((a / b).value() - 12.0).abs() < 1e-12);
        assert!(((a + b).value() - 3.25).abs() < 1e-12);
        assert!(((a + LogReal::ZERO).value() - 3.0).abs() < 1e-12);
        assert_eq!((a * LogReal::ZERO).value(), 0.0);
        assert!(((LogReal::exp2(10.0)).value() - 1024.0).abs() < 1e-9);
        assert!(b < a);
    }

    #[test]
    fn survives_underflow() {
        let tiny = LogReal::exp(-100_000.0);
        let big = LogReal::exp(99_990.0);
        assert_eq!(tiny.value(), 0.0);
        assert!(((tiny * big).value() - (-10f64).exp()).abs() < 1e-15);
        assert!(tiny.to_string().ends_with("e-43430"));
    }
}
