//! Signed scalars stored as sign plus natural-log magnitude.
//!
//! Products of row bounds overflow `f64` long before the matrices get
//! interesting (a 300-row Huber–Law bound is easily `1e500`), so bounds,
//! estimates and scale corrections travel as [`LogScale`].

use std::fmt;
use std::ops::{Div, Mul};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogScale {
    /// -1, 0 or 1.
    sign: i8,
    /// `ln |x|`; `-inf` when the value is zero.
    ln_abs: f64,
}

impl LogScale {
    pub const ZERO: LogScale = LogScale {
        sign: 0,
        ln_abs: f64::NEG_INFINITY,
    };
    pub const ONE: LogScale = LogScale {
        sign: 1,
        ln_abs: 0.0,
    };

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            LogScale {
                sign: if x > 0.0 { 1 } else { -1 },
                ln_abs: x.abs().ln(),
            }
        }
    }

    /// Positive value `exp(ln)`; `ln = -inf` gives zero.
    pub fn from_ln(ln: f64) -> Self {
        if ln == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogScale { sign: 1, ln_abs: ln }
        }
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// Natural log of the magnitude.
    pub fn ln(&self) -> f64 {
        self.ln_abs
    }

    pub fn log10(&self) -> f64 {
        self.ln_abs / std::f64::consts::LN_10
    }

    /// Plain value; saturates to `±inf` or `0` outside the `f64` range.
    ///
    /// The `exp(ln x)` round trip carries a relative error of about
    /// `ε (|ln x| + 1)`; an integer inside that window is returned exactly.
    pub fn to_f64(&self) -> f64 {
        let v = self.ln_abs.exp();
        let r = v.round();
        let window = 4.0 * f64::EPSILON * (self.ln_abs.abs() + 1.0) * v;
        let v = if r != 0.0 && r < 9.007_199_254_740_992e15 && (v - r).abs() <= window {
            r
        } else {
            v
        };
        f64::from(self.sign) * v
    }

    pub fn abs(&self) -> Self {
        LogScale {
            sign: self.sign.abs(),
            ln_abs: self.ln_abs,
        }
    }

    pub fn powi(&self, k: i32) -> Self {
        if self.is_zero() {
            return if k == 0 { Self::ONE } else { Self::ZERO };
        }
        LogScale {
            sign: if self.sign < 0 && k % 2 != 0 { -1 } else { 1 },
            ln_abs: self.ln_abs * f64::from(k),
        }
    }

    /// Sum of two values, computed in the log domain.
    pub fn add(&self, other: &LogScale) -> LogScale {
        if self.is_zero() {
            return *other;
        }
        if other.is_zero() {
            return *self;
        }
        let (big, small) = if self.ln_abs >= other.ln_abs {
            (self, other)
        } else {
            (other, self)
        };
        let r = (small.ln_abs - big.ln_abs).exp();
        if big.sign == small.sign {
            LogScale {
                sign: big.sign,
                ln_abs: big.ln_abs + r.ln_1p(),
            }
        } else if r == 1.0 {
            Self::ZERO
        } else {
            LogScale {
                sign: big.sign,
                ln_abs: big.ln_abs + (-r).ln_1p(),
            }
        }
    }

    /// Relative difference `|a - b| / max(|a|, |b|)` of two positive values.
    pub fn rel_diff(&self, other: &LogScale) -> f64 {
        if self.is_zero() && other.is_zero() {
            return 0.0;
        }
        if self.sign != other.sign {
            return if self.is_zero() || other.is_zero() { 1.0 } else { 2.0 };
        }
        -(-(self.ln_abs - other.ln_abs).abs()).exp_m1()
    }
}

impl Mul for LogScale {
    type Output = LogScale;

    fn mul(self, rhs: LogScale) -> LogScale {
        if self.is_zero() || rhs.is_zero() {
            return Self::ZERO;
        }
        LogScale {
            sign: self.sign * rhs.sign,
            ln_abs: self.ln_abs + rhs.ln_abs,
        }
    }
}

impl Div for LogScale {
    type Output = LogScale;

    fn div(self, rhs: LogScale) -> LogScale {
        assert!(!rhs.is_zero(), "division by zero LogScale");
        if self.is_zero() {
            return Self::ZERO;
        }
        LogScale {
            sign: self.sign * rhs.sign,
            ln_abs: self.ln_abs - rhs.ln_abs,
        }
    }
}

impl From<f64> for LogScale {
    fn from(x: f64) -> Self {
        LogScale::from_f64(x)
    }
}

impl fmt::Debug for LogScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LogScale({}exp({}))", if self.sign < 0 { "-" } else { "" }, self.ln_abs)
    }
}

impl fmt::Display for LogScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let l10 = self.log10();
        if l10.abs() < 300.0 {
            write!(f, "{:e}", self.to_f64())
        } else {
            let e = l10.floor();
            let m = 10f64.powf(l10 - e);
            let s = if self.sign < 0 { "-" } else { "" };
            write!(f, "{s}{m:.6}e{e}")
        }
    }
}
