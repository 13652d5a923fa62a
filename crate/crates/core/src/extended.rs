use std::cmp::Ordering;
use std::fmt;

/// A value on the extended real line. Efficiency atoms sit at ±∞ whenever the
/// absorbed heat of a path vanishes while its work does not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    NegInfinity,
    Finite(f64),
    PosInfinity,
}

impl ExtendedReal {
    /// Maps IEEE infinities onto the tagged variants so finite values never
    /// carry an infinite payload.
    pub fn from_f64(x: f64) -> Self {
        if x == f64::INFINITY {
            Self::PosInfinity
        } else if x == f64::NEG_INFINITY {
            Self::NegInfinity
        } else {
            Self::Finite(x)
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Self::Finite(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Self::Finite(_))
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Self::NegInfinity => f64::NEG_INFINITY,
            Self::Finite(x) => x,
            Self::PosInfinity => f64::INFINITY,
        }
    }

    /// Same infinity, or finite values within `tol`.
    pub fn approx_eq(self, other: Self, tol: f64) -> bool {
        match (self, other) {
            (Self::Finite(a), Self::Finite(b)) => (a - b).abs() <= tol,
            (Self::PosInfinity, Self::PosInfinity) | (Self::NegInfinity, Self::NegInfinity) => true,
            _ => false,
        }
    }

    pub fn total_cmp(&self, other: &Self) -> Ordering {
        self.to_f64().total_cmp(&other.to_f64())
    }
}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.to_f64().partial_cmp(&other.to_f64())
    }
}

impl From<f64> for ExtendedReal {
    fn from(x: f64) -> Self {
        Self::from_f64(x)
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NegInfinity => write!(f, "-inf"),
            Self::PosInfinity => write!(f, "+inf"),
            Self::Finite(x) => write!(f, "{x}"),
        }
    }
}
