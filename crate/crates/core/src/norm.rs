//! Weighted discrete L^p norms.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Norm index `p`, either a finite `p >= 1` or infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NormRepr", into = "NormRepr")]
pub enum Norm {
    P(f64),
    Inf,
}

impl Norm {
    pub const L1: Norm = Norm::P(1.0);
    pub const L2: Norm = Norm::P(2.0);

    pub fn new(p: f64) -> Result<Self, String> {
        if p.is_infinite() && p > 0.0 {
            Ok(Norm::Inf)
        } else if p.is_finite() && p >= 1.0 {
            Ok(Norm::P(p))
        } else {
            Err(format!("norm index must be >= 1, got {p}"))
        }
    }

    /// The index as an `f64` (`inf` for the sup norm).
    pub fn value(self) -> f64 {
        match self {
            Norm::P(p) => p,
            Norm::Inf => f64::INFINITY,
        }
    }

    /// `(sum |v|^p * weight)^(1/p)`, or `max |v|` for the sup norm.
    pub fn weighted<I>(self, values: I, weight: f64) -> f64
    where
        I: IntoIterator<Item = f64>,
    {
        match self {
            Norm::Inf => values.into_iter().fold(0.0, |m, v| m.max(v.abs())),
            Norm::P(p) if p == 1.0 => values.into_iter().map(f64::abs).sum::<f64>() * weight,
            Norm::P(p) if p == 2.0 => (values.into_iter().map(|v| v * v).sum::<f64>() * weight).sqrt(),
            Norm::P(p) => {
                let s: f64 = values.into_iter().map(|v| v.abs().powf(p)).sum();
                (s * weight).powf(1.0 / p)
            }
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Norm::P(p) => write!(f, "{p}"),
            Norm::Inf => f.write_str("inf"),
        }
    }
}

impl FromStr for Norm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "Inf" | "infinity" | "∞" => Ok(Norm::Inf),
            other => other
                .parse::<f64>()
                .map_err(|_| format!("cannot parse norm index `{other}`"))
                .and_then(Norm::new),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NormRepr {
    Num(f64),
    Text(String),
}

impl TryFrom<NormRepr> for Norm {
    type Error = String;

    fn try_from(r: NormRepr) -> Result<Self, Self::Error> {
        match r {
            NormRepr::Num(p) => Norm::new(p),
            NormRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Norm> for NormRepr {
    fn from(n: Norm) -> Self {
        match n {
            Norm::P(p) => NormRepr::Num(p),
            Norm::Inf => NormRepr::Text("inf".into()),
        }
    }
}
