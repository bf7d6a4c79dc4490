//! Unbiased compression operators.
//!
//! Every operator satisfies `E[C(x)] = x` and `E|C(x) - x|^2 <= p |x|^2`
//! with `p` given by [`CompressorSpec::variance_parameter`]. All randomness
//! comes from the caller's [`RandomStream`].

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::Vector;

/// Bits used to send one full-precision scalar.
pub const FLOAT_BITS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompressorSpec {
    Identity,
    /// Stochastic `bits`-bit quantizer scaled by the infinity norm.
    QBit {
        bits: u32,
    },
    /// Keep `k` uniformly chosen coordinates, scaled by `n / k`.
    RandK {
        k: usize,
    },
}

impl CompressorSpec {
    /// Checks the spec against a vector dimension.
    pub fn validate(&self, dim: usize) -> Result<()> {
        match *self {
            CompressorSpec::Identity => Ok(()),
            CompressorSpec::QBit { bits } if (1..=52).contains(&bits) => Ok(()),
            CompressorSpec::QBit { bits } => {
                Err(Error::param(format!("qbit needs 1..=52 bits, got {bits}")))
            }
            CompressorSpec::RandK { k } if k >= 1 && k <= dim => Ok(()),
            CompressorSpec::RandK { k } => Err(Error::param(format!(
                "randk needs 1 <= k <= {dim}, got {k}"
            ))),
        }
    }

    pub fn compress(&self, x: &Vector, rng: &mut RandomStream) -> Result<Vector> {
        if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "cannot compress non-finite value {bad}"
            )));
        }
        self.validate(x.len())?;
        Ok(match *self {
            CompressorSpec::Identity => x.clone(),
            CompressorSpec::QBit { bits } => quantize(x, bits, rng),
            CompressorSpec::RandK { k } => rand_k(x, k, rng),
        })
    }

    /// Constant `p >= 1` bounding the relative second moment of the error.
    /// For `qbit` it is the loose bound `1 + n / 4^(b-1)`; it holds but is
    /// far from tight.
    pub fn variance_parameter(&self, dim: usize) -> f64 {
        match *self {
            CompressorSpec::Identity => 1.0,
            CompressorSpec::QBit { bits } => 1.0 + dim as f64 / 4f64.powi(bits as i32 - 1),
            CompressorSpec::RandK { k } => dim as f64 / k as f64,
        }
    }

    /// Size of one compressed `dim`-vector on the wire.
    pub fn payload_bits(&self, dim: usize) -> u64 {
        let n = dim as u64;
        match *self {
            CompressorSpec::Identity => FLOAT_BITS * n,
            CompressorSpec::QBit { bits } => FLOAT_BITS + n * u64::from(bits),
            CompressorSpec::RandK { k } => k as u64 * (FLOAT_BITS + index_bits(dim)),
        }
    }

    /// Error-feedback mixing weight `min(1, 1/p)`.
    pub fn default_eta(&self, dim: usize) -> f64 {
        (1.0 / self.variance_parameter(dim)).min(1.0)
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, CompressorSpec::Identity)
    }
}

/// `ceil(log2 n)`.
fn index_bits(n: usize) -> u64 {
    if n <= 1 {
        0
    } else {
        u64::from(usize::BITS - (n - 1).leading_zeros())
    }
}

fn quantize(x: &Vector, bits: u32, rng: &mut RandomStream) -> Vector {
    let scale = x.amax();
    if scale == 0.0 {
        return Vector::zeros(x.len());
    }
    let levels = 2f64.powi(bits as i32 - 1);
    x.map(|v| {
        let kappa = rng.uniform();
        let code = (levels * v.abs() / scale + kappa).floor();
        scale * v.signum() / levels * code
    })
}

fn rand_k(x: &Vector, k: usize, rng: &mut RandomStream) -> Vector {
    let n = x.len();
    let factor = n as f64 / k as f64;
    let mut out = Vector::zeros(n);
    for i in rng.subset(n, k) {
        out[i] = factor * x[i];
    }
    out
}

impl fmt::Display for CompressorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompressorSpec::Identity => f.write_str("none"),
            CompressorSpec::QBit { bits } => write!(f, "qbit:{bits}"),
            CompressorSpec::RandK { k } => write!(f, "randk:{k}"),
        }
    }
}

impl FromStr for CompressorSpec {
    type Err = Error;

    /// Accepts `none` (or `identity`), `qbit:B` and `randk:K`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |why: String| Error::Config(format!("bad compressor {s:?}: {why}"));
        match s.split_once(':') {
            None if s == "none" || s == "identity" => Ok(CompressorSpec::Identity),
            Some(("qbit", b)) => {
                let bits = b.parse::<u32>().map_err(|e| bad(e.to_string()))?;
                if !(1..=52).contains(&bits) {
                    return Err(bad("bits must be in 1..=52".into()));
                }
                Ok(CompressorSpec::QBit { bits })
            }
            Some(("randk", k)) => {
                let k = k.parse::<usize>().map_err(|e| bad(e.to_string()))?;
                if k == 0 {
                    return Err(bad("k must be positive".into()));
                }
                Ok(CompressorSpec::RandK { k })
            }
            _ => Err(bad("expected none, qbit:B or randk:K".into())),
        }
    }
}
