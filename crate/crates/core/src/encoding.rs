//! Fixed-point mapping between reals and the Paillier plaintext ring.
//!
//! A value `x` is encoded as `round(x * base^exponent)` with ties rounded
//! away from zero. The product is formed exactly from the binary expansion of
//! the `f64`, so the result does not depend on floating-point rounding of the
//! multiplication. Negative results live in the upper half of `[0, n)`:
//! `-v` is stored as `n - v`. Anything whose magnitude reaches `n / 2` is an
//! overflow.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("scale base must be 2 or 10, got {0}")]
    UnsupportedBase(u32),
    #[error("scale {base}^{exponent} does not fit the plaintext space")]
    ScaleTooLarge { base: u32, exponent: u32 },
    #[error("no headroom: scale^2 * {dimension} must stay below n / 2")]
    InsufficientHeadroom { dimension: usize },
    #[error("cannot encode non-finite value {0}")]
    NonFinite(f64),
    #[error("|{0}| * scale reaches n / 2")]
    Overflow(f64),
    #[error("encoded value is not below the modulus")]
    OutOfRange,
}

/// The user-facing part of a codec: base and exponent, without the modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleConfig {
    #[serde(rename = "scale_base")]
    pub base: u32,
    #[serde(rename = "scale_exp")]
    pub exponent: u32,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        ScaleConfig { base: 10, exponent: 6 }
    }
}

impl ScaleConfig {
    pub fn validate(&self) -> Result<(), CodecError> {
        if self.base != 2 && self.base != 10 {
            return Err(CodecError::UnsupportedBase(self.base));
        }
        if !self.scale_f64().is_finite() {
            return Err(CodecError::ScaleTooLarge { base: self.base, exponent: self.exponent });
        }
        Ok(())
    }

    pub fn scale(&self) -> BigUint {
        BigUint::from(self.base).pow(self.exponent)
    }

    pub fn scale_f64(&self) -> f64 {
        (self.base as f64).powi(self.exponent as i32)
    }

    /// One quantization step, `base^-exponent`.
    pub fn resolution(&self) -> f64 {
        1.0 / self.scale_f64()
    }

    /// Whether a key of `key_bits` bits is guaranteed to leave room for
    /// `scale^2 * dimension` below `n / 2`. Any such modulus is at least
    /// `2^(key_bits - 1)`.
    pub fn fits_key_bits(&self, key_bits: u64, dimension: usize) -> bool {
        if key_bits < 2 {
            return false;
        }
        let scale = self.scale();
        let need = &scale * &scale * BigUint::from(dimension.max(1)) * 2u32;
        need < BigUint::one() << (key_bits - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointCodec {
    config: ScaleConfig,
    modulus: BigUint,
    scale: BigUint,
}

impl FixedPointCodec {
    pub fn new(base: u32, exponent: u32, modulus: BigUint) -> Result<Self, CodecError> {
        Self::from_config(ScaleConfig { base, exponent }, modulus)
    }

    pub fn from_config(config: ScaleConfig, modulus: BigUint) -> Result<Self, CodecError> {
        config.validate()?;
        let scale = config.scale();
        if &scale * 2u32 >= modulus {
            return Err(CodecError::ScaleTooLarge { base: config.base, exponent: config.exponent });
        }
        Ok(FixedPointCodec { config, modulus, scale })
    }

    pub fn config(&self) -> ScaleConfig {
        self.config
    }

    pub fn base(&self) -> u32 {
        self.config.base
    }

    pub fn exponent(&self) -> u32 {
        self.config.exponent
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn scale(&self) -> &BigUint {
        &self.scale
    }

    /// Checks `scale^2 * dimension < n / 2`: one product of two encoded
    /// values plus a sum over `dimension` terms cannot wrap.
    pub fn check_headroom(&self, dimension: usize) -> Result<(), CodecError> {
        let need = &self.scale * &self.scale * BigUint::from(dimension) * 2u32;
        if need >= self.modulus {
            return Err(CodecError::InsufficientHeadroom { dimension });
        }
        Ok(())
    }

    /// `round(x * scale)` as a signed integer, ties away from zero.
    pub fn quantize(&self, x: f64) -> Result<BigInt, CodecError> {
        if !x.is_finite() {
            return Err(CodecError::NonFinite(x));
        }
        let q = round_scaled(x, &self.scale);
        if q.magnitude() * 2u32 >= self.modulus {
            return Err(CodecError::Overflow(x));
        }
        Ok(q)
    }

    pub fn encode(&self, x: f64) -> Result<BigUint, CodecError> {
        let q = self.quantize(x)?;
        Ok(match q.sign() {
            Sign::Minus => &self.modulus - q.magnitude(),
            _ => q.magnitude().clone(),
        })
    }

    /// Interprets `v` in `[0, n)` as a signed residue.
    pub fn to_signed(&self, v: &BigUint) -> Result<BigInt, CodecError> {
        if v >= &self.modulus {
            return Err(CodecError::OutOfRange);
        }
        if v * 2u32 >= self.modulus {
            Ok(-BigInt::from(&self.modulus - v))
        } else {
            Ok(BigInt::from(v.clone()))
        }
    }

    pub fn decode(&self, v: &BigUint) -> Result<f64, CodecError> {
        let signed = self.to_signed(v)?;
        Ok(signed.to_f64().unwrap_or(f64::NAN) / self.config.scale_f64())
    }
}

/// Exact `round(x * scale)` for finite `x`, halves rounded away from zero.
fn round_scaled(x: f64, scale: &BigUint) -> BigInt {
    if x == 0.0 {
        return BigInt::zero();
    }
    let bits = x.to_bits();
    let negative = bits >> 63 == 1;
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    let fraction = bits & ((1u64 << 52) - 1);
    // x = mantissa * 2^exp
    let (mantissa, exp) = if raw_exp == 0 {
        (fraction, -1074)
    } else {
        (fraction | (1u64 << 52), raw_exp - 1075)
    };
    let product = BigUint::from(mantissa) * scale;
    let magnitude = if exp >= 0 {
        product << (exp as usize)
    } else {
        let shift = (-exp) as usize;
        let floor = &product >> shift;
        let remainder = &product - (&floor << shift);
        // remainder / 2^shift >= 1/2
        if remainder << 1usize >= BigUint::one() << shift {
            floor + 1u32
        } else {
            floor
        }
    };
    let signed = BigInt::from(magnitude);
    if negative {
        -signed
    } else {
        signed
    }
}
