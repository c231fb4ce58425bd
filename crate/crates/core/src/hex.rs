//! Lowercase, unprefixed hexadecimal rendering of big integers.

use std::fmt;

use num_bigint::BigUint;
use num_traits::Num;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

pub fn to_hex(value: &BigUint) -> String {
    value.to_str_radix(16)
}

/// Parses a hex string. Upper-case digits are accepted; a `0x` prefix,
/// signs, whitespace and the empty string are not.
pub fn from_hex(text: &str) -> Option<BigUint> {
    if text.is_empty() || !text.bytes().all(|b| b.is_ascii_hexdigit()) {
        return None;
    }
    BigUint::from_str_radix(text, 16).ok()
}

/// A big integer that serializes as a hex string.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct HexInt(pub BigUint);

impl fmt::Debug for HexInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", to_hex(&self.0))
    }
}

impl From<BigUint> for HexInt {
    fn from(value: BigUint) -> Self {
        HexInt(value)
    }
}

impl Serialize for HexInt {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&to_hex(&self.0))
    }
}

impl<'de> Deserialize<'de> for HexInt {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        from_hex(&text)
            .map(HexInt)
            .ok_or_else(|| de::Error::custom(format!("invalid hex integer {text:?}")))
    }
}
