//! Fixed-width binary values that travel as lowercase hex strings.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HexError {
    #[error("expected {expected} hex characters, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("invalid hex character {0:?} (only lowercase 0-9a-f accepted)")]
    Char(char),
}

/// Decode strictly-lowercase hex. Uppercase is rejected so that every value
/// has exactly one textual form.
pub fn decode_lower_hex(s: &str) -> Result<Vec<u8>, HexError> {
    if let Some(c) = s.chars().find(|c| !matches!(c, '0'..='9' | 'a'..='f')) {
        return Err(HexError::Char(c));
    }
    if s.len() % 2 != 0 {
        return Err(HexError::Length {
            expected: s.len() + 1,
            actual: s.len(),
        });
    }
    Ok(hex::decode(s).expect("validated hex"))
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FixedBytes<const N: usize>(pub [u8; N]);

impl<const N: usize> FixedBytes<N> {
    pub const ZERO: Self = Self([0u8; N]);

    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut out = [0u8; N];
        rng.fill_bytes(&mut out);
        Self(out)
    }

    pub fn as_bytes(&self) -> &[u8; N] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl<const N: usize> FromStr for FixedBytes<N> {
    type Err = HexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != N * 2 {
            return Err(HexError::Length {
                expected: N * 2,
                actual: s.len(),
            });
        }
        let raw = decode_lower_hex(s)?;
        let mut out = [0u8; N];
        out.copy_from_slice(&raw);
        Ok(Self(out))
    }
}

impl<const N: usize> fmt::Display for FixedBytes<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl<const N: usize> fmt::Debug for FixedBytes<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

impl<const N: usize> Serialize for FixedBytes<N> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de, const N: usize> Deserialize<'de> for FixedBytes<N> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = <std::borrow::Cow<'de, str>>::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// SHA-256 output.
pub type Digest = FixedBytes<32>;

pub fn sha256(data: &[u8]) -> Digest {
    FixedBytes(Sha256::digest(data).into())
}

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub FixedBytes<16>);

        impl $name {
            pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
                Self(FixedBytes::random(rng))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                fmt::Display::fmt(&self.0, f)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.0)
            }
        }

        impl FromStr for $name {
            type Err = HexError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                s.parse().map(Self)
            }
        }
    };
}

id_type!(EnvelopeId);
id_type!(SessionId);
id_type!(ContractId);
id_type!(ApprovalId);
id_type!(ActivityId);
id_type!(DeliveryId);

/// Variable-length bytes carried as a lowercase hex string.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct HexBytes(pub Vec<u8>);

impl fmt::Debug for HexBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HexBytes({})", hex::encode(&self.0))
    }
}

impl Serialize for HexBytes {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(&self.0))
    }
}

impl<'de> Deserialize<'de> for HexBytes {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = <std::borrow::Cow<'de, str>>::deserialize(d)?;
        decode_lower_hex(&s).map(HexBytes).map_err(de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uppercase_hex_is_rejected() {
        assert!("AB".parse::<FixedBytes<1>>().is_err());
        assert_eq!("ab".parse::<FixedBytes<1>>().unwrap().0, [0xab]);
    }

    #[test]
    fn wrong_width_is_rejected() {
        assert_eq!(
            "abcd".parse::<FixedBytes<1>>(),
            Err(HexError::Length {
                expected: 2,
                actual: 4
            })
        );
    }

    #[test]
    fn sha256_matches_known_vector() {
        // FIPS 180-2 "abc"
        assert_eq!(
            sha256(b"abc").to_hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
