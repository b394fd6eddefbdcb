use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use super::IdentityError;

fn parse_uid(s: &str) -> Result<u32, IdentityError> {
    let ok = s.len() == 8 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
    if !ok {
        return Err(IdentityError::BadAddress(s.to_owned()));
    }
    Ok(u32::from_str_radix(s, 16).expect("validated hex"))
}

macro_rules! uid_type {
    ($name:ident) => {
        /// Eight lowercase hex characters.
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl $name {
            pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
                Self(rng.next_u32())
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{:08x}", self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{:08x}", self.0)
            }
        }

        impl FromStr for $name {
            type Err = IdentityError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                parse_uid(s).map(Self)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = <std::borrow::Cow<'de, str>>::deserialize(d)?;
                s.parse().map_err(de::Error::custom)
            }
        }
    };
}

uid_type!(HostUid);
uid_type!(EntityUid);

impl EntityUid {
    /// Every host is itself an entity registered under this uid.
    pub const HOST: EntityUid = EntityUid(0);
}

/// `host_uid:entity_uid`, 17 characters.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityAddress {
    pub host: HostUid,
    pub entity: EntityUid,
}

impl EntityAddress {
    pub const fn new(host: HostUid, entity: EntityUid) -> Self {
        Self { host, entity }
    }

    pub fn host_entity(host: HostUid) -> Self {
        Self::new(host, EntityUid::HOST)
    }
}

impl fmt::Display for EntityAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.host, self.entity)
    }
}

impl fmt::Debug for EntityAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for EntityAddress {
    type Err = IdentityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (h, e) = s
            .split_once(':')
            .filter(|_| s.len() == 17)
            .ok_or_else(|| IdentityError::BadAddress(s.to_owned()))?;
        Ok(Self {
            host: h.parse()?,
            entity: e.parse()?,
        })
    }
}

impl Serialize for EntityAddress {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EntityAddress {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = <std::borrow::Cow<'de, str>>::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}
