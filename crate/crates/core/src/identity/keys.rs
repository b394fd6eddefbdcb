use std::fmt;

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use rand::{CryptoRng, RngCore};
use sha2::{Digest as _, Sha256};
use x25519_dalek::{PublicKey as XPublic, StaticSecret};

use super::IdentityError;
use crate::bytes::FixedBytes;

pub type PublicKeyBytes = FixedBytes<32>;
pub type SignatureBytes = FixedBytes<64>;

const X25519_SEED_DOMAIN: &[u8] = b"fp-x25519-from-seed-v1";

/// An entity's signing (Ed25519) and encryption (X25519) keypairs.
///
/// Deliberately neither `Serialize` nor `Clone`-into-text: secrets only live
/// in memory.
#[derive(Clone)]
pub struct KeyMaterial {
    signing: SigningKey,
    encryption: StaticSecret,
}

impl fmt::Debug for KeyMaterial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyMaterial")
            .field("signing_public", &self.signing_public())
            .field("encryption_public", &self.encryption_public())
            .finish_non_exhaustive()
    }
}

impl KeyMaterial {
    /// With a seed the result is deterministic: the seed is the Ed25519
    /// secret and the X25519 secret is SHA-256 over a domain tag and the seed.
    /// Without one, keys come from the operating system RNG.
    pub fn generate(seed: Option<&[u8]>) -> Result<Self, IdentityError> {
        match seed {
            Some(seed) => {
                let seed: [u8; 32] = seed
                    .try_into()
                    .map_err(|_| IdentityError::SeedLength(seed.len()))?;
                Ok(Self::from_seed(&seed))
            }
            None => Ok(Self::from_rng(&mut rand::rngs::OsRng)),
        }
    }

    pub fn from_seed(seed: &[u8; 32]) -> Self {
        let signing = SigningKey::from_bytes(seed);
        let mut h = Sha256::new();
        h.update(X25519_SEED_DOMAIN);
        h.update(seed);
        let enc: [u8; 32] = h.finalize().into();
        Self {
            signing,
            encryption: StaticSecret::from(enc),
        }
    }

    pub fn from_rng<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Self {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        Self::from_seed(&seed)
    }

    pub fn signing_public(&self) -> PublicKeyBytes {
        FixedBytes(self.signing.verifying_key().to_bytes())
    }

    pub fn encryption_public(&self) -> PublicKeyBytes {
        FixedBytes(XPublic::from(&self.encryption).to_bytes())
    }

    pub fn sign(&self, message: &[u8]) -> SignatureBytes {
        FixedBytes(self.signing.sign(message).to_bytes())
    }

    pub(crate) fn encryption_secret(&self) -> &StaticSecret {
        &self.encryption
    }

    #[cfg(test)]
    pub(crate) fn secret_bytes(&self) -> ([u8; 32], [u8; 32]) {
        (self.signing.to_bytes(), self.encryption.to_bytes())
    }
}

/// Strict Ed25519 verification; malformed keys verify nothing.
pub fn verify_signature(public: &PublicKeyBytes, message: &[u8], signature: &SignatureBytes) -> bool {
    let Ok(key) = VerifyingKey::from_bytes(&public.0) else {
        return false;
    };
    let sig = ed25519_dalek::Signature::from_bytes(&signature.0);
    key.verify(message, &sig).is_ok()
}
