//! Entity identity: addresses, key material, cards, and the signed (and
//! optionally sealed) mail envelope.

mod address;
mod card;
mod envelope;
mod keys;
mod seal;

pub use address::{EntityAddress, EntityUid, HostUid};
pub use card::{card_fingerprint, EntityCard, EntityKind, MAX_NAME_BYTES, MAX_SUMMARY_BYTES};
pub use envelope::{
    sign_envelope, verify_envelope, CipherPayload, Envelope, EnvelopeDraft, Intent, Payload,
};
pub use keys::{verify_signature, KeyMaterial, PublicKeyBytes, SignatureBytes};
pub use seal::{decrypt_payload, encrypt_payload, SealError, HKDF_INFO};

use crate::canonical::CanonicalError;

#[derive(Debug, thiserror::Error)]
pub enum IdentityError {
    #[error("seed must be 32 bytes, got {0}")]
    SeedLength(usize),
    #[error("malformed entity address {0:?}")]
    BadAddress(String),
    #[error("unknown entity kind {0:?}")]
    UnknownKind(String),
    #[error("malformed intent {0:?}")]
    BadIntent(String),
    #[error("entity name is {0} bytes (limit {MAX_NAME_BYTES})")]
    NameTooLong(usize),
    #[error("capability summary is {0} bytes (limit {MAX_SUMMARY_BYTES})")]
    SummaryTooLong(usize),
    #[error("envelope sender {envelope} does not match card address {card}")]
    AddressMismatch {
        envelope: EntityAddress,
        card: EntityAddress,
    },
    #[error(transparent)]
    Canonical(#[from] CanonicalError),
}

/// Alias for [`KeyMaterial::generate`].
pub fn generate_identity(seed: Option<&[u8]>) -> Result<KeyMaterial, IdentityError> {
    KeyMaterial::generate(seed)
}
