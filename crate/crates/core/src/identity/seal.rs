use aes_gcm::aead::{Aead, KeyInit};
use aes_gcm::{Aes256Gcm, Nonce};
use hkdf::Hkdf;
use rand::{CryptoRng, RngCore};
use sha2::Sha256;
use x25519_dalek::{PublicKey as XPublic, StaticSecret};

use super::{CipherPayload, EntityCard, KeyMaterial};
use crate::bytes::{FixedBytes, HexBytes};

pub const HKDF_INFO: &[u8] = b"fp-envelope-v1";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SealError {
    #[error("refusing to seal an empty payload")]
    Empty,
    #[error("recipient encryption key is degenerate")]
    WeakKey,
    /// Wrong recipient and tag failure share this one variant.
    #[error("payload authentication failed")]
    Authentication,
}

fn derive_key(shared: &x25519_dalek::SharedSecret) -> [u8; 32] {
    let hk = Hkdf::<Sha256>::new(None, shared.as_bytes());
    let mut key = [0u8; 32];
    hk.expand(HKDF_INFO, &mut key).expect("32 bytes is a valid HKDF length");
    key
}

/// Seal `plaintext` to the recipient card's X25519 key with a fresh
/// ephemeral keypair and random nonce.
pub fn encrypt_payload<R: RngCore + CryptoRng + ?Sized>(
    plaintext: &[u8],
    recipient: &EntityCard,
    rng: &mut R,
) -> Result<CipherPayload, SealError> {
    if plaintext.is_empty() {
        return Err(SealError::Empty);
    }
    let mut eph_bytes = [0u8; 32];
    rng.fill_bytes(&mut eph_bytes);
    let ephemeral = StaticSecret::from(eph_bytes);
    let ephemeral_public = XPublic::from(&ephemeral);
    let shared = ephemeral.diffie_hellman(&XPublic::from(recipient.encryption_public.0));
    if !shared.was_contributory() {
        return Err(SealError::WeakKey);
    }
    let key = derive_key(&shared);
    let mut nonce = [0u8; 12];
    rng.fill_bytes(&mut nonce);
    let cipher = Aes256Gcm::new_from_slice(&key).expect("32-byte key");
    let ciphertext = cipher
        .encrypt(Nonce::from_slice(&nonce), plaintext)
        .expect("in-memory AES-GCM encryption cannot fail");
    Ok(CipherPayload {
        ephemeral_public: FixedBytes(ephemeral_public.to_bytes()),
        nonce: FixedBytes(nonce),
        ciphertext: HexBytes(ciphertext),
    })
}

pub fn decrypt_payload(cp: &CipherPayload, keys: &KeyMaterial) -> Result<Vec<u8>, SealError> {
    let shared = keys
        .encryption_secret()
        .diffie_hellman(&XPublic::from(cp.ephemeral_public.0));
    if !shared.was_contributory() {
        return Err(SealError::Authentication);
    }
    let key = derive_key(&shared);
    let cipher = Aes256Gcm::new_from_slice(&key).expect("32-byte key");
    cipher
        .decrypt(Nonce::from_slice(&cp.nonce.0), cp.ciphertext.0.as_slice())
        .map_err(|_| SealError::Authentication)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::{EntityAddress, EntityKind, EntityUid, HostUid};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn recipient(seed: u8) -> (KeyMaterial, EntityCard) {
        let keys = KeyMaterial::from_seed(&[seed; 32]);
        let card = EntityCard::new(
            "bob",
            EntityAddress::new(HostUid(2), EntityUid(seed as u32)),
            EntityKind::Agent,
            &keys,
        )
        .unwrap();
        (keys, card)
    }

    #[test]
    fn fresh_ephemeral_per_call() {
        let (_, card) = recipient(5);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let a = encrypt_payload(b"same", &card, &mut rng).unwrap();
        let b = encrypt_payload(b"same", &card, &mut rng).unwrap();
        assert_ne!(a.ciphertext, b.ciphertext);
        assert_ne!(a.ephemeral_public, b.ephemeral_public);
    }

    #[test]
    fn tag_tamper_fails() {
        let (keys, card) = recipient(5);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let mut cp = encrypt_payload(b"secret plan", &card, &mut rng).unwrap();
        let last = cp.ciphertext.0.len() - 1;
        cp.ciphertext.0[last] ^= 0x80;
        assert_eq!(decrypt_payload(&cp, &keys), Err(SealError::Authentication));
    }

    #[test]
    fn wrong_recipient_fails_identically() {
        let (_, card) = recipient(5);
        let (other, _) = recipient(6);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let cp = encrypt_payload(b"for bob", &card, &mut rng).unwrap();
        assert_eq!(decrypt_payload(&cp, &other), Err(SealError::Authentication));
    }

    #[test]
    fn empty_plaintext_refused() {
        let (_, card) = recipient(5);
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        assert_eq!(encrypt_payload(b"", &card, &mut rng), Err(SealError::Empty));
    }

    proptest! {
        #[test]
        fn round_trip(p in prop::collection::vec(any::<u8>(), 1..512), seed in any::<u64>()) {
            let (keys, card) = recipient(5);
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let cp = encrypt_payload(&p, &card, &mut rng).unwrap();
            prop_assert_eq!(decrypt_payload(&cp, &keys).unwrap(), p);
        }
    }
}
