use std::borrow::Cow;
use std::fmt;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use super::{verify_signature, EntityAddress, EntityCard, IdentityError, KeyMaterial, SignatureBytes};
use crate::bytes::{EnvelopeId, FixedBytes, HexBytes, SessionId};
use crate::canonical::{encode_value, to_value, CanonicalError};

/// Message type carried by an envelope.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Intent(Cow<'static, str>);

macro_rules! intents {
    ($($name:ident),* $(,)?) => {
        impl Intent {
            $(pub const $name: Intent = Intent(Cow::Borrowed(stringify!($name)));)*
        }
    };
}

intents!(
    CHAT,
    TASK,
    INVOKE,
    RESULT,
    ERROR,
    PAYMENT,
    RECEIPT,
    APPROVAL_REQUEST,
    APPROVAL_RESPONSE,
    DISCOVER,
    DISCOVERY_DOC,
    PING,
    PONG,
    DEPLOY,
    CONTRACT_PROPOSE,
    CONTRACT_AMEND,
    CONTRACT_APPROVE,
    CONTRACT_ACTIVATE,
    CONTRACT_COMPLETE,
    CONTRACT_REWORK,
    CONTRACT_ACCEPT,
    CONTRACT_SETTLE,
    CONTRACT_CANCEL,
    CONTRACT_DISPUTE,
    CONTRACT_RESOLVE,
    CONTRACT_STATE,
);

impl Intent {
    /// Intent names are `[A-Z][A-Z0-9_]*`, at most 64 bytes.
    pub fn new(name: &str) -> Result<Self, IdentityError> {
        let valid = !name.is_empty()
            && name.len() <= 64
            && name.as_bytes()[0].is_ascii_uppercase()
            && name
                .bytes()
                .all(|b| b.is_ascii_uppercase() || b.is_ascii_digit() || b == b'_');
        if !valid {
            return Err(IdentityError::BadIntent(name.to_owned()));
        }
        Ok(Intent(Cow::Owned(name.to_owned())))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_contract(&self) -> bool {
        self.0.starts_with("CONTRACT_")
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for Intent {
    type Err = IdentityError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Intent::new(s)
    }
}

impl Serialize for Intent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Intent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = <Cow<'de, str>>::deserialize(d)?;
        Intent::new(&s).map_err(de::Error::custom)
    }
}

/// Ephemeral-X25519 + AES-256-GCM sealed payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CipherPayload {
    pub ephemeral_public: FixedBytes<32>,
    pub nonce: FixedBytes<12>,
    /// Ciphertext followed by the 16-byte GCM tag.
    pub ciphertext: HexBytes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Payload {
    Plain(HexBytes),
    Sealed(CipherPayload),
}

impl Payload {
    pub fn plain(bytes: impl Into<Vec<u8>>) -> Self {
        Payload::Plain(HexBytes(bytes.into()))
    }

    pub fn empty() -> Self {
        Payload::Plain(HexBytes(Vec::new()))
    }

    /// Bytes on the wire: plaintext length, or ciphertext length including tag.
    pub fn len(&self) -> usize {
        match self {
            Payload::Plain(b) => b.0.len(),
            Payload::Sealed(c) => c.ciphertext.0.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_sealed(&self) -> bool {
        matches!(self, Payload::Sealed(_))
    }
}

/// Everything in an envelope except its signature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvelopeDraft {
    pub envelope_id: EnvelopeId,
    pub sender: EntityAddress,
    pub recipient: EntityAddress,
    pub intent: Intent,
    pub session_id: Option<SessionId>,
    pub correlation_id: Option<EnvelopeId>,
    pub policy_ref: Option<String>,
    pub sent_at: u64,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope {
    pub envelope_id: EnvelopeId,
    pub sender: EntityAddress,
    pub recipient: EntityAddress,
    pub intent: Intent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<SessionId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation_id: Option<EnvelopeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_ref: Option<String>,
    pub sent_at: u64,
    pub payload: Payload,
    pub signature: SignatureBytes,
}

impl Envelope {
    fn from_draft(d: EnvelopeDraft, signature: SignatureBytes) -> Self {
        Envelope {
            envelope_id: d.envelope_id,
            sender: d.sender,
            recipient: d.recipient,
            intent: d.intent,
            session_id: d.session_id,
            correlation_id: d.correlation_id,
            policy_ref: d.policy_ref,
            sent_at: d.sent_at,
            payload: d.payload,
            signature,
        }
    }

    /// Canonical bytes of every field except `signature`.
    pub fn signing_bytes(&self) -> Result<Vec<u8>, CanonicalError> {
        let mut tree = to_value(self)?;
        tree.as_object_mut()
            .expect("envelope serializes as an object")
            .remove("signature");
        Ok(encode_value(&tree))
    }
}

pub fn sign_envelope(draft: EnvelopeDraft, keys: &KeyMaterial) -> Result<Envelope, IdentityError> {
    let mut env = Envelope::from_draft(draft, FixedBytes([0u8; 64]));
    let bytes = env.signing_bytes()?;
    env.signature = keys.sign(&bytes);
    Ok(env)
}

/// `Ok(false)` means a bad signature; an `Err` means the card belongs to
/// someone other than the envelope's sender.
pub fn verify_envelope(env: &Envelope, sender_card: &EntityCard) -> Result<bool, IdentityError> {
    if sender_card.address != env.sender {
        return Err(IdentityError::AddressMismatch {
            envelope: env.sender,
            card: sender_card.address,
        });
    }
    let Ok(bytes) = env.signing_bytes() else {
        return Ok(false);
    };
    Ok(verify_signature(&sender_card.signing_public, &bytes, &env.signature))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::canonical_encode;
    use crate::identity::{EntityKind, EntityUid, HostUid};

    fn fixture() -> (KeyMaterial, EntityCard, EnvelopeDraft) {
        let keys = KeyMaterial::from_seed(&[9u8; 32]);
        let addr = EntityAddress::new(HostUid(0xa1b2c3d4), EntityUid(0x1));
        let card = EntityCard::new("alice", addr, EntityKind::Human, &keys).unwrap();
        let draft = EnvelopeDraft {
            envelope_id: EnvelopeId(FixedBytes([0x42; 16])),
            sender: addr,
            recipient: EntityAddress::new(HostUid(0xdeadbeef), EntityUid(0x2)),
            intent: Intent::CHAT,
            session_id: None,
            correlation_id: None,
            policy_ref: Some("org/default".into()),
            sent_at: 1_000,
            payload: Payload::plain(b"hello".to_vec()),
        };
        (keys, card, draft)
    }

    #[test]
    fn round_trip_and_tamper() {
        let (keys, card, draft) = fixture();
        let env = sign_envelope(draft, &keys).unwrap();
        assert!(verify_envelope(&env, &card).unwrap());

        let mut flipped = env.clone();
        if let Payload::Plain(p) = &mut flipped.payload {
            p.0[0] ^= 1;
        }
        assert!(!verify_envelope(&flipped, &card).unwrap());

        let mut late = env.clone();
        late.sent_at += 1;
        assert!(!verify_envelope(&late, &card).unwrap());
    }

    #[test]
    fn foreign_card_is_address_mismatch() {
        let (keys, _, draft) = fixture();
        let env = sign_envelope(draft, &keys).unwrap();
        let other_keys = KeyMaterial::from_seed(&[1u8; 32]);
        let other = EntityCard::new(
            "bob",
            EntityAddress::new(HostUid(1), EntityUid(2)),
            EntityKind::Agent,
            &other_keys,
        )
        .unwrap();
        assert!(matches!(
            verify_envelope(&env, &other),
            Err(IdentityError::AddressMismatch { .. })
        ));
    }

    #[test]
    fn signature_matches_independent_signer() {
        use ed25519_dalek::{Signer, SigningKey};
        let (keys, _, draft) = fixture();
        let env = sign_envelope(draft.clone(), &keys).unwrap();
        // Independent route: hand-written canonical text, reference signer.
        let text = r#"{"envelope_id":"42424242424242424242424242424242","intent":"CHAT","payload":{"plain":"68656c6c6f"},"policy_ref":"org/default","recipient":"deadbeef:00000002","sender":"a1b2c3d4:00000001","sent_at":1000}"#;
        assert_eq!(env.signing_bytes().unwrap(), text.as_bytes());
        let reference = SigningKey::from_bytes(&[9u8; 32]).sign(text.as_bytes());
        assert_eq!(env.signature.0, reference.to_bytes());
    }

    #[test]
    fn intent_names_are_validated() {
        assert!(Intent::new("CONTRACT_APPROVE").is_ok());
        assert!(Intent::new("chat").is_err());
        assert!(Intent::new("").is_err());
        assert!(serde_json::from_str::<Intent>("\"1X\"").is_err());
        assert_eq!(Intent::new("CHAT").unwrap(), Intent::CHAT);
    }

    #[test]
    fn envelope_json_round_trips() {
        let (keys, _, draft) = fixture();
        let env = sign_envelope(draft, &keys).unwrap();
        let bytes = canonical_encode(&env).unwrap();
        let back: Envelope = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(back, env);
    }
}
