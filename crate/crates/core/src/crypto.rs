//! Signature and digest algorithms, looked up by OID.

use std::fmt;

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use sha2::{Digest, Sha256};

use crate::der::{self, DerValue, Fields, Oid};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CryptoError {
    #[error("unknown algorithm {0}")]
    UnknownAlgorithm(Oid),
    #[error("malformed key: {0}")]
    MalformedKey(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmKind {
    Signature,
    Digest,
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct AlgorithmId {
    pub oid: Oid,
    pub name: &'static str,
}

impl fmt::Debug for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.name, self.oid)
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name)
    }
}

struct Registered {
    arcs: &'static [u64],
    name: &'static str,
    kind: AlgorithmKind,
}

const REGISTRY: &[Registered] = &[
    Registered {
        arcs: &[1, 3, 6, 1, 4, 1, 57264, 1, 1],
        name: "ed25519",
        kind: AlgorithmKind::Signature,
    },
    Registered {
        arcs: &[2, 16, 840, 1, 101, 3, 4, 2, 1],
        name: "sha-256",
        kind: AlgorithmKind::Digest,
    },
];

impl AlgorithmId {
    /// Default signature scheme.
    pub fn ed25519() -> Self {
        Self::resolve(&Oid::from_arcs(REGISTRY[0].arcs)).expect("registered")
    }

    pub fn sha256() -> Self {
        Self::resolve(&Oid::from_arcs(REGISTRY[1].arcs)).expect("registered")
    }

    /// Looks the OID up in the registry.
    pub fn resolve(oid: &Oid) -> Result<Self, CryptoError> {
        REGISTRY
            .iter()
            .find(|r| r.arcs == oid.arcs())
            .map(|r| AlgorithmId {
                oid: oid.clone(),
                name: r.name,
            })
            .ok_or_else(|| CryptoError::UnknownAlgorithm(oid.clone()))
    }

    pub fn kind(&self) -> AlgorithmKind {
        REGISTRY
            .iter()
            .find(|r| r.arcs == self.oid.arcs())
            .map(|r| r.kind)
            .expect("AlgorithmId only constructed from the registry")
    }

    /// `AlgorithmIdentifier ::= SEQUENCE { algorithm OID }` (no parameters).
    pub fn to_der(&self) -> DerValue {
        DerValue::Sequence(vec![DerValue::Oid(self.oid.clone())])
    }

    /// Parses the identifier structure without requiring the algorithm to be
    /// registered; unregistered OIDs surface later as `UnknownAlgorithm`.
    pub fn parse_oid(value: &DerValue) -> Result<Oid, der::Mismatch> {
        let mut f = Fields::of(value, "AlgorithmIdentifier")?;
        let oid = f.oid("algorithm")?.clone();
        f.finish()?;
        Ok(oid)
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct KeyPair {
    pub algorithm: AlgorithmId,
    pub public_key: Vec<u8>,
    pub private_key: Vec<u8>,
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("algorithm", &self.algorithm)
            .field("public_key", &hex::encode(&self.public_key))
            .finish_non_exhaustive()
    }
}

fn signature_algorithm(algorithm: &AlgorithmId) -> Result<(), CryptoError> {
    match AlgorithmId::resolve(&algorithm.oid)?.kind() {
        AlgorithmKind::Signature => Ok(()),
        AlgorithmKind::Digest => Err(CryptoError::UnknownAlgorithm(algorithm.oid.clone())),
    }
}

/// Generates a key pair. With a seed the result is deterministic; seeds that are
/// not exactly 32 bytes are first hashed with SHA-256.
pub fn generate(algorithm: &AlgorithmId, seed: Option<&[u8]>) -> Result<KeyPair, CryptoError> {
    signature_algorithm(algorithm)?;
    let secret: [u8; 32] = match seed {
        Some(s) if s.len() == 32 => s.try_into().expect("length checked"),
        Some(s) => Sha256::digest(s).into(),
        None => rand::random(),
    };
    let signing = SigningKey::from_bytes(&secret);
    Ok(KeyPair {
        algorithm: algorithm.clone(),
        public_key: signing.verifying_key().to_bytes().to_vec(),
        private_key: secret.to_vec(),
    })
}

impl KeyPair {
    /// Rebuilds a key pair from the private half, deriving the public key.
    pub fn from_private(algorithm: AlgorithmId, private_key: &[u8]) -> Result<Self, CryptoError> {
        signature_algorithm(&algorithm)?;
        let secret: [u8; 32] = private_key.try_into().map_err(|_| {
            CryptoError::MalformedKey(format!("expected 32 bytes, got {}", private_key.len()))
        })?;
        generate(&algorithm, Some(&secret))
    }

    /// Key file body: `SEQUENCE { AlgorithmIdentifier, OCTET STRING privateKey }`.
    pub fn to_key_file(&self) -> Vec<u8> {
        der::encode(&DerValue::Sequence(vec![
            self.algorithm.to_der(),
            DerValue::OctetString(self.private_key.clone()),
        ]))
        .expect("key file structure is valid")
    }

    pub fn from_key_file(bytes: &[u8]) -> Result<Self, CryptoError> {
        let bad = |e: String| CryptoError::MalformedKey(e);
        let value = der::decode_all(bytes).map_err(|e| bad(e.to_string()))?;
        let mut f = Fields::of(&value, "key file").map_err(|e| bad(e.to_string()))?;
        let oid = AlgorithmId::parse_oid(f.next("algorithm").map_err(|e| bad(e.to_string()))?)
            .map_err(|e| bad(e.to_string()))?;
        let private = f.octets("private key").map_err(|e| bad(e.to_string()))?;
        f.finish().map_err(|e| bad(e.to_string()))?;
        Self::from_private(AlgorithmId::resolve(&oid)?, private)
    }
}

pub fn sign(key: &KeyPair, message: &[u8]) -> Result<Vec<u8>, CryptoError> {
    signature_algorithm(&key.algorithm)?;
    let secret: [u8; 32] = key
        .private_key
        .as_slice()
        .try_into()
        .map_err(|_| CryptoError::MalformedKey("private key length".into()))?;
    Ok(SigningKey::from_bytes(&secret)
        .sign(message)
        .to_bytes()
        .to_vec())
}

/// True iff `signature` is valid for `message` under `public_key`.
pub fn verify(
    public_key: &[u8],
    algorithm: &AlgorithmId,
    message: &[u8],
    signature: &[u8],
) -> Result<bool, CryptoError> {
    signature_algorithm(algorithm)?;
    let public: [u8; 32] = public_key.try_into().map_err(|_| {
        CryptoError::MalformedKey(format!("public key length {}", public_key.len()))
    })?;
    let key =
        VerifyingKey::from_bytes(&public).map_err(|e| CryptoError::MalformedKey(e.to_string()))?;
    let Ok(sig) = ed25519_dalek::Signature::from_slice(signature) else {
        return Ok(false);
    };
    Ok(key.verify(message, &sig).is_ok())
}

pub fn digest(algorithm: &AlgorithmId, message: &[u8]) -> Result<Vec<u8>, CryptoError> {
    match AlgorithmId::resolve(&algorithm.oid)?.kind() {
        AlgorithmKind::Digest => Ok(Sha256::digest(message).to_vec()),
        AlgorithmKind::Signature => Err(CryptoError::UnknownAlgorithm(algorithm.oid.clone())),
    }
}

pub fn sha256(message: &[u8]) -> [u8; 32] {
    Sha256::digest(message).into()
}
