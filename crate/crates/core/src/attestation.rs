//! Statement signing and the public registry users check before trusting a
//! deployed system.
//!
//! A user holding a signed statement and the name of the system that
//! supposedly produced it can ask four questions of the registry:
//!
//! 1. was it signed with a key registered to that system (deployment identity),
//! 2. does the deployer claim the system is certified,
//! 3. does a matching active certificate actually exist,
//! 4. has the system never had a certification revoked.
//!
//! The registry keeps revocations as an append-only history, so once a
//! system has been revoked the fourth check fails forever.

use std::collections::BTreeMap;
use std::fmt;

use ed25519_dalek::{Signer, Verifier};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::certification::{Certificate, CertificateId};
use crate::statement::{canonical_encode, AgentId, Statement, StatementId};

#[derive(Debug, Error, PartialEq)]
pub enum AttestationError {
    #[error("system {0} is not in the registry")]
    UnknownSystem(AgentId),
    #[error("system {0} is already registered")]
    AlreadyRegistered(AgentId),
    #[error("signature on statement {0} does not verify against any key of its speaker")]
    SignatureInvalid(StatementId),
    #[error("certificate key does not match the active key of {0}")]
    KeyMismatch(AgentId),
    #[error("certificate {0} already issued")]
    DuplicateCertificate(CertificateId),
    #[error("registry file: {0}")]
    Format(String),
}

/// Verification half of an asymmetric signature scheme.
pub trait SignatureScheme {
    fn name(&self) -> &'static str;
    fn verify(&self, public_key: &PublicKey, message: &[u8], signature: &Signature) -> bool;
}

/// Ed25519 (RFC 8032), deterministic signatures.
#[derive(Debug, Clone, Copy, Default)]
pub struct Ed25519;

impl SignatureScheme for Ed25519 {
    fn name(&self) -> &'static str {
        "ed25519"
    }

    fn verify(&self, public_key: &PublicKey, message: &[u8], signature: &Signature) -> bool {
        let Ok(vk) = ed25519_dalek::VerifyingKey::from_bytes(&public_key.0) else {
            return false;
        };
        let sig = ed25519_dalek::Signature::from_bytes(&signature.0);
        vk.verify(message, &sig).is_ok()
    }
}

macro_rules! hex_bytes {
    ($name:ident, $len:expr) => {
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }

            pub fn from_hex(s: &str) -> Result<Self, AttestationError> {
                let bytes = hex::decode(s.trim())
                    .map_err(|e| AttestationError::Format(e.to_string()))?;
                let arr: [u8; $len] = bytes.try_into().map_err(|b: Vec<u8>| {
                    AttestationError::Format(format!(
                        "{} needs {} bytes, got {}",
                        stringify!($name),
                        $len,
                        b.len()
                    ))
                })?;
                Ok(Self(arr))
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.to_hex())
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                Self::from_hex(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

hex_bytes!(PublicKey, 32);
hex_bytes!(Signature, 64);

pub struct KeyPair {
    signing: ed25519_dalek::SigningKey,
}

impl KeyPair {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        Self {
            signing: ed25519_dalek::SigningKey::from_bytes(&seed),
        }
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(self.signing.verifying_key().to_bytes())
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        Signature(self.signing.sign(message).to_bytes())
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("public", &self.public_key())
            .finish_non_exhaustive()
    }
}

/// A statement with a detached signature over its canonical encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedStatement {
    pub statement: Statement,
    pub signature: Signature,
}

pub fn sign_statement(key: &KeyPair, statement: &Statement) -> SignedStatement {
    SignedStatement {
        statement: statement.clone(),
        signature: key.sign(&canonical_encode(statement)),
    }
}

pub fn verify_statement(public_key: &PublicKey, signed: &SignedStatement) -> bool {
    Ed25519.verify(
        public_key,
        &canonical_encode(&signed.statement),
        &signed.signature,
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchivedKey {
    pub key: PublicKey,
    pub epoch: u32,
    pub retired_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevocationEvent {
    pub at: u64,
    pub reason: String,
    /// Certificates whose status changed with this event.
    pub certificates: Vec<CertificateId>,
}

/// A deployer's public statement about a system it runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeployerClaim {
    pub deployer: String,
    pub claims_certified: bool,
    #[serde(default)]
    pub standard_level: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub active_key: PublicKey,
    pub key_epoch: u32,
    #[serde(default)]
    pub archived_keys: Vec<ArchivedKey>,
    #[serde(default)]
    pub certificates: Vec<CertificateId>,
    #[serde(default)]
    revocations: Vec<RevocationEvent>,
    #[serde(default)]
    pub deployer_claims: Vec<DeployerClaim>,
}

impl RegistryEntry {
    pub fn revocations(&self) -> &[RevocationEvent] {
        &self.revocations
    }
}

/// Which registered key a signature verified under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyMatch {
    Active,
    /// Signed before a rotation; carries the retired key's epoch.
    Archived { epoch: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub system: AgentId,
    /// (i) the statement was signed with a key bound to the claimed system.
    pub deployed_by_system: bool,
    /// (ii) the deployer claims the system is certified.
    pub claims_certification: bool,
    /// (iii) an active, unexpired certificate exists for the system.
    pub certificate_exists: bool,
    /// (iv) no certification of this system was ever revoked.
    pub never_revoked: bool,
    /// The signature matched a retired key.
    pub rotation_notice: Option<u32>,
}

impl CheckReport {
    pub fn trusted(&self) -> bool {
        self.deployed_by_system
            && self.claims_certification
            && self.certificate_exists
            && self.never_revoked
    }

    pub fn findings(&self) -> [(&'static str, bool); 4] {
        [
            ("(i) deployed by claimed system", self.deployed_by_system),
            ("(ii) deployer claims certification", self.claims_certification),
            ("(iii) active certificate exists", self.certificate_exists),
            ("(iv) no revocation on record", self.never_revoked),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeploymentAudit {
    pub system: AgentId,
    pub certified_hashes: Vec<String>,
    pub deployed_hash: String,
    pub matches: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    entries: BTreeMap<AgentId, RegistryEntry>,
    certificates: BTreeMap<CertificateId, Certificate>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, system: AgentId, key: PublicKey) -> Result<(), AttestationError> {
        if self.entries.contains_key(&system) {
            return Err(AttestationError::AlreadyRegistered(system));
        }
        self.entries.insert(
            system,
            RegistryEntry {
                active_key: key,
                key_epoch: 0,
                archived_keys: Vec::new(),
                certificates: Vec::new(),
                revocations: Vec::new(),
                deployer_claims: Vec::new(),
            },
        );
        Ok(())
    }

    pub fn entry(&self, system: &AgentId) -> Result<&RegistryEntry, AttestationError> {
        self.entries
            .get(system)
            .ok_or_else(|| AttestationError::UnknownSystem(system.clone()))
    }

    fn entry_mut(&mut self, system: &AgentId) -> Result<&mut RegistryEntry, AttestationError> {
        self.entries
            .get_mut(system)
            .ok_or_else(|| AttestationError::UnknownSystem(system.clone()))
    }

    pub fn systems(&self) -> impl Iterator<Item = &AgentId> {
        self.entries.keys()
    }

    pub fn certificate(&self, id: &CertificateId) -> Option<&Certificate> {
        self.certificates.get(id)
    }

    pub fn certificates_of<'a>(&'a self, system: &'a AgentId) -> impl Iterator<Item = &'a Certificate> {
        self.certificates.values().filter(move |c| &c.system_id == system)
    }

    pub fn record_claim(
        &mut self,
        system: &AgentId,
        claim: DeployerClaim,
    ) -> Result<(), AttestationError> {
        self.entry_mut(system)?.deployer_claims.push(claim);
        Ok(())
    }

    /// Records a certificate. Its key must be the system's active key.
    pub fn issue(&mut self, certificate: Certificate) -> Result<CertificateId, AttestationError> {
        let system = certificate.system_id.clone();
        let entry = self.entry(&system)?;
        if entry.active_key != certificate.public_key {
            return Err(AttestationError::KeyMismatch(system));
        }
        if self.certificates.contains_key(&certificate.id) {
            return Err(AttestationError::DuplicateCertificate(certificate.id));
        }
        let id = certificate.id.clone();
        self.entry_mut(&system)?.certificates.push(id.clone());
        self.certificates.insert(id.clone(), certificate);
        Ok(id)
    }

    /// Revokes every active certificate of `system` and appends the event.
    /// Revoking twice records two events.
    pub fn revoke_entry(
        &mut self,
        system: &AgentId,
        reason: impl Into<String>,
        at: u64,
    ) -> Result<(), AttestationError> {
        let ids = self.entry(system)?.certificates.clone();
        let mut changed = Vec::new();
        for id in ids {
            if let Some(cert) = self.certificates.get_mut(&id) {
                if cert.revoke() {
                    changed.push(id);
                }
            }
        }
        self.entry_mut(system)?.revocations.push(RevocationEvent {
            at,
            reason: reason.into(),
            certificates: changed,
        });
        Ok(())
    }

    /// Retires the active key into the archive and installs `new_key`.
    pub fn rotate_key(
        &mut self,
        system: &AgentId,
        new_key: PublicKey,
        at: u64,
    ) -> Result<(), AttestationError> {
        let entry = self.entry_mut(system)?;
        let retired = ArchivedKey {
            key: entry.active_key,
            epoch: entry.key_epoch,
            retired_at: at,
        };
        entry.archived_keys.push(retired);
        entry.active_key = new_key;
        entry.key_epoch += 1;
        Ok(())
    }

    /// Checks a signature against every key ever bound to `system`.
    pub fn match_key(
        &self,
        system: &AgentId,
        signed: &SignedStatement,
    ) -> Result<Option<KeyMatch>, AttestationError> {
        let entry = self.entry(system)?;
        if verify_statement(&entry.active_key, signed) {
            return Ok(Some(KeyMatch::Active));
        }
        Ok(entry
            .archived_keys
            .iter()
            .rev()
            .find(|k| verify_statement(&k.key, signed))
            .map(|k| KeyMatch::Archived { epoch: k.epoch }))
    }

    /// Verifies a statement against its own speaker's keys.
    pub fn verify_signed(&self, signed: &SignedStatement) -> Result<KeyMatch, AttestationError> {
        match self.match_key(&signed.statement.speaker, signed) {
            Ok(Some(m)) => Ok(m),
            Ok(None) | Err(AttestationError::UnknownSystem(_)) => Err(
                AttestationError::SignatureInvalid(signed.statement.id.clone()),
            ),
            Err(e) => Err(e),
        }
    }

    /// The four user checks for `signed`, presented as coming from
    /// `claimed_system`, at logical time `now`.
    pub fn user_check(
        &self,
        signed: &SignedStatement,
        claimed_system: &AgentId,
        now: u64,
    ) -> Result<CheckReport, AttestationError> {
        let entry = self.entry(claimed_system)?;
        let key_match = self.match_key(claimed_system, signed)?;
        let certificate_exists = self
            .certificates_of(claimed_system)
            .any(|c| c.is_valid_at(now));
        Ok(CheckReport {
            system: claimed_system.clone(),
            deployed_by_system: key_match.is_some(),
            claims_certification: entry.deployer_claims.iter().any(|c| c.claims_certified),
            certificate_exists,
            never_revoked: entry.revocations.is_empty(),
            rotation_notice: match key_match {
                Some(KeyMatch::Archived { epoch }) => Some(epoch),
                _ => None,
            },
        })
    }

    /// Compares the policy hash of what is deployed with what was certified.
    pub fn audit_deployment(
        &self,
        system: &AgentId,
        deployed_hash: &str,
    ) -> Result<DeploymentAudit, AttestationError> {
        self.entry(system)?;
        let certified_hashes: Vec<String> = self
            .certificates_of(system)
            .map(|c| c.policy_hash.clone())
            .collect();
        let matches = certified_hashes.iter().any(|h| h == deployed_hash);
        Ok(DeploymentAudit {
            system: system.clone(),
            certified_hashes,
            deployed_hash: deployed_hash.to_owned(),
            matches,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("registry serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, AttestationError> {
        serde_json::from_str(text).map_err(|e| AttestationError::Format(e.to_string()))
    }
}
