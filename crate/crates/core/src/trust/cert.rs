// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use crate::codec::{Canonical, CodecError, MapBuilder, MapReader, Value};
use crate::crypto::{self, SigningKey};

use super::TrustError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Usage {
    Root,
    Intermediate,
    LeafSigning,
    LeafTsa,
}

impl Usage {
    pub fn as_str(self) -> &'static str {
        match self {
            Usage::Root => "root",
            Usage::Intermediate => "intermediate",
            Usage::LeafSigning => "leaf-signing",
            Usage::LeafTsa => "leaf-tsa",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "root" => Usage::Root,
            "intermediate" => Usage::Intermediate,
            "leaf-signing" => Usage::LeafSigning,
            "leaf-tsa" => Usage::LeafTsa,
            _ => return None,
        })
    }

    pub fn can_issue(self) -> bool {
        matches!(self, Usage::Root | Usage::Intermediate)
    }
}

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Certificate fields before the issuer signs them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateTemplate {
    pub serial: u64,
    pub subject: String,
    pub public_key: Vec<u8>,
    pub not_before: i64,
    pub not_after: i64,
    pub usage: Usage,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Certificate {
    pub serial: u64,
    pub subject: String,
    pub issuer: String,
    pub public_key: Vec<u8>,
    pub not_before: i64,
    pub not_after: i64,
    pub usage: Usage,
    pub issuer_signature: Vec<u8>,
}

impl Certificate {
    fn tbs_value(&self) -> Value {
        MapBuilder::new()
            .field("serial", self.serial)
            .field("subject", self.subject.as_str())
            .field("issuer", self.issuer.as_str())
            .field("public_key", self.public_key.as_slice())
            .field("not_before", self.not_before)
            .field("not_after", self.not_after)
            .field("usage", self.usage.as_str())
            .build()
    }

    /// The bytes covered by `issuer_signature`.
    pub fn tbs_bytes(&self) -> Vec<u8> {
        crate::codec::encode(&self.tbs_value())
    }

    pub fn valid_at(&self, at: i64) -> bool {
        self.not_before <= at && at <= self.not_after
    }

    pub fn is_signed_by(&self, public_key: &[u8]) -> bool {
        crypto::verify(public_key, &self.tbs_bytes(), &self.issuer_signature)
    }

    pub fn is_self_signed(&self) -> bool {
        self.issuer == self.subject && self.is_signed_by(&self.public_key)
    }
}

impl Canonical for Certificate {
    fn to_value(&self) -> Value {
        let Value::Map(mut map) = self.tbs_value() else {
            unreachable!()
        };
        map.insert(
            "signature".to_owned(),
            Value::Bytes(self.issuer_signature.clone()),
        );
        Value::Map(map)
    }

    fn from_value(value: Value) -> Result<Self, CodecError> {
        let mut r = MapReader::new(value)?;
        let usage = r.text("usage")?;
        let cert = Certificate {
            serial: r.u64("serial")?,
            subject: r.text("subject")?,
            issuer: r.text("issuer")?,
            public_key: r.bytes("public_key")?,
            not_before: r.i64("not_before")?,
            not_after: r.i64("not_after")?,
            usage: Usage::parse(&usage).ok_or_else(|| CodecError::InvalidField {
                field: "usage",
                reason: format!("unknown usage `{usage}`"),
            })?,
            issuer_signature: r.bytes("signature")?,
        };
        r.finish()?;
        if cert.not_before >= cert.not_after {
            return Err(CodecError::InvalidField {
                field: "not_after",
                reason: "validity window is empty".into(),
            });
        }
        Ok(cert)
    }
}

/// A private key with its certificate chain (leaf first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Credential {
    pub key: SigningKey,
    pub chain: Vec<Certificate>,
}

impl Credential {
    pub fn leaf(&self) -> &Certificate {
        &self.chain[0]
    }

    pub fn subject(&self) -> &str {
        &self.leaf().subject
    }
}

impl Canonical for Credential {
    fn to_value(&self) -> Value {
        MapBuilder::new()
            .field("key", self.key.seed().as_slice())
            .field("chain", self.chain.to_value())
            .build()
    }

    fn from_value(value: Value) -> Result<Self, CodecError> {
        let mut r = MapReader::new(value)?;
        let seed = r.bytes("key")?;
        let chain: Vec<Certificate> = r.decode("chain")?;
        r.finish()?;
        let seed: [u8; 32] = seed.try_into().map_err(|_| CodecError::InvalidField {
            field: "key",
            reason: "key seed must be 32 bytes".into(),
        })?;
        if chain.is_empty() {
            return Err(CodecError::InvalidField {
                field: "chain",
                reason: "empty chain".into(),
            });
        }
        Ok(Credential {
            key: SigningKey::from_seed(seed),
            chain,
        })
    }
}

pub fn self_signed_root(
    key: &SigningKey,
    serial: u64,
    subject: &str,
    not_before: i64,
    not_after: i64,
) -> Result<Certificate, TrustError> {
    if not_before >= not_after {
        return Err(TrustError::EmptyValidity);
    }
    let mut cert = Certificate {
        serial,
        subject: subject.to_owned(),
        issuer: subject.to_owned(),
        public_key: key.public_key(),
        not_before,
        not_after,
        usage: Usage::Root,
        issuer_signature: Vec::new(),
    };
    cert.issuer_signature = key.sign(&cert.tbs_bytes());
    Ok(cert)
}

pub fn issue_certificate(
    issuer: &Credential,
    template: CertificateTemplate,
) -> Result<Certificate, TrustError> {
    let parent = issuer.leaf();
    if !parent.usage.can_issue() {
        return Err(TrustError::UsageViolation {
            subject: parent.subject.clone(),
            usage: parent.usage,
        });
    }
    if template.usage == Usage::Root {
        return Err(TrustError::UsageViolation {
            subject: template.subject,
            usage: Usage::Root,
        });
    }
    if template.not_before >= template.not_after {
        return Err(TrustError::EmptyValidity);
    }
    if template.not_before < parent.not_before || template.not_after > parent.not_after {
        return Err(TrustError::ValidityNotNested);
    }
    let mut cert = Certificate {
        serial: template.serial,
        subject: template.subject,
        issuer: parent.subject.clone(),
        public_key: template.public_key,
        not_before: template.not_before,
        not_after: template.not_after,
        usage: template.usage,
        issuer_signature: Vec::new(),
    };
    cert.issuer_signature = issuer.key.sign(&cert.tbs_bytes());
    Ok(cert)
}

/// Root certificates a validator accepts as anchors. Never empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrustList {
    anchors: Vec<Certificate>,
}

impl TrustList {
    pub fn new(anchors: impl IntoIterator<Item = Certificate>) -> Result<Self, TrustError> {
        let mut anchors: Vec<Certificate> = anchors.into_iter().collect();
        if anchors.is_empty() {
            return Err(TrustError::EmptyTrustList);
        }
        if let Some(bad) = anchors
            .iter()
            .find(|a| a.usage != Usage::Root || !a.is_self_signed())
        {
            return Err(TrustError::NotAnAnchor(bad.subject.clone()));
        }
        anchors.sort();
        anchors.dedup();
        Ok(TrustList { anchors })
    }

    pub fn anchors(&self) -> &[Certificate] {
        &self.anchors
    }

    pub fn with_anchor(&self, anchor: Certificate) -> Result<Self, TrustError> {
        Self::new(self.anchors.iter().cloned().chain([anchor]))
    }
}

impl Canonical for TrustList {
    fn to_value(&self) -> Value {
        self.anchors.to_value()
    }

    fn from_value(value: Value) -> Result<Self, CodecError> {
        let anchors: Vec<Certificate> = Vec::from_value(value)?;
        TrustList::new(anchors).map_err(|e| CodecError::InvalidField {
            field: "anchors",
            reason: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainVerdict {
    Valid,
    Expired { serial: u64, not_after: i64 },
    NotYetValid { serial: u64, not_before: i64 },
    UntrustedRoot,
    BadLinkSignature { serial: u64 },
    UsageViolation { serial: u64 },
}

impl ChainVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, ChainVerdict::Valid)
    }

    /// Only the validity window failed.
    pub fn is_time_failure(&self) -> bool {
        matches!(
            self,
            ChainVerdict::Expired { .. } | ChainVerdict::NotYetValid { .. }
        )
    }
}

impl fmt::Display for ChainVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainVerdict::Valid => f.write_str("VALID"),
            ChainVerdict::Expired { serial, not_after } => {
                write!(f, "EXPIRED (serial {serial}, not_after {not_after})")
            }
            ChainVerdict::NotYetValid { serial, not_before } => {
                write!(f, "NOT_YET_VALID (serial {serial}, not_before {not_before})")
            }
            ChainVerdict::UntrustedRoot => f.write_str("UNTRUSTED_ROOT"),
            ChainVerdict::BadLinkSignature { serial } => {
                write!(f, "BAD_LINK_SIGNATURE (serial {serial})")
            }
            ChainVerdict::UsageViolation { serial } => {
                write!(f, "USAGE_VIOLATION (serial {serial})")
            }
        }
    }
}

fn window_verdict<'a>(certs: impl IntoIterator<Item = &'a Certificate>, at: i64) -> ChainVerdict {
    for c in certs {
        if at < c.not_before {
            return ChainVerdict::NotYetValid {
                serial: c.serial,
                not_before: c.not_before,
            };
        }
        if at > c.not_after {
            return ChainVerdict::Expired {
                serial: c.serial,
                not_after: c.not_after,
            };
        }
    }
    ChainVerdict::Valid
}

/// Checks links, anchoring and validity windows at `at_time`.
///
/// The chain may end at an anchor or at a certificate issued by one. When
/// several anchors could terminate the path, any one that yields a valid
/// window suffices.
pub fn verify_chain(chain: &[Certificate], trust: &TrustList, at_time: i64) -> ChainVerdict {
    let Some(top) = chain.last() else {
        return ChainVerdict::UntrustedRoot;
    };
    for link in chain.windows(2) {
        let (child, parent) = (&link[0], &link[1]);
        if child.issuer != parent.subject || !child.is_signed_by(&parent.public_key) {
            return ChainVerdict::BadLinkSignature {
                serial: child.serial,
            };
        }
        if !parent.usage.can_issue() {
            return ChainVerdict::UsageViolation {
                serial: parent.serial,
            };
        }
    }
    if trust.anchors.contains(top) {
        return window_verdict(chain, at_time);
    }
    if top.usage == Usage::Root {
        return ChainVerdict::UntrustedRoot;
    }
    let mut first_failure = None;
    for anchor in trust
        .anchors
        .iter()
        .filter(|a| a.subject == top.issuer && top.is_signed_by(&a.public_key))
    {
        match window_verdict(chain.iter().chain([anchor]), at_time) {
            ChainVerdict::Valid => return ChainVerdict::Valid,
            failure => {
                first_failure.get_or_insert(failure);
            }
        }
    }
    first_failure.unwrap_or(ChainVerdict::UntrustedRoot)
}
