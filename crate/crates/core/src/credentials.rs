// SPDX-License-Identifier: Apache-2.0

//! Claims, assertions, claim signatures and the manifest that carries them.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::codec::{Canonical, CodecError, MapBuilder, MapReader, Value};
use crate::container::HardBinding;
use crate::crypto::Digest;
use crate::timestamp::TimestampToken;
use crate::trust::{Certificate, Credential};

pub const SPEC_VERSION: &str = "2.2";
pub const MAX_LABEL_LEN: usize = 64;
pub const REDACTION_LABEL: &str = "prov.redaction";
pub const CREATED_LABEL: &str = "std.created";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CredentialError {
    #[error("invalid assertion label `{0}`")]
    InvalidLabel(String),
    #[error("binding mode and timestamp digest disagree")]
    BindingArgumentMismatch,
    #[error("no assertion labelled `{0}`")]
    LabelNotFound(String),
    #[error("`{REDACTION_LABEL}` records cannot be redacted")]
    RedactionNotRedactable,
    #[error("duplicate assertion label `{0}`")]
    DuplicateLabel(String),
    #[error("empty spec version")]
    EmptySpecVersion,
}

#[derive(Debug, Clone)]
pub enum Scalar {
    Text(String),
    Int(i64),
    Float(f64),
    Bytes(Vec<u8>),
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Scalar::Text(a), Scalar::Text(b)) => a == b,
            (Scalar::Int(a), Scalar::Int(b)) => a == b,
            (Scalar::Float(a), Scalar::Float(b)) => a.to_bits() == b.to_bits(),
            (Scalar::Bytes(a), Scalar::Bytes(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Scalar {}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Text(s) => write!(f, "{s:?}"),
            Scalar::Int(n) => write!(f, "{n}"),
            Scalar::Float(x) => write!(f, "{x}"),
            Scalar::Bytes(b) => write!(f, "0x{}", hex::encode(b)),
        }
    }
}

impl Scalar {
    fn to_value(&self) -> Value {
        match self {
            Scalar::Text(s) => Value::Text(s.clone()),
            Scalar::Int(n) => Value::int(*n),
            Scalar::Float(x) => Value::Float(*x),
            Scalar::Bytes(b) => Value::Bytes(b.clone()),
        }
    }

    fn from_value(value: Value) -> Result<Self, CodecError> {
        Ok(match value {
            Value::Text(s) => Scalar::Text(s),
            Value::Float(x) => Scalar::Float(x),
            Value::Bytes(b) => Scalar::Bytes(b),
            v @ (Value::Unsigned(_) | Value::Negative(_)) => Scalar::Int(v.as_i64()?),
            other => {
                return Err(CodecError::Type {
                    expected: "scalar",
                    found: other.kind(),
                })
            }
        })
    }
}

impl From<&str> for Scalar {
    fn from(s: &str) -> Self {
        Scalar::Text(s.to_owned())
    }
}

impl From<i64> for Scalar {
    fn from(n: i64) -> Self {
        Scalar::Int(n)
    }
}

impl From<f64> for Scalar {
    fn from(x: f64) -> Self {
        Scalar::Float(x)
    }
}

impl From<Vec<u8>> for Scalar {
    fn from(b: Vec<u8>) -> Self {
        Scalar::Bytes(b)
    }
}

fn check_label(label: &str) -> Result<(), CredentialError> {
    if label.is_empty() || label.len() > MAX_LABEL_LEN || !label.is_ascii() {
        return Err(CredentialError::InvalidLabel(label.to_owned()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assertion {
    label: String,
    pub payload: BTreeMap<String, Scalar>,
}

impl Assertion {
    pub fn new(label: &str, payload: BTreeMap<String, Scalar>) -> Result<Self, CredentialError> {
        check_label(label)?;
        Ok(Assertion {
            label: label.to_owned(),
            payload,
        })
    }

    /// Convenience constructor from key/value pairs.
    pub fn with<const N: usize>(
        label: &str,
        fields: [(&str, Scalar); N],
    ) -> Result<Self, CredentialError> {
        Self::new(
            label,
            fields.into_iter().map(|(k, v)| (k.to_owned(), v)).collect(),
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn get(&self, key: &str) -> Option<&Scalar> {
        self.payload.get(key)
    }
}

impl Canonical for Assertion {
    fn to_value(&self) -> Value {
        let payload = self
            .payload
            .iter()
            .map(|(k, v)| (k.clone(), v.to_value()))
            .collect();
        MapBuilder::new()
            .field("label", self.label.as_str())
            .field("data", Value::Map(payload))
            .build()
    }

    fn from_value(value: Value) -> Result<Self, CodecError> {
        let mut r = MapReader::new(value)?;
        let label = r.text("label")?;
        let payload = r
            .take("data")?
            .into_map()?
            .into_iter()
            .map(|(k, v)| Ok((k, Scalar::from_value(v)?)))
            .collect::<Result<_, CodecError>>()?;
        r.finish()?;
        Assertion::new(&label, payload).map_err(|e| CodecError::InvalidField {
            field: "label",
            reason: e.to_string(),
        })
    }
}

pub fn digest_assertion(assertion: &Assertion) -> Digest {
    Digest::of(&assertion.canonical_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Claim {
    pub generator: String,
    pub created_at: i64,
    /// Sorted by label, labels unique.
    pub assertion_digests: Vec<(String, Digest)>,
    pub binding: HardBinding,
    pub spec_version: String,
}

impl Claim {
    /// Builds a claim covering `assertions`, sorting the digest list.
    pub fn new(
        generator: &str,
        created_at: i64,
        assertions: &[Assertion],
        binding: HardBinding,
        spec_version: &str,
    ) -> Result<Self, CredentialError> {
        if spec_version.is_empty() {
            return Err(CredentialError::EmptySpecVersion);
        }
        let mut assertion_digests: Vec<(String, Digest)> = assertions
            .iter()
            .map(|a| (a.label.clone(), digest_assertion(a)))
            .collect();
        assertion_digests.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = assertion_digests.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(CredentialError::DuplicateLabel(w[0].0.clone()));
        }
        Ok(Claim {
            generator: generator.to_owned(),
            created_at,
            assertion_digests,
            binding,
            spec_version: spec_version.to_owned(),
        })
    }

    pub fn digest(&self) -> Digest {
        Digest::of(&self.canonical_bytes())
    }

    pub fn assertion_digest(&self, label: &str) -> Option<Digest> {
        self.assertion_digests
            .binary_search_by(|(l, _)| l.as_str().cmp(label))
            .ok()
            .map(|i| self.assertion_digests[i].1)
    }
}

impl Canonical for Claim {
    fn to_value(&self) -> Value {
        let digests = self
            .assertion_digests
            .iter()
            .map(|(label, d)| {
                MapBuilder::new()
                    .field("label", label.as_str())
                    .field("digest", d.to_value())
                    .build()
            })
            .collect();
        MapBuilder::new()
            .field("generator", self.generator.as_str())
            .field("created_at", self.created_at)
            .field("assertions", Value::Array(digests))
            .field("binding", self.binding.to_value())
            .field("spec_version", self.spec_version.as_str())
            .build()
    }

    fn from_value(value: Value) -> Result<Self, CodecError> {
        let mut r = MapReader::new(value)?;
        let generator = r.text("generator")?;
        let created_at = r.i64("created_at")?;
        let mut assertion_digests = Vec::new();
        for item in r.take("assertions")?.into_array()? {
            let mut e = MapReader::new(item)?;
            let label = e.text("label")?;
            let digest = Digest::from_value(e.take("digest")?, "digest")?;
            e.finish()?;
            assertion_digests.push((label, digest));
        }
        let binding = HardBinding::from_value(r.take("binding")?)?;
        let spec_version = r.text("spec_version")?;
        r.finish()?;
        if !assertion_digests.windows(2).all(|w| w[0].0 < w[1].0) {
            return Err(CodecError::InvalidField {
                field: "assertions",
                reason: "labels not strictly sorted".into(),
            });
        }
        if spec_version.is_empty() {
            return Err(CodecError::InvalidField {
                field: "spec_version",
                reason: "empty".into(),
            });
        }
        Ok(Claim {
            generator,
            created_at,
            assertion_digests,
            binding,
            spec_version,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BindingMode {
    /// Token attached after signing; nothing signed references it.
    Unbound,
    /// Token digest folded into the signed payload.
    Bound,
}

impl BindingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BindingMode::Unbound => "unbound",
            BindingMode::Bound => "bound",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "unbound" => Some(BindingMode::Unbound),
            "bound" => Some(BindingMode::Bound),
            _ => None,
        }
    }
}

/// The bytes a claim signature covers.
///
/// In `Unbound` mode this is the claim encoding alone, so the attached token
/// can be swapped without touching the signature. `Bound` appends the token
/// digest.
pub fn signed_payload(
    claim: &Claim,
    mode: BindingMode,
    timestamp_digest: Option<&Digest>,
) -> Result<Vec<u8>, CredentialError> {
    let mut payload = claim.canonical_bytes();
    match (mode, timestamp_digest) {
        (BindingMode::Unbound, None) => {}
        (BindingMode::Bound, Some(d)) => payload.extend_from_slice(d.as_bytes()),
        _ => return Err(CredentialError::BindingArgumentMismatch),
    }
    Ok(payload)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClaimSignature {
    /// Leaf first.
    pub signer_chain: Vec<Certificate>,
    pub signature: Vec<u8>,
    pub timestamp: Option<TimestampToken>,
    pub binding_mode: BindingMode,
}

impl ClaimSignature {
    pub fn leaf(&self) -> &Certificate {
        &self.signer_chain[0]
    }

    /// The digest a timestamp token over this signature must carry.
    ///
    /// Unbound tokens cover the signature bytes. A bound token is obtained
    /// before the final signature exists, so it covers the claim instead.
    pub fn token_subject(&self, claim: &Claim) -> Digest {
        match self.binding_mode {
            BindingMode::Unbound => Digest::of(&self.signature),
            BindingMode::Bound => claim.digest(),
        }
    }

    /// Reconstructs the signed bytes for verification.
    pub fn payload_for(&self, claim: &Claim) -> Result<Vec<u8>, CredentialError> {
        match self.binding_mode {
            BindingMode::Unbound => signed_payload(claim, BindingMode::Unbound, None),
            BindingMode::Bound => {
                let token = self
                    .timestamp
                    .as_ref()
                    .ok_or(CredentialError::BindingArgumentMismatch)?;
                signed_payload(claim, BindingMode::Bound, Some(&token.digest()))
            }
        }
    }
}

impl Canonical for ClaimSignature {
    fn to_value(&self) -> Value {
        MapBuilder::new()
            .field("chain", self.signer_chain.to_value())
            .field("signature", self.signature.as_slice())
            .optional("timestamp", self.timestamp.as_ref().map(|t| t.to_value()))
            .field("binding", self.binding_mode.as_str())
            .build()
    }

    fn from_value(value: Value) -> Result<Self, CodecError> {
        let mut r = MapReader::new(value)?;
        let signer_chain: Vec<Certificate> = r.decode("chain")?;
        let signature = r.bytes("signature")?;
        let timestamp = r.decode_optional("timestamp")?;
        let mode = r.text("binding")?;
        r.finish()?;
        let binding_mode = BindingMode::parse(&mode).ok_or_else(|| CodecError::InvalidField {
            field: "binding",
            reason: format!("unknown mode `{mode}`"),
        })?;
        if signer_chain.is_empty() {
            return Err(CodecError::InvalidField {
                field: "chain",
                reason: "empty signer chain".into(),
            });
        }
        if binding_mode == BindingMode::Bound && timestamp.is_none() {
            return Err(CodecError::InvalidField {
                field: "timestamp",
                reason: "bound signature without a token".into(),
            });
        }
        Ok(ClaimSignature {
            signer_chain,
            signature,
            timestamp,
            binding_mode,
        })
    }
}

/// What a countersigned redaction record refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RedactionTarget {
    /// An assertion removed from the manifest; digest is the original.
    Assertion,
    /// An excluded metadata segment; digest is of its current payload.
    Segment,
}

impl RedactionTarget {
    pub fn as_str(self) -> &'static str {
        match self {
            RedactionTarget::Assertion => "assertion",
            RedactionTarget::Segment => "segment",
        }
    }
}

/// A `prov.redaction` record and the redactor's signature over it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Redaction {
    pub record: Assertion,
    pub countersignature: ClaimSignature,
}

/// Parsed fields of a redaction record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RedactionRecord {
    pub target: RedactionTarget,
    pub label: String,
    pub digest: Digest,
    pub redactor: String,
    pub claim: Digest,
}

impl Redaction {
    pub fn new(record: RedactionRecord, redactor: &Credential) -> Self {
        let record = Assertion::with(
            REDACTION_LABEL,
            [
                ("target", record.target.as_str().into()),
                ("label", record.label.as_str().into()),
                ("digest", record.digest.0.to_vec().into()),
                ("redactor", record.redactor.as_str().into()),
                ("claim", record.claim.0.to_vec().into()),
            ],
        )
        .expect("static label");
        let signature = redactor.key.sign(&record.canonical_bytes());
        Redaction {
            record,
            countersignature: ClaimSignature {
                signer_chain: redactor.chain.clone(),
                signature,
                timestamp: None,
                binding_mode: BindingMode::Unbound,
            },
        }
    }

    pub fn parse(&self) -> Option<RedactionRecord> {
        if self.record.label() != REDACTION_LABEL || self.record.payload.len() != 5 {
            return None;
        }
        let text = |k| match self.record.get(k) {
            Some(Scalar::Text(s)) => Some(s.clone()),
            _ => None,
        };
        let digest = |k| match self.record.get(k) {
            Some(Scalar::Bytes(b)) => Digest::from_slice(b),
            _ => None,
        };
        let target = match text("target")?.as_str() {
            "assertion" => RedactionTarget::Assertion,
            "segment" => RedactionTarget::Segment,
            _ => return None,
        };
        Some(RedactionRecord {
            target,
            label: text("label")?,
            digest: digest("digest")?,
            redactor: text("redactor")?,
            claim: digest("claim")?,
        })
    }

    pub fn signature_verifies(&self) -> bool {
        crate::crypto::verify(
            &self.countersignature.leaf().public_key,
            &self.record.canonical_bytes(),
            &self.countersignature.signature,
        )
    }
}

impl Canonical for Redaction {
    fn to_value(&self) -> Value {
        MapBuilder::new()
            .field("record", self.record.to_value())
            .field("countersignature", self.countersignature.to_value())
            .build()
    }

    fn from_value(value: Value) -> Result<Self, CodecError> {
        let mut r = MapReader::new(value)?;
        let record = r.decode("record")?;
        let countersignature = r.decode("countersignature")?;
        r.finish()?;
        Ok(Redaction {
            record,
            countersignature,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub claim: Claim,
    pub assertions: Vec<Assertion>,
    pub claim_signature: ClaimSignature,
    pub redactions: Vec<Redaction>,
    /// Re-timestamp chain; token `i` covers the manifest encoded with the
    /// first `i` tokens.
    pub archival: Vec<TimestampToken>,
}

impl Manifest {
    pub fn assertion(&self, label: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.label == label)
    }

    /// Labels committed by the claim whose assertion is no longer present.
    pub fn tombstones(&self) -> Vec<(&str, Digest)> {
        self.claim
            .assertion_digests
            .iter()
            .filter(|(label, _)| self.assertion(label).is_none())
            .map(|(label, d)| (label.as_str(), *d))
            .collect()
    }

    /// Encoding of this manifest with only the first `n` archival tokens.
    pub fn archival_prefix_bytes(&self, n: usize) -> Vec<u8> {
        let mut prefix = self.clone();
        prefix.archival.truncate(n);
        prefix.canonical_bytes()
    }
}

impl Canonical for Manifest {
    fn to_value(&self) -> Value {
        MapBuilder::new()
            .field("claim", self.claim.to_value())
            .field("assertions", self.assertions.to_value())
            .field("signature", self.claim_signature.to_value())
            .field("redactions", self.redactions.to_value())
            .field("archival", self.archival.to_value())
            .build()
    }

    fn from_value(value: Value) -> Result<Self, CodecError> {
        let mut r = MapReader::new(value)?;
        let manifest = Manifest {
            claim: r.decode("claim")?,
            assertions: r.decode("assertions")?,
            claim_signature: r.decode("signature")?,
            redactions: r.decode("redactions")?,
            archival: r.decode("archival")?,
        };
        r.finish()?;
        Ok(manifest)
    }
}

pub enum RedactionMode<'a> {
    /// Drop the assertion and leave its digest in the claim as a tombstone.
    SpecDrop,
    /// Drop it and append a record countersigned by the redactor.
    HardenedCountersign(&'a Credential),
}

pub fn redact_assertion(
    manifest: &Manifest,
    label: &str,
    mode: RedactionMode<'_>,
) -> Result<Manifest, CredentialError> {
    if label == REDACTION_LABEL {
        return Err(CredentialError::RedactionNotRedactable);
    }
    let index = manifest
        .assertions
        .iter()
        .position(|a| a.label == label)
        .ok_or_else(|| CredentialError::LabelNotFound(label.to_owned()))?;
    let mut out = manifest.clone();
    let removed = out.assertions.remove(index);
    if let RedactionMode::HardenedCountersign(redactor) = mode {
        let record = RedactionRecord {
            target: RedactionTarget::Assertion,
            label: label.to_owned(),
            digest: digest_assertion(&removed),
            redactor: redactor.subject().to_owned(),
            claim: manifest.claim.digest(),
        };
        out.redactions.push(Redaction::new(record, redactor));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::container::ByteRange;
    use crate::crypto::SHA256;

    fn binding() -> HardBinding {
        HardBinding {
            algorithm: SHA256.into(),
            exclusions: vec![ByteRange::new(20, 100)],
            digest: Digest::of(b"asset"),
        }
    }

    fn gps(lat: f64) -> Assertion {
        Assertion::with("std.gps", [("lat", lat.into()), ("lon", (-77.0365).into())]).unwrap()
    }

    fn claim() -> Claim {
        let created = Assertion::with(CREATED_LABEL, [("time", 1_736_899_200i64.into())]).unwrap();
        Claim::new("Camera Z", 1_736_899_200, &[gps(38.8977), created], binding(), SPEC_VERSION)
            .unwrap()
    }

    #[test]
    fn label_rules() {
        assert!(Assertion::new("", BTreeMap::new()).is_err());
        assert!(Assertion::new(&"x".repeat(65), BTreeMap::new()).is_err());
        assert!(Assertion::new("std.gpsé", BTreeMap::new()).is_err());
        assert!(Assertion::new(&"x".repeat(64), BTreeMap::new()).is_ok());
    }

    #[test]
    fn insertion_order_does_not_matter() {
        let mut a = BTreeMap::new();
        a.insert("lon".to_owned(), Scalar::Int(2));
        a.insert("lat".to_owned(), Scalar::Int(1));
        let mut b = BTreeMap::new();
        b.insert("lat".to_owned(), Scalar::Int(1));
        b.insert("lon".to_owned(), Scalar::Int(2));
        let a = Assertion::new("std.gps", a).unwrap();
        let b = Assertion::new("std.gps", b).unwrap();
        assert_eq!(a.canonical_bytes(), b.canonical_bytes());
        assert_eq!(digest_assertion(&a), digest_assertion(&b));
    }

    #[test]
    fn gps_change_changes_digest() {
        assert_ne!(digest_assertion(&gps(38.8977)), digest_assertion(&gps(38.8978)));
    }

    #[test]
    fn claim_digests_sorted() {
        let c = claim();
        let labels: Vec<_> = c.assertion_digests.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(labels, ["std.created", "std.gps"]);
        assert_eq!(c.assertion_digest("std.gps"), Some(digest_assertion(&gps(38.8977))));
        assert_eq!(Claim::from_canonical_bytes(&c.canonical_bytes()).unwrap(), c);
    }

    #[test]
    fn duplicate_or_empty_rejected() {
        assert_eq!(
            Claim::new("g", 0, &[gps(1.0), gps(2.0)], binding(), SPEC_VERSION),
            Err(CredentialError::DuplicateLabel("std.gps".into()))
        );
        assert_eq!(
            Claim::new("g", 0, &[], binding(), ""),
            Err(CredentialError::EmptySpecVersion)
        );
    }

    #[test]
    fn generator_bit_flip_changes_encoding() {
        let c = claim();
        let mut flipped = c.clone();
        flipped.generator = "Camera [".into(); // 'Z' ^ 0x01
        assert_ne!(c.canonical_bytes(), flipped.canonical_bytes());
    }

    #[test]
    fn payload_modes() {
        let c = claim();
        let d1 = Digest::of(b"token one");
        let d2 = Digest::of(b"token two");
        let unbound = signed_payload(&c, BindingMode::Unbound, None).unwrap();
        assert_eq!(unbound, c.canonical_bytes());
        let b1 = signed_payload(&c, BindingMode::Bound, Some(&d1)).unwrap();
        let b2 = signed_payload(&c, BindingMode::Bound, Some(&d2)).unwrap();
        assert_ne!(b1, b2);
        assert_eq!(&b1[..unbound.len()], unbound.as_slice());
        assert_eq!(
            signed_payload(&c, BindingMode::Bound, None),
            Err(CredentialError::BindingArgumentMismatch)
        );
        assert_eq!(
            signed_payload(&c, BindingMode::Unbound, Some(&d1)),
            Err(CredentialError::BindingArgumentMismatch)
        );
    }
}
