// SPDX-License-Identifier: Apache-2.0

//! The adversary toolkit.
//!
//! Each attack refuses to run where it would be trivially detected, so an
//! outcome always describes a forgery that at least one policy accepts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{Canonical, CodecError};
use crate::container::{self, Asset, ContainerError};
use crate::credentials::{BindingMode, Manifest};
use crate::crypto::Digest;
use crate::signer::{sign_asset, SignerConfig, SignerError};
use crate::credentials::Assertion;
use crate::timestamp::{issue_token, TimestampError};
use crate::trust::{verify_chain, Authority, Credential, TrustError, TrustList};
use crate::validator::{rebase_exclusions, Verdict};

pub const ATTACK_SCHEMA: &str = "prov-attack/1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttackError {
    #[error("timestamp is bound by the claim signature; replacing it would be detected")]
    BoundMode,
    #[error("TSA does not chain to a trusted anchor: {0}")]
    UntrustedTsa(String),
    #[error("segment `{0}` is not inside a declared exclusion; a splice would be detected")]
    NotExcluded(String),
    #[error("no metadata segment labelled `{0}`")]
    UnknownLabel(String),
    #[error("asset has no manifest")]
    NoManifest,
    #[error("replacement is {actual} bytes, segment payload is {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("manifest does not decode: {0}")]
    Manifest(#[from] CodecError),
    #[error(transparent)]
    Signer(#[from] SignerError),
    #[error(transparent)]
    Timestamp(#[from] TimestampError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error(transparent)]
    Trust(#[from] TrustError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackOutcome {
    pub name: String,
    pub mutated_asset: Asset,
    pub expected_spec_verdict: Verdict,
    pub expected_hardened_verdict: Verdict,
    /// When the expectations depend on the clock, the time they apply at.
    pub validation_time: Option<i64>,
    pub notes: String,
}

/// Serializable summary of an [`AttackOutcome`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub schema: String,
    pub name: String,
    pub asset_digest: String,
    pub expected_spec_verdict: Verdict,
    pub expected_hardened_verdict: Verdict,
    pub validation_time: Option<i64>,
    pub notes: String,
}

impl AttackOutcome {
    pub fn record(&self) -> AttackRecord {
        AttackRecord {
            schema: ATTACK_SCHEMA.to_owned(),
            name: self.name.clone(),
            asset_digest: Digest::of(self.mutated_asset.bytes()).to_hex(),
            expected_spec_verdict: self.expected_spec_verdict,
            expected_hardened_verdict: self.expected_hardened_verdict,
            validation_time: self.validation_time,
            notes: self.notes.clone(),
        }
    }

    pub fn record_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(&self.record()).expect("plain data serializes");
        bytes.push(b'\n');
        bytes
    }
}

fn read_manifest(asset: &Asset) -> Result<Manifest, AttackError> {
    let payload = container::extract_manifest(asset).ok_or(AttackError::NoManifest)?;
    Ok(Manifest::from_canonical_bytes(payload)?)
}

/// Swaps the timestamp token for one minted at `new_time` over the same
/// signature.
pub fn attack_timestamp_replace(
    asset: &Asset,
    rogue_tsa: &Credential,
    trust: &TrustList,
    new_time: i64,
) -> Result<AttackOutcome, AttackError> {
    let mut manifest = read_manifest(asset)?;
    let cs = &manifest.claim_signature;
    if cs.binding_mode == BindingMode::Bound {
        return Err(AttackError::BoundMode);
    }
    let chain = verify_chain(&rogue_tsa.chain, trust, new_time);
    if !chain.is_valid() {
        return Err(AttackError::UntrustedTsa(chain.to_string()));
    }
    let previous = cs.timestamp.as_ref().map(|t| t.gen_time);
    let token = issue_token(rogue_tsa, Digest::of(&cs.signature), new_time)?;
    manifest.claim_signature.timestamp = Some(token);
    let mutated = container::replace_manifest(asset, &manifest.canonical_bytes())?;
    let notes = match previous {
        Some(t) => format!("token time {t} replaced with {new_time} by `{}`", rogue_tsa.subject()),
        None => format!("token at {new_time} from `{}` attached to an untimestamped claim", rogue_tsa.subject()),
    };
    Ok(AttackOutcome {
        name: "timestamp-replace".into(),
        mutated_asset: mutated,
        expected_spec_verdict: Verdict::Accepted,
        expected_hardened_verdict: Verdict::Rejected,
        validation_time: None,
        notes,
    })
}

/// Overwrites the payload of an excluded metadata segment.
pub fn attack_exclusion_mutate(asset: &Asset, label: &str, new_payload: &[u8]) -> Result<AttackOutcome, AttackError> {
    let manifest = read_manifest(asset)?;
    let segment = asset
        .metadata_segment(label)
        .ok_or_else(|| AttackError::UnknownLabel(label.to_owned()))?;
    if new_payload.len() != segment.payload.length {
        return Err(AttackError::LengthMismatch {
            expected: segment.payload.length,
            actual: new_payload.len(),
        });
    }
    let manifest_range = asset.manifest_segment().expect("manifest decoded").range;
    let exclusions = rebase_exclusions(&manifest.claim.binding.exclusions, manifest_range);
    if !exclusions.iter().any(|r| r.contains(&segment.payload)) {
        return Err(AttackError::NotExcluded(label.to_owned()));
    }
    let before = String::from_utf8_lossy(asset.payload(segment)).into_owned();
    let mutated = container::splice_bytes(asset, segment.payload, new_payload)?;
    Ok(AttackOutcome {
        name: "exclusion-mutate".into(),
        mutated_asset: mutated,
        expected_spec_verdict: Verdict::Accepted,
        expected_hardened_verdict: Verdict::Rejected,
        validation_time: None,
        notes: format!(
            "`{label}` changed from {before:?} to {:?}",
            String::from_utf8_lossy(new_payload)
        ),
    })
}

/// Signs with a key whose certificate is then revoked at `revoke_at`.
///
/// The expectations hold for validation at any time from `revoke_at` on, with
/// the hardened policy given a revocation list issued after `revoke_at`.
pub fn attack_sign_with_revoked(
    asset: &Asset,
    assertions: &[Assertion],
    config: &SignerConfig<'_>,
    authority: &mut Authority,
    revoke_at: i64,
) -> Result<AttackOutcome, AttackError> {
    let signed = sign_asset(asset, assertions, config)?;
    let serial = config.credential.leaf().serial;
    authority.revoke(serial, revoke_at)?;
    Ok(AttackOutcome {
        name: "sign-with-revoked".into(),
        mutated_asset: signed,
        expected_spec_verdict: Verdict::Accepted,
        expected_hardened_verdict: Verdict::Rejected,
        validation_time: Some(revoke_at),
        notes: format!(
            "signed by `{}` (serial {serial}), revoked at {revoke_at}",
            config.credential.subject()
        ),
    })
}

/// Leaves the bytes alone and moves the validation clock.
pub fn attack_expiry_timewarp(asset: &Asset, validation_time: i64) -> Result<AttackOutcome, AttackError> {
    let manifest = read_manifest(asset)?;
    let leaf = manifest.claim_signature.leaf();
    let expired = validation_time > leaf.not_after;
    let archived = !manifest.archival.is_empty();
    Ok(AttackOutcome {
        name: "expiry-timewarp".into(),
        mutated_asset: asset.clone(),
        expected_spec_verdict: if expired { Verdict::Unverifiable } else { Verdict::Accepted },
        expected_hardened_verdict: if !expired || archived {
            Verdict::Accepted
        } else {
            Verdict::Unverifiable
        },
        validation_time: Some(validation_time),
        notes: format!(
            "signer `{}` valid until {}; validating at {validation_time}; {} archival token(s)",
            leaf.subject,
            leaf.not_after,
            manifest.archival.len()
        ),
    })
}

/// Removes the manifest segment. No policy can tell this from an asset that
/// never had credentials.
pub fn attack_strip_manifest(asset: &Asset) -> Result<AttackOutcome, AttackError> {
    let stripped = container::strip_manifest(asset).map_err(|e| match e {
        ContainerError::NoManifest => AttackError::NoManifest,
        other => other.into(),
    })?;
    Ok(AttackOutcome {
        name: "strip-manifest".into(),
        mutated_asset: stripped,
        expected_spec_verdict: Verdict::Unverifiable,
        expected_hardened_verdict: Verdict::Unverifiable,
        validation_time: None,
        notes: "manifest segment removed; no credentials remain".into(),
    })
}
