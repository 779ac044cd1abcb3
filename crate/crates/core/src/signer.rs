// SPDX-License-Identifier: Apache-2.0

//! Claim generator: binds assertions to an asset, signs, and embeds.

use thiserror::Error;

use crate::codec::Canonical;
use crate::container::{self, Asset, ByteRange, ContainerError};
use crate::credentials::{
    Assertion, BindingMode, Claim, ClaimSignature, CredentialError, Manifest, Redaction,
    RedactionRecord, RedactionTarget, Scalar, CREATED_LABEL, SPEC_VERSION,
};
use crate::crypto::{Digest, SHA256};
use crate::timestamp::{issue_token, TimestampError};
use crate::trust::{Credential, Usage};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SignerError {
    #[error("signer certificate is not valid at {0}")]
    ExpiredSignerCert(i64),
    #[error("`{0}` is not a signing leaf")]
    UsageViolation(String),
    #[error("asset already carries a manifest")]
    DuplicateManifest,
    #[error("no metadata segment labelled `{0}`")]
    UnknownLabel(String),
    #[error("bound signing requires a timestamp authority")]
    MissingTsa,
    #[error("manifest layout did not settle")]
    LayoutDidNotSettle,
    #[error(transparent)]
    Timestamp(#[from] TimestampError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error(transparent)]
    Credential(#[from] CredentialError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExclusionsPolicy {
    ManifestOnly,
    /// Also exclude the payloads of these metadata segments.
    ManifestPlusLabeled(Vec<String>),
}

#[derive(Debug, Clone)]
pub struct SignerConfig<'a> {
    pub generator_name: String,
    pub credential: &'a Credential,
    pub binding_mode: BindingMode,
    pub exclusions: ExclusionsPolicy,
    pub tsa: Option<&'a Credential>,
    pub clock: i64,
}

fn exclusions_for(asset: &Asset, policy: &ExclusionsPolicy) -> Result<Vec<ByteRange>, SignerError> {
    let mut ranges = vec![asset
        .manifest_segment()
        .expect("placeholder manifest embedded")
        .range];
    if let ExclusionsPolicy::ManifestPlusLabeled(labels) = policy {
        for label in labels {
            let seg = asset
                .metadata_segment(label)
                .ok_or_else(|| SignerError::UnknownLabel(label.clone()))?;
            ranges.push(seg.payload);
        }
    }
    ranges.sort();
    ranges.dedup();
    Ok(ranges)
}

fn sign_claim(claim: Claim, assertions: &[Assertion], config: &SignerConfig<'_>) -> Result<Manifest, SignerError> {
    let key = &config.credential.key;
    let claim_signature = match config.binding_mode {
        BindingMode::Unbound => {
            let signature = key.sign(&claim.canonical_bytes());
            let timestamp = config
                .tsa
                .map(|tsa| issue_token(tsa, Digest::of(&signature), config.clock))
                .transpose()?;
            ClaimSignature {
                signer_chain: config.credential.chain.clone(),
                signature,
                timestamp,
                binding_mode: BindingMode::Unbound,
            }
        }
        BindingMode::Bound => {
            // First pass: timestamp the claim. Second pass: sign claim and token together.
            let tsa = config.tsa.ok_or(SignerError::MissingTsa)?;
            let token = issue_token(tsa, claim.digest(), config.clock)?;
            let payload =
                crate::credentials::signed_payload(&claim, BindingMode::Bound, Some(&token.digest()))?;
            ClaimSignature {
                signer_chain: config.credential.chain.clone(),
                signature: key.sign(&payload),
                timestamp: Some(token),
                binding_mode: BindingMode::Bound,
            }
        }
    };
    Ok(Manifest {
        claim,
        assertions: assertions.to_vec(),
        claim_signature,
        redactions: Vec::new(),
        archival: Vec::new(),
    })
}

/// Signs `asset` and returns it with the manifest embedded.
///
/// A `std.created` assertion carrying the signing clock is added unless one
/// is supplied.
pub fn sign_asset(
    asset: &Asset,
    assertions: &[Assertion],
    config: &SignerConfig<'_>,
) -> Result<Asset, SignerError> {
    if asset.manifest_segment().is_some() {
        return Err(SignerError::DuplicateManifest);
    }
    let leaf = config.credential.leaf();
    if leaf.usage != Usage::LeafSigning {
        return Err(SignerError::UsageViolation(leaf.subject.clone()));
    }
    if !leaf.valid_at(config.clock) {
        return Err(SignerError::ExpiredSignerCert(config.clock));
    }
    if config.binding_mode == BindingMode::Bound && config.tsa.is_none() {
        return Err(SignerError::MissingTsa);
    }
    let mut assertions = assertions.to_vec();
    if !assertions.iter().any(|a| a.label() == CREATED_LABEL) {
        assertions.push(Assertion::with(CREATED_LABEL, [("time", Scalar::Int(config.clock))])?);
    }

    // The claim records the manifest's own byte range, so the manifest size
    // feeds back into its encoding. Sizes only grow with the recorded
    // offsets, so iterating from zero reaches a fixed point in a few rounds.
    let mut size = 0;
    for _ in 0..16 {
        let placeholder = container::embed_manifest(asset, &vec![0u8; size])?;
        let exclusions = exclusions_for(&placeholder, &config.exclusions)?;
        let binding = container::compute_hard_binding(&placeholder, &exclusions, SHA256)?;
        let claim = Claim::new(&config.generator_name, config.clock, &assertions, binding, SPEC_VERSION)?;
        let encoded = sign_claim(claim, &assertions, config)?.canonical_bytes();
        if encoded.len() == size {
            return Ok(container::embed_manifest(asset, &encoded)?);
        }
        size = encoded.len();
    }
    Err(SignerError::LayoutDidNotSettle)
}

/// Pins the current payload of an excluded metadata segment with a record
/// countersigned by `redactor`, so policies that only allow the manifest to
/// go unbound accept the exclusion.
pub fn countersign_segment(asset: &Asset, label: &str, redactor: &Credential) -> Result<Asset, SignerError> {
    let payload = container::extract_manifest(asset).ok_or(ContainerError::NoManifest)?;
    let mut manifest = Manifest::from_canonical_bytes(payload)
        .map_err(|e| SignerError::Container(ContainerError::MalformedContainer(e.to_string())))?;
    let segment = asset
        .metadata_segment(label)
        .ok_or_else(|| SignerError::UnknownLabel(label.to_owned()))?;
    let record = RedactionRecord {
        target: RedactionTarget::Segment,
        label: label.to_owned(),
        digest: Digest::of(asset.payload(segment)),
        redactor: redactor.subject().to_owned(),
        claim: manifest.claim.digest(),
    };
    manifest.redactions.push(Redaction::new(record, redactor));
    Ok(container::replace_manifest(asset, &manifest.canonical_bytes())?)
}
