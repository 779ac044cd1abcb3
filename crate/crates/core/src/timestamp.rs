// SPDX-License-Identifier: Apache-2.0

//! Timestamp authority: tokens over digests, verification, and archival
//! re-timestamping of manifests.

use std::fmt;

use thiserror::Error;

use crate::codec::{self, Canonical, CodecError, MapBuilder, MapReader, Value};
use crate::container::{self, Asset, ContainerError};
use crate::credentials::Manifest;
use crate::crypto::{self, Digest};
use crate::trust::{verify_chain, Certificate, Credential, TrustList, Usage};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimestampError {
    #[error("TSA certificate `{0}` is not a timestamping leaf")]
    UsageViolation(String),
    #[error("TSA certificate is not valid at {0}")]
    ExpiredTsaCert(i64),
    #[error("asset has no manifest")]
    NoManifest,
    #[error("manifest does not decode: {0}")]
    Manifest(#[from] CodecError),
    #[error(transparent)]
    Container(#[from] ContainerError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimestampToken {
    pub message_digest: Digest,
    pub gen_time: i64,
    /// Leaf first; the leaf has usage `LeafTsa`.
    pub tsa_chain: Vec<Certificate>,
    pub tsa_signature: Vec<u8>,
}

impl TimestampToken {
    /// Bytes covered by `tsa_signature`.
    pub fn tbs_bytes(message_digest: &Digest, gen_time: i64) -> Vec<u8> {
        codec::encode(
            &MapBuilder::new()
                .field("digest", message_digest.to_value())
                .field("gen_time", gen_time)
                .build(),
        )
    }

    /// Digest of the whole token, as folded into bound signatures.
    pub fn digest(&self) -> Digest {
        Digest::of(&self.canonical_bytes())
    }
}

impl Canonical for TimestampToken {
    fn to_value(&self) -> Value {
        MapBuilder::new()
            .field("digest", self.message_digest.to_value())
            .field("gen_time", self.gen_time)
            .field("chain", self.tsa_chain.to_value())
            .field("signature", self.tsa_signature.as_slice())
            .build()
    }

    fn from_value(value: Value) -> Result<Self, CodecError> {
        let mut r = MapReader::new(value)?;
        let token = TimestampToken {
            message_digest: Digest::from_value(r.take("digest")?, "digest")?,
            gen_time: r.i64("gen_time")?,
            tsa_chain: r.decode("chain")?,
            tsa_signature: r.bytes("signature")?,
        };
        r.finish()?;
        Ok(token)
    }
}

pub fn issue_token(
    tsa: &Credential,
    message_digest: Digest,
    clock: i64,
) -> Result<TimestampToken, TimestampError> {
    let leaf = tsa.leaf();
    if leaf.usage != Usage::LeafTsa {
        return Err(TimestampError::UsageViolation(leaf.subject.clone()));
    }
    if !leaf.valid_at(clock) {
        return Err(TimestampError::ExpiredTsaCert(clock));
    }
    let tsa_signature = tsa
        .key
        .sign(&TimestampToken::tbs_bytes(&message_digest, clock));
    Ok(TimestampToken {
        message_digest,
        gen_time: clock,
        tsa_chain: tsa.chain.clone(),
        tsa_signature,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenVerdict {
    Valid,
    DigestMismatch,
    BadTokenSignature,
    UntrustedTsa(String),
    /// `gen_time` lies after the validation time.
    FutureGenTime,
}

impl TokenVerdict {
    pub fn is_valid(&self) -> bool {
        *self == TokenVerdict::Valid
    }
}

impl fmt::Display for TokenVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenVerdict::Valid => f.write_str("VALID"),
            TokenVerdict::DigestMismatch => f.write_str("DIGEST_MISMATCH"),
            TokenVerdict::BadTokenSignature => f.write_str("BAD_TOKEN_SIGNATURE"),
            TokenVerdict::UntrustedTsa(why) => write!(f, "UNTRUSTED_TSA ({why})"),
            TokenVerdict::FutureGenTime => f.write_str("FUTURE_GEN_TIME"),
        }
    }
}

/// Verifies a token. The TSA chain is evaluated at the token's `gen_time`,
/// not at `at_time`; `at_time` only bounds `gen_time` from above.
pub fn verify_token(
    token: &TimestampToken,
    expected_digest: &Digest,
    trust: &TrustList,
    at_time: i64,
) -> TokenVerdict {
    let Some(leaf) = token.tsa_chain.first() else {
        return TokenVerdict::UntrustedTsa("empty chain".into());
    };
    let tbs = TimestampToken::tbs_bytes(&token.message_digest, token.gen_time);
    if !crypto::verify(&leaf.public_key, &tbs, &token.tsa_signature) {
        return TokenVerdict::BadTokenSignature;
    }
    if token.message_digest != *expected_digest {
        return TokenVerdict::DigestMismatch;
    }
    if leaf.usage != Usage::LeafTsa {
        return TokenVerdict::UntrustedTsa(format!("`{}` is not a TSA leaf", leaf.subject));
    }
    let chain = verify_chain(&token.tsa_chain, trust, token.gen_time);
    if !chain.is_valid() {
        return TokenVerdict::UntrustedTsa(chain.to_string());
    }
    if token.gen_time > at_time {
        return TokenVerdict::FutureGenTime;
    }
    TokenVerdict::Valid
}

/// Appends a token over the current manifest payload. Earlier tokens stay in
/// place, so the chain grows by one link per call.
pub fn archival_extend(asset: &Asset, tsa: &Credential, clock: i64) -> Result<Asset, TimestampError> {
    let payload = container::extract_manifest(asset).ok_or(TimestampError::NoManifest)?;
    let mut manifest = Manifest::from_canonical_bytes(payload)?;
    let token = issue_token(tsa, Digest::of(payload), clock)?;
    manifest.archival.push(token);
    Ok(container::replace_manifest(asset, &manifest.canonical_bytes())?)
}
