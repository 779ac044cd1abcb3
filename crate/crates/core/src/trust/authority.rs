// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::codec::{self, Canonical, CodecError, MapBuilder, MapReader, Value};
use crate::crypto::{self, SigningKey};

use super::cert::{issue_certificate, self_signed_root, Certificate, CertificateTemplate, Credential, Usage};
use super::TrustError;

/// A certificate authority together with its revocation state.
///
/// Revocations are visible through both channels: [`Authority::generate_crl`]
/// and [`Authority::status`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Authority {
    credential: Credential,
    next_serial: u64,
    issued: BTreeSet<u64>,
    revoked: BTreeMap<u64, i64>,
}

impl Authority {
    /// A self-signed root authority. The root takes serial 1.
    pub fn new_root(
        key: SigningKey,
        subject: &str,
        not_before: i64,
        not_after: i64,
    ) -> Result<Self, TrustError> {
        let root = self_signed_root(&key, 1, subject, not_before, not_after)?;
        Ok(Authority {
            credential: Credential {
                key,
                chain: vec![root],
            },
            next_serial: 2,
            issued: BTreeSet::new(),
            revoked: BTreeMap::new(),
        })
    }

    pub fn certificate(&self) -> &Certificate {
        self.credential.leaf()
    }

    pub fn credential(&self) -> &Credential {
        &self.credential
    }

    pub fn name(&self) -> &str {
        &self.certificate().subject
    }

    pub fn issued(&self) -> impl Iterator<Item = u64> + '_ {
        self.issued.iter().copied()
    }

    /// Issues a certificate with the next serial.
    pub fn issue(
        &mut self,
        subject: &str,
        public_key: Vec<u8>,
        usage: Usage,
        not_before: i64,
        not_after: i64,
    ) -> Result<Certificate, TrustError> {
        let cert = issue_certificate(
            &self.credential,
            CertificateTemplate {
                serial: self.next_serial,
                subject: subject.to_owned(),
                public_key,
                not_before,
                not_after,
                usage,
            },
        )?;
        self.issued.insert(cert.serial);
        self.next_serial += 1;
        Ok(cert)
    }

    /// Issues a leaf for `key` and returns it as a credential chained to this root.
    pub fn issue_credential(
        &mut self,
        key: SigningKey,
        subject: &str,
        usage: Usage,
        not_before: i64,
        not_after: i64,
    ) -> Result<Credential, TrustError> {
        let leaf = self.issue(subject, key.public_key(), usage, not_before, not_after)?;
        Ok(Credential {
            key,
            chain: vec![leaf, self.certificate().clone()],
        })
    }

    /// Records a revocation. Re-revoking keeps the original time.
    pub fn revoke(&mut self, serial: u64, revoked_at: i64) -> Result<(), TrustError> {
        if !self.issued.contains(&serial) {
            return Err(TrustError::UnknownSerial(serial));
        }
        self.revoked.entry(serial).or_insert(revoked_at);
        Ok(())
    }

    pub fn revoked_at(&self, serial: u64) -> Option<i64> {
        self.revoked.get(&serial).copied()
    }

    pub fn generate_crl(&self, this_update: i64) -> RevocationList {
        let mut crl = RevocationList {
            issuer: self.name().to_owned(),
            this_update,
            entries: self.revoked.iter().map(|(&s, &t)| (s, t)).collect(),
            signature: Vec::new(),
        };
        crl.signature = self.credential.key.sign(&crl.tbs_bytes());
        crl
    }

    pub fn status(&self, serial: u64, produced_at: i64) -> StatusResponse {
        let (status, revoked_at) = match self.revoked.get(&serial) {
            Some(&t) => (CertStatus::Revoked, Some(t)),
            None if self.issued.contains(&serial) => (CertStatus::Good, None),
            None => (CertStatus::Unknown, None),
        };
        let mut response = StatusResponse {
            serial,
            status,
            revoked_at,
            produced_at,
            responder_signature: Vec::new(),
        };
        response.responder_signature = self.credential.key.sign(&response.tbs_bytes());
        response
    }
}

impl Canonical for Authority {
    fn to_value(&self) -> Value {
        let revoked = self
            .revoked
            .iter()
            .map(|(&s, &t)| Value::Array(vec![Value::Unsigned(s), Value::int(t)]))
            .collect();
        MapBuilder::new()
            .field("credential", self.credential.to_value())
            .field("next_serial", self.next_serial)
            .field(
                "issued",
                Value::Array(self.issued.iter().map(|&s| Value::Unsigned(s)).collect()),
            )
            .field("revoked", Value::Array(revoked))
            .build()
    }

    fn from_value(value: Value) -> Result<Self, CodecError> {
        let mut r = MapReader::new(value)?;
        let credential = r.decode("credential")?;
        let next_serial = r.u64("next_serial")?;
        let issued = r
            .take("issued")?
            .into_array()?
            .iter()
            .map(Value::as_u64)
            .collect::<Result<_, _>>()?;
        let revoked = decode_entries(r.take("revoked")?)?.into_iter().collect();
        r.finish()?;
        Ok(Authority {
            credential,
            next_serial,
            issued,
            revoked,
        })
    }
}

fn decode_entries(value: Value) -> Result<Vec<(u64, i64)>, CodecError> {
    let entries = value
        .into_array()?
        .into_iter()
        .map(|e| {
            let pair = e.into_array()?;
            match pair.as_slice() {
                [serial, at] => Ok((serial.as_u64()?, at.as_i64()?)),
                _ => Err(CodecError::InvalidField {
                    field: "entries",
                    reason: "entry must be [serial, revoked_at]".into(),
                }),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    if !entries.windows(2).all(|w| w[0].0 < w[1].0) {
        return Err(CodecError::InvalidField {
            field: "entries",
            reason: "serials not strictly increasing".into(),
        });
    }
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RevocationList {
    pub issuer: String,
    pub this_update: i64,
    /// Sorted by serial, unique.
    pub entries: Vec<(u64, i64)>,
    pub signature: Vec<u8>,
}

impl RevocationList {
    fn tbs_value(&self) -> Value {
        let entries = self
            .entries
            .iter()
            .map(|&(s, t)| Value::Array(vec![Value::Unsigned(s), Value::int(t)]))
            .collect();
        MapBuilder::new()
            .field("issuer", self.issuer.as_str())
            .field("this_update", self.this_update)
            .field("entries", Value::Array(entries))
            .build()
    }

    pub fn tbs_bytes(&self) -> Vec<u8> {
        codec::encode(&self.tbs_value())
    }

    /// Offline check against the issuing certificate.
    pub fn verify(&self, issuer: &Certificate) -> bool {
        self.issuer == issuer.subject
            && self.entries.windows(2).all(|w| w[0].0 < w[1].0)
            && crypto::verify(&issuer.public_key, &self.tbs_bytes(), &self.signature)
    }

    pub fn revoked_at(&self, serial: u64) -> Option<i64> {
        self.entries
            .binary_search_by_key(&serial, |&(s, _)| s)
            .ok()
            .map(|i| self.entries[i].1)
    }
}

impl Canonical for RevocationList {
    fn to_value(&self) -> Value {
        let Value::Map(mut map) = self.tbs_value() else {
            unreachable!()
        };
        map.insert("signature".into(), Value::Bytes(self.signature.clone()));
        Value::Map(map)
    }

    fn from_value(value: Value) -> Result<Self, CodecError> {
        let mut r = MapReader::new(value)?;
        let crl = RevocationList {
            issuer: r.text("issuer")?,
            this_update: r.i64("this_update")?,
            entries: decode_entries(r.take("entries")?)?,
            signature: r.bytes("signature")?,
        };
        r.finish()?;
        Ok(crl)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CertStatus {
    Good,
    Revoked,
    Unknown,
}

impl CertStatus {
    pub fn code(self) -> u8 {
        match self {
            CertStatus::Good => 0,
            CertStatus::Revoked => 1,
            CertStatus::Unknown => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => CertStatus::Good,
            1 => CertStatus::Revoked,
            2 => CertStatus::Unknown,
            _ => return None,
        })
    }
}

impl fmt::Display for CertStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CertStatus::Good => "GOOD",
            CertStatus::Revoked => "REVOKED",
            CertStatus::Unknown => "UNKNOWN",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatusResponse {
    pub serial: u64,
    pub status: CertStatus,
    /// Present iff `status` is `Revoked`.
    pub revoked_at: Option<i64>,
    pub produced_at: i64,
    pub responder_signature: Vec<u8>,
}

impl StatusResponse {
    /// Signed bytes. The serial is covered even though the wire frame omits
    /// it, so a response cannot be replayed for another certificate.
    pub fn tbs_bytes(&self) -> Vec<u8> {
        codec::encode(
            &MapBuilder::new()
                .field("serial", self.serial)
                .field("status", self.status.code() as u64)
                .optional("revoked_at", self.revoked_at)
                .field("produced_at", self.produced_at)
                .build(),
        )
    }

    pub fn verify(&self, responder_key: &[u8]) -> bool {
        (self.status == CertStatus::Revoked) == self.revoked_at.is_some()
            && crypto::verify(responder_key, &self.tbs_bytes(), &self.responder_signature)
    }
}
