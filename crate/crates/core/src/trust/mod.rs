// SPDX-License-Identifier: Apache-2.0

//! Certificates, trust lists, chain verification and both revocation
//! channels (signed revocation lists and the online status service).

mod authority;
mod cert;
pub mod status;

use thiserror::Error;

pub use authority::{Authority, CertStatus, RevocationList, StatusResponse};
pub use cert::{
    issue_certificate, self_signed_root, verify_chain, Certificate, CertificateTemplate,
    ChainVerdict, Credential, TrustList, Usage,
};
pub use status::{query_status, run_status_service, ServiceClock, SharedAuthority, StatusService};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrustError {
    #[error("`{subject}` has usage {usage} and cannot perform this operation")]
    UsageViolation { subject: String, usage: Usage },
    #[error("validity window not nested inside the issuer's")]
    ValidityNotNested,
    #[error("not_before must precede not_after")]
    EmptyValidity,
    #[error("serial {0} was not issued by this authority")]
    UnknownSerial(u64),
    #[error("status service unreachable: {0}")]
    ServiceUnreachable(String),
    #[error("cannot bind status service: {0}")]
    BindFailure(String),
    #[error("trust list must not be empty")]
    EmptyTrustList,
    #[error("`{0}` is not a self-signed root")]
    NotAnAnchor(String),
}
