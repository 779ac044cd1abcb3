// SPDX-License-Identifier: Apache-2.0

//! Content-credential laboratory.
//!
//! Signs assets with embedded provenance manifests, validates them under
//! configurable policies, and mounts the known attacks against those
//! policies. Modules, bottom up:
//!
//! - [`codec`]: deterministic binary encoding for every signed structure
//! - [`container`]: the asset file format and hard-binding digests
//! - [`credentials`]: assertions, claims, signatures, manifests, redaction
//! - [`trust`]: certificates, chains, revocation lists, the status service
//! - [`timestamp`]: timestamp tokens and archival re-timestamping
//! - [`signer`]: the claim generator
//! - [`validator`]: policy-driven validation and differential comparison
//! - [`attacks`]: the adversary toolkit
//! - [`fixtures`]: seeded authorities and scenario assets

pub mod attacks;
pub mod codec;
pub mod container;
pub mod credentials;
pub mod crypto;
pub mod fixtures;
pub mod signer;
pub mod timestamp;
pub mod trust;
pub mod validator;
