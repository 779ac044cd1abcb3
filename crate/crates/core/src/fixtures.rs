// SPDX-License-Identifier: Apache-2.0

//! Seeded laboratory: authorities, credentials and the scenario fixtures.
//!
//! Everything is derived from a single `u64` seed, so two labs built from the
//! same seed produce byte-identical assets.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::codec::Canonical;
use crate::container::{Asset, ContainerError, SegmentKind, SegmentSpec};
use crate::credentials::{Assertion, BindingMode, Scalar};
use crate::crypto::{Digest, SigningKey};
use crate::signer::{sign_asset, ExclusionsPolicy, SignerConfig, SignerError};
use crate::timestamp::{archival_extend, TimestampError};
use crate::trust::{Authority, Credential, TrustError, TrustList, Usage};

/// 2025-01-15T00:00:00Z, the signing time of every fixture.
pub const T0: i64 = 1_736_899_200;
pub const DAY: i64 = 86_400;
pub const YEAR: i64 = 365 * DAY;

pub const GENERATOR: &str = "ProvLab Camera Z-1";
pub const GPS_LABEL: &str = "meta.gps";
pub const GPS_PAYLOAD: &str = "lat=+38.897700;lon=-077.036500";
pub const IMAGE_LEN: usize = 4096;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error(transparent)]
    Signer(#[from] SignerError),
    #[error(transparent)]
    Timestamp(#[from] TimestampError),
    #[error(transparent)]
    Trust(#[from] TrustError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scenario {
    Honest,
    GpsExcluded,
    Revocable,
    ShortLivedCert,
    UnboundTimestamp,
    BoundTimestamp,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Honest,
        Scenario::GpsExcluded,
        Scenario::Revocable,
        Scenario::ShortLivedCert,
        Scenario::UnboundTimestamp,
        Scenario::BoundTimestamp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Honest => "honest",
            Scenario::GpsExcluded => "gps-excluded",
            Scenario::Revocable => "revocable",
            Scenario::ShortLivedCert => "short-lived-cert",
            Scenario::UnboundTimestamp => "unbound-timestamp",
            Scenario::BoundTimestamp => "bound-timestamp",
        }
    }

    pub fn parse(name: &str) -> Result<Self, FixtureError> {
        Scenario::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| FixtureError::UnknownScenario(name.to_owned()))
    }

    pub fn binding_mode(self) -> BindingMode {
        match self {
            Scenario::Revocable | Scenario::ShortLivedCert | Scenario::BoundTimestamp => BindingMode::Bound,
            _ => BindingMode::Unbound,
        }
    }

    pub fn exclusions(self) -> ExclusionsPolicy {
        match self {
            Scenario::GpsExcluded => ExclusionsPolicy::ManifestPlusLabeled(vec![GPS_LABEL.to_owned()]),
            _ => ExclusionsPolicy::ManifestOnly,
        }
    }

    pub fn timestamped(self) -> bool {
        self != Scenario::Honest
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Authorities and credentials for one seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lab {
    pub seed: u64,
    pub signing_ca: Authority,
    pub tsa_ca: Authority,
    /// Long-lived camera signing credential.
    pub camera: Credential,
    /// 90-day signing credential.
    pub short_lived: Credential,
    /// Signing credential that the revocation scenario compromises.
    pub revocable: Credential,
    /// Countersigns redaction records.
    pub redactor: Credential,
    pub tsa: Credential,
    /// A second trusted TSA, used by the timestamp-replacement attack.
    pub rogue_tsa: Credential,
}

impl Lab {
    pub fn new(seed: u64) -> Result<Lab, FixtureError> {
        let key = |label: &str| SigningKey::derive(seed, label);
        let mut signing_ca = Authority::new_root(key("signing-ca"), "ProvLab Signing CA", T0 - YEAR, T0 + 30 * YEAR)?;
        let mut tsa_ca = Authority::new_root(key("tsa-ca"), "ProvLab TSA CA", T0 - 20 * YEAR, T0 + 30 * YEAR)?;
        // Issue order fixes the serials.
        let camera = signing_ca.issue_credential(key("camera"), "Camera Z-1", Usage::LeafSigning, T0 - 30 * DAY, T0 + 3 * YEAR)?;
        let short_lived = signing_ca.issue_credential(key("short-lived"), "Short-Lived Signer", Usage::LeafSigning, T0 - DAY, T0 + 90 * DAY)?;
        let revocable = signing_ca.issue_credential(key("revocable"), "Camera Z-1 (compromised)", Usage::LeafSigning, T0 - 30 * DAY, T0 + 3 * YEAR)?;
        let redactor = signing_ca.issue_credential(key("redactor"), "Newsroom Redactor", Usage::LeafSigning, T0 - 30 * DAY, T0 + 3 * YEAR)?;
        let tsa = tsa_ca.issue_credential(key("tsa"), "ProvLab TSA", Usage::LeafTsa, T0 - 12 * YEAR, T0 + 25 * YEAR)?;
        let rogue_tsa = tsa_ca.issue_credential(key("rogue-tsa"), "Any Trusted TSA", Usage::LeafTsa, T0 - 12 * YEAR, T0 + 25 * YEAR)?;
        Ok(Lab {
            seed,
            signing_ca,
            tsa_ca,
            camera,
            short_lived,
            revocable,
            redactor,
            tsa,
            rogue_tsa,
        })
    }

    pub fn trust(&self) -> TrustList {
        TrustList::new([self.signing_ca.certificate().clone(), self.tsa_ca.certificate().clone()])
            .expect("lab roots are self-signed")
    }

    pub fn signer_for(&self, scenario: Scenario) -> &Credential {
        match scenario {
            Scenario::Revocable => &self.revocable,
            Scenario::ShortLivedCert => &self.short_lived,
            _ => &self.camera,
        }
    }

    /// The unsigned asset of a scenario.
    pub fn base_asset(&self, scenario: Scenario) -> Asset {
        let mut material = self.seed.to_be_bytes().to_vec();
        material.extend_from_slice(scenario.name().as_bytes());
        let mut rng = ChaCha20Rng::from_seed(Digest::of(&material).0);
        let mut pixels = vec![0u8; IMAGE_LEN];
        rng.fill_bytes(&mut pixels);
        Asset::build(&[
            SegmentSpec::new(SegmentKind::Header, "hdr", "PVL image/raw 32x32 rgba"),
            SegmentSpec::new(SegmentKind::Metadata, "meta.exif", "make=ProvLab;model=Z-1;iso=200"),
            SegmentSpec::new(SegmentKind::Metadata, GPS_LABEL, GPS_PAYLOAD),
            SegmentSpec::new(SegmentKind::ImageData, "img", pixels),
            SegmentSpec::new(SegmentKind::Trailer, "end", "EOF"),
        ])
        .expect("static layout")
    }

    pub fn assertions(&self) -> Vec<Assertion> {
        vec![
            Assertion::with("c2pa.actions", [("action", Scalar::from("c2pa.created"))]).expect("static label"),
            Assertion::with("std.device", [("make", "ProvLab".into()), ("model", "Z-1".into())])
                .expect("static label"),
            Assertion::with("std.gps", [("lat", 38.8977.into()), ("lon", (-77.0365).into())])
                .expect("static label"),
        ]
    }

    pub fn signer_config(&self, scenario: Scenario) -> SignerConfig<'_> {
        SignerConfig {
            generator_name: GENERATOR.to_owned(),
            credential: self.signer_for(scenario),
            binding_mode: scenario.binding_mode(),
            exclusions: scenario.exclusions(),
            tsa: scenario.timestamped().then_some(&self.tsa),
            clock: T0,
        }
    }

    /// The signed asset of a scenario. The short-lived scenario also gets one
    /// archival token an hour after signing.
    pub fn signed_asset(&self, scenario: Scenario) -> Result<Asset, FixtureError> {
        let signed = sign_asset(&self.base_asset(scenario), &self.assertions(), &self.signer_config(scenario))?;
        Ok(match scenario {
            Scenario::ShortLivedCert => archival_extend(&signed, &self.tsa, T0 + 3600)?,
            _ => signed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureEntry {
    /// Relative to the fixture directory.
    pub path: String,
    pub role: String,
    pub digest: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureManifest {
    pub scenario: Scenario,
    pub seed: u64,
    pub entries: Vec<FixtureEntry>,
}

impl FixtureManifest {
    /// `# scenario seed` header, then one `path<TAB>role<TAB>hex-digest` line per file.
    pub fn render(&self) -> String {
        let mut out = format!("# {}\tseed={}\n", self.scenario, self.seed);
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\n", e.path, e.role, e.digest.to_hex()));
        }
        out
    }
}

pub const FIXTURE_MANIFEST_FILE: &str = "fixture.tsv";

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), FixtureError> {
    fs::write(path, bytes).map_err(|source| FixtureError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Writes the fixture for `scenario` into `dir/<scenario>/` and returns its manifest.
pub fn make_fixture(scenario: &str, lab: &Lab, dir: &Path) -> Result<FixtureManifest, FixtureError> {
    let scenario = Scenario::parse(scenario)?;
    let out = dir.join(scenario.name());
    fs::create_dir_all(&out).map_err(|source| FixtureError::Io {
        path: out.clone(),
        source,
    })?;
    let files: Vec<(&str, &str, Vec<u8>)> = vec![
        ("asset.pvl", "asset", lab.signed_asset(scenario)?.into_bytes()),
        ("original.pvl", "original", lab.base_asset(scenario).into_bytes()),
        ("signer.cred", "signer-key", lab.signer_for(scenario).canonical_bytes()),
        ("tsa.cred", "tsa-key", lab.tsa.canonical_bytes()),
        ("signing-ca.auth", "authority", lab.signing_ca.canonical_bytes()),
        ("tsa-ca.auth", "authority", lab.tsa_ca.canonical_bytes()),
        ("trust.list", "trust", lab.trust().canonical_bytes()),
    ];
    let mut entries = Vec::new();
    for (name, role, bytes) in files {
        write_file(&out.join(name), &bytes)?;
        entries.push(FixtureEntry {
            path: name.to_owned(),
            role: role.to_owned(),
            digest: Digest::of(&bytes),
        });
    }
    let manifest = FixtureManifest {
        scenario,
        seed: lab.seed,
        entries,
    };
    write_file(&out.join(FIXTURE_MANIFEST_FILE), manifest.render().as_bytes())?;
    Ok(manifest)
}
