// SPDX-License-Identifier: Apache-2.0

use provlab::codec::Canonical;
use provlab::container::{self, parse_asset, serialize_asset, Asset};
use provlab::credentials::{signed_payload, BindingMode, Manifest, CREATED_LABEL};
use provlab::crypto::{self, Digest};
use provlab::fixtures::{make_fixture, FixtureError, Lab, Scenario, DAY, FIXTURE_MANIFEST_FILE, T0, YEAR};
use provlab::signer::{sign_asset, ExclusionsPolicy, SignerConfig, SignerError};
use provlab::trust::Usage;

fn lab() -> Lab {
    Lab::new(1).unwrap()
}

fn manifest_of(asset: &Asset) -> Manifest {
    Manifest::from_canonical_bytes(container::extract_manifest(asset).unwrap()).unwrap()
}

#[test]
fn golden_seed_one() {
    let lab = lab();
    let golden = include_str!("golden/seed1.tsv");
    for line in golden.lines() {
        let mut f = line.split('\t');
        let (name, len, hex) = (f.next().unwrap(), f.next().unwrap(), f.next().unwrap());
        let asset = lab.signed_asset(Scenario::parse(name).unwrap()).unwrap();
        assert_eq!(asset.len().to_string(), len, "{name}");
        assert_eq!(Digest::of(asset.bytes()).to_hex(), hex, "{name}");
    }
    assert_eq!(golden.lines().count(), Scenario::ALL.len());
}

#[test]
fn fixtures_round_trip_through_the_container() {
    let lab = lab();
    for s in Scenario::ALL {
        let asset = lab.signed_asset(s).unwrap();
        let bytes = serialize_asset(&asset);
        assert_eq!(parse_asset(&bytes).unwrap(), asset);
        assert_eq!(serialize_asset(&parse_asset(&bytes).unwrap()), bytes);
    }
}

#[test]
fn recorded_exclusions_are_exactly_the_declared_ones() {
    let lab = lab();
    for s in Scenario::ALL {
        let mut asset = lab.signed_asset(s).unwrap();
        if s == Scenario::ShortLivedCert {
            // the archival token grew the manifest; look at the fresh signature
            asset = sign_asset(&lab.base_asset(s), &lab.assertions(), &lab.signer_config(s)).unwrap();
        }
        let m = manifest_of(&asset);
        let mut expected = vec![asset.manifest_segment().unwrap().range];
        if let ExclusionsPolicy::ManifestPlusLabeled(labels) = s.exclusions() {
            for l in labels {
                expected.push(asset.metadata_segment(&l).unwrap().payload);
            }
        }
        expected.sort();
        assert_eq!(m.claim.binding.exclusions, expected, "{s}");
    }
}

#[test]
fn claim_covers_every_assertion_and_adds_created_time() {
    let lab = lab();
    let m = manifest_of(&lab.signed_asset(Scenario::Honest).unwrap());
    assert_eq!(m.assertions.len(), lab.assertions().len() + 1);
    for a in &m.assertions {
        assert_eq!(m.claim.assertion_digest(a.label()), Some(provlab::credentials::digest_assertion(a)));
    }
    let created = m.assertion(CREATED_LABEL).unwrap();
    assert_eq!(created.get("time"), Some(&provlab::credentials::Scalar::Int(T0)));
}

#[test]
fn bound_signature_covers_claim_and_token_and_nothing_else() {
    let lab = lab();
    for s in [Scenario::Revocable, Scenario::BoundTimestamp] {
        let m = manifest_of(&lab.signed_asset(s).unwrap());
        let cs = &m.claim_signature;
        assert_eq!(cs.binding_mode, BindingMode::Bound);
        let token = cs.timestamp.as_ref().unwrap();
        let key = &cs.leaf().public_key;
        // the token was issued over the claim, before the final signature
        assert_eq!(token.message_digest, m.claim.digest());
        let mut bound = m.claim.canonical_bytes();
        bound.extend_from_slice(&Digest::of(&token.canonical_bytes()).0);
        assert!(crypto::verify(key, &bound, &cs.signature), "{s}");
        assert_eq!(signed_payload(&m.claim, BindingMode::Bound, Some(&token.digest())).unwrap(), bound);
        // not over the claim alone (a first-pass style signature)
        assert!(!crypto::verify(key, &m.claim.canonical_bytes(), &cs.signature), "{s}");
    }
}

#[test]
fn unbound_signature_covers_the_claim_alone() {
    let lab = lab();
    let m = manifest_of(&lab.signed_asset(Scenario::UnboundTimestamp).unwrap());
    let cs = &m.claim_signature;
    assert!(crypto::verify(&cs.leaf().public_key, &m.claim.canonical_bytes(), &cs.signature));
    assert_eq!(cs.timestamp.as_ref().unwrap().message_digest, Digest::of(&cs.signature));
}

#[test]
fn signer_errors() {
    let lab = lab();
    let base = lab.base_asset(Scenario::Honest);
    let mut config = lab.signer_config(Scenario::Honest);
    config.clock = T0 + 4 * YEAR;
    assert_eq!(sign_asset(&base, &[], &config), Err(SignerError::ExpiredSignerCert(T0 + 4 * YEAR)));

    let config = SignerConfig {
        credential: &lab.tsa,
        ..lab.signer_config(Scenario::Honest)
    };
    assert!(matches!(sign_asset(&base, &[], &config), Err(SignerError::UsageViolation(_))));
    assert_eq!(lab.tsa.leaf().usage, Usage::LeafTsa);

    let signed = lab.signed_asset(Scenario::Honest).unwrap();
    assert_eq!(
        sign_asset(&signed, &[], &lab.signer_config(Scenario::Honest)),
        Err(SignerError::DuplicateManifest)
    );

    let config = SignerConfig {
        exclusions: ExclusionsPolicy::ManifestPlusLabeled(vec!["meta.nope".into()]),
        ..lab.signer_config(Scenario::Honest)
    };
    assert_eq!(sign_asset(&base, &[], &config), Err(SignerError::UnknownLabel("meta.nope".into())));

    let config = SignerConfig {
        binding_mode: BindingMode::Bound,
        tsa: None,
        ..lab.signer_config(Scenario::Honest)
    };
    assert_eq!(sign_asset(&base, &[], &config), Err(SignerError::MissingTsa));
}

#[test]
fn short_lived_signer_window() {
    let lab = lab();
    let leaf = lab.short_lived.leaf();
    assert_eq!(leaf.not_after, T0 + 90 * DAY);
    assert!(leaf.valid_at(T0 + DAY) && !leaf.valid_at(T0 + YEAR));
}

#[test]
fn fixture_manifest_lists_every_file() {
    let lab = lab();
    let dir = tempfile::tempdir().unwrap();
    let m = make_fixture("gps-excluded", &lab, dir.path()).unwrap();
    let root = dir.path().join("gps-excluded");
    for e in &m.entries {
        let bytes = std::fs::read(root.join(&e.path)).unwrap();
        assert_eq!(Digest::of(&bytes), e.digest, "{}", e.path);
    }
    let listed = std::fs::read_to_string(root.join(FIXTURE_MANIFEST_FILE)).unwrap();
    assert_eq!(listed, m.render());
    assert!(listed.starts_with("# gps-excluded\tseed=1\n"));
    for line in listed.lines().skip(1) {
        assert_eq!(line.split('\t').count(), 3, "{line}");
    }
    let asset = std::fs::read(root.join("asset.pvl")).unwrap();
    assert_eq!(asset, lab.signed_asset(Scenario::GpsExcluded).unwrap().into_bytes());
}

#[test]
fn fixtures_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for s in Scenario::ALL {
        let ma = make_fixture(s.name(), &Lab::new(7).unwrap(), a.path()).unwrap();
        let mb = make_fixture(s.name(), &Lab::new(7).unwrap(), b.path()).unwrap();
        assert_eq!(ma, mb);
    }
    let other = make_fixture("honest", &Lab::new(8).unwrap(), a.path()).unwrap();
    assert_ne!(other.entries[0].digest, make_fixture("honest", &Lab::new(7).unwrap(), b.path()).unwrap().entries[0].digest);
}

#[test]
fn unknown_scenario() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        make_fixture("deepfake", &lab(), dir.path()),
        Err(FixtureError::UnknownScenario(name)) if name == "deepfake"
    ));
}
