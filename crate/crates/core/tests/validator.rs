// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;
use provlab::codec::Canonical;
use provlab::container::{self, Asset, ByteRange};
use provlab::credentials::{redact_assertion, BindingMode, Manifest, RedactionMode};
use provlab::crypto;
use provlab::fixtures::{Lab, Scenario, DAY, T0, YEAR};
use provlab::validator::*;
use std::sync::OnceLock;

struct World {
    lab: Lab,
    assets: Vec<(Scenario, Asset)>,
}

fn world() -> &'static World {
    static W: OnceLock<World> = OnceLock::new();
    W.get_or_init(|| {
        let lab = Lab::new(1).unwrap();
        let assets = Scenario::ALL.iter().map(|&s| (s, lab.signed_asset(s).unwrap())).collect();
        World { lab, assets }
    })
}

fn spec(at: i64) -> ValidationPolicy {
    ValidationPolicy::spec(world().lab.trust(), at)
}

fn hardened(at: i64) -> ValidationPolicy {
    ValidationPolicy::hardened(world().lab.trust(), at, vec![world().lab.signing_ca.generate_crl(T0)])
}

fn asset(s: Scenario) -> &'static Asset {
    &world().assets.iter().find(|(x, _)| *x == s).unwrap().1
}

fn manifest_of(asset: &Asset) -> Manifest {
    Manifest::from_canonical_bytes(container::extract_manifest(asset).unwrap()).unwrap()
}

fn with_manifest(asset: &Asset, m: &Manifest) -> Asset {
    container::replace_manifest(asset, &m.canonical_bytes()).unwrap()
}

#[test]
fn checks_run_in_fixed_order_on_every_input() {
    let inputs: Vec<Vec<u8>> = vec![
        vec![],
        b"not an asset".to_vec(),
        container::strip_manifest(asset(Scenario::Honest)).unwrap().into_bytes(),
        asset(Scenario::Honest).bytes().to_vec(),
    ];
    for bytes in inputs {
        let r = validate(&bytes, &spec(T0 + DAY));
        let names: Vec<&str> = r.checks.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, CHECK_NAMES);
    }
}

#[test]
fn malformed_input_is_unverifiable_with_exit_4() {
    let r = validate(b"PVL1\x01\x03hdr\x00\x00\xff\xff", &spec(T0));
    assert_eq!(r.verdict, Verdict::Unverifiable);
    assert!(r.malformed());
    assert_eq!(r.exit_code(), 4);
    assert_eq!(r.outcome("parse"), Some(Outcome::Fail));
}

#[test]
fn undecodable_manifest_is_rejected() {
    let garbage = container::replace_manifest(asset(Scenario::Honest), b"\xa1\x61x\x00 junk").unwrap();
    let r = validate_asset(&garbage, &spec(T0 + DAY));
    assert_eq!(r.verdict, Verdict::Rejected);
    assert_eq!(r.outcome("manifest"), Some(Outcome::Fail));
    assert_eq!(r.exit_code(), 2);
}

#[test]
fn assertion_tamper_breaks_g1() {
    let mut m = manifest_of(asset(Scenario::Honest));
    let gps = m.assertions.iter_mut().find(|a| a.label() == "std.gps").unwrap();
    gps.payload.insert("lat".into(), 48.8584.into());
    let r = validate_asset(&with_manifest(asset(Scenario::Honest), &m), &spec(T0 + DAY));
    assert_eq!(r.verdict, Verdict::Rejected);
    assert_eq!(r.outcome("assertions"), Some(Outcome::Fail));
    assert_eq!(r.goals.g1, GoalStatus::Violated);
}

#[test]
fn claim_tamper_breaks_signature() {
    let mut m = manifest_of(asset(Scenario::Honest));
    m.claim.generator.push('!');
    let r = validate_asset(&with_manifest(asset(Scenario::Honest), &m), &spec(T0 + DAY));
    assert_eq!(r.outcome("signature"), Some(Outcome::Fail));
    assert_eq!(r.goals.g1, GoalStatus::Violated);
    assert_eq!(r.verdict, Verdict::Rejected);
}

#[test]
fn human_rendering_tags_every_time() {
    let unbound = validate_asset(asset(Scenario::UnboundTimestamp), &spec(T0 + DAY));
    let text = String::from_utf8(render_report(&unbound, Format::Human)).unwrap();
    assert!(text.contains("2025-01-15T00:00:00Z (unverified time)"), "{text}");
    let bound = validate_asset(asset(Scenario::BoundTimestamp), &spec(T0 + DAY));
    let text = String::from_utf8(render_report(&bound, Format::Human)).unwrap();
    assert!(text.contains("(signed time)"), "{text}");
    let none = validate_asset(asset(Scenario::Honest), &spec(T0 + DAY));
    let text = String::from_utf8(render_report(&none, Format::Human)).unwrap();
    assert!(text.contains("time:      (no time)"), "{text}");
    assert!(text.contains("meta.gps: lat=+38.897700;lon=-077.036500"), "{text}");
}

#[test]
fn structured_rendering_round_trips_and_is_deterministic() {
    for (s, a) in &world().assets {
        for p in [spec(T0 + DAY), hardened(T0 + YEAR)] {
            let r = validate_asset(a, &p);
            let bytes = render_report(&r, Format::Structured);
            assert_eq!(decode_report(&bytes).unwrap(), r, "{s}");
            assert_eq!(bytes, render_report(&validate_asset(a, &p), Format::Structured));
            let json: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
            assert_eq!(json["schema"], REPORT_SCHEMA);
        }
    }
    let d = validate_differential(asset(Scenario::ShortLivedCert).bytes(), &spec(T0 + YEAR), &hardened(T0 + YEAR));
    assert_eq!(decode_differential(&render_differential(&d, Format::Structured)).unwrap(), d);
    assert!(decode_report(b"{\"schema\":\"prov-report/0\"}").is_err());
}

#[test]
fn differential_lists_exactly_the_diverging_checks() {
    let (a, b) = (spec(T0 + YEAR), hardened(T0 + YEAR));
    for (_, asset) in &world().assets {
        let d = validate_differential(asset.bytes(), &a, &b);
        // oracle: compare the two check vectors position by position
        let ra = validate_asset(asset, &a);
        let rb = validate_asset(asset, &b);
        let expected: Vec<(String, Outcome, Outcome)> = ra
            .checks
            .iter()
            .zip(&rb.checks)
            .filter(|(x, y)| x.outcome != y.outcome)
            .map(|(x, y)| (x.name.clone(), x.outcome, y.outcome))
            .collect();
        let got: Vec<(String, Outcome, Outcome)> = d.diverging.iter().map(|c| (c.name.clone(), c.a, c.b)).collect();
        assert_eq!(got, expected);
        assert_eq!(d.verdicts_agree, ra.verdict == rb.verdict);
    }
}

#[test]
fn spec_drop_redaction() {
    let original = asset(Scenario::BoundTimestamp);
    let m = redact_assertion(&manifest_of(original), "std.gps", RedactionMode::SpecDrop).unwrap();
    let redacted = with_manifest(original, &m);
    let r = validate_asset(&redacted, &spec(T0 + DAY));
    assert_eq!(r.verdict, Verdict::AcceptedWithRedaction, "{:#?}", r.checks);
    assert!(r.redacted.iter().any(|x| x.contains("std.gps")));
    let text = String::from_utf8(render_report(&r, Format::Human)).unwrap();
    assert!(text.contains("REDACTED:  assertion std.gps"), "{text}");
    let h = validate_asset(&redacted, &hardened(T0 + DAY));
    assert_eq!(h.verdict, Verdict::Rejected);
    assert_eq!(h.outcome("redaction"), Some(Outcome::Fail));
}

#[test]
fn countersigned_redaction() {
    let lab = &world().lab;
    let original = asset(Scenario::BoundTimestamp);
    let m = redact_assertion(&manifest_of(original), "std.gps", RedactionMode::HardenedCountersign(&lab.redactor)).unwrap();
    let redacted = with_manifest(original, &m);
    for p in [spec(T0 + DAY), hardened(T0 + DAY)] {
        let r = validate_asset(&redacted, &p);
        assert_eq!(r.verdict, Verdict::AcceptedWithRedaction, "{}: {:#?}", p.name, r.checks);
    }
    // a record whose countersignature is forged
    let mut forged = m.clone();
    forged.redactions[0].countersignature.signature[0] ^= 1;
    let r = validate_asset(&with_manifest(original, &forged), &spec(T0 + DAY));
    assert_eq!(r.outcome("redaction"), Some(Outcome::Fail));
    assert_eq!(r.verdict, Verdict::Rejected);
    // redaction records themselves cannot be redacted
    assert!(redact_assertion(&m, provlab::credentials::REDACTION_LABEL, RedactionMode::SpecDrop).is_err());
}

#[test]
fn revoked_through_status_service() {
    use provlab::trust::{run_status_service, ServiceClock};
    use std::sync::{Arc, RwLock};
    let lab = &world().lab;
    let mut authority = lab.signing_ca.clone();
    authority.revoke(lab.revocable.leaf().serial, T0 + 30 * DAY).unwrap();
    let service = run_status_service(Arc::new(RwLock::new(authority)), "127.0.0.1:0", ServiceClock::Fixed(T0 + YEAR)).unwrap();
    let at = T0 + 30 * DAY + 182 * DAY;
    let mut soft = spec(at);
    soft.revocation_mode = RevocationMode::StatusServiceSoftFail;
    soft.status_endpoint = Some(service.endpoint());
    let mut none = spec(at);
    none.revocation_mode = RevocationMode::None;
    let revocable = asset(Scenario::Revocable);
    let d = validate_differential(revocable.bytes(), &none, &soft);
    assert_eq!((d.a.verdict, d.b.verdict), (Verdict::Accepted, Verdict::Rejected));
    assert_eq!(d.g4, GoalStatus::Violated);
    assert_eq!(d.exit_code(), 5);
    // the responder saw which certificate was checked
    assert!(service.query_log().contains(&lab.revocable.leaf().serial));
    // before the revocation time the same response does not count
    let r = validate_asset(revocable, &soft.clone().at(T0 + DAY));
    assert_eq!(r.outcome("revocation"), Some(Outcome::Pass));
    let endpoint = service.endpoint();
    service.stop();
    let mut hard = soft.clone();
    hard.revocation_mode = RevocationMode::StatusServiceHardFail;
    hard.status_endpoint = Some(endpoint.clone());
    assert_eq!(validate_asset(revocable, &hard).verdict, Verdict::Rejected);
    soft.status_endpoint = Some(endpoint);
    let r = validate_asset(revocable, &soft);
    assert_eq!(r.outcome("revocation"), Some(Outcome::Skipped));
    assert_eq!(r.verdict, Verdict::Accepted);
}

#[test]
fn rebase_shifts_later_exclusions() {
    let recorded = [ByteRange::new(30, 100), ByteRange::new(200, 10)];
    assert_eq!(
        rebase_exclusions(&recorded, ByteRange::new(30, 140)),
        [ByteRange::new(30, 140), ByteRange::new(240, 10)]
    );
    assert_eq!(rebase_exclusions(&recorded, ByteRange::new(31, 100)), recorded);
}

fn scenario() -> impl Strategy<Value = Scenario> {
    prop::sample::select(Scenario::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// Any single-byte change outside the exclusions is caught.
    #[test]
    fn splice_outside_exclusions_rejected(s in scenario(), pos in any::<prop::sample::Index>(), xor in 1u8..) {
        let a = asset(s);
        let m = manifest_of(a);
        let excl = rebase_exclusions(&m.claim.binding.exclusions, a.manifest_segment().unwrap().range);
        let outside: Vec<usize> = (0..a.len()).filter(|i| !excl.iter().any(|r| r.contains_offset(*i))).collect();
        let i = outside[pos.index(outside.len())];
        let mut bytes = a.bytes().to_vec();
        bytes[i] ^= xor;
        let r = validate(&bytes, &spec(T0 + DAY));
        prop_assert!(matches!(r.verdict, Verdict::Rejected | Verdict::Unverifiable), "{:?}", r.verdict);
        prop_assert!(!r.verdict.is_accepted());
    }

    /// G3 HELD only when the displayed time is inside the signed payload.
    #[test]
    fn g3_held_implies_signed_time(s in scenario(), days in 0i64..800) {
        let a = asset(s);
        for p in [spec(T0 + days * DAY), hardened(T0 + days * DAY)] {
            let r = validate_asset(a, &p);
            if r.goals.g3 == GoalStatus::Held {
                let m = manifest_of(a);
                let cs = &m.claim_signature;
                let token = cs.timestamp.as_ref().unwrap();
                prop_assert_eq!(cs.binding_mode, BindingMode::Bound);
                prop_assert_eq!(r.displayed_time.time, Some(token.gen_time));
                let mut payload = m.claim.canonical_bytes();
                payload.extend_from_slice(&token.digest().0);
                prop_assert!(crypto::verify(&cs.leaf().public_key, &payload, &cs.signature));
            }
        }
    }

    /// Hardened acceptance implies spec passes everything it runs, except
    /// expiry where archival covers it.
    #[test]
    fn policy_monotonicity(s in scenario(), days in 0i64..800) {
        let a = asset(s);
        let at = T0 + days * DAY;
        let h = validate_asset(a, &hardened(at));
        let sp = validate_asset(a, &spec(at));
        if h.verdict.is_accepted() {
            let failing: Vec<&str> = sp.checks.iter().filter(|c| c.outcome == Outcome::Fail).map(|c| c.name.as_str()).collect();
            prop_assert!(failing.is_empty() || failing == ["chain"], "{:?}", failing);
        }
    }

    /// REJECTED always comes with a failing check, and reports are pure.
    #[test]
    fn rejected_has_a_fail(s in scenario(), pos in any::<prop::sample::Index>(), byte in any::<u8>()) {
        let mut bytes = asset(s).bytes().to_vec();
        let i = pos.index(bytes.len());
        bytes[i] = byte;
        for p in [spec(T0 + DAY), hardened(T0 + DAY)] {
            let r = validate(&bytes, &p);
            if r.verdict == Verdict::Rejected {
                prop_assert!(r.checks.iter().any(|c| c.outcome == Outcome::Fail));
            }
            prop_assert_eq!(&r, &validate(&bytes, &p));
        }
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..512)) {
        let r = validate(&bytes, &spec(T0));
        prop_assert!([0, 2, 3, 4].contains(&r.exit_code()));
    }
}
