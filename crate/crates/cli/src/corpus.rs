// SPDX-License-Identifier: Apache-2.0

//! Evaluation corpus: every scenario's honest fixture plus every attack that
//! applies to it, with an index of expected verdicts.
//!
//! ```text
//! <out>/fixtures/<scenario>/...        honest fixtures (see `make_fixture`)
//! <out>/attacks/<scenario>.<attack>.pvl
//! <out>/attacks/<scenario>.<attack>.json
//! <out>/crl/initial.crl                signing CA list at T0
//! <out>/crl/revoked.crl                signing CA list after the revocation
//! <out>/trust.list
//! <out>/index.tsv
//! ```

use std::fmt::Write as _;
use std::path::Path;

use provlab::attacks::{
    attack_exclusion_mutate, attack_expiry_timewarp, attack_sign_with_revoked, attack_strip_manifest,
    attack_timestamp_replace, AttackOutcome,
};
use provlab::codec::Canonical;
use provlab::fixtures::{make_fixture, Lab, Scenario, DAY, GPS_LABEL, T0, YEAR};
use provlab::signer::ExclusionsPolicy;
use provlab::validator::Verdict;

use crate::workspace::write;
use crate::CliError;

pub const INDEX_FILE: &str = "index.tsv";
pub const INDEX_HEADER: &str = "asset\tpolicy\tat\tcrl\texpected\texit";

/// Same length as the honest GPS payload, pointing somewhere else.
pub const FALSE_GPS: &str = "lat=+48.858400;lon=+002.294500";
pub const FORGED_TIME: i64 = T0 - 10 * YEAR;
pub const REVOKE_AT: i64 = T0 + 30 * DAY;
pub const HONEST_AT: i64 = T0 + DAY;

const INITIAL_CRL: &str = "crl/initial.crl";
const REVOKED_CRL: &str = "crl/revoked.crl";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexRow {
    pub asset: String,
    pub policy: String,
    pub at: i64,
    pub crl: String,
    pub expected: Verdict,
}

impl IndexRow {
    pub fn parse(line: &str) -> Option<IndexRow> {
        let f: Vec<&str> = line.split('\t').collect();
        let [asset, policy, at, crl, expected, _exit] = f[..] else {
            return None;
        };
        Some(IndexRow {
            asset: asset.into(),
            policy: policy.into(),
            at: at.parse().ok()?,
            crl: crl.into(),
            expected: Verdict::parse(expected)?,
        })
    }
}

/// Whether the hardened preset accepts an untouched fixture of `s`.
pub fn hardened_accepts(s: Scenario) -> bool {
    s.binding_mode() == provlab::credentials::BindingMode::Bound && s.exclusions() == ExclusionsPolicy::ManifestOnly
}

/// Attacks that apply to a scenario, in a fixed order.
pub fn applicable_attacks(s: Scenario) -> Vec<&'static str> {
    let mut v = Vec::new();
    if s.binding_mode() == provlab::credentials::BindingMode::Unbound {
        v.push("timestamp-replace");
    }
    if s == Scenario::GpsExcluded {
        v.push("exclusion-mutate");
    }
    if s == Scenario::Revocable {
        v.push("sign-with-revoked");
    }
    if s == Scenario::ShortLivedCert {
        v.push("expiry-timewarp");
    }
    v.push("strip-manifest");
    v
}

fn run_attack(name: &str, s: Scenario, lab: &mut Lab) -> Result<(AttackOutcome, i64, &'static str), CliError> {
    let asset = lab.signed_asset(s)?;
    let out = match name {
        "timestamp-replace" => (attack_timestamp_replace(&asset, &lab.rogue_tsa, &lab.trust(), FORGED_TIME)?, HONEST_AT, INITIAL_CRL),
        "exclusion-mutate" => (attack_exclusion_mutate(&asset, GPS_LABEL, FALSE_GPS.as_bytes())?, HONEST_AT, INITIAL_CRL),
        "sign-with-revoked" => {
            let snapshot = lab.clone();
            let o = attack_sign_with_revoked(
                &snapshot.base_asset(s),
                &snapshot.assertions(),
                &snapshot.signer_config(s),
                &mut lab.signing_ca,
                REVOKE_AT,
            )?;
            (o, REVOKE_AT + 182 * DAY, REVOKED_CRL)
        }
        "expiry-timewarp" => (attack_expiry_timewarp(&asset, T0 + YEAR)?, T0 + YEAR, INITIAL_CRL),
        "strip-manifest" => (attack_strip_manifest(&asset)?, HONEST_AT, INITIAL_CRL),
        other => return Err(CliError::Usage(format!("unknown attack `{other}`"))),
    };
    Ok(out)
}

fn push_row(index: &mut String, row: &IndexRow) {
    let _ = writeln!(
        index,
        "{}\t{}\t{}\t{}\t{}\t{}",
        row.asset,
        row.policy,
        row.at,
        row.crl,
        row.expected,
        row.expected.exit_code()
    );
}

/// Writes the corpus for `lab` under `out` and returns the index rows.
pub fn build_corpus(lab: &Lab, out: &Path) -> Result<Vec<IndexRow>, CliError> {
    let mut lab = lab.clone();
    let mut rows = Vec::new();
    write(&out.join("trust.list"), &lab.trust().canonical_bytes())?;
    write(&out.join(INITIAL_CRL), &lab.signing_ca.generate_crl(T0).canonical_bytes())?;

    for s in Scenario::ALL {
        make_fixture(s.name(), &lab, &out.join("fixtures"))?;
        let asset = format!("fixtures/{}/asset.pvl", s.name());
        rows.push(IndexRow {
            asset: asset.clone(),
            policy: "spec".into(),
            at: HONEST_AT,
            crl: INITIAL_CRL.into(),
            expected: Verdict::Accepted,
        });
        rows.push(IndexRow {
            asset,
            policy: "hardened".into(),
            at: HONEST_AT,
            crl: INITIAL_CRL.into(),
            expected: if hardened_accepts(s) { Verdict::Accepted } else { Verdict::Rejected },
        });
    }

    for s in Scenario::ALL {
        for attack in applicable_attacks(s) {
            let (o, at, crl) = run_attack(attack, s, &mut lab)?;
            let stem = format!("attacks/{}.{attack}", s.name());
            write(&out.join(format!("{stem}.pvl")), o.mutated_asset.bytes())?;
            write(&out.join(format!("{stem}.json")), &o.record_bytes())?;
            for (policy, expected) in [("spec", o.expected_spec_verdict), ("hardened", o.expected_hardened_verdict)] {
                rows.push(IndexRow {
                    asset: format!("{stem}.pvl"),
                    policy: policy.into(),
                    at,
                    crl: crl.into(),
                    expected,
                });
            }
        }
    }
    // issued after the revocation, so it lists it
    write(&out.join(REVOKED_CRL), &lab.signing_ca.generate_crl(REVOKE_AT).canonical_bytes())?;

    let mut index = format!("{INDEX_HEADER}\n");
    for row in &rows {
        push_row(&mut index, row);
    }
    write(&out.join(INDEX_FILE), index.as_bytes())?;
    Ok(rows)
}
