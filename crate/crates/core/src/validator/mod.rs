// SPDX-License-Identifier: Apache-2.0

//! Policy-driven validation.
//!
//! Every check runs on every input, in a fixed order, so two reports over the
//! same asset always have comparable check vectors. A check that cannot run
//! because an earlier stage produced nothing to look at is `SKIPPED`.

mod policy;
mod report;

pub use policy::{
    ExpiryRule, FileIntegrity, RevocationMode, TimestampRule, ValidationPolicy, STATUS_TIMEOUT,
};
pub use report::{
    decode_differential, decode_report, format_time, render_differential, render_report, Check,
    CheckDiff, DifferentialReport, DisplayedTime, Format, GoalStatus, Goals, MetadataField,
    Outcome, ReportError, TimeProvenance, ValidationReport, Verdict, DIFF_SCHEMA, REPORT_SCHEMA,
};

use crate::codec::Canonical;
use crate::container::{self, parse_asset, Asset, ByteRange, SegmentKind};
use crate::credentials::{
    digest_assertion, BindingMode, Manifest, Redaction, RedactionRecord, RedactionTarget,
};
use crate::crypto::{self, Digest, SHA256};
use crate::timestamp::{verify_token, TokenVerdict};
use crate::trust::{query_status, verify_chain, CertStatus, Certificate, ChainVerdict, TrustList, Usage};

pub const CHECK_NAMES: [&str; 11] = [
    "parse",
    "manifest",
    "spec_version",
    "assertions",
    "hard_binding",
    "exclusion_audit",
    "signature",
    "chain",
    "revocation",
    "timestamp",
    "redaction",
];

/// How a failing check affects the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Severity {
    /// Evidence of tampering or a policy violation.
    Reject,
    /// Nothing wrong with the bytes, but nothing can be vouched for either.
    Unverifiable,
}

#[derive(Default)]
struct Run {
    checks: Vec<Check>,
    severities: Vec<Option<Severity>>,
}

impl Run {
    fn push(&mut self, name: &str, outcome: Outcome, severity: Option<Severity>, detail: impl Into<String>) {
        debug_assert_eq!(CHECK_NAMES[self.checks.len()], name);
        self.checks.push(Check {
            name: name.to_owned(),
            outcome,
            detail: detail.into(),
        });
        self.severities.push(severity);
    }

    fn pass(&mut self, name: &str, detail: impl Into<String>) {
        self.push(name, Outcome::Pass, None, detail);
    }

    fn skip(&mut self, name: &str, detail: impl Into<String>) {
        self.push(name, Outcome::Skipped, None, detail);
    }

    fn fail(&mut self, name: &str, severity: Severity, detail: impl Into<String>) {
        self.push(name, Outcome::Fail, Some(severity), detail);
    }

    fn record(&mut self, name: &str, result: CheckResult) {
        match result {
            CheckResult::Pass(d) => self.pass(name, d),
            CheckResult::Skip(d) => self.skip(name, d),
            CheckResult::Fail(s, d) => self.fail(name, s, d),
        }
    }

    fn skip_rest(&mut self, detail: &str) {
        while self.checks.len() < CHECK_NAMES.len() {
            let name = CHECK_NAMES[self.checks.len()];
            self.skip(name, detail);
        }
    }

    fn outcome(&self, name: &str) -> Outcome {
        self.checks
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.outcome)
            .unwrap_or(Outcome::Skipped)
    }

    fn severity(&self, name: &str) -> Option<Severity> {
        let i = self.checks.iter().position(|c| c.name == name)?;
        self.severities[i]
    }
}

enum CheckResult {
    Pass(String),
    Skip(String),
    Fail(Severity, String),
}

use CheckResult::{Fail, Pass, Skip};

fn displayed_metadata(asset: &Asset) -> Vec<MetadataField> {
    asset
        .segments()
        .iter()
        .filter(|s| s.kind == SegmentKind::Metadata)
        .map(|s| MetadataField {
            label: s.label.clone(),
            value: String::from_utf8_lossy(asset.payload(s)).into_owned(),
        })
        .collect()
}

/// Maps the recorded exclusions onto the current layout.
///
/// The manifest may legitimately change size after signing (archival tokens,
/// redaction records). The recorded exclusion that starts where the manifest
/// segment starts is taken to be the manifest's own, replaced by the actual
/// segment range, and later exclusions move by the same amount.
pub fn rebase_exclusions(recorded: &[ByteRange], manifest: ByteRange) -> Vec<ByteRange> {
    let mut out = recorded.to_vec();
    let Some(i) = out.iter().position(|r| r.start == manifest.start) else {
        return out;
    };
    let delta = manifest.length as i128 - out[i].length as i128;
    out[i] = manifest;
    for r in &mut out[i + 1..] {
        match usize::try_from(r.start as i128 + delta) {
            Ok(start) => r.start = start,
            Err(_) => return recorded.to_vec(),
        }
    }
    out
}

/// Finds the certificate that issued `chain[i]`: the next chain entry or an anchor.
fn issuer_of<'a>(chain: &'a [Certificate], i: usize, trust: &'a TrustList) -> Option<&'a Certificate> {
    let cert = &chain[i];
    chain
        .get(i + 1)
        .filter(|p| p.subject == cert.issuer)
        .or_else(|| {
            trust
                .anchors()
                .iter()
                .find(|a| a.subject == cert.issuer && cert.is_signed_by(&a.public_key))
        })
}

/// A redaction entry that passed every check.
struct ValidRedaction {
    record: RedactionRecord,
}

fn check_redaction_entry(
    entry: &Redaction,
    manifest: &Manifest,
    policy: &ValidationPolicy,
) -> Result<ValidRedaction, String> {
    let record = entry.parse().ok_or("malformed redaction record")?;
    let cs = &entry.countersignature;
    let leaf = cs.leaf();
    if leaf.usage != Usage::LeafSigning {
        return Err(format!("redactor `{}` is not a signing leaf", leaf.subject));
    }
    if leaf.subject != record.redactor {
        return Err(format!(
            "record names `{}` but is signed by `{}`",
            record.redactor, leaf.subject
        ));
    }
    let chain = verify_chain(&cs.signer_chain, &policy.trust, policy.validation_time);
    if !chain.is_valid() {
        return Err(format!("redactor chain: {chain}"));
    }
    if !entry.signature_verifies() {
        return Err(format!("countersignature by `{}` does not verify", leaf.subject));
    }
    if record.claim != manifest.claim.digest() {
        return Err(format!("record for `{}` refers to another claim", record.label));
    }
    Ok(ValidRedaction { record })
}

fn check_assertions(manifest: &Manifest) -> CheckResult {
    let mut seen = std::collections::BTreeSet::new();
    for a in &manifest.assertions {
        if !seen.insert(a.label()) {
            return Fail(Severity::Reject, format!("assertion `{}` appears twice", a.label()));
        }
        match manifest.claim.assertion_digest(a.label()) {
            None => {
                return Fail(
                    Severity::Reject,
                    format!("assertion `{}` is not covered by the claim", a.label()),
                )
            }
            Some(d) if d != digest_assertion(a) => {
                return Fail(
                    Severity::Reject,
                    format!("assertion `{}` does not match its claimed digest", a.label()),
                )
            }
            Some(_) => {}
        }
    }
    Pass(format!(
        "{} of {} claimed assertions present and matching",
        manifest.assertions.len(),
        manifest.claim.assertion_digests.len()
    ))
}

fn check_hard_binding(asset: &Asset, exclusions: &[ByteRange], manifest: &Manifest) -> CheckResult {
    let declared = &manifest.claim.binding;
    if declared.algorithm != SHA256 {
        return Fail(
            Severity::Reject,
            format!("unsupported digest algorithm `{}`", declared.algorithm),
        );
    }
    match container::compute_hard_binding(asset, exclusions, SHA256) {
        Err(e) => Fail(Severity::Reject, format!("declared exclusions unusable: {e}")),
        Ok(actual) if actual.digest != declared.digest => Fail(
            Severity::Reject,
            "digest mismatch: bytes outside the exclusions changed".to_owned(),
        ),
        Ok(_) => {
            let excluded: usize = exclusions.iter().map(|r| r.length).sum();
            Pass(format!(
                "digest matches; {} of {} bytes bound, {} exclusion(s)",
                asset.len() - excluded,
                asset.len(),
                exclusions.len()
            ))
        }
    }
}

fn check_exclusion_audit(
    asset: &Asset,
    exclusions: &[ByteRange],
    manifest_range: ByteRange,
    redactions: &[ValidRedaction],
    policy: &ValidationPolicy,
) -> CheckResult {
    if policy.file_integrity == FileIntegrity::Weak {
        return Skip("declared exclusions honored".into());
    }
    let mut covered = Vec::new();
    for r in exclusions.iter().filter(|r| **r != manifest_range) {
        let record = redactions.iter().find(|v| {
            v.record.target == RedactionTarget::Segment
                && asset.metadata_segment(&v.record.label).is_some_and(|s| {
                    s.payload == *r && Digest::of(asset.slice(*r)) == v.record.digest
                })
        });
        match record {
            Some(v) => covered.push(v.record.label.clone()),
            None => {
                let what = asset
                    .segments()
                    .iter()
                    .find(|s| s.range.contains(r))
                    .map(|s| format!(" (`{}`)", s.label))
                    .unwrap_or_default();
                return Fail(
                    Severity::Reject,
                    format!("exclusion {r}{what} is not pinned by a countersigned redaction record"),
                );
            }
        }
    }
    if covered.is_empty() {
        Pass("only the manifest is excluded".into())
    } else {
        Pass(format!("excluded segments pinned by countersigned records: {}", covered.join(", ")))
    }
}

fn check_signature(manifest: &Manifest) -> CheckResult {
    let cs = &manifest.claim_signature;
    let leaf = cs.leaf();
    if leaf.usage != Usage::LeafSigning {
        return Fail(Severity::Reject, format!("`{}` is not a signing leaf", leaf.subject));
    }
    let payload = match cs.payload_for(&manifest.claim) {
        Ok(p) => p,
        Err(e) => return Fail(Severity::Reject, e.to_string()),
    };
    if crypto::verify(&leaf.public_key, &payload, &cs.signature) {
        Pass(format!("{} signature by `{}` verifies", cs.binding_mode.as_str(), leaf.subject))
    } else {
        Fail(Severity::Reject, "claim signature does not verify".into())
    }
}

/// Checks that the archival tokens carry trust from signing time to now.
fn archival_coverage(manifest: &Manifest, policy: &ValidationPolicy) -> Result<String, String> {
    let tokens = &manifest.archival;
    let at = policy.validation_time;
    if tokens.is_empty() {
        return Err("no archival timestamp chain".into());
    }
    for (k, token) in tokens.iter().enumerate() {
        let expected = Digest::of(&manifest.archival_prefix_bytes(k));
        let verdict = verify_token(token, &expected, &policy.trust, at);
        if !verdict.is_valid() {
            return Err(format!("archival token {k}: {verdict}"));
        }
        if k > 0 && token.gen_time < tokens[k - 1].gen_time {
            return Err(format!("archival token {k} predates its predecessor"));
        }
        // Each TSA must still be trusted when the next token renews it; the
        // last one must be trusted now.
        let renew_at = tokens.get(k + 1).map_or(at, |next| next.gen_time);
        let tsa = verify_chain(&token.tsa_chain, &policy.trust, renew_at);
        if !tsa.is_valid() {
            return Err(format!("archival token {k} TSA at {}: {tsa}", format_time(renew_at)));
        }
    }
    let first = tokens[0].gen_time;
    let signer = verify_chain(&manifest.claim_signature.signer_chain, &policy.trust, first);
    if !signer.is_valid() {
        return Err(format!("signer chain at first archival time: {signer}"));
    }
    Ok(format!(
        "signer chain valid at archival time {} ({} token(s))",
        format_time(first),
        tokens.len()
    ))
}

fn check_chain(manifest: &Manifest, policy: &ValidationPolicy) -> CheckResult {
    let chain = &manifest.claim_signature.signer_chain;
    let verdict = verify_chain(chain, &policy.trust, policy.validation_time);
    match verdict {
        ChainVerdict::Valid => Pass(format!("valid at {}", format_time(policy.validation_time))),
        v if v.is_time_failure() => match policy.expiry_rule {
            ExpiryRule::AtValidationTime => Fail(Severity::Unverifiable, v.to_string()),
            ExpiryRule::AtTimestampTimeWithArchivalChain => match archival_coverage(manifest, policy) {
                Ok(detail) => Pass(format!("{v} now; {detail}")),
                Err(why) => Fail(Severity::Unverifiable, format!("{v}; {why}")),
            },
        },
        v => Fail(Severity::Reject, v.to_string()),
    }
}

fn check_revocation(manifest: &Manifest, policy: &ValidationPolicy) -> CheckResult {
    let chain = &manifest.claim_signature.signer_chain;
    let at = policy.validation_time;
    let targets: Vec<usize> = (0..chain.len())
        .filter(|&i| !policy.trust.anchors().contains(&chain[i]))
        .collect();
    match policy.revocation_mode {
        RevocationMode::None => Skip("revocation not checked".into()),
        RevocationMode::CrlRequired => {
            let mut notes = Vec::new();
            for &i in &targets {
                let cert = &chain[i];
                let Some(issuer) = issuer_of(chain, i, &policy.trust) else {
                    return Fail(Severity::Reject, format!("issuer of serial {} unknown", cert.serial));
                };
                let crl = policy
                    .crls
                    .iter()
                    .filter(|c| c.this_update <= at && c.verify(issuer))
                    .max_by_key(|c| c.this_update);
                let Some(crl) = crl else {
                    return Fail(
                        Severity::Reject,
                        format!("no verifiable revocation list from `{}` as of validation time", issuer.subject),
                    );
                };
                match crl.revoked_at(cert.serial) {
                    Some(t) if t <= at => {
                        return Fail(
                            Severity::Reject,
                            format!("serial {} revoked at {}", cert.serial, format_time(t)),
                        )
                    }
                    _ => notes.push(format!(
                        "serial {} not revoked (list of {})",
                        cert.serial,
                        format_time(crl.this_update)
                    )),
                }
            }
            Pass(notes.join("; "))
        }
        RevocationMode::StatusServiceSoftFail | RevocationMode::StatusServiceHardFail => {
            let hard = policy.revocation_mode == RevocationMode::StatusServiceHardFail;
            let mut unresolved = Vec::new();
            let mut good = Vec::new();
            for &i in &targets {
                let cert = &chain[i];
                let Some(issuer) = issuer_of(chain, i, &policy.trust) else {
                    unresolved.push(format!("issuer of serial {} unknown", cert.serial));
                    continue;
                };
                let response = match &policy.status_endpoint {
                    None => Err("no status endpoint configured".to_owned()),
                    Some(ep) => query_status(ep, cert.serial, &issuer.public_key, STATUS_TIMEOUT)
                        .map_err(|e| e.to_string()),
                };
                match response {
                    Ok(r) => match (r.status, r.revoked_at) {
                        (CertStatus::Revoked, Some(t)) if t <= at => {
                            return Fail(
                                Severity::Reject,
                                format!("serial {} revoked at {}", cert.serial, format_time(t)),
                            )
                        }
                        (CertStatus::Unknown, _) => {
                            unresolved.push(format!("serial {} unknown to responder", cert.serial))
                        }
                        _ => good.push(format!("serial {} good", cert.serial)),
                    },
                    Err(e) => unresolved.push(e),
                }
            }
            match (unresolved.is_empty(), hard) {
                (true, _) => Pass(good.join("; ")),
                (false, true) => Fail(Severity::Reject, unresolved.join("; ")),
                (false, false) => Skip(format!("soft-fail: {}", unresolved.join("; "))),
            }
        }
    }
}

fn check_timestamp(manifest: &Manifest, policy: &ValidationPolicy) -> (CheckResult, Option<TokenVerdict>) {
    let cs = &manifest.claim_signature;
    let Some(token) = &cs.timestamp else {
        return match policy.timestamp_rule {
            TimestampRule::AcceptUnbound => (Skip("no timestamp token".into()), None),
            TimestampRule::RequireBound => (Fail(Severity::Reject, "no timestamp token".into()), None),
        };
    };
    let verdict = verify_token(token, &cs.token_subject(&manifest.claim), &policy.trust, policy.validation_time);
    let result = if policy.timestamp_rule == TimestampRule::RequireBound && cs.binding_mode == BindingMode::Unbound {
        Fail(Severity::Reject, "token is not covered by the claim signature".into())
    } else if !verdict.is_valid() {
        Fail(Severity::Reject, format!("token: {verdict}"))
    } else {
        Pass(format!("{} token from `{}` at {}", cs.binding_mode.as_str(), token.tsa_chain[0].subject, format_time(token.gen_time)))
    };
    (result, Some(verdict))
}

fn check_redactions(
    manifest: &Manifest,
    entries: &[Result<ValidRedaction, String>],
    policy: &ValidationPolicy,
    redacted: &mut Vec<String>,
) -> CheckResult {
    for e in entries {
        if let Err(why) = e {
            return Fail(Severity::Reject, why.clone());
        }
    }
    let valid: Vec<&ValidRedaction> = entries.iter().filter_map(|e| e.as_ref().ok()).collect();
    let tombstones = manifest.tombstones();
    for v in &valid {
        if v.record.target == RedactionTarget::Assertion
            && !tombstones.iter().any(|(l, d)| *l == v.record.label && *d == v.record.digest)
        {
            return Fail(
                Severity::Reject,
                format!("record for `{}` matches no redacted assertion", v.record.label),
            );
        }
    }
    for (label, digest) in &tombstones {
        let record = valid.iter().find(|v| {
            v.record.target == RedactionTarget::Assertion && v.record.label == *label && v.record.digest == *digest
        });
        match record {
            Some(v) => redacted.push(format!("assertion {label} (countersigned by {})", v.record.redactor)),
            None if policy.file_integrity == FileIntegrity::Strong => {
                return Fail(
                    Severity::Reject,
                    format!("assertion `{label}` removed without a countersigned record"),
                )
            }
            None => redacted.push(format!("assertion {label} (no record)")),
        }
    }
    for v in valid.iter().filter(|v| v.record.target == RedactionTarget::Segment) {
        redacted.push(format!("segment {} (countersigned by {})", v.record.label, v.record.redactor));
    }
    if redacted.is_empty() {
        Skip("no redactions".into())
    } else {
        Pass(format!("{} redaction(s)", redacted.len()))
    }
}

fn finish(run: Run, policy: &ValidationPolicy, ctx: Context) -> ValidationReport {
    let outcome = |n| run.outcome(n);
    let verdict = if outcome("parse") == Outcome::Fail {
        Verdict::Unverifiable
    } else if run.severities.contains(&Some(Severity::Reject)) {
        Verdict::Rejected
    } else if run.severities.contains(&Some(Severity::Unverifiable)) {
        Verdict::Unverifiable
    } else if !ctx.redacted.is_empty() {
        Verdict::AcceptedWithRedaction
    } else {
        Verdict::Accepted
    };

    let g1 = if outcome("manifest") == Outcome::Skipped || run.severity("manifest") == Some(Severity::Unverifiable) {
        GoalStatus::NotEvaluated
    } else if ["manifest", "assertions", "signature"].iter().all(|n| outcome(n) == Outcome::Pass)
        && run.severity("chain") != Some(Severity::Reject)
    {
        GoalStatus::Held
    } else {
        GoalStatus::Violated
    };
    let goal = |o: Outcome| match o {
        Outcome::Pass => GoalStatus::Held,
        Outcome::Fail => GoalStatus::Violated,
        Outcome::Skipped => GoalStatus::NotEvaluated,
    };
    let g2 = goal(outcome("hard_binding"));
    let g3 = match ctx.displayed_time.provenance {
        TimeProvenance::Signed => GoalStatus::Held,
        TimeProvenance::UnboundToken => GoalStatus::Violated,
        TimeProvenance::Absent => GoalStatus::NotEvaluated,
    };
    let g5 = match (policy.file_integrity, outcome("hard_binding"), outcome("exclusion_audit")) {
        (FileIntegrity::Weak, ..) => GoalStatus::NotEvaluated,
        (_, Outcome::Skipped, _) => GoalStatus::NotEvaluated,
        (_, Outcome::Pass, Outcome::Pass) => GoalStatus::Held,
        _ => GoalStatus::Violated,
    };

    ValidationReport {
        policy: policy.name.clone(),
        validation_time: policy.validation_time,
        verdict,
        checks: run.checks,
        goals: Goals {
            g1,
            g2,
            g3,
            g4: GoalStatus::NotEvaluated,
            g5,
        },
        displayed_time: ctx.displayed_time,
        generator: ctx.generator,
        signer: ctx.signer,
        metadata: ctx.metadata,
        assertions: ctx.assertions,
        redacted: ctx.redacted,
    }
}

struct Context {
    displayed_time: DisplayedTime,
    generator: Option<String>,
    signer: Option<String>,
    metadata: Vec<MetadataField>,
    assertions: Vec<String>,
    redacted: Vec<String>,
}

impl Default for Context {
    fn default() -> Self {
        Context {
            displayed_time: DisplayedTime {
                time: None,
                provenance: TimeProvenance::Absent,
            },
            generator: None,
            signer: None,
            metadata: Vec::new(),
            assertions: Vec::new(),
            redacted: Vec::new(),
        }
    }
}

/// Validates raw bytes. Never panics; any input yields a report.
pub fn validate(bytes: &[u8], policy: &ValidationPolicy) -> ValidationReport {
    let mut run = Run::default();
    let mut ctx = Context::default();

    let asset = match parse_asset(bytes) {
        Ok(a) => a,
        Err(e) => {
            run.fail("parse", Severity::Unverifiable, e.to_string());
            run.skip_rest("input is not an asset");
            return finish(run, policy, ctx);
        }
    };
    run.pass("parse", format!("{} segments, {} bytes", asset.segments().len(), asset.len()));
    ctx.metadata = displayed_metadata(&asset);

    let (Some(manifest_segment), Some(payload)) = (asset.manifest_segment(), container::extract_manifest(&asset)) else {
        run.fail("manifest", Severity::Unverifiable, "no credentials: asset carries no manifest");
        run.skip_rest("no manifest");
        return finish(run, policy, ctx);
    };
    let manifest_range = manifest_segment.range;
    let manifest = match Manifest::from_canonical_bytes(payload) {
        Ok(m) => m,
        Err(e) => {
            run.fail("manifest", Severity::Reject, format!("manifest does not decode: {e}"));
            run.skip_rest("manifest unreadable");
            return finish(run, policy, ctx);
        }
    };
    run.pass(
        "manifest",
        format!(
            "{} assertion(s), {} redaction record(s), {} archival token(s)",
            manifest.assertions.len(),
            manifest.redactions.len(),
            manifest.archival.len()
        ),
    );
    ctx.generator = Some(manifest.claim.generator.clone());
    ctx.signer = Some(manifest.claim_signature.leaf().subject.clone());
    ctx.assertions = manifest.assertions.iter().map(|a| a.label().to_owned()).collect();

    let declared = &manifest.claim.spec_version;
    run.record(
        "spec_version",
        match &policy.spec_version_required {
            None => Skip(format!("no version required; claim declares {declared}")),
            Some(v) if v == declared => Pass(format!("claim declares {declared}")),
            Some(v) => Fail(Severity::Reject, format!("claim declares {declared}, policy requires {v}")),
        },
    );

    run.record("assertions", check_assertions(&manifest));

    let exclusions = rebase_exclusions(&manifest.claim.binding.exclusions, manifest_range);
    run.record("hard_binding", check_hard_binding(&asset, &exclusions, &manifest));

    let entries: Vec<Result<ValidRedaction, String>> = manifest
        .redactions
        .iter()
        .map(|r| check_redaction_entry(r, &manifest, policy))
        .collect();
    let valid: Vec<ValidRedaction> = entries
        .iter()
        .filter_map(|e| e.as_ref().ok())
        .map(|v| ValidRedaction { record: v.record.clone() })
        .collect();
    run.record(
        "exclusion_audit",
        check_exclusion_audit(&asset, &exclusions, manifest_range, &valid, policy),
    );

    let signature = check_signature(&manifest);
    let signature_ok = matches!(signature, Pass(_));
    run.record("signature", signature);
    run.record("chain", check_chain(&manifest, policy));
    run.record("revocation", check_revocation(&manifest, policy));

    let (timestamp, token_verdict) = check_timestamp(&manifest, policy);
    run.record("timestamp", timestamp);
    if let Some(token) = &manifest.claim_signature.timestamp {
        let bound = manifest.claim_signature.binding_mode == BindingMode::Bound
            && signature_ok
            && token_verdict.as_ref().is_some_and(TokenVerdict::is_valid);
        ctx.displayed_time = DisplayedTime {
            time: Some(token.gen_time),
            provenance: if bound { TimeProvenance::Signed } else { TimeProvenance::UnboundToken },
        };
    }

    let mut redacted = Vec::new();
    run.record("redaction", check_redactions(&manifest, &entries, policy, &mut redacted));
    ctx.redacted = redacted;

    finish(run, policy, ctx)
}

pub fn validate_asset(asset: &Asset, policy: &ValidationPolicy) -> ValidationReport {
    validate(asset.bytes(), policy)
}

/// Runs both policies over the same bytes and compares the results.
pub fn validate_differential(bytes: &[u8], a: &ValidationPolicy, b: &ValidationPolicy) -> DifferentialReport {
    let mut ra = validate(bytes, a);
    let mut rb = validate(bytes, b);
    let verdicts_agree = ra.verdict == rb.verdict;
    let g4 = if verdicts_agree { GoalStatus::Held } else { GoalStatus::Violated };
    ra.goals.g4 = g4;
    rb.goals.g4 = g4;
    let diverging = ra
        .checks
        .iter()
        .zip(&rb.checks)
        .filter(|(x, y)| x.outcome != y.outcome)
        .map(|(x, y)| CheckDiff {
            name: x.name.clone(),
            a: x.outcome,
            b: y.outcome,
        })
        .collect();
    DifferentialReport {
        a: ra,
        b: rb,
        verdicts_agree,
        diverging,
        g4,
    }
}
