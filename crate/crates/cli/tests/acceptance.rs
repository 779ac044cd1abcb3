// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any failed.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest as _, Sha256};

use provlab::codec::Canonical;
use provlab::container::{self, parse_asset, ByteRange};
use provlab::credentials::Manifest;
use provlab::crypto::SigningKey;
use provlab::fixtures::{DAY, GPS_LABEL, T0, YEAR};
use provlab::trust::{query_status, run_status_service, Authority, CertStatus, ServiceClock, Usage};
use provlab::validator::{
    decode_differential, decode_report, format_time, rebase_exclusions, validate, GoalStatus, TimeProvenance,
    ValidationPolicy, ValidationReport, Verdict,
};
use provlab_cli::corpus::{IndexRow, FALSE_GPS, INDEX_FILE};
use provlab_cli::workspace::Workspace;

struct Ws {
    _tmp: tempfile::TempDir,
    root: PathBuf,
}

impl Ws {
    fn new(seed: u64) -> Ws {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().join("ws");
        let ws = Ws { _tmp: tmp, root };
        assert_eq!(ws.run(&["init", "--seed", &seed.to_string()]).0, 0);
        ws
    }

    fn run(&self, args: &[&str]) -> (i32, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut argv = vec!["provlab", "-w", self.root.to_str().unwrap()];
        argv.extend_from_slice(args);
        let code = provlab_cli::run(argv, &mut out, &mut err);
        let mut text = String::from_utf8(out).unwrap();
        text.push_str(&String::from_utf8(err).unwrap());
        (code, text)
    }

    fn path(&self, rel: &str) -> String {
        self.root.join(rel).to_str().unwrap().to_owned()
    }

    fn report(&self, args: &[&str]) -> (i32, ValidationReport) {
        let mut a = vec!["validate"];
        a.extend_from_slice(args);
        a.extend_from_slice(&["--format", "structured"]);
        let (code, text) = self.run(&a);
        (code, decode_report(text.as_bytes()).unwrap_or_else(|e| panic!("{e}: {text}")))
    }
}

/// Recomputes the hard-binding digest byte by byte from the recorded exclusions.
fn oracle_binding(bytes: &[u8]) -> [u8; 32] {
    let asset = parse_asset(bytes).unwrap();
    let m = Manifest::from_canonical_bytes(container::extract_manifest(&asset).unwrap()).unwrap();
    let excl = rebase_exclusions(&m.claim.binding.exclusions, asset.manifest_segment().unwrap().range);
    let mut h = Sha256::new();
    for (i, b) in bytes.iter().enumerate() {
        if !excl.iter().any(|r| r.start <= i && i < r.start + r.length) {
            h.update([*b]);
        }
    }
    h.finalize().into()
}

fn declared_binding(bytes: &[u8]) -> [u8; 32] {
    let asset = parse_asset(bytes).unwrap();
    Manifest::from_canonical_bytes(container::extract_manifest(&asset).unwrap())
        .unwrap()
        .claim
        .binding
        .digest
        .0
}

fn exclusions_of(bytes: &[u8]) -> (Vec<ByteRange>, ByteRange) {
    let asset = parse_asset(bytes).unwrap();
    let m = Manifest::from_canonical_bytes(container::extract_manifest(&asset).unwrap()).unwrap();
    let manifest = asset.manifest_segment().unwrap().range;
    (rebase_exclusions(&m.claim.binding.exclusions, manifest), manifest)
}

fn fig1_timestamp_replace() -> String {
    let ws = Ws::new(1);
    assert_eq!(ws.run(&["fixture", "unbound-timestamp"]).0, 0);
    let asset = ws.path("fixtures/unbound-timestamp/asset.pvl");
    let forged = T0 - 10 * YEAR;
    let (code, out) = ws.run(&["attack", "timestamp-replace", &asset, "-o", "forged.pvl", "--new-time", &forged.to_string()]);
    assert_eq!(code, 0, "{out}");
    let forged_path = ws.path("forged.pvl");
    let (code, spec) = ws.report(&[&forged_path, "--policy", "spec", "--at", "T0+1d"]);
    assert_eq!((code, spec.verdict), (0, Verdict::Accepted));
    assert_eq!(spec.displayed_time.time, Some(forged));
    assert_eq!(spec.displayed_time.provenance, TimeProvenance::UnboundToken);
    let (_, human) = ws.run(&["validate", &forged_path, "--at", "T0+1d"]);
    let line = format!("{} (unverified time)", format_time(forged));
    assert!(human.contains(&line), "{human}");
    let (code, hardened) = ws.report(&[&forged_path, "--policy", "hardened", "--at", "T0+1d"]);
    assert_eq!((code, hardened.verdict), (2, Verdict::Rejected));
    format!("spec shows `{line}`, hardened REJECTED")
}

fn fig2_revocation() -> String {
    let ws = Ws::new(1);
    assert_eq!(ws.run(&["fixture", "revocable"]).0, 0);
    let original = ws.path("fixtures/revocable/original.pvl");
    let revoke_at = T0 + 30 * DAY;
    let (code, out) = ws.run(&["attack", "sign-with-revoked", &original, "-o", "revoked.pvl", "--revoke-at", &revoke_at.to_string()]);
    assert_eq!(code, 0, "{out}");
    fs::write(ws.root.join("none.policy"), "name = no-revocation\nrevocation_mode = NONE\n").unwrap();
    fs::write(ws.root.join("crl.policy"), "name = crl-required\nrevocation_mode = CRL_REQUIRED\n").unwrap();
    let (none, crl) = (ws.path("none.policy"), ws.path("crl.policy"));
    let at = (revoke_at + 182 * DAY).to_string();
    let asset = ws.path("revoked.pvl");
    let (code, a) = ws.report(&[&asset, "--policy", &none, "--at", &at]);
    assert_eq!((code, a.verdict), (0, Verdict::Accepted));
    let (code, b) = ws.report(&[&asset, "--policy", &crl, "--at", &at]);
    assert_eq!((code, b.verdict), (2, Verdict::Rejected));
    let (code, text) = ws.run(&["diff", &asset, &none, &crl, "--at", &at, "--format", "structured"]);
    assert_eq!(code, 5, "{text}");
    let diff = decode_differential(text.as_bytes()).unwrap();
    assert_eq!(diff.g4, GoalStatus::Violated);
    assert!(diff.diverging.iter().any(|d| d.name == "revocation"));
    "NONE ACCEPTED, CRL_REQUIRED REJECTED, diff exit 5 with G4 VIOLATED".into()
}

fn fig3_exclusion_mutate() -> String {
    let ws = Ws::new(1);
    assert_eq!(ws.run(&["fixture", "gps-excluded"]).0, 0);
    let asset = ws.path("fixtures/gps-excluded/asset.pvl");
    let (code, out) = ws.run(&["attack", "exclusion-mutate", &asset, "-o", "moved.pvl", "--label", GPS_LABEL, "--payload", FALSE_GPS]);
    assert_eq!(code, 0, "{out}");
    let before = fs::read(&asset).unwrap();
    let after = fs::read(ws.root.join("moved.pvl")).unwrap();
    assert_ne!(before, after);
    let declared = declared_binding(&before);
    assert_eq!(oracle_binding(&before), declared);
    assert_eq!(oracle_binding(&after), declared);
    assert_eq!(declared_binding(&after), declared);
    let moved = ws.path("moved.pvl");
    let (code, spec) = ws.report(&[&moved, "--at", "T0+1d"]);
    assert_eq!((code, spec.verdict), (0, Verdict::Accepted));
    assert_eq!(spec.metadata_value(GPS_LABEL), Some(FALSE_GPS));
    let (code, hardened) = ws.report(&[&moved, "--policy", "hardened", "--at", "T0+1d"]);
    assert_eq!((code, hardened.verdict), (2, Verdict::Rejected));
    format!("binding digest {} unchanged, spec shows {FALSE_GPS}", hex(&declared[..6]))
}

fn hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect()
}

fn fig4_expiry() -> String {
    let ws = Ws::new(1);
    assert_eq!(ws.run(&["fixture", "short-lived-cert"]).0, 0);
    let original = ws.path("fixtures/short-lived-cert/original.pvl");
    let (code, out) = ws.run(&["sign", &original, "-o", "plain.pvl", "--signer", "short-lived", "--bound"]);
    assert_eq!(code, 0, "{out}");
    let plain = ws.path("plain.pvl");
    let bytes = fs::read(&plain).unwrap();
    let (code, r) = ws.report(&[&plain, "--at", "T0+1d"]);
    assert_eq!((code, r.verdict), (0, Verdict::Accepted));
    let (code, r) = ws.report(&[&plain, "--at", "T0+1y"]);
    assert_eq!((code, r.verdict), (3, Verdict::Unverifiable));
    assert_eq!(fs::read(&plain).unwrap(), bytes);
    // without an archival token the hardened policy cannot help either
    let (_, r) = ws.report(&[&plain, "--policy", "hardened", "--at", "T0+1y"]);
    assert_eq!(r.verdict, Verdict::Unverifiable);

    assert_eq!(ws.run(&["extend", &plain, "-o", "extended.pvl", "--at", "T0+1h"]).0, 0);
    let extended = ws.path("extended.pvl");
    let (code, r) = ws.report(&[&extended, "--policy", "hardened", "--at", "T0+1y"]);
    assert_eq!((code, r.verdict), (0, Verdict::Accepted), "{:#?}", r.checks);
    let (code, _) = ws.report(&[&extended, "--at", "T0+1y"]);
    assert_eq!(code, 3);
    // the shipped fixture carries the same archival token
    let fixture = ws.path("fixtures/short-lived-cert/asset.pvl");
    assert_eq!(ws.report(&[&fixture, "--at", "T0+1y"]).0, 3);
    assert_eq!(ws.report(&[&fixture, "--policy", "hardened", "--at", "T0+1y"]).0, 0);
    "spec ACCEPTED at +1d, exit 3 at +1y; archival-extended hardened ACCEPTED at +1y".into()
}

fn corpus_ws() -> Ws {
    let ws = Ws::new(1);
    let (code, out) = ws.run(&["corpus", "--seed", "1", "--out", "corpus"]);
    assert_eq!(code, 0, "{out}");
    ws
}

fn fixture_assets(ws: &Ws) -> Vec<Vec<u8>> {
    let mut names: Vec<PathBuf> = fs::read_dir(ws.root.join("corpus/fixtures"))
        .unwrap()
        .map(|e| e.unwrap().path().join("asset.pvl"))
        .collect();
    names.sort();
    names.iter().map(|p| fs::read(p).unwrap()).collect()
}

fn soundness_sweep() -> String {
    let ws = corpus_ws();
    let w = Workspace::open(&ws.root).unwrap();
    let at = T0 + DAY;
    let spec = ValidationPolicy::spec(w.trust().unwrap(), at);
    let hardened = ValidationPolicy::hardened(w.trust().unwrap(), at, w.crls().unwrap());
    let assets = fixture_assets(&ws);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    const N: usize = 1000;

    // outside every exclusion; splices that break the container framing
    // cannot be parsed and are tallied separately
    let (mut rejected, mut unparseable) = (0, 0);
    while rejected < N {
        let bytes = &assets[rng.gen_range(0..assets.len())];
        let (excl, _) = exclusions_of(bytes);
        let len = rng.gen_range(1..=16);
        let start = rng.gen_range(0..bytes.len() - len);
        if excl.iter().any(|r| start < r.start + r.length && r.start < start + len) {
            continue;
        }
        let mut m = bytes.clone();
        for b in &mut m[start..start + len] {
            *b = rng.gen();
        }
        if m == *bytes {
            continue;
        }
        let r = validate(&m, &spec);
        if r.malformed() {
            assert!(!r.verdict.is_accepted());
            unparseable += 1;
            continue;
        }
        assert_eq!(r.verdict, Verdict::Rejected, "splice [{start}, +{len}): {:#?}", r.checks);
        rejected += 1;
    }

    // strictly inside a non-manifest exclusion
    let mut inside = 0;
    while inside < N {
        let bytes = &assets[rng.gen_range(0..assets.len())];
        let (excl, manifest) = exclusions_of(bytes);
        let targets: Vec<&ByteRange> = excl.iter().filter(|r| **r != manifest).collect();
        if targets.is_empty() {
            continue;
        }
        let r = targets[rng.gen_range(0..targets.len())];
        let len = rng.gen_range(1..=r.length);
        let start = r.start + rng.gen_range(0..=r.length - len);
        let mut m = bytes.clone();
        for b in &mut m[start..start + len] {
            *b = rng.gen();
        }
        let s = validate(&m, &spec);
        assert_eq!(s.verdict, Verdict::Accepted, "{:#?}", s.checks);
        let h = validate(&m, &hardened);
        assert_eq!(h.verdict, Verdict::Rejected, "{:#?}", h.checks);
        inside += 1;
    }
    format!("{rejected} outside REJECTED ({unparseable} unparseable draws excluded); {inside} inside ACCEPTED/REJECTED")
}

fn honest_completeness() -> String {
    let ws = corpus_ws();
    let index = fs::read_to_string(ws.root.join("corpus").join(INDEX_FILE)).unwrap();
    let rows: Vec<IndexRow> = index.lines().skip(1).map(|l| IndexRow::parse(l).unwrap()).collect();
    let mut accepted = 0;
    for row in rows.iter().filter(|r| r.asset.starts_with("fixtures/")) {
        let asset = ws.path(&format!("corpus/{}", row.asset));
        let crl = ws.path(&format!("corpus/{}", row.crl));
        let (code, r) = ws.report(&[&asset, "--policy", &row.policy, "--at", &row.at.to_string(), "--crl", &crl]);
        assert_eq!(r.verdict, row.expected, "{} under {}", row.asset, row.policy);
        // spec is the intended policy for every fixture
        if row.policy == "spec" {
            assert_eq!((code, r.verdict), (0, Verdict::Accepted), "{}", row.asset);
        }
        if row.expected == Verdict::Accepted {
            accepted += 1;
        }
    }
    format!("{accepted} honest (fixture, policy) pairs ACCEPTED, zero false alarms")
}

fn fuzz_totality() -> String {
    let ws = corpus_ws();
    let w = Workspace::open(&ws.root).unwrap();
    let policies = [
        ValidationPolicy::spec(w.trust().unwrap(), T0 + DAY),
        ValidationPolicy::hardened(w.trust().unwrap(), T0 + DAY, w.crls().unwrap()),
    ];
    let mut seeds = fixture_assets(&ws);
    for e in fs::read_dir(ws.root.join("corpus/attacks")).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "pvl") {
            seeds.push(fs::read(p).unwrap());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xf022);
    const N: usize = 100_000;
    let mut counts = [0usize; 5];
    for i in 0..N {
        let input: Vec<u8> = match i % 4 {
            0 => {
                let n = rng.gen_range(0..512);
                (0..n).map(|_| rng.gen()).collect()
            }
            1 => {
                let mut m = seeds[rng.gen_range(0..seeds.len())].clone();
                for _ in 0..rng.gen_range(1..8) {
                    let j = rng.gen_range(0..m.len());
                    m[j] ^= rng.gen_range(1..=255u8);
                }
                m
            }
            2 => {
                let s = &seeds[rng.gen_range(0..seeds.len())];
                let cut = rng.gen_range(0..s.len());
                let mut m = s[..cut].to_vec();
                if rng.gen_bool(0.5) {
                    m.extend((0..rng.gen_range(0..64)).map(|_| rng.gen::<u8>()));
                }
                m
            }
            _ => {
                // splice a run of one asset into another
                let a = &seeds[rng.gen_range(0..seeds.len())];
                let b = &seeds[rng.gen_range(0..seeds.len())];
                let at = rng.gen_range(0..a.len());
                let from = rng.gen_range(0..b.len());
                let len = rng.gen_range(0..(b.len() - from).min(256));
                [&a[..at], &b[from..from + len], &a[at..]].concat()
            }
        };
        let policy = &policies[i % 2];
        let code = panic::catch_unwind(AssertUnwindSafe(|| validate(&input, policy).exit_code()))
            .unwrap_or_else(|_| panic!("validator panicked on input {i} ({} bytes)", input.len()));
        assert!(matches!(code, 0 | 2 | 3 | 4), "exit {code}");
        counts[code as usize] += 1;
    }
    format!(
        "{N} inputs, no panics; exit 0:{} 2:{} 3:{} 4:{}",
        counts[0], counts[2], counts[3], counts[4]
    )
}

fn tree_hash(root: &Path) -> String {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p, root, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    let mut files = Vec::new();
    walk(root, root, &mut files);
    files.sort();
    let mut h = Sha256::new();
    for (rel, bytes) in &files {
        h.update(rel.as_bytes());
        h.update([0]);
        h.update((bytes.len() as u64).to_be_bytes());
        h.update(bytes);
    }
    hex(&h.finalize())
}

fn determinism() -> String {
    let a = corpus_ws();
    let b = corpus_ws();
    let (ha, hb) = (tree_hash(&a.root), tree_hash(&b.root));
    assert_eq!(ha, hb);
    let c = Ws::new(2);
    assert_eq!(c.run(&["corpus", "--out", "corpus"]).0, 0);
    assert_ne!(tree_hash(&c.root), ha);
    format!("tree hash {} in both runs", &ha[..16])
}

fn channel_agreement() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc4a2);
    let mut checked = 0;
    for round in 0..100u64 {
        let mut ca = Authority::new_root(SigningKey::derive(round, "ca"), "Round CA", T0 - YEAR, T0 + 10 * YEAR).unwrap();
        let n = rng.gen_range(1..=16);
        let serials: Vec<u64> = (0..n)
            .map(|i| {
                let key = SigningKey::derive(round, &format!("leaf{i}")).public_key();
                ca.issue(&format!("leaf {i}"), key, Usage::LeafSigning, T0, T0 + YEAR).unwrap().serial
            })
            .collect();
        for _ in 0..rng.gen_range(0..=2 * n) {
            let s = serials[rng.gen_range(0..n)];
            ca.revoke(s, T0 + rng.gen_range(0..1000)).unwrap();
        }
        let crl = ca.generate_crl(T0 + 5000);
        assert!(crl.verify(ca.certificate()));
        let key = ca.certificate().public_key.clone();
        let service = run_status_service(Arc::new(RwLock::new(ca)), "127.0.0.1:0", ServiceClock::Fixed(T0 + 5000)).unwrap();
        for &serial in &serials {
            let r = query_status(&service.endpoint(), serial, &key, Duration::from_secs(2)).unwrap();
            match crl.revoked_at(serial) {
                Some(t) => assert_eq!((r.status, r.revoked_at), (CertStatus::Revoked, Some(t))),
                None => assert_eq!((r.status, r.revoked_at), (CertStatus::Good, None)),
            }
            checked += 1;
        }
        assert_eq!(service.query_log(), serials);
        service.stop();
    }
    format!("100 sequences, {checked} serials agree")
}

type Criterion = (&'static str, Option<Duration>, fn() -> String);

fn main() {
    let criteria: [Criterion; 9] = [
        ("timestamp replacement", Some(Duration::from_secs(1)), fig1_timestamp_replace),
        ("revocation after compromise", Some(Duration::from_secs(1)), fig2_revocation),
        ("excluded metadata rewrite", Some(Duration::from_secs(1)), fig3_exclusion_mutate),
        ("certificate expiry and archival", Some(Duration::from_secs(1)), fig4_expiry),
        ("splice soundness sweep", Some(Duration::from_secs(60)), soundness_sweep),
        ("honest completeness", Some(Duration::from_secs(10)), honest_completeness),
        ("fuzz totality", Some(Duration::from_secs(300)), fuzz_totality),
        ("determinism", None, determinism),
        ("channel agreement", None, channel_agreement),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(f);
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok(detail) => match limit {
                Some(l) if elapsed > l => (false, format!("{detail}; took longer than {l:?}")),
                _ => (true, detail),
            },
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, msg)
            }
        };
        println!(
            "criterion {} {} {name} ({:.3}s): {detail}",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        failed += usize::from(!ok);
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
