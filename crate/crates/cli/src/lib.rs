// SPDX-License-Identifier: Apache-2.0

//! Command-line front end for the provenance lab.
//!
//! Every command works inside a workspace root (`--workspace`, or the
//! `PROVLAB_WORKSPACE` environment variable) and writes nothing outside it.
//! [`run`] takes the argument list and output streams so the binary and the
//! tests share one code path.

pub mod corpus;
pub mod policy_file;
pub mod workspace;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use chrono::{DateTime, NaiveDate};
use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use provlab::attacks::{self, AttackError, AttackOutcome};
use provlab::container::{parse_asset, Asset, ContainerError};
use provlab::credentials::{Assertion, BindingMode, CredentialError, Scalar};
use provlab::fixtures::{make_fixture, FixtureError, Lab, DAY, GENERATOR, GPS_LABEL, T0, YEAR};
use provlab::signer::{sign_asset, ExclusionsPolicy, SignerConfig, SignerError};
use provlab::timestamp::{archival_extend, TimestampError};
use provlab::trust::{run_status_service, RevocationList, ServiceClock, TrustError};
use provlab::validator::{render_differential, render_report, validate, validate_differential, Format};

use crate::policy_file::load_policy;
use crate::workspace::{decode, read, write, Workspace};

/// Exit code for usage and I/O errors, and for attacks that do not apply.
pub const EXIT_ERROR: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("ROOT_NOT_EMPTY: {0} already has files in it")]
    RootNotEmpty(PathBuf),
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] io::Error),
    #[error("{0}: {1}")]
    Decode(PathBuf, String),
    #[error("{0}")]
    Usage(String),
    #[error("{0} is outside the workspace")]
    OutsideWorkspace(PathBuf),
    #[error("{0}:{1}: {2}")]
    Policy(String, usize, String),
    #[error(transparent)]
    Fixture(#[from] FixtureError),
    #[error(transparent)]
    Signer(#[from] SignerError),
    #[error("attack does not apply: {0}")]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Timestamp(#[from] TimestampError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error(transparent)]
    Trust(#[from] TrustError),
    #[error(transparent)]
    Credential(#[from] CredentialError),
}

/// Accepts epoch seconds, RFC 3339, `YYYY-MM-DD`, or an offset from the lab
/// epoch such as `T0`, `T0+30d`, `T0-10y`.
pub fn parse_time(s: &str) -> Result<i64, String> {
    let s = s.trim();
    if let Ok(t) = s.parse::<i64>() {
        return Ok(t);
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.timestamp());
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp());
    }
    if let Some(rest) = s.strip_prefix("T0") {
        if rest.is_empty() {
            return Ok(T0);
        }
        let (sign, rest) = match rest.split_at(1) {
            ("+", r) => (1, r),
            ("-", r) => (-1, r),
            _ => return Err(format!("bad time `{s}`")),
        };
        let unit = match rest.chars().last() {
            Some('s') => 1,
            Some('m') => 60,
            Some('h') => 3600,
            Some('d') => DAY,
            Some('y') => YEAR,
            _ => return Err(format!("bad time `{s}`")),
        };
        let n: i64 = rest[..rest.len() - 1].parse().map_err(|_| format!("bad time `{s}`"))?;
        return Ok(T0 + sign * n * unit);
    }
    Err(format!("bad time `{s}`: expected epoch seconds, RFC 3339, YYYY-MM-DD or T0[+-]N<s|m|h|d|y>"))
}

/// One assertion per line: `label key=value ...`. Values that parse as an
/// integer or a decimal become numbers, `0x...` becomes bytes, anything else
/// is text. Blank lines and `#` comments are skipped.
pub fn parse_assertions(text: &str) -> Result<Vec<Assertion>, CliError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut words = line.split_whitespace();
        let label = words.next().expect("non-empty line");
        let mut payload = BTreeMap::new();
        for w in words {
            let (k, v) = w
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("assertions line {}: expected key=value, got `{w}`", i + 1)))?;
            payload.insert(k.to_owned(), scalar(v));
        }
        out.push(Assertion::new(label, payload)?);
    }
    Ok(out)
}

fn scalar(v: &str) -> Scalar {
    if let Ok(n) = v.parse::<i64>() {
        return Scalar::Int(n);
    }
    if let Some(h) = v.strip_prefix("0x") {
        if let Ok(b) = hex::decode(h) {
            return Scalar::Bytes(b);
        }
    }
    if v.contains('.') {
        if let Ok(f) = v.parse::<f64>() {
            return Scalar::Float(f);
        }
    }
    Scalar::Text(v.to_owned())
}

#[derive(Debug, Parser)]
#[command(name = "provlab", version, about = "Sign, attack and validate provenance-carrying assets")]
pub struct Cli {
    /// Workspace root
    #[arg(long, short = 'w', global = true, env = "PROVLAB_WORKSPACE", default_value = ".")]
    pub workspace: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttackKind {
    TimestampReplace,
    ExclusionMutate,
    SignWithRevoked,
    ExpiryTimewarp,
    StripManifest,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create authorities, credentials, trust list and revocation lists
    Init {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Write a scenario fixture (signed and unsigned asset plus keys)
    Fixture {
        scenario: String,
        #[arg(long, short, default_value = "fixtures")]
        out: PathBuf,
    },
    /// Embed a signed manifest into an unsigned asset
    Sign {
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Assertions file; defaults to the lab camera's assertions
        #[arg(long)]
        assertions: Option<PathBuf>,
        #[arg(long, default_value = "camera")]
        signer: String,
        /// Timestamp the claim and sign over the token
        #[arg(long, conflicts_with = "unbound")]
        bound: bool,
        /// Sign the claim alone (default)
        #[arg(long)]
        unbound: bool,
        /// Attach a timestamp token over the signature (unbound mode)
        #[arg(long)]
        tsa: bool,
        /// Exclude a metadata segment's payload from the hard binding
        #[arg(long)]
        exclude: Vec<String>,
        #[arg(long, value_parser = parse_time, default_value = "T0")]
        at: i64,
        #[arg(long, default_value = GENERATOR)]
        generator: String,
    },
    /// Validate an asset under a policy
    Validate {
        asset: PathBuf,
        /// `spec`, `hardened`, or a policy file
        #[arg(long, default_value = "spec")]
        policy: String,
        #[arg(long, value_parser = parse_time)]
        at: Option<i64>,
        /// `human` or `structured`
        #[arg(long, default_value = "human")]
        format: String,
        /// Extra revocation list
        #[arg(long)]
        crl: Vec<PathBuf>,
    },
    /// Produce a mutated asset and a record of the expected verdicts
    Attack {
        #[arg(value_enum)]
        kind: AttackKind,
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Where to write the record; defaults to the output with a .json extension
        #[arg(long)]
        record: Option<PathBuf>,
        /// Forged token time (timestamp-replace)
        #[arg(long, value_parser = parse_time, default_value = "T0-10y")]
        new_time: i64,
        /// Metadata segment to rewrite (exclusion-mutate)
        #[arg(long, default_value = GPS_LABEL)]
        label: String,
        /// Replacement payload (exclusion-mutate)
        #[arg(long, default_value = corpus::FALSE_GPS)]
        payload: String,
        /// Revocation time (sign-with-revoked)
        #[arg(long, value_parser = parse_time, default_value = "T0+30d")]
        revoke_at: i64,
        /// Signing credential (sign-with-revoked)
        #[arg(long, default_value = "revocable")]
        signer: String,
        /// Validation time (expiry-timewarp) or signing time (sign-with-revoked)
        #[arg(long, value_parser = parse_time)]
        at: Option<i64>,
    },
    /// Validate under two policies and report where they disagree
    Diff {
        asset: PathBuf,
        policy_a: String,
        policy_b: String,
        #[arg(long, value_parser = parse_time)]
        at: Option<i64>,
        #[arg(long, default_value = "human")]
        format: String,
        #[arg(long)]
        crl: Vec<PathBuf>,
    },
    /// Generate the evaluation corpus and its index of expected verdicts
    Corpus {
        /// Defaults to the workspace seed
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short, default_value = "corpus")]
        out: PathBuf,
    },
    /// Answer certificate status queries for the signing CA
    ServeStatus {
        #[arg(long, default_value = "127.0.0.1:7878")]
        bind: String,
        /// Fixed response time; defaults to the system clock
        #[arg(long, value_parser = parse_time)]
        at: Option<i64>,
        /// Stop after this many seconds and print the query log
        #[arg(long)]
        duration: Option<u64>,
    },
    /// Revoke a workspace credential and publish new revocation lists
    Revoke {
        credential: String,
        #[arg(long, value_parser = parse_time)]
        at: i64,
    },
    /// Append an archival timestamp over the current manifest
    Extend {
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, value_parser = parse_time)]
        at: i64,
        #[arg(long, default_value = "tsa")]
        tsa: String,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn load_asset(path: &Path) -> Result<Asset, CliError> {
    parse_asset(&read(path)?).map_err(CliError::from)
}

fn extra_crls(paths: &[PathBuf]) -> Result<Vec<RevocationList>, CliError> {
    paths.iter().map(|p| decode(p)).collect()
}

fn format_arg(s: &str) -> Result<Format, CliError> {
    Format::parse(s).ok_or_else(|| CliError::Usage(format!("unknown format `{s}` (human, structured)")))
}

fn io_err(e: io::Error) -> CliError {
    CliError::Io(PathBuf::from("<stdout>"), e)
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let root = cli.workspace;
    match cli.command {
        Command::Init { seed } => {
            let ws = Workspace::init(&root, seed)?;
            writeln!(out, "initialized workspace {} (seed {seed})", ws.root().display()).map_err(io_err)?;
            Ok(0)
        }
        Command::Fixture { scenario, out: dir } => {
            let ws = Workspace::open(&root)?;
            let dir = ws.output(&dir)?;
            let m = make_fixture(&scenario, &ws.lab, &dir)?;
            out.write_all(m.render().as_bytes()).map_err(io_err)?;
            Ok(0)
        }
        Command::Sign {
            input,
            out: dest,
            assertions,
            signer,
            bound,
            unbound: _,
            tsa,
            exclude,
            at,
            generator,
        } => {
            let ws = Workspace::open(&root)?;
            let asset = load_asset(&input)?;
            let assertions = match assertions {
                Some(p) => parse_assertions(&String::from_utf8_lossy(&read(&p)?))?,
                None => ws.lab.assertions(),
            };
            let config = SignerConfig {
                generator_name: generator,
                credential: ws.credential(&signer)?,
                binding_mode: if bound { BindingMode::Bound } else { BindingMode::Unbound },
                exclusions: if exclude.is_empty() {
                    ExclusionsPolicy::ManifestOnly
                } else {
                    ExclusionsPolicy::ManifestPlusLabeled(exclude)
                },
                tsa: (bound || tsa).then_some(&ws.lab.tsa),
                clock: at,
            };
            let signed = sign_asset(&asset, &assertions, &config)?;
            let dest = ws.output(&dest)?;
            write(&dest, signed.bytes())?;
            writeln!(out, "signed {} -> {} ({} bytes)", input.display(), dest.display(), signed.len()).map_err(io_err)?;
            Ok(0)
        }
        Command::Validate {
            asset,
            policy,
            at,
            format,
            crl,
        } => {
            let ws = Workspace::open(&root)?;
            let format = format_arg(&format)?;
            let policy = load_policy(&ws, &policy, at, &extra_crls(&crl)?)?;
            let report = validate(&read(&asset)?, &policy);
            out.write_all(&render_report(&report, format)).map_err(io_err)?;
            Ok(report.exit_code())
        }
        Command::Attack {
            kind,
            input,
            out: dest,
            record,
            new_time,
            label,
            payload,
            revoke_at,
            signer,
            at,
        } => {
            let mut ws = Workspace::open(&root)?;
            let asset = load_asset(&input)?;
            let outcome = run_attack(&mut ws, kind, &asset, new_time, &label, &payload, revoke_at, &signer, at)?;
            let dest = ws.output(&dest)?;
            let record = match record {
                Some(r) => ws.output(&r)?,
                None => dest.with_extension("json"),
            };
            write(&dest, outcome.mutated_asset.bytes())?;
            write(&record, &outcome.record_bytes())?;
            out.write_all(&outcome.record_bytes()).map_err(io_err)?;
            writeln!(out).map_err(io_err)?;
            Ok(0)
        }
        Command::Diff {
            asset,
            policy_a,
            policy_b,
            at,
            format,
            crl,
        } => {
            let ws = Workspace::open(&root)?;
            let format = format_arg(&format)?;
            let crls = extra_crls(&crl)?;
            let a = load_policy(&ws, &policy_a, at, &crls)?;
            let b = load_policy(&ws, &policy_b, at, &crls)?;
            let report = validate_differential(&read(&asset)?, &a, &b);
            out.write_all(&render_differential(&report, format)).map_err(io_err)?;
            Ok(report.exit_code())
        }
        Command::Corpus { seed, out: dir } => {
            let ws = Workspace::open(&root)?;
            let lab = match seed {
                Some(s) if s != ws.lab.seed => Lab::new(s)?,
                _ => ws.lab.clone(),
            };
            let dir = ws.output(&dir)?;
            let rows = corpus::build_corpus(&lab, &dir)?;
            let assets: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.asset.as_str()).collect();
            writeln!(
                out,
                "corpus (seed {}) at {}: {} assets, {} index rows",
                lab.seed,
                dir.display(),
                assets.len(),
                rows.len()
            )
            .map_err(io_err)?;
            Ok(0)
        }
        Command::ServeStatus { bind, at, duration } => {
            let ws = Workspace::open(&root)?;
            let clock = at.map_or(ServiceClock::System, ServiceClock::Fixed);
            let authority = Arc::new(RwLock::new(ws.lab.signing_ca.clone()));
            let service = run_status_service(authority, bind.as_str(), clock)?;
            writeln!(out, "status service for `{}` listening on {}", ws.lab.signing_ca.name(), service.endpoint()).map_err(io_err)?;
            out.flush().map_err(io_err)?;
            match duration {
                Some(secs) => std::thread::sleep(Duration::from_secs(secs)),
                None => loop {
                    std::thread::park();
                },
            }
            let log = service.query_log();
            service.stop();
            let serials: Vec<String> = log.iter().map(u64::to_string).collect();
            writeln!(out, "queried serials: [{}]", serials.join(", ")).map_err(io_err)?;
            Ok(0)
        }
        Command::Revoke { credential, at } => {
            let mut ws = Workspace::open(&root)?;
            let serial = ws.credential(&credential)?.leaf().serial;
            ws.signing_authority_mut().revoke(serial, at)?;
            ws.save_authorities()?;
            ws.publish_crls(at)?;
            writeln!(out, "revoked `{credential}` (serial {serial}) at {at}").map_err(io_err)?;
            Ok(0)
        }
        Command::Extend { input, out: dest, at, tsa } => {
            let ws = Workspace::open(&root)?;
            let asset = load_asset(&input)?;
            let extended = archival_extend(&asset, ws.credential(&tsa)?, at)?;
            let dest = ws.output(&dest)?;
            write(&dest, extended.bytes())?;
            writeln!(out, "extended {} -> {}", input.display(), dest.display()).map_err(io_err)?;
            Ok(0)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_attack(
    ws: &mut Workspace,
    kind: AttackKind,
    asset: &Asset,
    new_time: i64,
    label: &str,
    payload: &str,
    revoke_at: i64,
    signer: &str,
    at: Option<i64>,
) -> Result<AttackOutcome, CliError> {
    Ok(match kind {
        AttackKind::TimestampReplace => attacks::attack_timestamp_replace(asset, &ws.lab.rogue_tsa, &ws.trust()?, new_time)?,
        AttackKind::ExclusionMutate => attacks::attack_exclusion_mutate(asset, label, payload.as_bytes())?,
        AttackKind::SignWithRevoked => {
            let snapshot = ws.clone();
            let config = SignerConfig {
                generator_name: GENERATOR.into(),
                credential: snapshot.credential(signer)?,
                binding_mode: BindingMode::Bound,
                exclusions: ExclusionsPolicy::ManifestOnly,
                tsa: Some(&snapshot.lab.tsa),
                clock: at.unwrap_or(T0),
            };
            let o = attacks::attack_sign_with_revoked(asset, &snapshot.lab.assertions(), &config, ws.signing_authority_mut(), revoke_at)?;
            ws.save_authorities()?;
            ws.publish_crls(revoke_at)?;
            o
        }
        AttackKind::ExpiryTimewarp => {
            let at = at.ok_or_else(|| CliError::Usage("expiry-timewarp needs --at".into()))?;
            attacks::attack_expiry_timewarp(asset, at)?
        }
        AttackKind::StripManifest => attacks::attack_strip_manifest(asset)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn times() {
        assert_eq!(parse_time("T0"), Ok(T0));
        assert_eq!(parse_time("T0+30d"), Ok(T0 + 30 * DAY));
        assert_eq!(parse_time("T0-10y"), Ok(T0 - 10 * YEAR));
        assert_eq!(parse_time("2025-01-15"), Ok(T0));
        assert_eq!(parse_time("2025-01-15T00:00:00Z"), Ok(T0));
        assert_eq!(parse_time("1736899200"), Ok(T0));
        assert!(parse_time("yesterday").is_err());
        assert!(parse_time("T0+3w").is_err());
    }

    #[test]
    fn assertion_lines() {
        let a = parse_assertions("# device\nstd.device make=ProvLab n=3 f=1.5 raw=0x0aff\n\nstd.gps lat=38.8977\n").unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].get("make"), Some(&Scalar::Text("ProvLab".into())));
        assert_eq!(a[0].get("n"), Some(&Scalar::Int(3)));
        assert_eq!(a[0].get("f"), Some(&Scalar::Float(1.5)));
        assert_eq!(a[0].get("raw"), Some(&Scalar::Bytes(vec![10, 255])));
        assert!(parse_assertions("std.device make").is_err());
        assert!(parse_assertions("BAD LABEL! x=1").is_err());
    }
}
