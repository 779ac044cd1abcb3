// SPDX-License-Identifier: Apache-2.0

use std::fmt::{self, Write as _};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const REPORT_SCHEMA: &str = "prov-report/1";
pub const DIFF_SCHEMA: &str = "prov-diff/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Accepted,
    AcceptedWithRedaction,
    Rejected,
    Unverifiable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Accepted => "ACCEPTED",
            Verdict::AcceptedWithRedaction => "ACCEPTED_WITH_REDACTION",
            Verdict::Rejected => "REJECTED",
            Verdict::Unverifiable => "UNVERIFIABLE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Verdict::Accepted,
            Verdict::AcceptedWithRedaction,
            Verdict::Rejected,
            Verdict::Unverifiable,
        ]
        .into_iter()
        .find(|v| v.as_str() == s)
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Accepted | Verdict::AcceptedWithRedaction => 0,
            Verdict::Rejected => 2,
            Verdict::Unverifiable => 3,
        }
    }

    pub fn is_accepted(self) -> bool {
        self.exit_code() == 0
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Pass,
    Fail,
    Skipped,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Skipped => "SKIPPED",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub outcome: Outcome,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GoalStatus {
    Held,
    Violated,
    NotEvaluated,
}

impl GoalStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            GoalStatus::Held => "HELD",
            GoalStatus::Violated => "VIOLATED",
            GoalStatus::NotEvaluated => "NOT_EVALUATED",
        }
    }
}

/// Goal flags.
///
/// - G1: claim tampering is evident
/// - G2: bytes outside declared exclusions are bound
/// - G3: the displayed time is the one the signer committed to
/// - G4: validators agree (differential runs only)
/// - G5: every byte except the manifest is bound or accounted for
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goals {
    #[serde(rename = "G1")]
    pub g1: GoalStatus,
    #[serde(rename = "G2")]
    pub g2: GoalStatus,
    #[serde(rename = "G3")]
    pub g3: GoalStatus,
    #[serde(rename = "G4")]
    pub g4: GoalStatus,
    #[serde(rename = "G5")]
    pub g5: GoalStatus,
}

impl Goals {
    pub fn iter(&self) -> [(&'static str, GoalStatus); 5] {
        [
            ("G1", self.g1),
            ("G2", self.g2),
            ("G3", self.g3),
            ("G4", self.g4),
            ("G5", self.g5),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TimeProvenance {
    /// From a token the claim signature covers.
    Signed,
    /// From a token nothing signed refers to; it may have been swapped.
    UnboundToken,
    Absent,
}

impl TimeProvenance {
    pub fn marker(self) -> &'static str {
        match self {
            TimeProvenance::Signed => "(signed time)",
            TimeProvenance::UnboundToken => "(unverified time)",
            TimeProvenance::Absent => "(no time)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisplayedTime {
    pub time: Option<i64>,
    pub provenance: TimeProvenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataField {
    pub label: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub policy: String,
    pub validation_time: i64,
    pub verdict: Verdict,
    pub checks: Vec<Check>,
    pub goals: Goals,
    pub displayed_time: DisplayedTime,
    pub generator: Option<String>,
    pub signer: Option<String>,
    /// Metadata segments as shown to the user, whether bound or not.
    pub metadata: Vec<MetadataField>,
    pub assertions: Vec<String>,
    pub redacted: Vec<String>,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn outcome(&self, name: &str) -> Option<Outcome> {
        self.check(name).map(|c| c.outcome)
    }

    /// The input could not be parsed as an asset at all.
    pub fn malformed(&self) -> bool {
        self.outcome("parse") == Some(Outcome::Fail)
    }

    pub fn exit_code(&self) -> i32 {
        if self.malformed() {
            4
        } else {
            self.verdict.exit_code()
        }
    }

    pub fn metadata_value(&self, label: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|m| m.label == label)
            .map(|m| m.value.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Human,
    Structured,
}

impl Format {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "human" => Some(Format::Human),
            "structured" => Some(Format::Structured),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unsupported schema `{0}`")]
    Schema(String),
    #[error("malformed report: {0}")]
    Json(#[from] serde_json::Error),
}

pub fn format_time(t: i64) -> String {
    match DateTime::<Utc>::from_timestamp(t, 0) {
        Some(dt) => dt.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        None => format!("@{t}"),
    }
}

fn render_human(report: &ValidationReport, out: &mut String) {
    let _ = writeln!(out, "policy:    {} (at {})", report.policy, format_time(report.validation_time));
    let _ = writeln!(out, "verdict:   {}", report.verdict);
    let t = &report.displayed_time;
    match t.time {
        Some(time) => {
            let _ = writeln!(out, "time:      {} {}", format_time(time), t.provenance.marker());
        }
        None => {
            let _ = writeln!(out, "time:      {}", t.provenance.marker());
        }
    }
    if let Some(g) = &report.generator {
        let _ = writeln!(out, "generator: {g}");
    }
    if let Some(s) = &report.signer {
        let _ = writeln!(out, "signer:    {s}");
    }
    if !report.assertions.is_empty() {
        let _ = writeln!(out, "assertions: {}", report.assertions.join(", "));
    }
    for r in &report.redacted {
        let _ = writeln!(out, "REDACTED:  {r}");
    }
    if !report.metadata.is_empty() {
        out.push_str("metadata:\n");
        for m in &report.metadata {
            let _ = writeln!(out, "  {}: {}", m.label, m.value);
        }
    }
    out.push_str("checks:\n");
    for c in &report.checks {
        let _ = writeln!(out, "  {:<7} {:<15} {}", c.outcome, c.name, c.detail);
    }
    let goals: Vec<String> = report
        .goals
        .iter()
        .iter()
        .map(|(g, s)| format!("{g}={}", s.as_str()))
        .collect();
    let _ = writeln!(out, "goals:     {}", goals.join(" "));
}

#[derive(Serialize)]
struct Tagged<'a, T> {
    schema: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Deserialize)]
struct Untagged<T> {
    schema: String,
    #[serde(flatten)]
    body: T,
}

fn structured<T: Serialize>(schema: &str, body: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(&Tagged { schema, body }).expect("plain data serializes");
    bytes.push(b'\n');
    bytes
}

fn decode<T: for<'de> Deserialize<'de>>(schema: &str, bytes: &[u8]) -> Result<T, ReportError> {
    let tagged: Untagged<T> = serde_json::from_slice(bytes)?;
    if tagged.schema != schema {
        return Err(ReportError::Schema(tagged.schema));
    }
    Ok(tagged.body)
}

pub fn render_report(report: &ValidationReport, format: Format) -> Vec<u8> {
    match format {
        Format::Structured => structured(REPORT_SCHEMA, report),
        Format::Human => {
            let mut out = String::new();
            render_human(report, &mut out);
            out.into_bytes()
        }
    }
}

pub fn decode_report(bytes: &[u8]) -> Result<ValidationReport, ReportError> {
    decode(REPORT_SCHEMA, bytes)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckDiff {
    pub name: String,
    pub a: Outcome,
    pub b: Outcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifferentialReport {
    pub a: ValidationReport,
    pub b: ValidationReport,
    pub verdicts_agree: bool,
    /// Checks whose outcomes differ, in check order.
    pub diverging: Vec<CheckDiff>,
    #[serde(rename = "G4")]
    pub g4: GoalStatus,
}

impl DifferentialReport {
    pub fn exit_code(&self) -> i32 {
        if self.verdicts_agree {
            0
        } else {
            5
        }
    }
}

pub fn render_differential(report: &DifferentialReport, format: Format) -> Vec<u8> {
    match format {
        Format::Structured => structured(DIFF_SCHEMA, report),
        Format::Human => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "{}: {}  vs  {}: {}",
                report.a.policy, report.a.verdict, report.b.policy, report.b.verdict
            );
            let _ = writeln!(
                out,
                "G4={}  ({})",
                report.g4.as_str(),
                if report.verdicts_agree { "verdicts agree" } else { "verdicts differ" }
            );
            if report.diverging.is_empty() {
                out.push_str("no diverging checks\n");
            } else {
                out.push_str("diverging checks:\n");
                for d in &report.diverging {
                    let _ = writeln!(out, "  {:<15} {:<7} vs {}", d.name, d.a, d.b);
                }
            }
            for r in [&report.a, &report.b] {
                let _ = writeln!(out, "\n== {} ==", r.policy);
                render_human(r, &mut out);
            }
            out.into_bytes()
        }
    }
}

pub fn decode_differential(bytes: &[u8]) -> Result<DifferentialReport, ReportError> {
    decode(DIFF_SCHEMA, bytes)
}
