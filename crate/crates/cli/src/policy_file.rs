// SPDX-License-Identifier: Apache-2.0

//! Policy files: one `key = value` per line, `#` starts a comment.
//!
//! Keys are the `ValidationPolicy` field names. `crl` may repeat and adds to
//! the lists found in the workspace. Paths are relative to the workspace root.
//! Unset fields default to the `spec` preset.

use std::path::Path;

use provlab::trust::RevocationList;
use provlab::validator::{ExpiryRule, FileIntegrity, RevocationMode, TimestampRule, ValidationPolicy};

use crate::workspace::{decode, read, Workspace};
use crate::{parse_time, CliError};

/// `spec`, `hardened`, or a path to a policy file.
pub fn load_policy(ws: &Workspace, name: &str, at: Option<i64>, extra_crls: &[RevocationList]) -> Result<ValidationPolicy, CliError> {
    let mut crls = ws.crls()?;
    crls.extend_from_slice(extra_crls);
    let mut policy = match name {
        "spec" => ValidationPolicy::spec(ws.trust()?, 0),
        "hardened" => ValidationPolicy::hardened(ws.trust()?, 0, Vec::new()),
        path => {
            let text = String::from_utf8(read(Path::new(path))?)
                .map_err(|_| CliError::Policy(path.into(), 0, "not UTF-8".into()))?;
            parse_policy(ws, path, &text)?
        }
    };
    policy.crls.extend(crls);
    match at.or((policy.validation_time != 0).then_some(policy.validation_time)) {
        Some(t) => Ok(policy.at(t)),
        None => Err(CliError::Usage("validation time required: pass --at or set validation_time".into())),
    }
}

pub fn parse_policy(ws: &Workspace, origin: &str, text: &str) -> Result<ValidationPolicy, CliError> {
    let mut policy = ValidationPolicy::spec(ws.trust()?, 0).named(origin);
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| CliError::Policy(origin.into(), i + 1, msg);
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
        let bad = || err(format!("bad value `{value}` for `{key}`"));
        match key {
            "name" => policy.name = value.to_owned(),
            "spec_version_required" => policy.spec_version_required = Some(value.to_owned()),
            "revocation_mode" => policy.revocation_mode = RevocationMode::parse(value).ok_or_else(bad)?,
            "timestamp_rule" => policy.timestamp_rule = TimestampRule::parse(value).ok_or_else(bad)?,
            "file_integrity" => policy.file_integrity = FileIntegrity::parse(value).ok_or_else(bad)?,
            "expiry_rule" => policy.expiry_rule = ExpiryRule::parse(value).ok_or_else(bad)?,
            "trust" => policy.trust = decode(&ws.resolve(value))?,
            "validation_time" => policy.validation_time = parse_time(value).map_err(|_| bad())?,
            "crl" => policy.crls.push(decode(&ws.resolve(value))?),
            "status_endpoint" => policy.status_endpoint = Some(value.to_owned()),
            other => return Err(err(format!("unknown key `{other}`"))),
        }
    }
    Ok(policy)
}
