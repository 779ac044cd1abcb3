// SPDX-License-Identifier: Apache-2.0

//! On-disk workspace: authorities, credentials, trust list and revocation
//! lists under a single root.
//!
//! ```text
//! <root>/workspace.txt
//! <root>/authorities/{signing-ca,tsa-ca}.auth
//! <root>/credentials/<name>.cred
//! <root>/trust.list
//! <root>/crl/<issuer>-<this_update>.crl
//! <root>/policies/{spec,hardened}.policy
//! ```

use std::fs;
use std::path::{Component, Path, PathBuf};

use provlab::codec::Canonical;
use provlab::fixtures::{Lab, T0};
use provlab::trust::{Authority, Credential, RevocationList, TrustList};

use crate::CliError;

pub const MARKER: &str = "workspace.txt";

pub const CREDENTIALS: [&str; 6] = ["camera", "short-lived", "revocable", "redactor", "tsa", "rogue-tsa"];

#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
    pub lab: Lab,
}

pub(crate) fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Io(path.to_owned(), e))
}

pub(crate) fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::Io(parent.to_owned(), e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Io(path.to_owned(), e))
}

pub(crate) fn decode<T: Canonical>(path: &Path) -> Result<T, CliError> {
    T::from_canonical_bytes(&read(path)?).map_err(|e| CliError::Decode(path.to_owned(), e.to_string()))
}

const SPEC_POLICY: &str = "\
# Follows the standard's letter.
name = spec
revocation_mode = NONE
timestamp_rule = ACCEPT_UNBOUND
file_integrity = WEAK
expiry_rule = AT_VALIDATION_TIME
";

const HARDENED_POLICY: &str = "\
# Strict revocation, bound timestamps, whole-file integrity, archival expiry.
name = hardened
revocation_mode = CRL_REQUIRED
timestamp_rule = REQUIRE_BOUND
file_integrity = STRONG
expiry_rule = AT_TIMESTAMP_TIME_WITH_ARCHIVAL_CHAIN
";

impl Workspace {
    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Creates a workspace in an empty (or missing) directory.
    pub fn init(root: &Path, seed: u64) -> Result<Workspace, CliError> {
        if let Ok(mut entries) = fs::read_dir(root) {
            if entries.next().is_some() {
                return Err(CliError::RootNotEmpty(root.to_owned()));
            }
        }
        let ws = Workspace {
            root: root.to_owned(),
            lab: Lab::new(seed)?,
        };
        write(&root.join(MARKER), format!("provlab workspace\nseed = {seed}\n").as_bytes())?;
        ws.save_authorities()?;
        for name in CREDENTIALS {
            write(&ws.credential_path(name), &ws.credential(name)?.canonical_bytes())?;
        }
        write(&root.join("trust.list"), &ws.lab.trust().canonical_bytes())?;
        ws.publish_crls(T0)?;
        write(&root.join("policies/spec.policy"), SPEC_POLICY.as_bytes())?;
        write(&root.join("policies/hardened.policy"), HARDENED_POLICY.as_bytes())?;
        Ok(ws)
    }

    pub fn open(root: &Path) -> Result<Workspace, CliError> {
        let marker = String::from_utf8_lossy(&read(&root.join(MARKER))?).into_owned();
        let seed = marker
            .lines()
            .find_map(|l| l.strip_prefix("seed = "))
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| CliError::Decode(root.join(MARKER), "missing seed".into()))?;
        let cred = |name: &str| decode::<Credential>(&root.join("credentials").join(format!("{name}.cred")));
        let lab = Lab {
            seed,
            signing_ca: decode(&root.join("authorities/signing-ca.auth"))?,
            tsa_ca: decode(&root.join("authorities/tsa-ca.auth"))?,
            camera: cred("camera")?,
            short_lived: cred("short-lived")?,
            revocable: cred("revocable")?,
            redactor: cred("redactor")?,
            tsa: cred("tsa")?,
            rogue_tsa: cred("rogue-tsa")?,
        };
        Ok(Workspace {
            root: root.to_owned(),
            lab,
        })
    }

    fn credential_path(&self, name: &str) -> PathBuf {
        self.root.join("credentials").join(format!("{name}.cred"))
    }

    pub fn credential(&self, name: &str) -> Result<&Credential, CliError> {
        let lab = &self.lab;
        Ok(match name {
            "camera" => &lab.camera,
            "short-lived" => &lab.short_lived,
            "revocable" => &lab.revocable,
            "redactor" => &lab.redactor,
            "tsa" => &lab.tsa,
            "rogue-tsa" => &lab.rogue_tsa,
            other => return Err(CliError::Usage(format!("unknown credential `{other}` (have: {})", CREDENTIALS.join(", ")))),
        })
    }

    pub fn save_authorities(&self) -> Result<(), CliError> {
        write(&self.root.join("authorities/signing-ca.auth"), &self.lab.signing_ca.canonical_bytes())?;
        write(&self.root.join("authorities/tsa-ca.auth"), &self.lab.tsa_ca.canonical_bytes())
    }

    /// Writes fresh revocation lists from both authorities, keeping older ones.
    pub fn publish_crls(&self, this_update: i64) -> Result<(), CliError> {
        for (name, authority) in [("signing-ca", &self.lab.signing_ca), ("tsa-ca", &self.lab.tsa_ca)] {
            let crl = authority.generate_crl(this_update);
            write(&self.root.join("crl").join(format!("{name}-{this_update}.crl")), &crl.canonical_bytes())?;
        }
        Ok(())
    }

    pub fn trust(&self) -> Result<TrustList, CliError> {
        decode(&self.root.join("trust.list"))
    }

    /// Every revocation list in `crl/`, in file-name order.
    pub fn crls(&self) -> Result<Vec<RevocationList>, CliError> {
        let dir = self.root.join("crl");
        let mut paths: Vec<PathBuf> = match fs::read_dir(&dir) {
            Ok(entries) => entries.filter_map(|e| e.ok().map(|e| e.path())).collect(),
            Err(_) => return Ok(Vec::new()),
        };
        paths.retain(|p| p.extension().is_some_and(|x| x == "crl"));
        paths.sort();
        paths.iter().map(|p| decode(p)).collect()
    }

    pub fn signing_authority_mut(&mut self) -> &mut Authority {
        &mut self.lab.signing_ca
    }

    /// Resolves an input path: relative paths are taken from the current directory.
    pub fn input(&self, path: &Path) -> PathBuf {
        path.to_owned()
    }

    /// Resolves an output path inside the workspace. Relative paths are
    /// joined to the root; nothing may escape it.
    pub fn output(&self, path: &Path) -> Result<PathBuf, CliError> {
        if path.components().any(|c| c == Component::ParentDir) {
            return Err(CliError::OutsideWorkspace(path.to_owned()));
        }
        if path.is_absolute() {
            if path.starts_with(&self.root) {
                return Ok(path.to_owned());
            }
            let root = fs::canonicalize(&self.root).map_err(|e| CliError::Io(self.root.clone(), e))?;
            return if path.starts_with(root) {
                Ok(path.to_owned())
            } else {
                Err(CliError::OutsideWorkspace(path.to_owned()))
            };
        }
        Ok(self.root.join(path))
    }

    /// Resolves a path named inside a policy file: relative to the root.
    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_owned()
        } else {
            self.root.join(p)
        }
    }
}
