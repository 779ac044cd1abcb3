// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::trust::{RevocationList, TrustList};

macro_rules! knob {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            pub fn parse(s: &str) -> Option<Self> {
                match s {
                    $($text => Some($name::$variant),)+
                    _ => None,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

knob!(RevocationMode {
    None => "NONE",
    StatusServiceSoftFail => "STATUS_SERVICE_SOFT_FAIL",
    StatusServiceHardFail => "STATUS_SERVICE_HARD_FAIL",
    CrlRequired => "CRL_REQUIRED",
});

knob!(TimestampRule {
    AcceptUnbound => "ACCEPT_UNBOUND",
    RequireBound => "REQUIRE_BOUND",
});

knob!(
    /// `Weak` honors every declared exclusion. `Strong` lets only the
    /// manifest range go unbound; any other exclusion needs a countersigned
    /// redaction record pinning its current contents.
    FileIntegrity {
        Weak => "WEAK",
        Strong => "STRONG",
    }
);

knob!(ExpiryRule {
    AtValidationTime => "AT_VALIDATION_TIME",
    AtTimestampTimeWithArchivalChain => "AT_TIMESTAMP_TIME_WITH_ARCHIVAL_CHAIN",
});

pub const STATUS_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationPolicy {
    pub name: String,
    pub spec_version_required: Option<String>,
    pub revocation_mode: RevocationMode,
    pub timestamp_rule: TimestampRule,
    pub file_integrity: FileIntegrity,
    pub expiry_rule: ExpiryRule,
    pub trust: TrustList,
    pub validation_time: i64,
    /// Revocation lists available offline, used by `CrlRequired`.
    pub crls: Vec<RevocationList>,
    /// `host:port` of the status service, used by the status modes.
    pub status_endpoint: Option<String>,
}

impl ValidationPolicy {
    /// Behaves like a validator that follows the standard's letter: no
    /// revocation checking, unbound timestamps displayed, declared exclusions
    /// honored, certificates checked at validation time.
    pub fn spec(trust: TrustList, validation_time: i64) -> Self {
        ValidationPolicy {
            name: "spec".into(),
            spec_version_required: None,
            revocation_mode: RevocationMode::None,
            timestamp_rule: TimestampRule::AcceptUnbound,
            file_integrity: FileIntegrity::Weak,
            expiry_rule: ExpiryRule::AtValidationTime,
            trust,
            validation_time,
            crls: Vec::new(),
            status_endpoint: None,
        }
    }

    pub fn hardened(trust: TrustList, validation_time: i64, crls: Vec<RevocationList>) -> Self {
        ValidationPolicy {
            name: "hardened".into(),
            spec_version_required: None,
            revocation_mode: RevocationMode::CrlRequired,
            timestamp_rule: TimestampRule::RequireBound,
            file_integrity: FileIntegrity::Strong,
            expiry_rule: ExpiryRule::AtTimestampTimeWithArchivalChain,
            trust,
            validation_time,
            crls,
            status_endpoint: None,
        }
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.to_owned();
        self
    }

    pub fn at(mut self, validation_time: i64) -> Self {
        self.validation_time = validation_time;
        self
    }
}
