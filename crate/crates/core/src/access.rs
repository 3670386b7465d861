//! Roles, the action matrix and password hashing for user accounts.

use std::fmt;

use argon2::password_hash::rand_core::OsRng;
use argon2::password_hash::{PasswordHash, PasswordHasher, PasswordVerifier, SaltString};
use argon2::Argon2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::ResidentId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Secretary,
    Treasurer,
    HealthWorker,
    Lgu,
    ResidentPublic,
}

impl Role {
    pub const ALL: [Role; 5] = [
        Role::Secretary,
        Role::Treasurer,
        Role::HealthWorker,
        Role::Lgu,
        Role::ResidentPublic,
    ];

    pub fn parse(raw: &str) -> Result<Self> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == raw.trim())
            .ok_or_else(|| Error::invalid("role", format!("unknown role {raw:?}")))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Secretary => "secretary",
            Role::Treasurer => "treasurer",
            Role::HealthWorker => "health_worker",
            Role::Lgu => "lgu",
            Role::ResidentPublic => "resident_public",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The signed-in official performing an operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Officer {
    pub username: String,
    pub role: Role,
}

impl Officer {
    pub fn new(username: impl Into<String>, role: Role) -> Self {
        Officer {
            username: username.into(),
            role,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    RegistryRead,
    RegistryWrite,
    BlotterWrite,
    ClearanceIssue,
    ClearanceOverride,
    ClearanceRead,
    HealthWrite,
    GeoRead,
    StatsRead,
    AnalyticsTrain,
    SmsBroadcast,
    AdvisoryPublish,
    OpenDataRead,
}

/// Role matrix. `None` is an anonymous caller, who may only read open data.
pub fn authorize(role: Option<Role>, action: Action) -> bool {
    use Action::*;
    let Some(role) = role else {
        return action == OpenDataRead;
    };
    match role {
        Role::Secretary => true,
        Role::Treasurer => matches!(action, ClearanceIssue | ClearanceRead | RegistryRead | OpenDataRead),
        Role::HealthWorker => matches!(action, HealthWrite | RegistryRead | OpenDataRead),
        Role::Lgu => matches!(action, OpenDataRead | StatsRead | GeoRead | AdvisoryPublish),
        Role::ResidentPublic => action == OpenDataRead,
    }
}

pub fn require(officer: &Officer, action: Action) -> Result<()> {
    if authorize(Some(officer.role), action) {
        Ok(())
    } else {
        Err(Error::Forbidden(format!("{} may not perform {action:?}", officer.role)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAccount {
    pub username: String,
    /// Argon2id PHC string.
    pub password_hash: String,
    pub role: Role,
    pub linked_resident_id: Option<ResidentId>,
}

pub fn hash_password(password: &str) -> Result<String> {
    let salt = SaltString::generate(&mut OsRng);
    Argon2::default()
        .hash_password(password.as_bytes(), &salt)
        .map(|h| h.to_string())
        .map_err(|e| Error::Storage(format!("password hashing failed: {e}")))
}

pub fn verify_password(password: &str, phc: &str) -> bool {
    PasswordHash::new(phc)
        .map(|h| Argon2::default().verify_password(password.as_bytes(), &h).is_ok())
        .unwrap_or(false)
}
