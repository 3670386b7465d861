//! In-memory session tokens. Sessions do not survive a restart; officials
//! sign in again.

use std::collections::HashMap;

use barangay_core::access::{Officer, Role};
use chrono::{DateTime, Duration, Utc};
use parking_lot::Mutex;
use rand::rngs::OsRng;
use rand::TryRngCore;
use serde::Serialize;

pub const DEFAULT_TTL: Duration = Duration::hours(8);

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Session {
    pub token: String,
    pub username: String,
    pub role: Role,
    pub expires_at: DateTime<Utc>,
}

impl Session {
    pub fn officer(&self) -> Officer {
        Officer::new(self.username.clone(), self.role)
    }
}

#[derive(Debug)]
pub struct SessionStore {
    ttl: Duration,
    sessions: Mutex<HashMap<String, Session>>,
}

/// 128 random bits from the operating system, hex encoded.
pub fn new_token() -> String {
    let mut bytes = [0u8; 16];
    OsRng.try_fill_bytes(&mut bytes).expect("operating system RNG available");
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        SessionStore {
            ttl,
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }

    pub fn create(&self, officer: &Officer, now: DateTime<Utc>) -> Session {
        let s = Session {
            token: new_token(),
            username: officer.username.clone(),
            role: officer.role,
            expires_at: now + self.ttl,
        };
        let mut map = self.sessions.lock();
        map.retain(|_, v| v.expires_at > now);
        map.insert(s.token.clone(), s.clone());
        s
    }

    /// The live session for `token`; expired ones are dropped on sight.
    pub fn get(&self, token: &str, now: DateTime<Utc>) -> Option<Session> {
        let mut map = self.sessions.lock();
        match map.get(token) {
            Some(s) if s.expires_at > now => Some(s.clone()),
            Some(_) => {
                map.remove(token);
                None
            }
            None => None,
        }
    }

    pub fn revoke(&self, token: &str) -> bool {
        self.sessions.lock().remove(token).is_some()
    }
}
