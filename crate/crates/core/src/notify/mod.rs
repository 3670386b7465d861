//! SMS broadcasts to registered mobile numbers through a pluggable gateway.

mod gateway;
mod http;
mod segment;

use std::collections::BTreeSet;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use gateway::{GatewayOutcome, GatewayResult, MockCall, MockGateway, SmsGateway};
pub use http::{interpret_status, HttpGateway};
pub use segment::{segment_message, septet_len, septets, MULTIPART_LIMIT, SINGLE_LIMIT};

use crate::registry::{Phone, Registry, ResidentId, ZoneId};

/// Attempts per recipient before giving up on transient errors.
pub const RETRY_LIMIT: u32 = 3;

/// Wait before attempt `n + 1`, given that `n` attempts have failed.
pub fn backoff(failed_attempts: u32) -> Duration {
    Duration::from_secs(1u64 << failed_attempts.saturating_sub(1).min(16))
}

pub fn idempotency_key(job_id: &str, phone: &Phone) -> String {
    format!("{job_id}:{phone}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AudienceFilter {
    All,
    Zone { zone_id: ZoneId },
    Residents { resident_ids: Vec<ResidentId> },
}

/// Residents matching `filter` that have a mobile number. A number shared
/// by several residents goes to the lowest resident id only.
pub fn resolve_audience(registry: &Registry, filter: &AudienceFilter) -> Vec<(ResidentId, Phone)> {
    let wanted: Option<BTreeSet<&ResidentId>> = match filter {
        AudienceFilter::Residents { resident_ids } => Some(resident_ids.iter().collect()),
        _ => None,
    };
    let mut seen = BTreeSet::new();
    registry
        .iter()
        .filter(|r| match filter {
            AudienceFilter::All => true,
            AudienceFilter::Zone { zone_id } => r.zone_id == *zone_id,
            AudienceFilter::Residents { .. } => wanted.as_ref().is_some_and(|w| w.contains(&r.resident_id)),
        })
        .filter_map(|r| r.mobile_number.clone().map(|p| (r.resident_id.clone(), p)))
        .filter(|(_, p)| seen.insert(p.clone()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecipientStatus {
    Pending,
    Sent,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recipient {
    pub resident_id: ResidentId,
    pub phone: Phone,
    pub status: RecipientStatus,
    pub attempts: u32,
    pub idempotency_key: String,
    /// An attempt was started but its result never recorded.
    #[serde(default)]
    pub in_flight: bool,
    #[serde(default)]
    pub provider_ref: Option<String>,
    #[serde(default)]
    pub last_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BroadcastJob {
    pub job_id: String,
    pub message: String,
    pub audience_filter: AudienceFilter,
    pub created_by: String,
    pub created_at: DateTime<Utc>,
    pub segments: usize,
    pub recipients: Vec<Recipient>,
}

impl BroadcastJob {
    pub fn recipient(&self, phone: &Phone) -> Option<&Recipient> {
        self.recipients.iter().find(|r| &r.phone == phone)
    }

    pub(crate) fn recipient_mut(&mut self, phone: &Phone) -> Option<&mut Recipient> {
        self.recipients.iter_mut().find(|r| &r.phone == phone)
    }

    pub fn is_settled(&self) -> bool {
        self.recipients.iter().all(|r| r.status != RecipientStatus::Pending)
    }

    pub fn count(&self, status: RecipientStatus) -> usize {
        self.recipients.iter().filter(|r| r.status == status).count()
    }
}
