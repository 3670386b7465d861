use std::collections::{BTreeMap, VecDeque};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::registry::Phone;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatewayOutcome {
    Accepted,
    Rejected,
    TransientError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayResult {
    pub outcome: GatewayOutcome,
    pub provider_ref: Option<String>,
    /// Present for rejected and transient outcomes.
    pub reason: Option<String>,
}

impl GatewayResult {
    pub fn accepted(provider_ref: impl Into<String>) -> Self {
        GatewayResult {
            outcome: GatewayOutcome::Accepted,
            provider_ref: Some(provider_ref.into()),
            reason: None,
        }
    }

    pub fn rejected(reason: impl Into<String>) -> Self {
        GatewayResult {
            outcome: GatewayOutcome::Rejected,
            provider_ref: None,
            reason: Some(reason.into()),
        }
    }

    pub fn transient(reason: impl Into<String>) -> Self {
        GatewayResult {
            outcome: GatewayOutcome::TransientError,
            provider_ref: None,
            reason: Some(reason.into()),
        }
    }
}

/// An SMS provider. Implementations must be safe to call from several
/// dispatch workers at once.
pub trait SmsGateway: Send + Sync {
    fn send(&self, phone: &Phone, text: &str, idempotency_key: &str) -> GatewayResult;
}

/// One call as seen by the mock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MockCall {
    pub phone: String,
    pub text: String,
    pub key: String,
    pub outcome: GatewayOutcome,
}

#[derive(Debug, Default)]
struct MockInner {
    scripts: BTreeMap<String, VecDeque<GatewayOutcome>>,
    calls: Vec<MockCall>,
    delivered: BTreeMap<String, u32>,
}

/// In-process gateway with per-phone scripted outcomes. Unscripted calls
/// are accepted. Like a provider honouring idempotency keys, a repeated
/// key that was already accepted is acknowledged without a second delivery.
#[derive(Debug, Default)]
pub struct MockGateway {
    inner: Mutex<MockInner>,
}

impl MockGateway {
    pub fn new() -> Self {
        Self::default()
    }

    /// Queue outcomes for successive calls to `phone`.
    pub fn script(&self, phone: &str, outcomes: impl IntoIterator<Item = GatewayOutcome>) {
        let mut inner = self.inner.lock().expect("mock lock");
        inner.scripts.entry(phone.to_string()).or_default().extend(outcomes);
    }

    pub fn calls(&self) -> Vec<MockCall> {
        self.inner.lock().expect("mock lock").calls.clone()
    }

    /// Deliveries per idempotency key.
    pub fn deliveries(&self) -> BTreeMap<String, u32> {
        self.inner.lock().expect("mock lock").delivered.clone()
    }
}

impl SmsGateway for MockGateway {
    fn send(&self, phone: &Phone, text: &str, key: &str) -> GatewayResult {
        let mut inner = self.inner.lock().expect("mock lock");
        let already = inner.delivered.contains_key(key);
        let outcome = if already {
            GatewayOutcome::Accepted
        } else {
            inner
                .scripts
                .get_mut(phone.as_str())
                .and_then(VecDeque::pop_front)
                .unwrap_or(GatewayOutcome::Accepted)
        };
        inner.calls.push(MockCall {
            phone: phone.as_str().to_string(),
            text: text.to_string(),
            key: key.to_string(),
            outcome,
        });
        match outcome {
            GatewayOutcome::Accepted => {
                if !already {
                    inner.delivered.insert(key.to_string(), 1);
                }
                GatewayResult::accepted(format!("mock-{key}"))
            }
            GatewayOutcome::Rejected => GatewayResult::rejected("scripted rejection"),
            GatewayOutcome::TransientError => GatewayResult::transient("scripted transient error"),
        }
    }
}
