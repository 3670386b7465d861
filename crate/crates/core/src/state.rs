//! In-memory state rebuilt from the event log. `State::apply` is the only
//! way state changes, both for live operations and for replay.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::access::UserAccount;
use crate::casework::{AuditNote, BlotterCase, CaseNumber, Casework, Certificate};
use crate::health::{ChildRecord, HealthCase, HealthStore};
use crate::notify::{BroadcastJob, RecipientStatus};
use crate::opendata::Advisory;
use crate::registry::{Phone, Registry, Resident, TransactionEntry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    ResidentRegistered(Resident),
    TransactionAppended(TransactionEntry),
    CaseFiled(BlotterCase),
    CaseStatusChanged {
        case_number: CaseNumber,
        note: AuditNote,
    },
    CertificateRecorded(Certificate),
    ChildRegistered(ChildRecord),
    HealthCaseRecorded(HealthCase),
    JobCreated(BroadcastJob),
    AttemptBegun {
        job_id: String,
        phone: Phone,
    },
    AttemptFinished {
        job_id: String,
        phone: Phone,
        status: RecipientStatus,
        provider_ref: Option<String>,
        error: Option<String>,
        at: DateTime<Utc>,
    },
    AdvisoryPublished(Advisory),
    AccountCreated(UserAccount),
}

#[derive(Debug, Default, Clone)]
pub struct State {
    pub registry: Registry,
    pub casework: Casework,
    pub health: HealthStore,
    pub jobs: BTreeMap<String, BroadcastJob>,
    pub advisories: Vec<Advisory>,
    pub accounts: BTreeMap<String, UserAccount>,
}

impl State {
    pub fn replay<'a>(batches: impl IntoIterator<Item = &'a [Event]>) -> Self {
        let mut s = State::default();
        for batch in batches {
            for e in batch {
                s.apply(e.clone());
            }
        }
        s
    }

    pub fn next_job_id(&self) -> String {
        format!("JOB-{:06}", self.jobs.len() + 1)
    }

    pub fn next_advisory_id(&self) -> String {
        format!("ADV-{:06}", self.advisories.len() + 1)
    }

    pub fn apply(&mut self, event: Event) {
        match event {
            Event::ResidentRegistered(r) => self.registry.insert(r),
            Event::TransactionAppended(t) => self.registry.push_history(t),
            Event::CaseFiled(c) => self.casework.insert_case(c),
            Event::CaseStatusChanged { case_number, note } => self.casework.set_status(&case_number, note),
            Event::CertificateRecorded(c) => self.casework.insert_certificate(c),
            Event::ChildRegistered(c) => self.health.insert_child(c),
            Event::HealthCaseRecorded(c) => self.health.insert_case(c),
            Event::JobCreated(j) => {
                self.jobs.insert(j.job_id.clone(), j);
            }
            Event::AttemptBegun { job_id, phone } => {
                if let Some(r) = self.jobs.get_mut(&job_id).and_then(|j| j.recipient_mut(&phone)) {
                    r.attempts += 1;
                    r.in_flight = true;
                }
            }
            Event::AttemptFinished {
                job_id,
                phone,
                status,
                provider_ref,
                error,
                at: _,
            } => {
                if let Some(r) = self.jobs.get_mut(&job_id).and_then(|j| j.recipient_mut(&phone)) {
                    r.status = status;
                    r.in_flight = false;
                    if provider_ref.is_some() {
                        r.provider_ref = provider_ref;
                    }
                    r.last_error = error;
                }
            }
            Event::AdvisoryPublished(a) => self.advisories.push(a),
            Event::AccountCreated(a) => {
                self.accounts.insert(a.username.clone(), a);
            }
        }
    }
}
