//! The running service core: one state, one durable log, and every
//! operation the HTTP layer and CLI expose.
//!
//! Writes take the state lock exclusively, validate against current state,
//! commit their events to the log and only then apply them, so a reader
//! never sees an unacknowledged change. Reads share the lock.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use chrono::{DateTime, NaiveDate, NaiveTime, Utc};
use parking_lot::{Mutex, RwLock};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::access::{hash_password, require, verify_password, Action, Officer, Role, UserAccount};
use crate::analytics::{
    self, cross_validate, crime_chart, likelihood_report_for, ChartGroupBy, Dataset, EvaluationReport, LearnerKind,
    LikelihoodReport, LikelihoodTask, TrainedModel, DEFAULT_ALPHA,
};
use crate::casework::{
    self, decide_clearance, normalize_label, AuditNote, BlotterCase, CaseNumber, CaseStatus, Certificate,
    CertificateKind, NewCase, OffenderFactorVector, Outcome,
};
use crate::clock::{Clock, SystemClock};
use crate::dates::{ensure_not_future, in_window, DateRange};
use crate::error::{Error, Result};
use crate::geo::{detect_hotspots, GeoPoint, HotspotReport, Marker, MarkerKind, ZoneMap};
use crate::health::{self, validate_child, ChildRecord, CountTable, HealthCase, HealthGroupBy, NewChild, NewHealthCase, Subject};
use crate::notify::{
    self, backoff, idempotency_key, segment_message, AudienceFilter, BroadcastJob, GatewayOutcome, Recipient,
    RecipientStatus, SmsGateway, RETRY_LIMIT,
};
use crate::opendata::{self, Advisory, DatasetDescriptor, DatasetId, PrivacyIndex, Sources, Violation};
use crate::registry::{
    self, validate_profile, NewResident, Page, Phone, Profile, Registration, Resident, ResidentId, TransactionEntry,
    TransactionKind, ZoneId,
};
use crate::state::{Event, State};
use crate::store::{FailPoint, Wal};

pub const DEFAULT_BARANGAY_NAME: &str = "Barangay Poblacion";

pub struct SystemConfig {
    /// `None` keeps everything in memory.
    pub data_dir: Option<PathBuf>,
    pub zones: ZoneMap,
    pub barangay_name: String,
    pub clock: Arc<dyn Clock>,
    pub gateway: Option<Arc<dyn SmsGateway>>,
    /// Fixes the case-number sequence; random when absent.
    pub seed: Option<u64>,
    /// Replays the log without taking the writer lock; writes fail.
    pub read_only: bool,
}

impl SystemConfig {
    pub fn new(zones: ZoneMap) -> Self {
        SystemConfig {
            data_dir: None,
            zones,
            barangay_name: DEFAULT_BARANGAY_NAME.to_string(),
            clock: Arc::new(SystemClock),
            gateway: None,
            seed: None,
            read_only: false,
        }
    }

    pub fn data_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.data_dir = Some(dir.into());
        self
    }

    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn gateway(mut self, gateway: Arc<dyn SmsGateway>) -> Self {
        self.gateway = Some(gateway);
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn read_only(mut self) -> Self {
        self.read_only = true;
        self
    }

    pub fn barangay_name(mut self, name: impl Into<String>) -> Self {
        self.barangay_name = name.into();
        self
    }
}

pub struct System {
    state: RwLock<State>,
    wal: Mutex<Wal<Event>>,
    data_dir: Option<PathBuf>,
    zones: ZoneMap,
    zone_ids: BTreeSet<ZoneId>,
    barangay_name: String,
    clock: Arc<dyn Clock>,
    gateway: RwLock<Option<Arc<dyn SmsGateway>>>,
    rng: Mutex<ChaCha8Rng>,
    job_locks: Mutex<BTreeMap<String, Arc<Mutex<()>>>>,
}

fn not_blank(field: &str, value: &str) -> Result<()> {
    if value.trim().is_empty() {
        return Err(Error::invalid(field, "must not be empty"));
    }
    Ok(())
}

fn dedup<T: Ord + Clone>(items: &[T]) -> Vec<T> {
    let mut seen = BTreeSet::new();
    items.iter().filter(|x| seen.insert((*x).clone())).cloned().collect()
}

fn start_of_day(d: NaiveDate) -> DateTime<Utc> {
    d.and_time(NaiveTime::MIN).and_utc()
}

impl System {
    /// Opens the store (replaying any existing log) or starts empty.
    pub fn open(config: SystemConfig) -> Result<Self> {
        let (wal, batches) = match &config.data_dir {
            Some(dir) if config.read_only => {
                let batches = Wal::read(dir)?;
                (Wal::read_only(batches.len() as u64), batches)
            }
            Some(dir) => Wal::open(dir)?,
            None => (Wal::ephemeral(), Vec::new()),
        };
        let state = State::replay(batches.iter().map(Vec::as_slice));
        tracing::info!(
            commits = wal.committed(),
            residents = state.registry.len(),
            cases = state.casework.case_count(),
            "store opened"
        );
        let rng = match config.seed {
            Some(s) => ChaCha8Rng::seed_from_u64(s),
            None => ChaCha8Rng::from_rng(&mut rand::rng()),
        };
        Ok(System {
            state: RwLock::new(state),
            wal: Mutex::new(wal),
            data_dir: config.data_dir,
            zone_ids: config.zones.ids(),
            zones: config.zones,
            barangay_name: config.barangay_name,
            clock: config.clock,
            gateway: RwLock::new(config.gateway),
            rng: Mutex::new(rng),
            job_locks: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn in_memory(zones: ZoneMap) -> Self {
        Self::open(SystemConfig::new(zones)).expect("in-memory store cannot fail to open")
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.data_dir.as_deref()
    }

    pub fn barangay_name(&self) -> &str {
        &self.barangay_name
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    fn today(&self) -> NaiveDate {
        self.clock.now().date_naive()
    }

    pub fn set_gateway(&self, gateway: Option<Arc<dyn SmsGateway>>) {
        *self.gateway.write() = gateway;
    }

    pub fn has_gateway(&self) -> bool {
        self.gateway.read().is_some()
    }

    /// Arms (or clears) an injected crash in the log.
    pub fn set_failpoint(&self, fp: Option<FailPoint>) {
        self.wal.lock().set_failpoint(fp);
    }

    pub fn commits(&self) -> u64 {
        self.wal.lock().committed()
    }

    /// Runs `f` against a consistent view of the state.
    pub fn read<T>(&self, f: impl FnOnce(&State) -> T) -> T {
        f(&self.state.read())
    }

    /// A copy of the whole state, e.g. for comparison with a replay.
    pub fn snapshot(&self) -> State {
        self.state.read().clone()
    }

    /// Validates with `plan` under the write lock, makes its events durable,
    /// then applies them.
    fn write<T>(&self, plan: impl FnOnce(&State) -> Result<(Vec<Event>, T)>) -> Result<T> {
        let mut st = self.state.write();
        let (events, out) = plan(&st)?;
        if !events.is_empty() {
            self.wal.lock().commit(&events)?;
            for e in events {
                st.apply(e);
            }
        }
        Ok(out)
    }

    fn tx(&self, resident_id: &ResidentId, kind: TransactionKind, reference: &str, at: DateTime<Utc>) -> Event {
        Event::TransactionAppended(TransactionEntry {
            resident_id: resident_id.clone(),
            kind,
            reference_id: reference.to_string(),
            occurred_at: at,
        })
    }

    // ---- registry ----

    pub fn register_resident(&self, officer: &Officer, profile: NewResident) -> Result<Registration> {
        require(officer, Action::RegistryWrite)?;
        let today = self.today();
        let now = self.now();
        validate_profile(&profile, today, &self.zone_ids)?;
        self.write(|st| {
            let id = st.registry.next_id();
            let possible_duplicate = st.registry.has_homonym(&profile);
            let r = Resident::from_profile(id.clone(), profile, now);
            Ok((
                vec![Event::ResidentRegistered(r)],
                Registration {
                    resident_id: id,
                    possible_duplicate,
                },
            ))
        })
    }

    pub fn find_residents(&self, query: &str, page: Page) -> Vec<Resident> {
        self.read(|st| st.registry.find(query, page))
    }

    pub fn resident_count(&self) -> usize {
        self.read(|st| st.registry.len())
    }

    pub fn get_profile(&self, id: &ResidentId) -> Result<Profile> {
        self.read(|st| {
            let resident = st.registry.get(id)?.clone();
            let mut transactions = st.registry.history(id)?.to_vec();
            transactions.sort_by_key(|t| t.occurred_at);
            Ok(Profile { resident, transactions })
        })
    }

    fn check_reference(st: &State, e: &TransactionEntry) -> Result<()> {
        st.registry.get(&e.resident_id)?;
        let dangling = || Error::DanglingReference(e.reference_id.clone());
        let ok = match e.kind {
            TransactionKind::ClearanceIssued | TransactionKind::ClearanceDenied => {
                let want = if e.kind == TransactionKind::ClearanceIssued {
                    Outcome::Issued
                } else {
                    Outcome::Denied
                };
                st.casework
                    .certificate(&e.reference_id)
                    .is_ok_and(|c| c.resident_id == e.resident_id && c.outcome == want)
            }
            TransactionKind::BlotterComplainant | TransactionKind::BlotterRespondent => CaseNumber::parse(&e.reference_id)
                .ok()
                .and_then(|n| st.casework.case(&n).ok())
                .is_some_and(|c| {
                    let ids = if e.kind == TransactionKind::BlotterComplainant {
                        &c.complainant_ids
                    } else {
                        &c.respondent_ids
                    };
                    ids.contains(&e.resident_id)
                }),
            TransactionKind::HealthCase => st
                .health
                .case(&e.reference_id)
                .is_ok_and(|c| c.subject == Subject::Resident(e.resident_id.clone())),
            TransactionKind::SmsSent => st.jobs.get(&e.reference_id).is_some_and(|j| {
                j.recipients
                    .iter()
                    .any(|r| r.resident_id == e.resident_id && r.status == RecipientStatus::Sent)
            }),
        };
        if ok {
            Ok(())
        } else {
            Err(dangling())
        }
    }

    /// Appends a history entry after checking that both the resident and the
    /// referenced record exist.
    pub fn append_transaction(&self, entry: TransactionEntry) -> Result<()> {
        self.write(|st| {
            Self::check_reference(st, &entry)?;
            Ok((vec![Event::TransactionAppended(entry)], ()))
        })
    }

    /// Imports residents atomically. Rows keep their `resident_id` when it
    /// is given; an id that already exists is a conflict.
    pub fn import_residents(&self, officer: &Officer, csv_bytes: &[u8]) -> Result<Vec<ResidentId>> {
        require(officer, Action::RegistryWrite)?;
        let rows = registry::csv::import(csv_bytes)?;
        let today = self.today();
        let now = self.now();
        for r in &rows {
            validate_profile(&r.profile, today, &self.zone_ids)?;
        }
        self.write(|st| {
            let mut taken: BTreeSet<ResidentId> = BTreeSet::new();
            for id in rows.iter().filter_map(|r| r.resident_id.as_ref()) {
                if st.registry.contains(id) || !taken.insert(id.clone()) {
                    return Err(Error::Conflict(format!("resident {id} already exists")));
                }
            }
            let mut seq = st.registry.next_id().seq();
            let mut events = Vec::with_capacity(rows.len());
            let mut ids = Vec::with_capacity(rows.len());
            for r in rows {
                let id = match r.resident_id {
                    Some(id) => id,
                    None => loop {
                        let id = ResidentId::from_seq(seq);
                        seq += 1;
                        if !taken.contains(&id) && !st.registry.contains(&id) {
                            break id;
                        }
                    },
                };
                ids.push(id.clone());
                events.push(Event::ResidentRegistered(Resident::from_profile(
                    id,
                    r.profile,
                    r.registered_at.unwrap_or(now),
                )));
            }
            Ok((events, ids))
        })
    }

    pub fn export_residents(&self) -> Result<Vec<u8>> {
        self.read(|st| registry::csv::export(st.registry.iter()))
    }

    // ---- casework ----

    fn zone_for(&self, point: GeoPoint, given: Option<ZoneId>) -> Result<ZoneId> {
        match given {
            Some(z) if self.zone_ids.contains(&z) => Ok(z),
            Some(z) => Err(Error::ZoneUnknown(z.0)),
            None => self.zones.assign_zone(point),
        }
    }

    pub fn file_blotter(&self, officer: &Officer, case: NewCase) -> Result<BlotterCase> {
        require(officer, Action::BlotterWrite)?;
        let complainants = dedup(&case.complainant_ids);
        let respondents = dedup(&case.respondent_ids);
        if complainants.is_empty() {
            return Err(Error::invalid("complainant_ids", "at least one complainant is required"));
        }
        if respondents.is_empty() {
            return Err(Error::invalid("respondent_ids", "at least one respondent is required"));
        }
        let offense_type = normalize_label(&case.offense_type);
        not_blank("offense_type", &offense_type)?;
        case.location.validate()?;
        ensure_not_future("date_filed", case.date_filed, self.today())?;
        if let Some(extra) = case.factors.keys().find(|k| !respondents.contains(k)) {
            return Err(Error::invalid("factors", format!("{extra} is not a respondent")));
        }
        let zone_id = self.zone_for(case.location, case.zone_id)?;
        let now = self.now();
        self.write(|st| {
            for id in complainants.iter().chain(&respondents) {
                st.registry.get(id)?;
            }
            let mut offender_factors = BTreeMap::new();
            for id in &respondents {
                let answers = case.factors.get(id).copied().unwrap_or_default();
                let v = OffenderFactorVector::for_resident(st.registry.get(id)?, answers, case.date_filed);
                v.validate()?;
                offender_factors.insert(id.clone(), v);
            }
            let taken = st.casework.taken_numbers();
            let number = CaseNumber::draw(&mut *self.rng.lock(), |n| taken.contains(n))?;
            let filed = BlotterCase {
                case_number: number.clone(),
                date_filed: case.date_filed,
                complainant_ids: complainants.clone(),
                respondent_ids: respondents.clone(),
                offense_type,
                narrative: case.narrative.trim().to_string(),
                location: case.location,
                zone_id,
                status: CaseStatus::Open,
                offender_factors,
                audit: Vec::new(),
            };
            let mut events = vec![Event::CaseFiled(filed.clone())];
            for id in &complainants {
                events.push(self.tx(id, TransactionKind::BlotterComplainant, number.as_str(), now));
            }
            for id in &respondents {
                events.push(self.tx(id, TransactionKind::BlotterRespondent, number.as_str(), now));
            }
            Ok((events, filed))
        })
    }

    pub fn update_case_status(&self, officer: &Officer, case_number: &str, to: CaseStatus) -> Result<BlotterCase> {
        require(officer, Action::BlotterWrite)?;
        let number = CaseNumber::parse(case_number).map_err(|_| Error::not_found("case", case_number))?;
        let now = self.now();
        self.write(|st| {
            let case = st.casework.case(&number)?;
            case.status.check_transition(to)?;
            let note = AuditNote {
                at: now,
                officer: officer.username.clone(),
                from: case.status,
                to,
            };
            let mut updated = case.clone();
            updated.status = to;
            updated.audit.push(note.clone());
            Ok((
                vec![Event::CaseStatusChanged {
                    case_number: number.clone(),
                    note,
                }],
                updated,
            ))
        })
    }

    pub fn case(&self, case_number: &str) -> Result<BlotterCase> {
        let number = CaseNumber::parse(case_number).map_err(|_| Error::not_found("case", case_number))?;
        self.read(|st| st.casework.case(&number).cloned())
    }

    pub fn cases(&self) -> Vec<BlotterCase> {
        self.read(|st| st.casework.cases().cloned().collect())
    }

    /// Issues or denies a certificate. The open-case check and the write
    /// happen under one lock, so no status change can slip in between.
    pub fn issue_clearance(
        &self,
        officer: &Officer,
        resident_id: &ResidentId,
        kind: CertificateKind,
        purpose: &str,
        override_check: bool,
    ) -> Result<Certificate> {
        require(officer, Action::ClearanceIssue)?;
        if override_check {
            require(officer, Action::ClearanceOverride).map_err(|_| Error::OverrideForbidden)?;
        }
        not_blank("purpose", purpose)?;
        let now = self.now();
        self.write(|st| {
            st.registry.get(resident_id)?;
            let open = st.casework.open_cases_against(resident_id);
            let decision = decide_clearance(&open, officer, override_check)?;
            let cert = Certificate {
                certificate_id: st.casework.next_certificate_id(),
                resident_id: resident_id.clone(),
                kind,
                purpose: purpose.trim().to_string(),
                issued_at: now,
                outcome: decision.outcome,
                denial_reason: decision.denial_reason,
                override_by: decision.override_by,
                open_cases: open,
            };
            let tx_kind = match cert.outcome {
                Outcome::Issued => TransactionKind::ClearanceIssued,
                Outcome::Denied => TransactionKind::ClearanceDenied,
            };
            let events = vec![
                Event::CertificateRecorded(cert.clone()),
                self.tx(resident_id, tx_kind, &cert.certificate_id, now),
            ];
            Ok((events, cert))
        })
    }

    pub fn clearance_history(&self, resident_id: &ResidentId) -> Result<Vec<Certificate>> {
        self.read(|st| {
            st.registry.get(resident_id)?;
            Ok(st.casework.history(resident_id))
        })
    }

    pub fn certificate(&self, certificate_id: &str) -> Result<Certificate> {
        self.read(|st| st.casework.certificate(certificate_id).cloned())
    }

    pub fn render_certificate(&self, certificate_id: &str) -> Result<String> {
        self.read(|st| {
            let cert = st.casework.certificate(certificate_id)?;
            let resident = st.registry.get(&cert.resident_id)?;
            casework::render_certificate(cert, resident, &self.barangay_name)
        })
    }

    /// Imports blotter rows atomically; factor answers are unknown for
    /// imported respondents.
    pub fn import_blotter(&self, officer: &Officer, csv_bytes: &[u8]) -> Result<Vec<CaseNumber>> {
        require(officer, Action::BlotterWrite)?;
        let rows = casework::csv::import(csv_bytes)?;
        let today = self.today();
        for r in &rows {
            if !self.zone_ids.contains(&r.zone_id) {
                return Err(Error::ZoneUnknown(r.zone_id.0));
            }
            ensure_not_future("date_filed", r.date_filed, today)?;
        }
        let now = self.now();
        self.write(|st| {
            let mut seen = BTreeSet::new();
            let mut events = Vec::new();
            let mut numbers = Vec::new();
            for r in rows {
                if st.casework.contains_case(r.case_number.as_str()) || !seen.insert(r.case_number.clone()) {
                    return Err(Error::Conflict(format!("case {} already exists", r.case_number)));
                }
                let complainants = dedup(&r.complainant_ids);
                let respondents = dedup(&r.respondent_ids);
                let mut offender_factors = BTreeMap::new();
                for id in complainants.iter().chain(&respondents) {
                    st.registry.get(id)?;
                }
                for id in &respondents {
                    let v = OffenderFactorVector::for_resident(st.registry.get(id)?, Default::default(), r.date_filed);
                    offender_factors.insert(id.clone(), v);
                }
                let n = r.case_number.clone();
                events.push(Event::CaseFiled(BlotterCase {
                    case_number: r.case_number,
                    date_filed: r.date_filed,
                    complainant_ids: complainants.clone(),
                    respondent_ids: respondents.clone(),
                    offense_type: r.offense_type,
                    narrative: String::new(),
                    location: r.location,
                    zone_id: r.zone_id,
                    status: r.status,
                    offender_factors,
                    audit: Vec::new(),
                }));
                for id in &complainants {
                    events.push(self.tx(id, TransactionKind::BlotterComplainant, n.as_str(), now));
                }
                for id in &respondents {
                    events.push(self.tx(id, TransactionKind::BlotterRespondent, n.as_str(), now));
                }
                numbers.push(n);
            }
            Ok((events, numbers))
        })
    }

    pub fn export_blotter(&self) -> Result<Vec<u8>> {
        self.read(|st| casework::csv::export(st.casework.cases()))
    }

    // ---- health ----

    pub fn register_child(&self, officer: &Officer, child: NewChild) -> Result<ChildRecord> {
        require(officer, Action::HealthWrite)?;
        validate_child(&child, self.today())?;
        self.write(|st| {
            if let Some(g) = &child.guardian_resident_id {
                st.registry.get(g)?;
            }
            let rec = ChildRecord::from_new(st.health.next_child_id(), child);
            Ok((vec![Event::ChildRegistered(rec.clone())], rec))
        })
    }

    pub fn record_health_case(&self, officer: &Officer, case: NewHealthCase) -> Result<HealthCase> {
        require(officer, Action::HealthWrite)?;
        let condition = normalize_label(&case.condition);
        not_blank("condition", &condition)?;
        case.location.validate()?;
        let zone_id = self.zone_for(case.location, case.zone_id)?;
        let now = self.now();
        self.write(|st| {
            match &case.subject {
                Subject::Resident(id) => {
                    st.registry.get(id)?;
                }
                Subject::Child(id) => {
                    st.health.child(id)?;
                }
            }
            let rec = HealthCase {
                health_case_id: st.health.next_case_id(),
                subject: case.subject.clone(),
                condition,
                notes: case.notes.trim().to_string(),
                location: case.location,
                zone_id,
                recorded_at: now,
                recorded_by: officer.username.clone(),
            };
            let mut events = vec![Event::HealthCaseRecorded(rec.clone())];
            if let Subject::Resident(id) = &rec.subject {
                events.push(self.tx(id, TransactionKind::HealthCase, &rec.health_case_id, now));
            }
            Ok((events, rec))
        })
    }

    pub fn children(&self) -> Vec<ChildRecord> {
        self.read(|st| st.health.children().cloned().collect())
    }

    pub fn health_summary(&self, window: Option<&DateRange>, group_by: HealthGroupBy) -> CountTable {
        self.read(|st| st.health.summary(window, group_by))
    }

    pub fn export_health(&self, window: Option<&DateRange>) -> Result<Vec<u8>> {
        self.read(|st| health::export_csv(&st.health, &st.registry, window))
    }

    // ---- geo ----

    pub fn zones(&self) -> &ZoneMap {
        &self.zones
    }

    pub fn zone_ids(&self) -> &BTreeSet<ZoneId> {
        &self.zone_ids
    }

    pub fn assign_zone(&self, point: GeoPoint) -> Result<ZoneId> {
        point.validate()?;
        self.zones.assign_zone(point)
    }

    /// One marker per blotter case or health case dated inside `window`.
    pub fn build_markers(&self, kind: MarkerKind, window: Option<&DateRange>) -> Vec<Marker> {
        self.read(|st| {
            let mut out: Vec<Marker> = match kind {
                MarkerKind::Crime => st
                    .casework
                    .cases()
                    .filter(|c| in_window(window, c.date_filed))
                    .map(|c| Marker {
                        kind,
                        point: c.location,
                        occurred_at: start_of_day(c.date_filed),
                        label: c.offense_type.clone(),
                        source_id: c.case_number.to_string(),
                    })
                    .collect(),
                MarkerKind::Health => st
                    .health
                    .cases()
                    .filter(|c| in_window(window, c.recorded_at.date_naive()))
                    .map(|c| Marker {
                        kind,
                        point: c.location,
                        occurred_at: c.recorded_at,
                        label: c.condition.clone(),
                        source_id: c.health_case_id.clone(),
                    })
                    .collect(),
            };
            out.sort_by(|a, b| (a.occurred_at, &a.source_id).cmp(&(b.occurred_at, &b.source_id)));
            out
        })
    }

    /// Hotspot grid over the bounding box of all zones.
    pub fn hotspots(
        &self,
        kind: MarkerKind,
        window: Option<&DateRange>,
        cell_size_m: f64,
        top_k: usize,
    ) -> Result<HotspotReport> {
        let markers = self.build_markers(kind, window);
        let (sw, ne) = self.zones.bounds();
        detect_hotspots(sw, ne, &markers, cell_size_m, top_k)
    }

    // ---- analytics ----

    pub fn crime_chart(&self, window: Option<&DateRange>, group_by: ChartGroupBy) -> CountTable {
        self.read(|st| crime_chart(st.casework.cases(), &st.registry, window, group_by))
    }

    /// Blotter-derived training records for `task`.
    pub fn training_dataset(&self, task: LikelihoodTask) -> Result<Dataset> {
        let today = self.today();
        self.read(|st| match task {
            LikelihoodTask::Reoffend => analytics::reoffend_dataset(st.casework.cases(), &st.registry),
            LikelihoodTask::OffendByResidency => {
                analytics::offend_by_residency_dataset(st.casework.cases(), &st.registry, today)
            }
        })
    }

    pub fn likelihood_report(&self, task: LikelihoodTask) -> Result<LikelihoodReport> {
        let data = self.training_dataset(task)?;
        let groups: Vec<usize> = match task {
            LikelihoodTask::Reoffend => (0..data.schema.len()).collect(),
            LikelihoodTask::OffendByResidency => vec![0],
        };
        likelihood_report_for(task, &data, &groups, DEFAULT_ALPHA)
    }

    pub fn train(&self, task: LikelihoodTask, learner: LearnerKind) -> Result<TrainedModel> {
        TrainedModel::train(learner, &self.training_dataset(task)?)
    }

    pub fn evaluate(&self, task: LikelihoodTask, learner: LearnerKind, k: usize, seed: u64) -> Result<EvaluationReport> {
        cross_validate(&self.training_dataset(task)?, learner, k, seed)
    }

    // ---- notify ----

    pub fn resolve_audience(&self, filter: &AudienceFilter) -> Vec<(ResidentId, Phone)> {
        self.read(|st| notify::resolve_audience(&st.registry, filter))
    }

    fn plan_job(&self, st: &State, officer: &Officer, message: &str, filter: AudienceFilter) -> Result<BroadcastJob> {
        let segments = segment_message(message)?.len();
        match &filter {
            AudienceFilter::All => {}
            AudienceFilter::Zone { zone_id } if !self.zone_ids.contains(zone_id) => {
                return Err(Error::ZoneUnknown(zone_id.0));
            }
            AudienceFilter::Zone { .. } => {}
            AudienceFilter::Residents { resident_ids } => {
                for id in resident_ids {
                    st.registry.get(id)?;
                }
            }
        }
        let job_id = st.next_job_id();
        let recipients = notify::resolve_audience(&st.registry, &filter)
            .into_iter()
            .map(|(resident_id, phone)| Recipient {
                idempotency_key: idempotency_key(&job_id, &phone),
                resident_id,
                phone,
                status: RecipientStatus::Pending,
                attempts: 0,
                in_flight: false,
                provider_ref: None,
                last_error: None,
            })
            .collect();
        Ok(BroadcastJob {
            job_id,
            message: message.to_string(),
            audience_filter: filter,
            created_by: officer.username.clone(),
            created_at: self.now(),
            segments,
            recipients,
        })
    }

    pub fn create_broadcast(&self, officer: &Officer, message: &str, filter: AudienceFilter) -> Result<BroadcastJob> {
        require(officer, Action::SmsBroadcast)?;
        self.write(|st| {
            let job = self.plan_job(st, officer, message, filter)?;
            Ok((vec![Event::JobCreated(job.clone())], job))
        })
    }

    pub fn broadcast(&self, job_id: &str) -> Result<BroadcastJob> {
        self.read(|st| st.jobs.get(job_id).cloned().ok_or_else(|| Error::not_found("broadcast", job_id)))
    }

    pub fn broadcasts(&self) -> Vec<BroadcastJob> {
        self.read(|st| st.jobs.values().cloned().collect())
    }

    fn job_lock(&self, job_id: &str) -> Arc<Mutex<()>> {
        self.job_locks.lock().entry(job_id.to_string()).or_default().clone()
    }

    /// Sends to every pending recipient, committing each attempt before the
    /// gateway call and each result after it. Safe to re-run after a crash:
    /// an attempt whose result was never recorded is re-sent under the same
    /// idempotency key instead of counting as a new attempt.
    pub fn dispatch(&self, job_id: &str) -> Result<BroadcastJob> {
        self.broadcast(job_id)?;
        let gateway = self.gateway.read().clone().ok_or(Error::GatewayUnconfigured)?;
        let lock = self.job_lock(job_id);
        let _guard = lock.lock();
        let job = self.broadcast(job_id)?;
        for phone in job.recipients.iter().map(|r| r.phone.clone()) {
            self.dispatch_one(gateway.as_ref(), &job, &phone)?;
        }
        self.broadcast(job_id)
    }

    fn dispatch_one(&self, gateway: &dyn SmsGateway, job: &BroadcastJob, phone: &Phone) -> Result<()> {
        loop {
            let r = self
                .broadcast(&job.job_id)?
                .recipient(phone)
                .cloned()
                .ok_or_else(|| Error::not_found("recipient", phone))?;
            if r.status != RecipientStatus::Pending {
                return Ok(());
            }
            if !r.in_flight {
                if r.attempts >= RETRY_LIMIT {
                    return self.finish_attempt(job, &r, RecipientStatus::Failed, None, Some("retry limit reached".into()));
                }
                if r.attempts > 0 {
                    self.clock.sleep(backoff(r.attempts));
                }
                self.write(|_| {
                    Ok((
                        vec![Event::AttemptBegun {
                            job_id: job.job_id.clone(),
                            phone: phone.clone(),
                        }],
                        (),
                    ))
                })?;
            }
            let attempts = if r.in_flight { r.attempts } else { r.attempts + 1 };
            let res = gateway.send(phone, &job.message, &r.idempotency_key);
            tracing::debug!(job = %job.job_id, %phone, attempt = attempts, outcome = ?res.outcome, "gateway result");
            let status = match res.outcome {
                GatewayOutcome::Accepted => RecipientStatus::Sent,
                GatewayOutcome::Rejected => RecipientStatus::Failed,
                GatewayOutcome::TransientError if attempts >= RETRY_LIMIT => RecipientStatus::Failed,
                GatewayOutcome::TransientError => RecipientStatus::Pending,
            };
            self.finish_attempt(job, &r, status, res.provider_ref, res.reason)?;
        }
    }

    fn finish_attempt(
        &self,
        job: &BroadcastJob,
        r: &Recipient,
        status: RecipientStatus,
        provider_ref: Option<String>,
        error: Option<String>,
    ) -> Result<()> {
        let now = self.now();
        self.write(|_| {
            let mut events = vec![Event::AttemptFinished {
                job_id: job.job_id.clone(),
                phone: r.phone.clone(),
                status,
                provider_ref,
                error,
                at: now,
            }];
            if status == RecipientStatus::Sent {
                events.push(self.tx(&r.resident_id, TransactionKind::SmsSent, &job.job_id, now));
            }
            Ok((events, ()))
        })
    }

    /// Jobs that still have pending recipients, e.g. after a restart.
    pub fn unfinished_jobs(&self) -> Vec<String> {
        self.read(|st| {
            st.jobs
                .values()
                .filter(|j| !j.is_settled())
                .map(|j| j.job_id.clone())
                .collect()
        })
    }

    // ---- open data ----

    pub fn list_datasets(&self) -> Vec<DatasetDescriptor> {
        opendata::catalog()
    }

    pub fn export_dataset(&self, dataset: DatasetId, window: Option<&DateRange>) -> Result<Vec<u8>> {
        self.read(|st| {
            let src = Sources {
                registry: &st.registry,
                casework: &st.casework,
                health: &st.health,
                advisories: &st.advisories,
                zones: &self.zone_ids,
            };
            opendata::export_csv(dataset, &src, window)
        })
    }

    pub fn privacy_index(&self) -> PrivacyIndex {
        self.read(|st| PrivacyIndex::build(&st.registry, &st.casework))
    }

    pub fn privacy_scan(&self, csv_bytes: &[u8]) -> Result<Vec<Violation>> {
        opendata::privacy_scan(csv_bytes, &self.privacy_index())
    }

    /// Publishes an advisory, optionally broadcasting "title: body" by SMS
    /// in the same commit.
    pub fn publish_advisory(
        &self,
        officer: &Officer,
        title: &str,
        body: &str,
        broadcast_to: Option<AudienceFilter>,
    ) -> Result<(Advisory, Option<BroadcastJob>)> {
        require(officer, Action::AdvisoryPublish)?;
        if broadcast_to.is_some() {
            require(officer, Action::SmsBroadcast)?;
        }
        if body.trim().is_empty() {
            return Err(Error::EmptyBody);
        }
        not_blank("title", title)?;
        let now = self.now();
        self.write(|st| {
            let advisory = Advisory {
                advisory_id: st.next_advisory_id(),
                title: title.trim().to_string(),
                body: body.to_string(),
                published_at: now,
                published_by: officer.username.clone(),
            };
            let mut events = vec![Event::AdvisoryPublished(advisory.clone())];
            let job = match broadcast_to {
                Some(filter) => {
                    let text = format!("{}: {}", advisory.title, advisory.body.trim());
                    let job = self.plan_job(st, officer, &text, filter)?;
                    events.push(Event::JobCreated(job.clone()));
                    Some(job)
                }
                None => None,
            };
            Ok((events, (advisory, job)))
        })
    }

    /// Newest first.
    pub fn advisories(&self) -> Vec<Advisory> {
        self.read(|st| {
            let mut v = st.advisories.clone();
            v.sort_by(|a, b| (b.published_at, &b.advisory_id).cmp(&(a.published_at, &a.advisory_id)));
            v
        })
    }

    // ---- accounts ----

    pub fn has_accounts(&self) -> bool {
        self.read(|st| !st.accounts.is_empty())
    }

    pub fn create_account(
        &self,
        username: &str,
        password: &str,
        role: Role,
        linked_resident_id: Option<ResidentId>,
    ) -> Result<UserAccount> {
        let username = username.trim();
        not_blank("username", username)?;
        if password.chars().count() < 8 {
            return Err(Error::invalid("password", "must be at least 8 characters"));
        }
        // Hash outside the lock; it is deliberately slow.
        let password_hash = hash_password(password)?;
        self.write(|st| {
            if st.accounts.contains_key(username) {
                return Err(Error::Conflict(format!("user {username} already exists")));
            }
            if let Some(id) = &linked_resident_id {
                st.registry.get(id)?;
            }
            let acct = UserAccount {
                username: username.to_string(),
                password_hash,
                role,
                linked_resident_id,
            };
            Ok((vec![Event::AccountCreated(acct.clone())], acct))
        })
    }

    /// Checks credentials. Unknown users and wrong passwords fail alike, and
    /// take comparable time.
    pub fn authenticate(&self, username: &str, password: &str) -> Result<Officer> {
        static DUMMY: OnceLock<String> = OnceLock::new();
        let account = self.read(|st| st.accounts.get(username.trim()).cloned());
        match account {
            Some(a) if verify_password(password, &a.password_hash) => Ok(Officer::new(a.username, a.role)),
            Some(_) => Err(Error::BadCredentials),
            None => {
                let dummy = DUMMY.get_or_init(|| hash_password("not-a-real-password").unwrap_or_default());
                let _ = verify_password(password, dummy);
                Err(Error::BadCredentials)
            }
        }
    }

    /// Replays the durable log from disk; `None` for in-memory systems.
    pub fn replay_log(&self) -> Result<Option<State>> {
        match &self.data_dir {
            Some(dir) => {
                let batches = Wal::<Event>::read(dir)?;
                Ok(Some(State::replay(batches.iter().map(Vec::as_slice))))
            }
            None => Ok(None),
        }
    }

    /// Every committed event, in order; empty for in-memory systems.
    pub fn event_log(&self) -> Result<Vec<Vec<Event>>> {
        match &self.data_dir {
            Some(dir) => Wal::<Event>::read(dir),
            None => Ok(Vec::new()),
        }
    }
}
