//! Append-only measurement repository.
//!
//! Every change is an [`Event`] appended to `events.log`, one JSON object
//! per line with the fields `seq`, `ts`, `kind` and `payload`. The
//! in-memory [`State`] is a pure fold over the log: replaying the same log
//! always yields bit-identical scores and histories.
//!
//! Scores are recalculated synchronously inside [`Store::ingest`], so a
//! caller always reads its own writes.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, SubsecRound, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::{check_criterion4, diff_snapshots, AuditReport, Finding, Severity, Snapshot};
use crate::metrics::score_study;
use crate::model::{
    validate_study, Catalog, Implementation, Measurement, MeasurementKind, Metric, ParseEnumError,
    Platform, PolicyKind, PortabilityScore, ProblemKey, ProblemSpec, StudyDefinition,
};

pub const EVENTS_FILE: &str = "events.log";

/// Score changes smaller than this do not produce a history entry.
pub const HISTORY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Payload {
    AddPlatform(Platform),
    AddImplementation(Implementation),
    AddProblem(ProblemSpec),
    AddMeasurement(Measurement),
    DefineStudy(StudyDefinition),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::AddPlatform(_) => "add_platform",
            Payload::AddImplementation(_) => "add_implementation",
            Payload::AddProblem(_) => "add_problem",
            Payload::AddMeasurement(_) => "add_measurement",
            Payload::DefineStudy(_) => "define_study",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub ts: DateTime<Utc>,
    #[serde(flatten)]
    pub payload: Payload,
}

impl Event {
    pub fn to_line(&self) -> String {
        // Fixed field order: seq, ts, kind, payload.
        let body = serde_json::to_value(&self.payload).expect("payload serializes");
        format!(
            "{{\"seq\":{},\"ts\":{},\"kind\":{},\"payload\":{}}}",
            self.seq,
            serde_json::to_string(&self.ts.to_rfc3339_opts(SecondsFormat::Micros, true))
                .expect("string serializes"),
            serde_json::to_string(self.payload.kind()).expect("string serializes"),
            serde_json::to_string(&body["payload"]).expect("payload serializes"),
        )
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("duplicate: {0}")]
    Duplicate(String),
    #[error("import requires an empty store")]
    NotEmpty,
    #[error("malformed snapshot at byte offset {offset}: {message}")]
    Malformed { offset: usize, message: String },
    #[error("corrupt event log: record seq {seq} ({message})")]
    Corrupt { seq: u64, message: String },
    #[error("sequence range {from}..{to} is outside 0..{current}")]
    SeqOutOfRange { from: u64, to: u64, current: u64 },
    #[error(transparent)]
    Parse(#[from] ParseEnumError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Log timestamps carry microseconds.
fn now() -> DateTime<Utc> {
    Utc::now().trunc_subsecs(6)
}

fn invalid(msg: impl Into<String>) -> StoreError {
    StoreError::Validation(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub seq: u64,
    pub score: PortabilityScore,
}

/// Score trajectory of one implementation within one study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreHistory {
    pub study: String,
    pub implementation: String,
    pub entries: Vec<HistoryEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyState {
    pub definition: StudyDefinition,
    pub scores: Vec<PortabilityScore>,
    /// Set while the study cannot be scored (for example a fixed reference
    /// whose measurement has not arrived yet).
    pub error: Option<String>,
}

/// Everything derived from the log up to `seq`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct State {
    pub seq: u64,
    pub catalog: Catalog,
    pub measurements: Vec<Measurement>,
    pub studies: BTreeMap<String, StudyState>,
    pub histories: BTreeMap<(String, String), Vec<HistoryEntry>>,
}

/// Outcome of one recalculation pass.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Recalculation {
    pub studies: Vec<String>,
    pub updated: Vec<PortabilityScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestOutcome {
    pub seq: u64,
    pub recalculated: Vec<String>,
    pub updated: Vec<PortabilityScore>,
}

impl State {
    pub fn is_empty(&self) -> bool {
        self.seq == 0
    }

    pub fn measurements_for(&self, key: &ProblemKey) -> Vec<Measurement> {
        self.measurements.iter().filter(|m| &m.problem_key() == key).cloned().collect()
    }

    fn study_kind(&self, key: &ProblemKey) -> Option<MeasurementKind> {
        self.measurements.iter().find(|m| &m.problem_key() == key).map(|m| m.kind)
    }

    /// Checks `payload` against the current state without changing it.
    pub fn validate(&self, payload: &Payload) -> Result<(), StoreError> {
        match payload {
            Payload::AddPlatform(p) => {
                p.validate().map_err(invalid)?;
                if self.catalog.platform(&p.id).is_some() {
                    return Err(StoreError::Duplicate(format!("platform {}", p.id)));
                }
            }
            Payload::AddImplementation(i) => {
                if i.id.trim().is_empty() || i.app.trim().is_empty() {
                    return Err(invalid("implementation id and app must be non-empty"));
                }
                if self.catalog.implementation(&i.app, &i.id).is_some() {
                    return Err(StoreError::Duplicate(format!("implementation {}/{}", i.app, i.id)));
                }
            }
            Payload::AddProblem(p) => {
                if p.app.trim().is_empty() || p.problem.trim().is_empty() {
                    return Err(invalid("app and problem must be non-empty"));
                }
                if self.catalog.problem(&p.key()).is_some() {
                    return Err(StoreError::Duplicate(format!("problem {}", p.key())));
                }
            }
            Payload::AddMeasurement(m) => self.validate_measurement(m)?,
            Payload::DefineStudy(s) => {
                if self.catalog.problem(&s.problem_key()).is_none() {
                    return Err(invalid(format!("unknown problem {}", s.problem_key())));
                }
                let violations = validate_study(s, &self.catalog, &self.measurements);
                if !violations.is_empty() {
                    let text: Vec<String> = violations.iter().map(ToString::to_string).collect();
                    return Err(invalid(text.join("; ")));
                }
                if self.studies.contains_key(&s.key()) {
                    return Err(StoreError::Duplicate(format!("study {}", s.key())));
                }
            }
        }
        Ok(())
    }

    fn validate_measurement(&self, m: &Measurement) -> Result<(), StoreError> {
        m.validate_value().map_err(invalid)?;
        let key = m.problem_key();
        if self.catalog.problem(&key).is_none() {
            return Err(invalid(format!("unknown problem {key}")));
        }
        if self.catalog.platform(&m.platform).is_none() {
            return Err(invalid(format!("unknown platform {}", m.platform)));
        }
        if self.catalog.implementation(&m.app, &m.implementation).is_none() {
            return Err(invalid(format!("unknown implementation {}/{}", m.app, m.implementation)));
        }
        if let Some(kind) = self.study_kind(&key) {
            if kind != m.kind {
                return Err(invalid(format!("{key} holds {kind} measurements, not {}", m.kind)));
            }
        }
        for s in self.studies.values().filter(|s| s.definition.problem_key() == key) {
            let policy = s.definition.policy.kind();
            if policy.is_architectural() && m.kind != MeasurementKind::ThroughputGflops {
                return Err(invalid(format!("study {} ({policy}) needs throughput_gflops", s.definition.key())));
            }
        }
        if self.measurements.iter().any(|x| x.is_duplicate_of(m)) {
            return Err(StoreError::Duplicate(format!(
                "{} on {} = {}",
                m.implementation, m.platform, m.value
            )));
        }
        Ok(())
    }

    /// Folds a validated event into the state and recalculates what it
    /// affects.
    fn apply(&mut self, event: &Event) -> Recalculation {
        self.seq = event.seq;
        match &event.payload {
            Payload::AddPlatform(p) => {
                self.catalog.add_platform(p.clone());
                Recalculation::default()
            }
            Payload::AddImplementation(i) => {
                self.catalog.add_implementation(i.clone());
                let keys: Vec<ProblemKey> = self
                    .studies
                    .values()
                    .map(|s| s.definition.problem_key())
                    .filter(|k| k.app == i.app)
                    .collect();
                let mut out = Recalculation::default();
                for k in dedup(keys) {
                    let r = self.recalculate(&k);
                    out.studies.extend(r.studies);
                    out.updated.extend(r.updated);
                }
                out
            }
            Payload::AddProblem(p) => {
                self.catalog.add_problem(p.clone());
                Recalculation::default()
            }
            Payload::AddMeasurement(m) => {
                self.measurements.push(m.clone());
                self.recalculate(&m.problem_key())
            }
            Payload::DefineStudy(s) => {
                self.studies.insert(
                    s.key(),
                    StudyState { definition: s.clone(), scores: Vec::new(), error: None },
                );
                self.recalculate_study(&s.key())
            }
        }
    }

    /// Recomputes every study of `(app, problem)` from scratch.
    pub fn recalculate(&mut self, key: &ProblemKey) -> Recalculation {
        let ids: Vec<String> = self
            .studies
            .iter()
            .filter(|(_, s)| &s.definition.problem_key() == key)
            .map(|(id, _)| id.clone())
            .collect();
        let mut out = Recalculation::default();
        for id in ids {
            let r = self.recalculate_study(&id);
            out.studies.extend(r.studies);
            out.updated.extend(r.updated);
        }
        out
    }

    fn recalculate_study(&mut self, id: &str) -> Recalculation {
        let Some(study) = self.studies.get(id).map(|s| s.definition.clone()) else {
            return Recalculation::default();
        };
        let ms = self.measurements_for(&study.problem_key());
        let mut out = Recalculation { studies: vec![id.to_owned()], updated: Vec::new() };
        match score_study(&study, &self.catalog, &ms, &ms) {
            Ok(scores) => {
                for score in &scores {
                    let entries = self
                        .histories
                        .entry((id.to_owned(), score.implementation.clone()))
                        .or_default();
                    let moved = entries
                        .last()
                        .map_or(true, |last| (last.score.value - score.value).abs() > HISTORY_TOLERANCE);
                    if moved {
                        entries.push(HistoryEntry { seq: self.seq, score: score.clone() });
                        out.updated.push(score.clone());
                    }
                }
                let st = self.studies.get_mut(id).expect("study exists");
                st.scores = scores;
                st.error = None;
            }
            Err(e) => {
                let st = self.studies.get_mut(id).expect("study exists");
                st.scores.clear();
                st.error = Some(e.to_string());
            }
        }
        out
    }

    pub fn query_scores(
        &self,
        key: &ProblemKey,
        policy: Option<PolicyKind>,
        metric: Option<Metric>,
    ) -> Vec<PortabilityScore> {
        self.studies
            .values()
            .filter(|s| &s.definition.problem_key() == key)
            .filter(|s| policy.map_or(true, |p| s.definition.policy.kind() == p))
            .filter(|s| metric.map_or(true, |m| s.definition.metric == m))
            .flat_map(|s| s.scores.iter().cloned())
            .collect()
    }

    pub fn history(&self, key: &ProblemKey, implementation: &str) -> Vec<ScoreHistory> {
        self.studies
            .iter()
            .filter(|(_, s)| &s.definition.problem_key() == key)
            .filter_map(|(id, _)| {
                let entries = self.histories.get(&(id.clone(), implementation.to_owned()))?;
                Some(ScoreHistory {
                    study: id.clone(),
                    implementation: implementation.to_owned(),
                    entries: entries.clone(),
                })
            })
            .collect()
    }
}

fn dedup(keys: Vec<ProblemKey>) -> Vec<ProblemKey> {
    let mut out: Vec<ProblemKey> = Vec::new();
    for k in keys {
        if !out.contains(&k) {
            out.push(k);
        }
    }
    out
}

/// Criterion-4 audit of one study between two repository states.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyAudit {
    pub study: String,
    pub policy: PolicyKind,
    pub metric: Metric,
    pub report: AuditReport,
}

/// The repository: an event log plus the state folded from it.
#[derive(Debug, Default)]
pub struct Store {
    dir: Option<PathBuf>,
    log: Option<File>,
    events: Vec<Event>,
    state: State,
}

impl Store {
    /// A store that keeps its log only in memory.
    pub fn in_memory() -> Self {
        Store::default()
    }

    /// Opens (or creates) a store directory and replays its event log.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let path = dir.join(EVENTS_FILE);
        let mut store = Store::in_memory();
        if path.exists() {
            let text = fs::read_to_string(&path)?;
            for (line_no, line) in text.lines().enumerate() {
                let expected = store.state.seq + 1;
                if line.trim().is_empty() {
                    continue;
                }
                let event: Event = serde_json::from_str(line).map_err(|e| StoreError::Corrupt {
                    seq: expected,
                    message: format!("line {}: {e}", line_no + 1),
                })?;
                store.replay(event).map_err(|e| StoreError::Corrupt {
                    seq: expected,
                    message: e.to_string(),
                })?;
            }
        }
        store.log = Some(OpenOptions::new().create(true).append(true).open(&path)?);
        store.dir = Some(dir);
        Ok(store)
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn seq(&self) -> u64 {
        self.state.seq
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Validates, durably appends and applies one event.
    pub fn ingest(&mut self, payload: Payload) -> Result<IngestOutcome, StoreError> {
        self.state.validate(&payload)?;
        let event = Event { seq: self.state.seq + 1, ts: now(), payload };
        self.persist(std::slice::from_ref(&event))?;
        Ok(self.commit(event))
    }

    /// All-or-nothing ingest: every payload is validated against the state
    /// the previous ones would produce before anything is written.
    pub fn ingest_batch(&mut self, payloads: Vec<Payload>) -> Result<Vec<IngestOutcome>, (usize, StoreError)> {
        let mut scratch = self.state.clone();
        let ts = now();
        let mut events = Vec::with_capacity(payloads.len());
        for (i, payload) in payloads.into_iter().enumerate() {
            scratch.validate(&payload).map_err(|e| (i, e))?;
            let event = Event { seq: scratch.seq + 1, ts, payload };
            scratch.apply_without_scoring(&event);
            events.push(event);
        }
        self.persist(&events).map_err(|e| (0, e))?;
        Ok(events.into_iter().map(|e| self.commit(e)).collect())
    }

    fn commit(&mut self, event: Event) -> IngestOutcome {
        let r = self.state.apply(&event);
        let seq = event.seq;
        self.events.push(event);
        IngestOutcome { seq, recalculated: r.studies, updated: r.updated }
    }

    fn persist(&mut self, events: &[Event]) -> Result<(), StoreError> {
        if let Some(log) = self.log.as_mut() {
            let mut buf = String::new();
            for e in events {
                buf.push_str(&e.to_line());
                buf.push('\n');
            }
            log.write_all(buf.as_bytes())?;
            log.sync_data()?;
        }
        Ok(())
    }

    fn replay(&mut self, event: Event) -> Result<(), StoreError> {
        let expected = self.state.seq + 1;
        if event.seq != expected {
            return Err(invalid(format!("expected seq {expected}, found {}", event.seq)));
        }
        self.state.validate(&event.payload)?;
        self.commit(event);
        Ok(())
    }

    pub fn recalculate(&mut self, key: &ProblemKey) -> Vec<PortabilityScore> {
        self.state.recalculate(key).updated
    }

    pub fn query_scores(
        &self,
        key: &ProblemKey,
        policy: Option<PolicyKind>,
        metric: Option<Metric>,
    ) -> Vec<PortabilityScore> {
        self.state.query_scores(key, policy, metric)
    }

    /// Same as [`Store::query_scores`] with filters given as strings.
    pub fn query_scores_str(
        &self,
        key: &ProblemKey,
        policy: Option<&str>,
        metric: Option<&str>,
    ) -> Result<Vec<PortabilityScore>, StoreError> {
        let policy = policy.map(str::parse::<PolicyKind>).transpose()?;
        let metric = metric.map(str::parse::<Metric>).transpose()?;
        Ok(self.query_scores(key, policy, metric))
    }

    pub fn history(&self, key: &ProblemKey, implementation: &str) -> Vec<ScoreHistory> {
        self.state.history(key, implementation)
    }

    /// The full event log in its on-disk form.
    pub fn export_snapshot(&self) -> String {
        self.events.iter().map(|e| e.to_line() + "\n").collect()
    }

    /// Replays an exported log into this (empty) store.
    pub fn import_snapshot(&mut self, data: &str) -> Result<usize, StoreError> {
        if !self.state.is_empty() {
            return Err(StoreError::NotEmpty);
        }
        let mut events = Vec::new();
        let mut offset = 0;
        for line in data.split_inclusive('\n') {
            let body = line.trim_end_matches(['\n', '\r']);
            if !body.trim().is_empty() {
                let event: Event = serde_json::from_str(body)
                    .map_err(|e| StoreError::Malformed { offset, message: e.to_string() })?;
                events.push((offset, event));
            }
            offset += line.len();
        }
        let mut scratch = Store::in_memory();
        for (offset, event) in &events {
            scratch
                .replay(event.clone())
                .map_err(|e| StoreError::Malformed { offset: *offset, message: e.to_string() })?;
        }
        let events: Vec<Event> = events.into_iter().map(|(_, e)| e).collect();
        self.persist(&events)?;
        let n = events.len();
        self.events = scratch.events;
        self.state = scratch.state;
        Ok(n)
    }

    /// State as of `seq` (0 is the empty store).
    pub fn state_at(&self, seq: u64) -> Result<State, StoreError> {
        if seq > self.state.seq {
            return Err(StoreError::SeqOutOfRange { from: seq, to: seq, current: self.state.seq });
        }
        let mut state = State::default();
        for e in self.events.iter().take_while(|e| e.seq <= seq) {
            state.apply(e);
        }
        Ok(state)
    }

    /// Criterion-4 audit of every study of `(app, problem)` between the
    /// states at `from` and `to`, one report per study defined at `to`.
    pub fn audit_between(&self, key: &ProblemKey, from: u64, to: u64) -> Result<Vec<StudyAudit>, StoreError> {
        if from > to || to > self.state.seq {
            return Err(StoreError::SeqOutOfRange { from, to, current: self.state.seq });
        }
        let before = self.state_at(from)?;
        let after = self.state_at(to)?;
        let mut out = Vec::new();
        for (id, st) in after.studies.iter().filter(|(_, s)| &s.definition.problem_key() == key) {
            let study = &st.definition;
            let mut report = AuditReport::default();
            let b = Snapshot::score(study, &before.catalog, &before.measurements_for(key));
            let a = Snapshot::score(study, &after.catalog, &after.measurements_for(key));
            match (b, a) {
                (Ok(b), Ok(a)) => match diff_snapshots(&b, &a) {
                    Ok(cs) => report = check_criterion4(&cs),
                    Err(e) => report.findings.push(info(e.to_string())),
                },
                (Err(e), _) => report.findings.push(info(format!("study not scorable at seq {from}: {e}"))),
                (_, Err(e)) => report.findings.push(info(format!("study not scorable at seq {to}: {e}"))),
            }
            out.push(StudyAudit { study: id.clone(), policy: study.policy.kind(), metric: study.metric, report });
        }
        Ok(out)
    }
}

fn info(description: String) -> Finding {
    Finding {
        severity: Severity::Info,
        criterion: None,
        implementation: None,
        platform: None,
        description,
        before: None,
        after: None,
    }
}

impl State {
    /// Catalog and measurement bookkeeping only, used to validate batches.
    fn apply_without_scoring(&mut self, event: &Event) {
        self.seq = event.seq;
        match &event.payload {
            Payload::AddPlatform(p) => self.catalog.add_platform(p.clone()),
            Payload::AddImplementation(i) => self.catalog.add_implementation(i.clone()),
            Payload::AddProblem(p) => self.catalog.add_problem(p.clone()),
            Payload::AddMeasurement(m) => self.measurements.push(m.clone()),
            Payload::DefineStudy(s) => {
                self.studies.insert(
                    s.key(),
                    StudyState { definition: s.clone(), scores: Vec::new(), error: None },
                );
            }
        }
    }
}

/// Payloads that register a catalog: platforms, then problems, then
/// implementations.
pub fn catalog_payloads(catalog: &Catalog) -> Vec<Payload> {
    let mut out: Vec<Payload> = catalog.platforms.values().cloned().map(Payload::AddPlatform).collect();
    out.extend(catalog.problems.iter().cloned().map(Payload::AddProblem));
    out.extend(catalog.implementations.iter().cloned().map(Payload::AddImplementation));
    out
}
