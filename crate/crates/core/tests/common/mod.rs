//! Random study generation and the property checks shared by the property
//! tests and the acceptance suite.

#![allow(dead_code)]

use std::collections::BTreeMap;

use ppmetrics::audit::{check_criterion4, check_scaling_invariance, diff_snapshots, ScaleScope, Snapshot};
use ppmetrics::{
    pbar, pp_harmonic, score_study, ArchClass, BaselinePolicy, Catalog, Implementation, Measurement,
    MeasurementKind, Metric, Platform, PortabilityScore, ProblemSpec, StudyDefinition,
};
use proptest::prelude::*;

pub const APP: &str = "app";
pub const PROBLEM: &str = "p";
pub const REFERENCE: &str = "REF";

/// Up to 8 portable implementations on up to 6 platforms, some cells
/// unmeasured, plus a low-level reference measured everywhere.
#[derive(Debug, Clone)]
pub struct RandomStudy {
    pub kind: MeasurementKind,
    pub platforms: Vec<String>,
    pub implementations: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
    pub reference: Vec<f64>,
}

pub fn value() -> impl Strategy<Value = f64> {
    0.1f64..100.0
}

pub fn random_study(kind: MeasurementKind) -> impl Strategy<Value = RandomStudy> {
    (1usize..=8, 1usize..=6).prop_flat_map(move |(n, m)| {
        (
            proptest::collection::vec(proptest::collection::vec(proptest::option::weighted(0.8, value()), m), n),
            proptest::collection::vec(value(), m),
        )
            .prop_map(move |(values, reference)| RandomStudy {
                kind,
                platforms: (0..m).map(|j| format!("P{j}")).collect(),
                implementations: (0..n).map(|i| format!("I{i}")).collect(),
                values,
                reference,
            })
    })
}

impl RandomStudy {
    pub fn catalog(&self) -> Catalog {
        let mut c = Catalog::default();
        for p in &self.platforms {
            c.add_platform(Platform::new(p, "v", ArchClass::Gpu).with_peak_compute(1000.0).with_peak_mem_bw(100.0));
        }
        c.add_problem(ProblemSpec { app: APP.into(), problem: PROBLEM.into(), input_size: None });
        for i in &self.implementations {
            c.add_implementation(Implementation::portable(APP, i));
        }
        c.add_implementation(Implementation::low_level(APP, REFERENCE));
        c
    }

    pub fn measurement(&self, implementation: &str, platform: &str, value: f64) -> Measurement {
        Measurement::new(APP, PROBLEM, implementation, platform, self.kind, value)
    }

    pub fn measurements(&self) -> Vec<Measurement> {
        let mut out = Vec::new();
        for (i, row) in self.values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    out.push(self.measurement(&self.implementations[i], &self.platforms[j], *v));
                }
            }
        }
        for (j, v) in self.reference.iter().enumerate() {
            out.push(self.measurement(REFERENCE, &self.platforms[j], *v));
        }
        out
    }

    pub fn fixed_reference(&self) -> BaselinePolicy {
        BaselinePolicy::fixed_reference(self.platforms.iter().map(|p| (p.clone(), REFERENCE.to_owned())))
    }

    pub fn study(&self, policy: BaselinePolicy, metric: Metric) -> StudyDefinition {
        StudyDefinition::new(APP, PROBLEM, self.platforms.clone(), policy, metric)
    }

    pub fn score(&self, study: &StudyDefinition, ms: &[Measurement]) -> Vec<PortabilityScore> {
        score_study(study, &self.catalog(), ms, ms).expect("random study scores")
    }

    /// Baseline-stable policies valid for this study's measurement kind.
    pub fn stable_policies(&self) -> Vec<BaselinePolicy> {
        match self.kind {
            MeasurementKind::RuntimeSeconds => vec![self.fixed_reference()],
            _ => vec![self.fixed_reference(), BaselinePolicy::ArchitecturalTheoretical],
        }
    }

    /// The first measured (implementation, platform) cell at or after `seed`.
    pub fn measured_cell(&self, seed: usize) -> Option<(usize, usize)> {
        let m = self.platforms.len();
        let total = self.implementations.len() * m;
        (0..total).map(|k| (seed + k) % total).map(|k| (k / m, k % m)).find(|&(i, j)| self.values[i][j].is_some())
    }
}

pub fn efficiency_map(h: &[String], es: &[f64]) -> BTreeMap<String, f64> {
    h.iter().cloned().zip(es.iter().copied()).collect()
}

pub fn platform_names(n: usize) -> Vec<String> {
    (0..n).map(|j| format!("P{j}")).collect()
}

/// Harmonic never exceeds arithmetic when every efficiency is positive.
pub fn harmonic_le_arithmetic(es: &[f64]) -> Result<(), String> {
    let h = platform_names(es.len());
    let map = efficiency_map(&h, es);
    let a = pbar(&map, &h).map_err(|e| e.to_string())?.value;
    let m = pp_harmonic(&map, &h).map_err(|e| e.to_string())?.value;
    if m <= a * (1.0 + 1e-12) {
        Ok(())
    } else {
        Err(format!("harmonic {m} > arithmetic {a} for {es:?}"))
    }
}

/// Both metrics are exactly zero when nothing is supported.
pub fn empty_support_is_zero(n: usize) -> Result<(), String> {
    let h = platform_names(n);
    let map = efficiency_map(&h, &vec![0.0; n]);
    let a = pbar(&map, &h).map_err(|e| e.to_string())?;
    let m = pp_harmonic(&map, &h).map_err(|e| e.to_string())?;
    if a.value == 0.0 && m.value == 0.0 && a.supported.is_empty() {
        Ok(())
    } else {
        Err(format!("arithmetic {} harmonic {} over {n} unsupported platforms", a.value, m.value))
    }
}

/// At fixed |S| the arithmetic score moves by delta / |S|.
pub fn arithmetic_linear(es: &[f64], j: usize, delta: f64) -> Result<(), String> {
    let h = platform_names(es.len());
    let before = pbar(&efficiency_map(&h, es), &h).map_err(|e| e.to_string())?;
    let mut moved = es.to_vec();
    moved[j] += delta;
    if moved[j] <= 0.0 {
        return Ok(());
    }
    let after = pbar(&efficiency_map(&h, &moved), &h).map_err(|e| e.to_string())?;
    let expected = delta / before.supported.len() as f64;
    let got = after.value - before.value;
    if (got - expected).abs() <= 1e-12 {
        Ok(())
    } else {
        Err(format!("moved by {got}, expected {expected}"))
    }
}

/// Scaling every measurement on one platform leaves each application
/// efficiency within 1e-9.
pub fn scaling_invariance(study: &RandomStudy, policy: BaselinePolicy, platform: usize, factor: f64) -> Result<(), String> {
    let def = study.study(policy, Metric::ArithmeticMean);
    let ms = study.measurements();
    let p = &study.platforms[platform];
    let before = study.score(&def, &ms);
    let scaled: Vec<Measurement> = ms
        .iter()
        .map(|m| {
            let mut m = m.clone();
            if &m.platform == p {
                m.value *= factor;
            }
            m
        })
        .collect();
    let after = study.score(&def, &scaled);
    for (b, a) in before.iter().zip(&after) {
        for (rb, ra) in b.per_platform.iter().zip(&a.per_platform) {
            if (rb.e - ra.e).abs() > 1e-9 {
                return Err(format!("{} on {}: {} -> {}", b.implementation, rb.platform, rb.e, ra.e));
            }
        }
    }
    let report = check_scaling_invariance(&def, &study.catalog(), &ms, p, factor, ScaleScope::All);
    if report.has_violations() {
        return Err(format!("audit flagged a rescale: {:?}", report.findings));
    }
    Ok(())
}

/// Improving one measured cell under a baseline-stable policy strictly
/// raises that implementation's arithmetic score and leaves every other
/// score bit-identical.
pub fn improvement_is_local(study: &RandomStudy, policy: BaselinePolicy, seed: usize, gain: f64) -> Result<(), String> {
    let Some((i, j)) = study.measured_cell(seed) else { return Ok(()) };
    let def = study.study(policy, Metric::ArithmeticMean);
    let ms = study.measurements();
    let before = study.score(&def, &ms);
    let target = &study.implementations[i];
    let improved: Vec<Measurement> = ms
        .iter()
        .map(|m| {
            let mut m = m.clone();
            if &m.implementation == target && m.platform == study.platforms[j] {
                m.value = if m.kind.lower_is_better() { m.value / gain } else { m.value * gain };
            }
            m
        })
        .collect();
    let after = study.score(&def, &improved);
    for (b, a) in before.iter().zip(&after) {
        if &b.implementation == target {
            if a.value <= b.value {
                return Err(format!("{target} did not improve: {} -> {}", b.value, a.value));
            }
        } else if a.value.to_bits() != b.value.to_bits() {
            return Err(format!("{} moved from {} to {}", b.implementation, b.value, a.value));
        }
    }
    Ok(())
}

/// Splits a random study into an incumbent part (the first `keep`
/// implementations) and the full study, for pure-addition audits.
pub fn addition_snapshots(study: &RandomStudy, keep: usize, policy: BaselinePolicy) -> (Snapshot, Snapshot) {
    let keep = keep.clamp(1, study.implementations.len());
    let mut incumbent = study.clone();
    incumbent.implementations.truncate(keep);
    incumbent.values.truncate(keep);
    let def = study.study(policy, Metric::ArithmeticMean);
    let before =
        Snapshot::score(&def, &incumbent.catalog(), &incumbent.measurements()).expect("incumbent scores");
    let after = Snapshot::score(&def, &study.catalog(), &study.measurements()).expect("full study scores");
    (before, after)
}

pub fn criterion4_violations(before: &Snapshot, after: &Snapshot) -> usize {
    let changes = diff_snapshots(before, after).expect("same study");
    check_criterion4(&changes).violations().count()
}

/// One step of a random repository script. Indices are reduced modulo the
/// entities that exist when the step runs.
#[derive(Debug, Clone)]
pub enum Op {
    DefineStudy { policy: u8, harmonic: bool },
    AddImplementation,
    AddMeasurement { implementation: usize, platform: usize, value: f64 },
    AddReference { platform: usize, value: f64 },
}

#[derive(Debug, Clone)]
pub struct Script {
    pub kind: MeasurementKind,
    pub platforms: usize,
    pub ops: Vec<Op>,
}

pub fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        1 => (any::<u8>(), any::<bool>()).prop_map(|(policy, harmonic)| Op::DefineStudy { policy, harmonic }),
        2 => Just(Op::AddImplementation),
        8 => (any::<usize>(), any::<usize>(), value())
            .prop_map(|(implementation, platform, value)| Op::AddMeasurement { implementation, platform, value }),
        2 => (any::<usize>(), value()).prop_map(|(platform, value)| Op::AddReference { platform, value }),
    ]
}

pub fn script() -> impl Strategy<Value = Script> {
    (
        prop_oneof![3 => Just(MeasurementKind::RuntimeSeconds), 1 => Just(MeasurementKind::ThroughputGflops)],
        1usize..=6,
        proptest::collection::vec(op(), 1..40),
    )
        .prop_map(|(kind, platforms, ops)| Script { kind, platforms, ops })
}

pub const MAX_IMPLEMENTATIONS: usize = 8;

/// Expected repository contents, maintained without the store.
#[derive(Debug, Default)]
pub struct Model {
    pub catalog: Catalog,
    pub measurements: Vec<Measurement>,
    pub studies: Vec<StudyDefinition>,
    pub portable: Vec<String>,
}

impl Script {
    pub fn platform_ids(&self) -> Vec<String> {
        platform_names(self.platforms)
    }

    fn policy(&self, pick: u8) -> BaselinePolicy {
        let refs = || BaselinePolicy::fixed_reference(self.platform_ids().into_iter().map(|p| (p, REFERENCE.to_owned())));
        match (self.kind, pick % 5) {
            (_, 0) => BaselinePolicy::StudyLocalBest,
            (_, 1) => BaselinePolicy::RepositoryBest,
            (_, 2) => refs(),
            (MeasurementKind::ThroughputGflops, 3) => BaselinePolicy::ArchitecturalTheoretical,
            (MeasurementKind::ThroughputGflops, _) => {
                BaselinePolicy::ArchitecturalRoofline { arithmetic_intensity: Some(4.0) }
            }
            _ => BaselinePolicy::RepositoryBest,
        }
    }

    /// The payloads the script expands to, each valid against the state the
    /// previous ones produce.
    pub fn payloads(&self) -> Vec<ppmetrics::store::Payload> {
        use ppmetrics::store::Payload;
        let mut out = Vec::new();
        for p in self.platform_ids() {
            out.push(Payload::AddPlatform(
                Platform::new(p, "v", ArchClass::Gpu).with_peak_compute(1000.0).with_peak_mem_bw(100.0),
            ));
        }
        out.push(Payload::AddProblem(ProblemSpec { app: APP.into(), problem: PROBLEM.into(), input_size: None }));
        let mut implementations: Vec<String> = Vec::new();
        let mut reference = false;
        let mut studies: Vec<String> = Vec::new();
        let mut seen: Vec<Measurement> = Vec::new();
        let mut push_measurement = |out: &mut Vec<Payload>, m: Measurement| {
            if !seen.iter().any(|x| x.is_duplicate_of(&m)) {
                seen.push(m.clone());
                out.push(Payload::AddMeasurement(m));
            }
        };
        for op in &self.ops {
            match op {
                Op::DefineStudy { policy, harmonic } => {
                    let metric = if *harmonic { Metric::HarmonicMean } else { Metric::ArithmeticMean };
                    let def = StudyDefinition::new(APP, PROBLEM, self.platform_ids(), self.policy(*policy), metric);
                    if !studies.contains(&def.key()) {
                        studies.push(def.key());
                        out.push(Payload::DefineStudy(def));
                    }
                }
                Op::AddImplementation => {
                    if implementations.len() < MAX_IMPLEMENTATIONS {
                        let id = format!("I{}", implementations.len());
                        out.push(Payload::AddImplementation(Implementation::portable(APP, &id)));
                        implementations.push(id);
                    }
                }
                Op::AddMeasurement { implementation, platform, value } => {
                    if implementations.is_empty() {
                        out.push(Payload::AddImplementation(Implementation::portable(APP, "I0")));
                        implementations.push("I0".into());
                    }
                    let i = &implementations[implementation % implementations.len()];
                    let p = format!("P{}", platform % self.platforms);
                    push_measurement(&mut out, Measurement::new(APP, PROBLEM, i, &p, self.kind, *value));
                }
                Op::AddReference { platform, value } => {
                    if !reference {
                        reference = true;
                        out.push(Payload::AddImplementation(Implementation::low_level(APP, REFERENCE)));
                    }
                    let p = format!("P{}", platform % self.platforms);
                    push_measurement(&mut out, Measurement::new(APP, PROBLEM, REFERENCE, &p, self.kind, *value));
                }
            }
        }
        out
    }
}

impl Model {
    pub fn apply(&mut self, payload: &ppmetrics::store::Payload) {
        use ppmetrics::store::Payload;
        match payload {
            Payload::AddPlatform(p) => self.catalog.add_platform(p.clone()),
            Payload::AddProblem(p) => self.catalog.add_problem(p.clone()),
            Payload::AddImplementation(i) => self.catalog.add_implementation(i.clone()),
            Payload::AddMeasurement(m) => self.measurements.push(m.clone()),
            Payload::DefineStudy(s) => self.studies.push(s.clone()),
        }
    }

    /// From-scratch scores of every study, or the scoring error text.
    pub fn expected(&self) -> Vec<(String, Result<Vec<PortabilityScore>, String>)> {
        self.studies
            .iter()
            .map(|s| {
                (s.key(), score_study(s, &self.catalog, &self.measurements, &self.measurements).map_err(|e| e.to_string()))
            })
            .collect()
    }
}

fn same_bits(a: &PortabilityScore, b: &PortabilityScore) -> bool {
    a == b
        && a.value.to_bits() == b.value.to_bits()
        && a.per_platform.iter().zip(&b.per_platform).all(|(x, y)| x.e.to_bits() == y.e.to_bits())
}

/// Ingests the script one event at a time and compares the stored scores
/// with a from-scratch computation after every step; then replays the log
/// into a fresh store and requires an identical state.
pub fn oracle_equivalence(script: &Script) -> Result<(), String> {
    use ppmetrics::store::Store;
    let mut store = Store::in_memory();
    let mut model = Model::default();
    for payload in script.payloads() {
        store.ingest(payload.clone()).map_err(|e| format!("ingest {payload:?}: {e}"))?;
        model.apply(&payload);
        for (key, expected) in model.expected() {
            let stored = store.state().studies.get(&key).ok_or_else(|| format!("study {key} missing"))?;
            match expected {
                Ok(scores) => {
                    if stored.error.is_some() || stored.scores.len() != scores.len() {
                        return Err(format!("{key} at seq {}: stored {:?}", store.seq(), stored.error));
                    }
                    if !stored.scores.iter().zip(&scores).all(|(a, b)| same_bits(a, b)) {
                        return Err(format!("{key} at seq {}: scores differ", store.seq()));
                    }
                }
                Err(_) => {
                    if stored.error.is_none() || !stored.scores.is_empty() {
                        return Err(format!("{key} at seq {}: expected an unscorable study", store.seq()));
                    }
                }
            }
        }
    }
    let mut replayed = Store::in_memory();
    replayed.import_snapshot(&store.export_snapshot()).map_err(|e| e.to_string())?;
    if replayed.state() != store.state() {
        return Err("replay produced a different state".into());
    }
    Ok(())
}
