//! Mechanical checks of the portability-metric criteria.
//!
//! The central check compares two scored snapshots of the same study and
//! flags every implementation whose efficiency moved although none of its
//! own measurements did (baseline churn).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::efficiency::EfficiencyError;
use crate::metrics::{score_study, ScoreError};
use crate::model::{
    BaselinePolicy, BaselineSource, Catalog, Measurement, Metric, PortabilityClass,
    PortabilityScore, StudyDefinition,
};

/// Relative difference below which two values count as unchanged.
pub const CHANGE_TOLERANCE: f64 = 1e-9;

pub fn changed(before: f64, after: f64) -> bool {
    (before - after).abs() > CHANGE_TOLERANCE * before.abs().max(after.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Violation,
    Warning,
    Info,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Violation => "violation",
            Severity::Warning => "warning",
            Severity::Info => "info",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub criterion: Option<u8>,
    pub implementation: Option<String>,
    pub platform: Option<String>,
    pub description: String,
    pub before: Option<f64>,
    pub after: Option<f64>,
}

impl Finding {
    fn new(severity: Severity, criterion: Option<u8>, description: impl Into<String>) -> Self {
        Finding {
            severity,
            criterion,
            implementation: None,
            platform: None,
            description: description.into(),
            before: None,
            after: None,
        }
    }

    fn on(mut self, implementation: Option<&str>, platform: Option<&str>) -> Self {
        self.implementation = implementation.map(str::to_owned);
        self.platform = platform.map(str::to_owned);
        self
    }

    fn values(mut self, before: Option<f64>, after: Option<f64>) -> Self {
        self.before = before;
        self.after = after;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub findings: Vec<Finding>,
}

impl AuditReport {
    pub fn count(&self, severity: Severity) -> usize {
        self.findings.iter().filter(|f| f.severity == severity).count()
    }

    pub fn violations(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Violation)
    }

    pub fn has_violations(&self) -> bool {
        self.violations().next().is_some()
    }

    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn extend(&mut self, other: AuditReport) {
        self.findings.extend(other.findings);
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AuditError {
    #[error("snapshots were scored under different studies ({0} vs {1})")]
    StudyMismatch(String, String),
}

/// Measurements of one study together with the scores computed from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub study: StudyDefinition,
    pub measurements: Vec<Measurement>,
    pub scores: Vec<PortabilityScore>,
}

impl Snapshot {
    /// Scores `measurements` under `study`; they double as the repository.
    pub fn score(
        study: &StudyDefinition,
        catalog: &Catalog,
        measurements: &[Measurement],
    ) -> Result<Snapshot, ScoreError> {
        Snapshot::score_with_repository(study, catalog, measurements, measurements)
    }

    pub fn score_with_repository(
        study: &StudyDefinition,
        catalog: &Catalog,
        measurements: &[Measurement],
        repository: &[Measurement],
    ) -> Result<Snapshot, ScoreError> {
        let scores = score_study(study, catalog, measurements, repository)?;
        let key = study.problem_key();
        Ok(Snapshot {
            study: study.clone(),
            measurements: measurements.iter().filter(|m| m.problem_key() == key).cloned().collect(),
            scores,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementChange {
    pub implementation: String,
    pub platform: String,
    pub before: Vec<Measurement>,
    pub after: Vec<Measurement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyDelta {
    pub implementation: String,
    pub platform: String,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreDelta {
    pub implementation: String,
    pub before: Option<f64>,
    pub after: Option<f64>,
}

/// Everything that differs between two snapshots of one study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeSet {
    pub study: StudyDefinition,
    pub added: Vec<Measurement>,
    pub removed: Vec<Measurement>,
    pub modified: Vec<MeasurementChange>,
    pub efficiency_deltas: Vec<EfficiencyDelta>,
    pub score_deltas: Vec<ScoreDelta>,
    pub before_scores: Vec<PortabilityScore>,
    pub after_scores: Vec<PortabilityScore>,
}

impl ChangeSet {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty()
            && self.removed.is_empty()
            && self.modified.is_empty()
            && self.efficiency_deltas.is_empty()
            && self.score_deltas.is_empty()
    }

    /// True if any measurement of `implementation` on a platform of the
    /// study's set was added, removed or modified.
    pub fn touches(&self, implementation: &str) -> bool {
        let in_h = |m: &Measurement| self.study.h.contains(&m.platform);
        self.added.iter().chain(&self.removed).any(|m| m.implementation == implementation && in_h(m))
            || self
                .modified
                .iter()
                .any(|c| c.implementation == implementation && self.study.h.contains(&c.platform))
    }

    fn score(scores: &[PortabilityScore], implementation: &str) -> Option<PortabilityScore> {
        scores.iter().find(|s| s.implementation == implementation).cloned()
    }
}

/// Multiset difference: items of `a` without a matching item in `b`.
fn minus(a: &[Measurement], b: &[Measurement]) -> Vec<Measurement> {
    let mut used = vec![false; b.len()];
    let mut out = Vec::new();
    'outer: for m in a {
        for (slot, n) in b.iter().enumerate() {
            if !used[slot] && m.is_duplicate_of(n) {
                used[slot] = true;
                continue 'outer;
            }
        }
        out.push(m.clone());
    }
    out
}

pub fn diff_snapshots(before: &Snapshot, after: &Snapshot) -> Result<ChangeSet, AuditError> {
    if !before.study.same_shape(&after.study) {
        return Err(AuditError::StudyMismatch(before.study.key(), after.study.key()));
    }
    let mut added = minus(&after.measurements, &before.measurements);
    let mut removed = minus(&before.measurements, &after.measurements);

    let pairs = |ms: &[Measurement]| -> BTreeSet<(String, String)> {
        ms.iter().map(|m| (m.implementation.clone(), m.platform.clone())).collect()
    };
    let mut modified = Vec::new();
    for (implementation, platform) in pairs(&added).intersection(&pairs(&removed)) {
        let is_pair = |m: &Measurement| &m.implementation == implementation && &m.platform == platform;
        modified.push(MeasurementChange {
            implementation: implementation.clone(),
            platform: platform.clone(),
            before: removed.iter().filter(|m| is_pair(m)).cloned().collect(),
            after: added.iter().filter(|m| is_pair(m)).cloned().collect(),
        });
        added.retain(|m| !is_pair(m));
        removed.retain(|m| !is_pair(m));
    }

    let mut efficiency_deltas = Vec::new();
    let mut score_deltas = Vec::new();
    let mut names: Vec<&str> = before.scores.iter().map(|s| s.implementation.as_str()).collect();
    for s in &after.scores {
        if !names.contains(&s.implementation.as_str()) {
            names.push(&s.implementation);
        }
    }
    for name in names {
        let b = before.scores.iter().find(|s| s.implementation == name);
        let a = after.scores.iter().find(|s| s.implementation == name);
        if let (Some(b), Some(a)) = (b, a) {
            for platform in &before.study.h {
                let (eb, ea) = (b.efficiency(platform).unwrap_or(0.0), a.efficiency(platform).unwrap_or(0.0));
                if changed(eb, ea) {
                    efficiency_deltas.push(EfficiencyDelta {
                        implementation: name.to_owned(),
                        platform: platform.clone(),
                        before: eb,
                        after: ea,
                    });
                }
            }
        }
        let (vb, va) = (b.map(|s| s.value), a.map(|s| s.value));
        let moved = match (vb, va) {
            (Some(x), Some(y)) => changed(x, y),
            (None, None) => false,
            _ => true,
        };
        if moved {
            score_deltas.push(ScoreDelta { implementation: name.to_owned(), before: vb, after: va });
        }
    }

    Ok(ChangeSet {
        study: after.study.clone(),
        added,
        removed,
        modified,
        efficiency_deltas,
        score_deltas,
        before_scores: before.scores.clone(),
        after_scores: after.scores.clone(),
    })
}

/// A score may only move when the implementation's own performance moved.
/// Emits one violation per (implementation, platform) efficiency change of
/// an implementation whose measurements are untouched.
pub fn check_criterion4(changes: &ChangeSet) -> AuditReport {
    let mut report = AuditReport::default();
    let mut flagged = BTreeSet::new();
    for d in &changes.efficiency_deltas {
        if changes.touches(&d.implementation) {
            continue;
        }
        flagged.insert(d.implementation.clone());
        report.findings.push(
            Finding::new(
                Severity::Violation,
                Some(4),
                format!(
                    "efficiency of {} on {} changed from {:.4} to {:.4} although none of its measurements changed",
                    d.implementation, d.platform, d.before, d.after
                ),
            )
            .on(Some(&d.implementation), Some(&d.platform))
            .values(Some(d.before), Some(d.after)),
        );
    }
    for d in &changes.score_deltas {
        let (Some(b), Some(a)) = (d.before, d.after) else { continue };
        if changes.touches(&d.implementation) || flagged.contains(&d.implementation) {
            continue;
        }
        report.findings.push(
            Finding::new(
                Severity::Violation,
                Some(4),
                format!("score of {} changed although none of its measurements changed", d.implementation),
            )
            .on(Some(&d.implementation), None)
            .values(Some(b), Some(a)),
        );
    }
    report
}

/// At a fixed supported-set size the arithmetic score must move by exactly
/// the summed efficiency change over |S|. Changes of |S| are noted as info.
pub fn check_criterion5(changes: &ChangeSet) -> AuditReport {
    let mut report = AuditReport::default();
    if changes.study.metric != Metric::ArithmeticMean {
        return report;
    }
    for d in &changes.score_deltas {
        let (Some(b), Some(a)) = (
            ChangeSet::score(&changes.before_scores, &d.implementation),
            ChangeSet::score(&changes.after_scores, &d.implementation),
        ) else {
            continue;
        };
        if b.s.len() != a.s.len() {
            report.findings.push(
                Finding::new(
                    Severity::Info,
                    Some(5),
                    format!(
                        "supported set of {} changed size ({} -> {}); proportionality not checked",
                        d.implementation,
                        b.s.len(),
                        a.s.len()
                    ),
                )
                .on(Some(&d.implementation), None)
                .values(Some(b.value), Some(a.value)),
            );
            continue;
        }
        if a.s.is_empty() {
            continue;
        }
        let delta_sum: f64 = changes
            .study
            .h
            .iter()
            .map(|p| a.efficiency(p).unwrap_or(0.0) - b.efficiency(p).unwrap_or(0.0))
            .sum();
        let expected = b.value + delta_sum / a.s.len() as f64;
        if (expected - a.value).abs() > CHANGE_TOLERANCE * expected.abs().max(1.0) {
            report.findings.push(
                Finding::new(
                    Severity::Violation,
                    Some(5),
                    format!(
                        "score of {} is not proportional to its summed efficiencies (expected {expected:.6})",
                        d.implementation
                    ),
                )
                .on(Some(&d.implementation), None)
                .values(Some(b.value), Some(a.value)),
            );
        }
    }
    report
}

/// Which measurements a scaling audit rescales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleScope {
    All,
    /// Leaves low-level and fixed-reference implementations untouched.
    PortableOnly,
}

fn in_scope(scope: ScaleScope, study: &StudyDefinition, catalog: &Catalog, implementation: &str) -> bool {
    match scope {
        ScaleScope::All => true,
        ScaleScope::PortableOnly => {
            !study.policy.is_reference_implementation(implementation)
                && catalog
                    .implementation(&study.app, implementation)
                    .map_or(true, |i| i.portability_class == PortabilityClass::PortableFramework)
        }
    }
}

fn score_failure(err: &ScoreError) -> Finding {
    let platform = match err {
        ScoreError::Efficiency(EfficiencyError::MissingReferenceMeasurement { platform, .. }) => {
            Some(platform.as_str())
        }
        _ => None,
    };
    Finding::new(Severity::Violation, None, format!("study cannot be scored: {err}")).on(None, platform)
}

/// Multiplies the in-scope measurements on `platform` by `factor` and
/// reports every application efficiency that moves.
pub fn check_scaling_invariance(
    study: &StudyDefinition,
    catalog: &Catalog,
    measurements: &[Measurement],
    platform: &str,
    factor: f64,
    scope: ScaleScope,
) -> AuditReport {
    let mut report = AuditReport::default();
    if !(factor.is_finite() && factor > 0.0) {
        report.findings.push(Finding::new(
            Severity::Violation,
            None,
            format!("scaling factor must be strictly positive, got {factor}"),
        ));
        return report;
    }
    if study.policy.kind().is_architectural() {
        report.findings.push(
            Finding::new(
                Severity::Info,
                Some(2),
                format!(
                    "{} compares against fixed platform peaks; scaling invariance does not apply",
                    study.policy.kind()
                ),
            )
            .on(None, Some(platform)),
        );
        return report;
    }
    let key = study.problem_key();
    let scaled: Vec<Measurement> = measurements
        .iter()
        .map(|m| {
            let mut m = m.clone();
            if m.platform == platform
                && m.problem_key() == key
                && in_scope(scope, study, catalog, &m.implementation)
            {
                m.value *= factor;
            }
            m
        })
        .collect();
    let (before, after) = match (
        score_study(study, catalog, measurements, measurements),
        score_study(study, catalog, &scaled, &scaled),
    ) {
        (Ok(b), Ok(a)) => (b, a),
        (Err(e), _) | (_, Err(e)) => {
            report.findings.push(score_failure(&e));
            return report;
        }
    };
    for (b, a) in before.iter().zip(&after) {
        let (Some(rb), Some(ra)) = (b.record(platform), a.record(platform)) else { continue };
        if (rb.e - ra.e).abs() <= CHANGE_TOLERANCE {
            continue;
        }
        let baseline_scaled = ra.baseline.as_ref().map_or(true, |d| match &d.source {
            BaselineSource::BestInStudy(i)
            | BaselineSource::ReferenceImplementation(i)
            | BaselineSource::RepositoryBest(i) => in_scope(scope, study, catalog, i),
            BaselineSource::TheoreticalPeak | BaselineSource::RooflinePeak => false,
        });
        let finding = if baseline_scaled {
            Finding::new(
                Severity::Violation,
                Some(2),
                format!("efficiency of {} changed under uniform scaling by {factor}", a.implementation),
            )
        } else {
            let source = ra.baseline.as_ref().map(|d| d.source.to_string()).unwrap_or_default();
            Finding::new(
                Severity::Info,
                Some(2),
                format!(
                    "efficiency of {} changed because its baseline {source} was not scaled",
                    a.implementation
                ),
            )
        };
        report.findings.push(
            finding.on(Some(&a.implementation), Some(platform)).values(Some(rb.e), Some(ra.e)),
        );
    }
    report
}

/// Under a fixed reference, warns wherever a portable implementation beats
/// the reference (e > 1).
pub fn check_reference_dominance(
    study: &StudyDefinition,
    catalog: &Catalog,
    measurements: &[Measurement],
    repository: &[Measurement],
) -> AuditReport {
    let mut report = AuditReport::default();
    if !matches!(study.policy, BaselinePolicy::FixedReference { .. }) {
        report.findings.push(Finding::new(
            Severity::Info,
            None,
            format!("reference dominance only applies to fixed_reference, not {}", study.policy.kind()),
        ));
        return report;
    }
    let scores = match score_study(study, catalog, measurements, repository) {
        Ok(s) => s,
        Err(e) => {
            report.findings.push(score_failure(&e));
            return report;
        }
    };
    for s in &scores {
        for r in s.per_platform.iter().filter(|r| r.e > 1.0) {
            let reference = study.policy.reference_for(&r.platform).unwrap_or("?");
            report.findings.push(
                Finding::new(
                    Severity::Warning,
                    None,
                    format!(
                        "{} outperforms reference {reference} on {} (e = {:.4})",
                        s.implementation, r.platform, r.e
                    ),
                )
                .on(Some(&s.implementation), Some(&r.platform))
                .values(None, Some(r.e)),
            );
        }
    }
    report
}

/// Warns when the platform set spans more than one architecture class.
pub fn check_mixed_arch(study: &StudyDefinition, catalog: &Catalog) -> AuditReport {
    let mut classes = BTreeMap::new();
    for p in study.h.iter().filter_map(|id| catalog.platform(id)) {
        classes.entry(p.arch_class).or_insert_with(Vec::new).push(p.id.clone());
    }
    let mut report = AuditReport::default();
    if classes.len() > 1 {
        let parts: Vec<String> =
            classes.iter().map(|(c, ps)| format!("{c}: {}", ps.join(", "))).collect();
        report.findings.push(Finding::new(
            Severity::Warning,
            None,
            format!("platform set mixes architecture classes ({})", parts.join("; ")),
        ));
    }
    report
}
