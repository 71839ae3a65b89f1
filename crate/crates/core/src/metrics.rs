//! Portability metrics over per-platform efficiencies, and the full
//! scoring pipeline for a study.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::efficiency::{
    application_efficiency, architectural_efficiency, best_measurement, resolve_baseline,
    roofline_peak, BaselineValue, EfficiencyError,
};
use crate::model::{
    validate_study, BaselineDescriptor, BaselinePolicy, BaselineSource, Catalog,
    EfficiencyRecord, Measurement, Metric, PortabilityClass, PortabilityScore, StudyDefinition,
    Violation,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("platform {0} is not in the platform set")]
    OutsideSet(String),
    #[error("efficiency on {platform} is negative or not a number ({value})")]
    InvalidEfficiency { platform: String, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("invalid study: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Efficiency(#[from] EfficiencyError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Metric value plus the supported subset it was computed over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricOutcome {
    pub value: f64,
    pub supported: Vec<String>,
}

/// Efficiencies looked up in `h` order; platforms missing from the map
/// count as unsupported.
fn ordered(
    efficiencies: &BTreeMap<String, f64>,
    h: &[String],
) -> Result<Vec<(String, f64)>, MetricError> {
    if let Some(k) = efficiencies.keys().find(|k| !h.contains(k)) {
        return Err(MetricError::OutsideSet(k.clone()));
    }
    h.iter()
        .map(|p| {
            let e = efficiencies.get(p).copied().unwrap_or(0.0);
            if e.is_nan() || e < 0.0 {
                Err(MetricError::InvalidEfficiency { platform: p.clone(), value: e })
            } else {
                Ok((p.clone(), e))
            }
        })
        .collect()
}

/// Arithmetic mean of the efficiencies over the supported subset of `h`,
/// zero when nothing is supported.
pub fn pbar(efficiencies: &BTreeMap<String, f64>, h: &[String]) -> Result<MetricOutcome, MetricError> {
    let es = ordered(efficiencies, h)?;
    let supported: Vec<(String, f64)> = es.into_iter().filter(|(_, e)| *e > 0.0).collect();
    let value = if supported.is_empty() {
        0.0
    } else {
        supported.iter().map(|(_, e)| e).sum::<f64>() / supported.len() as f64
    };
    Ok(MetricOutcome { value, supported: supported.into_iter().map(|(p, _)| p).collect() })
}

/// Harmonic mean over all of `h`; zero as soon as one platform of `h` is
/// unsupported.
pub fn pp_harmonic(
    efficiencies: &BTreeMap<String, f64>,
    h: &[String],
) -> Result<MetricOutcome, MetricError> {
    let es = ordered(efficiencies, h)?;
    let supported: Vec<String> =
        es.iter().filter(|(_, e)| *e > 0.0).map(|(p, _)| p.clone()).collect();
    let value = if es.is_empty() || supported.len() < es.len() {
        0.0
    } else {
        es.len() as f64 / es.iter().map(|(_, e)| 1.0 / e).sum::<f64>()
    };
    Ok(MetricOutcome { value, supported })
}

pub fn apply_metric(
    metric: Metric,
    efficiencies: &BTreeMap<String, f64>,
    h: &[String],
) -> Result<MetricOutcome, MetricError> {
    match metric {
        Metric::ArithmeticMean => pbar(efficiencies, h),
        Metric::HarmonicMean => pp_harmonic(efficiencies, h),
    }
}

/// Implementations that receive a score: every portable implementation of
/// the study's application, except those serving as fixed references.
pub fn scored_implementations<'a>(
    study: &'a StudyDefinition,
    catalog: &'a Catalog,
) -> impl Iterator<Item = &'a str> + 'a {
    catalog
        .implementations_of(&study.app)
        .filter(|i| i.portability_class == PortabilityClass::PortableFramework)
        .filter(|i| !study.policy.is_reference_implementation(&i.id))
        .map(|i| i.id.as_str())
}

/// Scores every implementation of the study.
///
/// Duplicate measurements of a pair collapse to the best one, the baseline
/// of each platform is resolved once under the study's policy, and the
/// study's metric is applied over `h`. `repository` is the scope for
/// `repository_best` and the fallback for fixed references.
pub fn score_study(
    study: &StudyDefinition,
    catalog: &Catalog,
    study_measurements: &[Measurement],
    repository: &[Measurement],
) -> Result<Vec<PortabilityScore>, ScoreError> {
    let violations = validate_study(study, catalog, study_measurements);
    if !violations.is_empty() {
        return Err(ScoreError::Invalid(violations));
    }
    let key = study.problem_key();
    let relevant: Vec<&Measurement> =
        study_measurements.iter().filter(|m| m.problem_key() == key).collect();

    let mut baselines: Vec<Option<BaselineValue>> = vec![None; study.h.len()];
    let mut scores = Vec::new();
    for implementation in scored_implementations(study, catalog) {
        let mut records = Vec::with_capacity(study.h.len());
        for (slot, platform) in study.h.iter().enumerate() {
            let runs = relevant
                .iter()
                .copied()
                .filter(|m| m.implementation == implementation && &m.platform == platform);
            let best = match best_measurement(runs) {
                Ok(m) => m,
                Err(EfficiencyError::NoMeasurements) => {
                    records.push(EfficiencyRecord::unsupported(implementation, platform));
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let (e, baseline) = match &study.policy {
                BaselinePolicy::ArchitecturalTheoretical
                | BaselinePolicy::ArchitecturalRoofline { .. } => {
                    architectural(&study.policy, catalog, platform, best.value)?
                }
                policy => {
                    if baselines[slot].is_none() {
                        baselines[slot] = Some(resolve_baseline(
                            policy,
                            &key,
                            platform,
                            study_measurements,
                            repository,
                        )?);
                    }
                    let b = baselines[slot].as_ref().expect("resolved above");
                    let e = application_efficiency(best, b)?;
                    let descriptor = BaselineDescriptor {
                        policy: policy.kind(),
                        source: b.source.clone(),
                        value: b.value,
                        units: b.kind.units().to_owned(),
                    };
                    (e, descriptor)
                }
            };
            records.push(EfficiencyRecord {
                implementation: implementation.to_owned(),
                platform: platform.clone(),
                e,
                baseline: Some(baseline),
                verified: best.is_verified(),
            });
        }
        let map: BTreeMap<String, f64> =
            records.iter().map(|r| (r.platform.clone(), r.e)).collect();
        let outcome = apply_metric(study.metric, &map, &study.h)?;
        scores.push(PortabilityScore {
            app: study.app.clone(),
            problem: study.problem.clone(),
            implementation: implementation.to_owned(),
            metric: study.metric,
            policy: study.policy.clone(),
            h: study.h.clone(),
            s: outcome.supported,
            value: outcome.value,
            per_platform: records,
        });
    }
    Ok(scores)
}

fn architectural(
    policy: &BaselinePolicy,
    catalog: &Catalog,
    platform_id: &str,
    achieved: f64,
) -> Result<(f64, BaselineDescriptor), EfficiencyError> {
    let platform = catalog
        .platform(platform_id)
        .ok_or_else(|| EfficiencyError::NoBaseline(platform_id.to_owned()))?;
    let missing = |field| EfficiencyError::MissingPeak { platform: platform_id.to_owned(), field };
    let (peak, source) = match policy {
        BaselinePolicy::ArchitecturalTheoretical => {
            (platform.peak_compute.ok_or_else(|| missing("peak_compute"))?, BaselineSource::TheoreticalPeak)
        }
        BaselinePolicy::ArchitecturalRoofline { arithmetic_intensity } => {
            let peak = match platform.attainable_peak {
                Some(p) => p,
                None => roofline_peak(
                    platform.peak_compute.ok_or_else(|| missing("peak_compute"))?,
                    platform.peak_mem_bw.ok_or_else(|| missing("peak_mem_bw"))?,
                    arithmetic_intensity.ok_or_else(|| missing("arithmetic_intensity"))?,
                )?,
            };
            (peak, BaselineSource::RooflinePeak)
        }
        other => return Err(EfficiencyError::NoBaseline(format!("{platform_id} under {}", other.kind()))),
    };
    let e = architectural_efficiency(achieved, peak)?;
    Ok((
        e,
        BaselineDescriptor { policy: policy.kind(), source, value: peak, units: "GFLOP/s".into() },
    ))
}
