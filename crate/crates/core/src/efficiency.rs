//! Baseline resolution and the two efficiency ratios.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BaselinePolicy, BaselineSource, Measurement, MeasurementKind, ProblemKey};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EfficiencyError {
    #[error("no measurements")]
    NoMeasurements,
    #[error("measurements mix kinds {0} and {1}")]
    MixedKinds(MeasurementKind, MeasurementKind),
    #[error("missing reference measurement: {implementation} has no measurement on {platform}")]
    MissingReferenceMeasurement { platform: String, implementation: String },
    #[error("no reference implementation declared for platform {0}")]
    NoReferenceDeclared(String),
    #[error("no baseline available on platform {0}")]
    NoBaseline(String),
    #[error("{0} baselines are derived from platform peaks, not measurements")]
    ArchitecturalPolicy(crate::model::PolicyKind),
    #[error("platform mismatch: measurement on {achieved}, baseline on {baseline}")]
    PlatformMismatch { achieved: String, baseline: String },
    #[error("{name} must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("platform {platform} is missing {field}")]
    MissingPeak { platform: String, field: &'static str },
}

/// The reference performance resolved for one platform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineValue {
    pub value: f64,
    pub kind: MeasurementKind,
    pub source: BaselineSource,
    pub platform: String,
}

/// Best of several measurements of the same pair: minimum runtime or
/// maximum throughput. Ties keep the earliest entry.
pub fn best_measurement<'a, I>(measurements: I) -> Result<&'a Measurement, EfficiencyError>
where
    I: IntoIterator<Item = &'a Measurement>,
{
    let mut iter = measurements.into_iter();
    let mut best = iter.next().ok_or(EfficiencyError::NoMeasurements)?;
    for m in iter {
        if m.kind != best.kind {
            return Err(EfficiencyError::MixedKinds(best.kind, m.kind));
        }
        if m.kind.better(m.value, best.value) {
            best = m;
        }
    }
    Ok(best)
}

fn best_on<'a>(
    measurements: &'a [Measurement],
    problem: &ProblemKey,
    platform: &str,
    implementation: Option<&str>,
) -> Result<&'a Measurement, EfficiencyError> {
    best_measurement(measurements.iter().filter(|m| {
        m.platform == platform
            && m.app == problem.app
            && m.problem == problem.problem
            && implementation.map_or(true, |i| m.implementation == i)
    }))
}

/// Resolves the measured baseline for `platform` under a ratio policy.
///
/// `study` holds the measurements of the study being scored; `repository`
/// holds everything known for the same problem. A fixed reference is looked
/// up in the study first and then in the repository.
pub fn resolve_baseline(
    policy: &BaselinePolicy,
    problem: &ProblemKey,
    platform: &str,
    study: &[Measurement],
    repository: &[Measurement],
) -> Result<BaselineValue, EfficiencyError> {
    let (best, source): (&Measurement, fn(String) -> BaselineSource) = match policy {
        BaselinePolicy::StudyLocalBest => (
            best_on(study, problem, platform, None)
                .map_err(|_| EfficiencyError::NoBaseline(platform.into()))?,
            BaselineSource::BestInStudy,
        ),
        BaselinePolicy::RepositoryBest => (
            best_on(repository, problem, platform, None)
                .map_err(|_| EfficiencyError::NoBaseline(platform.into()))?,
            BaselineSource::RepositoryBest,
        ),
        BaselinePolicy::FixedReference { references } => {
            let reference = references
                .get(platform)
                .ok_or_else(|| EfficiencyError::NoReferenceDeclared(platform.into()))?;
            let found = best_on(study, problem, platform, Some(reference))
                .or_else(|_| best_on(repository, problem, platform, Some(reference)))
                .map_err(|_| EfficiencyError::MissingReferenceMeasurement {
                    platform: platform.into(),
                    implementation: reference.clone(),
                })?;
            (found, BaselineSource::ReferenceImplementation)
        }
        BaselinePolicy::ArchitecturalTheoretical | BaselinePolicy::ArchitecturalRoofline { .. } => {
            return Err(EfficiencyError::ArchitecturalPolicy(policy.kind()))
        }
    };
    Ok(BaselineValue {
        value: best.value,
        kind: best.kind,
        source: source(best.implementation.clone()),
        platform: platform.to_owned(),
    })
}

/// Achieved performance as a fraction of the baseline. Runtimes divide the
/// other way round so that faster is always a larger fraction.
pub fn application_efficiency(
    achieved: &Measurement,
    baseline: &BaselineValue,
) -> Result<f64, EfficiencyError> {
    if achieved.platform != baseline.platform {
        return Err(EfficiencyError::PlatformMismatch {
            achieved: achieved.platform.clone(),
            baseline: baseline.platform.clone(),
        });
    }
    if achieved.kind != baseline.kind {
        return Err(EfficiencyError::MixedKinds(achieved.kind, baseline.kind));
    }
    positive("achieved", achieved.value)?;
    positive("baseline", baseline.value)?;
    Ok(if achieved.kind.lower_is_better() {
        baseline.value / achieved.value
    } else {
        achieved.value / baseline.value
    })
}

/// Achieved throughput over a peak throughput, both in GFLOP/s.
pub fn architectural_efficiency(achieved: f64, peak: f64) -> Result<f64, EfficiencyError> {
    positive("achieved throughput", achieved)?;
    positive("peak", peak)?;
    Ok(achieved / peak)
}

/// Attainable throughput of the roofline model at a given arithmetic
/// intensity (FLOP/byte).
pub fn roofline_peak(
    peak_compute: f64,
    peak_mem_bw: f64,
    arithmetic_intensity: f64,
) -> Result<f64, EfficiencyError> {
    positive("peak_compute", peak_compute)?;
    positive("peak_mem_bw", peak_mem_bw)?;
    positive("arithmetic_intensity", arithmetic_intensity)?;
    Ok(peak_compute.min(arithmetic_intensity * peak_mem_bw))
}

fn positive(name: &'static str, value: f64) -> Result<(), EfficiencyError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(EfficiencyError::NonPositive { name, value })
    }
}
