//! Domain types shared by the engine, the audits and the repository.
//!
//! Everything here is a plain value type. The only logic is validation:
//! [`validate_study`] reports every reason a study cannot be scored.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

/// Metadata keys every repository measurement is expected to disclose.
pub const PROVENANCE_KEYS: [&str; 3] = ["compiler", "compiler_flags", "input_size"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchClass {
    Cpu,
    Gpu,
    Other,
}

impl fmt::Display for ArchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArchClass::Cpu => "cpu",
            ArchClass::Gpu => "gpu",
            ArchClass::Other => "other",
        })
    }
}

impl FromStr for ArchClass {
    type Err = ParseEnumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cpu" => Ok(ArchClass::Cpu),
            "gpu" => Ok(ArchClass::Gpu),
            "other" => Ok(ArchClass::Other),
            _ => Err(ParseEnumError::new("arch_class", s)),
        }
    }
}

/// A hardware target. Peaks are optional and only needed by the
/// architectural policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Platform {
    pub id: String,
    #[serde(default)]
    pub vendor: String,
    pub arch_class: ArchClass,
    /// GFLOP/s
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_compute: Option<f64>,
    /// GB/s
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_mem_bw: Option<f64>,
    /// User-supplied roofline ceiling, GFLOP/s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attainable_peak: Option<f64>,
}

impl Platform {
    pub fn new(id: impl Into<String>, vendor: impl Into<String>, arch_class: ArchClass) -> Self {
        Platform {
            id: id.into(),
            vendor: vendor.into(),
            arch_class,
            peak_compute: None,
            peak_mem_bw: None,
            attainable_peak: None,
        }
    }

    pub fn with_peak_compute(mut self, gflops: f64) -> Self {
        self.peak_compute = Some(gflops);
        self
    }

    pub fn with_peak_mem_bw(mut self, gbs: f64) -> Self {
        self.peak_mem_bw = Some(gbs);
        self
    }

    pub fn with_attainable_peak(mut self, gflops: f64) -> Self {
        self.attainable_peak = Some(gflops);
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("platform id must be non-empty".into());
        }
        for (name, v) in [
            ("peak_compute", self.peak_compute),
            ("peak_mem_bw", self.peak_mem_bw),
            ("attainable_peak", self.attainable_peak),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(format!("platform {}: {name} must be strictly positive", self.id));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PortabilityClass {
    #[default]
    PortableFramework,
    LowLevelNonportable,
}

impl FromStr for PortabilityClass {
    type Err = ParseEnumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "portable_framework" | "portable" => Ok(PortabilityClass::PortableFramework),
            "low_level_nonportable" | "low_level" => Ok(PortabilityClass::LowLevelNonportable),
            _ => Err(ParseEnumError::new("portability_class", s)),
        }
    }
}

/// One implementation of an application in a programming model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Implementation {
    pub id: String,
    pub app: String,
    pub model: String,
    #[serde(default)]
    pub portability_class: PortabilityClass,
}

impl Implementation {
    pub fn portable(app: impl Into<String>, id: impl Into<String>) -> Self {
        let id = id.into();
        Implementation {
            model: id.clone(),
            id,
            app: app.into(),
            portability_class: PortabilityClass::PortableFramework,
        }
    }

    pub fn low_level(app: impl Into<String>, id: impl Into<String>) -> Self {
        Implementation {
            portability_class: PortabilityClass::LowLevelNonportable,
            ..Implementation::portable(app, id)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProblemKey {
    pub app: String,
    pub problem: String,
}

impl ProblemKey {
    pub fn new(app: impl Into<String>, problem: impl Into<String>) -> Self {
        ProblemKey { app: app.into(), problem: problem.into() }
    }
}

impl fmt::Display for ProblemKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.app, self.problem)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub app: String,
    pub problem: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_size: Option<String>,
}

impl ProblemSpec {
    pub fn key(&self) -> ProblemKey {
        ProblemKey::new(&self.app, &self.problem)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementKind {
    RuntimeSeconds,
    ThroughputGflops,
    ThroughputCustom,
}

impl MeasurementKind {
    /// Runtimes improve downwards, throughputs upwards.
    pub fn lower_is_better(self) -> bool {
        matches!(self, MeasurementKind::RuntimeSeconds)
    }

    pub fn units(self) -> &'static str {
        match self {
            MeasurementKind::RuntimeSeconds => "s",
            MeasurementKind::ThroughputGflops => "GFLOP/s",
            MeasurementKind::ThroughputCustom => "custom",
        }
    }

    /// True when `candidate` is strictly better than `incumbent`.
    pub fn better(self, candidate: f64, incumbent: f64) -> bool {
        if self.lower_is_better() {
            candidate < incumbent
        } else {
            candidate > incumbent
        }
    }
}

impl fmt::Display for MeasurementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeasurementKind::RuntimeSeconds => "runtime_seconds",
            MeasurementKind::ThroughputGflops => "throughput_gflops",
            MeasurementKind::ThroughputCustom => "throughput_custom",
        })
    }
}

impl FromStr for MeasurementKind {
    type Err = ParseEnumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "runtime_seconds" => Ok(MeasurementKind::RuntimeSeconds),
            "throughput_gflops" => Ok(MeasurementKind::ThroughputGflops),
            "throughput_custom" => Ok(MeasurementKind::ThroughputCustom),
            _ => Err(ParseEnumError::new("kind", s)),
        }
    }
}

/// One reported observation of an implementation on a platform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub app: String,
    pub problem: String,
    pub implementation: String,
    pub platform: String,
    pub kind: MeasurementKind,
    pub value: f64,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl Measurement {
    pub fn new(
        app: impl Into<String>,
        problem: impl Into<String>,
        implementation: impl Into<String>,
        platform: impl Into<String>,
        kind: MeasurementKind,
        value: f64,
    ) -> Self {
        Measurement {
            app: app.into(),
            problem: problem.into(),
            implementation: implementation.into(),
            platform: platform.into(),
            kind,
            value,
            meta: BTreeMap::new(),
        }
    }

    pub fn runtime(
        app: &str,
        problem: &str,
        implementation: &str,
        platform: &str,
        seconds: f64,
    ) -> Self {
        Measurement::new(app, problem, implementation, platform, MeasurementKind::RuntimeSeconds, seconds)
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }

    pub fn problem_key(&self) -> ProblemKey {
        ProblemKey::new(&self.app, &self.problem)
    }

    /// All provenance keys present and non-empty.
    pub fn is_verified(&self) -> bool {
        PROVENANCE_KEYS
            .iter()
            .all(|k| self.meta.get(*k).is_some_and(|v| !v.trim().is_empty()))
    }

    pub fn same_pair(&self, other: &Measurement) -> bool {
        self.app == other.app
            && self.problem == other.problem
            && self.implementation == other.implementation
            && self.platform == other.platform
    }

    /// Exact duplicate: same pair, bit-identical value and identical metadata.
    pub fn is_duplicate_of(&self, other: &Measurement) -> bool {
        self.same_pair(other)
            && self.kind == other.kind
            && self.value.to_bits() == other.value.to_bits()
            && self.meta == other.meta
    }

    pub fn validate_value(&self) -> Result<(), String> {
        if self.value.is_finite() && self.value > 0.0 {
            Ok(())
        } else {
            Err(format!("value must be strictly positive, got {}", self.value))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    StudyLocalBest,
    FixedReference,
    RepositoryBest,
    ArchitecturalTheoretical,
    ArchitecturalRoofline,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::StudyLocalBest,
        PolicyKind::FixedReference,
        PolicyKind::RepositoryBest,
        PolicyKind::ArchitecturalTheoretical,
        PolicyKind::ArchitecturalRoofline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::StudyLocalBest => "study_local_best",
            PolicyKind::FixedReference => "fixed_reference",
            PolicyKind::RepositoryBest => "repository_best",
            PolicyKind::ArchitecturalTheoretical => "architectural_theoretical",
            PolicyKind::ArchitecturalRoofline => "architectural_roofline",
        }
    }

    pub fn is_architectural(self) -> bool {
        matches!(self, PolicyKind::ArchitecturalTheoretical | PolicyKind::ArchitecturalRoofline)
    }

    /// Policies whose per-platform baseline cannot move when other
    /// implementations are added.
    pub fn is_baseline_stable(self) -> bool {
        matches!(
            self,
            PolicyKind::FixedReference
                | PolicyKind::ArchitecturalTheoretical
                | PolicyKind::ArchitecturalRoofline
        )
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = ParseEnumError;

    /// Accepts the canonical names plus the short CLI spellings.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "study_local_best" | "study-best" | "study-local-best" => Ok(PolicyKind::StudyLocalBest),
            "fixed_reference" | "fixed-ref" | "fixed-reference" => Ok(PolicyKind::FixedReference),
            "repository_best" | "repo-best" | "repository-best" => Ok(PolicyKind::RepositoryBest),
            "architectural_theoretical" | "arch-theoretical" => {
                Ok(PolicyKind::ArchitecturalTheoretical)
            }
            "architectural_roofline" | "arch-roofline" => Ok(PolicyKind::ArchitecturalRoofline),
            _ => Err(ParseEnumError::new("policy", s)),
        }
    }
}

/// The rule selecting the reference performance on each platform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum BaselinePolicy {
    StudyLocalBest,
    /// Platform id -> reference implementation id.
    FixedReference { references: BTreeMap<String, String> },
    RepositoryBest,
    ArchitecturalTheoretical,
    /// Without an `attainable_peak` on the platform, the ceiling is derived
    /// from its compute and bandwidth peaks at this arithmetic intensity
    /// (FLOP/byte).
    ArchitecturalRoofline {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arithmetic_intensity: Option<f64>,
    },
}

impl BaselinePolicy {
    pub fn kind(&self) -> PolicyKind {
        match self {
            BaselinePolicy::StudyLocalBest => PolicyKind::StudyLocalBest,
            BaselinePolicy::FixedReference { .. } => PolicyKind::FixedReference,
            BaselinePolicy::RepositoryBest => PolicyKind::RepositoryBest,
            BaselinePolicy::ArchitecturalTheoretical => PolicyKind::ArchitecturalTheoretical,
            BaselinePolicy::ArchitecturalRoofline { .. } => PolicyKind::ArchitecturalRoofline,
        }
    }

    pub fn fixed_reference<I, K, V>(refs: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        BaselinePolicy::FixedReference {
            references: refs.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
        }
    }

    pub fn reference_for(&self, platform: &str) -> Option<&str> {
        match self {
            BaselinePolicy::FixedReference { references } => {
                references.get(platform).map(String::as_str)
            }
            _ => None,
        }
    }

    pub fn is_reference_implementation(&self, implementation: &str) -> bool {
        match self {
            BaselinePolicy::FixedReference { references } => {
                references.values().any(|r| r == implementation)
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ArithmeticMean,
    HarmonicMean,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::ArithmeticMean => "arithmetic_mean",
            Metric::HarmonicMean => "harmonic_mean",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = ParseEnumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "arithmetic_mean" | "arithmetic" | "pbar" => Ok(Metric::ArithmeticMean),
            "harmonic_mean" | "harmonic" => Ok(Metric::HarmonicMean),
            _ => Err(ParseEnumError::new("metric", s)),
        }
    }
}

/// Where a resolved baseline came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "implementation", rename_all = "snake_case")]
pub enum BaselineSource {
    BestInStudy(String),
    ReferenceImplementation(String),
    RepositoryBest(String),
    TheoreticalPeak,
    RooflinePeak,
}

impl fmt::Display for BaselineSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaselineSource::BestInStudy(id) => write!(f, "best_in_study({id})"),
            BaselineSource::ReferenceImplementation(id) => write!(f, "reference_implementation({id})"),
            BaselineSource::RepositoryBest(id) => write!(f, "repository_best({id})"),
            BaselineSource::TheoreticalPeak => f.write_str("theoretical_peak"),
            BaselineSource::RooflinePeak => f.write_str("roofline_peak"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineDescriptor {
    pub policy: PolicyKind,
    pub source: BaselineSource,
    pub value: f64,
    pub units: String,
}

/// Efficiency of one implementation on one platform. `e == 0` means the
/// pair is unsupported and carries no baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRecord {
    pub implementation: String,
    pub platform: String,
    pub e: f64,
    pub baseline: Option<BaselineDescriptor>,
    /// False when the measurement behind `e` lacks provenance metadata.
    pub verified: bool,
}

impl EfficiencyRecord {
    pub fn unsupported(implementation: &str, platform: &str) -> Self {
        EfficiencyRecord {
            implementation: implementation.to_owned(),
            platform: platform.to_owned(),
            e: 0.0,
            baseline: None,
            verified: true,
        }
    }

    pub fn is_supported(&self) -> bool {
        self.e > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortabilityScore {
    pub app: String,
    pub problem: String,
    pub implementation: String,
    pub metric: Metric,
    pub policy: BaselinePolicy,
    pub h: Vec<String>,
    pub s: Vec<String>,
    pub value: f64,
    /// One record per platform of `h`, in `h` order.
    pub per_platform: Vec<EfficiencyRecord>,
}

impl PortabilityScore {
    pub fn efficiency(&self, platform: &str) -> Option<f64> {
        self.per_platform.iter().find(|r| r.platform == platform).map(|r| r.e)
    }

    pub fn record(&self, platform: &str) -> Option<&EfficiencyRecord> {
        self.per_platform.iter().find(|r| r.platform == platform)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyDefinition {
    pub app: String,
    pub problem: String,
    /// Ordered platform set of interest.
    pub h: Vec<String>,
    pub policy: BaselinePolicy,
    pub metric: Metric,
}

impl StudyDefinition {
    pub fn new(
        app: impl Into<String>,
        problem: impl Into<String>,
        h: impl IntoIterator<Item = impl Into<String>>,
        policy: BaselinePolicy,
        metric: Metric,
    ) -> Self {
        StudyDefinition {
            app: app.into(),
            problem: problem.into(),
            h: h.into_iter().map(Into::into).collect(),
            policy,
            metric,
        }
    }

    pub fn problem_key(&self) -> ProblemKey {
        ProblemKey::new(&self.app, &self.problem)
    }

    /// Identity of a study inside a repository.
    pub fn key(&self) -> String {
        let mut key = format!("{}/{}/{}/{}", self.app, self.problem, self.policy.kind(), self.metric);
        if let BaselinePolicy::FixedReference { references } = &self.policy {
            let refs: Vec<String> = references.iter().map(|(p, i)| format!("{p}={i}")).collect();
            key.push_str(&format!("[{}]", refs.join(",")));
        }
        key
    }

    /// Same shape: everything but the measurements agrees.
    pub fn same_shape(&self, other: &StudyDefinition) -> bool {
        self == other
    }
}

/// Platforms, implementations and problems known to a scoring run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub platforms: IndexMap<String, Platform>,
    /// Keyed by `(app, implementation id)`; insertion order is display order.
    pub implementations: Vec<Implementation>,
    pub problems: Vec<ProblemSpec>,
}

impl Catalog {
    pub fn platform(&self, id: &str) -> Option<&Platform> {
        self.platforms.get(id)
    }

    pub fn implementation(&self, app: &str, id: &str) -> Option<&Implementation> {
        self.implementations.iter().find(|i| i.app == app && i.id == id)
    }

    pub fn problem(&self, key: &ProblemKey) -> Option<&ProblemSpec> {
        self.problems.iter().find(|p| p.app == key.app && p.problem == key.problem)
    }

    pub fn implementations_of<'a>(&'a self, app: &'a str) -> impl Iterator<Item = &'a Implementation> {
        self.implementations.iter().filter(move |i| i.app == app)
    }

    pub fn add_platform(&mut self, platform: Platform) {
        self.platforms.insert(platform.id.clone(), platform);
    }

    /// Registers the implementation unless `(app, id)` is already known.
    pub fn add_implementation(&mut self, implementation: Implementation) {
        if self.implementation(&implementation.app, &implementation.id).is_none() {
            self.implementations.push(implementation);
        }
    }

    pub fn add_problem(&mut self, problem: ProblemSpec) {
        if self.problem(&problem.key()).is_none() {
            self.problems.push(problem);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum Violation {
    EmptyPlatformSet,
    DuplicatePlatform { platform: String },
    UnknownPlatform { platform: String },
    UnknownImplementation { implementation: String },
    MixedMeasurementKinds { kinds: Vec<MeasurementKind> },
    NonPositiveValue { implementation: String, platform: String },
    MissingReference { platform: String },
    MissingPeak { platform: String, field: String },
    UnsupportedKindForPolicy { kind: MeasurementKind, policy: PolicyKind },
    InvalidIntensity,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyPlatformSet => f.write_str("empty platform set"),
            Violation::DuplicatePlatform { platform } => {
                write!(f, "platform {platform} appears more than once in the platform set")
            }
            Violation::UnknownPlatform { platform } => write!(f, "unknown platform {platform}"),
            Violation::UnknownImplementation { implementation } => {
                write!(f, "unknown implementation {implementation}")
            }
            Violation::MixedMeasurementKinds { kinds } => {
                let kinds: Vec<String> = kinds.iter().map(ToString::to_string).collect();
                write!(f, "mixed measurement kinds in one study: {}", kinds.join(", "))
            }
            Violation::NonPositiveValue { implementation, platform } => {
                write!(f, "non-positive measurement for {implementation} on {platform}")
            }
            Violation::MissingReference { platform } => {
                write!(f, "no reference implementation declared for platform {platform}")
            }
            Violation::MissingPeak { platform, field } => {
                write!(f, "platform {platform} is missing {field}")
            }
            Violation::UnsupportedKindForPolicy { kind, policy } => {
                write!(f, "{policy} cannot be computed from {kind} measurements")
            }
            Violation::InvalidIntensity => f.write_str("arithmetic intensity must be strictly positive"),
        }
    }
}

/// Every reason `study` cannot be scored against `measurements`.
/// An empty list means the study is valid. Measurements for other
/// problems are ignored.
pub fn validate_study(
    study: &StudyDefinition,
    catalog: &Catalog,
    measurements: &[Measurement],
) -> Vec<Violation> {
    let mut out = Vec::new();
    if study.h.is_empty() {
        out.push(Violation::EmptyPlatformSet);
    }
    let mut seen = BTreeSet::new();
    for p in &study.h {
        if !seen.insert(p.as_str()) {
            out.push(Violation::DuplicatePlatform { platform: p.clone() });
        }
    }
    for p in seen.iter().copied() {
        if catalog.platform(p).is_none() {
            out.push(Violation::UnknownPlatform { platform: p.to_owned() });
        }
    }

    let key = study.problem_key();
    let relevant: Vec<&Measurement> =
        measurements.iter().filter(|m| m.problem_key() == key).collect();

    let mut kinds: Vec<MeasurementKind> = Vec::new();
    for m in &relevant {
        if !kinds.contains(&m.kind) {
            kinds.push(m.kind);
        }
        if m.validate_value().is_err() {
            out.push(Violation::NonPositiveValue {
                implementation: m.implementation.clone(),
                platform: m.platform.clone(),
            });
        }
    }
    if kinds.len() > 1 {
        out.push(Violation::MixedMeasurementKinds { kinds: kinds.clone() });
    }
    let mut unknown_impls = BTreeSet::new();
    for m in &relevant {
        if catalog.implementation(&m.app, &m.implementation).is_none() {
            unknown_impls.insert(m.implementation.clone());
        }
    }
    out.extend(
        unknown_impls
            .into_iter()
            .map(|implementation| Violation::UnknownImplementation { implementation }),
    );

    let policy = study.policy.kind();
    match &study.policy {
        BaselinePolicy::FixedReference { references } => {
            for p in &study.h {
                if !references.contains_key(p) {
                    out.push(Violation::MissingReference { platform: p.clone() });
                }
            }
        }
        BaselinePolicy::ArchitecturalTheoretical => {
            for p in study.h.iter().filter_map(|id| catalog.platform(id)) {
                if p.peak_compute.is_none() {
                    out.push(Violation::MissingPeak {
                        platform: p.id.clone(),
                        field: "peak_compute".into(),
                    });
                }
            }
        }
        BaselinePolicy::ArchitecturalRoofline { arithmetic_intensity } => {
            if arithmetic_intensity.is_some_and(|ai| !(ai.is_finite() && ai > 0.0)) {
                out.push(Violation::InvalidIntensity);
            }
            for p in study.h.iter().filter_map(|id| catalog.platform(id)) {
                if p.attainable_peak.is_some() {
                    continue;
                }
                let mut missing = Vec::new();
                if p.peak_compute.is_none() {
                    missing.push("peak_compute");
                }
                if p.peak_mem_bw.is_none() {
                    missing.push("peak_mem_bw");
                }
                if arithmetic_intensity.is_none() {
                    missing.push("arithmetic_intensity");
                }
                if !missing.is_empty() {
                    out.push(Violation::MissingPeak {
                        platform: p.id.clone(),
                        field: format!("attainable_peak (or {})", missing.join(" + ")),
                    });
                }
            }
        }
        BaselinePolicy::StudyLocalBest | BaselinePolicy::RepositoryBest => {}
    }
    if policy.is_architectural() {
        for kind in kinds.iter().filter(|k| **k != MeasurementKind::ThroughputGflops) {
            out.push(Violation::UnsupportedKindForPolicy { kind: *kind, policy });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {field} value {value:?}")]
pub struct ParseEnumError {
    pub field: &'static str,
    pub value: String,
}

impl ParseEnumError {
    fn new(field: &'static str, value: &str) -> Self {
        ParseEnumError { field, value: value.to_owned() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn three_models_study_is_valid() {
        let (catalog, ms) = fixtures::three_models();
        let study = fixtures::gpu_study(BaselinePolicy::StudyLocalBest, Metric::ArithmeticMean);
        assert_eq!(validate_study(&study, &catalog, &ms), vec![]);
    }

    #[test]
    fn empty_platform_set_is_reported() {
        let (catalog, ms) = fixtures::three_models();
        let mut study = fixtures::gpu_study(BaselinePolicy::StudyLocalBest, Metric::ArithmeticMean);
        study.h.clear();
        assert_eq!(validate_study(&study, &catalog, &ms), vec![Violation::EmptyPlatformSet]);
        assert_eq!(Violation::EmptyPlatformSet.to_string(), "empty platform set");
    }

    #[test]
    fn theoretical_policy_names_platform_without_peak() {
        let (mut catalog, ms) = fixtures::three_models();
        for p in catalog.platforms.values_mut() {
            p.peak_compute = Some(1000.0);
        }
        catalog.platforms.get_mut("P100").unwrap().peak_compute = None;
        let study =
            fixtures::gpu_study(BaselinePolicy::ArchitecturalTheoretical, Metric::ArithmeticMean);
        let v = validate_study(&study, &catalog, &ms);
        assert!(v.contains(&Violation::MissingPeak {
            platform: "P100".into(),
            field: "peak_compute".into()
        }));
        // runtimes cannot feed an architectural ratio either
        assert!(v.iter().any(|v| matches!(v, Violation::UnsupportedKindForPolicy { .. })));
    }

    #[test]
    fn fixed_reference_must_cover_every_platform() {
        let (catalog, ms) = fixtures::with_references();
        let study = fixtures::gpu_study(
            BaselinePolicy::fixed_reference([("A100", "CUDA"), ("P100", "CUDA")]),
            Metric::ArithmeticMean,
        );
        assert_eq!(
            validate_study(&study, &catalog, &ms),
            vec![Violation::MissingReference { platform: "MI250".into() }]
        );
    }

    #[test]
    fn mixed_kinds_unknown_and_duplicate_platforms() {
        let (catalog, mut ms) = fixtures::three_models();
        ms.push(Measurement::new(
            fixtures::APP,
            fixtures::PROBLEM,
            "OpenMP",
            "A100",
            MeasurementKind::ThroughputGflops,
            10.0,
        ));
        let mut study = fixtures::gpu_study(BaselinePolicy::StudyLocalBest, Metric::ArithmeticMean);
        study.h = vec!["A100".into(), "A100".into(), "H100".into()];
        let v = validate_study(&study, &catalog, &ms);
        assert!(v.contains(&Violation::DuplicatePlatform { platform: "A100".into() }));
        assert!(v.contains(&Violation::UnknownPlatform { platform: "H100".into() }));
        assert!(v.iter().any(|v| matches!(v, Violation::MixedMeasurementKinds { .. })));
    }

    #[test]
    fn roofline_accepts_attainable_peak_or_derivable_ceiling() {
        let (mut catalog, _) = fixtures::three_models();
        for p in catalog.platforms.values_mut() {
            p.peak_compute = Some(1000.0);
            p.peak_mem_bw = Some(100.0);
        }
        let study = fixtures::gpu_study(
            BaselinePolicy::ArchitecturalRoofline { arithmetic_intensity: None },
            Metric::ArithmeticMean,
        );
        assert_eq!(validate_study(&study, &catalog, &[]).len(), 3);
        let study = fixtures::gpu_study(
            BaselinePolicy::ArchitecturalRoofline { arithmetic_intensity: Some(4.0) },
            Metric::ArithmeticMean,
        );
        assert!(validate_study(&study, &catalog, &[]).is_empty());
    }

    #[test]
    fn provenance_keys_decide_verification() {
        let m = Measurement::runtime("a", "p", "i", "x", 1.0);
        assert!(!m.is_verified());
        let m = m
            .with_meta("compiler", "nvc++ 23.1")
            .with_meta("compiler_flags", "-O3")
            .with_meta("input_size", "3840^2");
        assert!(m.is_verified());
    }

    #[test]
    fn policy_names_parse_in_both_spellings() {
        for k in PolicyKind::ALL {
            assert_eq!(k.as_str().parse::<PolicyKind>().unwrap(), k);
        }
        assert_eq!("fixed-ref".parse::<PolicyKind>().unwrap(), PolicyKind::FixedReference);
        assert!("bogus".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn platform_rejects_nonpositive_peaks() {
        assert!(Platform::new("X", "v", ArchClass::Cpu).with_peak_compute(0.0).validate().is_err());
        assert!(Platform::new("", "v", ArchClass::Cpu).validate().is_err());
        assert!(Platform::new("X", "v", ArchClass::Cpu).with_peak_mem_bw(5.0).validate().is_ok());
    }
}
