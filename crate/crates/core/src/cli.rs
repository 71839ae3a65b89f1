//! The `ppmetrics` command line.
//!
//! Exit codes: 0 success, 1 parse error, 2 validation error, 3 audit found
//! violations.

use std::collections::BTreeMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::audit::{
    check_criterion4, check_criterion5, check_mixed_arch, check_reference_dominance,
    diff_snapshots, AuditReport, Snapshot,
};
use crate::input::{read_measurements_file, read_platforms_file, Dataset, InputError};
use crate::metrics::{score_study, ScoreError};
use crate::model::{
    BaselinePolicy, Measurement, Metric, Platform, PolicyKind, ProblemKey, StudyDefinition,
};
use crate::render::{
    finding_views, render_csv, render_diff_table, render_findings, render_json, render_table,
};
use crate::store::{Payload, Store, StoreError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_VIOLATIONS: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ppmetrics", version, about = "Performance-portability metrics and audits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score a measurement file: efficiency matrix plus one score column.
    Compute(ComputeArgs),
    /// Compare two measurement files and report criterion violations.
    Audit(AuditArgs),
    /// Bulk-ingest a measurement file into a repository.
    Import(ImportArgs),
    /// Serve a repository over HTTP.
    Serve(ServeArgs),
    /// Render the scores stored in a repository.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct StudyArgs {
    /// study-best, fixed-ref, repo-best, arch-theoretical or arch-roofline
    #[arg(long, default_value = "study-best")]
    pub policy: String,
    /// arithmetic or harmonic
    #[arg(long, default_value = "arithmetic")]
    pub metric: String,
    /// Ordered platform set, comma separated. Defaults to the platforms of
    /// the data in order of appearance.
    #[arg(long, value_delimiter = ',')]
    pub platforms: Option<Vec<String>>,
    /// Fixed references as PLATFORM=IMPLEMENTATION pairs.
    #[arg(long, value_delimiter = ',')]
    pub reference: Vec<String>,
    /// Platform descriptions with peaks (id,vendor,arch_class,peak_compute,peak_mem_bw,attainable_peak).
    #[arg(long)]
    pub platform_file: Option<PathBuf>,
    /// Arithmetic intensity in FLOP/byte for arch-roofline.
    #[arg(long)]
    pub intensity: Option<f64>,
    /// Additional measurements searched for repository-wide and reference baselines.
    #[arg(long)]
    pub repository: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ComputeArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub study: StudyArgs,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub before: PathBuf,
    #[arg(long)]
    pub after: PathBuf,
    #[command(flatten)]
    pub study: StudyArgs,
    /// Also print the after-state matrix with superseded values struck through.
    #[arg(long)]
    pub diff: bool,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct ImportArgs {
    pub file: PathBuf,
    #[arg(long, env = "PPMETRICS_STORE")]
    pub store: PathBuf,
    #[arg(long)]
    pub platform_file: Option<PathBuf>,
    /// Also define a study over the imported problem with this policy.
    #[arg(long)]
    pub define_policy: Option<String>,
    #[arg(long, default_value = "arithmetic")]
    pub metric: String,
    #[arg(long, value_delimiter = ',')]
    pub platforms: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub reference: Vec<String>,
    #[arg(long)]
    pub intensity: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, env = "PPMETRICS_STORE")]
    pub store: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[arg(long, env = "PPMETRICS_STORE")]
    pub store: PathBuf,
    #[arg(long)]
    pub app: String,
    #[arg(long)]
    pub problem: String,
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

/// Captured result of one command.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome { code: EXIT_OK, stdout, stderr: String::new() }
    }

    fn fail(code: i32, message: impl Into<String>) -> Self {
        let mut stderr = message.into();
        if !stderr.ends_with('\n') {
            stderr.push('\n');
        }
        Outcome { code, stdout: String::new(), stderr }
    }

    fn warn(mut self, warnings: &[String]) -> Self {
        let mut head: String = warnings.iter().map(|w| format!("warning: {w}\n")).collect();
        head.push_str(&self.stderr);
        self.stderr = head;
        self
    }
}

fn parse_references(pairs: &[String]) -> Result<BTreeMap<String, String>, String> {
    pairs
        .iter()
        .filter(|p| !p.trim().is_empty())
        .map(|p| match p.split_once('=') {
            Some((plat, imp)) if !plat.trim().is_empty() && !imp.trim().is_empty() => {
                Ok((plat.trim().to_owned(), imp.trim().to_owned()))
            }
            _ => Err(format!("reference {p:?} is not PLATFORM=IMPLEMENTATION")),
        })
        .collect()
}

fn build_policy(
    policy: &str,
    references: &[String],
    intensity: Option<f64>,
) -> Result<BaselinePolicy, String> {
    let kind: PolicyKind = policy.parse().map_err(|e: crate::model::ParseEnumError| e.to_string())?;
    Ok(match kind {
        PolicyKind::StudyLocalBest => BaselinePolicy::StudyLocalBest,
        PolicyKind::RepositoryBest => BaselinePolicy::RepositoryBest,
        PolicyKind::ArchitecturalTheoretical => BaselinePolicy::ArchitecturalTheoretical,
        PolicyKind::ArchitecturalRoofline => {
            BaselinePolicy::ArchitecturalRoofline { arithmetic_intensity: intensity }
        }
        PolicyKind::FixedReference => {
            let references = parse_references(references)?;
            if references.is_empty() {
                return Err("fixed-ref needs --reference PLATFORM=IMPLEMENTATION,...".into());
            }
            BaselinePolicy::FixedReference { references }
        }
    })
}

/// Inputs of a scoring run loaded from disk.
struct Loaded {
    data: Dataset,
    repository: Vec<Measurement>,
    study: StudyDefinition,
    warnings: Vec<String>,
}

fn load(input: &Path, args: &StudyArgs) -> Result<Loaded, Outcome> {
    let parse_fail = |e: InputError| Outcome::fail(EXIT_PARSE, format!("error: {e}"));
    let policy = build_policy(&args.policy, &args.reference, args.intensity)
        .map_err(|e| Outcome::fail(EXIT_PARSE, format!("error: {e}")))?;
    let metric: Metric =
        args.metric.parse().map_err(|e: crate::model::ParseEnumError| Outcome::fail(EXIT_PARSE, format!("error: {e}")))?;
    let mut data = read_measurements_file(input).map_err(parse_fail)?;
    if let Some(pf) = &args.platform_file {
        let platforms: Vec<Platform> = read_platforms_file(pf).map_err(parse_fail)?;
        data = data.with_platforms(&platforms);
    }
    let mut repository = data.measurements();
    if let Some(repo) = &args.repository {
        let extra = read_measurements_file(repo).map_err(parse_fail)?;
        data.merge_catalog(&extra);
        repository.extend(extra.measurements());
    }
    let keys: Vec<ProblemKey> = {
        let mut ks: Vec<ProblemKey> = Vec::new();
        for r in &data.rows {
            let k = ProblemKey::new(&r.app, &r.problem);
            if !ks.contains(&k) {
                ks.push(k);
            }
        }
        ks
    };
    let key = match keys.as_slice() {
        [k] => k.clone(),
        [] => return Err(Outcome::fail(EXIT_INVALID, "error: input holds no measurements")),
        _ => {
            let names: Vec<String> = keys.iter().map(ToString::to_string).collect();
            return Err(Outcome::fail(
                EXIT_INVALID,
                format!("error: input mixes several problems ({})", names.join(", ")),
            ));
        }
    };
    let order = data.platform_order();
    let h = args.platforms.clone().unwrap_or_else(|| order.clone());
    let ignored: Vec<&String> = order.iter().filter(|p| !h.contains(p)).collect();
    let mut warnings = Vec::new();
    if !ignored.is_empty() {
        let names: Vec<&str> = ignored.iter().map(|s| s.as_str()).collect();
        warnings.push(format!("ignoring platforms outside the platform set: {}", names.join(", ")));
    }
    let study = StudyDefinition { app: key.app, problem: key.problem, h, policy, metric };
    Ok(Loaded { data, repository, study, warnings })
}

fn score_failure(e: ScoreError) -> Outcome {
    match e {
        ScoreError::Invalid(violations) => {
            let lines: Vec<String> = violations.iter().map(|v| format!("error: {v}")).collect();
            Outcome::fail(EXIT_INVALID, lines.join("\n"))
        }
        other => Outcome::fail(EXIT_INVALID, format!("error: {other}")),
    }
}

pub fn compute(args: &ComputeArgs) -> Outcome {
    let loaded = match load(&args.input, &args.study) {
        Ok(l) => l,
        Err(o) => return o,
    };
    let ms = loaded.data.measurements();
    let scores = match score_study(&loaded.study, &loaded.data.catalog, &ms, &loaded.repository) {
        Ok(s) => s,
        Err(e) => return score_failure(e).warn(&loaded.warnings),
    };
    let h = &loaded.study.h;
    let body = match args.format {
        Format::Table => render_table(&scores, h, loaded.study.metric),
        Format::Csv => render_csv(&scores, h, loaded.study.metric),
        Format::Json => render_json(&scores) + "\n",
    };
    Outcome::ok(body).warn(&loaded.warnings)
}

pub fn audit(args: &AuditArgs) -> Outcome {
    let before = match load(&args.before, &args.study) {
        Ok(l) => l,
        Err(o) => return o,
    };
    let mut after = match load(&args.after, &args.study) {
        Ok(l) => l,
        Err(o) => return o,
    };
    if args.study.platforms.is_none() {
        // both sides must share one platform set
        after.study.h = before.study.h.clone();
        for p in after.data.platform_order() {
            if !after.study.h.contains(&p) {
                after.study.h.push(p);
            }
        }
        let mut widened = before.study.clone();
        widened.h = after.study.h.clone();
        return run_audit(args, Loaded { study: widened, ..before }, after);
    }
    run_audit(args, before, after)
}

fn run_audit(args: &AuditArgs, before: Loaded, after: Loaded) -> Outcome {
    if !before.study.same_shape(&after.study) {
        return Outcome::fail(
            EXIT_INVALID,
            format!("error: files describe different studies ({} vs {})", before.study.key(), after.study.key()),
        );
    }
    let snap = |l: &Loaded| {
        Snapshot::score_with_repository(&l.study, &l.data.catalog, &l.data.measurements(), &l.repository)
    };
    let (b, a) = match (snap(&before), snap(&after)) {
        (Ok(b), Ok(a)) => (b, a),
        (Err(e), _) | (_, Err(e)) => return score_failure(e),
    };
    let changes = match diff_snapshots(&b, &a) {
        Ok(c) => c,
        Err(e) => return Outcome::fail(EXIT_INVALID, format!("error: {e}")),
    };
    let mut report = AuditReport::default();
    report.extend(check_criterion4(&changes));
    report.extend(check_criterion5(&changes));
    report.extend(check_mixed_arch(&after.study, &after.data.catalog));
    if after.study.policy.kind() == PolicyKind::FixedReference {
        report.extend(check_reference_dominance(
            &after.study,
            &after.data.catalog,
            &after.data.measurements(),
            &after.repository,
        ));
    }
    let mut body = String::new();
    match args.format {
        Format::Json => {
            body = serde_json::to_string_pretty(&finding_views(&report)).expect("findings serialize") + "\n";
        }
        Format::Table | Format::Csv => {
            if args.diff {
                body.push_str(&render_diff_table(&changes));
                body.push('\n');
            }
            body.push_str(&render_findings(&report));
        }
    }
    let mut warnings = before.warnings;
    warnings.extend(after.warnings);
    let code = if report.has_violations() { EXIT_VIOLATIONS } else { EXIT_OK };
    Outcome { code, stdout: body, stderr: String::new() }.warn(&warnings)
}

pub fn import(args: &ImportArgs) -> Outcome {
    let fail = |code, msg: String| Outcome::fail(code, format!("error: {msg}"));
    let mut data = match read_measurements_file(&args.file) {
        Ok(d) => d,
        Err(e) => return fail(EXIT_PARSE, e.to_string()),
    };
    if let Some(pf) = &args.platform_file {
        match read_platforms_file(pf) {
            Ok(ps) => data = data.with_platforms(&ps),
            Err(e) => return fail(EXIT_PARSE, e.to_string()),
        }
    }
    let study = match &args.define_policy {
        None => None,
        Some(p) => {
            let policy = match build_policy(p, &args.reference, args.intensity) {
                Ok(p) => p,
                Err(e) => return fail(EXIT_PARSE, e),
            };
            let metric: Metric = match args.metric.parse() {
                Ok(m) => m,
                Err(e) => return fail(EXIT_PARSE, format!("{e}")),
            };
            let Some(first) = data.rows.first() else {
                return fail(EXIT_INVALID, "input holds no measurements".into());
            };
            let h = args.platforms.clone().unwrap_or_else(|| data.platform_order());
            Some(StudyDefinition::new(&first.app, &first.problem, h, policy, metric))
        }
    };
    let mut store = match Store::open(&args.store) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_INVALID, e.to_string()),
    };

    let state = store.state();
    let mut payloads = Vec::new();
    // line number per payload; None for catalog entries
    let mut lines: Vec<Option<u64>> = Vec::new();
    for p in data.catalog.platforms.values() {
        if state.catalog.platform(&p.id).is_none() {
            payloads.push(Payload::AddPlatform(p.clone()));
            lines.push(None);
        }
    }
    for p in &data.catalog.problems {
        if state.catalog.problem(&p.key()).is_none() {
            payloads.push(Payload::AddProblem(p.clone()));
            lines.push(None);
        }
    }
    for i in &data.catalog.implementations {
        if state.catalog.implementation(&i.app, &i.id).is_none() {
            payloads.push(Payload::AddImplementation(i.clone()));
            lines.push(None);
        }
    }
    let mut measurements = 0;
    let mut duplicates = 0;
    for (row, line) in data.rows.iter().zip(&data.lines) {
        let m = row.to_measurement();
        if state.measurements.iter().any(|x| x.is_duplicate_of(&m)) {
            duplicates += 1;
            continue;
        }
        payloads.push(Payload::AddMeasurement(m));
        lines.push(Some(*line));
        measurements += 1;
    }
    if let Some(s) = study.filter(|s| !state.studies.contains_key(&s.key())) {
        payloads.push(Payload::DefineStudy(s));
        lines.push(None);
    }
    let total = payloads.len();
    match store.ingest_batch(payloads) {
        Ok(outcomes) => {
            let mut studies: Vec<String> = Vec::new();
            for o in &outcomes {
                for s in &o.recalculated {
                    if !studies.contains(s) {
                        studies.push(s.clone());
                    }
                }
            }
            let mut out = format!("ingested {measurements} measurement(s) in {total} event(s)\n");
            if duplicates > 0 {
                out.push_str(&format!("rejected {duplicates} duplicate measurement(s)\n"));
            }
            for s in studies {
                out.push_str(&format!("recalculated {s}\n"));
            }
            Outcome::ok(out)
        }
        Err((idx, e)) => {
            let at = match lines.get(idx).copied().flatten() {
                Some(line) => format!("line {line}: "),
                None => String::new(),
            };
            let code = if matches!(e, StoreError::Io(_)) { EXIT_PARSE } else { EXIT_INVALID };
            fail(code, format!("{at}{e}; nothing was written"))
        }
    }
}

pub fn report(args: &ReportArgs) -> Outcome {
    let store = match Store::open(&args.store) {
        Ok(s) => s,
        Err(e) => return Outcome::fail(EXIT_INVALID, format!("error: {e}")),
    };
    let key = ProblemKey::new(&args.app, &args.problem);
    let scores = match store.query_scores_str(&key, args.policy.as_deref(), args.metric.as_deref()) {
        Ok(s) => s,
        Err(e) => return Outcome::fail(EXIT_PARSE, format!("error: {e}")),
    };
    if args.format == Format::Json {
        return Outcome::ok(render_json(&scores) + "\n");
    }
    let mut out = String::new();
    for (id, st) in &store.state().studies {
        if st.definition.problem_key() != key {
            continue;
        }
        let own: Vec<_> = scores
            .iter()
            .filter(|s| s.policy == st.definition.policy && s.metric == st.definition.metric)
            .cloned()
            .collect();
        if own.is_empty() && st.error.is_none() {
            continue;
        }
        out.push_str(&format!("# {id}\n"));
        if let Some(e) = &st.error {
            out.push_str(&format!("not scorable: {e}\n\n"));
            continue;
        }
        let body = match args.format {
            Format::Csv => render_csv(&own, &st.definition.h, st.definition.metric),
            _ => render_table(&own, &st.definition.h, st.definition.metric),
        };
        out.push_str(&body);
        out.push('\n');
    }
    Outcome::ok(out)
}

pub fn serve(args: &ServeArgs) -> Outcome {
    let store = match Store::open(&args.store) {
        Ok(s) => s,
        Err(e) => return Outcome::fail(EXIT_INVALID, format!("error: {e}")),
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => return Outcome::fail(EXIT_INVALID, format!("error: {e}")),
    };
    eprintln!("serving {} events from {} on http://{}", store.seq(), args.store.display(), args.listen);
    match runtime.block_on(crate::service::serve(crate::service::shared(store), args.listen)) {
        Ok(()) => Outcome::ok(String::new()),
        Err(e) => Outcome::fail(EXIT_INVALID, format!("error: {}: {e}", args.listen)),
    }
}

pub fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Compute(a) => compute(a),
        Command::Audit(a) => audit(a),
        Command::Import(a) => import(a),
        Command::Serve(a) => serve(a),
        Command::Report(a) => report(a),
    }
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let out = run(&cli);
    let _ = std::io::stdout().write_all(out.stdout.as_bytes());
    let _ = std::io::stderr().write_all(out.stderr.as_bytes());
    out.code
}
