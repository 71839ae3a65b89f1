//! Text, CSV and JSON renderings of scores and audit reports.
//!
//! Values are stored at full precision. Tables show integer percents
//! rounded half-up; JSON carries 12 significant digits.

use std::fmt::Write as _;

use serde::{Serialize, Serializer};

use crate::audit::{AuditReport, ChangeSet, Finding, Severity};
use crate::model::{EfficiencyRecord, Metric, PolicyKind, PortabilityScore};

/// Integer percent, rounded half-up.
pub fn percent(fraction: f64) -> i64 {
    // the epsilon keeps exact halves such as 0.625 from rounding down
    (fraction * 100.0 + 0.5 + 1e-9).floor() as i64
}

/// Rounds to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

fn sig12<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig(*x, 12))
}

fn sig12_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_some(&round_sig(*v, 12)),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineView {
    pub source: String,
    #[serde(serialize_with = "sig12")]
    pub value: f64,
    pub units: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyView {
    pub platform: String,
    #[serde(serialize_with = "sig12")]
    pub e: f64,
    pub baseline: Option<BaselineView>,
    pub verified: bool,
}

impl From<&EfficiencyRecord> for EfficiencyView {
    fn from(r: &EfficiencyRecord) -> Self {
        EfficiencyView {
            platform: r.platform.clone(),
            e: r.e,
            baseline: r.baseline.as_ref().map(|b| BaselineView {
                source: b.source.to_string(),
                value: b.value,
                units: b.units.clone(),
            }),
            verified: r.verified,
        }
    }
}

/// JSON form of a score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreView {
    pub app: String,
    pub problem: String,
    pub implementation: String,
    pub metric: Metric,
    pub policy: PolicyKind,
    pub h: Vec<String>,
    pub s: Vec<String>,
    #[serde(serialize_with = "sig12")]
    pub value: f64,
    pub per_platform: Vec<EfficiencyView>,
}

impl From<&PortabilityScore> for ScoreView {
    fn from(s: &PortabilityScore) -> Self {
        ScoreView {
            app: s.app.clone(),
            problem: s.problem.clone(),
            implementation: s.implementation.clone(),
            metric: s.metric,
            policy: s.policy.kind(),
            h: s.h.clone(),
            s: s.s.clone(),
            value: s.value,
            per_platform: s.per_platform.iter().map(EfficiencyView::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FindingView {
    pub severity: Severity,
    pub criterion: Option<u8>,
    pub implementation: Option<String>,
    pub platform: Option<String>,
    pub description: String,
    #[serde(serialize_with = "sig12_opt")]
    pub before: Option<f64>,
    #[serde(serialize_with = "sig12_opt")]
    pub after: Option<f64>,
}

impl From<&Finding> for FindingView {
    fn from(f: &Finding) -> Self {
        FindingView {
            severity: f.severity,
            criterion: f.criterion,
            implementation: f.implementation.clone(),
            platform: f.platform.clone(),
            description: f.description.clone(),
            before: f.before,
            after: f.after,
        }
    }
}

pub fn score_views(scores: &[PortabilityScore]) -> Vec<ScoreView> {
    scores.iter().map(ScoreView::from).collect()
}

pub fn finding_views(report: &AuditReport) -> Vec<FindingView> {
    report.findings.iter().map(FindingView::from).collect()
}

fn metric_label(metric: Metric) -> &'static str {
    match metric {
        Metric::ArithmeticMean => "P(mean)",
        Metric::HarmonicMean => "P(harm)",
    }
}

fn cell(r: Option<&EfficiencyRecord>) -> String {
    match r {
        Some(r) if r.is_supported() => {
            format!("{}%{}", percent(r.e), if r.verified { "" } else { "*" })
        }
        _ => "-".to_owned(),
    }
}

/// Plain-text table; the first column is left-aligned, the rest right-aligned
/// unless `text_last` asks for a left-aligned free-text last column.
fn table(header: Vec<String>, rows: Vec<Vec<String>>, text_last: bool) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).chain([header[c].chars().count()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let line = |out: &mut String, cells: &[String]| {
        let mut parts = Vec::new();
        for (c, text) in cells.iter().enumerate() {
            let pad = widths[c] - text.chars().count();
            if c == 0 || (text_last && c + 1 == cells.len()) {
                parts.push(format!("{text}{}", " ".repeat(pad)));
            } else {
                parts.push(format!("{}{text}", " ".repeat(pad)));
            }
        }
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(&mut out, &rule);
    for r in &rows {
        line(&mut out, r);
    }
    out
}

/// Efficiency matrix with one score column, integer percents.
pub fn render_table(scores: &[PortabilityScore], h: &[String], metric: Metric) -> String {
    let mut header = vec!["implementation".to_owned()];
    header.extend(h.iter().cloned());
    header.push(metric_label(metric).to_owned());
    let rows = scores
        .iter()
        .map(|s| {
            let mut row = vec![s.implementation.clone()];
            row.extend(h.iter().map(|p| cell(s.record(p))));
            row.push(format!("{}%", percent(s.value)));
            row
        })
        .collect();
    let mut out = table(header, rows, false);
    if scores.iter().flat_map(|s| &s.per_platform).any(|r| r.is_supported() && !r.verified) {
        out.push_str("* measurement lacks compiler, compiler_flags or input_size metadata\n");
    }
    out
}

/// Same matrix at full precision.
pub fn render_csv(scores: &[PortabilityScore], h: &[String], metric: Metric) -> String {
    let mut out = String::from("implementation");
    for p in h {
        let _ = write!(out, ",{p}");
    }
    let _ = writeln!(out, ",{metric}");
    for s in scores {
        out.push_str(&s.implementation);
        for p in h {
            let _ = write!(out, ",{}", s.efficiency(p).unwrap_or(0.0));
        }
        let _ = writeln!(out, ",{}", s.value);
    }
    out
}

pub fn render_json(scores: &[PortabilityScore]) -> String {
    serde_json::to_string_pretty(&score_views(scores)).expect("scores serialize")
}

pub fn render_findings(report: &AuditReport) -> String {
    if report.is_empty() {
        return "no findings\n".to_owned();
    }
    let pct = |v: Option<f64>| v.map_or("-".to_owned(), |v| format!("{}%", percent(v)));
    let rows = report
        .findings
        .iter()
        .map(|f| {
            vec![
                f.severity.to_string(),
                f.criterion.map_or("-".to_owned(), |c| c.to_string()),
                f.implementation.clone().unwrap_or_else(|| "-".into()),
                f.platform.clone().unwrap_or_else(|| "-".into()),
                format!("{} -> {}", pct(f.before), pct(f.after)),
                f.description.clone(),
            ]
        })
        .collect();
    let header = ["severity", "criterion", "implementation", "platform", "change", "description"]
        .map(String::from)
        .to_vec();
    let mut out = table(header, rows, true);
    let _ = writeln!(
        out,
        "{} violation(s), {} warning(s), {} info",
        report.count(Severity::Violation),
        report.count(Severity::Warning),
        report.count(Severity::Info)
    );
    out
}

/// After-state matrix with superseded values struck through, e.g.
/// `~~67%~~ 50%`.
pub fn render_diff_table(changes: &ChangeSet) -> String {
    let h = &changes.study.h;
    let mut header = vec!["implementation".to_owned()];
    header.extend(h.iter().cloned());
    header.push(metric_label(changes.study.metric).to_owned());
    let mut rows = Vec::new();
    for a in &changes.after_scores {
        let b = changes.before_scores.iter().find(|s| s.implementation == a.implementation);
        let mut row = vec![a.implementation.clone()];
        for p in h {
            let now = cell(a.record(p));
            let then = b.map(|b| cell(b.record(p)));
            row.push(match then {
                Some(then) if then != now => format!("~~{then}~~ {now}"),
                _ => now,
            });
        }
        let now = format!("{}%", percent(a.value));
        let then = b.map(|b| format!("{}%", percent(b.value)));
        row.push(match then {
            Some(then) if then != now => format!("~~{then}~~ {now}"),
            _ => now,
        });
        rows.push(row);
    }
    table(header, rows, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::metrics::score_study;
    use crate::model::BaselinePolicy;

    #[test]
    fn percent_rounds_half_up() {
        assert_eq!(percent(0.85), 85);
        assert_eq!(percent(0.625), 63);
        assert_eq!(percent(2.0 / 3.0), 67);
        assert_eq!(percent(0.5278), 53);
        assert_eq!(percent(0.0), 0);
    }

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(round_sig(2.0 / 3.0, 12), 0.666666666667);
        assert_eq!(serde_json::to_string(&round_sig(1.0 / 3.0, 12)).unwrap(), "0.333333333333");
        assert_eq!(round_sig(0.0, 12), 0.0);
    }

    fn three_models_scores() -> Vec<PortabilityScore> {
        let (c, ms) = fixtures::three_models();
        let study = fixtures::gpu_study(BaselinePolicy::StudyLocalBest, Metric::ArithmeticMean);
        score_study(&study, &c, &ms, &ms).unwrap()
    }

    #[test]
    fn table_and_csv_agree_after_rounding() {
        let scores = three_models_scores();
        let h: Vec<String> = fixtures::PLATFORMS.iter().map(|s| s.to_string()).collect();
        let t = render_table(&scores, &h, Metric::ArithmeticMean);
        let c = render_csv(&scores, &h, Metric::ArithmeticMean);
        let table_cells: Vec<Vec<String>> = t
            .lines()
            .skip(2)
            .filter(|l| !l.starts_with('*'))
            .map(|l| l.split_whitespace().skip(1).map(|c| c.trim_end_matches(['%', '*']).to_owned()).collect())
            .collect();
        let csv_cells: Vec<Vec<String>> = c
            .lines()
            .skip(1)
            .map(|l| l.split(',').skip(1).map(|v| percent(v.parse().unwrap()).to_string()).collect())
            .collect();
        assert_eq!(table_cells, csv_cells);
        assert!(t.contains("85%"));
    }

    #[test]
    fn json_uses_wire_field_names() {
        let json = render_json(&three_models_scores());
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let first = &v[0];
        for key in ["app", "problem", "implementation", "metric", "policy", "h", "s", "value", "per_platform"] {
            assert!(first.get(key).is_some(), "{key}");
        }
        assert_eq!(first["policy"], "study_local_best");
        assert_eq!(first["per_platform"][0]["baseline"]["source"], "best_in_study(OpenACC)");
        assert_eq!(first["value"].as_f64().unwrap(), 0.722222222222);
    }
}
