mod common;

use common::*;
use ppmetrics::store::Store;
use ppmetrics::{BaselinePolicy, MeasurementKind, Metric, ProblemKey};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn stored_scores_match_from_scratch_scoring(script in script()) {
        prop_assert_eq!(oracle_equivalence(&script), Ok(()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn repository_baseline_only_improves(script in script()) {
        let mut store = Store::in_memory();
        let mut payloads = script.payloads();
        let def = ppmetrics::StudyDefinition::new(APP, PROBLEM, script.platform_ids(), BaselinePolicy::RepositoryBest, Metric::ArithmeticMean);
        payloads.insert(script.platforms + 1, ppmetrics::store::Payload::DefineStudy(def.clone()));
        let mut best: Vec<Option<f64>> = vec![None; script.platforms];
        for p in payloads {
            if store.ingest(p).is_err() {
                continue;
            }
            let Some(st) = store.state().studies.get(&def.key()) else { continue };
            for s in &st.scores {
                for (j, r) in s.per_platform.iter().enumerate() {
                    let Some(b) = &r.baseline else { continue };
                    if let Some(prev) = best[j] {
                        let worse = if script.kind == MeasurementKind::RuntimeSeconds { b.value > prev } else { b.value < prev };
                        prop_assert!(!worse, "baseline on P{j} regressed from {prev} to {}", b.value);
                    }
                    best[j] = Some(b.value);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn on_disk_replay_is_deterministic(script in script()) {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path()).unwrap();
        for p in script.payloads() {
            store.ingest(p).unwrap();
        }
        let reopened = Store::open(dir.path()).unwrap();
        prop_assert_eq!(reopened.state(), store.state());
        prop_assert_eq!(reopened.export_snapshot(), store.export_snapshot());
        let key = ProblemKey::new(APP, PROBLEM);
        for i in ["I0", "I1"] {
            prop_assert_eq!(reopened.history(&key, i), store.history(&key, i));
        }
    }
}
