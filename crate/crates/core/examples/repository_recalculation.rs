//! A persistent repository: each ingest recalculates the affected studies,
//! the score history records every change, and the log can be audited
//! between any two points.

use ppmetrics::fixtures;
use ppmetrics::render::render_findings;
use ppmetrics::store::{catalog_payloads, Payload, Store};
use ppmetrics::{BaselinePolicy, Metric, ProblemKey};

fn main() {
    let dir = std::env::temp_dir().join(format!("ppmetrics-example-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    let mut store = Store::open(&dir).expect("open store");

    let (catalog, three_models) = fixtures::three_models();
    let (_, with_sycl) = fixtures::with_sycl();
    for p in catalog_payloads(&catalog) {
        store.ingest(p).expect("catalog");
    }
    for policy in [BaselinePolicy::StudyLocalBest, BaselinePolicy::RepositoryBest] {
        let study = fixtures::gpu_study(policy, Metric::ArithmeticMean);
        store.ingest(Payload::DefineStudy(study)).expect("study");
    }
    for m in three_models {
        store.ingest(Payload::AddMeasurement(m)).expect("measurement");
    }
    let before = store.seq();
    store
        .ingest(Payload::AddImplementation(ppmetrics::Implementation::portable(fixtures::APP, "SYCL")))
        .expect("implementation");
    for m in with_sycl.into_iter().filter(|m| m.implementation == "SYCL") {
        let out = store.ingest(Payload::AddMeasurement(m)).expect("measurement");
        println!("seq {} recalculated {:?}", out.seq, out.recalculated);
    }

    let key = ProblemKey::new(fixtures::APP, fixtures::PROBLEM);
    for h in store.history(&key, "Kokkos") {
        let trail: Vec<String> = h.entries.iter().map(|e| format!("seq {}: {:.3}", e.seq, e.score.value)).collect();
        println!("{} Kokkos: {}", h.study, trail.join(", "));
    }
    for a in store.audit_between(&key, before, store.seq()).expect("audit") {
        println!("{}\n{}", a.study, render_findings(&a.report));
    }

    let reopened = Store::open(&dir).expect("replay");
    assert_eq!(reopened.state(), store.state());
    println!("replayed {} events into an identical state", reopened.seq());
    let _ = std::fs::remove_dir_all(&dir);
}
