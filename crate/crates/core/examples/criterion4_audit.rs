//! Adding SYCL moves the MI250 baseline and with it the scores of three
//! implementations whose own runs did not change. The audit flags each one;
//! fixed references are immune.

use ppmetrics::audit::{check_criterion4, diff_snapshots, Snapshot};
use ppmetrics::fixtures;
use ppmetrics::render::{render_diff_table, render_findings};
use ppmetrics::{BaselinePolicy, Metric};

fn main() {
    let (_, refs) = fixtures::with_references();
    let refs: Vec<_> = refs.into_iter().filter(|m| m.implementation == "CUDA" || m.implementation == "HIP").collect();
    for policy in [BaselinePolicy::StudyLocalBest, fixtures::reference_policy()] {
        let study = fixtures::gpu_study(policy, Metric::ArithmeticMean);
        let (mut c1, ms1) = fixtures::three_models();
        let (mut c2, ms2) = fixtures::with_sycl();
        for i in fixtures::reference_implementations() {
            c1.add_implementation(i.clone());
            c2.add_implementation(i);
        }
        let before = Snapshot::score_with_repository(&study, &c1, &ms1, &refs).expect("before");
        let after = Snapshot::score_with_repository(&study, &c2, &ms2, &refs).expect("after");
        let changes = diff_snapshots(&before, &after).expect("same study");
        let report = check_criterion4(&changes);
        println!("policy {}", study.policy.kind());
        println!("{}", render_diff_table(&changes));
        println!("{}", render_findings(&report));
    }
}
