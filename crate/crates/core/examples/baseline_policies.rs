//! The same measurements under each application-efficiency baseline policy,
//! showing where every baseline came from.

use ppmetrics::fixtures;
use ppmetrics::{score_study, BaselinePolicy, Metric};

fn main() {
    // the study holds the portable runs; the repository also knows the
    // CUDA/HIP reference runs
    let (catalog, repository) = fixtures::with_references();
    let (_, ms) = fixtures::with_sycl();

    let policies = [
        BaselinePolicy::StudyLocalBest,
        fixtures::reference_policy(),
        BaselinePolicy::RepositoryBest,
    ];
    for policy in policies {
        let study = fixtures::gpu_study(policy, Metric::ArithmeticMean);
        let scores = score_study(&study, &catalog, &ms, &repository).expect("scores");
        println!("{}", study.policy.kind());
        for s in &scores {
            let cells: Vec<String> = s
                .per_platform
                .iter()
                .map(|r| {
                    let b = r.baseline.as_ref().expect("supported");
                    format!("{} {:.3} vs {} = {} {}", r.platform, r.e, b.source, b.value, b.units)
                })
                .collect();
            println!("  {:<8} {:.3}  [{}]", s.implementation, s.value, cells.join("; "));
        }
    }
}
