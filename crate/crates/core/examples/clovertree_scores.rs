//! Scores the CloverTree worked example three ways: study-local best over
//! three and then four implementations, and fixed CUDA/HIP references.

use ppmetrics::fixtures;
use ppmetrics::render::render_table;
use ppmetrics::{score_study, BaselinePolicy, Metric};

fn main() {
    let h: Vec<String> = fixtures::PLATFORMS.iter().map(|p| p.to_string()).collect();
    let local = fixtures::gpu_study(BaselinePolicy::StudyLocalBest, Metric::ArithmeticMean);
    let fixed = fixtures::gpu_study(fixtures::reference_policy(), Metric::ArithmeticMean);

    let runs = [
        ("three implementations, best in study", fixtures::three_models(), &local),
        ("SYCL added, best in study", fixtures::with_sycl(), &local),
        ("SYCL added, CUDA/HIP references", fixtures::with_references(), &fixed),
    ];
    for (title, (catalog, ms), study) in runs {
        let scores = score_study(study, &catalog, &ms, &ms).expect("fixture scores");
        println!("{title}");
        println!("{}", render_table(&scores, &h, Metric::ArithmeticMean));
    }
}
