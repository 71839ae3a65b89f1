//! Architectural efficiency: achieved GFLOP/s against the theoretical peak
//! and against the roofline bound at a given arithmetic intensity.

use ppmetrics::efficiency::roofline_peak;
use ppmetrics::{
    score_study, ArchClass, BaselinePolicy, Catalog, Implementation, Measurement, MeasurementKind,
    Metric, Platform, ProblemSpec, StudyDefinition,
};

fn main() {
    let mut catalog = Catalog::default();
    catalog.add_platform(Platform::new("A100", "NVIDIA", ArchClass::Gpu).with_peak_compute(19500.0).with_peak_mem_bw(1555.0));
    catalog.add_platform(Platform::new("MI250", "AMD", ArchClass::Gpu).with_peak_compute(45300.0).with_peak_mem_bw(3277.0));
    catalog.add_problem(ProblemSpec { app: "stream".into(), problem: "triad".into(), input_size: None });
    for i in ["Kokkos", "SYCL"] {
        catalog.add_implementation(Implementation::portable("stream", i));
    }
    let gflops = |i: &str, p: &str, v: f64| {
        Measurement::new("stream", "triad", i, p, MeasurementKind::ThroughputGflops, v)
    };
    let ms = vec![
        gflops("Kokkos", "A100", 110.0),
        gflops("Kokkos", "MI250", 230.0),
        gflops("SYCL", "A100", 100.0),
        gflops("SYCL", "MI250", 250.0),
    ];
    let intensity = 2.0 / 24.0;
    for (name, p) in [("A100", (19500.0, 1555.0)), ("MI250", (45300.0, 3277.0))] {
        let bound = roofline_peak(p.0, p.1, intensity).expect("valid peaks");
        println!("{name}: roofline bound {bound:.1} GFLOP/s at {intensity:.4} FLOP/byte");
    }
    for policy in [
        BaselinePolicy::ArchitecturalTheoretical,
        BaselinePolicy::ArchitecturalRoofline { arithmetic_intensity: Some(intensity) },
    ] {
        let study = StudyDefinition::new("stream", "triad", ["A100", "MI250"], policy, Metric::ArithmeticMean);
        let scores = score_study(&study, &catalog, &ms, &ms).expect("scores");
        println!("{}", study.policy.kind());
        for s in &scores {
            let es: Vec<String> = s.per_platform.iter().map(|r| format!("{}={:.4}", r.platform, r.e)).collect();
            println!("  {:<6} {}  score {:.4}", s.implementation, es.join(" "), s.value);
        }
    }
}
