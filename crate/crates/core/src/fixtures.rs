//! The CloverTree worked example: three GPUs, four portable
//! implementations and CUDA/HIP references at 10 s.
//!
//! Used by the examples, the tests and the acceptance suite.

use crate::model::{
    ArchClass, BaselinePolicy, Catalog, Implementation, Measurement, Metric, Platform,
    ProblemSpec, StudyDefinition,
};

pub const APP: &str = "CloverTree";
pub const PROBLEM: &str = "default";
pub const PLATFORMS: [&str; 3] = ["A100", "P100", "MI250"];

/// Runtimes in seconds on A100, P100, MI250.
pub const OPENACC: [f64; 3] = [30.0, 50.0, 60.0];
pub const OPENMP: [f64; 3] = [40.0, 25.0, 50.0];
pub const KOKKOS: [f64; 3] = [60.0, 75.0, 40.0];
pub const SYCL: [f64; 3] = [50.0, 40.0, 30.0];

pub fn platforms() -> Vec<Platform> {
    vec![
        Platform::new("A100", "NVIDIA", ArchClass::Gpu),
        Platform::new("P100", "NVIDIA", ArchClass::Gpu),
        Platform::new("MI250", "AMD", ArchClass::Gpu),
    ]
}

pub fn problem() -> ProblemSpec {
    ProblemSpec { app: APP.into(), problem: PROBLEM.into(), input_size: None }
}

pub fn row(implementation: &str, runtimes: [f64; 3]) -> Vec<Measurement> {
    PLATFORMS
        .iter()
        .zip(runtimes)
        .map(|(p, t)| Measurement::runtime(APP, PROBLEM, implementation, p, t))
        .collect()
}

fn catalog(implementations: &[Implementation]) -> Catalog {
    let mut c = Catalog::default();
    for p in platforms() {
        c.add_platform(p);
    }
    for i in implementations {
        c.add_implementation(i.clone());
    }
    c.add_problem(problem());
    c
}

/// OpenACC, OpenMP and Kokkos.
pub fn three_models() -> (Catalog, Vec<Measurement>) {
    let impls = ["OpenACC", "OpenMP", "Kokkos"].map(|i| Implementation::portable(APP, i));
    let mut ms = row("OpenACC", OPENACC);
    ms.extend(row("OpenMP", OPENMP));
    ms.extend(row("Kokkos", KOKKOS));
    (catalog(&impls), ms)
}

/// The three models plus SYCL.
pub fn with_sycl() -> (Catalog, Vec<Measurement>) {
    let (mut c, mut ms) = three_models();
    c.add_implementation(Implementation::portable(APP, "SYCL"));
    ms.extend(row("SYCL", SYCL));
    (c, ms)
}

/// CUDA on the NVIDIA parts and HIP on MI250, all at 10 s.
pub fn reference_rows() -> Vec<Measurement> {
    vec![
        Measurement::runtime(APP, PROBLEM, "CUDA", "A100", 10.0),
        Measurement::runtime(APP, PROBLEM, "CUDA", "P100", 10.0),
        Measurement::runtime(APP, PROBLEM, "HIP", "MI250", 10.0),
    ]
}

pub fn reference_implementations() -> [Implementation; 2] {
    [Implementation::low_level(APP, "CUDA"), Implementation::low_level(APP, "HIP")]
}

/// The four portable models plus the CUDA/HIP reference runs.
pub fn with_references() -> (Catalog, Vec<Measurement>) {
    let (mut c, mut ms) = with_sycl();
    for i in reference_implementations() {
        c.add_implementation(i);
    }
    ms.extend(reference_rows());
    (c, ms)
}

pub fn reference_policy() -> BaselinePolicy {
    BaselinePolicy::fixed_reference([("A100", "CUDA"), ("P100", "CUDA"), ("MI250", "HIP")])
}

pub fn gpu_study(policy: BaselinePolicy, metric: Metric) -> StudyDefinition {
    StudyDefinition::new(APP, PROBLEM, PLATFORMS, policy, metric)
}
