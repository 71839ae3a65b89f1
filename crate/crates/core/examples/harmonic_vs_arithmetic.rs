//! The two metrics side by side. The harmonic mean never exceeds the
//! arithmetic one and collapses to zero once a platform is unsupported.

use std::collections::BTreeMap;

use ppmetrics::{pbar, pp_harmonic};

fn main() {
    let h: Vec<String> = ["A100", "P100", "MI250"].map(String::from).to_vec();
    let cases: [(&str, [f64; 3]); 3] = [
        ("balanced", [0.8, 0.8, 0.8]),
        ("uneven", [1.0, 0.5, 0.2]),
        ("MI250 unsupported", [0.9, 0.7, 0.0]),
    ];
    for (name, es) in cases {
        let map: BTreeMap<String, f64> = h.iter().cloned().zip(es).collect();
        let a = pbar(&map, &h).expect("valid");
        let m = pp_harmonic(&map, &h).expect("valid");
        println!("{name:<18} arithmetic {:.4} over {:?}  harmonic {:.4}", a.value, a.supported, m.value);
    }
}
