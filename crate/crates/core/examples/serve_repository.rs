//! Runs the HTTP service on an ephemeral port over a repository holding the
//! reference scenario, then fetches the scores once and shuts down.

use std::io::{Read, Write};

use ppmetrics::fixtures;
use ppmetrics::service::{router, shared};
use ppmetrics::store::{catalog_payloads, Payload, Store};
use ppmetrics::Metric;

fn main() {
    let (catalog, ms) = fixtures::with_references();
    let mut store = Store::in_memory();
    let mut payloads = catalog_payloads(&catalog);
    payloads.push(Payload::DefineStudy(fixtures::gpu_study(fixtures::reference_policy(), Metric::ArithmeticMean)));
    payloads.extend(ms.into_iter().map(Payload::AddMeasurement));
    store.ingest_batch(payloads).expect("seed");

    let runtime = tokio::runtime::Runtime::new().expect("runtime");
    let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).expect("bind");
    let addr = listener.local_addr().expect("addr");
    runtime.spawn(async move { axum::serve(listener, router(shared(store))).await });

    let mut conn = std::net::TcpStream::connect(addr).expect("connect");
    write!(
        conn,
        "GET /api/v1/scores?app=CloverTree&problem=default HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n"
    )
    .expect("request");
    let mut response = String::new();
    conn.read_to_string(&mut response).expect("response");
    let body = response.split("\r\n\r\n").nth(1).unwrap_or_default();
    let scores: serde_json::Value = serde_json::from_str(body).expect("json body");
    for s in scores.as_array().expect("array") {
        println!("{:<8} {}", s["implementation"].as_str().unwrap_or_default(), s["value"]);
    }
}
