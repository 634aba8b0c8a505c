use std::collections::BTreeSet;
use std::sync::{Arc, OnceLock};

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use serde_json::Value;
use tower::ServiceExt;

use meterbench::data::{Cohort, MeterId};
use meterbench::datagen::{generate_cohort, CohortConfig};
use meterbench::explain::{explain_cohort, Generator};
use meterbench::forecast::{builtin_pipeline, run_pipeline, ForecastSet};
use meterbench::review::{
    aggregate, pack_review, router, select_review_meters, AppState, BlindingKey, FinalistInput, PackOptions,
    ResponseStore, ReviewPacket, ReviewResponse, CRITERIA, REVIEW_METERS,
};
use meterbench::Error;

const IDS: [&str; 3] = ["pipeline-alpha", "pipeline-beta", "pipeline-gamma"];

struct Fixture {
    cohort: Cohort,
    finalists: Vec<FinalistInput>,
    meters: Vec<MeterId>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let cohort = generate_cohort(&CohortConfig::small(30, 21)).unwrap();
        let meters = select_review_meters(&cohort, REVIEW_METERS, 4).unwrap();
        let finalists = ["naive", "sr", "sl"]
            .iter()
            .zip(IDS)
            .zip([Generator::Shap, Generator::Rules, Generator::Fuzzy])
            .map(|((name, id), generator)| {
                let f = run_pipeline(&cohort, &builtin_pipeline(name).unwrap(), 1).unwrap();
                let bundles = explain_cohort(&cohort, generator, Some(&f.predictions), Some(&meters), 2).unwrap();
                FinalistInput {
                    forecast: ForecastSet::new(id, f.predictions).unwrap(),
                    bundles,
                }
            })
            .collect();
        Fixture {
            cohort,
            finalists,
            meters,
        }
    })
}

fn packet(n_finalists: usize) -> (ReviewPacket, BlindingKey) {
    let f = fixture();
    let options = PackOptions {
        seed: 9,
        reveal_truth: true,
    };
    pack_review("panel-1", &f.cohort, &f.finalists[..n_finalists], &f.meters, options).unwrap()
}

#[test]
fn packet_has_one_entry_per_meter_horizon_and_finalist() {
    let (p, key) = packet(3);
    assert_eq!(p.entries.len(), 3 * REVIEW_METERS * 4);
    let ids: BTreeSet<&str> = p.entries.iter().map(|e| e.entry_id.as_str()).collect();
    assert_eq!(ids.len(), p.entries.len());
    assert_eq!(p.labels, ["A", "B", "C"]);
    let mapped: BTreeSet<&str> = key.labels.values().map(String::as_str).collect();
    assert_eq!(mapped, IDS.into_iter().collect());
    for e in &p.entries {
        assert!(!e.explanation.is_empty());
        assert!(e.actual_forecast_year.is_some());
        let total: f64 = e.predicted_monthly.iter().sum();
        match e.horizon {
            meterbench::explain::Horizon::Year => assert!((e.prediction_kwh - total).abs() < 1e-9),
            meterbench::explain::Horizon::Month(m) => assert_eq!(e.prediction_kwh, e.predicted_monthly[m - 1]),
        }
    }
}

#[test]
fn blinding_is_seeded_and_kept_out_of_the_packet() {
    let (p1, k1) = packet(3);
    let (p2, k2) = packet(3);
    assert_eq!(k1, k2);
    assert_eq!(p1, p2);
    let json = serde_json::to_string(&p1).unwrap();
    for id in IDS {
        assert!(!json.contains(id), "{id} leaks into the packet");
    }
}

#[test]
fn hidden_truth_is_omitted() {
    let f = fixture();
    let options = PackOptions {
        seed: 9,
        reveal_truth: false,
    };
    let (p, _) = pack_review("panel-1", &f.cohort, &f.finalists, &f.meters, options).unwrap();
    assert!(p.entries.iter().all(|e| e.actual_forecast_year.is_none()));
}

#[test]
fn missing_explanation_is_reported() {
    let f = fixture();
    let mut finalists = f.finalists.clone();
    for b in &mut finalists[1].bundles {
        if b.meter_id == f.meters[3] {
            b.monthly.retain(|m| m.month != 12);
        }
    }
    let err = pack_review("panel-1", &f.cohort, &finalists, &f.meters, PackOptions::default()).unwrap_err();
    match err {
        Error::MissingExplanation { meter_id, horizon, finalist } => {
            assert_eq!(meter_id, f.meters[3].0);
            assert_eq!(horizon, "m12");
            assert_eq!(finalist, IDS[1]);
        }
        other => panic!("unexpected error {other}"),
    }
}

fn response(packet_id: &str, entry_id: &str, reviewer: &str, score: u8) -> ReviewResponse {
    let s = [score; CRITERIA];
    ReviewResponse {
        reviewer_token: reviewer.into(),
        packet_id: packet_id.into(),
        entry_id: entry_id.into(),
        c1: s[0],
        c2: s[1],
        c3: s[2],
        c4: s[3],
        c5: s[4],
        c6: s[5],
        c7: s[6],
        c8: s[7],
        c9: s[8],
        c10: s[9],
    }
}

async fn call(app: &axum::Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn post(body: &ReviewResponse) -> Request<Body> {
    Request::post("/api/responses")
        .header("content-type", "application/json")
        .body(Body::from(serde_json::to_vec(body).unwrap()))
        .unwrap()
}

#[tokio::test]
async fn review_round_trip_over_http() {
    let (p, key) = packet(2);
    let state = AppState {
        packet: Arc::new(p.clone()),
        store: Arc::new(ResponseStore::in_memory()),
    };
    let app = router(state.clone(), None);

    let (status, body) = call(&app, get("/api/packet/panel-1")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_value::<ReviewPacket>(body).unwrap(), p);
    assert_eq!(call(&app, get("/api/packet/other")).await.0, StatusCode::NOT_FOUND);

    let (status, body) = call(&app, get("/api/aggregate/panel-1")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(body["error"].is_string());

    let first = &p.entries[0].entry_id;
    assert_eq!(call(&app, post(&response("panel-1", first, "r1", 0))).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, post(&response("panel-1", first, "r1", 6))).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, post(&response("panel-1", first, "", 3))).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, post(&response("panel-1", "nope/year/A", "r1", 3))).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, post(&response("other", first, "r1", 3))).await.0, StatusCode::NOT_FOUND);
    assert!(state.store.snapshot().is_empty());

    // The first submission for one cell is overwritten by a later one.
    let a_cell = p.entries.iter().find(|e| e.label == "A").unwrap();
    let (status, ack) = call(&app, post(&response("panel-1", &a_cell.entry_id, "r1", 1))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ack["accepted"], true);
    assert_eq!(ack["sequence"], 0);

    for reviewer in ["r1", "r2"] {
        for e in &p.entries {
            let score = if e.label == "A" { 4 } else { 2 };
            let (status, _) = call(&app, post(&response("panel-1", &e.entry_id, reviewer, score))).await;
            assert_eq!(status, StatusCode::OK);
        }
    }
    assert_eq!(state.store.snapshot().len(), 1 + 2 * p.entries.len());

    let (status, body) = call(&app, get("/api/aggregate/panel-1")).await;
    assert_eq!(status, StatusCode::OK);
    let table: meterbench::review::AggregateTable = serde_json::from_value(body).unwrap();
    assert_eq!(table.rows.len(), 2);
    assert_eq!(table.rows[0].finalist, "A");
    assert_eq!(table.rows[0].means, [4.0; CRITERIA]);
    assert_eq!(table.rows[0].overall, 4.0);
    assert_eq!(table.rows[1].means, [2.0; CRITERIA]);
    assert_eq!(table.rows[0].responses, 2 * p.entries.len() / 2);
    assert!(table.cells.iter().all(|c| c.responses == 2));

    let rendered = table.unblind(&key).unwrap().render();
    assert!(rendered.starts_with("| Contestants | C1 | C2 |"));
    let a_row = format!("| {} | 4.00 |", key.labels["A"]);
    let b_row = format!("| {} | 2.00 |", key.labels["B"]);
    assert!(rendered.contains(&a_row) && rendered.contains(&b_row), "{rendered}");
    assert_eq!(call(&app, get("/api/aggregate/other")).await.0, StatusCode::NOT_FOUND);
}

#[test]
fn response_log_survives_reopening() {
    let (p, _) = packet(2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("responses.jsonl");
    {
        let store = ResponseStore::open(&path).unwrap();
        for e in p.entries.iter().take(5) {
            store.submit(&p, response("panel-1", &e.entry_id, "r1", 3)).unwrap();
        }
    }
    let store = ResponseStore::open(&path).unwrap();
    assert_eq!(store.snapshot().len(), 5);
    store.submit(&p, response("panel-1", &p.entries[0].entry_id, "r1", 5)).unwrap();
    let reopened = ResponseStore::open(&path).unwrap().snapshot();
    assert_eq!(reopened.len(), 6);
    let table = aggregate(&p, &reopened).unwrap();
    let total: usize = table.rows.iter().map(|r| r.responses).sum();
    assert_eq!(total, 5);
}

#[test]
fn concurrent_submissions_are_all_logged() {
    let (p, _) = packet(2);
    let store = Arc::new(ResponseStore::in_memory());
    let p = Arc::new(p);
    let handles: Vec<_> = (0..4)
        .map(|t| {
            let (store, p) = (store.clone(), p.clone());
            std::thread::spawn(move || {
                for e in &p.entries {
                    store.submit(&p, response("panel-1", &e.entry_id, &format!("r{t}"), 3)).unwrap();
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    let log = store.snapshot();
    assert_eq!(log.len(), 4 * p.entries.len());
    assert!(aggregate(&p, &log).unwrap().cells.iter().all(|c| c.responses == 4));
}
