//! The session service over real HTTP.

use std::path::PathBuf;
use std::process::Stdio;
use std::time::Duration;

use serde_json::{json, Value};
use tokio::io::{AsyncBufReadExt, BufReader};
use tokio::process::{Child, Command};

fn model(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(format!("{name}.ttm"))
        .display()
        .to_string()
}

struct Server {
    _child: Child,
    base: String,
    http: reqwest::Client,
}

async fn start() -> Server {
    let mut child = Command::new(env!("CARGO_BIN_EXE_ttmc"))
        .args(["serve", "--port", "0"])
        .stdout(Stdio::piped())
        .kill_on_drop(true)
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let first = tokio::time::timeout(Duration::from_secs(30), lines.next_line())
        .await
        .expect("server start")
        .unwrap()
        .unwrap();
    let base = first.strip_prefix("listening on ").expect(&first).to_string();
    Server {
        _child: child,
        base,
        http: reqwest::Client::new(),
    }
}

impl Server {
    async fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let r = self.http.post(format!("{}{path}", self.base)).json(&body).send().await.unwrap();
        let code = r.status().as_u16();
        (code, r.json().await.unwrap())
    }

    async fn get(&self, path: &str) -> (u16, Value) {
        let r = self.http.get(format!("{}{path}", self.base)).send().await.unwrap();
        let code = r.status().as_u16();
        (code, r.json().await.unwrap())
    }

    async fn create(&self, name: &str, seed: u64) -> String {
        let (code, v) = self.post("/sessions", json!({ "path": model(name), "seed": seed })).await;
        assert_eq!(code, 201, "{v}");
        v["id"].as_str().unwrap().to_string()
    }
}

fn labels(v: &Value) -> Vec<String> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|o| o["label"].as_str().unwrap().to_string())
        .collect()
}

#[tokio::test]
async fn session_lifecycle() {
    let srv = start().await;
    let (code, v) = srv.post("/sessions", json!({ "path": model("train_abstract"), "seed": 1 })).await;
    assert_eq!(code, 201);
    let id = v["id"].as_str().unwrap().to_string();
    assert_eq!(v["state"]["step"], 0);
    assert_eq!(v["state"]["config"]["state"]["loc"], json!(["Out", "Out"]));

    let (_, en) = srv.get(&format!("/sessions/{id}/enabled")).await;
    let ls = labels(&en);
    assert!(ls.contains(&"arrive#(A)".to_string()), "{ls:?}");
    assert!(ls.contains(&"tick".to_string()));

    let (code, st) = srv
        .post(&format!("/sessions/{id}/fire"), json!({ "transition": "arrive#(A)" }))
        .await;
    assert_eq!(code, 200, "{st}");
    assert_eq!(st["step"], 1);
    assert_eq!(st["transition"], "arrive#(A)");
    assert_eq!(st["config"]["pending"], "arrive#(A)");

    // Only the announced event may follow.
    let (_, en) = srv.get(&format!("/sessions/{id}/enabled")).await;
    assert_eq!(labels(&en), vec!["arrive(A)"]);
    let (code, err) = srv
        .post(&format!("/sessions/{id}/fire"), json!({ "transition": "tick" }))
        .await;
    assert_eq!(code, 422);
    assert_eq!(err["error"], "NotEnabled");
    let (code, err) = srv
        .post(&format!("/sessions/{id}/fire"), json!({ "transition": "arrive(A)", "choice": 5 }))
        .await;
    assert_eq!(code, 422);
    assert_eq!(err["error"], "BadChoice");

    let (_, st) = srv
        .post(&format!("/sessions/{id}/fire"), json!({ "transition": "arrive(A)" }))
        .await;
    assert_eq!(st["config"]["state"]["loc"], json!(["Entr", "Out"]));
    let (_, state) = srv.get(&format!("/sessions/{id}/state")).await;
    assert_eq!(state, st);

    let (code, err) = srv.post(&format!("/sessions/{id}/undo"), json!({ "k": 3 })).await;
    assert_eq!(code, 422);
    assert_eq!(err["error"], "BadIndex");
    let (_, st) = srv.post(&format!("/sessions/{id}/undo"), json!({ "k": 2 })).await;
    assert_eq!(st["step"], 0);
    assert_eq!(st["digest"], v["state"]["digest"]);

    let (code, _) = srv.get("/sessions/nope/state").await;
    assert_eq!(code, 404);
}

#[tokio::test]
async fn trace_export_and_import() {
    let srv = start().await;
    let a = srv.create("train_abstract", 9).await;
    let (_, walked) = srv.post(&format!("/sessions/{a}/walk"), json!({ "steps": 25 })).await;
    assert_eq!(walked["step"], 25);
    let trace = srv
        .http
        .get(format!("{}/sessions/{a}/trace", srv.base))
        .send()
        .await
        .unwrap()
        .text()
        .await
        .unwrap();
    assert_eq!(trace.lines().count(), 26);

    let b = srv.create("train_abstract", 0).await;
    let r = srv
        .http
        .post(format!("{}/sessions/{b}/trace", srv.base))
        .body(trace.clone())
        .send()
        .await
        .unwrap();
    assert_eq!(r.status().as_u16(), 200);
    let st: Value = r.json().await.unwrap();
    assert_eq!(st, walked);
    let again = srv
        .http
        .get(format!("{}/sessions/{b}/trace", srv.base))
        .send()
        .await
        .unwrap()
        .text()
        .await
        .unwrap();
    assert_eq!(again, trace);

    let c = srv.create("philosophers", 0).await;
    let r = srv
        .http
        .post(format!("{}/sessions/{c}/trace", srv.base))
        .body(trace)
        .send()
        .await
        .unwrap();
    assert_eq!(r.status().as_u16(), 409);
    let err: Value = r.json().await.unwrap();
    assert_eq!(err["error"], "ModelMismatch");

    let r = srv
        .http
        .post(format!("{}/sessions/{c}/trace", srv.base))
        .body("not a trace")
        .send()
        .await
        .unwrap();
    assert_eq!(r.status().as_u16(), 400);
}

#[tokio::test]
async fn events_stream_state_after_each_fire() {
    let srv = start().await;
    let id = srv.create("train_abstract", 0).await;
    let mut resp = srv
        .http
        .get(format!("{}/sessions/{id}/events", srv.base))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status().as_u16(), 200);

    let mut buf = String::new();
    let mut next_event = async || -> Value {
        loop {
            if let Some(end) = buf.find("\n\n") {
                let block: String = buf.drain(..end + 2).collect();
                if let Some(data) = block.lines().find_map(|l| l.strip_prefix("data:")) {
                    return serde_json::from_str(data.trim()).unwrap();
                }
                continue;
            }
            let chunk = tokio::time::timeout(Duration::from_secs(10), resp.chunk())
                .await
                .expect("event")
                .unwrap()
                .expect("stream open");
            buf.push_str(std::str::from_utf8(&chunk).unwrap());
        }
    };
    let first = next_event().await;
    assert_eq!(first["step"], 0);

    let (_, fired) = srv
        .post(&format!("/sessions/{id}/fire"), json!({ "transition": "tick" }))
        .await;
    let pushed = next_event().await;
    assert_eq!(pushed, fired);
    assert_eq!(pushed["transition"], "tick");

    srv.post(&format!("/sessions/{id}/undo"), json!({ "k": 1 })).await;
    let pushed = next_event().await;
    assert_eq!(pushed["step"], 0);
}

#[tokio::test]
async fn bad_create_requests() {
    let srv = start().await;
    let (code, v) = srv.post("/sessions", json!({ "source": "event e when do end" })).await;
    assert_eq!(code, 400);
    assert_eq!(v["error"], "Syntax");
    let (code, _) = srv.post("/sessions", json!({})).await;
    assert_eq!(code, 400);
    let (code, v) = srv
        .post("/sessions", json!({ "source": "globals x : 0..1 := 0 end event e when true do x := 1, x := 0 end" }))
        .await;
    assert_eq!(code, 400);
    assert_eq!(v["error"], "DoubleAssignment");
}
