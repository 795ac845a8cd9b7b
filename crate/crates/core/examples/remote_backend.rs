//! Decode through the HTTP logits protocol. With no URL argument, a local
//! server answering from a scripted fixture is started first.
//!
//!     cargo run --example remote_backend -- [http://host:port] [query id]
//!
//! Endpoints: POST /v1/next, POST /v1/rollout, GET /v1/info, POST /v1/sim.

use std::path::Path;

use flowplan::domain::shipped;
use flowplan::{flap_decode, DecoderConfig, LanguageModel, LexicalSimilarity, RemoteLm, RemoteSimilarity, ScriptedLm, Similarity};
use serde_json::{json, Value};

fn answer(lm: &ScriptedLm, sim: &LexicalSimilarity, url: &str, body: &Value) -> anyhow::Result<Value> {
    let s = |k: &str| body[k].as_str().unwrap_or_default();
    let n = |k: &str| body[k].as_u64().unwrap_or(1) as usize;
    Ok(match url {
        "/v1/next" => {
            let d = lm.next_distribution(s("context"), n("top_k"))?;
            json!({ "entries": d.entries() })
        }
        "/v1/rollout" => {
            let r = lm.rollout_greedy(s("context"), n("max_tokens"), s("stop"))?;
            json!({ "text": r.text, "stopped": r.stopped })
        }
        "/v1/info" => json!(lm.info()),
        "/v1/sim" => json!({ "score": sim.sim(s("a"), s("b")) }),
        other => anyhow::bail!("no route {other}"),
    })
}

fn spawn_local(fixture: &Path) -> anyhow::Result<String> {
    let lm = ScriptedLm::load(fixture)?;
    let server = tiny_http::Server::http("127.0.0.1:0").map_err(|e| anyhow::anyhow!("{e}"))?;
    let url = format!("http://{}", server.server_addr());
    std::thread::spawn(move || {
        let sim = LexicalSimilarity::default();
        for mut req in server.incoming_requests() {
            let mut raw = String::new();
            let _ = req.as_reader().read_to_string(&mut raw);
            let body = serde_json::from_str(&raw).unwrap_or(Value::Null);
            let resp = match answer(&lm, &sim, req.url(), &body) {
                Ok(v) => tiny_http::Response::from_string(v.to_string()),
                Err(e) => tiny_http::Response::from_string(e.to_string()).with_status_code(400),
            };
            let _ = req.respond(resp);
        }
    });
    Ok(url)
}

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let url = args.next();
    let id = args.next().unwrap_or_else(|| "rr-cancel-ride-1".into());
    let url = match url {
        Some(u) => u,
        None => spawn_local(
            &Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("data/fixtures/adversarial/{id}.toml")),
        )?,
    };

    let lm = RemoteLm::new(&url);
    println!("backend {url}: {:?}", lm.fetch_info()?);
    let remote_sim = RemoteSimilarity::new(&url);
    println!(
        "remote sim(\"Cancel the ride\", \"Cancel the ride booking\") = {:.3}",
        remote_sim.try_sim("Cancel the ride", "Cancel the ride booking").map_err(anyhow::Error::msg)?
    );

    let (domain, query) = shipped::all()
        .into_iter()
        .find_map(|d| d.query(&id).cloned().map(|q| (d, q)))
        .ok_or_else(|| anyhow::anyhow!("unknown query {id}"))?;
    let out = flap_decode(&lm, &LexicalSimilarity::default(), &domain, &query, &DecoderConfig::default())?;
    println!("\n{}", out.completion);
    Ok(())
}
