//! Fixtures and a concurrent soak driver for the annotation service.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use lexlabel::gateway::{Embedder, EmbeddingGateway, GatewayConfig, HashingEmbedder};
use lexlabel::{Embedding, Error, LabelEntry, SemanticIndex, Taxonomy};
use lexlabel_service::{AppState, ServiceConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub const DIM: usize = 64;

/// Hashing embedder that can be switched off to simulate an outage.
pub struct Switchable {
    inner: HashingEmbedder,
    pub down: AtomicBool,
    pub calls: AtomicU64,
}

impl Switchable {
    pub fn new() -> Self {
        Switchable {
            inner: HashingEmbedder::new(DIM),
            down: AtomicBool::new(false),
            calls: AtomicU64::new(0),
        }
    }
}

impl Embedder for Switchable {
    fn model_name(&self) -> &str {
        "switchable-hashing"
    }
    fn embed_batch(&self, texts: &[String]) -> lexlabel::Result<Vec<Vec<f32>>> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if self.down.load(Ordering::SeqCst) {
            return Err(Error::ServiceUnreachable("switched off".into()));
        }
        self.inner.embed_batch(texts)
    }
}

pub fn toy_state() -> AppState {
    let v = |x: &[f32]| Embedding::new(x.to_vec()).unwrap();
    let t = Taxonomy::new(vec![
        LabelEntry::new("A", "Alpha", "a")
            .unwrap()
            .with_embedding(v(&[1.0, 0.0])),
        LabelEntry::new("B", "Beta", "b")
            .unwrap()
            .with_embedding(v(&[0.0, 1.0])),
        LabelEntry::new("C", "Gamma", "c")
            .unwrap()
            .with_embedding(v(&[0.6, 0.8])),
    ])
    .unwrap();
    let index = SemanticIndex::build(&t).unwrap();
    AppState::new(t, index, None, ServiceConfig { default_k: 2 }).unwrap()
}

pub const VOCAB: &[&str] = &[
    "torture",
    "prison",
    "detention",
    "liberty",
    "trial",
    "court",
    "fair",
    "hearing",
    "privacy",
    "family",
    "home",
    "religion",
    "belief",
    "speech",
    "press",
    "assembly",
    "union",
    "property",
    "tax",
    "discrimination",
    "remedy",
    "appeal",
    "delay",
    "evidence",
    "witness",
    "asylum",
    "expulsion",
    "child",
    "marriage",
    "election",
];

pub fn description(rng: &mut ChaCha8Rng, words: usize) -> String {
    (0..words)
        .map(|_| VOCAB[rng.random_range(0..VOCAB.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

/// `k` labels embedded with the hashing model, plus a gateway over
/// `embedder`.
pub fn hashing_state(k: usize, embedder: Arc<Switchable>, default_k: usize) -> AppState {
    let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
    let hasher = HashingEmbedder::new(DIM);
    let entries = (0..k)
        .map(|i| {
            let d = format!("{} base{i}", description(&mut rng, 4));
            LabelEntry::new(&format!("base-{i}"), &format!("Base {i}"), &d)
                .unwrap()
                .with_embedding(Embedding::new(hasher.embed_one(&d)).unwrap())
        })
        .collect();
    let t = Taxonomy::new(entries).unwrap();
    let index = SemanticIndex::build(&t).unwrap();
    let gateway = EmbeddingGateway::new(
        embedder,
        None,
        GatewayConfig {
            expected_dim: Some(DIM),
            max_retries: 0,
            ..GatewayConfig::default()
        },
    )
    .unwrap();
    AppState::new(t, index, Some(Arc::new(gateway)), ServiceConfig { default_k }).unwrap()
}

pub struct Server {
    pub base_url: String,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl Drop for Server {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Runs the service on an ephemeral port in a background runtime.
pub fn spawn_server(state: AppState) -> Server {
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let (addr_tx, addr_rx) = std::sync::mpsc::channel();
    let thread = std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(4)
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            addr_tx.send(listener.local_addr().unwrap()).unwrap();
            lexlabel_service::serve(listener, state, async {
                let _ = rx.await;
            })
            .await
            .unwrap();
        });
    });
    let addr = addr_rx.recv().unwrap();
    Server {
        base_url: format!("http://{addr}"),
        shutdown: Some(tx),
        thread: Some(thread),
    }
}

pub fn http_agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(10)))
        .build()
        .into()
}

pub fn post(agent: &ureq::Agent, url: &str, body: &Value) -> (u16, Value) {
    let mut r = agent.post(url).send_json(body).unwrap();
    let status = r.status().as_u16();
    (status, r.body_mut().read_json().unwrap_or(Value::Null))
}

pub fn get(agent: &ureq::Agent, url: &str) -> (u16, Value) {
    let mut r = agent.get(url).call().unwrap();
    let status = r.status().as_u16();
    (status, r.body_mut().read_json().unwrap_or(Value::Null))
}

#[derive(Debug, Default)]
pub struct SoakReport {
    pub predictions: usize,
    pub mutations: usize,
    /// Responses naming a label absent from the taxonomy at their version.
    pub closed_world_violations: usize,
    /// Clients that saw a version lower than one they saw earlier.
    pub version_regressions: usize,
    /// Any status other than 200 on predict or 201/200 on mutation.
    pub unexpected_statuses: Vec<u16>,
}

impl SoakReport {
    pub fn clean(&self) -> bool {
        self.closed_world_violations == 0 && self.version_regressions == 0 && self.unexpected_statuses.is_empty()
    }
}

/// Taxonomy version and labels of one prediction response.
type Observation = (u64, Vec<String>);

/// `clients` predictors (alternating text and vector requests) race one
/// mutator adding and removing labels for `duration`. Afterwards every
/// prediction is checked against the label set at its stamped version.
pub fn soak(base_url: &str, duration: Duration, clients: usize, seed: u64) -> SoakReport {
    let agent = http_agent();
    let (_, tax) = get(&agent, &format!("{base_url}/v1/taxonomy"));
    let v0 = tax["taxonomy_version"].as_u64().unwrap();
    let base: BTreeSet<String> = tax["labels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| l["id"].as_str().unwrap().to_string())
        .collect();
    let history: Arc<Mutex<BTreeMap<u64, BTreeSet<String>>>> =
        Arc::new(Mutex::new(BTreeMap::from([(v0, base.clone())])));
    let stop = Arc::new(AtomicBool::new(false));
    let unexpected = Arc::new(Mutex::new(Vec::new()));

    let mutator = {
        let (history, stop, unexpected, url) =
            (history.clone(), stop.clone(), unexpected.clone(), base_url.to_string());
        std::thread::spawn(move || {
            let agent = http_agent();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut live: Vec<String> = Vec::new();
            let mut current = base;
            let mut n = 0usize;
            let mut done = 0usize;
            while !stop.load(Ordering::SeqCst) {
                let remove = !live.is_empty() && (live.len() > 8 || rng.random_bool(0.4));
                let (status, body, id) = if remove {
                    let id = live.remove(rng.random_range(0..live.len()));
                    let mut r = agent.delete(&format!("{url}/v1/labels/{id}")).call().unwrap();
                    let s = r.status().as_u16();
                    let b: Value = r.body_mut().read_json().unwrap_or(Value::Null);
                    (s, b, id)
                } else {
                    let id = format!("dyn-{n}");
                    n += 1;
                    let body = json!({"id": id, "name": id, "description": description(&mut rng, 3)});
                    let (s, b) = post(&agent, &format!("{url}/v1/labels"), &body);
                    live.push(id.clone());
                    (s, b, id)
                };
                if status == 200 || status == 201 {
                    if remove {
                        current.remove(&id);
                    } else {
                        current.insert(id);
                    }
                    done += 1;
                    let v = body["taxonomy_version"].as_u64().unwrap();
                    history.lock().unwrap().insert(v, current.clone());
                } else {
                    unexpected.lock().unwrap().push(status);
                }
            }
            done
        })
    };

    let observed: Arc<Mutex<Vec<Observation>>> = Arc::default();
    let regressions = Arc::new(AtomicU64::new(0));
    let predictors: Vec<_> = (0..clients)
        .map(|c| {
            let (stop, observed, unexpected, regressions, url) = (
                stop.clone(),
                observed.clone(),
                unexpected.clone(),
                regressions.clone(),
                base_url.to_string(),
            );
            std::thread::spawn(move || {
                let agent = http_agent();
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((c as u64 + 1) * 7919));
                let mut last = 0u64;
                let mut local = Vec::new();
                while !stop.load(Ordering::SeqCst) {
                    let body = if rng.random_bool(0.5) {
                        json!({"text": description(&mut rng, 3), "k": rng.random_range(1..=6)})
                    } else {
                        let v: Vec<f64> = (0..DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
                        json!({"vector": v, "k": rng.random_range(1..=6)})
                    };
                    let (status, resp) = post(&agent, &format!("{url}/v1/predict"), &body);
                    if status != 200 {
                        unexpected.lock().unwrap().push(status);
                        continue;
                    }
                    let v = resp["taxonomy_version"].as_u64().unwrap();
                    if v < last {
                        regressions.fetch_add(1, Ordering::SeqCst);
                    }
                    last = v;
                    let labels = resp["labels"]
                        .as_array()
                        .unwrap()
                        .iter()
                        .map(|l| l.as_str().unwrap().to_string())
                        .collect();
                    local.push((v, labels));
                }
                observed.lock().unwrap().extend(local);
            })
        })
        .collect();

    let start = Instant::now();
    while start.elapsed() < duration {
        std::thread::sleep(Duration::from_millis(20));
    }
    stop.store(true, Ordering::SeqCst);
    for p in predictors {
        p.join().unwrap();
    }
    let mutations = mutator.join().unwrap();

    let history = history.lock().unwrap();
    let observed = observed.lock().unwrap();
    let closed_world_violations = observed
        .iter()
        .filter(|(v, labels)| match history.get(v) {
            Some(set) => labels.iter().any(|l| !set.contains(l)),
            None => true,
        })
        .count();
    let unexpected_statuses = unexpected.lock().unwrap().clone();
    SoakReport {
        predictions: observed.len(),
        mutations,
        closed_world_violations,
        version_regressions: regressions.load(Ordering::SeqCst) as usize,
        unexpected_statuses,
    }
}
