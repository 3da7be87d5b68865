#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::net::SocketAddr;
use std::path::Path;
use std::process::{Child, Command, Stdio};

use axum::Router;
use emoheal_core::{ClipEmbedding, IvfIndex};
use emoheal_service::{router, AppState, FeedbackStore, Pipeline, SharedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DIM: usize = 128;

pub fn gaussian(rng: &mut ChaCha8Rng) -> f32 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    ((-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()) as f32
}

pub fn random_vectors(n: usize, dim: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| gaussian(&mut rng)).collect()).collect()
}

pub fn seeded_corpus(n: usize, dim: usize, seed: u64) -> Vec<ClipEmbedding> {
    random_vectors(n, dim, seed)
        .into_iter()
        .enumerate()
        .map(|(i, v)| ClipEmbedding::new(format!("clip-{i:05}"), &v).unwrap())
        .collect()
}

pub fn seeded_index(n: usize, seed: u64) -> IvfIndex {
    let corpus = seeded_corpus(n, DIM, seed);
    IvfIndex::build(corpus, emoheal_core::retrieval::default_nlist(n), seed).unwrap()
}

pub async fn spawn_router(app: Router) -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    addr
}

/// Serves the bundled pipeline over `index`; returns the base URL and state.
pub async fn spawn_app(pipeline: Pipeline) -> (String, AppState) {
    let state = AppState::new(pipeline, FeedbackStore::default());
    let addr = spawn_router(router(state.clone())).await;
    (format!("http://{addr}"), state)
}

pub async fn spawn_default_app(corpus: usize) -> (String, AppState) {
    spawn_app(Pipeline::bundled(SharedIndex::new(seeded_index(corpus, 7)))).await
}

/// A running `emoheal serve` child process, killed on drop.
pub struct ServerProcess {
    pub child: Child,
    pub base: String,
}

impl ServerProcess {
    pub fn spawn(index: &Path, cwd: &Path) -> Self {
        let mut child = Command::new(env!("CARGO_BIN_EXE_emoheal"))
            .args(["serve", "--port", "0", "--index"])
            .arg(index)
            .current_dir(cwd)
            .env_remove("EMOHEAL_CONFIG")
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("spawn emoheal serve");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .unwrap();
        let base = line
            .trim()
            .strip_prefix("listening on ")
            .expect("startup line")
            .to_string();
        Self { child, base }
    }

    pub fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }
}

impl Drop for ServerProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub fn write_index_file(index: &IvfIndex, path: &Path) {
    let mut buf = Vec::new();
    emoheal_core::retrieval::write_index(&mut buf, index).unwrap();
    std::fs::write(path, buf).unwrap();
}
