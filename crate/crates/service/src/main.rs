use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use emoheal_core::curation::{self, CurationParams, FeatureStream};
use emoheal_core::retrieval::{
    default_nlist, default_nprobe, read_embeddings, read_index, recall_at_k, stub_encode, write_index,
};
use emoheal_core::{ClipEmbedding, IvfIndex};
use emoheal_service::{router, AppState, FeedbackStore, Pipeline, ServiceConfig, SharedIndex};
use tracing::info;

#[derive(Parser)]
#[command(name = "emoheal", version, about = "Emotion-guided music video session tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build, query and evaluate clip indexes.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Cut calm clips out of a frame-feature stream.
    Curate(CurateArgs),
    /// Run the HTTP session service.
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum IndexCommand {
    Build {
        #[arg(long)]
        embeddings: PathBuf,
        /// Defaults to ceil(sqrt(N)).
        #[arg(long)]
        nlist: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    Search {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        text: String,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        nprobe: Option<usize>,
    },
    /// Recall@k against exact search; sweeps every nprobe unless one is given.
    Recall {
        #[arg(long)]
        index: PathBuf,
        /// Query vectors in the embedding file format.
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        nprobe: Option<usize>,
    },
}

#[derive(Args)]
struct CurateArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value_t = curation::DEFAULT_THETA_HIST)]
    theta_hist: f64,
    #[arg(long, default_value_t = curation::DEFAULT_THETA_MOTION)]
    theta_motion: f64,
    #[arg(long, default_value_t = curation::DEFAULT_MERGE_WINDOW_S)]
    merge_window: f64,
    #[arg(long, default_value_t = curation::DEFAULT_MIN_CALM_S)]
    min_calm: f64,
    #[arg(long, default_value_t = curation::DEFAULT_CLIP_LEN_S)]
    clip_len: f64,
    /// Stream id used in clip ids; defaults to the file stem.
    #[arg(long)]
    stream_id: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "EMOHEAL_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "EMOHEAL_HOST")]
    host: Option<String>,
    #[arg(long, env = "EMOHEAL_PORT")]
    port: Option<u16>,
    #[arg(long, env = "EMOHEAL_INDEX")]
    index: Option<PathBuf>,
    #[arg(long, env = "EMOHEAL_SCORER_URL")]
    scorer_url: Option<String>,
    #[arg(long, env = "EMOHEAL_SCORER_TIMEOUT_MS")]
    scorer_timeout_ms: Option<u64>,
    #[arg(long, env = "EMOHEAL_ENCODER_URL")]
    encoder_url: Option<String>,
    #[arg(long, env = "EMOHEAL_ENCODER_TIMEOUT_MS")]
    encoder_timeout_ms: Option<u64>,
    #[arg(long, env = "EMOHEAL_RULE_THRESHOLD")]
    rule_threshold: Option<f64>,
    #[arg(long, env = "EMOHEAL_BLEND")]
    blend: Option<f64>,
    #[arg(long, env = "EMOHEAL_NPROBE")]
    nprobe: Option<usize>,
    #[arg(long, env = "EMOHEAL_FEEDBACK_CAPACITY")]
    feedback_capacity: Option<usize>,
}

impl ServeArgs {
    fn resolve(self) -> Result<ServiceConfig> {
        let mut c = match &self.config {
            Some(path) => ServiceConfig::from_file(path)?,
            None => ServiceConfig::default(),
        };
        macro_rules! take {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = self.$field { c.$target = v; })*
            };
        }
        take!(host => host, port => port, scorer_timeout_ms => scorer_timeout_ms,
              encoder_timeout_ms => encoder_timeout_ms, blend => blend, feedback_capacity => feedback_capacity);
        if self.index.is_some() {
            c.index_path = self.index;
        }
        if self.scorer_url.is_some() {
            c.scorer_url = self.scorer_url;
        }
        if self.encoder_url.is_some() {
            c.encoder_url = self.encoder_url;
        }
        if self.rule_threshold.is_some() {
            c.rule_threshold = self.rule_threshold;
        }
        if self.nprobe.is_some() {
            c.nprobe = self.nprobe;
        }
        Ok(c)
    }
}

fn load_index(path: &Path) -> Result<IvfIndex> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_index(&mut BufReader::new(file)).with_context(|| format!("reading index {}", path.display()))
}

fn index_command(cmd: IndexCommand) -> Result<()> {
    match cmd {
        IndexCommand::Build {
            embeddings,
            nlist,
            seed,
            out,
        } => {
            let file = File::open(&embeddings).with_context(|| format!("opening {}", embeddings.display()))?;
            let data = read_embeddings(&mut BufReader::new(file))?;
            let nlist = nlist.unwrap_or_else(|| default_nlist(data.len()));
            let n = data.len();
            let index = IvfIndex::build(data, nlist, seed)?;
            let mut w = BufWriter::new(File::create(&out).with_context(|| format!("creating {}", out.display()))?);
            write_index(&mut w, &index)?;
            w.flush()?;
            println!("indexed {n} embeddings into {nlist} lists -> {}", out.display());
        }
        IndexCommand::Search { index, text, k, nprobe } => {
            let index = load_index(&index)?;
            let q = stub_encode(&text, index.dim())?;
            let nprobe = nprobe.unwrap_or_else(|| default_nprobe(index.nlist().max(1)));
            for hit in index.search(&q, k, nprobe)?.hits {
                println!("{}\t{:.6}", hit.clip_id, hit.similarity);
            }
        }
        IndexCommand::Recall {
            index,
            queries,
            k,
            nprobe,
        } => {
            let index = load_index(&index)?;
            let file = File::open(&queries).with_context(|| format!("opening {}", queries.display()))?;
            let queries: Vec<Vec<f32>> = read_embeddings(&mut BufReader::new(file))?
                .iter()
                .map(|e| e.vector().to_vec())
                .collect();
            let corpus: Vec<ClipEmbedding> = index.embeddings().cloned().collect();
            let sweep: Vec<usize> = match nprobe {
                Some(n) => vec![n],
                None => (1..=index.nlist()).collect(),
            };
            println!("nprobe\trecall@{k}");
            for n in sweep {
                println!("{n}\t{:.6}", recall_at_k(&index, &corpus, &queries, k, n)?);
            }
        }
    }
    Ok(())
}

fn curate_command(args: CurateArgs) -> Result<()> {
    let text =
        std::fs::read_to_string(&args.features).with_context(|| format!("reading {}", args.features.display()))?;
    let id = args.stream_id.unwrap_or_else(|| {
        args.features
            .file_stem()
            .map_or_else(|| "stream".into(), |s| s.to_string_lossy().into_owned())
    });
    let stream = FeatureStream::parse(id, &text)?;
    let params = CurationParams {
        theta_hist: args.theta_hist,
        theta_motion: args.theta_motion,
        merge_window_s: args.merge_window,
        min_calm_s: args.min_calm,
        clip_len_s: args.clip_len,
    };
    let result = curation::curate(&stream, &params)?;
    std::fs::write(&args.out, curation::clips_to_tsv(&result.clips))
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "{} boundaries, {} calm segments, {} clips -> {}",
        result.boundaries.len(),
        result.segments.len(),
        result.clips.len(),
        args.out.display()
    );
    Ok(())
}

async fn serve(args: ServeArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let index = SharedIndex::default();
    if let Some(path) = &cfg.index_path {
        index.swap(load_index(path)?);
    }
    let pipeline = Pipeline::from_config(&cfg, index)?;
    let state = AppState::new(pipeline, FeedbackStore::new(cfg.feedback_capacity.max(1)));
    let listener = tokio::net::TcpListener::bind((cfg.host.as_str(), cfg.port)).await?;
    let addr: SocketAddr = listener.local_addr()?;
    info!(%addr, corpus_size = state.pipeline.index.corpus_size(), "serving");
    println!("listening on http://{addr}");
    std::io::stdout().flush()?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_env("EMOHEAL_LOG"))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Index(cmd) => index_command(cmd),
        Command::Curate(args) => curate_command(args),
        Command::Serve(args) => tokio::runtime::Runtime::new()?.block_on(serve(args)),
    }
}
