//! Acceptance gate: one PASS/FAIL line per primary criterion.
//!
//! Run with `cargo test -p emoheal-service --test acceptance`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime};

use common::{random_vectors, seeded_corpus, write_index_file, ServerProcess, DIM};
use emoheal_core::curation::{curate, partition_clips, CalmSegment, CurationParams, FeatureStream, FrameFeature};
use emoheal_core::emotion::{focal_loss, focal_loss_grad, FocalLossParams, NUM_EMOTIONS};
use emoheal_core::journey::plan_journey;
use emoheal_core::knowledge_graph::{blend_parameters, infer_parameters, RuleSet, WeightMatrix, NUM_PARAMS};
use emoheal_core::prompt::build_prompt;
use emoheal_core::retrieval::{exact_search, recall_at_k, stub_encode};
use emoheal_core::stats::{one_sample_t_from_summary, pearson_r};
use emoheal_core::{EmotionVector, IvfIndex, MusicalParameters, PromptTemplate, TargetPreset, Tier};
use emoheal_service::{Pipeline, SharedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn random_emotion(rng: &mut ChaCha8Rng) -> EmotionVector {
    // Mix of diffuse and peaked vectors so both tiers are exercised.
    let scale = if rng.random_bool(0.5) { 0.75 } else { 1.0 };
    let raw: Vec<f64> = (0..NUM_EMOTIONS).map(|_| scale * rng.random::<f64>()).collect();
    EmotionVector::new(&raw).unwrap()
}

fn random_params(rng: &mut ChaCha8Rng) -> MusicalParameters {
    MusicalParameters::from_array(std::array::from_fn(|_| rng.random())).unwrap()
}

#[allow(clippy::needless_range_loop)]
fn tier2_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let e = random_emotion(&mut rng);
        let mut w = [[0.0; NUM_PARAMS]; NUM_EMOTIONS];
        for row in &mut w {
            for x in row.iter_mut() {
                *x = rng.random_range(-1.0..=1.0);
            }
        }
        let got = blend_parameters(&e, &WeightMatrix::new(w).unwrap()).to_array();
        for j in 0..NUM_PARAMS {
            let mut z = 0.0;
            for i in 0..NUM_EMOTIONS {
                z += e.as_array()[i] * w[i][j];
            }
            worst = worst.max((got[j] - 1.0 / (1.0 + (-z).exp())).abs());
        }
    }
    let elapsed = start.elapsed();
    ensure!(worst < 1e-9, "max deviation {worst:e}");
    ensure!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    Ok(format!(
        "1000 pairs, max |diff| {worst:.1e}, {:.0} ms",
        elapsed.as_secs_f64() * 1e3
    ))
}

fn tier_routing() -> Outcome {
    let rules = RuleSet::bundled();
    let w = WeightMatrix::bundled();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut mismatches, mut tier1) = (0, 0);
    for _ in 0..1000 {
        let e = random_emotion(&mut rng);
        let expect = rules
            .rules()
            .iter()
            .any(|r| e.as_array()[r.emotion.index()] > r.threshold);
        let got = infer_parameters(&e, &rules, &w, &MusicalParameters::NEUTRAL);
        tier1 += usize::from(expect);
        if (got.tier == Tier::Rule) != expect {
            mismatches += 1;
        }
        if got.tier == Tier::Blend && got.params != blend_parameters(&e, &w) {
            mismatches += 1;
        }
    }
    ensure!(mismatches == 0, "{mismatches} mismatches");
    ensure!(tier1 > 0 && tier1 < 1000, "only one tier exercised ({tier1} tier-1)");
    Ok(format!(
        "1000 vectors, {tier1} tier-1 / {} tier-2, 0 mismatches",
        1000 - tier1
    ))
}

fn focal() -> Outcome {
    let grid = [0.01, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99];
    let mut worst = 0.0f64;
    for gamma in [0.0, 1.0, 2.0, 5.0] {
        for alpha in [0.25, 1.0] {
            let fp = FocalLossParams::new(alpha, gamma).unwrap();
            ensure!(
                focal_loss(1.0, &fp).unwrap() == 0.0,
                "L(1) != 0 at alpha {alpha}, gamma {gamma}"
            );
            for &p in &grid {
                let h = 1e-6;
                let fd = (focal_loss(p + h, &fp).unwrap() - focal_loss(p - h, &fp).unwrap()) / (2.0 * h);
                let g = focal_loss_grad(p, &fp).unwrap();
                worst = worst.max(((g - fd) / fd).abs());
            }
        }
    }
    ensure!(worst < 1e-5, "gradient relative error {worst:e}");
    let ce = FocalLossParams::new(1.0, 0.0).unwrap();
    for &p in &grid {
        let d = (focal_loss(p, &ce).unwrap() + p.ln()).abs();
        ensure!(d <= 1e-12, "cross-entropy mismatch {d:e} at p {p}");
    }
    Ok(format!("L(1)=0, CE within 1e-12, max grad rel err {worst:.1e}"))
}

fn ann_exactness() -> Result<(String, IvfIndex), String> {
    let mut details = Vec::new();
    let mut big = None;
    for (n, seed) in [(1_000usize, 1u64), (10_000, 2)] {
        let corpus = seeded_corpus(n, DIM, seed);
        let index = IvfIndex::build(corpus.clone(), emoheal_core::retrieval::default_nlist(n), seed).unwrap();
        let nlist = index.nlist();
        let queries = random_vectors(200, DIM, seed + 100);
        for k in [1, 3, 10] {
            for (qi, q) in queries.iter().enumerate() {
                let a = index.search(q, k, nlist).unwrap();
                let b = exact_search(&corpus, q, k).unwrap();
                ensure!(a == b, "n={n} k={k} query {qi}: {:?} vs {:?}", a.ids(), b.ids());
            }
        }
        // Recall sweep against exact top-3 sets computed once.
        let truth: Vec<HashSet<String>> = queries
            .iter()
            .map(|q| {
                exact_search(&corpus, q, 3)
                    .unwrap()
                    .ids()
                    .into_iter()
                    .map(String::from)
                    .collect()
            })
            .collect();
        let mut prev = 0.0;
        for nprobe in 1..=nlist {
            let mut found = 0usize;
            for (q, t) in queries.iter().zip(&truth) {
                found += index
                    .search(q, 3, nprobe)
                    .unwrap()
                    .ids()
                    .iter()
                    .filter(|id| t.contains(**id))
                    .count();
            }
            let r = found as f64 / (3 * queries.len()) as f64;
            ensure!(r >= prev, "n={n}: recall fell from {prev} to {r} at nprobe {nprobe}");
            prev = r;
        }
        ensure!(prev == 1.0, "n={n}: recall@3 at nprobe=nlist is {prev}");
        let lib = recall_at_k(&index, &corpus, &queries, 3, nlist).unwrap();
        ensure!(lib == 1.0, "n={n}: recall_at_k at nprobe=nlist is {lib}");
        details.push(format!("n={n} nlist={nlist}"));
        big = Some(index);
    }
    Ok((
        format!(
            "{}; k in {{1,3,10}} x 200 queries identical, recall@3 monotone to 1.0",
            details.join(", ")
        ),
        big.unwrap(),
    ))
}

fn latency(index: IvfIndex) -> Outcome {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let pipeline = Pipeline::bundled(SharedIndex::new(index));
    let texts = [
        "I feel afraid and nervous tonight",
        "the table is by the window",
        "I am so angry at everything",
        "grateful and relieved after a long week",
        "sad and lonely",
    ];
    let mut times = Vec::new();
    for i in 0..51 {
        let start = Instant::now();
        let s = rt
            .block_on(pipeline.create_session(texts[i % texts.len()]))
            .map_err(|e| e.to_string())?;
        times.push(start.elapsed().as_secs_f64());
        ensure!(
            s.stages.len() == 3 && s.stages.iter().all(|st| st.clips.len() == 3),
            "malformed session"
        );
    }
    times.sort_by(f64::total_cmp);
    let median = times[times.len() / 2];
    ensure!(median < 1.0, "median {median:.3} s");
    Ok(format!(
        "10k clips, 51 sessions, median {:.2} ms, max {:.2} ms",
        median * 1e3,
        times[50] * 1e3
    ))
}

fn curation_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let frames = (0..1000)
        .map(|i| {
            let histogram = if i < 500 {
                vec![0.6, 0.3, 0.1]
            } else {
                vec![0.1, 0.3, 0.6]
            };
            let motion = if (100..500).contains(&i) {
                0.2
            } else {
                1.0 + rng.random::<f64>()
            };
            FrameFeature {
                t: i as f64,
                histogram,
                motion,
            }
        })
        .collect();
    let stream = FeatureStream::new("synthetic", 3, frames).unwrap();
    let c = curate(&stream, &CurationParams::default()).map_err(|e| e.to_string())?;
    ensure!(c.boundaries.len() == 1, "{} boundaries", c.boundaries.len());
    ensure!(
        c.segments.len() == 1 && c.segments[0].duration() == 400.0,
        "segments {:?}",
        c.segments
    );
    ensure!(c.clips.len() == 2, "{} clips", c.clips.len());
    ensure!(
        c.clips.iter().all(|k| k.end_s - k.start_s == 180.0),
        "clip lengths {:?}",
        c.clips
    );
    ensure!(c.clips[0].end_s <= c.clips[1].start_s, "clips overlap");
    for _ in 0..200 {
        let start = rng.random_range(0.0..10_000.0f64);
        let seg = CalmSegment {
            start_s: start,
            end_s: start + rng.random_range(0.0..3000.0),
        };
        let n = partition_clips("r", &[seg], 180.0).map_err(|e| e.to_string())?.len();
        let want = (seg.duration() / 180.0).floor() as usize;
        ensure!(n == want, "{seg:?}: {n} clips, expected {want}");
    }
    Ok("1 boundary, 1 x 400 s segment, 2 x 180 s clips; 200 random segments obey floor(d/180)".into())
}

fn statistics() -> Outcome {
    let s = one_sample_t_from_summary(40, 4.12, 0.89, 3.0).map_err(|e| e.to_string())?;
    let t_oracle = (4.12 - 3.0) / (0.89 / 40f64.sqrt());
    ensure!((7.90..=8.02).contains(&s.t), "t = {}", s.t);
    ensure!((s.t - t_oracle).abs() < 1e-12, "t {} vs oracle {t_oracle}", s.t);
    ensure!(s.p_two_sided < 0.001, "p = {}", s.p_two_sided);

    // n = 40 pair with sample correlation exactly 0.72.
    let x: Vec<f64> = (0..40).map(|i| ((i * 17) % 23) as f64).collect();
    let noise: Vec<f64> = (0..40).map(|i| ((i * 29 + 5) % 31) as f64).collect();
    let center = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|a| a - m).collect::<Vec<_>>()
    };
    let unit = |v: Vec<f64>| {
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.into_iter().map(|a| a / n).collect::<Vec<_>>()
    };
    let xu = unit(center(&x));
    let nc = center(&noise);
    let proj: f64 = xu.iter().zip(&nc).map(|(a, b)| a * b).sum();
    let ou = unit(nc.iter().zip(&xu).map(|(b, a)| b - proj * a).collect());
    let y: Vec<f64> = xu
        .iter()
        .zip(&ou)
        .map(|(a, o)| 0.72 * a + (1.0f64 - 0.72 * 0.72).sqrt() * o)
        .collect();
    let c = pearson_r(&x, &y).map_err(|e| e.to_string())?;
    ensure!((c.r - 0.72).abs() < 1e-9, "constructed r = {}", c.r);
    ensure!(c.p_two_sided < 0.001, "p = {}", c.p_two_sided);
    Ok(format!(
        "t = {:.4} (p = {:.2e}); r = {:.4} (p = {:.2e})",
        s.t, s.p_two_sided, c.r, c.p_two_sided
    ))
}

fn journey() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..1000 {
        let m = random_params(&mut rng);
        let t = TargetPreset {
            params: random_params(&mut rng),
        };
        let b: f64 = rng.random();
        let guide = plan_journey(m, &t, b).unwrap().stages()[1].to_array();
        let (ma, ta) = (m.to_array(), t.params.to_array());
        for j in 0..NUM_PARAMS {
            let (lo, hi) = (ma[j].min(ta[j]), ma[j].max(ta[j]));
            ensure!(
                guide[j] >= lo && guide[j] <= hi,
                "triple {i} param {j}: {} outside [{lo}, {hi}]",
                guide[j]
            );
        }
        ensure!(
            plan_journey(m, &t, 0.0).unwrap().stages()[1] == m,
            "blend 0 != match at triple {i}"
        );
        ensure!(
            plan_journey(m, &t, 1.0).unwrap().stages()[1] == t.params,
            "blend 1 != target at triple {i}"
        );
    }
    Ok("1000 triples within bounds, blend 0/1 endpoints exact".into())
}

fn prompt_injectivity() -> Outcome {
    let template = PromptTemplate::bundled();
    let bins = template.bins();
    let mut prompts = HashSet::new();
    let mut vectors = HashSet::new();
    for code in 0..bins.pow(NUM_PARAMS as u32) {
        let mut c = code;
        let values: [f64; NUM_PARAMS] = std::array::from_fn(|_| {
            let b = c % bins;
            c /= bins;
            (b as f64 + 0.5) / bins as f64
        });
        let prompt = build_prompt(&MusicalParameters::from_array(values).unwrap(), &template);
        let v = stub_encode(&prompt, DIM).map_err(|e| e.to_string())?;
        vectors.insert(v.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        prompts.insert(prompt);
    }
    ensure!(prompts.len() == 729, "{} distinct prompts", prompts.len());
    ensure!(vectors.len() == 729, "{} distinct vectors", vectors.len());
    Ok("729 distinct prompts, 729 distinct stub vectors".into())
}

type Snapshot = BTreeMap<PathBuf, (u64, Option<SystemTime>)>;

fn snapshot(roots: &[(&Path, Option<&Path>)]) -> Snapshot {
    let mut out = Snapshot::new();
    for &(root, skip) in roots {
        let walker = walkdir::WalkDir::new(root)
            .into_iter()
            .filter_entry(|e| Some(e.path()) != skip);
        for entry in walker.flatten() {
            if let Ok(meta) = entry.metadata() {
                if meta.is_file() {
                    out.insert(entry.path().to_path_buf(), (meta.len(), meta.modified().ok()));
                }
            }
        }
    }
    out
}

fn ephemerality() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let workdir = dir.path().join("work");
    std::fs::create_dir(&workdir).unwrap();
    let index_path = dir.path().join("clips.ivf");
    write_index_file(&common::seeded_index(200, 9), &index_path);
    let cwd = std::env::current_dir().unwrap();
    let target = cwd.join("target");
    let tmp = std::env::temp_dir();
    let roots: [(&Path, Option<&Path>); 3] = [(&workdir, None), (&cwd, Some(&target)), (&tmp, None)];

    let server = ServerProcess::spawn(&index_path, &workdir);
    let rt = tokio::runtime::Runtime::new().unwrap();
    let before = snapshot(&roots);
    let http = reqwest::Client::new();
    let texts = [
        "I feel afraid and nervous tonight",
        "happy and excited",
        "the table is by the window",
        "so sad",
    ];
    let get_n = |base: &str| -> Result<u64, String> {
        rt.block_on(async {
            let v: Value = http
                .get(format!("{base}/api/stats"))
                .send()
                .await
                .map_err(|e| e.to_string())?
                .json()
                .await
                .map_err(|e| e.to_string())?;
            v["n"].as_u64().ok_or_else(|| "stats without n".to_string())
        })
    };
    rt.block_on(async {
        for i in 0..100 {
            let s = http
                .post(format!("{}/api/session", server.base))
                .json(&json!({ "text": format!("{} #{i}", texts[i % texts.len()]) }))
                .send()
                .await
                .map_err(|e| e.to_string())?;
            ensure!(s.status() == 200, "session {i}: {}", s.status());
            let f = http
                .post(format!("{}/api/feedback", server.base))
                .json(&json!({ "mood_impact": 1 + i % 5, "emotion_accuracy": 1 + (i / 5) % 5, "atmosphere": 4, "coherence": 3 }))
                .send()
                .await
                .map_err(|e| e.to_string())?;
            ensure!(f.status() == 204, "feedback {i}: {}", f.status());
        }
        Ok(())
    })?;
    let after = snapshot(&roots);
    let changed: Vec<&PathBuf> = after
        .iter()
        .filter(|(p, m)| before.get(*p) != Some(*m))
        .map(|(p, _)| p)
        .collect();
    ensure!(changed.is_empty(), "new or modified files: {changed:?}");
    let held = get_n(&server.base)?;
    ensure!(held == 100, "buffer holds {held} records before restart");
    server.kill();
    let restarted = ServerProcess::spawn(&index_path, &workdir);
    let n = get_n(&restarted.base)?;
    ensure!(n == 0, "buffer holds {n} records after restart");
    Ok(format!(
        "100 session+feedback pairs, {} files unchanged, buffer 100 -> 0 across restart",
        after.len()
    ))
}

fn main() {
    let mut failures = 0;
    let mut report = |name: &str, outcome: Outcome| match outcome {
        Ok(detail) => println!("[PASS] {name}: {detail}"),
        Err(why) => {
            failures += 1;
            println!("[FAIL] {name}: {why}");
        }
    };
    report("tier-2 mapping oracle", tier2_oracle());
    report("tier routing", tier_routing());
    report("focal loss", focal());
    let big = match ann_exactness() {
        Ok((detail, index)) => {
            report("ANN exactness", Ok(detail));
            Some(index)
        }
        Err(e) => {
            report("ANN exactness", Err(e));
            None
        }
    };
    let big = big.unwrap_or_else(|| common::seeded_index(10_000, 2));
    report("latency", latency(big));
    report("curation", curation_check());
    report("statistics", statistics());
    report("journey invariant", journey());
    report("prompt injectivity", prompt_injectivity());
    report("ephemerality", ephemerality());
    println!("10 criteria, {failures} failed");
    if failures > 0 {
        std::process::exit(1);
    }
}
