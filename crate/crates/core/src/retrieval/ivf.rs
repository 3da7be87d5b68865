use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{check_corpus, cosine, normalize, top_k, ClipEmbedding, RetrievalError, SearchResult};

pub const KMEANS_MAX_ITERS: usize = 100;
/// Lloyd iterations stop once no centroid moves further than this.
pub const KMEANS_TOLERANCE: f64 = 1e-6;

/// `ceil(sqrt(n))`, at least 1.
pub fn default_nlist(n: usize) -> usize {
    let mut r = (n as f64).sqrt().ceil() as usize;
    while r * r < n {
        r += 1;
    }
    while r > 1 && (r - 1) * (r - 1) >= n {
        r -= 1;
    }
    r.max(1)
}

pub fn default_nprobe(nlist: usize) -> usize {
    (nlist / 8).max(1)
}

pub(crate) fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

/// Index of the closest centroid; ties go to the lower index.
pub(crate) fn nearest(v: &[f32], centroids: &[Vec<f32>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(v, c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn kmeans_pp_init(data: &[ClipEmbedding], nlist: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f32>> {
    let n = data.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![data[first].vector().to_vec()];
    let mut min_d: Vec<f64> = data.iter().map(|e| sq_dist(e.vector(), &centroids[0])).collect();
    while centroids.len() < nlist {
        let total: f64 = min_d.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in min_d.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                if target < d {
                    pick = Some(i);
                    break;
                }
                target -= d;
            }
            // Rounding can leave `target` just past the last positive weight.
            pick.unwrap_or_else(|| min_d.iter().rposition(|&d| d > 0.0).expect("total > 0"))
        } else {
            // Remaining points coincide with chosen centroids.
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        let c = data[pick].vector().to_vec();
        for (d, e) in min_d.iter_mut().zip(data) {
            *d = d.min(sq_dist(e.vector(), &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign(data: &[ClipEmbedding], centroids: &[Vec<f32>]) -> Vec<usize> {
    data.par_iter().map(|e| nearest(e.vector(), centroids)).collect()
}

fn lloyd(data: &[ClipEmbedding], mut centroids: Vec<Vec<f32>>, dim: usize) -> Vec<Vec<f32>> {
    for _ in 0..KMEANS_MAX_ITERS {
        let labels = assign(data, &centroids);
        let mut sums = vec![vec![0.0f64; dim]; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (e, &l) in data.iter().zip(&labels) {
            counts[l] += 1;
            for (s, &x) in sums[l].iter_mut().zip(e.vector()) {
                *s += x as f64;
            }
        }
        let mut moved = 0.0f64;
        for ((c, s), &n) in centroids.iter_mut().zip(&sums).zip(&counts) {
            // Empty cells keep their previous centroid.
            if n == 0 {
                continue;
            }
            let updated: Vec<f32> = s.iter().map(|v| (v / n as f64) as f32).collect();
            moved = moved.max(sq_dist(c, &updated).sqrt());
            *c = updated;
        }
        if moved < KMEANS_TOLERANCE {
            break;
        }
    }
    centroids
}

/// Inverted-file index over unit-norm embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct IvfIndex {
    dim: usize,
    centroids: Vec<Vec<f32>>,
    lists: Vec<Vec<ClipEmbedding>>,
}

impl IvfIndex {
    /// Learns `nlist` centroids with seeded k-means++ and Lloyd iterations,
    /// then files every embedding under its nearest centroid.
    pub fn build(embeddings: Vec<ClipEmbedding>, nlist: usize, seed: u64) -> Result<Self, RetrievalError> {
        let dim = check_corpus(&embeddings)?;
        if nlist == 0 {
            return Err(RetrievalError::ZeroLists);
        }
        if nlist > embeddings.len() {
            return Err(RetrievalError::TooManyLists {
                nlist,
                count: embeddings.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = kmeans_pp_init(&embeddings, nlist, &mut rng);
        let centroids = lloyd(&embeddings, init, dim);
        let labels = assign(&embeddings, &centroids);
        let mut lists = vec![Vec::new(); nlist];
        for (e, l) in embeddings.into_iter().zip(labels) {
            lists[l].push(e);
        }
        Ok(Self { dim, centroids, lists })
    }

    /// An index with no lists; every search returns no hits.
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            centroids: Vec::new(),
            lists: Vec::new(),
        }
    }

    /// Reassembles an index from stored parts, re-checking every invariant.
    pub fn from_parts(
        dim: usize,
        centroids: Vec<Vec<f32>>,
        lists: Vec<Vec<ClipEmbedding>>,
    ) -> Result<Self, RetrievalError> {
        if centroids.len() != lists.len() {
            return Err(RetrievalError::Corrupt(format!(
                "{} centroids but {} lists",
                centroids.len(),
                lists.len()
            )));
        }
        for c in &centroids {
            if c.len() != dim {
                return Err(RetrievalError::DimensionMismatch {
                    expected: dim,
                    got: c.len(),
                });
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(RetrievalError::Corrupt("non-finite centroid".into()));
            }
        }
        let all: Vec<ClipEmbedding> = lists.iter().flatten().cloned().collect();
        if !all.is_empty() {
            let d = check_corpus(&all)?;
            if d != dim {
                return Err(RetrievalError::DimensionMismatch { expected: dim, got: d });
            }
        }
        for (i, list) in lists.iter().enumerate() {
            for e in list {
                if nearest(e.vector(), &centroids) != i {
                    return Err(RetrievalError::Corrupt(format!(
                        "`{}` is filed under list {i} but is closer to another centroid",
                        e.clip_id()
                    )));
                }
            }
        }
        Ok(Self { dim, centroids, lists })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nlist(&self) -> usize {
        self.centroids.len()
    }

    pub fn len(&self) -> usize {
        self.lists.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn centroids(&self) -> &[Vec<f32>] {
        &self.centroids
    }

    pub fn lists(&self) -> &[Vec<ClipEmbedding>] {
        &self.lists
    }

    pub fn embeddings(&self) -> impl Iterator<Item = &ClipEmbedding> {
        self.lists.iter().flatten()
    }

    /// Lists to scan, nearest centroid first.
    pub fn probe_order(&self, query: &[f32], nprobe: usize) -> Vec<usize> {
        let mut order: Vec<(f64, usize)> = self
            .centroids
            .iter()
            .enumerate()
            .map(|(i, c)| (sq_dist(query, c), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        order.into_iter().take(nprobe).map(|(_, i)| i).collect()
    }

    pub fn search(&self, query: &[f32], k: usize, nprobe: usize) -> Result<SearchResult, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::InvalidK);
        }
        if self.is_empty() {
            return Ok(SearchResult::default());
        }
        if nprobe == 0 || nprobe > self.nlist() {
            return Err(RetrievalError::InvalidNprobe {
                nprobe,
                nlist: self.nlist(),
            });
        }
        if query.len() != self.dim {
            return Err(RetrievalError::DimensionMismatch {
                expected: self.dim,
                got: query.len(),
            });
        }
        let q = normalize(query)?;
        let mut candidates = Vec::new();
        for list in self.probe_order(&q, nprobe) {
            for e in &self.lists[list] {
                candidates.push((cosine(e.vector(), &q), e.clip_id()));
            }
        }
        Ok(top_k(candidates, k))
    }
}
