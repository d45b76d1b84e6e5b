//! Retrieval-augmented decoding over a pool of continuous latents.
//!
//! The pool is indexed by an inverted file: k-means centroids partition the
//! unit-norm vectors into `n_list` lists and a query scans only the lists of
//! its `n_probe` nearest centroids. A quantized latent is swapped for its
//! nearest pool vector when `100 * cosine >= tau`.
//!
//! Index container layout (little-endian):
//!
//! ```text
//! "DYCI" | u32 version | u32 dim | u32 n_list | u32 num_vectors | u32 n_probe
//! | u32 iterations | u32 train_size | u64 seed
//! | n_list*dim f32 centroids | (n_list+1) u32 list offsets | num_vectors u32 ids
//! ```

use std::fs;
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::format::Reader;
use crate::model::FrameSequence;

pub const INDEX_MAGIC: &[u8; 4] = b"DYCI";
pub const INDEX_VERSION: u32 = 1;
pub const DEFAULT_KMEANS_ITERATIONS: usize = 25;
/// Tolerance on the unit norm of pool rows.
pub const POOL_NORM_TOLERANCE: f64 = 1e-5;

/// Unit-norm continuous latents with opaque provenance ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPool {
    dim: usize,
    vectors: Vec<f32>,
    ids: Vec<String>,
}

impl LatentPool {
    /// Validates row norms; `ids` defaults to the row numbers.
    pub fn new(dim: usize, vectors: Vec<f32>, ids: Option<Vec<String>>) -> Result<Self> {
        if dim == 0 || vectors.is_empty() || !vectors.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput(format!(
                "pool of {} values does not form rows of dimension {dim}",
                vectors.len()
            )));
        }
        let m = vectors.len() / dim;
        for (i, row) in vectors.chunks_exact(dim).enumerate() {
            let norm = row.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
            if (norm - 1.0).abs().is_nan() || (norm - 1.0).abs() > POOL_NORM_TOLERANCE {
                return Err(Error::InvalidInput(format!("pool row {i} has norm {norm}, expected 1")));
            }
        }
        let ids = match ids {
            Some(ids) if ids.len() != m => {
                return Err(Error::InvalidInput(format!("{} ids for {m} pool vectors", ids.len())));
            }
            Some(ids) => ids,
            None => (0..m).map(|i| i.to_string()).collect(),
        };
        Ok(Self { dim, vectors, ids })
    }

    /// Normalizes each row before storing it.
    pub fn from_rows(rows: &[Vec<f64>], ids: Option<Vec<String>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut vectors = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::InvalidInput("pool rows have differing lengths".into()));
            }
            let unit = crate::ssq::normalize(row)?;
            vectors.extend(unit.iter().map(|&v| v as f32));
        }
        Self::new(dim, vectors, ids)
    }

    pub fn from_frames(frames: &FrameSequence, ids: Option<Vec<String>>) -> Result<Self> {
        Self::new(frames.dim(), frames.data().to_vec(), ids)
    }

    pub fn to_frames(&self, frame_rate_hz: f32) -> Result<FrameSequence> {
        FrameSequence::new(self.len(), self.dim, frame_rate_hz, self.vectors.clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vector_f64(&self, i: usize) -> Vec<f64> {
        self.vector(i).iter().map(|&v| v as f64).collect()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }
}

/// Reads a sidecar id list, one id per line.
pub fn parse_ids(text: &str) -> Vec<String> {
    text.lines().map(|l| l.trim_end_matches('\r').to_string()).collect()
}

/// Dot product of a query with a stored vector, accumulated in f64.
pub fn cosine(query: &[f64], stored: &[f32]) -> f64 {
    query.iter().zip(stored).map(|(&q, &s)| q * s as f64).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn sq_dist_f32(a: &[f64], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y as f64) * (x - y as f64)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IvfParams {
    pub n_list: usize,
    /// Size of the seeded subsample the centroids are trained on.
    pub train_size: usize,
    pub seed: u64,
    pub iterations: usize,
    /// Probe count stored with the index as its default.
    pub n_probe: usize,
}

impl IvfParams {
    pub fn new(n_list: usize, train_size: usize, seed: u64) -> Self {
        Self {
            n_list,
            train_size,
            seed,
            iterations: DEFAULT_KMEANS_ITERATIONS,
            n_probe: 1,
        }
    }
}

/// Inverted-file index; the pool vectors themselves live in [`LatentPool`].
#[derive(Debug, Clone, PartialEq)]
pub struct IvfIndex {
    dim: usize,
    num_vectors: usize,
    params: IvfParams,
    centroids: Vec<f32>,
    offsets: Vec<u32>,
    ids: Vec<u32>,
}

/// Nearest pool vector found for a query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub index: usize,
    pub similarity: f64,
}

/// Builds the index: k-means++ seeding and a fixed number of Lloyd
/// iterations on a seeded subsample, then assigns every pool vector to its
/// nearest centroid. A centroid left empty by an iteration is moved onto the
/// training point farthest from its own centroid.
pub fn build_index(pool: &LatentPool, params: IvfParams) -> Result<IvfIndex> {
    let m = pool.len();
    if params.n_list == 0 || params.n_list > m {
        return Err(Error::InvalidConfig(format!(
            "n_list {} must lie in 1..={m}",
            params.n_list
        )));
    }
    if params.train_size < params.n_list || params.train_size > m {
        return Err(Error::InvalidConfig(format!(
            "training subsample {} must lie in {}..={m}",
            params.train_size, params.n_list
        )));
    }
    if params.n_probe == 0 || params.n_probe > params.n_list {
        return Err(Error::InvalidConfig(format!(
            "default n_probe {} must lie in 1..={}",
            params.n_probe, params.n_list
        )));
    }
    let dim = pool.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut train_ids = sample_indices(&mut rng, m, params.train_size).into_vec();
    train_ids.sort_unstable();
    let train: Vec<Vec<f64>> = train_ids.iter().map(|&i| pool.vector_f64(i)).collect();

    let mut centroids = kmeans_plus_plus(&train, params.n_list, &mut rng);
    let mut assign = vec![0usize; train.len()];
    for _ in 0..params.iterations {
        for (a, x) in assign.iter_mut().zip(&train) {
            *a = nearest_centroid(x, &centroids);
        }
        let mut sums = vec![vec![0.0; dim]; params.n_list];
        let mut counts = vec![0usize; params.n_list];
        for (&a, x) in assign.iter().zip(&train) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(x) {
                *s += v;
            }
        }
        for c in 0..params.n_list {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        for c in 0..params.n_list {
            if counts[c] == 0 {
                let far = farthest_point(&train, &assign, &centroids);
                centroids[c] = train[far].clone();
                assign[far] = c;
            }
        }
    }

    let centroids_f32: Vec<f32> = centroids.iter().flatten().map(|&v| v as f32).collect();
    let centroids_rounded: Vec<Vec<f64>> = centroids_f32
        .chunks_exact(dim)
        .map(|c| c.iter().map(|&v| v as f64).collect())
        .collect();
    let mut lists: Vec<Vec<u32>> = vec![Vec::new(); params.n_list];
    for i in 0..m {
        let c = nearest_centroid(&pool.vector_f64(i), &centroids_rounded);
        lists[c].push(i as u32);
    }
    let mut offsets = Vec::with_capacity(params.n_list + 1);
    let mut ids = Vec::with_capacity(m);
    offsets.push(0);
    for list in lists {
        ids.extend(list);
        offsets.push(ids.len() as u32);
    }
    Ok(IvfIndex {
        dim,
        num_vectors: m,
        params,
        centroids: centroids_f32,
        offsets,
        ids,
    })
}

fn nearest_centroid(x: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(x, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn farthest_point(train: &[Vec<f64>], assign: &[usize], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::NEG_INFINITY;
    for (i, (x, &a)) in train.iter().zip(assign).enumerate() {
        let d = sq_dist(x, &centroids[a]);
        if d > best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn kmeans_plus_plus(train: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(train[rng.random_range(0..train.len())].clone());
    let mut dist: Vec<f64> = train.iter().map(|x| sq_dist(x, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = dist.len() - 1;
            for (i, &d) in dist.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            // all remaining points coincide with a centroid
            rng.random_range(0..train.len())
        };
        centroids.push(train[pick].clone());
        let newest = centroids.last().unwrap();
        for (d, x) in dist.iter_mut().zip(train) {
            *d = d.min(sq_dist(x, newest));
        }
    }
    centroids
}

impl IvfIndex {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_list(&self) -> usize {
        self.params.n_list
    }

    pub fn num_vectors(&self) -> usize {
        self.num_vectors
    }

    pub fn params(&self) -> &IvfParams {
        &self.params
    }

    pub fn centroid(&self, c: usize) -> &[f32] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }

    /// Pool row numbers stored in list `c`, ascending.
    pub fn list(&self, c: usize) -> &[u32] {
        &self.ids[self.offsets[c] as usize..self.offsets[c + 1] as usize]
    }

    fn check_pool(&self, pool: &LatentPool) -> Result<()> {
        if pool.len() != self.num_vectors || pool.dim() != self.dim {
            return Err(Error::InvalidConfig(format!(
                "index built for {} vectors of dim {}, pool has {} of dim {}",
                self.num_vectors,
                self.dim,
                pool.len(),
                pool.dim()
            )));
        }
        Ok(())
    }

    /// Centroids ordered by distance to `query`, ties to the lower list.
    fn probe_order(&self, query: &[f64]) -> Vec<usize> {
        let mut order: Vec<(f64, usize)> = (0..self.params.n_list)
            .map(|c| (sq_dist_f32(query, self.centroid(c)), c))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        order.into_iter().map(|(_, c)| c).collect()
    }

    /// Highest-cosine pool vector among the lists of the `n_probe` closest
    /// centroids. Equal similarities resolve to the lowest pool row.
    pub fn query_nearest(&self, pool: &LatentPool, query: &[f64], n_probe: usize) -> Result<Hit> {
        self.check_pool(pool)?;
        if query.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "query has {} values, index dim is {}",
                query.len(),
                self.dim
            )));
        }
        if n_probe == 0 || n_probe > self.params.n_list {
            return Err(Error::InvalidConfig(format!(
                "n_probe {n_probe} must lie in 1..={}",
                self.params.n_list
            )));
        }
        let mut best: Option<Hit> = None;
        for c in self.probe_order(query).into_iter().take(n_probe) {
            for &id in self.list(c) {
                let id = id as usize;
                let sim = cosine(query, pool.vector(id));
                let better = match best {
                    None => true,
                    Some(b) => sim > b.similarity || (sim == b.similarity && id < b.index),
                };
                if better {
                    best = Some(Hit {
                        index: id,
                        similarity: sim,
                    });
                }
            }
        }
        best.ok_or(Error::NoCandidate)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(INDEX_MAGIC);
        for v in [
            INDEX_VERSION,
            self.dim as u32,
            self.params.n_list as u32,
            self.num_vectors as u32,
            self.params.n_probe as u32,
            self.params.iterations as u32,
            self.params.train_size as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.params.seed.to_le_bytes());
        for v in &self.centroids {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in self.offsets.iter().chain(&self.ids) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.is_empty() {
            return Err(Error::format(0, "empty index file"));
        }
        let mut r = Reader::new(bytes);
        r.magic(INDEX_MAGIC)?;
        let version = r.u32("version")?;
        if version != INDEX_VERSION {
            return Err(Error::format(4, format!("unsupported index version {version}")));
        }
        let dim = r.u32("dim")? as usize;
        let n_list = r.u32("n_list")? as usize;
        let num_vectors = r.u32("vector count")? as usize;
        let n_probe = r.u32("n_probe")? as usize;
        let iterations = r.u32("iterations")? as usize;
        let train_size = r.u32("train size")? as usize;
        let seed = r.u64("seed")?;
        if dim == 0 || n_list == 0 || n_list > num_vectors || n_probe == 0 || n_probe > n_list {
            return Err(Error::format(8, "inconsistent index parameters"));
        }
        let centroids_at = r.offset();
        let centroids = r.f32_vec(n_list * dim, "centroids")?;
        if let Some(i) = centroids.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(centroids_at + 4 * i, "non-finite centroid value"));
        }
        let offsets_at = r.offset();
        let offsets = r.u32_vec(n_list + 1, "list offsets")?;
        if offsets[0] != 0 || offsets.windows(2).any(|w| w[1] < w[0]) || offsets[n_list] as usize != num_vectors {
            return Err(Error::format(
                offsets_at,
                "list offsets are not a partition of the vectors",
            ));
        }
        let ids_at = r.offset();
        let ids = r.u32_vec(num_vectors, "ids")?;
        let mut seen = vec![false; num_vectors];
        for (i, &id) in ids.iter().enumerate() {
            let id = id as usize;
            if id >= num_vectors || seen[id] {
                return Err(Error::format(
                    ids_at + 4 * i,
                    format!("id {id} out of range or repeated"),
                ));
            }
            seen[id] = true;
        }
        r.finish()?;
        Ok(Self {
            dim,
            num_vectors,
            params: IvfParams {
                n_list,
                train_size,
                seed,
                iterations,
                n_probe,
            },
            centroids,
            offsets,
            ids,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Exhaustive cosine argmax, lowest row on ties.
pub fn brute_force_nearest(pool: &LatentPool, query: &[f64]) -> Hit {
    let mut best = Hit {
        index: 0,
        similarity: f64::NEG_INFINITY,
    };
    for i in 0..pool.len() {
        let sim = cosine(query, pool.vector(i));
        if sim > best.similarity {
            best = Hit {
                index: i,
                similarity: sim,
            };
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadConfig {
    /// Replacement threshold in percent cosine similarity.
    pub tau: f64,
    pub n_probe: usize,
}

impl RadConfig {
    pub fn new(tau: f64, n_probe: usize) -> Result<Self> {
        if !(0.0..=100.0).contains(&tau) {
            return Err(Error::InvalidConfig(format!("tau must lie in [0, 100], got {tau}")));
        }
        if n_probe == 0 {
            return Err(Error::InvalidConfig("n_probe must be positive".into()));
        }
        Ok(Self { tau, n_probe })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadOutput {
    pub latents: Vec<Vec<f64>>,
    pub replaced: Vec<bool>,
    /// Best similarity per row; `None` when no candidate was found.
    pub hits: Vec<Option<Hit>>,
}

impl RadOutput {
    pub fn replacements(&self) -> usize {
        self.replaced.iter().filter(|&&r| r).count()
    }
}

/// Replaces each row by its retrieved pool vector when `100 * cosine >= tau`;
/// other rows, including rows without candidates, pass through unchanged.
pub fn rad_apply(latents: &[Vec<f64>], index: &IvfIndex, pool: &LatentPool, cfg: &RadConfig) -> Result<RadOutput> {
    let mut out = Vec::with_capacity(latents.len());
    let mut replaced = Vec::with_capacity(latents.len());
    let mut hits = Vec::with_capacity(latents.len());
    for row in latents {
        let hit = match index.query_nearest(pool, row, cfg.n_probe) {
            Ok(hit) => Some(hit),
            Err(Error::NoCandidate) => None,
            Err(e) => return Err(e),
        };
        match hit {
            Some(h) if 100.0 * h.similarity >= cfg.tau => {
                out.push(pool.vector_f64(h.index));
                replaced.push(true);
            }
            _ => {
                out.push(row.clone());
                replaced.push(false);
            }
        }
        hits.push(hit);
    }
    Ok(RadOutput {
        latents: out,
        replaced,
        hits,
    })
}
