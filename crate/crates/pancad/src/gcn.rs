//! Graph-convolutional entity classifier: node features, a 3-layer GCN with
//! analytic gradients, class-weighted additive-margin softmax, and an Adam +
//! cosine-annealing training loop.
//!
//! The layer rule is `h'_i = ReLU(W0 h_i + W1 Σ_{j ∈ N(i)} h_j)` — an
//! unnormalized neighbor sum. The final hidden vector is normalized to the
//! unit sphere and scored by cosine similarity against unit-norm class rows.
//! Everything is plain `f64` and deterministic under a fixed seed.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Label;
use crate::drawing::Drawing;
use crate::geometry::{point_at, EntityKind};
use crate::graph::{build_graph, EntityGraph, GraphConfig};
use crate::raster::{build_feature_pyramid, FeaturePyramid, PyramidConfig, RasterError};

#[derive(Debug, Error)]
pub enum GcnError {
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("bad checkpoint: {reason}")]
    BadCheckpoint { reason: String },
    #[error("raster: {0}")]
    Raster(#[from] RasterError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Mat {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Mat { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// a · bᵀ — (n×k)·(m×k) → n×m.
    pub fn matmul_nt(a: &Mat, b: &Mat) -> Mat {
        assert_eq!(a.cols, b.cols, "inner dims");
        let mut out = Mat::zeros(a.rows, b.rows);
        for i in 0..a.rows {
            let ar = a.row(i);
            for j in 0..b.rows {
                let br = b.row(j);
                out.data[i * b.rows + j] =
                    ar.iter().zip(br).map(|(x, y)| x * y).sum();
            }
        }
        out
    }

    /// a · b — (n×k)·(k×m) → n×m.
    pub fn matmul_nn(a: &Mat, b: &Mat) -> Mat {
        assert_eq!(a.cols, b.rows, "inner dims");
        let mut out = Mat::zeros(a.rows, b.cols);
        for i in 0..a.rows {
            for k in 0..a.cols {
                let av = a.data[i * a.cols + k];
                if av == 0.0 {
                    continue;
                }
                let br = b.row(k);
                let or = &mut out.data[i * b.cols..(i + 1) * b.cols];
                for (o, &bv) in or.iter_mut().zip(br) {
                    *o += av * bv;
                }
            }
        }
        out
    }

    /// aᵀ · b — (n×k)ᵀ·(n×m) → k×m.
    pub fn matmul_tn(a: &Mat, b: &Mat) -> Mat {
        assert_eq!(a.rows, b.rows, "inner dims");
        let mut out = Mat::zeros(a.cols, b.cols);
        for i in 0..a.rows {
            let ar = a.row(i);
            let br = b.row(i);
            for (k, &av) in ar.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let or = &mut out.data[k * b.cols..(k + 1) * b.cols];
                for (o, &bv) in or.iter_mut().zip(br) {
                    *o += av * bv;
                }
            }
        }
        out
    }
}

/// Sum of neighbor rows under the graph: (S·X) with S the 0/1 adjacency.
fn neighbor_sum(graph: &EntityGraph, x: &Mat) -> Mat {
    let mut out = Mat::zeros(x.rows, x.cols);
    for i in 0..x.rows {
        for &j in graph.neighbors(i) {
            let src = j as usize * x.cols;
            let dst = &mut out.data[i * x.cols..(i + 1) * x.cols];
            for (o, &v) in dst.iter_mut().zip(&x.data[src..src + x.cols]) {
                *o += v;
            }
        }
    }
    out
}

pub const GCN_LAYERS: usize = 3;
/// Smoothing inside the embedding norm keeps the all-zero vector
/// differentiable: e = h / sqrt(|h|² + δ²).
const NORM_DELTA: f64 = 1e-12;

/// Learnable parameters: per layer a self weight W0 and a neighbor weight W1
/// (both out×in), plus a classifier of unit-norm class rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnParams {
    pub w0: Vec<Mat>,
    pub w1: Vec<Mat>,
    pub classifier: Mat,
}

impl GcnParams {
    /// Seeded He-style uniform init, classifier rows normalized.
    pub fn init(input_dim: usize, hidden: &[usize; GCN_LAYERS], n_classes: usize, seed: u64) -> GcnParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        let mat = |rows: usize, cols: usize, rng: &mut ChaCha8Rng| {
            let bound = (6.0 / cols as f64).sqrt();
            let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
            Mat { rows, cols, data }
        };
        let mut w0 = Vec::new();
        let mut w1 = Vec::new();
        for l in 0..GCN_LAYERS {
            w0.push(mat(dims[l + 1], dims[l], &mut rng));
            w1.push(mat(dims[l + 1], dims[l], &mut rng));
        }
        let mut classifier = mat(n_classes, hidden[GCN_LAYERS - 1], &mut rng);
        renormalize_rows(&mut classifier);
        GcnParams { w0, w1, classifier }
    }

    pub fn zeros_like(&self) -> GcnParams {
        GcnParams {
            w0: self.w0.iter().map(|m| Mat::zeros(m.rows, m.cols)).collect(),
            w1: self.w1.iter().map(|m| Mat::zeros(m.rows, m.cols)).collect(),
            classifier: Mat::zeros(self.classifier.rows, self.classifier.cols),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.classifier.rows
    }

    pub fn input_dim(&self) -> usize {
        self.w0[0].cols
    }

    fn mats(&self) -> Vec<&Mat> {
        let mut v: Vec<&Mat> = self.w0.iter().chain(self.w1.iter()).collect();
        v.push(&self.classifier);
        v
    }

    fn mats_mut(&mut self) -> Vec<&mut Mat> {
        let mut v: Vec<&mut Mat> = self.w0.iter_mut().chain(self.w1.iter_mut()).collect();
        v.push(&mut self.classifier);
        v
    }

    /// Total scalar parameter count, fixing the flattening order used by
    /// `get_flat`/`set_flat` and the Adam state.
    pub fn flat_len(&self) -> usize {
        self.mats().iter().map(|m| m.data.len()).sum()
    }

    pub fn get_flat(&self, mut i: usize) -> f64 {
        for m in self.mats() {
            if i < m.data.len() {
                return m.data[i];
            }
            i -= m.data.len();
        }
        panic!("flat index out of range");
    }

    pub fn set_flat(&mut self, mut i: usize, v: f64) {
        for m in self.mats_mut() {
            if i < m.data.len() {
                m.data[i] = v;
                return;
            }
            i -= m.data.len();
        }
        panic!("flat index out of range");
    }
}

/// Scale rows to unit norm; rows already unit within 1e-12 are left
/// untouched so a zero-gradient step stays a bit-exact no-op.
fn renormalize_rows(m: &mut Mat) {
    for r in 0..m.rows {
        let row = &mut m.data[r * m.cols..(r + 1) * m.cols];
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 && (norm - 1.0).abs() > 1e-12 {
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
    }
}

struct ForwardCache {
    /// h[0] = input, h[1..=3] = post-ReLU layer outputs.
    h: Vec<Mat>,
    /// Pre-activations per layer (sign decides the ReLU gradient mask).
    z: Vec<Mat>,
    /// Neighbor sums S·h[l] feeding layer l+1.
    sh: Vec<Mat>,
    /// Unit embeddings (rows of h[3] normalized).
    emb: Mat,
    /// Per-node smoothed norms sqrt(|h3|² + δ²).
    norms: Vec<f64>,
}

fn forward_full(x: &Mat, graph: &EntityGraph, params: &GcnParams) -> Result<(Mat, ForwardCache), GcnError> {
    if x.rows != graph.node_count() {
        return Err(GcnError::DimensionMismatch {
            context: format!("{} feature rows vs {} graph nodes", x.rows, graph.node_count()),
        });
    }
    if x.cols != params.input_dim() {
        return Err(GcnError::DimensionMismatch {
            context: format!("feature dim {} vs params input dim {}", x.cols, params.input_dim()),
        });
    }
    let mut h = vec![x.clone()];
    let mut z = Vec::new();
    let mut sh = Vec::new();
    for l in 0..GCN_LAYERS {
        let s = neighbor_sum(graph, &h[l]);
        let mut zl = Mat::matmul_nt(&h[l], &params.w0[l]);
        let zn = Mat::matmul_nt(&s, &params.w1[l]);
        for (a, b) in zl.data.iter_mut().zip(&zn.data) {
            *a += b;
        }
        let mut hl = zl.clone();
        for v in hl.data.iter_mut() {
            *v = v.max(0.0);
        }
        sh.push(s);
        z.push(zl);
        h.push(hl);
    }
    let last = &h[GCN_LAYERS];
    let mut emb = last.clone();
    let mut norms = Vec::with_capacity(last.rows);
    for i in 0..last.rows {
        let row = &mut emb.data[i * emb.cols..(i + 1) * emb.cols];
        let r = (row.iter().map(|v| v * v).sum::<f64>() + NORM_DELTA * NORM_DELTA).sqrt();
        for v in row.iter_mut() {
            *v /= r;
        }
        norms.push(r);
    }
    let logits = Mat::matmul_nt(&emb, &params.classifier);
    Ok((logits, ForwardCache { h, z, sh, emb, norms }))
}

/// Per-node cosine logits against the classifier rows.
pub fn gcn_forward(x: &Mat, graph: &EntityGraph, params: &GcnParams) -> Result<Mat, GcnError> {
    forward_full(x, graph, params).map(|(logits, _)| logits)
}

/// Flattened pre-activation sign pattern — lets callers detect when a
/// parameter probe crosses a ReLU kink.
pub fn activation_signature(x: &Mat, graph: &EntityGraph, params: &GcnParams) -> Result<Vec<bool>, GcnError> {
    let (_, cache) = forward_full(x, graph, params)?;
    Ok(cache.z.iter().flat_map(|m| m.data.iter().map(|&v| v > 0.0)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// w_j = count_j / total: frequent classes weigh more.
    Frequency,
    /// w_j ∝ total / count_j, normalized over present classes.
    InverseFrequency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    /// One weight per class; absent classes get 0. Present weights sum to 1.
    pub w: Vec<f64>,
}

pub fn compute_class_weights(dataset: &[Drawing]) -> Result<ClassWeights, GcnError> {
    compute_class_weights_with(dataset, WeightMode::Frequency)
}

pub fn compute_class_weights_with(dataset: &[Drawing], mode: WeightMode) -> Result<ClassWeights, GcnError> {
    let n_classes = dataset.first().map_or(0, |d| d.catalog.len());
    let mut counts = vec![0usize; n_classes];
    for d in dataset {
        for r in &d.records {
            if let Label::Class(c) = r.label {
                counts[c] += 1;
            }
        }
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(GcnError::EmptyDataset);
    }
    let mut w: Vec<f64> = match mode {
        WeightMode::Frequency => {
            counts.iter().map(|&c| c as f64 / total as f64).collect()
        }
        WeightMode::InverseFrequency => {
            counts.iter().map(|&c| if c > 0 { total as f64 / c as f64 } else { 0.0 }).collect()
        }
    };
    let sum: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= sum;
    }
    Ok(ClassWeights { w })
}

/// Class-weighted additive-margin softmax loss over non-background nodes,
/// with the full analytic gradient.
///
/// Per node with ground-truth class y: logits a_j = s·(cos_j − m·[j = y]),
/// contribution w_y · (−log softmax_y(a)); the total is the mean over
/// contributing nodes. Background nodes contribute nothing.
pub fn loss_and_grad(
    x: &Mat,
    graph: &EntityGraph,
    labels: &[Label],
    params: &GcnParams,
    weights: &ClassWeights,
    margin: f64,
    scale: f64,
) -> Result<(f64, GcnParams), GcnError> {
    if labels.len() != x.rows {
        return Err(GcnError::DimensionMismatch {
            context: format!("{} labels vs {} feature rows", labels.len(), x.rows),
        });
    }
    if weights.w.len() != params.n_classes() {
        return Err(GcnError::DimensionMismatch {
            context: format!("{} weights vs {} classes", weights.w.len(), params.n_classes()),
        });
    }
    let (logits, cache) = forward_full(x, graph, params)?;
    let n = x.rows;
    let n_classes = params.n_classes();
    let mut grads = params.zeros_like();
    let contributing: Vec<(usize, usize)> = labels
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.class_id().map(|y| (i, y)))
        .collect();
    if contributing.is_empty() {
        return Ok((0.0, grads));
    }
    let inv_n = 1.0 / contributing.len() as f64;

    let mut loss = 0.0;
    // d(loss)/d(logits), zero on non-contributing rows.
    let mut dlogits = Mat::zeros(n, n_classes);
    for &(i, y) in &contributing {
        let wy = weights.w[y];
        let row = logits.row(i);
        let mut a: Vec<f64> = row.iter().map(|&c| scale * c).collect();
        a[y] = scale * (row[y] - margin);
        let amax = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for v in &a {
            denom += (v - amax).exp();
        }
        let log_denom = denom.ln() + amax;
        loss += wy * (log_denom - a[y]) * inv_n;
        for j in 0..n_classes {
            let p = (a[j] - log_denom).exp();
            let indicator = if j == y { 1.0 } else { 0.0 };
            *dlogits.at_mut(i, j) = wy * (p - indicator) * scale * inv_n;
        }
    }

    // logits = E · Cᵀ.
    grads.classifier = Mat::matmul_tn(&dlogits, &cache.emb);
    let demb = Mat::matmul_nn(&dlogits, &params.classifier);

    // Through e = h/r, r = sqrt(|h|² + δ²): de/dh = I/r − h hᵀ/r³.
    let last = &cache.h[GCN_LAYERS];
    let mut dh = Mat::zeros(last.rows, last.cols);
    for i in 0..last.rows {
        let r = cache.norms[i];
        let hrow = last.row(i);
        let grow = demb.row(i);
        let hg: f64 = hrow.iter().zip(grow).map(|(a, b)| a * b).sum();
        let out = &mut dh.data[i * dh.cols..(i + 1) * dh.cols];
        for (k, o) in out.iter_mut().enumerate() {
            *o = grow[k] / r - hrow[k] * hg / (r * r * r);
        }
    }

    for l in (0..GCN_LAYERS).rev() {
        // ReLU gate on the pre-activation sign.
        let mut dz = dh;
        for (g, &z) in dz.data.iter_mut().zip(&cache.z[l].data) {
            if z <= 0.0 {
                *g = 0.0;
            }
        }
        grads.w0[l] = Mat::matmul_tn(&dz, &cache.h[l]);
        grads.w1[l] = Mat::matmul_tn(&dz, &cache.sh[l]);
        if l > 0 {
            let a = Mat::matmul_nn(&dz, &params.w0[l]);
            let b = neighbor_sum(graph, &Mat::matmul_nn(&dz, &params.w1[l]));
            let mut prev = a;
            for (x, y) in prev.data.iter_mut().zip(&b.data) {
                *x += y;
            }
            dh = prev;
        } else {
            dh = Mat::zeros(1, 1);
        }
    }
    Ok((loss, grads))
}

/// lr_min + ½(lr_max − lr_min)(1 + cos(πt/T)).
pub fn cosine_lr(t: usize, total: usize, lr_max: f64, lr_min: f64) -> f64 {
    assert!(t <= total && total > 0);
    lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (std::f64::consts::PI * t as f64 / total as f64).cos())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> AdamState {
        AdamState { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }
}

/// One bias-corrected Adam update; classifier rows are re-normalized to the
/// unit sphere afterwards.
pub fn adam_step(
    params: &mut GcnParams,
    grads: &GcnParams,
    state: &mut AdamState,
    lr: f64,
    cfg: &TrainConfig,
) -> Result<(), GcnError> {
    let len = params.flat_len();
    if grads.flat_len() != len || state.m.len() != len {
        return Err(GcnError::DimensionMismatch {
            context: format!("{} params vs {} grads vs {} state", len, grads.flat_len(), state.m.len()),
        });
    }
    state.t += 1;
    let t = state.t as f64;
    let bc1 = 1.0 - cfg.beta1.powf(t);
    let bc2 = 1.0 - cfg.beta2.powf(t);
    let mut gi = 0usize;
    let gmats = grads.mats();
    let mut flat_grads = gmats.iter().flat_map(|m| m.data.iter());
    for pm in params.mats_mut() {
        for p in pm.data.iter_mut() {
            let g = *flat_grads.next().unwrap();
            state.m[gi] = cfg.beta1 * state.m[gi] + (1.0 - cfg.beta1) * g;
            state.v[gi] = cfg.beta2 * state.v[gi] + (1.0 - cfg.beta2) * g * g;
            let mhat = state.m[gi] / bc1;
            let vhat = state.v[gi] / bc2;
            *p -= lr * mhat / (vhat.sqrt() + cfg.eps_adam);
            gi += 1;
        }
    }
    renormalize_rows(&mut params.classifier);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr_max: f64,
    pub lr_min: f64,
    pub iterations: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub margin: f64,
    pub scale: f64,
    pub lambda: f64,
    pub seed: u64,
    pub weight_mode: WeightMode,
    pub hidden: [usize; GCN_LAYERS],
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr_max: 1e-4,
            lr_min: 0.0,
            iterations: 40_000,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            margin: 0.35,
            scale: 30.0,
            lambda: 3.0,
            seed: 0,
            weight_mode: WeightMode::Frequency,
            hidden: [64; GCN_LAYERS],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub pyramid: PyramidConfig,
    /// Include the 3-value entity-type one-hot (segment/circle/curve).
    pub include_type: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { pyramid: PyramidConfig::default(), include_type: true }
    }
}

/// One feature row per entity: log(1+length), anchor normalized to [0,1]²
/// by the extent, optional type one-hot, then the pyramid fetch at the
/// anchor. The anchor is the arc-length midpoint.
pub fn assemble_node_features(d: &Drawing, pyramid: &FeaturePyramid, include_type: bool) -> Mat {
    let dim = 3 + if include_type { 3 } else { 0 } + pyramid.feature_dim();
    let mut out = Mat::zeros(d.records.len(), dim);
    let w = d.extent.width();
    let h = d.extent.height();
    for (i, rec) in d.records.iter().enumerate() {
        let e = &rec.entity;
        let anchor = point_at(e, 0.5);
        let row = &mut out.data[i * dim..(i + 1) * dim];
        row[0] = (1.0 + crate::geometry::arc_length(e)).ln();
        row[1] = if w > 0.0 { ((anchor.x - d.extent.min_x) / w).clamp(0.0, 1.0) } else { 0.5 };
        row[2] = if h > 0.0 { ((anchor.y - d.extent.min_y) / h).clamp(0.0, 1.0) } else { 0.5 };
        let mut k = 3;
        if include_type {
            let slot = match e.kind() {
                EntityKind::Segment => 0,
                EntityKind::Circle => 1,
                EntityKind::Curve => 2,
            };
            row[k + slot] = 1.0;
            k += 3;
        }
        for (j, v) in pyramid.fetch(anchor).into_iter().enumerate() {
            row[k + j] = v;
        }
    }
    out
}

/// A drawing reduced to what training needs: features, graph, labels.
pub struct PreparedDrawing {
    pub features: Mat,
    pub graph: EntityGraph,
    pub labels: Vec<Label>,
}

pub fn prepare_drawing(d: &Drawing, gcfg: &GraphConfig, fcfg: &FeatureConfig) -> Result<PreparedDrawing, GcnError> {
    let pyramid = build_feature_pyramid(d, &fcfg.pyramid)?;
    let features = assemble_node_features(d, &pyramid, fcfg.include_type);
    let graph = build_graph(d, gcfg);
    Ok(PreparedDrawing { features, graph, labels: d.labels() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub lr: f64,
    pub loss: f64,
}

pub struct TrainOutcome {
    pub params: GcnParams,
    pub trace: Vec<TraceRow>,
}

/// Train on one drawing per iteration, cycling through seeded per-epoch
/// shuffles of the dataset. The detection side of the total loss is an
/// external scalar stream (identically zero at this scale): the optimized
/// objective is λ·loss_gcn + det(t), so GCN gradients are scaled by λ.
pub fn train_gcn(dataset: &[Drawing], cfg: &TrainConfig, gcfg: &GraphConfig, fcfg: &FeatureConfig) -> Result<TrainOutcome, GcnError> {
    train_gcn_with(dataset, cfg, gcfg, fcfg, |_| 0.0)
}

pub fn train_gcn_with(
    dataset: &[Drawing],
    cfg: &TrainConfig,
    gcfg: &GraphConfig,
    fcfg: &FeatureConfig,
    mut detection_loss: impl FnMut(usize) -> f64,
) -> Result<TrainOutcome, GcnError> {
    if dataset.is_empty() {
        return Err(GcnError::EmptyDataset);
    }
    let n_classes = dataset[0].catalog.len();
    let weights = compute_class_weights_with(dataset, cfg.weight_mode)?;
    let prepared: Vec<PreparedDrawing> = dataset
        .iter()
        .map(|d| prepare_drawing(d, gcfg, fcfg))
        .collect::<Result<_, _>>()?;
    let input_dim = prepared[0].features.cols;

    let mut params = GcnParams::init(input_dim, &cfg.hidden, n_classes, cfg.seed);
    let mut state = AdamState::new(params.flat_len());
    let mut trace = Vec::with_capacity(cfg.iterations);

    let mut order: Vec<usize> = Vec::new();
    let mut epoch = 0u64;
    let mut cursor = 0usize;
    for it in 0..cfg.iterations {
        if cursor == order.len() {
            order = (0..prepared.len()).collect();
            // Fresh stream per epoch keeps the shuffle sequence independent
            // of the iteration count.
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(epoch + 1);
            order.shuffle(&mut rng);
            epoch += 1;
            cursor = 0;
        }
        let p = &prepared[order[cursor]];
        cursor += 1;

        let lr = cosine_lr(it, cfg.iterations, cfg.lr_max, cfg.lr_min);
        let (loss, mut grads) = loss_and_grad(
            &p.features, &p.graph, &p.labels, &params, &weights, cfg.margin, cfg.scale,
        )?;
        for m in grads.mats_mut() {
            for v in m.data.iter_mut() {
                *v *= cfg.lambda;
            }
        }
        adam_step(&mut params, &grads, &mut state, lr, cfg)?;
        trace.push(TraceRow { iteration: it, lr, loss: cfg.lambda * loss + detection_loss(it) });
    }
    Ok(TrainOutcome { params, trace })
}

/// Predicted class per entity: argmax cosine logit (no margin at inference).
/// Ties break to the smallest class index.
pub fn infer_entity_labels(d: &Drawing, params: &GcnParams, gcfg: &GraphConfig, fcfg: &FeatureConfig) -> Result<Vec<Label>, GcnError> {
    let p = prepare_drawing(d, gcfg, fcfg)?;
    let logits = gcn_forward(&p.features, &p.graph, params)?;
    Ok((0..logits.rows)
        .map(|i| {
            let row = logits.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            Label::Class(best)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub train: TrainConfig,
    pub feature: FeatureConfig,
    pub graph: GraphConfig,
    pub params: GcnParams,
}

pub const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), GcnError> {
    let mut body = serde_json::to_string_pretty(ckpt)
        .map_err(|e| GcnError::BadCheckpoint { reason: e.to_string() })?;
    body.push('\n');
    std::fs::write(path, body)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, GcnError> {
    let body = std::fs::read_to_string(path)?;
    let ckpt: Checkpoint = serde_json::from_str(&body)
        .map_err(|e| GcnError::BadCheckpoint { reason: e.to_string() })?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(GcnError::BadCheckpoint {
            reason: format!("version {} unsupported", ckpt.version),
        });
    }
    for m in ckpt.params.mats() {
        if m.data.len() != m.rows * m.cols {
            return Err(GcnError::BadCheckpoint {
                reason: format!("matrix payload {} != {}x{}", m.data.len(), m.rows, m.cols),
            });
        }
    }
    Ok(ckpt)
}

/// CSV loss trace: `iteration,lr,loss`.
pub fn trace_to_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("iteration,lr,loss\n");
    for row in trace {
        let _ = writeln!(out, "{},{},{}", row.iteration, row.lr, row.loss);
    }
    out
}
