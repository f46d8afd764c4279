//! Prototype-based triplet segmentation loss with kNN hard-negative mining,
//! the L1 voting loss, their weighted sum, and a desk-scale trainer that fits
//! free per-pixel embeddings against a rendered label map.
//!
//! Embeddings and prototypes are handled as raw (pre-normalization) vectors:
//! similarities are cosine similarities, and gradients are taken with respect
//! to the raw values. Keeping them unit-norm is the caller's business (the
//! trainer re-normalizes after every step).

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::landmark::LandmarkMaps;

pub const DEFAULT_DIM: usize = 12;
pub const DEFAULT_MARGIN: f64 = 0.2;
pub const DEFAULT_KNN: usize = 8;
pub const DEFAULT_LAMBDA: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("zero-norm vector in cosine similarity")]
    ZeroVector,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("label {label} has no prototype (bank holds {count})")]
    LabelOutOfRange { label: u32, count: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("need at least 2 active labels, found {0}")]
    TooFewLabels(usize),
}

/// H×W×D pixel embeddings, row-major with the embedding dimension fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMap {
    pub height: usize,
    pub width: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl EmbeddingMap {
    pub fn new(height: usize, width: usize, dim: usize, values: Vec<f64>) -> Result<Self, LossError> {
        if dim == 0 || values.len() != height * width * dim {
            return Err(LossError::Shape(format!(
                "{} values for {height}x{width}x{dim}",
                values.len()
            )));
        }
        Ok(Self {
            height,
            width,
            dim,
            values,
        })
    }

    /// Gaussian embeddings, normalized.
    pub fn random(height: usize, width: usize, dim: usize, rng: &mut impl Rng) -> Self {
        let values = (0..height * width * dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut m = Self {
            height,
            width,
            dim,
            values,
        };
        m.normalize();
        m
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn normalize(&mut self) {
        normalize_rows(&mut self.values, self.dim);
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        self.values.chunks(self.dim).all(|r| (norm(r) - 1.0).abs() <= tol)
    }
}

/// One prototype row per class. Row `r` belongs to label `r + 1`, or to
/// label `r` when the bank carries a background prototype in row 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeBank {
    pub dim: usize,
    pub values: Vec<f64>,
    pub has_background: bool,
}

impl PrototypeBank {
    pub fn new(count: usize, dim: usize, values: Vec<f64>) -> Result<Self, LossError> {
        if dim == 0 || values.len() != count * dim {
            return Err(LossError::Shape(format!(
                "{} values for {count} prototypes of dim {dim}",
                values.len()
            )));
        }
        Ok(Self {
            dim,
            values,
            has_background: false,
        })
    }

    pub fn random(count: usize, dim: usize, rng: &mut impl Rng) -> Self {
        let mut values: Vec<f64> = (0..count * dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        normalize_rows(&mut values, dim);
        Self {
            dim,
            values,
            has_background: false,
        }
    }

    pub fn count(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.dim..(r + 1) * self.dim]
    }

    pub fn label_of_row(&self, r: usize) -> u32 {
        if self.has_background {
            r as u32
        } else {
            r as u32 + 1
        }
    }

    pub fn row_of_label(&self, label: u32) -> Option<usize> {
        let r = if self.has_background {
            label as usize
        } else {
            (label as usize).checked_sub(1)?
        };
        (r < self.count()).then_some(r)
    }

    pub fn normalize(&mut self) {
        normalize_rows(&mut self.values, self.dim);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegativeMining {
    /// Negatives sampled from the k prototypes nearest the class mean.
    Knn,
    /// Negatives sampled uniformly from every other class.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletConfig {
    pub margin: f64,
    pub knn_k: usize,
    pub lambda: f64,
    pub seed: u64,
    pub mining: NegativeMining,
}

impl Default for TripletConfig {
    fn default() -> Self {
        Self {
            margin: DEFAULT_MARGIN,
            knn_k: DEFAULT_KNN,
            lambda: DEFAULT_LAMBDA,
            seed: 0,
            mining: NegativeMining::Knn,
        }
    }
}

impl TripletConfig {
    pub fn validate(&self) -> Result<(), LossError> {
        if !(self.margin > 0.0 && self.margin < 2.0) {
            return Err(LossError::Config(format!("margin {} outside (0, 2)", self.margin)));
        }
        if self.knn_k == 0 {
            return Err(LossError::Config("knn_k must be positive".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(LossError::Config(format!("lambda {} is negative", self.lambda)));
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize_rows(values: &mut [f64], dim: usize) {
    for row in values.chunks_mut(dim) {
        let n = norm(row);
        if n > 0.0 {
            row.iter_mut().for_each(|x| *x /= n);
        }
    }
}

pub fn cosine_sim(a: &[f64], b: &[f64]) -> Result<f64, LossError> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(LossError::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

fn check_seg(emb: &EmbeddingMap, seg: &[u32]) -> Result<(), LossError> {
    if seg.len() != emb.pixels() {
        return Err(LossError::Shape(format!(
            "{} labels for a {}x{} embedding map",
            seg.len(),
            emb.height,
            emb.width
        )));
    }
    Ok(())
}

/// L2-normalized mean of the (normalized) pixel embeddings of each
/// foreground label present in `seg`.
pub fn mean_class_embeddings(emb: &EmbeddingMap, seg: &[u32]) -> Result<BTreeMap<u32, Vec<f64>>, LossError> {
    check_seg(emb, seg)?;
    let mut sums: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for (i, &l) in seg.iter().enumerate() {
        if l == 0 {
            continue;
        }
        let e = emb.pixel(i);
        let n = norm(e);
        if n == 0.0 {
            return Err(LossError::ZeroVector);
        }
        let acc = sums.entry(l).or_insert_with(|| vec![0.0; emb.dim]);
        acc.iter_mut().zip(e).for_each(|(a, x)| *a += x / n);
    }
    for v in sums.values_mut() {
        let n = norm(v);
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
        }
    }
    Ok(sums)
}

/// The `k` labels whose prototypes are most similar to each class mean,
/// excluding the class itself. Ties go to the lower label.
pub fn knn_negatives(
    means: &BTreeMap<u32, Vec<f64>>,
    bank: &PrototypeBank,
    k: usize,
) -> Result<BTreeMap<u32, Vec<u32>>, LossError> {
    if k >= bank.count() {
        return Err(LossError::Config(format!(
            "k={k} must be below the prototype count {}",
            bank.count()
        )));
    }
    let norms: Vec<f64> = (0..bank.count()).map(|r| norm(bank.row(r))).collect();
    let mut out = BTreeMap::new();
    for (&label, mean) in means {
        let mn = norm(mean);
        let mut scored: Vec<(f64, u32)> = (0..bank.count())
            .map(|r| (r, bank.label_of_row(r)))
            .filter(|&(_, l)| l != label)
            .map(|(r, l)| (dot(mean, bank.row(r)) / (mn * norms[r]), l))
            .collect();
        let by_score = |a: &(f64, u32), b: &(f64, u32)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, by_score);
            scored.truncate(k);
        }
        scored.sort_by(by_score);
        out.insert(label, scored.into_iter().map(|(_, l)| l).collect());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletOutput {
    pub loss: f64,
    /// Gradient w.r.t. the raw embeddings, same layout as [`EmbeddingMap`].
    pub grad_emb: Vec<f64>,
    /// Gradient w.r.t. the raw prototypes, same layout as [`PrototypeBank`].
    pub grad_proto: Vec<f64>,
    /// Sampled negative label per pixel; 0 on background.
    pub negatives: Vec<u32>,
}

/// Draws one negative label per foreground pixel, in row-major order.
pub fn sample_negatives(
    emb: &EmbeddingMap,
    seg: &[u32],
    bank: &PrototypeBank,
    cfg: &TripletConfig,
) -> Result<Vec<u32>, LossError> {
    check_seg(emb, seg)?;
    for &l in seg.iter().filter(|&&l| l != 0) {
        if bank.row_of_label(l).is_none() {
            return Err(LossError::LabelOutOfRange {
                label: l,
                count: bank.count(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match cfg.mining {
        NegativeMining::Knn => {
            let means = mean_class_embeddings(emb, seg)?;
            let knn = knn_negatives(&means, bank, cfg.knn_k)?;
            Ok(seg
                .iter()
                .map(|&l| {
                    if l == 0 {
                        0
                    } else {
                        let set = &knn[&l];
                        set[rng.random_range(0..set.len())]
                    }
                })
                .collect())
        }
        NegativeMining::Uniform => {
            let rows = bank.count();
            if rows < 2 {
                return Err(LossError::Config("uniform mining needs 2 prototypes".into()));
            }
            Ok(seg
                .iter()
                .map(|&l| {
                    if l == 0 {
                        return 0;
                    }
                    let pos = bank.row_of_label(l).unwrap_or(0);
                    let mut r = rng.random_range(0..rows - 1);
                    if r >= pos {
                        r += 1;
                    }
                    bank.label_of_row(r)
                })
                .collect())
        }
    }
}

/// Sum over foreground pixels of `max(0, m + sim(E_i, P_neg) − sim(E_i, P_pos))`
/// with negatives mined and sampled according to `cfg`.
pub fn triplet_loss(
    emb: &EmbeddingMap,
    seg: &[u32],
    bank: &PrototypeBank,
    cfg: &TripletConfig,
) -> Result<TripletOutput, LossError> {
    cfg.validate()?;
    if emb.dim != bank.dim {
        return Err(LossError::Shape(format!(
            "embedding dim {} vs prototype dim {}",
            emb.dim, bank.dim
        )));
    }
    let negatives = sample_negatives(emb, seg, bank, cfg)?;
    triplet_loss_with_negatives(emb, seg, bank, cfg.margin, &negatives)
}

/// Loss and exact gradients for a fixed choice of negatives.
pub fn triplet_loss_with_negatives(
    emb: &EmbeddingMap,
    seg: &[u32],
    bank: &PrototypeBank,
    margin: f64,
    negatives: &[u32],
) -> Result<TripletOutput, LossError> {
    check_seg(emb, seg)?;
    if negatives.len() != seg.len() || emb.dim != bank.dim {
        return Err(LossError::Shape("negatives/prototypes do not match the map".into()));
    }
    let dim = emb.dim;
    let proto_norms: Vec<f64> = (0..bank.count()).map(|r| norm(bank.row(r))).collect();
    let row = |l: u32| {
        bank.row_of_label(l).ok_or(LossError::LabelOutOfRange {
            label: l,
            count: bank.count(),
        })
    };

    let mut loss = 0.0;
    let mut grad_emb = vec![0.0; emb.values.len()];
    let mut grad_proto = vec![0.0; bank.values.len()];
    for (i, (&l, &neg)) in seg.iter().zip(negatives).enumerate() {
        if l == 0 {
            continue;
        }
        let (rp, rn) = (row(l)?, row(neg)?);
        let e = emb.pixel(i);
        let en = norm(e);
        let (pn_pos, pn_neg) = (proto_norms[rp], proto_norms[rn]);
        if en == 0.0 || pn_pos == 0.0 || pn_neg == 0.0 {
            return Err(LossError::ZeroVector);
        }
        let (p_pos, p_neg) = (bank.row(rp), bank.row(rn));
        let s_pos = dot(e, p_pos) / (en * pn_pos);
        let s_neg = dot(e, p_neg) / (en * pn_neg);
        let hinge = margin + s_neg - s_pos;
        if hinge <= 0.0 {
            continue;
        }
        loss += hinge;

        // d cos(a, b) / d a = (b̂ − cos · â) / ‖a‖
        let ge = &mut grad_emb[i * dim..(i + 1) * dim];
        for d in 0..dim {
            let e_hat = e[d] / en;
            ge[d] += (p_neg[d] / pn_neg - s_neg * e_hat) / en - (p_pos[d] / pn_pos - s_pos * e_hat) / en;
        }
        for d in 0..dim {
            let e_hat = e[d] / en;
            grad_proto[rn * dim + d] += (e_hat - s_neg * p_neg[d] / pn_neg) / pn_neg;
            grad_proto[rp * dim + d] -= (e_hat - s_pos * p_pos[d] / pn_pos) / pn_pos;
        }
    }
    Ok(TripletOutput {
        loss,
        grad_emb,
        grad_proto,
        negatives: negatives.to_vec(),
    })
}

/// `Σ_i 1(S_i ≠ 0) · ‖d̂_i − d_i‖₁` over pixels whose ground-truth vote is
/// non-degenerate, with its sign subgradient (zero at exact ties).
pub fn voting_loss(pred: &[f64], gt: &LandmarkMaps) -> Result<(f64, Vec<f64>), LossError> {
    if pred.len() != gt.len() * 2 {
        return Err(LossError::Shape(format!(
            "{} predicted components for {} pixels",
            pred.len(),
            gt.len()
        )));
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for (i, (&l, v)) in gt.labels.iter().zip(&gt.votes).enumerate() {
        if l == 0 || (v[0] == 0.0 && v[1] == 0.0) {
            continue;
        }
        for c in 0..2 {
            let diff = pred[2 * i + c] - v[c] as f64;
            loss += diff.abs();
            grad[2 * i + c] = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
        }
    }
    Ok((loss, grad))
}

pub fn overall_loss(triplet: f64, vote: f64, lambda: f64) -> f64 {
    triplet + lambda * vote
}

/// Per-pixel argmax of cosine similarity over all prototypes; ties go to the
/// lower label. Zero-norm pixels map to the first prototype.
pub fn predict_labels(emb: &EmbeddingMap, bank: &PrototypeBank) -> Vec<u32> {
    let dim = emb.dim.min(bank.dim);
    let protos: Vec<Vec<f64>> = (0..bank.count())
        .map(|r| {
            let p = bank.row(r);
            let n = norm(p);
            p.iter().map(|x| if n > 0.0 { x / n } else { 0.0 }).collect()
        })
        .collect();
    let classify = |i: usize| {
        let e = &emb.pixel(i)[..dim];
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (r, p) in protos.iter().enumerate() {
            let s = dot(e, p);
            if s > best.0 {
                best = (s, r);
            }
        }
        bank.label_of_row(best.1)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..emb.pixels()).into_par_iter().map(classify).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..emb.pixels()).map(classify).collect()
    }
}

/// Fraction of foreground pixels whose predicted label matches `seg`.
pub fn pixel_accuracy(pred: &[u32], seg: &[u32]) -> f64 {
    let (hit, total) = pred
        .iter()
        .zip(seg)
        .filter(|(_, &s)| s != 0)
        .fold((0usize, 0usize), |(h, t), (&p, &s)| (h + (p == s) as usize, t + 1));
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

#[derive(Debug, Clone)]
pub struct ToyFit {
    pub embeddings: EmbeddingMap,
    pub bank: PrototypeBank,
    /// Pixel accuracy after each step.
    pub accuracy_trace: Vec<f64>,
}

impl ToyFit {
    /// First step (1-based) at which accuracy reached `target`.
    pub fn steps_to(&self, target: f64) -> Option<usize> {
        self.accuracy_trace.iter().position(|&a| a >= target).map(|i| i + 1)
    }
}

/// Jointly fits free per-pixel embeddings and one prototype per class by
/// gradient descent on the triplet loss, re-normalizing after every step.
pub fn fit_toy_segmentation(
    gt: &LandmarkMaps,
    dim: usize,
    cfg: &TripletConfig,
    steps: usize,
    lr: f64,
) -> Result<ToyFit, LossError> {
    cfg.validate()?;
    let active = gt.active_labels();
    if active.len() < 2 {
        return Err(LossError::TooFewLabels(active.len()));
    }
    if dim == 0 {
        return Err(LossError::Config("embedding dim must be positive".into()));
    }
    let count = gt.n as usize;
    if cfg.mining == NegativeMining::Knn && cfg.knn_k >= count {
        return Err(LossError::Config(format!(
            "k={} must be below the class count {count}",
            cfg.knn_k
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut emb = EmbeddingMap::random(gt.height as usize, gt.width as usize, dim, &mut rng);
    let mut bank = PrototypeBank::random(count, dim, &mut rng);
    let mut trace = Vec::with_capacity(steps);
    for step in 0..steps {
        let step_cfg = TripletConfig {
            seed: cfg.seed ^ (step as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            ..*cfg
        };
        let out = triplet_loss(&emb, &gt.labels, &bank, &step_cfg)?;
        emb.values.iter_mut().zip(&out.grad_emb).for_each(|(x, g)| *x -= lr * g);
        bank.values
            .iter_mut()
            .zip(&out.grad_proto)
            .for_each(|(x, g)| *x -= lr * g);
        emb.normalize();
        bank.normalize();
        trace.push(pixel_accuracy(&predict_labels(&emb, &bank), &gt.labels));
    }
    Ok(ToyFit {
        embeddings: emb,
        bank,
        accuracy_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(dim: usize, axis: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        v
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_sim(&[0.6, 0.8], &[0.6, 0.8]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_sim(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine_sim(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(cosine_sim(&[0.0, 0.0], &[1.0, 1.0]), Err(LossError::ZeroVector));
    }

    #[test]
    fn mean_embeddings_examples() {
        let emb = EmbeddingMap::new(1, 3, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        let means = mean_class_embeddings(&emb, &[3, 3, 0]).unwrap();
        assert_eq!(means.len(), 1);
        let m = &means[&3];
        let h = 0.5f64.sqrt();
        assert!((m[0] - h).abs() < 1e-15 && (m[1] - h).abs() < 1e-15);
        assert!(mean_class_embeddings(&emb, &[0, 0, 0]).unwrap().is_empty());
    }

    #[test]
    fn knn_tie_break_and_exact_match() {
        let dim = 6;
        let values: Vec<f64> = (0..5).flat_map(|a| unit(dim, a)).collect();
        let bank = PrototypeBank::new(5, dim, values).unwrap();
        let mut means = BTreeMap::new();
        means.insert(1, unit(dim, 5));
        assert_eq!(knn_negatives(&means, &bank, 2).unwrap()[&1], vec![2, 3]);

        // Label 5's prototype equals the mean of label 1.
        let mut means = BTreeMap::new();
        means.insert(1, unit(dim, 4));
        assert_eq!(knn_negatives(&means, &bank, 1).unwrap()[&1], vec![5]);
        assert!(knn_negatives(&means, &bank, 5).is_err());
    }

    #[test]
    fn hinge_examples() {
        // sim+ = 1, sim- = 0, margin 0.5: inactive.
        let emb = EmbeddingMap::new(1, 1, 2, vec![1.0, 0.0]).unwrap();
        let bank = PrototypeBank::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let out = triplet_loss_with_negatives(&emb, &[1], &bank, 0.5, &[2]).unwrap();
        assert_eq!(out.loss, 0.0);
        assert!(out.grad_emb.iter().chain(&out.grad_proto).all(|&g| g == 0.0));

        // sim+ = 0.6, sim- = 0.5, margin 0.2: loss 0.1.
        let e = [1.0, 0.0, 0.0];
        let p_pos = [0.6, 0.8, 0.0];
        let p_neg = [0.5, 0.0, 0.75f64.sqrt()];
        let emb = EmbeddingMap::new(1, 1, 3, e.to_vec()).unwrap();
        let bank = PrototypeBank::new(2, 3, [p_pos, p_neg].concat()).unwrap();
        let out = triplet_loss_with_negatives(&emb, &[1], &bank, 0.2, &[2]).unwrap();
        assert!((out.loss - 0.1).abs() < 1e-12, "{}", out.loss);
    }

    #[test]
    fn triplet_loss_rejects_unknown_labels() {
        let emb = EmbeddingMap::new(1, 2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let bank = PrototypeBank::new(3, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let cfg = TripletConfig {
            knn_k: 1,
            ..Default::default()
        };
        assert!(matches!(
            triplet_loss(&emb, &[1, 4], &bank, &cfg),
            Err(LossError::LabelOutOfRange { label: 4, .. })
        ));
    }

    #[test]
    fn voting_loss_examples() {
        let mut gt = LandmarkMaps::background(1, 2, 1);
        gt.labels[0] = 1;
        gt.votes[0] = [0.0, 1.0];
        let (loss, grad) = voting_loss(&[1.0, 0.0, 0.3, -0.2], &gt).unwrap();
        assert_eq!(loss, 2.0);
        assert_eq!(grad, vec![1.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn overall_loss_examples() {
        assert_eq!(overall_loss(1.0, 2.0, 1.0), 3.0);
        assert_eq!(overall_loss(1.0, 2.0, 0.0), 1.0);
        assert_eq!(overall_loss(0.5, 0.25, 4.0), 1.5);
    }

    #[test]
    fn predict_matches_prototype_and_breaks_ties_low() {
        let dim = 8;
        let values: Vec<f64> = (0..8).flat_map(|a| unit(dim, a)).collect();
        let bank = PrototypeBank::new(8, dim, values).unwrap();
        let emb = EmbeddingMap::new(1, 2, dim, [unit(dim, 6), vec![1.0; dim]].concat()).unwrap();
        assert_eq!(predict_labels(&emb, &bank), vec![7, 1]);
    }

    #[test]
    fn background_prototype_shifts_labels() {
        let mut bank = PrototypeBank::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        bank.has_background = true;
        let emb = EmbeddingMap::new(1, 2, 2, vec![1.0, 0.1, 0.1, 1.0]).unwrap();
        assert_eq!(predict_labels(&emb, &bank), vec![0, 1]);
        assert_eq!(bank.row_of_label(0), Some(0));
        assert_eq!(bank.row_of_label(2), None);
    }

    fn two_label_map() -> LandmarkMaps {
        let mut gt = LandmarkMaps::background(4, 4, 2);
        for i in 0..16 {
            gt.labels[i] = if i % 4 < 2 { 1 } else { 2 };
        }
        gt
    }

    #[test]
    fn toy_fit_separates_two_labels() {
        let cfg = TripletConfig {
            knn_k: 1,
            seed: 5,
            ..Default::default()
        };
        let fit = fit_toy_segmentation(&two_label_map(), 4, &cfg, 30, 0.2).unwrap();
        assert_eq!(*fit.accuracy_trace.last().unwrap(), 1.0);
        assert!(fit.embeddings.is_normalized(1e-9));
        let again = fit_toy_segmentation(&two_label_map(), 4, &cfg, 30, 0.2).unwrap();
        assert_eq!(fit.accuracy_trace, again.accuracy_trace);
    }

    #[test]
    fn toy_fit_needs_two_labels() {
        let gt = LandmarkMaps::background(2, 2, 1);
        assert_eq!(
            fit_toy_segmentation(&gt, 4, &TripletConfig::default(), 1, 0.1).unwrap_err(),
            LossError::TooFewLabels(0)
        );
    }

    #[test]
    fn config_validation() {
        assert!(TripletConfig::default().validate().is_ok());
        assert!(TripletConfig {
            margin: 2.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
