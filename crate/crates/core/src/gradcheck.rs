//! Central finite-difference checks of the triplet and voting loss gradients
//! on random instances.
//!
//! Instances are drawn away from the non-differentiable points of both
//! losses: every active hinge and every L1 residual is at least
//! [`KINK_CLEARANCE`] from zero, so a central difference never straddles a
//! kink.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::landmark::LandmarkMaps;
use crate::triplet::{
    sample_negatives, triplet_loss_with_negatives, voting_loss, EmbeddingMap, LossError, PrototypeBank, TripletConfig,
};

pub const FD_STEP: f64 = 1e-5;
pub const KINK_CLEARANCE: f64 = 1e-3;
/// Floor on the relative-error denominator, so components that are
/// analytically zero are compared in absolute terms.
pub const REL_ERR_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckParams {
    pub instances: usize,
    pub max_side: usize,
    pub labels: u32,
    pub dim: usize,
    pub seed: u64,
}

impl Default for GradCheckParams {
    fn default() -> Self {
        Self {
            instances: 50,
            max_side: 16,
            labels: 20,
            dim: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradCheckReport {
    pub instances: usize,
    pub max_rel_err_embedding: f64,
    pub max_rel_err_prototype: f64,
    pub max_rel_err_vote: f64,
    pub components_checked: usize,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.max_rel_err_embedding
            .max(self.max_rel_err_prototype)
            .max(self.max_rel_err_vote)
    }
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// A triplet-loss instance with negatives fixed.
#[derive(Debug, Clone)]
pub struct TripletInstance {
    pub emb: EmbeddingMap,
    pub seg: Vec<u32>,
    pub bank: PrototypeBank,
    pub margin: f64,
    pub negatives: Vec<u32>,
}

/// Random raw (unnormalized) embeddings and prototypes with kNN-sampled
/// negatives, redrawn until every hinge clears the kink.
pub fn random_triplet_instance(
    rng: &mut impl Rng,
    max_side: usize,
    labels: u32,
    dim: usize,
) -> Result<TripletInstance, LossError> {
    loop {
        let h = rng.random_range(1..=max_side);
        let w = rng.random_range(1..=max_side);
        let n = labels.max(2);
        let seg: Vec<u32> = (0..h * w)
            .map(|_| {
                if rng.random_bool(0.15) {
                    0
                } else {
                    rng.random_range(1..=n)
                }
            })
            .collect();
        let mut gauss =
            |len: usize| -> Vec<f64> { (0..len).map(|_| rng.sample::<f64, _>(StandardNormal) * 1.5).collect() };
        let emb = EmbeddingMap::new(h, w, dim, gauss(h * w * dim))?;
        let bank = PrototypeBank::new(n as usize, dim, gauss(n as usize * dim))?;
        let cfg = TripletConfig {
            margin: rng.random_range(0.1..0.6),
            knn_k: rng.random_range(1..n as usize),
            seed: rng.random(),
            ..Default::default()
        };
        let negatives = sample_negatives(&emb, &seg, &bank, &cfg)?;
        if hinges_clear(&emb, &seg, &bank, cfg.margin, &negatives) {
            return Ok(TripletInstance {
                emb,
                seg,
                bank,
                margin: cfg.margin,
                negatives,
            });
        }
    }
}

fn hinges_clear(emb: &EmbeddingMap, seg: &[u32], bank: &PrototypeBank, margin: f64, negatives: &[u32]) -> bool {
    seg.iter().zip(negatives).enumerate().all(|(i, (&l, &neg))| {
        if l == 0 {
            return true;
        }
        let e = emb.pixel(i);
        let p = bank.row(bank.row_of_label(l).unwrap());
        let q = bank.row(bank.row_of_label(neg).unwrap());
        let cos = |a: &[f64], b: &[f64]| crate::triplet::cosine_sim(a, b).unwrap_or(0.0);
        (margin + cos(e, q) - cos(e, p)).abs() > KINK_CLEARANCE
    })
}

/// Random ground-truth maps (some background, some degenerate votes) and a
/// prediction whose every component differs from the truth by at least the
/// kink clearance.
pub fn random_vote_instance(rng: &mut impl Rng, max_side: usize, labels: u32) -> (Vec<f64>, LandmarkMaps) {
    let h = rng.random_range(1..=max_side) as u32;
    let w = rng.random_range(1..=max_side) as u32;
    let mut gt = LandmarkMaps::background(h, w, labels);
    for i in 0..gt.len() {
        if rng.random_bool(0.2) {
            continue;
        }
        gt.labels[i] = rng.random_range(1..=labels);
        if !rng.random_bool(0.05) {
            let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            gt.votes[i] = [a.cos() as f32, a.sin() as f32];
        }
    }
    let pred = (0..gt.len() * 2)
        .map(|c| {
            let offset = rng.random_range(KINK_CLEARANCE..1.0);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            gt.votes[c / 2][c % 2] as f64 + sign * offset
        })
        .collect();
    (pred, gt)
}

fn central_difference(values: &mut [f64], idx: usize, f: &mut impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = values[idx];
    values[idx] = orig + FD_STEP;
    let plus = f(values);
    values[idx] = orig - FD_STEP;
    let minus = f(values);
    values[idx] = orig;
    (plus - minus) / (2.0 * FD_STEP)
}

/// Max relative error of the triplet gradients on one instance:
/// `(embedding, prototype)`.
pub fn check_triplet_instance(inst: &TripletInstance) -> Result<(f64, f64), LossError> {
    let out = triplet_loss_with_negatives(&inst.emb, &inst.seg, &inst.bank, inst.margin, &inst.negatives)?;
    let mut values = inst.emb.values.clone();
    let mut worst_e: f64 = 0.0;
    for idx in 0..values.len() {
        let num = central_difference(&mut values, idx, &mut |v| {
            let e = EmbeddingMap::new(inst.emb.height, inst.emb.width, inst.emb.dim, v.to_vec()).unwrap();
            triplet_loss_with_negatives(&e, &inst.seg, &inst.bank, inst.margin, &inst.negatives)
                .map_or(f64::NAN, |o| o.loss)
        });
        worst_e = worst_e.max(rel_err(out.grad_emb[idx], num));
    }
    let mut values = inst.bank.values.clone();
    let mut worst_p: f64 = 0.0;
    for idx in 0..values.len() {
        let num = central_difference(&mut values, idx, &mut |v| {
            let b = PrototypeBank::new(inst.bank.count(), inst.bank.dim, v.to_vec()).unwrap();
            triplet_loss_with_negatives(&inst.emb, &inst.seg, &b, inst.margin, &inst.negatives)
                .map_or(f64::NAN, |o| o.loss)
        });
        worst_p = worst_p.max(rel_err(out.grad_proto[idx], num));
    }
    Ok((worst_e, worst_p))
}

pub fn check_vote_instance(pred: &[f64], gt: &LandmarkMaps) -> Result<f64, LossError> {
    let (_, grad) = voting_loss(pred, gt)?;
    let mut values = pred.to_vec();
    let mut worst: f64 = 0.0;
    for (idx, &g) in grad.iter().enumerate() {
        let num = central_difference(&mut values, idx, &mut |v| {
            voting_loss(v, gt).map(|(l, _)| l).unwrap_or(f64::NAN)
        });
        worst = worst.max(rel_err(g, num));
    }
    Ok(worst)
}

/// Runs the triplet and voting checks on `params.instances` random instances.
pub fn run_gradient_check(params: &GradCheckParams) -> Result<GradCheckReport, LossError> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut report = GradCheckReport {
        instances: params.instances,
        ..Default::default()
    };
    for _ in 0..params.instances {
        let inst = random_triplet_instance(&mut rng, params.max_side, params.labels, params.dim)?;
        let (e, p) = check_triplet_instance(&inst)?;
        report.max_rel_err_embedding = report.max_rel_err_embedding.max(e);
        report.max_rel_err_prototype = report.max_rel_err_prototype.max(p);
        report.components_checked += inst.emb.values.len() + inst.bank.values.len();

        let (pred, gt) = random_vote_instance(&mut rng, params.max_side, params.labels);
        report.max_rel_err_vote = report.max_rel_err_vote.max(check_vote_instance(&pred, &gt)?);
        report.components_checked += pred.len();
    }
    Ok(report)
}
