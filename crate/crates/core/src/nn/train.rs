//! Mini-batch training, evaluation and two-network mutual learning.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::argmax_rows;
use super::optim::{Optimizer, OptimizerKind};
use super::{encode_batch, Network};
use crate::data::Dataset;
use crate::error::{dims, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Weight of the distillation term.
    pub alpha: f64,
    pub temperature: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 64,
            lr: 1e-3,
            optimizer: OptimizerKind::default(),
            seed: 0,
            alpha: 1.0,
            temperature: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("learning rate must be finite and nonnegative, got {}", self.lr)));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be nonnegative, got {}", self.alpha)));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::Config(format!("temperature must be positive, got {}", self.temperature)));
        }
        Ok(())
    }
}

/// Stream of the run generator that orders mini-batches. Weight
/// initialization uses stream 0, so two models built from the same seed
/// see the same batches whatever their size.
pub const BATCH_STREAM: u64 = 1;

/// Generator for stream `stream` of the run seeded by `seed`.
pub fn run_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub ce: f64,
    pub kd: f64,
    pub train_accuracy: f64,
    pub eval_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.records {
            out.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn last_eval_accuracy(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.eval_accuracy)
    }
}

fn check_data(net: &Network, data: &Dataset) -> Result<()> {
    if data.image_shape() != net.spec.arch.input {
        return Err(dims(
            "dataset images",
            format!("{:?}", net.spec.arch.input),
            format!("{:?}", data.image_shape()),
        ));
    }
    if data.classes != net.classes() {
        return Err(dims("dataset classes", net.classes(), data.classes));
    }
    Ok(())
}

/// Evaluation batch; larger batches only inflate the unrolled conv patches.
const EVAL_BATCH: usize = 64;

/// Class scores for every sample, `N x classes`.
pub fn predict(net: &Network, data: &Dataset) -> Result<ndarray::Array2<f64>> {
    check_data(net, data)?;
    let mut rows = Vec::with_capacity(data.len() * net.classes());
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(EVAL_BATCH) {
        let logits = net.forward(&encode_batch(&net.spec, data, chunk)?)?;
        rows.extend(logits.iter().copied());
    }
    Ok(ndarray::Array2::from_shape_vec((data.len(), net.classes()), rows).expect("row count"))
}

/// Fraction of samples whose highest score is the label.
pub fn evaluate(net: &Network, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let logits = predict(net, data)?;
    let hits = argmax_rows(logits.view())
        .iter()
        .zip(data.labels())
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / data.len() as f64)
}

struct Learner<'a> {
    net: &'a mut Network,
    opt: Optimizer,
    sums: [f64; 4],
}

impl<'a> Learner<'a> {
    fn new(net: &'a mut Network, cfg: &TrainConfig) -> Self {
        let opt = Optimizer::new(cfg.optimizer, cfg.lr, net.params.iter().map(|p| p.value.dim()));
        Learner { net, opt, sums: [0.0; 4] }
    }

    fn record(&mut self, epoch: usize, hits: usize, n: usize, eval: Option<&Dataset>) -> Result<EpochRecord> {
        let steps = self.sums[3].max(1.0);
        let rec = EpochRecord {
            epoch,
            loss: self.sums[0] / steps,
            ce: self.sums[1] / steps,
            kd: self.sums[2] / steps,
            train_accuracy: hits as f64 / n as f64,
            eval_accuracy: eval.map(|d| evaluate(self.net, d)).transpose()?,
        };
        self.sums = [0.0; 4];
        Ok(rec)
    }
}

/// Trains `net` with cross-entropy. Deterministic given `cfg.seed`.
pub fn train(net: &mut Network, data: &Dataset, eval: Option<&Dataset>, cfg: &TrainConfig) -> Result<TrainHistory> {
    train_with_progress(net, data, eval, cfg, |_| {})
}

pub fn train_with_progress(
    net: &mut Network,
    data: &Dataset,
    eval: Option<&Dataset>,
    cfg: &TrainConfig,
    progress: impl FnMut(&EpochRecord),
) -> Result<TrainHistory> {
    let (h, _) = run_training(net, None, data, eval, cfg, false, progress)?;
    Ok(h)
}

/// How the second network of a mutual-learning run is updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutualMode {
    /// Both networks learn from the labels and from each other.
    Mutual,
    /// The teacher is fixed; only the student is updated.
    FrozenTeacher,
}

/// Trains `student` and `teacher` side by side on the same batches. Each
/// adds `alpha` times the KL term toward the other's current predictions;
/// both updates use the logits from before the step. With `alpha = 0` the
/// result equals two independent [`train`] runs with the same seed.
pub fn mutual_train(
    student: &mut Network,
    teacher: &mut Network,
    data: &Dataset,
    eval: Option<&Dataset>,
    cfg: &TrainConfig,
    mode: MutualMode,
) -> Result<(TrainHistory, TrainHistory)> {
    mutual_train_with_progress(student, teacher, data, eval, cfg, mode, |_| {})
}

pub fn mutual_train_with_progress(
    student: &mut Network,
    teacher: &mut Network,
    data: &Dataset,
    eval: Option<&Dataset>,
    cfg: &TrainConfig,
    mode: MutualMode,
    progress: impl FnMut(&EpochRecord),
) -> Result<(TrainHistory, TrainHistory)> {
    if student.classes() != teacher.classes() {
        return Err(dims("mutual learning classes", student.classes(), teacher.classes()));
    }
    let (s, t) = run_training(student, Some(teacher), data, eval, cfg, mode == MutualMode::FrozenTeacher, progress)?;
    Ok((s, t.unwrap_or_default()))
}

fn run_training(
    net: &mut Network,
    peer: Option<&mut Network>,
    data: &Dataset,
    eval: Option<&Dataset>,
    cfg: &TrainConfig,
    peer_frozen: bool,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<(TrainHistory, Option<TrainHistory>)> {
    cfg.validate()?;
    check_data(net, data)?;
    if let Some(p) = peer.as_deref() {
        check_data(p, data)?;
    }
    if data.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let mut rng = run_rng(cfg.seed, BATCH_STREAM);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut a = Learner::new(net, cfg);
    let mut b = peer.map(|p| Learner::new(p, cfg));
    let mut hist_a = TrainHistory::default();
    let mut hist_b = b.as_ref().map(|_| TrainHistory::default());
    let distill = cfg.alpha > 0.0;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut hits_a, mut hits_b) = (0usize, 0usize);
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let labels: Vec<usize> = chunk.iter().map(|&i| data.labels()[i]).collect();
            let xa = encode_batch(&a.net.spec, data, chunk)?;
            let (out_a, out_b) = match b.as_mut() {
                Some(bl) => {
                    let xb = encode_batch(&bl.net.spec, data, chunk)?;
                    if distill {
                        let pa = a.net.begin(&xa)?;
                        let pb = bl.net.begin(&xb)?;
                        let (la, lb) = (pa.logits.clone(), pb.logits.clone());
                        let oa = a.net.finish(pa, &labels, Some((&lb, cfg.alpha, cfg.temperature)))?;
                        let ob = bl.net.finish(pb, &labels, Some((&la, cfg.alpha, cfg.temperature)))?;
                        (oa, Some(ob))
                    } else {
                        (a.net.loss_and_grad(&xa, &labels, None)?, Some(bl.net.loss_and_grad(&xb, &labels, None)?))
                    }
                }
                None => (a.net.loss_and_grad(&xa, &labels, None)?, None),
            };
            for out in std::iter::once(&out_a).chain(out_b.as_ref()) {
                if !out.loss.is_finite() {
                    return Err(Error::Divergence { epoch, step, loss: out.loss });
                }
            }
            hits_a += count_hits(&out_a.logits, &labels);
            a.sums = add(a.sums, &out_a);
            a.opt.step(&mut a.net.param_values_mut(), &out_a.grads);
            if let (Some(bl), Some(ob)) = (b.as_mut(), out_b) {
                hits_b += count_hits(&ob.logits, &labels);
                bl.sums = add(bl.sums, &ob);
                if !peer_frozen {
                    bl.opt.step(&mut bl.net.param_values_mut(), &ob.grads);
                }
            }
        }
        let n = data.len();
        let rec = a.record(epoch, hits_a, n, eval)?;
        progress(&rec);
        hist_a.records.push(rec);
        if let (Some(bl), Some(h)) = (b.as_mut(), hist_b.as_mut()) {
            let rec = bl.record(epoch, hits_b, n, eval)?;
            h.records.push(rec);
        }
    }
    Ok((hist_a, hist_b))
}

fn count_hits(logits: &ndarray::Array2<f64>, labels: &[usize]) -> usize {
    argmax_rows(logits.view()).iter().zip(labels).filter(|(p, l)| p == l).count()
}

fn add(s: [f64; 4], o: &super::StepOutput) -> [f64; 4] {
    [s[0] + o.loss, s[1] + o.ce, s[2] + o.kd, s[3] + 1.0]
}
