//! The two training pipelines: center crops only, or random crops drawn
//! from a larger centered source region. Everything else is identical.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::data::{center_crop, normalize, percentile, random_crop_aug, Chip, CropSpec, Image, NORMALIZATION_PERCENTILE};
use crate::error::{Error, Result};
use crate::model::{argmax_rows, Network, NetworkConfig, TrainedModel, TrainingMeta};
use crate::nn::batchnorm::Mode;
use crate::nn::loss::softmax_cross_entropy;
use crate::nn::optim::{sgd_step, SgdConfig};
use crate::nn::tensor::Tensor;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Augmentation {
    /// Every sample is trained on its center crop.
    None,
    /// Random crop from the centered `source x source` region, redrawn per
    /// sample per epoch.
    RandomCrop { source: usize },
}

impl fmt::Display for Augmentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Augmentation::None => f.write_str("none"),
            Augmentation::RandomCrop { source } => write!(f, "random:{source}"),
        }
    }
}

impl FromStr for Augmentation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(Augmentation::None),
            other => other
                .strip_prefix("random:")
                .and_then(|n| n.parse().ok())
                .map(|source| Augmentation::RandomCrop { source })
                .ok_or_else(|| Error::Config(format!("augmentation '{s}' is not 'none' or 'random:<source size>'"))),
        }
    }
}

/// Step decay: the learning rate is multiplied by `factor` at each
/// milestone epoch (0-based epoch index at which the new rate starts).
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    pub factor: f64,
    pub milestones: Vec<usize>,
}

impl LrSchedule {
    pub fn lr_at(&self, base: f64, epoch: usize) -> f64 {
        let steps = self.milestones.iter().filter(|&&m| epoch >= m).count();
        base * self.factor.powi(steps as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub augmentation: Augmentation,
    pub crop_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_schedule: LrSchedule,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            augmentation: Augmentation::None,
            crop_size: 96,
            epochs: 100,
            batch_size: 32,
            lr: 0.01,
            lr_schedule: LrSchedule { factor: 0.1, milestones: vec![50, 75] },
            momentum: 0.9,
            weight_decay: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn crop_spec(&self) -> CropSpec {
        match self.augmentation {
            Augmentation::None => CropSpec::center(self.crop_size),
            Augmentation::RandomCrop { source } => CropSpec::random(self.crop_size, source),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if let Augmentation::RandomCrop { source } = self.augmentation {
            if source < self.crop_size {
                return Err(Error::Config(format!("augmentation source {source} is smaller than crop {}", self.crop_size)));
            }
        }
        if !(self.lr >= 0.0 && self.momentum >= 0.0 && self.weight_decay >= 0.0) {
            return Err(Error::Config("lr, momentum and weight_decay must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_acc: f64,
    pub lr: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    /// `epoch<TAB>mean_loss<TAB>train_acc<TAB>lr<TAB>wall_seconds` with a
    /// header row; epochs are 1-based.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("epoch\tmean_loss\ttrain_acc\tlr\twall_seconds\n");
        for r in &self.records {
            s.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{:.6e}\t{:.3}\n",
                r.epoch, r.mean_loss, r.train_acc, r.lr, r.wall_seconds
            ));
        }
        s
    }
}

/// The normalization divisor: the 99.9th-percentile raw magnitude over all
/// pixels of the training chips (1.0 if that is not positive).
pub fn normalization_scale(chips: &[Chip]) -> Result<f32> {
    let all: Vec<f32> = chips.iter().flat_map(|c| c.pixels.data.iter().copied()).collect();
    let p = percentile(&all, NORMALIZATION_PERCENTILE)?;
    Ok(if p > 0.0 { p } else { 1.0 })
}

/// Stacks normalized patches into an `(N, 1, S, S)` batch.
pub fn stack_patches(patches: &[Image], scale: f32) -> Result<Tensor<f32>> {
    let size = patches.first().map_or(0, |p| p.rows);
    let mut data = Vec::with_capacity(patches.len() * size * size);
    for p in patches {
        if p.rows != size || p.cols != size {
            return Err(Error::InvalidShape(format!("patch {}x{} in a batch of {size}x{size}", p.rows, p.cols)));
        }
        data.extend(normalize(p, scale).data);
    }
    Tensor::from_vec([patches.len(), 1, size, size], data)
}

fn check_inputs(net_config: &NetworkConfig, cfg: &TrainConfig, chips: &[Chip]) -> Result<()> {
    cfg.validate()?;
    if chips.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    if net_config.input_size != cfg.crop_size {
        return Err(Error::Config(format!(
            "network input {} differs from crop size {}",
            net_config.input_size, cfg.crop_size
        )));
    }
    let need = match cfg.augmentation {
        Augmentation::None => cfg.crop_size,
        Augmentation::RandomCrop { source } => source,
    };
    for chip in chips {
        if chip.label >= net_config.num_classes {
            return Err(Error::InvalidLabel { label: chip.label, classes: net_config.num_classes });
        }
        if chip.pixels.rows < need || chip.pixels.cols < need {
            return Err(Error::InvalidCrop(format!(
                "{}x{} chip {} cannot supply {need}px crops",
                chip.pixels.rows,
                chip.pixels.cols,
                chip.source_path.display()
            )));
        }
    }
    Ok(())
}

/// Trains a freshly built network; see [`train_with`].
pub fn train(
    net_config: &NetworkConfig,
    cfg: &TrainConfig,
    chips: &[Chip],
    class_names: &[String],
) -> Result<(TrainedModel, TrainLog)> {
    train_with(net_config, cfg, chips, class_names, |_| {})
}

/// Shuffled mini-batch SGD: crop, normalize, forward, softmax cross-entropy,
/// backward, update. `on_epoch` sees each epoch's record as it completes.
///
/// Streams: weights from `(seed, "init")`, the epoch-`e` order from
/// `(seed, "shuffle", e)` and its random crops from `(seed, "crop", e)`.
pub fn train_with(
    net_config: &NetworkConfig,
    cfg: &TrainConfig,
    chips: &[Chip],
    class_names: &[String],
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(TrainedModel, TrainLog)> {
    check_inputs(net_config, cfg, chips)?;
    let scale = normalization_scale(chips)?;
    let mut net = Network::<f32>::build(net_config, &mut Rng::derive(cfg.seed, "init"))?;
    net.set_mode(Mode::Training);
    let spec = cfg.crop_spec();
    let centered: Option<Vec<Image>> = match cfg.augmentation {
        Augmentation::None => Some(chips.iter().map(|c| center_crop(&c.pixels, cfg.crop_size)).collect::<Result<_>>()?),
        Augmentation::RandomCrop { .. } => None,
    };
    let mut log = TrainLog::default();
    let start = Instant::now();
    let mut global_batch = 0usize;
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_schedule.lr_at(cfg.lr, epoch);
        let sgd = SgdConfig { lr, momentum: cfg.momentum, weight_decay: cfg.weight_decay };
        let order = Rng::derive_indexed(cfg.seed, "shuffle", epoch as u64).permutation(chips.len());
        let mut crop_rng = Rng::derive_indexed(cfg.seed, "crop", epoch as u64);
        let (mut loss_sum, mut correct) = (0.0f64, 0usize);
        for batch in batches(&order, cfg.batch_size) {
            let patches: Vec<Image> = match &centered {
                Some(c) => batch.iter().map(|&i| c[i].clone()).collect(),
                None => batch.iter().map(|&i| random_crop_aug(&chips[i].pixels, &spec, &mut crop_rng)).collect::<Result<_>>()?,
            };
            let labels: Vec<usize> = batch.iter().map(|&i| chips[i].label).collect();
            let x = stack_patches(&patches, scale)?;
            net.zero_grad();
            let logits = net.forward(x)?;
            let (loss, grad) = softmax_cross_entropy(&logits, &labels)?;
            if !loss.is_finite() || !logits.is_finite() {
                return Err(Error::Numerical {
                    batch: global_batch,
                    message: format!("loss {loss} in epoch {} (lr {lr})", epoch + 1),
                });
            }
            correct += argmax_rows(&logits).iter().zip(&labels).filter(|(p, l)| p == l).count();
            loss_sum += f64::from(loss) * batch.len() as f64;
            net.backward(&grad)?;
            sgd_step(net.params_mut(), sgd);
            global_batch += 1;
        }
        let record = EpochRecord {
            epoch: epoch + 1,
            mean_loss: loss_sum / chips.len() as f64,
            train_acc: correct as f64 / chips.len() as f64,
            lr,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        log.records.push(record);
    }
    net.set_mode(Mode::Inference);
    let meta = TrainingMeta {
        seed: cfg.seed,
        epochs: cfg.epochs,
        augmentation: cfg.augmentation,
        crop_size: cfg.crop_size,
        norm_scale: scale,
        class_names: class_names.to_vec(),
    };
    Ok((TrainedModel { network: net, meta }, log))
}

/// Consecutive batches of `batch_size`; a trailing single sample joins the
/// previous batch since batch statistics need more than one value.
fn batches(order: &[usize], batch_size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(batch_size).collect();
    if out.len() > 1 && out[out.len() - 1].len() == 1 {
        let start = (out.len() - 2) * batch_size;
        out.truncate(out.len() - 2);
        out.push(&order[start..]);
    }
    out
}

/// The first `k` chips of every class, in dataset order.
pub fn select_per_class(chips: &[Chip], k: usize) -> Vec<Chip> {
    let mut taken = std::collections::HashMap::<usize, usize>::new();
    chips
        .iter()
        .filter(|c| {
            let n = taken.entry(c.label).or_default();
            *n += 1;
            *n <= k
        })
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverfitReport {
    pub success: bool,
    pub steps: usize,
    pub final_loss: f64,
    pub predictions_match: bool,
}

pub const OVERFIT_TARGET_LOSS: f64 = 0.01;
pub const OVERFIT_MAX_STEPS: usize = 500;
const OVERFIT_SETTLE_PASSES: usize = 64;

/// Full-batch training on a small subset (center crops) until the loss
/// drops below [`OVERFIT_TARGET_LOSS`] or [`OVERFIT_MAX_STEPS`] updates have
/// been made. Failure on a tiny subset points at a gradient bug.
pub fn overfit_sanity(net_config: &NetworkConfig, subset: &[Chip], lr: f64, seed: u64) -> Result<OverfitReport> {
    let cfg = TrainConfig { crop_size: net_config.input_size, epochs: 1, batch_size: subset.len().max(1), lr, seed, ..Default::default() };
    check_inputs(net_config, &cfg, subset)?;
    let scale = normalization_scale(subset)?;
    let patches: Vec<Image> = subset.iter().map(|c| center_crop(&c.pixels, cfg.crop_size)).collect::<Result<_>>()?;
    let labels: Vec<usize> = subset.iter().map(|c| c.label).collect();
    let x = stack_patches(&patches, scale)?;
    let mut net = Network::<f32>::build(net_config, &mut Rng::derive(seed, "init"))?;
    let sgd = SgdConfig { lr, momentum: cfg.momentum, weight_decay: cfg.weight_decay };
    let mut loss = f64::INFINITY;
    let mut steps = 0;
    while steps < OVERFIT_MAX_STEPS {
        net.zero_grad();
        let logits = net.forward(x.clone())?;
        let (l, grad) = softmax_cross_entropy(&logits, &labels)?;
        loss = f64::from(l);
        if !loss.is_finite() {
            return Err(Error::Numerical { batch: steps, message: "overfit probe diverged".into() });
        }
        if loss < OVERFIT_TARGET_LOSS {
            break;
        }
        net.backward(&grad)?;
        sgd_step(net.params_mut(), sgd);
        steps += 1;
    }
    // Settle the running statistics on the final weights before inference.
    for _ in 0..OVERFIT_SETTLE_PASSES {
        net.forward(x.clone())?;
    }
    net.set_mode(Mode::Inference);
    let predictions_match = net.predict(&x)? == labels;
    Ok(OverfitReport { success: loss < OVERFIT_TARGET_LOSS, steps, final_loss: loss, predictions_match })
}
