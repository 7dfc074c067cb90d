//! Alternating adversarial training with batch size 1.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{DiscriminatorConfig, GeneratorConfig, LossWeights};
use super::data::Sample;
use super::discriminator::Discriminator;
use super::generator::{Binding, Generator};
use super::losses::{discriminator_loss, feature_matching_loss, generator_adv_loss, l1_loss, total_generator_loss};
use crate::error::{Error, Result};
use crate::grid::bev_mean_pool;
use crate::metrics::{psnr, ssim, SsimParams};
use crate::nn::{AdamConfig, Geom, Graph};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepLosses {
    pub d_loss: f64,
    pub g_adv: f64,
    pub g_fm: f64,
    pub l1: f64,
    pub g_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: usize,
    pub d_loss: f64,
    pub g_adv: f64,
    pub g_fm: f64,
    pub l1: f64,
    pub g_total: f64,
    pub val_psnr: Option<f64>,
    pub val_ssim: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub psnr: f64,
    /// Absent when the BEV maps are smaller than the SSIM window.
    pub ssim: Option<f64>,
    pub count: usize,
}

/// Per-pair BEV PSNR and SSIM between `pred` and `target` grids (both log-normalized).
pub fn bev_scores(pred: &crate::grid::DenseGrid3D, target: &crate::grid::DenseGrid3D) -> Result<(f64, Option<f64>)> {
    let (a, b) = (bev_mean_pool(pred), bev_mean_pool(target));
    let p = psnr(&a, &b, 1.0)?;
    let params = SsimParams::default();
    let s = if a.rows >= params.window && a.cols >= params.window {
        Some(ssim(&a, &b, &params)?)
    } else {
        None
    };
    Ok((p, s))
}

#[derive(Debug, Clone)]
pub struct Trainer {
    pub generator: Generator<f32>,
    pub discriminator: Option<Discriminator<f32>>,
    pub weights: LossWeights,
    pub optimizer: AdamConfig,
}

impl Trainer {
    pub fn new(
        gcfg: &GeneratorConfig,
        dcfg: &DiscriminatorConfig,
        weights: &LossWeights,
        optimizer: &AdamConfig,
        in_channels: usize,
        condition_channels: usize,
        seed: u64,
    ) -> Result<Self> {
        weights.validate()?;
        optimizer.validate()?;
        let generator = Generator::new(gcfg, in_channels, seed)?;
        let discriminator = if weights.uses_discriminator() {
            Some(Discriminator::new(
                dcfg,
                condition_channels + 1,
                seed ^ 0x9e37_79b9_7f4a_7c15,
            )?)
        } else {
            None
        };
        Ok(Self {
            generator,
            discriminator,
            weights: weights.clone(),
            optimizer: *optimizer,
        })
    }

    /// One discriminator update followed by one generator update on `sample`.
    pub fn step(&mut self, sample: &Sample) -> Result<StepLosses> {
        let dims = sample.target_dims;
        let mut gg = Graph::<f32>::new();
        let fake = self.generator.forward(&mut gg, &sample.input, Binding::Trainable)?;
        if *gg.geom(fake) != Geom::Dense(dims) {
            return Err(Error::InvalidInput(format!(
                "generator output {:?} does not match radar grid {dims:?}",
                gg.geom(fake)
            )));
        }
        let real = gg.constant(Geom::Dense(dims), 1, sample.target.clone())?;
        let l1 = l1_loss(&mut gg, fake, real)?;
        let mut out = StepLosses::default();
        let (mut adv, mut fm) = (None, None);
        if let Some(disc) = self.discriminator.as_mut() {
            let cc = sample.condition_channels;
            let mut gd = Graph::<f32>::new();
            let cond = gd.constant(Geom::Dense(dims), cc, sample.condition.clone())?;
            let real_d = gd.constant(Geom::Dense(dims), 1, sample.target.clone())?;
            let fake_d = gd.constant(Geom::Dense(dims), 1, gg.value(fake).to_vec())?;
            let ro = disc.forward(&mut gd, cond, real_d, Binding::Trainable)?;
            let fo = disc.forward(&mut gd, cond, fake_d, Binding::Trainable)?;
            let ld = discriminator_loss(&mut gd, &ro, &fo, self.weights.adversarial)?;
            gd.backward(ld)?;
            disc.store.zero_grad();
            gd.accumulate_param_grads(&mut disc.store);
            disc.store.adam_step(&self.optimizer);
            out.d_loss = gd.scalar(ld) as f64;

            let cond = gg.constant(Geom::Dense(dims), cc, sample.condition.clone())?;
            let fo = disc.forward(&mut gg, cond, fake, Binding::Frozen)?;
            let a = generator_adv_loss(&mut gg, &fo, self.weights.adversarial)?;
            out.g_adv = gg.scalar(a) as f64;
            adv = Some(a);
            if self.weights.lambda_fm > 0.0 {
                let ro = disc.forward(&mut gg, cond, real, Binding::Frozen)?;
                let f = feature_matching_loss(&mut gg, &ro, &fo)?;
                out.g_fm = gg.scalar(f) as f64;
                fm = Some(f);
            }
        }
        let total = total_generator_loss(&mut gg, adv, fm, l1, &self.weights)?;
        gg.backward(total)?;
        self.generator.store.zero_grad();
        gg.accumulate_param_grads(&mut self.generator.store);
        self.generator.store.adam_step(&self.optimizer);
        out.l1 = gg.scalar(l1) as f64;
        out.g_total = gg.scalar(total) as f64;
        Ok(out)
    }

    /// Mean BEV PSNR/SSIM of the generator over `samples`.
    pub fn evaluate(&self, samples: &[Sample]) -> Result<Option<EvalSummary>> {
        evaluate_generator(&self.generator, samples)
    }
}

pub fn evaluate_generator(generator: &Generator<f32>, samples: &[Sample]) -> Result<Option<EvalSummary>> {
    if samples.is_empty() {
        return Ok(None);
    }
    let (mut p, mut s, mut ns) = (0.0, 0.0, 0usize);
    for sample in samples {
        let pred = generator.synthesize(&sample.input)?;
        let target = sample.target_grid(pred.origin, pred.resolution);
        let (ps, ss) = bev_scores(&pred, &target)?;
        p += ps;
        if let Some(ss) = ss {
            s += ss;
            ns += 1;
        }
    }
    Ok(Some(EvalSummary {
        psnr: p / samples.len() as f64,
        ssim: (ns == samples.len()).then(|| s / ns as f64),
        count: samples.len(),
    }))
}

/// Trains for `epochs` passes over `train_set` in a seeded shuffle order, calling `on_epoch` after
/// each pass with its record.
pub fn train(
    trainer: &mut Trainer,
    train_set: &[Sample],
    val_set: &[Sample],
    epochs: usize,
    seed: u64,
    mut on_epoch: impl FnMut(&EpochRecord, &Trainer) -> Result<()>,
) -> Result<Vec<EpochRecord>> {
    if train_set.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut records = Vec::with_capacity(epochs);
    for epoch in 1..=epochs {
        order.shuffle(&mut rng);
        let mut sum = StepLosses::default();
        for &i in &order {
            let l = trainer.step(&train_set[i])?;
            sum.d_loss += l.d_loss;
            sum.g_adv += l.g_adv;
            sum.g_fm += l.g_fm;
            sum.l1 += l.l1;
            sum.g_total += l.g_total;
        }
        let n = order.len() as f64;
        let val = trainer.evaluate(val_set)?;
        let rec = EpochRecord {
            epoch,
            steps: order.len(),
            d_loss: sum.d_loss / n,
            g_adv: sum.g_adv / n,
            g_fm: sum.g_fm / n,
            l1: sum.l1 / n,
            g_total: sum.g_total / n,
            val_psnr: val.map(|v| v.psnr),
            val_ssim: val.and_then(|v| v.ssim),
        };
        on_epoch(&rec, trainer)?;
        records.push(rec);
    }
    Ok(records)
}
