//! Joint generator + discriminator objective in f64 for finite-difference checking.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{AdversarialForm, DecoderKind, DiscriminatorConfig, GeneratorConfig, LossWeights};
use super::data::Sample;
use super::discriminator::Discriminator;
use super::generator::{Binding, Generator};
use super::losses::{discriminator_loss, feature_matching_loss, generator_adv_loss, l1_loss, total_generator_loss};
use crate::error::Result;
use crate::grid::voxel::{INTENSITY_CHANNEL, OCCUPANCY_CHANNEL};
use crate::grid::{DenseGrid3D, ScaleDomain, SparseVoxelGrid};
use crate::nn::{gradcheck, Geom, GradcheckReport, Graph, ParamSet, ParamStore, Var, SUITE_EPS};

#[derive(Debug, Clone)]
pub struct GanModels {
    pub generator: Generator<f64>,
    pub discriminator: Discriminator<f64>,
}

impl ParamSet for GanModels {
    fn stores(&self) -> Vec<&ParamStore<f64>> {
        vec![&self.generator.store, &self.discriminator.store]
    }

    fn stores_mut(&mut self) -> Vec<&mut ParamStore<f64>> {
        vec![&mut self.generator.store, &mut self.discriminator.store]
    }
}

/// Generator objective plus discriminator objective on one sample, with every parameter trainable.
pub fn joint_objective(g: &mut Graph<f64>, m: &GanModels, sample: &Sample, w: &LossWeights) -> Result<Var> {
    let dims = Geom::Dense(sample.target_dims);
    let fake = m.generator.forward(g, &sample.input, Binding::Trainable)?;
    let real = g.constant(dims.clone(), 1, sample.target.iter().map(|v| *v as f64).collect())?;
    let cond = g.constant(
        dims,
        sample.condition_channels,
        sample.condition.iter().map(|v| *v as f64).collect(),
    )?;
    let ro = m.discriminator.forward(g, cond, real, Binding::Trainable)?;
    let fo = m.discriminator.forward(g, cond, fake, Binding::Trainable)?;
    let d = discriminator_loss(g, &ro, &fo, w.adversarial)?;
    let adv = generator_adv_loss(g, &fo, w.adversarial)?;
    let fm = feature_matching_loss(g, &ro, &fo)?;
    let l1 = l1_loss(g, fake, real)?;
    let total = total_generator_loss(g, Some(adv), Some(fm), l1, w)?;
    g.add(total, d)
}

/// Probed coordinates per parameter in [`model_gradcheck`].
pub const MODEL_PROBES: usize = 6;

/// Random 6³ (or 4³) pair and small generator/discriminator for a joint finite-difference check. Even
/// seeds use a one-stage dense-decoder generator with the log-form objective, odd seeds a
/// two-stage sparse-decoder generator with the least-squares objective on a 4³ grid.
pub fn model_gradcheck(seed: u64) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let even = seed.is_multiple_of(2);
    let (stages, r_in, r_out) = if even { (1, 0.2, 0.2) } else { (2, 0.2, 0.4) };
    let gcfg = GeneratorConfig {
        encoder_stages: stages,
        decoder_stages: 1,
        base_channels: 2,
        r_in,
        r_out,
        decoder: if even { DecoderKind::Dense } else { DecoderKind::Sparse },
        ..Default::default()
    };
    let dcfg = DiscriminatorConfig {
        base_channels: 2,
        ..Default::default()
    };
    let n = if even { 6 } else { 4 };
    let dims = [n; 3];
    let mut cells = Vec::new();
    for x in 0..n as u32 {
        for y in 0..n as u32 {
            for z in 0..n as u32 {
                if rng.random_bool(if even { 0.3 } else { 0.5 }) {
                    cells.push(([x, y, z], vec![1.0, rng.random_range(0.0..1.0)]));
                }
            }
        }
    }
    let svg = SparseVoxelGrid::from_cells(
        [0.0; 3],
        r_in,
        dims,
        vec![OCCUPANCY_CHANNEL.into(), INTENSITY_CHANNEL.into()],
        cells,
    )?;
    let factor = (r_out / r_in).round() as usize;
    let mut target = DenseGrid3D::zeros([0.0; 3], r_out, dims.map(|d| d / factor), ScaleDomain::LogNormalized);
    target.values.iter_mut().for_each(|v| *v = rng.random_range(0.0..1.0));
    let sample = Sample::new("gradcheck", &svg, &target)?;
    let mut models = GanModels {
        generator: Generator::new(&gcfg, 2, rng.random())?,
        discriminator: Discriminator::new(&dcfg, sample.condition_channels + 1, rng.random())?,
    };
    let w = LossWeights {
        adversarial: if even {
            AdversarialForm::LogForm
        } else {
            AdversarialForm::LeastSquares
        },
        ..Default::default()
    };
    gradcheck(&mut models, SUITE_EPS, MODEL_PROBES, |g, m| {
        joint_objective(g, m, &sample, &w)
    })
}
