//! Multi-scale 3D discriminator. Scale `k` sees the (condition, radar) pair average-pooled `k`
//! times; each scale is a stack of stride-2 conv + leaky ReLU blocks and a one-channel score conv.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::DiscriminatorConfig;
use super::generator::{add_conv, bind, Binding, ConvIds};
use crate::error::{Error, Result};
use crate::nn::{Graph, ParamStore, Real, Var};

#[derive(Debug, Clone)]
pub struct ScaleOutput {
    /// Block outputs followed by the score map.
    pub taps: Vec<Var>,
}

impl ScaleOutput {
    pub fn score(&self) -> Var {
        *self.taps.last().expect("at least the score tap")
    }
}

#[derive(Debug, Clone)]
pub struct Discriminator<T: Real> {
    cfg: DiscriminatorConfig,
    in_channels: usize,
    pub store: ParamStore<T>,
    scales: Vec<(Vec<ConvIds>, ConvIds)>,
}

impl<T: Real> Discriminator<T> {
    /// `in_channels` counts condition plus radar channels.
    pub fn new(cfg: &DiscriminatorConfig, in_channels: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let mut scales = Vec::new();
        for s in 1..=cfg.scales {
            let mut blocks = Vec::new();
            let mut cin = in_channels;
            for i in 0..cfg.blocks {
                let c = cfg.base_channels << i;
                blocks.push(add_conv(
                    &mut store,
                    &mut rng,
                    &format!("d{s}.b{}", i + 1),
                    cfg.kernel,
                    cin,
                    c,
                )?);
                cin = c;
            }
            let score = add_conv(&mut store, &mut rng, &format!("d{s}.score"), cfg.kernel, cin, 1)?;
            scales.push((blocks, score));
        }
        Ok(Self {
            cfg: cfg.clone(),
            in_channels,
            store,
            scales,
        })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.cfg
    }

    /// Runs every scale on `concat(condition, radar)`.
    pub fn forward(&self, g: &mut Graph<T>, condition: Var, radar: Var, binding: Binding) -> Result<Vec<ScaleOutput>> {
        let x = g
            .concat(condition, radar)
            .map_err(|_| Error::Shape("discriminator condition and radar grids differ in dims".into()))?;
        if g.channels(x) != self.in_channels {
            return Err(Error::Shape(format!(
                "discriminator expects {} channels, got {}",
                self.in_channels,
                g.channels(x)
            )));
        }
        let k = self.cfg.kernel;
        let mut input = x;
        let mut outs = Vec::with_capacity(self.scales.len());
        for (s, (blocks, score)) in self.scales.iter().enumerate() {
            if s > 0 {
                input = g.avg_pool2(input)?;
            }
            let mut taps = Vec::with_capacity(blocks.len() + 1);
            let mut h = input;
            for ids in blocks {
                let (w, b) = bind(g, &self.store, *ids, binding);
                h = g.conv3d(h, w, Some(b), k, 2, k / 2)?;
                h = g.leaky_relu(h, self.cfg.leaky_slope);
                taps.push(h);
            }
            let (w, b) = bind(g, &self.store, *score, binding);
            taps.push(g.conv3d(h, w, Some(b), k, 1, k / 2)?);
            outs.push(ScaleOutput { taps });
        }
        Ok(outs)
    }
}
