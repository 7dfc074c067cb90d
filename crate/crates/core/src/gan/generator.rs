//! Sparse-encoder / dense-decoder generator.
//!
//! Encoder stage `s` = stride-2 sparse conv + leaky ReLU, then submanifold conv + leaky ReLU, with
//! `base * 2^(s-1)` channels. The last encoder map is scattered to a dense bottleneck. Decoder stage
//! `j` upsamples (nearest x2 + conv), concatenates the densified encoder map of the same resolution
//! (stage `E - j`; stage 0 is the raw input) and fuses with a dense conv. A 1x1x1 conv and a sigmoid
//! produce log-normalized power in [0, 1].

use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{DecoderKind, GeneratorConfig};
use super::data::GeneratorInput;
use crate::error::{Error, Result};
use crate::grid::{DenseGrid3D, ScaleDomain};
use crate::nn::{Geom, Graph, ParamId, ParamStore, Real, Var};

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvIds {
    pub w: ParamId,
    pub b: ParamId,
}

/// Adds a conv layer with weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)) and zero bias.
pub(crate) fn add_conv<T: Real>(
    store: &mut ParamStore<T>,
    rng: &mut ChaCha8Rng,
    name: &str,
    k: usize,
    cin: usize,
    cout: usize,
) -> Result<ConvIds> {
    let taps = k * k * k;
    let bound = 1.0 / ((taps * cin) as f64).sqrt();
    let w = store.add_uniform(format!("{name}.w"), vec![taps, cin, cout], bound, rng)?;
    let b = store.add(format!("{name}.b"), vec![cout], vec![T::ZERO; cout])?;
    Ok(ConvIds { w, b })
}

/// How a network's parameters enter a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binding {
    Trainable,
    Frozen,
}

pub(crate) fn bind<T: Real>(g: &mut Graph<T>, store: &ParamStore<T>, ids: ConvIds, binding: Binding) -> (Var, Var) {
    match binding {
        Binding::Trainable => (g.param(store, ids.w), g.param(store, ids.b)),
        Binding::Frozen => (g.param_frozen(store, ids.w), g.param_frozen(store, ids.b)),
    }
}

#[derive(Debug, Clone)]
struct DecoderStage {
    up: ConvIds,
    fuse: ConvIds,
}

#[derive(Debug, Clone)]
pub struct Generator<T: Real> {
    cfg: GeneratorConfig,
    in_channels: usize,
    pub store: ParamStore<T>,
    encoder: Vec<(ConvIds, ConvIds)>,
    decoder: Vec<DecoderStage>,
    head: ConvIds,
}

impl<T: Real> Generator<T> {
    pub fn new(cfg: &GeneratorConfig, in_channels: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if in_channels == 0 {
            return Err(Error::Config("generator needs at least one input channel".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let k = cfg.kernel;
        let stage_ch = |s: usize| if s == 0 { in_channels } else { cfg.stage_channels(s) };
        let mut encoder = Vec::new();
        for s in 1..=cfg.encoder_stages {
            let c = cfg.stage_channels(s);
            let down = add_conv(&mut store, &mut rng, &format!("enc{s}.down"), k, stage_ch(s - 1), c)?;
            let sub = add_conv(&mut store, &mut rng, &format!("enc{s}.sub"), k, c, c)?;
            encoder.push((down, sub));
        }
        let mut decoder = Vec::new();
        let mut cur = cfg.stage_channels(cfg.encoder_stages);
        for j in 1..=cfg.decoder_stages {
            let skip = cfg.encoder_stages - j;
            let c = cfg.stage_channels(skip);
            let up = add_conv(&mut store, &mut rng, &format!("dec{j}.up"), k, cur, c)?;
            let fuse = add_conv(&mut store, &mut rng, &format!("dec{j}.fuse"), k, c + stage_ch(skip), c)?;
            decoder.push(DecoderStage { up, fuse });
            cur = c;
        }
        let head = add_conv(&mut store, &mut rng, "head", 1, cur, 1)?;
        Ok(Self {
            cfg: cfg.clone(),
            in_channels,
            store,
            encoder,
            decoder,
            head,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.cfg
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    /// Radar-grid dims produced for an input grid of `dims`.
    pub fn output_dims(&self, dims: [usize; 3]) -> Result<[usize; 3]> {
        let e = 1usize << self.cfg.encoder_stages;
        if dims.iter().any(|d| d % e != 0 || *d == 0) {
            return Err(Error::InvalidInput(format!(
                "input grid {dims:?} must be divisible by 2^{} along every axis",
                self.cfg.encoder_stages
            )));
        }
        Ok(dims.map(|d| d / self.cfg.scale_factor()))
    }

    fn check_input(&self, input: &GeneratorInput) -> Result<()> {
        if input.channels != self.in_channels {
            return Err(Error::InvalidInput(format!(
                "generator expects {} input channels, got {}",
                self.in_channels, input.channels
            )));
        }
        if (input.resolution - self.cfg.r_in).abs() > 1e-9 * self.cfg.r_in {
            return Err(Error::InvalidInput(format!(
                "input resolution {} does not match generator r_in {}",
                input.resolution, self.cfg.r_in
            )));
        }
        self.output_dims(input.dims()).map(|_| ())
    }

    /// Appends the generator to `g` and returns its dense single-channel output.
    pub fn forward(&self, g: &mut Graph<T>, input: &GeneratorInput, binding: Binding) -> Result<Var> {
        self.check_input(input)?;
        let k = self.cfg.kernel;
        let slope = self.cfg.leaky_slope;
        let feats = input.features.iter().map(|v| T::from_f64(*v as f64)).collect();
        let x0 = g.constant(Geom::Sparse(input.layout.clone()), input.channels, feats)?;
        let mut skips = vec![x0];
        let mut h = x0;
        for (down, sub) in &self.encoder {
            let (w, b) = bind(g, &self.store, *down, binding);
            h = g.sparse_conv3d(h, w, Some(b), k, 2)?;
            h = g.leaky_relu(h, slope);
            let (w, b) = bind(g, &self.store, *sub, binding);
            h = g.submanifold_conv3d(h, w, Some(b), k)?;
            h = g.leaky_relu(h, slope);
            skips.push(h);
        }
        let mut h = g.to_dense(h)?;
        let mut mask = None;
        for (j, stage) in self.decoder.iter().enumerate() {
            let skip = skips[self.cfg.encoder_stages - j - 1];
            let skip_dense = g.to_dense(skip)?;
            if self.cfg.decoder == DecoderKind::Sparse {
                mask = Some(active_mask(g.geom(skip)));
            }
            let masked = |g: &mut Graph<T>, v: Var, m: &Option<Rc<Vec<bool>>>| match m {
                Some(m) => g.mask(v, m.clone()),
                None => Ok(v),
            };
            h = g.upsample2(h)?;
            h = masked(g, h, &mask)?;
            let (w, b) = bind(g, &self.store, stage.up, binding);
            h = g.conv3d(h, w, Some(b), k, 1, k / 2)?;
            h = masked(g, h, &mask)?;
            h = g.leaky_relu(h, slope);
            h = g.concat(h, skip_dense)?;
            let (w, b) = bind(g, &self.store, stage.fuse, binding);
            h = g.conv3d(h, w, Some(b), k, 1, k / 2)?;
            h = masked(g, h, &mask)?;
            h = g.leaky_relu(h, slope);
        }
        let (w, b) = bind(g, &self.store, self.head, binding);
        let h = g.conv3d(h, w, Some(b), 1, 1, 0)?;
        let out = g.sigmoid(h);
        match mask {
            Some(m) => g.mask(out, m),
            None => Ok(out),
        }
    }

    /// Inference: log-normalized radar grid for `input`.
    pub fn synthesize(&self, input: &GeneratorInput) -> Result<DenseGrid3D> {
        let mut g = Graph::new();
        let out = self.forward(&mut g, input, Binding::Frozen)?;
        let Geom::Dense(dims) = *g.geom(out) else {
            unreachable!("generator output is dense")
        };
        let mut grid = DenseGrid3D::zeros(input.origin, self.cfg.r_out, dims, ScaleDomain::LogNormalized);
        for (d, v) in grid.values.iter_mut().zip(g.value(out)) {
            *d = v.to_f64();
        }
        Ok(grid)
    }
}

/// Site mask of a sparse map's active set over its dense grid.
fn active_mask(geom: &Geom) -> Rc<Vec<bool>> {
    match geom {
        Geom::Sparse(layout) => {
            let d = layout.dims();
            let mut m = vec![false; d[0] * d[1] * d[2]];
            for i in 0..layout.len() {
                m[layout.linear(i)] = true;
            }
            Rc::new(m)
        }
        Geom::Dense(d) => Rc::new(vec![true; d[0] * d[1] * d[2]]),
    }
}
