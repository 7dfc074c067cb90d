//! Finite-difference checks of every differentiable graph op on small random inputs.

use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::gradcheck::{gradcheck, GradcheckReport};
use super::graph::{Geom, Graph, Var};
use super::params::{ParamId, ParamStore};
use super::sparse::SparseLayout;
use crate::error::Result;

pub const SUITE_EPS: f64 = 1e-4;
/// Probed coordinates per parameter.
pub const SUITE_PROBES: usize = 48;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpCheck {
    pub op: &'static str,
    pub report: GradcheckReport,
}

struct Inputs {
    dims: [usize; 3],
    layout: Rc<SparseLayout>,
    x: ParamId,
    y: ParamId,
    xs: ParamId,
    w: ParamId,
    w_sparse: ParamId,
    b: ParamId,
    mask: Rc<Vec<bool>>,
    proj_seed: u64,
}

const C: usize = 2;
const COUT: usize = 3;

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn inputs(seed: u64) -> Result<(ParamStore<f64>, Inputs)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [0; 3].map(|_| rng.random_range(2..=6usize));
    let n = dims.iter().product::<usize>();
    let mut coords = Vec::new();
    for x in 0..dims[0] as u32 {
        for y in 0..dims[1] as u32 {
            for z in 0..dims[2] as u32 {
                if rng.random_bool(0.3) {
                    coords.push([x, y, z]);
                }
            }
        }
    }
    if coords.is_empty() {
        coords.push([0, 0, 0]);
    }
    let layout = Rc::new(SparseLayout::new(dims, coords)?);
    let mut store = ParamStore::new();
    let x = store.add("x", vec![n * C], rand_vec(&mut rng, n * C))?;
    let y = store.add("y", vec![n * C], rand_vec(&mut rng, n * C))?;
    let xs = store.add("xs", vec![layout.len() * C], rand_vec(&mut rng, layout.len() * C))?;
    let w = store.add("w", vec![27 * C * COUT], rand_vec(&mut rng, 27 * C * COUT))?;
    let w_sparse = store.add("w_sparse", vec![27 * C * COUT], rand_vec(&mut rng, 27 * C * COUT))?;
    let b = store.add("b", vec![COUT], rand_vec(&mut rng, COUT))?;
    let mask = Rc::new((0..n).map(|_| rng.random_bool(0.6)).collect());
    Ok((
        store,
        Inputs {
            dims,
            layout,
            x,
            y,
            xs,
            w,
            w_sparse,
            b,
            mask,
            proj_seed: rng.random(),
        },
    ))
}

/// `sum(v * R)` for a fixed random `R`, turning any tensor into a scalar with generic gradients.
fn project(g: &mut Graph<f64>, v: Var, seed: u64) -> Result<Var> {
    let geom = g.geom(v).clone();
    let n = g.value(v).len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = g.constant(geom, g.channels(v), rand_vec(&mut rng, n))?;
    let m = g.mul(v, r)?;
    Ok(g.sum(m))
}

type Build = fn(&mut Graph<f64>, &ParamStore<f64>, &Inputs) -> Result<Var>;

fn dense_x(g: &mut Graph<f64>, s: &ParamStore<f64>, t: &Inputs) -> Result<Var> {
    g.param_with_geom(s, t.x, Geom::Dense(t.dims), C)
}

fn dense_y(g: &mut Graph<f64>, s: &ParamStore<f64>, t: &Inputs) -> Result<Var> {
    g.param_with_geom(s, t.y, Geom::Dense(t.dims), C)
}

fn sparse_x(g: &mut Graph<f64>, s: &ParamStore<f64>, t: &Inputs) -> Result<Var> {
    g.param_with_geom(s, t.xs, Geom::Sparse(t.layout.clone()), C)
}

fn cases() -> Vec<(&'static str, Build)> {
    vec![
        ("conv3d", |g, s, t| {
            let x = dense_x(g, s, t)?;
            let (w, b) = (g.param(s, t.w), g.param(s, t.b));
            g.conv3d(x, w, Some(b), 3, 1, 1)
        }),
        ("conv3d_stride2", |g, s, t| {
            let x = dense_x(g, s, t)?;
            let w = g.param(s, t.w);
            g.conv3d(x, w, None, 3, 2, 1)
        }),
        ("sparse_conv3d", |g, s, t| {
            let x = sparse_x(g, s, t)?;
            let (w, b) = (g.param(s, t.w_sparse), g.param(s, t.b));
            g.sparse_conv3d(x, w, Some(b), 3, 2)
        }),
        ("submanifold_conv3d", |g, s, t| {
            let x = sparse_x(g, s, t)?;
            let (w, b) = (g.param(s, t.w_sparse), g.param(s, t.b));
            g.submanifold_conv3d(x, w, Some(b), 3)
        }),
        ("leaky_relu", |g, s, t| {
            let x = dense_x(g, s, t)?;
            Ok(g.leaky_relu(x, 0.2))
        }),
        ("sigmoid", |g, s, t| {
            let x = dense_x(g, s, t)?;
            Ok(g.sigmoid(x))
        }),
        ("concat", |g, s, t| {
            let (x, y) = (dense_x(g, s, t)?, dense_y(g, s, t)?);
            g.concat(x, y)
        }),
        ("upsample2", |g, s, t| {
            let x = dense_x(g, s, t)?;
            g.upsample2(x)
        }),
        ("avg_pool2", |g, s, t| {
            let x = dense_x(g, s, t)?;
            g.avg_pool2(x)
        }),
        ("to_dense", |g, s, t| {
            let x = sparse_x(g, s, t)?;
            g.to_dense(x)
        }),
        ("mask", |g, s, t| {
            let x = dense_x(g, s, t)?;
            g.mask(x, t.mask.clone())
        }),
        ("add", |g, s, t| {
            let (x, y) = (dense_x(g, s, t)?, dense_y(g, s, t)?);
            g.add(x, y)
        }),
        ("sub", |g, s, t| {
            let (x, y) = (dense_x(g, s, t)?, dense_y(g, s, t)?);
            g.sub(x, y)
        }),
        ("mul", |g, s, t| {
            let (x, y) = (dense_x(g, s, t)?, dense_y(g, s, t)?);
            g.mul(x, y)
        }),
        ("scale", |g, s, t| {
            let x = dense_x(g, s, t)?;
            Ok(g.scale(x, -1.7))
        }),
        ("add_scalar", |g, s, t| {
            let x = dense_x(g, s, t)?;
            let y = g.add_scalar(x, 0.3);
            g.mul(y, y)
        }),
        ("abs", |g, s, t| {
            let x = dense_x(g, s, t)?;
            Ok(g.abs(x))
        }),
        ("square", |g, s, t| {
            let x = dense_x(g, s, t)?;
            Ok(g.square(x))
        }),
        ("neg_log_sigmoid", |g, s, t| {
            let x = dense_x(g, s, t)?;
            Ok(g.neg_log_sigmoid(x, false))
        }),
        ("neg_log_sigmoid_flip", |g, s, t| {
            let x = dense_x(g, s, t)?;
            Ok(g.neg_log_sigmoid(x, true))
        }),
        ("sum", |g, s, t| {
            let x = dense_x(g, s, t)?;
            let s = g.square(x);
            Ok(g.sum(s))
        }),
        ("mean", |g, s, t| {
            let x = dense_x(g, s, t)?;
            let s = g.square(x);
            Ok(g.mean(s))
        }),
    ]
}

/// Checks each op in isolation on inputs drawn from `seed`.
pub fn op_gradcheck_suite(seed: u64) -> Result<Vec<OpCheck>> {
    let mut out = Vec::new();
    for (op, build) in cases() {
        let (mut store, t) = inputs(seed)?;
        let report = gradcheck(&mut store, SUITE_EPS, SUITE_PROBES, |g, s| {
            let v = build(g, s, &t)?;
            if *g.geom(v) == Geom::scalar() && g.channels(v) == 1 {
                Ok(v)
            } else {
                project(g, v, t.proj_seed)
            }
        })?;
        out.push(OpCheck { op, report });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_op_passes_on_a_few_seeds() {
        for seed in 0..3 {
            for c in op_gradcheck_suite(seed).unwrap() {
                assert!(c.report.checked > 0, "{}: {:?}", c.op, c.report);
                assert!(c.report.max_rel_err < 1e-4, "{}: {:?}", c.op, c.report);
            }
        }
    }
}
