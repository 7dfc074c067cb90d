//! Central finite-difference gradient checks in f64.

use serde::Serialize;

use super::graph::{Graph, Var};
use super::params::ParamStore;
use crate::error::Result;

/// Denominator floor of the relative error, so gradients that are exactly zero compare absolutely.
pub const REL_ERR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub checked: usize,
    /// Coordinates whose +-eps probe crossed a kink of a piecewise-linear op.
    pub skipped: usize,
    pub max_rel_err: f64,
    pub worst_param: Option<String>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Anything exposing its parameter stores, e.g. a single store or a generator/discriminator pair.
pub trait ParamSet {
    fn stores(&self) -> Vec<&ParamStore<f64>>;
    fn stores_mut(&mut self) -> Vec<&mut ParamStore<f64>>;
}

impl ParamSet for ParamStore<f64> {
    fn stores(&self) -> Vec<&ParamStore<f64>> {
        vec![self]
    }

    fn stores_mut(&mut self) -> Vec<&mut ParamStore<f64>> {
        vec![self]
    }
}

fn probe_indices(n: usize, max: usize) -> Vec<usize> {
    if n <= max {
        (0..n).collect()
    } else {
        (0..max).map(|i| i * n / max).collect()
    }
}

/// Compares the reverse-mode gradient of `build`'s scalar output against central differences for
/// up to `max_per_param` evenly spaced coordinates of every parameter in `model`.
pub fn gradcheck<M, F>(model: &mut M, eps: f64, max_per_param: usize, build: F) -> Result<GradcheckReport>
where
    M: ParamSet,
    F: Fn(&mut Graph<f64>, &M) -> Result<Var>,
{
    let mut g = Graph::new();
    let root = build(&mut g, model)?;
    g.backward(root)?;
    let base_sig = g.kink_signature();
    let mut analytic = Vec::new();
    for store in model.stores_mut() {
        store.zero_grad();
        g.accumulate_param_grads(store);
        analytic.push(store.params().iter().map(|p| p.grad.clone()).collect::<Vec<_>>());
    }

    let eval = |model: &M| -> Result<(f64, Vec<bool>)> {
        let mut g = Graph::new();
        let root = build(&mut g, model)?;
        Ok((g.scalar(root), g.kink_signature()))
    };

    let mut report = GradcheckReport {
        checked: 0,
        skipped: 0,
        max_rel_err: 0.0,
        worst_param: None,
    };
    let shapes: Vec<Vec<usize>> = model
        .stores()
        .iter()
        .map(|s| s.params().iter().map(|p| p.value.len()).collect())
        .collect();
    for (si, lens) in shapes.iter().enumerate() {
        for (pi, &len) in lens.iter().enumerate() {
            for i in probe_indices(len, max_per_param) {
                let perturb = |model: &mut M, v: Option<f64>| -> f64 {
                    let mut stores = model.stores_mut();
                    let id = stores[si].ids().nth(pi).expect("parameter index");
                    let slot = &mut stores[si].value_mut(id)[i];
                    let old = *slot;
                    if let Some(v) = v {
                        *slot = v;
                    }
                    old
                };
                let orig = perturb(model, None);
                perturb(model, Some(orig + eps));
                let (fp, sp) = eval(model)?;
                perturb(model, Some(orig - eps));
                let (fm, sm) = eval(model)?;
                perturb(model, Some(orig));
                if sp != base_sig || sm != base_sig {
                    report.skipped += 1;
                    continue;
                }
                let numeric = (fp - fm) / (2.0 * eps);
                let err = relative_error(analytic[si][pi][i], numeric);
                report.checked += 1;
                if err > report.max_rel_err || err.is_nan() {
                    report.max_rel_err = err;
                    report.worst_param = Some(model.stores()[si].params()[pi].name.clone());
                }
            }
        }
    }
    Ok(report)
}
