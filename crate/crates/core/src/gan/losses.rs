//! Adversarial, feature-matching and L1 objectives as graph expressions.

use super::config::{AdversarialForm, LossWeights};
use super::discriminator::ScaleOutput;
use crate::error::{Error, Result};
use crate::nn::{Graph, Real, Var};

/// Discriminator objective, summed over scales; each scale term averages over its score map.
pub fn discriminator_loss<T: Real>(
    g: &mut Graph<T>,
    real: &[ScaleOutput],
    fake: &[ScaleOutput],
    form: AdversarialForm,
) -> Result<Var> {
    let mut terms = Vec::with_capacity(real.len());
    for (r, f) in real.iter().zip(fake) {
        let (r, f) = (r.score(), f.score());
        let t = match form {
            AdversarialForm::LogForm => {
                let lr = g.neg_log_sigmoid(r, false);
                let lr = g.mean(lr);
                let lf = g.neg_log_sigmoid(f, true);
                let lf = g.mean(lf);
                g.add(lr, lf)?
            }
            AdversarialForm::LeastSquares => {
                let dr = g.add_scalar(r, -1.0);
                let dr = g.square(dr);
                let dr = g.mean(dr);
                let df = g.square(f);
                let df = g.mean(df);
                g.add(dr, df)?
            }
        };
        terms.push(t);
    }
    sum_terms(g, &terms)
}

/// Non-saturating generator objective, summed over scales.
pub fn generator_adv_loss<T: Real>(g: &mut Graph<T>, fake: &[ScaleOutput], form: AdversarialForm) -> Result<Var> {
    let mut terms = Vec::with_capacity(fake.len());
    for f in fake {
        let t = match form {
            AdversarialForm::LogForm => g.neg_log_sigmoid(f.score(), false),
            AdversarialForm::LeastSquares => {
                let d = g.add_scalar(f.score(), -1.0);
                g.square(d)
            }
        };
        terms.push(g.mean(t));
    }
    sum_terms(g, &terms)
}

/// Sum over scales and taps of the mean absolute difference between real and fake features.
pub fn feature_matching_loss<T: Real>(g: &mut Graph<T>, real: &[ScaleOutput], fake: &[ScaleOutput]) -> Result<Var> {
    if real.len() != fake.len() || real.iter().zip(fake).any(|(r, f)| r.taps.len() != f.taps.len()) {
        return Err(Error::Shape(
            "feature-matching taps differ between real and fake".into(),
        ));
    }
    let mut terms = Vec::new();
    for (r, f) in real.iter().zip(fake) {
        for (&rt, &ft) in r.taps.iter().zip(&f.taps) {
            terms.push(l1_loss(g, ft, rt)?);
        }
    }
    sum_terms(g, &terms)
}

/// Mean absolute voxel difference.
pub fn l1_loss<T: Real>(g: &mut Graph<T>, fake: Var, real: Var) -> Result<Var> {
    let d = g.sub(fake, real)?;
    let d = g.abs(d);
    Ok(g.mean(d))
}

pub fn sum_terms<T: Real>(g: &mut Graph<T>, terms: &[Var]) -> Result<Var> {
    let mut acc = match terms.first() {
        Some(t) => *t,
        None => return Ok(g.scalar_constant(T::ZERO)),
    };
    for t in &terms[1..] {
        acc = g.add(acc, *t)?;
    }
    Ok(acc)
}

/// Weighted generator objective: `lambda_gan * adv + lambda_fm * fm + lambda_l1 * l1`; absent
/// terms count as zero.
pub fn total_generator_loss<T: Real>(
    g: &mut Graph<T>,
    adv: Option<Var>,
    fm: Option<Var>,
    l1: Var,
    w: &LossWeights,
) -> Result<Var> {
    let mut terms = vec![g.scale(l1, w.lambda_l1)];
    if let Some(a) = adv {
        terms.push(g.scale(a, w.lambda_gan));
    }
    if let Some(f) = fm {
        terms.push(g.scale(f, w.lambda_fm));
    }
    sum_terms(g, &terms)
}
