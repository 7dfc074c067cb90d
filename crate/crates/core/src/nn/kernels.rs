//! Gather-based convolution kernels over a [`Rulebook`]. Features are row-major `[sites, channels]`,
//! weights `[taps, c_in, c_out]`. Loop order is fixed, so results are bitwise reproducible.

use super::real::Real;
use super::sparse::{Rulebook, NO_NEIGHBOR};

pub fn conv_forward<T: Real>(
    x: &[T],
    cin: usize,
    w: &[T],
    bias: Option<&[T]>,
    cout: usize,
    rules: &Rulebook,
) -> Vec<T> {
    let taps = rules.taps();
    let mut out = vec![T::ZERO; rules.n_out * cout];
    for (o, acc) in out.chunks_exact_mut(cout).enumerate() {
        if let Some(b) = bias {
            acc.copy_from_slice(b);
        }
        for (k, &i) in rules.nbr[o * taps..(o + 1) * taps].iter().enumerate() {
            if i == NO_NEIGHBOR {
                continue;
            }
            let xi = &x[i as usize * cin..(i as usize + 1) * cin];
            let wk = &w[k * cin * cout..(k + 1) * cin * cout];
            for (ci, &xv) in xi.iter().enumerate() {
                if xv == T::ZERO {
                    continue;
                }
                let row = &wk[ci * cout..(ci + 1) * cout];
                for (a, &wv) in acc.iter_mut().zip(row) {
                    *a += xv * wv;
                }
            }
        }
    }
    out
}

/// Accumulates `dL/dx` into `dx`.
pub fn conv_backward_input<T: Real>(dy: &[T], w: &[T], cin: usize, cout: usize, rules: &Rulebook, dx: &mut [T]) {
    let taps = rules.taps();
    for (o, g) in dy.chunks_exact(cout).enumerate() {
        if g.iter().all(|v| *v == T::ZERO) {
            continue;
        }
        for (k, &i) in rules.nbr[o * taps..(o + 1) * taps].iter().enumerate() {
            if i == NO_NEIGHBOR {
                continue;
            }
            let wk = &w[k * cin * cout..(k + 1) * cin * cout];
            let dxi = &mut dx[i as usize * cin..(i as usize + 1) * cin];
            for (ci, d) in dxi.iter_mut().enumerate() {
                let row = &wk[ci * cout..(ci + 1) * cout];
                let mut s = T::ZERO;
                for (&wv, &gv) in row.iter().zip(g) {
                    s += wv * gv;
                }
                *d += s;
            }
        }
    }
}

/// Accumulates `dL/dw` into `dw`.
pub fn conv_backward_weight<T: Real>(dy: &[T], x: &[T], cin: usize, cout: usize, rules: &Rulebook, dw: &mut [T]) {
    let taps = rules.taps();
    for (o, g) in dy.chunks_exact(cout).enumerate() {
        if g.iter().all(|v| *v == T::ZERO) {
            continue;
        }
        for (k, &i) in rules.nbr[o * taps..(o + 1) * taps].iter().enumerate() {
            if i == NO_NEIGHBOR {
                continue;
            }
            let xi = &x[i as usize * cin..(i as usize + 1) * cin];
            let dwk = &mut dw[k * cin * cout..(k + 1) * cin * cout];
            for (ci, &xv) in xi.iter().enumerate() {
                if xv == T::ZERO {
                    continue;
                }
                let row = &mut dwk[ci * cout..(ci + 1) * cout];
                for (d, &gv) in row.iter_mut().zip(g) {
                    *d += xv * gv;
                }
            }
        }
    }
}

pub fn conv_backward_bias<T: Real>(dy: &[T], cout: usize, db: &mut [T]) {
    for g in dy.chunks_exact(cout) {
        for (d, &gv) in db.iter_mut().zip(g) {
            *d += gv;
        }
    }
}
