//! Separable Gaussian smoothing over `[X, Y, Z]` (or any row-major 3D) fields.

/// Normalized Gaussian taps truncated at ±3σ; a single unit tap when `sigma` is 0.
pub fn gaussian_taps(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let r = (3.0 * sigma).ceil() as i64;
    let w: Vec<f64> = (-r..=r).map(|i| (-0.5 * (i as f64 / sigma).powi(2)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian blur with zero padding; `sigmas` are per-axis in samples.
pub fn gaussian_blur_separable(values: &[f64], dims: [usize; 3], sigmas: [f64; 3]) -> Vec<f64> {
    let mut cur = values.to_vec();
    let strides = [dims[1] * dims[2], dims[2], 1];
    for axis in 0..3 {
        let taps = gaussian_taps(sigmas[axis]);
        if taps.len() == 1 {
            continue;
        }
        let r = (taps.len() / 2) as isize;
        let stride = strides[axis] as isize;
        let mut next = vec![0.0; cur.len()];
        for (i, v) in cur.iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            // scatter form: skips the (common) zero entries of sparse fields
            let pos = (i / strides[axis] % dims[axis]) as isize;
            for (t, w) in taps.iter().enumerate() {
                let p = pos + t as isize - r;
                if p >= 0 && p < dims[axis] as isize {
                    next[(i as isize + (p - pos) * stride) as usize] += w * v;
                }
            }
        }
        cur = next;
    }
    cur
}

/// Isotropic [`gaussian_blur_separable`].
pub fn gaussian_blur3d(values: &[f64], dims: [usize; 3], sigma: f64) -> Vec<f64> {
    gaussian_blur_separable(values, dims, [sigma; 3])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conserves_interior_mass_and_peaks_at_source() {
        let dims = [15, 15, 15];
        let mut v = vec![0.0; 15 * 15 * 15];
        let c = (7 * 15 + 7) * 15 + 7;
        v[c] = 1.0;
        let b = gaussian_blur_separable(&v, dims, [1.0, 0.7, 1.5]);
        let s: f64 = b.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(b[c] > b[c + 1] && b[c] > b[c + 15] && b[c] > b[c + 225]);
    }

    #[test]
    fn matches_direct_convolution() {
        let dims = [5, 4, 6];
        let v: Vec<f64> = (0..120).map(|i| ((i * 37) % 11) as f64).collect();
        let s = [0.8, 0.5, 1.1];
        let b = gaussian_blur_separable(&v, dims, s);
        let g = |d: i64, sg: f64| (-0.5 * (d as f64 / sg).powi(2)).exp();
        let norm = |sg: f64| {
            let r = (3.0 * sg).ceil() as i64;
            (-r..=r).map(|d| g(d, sg)).sum::<f64>()
        };
        for x in 0..5i64 {
            for y in 0..4i64 {
                for z in 0..6i64 {
                    let mut acc = 0.0;
                    for (i, val) in v.iter().enumerate() {
                        let (a, b2, c) = ((i / 24) as i64, (i / 6 % 4) as i64, (i % 6) as i64);
                        let within = |d: i64, sg: f64| d.abs() <= (3.0 * sg).ceil() as i64;
                        if within(x - a, s[0]) && within(y - b2, s[1]) && within(z - c, s[2]) {
                            acc += val * g(x - a, s[0]) * g(y - b2, s[1]) * g(z - c, s[2])
                                / (norm(s[0]) * norm(s[1]) * norm(s[2]));
                        }
                    }
                    let got = b[((x * 4 + y) * 6 + z) as usize];
                    assert!((got - acc).abs() < 1e-9, "{got} vs {acc}");
                }
            }
        }
    }
}
