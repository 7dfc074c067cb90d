//! Active-site layouts and convolution rulebooks.
//!
//! A rulebook lists, for every output site and kernel offset, the input row feeding it (or
//! [`NO_NEIGHBOR`]). Dense convolutions use the same representation with every site active, so one
//! gather kernel serves dense, strided sparse and submanifold convolutions.

use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{Error, Result};

pub const NO_NEIGHBOR: u32 = u32::MAX;

/// Sorted, unique active voxel coordinates inside `dims`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseLayout {
    dims: [usize; 3],
    coords: Vec<[u32; 3]>,
}

impl SparseLayout {
    pub fn new(dims: [usize; 3], coords: Vec<[u32; 3]>) -> Result<Self> {
        for w in coords.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Shape(format!("active set not strictly ascending at {:?}", w[1])));
            }
        }
        if let Some(c) = coords.iter().find(|c| (0..3).any(|a| c[a] as usize >= dims[a])) {
            return Err(Error::Shape(format!("active site {c:?} outside dims {dims:?}")));
        }
        Ok(Self { dims, coords })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn coords(&self) -> &[[u32; 3]] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Linear dense index of active site `i`.
    pub fn linear(&self, i: usize) -> usize {
        let c = self.coords[i];
        (c[0] as usize * self.dims[1] + c[1] as usize) * self.dims[2] + c[2] as usize
    }

    fn lookup(&self) -> FxHashMap<[u32; 3], u32> {
        self.coords.iter().enumerate().map(|(i, c)| (*c, i as u32)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rulebook {
    pub kernel: usize,
    pub n_in: usize,
    pub n_out: usize,
    /// `n_out * kernel^3` input rows, offsets ordered lexicographically by (dx, dy, dz).
    pub nbr: Vec<u32>,
}

impl Rulebook {
    pub fn taps(&self) -> usize {
        self.kernel * self.kernel * self.kernel
    }
}

pub fn kernel_offsets(k: usize) -> Vec<[usize; 3]> {
    let mut v = Vec::with_capacity(k * k * k);
    for a in 0..k {
        for b in 0..k {
            for c in 0..k {
                v.push([a, b, c]);
            }
        }
    }
    v
}

pub fn check_conv(k: usize, stride: usize) -> Result<()> {
    if k.is_multiple_of(2) {
        return Err(Error::Shape(format!("kernel size {k} must be odd")));
    }
    if !(stride == 1 || stride == 2) {
        return Err(Error::Shape(format!("stride {stride} must be 1 or 2")));
    }
    Ok(())
}

/// Output extent of a padded, strided convolution.
pub fn conv_out_dims(dims: [usize; 3], k: usize, stride: usize, pad: usize) -> Result<[usize; 3]> {
    let mut out = [0; 3];
    for a in 0..3 {
        let span = dims[a] + 2 * pad;
        if span < k {
            return Err(Error::Shape(format!(
                "input extent {} too small for kernel {k} with padding {pad}",
                dims[a]
            )));
        }
        out[a] = (span - k) / stride + 1;
    }
    Ok(out)
}

/// Input coordinate read by output coordinate `o` at kernel offset `kk`, if inside the input.
#[inline]
fn source(o: usize, kk: usize, stride: usize, pad: usize, n: usize) -> Option<usize> {
    let s = (o * stride + kk).checked_sub(pad)?;
    (s < n).then_some(s)
}

pub fn dense_rulebook(dims: [usize; 3], k: usize, stride: usize, pad: usize) -> Result<([usize; 3], Rulebook)> {
    check_conv(k, stride)?;
    let out = conv_out_dims(dims, k, stride, pad)?;
    let offsets = kernel_offsets(k);
    let n_out = out[0] * out[1] * out[2];
    let mut nbr = Vec::with_capacity(n_out * offsets.len());
    for ox in 0..out[0] {
        for oy in 0..out[1] {
            for oz in 0..out[2] {
                for kk in &offsets {
                    let src = (
                        source(ox, kk[0], stride, pad, dims[0]),
                        source(oy, kk[1], stride, pad, dims[1]),
                        source(oz, kk[2], stride, pad, dims[2]),
                    );
                    nbr.push(match src {
                        (Some(x), Some(y), Some(z)) => ((x * dims[1] + y) * dims[2] + z) as u32,
                        _ => NO_NEIGHBOR,
                    });
                }
            }
        }
    }
    Ok((
        out,
        Rulebook {
            kernel: k,
            n_in: dims[0] * dims[1] * dims[2],
            n_out,
            nbr,
        },
    ))
}

fn gather_rules(input: &SparseLayout, outputs: &[[u32; 3]], k: usize, stride: usize, pad: usize) -> Rulebook {
    let lookup = input.lookup();
    let offsets = kernel_offsets(k);
    let dims = input.dims;
    let mut nbr = Vec::with_capacity(outputs.len() * offsets.len());
    for o in outputs {
        for kk in &offsets {
            let src = (
                source(o[0] as usize, kk[0], stride, pad, dims[0]),
                source(o[1] as usize, kk[1], stride, pad, dims[1]),
                source(o[2] as usize, kk[2], stride, pad, dims[2]),
            );
            nbr.push(match src {
                (Some(x), Some(y), Some(z)) => *lookup.get(&[x as u32, y as u32, z as u32]).unwrap_or(&NO_NEIGHBOR),
                _ => NO_NEIGHBOR,
            });
        }
    }
    Rulebook {
        kernel: k,
        n_in: input.len(),
        n_out: outputs.len(),
        nbr,
    }
}

/// Sparse convolution: the output is active wherever the receptive field touches an active input.
pub fn sparse_rulebook(input: &SparseLayout, k: usize, stride: usize, pad: usize) -> Result<(SparseLayout, Rulebook)> {
    check_conv(k, stride)?;
    let out_dims = conv_out_dims(input.dims, k, stride, pad)?;
    let mut active = FxHashSet::default();
    for c in &input.coords {
        'offsets: for kk in kernel_offsets(k) {
            let mut o = [0u32; 3];
            for a in 0..3 {
                let num = c[a] as usize + pad;
                if num < kk[a] || !(num - kk[a]).is_multiple_of(stride) {
                    continue 'offsets;
                }
                let v = (num - kk[a]) / stride;
                if v >= out_dims[a] {
                    continue 'offsets;
                }
                o[a] = v as u32;
            }
            active.insert(o);
        }
    }
    let mut coords: Vec<[u32; 3]> = active.into_iter().collect();
    coords.sort_unstable();
    let rules = gather_rules(input, &coords, k, stride, pad);
    Ok((SparseLayout { dims: out_dims, coords }, rules))
}

/// Submanifold convolution: stride 1, same padding, output active set equals the input's.
pub fn submanifold_rulebook(input: &SparseLayout, k: usize) -> Result<Rulebook> {
    check_conv(k, 1)?;
    Ok(gather_rules(input, &input.coords, k, 1, k / 2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_site_footprint() {
        let l = SparseLayout::new([5, 5, 5], vec![[2, 2, 2]]).unwrap();
        let (out, rules) = sparse_rulebook(&l, 3, 1, 1).unwrap();
        assert_eq!(out.len(), 27);
        assert_eq!(rules.nbr.iter().filter(|n| **n != NO_NEIGHBOR).count(), 27);
        let sub = submanifold_rulebook(&l, 3).unwrap();
        assert_eq!(sub.n_out, 1);
    }

    #[test]
    fn strided_output_dims() {
        assert_eq!(conv_out_dims([8, 6, 4], 3, 2, 1).unwrap(), [4, 3, 2]);
        assert_eq!(conv_out_dims([3, 1, 5], 3, 2, 1).unwrap(), [2, 1, 3]);
        assert!(check_conv(2, 1).is_err());
        assert!(check_conv(3, 3).is_err());
    }

    #[test]
    fn layout_rejects_unsorted() {
        assert!(SparseLayout::new([4, 4, 4], vec![[1, 0, 0], [0, 0, 0]]).is_err());
        assert!(SparseLayout::new([4, 4, 4], vec![[0, 0, 0], [0, 0, 0]]).is_err());
        assert!(SparseLayout::new([4, 4, 4], vec![[4, 0, 0]]).is_err());
    }
}
