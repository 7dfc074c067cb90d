//! Named trainable parameters, Adam, and the `CKP1` checkpoint format.
//!
//! Checkpoint layout (little-endian):
//!
//! ```text
//! magic "CKP1" | u32 version | u64 adam step | u32 n_params
//! per parameter: u32 name_len | name (UTF-8) | u32 ndim | u64 dims[ndim]
//!                | f32 values[n] | f32 adam_m[n] | f32 adam_v[n]
//! ```

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::real::Real;
use crate::error::{Error, Result};
use crate::formats::{read_file, write_file, ByteReader};

pub const CKP_MAGIC: &[u8; 4] = b"CKP1";
pub const CKP_VERSION: u32 = 1;

/// Parameter handle: the owning store's id plus the index inside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId {
    store: u64,
    index: usize,
}

static NEXT_STORE: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<T>,
    pub grad: Vec<T>,
    pub m: Vec<T>,
    pub v: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    uid: u64,
    params: Vec<Param<T>>,
    step: u64,
}

impl<T: Real> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr >= 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if !ok {
            return Err(Error::Config(format!("invalid optimizer settings {self:?}")));
        }
        Ok(())
    }
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            uid: NEXT_STORE.fetch_add(1, Ordering::Relaxed),
            params: Vec::new(),
            step: 0,
        }
    }

    pub fn add(&mut self, name: impl Into<String>, shape: Vec<usize>, value: Vec<T>) -> Result<ParamId> {
        let name = name.into();
        let n: usize = shape.iter().product();
        if n != value.len() {
            return Err(Error::Shape(format!(
                "parameter {name}: shape {shape:?} needs {n} values, got {}",
                value.len()
            )));
        }
        if self.params.iter().any(|p| p.name == name) {
            return Err(Error::Parameter(format!("duplicate parameter name {name}")));
        }
        self.params.push(Param {
            name,
            shape,
            grad: vec![T::ZERO; n],
            m: vec![T::ZERO; n],
            v: vec![T::ZERO; n],
            value,
        });
        Ok(self.id_at(self.params.len() - 1))
    }

    /// Adds a parameter drawn from U(-bound, bound).
    pub fn add_uniform(
        &mut self,
        name: impl Into<String>,
        shape: Vec<usize>,
        bound: f64,
        rng: &mut impl Rng,
    ) -> Result<ParamId> {
        let n: usize = shape.iter().product();
        let value = (0..n)
            .map(|_| {
                T::from_f64(if bound > 0.0 {
                    rng.random_range(-bound..bound)
                } else {
                    0.0
                })
            })
            .collect();
        self.add(name, shape, value)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    fn id_at(&self, index: usize) -> ParamId {
        ParamId { store: self.uid, index }
    }

    fn slot(&self, id: ParamId) -> usize {
        assert_eq!(id.store, self.uid, "parameter id belongs to another store");
        id.index
    }

    /// Whether `id` was issued by this store (or a clone of it).
    pub fn owns(&self, id: ParamId) -> bool {
        id.store == self.uid
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.params.len()).map(|i| self.id_at(i))
    }

    pub fn param(&self, id: ParamId) -> &Param<T> {
        &self.params[self.slot(id)]
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn value(&self, id: ParamId) -> &[T] {
        &self.params[self.slot(id)].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [T] {
        let slot = self.slot(id);
        &mut self.params[slot].value
    }

    pub fn grad(&self, id: ParamId) -> &[T] {
        &self.params[self.slot(id)].grad
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(|i| self.id_at(i))
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub(crate) fn add_grad(&mut self, id: ParamId, g: &[T]) {
        let slot = self.slot(id);
        for (a, &b) in self.params[slot].grad.iter_mut().zip(g) {
            *a += b;
        }
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(T::ZERO);
        }
    }

    /// One bias-corrected Adam update using the accumulated gradients.
    pub fn adam_step(&mut self, cfg: &AdamConfig) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for p in &mut self.params {
            for i in 0..p.value.len() {
                let g = p.grad[i].to_f64();
                let m = cfg.beta1 * p.m[i].to_f64() + (1.0 - cfg.beta1) * g;
                let v = cfg.beta2 * p.v[i].to_f64() + (1.0 - cfg.beta2) * g * g;
                p.m[i] = T::from_f64(m);
                p.v[i] = T::from_f64(v);
                let update = cfg.lr * (m / c1) / ((v / c2).sqrt() + cfg.eps);
                p.value[i] = T::from_f64(p.value[i].to_f64() - update);
            }
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CKP_MAGIC);
        out.extend_from_slice(&CKP_VERSION.to_le_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
            out.extend_from_slice(p.name.as_bytes());
            out.extend_from_slice(&(p.shape.len() as u32).to_le_bytes());
            for d in &p.shape {
                out.extend_from_slice(&(*d as u64).to_le_bytes());
            }
            for block in [&p.value, &p.m, &p.v] {
                for x in block {
                    out.extend_from_slice(&(x.to_f64() as f32).to_le_bytes());
                }
            }
        }
        out
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = ByteReader::new(bytes, path);
        if r.take(4, "magic")? != CKP_MAGIC {
            return Err(r.error(0, "bad magic, expected CKP1"));
        }
        let at = r.pos();
        let version = r.u32("version")?;
        if version != CKP_VERSION {
            return Err(r.error(at, format!("unsupported checkpoint version {version}")));
        }
        let step = r.u64("step")?;
        let n = r.u32("parameter count")? as usize;
        let mut store = Self::new();
        for _ in 0..n {
            let at = r.pos();
            let len = r.u32("name length")? as usize;
            let name = std::str::from_utf8(r.take(len, "name")?)
                .map_err(|_| r.error(at + 4, "parameter name is not UTF-8"))?
                .to_string();
            let ndim = r.u32("rank")? as usize;
            let mut shape = Vec::with_capacity(ndim.min(8));
            for _ in 0..ndim {
                shape.push(r.u64("dim")? as usize);
            }
            let count = shape
                .iter()
                .try_fold(1usize, |a, d| a.checked_mul(*d))
                .filter(|c| c.checked_mul(12).is_some_and(|b| b <= bytes.len()))
                .ok_or_else(|| r.error(r.pos(), format!("shape {shape:?} larger than the file")))?;
            let mut blocks: [Vec<T>; 3] = Default::default();
            for (block, what) in blocks.iter_mut().zip(["values", "adam m", "adam v"]) {
                block.reserve(count);
                for _ in 0..count {
                    block.push(T::from_f64(r.f32(what)? as f64));
                }
            }
            let [value, m, v] = blocks;
            let id = store.add(name, shape, value).map_err(|e| r.error(at, e.to_string()))?;
            let slot = store.slot(id);
            store.params[slot].m = m;
            store.params[slot].v = v;
        }
        r.finish()?;
        store.step = step;
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.encode())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&read_file(path)?, path)
    }

    /// Copies values and optimizer state from `other`, matching parameters by name and shape.
    pub fn load_from(&mut self, other: &ParamStore<T>) -> Result<()> {
        for p in &mut self.params {
            let src = other
                .params
                .iter()
                .find(|q| q.name == p.name)
                .ok_or_else(|| Error::Parameter(format!("checkpoint lacks parameter {}", p.name)))?;
            if src.shape != p.shape {
                return Err(Error::Parameter(format!(
                    "parameter {}: checkpoint shape {:?}, model shape {:?}",
                    p.name, src.shape, p.shape
                )));
            }
            p.value.clone_from(&src.value);
            p.m.clone_from(&src.m);
            p.v.clone_from(&src.v);
        }
        self.step = other.step;
        Ok(())
    }
}
