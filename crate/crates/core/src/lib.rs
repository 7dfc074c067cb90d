//! Synthesis of 3D radar power tensors from LiDAR point clouds.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: point clouds, voxel grids, polar/Cartesian radar grids and their transforms
//! - [`formats`]: binary tensor / point-cloud files and JSON-lines records
//! - [`obis`]: object-information supplement (box edge points and Gaussian shell points)
//! - [`gtaug`]: ground-truth object bank and collision-free insertion
//! - [`nn`]: reverse-mode differentiation, dense/sparse 3D convolutions and Adam
//! - [`gan`]: generator, multi-scale discriminator, objectives and the training loop
//! - [`toyworld`]: procedural paired LiDAR/radar data
//! - [`metrics`]: PSNR, SSIM, rotated IoU, average precision, center-shift study
//! - [`config`]: the pipeline-wide JSON configuration
//! - [`pipeline`]: dataset loading, training and held-out evaluation

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod formats;
pub mod gan;
pub mod grid;
pub mod gtaug;
pub mod metrics;
pub mod nn;
pub mod obis;
pub mod pipeline;
pub mod toyworld;

pub use error::{Error, Result};
pub use grid::{Box3D, DenseGrid3D, ObjectClass, PointCloud, RoiBounds, ScaleDomain, SparseVoxelGrid};
