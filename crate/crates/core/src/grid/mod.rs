//! Core geometric types, voxelization and radar-grid transforms.

pub mod blur;
pub mod dense;
pub mod polar;
pub mod types;
pub mod voxel;

pub use blur::{gaussian_blur3d, gaussian_blur_separable, gaussian_taps};
pub use dense::{
    bev_mean_pool, frame_reference, log_denormalize, log_normalize, log_normalize_frame, percentile_sparsify,
    sparsify_count, BevMap, DenseGrid3D, ScaleDomain,
};
pub use polar::{fov_mask, polar_to_cartesian, to_polar, AxisBins, PolarGrid3D};
pub use types::{wrap_angle, Box3D, ObjectClass, PointCloud, RoiBounds, BOX_EDGES, CORNER_SIGNS};
pub use voxel::{densify, voxelize, DenseFeatureGrid, SparseVoxelGrid};
