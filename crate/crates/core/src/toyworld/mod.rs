//! Procedural paired-data world: box scenes, ray-cast LiDAR and a simulated radar tensor.

pub mod dataset;
pub mod lidar;
pub mod radar;
pub mod scene;

pub use dataset::{generate_dataset, simulate_frame, ToyFrame, ToyWorldConfig, MANIFEST_FILE};
pub use lidar::{cast_ray, class_reflectivity, lidar_sample, ray_box, Hit, LidarConfig};
pub use radar::{
    apply_psf, deposit, radar_truth, sample_power, surface_samples, RadarForwardConfig, RcsTable, SurfaceSample,
};
pub use scene::{generate_scene, PointTarget, Scene, SceneSpec, WallSegment};
