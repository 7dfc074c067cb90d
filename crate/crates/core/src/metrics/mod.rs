//! Image-quality metrics, rotated IoU, average precision and the center-shift study.

pub mod ap;
pub mod center_shift;
pub mod image;
pub mod iou;

pub use ap::{average_precision, group_ground_truth, ApReport, DetectionRecord, GroundTruthRecord, IouMode};
pub use center_shift::{center_shift_study, CenterShiftRow};
pub use image::{metric_bev, mse, psnr, ssim, PoolOrder, SsimParams};
pub use iou::{bev_intersection_area, bev_iou, bev_overlaps, iou_3d};
