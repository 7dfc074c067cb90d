//! KITTI-style average precision with greedy IoU matching.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::iou::{bev_iou, iou_3d};
use crate::error::{Error, Result};
use crate::grid::Box3D;

/// Number of equally spaced recall points used for interpolation.
pub const RECALL_POINTS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub frame: String,
    #[serde(flatten)]
    pub bbox: Box3D,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub frame: String,
    #[serde(flatten)]
    pub bbox: Box3D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IouMode {
    Bev,
    #[serde(rename = "3d")]
    ThreeD,
}

impl IouMode {
    pub fn iou(self, a: &Box3D, b: &Box3D) -> f64 {
        match self {
            IouMode::Bev => bev_iou(a, b),
            IouMode::ThreeD => iou_3d(a, b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApReport {
    pub ap: f64,
    pub num_gt: usize,
    pub num_det: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    /// `(recall, precision)` after each ranked detection.
    pub curve: Vec<(f64, f64)>,
}

pub fn group_ground_truth(records: &[GroundTruthRecord]) -> BTreeMap<String, Vec<Box3D>> {
    let mut map: BTreeMap<String, Vec<Box3D>> = BTreeMap::new();
    for r in records {
        map.entry(r.frame.clone()).or_default().push(r.bbox);
    }
    map
}

/// AP at `iou_thresh` with 40-point interpolated precision.
///
/// Detections are ranked by descending score (ties: frame id, then input order) and each is
/// matched to the unmatched ground-truth box of the same frame with the highest IoU.
pub fn average_precision(
    dets: &[DetectionRecord],
    gts: &BTreeMap<String, Vec<Box3D>>,
    iou_thresh: f64,
    mode: IouMode,
) -> Result<ApReport> {
    for (i, d) in dets.iter().enumerate() {
        if !(d.score.is_finite() && (0.0..=1.0).contains(&d.score)) {
            return Err(Error::InvalidInput(format!(
                "detection {i} has score {} outside [0, 1]",
                d.score
            )));
        }
    }
    let num_gt: usize = gts.values().map(Vec::len).sum();
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .total_cmp(&dets[a].score)
            .then_with(|| dets[a].frame.cmp(&dets[b].frame))
            .then_with(|| a.cmp(&b))
    });
    let mut matched: BTreeMap<&str, Vec<bool>> = gts.iter().map(|(k, v)| (k.as_str(), vec![false; v.len()])).collect();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut curve = Vec::with_capacity(dets.len());
    for &i in &order {
        let d = &dets[i];
        let mut best: Option<(usize, f64)> = None;
        if let (Some(boxes), Some(used)) = (gts.get(&d.frame), matched.get(d.frame.as_str())) {
            for (j, g) in boxes.iter().enumerate() {
                if used[j] {
                    continue;
                }
                let iou = mode.iou(&d.bbox, g);
                if iou >= iou_thresh && best.is_none_or(|(_, b)| iou > b) {
                    best = Some((j, iou));
                }
            }
        }
        match best {
            Some((j, _)) => {
                matched.get_mut(d.frame.as_str()).unwrap()[j] = true;
                tp += 1;
            }
            None => fp += 1,
        }
        let recall = if num_gt == 0 { 0.0 } else { tp as f64 / num_gt as f64 };
        curve.push((recall, tp as f64 / (tp + fp) as f64));
    }
    Ok(ApReport {
        ap: interpolated_ap(&curve, num_gt),
        num_gt,
        num_det: dets.len(),
        true_positives: tp,
        false_positives: fp,
        curve,
    })
}

/// Mean over recall levels `k/40, k = 1..=40` of the best precision at recall >= level.
pub fn interpolated_ap(curve: &[(f64, f64)], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for k in 1..=RECALL_POINTS {
        let level = k as f64 / RECALL_POINTS as f64;
        let best = curve
            .iter()
            .filter(|(r, _)| *r >= level - 1e-12)
            .map(|(_, p)| *p)
            .fold(0.0, f64::max);
        total += best;
    }
    total / RECALL_POINTS as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ObjectClass;

    fn bx(x: f64, y: f64) -> Box3D {
        Box3D::new([x, y, 0.0], [4.0, 2.0, 1.5], 0.0, ObjectClass::Sedan).unwrap()
    }

    fn det(frame: &str, b: Box3D, score: f64) -> DetectionRecord {
        DetectionRecord {
            frame: frame.into(),
            bbox: b,
            score,
        }
    }

    #[test]
    fn perfect_and_missed() {
        let gts = BTreeMap::from([("f0".to_string(), vec![bx(10.0, 0.0)])]);
        let r = average_precision(&[det("f0", bx(10.0, 0.0), 0.9)], &gts, 0.3, IouMode::Bev).unwrap();
        assert_eq!(r.ap, 1.0);
        let r = average_precision(&[det("f0", bx(30.0, 0.0), 0.9)], &gts, 0.3, IouMode::Bev).unwrap();
        assert_eq!(r.ap, 0.0);
    }

    #[test]
    fn two_tp_one_fp_hand_table() {
        // ranked: TP (r=.5,p=1), FP (r=.5,p=.5), TP (r=1,p=2/3)
        // levels 1..20 -> 1, levels 21..40 -> 2/3  => (20 + 40/3) / 40 = 5/6
        let gts = BTreeMap::from([("f0".to_string(), vec![bx(10.0, 0.0), bx(20.0, 5.0)])]);
        let dets = [
            det("f0", bx(10.0, 0.0), 0.9),
            det("f0", bx(40.0, 0.0), 0.8),
            det("f0", bx(20.0, 5.0), 0.7),
        ];
        let r = average_precision(&dets, &gts, 0.3, IouMode::Bev).unwrap();
        assert_eq!((r.true_positives, r.false_positives), (2, 1));
        assert!((r.ap - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_score_transform_invariance() {
        let gts = BTreeMap::from([
            ("a".to_string(), vec![bx(10.0, 0.0), bx(20.0, 5.0)]),
            ("b".to_string(), vec![bx(5.0, -3.0)]),
        ]);
        let dets = vec![
            det("a", bx(10.5, 0.0), 0.2),
            det("a", bx(40.0, 0.0), 0.6),
            det("b", bx(5.0, -3.2), 0.5),
            det("a", bx(20.0, 5.0), 0.9),
        ];
        let base = average_precision(&dets, &gts, 0.3, IouMode::ThreeD).unwrap().ap;
        let squashed: Vec<_> = dets.iter().map(|d| det(&d.frame, d.bbox, d.score * d.score)).collect();
        assert_eq!(
            average_precision(&squashed, &gts, 0.3, IouMode::ThreeD).unwrap().ap,
            base
        );
    }

    #[test]
    fn rejects_bad_scores() {
        let gts = BTreeMap::new();
        assert!(average_precision(&[det("x", bx(0.0, 0.0), 1.5)], &gts, 0.3, IouMode::Bev).is_err());
    }
}
