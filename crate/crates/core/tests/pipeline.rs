//! Cross-module integration: config documents, toy-world datasets and seeded training.

use std::collections::BTreeMap;
use std::path::Path;

use radsynth_core::config::{PipelineConfig, Preset};
use radsynth_core::formats::read_rdt;
use radsynth_core::pipeline::{held_out_report, load_frames, normalized_radar, train_on, PairedDataset};
use radsynth_core::toyworld::{generate_dataset, MANIFEST_FILE};
use radsynth_core::{Error, ScaleDomain};

fn small(extra: &str) -> PipelineConfig {
    let base = r#"{"epochs": 1, "toyworld": {"num_scenes": 4, "n_train": 2, "n_val": 1}}"#;
    let mut cfg: serde_json::Value = serde_json::from_str(base).unwrap();
    let extra: serde_json::Value = serde_json::from_str(extra).unwrap();
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    PipelineConfig::from_json_str(&cfg.to_string()).unwrap()
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn materialized_config_reparses_identically() {
    for preset in [Preset::Desk, Preset::Full] {
        let cfg = PipelineConfig::preset(preset);
        cfg.validate().unwrap();
        assert_eq!(PipelineConfig::from_json_str(&cfg.to_json_pretty()).unwrap(), cfg);
    }
    let full = PipelineConfig::from_json_str(r#"{"preset": "full", "epochs": 3}"#).unwrap();
    assert_eq!(full.epochs, 3);
    assert_eq!(full.roi, PipelineConfig::preset(Preset::Full).roi);
}

#[test]
fn config_rejects_unknown_and_inconsistent_keys() {
    assert!(matches!(
        PipelineConfig::from_json_str(r#"{"generator": {"widht": 3}}"#),
        Err(Error::Config(_))
    ));
    let err =
        PipelineConfig::from_json_str(r#"{"resolutions": {"r_in": 0.1, "r_out": 0.4}, "generator": {"r_in": 0.05}}"#);
    assert!(err.is_err());
    let ok = PipelineConfig::from_json_str(r#"{"resolutions": {"r_in": 0.1, "r_out": 0.8}}"#).unwrap();
    assert_eq!((ok.generator.r_in, ok.generator.r_out), (0.1, 0.8));
}

#[test]
fn dataset_generation_is_seeded() {
    let cfg = small("{}");
    let (a, b, c) = (
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
    );
    for (dir, seed) in [(&a, 1), (&b, 1), (&c, 2)] {
        generate_dataset(dir.path(), &cfg.toyworld, &cfg.roi, cfg.resolutions.r_out, seed).unwrap();
    }
    let (fa, fb, fc) = (files(a.path()), files(b.path()), files(c.path()));
    assert_eq!(fa.len(), 4 * 3 + 1);
    assert_eq!(fa, fb);
    assert_ne!(fa, fc);

    let frames = load_frames(&a.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(frames.len(), 4);
    for f in &frames {
        let radar = f.radar.as_ref().unwrap();
        assert_eq!(radar.scale_domain, ScaleDomain::RawPower);
        assert_eq!(radar.dims, cfg.roi.dims(cfg.resolutions.r_out).unwrap());
        let norm = normalized_radar(radar).unwrap();
        assert!(norm.values.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(!f.lidar.is_empty());
    }
    let on_disk = read_rdt(&a.path().join("scene_0000.rdt")).unwrap();
    assert_eq!(&on_disk, frames[0].radar.as_ref().unwrap());
}

#[test]
fn training_is_seeded_and_reports_held_out_scores() {
    let cfg = small("{}");
    let dir = tempfile::tempdir().unwrap();
    generate_dataset(dir.path(), &cfg.toyworld, &cfg.roi, cfg.resolutions.r_out, 3).unwrap();
    let data = PairedDataset::load(&dir.path().join(MANIFEST_FILE), &cfg).unwrap();
    assert_eq!((data.train.len(), data.val.len(), data.test.len()), (2, 1, 1));
    assert_eq!(data.train[0].input.channels, 7);

    let mut epochs = 0;
    let (t1, r1) = train_on(&cfg, &data, 4, |_, _| {
        epochs += 1;
        Ok(())
    })
    .unwrap();
    let (t2, r2) = train_on(&cfg, &data, 4, |_, _| Ok(())).unwrap();
    assert_eq!(epochs, 1);
    assert_eq!(r1, r2);
    assert_eq!(t1.generator.store.encode(), t2.generator.store.encode());
    assert!(r1[0].val_psnr.unwrap().is_finite());

    let report = held_out_report(&t1, &data, &cfg).unwrap();
    assert_eq!(report.count, 2);
    assert!(report.model_psnr.is_finite() && report.baseline_psnr.is_finite());
    assert!(report.baseline_amplitude > 0.0);
}

#[test]
fn obis_switch_changes_input_channels() {
    let cfg = small(r#"{"obis": {"enabled": false}}"#);
    let dir = tempfile::tempdir().unwrap();
    generate_dataset(dir.path(), &cfg.toyworld, &cfg.roi, cfg.resolutions.r_out, 3).unwrap();
    let data = PairedDataset::load(&dir.path().join(MANIFEST_FILE), &cfg).unwrap();
    assert_eq!(data.train[0].input.channels, 2);
}
