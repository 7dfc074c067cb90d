use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{read_file, write_file};
use crate::error::{Error, Result};
use crate::grid::Box3D;

/// Parses one JSON value per non-blank line. Errors carry the byte offset of the offending line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let bytes = read_file(path)?;
    parse_jsonl(&bytes, path)
}

pub(crate) fn parse_jsonl<T: DeserializeOwned>(bytes: &[u8], path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    let mut offset = 0usize;
    for line in bytes.split_inclusive(|b| *b == b'\n') {
        let start = offset;
        offset += line.len();
        let trimmed = line.trim_ascii();
        if trimmed.is_empty() {
            continue;
        }
        let value = serde_json::from_slice(trimmed).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            offset: start as u64 + e.column().saturating_sub(1) as u64,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("records serialize to JSON");
        buf.push(b'\n');
    }
    write_file(path, &buf)
}

/// Box annotations, one `{center, dims, yaw, class}` object per line.
pub fn read_boxes(path: &Path) -> Result<Vec<Box3D>> {
    let boxes: Vec<Box3D> = read_jsonl(path)?;
    for (i, b) in boxes.iter().enumerate() {
        b.validate()
            .map_err(|e| Error::InvalidInput(format!("{}: box {i}: {e}", path.display())))?;
    }
    Ok(boxes)
}

pub fn write_boxes(path: &Path, boxes: &[Box3D]) -> Result<()> {
    write_jsonl(path, boxes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Dataset manifest row; paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub lidar: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radar: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<String>,
    pub split: Split,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    read_jsonl(path)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    write_jsonl(path, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ObjectClass;

    #[test]
    fn box_lines_parse_and_report_offsets() {
        let text = b"{\"center\":[1,2,3],\"dims\":[4,2,1.5],\"yaw\":0.5,\"class\":\"Sedan\"}\n\n{\"center\":[1,2],\"dims\":[1,1,1],\"yaw\":0,\"class\":\"Sedan\"}\n";
        let err = parse_jsonl::<Box3D>(text, Path::new("b.jsonl")).unwrap_err();
        match err {
            Error::Format { offset, .. } => assert!((64..text.len() as u64).contains(&offset), "{offset}"),
            other => panic!("{other:?}"),
        }
        let ok: Vec<Box3D> = parse_jsonl(&text[..63], Path::new("b.jsonl")).unwrap();
        assert_eq!(ok[0].class, ObjectClass::Sedan);
        assert_eq!(ok[0].dims, [4.0, 2.0, 1.5]);
    }

    #[test]
    fn manifest_rejects_unknown_keys() {
        let text = b"{\"lidar\":\"a.lpc\",\"split\":\"train\",\"extra\":1}\n";
        assert!(parse_jsonl::<ManifestEntry>(text, Path::new("m")).is_err());
        let text = b"{\"lidar\":\"a.lpc\",\"radar\":\"a.rdt\",\"split\":\"val\"}\n";
        let m: Vec<ManifestEntry> = parse_jsonl(text, Path::new("m")).unwrap();
        assert_eq!(m[0].split, Split::Val);
        assert_eq!(m[0].boxes, None);
    }
}
