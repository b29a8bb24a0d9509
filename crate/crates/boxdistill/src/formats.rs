//! Line-delimited interchange formats.
//!
//! Every file is a sequence of JSON records, one per line. Writes are
//! canonical: keys sorted, floats in shortest round-trip form, one trailing
//! newline per record, so identical inputs produce byte-identical files on
//! every platform. Reads either reject unknown fields (`strict`) or collect
//! warnings for them.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evidence::EvidenceKind;
use crate::geometry::{BoundingBox, ProposalSet};
use crate::losses::LossBreakdown;

/// A record schema: its name and the exact set of allowed fields.
pub trait Schema {
    const NAME: &'static str;
    const FIELDS: &'static [&'static str];
}

/// Proposal interchange: one record per image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub image_id: String,
    /// Boxes as `[x1, y1, x2, y2]`.
    pub boxes: Vec<[f64; 4]>,
}

impl Schema for ProposalRecord {
    const NAME: &'static str = "proposals";
    const FIELDS: &'static [&'static str] = &["image_id", "boxes"];
}

impl ProposalRecord {
    pub fn from_set(set: &ProposalSet) -> Self {
        Self {
            image_id: set.image_id.clone(),
            boxes: set.boxes.iter().map(|&b| b.into()).collect(),
        }
    }

    pub fn into_set(self) -> Result<ProposalSet> {
        let boxes = self
            .boxes
            .into_iter()
            .map(BoundingBox::try_from)
            .collect::<Result<Vec<_>>>()?;
        ProposalSet::new(self.image_id, boxes)
    }
}

/// Per-image class probabilities: one row of `num_classes + 1` entries per
/// proposal (entry 0 is background).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub image_id: String,
    pub num_classes: usize,
    pub probs: Vec<Vec<f64>>,
}

impl Schema for ScoreRecord {
    const NAME: &'static str = "scores";
    const FIELDS: &'static [&'static str] = &["image_id", "num_classes", "probs"];
}

/// Per-image scalar scores (for NMS over one score per box).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarScoreRecord {
    pub image_id: String,
    pub scores: Vec<f64>,
}

impl Schema for ScalarScoreRecord {
    const NAME: &'static str = "scalar-scores";
    const FIELDS: &'static [&'static str] = &["image_id", "scores"];
}

/// Image-level labels: the present foreground classes, 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageLabelRecord {
    pub image_id: String,
    pub classes: Vec<usize>,
}

impl Schema for ImageLabelRecord {
    const NAME: &'static str = "image-labels";
    const FIELDS: &'static [&'static str] = &["image_id", "classes"];
}

/// One evidence value per record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub image_id: String,
    pub index: usize,
    pub kind: EvidenceKind,
    pub raw: f64,
    pub normalized: f64,
}

impl Schema for EvidenceRecord {
    const NAME: &'static str = "evidence";
    const FIELDS: &'static [&'static str] = &["image_id", "index", "kind", "raw", "normalized"];
}

/// One mined proposal per record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningRecord {
    pub image_id: String,
    pub index: usize,
    /// Assigned class, 0 = background.
    pub label: usize,
    pub seed: bool,
    pub seed_index: Option<usize>,
    pub reference: Option<[f64; 4]>,
}

impl Schema for MiningRecord {
    const NAME: &'static str = "mining";
    const FIELDS: &'static [&'static str] =
        &["image_id", "index", "label", "seed", "seed_index", "reference"];
}

/// One detection per record; `class` is 0-based over the foreground classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image_id: String,
    pub class: usize,
    pub score: f64,
    pub bbox: [f64; 4],
}

impl Schema for DetectionRecord {
    const NAME: &'static str = "detections";
    const FIELDS: &'static [&'static str] = &["image_id", "class", "score", "bbox"];
}

/// Ground-truth objects of one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub image_id: String,
    pub objects: Vec<GtObjectRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtObjectRecord {
    pub class: usize,
    pub bbox: [f64; 4],
}

impl Schema for GroundTruthRecord {
    const NAME: &'static str = "ground-truth";
    const FIELDS: &'static [&'static str] = &["image_id", "objects"];
}

/// One training-log line per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRecord {
    pub step: u64,
    pub alpha: f64,
    pub l_base: f64,
    pub l_ref: Vec<f64>,
    pub l_box: f64,
    pub total: f64,
}

impl Schema for TrainLogRecord {
    const NAME: &'static str = "train-log";
    const FIELDS: &'static [&'static str] =
        &["step", "alpha", "l_base", "l_ref", "l_box", "total"];
}

impl TrainLogRecord {
    pub fn new(step: u64, alpha: f64, breakdown: &LossBreakdown) -> Self {
        Self {
            step,
            alpha,
            l_base: breakdown.l_base,
            l_ref: breakdown.l_ref.clone(),
            l_box: breakdown.l_box,
            total: breakdown.total,
        }
    }
}

/// Per-class metric row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    /// Class name, or "mean" for the summary row.
    pub class: String,
    pub ap: f64,
    pub corloc: f64,
}

impl Schema for MetricsRecord {
    const NAME: &'static str = "metrics";
    const FIELDS: &'static [&'static str] = &["class", "ap", "corloc"];
}

/// Provenance of one run: command, version, config and input hashes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: Option<String>,
    pub inputs: Vec<HashedPath>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashedPath {
    pub path: String,
    pub sha256: String,
}

impl Schema for RunManifest {
    const NAME: &'static str = "run-manifest";
    const FIELDS: &'static [&'static str] =
        &["command", "version", "config", "inputs", "outputs"];
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(HashedPath {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_jsonl(path, std::slice::from_ref(self))
    }
}

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 8192];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex_string(&hasher.finalize()))
}

/// Hex SHA-256 of a byte slice.
pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex_string(&Sha256::digest(bytes))
}

fn hex_string(digest: &[u8]) -> String {
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Canonical single-record serialization: sorted keys, shortest round-trip
/// floats, no trailing whitespace.
pub fn to_canonical_json<T: Serialize>(record: &T) -> String {
    // serde_json's default map is a BTreeMap, so converting through Value
    // sorts the keys
    let value = serde_json::to_value(record).expect("records serialize to JSON");
    serde_json::to_string(&value).expect("values print as JSON")
}

/// Writes records as canonical JSON lines.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        out.write_all(to_canonical_json(r).as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads records from a JSON-lines file. Unknown fields are an error under
/// `strict`, otherwise collected into `warnings`. Parse errors name the line.
pub fn read_jsonl<T: DeserializeOwned + Schema>(
    path: &Path,
    strict: bool,
    warnings: &mut Vec<String>,
) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let allowed: BTreeSet<&str> = T::FIELDS.iter().copied().collect();
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| Error::Format {
                path: path.display().to_string(),
                line: lineno,
                message: format!("invalid JSON: {e}"),
            })?;
        let obj = value.as_object().ok_or_else(|| Error::Format {
            path: path.display().to_string(),
            line: lineno,
            message: format!("expected a {} object", T::NAME),
        })?;
        for key in obj.keys() {
            if !allowed.contains(key.as_str()) {
                let message =
                    format!("unknown field {key:?} in {} record", T::NAME);
                if strict {
                    return Err(Error::Format {
                        path: path.display().to_string(),
                        line: lineno,
                        message,
                    });
                }
                warnings.push(format!("{}:{}: {}", path.display(), lineno, message));
            }
        }
        let record: T = serde_json::from_value(value).map_err(|e| Error::Format {
            path: path.display().to_string(),
            line: lineno,
            message: format!("field error: {e}"),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Loads a proposal file into `ProposalSet`s.
pub fn read_proposals(path: &Path, strict: bool) -> Result<Vec<ProposalSet>> {
    let mut warnings = Vec::new();
    let records: Vec<ProposalRecord> = read_jsonl(path, strict, &mut warnings)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    records.into_iter().map(ProposalRecord::into_set).collect()
}

/// Writes `ProposalSet`s in the interchange format.
pub fn write_proposals(path: &Path, sets: &[ProposalSet]) -> Result<()> {
    let records: Vec<ProposalRecord> = sets.iter().map(ProposalRecord::from_set).collect();
    write_jsonl(path, &records)
}
