//! File formats: JSON Lines records, the theta checkpoint, and CSV helpers.
//!
//! Predictions and ground truths travel as JSONL, one record per line:
//!
//! ```text
//! {"input_id": "...", "model_id": "...", "predictions": ["...", ...]}
//! {"input_id": "...", "ground_truth": "..."}
//! ```
//!
//! Records for one input must be contiguous in the predictions file (the
//! generator and ingest tools emit them that way), which keeps merging a
//! streaming operation. Parse errors carry the file path and line number.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::iter::Peekable;
use std::marker::PhantomData;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::elo::{Comparison, Winner};
use crate::error::{Error, Result};
use crate::learner::StepRecord;
use crate::metrics::{Bucket, MergedInstance};
use crate::ranklist::{EnsembleInstance, ModelOutput, PredictionKey, ThetaMatrix};
use crate::sim::CountFingerprint;

/// One model's ranked predictions for one input; array order is rank order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub input_id: String,
    pub model_id: String,
    pub predictions: Vec<String>,
}

/// Ground truth for one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub input_id: String,
    pub ground_truth: String,
}

/// One merged ranking. `scores` parallels `ranked` when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedRecord {
    pub input_id: String,
    pub ranked: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scores: Vec<f64>,
}

/// Sparse count fingerprint; JSON object keys are decimal feature indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerprintRecord {
    pub id: String,
    pub dim: usize,
    pub counts: BTreeMap<String, u32>,
}

/// One pairwise judgment; `winner` is `"a"` or `"b"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonFileRecord {
    pub a: String,
    pub b: String,
    pub winner: String,
}

/// The theta checkpoint document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaCheckpoint {
    pub model_ids: Vec<String>,
    pub k_max: usize,
    pub theta: Vec<Vec<f64>>,
}

/// Streaming JSONL reader yielding typed records with located errors.
pub struct JsonlReader<T> {
    lines: std::io::Lines<BufReader<File>>,
    path: String,
    line_no: usize,
    _marker: PhantomData<T>,
}

impl<T: DeserializeOwned> JsonlReader<T> {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        Ok(Self {
            lines: BufReader::new(file).lines(),
            path: path.display().to_string(),
            line_no: 0,
            _marker: PhantomData,
        })
    }
}

impl<T: DeserializeOwned> Iterator for JsonlReader<T> {
    type Item = Result<T>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.line_no += 1;
            match self.lines.next()? {
                Err(e) => return Some(Err(Error::Data(format!("{}:{}: {e}", self.path, self.line_no)))),
                Ok(line) => {
                    if line.trim().is_empty() {
                        continue;
                    }
                    return Some(serde_json::from_str(&line).map_err(|e| {
                        Error::Data(format!("{}:{}: {e}", self.path, self.line_no))
                    }));
                }
            }
        }
    }
}

/// Write records as JSONL, one compact document per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, &item)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Incremental JSONL writer for streaming pipelines.
pub struct JsonlWriter {
    out: BufWriter<File>,
    path: String,
}

impl JsonlWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self { out: BufWriter::new(File::create(path)?), path: path.display().to_string() })
    }

    pub fn write<T: Serialize>(&mut self, item: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, item)
            .map_err(|e| Error::Data(format!("{}: {e}", self.path)))?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Group a prediction stream by contiguous `input_id` runs.
///
/// A record whose `input_id` already closed an earlier group means the file
/// is not grouped, which is a data error.
pub struct PredictionGroups<I: Iterator<Item = Result<PredictionRecord>>> {
    inner: Peekable<I>,
    seen: HashSet<String>,
}

impl<I: Iterator<Item = Result<PredictionRecord>>> PredictionGroups<I> {
    pub fn new(records: I) -> Self {
        Self { inner: records.peekable(), seen: HashSet::new() }
    }
}

impl<I: Iterator<Item = Result<PredictionRecord>>> Iterator for PredictionGroups<I> {
    type Item = Result<(String, Vec<PredictionRecord>)>;

    fn next(&mut self) -> Option<Self::Item> {
        let first = match self.inner.next()? {
            Ok(r) => r,
            Err(e) => return Some(Err(e)),
        };
        let input_id = first.input_id.clone();
        if !self.seen.insert(input_id.clone()) {
            return Some(Err(Error::Data(format!(
                "records for input {input_id:?} are not contiguous"
            ))));
        }
        let mut group = vec![first];
        loop {
            match self.inner.peek() {
                Some(Ok(r)) if r.input_id == input_id => {
                    group.push(self.inner.next().expect("peeked").expect("peeked ok"));
                }
                Some(Err(_)) => {
                    return Some(Err(self.inner.next().expect("peeked").expect_err("peeked err")))
                }
                _ => break,
            }
        }
        Some(Ok((input_id, group)))
    }
}

/// Turn one input's records into model outputs, truncating to `k_max` when
/// given and rejecting duplicate models.
pub fn group_to_outputs(
    input_id: &str,
    group: Vec<PredictionRecord>,
    k_max: Option<usize>,
) -> Result<Vec<ModelOutput>> {
    let mut seen = HashSet::new();
    group
        .into_iter()
        .map(|rec| {
            if !seen.insert(rec.model_id.clone()) {
                return Err(Error::Data(format!(
                    "duplicate record for input {input_id:?} model {:?}",
                    rec.model_id
                )));
            }
            let keys = rec
                .predictions
                .iter()
                .map(|p| PredictionKey::new(p))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::Data(format!("input {input_id:?} model {:?}: {e}", rec.model_id)))?;
            let mut output = ModelOutput::new(rec.model_id, keys)?;
            if let Some(k) = k_max {
                output.truncate(k);
            }
            Ok(output)
        })
        .collect()
}

/// Read a ground-truth file into a map, rejecting duplicate ids.
pub fn read_ground_truth(path: &Path) -> Result<BTreeMap<String, PredictionKey>> {
    let mut out = BTreeMap::new();
    for record in JsonlReader::<GroundTruthRecord>::open(path)? {
        let record = record?;
        let key = PredictionKey::new(&record.ground_truth)
            .map_err(|e| Error::Data(format!("input {:?}: {e}", record.input_id)))?;
        if out.insert(record.input_id.clone(), key).is_some() {
            return Err(Error::Data(format!(
                "duplicate ground truth for input {:?}",
                record.input_id
            )));
        }
    }
    Ok(out)
}

/// Load a full dataset from a predictions file and a ground-truth file.
///
/// Lists are truncated to `k_max` at ingestion when given. Ground-truth
/// entries without predictions are ignored; predictions without a ground
/// truth are an error.
pub fn load_dataset(
    predictions: &Path,
    ground_truth: &Path,
    k_max: Option<usize>,
) -> Result<Vec<EnsembleInstance>> {
    let truths = read_ground_truth(ground_truth)?;
    let mut instances = Vec::new();
    for group in PredictionGroups::new(JsonlReader::<PredictionRecord>::open(predictions)?) {
        let (input_id, group) = group?;
        let ground_truth = truths
            .get(&input_id)
            .cloned()
            .ok_or_else(|| Error::Data(format!("no ground truth for input {input_id:?}")))?;
        let outputs = group_to_outputs(&input_id, group, k_max)?;
        instances.push(EnsembleInstance { input_id, ground_truth, outputs });
    }
    if instances.is_empty() {
        return Err(Error::Data(format!("{}: no prediction records", predictions.display())));
    }
    Ok(instances)
}

/// Write a dataset as the standard predictions + ground-truth JSONL pair.
pub fn write_dataset(
    instances: &[EnsembleInstance],
    predictions: &Path,
    ground_truth: &Path,
) -> Result<()> {
    write_jsonl(
        predictions,
        instances.iter().flat_map(|inst| {
            inst.outputs.iter().map(|out| PredictionRecord {
                input_id: inst.input_id.clone(),
                model_id: out.model_id.clone(),
                predictions: out.predictions.iter().map(|k| k.as_str().to_owned()).collect(),
            })
        }),
    )?;
    write_jsonl(
        ground_truth,
        instances.iter().map(|inst| GroundTruthRecord {
            input_id: inst.input_id.clone(),
            ground_truth: inst.ground_truth.as_str().to_owned(),
        }),
    )
}

/// Read merged rankings for evaluation.
pub fn read_merged(path: &Path) -> Result<Vec<MergedInstance>> {
    let mut out = Vec::new();
    for record in JsonlReader::<MergedRecord>::open(path)? {
        let record = record?;
        let ranked = record
            .ranked
            .iter()
            .map(|k| PredictionKey::new(k))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Data(format!("input {:?}: {e}", record.input_id)))?;
        out.push(MergedInstance { input_id: record.input_id, ranked });
    }
    Ok(out)
}

/// Persist a theta checkpoint as a single pretty-printed JSON document.
pub fn write_theta(path: &Path, theta: &ThetaMatrix) -> Result<()> {
    let doc = ThetaCheckpoint {
        model_ids: theta.model_ids().to_vec(),
        k_max: theta.k_max(),
        theta: theta.rows().to_vec(),
    };
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, &doc)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Load and validate a theta checkpoint.
pub fn read_theta(path: &Path) -> Result<ThetaMatrix> {
    let file = File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let doc: ThetaCheckpoint = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    ThetaMatrix::new(doc.model_ids, doc.k_max, doc.theta)
}

/// Read count fingerprints.
pub fn read_fingerprints(path: &Path) -> Result<Vec<CountFingerprint>> {
    let mut out = Vec::new();
    for record in JsonlReader::<FingerprintRecord>::open(path)? {
        let record = record?;
        let counts = record
            .counts
            .iter()
            .map(|(idx, &count)| {
                let idx: u32 = idx.parse().map_err(|_| {
                    Error::Data(format!(
                        "fingerprint {:?}: feature index {idx:?} is not an integer",
                        record.id
                    ))
                })?;
                Ok((idx, count))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(CountFingerprint::new(record.id, record.dim, counts)?);
    }
    Ok(out)
}

/// Write count fingerprints.
pub fn write_fingerprints(path: &Path, fingerprints: &[CountFingerprint]) -> Result<()> {
    write_jsonl(
        path,
        fingerprints.iter().map(|fp| FingerprintRecord {
            id: fp.id().to_owned(),
            dim: fp.dim(),
            counts: fp.counts().iter().map(|&(i, c)| (i.to_string(), c)).collect(),
        }),
    )
}

/// Read pairwise comparisons.
pub fn read_comparisons(path: &Path) -> Result<Vec<Comparison>> {
    let mut out = Vec::new();
    for record in JsonlReader::<ComparisonFileRecord>::open(path)? {
        let record = record?;
        let winner = match record.winner.as_str() {
            "a" => Winner::A,
            "b" => Winner::B,
            other => {
                return Err(Error::Data(format!(
                    "comparison {:?} vs {:?}: winner must be \"a\" or \"b\", got {other:?}",
                    record.a, record.b
                )))
            }
        };
        out.push(Comparison::new(record.a, record.b, winner)?);
    }
    Ok(out)
}

/// Write the per-step training log as CSV.
pub fn write_training_log(path: &Path, log: &[StepRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for row in log {
        writer.serialize(row).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    }
    writer.flush()?;
    Ok(())
}

/// Read per-instance scalar metadata from a two-column CSV (`input_id,value`).
///
/// A first line whose second column does not parse as a number is treated as
/// a header; anywhere else that is an error.
pub fn read_metadata_csv(path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        if record.len() != 2 {
            return Err(Error::Data(format!(
                "{}:{}: expected 2 columns, got {}",
                path.display(),
                idx + 1,
                record.len()
            )));
        }
        let value = match record[1].trim().parse::<f64>() {
            Ok(v) => v,
            Err(_) if idx == 0 => continue,
            Err(e) => {
                return Err(Error::Data(format!("{}:{}: {e}", path.display(), idx + 1)));
            }
        };
        if out.insert(record[0].to_owned(), value).is_some() {
            return Err(Error::Data(format!(
                "{}:{}: duplicate metadata for input {:?}",
                path.display(),
                idx + 1,
                &record[0]
            )));
        }
    }
    Ok(out)
}

/// Write per-bucket accuracy rows as CSV; empty buckets get a blank accuracy.
pub fn write_buckets_csv(path: &Path, buckets: &[Bucket]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "lo,hi,count,accuracy")?;
    for b in buckets {
        match b.accuracy {
            Some(acc) => writeln!(out, "{},{},{},{}", b.lo, b.hi, b.count, acc)?,
            None => writeln!(out, "{},{},{},", b.lo, b.hi, b.count)?,
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranklist::BaselineKind;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tmp();
        let preds = dir.path().join("p.jsonl");
        let truth = dir.path().join("g.jsonl");
        let data = crate::synth::gen_dataset(&crate::synth::SynthConfig {
            model_ids: None,
            k_max: 3,
            n_instances: 5,
            profiles: vec![
                crate::synth::RankProfile::delta(1, 3),
                crate::synth::RankProfile::delta(2, 3),
            ],
            rho: 0.0,
            pool_size: Some(20),
            seed: 1,
        })
        .unwrap();
        write_dataset(&data, &preds, &truth).unwrap();
        let loaded = load_dataset(&preds, &truth, None).unwrap();
        assert_eq!(loaded.len(), data.len());
        for (a, b) in loaded.iter().zip(&data) {
            assert_eq!(a.input_id, b.input_id);
            assert_eq!(a.ground_truth, b.ground_truth);
            assert_eq!(a.outputs, b.outputs);
        }
        // Truncation at ingestion.
        let short = load_dataset(&preds, &truth, Some(2)).unwrap();
        assert!(short.iter().all(|i| i.outputs.iter().all(|o| o.predictions.len() == 2)));
    }

    #[test]
    fn malformed_line_reports_location() {
        let dir = tmp();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            "{\"input_id\":\"a\",\"ground_truth\":\"x\"}\nnot json\n",
        )
        .unwrap();
        let err = read_ground_truth(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":2:"), "{msg}");
    }

    #[test]
    fn non_contiguous_groups_rejected() {
        let recs = vec![
            Ok(PredictionRecord { input_id: "a".into(), model_id: "m1".into(), predictions: vec![] }),
            Ok(PredictionRecord { input_id: "b".into(), model_id: "m1".into(), predictions: vec![] }),
            Ok(PredictionRecord { input_id: "a".into(), model_id: "m2".into(), predictions: vec![] }),
        ];
        let mut groups = PredictionGroups::new(recs.into_iter());
        assert!(groups.next().unwrap().is_ok());
        assert!(groups.next().unwrap().is_ok());
        assert!(groups.next().unwrap().is_err());
    }

    #[test]
    fn theta_checkpoint_round_trip_and_validation() {
        let dir = tmp();
        let path = dir.path().join("theta.json");
        let ids = vec!["a".to_string(), "b".to_string()];
        let theta = crate::ranklist::baseline_theta(BaselineKind::Reciprocal, &ids, 4, None).unwrap();
        write_theta(&path, &theta).unwrap();
        let loaded = read_theta(&path).unwrap();
        assert_eq!(loaded.rows(), theta.rows());
        assert_eq!(loaded.model_ids(), theta.model_ids());

        // An invalid checkpoint (not decreasing) is rejected on load.
        std::fs::write(
            &path,
            "{\"model_ids\":[\"a\"],\"k_max\":2,\"theta\":[[1.0,2.0]]}",
        )
        .unwrap();
        assert!(read_theta(&path).is_err());
    }

    #[test]
    fn fingerprint_file_round_trip() {
        let dir = tmp();
        let path = dir.path().join("fp.jsonl");
        let fps = vec![
            CountFingerprint::new("x", 16, vec![(0, 1), (7, 3)]).unwrap(),
            CountFingerprint::new("y", 16, vec![(2, 2)]).unwrap(),
        ];
        write_fingerprints(&path, &fps).unwrap();
        let loaded = read_fingerprints(&path).unwrap();
        assert_eq!(loaded, fps);
    }

    #[test]
    fn comparisons_parse_and_reject_bad_winner() {
        let dir = tmp();
        let path = dir.path().join("c.jsonl");
        std::fs::write(&path, "{\"a\":\"x\",\"b\":\"y\",\"winner\":\"a\"}\n").unwrap();
        let comps = read_comparisons(&path).unwrap();
        assert_eq!(comps[0].winner_id(), "x");

        std::fs::write(&path, "{\"a\":\"x\",\"b\":\"y\",\"winner\":\"tie\"}\n").unwrap();
        assert!(read_comparisons(&path).is_err());
    }

    #[test]
    fn metadata_csv_accepts_optional_header() {
        let dir = tmp();
        let path = dir.path().join("meta.csv");
        std::fs::write(&path, "input_id,value\na,0.25\nb,0.75\n").unwrap();
        let meta = read_metadata_csv(&path).unwrap();
        assert_eq!(meta["a"], 0.25);
        assert_eq!(meta.len(), 2);

        std::fs::write(&path, "a,0.25\nb,oops\n").unwrap();
        assert!(read_metadata_csv(&path).is_err());
    }
}
