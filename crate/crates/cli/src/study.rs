//! Cross-level retrieval studies.
//!
//! A study trains one model per training abstraction level, evaluates each
//! on the test split at every evaluation level, and reports the full
//! metric matrix. The per-row mAP spread (max minus min across evaluation
//! levels) summarizes how robust a training level is to seeing a different
//! abstraction at query time.

use crate::commands::{eval_metrics, load_pairs, LevelSpec};
use crate::config::{level_key, RunConfig};
use crate::dataset::{DatasetManifest, Split};
use crate::{write_text, CliError};
use serde::Serialize;
use sketchkit::metric_learning::RetrievalMetrics;
use sketchkit::rng::hash_str;
use sketchkit::toy_encoder::train;
use std::path::Path;

/// The metric matrix of one study: `rows[i][j]` evaluates the model
/// trained at `train_levels[i]` on queries at `eval_levels[j]`.
#[derive(Debug, Clone, Serialize)]
pub struct StudyResult {
    pub seed: u64,
    pub train_levels: Vec<String>,
    pub eval_levels: Vec<String>,
    pub rows: Vec<Vec<RetrievalMetrics>>,
}

impl StudyResult {
    pub fn map_matrix(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|m| m.map).collect())
            .collect()
    }

    /// max - min of mAP across evaluation levels for one training level.
    pub fn map_spread(&self, row: usize) -> f64 {
        let maps: Vec<f64> = self.rows[row].iter().map(|m| m.map).collect();
        let max = maps.iter().cloned().fold(f64::MIN, f64::max);
        let min = maps.iter().cloned().fold(f64::MAX, f64::min);
        max - min
    }

    /// Aligned text table of the mAP matrix.
    pub fn to_text(&self) -> String {
        let mut out = String::from("train\\eval");
        for e in &self.eval_levels {
            out.push_str(&format!(" {e:>8}"));
        }
        out.push_str("   spread\n");
        for (i, t) in self.train_levels.iter().enumerate() {
            out.push_str(&format!("{t:>10}"));
            for m in &self.rows[i] {
                out.push_str(&format!(" {:8.4}", m.map));
            }
            out.push_str(&format!(" {:8.4}\n", self.map_spread(i)));
        }
        out
    }
}

/// Train at each `train_levels` entry and evaluate at each `eval_levels`
/// entry. Training seeds derive from `seed` and the training level, so the
/// whole study is one pure function of (dataset, config, seed). When `out`
/// is given, `study.json` and `study.txt` are written there.
pub fn run_study(
    manifest_path: &Path,
    config: &RunConfig,
    train_levels: &[f64],
    eval_levels: &[f64],
    seed: u64,
    out: Option<&Path>,
) -> Result<StudyResult, CliError> {
    if train_levels.is_empty() || eval_levels.is_empty() {
        return Err(CliError::BadArgs(
            "a study needs at least one training and one evaluation level".to_string(),
        ));
    }
    let manifest = DatasetManifest::load(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let mut rows = Vec::with_capacity(train_levels.len());
    for &tl in train_levels {
        let spec = LevelSpec::Fixed(tl);
        let train_ds = load_pairs(&manifest, root, Split::Train, spec)?;
        let val_ds = load_pairs(&manifest, root, Split::Val, spec)?;
        let val = if val_ds.pairs.is_empty() {
            None
        } else {
            Some(val_ds)
        };
        let run_seed = hash_str(seed, &format!("study-train-{}", level_key(tl)));
        let tc = config.train_config(manifest.num_classes(), run_seed);
        let output = train(&train_ds, val.as_ref(), &tc)?;
        let mut row = Vec::with_capacity(eval_levels.len());
        for &el in eval_levels {
            let (metrics, _, _) =
                eval_metrics(&manifest, root, &output.params, config, Split::Test, el)?;
            row.push(metrics);
        }
        rows.push(row);
    }
    let result = StudyResult {
        seed,
        train_levels: train_levels.iter().map(|&l| level_key(l)).collect(),
        eval_levels: eval_levels.iter().map(|&l| level_key(l)).collect(),
        rows,
    };
    if let Some(dir) = out {
        let mut json = serde_json::to_string_pretty(&result)?;
        json.push('\n');
        write_text(&dir.join("study.json"), &json)?;
        write_text(&dir.join("study.txt"), &result.to_text())?;
    }
    Ok(result)
}
