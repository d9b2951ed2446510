//! Dataset manifests: build, split, verify.
//!
//! A dataset directory is self-describing: `manifest.json` carries the
//! global seed, the abstraction levels, the full config text plus its
//! hash, and one entry per shape with that shape's derived seed, split,
//! and every file the build produced for it. Per-item seeds are
//! `hash(global_seed, id)`, so adding shapes never reshuffles the streams
//! of existing ones, and rebuilding with equal inputs writes byte-identical
//! files.
//!
//! Item failures during a build (say, a degenerate network) are recorded
//! in that item's `errors` list instead of aborting the build; consumers
//! skip items with errors.

use crate::config::{level_key, RunConfig};
use crate::procgen::ProcShape;
use crate::{write_text, CliError};
use serde::{Deserialize, Serialize};
use sketchkit::chain_ops::{prepare_network, ConsolidationConfig};
use sketchkit::geom::{CurveNetwork, Normalization, PointCloud};
use sketchkit::rng::{hash_str, RngStream};
use sketchkit::sampling::{mesh_sparse_cloud, sample_polylines, sketch_sparse_cloud};
use sketchkit::{abstraction, io};
use std::collections::BTreeMap;
use std::path::Path;

/// Which partition an item belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn all() -> [Split; 3] {
        [Split::Train, Split::Val, Split::Test]
    }
}

/// Deterministic per-item RNG root: a stable hash of the global seed and
/// the item id.
pub fn item_seed(global_seed: u64, id: &str) -> u64 {
    hash_str(global_seed, id)
}

/// Assign one split per item, stratified by class.
///
/// Within each class the three quotas come from largest-remainder rounding
/// of `ratios * n` (ties broken train, then val, then test), so for example
/// 10 items at 0.8/0.1/0.1 give exactly 8/1/1. Which items land where is
/// decided by a seeded shuffle per class. Every class needs at least 3
/// items; the result is disjoint and exhaustive by construction.
pub fn stratified_split(
    classes: &[usize],
    class_names: &[String],
    ratios: [f64; 3],
    seed: u64,
) -> Result<Vec<Split>, CliError> {
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(CliError::BadRatios { sum });
    }
    if ratios.iter().any(|&r| r < 0.0) {
        return Err(CliError::BadArgs("split ratios must be >= 0".to_string()));
    }
    if classes.len() != class_names.len() {
        return Err(CliError::BadArgs(
            "classes and class_names must pair up".to_string(),
        ));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in classes.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let mut out = vec![Split::Train; classes.len()];
    let rng = RngStream::new(seed).derive_str("split");
    for (&class, members) in &by_class {
        let n = members.len();
        if n < 3 {
            return Err(CliError::ClassTooSmall {
                class: class_names[members[0]].clone(),
                count: n,
            });
        }
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for k in 0..3 {
            let exact = ratios[k] * n as f64;
            base[k] = exact.floor() as usize;
            frac[k] = exact - exact.floor();
        }
        let mut remaining = n - base.iter().sum::<usize>();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| frac[b].partial_cmp(&frac[a]).expect("finite").then(a.cmp(&b)));
        for &k in &order {
            if remaining == 0 {
                break;
            }
            base[k] += 1;
            remaining -= 1;
        }
        let mut slots = members.clone();
        rng.derive(class as u64).shuffle(&mut slots);
        let mut cursor = 0;
        for (k, &split) in Split::all().iter().enumerate() {
            for _ in 0..base[k] {
                out[slots[cursor]] = split;
                cursor += 1;
            }
        }
        debug_assert_eq!(cursor, n);
    }
    Ok(out)
}

/// One shape's entry in a dataset manifest. All paths are relative to the
/// dataset root.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestItem {
    pub id: String,
    pub class: usize,
    pub class_name: String,
    pub seed: u64,
    pub split: Split,
    pub mesh: String,
    pub network: String,
    pub shape_cloud: String,
    pub recon_target: String,
    /// level key -> sketch file
    pub sketches: BTreeMap<String, String>,
    /// level key -> sparse sketch point cloud
    pub sketch_clouds: BTreeMap<String, String>,
    /// Build failures for this item; empty means fully usable.
    pub errors: Vec<String>,
}

impl ManifestItem {
    pub fn usable(&self) -> bool {
        self.errors.is_empty()
    }
}

/// The self-describing index of one built dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub global_seed: u64,
    pub levels: Vec<f64>,
    pub config_hash: String,
    pub config_text: String,
    pub items: Vec<ManifestItem>,
}

impl DatasetManifest {
    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<DatasetManifest, CliError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<DatasetManifest, CliError> {
        DatasetManifest::from_json(&crate::read_text(path)?)
    }

    pub fn level_keys(&self) -> Vec<String> {
        self.levels.iter().map(|&l| level_key(l)).collect()
    }

    /// Number of distinct classes (labels are assumed dense from 0).
    pub fn num_classes(&self) -> usize {
        self.items.iter().map(|i| i.class + 1).max().unwrap_or(0)
    }
}

/// Build a dataset directory from generated shapes and a precomputed split.
///
/// Per shape: normalize mesh and network together, prepare the network,
/// write both geometries, a sparse shape cloud, a reconstruction target
/// (equidistant samples of the prepared network), and per level a sketch
/// plus its sparse cloud. Anything that fails for one shape lands in that
/// item's `errors` and the build moves on.
pub fn build_dataset(
    shapes: &[ProcShape],
    splits: &[Split],
    config: &RunConfig,
    out: &Path,
) -> Result<DatasetManifest, CliError> {
    if shapes.len() != splits.len() {
        return Err(CliError::BadArgs(format!(
            "{} shapes but {} split assignments",
            shapes.len(),
            splits.len()
        )));
    }
    let sampling = config.sampling();
    let mut items = Vec::with_capacity(shapes.len());
    for (shape, &split) in shapes.iter().zip(splits) {
        let id = &shape.id;
        let seed = item_seed(config.global_seed, id);
        let mut item = ManifestItem {
            id: id.clone(),
            class: shape.class,
            class_name: shape.class_name.clone(),
            seed,
            split,
            mesh: format!("shapes/{id}.mesh.txt"),
            network: format!("shapes/{id}.network.txt"),
            shape_cloud: format!("clouds/{id}.shape.txt"),
            recon_target: format!("targets/{id}.target.txt"),
            sketches: BTreeMap::new(),
            sketch_clouds: BTreeMap::new(),
            errors: Vec::new(),
        };
        if let Err(e) = build_item(shape, seed, config, &sampling, out, &mut item) {
            item.errors.push(e.to_string());
        }
        items.push(item);
    }
    let manifest = DatasetManifest {
        global_seed: config.global_seed,
        levels: config.levels.clone(),
        config_hash: config.hash(),
        config_text: config.to_text(),
        items,
    };
    write_text(&out.join("manifest.json"), &manifest.to_json()?)?;
    write_text(&out.join("config.txt"), &config.to_text())?;
    Ok(manifest)
}

fn build_item(
    shape: &ProcShape,
    seed: u64,
    config: &RunConfig,
    sampling: &sketchkit::sampling::SamplingConfig,
    out: &Path,
    item: &mut ManifestItem,
) -> Result<(), CliError> {
    let norm = Normalization::fit(&shape.network);
    let mesh = shape.mesh.transformed(&norm)?;
    let network = sketchkit::geom::normalize(&shape.network)?;
    io::save_mesh(&path_under(out, &item.mesh)?, &mesh)?;
    io::save_curve_network(&path_under(out, &item.network)?, &network)?;

    let mut shape_rng = RngStream::new(seed).derive_str("shape-cloud");
    let shape_cloud = mesh_sparse_cloud(&mesh, sampling, &mut shape_rng)?;
    io::save_point_cloud(&path_under(out, &item.shape_cloud)?, &shape_cloud)?;

    let prepared = prepare_network(&network, &ConsolidationConfig::default())?;
    let target = network_target(&prepared, config.recon_points)?;
    io::save_point_cloud(&path_under(out, &item.recon_target)?, &target)?;

    for &level in &config.levels {
        let key = level_key(level);
        let params = abstraction::AbstractionParams::at_level(level);
        let srng = RngStream::new(seed)
            .derive_str("sketch")
            .derive_str(&key);
        let sketch = abstraction::generate_sketch(&prepared, &item.id, &params, &srng)?;
        let sketch_rel = format!("sketches/{}_la{key}.sketch.txt", item.id);
        io::save_sketch(&path_under(out, &sketch_rel)?, &sketch)?;
        item.sketches.insert(key.clone(), sketch_rel);

        let mut crng = RngStream::new(seed)
            .derive_str("sketch-cloud")
            .derive_str(&key);
        let cloud = sketch_sparse_cloud(&sketch, sampling, &mut crng)?;
        let cloud_rel = format!("clouds/{}_la{key}.sketch.txt", item.id);
        io::save_point_cloud(&path_under(out, &cloud_rel)?, &cloud)?;
        item.sketch_clouds.insert(key, cloud_rel);
    }
    Ok(())
}

/// Equidistant samples over a prepared network, used as the reconstruction
/// target. Deterministic: no randomness is involved.
pub fn network_target(net: &CurveNetwork, n: usize) -> Result<PointCloud, CliError> {
    let polylines: Vec<&[sketchkit::geom::Point3]> =
        net.chains().iter().map(|c| c.vertices()).collect();
    Ok(sample_polylines(&polylines, n)?)
}

/// Join a manifest-relative path onto the dataset root, creating parent
/// directories.
fn path_under(root: &Path, rel: &str) -> Result<std::path::PathBuf, CliError> {
    let p = root.join(rel);
    if let Some(dir) = p.parent() {
        std::fs::create_dir_all(dir).map_err(|source| CliError::File {
            path: dir.display().to_string(),
            source,
        })?;
    }
    Ok(p)
}

/// Re-check a manifest against its dataset directory: config hash, item
/// seeds, level keys, and the existence of every referenced file. Returns
/// the list of problems (empty = clean).
pub fn verify_manifest(manifest: &DatasetManifest, root: &Path) -> Vec<String> {
    let mut problems = Vec::new();
    match RunConfig::parse(&manifest.config_text) {
        Ok(cfg) => {
            if cfg.hash() != manifest.config_hash {
                problems.push(format!(
                    "config hash mismatch: manifest says {}, text hashes to {}",
                    manifest.config_hash,
                    cfg.hash()
                ));
            }
        }
        Err(e) => problems.push(format!("embedded config does not parse: {e}")),
    }
    let keys = manifest.level_keys();
    for item in &manifest.items {
        let expect = item_seed(manifest.global_seed, &item.id);
        if item.seed != expect {
            problems.push(format!(
                "{}: seed {} but hash(global_seed, id) = {expect}",
                item.id, item.seed
            ));
        }
        for key in item.sketches.keys().chain(item.sketch_clouds.keys()) {
            if !keys.contains(key) {
                problems.push(format!("{}: unknown level key '{key}'", item.id));
            }
        }
        if !item.usable() {
            continue; // a failed item legitimately lacks files
        }
        let mut files: Vec<&String> = vec![
            &item.mesh,
            &item.network,
            &item.shape_cloud,
            &item.recon_target,
        ];
        files.extend(item.sketches.values());
        files.extend(item.sketch_clouds.values());
        for rel in files {
            if !root.join(rel).is_file() {
                problems.push(format!("{}: missing file {rel}", item.id));
            }
        }
    }
    problems
}

/// The mixed-abstraction view: per usable item, one level drawn uniformly
/// from `levels`, keyed by `hash(seed, id)` so the draw for an item never
/// depends on which other items exist. Returns `(item index, level)` pairs.
pub fn mixed_view(
    manifest: &DatasetManifest,
    levels: &[f64],
    seed: u64,
) -> Result<Vec<(usize, f64)>, CliError> {
    if levels.is_empty() {
        return Err(CliError::BadArgs(
            "mixed view needs at least one level".to_string(),
        ));
    }
    let keys = manifest.level_keys();
    for &l in levels {
        if !keys.contains(&level_key(l)) {
            return Err(CliError::BadArgs(format!(
                "level {} is not materialized in this dataset",
                level_key(l)
            )));
        }
    }
    Ok(manifest
        .items
        .iter()
        .enumerate()
        .filter(|(_, item)| item.usable())
        .map(|(i, item)| {
            let mut rng = RngStream::new(hash_str(seed, &item.id)).derive_str("mix");
            (i, levels[rng.index(levels.len())])
        })
        .collect())
}

/// All materialized levels of a manifest.
pub fn all_levels(manifest: &DatasetManifest) -> Vec<f64> {
    manifest.levels.clone()
}

/// The middle-band levels {0.25, 0.5, 0.75}, intersected with what the
/// manifest materializes.
pub fn middle_levels(manifest: &DatasetManifest) -> Vec<f64> {
    manifest
        .levels
        .iter()
        .copied()
        .filter(|&l| ["0.25", "0.50", "0.75"].contains(&level_key(l).as_str()))
        .collect()
}
