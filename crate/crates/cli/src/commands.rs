//! The work behind each `sketchkit` subcommand, callable as a library.
//!
//! Every command reads and writes plain files under caller-chosen
//! directories; nothing here touches the network or global state, so two
//! runs with equal inputs produce identical outputs (checkpoints included).

use crate::config::{level_key, RunConfig};
use crate::dataset::{
    build_dataset, middle_levels, mixed_view, stratified_split, verify_manifest, DatasetManifest,
    ManifestItem, Split,
};
use crate::procgen::{proc_generate, ProcShape};
use crate::{read_text, write_text, CliError};
use serde::{Deserialize, Serialize};
use sketchkit::depth_render::{render_depth, tube_mesh, view_filename, Camera, DepthImage};
use sketchkit::geom::{bbox, Point3, Sketch, TriMesh};
use sketchkit::io;
use sketchkit::metric_learning::{evaluate, sq_dist, RetrievalMetrics, RetrievalRun, RunRecord};
use sketchkit::rng::{hash_str, RngStream};
use sketchkit::sampling::sketch_sparse_cloud;
use sketchkit::toy_encoder::{
    embed_for_retrieval, load_checkpoint, save_checkpoint, train, EncoderParams, TrainDataset,
    TrainOutput, TrainPair,
};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Index of a generated shape collection (`shapes.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapeSet {
    pub seed: u64,
    pub classes: usize,
    pub per_class: usize,
    pub items: Vec<ShapeEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapeEntry {
    pub id: String,
    pub class: usize,
    pub class_name: String,
    pub mesh: String,
    pub network: String,
}

impl ShapeSet {
    pub fn load(path: &Path) -> Result<ShapeSet, CliError> {
        Ok(serde_json::from_str(&read_text(path)?)?)
    }

    /// Read every shape's geometry back from disk.
    pub fn load_shapes(&self, root: &Path) -> Result<Vec<ProcShape>, CliError> {
        self.items
            .iter()
            .map(|e| {
                Ok(ProcShape {
                    id: e.id.clone(),
                    class: e.class,
                    class_name: e.class_name.clone(),
                    mesh: io::load_mesh(&root.join(&e.mesh))?,
                    network: io::load_curve_network(&root.join(&e.network))?,
                })
            })
            .collect()
    }
}

/// Generate shapes and write them (plus `shapes.json`) under `out`.
pub fn cmd_gen_shapes(
    out: &Path,
    classes: usize,
    per_class: usize,
    seed: u64,
) -> Result<ShapeSet, CliError> {
    let shapes = proc_generate(classes, per_class, seed)?;
    let mut items = Vec::with_capacity(shapes.len());
    for s in &shapes {
        let mesh_rel = format!("shapes/{}.mesh.txt", s.id);
        let network_rel = format!("shapes/{}.network.txt", s.id);
        std::fs::create_dir_all(out.join("shapes")).map_err(|source| CliError::File {
            path: out.join("shapes").display().to_string(),
            source,
        })?;
        io::save_mesh(&out.join(&mesh_rel), &s.mesh)?;
        io::save_curve_network(&out.join(&network_rel), &s.network)?;
        items.push(ShapeEntry {
            id: s.id.clone(),
            class: s.class,
            class_name: s.class_name.clone(),
            mesh: mesh_rel,
            network: network_rel,
        });
    }
    let set = ShapeSet {
        seed,
        classes,
        per_class,
        items,
    };
    let mut json = serde_json::to_string_pretty(&set)?;
    json.push('\n');
    write_text(&out.join("shapes.json"), &json)?;
    Ok(set)
}

/// A stored split assignment (`split.json`), keyed by shape id.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitFile {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub assignment: BTreeMap<String, Split>,
}

impl SplitFile {
    pub fn load(path: &Path) -> Result<SplitFile, CliError> {
        Ok(serde_json::from_str(&read_text(path)?)?)
    }
}

/// Split a shape set stratified by class and write `split.json` next to the
/// given output path.
pub fn cmd_split(
    shapes_json: &Path,
    config: &RunConfig,
    out: &Path,
) -> Result<SplitFile, CliError> {
    let set = ShapeSet::load(shapes_json)?;
    let classes: Vec<usize> = set.items.iter().map(|e| e.class).collect();
    let names: Vec<String> = set.items.iter().map(|e| e.class_name.clone()).collect();
    let splits = stratified_split(&classes, &names, config.ratios(), config.global_seed)?;
    let assignment: BTreeMap<String, Split> = set
        .items
        .iter()
        .zip(&splits)
        .map(|(e, &s)| (e.id.clone(), s))
        .collect();
    let file = SplitFile {
        seed: config.global_seed,
        ratios: config.ratios(),
        assignment,
    };
    let mut json = serde_json::to_string_pretty(&file)?;
    json.push('\n');
    write_text(out, &json)?;
    Ok(file)
}

/// Build a dataset directory from a shape set and a split file.
pub fn cmd_build_dataset(
    shapes_json: &Path,
    split_json: &Path,
    config: &RunConfig,
    out: &Path,
) -> Result<DatasetManifest, CliError> {
    let set = ShapeSet::load(shapes_json)?;
    let root = shapes_json.parent().unwrap_or(Path::new("."));
    let shapes = set.load_shapes(root)?;
    let split_file = SplitFile::load(split_json)?;
    let splits: Vec<Split> = shapes
        .iter()
        .map(|s| {
            split_file
                .assignment
                .get(&s.id)
                .copied()
                .ok_or_else(|| CliError::Manifest {
                    message: format!("split file has no assignment for '{}'", s.id),
                })
        })
        .collect::<Result<_, _>>()?;
    build_dataset(&shapes, &splits, config, out)
}

/// Check a manifest against its directory; `Err(Manifest)` lists problems.
pub fn cmd_verify(manifest_path: &Path) -> Result<DatasetManifest, CliError> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let problems = verify_manifest(&manifest, root);
    if problems.is_empty() {
        Ok(manifest)
    } else {
        Err(CliError::Manifest {
            message: problems.join("; "),
        })
    }
}

/// How training and evaluation pick an abstraction level per item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelSpec {
    Fixed(f64),
    MixedAll,
    MixedMiddle,
}

impl LevelSpec {
    pub fn parse(text: &str) -> Result<LevelSpec, CliError> {
        match text {
            "mixed-all" => Ok(LevelSpec::MixedAll),
            "mixed-middle" => Ok(LevelSpec::MixedMiddle),
            other => {
                let l: f64 = other.parse().map_err(|_| {
                    CliError::BadArgs(format!(
                        "level must be a number in [0, 1], 'mixed-all', or 'mixed-middle'; got '{other}'"
                    ))
                })?;
                if !(0.0..=1.0).contains(&l) {
                    return Err(CliError::BadArgs(format!("level {l} outside [0, 1]")));
                }
                Ok(LevelSpec::Fixed(l))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            LevelSpec::Fixed(l) => level_key(*l),
            LevelSpec::MixedAll => "mixed-all".to_string(),
            LevelSpec::MixedMiddle => "mixed-middle".to_string(),
        }
    }
}

/// Resolve one level per usable item of the chosen split.
fn resolve_levels(
    manifest: &DatasetManifest,
    split: Split,
    spec: LevelSpec,
) -> Result<Vec<(usize, f64)>, CliError> {
    let picks = match spec {
        LevelSpec::Fixed(l) => {
            let key = level_key(l);
            if !manifest.level_keys().contains(&key) {
                return Err(CliError::BadArgs(format!(
                    "level {key} is not materialized in this dataset (has {})",
                    manifest.level_keys().join(", ")
                )));
            }
            manifest
                .items
                .iter()
                .enumerate()
                .filter(|(_, it)| it.usable())
                .map(|(i, _)| (i, l))
                .collect()
        }
        LevelSpec::MixedAll => mixed_view(manifest, &manifest.levels.clone(), manifest.global_seed)?,
        LevelSpec::MixedMiddle => {
            let mids = middle_levels(manifest);
            if mids.is_empty() {
                return Err(CliError::BadArgs(
                    "no middle levels (0.25/0.50/0.75) are materialized in this dataset"
                        .to_string(),
                ));
            }
            mixed_view(manifest, &mids, manifest.global_seed)?
        }
    };
    Ok(picks
        .into_iter()
        .filter(|&(i, _)| manifest.items[i].split == split)
        .collect())
}

/// Load the (sketch, mesh, target) pairs of one split at one level selector.
pub fn load_pairs(
    manifest: &DatasetManifest,
    root: &Path,
    split: Split,
    spec: LevelSpec,
) -> Result<TrainDataset, CliError> {
    let picks = resolve_levels(manifest, split, spec)?;
    let mut pairs = Vec::with_capacity(picks.len());
    for (i, level) in picks {
        let item = &manifest.items[i];
        let key = level_key(level);
        let sketch_rel = item.sketches.get(&key).ok_or_else(|| CliError::Manifest {
            message: format!("{}: no sketch at level {key}", item.id),
        })?;
        pairs.push(TrainPair {
            class: item.class,
            sketch: io::load_sketch(&root.join(sketch_rel))?,
            mesh: io::load_mesh(&root.join(&item.mesh))?,
            recon_target: io::load_point_cloud(&root.join(&item.recon_target))?.points,
        });
    }
    Ok(TrainDataset {
        pairs,
        num_classes: manifest.num_classes(),
    })
}

/// What `train` writes besides the checkpoint.
#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub level: String,
    pub seed: u64,
    pub classes: usize,
    pub train_pairs: usize,
    pub val_pairs: usize,
    pub epochs: usize,
    pub final_total: f64,
    pub checkpoint: String,
}

/// Train a model on a manifest's train split and write
/// `model.ckpt`, `log.jsonl`, `config.txt`, and `train.json` under `out`.
pub fn cmd_train(
    manifest_path: &Path,
    config: &RunConfig,
    spec: LevelSpec,
    seed: u64,
    out: &Path,
) -> Result<(TrainOutput, TrainSummary), CliError> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let train_ds = load_pairs(&manifest, root, Split::Train, spec)?;
    let val_ds = load_pairs(&manifest, root, Split::Val, spec)?;
    let val = if val_ds.pairs.is_empty() {
        None
    } else {
        Some(val_ds)
    };
    let tc = config.train_config(manifest.num_classes(), seed);
    let output = train(&train_ds, val.as_ref(), &tc)?;

    save_checkpoint(&path_under(out, "model.ckpt")?, &output.params, &output.centers)?;
    let mut log = String::new();
    for rec in &output.log {
        log.push_str(&serde_json::to_string(rec)?);
        log.push('\n');
    }
    write_text(&out.join("log.jsonl"), &log)?;
    write_text(&out.join("config.txt"), &config.to_text())?;
    let summary = TrainSummary {
        level: spec.label(),
        seed,
        classes: manifest.num_classes(),
        train_pairs: train_ds.pairs.len(),
        val_pairs: val.as_ref().map_or(0, |v| v.pairs.len()),
        epochs: tc.epochs,
        final_total: output.log.last().map_or(f64::NAN, |r| r.total),
        checkpoint: "model.ckpt".to_string(),
    };
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    write_text(&out.join("train.json"), &json)?;
    Ok((output, summary))
}

/// Sketch-to-shape retrieval metrics of `params` on one split at one level.
///
/// Queries are the split's materialized sparse sketch clouds; the gallery
/// is the same items' shape clouds, so ground truth is the identity
/// pairing. Returns the metrics with the query and gallery sizes.
pub fn eval_metrics(
    manifest: &DatasetManifest,
    root: &Path,
    params: &EncoderParams,
    config: &RunConfig,
    split: Split,
    level: f64,
) -> Result<(RetrievalMetrics, usize, usize), CliError> {
    let key = level_key(level);
    let items: Vec<&ManifestItem> = manifest
        .items
        .iter()
        .filter(|it| it.split == split && it.usable())
        .collect();
    if items.is_empty() {
        return Err(CliError::BadArgs(format!(
            "no usable items in the {split:?} split"
        )));
    }
    let loss = config.loss_config();
    let mut queries = Vec::with_capacity(items.len());
    let mut gallery = Vec::with_capacity(items.len());
    let mut classes = Vec::with_capacity(items.len());
    for item in &items {
        let cloud_rel = item
            .sketch_clouds
            .get(&key)
            .ok_or_else(|| CliError::Manifest {
                message: format!("{}: no sketch cloud at level {key}", item.id),
            })?;
        let q = io::load_point_cloud(&root.join(cloud_rel))?;
        let g = io::load_point_cloud(&root.join(&item.shape_cloud))?;
        queries.push(embed_for_retrieval(&q.points, params, &loss)?);
        gallery.push(embed_for_retrieval(&g.points, params, &loss)?);
        classes.push(item.class);
    }
    let distances: Vec<Vec<f64>> = queries
        .iter()
        .map(|q| gallery.iter().map(|g| sq_dist(q, g)).collect())
        .collect();
    let gt: Vec<usize> = (0..items.len()).collect();
    let run = RetrievalRun::new(classes.clone(), gt, classes, distances)?;
    Ok((evaluate(&run), items.len(), items.len()))
}

/// Machine-readable result of one evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub level: String,
    pub split: String,
    pub queries: usize,
    pub gallery: usize,
    pub record: RunRecord,
}

/// Evaluate a checkpoint on the test split and write `metrics.txt` plus
/// `eval.json` under `out`.
pub fn cmd_eval(
    manifest_path: &Path,
    checkpoint: &Path,
    config: &RunConfig,
    level: f64,
    out: &Path,
) -> Result<EvalReport, CliError> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let (params, _centers) = load_checkpoint(checkpoint)?;
    let (metrics, nq, ng) = eval_metrics(&manifest, root, &params, config, Split::Test, level)?;
    let report = EvalReport {
        level: level_key(level),
        split: "test".to_string(),
        queries: nq,
        gallery: ng,
        record: RunRecord::new(&config.loss_config(), config.global_seed, metrics),
    };
    write_text(&out.join("metrics.txt"), &report.record.metrics.to_text())?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    write_text(&out.join("eval.json"), &json)?;
    Ok(report)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Gallery embeddings cached beside a manifest, keyed by checkpoint bytes
/// and manifest identity so a stale cache can never be confused for a
/// current one.
#[derive(Debug, Serialize, Deserialize)]
struct GalleryCache {
    key: String,
    ids: Vec<String>,
    class_names: Vec<String>,
    embeddings: Vec<Vec<f64>>,
}

/// One ranked hit of a retrieval query.
#[derive(Debug, Clone, Serialize)]
pub struct RetrieveHit {
    pub id: String,
    pub class_name: String,
    pub distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RetrieveResult {
    pub query: String,
    pub gallery: usize,
    pub top: Vec<RetrieveHit>,
}

/// Rank every shape in the manifest against one query sketch file.
///
/// Gallery embeddings are computed once per (checkpoint, manifest) pair and
/// cached under `<dataset>/cache/`; later queries reuse the cache.
pub fn cmd_retrieve(
    manifest_path: &Path,
    checkpoint: &Path,
    config: &RunConfig,
    query_path: &Path,
    top_n: usize,
) -> Result<RetrieveResult, CliError> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let (params, _centers) = load_checkpoint(checkpoint)?;
    let loss = config.loss_config();

    let items: Vec<&ManifestItem> = manifest.items.iter().filter(|it| it.usable()).collect();
    let ids: Vec<String> = items.iter().map(|it| it.id.clone()).collect();
    let ckpt_bytes = std::fs::read(checkpoint).map_err(|source| CliError::File {
        path: checkpoint.display().to_string(),
        source,
    })?;
    let mut key_material = ckpt_bytes;
    key_material.extend_from_slice(manifest.config_hash.as_bytes());
    key_material.extend_from_slice(ids.join(",").as_bytes());
    key_material.extend_from_slice(loss.variant.as_str().as_bytes());
    let key = format!("{:016x}", fnv1a(&key_material));

    let cache_path = root.join("cache").join(format!("gallery-{key}.json"));
    let cache = match read_cache(&cache_path, &key, &ids) {
        Some(c) => c,
        None => {
            let mut embeddings = Vec::with_capacity(items.len());
            for item in &items {
                let cloud = io::load_point_cloud(&root.join(&item.shape_cloud))?;
                embeddings.push(embed_for_retrieval(&cloud.points, &params, &loss)?);
            }
            let cache = GalleryCache {
                key: key.clone(),
                ids: ids.clone(),
                class_names: items.iter().map(|it| it.class_name.clone()).collect(),
                embeddings,
            };
            let mut json = serde_json::to_string(&cache)?;
            json.push('\n');
            write_text(&cache_path, &json)?;
            cache
        }
    };

    let sketch: Sketch = io::load_sketch(query_path)?;
    let mut qrng = RngStream::new(hash_str(config.global_seed, "retrieve")).derive_str("query");
    let cloud = sketch_sparse_cloud(&sketch, &config.sampling(), &mut qrng)?;
    let q = embed_for_retrieval(&cloud.points, &params, &loss)?;

    let mut ranked: Vec<(usize, f64)> = cache
        .embeddings
        .iter()
        .enumerate()
        .map(|(i, g)| (i, sq_dist(&q, g)))
        .collect();
    ranked.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite").then(a.0.cmp(&b.0)));
    let top: Vec<RetrieveHit> = ranked
        .iter()
        .take(top_n.min(ranked.len()))
        .map(|&(i, d)| RetrieveHit {
            id: cache.ids[i].clone(),
            class_name: cache.class_names[i].clone(),
            distance: d,
        })
        .collect();
    Ok(RetrieveResult {
        query: query_path.display().to_string(),
        gallery: cache.ids.len(),
        top,
    })
}

fn read_cache(path: &Path, key: &str, ids: &[String]) -> Option<GalleryCache> {
    let text = std::fs::read_to_string(path).ok()?;
    let cache: GalleryCache = serde_json::from_str(&text).ok()?;
    if cache.key == key && cache.ids == ids {
        Some(cache)
    } else {
        None
    }
}

/// Index of rendered depth views (`views.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViewIndex {
    pub image_size: usize,
    /// id -> 12 shape-view files.
    pub shapes: BTreeMap<String, Vec<String>>,
    /// id -> level key -> 12 sketch-view files.
    pub sketches: BTreeMap<String, BTreeMap<String, Vec<String>>>,
}

/// Longest bounding-box edge of a sketch, the scale tube radii hang off.
fn sketch_s_max(sketch: &Sketch) -> f64 {
    let pts = sketch
        .strokes
        .iter()
        .flat_map(|s| s.vertices().iter().copied());
    let bb = bbox(pts).expect("a sketch has at least one stroke");
    let e = bb.max.sub(bb.min);
    e.x.max(e.y).max(e.z)
}

/// Tube mesh of a whole sketch at the configured radius fraction.
pub fn sketch_tubes(sketch: &Sketch, radius_fraction: f64) -> TriMesh {
    let radius = (radius_fraction * sketch_s_max(sketch)).max(1e-6);
    let mut vertices: Vec<Point3> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    for stroke in &sketch.strokes {
        let tube = tube_mesh(stroke, radius);
        let base = vertices.len();
        vertices.extend(tube.vertices);
        faces.extend(tube.faces.iter().map(|f| [f[0] + base, f[1] + base, f[2] + base]));
    }
    TriMesh::new(vertices, faces).expect("tube faces index their own vertices")
}

fn render_all(mesh: &TriMesh, cameras: &[Camera]) -> Vec<DepthImage> {
    cameras.iter().map(|c| render_depth(mesh, c)).collect()
}

/// Render 12 depth views per item — of the shape mesh, and of the sketch
/// tube geometry at each requested level — and write a `views.json` index.
pub fn cmd_render_views(
    manifest_path: &Path,
    config: &RunConfig,
    levels: &[f64],
    out: &Path,
) -> Result<ViewIndex, CliError> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let cameras: Vec<Camera> = (0..12)
        .map(|k| Camera::new(30.0 * k as f64, 30.0, config.image_size))
        .collect();
    let mut index = ViewIndex {
        image_size: config.image_size,
        shapes: BTreeMap::new(),
        sketches: BTreeMap::new(),
    };
    for item in manifest.items.iter().filter(|it| it.usable()) {
        let mesh = io::load_mesh(&root.join(&item.mesh))?;
        let mut shape_files = Vec::with_capacity(cameras.len());
        for (k, img) in render_all(&mesh, &cameras).iter().enumerate() {
            let rel = format!("views/{}", view_filename(&format!("{}_shape", item.id), k));
            let path = path_under(out, &rel)?;
            sketchkit::depth_render::write_pgm16(&path, img)?;
            shape_files.push(rel);
        }
        index.shapes.insert(item.id.clone(), shape_files);

        let mut per_level = BTreeMap::new();
        for &level in levels {
            let key = level_key(level);
            let sketch_rel = item.sketches.get(&key).ok_or_else(|| CliError::Manifest {
                message: format!("{}: no sketch at level {key}", item.id),
            })?;
            let sketch = io::load_sketch(&root.join(sketch_rel))?;
            let tubes = sketch_tubes(&sketch, config.tube_radius_fraction);
            let mut files = Vec::with_capacity(cameras.len());
            for (k, img) in render_all(&tubes, &cameras).iter().enumerate() {
                let rel = format!(
                    "views/{}",
                    view_filename(&format!("{}_la{key}", item.id), k)
                );
                let path = path_under(out, &rel)?;
                sketchkit::depth_render::write_pgm16(&path, img)?;
                files.push(rel);
            }
            per_level.insert(key, files);
        }
        index.sketches.insert(item.id.clone(), per_level);
    }
    let mut json = serde_json::to_string_pretty(&index)?;
    json.push('\n');
    write_text(&out.join("views.json"), &json)?;
    Ok(index)
}

fn path_under(root: &Path, rel: &str) -> Result<PathBuf, CliError> {
    let p = root.join(rel);
    if let Some(dir) = p.parent() {
        std::fs::create_dir_all(dir).map_err(|source| CliError::File {
            path: dir.display().to_string(),
            source,
        })?;
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> RunConfig {
        RunConfig::parse(
            "levels=0.00,0.50\n\
             dense_count=300\n\
             sparse_count=24\n\
             recon_points=24\n\
             sample_mode=random\n\
             global_seed=9\n\
             split_train=0.5\n\
             split_val=0.25\n\
             split_test=0.25\n\
             hidden1=8\n\
             hidden2=12\n\
             embed_dim=12\n\
             recon_hidden=16\n\
             epochs=2\n\
             batch_classes=2\n\
             pairs_per_class=1\n\
             image_size=48\n",
        )
        .expect("config")
    }

    /// gen-shapes + split + build-dataset under one temp root.
    fn build_everything(root: &Path, config: &RunConfig) -> PathBuf {
        let shapes_dir = root.join("shapes");
        cmd_gen_shapes(&shapes_dir, 2, 4, config.global_seed).expect("gen");
        let split_path = shapes_dir.join("split.json");
        cmd_split(&shapes_dir.join("shapes.json"), config, &split_path).expect("split");
        let ds = root.join("ds");
        cmd_build_dataset(
            &shapes_dir.join("shapes.json"),
            &split_path,
            config,
            &ds,
        )
        .expect("build");
        ds.join("manifest.json")
    }

    #[test]
    fn full_pipeline_trains_evaluates_and_retrieves() {
        let dir = tempfile::tempdir().expect("tempdir");
        let config = tiny_config();
        let manifest_path = build_everything(dir.path(), &config);
        cmd_verify(&manifest_path).expect("verify");

        let run = dir.path().join("run");
        let (_out, summary) = cmd_train(
            &manifest_path,
            &config,
            LevelSpec::Fixed(0.5),
            config.global_seed,
            &run,
        )
        .expect("train");
        assert_eq!(summary.train_pairs, 4, "2 classes x 2 train shapes");
        assert_eq!(summary.epochs, 2);
        assert!(run.join("model.ckpt").is_file());
        assert!(run.join("log.jsonl").is_file());
        assert!(run.join("config.txt").is_file());

        let report = cmd_eval(
            &manifest_path,
            &run.join("model.ckpt"),
            &config,
            0.5,
            &run.join("eval"),
        )
        .expect("eval");
        assert_eq!(report.queries, 2, "one test shape per class");
        assert!(report.record.metrics.map > 0.0);
        assert!(run.join("eval/metrics.txt").is_file());

        // Retrieve with a training sketch as the query.
        let manifest = DatasetManifest::load(&manifest_path).expect("load");
        let query_rel = manifest.items[0].sketches.get("0.50").expect("sketch");
        let query = manifest_path.parent().unwrap().join(query_rel);
        let result = cmd_retrieve(
            &manifest_path,
            &run.join("model.ckpt"),
            &config,
            &query,
            3,
        )
        .expect("retrieve");
        assert_eq!(result.gallery, 8);
        assert_eq!(result.top.len(), 3);
        assert!(
            result.top.windows(2).all(|w| w[0].distance <= w[1].distance),
            "distances must ascend"
        );
        // The cache was written, and a second call reproduces the ranking.
        let cache_dir = manifest_path.parent().unwrap().join("cache");
        assert_eq!(std::fs::read_dir(&cache_dir).unwrap().count(), 1);
        let again = cmd_retrieve(
            &manifest_path,
            &run.join("model.ckpt"),
            &config,
            &query,
            3,
        )
        .expect("retrieve again");
        for (a, b) in result.top.iter().zip(&again.top) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.distance, b.distance, "cache changed a distance");
        }
    }

    #[test]
    fn training_reruns_write_identical_checkpoints() {
        let dir = tempfile::tempdir().expect("tempdir");
        let config = tiny_config();
        let manifest_path = build_everything(dir.path(), &config);
        for name in ["a", "b"] {
            cmd_train(
                &manifest_path,
                &config,
                LevelSpec::Fixed(0.0),
                7,
                &dir.path().join(name),
            )
            .expect("train");
        }
        let a = std::fs::read(dir.path().join("a/model.ckpt")).expect("read");
        let b = std::fs::read(dir.path().join("b/model.ckpt")).expect("read");
        assert_eq!(a, b, "checkpoint bytes differ between identical runs");
        let la = std::fs::read(dir.path().join("a/log.jsonl")).expect("read");
        let lb = std::fs::read(dir.path().join("b/log.jsonl")).expect("read");
        assert_eq!(la, lb, "training logs differ between identical runs");
    }

    #[test]
    fn mixed_level_specs_load_pairs() {
        let dir = tempfile::tempdir().expect("tempdir");
        let mut config = tiny_config();
        config.levels = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        let manifest_path = build_everything(dir.path(), &config);
        let manifest = DatasetManifest::load(&manifest_path).expect("load");
        let root = manifest_path.parent().unwrap();
        let all = load_pairs(&manifest, root, Split::Train, LevelSpec::MixedAll).expect("mixed");
        assert_eq!(all.pairs.len(), 4);
        let mid =
            load_pairs(&manifest, root, Split::Train, LevelSpec::MixedMiddle).expect("middle");
        assert_eq!(mid.pairs.len(), 4);
        for p in &mid.pairs {
            let la = p.sketch.abstraction;
            assert!(
                ["0.25", "0.50", "0.75"].contains(&level_key(la).as_str()),
                "middle view drew level {la}"
            );
        }
        // A level the dataset never materialized is refused.
        let err = load_pairs(&manifest, root, Split::Train, LevelSpec::Fixed(0.33));
        assert!(err.is_err());
    }

    #[test]
    fn render_views_writes_images_and_index() {
        let dir = tempfile::tempdir().expect("tempdir");
        let config = tiny_config();
        let manifest_path = build_everything(dir.path(), &config);
        let out = dir.path().join("views");
        let index =
            cmd_render_views(&manifest_path, &config, &[0.5], &out).expect("render");
        assert_eq!(index.shapes.len(), 8);
        assert_eq!(index.image_size, 48);
        let (id, files) = index.shapes.iter().next().expect("one shape");
        assert_eq!(files.len(), 12, "12 views per shape");
        let img = sketchkit::depth_render::read_pgm16(&out.join(&files[0])).expect("pgm");
        assert_eq!(img.size(), 48);
        assert!(img.covered() > 0, "{id}: shape view is empty");
        let sketch_files = index.sketches.get(id).and_then(|m| m.get("0.50")).unwrap();
        let simg = sketchkit::depth_render::read_pgm16(&out.join(&sketch_files[0])).expect("pgm");
        assert!(simg.covered() > 0, "{id}: sketch view is empty");
        assert!(out.join("views.json").is_file());
    }

    #[test]
    fn level_spec_parses_fixed_and_mixed() {
        assert_eq!(LevelSpec::parse("0.5").unwrap(), LevelSpec::Fixed(0.5));
        assert_eq!(
            LevelSpec::parse("mixed-all").unwrap().label(),
            "mixed-all"
        );
        assert_eq!(
            LevelSpec::parse("mixed-middle").unwrap(),
            LevelSpec::MixedMiddle
        );
        assert!(LevelSpec::parse("1.5").is_err());
        assert!(LevelSpec::parse("nope").is_err());
    }
}
