//! `sketchkit` — build sketch datasets, train retrieval models, query them.
//!
//! Every subcommand exits 0 on success; on failure it prints one
//! machine-readable JSON error object to stderr and exits 1. Relative
//! `--out` paths are resolved under `$SKETCHKIT_OUT` when that variable is
//! set. All behavior knobs live in the flat `key=value` config file; a few
//! flags (`--seed`, `--levels`, `--variant`) override single keys.

use clap::{Parser, Subcommand};
use sketchkit_cli::commands::{
    cmd_build_dataset, cmd_eval, cmd_gen_shapes, cmd_render_views, cmd_retrieve, cmd_split,
    cmd_train, cmd_verify, LevelSpec,
};
use sketchkit_cli::config::RunConfig;
use sketchkit_cli::study::run_study;
use sketchkit_cli::CliError;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "sketchkit", version, about = "Abstract 3D sketches and sketch-to-shape retrieval")]
struct Cli {
    /// Flat key=value config file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate procedural shapes (meshes + curve networks).
    GenShapes {
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        per_class: usize,
        /// Overrides the config's global_seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assign train/val/test splits, stratified by class.
    Split {
        /// shapes.json from gen-shapes.
        #[arg(long)]
        shapes: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a dataset: sketches, point clouds, and a manifest.
    BuildDataset {
        #[arg(long)]
        shapes: PathBuf,
        #[arg(long)]
        split: PathBuf,
        /// Comma-separated abstraction levels, overriding the config.
        #[arg(long)]
        levels: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render 12 depth views per shape and sketch.
    RenderViews {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated sketch levels to render (default: all in the manifest).
        #[arg(long)]
        levels: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a retrieval model on the manifest's train split.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Loss variant override (cl, cl+tl, cl+tcl, cl+tl+rec, cl+tcl+rec).
        #[arg(long)]
        variant: Option<String>,
        /// Abstraction level: a number, 'mixed-all', or 'mixed-middle'.
        #[arg(long, default_value = "0.50")]
        level: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on the test split.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        level: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train at several levels and evaluate each model at several levels.
    Study {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        train_levels: String,
        #[arg(long)]
        eval_levels: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank all shapes in a dataset against one query sketch file.
    ///
    /// Gallery embeddings are cached under the dataset's cache/ directory,
    /// keyed by checkpoint bytes, config hash, item ids, and loss variant.
    Retrieve {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// A sketch file (as written by build-dataset, or hand-made).
        #[arg(long)]
        query: PathBuf,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Check a manifest against its dataset directory.
    Verify {
        #[arg(long)]
        manifest: PathBuf,
    },
}

/// Load the config file and apply per-key CLI overrides by editing the
/// text before parsing, so override semantics (like the variant-dependent
/// lambda_ch default) match what a hand-edited file would do.
fn load_config(
    path: Option<&Path>,
    overrides: &[(&str, Option<String>)],
) -> Result<RunConfig, CliError> {
    let mut text = match path {
        Some(p) => sketchkit_cli_read(p)?,
        None => String::new(),
    };
    for (key, value) in overrides {
        if let Some(v) = value {
            let kept: Vec<&str> = text
                .lines()
                .filter(|l| !l.trim_start().starts_with(&format!("{key}=")))
                .collect();
            text = kept.join("\n");
            text.push_str(&format!("\n{key}={v}\n"));
        }
    }
    RunConfig::parse(&text)
}

fn sketchkit_cli_read(p: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(p).map_err(|source| CliError::File {
        path: p.display().to_string(),
        source,
    })
}

/// Resolve a relative output path under `$SKETCHKIT_OUT` when set.
fn out_path(p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        return p;
    }
    match std::env::var_os("SKETCHKIT_OUT") {
        Some(root) => PathBuf::from(root).join(p),
        None => p,
    }
}

fn parse_levels(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| CliError::BadArgs(format!("bad level '{tok}'")))
        })
        .collect()
}

/// Print to stdout, treating a broken pipe (say, `| head`) as a normal
/// early exit instead of a panic.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("stdout: {e}");
        std::process::exit(1);
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), CliError> {
    emit(&format!("{}\n", serde_json::to_string_pretty(value)?));
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config_path = cli.config.as_deref();
    match cli.command {
        Command::GenShapes {
            classes,
            per_class,
            seed,
            out,
        } => {
            let cfg = load_config(
                config_path,
                &[("global_seed", seed.map(|s| s.to_string()))],
            )?;
            let out = out_path(out);
            let set = cmd_gen_shapes(&out, classes, per_class, cfg.global_seed)?;
            print_json(&serde_json::json!({
                "shapes": set.items.len(),
                "classes": set.classes,
                "out": out.display().to_string(),
            }))
        }
        Command::Split { shapes, out } => {
            let cfg = load_config(config_path, &[])?;
            let out = out_path(out);
            let file = cmd_split(&shapes, &cfg, &out)?;
            let mut counts = std::collections::BTreeMap::new();
            for split in file.assignment.values() {
                *counts
                    .entry(format!("{split:?}").to_lowercase())
                    .or_insert(0usize) += 1;
            }
            print_json(&serde_json::json!({
                "assignment": out.display().to_string(),
                "counts": counts,
            }))
        }
        Command::BuildDataset {
            shapes,
            split,
            levels,
            seed,
            out,
        } => {
            let cfg = load_config(
                config_path,
                &[
                    ("global_seed", seed.map(|s| s.to_string())),
                    ("levels", levels),
                ],
            )?;
            let out = out_path(out);
            let manifest = cmd_build_dataset(&shapes, &split, &cfg, &out)?;
            let failed = manifest.items.iter().filter(|i| !i.usable()).count();
            print_json(&serde_json::json!({
                "manifest": out.join("manifest.json").display().to_string(),
                "items": manifest.items.len(),
                "failed_items": failed,
                "levels": manifest.level_keys(),
            }))
        }
        Command::RenderViews {
            manifest,
            levels,
            out,
        } => {
            let cfg = load_config(config_path, &[])?;
            let out = out_path(out);
            let levels = match levels {
                Some(text) => parse_levels(&text)?,
                None => sketchkit_cli::dataset::DatasetManifest::load(&manifest)?.levels,
            };
            let index = cmd_render_views(&manifest, &cfg, &levels, &out)?;
            print_json(&serde_json::json!({
                "out": out.display().to_string(),
                "shapes": index.shapes.len(),
                "image_size": index.image_size,
            }))
        }
        Command::Train {
            manifest,
            variant,
            level,
            seed,
            out,
        } => {
            let cfg = load_config(config_path, &[("variant", variant)])?;
            let out = out_path(out);
            let spec = LevelSpec::parse(&level)?;
            let seed = seed.unwrap_or(cfg.global_seed);
            let (_output, summary) = cmd_train(&manifest, &cfg, spec, seed, &out)?;
            print_json(&summary)
        }
        Command::Eval {
            manifest,
            checkpoint,
            level,
            out,
        } => {
            let cfg = load_config(config_path, &[])?;
            let out = out_path(out);
            let report = cmd_eval(&manifest, &checkpoint, &cfg, level, &out)?;
            print_json(&report)
        }
        Command::Study {
            manifest,
            train_levels,
            eval_levels,
            seed,
            out,
        } => {
            let cfg = load_config(config_path, &[])?;
            let out = out_path(out);
            let result = run_study(
                &manifest,
                &cfg,
                &parse_levels(&train_levels)?,
                &parse_levels(&eval_levels)?,
                seed.unwrap_or(cfg.global_seed),
                Some(&out),
            )?;
            emit(&result.to_text());
            Ok(())
        }
        Command::Retrieve {
            manifest,
            checkpoint,
            query,
            top,
        } => {
            let cfg = load_config(config_path, &[])?;
            let result = cmd_retrieve(&manifest, &checkpoint, &cfg, &query, top)?;
            print_json(&result)
        }
        Command::Verify { manifest } => {
            let m = cmd_verify(&manifest)?;
            print_json(&serde_json::json!({
                "ok": true,
                "items": m.items.len(),
                "config_hash": m.config_hash,
            }))
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        let report = serde_json::json!({
            "error": e.kind(),
            "message": e.to_string(),
        });
        eprintln!("{report}");
        std::process::exit(1);
    }
}
