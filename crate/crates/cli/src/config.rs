//! The flat `key=value` run configuration.
//!
//! One text file drives every stage — generation, splitting, sampling,
//! training, evaluation. `RunConfig::to_text` always writes every key, so
//! the copy checked into a run directory spells out each default
//! explicitly; its hash is stored in dataset manifests and is what `verify`
//! re-checks.
//!
//! Parsing accepts a subset of keys (missing keys keep their defaults,
//! which for `lambda_ch` depends on the chosen variant), rejects unknown
//! keys, and ignores blank lines and `#` comments.

use crate::CliError;
use sketchkit::metric_learning::{LossConfig, Variant};
use sketchkit::sampling::{SampleMode, SamplingConfig};
use sketchkit::toy_encoder::{EncoderDims, TrainConfig};
use std::collections::BTreeMap;

/// Every knob a run can turn, resolved (no implicit defaults left).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub global_seed: u64,
    /// Abstraction levels a dataset build materializes, ascending.
    pub levels: Vec<f64>,
    pub split_train: f64,
    pub split_val: f64,
    pub split_test: f64,
    pub dense_count: usize,
    pub sparse_count: usize,
    pub sample_mode: SampleMode,
    pub recon_points: usize,
    pub tube_radius_fraction: f64,
    pub image_size: usize,
    pub variant: Variant,
    pub lambda_cls: f64,
    pub lambda_tl: f64,
    pub lambda_tcl: f64,
    pub lambda_ch: f64,
    pub m_tl: f64,
    pub m_tcl: f64,
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_classes: usize,
    pub pairs_per_class: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub embed_dim: usize,
    pub recon_hidden: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let loss = LossConfig::default();
        RunConfig {
            global_seed: 42,
            levels: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            split_train: 0.72,
            split_val: 0.08,
            split_test: 0.20,
            dense_count: 10_000,
            sparse_count: 1024,
            sample_mode: SampleMode::FarthestPoint,
            recon_points: 256,
            tube_radius_fraction: sketchkit::depth_render::TUBE_RADIUS_FRACTION,
            image_size: 224,
            variant: loss.variant,
            lambda_cls: loss.lambda_cls,
            lambda_tl: loss.lambda_tl,
            lambda_tcl: loss.lambda_tcl,
            lambda_ch: loss.lambda_ch,
            m_tl: loss.m_tl,
            m_tcl: loss.m_tcl,
            lr: 0.01,
            momentum: 0.9,
            epochs: 30,
            batch_classes: 8,
            pairs_per_class: 1,
            hidden1: 64,
            hidden2: 128,
            embed_dim: 512,
            recon_hidden: 1024,
        }
    }
}

/// Canonical file form of one abstraction level, also used in file names
/// and manifest keys.
pub fn level_key(l: f64) -> String {
    format!("{l:.2}")
}

fn fmt_levels(levels: &[f64]) -> String {
    levels
        .iter()
        .map(|&l| level_key(l))
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    /// Full text form: every key, fixed order.
    pub fn to_text(&self) -> String {
        let mode = match self.sample_mode {
            SampleMode::Random => "random",
            SampleMode::FarthestPoint => "farthest_point",
        };
        format!(
            "global_seed={}\n\
             levels={}\n\
             split_train={}\n\
             split_val={}\n\
             split_test={}\n\
             dense_count={}\n\
             sparse_count={}\n\
             sample_mode={mode}\n\
             recon_points={}\n\
             tube_radius_fraction={}\n\
             image_size={}\n\
             variant={}\n\
             lambda_cls={}\n\
             lambda_tl={}\n\
             lambda_tcl={}\n\
             lambda_ch={}\n\
             m_tl={}\n\
             m_tcl={}\n\
             lr={}\n\
             momentum={}\n\
             epochs={}\n\
             batch_classes={}\n\
             pairs_per_class={}\n\
             hidden1={}\n\
             hidden2={}\n\
             embed_dim={}\n\
             recon_hidden={}\n",
            self.global_seed,
            fmt_levels(&self.levels),
            self.split_train,
            self.split_val,
            self.split_test,
            self.dense_count,
            self.sparse_count,
            self.recon_points,
            self.tube_radius_fraction,
            self.image_size,
            self.variant,
            self.lambda_cls,
            self.lambda_tl,
            self.lambda_tcl,
            self.lambda_ch,
            self.m_tl,
            self.m_tcl,
            self.lr,
            self.momentum,
            self.epochs,
            self.batch_classes,
            self.pairs_per_class,
            self.hidden1,
            self.hidden2,
            self.embed_dim,
            self.recon_hidden,
        )
    }

    /// Parse a config file. Missing keys keep their defaults; `lambda_ch`
    /// defaults to the chosen variant's value when it is not set itself.
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CliError::Config {
                line: line_no,
                message: format!("expected key=value, got '{line}'"),
            })?;
            let key = key.trim().to_string();
            if kv
                .insert(key.clone(), (line_no, value.trim().to_string()))
                .is_some()
            {
                return Err(CliError::Config {
                    line: line_no,
                    message: format!("duplicate key '{key}'"),
                });
            }
        }

        let variant = match kv.remove("variant") {
            Some((line, v)) => Variant::parse(&v).map_err(|e| CliError::Config {
                line,
                message: e.to_string(),
            })?,
            None => RunConfig::default().variant,
        };
        let mut cfg = RunConfig {
            variant,
            lambda_ch: LossConfig::for_variant(variant).lambda_ch,
            ..RunConfig::default()
        };

        fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, CliError> {
            v.parse().map_err(|_| CliError::Config {
                line,
                message: format!("bad value '{v}' for {key}"),
            })
        }
        for (key, (line, v)) in kv {
            match key.as_str() {
                "global_seed" => cfg.global_seed = num(line, &key, &v)?,
                "levels" => {
                    let mut levels = Vec::new();
                    for tok in v.split(',') {
                        let l: f64 = num(line, &key, tok.trim())?;
                        if !(0.0..=1.0).contains(&l) {
                            return Err(CliError::Config {
                                line,
                                message: format!("level {l} outside [0, 1]"),
                            });
                        }
                        levels.push(l);
                    }
                    levels.sort_by(|a, b| a.partial_cmp(b).expect("finite levels"));
                    levels.dedup_by(|a, b| level_key(*a) == level_key(*b));
                    if levels.is_empty() {
                        return Err(CliError::Config {
                            line,
                            message: "levels must name at least one level".to_string(),
                        });
                    }
                    cfg.levels = levels;
                }
                "split_train" => cfg.split_train = num(line, &key, &v)?,
                "split_val" => cfg.split_val = num(line, &key, &v)?,
                "split_test" => cfg.split_test = num(line, &key, &v)?,
                "dense_count" => cfg.dense_count = num(line, &key, &v)?,
                "sparse_count" => cfg.sparse_count = num(line, &key, &v)?,
                "sample_mode" => {
                    cfg.sample_mode = match v.as_str() {
                        "random" => SampleMode::Random,
                        "farthest_point" => SampleMode::FarthestPoint,
                        other => {
                            return Err(CliError::Config {
                                line,
                                message: format!("unknown sample_mode '{other}'"),
                            })
                        }
                    }
                }
                "recon_points" => cfg.recon_points = num(line, &key, &v)?,
                "tube_radius_fraction" => cfg.tube_radius_fraction = num(line, &key, &v)?,
                "image_size" => cfg.image_size = num(line, &key, &v)?,
                "variant" => unreachable!("removed above"),
                "lambda_cls" => cfg.lambda_cls = num(line, &key, &v)?,
                "lambda_tl" => cfg.lambda_tl = num(line, &key, &v)?,
                "lambda_tcl" => cfg.lambda_tcl = num(line, &key, &v)?,
                "lambda_ch" => cfg.lambda_ch = num(line, &key, &v)?,
                "m_tl" => cfg.m_tl = num(line, &key, &v)?,
                "m_tcl" => cfg.m_tcl = num(line, &key, &v)?,
                "lr" => cfg.lr = num(line, &key, &v)?,
                "momentum" => cfg.momentum = num(line, &key, &v)?,
                "epochs" => cfg.epochs = num(line, &key, &v)?,
                "batch_classes" => cfg.batch_classes = num(line, &key, &v)?,
                "pairs_per_class" => cfg.pairs_per_class = num(line, &key, &v)?,
                "hidden1" => cfg.hidden1 = num(line, &key, &v)?,
                "hidden2" => cfg.hidden2 = num(line, &key, &v)?,
                "embed_dim" => cfg.embed_dim = num(line, &key, &v)?,
                "recon_hidden" => cfg.recon_hidden = num(line, &key, &v)?,
                other => {
                    return Err(CliError::Config {
                        line,
                        message: format!("unknown key '{other}'"),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let sum = self.split_train + self.split_val + self.split_test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CliError::BadRatios { sum });
        }
        for (name, v) in [
            ("split_train", self.split_train),
            ("split_val", self.split_val),
            ("split_test", self.split_test),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(CliError::BadArgs(format!("{name}={v} outside [0, 1]")));
            }
        }
        if self.sparse_count > self.dense_count {
            return Err(CliError::BadArgs(format!(
                "sparse_count {} exceeds dense_count {}",
                self.sparse_count, self.dense_count
            )));
        }
        Ok(())
    }

    /// Load and parse the file at `path`.
    pub fn load(path: &std::path::Path) -> Result<RunConfig, CliError> {
        RunConfig::parse(&crate::read_text(path)?)
    }

    /// Stable hex digest of the canonical text form.
    pub fn hash(&self) -> String {
        format!("{:016x}", sketchkit::rng::hash_str(0x5eed, &self.to_text()))
    }

    pub fn ratios(&self) -> [f64; 3] {
        [self.split_train, self.split_val, self.split_test]
    }

    pub fn sampling(&self) -> SamplingConfig {
        SamplingConfig {
            dense_count: self.dense_count,
            sparse_count: self.sparse_count,
            mode: self.sample_mode,
        }
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            lambda_cls: self.lambda_cls,
            lambda_tl: self.lambda_tl,
            lambda_tcl: self.lambda_tcl,
            lambda_ch: self.lambda_ch,
            m_tl: self.m_tl,
            m_tcl: self.m_tcl,
            variant: self.variant,
        }
    }

    pub fn dims(&self, classes: usize) -> EncoderDims {
        EncoderDims {
            input_points: self.sparse_count,
            hidden1: self.hidden1,
            hidden2: self.hidden2,
            embed: self.embed_dim,
            classes,
            recon_hidden: self.recon_hidden,
            recon_points: self.recon_points,
        }
    }

    pub fn train_config(&self, classes: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            momentum: self.momentum,
            epochs: self.epochs,
            batch_classes: self.batch_classes,
            pairs_per_class: self.pairs_per_class,
            loss: self.loss_config(),
            seed,
            dims: self.dims(classes),
            sampling: self.sampling(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trips_and_hash_is_stable() {
        let cfg = RunConfig::default();
        let text = cfg.to_text();
        let back = RunConfig::parse(&text).expect("parse own output");
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        // Every field has its key spelled out.
        for key in [
            "global_seed",
            "levels",
            "split_train",
            "split_val",
            "split_test",
            "dense_count",
            "sparse_count",
            "sample_mode",
            "recon_points",
            "tube_radius_fraction",
            "image_size",
            "variant",
            "lambda_cls",
            "lambda_tl",
            "lambda_tcl",
            "lambda_ch",
            "m_tl",
            "m_tcl",
            "lr",
            "momentum",
            "epochs",
            "batch_classes",
            "pairs_per_class",
            "hidden1",
            "hidden2",
            "embed_dim",
            "recon_hidden",
        ] {
            assert!(
                text.lines().any(|l| l.starts_with(&format!("{key}="))),
                "missing {key}"
            );
        }
        assert_eq!(text.lines().count(), 27, "exactly one line per key");
    }

    #[test]
    fn partial_files_keep_defaults() {
        let cfg = RunConfig::parse("epochs=3\n# comment\n\nm_tl=2.5\n").expect("parse");
        assert_eq!(cfg.epochs, 3);
        assert!((cfg.m_tl - 2.5).abs() < 1e-15);
        assert_eq!(cfg.global_seed, 42);
        assert_eq!(cfg.lambda_ch, 12.0, "triplet-variant default");
    }

    #[test]
    fn lambda_ch_default_follows_the_variant() {
        let center = RunConfig::parse("variant=cl+tcl\n").expect("parse");
        assert_eq!(center.lambda_ch, 8.0);
        let explicit = RunConfig::parse("variant=cl+tcl\nlambda_ch=3\n").expect("parse");
        assert_eq!(explicit.lambda_ch, 3.0);
    }

    #[test]
    fn bad_inputs_are_rejected_with_line_numbers() {
        let e = RunConfig::parse("epochs=3\nnot a pair\n").unwrap_err();
        assert!(matches!(e, CliError::Config { line: 2, .. }), "{e}");
        let e = RunConfig::parse("mystery=1\n").unwrap_err();
        assert!(matches!(e, CliError::Config { line: 1, .. }), "{e}");
        let e = RunConfig::parse("levels=0.5,1.5\n").unwrap_err();
        assert!(matches!(e, CliError::Config { .. }), "{e}");
        let e = RunConfig::parse("epochs=1\nepochs=2\n").unwrap_err();
        assert!(matches!(e, CliError::Config { line: 2, .. }), "{e}");
        let e = RunConfig::parse("split_val=0.5\n").unwrap_err();
        assert!(matches!(e, CliError::BadRatios { .. }), "{e}");
    }

    #[test]
    fn levels_are_sorted_and_deduplicated() {
        let cfg = RunConfig::parse("levels=1.0,0.25,0.25,0\n").expect("parse");
        assert_eq!(cfg.levels, vec![0.0, 0.25, 1.0]);
    }
}
