//! Versioned training configs with shipped per-scenario defaults.

use crate::nn::ModelConfig;
use crate::term::Domain;
use crate::training::OptimizerSpec;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Single(Domain),
    Multi,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Single(d) => d.name(),
            Scenario::Multi => "multi",
        }
    }

    pub fn parse(s: &str) -> anyhow::Result<Self> {
        if s.eq_ignore_ascii_case("multi") {
            return Ok(Scenario::Multi);
        }
        for d in Domain::ALL {
            if s.eq_ignore_ascii_case(d.name()) {
                return Ok(Scenario::Single(d));
            }
        }
        anyhow::bail!("unknown domain {s:?}; expected logic|listops|arithmetic|algebra|multi")
    }

    pub fn domains(self) -> Vec<Domain> {
        match self {
            Scenario::Single(d) => vec![d],
            Scenario::Multi => Domain::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub version: u32,
    pub kind: String,
    pub scenario: String,
    pub model: ModelConfig,
    pub optimizer: OptimizerSpec,
}

pub fn load_config(path: &Path) -> anyhow::Result<TrainConfig> {
    let text = std::fs::read_to_string(path)?;
    let cfg: TrainConfig = serde_json::from_str(&text)?;
    anyhow::ensure!(
        cfg.version == CONFIG_VERSION,
        "config version {} unsupported (expected {CONFIG_VERSION})",
        cfg.version
    );
    Ok(cfg)
}

pub fn save_config(cfg: &TrainConfig, path: &Path) -> anyhow::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(cfg)?)?;
    Ok(())
}

fn model(
    d_model: usize,
    enc: usize,
    dec: usize,
    k: Option<usize>,
    dropout: f64,
    gain: f64,
) -> ModelConfig {
    ModelConfig {
        src_vocab: 0,
        tgt_vocab: 0,
        d_model,
        enc_layers: enc,
        dec_layers: dec,
        heads: 4,
        dropout,
        k,
        n_positions: 1024,
        gain,
        bos: 0,
        eos: 1,
    }
}

fn opt(lr: f64, batch: usize, iterations: usize, warmup: usize) -> OptimizerSpec {
    OptimizerSpec { lr, batch, iterations, warmup }
}

/// Encoder-only segmentation Selector defaults (dropout 0.1, k = 1,
/// batch 512, 1000 linear warmup iterations; 5,000 training iterations,
/// 7,000 multi-domain).
pub fn fastnrs_selector_defaults(s: Scenario) -> TrainConfig {
    let (enc, lr, iters) = match s {
        Scenario::Single(Domain::Logic) => (3, 3.55e-5, 5_000),
        Scenario::Single(Domain::ListOps) => (4, 3.65e-5, 5_000),
        Scenario::Single(Domain::Arithmetic) => (4, 2.66e-5, 5_000),
        Scenario::Single(Domain::Algebra) => (6, 4.49e-5, 5_000),
        Scenario::Multi => (4, 1.69e-5, 7_000),
    };
    TrainConfig {
        version: CONFIG_VERSION,
        kind: "selector-segmentation".into(),
        scenario: s.name().into(),
        model: model(256, enc, 0, Some(1), 0.1, 1.0),
        optimizer: opt(lr, 512, iters, 1_000),
    }
}

/// Seq2seq sampling Selector defaults.
pub fn nrs_selector_defaults(s: Scenario) -> TrainConfig {
    let (k, enc, dec, drop, lr, warm, gain, batch, iters) = match s {
        Scenario::Single(Domain::Logic) => (2, 1, 2, 0.29, 2.7e-5, 1_600, 0.97, 512, 20_000),
        Scenario::Single(Domain::ListOps) => (2, 1, 2, 0.37, 2.65e-5, 1_700, 0.71, 512, 20_000),
        Scenario::Single(Domain::Arithmetic) => {
            (3, 3, 2, 0.17, 2.35e-5, 1_900, 1.69, 512, 30_000)
        }
        Scenario::Single(Domain::Algebra) => (3, 4, 2, 0.20, 5.54e-5, 2_900, 0.75, 256, 30_000),
        Scenario::Multi => (2, 5, 2, 0.10, 7.86e-5, 1_500, 1.00, 512, 30_000),
    };
    TrainConfig {
        version: CONFIG_VERSION,
        kind: "selector-seq2seq".into(),
        scenario: s.name().into(),
        model: model(256, enc, dec, Some(k), drop, gain),
        optimizer: opt(lr, batch, iters, warm),
    }
}

/// Character-level Solver defaults, shared by both engines.
pub fn solver_defaults(s: Scenario) -> TrainConfig {
    let (d, enc, dec, drop, lr, warm, iters) = match s {
        Scenario::Single(Domain::Logic) => (64, 1, 1, 0.18, 9.23e-5, 1_282, 10_000),
        Scenario::Single(Domain::ListOps) => (128, 2, 2, 0.18, 9.59e-5, 1_910, 10_000),
        Scenario::Single(Domain::Arithmetic) => (256, 3, 3, 0.1, 9e-5, 1_500, 100_000),
        Scenario::Single(Domain::Algebra) => (256, 2, 2, 0.33, 8e-5, 1_500, 40_000),
        Scenario::Multi => (320, 4, 4, 0.13, 6.19e-5, 1_714, 40_000),
    };
    TrainConfig {
        version: CONFIG_VERSION,
        kind: "solver".into(),
        scenario: s.name().into(),
        model: model(d, enc, dec, None, drop, 1.0),
        optimizer: opt(lr, 512, iters, warm),
    }
}

pub fn defaults_for(module: &str, engine: &str, s: Scenario) -> anyhow::Result<TrainConfig> {
    match (module, engine) {
        ("selector", "fastnrs") => Ok(fastnrs_selector_defaults(s)),
        ("selector", "nrs") => Ok(nrs_selector_defaults(s)),
        ("solver", _) => Ok(solver_defaults(s)),
        _ => anyhow::bail!("unknown module {module:?}; expected selector|solver"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = fastnrs_selector_defaults(Scenario::Single(Domain::Logic));
        let path = dir.path().join("cfg.json");
        save_config(&cfg, &path).unwrap();
        let back = load_config(&path).unwrap();
        assert_eq!(back.version, CONFIG_VERSION);
        assert_eq!(back.model.enc_layers, 3);
        assert_eq!(back.model.k, Some(1));
        assert_eq!(back.optimizer.batch, 512);
        assert_eq!(back.optimizer.warmup, 1_000);
    }

    #[test]
    fn wrong_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = solver_defaults(Scenario::Multi);
        cfg.version = 99;
        let path = dir.path().join("cfg.json");
        save_config(&cfg, &path).unwrap();
        assert!(load_config(&path).is_err());
    }

    #[test]
    fn scenario_tables_hold_the_tuned_values() {
        let alg = nrs_selector_defaults(Scenario::Single(Domain::Algebra));
        assert_eq!(alg.optimizer.batch, 256);
        assert_eq!(alg.model.k, Some(3));
        assert_eq!(alg.model.gain, 0.75);
        let multi = fastnrs_selector_defaults(Scenario::Multi);
        assert_eq!(multi.optimizer.iterations, 7_000);
        let ar = solver_defaults(Scenario::Single(Domain::Arithmetic));
        assert_eq!(ar.optimizer.iterations, 100_000);
        assert_eq!(ar.model.dec_layers, 3);
    }
}
