//! Training loops: Adam with warmup + cosine annealing, split-uniform
//! batch composition, periodic checkpoints with ID/OOD validation metrics
//! and OOD-based model selection.

use crate::datagen::{substream, SelectorDataset, SelectorExample, SolverDataset};
use crate::models::{bos_id, eos_id, tgt_vocab_size};
use crate::nn::{
    save_checkpoint, CheckpointManifest, Forward, ModelConfig, Scalar, Transformer,
};
use crate::term::Vocabulary;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub lr: f64,
    pub batch: usize,
    pub iterations: usize,
    pub warmup: usize,
}

/// Linear warmup to `lr`, then cosine annealing to zero.
pub fn lr_at(spec: &OptimizerSpec, iter: usize) -> f64 {
    if iter < spec.warmup {
        return spec.lr * iter as f64 / spec.warmup as f64;
    }
    let span = (spec.iterations - spec.warmup).max(1) as f64;
    let t = (iter - spec.warmup) as f64 / span;
    spec.lr * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
}

pub struct Adam<F: Scalar> {
    m: Vec<Array2<F>>,
    v: Vec<Array2<F>>,
    t: usize,
}

impl<F: Scalar> Adam<F> {
    pub fn new(shapes: &[Array2<F>]) -> Self {
        Adam {
            m: shapes.iter().map(|a| Array2::zeros(a.raw_dim())).collect(),
            v: shapes.iter().map(|a| Array2::zeros(a.raw_dim())).collect(),
            t: 0,
        }
    }

    pub fn step(
        &mut self,
        params: &mut [Array2<F>],
        grads: &[Option<Array2<F>>],
        lr: f64,
    ) {
        let b1 = F::from_f64(0.9);
        let b2 = F::from_f64(0.999);
        let eps = F::from_f64(1e-8);
        self.t += 1;
        let bc1 = F::from_f64(1.0 - 0.9f64.powi(self.t as i32));
        let bc2 = F::from_f64(1.0 - 0.999f64.powi(self.t as i32));
        let lr = F::from_f64(lr);
        for (i, g) in grads.iter().enumerate() {
            let Some(g) = g else { continue };
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            ndarray::Zip::from(m).and(v).and(&mut params[i]).and(g).for_each(
                |m, v, p, &g| {
                    *m = b1 * *m + (F::one() - b1) * g;
                    *v = b2 * *v + (F::one() - b2) * g * g;
                    let mh = *m / bc1;
                    let vh = *v / bc2;
                    *p -= lr * mh / (vh.sqrt() + eps);
                },
            );
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectorMode {
    Seq2Seq,
    Segmentation,
}

#[derive(Debug, Clone)]
pub struct CheckpointInfo {
    pub dir: PathBuf,
    pub iteration: usize,
    pub loss: f64,
    pub id_metric: f64,
    pub ood_metric: f64,
}

/// Best OOD metric wins; ties go to the earlier iteration.
pub fn select_model_on_ood(checkpoints: &[CheckpointInfo]) -> anyhow::Result<&CheckpointInfo> {
    checkpoints
        .iter()
        .max_by(|a, b| {
            a.ood_metric
                .partial_cmp(&b.ood_metric)
                .unwrap()
                .then(b.iteration.cmp(&a.iteration))
        })
        .ok_or_else(|| anyhow::anyhow!("no checkpoints recorded"))
}

pub const CHECKPOINT_EVERY: usize = 500;

fn seq2seq_pair(
    vocab: &Vocabulary,
    r: &SelectorExample,
) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let src = vocab.encode(&r.tokens).expect("train tokens in vocabulary");
    let tgt = vocab.encode(&r.target_leaf).expect("target tokens in vocabulary");
    let shifted: Vec<usize> = tgt.iter().map(|&t| t + 2).collect();
    let mut dec_in = vec![bos_id()];
    dec_in.extend(&shifted);
    let mut dec_out = shifted;
    dec_out.push(eos_id());
    (src, dec_in, dec_out)
}

fn char_pair(
    vocab: &Vocabulary,
    input: &str,
    target: &str,
) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let src = vocab.encode_chars(input).expect("train chars in vocabulary");
    let tgt = vocab.encode_chars(target).expect("target chars in vocabulary");
    let shifted: Vec<usize> = tgt.iter().map(|&t| t + 2).collect();
    let mut dec_in = vec![bos_id()];
    dec_in.extend(&shifted);
    let mut dec_out = shifted;
    dec_out.push(eos_id());
    (src, dec_in, dec_out)
}

fn batch_labels<F: Scalar>(
    model: &Transformer<F>,
    seqs: &[Vec<usize>],
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<usize>> {
    seqs.iter().map(|s| model.lpe.sample_labels(s.len(), rng)).collect()
}

/// One gradient step on a batch of (src, dec_in, dec_out) triples.
fn seq2seq_step<F: Scalar>(
    model: &Transformer<F>,
    batch: &[(Vec<usize>, Vec<usize>, Vec<usize>)],
    rng: &mut ChaCha8Rng,
) -> (f64, Vec<Option<Array2<F>>>) {
    let srcs: Vec<Vec<usize>> = batch.iter().map(|b| b.0.clone()).collect();
    let dec_ins: Vec<Vec<usize>> = batch.iter().map(|b| b.1.clone()).collect();
    let targets: Vec<usize> = batch.iter().flat_map(|b| b.2.clone()).collect();
    let src_labels = batch_labels(model, &srcs, rng);
    let tgt_labels = batch_labels(model, &dec_ins, rng);
    let mut fwd = Forward::new(model, true, Some(ChaCha8Rng::seed_from_u64(rng.gen())));
    let (memory, mem_off) = fwd.encode(&srcs, &src_labels);
    let (logits, _) = fwd.decode(memory, &mem_off, &dec_ins, &tgt_labels);
    let loss = fwd.tape.mean_cross_entropy(logits, &targets);
    let value = fwd.tape.value(loss)[(0, 0)].to_f64();
    let grads = fwd.tape.backward(loss, model.params.len());
    (value, grads)
}

fn segmentation_step<F: Scalar>(
    model: &Transformer<F>,
    batch: &[(Vec<usize>, Vec<bool>)],
    rng: &mut ChaCha8Rng,
) -> (f64, Vec<Option<Array2<F>>>) {
    let srcs: Vec<Vec<usize>> = batch.iter().map(|b| b.0.clone()).collect();
    let targets: Vec<F> = batch
        .iter()
        .flat_map(|b| b.1.iter().map(|&m| if m { F::one() } else { F::zero() }))
        .collect();
    let src_labels = batch_labels(model, &srcs, rng);
    let mut fwd = Forward::new(model, true, Some(ChaCha8Rng::seed_from_u64(rng.gen())));
    let (hidden, _) = fwd.encode(&srcs, &src_labels);
    let logits = fwd.classify_logits(hidden);
    let loss = fwd.tape.mean_bce(logits, &targets);
    let value = fwd.tape.value(loss)[(0, 0)].to_f64();
    let grads = fwd.tape.backward(loss, model.params.len());
    (value, grads)
}

fn greedy_exact_match<F: Scalar>(
    model: &Transformer<F>,
    pairs: &[(Vec<usize>, Vec<usize>)],
    rng: &mut ChaCha8Rng,
) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let mut hit = 0usize;
    for (src, expect) in pairs {
        let labels = model.lpe.sample_labels(src.len(), rng);
        let out = model.generate(src, &labels, expect.len() + 8, rng, None);
        if out.tokens == *expect {
            hit += 1;
        }
    }
    hit as f64 / pairs.len() as f64
}

fn exact_mask_rate<F: Scalar>(
    model: &Transformer<F>,
    pairs: &[(Vec<usize>, Vec<bool>)],
    rng: &mut ChaCha8Rng,
) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let mut hit = 0usize;
    for (src, expect) in pairs {
        let labels = model.lpe.sample_labels(src.len(), rng);
        let got = model.classify_tokens(src, &labels).decisions;
        if got == *expect {
            hit += 1;
        }
    }
    hit as f64 / pairs.len() as f64
}

fn subsample<T: Clone>(items: &[T], cap: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    if items.len() <= cap {
        return items.to_vec();
    }
    rand::seq::index::sample(rng, items.len(), cap)
        .into_iter()
        .map(|i| items[i].clone())
        .collect()
}

pub struct TrainOutcome {
    pub checkpoints: Vec<CheckpointInfo>,
    pub diverged: bool,
}

/// Stop once a checkpoint reaches both metric targets.
#[derive(Debug, Clone, Copy)]
pub struct EarlyStop {
    pub id_target: f64,
    pub ood_target: f64,
}

struct Logger {
    file: std::fs::File,
}

impl Logger {
    fn new(dir: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir)?;
        let mut file = std::fs::File::create(dir.join("metrics.csv"))?;
        writeln!(file, "iteration,loss,id_metric,ood_metric")?;
        Ok(Logger { file })
    }

    fn row(&mut self, iter: usize, loss: f64, id: f64, ood: f64) -> anyhow::Result<()> {
        writeln!(self.file, "{iter},{loss:.6},{id:.6},{ood:.6}")?;
        Ok(())
    }
}

fn write_checkpoint<F: Scalar>(
    out_dir: &Path,
    model: &Transformer<F>,
    kind: &str,
    domain: &str,
    vocab_hash: u64,
    info: &CheckpointInfo,
) -> anyhow::Result<()> {
    let manifest = CheckpointManifest {
        kind: kind.into(),
        domain: domain.into(),
        config: model.config.clone(),
        vocab_hash,
        iteration: info.iteration,
        metrics: BTreeMap::from([
            ("loss".to_string(), info.loss),
            ("id_metric".to_string(), info.id_metric),
            ("ood_metric".to_string(), info.ood_metric),
        ]),
        blob_version: 1,
        notes: BTreeMap::new(),
    };
    save_checkpoint(&info.dir, model, &manifest)?;
    let _ = out_dir;
    Ok(())
}

/// Train a Selector (either mode) on one or more domain datasets; more
/// than one dataset means multi-domain mixing, uniform over domains.
pub fn train_selector<F: Scalar>(
    datasets: &[&SelectorDataset],
    vocab: &Vocabulary,
    mut config: ModelConfig,
    opt: &OptimizerSpec,
    mode: SelectorMode,
    out_dir: &Path,
    seed: u64,
    eval_cap: usize,
    early_stop: Option<EarlyStop>,
) -> anyhow::Result<TrainOutcome> {
    config.src_vocab = vocab.len();
    config.tgt_vocab = match mode {
        SelectorMode::Seq2Seq => tgt_vocab_size(vocab),
        SelectorMode::Segmentation => 0,
    };
    let mut init_rng = ChaCha8Rng::seed_from_u64(substream(seed, 0));
    let mut model: Transformer<F> = Transformer::new(config, &mut init_rng);
    let mut adam = Adam::new(&model.params.values);
    let mut logger = Logger::new(out_dir)?;
    let domain = if datasets.len() == 1 { datasets[0].domain.name() } else { "multi" };
    let kind = match mode {
        SelectorMode::Seq2Seq => "selector-seq2seq",
        SelectorMode::Segmentation => "selector-segmentation",
    };

    // Pre-encode validation sets once.
    let mut val_rng = ChaCha8Rng::seed_from_u64(substream(seed, 1));
    let gather = |which: fn(&SelectorDataset) -> &Vec<SelectorExample>| -> Vec<SelectorExample> {
        datasets.iter().flat_map(|d| which(d).iter().cloned()).collect()
    };
    let id_val = subsample(&gather(|d| &d.id_val), eval_cap, &mut val_rng);
    let ood_val = subsample(&gather(|d| &d.ood_val), eval_cap, &mut val_rng);
    let seq_pairs = |rs: &[SelectorExample]| -> Vec<(Vec<usize>, Vec<usize>)> {
        rs.iter()
            .map(|r| {
                let (src, _, mut out) = seq2seq_pair(vocab, r);
                out.pop();
                (src, out)
            })
            .collect()
    };
    let mask_pairs = |rs: &[SelectorExample]| -> Vec<(Vec<usize>, Vec<bool>)> {
        rs.iter()
            .map(|r| (vocab.encode(&r.tokens).expect("covered"), r.mask.clone()))
            .collect()
    };

    let mut checkpoints = Vec::new();
    let mut last_loss = 0.0;
    for iter in 1..=opt.iterations {
        let mut rng = ChaCha8Rng::seed_from_u64(substream(seed, 100 + iter as u64));
        let mut batch_records: Vec<&SelectorExample> = Vec::with_capacity(opt.batch);
        for _ in 0..opt.batch {
            let ds = datasets[rng.gen_range(0..datasets.len())];
            // Uniform over nesting groups, then uniform within the group.
            let groups: Vec<&Vec<SelectorExample>> =
                ds.train_groups.iter().filter(|g| !g.is_empty()).collect();
            let g = groups[rng.gen_range(0..groups.len())];
            batch_records.push(&g[rng.gen_range(0..g.len())]);
        }
        let loss = match mode {
            SelectorMode::Seq2Seq => {
                let batch: Vec<_> =
                    batch_records.iter().map(|r| seq2seq_pair(vocab, r)).collect();
                let (loss, grads) = seq2seq_step(&model, &batch, &mut rng);
                adam.step(&mut model.params.values, &grads, lr_at(opt, iter));
                loss
            }
            SelectorMode::Segmentation => {
                let batch: Vec<_> = batch_records
                    .iter()
                    .map(|r| (vocab.encode(&r.tokens).expect("covered"), r.mask.clone()))
                    .collect();
                let (loss, grads) = segmentation_step(&model, &batch, &mut rng);
                adam.step(&mut model.params.values, &grads, lr_at(opt, iter));
                loss
            }
        };
        last_loss = loss;
        if loss.is_nan() {
            return Ok(TrainOutcome { checkpoints, diverged: true });
        }
        if iter % CHECKPOINT_EVERY == 0 || iter == opt.iterations {
            let mut erng = ChaCha8Rng::seed_from_u64(substream(seed, 7_000_000 + iter as u64));
            let (id, ood) = match mode {
                SelectorMode::Seq2Seq => (
                    greedy_exact_match(&model, &seq_pairs(&id_val), &mut erng),
                    greedy_exact_match(&model, &seq_pairs(&ood_val), &mut erng),
                ),
                SelectorMode::Segmentation => (
                    exact_mask_rate(&model, &mask_pairs(&id_val), &mut erng),
                    exact_mask_rate(&model, &mask_pairs(&ood_val), &mut erng),
                ),
            };
            logger.row(iter, loss, id, ood)?;
            let info = CheckpointInfo {
                dir: out_dir.join(format!("iter-{iter:06}")),
                iteration: iter,
                loss,
                id_metric: id,
                ood_metric: ood,
            };
            write_checkpoint(out_dir, &model, kind, domain, vocab.content_hash(), &info)?;
            let stop = early_stop
                .map(|e| info.id_metric >= e.id_target && info.ood_metric >= e.ood_target)
                .unwrap_or(false);
            checkpoints.push(info);
            if stop {
                break;
            }
        }
    }
    let _ = last_loss;
    Ok(TrainOutcome { checkpoints, diverged: false })
}

/// Train a Solver on (leaf, value) and (atomic, ω) pairs mixed 50/50.
pub fn train_solver<F: Scalar>(
    datasets: &[&SolverDataset],
    vocab: &Vocabulary,
    mut config: ModelConfig,
    opt: &OptimizerSpec,
    out_dir: &Path,
    seed: u64,
    eval_cap: usize,
    early_stop: Option<EarlyStop>,
) -> anyhow::Result<TrainOutcome> {
    config.src_vocab = vocab.len();
    config.tgt_vocab = tgt_vocab_size(vocab);
    let mut init_rng = ChaCha8Rng::seed_from_u64(substream(seed, 0));
    let mut model: Transformer<F> = Transformer::new(config, &mut init_rng);
    let mut adam = Adam::new(&model.params.values);
    let mut logger = Logger::new(out_dir)?;
    let domain = if datasets.len() == 1 { datasets[0].domain.name() } else { "multi" };

    let mut val_rng = ChaCha8Rng::seed_from_u64(substream(seed, 1));
    let id_val: Vec<(Vec<usize>, Vec<usize>)> = {
        let all: Vec<_> = datasets
            .iter()
            .flat_map(|d| d.id_val.iter())
            .map(|r| {
                let (src, _, mut out) = char_pair(vocab, &r.input, &r.target);
                out.pop();
                (src, out)
            })
            .collect();
        subsample(&all, eval_cap, &mut val_rng)
    };

    let mut checkpoints = Vec::new();
    for iter in 1..=opt.iterations {
        let mut rng = ChaCha8Rng::seed_from_u64(substream(seed, 100 + iter as u64));
        let mut batch = Vec::with_capacity(opt.batch);
        for _ in 0..opt.batch {
            let ds = datasets[rng.gen_range(0..datasets.len())];
            // Leaf and ω samples with equal probability.
            let r = if rng.gen_bool(0.5) && !ds.train_atomic.is_empty() {
                &ds.train_atomic[rng.gen_range(0..ds.train_atomic.len())]
            } else {
                &ds.train_leaf[rng.gen_range(0..ds.train_leaf.len())]
            };
            batch.push(char_pair(vocab, &r.input, &r.target));
        }
        let (loss, grads) = seq2seq_step(&model, &batch, &mut rng);
        adam.step(&mut model.params.values, &grads, lr_at(opt, iter));
        if loss.is_nan() {
            return Ok(TrainOutcome { checkpoints, diverged: true });
        }
        if iter % CHECKPOINT_EVERY == 0 || iter == opt.iterations {
            let mut erng = ChaCha8Rng::seed_from_u64(substream(seed, 7_000_000 + iter as u64));
            let id = greedy_exact_match(&model, &id_val, &mut erng);
            logger.row(iter, loss, id, id)?;
            let info = CheckpointInfo {
                dir: out_dir.join(format!("iter-{iter:06}")),
                iteration: iter,
                loss,
                id_metric: id,
                ood_metric: id,
            };
            write_checkpoint(out_dir, &model, "solver", domain, vocab.content_hash(), &info)?;
            let stop = early_stop
                .map(|e| info.id_metric >= e.id_target && info.ood_metric >= e.ood_target)
                .unwrap_or(false);
            checkpoints.push(info);
            if stop {
                break;
            }
        }
    }
    Ok(TrainOutcome { checkpoints, diverged: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{build_selector_dataset, build_solver_dataset, DatasetSizes};
    use crate::term::Domain;

    fn spec() -> OptimizerSpec {
        OptimizerSpec { lr: 1e-3, batch: 8, iterations: 2000, warmup: 100 }
    }

    #[test]
    fn schedule_warms_up_then_decays() {
        let s = spec();
        assert_eq!(lr_at(&s, 0), 0.0);
        assert!(lr_at(&s, 50) < lr_at(&s, 100));
        assert!((lr_at(&s, 100) - s.lr).abs() < 1e-12);
        let mut prev = lr_at(&s, 100);
        for iter in (200..=2000).step_by(100) {
            let cur = lr_at(&s, iter);
            assert!(cur < prev);
            prev = cur;
        }
        assert!(lr_at(&s, 2000) < 1e-9);
    }

    #[test]
    fn adam_descends_a_quadratic() {
        let mut params = vec![Array2::from_elem((1, 1), 5.0f64)];
        let mut adam = Adam::new(&params);
        for _ in 0..2000 {
            let g = vec![Some(Array2::from_elem((1, 1), 2.0 * params[0][(0, 0)]))];
            adam.step(&mut params, &g, 0.01);
        }
        assert!(params[0][(0, 0)].abs() < 1e-3);
    }

    #[test]
    fn ood_selection_prefers_best_then_earlier() {
        let mk = |iteration, ood_metric| CheckpointInfo {
            dir: PathBuf::from("x"),
            iteration,
            loss: 0.0,
            id_metric: 0.0,
            ood_metric,
        };
        let cps = vec![mk(500, 0.5), mk(1000, 0.9), mk(1500, 0.9), mk(2000, 0.7)];
        assert_eq!(select_model_on_ood(&cps).unwrap().iteration, 1000);
        assert_eq!(select_model_on_ood(&cps[..1]).unwrap().iteration, 500);
        assert!(select_model_on_ood(&[]).is_err());
    }

    #[test]
    fn batch_mixing_is_uniform_over_groups_and_solver_mix_is_half_omega() {
        let sizes = DatasetSizes {
            train_toplevel_per_nesting: 20,
            id_val_toplevel_per_nesting: 4,
            ood_val_total: 30,
            solver_train: 300,
            solver_val: 60,
            ..DatasetSizes::default()
        };
        let ds = build_solver_dataset(Domain::ListOps, &sizes, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 10_000usize;
        let mut omega = 0usize;
        for _ in 0..n {
            let pick_atomic = rng.gen_bool(0.5) && !ds.train_atomic.is_empty();
            if pick_atomic {
                omega += 1;
            }
        }
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((omega as f64 - n as f64 * 0.5).abs() < 3.0 * sigma);

        let sel = build_selector_dataset(Domain::ListOps, &sizes, 3);
        let groups: Vec<usize> = sel
            .train_groups
            .iter()
            .enumerate()
            .filter(|(_, g)| !g.is_empty())
            .map(|(i, _)| i)
            .collect();
        let mut counts = vec![0usize; sel.train_groups.len()];
        for _ in 0..n {
            let g = groups[rng.gen_range(0..groups.len())];
            counts[g] += 1;
        }
        let expect = n as f64 / groups.len() as f64;
        let sigma = (n as f64 * (1.0 / groups.len() as f64)
            * (1.0 - 1.0 / groups.len() as f64))
            .sqrt();
        for &g in &groups {
            assert!((counts[g] as f64 - expect).abs() < 4.0 * sigma);
        }
    }

    #[test]
    fn segmentation_training_fits_a_separable_toy_task() {
        // Tiny oracle sanity fit: marks of leaf tokens on short formulas.
        let sizes = DatasetSizes {
            train_toplevel_per_nesting: 60,
            id_val_toplevel_per_nesting: 10,
            ood_val_total: 24,
            ..DatasetSizes::default()
        };
        let ds = build_selector_dataset(Domain::ListOps, &sizes, 5);
        let vocab = Vocabulary::formula_level(Domain::ListOps);
        let config = ModelConfig {
            src_vocab: 0,
            tgt_vocab: 0,
            d_model: 32,
            enc_layers: 2,
            dec_layers: 0,
            heads: 4,
            dropout: 0.0,
            k: Some(1),
            n_positions: 256,
            gain: 1.0,
            bos: 0,
            eos: 1,
        };
        let opt = OptimizerSpec { lr: 2e-3, batch: 16, iterations: 500, warmup: 50 };
        let dir = tempfile::tempdir().unwrap();
        let out = train_selector::<f32>(
            &[&ds],
            &vocab,
            config,
            &opt,
            SelectorMode::Segmentation,
            dir.path(),
            11,
            40,
            None,
        )
        .unwrap();
        assert!(!out.diverged);
        let last = out.checkpoints.last().unwrap();
        assert!(last.loss < 0.3, "loss {}", last.loss);
        assert!(dir.path().join("metrics.csv").exists());
        assert!(last.dir.join("model.bin").exists());
    }

    #[test]
    fn training_is_reproducible_for_a_seed() {
        let sizes = DatasetSizes {
            train_toplevel_per_nesting: 20,
            id_val_toplevel_per_nesting: 4,
            ood_val_total: 12,
            ..DatasetSizes::default()
        };
        let ds = build_selector_dataset(Domain::ListOps, &sizes, 5);
        let vocab = Vocabulary::formula_level(Domain::ListOps);
        let config = ModelConfig {
            src_vocab: 0,
            tgt_vocab: 0,
            d_model: 16,
            enc_layers: 1,
            dec_layers: 0,
            heads: 2,
            dropout: 0.1,
            k: Some(1),
            n_positions: 128,
            gain: 1.0,
            bos: 0,
            eos: 1,
        };
        let opt = OptimizerSpec { lr: 1e-3, batch: 4, iterations: 40, warmup: 10 };
        let run = || {
            let dir = tempfile::tempdir().unwrap();
            train_selector::<f32>(
                &[&ds],
                &vocab,
                config.clone(),
                &opt,
                SelectorMode::Segmentation,
                dir.path(),
                9,
                10,
                None,
            )
            .unwrap()
            .checkpoints
            .last()
            .unwrap()
            .loss
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn solver_checkpoints_carry_exact_match_metrics() {
        let sizes = DatasetSizes {
            solver_train: 60,
            solver_val: 20,
            ..DatasetSizes::default()
        };
        let ds = build_solver_dataset(Domain::ListOps, &sizes, 3);
        let vocab = Vocabulary::character_level(Domain::ListOps);
        let config = ModelConfig {
            src_vocab: 0,
            tgt_vocab: 0,
            d_model: 16,
            enc_layers: 1,
            dec_layers: 1,
            heads: 2,
            dropout: 0.0,
            k: None,
            n_positions: 64,
            gain: 1.0,
            bos: 0,
            eos: 1,
        };
        let opt = OptimizerSpec { lr: 1e-3, batch: 8, iterations: 20, warmup: 5 };
        let dir = tempfile::tempdir().unwrap();
        let out =
            train_solver::<f32>(&[&ds], &vocab, config, &opt, dir.path(), 2, 10, None).unwrap();
        assert!(!out.checkpoints.is_empty());
        let cp = out.checkpoints.last().unwrap();
        assert!(cp.id_metric >= 0.0 && cp.id_metric <= 1.0);
        let m = crate::nn::load_manifest(&cp.dir).unwrap();
        assert_eq!(m.kind, "solver");
        assert_eq!(m.vocab_hash, vocab.content_hash());
    }
}
