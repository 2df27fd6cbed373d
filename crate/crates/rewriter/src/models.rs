//! Selector/Solver module interfaces shared by both engines, with
//! symbolic oracle implementations, neural adapters and fault-injection
//! stubs for error-taxonomy tests.

use crate::nn::{sequence_confidence, ConfidenceMode, Transformer};
use crate::term::{apply_rule, Domain, Formula, Vocabulary, OMEGA};
use rand_chacha::ChaCha8Rng;

/// One sampled Selector candidate with per-token probabilities.
#[derive(Debug, Clone)]
pub struct SampledCandidate {
    pub tokens: Vec<String>,
    pub probs: Vec<f64>,
}

impl SampledCandidate {
    pub fn confidence(&self) -> f64 {
        sequence_confidence(&self.probs, ConfidenceMode::Product)
    }
}

/// Solver result: an atomic value rendering or ω.
#[derive(Debug, Clone)]
pub struct SolverOutput {
    pub text: String,
    pub log_confidence: f64,
}

impl SolverOutput {
    pub fn is_omega(&self) -> bool {
        self.text == OMEGA
    }
}

/// Seq2seq Selector: samples one leaf-formula candidate.
pub trait LeafProposer {
    fn propose(&self, f: &Formula, rng: &mut ChaCha8Rng) -> SampledCandidate;
}

/// Segmentation Selector: one binary decision per token.
pub trait SegmentModel {
    fn segment(&self, f: &Formula, rng: &mut ChaCha8Rng) -> Vec<bool>;
}

/// Solver: maps a leaf formula to its value, or ω for atomic input.
pub trait SolveModel {
    fn solve(&self, leaf: &Formula, rng: &mut ChaCha8Rng) -> SolverOutput;
}

// --- symbolic oracles ---

/// Emits the rightmost leaf span with probability 1 per token.
pub struct OracleProposer;

impl LeafProposer for OracleProposer {
    fn propose(&self, f: &Formula, _rng: &mut ChaCha8Rng) -> SampledCandidate {
        let spans = f.find_leaf_spans();
        let tokens = spans.last().expect("non-empty formula").tokens.clone();
        let probs = vec![1.0; tokens.len()];
        SampledCandidate { tokens, probs }
    }
}

/// Marks exactly the union of true leaf spans.
pub struct OracleSegmenter;

impl SegmentModel for OracleSegmenter {
    fn segment(&self, f: &Formula, _rng: &mut ChaCha8Rng) -> Vec<bool> {
        let mut mask = vec![false; f.len()];
        for span in f.find_leaf_spans() {
            for b in &mut mask[span.start..span.end] {
                *b = true;
            }
        }
        mask
    }
}

/// Applies the symbolic rewrite rules; full confidence on success, floor
/// confidence when no rule applies (so gates reject it).
pub struct OracleSolver;

impl SolveModel for OracleSolver {
    fn solve(&self, leaf: &Formula, _rng: &mut ChaCha8Rng) -> SolverOutput {
        match apply_rule(leaf) {
            Ok(v) => SolverOutput { text: v.render(), log_confidence: 0.0 },
            Err(_) => SolverOutput { text: leaf.render(), log_confidence: f64::NEG_INFINITY },
        }
    }
}

// --- fault-injection stubs (error-taxonomy tests) ---

/// Selector stub emitting a string absent from the input.
pub struct AbsentProposer;

impl LeafProposer for AbsentProposer {
    fn propose(&self, _f: &Formula, _rng: &mut ChaCha8Rng) -> SampledCandidate {
        let tokens = vec!["(".to_string(), "0".to_string(), ")".to_string()];
        SampledCandidate { probs: vec![1.0; tokens.len()], tokens }
    }
}

/// Selector stub whose candidate is present in the input but is not a
/// valid leaf formula (an off-by-one cut through a true leaf).
pub struct InvalidSpanProposer;

impl LeafProposer for InvalidSpanProposer {
    fn propose(&self, f: &Formula, _rng: &mut ChaCha8Rng) -> SampledCandidate {
        let span = f.find_leaf_spans().last().cloned().expect("non-empty formula");
        let (start, end) = if span.start > 0 {
            (span.start - 1, span.end - 1)
        } else if span.end < f.len() {
            (span.start + 1, span.end + 1)
        } else {
            (span.start, span.end.saturating_sub(1).max(span.start + 1))
        };
        let tokens = f.tokens[start..end].to_vec();
        SampledCandidate { probs: vec![1.0; tokens.len()], tokens }
    }
}

/// Segmenter stub whose runs cut through true leaves.
pub struct InvalidSpanSegmenter;

impl SegmentModel for InvalidSpanSegmenter {
    fn segment(&self, f: &Formula, rng: &mut ChaCha8Rng) -> Vec<bool> {
        let mut mask = OracleSegmenter.segment(f, rng);
        // Shift every run one token left, truncating runs at the front.
        let mut shifted = vec![false; mask.len()];
        for i in 1..mask.len() {
            shifted[i - 1] = mask[i];
        }
        if mask.len() > 1 {
            shifted[mask.len() - 1] = false;
        }
        mask.copy_from_slice(&shifted);
        mask
    }
}

/// Solver stub producing a confidently wrong value.
pub struct WrongSolver;

impl SolveModel for WrongSolver {
    fn solve(&self, leaf: &Formula, rng: &mut ChaCha8Rng) -> SolverOutput {
        let out = OracleSolver.solve(leaf, rng);
        if out.is_omega() {
            return out;
        }
        let wrong = match leaf.domain {
            Domain::Logic => {
                if out.text == "True" { "False".to_string() } else { "True".to_string() }
            }
            _ => {
                if out.text == "0" { "1".to_string() } else { "0".to_string() }
            }
        };
        SolverOutput { text: wrong, log_confidence: 0.0 }
    }
}

// --- neural adapters ---

const BOS: usize = 0;
const EOS: usize = 1;
const TGT_OFFSET: usize = 2;

/// Decoder-side token ids: 0 = BOS, 1 = EOS, vocabulary ids shifted by 2.
pub fn tgt_vocab_size(vocab: &Vocabulary) -> usize {
    vocab.len() + TGT_OFFSET
}

pub fn bos_id() -> usize {
    BOS
}

pub fn eos_id() -> usize {
    EOS
}

fn decode_tgt(vocab: &Vocabulary, ids: &[usize]) -> String {
    ids.iter()
        .filter(|&&id| id >= TGT_OFFSET)
        .map(|&id| vocab.surface(id - TGT_OFFSET))
        .collect()
}

/// Seq2seq transformer over the formula-level vocabulary; used as the
/// sampling Selector.
pub struct NeuralProposer {
    pub model: Transformer<f32>,
    pub vocab: Vocabulary,
    pub max_len: usize,
}

impl LeafProposer for NeuralProposer {
    fn propose(&self, f: &Formula, rng: &mut ChaCha8Rng) -> SampledCandidate {
        let ids = self
            .vocab
            .encode(&f.tokens)
            .expect("input covered by the selector vocabulary");
        use rand::{Rng, SeedableRng};
        let mut label_rng = ChaCha8Rng::seed_from_u64(rng.gen());
        let mut sample_rng = ChaCha8Rng::seed_from_u64(rng.gen());
        let labels = self.model.lpe.sample_labels(ids.len(), &mut label_rng);
        let out =
            self.model.generate(&ids, &labels, self.max_len, &mut label_rng, Some(&mut sample_rng));
        let tokens: Vec<String> = out
            .tokens
            .iter()
            .filter(|&&id| id >= TGT_OFFSET)
            .map(|&id| self.vocab.surface(id - TGT_OFFSET).to_string())
            .collect();
        SampledCandidate { tokens, probs: out.probs }
    }
}

/// Seq2seq transformer over the character-level vocabulary; greedy
/// decoding with log-sum confidence.
pub struct NeuralSolver {
    pub model: Transformer<f32>,
    pub vocab: Vocabulary,
    pub max_len: usize,
}

impl SolveModel for NeuralSolver {
    fn solve(&self, leaf: &Formula, rng: &mut ChaCha8Rng) -> SolverOutput {
        let ids = self
            .vocab
            .encode_chars(&leaf.render())
            .expect("input covered by the solver vocabulary");
        let labels = self.model.lpe.sample_labels(ids.len(), rng);
        let out = self.model.generate(&ids, &labels, self.max_len, rng, None);
        SolverOutput {
            text: decode_tgt(&self.vocab, &out.tokens),
            log_confidence: sequence_confidence(&out.probs, ConfidenceMode::LogSum),
        }
    }
}

/// Encoder-only transformer with a per-token classification head.
pub struct NeuralSegmenter {
    pub model: Transformer<f32>,
    pub vocab: Vocabulary,
}

impl SegmentModel for NeuralSegmenter {
    fn segment(&self, f: &Formula, rng: &mut ChaCha8Rng) -> Vec<bool> {
        let ids = self
            .vocab
            .encode(&f.tokens)
            .expect("input covered by the segmenter vocabulary");
        let labels = self.model.lpe.sample_labels(ids.len(), rng);
        self.model.classify_tokens(&ids, &labels).decisions
    }
}
