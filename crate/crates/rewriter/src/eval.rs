//! End-to-end evaluation, the four-way error taxonomy, threshold
//! calibration, and report writing.

use crate::datagen::{substream, TestRecord};
use crate::engine::{
    run_fastnrs, run_nrs, ReplacementPolicy, RunStatus, RunTrace, SelectorConfig,
};
use crate::models::{LeafProposer, SegmentModel, SolveModel};
use crate::term::{apply_rule, Domain, Formula};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// Input-length threshold enabling dynamic windowing, per domain.
pub const fn default_window_threshold(domain: Domain) -> Option<usize> {
    match domain {
        Domain::ListOps | Domain::Algebra => Some(150),
        Domain::Arithmetic => Some(125),
        Domain::Logic => None,
    }
}

/// Minimum solver log-confidence for a replacement, per domain.
pub const fn default_solver_threshold(domain: Domain) -> f64 {
    match domain {
        Domain::ListOps => -6.0,
        Domain::Algebra => -3.0,
        Domain::Arithmetic => -2.0,
        Domain::Logic => -0.005,
    }
}

pub enum EngineHandle<'a> {
    Nrs {
        proposer: &'a dyn LeafProposer,
        solver: &'a dyn SolveModel,
        config: SelectorConfig,
    },
    FastNrs {
        segmenter: &'a dyn SegmentModel,
        solver: &'a dyn SolveModel,
        policy: ReplacementPolicy,
    },
}

impl EngineHandle<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            EngineHandle::Nrs { .. } => "nrs",
            EngineHandle::FastNrs { .. } => "fastnrs",
        }
    }

    pub fn run(&self, f: &Formula, seed: u64) -> RunTrace {
        match self {
            EngineHandle::Nrs { proposer, solver, config } => {
                run_nrs(f, *proposer, *solver, config, seed).1
            }
            EngineHandle::FastNrs { segmenter, solver, policy } => {
                run_fastnrs(f, *segmenter, *solver, policy, seed).1
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    Missing,
    Malformed,
    Solver,
    Timeout,
}

impl ErrorClass {
    pub fn name(self) -> &'static str {
        match self {
            ErrorClass::Missing => "missing",
            ErrorClass::Malformed => "malformed",
            ErrorClass::Solver => "solver",
            ErrorClass::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub class: ErrorClass,
    pub step: usize,
    pub payload: String,
}

/// Classify one failed run. Pure in (trace, oracle target): stored traces
/// re-classify byte-identically.
pub fn classify_error(trace: &RunTrace, oracle_target: &str) -> Option<ErrorRecord> {
    if trace.output.as_deref() == Some(oracle_target) {
        return None;
    }
    let last = trace.steps.len().saturating_sub(1);
    if trace.status == RunStatus::Missing {
        return Some(ErrorRecord {
            class: ErrorClass::Missing,
            step: last,
            payload: trace
                .steps
                .last()
                .and_then(|s| s.candidate.clone())
                .unwrap_or_default(),
        });
    }
    // A selection that is present in the input but does not re-parse as a
    // leaf poisons the run even when the visible symptom is the step
    // limit: malformed names the root cause.
    if let Some(step) = trace.steps.iter().find(|s| s.valid_leaf == Some(false)) {
        return Some(ErrorRecord {
            class: ErrorClass::Malformed,
            step: step.index,
            payload: step.candidate.clone().unwrap_or_default(),
        });
    }
    if trace.status == RunStatus::Timeout {
        return Some(ErrorRecord {
            class: ErrorClass::Timeout,
            step: last,
            payload: trace
                .steps
                .last()
                .map(|s| s.input.clone())
                .unwrap_or_default(),
        });
    }
    // Every selection was a valid leaf: blame the Solver.
    let step = trace
        .steps
        .iter()
        .find(|s| {
            let (Some(c), Some(out)) = (&s.candidate, &s.solver_output) else {
                return false;
            };
            match crate::term::parse(c, oracle_domain_of(trace)) {
                Ok(leaf) => match apply_rule(&leaf) {
                    Ok(v) => v.render() != *out,
                    Err(_) => true,
                },
                Err(_) => true,
            }
        })
        .or(trace.steps.last());
    Some(ErrorRecord {
        class: ErrorClass::Solver,
        step: step.map(|s| s.index).unwrap_or(0),
        payload: step
            .and_then(|s| s.solver_output.clone())
            .unwrap_or_default(),
    })
}

fn oracle_domain_of(trace: &RunTrace) -> Domain {
    // Traces do not store the domain; recover it from the input surface.
    for d in Domain::ALL {
        if crate::term::parse(&trace.input, d).is_ok() {
            return d;
        }
    }
    Domain::Arithmetic
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Cell {
    pub total: usize,
    pub correct: usize,
    pub missing: usize,
    pub malformed: usize,
    pub solver: usize,
    pub timeout: usize,
}

impl Cell {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Metrics {
    /// Keyed by (domain name, nesting level).
    pub cells: BTreeMap<(String, usize), Cell>,
}

impl Metrics {
    pub fn aggregate_accuracy(&self) -> f64 {
        let total: usize = self.cells.values().map(|c| c.total).sum();
        let correct: usize = self.cells.values().map(|c| c.correct).sum();
        if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        }
    }

    pub fn record_cell(&mut self, domain: Domain, nesting: usize, err: Option<&ErrorRecord>) {
        let cell = self
            .cells
            .entry((domain.name().to_string(), nesting))
            .or_default();
        cell.total += 1;
        match err {
            None => cell.correct += 1,
            Some(e) => match e.class {
                ErrorClass::Missing => cell.missing += 1,
                ErrorClass::Malformed => cell.malformed += 1,
                ErrorClass::Solver => cell.solver += 1,
                ErrorClass::Timeout => cell.timeout += 1,
            },
        }
    }
}

pub struct Evaluation {
    pub metrics: Metrics,
    pub traces: Vec<RunTrace>,
    pub errors: Vec<Option<ErrorRecord>>,
}

/// Run every test record through the engine; sequence accuracy is exact
/// match of the rendered output against the oracle target.
pub fn evaluate(handle: &EngineHandle, test: &[TestRecord], seed: u64) -> Evaluation {
    let mut metrics = Metrics::default();
    let mut traces = Vec::with_capacity(test.len());
    let mut errors = Vec::with_capacity(test.len());
    for (i, rec) in test.iter().enumerate() {
        let trace = handle.run(&rec.input, substream(seed, i as u64));
        let err = if trace.output.as_deref() == Some(rec.target.as_str()) {
            None
        } else {
            classify_error(&trace, &rec.target)
        };
        metrics.record_cell(rec.input.domain, rec.nesting, err.as_ref());
        traces.push(trace);
        errors.push(err);
    }
    Evaluation { metrics, traces, errors }
}

#[derive(Debug, Clone, Serialize)]
pub struct LengthBin {
    pub lo: usize,
    pub hi: usize,
    pub count: usize,
    pub mean_confidence: f64,
    pub under_sampled: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowCalibration {
    pub bins: Vec<LengthBin>,
    /// First bin whose mean drops below 90% of the shortest bin's mean;
    /// `None` means confidence stays flat and windowing is disabled.
    pub proposal: Option<usize>,
}

/// Bin (input length, selector confidence) samples and find the knee.
pub fn calibrate_windowing_threshold(
    samples: &[(usize, f64)],
    bin_width: usize,
) -> WindowCalibration {
    assert!(bin_width > 0);
    let mut grouped: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for &(len, c) in samples {
        grouped.entry(len / bin_width).or_default().push(c);
    }
    let bins: Vec<LengthBin> = grouped
        .iter()
        .map(|(&b, cs)| LengthBin {
            lo: b * bin_width,
            hi: (b + 1) * bin_width,
            count: cs.len(),
            mean_confidence: cs.iter().sum::<f64>() / cs.len() as f64,
            under_sampled: cs.len() < 10,
        })
        .collect();
    let proposal = bins.first().and_then(|short| {
        let floor = 0.9 * short.mean_confidence;
        bins.iter()
            .skip(1)
            .find(|b| b.mean_confidence < floor)
            .map(|b| b.lo)
    });
    WindowCalibration { bins, proposal }
}

pub fn write_window_csv(cal: &WindowCalibration, path: &Path) -> anyhow::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "length_lo,length_hi,count,mean_confidence,under_sampled")?;
    for b in &cal.bins {
        writeln!(
            f,
            "{},{},{},{:.6},{}",
            b.lo, b.hi, b.count, b.mean_confidence, b.under_sampled
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverCalibration {
    /// Lower 0.1% quantile of the observed log-confidences.
    pub quantile_proposal: f64,
    /// Shipped value: the domain default when one applies, else the proposal.
    pub theta: f64,
    pub histogram: Vec<(f64, f64, usize)>,
}

/// Propose θ from the training log-confidence distribution.
pub fn calibrate_solver_threshold(
    log_confidences: &[f64],
    domain: Option<Domain>,
) -> SolverCalibration {
    assert!(!log_confidences.is_empty());
    let mut sorted: Vec<f64> = log_confidences
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = ((sorted.len() as f64) * 0.001).floor() as usize;
    let quantile_proposal = sorted[idx.min(sorted.len() - 1)];
    let theta = match domain {
        Some(d) => default_solver_threshold(d),
        None => quantile_proposal,
    };
    let lo = sorted[0];
    let hi = *sorted.last().unwrap();
    let nbins = 30usize;
    let width = ((hi - lo) / nbins as f64).max(1e-12);
    let mut counts = vec![0usize; nbins];
    for &v in &sorted {
        let b = (((v - lo) / width) as usize).min(nbins - 1);
        counts[b] += 1;
    }
    let histogram = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (lo + i as f64 * width, lo + (i + 1) as f64 * width, c))
        .collect();
    SolverCalibration { quantile_proposal, theta, histogram }
}

pub fn write_solver_histogram_csv(
    cal: &SolverCalibration,
    path: &Path,
) -> anyhow::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "log_confidence_lo,log_confidence_hi,count,log10_count")?;
    for &(lo, hi, c) in &cal.histogram {
        let log10 = if c > 0 { format!("{:.4}", (c as f64).log10()) } else { String::new() };
        writeln!(f, "{lo:.6},{hi:.6},{c},{log10}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub engine: String,
    pub seed: u64,
    pub checkpoints: Vec<String>,
    pub window_threshold: Option<usize>,
    pub solver_threshold: Option<f64>,
    pub aggregate_accuracy: f64,
}

/// Write accuracy CSV, error-breakdown CSV, traces, and a run manifest.
pub fn report(
    evaluation: &Evaluation,
    manifest: &RunManifest,
    out_dir: &Path,
) -> anyhow::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut acc = std::fs::File::create(out_dir.join("accuracy.csv"))?;
    writeln!(acc, "domain,nesting,total,correct,accuracy")?;
    for ((domain, nesting), cell) in &evaluation.metrics.cells {
        writeln!(
            acc,
            "{},{},{},{},{:.4}",
            domain,
            nesting,
            cell.total,
            cell.correct,
            cell.accuracy()
        )?;
    }
    let mut err = std::fs::File::create(out_dir.join("errors.csv"))?;
    writeln!(err, "domain,nesting,missing,malformed,solver,timeout")?;
    for ((domain, nesting), cell) in &evaluation.metrics.cells {
        writeln!(
            err,
            "{},{},{},{},{},{}",
            domain, nesting, cell.missing, cell.malformed, cell.solver, cell.timeout
        )?;
    }
    let mut traces = std::fs::File::create(out_dir.join("traces.jsonl"))?;
    for t in &evaluation.traces {
        writeln!(traces, "{}", serde_json::to_string(t)?)?;
    }
    let json = serde_json::to_string_pretty(manifest)?;
    std::fs::write(out_dir.join("manifest.json"), json)?;
    Ok(())
}
