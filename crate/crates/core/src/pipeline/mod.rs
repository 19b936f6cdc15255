//! Numeric workflows: exact distributions, simulation, empirical tensors
//! and quartet split scoring.
//!
//! Simulation uses ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! `seed_from_u64(seed)`; site `i` draws from stream `i`, so alignments
//! are identical across platforms and independent of the worker count.

pub mod score;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use num_traits::Zero;

use crate::exact::rat::to_f64;
use crate::exact::{ExactError, Rat};
use crate::models::{validate_stochastic, ModelError, ParamAssignment};
use crate::paramap::{state_char, state_index, JointMap, LeafPattern};

pub use score::{exact_split_ranks, score_splits, QuartetReport, SplitScore, SplitScores};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum PipelineError {
    #[error("parameters are not stochastic: {0}")]
    NotStochastic(String),
    #[error("bad shape: {0}")]
    Shape(String),
    #[error("numerically degenerate input: {0}")]
    Degenerate(String),
    #[error("FASTA line {line}: {msg}")]
    Fasta { line: usize, msg: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Exact(#[from] ExactError),
}

impl PipelineError {
    /// `true` for errors caused by malformed input rather than numerics.
    pub fn is_validation(&self) -> bool {
        !matches!(self, PipelineError::Degenerate(_))
    }
}

/// Exact pattern probabilities. Rejects non-stochastic parameters.
pub fn exact_distribution(map: &JointMap, params: &ParamAssignment) -> Result<Vec<Rat>, PipelineError> {
    let report = validate_stochastic(map.model(), params)?;
    if !report.is_stochastic() {
        let rows: Vec<String> =
            report.rows.iter().filter(|r| !r.sums_to_one).map(|r| format!("edge {} row {} sums to {}", r.edge, r.row, r.sum)).collect();
        let mut parts = rows;
        if !report.out_of_range.is_empty() {
            parts.push(format!("outside [0,1]: {}", report.out_of_range.join(", ")));
        }
        if report.root_sums_to_one == Some(false) {
            parts.push("root distribution does not sum to 1".into());
        }
        return Err(PipelineError::NotStochastic(parts.join("; ")));
    }
    Ok(map.eval_exact(params)?)
}

/// Aligned sequences over the model alphabet, stored as state indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub k: usize,
    pub labels: Vec<String>,
    /// `seqs[taxon][site]`.
    pub seqs: Vec<Vec<u8>>,
}

impl Alignment {
    pub fn len(&self) -> usize {
        self.seqs.first().map_or(0, |s| s.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pattern(&self, site: usize) -> LeafPattern {
        LeafPattern { k: self.k, states: self.seqs.iter().map(|s| s[site] as usize).collect() }
    }

    pub fn to_fasta(&self) -> String {
        let mut out = String::new();
        for (label, seq) in self.labels.iter().zip(&self.seqs) {
            out.push('>');
            out.push_str(label);
            out.push('\n');
            let text: String = seq.iter().map(|&s| state_char(self.k, s as usize)).collect();
            for chunk in text.as_bytes().chunks(60) {
                out.push_str(std::str::from_utf8(chunk).expect("ascii"));
                out.push('\n');
            }
        }
        out
    }

    /// Parses aligned FASTA over `ACGT` (k = 4) or digits (k = 2).
    pub fn from_fasta(text: &str, k: usize) -> Result<Alignment, PipelineError> {
        let mut labels = Vec::new();
        let mut seqs: Vec<Vec<u8>> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(label) = line.strip_prefix('>') {
                let label = label.split_whitespace().next().unwrap_or("");
                if label.is_empty() {
                    return Err(PipelineError::Fasta { line: i + 1, msg: "empty sequence name".into() });
                }
                labels.push(label.to_string());
                seqs.push(Vec::new());
                continue;
            }
            let seq = seqs.last_mut().ok_or(PipelineError::Fasta { line: i + 1, msg: "sequence before header".into() })?;
            for c in line.chars() {
                let s = state_index(k, c)
                    .ok_or_else(|| PipelineError::Fasta { line: i + 1, msg: format!("character '{c}' not in the alphabet") })?;
                seq.push(s as u8);
            }
        }
        if seqs.is_empty() {
            return Err(PipelineError::Fasta { line: 0, msg: "no sequences".into() });
        }
        if seqs.iter().any(|s| s.len() != seqs[0].len()) {
            return Err(PipelineError::Fasta { line: 0, msg: "sequences have different lengths".into() });
        }
        Ok(Alignment { k, labels, seqs })
    }
}

/// Draws `length` independent site patterns from the exact distribution by
/// inverse CDF.
pub fn sample_alignment(
    map: &JointMap,
    params: &ParamAssignment,
    length: usize,
    seed: u64,
) -> Result<Alignment, PipelineError> {
    let dist = exact_distribution(map, params)?;
    let model = map.model();
    let m = model.observed_nodes().len();
    // Cumulative sums taken exactly, then rounded once.
    let mut acc = Rat::zero();
    let cdf: Vec<f64> = dist
        .iter()
        .map(|p| {
            acc += p;
            to_f64(&acc)
        })
        .collect();
    let draw = |site: usize| -> usize {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(site as u64);
        let u: f64 = rng.random();
        cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
    };
    let workers = std::thread::available_parallelism().map_or(1, |w| w.get()).clamp(1, 16);
    let chunk = length.div_ceil(workers).max(1);
    let mut flat = vec![0usize; length];
    std::thread::scope(|s| {
        for (c, out) in flat.chunks_mut(chunk).enumerate() {
            let draw = &draw;
            s.spawn(move || {
                for (j, x) in out.iter_mut().enumerate() {
                    *x = draw(c * chunk + j);
                }
            });
        }
    });
    let mut seqs = vec![Vec::with_capacity(length); m];
    for idx in flat {
        for (t, s) in LeafPattern::from_flat(idx, model.k, m).states.into_iter().enumerate() {
            seqs[t].push(s as u8);
        }
    }
    let mut labels: Vec<String> = model.tree.leaf_labels().iter().map(|s| s.to_string()).collect();
    for v in model.observed_nodes().iter().skip(labels.len()) {
        labels.push(format!("node{v}"));
    }
    Ok(Alignment { k: model.k, labels, seqs })
}

/// Pattern counts of an alignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalTensor {
    pub k: usize,
    pub n: usize,
    pub counts: Vec<u64>,
    pub length: u64,
}

impl EmpiricalTensor {
    pub fn from_alignment(a: &Alignment) -> EmpiricalTensor {
        let n = a.seqs.len();
        let mut counts = vec![0u64; a.k.pow(n as u32)];
        for site in 0..a.len() {
            counts[a.pattern(site).flat()] += 1;
        }
        EmpiricalTensor { k: a.k, n, counts, length: a.len() as u64 }
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.length.max(1) as f64).collect()
    }

    pub fn frequencies_exact(&self) -> Vec<Rat> {
        self.counts.iter().map(|&c| Rat::new(c.into(), self.length.max(1).into())).collect()
    }

    /// `index,count,frequency` rows for every pattern.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,count,frequency\n");
        for (i, (c, f)) in self.counts.iter().zip(self.frequencies()).enumerate() {
            s.push_str(&format!("{i},{c},{f}\n"));
        }
        s
    }
}

/// Total-variation distance `½ Σ |f - p|`.
pub fn tv_distance(freq: &[f64], exact: &[Rat]) -> f64 {
    0.5 * freq.iter().zip(exact).map(|(f, p)| (f - to_f64(p)).abs()).sum::<f64>()
}
