//! Quartet split scoring by low-rank residuals of flattenings.

use nalgebra::DMatrix;
use serde::Serialize;

use super::PipelineError;
use crate::exact::Rat;
use crate::invariants::{flatten, flattening_rank, NamedVariety};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitScore {
    pub split: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitScores {
    pub rank: usize,
    pub scores: Vec<SplitScore>,
    /// Splits attaining the minimum score; more than one on ties.
    pub best: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuartetReport {
    pub labels: Vec<String>,
    pub sites: u64,
    #[serde(flatten)]
    pub scores: SplitScores,
}

fn split_name(v: NamedVariety, labels: &[String]) -> String {
    let s = v.split();
    let side = |ix: &[usize]| ix.iter().map(|&i| labels[i].as_str()).collect::<Vec<_>>().join(",");
    format!("{}|{}", side(&s.below), side(&s.above))
}

fn quartet_k(len: usize) -> Result<usize, PipelineError> {
    (2..=10).find(|k: &usize| k.pow(4) == len).ok_or_else(|| PipelineError::Shape(format!("{len} entries is not a four-leaf tensor")))
}

/// Frobenius norm of what remains of each quartet flattening after its
/// best rank-`r` approximation. Singular values below `1e-12` times the
/// largest count as zero.
pub fn score_splits(tensor: &[f64], labels: &[String], r: usize) -> Result<SplitScores, PipelineError> {
    let k = quartet_k(tensor.len())?;
    if labels.len() != 4 {
        return Err(PipelineError::Shape(format!("need 4 labels, got {}", labels.len())));
    }
    if r >= k * k {
        return Err(PipelineError::Shape(format!("rank {r} is not below the flattening size {}", k * k)));
    }
    if tensor.iter().all(|&x| x == 0.0) || tensor.iter().any(|x| !x.is_finite()) {
        return Err(PipelineError::Degenerate("tensor is zero or not finite".into()));
    }
    let mut scores = Vec::new();
    for v in NamedVariety::ALL {
        let m = flatten(tensor, k, &v.split()).expect("shape checked");
        let dm = DMatrix::from_fn(m.rows(), m.cols(), |i, j| *m.get(i, j));
        let mut sv: Vec<f64> = dm.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        let cutoff = 1e-12 * sv[0];
        let residual: f64 = sv.iter().skip(r).filter(|&&s| s > cutoff).fold(0.0, |acc, s| acc + s * s).sqrt();
        scores.push(SplitScore { split: split_name(v, labels), score: residual });
    }
    let min = scores.iter().map(|s| s.score).fold(f64::INFINITY, f64::min);
    let max = scores.iter().map(|s| s.score).fold(0.0, f64::max);
    let tol = 1e-9 * max.max(f64::MIN_POSITIVE);
    let best = scores.iter().filter(|s| s.score - min <= tol).map(|s| s.split.clone()).collect();
    Ok(SplitScores { rank: r, scores, best })
}

/// Exact rank of each quartet flattening.
pub fn exact_split_ranks(tensor: &[Rat], labels: &[String]) -> Result<Vec<(String, usize)>, PipelineError> {
    let k = quartet_k(tensor.len())?;
    Ok(NamedVariety::ALL
        .iter()
        .map(|&v| (split_name(v, labels), flattening_rank(tensor, k, &v.split()).expect("shape checked")))
        .collect())
}
