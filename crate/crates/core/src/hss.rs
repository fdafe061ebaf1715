//! Hierarchical sequential score.
//!
//! A prediction is compared with every ground-truth path of a [`PathSet`].
//! For each path the stepwise F1 matrix is reduced by [`monotonic_match`],
//! the best average F1 over all non-decreasing step alignments. The best
//! path's value is discounted by a length penalty
//! `exp(-alpha * (T_p - T_g)^2 / max(T_g, 1))`.
//!
//! EOS steps never enter the matrix or the step counts.

use serde::{Deserialize, Serialize};

use crate::mask::f1_score;
use crate::sampler::{MaskSequence, PathSet};
use crate::{Error, Result};

/// Largest side accepted by [`brute_force_match`].
pub const BRUTE_FORCE_LIMIT: usize = 8;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HssConfig {
    pub alpha: f64,
}

impl Default for HssConfig {
    fn default() -> Self {
        HssConfig { alpha: 0.1 }
    }
}

/// Row-major `rows x cols` matrix of stepwise F1 values.
#[derive(Clone, Debug, PartialEq)]
pub struct F1Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl F1Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        F1Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        F1Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> F1Matrix {
        F1Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().copied().map(f).collect(),
        }
    }

    /// Average of `F[i, alignment[i]]`, summed in row order.
    pub fn alignment_score(&self, alignment: &[usize]) -> f64 {
        if alignment.is_empty() {
            return 0.0;
        }
        let total = alignment
            .iter()
            .enumerate()
            .fold(0.0, |acc, (i, &j)| acc + self.get(i, j));
        total / alignment.len() as f64
    }
}

pub fn f1_matrix(pred: &MaskSequence, gt: &MaskSequence) -> Result<F1Matrix> {
    let pred: Vec<_> = pred.masks().collect();
    let gt: Vec<_> = gt.masks().collect();
    let mut data = Vec::with_capacity(pred.len() * gt.len());
    for p in &pred {
        for g in &gt {
            data.push(f1_score(p, g)?);
        }
    }
    Ok(F1Matrix::new(pred.len(), gt.len(), data))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    pub score: f64,
    /// 0-based ground-truth step for each prediction step; non-decreasing.
    pub steps: Vec<usize>,
}

/// Best average F1 over non-decreasing maps from prediction steps to
/// ground-truth steps.
///
/// `D[i][j] = F[i][j] + max_{k <= j} D[i-1][k]`, answer `max_j D[T_p-1][j] / T_p`.
/// Returns 0 with an empty alignment when either side has no steps.
/// Backtracking prefers the smallest ground-truth index on ties.
pub fn monotonic_match(f: &F1Matrix) -> Alignment {
    let (tp, tg) = (f.rows(), f.cols());
    if tp == 0 || tg == 0 {
        return Alignment {
            score: 0.0,
            steps: Vec::new(),
        };
    }
    let mut table = vec![0.0f64; tp * tg];
    table[..tg].copy_from_slice(&f.data[..tg]);
    for i in 1..tp {
        let mut best_prev = f64::NEG_INFINITY;
        for j in 0..tg {
            best_prev = best_prev.max(table[(i - 1) * tg + j]);
            table[i * tg + j] = f.get(i, j) + best_prev;
        }
    }
    let argmax_upto = |row: usize, upto: usize| {
        let cells = &table[row * tg..row * tg + upto + 1];
        let mut best = 0;
        for (k, &v) in cells.iter().enumerate() {
            if v > cells[best] {
                best = k;
            }
        }
        best
    };
    let mut steps = vec![0; tp];
    steps[tp - 1] = argmax_upto(tp - 1, tg - 1);
    for i in (1..tp).rev() {
        steps[i - 1] = argmax_upto(i - 1, steps[i]);
    }
    Alignment {
        score: table[(tp - 1) * tg + steps[tp - 1]] / tp as f64,
        steps,
    }
}

/// Exhaustive maximum over every non-decreasing alignment. Reference for
/// [`monotonic_match`]; only small matrices are accepted.
pub fn brute_force_match(f: &F1Matrix) -> Result<f64> {
    let (tp, tg) = (f.rows(), f.cols());
    if tp > BRUTE_FORCE_LIMIT || tg > BRUTE_FORCE_LIMIT {
        return Err(Error::BudgetExceeded {
            rows: tp,
            cols: tg,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if tp == 0 || tg == 0 {
        return Ok(0.0);
    }
    fn walk(f: &F1Matrix, i: usize, lo: usize, sum: f64, best: &mut f64) {
        if i == f.rows() {
            *best = best.max(sum);
            return;
        }
        for j in lo..f.cols() {
            walk(f, i + 1, j, sum + f.get(i, j), best);
        }
    }
    let mut best = f64::NEG_INFINITY;
    walk(f, 0, 0, 0.0, &mut best);
    Ok(best / tp as f64)
}

pub fn length_penalty(t_p: usize, t_g: usize, cfg: &HssConfig) -> f64 {
    let diff = t_p as f64 - t_g as f64;
    (-cfg.alpha * diff * diff / t_g.max(1) as f64).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HssReport {
    pub per_path_scores: Vec<f64>,
    pub best_path_index: usize,
    pub f1_match: f64,
    pub t_p: usize,
    pub t_g: usize,
    pub lambda: f64,
    pub score: f64,
    /// Best path's alignment, 0-based ground-truth step per prediction step.
    pub alignment: Vec<usize>,
}

fn check_dims(pred: &MaskSequence, gt: &MaskSequence) -> Result<()> {
    if let (Some(a), Some(b)) = (pred.dims(), gt.dims()) {
        if a != b {
            return Err(Error::dims(a, b));
        }
    }
    Ok(())
}

pub fn hss_score(pred: &MaskSequence, paths: &PathSet, cfg: &HssConfig) -> Result<HssReport> {
    if paths.is_empty() {
        return Err(Error::EmptyPathSet);
    }
    let mut matches = Vec::with_capacity(paths.len());
    for gt in &paths.sequences {
        check_dims(pred, gt)?;
        matches.push(monotonic_match(&f1_matrix(pred, gt)?));
    }
    let mut best = 0;
    for (i, m) in matches.iter().enumerate() {
        if m.score > matches[best].score {
            best = i;
        }
    }
    let t_p = pred.content_len();
    let t_g = paths.sequences[best].content_len();
    let lambda = length_penalty(t_p, t_g, cfg);
    let f1_match = matches[best].score;
    Ok(HssReport {
        per_path_scores: matches.iter().map(|m| m.score).collect(),
        best_path_index: best,
        f1_match,
        t_p,
        t_g,
        lambda,
        score: lambda * f1_match,
        alignment: matches.swap_remove(best).steps,
    })
}
