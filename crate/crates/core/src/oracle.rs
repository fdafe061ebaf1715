//! Randomized DP-versus-enumeration check behind `oracle-check`.

use rand::Rng;
use serde::Serialize;

use crate::hss::{brute_force_match, monotonic_match, F1Matrix, BRUTE_FORCE_LIMIT};
use crate::rng;
use crate::{Error, Result};

/// Absolute tolerance between the DP and the enumeration.
pub const TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Mismatch {
    pub trial: usize,
    pub rows: usize,
    pub cols: usize,
    pub dp: f64,
    pub oracle: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleSummary {
    pub trials: usize,
    pub max_steps: usize,
    pub seed: u64,
    pub max_abs_error: f64,
    /// Trials whose backtracked alignment did not reproduce the DP score.
    pub alignment_failures: usize,
    pub mismatches: Vec<Mismatch>,
}

impl OracleSummary {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty() && self.alignment_failures == 0
    }
}

/// Runs `trials` random matrices with both sides drawn from `0..=max_steps`
/// and entries uniform in `[0, 1)`.
pub fn run_oracle_check(trials: usize, max_steps: usize, seed: u64) -> Result<OracleSummary> {
    if max_steps > BRUTE_FORCE_LIMIT {
        return Err(Error::BudgetExceeded {
            rows: max_steps,
            cols: max_steps,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut rng = rng::stream(seed, 0);
    let mut summary = OracleSummary {
        trials,
        max_steps,
        seed,
        max_abs_error: 0.0,
        alignment_failures: 0,
        mismatches: Vec::new(),
    };
    for trial in 0..trials {
        let rows = rng.gen_range(0..=max_steps);
        let cols = rng.gen_range(0..=max_steps);
        let f = F1Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.gen()).collect());
        let dp = monotonic_match(&f);
        let oracle = brute_force_match(&f)?;
        let err = (dp.score - oracle).abs();
        summary.max_abs_error = summary.max_abs_error.max(err);
        if err.is_nan() || err > TOLERANCE {
            summary.mismatches.push(Mismatch {
                trial,
                rows,
                cols,
                dp: dp.score,
                oracle,
            });
        }
        let monotone = dp.steps.windows(2).all(|w| w[0] <= w[1]);
        if !monotone || f.alignment_score(&dp.steps) != dp.score {
            summary.alignment_failures += 1;
        }
    }
    Ok(summary)
}
