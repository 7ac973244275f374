//! Continual-learning evaluation metrics over an accuracy matrix: average
//! performance (AP), mean average performance (MAP), backward transfer
//! (BWT), and mean instruction following (MIF).
//!
//! `a[k][j]` is the accuracy on task `j` measured after training task `k`
//! (both 1-based here, matching the usual formulas); only the lower triangle
//! `j <= k` is defined. Accuracies are stored in percent, but the metric
//! functions are unit-agnostic arithmetic over whatever values are supplied.

use crate::error::{Error, Result};
use serde::Serialize;
use std::ops::Range;

/// Lower-triangular matrix of per-stage task accuracies.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AccuracyMatrix {
    /// `rows[k-1]` holds `a[k][1..=k]`.
    rows: Vec<Vec<f64>>,
}

impl AccuracyMatrix {
    pub fn new(num_tasks: usize) -> Result<Self> {
        if num_tasks == 0 {
            return Err(Error::Config("accuracy matrix needs at least one task".into()));
        }
        Ok(AccuracyMatrix {
            rows: (1..=num_tasks).map(|k| vec![f64::NAN; k]).collect(),
        })
    }

    /// Build directly from lower-triangular rows (`rows[i].len() == i + 1`).
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Config("accuracy matrix needs at least one task".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != i + 1 {
                return Err(Error::Shape(format!(
                    "row {} has {} entries, expected {}",
                    i + 1,
                    row.len(),
                    i + 1
                )));
            }
        }
        Ok(AccuracyMatrix { rows })
    }

    pub fn num_tasks(&self) -> usize {
        self.rows.len()
    }

    fn check_bounds(&self, stage: usize, task: usize) -> Result<()> {
        if stage < 1 || stage > self.rows.len() || task < 1 || task > stage {
            return Err(Error::Lookup(format!(
                "entry (stage {stage}, task {task}) outside the lower triangle of a {}-task matrix",
                self.rows.len()
            )));
        }
        Ok(())
    }

    pub fn set(&mut self, stage: usize, task: usize, value: f64) -> Result<()> {
        self.check_bounds(stage, task)?;
        self.rows[stage - 1][task - 1] = value;
        Ok(())
    }

    pub fn get(&self, stage: usize, task: usize) -> Result<f64> {
        self.check_bounds(stage, task)?;
        let v = self.rows[stage - 1][task - 1];
        if v.is_nan() {
            return Err(Error::State(format!(
                "entry (stage {stage}, task {task}) has not been recorded"
            )));
        }
        Ok(v)
    }

    /// Accuracies of row `stage` (`a[stage][1..=stage]`).
    pub fn row(&self, stage: usize) -> Result<&[f64]> {
        self.check_bounds(stage, stage)?;
        Ok(&self.rows[stage - 1])
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// `AP_k = (1/k) sum_{j<=k} a[k][j]`.
pub fn average_performance(m: &AccuracyMatrix, k: usize) -> Result<f64> {
    let row = m.row(k)?;
    if row.iter().any(|v| v.is_nan()) {
        return Err(Error::State(format!("stage {k} has unrecorded entries")));
    }
    Ok(row.iter().sum::<f64>() / k as f64)
}

/// `MAP_k = (1/k) sum_{i<=k} AP_i`.
pub fn mean_average_performance(m: &AccuracyMatrix, k: usize) -> Result<f64> {
    if k < 1 || k > m.num_tasks() {
        return Err(Error::Lookup(format!(
            "stage {k} out of range for {} tasks",
            m.num_tasks()
        )));
    }
    let mut total = 0.0;
    for i in 1..=k {
        total += average_performance(m, i)?;
    }
    Ok(total / k as f64)
}

/// `BWT_k = (1/(k-1)) sum_{j<k} (a[k][j] - a[j][j])`; negative values mean
/// forgetting.
pub fn backward_transfer(m: &AccuracyMatrix, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::Contract(
            "backward transfer needs at least two stages".into(),
        ));
    }
    let mut total = 0.0;
    for j in 1..k {
        total += m.get(k, j)? - m.get(j, j)?;
    }
    Ok(total / (k - 1) as f64)
}

/// Per-task binary output predicate: an output counts as well-formed for
/// task `j` when the predicted class id lies inside task `j`'s class range.
/// The predicate is total over class ids.
#[derive(Clone, Debug)]
pub struct MifChecker {
    ranges: Vec<Range<usize>>,
}

impl MifChecker {
    pub fn new(ranges: Vec<Range<usize>>) -> Self {
        MifChecker { ranges }
    }

    /// Contiguous blocks of `classes_per_task` ids, one per task.
    pub fn contiguous(num_tasks: usize, classes_per_task: usize) -> Self {
        MifChecker {
            ranges: (0..num_tasks)
                .map(|t| t * classes_per_task..(t + 1) * classes_per_task)
                .collect(),
        }
    }

    pub fn satisfied(&self, task: usize, output: usize) -> bool {
        self.ranges
            .get(task)
            .map(|r| r.contains(&output))
            .unwrap_or(false)
    }
}

/// `MIF_k = (1/k) sum_{j<=k} (1/n_j) sum_i B_j(o_i^j)`, in percent.
/// `outputs[j]` holds the predicted class ids for task `j` (0-based).
pub fn mean_instruction_following(
    outputs: &[Vec<usize>],
    checker: &MifChecker,
    k: usize,
) -> Result<f64> {
    if k < 1 || k > outputs.len() {
        return Err(Error::Contract(format!(
            "stage {k} out of range for {} prediction sets",
            outputs.len()
        )));
    }
    let mut total = 0.0;
    for (j, preds) in outputs.iter().take(k).enumerate() {
        if preds.is_empty() {
            return Err(Error::Contract(format!("task {j} has no outputs")));
        }
        let ok = preds.iter().filter(|&&o| checker.satisfied(j, o)).count();
        total += 100.0 * ok as f64 / preds.len() as f64;
    }
    Ok(total / k as f64)
}
