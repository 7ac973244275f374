//! The experiment report: a machine-readable JSON document, a human-readable
//! text rendering, and the CSV exports.
//!
//! Everything in the report is a pure function of the configuration and
//! seed, so sequential reruns produce byte-identical files. Wall-clock
//! timings are deliberately kept out of the report and written to a separate
//! `timing.txt`.

use crate::analysis::{EfficiencyReport, FusionReport, SimilarityHeatmap};
use crate::cli::config::ExperimentConfig;
use crate::error::Result;
use crate::metrics::AccuracyMatrix;
use crate::persist::atomic_write;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Metrics and artifacts of one run section (one strategy / grid point).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SectionReport {
    pub label: String,
    /// Filename-safe form of the label, used in artifact names.
    pub file_label: String,
    pub strategy: String,
    pub rank: usize,
    pub task_rank: usize,
    pub lambda: f64,
    /// Lower-triangular rows of `a[k][j]`, percent.
    pub accuracy_matrix: Vec<Vec<f64>>,
    /// `AP_1..AP_K`.
    pub ap_per_stage: Vec<f64>,
    /// `MAP_1..MAP_K`.
    pub map_per_stage: Vec<f64>,
    /// `BWT_2..BWT_K`.
    pub bwt_per_stage: Vec<f64>,
    /// `MIF_1..MIF_K`.
    pub mif_per_stage: Vec<f64>,
    pub final_ap: f64,
    pub final_map: f64,
    /// `BWT_K`; 0 for a single-task run.
    pub final_bwt: f64,
    pub final_mif: f64,
    pub final_train_accuracy_per_task: Vec<f64>,
    /// Fusion-coefficient table (lilora family only).
    pub fusion: Option<FusionReport>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Versions {
    pub crate_version: String,
    pub report_schema: u32,
    pub suite_format: u16,
    pub container_format: u16,
}

/// Top-level report document.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub base_accuracy: f64,
    pub backbone_checksum: u32,
    pub sections: Vec<SectionReport>,
    pub efficiency: EfficiencyReport,
    pub versions: Versions,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Human-readable rendering of the same content.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let push = |out: &mut String, line: String| {
            out.push_str(&line);
            out.push('\n');
        };
        push(&mut out, format!("experiment report (schema {})", self.schema_version));
        push(&mut out, format!("seed: {}", self.config.seed));
        push(
            &mut out,
            format!(
                "suite: {} tasks x {} classes, d_in {}, sigma {}",
                self.config.suite.tasks,
                self.config.suite.classes_per_task,
                self.config.suite.d_in,
                self.config.suite.sigma
            ),
        );
        push(
            &mut out,
            format!("base accuracy: {:.2}%", 100.0 * self.base_accuracy),
        );
        push(&mut out, String::new());
        for s in &self.sections {
            push(&mut out, format!("== section {} ==", s.label));
            push(
                &mut out,
                format!(
                    "strategy {} | rank {} | task rank {} | lambda {}",
                    s.strategy, s.rank, s.task_rank, s.lambda
                ),
            );
            push(&mut out, "accuracy matrix (rows: after task k):".into());
            for (k, row) in s.accuracy_matrix.iter().enumerate() {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:7.2}")).collect();
                push(&mut out, format!("  k={:<2} {}", k + 1, cells.join(" ")));
            }
            push(
                &mut out,
                format!(
                    "final: AP {:.2} | MAP {:.2} | BWT {:+.2} | MIF {:.2}",
                    s.final_ap, s.final_map, s.final_bwt, s.final_mif
                ),
            );
            if let Some(f) = &s.fusion {
                let means: Vec<String> = f
                    .mean_after
                    .iter()
                    .map(|v| format!("{v:.3}"))
                    .collect();
                push(&mut out, format!("alpha means after training: {}", means.join(" ")));
            }
            push(&mut out, String::new());
        }
        push(&mut out, "== efficiency ==".into());
        push(
            &mut out,
            format!("parameters with {} tasks:", self.efficiency.num_tasks),
        );
        for row in &self.efficiency.rows {
            push(
                &mut out,
                format!(
                    "  {:<22} shared {:>8} per-task {:>8} total {:>9}",
                    row.strategy, row.shared, row.per_task, row.total
                ),
            );
        }
        push(
            &mut out,
            format!(
                "lilora/dir-lora per-task ratio: {:.4} (reference-scale anchor {:.4})",
                self.efficiency.lilora_dirlora_per_task_ratio,
                self.efficiency.reference_per_task_ratio
            ),
        );
        out
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        atomic_write(&dir.join("report.json"), self.to_json().as_bytes())?;
        atomic_write(&dir.join("report.txt"), self.to_text().as_bytes())?;
        Ok(())
    }
}

/// CSV of an accuracy matrix: header row of task ids, one row per stage.
/// '.' decimal separators, LF line endings.
pub fn accuracy_matrix_csv(m: &AccuracyMatrix) -> String {
    let k = m.num_tasks();
    let mut out = String::from("stage");
    for j in 0..k {
        out.push_str(&format!(",task{j}"));
    }
    out.push('\n');
    for (i, row) in m.rows().iter().enumerate() {
        out.push_str(&format!("{}", i + 1));
        for j in 0..k {
            if j < row.len() {
                out.push_str(&format!(",{:.6}", row[j]));
            } else {
                out.push(',');
            }
        }
        out.push('\n');
    }
    out
}

/// CSV of a similarity heatmap; header row and column are task ids.
pub fn heatmap_csv(map: &SimilarityHeatmap) -> String {
    let k = map.num_tasks();
    let mut out = String::new();
    for j in 0..k {
        out.push_str(&format!(",task{j}"));
    }
    out.push('\n');
    for (i, row) in map.values.iter().enumerate() {
        out.push_str(&format!("task{i}"));
        for v in row {
            out.push_str(&format!(",{v:.6}"));
        }
        out.push('\n');
    }
    out
}

/// CSV of the fusion-coefficient table.
pub fn fusion_csv(report: &FusionReport) -> String {
    let mut out = String::from("task,layer,alpha_before,alpha_after\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{:.6},{:.6}\n",
            row.task, row.layer, row.alpha_before, row.alpha_after
        ));
    }
    for (t, (b, a)) in report
        .mean_before
        .iter()
        .zip(report.mean_after.iter())
        .enumerate()
    {
        out.push_str(&format!("{t},mean,{b:.6},{a:.6}\n"));
    }
    out
}

/// CSV of the efficiency table.
pub fn efficiency_csv(report: &EfficiencyReport) -> String {
    let mut out = String::from("strategy,shared,per_task,total\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.strategy, row.shared, row.per_task, row.total
        ));
    }
    out.push_str(&format!(
        "lilora_dirlora_per_task_ratio,{:.6},,\n",
        report.lilora_dirlora_per_task_ratio
    ));
    out.push_str(&format!(
        "reference_per_task_ratio,{:.6},,\n",
        report.reference_per_task_ratio
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_csv_uses_dots_and_lf() {
        let mut m = AccuracyMatrix::new(2).unwrap();
        m.set(1, 1, 50.5).unwrap();
        m.set(2, 1, 40.25).unwrap();
        m.set(2, 2, 90.0).unwrap();
        let csv = accuracy_matrix_csv(&m);
        assert!(csv.contains("50.500000"));
        assert!(!csv.contains('\r'));
        assert_eq!(csv.lines().count(), 3);
    }
}
