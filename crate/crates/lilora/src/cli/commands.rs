//! The three experiment commands: `pretrain`, `run`, and `analyze`.

use crate::adapters::AdapterBank;
use crate::analysis::{
    adapter_heatmap, efficiency_report, fusion_report, mean_heatmap, MatrixKind, SimilarityKind,
};
use crate::backbone::{pretrain_backbone, Backbone, PretrainConfig};
use crate::cli::config::{ExperimentConfig, RunSectionPlan};
use crate::cli::report::{
    accuracy_matrix_csv, efficiency_csv, fusion_csv, heatmap_csv, ExperimentReport, SectionReport,
    Versions,
};
use crate::continual::{run_continual, ContinualRun};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};
use crate::metrics::{
    average_performance, backward_transfer, mean_average_performance,
    mean_instruction_following, MifChecker,
};
use crate::persist::{atomic_write, TensorContainer};
use crate::taskgen::{generate_suite, load_suite, save_suite, TaskSuite};
use std::path::{Path, PathBuf};

pub const SUITE_FILE: &str = "suite.llts";
pub const BACKBONE_FILE: &str = "backbone.lltc";
pub const CONFIG_ECHO_FILE: &str = "config.toml";

/// Generate the suite, pretrain and freeze the backbone, and write both
/// checkpoints plus the base-accuracy record.
pub fn cmd_pretrain(cfg: &ExperimentConfig) -> Result<f64> {
    cfg.validate()?;
    let out = Path::new(&cfg.out_dir);
    std::fs::create_dir_all(out)?;
    atomic_write(&out.join(CONFIG_ECHO_FILE), cfg.to_toml().as_bytes())?;

    let suite = generate_suite(cfg.suite_params()?)?;
    save_suite(&suite, &out.join(SUITE_FILE))?;

    let pretrain_cfg = PretrainConfig {
        hidden: cfg.backbone.hidden.clone(),
        epochs: cfg.backbone.pretrain_epochs,
        learning_rate: cfg.backbone.pretrain_learning_rate,
        batch_size: cfg.backbone.pretrain_batch_size,
    };
    let mut rng = Rng::from_seed(cfg.pretrain_seed());
    let (backbone, base_accuracy) = pretrain_backbone(
        &suite.base_train,
        &suite.base_test,
        suite.total_classes(),
        &pretrain_cfg,
        &mut rng,
    )?;

    let mut entries = backbone.to_named_tensors();
    entries.push(("meta/base_accuracy".into(), Matrix::scalar(base_accuracy)));
    TensorContainer::from_entries(entries).save(&out.join(BACKBONE_FILE))?;
    Ok(base_accuracy)
}

fn load_run_inputs(cfg: &ExperimentConfig) -> Result<(TaskSuite, Backbone, f64)> {
    let out = Path::new(&cfg.out_dir);
    let suite_path = out.join(SUITE_FILE);
    let backbone_path = out.join(BACKBONE_FILE);
    let missing: Vec<String> = [&suite_path, &backbone_path]
        .iter()
        .filter(|p| !p.exists())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::State(format!(
            "missing pretraining artifacts: {}; run `lilora pretrain` first",
            missing.join(", ")
        )));
    }
    let suite = load_suite(&suite_path)?;
    let expected = cfg.suite_params()?;
    if suite.params != expected {
        return Err(Error::Config(format!(
            "suite at {} was generated with different parameters; rerun `lilora pretrain`",
            suite_path.display()
        )));
    }
    let container = TensorContainer::load(&backbone_path)?;
    let backbone = Backbone::from_named_tensors(&container)?;
    let base_accuracy = container.get("meta/base_accuracy")?.as_scalar()?;
    Ok((suite, backbone, base_accuracy))
}

fn section_report(
    plan: &RunSectionPlan,
    run: &ContinualRun,
    checker: &MifChecker,
) -> Result<SectionReport> {
    let k_tasks = run.accuracy.num_tasks();
    let mut ap = Vec::with_capacity(k_tasks);
    let mut map = Vec::with_capacity(k_tasks);
    let mut bwt = Vec::with_capacity(k_tasks.saturating_sub(1));
    let mut mif = Vec::with_capacity(k_tasks);
    for k in 1..=k_tasks {
        ap.push(average_performance(&run.accuracy, k)?);
        map.push(mean_average_performance(&run.accuracy, k)?);
        if k >= 2 {
            bwt.push(backward_transfer(&run.accuracy, k)?);
        }
        mif.push(mean_instruction_following(
            &run.stage_predictions[k - 1],
            checker,
            k,
        )?);
    }
    let fusion = if plan.train.strategy.is_lilora_family() {
        Some(fusion_report(&run.bank, &run.alpha_traces)?)
    } else {
        None
    };
    Ok(SectionReport {
        label: plan.label.clone(),
        file_label: plan.file_label(),
        strategy: plan.train.strategy.tag(),
        rank: plan.train.rank,
        task_rank: plan.train.task_rank,
        lambda: plan.train.lambda,
        accuracy_matrix: run.accuracy.rows().to_vec(),
        ap_per_stage: ap.clone(),
        map_per_stage: map.clone(),
        bwt_per_stage: bwt.clone(),
        mif_per_stage: mif.clone(),
        final_ap: *ap.last().expect("at least one stage"),
        final_map: *map.last().expect("at least one stage"),
        final_bwt: bwt.last().copied().unwrap_or(0.0),
        final_mif: *mif.last().expect("at least one stage"),
        final_train_accuracy_per_task: run
            .logs
            .iter()
            .map(|l| l.final_train_accuracy)
            .collect(),
        fusion,
    })
}

/// Run every configured strategy (and sweep point) over the shared suite and
/// seed; write the report, accuracy matrices, adapter checkpoints, and
/// training logs. Wall-clock goes to `timing.txt`, outside the report.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let started = std::time::Instant::now();
    let out = Path::new(&cfg.out_dir);
    std::fs::create_dir_all(out)?;
    atomic_write(&out.join(CONFIG_ECHO_FILE), cfg.to_toml().as_bytes())?;

    let (suite, backbone, base_accuracy) = load_run_inputs(cfg)?;
    let checker = MifChecker::contiguous(suite.num_tasks(), suite.params.classes_per_task);
    let plan = cfg.run_plan()?;

    let mut sections = Vec::with_capacity(plan.len());
    for section in &plan {
        let run = run_continual(&suite, &backbone, &section.train)?;
        sections.push(section_report(section, &run, &checker)?);

        let file_label = section.file_label();
        TensorContainer::from_entries(run.bank.to_named_tensors())
            .save(&out.join(format!("adapters-{file_label}.lltc")))?;
        atomic_write(
            &out.join(format!("matrix-{file_label}.csv")),
            accuracy_matrix_csv(&run.accuracy).as_bytes(),
        )?;
        let mut log_lines = String::new();
        for task_log in &run.logs {
            for step in &task_log.steps {
                log_lines.push_str(&serde_json::to_string(step).expect("step serializes"));
                log_lines.push('\n');
            }
        }
        atomic_write(
            &out.join(format!("logs-{file_label}.jsonl")),
            log_lines.as_bytes(),
        )?;
    }

    let dims = backbone.adapter_dims(cfg.train.rank, cfg.train.task_rank)?;
    let efficiency = efficiency_report(&dims, suite.num_tasks());
    let report = ExperimentReport {
        schema_version: crate::cli::config::SCHEMA_VERSION,
        config: cfg.clone(),
        base_accuracy,
        backbone_checksum: backbone.checksum(),
        sections,
        efficiency,
        versions: Versions {
            crate_version: env!("CARGO_PKG_VERSION").into(),
            report_schema: crate::cli::config::SCHEMA_VERSION,
            suite_format: crate::taskgen::SUITE_VERSION,
            container_format: crate::persist::TENSOR_VERSION,
        },
    };
    report.save(out)?;
    atomic_write(
        &out.join("timing.txt"),
        format!("wall_clock_seconds: {:.3}\n", started.elapsed().as_secs_f64()).as_bytes(),
    )?;
    Ok(report)
}

/// What `analyze` should compute; `kinds: None` means everything available.
#[derive(Clone, Debug, Default)]
pub struct AnalyzeOptions {
    pub kinds: Option<Vec<MatrixKind>>,
}

fn kind_supported(bank: &AdapterBank, kind: MatrixKind) -> bool {
    use crate::adapters::Strategy;
    match kind {
        MatrixKind::A => matches!(bank.strategy, Strategy::DirLora),
        MatrixKind::B => matches!(bank.strategy, Strategy::DirLora | Strategy::SharedA),
        MatrixKind::Residual => bank.strategy.is_lilora_family(),
    }
}

/// Emit heatmap, fusion, and efficiency CSVs from a finished run directory;
/// returns the manifest of written files.
pub fn cmd_analyze(run_dir: &Path, opts: &AnalyzeOptions) -> Result<Vec<String>> {
    let report_path = run_dir.join("report.json");
    if !report_path.exists() {
        return Err(Error::State(format!(
            "missing artifacts: {}; run `lilora run` first",
            report_path.display()
        )));
    }
    let report: ExperimentReport = serde_json::from_str(
        &std::fs::read_to_string(&report_path)?,
    )
    .map_err(|e| Error::Parse {
        offset: 0,
        msg: format!("report.json: {e}"),
    })?;

    // Load every section's adapter bank; missing checkpoints are collected
    // and reported together.
    let mut banks = Vec::new();
    let mut absent = Vec::new();
    for section in &report.sections {
        let path = run_dir.join(format!("adapters-{}.lltc", section.file_label));
        if !path.exists() {
            absent.push(path.display().to_string());
            continue;
        }
        let container = TensorContainer::load(&path)?;
        banks.push((section, AdapterBank::from_named_tensors(container.entries())?));
    }
    if !absent.is_empty() {
        return Err(Error::State(format!(
            "missing artifacts: {}",
            absent.join(", ")
        )));
    }

    // An explicitly requested kind must be computable from some section.
    if let Some(kinds) = &opts.kinds {
        for &kind in kinds {
            if !banks.iter().any(|(_, b)| kind_supported(b, kind)) {
                let remedy = match kind {
                    MatrixKind::A => "add 'dir-lora' to the strategies and rerun",
                    MatrixKind::B => "add 'dir-lora' or 'shared-a' to the strategies and rerun",
                    MatrixKind::Residual => "add a lilora strategy and rerun",
                };
                return Err(Error::Contract(format!(
                    "heatmap kind '{}' requested but no run provides per-task {} matrices; {remedy}",
                    kind.tag(),
                    kind.tag()
                )));
            }
        }
    }

    let mut manifest: Vec<String> = Vec::new();
    let mut write = |name: String, bytes: &[u8]| -> Result<()> {
        atomic_write(&run_dir.join(&name), bytes)?;
        manifest.push(name);
        Ok(())
    };

    for (section, bank) in &banks {
        let all_kinds = [MatrixKind::A, MatrixKind::B, MatrixKind::Residual];
        let wanted: Vec<MatrixKind> = match &opts.kinds {
            Some(kinds) => kinds.clone(),
            None => all_kinds
                .iter()
                .copied()
                .filter(|&k| kind_supported(bank, k))
                .collect(),
        };
        for kind in wanted {
            if !kind_supported(bank, kind) {
                continue;
            }
            for sim in [SimilarityKind::Cka, SimilarityKind::FrobeniusCosine] {
                let mut layer_maps = Vec::new();
                for layer in 0..bank.num_layers() {
                    let map = adapter_heatmap(bank, kind, layer, sim)?;
                    write(
                        format!(
                            "heatmap-{}-{}-{}-layer{layer}.csv",
                            section.file_label,
                            kind.tag(),
                            sim.tag()
                        ),
                        heatmap_csv(&map).as_bytes(),
                    )?;
                    layer_maps.push(map);
                }
                let mean = mean_heatmap(&layer_maps)?;
                write(
                    format!(
                        "heatmap-{}-{}-{}-mean.csv",
                        section.file_label,
                        kind.tag(),
                        sim.tag()
                    ),
                    heatmap_csv(&mean).as_bytes(),
                )?;
            }
        }
        if let Some(fusion) = &section.fusion {
            write(
                format!("fusion-{}.csv", section.file_label),
                fusion_csv(fusion).as_bytes(),
            )?;
        }
    }
    write("efficiency.csv".into(), efficiency_csv(&report.efficiency).as_bytes())?;

    manifest.sort();
    let listing = manifest.join("\n") + "\n";
    atomic_write(&run_dir.join("manifest.txt"), listing.as_bytes())?;
    manifest.push("manifest.txt".into());
    manifest.sort();
    Ok(manifest)
}

/// Resolve the output paths a run produces (for tests and tooling).
pub fn run_artifact_paths(cfg: &ExperimentConfig) -> Vec<PathBuf> {
    let out = Path::new(&cfg.out_dir);
    let mut paths = vec![
        out.join(SUITE_FILE),
        out.join(BACKBONE_FILE),
        out.join("report.json"),
        out.join("report.txt"),
    ];
    if let Ok(plan) = cfg.run_plan() {
        for s in &plan {
            let fl = s.file_label();
            paths.push(out.join(format!("adapters-{fl}.lltc")));
            paths.push(out.join(format!("matrix-{fl}.csv")));
            paths.push(out.join(format!("logs-{fl}.jsonl")));
        }
    }
    paths
}
