use std::fs;
use std::path::{Path, PathBuf};

use fewshot_asd::benchgen::{self, BenchmarkSpec};
use fewshot_asd::eval::EvalReport;
use fewshot_asd::pipeline::{self, Workspace};
use fewshot_asd::{Error, Result, RunConfig};
use log::info;
use serde::{Deserialize, Serialize};

use crate::{AdaptArgs, EvaluateArgs, GenerateArgs, RunArgs};

/// Accepted as a shorthand for the section task alone.
const SECTION_ONLY: &str = "section_only";

/// Written next to a scores CSV so `evaluate` can report provenance.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoresSidecar {
    pub seed: u64,
    pub config_hash: String,
    pub finetune_iters: usize,
}

pub fn sidecar_path(scores: &Path) -> PathBuf {
    scores.with_extension("meta.toml")
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Data(format!("{}: {e}", path.display()))
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(path) => BenchmarkSpec::from_file(path)?,
        None => BenchmarkSpec::desk_default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(s) = args.clip_seconds {
        spec.clip_seconds = s;
    }
    spec.validate()?;
    if args.print_spec {
        print!("{}", spec.to_toml_string());
        return Ok(());
    }
    let out = args.out.as_deref().expect("clap requires --out without --print-spec");
    info!("generating {} clips into {}", benchgen::plan_clips(&spec).len(), out.display());
    benchgen::generate(&spec, out)
}

/// Config file (or defaults) with command-line overrides applied.
pub fn effective_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &args.dataset {
        cfg.dataset = d.clone();
    }
    if let Some(o) = &args.output {
        cfg.output = o.clone();
    }
    if let Some(m) = &args.machines {
        cfg.machines = m.clone();
    }
    if let Some(t) = &args.tasks {
        cfg.tasks = t
            .iter()
            .map(|n| if n == SECTION_ONLY { benchgen::SECTION_TASK.to_owned() } else { n.clone() })
            .collect();
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let sched = &mut cfg.schedule;
    if let Some(v) = args.outer_steps {
        sched.outer_steps = v;
    }
    if let Some(v) = args.inner_iters {
        sched.inner_iters = v;
    }
    if let Some(v) = args.finetune_iters {
        sched.finetune_iters = v;
    }
    if let Some(v) = args.epsilon_start {
        sched.epsilon_start = v;
    }
    if let Some(v) = args.epsilon_end {
        sched.epsilon_end = v;
    }
    if let Some(v) = args.lr {
        cfg.optimizer.lr = v;
    }
    if let Some(v) = args.lambda {
        cfg.oe.lambda = v;
    }
    if args.no_oe {
        cfg.oe.enabled = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn log_config(cfg: &RunConfig) {
    info!("effective config (hash {}):\n{}", cfg.hash(), cfg.to_toml_string());
}

pub fn train(args: &RunArgs) -> Result<()> {
    let cfg = effective_config(args)?;
    if args.print_config {
        print!("{}", cfg.to_toml_string());
        return Ok(());
    }
    log_config(&cfg);
    let ws = Workspace::open(cfg.clone())?;
    for w in &ws.dataset.warnings {
        log::warn!("{w}");
    }
    fs::create_dir_all(&cfg.output).map_err(|e| io_err(&cfg.output, e))?;
    let cfg_path = cfg.output.join("config.toml");
    fs::write(&cfg_path, cfg.to_toml_string()).map_err(|e| io_err(&cfg_path, e))?;
    for machine in ws.machines()? {
        let data = ws.machine_data(&machine)?;
        let model = pipeline::train_machine(&ws, &data)?;
        if let (Some(first), Some(last)) = (model.log.first(), model.log.last()) {
            info!(
                "{machine}: tasks [{}], loss {:.4} -> {:.4}",
                model.tasks.join(", "),
                first.mean_loss,
                last.mean_loss
            );
        }
        pipeline::write_train_log(&cfg.train_log_path(&machine), &model.log)?;
        let path = cfg.checkpoint_path(&machine);
        pipeline::save_model(&path, &cfg, &model)?;
        info!("{machine}: checkpoint {}", path.display());
    }
    Ok(())
}

pub fn adapt_score(args: &AdaptArgs) -> Result<()> {
    let mut cfg = effective_config(&args.run)?;
    if args.no_finetune {
        cfg.schedule.finetune_iters = 0;
    }
    if args.run.print_config {
        print!("{}", cfg.to_toml_string());
        return Ok(());
    }
    log_config(&cfg);
    let ckpt_dir = args.checkpoints.clone().unwrap_or_else(|| cfg.output.clone());
    let ws = Workspace::open(cfg.clone())?;
    let mut scores = Vec::new();
    for machine in ws.machines()? {
        let path = ckpt_dir.join(format!("{machine}.ckpt"));
        let (meta, params) = pipeline::load_model(&path)?;
        if meta.machine != machine {
            return Err(Error::Data(format!(
                "{} holds a model for `{}`, expected `{machine}`",
                path.display(),
                meta.machine
            )));
        }
        if meta.config.frontend != cfg.frontend || meta.config.encoder != cfg.encoder {
            return Err(Error::Config(format!(
                "{}: frontend or encoder settings differ from the current config",
                path.display()
            )));
        }
        let data = ws.machine_data(&machine)?;
        let adapted = pipeline::score_machine(&cfg, &params, &data, cfg.schedule.finetune_iters)?;
        info!(
            "{machine}: {} fine-tuning steps, {} test clips scored",
            adapted.finetune_losses.len(),
            adapted.scores.len()
        );
        scores.extend(adapted.scores);
    }
    let scores_path = args.scores.clone().unwrap_or_else(|| cfg.scores_path());
    if let Some(dir) = scores_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    pipeline::write_scores(&scores_path, &scores)?;
    let sidecar = ScoresSidecar {
        seed: cfg.seed,
        config_hash: cfg.hash(),
        finetune_iters: cfg.schedule.finetune_iters,
    };
    let side = sidecar_path(&scores_path);
    fs::write(&side, toml::to_string(&sidecar).expect("sidecar serializes")).map_err(|e| io_err(&side, e))?;
    info!("wrote {}", scores_path.display());
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let scores = pipeline::read_scores(&args.scores)?;
    let mut report = EvalReport::from_scores(&scores, args.max_fpr)?;
    let side = sidecar_path(&args.scores);
    if side.is_file() {
        let text = fs::read_to_string(&side).map_err(|e| io_err(&side, e))?;
        let s: ScoresSidecar =
            toml::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", side.display())))?;
        report = report.with_metadata(Some(s.seed), Some(s.config_hash));
    }
    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| args.scores.with_file_name("report.csv"));
    let file = fs::File::create(&report_path).map_err(|e| io_err(&report_path, e))?;
    report
        .write_csv(std::io::BufWriter::new(file))
        .map_err(|e| Error::Data(format!("{}: {e}", report_path.display())))?;
    print!("{}", report.to_table());
    info!("wrote {}", report_path.display());
    Ok(())
}
