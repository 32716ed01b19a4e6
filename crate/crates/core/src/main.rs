use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use dualde::datamodel::load_dataset;
use dualde::pipeline::{
    predict_all, read_trace_json, run_alpha_ablation, run_training, write_ablation_csv, write_run_artifacts,
    write_trace_csv, CurriculumMode, RunConfig, Splits, DEFAULT_ALPHAS,
};
use dualde::seqmodel::{evaluate, Model, Task};
use dualde::synth::{generate_dataset, SynthConfig};

#[derive(Parser)]
#[command(name = "dualde", version, about = "Curriculum-denoised multimodal aspect sentiment on synthetic data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (train/dev/test JSONL plus manifest).
    Synth {
        /// JSON synth config; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train with a curriculum and write trace, metrics and model.
    Train {
        /// JSON run config; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory holding train.jsonl, dev.jsonl and test.jsonl.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        mode: Option<CurriculumMode>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long = "lambda-init")]
        lambda_init: Option<f64>,
        #[arg(long = "T")]
        duration: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a saved model on a JSONL file and print one JSON line per task.
    Eval {
        /// model.json written by `train`.
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// JMASA, MATE or MASC; all three when omitted.
        #[arg(long)]
        task: Option<Task>,
    },
    /// Train over a grid of composite weights and seeds and write a CSV.
    AblateAlpha {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Comma-separated weights in [0, 1].
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        seeds: Vec<u64>,
        #[arg(long, default_value = "ablation.csv")]
        out: PathBuf,
    },
    /// Re-emit the epoch trace of a run directory as CSV.
    Trace {
        /// Output directory of a `train` run.
        #[arg(long)]
        run: PathBuf,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::FAILURE
        }
    }
}

/// Joins the cause chain, skipping causes the previous message already ends with.
fn one_line(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !msg.ends_with(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg.replace('\n', " ")
}

fn load_run_config(path: Option<&PathBuf>) -> Result<RunConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth { config, out, seed } => {
            let mut cfg = match config {
                Some(p) => {
                    let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str::<SynthConfig>(&text).with_context(|| format!("parsing {}", p.display()))?
                }
                None => SynthConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let data = generate_dataset(&cfg)?;
            data.write(&out)?;
            println!(
                "wrote {} train, {} dev, {} test samples to {}",
                data.train.len(),
                data.dev.len(),
                data.test.len(),
                out.display()
            );
        }
        Command::Train {
            config,
            data,
            out,
            mode,
            alpha,
            lambda_init,
            duration,
            seed,
        } => {
            let mut cfg = load_run_config(config.as_ref())?;
            if let Some(m) = mode {
                cfg.mode = m;
            }
            if let Some(a) = alpha {
                cfg.alpha = a;
            }
            if let Some(l) = lambda_init {
                cfg.lambda_init = l;
            }
            if duration.is_some() {
                cfg.duration = duration;
            }
            if let Some(s) = seed {
                cfg.model.seed = s;
            }
            cfg.data = data.or(cfg.data);
            cfg.out = out.or(cfg.out);
            let (Some(data_dir), Some(out_dir)) = (cfg.data.clone(), cfg.out.clone()) else {
                bail!("train needs --data and --out (or data/out in the config)");
            };
            cfg.validate()?;
            let splits = Splits::load(&data_dir)?;
            let result = run_training(&cfg, &splits)?;
            write_run_artifacts(&result, &cfg, &out_dir)?;
            for m in &result.metrics {
                println!("{} {} f1={:.4}", m.split, m.report.task, m.report.f1);
            }
        }
        Command::Eval { params, data, task } => {
            let text = fs::read_to_string(&params).with_context(|| format!("reading {}", params.display()))?;
            let model: Model = serde_json::from_str(&text).with_context(|| format!("parsing {}", params.display()))?;
            let dataset = load_dataset(&data)?;
            let preds = predict_all(&model, &dataset)?;
            let tasks = task.map_or(Task::ALL.to_vec(), |t| vec![t]);
            let mut stdout = io::stdout().lock();
            for t in tasks {
                let report = evaluate(&dataset, &preds, t)?;
                writeln!(stdout, "{}", serde_json::to_string(&report)?)?;
            }
        }
        Command::AblateAlpha {
            config,
            data,
            alphas,
            seeds,
            out,
        } => {
            let cfg = load_run_config(config.as_ref())?;
            let Some(data_dir) = data.or(cfg.data.clone()) else {
                bail!("ablate-alpha needs --data (or data in the config)");
            };
            cfg.validate()?;
            let alphas = alphas.unwrap_or(DEFAULT_ALPHAS.to_vec());
            let splits = Splits::load(&data_dir)?;
            let rows = run_alpha_ablation(&cfg, &splits, &alphas, &seeds)?;
            write_ablation_csv(&rows, &cfg, &out)?;
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::Trace { run, out } => {
            let trace = read_trace_json(&run)?;
            match out {
                Some(p) => {
                    let file = fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?;
                    write_trace_csv(&trace, file)?;
                }
                None => write_trace_csv(&trace, io::stdout().lock())?,
            }
        }
    }
    Ok(())
}
