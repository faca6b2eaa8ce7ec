use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use hetsplit_core::allocation::{allocate_all, depth_scores, measure_profiles, LatencyBounds};
use hetsplit_core::config::parse_config;
use hetsplit_core::metrics::{write_jsonl, write_metrics_files};
use hetsplit_core::presets::{find_preset, preset_catalog, PresetKind};
use hetsplit_core::report::{render_table, RunSummary};
use hetsplit_core::sim::{run_experiment, ExperimentOutput};
use hetsplit_core::supernet::write_checkpoint;
use hetsplit_core::{ExperimentConfig, Mode, SuperNet};

#[derive(Parser)]
#[command(name = "hetsplit", version, about = "Simulate resource-aware split federated learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        /// TOML config; defaults are used for anything it leaves out.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a config key, e.g. `--set tpgf.eta=0.1`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Directory for metrics files.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// File stem for metrics files.
        #[arg(long, default_value = "metrics")]
        name: String,
        /// Also save the final global network here.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run a named preset and print a comparison table.
    Preset {
        name: String,
        /// Override applied to every variant. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// List the available presets.
    ListPresets,
}

fn write_audit(out: &ExperimentOutput, dir: &Path, stem: &str) -> Result<()> {
    let path = dir.join(format!("{stem}.audit.jsonl"));
    let w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    write_jsonl(&out.audit, w)?;
    Ok(())
}

fn execute(cfg: &ExperimentConfig, dir: &Path, stem: &str) -> Result<ExperimentOutput> {
    let out = run_experiment(cfg)?;
    if !out.ledger.balances() {
        bail!("byte ledger does not balance for {stem}");
    }
    write_metrics_files(&out.metrics, dir, stem)?;
    if cfg.aggregation.audit {
        write_audit(&out, dir, stem)?;
    }
    Ok(out)
}

fn save_checkpoint(net: &SuperNet, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    write_checkpoint(net, &mut w)?;
    w.flush()?;
    Ok(())
}

fn allocation_table(cfg: &ExperimentConfig) -> Result<String> {
    let profiles = cfg.allocation.profiles.clone().unwrap_or_else(|| measure_profiles(cfg.num_clients, cfg.seed));
    let acfg = cfg.allocation_config();
    let net = SuperNet::build(&cfg.layer_dims, cfg.dataset.num_classes, cfg.seed)?;
    let allocations = allocate_all(&profiles, &acfg, &net, cfg.seed)?;
    let bounds = LatencyBounds::of(&profiles).context("no clients")?;
    let mut s = format!("# L = {}, alpha = {}, beta = {}\n", acfg.total_layers, acfg.alpha, acfg.beta);
    s.push_str("client  memory_gb  latency_ms  memory_score  latency_score  depth\n");
    for (i, (p, a)) in profiles.iter().zip(&allocations).enumerate() {
        let (m, l) = depth_scores(p, bounds, &acfg);
        s.push_str(&format!(
            "{i:<6}  {:>9.2}  {:>10.1}  {m:>12}  {l:>13}  {:>5}\n",
            p.memory_gb, p.latency_ms, a.depth
        ));
    }
    Ok(s)
}

/// Target for a run without an explicit one: the final accuracy of the
/// plain split-learning run with the same number of clients, if any.
fn comparison_target(label_cfg: &ExperimentConfig, runs: &[(String, ExperimentConfig, ExperimentOutput)]) -> Option<f64> {
    label_cfg.target_accuracy.or_else(|| {
        runs.iter()
            .find(|(_, c, _)| c.mode == Mode::Sfl && c.num_clients == label_cfg.num_clients)
            .and_then(|(_, _, o)| o.metrics.last().map(|m| m.test_accuracy))
    })
}

fn run_preset(name: &str, overrides: &[String], out: &Path) -> Result<()> {
    let Some(preset) = find_preset(name) else {
        let names: Vec<&str> = preset_catalog().iter().map(|p| p.name).collect();
        bail!("unknown preset `{name}`; available: {}", names.join(", "));
    };
    let dir = out.join(preset.name);
    let variants = preset
        .variants
        .iter()
        .map(|(label, cfg)| Ok((label.clone(), cfg.with_overrides(overrides)?)))
        .collect::<Result<Vec<_>>>()?;

    if preset.kind == PresetKind::Allocation {
        for (label, cfg) in &variants {
            let table = allocation_table(cfg)?;
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join(format!("{label}.txt")), &table)?;
            print!("{table}");
        }
        return Ok(());
    }

    let mut runs = Vec::new();
    for (label, cfg) in variants {
        eprintln!("running {}/{label}", preset.name);
        let output = execute(&cfg, &dir, &label)?;
        runs.push((label, cfg, output));
    }
    let rows: Vec<RunSummary> = runs
        .iter()
        .map(|(label, cfg, o)| RunSummary::new(label.clone(), &o.metrics, comparison_target(cfg, &runs)))
        .collect();
    let table = render_table(&rows);
    std::fs::write(dir.join("summary.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn main_inner(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, overrides, out, name, checkpoint } => {
            let cfg = parse_config(config.as_deref(), &overrides)?;
            let output = execute(&cfg, &out, &name)?;
            if let Some(path) = checkpoint {
                save_checkpoint(&output.net, &path)?;
            }
            print!("{}", render_table(&[RunSummary::new(name, &output.metrics, cfg.target_accuracy)]));
        }
        Command::Preset { name, overrides, out } => run_preset(&name, &overrides, &out)?,
        Command::ListPresets => {
            for p in preset_catalog() {
                println!("{:<20} {} ({} runs)", p.name, p.description, p.variants.len());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
