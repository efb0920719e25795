use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use graphsr::experiment::{
    diagnose_precision_recall, emit_table, report_scales, run_experiment, table_csv, table_text, write_scales_csv,
    ExperimentConfig, RunResult,
};
use graphsr::graph::{load_dataset, save_canonical, DatasetFormat, LoadOptions};
use graphsr::{Error, Result};

#[derive(Parser)]
#[command(name = "graphsr", version, about = "Imbalanced node classification with RL-selected pseudo-labels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a dataset into the canonical directory layout.
    Convert {
        /// Source dataset directory.
        #[arg(long)]
        input: PathBuf,
        /// Source format: canonical or planetoid-raw.
        #[arg(long, default_value = "planetoid-raw")]
        format: DatasetFormat,
        #[arg(long)]
        output: PathBuf,
        /// Skip edges whose endpoints are missing from the node list.
        #[arg(long)]
        drop_dangling_edges: bool,
    },
    /// Run an experiment over all configured seeds.
    Run(ConfigArgs),
    /// Per-class supplement sizes from one or more result files.
    Scales {
        #[arg(required = true)]
        results: Vec<PathBuf>,
        /// CSV destination (stdout when omitted).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Per-class precision/recall of the plain classifier.
    Diagnose(ConfigArgs),
    /// Comparison table from one or more result files.
    Table {
        #[arg(required = true)]
        results: Vec<PathBuf>,
        /// Also write the full-precision CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set rl.epochs=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Shorthand for `--set dataset=PATH`.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Shorthand for `--set method=NAME`.
    #[arg(long)]
    method: Option<String>,
    /// Shorthand for `--set arch=NAME`.
    #[arg(long)]
    arch: Option<String>,
    /// Shorthand for `--set output_dir=PATH`.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let text = match &self.config {
            Some(p) => fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        let mut overrides = Vec::new();
        let quoted = |p: &Path| toml_string(&p.to_string_lossy());
        if let Some(d) = &self.dataset {
            overrides.push(format!("dataset={}", quoted(d)));
        }
        if let Some(m) = &self.method {
            overrides.push(format!("method={}", toml_string(m)));
        }
        if let Some(a) = &self.arch {
            overrides.push(format!("arch={}", toml_string(a)));
        }
        if let Some(o) = &self.output {
            overrides.push(format!("output_dir={}", quoted(o)));
        }
        overrides.extend(self.overrides.iter().cloned());
        ExperimentConfig::from_toml_str(&text, &overrides)
    }
}

fn toml_string(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn read_results(paths: &[PathBuf]) -> Result<Vec<RunResult>> {
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Ok(serde_json::from_str(&text)?)
        })
        .collect()
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Convert {
            input,
            format,
            output,
            drop_dangling_edges,
        } => {
            let graph = load_dataset(&input, format, LoadOptions { drop_dangling_edges })?;
            save_canonical(&graph, &output)?;
            log::info!(
                "wrote {} nodes, {} edges, {} classes to {}",
                graph.num_nodes(),
                graph.num_edges(),
                graph.num_classes(),
                output.display()
            );
        }
        Command::Run(args) => {
            let cfg = args.load()?;
            let (result, timing) = run_experiment(&cfg)?;
            log::info!("finished in {:.1}s", timing.total_seconds);
            println!("{}", result.to_json()?);
        }
        Command::Scales { results, output } => {
            let rows = report_scales(&read_results(&results)?);
            let mut buf = Vec::new();
            write_scales_csv(&rows, &mut buf).map_err(|e| Error::io("scales", e))?;
            write_or_print(output.as_deref(), &String::from_utf8_lossy(&buf))?;
        }
        Command::Diagnose(args) => {
            let cfg = args.load()?;
            let report = diagnose_precision_recall(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Table { results, csv } => {
            let rows = emit_table(&read_results(&results)?)?;
            if let Some(p) = &csv {
                fs::write(p, table_csv(&rows)).map_err(|e| Error::io(p, e))?;
            }
            print!("{}", table_text(&rows));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let payload = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}
