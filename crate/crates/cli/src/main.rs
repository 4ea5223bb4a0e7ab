use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use invlab_core::experiment::{emit_plot_data, run, write_outputs, ExperimentConfig, Format, Suite};
use invlab_core::Error;

const EXIT_USAGE: u8 = 64;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

/// Run a verification suite from a JSON configuration.
#[derive(Debug, Parser)]
#[command(name = "invlab", version)]
struct Args {
    /// paths | vseq | series | inequalities | blocking | invariance | counterexample | all
    suite: String,
    /// JSON configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out_dir`; default `invlab-out`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides `master_seed`)
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; `1` gives the canonical output
    #[arg(long)]
    threads: Option<usize>,
    /// Output format (overrides `format`)
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("invlab: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let suite = match Suite::parse(&args.suite) {
        Ok(s) => s,
        Err(e) => return usage(e),
    };
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => return usage(format!("cannot read {}: {e}", args.config.display())),
    };
    let cfg = match ExperimentConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => return usage(e),
    };
    if let Some(t) = args.threads {
        if t == 0 {
            return usage("--threads must be at least 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            return usage(format!("thread pool: {e}"));
        }
    }
    let report = match run(suite, &cfg, args.seed) {
        Ok(r) => r,
        Err(e @ (Error::Io(_) | Error::Resource(_))) => {
            eprintln!("invlab: {e}");
            return ExitCode::from(1);
        }
        Err(e) => return usage(e),
    };
    let format = match args.format {
        Some(FormatArg::Csv) => Format::Csv,
        Some(FormatArg::Json) => Format::Json,
        None => cfg.format.unwrap_or_default(),
    };
    let dir = args
        .out
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("invlab-out"));
    let written = write_outputs(&report, &dir, format).and_then(|mut w| {
        if format == Format::Json {
            w.extend(emit_plot_data(&report, &dir)?);
        }
        Ok(w)
    });
    match written {
        Ok(files) => {
            for r in &report.checks {
                println!("{:<36} {}", r.name, format!("{:?}", r.verdict).to_uppercase());
            }
            println!("verdict: {}", format!("{:?}", report.verdict).to_uppercase());
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Err(e) => {
            eprintln!("invlab: {e}");
            return ExitCode::from(1);
        }
    }
    ExitCode::from(report.verdict.exit_code() as u8)
}
