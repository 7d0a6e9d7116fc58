mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use poirec::synthetic::SyntheticConfig;

use config::{RunConfig, Settings, UsageError};

/// Contextual point-of-interest recommendation with factored relevance models.
///
/// Configuration is layered: built-in defaults, then each --config file in
/// order, then --set overrides. Print the defaults with `poirec defaults`.
///
/// Exit status: 0 ok, 1 usage or configuration error, 2 data error,
/// 3 degenerate estimation.
#[derive(Parser, Debug)]
#[command(name = "poirec", version)]
struct Cli {
    /// TOML config file (repeatable; later files win).
    #[arg(short, long, global = true)]
    config: Vec<PathBuf>,

    /// Override a config key, e.g. `--set feedback.gamma_h=0.7` (repeatable).
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build and persist the inverted index for paths.pois at paths.index.
    BuildIndex,
    /// Write a TREC run file of recommendations.
    Recommend {
        /// Recommend for this user only (default: every user).
        #[arg(short, long)]
        user: Option<String>,
        /// Shorthand for --set model.name=...
        #[arg(short, long)]
        model: Option<String>,
        /// Shorthand for --set model.psi=...
        #[arg(short, long)]
        psi: Option<String>,
        /// Output file, `-` for stdout (default: paths.output, else stdout).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Score a run file against paths.qrels.
    Evaluate {
        /// Run file to score.
        run: PathBuf,
        /// Also write the per-query report as CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Second run to compare against with a paired t-test.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Metric for the paired t-test.
        #[arg(long, default_value = "ndcg@5")]
        metric: String,
    },
    /// Evaluate every point of a parameter grid and write one CSV row per point.
    Sweep {
        /// Grid axis `key=v1,v2,...` (repeatable).
        #[arg(short, long, required = true)]
        grid: Vec<String>,
        /// Output CSV, `-` for stdout (default: paths.output, else stdout).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Show knowledge-base scores and psi weights for terms under a trip context.
    KbInspect {
        /// Trip context as `trip-type,trip-duration,accompanied-by`.
        #[arg(long)]
        context: String,
        /// Terms or tag phrases to look up.
        #[arg(required = true)]
        terms: Vec<String>,
    },
    /// Write a synthetic collection and a config for it.
    Generate {
        /// Destination directory.
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        pois: usize,
        #[arg(long, default_value_t = 10)]
        users: usize,
    },
    /// Print the built-in default configuration.
    Defaults,
}

fn settings(cli: &Cli, extra: &[(&str, Option<&String>)]) -> Result<Settings, UsageError> {
    let mut s = Settings::defaults();
    for path in &cli.config {
        s.load_file(path)?;
    }
    for spec in &cli.set {
        s.set(spec)?;
    }
    for (key, value) in extra {
        if let Some(v) = value {
            s.set_value(key, v)?;
        }
    }
    Ok(s)
}

fn output_path(flag: Option<PathBuf>, cfg: &RunConfig) -> Option<PathBuf> {
    flag.or_else(|| cfg.paths.output.clone())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BuildIndex => {
            let cfg = settings(&cli, &[])?.resolve()?;
            commands::build_index(&cfg)
        }
        Command::Recommend {
            ref user,
            ref model,
            ref psi,
            ref output,
        } => {
            let cfg = settings(&cli, &[("model.name", model.as_ref()), ("model.psi", psi.as_ref())])?.resolve()?;
            let data = commands::load_data(&cfg)?;
            let run = commands::run_recommend(&cfg, &data, user.as_deref())?;
            commands::write_output(output_path(output.clone(), &cfg).as_deref(), run.to_text().as_bytes())
        }
        Command::Evaluate {
            ref run,
            ref csv,
            ref baseline,
            ref metric,
        } => {
            let cfg = settings(&cli, &[])?.resolve()?;
            let report = commands::run_evaluate(&cfg, run)?;
            let mut text = report.to_table();
            if let Some(b) = baseline {
                text.push_str(&commands::compare(&report, &commands::run_evaluate(&cfg, b)?, metric)?);
            }
            if let Some(p) = csv {
                commands::write_output(Some(p), report.to_csv().as_bytes())?;
            }
            commands::write_output(None, text.as_bytes())
        }
        Command::Sweep { ref grid, ref output } => {
            let s = settings(&cli, &[])?;
            let cfg = s.resolve()?;
            let table = commands::run_sweep(&s, grid)?;
            for c in table.cells.iter().filter(|c| c.outcome.is_err()) {
                let params: Vec<String> = c.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
                eprintln!("cell {} failed: {}", params.join(" "), c.outcome.as_ref().unwrap_err());
            }
            if let Some(best) = table.best() {
                let params: Vec<String> = best.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
                let score = best.outcome.as_ref().map(|r| r.mean.ndcg5).unwrap_or_default();
                eprintln!("best ndcg@5 {score:.4} at {}", params.join(" "));
            }
            commands::write_output(output_path(output.clone(), &cfg).as_deref(), table.to_csv().as_bytes())?;
            if table.failures() == table.cells.len() {
                anyhow::bail!("every sweep cell failed");
            }
            Ok(())
        }
        Command::KbInspect { ref context, ref terms } => {
            let cfg = settings(&cli, &[])?.resolve()?;
            let ctx = commands::parse_context(context)?;
            commands::write_output(None, commands::kb_inspect(&cfg, terms, ctx)?.as_bytes())
        }
        Command::Generate {
            ref out,
            seed,
            pois,
            users,
        } => {
            let cfg = SyntheticConfig {
                seed,
                num_pois: pois,
                num_users: users,
                ..SyntheticConfig::default()
            };
            let path = commands::generate_synthetic(out, &cfg)?;
            eprintln!("wrote synthetic collection; config at {}", path.display());
            Ok(())
        }
        Command::Defaults => commands::write_output(None, config::DEFAULTS.as_bytes()),
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 1;
        }
        if let Some(pe) = cause.downcast_ref::<poirec::Error>() {
            return if pe.is_degenerate() { 3 } else { 2 };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
