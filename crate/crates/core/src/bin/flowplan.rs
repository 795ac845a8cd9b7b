use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use flowplan::decoder::Setting;
use flowplan::runner::{self, DecoderKind, RunConfig, RunError};

/// Flow-adhering plan generation and evaluation.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a domain file for dangling references and schema problems.
    Validate {
        /// Domain file, or a shipped domain name such as `trip_booking`.
        domain: String,
    },
    /// Print the API dependency graph.
    Graph {
        domain: String,
        /// Emit Graphviz DOT instead of a tab-separated edge table.
        #[arg(long)]
        dot: bool,
    },
    /// Generate one plan and print it; the per-unit trace goes to --trace.
    Plan {
        #[arg(long)]
        query: String,
        /// Write the per-unit scoring trace (JSON lines) here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run every (query, decoder, setting) combination and write reports.
    Evaluate {
        /// Only these query ids.
        #[arg(long = "query")]
        queries: Vec<String>,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; flags given here take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Domain file or shipped name; repeatable. Default: all shipped domains.
    #[arg(long = "domain")]
    domains: Vec<String>,
    /// greedy, beam, nucleus, flap or gold; repeatable.
    #[arg(long = "decoder")]
    decoders: Vec<DecoderKind>,
    /// all-flows or relevant-flow; repeatable.
    #[arg(long = "setting")]
    settings: Vec<Setting>,
    /// scripted:<fixture file or dir> or remote:<url>. FLOWPLAN_BACKEND_URL overrides.
    #[arg(long)]
    backend: Option<String>,
    /// lexical or remote:<url>
    #[arg(long)]
    similarity: Option<String>,
    /// Directory for records.jsonl, summary.csv, summary.json and config.json.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads; output does not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Weight of the heuristic against the model probability.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    top_k: Option<usize>,
    /// Maximum rollout length in tokens.
    #[arg(long)]
    lookahead: Option<usize>,
    /// Apply lookahead at every n-th token only.
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    alpha_a: Option<f64>,
    #[arg(long)]
    alpha_b: Option<f64>,
    #[arg(long)]
    alpha_c: Option<f64>,
    #[arg(long)]
    beta_soft: Option<f64>,
    #[arg(long)]
    max_units: Option<usize>,
    #[arg(long)]
    max_tokens: Option<usize>,
    #[arg(long)]
    beams: Option<usize>,
    #[arg(long)]
    no_repeat_ngram: Option<usize>,
    #[arg(long)]
    top_p: Option<f64>,
    #[arg(long)]
    normalize_heuristic: bool,
    #[arg(long)]
    strip_dummies: bool,
}

impl RunArgs {
    fn resolve(self) -> Result<RunConfig, RunError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if !self.domains.is_empty() {
            cfg.domains = self.domains;
        }
        if !self.decoders.is_empty() {
            cfg.decoders = self.decoders;
        }
        if !self.settings.is_empty() {
            cfg.settings = self.settings;
        }
        cfg.backend = self.backend.or(cfg.backend);
        if let Some(s) = self.similarity {
            cfg.similarity = s;
        }
        cfg.output = self.output.or(cfg.output);
        cfg.jobs = self.jobs.unwrap_or(cfg.jobs);
        cfg.strip_dummies |= self.strip_dummies;
        let d = &mut cfg.decoder;
        d.normalize_heuristic |= self.normalize_heuristic;
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { d.$field = v; } )* };
        }
        set!(
            seed, lambda, top_k, lookahead, stride, alpha_a, alpha_b, alpha_c, beta_soft, max_units, max_tokens,
            beams, no_repeat_ngram, top_p
        );
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<ExitCode, RunError> {
    match cli.command {
        Command::Validate { domain } => {
            let (clean, issues) = runner::cmd_validate(&domain)?;
            for i in &issues {
                println!("{i}");
            }
            if clean {
                println!("ok: {domain}");
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
        Command::Graph { domain, dot } => {
            print!("{}", runner::cmd_graph(&domain, dot)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Plan { query, trace, run } => {
            let cfg = run.resolve()?;
            let out = runner::cmd_plan(&cfg, &query)?;
            println!("{}", out.plan_text.trim_end());
            log::info!("stopped: {:?}", out.decoded.stop);
            if let Some(path) = trace {
                std::fs::write(&path, out.trace_jsonl()?).map_err(|source| RunError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate { queries, run } => {
            let mut cfg = run.resolve()?;
            if !queries.is_empty() {
                cfg.queries = queries;
            }
            let report = runner::cmd_evaluate(&cfg)?;
            print!("{}", runner::summary_table(&report.summary));
            if let Some(dir) = &cfg.output {
                eprintln!("reports written to {}", dir.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            let code = e.exit_code() as u8;
            eprintln!("error: {:#}", anyhow::Error::new(e));
            ExitCode::from(code)
        }
    }
}
