use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use fuzzlens_cli::workspace::{ClassifyRequest, FuzzRequest, QueryOptions, QueryRequest, Rules};
use fuzzlens_cli::{http, table, to_json, ApiError, Workspace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Parser)]
#[command(name = "fuzzlens", version, about = "Find, rank and explain fuzz blockers in MiniC programs")]
struct Cli {
    /// Output format for blocker listings. Everything else is always JSON.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the code database and print its generation hash.
    Build { manifest: PathBuf },
    /// Run a fuzzing campaign and store its facts.
    Fuzz {
        manifest: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        execs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated location ARGs whose values are recorded.
        #[arg(long, value_delimiter = ',')]
        monitor: Vec<String>,
        /// Add runs to the existing facts instead of replacing them.
        #[arg(long)]
        append: bool,
    },
    /// List fuzz blockers ranked by score.
    Blockers { manifest: PathBuf },
    /// Classify the top blockers.
    Classify {
        manifest: PathBuf,
        #[arg(long)]
        top: Option<usize>,
        /// Executions of each embedded taint campaign.
        #[arg(long)]
        execs: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_rules, default_value = "both")]
        rules: Rules,
    },
    /// Run q1 (taint), q2 (value distribution) or q3 (flag suggestions).
    Query {
        query_id: String,
        #[arg(long)]
        arg: String,
        #[arg(long, default_value = "project.manifest")]
        manifest: PathBuf,
        /// Location ARG of the taint source (q1).
        #[arg(long)]
        source: Option<String>,
        #[arg(long)]
        execs: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_rules)]
        rules: Option<Rules>,
        /// Skip the dynamic step of q1.
        #[arg(long)]
        static_only: bool,
        #[arg(long)]
        grid_points: Option<usize>,
    },
    /// Serve the project over HTTP on the loopback interface.
    Serve {
        manifest: PathBuf,
        #[arg(long, default_value_t = 7878)]
        port: u16,
    },
}

fn parse_rules(s: &str) -> Result<Rules, String> {
    Rules::parse(s).ok_or_else(|| format!("unknown rule set `{s}` (none, address-copy, field-to-qualifier, both)"))
}

enum Output {
    Json(String),
    Text(String),
}

fn run(cli: Cli) -> Result<Output, ApiError> {
    let as_blockers = |r: fuzzlens_cli::workspace::BlockersReport| match cli.format {
        Format::Json => Output::Json(to_json(&r)),
        Format::Table => Output::Text(table::blockers(&r)),
    };
    Ok(match cli.command {
        Command::Build { manifest } => Output::Json(to_json(&Workspace::open(&manifest)?.build()?)),
        Command::Fuzz { manifest, execs, seed, monitor, append } => {
            let ws = Workspace::open(&manifest)?;
            Output::Json(to_json(&ws.fuzz(&FuzzRequest { execs, seed, monitor, append })?))
        }
        Command::Blockers { manifest } => as_blockers(Workspace::open(&manifest)?.blockers()?),
        Command::Classify { manifest, top, execs, seed, rules } => {
            as_blockers(Workspace::open(&manifest)?.classify(&ClassifyRequest { top, execs, seed, rules })?)
        }
        Command::Query { query_id, arg, manifest, source, execs, seed, rules, static_only, grid_points } => {
            let ws = Workspace::open(&manifest)?;
            let options = QueryOptions { source, execs, seed, rules, static_only: static_only.then_some(true), grid_points };
            Output::Json(to_json(&ws.query(&QueryRequest { query_id, arg, options })?))
        }
        Command::Serve { manifest, port } => {
            let ws = Arc::new(Workspace::open(&manifest)?);
            serve(ws, port)?;
            Output::Text(String::new())
        }
    })
}

fn serve(ws: Arc<Workspace>, port: u16) -> Result<(), ApiError> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| ApiError::Io(e.to_string()))?;
    rt.block_on(async {
        let addr = std::net::SocketAddr::from(([127, 0, 0, 1], port));
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| ApiError::BadRequest(format!("cannot listen on {addr}: {e}")))?;
        eprintln!("serving {} on http://{addr}", ws.manifest_path.display());
        axum::serve(listener, http::router(ws)).await.map_err(|e| ApiError::Io(e.to_string()))
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Output::Json(s) | Output::Text(s)) => {
            print!("{s}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            print!("{}", to_json(&e.body()));
            eprintln!("fuzzlens: {e}");
            ExitCode::from(e.class().exit_code())
        }
    }
}
