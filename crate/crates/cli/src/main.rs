use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use thematica_api::{AppState, ServerConfig};
use thematica_cli::{datadir, provider_from, read_mock_script};
use thematica_core::eval::{run_classification, score_accuracy, label_map_by_name};
use thematica_core::store::{export_codebook, Clock};
use thematica_core::{EvalReport, ExportFormat, GoldLabeling, Matcher, Provider, RefinementFixture};

#[derive(Parser)]
#[command(name = "thematica", version, about = "Evidence-anchored thematic analysis workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service. Settings come from THEMATICA_* variables; flags win.
    Serve {
        #[arg(long)]
        bind: Option<SocketAddr>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        mock_script: Option<PathBuf>,
        /// Stamp persisted events with their sequence number instead of
        /// wall-clock time. In-memory servers always do.
        #[arg(long)]
        logical_clock: bool,
    },
    /// Score theme assignment against gold labels.
    ///
    /// Without --gold, runs every iteration of a refinement fixture (the
    /// shipped one unless --fixture is given). With --gold, scores one
    /// workspace from a data directory.
    Eval {
        #[arg(long)]
        fixture: Option<PathBuf>,
        #[arg(long, requires_all = ["data_dir", "workspace"])]
        gold: Option<PathBuf>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        workspace: Option<String>,
        #[arg(long, default_value = "lexical")]
        matcher: Matcher,
        /// Responses for the provider matcher.
        #[arg(long)]
        mock_script: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Print a workspace's codebook.
    Export {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        workspace: String,
        #[arg(long, default_value = "markdown")]
        format: ExportFormat,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check every workspace file in a data directory, anchors included.
    Verify {
        #[arg(long)]
        data_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, String> {
    match command {
        Command::Serve {
            bind,
            data_dir,
            mock_script,
            logical_clock,
        } => {
            let mut config = ServerConfig::from_env()?;
            config.bind = bind.unwrap_or(config.bind);
            config.data_dir = data_dir.or(config.data_dir);
            config.mock_script = mock_script.or(config.mock_script);
            serve(config, if logical_clock { Clock::Logical } else { Clock::System })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval {
            fixture,
            gold,
            data_dir,
            workspace,
            matcher,
            mock_script,
            json,
        } => {
            let provider = match mock_script {
                Some(path) => Provider::mock(read_mock_script(&path)?),
                None if matcher == Matcher::Provider => provider_from(&ServerConfig::from_env()?)?,
                None => Provider::mock(Default::default()),
            };
            let reports = match (gold, data_dir, workspace) {
                (Some(gold), Some(dir), Some(id)) => {
                    let text = std::fs::read_to_string(&gold).map_err(|e| format!("{}: {e}", gold.display()))?;
                    let gold: GoldLabeling = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", gold.display()))?;
                    gold.validate().map_err(|e| e.to_string())?;
                    let (_, ws) = datadir::load(&dir, &id)?;
                    let assignments =
                        run_classification(&gold.items, ws.graph(), matcher, &provider).map_err(|e| e.to_string())?;
                    let labels = label_map_by_name(ws.graph(), &gold.labels);
                    vec![score_accuracy(&assignments, &gold, &labels, &id, matcher).map_err(|e| e.to_string())?]
                }
                _ => {
                    let fixture = match fixture {
                        Some(path) => {
                            let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                            RefinementFixture::parse(&text).map_err(|e| e.to_string())?
                        }
                        None => RefinementFixture::shipped(),
                    };
                    thematica_core::eval::run_refinement(&fixture, matcher, &provider).map_err(|e| e.to_string())?
                }
            };
            print_reports(&reports, json);
            Ok(ExitCode::SUCCESS)
        }
        Command::Export {
            data_dir,
            workspace,
            format,
            out,
        } => {
            let (corpus, ws) = datadir::load(&data_dir, &workspace)?;
            let bytes = export_codebook(&ws, &corpus, format);
            match out {
                Some(path) => std::fs::write(&path, bytes).map_err(|e| format!("{}: {e}", path.display()))?,
                None => {
                    use std::io::Write;
                    std::io::stdout().write_all(&bytes).map_err(|e| e.to_string())?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { data_dir } => {
            let corpus = datadir::load_corpus(&data_dir)?;
            let files = datadir::workspace_files(&data_dir)?;
            let mut failed = false;
            for path in &files {
                let problems = datadir::verify_file(path, &corpus);
                let name = path.file_stem().unwrap_or_default().to_string_lossy();
                if problems.is_empty() {
                    println!("ok {name}");
                }
                for line in &problems {
                    println!("FAIL {line}");
                }
                failed |= !problems.is_empty();
            }
            println!("{} workspace(s), {} document(s)", files.len(), corpus.len());
            Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
    }
}

fn print_reports(reports: &[EvalReport], json: bool) {
    if json {
        println!("{}", serde_json::to_string_pretty(reports).expect("reports serialize"));
        return;
    }
    for (i, report) in reports.iter().enumerate() {
        if i > 0 {
            println!();
        }
        print!("{}", report.to_table());
    }
}

fn serve(config: ServerConfig, clock: Clock) -> Result<(), String> {
    let provider = provider_from(&config)?;
    let state = match &config.data_dir {
        Some(dir) => AppState::open(provider, dir, clock)?,
        None => AppState::new(provider),
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    eprintln!("listening on {}", config.bind);
    runtime
        .block_on(thematica_api::serve(state, config.bind))
        .map_err(|e| format!("{}: {e}", config.bind))
}
