use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;
use tablelink_core::document::classify_table_complexity;
use tablelink_core::eval::{score_schemas, DEFAULT_IOU_THRESHOLD};
use tablelink_core::pipeline::link_bundle;
use tablelink_core::{ingest_document, LinkingSchema};
use tablelink_service::config::{ENV_INFERENCE_TOKEN, ENV_INFERENCE_URL};
use tablelink_service::{http, Config, Service};
use tracing_subscriber::EnvFilter;

/// Links text mentions in scientific papers to table cells, rows, columns
/// and regions.
#[derive(Debug, Parser)]
#[command(name = "tablelink", version)]
struct Cli {
    /// TOML config file with `[pipeline]` tolerances and lexicons and
    /// `[inference]` backend settings. Defaults apply when omitted.
    #[arg(long, global = true, env = "TABLELINK_CONFIG")]
    config: Option<PathBuf>,

    /// Remote inference endpoint. Without one, only the deterministic
    /// backend runs.
    #[arg(long, global = true, env = ENV_INFERENCE_URL, hide_env_values = true)]
    inference_url: Option<String>,

    /// Bearer token sent to the inference endpoint.
    #[arg(long, global = true, env = ENV_INFERENCE_TOKEN, hide_env_values = true)]
    inference_token: Option<String>,

    /// Log filter, e.g. `info` or `tablelink_core=debug`.
    #[arg(long, global = true, env = "TABLELINK_LOG", default_value = "warn")]
    log: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a bundle and print a summary.
    Ingest {
        bundle: PathBuf,
    },
    /// Build the linking schema for a bundle.
    Link {
        bundle: PathBuf,
        /// Output file; `-` writes to stdout.
        #[arg(short, long, default_value = "-")]
        output: PathBuf,
        /// Indent the JSON. The compact form is the canonical one.
        #[arg(long)]
        pretty: bool,
    },
    /// Score a predicted schema against a gold schema.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Bundle both schemas were built from; needed for table sizes.
        #[arg(long)]
        bundle: PathBuf,
        /// Minimum span IoU for a detection match.
        #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
        iou: f64,
        /// Print JSON instead of a text table.
        #[arg(long)]
        json: bool,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory for cached schemas.
        #[arg(long, default_value = "./tablelink-data")]
        data_dir: PathBuf,
    },
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    if path == Path::new("-") {
        let mut out = std::io::stdout().lock();
        out.write_all(bytes)?;
        out.write_all(b"\n")?;
        return Ok(());
    }
    std::fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_new(&cli.log).unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let mut config = Config::load(cli.config.as_deref())?;
    config.override_inference(cli.inference_url.clone(), cli.inference_token.clone());

    match cli.command {
        Command::Ingest { bundle } => {
            let doc = ingest_document(&read(&bundle)?)?;
            let tables: Vec<_> = doc
                .tables
                .iter()
                .map(|t| {
                    json!({
                        "id": t.id, "number": t.number, "rows": t.n_rows, "cols": t.n_cols,
                        "header_rows": t.header_rows, "complexity": classify_table_complexity(t).as_str(),
                    })
                })
                .collect();
            let summary = json!({
                "doc_id": doc.doc_id, "content_hash": doc.content_hash,
                "pages": doc.pages.len(), "paragraphs": doc.paragraphs.len(), "tables": tables,
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Link { bundle, output, pretty } => {
            let (_, schema) = link_bundle(&read(&bundle)?, &config.pipeline_options())?;
            for w in &schema.warnings {
                tracing::warn!(stage = %w.stage, "{}", w.message);
            }
            write_output(&output, &if pretty { schema.encode_pretty() } else { schema.encode() })?;
        }
        Command::Eval { pred, gold, bundle, iou, json } => {
            let doc = ingest_document(&read(&bundle)?)?;
            let pred = LinkingSchema::decode(&read(&pred)?).context("predicted schema")?;
            let gold = LinkingSchema::decode(&read(&gold)?).context("gold schema")?;
            let report = score_schemas(&pred, &gold, &doc.tables, iou);
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.to_text());
            }
        }
        Command::Serve { port, host, data_dir } => {
            let service = Service::new(config.pipeline_options(), &data_dir)
                .with_context(|| format!("cannot open data dir {}", data_dir.display()))?;
            let addr: SocketAddr = format!("{host}:{port}").parse().context("invalid listen address")?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("cannot bind {addr}"))?;
                eprintln!("listening on http://{addr}");
                axum::serve(listener, http::router(service)).await.context("server error")
            })?;
        }
    }
    Ok(())
}
