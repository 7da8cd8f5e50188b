//! `scenegraph`: convert, refine, annotate and query scene descriptions.
//!
//! Exit status is 0 on success, 1 for problems with the inputs or flags and
//! 2 for internal failures. Diagnostics are JSON lines on stderr; the human
//! summary goes to stdout.

mod commands;
mod config;
mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scenegraph_core::Diagnostic;

use crate::config::Config;

#[derive(Parser)]
#[command(
    name = "scenegraph",
    version,
    about = "Scene description conversion, refinement and semantic queries"
)]
struct Cli {
    /// Defaults file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Import URDF/MJCF/SDF/ProcTHOR files and write one USDA stage or robot file.
    Convert(ConvertArgs),
    /// Compute or repair mass properties on a stage.
    Refine(RefineArgs),
    /// Attach semantic reports with candidate concepts to every body prim.
    Report(ReportArgs),
    /// Add, remove or accept semantic labels.
    Label(LabelArgs),
    /// Compile a labeled stage and an ontology into N-Triples.
    Kg(KgArgs),
    /// Answer a competency question or a pattern file.
    Query(QueryArgs),
    /// Serve a stage and static files over HTTP.
    Serve(ServeArgs),
}

#[derive(Args)]
pub struct ConvertArgs {
    /// Input files; the format is taken from the extension or the XML root.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
    /// usda, urdf, mjcf or sdf; defaults to the output extension.
    #[arg(long)]
    pub to: Option<String>,
    /// Comma-separated: visual_meshes, materials, textures, non_collidable_geometry, physics_properties.
    #[arg(long)]
    pub strip: Option<String>,
    /// weld, connect or fail.
    #[arg(long)]
    pub loop_strategy: Option<String>,
    /// Compute inertials for bodies that have none.
    #[arg(long)]
    pub refine: bool,
    /// Density for computed inertials (kg/m³).
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long)]
    pub mesh_root: Option<PathBuf>,
    /// Do not fail on missing mesh files.
    #[arg(long)]
    pub no_verify_meshes: bool,
    /// Also write `<stem>.semantic.usda` with an empty label list per body.
    #[arg(long)]
    pub semantic_layer: bool,
}

#[derive(Args)]
pub struct RefineArgs {
    pub stage: PathBuf,
    /// Defaults to rewriting the input.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Recompute inertials that were authored in the source.
    #[arg(long)]
    pub recompute: bool,
    /// Fold fixed children into their parents.
    #[arg(long)]
    pub consolidate: bool,
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long)]
    pub mesh_root: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    pub stage: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// TSV lexicon; the built-in one is used otherwise.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Directory of recorded text-to-triples responses.
    #[arg(long, conflicts_with = "endpoint")]
    pub fixtures: Option<PathBuf>,
    /// Live text-to-triples endpoint.
    #[arg(long)]
    pub endpoint: Option<String>,
}

#[derive(Args)]
pub struct LabelArgs {
    pub stage: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Script with `add|remove <path> <iri>`, `accept <path>` and `accept-all` lines.
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// `<prim path>=<iri>`; repeatable.
    #[arg(long)]
    pub add: Vec<String>,
    /// `<prim path>=<iri>`; repeatable.
    #[arg(long)]
    pub remove: Vec<String>,
    /// Accept the best candidate of every untagged prim.
    #[arg(long)]
    pub accept_all: bool,
}

#[derive(Args)]
pub struct KgArgs {
    pub stage: PathBuf,
    #[arg(long)]
    pub ontology: Option<PathBuf>,
    /// N-Triples output.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args)]
pub struct QueryArgs {
    /// An N-Triples file written by `kg`, or a labeled stage (needs --ontology).
    pub source: PathBuf,
    #[arg(long)]
    pub ontology: Option<PathBuf>,
    /// Competency question 1 to 5.
    #[arg(long, conflicts_with = "pattern", required_unless_present = "pattern")]
    pub cq: Option<u8>,
    /// Pattern file.
    #[arg(long)]
    pub pattern: Option<PathBuf>,
    /// `NAME=value` for `$NAME` in the pattern; repeatable.
    #[arg(long)]
    pub param: Vec<String>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args)]
pub struct ServeArgs {
    pub stage: PathBuf,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory with the tagging UI assets.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
    /// Accept `PUT /semantic-layer` and save it next to the stage.
    #[arg(long)]
    pub write_back: bool,
}

/// A problem with the inputs or flags (exit status 1).
#[derive(Debug)]
pub struct UserError(pub String);

impl std::fmt::Display for UserError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UserError {}

/// Wraps any error as a user error.
pub fn user(e: impl std::fmt::Display) -> anyhow::Error {
    anyhow::Error::new(UserError(e.to_string()))
}

pub fn print_diagnostics(diags: &[Diagnostic]) {
    for d in diags {
        eprintln!("{}", d.to_json_line());
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = match &cli.config {
        Some(p) => Config::load(p).map_err(|e| user(format!("{e:#}")))?,
        None => Config::default(),
    };
    match cli.command {
        Command::Convert(a) => commands::convert(a, &config),
        Command::Refine(a) => commands::refine(a, &config),
        Command::Report(a) => commands::report(a, &config),
        Command::Label(a) => commands::label(a),
        Command::Kg(a) => commands::kg(a, &config),
        Command::Query(a) => commands::query(a, &config),
        Command::Serve(a) => serve::serve(a, &config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = std::panic::catch_unwind(|| run(cli));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            let is_user = e.chain().any(|c| c.is::<UserError>());
            let (code, status) = if is_user {
                ("user-error", 1)
            } else {
                ("internal-error", 2)
            };
            print_diagnostics(&[Diagnostic::error(code, format!("{e:#}"))]);
            ExitCode::from(status)
        }
        Err(_) => {
            print_diagnostics(&[Diagnostic::error("internal-error", "unexpected panic")]);
            ExitCode::from(2)
        }
    }
}
