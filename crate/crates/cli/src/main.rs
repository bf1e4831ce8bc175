use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod manifest;

use commands::Failure;

/// Flow-matching docking toolkit: priors, coupling, training, sampling and scoring.
#[derive(Debug, Parser)]
#[command(name = "holoflow", version, about)]
struct Cli {
    /// Worker threads for parallel stages.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Summarize SMILES strings and PDB files.
    Parse(ParseArgs),
    /// Draw prior complexes: noised protein template plus harmonic ligand.
    Prior(PriorArgs),
    /// Filter an apo/holo manifest by TM-score and RMSD.
    Couple(CoupleArgs),
    /// Train the endpoint field on apo/holo pairs.
    Train(TrainArgs),
    /// Sample and rank complex structures for one protein and ligand.
    Generate(GenerateArgs),
    /// Score predicted poses and affinities against references.
    Evaluate(EvaluateArgs),
    /// Superpose one structure onto another.
    Align(AlignArgs),
    /// TM-score and Cα RMSD between two residue-aligned structures.
    Score(ScoreArgs),
    /// Repeat a run from its run_manifest.json.
    Rerun(RerunArgs),
}

#[derive(Debug, Args)]
struct ParseArgs {
    /// SMILES string (repeatable).
    #[arg(long)]
    smiles: Vec<String>,
    /// File with one SMILES per line.
    #[arg(long)]
    smiles_file: Option<PathBuf>,
    /// PDB file (repeatable).
    #[arg(long)]
    pdb: Vec<PathBuf>,
    /// Also write parse_summary.json and a run manifest here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LossKind {
    AlignedMse,
    ClampedAlignedError,
}

#[derive(Debug, Args)]
struct PriorFlags {
    /// Protein template noise (Å).
    #[arg(long, default_value_t = holoflow::priors::DEFAULT_SIGMA)]
    sigma: f64,
    /// Ligand prior centre: `protein`, `origin` or `x,y,z`.
    #[arg(long, default_value = "protein")]
    center: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct PriorArgs {
    #[arg(long)]
    protein: PathBuf,
    #[arg(long)]
    smiles: String,
    #[arg(long, default_value_t = 1)]
    samples: usize,
    #[command(flatten)]
    prior: PriorFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CoupleArgs {
    /// CSV with columns id, apo_path, holo_path.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 0.7)]
    tm_min: f64,
    /// Exclusive Cα RMSD ceiling (Å).
    #[arg(long, default_value_t = 5.0)]
    rmsd_max: f64,
    #[arg(long)]
    min_residues: Option<usize>,
    #[arg(long)]
    max_residues: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// CSV with columns id, apo_path, holo_path, smiles and optional affinity.
    #[arg(long)]
    dataset: PathBuf,
    /// Start from this checkpoint instead of a fresh initialisation.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long, default_value_t = holoflow::fieldnet::DEFAULT_WIDTH)]
    width: usize,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long = "lr", default_value_t = 0.2)]
    learning_rate: f64,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.2)]
    lambda_x: f64,
    #[arg(long, default_value_t = 0.1)]
    lambda_b: f64,
    #[arg(long, value_enum, default_value_t = LossKind::AlignedMse)]
    loss: LossKind,
    /// Per-atom error cap for the clamped loss (Å).
    #[arg(long, default_value_t = holoflow::fieldnet::DEFAULT_ERROR_CLAMP)]
    clamp: f64,
    /// Length scale of the pocket weights used to superpose apo onto holo (Å).
    #[arg(long, default_value_t = holoflow::geometry::DEFAULT_POCKET_LENGTH_SCALE)]
    pocket_scale: f64,
    #[command(flatten)]
    prior: PriorFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    protein: PathBuf,
    #[arg(long)]
    smiles: String,
    /// Trained field; an untrained field of `--width` is used without one.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = holoflow::fieldnet::DEFAULT_WIDTH)]
    width: usize,
    #[arg(long, default_value_t = 40)]
    steps: usize,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Skip the per-step superposition onto the predicted endpoint.
    #[arg(long)]
    no_align: bool,
    /// Superpose on protein atoms only.
    #[arg(long)]
    align_protein_only: bool,
    #[arg(long, default_value_t = holoflow::fieldnet::TOP_K)]
    samples: usize,
    #[command(flatten)]
    prior: PriorFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// CSV with columns id, predicted_path, reference_path, smiles and
    /// optional predicted_affinity, true_affinity.
    #[arg(long)]
    predictions: PathBuf,
    /// Success cut-off on symmetry-corrected ligand RMSD (Å).
    #[arg(long, default_value_t = holoflow::eval::DEFAULT_SUCCESS_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = holoflow::geometry::DEFAULT_POCKET_LENGTH_SCALE)]
    pocket_scale: f64,
    /// Compare ligands in the frames given, without pocket superposition.
    #[arg(long)]
    no_superpose: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AlignArgs {
    #[arg(long)]
    mobile: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Plain Cα superposition even when the target has a ligand.
    #[arg(long)]
    unweighted: bool,
    #[arg(long, default_value_t = holoflow::geometry::DEFAULT_POCKET_LENGTH_SCALE)]
    pocket_scale: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RerunArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Write to this directory instead of the recorded one.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
}

pub(crate) fn dispatch(argv: &[String]) -> Result<(), Failure> {
    let cli = Cli::try_parse_from(std::iter::once("holoflow".to_string()).chain(argv.iter().cloned()))
        .map_err(Failure::Usage)?;
    init_logging(cli.verbose);
    if cli.jobs == 0 {
        return Err(Failure::user_msg("--jobs must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| Failure::Internal(e.into()))?;
    pool.install(|| match &cli.command {
        Command::Parse(a) => commands::parse(a, argv),
        Command::Prior(a) => commands::prior(a, argv),
        Command::Couple(a) => commands::couple(a, argv),
        Command::Train(a) => commands::train(a, argv),
        Command::Generate(a) => commands::generate(a, argv),
        Command::Evaluate(a) => commands::evaluate(a, argv),
        Command::Align(a) => commands::align(a, argv),
        Command::Score(a) => commands::score(a, argv),
        Command::Rerun(a) => commands::rerun(a),
    })
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => failure.report(),
    }
}
