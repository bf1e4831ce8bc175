use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde::{Deserialize, Serialize};
use serde_json::json;

use holoflow::coupling::{filter_manifest, write_manifest, write_report, CouplingCriteria, CouplingError};
use holoflow::eval::{build_report, symmetry_rmsd, write_report_csv, EvalInput};
use holoflow::fieldnet::{
    self, init_field, read_checkpoint, sample_rng, write_checkpoint, FieldError, FieldParams, GenerateConfig,
    StructureLoss, TrainConfig, TrainingExample,
};
use holoflow::flow::{FlowConfig, FlowError};
use holoflow::geometry::{aligned_rmsd, kabsch_uniform, pocket_weighted_align, rmsd, tm_score};
use holoflow::molgraph::{parse_smiles, MolGraph, DEFAULT_AUTOMORPHISM_CAP};
use holoflow::priors::{assemble_prior, CenterMode, PriorConfig};
use holoflow::structures::{read_pdb, write_pdb, write_trajectory, Structure};

use crate::manifest::{redirect_out, RunManifest, MANIFEST_FILE};
use crate::{
    AlignArgs, CoupleArgs, EvaluateArgs, GenerateArgs, LossKind, ParseArgs, PriorArgs, PriorFlags, RerunArgs,
    ScoreArgs, TrainArgs,
};

/// Why a subcommand stopped. Maps to the process exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(clap::Error),
    /// Bad flags or inputs: exit 1.
    User(anyhow::Error),
    /// Anything else: exit 2.
    Internal(anyhow::Error),
}

impl Failure {
    pub fn user_msg(message: impl Display) -> Self {
        Failure::User(anyhow::anyhow!("{message}"))
    }

    pub fn report(self) -> ExitCode {
        match self {
            Failure::Usage(e) => {
                let code = if e.use_stderr() { 1 } else { 0 };
                let _ = e.print();
                ExitCode::from(code)
            }
            Failure::User(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
            Failure::Internal(e) => {
                eprintln!("internal error: {e:#}");
                ExitCode::from(2)
            }
        }
    }
}

type CmdResult<T = ()> = Result<T, Failure>;

fn user<E: Display>(context: impl Display) -> impl FnOnce(E) -> Failure {
    move |e| Failure::User(anyhow::anyhow!("{context}: {e}"))
}

fn internal<E: Display>(context: impl Display) -> impl FnOnce(E) -> Failure {
    move |e| Failure::Internal(anyhow::anyhow!("{context}: {e}"))
}

fn field_failure(context: &str, e: FieldError) -> Failure {
    let is_user = matches!(
        e,
        FieldError::InvalidWidth
            | FieldError::ParameterCount { .. }
            | FieldError::NonFiniteParameter
            | FieldError::TopologyMismatch { .. }
            | FieldError::EmptyDataset
            | FieldError::InvalidConfig(_)
            | FieldError::Dataset(_)
            | FieldError::Checkpoint(_)
            | FieldError::Prior(_)
            | FieldError::Flow(FlowError::InvalidConfig(_))
    );
    let e = anyhow::anyhow!("{context}: {e}");
    if is_user {
        Failure::User(e)
    } else {
        Failure::Internal(e)
    }
}

fn read_text(path: &Path) -> CmdResult<String> {
    std::fs::read_to_string(path).map_err(user(format!("cannot read {}", path.display())))
}

fn load_structure(path: &Path) -> CmdResult<Structure> {
    read_pdb(&read_text(path)?).map_err(user(path.display()))
}

fn load_graph(smiles: &str) -> CmdResult<MolGraph> {
    parse_smiles(smiles).map_err(user(format!("SMILES {smiles:?}")))
}

fn resolve(base: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn parent_dir(path: &Path) -> &Path {
    path.parent().unwrap_or_else(|| Path::new("."))
}

/// Output directory plus the manifest being assembled for it.
struct Outputs {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Outputs {
    fn create(dir: &Path, manifest: RunManifest) -> CmdResult<Self> {
        std::fs::create_dir_all(dir).map_err(user(format!("cannot create {}", dir.display())))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> CmdResult {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(internal(format!("cannot create {}", parent.display())))?;
        }
        std::fs::write(&path, contents).map_err(internal(format!("cannot write {}", path.display())))?;
        self.manifest.output(name);
        Ok(())
    }

    fn finish(self) -> CmdResult {
        let path = self.dir.join(MANIFEST_FILE);
        std::fs::write(&path, self.manifest.to_json()).map_err(internal(format!("cannot write {}", path.display())))
    }
}

fn parse_center(text: &str) -> CmdResult<CenterMode> {
    match text {
        "protein" => Ok(CenterMode::ProteinCentroid),
        "origin" => Ok(CenterMode::Origin),
        _ => {
            let parts: Vec<f64> = text
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(user(format!("--center {text:?}")))?;
            match parts.as_slice() {
                &[x, y, z] if parts.iter().all(|v| v.is_finite()) => Ok(CenterMode::Point([x, y, z])),
                _ => Err(Failure::user_msg(format!(
                    "--center expects protein, origin or x,y,z; got {text:?}"
                ))),
            }
        }
    }
}

fn prior_config(flags: &PriorFlags) -> CmdResult<PriorConfig> {
    if !(flags.sigma.is_finite() && flags.sigma >= 0.0) {
        return Err(Failure::user_msg(format!("--sigma must be non-negative, got {}", flags.sigma)));
    }
    Ok(PriorConfig {
        sigma: flags.sigma,
        center: parse_center(&flags.center)?,
        seed: flags.seed,
    })
}

#[derive(Serialize)]
struct GraphSummary {
    smiles: String,
    atoms: usize,
    bonds: usize,
    fragments: usize,
    /// Product of per-fragment automorphism counts; absent if not enumerable.
    automorphisms: Option<usize>,
    automorphisms_truncated: bool,
}

fn summarize_graph(smiles: &str, graph: &MolGraph) -> GraphSummary {
    let mut count = Some(1usize);
    let mut truncated = false;
    for f in 0..graph.fragment_count() {
        match graph.automorphisms(f, DEFAULT_AUTOMORPHISM_CAP) {
            Ok(a) => {
                count = count.and_then(|c| c.checked_mul(a.perms.len()));
                truncated |= a.truncated;
            }
            Err(_) => count = None,
        }
    }
    GraphSummary {
        smiles: smiles.to_string(),
        atoms: graph.atom_count(),
        bonds: graph.bonds().len(),
        fragments: graph.fragment_count(),
        automorphisms: count,
        automorphisms_truncated: truncated,
    }
}

#[derive(Serialize)]
struct PdbSummary {
    path: String,
    chains: usize,
    residues: usize,
    protein_atoms: usize,
    ligand_atoms: usize,
}

pub fn parse(args: &ParseArgs, argv: &[String]) -> CmdResult {
    let mut inputs: Vec<(String, String)> = args.smiles.iter().map(|s| ("argument".into(), s.clone())).collect();
    if let Some(path) = &args.smiles_file {
        for (k, line) in read_text(path)?.lines().enumerate() {
            let line = line.trim();
            if !line.is_empty() {
                inputs.push((format!("{}:{}", path.display(), k + 1), line.to_string()));
            }
        }
    }
    if inputs.is_empty() && args.pdb.is_empty() {
        return Err(Failure::user_msg("nothing to parse: give --smiles, --smiles-file or --pdb"));
    }
    let mut graphs = Vec::new();
    for (origin, smiles) in &inputs {
        let graph = parse_smiles(smiles).map_err(user(format!("{origin}: SMILES {smiles:?}")))?;
        let s = summarize_graph(smiles, &graph);
        let autos = match s.automorphisms {
            Some(n) if s.automorphisms_truncated => format!("{n}+"),
            Some(n) => n.to_string(),
            None => "n/a".into(),
        };
        println!(
            "{}\tatoms={}\tbonds={}\tfragments={}\tautomorphisms={autos}",
            s.smiles, s.atoms, s.bonds, s.fragments
        );
        graphs.push(s);
    }
    let mut pdbs = Vec::new();
    for path in &args.pdb {
        let st = load_structure(path)?;
        let s = PdbSummary {
            path: path.display().to_string(),
            chains: st.chains.len(),
            residues: st.residue_count(),
            protein_atoms: st.protein_atom_count(),
            ligand_atoms: st.ligand_atoms.len(),
        };
        println!(
            "{}\tchains={}\tresidues={}\tprotein_atoms={}\tligand_atoms={}",
            s.path, s.chains, s.residues, s.protein_atoms, s.ligand_atoms
        );
        pdbs.push(s);
    }
    if let Some(dir) = &args.out {
        let mut manifest = RunManifest::new("parse", argv, None, json!({}));
        if let Some(p) = &args.smiles_file {
            manifest.input(p);
        }
        args.pdb.iter().for_each(|p| manifest.input(p));
        let mut out = Outputs::create(dir, manifest)?;
        let summary = json!({ "smiles": graphs, "pdb": pdbs });
        out.write("parse_summary.json", format!("{}\n", serde_json::to_string_pretty(&summary).expect("summary serializes")))?;
        out.finish()?;
    }
    Ok(())
}

fn complex_structure(template: &Structure, graph: &MolGraph, protein: &[holoflow::Vec3], ligand: &[holoflow::Vec3]) -> Structure {
    template
        .with_protein_coords(protein)
        .with_ligand(&graph.elements(), ligand, graph.fragment_ids())
}

pub fn prior(args: &PriorArgs, argv: &[String]) -> CmdResult {
    let template = load_structure(&args.protein)?;
    let graph = load_graph(&args.smiles)?;
    let config = prior_config(&args.prior)?;
    if args.samples == 0 {
        return Err(Failure::user_msg("--samples must be at least 1"));
    }
    let mut manifest = RunManifest::new(
        "prior",
        argv,
        Some(config.seed),
        json!({ "prior": config, "samples": args.samples, "smiles": args.smiles }),
    );
    manifest.input(&args.protein);
    let mut out = Outputs::create(&args.out, manifest)?;
    for k in 0..args.samples {
        let mut rng = sample_rng(config.seed, k);
        let state = assemble_prior(&template, &graph, &config, &mut rng).map_err(user("prior"))?;
        let st = complex_structure(&template, &graph, state.protein(), state.ligand());
        out.write(&format!("prior_{k}.pdb"), write_pdb(&st).map_err(internal("PDB output"))?)?;
    }
    println!("wrote {} prior sample(s) to {}", args.samples, args.out.display());
    out.finish()
}

pub fn couple(args: &CoupleArgs, argv: &[String]) -> CmdResult {
    let criteria = CouplingCriteria {
        tm_min: args.tm_min,
        rmsd_max: args.rmsd_max,
        min_residues: args.min_residues,
        max_residues: args.max_residues,
    };
    criteria.validate().map_err(user("coupling criteria"))?;
    let outcome = filter_manifest(&args.manifest, &criteria).map_err(|e| match e {
        CouplingError::Io { .. } | CouplingError::Manifest(_) | CouplingError::InvalidCriteria(_) => {
            Failure::User(anyhow::anyhow!("{}: {e}", args.manifest.display()))
        }
        other => Failure::Internal(other.into()),
    })?;
    let mut manifest = RunManifest::new("couple", argv, None, json!({ "criteria": criteria }));
    manifest.input(&args.manifest);
    let mut out = Outputs::create(&args.out, manifest)?;
    out.write("coupled.csv", write_manifest(&outcome.accepted).map_err(internal("manifest output"))?)?;
    out.write("coupling_report.csv", write_report(&outcome.report).map_err(internal("report output"))?)?;
    for row in outcome.report.iter().filter(|r| r.error.is_some()) {
        log::warn!("{}: {}", row.id, row.error.as_deref().unwrap_or_default());
    }
    match outcome.acceptance_rate() {
        Some(rate) => println!(
            "accepted {}/{} pairs ({:.1}%)",
            outcome.accepted.len(),
            outcome.report.len(),
            100.0 * rate
        ),
        None => println!("manifest has no rows"),
    }
    out.finish()
}

#[derive(Debug, Deserialize)]
struct DatasetRow {
    id: String,
    apo_path: String,
    holo_path: String,
    smiles: String,
    #[serde(default)]
    affinity: Option<f64>,
}

fn load_dataset(path: &Path, pocket_scale: f64) -> CmdResult<Vec<TrainingExample>> {
    let text = read_text(path)?;
    let base = parent_dir(path);
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut examples = Vec::new();
    for row in reader.deserialize::<DatasetRow>() {
        let row = row.map_err(user(path.display()))?;
        let apo = load_structure(&resolve(base, &row.apo_path))?;
        let holo = load_structure(&resolve(base, &row.holo_path))?;
        let graph = load_graph(&row.smiles)?;
        let (apo, _) = pocket_weighted_align(&apo, &holo, &holo.ligand_coords(), pocket_scale)
            .map_err(user(format!("{}: superposing apo onto holo", row.id)))?;
        let example = TrainingExample::new(&apo, &holo, &graph, row.affinity)
            .map_err(|e| field_failure(&row.id, e))?;
        examples.push(example);
    }
    Ok(examples)
}

pub fn train(args: &TrainArgs, argv: &[String]) -> CmdResult {
    let prior = prior_config(&args.prior)?;
    let config = TrainConfig {
        lambda_x: args.lambda_x,
        lambda_b: args.lambda_b,
        sigma: prior.sigma,
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: prior.seed,
        structure_loss: match args.loss {
            LossKind::AlignedMse => StructureLoss::AlignedMse,
            LossKind::ClampedAlignedError => StructureLoss::ClampedAlignedError { clamp: args.clamp },
        },
        prior_center: prior.center,
    };
    config.validate().map_err(|e| field_failure("training config", e))?;
    let dataset = load_dataset(&args.dataset, args.pocket_scale)?;
    let initial = match &args.init {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(user(format!("cannot read {}", path.display())))?;
            read_checkpoint(&bytes).map_err(|e| field_failure(&path.display().to_string(), e))?
        }
        None => init_field(args.width, config.seed).map_err(|e| field_failure("--width", e))?,
    };
    let outcome = fieldnet::train(&initial, &dataset, &config).map_err(|e| field_failure("training", e))?;

    let mut manifest = RunManifest::new(
        "train",
        argv,
        Some(config.seed),
        json!({ "train": config, "width": initial.width(), "pocket_scale": args.pocket_scale, "examples": dataset.len() }),
    );
    manifest.input(&args.dataset);
    if let Some(p) = &args.init {
        manifest.input(p);
    }
    let mut out = Outputs::create(&args.out, manifest)?;
    out.write("field.ckpt", write_checkpoint(&outcome.params))?;
    let mut curve = csv::Writer::from_writer(Vec::new());
    let header = ["epoch", "total", "structure", "affinity"];
    curve.write_record(header).map_err(internal("loss curve"))?;
    for e in &outcome.curve {
        let l = &e.loss;
        curve
            .write_record([e.epoch.to_string(), l.total.to_string(), l.structure.to_string(), l.affinity.to_string()])
            .map_err(internal("loss curve"))?;
    }
    out.write("loss_curve.csv", curve.into_inner().map_err(internal("loss curve"))?)?;
    match (outcome.curve.first(), outcome.curve.last()) {
        (Some(a), Some(b)) => println!(
            "trained {} epoch(s) on {} example(s): loss {:.6} -> {:.6}",
            outcome.curve.len(),
            dataset.len(),
            a.loss.total,
            b.loss.total
        ),
        _ => println!("no epochs run; wrote initial parameters"),
    }
    out.finish()
}

#[derive(Serialize)]
struct RankedRow {
    rank: usize,
    sample: usize,
    structure: String,
    trajectory: String,
    confidence: f64,
    affinity: f64,
}

fn load_params(checkpoint: Option<&Path>, width: usize, seed: u64) -> CmdResult<FieldParams> {
    match checkpoint {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(user(format!("cannot read {}", path.display())))?;
            read_checkpoint(&bytes).map_err(|e| field_failure(&path.display().to_string(), e))
        }
        None => {
            log::warn!("no --checkpoint given; sampling with an untrained field");
            init_field(width, seed).map_err(|e| field_failure("--width", e))
        }
    }
}

pub fn generate(args: &GenerateArgs, argv: &[String]) -> CmdResult {
    let template = load_structure(&args.protein)?;
    let graph = load_graph(&args.smiles)?;
    let prior = prior_config(&args.prior)?;
    let flow = FlowConfig {
        steps: args.steps,
        eta: args.eta,
        align_each_step: !args.no_align,
        align_protein_only: args.align_protein_only,
        ..FlowConfig::default()
    };
    flow.validate().map_err(user("flow config"))?;
    if args.samples == 0 {
        return Err(Failure::user_msg("--samples must be at least 1"));
    }
    let params = load_params(args.checkpoint.as_deref(), args.width, prior.seed)?;
    let config = GenerateConfig {
        flow,
        prior,
        samples: args.samples,
    };
    let ranked = fieldnet::generate(&params, &template, &graph, &config).map_err(|e| field_failure("generate", e))?;

    let mut manifest = RunManifest::new(
        "generate",
        argv,
        Some(config.prior.seed),
        json!({
            "flow": config.flow,
            "prior": config.prior,
            "samples": config.samples,
            "smiles": args.smiles,
            "width": params.width(),
        }),
    );
    manifest.input(&args.protein);
    if let Some(p) = &args.checkpoint {
        manifest.input(p);
    }
    let mut out = Outputs::create(&args.out, manifest)?;
    let mut table = csv::Writer::from_writer(Vec::new());
    for (k, sample) in ranked.iter().enumerate() {
        let rank = k + 1;
        let structure = format!("structures/rank{rank}.pdb");
        let trajectory = format!("trajectories/rank{rank}.jsonl");
        out.write(&structure, write_pdb(&sample.structure).map_err(internal("PDB output"))?)?;
        out.write(&trajectory, write_trajectory(&sample.trajectory))?;
        table
            .serialize(RankedRow {
                rank,
                sample: sample.index,
                structure,
                trajectory,
                confidence: sample.confidence,
                affinity: sample.affinity,
            })
            .map_err(internal("ranked table"))?;
        println!(
            "rank {rank}: sample {} confidence {:.4} affinity {:.3}",
            sample.index, sample.confidence, sample.affinity
        );
    }
    out.write("ranked.csv", table.into_inner().map_err(internal("ranked table"))?)?;
    out.finish()
}

#[derive(Debug, Deserialize)]
struct PredictionRow {
    id: String,
    predicted_path: String,
    reference_path: String,
    smiles: String,
    #[serde(default)]
    predicted_affinity: Option<f64>,
    #[serde(default)]
    true_affinity: Option<f64>,
}

fn eval_input(row: PredictionRow, base: &Path, args: &EvaluateArgs) -> CmdResult<EvalInput> {
    let predicted = load_structure(&resolve(base, &row.predicted_path))?;
    let reference = load_structure(&resolve(base, &row.reference_path))?;
    let graph = load_graph(&row.smiles)?;
    let reference_ligand = reference.ligand_coords();
    let pocket = !args.no_superpose && predicted.residue_count() > 0 && reference.residue_count() > 0;
    let predicted = if pocket {
        pocket_weighted_align(&predicted, &reference, &reference_ligand, args.pocket_scale)
            .map_err(user(format!("{}: pocket superposition", row.id)))?
            .0
    } else {
        predicted
    };
    let rmsd = symmetry_rmsd(&graph, &predicted.ligand_coords(), &reference_ligand).map_err(user(&row.id))?;
    if rmsd.truncated {
        log::warn!("{}: automorphism search truncated; symmetry RMSD may be overestimated", row.id);
    }
    Ok(EvalInput {
        id: row.id,
        rmsd,
        predicted_affinity: row.predicted_affinity,
        true_affinity: row.true_affinity,
    })
}

pub fn evaluate(args: &EvaluateArgs, argv: &[String]) -> CmdResult {
    if !(args.threshold.is_finite() && args.threshold >= 0.0) {
        return Err(Failure::user_msg(format!("--threshold must be non-negative, got {}", args.threshold)));
    }
    let text = read_text(&args.predictions)?;
    let base = parent_dir(&args.predictions);
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut inputs = Vec::new();
    for row in reader.deserialize::<PredictionRow>() {
        inputs.push(eval_input(row.map_err(user(args.predictions.display()))?, base, args)?);
    }
    let report = build_report(inputs, args.threshold).map_err(user(args.predictions.display()))?;

    let mut manifest = RunManifest::new(
        "evaluate",
        argv,
        None,
        json!({ "threshold": args.threshold, "pocket_scale": args.pocket_scale, "superpose": !args.no_superpose }),
    );
    manifest.input(&args.predictions);
    let mut out = Outputs::create(&args.out, manifest)?;
    out.write("eval_report.csv", write_report_csv(&report).map_err(internal("report output"))?)?;
    out.write("eval_report.json", format!("{}\n", serde_json::to_string_pretty(&report).map_err(internal("report output"))?))?;
    let agg = &report.aggregate;
    println!("{} complex(es), success rate {:.3} at {} Å", agg.count, agg.success_rate, report.threshold);
    if let Some(m) = &agg.affinity {
        let show = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.4}"));
        println!(
            "affinity: pearson {} spearman {} rmse {:.4} mae {:.4}",
            show(m.pearson),
            show(m.spearman),
            m.rmse,
            m.mae
        );
    }
    out.finish()
}

pub fn align(args: &AlignArgs, argv: &[String]) -> CmdResult {
    let mobile = load_structure(&args.mobile)?;
    let target = load_structure(&args.target)?;
    let (a, b) = (mobile.ca_coords(), target.ca_coords());
    if a.len() != b.len() {
        return Err(Failure::user_msg(format!(
            "mobile has {} Cα atoms, target has {}",
            a.len(),
            b.len()
        )));
    }
    let weighted = !args.unweighted && !target.ligand_atoms.is_empty();
    let aligned = if weighted {
        pocket_weighted_align(&mobile, &target, &target.ligand_coords(), args.pocket_scale)
            .map_err(user("superposition"))?
            .0
    } else {
        let transform = kabsch_uniform(&a, &b).map_err(user("superposition"))?;
        mobile.transformed(&transform)
    };
    let moved = aligned.ca_coords();
    let before = rmsd(&a, &b).map_err(user("RMSD"))?;
    let after = rmsd(&moved, &b).map_err(user("RMSD"))?;
    let tm = tm_score(&moved, &b).map_err(user("TM-score"))?;
    let mut manifest = RunManifest::new(
        "align",
        argv,
        None,
        json!({ "pocket_weighted": weighted, "pocket_scale": args.pocket_scale }),
    );
    manifest.input(&args.mobile);
    manifest.input(&args.target);
    let mut out = Outputs::create(&args.out, manifest)?;
    out.write("aligned.pdb", write_pdb(&aligned).map_err(internal("PDB output"))?)?;
    println!("Cα RMSD {before:.4} -> {after:.4} Å, TM-score {tm:.4}");
    out.finish()
}

pub fn score(args: &ScoreArgs, argv: &[String]) -> CmdResult {
    let a = load_structure(&args.a)?.ca_coords();
    let b = load_structure(&args.b)?.ca_coords();
    if a.len() != b.len() {
        return Err(Failure::user_msg(format!("{} vs {} Cα atoms", a.len(), b.len())));
    }
    let tm = tm_score(&a, &b).map_err(user("TM-score"))?;
    let r = aligned_rmsd(&a, &b).map_err(user("RMSD"))?;
    println!("TM-score {tm:.4}, Cα RMSD {r:.4} Å over {} residues", a.len());
    if let Some(dir) = &args.out {
        let mut manifest = RunManifest::new("score", argv, None, json!({}));
        manifest.input(&args.a);
        manifest.input(&args.b);
        let mut out = Outputs::create(dir, manifest)?;
        out.write("score.json", format!("{}\n", json!({ "tm_score": tm, "rmsd": r, "residues": a.len() })))?;
        out.finish()?;
    }
    Ok(())
}

pub fn rerun(args: &RerunArgs) -> CmdResult {
    let text = read_text(&args.manifest)?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(user(args.manifest.display()))?;
    if manifest.argv.first().map(String::as_str) == Some("rerun") {
        return Err(Failure::user_msg("manifest records a rerun"));
    }
    let argv = match &args.out {
        Some(dir) => redirect_out(&manifest.argv, dir),
        None => manifest.argv.clone(),
    };
    log::info!("re-running: {}", argv.join(" "));
    crate::dispatch(&argv)
}
