//! One PASS/FAIL line per acceptance criterion, each with its runtime budget.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, Quaternion, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use holoflow::coupling::CouplingCriteria;
use holoflow::eval::{affinity_metrics, success_rate, symmetry_rmsd};
use holoflow::fieldnet::{
    forward, generate, gradients, init_field, predict_affinity, structure_loss, train, ComplexTopology, FieldParams,
    GenerateConfig, LossWeights, StructureLoss, TrainConfig, TrainItem, TrainingExample,
};
use holoflow::flow::{integrate, interpolate, FlowConfig};
use holoflow::geometry::{aligned_rmsd, centroid, kabsch_uniform, rmsd};
use holoflow::molgraph::{parse_smiles, DEFAULT_AUTOMORPHISM_CAP};
use holoflow::priors::{sample_harmonic, PriorConfig};
use holoflow::structures::{concat_state, read_pdb, Chain, ComplexState, ProteinAtom, Residue, Structure};
use holoflow::Vec3;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn points(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<Vec3> {
    (0..n)
        .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale)
        .collect()
}

/// Uniform rotation from a quaternion drawn uniformly from the unit ball.
fn rotation(rng: &mut impl Rng) -> UnitQuaternion<f64> {
    loop {
        let q = Quaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = q.norm();
        if n > 1e-3 && n <= 1.0 {
            return UnitQuaternion::from_quaternion(q);
        }
    }
}

fn oracle_transport() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_frame: f64 = 0.0;
    let mut worst_final: f64 = 0.0;
    for case in 0..20 {
        let x1 = concat_state(&points(&mut rng, 6, 8.0), &[points(&mut rng, 4, 3.0)], 1.0).unwrap();
        let raw = concat_state(&points(&mut rng, 6, 8.0), &[points(&mut rng, 4, 3.0)], 0.0).unwrap();
        // Odd cases pre-superpose x0 on x1 and keep per-step alignment on;
        // every interpolant is then already optimally aligned.
        let aligned = case % 2 == 1;
        let x0 = if aligned {
            let t = kabsch_uniform(&raw.coords, &x1.coords).unwrap();
            raw.with_coords(t.apply_all(&raw.coords), 0.0).unwrap()
        } else {
            raw
        };
        let target = x1.coords.clone();
        let oracle = move |_: &ComplexState, _: f64| target.clone();
        let config = FlowConfig { align_each_step: aligned, ..FlowConfig::default() };
        assert_eq!((config.steps, config.eta), (40, 1.0));
        let traj = integrate(&oracle, &x0, &config, case).map_err(|e| e.to_string())?;
        for frame in &traj.frames {
            let path = interpolate(&x0, &x1, frame.state.time).unwrap();
            for (a, b) in frame.state.coords.iter().zip(&path.coords) {
                worst_frame = worst_frame.max((a - b).norm());
            }
        }
        let span = x0.coords.iter().zip(&x1.coords).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let last = traj.last_state().unwrap();
        for (a, b) in last.coords.iter().zip(&x1.coords) {
            worst_final = worst_final.max((a - b).norm() / span);
        }
    }
    ensure(
        worst_frame <= 1e-5 && worst_final <= 1e-6,
        format!("max frame deviation {worst_frame:.2e} Å, final deviation {worst_final:.2e}·‖x0−x1‖"),
    )
}

fn pseudo_inverse_resistance(l: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    let eig = l.clone().symmetric_eigen();
    let n = l.nrows();
    let mut pinv = DMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = eig.eigenvalues[k];
        if lambda > 1e-10 {
            let v = eig.eigenvectors.column(k);
            pinv += v * v.transpose() / lambda;
        }
    }
    pinv[(i, i)] + pinv[(j, j)] - 2.0 * pinv[(i, j)]
}

fn harmonic_prior() -> Check {
    let graph = parse_smiles("CCC").unwrap();
    let laplacian = graph.laplacian(0).unwrap();
    let oracle = 3.0 * pseudo_inverse_resistance(&laplacian.matrix, 0, 2);
    let center = Vec3::new(1.5, -2.0, 4.25);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 100_000;
    let mut sum = 0.0;
    let mut centroid_error: f64 = 0.0;
    for _ in 0..n {
        let x = sample_harmonic(&laplacian, center, &mut rng).unwrap();
        sum += (x[0] - x[2]).norm_squared();
        centroid_error = centroid_error.max((centroid(&x) - center).norm());
    }
    let mean = sum / n as f64;
    ensure(
        (oracle - 6.0).abs() < 1e-9 && (mean - oracle).abs() <= 0.05 * oracle && centroid_error < 1e-12,
        format!("E‖x1−x3‖² = {mean:.4} Ų vs oracle {oracle:.4}; max centroid offset {centroid_error:.1e} Å"),
    )
}

/// Trunk of `trunk` with the affinity head of `head`: the affinity term sees
/// a detached embedding, so only head parameters move it.
fn with_head(trunk: &FieldParams, head: &FieldParams) -> FieldParams {
    let k = trunk.head_start();
    let mut v = trunk.values()[..k].to_vec();
    v.extend_from_slice(&head.values()[k..]);
    FieldParams::from_values(trunk.width(), v).unwrap()
}

fn reference_loss(params: &FieldParams, frozen: &FieldParams, batch: &[TrainItem], weights: &LossWeights) -> f64 {
    let mut total = 0.0;
    for item in batch {
        let out = forward(params, item.topology, &item.x_t, item.t).unwrap();
        let (s, _) = structure_loss(&out.prediction, &item.target, weights.structure_loss, None);
        let detached = forward(frozen, item.topology, &item.x_t, item.t).unwrap().prediction;
        let state = item.x_t.with_coords(detached, 1.0).unwrap();
        let b = predict_affinity(&with_head(frozen, params), item.topology, &state).unwrap();
        let a = item.affinity.map_or(0.0, |label| (b - label).powi(2));
        total += weights.lambda_x * s + weights.lambda_b * a;
    }
    total / batch.len() as f64
}

fn gradient_oracle() -> Check {
    let graph = parse_smiles("CCO").unwrap();
    let topology = ComplexTopology::new(&["N", "C"], &graph);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let batch: Vec<TrainItem> = (0..3)
        .map(|_| {
            let t = rng.random_range(0.0..1.0);
            TrainItem {
                topology: &topology,
                x_t: concat_state(&points(&mut rng, 2, 3.0), &[points(&mut rng, 3, 2.0)], t).unwrap(),
                t,
                target: points(&mut rng, 5, 3.0),
                affinity: Some(rng.random_range(4.0..9.0)),
            }
        })
        .collect();
    assert_eq!(batch[0].x_t.len(), 5);
    let base = init_field(8, 3).unwrap();
    let values = base.values().iter().map(|v| v + rng.random_range(-0.1..0.1)).collect();
    let params = FieldParams::from_values(8, values).unwrap();
    let weights = LossWeights { lambda_x: 0.2, lambda_b: 0.1, structure_loss: StructureLoss::AlignedMse };
    let (_, grads) = gradients(&params, &batch, &weights).map_err(|e| e.to_string())?;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut tiny_mismatch = 0;
    for k in 0..params.len() {
        let shifted = |d: f64| {
            let mut v = params.values().to_vec();
            v[k] += d;
            FieldParams::from_values(8, v).unwrap()
        };
        let numeric = (reference_loss(&shifted(h), &params, &batch, &weights)
            - reference_loss(&shifted(-h), &params, &batch, &weights))
            / (2.0 * h);
        let analytic = grads.values()[k];
        let scale = analytic.abs().max(numeric.abs());
        if scale > 1e-7 {
            worst = worst.max((analytic - numeric).abs() / scale);
        } else if (analytic - numeric).abs() > 1e-9 {
            tiny_mismatch += 1;
        }
    }
    ensure(
        worst < 1e-4 && tiny_mismatch == 0,
        format!("{} parameters, worst relative error {worst:.2e}", params.len()),
    )
}

fn toy_protein(shift: f64) -> Structure {
    let residues = (0..5)
        .map(|k| {
            let a = k as f64 * 1.25;
            let r = 5.5 + if k >= 3 { shift } else { 0.0 };
            let ca = Vec3::new(r * a.cos(), r * a.sin(), 0.8 * k as f64 - 1.6);
            let atom = |name: &str, element: &str, offset: Vec3| ProteinAtom {
                name: name.into(),
                element: element.into(),
                position: ca + offset,
            };
            Residue {
                name: "ALA".into(),
                index: k as i32 + 1,
                atoms: vec![
                    atom("N", "N", Vec3::new(-0.5, 0.9, 0.8)),
                    atom("CA", "C", Vec3::zeros()),
                    atom("C", "C", Vec3::new(1.2, 0.4, -0.6)),
                ],
            }
        })
        .collect();
    Structure {
        chains: vec![Chain { id: 'A', residues }],
        ligand_atoms: vec![],
    }
}

fn toy_transport() -> Check {
    let graph = parse_smiles("CCCCO").unwrap();
    let apo = toy_protein(0.0);
    let holo_protein = toy_protein(0.8);
    let c = centroid(&holo_protein.ca_coords());
    let ligand: Vec<Vec3> = (0..5)
        .map(|i| c + Vec3::new(1.25 * i as f64 - 2.5, if i % 2 == 0 { 0.45 } else { -0.45 }, 0.3 * i as f64))
        .collect();
    let holo = holo_protein.with_ligand(&graph.elements(), &ligand, graph.fragment_ids());
    let example = TrainingExample::new(&apo, &holo, &graph, Some(6.0)).map_err(|e| e.to_string())?;
    let config = TrainConfig { epochs: 1500, seed: 4, ..TrainConfig::default() };
    let outcome = train(&init_field(64, 4).unwrap(), std::slice::from_ref(&example), &config).map_err(|e| e.to_string())?;
    let n = 50;
    let mut hits = 0;
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let gen = GenerateConfig {
            flow: FlowConfig::default(),
            prior: PriorConfig { seed: 1000 + k, ..PriorConfig::default() },
            samples: 1,
        };
        let sample = generate(&outcome.params, &apo, &graph, &gen).map_err(|e| e.to_string())?.remove(0);
        let last = sample.trajectory.last_state().unwrap();
        let r = aligned_rmsd(&last.coords, &example.target.coords).map_err(|e| e.to_string())?;
        worst = worst.max(r);
        if r <= 0.5 {
            hits += 1;
        }
    }
    ensure(
        config.epochs <= 2000 && hits * 5 >= n * 4,
        format!("{hits}/{n} samples within 0.5 Å after {} epochs (worst {worst:.3} Å)", config.epochs),
    )
}

fn kabsch_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_gap = f64::NEG_INFINITY;
    for _ in 0..100 {
        let n = rng.random_range(3..=4);
        let a = points(&mut rng, n, 3.0);
        let b = points(&mut rng, n, 3.0);
        let kabsch = aligned_rmsd(&a, &b).map_err(|e| e.to_string())?;
        let (ca, cb) = (centroid(&a), centroid(&b));
        let b0: Vec<Vec3> = b.iter().map(|p| p - cb).collect();
        let mut best = f64::INFINITY;
        for _ in 0..100_000 {
            let q = rotation(&mut rng);
            let moved: Vec<Vec3> = a.iter().map(|p| q * (p - ca)).collect();
            best = best.min(rmsd(&moved, &b0).unwrap());
        }
        worst_gap = worst_gap.max(kabsch - best);
    }
    let mut exact: f64 = 0.0;
    for _ in 0..100 {
        let a = points(&mut rng, 4, 3.0);
        let (q, shift) = (rotation(&mut rng), points(&mut rng, 1, 10.0)[0]);
        let b: Vec<Vec3> = a.iter().map(|p| q * p + shift).collect();
        exact = exact.max(aligned_rmsd(&a, &b).map_err(|e| e.to_string())?);
    }
    ensure(
        worst_gap <= 1e-3 && exact < 1e-9,
        format!("kabsch − brute force ≤ {worst_gap:.2e} Å; exact recovery residual {exact:.1e} Å"),
    )
}

fn coupling_truth_table() -> Check {
    let c = CouplingCriteria::default();
    let table = [(0.8, 3.0, true), (0.6, 3.0, false), (0.8, 5.0, false)];
    for (tm, r, expected) in table {
        if c.accepts(tm, r, 100) != expected {
            return Err(format!("tm {tm}, rmsd {r}: expected accept = {expected}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..1000 {
        let loose = CouplingCriteria {
            tm_min: rng.random_range(0.0..1.0),
            rmsd_max: rng.random_range(0.1..10.0),
            ..CouplingCriteria::default()
        };
        let strict = CouplingCriteria {
            tm_min: loose.tm_min + rng.random_range(0.0..0.3),
            rmsd_max: loose.rmsd_max * rng.random_range(0.5..1.0),
            ..CouplingCriteria::default()
        };
        for _ in 0..50 {
            let (tm, r) = (rng.random_range(0.0..1.0), rng.random_range(0.0..10.0));
            if strict.accepts(tm, r, 100) && !loose.accepts(tm, r, 100) {
                return Err(format!("monotonicity broken at tm {tm}, rmsd {r}"));
            }
        }
    }
    Ok("3 boundary cases exact; monotone over 1000 criteria pairs".into())
}

fn metric_kernels() -> Check {
    let m = affinity_metrics(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).map_err(|e| e.to_string())?;
    let (p, s) = (m.pearson.ok_or("pearson undefined")?, m.spearman.ok_or("spearman undefined")?);
    let close = (p - 1.0).abs() < 1e-9
        && (s - 1.0).abs() < 1e-9
        && (m.rmse - (14.0f64 / 3.0).sqrt()).abs() < 1e-9
        && (m.mae - 2.0).abs() < 1e-9;
    if !close {
        return Err(format!("got ({p}, {s}, {}, {})", m.rmse, m.mae));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let n = rng.random_range(2..20);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let m = affinity_metrics(&a, &b).map_err(|e| e.to_string())?;
        if m.rmse < m.mae {
            return Err(format!("RMSE {} < MAE {}", m.rmse, m.mae));
        }
    }
    let boundary = success_rate(&[2.0], 2.0).map_err(|e| e.to_string())?;
    ensure(
        boundary == 1.0,
        format!("(1, 1, {:.4}, 2); RMSE ≥ MAE on 10⁴ vectors; 2.0 Å counts: {boundary}", m.rmse),
    )
}

fn parser_corpus() -> Check {
    let cases = [("CCO", 3, 2, 1), ("c1ccccc1", 6, 6, 1), ("CC(=O)Oc1ccccc1C(=O)O", 13, 13, 1), ("CCO.c1ccncc1", 9, 8, 2)];
    for (smiles, atoms, bonds, fragments) in cases {
        let g = parse_smiles(smiles).map_err(|e| format!("{smiles}: {e}"))?;
        if (g.atom_count(), g.bonds().len(), g.fragment_count()) != (atoms, bonds, fragments) {
            return Err(format!("{smiles}: {} atoms, {} bonds, {} fragments", g.atom_count(), g.bonds().len(), g.fragment_count()));
        }
    }
    let benzene = parse_smiles("c1ccccc1").unwrap().automorphisms(0, DEFAULT_AUTOMORPHISM_CAP).unwrap();
    if benzene.perms.len() != 12 || benzene.truncated {
        return Err(format!("benzene has {} automorphisms", benzene.perms.len()));
    }
    let malformed = [("C1CC", 1), ("C(C", 1), ("CC)", 2), ("C[Zz]", 2), ("CC==C", 3)];
    for (smiles, offset) in malformed {
        match parse_smiles(smiles) {
            Ok(_) => return Err(format!("{smiles:?} parsed")),
            Err(e) if e.offset != offset => return Err(format!("{smiles:?}: offset {} not {offset}", e.offset)),
            Err(_) => {}
        }
    }
    let bad_pdb = "ATOM      1  CA  ALA A   1       1.000   x.000   3.000  1.00  0.00           C\n";
    let pdb_error = read_pdb(bad_pdb).err().ok_or("malformed PDB parsed")?.to_string();
    ensure(
        pdb_error.starts_with("line 1:"),
        format!("4 SMILES parse to stated counts, benzene 12 automorphisms; 5 malformed SMILES + PDB rejected ({pdb_error})"),
    )
}

fn symmetry_rmsd_check() -> Check {
    let graph = parse_smiles("c1ccccc1").unwrap();
    let reference: Vec<Vec3> = (0..6)
        .map(|i| {
            let a = i as f64 * std::f64::consts::PI / 3.0;
            Vec3::new(1.39 * a.cos(), 1.39 * a.sin(), 0.0)
        })
        .collect();
    let turn = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), std::f64::consts::PI / 3.0);
    let rotated: Vec<Vec3> = reference.iter().map(|p| turn * p).collect();
    let r = symmetry_rmsd(&graph, &rotated, &reference).map_err(|e| e.to_string())?;
    if !(r.rmsd < 1e-9 && r.plain > 0.5) {
        return Err(format!("rotated benzene: symmetry {:.2e}, plain {:.3}", r.rmsd, r.plain));
    }
    let aspirin = parse_smiles("CC(=O)Oc1ccccc1C(=O)O").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for k in 0..1000 {
        let (g, n) = if k % 2 == 0 { (&graph, 6) } else { (&aspirin, 13) };
        let reference = points(&mut rng, n, 4.0);
        let noise = rng.random_range(0.1..2.0);
        let predicted: Vec<Vec3> = reference.iter().zip(points(&mut rng, n, noise)).map(|(a, d)| a + d).collect();
        let s = symmetry_rmsd(g, &predicted, &reference).map_err(|e| e.to_string())?;
        if s.rmsd > s.plain {
            return Err(format!("case {k}: symmetry {} > plain {}", s.rmsd, s.plain));
        }
    }
    Ok(format!("rotated benzene: symmetry {:.1e} Å, plain {:.3} Å; ≤ plain on 1000 perturbations", r.rmsd, r.plain))
}

fn cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_holoflow"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    for name in ["apo.pdb", "holo.pdb"] {
        fs::copy(fixtures.join(name), dir.path().join(name)).map_err(|e| e.to_string())?;
    }
    fs::write(dir.path().join("data.csv"), "id,apo_path,holo_path,smiles,affinity\np,apo.pdb,holo.pdb,CCO,6.5\n")
        .map_err(|e| e.to_string())?;
    cli(dir.path(), &["train", "--dataset", "data.csv", "--epochs", "50", "--width", "16", "--out", "model"])?;
    for out in ["run1", "run2"] {
        cli(
            dir.path(),
            &[
                "generate", "--protein", "apo.pdb", "--smiles", "CCO", "--checkpoint", "model/field.ckpt", "--seed", "7",
                "--samples", "8", "--jobs", "2", "--out", out,
            ],
        )?;
    }
    let mut files = vec!["ranked.csv".to_string()];
    for k in 1..=5 {
        files.push(format!("trajectories/rank{k}.jsonl"));
        files.push(format!("structures/rank{k}.pdb"));
    }
    let mut bytes = 0;
    for f in &files {
        let a = fs::read(dir.path().join("run1").join(f)).map_err(|e| format!("{f}: {e}"))?;
        let b = fs::read(dir.path().join("run2").join(f)).map_err(|e| format!("{f}: {e}"))?;
        if a != b {
            return Err(format!("{f} differs between runs"));
        }
        bytes += a.len();
    }
    Ok(format!("{} files ({bytes} bytes) bit-identical across two runs", files.len()))
}

#[test]
fn acceptance() {
    let criteria: [(&str, Duration, fn() -> Check); 10] = [
        ("oracle transport", Duration::from_secs(1), oracle_transport),
        ("harmonic prior statistics", Duration::from_secs(10), harmonic_prior),
        ("gradient oracle", Duration::from_secs(30), gradient_oracle),
        ("toy transport task", Duration::from_secs(300), toy_transport),
        ("kabsch oracle", Duration::from_secs(120), kabsch_oracle),
        ("coupling truth table", Duration::from_secs(10), coupling_truth_table),
        ("metric kernels", Duration::from_secs(10), metric_kernels),
        ("parser corpus", Duration::from_secs(10), parser_corpus),
        ("symmetry RMSD", Duration::from_secs(10), symmetry_rmsd_check),
        ("determinism", Duration::from_secs(120), determinism),
    ];
    let mut failed = Vec::new();
    for (k, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(d) if elapsed <= *budget => (true, d),
            Ok(d) => (false, format!("{d}; over budget")),
            Err(d) => (false, d),
        };
        // Written past the test harness capture so the table shows in every run.
        writeln!(
            std::io::stdout(),
            "criterion {:>2} {} {name}: {detail} [{:.2?} / {:?}]",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed,
            budget
        )
        .unwrap();
        if !pass {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
