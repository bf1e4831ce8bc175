use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::topology::{ComplexTopology, DESCRIPTORS};
use super::FieldError;
use crate::geometry::centroid;
use crate::structures::ComplexState;
use crate::Vec3;

/// Å to network units.
pub const POSITION_SCALE: f64 = 0.1;

const TIME_FREQUENCIES: usize = 4;

/// Per-atom input width.
pub const FEATURES: usize = 3 + 2 + 3 + 3 + 1 + 2 * TIME_FREQUENCIES + DESCRIPTORS;

/// Default hidden width.
pub const DEFAULT_WIDTH: usize = 64;

/// Offsets of each weight block inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Layout {
    h: usize,
}

impl Layout {
    fn sizes(&self) -> [usize; 14] {
        let (h, f) = (self.h, FEATURES);
        [h * f, h * f, h, h * h, h * h, h, 3 * h, 3 * GEOMETRIC, 3 * GEOMETRIC, 3, h * h, h, h, 1]
    }

    fn block(&self, k: usize) -> Range<usize> {
        let sizes = self.sizes();
        let start: usize = sizes[..k].iter().sum();
        start..start + sizes[k]
    }

    pub(crate) fn len(&self) -> usize {
        self.sizes().iter().sum()
    }

    /// Parameters from here on belong to the affinity head.
    pub(crate) fn head_start(&self) -> usize {
        self.block(HEAD_W1).start
    }
}

const W1: usize = 0;
const U1: usize = 1;
const B1: usize = 2;
const W2: usize = 3;
const U2: usize = 4;
const B2: usize = 5;
const W3: usize = 6;
const SP: usize = 7;
const SL: usize = 8;
const B3: usize = 9;
const HEAD_W1: usize = 10;
const HEAD_B1: usize = 11;
const HEAD_W2: usize = 12;
const HEAD_B2: usize = 13;

/// Positional features read by the linear skip: own, group and protein-centroid offsets.
const GEOMETRIC: usize = 9;

fn geometric(row: &[f64]) -> [f64; GEOMETRIC] {
    let mut g = [0.0; GEOMETRIC];
    g[..3].copy_from_slice(&row[..3]);
    g[3..].copy_from_slice(&row[5..11]);
    g
}

/// Weights of the endpoint network and its affinity head, stored flat.
///
/// Trunk: `h1 = tanh(W1 f + U1 mean(f) + b1)`, `h2 = tanh(W2 h1 + U2 mean(h1) + b2)`,
/// `x̂ = x + (W3 h2 + S g + b3) / POSITION_SCALE`, where `g` is the positional
/// part of `f` and `S` is separate for protein and ligand rows. Head: mean of `h2` over ligand
/// rows, then `A2 tanh(A1 e + c1) + c2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldParams {
    width: usize,
    values: Vec<f64>,
}

impl FieldParams {
    pub fn zeros(width: usize) -> Result<Self, FieldError> {
        if width == 0 {
            return Err(FieldError::InvalidWidth);
        }
        Ok(FieldParams {
            width,
            values: vec![0.0; Layout { h: width }.len()],
        })
    }

    pub fn from_values(width: usize, values: Vec<f64>) -> Result<Self, FieldError> {
        let expected = FieldParams::zeros(width)?.values.len();
        if values.len() != expected {
            return Err(FieldError::ParameterCount { expected, actual: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FieldError::NonFiniteParameter);
        }
        Ok(FieldParams { width, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn layout(&self) -> Layout {
        Layout { h: self.width }
    }

    /// Index of the first affinity-head parameter.
    pub fn head_start(&self) -> usize {
        self.layout().head_start()
    }

    /// Output-layer weights, skips and biases.
    #[cfg(test)]
    pub(crate) fn output_block(&self) -> Range<usize> {
        let layout = self.layout();
        layout.block(W3).start..layout.block(B3).end
    }

    fn block(&self, k: usize) -> &[f64] {
        &self.values[self.layout().block(k)]
    }
}

/// Uniform `±1/sqrt(fan_in)` weights; biases start at zero.
pub fn init_field(width: usize, seed: u64) -> Result<FieldParams, FieldError> {
    let mut params = FieldParams::zeros(width)?;
    let layout = params.layout();
    let h = width as f64;
    let fan_in = [
        (W1, FEATURES as f64),
        (U1, FEATURES as f64),
        (W2, h),
        (U2, h),
        (W3, h),
        (SP, GEOMETRIC as f64),
        (SL, GEOMETRIC as f64),
        (HEAD_W1, h),
        (HEAD_W2, h),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (block, fan) in fan_in {
        let bound = fan.sqrt().recip();
        for v in &mut params.values[layout.block(block)] {
            *v = rng.random_range(-bound..=bound);
        }
    }
    Ok(params)
}

/// Endpoint prediction plus the pooled embedding the affinity head reads.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldOutput {
    pub prediction: Vec<Vec3>,
    pub embedding: Vec<f64>,
}

pub(crate) struct Activations {
    n: usize,
    n_protein: usize,
    features: Vec<f64>,
    feature_mean: Vec<f64>,
    h1: Vec<f64>,
    h1_mean: Vec<f64>,
    h2: Vec<f64>,
    pool_rows: Range<usize>,
}

fn matvec(w: &[f64], rows: usize, v: &[f64], out: &mut [f64]) {
    let cols = v.len();
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        *o += w[r * cols..(r + 1) * cols].iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += Wᵀ v` for row-major `W` with `v.len()` rows.
fn matvec_t(w: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (r, &vr) in v.iter().enumerate() {
        for (o, a) in out.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
            *o += a * vr;
        }
    }
}

/// `G += u vᵀ` for row-major `G`.
fn outer_add(g: &mut [f64], u: &[f64], v: &[f64], scale: f64) {
    let cols = v.len();
    for (r, &ur) in u.iter().enumerate() {
        let s = ur * scale;
        for (gv, &vc) in g[r * cols..(r + 1) * cols].iter_mut().zip(v) {
            *gv += s * vc;
        }
    }
}

fn mean_rows(data: &[f64], width: usize, rows: Range<usize>) -> Vec<f64> {
    let mut out = vec![0.0; width];
    let count = rows.len() as f64;
    for r in rows {
        for (o, v) in out.iter_mut().zip(&data[r * width..(r + 1) * width]) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|v| *v /= count);
    out
}

fn check(values: &[f64], layer: &'static str) -> Result<(), FieldError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(FieldError::NonFinite { layer })
    }
}

pub(crate) fn build_features(topology: &ComplexTopology, state: &ComplexState, t: f64) -> Vec<f64> {
    let n = state.len();
    let np = state.partition.n_protein;
    let c = centroid(&state.coords);
    let protein_mean = if np > 0 { centroid(state.protein()) } else { c };
    let fragment_means: Vec<Vec3> = {
        let mut sums = vec![(Vec3::zeros(), 0usize); state.partition.fragment_count()];
        for (p, &f) in state.ligand().iter().zip(&state.partition.ligand_fragments) {
            sums[f].0 += p;
            sums[f].1 += 1;
        }
        sums.into_iter().map(|(s, k)| s / k as f64).collect()
    };
    // The harmonics repeat with period 1, so raw t is kept to separate t = 0 from t = 1.
    let mut time = [0.0; 1 + 2 * TIME_FREQUENCIES];
    time[0] = t;
    for k in 0..TIME_FREQUENCIES {
        let phase = 2.0 * std::f64::consts::PI * (k + 1) as f64 * t;
        time[1 + 2 * k] = phase.sin();
        time[2 + 2 * k] = phase.cos();
    }
    let q = (protein_mean - c) * POSITION_SCALE;
    let mut out = Vec::with_capacity(n * FEATURES);
    for (i, p) in state.coords.iter().enumerate() {
        let (flag, group) = match state.partition.group(i) {
            None => ([1.0, 0.0], protein_mean),
            Some(f) => ([0.0, 1.0], fragment_means[f]),
        };
        let x = (p - c) * POSITION_SCALE;
        let g = (group - c) * POSITION_SCALE;
        out.extend_from_slice(&[x.x, x.y, x.z]);
        out.extend_from_slice(&flag);
        out.extend_from_slice(&[g.x, g.y, g.z]);
        out.extend_from_slice(&[q.x, q.y, q.z]);
        out.extend_from_slice(&time);
        out.extend_from_slice(topology.descriptor(i));
    }
    out
}

pub(crate) fn forward_cached(
    params: &FieldParams,
    topology: &ComplexTopology,
    state: &ComplexState,
    t: f64,
) -> Result<(FieldOutput, Activations), FieldError> {
    if topology.len() != state.len() || topology.n_protein() != state.partition.n_protein {
        return Err(FieldError::TopologyMismatch {
            expected: topology.len(),
            actual: state.len(),
        });
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(FieldError::TimeOutOfRange(t));
    }
    let h = params.width;
    let n = state.len();
    let features = build_features(topology, state, t);
    check(&features, "input")?;
    let feature_mean = mean_rows(&features, FEATURES, 0..n);

    let mut shared1 = params.block(B1).to_vec();
    matvec(params.block(U1), h, &feature_mean, &mut shared1);
    let mut h1 = vec![0.0; n * h];
    for i in 0..n {
        let row = &mut h1[i * h..(i + 1) * h];
        row.copy_from_slice(&shared1);
        matvec(params.block(W1), h, &features[i * FEATURES..(i + 1) * FEATURES], row);
        row.iter_mut().for_each(|v| *v = v.tanh());
    }
    check(&h1, "hidden1")?;
    let h1_mean = mean_rows(&h1, h, 0..n);

    let mut shared2 = params.block(B2).to_vec();
    matvec(params.block(U2), h, &h1_mean, &mut shared2);
    let mut h2 = vec![0.0; n * h];
    for i in 0..n {
        let row = &mut h2[i * h..(i + 1) * h];
        row.copy_from_slice(&shared2);
        matvec(params.block(W2), h, &h1[i * h..(i + 1) * h], row);
        row.iter_mut().for_each(|v| *v = v.tanh());
    }
    check(&h2, "hidden2")?;

    let mut prediction = Vec::with_capacity(n);
    for (i, x) in state.coords.iter().enumerate() {
        let mut d = params.block(B3).to_vec();
        matvec(params.block(W3), 3, &h2[i * h..(i + 1) * h], &mut d);
        let skip = if i < state.partition.n_protein { SP } else { SL };
        matvec(params.block(skip), 3, &geometric(&features[i * FEATURES..(i + 1) * FEATURES]), &mut d);
        prediction.push(x + Vec3::new(d[0], d[1], d[2]) / POSITION_SCALE);
    }
    if prediction.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
        return Err(FieldError::NonFinite { layer: "output" });
    }

    let pool_rows = if state.partition.n_ligand() > 0 { state.partition.n_protein..n } else { 0..n };
    let embedding = mean_rows(&h2, h, pool_rows.clone());
    Ok((
        FieldOutput { prediction, embedding },
        Activations {
            n,
            n_protein: state.partition.n_protein,
            features,
            feature_mean,
            h1,
            h1_mean,
            h2,
            pool_rows,
        },
    ))
}

/// Predicted `t = 1` coordinates for `state` at time `t`.
pub fn forward(
    params: &FieldParams,
    topology: &ComplexTopology,
    state: &ComplexState,
    t: f64,
) -> Result<FieldOutput, FieldError> {
    forward_cached(params, topology, state, t).map(|(out, _)| out)
}

/// Accumulate `scale · ∂L/∂θ` for the trunk given `∂L/∂x̂` per row.
pub(crate) fn backward_trunk(
    params: &FieldParams,
    acts: &Activations,
    d_prediction: &[Vec3],
    scale: f64,
    grads: &mut [f64],
) {
    let h = params.width;
    let n = acts.n;
    let layout = params.layout();
    let w2 = params.block(W2);
    let u2 = params.block(U2);
    let w3 = params.block(W3);

    let mut dz2 = vec![0.0; n * h];
    for i in 0..n {
        let dd = d_prediction[i] / POSITION_SCALE;
        let dd = [dd.x, dd.y, dd.z];
        let h2 = &acts.h2[i * h..(i + 1) * h];
        outer_add(&mut grads[layout.block(W3)], &dd, h2, scale);
        let skip = if i < acts.n_protein { SP } else { SL };
        outer_add(&mut grads[layout.block(skip)], &dd, &geometric(&acts.features[i * FEATURES..(i + 1) * FEATURES]), scale);
        for (g, v) in grads[layout.block(B3)].iter_mut().zip(&dd) {
            *g += scale * v;
        }
        let row = &mut dz2[i * h..(i + 1) * h];
        matvec_t(w3, &dd, row);
        for (z, a) in row.iter_mut().zip(h2) {
            *z *= 1.0 - a * a;
        }
    }
    let dz2_sum = {
        let mut s = vec![0.0; h];
        for r in 0..n {
            for (a, b) in s.iter_mut().zip(&dz2[r * h..(r + 1) * h]) {
                *a += b;
            }
        }
        s
    };
    outer_add(&mut grads[layout.block(U2)], &dz2_sum, &acts.h1_mean, scale);
    for (g, v) in grads[layout.block(B2)].iter_mut().zip(&dz2_sum) {
        *g += scale * v;
    }
    let mut shared_dh1 = vec![0.0; h];
    matvec_t(u2, &dz2_sum, &mut shared_dh1);
    shared_dh1.iter_mut().for_each(|v| *v /= n as f64);

    let mut dz1_sum = vec![0.0; h];
    let mut dz1 = vec![0.0; h];
    for i in 0..n {
        let h1 = &acts.h1[i * h..(i + 1) * h];
        let dz = &dz2[i * h..(i + 1) * h];
        outer_add(&mut grads[layout.block(W2)], dz, h1, scale);
        dz1.copy_from_slice(&shared_dh1);
        matvec_t(w2, dz, &mut dz1);
        for (z, a) in dz1.iter_mut().zip(h1) {
            *z *= 1.0 - a * a;
        }
        outer_add(&mut grads[layout.block(W1)], &dz1, &acts.features[i * FEATURES..(i + 1) * FEATURES], scale);
        for (s, z) in dz1_sum.iter_mut().zip(&dz1) {
            *s += z;
        }
    }
    outer_add(&mut grads[layout.block(U1)], &dz1_sum, &acts.feature_mean, scale);
    for (g, v) in grads[layout.block(B1)].iter_mut().zip(&dz1_sum) {
        *g += scale * v;
    }
    debug_assert!(!acts.pool_rows.is_empty());
}

/// Affinity readout and its hidden activation.
pub(crate) fn head_forward(params: &FieldParams, embedding: &[f64]) -> (f64, Vec<f64>) {
    let h = params.width;
    let mut hidden = params.block(HEAD_B1).to_vec();
    matvec(params.block(HEAD_W1), h, embedding, &mut hidden);
    hidden.iter_mut().for_each(|v| *v = v.tanh());
    let out = params.block(HEAD_B2)[0]
        + params.block(HEAD_W2).iter().zip(&hidden).map(|(a, b)| a * b).sum::<f64>();
    (out, hidden)
}

/// Accumulate `scale · d_out · ∂B̂/∂θ_head`.
pub(crate) fn backward_head(
    params: &FieldParams,
    embedding: &[f64],
    hidden: &[f64],
    d_out: f64,
    scale: f64,
    grads: &mut [f64],
) {
    let layout = params.layout();
    let s = d_out * scale;
    for (g, a) in grads[layout.block(HEAD_W2)].iter_mut().zip(hidden) {
        *g += s * a;
    }
    grads[layout.block(HEAD_B2)][0] += s;
    let dz: Vec<f64> = params
        .block(HEAD_W2)
        .iter()
        .zip(hidden)
        .map(|(w, a)| w * (1.0 - a * a))
        .collect();
    outer_add(&mut grads[layout.block(HEAD_W1)], &dz, embedding, s);
    for (g, v) in grads[layout.block(HEAD_B1)].iter_mut().zip(&dz) {
        *g += s * v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;
    use crate::structures::concat_state;

    fn sample_state() -> (ComplexTopology, ComplexState) {
        let graph = parse_smiles("CCO.N").unwrap();
        let topo = ComplexTopology::new(&["N", "C", "C", "O"], &graph);
        let protein = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.5, 0.2, -0.3),
            Vec3::new(2.4, 1.3, 0.1),
            Vec3::new(3.1, 1.0, 1.2),
        ];
        let ligand = vec![
            vec![Vec3::new(1.0, 3.0, 0.5), Vec3::new(2.2, 3.4, 0.0), Vec3::new(2.9, 4.4, 0.6)],
            vec![Vec3::new(-1.0, 2.0, 2.0)],
        ];
        (topo, concat_state(&protein, &ligand, 0.3).unwrap())
    }

    #[test]
    fn init_is_seeded() {
        let a = init_field(8, 1).unwrap();
        assert_eq!(a, init_field(8, 1).unwrap());
        assert_ne!(a, init_field(8, 2).unwrap());
        assert!(init_field(0, 1).is_err());
        let one = init_field(1, 3).unwrap();
        let (topo, state) = sample_state();
        let out = forward(&one, &topo, &state, 0.5).unwrap();
        assert_eq!(out.prediction.len(), state.len());
        assert_eq!(out.embedding.len(), 1);
        let bound = (FEATURES as f64).sqrt().recip();
        assert!(a.block(W1).iter().all(|v| v.abs() <= bound));
        assert!(a.block(B1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_network_adds_bias_pattern() {
        let mut p = FieldParams::zeros(4).unwrap();
        let b3 = p.layout().block(B3);
        p.values[b3].copy_from_slice(&[0.1, -0.2, 0.3]);
        let (topo, state) = sample_state();
        let out = forward(&p, &topo, &state, 0.7).unwrap();
        let shift = Vec3::new(0.1, -0.2, 0.3) / POSITION_SCALE;
        for (a, b) in out.prediction.iter().zip(&state.coords) {
            assert!((a - (b + shift)).norm() < 1e-12);
        }
        assert!(out.embedding.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn translation_equivariance() {
        let p = init_field(16, 4).unwrap();
        let (topo, state) = sample_state();
        let shift = Vec3::new(5.0, 5.0, 5.0);
        let moved = state.with_coords(state.coords.iter().map(|x| x + shift).collect(), 0.3).unwrap();
        let a = forward(&p, &topo, &state, 0.3).unwrap();
        let b = forward(&p, &topo, &moved, 0.3).unwrap();
        for (x, y) in a.prediction.iter().zip(&b.prediction) {
            assert!((x + shift - y).norm() < 1e-9);
        }
        for (x, y) in a.embedding.iter().zip(&b.embedding) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn permutation_equivariance() {
        // Swap the two protein carbons, which share descriptors.
        let p = init_field(16, 5).unwrap();
        let (topo, state) = sample_state();
        let mut coords = state.coords.clone();
        coords.swap(1, 2);
        let swapped = state.with_coords(coords, 0.3).unwrap();
        let a = forward(&p, &topo, &state, 0.3).unwrap();
        let b = forward(&p, &topo, &swapped, 0.3).unwrap();
        let mut expected = a.prediction.clone();
        expected.swap(1, 2);
        for (x, y) in expected.iter().zip(&b.prediction) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_mismatched_topology_and_time() {
        let p = init_field(4, 0).unwrap();
        let (_, state) = sample_state();
        let other = ComplexTopology::new(&["C"], &parse_smiles("CC").unwrap());
        assert!(matches!(forward(&p, &other, &state, 0.0), Err(FieldError::TopologyMismatch { .. })));
        let (topo, _) = sample_state();
        assert!(matches!(forward(&p, &topo, &state, 1.5), Err(FieldError::TimeOutOfRange(_))));
    }

    #[test]
    fn non_finite_activations_name_layer() {
        let mut p = init_field(4, 0).unwrap();
        let b3 = p.layout().block(B3);
        p.values[b3.start] = f64::INFINITY;
        let (topo, state) = sample_state();
        assert_eq!(forward(&p, &topo, &state, 0.0), Err(FieldError::NonFinite { layer: "output" }));
    }
}
