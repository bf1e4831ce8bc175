//! Straight-line conditional paths, the endpoint-regression loss and the
//! clamped variance-diminishing sampler.

use serde::{Deserialize, Serialize};

use crate::geometry::kabsch_uniform;
use crate::structures::{ComplexState, Frame, StateError, Trajectory, TrajectoryMeta};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlowError {
    #[error("invalid flow config: {0}")]
    InvalidConfig(String),
    #[error("states have different partitions")]
    PartitionMismatch,
    #[error("expected {expected} rows, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("t = {0} outside [0, 1]")]
    TimeOutOfRange(f64),
    #[error("step {n} outside 0..{steps}")]
    StepOutOfRange { n: usize, steps: usize },
    #[error("field failed at step {step}: {message}")]
    Field { step: usize, message: String },
    #[error("field produced a non-finite coordinate at step {step}")]
    NonFiniteField { step: usize },
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub steps: usize,
    pub eta: f64,
    pub clamp_lo: f64,
    pub clamp_hi: f64,
    pub align_each_step: bool,
    /// Superpose on protein rows only instead of all rows.
    #[serde(default)]
    pub align_protein_only: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            steps: 40,
            eta: 1.0,
            clamp_lo: 1e-6,
            clamp_hi: 1.0 - 1e-6,
            align_each_step: true,
            align_protein_only: false,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        if self.steps == 0 {
            return Err(FlowError::InvalidConfig("steps must be at least 1".into()));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(FlowError::InvalidConfig(format!("eta must be positive, got {}", self.eta)));
        }
        if !(0.0 < self.clamp_lo && self.clamp_lo < self.clamp_hi && self.clamp_hi < 1.0) {
            return Err(FlowError::InvalidConfig(format!(
                "need 0 < clamp_lo < clamp_hi < 1, got {} and {}",
                self.clamp_lo, self.clamp_hi
            )));
        }
        Ok(())
    }
}

/// Endpoint predictor driven by [`integrate`]: maps a state at time `t`
/// to a full-complex estimate of the `t = 1` coordinates.
pub trait EndpointField: Sync {
    fn predict(&self, state: &ComplexState, t: f64) -> Result<Vec<Vec3>, String>;
}

impl<F> EndpointField for F
where
    F: Fn(&ComplexState, f64) -> Vec<Vec3> + Sync,
{
    fn predict(&self, state: &ComplexState, t: f64) -> Result<Vec<Vec3>, String> {
        Ok(self(state, t))
    }
}

/// `(1 − t)·x0 + t·x1`.
pub fn interpolate(x0: &ComplexState, x1: &ComplexState, t: f64) -> Result<ComplexState, FlowError> {
    if x0.partition != x1.partition {
        return Err(FlowError::PartitionMismatch);
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(FlowError::TimeOutOfRange(t));
    }
    let coords = x0
        .coords
        .iter()
        .zip(&x1.coords)
        .map(|(a, b)| a * (1.0 - t) + b * t)
        .collect();
    Ok(ComplexState::new(coords, x0.partition.clone(), t)?)
}

/// Mean squared deviation over atoms and coordinates (Ų).
pub fn cfm_loss(predicted: &[Vec3], target: &[Vec3]) -> Result<f64, FlowError> {
    if predicted.len() != target.len() {
        return Err(FlowError::ShapeMismatch {
            expected: target.len(),
            actual: predicted.len(),
        });
    }
    if target.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = predicted.iter().zip(target).map(|(p, q)| (p - q).norm_squared()).sum();
    Ok(sum / (3 * target.len()) as f64)
}

/// Clamped update weights `(a, b)` for step `n`.
pub fn vd_ode_coefficients(n: usize, config: &FlowConfig) -> Result<(f64, f64), FlowError> {
    if n >= config.steps {
        return Err(FlowError::StepOutOfRange { n, steps: config.steps });
    }
    let i = config.steps as f64;
    let t = n as f64 / i;
    let s = (n + 1) as f64 / i;
    let ratio = (1.0 - s) / (1.0 - t);
    let clamp = |v: f64| v.clamp(config.clamp_lo, config.clamp_hi);
    Ok((clamp(ratio * config.eta), clamp((1.0 - ratio) * config.eta)))
}

/// `x_{n+1} = a·x_n + b·x̂₁`, stamped with time `(n + 1)/i`.
pub fn vd_ode_step(
    x_n: &ComplexState,
    predicted: &[Vec3],
    n: usize,
    config: &FlowConfig,
) -> Result<ComplexState, FlowError> {
    if predicted.len() != x_n.len() {
        return Err(FlowError::ShapeMismatch {
            expected: x_n.len(),
            actual: predicted.len(),
        });
    }
    let (a, b) = vd_ode_coefficients(n, config)?;
    let coords = x_n
        .coords
        .iter()
        .zip(predicted)
        .map(|(x, p)| x * a + p * b)
        .collect();
    Ok(x_n.with_coords(coords, step_time(n + 1, config.steps))?)
}

fn step_time(n: usize, steps: usize) -> f64 {
    n as f64 / steps as f64
}

fn superpose_onto(state: &ComplexState, predicted: &[Vec3], protein_only: bool) -> Option<Vec<Vec3>> {
    let rows = if protein_only { state.partition.n_protein } else { state.len() };
    match kabsch_uniform(&state.coords[..rows], &predicted[..rows]) {
        Ok(transform) => Some(transform.apply_all(&state.coords)),
        Err(e) => {
            log::debug!("skipping per-step superposition: {e}");
            None
        }
    }
}

/// Run the sampler from `x0` for `config.steps` steps, recording every
/// frame from `t = 0` to `t = 1`. `seed` is stored in the trajectory header.
pub fn integrate<F: EndpointField + ?Sized>(
    field: &F,
    x0: &ComplexState,
    config: &FlowConfig,
    seed: u64,
) -> Result<Trajectory, FlowError> {
    config.validate()?;
    let mut x = x0.with_coords(x0.coords.clone(), 0.0)?;
    let mut frames = Vec::with_capacity(config.steps + 1);
    frames.push(Frame { step: 0, state: x.clone() });
    for n in 0..config.steps {
        let t = step_time(n, config.steps);
        let predicted = field
            .predict(&x, t)
            .map_err(|message| FlowError::Field { step: n, message })?;
        if predicted.len() != x.len() {
            return Err(FlowError::ShapeMismatch {
                expected: x.len(),
                actual: predicted.len(),
            });
        }
        if predicted.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(FlowError::NonFiniteField { step: n });
        }
        if config.align_each_step {
            if let Some(aligned) = superpose_onto(&x, &predicted, config.align_protein_only) {
                x = x.with_coords(aligned, t)?;
            }
        }
        x = vd_ode_step(&x, &predicted, n, config)?;
        frames.push(Frame { step: n + 1, state: x.clone() });
    }
    Ok(Trajectory {
        meta: TrajectoryMeta { config: config.clone(), seed },
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::testing::{random_points, random_rotation};
    use crate::structures::{concat_state, Partition};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state(coords: Vec<Vec3>, n_protein: usize) -> ComplexState {
        let n_lig = coords.len() - n_protein;
        ComplexState::new(coords, Partition::new(n_protein, vec![0; n_lig]).unwrap(), 0.0).unwrap()
    }

    fn no_align() -> FlowConfig {
        FlowConfig { align_each_step: false, ..FlowConfig::default() }
    }

    #[test]
    fn interpolate_examples() {
        let x0 = state(vec![Vec3::zeros()], 0);
        let x1 = state(vec![Vec3::new(2.0, 4.0, 6.0)], 0);
        let mid = interpolate(&x0, &x1, 0.5).unwrap();
        assert_eq!(mid.coords[0], Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(mid.time, 0.5);
        assert_eq!(interpolate(&x0, &x1, 0.0).unwrap().coords, x0.coords);
        assert_eq!(interpolate(&x0, &x1, 1.0).unwrap().coords, x1.coords);
        let other = state(vec![Vec3::zeros()], 1);
        assert_eq!(interpolate(&x0, &other, 0.5), Err(FlowError::PartitionMismatch));
        assert_eq!(interpolate(&x0, &x1, 1.5), Err(FlowError::TimeOutOfRange(1.5)));
    }

    #[test]
    fn loss_examples() {
        let target = vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(-1.0, 0.0, 4.0)];
        assert_eq!(cfm_loss(&target, &target).unwrap(), 0.0);
        let shifted: Vec<Vec3> = target.iter().map(|p| p + Vec3::x()).collect();
        assert!((cfm_loss(&shifted, &target).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let swapped_pred = vec![shifted[1], shifted[0]];
        let swapped_target = vec![target[1], target[0]];
        assert_eq!(cfm_loss(&swapped_pred, &swapped_target).unwrap(), cfm_loss(&shifted, &target).unwrap());
        assert!(cfm_loss(&target[..1], &target).is_err());
    }

    #[test]
    fn coefficient_examples() {
        let cfg = FlowConfig::default();
        let (a, b) = vd_ode_coefficients(0, &cfg).unwrap();
        assert!((a - 0.975).abs() < 1e-15 && (b - 0.025).abs() < 1e-15);
        let (a, b) = vd_ode_coefficients(39, &cfg).unwrap();
        assert_eq!(a, 1e-6);
        assert_eq!(b, 1.0 - 1e-6);
        assert!(vd_ode_coefficients(40, &cfg).is_err());
    }

    #[test]
    fn last_step_leakage() {
        let cfg = no_align();
        let x = state(vec![Vec3::new(3.0, -1.0, 2.0)], 0);
        let pred = vec![Vec3::new(1.0, 1.0, 1.0)];
        let next = vd_ode_step(&x, &pred, 39, &cfg).unwrap();
        let expected = (x.coords[0] - pred[0]) * 1e-6;
        assert!(((next.coords[0] - pred[0]) - expected).norm() < 1e-15);
        assert_eq!(next.time, 1.0);
    }

    #[test]
    fn coefficients_are_convex_after_clamping() {
        for steps in 1..=60 {
            let cfg = FlowConfig { steps, ..FlowConfig::default() };
            for n in 0..steps {
                let (a, b) = vd_ode_coefficients(n, &cfg).unwrap();
                assert!((a + b - 1.0).abs() <= 2e-6, "steps {steps} n {n}");
            }
        }
    }

    #[test]
    fn fixed_prediction_contracts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = no_align();
        let mut x = state(random_points(&mut rng, 6, 10.0), 3);
        let target = random_points(&mut rng, 6, 10.0);
        let dist = |s: &ComplexState| -> f64 {
            s.coords.iter().zip(&target).map(|(a, b)| (a - b).norm_squared()).sum::<f64>().sqrt()
        };
        for n in 0..cfg.steps {
            let next = vd_ode_step(&x, &target, n, &cfg).unwrap();
            assert!(dist(&next) <= dist(&x));
            x = next;
        }
    }

    fn oracle_case(seed: u64, steps: usize) -> (ComplexState, ComplexState, Trajectory) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0 = state(random_points(&mut rng, 7, 8.0), 4);
        let x1 = state(random_points(&mut rng, 7, 8.0), 4);
        let target = x1.coords.clone();
        let oracle = move |_: &ComplexState, _: f64| target.clone();
        let cfg = FlowConfig { steps, ..no_align() };
        let traj = integrate(&oracle, &x0, &cfg, seed).unwrap();
        (x0, x1, traj)
    }

    #[test]
    fn oracle_reproduces_linear_path() {
        let (x0, x1, traj) = oracle_case(2, 40);
        assert_eq!(traj.frames.len(), 41);
        for frame in &traj.frames[..40] {
            let t = frame.step as f64 / 40.0;
            assert_eq!(frame.state.time, t);
            let path = interpolate(&x0, &x1, t).unwrap();
            for (a, b) in frame.state.coords.iter().zip(&path.coords) {
                assert!((a - b).norm() < 1e-5);
            }
        }
        let last = traj.last_state().unwrap();
        assert_eq!(last.time, 1.0);
        let span = x0.coords.iter().zip(&x1.coords).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        for (a, b) in last.coords.iter().zip(&x1.coords) {
            assert!((a - b).norm() <= 1e-6 * span + 1e-12);
        }
    }

    #[test]
    fn single_step_lands_on_prediction() {
        let (x0, x1, traj) = oracle_case(3, 1);
        assert_eq!(traj.frames.len(), 2);
        for ((a, b), c) in traj.frames[1].state.coords.iter().zip(&x1.coords).zip(&x0.coords) {
            assert!((a - b).norm() <= 1e-6 * (c - b).norm() + 1e-12);
        }
    }

    #[test]
    fn non_finite_field_aborts_with_step() {
        let x0 = state(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], 0);
        let bad = |s: &ComplexState, t: f64| {
            if t >= 0.1 {
                vec![Vec3::new(f64::NAN, 0.0, 0.0); s.len()]
            } else {
                s.coords.clone()
            }
        };
        let cfg = FlowConfig { steps: 10, ..FlowConfig::default() };
        assert_eq!(integrate(&bad, &x0, &cfg, 0).unwrap_err(), FlowError::NonFiniteField { step: 1 });
    }

    /// Snaps a fixed template onto the current state, which makes the field
    /// rotation- and translation-equivariant.
    fn snapping_field(template: Vec<Vec3>) -> impl Fn(&ComplexState, f64) -> Vec<Vec3> + Sync {
        move |s: &ComplexState, _t: f64| {
            kabsch_uniform(&template, &s.coords).unwrap().apply_all(&template)
        }
    }

    #[test]
    fn aligned_integration_is_rotation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let template = random_points(&mut rng, 8, 5.0);
        let field = snapping_field(template);
        let x0 = concat_state(&random_points(&mut rng, 5, 6.0), &[random_points(&mut rng, 3, 2.0)], 0.0).unwrap();
        let r = random_rotation(&mut rng);
        let rotated = x0.with_coords(x0.coords.iter().map(|p| r * p).collect(), 0.0).unwrap();
        let cfg = FlowConfig::default();
        let a = integrate(&field, &x0, &cfg, 0).unwrap();
        let b = integrate(&field, &rotated, &cfg, 0).unwrap();
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            for (p, q) in fa.state.coords.iter().zip(&fb.state.coords) {
                assert!((r * p - q).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn integration_is_deterministic() {
        let (_, _, a) = oracle_case(5, 40);
        let (_, _, b) = oracle_case(5, 40);
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        assert!(FlowConfig::default().validate().is_ok());
        assert!(FlowConfig { steps: 0, ..FlowConfig::default() }.validate().is_err());
        assert!(FlowConfig { eta: 0.0, ..FlowConfig::default() }.validate().is_err());
        assert!(FlowConfig { clamp_lo: 0.6, clamp_hi: 0.5, ..FlowConfig::default() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn contraction_for_any_step_count(steps in 1usize..80, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cfg = FlowConfig { steps, ..no_align() };
            let mut x = state(random_points(&mut rng, 4, 10.0), 2);
            let target = random_points(&mut rng, 4, 10.0);
            for n in 0..steps {
                let next = vd_ode_step(&x, &target, n, &cfg).unwrap();
                for ((a, b), p) in next.coords.iter().zip(&x.coords).zip(&target) {
                    prop_assert!((a - p).norm() <= (b - p).norm() + 1e-12);
                }
                x = next;
            }
        }
    }
}
