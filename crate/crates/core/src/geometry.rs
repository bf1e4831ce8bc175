//! Rigid superposition and structural similarity: weighted Kabsch, RMSD,
//! TM-score, and pocket-weighted apo/holo alignment.

use nalgebra::{Matrix3, SVD};

use crate::structures::Structure;
use crate::Vec3;

/// Default length scale (Å) of the pocket weighting kernel `exp(-d / scale)`.
pub const DEFAULT_POCKET_LENGTH_SCALE: f64 = 5.0;

/// Maximum refinement rounds in the TM-score superposition search.
pub const TM_MAX_ITERATIONS: usize = 20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("point count mismatch: {0} vs {1}")]
    CountMismatch(usize, usize),
    #[error("need at least {needed} points, got {actual}")]
    TooFewPoints { needed: usize, actual: usize },
    #[error("need at least 3 strictly positive weights, got {0}")]
    TooFewWeights(usize),
    #[error("weights must be finite and non-negative")]
    InvalidWeight,
    #[error("degenerate configuration: points are (nearly) collinear or coincident")]
    Degenerate,
    #[error("crystal ligand has no atoms")]
    EmptyLigand,
    #[error("residue count mismatch: {0} vs {1}")]
    ResidueMismatch(usize, usize),
}

/// Proper rigid motion `x -> rotation * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn apply_all(&self, points: &[Vec3]) -> Vec<Vec3> {
        points.iter().map(|p| self.apply(p)).collect()
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &RigidTransform) -> Self {
        RigidTransform {
            rotation: self.rotation * first.rotation,
            translation: self.rotation * first.translation + self.translation,
        }
    }
}

fn centroid_weighted(points: &[Vec3], weights: &[f64]) -> Vec3 {
    let total: f64 = weights.iter().sum();
    points
        .iter()
        .zip(weights)
        .fold(Vec3::zeros(), |acc, (p, w)| acc + p * *w)
        / total
}

pub fn centroid(points: &[Vec3]) -> Vec3 {
    points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / points.len() as f64
}

/// Weighted Kabsch superposition of `mobile` onto `target`, minimising
/// `sum_i w_i |R m_i + t - x_i|^2` over proper rotations.
pub fn kabsch(mobile: &[Vec3], target: &[Vec3], weights: &[f64]) -> Result<RigidTransform, GeometryError> {
    if mobile.len() != target.len() {
        return Err(GeometryError::CountMismatch(mobile.len(), target.len()));
    }
    if weights.len() != mobile.len() {
        return Err(GeometryError::CountMismatch(mobile.len(), weights.len()));
    }
    if mobile.len() < 3 {
        return Err(GeometryError::TooFewPoints {
            needed: 3,
            actual: mobile.len(),
        });
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(GeometryError::InvalidWeight);
    }
    let positive = weights.iter().filter(|w| **w > 0.0).count();
    if positive < 3 {
        return Err(GeometryError::TooFewWeights(positive));
    }

    let cm = centroid_weighted(mobile, weights);
    let ct = centroid_weighted(target, weights);
    let mut h = Matrix3::zeros();
    for ((m, x), w) in mobile.iter().zip(target).zip(weights) {
        h += (m - cm) * (x - ct).transpose() * *w;
    }
    let svd = SVD::new(h, true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let s = svd.singular_values;
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let [imax, imid, imin] = idx;
    if s[imax] <= f64::MIN_POSITIVE || s[imid] <= 1e-10 * s[imax] {
        return Err(GeometryError::Degenerate);
    }
    let v = v_t.transpose();
    let mut d = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        d[(imin, imin)] = -1.0;
    }
    let rotation = v * d * u.transpose();
    let translation = ct - rotation * cm;
    Ok(RigidTransform {
        rotation,
        translation,
    })
}

/// Uniform-weight Kabsch.
pub fn kabsch_uniform(mobile: &[Vec3], target: &[Vec3]) -> Result<RigidTransform, GeometryError> {
    kabsch(mobile, target, &vec![1.0; mobile.len()])
}

/// Root-mean-square distance between paired points, without superposition.
pub fn rmsd(a: &[Vec3], b: &[Vec3]) -> Result<f64, GeometryError> {
    if a.len() != b.len() {
        return Err(GeometryError::CountMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(GeometryError::TooFewPoints { needed: 1, actual: 0 });
    }
    let sum: f64 = a.iter().zip(b).map(|(p, q)| (p - q).norm_squared()).sum();
    Ok((sum / a.len() as f64).sqrt())
}

/// RMSD after optimal uniform superposition of `mobile` onto `target`.
pub fn aligned_rmsd(mobile: &[Vec3], target: &[Vec3]) -> Result<f64, GeometryError> {
    let t = kabsch_uniform(mobile, target)?;
    rmsd(&t.apply_all(mobile), target)
}

/// TM-score distance scale for `L` residues, floored at 0.5 Å for `L <= 21`.
pub fn tm_d0(length: usize) -> f64 {
    if length <= 21 {
        0.5
    } else {
        1.24 * ((length - 15) as f64).cbrt() - 1.8
    }
}

fn tm_sum(mobile: &[Vec3], target: &[Vec3], t: &RigidTransform, d0: f64) -> f64 {
    mobile
        .iter()
        .zip(target)
        .map(|(m, x)| {
            let d = (t.apply(m) - x).norm() / d0;
            1.0 / (1.0 + d * d)
        })
        .sum::<f64>()
        / mobile.len() as f64
}

/// TM-score of positionally paired Cα sets with its best superposition.
///
/// Starts from the all-residue Kabsch fit and repeatedly refits on residues
/// closer than `d0`, keeping the best-scoring transform.
pub fn tm_score_with_transform(a: &[Vec3], b: &[Vec3]) -> Result<(f64, RigidTransform), GeometryError> {
    if a.len() != b.len() {
        return Err(GeometryError::CountMismatch(a.len(), b.len()));
    }
    let n = a.len();
    let d0 = tm_d0(n);
    let mut transform = kabsch_uniform(a, b)?;
    let mut best = (tm_sum(a, b, &transform, d0), transform);
    let mut previous: Vec<usize> = Vec::new();
    for _ in 0..TM_MAX_ITERATIONS {
        let dist: Vec<f64> = a.iter().zip(b).map(|(m, x)| (transform.apply(m) - x).norm()).collect();
        let mut subset: Vec<usize> = (0..n).filter(|&i| dist[i] < d0).collect();
        if subset.len() < 3 {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| dist[i].total_cmp(&dist[j]));
            subset = order[..3].to_vec();
            subset.sort_unstable();
        }
        if subset == previous {
            break;
        }
        let sa: Vec<Vec3> = subset.iter().map(|&i| a[i]).collect();
        let sb: Vec<Vec3> = subset.iter().map(|&i| b[i]).collect();
        transform = match kabsch_uniform(&sa, &sb) {
            Ok(t) => t,
            Err(GeometryError::Degenerate) => break,
            Err(e) => return Err(e),
        };
        let score = tm_sum(a, b, &transform, d0);
        if score > best.0 {
            best = (score, transform);
        }
        previous = subset;
    }
    Ok(best)
}

pub fn tm_score(a: &[Vec3], b: &[Vec3]) -> Result<f64, GeometryError> {
    tm_score_with_transform(a, b).map(|(s, _)| s)
}

/// Per-residue weights `exp(-d_i / length_scale)`, with `d_i` the distance from
/// holo Cα `i` to the nearest ligand atom.
pub fn pocket_weights(holo_ca: &[Vec3], ligand: &[Vec3], length_scale: f64) -> Result<Vec<f64>, GeometryError> {
    if ligand.is_empty() {
        return Err(GeometryError::EmptyLigand);
    }
    Ok(holo_ca
        .iter()
        .map(|ca| {
            let d = ligand
                .iter()
                .map(|l| (ca - l).norm())
                .fold(f64::INFINITY, f64::min);
            (-d / length_scale).exp()
        })
        .collect())
}

/// Superpose `apo` onto `holo` with Cα weights that emphasise residues near
/// the crystal ligand. Returns the moved apo structure and the transform used.
pub fn pocket_weighted_align(
    apo: &Structure,
    holo: &Structure,
    ligand: &[Vec3],
    length_scale: f64,
) -> Result<(Structure, RigidTransform), GeometryError> {
    let apo_ca = apo.ca_coords();
    let holo_ca = holo.ca_coords();
    if apo_ca.len() != holo_ca.len() {
        return Err(GeometryError::ResidueMismatch(apo_ca.len(), holo_ca.len()));
    }
    let weights = pocket_weights(&holo_ca, ligand, length_scale)?;
    let transform = kabsch(&apo_ca, &holo_ca, &weights)?;
    Ok((apo.transformed(&transform), transform))
}
