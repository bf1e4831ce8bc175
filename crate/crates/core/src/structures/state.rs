use crate::Vec3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StateError {
    #[error("complex state has neither protein nor ligand atoms")]
    Empty,
    #[error("non-finite coordinate at row {row}")]
    NonFinite { row: usize },
    #[error("time {0} outside [0, 1]")]
    TimeOutOfRange(f64),
    #[error("partition describes {expected} rows but {actual} coordinates were given")]
    RowCount { expected: usize, actual: usize },
    #[error("ligand fragment labels must be contiguous from 0 in row order")]
    FragmentLabels,
}

/// How the rows of a [`ComplexState`] split into protein atoms followed by
/// ligand atoms, with one fragment label per ligand row.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Partition {
    pub n_protein: usize,
    pub ligand_fragments: Vec<usize>,
}

impl Partition {
    pub fn new(n_protein: usize, ligand_fragments: Vec<usize>) -> Result<Self, StateError> {
        let mut next = 0;
        for &f in &ligand_fragments {
            if f == next {
                next += 1;
            } else if f + 1 != next {
                return Err(StateError::FragmentLabels);
            }
        }
        Ok(Partition {
            n_protein,
            ligand_fragments,
        })
    }

    pub fn n_ligand(&self) -> usize {
        self.ligand_fragments.len()
    }

    pub fn len(&self) -> usize {
        self.n_protein + self.n_ligand()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fragment_count(&self) -> usize {
        self.ligand_fragments.iter().max().map_or(0, |m| m + 1)
    }

    /// Group label per row: `None` for protein rows, `Some(fragment)` for ligand rows.
    pub fn group(&self, row: usize) -> Option<usize> {
        row.checked_sub(self.n_protein)
            .map(|l| self.ligand_fragments[l])
    }
}

/// Concatenated protein + ligand coordinates at flow time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexState {
    pub coords: Vec<Vec3>,
    pub partition: Partition,
    pub time: f64,
}

impl ComplexState {
    pub fn new(coords: Vec<Vec3>, partition: Partition, time: f64) -> Result<Self, StateError> {
        if partition.is_empty() {
            return Err(StateError::Empty);
        }
        if coords.len() != partition.len() {
            return Err(StateError::RowCount {
                expected: partition.len(),
                actual: coords.len(),
            });
        }
        if !(0.0..=1.0).contains(&time) {
            return Err(StateError::TimeOutOfRange(time));
        }
        if let Some(row) = coords.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(StateError::NonFinite { row });
        }
        Ok(ComplexState {
            coords,
            partition,
            time,
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn protein(&self) -> &[Vec3] {
        &self.coords[..self.partition.n_protein]
    }

    pub fn ligand(&self) -> &[Vec3] {
        &self.coords[self.partition.n_protein..]
    }

    /// Same partition, new coordinates and time.
    pub fn with_coords(&self, coords: Vec<Vec3>, time: f64) -> Result<Self, StateError> {
        ComplexState::new(coords, self.partition.clone(), time)
    }
}

/// Stack protein rows, then each ligand fragment in the given order.
/// Fragments must be non-empty.
pub fn concat_state(protein: &[Vec3], fragments: &[Vec<Vec3>], time: f64) -> Result<ComplexState, StateError> {
    let mut coords = protein.to_vec();
    let mut labels = Vec::new();
    for (f, frag) in fragments.iter().enumerate() {
        coords.extend_from_slice(frag);
        labels.extend(std::iter::repeat_n(f, frag.len()));
    }
    let partition = Partition::new(protein.len(), labels)?;
    ComplexState::new(coords, partition, time)
}

/// Inverse of [`concat_state`]: protein rows and per-fragment ligand rows.
pub fn split_state(state: &ComplexState) -> (Vec<Vec3>, Vec<Vec<Vec3>>) {
    let protein = state.protein().to_vec();
    let mut fragments = vec![Vec::new(); state.partition.fragment_count()];
    for (p, &f) in state.ligand().iter().zip(&state.partition.ligand_fragments) {
        fragments[f].push(*p);
    }
    (protein, fragments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(n: usize, base: f64) -> Vec<Vec3> {
        (0..n).map(|i| Vec3::new(base + i as f64, 1.0, -2.0)).collect()
    }

    #[test]
    fn concat_examples() {
        let s = concat_state(&pts(2, 0.0), &[pts(3, 10.0)], 0.0).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s.partition.n_protein, 2);
        assert_eq!(s.partition.n_ligand(), 3);

        let s = concat_state(&pts(1, 0.0), &[pts(2, 10.0), pts(1, 20.0)], 0.5).unwrap();
        assert_eq!(s.partition.ligand_fragments, vec![0, 0, 1]);
        assert_eq!(s.partition.group(0), None);
        assert_eq!(s.partition.group(3), Some(1));
    }

    #[test]
    fn concat_errors() {
        assert_eq!(concat_state(&[], &[], 0.0), Err(StateError::Empty));
        assert_eq!(
            concat_state(&[Vec3::new(f64::NAN, 0.0, 0.0)], &[], 0.0),
            Err(StateError::NonFinite { row: 0 })
        );
        assert_eq!(
            concat_state(&pts(1, 0.0), &[], 1.5),
            Err(StateError::TimeOutOfRange(1.5))
        );
        assert!(Partition::new(0, vec![0, 2]).is_err());
        assert!(Partition::new(0, vec![0, 1, 0]).is_err());
    }

    #[test]
    fn ligand_only_and_protein_only() {
        let s = concat_state(&[], &[pts(2, 0.0)], 0.0).unwrap();
        assert_eq!(s.protein().len(), 0);
        let s = concat_state(&pts(2, 0.0), &[], 0.0).unwrap();
        assert_eq!(s.ligand().len(), 0);
    }

    proptest! {
        #[test]
        fn split_inverts_concat(
            n_protein in 0usize..6,
            sizes in proptest::collection::vec(1usize..5, 0..4),
            base in -50.0f64..50.0,
        ) {
            prop_assume!(n_protein + sizes.iter().sum::<usize>() > 0);
            let protein = pts(n_protein, base);
            let fragments: Vec<Vec<Vec3>> = sizes.iter().enumerate().map(|(k, &n)| pts(n, base + 100.0 * k as f64)).collect();
            let state = concat_state(&protein, &fragments, 0.25).unwrap();
            let (p, l) = split_state(&state);
            prop_assert_eq!(p, protein);
            prop_assert_eq!(l, fragments);
        }
    }
}
