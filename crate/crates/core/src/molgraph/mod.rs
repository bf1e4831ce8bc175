//! Heavy-atom bond graphs parsed from SMILES, with the fragment Laplacians
//! used by the harmonic prior and the automorphisms used by
//! symmetry-corrected RMSD.

mod smiles;

pub use smiles::{parse_smiles, SmilesError, SmilesErrorKind};

use nalgebra::DMatrix;

/// Default limit on enumerated automorphisms per fragment.
pub const DEFAULT_AUTOMORPHISM_CAP: usize = 10_000;

/// Largest fragment for which automorphisms are enumerated.
pub const MAX_AUTOMORPHISM_ATOMS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub fn symbol(self) -> &'static str {
        match self {
            BondOrder::Single => "-",
            BondOrder::Double => "=",
            BondOrder::Triple => "#",
            BondOrder::Aromatic => ":",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    /// Capitalized element symbol, e.g. `C`, `Cl`.
    pub element: String,
    /// Written as a lowercase aromatic atom in the source SMILES.
    pub aromatic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("unknown fragment id {0}")]
    UnknownFragment(usize),
    #[error("fragment has {size} atoms; automorphism search supports at most {max}")]
    FragmentTooLarge { size: usize, max: usize },
    #[error("automorphism cap must be positive")]
    ZeroCap,
}

/// Heavy-atom molecular graph. Fragments are the connected components,
/// labelled 0.. in order of their lowest-index atom.
#[derive(Debug, Clone, PartialEq)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    fragment_ids: Vec<usize>,
    neighbors: Vec<Vec<(usize, BondOrder)>>,
}

impl MolGraph {
    /// Build a graph from atoms and bonds. Bonds must reference existing atoms
    /// and must not repeat or form self-loops; the SMILES parser guarantees this.
    pub(crate) fn from_parts(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Self {
        let n = atoms.len();
        let mut neighbors = vec![Vec::new(); n];
        for b in &bonds {
            neighbors[b.a].push((b.b, b.order));
            neighbors[b.b].push((b.a, b.order));
        }
        let mut fragment_ids = vec![usize::MAX; n];
        let mut next = 0;
        for start in 0..n {
            if fragment_ids[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            fragment_ids[start] = next;
            while let Some(i) = stack.pop() {
                for &(j, _) in &neighbors[i] {
                    if fragment_ids[j] == usize::MAX {
                        fragment_ids[j] = next;
                        stack.push(j);
                    }
                }
            }
            next += 1;
        }
        MolGraph {
            atoms,
            bonds,
            fragment_ids,
            neighbors,
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn elements(&self) -> Vec<&str> {
        self.atoms.iter().map(|a| a.element.as_str()).collect()
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn fragment_ids(&self) -> &[usize] {
        &self.fragment_ids
    }

    pub fn fragment_count(&self) -> usize {
        self.fragment_ids.iter().max().map_or(0, |m| m + 1)
    }

    /// Global atom indices of one fragment, ascending.
    pub fn fragment_atoms(&self, fragment: usize) -> Vec<usize> {
        (0..self.atoms.len())
            .filter(|&i| self.fragment_ids[i] == fragment)
            .collect()
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.neighbors[atom].len()
    }

    pub fn neighbors(&self, atom: usize) -> &[(usize, BondOrder)] {
        &self.neighbors[atom]
    }

    /// Dense 0/1 adjacency over all atoms. Bond order does not weight entries.
    pub fn adjacency(&self) -> DMatrix<f64> {
        let n = self.atoms.len();
        let mut a = DMatrix::zeros(n, n);
        for b in &self.bonds {
            a[(b.a, b.b)] = 1.0;
            a[(b.b, b.a)] = 1.0;
        }
        a
    }

    /// Graph Laplacian `D - A` restricted to one fragment.
    pub fn laplacian(&self, fragment: usize) -> Result<FragmentLaplacian, GraphError> {
        if fragment >= self.fragment_count() {
            return Err(GraphError::UnknownFragment(fragment));
        }
        let atoms = self.fragment_atoms(fragment);
        let n = atoms.len();
        let mut local = vec![usize::MAX; self.atoms.len()];
        for (k, &i) in atoms.iter().enumerate() {
            local[i] = k;
        }
        let mut matrix = DMatrix::zeros(n, n);
        for b in &self.bonds {
            let (i, j) = (local[b.a], local[b.b]);
            if i == usize::MAX {
                continue;
            }
            matrix[(i, j)] -= 1.0;
            matrix[(j, i)] -= 1.0;
            matrix[(i, i)] += 1.0;
            matrix[(j, j)] += 1.0;
        }
        Ok(FragmentLaplacian { atoms, matrix })
    }

    /// Enumerate bond-preserving, element-preserving permutations of one
    /// fragment's atoms, up to `cap` of them.
    pub fn automorphisms(&self, fragment: usize, cap: usize) -> Result<Automorphisms, GraphError> {
        if cap == 0 {
            return Err(GraphError::ZeroCap);
        }
        if fragment >= self.fragment_count() {
            return Err(GraphError::UnknownFragment(fragment));
        }
        let atoms = self.fragment_atoms(fragment);
        if atoms.len() > MAX_AUTOMORPHISM_ATOMS {
            return Err(GraphError::FragmentTooLarge {
                size: atoms.len(),
                max: MAX_AUTOMORPHISM_ATOMS,
            });
        }
        Ok(AutomorphismSearch::new(self, atoms, cap).run())
    }
}

/// Laplacian of a single fragment, indexed by the fragment's local atom order.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentLaplacian {
    /// Global atom index of each local row.
    pub atoms: Vec<usize>,
    pub matrix: DMatrix<f64>,
}

impl FragmentLaplacian {
    pub fn size(&self) -> usize {
        self.atoms.len()
    }
}

/// Automorphisms of one fragment. Each permutation maps local index `i` to
/// `perm[i]`; the identity comes first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Automorphisms {
    pub atoms: Vec<usize>,
    pub perms: Vec<Vec<usize>>,
    /// Enumeration stopped at the cap; more automorphisms may exist.
    pub truncated: bool,
}

struct AutomorphismSearch {
    n: usize,
    adjacency: Vec<Vec<Option<BondOrder>>>,
    colors: Vec<usize>,
    order: Vec<usize>,
    cap: usize,
    atoms: Vec<usize>,
}

impl AutomorphismSearch {
    fn new(graph: &MolGraph, atoms: Vec<usize>, cap: usize) -> Self {
        let n = atoms.len();
        let mut local = vec![usize::MAX; graph.atom_count()];
        for (k, &i) in atoms.iter().enumerate() {
            local[i] = k;
        }
        let mut adjacency = vec![vec![None; n]; n];
        for (k, &i) in atoms.iter().enumerate() {
            for &(j, order) in graph.neighbors(i) {
                adjacency[k][local[j]] = Some(order);
            }
        }

        // Initial colour: element, aromatic flag and sorted bond-order multiset,
        // then refine by neighbour colours until stable.
        let signatures: Vec<(String, bool, Vec<BondOrder>)> = atoms
            .iter()
            .map(|&i| {
                let mut orders: Vec<BondOrder> = graph.neighbors(i).iter().map(|&(_, o)| o).collect();
                orders.sort();
                (graph.atoms[i].element.clone(), graph.atoms[i].aromatic, orders)
            })
            .collect();
        let mut colors = relabel(&signatures);
        loop {
            let refined: Vec<(usize, Vec<(usize, BondOrder)>)> = (0..n)
                .map(|k| {
                    let mut nb: Vec<(usize, BondOrder)> = (0..n)
                        .filter_map(|m| adjacency[k][m].map(|o| (colors[m], o)))
                        .collect();
                    nb.sort();
                    (colors[k], nb)
                })
                .collect();
            let next = relabel(&refined);
            let classes = |c: &[usize]| c.iter().max().map_or(0, |m| m + 1);
            if classes(&next) == classes(&colors) {
                break;
            }
            colors = next;
        }

        // Visit atoms in BFS order so each new atom usually has an assigned neighbour.
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        for root in 0..n {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            let mut queue = std::collections::VecDeque::from([root]);
            while let Some(k) = queue.pop_front() {
                order.push(k);
                for m in 0..n {
                    if adjacency[k][m].is_some() && !seen[m] {
                        seen[m] = true;
                        queue.push_back(m);
                    }
                }
            }
        }

        AutomorphismSearch {
            n,
            adjacency,
            colors,
            order,
            cap,
            atoms,
        }
    }

    fn run(self) -> Automorphisms {
        let mut perms = Vec::new();
        let mut mapping = vec![usize::MAX; self.n];
        let mut used = vec![false; self.n];
        let mut truncated = false;
        self.extend(0, &mut mapping, &mut used, &mut perms, &mut truncated);
        // Backtracking tries the identity image first at every depth, so the
        // identity is always the first permutation found.
        Automorphisms {
            atoms: self.atoms,
            perms,
            truncated,
        }
    }

    fn extend(
        &self,
        depth: usize,
        mapping: &mut [usize],
        used: &mut [bool],
        perms: &mut Vec<Vec<usize>>,
        truncated: &mut bool,
    ) {
        if *truncated {
            return;
        }
        if depth == self.n {
            if perms.len() == self.cap {
                *truncated = true;
                return;
            }
            perms.push(mapping.to_vec());
            return;
        }
        let k = self.order[depth];
        // Identity candidate first, then the rest in index order.
        let candidates = std::iter::once(k).chain((0..self.n).filter(|&c| c != k));
        for image in candidates {
            if used[image] || self.colors[image] != self.colors[k] {
                continue;
            }
            let consistent = self.order[..depth].iter().all(|&prev| {
                self.adjacency[k][prev] == self.adjacency[image][mapping[prev]]
            });
            if !consistent {
                continue;
            }
            mapping[k] = image;
            used[image] = true;
            self.extend(depth + 1, mapping, used, perms, truncated);
            used[image] = false;
            mapping[k] = usize::MAX;
            if *truncated {
                return;
            }
        }
    }
}

fn relabel<T: Ord + Clone>(keys: &[T]) -> Vec<usize> {
    let mut sorted: Vec<T> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).unwrap_or(0))
        .collect()
}
