use std::collections::VecDeque;

use crate::molgraph::MolGraph;
use crate::structures::Structure;

/// Static per-atom descriptor length: element one-hot (C, N, O, S, other),
/// scaled degree, and element-resolved bond-graph proximity.
pub const DESCRIPTORS: usize = 11;

const ELEMENT_SLOTS: usize = 5;

fn element_slot(element: &str) -> usize {
    match element.to_ascii_uppercase().as_str() {
        "C" => 0,
        "N" => 1,
        "O" => 2,
        "S" => 3,
        _ => 4,
    }
}

/// Bond distances from `start` within its fragment; `usize::MAX` if unreachable.
fn graph_distances(graph: &MolGraph, start: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; graph.atom_count()];
    dist[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(i) = queue.pop_front() {
        for &(j, _) in graph.neighbors(i) {
            if dist[j] == usize::MAX {
                dist[j] = dist[i] + 1;
                queue.push_back(j);
            }
        }
    }
    dist
}

/// Coordinate-free atom descriptors for one protein/ligand complex, in
/// state row order (protein rows first).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTopology {
    descriptors: Vec<[f64; DESCRIPTORS]>,
    n_protein: usize,
}

impl ComplexTopology {
    pub fn new(protein_elements: &[&str], graph: &MolGraph) -> Self {
        let mut descriptors = Vec::with_capacity(protein_elements.len() + graph.atom_count());
        for e in protein_elements {
            let mut d = [0.0; DESCRIPTORS];
            d[element_slot(e)] = 1.0;
            descriptors.push(d);
        }
        let slots: Vec<usize> = graph.atoms().iter().map(|a| element_slot(&a.element)).collect();
        for i in 0..graph.atom_count() {
            let mut d = [0.0; DESCRIPTORS];
            d[slots[i]] = 1.0;
            d[ELEMENT_SLOTS] = graph.degree(i) as f64 / 4.0;
            for (j, &dist) in graph_distances(graph, i).iter().enumerate() {
                if j != i && dist != usize::MAX {
                    d[ELEMENT_SLOTS + 1 + slots[j]] += 0.5f64.powi(dist as i32);
                }
            }
            descriptors.push(d);
        }
        ComplexTopology {
            descriptors,
            n_protein: protein_elements.len(),
        }
    }

    pub fn from_structure(template: &Structure, graph: &MolGraph) -> Self {
        let elements: Vec<&str> = template
            .residues()
            .flat_map(|r| r.atoms.iter().map(|a| a.element.as_str()))
            .collect();
        ComplexTopology::new(&elements, graph)
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn n_protein(&self) -> usize {
        self.n_protein
    }

    pub fn descriptor(&self, row: usize) -> &[f64; DESCRIPTORS] {
        &self.descriptors[row]
    }
}
