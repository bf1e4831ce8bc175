//! Fixed-column PDB reader and writer for ATOM/HETATM records.

use std::fmt::Write as _;

use super::{normalize_element, Chain, LigandAtom, ProteinAtom, Residue, Structure, AMINO_ACIDS};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PdbError {
    #[error("line {line}: record too short for fixed-column coordinates")]
    ShortRecord { line: usize },
    #[error("line {line}: non-numeric {field} coordinate {value:?}")]
    BadCoordinate {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: non-numeric residue number {value:?}")]
    BadResidueNumber { line: usize, value: String },
    #[error("line {line}: unsupported residue name {name:?}")]
    UnknownResidue { line: usize, name: String },
    #[error("line {line}: residue {residue} has no unique CA atom")]
    MissingCa { line: usize, residue: i32 },
    #[error("line {line}: residue numbering gap or disorder ({prev} -> {next})")]
    ResidueGap { line: usize, prev: i32, next: i32 },
    #[error("coordinate {value} does not fit the 8-column PDB field")]
    CoordinateOverflow { value: f64 },
}

fn column(line: &str, start: usize, end: usize) -> &str {
    // 1-based inclusive columns, clipped to the line.
    let len = line.len();
    if start > len {
        return "";
    }
    line.get(start - 1..end.min(len)).unwrap_or("")
}

fn element_from_name(name_field: &str) -> String {
    // Columns 13-14 carry the element, right-justified, for standard names.
    let first = name_field.chars().next().unwrap_or(' ');
    let guess = if first == ' ' || first.is_ascii_digit() {
        name_field.get(1..2).unwrap_or("")
    } else {
        name_field.get(0..2).unwrap_or("")
    };
    normalize_element(guess.trim_matches(|c: char| !c.is_ascii_alphabetic()))
}

struct ResidueBuilder {
    chain: char,
    key: (i32, char),
    name: String,
    line: usize,
    atoms: Vec<ProteinAtom>,
}

/// Parse ATOM/HETATM records. ATOM records form the protein; HETATM
/// records other than water form the ligand, with one fragment per
/// (chain, residue number, residue name) group. Hydrogens are skipped and
/// reading stops at the first `ENDMDL`.
pub fn read_pdb(text: &str) -> Result<Structure, PdbError> {
    let mut chains: Vec<Chain> = Vec::new();
    let mut current: Option<ResidueBuilder> = None;
    let mut ligand_atoms = Vec::new();
    let mut ligand_groups: Vec<(char, String, String)> = Vec::new();

    for (k, line) in text.lines().enumerate() {
        let lineno = k + 1;
        let record = column(line, 1, 6);
        if record.starts_with("ENDMDL") {
            break;
        }
        let is_atom = record == "ATOM  " || record == "ATOM";
        let is_het = record == "HETATM";
        if !is_atom && !is_het {
            continue;
        }
        if line.len() < 54 {
            return Err(PdbError::ShortRecord { line: lineno });
        }
        let name_field = column(line, 13, 16);
        let name = name_field.trim().to_string();
        let res_name = column(line, 18, 20).trim().to_string();
        let chain_id = column(line, 22, 22).chars().next().unwrap_or(' ');
        let res_seq_raw = column(line, 23, 26);
        let icode = column(line, 27, 27).chars().next().unwrap_or(' ');
        let mut coord = [0.0; 3];
        for (slot, (field, (a, b))) in coord
            .iter_mut()
            .zip(["x", "y", "z"].into_iter().zip([(31, 38), (39, 46), (47, 54)]))
        {
            let raw = column(line, a, b);
            *slot = raw
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| PdbError::BadCoordinate {
                    line: lineno,
                    field,
                    value: raw.to_string(),
                })?;
        }
        let element = {
            let raw = column(line, 77, 78).trim();
            if raw.is_empty() {
                element_from_name(name_field)
            } else {
                normalize_element(raw)
            }
        };
        if element == "H" || element == "D" {
            continue;
        }
        if res_name == "HOH" || res_name == "DOD" {
            continue;
        }
        let position = Vec3::new(coord[0], coord[1], coord[2]);

        if is_het {
            let key = (chain_id, res_seq_raw.to_string(), res_name.clone());
            let fragment = match ligand_groups.iter().position(|g| *g == key) {
                Some(f) => f,
                None => {
                    ligand_groups.push(key);
                    ligand_groups.len() - 1
                }
            };
            ligand_atoms.push(LigandAtom {
                element,
                position,
                fragment,
            });
            continue;
        }

        let res_seq = res_seq_raw
            .trim()
            .parse::<i32>()
            .map_err(|_| PdbError::BadResidueNumber {
                line: lineno,
                value: res_seq_raw.to_string(),
            })?;
        if !AMINO_ACIDS.contains(&res_name.as_str()) {
            return Err(PdbError::UnknownResidue {
                line: lineno,
                name: res_name,
            });
        }
        let atom = ProteinAtom {
            name,
            element,
            position,
        };
        match current.as_mut() {
            Some(b) if b.chain == chain_id && b.key == (res_seq, icode) => b.atoms.push(atom),
            _ => {
                if let Some(done) = current.take() {
                    push_residue(&mut chains, done)?;
                }
                current = Some(ResidueBuilder {
                    chain: chain_id,
                    key: (res_seq, icode),
                    name: res_name,
                    line: lineno,
                    atoms: vec![atom],
                });
            }
        }
    }
    if let Some(done) = current.take() {
        push_residue(&mut chains, done)?;
    }
    Ok(Structure {
        chains,
        ligand_atoms,
    })
}

fn push_residue(chains: &mut Vec<Chain>, b: ResidueBuilder) -> Result<(), PdbError> {
    let residue = Residue {
        name: b.name,
        index: b.key.0,
        atoms: b.atoms,
    };
    if residue.ca().is_none() {
        return Err(PdbError::MissingCa {
            line: b.line,
            residue: residue.index,
        });
    }
    match chains.last_mut() {
        Some(chain) if chain.id == b.chain => {
            let prev = chain.residues.last().map_or(residue.index - 1, |r| r.index);
            if residue.index != prev + 1 {
                return Err(PdbError::ResidueGap {
                    line: b.line,
                    prev,
                    next: residue.index,
                });
            }
            chain.residues.push(residue);
        }
        _ => chains.push(Chain {
            id: b.chain,
            residues: vec![residue],
        }),
    }
    Ok(())
}

/// Render a coordinate with three decimals, rounding half away from zero.
fn format_coord(value: f64) -> Result<String, PdbError> {
    let scaled = (value * 1000.0).round();
    if !scaled.is_finite() || scaled.abs() >= 1e13 {
        return Err(PdbError::CoordinateOverflow { value });
    }
    let milli = scaled as i64;
    let sign = if milli < 0 { "-" } else { "" };
    let abs = milli.unsigned_abs();
    let text = format!("{sign}{}.{:03}", abs / 1000, abs % 1000);
    if text.len() > 8 {
        return Err(PdbError::CoordinateOverflow { value });
    }
    Ok(format!("{text:>8}"))
}

fn format_name(name: &str, element: &str) -> String {
    if name.len() < 4 && element.len() == 1 {
        format!(" {name:<3}")
    } else {
        format!("{name:<4}")
    }
}

#[allow(clippy::too_many_arguments)]
fn push_record(
    out: &mut String,
    record: &str,
    serial: usize,
    name: &str,
    res_name: &str,
    chain: char,
    res_seq: i32,
    position: &Vec3,
    element: &str,
) -> Result<(), PdbError> {
    let x = format_coord(position.x)?;
    let y = format_coord(position.y)?;
    let z = format_coord(position.z)?;
    let _ = writeln!(
        out,
        "{record:<6}{:>5} {}{}{:>3} {}{:>4}    {x}{y}{z}{:>6}{:>6}          {:>2}",
        serial % 100_000,
        format_name(name, element),
        ' ',
        res_name,
        chain,
        res_seq,
        "1.00",
        "0.00",
        element.to_ascii_uppercase(),
    );
    Ok(())
}

/// Emit ATOM records per chain (each closed by TER), then ligand HETATM
/// records with residue name `LIG`, chain `L` and one residue number per
/// fragment.
pub fn write_pdb(structure: &Structure) -> Result<String, PdbError> {
    let mut out = String::new();
    let mut serial = 1;
    for chain in &structure.chains {
        let mut last: Option<&Residue> = None;
        for residue in &chain.residues {
            for atom in &residue.atoms {
                push_record(
                    &mut out,
                    "ATOM",
                    serial,
                    &atom.name,
                    &residue.name,
                    chain.id,
                    residue.index,
                    &atom.position,
                    &atom.element,
                )?;
                serial += 1;
            }
            last = Some(residue);
        }
        if let Some(r) = last {
            let _ = writeln!(out, "TER   {:>5}      {:>3} {}{:>4}", serial % 100_000, r.name, chain.id, r.index);
            serial += 1;
        }
    }
    let mut per_fragment = std::collections::BTreeMap::<usize, usize>::new();
    for atom in &structure.ligand_atoms {
        let count = per_fragment.entry(atom.fragment).or_insert(0);
        *count += 1;
        let name = format!("{}{}", atom.element.to_ascii_uppercase(), count);
        push_record(
            &mut out,
            "HETATM",
            serial,
            &name,
            "LIG",
            'L',
            atom.fragment as i32 + 1,
            &atom.position,
            &atom.element,
        )?;
        serial += 1;
    }
    out.push_str("END\n");
    Ok(out)
}
