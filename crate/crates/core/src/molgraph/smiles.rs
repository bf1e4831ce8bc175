//! Parser for the SMILES subset needed to build heavy-atom bond graphs.
//!
//! Supported: organic-subset atoms (`B C N O P S F Cl Br I` and aromatic
//! `b c n o p s`), bracket atoms, explicit bonds `- = # :`, branches,
//! ring-closure digits (including `%nn`) and the `.` separator. Stereo marks,
//! charges, isotopes, explicit hydrogen counts and atom classes are accepted
//! and dropped.

use std::collections::BTreeMap;

use super::{Atom, Bond, BondOrder, MolGraph};

/// Why a SMILES string was rejected.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SmilesErrorKind {
    #[error("empty input")]
    Empty,
    #[error("unbalanced parenthesis")]
    UnbalancedParenthesis,
    #[error("unpaired ring-closure digit")]
    UnpairedRingClosure,
    #[error("unknown element or token")]
    UnknownToken,
    #[error("empty fragment")]
    EmptyFragment,
    #[error("bond without a following atom")]
    DanglingBond,
    #[error("ring closure bonds an atom to itself")]
    SelfLoop,
    #[error("duplicate bond between the same atom pair")]
    DuplicateBond,
    #[error("conflicting bond orders on a ring closure")]
    RingBondConflict,
    #[error("unterminated bracket atom")]
    UnterminatedBracket,
}

/// A positioned SMILES parse failure.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{kind} at byte {offset} (token {token:?})")]
pub struct SmilesError {
    pub kind: SmilesErrorKind,
    /// Byte offset into the input where the problem was detected.
    pub offset: usize,
    pub token: String,
}

const ORGANIC: &[&str] = &["Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I"];
const AROMATIC_ORGANIC: &[&str] = &["b", "c", "n", "o", "p", "s"];
const AROMATIC_BRACKET: &[&str] = &["se", "as", "te", "b", "c", "n", "o", "p", "s"];

// Elements accepted inside brackets. Hydrogen is handled separately.
const ELEMENTS: &[&str] = &[
    "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar",
    "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se",
    "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn",
    "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho",
    "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi",
    "Po", "At", "Rn", "U",
];

/// Graph node produced by the tokenizer: a heavy atom, or a dropped hydrogen.
#[derive(Clone, Copy)]
enum Node {
    Heavy(usize),
    Hydrogen,
}

struct RingOpen {
    node: Node,
    bond: Option<BondOrder>,
    offset: usize,
    token: String,
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
}

impl<'a> Parser<'a> {
    fn err(&self, kind: SmilesErrorKind, offset: usize, len: usize) -> SmilesError {
        let end = (offset + len).min(self.text.len());
        let token = self
            .text
            .get(offset..end)
            .map(str::to_string)
            .unwrap_or_default();
        SmilesError {
            kind,
            offset,
            token,
        }
    }

    fn add_atom(&mut self, element: &str, aromatic: bool) -> Node {
        self.atoms.push(Atom {
            element: element.to_string(),
            aromatic,
        });
        Node::Heavy(self.atoms.len() - 1)
    }

    fn connect(
        &mut self,
        a: Node,
        b: Node,
        explicit: Option<BondOrder>,
        offset: usize,
    ) -> Result<(), SmilesError> {
        let (Node::Heavy(i), Node::Heavy(j)) = (a, b) else {
            return Ok(());
        };
        if i == j {
            return Err(self.err(SmilesErrorKind::SelfLoop, offset, 1));
        }
        let key = (i.min(j), i.max(j));
        if self.bonds.iter().any(|b| (b.a.min(b.b), b.a.max(b.b)) == key) {
            return Err(self.err(SmilesErrorKind::DuplicateBond, offset, 1));
        }
        let order = explicit.unwrap_or({
            if self.atoms[i].aromatic && self.atoms[j].aromatic {
                BondOrder::Aromatic
            } else {
                BondOrder::Single
            }
        });
        self.bonds.push(Bond { a: i, b: j, order });
        Ok(())
    }

    fn parse_bracket(&mut self, start: usize) -> Result<Node, SmilesError> {
        let close = self.text[start..]
            .find(']')
            .map(|k| start + k)
            .ok_or_else(|| self.err(SmilesErrorKind::UnterminatedBracket, start, 1))?;
        let inner = &self.text[start + 1..close];
        let mut k = 0;
        let ib = inner.as_bytes();
        while k < ib.len() && ib[k].is_ascii_digit() {
            k += 1;
        }
        if k > 0 {
            log::warn!("isotope label ignored in bracket atom at byte {start}");
        }
        let rest = &inner[k..];
        let sym_offset = start + 1 + k;
        let two_letter = ELEMENTS
            .iter()
            .filter(|e| e.len() == 2)
            .find(|e| rest.starts_with(**e));
        let (element, aromatic, used) = if let Some(sym) = two_letter {
            (sym.to_string(), false, 2)
        } else if rest.starts_with('H') {
            ("H".to_string(), false, 1)
        } else if let Some(sym) = ELEMENTS.iter().find(|e| rest.starts_with(**e)) {
            (sym.to_string(), false, sym.len())
        } else if let Some(sym) = AROMATIC_BRACKET.iter().find(|e| rest.starts_with(**e)) {
            (capitalize(sym), true, sym.len())
        } else {
            return Err(self.err(SmilesErrorKind::UnknownToken, sym_offset, rest.len().clamp(1, 2)));
        };
        let tail = &rest[used..];
        if !tail.is_empty() {
            if tail.contains('@') {
                log::warn!("chirality mark ignored in bracket atom at byte {start}");
            }
            if tail.contains('+') || tail.contains('-') {
                log::warn!("formal charge ignored in bracket atom at byte {start}");
            }
            let valid = tail
                .bytes()
                .all(|c| matches!(c, b'@' | b'H' | b'+' | b'-' | b':' | b'0'..=b'9'));
            if !valid {
                return Err(self.err(
                    SmilesErrorKind::UnknownToken,
                    sym_offset + used,
                    tail.len(),
                ));
            }
        }
        self.pos = close + 1;
        if element == "H" {
            log::warn!("explicit hydrogen atom dropped at byte {start}");
            return Ok(Node::Hydrogen);
        }
        Ok(self.add_atom(&element, aromatic))
    }

    fn parse(mut self) -> Result<(Vec<Atom>, Vec<Bond>), SmilesError> {
        if self.text.trim().is_empty() {
            return Err(self.err(SmilesErrorKind::Empty, 0, 0));
        }
        // Stack of branch points: (atom to resume from, byte offset of '(').
        let mut branches: Vec<(Option<Node>, usize)> = Vec::new();
        let mut rings: BTreeMap<u32, RingOpen> = BTreeMap::new();
        let mut prev: Option<Node> = None;
        let mut pending: Option<(BondOrder, usize)> = None;
        let mut fragment_has_atom = false;
        // Whether the current branch has produced an atom since its '('.
        let mut branch_has_atom: Vec<bool> = Vec::new();

        while self.pos < self.bytes.len() {
            let start = self.pos;
            let c = self.bytes[start];
            match c {
                b'(' => {
                    if prev.is_none() || pending.is_some() {
                        return Err(self.err(SmilesErrorKind::UnbalancedParenthesis, start, 1));
                    }
                    branches.push((prev, start));
                    branch_has_atom.push(false);
                    self.pos += 1;
                }
                b')' => {
                    let Some((resume, _)) = branches.pop() else {
                        return Err(self.err(SmilesErrorKind::UnbalancedParenthesis, start, 1));
                    };
                    if pending.is_some() {
                        return Err(self.err(SmilesErrorKind::DanglingBond, start, 1));
                    }
                    if !branch_has_atom.pop().unwrap_or(false) {
                        return Err(self.err(SmilesErrorKind::EmptyFragment, start, 1));
                    }
                    prev = resume;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if pending.is_some() || prev.is_none() {
                        return Err(self.err(SmilesErrorKind::DanglingBond, start, 1));
                    }
                    let order = match c {
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        b':' => BondOrder::Aromatic,
                        b'-' => BondOrder::Single,
                        _ => {
                            log::warn!("directional bond at byte {start} treated as single");
                            BondOrder::Single
                        }
                    };
                    pending = Some((order, start));
                    self.pos += 1;
                }
                b'.' => {
                    if !branches.is_empty() {
                        return Err(self.err(SmilesErrorKind::UnbalancedParenthesis, start, 1));
                    }
                    if !fragment_has_atom {
                        return Err(self.err(SmilesErrorKind::EmptyFragment, start, 1));
                    }
                    if pending.is_some() {
                        return Err(self.err(SmilesErrorKind::DanglingBond, start, 1));
                    }
                    prev = None;
                    fragment_has_atom = false;
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let Some(atom) = prev else {
                        return Err(self.err(SmilesErrorKind::UnpairedRingClosure, start, 1));
                    };
                    let (label, len) = if c == b'%' {
                        let digits = self.text.get(start + 1..start + 3).unwrap_or("");
                        if digits.len() != 2 || !digits.bytes().all(|d| d.is_ascii_digit()) {
                            return Err(self.err(SmilesErrorKind::UnknownToken, start, 3));
                        }
                        (digits.parse::<u32>().unwrap_or(0), 3)
                    } else {
                        (u32::from(c - b'0'), 1)
                    };
                    let bond = pending.take().map(|(o, _)| o);
                    let token = self.text[start..start + len].to_string();
                    if let Some(open) = rings.remove(&label) {
                        let order = match (open.bond, bond) {
                            (Some(x), Some(y)) if x != y => {
                                return Err(self.err(SmilesErrorKind::RingBondConflict, start, len));
                            }
                            (x, y) => x.or(y),
                        };
                        self.connect(open.node, atom, order, start)?;
                    } else {
                        rings.insert(
                            label,
                            RingOpen {
                                node: atom,
                                bond,
                                offset: start,
                                token,
                            },
                        );
                    }
                    self.pos += len;
                }
                b'[' => {
                    let node = self.parse_bracket(start)?;
                    self.attach(&mut prev, &mut pending, node, start)?;
                    fragment_has_atom = true;
                    if let Some(flag) = branch_has_atom.last_mut() {
                        *flag = true;
                    }
                }
                b'*' | b'$' => return Err(self.err(SmilesErrorKind::UnknownToken, start, 1)),
                _ if c.is_ascii_alphabetic() => {
                    let rest = &self.text[start..];
                    let node = if let Some(sym) = ORGANIC.iter().find(|s| rest.starts_with(**s)) {
                        self.pos += sym.len();
                        self.add_atom(sym, false)
                    } else if let Some(sym) = AROMATIC_ORGANIC.iter().find(|s| rest.starts_with(**s)) {
                        self.pos += sym.len();
                        self.add_atom(&capitalize(sym), true)
                    } else {
                        let len = if rest.len() > 1 && rest.as_bytes()[1].is_ascii_lowercase() {
                            2
                        } else {
                            1
                        };
                        return Err(self.err(SmilesErrorKind::UnknownToken, start, len));
                    };
                    self.attach(&mut prev, &mut pending, node, start)?;
                    fragment_has_atom = true;
                    if let Some(flag) = branch_has_atom.last_mut() {
                        *flag = true;
                    }
                }
                _ => {
                    let len = self.text[start..].chars().next().map_or(1, char::len_utf8);
                    return Err(self.err(SmilesErrorKind::UnknownToken, start, len));
                }
            }
        }

        if let Some((_, offset)) = branches.first() {
            return Err(self.err(SmilesErrorKind::UnbalancedParenthesis, *offset, 1));
        }
        if let Some((_, offset)) = pending {
            return Err(self.err(SmilesErrorKind::DanglingBond, offset, 1));
        }
        if let Some(open) = rings.into_values().next() {
            return Err(SmilesError {
                kind: SmilesErrorKind::UnpairedRingClosure,
                offset: open.offset,
                token: open.token,
            });
        }
        if !fragment_has_atom {
            let offset = self.text.len().saturating_sub(1);
            return Err(self.err(SmilesErrorKind::EmptyFragment, offset, 1));
        }
        Ok((self.atoms, self.bonds))
    }

    fn attach(
        &mut self,
        prev: &mut Option<Node>,
        pending: &mut Option<(BondOrder, usize)>,
        node: Node,
        offset: usize,
    ) -> Result<(), SmilesError> {
        if let Some(p) = *prev {
            let bond = pending.take().map(|(o, _)| o);
            self.connect(p, node, bond, offset)?;
        }
        *prev = Some(node);
        Ok(())
    }
}

fn capitalize(sym: &str) -> String {
    let mut chars = sym.chars();
    match chars.next() {
        Some(first) => first.to_ascii_uppercase().to_string() + chars.as_str(),
        None => String::new(),
    }
}

/// Parse a SMILES string into its heavy-atom bond graph.
pub fn parse_smiles(text: &str) -> Result<MolGraph, SmilesError> {
    let parser = Parser {
        text,
        bytes: text.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
    };
    let (atoms, bonds) = parser.parse()?;
    Ok(MolGraph::from_parts(atoms, bonds))
}
