//! A restricted SMILES parser and writer for drug-like small molecules.
//!
//! Supported grammar: organic-subset atoms B, C, N, O, P, S, F, Cl, Br, I;
//! aromatic c, n, o, s; bonds `- = # :`; branches; ring closures `1`-`9` and
//! `%nn`; bracket atoms with isotope, charge and explicit hydrogen count.
//! Stereo marks (`/`, `\`, `@`) and isotopes are accepted and discarded.
//!
//! Implicit hydrogens come from standard valences (B 3, C 4, N 3, O 2,
//! P 3/5, S 2/4/6, halogens 1), charge-adjusted, minus the bond-order sum.
//! Aromatic atoms use a simplified model: each aromatic bond counts one
//! unit, plus one pi unit for aromatic carbon (and nitrogen where it carries
//! a ring double bond, e.g. pyridine-type N).

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Heavy-atom elements accepted by the parser.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Element {
    B,
    C,
    N,
    O,
    P,
    S,
    F,
    Cl,
    Br,
    I,
}

impl Element {
    pub fn atomic_number(self) -> u8 {
        match self {
            Element::B => 5,
            Element::C => 6,
            Element::N => 7,
            Element::O => 8,
            Element::P => 15,
            Element::S => 16,
            Element::F => 9,
            Element::Cl => 17,
            Element::Br => 35,
            Element::I => 53,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::P => "P",
            Element::S => "S",
            Element::F => "F",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    fn from_symbol(sym: &str) -> Option<Element> {
        Some(match sym {
            "B" => Element::B,
            "C" => Element::C,
            "N" => Element::N,
            "O" => Element::O,
            "P" => Element::P,
            "S" => Element::S,
            "F" => Element::F,
            "Cl" => Element::Cl,
            "Br" => Element::Br,
            "I" => Element::I,
            _ => return None,
        })
    }

    fn supports_aromatic(self) -> bool {
        matches!(self, Element::C | Element::N | Element::O | Element::S)
    }

    /// Standard valences in ascending order.
    fn valences(self) -> &'static [i32] {
        match self {
            Element::B => &[3],
            Element::C => &[4],
            Element::N => &[3],
            Element::O => &[2],
            Element::P => &[3, 5],
            Element::S => &[2, 4, 6],
            Element::F | Element::Cl | Element::Br | Element::I => &[1],
        }
    }

    /// Charge-adjusted valence: elements right of carbon gain a bonding
    /// site per positive charge (N+ binds 4), boron gains per negative
    /// charge (B- binds 4), carbon loses one either way.
    fn adjusted_valence(self, base: i32, charge: i8) -> i32 {
        let charge = i32::from(charge);
        let adjusted = match self {
            Element::N | Element::O | Element::P | Element::S => base + charge,
            Element::B => base - charge,
            Element::C => base - charge.abs(),
            Element::F | Element::Cl | Element::Br | Element::I => base + charge,
        };
        adjusted.max(0)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Bond order between two heavy atoms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Stable numeric code, used in fingerprint hashing.
    pub fn code(self) -> u32 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }

    fn units(self) -> i32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }
}

/// A heavy atom in a molecular graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomNode {
    pub element: Element,
    pub charge: i8,
    /// Hydrogen count given in a bracket atom; `None` means implicit.
    pub explicit_h: Option<u8>,
    pub aromatic: bool,
}

/// An undirected bond; `a < b` is not required but `a != b` is.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

#[derive(Debug, Error)]
pub enum SmilesError {
    #[error("empty SMILES input")]
    EmptyInput,
    #[error("unbalanced branch parentheses")]
    UnbalancedBranch,
    #[error("unmatched or invalid ring closure")]
    UnmatchedRingClosure,
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("valence violation at atom {atom}")]
    ValenceViolation { atom: usize },
    #[error("unexpected character `{ch}` at position {pos}")]
    UnexpectedChar { ch: char, pos: usize },
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("aromatic bond between non-aromatic atoms {a} and {b}")]
    InvalidAromaticBond { a: usize, b: usize },
    #[error("duplicate bond between atoms {a} and {b}")]
    DuplicateBond { a: usize, b: usize },
}

/// A molecular graph over heavy atoms with ring perception and hydrogen
/// counts resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct MolecularGraph {
    atoms: Vec<AtomNode>,
    bonds: Vec<Bond>,
    /// Total hydrogen count per atom (explicit or computed).
    hydrogens: Vec<u8>,
    atom_in_ring: Vec<bool>,
    bond_in_ring: Vec<bool>,
    /// Per atom: (neighbor, bond index), sorted by neighbor index.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl MolecularGraph {
    /// Builds a graph from atoms and bonds, computing adjacency, ring
    /// membership and hydrogen counts, and validating the invariants.
    pub fn from_parts(atoms: Vec<AtomNode>, bonds: Vec<Bond>) -> Result<Self, SmilesError> {
        let n = atoms.len();
        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        let mut seen_pairs = HashMap::new();
        for (idx, bond) in bonds.iter().enumerate() {
            if bond.a == bond.b || bond.a >= n || bond.b >= n {
                return Err(SmilesError::UnmatchedRingClosure);
            }
            let key = (bond.a.min(bond.b), bond.a.max(bond.b));
            if seen_pairs.insert(key, idx).is_some() {
                return Err(SmilesError::DuplicateBond {
                    a: bond.a,
                    b: bond.b,
                });
            }
            if bond.order == BondOrder::Aromatic
                && !(atoms[bond.a].aromatic && atoms[bond.b].aromatic)
            {
                return Err(SmilesError::InvalidAromaticBond {
                    a: bond.a,
                    b: bond.b,
                });
            }
            adjacency[bond.a].push((bond.b, idx));
            adjacency[bond.b].push((bond.a, idx));
        }
        for list in adjacency.iter_mut() {
            list.sort_unstable();
        }

        let bond_in_ring = find_ring_bonds(n, &bonds, &adjacency);
        let mut atom_in_ring = vec![false; n];
        for (idx, bond) in bonds.iter().enumerate() {
            if bond_in_ring[idx] {
                atom_in_ring[bond.a] = true;
                atom_in_ring[bond.b] = true;
            }
        }

        let mut hydrogens = Vec::with_capacity(n);
        for i in 0..n {
            hydrogens.push(resolve_hydrogens(i, &atoms, &bonds, &adjacency)?);
        }

        Ok(Self {
            atoms,
            bonds,
            hydrogens,
            atom_in_ring,
            bond_in_ring,
            adjacency,
        })
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn atom(&self, i: usize) -> &AtomNode {
        &self.atoms[i]
    }

    pub fn atoms(&self) -> &[AtomNode] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    /// Total hydrogen count of atom `i`.
    pub fn hydrogens(&self, i: usize) -> u8 {
        self.hydrogens[i]
    }

    /// Number of heavy-atom neighbors.
    pub fn heavy_degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn atom_in_ring(&self, i: usize) -> bool {
        self.atom_in_ring[i]
    }

    pub fn bond_in_ring(&self, idx: usize) -> bool {
        self.bond_in_ring[idx]
    }

    /// Neighbors of atom `i` as (neighbor, bond index), ascending.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    /// Relabels atoms so that new index `i` holds old atom `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<MolecularGraph, SmilesError> {
        let n = self.atoms.len();
        let mut inverse = vec![usize::MAX; n];
        if perm.len() != n {
            return Err(SmilesError::UnexpectedEnd);
        }
        for (new_idx, &old_idx) in perm.iter().enumerate() {
            if old_idx >= n || inverse[old_idx] != usize::MAX {
                return Err(SmilesError::UnexpectedEnd);
            }
            inverse[old_idx] = new_idx;
        }
        let atoms = perm.iter().map(|&old| self.atoms[old].clone()).collect();
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond {
                a: inverse[b.a],
                b: inverse[b.b],
                order: b.order,
            })
            .collect();
        MolecularGraph::from_parts(atoms, bonds)
    }
}

/// Marks bonds lying on some cycle. Non-bridge edges are ring bonds.
fn find_ring_bonds(n: usize, bonds: &[Bond], adjacency: &[Vec<(usize, usize)>]) -> Vec<bool> {
    let mut in_ring = vec![false; bonds.len()];
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![usize::MAX; n];
    let mut timer = 0usize;

    // Iterative DFS; frame = (node, incoming bond, next neighbor cursor).
    for start in 0..n {
        if disc[start] != usize::MAX {
            continue;
        }
        let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(start, None, 0)];
        disc[start] = timer;
        low[start] = timer;
        timer += 1;
        while !stack.is_empty() {
            let top = stack.len() - 1;
            let (u, via, cursor) = stack[top];
            if cursor < adjacency[u].len() {
                stack[top].2 += 1;
                let (v, edge) = adjacency[u][cursor];
                if Some(edge) == via {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, Some(edge), 0));
                } else {
                    // Non-tree edge: lies on a cycle.
                    low[u] = low[u].min(disc[v]);
                    in_ring[edge] = true;
                }
            } else {
                stack.pop();
                if let Some(&(parent, _, _)) = stack.last() {
                    low[parent] = low[parent].min(low[u]);
                    if let Some(edge) = via {
                        // Tree edge is on a cycle unless it is a bridge.
                        if low[u] <= disc[parent] {
                            in_ring[edge] = true;
                        }
                    }
                }
            }
        }
    }
    in_ring
}

/// Effective bond-order sum including the aromatic pi contribution.
fn effective_bond_sum(
    i: usize,
    atoms: &[AtomNode],
    bonds: &[Bond],
    adjacency: &[Vec<(usize, usize)>],
) -> i32 {
    let mut sum = 0;
    let mut aromatic_bonds = 0;
    for &(_, edge) in &adjacency[i] {
        sum += bonds[edge].order.units();
        if bonds[edge].order == BondOrder::Aromatic {
            aromatic_bonds += 1;
        }
    }
    let atom = &atoms[i];
    if atom.aromatic && aromatic_bonds > 0 {
        let pi = match atom.element {
            Element::C => true,
            // Pyridine-type nitrogen contributes a ring double bond;
            // pyrrole-type (extra substituent or explicit H) does not.
            Element::N => atom.charge > 0 || (sum == 2 && atom.explicit_h.is_none()),
            _ => false,
        };
        if pi {
            sum += 1;
        }
    }
    sum
}

fn resolve_hydrogens(
    i: usize,
    atoms: &[AtomNode],
    bonds: &[Bond],
    adjacency: &[Vec<(usize, usize)>],
) -> Result<u8, SmilesError> {
    let atom = &atoms[i];
    let sum = effective_bond_sum(i, atoms, bonds, adjacency);
    let max_valence = atom
        .element
        .adjusted_valence(*atom.element.valences().last().unwrap(), atom.charge);
    if let Some(h) = atom.explicit_h {
        if sum + i32::from(h) > max_valence {
            return Err(SmilesError::ValenceViolation { atom: i });
        }
        return Ok(h);
    }
    for &base in atom.element.valences() {
        let v = atom.element.adjusted_valence(base, atom.charge);
        if sum <= v {
            return Ok((v - sum) as u8);
        }
    }
    Err(SmilesError::ValenceViolation { atom: i })
}

/// Explicit bond tokens; stereo slashes read as single bonds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BondToken {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondToken {
    fn order(self) -> BondOrder {
        match self {
            BondToken::Single => BondOrder::Single,
            BondToken::Double => BondOrder::Double,
            BondToken::Triple => BondOrder::Triple,
            BondToken::Aromatic => BondOrder::Aromatic,
        }
    }
}

struct Parser<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    atoms: Vec<AtomNode>,
    bonds: Vec<Bond>,
    last_atom: Option<usize>,
    branch_stack: Vec<usize>,
    pending_bond: Option<BondToken>,
    ring_open: HashMap<u32, (usize, Option<BondToken>)>,
}

impl<'a> Parser<'a> {
    fn new(input: &'a str) -> Self {
        Self {
            chars: input.char_indices().peekable(),
            atoms: Vec::new(),
            bonds: Vec::new(),
            last_atom: None,
            branch_stack: Vec::new(),
            pending_bond: None,
            ring_open: HashMap::new(),
        }
    }

    fn default_order(&self, a: usize, b: usize) -> BondOrder {
        if self.atoms[a].aromatic && self.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn push_atom(&mut self, atom: AtomNode) {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        if let Some(prev) = self.last_atom {
            let order = self
                .pending_bond
                .take()
                .map(BondToken::order)
                .unwrap_or_else(|| self.default_order(prev, idx));
            self.bonds.push(Bond {
                a: prev,
                b: idx,
                order,
            });
        }
        self.pending_bond = None;
        self.last_atom = Some(idx);
    }

    fn close_ring(&mut self, number: u32) -> Result<(), SmilesError> {
        let current = self.last_atom.ok_or(SmilesError::UnmatchedRingClosure)?;
        let token = self.pending_bond.take();
        match self.ring_open.remove(&number) {
            Some((other, opening_token)) => {
                if other == current {
                    return Err(SmilesError::UnmatchedRingClosure);
                }
                let order = token
                    .or(opening_token)
                    .map(BondToken::order)
                    .unwrap_or_else(|| self.default_order(other, current));
                self.bonds.push(Bond {
                    a: other,
                    b: current,
                    order,
                });
            }
            None => {
                self.ring_open.insert(number, (current, token));
            }
        }
        Ok(())
    }

    fn parse_bracket(&mut self, open_pos: usize) -> Result<AtomNode, SmilesError> {
        // Isotope digits: parsed and discarded.
        while matches!(self.chars.peek(), Some((_, c)) if c.is_ascii_digit()) {
            self.chars.next();
        }

        let (_, first) = self.chars.next().ok_or(SmilesError::UnexpectedEnd)?;
        let mut symbol = String::new();
        let aromatic = first.is_ascii_lowercase();
        symbol.push(first.to_ascii_uppercase());
        if first.is_ascii_uppercase() {
            if let Some(&(_, next)) = self.chars.peek() {
                if next.is_ascii_lowercase()
                    && Element::from_symbol(&format!("{first}{next}")).is_some()
                {
                    symbol.push(next);
                    self.chars.next();
                }
            }
        }
        let element = Element::from_symbol(&symbol)
            .ok_or_else(|| SmilesError::UnknownElement(symbol.clone()))?;
        if aromatic && !element.supports_aromatic() {
            return Err(SmilesError::UnknownElement(first.to_string()));
        }

        let mut explicit_h: u8 = 0;
        let mut saw_h = false;
        let mut charge: i32 = 0;
        loop {
            let (pos, c) = self.chars.next().ok_or(SmilesError::UnexpectedEnd)?;
            match c {
                ']' => break,
                '@' => {} // chirality: accepted and discarded
                'H' => {
                    saw_h = true;
                    explicit_h = 1;
                    if let Some(&(_, d)) = self.chars.peek() {
                        if d.is_ascii_digit() {
                            explicit_h = d.to_digit(10).unwrap() as u8;
                            self.chars.next();
                        }
                    }
                }
                '+' | '-' => {
                    let sign: i32 = if c == '+' { 1 } else { -1 };
                    let mut magnitude = 1;
                    if let Some(&(_, d)) = self.chars.peek() {
                        if d.is_ascii_digit() {
                            magnitude = d.to_digit(10).unwrap() as i32;
                            self.chars.next();
                        } else {
                            while matches!(self.chars.peek(), Some(&(_, r)) if r == c) {
                                magnitude += 1;
                                self.chars.next();
                            }
                        }
                    }
                    charge += sign * magnitude;
                }
                _ => return Err(SmilesError::UnexpectedChar { ch: c, pos }),
            }
        }
        let _ = open_pos;
        Ok(AtomNode {
            element,
            charge: charge.clamp(i8::MIN as i32, i8::MAX as i32) as i8,
            explicit_h: saw_h.then_some(explicit_h),
            aromatic,
        })
    }

    fn run(mut self) -> Result<MolecularGraph, SmilesError> {
        while let Some((pos, c)) = self.chars.next() {
            match c {
                '[' => {
                    let atom = self.parse_bracket(pos)?;
                    self.push_atom(atom);
                }
                'B' | 'C' | 'N' | 'O' | 'P' | 'S' | 'F' | 'I' => {
                    let mut symbol = String::from(c);
                    if let Some(&(_, next)) = self.chars.peek() {
                        if next.is_ascii_lowercase()
                            && Element::from_symbol(&format!("{c}{next}")).is_some()
                        {
                            symbol.push(next);
                            self.chars.next();
                        }
                    }
                    let element =
                        Element::from_symbol(&symbol).ok_or(SmilesError::UnknownElement(symbol))?;
                    self.push_atom(AtomNode {
                        element,
                        charge: 0,
                        explicit_h: None,
                        aromatic: false,
                    });
                }
                'c' | 'n' | 'o' | 's' => {
                    let element = Element::from_symbol(&c.to_ascii_uppercase().to_string())
                        .expect("aromatic subset");
                    self.push_atom(AtomNode {
                        element,
                        charge: 0,
                        explicit_h: None,
                        aromatic: true,
                    });
                }
                '-' | '/' | '\\' => self.set_bond(BondToken::Single, c, pos)?,
                '=' => self.set_bond(BondToken::Double, c, pos)?,
                '#' => self.set_bond(BondToken::Triple, c, pos)?,
                ':' => self.set_bond(BondToken::Aromatic, c, pos)?,
                '(' => {
                    let last = self.last_atom.ok_or(SmilesError::UnbalancedBranch)?;
                    self.branch_stack.push(last);
                }
                ')' => {
                    let restored = self
                        .branch_stack
                        .pop()
                        .ok_or(SmilesError::UnbalancedBranch)?;
                    self.last_atom = Some(restored);
                }
                '%' => {
                    let d1 = self.next_digit()?;
                    let d2 = self.next_digit()?;
                    self.close_ring(d1 * 10 + d2)?;
                }
                '0'..='9' => {
                    self.close_ring(c.to_digit(10).unwrap())?;
                }
                _ => return Err(SmilesError::UnexpectedChar { ch: c, pos }),
            }
        }

        if self.atoms.is_empty() {
            return Err(SmilesError::EmptyInput);
        }
        if !self.branch_stack.is_empty() {
            return Err(SmilesError::UnbalancedBranch);
        }
        if !self.ring_open.is_empty() {
            return Err(SmilesError::UnmatchedRingClosure);
        }
        if self.pending_bond.is_some() {
            return Err(SmilesError::UnexpectedEnd);
        }
        MolecularGraph::from_parts(self.atoms, self.bonds)
    }

    fn set_bond(&mut self, token: BondToken, ch: char, pos: usize) -> Result<(), SmilesError> {
        if self.last_atom.is_none() || self.pending_bond.is_some() {
            return Err(SmilesError::UnexpectedChar { ch, pos });
        }
        self.pending_bond = Some(token);
        Ok(())
    }

    fn next_digit(&mut self) -> Result<u32, SmilesError> {
        match self.chars.next() {
            Some((_, c)) if c.is_ascii_digit() => Ok(c.to_digit(10).unwrap()),
            Some((pos, c)) => Err(SmilesError::UnexpectedChar { ch: c, pos }),
            None => Err(SmilesError::UnexpectedEnd),
        }
    }
}

/// Parses a SMILES string into a molecular graph.
pub fn parse_smiles(input: &str) -> Result<MolecularGraph, SmilesError> {
    let trimmed = input.trim();
    if trimmed.is_empty() {
        return Err(SmilesError::EmptyInput);
    }
    Parser::new(trimmed).run()
}

/// Writes a SMILES string for a connected graph. All atoms are emitted in
/// bracket form with explicit hydrogen counts, so `parse(write(g))` yields
/// a graph identical to `g` up to the returned atom emission order.
pub fn write_smiles(graph: &MolecularGraph) -> String {
    write_smiles_with_order(graph).0
}

/// As [`write_smiles`], also returning the order in which atom indices were
/// emitted (re-parsed atom `k` corresponds to `order[k]` in the input graph).
pub fn write_smiles_with_order(graph: &MolecularGraph) -> (String, Vec<usize>) {
    let n = graph.atom_count();
    let mut out = String::new();
    let mut order = Vec::with_capacity(n);
    if n == 0 {
        return (out, order);
    }

    // Spanning-tree DFS from atom 0; non-tree edges become ring closures.
    let mut visited = vec![false; n];
    let mut tree_children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut closure_edges: Vec<usize> = Vec::new();
    let mut edge_seen = vec![false; graph.bond_count()];
    let mut stack = vec![0usize];
    visited[0] = true;
    while let Some(u) = stack.pop() {
        for &(v, edge) in graph.neighbors(u) {
            if edge_seen[edge] {
                continue;
            }
            edge_seen[edge] = true;
            if visited[v] {
                closure_edges.push(edge);
            } else {
                visited[v] = true;
                tree_children[u].push((v, edge));
                stack.push(v);
            }
        }
    }

    // Ring-closure digits per atom, allocated in emission order.
    let mut closures_at: HashMap<usize, Vec<usize>> = HashMap::new();
    for &edge in &closure_edges {
        let bond = &graph.bonds()[edge];
        closures_at.entry(bond.a).or_default().push(edge);
        closures_at.entry(bond.b).or_default().push(edge);
    }
    let mut digit_of_edge: HashMap<usize, u32> = HashMap::new();
    let mut free_digits: Vec<u32> = (1..100).rev().collect();

    // Emission DFS mirroring the spanning tree.
    #[allow(clippy::too_many_arguments)]
    fn emit(
        graph: &MolecularGraph,
        u: usize,
        via: Option<usize>,
        tree_children: &[Vec<(usize, usize)>],
        closures_at: &HashMap<usize, Vec<usize>>,
        digit_of_edge: &mut HashMap<usize, u32>,
        free_digits: &mut Vec<u32>,
        out: &mut String,
        order: &mut Vec<usize>,
    ) {
        if let Some(edge) = via {
            out.push_str(bond_symbol(graph, edge));
        }
        order.push(u);
        out.push_str(&bracket_atom(graph, u));
        if let Some(edges) = closures_at.get(&u) {
            for &edge in edges {
                let digit = match digit_of_edge.remove(&edge) {
                    Some(d) => {
                        free_digits.push(d);
                        free_digits.sort_unstable_by(|x, y| y.cmp(x));
                        out.push_str(bond_symbol(graph, edge));
                        d
                    }
                    None => {
                        let d = free_digits.pop().expect("ring closure digits exhausted");
                        digit_of_edge.insert(edge, d);
                        out.push_str(bond_symbol(graph, edge));
                        d
                    }
                };
                if digit < 10 {
                    out.push(char::from_digit(digit, 10).unwrap());
                } else {
                    out.push('%');
                    out.push(char::from_digit(digit / 10, 10).unwrap());
                    out.push(char::from_digit(digit % 10, 10).unwrap());
                }
            }
        }
        let children = &tree_children[u];
        for (k, &(child, edge)) in children.iter().enumerate() {
            let parenthesized = k + 1 < children.len();
            if parenthesized {
                out.push('(');
            }
            emit(
                graph,
                child,
                Some(edge),
                tree_children,
                closures_at,
                digit_of_edge,
                free_digits,
                out,
                order,
            );
            if parenthesized {
                out.push(')');
            }
        }
    }

    emit(
        graph,
        0,
        None,
        &tree_children,
        &closures_at,
        &mut digit_of_edge,
        &mut free_digits,
        &mut out,
        &mut order,
    );
    (out, order)
}

fn bond_symbol(graph: &MolecularGraph, edge: usize) -> &'static str {
    let bond = &graph.bonds()[edge];
    let both_aromatic = graph.atom(bond.a).aromatic && graph.atom(bond.b).aromatic;
    match bond.order {
        BondOrder::Single => {
            if both_aromatic {
                "-"
            } else {
                ""
            }
        }
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic => "",
    }
}

fn bracket_atom(graph: &MolecularGraph, i: usize) -> String {
    let atom = graph.atom(i);
    let mut s = String::from("[");
    if atom.aromatic {
        s.push_str(&atom.element.symbol().to_ascii_lowercase());
    } else {
        s.push_str(atom.element.symbol());
    }
    let h = graph.hydrogens(i);
    if h == 1 {
        s.push('H');
    } else if h > 1 {
        s.push('H');
        s.push_str(&h.to_string());
    }
    match atom.charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        c if c > 0 => s.push_str(&format!("+{c}")),
        c => s.push_str(&format!("-{}", -c)),
    }
    s.push(']');
    s
}
