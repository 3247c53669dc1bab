//! Deterministic circular (ECFP-style) fingerprints over molecular graphs.
//!
//! Identifiers are 32-bit FNV-1a hashes of big-endian-encoded invariant
//! tuples, so the output is bit-exact across runs and platforms and
//! independent of atom input order.

use std::collections::BTreeSet;
use std::collections::HashMap;

use thiserror::Error;

use crate::scalar::{real, Real};
use crate::smiles::{parse_smiles, MolecularGraph, SmilesError};

/// A fixed-width binary fingerprint.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    words: Vec<u64>,
    nbits: usize,
}

impl Fingerprint {
    pub fn new(nbits: usize) -> Self {
        Self {
            words: vec![0u64; nbits.div_ceil(64)],
            nbits,
        }
    }

    pub fn nbits(&self) -> usize {
        self.nbits
    }

    pub fn set_bit(&mut self, pos: usize) {
        let pos = pos % self.nbits;
        self.words[pos / 64] |= 1u64 << (pos % 64);
    }

    pub fn bit(&self, pos: usize) -> bool {
        let pos = pos % self.nbits;
        (self.words[pos / 64] >> (pos % 64)) & 1 == 1
    }

    /// Number of set bits.
    pub fn set_count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// True when every set bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Fingerprint) -> bool {
        self.nbits == other.nbits
            && self
                .words
                .iter()
                .zip(&other.words)
                .all(|(a, b)| a & !b == 0)
    }

    /// Number of differing bits.
    pub fn hamming_distance(&self, other: &Fingerprint) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    /// Renders the fingerprint as a 0/1 string, bit 0 first.
    pub fn to_bitstring(&self) -> String {
        (0..self.nbits)
            .map(|i| if self.bit(i) { '1' } else { '0' })
            .collect()
    }

    /// Parses a 0/1 string written by [`Fingerprint::to_bitstring`].
    pub fn from_bitstring(text: &str) -> Result<Self, FingerprintError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(FingerprintError::BadBitstring);
        }
        let mut fp = Fingerprint::new(text.len());
        for (i, c) in text.chars().enumerate() {
            match c {
                '0' => {}
                '1' => fp.set_bit(i),
                _ => return Err(FingerprintError::BadBitstring),
            }
        }
        Ok(fp)
    }

    /// Writes the bits as 0/1 scalars into `out`, which must have length
    /// `nbits`. Used to build network input rows.
    pub fn write_scalars<T: Real>(&self, out: &mut [T]) {
        assert_eq!(out.len(), self.nbits);
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = if self.bit(i) { T::one() } else { T::zero() };
        }
    }

    pub fn to_scalars<T: Real>(&self) -> Vec<T> {
        let mut v = vec![T::zero(); self.nbits];
        self.write_scalars(&mut v);
        v
    }
}

#[derive(Debug, Error)]
pub enum FingerprintError {
    #[error("radius {0} outside the supported range 0..=16")]
    BadRadius(usize),
    #[error("width {0} is not a power of two >= 64")]
    BadWidth(usize),
    #[error("fingerprint string must be a non-empty run of 0/1 characters")]
    BadBitstring,
    #[error(transparent)]
    Smiles(#[from] SmilesError),
}

const FNV_OFFSET: u32 = 0x811c9dc5;
const FNV_PRIME: u32 = 0x0100_0193;

fn fnv1a(bytes: &[u8]) -> u32 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u32::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn hash_fields(fields: &[u32]) -> u32 {
    let mut bytes = Vec::with_capacity(fields.len() * 4);
    for f in fields {
        bytes.extend_from_slice(&f.to_be_bytes());
    }
    fnv1a(&bytes)
}

/// Initial per-atom invariant: element number, heavy degree, total hydrogen
/// count, formal charge, ring flag, aromatic flag.
fn atom_invariant(graph: &MolecularGraph, i: usize) -> u32 {
    let atom = graph.atom(i);
    hash_fields(&[
        u32::from(atom.element.atomic_number()),
        graph.heavy_degree(i) as u32,
        u32::from(graph.hydrogens(i)),
        i32::from(atom.charge) as u32,
        u32::from(graph.atom_in_ring(i)),
        u32::from(atom.aromatic),
    ])
}

/// Computes a circular fingerprint by Morgan iteration.
///
/// Round `r` rehashes `(r, own id, sorted (bond code, neighbor id) pairs)`.
/// Environments covering a duplicate atom set keep only the occurrence with
/// the smallest radius (then smallest identifier); each surviving identifier
/// sets bit `id % nbits`.
pub fn compute_ecfp(
    graph: &MolecularGraph,
    radius: usize,
    nbits: usize,
) -> Result<Fingerprint, FingerprintError> {
    if radius > 16 {
        return Err(FingerprintError::BadRadius(radius));
    }
    if nbits < 64 || !nbits.is_power_of_two() {
        return Err(FingerprintError::BadWidth(nbits));
    }

    let n = graph.atom_count();
    let mut ids: Vec<u32> = (0..n).map(|i| atom_invariant(graph, i)).collect();
    // Atom set covered by each environment, grown one shell per round.
    let mut balls: Vec<BTreeSet<usize>> = (0..n).map(|i| BTreeSet::from([i])).collect();

    // Candidate environments keyed by covered atom set; smallest
    // (radius, id) survives.
    let mut best: HashMap<Vec<usize>, (usize, u32)> = HashMap::new();
    let mut consider = |ball: &BTreeSet<usize>, round: usize, id: u32| {
        let key: Vec<usize> = ball.iter().copied().collect();
        let entry = best.entry(key).or_insert((round, id));
        if (round, id) < *entry {
            *entry = (round, id);
        }
    };

    for (i, &id) in ids.iter().enumerate() {
        consider(&balls[i], 0, id);
    }

    for round in 1..=radius {
        let mut next_ids = Vec::with_capacity(n);
        for i in 0..n {
            let mut fields = vec![round as u32, ids[i]];
            let mut neighbor_part: Vec<(u32, u32)> = graph
                .neighbors(i)
                .iter()
                .map(|&(j, edge)| (graph.bonds()[edge].order.code(), ids[j]))
                .collect();
            neighbor_part.sort_unstable();
            for (bond_code, neighbor_id) in neighbor_part {
                fields.push(bond_code);
                fields.push(neighbor_id);
            }
            next_ids.push(hash_fields(&fields));
        }
        let mut next_balls = balls.clone();
        for (i, ball) in next_balls.iter_mut().enumerate() {
            for &(j, _) in graph.neighbors(i) {
                ball.extend(balls[j].iter().copied());
            }
        }
        ids = next_ids;
        balls = next_balls;
        for (i, &id) in ids.iter().enumerate() {
            consider(&balls[i], round, id);
        }
    }

    let mut fp = Fingerprint::new(nbits);
    for &(_, id) in best.values() {
        fp.set_bit(id as usize % nbits);
    }
    Ok(fp)
}

/// Parses a SMILES string and fingerprints it.
pub fn ecfp_from_smiles(
    smiles: &str,
    radius: usize,
    nbits: usize,
) -> Result<Fingerprint, FingerprintError> {
    let graph = parse_smiles(smiles)?;
    compute_ecfp(&graph, radius, nbits)
}

/// Squared Euclidean distance between two binary fingerprints equals their
/// Hamming distance; returned as a scalar for metric code.
pub fn euclidean_distance<T: Real>(a: &Fingerprint, b: &Fingerprint) -> T {
    real::<T>(f64::from(a.hamming_distance(b))).sqrt()
}
