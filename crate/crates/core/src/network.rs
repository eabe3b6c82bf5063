//! Chemical networks and their structural invariants.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::ratlin::{
    lattice_member, nonnegative_vector_with, nullspace, positive_vector_in_span, subspace_equal,
    to_rational, Rational, RationalMatrix, SubspaceBasis,
};

/// Largest ambient dimension accepted by [`extreme_rays`].
pub const EXTREME_RAY_LIMIT: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetworkError {
    #[error("reaction {0} is the zero vector")]
    ZeroReaction(usize),
    #[error("reaction {index} has {found} coefficients, expected {expected}")]
    WrongLength {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("reaction {0} duplicates reaction {1}")]
    DuplicateReaction(usize, usize),
    #[error("species `{0}` is declared twice")]
    DuplicateSpecies(String),
    #[error("species `{0}` takes part in no reaction")]
    UnusedSpecies(String),
    #[error("vector has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("ambient dimension {0} exceeds the extreme-ray enumeration limit")]
    AmbientTooLarge(usize),
}

/// A signed stoichiometric vector. Negative entries are consumed species,
/// positive entries are produced species.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Reaction {
    coeffs: Vec<i64>,
}

impl Reaction {
    pub fn new(coeffs: Vec<i64>) -> Self {
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    /// `I(R)`: reactant indices.
    pub fn reactants(&self) -> Vec<usize> {
        (0..self.coeffs.len())
            .filter(|&i| self.coeffs[i] < 0)
            .collect()
    }

    /// `F(R)`: product indices.
    pub fn products(&self) -> Vec<usize> {
        (0..self.coeffs.len())
            .filter(|&i| self.coeffs[i] > 0)
            .collect()
    }

    /// `D(R) = I(R) ∪ F(R)`.
    pub fn support(&self) -> Vec<usize> {
        (0..self.coeffs.len())
            .filter(|&i| self.coeffs[i] != 0)
            .collect()
    }

    pub fn reversed(&self) -> Self {
        Self::new(self.coeffs.iter().map(|c| -c).collect())
    }

    /// Whether this reaction is the representative of its reversible pair:
    /// `min I(R) < min F(R)`, with an empty reactant side taking precedence.
    pub fn is_representative(&self) -> bool {
        match (self.reactants().first(), self.products().first()) {
            (None, _) => true,
            (_, None) => false,
            (Some(i), Some(f)) => i < f,
        }
    }

    pub fn as_bigint(&self) -> Vec<BigInt> {
        self.coeffs.iter().map(|&c| BigInt::from(c)).collect()
    }
}

/// Species names plus reaction vectors over them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChemicalNetwork {
    species: Vec<String>,
    reactions: Vec<Reaction>,
}

impl ChemicalNetwork {
    pub fn new(species: Vec<String>, reactions: Vec<Reaction>) -> Result<Self, NetworkError> {
        let n = species.len();
        let mut seen_species = HashMap::new();
        for s in &species {
            if seen_species.insert(s.as_str(), ()).is_some() {
                return Err(NetworkError::DuplicateSpecies(s.clone()));
            }
        }
        let mut seen: HashMap<&[i64], usize> = HashMap::new();
        for (k, r) in reactions.iter().enumerate() {
            if r.len() != n {
                return Err(NetworkError::WrongLength {
                    index: k,
                    expected: n,
                    found: r.len(),
                });
            }
            if r.is_zero() {
                return Err(NetworkError::ZeroReaction(k));
            }
            if let Some(&prev) = seen.get(r.coeffs()) {
                return Err(NetworkError::DuplicateReaction(k, prev));
            }
            seen.insert(r.coeffs(), k);
        }
        for (i, s) in species.iter().enumerate() {
            if !reactions.iter().any(|r| r.coeffs[i] != 0) {
                return Err(NetworkError::UnusedSpecies(s.clone()));
            }
        }
        Ok(Self { species, reactions })
    }

    /// Builds a bidirectional network from one vector per reversible pair,
    /// listing each vector followed by its reverse.
    pub fn from_pairs(species: Vec<String>, forward: &[Vec<i64>]) -> Result<Self, NetworkError> {
        let mut reactions = Vec::with_capacity(2 * forward.len());
        for f in forward {
            let r = Reaction::new(f.clone());
            let rev = r.reversed();
            reactions.push(r);
            reactions.push(rev);
        }
        Self::new(species, reactions)
    }

    /// Species named `1, 2, …, n`.
    pub fn numbered_species(n: usize) -> Vec<String> {
        (1..=n).map(|i| i.to_string()).collect()
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn num_species(&self) -> usize {
        self.species.len()
    }

    pub fn num_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    pub fn reaction_index(&self, coeffs: &[i64]) -> Option<usize> {
        self.reactions.iter().position(|r| r.coeffs() == coeffs)
    }

    /// Index of `−R` for the reaction at `k`, if present.
    pub fn reverse_of(&self, k: usize) -> Option<usize> {
        let rev = self.reactions[k].reversed();
        self.reaction_index(rev.coeffs())
    }

    pub fn is_bidirectional(&self) -> bool {
        (0..self.reactions.len()).all(|k| self.reverse_of(k).is_some())
    }

    /// Indices of `ℛ_s`, in input order.
    pub fn nonreverse_set(&self) -> Vec<usize> {
        let index: HashMap<&[i64], usize> = self
            .reactions
            .iter()
            .enumerate()
            .map(|(k, r)| (r.coeffs(), k))
            .collect();
        (0..self.reactions.len())
            .filter(|&k| {
                let r = &self.reactions[k];
                let rev = r.reversed();
                !index.contains_key(rev.coeffs()) || r.is_representative()
            })
            .collect()
    }

    /// `(representative, reverse)` index pairs in `ℛ_s` order.
    pub fn pairs(&self) -> Vec<(usize, Option<usize>)> {
        self.nonreverse_set()
            .into_iter()
            .map(|k| (k, self.reverse_of(k)))
            .collect()
    }

    /// The `N × |ℛ_s|` reaction matrix.
    pub fn reaction_matrix(&self) -> RationalMatrix {
        let cols: Vec<Vec<i64>> = self
            .nonreverse_set()
            .into_iter()
            .map(|k| self.reactions[k].coeffs.clone())
            .collect();
        RationalMatrix::from_i64_columns(self.species.len(), &cols)
    }

    /// Matrix with every reaction of `ℛ` as a column.
    pub fn full_matrix(&self) -> RationalMatrix {
        let cols: Vec<Vec<i64>> = self.reactions.iter().map(|r| r.coeffs.clone()).collect();
        RationalMatrix::from_i64_columns(self.species.len(), &cols)
    }
}

pub fn nonreverse_set(net: &ChemicalNetwork) -> Vec<usize> {
    net.nonreverse_set()
}

#[derive(Debug, Clone)]
pub struct StructureReport {
    pub nonreverse_indices: Vec<usize>,
    pub reaction_matrix: RationalMatrix,
    pub stoichiometric_rank: usize,
    pub cycle_basis: SubspaceBasis,
    pub conservation_basis: SubspaceBasis,
    pub conservative: bool,
    pub positive_law: Option<Vec<Rational>>,
    /// Positions within `ℛ_s` (columns of the reaction matrix).
    pub cycle_support: Vec<usize>,
    /// Indices into `ℛ` of reactions with an empty side.
    pub sources_sinks: Vec<usize>,
    /// Internal consistency problems; empty unless something is badly wrong.
    pub issues: Vec<String>,
}

pub fn structure(net: &ChemicalNetwork) -> StructureReport {
    let nonreverse_indices = net.nonreverse_set();
    let r = net.reaction_matrix();
    let cycle_basis = nullspace(&r);
    let conservation_basis = nullspace(&r.transpose());
    let positive_law = positive_vector_in_span(&conservation_basis);
    let conservative = positive_law.is_some();
    let cycle_support = cycle_basis.support();
    let sources_sinks = has_sources_or_sinks(net);

    let mut issues = Vec::new();
    let per_species =
        (0..net.num_species()).all(|j| nonnegative_vector_with(&conservation_basis, j).is_some());
    if per_species != conservative {
        issues.push(format!(
            "positivity LP says conservative={conservative}, per-species LPs say {per_species}"
        ));
    }
    let rank = r.rank();
    if rank + conservation_basis.dim() != net.num_species() {
        issues.push("rank-nullity violated for the transposed reaction matrix".into());
    }

    StructureReport {
        nonreverse_indices,
        reaction_matrix: r,
        stoichiometric_rank: rank,
        cycle_basis,
        conservation_basis,
        conservative,
        positive_law,
        cycle_support,
        sources_sinks,
        issues,
    }
}

/// Reactions (indices into `ℛ`) with `I(R) = ∅` or `F(R) = ∅`.
pub fn has_sources_or_sinks(net: &ChemicalNetwork) -> Vec<usize> {
    (0..net.num_reactions())
        .filter(|&k| {
            let r = &net.reactions()[k];
            r.reactants().is_empty() || r.products().is_empty()
        })
        .collect()
}

/// Whether `v` is reachable from `0` by integer combinations of reactions.
pub fn accessible(net: &ChemicalNetwork, v: &[i64]) -> Result<bool, NetworkError> {
    if v.len() != net.num_species() {
        return Err(NetworkError::DimensionMismatch {
            expected: net.num_species(),
            found: v.len(),
        });
    }
    let v: Vec<BigInt> = v.iter().map(|&x| BigInt::from(x)).collect();
    Ok(lattice_member(&net.full_matrix(), &v).expect("dimension checked above"))
}

/// Extreme rays of the cone `span(B) ∩ ℝ≥0^N`, as primitive integer vectors.
///
/// Rays are the nonnegative vectors with inclusion-minimal support, found
/// by enumerating supports in order of size.
pub fn extreme_rays(b: &SubspaceBasis) -> Result<Vec<Vec<BigInt>>, NetworkError> {
    let n = b.ambient_dim;
    if n > EXTREME_RAY_LIMIT {
        return Err(NetworkError::AmbientTooLarge(n));
    }
    if b.is_empty() {
        return Ok(Vec::new());
    }
    let cols: Vec<Vec<Rational>> = b.vectors.iter().map(|v| to_rational(v)).collect();
    let mut found_masks: Vec<u32> = Vec::new();
    let mut rays = Vec::new();
    let mut masks: Vec<u32> = (1..(1u32 << n)).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    for mask in masks {
        if found_masks.iter().any(|f| mask & f == *f) {
            continue;
        }
        // Vectors of span(B) vanishing outside the candidate support.
        let outside: Vec<usize> = (0..n).filter(|i| mask & (1 << i) == 0).collect();
        let mut sub = RationalMatrix::zeros(outside.len(), cols.len());
        for (r, &i) in outside.iter().enumerate() {
            for (l, c) in cols.iter().enumerate() {
                sub.set(r, l, c[i].clone());
            }
        }
        let kernel = nullspace(&sub);
        if kernel.dim() != 1 {
            continue;
        }
        let y = to_rational(&kernel.vectors[0]);
        let mut m = vec![Rational::zero(); n];
        for (c, yl) in cols.iter().zip(&y) {
            for (mi, ci) in m.iter_mut().zip(c) {
                *mi += yl * ci;
            }
        }
        let support_mask = (0..n)
            .filter(|&i| !m[i].is_zero())
            .fold(0u32, |acc, i| acc | (1 << i));
        if support_mask != mask {
            continue;
        }
        let all_pos = m.iter().all(|x| !x.is_negative());
        let all_neg = m.iter().all(|x| !x.is_positive());
        if !(all_pos || all_neg) {
            continue;
        }
        let mut ray = crate::ratlin::primitive_integer(&m);
        if ray.iter().any(|x| x.is_negative()) {
            ray = ray.into_iter().map(|x| -x).collect();
        }
        found_masks.push(mask);
        rays.push(ray);
    }
    Ok(rays)
}

/// Whether the rays span the same space as `b`.
pub fn rays_span(b: &SubspaceBasis, rays: &[Vec<BigInt>]) -> bool {
    let span = SubspaceBasis::span_of_integers(b.ambient_dim, rays);
    subspace_equal(b, &span).unwrap_or(false)
}
