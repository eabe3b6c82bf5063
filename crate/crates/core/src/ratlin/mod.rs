//! Exact rational linear algebra: echelon forms, canonical kernels, exact
//! solves, subspace comparison, lattice membership and a small simplex.

mod lattice;
mod matrix;
pub mod simplex;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

pub use lattice::{hermite_rows, in_lattice};
pub use matrix::{normalize_integer, primitive_integer, rational_to_f64, RationalMatrix};
use simplex::{maximize, LpOutcome};

pub type Rational = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Basis of a rational subspace, stored as primitive integer vectors whose
/// first nonzero entry is positive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubspaceBasis {
    pub ambient_dim: usize,
    #[serde(serialize_with = "serialize_int_vectors")]
    pub vectors: Vec<Vec<BigInt>>,
}

fn serialize_int_vectors<S: serde::Serializer>(v: &[Vec<BigInt>], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for row in v {
        let strs: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        seq.serialize_element(&strs)?;
    }
    seq.end()
}

impl SubspaceBasis {
    pub fn empty(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            vectors: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Canonical basis of the span of arbitrary rational vectors.
    pub fn span_of(ambient_dim: usize, vectors: &[Vec<Rational>]) -> Self {
        if vectors.is_empty() {
            return Self::empty(ambient_dim);
        }
        let mut m = RationalMatrix::zeros(vectors.len(), ambient_dim);
        for (i, v) in vectors.iter().enumerate() {
            assert_eq!(v.len(), ambient_dim, "vector length mismatch");
            for (j, x) in v.iter().enumerate() {
                m.set(i, j, x.clone());
            }
        }
        let (r, pivots) = m.rref();
        let vectors = (0..pivots.len())
            .map(|i| primitive_integer(r.row(i)))
            .collect();
        Self {
            ambient_dim,
            vectors,
        }
    }

    pub fn span_of_integers(ambient_dim: usize, vectors: &[Vec<BigInt>]) -> Self {
        let rational: Vec<Vec<Rational>> = vectors.iter().map(|v| to_rational(v)).collect();
        Self::span_of(ambient_dim, &rational)
    }

    /// Basis vectors as the rows of a matrix.
    pub fn as_row_matrix(&self) -> RationalMatrix {
        RationalMatrix::from_bigint_rows(self.ambient_dim, &self.vectors)
    }

    /// Whether `v` lies in the span.
    pub fn contains(&self, v: &[Rational]) -> bool {
        if self.vectors.is_empty() {
            return v.iter().all(Zero::is_zero);
        }
        let extended = self
            .as_row_matrix()
            .vstack(&RationalMatrix::from_rows(&[v.to_vec()]))
            .expect("ambient dimension checked by caller");
        extended.rank() == self.dim()
    }

    /// Indices where some basis vector is nonzero.
    pub fn support(&self) -> Vec<usize> {
        (0..self.ambient_dim)
            .filter(|&j| self.vectors.iter().any(|v| !v[j].is_zero()))
            .collect()
    }

    pub fn vectors_f64(&self) -> Vec<Vec<f64>> {
        self.vectors
            .iter()
            .map(|v| v.iter().map(bigint_to_f64).collect())
            .collect()
    }
}

impl RationalMatrix {
    pub fn from_rows(rows: &[Vec<Rational>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                m.set(i, j, v.clone());
            }
        }
        m
    }
}

pub fn to_rational(v: &[BigInt]) -> Vec<Rational> {
    v.iter().cloned().map(Rational::from_integer).collect()
}

pub fn bigint_to_f64(x: &BigInt) -> f64 {
    rational_to_f64(&Rational::from_integer(x.clone()))
}

/// Canonical basis of `{x : Mx = 0}`: one vector per free column of the
/// RREF, in increasing free-column order.
pub fn nullspace(m: &RationalMatrix) -> SubspaceBasis {
    let (r, pivots) = m.rref();
    let n = m.cols();
    let mut vectors = Vec::new();
    for f in (0..n).filter(|c| !pivots.contains(c)) {
        let mut x = vec![Rational::zero(); n];
        x[f] = Rational::one();
        for (i, &p) in pivots.iter().enumerate() {
            x[p] = -r.get(i, f).clone();
        }
        vectors.push(primitive_integer(&x));
    }
    SubspaceBasis {
        ambient_dim: n,
        vectors,
    }
}

/// Exact solution of `Ax = b`, or `None` when `b` is outside the column span.
pub fn solve_exact(
    a: &RationalMatrix,
    b: &[Rational],
) -> Result<Option<Vec<Rational>>, LinalgError> {
    if b.len() != a.rows() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.rows(),
            found: b.len(),
        });
    }
    let n = a.cols();
    let mut aug = RationalMatrix::zeros(a.rows(), n + 1);
    for (i, bi) in b.iter().enumerate() {
        for j in 0..n {
            aug.set(i, j, a.get(i, j).clone());
        }
        aug.set(i, n, bi.clone());
    }
    let (r, pivots) = aug.rref();
    if pivots.last() == Some(&n) {
        return Ok(None);
    }
    let mut x = vec![Rational::zero(); n];
    for (i, &p) in pivots.iter().enumerate() {
        x[p] = r.get(i, n).clone();
    }
    Ok(Some(x))
}

/// A strictly positive vector of `span(B)`, if one exists.
///
/// Solves `max t` subject to `m = Bᵀx`, `m_j ≥ t`, `Σ m_j = 1`.
pub fn positive_vector_in_span(b: &SubspaceBasis) -> Option<Vec<Rational>> {
    if b.is_empty() {
        return None;
    }
    let k = b.dim();
    let n = b.ambient_dim;
    let basis: Vec<Vec<Rational>> = b.vectors.iter().map(|v| to_rational(v)).collect();
    // Variables: x+ (k), x- (k), t+, t-, s (n).
    let nv = 2 * k + 2 + n;
    let one = Rational::one();
    let mut a = Vec::with_capacity(n + 1);
    for j in 0..n {
        let mut row = vec![Rational::zero(); nv];
        for l in 0..k {
            row[l] = basis[l][j].clone();
            row[k + l] = -basis[l][j].clone();
        }
        row[2 * k] = -one.clone();
        row[2 * k + 1] = one.clone();
        row[2 * k + 2 + j] = -one.clone();
        a.push(row);
    }
    let mut total = vec![Rational::zero(); nv];
    for l in 0..k {
        let s: Rational = basis[l].iter().sum();
        total[l] = s.clone();
        total[k + l] = -s;
    }
    a.push(total);
    let mut rhs = vec![Rational::zero(); n];
    rhs.push(one.clone());
    let mut c = vec![Rational::zero(); nv];
    c[2 * k] = one.clone();
    c[2 * k + 1] = -one;
    match maximize(&c, &a, &rhs) {
        LpOutcome::Optimal { x, value } if value.is_positive() => {
            let coeffs: Vec<Rational> = (0..k).map(|l| &x[l] - &x[k + l]).collect();
            Some(combine(&basis, &coeffs, n))
        }
        _ => None,
    }
}

/// A nonnegative vector of `span(B)` whose coordinate `j` equals one, if any.
pub fn nonnegative_vector_with(b: &SubspaceBasis, j: usize) -> Option<Vec<Rational>> {
    if b.is_empty() {
        return None;
    }
    let k = b.dim();
    let n = b.ambient_dim;
    let basis: Vec<Vec<Rational>> = b.vectors.iter().map(|v| to_rational(v)).collect();
    // Variables: x+ (k), x- (k), s (n) with m_i - s_i = 0.
    let nv = 2 * k + n;
    let mut a = Vec::with_capacity(n + 1);
    for i in 0..n {
        let mut row = vec![Rational::zero(); nv];
        for l in 0..k {
            row[l] = basis[l][i].clone();
            row[k + l] = -basis[l][i].clone();
        }
        row[2 * k + i] = -Rational::one();
        a.push(row);
    }
    let mut fix = vec![Rational::zero(); nv];
    for l in 0..k {
        fix[l] = basis[l][j].clone();
        fix[k + l] = -basis[l][j].clone();
    }
    a.push(fix);
    let mut rhs = vec![Rational::zero(); n];
    rhs.push(Rational::one());
    match maximize(&vec![Rational::zero(); nv], &a, &rhs) {
        LpOutcome::Optimal { x, .. } => {
            let coeffs: Vec<Rational> = (0..k).map(|l| &x[l] - &x[k + l]).collect();
            Some(combine(&basis, &coeffs, n))
        }
        _ => None,
    }
}

fn combine(basis: &[Vec<Rational>], coeffs: &[Rational], n: usize) -> Vec<Rational> {
    let mut m = vec![Rational::zero(); n];
    for (v, c) in basis.iter().zip(coeffs) {
        for (mi, vi) in m.iter_mut().zip(v) {
            *mi += c * vi;
        }
    }
    m
}

/// Whether two bases span the same subspace, decided by ranks.
pub fn subspace_equal(b1: &SubspaceBasis, b2: &SubspaceBasis) -> Result<bool, LinalgError> {
    if b1.ambient_dim != b2.ambient_dim {
        return Err(LinalgError::DimensionMismatch {
            expected: b1.ambient_dim,
            found: b2.ambient_dim,
        });
    }
    let r1 = b1.as_row_matrix().rank();
    let r2 = b2.as_row_matrix().rank();
    if r1 != r2 {
        return Ok(false);
    }
    let joint = b1.as_row_matrix().vstack(&b2.as_row_matrix())?;
    Ok(joint.rank() == r1)
}

/// Whether the integer vector `v` is an integer combination of the columns of `a`.
pub fn lattice_member(a: &RationalMatrix, v: &[BigInt]) -> Result<bool, LinalgError> {
    if v.len() != a.rows() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.rows(),
            found: v.len(),
        });
    }
    let gens: Vec<Vec<BigInt>> = (0..a.cols())
        .map(|j| {
            a.column(j)
                .into_iter()
                .map(|q| {
                    assert!(q.is_integer(), "lattice generators must be integral");
                    q.to_integer()
                })
                .collect()
        })
        .collect();
    Ok(in_lattice(&gens, v))
}
