//! Integer lattice membership through a row-style Hermite reduction.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

/// Echelon form of the integer lattice spanned by `generators`, computed
/// with unimodular row operations. Rows are returned with their pivot column.
pub fn hermite_rows(generators: &[Vec<BigInt>], dim: usize) -> Vec<(usize, Vec<BigInt>)> {
    let mut g: Vec<Vec<BigInt>> = generators.to_vec();
    let mut out = Vec::new();
    let mut top = 0;
    for col in 0..dim {
        loop {
            // Smallest nonzero magnitude in this column goes to the top.
            let best = (top..g.len())
                .filter(|&i| !g[i][col].is_zero())
                .min_by(|&a, &b| g[a][col].abs().cmp(&g[b][col].abs()));
            let Some(p) = best else { break };
            g.swap(top, p);
            let mut cleared = true;
            for i in top + 1..g.len() {
                if g[i][col].is_zero() {
                    continue;
                }
                let q = g[i][col].div_floor(&g[top][col]);
                let pivot = g[top].clone();
                for (v, pv) in g[i].iter_mut().zip(&pivot) {
                    *v -= &q * pv;
                }
                if !g[i][col].is_zero() {
                    cleared = false;
                }
            }
            if cleared {
                break;
            }
        }
        if top < g.len() && !g[top][col].is_zero() {
            if g[top][col].is_negative() {
                for v in &mut g[top] {
                    *v = -&*v;
                }
            }
            out.push((col, g[top].clone()));
            top += 1;
        }
    }
    out
}

/// True iff `v` is an integer combination of the generators.
pub fn in_lattice(generators: &[Vec<BigInt>], v: &[BigInt]) -> bool {
    let h = hermite_rows(generators, v.len());
    let mut rest = v.to_vec();
    for (col, row) in &h {
        if rest[*col].is_zero() {
            continue;
        }
        let (q, r) = rest[*col].div_rem(&row[*col]);
        if !r.is_zero() {
            return false;
        }
        for (x, y) in rest.iter_mut().zip(row) {
            *x -= &q * y;
        }
    }
    rest.iter().all(Zero::is_zero)
}
