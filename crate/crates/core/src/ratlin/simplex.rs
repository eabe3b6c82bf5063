//! Dense two-phase simplex over the rationals with Bland's anti-cycling rule.

use num_traits::{Signed, Zero};

use super::Rational;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<Rational>, value: Rational },
    Infeasible,
    Unbounded,
}

/// Maximizes `c·x` subject to `a·x = b`, `x ≥ 0`.
pub fn maximize(c: &[Rational], a: &[Vec<Rational>], b: &[Rational]) -> LpOutcome {
    let n = c.len();
    let m = a.len();
    assert_eq!(b.len(), m, "rhs length mismatch");

    // Columns: n structural, then m artificials, then the rhs.
    let width = n + m + 1;
    let mut rows: Vec<Vec<Rational>> = Vec::with_capacity(m);
    for (i, (row, bi)) in a.iter().zip(b).enumerate() {
        assert_eq!(row.len(), n, "constraint row length mismatch");
        let flip = bi.is_negative();
        let mut r = vec![Rational::zero(); width];
        for (j, v) in row.iter().enumerate() {
            r[j] = if flip { -v } else { v.clone() };
        }
        r[n + i] = Rational::from_integer(1.into());
        r[width - 1] = if flip { -bi } else { bi.clone() };
        rows.push(r);
    }
    let mut t = Tableau {
        rows,
        basis: (n..n + m).collect(),
        width,
    };

    // Phase 1: maximize -sum(artificials).
    let mut phase1 = vec![Rational::zero(); n + m];
    for v in &mut phase1[n..] {
        *v = Rational::from_integer((-1).into());
    }
    let all: Vec<bool> = vec![true; n + m];
    if t.run(&phase1, &all).is_none() {
        unreachable!("phase one objective is bounded by zero");
    }
    if t.objective_value(&phase1).is_negative() {
        return LpOutcome::Infeasible;
    }
    t.drive_out_artificials(n);

    // Phase 2 on the structural columns only.
    let mut cost = vec![Rational::zero(); n + m];
    cost[..n].clone_from_slice(c);
    let mut allowed = vec![true; n + m];
    for v in &mut allowed[n..] {
        *v = false;
    }
    if t.run(&cost, &allowed).is_none() {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![Rational::zero(); n];
    for (i, &bv) in t.basis.iter().enumerate() {
        if bv < n {
            x[bv] = t.rows[i][width - 1].clone();
        }
    }
    let value = t.objective_value(&cost);
    LpOutcome::Optimal { x, value }
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> &Rational {
        &self.rows[i][self.width - 1]
    }

    fn objective_value(&self, cost: &[Rational]) -> Rational {
        self.basis
            .iter()
            .enumerate()
            .fold(Rational::zero(), |acc, (i, &bv)| {
                acc + &cost[bv] * self.rhs(i)
            })
    }

    /// `z_j − c_j` for every column.
    fn reduced_costs(&self, cost: &[Rational]) -> Vec<Rational> {
        (0..cost.len())
            .map(|j| {
                let zj = self
                    .basis
                    .iter()
                    .enumerate()
                    .fold(Rational::zero(), |acc, (i, &bv)| {
                        acc + &cost[bv] * &self.rows[i][j]
                    });
                zj - &cost[j]
            })
            .collect()
    }

    /// Runs primal simplex iterations; `None` signals unboundedness.
    fn run(&mut self, cost: &[Rational], allowed: &[bool]) -> Option<()> {
        let mut reduced = self.reduced_costs(cost);
        loop {
            let entering = (0..cost.len()).find(|&j| allowed[j] && reduced[j].is_negative());
            let Some(e) = entering else {
                return Some(());
            };
            let mut leave: Option<(usize, Rational)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][e];
                if !a.is_positive() {
                    continue;
                }
                let ratio = self.rhs(i) / a;
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => {
                        ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let (l, _) = leave?;
            self.pivot(l, e);
            let f = reduced[e].clone();
            for (v, p) in reduced.iter_mut().zip(&self.rows[l]) {
                if !p.is_zero() {
                    *v -= &f * p;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let inv = self.rows[r][c].recip();
        for v in &mut self.rows[r] {
            *v *= &inv;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *v -= &f * p;
                }
            }
        }
        self.basis[r] = c;
    }

    /// After phase one, replaces zero-level artificials in the basis by
    /// structural columns, dropping rows that turn out to be redundant.
    fn drive_out_artificials(&mut self, n: usize) {
        let mut i = 0;
        while i < self.rows.len() {
            if self.basis[i] >= n {
                if let Some(j) = (0..n).find(|&j| !self.rows[i][j].is_zero()) {
                    self.pivot(i, j);
                } else {
                    self.rows.remove(i);
                    self.basis.remove(i);
                    continue;
                }
            }
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Rational {
        Rational::from_integer(n.into())
    }

    #[test]
    fn small_maximization() {
        // max x + y s.t. x + 2y + s1 = 4, 3x + y + s2 = 6
        let c = vec![q(1), q(1), q(0), q(0)];
        let a = vec![vec![q(1), q(2), q(1), q(0)], vec![q(3), q(1), q(0), q(1)]];
        let b = vec![q(4), q(6)];
        match maximize(&c, &a, &b) {
            LpOutcome::Optimal { x, value } => {
                assert_eq!(value, Rational::new(14.into(), 5.into()));
                assert_eq!(x[0], Rational::new(8.into(), 5.into()));
                assert_eq!(x[1], Rational::new(6.into(), 5.into()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let a = vec![vec![q(1), q(1)]];
        assert_eq!(maximize(&[q(0), q(0)], &a, &[q(-1)]), LpOutcome::Infeasible);
        let a = vec![vec![q(1), q(-1)]];
        assert_eq!(maximize(&[q(1), q(0)], &a, &[q(1)]), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_rows_are_dropped() {
        let a = vec![vec![q(1), q(1)], vec![q(2), q(2)]];
        match maximize(&[q(1), q(0)], &a, &[q(1), q(2)]) {
            LpOutcome::Optimal { value, .. } => assert_eq!(value, q(1)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
