//! Mass-action kinetics, the circuit condition, and energy vectors.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::network::{accessible, ChemicalNetwork};
use crate::ratlin::{
    bigint_to_f64, nullspace, rational_to_f64, solve_exact, Rational, SubspaceBasis,
};

/// Default tolerance on log-scale circuit sums.
pub const DEFAULT_DB_TOL: f64 = 1e-9;

const NEWTON_MAX_ITER: usize = 200;
const NEWTON_RESTARTS: usize = 10;
const NEWTON_TOL: f64 = 1e-10;
const RESTART_SEED: u64 = 0x5eed_ca7a;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KineticsError {
    #[error("expected {expected} rates, got {found}")]
    WrongRateCount { expected: usize, found: usize },
    #[error("rate of reaction {index} must be positive and finite, got {value}")]
    NonPositiveRate { index: usize, value: f64 },
    #[error("concentration of species {index} must be nonnegative, got {value}")]
    NegativeConcentration { index: usize, value: f64 },
    #[error("vector has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("the network is not bidirectional")]
    OneDirectional,
    #[error("the system is not detailed balanced")]
    NotDetailedBalanced,
    #[error("composition is not accessible from 0")]
    NotAccessible,
    #[error("{0}")]
    Domain(String),
    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),
    #[error("no solution: {0}")]
    NoSolution(String),
}

/// Positive rate `K_R` for every reaction, aligned with the network's reactions.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFunction {
    rates: Vec<f64>,
}

impl RateFunction {
    pub fn new(rates: Vec<f64>) -> Result<Self, KineticsError> {
        for (index, &value) in rates.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(KineticsError::NonPositiveRate { index, value });
            }
        }
        Ok(Self { rates })
    }

    pub fn uniform(count: usize, value: f64) -> Self {
        Self::new(vec![value; count]).expect("uniform rate must be positive")
    }

    pub fn values(&self) -> &[f64] {
        &self.rates
    }

    pub fn get(&self, k: usize) -> f64 {
        self.rates[k]
    }

    /// `‖K‖ = max_R |K_R|`.
    pub fn norm(&self) -> f64 {
        self.rates.iter().fold(0.0, |a, &b| a.max(b.abs()))
    }

    /// `max_R |K_R − L_R|`.
    pub fn distance(&self, other: &Self) -> f64 {
        self.rates
            .iter()
            .zip(&other.rates)
            .fold(0.0, |a, (x, y)| a.max((x - y).abs()))
    }
}

/// A network with mass-action rates.
#[derive(Debug, Clone)]
pub struct KineticSystem {
    network: ChemicalNetwork,
    rates: RateFunction,
    pairs: Vec<(usize, Option<usize>)>,
}

impl KineticSystem {
    pub fn new(network: ChemicalNetwork, rates: RateFunction) -> Result<Self, KineticsError> {
        if rates.values().len() != network.num_reactions() {
            return Err(KineticsError::WrongRateCount {
                expected: network.num_reactions(),
                found: rates.values().len(),
            });
        }
        let pairs = network.pairs();
        Ok(Self {
            network,
            rates,
            pairs,
        })
    }

    pub fn network(&self) -> &ChemicalNetwork {
        &self.network
    }

    pub fn rates(&self) -> &RateFunction {
        &self.rates
    }

    pub fn num_species(&self) -> usize {
        self.network.num_species()
    }

    /// `(representative, reverse)` indices in `ℛ_s` order.
    pub fn pairs(&self) -> &[(usize, Option<usize>)] {
        &self.pairs
    }

    pub fn is_bidirectional(&self) -> bool {
        self.pairs.iter().all(|(_, r)| r.is_some())
    }

    fn require_bidirectional(&self) -> Result<(), KineticsError> {
        if self.is_bidirectional() {
            Ok(())
        } else {
            Err(KineticsError::OneDirectional)
        }
    }

    /// `ln K_R − ln K_{−R}` for each representative.
    pub fn log_rate_ratios(&self) -> Result<Vec<f64>, KineticsError> {
        self.require_bidirectional()?;
        Ok(self
            .pairs
            .iter()
            .map(|&(f, r)| self.rates.get(f).ln() - self.rates.get(r.unwrap()).ln())
            .collect())
    }

    fn check_state(&self, n: &[f64]) -> Result<(), KineticsError> {
        if n.len() != self.num_species() {
            return Err(KineticsError::DimensionMismatch {
                expected: self.num_species(),
                found: n.len(),
            });
        }
        for (index, &value) in n.iter().enumerate() {
            if !(value >= 0.0) {
                return Err(KineticsError::NegativeConcentration { index, value });
            }
        }
        Ok(())
    }

    /// Mass-action right-hand side without input validation.
    pub fn rhs_into(&self, n: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (r, &k) in self.network.reactions().iter().zip(self.rates.values()) {
            let rate = k * reactant_monomial(r.coeffs(), n);
            if rate == 0.0 {
                continue;
            }
            for (o, &c) in out.iter_mut().zip(r.coeffs()) {
                if c != 0 {
                    *o += rate * c as f64;
                }
            }
        }
    }

    /// Fluxes `J_R` over `ℛ_s` without input validation.
    pub fn fluxes_into(&self, n: &[f64], out: &mut [f64]) {
        let reactions = self.network.reactions();
        for (o, &(f, r)) in out.iter_mut().zip(&self.pairs) {
            let fwd = self.rates.get(f) * reactant_monomial(reactions[f].coeffs(), n);
            let bwd = r.map_or(0.0, |r| {
                self.rates.get(r) * reactant_monomial(reactions[r].coeffs(), n)
            });
            *o = fwd - bwd;
        }
    }
}

/// `Π_{i∈I(R)} n_i^{−R(i)}`, with `0⁰ = 1`.
pub fn reactant_monomial(coeffs: &[i64], n: &[f64]) -> f64 {
    coeffs
        .iter()
        .zip(n)
        .filter(|(&c, _)| c < 0)
        .fold(1.0, |acc, (&c, &x)| acc * x.powi((-c) as i32))
}

/// `dn/dt = Σ_R K_R R Π_{I(R)} n^{−R}`.
pub fn mass_action_rhs(sys: &KineticSystem, n: &[f64]) -> Result<Vec<f64>, KineticsError> {
    sys.check_state(n)?;
    let mut out = vec![0.0; n.len()];
    sys.rhs_into(n, &mut out);
    if sys.is_bidirectional() {
        let flux_form = flux_form_rhs(sys, n)?;
        // Both forms cancel near equilibrium; compare against the gross terms.
        let scale = sys
            .network()
            .reactions()
            .iter()
            .zip(sys.rates().values())
            .map(|(r, k)| {
                let c = r.coeffs();
                k * reactant_monomial(c, n) * c.iter().map(|x| x.abs()).max().unwrap_or(0) as f64
            })
            .fold(1e-300_f64, f64::max)
            * sys.network().num_reactions() as f64;
        let gap = out
            .iter()
            .zip(&flux_form)
            .fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
        if gap > 1e-12 * scale {
            return Err(KineticsError::Inconsistent(format!(
                "direct and flux forms of the right-hand side differ by {gap}"
            )));
        }
    }
    Ok(out)
}

/// `dn/dt = Σ_{R∈ℛ_s} R J_R(n)`.
pub fn flux_form_rhs(sys: &KineticSystem, n: &[f64]) -> Result<Vec<f64>, KineticsError> {
    let j = reaction_fluxes(sys, n)?;
    let mut out = vec![0.0; n.len()];
    for (&(f, _), jr) in sys.pairs().iter().zip(&j) {
        for (o, &c) in out.iter_mut().zip(sys.network().reactions()[f].coeffs()) {
            *o += c as f64 * jr;
        }
    }
    Ok(out)
}

/// `J_R = K_R Π_{I(R)} n^{−R} − K_{−R} Π_{F(R)} n^{R}` over `ℛ_s`.
pub fn reaction_fluxes(sys: &KineticSystem, n: &[f64]) -> Result<Vec<f64>, KineticsError> {
    sys.require_bidirectional()?;
    sys.check_state(n)?;
    let mut out = vec![0.0; sys.pairs().len()];
    sys.fluxes_into(n, &mut out);
    Ok(out)
}

/// Fluxes written through an energy `E` of a detailed-balanced system:
/// `J_R = K_R Π_{I(R)} n^{−R} (1 − Π_j (n_j e^{E_j})^{R(j)})`.
pub fn fluxes_factored(
    sys: &KineticSystem,
    e: &[f64],
    n: &[f64],
) -> Result<Vec<f64>, KineticsError> {
    sys.require_bidirectional()?;
    sys.check_state(n)?;
    let reactions = sys.network().reactions();
    Ok(sys
        .pairs()
        .iter()
        .map(|&(f, _)| {
            let c = reactions[f].coeffs();
            let lead = sys.rates().get(f) * reactant_monomial(c, n);
            // Π_j (n_j e^{E_j})^{R(j)} split so boundary states stay finite.
            let energy_shift: f64 = c.iter().zip(e).map(|(&ci, ei)| ci as f64 * ei).sum();
            let product_side = c
                .iter()
                .zip(n)
                .filter(|(&ci, _)| ci > 0)
                .fold(1.0, |acc, (&ci, &x)| acc * x.powi(ci as i32));
            lead - sys.rates().get(f) * energy_shift.exp() * product_side
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolatedCycle {
    pub cycle: Vec<BigInt>,
    /// `Σ_j c(j) (ln K_{R_j} − ln K_{−R_j})`.
    pub log_sum: f64,
    /// `Π_j (K_{R_j}/K_{−R_j})^{c(j)}`.
    pub circuit_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DbVerdict {
    pub balanced: bool,
    pub violated_cycles: Vec<ViolatedCycle>,
    /// One log-scale circuit sum per basis cycle.
    pub log_sums: Vec<f64>,
    pub db_tol: f64,
}

impl DbVerdict {
    pub fn max_deviation(&self) -> f64 {
        self.log_sums.iter().fold(0.0, |a, b| a.max(b.abs()))
    }
}

/// Evaluates the circuit condition on each basis cycle, given
/// `ln K_R − ln K_{−R}` per column.
pub fn circuit_condition(cycles: &SubspaceBasis, log_ratios: &[f64], db_tol: f64) -> DbVerdict {
    let mut violated_cycles = Vec::new();
    let mut log_sums = Vec::with_capacity(cycles.dim());
    for c in &cycles.vectors {
        let s: f64 = c
            .iter()
            .zip(log_ratios)
            .map(|(cj, lr)| bigint_to_f64(cj) * lr)
            .sum();
        log_sums.push(s);
        if !(s.abs() <= db_tol) {
            violated_cycles.push(ViolatedCycle {
                cycle: c.clone(),
                log_sum: s,
                circuit_value: s.exp(),
            });
        }
    }
    DbVerdict {
        balanced: violated_cycles.is_empty(),
        violated_cycles,
        log_sums,
        db_tol,
    }
}

pub fn detailed_balance(sys: &KineticSystem, db_tol: f64) -> Result<DbVerdict, KineticsError> {
    let ratios = sys.log_rate_ratios()?;
    let cycles = nullspace(&sys.network().reaction_matrix());
    Ok(circuit_condition(&cycles, &ratios, db_tol))
}

#[derive(Debug, Clone)]
pub struct EnergySolution {
    pub particular: Vec<f64>,
    pub gauge_basis: SubspaceBasis,
    pub residual: f64,
}

/// Minimum-norm least-squares solution of `𝐑ᵀE = w`, `w_i = ln(K_{−R_i}/K_{R_i})`.
pub fn energy_vector(sys: &KineticSystem) -> Result<EnergySolution, KineticsError> {
    let w: Vec<f64> = sys.log_rate_ratios()?.into_iter().map(|x| -x).collect();
    let r = sys.network().reaction_matrix();
    let rt = r.transpose();
    let a = to_dmatrix(&rt.to_f64_rows(), rt.rows(), rt.cols());
    let particular = min_norm_lstsq(&a, &w);
    let fitted = &a * DVector::from_column_slice(&particular);
    let residual = fitted
        .iter()
        .zip(&w)
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()));
    Ok(EnergySolution {
        particular,
        gauge_basis: nullspace(&rt),
        residual,
    })
}

pub(crate) fn to_dmatrix(rows: &[Vec<f64>], nrows: usize, ncols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j])
}

/// Minimum-norm least-squares solution through the SVD pseudo-inverse.
pub(crate) fn min_norm_lstsq(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return vec![0.0; a.ncols()];
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0_f64, |m, &s| m.max(s));
    let eps = smax * 1e-12 * (a.nrows().max(a.ncols()) as f64);
    let x = svd
        .solve(&DVector::from_column_slice(b), eps)
        .expect("both singular vector sets were computed");
    x.iter().copied().collect()
}

/// `e^{−E}`, the steady state selected by an energy.
pub fn steady_state(e: &[f64]) -> Vec<f64> {
    e.iter().map(|x| (-x).exp()).collect()
}

/// Energy of an accessible composition, evaluated along a rational sequence
/// `x` with `𝐑x = ξ` and cross-checked against `Eᵀξ`.
pub fn composition_energy(
    sys: &KineticSystem,
    xi: &[i64],
    db_tol: f64,
) -> Result<f64, KineticsError> {
    if !detailed_balance(sys, db_tol)?.balanced {
        return Err(KineticsError::NotDetailedBalanced);
    }
    let inside = accessible(sys.network(), xi).map_err(|e| KineticsError::Domain(e.to_string()))?;
    if !inside {
        return Err(KineticsError::NotAccessible);
    }
    let r = sys.network().reaction_matrix();
    let b: Vec<Rational> = xi
        .iter()
        .map(|&v| Rational::from_integer(v.into()))
        .collect();
    let x = solve_exact(&r, &b)
        .map_err(|e| KineticsError::Domain(e.to_string()))?
        .ok_or_else(|| {
            KineticsError::Inconsistent("accessible composition has no sequence".into())
        })?;
    let ratios = sys.log_rate_ratios()?;
    // ℰ(R) = ln(K_{−R}/K_R) = −ratio.
    let value: f64 = x
        .iter()
        .zip(&ratios)
        .map(|(xk, lr)| -rational_to_f64(xk) * lr)
        .sum();
    let e = energy_vector(sys)?;
    let via_e: f64 = xi
        .iter()
        .zip(&e.particular)
        .map(|(&v, ej)| v as f64 * ej)
        .sum();
    let scale = 1.0 + value.abs().max(via_e.abs());
    if (value - via_e).abs() > 1e-10 * scale {
        return Err(KineticsError::Inconsistent(format!(
            "sequence energy {value} differs from Eᵀξ = {via_e}"
        )));
    }
    Ok(value)
}

/// Energy `E = E₀ + Σ μ_j m_j` with `m_jᵀ e^{−E} = T_j` for every target,
/// found by damped Newton on the convex potential in `μ`.
pub fn gauge_fix_energy(
    sys: &KineticSystem,
    targets: &[(Vec<f64>, f64)],
    db_tol: f64,
) -> Result<Vec<f64>, KineticsError> {
    let es = energy_vector(sys)?;
    if es.residual > db_tol {
        return Err(KineticsError::NotDetailedBalanced);
    }
    let n = sys.num_species();
    let rt = sys.network().reaction_matrix().transpose().to_f64_rows();
    for (m, t) in targets {
        if m.len() != n {
            return Err(KineticsError::DimensionMismatch {
                expected: n,
                found: m.len(),
            });
        }
        let leak = rt
            .iter()
            .map(|row| row.iter().zip(m).map(|(a, b)| a * b).sum::<f64>().abs())
            .fold(0.0, f64::max);
        if leak > 1e-9 * (1.0 + m.iter().fold(0.0_f64, |a, b| a.max(b.abs()))) {
            return Err(KineticsError::Domain(
                "target vector is not a conservation law".into(),
            ));
        }
        if !(t.is_finite()) || (*t <= 0.0 && m.iter().all(|&x| x >= 0.0)) {
            return Err(KineticsError::NoSolution(format!(
                "total {t} is not attainable by a positive state"
            )));
        }
    }
    gauge_fix_from(&es.particular, targets)
}

/// Newton with seeded restarts from `e0` along the target laws, without
/// validating the targets.
pub(crate) fn gauge_fix_from(
    e0: &[f64],
    targets: &[(Vec<f64>, f64)],
) -> Result<Vec<f64>, KineticsError> {
    if targets.is_empty() {
        return Ok(e0.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);
    let mut start = vec![0.0; targets.len()];
    for attempt in 0..=NEWTON_RESTARTS {
        if attempt > 0 {
            start = (0..targets.len())
                .map(|_| rng.gen_range(-3.0..3.0))
                .collect();
        }
        if let Some(mu) = newton_gauge(e0, targets, start.clone()) {
            return Ok(shift_energy(e0, targets, &mu));
        }
    }
    Err(KineticsError::NoSolution(
        "Newton iteration did not converge".into(),
    ))
}

fn shift_energy(e0: &[f64], targets: &[(Vec<f64>, f64)], mu: &[f64]) -> Vec<f64> {
    let mut e = e0.to_vec();
    for ((m, _), mj) in targets.iter().zip(mu) {
        for (ei, mi) in e.iter_mut().zip(m) {
            *ei += mj * mi;
        }
    }
    e
}

fn newton_gauge(e0: &[f64], targets: &[(Vec<f64>, f64)], mut mu: Vec<f64>) -> Option<Vec<f64>> {
    let l = targets.len();
    // Φ(μ) = Σ_i e^{−E_i(μ)} + Σ_j μ_j T_j; ∇Φ_j = T_j − m_jᵀe^{−E}.
    let potential = |mu: &[f64]| -> f64 {
        let e = shift_energy(e0, targets, mu);
        let s: f64 = e.iter().map(|x| (-x).exp()).sum();
        s + targets.iter().zip(mu).map(|((_, t), m)| t * m).sum::<f64>()
    };
    for _ in 0..NEWTON_MAX_ITER {
        let e = shift_energy(e0, targets, &mu);
        let x: Vec<f64> = e.iter().map(|v| (-v).exp()).collect();
        let residual: Vec<f64> = targets
            .iter()
            .map(|(m, t)| m.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() - t)
            .collect();
        let converged = residual
            .iter()
            .zip(targets)
            .all(|(r, (_, t))| r.abs() <= NEWTON_TOL * t.abs().max(1.0));
        if converged {
            return Some(mu);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let hess = DMatrix::from_fn(l, l, |j, k| {
            targets[j]
                .0
                .iter()
                .zip(&targets[k].0)
                .zip(&x)
                .map(|((a, b), xi)| a * b * xi)
                .sum()
        });
        // Newton step for minimizing Φ: H d = −∇Φ = residual.
        let rhs = DVector::from_column_slice(&residual);
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => DVector::from_column_slice(&min_norm_lstsq(&hess, &residual)),
        };
        let phi0 = potential(&mu);
        let slope: f64 = -step.iter().zip(&residual).map(|(d, r)| d * r).sum::<f64>();
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-12 {
            let trial: Vec<f64> = mu
                .iter()
                .zip(step.iter())
                .map(|(m, d)| m + alpha * d)
                .collect();
            let phi = potential(&trial);
            if phi.is_finite() && phi <= phi0 + 1e-4 * alpha * slope {
                mu = trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // Flat potential at machine precision: accept the full step if it
            // does not blow up, otherwise give up on this start.
            let trial: Vec<f64> = mu.iter().zip(step.iter()).map(|(m, d)| m + d).collect();
            if !potential(&trial).is_finite() {
                return None;
            }
            mu = trial;
        }
    }
    None
}

/// Energy with `E(s) = −ln n_s`, shifted along a conservation law that is
/// nonzero at `s`; `None` when no such law exists and the particular
/// energy does not already match.
pub fn single_species_gauge(
    sys: &KineticSystem,
    s: usize,
    n_s: f64,
    db_tol: f64,
) -> Result<Option<Vec<f64>>, KineticsError> {
    if !(n_s > 0.0 && n_s.is_finite()) {
        return Err(KineticsError::Domain(format!(
            "frozen concentration must be positive, got {n_s}"
        )));
    }
    if s >= sys.num_species() {
        return Err(KineticsError::DimensionMismatch {
            expected: sys.num_species(),
            found: s + 1,
        });
    }
    let es = energy_vector(sys)?;
    if es.residual > db_tol {
        return Err(KineticsError::NotDetailedBalanced);
    }
    let target = -n_s.ln();
    let e0 = es.particular;
    if let Some(m) = es.gauge_basis.vectors.iter().find(|m| !m[s].is_zero()) {
        let ms = m[s].to_f64().unwrap_or_else(|| bigint_to_f64(&m[s]));
        let mu = (target - e0[s]) / ms;
        let e = e0
            .iter()
            .zip(m)
            .map(|(ei, mi)| ei + mu * bigint_to_f64(mi))
            .collect();
        return Ok(Some(e));
    }
    if (e0[s] - target).abs() <= db_tol.max(1e-12 * (1.0 + target.abs())) {
        Ok(Some(e0))
    } else {
        Ok(None)
    }
}
