//! Mass-action trajectories, free energy, dissipation and external fluxes.

mod analysis;
pub mod rk45;

use std::collections::BTreeMap;
use std::io::Write;

use thiserror::Error;

use crate::kinetics::{
    energy_vector, gauge_fix_from, min_norm_lstsq, to_dmatrix, KineticSystem, KineticsError,
};
use crate::ratlin::{bigint_to_f64, nullspace, RationalMatrix};
use crate::reduction::{FrozenConcentrations, ReductionError};

pub use analysis::{
    energy_decomposition, reduced_flux_equivalence, DecompositionSample, EquivalenceReport,
};
use rk45::{StepFailure, StepStats, Tolerances};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid simulation setting: {0}")]
    InvalidConfig(String),
    #[error("initial concentration of species {index} is {value}; must be nonnegative")]
    NegativeInitial { index: usize, value: f64 },
    #[error("expected {expected} values, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("step size underflow at t = {t}")]
    StiffFailure { t: f64, partial: Box<Trajectory> },
    #[error("step limit reached at t = {t}")]
    TooManySteps { t: f64, partial: Box<Trajectory> },
    #[error("hypothesis not met: {0}")]
    Hypothesis(String),
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub t_end: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Steady state once `‖ṅ‖∞ ≤ steady_tol·(1 + ‖n‖∞)`.
    pub steady_tol: f64,
    /// Spacing of recorded samples.
    pub record_every: f64,
    pub max_steps: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            t_end: 10.0,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: f64::INFINITY,
            steady_tol: 1e-9,
            record_every: 0.1,
            max_steps: 1_000_000,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let positive = [
            ("t_end", self.t_end),
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("steady_tol", self.steady_tol),
            ("record_every", self.record_every),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || v.is_nan() || (name != "max_step" && !v.is_finite()) {
                return Err(DynamicsError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.max_steps == 0 {
            return Err(DynamicsError::InvalidConfig(
                "max_steps must be positive".into(),
            ));
        }
        Ok(())
    }

    fn output_times(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 1.0;
        while k * self.record_every < self.t_end * (1.0 - 1e-12) {
            out.push(k * self.record_every);
            k += 1.0;
        }
        out.push(self.t_end);
        out
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    StiffFailure,
    StepLimit,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub species: Vec<String>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Energy used for `F` and for `J^ext`.
    pub energy: Vec<f64>,
    /// Whether `energy` matches the frozen concentrations exactly.
    pub on_equilibrium_gauge: bool,
    pub free_energy: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub frozen: Vec<usize>,
    /// `J^E` per sample, one entry per frozen species.
    pub external_flux: Vec<Vec<f64>>,
    pub cumulative_flux: Vec<Vec<f64>>,
    /// Largest `|mᵀn(t) − mᵀn₀ − mᵀJ̄(t)|` over the conservation basis.
    pub conservation_residuals: Vec<f64>,
    pub steady_state_time: Option<f64>,
    pub status: RunStatus,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Concentrations `e^{−E}` for the recorded energy.
    pub fn equilibrium(&self) -> Vec<f64> {
        self.energy.iter().map(|e| (-e).exp()).collect()
    }

    pub fn max_conservation_residual(&self) -> f64 {
        self.conservation_residuals
            .iter()
            .fold(0.0, |a, &b| a.max(b))
    }

    /// Writes `t,n_<name>...,F,D[,JE_<name>,cumJE_<name>...]`.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend(self.species.iter().map(|s| format!("n_{s}")));
        header.push("F".into());
        header.push("D".into());
        for &u in &self.frozen {
            header.push(format!("JE_{}", self.species[u]));
            header.push(format!("cumJE_{}", self.species[u]));
        }
        out.write_record(&header)?;
        for i in 0..self.times.len() {
            let mut row = vec![self.times[i]];
            row.extend(&self.states[i]);
            row.push(self.free_energy[i]);
            row.push(self.dissipation[i]);
            for j in 0..self.frozen.len() {
                row.push(self.external_flux[i][j]);
                row.push(self.cumulative_flux[i][j]);
            }
            out.write_record(row.iter().map(|v| format_float(*v)))?;
        }
        out.flush()?;
        Ok(())
    }
}

fn format_float(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:e}")
    }
}

/// `F(n) = Σ n_j (ln(n_j e^{E_j}) − 1)` with `0·ln 0 = 0`.
pub fn free_energy(e: &[f64], n: &[f64]) -> f64 {
    n.iter()
        .zip(e)
        .map(|(&x, &ej)| {
            if x > 0.0 {
                x * (x.ln() + ej - 1.0)
            } else {
                0.0
            }
        })
        .sum()
}

/// `Σ_{R∈ℛ_s} (J_R − J_{−R}) ln(J_R / J_{−R})`, which equals `−dF/dt` for a
/// detailed balanced closed system. A pair with exactly one vanishing flux
/// contributes `+∞`.
pub fn dissipation(sys: &KineticSystem, n: &[f64]) -> f64 {
    let reactions = sys.network().reactions();
    let k = sys.rates();
    let mut total = 0.0;
    for &(f, r) in sys.pairs() {
        let fwd = k.get(f) * crate::kinetics::reactant_monomial(reactions[f].coeffs(), n);
        let bwd = r.map_or(0.0, |r| {
            k.get(r) * crate::kinetics::reactant_monomial(reactions[r].coeffs(), n)
        });
        if fwd == bwd {
            continue;
        }
        if fwd == 0.0 || bwd == 0.0 {
            return f64::INFINITY;
        }
        total += (fwd - bwd) * (fwd.ln() - bwd.ln());
    }
    total
}

/// `dF/dt = Σ ṅ_j ln(n_j e^{E_j})` along the closed flow.
pub fn free_energy_rate(sys: &KineticSystem, e: &[f64], n: &[f64]) -> f64 {
    let mut rhs = vec![0.0; n.len()];
    sys.rhs_into(n, &mut rhs);
    rhs.iter()
        .zip(n)
        .zip(e)
        .map(|((&d, &x), &ej)| {
            if d == 0.0 {
                0.0
            } else if x > 0.0 {
                d * (x.ln() + ej)
            } else {
                f64::NEG_INFINITY * d.signum()
            }
        })
        .sum()
}

/// Energy of a detailed balanced system with `E_U = −ln n_U` where possible,
/// gauge-fixed along the remaining laws to the totals of `n0`. Returns the
/// energy and whether the frozen values were matched.
pub fn frozen_gauge_energy(
    sys: &KineticSystem,
    frozen: &FrozenConcentrations,
    n0: &[f64],
) -> Result<(Vec<f64>, bool), DynamicsError> {
    let es = energy_vector(sys)?;
    let u = frozen.species();
    let g = &es.gauge_basis.vectors;
    let mut e = es.particular.clone();

    let mut on_gauge = true;
    if !u.is_empty() {
        let rows: Vec<Vec<f64>> = u
            .iter()
            .map(|&s| g.iter().map(|m| bigint_to_f64(&m[s])).collect())
            .collect();
        let rhs: Vec<f64> = u
            .iter()
            .map(|&s| -frozen.get(s).expect("listed species").ln() - e[s])
            .collect();
        let a = to_dmatrix(&rows, u.len(), g.len());
        let mu = min_norm_lstsq(&a, &rhs);
        for (m, mj) in g.iter().zip(&mu) {
            for (ei, mi) in e.iter_mut().zip(m) {
                *ei += mj * bigint_to_f64(mi);
            }
        }
        on_gauge = u.iter().all(|&s| {
            let target = -frozen.get(s).expect("listed species").ln();
            (e[s] - target).abs() <= 1e-9 * (1.0 + target.abs())
        });
    }

    // Laws that vanish on U stay conserved; fix their totals to those of n0.
    let restricted = RationalMatrix::from_bigint_rows(
        g.len(),
        &u.iter()
            .map(|&s| g.iter().map(|m| m[s].clone()).collect())
            .collect::<Vec<_>>(),
    );
    let combos = nullspace(&restricted);
    let targets: Vec<(Vec<f64>, f64)> = combos
        .vectors
        .iter()
        .map(|a| {
            let m: Vec<f64> = (0..e.len())
                .map(|i| {
                    a.iter()
                        .zip(g)
                        .map(|(aj, mj)| bigint_to_f64(aj) * bigint_to_f64(&mj[i]))
                        .sum()
                })
                .collect();
            let t = m.iter().zip(n0).map(|(a, b)| a * b).sum();
            (m, t)
        })
        .collect();
    let attainable = targets
        .iter()
        .all(|(m, t)| t.is_finite() && !(*t <= 0.0 && m.iter().all(|&x| x >= 0.0)));
    if attainable {
        if let Ok(fixed) = gauge_fix_from(&e, &targets) {
            e = fixed;
        }
    }
    Ok((e, on_gauge))
}

/// Closed mass-action trajectory from `n0`.
pub fn integrate(
    sys: &KineticSystem,
    n0: &[f64],
    cfg: &SimulationConfig,
) -> Result<Trajectory, DynamicsError> {
    let none = FrozenConcentrations::new(BTreeMap::new())?;
    integrate_with_fluxes(sys, &none, n0, cfg)
}

/// Trajectory with the frozen species held at their values by external
/// fluxes. `n0_v` lists the initial values of the other species in order.
pub fn integrate_with_fluxes(
    sys: &KineticSystem,
    frozen: &FrozenConcentrations,
    n0_v: &[f64],
    cfg: &SimulationConfig,
) -> Result<Trajectory, DynamicsError> {
    cfg.validate()?;
    if !sys.is_bidirectional() {
        return Err(KineticsError::OneDirectional.into());
    }
    let n_species = sys.num_species();
    let u = frozen.species();
    if let Some(&s) = u.iter().find(|&&s| s >= n_species) {
        return Err(DynamicsError::DimensionMismatch {
            expected: n_species,
            found: s + 1,
        });
    }
    let kept: Vec<usize> = (0..n_species)
        .filter(|s| frozen.get(*s).is_none())
        .collect();
    if n0_v.len() != kept.len() {
        return Err(DynamicsError::DimensionMismatch {
            expected: kept.len(),
            found: n0_v.len(),
        });
    }
    let mut n0 = vec![0.0; n_species];
    for (&s, &v) in kept.iter().zip(n0_v) {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(DynamicsError::NegativeInitial { index: s, value: v });
        }
        n0[s] = v;
    }
    for &s in &u {
        n0[s] = frozen.get(s).expect("listed species");
    }

    let (energy, on_gauge) = frozen_gauge_energy(sys, frozen, &n0)?;
    let laws: Vec<Vec<f64>> = crate::network::structure(sys.network())
        .conservation_basis
        .vectors
        .iter()
        .map(|m| m.iter().map(bigint_to_f64).collect())
        .collect();

    let mut y0 = n0.clone();
    y0.extend(std::iter::repeat_n(0.0, u.len()));
    let mut scratch = vec![0.0; n_species];
    let rhs = |y: &[f64], dy: &mut [f64]| {
        sys.rhs_into(&y[..n_species], &mut scratch);
        dy[..n_species].copy_from_slice(&scratch);
        for (j, &s) in u.iter().enumerate() {
            dy[n_species + j] = -scratch[s];
            dy[s] = 0.0;
        }
    };

    let mut traj = Trajectory {
        species: sys.network().species().to_vec(),
        times: Vec::new(),
        states: Vec::new(),
        energy,
        on_equilibrium_gauge: on_gauge,
        free_energy: Vec::new(),
        dissipation: Vec::new(),
        frozen: u.clone(),
        external_flux: Vec::new(),
        cumulative_flux: Vec::new(),
        conservation_residuals: Vec::new(),
        steady_state_time: None,
        status: RunStatus::Completed,
        stats: StepStats::default(),
    };
    let mut closed_rhs = vec![0.0; n_species];
    let result = rk45::solve(
        rhs,
        &y0,
        n_species,
        &cfg.output_times(),
        cfg.tolerances(),
        |t, y| {
            let n = &y[..n_species];
            let cum = &y[n_species..];
            sys.rhs_into(n, &mut closed_rhs);
            let je: Vec<f64> = u.iter().map(|&s| -closed_rhs[s]).collect();
            let residual = laws
                .iter()
                .map(|m| {
                    let now: f64 = m.iter().zip(n).map(|(a, b)| a * b).sum();
                    let start: f64 = m.iter().zip(&n0).map(|(a, b)| a * b).sum();
                    let fed: f64 = u.iter().zip(cum).map(|(&s, c)| m[s] * c).sum();
                    (now - start - fed).abs()
                })
                .fold(0.0, f64::max);
            let scale = n.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
            let speed = (0..n_species)
                .filter(|s| frozen.get(*s).is_none())
                .map(|s| closed_rhs[s].abs())
                .fold(0.0, f64::max);
            if traj.steady_state_time.is_none() && speed <= cfg.steady_tol * (1.0 + scale) {
                traj.steady_state_time = Some(t);
            }
            traj.times.push(t);
            traj.states.push(n.to_vec());
            traj.free_energy.push(free_energy(&traj.energy, n));
            traj.dissipation.push(dissipation(sys, n));
            traj.external_flux.push(je);
            traj.cumulative_flux.push(cum.to_vec());
            traj.conservation_residuals.push(residual);
        },
    );
    match result {
        Ok(stats) => {
            traj.stats = stats;
            Ok(traj)
        }
        Err((StepFailure::Underflow { t }, stats)) => {
            traj.stats = stats;
            traj.status = RunStatus::StiffFailure;
            Err(DynamicsError::StiffFailure {
                t,
                partial: Box::new(traj),
            })
        }
        Err((StepFailure::TooManySteps { t }, stats)) => {
            traj.stats = stats;
            traj.status = RunStatus::StepLimit;
            Err(DynamicsError::TooManySteps {
                t,
                partial: Box::new(traj),
            })
        }
    }
}
