use crate::kinetics::{detailed_balance, KineticSystem};
use crate::reduction::{reduce_network, reduced_system, FrozenConcentrations, ReductionMap};

use super::{
    dissipation, integrate, integrate_with_fluxes, DynamicsError, SimulationConfig, Trajectory,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionSample {
    pub index: usize,
    pub t: f64,
    /// Centered finite difference of `F` on the sample grid.
    pub dfdt: f64,
    /// Dissipation of the reduced system.
    pub reduced_dissipation: f64,
    /// `Σ_{j∈U} J^E_j ln(n_j e^{E_j})`.
    pub external_work: f64,
    pub residual: f64,
    pub tolerance: f64,
}

impl DecompositionSample {
    pub fn holds(&self) -> bool {
        self.residual <= self.tolerance
    }
}

fn checked_reduction(
    sys: &KineticSystem,
    frozen: &FrozenConcentrations,
) -> Result<ReductionMap, DynamicsError> {
    let u = frozen.species();
    if u.is_empty() {
        return Err(DynamicsError::Hypothesis("the frozen set is empty".into()));
    }
    let rmap = reduce_network(sys.network(), &u)?;
    if !rmap.zero_reduced.is_empty() {
        return Err(DynamicsError::Hypothesis(format!(
            "reactions {:?} reduce to zero",
            rmap.zero_reduced
        )));
    }
    if let Some(j) = rmap.columns.iter().position(|c| !c.is_one_to_one()) {
        return Err(DynamicsError::Hypothesis(format!(
            "reduced reaction {j} has more than one preimage"
        )));
    }
    Ok(rmap)
}

/// Checks `dF/dt = −𝒟_R + J^ext` on the interior samples of a fluxed run.
pub fn energy_decomposition(
    sys: &KineticSystem,
    frozen: &FrozenConcentrations,
    trajectory: &Trajectory,
    db_tol: f64,
) -> Result<Vec<DecompositionSample>, DynamicsError> {
    let rmap = checked_reduction(sys, frozen)?;
    if !detailed_balance(sys, db_tol)?.balanced {
        return Err(DynamicsError::Hypothesis(
            "the parent system is not detailed balanced".into(),
        ));
    }
    if trajectory.frozen != frozen.species() {
        return Err(DynamicsError::Hypothesis(
            "trajectory was run with a different frozen set".into(),
        ));
    }
    let reduced = reduced_system(sys, &rmap, frozen)?;
    let e = &trajectory.energy;
    let mut out = Vec::new();
    for i in 1..trajectory.len().saturating_sub(1) {
        let Some(dfdt) = centered_derivative(&trajectory.times, &trajectory.free_energy, i) else {
            continue;
        };
        let n = &trajectory.states[i];
        let n_v: Vec<f64> = rmap.kept.iter().map(|&s| n[s]).collect();
        let reduced_dissipation = dissipation(&reduced, &n_v);
        let external_work: f64 = trajectory
            .frozen
            .iter()
            .zip(&trajectory.external_flux[i])
            .map(|(&s, j)| j * (n[s].ln() + e[s]))
            .sum();
        let residual = (dfdt + reduced_dissipation - external_work).abs();
        out.push(DecompositionSample {
            index: i,
            t: trajectory.times[i],
            dfdt,
            reduced_dissipation,
            external_work,
            residual,
            tolerance: 1e-6_f64.max(1e-3 * dfdt.abs()),
        });
    }
    Ok(out)
}

/// Five-point centered difference on a uniform stretch of the grid. Next
/// to a non-uniform spacing, three points are used instead; the two samples
/// at each end of a uniform grid are skipped.
fn centered_derivative(t: &[f64], f: &[f64], i: usize) -> Option<f64> {
    let uniform = |a: usize, b: usize| {
        let h = t[a + 1] - t[a];
        (a..b).all(|k| ((t[k + 1] - t[k]) - h).abs() <= 1e-9 * h)
    };
    if i >= 2 && i + 2 < t.len() && uniform(i - 2, i + 2) {
        let h = t[i + 1] - t[i];
        return Some((f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h));
    }
    if uniform(i - 1, i + 1) && (i < 2 || i + 2 >= t.len()) {
        return None;
    }
    Some((f[i + 1] - f[i - 1]) / (t[i + 1] - t[i - 1]))
}

#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub max_deviation: f64,
    /// `10·(rel_tol·max‖n‖∞ + abs_tol)`.
    pub tolerance: f64,
    pub reduced: Trajectory,
    pub fluxed: Trajectory,
}

impl EquivalenceReport {
    pub fn holds(&self) -> bool {
        self.max_deviation <= self.tolerance
    }
}

/// Runs the reduced system and the fluxed parent from the same start and
/// compares the unfrozen coordinates sample by sample.
pub fn reduced_flux_equivalence(
    sys: &KineticSystem,
    frozen: &FrozenConcentrations,
    n0_v: &[f64],
    cfg: &SimulationConfig,
) -> Result<EquivalenceReport, DynamicsError> {
    let u = frozen.species();
    if u.is_empty() {
        return Err(DynamicsError::Hypothesis("the frozen set is empty".into()));
    }
    let rmap = reduce_network(sys.network(), &u)?;
    let reduced_sys = reduced_system(sys, &rmap, frozen)?;
    let reduced = integrate(&reduced_sys, n0_v, cfg)?;
    let fluxed = integrate_with_fluxes(sys, frozen, n0_v, cfg)?;
    let mut max_deviation: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (a, b) in reduced.states.iter().zip(&fluxed.states) {
        for (x, &s) in a.iter().zip(&rmap.kept) {
            max_deviation = max_deviation.max((x - b[s]).abs());
            scale = scale.max(x.abs());
        }
    }
    if reduced.times != fluxed.times {
        return Err(DynamicsError::Hypothesis("sample grids differ".into()));
    }
    Ok(EquivalenceReport {
        max_deviation,
        tolerance: 10.0 * (cfg.rel_tol * scale + cfg.abs_tol),
        reduced,
        fluxed,
    })
}
