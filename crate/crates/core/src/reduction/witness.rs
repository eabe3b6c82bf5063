//! Small rate perturbations that keep the parent detailed balanced while
//! breaking detailed balance of the reduced system.

use crate::kinetics::{energy_vector, KineticSystem, RateFunction};

use super::{
    db_stability_report, reduced_circuit_check, reduced_rates, DbStability, FrozenConcentrations,
    ReductionError, ReductionMap,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WitnessConstruction {
    /// Energy of frozen species `species` shifted by `shift`.
    EnergyBump { species: usize, shift: f64 },
    /// Rates of parent reaction `reaction` and its reverse increased in proportion.
    RateBump { reaction: usize, increment: f64 },
}

#[derive(Debug, Clone)]
pub struct Witness {
    pub rates: RateFunction,
    /// `‖𝒦 − 𝒦_δ‖`.
    pub distance: f64,
    /// Largest log-scale circuit sum of the perturbed reduced system.
    pub reduced_deviation: f64,
    pub construction: WitnessConstruction,
}

/// Searches for a rate function within `delta` of the current one that keeps
/// the parent balanced but unbalances the reduction. Only fine-tuned
/// verdicts admit a witness.
pub fn perturbation_witness(
    sys: &KineticSystem,
    rmap: &ReductionMap,
    n_u: &FrozenConcentrations,
    delta: f64,
    db_tol: f64,
) -> Result<Option<Witness>, ReductionError> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(ReductionError::NonPositiveDelta(delta));
    }
    let report = db_stability_report(sys, rmap, n_u, db_tol)?;
    if report.verdict != DbStability::DbFineTuned {
        return Ok(None);
    }
    let mut candidates = Vec::new();
    let rate_bumps = rate_bump_candidates(sys, rmap, delta);
    let energy_bumps = energy_bump_candidates(sys, rmap, delta)?;
    if report.conditions.all_cycle_reactions_one_to_one {
        candidates.extend(energy_bumps);
        candidates.extend(rate_bumps);
    } else {
        candidates.extend(rate_bumps);
        candidates.extend(energy_bumps);
    }
    for (rates, construction) in candidates {
        if let Some(w) = validate(sys, rmap, n_u, rates, construction, delta, db_tol)? {
            return Ok(Some(w));
        }
    }
    Ok(None)
}

fn validate(
    sys: &KineticSystem,
    rmap: &ReductionMap,
    n_u: &FrozenConcentrations,
    rates: RateFunction,
    construction: WitnessConstruction,
    delta: f64,
    db_tol: f64,
) -> Result<Option<Witness>, ReductionError> {
    let distance = sys.rates().distance(&rates);
    if !(distance < delta) {
        return Ok(None);
    }
    let perturbed = KineticSystem::new(sys.network().clone(), rates.clone())?;
    if energy_vector(&perturbed)?.residual > db_tol
        || !crate::kinetics::detailed_balance(&perturbed, db_tol)?.balanced
    {
        return Ok(None);
    }
    let reduced = reduced_rates(&perturbed, rmap, n_u)?;
    let verdict = reduced_circuit_check(rmap, &reduced, db_tol)?;
    let reduced_deviation = verdict.max_deviation();
    if reduced_deviation > 10.0 * db_tol {
        Ok(Some(Witness {
            rates,
            distance,
            reduced_deviation,
            construction,
        }))
    } else {
        Ok(None)
    }
}

/// Scale the rates of a non-one-to-one preimage and its reverse by the same
/// factor, which keeps their ratio and hence the parent energy.
fn rate_bump_candidates(
    sys: &KineticSystem,
    rmap: &ReductionMap,
    delta: f64,
) -> Vec<(RateFunction, WitnessConstruction)> {
    let support = rmap.reduced_cycles().support();
    let mut out = Vec::new();
    for &j in &support {
        let col = &rmap.columns[j];
        if col.is_one_to_one() {
            continue;
        }
        for &(pos, _) in &col.representatives {
            let f = rmap.parent_nonreverse[pos];
            let Some(r) = sys.network().reverse_of(f) else {
                continue;
            };
            let kf = sys.rates().get(f);
            let kr = sys.rates().get(r);
            let increment = 0.5 * delta * (kf / kr).min(1.0);
            let mut values = sys.rates().values().to_vec();
            values[f] = kf + increment;
            values[r] = kr * (1.0 + increment / kf);
            if let Ok(rates) = RateFunction::new(values) {
                out.push((
                    rates,
                    WitnessConstruction::RateBump {
                        reaction: f,
                        increment,
                    },
                ));
            }
        }
    }
    out
}

/// Shift the energy of one frozen species: `K_δ(−R) = K(−R) e^{R(ℓ) ε}`.
fn energy_bump_candidates(
    sys: &KineticSystem,
    rmap: &ReductionMap,
    delta: f64,
) -> Result<Vec<(RateFunction, WitnessConstruction)>, ReductionError> {
    let reactions = sys.network().reactions();
    let mut out = Vec::new();
    for &l in &rmap.frozen {
        let mut scale = 0.0_f64;
        for &(f, r) in sys.pairs() {
            if let Some(r) = r {
                scale = scale.max(reactions[f].coeffs()[l].abs() as f64 * sys.rates().get(r));
            }
        }
        if scale == 0.0 {
            continue;
        }
        for sign in [1.0, -1.0] {
            let mut eps = 0.5 * delta / scale;
            loop {
                let shift = sign * eps;
                let mut values = sys.rates().values().to_vec();
                for &(f, r) in sys.pairs() {
                    if let Some(r) = r {
                        let c = reactions[f].coeffs()[l] as f64;
                        values[r] = sys.rates().get(r) * (c * shift).exp();
                    }
                }
                let rates = RateFunction::new(values)?;
                if sys.rates().distance(&rates) < delta {
                    out.push((rates, WitnessConstruction::EnergyBump { species: l, shift }));
                    break;
                }
                eps *= 0.5;
            }
        }
    }
    Ok(out)
}
