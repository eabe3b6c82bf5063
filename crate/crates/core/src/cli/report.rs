//! JSON report documents. Exact values are strings (`"p/q"`), species and
//! reactions are referenced by name and 1-based index.

use num_bigint::BigInt;
use serde_json::{json, Map, Value};

use crate::completion::{AdmissibleOutcome, CompletionCertificate, CompletionResult};
use crate::dynamics::{DecompositionSample, Trajectory};
use crate::kinetics::{DbVerdict, EnergySolution, KineticSystem, RateFunction};
use crate::network::{ChemicalNetwork, StructureReport};
use crate::ratlin::{Rational, RationalMatrix, SubspaceBasis};
use crate::reduction::{DbStabilityReport, ReductionMap, Witness};

use super::crn::reaction_label;

pub const SCHEMA_VERSION: u32 = 1;

pub fn envelope(command: &str, result: Value) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "result": result,
    })
}

/// Finite floats as numbers, the rest as `"inf"`, `"-inf"` or `"nan"`.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

fn ints(v: &[BigInt]) -> Value {
    Value::Array(v.iter().map(|x| json!(x.to_string())).collect())
}

fn rationals(v: &[Rational]) -> Value {
    Value::Array(v.iter().map(|x| json!(x.to_string())).collect())
}

fn basis(b: &SubspaceBasis) -> Value {
    Value::Array(b.vectors.iter().map(|v| ints(v)).collect())
}

fn matrix(m: &RationalMatrix) -> Value {
    Value::Array((0..m.rows()).map(|i| rationals(m.row(i))).collect())
}

fn one_based(xs: &[usize]) -> Value {
    Value::Array(xs.iter().map(|&x| json!(x + 1)).collect())
}

fn species_map(net: &ChemicalNetwork, values: impl IntoIterator<Item = (usize, f64)>) -> Value {
    let mut m = Map::new();
    for (i, v) in values {
        m.insert(net.species()[i].clone(), num(v));
    }
    Value::Object(m)
}

pub fn network(net: &ChemicalNetwork, rates: &RateFunction) -> Value {
    let reactions: Vec<Value> = net
        .reactions()
        .iter()
        .enumerate()
        .map(|(k, r)| {
            json!({
                "index": k + 1,
                "equation": reaction_label(net.species(), r.coeffs()),
                "vector": r.coeffs(),
                "rate": num(rates.get(k)),
                "reverse": net.reverse_of(k).map(|r| r + 1),
            })
        })
        .collect();
    json!({
        "species": net.species(),
        "reactions": reactions,
        "bidirectional": net.is_bidirectional(),
    })
}

pub fn structure(net: &ChemicalNetwork, rates: &RateFunction, report: &StructureReport) -> Value {
    json!({
        "network": network(net, rates),
        "nonreverse_reactions": one_based(&report.nonreverse_indices),
        "reaction_matrix": matrix(&report.reaction_matrix),
        "stoichiometric_rank": report.stoichiometric_rank,
        "cycle_basis": basis(&report.cycle_basis),
        "conservation_basis": basis(&report.conservation_basis),
        "conservative": report.conservative,
        "positive_law": report.positive_law.as_deref().map(rationals),
        "cycle_support": one_based(
            &report.cycle_support.iter().map(|&p| report.nonreverse_indices[p]).collect::<Vec<_>>()
        ),
        "sources_sinks": one_based(&report.sources_sinks),
        "issues": report.issues,
    })
}

pub fn verdict(v: &DbVerdict) -> Value {
    let violated: Vec<Value> = v
        .violated_cycles
        .iter()
        .map(|c| {
            json!({
                "cycle": ints(&c.cycle),
                "log_sum": num(c.log_sum),
                "circuit_value": num(c.circuit_value),
            })
        })
        .collect();
    json!({
        "balanced": v.balanced,
        "db_tol": num(v.db_tol),
        "log_sums": nums(&v.log_sums),
        "max_deviation": num(v.max_deviation()),
        "violated_cycles": violated,
    })
}

pub fn check_db(sys: &KineticSystem, v: &DbVerdict, energy: &EnergySolution) -> Value {
    let net = sys.network();
    let steady: Vec<f64> = energy.particular.iter().map(|e| (-e).exp()).collect();
    json!({
        "nonreverse_reactions": one_based(&net.nonreverse_set()),
        "verdict": verdict(v),
        "energy": {
            "particular": species_map(net, energy.particular.iter().copied().enumerate()),
            "gauge_basis": basis(&energy.gauge_basis),
            "residual": num(energy.residual),
        },
        "steady_state": species_map(net, steady.into_iter().enumerate()),
    })
}

pub fn reduction(
    sys: &KineticSystem,
    rmap: &ReductionMap,
    frozen: &[(usize, f64)],
    reduced_rates: &RateFunction,
    reduced_verdict: &DbVerdict,
    stability: Option<&DbStabilityReport>,
    witness: Option<Option<&Witness>>,
) -> Value {
    let parent = sys.network();
    let columns: Vec<Value> = rmap
        .columns
        .iter()
        .map(|c| {
            json!({
                "vector": c.vector,
                "forward": one_based(&c.forward),
                "reverse": one_based(&c.reverse),
                "one_to_one": c.is_one_to_one(),
            })
        })
        .collect();
    let stability = stability.map(|r| {
        let eq = &r.equilibrium_check;
        json!({
            "verdict": r.verdict.label(),
            "conditions": {
                "all_cycle_reactions_one_to_one": r.conditions.all_cycle_reactions_one_to_one,
                "no_zero_reduction_in_cycles": r.conditions.no_zero_reduction_in_cycles,
                "projected_cycles_equal": r.conditions.projected_cycles_equal,
                "cycles_lift_one_to_one": r.conditions.cycles_lift_one_to_one,
            },
            "cycle_species": r.cycle_species.iter().map(|&s| parent.species()[s].clone()).collect::<Vec<_>>(),
            "equilibrium_check": {
                "holds": eq.holds,
                "checked_species": eq.checked_species.iter().map(|&s| parent.species()[s].clone()).collect::<Vec<_>>(),
                "witness": eq.witness.as_deref().map(nums),
                "residual": num(eq.residual),
            },
            "projection": {
                "images": r.projection.images.iter().map(|v| ints(v)).collect::<Vec<_>>(),
                "reduced_cycles": basis(&r.projection.reduced_cycles),
                "contained": r.projection.contained,
                "equal": r.projection.equal,
            },
        })
    });
    let witness = witness.map(|w| {
        w.map(|w| {
            json!({
                "rates": nums(w.rates.values()),
                "distance": num(w.distance),
                "reduced_deviation": num(w.reduced_deviation),
                "construction": format!("{:?}", w.construction),
            })
        })
    });
    let mut out = json!({
        "frozen": species_map(parent, frozen.iter().copied()),
        "kept": rmap.kept.iter().map(|&s| parent.species()[s].clone()).collect::<Vec<_>>(),
        "reduced_network": network(&rmap.reduced_network, reduced_rates),
        "reduced_matrix": matrix(&rmap.reduced_matrix()),
        "columns": columns,
        "zero_reduced": one_based(&rmap.zero_reduced),
        "reduced_detailed_balance": verdict(reduced_verdict),
        "stability": stability,
        "parent_detailed_balanced": stability.is_some(),
    });
    if let Some(w) = witness {
        out["witness"] = w.unwrap_or(Value::Null);
    }
    out
}

fn certificate(c: &CompletionCertificate) -> Value {
    json!({
        "all_green": c.all_green(),
        "reduction_matches": c.reduction_matches,
        "rates_round_trip": c.rates_round_trip,
        "detailed_balanced": c.detailed_balanced,
        "conservative": c.conservative,
        "no_sources_sinks": c.no_sources_sinks,
        "acyclic": c.acyclic,
        "admissible": c.admissible,
        "failures": c.failures,
    })
}

pub fn completion_result(r: &CompletionResult) -> Value {
    let net = r.completed.network();
    let provenance: Vec<Value> = r
        .provenance
        .iter()
        .map(|a| {
            let trigger = match &a.trigger {
                crate::completion::Trigger::Reaction(p) => {
                    json!({"reaction": net.nonreverse_set()[*p] + 1})
                }
                crate::completion::Trigger::Species(s) => json!({"species": net.species()[*s]}),
                crate::completion::Trigger::Cycle(c) => json!({"cycle": ints(c)}),
            };
            json!({"species": a.name, "step": a.step.label(), "trigger": trigger})
        })
        .collect();
    json!({
        "completed_network": network(net, r.completed.rates()),
        "reaction_matrix": matrix(&net.reaction_matrix()),
        "added_species": provenance,
        "frozen_defaults": species_map(net, r.frozen_defaults.iter().copied()),
        "certificate": certificate(&r.certificate),
    })
}

pub fn completion(outcome: &AdmissibleOutcome, original: &ChemicalNetwork) -> Value {
    match outcome {
        AdmissibleOutcome::Completed(r) => {
            let mut v = completion_result(r);
            v["outcome"] = json!("COMPLETED");
            v
        }
        AdmissibleOutcome::Impossible {
            cycle,
            circuit_value,
        } => {
            let reps = original.nonreverse_set();
            let reactions: Vec<Value> = cycle
                .iter()
                .enumerate()
                .filter(|(_, c)| !num_traits::Zero::is_zero(*c))
                .map(|(p, c)| {
                    json!({
                        "reaction": reps[p] + 1,
                        "equation": reaction_label(original.species(), original.reactions()[reps[p]].coeffs()),
                        "coefficient": c.to_string(),
                    })
                })
                .collect();
            json!({
                "outcome": "IMPOSSIBLE",
                "cycle": ints(cycle),
                "cycle_reactions": reactions,
                "circuit_value": num(*circuit_value),
            })
        }
        AdmissibleOutcome::NotDecided { attempt, reason } => json!({
            "outcome": "NOT_DECIDED",
            "reason": reason,
            "attempt": attempt.as_ref().map(completion_result),
        }),
    }
}

pub fn trajectory(t: &Trajectory) -> Value {
    let last = t.len().saturating_sub(1);
    let max_increase = t
        .free_energy
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let index = |i: usize| t.species[i].clone();
    let mut flux = Map::new();
    for (j, &s) in t.frozen.iter().enumerate() {
        flux.insert(
            index(s),
            json!({
                "final": num(t.external_flux.get(last).map_or(0.0, |v| v[j])),
                "cumulative": num(t.cumulative_flux.get(last).map_or(0.0, |v| v[j])),
            }),
        );
    }
    let named = |xs: &[f64]| {
        let mut m = Map::new();
        for (i, &x) in xs.iter().enumerate() {
            m.insert(index(i), num(x));
        }
        Value::Object(m)
    };
    json!({
        "status": format!("{:?}", t.status),
        "samples": t.len(),
        "t_final": num(t.times.last().copied().unwrap_or(0.0)),
        "final_state": named(t.final_state()),
        "energy": named(&t.energy),
        "equilibrium": named(&t.equilibrium()),
        "on_equilibrium_gauge": t.on_equilibrium_gauge,
        "free_energy_final": num(t.free_energy.last().copied().unwrap_or(0.0)),
        "free_energy_max_increase": num(if t.len() > 1 { max_increase } else { 0.0 }),
        "max_conservation_residual": num(t.max_conservation_residual()),
        "steady_state_time": t.steady_state_time.map(num),
        "external_flux": flux,
        "steps": {"accepted": t.stats.accepted, "rejected": t.stats.rejected},
    })
}

pub fn decomposition(samples: &[DecompositionSample]) -> Value {
    let worst = samples.iter().map(|s| s.residual).fold(0.0, f64::max);
    json!({
        "samples": samples.len(),
        "holds": samples.iter().all(DecompositionSample::holds),
        "max_residual": num(worst),
        "failing_times": nums(&samples.iter().filter(|s| !s.holds()).map(|s| s.t).collect::<Vec<_>>()),
    })
}
