//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::collections::BTreeSet;
use std::error::Error;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;

use crnbalance::completion::{
    break_one_cycle, complete_admissible, complete_closed, eliminate_sources_sinks,
    make_conservative, skewed_rates, AdmissibleOutcome, ConstraintSet, CycleMode, Draft, Step,
};
use crnbalance::dynamics::{
    energy_decomposition, integrate, integrate_with_fluxes, reduced_flux_equivalence,
    SimulationConfig,
};
use crnbalance::kinetics::{
    detailed_balance, energy_vector, mass_action_rhs, steady_state, KineticSystem, RateFunction,
    DEFAULT_DB_TOL,
};
use crnbalance::network::{structure, ChemicalNetwork, Reaction};
use crnbalance::ratlin::{nullspace, subspace_equal, to_rational, SubspaceBasis};
use crnbalance::reduction::{
    db_stability_report, perturbation_witness, project_cycle, reduce_network,
    reduced_circuit_check, reduced_rates, reduced_system, stability_conditions, DbStability,
    FrozenConcentrations, ReductionMap,
};

use common::*;

type Outcome = Result<String, Box<dyn Error>>;
type Criterion = fn() -> Outcome;
type FrozenCase = (KineticSystem, Vec<usize>, Vec<(usize, f64)>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+).into());
        }
    };
}

fn ints(xs: &[i64]) -> Vec<BigInt> {
    xs.iter().map(|&x| BigInt::from(x)).collect()
}

fn span(dim: usize, vectors: &[&[i64]]) -> SubspaceBasis {
    SubspaceBasis::span_of_integers(dim, &vectors.iter().map(|v| ints(v)).collect::<Vec<_>>())
}

fn frozen(pairs: &[(usize, f64)]) -> FrozenConcentrations {
    FrozenConcentrations::from_pairs(pairs).unwrap()
}

fn rate_of(rmap: &ReductionMap, rates: &RateFunction, column: usize, forward: bool) -> f64 {
    let p = rmap
        .reduced_reaction_of
        .iter()
        .position(|&x| x == (column, forward))
        .expect("reduced reaction exists");
    rates.get(p)
}

/// `Π (K_f/K_r)^{c_j}` over the reduced columns, from the reduced rates.
fn reduced_circuit_value(rmap: &ReductionMap, rates: &RateFunction, cycle: &[i64]) -> f64 {
    cycle
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            (rate_of(rmap, rates, j, true) / rate_of(rmap, rates, j, false)).powi(c as i32)
        })
        .product()
}

fn within_a_second(start: Instant) -> Result<(), Box<dyn Error>> {
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(())
}

fn cycle_spaces() -> Outcome {
    let start = Instant::now();
    let one_way = ChemicalNetwork::new(
        ChemicalNetwork::numbered_species(2),
        vec![Reaction::new(vec![-1, 1]), Reaction::new(vec![2, -2])],
    )?;
    let cycles = structure(&one_way).cycle_basis;
    ensure!(
        subspace_equal(&cycles, &span(2, &[&[2, 1]]))?,
        "one-way cycles are {:?}",
        cycles.vectors
    );

    let net = two_cycle_network();
    let parent = nullspace(&net.reaction_matrix());
    ensure!(
        parent.dim() == 2,
        "two-cycle network has {} cycles",
        parent.dim()
    );
    let c = ints(&[1, 1, 2, -2, 1, 1]);
    ensure!(
        parent.contains(&to_rational(&c)),
        "(1,1,2,-2,1,1) is not a cycle"
    );
    let product = net.reaction_matrix().mul_int_vec(&c)?;
    ensure!(product.iter().all(Zero::is_zero), "R c is not zero");

    let rmap = reduce_network(&net, &[4, 5])?;
    let image = project_cycle(&rmap, &c);
    ensure!(image == ints(&[2, 2, -2, 2]), "projection is {image:?}");
    let reduced_product = rmap.reduced_matrix().mul_int_vec(&image)?;
    ensure!(
        reduced_product.iter().all(Zero::is_zero),
        "projection is not a reduced cycle"
    );
    within_a_second(start)?;
    Ok(format!(
        "{} parent cycles, projection (2,2,-2,2)",
        parent.dim()
    ))
}

fn conservation_laws() -> Outcome {
    let start = Instant::now();
    let one_way = |rs: &[&[i64]]| {
        ChemicalNetwork::new(
            ChemicalNetwork::numbered_species(3),
            rs.iter().map(|r| Reaction::new(r.to_vec())).collect(),
        )
    };
    let a = structure(&one_way(&[&[-1, -1, 2], &[0, 1, -1]])?);
    ensure!(
        subspace_equal(&a.conservation_basis, &span(3, &[&[1, 1, 1]]))?,
        "M = {:?}",
        a.conservation_basis.vectors
    );
    ensure!(a.conservative, "first network should be conservative");
    let law = a.positive_law.ok_or("no positive law")?;
    ensure!(
        law.iter().all(|x| x > &Zero::zero()),
        "positive law {law:?} is not positive"
    );

    let b = structure(&one_way(&[&[-1, -1, 1], &[0, 1, -1]])?);
    ensure!(
        subspace_equal(&b.conservation_basis, &span(3, &[&[0, 1, 1]]))?,
        "M = {:?}",
        b.conservation_basis.vectors
    );
    ensure!(
        !b.conservative && b.positive_law.is_none(),
        "second network should not be conservative"
    );
    within_a_second(start)?;
    Ok("span{(1,1,1)} conservative, span{(0,1,1)} not".into())
}

fn reduced_rates_and_flip() -> Outcome {
    let net = two_cycle_network();
    let rmap = reduce_network(&net, &[4, 5])?;
    let cycle = [1, 1, -1, 1];
    ensure!(
        rmap.reduced_cycles().contains(&to_rational(&ints(&cycle))),
        "reduced cycle space is {:?}",
        rmap.reduced_cycles().vectors
    );
    let ones = KineticSystem::new(net.clone(), RateFunction::uniform(12, 1.0))?;
    let mut heavy = vec![1.0; 12];
    heavy[10] = 2.0;
    heavy[11] = 2.0;
    let heavy = KineticSystem::new(net, RateFunction::new(heavy)?)?;

    let mut rng = rng(3);
    for _ in 0..20 {
        let (n5, n6): (f64, f64) = (rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0));
        let n_u = frozen(&[(4, n5), (5, n6)]);
        let k = reduced_rates(&ones, &rmap, &n_u)?;
        ensure!(
            rate_of(&rmap, &k, 3, true) == 2.0,
            "all-ones K(R4) = {}",
            rate_of(&rmap, &k, 3, true)
        );
        ensure!(
            (rate_of(&rmap, &k, 3, false) - (n5 + n6)).abs() <= 1e-12 * (n5 + n6),
            "all-ones K(-R4)"
        );

        let k = reduced_rates(&heavy, &rmap, &n_u)?;
        ensure!(
            rate_of(&rmap, &k, 3, true) == 3.0,
            "variant K(R4) = {}",
            rate_of(&rmap, &k, 3, true)
        );
        let kr = rate_of(&rmap, &k, 3, false);
        ensure!(
            (kr - (n6 + 2.0 * n5)).abs() <= 1e-12 * kr,
            "variant K(-R4) = {kr}"
        );
        let expected = 3.0 * (n5 + n6) / (2.0 * (n6 + 2.0 * n5));
        let value = reduced_circuit_value(&rmap, &k, &cycle);
        ensure!(
            (value - expected).abs() <= 1e-12,
            "circuit value {value} vs {expected}"
        );
        let library = reduced_circuit_check(&rmap, &k, DEFAULT_DB_TOL)?;
        ensure!(
            (library.log_sums[0].abs() - expected.ln().abs()).abs() <= 1e-12,
            "library log sum"
        );
        ensure!(
            !library.balanced,
            "unequal draw ({n5}, {n6}) reported balanced"
        );
    }
    for n in [0.1, 1.0, 2.5, 10.0] {
        let on = reduced_circuit_check(
            &rmap,
            &reduced_rates(&heavy, &rmap, &frozen(&[(4, n), (5, n)]))?,
            DEFAULT_DB_TOL,
        )?;
        ensure!(on.balanced, "n5 = n6 = {n} not balanced");
        let off = frozen(&[(4, n), (5, n * (1.0 + 1e-6))]);
        let off =
            reduced_circuit_check(&rmap, &reduced_rates(&heavy, &rmap, &off)?, DEFAULT_DB_TOL)?;
        ensure!(!off.balanced, "n6 = n5(1+1e-6) balanced at {n}");
    }
    Ok("20 draws within 1e-12, flip at n5 = n6".into())
}

fn zero_reduction() -> Outcome {
    let sys = KineticSystem::new(two_cycle_network(), RateFunction::uniform(12, 1.0))?;
    let rmap = reduce_network(sys.network(), &[0, 3])?;
    ensure!(!rmap.zero_reduced.is_empty(), "no zero reduction");
    let verdict = |n1: f64, n4: f64| -> Result<bool, Box<dyn Error>> {
        let k = reduced_rates(&sys, &rmap, &frozen(&[(0, n1), (3, n4)]))?;
        Ok(reduced_circuit_check(&rmap, &k, DEFAULT_DB_TOL)?.balanced)
    };
    ensure!(verdict(1.0, 1.0)?, "n1 = n4 = 1 not balanced");
    ensure!(!verdict(1.0, 2.0)?, "n1 = 1, n4 = 2 balanced");
    let mut rng = rng(4);
    for _ in 0..20 {
        let (a, b): (f64, f64) = (rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0));
        ensure!(verdict(a, a)?, "n1 = n4 = {a} not balanced");
        ensure!(!verdict(a, b)?, "n1 = {a}, n4 = {b} balanced");
    }
    Ok("balanced iff n1 = n4".into())
}

fn constrained_ring() -> Outcome {
    let net = ring();
    let sys = KineticSystem::new(net.clone(), skewed_rates(&net, 1.0))?;
    ensure!(
        !detailed_balance(&sys, DEFAULT_DB_TOL)?.balanced,
        "ring rates should not be balanced"
    );
    let constrained = net
        .reaction_index(&[0, -1, 1, 0])
        .ok_or("constrained reaction missing")?;
    let cs = ConstraintSet::new(&net, &[constrained])?;
    let AdmissibleOutcome::Completed(result) = complete_admissible(&sys, &cs, DEFAULT_DB_TOL)?
    else {
        return Err("constrained ring was not completed".into());
    };
    ensure!(
        result.certificate.all_green(),
        "certificate: {:?}",
        result.certificate.failures
    );
    let printed: [[i64; 6]; 4] = [
        [-1, 1, 0, 0, 0, 0],
        [0, -1, 1, 0, 0, 0],
        [0, 0, -1, 1, 0, 0],
        [1, 0, 0, -1, -1, 1],
    ];
    let completed = result.completed.network();
    ensure!(
        completed.num_species() == 6,
        "{} species",
        completed.num_species()
    );
    let got: BTreeSet<Vec<i64>> = completed
        .reactions()
        .iter()
        .map(|r| r.coeffs().to_vec())
        .collect();
    let want: BTreeSet<Vec<i64>> = printed
        .iter()
        .flat_map(|c| [c.to_vec(), c.iter().map(|x| -x).collect()])
        .collect();
    ensure!(got == want, "completed reactions {got:?}");

    let all: Vec<usize> = (0..net.num_reactions()).collect();
    let full = ConstraintSet::new(&net, &all)?;
    let AdmissibleOutcome::Impossible {
        cycle,
        circuit_value,
    } = complete_admissible(&sys, &full, DEFAULT_DB_TOL)?
    else {
        return Err("fully constrained ring was not declared impossible".into());
    };
    ensure!(!cycle.iter().all(Zero::is_zero), "empty certificate cycle");
    ensure!(
        net.reaction_matrix()
            .mul_int_vec(&cycle)?
            .iter()
            .all(Zero::is_zero),
        "certificate is not a cycle"
    );
    let reps = net.nonreverse_set();
    let value: f64 = cycle
        .iter()
        .zip(&reps)
        .map(|(c, &k)| {
            let r = net.reverse_of(k).expect("bidirectional");
            (sys.rates().get(k) / sys.rates().get(r)).powi(c.to_i32().expect("small"))
        })
        .product();
    ensure!(
        (value - circuit_value).abs() <= 1e-12 * value,
        "circuit value {circuit_value} vs {value}"
    );
    ensure!(
        (value.ln()).abs() > DEFAULT_DB_TOL,
        "certificate cycle is balanced"
    );
    Ok(format!(
        "printed completion reproduced, impossible with circuit value {circuit_value}"
    ))
}

fn fuzz_closed_completion() -> Outcome {
    let mut rng = rng(6);
    let mut added = 0;
    let mut moves = 0;
    for case in 0..200 {
        let net = if case % 2 == 0 {
            random_network(&mut rng, 6)
        } else {
            random_cyclic_network(&mut rng, 6)
        };
        let rates = random_rates(&mut rng, &net);
        let sys = KineticSystem::new(net.clone(), rates)?;
        let result = complete_closed(&sys, false, DEFAULT_DB_TOL)?;
        ensure!(
            result.certificate.all_green(),
            "case {case}: {:?}",
            result.certificate.failures
        );

        let completed = result.completed.network();
        let n = net.num_species();
        ensure!(
            completed.num_reactions() == net.num_reactions(),
            "case {case}: reaction count"
        );
        for (k, r) in net.reactions().iter().enumerate() {
            let c = completed.reactions()[k].coeffs();
            ensure!(
                c[..n] == *r.coeffs(),
                "case {case}: reaction {k} does not project back"
            );
            ensure!(
                !c.iter().all(|&x| x >= 0) && !c.iter().all(|&x| x <= 0),
                "case {case}: source or sink"
            );
            ensure!(
                result.completed.rates().get(k) == sys.rates().get(k),
                "case {case}: rate {k}"
            );
        }
        let aux: Vec<usize> = (n..completed.num_species()).collect();
        if !aux.is_empty() {
            let rmap = reduce_network(completed, &aux)?;
            ensure!(rmap.zero_reduced.is_empty(), "case {case}: zero reduction");
            ensure!(
                rmap.columns.iter().all(|c| c.is_one_to_one()),
                "case {case}: merged reduction"
            );
            let n_u = FrozenConcentrations::from_pairs(&result.frozen_defaults)?;
            let back = reduced_system(&result.completed, &rmap, &n_u)?;
            for (i, r) in back.network().reactions().iter().enumerate() {
                let k = net
                    .reaction_index(r.coeffs())
                    .ok_or("reduced reaction not in the original")?;
                ensure!(
                    back.rates().get(i) == sys.rates().get(k),
                    "case {case}: reduced rate {i}"
                );
            }
        }
        ensure!(
            structure(completed).cycle_basis.is_empty(),
            "case {case}: cycles remain"
        );

        let mut draft = Draft::from_network(&net)?;
        eliminate_sources_sinks(&mut draft);
        make_conservative(&mut draft)?;
        let mut dim = nullspace(&draft.matrix()).dim();
        let mut case_moves = 0;
        while break_one_cycle(
            &mut draft,
            &BTreeSet::new(),
            CycleMode::All,
            None,
            DEFAULT_DB_TOL,
        )? {
            let next = nullspace(&draft.matrix()).dim();
            ensure!(
                next + 1 == dim,
                "case {case}: kernel went from {dim} to {next}"
            );
            dim = next;
            case_moves += 1;
        }
        moves += case_moves;
        ensure!(dim == 0, "case {case}: {dim} cycles left");
        let breaks = result
            .provenance
            .iter()
            .filter(|a| a.step == Step::CycleBreak)
            .count();
        ensure!(
            draft.num_species() == completed.num_species(),
            "case {case}: stepwise run differs"
        );
        ensure!(
            breaks == 2 * case_moves,
            "case {case}: {breaks} cycle species for {case_moves} moves"
        );
        added += result.added_species();
    }
    Ok(format!(
        "200 networks, {added} species added, {moves} cycle moves"
    ))
}

fn fuzz_db_systems() -> Outcome {
    let mut rng = rng(7);
    let mut balanced_count = 0;
    for case in 0..200 {
        let net = random_network(&mut rng, 6);
        let db = case < 100;
        let rates = if db {
            db_rates(&mut rng, &net)
        } else {
            random_rates(&mut rng, &net)
        };
        let sys = KineticSystem::new(net, rates)?;
        let verdict = detailed_balance(&sys, DEFAULT_DB_TOL)?;
        let energy = energy_vector(&sys)?;
        ensure!(
            verdict.balanced == (energy.residual <= 1e-9),
            "case {case}: verdict {} but residual {}",
            verdict.balanced,
            energy.residual
        );
        if db {
            ensure!(
                verdict.balanced,
                "case {case}: constructed DB system rejected"
            );
        }
        if verdict.balanced {
            balanced_count += 1;
            let n = steady_state(&energy.particular);
            let rhs = mass_action_rhs(&sys, &n)?;
            let worst = rhs.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
            ensure!(worst <= 1e-10, "case {case}: rhs at e^-E is {worst}");
            ensure!(
                flux_balance_gap(&sys, &n) <= 1e-9,
                "case {case}: fluxes do not balance"
            );
        }
    }
    Ok(format!(
        "100 DB and 100 random-rate systems, {balanced_count} balanced"
    ))
}

/// Random reductions whose three topological conditions hold and whose
/// reduced network still has a cycle.
fn stable_instances(seed: u64, wanted: usize) -> Vec<(ChemicalNetwork, Vec<usize>)> {
    let mut rng = rng(seed);
    let mut out = Vec::new();
    for _ in 0..20_000 {
        if out.len() == wanted {
            break;
        }
        let net = random_network(&mut rng, 6);
        let n = net.num_species();
        let u: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.35)).collect();
        if u.is_empty() || u.len() == n {
            continue;
        }
        let Ok(rmap) = reduce_network(&net, &u) else {
            continue;
        };
        let parent = nullspace(&net.reaction_matrix());
        let Ok((conditions, _)) = stability_conditions(&rmap, &parent) else {
            continue;
        };
        if conditions.all() && !rmap.reduced_cycles().is_empty() && reduced_rates_defined(&rmap) {
            out.push((net, u));
        }
    }
    out
}

fn reduced_rates_defined(rmap: &ReductionMap) -> bool {
    (0..rmap.columns.len()).all(|j| {
        rmap.reduced_reaction_of.contains(&(j, true))
            && rmap.reduced_reaction_of.contains(&(j, false))
    })
}

fn same_cycles_imply_db() -> Outcome {
    let instances = stable_instances(8, 10);
    ensure!(
        !instances.is_empty(),
        "no instance satisfies the three conditions"
    );
    let mut rng = rng(80);
    let mut draws = 0;
    let mut broken = Vec::new();
    for (i, (net, u)) in instances.iter().enumerate() {
        let rmap = reduce_network(net, u)?;
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let sys = db_system(&mut rng, net.clone());
            let pairs: Vec<(usize, f64)> =
                u.iter().map(|&s| (s, rng.gen_range(0.1..10.0))).collect();
            let reduced = reduced_system(&sys, &rmap, &frozen(&pairs))?;
            let verdict = reduced_circuit_check(&rmap, reduced.rates(), DEFAULT_DB_TOL)?;
            let residual = energy_vector(&reduced)?.residual;
            ensure!(
                verdict.balanced == (residual <= 1e-9),
                "instance {i}: circuit and energy routes disagree"
            );
            if !verdict.balanced {
                worst = worst.max(verdict.max_deviation());
            }
            draws += 1;
        }
        if worst > 0.0 {
            let parent = nullspace(&net.reaction_matrix());
            let (conditions, _) = stability_conditions(&rmap, &parent)?;
            broken.push((i, worst, conditions.cycles_lift_one_to_one));
        }
    }
    if let Some(&(i, worst, _)) = broken.first() {
        let explained = broken.iter().all(|&(_, _, lift)| !lift);
        let net = &instances[i].0;
        let reactions: Vec<&[i64]> = net
            .nonreverse_set()
            .iter()
            .map(|&k| net.reactions()[k].coeffs())
            .collect();
        return Err(format!(
            "{} of {} instances give unbalanced reductions; first: pairs {reactions:?}, U = {:?}, deviation {worst:.3}; \
             cycle-lift condition fails on {} of them",
            broken.len(),
            instances.len(),
            instances[i].1,
            if explained { "all" } else { "not all" },
        )
        .into());
    }
    Ok(format!(
        "{} instances, {draws} draws balanced",
        instances.len()
    ))
}

fn perturbation_witnesses() -> Outcome {
    const DELTA: f64 = 1e-2;
    let mut rng = rng(9);
    let mut cases: Vec<FrozenCase> = Vec::new();
    let two = KineticSystem::new(two_cycle_network(), RateFunction::uniform(12, 1.0))?;
    for _ in 0..20 {
        let n5: f64 = rng.gen_range(0.1..10.0);
        let n6 = n5 * rng.gen_range(1.1..3.0);
        cases.push((two.clone(), vec![4, 5], vec![(4, n5), (5, n6)]));
    }
    let (mut fine_tuned, mut unbalanced) = (0, 0);
    for _ in 0..5_000 {
        if fine_tuned == 20 && unbalanced == 20 {
            break;
        }
        let net = random_network(&mut rng, 6);
        let n = net.num_species();
        let u: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
        if u.is_empty() || u.len() == n {
            continue;
        }
        let Ok(rmap) = reduce_network(&net, &u) else {
            continue;
        };
        if !reduced_rates_defined(&rmap) {
            continue;
        }
        let uniform = rng.gen_bool(0.5);
        let rates = if uniform {
            RateFunction::uniform(net.num_reactions(), 1.0)
        } else {
            db_rates(&mut rng, &net)
        };
        let sys = KineticSystem::new(net, rates)?;
        let pairs: Vec<(usize, f64)> = u.iter().map(|&s| (s, rng.gen_range(0.1..10.0))).collect();
        let Ok(report) = db_stability_report(&sys, &rmap, &frozen(&pairs), DEFAULT_DB_TOL) else {
            continue;
        };
        let keep = match report.verdict {
            DbStability::DbFineTuned if fine_tuned < 20 => {
                fine_tuned += 1;
                true
            }
            DbStability::NotDb if unbalanced < 20 => {
                unbalanced += 1;
                true
            }
            _ => false,
        };
        if keep {
            cases.push((sys, u, pairs));
        }
    }

    let mut already_broken = 0;
    for (i, (sys, u, pairs)) in cases.iter().enumerate() {
        let rmap = reduce_network(sys.network(), u)?;
        let n_u = frozen(pairs);
        let report = db_stability_report(sys, &rmap, &n_u, DEFAULT_DB_TOL)?;
        ensure!(!report.conditions.all(), "case {i}: conditions hold");
        ensure!(
            !report.equilibrium_check.holds,
            "case {i}: frozen values are at equilibrium"
        );
        if report.verdict == DbStability::NotDb {
            ensure!(
                report.reduced_verdict.max_deviation() > 1e-8,
                "case {i}: NOT_DB without deviation"
            );
            already_broken += 1;
            continue;
        }
        let w = perturbation_witness(sys, &rmap, &n_u, DELTA, DEFAULT_DB_TOL)?
            .ok_or(format!("case {i}: no witness"))?;
        let distance = sys
            .rates()
            .values()
            .iter()
            .zip(w.rates.values())
            .fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
        ensure!(distance < DELTA, "case {i}: distance {distance}");
        let perturbed = KineticSystem::new(sys.network().clone(), w.rates.clone())?;
        ensure!(
            detailed_balance(&perturbed, DEFAULT_DB_TOL)?.balanced,
            "case {i}: perturbed parent not balanced"
        );
        let reduced = reduced_rates(&perturbed, &rmap, &n_u)?;
        let deviation = reduced_circuit_check(&rmap, &reduced, DEFAULT_DB_TOL)?.max_deviation();
        ensure!(deviation > 1e-8, "case {i}: reduced deviation {deviation}");
    }
    Ok(format!(
        "{} fine-tuned cases witnessed ({fine_tuned} random), {already_broken} unbalanced without perturbation",
        cases.len() - already_broken
    ))
}

fn tight(t_end: f64) -> SimulationConfig {
    SimulationConfig {
        t_end,
        rel_tol: 1e-10,
        abs_tol: 1e-12,
        record_every: 0.05,
        ..SimulationConfig::default()
    }
}

fn closed_db_systems(rng: &mut rand_chacha::ChaCha8Rng) -> Vec<KineticSystem> {
    let mut out = Vec::new();
    for _ in 0..8 {
        let net = random_isomerization_network(rng, 6);
        out.push(db_system(rng, net));
    }
    let curated = [
        ChemicalNetwork::from_pairs(ChemicalNetwork::numbered_species(2), &[vec![-2, 1]]),
        ChemicalNetwork::from_pairs(ChemicalNetwork::numbered_species(3), &[vec![-1, -1, 1]]),
        ChemicalNetwork::from_pairs(
            ChemicalNetwork::numbered_species(3),
            &[vec![-1, 1, 0], vec![0, -2, 1]],
        ),
        Ok(two_cycle_network()),
    ];
    for net in curated {
        out.push(db_system(rng, net.expect("valid network")));
    }
    out.push(
        KineticSystem::new(two_cycle_network(), RateFunction::uniform(12, 1.0)).expect("valid"),
    );
    out
}

fn dynamics_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(10);
    let systems = closed_db_systems(&mut rng);
    for (i, sys) in systems.iter().enumerate() {
        let n0: Vec<f64> = (0..sys.num_species())
            .map(|_| rng.gen_range(0.1..2.0))
            .collect();
        let traj = integrate(
            sys,
            &n0,
            &SimulationConfig {
                record_every: 0.5,
                ..tight(200.0)
            },
        )?;
        let f = &traj.free_energy;
        ensure!(
            f.windows(2).all(|w| w[1] <= w[0] + 1e-8),
            "system {i}: F increased"
        );
        ensure!(
            traj.max_conservation_residual() <= 1e-8,
            "system {i}: drift {}",
            traj.max_conservation_residual()
        );
        let eq = traj.equilibrium();
        let gap = traj
            .final_state()
            .iter()
            .zip(&eq)
            .fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
        ensure!(gap <= 1e-6, "system {i}: final state is {gap} from e^-E");
        ensure!(
            flux_balance_gap(sys, &eq) <= 1e-8,
            "system {i}: e^-E is not an equilibrium"
        );
        for m in &structure(sys.network()).conservation_basis.vectors {
            let m: Vec<f64> = m.iter().map(|x| x.to_f64().expect("small")).collect();
            let dot = |n: &[f64]| n.iter().zip(&m).map(|(a, b)| a * b).sum::<f64>();
            ensure!(
                (dot(&eq) - dot(&n0)).abs() <= 1e-8 * (1.0 + dot(&n0).abs()),
                "system {i}: e^-E has other totals"
            );
        }
    }

    let chain_sys = KineticSystem::new(chain(), RateFunction::uniform(4, 1.0))?;
    let held = frozen(&[(0, 2.0)]);
    let traj = integrate_with_fluxes(&chain_sys, &held, &[0.3, 0.7], &tight(80.0))?;
    let last = traj.final_state();
    ensure!(
        last.iter().all(|x| (x - 2.0).abs() <= 1e-6),
        "chain ends at {last:?}"
    );
    let fed = traj.cumulative_flux.last().ok_or("empty run")?[0];
    let gained: f64 = last.iter().sum::<f64>() - (2.0 + 0.3 + 0.7);
    ensure!((fed - gained).abs() <= 1e-6, "fed {fed}, gained {gained}");
    ensure!(
        traj.max_conservation_residual() <= 1e-6,
        "flux identity residual {}",
        traj.max_conservation_residual()
    );

    let mut worst_ratio: f64 = 0.0;
    let mut stiff = vec![1.0; 12];
    stiff[4] = 1e3;
    let equivalences = [
        (
            KineticSystem::new(two_cycle_network(), RateFunction::uniform(12, 1.0))?,
            frozen(&[(4, 1.0), (5, 1.0)]),
            vec![0.4, 1.3, 0.2, 0.9],
            tight(5.0),
        ),
        (
            KineticSystem::new(two_cycle_network(), RateFunction::new(stiff)?)?,
            frozen(&[(4, 2.0), (5, 1.0)]),
            vec![0.4, 1.3, 0.2, 0.9],
            SimulationConfig {
                rel_tol: 1e-11,
                abs_tol: 1e-13,
                ..tight(2.0)
            },
        ),
        (chain_sys.clone(), held.clone(), vec![0.3, 0.7], tight(10.0)),
    ];
    for (i, (sys, fz, n0, cfg)) in equivalences.iter().enumerate() {
        let report = reduced_flux_equivalence(sys, fz, n0, cfg)?;
        ensure!(
            report.holds(),
            "equivalence {i}: {} > {}",
            report.max_deviation,
            report.tolerance
        );
        worst_ratio = worst_ratio.max(report.max_deviation / report.tolerance);
    }

    let branched = ChemicalNetwork::from_pairs(
        ChemicalNetwork::numbered_species(4),
        &[vec![-1, 1, 0, 0], vec![0, -1, 1, 0], vec![0, -1, 0, 1]],
    )?;
    let branched = db_system(&mut rng, branched);
    let decompositions = [
        (chain_sys, held, vec![0.3, 0.7]),
        (branched, frozen(&[(3, 1.5)]), vec![0.2, 1.0, 0.6]),
    ];
    let mut samples = 0;
    for (i, (sys, fz, n0)) in decompositions.iter().enumerate() {
        let fine = SimulationConfig {
            record_every: 0.005,
            ..tight(10.0)
        };
        let traj = integrate_with_fluxes(sys, fz, n0, &fine)?;
        for s in energy_decomposition(sys, fz, &traj, DEFAULT_DB_TOL)? {
            let bound = 1e-6_f64.max(1e-3 * s.dfdt.abs());
            ensure!(
                (s.dfdt + s.reduced_dissipation - s.external_work).abs() <= bound,
                "decomposition {i} at t = {}: residual {}",
                s.t,
                s.residual
            );
            samples += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "suite took {elapsed:?}");
    Ok(format!(
        "{} closed runs, equivalence at {:.1e} of bound, {samples} decomposition samples",
        systems.len(),
        worst_ratio
    ))
}

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("cycle spaces and projection", cycle_spaces),
        ("conservation laws", conservation_laws),
        ("reduced rates and circuit value", reduced_rates_and_flip),
        ("zero reduction verdict", zero_reduction),
        ("constrained ring completion", constrained_ring),
        ("closed completion fuzz", fuzz_closed_completion),
        ("detailed balance fuzz", fuzz_db_systems),
        ("topological conditions imply balance", same_cycles_imply_db),
        ("perturbation witnesses", perturbation_witnesses),
        ("dynamics", dynamics_suite),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(msg.into())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.2} s)", i + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {e} ({secs:.2} s)", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
