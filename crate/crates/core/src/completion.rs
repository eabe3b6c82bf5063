//! Closed completions: embedding an open network as the reduction of a
//! larger network that is conservative, free of sources and sinks, and
//! detailed balanced.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::Zero;
use thiserror::Error;

use crate::kinetics::{
    circuit_condition, detailed_balance, KineticSystem, KineticsError, RateFunction,
};
use crate::network::{has_sources_or_sinks, structure, ChemicalNetwork, NetworkError, Reaction};
use crate::ratlin::{
    bigint_to_f64, nonnegative_vector_with, nullspace, positive_vector_in_span, RationalMatrix,
    SubspaceBasis,
};
use crate::reduction::{reduce_network, reduced_rates, FrozenConcentrations, ReductionError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompletionError {
    #[error("completion requires a bidirectional network")]
    NotBidirectional,
    #[error("constraint refers to reaction {0}, which is not in the network")]
    UnknownConstraint(usize),
    #[error("construction check failed: {0}")]
    Falsified(String),
    #[error("no cycle-breaking move is available for the remaining cycles")]
    NoProgress,
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    SourceSink,
    Conservativize,
    CycleBreak,
}

impl Step {
    pub fn label(self) -> &'static str {
        match self {
            Self::SourceSink => "SOURCE_SINK",
            Self::Conservativize => "CONSERVATIVIZE",
            Self::CycleBreak => "CYCLE_BREAK",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Trigger {
    /// Position in the original `ℛ_s`.
    Reaction(usize),
    /// Original species mirrored.
    Species(usize),
    /// Cycle over the original `ℛ_s` positions.
    Cycle(Vec<BigInt>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuxSpecies {
    pub name: String,
    pub step: Step,
    pub trigger: Trigger,
}

/// A network under construction: species rows over the original `ℛ_s` columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Draft {
    pub species: Vec<String>,
    /// One column per original `ℛ_s` representative.
    pub columns: Vec<Vec<i64>>,
    pub provenance: Vec<AuxSpecies>,
    original_species: usize,
}

impl Draft {
    pub fn from_network(net: &ChemicalNetwork) -> Result<Self, CompletionError> {
        if !net.is_bidirectional() {
            return Err(CompletionError::NotBidirectional);
        }
        let columns = net
            .nonreverse_set()
            .into_iter()
            .map(|k| net.reactions()[k].coeffs().to_vec())
            .collect();
        Ok(Self {
            species: net.species().to_vec(),
            columns,
            provenance: Vec::new(),
            original_species: net.num_species(),
        })
    }

    pub fn num_species(&self) -> usize {
        self.species.len()
    }

    pub fn matrix(&self) -> RationalMatrix {
        RationalMatrix::from_i64_columns(self.species.len(), &self.columns)
    }

    fn row(&self, i: usize) -> Vec<i64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    fn push_species(&mut self, row: &[i64], step: Step, trigger: Trigger) {
        let mut k = self.provenance.len() + 1;
        let mut name = format!("_aux{k}");
        while self.species.contains(&name) {
            k += 1;
            name = format!("_aux{k}");
        }
        for (c, &v) in self.columns.iter_mut().zip(row) {
            c.push(v);
        }
        self.species.push(name.clone());
        self.provenance.push(AuxSpecies {
            name,
            step,
            trigger,
        });
    }

    pub fn has_sources_or_sinks(&self) -> bool {
        self.columns
            .iter()
            .any(|c| !c.iter().any(|&x| x < 0) || !c.iter().any(|&x| x > 0))
    }

    pub fn conservation_basis(&self) -> SubspaceBasis {
        nullspace(&self.matrix().transpose())
    }

    pub fn is_conservative(&self) -> bool {
        positive_vector_in_span(&self.conservation_basis()).is_some()
    }

    pub fn cycles(&self) -> SubspaceBasis {
        nullspace(&self.matrix())
    }
}

/// Step 1: every pair with an empty side gains two species with
/// coefficients `(+1, −1)` on its representative.
pub fn eliminate_sources_sinks(draft: &mut Draft) {
    for p in 0..draft.columns.len() {
        let c = &draft.columns[p];
        if c.iter().any(|&x| x < 0) && c.iter().any(|&x| x > 0) {
            continue;
        }
        let mut plus = vec![0; draft.columns.len()];
        plus[p] = 1;
        let minus: Vec<i64> = plus.iter().map(|x| -x).collect();
        draft.push_species(&plus, Step::SourceSink, Trigger::Reaction(p));
        draft.push_species(&minus, Step::SourceSink, Trigger::Reaction(p));
    }
}

/// Species that no nonnegative conservation law reaches.
pub fn unreached_species(basis: &SubspaceBasis) -> Vec<usize> {
    (0..basis.ambient_dim)
        .filter(|&u| nonnegative_vector_with(basis, u).is_none())
        .collect()
}

/// Step 2: mirror the rows of species outside the support of the
/// nonnegative conservation laws, then verify conservativeness.
pub fn make_conservative(draft: &mut Draft) -> Result<Vec<usize>, CompletionError> {
    let mirrored = unreached_species(&draft.conservation_basis());
    for &u in &mirrored {
        let row: Vec<i64> = draft.row(u).iter().map(|x| -x).collect();
        draft.push_species(&row, Step::Conservativize, Trigger::Species(u));
    }
    if !draft.is_conservative() {
        return Err(CompletionError::Falsified(format!(
            "network is not conservative after mirroring species {mirrored:?}"
        )));
    }
    if draft.has_sources_or_sinks() {
        return Err(CompletionError::Falsified(
            "mirroring created a source or sink".into(),
        ));
    }
    Ok(mirrored)
}

/// Step 3 move for one cycle: the lowest row `ζ` with two nonzero entries on
/// the cycle's support, split as `W₁ = ζ(k)e_k` and `W₂ = ζ − W₁`.
fn split_row_move(draft: &Draft, c: &[BigInt]) -> Option<(Vec<i64>, Vec<i64>)> {
    let supp: Vec<usize> = (0..c.len()).filter(|&i| !c[i].is_zero()).collect();
    for i in 0..draft.num_species() {
        let zeta = draft.row(i);
        for (a, &k) in supp.iter().enumerate() {
            if zeta[k] == 0 {
                continue;
            }
            if supp[a + 1..].iter().any(|&j| zeta[j] != 0) {
                let mut w1 = vec![0; zeta.len()];
                w1[k] = zeta[k];
                let w2: Vec<i64> = zeta.iter().zip(&w1).map(|(z, w)| z - w).collect();
                return Some((w1, w2));
            }
        }
    }
    None
}

/// Constrained Step 3 move: the pair `(+1, −1)` on the highest-index
/// unconstrained reaction in the cycle's support.
fn free_pair_move(c: &[BigInt], forbidden: &BTreeSet<usize>) -> Option<(Vec<i64>, Vec<i64>)> {
    let k = (0..c.len())
        .rev()
        .find(|&i| !c[i].is_zero() && !forbidden.contains(&i))?;
    let mut plus = vec![0; c.len()];
    plus[k] = 1;
    let minus = plus.iter().map(|x| -x).collect();
    Some((plus, minus))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleMode {
    /// Break every cycle.
    All,
    /// Only break cycles that violate the circuit condition for these rates.
    Violating,
}

/// Step 3: add species until the cycle space is trivial, or, in
/// [`CycleMode::Violating`], until every remaining cycle is balanced.
/// Constrained columns are never touched. Returns `Err(NoProgress)` when
/// the remaining cycles live entirely on constrained columns.
pub fn break_cycles(
    draft: &mut Draft,
    forbidden: &BTreeSet<usize>,
    mode: CycleMode,
    log_ratios: Option<&[f64]>,
    db_tol: f64,
) -> Result<(), CompletionError> {
    while break_one_cycle(draft, forbidden, mode, log_ratios, db_tol)? {}
    Ok(())
}

/// A single Step 3 move: two species that lower the cycle space dimension
/// by one. Returns `Ok(false)` when no targeted cycle is left.
pub fn break_one_cycle(
    draft: &mut Draft,
    forbidden: &BTreeSet<usize>,
    mode: CycleMode,
    log_ratios: Option<&[f64]>,
    db_tol: f64,
) -> Result<bool, CompletionError> {
    let cycles = draft.cycles();
    let targets: Vec<&Vec<BigInt>> = match (mode, log_ratios) {
        (CycleMode::Violating, Some(w)) => {
            let v = circuit_condition(&cycles, w, db_tol);
            cycles
                .vectors
                .iter()
                .zip(&v.log_sums)
                .filter(|(_, s)| s.abs() > db_tol)
                .map(|(c, _)| c)
                .collect()
        }
        _ => cycles.vectors.iter().collect(),
    };
    if targets.is_empty() {
        return Ok(false);
    }
    let mv = if forbidden.is_empty() {
        targets
            .iter()
            .find_map(|c| split_row_move(draft, c).map(|m| (m, (*c).clone())))
    } else {
        targets
            .iter()
            .find_map(|c| free_pair_move(c, forbidden).map(|m| (m, (*c).clone())))
    };
    let Some(((w1, w2), c)) = mv else {
        return Err(CompletionError::NoProgress);
    };
    let before = cycles.dim();
    draft.push_species(&w1, Step::CycleBreak, Trigger::Cycle(c.clone()));
    draft.push_species(&w2, Step::CycleBreak, Trigger::Cycle(c));
    let after = draft.cycles().dim();
    if after + 1 != before {
        return Err(CompletionError::Falsified(format!(
            "cycle space dimension went from {before} to {after}"
        )));
    }
    if !draft.is_conservative() {
        return Err(CompletionError::Falsified(
            "cycle breaking lost conservativeness".into(),
        ));
    }
    if draft.has_sources_or_sinks() {
        return Err(CompletionError::Falsified(
            "cycle breaking created a source or sink".into(),
        ));
    }
    Ok(true)
}

/// Reactions to be left untouched, as indices into `ℛ` closed under reversal.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConstraintSet {
    constrained: BTreeSet<usize>,
}

impl ConstraintSet {
    pub fn new(net: &ChemicalNetwork, reactions: &[usize]) -> Result<Self, CompletionError> {
        let mut constrained = BTreeSet::new();
        for &k in reactions {
            if k >= net.num_reactions() {
                return Err(CompletionError::UnknownConstraint(k));
            }
            constrained.insert(k);
            if let Some(r) = net.reverse_of(k) {
                constrained.insert(r);
            }
        }
        Ok(Self { constrained })
    }

    pub fn reactions(&self) -> &BTreeSet<usize> {
        &self.constrained
    }

    pub fn is_empty(&self) -> bool {
        self.constrained.is_empty()
    }

    /// Constrained positions within `ℛ_s`.
    pub fn positions(&self, net: &ChemicalNetwork) -> BTreeSet<usize> {
        net.nonreverse_set()
            .into_iter()
            .enumerate()
            .filter(|(_, k)| self.constrained.contains(k))
            .map(|(p, _)| p)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionCertificate {
    pub reduction_matches: bool,
    pub rates_round_trip: bool,
    pub detailed_balanced: bool,
    pub conservative: bool,
    pub no_sources_sinks: bool,
    pub acyclic: bool,
    /// `None` when no constraints were supplied.
    pub admissible: Option<bool>,
    pub failures: Vec<String>,
}

impl CompletionCertificate {
    /// Completion of the original system and closed.
    pub fn all_green(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct CompletionResult {
    pub completed: KineticSystem,
    /// Concentration used for every added species when reducing back.
    pub frozen_defaults: Vec<(usize, f64)>,
    pub provenance: Vec<AuxSpecies>,
    pub certificate: CompletionCertificate,
}

impl CompletionResult {
    pub fn added_species(&self) -> usize {
        self.provenance.len()
    }
}

/// Turns a draft into a network whose reaction `r` projects onto reaction
/// `r` of the original, with the same rate.
fn assemble(sys: &KineticSystem, draft: &Draft) -> Result<KineticSystem, CompletionError> {
    let net = sys.network();
    let reps = net.nonreverse_set();
    let mut reactions = Vec::with_capacity(net.num_reactions());
    for k in 0..net.num_reactions() {
        let (p, sign) = match reps.iter().position(|&r| r == k) {
            Some(p) => (p, 1),
            None => {
                let rev = net.reverse_of(k).ok_or(CompletionError::NotBidirectional)?;
                let p = reps
                    .iter()
                    .position(|&r| r == rev)
                    .expect("reverse is a representative");
                (p, -1)
            }
        };
        reactions.push(Reaction::new(
            draft.columns[p].iter().map(|x| sign * x).collect(),
        ));
    }
    let completed = ChemicalNetwork::new(draft.species.clone(), reactions)?;
    Ok(KineticSystem::new(completed, sys.rates().clone())?)
}

fn finish(
    sys: &KineticSystem,
    draft: Draft,
    constraints: Option<&ConstraintSet>,
    db_tol: f64,
) -> Result<CompletionResult, CompletionError> {
    let completed = assemble(sys, &draft)?;
    let frozen_defaults = (draft.original_species..draft.num_species())
        .map(|s| (s, 1.0))
        .collect();
    let mut result = CompletionResult {
        completed,
        frozen_defaults,
        provenance: draft.provenance,
        certificate: CompletionCertificate {
            reduction_matches: false,
            rates_round_trip: false,
            detailed_balanced: false,
            conservative: false,
            no_sources_sinks: false,
            acyclic: false,
            admissible: None,
            failures: Vec::new(),
        },
    };
    result.certificate = verify_completion(sys, &result, constraints, db_tol);
    Ok(result)
}

/// Steps 1–3 without constraints. With `minimal`, cycles that already
/// satisfy the circuit condition are kept.
pub fn complete_closed(
    sys: &KineticSystem,
    minimal: bool,
    db_tol: f64,
) -> Result<CompletionResult, CompletionError> {
    let mut draft = Draft::from_network(sys.network())?;
    eliminate_sources_sinks(&mut draft);
    make_conservative(&mut draft)?;
    let ratios = sys.log_rate_ratios()?;
    let mode = if minimal {
        CycleMode::Violating
    } else {
        CycleMode::All
    };
    break_cycles(&mut draft, &BTreeSet::new(), mode, Some(&ratios), db_tol)?;
    finish(sys, draft, None, db_tol)
}

#[derive(Debug, Clone)]
pub enum AdmissibleOutcome {
    Completed(CompletionResult),
    /// A cycle made only of constrained reactions that violates the circuit
    /// condition, over original `ℛ_s` positions.
    Impossible {
        cycle: Vec<BigInt>,
        circuit_value: f64,
    },
    NotDecided {
        attempt: Option<CompletionResult>,
        reason: String,
    },
}

/// Completion that leaves the constrained reactions untouched.
pub fn complete_admissible(
    sys: &KineticSystem,
    constraints: &ConstraintSet,
    db_tol: f64,
) -> Result<AdmissibleOutcome, CompletionError> {
    let net = sys.network();
    if !net.is_bidirectional() {
        return Err(CompletionError::NotBidirectional);
    }
    let forbidden = constraints.positions(net);
    let ratios = sys.log_rate_ratios()?;
    let r = net.reaction_matrix();

    // Cycles supported on constrained reactions only.
    let fixed: Vec<usize> = forbidden.iter().copied().collect();
    if !fixed.is_empty() {
        let sub = RationalMatrix::from_i64_columns(
            net.num_species(),
            &fixed
                .iter()
                .map(|&p| net.reactions()[net.nonreverse_set()[p]].coeffs().to_vec())
                .collect::<Vec<_>>(),
        );
        let local = nullspace(&sub);
        let local_ratios: Vec<f64> = fixed.iter().map(|&p| ratios[p]).collect();
        let verdict = circuit_condition(&local, &local_ratios, db_tol);
        if let Some(v) = verdict.violated_cycles.first() {
            let mut cycle = vec![BigInt::zero(); r.cols()];
            for (&p, x) in fixed.iter().zip(&v.cycle) {
                cycle[p] = x.clone();
            }
            return Ok(AdmissibleOutcome::Impossible {
                cycle,
                circuit_value: v.circuit_value,
            });
        }
    }

    let sufficient = admissible_sufficient(net, constraints);

    let mut draft = Draft::from_network(net)?;
    eliminate_sources_sinks(&mut draft);
    let attempt = make_conservative(&mut draft).and_then(|_| {
        match break_cycles(
            &mut draft,
            &forbidden,
            CycleMode::All,
            Some(&ratios),
            db_tol,
        ) {
            Err(CompletionError::NoProgress) => Ok(()),
            other => other,
        }
    });
    if let Err(e) = attempt {
        return Ok(AdmissibleOutcome::NotDecided {
            attempt: None,
            reason: e.to_string(),
        });
    }
    let result = finish(sys, draft, Some(constraints), db_tol)?;
    if result.certificate.all_green() {
        Ok(AdmissibleOutcome::Completed(result))
    } else {
        let reason = if sufficient {
            format!(
                "sufficient conditions hold but the certificate failed: {}",
                result.certificate.failures.join("; ")
            )
        } else {
            result.certificate.failures.join("; ")
        };
        Ok(AdmissibleOutcome::NotDecided {
            attempt: Some(result),
            reason,
        })
    }
}

/// Sufficient conditions for an admissible completion: constrained reactions
/// lie on no cycle, have both sides nonempty, and only involve species
/// reached by a nonnegative conservation law.
pub fn admissible_sufficient(net: &ChemicalNetwork, constraints: &ConstraintSet) -> bool {
    let report = structure(net);
    let forbidden = constraints.positions(net);
    let reps = net.nonreverse_set();
    let unreached = unreached_species(&report.conservation_basis);
    !report.cycle_support.iter().any(|p| forbidden.contains(p))
        && forbidden.iter().all(|&p| {
            let c = net.reactions()[reps[p]].coeffs();
            c.iter().any(|&x| x < 0)
                && c.iter().any(|&x| x > 0)
                && unreached.iter().all(|&u| c[u] == 0)
        })
}

/// Independently re-checks that `candidate` completes `original` into a
/// closed system, and respects `constraints` if given.
pub fn verify_completion(
    original: &KineticSystem,
    candidate: &CompletionResult,
    constraints: Option<&ConstraintSet>,
    db_tol: f64,
) -> CompletionCertificate {
    let mut failures = Vec::new();
    let orig = original.network();
    let comp = candidate.completed.network();
    let n = orig.num_species();

    let prefix_ok = comp.num_species() >= n && comp.species()[..n] == orig.species()[..];
    if !prefix_ok {
        failures.push("original species are not a prefix of the completed species".into());
    }
    let aux: Vec<usize> = (n..comp.num_species()).collect();

    // Ω-reduction and rates.
    let mut reduction_matches = false;
    let mut rates_round_trip = false;
    if prefix_ok && aux.is_empty() {
        reduction_matches = same_reaction_set(orig.reactions(), comp.reactions());
        rates_round_trip = reduction_matches
            && orig.reactions().iter().enumerate().all(|(k, r)| {
                comp.reaction_index(r.coeffs())
                    .is_some_and(|c| candidate.completed.rates().get(c) == original.rates().get(k))
            });
    } else if prefix_ok {
        match reduce_network(comp, &aux) {
            Ok(rmap) => {
                let projected: Vec<Reaction> = rmap.reduced_network.reactions().to_vec();
                let one_to_one = rmap
                    .columns
                    .iter()
                    .all(|c| c.forward.len() == 1 && c.reverse.len() <= 1);
                reduction_matches = rmap.zero_reduced.is_empty()
                    && one_to_one
                    && same_reaction_set(orig.reactions(), &projected);
                let defaults = FrozenConcentrations::from_pairs(&candidate.frozen_defaults);
                if let (true, Ok(defaults)) = (reduction_matches, defaults) {
                    if let Ok(k) = reduced_rates(&candidate.completed, &rmap, &defaults) {
                        rates_round_trip = projected.iter().enumerate().all(|(i, r)| {
                            orig.reaction_index(r.coeffs())
                                .is_some_and(|o| original.rates().get(o) == k.get(i))
                        });
                    }
                }
            }
            Err(e) => failures.push(format!("Ω-reduction failed: {e}")),
        }
    }
    if !reduction_matches {
        failures.push("Ω-reduction does not reproduce the original network one-to-one".into());
    }
    if !rates_round_trip {
        failures.push("reduced rates do not reproduce the original rates".into());
    }

    let report = structure(comp);
    let detailed_balanced =
        detailed_balance(&candidate.completed, db_tol).is_ok_and(|v| v.balanced);
    if !detailed_balanced {
        failures.push("completed system is not detailed balanced".into());
    }
    let conservative = report.conservative;
    if !conservative {
        failures.push("completed network is not conservative".into());
    }
    let no_sources_sinks = has_sources_or_sinks(comp).is_empty();
    if !no_sources_sinks {
        failures.push("completed network has sources or sinks".into());
    }
    let acyclic = report.cycle_basis.is_empty();

    let admissible = constraints.map(|cs| {
        cs.reactions().iter().all(|&k| {
            let v = orig.reactions()[k].coeffs();
            comp.reactions()
                .iter()
                .filter(|r| r.coeffs()[..n.min(r.len())] == *v)
                .all(|r| r.coeffs()[n..].iter().all(|&x| x == 0))
        })
    });
    if admissible == Some(false) {
        failures.push("an added species takes part in a constrained reaction".into());
    }

    CompletionCertificate {
        reduction_matches,
        rates_round_trip,
        detailed_balanced,
        conservative,
        no_sources_sinks,
        acyclic,
        admissible,
        failures,
    }
}

fn same_reaction_set(a: &[Reaction], b: &[Reaction]) -> bool {
    let sa: BTreeSet<&[i64]> = a.iter().map(Reaction::coeffs).collect();
    let sb: BTreeSet<&[i64]> = b.iter().map(Reaction::coeffs).collect();
    sa == sb && a.len() == b.len()
}

/// Circuit value `Π (K_R/K_{−R})^{c(j)}` of a cycle over `ℛ_s` positions.
pub fn circuit_value(sys: &KineticSystem, cycle: &[BigInt]) -> Result<f64, CompletionError> {
    let ratios = sys.log_rate_ratios()?;
    let s: f64 = cycle
        .iter()
        .zip(&ratios)
        .map(|(c, r)| bigint_to_f64(c) * r)
        .sum();
    Ok(s.exp())
}

/// Whether a cycle vector only uses the given positions.
pub fn supported_within(cycle: &[BigInt], positions: &BTreeSet<usize>) -> bool {
    cycle
        .iter()
        .enumerate()
        .all(|(i, c)| c.is_zero() || positions.contains(&i))
}

/// Rates with every pair's forward rate scaled so that no cycle balances
/// generically; used in examples and tests.
pub fn skewed_rates(net: &ChemicalNetwork, skew: f64) -> RateFunction {
    let reps = net.nonreverse_set();
    let values = (0..net.num_reactions())
        .map(|k| {
            let pos = reps.iter().position(|&r| r == k);
            match pos {
                Some(p) => 1.0 + skew * (p + 1) as f64,
                None => 1.0,
            }
        })
        .collect();
    RateFunction::new(values).expect("positive by construction")
}
