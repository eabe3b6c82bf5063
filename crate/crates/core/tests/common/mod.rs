//! Seeded generators shared by the integration tests.
#![allow(dead_code)]

use crnbalance::kinetics::{KineticSystem, RateFunction};
use crnbalance::network::ChemicalNetwork;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Six species, six reversible pairs, two independent cycles.
pub fn two_cycle_network() -> ChemicalNetwork {
    ChemicalNetwork::from_pairs(
        ChemicalNetwork::numbered_species(6),
        &[
            vec![-1, 1, 0, 0, -1, 0],
            vec![-1, 1, 0, 0, 0, -1],
            vec![0, -1, 1, 0, 0, 0],
            vec![-1, 0, 0, 1, 0, 0],
            vec![0, 0, -1, 1, 0, 1],
            vec![0, 0, -1, 1, 1, 0],
        ],
    )
    .unwrap()
}

pub fn ring() -> ChemicalNetwork {
    ChemicalNetwork::from_pairs(
        ChemicalNetwork::numbered_species(4),
        &[
            vec![-1, 1, 0, 0],
            vec![0, -1, 1, 0],
            vec![0, 0, -1, 1],
            vec![1, 0, 0, -1],
        ],
    )
    .unwrap()
}

pub fn chain() -> ChemicalNetwork {
    ChemicalNetwork::from_pairs(
        ChemicalNetwork::numbered_species(3),
        &[vec![-1, 1, 0], vec![0, -1, 1]],
    )
    .unwrap()
}

/// Bidirectional network on `2..=max_species` species with sparse
/// coefficients in `−2..=2`.
pub fn random_network(rng: &mut ChaCha8Rng, max_species: usize) -> ChemicalNetwork {
    loop {
        let n = rng.gen_range(2..=max_species);
        let pairs = rng.gen_range(1..=n + 1);
        let forward: Vec<Vec<i64>> = (0..pairs)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        if rng.gen_bool(0.45) {
                            *[-2, -1, -1, 1, 1, 2].choose(rng).unwrap()
                        } else {
                            0
                        }
                    })
                    .collect()
            })
            .collect();
        if let Ok(net) = ChemicalNetwork::from_pairs(ChemicalNetwork::numbered_species(n), &forward)
        {
            return net;
        }
    }
}

/// Isomerizations along a random spanning tree plus a few chords.
pub fn random_isomerization_network(rng: &mut ChaCha8Rng, max_species: usize) -> ChemicalNetwork {
    let n = rng.gen_range(2..=max_species);
    let mut forward = Vec::new();
    for j in 1..n {
        let i = rng.gen_range(0..j);
        forward.push(isomerization(n, i, j));
    }
    for _ in 0..rng.gen_range(0..=2) {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        let v = isomerization(n, i.min(j), i.max(j));
        let rev: Vec<i64> = v.iter().map(|x| -x).collect();
        if i != j && !forward.contains(&v) && !forward.contains(&rev) {
            forward.push(v);
        }
    }
    ChemicalNetwork::from_pairs(ChemicalNetwork::numbered_species(n), &forward).unwrap()
}

fn isomerization(n: usize, from: usize, to: usize) -> Vec<i64> {
    let mut v = vec![0; n];
    v[from] = -1;
    v[to] = 1;
    v
}

/// Detailed balanced rates: random forward rates and a random energy `E`,
/// reverse rates `K_{−R} = K_R e^{R·E}`.
pub fn db_rates(rng: &mut ChaCha8Rng, net: &ChemicalNetwork) -> RateFunction {
    let e: Vec<f64> = (0..net.num_species())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let mut values = vec![0.0; net.num_reactions()];
    for (f, r) in net.pairs() {
        let kf = rng.gen_range(0.5..2.0);
        values[f] = kf;
        if let Some(r) = r {
            let re: f64 = net.reactions()[f]
                .coeffs()
                .iter()
                .zip(&e)
                .map(|(&c, x)| c as f64 * x)
                .sum();
            values[r] = kf * re.exp();
        }
    }
    RateFunction::new(values).unwrap()
}

pub fn random_rates(rng: &mut ChaCha8Rng, net: &ChemicalNetwork) -> RateFunction {
    RateFunction::new(
        (0..net.num_reactions())
            .map(|_| rng.gen_range(0.2..5.0))
            .collect(),
    )
    .unwrap()
}

pub fn db_system(rng: &mut ChaCha8Rng, net: ChemicalNetwork) -> KineticSystem {
    let rates = db_rates(rng, &net);
    KineticSystem::new(net, rates).unwrap()
}

/// Largest `|ln K_R n^{I(R)} − ln K_{−R} n^{F(R)}|` over the pairs.
pub fn flux_balance_gap(sys: &KineticSystem, n: &[f64]) -> f64 {
    let net = sys.network();
    let mut worst: f64 = 0.0;
    for (f, r) in net.pairs() {
        let Some(r) = r else { continue };
        let c = net.reactions()[f].coeffs();
        let log_monomial = |sign: i64| -> f64 {
            c.iter()
                .zip(n)
                .filter(|(&x, _)| sign * x < 0)
                .map(|(&x, &ni)| x.abs() as f64 * ni.ln())
                .sum()
        };
        let fwd = sys.rates().get(f).ln() + log_monomial(1);
        let bwd = sys.rates().get(r).ln() + log_monomial(-1);
        worst = worst.max((fwd - bwd).abs());
    }
    worst
}

/// Bidirectional network with more pairs than species and no source or
/// sink, so cycles survive the first completion step.
pub fn random_cyclic_network(rng: &mut ChaCha8Rng, max_species: usize) -> ChemicalNetwork {
    loop {
        let n = rng.gen_range(2..=max_species);
        let pairs = rng.gen_range(n..=n + 2);
        let mut forward = Vec::with_capacity(pairs);
        while forward.len() < pairs {
            let v: Vec<i64> = (0..n)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        *[-2, -1, -1, 1, 1, 2].choose(rng).unwrap()
                    } else {
                        0
                    }
                })
                .collect();
            if v.iter().any(|&x| x < 0) && v.iter().any(|&x| x > 0) {
                forward.push(v);
            }
        }
        if let Ok(net) = ChemicalNetwork::from_pairs(ChemicalNetwork::numbered_species(n), &forward)
        {
            return net;
        }
    }
}
