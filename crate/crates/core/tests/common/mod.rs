#![allow(dead_code)]

use calparity::{CostSpec, GroupData, Sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random group with a handful of score atoms. Labels follow
/// `Bernoulli(clamp(p + shift))`; roughly half the groups get a nonzero shift.
pub fn random_group(rng: &mut impl Rng, id: &str, n_max: usize) -> GroupData {
    let n = rng.random_range(4..=n_max.max(4));
    let atoms = rng.random_range(1..=8);
    let grid = rng.random_bool(0.5);
    let support: Vec<f64> = (0..atoms)
        .map(|_| {
            if grid {
                rng.random_range(0..=20) as f64 / 20.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    let shift = if rng.random_bool(0.5) {
        rng.random_range(-0.3..0.3)
    } else {
        0.0
    };
    let mut samples: Vec<Sample> = (0..n)
        .map(|_| {
            let p = support[rng.random_range(0..support.len())];
            let q = (p + shift).clamp(0.0, 1.0);
            Sample { score: p, label: u8::from(rng.random::<f64>() < q) }
        })
        .collect();
    // both classes must be present
    samples[0].label = 0;
    samples[1].label = 1;
    GroupData::new(id, samples).unwrap()
}

pub fn random_spec(rng: &mut impl Rng) -> CostSpec {
    loop {
        let a = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..3.0) };
        let b = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..3.0) };
        if let Ok(spec) = CostSpec::new(a, b) {
            return spec;
        }
    }
}

/// A calibrated discrete score distribution with mean exactly `mu` (up to
/// rounding), as `(score, weight)` atoms. Positives at score `p` make up a
/// fraction `p` of that atom.
pub fn calibrated_distribution(rng: &mut impl Rng, mu: f64) -> Vec<(f64, f64)> {
    let k = rng.random_range(1..=8);
    let mut atoms: Vec<(f64, f64)> = (0..k)
        .map(|_| (rng.random::<f64>(), rng.random_range(0.01..1.0)))
        .collect();
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    for a in &mut atoms {
        a.1 /= total;
    }
    let mean: f64 = atoms.iter().map(|(p, w)| p * w).sum();
    if mean > mu {
        // mix in mass at 0
        let keep = mu / mean;
        for a in &mut atoms {
            a.1 *= keep;
        }
        atoms.push((0.0, 1.0 - keep));
    } else if mean < mu {
        // mix in mass at 1
        let lambda = (mu - mean) / (1.0 - mean);
        for a in &mut atoms {
            a.1 *= 1.0 - lambda;
        }
        atoms.push((1.0, lambda));
    }
    atoms
}

/// Generalized rates of a calibrated distribution, straight from the
/// conditional-expectation definitions.
pub fn distribution_rates(atoms: &[(f64, f64)]) -> (f64, f64) {
    let neg_mass: f64 = atoms.iter().map(|(p, w)| w * (1.0 - p)).sum();
    let pos_mass: f64 = atoms.iter().map(|(p, w)| w * p).sum();
    let fp = atoms.iter().map(|(p, w)| w * (1.0 - p) * p).sum::<f64>() / neg_mass;
    let fnr = atoms.iter().map(|(p, w)| w * p * (1.0 - p)).sum::<f64>() / pos_mass;
    (fp, fnr)
}

/// A finite group that is exactly calibrated: for each score `k/d` it holds
/// `d` samples, `k` of them positive, repeated `copies[k]` times.
pub fn exactly_calibrated_group(id: &str, denominator: u32, copies: &[usize]) -> GroupData {
    let mut samples = Vec::new();
    for (k, &c) in copies.iter().enumerate() {
        let score = k as f64 / denominator as f64;
        for _ in 0..c {
            for j in 0..denominator {
                samples.push(Sample { score, label: u8::from(j < k as u32) });
            }
        }
    }
    GroupData::new(id, samples).unwrap()
}
