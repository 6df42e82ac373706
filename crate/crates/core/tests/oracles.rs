//! Checks against values computed independently of the library's own code paths.

mod common;

use calparity::cost::{trivial_cost, CostPair};
use calparity::dataset::{synth_calibrated, synth_miscalibrated, GroupData, ScoreDistribution, SynthSpec};
use calparity::impossibility::{build_matrix, exact_impossibility_check};
use calparity::metrics::{calibration_gap, Binning};
use calparity::parity::{apply_monte_carlo, optimality_audit, plan_withholding, ApplicationMode, InterpolationPlan};
use calparity::scene::{build_scene, ScenePoint};
use calparity::{CostSpec, RatePoint};
use rand::Rng;

use common::{exactly_calibrated_group, random_group, random_spec, rng};

/// Direct rate computation by loops over the raw rows.
fn brute_rates(g: &GroupData) -> (f64, f64) {
    let (mut fp, mut neg, mut fnr, mut pos) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for s in g.samples() {
        if s.label == 0 {
            fp += s.score;
            neg += 1.0;
        } else {
            fnr += 1.0 - s.score;
            pos += 1.0;
        }
    }
    (fp / neg, fnr / pos)
}

/// Exact-unique gap by an O(n^2) scan.
fn brute_gap(g: &GroupData) -> f64 {
    let n = g.len() as f64;
    let mut seen: Vec<f64> = Vec::new();
    let mut total = 0.0f64;
    for s in g.samples() {
        if seen.contains(&s.score) {
            continue;
        }
        seen.push(s.score);
        let same: Vec<_> = g.samples().iter().filter(|t| t.score == s.score).collect();
        let frac = same.iter().filter(|t| t.label == 1).count() as f64 / same.len() as f64;
        total += same.len() as f64 / n * (frac - s.score).abs();
    }
    total
}

#[test]
fn rates_and_gap_match_brute_force() {
    let mut r = rng(100);
    for _ in 0..300 {
        let g = random_group(&mut r, "g", 120);
        let (fp, fnr) = brute_rates(&g);
        let rates = g.rates();
        assert!((rates.c_fp - fp).abs() < 1e-12);
        assert!((rates.c_fn - fnr).abs() < 1e-12);
        assert!((g.calibration_gap() - brute_gap(&g)).abs() < 1e-12);
    }
}

#[test]
fn exactly_calibrated_group_has_zero_gap_and_calibrated_rates() {
    let g = exactly_calibrated_group("g", 10, &[1, 2, 0, 3, 1, 0, 2, 0, 1, 1, 1]);
    assert!(g.calibration_gap() < 1e-15);
    let mu = g.base_rate();
    let r = g.rates();
    assert!((mu * r.c_fn - (1.0 - mu) * r.c_fp).abs() < 1e-12);
}

#[test]
fn synthetic_calibrated_data_is_nearly_calibrated() {
    for (seed, dist) in [
        (1u64, ScoreDistribution::UniformGrid(vec![0.1, 0.3, 0.5, 0.7, 0.9])),
        (2, ScoreDistribution::PointMass(0.25)),
        (3, ScoreDistribution::UniformGrid(vec![0.05, 0.95])),
    ] {
        let n = 20_000;
        let bins = dist.support().unwrap().len() as f64;
        let g = synth_calibrated(&SynthSpec::new("s", n, dist.clone(), seed)).unwrap();
        let gap = g.calibration_gap();
        assert!(gap <= 4.0 * (bins / n as f64).sqrt(), "{dist}: gap {gap}");
        let mean: f64 = dist.support().unwrap().iter().sum::<f64>() / bins;
        assert!((g.base_rate() - mean).abs() < 4.0 / (n as f64).sqrt());
    }
}

#[test]
fn shifted_point_mass_has_gap_near_shift() {
    let spec = SynthSpec::new("s", 50_000, ScoreDistribution::PointMass(0.5), 8).with_shift(0.2);
    assert!((spec.population_calibration_gap().unwrap() - 0.2).abs() < 1e-12);
    let g = synth_miscalibrated(&spec).unwrap();
    assert!((g.calibration_gap() - 0.2).abs() < 4.0 / (50_000f64).sqrt());
    assert!((g.base_rate() - 0.7).abs() < 4.0 / (50_000f64).sqrt());
}

#[test]
fn fixed_width_gap_never_exceeds_exact_gap() {
    let mut r = rng(101);
    for _ in 0..200 {
        let g = random_group(&mut r, "g", 150);
        let exact = g.calibration_gap();
        for b in [1, 2, 5, 10] {
            let fixed = calibration_gap(g.samples(), Binning::FixedWidth(b)).unwrap().gap;
            assert!(fixed <= exact + 1e-12);
        }
    }
}

#[test]
fn trivial_cost_dominates_every_calibrated_group() {
    let mut r = rng(102);
    for _ in 0..200 {
        let copies: Vec<usize> = (0..=10).map(|_| r.random_range(0..4)).collect();
        let positives: usize = copies.iter().enumerate().map(|(k, c)| k * c).sum();
        let negatives: usize = copies.iter().enumerate().map(|(k, c)| (10 - k) * c).sum();
        if positives == 0 || negatives == 0 {
            continue;
        }
        let g = exactly_calibrated_group("g", 10, &copies);
        for _ in 0..10 {
            let spec = random_spec(&mut r);
            let c = spec.evaluate(g.rates());
            assert!(c <= trivial_cost(g.base_rate(), &spec).unwrap() + 1e-12);
        }
    }
}

#[test]
fn monte_carlo_withholds_about_alpha() {
    let g = synth_calibrated(&SynthSpec::new("g", 100_000, ScoreDistribution::Beta { alpha: 2.0, beta: 2.0 }, 3))
        .unwrap();
    let plan = InterpolationPlan::for_group(&g, 0.5, ApplicationMode::MonteCarlo { seed: 42 }).unwrap();
    let real = apply_monte_carlo(&g, &plan).unwrap();
    let frac = real.withheld.iter().filter(|&&w| w).count() as f64 / g.len() as f64;
    assert!((frac - 0.5).abs() < 0.01);
    for (s, (orig, &w)) in real.group.samples().iter().zip(g.samples().iter().zip(&real.withheld)) {
        assert_eq!(s.score, if w { g.base_rate() } else { orig.score });
        assert_eq!(s.label, orig.label);
    }
    let other = InterpolationPlan::for_group(&g, 0.5, ApplicationMode::MonteCarlo { seed: 43 }).unwrap();
    assert_ne!(apply_monte_carlo(&g, &other).unwrap().withheld, real.withheld);
}

#[test]
fn deterministic_plan_rejects_monte_carlo_application() {
    let g = GroupData::from_parts("g", &[0.2, 0.8], &[0, 1]).unwrap();
    let plan = InterpolationPlan::for_group(&g, 0.5, ApplicationMode::DeterministicMixture).unwrap();
    assert!(apply_monte_carlo(&g, &plan).is_err());
}

#[test]
fn exact_check_matches_hand_solved_system() {
    // perfect classifiers satisfy everything with zero rates
    let g1 = GroupData::from_parts("a", &[0.0, 0.0, 0.0, 1.0], &[0, 0, 0, 1]).unwrap();
    let g2 = GroupData::from_parts("b", &[0.0, 1.0], &[0, 1]).unwrap();
    let pair = CostPair::uniform(CostSpec::new(1.0, 0.0).unwrap());
    let pair_prime = CostPair::uniform(CostSpec::new(0.0, 1.0).unwrap());
    let v = exact_impossibility_check(&g1, &g2, &pair, &pair_prime, 1e-9).unwrap();
    assert!(v.satisfied);
    assert_eq!(v.max_rate, 0.0);

    // calibrated but imperfect classifiers with different base rates fail
    let t1 = g1.trivialized();
    let t2 = g2.trivialized();
    let v = exact_impossibility_check(&t1, &t2, &pair, &pair_prime, 1e-6).unwrap();
    assert!(!v.satisfied);

    // equal base rates are out of scope
    let g3 = GroupData::from_parts("c", &[0.0, 1.0], &[0, 1]).unwrap();
    assert!(exact_impossibility_check(&g2, &g3, &pair, &pair_prime, 1e-6).is_err());
    // tolerances below the floor are refused
    assert!(exact_impossibility_check(&g1, &g2, &pair, &pair_prime, 1e-12).is_err());
}

#[test]
fn matrix_determinant_is_nonzero_exactly_when_constraints_separate() {
    let mut r = rng(103);
    for _ in 0..500 {
        let (mu1, mu2): (f64, f64) = (r.random_range(0.05..0.95), r.random_range(0.05..0.95));
        if (mu1 - mu2).abs() < 0.05 {
            continue;
        }
        let pair = CostPair::new(random_spec(&mut r), random_spec(&mut r));
        let pair_prime = CostPair::new(random_spec(&mut r), random_spec(&mut r));
        let m = build_matrix(mu1, mu2, &pair, &pair_prime).unwrap();
        if m.determinant().abs() > 1e-6 {
            assert!(m.distinct);
        }
        if !m.distinct {
            assert!(m.determinant().abs() < 1e-9);
        }
    }
}

#[test]
fn audit_flags_only_claims_that_calibration_rules_out() {
    let spec = CostSpec::new(1.0, 1.0).unwrap();
    let mu = 0.4;
    let reference = RatePoint::new(0.3, 0.45);
    // far better FP at no lower cost is impossible for calibrated classifiers
    let v = optimality_audit(RatePoint::new(0.05, 0.71), reference, mu, 0.01, &spec).unwrap();
    assert!(v.beats_fp_margin && v.cost_not_lower && v.flagged);
    assert!((v.fp_margin - 0.04 / 0.6).abs() < 1e-15);
    assert!((v.fn_margin - 0.1).abs() < 1e-15);
    // the same candidate with lower cost is fine
    let v = optimality_audit(RatePoint::new(0.05, 0.6), reference, mu, 0.01, &spec).unwrap();
    assert!(!v.flagged);
    // a small improvement inside the margin is never flagged
    let v = optimality_audit(RatePoint::new(0.28, 0.5), reference, mu, 0.01, &spec).unwrap();
    assert!(!v.flagged);
}

#[test]
fn scene_post_processed_point_shares_level_curve() {
    let mut r = rng(104);
    let mut checked = 0;
    while checked < 50 {
        let h1 = random_group(&mut r, "a", 100);
        let h2 = random_group(&mut r, "b", 100);
        let spec = random_spec(&mut r);
        let (c1, c2) = (spec.evaluate(h1.rates()), spec.evaluate(h2.rates()));
        let (h1, h2) = if c1 >= c2 { (h1, h2) } else { (h2, h1) };
        let out = plan_withholding(&h1, &spec, &h2, &spec, ApplicationMode::DeterministicMixture).unwrap();
        let Some(post) = out.post_rates else { continue };
        let extra = [ScenePoint::new("post_processed", h2.id(), post)];
        let scene = build_scene(&[h1.clone(), h2.clone()], &[spec, spec], &extra).unwrap();
        let curve = &scene.level_curves[0];
        let target = spec.evaluate(h1.rates());
        assert!((curve.c - target).abs() < 1e-12);
        let p = scene.points.last().unwrap().rate();
        assert!((spec.evaluate(p) - curve.c).abs() < 1e-12);
        // the mixture moves toward the trivial point, so when h2 is calibrated
        // the post-processed point stays on its calibrated line
        if h2.calibration_gap() == 0.0 {
            let mu = h2.base_rate();
            assert!((mu * p.c_fn - (1.0 - mu) * p.c_fp).abs() < 1e-12);
        }
        checked += 1;
    }
}
