use proptest::prelude::*;
use xvanon::rng::SeededRng;
use xvanon::stats::{cllr, cllr_min, eer, ks_statistic, ScoreSet};
use xvanon_oracles as oracle;

fn sample(rng: &mut SeededRng, n: usize, shift: f64, rounded: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v = shift + rng.standard_normal();
            if rounded {
                (v * 4.0).round() / 4.0
            } else {
                v
            }
        })
        .collect()
}

fn random_scores(rng: &mut SeededRng, i: usize) -> ScoreSet {
    let ng = 1 + rng.below(60) as usize;
    let ni = 1 + rng.below(200) as usize;
    let shift = 3.0 * rng.uniform() - 0.5;
    let rounded = i % 3 == 0;
    ScoreSet::new(sample(rng, ng, shift, rounded), sample(rng, ni, 0.0, rounded))
}

#[test]
fn ks_matches_double_loop() {
    let mut rng = SeededRng::new(1);
    for i in 0..100 {
        let (na, nb, shift) = (1 + rng.below(80) as usize, 1 + rng.below(80) as usize, rng.uniform());
        let a = sample(&mut rng, na, shift, i % 2 == 0);
        let b = sample(&mut rng, nb, 0.0, i % 2 == 0);
        let got = ks_statistic(&a, &b).unwrap();
        assert!((got - oracle::ks_double_loop(&a, &b)).abs() < 1e-12);
        assert_eq!(got, ks_statistic(&b, &a).unwrap());
    }
}

#[test]
fn eer_matches_threshold_sweep() {
    let mut rng = SeededRng::new(2);
    for i in 0..100 {
        let s = random_scores(&mut rng, i);
        let got = eer(&s).unwrap();
        let want = oracle::eer_sweep(&s.genuine, &s.impostor);
        assert!((got - want).abs() < 1e-9, "case {i}: {got} vs {want}");
    }
}

#[test]
fn eer_ignores_increasing_transforms() {
    let mut rng = SeededRng::new(3);
    for i in 0..100 {
        let s = random_scores(&mut rng, i);
        let base = eer(&s).unwrap();
        let t = |f: fn(f64) -> f64| ScoreSet::new(s.genuine.iter().map(|&x| f(x)).collect(), s.impostor.iter().map(|&x| f(x)).collect());
        for f in [|x: f64| 2.5 * x - 1.0, |x: f64| x.powi(3), |x: f64| 1.0 / (1.0 + (-x).exp())] {
            assert!((eer(&t(f)).unwrap() - base).abs() < 1e-9);
        }
    }
}

#[test]
fn cllr_min_bounds_and_invariance() {
    let mut rng = SeededRng::new(4);
    for i in 0..100 {
        let s = random_scores(&mut rng, i);
        let min = cllr_min(&s).unwrap();
        assert!(min <= cllr(&s).unwrap() + 1e-12);
        assert!((0.0..=1.0 + 1e-9).contains(&min));
        let t = |f: fn(f64) -> f64| ScoreSet::new(s.genuine.iter().map(|&x| f(x)).collect(), s.impostor.iter().map(|&x| f(x)).collect());
        for f in [|x: f64| 0.3 * x + 7.0, |x: f64| x.powi(3), |x: f64| 1.0 / (1.0 + (-x).exp())] {
            assert!((cllr_min(&t(f)).unwrap() - min).abs() < 1e-9);
        }
    }
}

#[test]
fn zero_llrs_cost_exactly_one() {
    for (g, i) in [(1, 1), (3, 17), (250, 1000)] {
        assert_eq!(cllr(&ScoreSet::new(vec![0.0; g], vec![0.0; i])).unwrap(), 1.0);
    }
}

proptest! {
    #[test]
    fn ks_is_a_symmetric_distance(a in prop::collection::vec(-5.0f64..5.0, 1..40), b in prop::collection::vec(-5.0f64..5.0, 1..40)) {
        let d = ks_statistic(&a, &b).unwrap();
        prop_assert_eq!(d, ks_statistic(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn eer_is_a_rate(g in prop::collection::vec(-5.0f64..5.0, 1..30), i in prop::collection::vec(-5.0f64..5.0, 1..30)) {
        let e = eer(&ScoreSet::new(g, i)).unwrap();
        prop_assert!((0.0..=1.0).contains(&e));
    }
}
