use evjoint::crf::{num_params, objective_into, CrfInstance};
use evjoint::features::FeatureVector;
use evjoint::optim::{check_gradient, lbfgs_minimize, LbfgsConfig, StopReason};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn quadratic(c: &[f64]) -> impl FnMut(&[f64], &mut [f64]) -> f64 + '_ {
    move |w, g| {
        let mut v = 0.0;
        for i in 0..w.len() {
            g[i] = 2.0 * (w[i] - c[i]);
            v += (w[i] - c[i]).powi(2);
        }
        v
    }
}

fn rosenbrock(w: &[f64], g: &mut [f64]) -> f64 {
    let (x, y) = (w[0], w[1]);
    g[0] = -2.0 * (1.0 - x) - 400.0 * x * (y - x * x);
    g[1] = 200.0 * (y - x * x);
    (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)
}

fn crf_data(rng: &mut ChaCha8Rng, tags: usize, bits: u32) -> Vec<CrfInstance> {
    (0..6)
        .map(|_| {
            let len = rng.gen_range(2..7);
            CrfInstance {
                features: (0..len)
                    .map(|_| FeatureVector::from_raw((0..3).map(|_| (rng.gen_range(0..(1u32 << bits)), 1.0)).collect()))
                    .collect(),
                gold: (0..len).map(|_| rng.gen_range(0..tags)).collect(),
            }
        })
        .collect()
}

#[test]
fn quadratic_converges_quickly() {
    let c = [1.5, -2.0, 0.25, 3.0, -0.75];
    let (w, trace) = lbfgs_minimize(quadratic(&c), vec![0.0; 5], &LbfgsConfig::default()).unwrap();
    assert!(trace.steps.len() <= 10, "{} iterations", trace.steps.len());
    for (a, b) in w.iter().zip(&c) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn rosenbrock_reaches_optimum() {
    let cfg = LbfgsConfig { rel_tol: 0.0, grad_tol: 1e-10, ..LbfgsConfig::default() };
    let (w, trace) = lbfgs_minimize(rosenbrock, vec![-1.2, 1.0], &cfg).unwrap();
    assert!((w[0] - 1.0).abs() < 1e-5 && (w[1] - 1.0).abs() < 1e-5, "{w:?} after {:?}", trace.stop);
    assert!(trace.wolfe_violations(cfg.c1, cfg.c2, 1e-12).is_empty());
}

#[test]
fn rosenbrock_with_default_stopping() {
    let cfg = LbfgsConfig::default();
    let (w, _) = lbfgs_minimize(rosenbrock, vec![-1.2, 1.0], &cfg).unwrap();
    assert!((w[0] - 1.0).abs() < 1e-5 && (w[1] - 1.0).abs() < 1e-5, "{w:?}");
}

#[test]
fn crf_training_reaches_gradient_tolerance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (tags, bits) = (3, 6);
    let data = crf_data(&mut rng, tags, bits);
    // The relative-change stop fires first at its default; let the gradient test decide.
    let cfg = LbfgsConfig { rel_tol: 0.0, ..LbfgsConfig::default() };
    let f = |w: &[f64], g: &mut [f64]| objective_into(tags, bits, w, &data, 1.0, g);
    let (w, trace) = lbfgs_minimize(f, vec![0.0; num_params(tags, bits)], &cfg).unwrap();
    let mut g = vec![0.0; w.len()];
    objective_into(tags, bits, &w, &data, 1.0, &mut g);
    let gmax = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(gmax < 1e-5, "gradient {gmax} after {:?}", trace.stop);
    assert_eq!(trace.stop, StopReason::GradientTolerance);
    for s in &trace.steps[..trace.steps.len().min(10)] {
        assert!(s.value < s.prev_value);
    }
    assert!(trace.wolfe_violations(cfg.c1, cfg.c2, 1e-12).is_empty());
}

#[test]
fn non_finite_start_is_an_error() {
    let f = |_: &[f64], g: &mut [f64]| {
        g[0] = 0.0;
        f64::NAN
    };
    assert!(lbfgs_minimize(f, vec![0.0], &LbfgsConfig::default()).is_err());
}

#[test]
fn invalid_wolfe_constants_are_rejected() {
    let c = [1.0];
    let cfg = LbfgsConfig { c1: 0.9, c2: 0.1, ..LbfgsConfig::default() };
    assert!(lbfgs_minimize(quadratic(&c), vec![0.0], &cfg).is_err());
}

#[test]
fn inconsistent_gradient_flags_line_search_failure() {
    // Gradient points uphill, so no step along −g can decrease f.
    let f = |w: &[f64], g: &mut [f64]| {
        g[0] = -2.0 * w[0] - 1.0;
        w[0] * w[0]
    };
    let (w, trace) = lbfgs_minimize(f, vec![1.0], &LbfgsConfig::default()).unwrap();
    assert_eq!(trace.stop, StopReason::LineSearchFailed);
    assert_eq!(w, vec![1.0]);
}

#[test]
fn gradient_check_on_quadratic() {
    let c = [0.3, -1.0, 2.0];
    let err = check_gradient(quadratic(&c), &[1.0, 2.0, 3.0], 1e-5, 50, 0);
    assert!(err < 1e-9, "{err}");
}

#[test]
fn gradient_check_detects_corruption() {
    let c = [0.3, -1.0, 2.0, 4.0];
    let mut base = quadratic(&c);
    let corrupted = |w: &[f64], g: &mut [f64]| {
        let v = base(w, g);
        g[2] *= 2.0;
        v
    };
    let err = check_gradient(corrupted, &[1.0, 2.0, 3.0, -1.0], 1e-5, 50, 0);
    assert!(err > 0.1, "{err}");
}

#[test]
fn gradient_check_samples_active_coordinates() {
    // 10k coordinates, only 5 with a nonzero gradient, one of them wrong.
    let f = |w: &[f64], g: &mut [f64]| {
        g.iter_mut().for_each(|g| *g = 0.0);
        let mut v = 0.0;
        for i in (0..5).map(|k| k * 1999) {
            v += w[i] * w[i] * 3.0;
            g[i] = 6.0 * w[i];
        }
        g[1999 * 3] *= 1.5;
        v
    };
    let err = check_gradient(f, &vec![1.0; 10_000], 1e-5, 50, 9);
    assert!(err > 0.1, "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn convex_runs_decrease_and_satisfy_wolfe(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (tags, bits) = (rng.gen_range(2..5), 5);
        let data = crf_data(&mut rng, tags, bits);
        let lambda = rng.gen_range(0.1..3.0);
        let cfg = LbfgsConfig::default();
        let f = |w: &[f64], g: &mut [f64]| objective_into(tags, bits, w, &data, lambda, g);
        let (_, trace) = lbfgs_minimize(f, vec![0.0; num_params(tags, bits)], &cfg).unwrap();
        for s in &trace.steps {
            prop_assert!(s.value <= s.prev_value);
        }
        prop_assert!(trace.wolfe_violations(cfg.c1, cfg.c2, 1e-12).is_empty());
    }

    #[test]
    fn f32_quadratic_matches_f64(c in proptest::collection::vec(-5.0f64..5.0, 1..6)) {
        let c32: Vec<f32> = c.iter().map(|&x| x as f32).collect();
        let f = |w: &[f32], g: &mut [f32]| {
            let mut v = 0.0;
            for i in 0..w.len() {
                g[i] = 2.0 * (w[i] - c32[i]);
                v += (w[i] - c32[i]).powi(2);
            }
            v
        };
        let cfg = LbfgsConfig { grad_tol: 1e-4, ..LbfgsConfig::default() };
        let (w, _) = lbfgs_minimize(f, vec![0.0f32; c.len()], &cfg).unwrap();
        for (a, b) in w.iter().zip(&c) {
            prop_assert!((*a as f64 - b).abs() < 1e-3);
        }
    }
}
