use evjoint::crf::{num_params, objective_into, BioTags, ChainModel, CrfInstance, Lattice};
use evjoint::features::FeatureVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_lattice(rng: &mut ChaCha8Rng, len: usize, tags: usize) -> Lattice<f64> {
    let emit = (0..len * tags).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let trans = (0..tags * tags).map(|_| rng.gen_range(-2.0..2.0)).collect();
    Lattice::new(len, tags, emit, trans)
}

fn all_paths(len: usize, tags: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..tags).map(move |y| {
                    let mut q = p.clone();
                    q.push(y);
                    q
                })
            })
            .collect();
    }
    out
}

fn log_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[test]
fn marginals_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (n, k) = (5, 4);
    let lat = random_lattice(&mut rng, n, k);
    let paths = all_paths(n, k);
    let scores: Vec<f64> = paths.iter().map(|p| lat.path_score(p)).collect();
    let log_z = log_sum(scores.iter().copied());
    let post = lat.posterior();
    assert!((post.log_z - log_z).abs() < 1e-9);
    assert!((post.log_z_backward - log_z).abs() < 1e-9);
    for t in 0..n {
        for y in 0..k {
            let brute: f64 = paths
                .iter()
                .zip(&scores)
                .filter(|(p, _)| p[t] == y)
                .map(|(_, s)| (s - log_z).exp())
                .sum();
            assert!((post.node(t, y) - brute).abs() < 1e-9);
        }
    }
    for t in 0..n - 1 {
        for i in 0..k {
            for j in 0..k {
                let brute: f64 = paths
                    .iter()
                    .zip(&scores)
                    .filter(|(p, _)| p[t] == i && p[t + 1] == j)
                    .map(|(_, s)| (s - log_z).exp())
                    .sum();
                assert!((post.edge(t, i, j) - brute).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn zero_weights_give_uniform_marginals_and_lowest_tag_viterbi() {
    let lat = Lattice::new(3, 2, vec![0.0f64; 6], vec![0.0; 4]);
    let post = lat.posterior();
    for t in 0..3 {
        assert!((post.node(t, 0) - 0.5).abs() < 1e-12);
        assert!((post.node(t, 1) - 0.5).abs() < 1e-12);
    }
    assert_eq!(lat.viterbi().0, vec![0, 0, 0]);
}

#[test]
fn single_token_partition_is_log_sum_exp_of_emissions() {
    let emit = vec![0.3f64, -1.2, 2.0];
    let lat = Lattice::new(1, 3, emit.clone(), vec![0.5; 9]);
    assert!((lat.posterior().log_z - log_sum(emit.into_iter())).abs() < 1e-12);
}

#[test]
fn viterbi_dominant_emissions() {
    let mut emit = vec![0.0f64; 4 * 3];
    for (t, y) in [2usize, 0, 1, 2].iter().enumerate() {
        emit[t * 3 + y] = 5.0;
    }
    let lat = Lattice::new(4, 3, emit, vec![0.0; 9]);
    assert_eq!(lat.viterbi().0, vec![2, 0, 1, 2]);
}

#[test]
fn viterbi_and_kbest_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let (n, k) = (5, 4);
        let lat = random_lattice(&mut rng, n, k);
        let mut ranked: Vec<(Vec<usize>, f64)> = all_paths(n, k)
            .into_iter()
            .map(|p| {
                let s = lat.path_score(&p);
                (p, s)
            })
            .collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let (vp, vs) = lat.viterbi();
        assert_eq!(vp, ranked[0].0);
        assert!((vs - ranked[0].1).abs() < 1e-12);
        let top = lat.kbest(10);
        assert_eq!(top.len(), 10);
        for (got, want) in top.iter().zip(&ranked) {
            assert_eq!(got.0, want.0);
            assert!((got.1 - want.1).abs() < 1e-12);
        }
        assert_eq!(lat.kbest(1)[0].0, vp);
        let everything = lat.kbest(2000);
        assert_eq!(everything.len(), ranked.len());
        for (got, want) in everything.iter().zip(&ranked) {
            assert!((got.1 - want.1).abs() < 1e-12);
            assert!((lat.path_score(&got.0) - got.1).abs() < 1e-12);
        }
    }
}

#[test]
fn span_marginals_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tags = BioTags::new(&["A".to_string(), "B".to_string()]);
    let (n, k) = (4, tags.len());
    let lat = random_lattice(&mut rng, n, k);
    let post = lat.posterior();
    let paths = all_paths(n, k);
    let scores: Vec<f64> = paths.iter().map(|p| lat.path_score(p)).collect();
    for start in 0..n {
        for end in start + 1..=n {
            let mut total = 0.0;
            for l in 1..=2 {
                let (b, i) = (tags.begin(l), tags.inside(l));
                let brute: f64 = paths
                    .iter()
                    .zip(&scores)
                    .filter(|(p, _)| {
                        p[start] == b
                            && (start + 1..end).all(|t| p[t] == i)
                            && (end == n || p[end] != i)
                    })
                    .map(|(_, s)| (s - post.log_z).exp())
                    .sum();
                let got = evjoint::crf::span_log_marginal(&tags, &lat, &post, start, end, Some(l)).exp();
                assert!((got - brute).abs() < 1e-9, "{start}..{end} label {l}: {got} vs {brute}");
                total += got;
            }
            let none = evjoint::crf::span_log_marginal(&tags, &lat, &post, start, end, None).exp();
            assert!((none - (1.0 - total).max(1e-12)).abs() < 1e-9);
        }
    }
}

fn toy_corpus(rng: &mut ChaCha8Rng, bits: u32, tags: usize) -> Vec<CrfInstance> {
    (0..5)
        .map(|_| {
            let len = rng.gen_range(1..6);
            CrfInstance {
                features: (0..len)
                    .map(|_| {
                        FeatureVector::from_raw(
                            (0..4)
                                .map(|_| (rng.gen_range(0..(1u32 << bits)), rng.gen_range(0.5..1.5)))
                                .collect(),
                        )
                    })
                    .collect(),
                gold: (0..len).map(|_| rng.gen_range(0..tags)).collect(),
            }
        })
        .collect()
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (tags, bits, lambda) = (5, 8, 0.3);
    let data = toy_corpus(&mut rng, bits, tags);
    let params: Vec<f64> = (0..num_params(tags, bits)).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let mut grad = vec![0.0; params.len()];
    objective_into(tags, bits, &params, &data, lambda, &mut grad);
    let mut scratch = vec![0.0; params.len()];
    let mut support: Vec<usize> = (0..params.len()).filter(|&i| grad[i].abs() > 1e-3).collect();
    support.truncate(40);
    let extra: Vec<usize> = (0..20).map(|_| rng.gen_range(0..params.len())).collect();
    let eps = 1e-5;
    for i in support.into_iter().chain(extra) {
        let mut p = params.clone();
        p[i] += eps;
        let up = objective_into(tags, bits, &p, &data, lambda, &mut scratch);
        p[i] -= 2.0 * eps;
        let down = objective_into(tags, bits, &p, &data, lambda, &mut scratch);
        let numeric = (up - down) / (2.0 * eps);
        let rel = (numeric - grad[i]).abs() / numeric.abs().max(grad[i].abs()).max(1e-6);
        assert!(rel < 1e-4 || (numeric - grad[i]).abs() < 1e-8, "coord {i}: {numeric} vs {}", grad[i]);
    }
}

#[test]
fn zero_weights_length_one_value_is_log_two() {
    let data = vec![CrfInstance {
        features: vec![FeatureVector::from_raw(vec![(0, 1.0)])],
        gold: vec![0],
    }];
    let params = vec![0.0f64; num_params(2, 8)];
    let mut g = vec![0.0; params.len()];
    let v = objective_into(2, 8, &params, &data, 0.0, &mut g);
    assert!((v - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn doubling_lambda_doubles_regularizer() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data = toy_corpus(&mut rng, 8, 3);
    let params: Vec<f64> = (0..num_params(3, 8)).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut g = vec![0.0; params.len()];
    let base = objective_into(3, 8, &params, &data, 0.0, &mut g);
    let one = objective_into(3, 8, &params, &data, 0.5, &mut g) - base;
    let two = objective_into(3, 8, &params, &data, 1.0, &mut g) - base;
    assert!((two - 2.0 * one).abs() < 1e-9 * two.abs().max(1.0));
}

#[test]
fn f32_model_agrees_with_f64() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let tags = BioTags::new(&["A".to_string()]);
    let p64: Vec<f64> = (0..num_params(3, 8)).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let p32: Vec<f32> = p64.iter().map(|&x| x as f32).collect();
    let m64 = ChainModel::from_params(tags.clone(), 8, p64);
    let m32 = ChainModel::from_params(tags, 8, p32);
    let feats: Vec<FeatureVector> = (0..6)
        .map(|t| FeatureVector::from_raw(vec![(t * 7, 1.0), (200, 1.0)]))
        .collect();
    let a = m64.marginals(&feats);
    let b = m32.marginals(&feats);
    assert!((a.log_z - b.log_z as f64).abs() < 1e-4);
    assert_eq!(m64.viterbi(&feats).0, m32.viterbi(&feats).0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_and_backward_partition_agree(seed in any::<u64>(), len in 1usize..12, tags in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let emit: Vec<f64> = (0..len * tags).map(|_| rng.gen_range(-8.0..8.0)).collect();
        let trans = (0..tags * tags).map(|_| rng.gen_range(-8.0..8.0)).collect();
        let post = Lattice::new(len, tags, emit, trans).posterior();
        prop_assert!(post.log_z.is_finite());
        prop_assert!((post.log_z - post.log_z_backward).abs() < 1e-9 * post.log_z.abs().max(1.0));
        for t in 0..len {
            let s: f64 = (0..tags).map(|y| post.node(t, y)).sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
        for t in 0..len.saturating_sub(1) {
            for i in 0..tags {
                let s: f64 = (0..tags).map(|j| post.edge(t, i, j)).sum();
                prop_assert!((s - post.node(t, i)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn kbest_scores_descend_and_recompute(seed in any::<u64>(), len in 1usize..7, tags in 1usize..6, k in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lat = random_lattice(&mut rng, len, tags);
        let top = lat.kbest(k);
        prop_assert_eq!(top.len(), k.min(tags.pow(len as u32)));
        for w in top.windows(2) {
            prop_assert!(w[0].1 >= w[1].1);
            prop_assert!(w[0].0 != w[1].0);
        }
        for (p, s) in &top {
            prop_assert!((lat.path_score(p) - s).abs() < 1e-9);
        }
    }

    #[test]
    fn span_marginals_sum_to_at_most_one(seed in any::<u64>(), len in 1usize..8, labels in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tags = BioTags::new(&(0..labels).map(|i| format!("L{i}")).collect::<Vec<_>>());
        let lat = random_lattice(&mut rng, len, tags.len());
        let post = lat.posterior();
        let start = rng.gen_range(0..len);
        let end = rng.gen_range(start + 1..=len);
        let total: f64 = (1..=labels)
            .map(|l| evjoint::crf::span_log_marginal(&tags, &lat, &post, start, end, Some(l)).exp())
            .sum();
        prop_assert!(total <= 1.0 + 1e-9);
    }

    #[test]
    fn objective_is_convex(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = toy_corpus(&mut rng, 8, 3);
        let n = num_params(3, 8);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let mut g = vec![0.0; n];
        let fa = objective_into(3, 8, &a, &data, 0.1, &mut g);
        let fb = objective_into(3, 8, &b, &data, 0.1, &mut g);
        let fm = objective_into(3, 8, &mid, &data, 0.1, &mut g);
        prop_assert!(fm <= 0.5 * (fa + fb) + 1e-9);
    }
}
