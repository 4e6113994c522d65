use evjoint::corpus::{Document, Span, Token};
use evjoint::event_pair::{objective_and_gradient, objective_into, pair_log_table, select_pairs, PairFeatures, PairInstance, PairLayout};
use evjoint::features::{conjoin, FeatureVector};
use proptest::prelude::*;
use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BITS: u32 = 8;

fn fv(rng: &mut ChaCha8Rng) -> FeatureVector {
    FeatureVector::from_raw((0..4).map(|_| (rng.gen_range(0..1u32 << BITS), rng.gen_range(0.5..1.5))).collect())
}

fn feats(rng: &mut ChaCha8Rng) -> PairFeatures {
    PairFeatures { first: fv(rng), second: fv(rng), relational: fv(rng) }
}

fn tok(surface: &str, head: i64, label: &str) -> Token {
    Token {
        surface: surface.into(),
        lemma: Some(surface.to_lowercase()),
        pos: None,
        dep_head: Some(head),
        dep_label: Some(label.into()),
    }
}

fn doc(sentences: Vec<Vec<Token>>) -> Document {
    Document { doc_id: "d".into(), sentences, coref_chains: None, gold_entities: vec![], gold_events: vec![] }
}

#[test]
fn pairs_from_sentences_and_shared_subjects() {
    let plain = |ws: &[&str]| ws.iter().map(|w| Token::new(*w)).collect::<Vec<_>>();
    let d = doc(vec![plain(&["a", "b", "c"]), plain(&["x", "y"])]);
    let triggers = [Span::new(0, 0, 1), Span::new(0, 2, 3), Span::new(1, 1, 2)];
    assert_eq!(select_pairs(&d, &triggers), vec![(0, 1)]);
    assert!(select_pairs(&d, &triggers[..1]).is_empty());

    let mut d = doc(vec![
        vec![tok("Smith", 1, "nsubj"), tok("attacked", -1, "root")],
        vec![tok("He", 1, "nsubj"), tok("fled", -1, "root")],
    ]);
    let triggers = [Span::new(0, 1, 2), Span::new(1, 1, 2)];
    assert!(select_pairs(&d, &triggers).is_empty());
    d.coref_chains = Some(vec![vec![Span::new(0, 0, 1), Span::new(1, 0, 1)]]);
    assert_eq!(select_pairs(&d, &triggers), vec![(0, 1)]);
    d.coref_chains = None;
    d.sentences[1][0] = tok("Smith", 1, "nsubj");
    assert_eq!(select_pairs(&d, &triggers), vec![(0, 1)]);
}

#[test]
fn zero_parameters_give_uniform_table_and_two_log_t_loss() {
    let layout = PairLayout::new(5, BITS);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let f = feats(&mut rng);
    let params = vec![0.0f64; layout.len()];
    let table = pair_log_table(&layout, &params, &f);
    for v in &table {
        assert!((v - (1.0f64 / 25.0).ln()).abs() < 1e-12);
    }
    let (v, _) = objective_and_gradient(&layout, &params, &[PairInstance { features: f, gold: (1, 3) }], 0.0).unwrap();
    assert!((v - 2.0 * 5f64.ln()).abs() < 1e-12);
    assert!(objective_and_gradient(&layout, &params, &[], 0.0).is_err());
}

#[test]
fn symmetric_inputs_give_symmetric_table() {
    let layout = PairLayout::new(6, BITS);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params: Vec<f64> = (0..layout.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let side = fv(&mut rng);
    let f = PairFeatures { first: side.clone(), second: side, relational: fv(&mut rng) };
    let t = pair_log_table(&layout, &params, &f);
    for a in 0..6 {
        for b in 0..6 {
            assert!((t[a * 6 + b] - t[b * 6 + a]).abs() < 1e-12);
        }
    }
    let asym = pair_log_table(&layout, &params, &feats(&mut rng));
    assert!((0..36).any(|i| (asym[i] - asym[(i % 6) * 6 + i / 6]).abs() > 1e-6));
}

/// Dense g(t, t′) for one cell, built without the library's scoring code.
fn explicit_g(layout: &PairLayout, f: &PairFeatures, t: usize, u: usize) -> Vec<(usize, f64)> {
    let d = layout.dim();
    let mut g = Vec::new();
    g.extend(f.first.entries().iter().map(|&(i, v)| (t * d + i as usize, v)));
    g.extend(f.second.entries().iter().map(|&(i, v)| (u * d + i as usize, v)));
    let code = (t.min(u) * layout.nt + t.max(u)) as u32;
    g.extend(
        f.relational
            .entries()
            .iter()
            .map(|&(i, v)| (layout.nt * d + conjoin(i, code, layout.hash_bits) as usize, v)),
    );
    g
}

#[test]
fn table_matches_direct_softmax() {
    let layout = PairLayout::new(4, BITS);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params: Vec<f64> = (0..layout.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let f = feats(&mut rng);
    let raw: Vec<f64> = (0..16)
        .map(|c| explicit_g(&layout, &f, c / 4, c % 4).iter().map(|&(i, v)| params[i] * v).sum())
        .collect();
    let z: f64 = raw.iter().map(|x| x.exp()).sum::<f64>().ln();
    let table = pair_log_table(&layout, &params, &f);
    for c in 0..16 {
        assert!((table[c] - (raw[c] - z)).abs() < 1e-12);
    }
    assert!((table.iter().map(|x| x.exp()).sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn gradient_matches_central_differences() {
    let layout = PairLayout::new(4, BITS);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data: Vec<PairInstance> = (0..4)
        .map(|_| PairInstance { features: feats(&mut rng), gold: (rng.gen_range(0..4), rng.gen_range(0..4)) })
        .collect();
    let params: Vec<f64> = (0..layout.len()).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let mut grad = vec![0.0; layout.len()];
    objective_into(&layout, &params, &data, 0.1, &mut grad);
    let mut scratch = vec![0.0; layout.len()];
    let mut coords: Vec<usize> = (0..layout.len()).filter(|&i| grad[i].abs() > 1e-4).collect();
    coords.shuffle(&mut rng);
    coords.truncate(60);
    coords.extend((0..20).map(|_| rng.gen_range(0..layout.len())));
    for i in coords {
        let eps = 1e-5;
        let mut p = params.clone();
        p[i] += eps;
        let up = objective_into(&layout, &p, &data, 0.1, &mut scratch);
        p[i] -= 2.0 * eps;
        let down = objective_into(&layout, &p, &data, 0.1, &mut scratch);
        let num = (up - down) / (2.0 * eps);
        let rel = (num - grad[i]).abs() / num.abs().max(grad[i].abs()).max(1e-6);
        assert!(rel < 1e-4 || (num - grad[i]).abs() < 1e-8, "coord {i}: {num} vs {}", grad[i]);
    }
}

#[test]
fn duplicated_pair_doubles_its_loss() {
    let layout = PairLayout::new(4, BITS);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let params: Vec<f64> = (0..layout.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let a = PairInstance { features: feats(&mut rng), gold: (2, 1) };
    let b = PairInstance { features: feats(&mut rng), gold: (0, 0) };
    let mut g = vec![0.0; layout.len()];
    let one = objective_into(&layout, &params, &[a.clone(), b.clone()], 0.0, &mut g);
    let two = objective_into(&layout, &params, &[a.clone(), b.clone(), a.clone()], 0.0, &mut g);
    let single = objective_into(&layout, &params, &[a], 0.0, &mut g);
    assert!((two - one - single).abs() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn selection_ignores_input_order(seed in any::<u64>(), n in 0usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let words = ["Smith", "Jones", "attacked", "fled", "met"];
        let sentences: Vec<Vec<Token>> = (0..3)
            .map(|_| vec![
                tok(words[rng.gen_range(0..2)], 1, "nsubj"),
                tok(words[rng.gen_range(2..5)], -1, "root"),
                tok(words[rng.gen_range(0..2)], 1, "dobj"),
            ])
            .collect();
        let d = doc(sentences);
        let triggers: Vec<Span> = (0..n).map(|_| Span::new(rng.gen_range(0..3), 1, 2)).collect();
        let base = select_pairs(&d, &triggers);
        let canon = |pairs: &[(usize, usize)], ts: &[Span]| {
            let mut v: Vec<_> = pairs.iter().map(|&(i, k)| {
                let (a, b) = (ts[i].offsets(), ts[k].offsets());
                if a <= b { (a, b) } else { (b, a) }
            }).collect();
            v.sort();
            v
        };
        let mut shuffled = triggers.clone();
        shuffled.shuffle(&mut rng);
        prop_assert_eq!(canon(&base, &triggers), canon(&select_pairs(&d, &shuffled), &shuffled));
        for w in base.windows(2) {
            prop_assert!(w[0] < w[1]);
        }
        prop_assert!(base.iter().all(|&(i, k)| i < k));
    }

    #[test]
    fn tables_are_distributions(seed in any::<u64>()) {
        let layout = PairLayout::new(5, BITS);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params: Vec<f64> = (0..layout.len()).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let t = pair_log_table(&layout, &params, &feats(&mut rng));
        prop_assert!((t.iter().map(|x| x.exp()).sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
