//! Shared generators for randomized decoder tests.
#![allow(dead_code)]

use evjoint::ad3::JointProblem;
use evjoint::features::FeatureVector;
use evjoint::within_event::{build_graph, exact_inference, export_tables, Compat, WeFeatures, WeLayout};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_compat(rng: &mut ChaCha8Rng, max_labels: usize) -> Compat {
    let nt = rng.gen_range(2..=max_labels);
    let nr = rng.gen_range(2..=max_labels);
    let na = rng.gen_range(2..=max_labels);
    let mut tr = vec![false; nt * nr];
    for t in 0..nt {
        tr[t * nr] = true;
        for r in 1..nr {
            tr[t * nr + r] = t > 0 && rng.gen_bool(0.6);
        }
    }
    let mut ra = vec![false; nr * na];
    ra[..na].iter_mut().for_each(|x| *x = true);
    for r in 1..nr {
        for a in 1..na {
            ra[r * na + a] = rng.gen_bool(0.5);
        }
        if (1..na).all(|a| !ra[r * na + a]) {
            let a = rng.gen_range(1..na);
            ra[r * na + a] = true;
        }
    }
    Compat::from_masks(nt, nr, na, tr, ra)
}

fn random_fv(rng: &mut ChaCha8Rng, bits: u32) -> FeatureVector {
    FeatureVector::from_raw((0..4).map(|_| (rng.gen_range(0..1u32 << bits), 1.0)).collect())
}

pub fn log_softmax(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
    let m = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z = m + raw.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    raw.into_iter().map(|x| x - z).collect()
}

/// A decoding problem shaped like the real ones: within-event log-marginal
/// tables from randomly parameterized event graphs, softmax entity unaries
/// and softmax trigger-pair tables. At most `max_vars` variables.
pub fn random_problem(rng: &mut ChaCha8Rng, max_vars: usize, max_labels: usize) -> (JointProblem<f64>, Compat) {
    let compat = random_compat(rng, max_labels);
    let bits = 6;
    let layout = WeLayout::new(&compat, bits);
    let scale = rng.gen_range(0.5..3.0);
    let params: Vec<f64> = (0..layout.len()).map(|_| rng.gen_range(-scale..scale)).collect();
    let (n_trig, n_ent) = loop {
        let nt = rng.gen_range(1..=3);
        let ne = rng.gen_range(1..=3);
        if nt + ne < max_vars {
            break (nt, ne);
        }
    };
    // Trigger → entity links, fewest first so every trigger gets at least
    // one argument when the budget allows.
    let mut links: Vec<(usize, usize)> = Vec::new();
    let mut budget = max_vars - n_trig - n_ent;
    for j in 0..n_ent {
        for i in 0..n_trig {
            if budget > 0 && (rng.gen_bool(0.8) || i == j % n_trig) {
                links.push((i, j));
                budget -= 1;
            }
        }
    }
    let mut problem = JointProblem::new();
    let mut args_of: Vec<Vec<usize>> = vec![Vec::new(); n_trig];
    for &(i, j) in &links {
        args_of[i].push(j);
    }
    let mut tables = Vec::new();
    for args in &args_of {
        let feats = WeFeatures {
            trigger: random_fv(rng, bits),
            arguments: args.iter().map(|_| random_fv(rng, bits)).collect(),
            entities: args.iter().map(|_| random_fv(rng, bits)).collect(),
        };
        let marg = exact_inference(&build_graph(&layout, &params, &compat, &feats), &compat);
        tables.push(export_tables(&marg, &compat));
    }
    let triggers: Vec<usize> = tables
        .iter()
        .map(|t| problem.add_trigger(t.log_t.clone()).unwrap())
        .collect();
    let entities: Vec<usize> = (0..n_ent)
        .map(|_| {
            let d = log_softmax(rng, compat.na, 3.0);
            problem.add_entity(d).unwrap()
        })
        .collect();
    for (i, args) in args_of.iter().enumerate() {
        for (k, &j) in args.iter().enumerate() {
            problem
                .add_role(
                    triggers[i],
                    entities[j],
                    vec![0.0; compat.nr],
                    tables[i].log_tr[k].clone(),
                    tables[i].log_ra[k].clone(),
                )
                .unwrap();
        }
    }
    for i in 0..n_trig {
        for k in i + 1..n_trig {
            if rng.gen_bool(0.7) {
                let t = log_softmax(rng, compat.nt * compat.nt, 2.0);
                problem.add_trigger_pair(triggers[i], triggers[k], t).unwrap();
            }
        }
    }
    (problem, compat)
}

/// Schema check independent of the decoder's factor tables.
pub fn assignment_is_valid(problem: &JointProblem<f64>, compat: &Compat, x: &[usize]) -> bool {
    problem.roles.iter().all(|l| {
        let (t, r, a) = (x[l.trigger], x[l.role], x[l.entity]);
        compat.tr_ok(t, r) && compat.ra_ok(r, a)
    })
}
