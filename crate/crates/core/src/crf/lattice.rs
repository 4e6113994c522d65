//! Score lattice of one sentence: forward-backward, Viterbi, exact k-best and
//! constrained span marginals.

use std::cmp::Ordering;

use crate::scalar::{log_sum_exp, Real};

/// Emission and transition log-scores of a sentence under a chain model.
#[derive(Debug, Clone)]
pub struct Lattice<S> {
    len: usize,
    tags: usize,
    emit: Vec<S>,
    trans: Vec<S>,
}

/// Forward and backward tables in log space plus both partition estimates.
#[derive(Debug, Clone)]
pub struct Posterior<S> {
    len: usize,
    tags: usize,
    pub log_alpha: Vec<S>,
    pub log_beta: Vec<S>,
    pub log_z: S,
    pub log_z_backward: S,
    /// Per-position tag marginals, row-major `len × tags`.
    pub node: Vec<S>,
    /// Per-edge pair marginals, `(len - 1) × tags × tags`.
    pub edge: Vec<S>,
}

impl<S: Real> Posterior<S> {
    pub fn node(&self, t: usize, y: usize) -> S {
        self.node[t * self.tags + y]
    }

    pub fn edge(&self, t: usize, from: usize, to: usize) -> S {
        self.edge[(t * self.tags + from) * self.tags + to]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

fn desc<S: Real>(a: S, b: S) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

impl<S: Real> Lattice<S> {
    pub fn new(len: usize, tags: usize, emit: Vec<S>, trans: Vec<S>) -> Self {
        assert_eq!(emit.len(), len * tags, "emission table shape");
        assert_eq!(trans.len(), tags * tags, "transition table shape");
        Self {
            len,
            tags,
            emit,
            trans,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn num_tags(&self) -> usize {
        self.tags
    }

    #[inline]
    pub fn emission(&self, t: usize, y: usize) -> S {
        self.emit[t * self.tags + y]
    }

    #[inline]
    pub fn transition(&self, from: usize, to: usize) -> S {
        self.trans[from * self.tags + to]
    }

    pub fn path_score(&self, path: &[usize]) -> S {
        let mut s = S::zero();
        for (t, &y) in path.iter().enumerate() {
            s += self.emission(t, y);
            if t > 0 {
                s += self.transition(path[t - 1], y);
            }
        }
        s
    }

    /// Forward-backward in rescaled probability space. The forward and
    /// backward recursions are normalized independently, so the two
    /// partition estimates are genuinely separate computations.
    pub fn posterior(&self) -> Posterior<S> {
        let (n, k) = (self.len, self.tags);
        assert!(n > 0, "forward-backward on an empty sentence");
        let row_max: Vec<S> = (0..n)
            .map(|t| {
                self.emit[t * k..(t + 1) * k]
                    .iter()
                    .copied()
                    .fold(S::neg_infinity(), S::max)
            })
            .collect();
        let e: Vec<S> = (0..n * k).map(|i| (self.emit[i] - row_max[i / k]).exp()).collect();
        let trans_max = self.trans.iter().copied().fold(S::neg_infinity(), S::max);
        let a: Vec<S> = self.trans.iter().map(|&x| (x - trans_max).exp()).collect();

        let mut alpha = vec![S::zero(); n * k];
        let mut log_scale_a = vec![S::zero(); n];
        let mut c = S::zero();
        for y in 0..k {
            alpha[y] = e[y];
            c += e[y];
        }
        for y in 0..k {
            alpha[y] /= c;
        }
        log_scale_a[0] = row_max[0] + c.ln();
        for t in 1..n {
            let (prev, cur) = alpha.split_at_mut(t * k);
            let prev = &prev[(t - 1) * k..];
            let cur = &mut cur[..k];
            let mut c = S::zero();
            for j in 0..k {
                let mut acc = S::zero();
                for i in 0..k {
                    acc += prev[i] * a[i * k + j];
                }
                cur[j] = acc * e[t * k + j];
                c += cur[j];
            }
            for v in cur.iter_mut() {
                *v /= c;
            }
            log_scale_a[t] = log_scale_a[t - 1] + row_max[t] + trans_max + c.ln();
        }
        let log_z = log_scale_a[n - 1];

        let mut beta = vec![S::zero(); n * k];
        let mut log_scale_b = vec![S::zero(); n];
        for y in 0..k {
            beta[(n - 1) * k + y] = S::one();
        }
        for t in (0..n - 1).rev() {
            let (cur, next) = beta.split_at_mut((t + 1) * k);
            let cur = &mut cur[t * k..];
            let next = &next[..k];
            let mut d = S::zero();
            for i in 0..k {
                let mut acc = S::zero();
                for j in 0..k {
                    acc += a[i * k + j] * e[(t + 1) * k + j] * next[j];
                }
                cur[i] = acc;
                d += acc;
            }
            for v in cur.iter_mut() {
                *v /= d;
            }
            log_scale_b[t] = log_scale_b[t + 1] + row_max[t + 1] + trans_max + d.ln();
        }
        let mut z0 = S::zero();
        for y in 0..k {
            z0 += e[y] * beta[y];
        }
        let log_z_backward = row_max[0] + z0.ln() + log_scale_b[0];

        let mut node = vec![S::zero(); n * k];
        for t in 0..n {
            let mut total = S::zero();
            for y in 0..k {
                let p = alpha[t * k + y] * beta[t * k + y];
                node[t * k + y] = p;
                total += p;
            }
            for y in 0..k {
                node[t * k + y] /= total;
            }
        }
        let mut edge = vec![S::zero(); n.saturating_sub(1) * k * k];
        for t in 0..n.saturating_sub(1) {
            let block = &mut edge[t * k * k..(t + 1) * k * k];
            let mut total = S::zero();
            for i in 0..k {
                for j in 0..k {
                    let p = alpha[t * k + i] * a[i * k + j] * e[(t + 1) * k + j] * beta[(t + 1) * k + j];
                    block[i * k + j] = p;
                    total += p;
                }
            }
            for v in block.iter_mut() {
                *v /= total;
            }
        }

        let log_alpha = (0..n * k)
            .map(|i| alpha[i].ln() + log_scale_a[i / k])
            .collect();
        let log_beta = (0..n * k)
            .map(|i| beta[i].ln() + log_scale_b[i / k])
            .collect();
        Posterior {
            len: n,
            tags: k,
            log_alpha,
            log_beta,
            log_z,
            log_z_backward,
            node,
            edge,
        }
    }

    /// Best path; ties go to the lower tag index at every decision.
    pub fn viterbi(&self) -> (Vec<usize>, S) {
        let (n, k) = (self.len, self.tags);
        assert!(n > 0, "viterbi on an empty sentence");
        let mut delta: Vec<S> = self.emit[..k].to_vec();
        let mut back = vec![0usize; n * k];
        for t in 1..n {
            let mut next = vec![S::zero(); k];
            for j in 0..k {
                let mut best = 0;
                let mut best_score = delta[0] + self.transition(0, j);
                for i in 1..k {
                    let s = delta[i] + self.transition(i, j);
                    if s > best_score {
                        best = i;
                        best_score = s;
                    }
                }
                back[t * k + j] = best;
                next[j] = best_score + self.emission(t, j);
            }
            delta = next;
        }
        let mut last = 0;
        for y in 1..k {
            if delta[y] > delta[last] {
                last = y;
            }
        }
        let score = delta[last];
        let mut path = vec![0; n];
        path[n - 1] = last;
        for t in (1..n).rev() {
            path[t - 1] = back[t * k + path[t]];
        }
        (path, score)
    }

    /// The `k` highest-scoring distinct paths, best first. Each lattice
    /// state keeps a ranked list of its best `k` prefixes, which makes the
    /// result exact. Equal scores are ordered by (tag, rank) of the
    /// predecessor, so the output is deterministic.
    pub fn kbest(&self, k: usize) -> Vec<(Vec<usize>, S)> {
        assert!(k >= 1, "k-best needs k >= 1");
        let (n, m) = (self.len, self.tags);
        assert!(n > 0, "k-best on an empty sentence");
        // lists[t][y] = ranked (score, predecessor tag, predecessor rank)
        let mut lists: Vec<Vec<Vec<(S, usize, usize)>>> = Vec::with_capacity(n);
        lists.push((0..m).map(|y| vec![(self.emission(0, y), usize::MAX, 0)]).collect());
        let mut pool: Vec<(S, usize, usize)> = Vec::new();
        for t in 1..n {
            let prev = &lists[t - 1];
            let mut cur = Vec::with_capacity(m);
            for j in 0..m {
                pool.clear();
                let e = self.emission(t, j);
                for (i, entries) in prev.iter().enumerate() {
                    let tr = self.transition(i, j);
                    for (r, &(s, _, _)) in entries.iter().enumerate() {
                        pool.push((s + tr + e, i, r));
                    }
                }
                pool.sort_by(|a, b| desc(a.0, b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
                pool.truncate(k);
                cur.push(pool.clone());
            }
            lists.push(cur);
        }
        let mut finals: Vec<(S, usize, usize)> = lists[n - 1]
            .iter()
            .enumerate()
            .flat_map(|(y, entries)| entries.iter().enumerate().map(move |(r, e)| (e.0, y, r)))
            .collect();
        finals.sort_by(|a, b| desc(a.0, b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        finals.truncate(k);
        finals
            .into_iter()
            .map(|(score, y, r)| {
                let mut path = vec![0; n];
                let (mut y, mut r) = (y, r);
                for t in (0..n).rev() {
                    path[t] = y;
                    let (_, py, pr) = lists[t][y][r];
                    y = py;
                    r = pr;
                }
                (path, score)
            })
            .collect()
    }

    /// Log-probability that `[start, end)` carries `begin, inside, …, inside`
    /// and that token `end`, if present, is not `inside`.
    pub fn segment_log_marginal(
        &self,
        post: &Posterior<S>,
        start: usize,
        end: usize,
        begin: usize,
        inside: usize,
    ) -> S {
        assert!(start < end && end <= self.len, "segment out of bounds");
        let k = self.tags;
        let mut s = post.log_alpha[start * k + begin];
        let mut prev = begin;
        for t in start + 1..end {
            s += self.transition(prev, inside) + self.emission(t, inside);
            prev = inside;
        }
        if end < self.len {
            let terms: Vec<S> = (0..k)
                .filter(|&y| y != inside)
                .map(|y| self.transition(prev, y) + self.emission(end, y) + post.log_beta[end * k + y])
                .collect();
            s += log_sum_exp(&terms);
        }
        (s - post.log_z).min(S::zero())
    }
}
