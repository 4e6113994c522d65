//! Quadratic subproblem of one pairwise factor:
//!
//! minimize  ½‖M μ − a‖² − lin·μ   over the simplex of allowed cells,
//!
//! where `M μ` stacks the two variable marginals of the cell distribution
//! `μ`. Solved exactly by an active-set method whose working set always has
//! linearly independent columns `(e_x, e_y, 1)`; when a new cell would break
//! that independence, the solver moves along the resulting null direction
//! (which leaves `M μ` unchanged and strictly improves the linear term)
//! until another cell drops out.

use crate::scalar::Real;

/// Working set and weights, kept between calls as a warm start.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActiveSet<S> {
    pub cells: Vec<usize>,
    pub weights: Vec<S>,
}

impl<S: Real> ActiveSet<S> {
    pub fn vertex(cell: usize) -> Self {
        Self {
            cells: vec![cell],
            weights: vec![S::one()],
        }
    }
}

/// Dense factor over `(x, y) ∈ dx × dy`, cell index `x * dy + y`.
#[derive(Debug, Clone, Copy)]
pub struct PairShape {
    pub dx: usize,
    pub dy: usize,
}

impl PairShape {
    #[inline]
    fn split(&self, c: usize) -> (usize, usize) {
        (c / self.dy, c % self.dy)
    }

    #[inline]
    fn gram(&self, c: usize, e: usize) -> usize {
        let (x1, y1) = self.split(c);
        let (x2, y2) = self.split(e);
        (x1 == x2) as usize + (y1 == y2) as usize
    }
}

/// Solves `A z = b` in place by Gaussian elimination with partial pivoting.
/// Returns `None` if a pivot is numerically zero.
pub fn solve_dense<S: Real>(n: usize, a: &mut [S], b: &mut [S]) -> Option<()> {
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if a[row * n + col].abs() > a[piv * n + col].abs() {
                piv = row;
            }
        }
        if a[piv * n + col].abs() < S::lit(1e-13) {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let p = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / p;
            if f == S::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col * n + k];
                a[row * n + k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col * n + k] * b[k];
        }
        b[col] = s / a[col * n + col];
    }
    Some(())
}

pub fn marginals<S: Real>(shape: PairShape, set: &ActiveSet<S>) -> (Vec<S>, Vec<S>) {
    let mut mx = vec![S::zero(); shape.dx];
    let mut my = vec![S::zero(); shape.dy];
    for (&c, &w) in set.cells.iter().zip(&set.weights) {
        let (x, y) = shape.split(c);
        mx[x] += w;
        my[y] += w;
    }
    (mx, my)
}

/// Runs the active-set method from the (feasible) warm start in `set`.
/// `lin` is indexed by cell; only `allowed` cells are ever activated.
/// Returns the number of inner iterations used.
pub fn solve_pair_qp<S: Real>(
    shape: PairShape,
    allowed: &[usize],
    lin: &[S],
    ax: &[S],
    ay: &[S],
    set: &mut ActiveSet<S>,
) -> usize {
    let tol = S::lit(1e-12);
    let max_iter = 50 + 4 * allowed.len();
    let mut iters = 0;
    while iters < max_iter {
        iters += 1;
        let n = set.cells.len();
        let Some((mu, tau)) = kkt(shape, &set.cells, lin, ax, ay) else {
            // Cannot happen while the working set stays independent; keep
            // the current feasible point rather than spin.
            break;
        };
        if mu.iter().any(|&w| w < S::zero()) {
            // Step from the feasible point towards the KKT point until the
            // first weight reaches zero.
            let mut alpha = S::one();
            let mut block = usize::MAX;
            for i in 0..n {
                if mu[i] < set.weights[i] {
                    let cand = set.weights[i] / (set.weights[i] - mu[i]);
                    if cand < alpha {
                        alpha = cand;
                        block = i;
                    }
                }
            }
            for i in 0..n {
                set.weights[i] = set.weights[i] + alpha * (mu[i] - set.weights[i]);
            }
            if block != usize::MAX {
                set.weights[block] = S::zero();
            }
            drop_zeros(set, block);
            continue;
        }
        set.weights = mu;
        let (mx, my) = marginals(shape, set);
        let mut best: Option<(usize, S)> = None;
        for &c in allowed {
            if set.cells.contains(&c) {
                continue;
            }
            let (x, y) = shape.split(c);
            let v = lin[c] + (ax[x] - mx[x]) + (ay[y] - my[y]);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((c, v));
            }
        }
        let Some((c, v)) = best else { break };
        if v <= tau + tol * (S::one() + tau.abs()) {
            break;
        }
        match null_direction::<S>(shape, &set.cells, c) {
            Some(d) => {
                // d = (d_W, 1): M d = 0 and 1ᵀd = 0; walk until a cell leaves.
                let mut alpha = S::infinity();
                let mut block = usize::MAX;
                for i in 0..n {
                    if d[i] < S::zero() {
                        let cand = set.weights[i] / -d[i];
                        if cand < alpha {
                            alpha = cand;
                            block = i;
                        }
                    }
                }
                debug_assert!(block != usize::MAX, "null direction without a decreasing weight");
                if block == usize::MAX {
                    break;
                }
                for i in 0..n {
                    set.weights[i] += alpha * d[i];
                }
                set.weights[block] = S::zero();
                set.cells.push(c);
                set.weights.push(alpha);
                drop_zeros(set, block);
            }
            None => {
                set.cells.push(c);
                set.weights.push(S::zero());
            }
        }
    }
    iters
}

fn drop_zeros<S: Real>(set: &mut ActiveSet<S>, forced: usize) {
    let mut i = 0;
    let mut k = 0;
    set.cells.retain(|_| {
        let keep = i != forced && set.weights[i] > S::zero();
        i += 1;
        keep
    });
    set.weights.retain(|&w| {
        let keep = k != forced && w > S::zero();
        k += 1;
        keep
    });
    if set.cells.is_empty() {
        unreachable!("active set emptied");
    }
    let total: S = set.weights.iter().copied().sum();
    for w in &mut set.weights {
        *w /= total;
    }
}

/// Equality-constrained minimizer on the working set, plus the multiplier
/// of the sum-to-one constraint (equal to the reduced gradient on the set).
fn kkt<S: Real>(shape: PairShape, cells: &[usize], lin: &[S], ax: &[S], ay: &[S]) -> Option<(Vec<S>, S)> {
    let n = cells.len();
    let m = n + 1;
    let mut a = vec![S::zero(); m * m];
    let mut b = vec![S::zero(); m];
    for i in 0..n {
        for j in 0..n {
            a[i * m + j] = S::lit(shape.gram(cells[i], cells[j]) as f64);
        }
        a[i * m + n] = S::one();
        a[n * m + i] = S::one();
        let (x, y) = shape.split(cells[i]);
        b[i] = ax[x] + ay[y] + lin[cells[i]];
    }
    b[n] = S::one();
    solve_dense(m, &mut a, &mut b)?;
    let tau = b[n];
    b.truncate(n);
    Some((b, tau))
}

/// If the column of `c` lies in the span of the working-set columns, the
/// direction `(−x, 1)` with `B_W x = B_c`.
fn null_direction<S: Real>(shape: PairShape, cells: &[usize], c: usize) -> Option<Vec<S>> {
    let n = cells.len();
    let mut g = vec![S::zero(); n * n];
    let mut rhs = vec![S::zero(); n];
    for i in 0..n {
        for j in 0..n {
            g[i * n + j] = S::lit((shape.gram(cells[i], cells[j]) + 1) as f64);
        }
        rhs[i] = S::lit((shape.gram(cells[i], c) + 1) as f64);
    }
    let proj = rhs.clone();
    solve_dense(n, &mut g, &mut rhs)?;
    // ‖B_c − B_W x‖² = ‖B_c‖² − xᵀ B_Wᵀ B_c at the least-squares solution.
    let fit: S = rhs.iter().zip(&proj).map(|(&x, &p)| x * p).sum();
    let residual = S::lit(3.0) - fit;
    if residual.abs() > S::lit(1e-9) {
        return None;
    }
    let mut d: Vec<S> = rhs.into_iter().map(|x| -x).collect();
    d.push(S::one());
    // Trailing entry belongs to `c`; callers index d[0..n] for the set.
    Some(d)
}
