//! L-BFGS with a strong-Wolfe line search, and a finite-difference gradient checker.

use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iters: usize,
    pub c1: f64,
    pub c2: f64,
    /// Stop when |f_k − f_{k+1}| / max(|f_k|, |f_{k+1}|, 1) falls below this.
    pub rel_tol: f64,
    /// Stop when max |g_i| falls below this.
    pub grad_tol: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 10,
            max_iters: 200,
            c1: 1e-4,
            c2: 0.9,
            rel_tol: 1e-6,
            grad_tol: 1e-5,
            max_line_search: 40,
        }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::Config(format!("need 0 < c1 < c2 < 1, got c1={} c2={}", self.c1, self.c2)));
        }
        if self.memory == 0 || self.max_line_search == 0 {
            return Err(Error::Config("lbfgs memory and line-search budget must be positive".into()));
        }
        if !(self.rel_tol >= 0.0 && self.grad_tol >= 0.0) {
            return Err(Error::Config("lbfgs tolerances must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    RelativeChange,
    MaxIterations,
    LineSearchFailed,
}

/// One accepted step. `dphi0` and `dphi` are the directional derivatives along the
/// search direction at α = 0 and at the accepted α.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub iter: usize,
    pub prev_value: f64,
    pub value: f64,
    pub alpha: f64,
    pub dphi0: f64,
    pub dphi: f64,
    pub grad_max: f64,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbfgsTrace {
    pub initial_value: f64,
    pub steps: Vec<StepRecord>,
    pub stop: StopReason,
    pub evaluations: usize,
}

impl LbfgsTrace {
    pub fn final_value(&self) -> f64 {
        self.steps.last().map_or(self.initial_value, |s| s.value)
    }

    /// Checks the sufficient-decrease and curvature conditions of every accepted step.
    pub fn wolfe_violations(&self, c1: f64, c2: f64, slack: f64) -> Vec<usize> {
        self.steps
            .iter()
            .filter(|s| {
                let armijo = s.value <= s.prev_value + c1 * s.alpha * s.dphi0 + slack * (1.0 + s.prev_value.abs());
                let curvature = s.dphi.abs() <= c2 * s.dphi0.abs() + slack;
                !(armijo && curvature)
            })
            .map(|s| s.iter)
            .collect()
    }
}

fn dot<S: Real>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn max_abs<S: Real>(a: &[S]) -> S {
    a.iter().fold(S::zero(), |m, &x| m.max(x.abs()))
}

struct Probe<S> {
    alpha: S,
    value: S,
    dphi: S,
}

struct LineSearch<'a, S> {
    x: &'a [S],
    d: &'a [S],
    xt: Vec<S>,
    gt: Vec<S>,
    evaluations: usize,
}

impl<'a, S: Real> LineSearch<'a, S> {
    fn new(x: &'a [S], d: &'a [S]) -> Self {
        LineSearch { x, d, xt: vec![S::zero(); x.len()], gt: vec![S::zero(); x.len()], evaluations: 0 }
    }

    fn probe<F: FnMut(&[S], &mut [S]) -> S>(&mut self, f: &mut F, alpha: S) -> Probe<S> {
        for ((t, &x), &d) in self.xt.iter_mut().zip(self.x).zip(self.d) {
            *t = x + alpha * d;
        }
        let value = f(&self.xt, &mut self.gt);
        self.evaluations += 1;
        Probe { alpha, value, dphi: dot(&self.gt, self.d) }
    }
}

/// Safeguarded cubic-interpolation minimizer on [lo, hi], falling back to bisection.
fn interpolate<S: Real>(lo: &Probe<S>, hi: &Probe<S>) -> S {
    let (a0, a1) = (lo.alpha, hi.alpha);
    let two = S::lit(2.0);
    let three = S::lit(3.0);
    let d1 = lo.dphi + hi.dphi - three * (lo.value - hi.value) / (a0 - a1);
    let disc = d1 * d1 - lo.dphi * hi.dphi;
    let mid = (a0 + a1) / two;
    if disc < S::zero() || !disc.is_finite() {
        return mid;
    }
    let d2 = (a1 - a0).signum() * disc.sqrt();
    let a = a1 - (a1 - a0) * (hi.dphi + d2 - d1) / (hi.dphi - lo.dphi + two * d2);
    let (left, right) = if a0 < a1 { (a0, a1) } else { (a1, a0) };
    let margin = S::lit(0.1) * (right - left);
    if !a.is_finite() || a < left + margin || a > right - margin {
        mid
    } else {
        a
    }
}

/// Strong-Wolfe search along `d`; on success `xt`/`gt` hold the accepted point.
fn strong_wolfe<S: Real, F: FnMut(&[S], &mut [S]) -> S>(
    ls: &mut LineSearch<'_, S>,
    f: &mut F,
    f0: S,
    dphi0: S,
    alpha0: S,
    cfg: &LbfgsConfig,
) -> Option<Probe<S>> {
    let (c1, c2) = (S::lit(cfg.c1), S::lit(cfg.c2));
    let armijo = |p: &Probe<S>| p.value <= f0 + c1 * p.alpha * dphi0;
    let curvature = |p: &Probe<S>| p.dphi.abs() <= c2 * dphi0.abs();
    let mut prev = Probe { alpha: S::zero(), value: f0, dphi: dphi0 };
    let mut alpha = alpha0;
    let mut budget = cfg.max_line_search;
    let (mut lo, mut hi);
    loop {
        if budget == 0 {
            return None;
        }
        budget -= 1;
        let cur = ls.probe(f, alpha);
        if !cur.value.is_finite() || !armijo(&cur) || (prev.alpha > S::zero() && cur.value >= prev.value) {
            lo = prev;
            hi = cur;
            break;
        }
        if curvature(&cur) {
            return Some(cur);
        }
        if cur.dphi >= S::zero() {
            lo = cur;
            hi = prev;
            break;
        }
        alpha = cur.alpha * S::lit(2.0);
        prev = cur;
    }
    while budget > 0 {
        budget -= 1;
        let a = if hi.value.is_finite() { interpolate(&lo, &hi) } else { (lo.alpha + hi.alpha) / S::lit(2.0) };
        if (a - lo.alpha).abs() <= S::epsilon() * lo.alpha.abs().max(S::one()) {
            break;
        }
        let cur = ls.probe(f, a);
        if !cur.value.is_finite() || !armijo(&cur) || cur.value >= lo.value {
            hi = cur;
        } else {
            if curvature(&cur) {
                return Some(cur);
            }
            if cur.dphi * (hi.alpha - lo.alpha) >= S::zero() {
                hi = lo;
            }
            lo = cur;
        }
    }
    None
}

/// Minimizes `f`, which writes the gradient into its second argument and returns the value.
pub fn lbfgs_minimize<S: Real, F>(mut f: F, init: Vec<S>, cfg: &LbfgsConfig) -> Result<(Vec<S>, LbfgsTrace)>
where
    F: FnMut(&[S], &mut [S]) -> S,
{
    cfg.validate()?;
    let n = init.len();
    let mut x = init;
    let mut g = vec![S::zero(); n];
    let mut fx = f(&x, &mut g);
    if !fx.is_finite() {
        return Err(Error::Numerical(format!("objective not finite at the initial point: {fx}")));
    }
    let mut trace = LbfgsTrace { initial_value: fx.as_f64(), steps: Vec::new(), stop: StopReason::MaxIterations, evaluations: 1 };
    let mut history: VecDeque<(Vec<S>, Vec<S>, S)> = VecDeque::with_capacity(cfg.memory);
    let mut d = vec![S::zero(); n];
    let mut alphas = vec![S::zero(); cfg.memory];
    if max_abs(&g) < S::lit(cfg.grad_tol) {
        trace.stop = StopReason::GradientTolerance;
        return Ok((x, trace));
    }
    let mut iter = 0;
    loop {
        if iter == cfg.max_iters {
            trace.stop = StopReason::MaxIterations;
            break;
        }
        // Two-loop recursion: d = −H g.
        d.iter_mut().zip(&g).for_each(|(d, &g)| *d = -g);
        for (k, (s, y, rho)) in history.iter().enumerate().rev() {
            let a = *rho * dot(s, &d);
            alphas[k] = a;
            d.iter_mut().zip(y).for_each(|(d, &y)| *d -= a * y);
        }
        let alpha0 = if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|d| *d *= gamma);
            S::one()
        } else {
            S::one() / max_abs(&g).max(S::one())
        };
        for (k, (s, y, rho)) in history.iter().enumerate() {
            let b = *rho * dot(y, &d);
            let a = alphas[k];
            d.iter_mut().zip(s).for_each(|(d, &s)| *d += (a - b) * s);
        }
        let mut dphi0 = dot(&g, &d);
        let mut alpha0 = alpha0;
        if !(dphi0 < S::zero()) {
            history.clear();
            d.iter_mut().zip(&g).for_each(|(d, &g)| *d = -g);
            dphi0 = dot(&g, &d);
            alpha0 = S::one() / max_abs(&g).max(S::one());
        }
        let sd: Vec<S> = g.iter().map(|&g| -g).collect();
        let mut ls = LineSearch::new(&x, &d);
        let mut found = strong_wolfe(&mut ls, &mut f, fx, dphi0, alpha0, cfg);
        let mut evaluations = ls.evaluations;
        if found.is_none() && !history.is_empty() {
            // Retry once along steepest descent with fresh curvature memory.
            log::debug!("lbfgs: line search failed at iteration {iter}, resetting memory");
            history.clear();
            dphi0 = dot(&g, &sd);
            ls = LineSearch::new(&x, &sd);
            found = strong_wolfe(&mut ls, &mut f, fx, dphi0, S::one() / max_abs(&g).max(S::one()), cfg);
            evaluations += ls.evaluations;
        }
        trace.evaluations += evaluations;
        let Some(step) = found else {
            log::warn!("lbfgs: line search failed at iteration {iter}; returning best iterate");
            trace.stop = StopReason::LineSearchFailed;
            break;
        };
        let LineSearch { xt, gt, .. } = ls;
        let s: Vec<S> = xt.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<S> = gt.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > S::epsilon() * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == cfg.memory {
                history.pop_front();
            }
            history.push_back((s, y, S::one() / sy));
        }
        iter += 1;
        let prev = fx;
        x = xt;
        g = gt;
        fx = step.value;
        let gmax = max_abs(&g);
        trace.steps.push(StepRecord {
            iter,
            prev_value: prev.as_f64(),
            value: fx.as_f64(),
            alpha: step.alpha.as_f64(),
            dphi0: dphi0.as_f64(),
            dphi: step.dphi.as_f64(),
            grad_max: gmax.as_f64(),
            evaluations,
        });
        if gmax < S::lit(cfg.grad_tol) {
            trace.stop = StopReason::GradientTolerance;
            break;
        }
        let scale = prev.abs().max(fx.abs()).max(S::one());
        if (prev - fx).abs() / scale < S::lit(cfg.rel_tol) {
            trace.stop = StopReason::RelativeChange;
            break;
        }
    }
    Ok((x, trace))
}

/// Largest relative disagreement between the analytic gradient and central differences,
/// |a − n| / max(|a|, |n|, 1), over `n_coords` sampled coordinates. Coordinates with a
/// nonzero analytic gradient are sampled first, since hashed models leave most
/// coordinates untouched; every coordinate is checked when there are few enough.
pub fn check_gradient<S: Real, F>(mut f: F, params: &[S], eps: f64, n_coords: usize, seed: u64) -> f64
where
    F: FnMut(&[S], &mut [S]) -> S,
{
    let n = params.len();
    let mut grad = vec![S::zero(); n];
    f(params, &mut grad);
    let coords: Vec<usize> = if n <= n_coords {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (active, idle): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| grad[i] != S::zero());
        let take_active = active.len().min(n_coords);
        let mut out: Vec<usize> = sample(&mut rng, active.len(), take_active).into_iter().map(|k| active[k]).collect();
        let rest = (n_coords - take_active).min(idle.len());
        out.extend(sample(&mut rng, idle.len(), rest).into_iter().map(|k| idle[k]));
        out
    };
    let mut x = params.to_vec();
    let mut scratch = vec![S::zero(); n];
    let mut worst = 0.0f64;
    for i in coords {
        let orig = x[i];
        x[i] = orig + S::lit(eps);
        let up = f(&x, &mut scratch).as_f64();
        x[i] = orig - S::lit(eps);
        let down = f(&x, &mut scratch).as_f64();
        x[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let analytic = grad[i].as_f64();
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0);
        worst = worst.max(err);
    }
    worst
}
