//! Document-level joint decoding: a factor graph over trigger types `t_i`,
//! roles `r_ij` and entity types `a_j` with pairwise dense factors, relaxed
//! to the local marginal polytope and solved with AD³ (ADMM over factor
//! subproblems with agreement on shared variables).

mod qp;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{argmax, is_forbidden, Real};

pub use qp::{marginals as cell_marginals, solve_dense, solve_pair_qp, ActiveSet, PairShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Trigger,
    Role,
    Entity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable<S> {
    pub kind: VarKind,
    pub unary: Vec<S>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    TriggerRole,
    RoleEntity,
    TriggerPair,
}

/// Dense factor over `(x, y)` with `x` from variable `a`, `y` from `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor<S> {
    pub kind: FactorKind,
    pub a: usize,
    pub b: usize,
    pub scores: Vec<S>,
    pub allowed: Vec<usize>,
}

/// A role variable with the trigger and entity variables it links.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoleLink {
    pub role: usize,
    pub trigger: usize,
    pub entity: usize,
    pub tr_factor: usize,
    pub ra_factor: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct JointProblem<S> {
    pub vars: Vec<Variable<S>>,
    pub factors: Vec<Factor<S>>,
    pub roles: Vec<RoleLink>,
}

impl<S: Real> JointProblem<S> {
    pub fn new() -> Self {
        Self {
            vars: Vec::new(),
            factors: Vec::new(),
            roles: Vec::new(),
        }
    }

    fn push_var(&mut self, kind: VarKind, unary: Vec<S>) -> Result<usize> {
        if unary.is_empty() || unary.iter().any(|x| !x.is_finite() || is_forbidden(*x)) {
            return Err(Error::Config("variable unaries must be finite and non-empty".into()));
        }
        self.vars.push(Variable { kind, unary });
        Ok(self.vars.len() - 1)
    }

    fn push_factor(&mut self, kind: FactorKind, a: usize, b: usize, scores: Vec<S>) -> Result<usize> {
        let (da, db) = (self.vars[a].unary.len(), self.vars[b].unary.len());
        if scores.len() != da * db {
            return Err(Error::Config(format!(
                "factor table has {} cells, expected {da}×{db}",
                scores.len()
            )));
        }
        if scores.iter().any(|x| x.is_nan() || *x == S::infinity()) {
            return Err(Error::Config("factor scores must not be NaN or +inf".into()));
        }
        let allowed: Vec<usize> = (0..scores.len()).filter(|&c| !is_forbidden(scores[c])).collect();
        if allowed.is_empty() {
            return Err(Error::Config("factor without an allowed cell".into()));
        }
        self.factors.push(Factor { kind, a, b, scores, allowed });
        Ok(self.factors.len() - 1)
    }

    pub fn add_trigger(&mut self, unary: Vec<S>) -> Result<usize> {
        self.push_var(VarKind::Trigger, unary)
    }

    pub fn add_entity(&mut self, unary: Vec<S>) -> Result<usize> {
        self.push_var(VarKind::Entity, unary)
    }

    /// Adds `r_ij` between trigger `t` and entity `e`, with its two factor
    /// tables (forbidden cells at or below the sentinel threshold). Label 0
    /// is NONE: `(t, NONE)` and `(NONE, a)` must always be allowed.
    pub fn add_role(&mut self, trigger: usize, entity: usize, unary: Vec<S>, tr: Vec<S>, ra: Vec<S>) -> Result<usize> {
        let (nt, na, nr) = (
            self.vars[trigger].unary.len(),
            self.vars[entity].unary.len(),
            unary.len(),
        );
        if (0..nt).any(|t| tr.get(t * nr).is_none_or(|&x| is_forbidden(x)))
            || (0..na).any(|a| ra.get(a).is_none_or(|&x| is_forbidden(x)))
        {
            return Err(Error::Config("the NONE role must be compatible with every label".into()));
        }
        let role = self.push_var(VarKind::Role, unary)?;
        let tr_factor = self.push_factor(FactorKind::TriggerRole, trigger, role, tr)?;
        let ra_factor = self.push_factor(FactorKind::RoleEntity, role, entity, ra)?;
        self.roles.push(RoleLink {
            role,
            trigger,
            entity,
            tr_factor,
            ra_factor,
        });
        Ok(role)
    }

    pub fn add_trigger_pair(&mut self, first: usize, second: usize, scores: Vec<S>) -> Result<usize> {
        if scores.iter().any(|&x| is_forbidden(x)) {
            return Err(Error::Config("trigger-pair tables may not forbid cells".into()));
        }
        self.push_factor(FactorKind::TriggerPair, first, second, scores)
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn domain(&self, v: usize) -> usize {
        self.vars[v].unary.len()
    }

    fn cell(&self, f: &Factor<S>, x: &[usize]) -> usize {
        x[f.a] * self.domain(f.b) + x[f.b]
    }

    /// Objective of a full assignment, `None` if it hits a forbidden cell.
    pub fn score(&self, x: &[usize]) -> Option<S> {
        let mut s = S::zero();
        for (v, var) in self.vars.iter().enumerate() {
            s += var.unary[x[v]];
        }
        for f in &self.factors {
            let c = f.scores[self.cell(f, x)];
            if is_forbidden(c) {
                return None;
            }
            s += c;
        }
        Some(s)
    }

    pub fn is_feasible(&self, x: &[usize]) -> bool {
        x.len() == self.num_vars() && self.score(x).is_some()
    }

    fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_vars()];
        for f in &self.factors {
            deg[f.a] += 1;
            deg[f.b] += 1;
        }
        deg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ad3Config {
    pub eta: f64,
    pub max_iterations: usize,
    pub residual_tolerance: f64,
    pub adapt_eta: bool,
    pub eta_min: f64,
    pub eta_max: f64,
    pub integrality_tolerance: f64,
}

impl Default for Ad3Config {
    fn default() -> Self {
        Self {
            eta: 0.1,
            max_iterations: 1000,
            residual_tolerance: 1e-6,
            adapt_eta: true,
            eta_min: 1e-3,
            eta_max: 1e3,
            integrality_tolerance: 1e-4,
        }
    }
}

impl Ad3Config {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.eta, self.residual_tolerance, self.eta_min, self.eta_max, self.integrality_tolerance];
        if positive.iter().any(|&x| !(x > 0.0)) || self.max_iterations == 0 || self.eta_min > self.eta_max {
            return Err(Error::Config("AD3 settings must be positive with eta_min <= eta_max".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    IntegralExact,
    FractionalRounded,
    IterationLimit,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::IntegralExact => "integral_exact",
            Status::FractionalRounded => "fractional_rounded",
            Status::IterationLimit => "iteration_limit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    /// Dual objective at the multipliers used in this iteration.
    pub dual: f64,
    /// Lowest dual objective seen so far.
    pub best_dual: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSolution<S> {
    pub posteriors: Vec<Vec<S>>,
    pub assignment: Vec<usize>,
    pub status: Status,
    /// Objective of `assignment`.
    pub primal: S,
    /// Best (lowest) dual bound found.
    pub dual: S,
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
}

/// Mean over a variable's factors of their local marginals.
fn average_into<S: Real>(p: &mut [Vec<S>], deg: &[usize], problem: &JointProblem<S>, q: &[(Vec<S>, Vec<S>)]) {
    for (v, pv) in p.iter_mut().enumerate() {
        if deg[v] > 0 {
            pv.iter_mut().for_each(|x| *x = S::zero());
        }
    }
    for (f, fac) in problem.factors.iter().enumerate() {
        for (k, x) in q[f].0.iter().enumerate() {
            p[fac.a][k] += *x;
        }
        for (k, x) in q[f].1.iter().enumerate() {
            p[fac.b][k] += *x;
        }
    }
    for (v, pv) in p.iter_mut().enumerate() {
        if deg[v] > 0 {
            let d = S::lit(deg[v] as f64);
            pv.iter_mut().for_each(|x| *x /= d);
        }
    }
}

pub fn ad3_solve<S: Real>(problem: &JointProblem<S>, cfg: &Ad3Config) -> Result<JointSolution<S>> {
    cfg.validate()?;
    let n = problem.num_vars();
    let deg = problem.degrees();
    let mut p: Vec<Vec<S>> = problem
        .vars
        .iter()
        .enumerate()
        .map(|(v, var)| {
            let d = var.unary.len();
            if deg[v] == 0 {
                let mut e = vec![S::zero(); d];
                e[argmax(&var.unary)] = S::one();
                e
            } else {
                vec![S::one() / S::lit(d as f64); d]
            }
        })
        .collect();
    let isolated: S = (0..n)
        .filter(|&v| deg[v] == 0)
        .map(|v| problem.vars[v].unary[argmax(&problem.vars[v].unary)])
        .fold(S::zero(), |a, b| a + b);

    if problem.factors.is_empty() {
        let assignment: Vec<usize> = (0..n).map(|v| argmax(&problem.vars[v].unary)).collect();
        let primal = problem.score(&assignment).expect("unary-only problem is always feasible");
        let row = TraceRow {
            iter: 1,
            dual: primal.as_f64(),
            best_dual: primal.as_f64(),
            primal_residual: 0.0,
            dual_residual: 0.0,
            eta: cfg.eta,
        };
        return Ok(JointSolution {
            posteriors: p,
            assignment,
            status: Status::IntegralExact,
            primal,
            dual: primal,
            iterations: 1,
            trace: vec![row],
        });
    }

    // Each variable's unary is split evenly over the factors it touches.
    let share: Vec<Vec<S>> = (0..n)
        .map(|v| {
            let d = S::lit(deg[v].max(1) as f64);
            problem.vars[v].unary.iter().map(|&u| u / d).collect()
        })
        .collect();
    let mut lambda: Vec<(Vec<S>, Vec<S>)> = problem
        .factors
        .iter()
        .map(|f| (vec![S::zero(); problem.domain(f.a)], vec![S::zero(); problem.domain(f.b)]))
        .collect();
    let mut sets: Vec<ActiveSet<S>> = problem
        .factors
        .iter()
        .map(|f| {
            let best = f
                .allowed
                .iter()
                .copied()
                .fold(None, |acc: Option<usize>, c| match acc {
                    Some(b) if f.scores[b] >= f.scores[c] => acc,
                    _ => Some(c),
                })
                .unwrap();
            ActiveSet::vertex(best)
        })
        .collect();
    let mut q: Vec<(Vec<S>, Vec<S>)> = lambda.clone();
    let edges: usize = deg.iter().sum();
    let edges_s = S::lit(edges as f64);

    let mut eta = S::lit(cfg.eta);
    let tol = S::lit(cfg.residual_tolerance);
    let mut trace = Vec::new();
    let mut best_dual = S::infinity();
    let mut converged = false;
    let mut iterations = 0;
    let mut lin = Vec::new();
    for it in 1..=cfg.max_iterations {
        iterations = it;
        let mut dual = isolated;
        for (f, fac) in problem.factors.iter().enumerate() {
            let (da, db) = (problem.domain(fac.a), problem.domain(fac.b));
            let shape = PairShape { dx: da, dy: db };
            let (la, lb) = &lambda[f];
            let nu_a: Vec<S> = (0..da).map(|k| share[fac.a][k] + la[k]).collect();
            let nu_b: Vec<S> = (0..db).map(|k| share[fac.b][k] + lb[k]).collect();
            let mut local_max = S::neg_infinity();
            lin.clear();
            lin.resize(da * db, S::zero());
            for &c in &fac.allowed {
                let s = fac.scores[c];
                let (x, y) = (c / db, c % db);
                local_max = local_max.max(s + nu_a[x] + nu_b[y]);
                lin[c] = s / eta;
            }
            dual += local_max;
            let ax: Vec<S> = (0..da).map(|k| p[fac.a][k] + nu_a[k] / eta).collect();
            let ay: Vec<S> = (0..db).map(|k| p[fac.b][k] + nu_b[k] / eta).collect();
            solve_pair_qp(shape, &fac.allowed, &lin, &ax, &ay, &mut sets[f]);
            q[f] = qp::marginals(shape, &sets[f]);
        }
        best_dual = best_dual.min(dual);

        let p_old = p.clone();
        average_into(&mut p, &deg, problem, &q);
        let mut primal_sq = S::zero();
        for (f, fac) in problem.factors.iter().enumerate() {
            for (k, x) in q[f].0.iter().enumerate() {
                let diff = *x - p[fac.a][k];
                primal_sq += diff * diff;
                lambda[f].0[k] -= eta * diff;
            }
            for (k, x) in q[f].1.iter().enumerate() {
                let diff = *x - p[fac.b][k];
                primal_sq += diff * diff;
                lambda[f].1[k] -= eta * diff;
            }
        }
        let mut dual_sq = S::zero();
        for v in 0..n {
            if deg[v] == 0 {
                continue;
            }
            let d: S = p[v].iter().zip(&p_old[v]).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
            dual_sq += S::lit(deg[v] as f64) * d;
        }
        let r_p = (primal_sq / edges_s).sqrt();
        let r_d = eta * (dual_sq / edges_s).sqrt();
        trace.push(TraceRow {
            iter: it,
            dual: dual.as_f64(),
            best_dual: best_dual.as_f64(),
            primal_residual: r_p.as_f64(),
            dual_residual: r_d.as_f64(),
            eta: eta.as_f64(),
        });
        if r_p <= tol && r_d <= tol {
            converged = true;
            break;
        }
        if cfg.adapt_eta {
            let ten = S::lit(10.0);
            if r_p > ten * r_d {
                eta = (eta * S::lit(2.0)).min(S::lit(cfg.eta_max));
            } else if r_d > ten * r_p {
                eta = (eta / S::lit(2.0)).max(S::lit(cfg.eta_min));
            }
        }
    }

    let itol = S::lit(cfg.integrality_tolerance);
    let integral = p
        .iter()
        .all(|pv| pv.iter().all(|&x| x <= itol || x >= S::one() - itol));
    let argmax_assignment: Vec<usize> = p.iter().map(|pv| argmax(pv)).collect();
    let (assignment, status) = if converged && integral && problem.is_feasible(&argmax_assignment) {
        (argmax_assignment, Status::IntegralExact)
    } else {
        let x = round_and_repair(&p, problem);
        (x, if converged { Status::FractionalRounded } else { Status::IterationLimit })
    };
    let primal = problem
        .score(&assignment)
        .ok_or_else(|| Error::Numerical("decoder produced an infeasible assignment".into()))?;
    Ok(JointSolution {
        posteriors: p,
        assignment,
        status,
        primal,
        dual: best_dual,
        iterations,
        trace,
    })
}

/// Per-variable argmax (ties to the lowest label), then repairs any schema
/// violation: roles not allowed by their trigger's type become NONE, and an
/// entity type incompatible with a selecting role is replaced by the most
/// probable type compatible with all selecting roles. If no such type
/// exists, those roles fall back to NONE.
pub fn round_and_repair<S: Real>(posteriors: &[Vec<S>], problem: &JointProblem<S>) -> Vec<usize> {
    let mut x: Vec<usize> = posteriors.iter().map(|pv| argmax(pv)).collect();
    let allowed = |f: &Factor<S>, c: usize| !is_forbidden(f.scores[c]);
    for link in &problem.roles {
        let f = &problem.factors[link.tr_factor];
        let nr = problem.domain(link.role);
        if !allowed(f, x[link.trigger] * nr + x[link.role]) {
            x[link.role] = 0;
        }
    }
    let mut entities: Vec<usize> = problem.roles.iter().map(|l| l.entity).collect();
    entities.sort_unstable();
    entities.dedup();
    for e in entities {
        let na = problem.domain(e);
        let selecting: Vec<&RoleLink> = problem
            .roles
            .iter()
            .filter(|l| l.entity == e && x[l.role] != 0)
            .collect();
        let ok = |a: usize, x: &[usize]| {
            selecting
                .iter()
                .all(|l| allowed(&problem.factors[l.ra_factor], x[l.role] * na + a))
        };
        if ok(x[e], &x) {
            continue;
        }
        let mut best: Option<usize> = None;
        for a in 0..na {
            if ok(a, &x) && best.is_none_or(|b| posteriors[e][a] > posteriors[e][b]) {
                best = Some(a);
            }
        }
        match best {
            Some(a) => x[e] = a,
            None => {
                for l in &selecting {
                    x[l.role] = 0;
                }
            }
        }
    }
    x
}

/// Exact optimum by enumeration of all trigger and entity variables; each
/// role is then maximized in closed form given its two neighbours. Ties
/// break lexicographically (lowest labels first) over triggers and
/// entities in variable order, then roles. Also returns the gap to the
/// second-best assignment (zero when the optimum is not unique).
pub fn brute_force_solve<S: Real>(problem: &JointProblem<S>) -> Result<(Vec<usize>, S, S)> {
    let n = problem.num_vars();
    let free: Vec<usize> = (0..n).filter(|&v| problem.vars[v].kind != VarKind::Role).collect();
    let size: f64 = free.iter().map(|&v| problem.domain(v) as f64).product();
    if size > 1e7 {
        return Err(Error::TooLarge(size));
    }
    let pair_factors: Vec<&Factor<S>> = problem
        .factors
        .iter()
        .filter(|f| f.kind == FactorKind::TriggerPair)
        .collect();
    let mut x = vec![0usize; n];
    let mut best: Option<(Vec<usize>, S)> = None;
    let mut other = S::neg_infinity();
    let mut best_runner = S::neg_infinity();
    loop {
        let mut total = S::zero();
        for &v in &free {
            total += problem.vars[v].unary[x[v]];
        }
        for f in &pair_factors {
            total += f.scores[x[f.a] * problem.domain(f.b) + x[f.b]];
        }
        let mut runner_gap = S::infinity();
        let mut feasible = true;
        for link in &problem.roles {
            let nr = problem.domain(link.role);
            let na = problem.domain(link.entity);
            let ftr = &problem.factors[link.tr_factor];
            let fra = &problem.factors[link.ra_factor];
            let mut top: Option<(usize, S)> = None;
            let mut next = S::neg_infinity();
            for r in 0..nr {
                let a = ftr.scores[x[link.trigger] * nr + r];
                let b = fra.scores[r * na + x[link.entity]];
                if is_forbidden(a) || is_forbidden(b) {
                    continue;
                }
                let s = problem.vars[link.role].unary[r] + a + b;
                match top {
                    Some((_, t)) if s <= t => next = next.max(s),
                    Some((_, t)) => {
                        next = next.max(t);
                        top = Some((r, s));
                    }
                    None => top = Some((r, s)),
                }
            }
            match top {
                Some((r, s)) => {
                    x[link.role] = r;
                    total += s;
                    runner_gap = runner_gap.min(s - next);
                }
                None => {
                    feasible = false;
                    break;
                }
            }
        }
        if feasible {
            let runner = total - runner_gap;
            match &best {
                Some((_, b)) if total <= *b => other = other.max(total),
                _ => {
                    if let Some((_, b)) = &best {
                        other = other.max(*b);
                    }
                    best = Some((x.clone(), total));
                    best_runner = runner;
                }
            }
        }
        // Odometer over free variables, last variable fastest.
        let mut k = free.len();
        loop {
            if k == 0 {
                let (bx, b) = best.ok_or_else(|| Error::Numerical("no feasible assignment".into()))?;
                let second = other.max(best_runner);
                let margin = if second == S::neg_infinity() { S::infinity() } else { b - second };
                return Ok((bx, b, margin));
            }
            k -= 1;
            let v = free[k];
            x[v] += 1;
            if x[v] < problem.domain(v) {
                break;
            }
            x[v] = 0;
        }
    }
}
