//! Local polynomial optimization over basic semialgebraic sets.
//!
//! Augmented-Lagrangian outer loop with a BFGS inner solver, restarted
//! from a deterministic seeded family of points. This is deliberately a
//! local method: callers that need global structure (probing several
//! faces, certifying optima) run it multistart and treat the result as a
//! set of candidate minimizers, never as a proof of global optimality.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::poly::Polynomial;
use crate::set::BasicSet;

#[derive(Clone, Debug)]
pub struct SmoothProblem {
    pub n: usize,
    pub objective: Polynomial,
    pub inequalities: Vec<Polynomial>,
    pub equalities: Vec<Polynomial>,
    /// Sampling box for starts; not a hard constraint on iterates.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SmoothProblem {
    pub fn over_set(objective: Polynomial, set: &BasicSet, half_width: f64) -> Self {
        let n = set.n;
        SmoothProblem {
            n,
            objective,
            inequalities: set.inequalities.clone(),
            equalities: set.equalities.clone(),
            lower: vec![-half_width; n],
            upper: vec![half_width; n],
        }
    }

    pub fn with_box(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), self.n);
        assert_eq!(upper.len(), self.n);
        self.lower = lower;
        self.upper = upper;
        self
    }
}

#[derive(Clone, Debug)]
pub struct MinimizeOptions {
    pub starts: usize,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub initial_rho: f64,
    pub seed: u64,
    /// Minimizers closer than this (sup norm) are merged.
    pub dedupe_tol: f64,
    /// Constraint slack below which an inequality counts as active.
    pub active_tol: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            starts: 12,
            outer_iters: 25,
            inner_iters: 120,
            initial_rho: 10.0,
            seed: 0,
            dedupe_tol: 1e-6,
            active_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LocalMinimum {
    pub x: Vec<f64>,
    pub value: f64,
    /// Worst constraint violation at x.
    pub violation: f64,
    /// Sup-norm of the Lagrangian gradient with the reported multipliers.
    pub kkt_residual: f64,
    /// One nonnegative multiplier per inequality (zero when inactive).
    pub multipliers: Vec<f64>,
    pub eq_multipliers: Vec<f64>,
    pub active: Vec<usize>,
}

struct Workspace {
    obj_grad: Vec<Polynomial>,
    ineq_grads: Vec<Vec<Polynomial>>,
    eq_grads: Vec<Vec<Polynomial>>,
}

impl Workspace {
    fn new(p: &SmoothProblem) -> Self {
        Workspace {
            obj_grad: p.objective.gradient(),
            ineq_grads: p.inequalities.iter().map(|h| h.gradient()).collect(),
            eq_grads: p.equalities.iter().map(|e| e.gradient()).collect(),
        }
    }
}

fn eval_grad(grads: &[Polynomial], x: &[f64]) -> DVector<f64> {
    DVector::from_iterator(grads.len(), grads.iter().map(|g| g.eval(x)))
}

/// Augmented Lagrangian value and gradient for min f with h_i >= 0 and
/// e_k = 0 (classic quadratic-penalty multiplier form for both).
fn aug_value_grad(
    p: &SmoothProblem,
    ws: &Workspace,
    x: &[f64],
    mu: &[f64],
    nu: &[f64],
    rho: f64,
) -> (f64, DVector<f64>) {
    let mut v = p.objective.eval(x);
    let mut g = eval_grad(&ws.obj_grad, x);
    for (i, h) in p.inequalities.iter().enumerate() {
        let hv = h.eval(x);
        let t = (mu[i] - rho * hv).max(0.0);
        v += (t * t - mu[i] * mu[i]) / (2.0 * rho);
        if t > 0.0 {
            g -= eval_grad(&ws.ineq_grads[i], x) * t;
        }
    }
    for (k, e) in p.equalities.iter().enumerate() {
        let ev = e.eval(x);
        v += nu[k] * ev + 0.5 * rho * ev * ev;
        g += eval_grad(&ws.eq_grads[k], x) * (nu[k] + rho * ev);
    }
    (v, g)
}

fn violation(p: &SmoothProblem, x: &[f64]) -> f64 {
    let mut v: f64 = 0.0;
    for h in &p.inequalities {
        v = v.max(-h.eval(x));
    }
    for e in &p.equalities {
        v = v.max(e.eval(x).abs());
    }
    v.max(0.0)
}

/// BFGS with Armijo backtracking on the augmented Lagrangian.
fn inner_minimize(
    p: &SmoothProblem,
    ws: &Workspace,
    x0: &DVector<f64>,
    mu: &[f64],
    nu: &[f64],
    rho: f64,
    iters: usize,
) -> DVector<f64> {
    let n = p.n;
    let mut x = x0.clone();
    let mut h_inv = DMatrix::identity(n, n);
    let (mut fv, mut g) = aug_value_grad(p, ws, x.as_slice(), mu, nu, rho);
    for _ in 0..iters {
        if g.amax() <= 1e-10 * (1.0 + fv.abs()) {
            break;
        }
        let mut d = -(&h_inv * &g);
        let descent = d.dot(&g);
        if !(descent < -1e-14 * d.norm() * g.norm()) {
            h_inv = DMatrix::identity(n, n);
            d = -g.clone();
        }
        let slope = d.dot(&g);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..45 {
            let xt = &x + &d * t;
            let (ft, _) = aug_value_grad(p, ws, xt.as_slice(), mu, nu, rho);
            if ft <= fv + 1e-4 * t * slope {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        let x_new = &x + &d * t;
        let (f_new, g_new) = aug_value_grad(p, ws, x_new.as_slice(), mu, nu, rho);
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-10 * s.norm() * y.norm() {
            // Sherman-Morrison form of the inverse BFGS update.
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            let c1 = (sy + yhy) / (sy * sy);
            let hys = &hy * s.transpose();
            h_inv = h_inv + &s * s.transpose() * c1 - (&hys + hys.transpose()) / sy;
        }
        x = x_new;
        fv = f_new;
        g = g_new;
    }
    x
}

fn minimize_from(
    p: &SmoothProblem,
    ws: &Workspace,
    x0: DVector<f64>,
    opts: &MinimizeOptions,
) -> LocalMinimum {
    let mut x = x0;
    let mut mu = vec![0.0; p.inequalities.len()];
    let mut nu = vec![0.0; p.equalities.len()];
    let mut rho = opts.initial_rho;
    let mut prev_viol = f64::INFINITY;
    for _ in 0..opts.outer_iters {
        x = inner_minimize(p, ws, &x, &mu, &nu, rho, opts.inner_iters);
        let viol = violation(p, x.as_slice());
        for (i, h) in p.inequalities.iter().enumerate() {
            mu[i] = (mu[i] - rho * h.eval(x.as_slice())).max(0.0);
        }
        for (k, e) in p.equalities.iter().enumerate() {
            nu[k] += rho * e.eval(x.as_slice());
        }
        if viol <= 1e-10 {
            break;
        }
        if viol > 0.25 * prev_viol {
            rho = (rho * 4.0).min(1e8);
        }
        prev_viol = viol;
    }

    let xs = x.as_slice();
    let mut grad_l = eval_grad(&ws.obj_grad, xs);
    for (i, gi) in ws.ineq_grads.iter().enumerate() {
        if mu[i] > 0.0 {
            grad_l -= eval_grad(gi, xs) * mu[i];
        }
    }
    for (k, gk) in ws.eq_grads.iter().enumerate() {
        grad_l += eval_grad(gk, xs) * nu[k];
    }
    let active = p
        .inequalities
        .iter()
        .enumerate()
        .filter(|(_, h)| h.eval(xs) <= opts.active_tol)
        .map(|(i, _)| i)
        .collect();
    LocalMinimum {
        x: xs.to_vec(),
        value: p.objective.eval(xs),
        violation: violation(p, xs),
        kkt_residual: grad_l.amax(),
        multipliers: mu,
        eq_multipliers: nu,
        active,
    }
}

/// Deterministic multistart: seeded box samples (preferring feasible ones
/// when rejection finds them) plus the box center. Results are deduped
/// and sorted by objective value; callers treat the list as candidate
/// local minimizers.
pub fn multistart_minimize(p: &SmoothProblem, opts: &MinimizeOptions) -> Vec<LocalMinimum> {
    assert_eq!(p.lower.len(), p.n);
    assert_eq!(p.upper.len(), p.n);
    let ws = Workspace::new(p);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut starts: Vec<DVector<f64>> = Vec::new();
    let center =
        DVector::from_iterator(p.n, p.lower.iter().zip(&p.upper).map(|(a, b)| 0.5 * (a + b)));
    starts.push(center);
    let sample = |rng: &mut ChaCha8Rng| {
        DVector::from_iterator(
            p.n,
            p.lower
                .iter()
                .zip(&p.upper)
                .map(|(a, b)| rng.random_range(*a..*b)),
        )
    };
    // Prefer feasible starts: up to 40 rejection draws per requested start,
    // falling back to the raw draw.
    while starts.len() < opts.starts {
        let mut chosen = None;
        let mut fallback = None;
        for _ in 0..40 {
            let x = sample(&mut rng);
            if fallback.is_none() {
                fallback = Some(x.clone());
            }
            if violation(p, x.as_slice()) == 0.0 {
                chosen = Some(x);
                break;
            }
        }
        starts.push(chosen.or(fallback).expect("at least the fallback draw"));
    }

    let mut found: Vec<LocalMinimum> = Vec::new();
    for x0 in starts {
        let m = minimize_from(p, &ws, x0, opts);
        if !m.value.is_finite() || m.violation > 1e-6 {
            continue;
        }
        match found.iter_mut().find(|o| {
            o.x.iter()
                .zip(&m.x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
                <= opts.dedupe_tol
        }) {
            Some(existing) => {
                if m.value < existing.value {
                    *existing = m;
                }
            }
            None => found.push(m),
        }
    }
    found.sort_by(|a, b| a.value.total_cmp(&b.value));
    found
}

/// Least squares min ||A mu - b|| with mu >= 0, by exhaustive support
/// enumeration; A is given column-wise. Intended for small systems (a
/// handful of active constraints). Returns the multipliers and the
/// residual sup-norm.
pub fn nonnegative_ls(columns: &[Vec<f64>], b: &[f64]) -> (Vec<f64>, f64) {
    let m = columns.len();
    let n = b.len();
    let bv = DVector::from_column_slice(b);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 0u32..(1u32 << m) {
        let support: Vec<usize> = (0..m).filter(|j| mask & (1 << j) != 0).collect();
        let mut mu = vec![0.0; m];
        let residual;
        if support.is_empty() {
            residual = bv.norm();
        } else {
            let a = DMatrix::from_fn(n, support.len(), |i, jj| columns[support[jj]][i]);
            let svd = a.clone().svd(true, true);
            let sol = match svd.solve(&bv, 1e-12) {
                Ok(s) => s,
                Err(_) => continue,
            };
            if sol.iter().any(|&v| v < -1e-12) {
                continue;
            }
            for (jj, &j) in support.iter().enumerate() {
                mu[j] = sol[jj].max(0.0);
            }
            residual = (&a * &sol - &bv).norm();
        }
        let better = match &best {
            None => true,
            Some((_, r)) => residual < r - 1e-15,
        };
        if better {
            best = Some((mu, residual));
        }
    }
    best.expect("empty support always evaluated")
}
