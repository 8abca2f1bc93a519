//! Hypothesis checks that decide which construction route a set admits.
//!
//! Four checks are provided, in increasing order of localness:
//!
//! * [`check_sos_concave`] — a global certificate: is the negated Hessian
//!   of a defining polynomial a sum-of-squares matrix? Decided by a Gram
//!   matrix SDP; a positive answer comes with a checkable certificate.
//! * [`check_quasi_concave_at`] — a pointwise test: at a boundary point,
//!   is the defining polynomial (strictly) quasi-concave, i.e. does the
//!   Hessian quadratic form have the right sign on the tangent space?
//! * [`pdlh_probe`] — a sampled probe of the Lagrange-Hessian condition:
//!   minimize sampled linear functionals over the set intersected with a
//!   small ball and check positive definiteness of the Lagrangian Hessian
//!   on that ball. Sampled evidence, not a proof — the real condition
//!   quantifies over every direction.
//! * [`classify`] — per-constraint roll-up over sampled boundary points,
//!   with a redundancy probe for constraints that fail the pointwise
//!   necessary condition only where they do not actually shape the set.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::optimize::{multistart_minimize, MinimizeOptions, SmoothProblem};
use crate::poly::{monomial_vector, Exponent, PolyMatrix, Polynomial};
use crate::sdp::{solve, SdpOptions, SdpProblem, SdpStatus};
use crate::set::{BallConstraint, BasicSet, UnionSet};
use crate::symmat::SymMat;

/// Boundary points are declared active on a constraint when |h_i| is at
/// most this; bisection drives the minimum constraint below it first.
pub const BOUNDARY_ACTIVE_TOL: f64 = 1e-8;

/// Bisection target for |min_i h_i| when landing a ray on the boundary.
pub const BISECTION_TOL: f64 = 1e-10;

/// Tolerances and seeds shared by the certification checks.
#[derive(Clone, Debug)]
pub struct CertifyOptions {
    /// Eigenvalue threshold: tangent eigenvalues within [-eig_tol, eig_tol]
    /// of zero are neither strictly positive nor negative.
    pub eig_tol: f64,
    /// Gradient norms at or below this count as singular points.
    pub grad_tol: f64,
    /// First-order optimality residual accepted by the Lagrange probe.
    pub kkt_tol: f64,
    /// Minimum Lagrangian-Hessian eigenvalue that still counts as
    /// positive definite in the sampled probe.
    pub pd_tol: f64,
    pub seed: u64,
    /// Boundary points sampled per union block by [`classify`].
    pub boundary_samples: usize,
    pub sdp: SdpOptions,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            eig_tol: 1e-6,
            grad_tol: 1e-7,
            kkt_tol: 1e-5,
            pd_tol: 1e-6,
            seed: 0,
            boundary_samples: 32,
            sdp: SdpOptions::default(),
        }
    }
}

pub(crate) fn mix_seed(base: u64, salt: u64) -> u64 {
    base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E5AB)
}

// ---------------------------------------------------------------------------
// Sum-of-squares concavity
// ---------------------------------------------------------------------------

/// Witness that -∇²g is a sum-of-squares matrix: a PSD Gram matrix `Q`
/// over the product basis {w_i · v_p(x)} such that
/// wᵀ(-∇²g(x))w = (w ⊗ v(x))ᵀ Q (w ⊗ v(x)) identically in (w, x).
/// A square-root factor W(x) with -∇²g = WᵀW is recoverable by factoring
/// Q; `rank` is the numerical rank of Q, i.e. the number of rows W needs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SosConcavityCertificate {
    /// Monomial basis v(x); the Gram matrix is indexed by (variable,
    /// basis monomial) pairs, (i, p) ↦ i·len(basis) + p.
    pub basis: Vec<Exponent>,
    /// PSD Gram matrix of dimension n·len(basis).
    pub gram: SymMat,
    /// Numerical rank of the Gram matrix.
    pub rank: usize,
    /// Largest coefficient mismatch of the quadratic-form identity after
    /// projecting the Gram matrix onto the PSD cone.
    pub residual: f64,
    /// Coefficient scale used to normalize the residual bound.
    pub scale: f64,
}

/// Outcome of the sum-of-squares concavity check. `NotSosConcave` is a
/// definite no (the Gram SDP needs an indefinite Gram matrix by at least
/// `infeasibility`); `Indeterminate` means the solver could not settle
/// the question and is deliberately distinct from a no.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum SosOutcome {
    Certified(SosConcavityCertificate),
    NotSosConcave { infeasibility: f64 },
    Indeterminate { reason: String },
}

impl SosOutcome {
    pub fn certificate(&self) -> Option<&SosConcavityCertificate> {
        match self {
            SosOutcome::Certified(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_certified(&self) -> bool {
        matches!(self, SosOutcome::Certified(_))
    }
}

fn packed_index(r: usize, c: usize) -> usize {
    debug_assert!(r >= c);
    r * (r + 1) / 2 + c
}

/// Decide whether -∇²g is a sum-of-squares matrix polynomial.
///
/// Poses min t s.t. Q + tI ⪰ 0, t + 1 ≥ 0, subject to linear coefficient
/// matching between the Gram quadratic form and the n(n+1)/2 polynomial
/// entries of -∇²g. The optimum t* is (minus) the most positive
/// semidefinite the Gram matrix can be made: t* ≤ 0 certifies, t* > 0
/// refutes. Degree ≤ 1 polynomials have a zero Hessian and are certified
/// vacuously.
pub fn check_sos_concave(g: &Polynomial, opts: &CertifyOptions) -> Result<SosOutcome> {
    let n = g.num_vars();
    if n == 0 {
        return Err(Error::InvalidInput("polynomial in zero variables".into()));
    }
    let neg_hess = g.hessian().scale(-1.0);
    let scale = 1.0_f64.max(neg_hess.max_abs_coeff());

    let Some(target_deg) = neg_hess.max_degree() else {
        // Zero Hessian: certified by the zero Gram matrix over basis {1}.
        return Ok(SosOutcome::Certified(SosConcavityCertificate {
            basis: vec![Exponent::zeros(n)],
            gram: SymMat::zeros(n),
            rank: 0,
            residual: 0.0,
            scale,
        }));
    };

    let half = target_deg.div_ceil(2);
    let basis = monomial_vector(n, half);
    let bsz = basis.len();
    let dim = n * bsz;
    let num_q = dim * (dim + 1) / 2;
    let t_var = num_q; // last variable
    let num_vars = num_q + 1;

    // Every monomial expressible as a product of two basis monomials must
    // be matched (to zero where -∇²g has no such term), or the Gram form
    // would be free to invent terms.
    let mut products: BTreeMap<Exponent, Vec<(usize, usize)>> = BTreeMap::new();
    for p in 0..bsz {
        for q in 0..bsz {
            let e = basis[p].add(&basis[q]);
            products.entry(e).or_default().push((p, q));
        }
    }

    let mut prob = SdpProblem::new(num_vars);
    prob.objective[t_var] = 1.0;

    // Gram block: Q + tI ⪰ 0.
    let mut fs = Vec::with_capacity(num_vars);
    for r in 0..dim {
        for c in 0..=r {
            let mut m = SymMat::zeros(dim);
            m.set(r, c, 1.0);
            fs.push((packed_index(r, c), m));
        }
    }
    fs.push((t_var, SymMat::identity(dim)));
    prob.add_block(SymMat::zeros(dim), fs);

    // Floor block: t + 1 ≥ 0 keeps the problem bounded below.
    let mut floor0 = SymMat::zeros(1);
    floor0.set(0, 0, 1.0);
    let mut floor_t = SymMat::zeros(1);
    floor_t.set(0, 0, 1.0);
    prob.add_block(floor0, vec![(t_var, floor_t)]);

    // Coefficient matching. For the (i, j) entry of -∇²g and monomial e:
    //   i = j: Σ_{p,q: βp+βq=e} Q[(i,p),(i,q)] = coeff
    //   i < j: Σ_{p,q: βp+βq=e} Q[(i,p),(j,q)] = coeff
    // where (i, p) ↦ i·bsz + p indexes the Gram matrix. With i < j the
    // row group of j sits strictly below the group of i, so each ordered
    // pair touches a distinct packed entry; with i = j the ordered pairs
    // (p, q) and (q, p) fold onto one packed entry.
    for i in 0..n {
        for j in i..n {
            let target = neg_hess.get(i, j);
            for (e, pairs) in &products {
                let mut row = vec![0.0; num_vars];
                for &(p, q) in pairs {
                    if i == j {
                        let r = i * bsz + p.max(q);
                        let c = i * bsz + p.min(q);
                        row[packed_index(r, c)] += 1.0;
                    } else {
                        let r = j * bsz + q;
                        let c = i * bsz + p;
                        row[packed_index(r, c)] += 1.0;
                    }
                }
                prob.add_equality(row, target.coeff(e));
            }
        }
    }

    let sol = solve(&prob, &opts.sdp)?;
    if sol.status != SdpStatus::Optimal {
        return Ok(SosOutcome::Indeterminate {
            reason: format!("Gram SDP ended with status {:?}", sol.status),
        });
    }
    let t_star = sol.objective;
    if t_star > opts.eig_tol * scale {
        return Ok(SosOutcome::NotSosConcave {
            infeasibility: t_star,
        });
    }

    // Assemble Q, project onto the PSD cone, and re-verify the matching
    // so the certificate stands on its own rather than on solver trust.
    let mut q = DMatrix::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..=r {
            let v = sol.z[packed_index(r, c)];
            q[(r, c)] = v;
            q[(c, r)] = v;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(q);
    let max_eig = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let rank_tol = 1e-8 * 1.0_f64.max(max_eig);
    let rank = eig.eigenvalues.iter().filter(|&&l| l > rank_tol).count();
    let clipped = DVector::from_iterator(dim, eig.eigenvalues.iter().map(|&l| l.max(0.0)));
    let mut psd = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    // Symmetrize away roundoff from the triple product.
    for r in 0..dim {
        for c in 0..r {
            let v = 0.5 * (psd[(r, c)] + psd[(c, r)]);
            psd[(r, c)] = v;
            psd[(c, r)] = v;
        }
    }

    let mut residual = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            let target = neg_hess.get(i, j);
            for (e, pairs) in &products {
                let mut got = 0.0;
                for &(p, q) in pairs {
                    got += psd[(i * bsz + p, j * bsz + q)];
                }
                residual = residual.max((got - target.coeff(e)).abs());
            }
        }
    }
    if residual > 1e-7 * scale {
        return Ok(SosOutcome::Indeterminate {
            reason: format!(
                "PSD projection broke coefficient matching (residual {residual:.3e} > {:.3e})",
                1e-7 * scale
            ),
        });
    }

    Ok(SosOutcome::Certified(SosConcavityCertificate {
        basis,
        gram: SymMat::from_dense(&psd),
        rank,
        residual,
        scale,
    }))
}

impl SosConcavityCertificate {
    /// Evaluate both sides of the certified identity at (w, x) and return
    /// the absolute mismatch. Used by soundness property tests.
    pub fn identity_mismatch(&self, g: &Polynomial, w: &[f64], x: &[f64]) -> f64 {
        let n = g.num_vars();
        let bsz = self.basis.len();
        let neg_hess = g.hessian().scale(-1.0).eval(x);
        let wv = DVector::from_column_slice(w);
        let lhs = (wv.transpose() * &neg_hess * &wv)[(0, 0)];
        let mut kron = DVector::zeros(n * bsz);
        for i in 0..n {
            for p in 0..bsz {
                kron[i * bsz + p] = w[i] * self.basis[p].eval(x);
            }
        }
        let gram = self.gram.to_dense();
        let rhs = (kron.transpose() * gram * &kron)[(0, 0)];
        (lhs - rhs).abs()
    }
}

// ---------------------------------------------------------------------------
// Pointwise quasi-concavity
// ---------------------------------------------------------------------------

/// Verdict of the tangent-space curvature test at one point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointVerdict {
    pub point: Vec<f64>,
    /// Which constraint of the enclosing set this refers to; 0 when the
    /// check is run on a bare polynomial.
    pub constraint: usize,
    pub gradient_norm: f64,
    /// Eigenvalues of -R∇²gR off the gradient direction (ascending);
    /// at singular points, the full spectrum of -∇²g.
    pub tangent_eigenvalues: Vec<f64>,
    pub nonsingular: bool,
    pub quasi_concave: bool,
    pub strictly_quasi_concave: bool,
}

impl PointVerdict {
    pub fn with_constraint(mut self, k: usize) -> Self {
        self.constraint = k;
        self
    }

    pub fn min_tangent_eigenvalue(&self) -> f64 {
        self.tangent_eigenvalues
            .first()
            .copied()
            .unwrap_or(f64::INFINITY)
    }
}

/// Test (strict) quasi-concavity of `g` at the point `u`.
///
/// At a nonsingular point the projector R(u) = I − ∇g∇gᵀ/‖∇g‖² restricts
/// -∇²g(u) to the tangent space of the level set; the eigenvalue carried
/// by the gradient direction is an artifact of the projection and is
/// discarded. Quasi-concavity asks the remaining eigenvalues to be
/// nonnegative (within eig_tol); the strict variant asks them to be
/// positive (beyond eig_tol). At singular points (‖∇g(u)‖ ≤ grad_tol)
/// there is no tangent space and the test falls back to the full
/// Hessian: -∇²g(u) ⪰ 0, or ≻ 0 for the strict flag. Both flags are
/// always computed and reported.
pub fn check_quasi_concave_at(g: &Polynomial, u: &[f64], opts: &CertifyOptions) -> PointVerdict {
    let n = g.num_vars();
    assert_eq!(u.len(), n, "point dimension mismatch");
    let grad = DVector::from_column_slice(&g.gradient_at(u));
    let gradient_norm = grad.norm();
    let neg_hess = -g.hessian().eval(u);

    let (tangent, nonsingular) = if gradient_norm <= opts.grad_tol {
        let mut eigs: Vec<f64> = neg_hess.symmetric_eigenvalues().iter().cloned().collect();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        (eigs, false)
    } else {
        let d = &grad / gradient_norm;
        let r = DMatrix::identity(n, n) - &d * d.transpose();
        let mut p = &r * &neg_hess * &r;
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (p[(i, j)] + p[(j, i)]);
                p[(i, j)] = v;
                p[(j, i)] = v;
            }
        }
        let eig = nalgebra::SymmetricEigen::new(p);
        // The gradient direction is an eigenvector with eigenvalue 0 by
        // construction; drop the eigenpair most aligned with it.
        let mut drop_idx = 0;
        let mut best_align = -1.0;
        for k in 0..n {
            let align = eig.eigenvectors.column(k).dot(&d).abs();
            if align > best_align {
                best_align = align;
                drop_idx = k;
            }
        }
        let mut eigs: Vec<f64> = (0..n)
            .filter(|&k| k != drop_idx)
            .map(|k| eig.eigenvalues[k])
            .collect();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        (eigs, true)
    };

    let min = tangent.first().copied().unwrap_or(f64::INFINITY);
    PointVerdict {
        point: u.to_vec(),
        constraint: 0,
        gradient_norm,
        tangent_eigenvalues: tangent,
        nonsingular,
        quasi_concave: min >= -opts.eig_tol,
        strictly_quasi_concave: min >= opts.eig_tol,
    }
}

// ---------------------------------------------------------------------------
// Boundary sampling
// ---------------------------------------------------------------------------

/// A sampled boundary point together with the constraints active there.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub point: Vec<f64>,
    pub active: Vec<usize>,
}

/// Sample points on the boundary of a bounded basic set by shooting rays
/// from interior points and bisecting the sign change of min_i h_i to
/// |min_i h_i| ≤ 1e-10. Deterministic given the seed. The set must be
/// bounded inside `bbox`; rays that never leave the set are skipped.
///
/// When rejection sampling cannot find an interior point, the caller is
/// asked for an explicit hint (see [`Error::NoInteriorPoint`]); a
/// supplied `interior_hint` is validated and then used as the ray base.
pub fn sample_boundary(
    s: &BasicSet,
    bbox: &[(f64, f64)],
    count: usize,
    seed: u64,
    interior_hint: Option<&[f64]>,
) -> Result<Vec<BoundaryPoint>> {
    s.validate()?;
    if !s.equalities.is_empty() {
        return Err(Error::InvalidInput(
            "boundary sampling handles inequality-defined sets only".into(),
        ));
    }
    if bbox.len() != s.n {
        return Err(Error::DimensionMismatch(format!(
            "bounding box has {} entries for an {}-variable set",
            bbox.len(),
            s.n
        )));
    }
    for &(lo, hi) in bbox {
        if !(lo < hi) {
            return Err(Error::InvalidInput(format!(
                "bounding box interval [{lo}, {hi}] is empty"
            )));
        }
    }
    let n = s.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Interior base points: a supplied hint, else rejection sampling.
    let mut bases: Vec<Vec<f64>> = Vec::new();
    if let Some(hint) = interior_hint {
        if hint.len() != n {
            return Err(Error::DimensionMismatch("interior hint dimension".into()));
        }
        if s.min_inequality(hint) <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "interior hint is not strictly inside the set (margin {:.3e})",
                s.min_inequality(hint)
            )));
        }
        bases.push(hint.to_vec());
    } else {
        let attempts = (2000 * n).max(4000);
        let mut pool: Vec<(f64, Vec<f64>)> = Vec::new();
        for _ in 0..attempts {
            let x: Vec<f64> = bbox.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect();
            let margin = s.min_inequality(&x);
            if margin > 1e-9 {
                pool.push((margin, x));
            }
        }
        if pool.is_empty() {
            return Err(Error::NoInteriorPoint { attempts });
        }
        pool.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        bases.extend(pool.into_iter().take(16).map(|(_, x)| x));
    }

    let diag: f64 = bbox
        .iter()
        .map(|&(lo, hi)| (hi - lo) * (hi - lo))
        .sum::<f64>()
        .sqrt();
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);

    let mut out = Vec::with_capacity(count);
    let budget = 4 * count + 16;
    let mut ray = 0usize;
    while out.len() < count && ray < budget {
        let k = ray;
        ray += 1;
        let dir: Vec<f64> = if n == 2 {
            let theta = phase + std::f64::consts::TAU * (k as f64) / (count.max(1) as f64);
            vec![theta.cos(), theta.sin()]
        } else {
            let mut d: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-12 {
                continue;
            }
            for v in &mut d {
                *v /= norm;
            }
            d
        };
        let base = &bases[k % bases.len()];
        let f = |t: f64| {
            let x: Vec<f64> = base.iter().zip(&dir).map(|(b, d)| b + t * d).collect();
            s.min_inequality(&x)
        };
        // March outward until the set is left behind.
        let mut t_hi = diag / 1024.0;
        let mut left = false;
        while t_hi <= 4.0 * diag {
            if f(t_hi) < 0.0 {
                left = true;
                break;
            }
            t_hi *= 2.0;
        }
        if !left {
            continue;
        }
        let mut t_lo = 0.0_f64;
        let mut landed = None;
        for _ in 0..160 {
            let mid = 0.5 * (t_lo + t_hi);
            let v = f(mid);
            if v.abs() <= BISECTION_TOL {
                landed = Some(mid);
                break;
            }
            if v > 0.0 {
                t_lo = mid;
            } else {
                t_hi = mid;
            }
        }
        let Some(t) = landed else { continue };
        let point: Vec<f64> = base.iter().zip(&dir).map(|(b, d)| b + t * d).collect();
        let active: Vec<usize> = s
            .inequalities
            .iter()
            .enumerate()
            .filter(|(_, h)| h.eval(&point).abs() <= BOUNDARY_ACTIVE_TOL)
            .map(|(i, _)| i)
            .collect();
        if active.is_empty() {
            continue;
        }
        out.push(BoundaryPoint { point, active });
    }
    if out.is_empty() {
        return Err(Error::Solver(
            "no boundary crossings found; is the set bounded inside the box?".into(),
        ));
    }
    Ok(out)
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; two uniforms per normal keeps the stream simple and
    // deterministic.
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    (-2.0 * u1.ln()).sqrt() * u2.cos()
}

// ---------------------------------------------------------------------------
// Sampled Lagrange-Hessian probe
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeVerdict {
    Pass,
    Fail,
    Indeterminate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeDirection {
    pub direction: Vec<f64>,
    /// The screened local minimizer with the smallest Lagrangian-Hessian
    /// eigenvalue (the binding one for the verdict).
    pub minimizer: Vec<f64>,
    pub value: f64,
    /// First-order optimality residual with the least-squares multipliers.
    pub kkt_residual: f64,
    /// Nonnegative multipliers, one per inequality of the ball-restricted
    /// set (the appended ball constraint is last).
    pub multipliers: Vec<f64>,
    pub eq_multipliers: Vec<f64>,
    /// Smallest Lagrangian-Hessian eigenvalue over the sample grid,
    /// minimized over all screened local minimizers; NaN when the
    /// direction is indeterminate.
    pub min_lagrangian_eig: f64,
    /// How many distinct feasible local minimizers were screened.
    pub minimizers_checked: usize,
    pub status: ProbeVerdict,
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PdlhReport {
    pub center: Vec<f64>,
    pub radius: f64,
    pub directions: Vec<ProbeDirection>,
    pub verdict: ProbeVerdict,
    pub pd_tol: f64,
    pub kkt_tol: f64,
    pub seed: u64,
}

/// Sampled probe of the positive-definite-Lagrange-Hessian condition on
/// s ∩ B̄(u, δ): for each sampled unit direction ℓ, minimize ℓᵀx over the
/// ball-restricted set multistart, confirm first-order optimality with
/// least-squares multipliers, and check the Lagrangian Hessian
/// -Σ μ_i ∇²h_i - Σ ν_j ∇²e_j for positive definiteness on a grid of the
/// ball — at every distinct local minimizer found, since a non-global
/// minimizer for one direction is the global minimizer of a nearby one.
/// A direction passes when the grid minimum eigenvalue clears `pd_tol`
/// at all screened minimizers; the overall verdict is Pass only if every
/// direction passes. Sampling evidence only — the underlying condition
/// quantifies over all directions.
pub fn pdlh_probe(
    s: &BasicSet,
    u: &[f64],
    delta: f64,
    directions: usize,
    opts: &CertifyOptions,
) -> Result<PdlhReport> {
    s.validate()?;
    if u.len() != s.n {
        return Err(Error::DimensionMismatch("probe center dimension".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!(
            "probe radius must be positive, got {delta}"
        )));
    }
    let n = s.n;
    let restricted = s.intersect_ball(&BallConstraint::new(u.to_vec(), delta)?);
    let ineq_hess: Vec<PolyMatrix> = restricted.inequalities.iter().map(|h| h.hessian()).collect();
    let eq_hess: Vec<PolyMatrix> = restricted.equalities.iter().map(|e| e.hessian()).collect();

    let lower: Vec<f64> = u.iter().map(|c| c - delta).collect();
    let upper: Vec<f64> = u.iter().map(|c| c + delta).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let grid = ball_grid(u, delta);

    let mut dirs_out = Vec::with_capacity(directions);
    for k in 0..directions {
        let ell: Vec<f64> = if n == 2 {
            let theta = phase + std::f64::consts::TAU * (k as f64) / (directions.max(1) as f64);
            vec![theta.cos(), theta.sin()]
        } else {
            loop {
                let mut d: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
                let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    for v in &mut d {
                        *v /= norm;
                    }
                    break d;
                }
            }
        };

        let objective = linear_objective(n, &ell);
        let prob = SmoothProblem::over_set(objective, &restricted, 1.0)
            .with_box(lower.clone(), upper.clone());
        let min_opts = MinimizeOptions {
            starts: 10,
            seed: mix_seed(opts.seed, k as u64 + 1),
            ..MinimizeOptions::default()
        };
        let minima = multistart_minimize(&prob, &min_opts);
        // Screen every distinct feasible local minimizer, not only the
        // best: the condition must hold at any global minimizer, and a
        // non-global corner minimizer for this ℓ is the global minimizer
        // of a nearby direction. Global-only screening would leave
        // razor-thin failure sets invisible to finite direction sampling.
        let screened: Vec<_> = minima
            .iter()
            .filter(|m| m.violation <= 1e-6)
            .take(6)
            .collect();
        if screened.is_empty() {
            dirs_out.push(indeterminate_direction(
                ell,
                u,
                "no feasible local minimizer found",
            ));
            continue;
        }

        struct Screened {
            x: Vec<f64>,
            value: f64,
            kkt_residual: f64,
            mu: Vec<f64>,
            nu: Vec<f64>,
            min_eig: f64,
        }
        let mut worst: Option<Screened> = None;
        let mut unconfirmed = 0usize;
        let checked = screened.len();
        for m in screened {
            // Stationarity asks ∇(ℓᵀx) = Σ μ_i ∇h_i + Σ ν_j ∇e_j with
            // μ ≥ 0. The solver's multiplier estimates localize the face
            // the iterate converged onto even when the point itself sits
            // a little off it, so they are what we screen with; its
            // kkt_residual is the stationarity defect under exactly
            // those estimates. The solver accumulates equality terms
            // with the opposite sign, hence the negation.
            if m.kkt_residual > opts.kkt_tol {
                unconfirmed += 1;
                continue;
            }
            let mu = m.multipliers.clone();
            let nu: Vec<f64> = m.eq_multipliers.iter().map(|v| -v).collect();

            // Minimum eigenvalue of ∇²L over the ball grid.
            let mut min_eig = f64::INFINITY;
            for pt in &grid {
                let mut hess = DMatrix::zeros(n, n);
                for (i, hm) in ineq_hess.iter().enumerate() {
                    if mu[i] != 0.0 {
                        hess -= hm.eval(pt) * mu[i];
                    }
                }
                for (j, hm) in eq_hess.iter().enumerate() {
                    if nu[j] != 0.0 {
                        hess -= hm.eval(pt) * nu[j];
                    }
                }
                let lo = hess
                    .symmetric_eigenvalues()
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                min_eig = min_eig.min(lo);
            }
            let replace = match &worst {
                None => true,
                Some(w) => min_eig < w.min_eig,
            };
            if replace {
                worst = Some(Screened {
                    x: m.x.clone(),
                    value: m.value,
                    kkt_residual: m.kkt_residual,
                    mu,
                    nu,
                    min_eig,
                });
            }
        }

        let Some(w) = worst else {
            dirs_out.push(indeterminate_direction(
                ell,
                u,
                "first-order optimality not confirmed at any local minimizer",
            ));
            continue;
        };
        let status = if w.min_eig < opts.pd_tol {
            ProbeVerdict::Fail
        } else if unconfirmed > 0 {
            ProbeVerdict::Indeterminate
        } else {
            ProbeVerdict::Pass
        };
        let note = if unconfirmed > 0 {
            Some(format!(
                "{unconfirmed} of {checked} local minimizers lacked confirmed first-order optimality"
            ))
        } else {
            None
        };
        dirs_out.push(ProbeDirection {
            direction: ell,
            minimizer: w.x,
            value: w.value,
            kkt_residual: w.kkt_residual,
            multipliers: w.mu,
            eq_multipliers: w.nu,
            min_lagrangian_eig: w.min_eig,
            minimizers_checked: checked,
            status,
            note,
        });
    }

    let verdict = if dirs_out.iter().any(|d| d.status == ProbeVerdict::Fail) {
        ProbeVerdict::Fail
    } else if dirs_out
        .iter()
        .any(|d| d.status == ProbeVerdict::Indeterminate)
    {
        ProbeVerdict::Indeterminate
    } else {
        ProbeVerdict::Pass
    };

    Ok(PdlhReport {
        center: u.to_vec(),
        radius: delta,
        directions: dirs_out,
        verdict,
        pd_tol: opts.pd_tol,
        kkt_tol: opts.kkt_tol,
        seed: opts.seed,
    })
}

fn indeterminate_direction(ell: Vec<f64>, u: &[f64], note: &str) -> ProbeDirection {
    ProbeDirection {
        direction: ell,
        minimizer: u.to_vec(),
        value: f64::NAN,
        kkt_residual: f64::NAN,
        multipliers: Vec::new(),
        eq_multipliers: Vec::new(),
        min_lagrangian_eig: f64::NAN,
        minimizers_checked: 0,
        status: ProbeVerdict::Indeterminate,
        note: Some(note.into()),
    }
}

fn linear_objective(n: usize, ell: &[f64]) -> Polynomial {
    let mut p = Polynomial::zero(n);
    for (i, &c) in ell.iter().enumerate() {
        p = p.add(&Polynomial::var(n, i).scale(c));
    }
    p
}

/// 5-per-axis grid over the first min(n, 3) coordinates of B̄(u, δ),
/// filtered to the ball. Remaining coordinates stay at the center.
fn ball_grid(u: &[f64], delta: f64) -> Vec<Vec<f64>> {
    let n = u.len();
    let axes = n.min(3);
    let steps = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let mut pts = vec![vec![0.0_f64; axes]];
    for a in 0..axes {
        let mut next = Vec::with_capacity(pts.len() * steps.len());
        for p in &pts {
            for &s in &steps {
                let mut q = p.clone();
                q[a] = s * delta;
                next.push(q);
            }
        }
        pts = next;
    }
    pts.into_iter()
        .filter(|off| off.iter().map(|v| v * v).sum::<f64>() <= delta * delta + 1e-12)
        .map(|off| {
            let mut x = u.to_vec();
            for (a, v) in off.iter().enumerate() {
                x[a] += v;
            }
            x
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintVerdict {
    /// Globally certified: -∇²g is a sum-of-squares matrix.
    SosConcave,
    /// Strictly quasi-concave at every sampled nonsingular active point.
    StrictQcOnSamples,
    /// Some nonsingular sampled boundary point fails even non-strict
    /// quasi-concavity, and the constraint genuinely shapes the set there.
    NecessaryViolated,
    /// The constraint appears not to shape the set: never active on
    /// sampled boundary, or deactivating it leaves the sampled local set
    /// unchanged around the violating point.
    RedundantSuspect,
    /// Singular points encountered, or neither condition resolved.
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OverallVerdict {
    /// Every shaping constraint satisfies a sufficient condition (on
    /// sampled evidence); redundant-suspect constraints are exempt.
    SufficientPass,
    Inconclusive,
    NecessaryViolated,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub block: usize,
    pub constraint: usize,
    pub verdict: ConstraintVerdict,
    pub sos_residual: Option<f64>,
    pub sos_rank: Option<usize>,
    /// Pointwise verdicts at sampled active boundary points.
    pub points: Vec<PointVerdict>,
    /// A witness point: where the necessary condition failed, or where
    /// redundancy was probed, or the constraint's minimizer over the set.
    pub witness: Option<Vec<f64>>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub constraints: Vec<ConstraintReport>,
    pub overall: OverallVerdict,
    pub eig_tol: f64,
    pub grad_tol: f64,
    pub seed: u64,
    pub samples_per_block: usize,
    /// Honest scope statement attached to every report.
    pub caveat: String,
}

impl ClassifyReport {
    pub fn verdict_for(&self, block: usize, constraint: usize) -> Option<ConstraintVerdict> {
        self.constraints
            .iter()
            .find(|c| c.block == block && c.constraint == constraint)
            .map(|c| c.verdict)
    }
}

/// Per-constraint classification over every block of a union.
///
/// Route order mirrors the sufficient conditions: a global
/// sum-of-squares concavity certificate first, then strict
/// quasi-concavity on sampled active boundary points. A constraint that
/// fails the pointwise necessary condition at a nonsingular point is
/// probed for redundancy there before being reported as a genuine
/// violation: points in a small ball around the witness are sampled and
/// membership with and without the constraint compared. All sampling is
/// deterministic given the seed, and all sampled verdicts are evidence,
/// not proof.
pub fn classify(
    s: &UnionSet,
    bbox: &[(f64, f64)],
    samples_per_block: usize,
    opts: &CertifyOptions,
) -> Result<ClassifyReport> {
    if bbox.len() != s.n {
        return Err(Error::DimensionMismatch(format!(
            "bounding box has {} entries for an {}-variable set",
            bbox.len(),
            s.n
        )));
    }
    let mut reports = Vec::new();
    for (b, block) in s.blocks.iter().enumerate() {
        // Boundary samples are shared by all constraints of the block.
        let boundary = sample_boundary(
            block,
            bbox,
            samples_per_block,
            mix_seed(opts.seed, b as u64),
            None,
        );
        let boundary = match boundary {
            Ok(pts) => pts,
            Err(Error::NoInteriorPoint { attempts }) => {
                return Err(Error::NoInteriorPoint { attempts });
            }
            Err(e) => return Err(e),
        };
        if !block.equalities.is_empty() {
            reports.push(ConstraintReport {
                block: b,
                constraint: usize::MAX,
                verdict: ConstraintVerdict::Inconclusive,
                sos_residual: None,
                sos_rank: None,
                points: Vec::new(),
                witness: None,
                notes: vec!["equality constraints are outside the hypothesis checks".into()],
            });
        }
        for (i, g) in block.inequalities.iter().enumerate() {
            reports.push(classify_constraint(
                block, b, i, g, &boundary, bbox, opts,
            )?);
        }
    }

    let overall = if reports
        .iter()
        .any(|r| r.verdict == ConstraintVerdict::NecessaryViolated)
    {
        OverallVerdict::NecessaryViolated
    } else if reports.iter().all(|r| {
        matches!(
            r.verdict,
            ConstraintVerdict::SosConcave
                | ConstraintVerdict::StrictQcOnSamples
                | ConstraintVerdict::RedundantSuspect
        )
    }) {
        OverallVerdict::SufficientPass
    } else {
        OverallVerdict::Inconclusive
    };

    Ok(ClassifyReport {
        constraints: reports,
        overall,
        eig_tol: opts.eig_tol,
        grad_tol: opts.grad_tol,
        seed: opts.seed,
        samples_per_block,
        caveat: "sampled verdicts are evidence at the stated tolerances, not proof".into(),
    })
}

fn classify_constraint(
    block: &BasicSet,
    block_idx: usize,
    cons_idx: usize,
    g: &Polynomial,
    boundary: &[BoundaryPoint],
    bbox: &[(f64, f64)],
    opts: &CertifyOptions,
) -> Result<ConstraintReport> {
    let mut notes = Vec::new();

    // Route 1: global certificate.
    match check_sos_concave(g, opts)? {
        SosOutcome::Certified(cert) => {
            return Ok(ConstraintReport {
                block: block_idx,
                constraint: cons_idx,
                verdict: ConstraintVerdict::SosConcave,
                sos_residual: Some(cert.residual),
                sos_rank: Some(cert.rank),
                points: Vec::new(),
                witness: None,
                notes,
            });
        }
        SosOutcome::NotSosConcave { infeasibility } => {
            notes.push(format!(
                "not sos-concave (Gram infeasibility {infeasibility:.3e})"
            ));
        }
        SosOutcome::Indeterminate { reason } => {
            notes.push(format!("sos-concavity indeterminate: {reason}"));
        }
    }

    // Route 2: pointwise checks at active boundary points. Sampled
    // boundary points rarely land exactly on low-dimensional activity
    // sets, so direct minimization of g over the block supplements them.
    let mut candidates: Vec<Vec<f64>> = boundary
        .iter()
        .filter(|bp| bp.active.contains(&cons_idx))
        .map(|bp| bp.point.clone())
        .collect();

    let lower: Vec<f64> = bbox.iter().map(|&(lo, _)| lo).collect();
    let upper: Vec<f64> = bbox.iter().map(|&(_, hi)| hi).collect();
    let prob = SmoothProblem::over_set(g.clone(), block, 1.0).with_box(lower, upper);
    let min_opts = MinimizeOptions {
        starts: 16,
        seed: mix_seed(opts.seed, (block_idx as u64) << 16 | cons_idx as u64),
        ..MinimizeOptions::default()
    };
    let minima = multistart_minimize(&prob, &min_opts);
    let mut min_value = f64::INFINITY;
    let mut min_point: Option<Vec<f64>> = None;
    for m in &minima {
        if m.violation <= 1e-6 && m.value < min_value {
            min_value = m.value;
            min_point = Some(m.x.clone());
        }
    }
    if let Some(ref p) = min_point {
        if min_value.abs() <= 1e-7 {
            let fresh = candidates
                .iter()
                .all(|c| c.iter().zip(p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) > 1e-6);
            if fresh {
                candidates.push(p.clone());
            }
        } else if min_value > 1e-7 {
            notes.push(format!(
                "never active: min over the set is {min_value:.3e} > 0"
            ));
            return Ok(ConstraintReport {
                block: block_idx,
                constraint: cons_idx,
                verdict: ConstraintVerdict::RedundantSuspect,
                sos_residual: None,
                sos_rank: None,
                points: Vec::new(),
                witness: min_point,
                notes,
            });
        }
    }
    if candidates.is_empty() {
        notes.push("no active boundary points found by sampling or minimization".into());
        return Ok(ConstraintReport {
            block: block_idx,
            constraint: cons_idx,
            verdict: ConstraintVerdict::Inconclusive,
            sos_residual: None,
            sos_rank: None,
            points: Vec::new(),
            witness: None,
            notes,
        });
    }

    let mut points = Vec::with_capacity(candidates.len());
    let mut singular = false;
    let mut all_strict = true;
    let mut violation_at: Option<Vec<f64>> = None;
    for u in &candidates {
        let v = check_quasi_concave_at(g, u, opts).with_constraint(cons_idx);
        if !v.nonsingular {
            singular = true;
        } else if !v.quasi_concave {
            violation_at.get_or_insert_with(|| u.clone());
        } else if !v.strictly_quasi_concave {
            all_strict = false;
        }
        points.push(v);
    }

    if let Some(witness) = violation_at {
        // The necessary condition only binds where the constraint
        // genuinely shapes the set; probe for redundancy around the
        // witness before reporting a violation.
        let redundant = redundancy_probe(block, cons_idx, &witness, bbox, opts);
        let verdict = if redundant {
            notes.push(
                "deactivating the constraint leaves the sampled local set unchanged".into(),
            );
            ConstraintVerdict::RedundantSuspect
        } else {
            ConstraintVerdict::NecessaryViolated
        };
        return Ok(ConstraintReport {
            block: block_idx,
            constraint: cons_idx,
            verdict,
            sos_residual: None,
            sos_rank: None,
            points,
            witness: Some(witness),
            notes,
        });
    }

    let verdict = if singular {
        notes.push("singular boundary points encountered".into());
        ConstraintVerdict::Inconclusive
    } else if all_strict {
        ConstraintVerdict::StrictQcOnSamples
    } else {
        notes.push("quasi-concave but not strictly at some sampled points".into());
        ConstraintVerdict::Inconclusive
    };
    Ok(ConstraintReport {
        block: block_idx,
        constraint: cons_idx,
        verdict,
        sos_residual: None,
        sos_rank: None,
        points,
        witness: None,
        notes,
    })
}

/// Compare membership with and without constraint `k` on dense samples
/// of a small ball around `u`. True when no sampled point distinguishes
/// the two, i.e. the constraint appears redundant near `u`.
fn redundancy_probe(
    block: &BasicSet,
    k: usize,
    u: &[f64],
    bbox: &[(f64, f64)],
    opts: &CertifyOptions,
) -> bool {
    let n = block.n;
    let extent = bbox
        .iter()
        .map(|&(lo, hi)| hi - lo)
        .fold(0.0_f64, f64::max);
    let radius = (0.05 * extent).max(1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(opts.seed, 0xD15C + k as u64));
    let mut kept = 0usize;
    let mut draws = 0usize;
    while kept < 500 && draws < 8000 {
        draws += 1;
        let off: Vec<f64> = (0..n).map(|_| rng.random_range(-radius..radius)).collect();
        if off.iter().map(|v| v * v).sum::<f64>() > radius * radius {
            continue;
        }
        kept += 1;
        let x: Vec<f64> = u.iter().zip(&off).map(|(c, o)| c + o).collect();
        let with_k = block.inequalities.iter().all(|h| h.eval(&x) >= 0.0);
        let without_k = block
            .inequalities
            .iter()
            .enumerate()
            .all(|(i, h)| i == k || h.eval(&x) >= 0.0);
        if with_k != without_k {
            return false;
        }
    }
    true
}
