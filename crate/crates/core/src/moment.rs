//! Truncated-moment relaxation of a basic semialgebraic set.
//!
//! For a set {h_1 >= 0, ..., h_m >= 0, f_1 = 0, ...} and an order N, the
//! construction introduces one lifted variable y_alpha per monomial of
//! degree 2..2N, identifies y with x on degree-one monomials, and imposes
//! one localizing LMI per included constraint product together with the
//! linearized equality rows. The projection of the feasible region to
//! x-space always contains the convex hull of the set; exactness at finite
//! order is what the verification module probes.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::poly::{monomial_vector, Exponent, Polynomial};
use crate::rep::{AffineRow, LiftedRepresentation, LinearPencil, RepMetadata};
use crate::set::BasicSet;
use crate::symmat::SymMat;

/// Hard cap on the number of inequalities in preordering mode; the block
/// count grows as 2^m.
pub const PREORDERING_CAP: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MomentMode {
    /// All 2^m products of the inequality constraints whose half-degree
    /// fits the order.
    Preordering,
    /// Only the empty product and the single constraints.
    Module,
}

impl MomentMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MomentMode::Preordering => "preordering",
            MomentMode::Module => "module",
        }
    }
}

impl std::str::FromStr for MomentMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "preordering" => Ok(MomentMode::Preordering),
            "module" => Ok(MomentMode::Module),
            other => Err(Error::InvalidInput(format!(
                "unknown moment mode `{other}` (expected `preordering` or `module`)"
            ))),
        }
    }
}

/// The graded-lex monomial list through degree 2N, with the index map used
/// to address lifted variables. Lower orders are prefixes of higher ones,
/// which is what makes truncation of feasible points well defined.
#[derive(Clone, Debug)]
pub struct MomentBasis {
    pub n: usize,
    pub order: usize,
    pub monomials: Vec<Exponent>,
    index: BTreeMap<Exponent, usize>,
}

impl MomentBasis {
    pub fn new(n: usize, order: usize) -> Self {
        let monomials = monomial_vector(n, 2 * order);
        let index = monomials
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, e)| (e, i))
            .collect();
        MomentBasis {
            n,
            order,
            monomials,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    /// Lifted coordinates exclude the constant and the degree-one block.
    pub fn num_lifted(&self) -> usize {
        self.len() - 1 - self.n
    }

    pub fn index_of(&self, e: &Exponent) -> Option<usize> {
        self.index.get(e).copied()
    }
}

/// Expand h(x) v(x) v(x)^T over the monomial basis of degree
/// `basis_degree`: the result maps each exponent alpha to the symmetric
/// coefficient matrix of x^alpha.
pub fn localizing_matrices(
    h: &Polynomial,
    basis_degree: usize,
) -> (Vec<Exponent>, BTreeMap<Exponent, SymMat>) {
    let n = h.num_vars();
    let basis = monomial_vector(n, basis_degree);
    let dim = basis.len();
    let mut out: BTreeMap<Exponent, SymMat> = BTreeMap::new();
    for p in 0..dim {
        for q in 0..=p {
            let pq = basis[p].add(&basis[q]);
            for (gamma, c) in h.terms() {
                let e = pq.add(gamma);
                out.entry(e)
                    .or_insert_with(|| SymMat::zeros(dim))
                    .add_to(p, q, c);
            }
        }
    }
    out.retain(|_, m| !m.is_zero());
    (basis, out)
}

fn half_degree(p: &Polynomial) -> usize {
    p.degree().unwrap_or(0).div_ceil(2)
}

/// The inequality-index subsets whose product constraints are included at
/// order N, in ascending bitmask order. The empty product (the plain
/// moment matrix) is always first.
fn included_products(
    s: &BasicSet,
    order: usize,
    mode: MomentMode,
) -> Result<Vec<(Vec<usize>, Polynomial)>> {
    let m = s.inequalities.len();
    for h in &s.inequalities {
        let d = half_degree(h);
        if d > order {
            return Err(Error::OrderTooSmall {
                required: d,
                given: order,
            });
        }
    }
    for f in &s.equalities {
        let d = half_degree(f);
        if d > order {
            return Err(Error::OrderTooSmall {
                required: d,
                given: order,
            });
        }
    }
    let mut out = Vec::new();
    match mode {
        MomentMode::Module => {
            out.push((Vec::new(), Polynomial::constant(s.n, 1.0)));
            for (j, h) in s.inequalities.iter().enumerate() {
                out.push((vec![j], h.clone()));
            }
        }
        MomentMode::Preordering => {
            if m > PREORDERING_CAP {
                return Err(Error::TooManyConstraints {
                    count: m,
                    cap: PREORDERING_CAP,
                });
            }
            for mask in 0u32..(1u32 << m) {
                let mut subset = Vec::new();
                let mut prod = Polynomial::constant(s.n, 1.0);
                for (j, h) in s.inequalities.iter().enumerate() {
                    if mask & (1 << j) != 0 {
                        subset.push(j);
                        prod = prod.mul(h);
                    }
                }
                if half_degree(&prod) <= order {
                    out.push((subset, prod));
                }
            }
        }
    }
    Ok(out)
}

pub fn build_moment_lmi(
    s: &BasicSet,
    order: usize,
    mode: MomentMode,
) -> Result<LiftedRepresentation> {
    s.validate()?;
    if order == 0 {
        return Err(Error::OrderTooSmall {
            required: 1,
            given: 0,
        });
    }
    let mb = MomentBasis::new(s.n, order);
    let products = included_products(s, order, mode)?;

    let num_lifted = mb.num_lifted();
    let mut pencils = Vec::with_capacity(products.len());
    for (_, h) in &products {
        let d = half_degree(h);
        let (basis, mats) = localizing_matrices(h, order - d);
        let dim = basis.len();
        let mut a0 = SymMat::zeros(dim);
        let mut ax = vec![SymMat::zeros(dim); s.n];
        let mut bu = vec![SymMat::zeros(dim); num_lifted];
        for (alpha, mat) in mats {
            let pos = mb
                .index_of(&alpha)
                .expect("localizing exponent within moment basis");
            if pos == 0 {
                a0 = mat;
            } else if pos <= s.n {
                ax[pos - 1] = mat;
            } else {
                bu[pos - 1 - s.n] = mat;
            }
        }
        pencils.push(LinearPencil {
            size: dim,
            a0,
            ax,
            bu,
        });
    }

    let mut equalities = Vec::new();
    for f in &s.equalities {
        let mut row = AffineRow {
            x_coeffs: vec![0.0; s.n],
            u_coeffs: vec![0.0; num_lifted],
            constant: 0.0,
        };
        for (alpha, c) in f.terms() {
            let pos = mb
                .index_of(alpha)
                .expect("equality degree checked against order");
            if pos == 0 {
                row.constant = c;
            } else if pos <= s.n {
                row.x_coeffs[pos - 1] = c;
            } else {
                row.u_coeffs[pos - 1 - s.n] = c;
            }
        }
        equalities.push(row);
    }

    let product_note = format!(
        "pencil_products={:?}",
        products.iter().map(|(s, _)| s.clone()).collect::<Vec<_>>()
    );
    let mut rep = LiftedRepresentation::new(s.n, num_lifted);
    rep.pencils = pencils;
    rep.equalities = equalities;
    rep.metadata = RepMetadata {
        construction: Some("moment".into()),
        order: Some(order),
        mode: Some(mode.as_str().into()),
        notes: vec![product_note],
        ..RepMetadata::default()
    };
    rep.validate()?;
    Ok(rep)
}

/// The lifted coordinates of the point mass at `x`: y_alpha = x^alpha for
/// every monomial of degree 2..2N. Feasible for the built LMI whenever x
/// is in the set.
pub fn point_mass_lift(s: &BasicSet, x: &[f64], order: usize) -> Result<Vec<f64>> {
    if x.len() != s.n {
        return Err(Error::DimensionMismatch(format!(
            "point has {} coordinates, set has {}",
            x.len(),
            s.n
        )));
    }
    if !s.contains(x, 1e-9) {
        return Err(Error::InvalidInput(format!(
            "point {x:?} is not in the set (worst inequality {})",
            s.min_inequality(x)
        )));
    }
    let mb = MomentBasis::new(s.n, order);
    Ok(mb.monomials[1 + s.n..]
        .iter()
        .map(|alpha| alpha.eval(x))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disk() -> BasicSet {
        BasicSet::with_constraints(
            2,
            "disk",
            vec![Polynomial::parse("1 - x1^2 - x2^2", 2).unwrap()],
            vec![],
        )
    }

    fn binomial(n: usize, k: usize) -> usize {
        let mut r = 1usize;
        for i in 0..k {
            r = r * (n - i) / (i + 1);
        }
        r
    }

    #[test]
    fn basis_is_prefix_closed_and_well_indexed() {
        for n in 1..=3 {
            for order in 1..=3 {
                let a = MomentBasis::new(n, order);
                let b = MomentBasis::new(n, order + 1);
                assert_eq!(a.len(), binomial(n + 2 * order, n));
                assert_eq!(&b.monomials[..a.len()], &a.monomials[..]);
                assert!(a.monomials[0].is_constant());
                for i in 0..n {
                    assert_eq!(a.monomials[1 + i], Exponent::unit(n, i));
                }
                for (i, m) in a.monomials.iter().enumerate() {
                    assert_eq!(a.index_of(m), Some(i));
                }
            }
        }
    }

    #[test]
    fn univariate_localizing_matrices_match_hand_expansion() {
        // h = 1, basis [1, x]: v v^T = [[1, x], [x, x^2]].
        let one = Polynomial::constant(1, 1.0);
        let (basis, mats) = localizing_matrices(&one, 1);
        assert_eq!(basis.len(), 2);
        let a0 = mats.get(&Exponent(vec![0])).unwrap();
        let a1 = mats.get(&Exponent(vec![1])).unwrap();
        let a2 = mats.get(&Exponent(vec![2])).unwrap();
        assert_eq!((a0.get(0, 0), a0.get(1, 0), a0.get(1, 1)), (1.0, 0.0, 0.0));
        assert_eq!((a1.get(0, 0), a1.get(1, 0), a1.get(1, 1)), (0.0, 1.0, 0.0));
        assert_eq!((a2.get(0, 0), a2.get(1, 0), a2.get(1, 1)), (0.0, 0.0, 1.0));

        // h = 1 - x^2 with the constant basis [1].
        let h = Polynomial::parse("1 - x1^2", 1).unwrap();
        let (basis, mats) = localizing_matrices(&h, 0);
        assert_eq!(basis.len(), 1);
        assert_eq!(mats.get(&Exponent(vec![0])).unwrap().get(0, 0), 1.0);
        assert_eq!(mats.get(&Exponent(vec![2])).unwrap().get(0, 0), -1.0);
        assert_eq!(mats.len(), 2);
    }

    #[test]
    fn reconstruction_identity_against_evaluation() {
        // sum_alpha A_alpha x^alpha must reproduce h(x) v(x) v(x)^T.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = Polynomial::parse("1 - x1^2 - x2^2", 2).unwrap();
        let (basis, mats) = localizing_matrices(&h, 1);
        for _ in 0..10 {
            let x = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
            let v: Vec<f64> = basis.iter().map(|b| b.eval(&x)).collect();
            let hv = h.eval(&x);
            let mut recon = vec![vec![0.0; v.len()]; v.len()];
            for (alpha, mat) in &mats {
                let xa = alpha.eval(&x);
                for i in 0..v.len() {
                    for j in 0..v.len() {
                        recon[i][j] += mat.get(i, j) * xa;
                    }
                }
            }
            for i in 0..v.len() {
                for j in 0..v.len() {
                    let want = hv * v[i] * v[j];
                    assert!(
                        (recon[i][j] - want).abs() <= 1e-10,
                        "entry ({i},{j}): {} vs {}",
                        recon[i][j],
                        want
                    );
                }
            }
        }
    }

    #[test]
    fn disk_order_one_structure() {
        let rep = build_moment_lmi(&disk(), 1, MomentMode::Preordering).unwrap();
        assert_eq!(rep.n, 2);
        assert_eq!(rep.num_lifted, 3);
        assert_eq!(rep.pencils.len(), 2);
        assert_eq!(rep.pencils[0].size, 3);
        assert_eq!(rep.pencils[1].size, 1);
        assert!(rep.equalities.is_empty());
        assert_eq!(rep.metadata.order, Some(1));
        assert_eq!(rep.metadata.mode.as_deref(), Some("preordering"));
    }

    #[test]
    fn quadrant_block_counts_by_mode() {
        let quadrant = BasicSet::with_constraints(
            2,
            "quadrant",
            vec![
                Polynomial::parse("x1", 2).unwrap(),
                Polynomial::parse("x2", 2).unwrap(),
            ],
            vec![],
        );
        let rep = build_moment_lmi(&quadrant, 1, MomentMode::Module).unwrap();
        assert_eq!(rep.pencils.len(), 3);
        let y = point_mass_lift(&quadrant, &[1.0, 1.0], 1).unwrap();
        assert!(rep.min_pencil_eigenvalue(&[1.0, 1.0], &y) >= -1e-9);

        // The product x1 x2 still has half-degree 1, so the preordering
        // includes all four subsets at order 1.
        let rep = build_moment_lmi(&quadrant, 1, MomentMode::Preordering).unwrap();
        assert_eq!(rep.pencils.len(), 4);
        let y = point_mass_lift(&quadrant, &[1.0, 1.0], 1).unwrap();
        assert!(rep.min_pencil_eigenvalue(&[1.0, 1.0], &y) >= -1e-9);
    }

    #[test]
    fn order_too_small_is_refused() {
        let tv = BasicSet::with_constraints(
            2,
            "tv",
            vec![Polynomial::parse("1 - x1^4 - x2^4", 2).unwrap()],
            vec![],
        );
        match build_moment_lmi(&tv, 1, MomentMode::Preordering) {
            Err(Error::OrderTooSmall { required, given }) => {
                assert_eq!((required, given), (2, 1));
            }
            other => panic!("expected OrderTooSmall, got {other:?}"),
        }

        let with_eq = BasicSet::with_constraints(
            2,
            "cubic-curve",
            vec![Polynomial::parse("1 - x1^2 - x2^2", 2).unwrap()],
            vec![Polynomial::parse("x2 - x1^3", 2).unwrap()],
        );
        assert!(matches!(
            build_moment_lmi(&with_eq, 1, MomentMode::Preordering),
            Err(Error::OrderTooSmall { required: 2, given: 1 })
        ));
        assert!(build_moment_lmi(&with_eq, 2, MomentMode::Preordering).is_ok());
    }

    #[test]
    fn preordering_cap_refuses_large_systems() {
        let m = 13;
        let ineqs: Vec<Polynomial> = (0..m)
            .map(|_| Polynomial::parse("1 - x1^2", 1).unwrap())
            .collect();
        let s = BasicSet::with_constraints(1, "many", ineqs, vec![]);
        assert!(matches!(
            build_moment_lmi(&s, 1, MomentMode::Preordering),
            Err(Error::TooManyConstraints { count: 13, cap: 12 })
        ));
        assert!(build_moment_lmi(&s, 1, MomentMode::Module).is_ok());
    }

    #[test]
    fn point_mass_values_and_boundary_block() {
        let s = disk();
        let y = point_mass_lift(&s, &[0.0, 0.0], 1).unwrap();
        assert_eq!(y, vec![0.0, 0.0, 0.0]);
        let y = point_mass_lift(&s, &[1.0, 0.0], 1).unwrap();
        assert_eq!(y, vec![1.0, 0.0, 0.0]);

        // On the boundary the constraint block value degenerates to zero.
        let rep = build_moment_lmi(&s, 1, MomentMode::Preordering).unwrap();
        let block = rep.pencils[1].eval(&[1.0, 0.0], &y);
        assert!(block.max_abs() < 1e-12);

        assert!(point_mass_lift(&s, &[1.1, 0.0], 1).is_err());
    }

    #[test]
    fn sampled_members_lift_feasibly() {
        // Rejection-sampled points of each set must produce feasible lifts:
        // the projection property in testable form.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let tv = BasicSet::with_constraints(
            2,
            "tv",
            vec![Polynomial::parse("1 - x1^4 - x2^4", 2).unwrap()],
            vec![],
        );
        let cases = [(disk(), 1usize), (disk(), 2), (tv, 2)];
        for (s, order) in &cases {
            let rep = build_moment_lmi(s, *order, MomentMode::Preordering).unwrap();
            let mut found = 0;
            while found < 20 {
                let x = [rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2)];
                if !s.contains(&x, 0.0) {
                    continue;
                }
                found += 1;
                let y = point_mass_lift(s, &x, *order).unwrap();
                let min_eig = rep.min_pencil_eigenvalue(&x, &y);
                assert!(
                    min_eig >= -1e-9,
                    "set {} at {x:?}: min eigenvalue {min_eig}",
                    s.name
                );
            }
        }
    }

    #[test]
    fn higher_order_feasible_points_truncate() {
        // A genuine measure (not a point mass): the average of two point
        // masses inside the disk. Its moment vector is feasible at N=2 and
        // its truncation must be feasible at N=1.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let s = disk();
        let rep1 = build_moment_lmi(&s, 1, MomentMode::Preordering).unwrap();
        let rep2 = build_moment_lmi(&s, 2, MomentMode::Preordering).unwrap();
        let mb2 = MomentBasis::new(2, 2);
        for _ in 0..25 {
            let sample = |rng: &mut ChaCha8Rng| loop {
                let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                if s.contains(&x, 0.0) {
                    return x;
                }
            };
            let a = sample(&mut rng);
            let b = sample(&mut rng);
            let x = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            let y2: Vec<f64> = mb2.monomials[3..]
                .iter()
                .map(|m| 0.5 * (m.eval(&a) + m.eval(&b)))
                .collect();
            assert!(rep2.min_pencil_eigenvalue(&x, &y2) >= -1e-9);
            let y1 = &y2[..rep1.num_lifted];
            assert!(rep1.min_pencil_eigenvalue(&x, y1) >= -1e-9);
        }
    }

    #[test]
    fn equality_rows_linearize_the_polynomial() {
        // f = x2 - x1^2 becomes x2 - y20 = 0: lifted coordinate y20 carries
        // coefficient -1, x2 carries +1.
        let s = BasicSet::with_constraints(
            2,
            "parabola",
            vec![Polynomial::parse("1 - x1^2", 2).unwrap()],
            vec![Polynomial::parse("x2 - x1^2", 2).unwrap()],
        );
        let rep = build_moment_lmi(&s, 1, MomentMode::Preordering).unwrap();
        assert_eq!(rep.equalities.len(), 1);
        let row = &rep.equalities[0];
        assert_eq!(row.constant, 0.0);
        assert_eq!(row.x_coeffs, vec![0.0, 1.0]);
        assert_eq!(row.u_coeffs, vec![-1.0, 0.0, 0.0]);
        // The lift of a point on the parabola satisfies the row exactly.
        let x = [0.5, 0.25];
        let y = point_mass_lift(&s, &x, 1).unwrap();
        assert!(row.eval(&x, &y).abs() < 1e-15);
    }
}
