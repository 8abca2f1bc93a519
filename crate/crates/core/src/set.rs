//! Semialgebraic set model: basic closed sets {g_i >= 0, f_k = 0}, finite
//! unions of them, and ball restrictions used for boundary localization.
//!
//! The text format: a `vars <n>` header, then one or more `set <name>:`
//! blocks of `ineq <poly>` / `eq <poly>` lines. `#` starts a comment.

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::rep::LinearPencil;
use crate::symmat::SymMat;

/// Closed basic set {x : g_i(x) >= 0 for all i, f_k(x) = 0 for all k}.
#[derive(Clone, Debug, PartialEq)]
pub struct BasicSet {
    pub n: usize,
    pub name: String,
    pub inequalities: Vec<Polynomial>,
    pub equalities: Vec<Polynomial>,
}

impl BasicSet {
    pub fn new(n: usize, name: impl Into<String>) -> Self {
        BasicSet {
            n,
            name: name.into(),
            inequalities: Vec::new(),
            equalities: Vec::new(),
        }
    }

    pub fn with_constraints(
        n: usize,
        name: impl Into<String>,
        inequalities: Vec<Polynomial>,
        equalities: Vec<Polynomial>,
    ) -> Self {
        BasicSet {
            n,
            name: name.into(),
            inequalities,
            equalities,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in self.inequalities.iter().chain(&self.equalities) {
            if p.num_vars() != self.n {
                return Err(Error::DimensionMismatch(format!(
                    "constraint arity {} in set '{}' with n = {}",
                    p.num_vars(),
                    self.name,
                    self.n
                )));
            }
            if p.is_zero() {
                return Err(Error::InvalidInput(format!(
                    "zero polynomial constraint in set '{}'",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Membership by evaluation: every inequality nonnegative and every
    /// equality zero, both within `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.inequalities.iter().all(|g| g.eval(x) >= -tol)
            && self.equalities.iter().all(|f| f.eval(x).abs() <= tol)
    }

    /// Indices of inequalities active at `x`: |g_i(x)| <= tol.
    pub fn active_constraints(&self, x: &[f64], tol: f64) -> Vec<usize> {
        self.inequalities
            .iter()
            .enumerate()
            .filter(|(_, g)| g.eval(x).abs() <= tol)
            .map(|(i, _)| i)
            .collect()
    }

    /// Smallest inequality value at `x`; +inf when there are none.
    pub fn min_inequality(&self, x: &[f64]) -> f64 {
        self.inequalities
            .iter()
            .map(|g| g.eval(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// The same set with a closed ball constraint appended as a polynomial
    /// inequality.
    pub fn intersect_ball(&self, ball: &BallConstraint) -> BasicSet {
        let mut out = self.clone();
        out.name = format!("{}@ball", self.name);
        out.inequalities.push(ball.polynomial());
        out
    }
}

/// Finite union of basic sets over a common ambient space.
#[derive(Clone, Debug, PartialEq)]
pub struct UnionSet {
    pub n: usize,
    pub blocks: Vec<BasicSet>,
}

impl UnionSet {
    pub fn from_blocks(blocks: Vec<BasicSet>) -> Result<Self> {
        let n = blocks
            .first()
            .ok_or_else(|| Error::InvalidInput("union of zero sets".into()))?
            .n;
        for b in &blocks {
            if b.n != n {
                return Err(Error::DimensionMismatch(format!(
                    "set '{}' has n = {}, expected {}",
                    b.name, b.n, n
                )));
            }
            b.validate()?;
        }
        Ok(UnionSet { n, blocks })
    }

    pub fn single(block: BasicSet) -> Result<Self> {
        Self::from_blocks(vec![block])
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.blocks.iter().any(|b| b.contains(x, tol))
    }

    pub fn has_equalities(&self) -> bool {
        self.blocks.iter().any(|b| !b.equalities.is_empty())
    }
}

/// Closed ball constraint delta^2 - |x - center|^2 >= 0.
#[derive(Clone, Debug, PartialEq)]
pub struct BallConstraint {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl BallConstraint {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidInput(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(BallConstraint { center, radius })
    }

    pub fn n(&self) -> usize {
        self.center.len()
    }

    pub fn polynomial(&self) -> Polynomial {
        let n = self.n();
        let mut p = Polynomial::constant(n, self.radius * self.radius);
        for i in 0..n {
            let xi = Polynomial::var(n, i).sub(&Polynomial::constant(n, self.center[i]));
            p = p.sub(&xi.mul(&xi));
        }
        p
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let d2: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        d2 <= self.radius * self.radius
    }
}

/// Size-(n+1) pencil whose positivity is equivalent to membership in the
/// ball: [[I_n, x - u], [(x - u)^T, delta^2]] >= 0 by Schur complement.
pub fn ball_pencil(ball: &BallConstraint) -> LinearPencil {
    let n = ball.n();
    let dim = n + 1;
    let mut a0 = SymMat::zeros(dim);
    for i in 0..n {
        a0.set(i, i, 1.0);
        a0.set(n, i, -ball.center[i]);
    }
    a0.set(n, n, ball.radius * ball.radius);
    let mut ax = Vec::with_capacity(n);
    for i in 0..n {
        let mut m = SymMat::zeros(dim);
        m.set(n, i, 1.0);
        ax.push(m);
    }
    LinearPencil {
        size: dim,
        a0,
        ax,
        bu: Vec::new(),
    }
}

/// Parse the set text format. Returns the union of all declared blocks.
pub fn parse_set_file(src: &str) -> Result<UnionSet> {
    let mut n: Option<usize> = None;
    let mut blocks: Vec<BasicSet> = Vec::new();

    let fail = |line: usize, column: usize, message: String| Error::SetParse {
        line,
        column,
        message,
    };

    for (lineno, raw) in src.lines().enumerate() {
        let line = lineno + 1;
        let stripped = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let trimmed = stripped.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = stripped.len() - stripped.trim_start().len();
        let column = indent + 1;
        let (keyword, rest) = match trimmed.split_once(char::is_whitespace) {
            Some((k, r)) => (k, r.trim()),
            None => (trimmed, ""),
        };
        match keyword {
            "vars" => {
                if n.is_some() {
                    return Err(fail(line, column, "duplicate vars declaration".into()));
                }
                let v: usize = rest.parse().map_err(|_| {
                    fail(line, column, format!("malformed variable count '{rest}'"))
                })?;
                if v == 0 {
                    return Err(fail(line, column, "vars must be at least 1".into()));
                }
                n = Some(v);
            }
            "set" => {
                let n = n.ok_or_else(|| {
                    fail(line, column, "vars must be declared before set blocks".into())
                })?;
                let name = rest.strip_suffix(':').unwrap_or(rest).trim();
                if name.is_empty() {
                    return Err(fail(line, column, "set block needs a name".into()));
                }
                blocks.push(BasicSet::new(n, name));
            }
            "ineq" | "eq" => {
                let n = n.ok_or_else(|| {
                    fail(line, column, "vars must be declared before constraints".into())
                })?;
                let block = blocks.last_mut().ok_or_else(|| {
                    fail(line, column, "constraint outside of a set block".into())
                })?;
                let poly_col = stripped.find(rest).unwrap_or(indent) + 1;
                let p = Polynomial::parse(rest, n).map_err(|e| match e {
                    Error::PolyParse { offset, message } => {
                        fail(line, poly_col + offset, message)
                    }
                    other => other,
                })?;
                if p.is_zero() {
                    return Err(fail(line, poly_col, "zero polynomial constraint".into()));
                }
                if keyword == "ineq" {
                    block.inequalities.push(p);
                } else {
                    block.equalities.push(p);
                }
            }
            other => {
                return Err(fail(
                    line,
                    column,
                    format!("unknown keyword '{other}' (expected vars, set, ineq, eq)"),
                ));
            }
        }
    }
    if blocks.is_empty() {
        return Err(fail(1, 1, "no set blocks declared".into()));
    }
    for b in &blocks {
        if b.inequalities.is_empty() && b.equalities.is_empty() {
            return Err(fail(1, 1, format!("set '{}' has no constraints", b.name)));
        }
    }
    UnionSet::from_blocks(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn disk() -> BasicSet {
        let mut s = BasicSet::new(2, "disk");
        s.inequalities
            .push(Polynomial::parse("1 - x1^2 - x2^2", 2).unwrap());
        s
    }

    #[test]
    fn membership_and_active_sets() {
        let s = disk();
        assert!(s.contains(&[0.0, 0.0], 0.0));
        assert!(s.contains(&[1.0, 0.0], 1e-12));
        assert!(!s.contains(&[1.1, 0.0], 1e-7));
        assert_eq!(s.active_constraints(&[1.0, 0.0], 1e-7), vec![0]);
        assert!(s.active_constraints(&[0.5, 0.0], 1e-7).is_empty());
    }

    #[test]
    fn ball_pencil_sign_agrees_with_polynomial_on_grid() {
        // Oracle: eigenvalue check of the pencil against the sign of the
        // quadratic, over a grid straddling the ball boundary.
        let ball = BallConstraint::new(vec![0.25, -0.5], 0.8).unwrap();
        let pencil = ball_pencil(&ball);
        let q = ball.polynomial();
        let mut worst: f64 = 0.0;
        for i in 0..21 {
            for j in 0..21 {
                let x = [
                    -1.5 + 3.0 * (i as f64) / 20.0,
                    -2.0 + 3.0 * (j as f64) / 20.0,
                ];
                let val = pencil.eval(&x, &[]);
                let min_eig = val.min_eigenvalue();
                let qv = q.eval(&x);
                if qv > 1e-9 {
                    assert!(min_eig > 0.0, "pencil should be PD inside at {x:?}");
                } else if qv < -1e-9 {
                    assert!(min_eig < 0.0, "pencil should be indefinite outside at {x:?}");
                }
                worst = worst.max((min_eig.signum() - qv.signum()).abs());
            }
        }
        let _ = worst;
    }

    #[test]
    fn ball_polynomial_expansion() {
        let ball = BallConstraint::new(vec![1.0, 0.0], 0.3).unwrap();
        let p = ball.polynomial();
        // 0.09 - (x1 - 1)^2 - x2^2 = -0.91 + 2 x1 - x1^2 - x2^2
        assert!((p.eval(&[1.0, 0.0]) - 0.09).abs() < 1e-15);
        assert!((p.eval(&[1.3, 0.0])).abs() < 1e-15);
        assert_eq!(p.degree(), Some(2));
    }

    #[test]
    fn parse_set_file_single_block() {
        let src = "\
# unit disk
vars 2
set disk:
  ineq 1 - x1^2 - x2^2
";
        let u = parse_set_file(src).unwrap();
        assert_eq!(u.n, 2);
        assert_eq!(u.blocks.len(), 1);
        assert_eq!(u.blocks[0].name, "disk");
        assert_eq!(u.blocks[0].inequalities.len(), 1);
        assert!(u.contains(&[0.5, 0.5], 0.0));
    }

    #[test]
    fn parse_set_file_union_and_equalities() {
        let src = "\
vars 2
set parab:
  ineq 1 - x1^2 - x2^2
  ineq x2 - x1^2
set corner:
  ineq 1 - x1^2 - x2^2
  ineq x1
  ineq x2
set line:
  eq x1 - 0.25
  ineq 1 - x2^2
";
        let u = parse_set_file(src).unwrap();
        assert_eq!(u.blocks.len(), 3);
        assert!(u.has_equalities());
        assert!(u.contains(&[0.25, 0.9], 1e-12));
        assert!(u.contains(&[-0.3, 0.5], 1e-12)); // parab block
        assert!(!u.contains(&[-0.5, -0.5], 1e-9));
    }

    #[test]
    fn parse_set_file_errors_carry_line_and_column() {
        match parse_set_file("vars 2\nset a:\n  ineq x1 +\n") {
            Err(Error::SetParse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert!(column >= 8, "column was {column}");
            }
            other => panic!("expected SetParse, got {other:?}"),
        }
        match parse_set_file("set a:\n  ineq x1\n") {
            Err(Error::SetParse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected SetParse, got {other:?}"),
        }
        assert!(parse_set_file("vars 2\n").is_err());
        match parse_set_file("vars 2\nset a:\n  boing x1\n") {
            Err(Error::SetParse { line, column, message }) => {
                assert_eq!((line, column), (3, 3));
                assert!(message.contains("boing"));
            }
            other => panic!("expected SetParse, got {other:?}"),
        }
    }

    #[test]
    fn intersect_ball_appends_ball_inequality() {
        let s = disk();
        let ball = BallConstraint::new(vec![1.0, 0.0], 0.3).unwrap();
        let patch = s.intersect_ball(&ball);
        assert_eq!(patch.inequalities.len(), 2);
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..200 {
            let x = [rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2)];
            let expect = s.contains(&x, 0.0) && ball.contains(&x);
            assert_eq!(patch.contains(&x, 0.0), expect, "at {x:?}");
        }
    }
}
