//! Sparse multivariate polynomials over f64 with a global graded
//! lexicographic monomial order.
//!
//! The monomial order is load-bearing: moment bases, lifted-variable
//! indexing, and the serialized representation files all assume the order
//! produced by [`monomial_vector`]. Degree of the zero polynomial is the
//! explicit sentinel `None`, never a synthetic negative value.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Exponent vector of a monomial. Arity is fixed by the ambient variable
/// count and must agree across all terms of a polynomial.
#[derive(Clone, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct Exponent(pub Vec<u32>);

impl Exponent {
    pub fn zeros(n: usize) -> Self {
        Exponent(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        Exponent(e)
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn add(&self, other: &Exponent) -> Exponent {
        debug_assert_eq!(self.arity(), other.arity());
        Exponent(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(self.arity(), x.len());
        self.0
            .iter()
            .zip(x)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }
}

impl Ord for Exponent {
    /// Graded lexicographic: lower total degree first; within a degree,
    /// x1-heavy monomials first, so (1,0) precedes (0,1).
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// All exponent vectors in `n` variables of total degree at most `d`,
/// in graded lexicographic order. Length is C(n + d, d).
pub fn monomial_vector(n: usize, d: usize) -> Vec<Exponent> {
    let mut out = Vec::new();
    let mut current = vec![0u32; n];
    for deg in 0..=d {
        fill_degree(n, deg as u32, 0, &mut current, &mut out);
    }
    out
}

fn fill_degree(n: usize, remaining: u32, pos: usize, current: &mut Vec<u32>, out: &mut Vec<Exponent>) {
    if pos == n {
        if remaining == 0 {
            out.push(Exponent(current.clone()));
        }
        return;
    }
    if pos + 1 == n {
        current[pos] = remaining;
        out.push(Exponent(current.clone()));
        current[pos] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e;
        fill_degree(n, remaining - e, pos + 1, current, out);
        current[pos] = 0;
    }
}

/// Sparse polynomial; terms with coefficient exactly 0.0 are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    n: usize,
    terms: BTreeMap<Exponent, f64>,
}

impl Polynomial {
    pub fn zero(n: usize) -> Self {
        Polynomial {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        let mut p = Self::zero(n);
        p.add_term(Exponent::zeros(n), c);
        p
    }

    /// The variable x_{i+1} (0-based index).
    pub fn var(n: usize, i: usize) -> Self {
        assert!(i < n, "variable index {i} out of range for n={n}");
        let mut p = Self::zero(n);
        p.add_term(Exponent::unit(n, i), 1.0);
        p
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (Exponent, f64)>) -> Self {
        let mut p = Self::zero(n);
        for (e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.terms.keys().map(|e| e.degree()).max()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, e: &Exponent) -> f64 {
        self.terms.get(e).copied().unwrap_or(0.0)
    }

    /// Terms in graded lexicographic order.
    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, f64)> {
        self.terms.iter().map(|(e, &c)| (e, c))
    }

    pub fn add_term(&mut self, e: Exponent, c: f64) {
        use std::collections::btree_map::Entry;
        assert_eq!(e.arity(), self.n, "exponent arity mismatch");
        if c == 0.0 {
            return;
        }
        match self.terms.entry(e) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.n, other.n);
        let mut out = self.clone();
        for (e, c) in other.terms() {
            out.add_term(e.clone(), c);
        }
        out
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        if s == 0.0 {
            return Polynomial::zero(self.n);
        }
        Polynomial {
            n: self.n,
            terms: self.terms.iter().map(|(e, &c)| (e.clone(), c * s)).collect(),
        }
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.n, other.n);
        let mut out = Polynomial::zero(self.n);
        for (ea, ca) in self.terms() {
            for (eb, cb) in other.terms() {
                out.add_term(ea.add(eb), ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut out = Polynomial::constant(self.n, 1.0);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n, "evaluation point arity mismatch");
        self.terms().map(|(e, c)| c * e.eval(x)).sum()
    }

    /// Partial derivative with respect to x_{i+1}.
    pub fn partial(&self, i: usize) -> Polynomial {
        assert!(i < self.n);
        let mut out = Polynomial::zero(self.n);
        for (e, c) in self.terms() {
            if e.0[i] > 0 {
                let mut d = e.clone();
                d.0[i] -= 1;
                out.add_term(d, c * e.0[i] as f64);
            }
        }
        out
    }

    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.n).map(|i| self.partial(i)).collect()
    }

    pub fn gradient_at(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.partial(i).eval(x)).collect()
    }

    pub fn hessian(&self) -> PolyMatrix {
        let grad = self.gradient();
        let mut entries = Vec::with_capacity(self.n * self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                entries.push(grad[i].partial(j));
            }
        }
        PolyMatrix {
            n: self.n,
            dim: self.n,
            entries,
        }
    }

    /// Largest absolute coefficient; 0.0 for the zero polynomial.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms().map(|(_, c)| c.abs()).fold(0.0, f64::max)
    }

    /// Parse `src` in the variables x1..x{n}. See the module grammar:
    /// signed terms, each a float coefficient and/or `xk[^e]` factors with
    /// optional `*` separators. Errors carry the byte offset of the fault.
    pub fn parse(src: &str, n: usize) -> Result<Polynomial> {
        Parser::new(src, n).parse()
    }
}

impl fmt::Display for Polynomial {
    /// Graded lexicographic term order, e.g. `1 - x1^2 - x2^2`. Output
    /// reparses to an equal polynomial.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (k, (e, c)) in self.terms().enumerate() {
            let mag = c.abs();
            if k == 0 {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else if c < 0.0 {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if e.is_constant() {
                write!(f, "{mag}")?;
            } else {
                let mut lead = true;
                if mag != 1.0 {
                    write!(f, "{mag}")?;
                    lead = false;
                }
                for (i, &exp) in e.0.iter().enumerate() {
                    if exp == 0 {
                        continue;
                    }
                    if !lead {
                        write!(f, " ")?;
                    }
                    lead = false;
                    write!(f, "x{}", i + 1)?;
                    if exp > 1 {
                        write!(f, "^{exp}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Dense matrix of polynomials (row major); used for Hessians and
/// matrix-polynomial identities.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMatrix {
    pub n: usize,
    pub dim: usize,
    entries: Vec<Polynomial>,
}

impl PolyMatrix {
    pub fn from_fn(n: usize, dim: usize, mut f: impl FnMut(usize, usize) -> Polynomial) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                let p = f(i, j);
                assert_eq!(p.num_vars(), n);
                entries.push(p);
            }
        }
        PolyMatrix { n, dim, entries }
    }

    pub fn get(&self, i: usize, j: usize) -> &Polynomial {
        &self.entries[i * self.dim + j]
    }

    pub fn scale(&self, s: f64) -> PolyMatrix {
        PolyMatrix {
            n: self.n,
            dim: self.dim,
            entries: self.entries.iter().map(|p| p.scale(s)).collect(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j).eval(x))
    }

    pub fn max_degree(&self) -> Option<usize> {
        self.entries.iter().filter_map(|p| p.degree()).max()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|p| p.is_zero())
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.entries
            .iter()
            .map(|p| p.max_abs_coeff())
            .fold(0.0, f64::max)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    n: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, n: usize) -> Self {
        Parser {
            src: src.as_bytes(),
            pos: 0,
            n,
        }
    }

    fn err<T>(&self, offset: usize, message: impl Into<String>) -> Result<T> {
        Err(Error::PolyParse {
            offset,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn parse(mut self) -> Result<Polynomial> {
        let mut poly = Polynomial::zero(self.n);
        self.skip_ws();
        if self.peek().is_none() {
            return self.err(self.pos, "empty polynomial");
        }
        let mut first = true;
        loop {
            self.skip_ws();
            let sign = match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    1.0
                }
                Some(b'-') => {
                    self.pos += 1;
                    -1.0
                }
                Some(_) if first => 1.0,
                Some(c) => {
                    return self.err(self.pos, format!("expected '+' or '-', found '{}'", c as char))
                }
                None => break,
            };
            first = false;
            self.skip_ws();
            let (e, c) = self.parse_term()?;
            poly.add_term(e, sign * c);
            self.skip_ws();
            if self.peek().is_none() {
                break;
            }
        }
        Ok(poly)
    }

    fn parse_term(&mut self) -> Result<(Exponent, f64)> {
        let start = self.pos;
        let mut coeff = 1.0;
        let mut exponent = Exponent::zeros(self.n);
        let mut saw_factor = false;

        if matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == b'.') {
            coeff = self.parse_number()?;
            saw_factor = true;
        }
        loop {
            self.skip_ws();
            let mark = self.pos;
            if self.peek() == Some(b'*') {
                self.pos += 1;
                self.skip_ws();
                if self.peek() != Some(b'x') {
                    return self.err(self.pos, "expected variable after '*'");
                }
            }
            if self.peek() == Some(b'x') {
                let (idx, exp) = self.parse_factor()?;
                exponent.0[idx] += exp;
                saw_factor = true;
            } else {
                self.pos = mark;
                break;
            }
        }
        if !saw_factor {
            return self.err(start, "expected a number or variable");
        }
        Ok((exponent, coeff))
    }

    fn parse_number(&mut self) -> Result<f64> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.peek() == Some(b'.') {
            self.pos += 1;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        if matches!(self.peek(), Some(b'e') | Some(b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match text.parse::<f64>() {
            Ok(v) => Ok(v),
            Err(_) => self.err(start, format!("malformed number '{text}'")),
        }
    }

    fn parse_factor(&mut self) -> Result<(usize, u32)> {
        let start = self.pos;
        debug_assert_eq!(self.peek(), Some(b'x'));
        self.pos += 1;
        let idx_start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == idx_start {
            return self.err(start, "expected variable index after 'x'");
        }
        let text = std::str::from_utf8(&self.src[idx_start..self.pos]).unwrap();
        let idx: usize = match text.parse() {
            Ok(v) => v,
            Err(_) => return self.err(idx_start, format!("malformed variable index '{text}'")),
        };
        if idx == 0 || idx > self.n {
            return self.err(
                start,
                format!("variable x{idx} out of range (declared n = {})", self.n),
            );
        }
        let mut exp = 1u32;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp_start = self.pos;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
            if self.pos == exp_start {
                return self.err(exp_start, "expected exponent after '^'");
            }
            let text = std::str::from_utf8(&self.src[exp_start..self.pos]).unwrap();
            exp = match text.parse() {
                Ok(v) => v,
                Err(_) => return self.err(exp_start, format!("malformed exponent '{text}'")),
            };
        }
        Ok((idx - 1, exp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn p(src: &str, n: usize) -> Polynomial {
        Polynomial::parse(src, n).unwrap()
    }

    #[test]
    fn graded_lex_order_matches_reference_listing() {
        let v = monomial_vector(2, 2);
        let expect: Vec<Vec<u32>> = vec![
            vec![0, 0],
            vec![1, 0],
            vec![0, 1],
            vec![2, 0],
            vec![1, 1],
            vec![0, 2],
        ];
        assert_eq!(v.iter().map(|e| e.0.clone()).collect::<Vec<_>>(), expect);
        let mut sorted = v.clone();
        sorted.sort();
        assert_eq!(sorted, v, "listing must already be sorted under Ord");
    }

    #[test]
    fn monomial_vector_count_is_binomial() {
        // C(n + d, d): oracle by direct binomial evaluation.
        fn binom(a: usize, b: usize) -> usize {
            let mut r = 1usize;
            for i in 0..b {
                r = r * (a - i) / (i + 1);
            }
            r
        }
        for (n, d) in [(1, 3), (2, 2), (3, 4), (4, 3)] {
            assert_eq!(monomial_vector(n, d).len(), binom(n + d, d));
        }
        assert_eq!(monomial_vector(4, 3).len(), 35);
    }

    #[test]
    fn parse_disk_and_eval() {
        let g = p("1 - x1^2 - x2^2", 2);
        assert_eq!(g.degree(), Some(2));
        assert_eq!(g.eval(&[0.0, 0.0]), 1.0);
        assert_eq!(g.eval(&[1.0, 0.0]), 0.0);
        assert!((g.eval(&[0.6, 0.8]) - (1.0 - 0.36 - 0.64)).abs() < 1e-15);
    }

    #[test]
    fn parse_accepts_star_and_juxtaposition() {
        let a = p("3 x1^2 x2", 2);
        let b = p("3*x1^2*x2", 2);
        let c = p("3x1^2x2", 2);
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a.eval(&[2.0, 5.0]), 60.0);
    }

    #[test]
    fn parse_whitespace_insensitive() {
        assert_eq!(p("1-x1^2-x2^2", 2), p("  1 - x1^2 - x2^2  ", 2));
    }

    #[test]
    fn parse_reports_byte_offsets() {
        match Polynomial::parse("1 + x3", 2) {
            Err(Error::PolyParse { offset, message }) => {
                assert_eq!(offset, 4);
                assert!(message.contains("x3"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        match Polynomial::parse("2 x1 ^", 2) {
            Err(Error::PolyParse { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
        match Polynomial::parse("", 2) {
            Err(Error::PolyParse { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn zero_polynomial_degree_sentinel() {
        let z = Polynomial::zero(3);
        assert_eq!(z.degree(), None);
        assert!(z.is_zero());
        let cancelled = p("x1", 2).sub(&p("x1", 2));
        assert_eq!(cancelled.degree(), None);
        assert_eq!(cancelled.num_terms(), 0);
    }

    #[test]
    fn display_reparses_to_equal_polynomial() {
        let cases = [
            "1 - x1^2 - x2^2",
            "3 x1^2 x2 - 0.5 x2^3 + 2",
            "x1",
            "0.25",
        ];
        for src in cases {
            let q = p(src, 2);
            let round = p(&q.to_string(), 2);
            assert_eq!(q, round, "display was: {q}");
        }
        assert_eq!(Polynomial::zero(2).to_string(), "0");
    }

    fn random_poly(rng: &mut StdRng, n: usize, deg: usize) -> Polynomial {
        let mons = monomial_vector(n, deg);
        let mut q = Polynomial::zero(n);
        for e in mons {
            if rng.random_bool(0.6) {
                q.add_term(e, rng.random_range(-2.0..2.0));
            }
        }
        q
    }

    #[test]
    fn ring_laws_agree_with_evaluation_oracle() {
        // Oracle: evaluate both sides at random points; identities must hold
        // to floating roundoff relative to the magnitudes involved.
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.random_range(1..=3);
            let a = random_poly(&mut rng, n, 3);
            let b = random_poly(&mut rng, n, 3);
            let c = random_poly(&mut rng, n, 2);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
            let scale = 1.0
                + a.eval(&x).abs().max(b.eval(&x).abs()).max(c.eval(&x).abs());
            let tol = 1e-9 * scale * scale * scale;
            let ab = a.mul(&b);
            assert!((ab.eval(&x) - a.eval(&x) * b.eval(&x)).abs() <= tol);
            assert!((a.add(&b).eval(&x) - (a.eval(&x) + b.eval(&x))).abs() <= tol);
            assert!((ab.eval(&x) - b.mul(&a).eval(&x)).abs() <= tol);
            let left = a.mul(&b.add(&c)).eval(&x);
            let right = ab.eval(&x) + a.mul(&c).eval(&x);
            assert!((left - right).abs() <= tol);
            let assoc_l = a.mul(&b).mul(&c).eval(&x);
            let assoc_r = a.mul(&b.mul(&c)).eval(&x);
            assert!((assoc_l - assoc_r).abs() <= tol);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        // Independent oracle: central finite differences, h = 1e-5.
        let mut rng = StdRng::seed_from_u64(11);
        let h = 1e-5;
        for _ in 0..40 {
            let n = rng.random_range(1..=3);
            let q = random_poly(&mut rng, n, 4);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let grad = q.gradient_at(&x);
            for i in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (q.eval(&xp) - q.eval(&xm)) / (2.0 * h);
                let scale = 1.0 + grad[i].abs();
                assert!(
                    (grad[i] - fd).abs() <= 1e-6 * scale,
                    "grad[{i}] = {} vs fd {}",
                    grad[i],
                    fd
                );
            }
        }
    }

    #[test]
    fn hessian_matches_central_differences() {
        let mut rng = StdRng::seed_from_u64(13);
        let h = 1e-4;
        for _ in 0..25 {
            let n = rng.random_range(1..=3);
            let q = random_poly(&mut rng, n, 4);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let hess = q.hessian();
            assert_eq!(hess.dim, n);
            for i in 0..n {
                for j in 0..n {
                    let mut xpp = x.clone();
                    let mut xpm = x.clone();
                    let mut xmp = x.clone();
                    let mut xmm = x.clone();
                    xpp[i] += h;
                    xpp[j] += h;
                    xpm[i] += h;
                    xpm[j] -= h;
                    xmp[i] -= h;
                    xmp[j] += h;
                    xmm[i] -= h;
                    xmm[j] -= h;
                    let fd = (q.eval(&xpp) - q.eval(&xpm) - q.eval(&xmp) + q.eval(&xmm))
                        / (4.0 * h * h);
                    let exact = hess.get(i, j).eval(&x);
                    let scale = 1.0 + exact.abs();
                    assert!(
                        (exact - fd).abs() <= 1e-5 * scale,
                        "hessian[{i}][{j}] = {exact} vs fd {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn hessian_is_symmetric() {
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..20 {
            let n = rng.random_range(1..=4);
            let q = random_poly(&mut rng, n, 4);
            let hess = q.hessian();
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(hess.get(i, j), hess.get(j, i));
                }
            }
        }
    }

    #[test]
    fn partial_drops_degree() {
        let g = p("1 - x1^4 - x2^4", 2);
        let d1 = g.partial(0);
        assert_eq!(d1, p("4 x1^3", 2).scale(-1.0));
        assert_eq!(d1.degree(), Some(3));
        assert_eq!(Polynomial::constant(2, 5.0).partial(0).degree(), None);
    }
}
