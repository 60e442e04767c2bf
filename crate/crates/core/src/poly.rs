//! Exact polynomial arithmetic.
//!
//! Coefficient fields and manufactured solutions are piecewise polynomials,
//! which keeps every derivative and every `W^{k,inf}` supremum exactly
//! computable (critical points are roots of the derivative polynomial).

use crate::scalar::{r, Real};

/// Dense univariate polynomial, coefficients in ascending degree order.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<T: Real> {
    coeffs: Vec<T>,
}

impl<T: Real> Polynomial<T> {
    pub fn new(coeffs: Vec<T>) -> Self {
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![] }
    }

    pub fn constant(c: T) -> Self {
        Self::new(vec![c])
    }

    /// The monomial `x`.
    pub fn x() -> Self {
        Self::new(vec![T::zero(), T::one()])
    }

    pub fn from_f64_coeffs(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| r(c)).collect())
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    fn trim(&mut self) {
        while let Some(&c) = self.coeffs.last() {
            if c == T::zero() {
                self.coeffs.pop();
            } else {
                break;
            }
        }
    }

    pub fn eval(&self, x: T) -> T {
        let mut acc = T::zero();
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| c * r::<T>(k as f64))
            .collect();
        Self::new(coeffs)
    }

    pub fn nth_derivative(&self, n: usize) -> Self {
        let mut p = self.clone();
        for _ in 0..n {
            p = p.derivative();
        }
        p
    }

    pub fn antiderivative(&self) -> Self {
        let mut coeffs = vec![T::zero()];
        for (k, &c) in self.coeffs.iter().enumerate() {
            coeffs.push(c / r::<T>((k + 1) as f64));
        }
        Self::new(coeffs)
    }

    /// Exact definite integral over `[a, b]`.
    pub fn integrate(&self, a: T, b: T) -> T {
        let anti = self.antiderivative();
        anti.eval(b) - anti.eval(a)
    }

    pub fn scale(&self, c: T) -> Self {
        Self::new(self.coeffs.iter().map(|&a| a * c).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut coeffs = vec![T::zero(); n];
        for (i, &c) in self.coeffs.iter().enumerate() {
            coeffs[i] += c;
        }
        for (i, &c) in other.coeffs.iter().enumerate() {
            coeffs[i] += c;
        }
        Self::new(coeffs)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut coeffs = vec![T::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Self::new(coeffs)
    }

    /// All real roots in `[a, b]`, each located by bisection to near machine
    /// precision. Critical points of `p` are roots of `p'`, found recursively;
    /// between consecutive critical points the polynomial is monotone.
    pub fn roots_in(&self, a: T, b: T) -> Vec<T> {
        let tol = r::<T>(1e-14) * (T::one() + a.abs().max(b.abs()));
        if self.is_zero() {
            // Identically zero: report the endpoints as representatives.
            return vec![a, b];
        }
        if self.degree() == 0 {
            return vec![];
        }
        let mut points = vec![a];
        for c in self.derivative().roots_in(a, b) {
            if c > *points.last().unwrap() + tol && c < b - tol {
                points.push(c);
            }
        }
        points.push(b);

        let mut roots = Vec::new();
        for w in points.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let (flo, fhi) = (self.eval(lo), self.eval(hi));
            if flo.abs() <= tol {
                push_unique(&mut roots, lo, tol);
            }
            if fhi.abs() <= tol {
                push_unique(&mut roots, hi, tol);
                continue;
            }
            if flo * fhi < T::zero() {
                let mut lo = lo;
                let mut hi = hi;
                let mut flo = flo;
                for _ in 0..200 {
                    let mid = (lo + hi) * r(0.5);
                    let fm = self.eval(mid);
                    if fm == T::zero() || hi - lo < tol {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if flo * fm < T::zero() {
                        hi = mid;
                    } else {
                        lo = mid;
                        flo = fm;
                    }
                }
                push_unique(&mut roots, (lo + hi) * r(0.5), tol);
            }
        }
        roots
    }

    /// `sup |p|` on `[a, b]` via critical-point enumeration plus endpoints.
    pub fn sup_abs_on(&self, a: T, b: T) -> T {
        let mut best = self.eval(a).abs().max(self.eval(b).abs());
        for c in self.derivative().roots_in(a, b) {
            best = best.max(self.eval(c).abs());
        }
        best
    }

    /// Whether `p` has a root in the closed interval `[a, b]`.
    pub fn has_root_in(&self, a: T, b: T) -> bool {
        if self.is_zero() {
            return true;
        }
        !self.roots_in(a, b).is_empty()
    }
}

fn push_unique<T: Real>(roots: &mut Vec<T>, x: T, tol: T) {
    if roots.iter().all(|&y| (y - x).abs() > tol * r(10.0)) {
        roots.push(x);
    }
}

/// Function defined subdomain-by-subdomain, one polynomial per subdomain.
///
/// `breaks` has length `N + 1` and holds `a = gamma_0 < ... < gamma_N = b`;
/// piece `j` (0-based) lives on `(breaks[j], breaks[j+1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePoly<T: Real> {
    breaks: Vec<T>,
    pieces: Vec<Polynomial<T>>,
}

impl<T: Real> PiecewisePoly<T> {
    pub fn new(breaks: Vec<T>, pieces: Vec<Polynomial<T>>) -> Self {
        assert_eq!(breaks.len(), pieces.len() + 1, "one piece per subdomain");
        assert!(breaks.windows(2).all(|w| w[0] < w[1]));
        Self { breaks, pieces }
    }

    /// Single polynomial over the whole interval `[a, b]`, with the given
    /// interior breakpoints retained for bookkeeping.
    pub fn global(breaks: Vec<T>, p: Polynomial<T>) -> Self {
        let n = breaks.len() - 1;
        Self::new(breaks, vec![p; n])
    }

    pub fn zero_like(&self) -> Self {
        Self::new(self.breaks.clone(), vec![Polynomial::zero(); self.pieces.len()])
    }

    pub fn breaks(&self) -> &[T] {
        &self.breaks
    }

    pub fn n_pieces(&self) -> usize {
        self.pieces.len()
    }

    /// Piece for 0-based subdomain index.
    pub fn piece(&self, j: usize) -> &Polynomial<T> {
        &self.pieces[j]
    }

    pub fn support(&self, j: usize) -> (T, T) {
        (self.breaks[j], self.breaks[j + 1])
    }

    /// Value of the `d`-th derivative at `x` within piece `j` (0-based).
    pub fn eval_in(&self, j: usize, x: T, d: usize) -> T {
        self.pieces[j].nth_derivative(d).eval(x)
    }

    /// One-sided evaluation: pick the piece by location, resolving interface
    /// points toward the left piece when `from_left` is true.
    pub fn eval_side(&self, x: T, d: usize, from_left: bool) -> T {
        let j = self.locate(x, from_left);
        self.eval_in(j, x, d)
    }

    fn locate(&self, x: T, from_left: bool) -> usize {
        let n = self.pieces.len();
        for j in 0..n {
            let (lo, hi) = self.support(j);
            if x < hi || (x == hi && (from_left || j == n - 1)) {
                let _ = lo;
                return j;
            }
        }
        n - 1
    }

    pub fn map_pieces(&self, f: impl Fn(&Polynomial<T>) -> Polynomial<T>) -> Self {
        Self::new(self.breaks.clone(), self.pieces.iter().map(f).collect())
    }

    pub fn derivative(&self) -> Self {
        self.map_pieces(|p| p.derivative())
    }

    pub fn scale(&self, c: T) -> Self {
        self.map_pieces(|p| p.scale(c))
    }

    pub fn zip(&self, other: &Self, f: impl Fn(&Polynomial<T>, &Polynomial<T>) -> Polynomial<T>) -> Self {
        assert_eq!(self.breaks, other.breaks, "piecewise operands must share breakpoints");
        let pieces = self
            .pieces
            .iter()
            .zip(other.pieces.iter())
            .map(|(a, b)| f(a, b))
            .collect();
        Self::new(self.breaks.clone(), pieces)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a.sub(b))
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a.mul(b))
    }

    /// Exact integral of the function over the whole interval.
    pub fn integrate(&self) -> T {
        (0..self.pieces.len())
            .map(|j| {
                let (lo, hi) = self.support(j);
                self.pieces[j].integrate(lo, hi)
            })
            .sum()
    }

    /// Broken `W^{k,inf}` norm: max over subdomains and derivative orders
    /// `0..=k` of the supremum of the derivative.
    pub fn broken_winf_norm(&self, k: usize) -> T {
        let mut best = T::zero();
        for j in 0..self.pieces.len() {
            let (lo, hi) = self.support(j);
            let mut p = self.pieces[j].clone();
            for _ in 0..=k {
                best = best.max(p.sup_abs_on(lo, hi));
                p = p.derivative();
            }
        }
        best
    }

    /// Broken `H^k` norm, exact: `(sum_j sum_{d<=k} int_{U_j} (f^(d))^2)^{1/2}`.
    pub fn broken_hk_norm(&self, k: usize) -> T {
        let mut acc = T::zero();
        for j in 0..self.pieces.len() {
            let (lo, hi) = self.support(j);
            let mut p = self.pieces[j].clone();
            for _ in 0..=k {
                acc += p.mul(&p).integrate(lo, hi);
                p = p.derivative();
            }
        }
        acc.sqrt()
    }

    pub fn max_degree(&self) -> usize {
        self.pieces.iter().map(|p| p.degree()).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type P = Polynomial<f64>;

    #[test]
    fn eval_and_derivative() {
        let p = P::from_f64_coeffs(&[1.0, -3.0, 2.0]); // 1 - 3x + 2x^2
        assert_eq!(p.eval(2.0), 3.0);
        assert_eq!(p.derivative().coeffs(), &[-3.0, 4.0]);
        assert_eq!(p.nth_derivative(2).coeffs(), &[4.0]);
        assert!(p.nth_derivative(3).is_zero());
    }

    #[test]
    fn integral_is_exact() {
        let p = P::from_f64_coeffs(&[0.0, 0.0, 3.0]); // 3x^2
        assert!((p.integrate(0.0, 2.0) - 8.0).abs() < 1e-14);
    }

    #[test]
    fn roots_of_quadratic() {
        let p = P::from_f64_coeffs(&[0.02, -0.3, 1.0]); // (x-0.1)(x-0.2)
        let roots = p.roots_in(0.0, 1.0);
        assert_eq!(roots.len(), 2);
        assert!((roots[0] - 0.1).abs() < 1e-10);
        assert!((roots[1] - 0.2).abs() < 1e-10);
    }

    #[test]
    fn root_at_endpoint_and_tangency() {
        let p = P::from_f64_coeffs(&[0.0, 1.0]); // x, root at left endpoint
        assert!(p.has_root_in(0.0, 1.0));
        let q = P::from_f64_coeffs(&[0.25, -1.0, 1.0]); // (x-0.5)^2, double root
        let roots = q.roots_in(0.0, 1.0);
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - 0.5).abs() < 1e-7);
        let s = P::from_f64_coeffs(&[1.0, 0.0, 1.0]); // 1 + x^2, no real root
        assert!(!s.has_root_in(-1.0, 1.0));
    }

    #[test]
    fn sup_abs_uses_interior_extremum() {
        // x(1-x) has max 0.25 at x = 0.5
        let p = P::from_f64_coeffs(&[0.0, 1.0, -1.0]);
        assert!((p.sup_abs_on(0.0, 1.0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn broken_winf_examples() {
        // f = 3 constant, k = 2 -> 3
        let f = PiecewisePoly::global(vec![0.0, 1.0], P::constant(3.0));
        assert_eq!(f.broken_winf_norm(2), 3.0);
        // f = x on (0,1), k = 1 -> 1
        let f = PiecewisePoly::global(vec![0.0, 1.0], P::x());
        assert_eq!(f.broken_winf_norm(1), 1.0);
        // f = 2 + x on (0,1), k = 1 -> 3
        let f = PiecewisePoly::global(vec![0.0, 1.0], P::from_f64_coeffs(&[2.0, 1.0]));
        assert_eq!(f.broken_winf_norm(1), 3.0);
    }

    #[test]
    fn broken_hk_examples() {
        // u = 1, k = 0 -> 1
        let u = PiecewisePoly::global(vec![0.0, 1.0], P::constant(1.0));
        assert!((u.broken_hk_norm(0) - 1.0).abs() < 1e-14);
        // u = x, k = 1 -> sqrt(4/3)
        let u = PiecewisePoly::global(vec![0.0, 1.0], P::x());
        assert!((u.broken_hk_norm(1) - (4.0f64 / 3.0).sqrt()).abs() < 1e-14);
        // u = 0 on (0,.5), 1 on (.5,1), k = 1 -> sqrt(0.5)
        let u = PiecewisePoly::new(
            vec![0.0, 0.5, 1.0],
            vec![P::zero(), P::constant(1.0)],
        );
        assert!((u.broken_hk_norm(1) - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn one_sided_evaluation() {
        let u = PiecewisePoly::new(
            vec![0.0, 0.5, 1.0],
            vec![P::constant(1.0), P::constant(2.0)],
        );
        assert_eq!(u.eval_side(0.5, 0, true), 1.0);
        assert_eq!(u.eval_side(0.5, 0, false), 2.0);
        assert_eq!(u.eval_side(0.75, 0, true), 2.0);
    }
}
