//! Coefficient matrices `A = [a_ij]`, their broken `W^{k,inf}` norms,
//! coercivity constants, and inverse-coefficient bounds.
//!
//! Entries are polynomials per subdomain, so all derivatives are exact and
//! `W^{k,inf}` suprema reduce to critical-point enumeration. Suprema of
//! non-polynomial derived quantities (eigenvalues of `Re A`, derivatives of
//! `1/a11`) use dense sampling plus one golden-section refinement pass around
//! the sampled extremum.

use nalgebra::Matrix2;

use crate::domain::DecomposedInterval;
use crate::error::{Error, Result};
use crate::poly::{PiecewisePoly, Polynomial};
use crate::scalar::{r, Real};

/// Default sampling density per subdomain for non-polynomial suprema.
pub const DEFAULT_GRID: usize = 2048;

/// Which side of an interface point to evaluate from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// One subdomain's four entries; `a01` multiplies `u' * v`, `a10` multiplies
/// `u * v'` in the form `B^A`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryBlock<T: Real> {
    pub a00: Polynomial<T>,
    pub a01: Polynomial<T>,
    pub a10: Polynomial<T>,
    pub a11: Polynomial<T>,
}

impl<T: Real> EntryBlock<T> {
    pub fn zero() -> Self {
        Self {
            a00: Polynomial::zero(),
            a01: Polynomial::zero(),
            a10: Polynomial::zero(),
            a11: Polynomial::zero(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> &Polynomial<T> {
        match (i, j) {
            (0, 0) => &self.a00,
            (0, 1) => &self.a01,
            (1, 0) => &self.a10,
            (1, 1) => &self.a11,
            _ => panic!("2x2 matrix index"),
        }
    }

    fn entry_mut(&mut self, i: usize, j: usize) -> &mut Polynomial<T> {
        match (i, j) {
            (0, 0) => &mut self.a00,
            (0, 1) => &mut self.a01,
            (1, 0) => &mut self.a10,
            (1, 1) => &mut self.a11,
            _ => panic!("2x2 matrix index"),
        }
    }
}

/// Piecewise-polynomial coefficient matrix over a decomposed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField<T: Real> {
    pub dom: DecomposedInterval<T>,
    /// One block per subdomain, 0-based.
    pub blocks: Vec<EntryBlock<T>>,
}

/// Report of the matrix norm of Definition-style row/column sums.
#[derive(Debug, Clone)]
pub struct MatrixNormReport<T: Real> {
    pub k: usize,
    pub value: T,
    pub per_subdomain: Vec<T>,
}

/// Both coercivity readings of a coefficient matrix.
#[derive(Debug, Clone, Copy)]
pub struct Coercivity<T: Real> {
    /// `inf_x lambda_min(Re A(x))`: the hypothesis `Re A >= gamma I`.
    pub gamma_full: T,
    /// `inf_x Re a11(x)`: the 1D strong-ellipticity constant (`I'` variant).
    pub gamma_se: T,
}

/// Both sides of the inverse-coefficient estimate for `b^{-1}`.
#[derive(Debug, Clone, Copy)]
pub struct InverseCheck<T: Real> {
    /// `||b^{-1}||_{W^{k,inf}}`
    pub lhs: T,
    /// `||b^{-1}||_{L^inf}^{k+1} ||b||_{W^{k,inf}}^k`
    pub rhs_factor: T,
}

impl<T: Real> CoefficientField<T> {
    pub fn new(dom: DecomposedInterval<T>, blocks: Vec<EntryBlock<T>>) -> Self {
        assert_eq!(blocks.len(), dom.n_subdomains());
        Self { dom, blocks }
    }

    /// `a00 = a11 = c`, off-diagonal zero, on every subdomain.
    pub fn scaled_identity(dom: DecomposedInterval<T>, c: T) -> Self {
        let n = dom.n_subdomains();
        let block = EntryBlock {
            a00: Polynomial::constant(c),
            a01: Polynomial::zero(),
            a10: Polynomial::zero(),
            a11: Polynomial::constant(c),
        };
        Self::new(dom, vec![block; n])
    }

    pub fn identity(dom: DecomposedInterval<T>) -> Self {
        Self::scaled_identity(dom, T::one())
    }

    /// Diagonal field from piecewise-constant `a00` and `a11` values.
    pub fn diagonal_constants(dom: DecomposedInterval<T>, a00: &[T], a11: &[T]) -> Self {
        let n = dom.n_subdomains();
        assert!(a00.len() == n && a11.len() == n);
        let blocks = (0..n)
            .map(|j| EntryBlock {
                a00: Polynomial::constant(a00[j]),
                a01: Polynomial::zero(),
                a10: Polynomial::zero(),
                a11: Polynomial::constant(a11[j]),
            })
            .collect();
        Self::new(dom, blocks)
    }

    /// Entry `(i, j)` as a piecewise polynomial over the decomposition.
    pub fn entry(&self, i: usize, j: usize) -> PiecewisePoly<T> {
        PiecewisePoly::new(
            self.dom.breakpoints(),
            self.blocks.iter().map(|b| b.entry(i, j).clone()).collect(),
        )
    }

    pub fn scale(&self, c: T) -> Self {
        let blocks = self
            .blocks
            .iter()
            .map(|b| EntryBlock {
                a00: b.a00.scale(c),
                a01: b.a01.scale(c),
                a10: b.a10.scale(c),
                a11: b.a11.scale(c),
            })
            .collect();
        Self::new(self.dom.clone(), blocks)
    }

    /// Pointwise linear combination `sum_l w_l A_l`; all fields must share the
    /// same decomposition.
    pub fn linear_combination(fields: &[&Self], weights: &[T]) -> Self {
        assert!(!fields.is_empty() && fields.len() == weights.len());
        let dom = fields[0].dom.clone();
        let n = dom.n_subdomains();
        let mut blocks = vec![EntryBlock::zero(); n];
        for (f, &w) in fields.iter().zip(weights.iter()) {
            assert_eq!(f.dom.breakpoints(), dom.breakpoints());
            for jdom in 0..n {
                for i in 0..2 {
                    for j in 0..2 {
                        let cur = blocks[jdom].entry(i, j).clone();
                        *blocks[jdom].entry_mut(i, j) = cur.add(&f.blocks[jdom].entry(i, j).scale(w));
                    }
                }
            }
        }
        Self::new(dom, blocks)
    }

    /// Largest polynomial degree among all entries.
    pub fn max_degree(&self) -> usize {
        self.blocks
            .iter()
            .flat_map(|b| [&b.a00, &b.a01, &b.a10, &b.a11])
            .map(|p| p.degree())
            .max()
            .unwrap_or(0)
    }

    /// Whether every entry is a constant polynomial.
    pub fn is_constant(&self) -> bool {
        self.max_degree() == 0
    }

    /// Whether `a01 == a10` per subdomain (real Hermitian case).
    pub fn is_symmetric(&self) -> bool {
        self.blocks.iter().all(|b| b.a01 == b.a10)
    }

    /// `d`-th derivative of all entries at `x`, one-sided at interfaces.
    pub fn evaluate(&self, x: T, d: usize, side: Option<Side>) -> Result<Matrix2<T>> {
        use crate::domain::Location;
        let jdom = match self.dom.subdomain_index(x)? {
            Location::Interior(j) => j - 1,
            Location::LeftEndpoint => 0,
            Location::RightEndpoint => self.dom.n_subdomains() - 1,
            Location::InterfaceHit(i) => match side {
                Some(Side::Left) => i - 1,
                Some(Side::Right) => i,
                None => return Err(Error::InterfaceAmbiguity(crate::scalar::to_f64(x))),
            },
        };
        let b = &self.blocks[jdom];
        Ok(Matrix2::new(
            b.a00.nth_derivative(d).eval(x),
            b.a01.nth_derivative(d).eval(x),
            b.a10.nth_derivative(d).eval(x),
            b.a11.nth_derivative(d).eval(x),
        ))
    }

    /// The matrix norm `max_i max{ sum_j ||a_ij||, sum_j ||a_ji|| }` in
    /// broken `W^{k,inf}`.
    pub fn matrix_winf_norm(&self, k: usize) -> MatrixNormReport<T> {
        let norm = |i: usize, j: usize| self.entry(i, j).broken_winf_norm(k);
        let e: Vec<Vec<T>> = (0..2).map(|i| (0..2).map(|j| norm(i, j)).collect()).collect();
        let mut value = T::zero();
        for i in 0..2 {
            let row: T = e[i][0] + e[i][1];
            let col: T = e[0][i] + e[1][i];
            value = value.max(row).max(col);
        }
        let per_subdomain = (0..self.dom.n_subdomains())
            .map(|jdom| {
                let (lo, hi) = self.dom.subdomain(jdom + 1);
                let sup = |p: &Polynomial<T>| {
                    let mut best = T::zero();
                    let mut q = p.clone();
                    for _ in 0..=k {
                        best = best.max(q.sup_abs_on(lo, hi));
                        q = q.derivative();
                    }
                    best
                };
                let b = &self.blocks[jdom];
                let mut v = T::zero();
                for i in 0..2 {
                    let row = sup(b.entry(i, 0)) + sup(b.entry(i, 1));
                    let col = sup(b.entry(0, i)) + sup(b.entry(1, i));
                    v = v.max(row).max(col);
                }
                v
            })
            .collect();
        MatrixNormReport { k, value, per_subdomain }
    }

    /// Broken `W^{k,inf}` norm of `1/a11`; `+inf` when `a11` vanishes in
    /// some subdomain closure.
    pub fn amm_inverse_norm(&self, k: usize, grid: usize) -> T {
        let mut best = T::zero();
        for jdom in 0..self.dom.n_subdomains() {
            let (lo, hi) = self.dom.subdomain(jdom + 1);
            let b = &self.blocks[jdom].a11;
            if b.has_root_in(lo, hi) {
                return r(f64::INFINITY);
            }
            let derivs: Vec<Polynomial<T>> = (0..=k).map(|d| b.nth_derivative(d)).collect();
            for d in 0..=k {
                let f = |x: T| inv_derivative_at(&derivs, d, x).abs();
                let sup = if b.degree() == 0 {
                    f((lo + hi) * r(0.5))
                } else {
                    sampled_sup(lo, hi, grid, f)
                };
                best = best.max(sup);
            }
        }
        best
    }

    /// Both coercivity constants; exact for constant entries, sampled with
    /// one refinement pass otherwise.
    pub fn coercivity_constant(&self, grid: usize) -> Coercivity<T> {
        let mut gamma_full = T::max_value().unwrap_or_else(|| r(f64::MAX));
        let mut gamma_se = gamma_full;
        for jdom in 0..self.dom.n_subdomains() {
            let (lo, hi) = self.dom.subdomain(jdom + 1);
            let b = &self.blocks[jdom];
            // gamma_se: inf of the polynomial a11, exact by critical points.
            let mut se = b.a11.eval(lo).min(b.a11.eval(hi));
            for c in b.a11.derivative().roots_in(lo, hi) {
                se = se.min(b.a11.eval(c));
            }
            gamma_se = gamma_se.min(se);

            let eigmin = |x: T| {
                let a = b.a00.eval(x);
                let d = b.a11.eval(x);
                let s = (b.a01.eval(x) + b.a10.eval(x)) * r(0.5);
                let mean = (a + d) * r(0.5);
                let rad = (((a - d) * r(0.5)).powi(2) + s * s).sqrt();
                mean - rad
            };
            let full = if self.is_constant() {
                eigmin((lo + hi) * r(0.5))
            } else {
                -sampled_sup(lo, hi, grid, |x| -eigmin(x))
            };
            gamma_full = gamma_full.min(full);
        }
        Coercivity { gamma_full, gamma_se }
    }
}

/// `d`-th derivative of `1/b` at `x` from the derivatives of `b`, by the
/// quotient-rule recursion `g^(n) = -(1/b) sum_{i=1}^n C(n,i) b^(i) g^(n-i)`.
fn inv_derivative_at<T: Real>(b_derivs: &[Polynomial<T>], d: usize, x: T) -> T {
    let b0 = b_derivs[0].eval(x);
    let mut g = vec![T::one() / b0];
    for n in 1..=d {
        let mut acc = T::zero();
        let mut binom = 1.0f64;
        for i in 1..=n {
            binom = binom * (n - i + 1) as f64 / i as f64;
            acc += r::<T>(binom) * b_derivs[i].eval(x) * g[n - i];
        }
        g.push(-acc / b0);
    }
    g[d]
}

/// Dense sampling of `sup f` with one golden-section refinement pass around
/// the sampled maximizer.
pub fn sampled_sup<T: Real>(lo: T, hi: T, grid: usize, f: impl Fn(T) -> T) -> T {
    let n = grid.max(2);
    let h = (hi - lo) / r(n as f64);
    let mut best = f(lo);
    let mut best_i = 0usize;
    for i in 1..=n {
        let x = lo + h * r(i as f64);
        let v = f(x);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    // refine within the bracketing neighbours
    let a = lo + h * r(best_i.saturating_sub(1) as f64);
    let b = (lo + h * r((best_i + 1) as f64)).min(hi);
    best.max(golden_max(a, b, &f))
}

fn golden_max<T: Real>(mut a: T, mut b: T, f: &impl Fn(T) -> T) -> T {
    let phi: T = r(0.618_033_988_749_894_9);
    let mut c = b - (b - a) * phi;
    let mut d = a + (b - a) * phi;
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * phi;
            fd = f(d);
        }
    }
    fc.max(fd)
}

/// Both sides of the `b^{-1}` estimate; errors when `b` has a root.
pub fn inverse_winf_check<T: Real>(
    dom: &DecomposedInterval<T>,
    b: &PiecewisePoly<T>,
    k: usize,
    grid: usize,
) -> Result<InverseCheck<T>> {
    for j in 0..b.n_pieces() {
        let (lo, hi) = b.support(j);
        if b.piece(j).has_root_in(lo, hi) {
            return Err(Error::NonInvertible);
        }
    }
    // wrap b as the a11 entry of a field to reuse the inverse-norm machinery
    let blocks = (0..b.n_pieces())
        .map(|j| EntryBlock {
            a00: Polynomial::zero(),
            a01: Polynomial::zero(),
            a10: Polynomial::zero(),
            a11: b.piece(j).clone(),
        })
        .collect();
    let field = CoefficientField::new(dom.clone(), blocks);
    let lhs = field.amm_inverse_norm(k, grid);
    let linf_inv = field.amm_inverse_norm(0, grid);
    let rhs_factor = linf_inv.powi(k as i32 + 1) * b.broken_winf_norm(k).powi(k as i32);
    Ok(InverseCheck { lhs, rhs_factor })
}
