//! Finite element discretization on meshes conforming to the interface.
//!
//! Interface nodes are duplicated (left and right copy) so the assembled
//! matrices live on the broken space. The conforming solution space is
//! recovered by tying each right copy to its left partner; prescribed jumps
//! and Dirichlet values enter through a lifting function, which keeps the
//! reduced system SPD-structured whenever the coefficients are coercive.

use nalgebra::{DMatrix, DVector};

use crate::coefficients::CoefficientField;
use crate::domain::{BoundaryCondition, DecomposedInterval};
use crate::error::{Error, Result};
use crate::poly::{PiecewisePoly, Polynomial};
use crate::quadrature;
use crate::scalar::{r, Real};

/// One mesh element; `dofs` are global dof ids left-to-right
/// (`[left, right]` for p=1, `[left, mid, right]` for p=2).
#[derive(Debug, Clone)]
pub struct Element<T: Real> {
    pub lo: T,
    pub hi: T,
    /// 0-based subdomain index.
    pub subdomain: usize,
    pub dofs: Vec<usize>,
}

/// Mesh conforming to the decomposition, with duplicated interface nodes.
#[derive(Debug, Clone)]
pub struct Mesh<T: Real> {
    pub dom: DecomposedInterval<T>,
    pub degree: usize,
    pub n_per_subdomain: usize,
    pub elements: Vec<Element<T>>,
    /// Coordinate of every global dof.
    pub node_coords: Vec<T>,
    /// `(left_copy, right_copy)` global dofs per interface point.
    pub interface_dofs: Vec<(usize, usize)>,
    pub left_dof: usize,
    pub right_dof: usize,
}

/// Uniform elements within each subdomain; interface nodes duplicated.
pub fn build_mesh<T: Real>(
    dom: &DecomposedInterval<T>,
    n_per_subdomain: usize,
    degree: usize,
) -> Result<Mesh<T>> {
    if n_per_subdomain < 1 {
        return Err(Error::Validation("n_per_subdomain must be >= 1".into()));
    }
    if degree != 1 && degree != 2 {
        return Err(Error::Validation("degree must be 1 or 2".into()));
    }
    let bp = dom.breakpoints();
    let mut elements = Vec::new();
    let mut node_coords = Vec::new();
    let mut interface_dofs = Vec::new();
    let mut first_dof_of_subdomain = Vec::new();
    for j in 0..dom.n_subdomains() {
        let (lo, hi) = (bp[j], bp[j + 1]);
        let h = (hi - lo) / r(n_per_subdomain as f64);
        let base = node_coords.len();
        first_dof_of_subdomain.push(base);
        // nodes of this subdomain: n*degree + 1 points
        let n_nodes = n_per_subdomain * degree + 1;
        for i in 0..n_nodes {
            let t = r::<T>(i as f64) / r((n_nodes - 1) as f64);
            node_coords.push(lo + (hi - lo) * t);
        }
        for e in 0..n_per_subdomain {
            let elo = lo + h * r(e as f64);
            let ehi = if e + 1 == n_per_subdomain { hi } else { lo + h * r((e + 1) as f64) };
            let dofs: Vec<usize> = (0..=degree).map(|i| base + e * degree + i).collect();
            elements.push(Element { lo: elo, hi: ehi, subdomain: j, dofs });
        }
        if j > 0 {
            let left_copy = base - 1;
            interface_dofs.push((left_copy, base));
        }
    }
    let left_dof = 0;
    let right_dof = node_coords.len() - 1;
    Ok(Mesh {
        dom: dom.clone(),
        degree,
        n_per_subdomain,
        elements,
        node_coords,
        interface_dofs,
        left_dof,
        right_dof,
    })
}

impl<T: Real> Mesh<T> {
    pub fn n_dofs(&self) -> usize {
        self.node_coords.len()
    }

    /// Index of the element containing `x`, resolving shared element
    /// boundaries toward the left element when `from_left` holds.
    pub fn element_containing(&self, x: T, from_left: bool) -> Result<usize> {
        if x < self.dom.a || x > self.dom.b {
            return Err(Error::OutOfDomain(crate::scalar::to_f64(x)));
        }
        let n = self.elements.len();
        for (i, e) in self.elements.iter().enumerate() {
            if x < e.hi || (x == e.hi && (from_left || i == n - 1)) {
                return Ok(i);
            }
        }
        Ok(n - 1)
    }

    /// Dimension of the conforming constrained space `S_N`.
    pub fn dim_sn(&self) -> usize {
        DofMap::new(self).n_free
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DofKind {
    Free(usize),
    Dirichlet,
    /// Right interface copy tied to its left partner.
    Slave { master: usize },
}

/// Constraint bookkeeping mapping broken dofs to the conforming space.
#[derive(Debug, Clone)]
pub struct DofMap {
    kinds: Vec<DofKind>,
    pub n_free: usize,
}

impl DofMap {
    pub fn new<T: Real>(mesh: &Mesh<T>) -> Self {
        let n = mesh.n_dofs();
        let mut kinds = vec![DofKind::Free(0); n];
        if mesh.dom.bc_left == BoundaryCondition::Dirichlet {
            kinds[mesh.left_dof] = DofKind::Dirichlet;
        }
        if mesh.dom.bc_right == BoundaryCondition::Dirichlet {
            kinds[mesh.right_dof] = DofKind::Dirichlet;
        }
        for &(l, rdof) in &mesh.interface_dofs {
            kinds[rdof] = DofKind::Slave { master: l };
        }
        let mut n_free = 0;
        for k in kinds.iter_mut() {
            if let DofKind::Free(ref mut idx) = k {
                *idx = n_free;
                n_free += 1;
            }
        }
        Self { kinds, n_free }
    }

    /// Free index the dof maps to in the conforming space, if any.
    pub fn free_index(&self, dof: usize) -> Option<usize> {
        match self.kinds[dof] {
            DofKind::Free(i) => Some(i),
            DofKind::Slave { master } => match self.kinds[master] {
                DofKind::Free(i) => Some(i),
                _ => unreachable!("interface masters are always free"),
            },
            DofKind::Dirichlet => None,
        }
    }

    pub fn is_dirichlet(&self, dof: usize) -> bool {
        matches!(self.kinds[dof], DofKind::Dirichlet)
    }

    /// `Z^T M Z` where `Z` expands free dofs to the broken space.
    pub fn reduce_matrix<T: Real>(&self, m: &DMatrix<T>) -> DMatrix<T> {
        let mut out = DMatrix::zeros(self.n_free, self.n_free);
        for rdof in 0..m.nrows() {
            let Some(fr) = self.free_index(rdof) else { continue };
            for c in 0..m.ncols() {
                let Some(fc) = self.free_index(c) else { continue };
                out[(fr, fc)] += m[(rdof, c)];
            }
        }
        out
    }

    pub fn reduce_vector<T: Real>(&self, v: &DVector<T>) -> DVector<T> {
        let mut out = DVector::zeros(self.n_free);
        for dof in 0..v.len() {
            if let Some(fi) = self.free_index(dof) {
                out[fi] += v[dof];
            }
        }
        out
    }

    /// Expand free coefficients to the broken space, adding the lifting.
    pub fn expand<T: Real>(&self, w: &DVector<T>, lifting: Option<&DVector<T>>) -> DVector<T> {
        let n = self.kinds.len();
        let mut out = DVector::zeros(n);
        for dof in 0..n {
            out[dof] = match self.free_index(dof) {
                Some(fi) => w[fi],
                None => T::zero(),
            };
            if let Some(u0) = lifting {
                out[dof] += u0[dof];
            }
        }
        out
    }
}

/// Assembled matrices on the full broken space.
pub struct FemSystem<T: Real> {
    pub mesh: Mesh<T>,
    pub dofs: DofMap,
    /// Matrix of `B^A` on the broken space.
    pub k_full: DMatrix<T>,
    /// `H^1` Gram matrix.
    pub m1_full: DMatrix<T>,
    /// `L^2` Gram matrix.
    pub m0_full: DMatrix<T>,
}

impl<T: Real> FemSystem<T> {
    pub fn k_reduced(&self) -> DMatrix<T> {
        self.dofs.reduce_matrix(&self.k_full)
    }
    pub fn m1_reduced(&self) -> DMatrix<T> {
        self.dofs.reduce_matrix(&self.m1_full)
    }
    pub fn m0_reduced(&self) -> DMatrix<T> {
        self.dofs.reduce_matrix(&self.m0_full)
    }
    /// `H^1` seminorm Gram matrix (stiffness of the Laplacian part).
    pub fn semi_full(&self) -> DMatrix<T> {
        &self.m1_full - &self.m0_full
    }
}

/// Lagrange shape functions on the reference interval `[-1, 1]`.
fn shape<T: Real>(degree: usize, i: usize, xi: T) -> T {
    let half: T = r(0.5);
    match (degree, i) {
        (1, 0) => (T::one() - xi) * half,
        (1, 1) => (T::one() + xi) * half,
        (2, 0) => xi * (xi - T::one()) * half,
        (2, 1) => T::one() - xi * xi,
        (2, 2) => xi * (xi + T::one()) * half,
        _ => panic!("unsupported shape function"),
    }
}

fn dshape<T: Real>(degree: usize, i: usize, xi: T) -> T {
    let half: T = r(0.5);
    match (degree, i) {
        (1, 0) => -half,
        (1, 1) => half,
        (2, 0) => xi - half,
        (2, 1) => -(xi + xi),
        (2, 2) => xi + half,
        _ => panic!("unsupported shape function"),
    }
}

/// Assemble `B^A`, the `H^1` Gram, and the `L^2` Gram on the broken space.
/// Gauss order is chosen so every polynomial integrand is exact.
pub fn assemble<T: Real>(a: &CoefficientField<T>, mesh: &Mesh<T>) -> Result<FemSystem<T>> {
    let n = mesh.n_dofs();
    let p = mesh.degree;
    let npts = (a.max_degree() + 2 * p) / 2 + 2;
    let (xi, wq) = quadrature::gauss_legendre::<T>(npts)?;
    let nloc = p + 1;
    let mut k_full = DMatrix::zeros(n, n);
    let mut m1_full = DMatrix::zeros(n, n);
    let mut m0_full = DMatrix::zeros(n, n);
    for e in &mesh.elements {
        let half = (e.hi - e.lo) * r(0.5);
        let mid = (e.hi + e.lo) * r(0.5);
        let jac_inv = T::one() / half;
        let block = &a.blocks[e.subdomain];
        for (q, &xiq) in xi.iter().enumerate() {
            let x = mid + half * xiq;
            let w = wq[q] * half;
            let a00 = block.a00.eval(x);
            let a01 = block.a01.eval(x);
            let a10 = block.a10.eval(x);
            let a11 = block.a11.eval(x);
            let phi: Vec<T> = (0..nloc).map(|i| shape(p, i, xiq)).collect();
            let dphi: Vec<T> = (0..nloc).map(|i| dshape(p, i, xiq) * jac_inv).collect();
            for rl in 0..nloc {
                let gr = e.dofs[rl];
                for cl in 0..nloc {
                    let gc = e.dofs[cl];
                    // trial u = phi[cl], test v = phi[rl]
                    let kval = a11 * dphi[cl] * dphi[rl]
                        + a01 * dphi[cl] * phi[rl]
                        + a10 * phi[cl] * dphi[rl]
                        + a00 * phi[cl] * phi[rl];
                    k_full[(gr, gc)] += w * kval;
                    m1_full[(gr, gc)] += w * (phi[cl] * phi[rl] + dphi[cl] * dphi[rl]);
                    m0_full[(gr, gc)] += w * phi[cl] * phi[rl];
                }
            }
        }
    }
    Ok(FemSystem { mesh: mesh.clone(), dofs: DofMap::new(mesh), k_full, m1_full, m0_full })
}

/// Broken `H^2` Gram matrix on the full broken space (derivative orders
/// 0, 1, 2). Second derivatives of P1 elements vanish identically.
pub fn assemble_h2_gram<T: Real>(mesh: &Mesh<T>) -> Result<DMatrix<T>> {
    let n = mesh.n_dofs();
    let p = mesh.degree;
    let npts = p + 2;
    let (xi, wq) = quadrature::gauss_legendre::<T>(npts)?;
    let nloc = p + 1;
    let mut g2 = DMatrix::zeros(n, n);
    for e in &mesh.elements {
        let half = (e.hi - e.lo) * r(0.5);
        let jac_inv = T::one() / half;
        for (q, &xiq) in xi.iter().enumerate() {
            let w = wq[q] * half;
            let phi: Vec<T> = (0..nloc).map(|i| shape(p, i, xiq)).collect();
            let dphi: Vec<T> = (0..nloc).map(|i| dshape(p, i, xiq) * jac_inv).collect();
            let d2phi: Vec<T> = (0..nloc)
                .map(|i| {
                    if p == 2 {
                        let d2 = match i {
                            0 => T::one(),
                            1 => -(T::one() + T::one()),
                            _ => T::one(),
                        };
                        d2 * jac_inv * jac_inv
                    } else {
                        T::zero()
                    }
                })
                .collect();
            for rl in 0..nloc {
                for cl in 0..nloc {
                    g2[(e.dofs[rl], e.dofs[cl])] +=
                        w * (phi[cl] * phi[rl] + dphi[cl] * dphi[rl] + d2phi[cl] * d2phi[rl]);
                }
            }
        }
    }
    Ok(g2)
}

/// The data tuple `F = (f, g~, g, h~, h)`.
#[derive(Debug, Clone)]
pub struct TransmissionData<T: Real> {
    /// Volume source, piecewise polynomial on the decomposition.
    pub f: PiecewisePoly<T>,
    /// Dirichlet trace values, present exactly at Dirichlet endpoints.
    pub g_tilde_left: Option<T>,
    pub g_tilde_right: Option<T>,
    /// Outward conormal values, present exactly at Neumann endpoints.
    pub g_left: Option<T>,
    pub g_right: Option<T>,
    /// Solution jump per interface point.
    pub h_tilde: Vec<T>,
    /// Conormal-flux jump per interface point.
    pub h: Vec<T>,
}

impl<T: Real> TransmissionData<T> {
    pub fn zero(dom: &DecomposedInterval<T>) -> Self {
        let d = BoundaryCondition::Dirichlet;
        Self {
            f: PiecewisePoly::new(dom.breakpoints(), vec![Polynomial::zero(); dom.n_subdomains()]),
            g_tilde_left: (dom.bc_left == d).then_some(T::zero()),
            g_tilde_right: (dom.bc_right == d).then_some(T::zero()),
            g_left: (dom.bc_left != d).then_some(T::zero()),
            g_right: (dom.bc_right != d).then_some(T::zero()),
            h_tilde: vec![T::zero(); dom.gamma.len()],
            h: vec![T::zero(); dom.gamma.len()],
        }
    }

    pub fn validate(&self, dom: &DecomposedInterval<T>) -> Vec<String> {
        let mut v = Vec::new();
        let d = BoundaryCondition::Dirichlet;
        let check = |present: bool, wanted: bool, what: &str, out: &mut Vec<String>| {
            if present != wanted {
                out.push(format!(
                    "{} must be supplied exactly on its tagged set (present: {}, tagged: {})",
                    what, present, wanted
                ));
            }
        };
        check(self.g_tilde_left.is_some(), dom.bc_left == d, "g~ (left)", &mut v);
        check(self.g_tilde_right.is_some(), dom.bc_right == d, "g~ (right)", &mut v);
        check(self.g_left.is_some(), dom.bc_left != d, "g (left)", &mut v);
        check(self.g_right.is_some(), dom.bc_right != d, "g (right)", &mut v);
        if self.h_tilde.len() != dom.gamma.len() {
            v.push("h~ must have one value per interface point".into());
        }
        if self.h.len() != dom.gamma.len() {
            v.push("h must have one value per interface point".into());
        }
        if self.f.breaks() != dom.breakpoints() {
            v.push("f must be piecewise on the domain decomposition".into());
        }
        v
    }
}

/// FE function on the broken space (duplicated interface nodes).
#[derive(Debug, Clone)]
pub struct BrokenFemFunction<T: Real> {
    pub mesh: Mesh<T>,
    pub coeffs: DVector<T>,
}

impl<T: Real> BrokenFemFunction<T> {
    pub fn zero(mesh: &Mesh<T>) -> Self {
        Self { mesh: mesh.clone(), coeffs: DVector::zeros(mesh.n_dofs()) }
    }

    /// `d`-th derivative at `x`, one-sided at element boundaries.
    pub fn eval(&self, x: T, d: usize, from_left: bool) -> Result<T> {
        if d > self.mesh.degree {
            return Err(Error::InsufficientRegularity { order: d, degree: self.mesh.degree });
        }
        let ei = self.mesh.element_containing(x, from_left)?;
        Ok(self.eval_in_element(ei, x, d))
    }

    fn eval_in_element(&self, ei: usize, x: T, d: usize) -> T {
        let e = &self.mesh.elements[ei];
        let half = (e.hi - e.lo) * r(0.5);
        let mid = (e.hi + e.lo) * r(0.5);
        let xi = (x - mid) / half;
        let p = self.mesh.degree;
        let mut acc = T::zero();
        for (i, &dof) in e.dofs.iter().enumerate() {
            let basis = match d {
                0 => shape(p, i, xi),
                1 => dshape(p, i, xi) / half,
                2 if p == 2 => {
                    // second derivative of the quadratic Lagrange basis
                    let d2 = match i {
                        0 => T::one(),
                        1 => -(T::one() + T::one()),
                        2 => T::one(),
                        _ => unreachable!(),
                    };
                    d2 / (half * half)
                }
                _ => T::zero(),
            };
            acc += self.coeffs[dof] * basis;
        }
        acc
    }

    /// Jump `[[u]]` at 0-based interface `i`, honoring the orientation.
    pub fn jump_at(&self, i: usize) -> T {
        let (l, rt) = self.mesh.interface_dofs[i];
        self.mesh.dom.orientation.sign::<T>() * (self.coeffs[l] - self.coeffs[rt])
    }

    /// Exact piecewise-polynomial representation over element boundaries.
    pub fn to_piecewise(&self) -> PiecewisePoly<T> {
        let mut breaks = vec![self.mesh.elements[0].lo];
        let mut pieces = Vec::new();
        for (ei, e) in self.mesh.elements.iter().enumerate() {
            breaks.push(e.hi);
            pieces.push(self.element_polynomial(ei));
        }
        PiecewisePoly::new(breaks, pieces)
    }

    fn element_polynomial(&self, ei: usize) -> Polynomial<T> {
        let e = &self.mesh.elements[ei];
        let p = self.mesh.degree;
        // Lagrange interpolation through the element nodes
        let nodes: Vec<T> = (0..=p)
            .map(|i| e.lo + (e.hi - e.lo) * r::<T>(i as f64) / r(p as f64))
            .collect();
        let mut acc = Polynomial::zero();
        for (i, &dof) in e.dofs.iter().enumerate() {
            let mut li = Polynomial::constant(T::one());
            for (jn, &xj) in nodes.iter().enumerate() {
                if jn != i {
                    let denom = nodes[i] - xj;
                    li = li.mul(&Polynomial::new(vec![-xj / denom, T::one() / denom]));
                }
            }
            acc = acc.add(&li.scale(self.coeffs[dof]));
        }
        acc
    }

    pub fn h1_norm(&self) -> T {
        self.to_piecewise().broken_hk_norm(1)
    }

    pub fn l2_norm(&self) -> T {
        self.to_piecewise().broken_hk_norm(0)
    }
}

/// One-sided evaluation of derivatives; the common interface for FE
/// functions, piecewise polynomials, and closed-form references.
pub trait BrokenEval<T: Real> {
    fn value(&self, x: T, d: usize, from_left: bool) -> T;
}

impl<T: Real> BrokenEval<T> for PiecewisePoly<T> {
    fn value(&self, x: T, d: usize, from_left: bool) -> T {
        self.eval_side(x, d, from_left)
    }
}

impl<T: Real> BrokenEval<T> for BrokenFemFunction<T> {
    fn value(&self, x: T, d: usize, from_left: bool) -> T {
        self.eval(x, d, from_left).expect("evaluation within mesh bounds")
    }
}

/// Globally smooth function given by derivative callables.
pub struct SmoothFn<T: Real> {
    derivs: Vec<Box<dyn Fn(T) -> T + Sync + Send>>,
}

impl<T: Real> SmoothFn<T> {
    pub fn new(derivs: Vec<Box<dyn Fn(T) -> T + Sync + Send>>) -> Self {
        Self { derivs }
    }

    /// `sin(pi x)` with derivatives up to the given order.
    pub fn sin_pi_x(orders: usize) -> Self {
        let derivs = (0..=orders)
            .map(|d| {
                let f: Box<dyn Fn(T) -> T + Sync + Send> = Box::new(move |x: T| {
                    let pi = T::pi();
                    let scale = pi.powi(d as i32);
                    match d % 4 {
                        0 => scale * (pi * x).sin(),
                        1 => scale * (pi * x).cos(),
                        2 => -scale * (pi * x).sin(),
                        _ => -scale * (pi * x).cos(),
                    }
                });
                f
            })
            .collect();
        Self { derivs }
    }
}

impl<T: Real> BrokenEval<T> for SmoothFn<T> {
    fn value(&self, x: T, d: usize, _from_left: bool) -> T {
        (self.derivs[d])(x)
    }
}

/// Lifting carrying Dirichlet values and prescribed jumps, vanishing at every
/// unconstrained node.
pub fn lift_data<T: Real>(
    g_tilde_left: Option<T>,
    g_tilde_right: Option<T>,
    h_tilde: &[T],
    mesh: &Mesh<T>,
) -> BrokenFemFunction<T> {
    let dofs = DofMap::new(mesh);
    let mut u0 = DVector::zeros(mesh.n_dofs());
    if dofs.is_dirichlet(mesh.left_dof) {
        u0[mesh.left_dof] = g_tilde_left.unwrap_or_else(T::zero);
    }
    if dofs.is_dirichlet(mesh.right_dof) {
        u0[mesh.right_dof] = g_tilde_right.unwrap_or_else(T::zero);
    }
    let s = mesh.dom.orientation.sign::<T>();
    for (i, &(_l, rt)) in mesh.interface_dofs.iter().enumerate() {
        u0[rt] = -s * h_tilde[i];
    }
    BrokenFemFunction { mesh: mesh.clone(), coeffs: u0 }
}

/// Reduced load vector for the duality pairing `<I(f,g,h), v>`.
pub fn load_vector<T: Real>(data: &TransmissionData<T>, sys: &FemSystem<T>) -> Result<DVector<T>> {
    let mesh = &sys.mesh;
    let p = mesh.degree;
    let npts = (data.f.max_degree() + p) / 2 + 2;
    let (xi, wq) = quadrature::gauss_legendre::<T>(npts)?;
    let mut full = DVector::zeros(mesh.n_dofs());
    for e in &mesh.elements {
        let half = (e.hi - e.lo) * r(0.5);
        let mid = (e.hi + e.lo) * r(0.5);
        let fpoly = data.f.piece(e.subdomain);
        for (q, &xiq) in xi.iter().enumerate() {
            let x = mid + half * xiq;
            let w = wq[q] * half;
            let fval = fpoly.eval(x);
            for (i, &dof) in e.dofs.iter().enumerate() {
                full[dof] += w * fval * shape(p, i, xiq);
            }
        }
    }
    let mut reduced = sys.dofs.reduce_vector(&full);
    if let Some(g) = data.g_left {
        if let Some(fi) = sys.dofs.free_index(mesh.left_dof) {
            reduced[fi] += g;
        }
    }
    if let Some(g) = data.g_right {
        if let Some(fi) = sys.dofs.free_index(mesh.right_dof) {
            reduced[fi] += g;
        }
    }
    for (i, &(l, _)) in mesh.interface_dofs.iter().enumerate() {
        let fi = sys.dofs.free_index(l).expect("interface masters are free");
        reduced[fi] += data.h[i];
    }
    Ok(reduced)
}

/// Galerkin solve `u = u0 + w` with jumps and Dirichlet data imposed by the
/// lifting `u0` and `w` in the constrained space.
pub fn solve_transmission<T: Real>(
    a: &CoefficientField<T>,
    data: &TransmissionData<T>,
    mesh: &Mesh<T>,
) -> Result<BrokenFemFunction<T>> {
    let sys = assemble(a, mesh)?;
    solve_with(&sys, data)
}

/// As [`solve_transmission`] but reusing an assembled system.
pub fn solve_with<T: Real>(sys: &FemSystem<T>, data: &TransmissionData<T>) -> Result<BrokenFemFunction<T>> {
    let violations = data.validate(&sys.mesh.dom);
    if !violations.is_empty() {
        return Err(Error::Validation(violations.join("; ")));
    }
    let u0 = lift_data(data.g_tilde_left, data.g_tilde_right, &data.h_tilde, &sys.mesh);
    let mut rhs = load_vector(data, sys)?;
    let correction = sys.dofs.reduce_vector(&(&sys.k_full * &u0.coeffs));
    rhs -= correction;
    let w = crate::linalg::solve_lu(&sys.k_reduced(), &rhs)?;
    let coeffs = sys.dofs.expand(&w, Some(&u0.coeffs));
    Ok(BrokenFemFunction { mesh: sys.mesh.clone(), coeffs })
}

/// Conormal values at the endpoints (outward normal) and the conormal-flux
/// jump at every interface point, lower-order term included.
#[derive(Debug, Clone)]
pub struct ConormalReport<T: Real> {
    pub d_nu_left: T,
    pub d_nu_right: T,
    pub interface_jumps: Vec<T>,
}

pub fn conormal_jump<T: Real>(
    a: &CoefficientField<T>,
    u: &BrokenFemFunction<T>,
    mesh: &Mesh<T>,
) -> Result<ConormalReport<T>> {
    let flux = |x: T, from_left: bool| -> Result<T> {
        let side = if from_left { crate::coefficients::Side::Left } else { crate::coefficients::Side::Right };
        let m = a.evaluate(x, 0, Some(side))?;
        Ok(m[(1, 1)] * u.eval(x, 1, from_left)? + m[(1, 0)] * u.eval(x, 0, from_left)?)
    };
    let d_nu_left = -flux(mesh.dom.a, false)?;
    let d_nu_right = flux(mesh.dom.b, true)?;
    let s = mesh.dom.orientation.sign::<T>();
    let mut interface_jumps = Vec::new();
    for &g in &mesh.dom.gamma {
        interface_jumps.push(s * (flux(g, true)? - flux(g, false)?));
    }
    Ok(ConormalReport { d_nu_left, d_nu_right, interface_jumps })
}

fn projection_rhs<T: Real>(
    u: &dyn BrokenEval<T>,
    sys: &FemSystem<T>,
    weights: impl Fn(T, T, T, T) -> T,
    npts: usize,
) -> Result<DVector<T>> {
    // weights(uval, duval, phi, dphi) gives the integrand against each test fn
    let mesh = &sys.mesh;
    let p = mesh.degree;
    let (xi, wq) = quadrature::gauss_legendre::<T>(npts)?;
    let mut full = DVector::zeros(mesh.n_dofs());
    for e in &mesh.elements {
        let half = (e.hi - e.lo) * r(0.5);
        let mid = (e.hi + e.lo) * r(0.5);
        for (q, &xiq) in xi.iter().enumerate() {
            let x = mid + half * xiq;
            let w = wq[q] * half;
            let uval = u.value(x, 0, false);
            let duval = u.value(x, 1, false);
            for (i, &dof) in e.dofs.iter().enumerate() {
                let phi = shape(p, i, xiq);
                let dphi = dshape(p, i, xiq) / half;
                full[dof] += w * weights(uval, duval, phi, dphi);
            }
        }
    }
    Ok(sys.dofs.reduce_vector(&full))
}

/// Default quadrature size for projecting closed-form (non-polynomial) inputs.
pub const PROJECTION_QUAD_PTS: usize = 16;

/// `H^1`-orthogonal projection `Q_N u` onto the conforming space.
pub fn h1_projection<T: Real>(
    u: &dyn BrokenEval<T>,
    sys: &FemSystem<T>,
    npts: usize,
) -> Result<BrokenFemFunction<T>> {
    let rhs = projection_rhs(u, sys, |uv, duv, phi, dphi| uv * phi + duv * dphi, npts)?;
    let w = crate::linalg::solve_spd(&sys.m1_reduced(), &rhs)?;
    let coeffs = sys.dofs.expand(&w, None);
    Ok(BrokenFemFunction { mesh: sys.mesh.clone(), coeffs })
}

/// `B^A`-orthogonal projection `Q_N^A u`; requires Hermitian, strongly
/// elliptic `A` with a positive-definite reduced stiffness.
pub fn energy_projection<T: Real>(
    a: &CoefficientField<T>,
    u: &dyn BrokenEval<T>,
    sys: &FemSystem<T>,
    npts: usize,
) -> Result<BrokenFemFunction<T>> {
    if !a.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let gamma = a.coercivity_constant(256).gamma_se;
    if gamma <= T::zero() {
        return Err(Error::NotCoercive { gamma: crate::scalar::to_f64(gamma) });
    }
    let blocks: Vec<_> = a.blocks.clone();
    let rhs = {
        // B^A(u, phi_r) element-wise; coefficients evaluated pointwise
        let mesh = &sys.mesh;
        let p = mesh.degree;
        let (xi, wq) = quadrature::gauss_legendre::<T>(npts)?;
        let mut full = DVector::zeros(mesh.n_dofs());
        for e in &mesh.elements {
            let half = (e.hi - e.lo) * r(0.5);
            let mid = (e.hi + e.lo) * r(0.5);
            let b = &blocks[e.subdomain];
            for (q, &xiq) in xi.iter().enumerate() {
                let x = mid + half * xiq;
                let w = wq[q] * half;
                let uval = u.value(x, 0, false);
                let duval = u.value(x, 1, false);
                let (a00, a01, a10, a11) =
                    (b.a00.eval(x), b.a01.eval(x), b.a10.eval(x), b.a11.eval(x));
                for (i, &dof) in e.dofs.iter().enumerate() {
                    let phi = shape(p, i, xiq);
                    let dphi = dshape(p, i, xiq) / half;
                    full[dof] +=
                        w * (a11 * duval * dphi + a01 * duval * phi + a10 * uval * dphi + a00 * uval * phi);
                }
            }
        }
        sys.dofs.reduce_vector(&full)
    };
    let kr = sys.k_reduced();
    let w = match crate::linalg::solve_spd(&kr, &rhs) {
        Ok(w) => w,
        Err(_) => {
            return Err(Error::NotCoercive { gamma: crate::scalar::to_f64(gamma) });
        }
    };
    let coeffs = sys.dofs.expand(&w, None);
    Ok(BrokenFemFunction { mesh: sys.mesh.clone(), coeffs })
}

/// `H^1` distance between a reference function and an FE function, by
/// composite Gauss quadrature on the FE mesh.
pub fn h1_error<T: Real>(
    u: &dyn BrokenEval<T>,
    uh: &BrokenFemFunction<T>,
    npts: usize,
) -> Result<T> {
    let (xi, wq) = quadrature::gauss_legendre::<T>(npts)?;
    let mut acc = T::zero();
    for (ei, e) in uh.mesh.elements.iter().enumerate() {
        let half = (e.hi - e.lo) * r(0.5);
        let mid = (e.hi + e.lo) * r(0.5);
        for (q, &xiq) in xi.iter().enumerate() {
            let x = mid + half * xiq;
            let w = wq[q] * half;
            let d0 = u.value(x, 0, false) - uh.eval_in_element(ei, x, 0);
            let d1 = u.value(x, 1, false) - uh.eval_in_element(ei, x, 1);
            acc += w * (d0 * d0 + d1 * d1);
        }
    }
    Ok(acc.sqrt())
}
