//! Verification harness for the polynomial operator-norm estimates:
//! manufactured solutions with symbolically derived data, the summed
//! regularity-shift inequality, the K-exponent inverse-norm envelope, and
//! the composite bound with lifted trace data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::coefficients::{CoefficientField, EntryBlock};
use crate::domain::{BoundaryCondition, DecomposedInterval};
use crate::error::{Error, Result};
use crate::fem::{self, Mesh, TransmissionData};
use crate::norms;
use crate::poly::{PiecewisePoly, Polynomial};
use crate::scalar::{r, to_f64, Real};

/// Two-sided comparison of a norm inequality.
#[derive(Debug, Clone)]
pub struct BoundReport<T: Real> {
    pub k: usize,
    pub lhs: T,
    /// The q-indexed summands making up the right-hand side.
    pub rhs_terms: Vec<T>,
    pub rhs: T,
    /// `lhs / rhs`; the corpus-empirical constant estimate.
    pub ratio: T,
    pub gamma: T,
    pub a_norm: T,
    pub dim_sn: usize,
}

const GRID: usize = 512;

/// Data tuple produced symbolically from a piecewise-polynomial solution:
/// `f` from the strong form, conormal values at Neumann endpoints, flux
/// jumps at interfaces, and traces/jumps as the lifted data.
pub fn manufacture<T: Real>(
    a: &CoefficientField<T>,
    u: &PiecewisePoly<T>,
) -> Result<TransmissionData<T>> {
    let dom = &a.dom;
    if u.breaks() != dom.breakpoints() {
        return Err(Error::Validation(
            "manufactured solution must be piecewise on the decomposition".into(),
        ));
    }
    let n = dom.n_subdomains();
    // flux q = a11 u' + a10 u and source f = -q' + a01 u' + a00 u
    let mut fluxes = Vec::with_capacity(n);
    let mut f_pieces = Vec::with_capacity(n);
    for j in 0..n {
        let b: &EntryBlock<T> = &a.blocks[j];
        let uj = u.piece(j);
        let duj = uj.derivative();
        let q = b.a11.mul(&duj).add(&b.a10.mul(uj));
        let f = q.derivative().scale(-T::one()).add(&b.a01.mul(&duj)).add(&b.a00.mul(uj));
        fluxes.push(q);
        f_pieces.push(f);
    }
    let d = BoundaryCondition::Dirichlet;
    let s = dom.orientation.sign::<T>();
    let mut h_tilde = Vec::new();
    let mut h = Vec::new();
    for (i, &g) in dom.gamma.iter().enumerate() {
        let jump_u = s * (u.eval_in(i, g, 0) - u.eval_in(i + 1, g, 0));
        let jump_q = s * (fluxes[i].eval(g) - fluxes[i + 1].eval(g));
        h_tilde.push(jump_u);
        h.push(jump_q);
    }
    Ok(TransmissionData {
        f: PiecewisePoly::new(dom.breakpoints(), f_pieces),
        g_tilde_left: (dom.bc_left == d).then(|| u.eval_in(0, dom.a, 0)),
        g_tilde_right: (dom.bc_right == d).then(|| u.eval_in(n - 1, dom.b, 0)),
        g_left: (dom.bc_left != d).then(|| dom.outward_normal(true) * fluxes[0].eval(dom.a)),
        g_right: (dom.bc_right != d).then(|| dom.outward_normal(false) * fluxes[n - 1].eval(dom.b)),
        h_tilde,
        h,
    })
}

/// Membership test for the constrained spaces: zero Dirichlet traces and
/// zero jumps across every interface.
pub fn check_in_v<T: Real>(dom: &DecomposedInterval<T>, u: &PiecewisePoly<T>) -> Result<()> {
    let tol = 1e-12;
    let d = BoundaryCondition::Dirichlet;
    if dom.bc_left == d && to_f64(u.eval_in(0, dom.a, 0)).abs() > tol {
        return Err(Error::NotInVk("nonzero Dirichlet trace at the left endpoint".into()));
    }
    let n = dom.n_subdomains();
    if dom.bc_right == d && to_f64(u.eval_in(n - 1, dom.b, 0)).abs() > tol {
        return Err(Error::NotInVk("nonzero Dirichlet trace at the right endpoint".into()));
    }
    for (i, &g) in dom.gamma.iter().enumerate() {
        let jump = to_f64(u.eval_in(i, g, 0) - u.eval_in(i + 1, g, 0));
        if jump.abs() > tol {
            return Err(Error::NotInVk(format!("nonzero solution jump at interface {}", i + 1)));
        }
    }
    Ok(())
}

fn summed_bound<T: Real>(
    a: &CoefficientField<T>,
    u: &PiecewisePoly<T>,
    data: &TransmissionData<T>,
    k: usize,
    mesh: &Mesh<T>,
    composite: bool,
) -> Result<BoundReport<T>> {
    let sys = fem::assemble(a, mesh)?;
    let inv0 = norms::discrete_inverse_norm_with(a, &sys, 0)?;
    let nn = a.amm_inverse_norm(k, GRID);
    let a_norm = a.matrix_winf_norm(k + 1).value;
    let gamma = a.coercivity_constant(GRID).gamma_full;

    let lhs = u.broken_hk_norm(k + 2);
    let mut rhs_terms = Vec::with_capacity(k + 2);
    for q in 0..=(k + 1) {
        let j = k + 1 - q;
        let f_norm = norms::vk_minus_norm(data, j, &sys, composite)?;
        let qq = (q + 1) as i32;
        let term = inv0.powi(qq)
            * nn.powi(qq * k as i32 + 1)
            * a_norm.powi(qq * (k as i32 + 1))
            * f_norm;
        rhs_terms.push(term);
    }
    let rhs = rhs_terms.iter().copied().sum::<T>();
    let ratio = if rhs > T::zero() { lhs / rhs } else { T::zero() };
    Ok(BoundReport { k, lhs, rhs_terms, rhs, ratio, gamma, a_norm, dim_sn: mesh.dim_sn() })
}

/// Regularity-shift inequality for a manufactured solution in the
/// constrained space (zero Dirichlet traces, zero jumps):
/// `||u||_{H^{k+2}} <= C * sum_q |||inv|||^{q+1} nn^{(q+1)k+1}
/// ||A||^{(q+1)(k+1)} ||F||_{k+1-q}` with `F` derived symbolically.
pub fn jk_report<T: Real>(
    a: &CoefficientField<T>,
    u: &PiecewisePoly<T>,
    k: usize,
    mesh: &Mesh<T>,
) -> Result<BoundReport<T>> {
    check_in_v(&a.dom, u)?;
    let data = manufacture(a, u)?;
    summed_bound(a, u, &data, k, mesh, true)
}

/// As [`jk_report`] but allowing nonhomogeneous traces and jumps, which
/// enter the data norm as composite Euclidean terms.
pub fn main_theorem_report<T: Real>(
    a: &CoefficientField<T>,
    u: &PiecewisePoly<T>,
    k: usize,
    mesh: &Mesh<T>,
) -> Result<BoundReport<T>> {
    let data = manufacture(a, u)?;
    summed_bound(a, u, &data, k, mesh, true)
}

/// Inverse-norm envelope report.
#[derive(Debug, Clone)]
pub struct EnvelopeReport<T: Real> {
    /// The shift index `k` (`-1` is the plain coercivity bound).
    pub k: i64,
    /// Exponent `K = (k+2)(k^2+k+1)+k`.
    pub k_exponent: i64,
    pub lhs: T,
    pub rhs: T,
    pub ratio: T,
    pub gamma: T,
}

/// Compare the discrete inverse norm at level `k+1` against the envelope
/// `gamma^{-K-1} ||A||^K` with `K = (k+2)(k^2+k+1)+k`; `k` in `{-1, 0}`.
pub fn inverse_norm_envelope<T: Real>(
    a: &CoefficientField<T>,
    k: i64,
    mesh: &Mesh<T>,
) -> Result<EnvelopeReport<T>> {
    if k != -1 && k != 0 {
        return Err(Error::Validation("envelope supports k in {-1, 0}".into()));
    }
    let gamma = a.coercivity_constant(GRID).gamma_full;
    if gamma <= T::zero() {
        return Err(Error::NotCoercive { gamma: to_f64(gamma) });
    }
    let k_exponent = (k + 2) * (k * k + k + 1) + k;
    let level = (k + 1) as usize;
    let lhs = norms::discrete_inverse_norm(a, mesh, level)?;
    let a_norm = a.matrix_winf_norm(level).value;
    let rhs = gamma.powi(-(k_exponent as i32) - 1) * a_norm.powi(k_exponent as i32);
    Ok(EnvelopeReport { k, k_exponent, lhs, rhs, ratio: lhs / rhs, gamma })
}

/// Random coercive coefficient field for corpus sweeps: polynomial entries
/// of the given degree, diagonally dominant, redrawn until
/// `gamma_full >= gamma_min`. Deterministic in the seed.
pub fn random_coefficient_field<T: Real>(
    dom: &DecomposedInterval<T>,
    degree: usize,
    gamma_min: T,
    seed: u64,
) -> CoefficientField<T> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    loop {
        let mut blocks = Vec::new();
        for _ in 0..dom.n_subdomains() {
            let mut poly = |base: f64, spread: f64| {
                let coeffs: Vec<T> = (0..=degree)
                    .map(|d| {
                        let c: f64 = rng.gen_range(-spread..spread);
                        r(if d == 0 { base + c } else { c })
                    })
                    .collect();
                Polynomial::new(coeffs)
            };
            blocks.push(EntryBlock {
                a00: poly(1.5, 0.3),
                a01: poly(0.0, 0.2),
                a10: poly(0.0, 0.2),
                a11: poly(1.5, 0.3),
            });
        }
        let field = CoefficientField::new(dom.clone(), blocks);
        if field.coercivity_constant(GRID).gamma_full >= gamma_min {
            return field;
        }
    }
}

/// Random manufactured solution in every `V_k`: a smooth polynomial times
/// the boundary bump, so traces vanish and jumps are zero.
pub fn random_solution<T: Real>(
    dom: &DecomposedInterval<T>,
    degree: usize,
    seed: u64,
) -> PiecewisePoly<T> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let coeffs: Vec<T> = (0..=degree).map(|_| r(rng.gen_range(-1.0..1.0f64))).collect();
    let smooth = Polynomial::new(coeffs);
    // bump (x - a)(b - x), zero at both endpoints
    let a = dom.a;
    let b = dom.b;
    let bump = Polynomial::new(vec![-a, T::one()]).mul(&Polynomial::new(vec![b, -T::one()]));
    PiecewisePoly::global(dom.breakpoints(), smooth.mul(&bump))
}
