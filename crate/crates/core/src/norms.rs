//! Broken Sobolev norms, dual norms, discrete operator-inverse norms, and
//! the Poincare constant.
//!
//! Point data on the finite sets (Neumann endpoints, interface points) is
//! measured in plain Euclidean norms; in 1D these sets are finite so all
//! trace-space norms are equivalent, and every report records the choice.

use nalgebra::{DMatrix, DVector};

use crate::coefficients::CoefficientField;
use crate::domain::BoundaryCondition;
use crate::error::{Error, Result};
use crate::fem::{self, BrokenEval, BrokenFemFunction, FemSystem, Mesh, TransmissionData};
use crate::linalg;
use crate::quadrature;
use crate::scalar::{r, Real};

/// Broken `H^k` norm of an FE function, exact through its piecewise
/// polynomial representation.
pub fn broken_hk_norm_fe<T: Real>(u: &BrokenFemFunction<T>, k: usize) -> Result<T> {
    if k > u.mesh.degree {
        return Err(Error::InsufficientRegularity { order: k, degree: u.mesh.degree });
    }
    Ok(u.to_piecewise().broken_hk_norm(k))
}

/// Broken `H^k` norm of a closed-form function by composite Gauss quadrature
/// on the mesh elements.
pub fn broken_hk_norm_eval<T: Real>(
    u: &dyn BrokenEval<T>,
    mesh: &Mesh<T>,
    k: usize,
    npts: usize,
) -> Result<T> {
    let (xi, wq) = quadrature::gauss_legendre::<T>(npts)?;
    let mut acc = T::zero();
    for e in &mesh.elements {
        let half = (e.hi - e.lo) * r(0.5);
        let mid = (e.hi + e.lo) * r(0.5);
        for (q, &xiq) in xi.iter().enumerate() {
            let x = mid + half * xiq;
            let w = wq[q] * half;
            for d in 0..=k {
                let v = u.value(x, d, false);
                acc += w * v * v;
            }
        }
    }
    Ok(acc.sqrt())
}

/// Discrete dual norm `sqrt(F^T M1^{-1} F)` on the constrained space.
pub fn dual_norm<T: Real>(f_vec: &DVector<T>, m1: &DMatrix<T>) -> Result<T> {
    let x = linalg::solve_spd(m1, f_vec)?;
    Ok(f_vec.dot(&x).max(T::zero()).sqrt())
}

/// Discrete Poincare constant: `sqrt` of the smallest generalized eigenvalue
/// of `|u|_{H^1}^2 = lambda ||u||_{H^1}^2` over the constrained space.
pub fn poincare_constant<T: Real>(mesh: &Mesh<T>) -> Result<T> {
    if !mesh.dom.has_dirichlet_boundary() {
        return Err(Error::NoDirichletBoundary);
    }
    let a = CoefficientField::identity(mesh.dom.clone());
    let sys = fem::assemble(&a, mesh)?;
    let m1 = sys.m1_reduced();
    let semi = sys.dofs.reduce_matrix(&sys.semi_full());
    let ev = linalg::generalized_sym_eigenvalues(&semi, &m1)?;
    Ok(ev.first().copied().unwrap_or_else(T::zero).max(T::zero()).sqrt())
}

/// Reduction matrix `P` with `P[free, dof] = 1`, so `u_red = P u_full` for
/// conforming functions and `P^T` expands free dofs.
fn reduction_matrix<T: Real>(sys: &FemSystem<T>) -> DMatrix<T> {
    let n = sys.mesh.n_dofs();
    let mut p = DMatrix::zeros(sys.dofs.n_free, n);
    for dof in 0..n {
        if let Some(fi) = sys.dofs.free_index(dof) {
            p[(fi, dof)] += T::one();
        }
    }
    p
}

/// Discrete operator norm of the solution map, `k` selecting the data norm.
///
/// `k = 0`: dual-norm data `(H_D^1)^*` to `H^1` solutions; the largest
/// singular value of `L^T K^{-1} L` with `M1 = L L^T`.
///
/// `k = 1`: data `(f, g, h)` measured in `L^2` plus Euclidean point norms,
/// solutions in the broken `H^2` norm; requires quadratic elements.
pub fn discrete_inverse_norm<T: Real>(
    a: &CoefficientField<T>,
    mesh: &Mesh<T>,
    k: usize,
) -> Result<T> {
    let sys = fem::assemble(a, mesh)?;
    discrete_inverse_norm_with(a, &sys, k)
}

/// As [`discrete_inverse_norm`] but reusing an assembled system.
pub fn discrete_inverse_norm_with<T: Real>(
    _a: &CoefficientField<T>,
    sys: &FemSystem<T>,
    k: usize,
) -> Result<T> {
    match k {
        0 => {
            let kr = sys.k_reduced();
            let m1 = sys.m1_reduced();
            let chol = m1.cholesky().ok_or(Error::SingularGram)?;
            let l = DMatrix::from(chol.l());
            let lu = kr.lu();
            let rcond_ok = {
                let mut min = T::one() / r::<T>(0.0f64.max(f64::MIN_POSITIVE));
                let mut max = T::zero();
                for i in 0..lu.u().nrows() {
                    let d = lu.u()[(i, i)].abs();
                    min = min.min(d);
                    max = max.max(d);
                }
                max > T::zero() && min / max > r(1e-14)
            };
            let x = lu.solve(&l).filter(|_| rcond_ok).ok_or(Error::SingularSystem {
                rcond: 0.0,
            })?;
            Ok(linalg::spectral_norm(&(l.transpose() * x)))
        }
        1 => {
            if sys.mesh.degree < 2 {
                return Err(Error::RequiresP2);
            }
            discrete_inverse_norm_k1(sys)
        }
        _ => Err(Error::Validation("discrete_inverse_norm supports k in {0, 1}".into())),
    }
}

fn discrete_inverse_norm_k1<T: Real>(sys: &FemSystem<T>) -> Result<T> {
    let mesh = &sys.mesh;
    let n_full = mesh.n_dofs();
    let n_free = sys.dofs.n_free;
    let p = reduction_matrix(sys);

    // data columns: FE coefficients of f, then Neumann endpoint values g,
    // then interface flux jumps h
    let mut g_cols = Vec::new();
    if mesh.dom.bc_left == BoundaryCondition::Neumann {
        g_cols.push(mesh.left_dof);
    }
    if mesh.dom.bc_right == BoundaryCondition::Neumann {
        g_cols.push(mesh.right_dof);
    }
    let n_g = g_cols.len();
    let n_h = mesh.interface_dofs.len();
    let n_data = n_full + n_g + n_h;

    // rhs map J: data -> reduced load vector
    let mut j = DMatrix::zeros(n_free, n_data);
    let pm0 = &p * &sys.m0_full;
    j.view_mut((0, 0), (n_free, n_full)).copy_from(&pm0);
    for (col, &dof) in g_cols.iter().enumerate() {
        let fi = sys.dofs.free_index(dof).expect("Neumann endpoints are free");
        j[(fi, n_full + col)] += T::one();
    }
    for (i, &(l, _)) in mesh.interface_dofs.iter().enumerate() {
        let fi = sys.dofs.free_index(l).expect("interface masters are free");
        j[(fi, n_full + n_g + i)] += T::one();
    }

    let kr = sys.k_reduced();
    let lu = kr.clone().lu();
    let x = lu.solve(&j).ok_or(Error::SingularSystem { rcond: 0.0 })?;

    // solution norm: broken H^2 Gram pulled back to free dofs
    let g2 = fem::assemble_h2_gram(mesh)?;
    let g2_red = &p * g2 * p.transpose();
    let m = x.transpose() * g2_red * &x;
    // symmetrize against roundoff
    let msym = (&m + m.transpose()) * r::<T>(0.5);

    // data Gram: L^2 mass for f, identity for the point values
    let mut b = DMatrix::zeros(n_data, n_data);
    b.view_mut((0, 0), (n_full, n_full)).copy_from(&sys.m0_full);
    for i in n_full..n_data {
        b[(i, i)] = T::one();
    }
    let ev = linalg::generalized_sym_eigenvalues(&msym, &b)?;
    Ok(ev.last().copied().unwrap_or_else(T::zero).max(T::zero()).sqrt())
}

/// Data-space norm of `F = (f, g~, g, h~, h)`.
///
/// For `k >= 1`: `||f||` in the broken `H^{k-1}` norm plus Euclidean norms
/// of the point values `g` and `h`; with `composite` set, the lifted trace
/// data `g~`, `h~` is added as plain Euclidean values. For `k = 0` the dual
/// norm of the assembled load functional is returned.
pub fn vk_minus_norm<T: Real>(
    data: &TransmissionData<T>,
    k: usize,
    sys: &FemSystem<T>,
    composite: bool,
) -> Result<T> {
    let sq_sum = |vals: &[T]| vals.iter().map(|&v| v * v).sum::<T>().sqrt();
    let mut total = if k == 0 {
        let f_vec = fem::load_vector(data, sys)?;
        dual_norm(&f_vec, &sys.m1_reduced())?
    } else {
        let g: Vec<T> = [data.g_left, data.g_right].iter().flatten().copied().collect();
        data.f.broken_hk_norm(k - 1) + sq_sum(&g) + sq_sum(&data.h)
    };
    if composite {
        let gt: Vec<T> = [data.g_tilde_left, data.g_tilde_right].iter().flatten().copied().collect();
        total += sq_sum(&gt) + sq_sum(&data.h_tilde);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DecomposedInterval;
    use approx::assert_relative_eq;

    type D = DecomposedInterval<f64>;
    type C = CoefficientField<f64>;

    fn identity_sys(d: &D, n: usize, p: usize) -> FemSystem<f64> {
        let mesh = fem::build_mesh(d, n, p).unwrap();
        fem::assemble(&C::identity(d.clone()), &mesh).unwrap()
    }

    #[test]
    fn dual_norm_riesz_identity() {
        let d = D::unit(vec![0.5]);
        let sys = identity_sys(&d, 4, 1);
        let m1 = sys.m1_reduced();
        assert_eq!(dual_norm(&DVector::zeros(m1.nrows()), &m1).unwrap(), 0.0);
        // F = M1 e: dual norm equals ||e||_{H1} = sqrt(e^T M1 e)
        let mut e = DVector::zeros(m1.nrows());
        e[1] = 1.0;
        e[2] = -0.5;
        let f = &m1 * &e;
        let want = (e.dot(&(&m1 * &e))).sqrt();
        assert_relative_eq!(dual_norm(&f, &m1).unwrap(), want, epsilon = 1e-13);
    }

    #[test]
    fn dual_norm_matches_brute_force_sup() {
        let d = D::unit(vec![0.5]);
        let sys = identity_sys(&d, 3, 1);
        let m1 = sys.m1_reduced();
        let n = m1.nrows();
        let f = DVector::from_fn(n, |i, _| ((i * 7 + 3) % 5) as f64 - 2.0);
        let val = dual_norm(&f, &m1).unwrap();
        // brute-force sup over random directions never exceeds the value
        let mut best: f64 = 0.0;
        for s in 0..2000 {
            let v = DVector::from_fn(n, |i, _| (((i + 1) * (s + 13) * 2654435761usize) % 1000) as f64 / 500.0 - 1.0);
            let denom = v.dot(&(&m1 * &v)).sqrt();
            if denom > 0.0 {
                best = best.max(f.dot(&v).abs() / denom);
            }
        }
        assert!(best <= val + 1e-12);
        // the exact maximizer v = M1^{-1} F attains it
        let vstar = linalg::solve_spd(&m1, &f).unwrap();
        let attained = f.dot(&vstar).abs() / vstar.dot(&(&m1 * &vstar)).sqrt();
        assert_relative_eq!(attained, val, epsilon = 1e-12);
    }

    #[test]
    fn poincare_examples() {
        let d = D::unit(vec![]);
        let mesh = fem::build_mesh(&d, 128, 1).unwrap();
        let eta = poincare_constant(&mesh).unwrap();
        let pi = std::f64::consts::PI;
        let want = pi / (1.0 + pi * pi).sqrt();
        assert_relative_eq!(eta, want, epsilon = 1e-3);

        let d = D::new(0.0, 1.0, vec![], BoundaryCondition::Dirichlet, BoundaryCondition::Neumann);
        let mesh = fem::build_mesh(&d, 128, 1).unwrap();
        let eta = poincare_constant(&mesh).unwrap();
        let want = (pi / 2.0) / (1.0 + pi * pi / 4.0).sqrt();
        assert_relative_eq!(eta, want, epsilon = 1e-3);

        let d = D::new(0.0, 1.0, vec![], BoundaryCondition::Neumann, BoundaryCondition::Neumann);
        let mesh = fem::build_mesh(&d, 8, 1).unwrap();
        assert!(matches!(poincare_constant(&mesh), Err(Error::NoDirichletBoundary)));
    }

    #[test]
    fn poincare_monotone_from_above() {
        let d = D::unit(vec![0.3]);
        let pi = std::f64::consts::PI;
        let cont = pi / (1.0 + pi * pi).sqrt();
        let mut prev = f64::INFINITY;
        for n in [2, 4, 8, 16] {
            let mesh = fem::build_mesh(&d, n, 1).unwrap();
            let eta = poincare_constant(&mesh).unwrap();
            assert!(eta >= cont - 1e-12, "discrete value stays above continuous");
            assert!(eta <= prev + 1e-12, "monotone under refinement");
            prev = eta;
        }
    }

    #[test]
    fn inverse_norm_riesz_and_scaling() {
        let d = D::unit(vec![0.5]);
        let mesh = fem::build_mesh(&d, 6, 1).unwrap();
        let a = C::identity(d.clone());
        let v = discrete_inverse_norm(&a, &mesh, 0).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-10);
        let v2 = discrete_inverse_norm(&a.scale(2.0), &mesh, 0).unwrap();
        assert_relative_eq!(v2, 0.5, epsilon = 1e-10);
    }

    #[test]
    fn inverse_norm_bounded_by_coercivity() {
        let d = D::unit(vec![0.5]);
        let mesh = fem::build_mesh(&d, 8, 1).unwrap();
        let a = C::diagonal_constants(d.clone(), &[1.0, 1.0], &[1.0, 2.0]);
        let v = discrete_inverse_norm(&a, &mesh, 0).unwrap();
        let gamma = a.coercivity_constant(64).gamma_full;
        assert!(v <= 1.0 / gamma + 1e-9);
        // dense-oracle check: random data quotients never exceed the norm
        let sys = fem::assemble(&a, &mesh).unwrap();
        let kr = sys.k_reduced();
        let m1 = sys.m1_reduced();
        let n = kr.nrows();
        let mut best: f64 = 0.0;
        for s in 0..500 {
            let f = DVector::from_fn(n, |i, _| (((i + 2) * (s + 7) * 2654435761usize) % 1000) as f64 / 500.0 - 1.0);
            let u = linalg::solve_lu(&kr, &f).unwrap();
            let num = u.dot(&(&m1 * &u)).sqrt();
            let den = dual_norm(&f, &m1).unwrap();
            best = best.max(num / den);
        }
        assert!(best <= v + 1e-9);
        assert!(best >= 0.5 * v, "random sampling comes within a factor of the sup");
    }

    #[test]
    fn inverse_norm_k1_requires_p2_and_scales() {
        let d = D::unit(vec![0.5]);
        let a = C::identity(d.clone());
        let mesh = fem::build_mesh(&d, 4, 1).unwrap();
        assert!(matches!(discrete_inverse_norm(&a, &mesh, 1), Err(Error::RequiresP2)));
        let mesh = fem::build_mesh(&d, 4, 2).unwrap();
        let v = discrete_inverse_norm(&a, &mesh, 1).unwrap();
        assert!(v.is_finite() && v > 0.0);
        let v2 = discrete_inverse_norm(&a.scale(2.0), &mesh, 1).unwrap();
        assert_relative_eq!(v2, v / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn vk_minus_examples() {
        let d = D::unit(vec![0.5]);
        let mesh = fem::build_mesh(&d, 4, 1).unwrap();
        let sys = fem::assemble(&C::identity(d.clone()), &mesh).unwrap();
        let zero = TransmissionData::zero(&d);
        assert_eq!(vk_minus_norm(&zero, 1, &sys, false).unwrap(), 0.0);

        let mut f1 = TransmissionData::zero(&d);
        f1.f = crate::poly::PiecewisePoly::global(
            vec![0.0, 0.5, 1.0],
            crate::poly::Polynomial::constant(1.0),
        );
        assert_relative_eq!(vk_minus_norm(&f1, 1, &sys, false).unwrap(), 1.0, epsilon = 1e-13);

        let mut fh = TransmissionData::zero(&d);
        fh.h = vec![3.0];
        assert_relative_eq!(vk_minus_norm(&fh, 1, &sys, false).unwrap(), 3.0, epsilon = 1e-13);

        // composite adds the lifted trace data
        let mut fc = TransmissionData::zero(&d);
        fc.h_tilde = vec![4.0];
        assert_relative_eq!(vk_minus_norm(&fc, 1, &sys, true).unwrap(), 4.0, epsilon = 1e-13);
        assert_eq!(vk_minus_norm(&fc, 1, &sys, false).unwrap(), 0.0);
    }

    #[test]
    fn broken_norm_consistency_for_conforming_fn() {
        // [[u]] = 0: broken H1 norm equals the conforming H1 norm
        let d = D::unit(vec![0.5]);
        let mesh = fem::build_mesh(&d, 8, 1).unwrap();
        let mut u = BrokenFemFunction::zero(&mesh);
        for (i, &x) in mesh.node_coords.iter().enumerate() {
            u.coeffs[i] = x * (1.0 - x);
        }
        let broken = broken_hk_norm_fe(&u, 1).unwrap();
        let plain = u.to_piecewise().broken_hk_norm(1);
        assert_relative_eq!(broken, plain, epsilon = 1e-14);
        assert!(matches!(
            broken_hk_norm_fe(&u, 2),
            Err(Error::InsufficientRegularity { .. })
        ));
    }
}
