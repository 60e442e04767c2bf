//! Sign-changing scalar coefficients: resolvent solves and bounds for the
//! shifted operator `K_a + i t M0`, critical-contrast detection, and the
//! parametric regularity probe with its exponent search.

use nalgebra::{Complex, DMatrix, DVector};

use crate::bounds;
use crate::coefficients::CoefficientField;
use crate::domain::{BoundaryCondition, DecomposedInterval};
use crate::error::{Error, Result};
use crate::fem::{self, BrokenFemFunction, FemSystem, Mesh, TransmissionData};
use crate::linalg;
use crate::norms;
use crate::poly::PiecewisePoly;
use crate::scalar::{r, Real};

/// Piecewise-constant scalar coefficient `a = a_j` on `U_j`, nonzero and
/// possibly sign-changing; Dirichlet conditions on the whole boundary.
#[derive(Debug, Clone)]
pub struct PiecewiseScalarField<T: Real> {
    pub dom: DecomposedInterval<T>,
    pub values: Vec<T>,
}

impl<T: Real> PiecewiseScalarField<T> {
    pub fn new(dom: DecomposedInterval<T>, values: Vec<T>) -> Result<Self> {
        if dom.bc_left != BoundaryCondition::Dirichlet || dom.bc_right != BoundaryCondition::Dirichlet {
            return Err(Error::Validation(
                "sign-changing experiments need Dirichlet conditions at both endpoints".into(),
            ));
        }
        if values.len() != dom.n_subdomains() {
            return Err(Error::Validation("one coefficient value per subdomain".into()));
        }
        if values.iter().any(|&v| v == T::zero()) {
            return Err(Error::Validation("coefficient values must be nonzero".into()));
        }
        Ok(Self { dom, values })
    }

    /// Admissibility: `a_i + a_j != 0` for adjacent subdomains.
    pub fn admissible(&self) -> bool {
        self.values.windows(2).all(|w| w[0] + w[1] != T::zero())
    }

    /// Principal-part coefficient field `a11 = a_j`, all other entries zero.
    pub fn to_coefficients(&self) -> CoefficientField<T> {
        CoefficientField::diagonal_constants(
            self.dom.clone(),
            &vec![T::zero(); self.values.len()],
            &self.values,
        )
    }
}

/// Complex-valued discrete solution of `(K_a + i t M0) u = M0 f`.
#[derive(Debug, Clone)]
pub struct ResolventSolution<T: Real> {
    /// Real part as an FE function on the broken mesh.
    pub re: BrokenFemFunction<T>,
    /// Imaginary part.
    pub im: BrokenFemFunction<T>,
    /// Max interface residual of the conormal-flux jump `[[a u']]`.
    pub flux_jump_residual: T,
}

fn scalar_system<T: Real>(a: &PiecewiseScalarField<T>, mesh: &Mesh<T>) -> Result<FemSystem<T>> {
    fem::assemble(&a.to_coefficients(), mesh)
}

fn reduced_load<T: Real>(f: &PiecewisePoly<T>, sys: &FemSystem<T>) -> Result<DVector<T>> {
    let mut data = TransmissionData::zero(&sys.mesh.dom);
    data.f = f.clone();
    fem::load_vector(&data, sys)
}

/// Solve `(K_a + i t M0) u = M0 f` with zero Dirichlet data; `t = 0` is
/// allowed and fails as [`Error::SingularSystem`] at critical contrast.
pub fn resolvent_solve<T: Real>(
    a: &PiecewiseScalarField<T>,
    t: T,
    f: &PiecewisePoly<T>,
    mesh: &Mesh<T>,
) -> Result<ResolventSolution<T>> {
    let sys = scalar_system(a, mesh)?;
    let kr = sys.k_reduced();
    let m0 = sys.m0_reduced();
    let n = kr.nrows();
    let mut c: DMatrix<Complex<T>> = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] = Complex::new(kr[(i, j)], t * m0[(i, j)]);
        }
    }
    let load = reduced_load(f, &sys)?;
    let rhs = DVector::from_fn(n, |i, _| Complex::new(load[i], T::zero()));
    let w = linalg::solve_lu_complex(&c, &rhs)?;
    let re_red = DVector::from_fn(n, |i, _| w[i].re);
    let im_red = DVector::from_fn(n, |i, _| w[i].im);
    let re = BrokenFemFunction { mesh: mesh.clone(), coeffs: sys.dofs.expand(&re_red, None) };
    let im = BrokenFemFunction { mesh: mesh.clone(), coeffs: sys.dofs.expand(&im_red, None) };

    let mut residual = T::zero();
    for (i, &g) in mesh.dom.gamma.iter().enumerate() {
        let (al, ar) = (a.values[i], a.values[i + 1]);
        let jr = al * re.eval(g, 1, true)? - ar * re.eval(g, 1, false)?;
        let ji = al * im.eval(g, 1, true)? - ar * im.eval(g, 1, false)?;
        residual = residual.max((jr * jr + ji * ji).sqrt());
    }
    Ok(ResolventSolution { re, im, flux_jump_residual: residual })
}

/// Discrete `L^2 -> L^2` norm of `(K_a + i t M0)^{-1} M0`.
///
/// `K_a` is real symmetric, so in the `M0` inner product the norm is
/// `1 / min_j sqrt(lambda_j^2 + t^2)` over the generalized eigenvalues
/// `K_a x = lambda M0 x`; for `t != 0` this is at most `1/|t|`.
pub fn resolvent_norm<T: Real>(a: &PiecewiseScalarField<T>, t: T, mesh: &Mesh<T>) -> Result<T> {
    let sys = scalar_system(a, mesh)?;
    let ev = linalg::generalized_sym_eigenvalues(&sys.k_reduced(), &sys.m0_reduced())?;
    let min_shift = ev
        .iter()
        .map(|&l| (l * l + t * t).sqrt())
        .fold(r::<T>(f64::INFINITY), |acc, v| acc.min(v));
    if min_shift <= T::zero() {
        return Err(Error::SingularSystem { rcond: 0.0 });
    }
    Ok(T::one() / min_shift)
}

/// Generalized condition number `|lambda|_max / |lambda|_min` of the
/// sign-changing stiffness against the mass matrix; blows up at critical
/// contrast.
pub fn stiffness_condition<T: Real>(a: &PiecewiseScalarField<T>, mesh: &Mesh<T>) -> Result<T> {
    let sys = scalar_system(a, mesh)?;
    let ev = linalg::generalized_sym_eigenvalues(&sys.k_reduced(), &sys.m0_reduced())?;
    let mut min = r::<T>(f64::INFINITY);
    let mut max = T::zero();
    for &l in &ev {
        min = min.min(l.abs());
        max = max.max(l.abs());
    }
    if min <= T::zero() {
        return Ok(r(f64::INFINITY));
    }
    Ok(max / min)
}

/// Base quantities of the parametric regularity quotient for one
/// manufactured case; the exponents are applied afterwards.
#[derive(Debug, Clone, Copy)]
pub struct ProbeQuantities<T: Real> {
    /// `||u||` in the broken `H^{k+1}` norm.
    pub u_norm: T,
    /// `nnW_{k-1}` norm of `1/a11`.
    pub nn: T,
    /// `||A||` in the broken `W^{k,inf}` norm.
    pub a_norm: T,
    /// `||P u||_{V_k^-} + ||u||_{H^1}`.
    pub data_norm: T,
}

impl<T: Real> ProbeQuantities<T> {
    /// Quotient `rho(p, q) = u_norm / (nn^p a_norm^q data_norm)`.
    pub fn rho(&self, p: u32, q: u32) -> T {
        self.u_norm / (self.nn.powi(p as i32) * self.a_norm.powi(q as i32) * self.data_norm)
    }
}

/// Regularity-shift quantities for a manufactured solution `u` in the
/// constrained space, with data derived symbolically; `k >= 1`.
pub fn param_regularity_probe<T: Real>(
    a: &PiecewiseScalarField<T>,
    u: &PiecewisePoly<T>,
    k: usize,
    mesh: &Mesh<T>,
) -> Result<ProbeQuantities<T>> {
    if k < 1 {
        return Err(Error::Validation("regularity probe needs k >= 1".into()));
    }
    bounds::check_in_v(&a.dom, u)?;
    let field = a.to_coefficients();
    let data = bounds::manufacture(&field, u)?;
    let sys = fem::assemble(&field, mesh)?;
    Ok(ProbeQuantities {
        u_norm: u.broken_hk_norm(k + 1),
        nn: field.amm_inverse_norm(k - 1, 512),
        a_norm: field.matrix_winf_norm(k).value,
        data_norm: norms::vk_minus_norm(&data, k, &sys, false)? + u.broken_hk_norm(1),
    })
}

/// Smallest exponent pair (by `p + q`, then `p`) from the grid
/// `p, q in {0..=max_exp}` keeping `max rho` over the corpus at or below
/// `bound`; `None` when no pair qualifies.
pub fn smallest_bounded_exponents<T: Real>(
    cases: &[ProbeQuantities<T>],
    max_exp: u32,
    bound: T,
) -> Option<(u32, u32)> {
    let mut best: Option<(u32, u32)> = None;
    for p in 0..=max_exp {
        for q in 0..=max_exp {
            let worst = cases
                .iter()
                .map(|c| c.rho(p, q))
                .fold(T::zero(), |acc, v| acc.max(v));
            if worst <= bound {
                let better = match best {
                    None => true,
                    Some((bp, bq)) => (p + q, p) < (bp + bq, bp),
                };
                if better {
                    best = Some((p, q));
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;
    use approx::assert_relative_eq;

    type D = DecomposedInterval<f64>;

    fn field(values: &[f64]) -> PiecewiseScalarField<f64> {
        let gamma: Vec<f64> = (1..values.len())
            .map(|i| i as f64 / values.len() as f64)
            .collect();
        PiecewiseScalarField::new(D::unit(gamma), values.to_vec()).unwrap()
    }

    fn one() -> PiecewisePoly<f64> {
        PiecewisePoly::global(vec![0.0, 0.5, 1.0], Polynomial::constant(1.0))
    }

    #[test]
    fn validation_and_admissibility() {
        assert!(field(&[1.0, -2.0]).admissible());
        assert!(!field(&[1.0, -1.0]).admissible());
        let d = D::new(0.0, 1.0, vec![0.5], BoundaryCondition::Dirichlet, BoundaryCondition::Neumann);
        assert!(PiecewiseScalarField::new(d, vec![1.0, 1.0]).is_err());
        assert!(PiecewiseScalarField::new(D::unit(vec![0.5]), vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn coercive_case_matches_block_real_oracle() {
        let a = field(&[1.0, 1.0]);
        let mesh = fem::build_mesh(&a.dom, 8, 1).unwrap();
        let sol = resolvent_solve(&a, 1.0, &one(), &mesh).unwrap();
        // oracle: real 2n x 2n block system [[K, -M0], [M0, K]]
        let sys = scalar_system(&a, &mesh).unwrap();
        let kr = sys.k_reduced();
        let m0 = sys.m0_reduced();
        let n = kr.nrows();
        let mut block = DMatrix::zeros(2 * n, 2 * n);
        block.view_mut((0, 0), (n, n)).copy_from(&kr);
        block.view_mut((0, n), (n, n)).copy_from(&(-&m0));
        block.view_mut((n, 0), (n, n)).copy_from(&m0);
        block.view_mut((n, n), (n, n)).copy_from(&kr);
        let load = reduced_load(&one(), &sys).unwrap();
        let mut rhs = DVector::zeros(2 * n);
        rhs.rows_mut(0, n).copy_from(&load);
        let w = linalg::solve_lu(&block, &rhs).unwrap();
        for i in 0..n {
            let dof = (0..sys.mesh.n_dofs()).find(|&d| sys.dofs.free_index(d) == Some(i)).unwrap();
            assert_relative_eq!(sol.re.coeffs[dof], w[i], epsilon = 1e-11);
            assert_relative_eq!(sol.im.coeffs[dof], w[n + i], epsilon = 1e-11);
        }
        // the discrete flux jump balances the nodal load, so the pointwise
        // residual decays at first order under refinement
        let coarse = sol.flux_jump_residual;
        let fine_mesh = fem::build_mesh(&a.dom, 32, 1).unwrap();
        let fine = resolvent_solve(&a, 1.0, &one(), &fine_mesh).unwrap().flux_jump_residual;
        assert!(fine < coarse / 2.0, "coarse {coarse}, fine {fine}");
        assert!(fine < 0.1);
    }

    #[test]
    fn sign_changing_solvable_with_l2_bound() {
        let a = field(&[1.0, -2.0]);
        let mesh = fem::build_mesh(&a.dom, 16, 1).unwrap();
        let t = 1.0;
        let sol = resolvent_solve(&a, t, &one(), &mesh).unwrap();
        let l2 = |u: &BrokenFemFunction<f64>| u.l2_norm();
        let u_l2 = (l2(&sol.re).powi(2) + l2(&sol.im).powi(2)).sqrt();
        let f_l2 = 1.0; // ||1||_{L2(0,1)}
        assert!(u_l2 <= f_l2 / t + 1e-10);
    }

    #[test]
    fn critical_contrast_singular_at_t_zero() {
        let a = field(&[1.0, -1.0]);
        let mesh = fem::build_mesh(&a.dom, 8, 1).unwrap();
        assert!(matches!(
            resolvent_solve(&a, 0.0, &one(), &mesh),
            Err(Error::SingularSystem { .. })
        ));
        // admissible contrast at t = 0 stays solvable
        let a = field(&[1.0, -2.0]);
        assert!(resolvent_solve(&a, 0.0, &one(), &mesh).is_ok());
    }

    #[test]
    fn resolvent_norm_bounds() {
        let mesh = fem::build_mesh(&field(&[1.0, 1.0]).dom, 16, 1).unwrap();
        let v = resolvent_norm(&field(&[1.0, 1.0]), 1.0, &mesh).unwrap();
        assert!(v <= 1.0);

        let a = field(&[1.0, -2.0]);
        let mut prev = f64::INFINITY;
        for t in [0.5, 1.0, 2.0, 10.0] {
            let v = resolvent_norm(&a, t, &mesh).unwrap();
            assert!(v <= 1.0 / t + 1e-10, "t={t}: {v}");
            assert!(v <= prev);
            prev = v;
        }
        // attained by random quotients from below
        let sys = scalar_system(&a, &mesh).unwrap();
        let kr = sys.k_reduced();
        let m0 = sys.m0_reduced();
        let n = kr.nrows();
        let t = 1.0;
        let v = resolvent_norm(&a, t, &mesh).unwrap();
        let mut c: DMatrix<Complex<f64>> = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                c[(i, j)] = Complex::new(kr[(i, j)], t * m0[(i, j)]);
            }
        }
        let mut best: f64 = 0.0;
        for s in 0..200usize {
            let f = DVector::from_fn(n, |i, _| {
                Complex::new((((i + 1) * (s + 3) * 2654435761usize) % 997) as f64 / 500.0 - 1.0, 0.0)
            });
            let rhs = DVector::from_fn(n, |i, _| {
                (0..n).map(|j| Complex::new(m0[(i, j)], 0.0) * f[j]).sum()
            });
            let u = linalg::solve_lu_complex(&c, &rhs).unwrap();
            let m0_norm = |v: &DVector<Complex<f64>>| -> f64 {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc += m0[(i, j)] * (v[i].conj() * v[j]).re;
                    }
                }
                acc.max(0.0).sqrt()
            };
            best = best.max(m0_norm(&u) / m0_norm(&f));
        }
        assert!(best <= v + 1e-10);
        assert!(best >= 0.5 * v);
    }

    #[test]
    fn negative_shift_conjugates() {
        let a = field(&[1.0, -2.0]);
        let mesh = fem::build_mesh(&a.dom, 8, 1).unwrap();
        let plus = resolvent_solve(&a, 1.0, &one(), &mesh).unwrap();
        let minus = resolvent_solve(&a, -1.0, &one(), &mesh).unwrap();
        assert!((&plus.re.coeffs - &minus.re.coeffs).abs().max() < 1e-11);
        assert!((&plus.im.coeffs + &minus.im.coeffs).abs().max() < 1e-11);
    }

    #[test]
    fn condition_blowup_at_critical_contrast() {
        let mesh = fem::build_mesh(&D::unit(vec![0.5]), 8, 1).unwrap();
        for eps in [1e-2, 1e-3, 1e-4] {
            let a = field(&[1.0, -1.0 + eps]);
            let cond = stiffness_condition(&a, &mesh).unwrap();
            assert!(cond >= 0.1 / eps, "eps={eps}: cond={cond}");
        }
        let tame = stiffness_condition(&field(&[1.0, -2.0]), &mesh).unwrap();
        assert!(tame < 1e4);
    }

    /// Flux-continuous manufactured solution in V_1 for the scalar pair:
    /// x on the left, matching quadratic vanishing at x = 1 on the right.
    fn flux_kink(a: &PiecewiseScalarField<f64>) -> PiecewisePoly<f64> {
        let s = a.values[0] / a.values[1];
        // right piece r(x) = 0.5 + s (x - 0.5) + c (x - 0.5)^2 with r(1) = 0
        let c = -(0.5 + 0.5 * s) / 0.25;
        let x0 = Polynomial::from_f64_coeffs(&[-0.5, 1.0]);
        let right = Polynomial::constant(0.5)
            .add(&x0.scale(s))
            .add(&x0.mul(&x0).scale(c));
        PiecewisePoly::new(
            vec![0.0, 0.5, 1.0],
            vec![Polynomial::from_f64_coeffs(&[0.0, 1.0]), right],
        )
    }

    #[test]
    fn probe_finite_and_scale_invariant_verdict() {
        let mesh = fem::build_mesh(&D::unit(vec![0.5]), 8, 2).unwrap();
        let a = field(&[1.0, 2.0]);
        let u = flux_kink(&a);
        // manufactured data has no flux jump
        let data = bounds::manufacture(&a.to_coefficients(), &u).unwrap();
        assert_relative_eq!(data.h[0], 0.0, epsilon = 1e-13);
        let q = param_regularity_probe(&a, &u, 1, &mesh).unwrap();
        assert!(q.rho(1, 1).is_finite() && q.rho(1, 1) > 0.0);

        // (c, 2c) sweep: the selected minimal exponent pair is unchanged
        let mut verdicts = Vec::new();
        for c in [1.0, 5.0] {
            let mut cases = Vec::new();
            for scale in [1.0, 2.0, 4.0] {
                let ac = field(&[c * scale, 2.0 * c * scale]);
                let uc = flux_kink(&ac);
                cases.push(param_regularity_probe(&ac, &uc, 1, &mesh).unwrap());
            }
            verdicts.push(smallest_bounded_exponents(&cases, 6, 10.0));
        }
        assert_eq!(verdicts[0], verdicts[1]);
        assert!(verdicts[0].is_some());
    }

    #[test]
    fn probe_rejects_non_member() {
        let mesh = fem::build_mesh(&D::unit(vec![0.5]), 4, 2).unwrap();
        let a = field(&[1.0, 2.0]);
        let u = PiecewisePoly::global(vec![0.0, 0.5, 1.0], Polynomial::from_f64_coeffs(&[0.0, 1.0]));
        assert!(matches!(param_regularity_probe(&a, &u, 1, &mesh), Err(Error::NotInVk(_))));
    }
}
