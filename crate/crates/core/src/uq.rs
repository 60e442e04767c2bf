//! Monte Carlo estimators for coefficient-moment integrals and FEM error
//! moments, plus convergence-rate fits.
//!
//! Sampling is counter-based (one substream per sample index), so per-sample
//! work parallelizes while the estimate stays bit-identical: integrand values
//! are collected in index order and reduced sequentially.

use rayon::prelude::*;

use crate::coefficients::CoefficientField;
use crate::error::{Error, Result};
use crate::fem::{self, BrokenEval, Mesh, TransmissionData};
use crate::norms;
use crate::parametric::LogNormalModel;
use crate::scalar::{r, to_f64, Real};

/// Monte Carlo estimate with stabilization diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct McReport<T: Real> {
    pub label: String,
    pub seed: u64,
    /// Accepted samples (excluded singular draws not counted).
    pub n_samples: usize,
    pub n_excluded: usize,
    pub mean: T,
    pub stderr: T,
    /// Running means over doubling batches: `(n, mean, stderr)`.
    pub batches: Vec<(usize, T, T)>,
    /// Set when some doubling step moved the mean by more than 4 standard
    /// errors, hinting at heavy tails.
    pub heavy_tail_warning: bool,
}

fn summarize<T: Real>(vals: &[T]) -> (T, T) {
    let n = vals.len();
    if n == 0 {
        return (T::zero(), T::zero());
    }
    let nn: T = r(n as f64);
    let mean = vals.iter().copied().sum::<T>() / nn;
    if n == 1 {
        return (mean, T::zero());
    }
    let var = vals.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / (nn - T::one());
    (mean, (var / nn).sqrt())
}

fn build_report<T: Real>(
    label: String,
    seed: u64,
    vals: Vec<T>,
    n_requested: usize,
    n_excluded: usize,
) -> Result<McReport<T>> {
    if n_excluded * 1000 > n_requested {
        return Err(Error::Validation(format!(
            "excluded {} of {} samples (over the 0.1% outlier budget)",
            n_excluded, n_requested
        )));
    }
    let (mean, stderr) = summarize(&vals);
    let mut batches = Vec::new();
    let mut heavy_tail_warning = false;
    let mut b = 1usize;
    let mut prev: Option<(T, T)> = None;
    while b < vals.len() {
        b *= 2;
        let upto = b.min(vals.len());
        let (m, se) = summarize(&vals[..upto]);
        batches.push((upto, m, se));
        if let Some((pm, pse)) = prev {
            let scale = se.max(pse);
            if scale > T::zero() && (m - pm).abs() > r::<T>(4.0) * scale {
                heavy_tail_warning = true;
            }
        }
        prev = Some((m, se));
        if upto == vals.len() {
            break;
        }
    }
    Ok(McReport {
        label,
        seed,
        n_samples: vals.len(),
        n_excluded,
        mean,
        stderr,
        batches,
        heavy_tail_warning,
    })
}

/// Monte Carlo average of
/// `gamma(w)^{-s} * ||A(w)||_{W^{k+1,inf}}^r * |||inv|||^p`,
/// with the inverse norm taken at the discrete level `min(k+1, 1)`.
///
/// `k = -1` selects the level-0 (dual-norm) inverse together with the
/// `W^{0,inf}` coefficient norm; `k = 0` needs quadratic elements for the
/// level-1 norm. Singular samples are excluded and counted; more than 0.1%
/// exclusions fails the report.
#[allow(clippy::too_many_arguments)]
pub fn mc_moment<T: Real + Send + Sync>(
    model: &LogNormalModel<T>,
    p: u32,
    r_exp: u32,
    s: u32,
    k: i64,
    n: usize,
    mesh: &Mesh<T>,
    grid: usize,
) -> Result<McReport<T>> {
    if k < -1 {
        return Err(Error::Validation("moment level k must be >= -1".into()));
    }
    let winf_order = (k + 1) as usize;
    let level = ((k + 1).min(1)).max(0) as usize;
    let results: Vec<Result<T>> = (0..n)
        .into_par_iter()
        .map(|idx| -> Result<T> {
            let s_omega = model.sample(idx as u64, grid);
            let mut val = T::one();
            if s > 0 {
                val *= s_omega.gamma_omega.powi(-(s as i32));
            }
            if r_exp > 0 {
                val *= s_omega.a_omega.matrix_winf_norm(winf_order).value.powi(r_exp as i32);
            }
            if p > 0 {
                let inv = norms::discrete_inverse_norm(&s_omega.a_omega, mesh, level)?;
                val *= inv.powi(p as i32);
            }
            Ok(val)
        })
        .collect();
    let mut vals = Vec::with_capacity(n);
    let mut n_excluded = 0usize;
    for res in results {
        match res {
            Ok(v) => vals.push(v),
            Err(Error::SingularSystem { .. }) => n_excluded += 1,
            Err(e) => return Err(e),
        }
    }
    let label = format!("moment(p={p},r={r_exp},s={s},k={k})");
    build_report(label, model.gauss.seed, vals, n, n_excluded)
}

/// Which projection defines the approximation in error moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionVariant {
    /// `H^1`-orthogonal projection (coefficient-independent).
    H1,
    /// Energy projection for the sampled coefficient.
    Energy,
}

/// Reference solution used when measuring FEM errors.
pub enum Reference<'a, T: Real> {
    /// Solve on each mesh refined by this factor (same degree).
    FineSolve { factor: usize },
    /// A known solution in closed form (data is then unused).
    ClosedForm(&'a dyn BrokenEval<T>),
}

/// One mesh row of an error-moment table.
#[derive(Debug, Clone, Copy)]
pub struct ErrorMomentRow<T: Real> {
    pub dim_sn: usize,
    pub moment: T,
    pub stderr: T,
    pub n_excluded: usize,
}

const ERROR_QUAD_PTS: usize = 12;

fn sample_error<T: Real>(
    a: &CoefficientField<T>,
    data: &TransmissionData<T>,
    mesh: &Mesh<T>,
    variant: ProjectionVariant,
    reference: &Reference<'_, T>,
) -> Result<T> {
    let sys = fem::assemble(a, mesh)?;
    let project = |u: &dyn BrokenEval<T>| -> Result<T> {
        let q = match variant {
            ProjectionVariant::H1 => fem::h1_projection(u, &sys, ERROR_QUAD_PTS)?,
            ProjectionVariant::Energy => fem::energy_projection(a, u, &sys, ERROR_QUAD_PTS)?,
        };
        fem::h1_error(u, &q, ERROR_QUAD_PTS)
    };
    match reference {
        Reference::ClosedForm(u) => project(*u),
        Reference::FineSolve { factor } => {
            let fine = fem::build_mesh(&mesh.dom, mesh.n_per_subdomain * (*factor).max(2), mesh.degree)?;
            let u = fem::solve_transmission(a, data, &fine)?;
            project(&u)
        }
    }
}

/// Estimate `E[ ||u(w) - Q u(w)||_{H^1}^p ]` per mesh, `u(w)` the reference
/// solution for the sampled coefficient.
#[allow(clippy::too_many_arguments)]
pub fn mc_fem_error_moment<T: Real + Send + Sync>(
    model: &LogNormalModel<T>,
    data: &TransmissionData<T>,
    p: u32,
    meshes: &[Mesh<T>],
    n: usize,
    variant: ProjectionVariant,
    reference: &Reference<'_, T>,
    grid: usize,
) -> Result<Vec<ErrorMomentRow<T>>> {
    let mut rows = Vec::with_capacity(meshes.len());
    for mesh in meshes {
        let samples: Vec<Result<T>> = (0..n)
            .map(|idx| -> Result<T> {
                let s_omega = model.sample(idx as u64, grid);
                let err = sample_error(&s_omega.a_omega, data, mesh, variant, reference)?;
                Ok(err.powi(p as i32))
            })
            .collect();
        let mut vals = Vec::with_capacity(n);
        let mut n_excluded = 0usize;
        for res in samples {
            match res {
                Ok(v) => vals.push(v),
                Err(Error::SingularSystem { .. }) => n_excluded += 1,
                Err(e) => return Err(e),
            }
        }
        if n_excluded * 1000 > n {
            return Err(Error::Validation(format!(
                "excluded {} of {} samples (over the 0.1% outlier budget)",
                n_excluded, n
            )));
        }
        let (moment, stderr) = summarize(&vals);
        rows.push(ErrorMomentRow { dim_sn: mesh.dim_sn(), moment, stderr, n_excluded });
    }
    Ok(rows)
}

/// Fit of `log(value) = log(C) - mu * log(dim)`.
#[derive(Debug, Clone, Copy)]
pub struct RateFit<T: Real> {
    pub c_rate: T,
    pub mu: T,
    /// Root-mean-square residual of the least-squares fit in log space.
    pub residual: T,
}

/// Least-squares fit in log-log space; values at machine precision cannot be
/// fitted and are reported as [`Error::DegenerateFit`].
pub fn fit_log_log<T: Real>(dims: &[usize], vals: &[T]) -> Result<RateFit<T>> {
    if dims.len() != vals.len() || dims.len() < 2 {
        return Err(Error::Validation("need at least two (dim, value) pairs".into()));
    }
    if vals.iter().any(|&v| to_f64(v) < 1e-13) {
        return Err(Error::DegenerateFit);
    }
    let n: T = r(dims.len() as f64);
    let xs: Vec<T> = dims.iter().map(|&d| r::<T>(d as f64).ln()).collect();
    let ys: Vec<T> = vals.iter().map(|&v| v.ln()).collect();
    let xm = xs.iter().copied().sum::<T>() / n;
    let ym = ys.iter().copied().sum::<T>() / n;
    let sxx = xs.iter().map(|&x| (x - xm) * (x - xm)).sum::<T>();
    if sxx <= T::zero() {
        return Err(Error::DegenerateFit);
    }
    let sxy = xs.iter().zip(&ys).map(|(&x, &y)| (x - xm) * (y - ym)).sum::<T>();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let res2 = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum::<T>()
        / n;
    Ok(RateFit { c_rate: intercept.exp(), mu: -slope, residual: res2.sqrt() })
}

/// Projection errors for one fixed coefficient over a mesh family, as
/// `(dim S_N, error)` rows.
pub fn projection_errors<T: Real>(
    a: &CoefficientField<T>,
    data: &TransmissionData<T>,
    reference: &Reference<'_, T>,
    meshes: &[Mesh<T>],
    variant: ProjectionVariant,
) -> Result<Vec<(usize, T)>> {
    meshes
        .iter()
        .map(|mesh| Ok((mesh.dim_sn(), sample_error(a, data, mesh, variant, reference)?)))
        .collect()
}

/// Convergence study: `H^1` projection error against dim `S_N` over a mesh
/// family, fitted as `C * dim^{-mu}`.
pub fn convergence_study<T: Real>(
    a: &CoefficientField<T>,
    data: &TransmissionData<T>,
    reference: &Reference<'_, T>,
    meshes: &[Mesh<T>],
) -> Result<RateFit<T>> {
    let mut dims = Vec::new();
    let mut errs = Vec::new();
    for mesh in meshes {
        let err = sample_error(a, data, mesh, ProjectionVariant::H1, reference)?;
        dims.push(mesh.dim_sn());
        errs.push(err);
    }
    fit_log_log(&dims, &errs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DecomposedInterval;
    use crate::fem::SmoothFn;
    use crate::parametric::{CoercivityVariant, GaussianVector};
    use crate::poly::{PiecewisePoly, Polynomial};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    type D = DecomposedInterval<f64>;
    type C = CoefficientField<f64>;

    fn identity_model(var: f64, seed: u64) -> LogNormalModel<f64> {
        let d = D::unit(vec![0.5]);
        LogNormalModel::new(
            vec![C::identity(d)],
            GaussianVector::new(DMatrix::from_element(1, 1, var), seed).unwrap(),
            1.0,
            CoercivityVariant::Full,
        )
        .unwrap()
    }

    fn small_mesh() -> Mesh<f64> {
        fem::build_mesh(&D::unit(vec![0.5]), 4, 1).unwrap()
    }

    #[test]
    fn trivial_moment_is_one() {
        let model = identity_model(1.0, 5);
        let rep = mc_moment(&model, 0, 0, 0, -1, 100, &small_mesh(), 32).unwrap();
        assert_eq!(rep.mean, 1.0);
        assert_eq!(rep.stderr, 0.0);
        assert_eq!(rep.n_samples, 100);
    }

    #[test]
    fn lognormal_second_moment_near_e_squared() {
        // integrand e^{-2X}, true mean e^2
        let model = identity_model(1.0, 123);
        let rep = mc_moment(&model, 2, 0, 0, -1, 4000, &small_mesh(), 32).unwrap();
        let truth = std::f64::consts::E.powi(2);
        assert!(
            (rep.mean - truth).abs() < 3.0 * rep.stderr.max(0.2),
            "mean {} vs {} (stderr {})",
            rep.mean,
            truth,
            rep.stderr
        );
        // determinism
        let rep2 = mc_moment(&model, 2, 0, 0, -1, 4000, &small_mesh(), 32).unwrap();
        assert_eq!(rep, rep2);
    }

    #[test]
    fn homogeneity_cancels_exactly() {
        // |||inv||| * ||A|| = e^{-X} * e^{X} = 1 for the identity pattern
        let model = identity_model(1.0, 9);
        let rep = mc_moment(&model, 1, 1, 0, -1, 50, &small_mesh(), 32).unwrap();
        assert_relative_eq!(rep.mean, 1.0, epsilon = 1e-8);
        assert!(rep.stderr < 1e-8);
    }

    #[test]
    fn per_sample_coercive_envelope() {
        let model = identity_model(0.5, 21);
        for idx in 0..10 {
            let s = model.sample(idx, 32);
            let inv = norms::discrete_inverse_norm(&s.a_omega, &small_mesh(), 0).unwrap();
            assert!(inv <= 1.0 / s.gamma_omega + 1e-9);
        }
    }

    fn degenerate_model(seed: u64, dom: &D) -> LogNormalModel<f64> {
        // variance ~0: effectively deterministic identity coefficients
        LogNormalModel::new(
            vec![C::identity(dom.clone())],
            GaussianVector::new(DMatrix::from_element(1, 1, 1e-30), seed).unwrap(),
            1.0,
            CoercivityVariant::Full,
        )
        .unwrap()
    }

    #[test]
    fn fem_error_moment_slopes() {
        let d = D::unit(vec![]);
        let model = degenerate_model(1, &d);
        let data = TransmissionData::zero(&d);
        let u = SmoothFn::sin_pi_x(1);
        let meshes: Vec<_> = [10, 20, 40]
            .iter()
            .map(|&n| fem::build_mesh(&d, n, 1).unwrap())
            .collect();
        assert_eq!(meshes[0].dim_sn(), 9);

        let rows = mc_fem_error_moment(
            &model, &data, 1, &meshes, 3,
            ProjectionVariant::H1, &Reference::ClosedForm(&u), 16,
        )
        .unwrap();
        let fit = fit_log_log(
            &rows.iter().map(|r| r.dim_sn).collect::<Vec<_>>(),
            &rows.iter().map(|r| r.moment).collect::<Vec<_>>(),
        )
        .unwrap();
        assert!((fit.mu - 1.0).abs() < 0.1, "mu = {}", fit.mu);

        let rows = mc_fem_error_moment(
            &model, &data, 2, &meshes, 3,
            ProjectionVariant::Energy, &Reference::ClosedForm(&u), 16,
        )
        .unwrap();
        let fit = fit_log_log(
            &rows.iter().map(|r| r.dim_sn).collect::<Vec<_>>(),
            &rows.iter().map(|r| r.moment).collect::<Vec<_>>(),
        )
        .unwrap();
        assert!((fit.mu - 2.0).abs() < 0.2, "mu = {}", fit.mu);
    }

    #[test]
    fn zero_data_gives_zero_moments() {
        let d = D::unit(vec![0.5]);
        let model = degenerate_model(2, &d);
        let data = TransmissionData::zero(&d);
        let meshes: Vec<_> = [4, 8]
            .iter()
            .map(|&n| fem::build_mesh(&d, n, 1).unwrap())
            .collect();
        let rows = mc_fem_error_moment(
            &model, &data, 1, &meshes, 2,
            ProjectionVariant::H1, &Reference::FineSolve { factor: 4 }, 16,
        )
        .unwrap();
        for row in rows {
            assert!(row.moment < 1e-12);
        }
    }

    #[test]
    fn convergence_study_examples() {
        let d = D::unit(vec![]);
        let a = C::identity(d.clone());
        let data = TransmissionData::zero(&d);
        let meshes: Vec<_> = [8, 16, 32, 64]
            .iter()
            .map(|&n| fem::build_mesh(&d, n, 1).unwrap())
            .collect();
        let u = SmoothFn::sin_pi_x(1);
        let fit = convergence_study(&a, &data, &Reference::ClosedForm(&u), &meshes).unwrap();
        assert!((fit.mu - 1.0).abs() < 0.1, "mu = {}", fit.mu);
        assert!(fit.residual < 0.05);

        // u linear on a Dirichlet/Neumann domain: reproduced exactly by P1,
        // so the fit is degenerate
        let dn = D::new(
            0.0,
            1.0,
            vec![],
            crate::domain::BoundaryCondition::Dirichlet,
            crate::domain::BoundaryCondition::Neumann,
        );
        let an = C::identity(dn.clone());
        let datan = TransmissionData::zero(&dn);
        let meshes_n: Vec<_> = [8, 16, 32]
            .iter()
            .map(|&n| fem::build_mesh(&dn, n, 1).unwrap())
            .collect();
        let lin = PiecewisePoly::global(vec![0.0, 1.0], Polynomial::from_f64_coeffs(&[0.0, 1.0]));
        assert!(matches!(
            convergence_study(&an, &datan, &Reference::ClosedForm(&lin), &meshes_n),
            Err(Error::DegenerateFit)
        ));

        // kinked (but continuous) solution on a conforming decomposition
        // keeps the full rate: x^2 on the left, linear descent to 0 on the
        // right (continuous at 0.5, vanishing at both Dirichlet ends)
        let dk = D::unit(vec![0.5]);
        let ak = C::identity(dk.clone());
        let datak = TransmissionData::zero(&dk);
        let kink = PiecewisePoly::new(
            vec![0.0, 0.5, 1.0],
            vec![
                Polynomial::from_f64_coeffs(&[0.0, 0.0, 1.0]),
                Polynomial::from_f64_coeffs(&[0.5, -0.5]),
            ],
        );
        let meshes_k: Vec<_> = [8, 16, 32, 64]
            .iter()
            .map(|&n| fem::build_mesh(&dk, n, 1).unwrap())
            .collect();
        let fit = convergence_study(&ak, &datak, &Reference::ClosedForm(&kink), &meshes_k).unwrap();
        assert!((fit.mu - 1.0).abs() < 0.1, "mu = {}", fit.mu);
    }

    #[test]
    fn fine_solve_reference_converges() {
        // transmission solve as its own reference: rate stays ~1
        let d = D::unit(vec![0.5]);
        let a = C::diagonal_constants(d.clone(), &[1.0, 1.0], &[1.0, 2.0]);
        let mut data = TransmissionData::zero(&d);
        data.f = PiecewisePoly::global(vec![0.0, 0.5, 1.0], Polynomial::constant(1.0));
        let meshes: Vec<_> = [4, 8, 16]
            .iter()
            .map(|&n| fem::build_mesh(&d, n, 1).unwrap())
            .collect();
        let fit =
            convergence_study(&a, &data, &Reference::FineSolve { factor: 16 }, &meshes).unwrap();
        assert!((fit.mu - 1.0).abs() < 0.15, "mu = {}", fit.mu);
    }
}
