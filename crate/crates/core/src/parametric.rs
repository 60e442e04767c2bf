//! Gaussian parameter vectors and the log-normal coefficient model
//! `A(w) = sum_l exp(X_l) A_l`, with hypothesis validation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::coefficients::CoefficientField;
use crate::error::{Error, Result};
use crate::scalar::{r, to_f64, Real};

/// Centered Gaussian vector with SPD covariance, sampled through
/// counter-based substreams: sample `i` uses stream `i` of a ChaCha
/// generator keyed by the seed, so draws are order-independent and
/// reproducible given `(seed, index)`.
#[derive(Debug, Clone)]
pub struct GaussianVector<T: Real> {
    pub sigma: DMatrix<T>,
    chol_l: DMatrix<T>,
    pub seed: u64,
}

impl<T: Real> GaussianVector<T> {
    pub fn new(sigma: DMatrix<T>, seed: u64) -> Result<Self> {
        if sigma.nrows() != sigma.ncols() {
            return Err(Error::Validation("covariance must be square".into()));
        }
        let asym = (&sigma - sigma.transpose()).abs().max();
        if to_f64(asym) > 1e-12 {
            return Err(Error::NotSymmetric);
        }
        let chol = sigma.clone().cholesky().ok_or(Error::SingularGram)?;
        Ok(Self { sigma, chol_l: DMatrix::from(chol.l()), seed })
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    /// Draw `X = L z` for sample `index`.
    pub fn sample(&self, index: u64) -> Vec<T> {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let z = DVector::from_fn(self.dim(), |_, _| {
            r::<T>(rng.sample::<f64, _>(StandardNormal))
        });
        (&self.chol_l * z).iter().copied().collect()
    }
}

/// Which coercivity constant defines `gamma(w)` for a sampled coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoercivityVariant {
    /// Full matrix coercivity `Re A >= gamma I`.
    Full,
    /// Strong ellipticity in the principal part only, `Re a11 >= gamma`.
    StrongElliptic,
}

/// Log-normal model `A(w) = sum_l exp(X_l) A_l`.
#[derive(Debug, Clone)]
pub struct LogNormalModel<T: Real> {
    pub bases: Vec<CoefficientField<T>>,
    pub gauss: GaussianVector<T>,
    /// Coverage floor: each point is covered by some base with
    /// `Re A_l >= gamma_floor` (in the selected variant's sense).
    pub gamma_floor: T,
    pub variant: CoercivityVariant,
}

/// One draw of the model.
#[derive(Debug, Clone)]
pub struct CoefficientSample<T: Real> {
    pub a_omega: CoefficientField<T>,
    pub gamma_omega: T,
    pub x: Vec<T>,
}

/// Hypothesis-validation report; empty `failures` means all checks pass.
#[derive(Debug, Clone, Default)]
pub struct HypothesisReport {
    pub first_row_col_ok: bool,
    pub re_nonneg_ok: bool,
    pub coverage_ok: bool,
    pub failures: Vec<String>,
}

impl HypothesisReport {
    pub fn all_ok(&self) -> bool {
        self.failures.is_empty()
    }
}

impl<T: Real> LogNormalModel<T> {
    pub fn new(
        bases: Vec<CoefficientField<T>>,
        gauss: GaussianVector<T>,
        gamma_floor: T,
        variant: CoercivityVariant,
    ) -> Result<Self> {
        if bases.is_empty() {
            return Err(Error::Validation("model needs at least one base field".into()));
        }
        if bases.len() != gauss.dim() {
            return Err(Error::Validation(
                "number of base fields must match the Gaussian dimension".into(),
            ));
        }
        Ok(Self { bases, gauss, gamma_floor, variant })
    }

    /// Sampled coefficient `A(w)`, its coercivity constant, and the draw `X`.
    /// Deterministic given `(seed, index)`.
    pub fn sample(&self, index: u64, grid: usize) -> CoefficientSample<T> {
        let x = self.gauss.sample(index);
        let weights: Vec<T> = x.iter().map(|&xi| xi.exp()).collect();
        let refs: Vec<&CoefficientField<T>> = self.bases.iter().collect();
        let a_omega = CoefficientField::linear_combination(&refs, &weights);
        let c = a_omega.coercivity_constant(grid);
        let gamma_omega = match self.variant {
            CoercivityVariant::Full => c.gamma_full,
            CoercivityVariant::StrongElliptic => c.gamma_se,
        };
        CoefficientSample { a_omega, gamma_omega, x }
    }

    /// Check the model hypotheses on a sampling grid: (i) vanishing
    /// off-diagonal couplings in every base, (ii) `Re A_l >= 0`, and
    /// (iii) pointwise coverage `max_l Re (A_l)_11(x) >= gamma_floor`.
    pub fn validate_hypotheses(&self, grid: usize) -> HypothesisReport {
        let mut rep = HypothesisReport {
            first_row_col_ok: true,
            re_nonneg_ok: true,
            coverage_ok: true,
            failures: Vec::new(),
        };
        let tol = 1e-12;
        for (l, base) in self.bases.iter().enumerate() {
            for (jdom, b) in base.blocks.iter().enumerate() {
                if !b.a01.is_zero() || !b.a10.is_zero() {
                    rep.first_row_col_ok = false;
                    rep.failures.push(format!(
                        "base {}: off-diagonal coupling nonzero on subdomain {}",
                        l + 1,
                        jdom + 1
                    ));
                }
            }
            let c = base.coercivity_constant(grid);
            if to_f64(c.gamma_full) < -tol {
                rep.re_nonneg_ok = false;
                rep.failures.push(format!(
                    "base {}: Re A_l >= 0 fails (min eigenvalue {})",
                    l + 1,
                    to_f64(c.gamma_full)
                ));
            }
        }
        // pointwise coverage of the principal entry
        let dom = &self.bases[0].dom;
        for jdom in 0..dom.n_subdomains() {
            let (lo, hi) = dom.subdomain(jdom + 1);
            let n = grid.max(2);
            for i in 0..=n {
                let t = i as f64 / n as f64;
                let x = lo + (hi - lo) * r(t);
                let best = self
                    .bases
                    .iter()
                    .map(|b| b.blocks[jdom].a11.eval(x))
                    .fold(T::zero(), |acc, v| acc.max(v));
                if best < self.gamma_floor - r(tol) {
                    rep.coverage_ok = false;
                    rep.failures.push(format!(
                        "coverage fails at x = {} (max Re a11 = {} < floor {})",
                        to_f64(x),
                        to_f64(best),
                        to_f64(self.gamma_floor)
                    ));
                    break;
                }
            }
        }
        rep
    }

    /// Lower bound `gamma_floor * min_l exp(X_l)` valid whenever
    /// coverage holds.
    pub fn gamma_lower_bound(&self, x: &[T]) -> T {
        let min_w = x
            .iter()
            .map(|&xi| xi.exp())
            .fold(r::<T>(f64::INFINITY), |acc, v| acc.min(v));
        self.gamma_floor * min_w
    }
}
