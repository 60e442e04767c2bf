//! Declarative experiment configuration (TOML) and its conversion into the
//! library's domain types. Unknown keys are rejected everywhere.

use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientField, EntryBlock};
use crate::domain::{BoundaryCondition, DecomposedInterval, Orientation};
use crate::error::{Error, Result};
use crate::fem::TransmissionData;
use crate::parametric::{CoercivityVariant, GaussianVector, LogNormalModel};
use crate::poly::{PiecewisePoly, Polynomial};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub gamma: Vec<f64>,
    pub bc_left: BoundaryCondition,
    pub bc_right: BoundaryCondition,
    #[serde(default = "default_orientation")]
    pub orientation: Orientation,
}

fn default_orientation() -> Orientation {
    Orientation::PlusX
}

/// One 2x2 coefficient block; each entry is a polynomial given by its
/// coefficients in ascending order.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    #[serde(default)]
    pub a00: Vec<f64>,
    #[serde(default)]
    pub a01: Vec<f64>,
    #[serde(default)]
    pub a10: Vec<f64>,
    #[serde(default)]
    pub a11: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSection {
    /// One block per subdomain.
    pub blocks: Vec<BlockSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub bases: Vec<CoefficientSection>,
    /// Covariance matrix, row-major.
    pub covariance: Vec<Vec<f64>>,
    pub seed: u64,
    pub gamma_floor: f64,
    pub variant: CoercivityVariant,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Volume source: polynomial coefficients per subdomain (a single list
    /// is broadcast to every subdomain).
    #[serde(default)]
    pub f: Vec<Vec<f64>>,
    pub g_tilde_left: Option<f64>,
    pub g_tilde_right: Option<f64>,
    pub g_left: Option<f64>,
    pub g_right: Option<f64>,
    #[serde(default)]
    pub h_tilde: Vec<f64>,
    #[serde(default)]
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub n_per_subdomain: usize,
    #[serde(default = "default_degree")]
    pub degree: usize,
    /// Number of uniform refinement levels in mesh schedules (n, 2n, ...).
    #[serde(default = "default_refinements")]
    pub refinements: usize,
}

fn default_degree() -> usize {
    1
}
fn default_refinements() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default)]
    pub k: i64,
    #[serde(default)]
    pub p: u32,
    #[serde(default)]
    pub r: u32,
    #[serde(default)]
    pub s: u32,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    /// Shift values for resolvent experiments.
    #[serde(default)]
    pub t_values: Vec<f64>,
    /// Scalar coefficient values (one per subdomain) for sign-changing runs.
    #[serde(default)]
    pub scalar_values: Vec<f64>,
    /// Contrast perturbations for the critical-contrast sweep.
    #[serde(default)]
    pub epsilons: Vec<f64>,
    /// Corpus size for bound sweeps.
    #[serde(default = "default_cases")]
    pub cases: usize,
    #[serde(default)]
    pub seed: u64,
    /// Fine-reference refinement factor for error studies.
    #[serde(default = "default_fine_factor")]
    pub fine_factor: usize,
    /// Use the energy projection instead of the H1 projection.
    #[serde(default)]
    pub energy_projection: bool,
}

fn default_n_samples() -> usize {
    1000
}
fn default_cases() -> usize {
    100
}
fn default_fine_factor() -> usize {
    8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainSection,
    pub coefficients: Option<CoefficientSection>,
    pub model: Option<ModelSection>,
    #[serde(default)]
    pub data: DataSection,
    pub mesh: MeshSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::Validation(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let dom = self.domain()?;
        let issues = dom.validate();
        if !issues.is_empty() {
            return Err(Error::Validation(format!("domain: {}", issues.join("; "))));
        }
        if self.mesh.n_per_subdomain == 0 {
            return Err(Error::Validation("mesh.n_per_subdomain must be >= 1".into()));
        }
        if self.mesh.degree != 1 && self.mesh.degree != 2 {
            return Err(Error::Validation("mesh.degree must be 1 or 2".into()));
        }
        if let Some(c) = &self.coefficients {
            if c.blocks.len() != dom.n_subdomains() {
                return Err(Error::Validation(
                    "coefficients.blocks needs one block per subdomain".into(),
                ));
            }
        }
        if let Some(m) = &self.model {
            if m.gamma_floor <= 0.0 {
                return Err(Error::Validation(
                    "model.gamma_floor must be positive: the pointwise coverage hypothesis \
                     (some base with Re A_l >= gamma_floor at every point) needs a positive floor"
                        .into(),
                ));
            }
            for b in &m.bases {
                if b.blocks.len() != dom.n_subdomains() {
                    return Err(Error::Validation(
                        "model base fields need one block per subdomain".into(),
                    ));
                }
            }
            let q = m.bases.len();
            if m.covariance.len() != q || m.covariance.iter().any(|row| row.len() != q) {
                return Err(Error::Validation(
                    "model.covariance must be square with one row per base".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<DecomposedInterval<f64>> {
        let d = &self.domain;
        let mut dom = DecomposedInterval::new(d.a, d.b, d.gamma.clone(), d.bc_left, d.bc_right);
        dom.orientation = d.orientation;
        Ok(dom)
    }

    pub fn coefficients(&self) -> Result<CoefficientField<f64>> {
        let section = self
            .coefficients
            .as_ref()
            .ok_or_else(|| Error::Validation("this experiment needs a [coefficients] section".into()))?;
        build_field(&self.domain()?, section)
    }

    pub fn model(&self) -> Result<LogNormalModel<f64>> {
        let section = self
            .model
            .as_ref()
            .ok_or_else(|| Error::Validation("this experiment needs a [model] section".into()))?;
        let dom = self.domain()?;
        let bases = section
            .bases
            .iter()
            .map(|b| build_field(&dom, b))
            .collect::<Result<Vec<_>>>()?;
        let q = bases.len();
        let mut sigma = nalgebra::DMatrix::zeros(q, q);
        for i in 0..q {
            for j in 0..q {
                sigma[(i, j)] = section.covariance[i][j];
            }
        }
        let gauss = GaussianVector::new(sigma, section.seed)?;
        LogNormalModel::new(bases, gauss, section.gamma_floor, section.variant)
    }

    pub fn data(&self) -> Result<TransmissionData<f64>> {
        let dom = self.domain()?;
        let mut data = TransmissionData::zero(&dom);
        let d = &self.data;
        if !d.f.is_empty() {
            let pieces: Vec<Polynomial<f64>> = if d.f.len() == 1 {
                vec![Polynomial::new(d.f[0].clone()); dom.n_subdomains()]
            } else if d.f.len() == dom.n_subdomains() {
                d.f.iter().map(|c| Polynomial::new(c.clone())).collect()
            } else {
                return Err(Error::Validation(
                    "data.f needs one polynomial per subdomain (or a single one)".into(),
                ));
            };
            data.f = PiecewisePoly::new(dom.breakpoints(), pieces);
        }
        let override_opt = |target: &mut Option<f64>, src: &Option<f64>| {
            if src.is_some() {
                *target = *src;
            }
        };
        override_opt(&mut data.g_tilde_left, &d.g_tilde_left);
        override_opt(&mut data.g_tilde_right, &d.g_tilde_right);
        override_opt(&mut data.g_left, &d.g_left);
        override_opt(&mut data.g_right, &d.g_right);
        if !d.h_tilde.is_empty() {
            data.h_tilde = d.h_tilde.clone();
        }
        if !d.h.is_empty() {
            data.h = d.h.clone();
        }
        let issues = data.validate(&dom);
        if !issues.is_empty() {
            return Err(Error::Validation(format!("data: {}", issues.join("; "))));
        }
        Ok(data)
    }

    /// Mesh schedule: `n, 2n, 4n, ...` per the refinement count.
    pub fn mesh_schedule(&self) -> Vec<usize> {
        (0..self.mesh.refinements.max(1))
            .map(|i| self.mesh.n_per_subdomain << i)
            .collect()
    }
}

fn build_field(
    dom: &DecomposedInterval<f64>,
    section: &CoefficientSection,
) -> Result<CoefficientField<f64>> {
    if section.blocks.len() != dom.n_subdomains() {
        return Err(Error::Validation("one coefficient block per subdomain required".into()));
    }
    let poly = |c: &Vec<f64>| {
        if c.is_empty() {
            Polynomial::zero()
        } else {
            Polynomial::new(c.clone())
        }
    };
    let blocks = section
        .blocks
        .iter()
        .map(|b| EntryBlock {
            a00: poly(&b.a00),
            a01: poly(&b.a01),
            a10: poly(&b.a10),
            a11: poly(&b.a11),
        })
        .collect();
    Ok(CoefficientField::new(dom.clone(), blocks))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
        [domain]
        a = 0.0
        b = 1.0
        gamma = [0.5]
        bc_left = "dirichlet"
        bc_right = "dirichlet"

        [coefficients]
        blocks = [ { a11 = [1.0] }, { a11 = [2.0] } ]

        [mesh]
        n_per_subdomain = 4
    "#;

    #[test]
    fn parses_and_builds() {
        let cfg = ExperimentConfig::parse(BASE).unwrap();
        let dom = cfg.domain().unwrap();
        assert_eq!(dom.n_subdomains(), 2);
        let a = cfg.coefficients().unwrap();
        assert_eq!(a.blocks[1].a11.coeffs(), &[2.0]);
        assert_eq!(cfg.mesh_schedule(), vec![4]);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = BASE.replace("n_per_subdomain = 4", "n_per_subdomain = 4\nbogus = 1");
        assert!(matches!(ExperimentConfig::parse(&bad), Err(Error::Validation(_))));
    }

    #[test]
    fn gamma_floor_must_be_positive() {
        let cfg = format!(
            r#"{BASE}
            [model]
            bases = [ {{ blocks = [ {{ a11 = [1.0] }}, {{ a11 = [1.0] }} ] }} ]
            covariance = [[1.0]]
            seed = 1
            gamma_floor = 0.0
            variant = "full"
        "#
        );
        let err = ExperimentConfig::parse(&cfg).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("coverage"), "{msg}");
    }

    #[test]
    fn bad_domain_rejected() {
        let bad = BASE.replace("b = 1.0", "b = -1.0");
        assert!(ExperimentConfig::parse(&bad).is_err());
    }
}
