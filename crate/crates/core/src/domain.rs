//! The decomposed interval: subdomains, interface points, boundary tags.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{to_f64, Real};

/// Boundary-condition tag for an endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

/// Fixed unit normal used to orient jumps at interface points.
///
/// `PlusX` is the convention used throughout: the "+" side of an interface
/// point is the subdomain to its geometric left, so
/// `[[u]](g) = u(g-) - u(g+)`. Flipping the orientation negates every jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    PlusX,
    MinusX,
}

impl Orientation {
    /// Sign applied to `u(g-) - u(g+)` when forming the jump.
    pub fn sign<T: Real>(self) -> T {
        match self {
            Orientation::PlusX => T::one(),
            Orientation::MinusX => -T::one(),
        }
    }
}

/// Where a point sits relative to the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    /// 1-based subdomain index `j`, for `x` in the open `U_j`.
    Interior(usize),
    /// 1-based interface index, for `x = gamma_i`.
    InterfaceHit(usize),
    LeftEndpoint,
    RightEndpoint,
}

/// The domain `U_0 = (a, b)` decomposed by interior interface points.
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedInterval<T: Real> {
    pub a: T,
    pub b: T,
    /// Strictly increasing interior interface points (the set Gamma).
    pub gamma: Vec<T>,
    pub bc_left: BoundaryCondition,
    pub bc_right: BoundaryCondition,
    pub orientation: Orientation,
}

impl<T: Real> DecomposedInterval<T> {
    pub fn new(a: T, b: T, gamma: Vec<T>, bc_left: BoundaryCondition, bc_right: BoundaryCondition) -> Self {
        Self { a, b, gamma, bc_left, bc_right, orientation: Orientation::PlusX }
    }

    /// Unit interval with Dirichlet conditions at both ends.
    pub fn unit(gamma: Vec<T>) -> Self {
        Self::new(T::zero(), T::one(), gamma, BoundaryCondition::Dirichlet, BoundaryCondition::Dirichlet)
    }

    pub fn flipped(&self) -> Self {
        let mut d = self.clone();
        d.orientation = match self.orientation {
            Orientation::PlusX => Orientation::MinusX,
            Orientation::MinusX => Orientation::PlusX,
        };
        d
    }

    /// Number of subdomains `N`.
    pub fn n_subdomains(&self) -> usize {
        self.gamma.len() + 1
    }

    /// Breakpoints `a = x_0 < gamma_1 < ... < b = x_N`.
    pub fn breakpoints(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.gamma.len() + 2);
        v.push(self.a);
        v.extend_from_slice(&self.gamma);
        v.push(self.b);
        v
    }

    /// Open subdomain `U_j` for 1-based `j`.
    pub fn subdomain(&self, j: usize) -> (T, T) {
        assert!(j >= 1 && j <= self.n_subdomains(), "1-based subdomain index");
        let bp = self.breakpoints();
        (bp[j - 1], bp[j])
    }

    /// Locate a point: interior subdomain, interface point, or endpoint.
    pub fn subdomain_index(&self, x: T) -> Result<Location> {
        if x < self.a || x > self.b {
            return Err(Error::OutOfDomain(to_f64(x)));
        }
        if x == self.a {
            return Ok(Location::LeftEndpoint);
        }
        if x == self.b {
            return Ok(Location::RightEndpoint);
        }
        for (i, &g) in self.gamma.iter().enumerate() {
            if x == g {
                return Ok(Location::InterfaceHit(i + 1));
            }
            if x < g {
                return Ok(Location::Interior(i + 1));
            }
        }
        Ok(Location::Interior(self.n_subdomains()))
    }

    /// Check every structural invariant; returns human-readable violations.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.a < self.b) {
            v.push("a < b fails".to_string());
        }
        for &g in &self.gamma {
            if !(self.a < g && g < self.b) {
                v.push(format!("interface point {} not strictly inside (a, b)", to_f64(g)));
            }
        }
        if self.gamma.windows(2).any(|w| !(w[0] < w[1])) {
            v.push("interface points not strictly increasing".to_string());
        }
        v
    }

    pub fn has_dirichlet_boundary(&self) -> bool {
        self.bc_left == BoundaryCondition::Dirichlet || self.bc_right == BoundaryCondition::Dirichlet
    }

    /// Outward normal at an endpoint.
    pub fn outward_normal(&self, left: bool) -> T {
        if left {
            -T::one()
        } else {
            T::one()
        }
    }
}
