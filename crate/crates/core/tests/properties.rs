//! Property-based invariants over randomized inputs.

use proptest::prelude::*;

use transmission1d::bounds;
use transmission1d::coefficients::CoefficientField;
use transmission1d::domain::DecomposedInterval;
use transmission1d::fem::{self, TransmissionData};
use transmission1d::norms;
use transmission1d::poly::{PiecewisePoly, Polynomial};

type D = DecomposedInterval<f64>;

fn dom() -> D {
    D::unit(vec![0.5])
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    /// The discrete solution map is 1-homogeneous in the coefficient:
    /// `inv(cA) * c = inv(A)`.
    #[test]
    fn inverse_norm_is_inverse_homogeneous(seed in 0u64..1000, c in 0.05f64..20.0) {
        let d = dom();
        let a = bounds::random_coefficient_field(&d, 1, 0.2, seed);
        let mesh = fem::build_mesh(&d, 4, 1).unwrap();
        let base = norms::discrete_inverse_norm(&a, &mesh, 0).unwrap();
        let scaled = norms::discrete_inverse_norm(&a.scale(c), &mesh, 0).unwrap();
        prop_assert!((scaled * c - base).abs() <= 1e-9 * base.max(1.0));
    }

    /// The transmission solve is linear in the data.
    #[test]
    fn solve_is_linear_in_data(seed in 0u64..1000, alpha in -3.0f64..3.0) {
        let d = dom();
        let a = bounds::random_coefficient_field(&d, 1, 0.2, seed);
        let mesh = fem::build_mesh(&d, 4, 1).unwrap();

        let mut d1 = TransmissionData::zero(&d);
        d1.f = PiecewisePoly::global(d.breakpoints(), Polynomial::constant(1.0));
        let mut d2 = TransmissionData::zero(&d);
        d2.h = vec![1.0];
        d2.h_tilde = vec![0.5];

        let mut both = TransmissionData::zero(&d);
        both.f = d1.f.clone();
        both.h = d2.h.clone();
        both.h_tilde = d2.h_tilde.clone();

        let u1 = fem::solve_transmission(&a, &d1, &mesh).unwrap();
        let u2 = fem::solve_transmission(&a, &d2, &mesh).unwrap();
        let u_both = fem::solve_transmission(&a, &both, &mesh).unwrap();

        // additivity
        for i in 0..u1.coeffs.len() {
            prop_assert!((u_both.coeffs[i] - u1.coeffs[i] - u2.coeffs[i]).abs() < 1e-10);
        }

        // homogeneity
        let mut scaled = TransmissionData::zero(&d);
        scaled.f = both.f.scale(alpha);
        scaled.h = vec![alpha * both.h[0]];
        scaled.h_tilde = vec![alpha * both.h_tilde[0]];
        let u_scaled = fem::solve_transmission(&a, &scaled, &mesh).unwrap();
        for i in 0..u1.coeffs.len() {
            prop_assert!((u_scaled.coeffs[i] - alpha * u_both.coeffs[i]).abs() < 1e-9);
        }
    }

    /// The broken `W^{k,inf}` norm is absolutely 1-homogeneous.
    #[test]
    fn winf_norm_scales(c in -5.0f64..5.0, c0 in 0.5f64..2.0, c1 in -1.0f64..1.0, k in 0usize..3) {
        let d = dom();
        let p = PiecewisePoly::global(d.breakpoints(), Polynomial::new(vec![c0, c1]));
        let lhs = p.scale(c).broken_winf_norm(k);
        let rhs = c.abs() * p.broken_winf_norm(k);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
    }

    /// Coercivity constants are invariant under flipping the domain
    /// orientation of the jump convention.
    #[test]
    fn coercivity_ignores_orientation(seed in 0u64..1000) {
        let d = dom();
        let a = bounds::random_coefficient_field(&d, 1, 0.2, seed);
        let mut flipped = a.clone();
        flipped.dom = CoefficientField::new(d.flipped(), a.blocks.clone()).dom;
        let g1 = a.coercivity_constant(128).gamma_full;
        let g2 = flipped.coercivity_constant(128).gamma_full;
        prop_assert!((g1 - g2).abs() <= 1e-12 * g1.max(1.0));
    }
}
