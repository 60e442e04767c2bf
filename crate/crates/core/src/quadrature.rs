//! Gauss-Legendre quadrature.

use crate::error::{Error, Result};
use crate::scalar::{r, Real};

pub const MAX_POINTS: usize = 64;

/// Nodes and weights on the reference interval `[-1, 1]`.
///
/// Computed by Newton iteration on the Legendre polynomial; accurate to
/// machine precision for the sizes used here.
pub fn gauss_legendre<T: Real>(n: usize) -> Result<(Vec<T>, Vec<T>)> {
    if n == 0 || n > MAX_POINTS {
        return Err(Error::QuadratureOrderOverflow(n));
    }
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Chebyshev-based initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Ok((
        nodes.into_iter().map(r).collect(),
        weights.into_iter().map(r).collect(),
    ))
}

/// Legendre polynomial `P_n` and its derivative at `x`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Number of Gauss points that integrate a polynomial of `degree` exactly.
pub fn points_for_degree(degree: usize) -> usize {
    degree / 2 + 1
}

/// Integrate `f` over `[a, b]` with an `n`-point rule.
pub fn integrate<T: Real>(a: T, b: T, n: usize, mut f: impl FnMut(T) -> T) -> Result<T> {
    let (nodes, weights) = gauss_legendre::<T>(n)?;
    let half = (b - a) * r(0.5);
    let mid = (a + b) * r(0.5);
    let mut acc = T::zero();
    for (x, w) in nodes.iter().zip(weights.iter()) {
        acc += *w * f(mid + half * *x);
    }
    Ok(acc * half)
}
