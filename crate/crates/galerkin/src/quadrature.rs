//! Quadrature rules used by all integral assemblies.
//!
//! Dirichlet-sine spaces integrate over (0,1)^d with tensor Gauss-Legendre
//! nodes; torus spaces use the uniform (trapezoid) grid on [0,2pi)^d, which
//! is exact for trigonometric polynomials below the grid resolution.

/// Gauss-Legendre nodes and weights on (0,1), exact for polynomials of
/// degree 2n-1.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one quadrature point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // Newton iteration on P_n over [-1,1], then affine map to (0,1).
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// Value and derivative of the Legendre polynomial P_n at x, by recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Uniform periodic grid on [0, 2pi) with equal weights; exact for
/// trigonometric polynomials with |frequency| < n.
pub fn uniform_periodic(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let nodes = (0..n).map(|j| j as f64 * h).collect();
    let weights = vec![h; n];
    (nodes, weights)
}
