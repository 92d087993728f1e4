//! Radial grids on (0, rmax] and functions sampled on them.
//!
//! A grid carries the dimension m (even), uniform nodes r_i = i·rmax/n, and
//! quadrature weights for ∫₀^{rmax} f(r) dr. The weights are the uniform
//! spacing h except at the two first and two last nodes, where they are
//! corrected so that the moments ∫ r^k dr, k = 0..3, are reproduced exactly;
//! this keeps the rule trapezoidal in character while meeting the moment
//! contract at every n.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::special::sphere_area;
use crate::{Result, WaveopError};

/// Uniform radial grid in dimension m.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    /// Ambient dimension (even; ≥ 6 for production use, 4 permitted for
    /// low-dimensional oracle checks).
    pub m: usize,
    /// Grid extent; nodes lie in (0, rmax].
    pub rmax: f64,
    /// Strictly increasing nodes r_i = i·rmax/n, i = 1..n.
    pub nodes: Vec<f64>,
    /// Quadrature weights for ∫₀^{rmax} · dr (see module docs).
    pub weights: Vec<f64>,
}

impl RadialGrid {
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    /// Uniform spacing rmax/n.
    pub fn h(&self) -> f64 {
        self.rmax / self.n() as f64
    }

    /// The radial measure vector w_i r_i^{m−1} entering every kernel
    /// application (the sphere factor |S^{m−1}| is *not* included here).
    pub fn measure(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.n(),
            self.nodes
                .iter()
                .zip(&self.weights)
                .map(|(&r, &w)| w * r.powi(self.m as i32 - 1)),
        )
    }

    /// Surface measure |S^{m−1}| of the unit sphere for this grid's m.
    pub fn sphere(&self) -> f64 {
        sphere_area(self.m)
    }

    /// True if `other` describes the same discretization.
    pub fn same_as(&self, other: &RadialGrid) -> bool {
        self.m == other.m && self.rmax == other.rmax && self.n() == other.n()
    }
}

/// Weight specification ⟨r⟩^{2γ} for weighted inner products and norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec {
    pub gamma: f64,
}

/// A complex-valued radial function sampled on a grid.
#[derive(Debug, Clone)]
pub struct RadialFunction {
    pub grid: Arc<RadialGrid>,
    pub values: DVector<Complex64>,
}

impl RadialFunction {
    pub fn from_fn(grid: &Arc<RadialGrid>, f: impl Fn(f64) -> Complex64) -> Self {
        RadialFunction {
            grid: Arc::clone(grid),
            values: DVector::from_iterator(grid.n(), grid.nodes.iter().map(|&r| f(r))),
        }
    }

    pub fn from_real_fn(grid: &Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |r| Complex64::new(f(r), 0.0))
    }
}

/// Build the uniform radial grid: nodes r_i = i·rmax/n for i = 1..n, with
/// moment-corrected trapezoidal weights (exact on r^k, k = 0..3).
///
/// Requires even m ≥ 4, rmax > 0, and n ≥ 4 (four adjustable weights are
/// needed for the moment correction).
pub fn make_grid(m: usize, rmax: f64, n: usize) -> Result<Arc<RadialGrid>> {
    if !m.is_multiple_of(2) {
        return Err(WaveopError::validation(format!(
            "make_grid: dimension m must be even, got {m}"
        )));
    }
    if m < 4 {
        return Err(WaveopError::validation(format!(
            "make_grid: dimension m must be ≥ 4, got {m}"
        )));
    }
    if !(rmax > 0.0) || !rmax.is_finite() {
        return Err(WaveopError::validation(format!(
            "make_grid: rmax must be positive and finite, got {rmax}"
        )));
    }
    if n < 4 {
        return Err(WaveopError::validation(format!(
            "make_grid: n must be ≥ 4, got {n}"
        )));
    }
    let h = rmax / n as f64;
    let nodes: Vec<f64> = (1..=n).map(|i| i as f64 * h).collect();
    let mut weights = vec![h; n];

    // Correct the weights at nodes {0, 1, n−2, n−1} so that Σ w_i r_i^k
    // = rmax^{k+1}/(k+1) exactly for k = 0..3. Solved in the scaled
    // variable x = r/rmax for conditioning.
    let adj: Vec<usize> = if n >= 4 { vec![0, 1, n - 2, n - 1] } else { vec![] };
    let xs: Vec<f64> = adj.iter().map(|&i| nodes[i] / rmax).collect();
    let mut a = DMatrix::<f64>::zeros(4, 4);
    let mut rhs = DVector::<f64>::zeros(4);
    for k in 0..4usize {
        for (c, &x) in xs.iter().enumerate() {
            a[(k, c)] = x.powi(k as i32);
        }
        // Moment defect of the uniform rule, in scaled units:
        // (1/(k+1)) − Σ_i h_x x_i^k with h_x = 1/n.
        let hx = 1.0 / n as f64;
        let uniform: f64 = (1..=n).map(|i| (i as f64 * hx).powi(k as i32) * hx).sum();
        rhs[k] = 1.0 / (k as f64 + 1.0) - uniform;
    }
    let delta = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| WaveopError::numerical("make_grid: weight correction system singular"))?;
    for (c, &i) in adj.iter().enumerate() {
        weights[i] += delta[c] * rmax;
    }

    Ok(Arc::new(RadialGrid { m, rmax, nodes, weights }))
}

/// L^p norm of a radial function on R^m:
/// (|S^{m−1}| ∫₀^{rmax} |f(r)|^p r^{m−1} dr)^{1/p}; for p = ∞ the maximum of
/// |f| over the grid nodes. p < 1 is rejected.
pub fn lp_norm(f: &RadialFunction, p: f64) -> Result<f64> {
    if p.is_infinite() && p > 0.0 {
        return Ok(f.values.iter().fold(0.0f64, |m, z| m.max(z.norm())));
    }
    if !(p >= 1.0) {
        return Err(WaveopError::validation(format!(
            "lp_norm: p must be ≥ 1 or ∞, got {p}"
        )));
    }
    let g = &f.grid;
    let sum: f64 = g
        .nodes
        .iter()
        .zip(&g.weights)
        .zip(f.values.iter())
        .map(|((&r, &w), z)| z.norm().powf(p) * r.powi(g.m as i32 - 1) * w)
        .sum();
    Ok((g.sphere() * sum).powf(1.0 / p))
}

/// Weighted L² inner product
/// ⟨f, g⟩_γ = |S^{m−1}| ∫ conj(f) g ⟨r⟩^{2γ} r^{m−1} dr,
/// conjugate-linear in the first argument.
pub fn weighted_l2_inner(f: &RadialFunction, g: &RadialFunction, w: WeightSpec) -> Result<Complex64> {
    if !f.grid.same_as(&g.grid) {
        return Err(WaveopError::validation(
            "weighted_l2_inner: functions live on different grids",
        ));
    }
    let gr = &f.grid;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..gr.n() {
        let r = gr.nodes[i];
        let bracket = (1.0 + r * r).powf(w.gamma); // ⟨r⟩^{2γ}
        acc += f.values[i].conj()
            * g.values[i]
            * (bracket * r.powi(gr.m as i32 - 1) * gr.weights[i]);
    }
    Ok(acc * gr.sphere())
}

/// Weighted L² norm induced by [`weighted_l2_inner`].
pub fn weighted_l2_norm(f: &RadialFunction, w: WeightSpec) -> Result<f64> {
    Ok(weighted_l2_inner(f, f, w)?.re.max(0.0).sqrt())
}

/// Radial Laplacian −Δ on a radial function of R^m:
/// (−Δf)(r) = −f''(r) − (m−1)/r · f'(r), by second-order central
/// differences. The first and last samples are set to zero (no boundary
/// closure) — this is a test oracle for interior behavior, not a solver.
pub fn radial_laplacian(f: &RadialFunction) -> RadialFunction {
    let g = &f.grid;
    let n = g.n();
    let h = g.h();
    let mut out = DVector::from_element(n, Complex64::new(0.0, 0.0));
    for i in 1..n - 1 {
        let second = (f.values[i + 1] - 2.0 * f.values[i] + f.values[i - 1]) / (h * h);
        let first = (f.values[i + 1] - f.values[i - 1]) / (2.0 * h);
        out[i] = -second - first * ((g.m as f64 - 1.0) / g.nodes[i]);
    }
    RadialFunction { grid: Arc::clone(&f.grid), values: out }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn four_node_example() {
        let g = make_grid(6, 40.0, 4).unwrap();
        assert_eq!(g.nodes, vec![10.0, 20.0, 30.0, 40.0]);
        // Moments still exact with all four weights adjustable.
        for k in 0..4 {
            let quad: f64 = g
                .nodes
                .iter()
                .zip(&g.weights)
                .map(|(&r, &w)| r.powi(k) * w)
                .sum();
            let exact = 40.0f64.powi(k + 1) / (k + 1) as f64;
            assert_relative_eq!(quad, exact, max_relative = 1e-10);
        }
    }

    #[test]
    fn moment_exactness_at_production_size() {
        let g = make_grid(6, 40.0, 600).unwrap();
        for k in 0..4 {
            let quad: f64 = g
                .nodes
                .iter()
                .zip(&g.weights)
                .map(|(&r, &w)| r.powi(k) * w)
                .sum();
            let exact = 40.0f64.powi(k + 1) / (k + 1) as f64;
            assert_relative_eq!(quad, exact, max_relative = 1e-10);
        }
        // The linear moment from the module contract: ∫₀^40 r dr = 800.
        let linear: f64 = g.nodes.iter().zip(&g.weights).map(|(&r, &w)| r * w).sum();
        assert_relative_eq!(linear, 800.0, max_relative = 1e-10);
        // Weights stay positive and near h away from the ends.
        assert!(g.weights.iter().all(|&w| w > 0.0));
        let h = g.h();
        assert!(g.weights[300..310].iter().all(|&w| (w - h).abs() < 1e-14));
    }

    #[test]
    fn validation_errors() {
        assert!(make_grid(5, 40.0, 600).is_err());
        assert!(make_grid(2, 40.0, 600).is_err());
        assert!(make_grid(6, 0.0, 600).is_err());
        assert!(make_grid(6, -1.0, 600).is_err());
        assert!(make_grid(6, 40.0, 3).is_err());
        assert!(make_grid(4, 10.0, 32).is_ok()); // oracle dimension allowed
    }

    #[test]
    fn lp_norm_indicator() {
        // ‖1_{r≤1}‖_{L²(R⁶)} = sqrt(|S⁵| ∫₀¹ r⁵ dr) = sqrt(π³/6) ≈ 2.2732.
        // The jump is resolved to one cell, an O(h) effect amplified by the
        // r⁵ measure at r = 1, so a fine grid is used for the closed-form
        // comparison.
        let g = make_grid(6, 40.0, 4800).unwrap();
        let f = RadialFunction::from_real_fn(&g, |r| if r <= 1.0 { 1.0 } else { 0.0 });
        let norm = lp_norm(&f, 2.0).unwrap();
        let exact = (PI.powi(3) / 6.0).sqrt();
        assert_relative_eq!(norm, exact, max_relative = 2e-2);
        assert_relative_eq!(norm, 2.2732, max_relative = 2e-2);

        // p = ∞ is the node max.
        let h = RadialFunction::from_real_fn(&g, |r| (-r).exp());
        assert_relative_eq!(
            lp_norm(&h, f64::INFINITY).unwrap(),
            (-g.nodes[0]).exp(),
            max_relative = 1e-15
        );
        // p < 1 rejected.
        assert!(lp_norm(&h, 0.5).is_err());
    }

    #[test]
    fn indicator_inner_product() {
        // ⟨1_{r≤1}, 1_{r≤1}⟩_{γ=0} = |S⁵|/6 = π³/6, same O(h) jump
        // resolution as the norm test above.
        let g = make_grid(6, 40.0, 4800).unwrap();
        let f = RadialFunction::from_real_fn(&g, |r| if r <= 1.0 { 1.0 } else { 0.0 });
        let v = weighted_l2_inner(&f, &f, WeightSpec { gamma: 0.0 }).unwrap();
        assert_relative_eq!(v.re, PI.powi(3) / 6.0, max_relative = 4e-2);
        assert!(v.im.abs() < 1e-12);
    }

    #[test]
    fn inner_product_conjugate_symmetry() {
        let g = make_grid(6, 20.0, 128).unwrap();
        let f = RadialFunction::from_fn(&g, |r| Complex64::new((0.3 * r).sin(), (0.7 * r).cos()));
        let h = RadialFunction::from_fn(&g, |r| Complex64::new((-0.2 * r).exp(), 0.1 * r));
        let w = WeightSpec { gamma: 1.5 };
        let a = weighted_l2_inner(&f, &h, w).unwrap();
        let b = weighted_l2_inner(&h, &f, w).unwrap();
        assert_relative_eq!(a.re, b.conj().re, max_relative = 1e-12);
        assert_relative_eq!(a.im, b.conj().im, max_relative = 1e-12, epsilon = 1e-14);
    }

    #[test]
    fn smooth_function_quadrature_accuracy() {
        // ∫₀^∞ e^{−r²} r⁵ dr = 1 (with rmax = 40 the tail is negligible).
        // The rule is trapezoidal-order: exact low moments, h²-level accuracy
        // on general smooth integrands, recovered by refinement.
        let err_at = |n: usize| -> f64 {
            let g = make_grid(6, 40.0, n).unwrap();
            let quad: f64 = g
                .nodes
                .iter()
                .zip(&g.weights)
                .map(|(&r, &w)| (-r * r).exp() * r.powi(5) * w)
                .sum();
            (quad - 1.0).abs()
        };
        let e300 = err_at(300);
        let e600 = err_at(600);
        assert!(e300 < 1e-4, "n=300 error {e300:.3e}");
        // h² convergence: doubling n shrinks the error by ≈ 4.
        assert!(e600 < 0.35 * e300, "refinement ratio {:.3}", e600 / e300);
    }
}
