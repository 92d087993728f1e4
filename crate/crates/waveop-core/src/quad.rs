//! Quadrature rules: Gauss–Legendre and Gauss–Laguerre nodes/weights via the
//! Golub–Welsch eigenvalue method, plus panel decompositions for integrands
//! with endpoint concentration (geometric panels) and long oscillatory ranges
//! (fixed-width linear panels).

use crate::linalg::tridiag_eigh;
use crate::{Result, WaveopError};

/// A quadrature rule: paired nodes and weights, applied by direct summation
/// in index order (deterministic).
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    /// Integrate a scalar function with this rule.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(0.0, |acc, (&x, &w)| acc + w * f(x))
    }

    /// Integrate a complex-valued function with this rule.
    pub fn integrate_complex(
        &self,
        mut f: impl FnMut(f64) -> num_complex::Complex64,
    ) -> num_complex::Complex64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(num_complex::Complex64::new(0.0, 0.0), |acc, (&x, &w)| acc + f(x) * w)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss–Legendre rule with n nodes on [-1, 1]. Exact for polynomials of
/// degree ≤ 2n−1.
pub fn gauss_legendre(n: usize) -> Result<Quadrature> {
    if n == 0 {
        return Err(WaveopError::validation("gauss_legendre: n must be positive"));
    }
    if n == 1 {
        return Ok(Quadrature { nodes: vec![0.0], weights: vec![2.0] });
    }
    let diag = vec![0.0f64; n];
    let off: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    let (vals, vecs) = tridiag_eigh(&diag, &off)?;
    let weights: Vec<f64> = (0..n).map(|i| 2.0 * vecs[(0, i)] * vecs[(0, i)]).collect();
    Ok(Quadrature { nodes: vals, weights })
}

/// Gauss–Laguerre rule with n nodes for ∫₀^∞ e^{-t} f(t) dt (weight already
/// folded into the rule: apply to f directly).
pub fn gauss_laguerre(n: usize) -> Result<Quadrature> {
    if n == 0 {
        return Err(WaveopError::validation("gauss_laguerre: n must be positive"));
    }
    let diag: Vec<f64> = (0..n).map(|k| 2.0 * k as f64 + 1.0).collect();
    let off: Vec<f64> = (1..n).map(|k| k as f64).collect();
    let (vals, vecs) = tridiag_eigh(&diag, &off)?;
    let weights: Vec<f64> = (0..n).map(|i| vecs[(0, i)] * vecs[(0, i)]).collect();
    Ok(Quadrature { nodes: vals, weights })
}

/// Generalized Gauss–Laguerre rule with n nodes for
/// ∫₀^∞ e^{-t} t^α f(t) dt (the full weight e^{-t} t^α is folded into the
/// rule: apply to f directly).
///
/// Absorbing the algebraic factor t^α into the weight is what makes the
/// resolvent and pairing t-integrals converge at Gauss rates: their
/// integrands are e^{-t} t^{α} × (analytic), with α a half-integer, and a
/// plain Laguerre rule stalls near 1e-6 relative error on the t^{1/2}-type
/// factor. α must be a non-negative multiple of 1/2 (the only cases arising
/// here, keeping the normalization Γ(α+1) exact).
pub fn gauss_laguerre_general(n: usize, alpha: f64) -> Result<Quadrature> {
    if n == 0 {
        return Err(WaveopError::validation("gauss_laguerre_general: n must be positive"));
    }
    let twice = 2.0 * alpha;
    if !(alpha >= 0.0) || (twice - twice.round()).abs() > 1e-12 {
        return Err(WaveopError::validation(format!(
            "gauss_laguerre_general: alpha must be a non-negative multiple of 1/2, got {alpha}"
        )));
    }
    let diag: Vec<f64> = (0..n).map(|k| 2.0 * k as f64 + alpha + 1.0).collect();
    let off: Vec<f64> = (1..n).map(|k| (k as f64 * (k as f64 + alpha)).sqrt()).collect();
    let (vals, vecs) = tridiag_eigh(&diag, &off)?;
    let mu0 = crate::special::gamma_half(twice.round() as u32 + 2);
    let weights: Vec<f64> = (0..n).map(|i| mu0 * vecs[(0, i)] * vecs[(0, i)]).collect();
    Ok(Quadrature { nodes: vals, weights })
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn legendre_on(a: f64, b: f64, n: usize) -> Result<Quadrature> {
    let base = gauss_legendre(n)?;
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    Ok(Quadrature {
        nodes: base.nodes.iter().map(|&x| mid + half * x).collect(),
        weights: base.weights.iter().map(|&w| w * half).collect(),
    })
}

/// Composite Gauss–Legendre over explicit panels, n nodes per panel.
pub fn composite_legendre(panels: &[(f64, f64)], n_per: usize) -> Result<Quadrature> {
    let base = gauss_legendre(n_per)?;
    let mut nodes = Vec::with_capacity(panels.len() * n_per);
    let mut weights = Vec::with_capacity(panels.len() * n_per);
    for &(a, b) in panels {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for (&x, &w) in base.nodes.iter().zip(&base.weights) {
            nodes.push(mid + half * x);
            weights.push(w * half);
        }
    }
    Ok(Quadrature { nodes, weights })
}

/// k geometric (logarithmically spaced) panels covering [a, b], a > 0.
pub fn log_panels(a: f64, b: f64, k: usize) -> Result<Vec<(f64, f64)>> {
    if !(a > 0.0 && b > a) || k == 0 {
        return Err(WaveopError::validation("log_panels: need 0 < a < b and k > 0"));
    }
    let ratio = (b / a).powf(1.0 / k as f64);
    let mut edges = Vec::with_capacity(k + 1);
    let mut x = a;
    edges.push(x);
    for _ in 0..k {
        x *= ratio;
        edges.push(x);
    }
    *edges.last_mut().unwrap() = b;
    Ok(edges.windows(2).map(|w| (w[0], w[1])).collect())
}

/// Linear panels of width ≤ `width` covering [a, b].
pub fn linear_panels(a: f64, b: f64, width: f64) -> Result<Vec<(f64, f64)>> {
    if !(b > a) || !(width > 0.0) {
        return Err(WaveopError::validation("linear_panels: need a < b and width > 0"));
    }
    let count = ((b - a) / width).ceil().max(1.0) as usize;
    let step = (b - a) / count as f64;
    Ok((0..count)
        .map(|i| (a + i as f64 * step, a + (i + 1) as f64 * step))
        .collect())
}

/// The λ-quadrature for spectral integrals ∫₀^Λ … λ dλ appearing in wave
/// operator assembly: geometric panels resolve the λ → 0 end (where the
/// resolvent develops its threshold structure), fixed-width linear panels
/// cover the oscillatory remainder up to Λ.
///
/// * `lambda_min` — lower truncation of the geometric section (> 0),
/// * `split` — boundary between geometric and linear sections,
/// * `lambda_max` — upper integration limit Λ,
/// * `log_panel_count` — number of geometric panels,
/// * `nodes_per_panel` — Gauss–Legendre order on every panel.
///
/// The linear section uses 0.5-wide panels, enough for the ≈ 0.1-period
/// oscillation e^{iλ(r±s)} at the default grid extents.
pub fn lambda_panels(
    lambda_min: f64,
    split: f64,
    lambda_max: f64,
    log_panel_count: usize,
    nodes_per_panel: usize,
) -> Result<Quadrature> {
    if !(lambda_min > 0.0 && split > lambda_min && lambda_max > split) {
        return Err(WaveopError::validation(
            "lambda_panels: need 0 < lambda_min < split < lambda_max",
        ));
    }
    let mut panels = log_panels(lambda_min, split, log_panel_count)?;
    panels.extend(linear_panels(split, lambda_max, 0.5)?);
    composite_legendre(&panels, nodes_per_panel)
}
