//! Inversion of the perturbed operator M(λ) = 1 + G₀(λ)V near the
//! threshold: assembly and conditioning of M(λ), Feshbach (Schur
//! complement) block inversion, least-squares extraction of the singular
//! λ⁻² structure of M(λ)⁻¹ in the exceptional case, and finite-difference
//! probes of weighted-norm regularity of operator families in λ.
//!
//! Matrix convention: operators act on coefficient vectors of grid samples,
//! with the quadrature measure folded into the columns — the (i, j) entry
//! of G₀(λ)V carries κ(r_i, r_j) · V(r_j) · w_j r_j^{m−1}, so composition is
//! plain matrix multiplication and V = 0 gives the identity exactly.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::grid::RadialGrid;
use crate::resolvent::g0_reduced;
use crate::spectral::PotentialSpec;
use crate::{Result, WaveopError};

/// Assembled M(λ) = 1 + G₀(λ)V with conditioning estimates.
#[derive(Debug, Clone)]
pub struct MLambdaMatrix {
    pub lambda: f64,
    pub grid: Arc<RadialGrid>,
    pub matrix: DMatrix<Complex64>,
    /// Power-iteration estimate of the largest singular value.
    pub sigma_max: f64,
    /// Inverse-power estimate of the smallest singular value.
    pub sigma_min: f64,
}

impl MLambdaMatrix {
    /// Estimated 2-norm condition number.
    pub fn condition(&self) -> f64 {
        if self.sigma_min == 0.0 {
            f64::INFINITY
        } else {
            self.sigma_max / self.sigma_min
        }
    }
}

/// Deterministic inverse-power estimate of the smallest singular value:
/// iterates x ← M⁻¹ M⁻ᴴ x from a fixed start, so ‖x‖ grows like σ_min⁻².
fn smallest_singular_estimate(m: &DMatrix<Complex64>, iters: usize) -> f64 {
    let n = m.nrows();
    let lu = m.clone().lu();
    let lu_h = m.adjoint().lu();
    let mut x = DVector::from_element(n, Complex64::new(1.0 / (n as f64).sqrt(), 0.0));
    let mut growth = 0.0_f64;
    for _ in 0..iters {
        let y = match lu_h.solve(&x) {
            Some(y) => y,
            None => return 0.0,
        };
        let z = match lu.solve(&y) {
            Some(z) => z,
            None => return 0.0,
        };
        growth = z.norm();
        if growth == 0.0 || !growth.is_finite() {
            return 0.0;
        }
        x = z / Complex64::new(growth, 0.0);
    }
    1.0 / growth.sqrt()
}

/// Assembles M(λ) = 1 + G₀(λ)V on the grid.
pub fn m_lambda(
    lambda: f64,
    grid: &Arc<RadialGrid>,
    pot: &PotentialSpec,
) -> Result<MLambdaMatrix> {
    pot.validate_on(grid)?;
    let n = grid.n();
    let meas = grid.measure();
    let v = pot.values_on(grid);
    let mut matrix = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    if v.iter().any(|&x| x != 0.0) {
        let g0 = g0_reduced(lambda, grid)?;
        for j in 0..n {
            let scale = v[j] * meas[j];
            if scale != 0.0 {
                for i in 0..n {
                    matrix[(i, j)] = g0.matrix[(i, j)] * scale;
                }
            }
        }
    }
    for i in 0..n {
        matrix[(i, i)] += 1.0;
    }
    let sigma_max = crate::linalg::power_opnorm(&matrix, 40);
    let sigma_min = smallest_singular_estimate(&matrix, 40);
    Ok(MLambdaMatrix {
        lambda,
        grid: Arc::clone(grid),
        matrix,
        sigma_max,
        sigma_min,
    })
}

/// Smallest-singular-value gate below which [`invert_m`] refuses: at this
/// scale the matrix carries a discrete near-kernel (threshold singularity)
/// and the inverse, though computable, no longer approximates the continuum
/// object. Matches the singular-value gate of the threshold classification.
pub const NEAR_SINGULAR_GATE: f64 = 0.04;

/// Dense inverse of M(λ) with conditioning guard: refuses when the
/// condition estimate exceeds 1e12 or a near-kernel is present
/// (σ_min ≤ [`NEAR_SINGULAR_GATE`], the expected λ→0 behaviour in the
/// exceptional case). The returned inverse satisfies
/// ‖M·M⁻¹ − I‖_max ≤ 1e−8.
pub fn invert_m(m: &MLambdaMatrix) -> Result<DMatrix<Complex64>> {
    if m.sigma_min <= NEAR_SINGULAR_GATE {
        return Err(WaveopError::numerical(format!(
            "M(λ={:.3e}) is near-singular: smallest singular value ≈ {:.3e} (threshold singularity)",
            m.lambda, m.sigma_min
        )));
    }
    if m.condition() > 1e12 {
        return Err(WaveopError::numerical(format!(
            "M(λ={:.3e}) condition estimate {:.3e} exceeds 1e12",
            m.lambda,
            m.condition()
        )));
    }
    let inv = crate::linalg::lu_inverse(&m.matrix)?;
    let n = m.matrix.nrows();
    let prod = &m.matrix * &inv;
    let mut defect = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            defect = defect.max((prod[(i, j)] - target).norm());
        }
    }
    if defect > 1e-8 {
        return Err(WaveopError::numerical(format!(
            "inverse residual ‖M·M⁻¹−I‖_max = {defect:.3e} exceeds 1e−8"
        )));
    }
    Ok(inv)
}

/// Block decomposition of a matrix with respect to a two-part splitting of
/// the index set, with the Schur complement C = L₁₁ − L₁₀ L₀₀⁻¹ L₀₁.
#[derive(Debug, Clone)]
pub struct FeshbachDecomposition {
    pub l00: DMatrix<Complex64>,
    pub l01: DMatrix<Complex64>,
    pub l10: DMatrix<Complex64>,
    pub l11: DMatrix<Complex64>,
}

impl FeshbachDecomposition {
    pub fn new(
        l00: DMatrix<Complex64>,
        l01: DMatrix<Complex64>,
        l10: DMatrix<Complex64>,
        l11: DMatrix<Complex64>,
    ) -> Result<Self> {
        let (p, q) = (l00.nrows(), l11.nrows());
        if l00.ncols() != p
            || l11.ncols() != q
            || l01.nrows() != p
            || l01.ncols() != q
            || l10.nrows() != q
            || l10.ncols() != p
        {
            return Err(WaveopError::validation(
                "Feshbach blocks have inconsistent dimensions",
            ));
        }
        Ok(FeshbachDecomposition { l00, l01, l10, l11 })
    }

    /// Extracts the blocks of `a` under the index split (idx0, idx1); the
    /// two sets must partition 0..n.
    pub fn from_index_split(
        a: &DMatrix<Complex64>,
        idx0: &[usize],
        idx1: &[usize],
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(WaveopError::validation("matrix must be square"));
        }
        let mut seen = vec![false; n];
        for &i in idx0.iter().chain(idx1.iter()) {
            if i >= n || seen[i] {
                return Err(WaveopError::validation(
                    "index split must partition the index set",
                ));
            }
            seen[i] = true;
        }
        if !seen.iter().all(|&s| s) {
            return Err(WaveopError::validation(
                "index split must cover every index",
            ));
        }
        let take = |rows: &[usize], cols: &[usize]| {
            DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
        };
        FeshbachDecomposition::new(
            take(idx0, idx0),
            take(idx0, idx1),
            take(idx1, idx0),
            take(idx1, idx1),
        )
    }

    /// Schur complement C = L₁₁ − L₁₀ L₀₀⁻¹ L₀₁.
    pub fn schur(&self) -> Result<DMatrix<Complex64>> {
        let l00_inv = crate::linalg::lu_inverse(&self.l00)
            .map_err(|_| WaveopError::numerical("Feshbach: L00 block is singular"))?;
        Ok(&self.l11 - &self.l10 * l00_inv * &self.l01)
    }

    /// Reassembles the block matrix in the (0-block, 1-block) ordering.
    pub fn assemble(&self) -> DMatrix<Complex64> {
        let (p, q) = (self.l00.nrows(), self.l11.nrows());
        let mut out = DMatrix::from_element(p + q, p + q, Complex64::new(0.0, 0.0));
        out.view_mut((0, 0), (p, p)).copy_from(&self.l00);
        out.view_mut((0, p), (p, q)).copy_from(&self.l01);
        out.view_mut((p, 0), (q, p)).copy_from(&self.l10);
        out.view_mut((p, p), (q, q)).copy_from(&self.l11);
        out
    }
}

/// Inverse of the block matrix through the Schur complement:
/// L⁻¹ = [[L₀₀⁻¹ + L₀₀⁻¹L₀₁C⁻¹L₁₀L₀₀⁻¹, −L₀₀⁻¹L₀₁C⁻¹], [−C⁻¹L₁₀L₀₀⁻¹, C⁻¹]],
/// which exists exactly when L₀₀ and C are both invertible.
pub fn feshbach_invert(f: &FeshbachDecomposition) -> Result<DMatrix<Complex64>> {
    let l00_inv = crate::linalg::lu_inverse(&f.l00)
        .map_err(|_| WaveopError::numerical("Feshbach: L00 block is singular"))?;
    let c = &f.l11 - &f.l10 * &l00_inv * &f.l01;
    let c_inv = crate::linalg::lu_inverse(&c)
        .map_err(|_| WaveopError::numerical("Feshbach: Schur complement is singular"))?;
    let b01 = -(&l00_inv * &f.l01 * &c_inv);
    let b10 = -(&c_inv * &f.l10 * &l00_inv);
    let b00 = &l00_inv + &l00_inv * &f.l01 * &c_inv * &f.l10 * &l00_inv;
    let (p, q) = (f.l00.nrows(), f.l11.nrows());
    let mut out = DMatrix::from_element(p + q, p + q, Complex64::new(0.0, 0.0));
    out.view_mut((0, 0), (p, p)).copy_from(&b00);
    out.view_mut((0, p), (p, q)).copy_from(&b01);
    out.view_mut((p, 0), (q, p)).copy_from(&b10);
    out.view_mut((p, p), (q, q)).copy_from(&c_inv);
    Ok(out)
}

/// Least-squares extraction of the singular structure of M(λ)⁻¹ near λ = 0.
#[derive(Debug, Clone)]
pub struct SingularFit {
    pub lambdas: Vec<f64>,
    /// Fitted λ⁻² coefficient from the log-augmented basis (the candidate
    /// for P₀V in the exceptional case).
    pub fitted_p0v: DMatrix<Complex64>,
    /// All coefficients of the log-augmented fit, ordered as
    /// {λ⁻², log λ, λ log λ, λ² log λ, λ² log² λ}.
    pub log_coefficients: Vec<DMatrix<Complex64>>,
    /// Frobenius residual of the single-term fit {λ⁻²}.
    pub residual_plain: f64,
    /// Frobenius residual of the log-augmented fit; never exceeds the plain
    /// residual (nested bases).
    pub residual_log: f64,
}

/// Entrywise least squares against a set of scalar basis functions: returns
/// (coefficient matrices, Frobenius residual over all samples).
fn lsq_matrix_fit(
    lambdas: &[f64],
    data: &[DMatrix<Complex64>],
    basis: &[fn(f64) -> f64],
) -> Result<(Vec<DMatrix<Complex64>>, f64)> {
    let l = lambdas.len();
    let b = basis.len();
    let mut a = DMatrix::zeros(l, b);
    for (k, &lam) in lambdas.iter().enumerate() {
        for (j, f) in basis.iter().enumerate() {
            a[(k, j)] = f(lam);
        }
    }
    // Pseudo-inverse through the normal equations (b ≤ 5, well separated).
    let ata = a.transpose() * &a;
    let ata_inv = ata.try_inverse().ok_or_else(|| {
        WaveopError::numerical("singular fit: normal equations are singular")
    })?;
    let pinv = ata_inv * a.transpose(); // b × l
    let (rows, cols) = (data[0].nrows(), data[0].ncols());
    let mut coeffs =
        vec![DMatrix::from_element(rows, cols, Complex64::new(0.0, 0.0)); b];
    for (j, coeff) in coeffs.iter_mut().enumerate() {
        for k in 0..l {
            let wkt = Complex64::new(pinv[(j, k)], 0.0);
            *coeff += &data[k] * wkt;
        }
    }
    let mut residual2 = 0.0;
    for k in 0..l {
        let mut model = DMatrix::from_element(rows, cols, Complex64::new(0.0, 0.0));
        for (j, coeff) in coeffs.iter().enumerate() {
            model += coeff * Complex64::new(a[(k, j)], 0.0);
        }
        residual2 += (&data[k] - model).norm_squared();
    }
    Ok((coeffs, residual2.sqrt()))
}

/// Fits M(λ)⁻¹ − I entrywise against the singular basis near λ = 0.
///
/// The plain fit uses {λ⁻²} alone; the log-augmented fit uses
/// {λ⁻², log λ, λ log λ, λ² log λ, λ² log² λ}. The λ⁻² coefficient of the
/// log-augmented fit is reported as the candidate P₀V. The inverses are
/// computed directly (bypassing the near-singular gate of [`invert_m`]):
/// the λ⁻²-blowup of the inverse is the signal being measured, and the
/// solves stay far from the 1e12 condition guard on these grids.
pub fn singular_fit(
    grid: &Arc<RadialGrid>,
    pot: &PotentialSpec,
    lambdas: &[f64],
) -> Result<SingularFit> {
    if lambdas.len() < 6 {
        return Err(WaveopError::validation(
            "singular fit needs at least 6 λ samples",
        ));
    }
    if !lambdas.iter().all(|&l| l > 0.0 && l.is_finite()) {
        return Err(WaveopError::validation(
            "singular fit requires positive finite λ samples",
        ));
    }
    let n = grid.n();
    let mut data = Vec::with_capacity(lambdas.len());
    for &lam in lambdas.iter() {
        let m = m_lambda(lam, grid, pot)?;
        let mut inv = crate::linalg::lu_inverse(&m.matrix)?;
        for i in 0..n {
            inv[(i, i)] -= 1.0;
        }
        data.push(inv);
    }
    let plain: [fn(f64) -> f64; 1] = [|l| l.powi(-2)];
    let logb: [fn(f64) -> f64; 5] = [
        |l| l.powi(-2),
        |l| l.ln(),
        |l| l * l.ln(),
        |l| l * l * l.ln(),
        |l| l * l * l.ln() * l.ln(),
    ];
    let (_, residual_plain) = lsq_matrix_fit(lambdas, &data, &plain)?;
    let (log_coefficients, residual_log) = lsq_matrix_fit(lambdas, &data, &logb)?;
    Ok(SingularFit {
        lambdas: lambdas.to_vec(),
        fitted_p0v: log_coefficients[0].clone(),
        log_coefficients,
        residual_plain,
        residual_log,
    })
}

/// Default ladder of fit samples: `count` log-spaced λ in [1e−3, 1e−1]
/// (below 1e−3 the discrete zero-eigenvalue floor contaminates the λ⁻²
/// coefficient).
pub fn fit_lambda_ladder(count: usize) -> Vec<f64> {
    let (lo, hi) = (1e-3_f64, 1e-1_f64);
    (0..count)
        .map(|k| {
            let t = k as f64 / (count - 1) as f64;
            lo * (hi / lo).powf(t)
        })
        .collect()
}

/// Weighted-norm regularity table of an operator family λ ↦ K(λ): sup norms
/// of finite-difference λ-derivatives of ⟨r⟩^{ρ−γ} K(λ) ⟨r⟩^{ρ−γ}.
#[derive(Debug, Clone)]
pub struct KPropertyRow {
    pub order: usize,
    /// λ values where the derivative was evaluated (interior nodes of the
    /// lattice for orders ≥ 1).
    pub lambdas: Vec<f64>,
    /// Max-entry norms of the weighted derivative matrices.
    pub norms: Vec<f64>,
    /// True when the norms grow faster than ⟨log λ⟩² toward λ = 0.
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub struct KPropertyTable {
    pub rho: f64,
    pub gamma: f64,
    pub rows: Vec<KPropertyRow>,
}

/// Weight exponent scale for the probes: operators are sandwiched between
/// ⟨r⟩^{ρ−γ} with γ = 3 (the m = 6 weighted-space scale).
pub const KPROPERTY_GAMMA: f64 = 3.0;

fn max_entry_norm(a: &DMatrix<Complex64>) -> f64 {
    a.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Flags growth faster than ⟨log λ⟩² toward zero. The norms are divided by
/// the allowed envelope (1 + |log λ|)² and the residual trend is measured
/// as the least-squares slope of log(scaled norm) against log λ; a power
/// law λ^{−a} survives the rescaling with slope ≈ −a, while anything inside
/// the envelope trends flat-to-positive, so a slope ≤ −0.2 marks a genuine
/// violation. Samples at roundoff level relative to the row peak are
/// dropped; rows that are entirely roundoff never flag.
fn log2_growth_flag(lambdas: &[f64], norms: &[f64]) -> bool {
    let peak = norms.iter().fold(0.0_f64, |a, &x| a.max(x));
    if peak <= 0.0 {
        return false;
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&l, &n) in lambdas.iter().zip(norms.iter()) {
        if n > peak * 1e-13 {
            xs.push(l.ln());
            ys.push((n / (1.0 + l.ln().abs()).powi(2)).ln());
        }
    }
    if xs.len() < 4 {
        return false;
    }
    let count = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / count;
    let my = ys.iter().sum::<f64>() / count;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    sxy / sxx <= -0.2
}

/// Probes property-(K) regularity of a family λ ↦ K(λ) on a positive λ
/// lattice: reports weighted sup norms of the family and its first
/// `max_order` (≤ 2) finite-difference λ-derivatives, flagging rows whose
/// norms blow up faster than ⟨log λ⟩² toward λ = 0.
pub fn kproperty_probe(
    kfam: impl Fn(f64) -> Result<DMatrix<Complex64>>,
    rho: f64,
    max_order: usize,
    grid: &Arc<RadialGrid>,
    lambdas: &[f64],
) -> Result<KPropertyTable> {
    if max_order > 2 {
        return Err(WaveopError::validation(
            "property probes support derivative orders 0..2",
        ));
    }
    if lambdas.len() < 2 * max_order + 1 {
        return Err(WaveopError::validation(format!(
            "λ lattice too coarse for order {max_order}: need ≥ {} points",
            2 * max_order + 1
        )));
    }
    if !lambdas
        .windows(2)
        .all(|w| w[0] > 0.0 && w[1] > w[0] && w[1].is_finite())
    {
        return Err(WaveopError::validation(
            "λ lattice must be positive, strictly increasing, finite",
        ));
    }
    let n = grid.n();
    let weight: Vec<f64> = grid
        .nodes
        .iter()
        .map(|&r| (1.0 + r * r).powf((rho - KPROPERTY_GAMMA) / 2.0))
        .collect();
    let mut weighted = Vec::with_capacity(lambdas.len());
    for &lam in lambdas.iter() {
        let mut k = kfam(lam)?;
        if k.nrows() != n || k.ncols() != n {
            return Err(WaveopError::validation(
                "K(λ) must be square on the grid",
            ));
        }
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] *= weight[i] * weight[j];
            }
        }
        weighted.push(k);
    }
    let mut rows = Vec::new();
    for order in 0..=max_order {
        let (ls, norms): (Vec<f64>, Vec<f64>) = match order {
            0 => (
                lambdas.to_vec(),
                weighted.iter().map(max_entry_norm).collect(),
            ),
            _ => {
                let mut ls = Vec::new();
                let mut ns = Vec::new();
                for k in 1..lambdas.len() - 1 {
                    let hm = lambdas[k] - lambdas[k - 1];
                    let hp = lambdas[k + 1] - lambdas[k];
                    // Non-uniform central stencils in difference form
                    // c₋·(f_{k−1}−f_k) + c₊·(f_{k+1}−f_k), which annihilates
                    // constant families exactly instead of leaving
                    // coefficient-roundoff residue.
                    let (cm, cp) = if order == 1 {
                        (-hp / (hm * (hp + hm)), hm / (hp * (hp + hm)))
                    } else {
                        (2.0 / (hm * (hp + hm)), 2.0 / (hp * (hp + hm)))
                    };
                    let d = (&weighted[k - 1] - &weighted[k]) * Complex64::new(cm, 0.0)
                        + (&weighted[k + 1] - &weighted[k]) * Complex64::new(cp, 0.0);
                    ls.push(lambdas[k]);
                    ns.push(max_entry_norm(&d));
                }
                (ls, ns)
            }
        };
        let flagged = log2_growth_flag(&ls, &norms);
        rows.push(KPropertyRow {
            order,
            lambdas: ls,
            norms,
            flagged,
        });
    }
    Ok(KPropertyTable {
        rho,
        gamma: KPROPERTY_GAMMA,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::spectral::{
        classify, default_e_tol, make_exceptional_potential, tune_exceptional_coupling,
    };
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn m_lambda_at_zero_potential_is_identity() {
        let grid = make_grid(6, 20.0, 60).unwrap();
        let m = m_lambda(0.3, &grid, &PotentialSpec::zero()).unwrap();
        for i in 0..60 {
            for j in 0..60 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert_eq!(m.matrix[(i, j)], Complex64::new(target, 0.0));
            }
        }
        assert_relative_eq!(m.sigma_max, 1.0, max_relative = 1e-10);
        assert_relative_eq!(m.sigma_min, 1.0, max_relative = 1e-10);
        // Identity inverts to identity.
        let inv = invert_m(&m).unwrap();
        for i in 0..60 {
            assert_relative_eq!(inv[(i, i)].re, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn threshold_singular_value_detection() {
        // Re-tuned exceptional potential: the discrete threshold sits
        // exactly at λ = 0, so M(0) carries a near-kernel.
        let grid = make_grid(6, 40.0, 300).unwrap();
        let raw = make_exceptional_potential(6).unwrap();
        let tuned = tune_exceptional_coupling(&grid, &raw).unwrap();
        let m0 = m_lambda(0.0, &grid, &tuned).unwrap();
        assert!(
            m0.sigma_min <= 1e-3,
            "no near-kernel detected: σ_min = {:.3e}",
            m0.sigma_min
        );
        // Generic potential: smallest singular value stays safely away from
        // zero across refinement.
        let gauss = PotentialSpec::gaussian(-0.5, 1.0).unwrap();
        for &n in &[300usize, 600] {
            let grid = make_grid(6, 40.0, n).unwrap();
            let m = m_lambda(0.0, &grid, &gauss).unwrap();
            assert!(
                m.sigma_min >= 0.05,
                "generic σ_min {:.3e} at N={n}",
                m.sigma_min
            );
        }
    }

    #[test]
    fn invert_m_contract() {
        let grid = make_grid(6, 40.0, 300).unwrap();
        // Generic potential at moderate λ: inverse exists, and the residual
        // guard inside invert_m certifies ‖M·M⁻¹−I‖_max ≤ 1e−8.
        let gauss = PotentialSpec::gaussian(-0.5, 1.0).unwrap();
        let m = m_lambda(0.05, &grid, &gauss).unwrap();
        let inv = invert_m(&m).unwrap();
        // Composition with the forward matrix is the identity (spot rows).
        let prod = &m.matrix * &inv;
        for i in (0..300).step_by(60) {
            for j in (0..300).step_by(60) {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - Complex64::new(target, 0.0)).norm() <= 1e-8);
            }
        }
        // Exceptional potential at tiny λ: refused, reporting the tiny
        // singular value.
        let tuned =
            tune_exceptional_coupling(&grid, &make_exceptional_potential(6).unwrap()).unwrap();
        let m_exc = m_lambda(1e-6, &grid, &tuned).unwrap();
        match invert_m(&m_exc) {
            Err(WaveopError::Numerical(msg)) => {
                assert!(msg.contains("singular"), "unexpected message: {msg}")
            }
            other => panic!("expected near-singular refusal, got {other:?}"),
        }
    }

    #[test]
    fn feshbach_scalar_identities() {
        let c1 = |x: f64| Complex64::new(x, 0.0);
        let f = FeshbachDecomposition::new(
            DMatrix::from_element(1, 1, c1(2.0)),
            DMatrix::from_element(1, 1, c1(1.0)),
            DMatrix::from_element(1, 1, c1(1.0)),
            DMatrix::from_element(1, 1, c1(1.0)),
        )
        .unwrap();
        let schur = f.schur().unwrap();
        assert_relative_eq!(schur[(0, 0)].re, 0.5, max_relative = 1e-14);
        let inv = feshbach_invert(&f).unwrap();
        let expect = [[1.0, -1.0], [-1.0, 2.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(inv[(i, j)].re, expect[i][j], max_relative = 1e-14);
                assert!(inv[(i, j)].im.abs() <= 1e-15);
            }
        }
        // Identity with any split inverts to identity.
        let eye = DMatrix::from_fn(8, 8, |i, j| c1(if i == j { 1.0 } else { 0.0 }));
        let split0: Vec<usize> = vec![0, 2, 4, 6];
        let split1: Vec<usize> = vec![1, 3, 5, 7];
        let fd = FeshbachDecomposition::from_index_split(&eye, &split0, &split1).unwrap();
        let inv = feshbach_invert(&fd).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((inv[(i, j)] - c1(target)).norm() <= 1e-14);
            }
        }
        // Bad splits are rejected.
        assert!(FeshbachDecomposition::from_index_split(&eye, &[0, 1], &[1, 2]).is_err());
        assert!(FeshbachDecomposition::from_index_split(&eye, &[0, 1], &[2, 3]).is_err());
    }

    #[test]
    fn feshbach_matches_direct_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x0f35_4bac);
        for trial in 0..20 {
            let n = 12;
            let a = DMatrix::from_fn(n, n, |i, j| {
                let mut z = Complex64::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                if i == j {
                    z += 4.0; // keep the trial matrices comfortably invertible
                }
                z
            });
            // Random partition of the index set.
            let mut idx: Vec<usize> = (0..n).collect();
            for k in (1..n).rev() {
                let j = rng.random_range(0..=k);
                idx.swap(k, j);
            }
            let cut = rng.random_range(2..n - 2);
            let (idx0, idx1) = idx.split_at(cut);
            let fd = FeshbachDecomposition::from_index_split(&a, idx0, idx1).unwrap();
            // Reassembly reproduces the permuted matrix exactly.
            let permuted = DMatrix::from_fn(n, n, |i, j| {
                let ord: Vec<usize> = idx0.iter().chain(idx1.iter()).copied().collect();
                a[(ord[i], ord[j])]
            });
            assert_eq!(fd.assemble(), permuted);
            let via_schur = feshbach_invert(&fd).unwrap();
            let direct = crate::linalg::lu_inverse(&permuted).unwrap();
            let mut dev = 0.0_f64;
            for i in 0..n {
                for j in 0..n {
                    dev = dev.max((via_schur[(i, j)] - direct[(i, j)]).norm());
                }
            }
            assert!(dev <= 1e-10, "trial {trial}: deviation {dev:.3e}");
        }
        // The same agreement on M(λ) split along supp V / complement.
        let grid = make_grid(6, 20.0, 80).unwrap();
        let pot = PotentialSpec::gaussian(-2.0, 1.0).unwrap();
        let m = m_lambda(0.05, &grid, &pot).unwrap();
        let idx0: Vec<usize> = (0..20).collect();
        let idx1: Vec<usize> = (20..80).collect();
        let fd = FeshbachDecomposition::from_index_split(&m.matrix, &idx0, &idx1).unwrap();
        let via_schur = feshbach_invert(&fd).unwrap();
        let direct = crate::linalg::lu_inverse(&fd.assemble()).unwrap();
        let mut dev = 0.0_f64;
        for i in 0..80 {
            for j in 0..80 {
                dev = dev.max((via_schur[(i, j)] - direct[(i, j)]).norm());
            }
        }
        assert!(dev <= 1e-10, "M(λ) split deviation {dev:.3e}");
    }

    #[test]
    fn singular_fit_exceptional_recovers_p0v() {
        let grid = make_grid(6, 40.0, 300).unwrap();
        let raw = make_exceptional_potential(6).unwrap();
        let tuned = tune_exceptional_coupling(&grid, &raw).unwrap();
        // Cross-module oracle: P₀V assembled from the classifier's basis.
        let e_tol = default_e_tol(&grid).unwrap();
        let h = crate::spectral::build_hamiltonian(&grid, &tuned).unwrap();
        let c = classify(&h, e_tol).unwrap();
        assert_eq!(c.d, 1);
        let n = grid.n();
        let meas = grid.measure();
        let v = tuned.values_on(&grid);
        let mut p0v = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for i in 0..n {
            for j in 0..n {
                p0v[(i, j)] = c.p0.matrix[(i, j)] * v[j] * meas[j];
            }
        }
        let fit = singular_fit(&grid, &tuned, &fit_lambda_ladder(12)).unwrap();
        let rel = (&fit.fitted_p0v - &p0v).norm() / p0v.norm();
        assert!(rel <= 0.05, "fitted λ⁻² coefficient off by {rel:.3e}");
        // The λ⁻² coefficient has numerical rank d = 1.
        let svd = fit.fitted_p0v.clone().svd(false, false);
        let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!(
            sv[1] <= 1e-6 * sv[0],
            "rank exceeds 1: σ₁={:.3e} σ₂={:.3e}",
            sv[0],
            sv[1]
        );
        // Log terms improve the fit.
        assert!(fit.residual_log < fit.residual_plain);
    }

    #[test]
    fn singular_fit_generic_has_no_singular_part() {
        let grid = make_grid(6, 40.0, 300).unwrap();
        let pot = PotentialSpec::gaussian(-5.0, 1.0).unwrap();
        let fit = singular_fit(&grid, &pot, &fit_lambda_ladder(12)).unwrap();
        let vsup = 5.0;
        let coeff = fit.fitted_p0v.norm();
        assert!(
            coeff <= 1e-3 * vsup,
            "generic λ⁻² coefficient {coeff:.3e} too large"
        );
        assert!(fit.residual_log <= fit.residual_plain);
        // Sample-count guard.
        assert!(singular_fit(&grid, &pot, &fit_lambda_ladder(5)).is_err());
        assert!(singular_fit(&grid, &pot, &[0.1, -0.2, 0.3, 0.4, 0.5, 0.6]).is_err());
    }

    #[test]
    fn kproperty_probe_contract() {
        let grid = make_grid(6, 20.0, 60).unwrap();
        let n = grid.n();
        let lattice: Vec<f64> = fit_lambda_ladder(12)
            .iter()
            .map(|&l| l * 3.0) // [3e−3, 0.3]
            .collect();
        // Constant family: all derivative norms vanish identically.
        let constant = DMatrix::from_fn(n, n, |i, j| {
            Complex64::new((i + j) as f64 / n as f64, 0.3)
        });
        let table = kproperty_probe(
            |_| Ok(constant.clone()),
            0.0,
            2,
            &grid,
            &lattice,
        )
        .unwrap();
        assert_eq!(table.rows.len(), 3);
        assert!(!table.rows[0].flagged);
        for row in &table.rows[1..] {
            assert!(row.norms.iter().all(|&x| x <= 1e-10));
            assert!(!row.flagged);
        }
        // λ⁻¹ blow-up is flagged at order 0.
        let table = kproperty_probe(
            |l| Ok(&constant * Complex64::new(1.0 / l, 0.0)),
            0.0,
            0,
            &grid,
            &lattice,
        )
        .unwrap();
        assert!(table.rows[0].flagged);
        // Generic-coupling family K(λ) = V (M(λ)⁻¹ − I) G₀(λ) V stays
        // bounded through order 2 — threshold regularity of the generic
        // case.
        let pot = PotentialSpec::gaussian(-2.0, 1.0).unwrap();
        let meas = grid.measure();
        let v = pot.values_on(&grid);
        let table = kproperty_probe(
            |l| {
                let m = m_lambda(l, &grid, &pot)?;
                let mut e = crate::linalg::lu_inverse(&m.matrix)?;
                for i in 0..n {
                    e[(i, i)] -= 1.0;
                }
                let g0 = g0_reduced(l, &grid)?;
                let mut k = e * &g0.matrix;
                for i in 0..n {
                    for j in 0..n {
                        k[(i, j)] *= v[i] * v[j] * meas[j];
                    }
                }
                Ok(k)
            },
            0.0,
            2,
            &grid,
            &lattice,
        )
        .unwrap();
        for row in &table.rows {
            assert!(
                !row.flagged,
                "order {} flagged; norms {:?}",
                row.order, row.norms
            );
            assert!(row.norms.iter().all(|&x| x.is_finite()));
        }
        // Coarse-lattice guard.
        assert!(kproperty_probe(|_| Ok(constant.clone()), 0.0, 2, &grid, &lattice[..4]).is_err());
        assert!(kproperty_probe(|_| Ok(constant.clone()), 0.0, 3, &grid, &lattice).is_err());
    }
}
