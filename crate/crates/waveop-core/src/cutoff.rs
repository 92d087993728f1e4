//! Smooth spectral cutoff profiles.
//!
//! A [`CutoffPair`] carries the three profiles used to split operators into
//! low- and high-energy parts at a threshold scale λ₀:
//!
//! * `phi(μ)` — equal to 1 for μ ≤ f·λ₀² (f the inner fraction, default 1/4),
//!   equal to 0 for |μ| ≥ λ₀², C^∞ in between;
//! * `psi(μ)` — the complementary profile with φ² + ψ² ≡ 1;
//! * `phi_tilde(λ)` — an auxiliary frequency-side profile, equal to 1 for
//!   |λ| ≤ λ₀ and 0 for |λ| ≥ 2λ₀, so that φ̃(λ)·φ(λ²) = φ(λ²) identically.
//!
//! The profiles are built from the standard C^∞ bump partition
//! χ(t) = g(1−t) / (g(t) + g(1−t)) with g(t) = e^{−1/t} (t > 0, else 0):
//! χ ≡ 1 for t ≤ 0 and χ ≡ 0 for t ≥ 1 *exactly* (not merely to rounding),
//! all derivatives vanish at both ends, and φ = √χ, ψ = √(1−χ) are again
//! C^∞ because χ is exponentially flat where the square roots degenerate.
//! An order-5 polynomial smoothstep was rejected: it is only C², and the
//! rapid-decay requirement on low-pass kernels (off-diagonal decay faster
//! than ⟨r−s⟩^{−4}) needs more smoothness than a C² ramp provides.

use crate::{Result, WaveopError};

/// g(t) = e^{−1/t} for t > 0, extended by 0: the C^∞ flat ramp germ.
fn bump_g(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// χ(t) = g(1−t)/(g(t)+g(1−t)): C^∞, exactly 1 for t ≤ 0, exactly 0 for
/// t ≥ 1, strictly decreasing in between.
fn chi(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    let a = bump_g(1.0 - t);
    let b = bump_g(t);
    a / (a + b)
}

/// Smooth low/high partition at threshold scale `lambda0`.
#[derive(Debug, Clone, Copy)]
pub struct CutoffPair {
    /// Threshold frequency λ₀ (energy threshold λ₀²).
    pub lambda0: f64,
    /// Fraction f ∈ (0,1) of λ₀² below which φ ≡ 1 (ramp on [f·λ₀², λ₀²]).
    pub inner_fraction: f64,
}

impl CutoffPair {
    /// Standard pair: φ ≡ 1 on [0, λ₀²/4], φ ≡ 0 outside (−λ₀², λ₀²).
    pub fn new(lambda0: f64) -> Result<Self> {
        Self::with_inner_fraction(lambda0, 0.25)
    }

    /// Pair with a custom inner plateau fraction; different fractions give
    /// different admissible partitions of unity with the same outer support,
    /// which is what the split-independence checks compare.
    pub fn with_inner_fraction(lambda0: f64, inner_fraction: f64) -> Result<Self> {
        if !(lambda0 > 0.0) || !lambda0.is_finite() {
            return Err(WaveopError::validation(format!(
                "CutoffPair requires lambda0 > 0, got {lambda0}"
            )));
        }
        if !(inner_fraction > 0.0 && inner_fraction < 1.0) {
            return Err(WaveopError::validation(format!(
                "CutoffPair requires inner fraction in (0,1), got {inner_fraction}"
            )));
        }
        Ok(CutoffPair {
            lambda0,
            inner_fraction,
        })
    }

    /// Ramp coordinate for the energy profiles: 0 at |μ| = f·λ₀², 1 at λ₀².
    fn ramp(&self, mu: f64) -> f64 {
        let hi = self.lambda0 * self.lambda0;
        let lo = self.inner_fraction * hi;
        (mu.abs() - lo) / (hi - lo)
    }

    /// Low-energy profile φ(μ): 1 for |μ| ≤ f·λ₀², 0 for |μ| ≥ λ₀², C^∞.
    pub fn phi(&self, mu: f64) -> f64 {
        chi(self.ramp(mu)).sqrt()
    }

    /// High-energy profile ψ(μ) = √(1 − φ(μ)²).
    pub fn psi(&self, mu: f64) -> f64 {
        (1.0 - chi(self.ramp(mu))).sqrt()
    }

    /// Frequency-side companion φ̃(λ): 1 for |λ| ≤ λ₀, 0 for |λ| ≥ 2λ₀,
    /// C^∞ and even; satisfies φ̃(λ)·φ(λ²) = φ(λ²) exactly, because φ(λ²)
    /// vanishes identically where φ̃ < 1.
    pub fn phi_tilde(&self, lambda: f64) -> f64 {
        chi(lambda.abs() / self.lambda0 - 1.0)
    }
}
