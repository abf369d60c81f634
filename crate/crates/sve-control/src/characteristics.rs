//! Characteristic decomposition of the linearized channel model.
//!
//! The advection matrix has the characteristic polynomial
//!
//! ```text
//!     λ³ − 2V*λ² + (V*² − gH* − g a V*²) λ + g a V*³ = 0,
//! ```
//!
//! which for a valid setup (`a > 0`, `V* > 0`) always carries exactly one
//! negative and two positive real roots.  Diagonalizing with the left
//! eigenvectors
//!
//! ```text
//!     L_k = [ (V*−λ_i)(V*−λ_j) + gH*,  H* λ_k,  gH* ] / ((λ_k−λ_i)(λ_k−λ_j))
//! ```
//!
//! and scaling each projection `Φ_k = L_k·(h,u,b)` by
//! `r_k = C_f (V*/H*) λ_k / ((λ_k−λ_i)(λ_k−λ_j))` yields Riemann-like
//! coordinates `ξ_k = Φ_k / r_k` obeying
//!
//! ```text
//!     ∂t ξ_k + λ_k ∂x ξ_k = α_1 ξ_1 + α_2 ξ_2 + α_3 ξ_3,
//!     α_k = (3V* − 2λ_k) r_k,
//! ```
//!
//! the same right-hand side in all three equations.  Ordering the roots
//! ascending as `s0 < 0 < s1 < s2`, the variables are relabeled
//! `v = ξ(s0)` (leftward), `u₁ = ξ(s1)`, `u₂ = ξ(s2)` with speeds
//! `μ = −s0`, `γ₁ = s1`, `γ₂ = s2`, and the leftward variable is rescaled to
//! `w(x) = v(x) e^{−α₁ x/μ}`, which turns the space-varying couplings into
//! `α(x) = α₁ e^{α₁ x/μ}` and `θ_j(x) = η_j e^{α₁ x/μ}`.
//!
//! The flow regime decides naming only: in subcritical flow the negative
//! root is λ₁ and the small positive root λ₂; past critical speed the small
//! root turns negative and takes the λ₂ label while λ₁ becomes positive.
//! All numerics below work in ascending-root order, which is identical in
//! both regimes.

use crate::cubic::{solve_monic_cubic, CubicRoots};
use crate::linalg::Mat3;
use crate::model::EquilibriumSetup;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CharError {
    #[error("characteristic polynomial has repeated or complex roots (degenerate advection)")]
    Degenerate,
    #[error("eigenvalue {lambda:.3e} is numerically zero: flow is at a critical transition")]
    CriticalFlow { lambda: f64 },
    #[error("eigenvalue sign pattern (negative count {negatives}) matches neither flow regime")]
    RegimeMismatch { negatives: usize },
    #[error("friction coefficient {cf:.3e} too small: characteristic scaling r_k degenerates")]
    DegenerateScaling { cf: f64 },
    #[error("characteristic transform is singular")]
    SingularTransform,
    #[error("polynomial residual {residual:.3e} exceeds tolerance after root polishing")]
    RootResidual { residual: f64 },
}

/// Flow regime of the uniform equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `Fr < 1`: the slower water wave travels upstream.
    Subcritical,
    /// `Fr > 1`: both water waves travel downstream; the upstream-running
    /// characteristic is the slow bed wave.
    Supercritical,
}

/// Eigenvalues of the advection matrix in the regime's index convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectrum {
    /// `(λ₁, λ₂, λ₃)`.  Subcritical: `λ₁ < 0 < λ₂ < λ₃`.
    /// Supercritical: `λ₂ < 0 < λ₁ < λ₃`.
    pub lambda: [f64; 3],
    pub regime: Regime,
}

impl Spectrum {
    /// Eigenvalues in ascending order `(s0, s1, s2)`, independent of regime.
    pub fn sorted(&self) -> [f64; 3] {
        let mut s = self.lambda;
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        s
    }
}

/// Monic characteristic-polynomial coefficients `(c₂, c₁, c₀)` of the setup.
pub fn characteristic_coefficients(setup: &EquilibriumSetup) -> (f64, f64, f64) {
    let (g, h, v) = (setup.params.g, setup.hstar, setup.vstar);
    let a = setup.sediment_coefficient();
    (
        -2.0 * v,
        v * v - g * h - g * a * v * v,
        g * a * v.powi(3),
    )
}

/// Tolerance below which an eigenvalue counts as a critical transition.
const CRITICAL_TOL: f64 = 1e-9;

/// Computes and classifies the advection spectrum.
pub fn spectrum(setup: &EquilibriumSetup) -> Result<Spectrum, CharError> {
    let (c2, c1, c0) = characteristic_coefficients(setup);
    let sorted = match solve_monic_cubic(c2, c1, c0) {
        CubicRoots::ThreeReal(r) => r,
        CubicRoots::Repeated | CubicRoots::ComplexPair => return Err(CharError::Degenerate),
    };
    let scale = 1.0f64.max(c2.abs()).max(c1.abs()).max(c0.abs());
    for z in sorted {
        let p = ((z + c2) * z + c1) * z + c0;
        if p.abs() > 1e-10 * scale {
            return Err(CharError::RootResidual { residual: p });
        }
        if z.abs() < CRITICAL_TOL {
            return Err(CharError::CriticalFlow { lambda: z });
        }
    }
    let negatives = sorted.iter().filter(|z| **z < 0.0).count();
    if negatives != 1 {
        return Err(CharError::RegimeMismatch { negatives });
    }
    let fr = setup.froude();
    let regime = if fr < 1.0 {
        Regime::Subcritical
    } else {
        Regime::Supercritical
    };
    let lambda = match regime {
        Regime::Subcritical => sorted,
        Regime::Supercritical => [sorted[1], sorted[0], sorted[2]],
    };
    Ok(Spectrum { lambda, regime })
}

/// Left eigenvector rows `L_k` (ordered like `spectrum.lambda`), satisfying
/// `L_kᵀ A = λ_k L_kᵀ` with the normalization displayed in the module docs.
pub fn left_eigenvectors(setup: &EquilibriumSetup, spectrum: &Spectrum) -> [[f64; 3]; 3] {
    let (g, h, v) = (setup.params.g, setup.hstar, setup.vstar);
    let lam = spectrum.lambda;
    let mut rows = [[0.0; 3]; 3];
    for k in 0..3 {
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        let d = (lam[k] - lam[i]) * (lam[k] - lam[j]);
        rows[k] = [
            ((v - lam[i]) * (v - lam[j]) + g * h) / d,
            h * lam[k] / d,
            g * h / d,
        ];
    }
    rows
}

/// Constant data of the characteristic system, in ascending-root order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharCoefficients {
    /// Speed of the leftward characteristic, `μ = −s0 > 0`.
    pub mu: f64,
    /// Slower rightward speed `γ₁ = s1`.
    pub gamma1: f64,
    /// Faster rightward speed `γ₂ = s2`.
    pub gamma2: f64,
    /// Source coefficient of the leftward variable, `α₁ = (3V* − 2 s0) r(s0)`.
    pub alpha1: f64,
    /// Source coefficient of `u₁`, `η₁ = (3V* − 2 s1) r(s1)`.
    pub eta1: f64,
    /// Source coefficient of `u₂`, `η₂ = (3V* − 2 s2) r(s2)`.
    pub eta2: f64,
    /// Rightward source matrix; both rows equal `(η₁, η₂)`.
    pub sigma: [[f64; 2]; 2],
    /// Projection scalings `r` in ascending-root order.
    pub r: [f64; 3],
    /// Exponent rate `α₁/μ` of the rescaled couplings.
    pub rate: f64,
}

impl CharCoefficients {
    /// Coupling of the rescaled leftward variable into the rightward pair:
    /// `α(x) = α₁ e^{α₁ x/μ}`.
    pub fn alpha(&self, x: f64) -> f64 {
        self.alpha1 * (self.rate * x).exp()
    }

    /// Coupling of `u₁` into the rescaled leftward equation.
    pub fn theta1(&self, x: f64) -> f64 {
        self.eta1 * (self.rate * x).exp()
    }

    /// Coupling of `u₂` into the rescaled leftward equation.
    pub fn theta2(&self, x: f64) -> f64 {
        self.eta2 * (self.rate * x).exp()
    }

    /// Largest characteristic speed, the CFL-limiting velocity.
    pub fn max_speed(&self) -> f64 {
        self.mu.max(self.gamma1).max(self.gamma2)
    }
}

/// Source coefficient of one characteristic: `α = (3V* − 2λ) r`.
pub(crate) fn alpha_factor(vstar: f64, lambda: f64, r: f64) -> f64 {
    (3.0 * vstar - 2.0 * lambda) * r
}

/// Derives speeds, scalings, and source coefficients from the spectrum.
pub fn char_coefficients(
    setup: &EquilibriumSetup,
    spectrum: &Spectrum,
) -> Result<CharCoefficients, CharError> {
    let cf = setup.params.cf;
    if cf <= 0.0 {
        return Err(CharError::DegenerateScaling { cf });
    }
    let s = spectrum.sorted();
    let (h, v) = (setup.hstar, setup.vstar);
    let mut r = [0.0; 3];
    let mut alpha = [0.0; 3];
    for k in 0..3 {
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        let d = (s[k] - s[i]) * (s[k] - s[j]);
        r[k] = cf * (v / h) * s[k] / d;
        alpha[k] = alpha_factor(v, s[k], r[k]);
    }
    let mu = -s[0];
    Ok(CharCoefficients {
        mu,
        gamma1: s[1],
        gamma2: s[2],
        alpha1: alpha[0],
        eta1: alpha[1],
        eta2: alpha[2],
        sigma: [[alpha[1], alpha[2]], [alpha[1], alpha[2]]],
        r,
        rate: alpha[0] / mu,
    })
}

/// Characteristic-variable samples on a shared spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CharField {
    pub x: Vec<f64>,
    /// Slow rightward variable `u₁`.
    pub u1: Vec<f64>,
    /// Fast rightward variable `u₂`.
    pub u2: Vec<f64>,
    /// Leftward variable `v` (unscaled).
    pub v: Vec<f64>,
}

/// Row matrix mapping deviations `(h, u, b)` to ascending-ordered
/// characteristics `(ξ(s0), ξ(s1), ξ(s2))`.  The eigenvector denominators
/// cancel against `r_k`, leaving `T_k = L̃_k · H*/(C_f V* s_k)` with
/// `L̃_k = [ (V*−s_i)(V*−s_j) + gH*, H* s_k, gH* ]`.
pub fn char_transform(setup: &EquilibriumSetup, spectrum: &Spectrum) -> Result<Mat3, CharError> {
    let cf = setup.params.cf;
    if cf <= 0.0 {
        return Err(CharError::DegenerateScaling { cf });
    }
    let (g, h, v) = (setup.params.g, setup.hstar, setup.vstar);
    let s = spectrum.sorted();
    let mut t = [[0.0; 3]; 3];
    for k in 0..3 {
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        let scale = h / (cf * v * s[k]);
        t[k] = [
            ((v - s[i]) * (v - s[j]) + g * h) * scale,
            h * s[k] * scale,
            g * h * scale,
        ];
    }
    Ok(Mat3(t))
}

/// Projects physical deviations onto characteristic variables.
///
/// All slices share one grid; the result keeps the ascending-root
/// relabeling `(v, u₁, u₂) = (ξ(s0), ξ(s1), ξ(s2))`.
pub fn to_characteristic(
    setup: &EquilibriumSetup,
    spectrum: &Spectrum,
    x: &[f64],
    h: &[f64],
    u: &[f64],
    b: &[f64],
) -> Result<CharField, CharError> {
    assert_eq!(x.len(), h.len());
    assert_eq!(x.len(), u.len());
    assert_eq!(x.len(), b.len());
    let t = char_transform(setup, spectrum)?;
    let n = x.len();
    let mut f = CharField {
        x: x.to_vec(),
        u1: vec![0.0; n],
        u2: vec![0.0; n],
        v: vec![0.0; n],
    };
    for p in 0..n {
        let xi = t.mul_vec([h[p], u[p], b[p]]);
        f.v[p] = xi[0];
        f.u1[p] = xi[1];
        f.u2[p] = xi[2];
    }
    Ok(f)
}

/// Reconstructs physical deviations `(h, u, b)` from characteristic
/// variables; inverse of [`to_characteristic`].
pub fn from_characteristic(
    setup: &EquilibriumSetup,
    spectrum: &Spectrum,
    field: &CharField,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), CharError> {
    let t = char_transform(setup, spectrum)?;
    let inv = t.inverse().ok_or(CharError::SingularTransform)?;
    let n = field.x.len();
    let (mut h, mut u, mut b) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for p in 0..n {
        let w = inv.mul_vec([field.v[p], field.u1[p], field.u2[p]]);
        h[p] = w[0];
        u[p] = w[1];
        b[p] = w[2];
    }
    Ok((h, u, b))
}

/// Rescales the leftward variable, `w(x) = v(x) e^{−α₁ x/μ}`.
pub fn rescale_w(coeffs: &CharCoefficients, x: &[f64], v: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(v)
        .map(|(&xi, &vi)| vi * (-coeffs.rate * xi).exp())
        .collect()
}

/// Inverse of [`rescale_w`]: `v(x) = w(x) e^{α₁ x/μ}`.
pub fn unrescale_w(coeffs: &CharCoefficients, x: &[f64], w: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(w)
        .map(|(&xi, &wi)| wi * (coeffs.rate * xi).exp())
        .collect()
}
