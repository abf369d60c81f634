//! Weighted L² Lyapunov functionals of the two target systems.
//!
//! The full-state design is certified by
//!
//! ```text
//!     V₁ = ∫₀¹ a₁ e^{−δ₁x} (ψ₁²/γ₁ + ψ₂²/γ₂) dx + ∫₀¹ (1+x)/μ · χ² dx
//! ```
//!
//! and the observer error by
//!
//! ```text
//!     V₂ = ∫₀¹ a₂ e^{−δ₂x} (π̃₁²/γ₁ + π̃₂²/γ₂) dx + ∫₀¹ e^{δ₂x}/μ · φ̃² dx,
//! ```
//!
//! combined as `V = V₁ + b·V₂`.  These are diagnostics: the decay-rate
//! analysis only needs the weights positive, and the defaults here make no
//! attempt to optimize the certified rate.  Integrals are composite
//! trapezoid over whatever sample abscissae the caller supplies.

/// Positive weights of the functionals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovWeights {
    pub a1: f64,
    pub delta1: f64,
    pub a2: f64,
    pub delta2: f64,
    pub b: f64,
}

impl Default for LyapunovWeights {
    fn default() -> Self {
        Self {
            a1: 1.0,
            delta1: 1.0,
            a2: 1.0,
            delta2: 2.0,
            b: 1.0,
        }
    }
}

impl LyapunovWeights {
    pub fn valid(&self) -> bool {
        [self.a1, self.delta1, self.a2, self.delta2, self.b]
            .iter()
            .all(|&w| w > 0.0 && w.is_finite())
    }
}

/// Composite trapezoid of a nodal integrand over arbitrary ascending nodes.
fn trapezoid(x: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.len().saturating_sub(1) {
        acc += 0.5 * (x[i + 1] - x[i]) * (f(i) + f(i + 1));
    }
    acc
}

/// Functional of the full-state target variables `(ψ₁, ψ₂, χ)`.
pub fn lyapunov_v1(
    x: &[f64],
    psi1: &[f64],
    psi2: &[f64],
    chi: &[f64],
    w: &LyapunovWeights,
    gamma1: f64,
    gamma2: f64,
    mu: f64,
) -> f64 {
    assert!(x.len() == psi1.len() && x.len() == psi2.len() && x.len() == chi.len());
    trapezoid(x, |i| {
        w.a1 * (-w.delta1 * x[i]).exp() * (psi1[i] * psi1[i] / gamma1 + psi2[i] * psi2[i] / gamma2)
            + (1.0 + x[i]) / mu * chi[i] * chi[i]
    })
}

/// Functional of the observer-error target variables `(π̃₁, π̃₂, φ̃)`.
pub fn lyapunov_v2(
    x: &[f64],
    pi1: &[f64],
    pi2: &[f64],
    phi: &[f64],
    w: &LyapunovWeights,
    gamma1: f64,
    gamma2: f64,
    mu: f64,
) -> f64 {
    assert!(x.len() == pi1.len() && x.len() == pi2.len() && x.len() == phi.len());
    trapezoid(x, |i| {
        w.a2 * (-w.delta2 * x[i]).exp() * (pi1[i] * pi1[i] / gamma1 + pi2[i] * pi2[i] / gamma2)
            + (w.delta2 * x[i]).exp() / mu * phi[i] * phi[i]
    })
}

/// Combined functional `V₁ + b·V₂`.
pub fn lyapunov_total(v1: f64, v2: f64, w: &LyapunovWeights) -> f64 {
    v1 + w.b * v2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nodes(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn zero_fields_give_zero() {
        let x = nodes(11);
        let z = vec![0.0; 11];
        let w = LyapunovWeights::default();
        assert_eq!(lyapunov_v1(&x, &z, &z, &z, &w, 1.0, 2.0, 3.0), 0.0);
        assert_eq!(lyapunov_v2(&x, &z, &z, &z, &w, 1.0, 2.0, 3.0), 0.0);
    }

    #[test]
    fn unit_trace_variable_integrates_linear_weight_exactly() {
        // ψ ≡ 0, χ ≡ 1, μ = 2: the integrand (1+x)/2 is linear, so the
        // trapezoid rule is exact: V₁ = 0.75 on any node set.
        let x = nodes(7);
        let z = vec![0.0; 7];
        let one = vec![1.0; 7];
        let v1 = lyapunov_v1(&x, &z, &z, &one, &LyapunovWeights::default(), 1.0, 1.0, 2.0);
        assert!((v1 - 0.75).abs() < 1e-15, "{v1}");
    }

    #[test]
    fn exponential_weight_matches_closed_form() {
        // a₁ = δ₁ = 1, ψ₁ ≡ 1, γ₁ = 2: V₁ = ∫e^{−x}/2 = (1 − e⁻¹)/2.
        let x = nodes(2001);
        let one = vec![1.0; 2001];
        let z = vec![0.0; 2001];
        let v1 = lyapunov_v1(&x, &one, &z, &z, &LyapunovWeights::default(), 2.0, 1.0, 1.0);
        let exact = (1.0 - (-1.0f64).exp()) / 2.0;
        assert!((v1 - exact).abs() < 5e-8, "{v1} vs {exact}");
        assert!((v1 - 0.3160603).abs() < 1e-7);
    }

    #[test]
    fn v2_exponential_weights_match_closed_form() {
        // π̃ ≡ 0, φ̃ ≡ 1, δ₂ = 2, μ = 4: V₂ = ∫e^{2x}/4 = (e² − 1)/8.
        let x = nodes(2001);
        let one = vec![1.0; 2001];
        let z = vec![0.0; 2001];
        let v2 = lyapunov_v2(&x, &z, &z, &one, &LyapunovWeights::default(), 1.0, 1.0, 4.0);
        let exact = (2.0f64.exp() - 1.0) / 8.0;
        assert!((v2 - exact).abs() < 1e-6, "{v2} vs {exact}");
    }

    #[test]
    fn combination_and_validity() {
        let w = LyapunovWeights::default();
        assert!(w.valid());
        assert_eq!(lyapunov_total(0.5, 0.25, &w), 0.75);
        assert_eq!(
            lyapunov_total(0.5, 0.25, &LyapunovWeights { b: 2.0, ..w }),
            1.0
        );
        assert!(!LyapunovWeights { a2: 0.0, ..w }.valid());
        assert!(!LyapunovWeights { delta1: -1.0, ..w }.valid());
    }
}
