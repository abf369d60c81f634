//! Coefficient payload of the boundary-controlled heterodirectional system.
//!
//! The plant evolving on `x ∈ [0, 1]` is
//!
//! ```text
//!     ∂t u_i + γ_i ∂x u_i = σ_{i1} u₁ + σ_{i2} u₂ + α(x) w,      i = 1, 2
//!     ∂t w   − μ  ∂x w    = θ₁(x) u₁ + θ₂(x) u₂,
//! ```
//!
//! with boundary reflections `u_i(t,0) = q_i w(t,0)` and actuation
//! `w(t,1) = ρ₁ u₁(t,1) + ρ₂ u₂(t,1) + U(t)`, measuring `y(t) = w(t,0)`.
//!
//! Everything downstream (kernel equations, simulator) is written against
//! this abstract payload, so analytic test cases with constant coefficients
//! drive the exact same code paths as the physically derived channel model.

use crate::characteristics::CharCoefficients;
use crate::model::EquilibriumSetup;

/// A bounded scalar coefficient on `[0, 1]`.
///
/// The two shapes cover every case the channel model produces (constants and
/// exponentially graded profiles) while keeping the payload `Copy`, exactly
/// comparable, and trivially serializable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoefFn {
    Constant(f64),
    /// `amp · e^{rate·x}`.
    ExpScaled { amp: f64, rate: f64 },
}

impl CoefFn {
    pub const ZERO: CoefFn = CoefFn::Constant(0.0);

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            CoefFn::Constant(c) => c,
            CoefFn::ExpScaled { amp, rate } => amp * (rate * x).exp(),
        }
    }

    /// Supremum of `|f|` on `[0, 1]`.
    pub fn sup(&self) -> f64 {
        match *self {
            CoefFn::Constant(c) => c.abs(),
            CoefFn::ExpScaled { amp, rate } => amp.abs() * rate.max(0.0).exp(),
        }
    }
}

/// Full coefficient set of the plant and its boundary conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbstractCoefficients {
    /// Leftward transport speed, `μ > 0`.
    pub mu: f64,
    /// Rightward speeds `0 < γ₁ ≤ γ₂`.
    pub gamma1: f64,
    pub gamma2: f64,
    /// In-domain coupling among the rightward pair.
    pub sigma: [[f64; 2]; 2],
    /// Coupling of `w` into each rightward equation.
    pub alpha: CoefFn,
    /// Couplings of `u₁`, `u₂` into the `w` equation.
    pub theta1: CoefFn,
    pub theta2: CoefFn,
    /// Reflection of the measured boundary value into the rightward inflows.
    pub q1: f64,
    pub q2: f64,
    /// Reflection of the rightward pair into the actuated boundary.
    pub rho1: f64,
    pub rho2: f64,
}

impl AbstractCoefficients {
    /// A fully decoupled payload (useful as a test scaffold).
    pub fn decoupled(mu: f64, gamma1: f64, gamma2: f64) -> Self {
        Self {
            mu,
            gamma1,
            gamma2,
            sigma: [[0.0; 2]; 2],
            alpha: CoefFn::ZERO,
            theta1: CoefFn::ZERO,
            theta2: CoefFn::ZERO,
            q1: 0.0,
            q2: 0.0,
            rho1: 0.0,
            rho2: 0.0,
        }
    }

    /// Assembles the payload of a physical setup from its characteristic
    /// coefficients and the setup's reflection constants.
    pub fn from_channel(setup: &EquilibriumSetup, c: &CharCoefficients) -> Self {
        Self {
            mu: c.mu,
            gamma1: c.gamma1,
            gamma2: c.gamma2,
            sigma: c.sigma,
            alpha: CoefFn::ExpScaled {
                amp: c.alpha1,
                rate: c.rate,
            },
            theta1: CoefFn::ExpScaled {
                amp: c.eta1,
                rate: c.rate,
            },
            theta2: CoefFn::ExpScaled {
                amp: c.eta2,
                rate: c.rate,
            },
            q1: setup.q1,
            q2: setup.q2,
            rho1: setup.rho1,
            rho2: setup.rho2,
        }
    }

    pub fn speeds_valid(&self) -> bool {
        self.mu > 0.0 && self.gamma1 > 0.0 && self.gamma2 > 0.0
    }

    pub fn max_speed(&self) -> f64 {
        self.mu.max(self.gamma1).max(self.gamma2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coef_shapes() {
        let c = CoefFn::Constant(2.0);
        assert_eq!(c.value(0.3), 2.0);
        assert_eq!(c.sup(), 2.0);
        let e = CoefFn::ExpScaled { amp: -0.5, rate: -1.0 };
        assert_eq!(e.value(0.0), -0.5);
        assert!((e.value(1.0) + 0.5 * (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(e.sup(), 0.5); // decaying profile peaks at x = 0
        let g = CoefFn::ExpScaled { amp: 1.0, rate: 0.5 };
        assert!((g.sup() - 0.5f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn channel_payload_matches_characteristics() {
        use crate::characteristics::{char_coefficients, spectrum};
        use crate::model::{EquilibriumSetup, PhysicalParams};
        let s = EquilibriumSetup::with_derived_slope(
            PhysicalParams { g: 9.81, cf: 0.1, ag: 0.003, pg: 0.002, sb: 0.0 },
            1.0,
            5.0,
            0.4,
            (1.0, 1.5),
            (1.0, 1.2),
        )
        .unwrap();
        let sp = spectrum(&s).unwrap();
        let c = char_coefficients(&s, &sp).unwrap();
        let p = AbstractCoefficients::from_channel(&s, &c);
        assert_eq!(p.mu, c.mu);
        assert_eq!(p.alpha.value(0.37), c.alpha(0.37));
        assert_eq!(p.theta1.value(0.9), c.theta1(0.9));
        assert_eq!(p.theta2.value(0.1), c.theta2(0.1));
        assert_eq!((p.q1, p.q2, p.rho1, p.rho2), (1.0, 1.2, 1.0, 1.5));
        assert!(p.speeds_valid());
    }
}
