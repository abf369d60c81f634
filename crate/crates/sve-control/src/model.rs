//! Saint-Venant–Exner channel model: physical parameters, equilibrium, and
//! the linearization around a uniform steady flow.
//!
//! The model couples water depth `H`, velocity `V`, and bathymetry `B` on a
//! unit-length sloped channel.  A uniform equilibrium `(H*, V*)` must balance
//! gravity against friction,
//!
//! ```text
//!     g · S_b · H* = C_f · V*²,
//! ```
//!
//! and sediment transport enters through the single coefficient
//! `a = 3 A_g / (1 − p_g)` built from the Grass constant `A_g` and porosity
//! `p_g`.  Writing the deviation state `W = (h, u, b)` around the equilibrium
//! gives the linear system `∂t W + A ∂x W = B W` with
//!
//! ```text
//!         ⎡ V*   H*   0 ⎤            ⎡     0            0       0 ⎤
//!     A = ⎢ g    V*   g ⎥ ,      B = ⎢ C_f V*²/H*²  −2 C_f V*/H* 0 ⎥ .
//!         ⎣ 0   aV*²  0 ⎦            ⎣     0            0       0 ⎦
//! ```

use crate::linalg::Mat3;
use thiserror::Error;

/// Errors from parameter validation and equilibrium construction.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parameter `{name}` = {value} is outside its domain ({constraint})")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error(
        "equilibrium does not balance: g*Sb*H - Cf*V^2 = {residual:.3e} \
         exceeds {tol:.1e} relative to Cf*V^2"
    )]
    Unbalanced { residual: f64, tol: f64 },
}

/// Fixed physical constants of the channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Gravitational acceleration `g` [m/s²].
    pub g: f64,
    /// Friction coefficient `C_f` (dimensionless).
    pub cf: f64,
    /// Grass sediment-transport constant `A_g`.
    pub ag: f64,
    /// Sediment porosity `p_g ∈ [0, 1)`.
    pub pg: f64,
    /// Bottom slope `S_b`.
    pub sb: f64,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let check = |name, value: f64, ok: bool, constraint| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(ModelError::Domain {
                    name,
                    value,
                    constraint,
                })
            }
        };
        check("g", self.g, self.g > 0.0, "g > 0")?;
        check("cf", self.cf, self.cf >= 0.0, "Cf >= 0")?;
        check("ag", self.ag, self.ag >= 0.0, "Ag >= 0")?;
        check("pg", self.pg, (0.0..1.0).contains(&self.pg), "0 <= pg < 1")?;
        check("sb", self.sb, self.sb >= 0.0, "Sb >= 0")?;
        Ok(())
    }

    /// Combined sediment coefficient `a = 3 A_g / (1 − p_g)`.
    pub fn sediment_coefficient(&self) -> f64 {
        3.0 * self.ag / (1.0 - self.pg)
    }
}

/// Slope that balances friction for a prescribed uniform flow:
/// `S_b = C_f V*² / (g H*)`.
pub fn equilibrium_slope(g: f64, cf: f64, hstar: f64, vstar: f64) -> f64 {
    cf * vstar * vstar / (g * hstar)
}

/// Froude number `Fr = V* / sqrt(g H*)` of the uniform flow.
pub fn froude(g: f64, hstar: f64, vstar: f64) -> f64 {
    vstar / (g * hstar).sqrt()
}

/// A validated uniform equilibrium together with the boundary reflection
/// coefficients of the channel.
///
/// `rho1, rho2` weight the outgoing characteristics at the controlled end
/// `x = 1`; `q1, q2` reflect the incoming characteristic at `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumSetup {
    pub params: PhysicalParams,
    /// Equilibrium depth `H*` [m].
    pub hstar: f64,
    /// Equilibrium velocity `V*` [m/s].
    pub vstar: f64,
    /// Reference bathymetry level `B*` [m].
    pub bstar: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub q1: f64,
    pub q2: f64,
}

/// Relative tolerance on the steady-state balance accepted at construction.
const BALANCE_TOL: f64 = 1e-9;

impl EquilibriumSetup {
    /// Builds a setup from explicit parameters, rejecting an equilibrium that
    /// does not balance `g S_b H* = C_f V*²` to relative `1e-9`.
    pub fn new(
        params: PhysicalParams,
        hstar: f64,
        vstar: f64,
        bstar: f64,
        rho: (f64, f64),
        q: (f64, f64),
    ) -> Result<Self, ModelError> {
        params.validate()?;
        let dom = |name, value: f64, ok: bool, constraint| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(ModelError::Domain {
                    name,
                    value,
                    constraint,
                })
            }
        };
        dom("hstar", hstar, hstar > 0.0, "H* > 0")?;
        dom("vstar", vstar, vstar > 0.0, "V* > 0")?;
        dom("bstar", bstar, bstar.is_finite(), "finite")?;
        for (name, v) in [
            ("rho1", rho.0),
            ("rho2", rho.1),
            ("q1", q.0),
            ("q2", q.1),
        ] {
            dom(name, v, v.is_finite(), "finite")?;
        }
        let residual = params.g * params.sb * hstar - params.cf * vstar * vstar;
        let scale = (params.cf * vstar * vstar).abs().max(f64::MIN_POSITIVE);
        if residual.abs() > BALANCE_TOL * scale {
            return Err(ModelError::Unbalanced {
                residual,
                tol: BALANCE_TOL,
            });
        }
        Ok(Self {
            params,
            hstar,
            vstar,
            bstar,
            rho1: rho.0,
            rho2: rho.1,
            q1: q.0,
            q2: q.1,
        })
    }

    /// Builds a setup deriving the slope from the flow, so the steady
    /// relation holds by construction.
    pub fn with_derived_slope(
        mut params: PhysicalParams,
        hstar: f64,
        vstar: f64,
        bstar: f64,
        rho: (f64, f64),
        q: (f64, f64),
    ) -> Result<Self, ModelError> {
        params.sb = equilibrium_slope(params.g, params.cf, hstar, vstar);
        Self::new(params, hstar, vstar, bstar, rho, q)
    }

    pub fn froude(&self) -> f64 {
        froude(self.params.g, self.hstar, self.vstar)
    }

    pub fn sediment_coefficient(&self) -> f64 {
        self.params.sediment_coefficient()
    }

    /// Residual of the steady balance `g S_b H* − C_f V*²`.
    pub fn balance_residual(&self) -> f64 {
        self.params.g * self.params.sb * self.hstar - self.params.cf * self.vstar * self.vstar
    }
}

/// The pair `(A, B)` of the linearized system `∂t W + A ∂x W = B W`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedMatrices {
    /// Advection matrix `A`.
    pub advection: Mat3,
    /// Zeroth-order friction coupling `B` (nonzero only in its middle row).
    pub source: Mat3,
}

/// Linearizes the model around the setup's uniform equilibrium.
pub fn linearize(setup: &EquilibriumSetup) -> LinearizedMatrices {
    let (g, cf) = (setup.params.g, setup.params.cf);
    let (h, v) = (setup.hstar, setup.vstar);
    let a = setup.sediment_coefficient();
    let advection = Mat3([[v, h, 0.0], [g, v, g], [0.0, a * v * v, 0.0]]);
    let source = Mat3([
        [0.0, 0.0, 0.0],
        [cf * v * v / (h * h), -2.0 * cf * v / h, 0.0],
        [0.0, 0.0, 0.0],
    ]);
    LinearizedMatrices { advection, source }
}
