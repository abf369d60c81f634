//! Backstepping kernel equations on the triangle `T = {0 ≤ ξ ≤ x ≤ 1}`.
//!
//! The full-state controller uses kernels `(k₁, k₂, k₃)` solving
//!
//! ```text
//!     μ ∂x k₁ − γ₁ ∂ξ k₁ = σ₁₁ k₁ + σ₂₁ k₂ + θ₁(ξ) k₃
//!     μ ∂x k₂ − γ₂ ∂ξ k₂ = σ₁₂ k₁ + σ₂₂ k₂ + θ₂(ξ) k₃
//!     μ ∂x k₃ + μ  ∂ξ k₃ = α(ξ) (k₁ + k₂)
//! ```
//!
//! with data `k₁(x,x) = −θ₁(x)/(γ₁+μ)`, `k₂(x,x) = −θ₂(x)/(γ₂+μ)` on the
//! diagonal and `μ k₃(x,0) = q₁γ₁ k₁(x,0) + q₂γ₂ k₂(x,0)` on the lower edge.
//!
//! The boundary observer uses kernels `(m₁, m₂, m₃)` solving
//!
//! ```text
//!     γ₁ ∂x m₁ − μ ∂ξ m₁ = σ₁₁ m₁ + σ₁₂ m₂ + α(x) m₃
//!     γ₂ ∂x m₂ − μ ∂ξ m₂ = σ₂₁ m₁ + σ₂₂ m₂ + α(x) m₃
//!     μ  ∂x m₃ + μ ∂ξ m₃ = −θ₁(x) m₁ − θ₂(x) m₂
//! ```
//!
//! with `m₁(x,x) = α(x)/(γ₁+μ)`, `m₂(x,x) = α(x)/(γ₂+μ)` and the edge
//! condition `m₃(1,ξ) = ρ₁ m₁(1,ξ) + ρ₂ m₂(1,ξ)` on `x = 1`, from which the
//! output-injection gains `p_i(x) = μ m_i(x, 0)` are read off.
//!
//! Each kernel is integrated along its own characteristic with explicit
//! first-order steps (foot points found by linear interpolation restricted
//! to the triangle); the cross couplings are resolved by Gauss–Seidel-style
//! Picard sweeps over the three fields.  Contraction follows the usual
//! successive-approximation bound for integral equations, so the iteration
//! converges for any bounded coefficients.

use crate::coefficients::AbstractCoefficients;
use crate::grid::{GridError, TriangleGrid};
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("invalid transport speeds: mu={mu}, gamma1={gamma1}, gamma2={gamma2} (all must be > 0)")]
    InvalidSpeeds { mu: f64, gamma1: f64, gamma2: f64 },
    #[error(
        "kernel iteration did not converge: sup-norm change {change:.3e} after {iterations} sweeps"
    )]
    NonConvergence { iterations: usize, change: f64 },
}

/// Which kernel system a field solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelRole {
    Controller,
    Observer,
}

/// Converged kernel triple on a triangular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelField {
    pub grid: TriangleGrid,
    /// Packed nodal values of the three kernels.
    pub k: [Vec<f64>; 3],
    pub role: KernelRole,
}

impl KernelField {
    /// Zero field (also the exact solution for zero coefficients).
    pub fn zeros(n: usize, role: KernelRole) -> Result<Self, KernelError> {
        let grid = TriangleGrid::new(n)?;
        Ok(Self {
            k: [
                vec![0.0; grid.len()],
                vec![0.0; grid.len()],
                vec![0.0; grid.len()],
            ],
            grid,
            role,
        })
    }

    /// P1 interpolation of component `m` at `(x, ξ)`.
    pub fn interp(&self, m: usize, x: f64, xi: f64) -> f64 {
        self.grid.interp(&self.k[m], x, xi)
    }

    /// Largest absolute nodal value across the three components.
    pub fn sup_norm(&self) -> f64 {
        self.k
            .iter()
            .flatten()
            .fold(0.0f64, |acc, &v| acc.max(v.abs()))
    }

    /// Writes the nodal values as CSV ordered by `(i, j)`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        match self.role {
            KernelRole::Controller => writeln!(out, "x,xi,k1,k2,k3")?,
            KernelRole::Observer => writeln!(out, "x,xi,m1,m2,m3")?,
        }
        for (i, j) in self.grid.nodes() {
            let p = self.grid.idx(i, j);
            writeln!(
                out,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                self.grid.x(i),
                self.grid.x(j),
                self.k[0][p],
                self.k[1][p],
                self.k[2][p]
            )?;
        }
        Ok(())
    }
}

/// Convergence controls of the Picard iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Sup-norm change below which a sweep counts as converged.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

/// A converged solve together with its iteration record.
#[derive(Debug, Clone)]
pub struct KernelSolution {
    pub field: KernelField,
    /// Number of Picard sweeps performed.
    pub iterations: usize,
    /// Sup-norm change after each sweep.
    pub change_history: Vec<f64>,
}

/// Slack accepted when deciding whether a backward characteristic reaches the
/// diagonal within the current layer (coordinates are O(1)).
const HIT_EPS: f64 = 1e-13;

/// Linear interpolation along row `i` of a packed field, clamped to `[0, x_i]`.
fn row_interp(grid: &TriangleGrid, values: &[f64], i: usize, xi: f64) -> f64 {
    if i == 0 {
        return values[grid.idx(0, 0)];
    }
    let h = grid.h();
    let xi = xi.clamp(0.0, grid.x(i));
    let j = ((xi / h) as usize).min(i - 1);
    let t = (xi - grid.x(j)) / h;
    values[grid.idx(i, j)] * (1.0 - t) + values[grid.idx(i, j + 1)] * t
}

/// Linear interpolation along the diagonal nodes `f(x_i, x_i)`.
fn diag_interp(grid: &TriangleGrid, values: &[f64], x: f64) -> f64 {
    let h = grid.h();
    let x = x.clamp(0.0, 1.0);
    let i = ((x / h) as usize).min(grid.n - 2);
    let t = (x - grid.x(i)) / h;
    values[grid.idx(i, i)] * (1.0 - t) + values[grid.idx(i + 1, i + 1)] * t
}

fn validate(coeffs: &AbstractCoefficients) -> Result<(), KernelError> {
    if !coeffs.speeds_valid() {
        return Err(KernelError::InvalidSpeeds {
            mu: coeffs.mu,
            gamma1: coeffs.gamma1,
            gamma2: coeffs.gamma2,
        });
    }
    Ok(())
}

/// Solves the controller kernel system.
pub fn solve_controller_kernels(
    coeffs: &AbstractCoefficients,
    n: usize,
    opts: &SolverOptions,
) -> Result<KernelSolution, KernelError> {
    validate(coeffs)?;
    let grid = TriangleGrid::new(n)?;
    let h = grid.h();
    let (mu, g1, g2) = (coeffs.mu, coeffs.gamma1, coeffs.gamma2);
    let sg = coeffs.sigma;
    let diag1 = |x: f64| -coeffs.theta1.value(x) / (g1 + mu);
    let diag2 = |x: f64| -coeffs.theta2.value(x) / (g2 + mu);

    let mut k1 = vec![0.0; grid.len()];
    let mut k2 = vec![0.0; grid.len()];
    let mut k3 = vec![0.0; grid.len()];
    let mut history = Vec::new();

    for _ in 0..opts.max_iter {
        let mut change = 0.0f64;

        // k₁ and k₂ march from the diagonal toward ξ = 0 (characteristic
        // direction (μ, −γ_m)); one explicit step per x-layer, shortened to
        // the diagonal when the backward characteristic leaves the triangle.
        for m in 0..2 {
            let gamma = if m == 0 { g1 } else { g2 };
            // Source of k_m at a foot point, reading the transposed row of σ.
            let src = |x_at: f64, a1: f64, a2: f64, a3: f64| {
                if m == 0 {
                    sg[0][0] * a1 + sg[1][0] * a2 + coeffs.theta1.value(x_at) * a3
                } else {
                    sg[0][1] * a1 + sg[1][1] * a2 + coeffs.theta2.value(x_at) * a3
                }
            };
            for i in 0..grid.n {
                let xi_node = grid.x(i);
                for j in (0..=i).rev() {
                    let v = if j == i {
                        if m == 0 {
                            diag1(xi_node)
                        } else {
                            diag2(xi_node)
                        }
                    } else {
                        let s_star = (xi_node - grid.x(j)) / (mu + gamma);
                        if xi_node - mu * s_star >= grid.x(i - 1) - HIT_EPS {
                            // Diagonal reached inside the layer: take the exact
                            // boundary data at the hit point and one source step.
                            let xs = xi_node - mu * s_star;
                            let a1 = diag1(xs);
                            let a2 = diag2(xs);
                            let a3 = diag_interp(&grid, &k3, xs);
                            let data = if m == 0 { a1 } else { a2 };
                            data + s_star * src(xs, a1, a2, a3)
                        } else {
                            let tau = h / mu;
                            let xif = grid.x(j) + gamma * tau;
                            let a1 = row_interp(&grid, &k1, i - 1, xif);
                            let a2 = row_interp(&grid, &k2, i - 1, xif);
                            let a3 = row_interp(&grid, &k3, i - 1, xif);
                            let prev = if m == 0 { a1 } else { a2 };
                            prev + tau * src(xif, a1, a2, a3)
                        }
                    };
                    let slot = grid.idx(i, j);
                    let target = if m == 0 { &mut k1 } else { &mut k2 };
                    change = change.max((v - target[slot]).abs());
                    target[slot] = v;
                }
            }
        }

        // k₃ marches from the ξ = 0 edge along the direction (1, 1); its
        // foot points are exact grid nodes.
        for i in 0..grid.n {
            let p = grid.idx(i, 0);
            let v = (coeffs.q1 * g1 * k1[p] + coeffs.q2 * g2 * k2[p]) / mu;
            change = change.max((v - k3[p]).abs());
            k3[p] = v;
        }
        for i in 1..grid.n {
            for j in 1..=i {
                let foot = grid.idx(i - 1, j - 1);
                let f = coeffs.alpha.value(grid.x(j - 1)) * (k1[foot] + k2[foot]);
                let v = k3[foot] + (h / mu) * f;
                let slot = grid.idx(i, j);
                change = change.max((v - k3[slot]).abs());
                k3[slot] = v;
            }
        }

        history.push(change);
        if change < opts.tol {
            return Ok(KernelSolution {
                field: KernelField {
                    grid,
                    k: [k1, k2, k3],
                    role: KernelRole::Controller,
                },
                iterations: history.len(),
                change_history: history,
            });
        }
    }
    Err(KernelError::NonConvergence {
        iterations: history.len(),
        change: *history.last().unwrap(),
    })
}

/// Solves the observer kernel system.
pub fn solve_observer_kernels(
    coeffs: &AbstractCoefficients,
    n: usize,
    opts: &SolverOptions,
) -> Result<KernelSolution, KernelError> {
    validate(coeffs)?;
    let grid = TriangleGrid::new(n)?;
    let h = grid.h();
    let (mu, g1, g2) = (coeffs.mu, coeffs.gamma1, coeffs.gamma2);
    let sg = coeffs.sigma;
    let diag1 = |x: f64| coeffs.alpha.value(x) / (g1 + mu);
    let diag2 = |x: f64| coeffs.alpha.value(x) / (g2 + mu);

    let mut m1 = vec![0.0; grid.len()];
    let mut m2 = vec![0.0; grid.len()];
    let mut m3 = vec![0.0; grid.len()];
    let mut history = Vec::new();

    for _ in 0..opts.max_iter {
        let mut change = 0.0f64;

        // m₁ and m₂ march from the diagonal (characteristic (γ_m, −μ)); the
        // coupling coefficient α rides on the first argument here.
        for m in 0..2 {
            let gamma = if m == 0 { g1 } else { g2 };
            let src = |x_at: f64, a1: f64, a2: f64, a3: f64| {
                if m == 0 {
                    sg[0][0] * a1 + sg[0][1] * a2 + coeffs.alpha.value(x_at) * a3
                } else {
                    sg[1][0] * a1 + sg[1][1] * a2 + coeffs.alpha.value(x_at) * a3
                }
            };
            for i in 0..grid.n {
                let xi_node = grid.x(i);
                for j in (0..=i).rev() {
                    let v = if j == i {
                        if m == 0 {
                            diag1(xi_node)
                        } else {
                            diag2(xi_node)
                        }
                    } else {
                        let s_star = (xi_node - grid.x(j)) / (gamma + mu);
                        if xi_node - gamma * s_star >= grid.x(i - 1) - HIT_EPS {
                            let xs = xi_node - gamma * s_star;
                            let a1 = diag1(xs);
                            let a2 = diag2(xs);
                            let a3 = diag_interp(&grid, &m3, xs);
                            let data = if m == 0 { a1 } else { a2 };
                            data + s_star * src(xs, a1, a2, a3)
                        } else {
                            let tau = h / gamma;
                            let xif = grid.x(j) + mu * tau;
                            let xf = grid.x(i - 1);
                            let a1 = row_interp(&grid, &m1, i - 1, xif);
                            let a2 = row_interp(&grid, &m2, i - 1, xif);
                            let a3 = row_interp(&grid, &m3, i - 1, xif);
                            let prev = if m == 0 { a1 } else { a2 };
                            prev + tau * src(xf, a1, a2, a3)
                        }
                    };
                    let slot = grid.idx(i, j);
                    let target = if m == 0 { &mut m1 } else { &mut m2 };
                    change = change.max((v - target[slot]).abs());
                    target[slot] = v;
                }
            }
        }

        // m₃ carries its data on the x = 1 edge and is integrated backward
        // along the direction (1, 1); again the foot points are grid nodes.
        let top = grid.n - 1;
        for j in 0..grid.n {
            let p = grid.idx(top, j);
            let v = coeffs.rho1 * m1[p] + coeffs.rho2 * m2[p];
            change = change.max((v - m3[p]).abs());
            m3[p] = v;
        }
        for i in (0..top).rev() {
            let x_src = grid.x(i + 1);
            let t1 = coeffs.theta1.value(x_src);
            let t2 = coeffs.theta2.value(x_src);
            for j in 0..=i {
                let foot = grid.idx(i + 1, j + 1);
                let f = -t1 * m1[foot] - t2 * m2[foot];
                let v = m3[foot] - (h / mu) * f;
                let slot = grid.idx(i, j);
                change = change.max((v - m3[slot]).abs());
                m3[slot] = v;
            }
        }

        history.push(change);
        if change < opts.tol {
            return Ok(KernelSolution {
                field: KernelField {
                    grid,
                    k: [m1, m2, m3],
                    role: KernelRole::Observer,
                },
                iterations: history.len(),
                change_history: history,
            });
        }
    }
    Err(KernelError::NonConvergence {
        iterations: history.len(),
        change: *history.last().unwrap(),
    })
}

/// Output-injection gains `p_i(x) = μ m_i(x, 0)` sampled on the grid axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverGains {
    pub x: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub p3: Vec<f64>,
}

impl ObserverGains {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "x,p1,p2,p3")?;
        for i in 0..self.x.len() {
            writeln!(
                out,
                "{:.12e},{:.12e},{:.12e},{:.12e}",
                self.x[i], self.p1[i], self.p2[i], self.p3[i]
            )?;
        }
        Ok(())
    }
}

/// Reads the gains off a converged observer field.
pub fn observer_gains(field: &KernelField, mu: f64) -> ObserverGains {
    assert_eq!(field.role, KernelRole::Observer);
    let grid = &field.grid;
    let mut g = ObserverGains {
        x: (0..grid.n).map(|i| grid.x(i)).collect(),
        p1: Vec::with_capacity(grid.n),
        p2: Vec::with_capacity(grid.n),
        p3: Vec::with_capacity(grid.n),
    };
    for i in 0..grid.n {
        let p = grid.idx(i, 0);
        g.p1.push(mu * field.k[0][p]);
        g.p2.push(mu * field.k[1][p]);
        g.p3.push(mu * field.k[2][p]);
    }
    g
}

/// Sup-norms of the discrete defect of a converged field, measured with
/// one-sided differences independent of the marching scheme (upwind along
/// each kernel's own transport direction), plus boundary-condition defects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    /// Interior PDE residual of each component.
    pub interior: [f64; 3],
    /// Boundary-condition residual of each component's data.
    pub boundary: [f64; 3],
}

impl ResidualReport {
    pub fn max_interior(&self) -> f64 {
        self.interior.iter().fold(0.0f64, |a, &v| a.max(v))
    }

    pub fn max_boundary(&self) -> f64 {
        self.boundary.iter().fold(0.0f64, |a, &v| a.max(v))
    }
}

/// First-order finite-difference residuals of a kernel field.
pub fn kernel_residual(field: &KernelField, coeffs: &AbstractCoefficients) -> ResidualReport {
    let grid = &field.grid;
    let h = grid.h();
    let (mu, g1, g2) = (coeffs.mu, coeffs.gamma1, coeffs.gamma2);
    let sg = coeffs.sigma;
    let [f1, f2, f3] = [&field.k[0], &field.k[1], &field.k[2]];
    let mut interior = [0.0f64; 3];
    let mut boundary = [0.0f64; 3];

    let ctrl = field.role == KernelRole::Controller;
    for i in 1..grid.n {
        let x = grid.x(i);
        for j in 0..=i {
            let xi = grid.x(j);
            let p = grid.idx(i, j);
            // Components 1 and 2: backward x-difference, forward ξ-difference
            // (their ξ-transport runs toward smaller ξ).  Valid at j < i.
            if j < i {
                let a1 = f1[p];
                let a2 = f2[p];
                let a3 = f3[p];
                let dx1 = (f1[p] - f1[grid.idx(i - 1, j)]) / h;
                let dxi1 = (f1[grid.idx(i, j + 1)] - f1[p]) / h;
                let dx2 = (f2[p] - f2[grid.idx(i - 1, j)]) / h;
                let dxi2 = (f2[grid.idx(i, j + 1)] - f2[p]) / h;
                let (r1, r2) = if ctrl {
                    (
                        mu * dx1
                            - g1 * dxi1
                            - (sg[0][0] * a1 + sg[1][0] * a2 + coeffs.theta1.value(xi) * a3),
                        mu * dx2
                            - g2 * dxi2
                            - (sg[0][1] * a1 + sg[1][1] * a2 + coeffs.theta2.value(xi) * a3),
                    )
                } else {
                    (
                        g1 * dx1
                            - mu * dxi1
                            - (sg[0][0] * a1 + sg[0][1] * a2 + coeffs.alpha.value(x) * a3),
                        g2 * dx2
                            - mu * dxi2
                            - (sg[1][0] * a1 + sg[1][1] * a2 + coeffs.alpha.value(x) * a3),
                    )
                };
                interior[0] = interior[0].max(r1.abs());
                interior[1] = interior[1].max(r2.abs());
            }
            // Component 3 transports along (1, 1): backward differences in
            // both arguments, valid at 1 ≤ j ≤ i − 1.
            if j >= 1 && j < i {
                let dx3 = (f3[p] - f3[grid.idx(i - 1, j)]) / h;
                let dxi3 = (f3[p] - f3[grid.idx(i, j - 1)]) / h;
                let r3 = if ctrl {
                    mu * dx3 + mu * dxi3 - coeffs.alpha.value(xi) * (f1[p] + f2[p])
                } else {
                    mu * dx3
                        + mu * dxi3
                        + coeffs.theta1.value(x) * f1[p]
                        + coeffs.theta2.value(x) * f2[p]
                };
                interior[2] = interior[2].max(r3.abs());
            }
        }
    }

    for i in 0..grid.n {
        let x = grid.x(i);
        let pd = grid.idx(i, i);
        let p0 = grid.idx(i, 0);
        if ctrl {
            boundary[0] =
                boundary[0].max((f1[pd] + coeffs.theta1.value(x) / (g1 + mu)).abs());
            boundary[1] =
                boundary[1].max((f2[pd] + coeffs.theta2.value(x) / (g2 + mu)).abs());
            boundary[2] = boundary[2]
                .max((mu * f3[p0] - coeffs.q1 * g1 * f1[p0] - coeffs.q2 * g2 * f2[p0]).abs());
        } else {
            boundary[0] =
                boundary[0].max((f1[pd] - coeffs.alpha.value(x) / (g1 + mu)).abs());
            boundary[1] =
                boundary[1].max((f2[pd] - coeffs.alpha.value(x) / (g2 + mu)).abs());
            let pt = grid.idx(grid.n - 1, i);
            boundary[2] = boundary[2]
                .max((f3[pt] - coeffs.rho1 * f1[pt] - coeffs.rho2 * f2[pt]).abs());
        }
    }

    ResidualReport { interior, boundary }
}
