//! Closed-loop time integration of the characteristic plant
//!
//! ```text
//!     ∂t u₁ + γ₁ ∂x u₁ = σ₁₁ u₁ + σ₁₂ u₂ + α(x) w
//!     ∂t u₂ + γ₂ ∂x u₂ = σ₂₁ u₁ + σ₂₂ u₂ + α(x) w
//!     ∂t w  − μ  ∂x w  = θ₁(x) u₁ + θ₂(x) u₂
//! ```
//!
//! with boundary reflections `u_i(t,0) = q_i w(t,0)`,
//! `w(t,1) = ρ₁u₁(t,1) + ρ₂u₂(t,1) + U(t)`, the boundary observer (a copy
//! of the plant driven by the measurement `y = w(t,0)` through output
//! injection), and the two feedback laws built from backstepping kernels.
//!
//! The scheme is first-order upwind in space (left-biased for the rightward
//! pair, right-biased for `w`) with unsplit explicit-Euler sources, on `N`
//! uniform cells with centers `x_j = (j+½)Δx`.  The step is
//! `Δt = cfl·Δx / max(γ₁,γ₂,μ)` with the final step truncated to land on
//! `t_final`; Courant factors are precomputed once so that a unit Courant
//! number reproduces pure transport as an exact cell shift.  Control and
//! transform integrals use the midpoint rule `Δx·Σ` over cell centers, which
//! makes the closed-loop identity `χ(t,1) = 0` hold to round-off because the
//! control law and the transform share one quadrature.

use crate::characteristics::{
    char_coefficients, from_characteristic, rescale_w, spectrum, to_characteristic, unrescale_w,
    CharCoefficients, CharError, CharField, Spectrum,
};
use crate::coefficients::AbstractCoefficients;
use crate::kernels::{
    observer_gains, solve_controller_kernels, solve_observer_kernels, KernelError, KernelSolution,
    ObserverGains, SolverOptions,
};
use crate::lyapunov::{lyapunov_v1, lyapunov_v2, LyapunovWeights};
use crate::model::EquilibriumSetup;
use crate::volterra::observer_inverse_kernels;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Characteristics(#[from] CharError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("time step {dt:.6e} exceeds the transport stability bound {bound:.6e}")]
    CflViolation { dt: f64, bound: f64 },
    #[error("state became non-finite at t = {t:.6}")]
    NonFinite { t: f64 },
}

/// Feedback law applied at the right boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Controller {
    /// Open loop, `U ≡ 0`.
    None,
    /// Kernel-weighted integral of the measured plant state.
    FullState,
    /// Kernel-weighted integral of the observer state.
    OutputFeedback,
}

/// Source of the boundary values in the ρ-terms of the output-feedback law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryTerms {
    /// Plant values `u_i(t,1)`, exactly as the law is displayed.
    #[default]
    Measured,
    /// Observer values `û_i(t,1)`.
    Estimated,
}

/// Observer initial condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObserverInit {
    /// All-zero estimate (maximal initial error).
    #[default]
    Zero,
    /// Start from the plant state (zero initial error).
    PlantCopy,
}

/// Full description of one closed-loop channel run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub setup: EquilibriumSetup,
    pub cells: usize,
    pub cfl: f64,
    pub t_final: f64,
    pub controller: Controller,
    pub boundary_terms: BoundaryTerms,
    pub observer_init: ObserverInit,
    pub kernel_n: usize,
    pub kernel_tol: f64,
    pub weights: LyapunovWeights,
}

impl SimConfig {
    /// Config with the customary defaults, ready for field overrides.
    pub fn new(setup: EquilibriumSetup) -> Self {
        Self {
            setup,
            cells: 100,
            cfl: 0.9,
            t_final: 8.0,
            controller: Controller::FullState,
            boundary_terms: BoundaryTerms::default(),
            observer_init: ObserverInit::default(),
            kernel_n: 201,
            kernel_tol: 1e-10,
            weights: LyapunovWeights::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.cells < 10 {
            return Err(SimError::Config(format!(
                "cells must be at least 10, got {}",
                self.cells
            )));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(SimError::Config(format!(
                "cfl must lie in (0, 1], got {}",
                self.cfl
            )));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(SimError::Config(format!(
                "t_final must be positive, got {}",
                self.t_final
            )));
        }
        if self.kernel_n < 3 {
            return Err(SimError::Config(format!(
                "kernel_n must be at least 3, got {}",
                self.kernel_n
            )));
        }
        if !(self.kernel_tol > 0.0 && self.kernel_tol.is_finite()) {
            return Err(SimError::Config(format!(
                "kernel_tol must be positive, got {}",
                self.kernel_tol
            )));
        }
        if !self.weights.valid() {
            return Err(SimError::Config(
                "Lyapunov weights must all be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Cell-centered characteristic state at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub t: f64,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub w: Vec<f64>,
}

impl PlantState {
    pub fn zeros(cells: usize) -> Self {
        Self {
            t: 0.0,
            u1: vec![0.0; cells],
            u2: vec![0.0; cells],
            w: vec![0.0; cells],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u1
            .iter()
            .chain(&self.u2)
            .chain(&self.w)
            .all(|v| v.is_finite())
    }
}

/// Per-step scalar diagnostics of one closed-loop step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// Control applied during the step.
    pub u: f64,
    /// Measured output `w(t,0)` at the step's start.
    pub y: f64,
}

/// One row of the run trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    /// Control evaluated on the state at time `t`.
    pub u: f64,
    /// Measured output `w(t,0)`.
    pub y: f64,
    pub norm_u1: f64,
    pub norm_u2: f64,
    pub norm_w: f64,
    /// Lyapunov functional of the target variables (kernel-based runs only).
    pub v1: Option<f64>,
    /// Lyapunov functional of the observer error target (observer runs only).
    pub v2: Option<f64>,
    /// L² norm of the observer error (observer runs only).
    pub obs_err: Option<f64>,
    /// `sup_x |χ(t,x)|` over cells (kernel-based runs only).
    pub chi_sup: Option<f64>,
    /// Boundary value `χ(t,1)`; cancels to round-off under full-state
    /// feedback.  Carried for diagnostics, not exported to CSV.
    pub chi_right: Option<f64>,
}

/// All fields at one snapshot time, cell-centered.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub w: Vec<f64>,
    /// Unscaled leftward characteristic variable.
    pub v: Vec<f64>,
    /// Physical deviations reconstructed through the inverse transform.
    pub h: Vec<f64>,
    pub u: Vec<f64>,
    pub b: Vec<f64>,
    /// `(û₁, û₂, ŵ)` when an observer is running.
    pub observer: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
}

/// Time-downsampled field history for rendering space-time maps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HeatHistory {
    pub times: Vec<f64>,
    pub u1: Vec<Vec<f64>>,
    pub u2: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub spectrum: Spectrum,
    pub char_coeffs: CharCoefficients,
    pub dx: f64,
    pub dt: f64,
    pub steps: usize,
    pub controller_kernels: Option<KernelSolution>,
    pub observer_kernels: Option<KernelSolution>,
    pub gains: Option<ObserverGains>,
    pub trace: Vec<TraceRecord>,
    pub snapshots: Vec<Snapshot>,
    pub heat: HeatHistory,
}

/// Engine knobs independent of the physical channel.
#[derive(Debug, Clone, Copy)]
pub struct EngineOptions {
    pub cells: usize,
    pub cfl: f64,
    pub controller: Controller,
    pub boundary_terms: BoundaryTerms,
    pub observer_init: ObserverInit,
    pub kernel_n: usize,
    pub kernel_tol: f64,
    pub weights: LyapunovWeights,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            cells: 100,
            cfl: 0.9,
            controller: Controller::FullState,
            boundary_terms: BoundaryTerms::default(),
            observer_init: ObserverInit::default(),
            kernel_n: 201,
            kernel_tol: 1e-10,
            weights: LyapunovWeights::default(),
        }
    }
}

impl From<&SimConfig> for EngineOptions {
    fn from(cfg: &SimConfig) -> Self {
        Self {
            cells: cfg.cells,
            cfl: cfg.cfl,
            controller: cfg.controller,
            boundary_terms: cfg.boundary_terms,
            observer_init: cfg.observer_init,
            kernel_n: cfg.kernel_n,
            kernel_tol: cfg.kernel_tol,
            weights: cfg.weights,
        }
    }
}

/// Dense triangular index over cell pairs `(i, j)`, `j ≤ i`.
fn tri_idx(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

fn l2_norm(dx: f64, v: &[f64]) -> f64 {
    (dx * v.iter().map(|a| a * a).sum::<f64>()).sqrt()
}

/// Shared per-step data of the upwind update.
struct StepContext<'a> {
    f1: f64,
    f2: f64,
    fw: f64,
    dt: f64,
    sigma: [[f64; 2]; 2],
    alpha_c: &'a [f64],
    th1_c: &'a [f64],
    th2_c: &'a [f64],
}

/// One first-order upwind + explicit-source update of a `(u₁, u₂, w)` triple
/// with given boundary closures and optional per-cell injection sources.
fn upwind_step(
    ctx: &StepContext<'_>,
    s: &PlantState,
    left1: f64,
    left2: f64,
    right_w: f64,
    inj: Option<(&[Vec<f64>; 3], f64)>,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = s.u1.len();
    let mut u1 = Vec::with_capacity(n);
    let mut u2 = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for j in 0..n {
        let up1 = if j == 0 { left1 } else { s.u1[j - 1] };
        let up2 = if j == 0 { left2 } else { s.u2[j - 1] };
        let dn = if j == n - 1 { right_w } else { s.w[j + 1] };
        let mut src1 =
            ctx.sigma[0][0] * s.u1[j] + ctx.sigma[0][1] * s.u2[j] + ctx.alpha_c[j] * s.w[j];
        let mut src2 =
            ctx.sigma[1][0] * s.u1[j] + ctx.sigma[1][1] * s.u2[j] + ctx.alpha_c[j] * s.w[j];
        let mut srcw = ctx.th1_c[j] * s.u1[j] + ctx.th2_c[j] * s.u2[j];
        if let Some((g, v)) = inj {
            src1 += g[0][j] * v;
            src2 += g[1][j] * v;
            srcw += g[2][j] * v;
        }
        u1.push(s.u1[j] - ctx.f1 * (s.u1[j] - up1) + ctx.dt * src1);
        u2.push(s.u2[j] - ctx.f2 * (s.u2[j] - up2) + ctx.dt * src2);
        w.push(s.w[j] + ctx.fw * (dn - s.w[j]) + ctx.dt * srcw);
    }
    (u1, u2, w)
}

/// The time-stepping core.  It works on abstract transport coefficients, so
/// synthetic zero-coupling cases drive exactly the same code paths as the
/// physically derived channel model; [`run`] layers the physical setup,
/// initial data, and reporting on top.
pub struct Engine {
    coeffs: AbstractCoefficients,
    opts: EngineOptions,
    dx: f64,
    dt: f64,
    f1: f64,
    f2: f64,
    fw: f64,
    t: f64,
    xc: Vec<f64>,
    alpha_c: Vec<f64>,
    th1_c: Vec<f64>,
    th2_c: Vec<f64>,
    plant: PlantState,
    observer: Option<PlantState>,
    controller_kernels: Option<KernelSolution>,
    observer_kernels: Option<KernelSolution>,
    gains: Option<ObserverGains>,
    /// Control-law kernel row `k_m(1, x_j)` at cell centers.
    ctrl_row: Option<[Vec<f64>; 3]>,
    /// Transform kernels `k_m(x_i, x_j)` at cell pairs, triangular-packed.
    ctrl_tri: Option<[Vec<f64>; 3]>,
    /// Inverse observer kernels `r_m(x_i, x_j)` at cell pairs.
    err_tri: Option<[Vec<f64>; 3]>,
    /// Injection gains `p_m(x_j)` at cell centers.
    gains_c: Option<[Vec<f64>; 3]>,
}

impl Engine {
    /// Builds an engine, solving whatever kernels the controller mode needs.
    pub fn new(
        coeffs: AbstractCoefficients,
        initial: PlantState,
        opts: &EngineOptions,
    ) -> Result<Self, SimError> {
        let (ctrl, obs) = match opts.controller {
            Controller::None => (None, None),
            Controller::FullState => {
                let sopts = SolverOptions {
                    tol: opts.kernel_tol,
                    ..SolverOptions::default()
                };
                (
                    Some(solve_controller_kernels(&coeffs, opts.kernel_n, &sopts)?),
                    None,
                )
            }
            Controller::OutputFeedback => {
                let sopts = SolverOptions {
                    tol: opts.kernel_tol,
                    ..SolverOptions::default()
                };
                (
                    Some(solve_controller_kernels(&coeffs, opts.kernel_n, &sopts)?),
                    Some(solve_observer_kernels(&coeffs, opts.kernel_n, &sopts)?),
                )
            }
        };
        Self::with_kernels(coeffs, initial, opts, ctrl, obs)
    }

    /// Builds an engine around presolved kernels (shared across runs at
    /// different cell counts, or synthetic fields in verification).
    pub fn with_kernels(
        coeffs: AbstractCoefficients,
        initial: PlantState,
        opts: &EngineOptions,
        controller_kernels: Option<KernelSolution>,
        observer_kernels: Option<KernelSolution>,
    ) -> Result<Self, SimError> {
        if opts.cells < 10 {
            return Err(SimError::Config(format!(
                "cells must be at least 10, got {}",
                opts.cells
            )));
        }
        if !(opts.cfl > 0.0 && opts.cfl <= 1.0) {
            return Err(SimError::Config(format!(
                "cfl must lie in (0, 1], got {}",
                opts.cfl
            )));
        }
        if !coeffs.speeds_valid() {
            return Err(SimError::Config(
                "transport speeds must be positive and finite".into(),
            ));
        }
        if !opts.weights.valid() {
            return Err(SimError::Config(
                "Lyapunov weights must all be positive".into(),
            ));
        }
        let n = opts.cells;
        if initial.u1.len() != n || initial.u2.len() != n || initial.w.len() != n {
            return Err(SimError::Config(format!(
                "initial state has {} cells, config says {}",
                initial.u1.len(),
                n
            )));
        }
        if opts.controller != Controller::None && controller_kernels.is_none() {
            return Err(SimError::Config(
                "feedback controller requested without controller kernels".into(),
            ));
        }
        if opts.controller == Controller::OutputFeedback && observer_kernels.is_none() {
            return Err(SimError::Config(
                "output feedback requested without observer kernels".into(),
            ));
        }

        let dx = 1.0 / n as f64;
        let vmax = coeffs.max_speed();
        // Courant factors as cfl·(speed/vmax): the limiting component gets
        // exactly cfl, so cfl = 1 yields a bitwise-exact transport shift.
        let f1 = opts.cfl * (coeffs.gamma1 / vmax);
        let f2 = opts.cfl * (coeffs.gamma2 / vmax);
        let fw = opts.cfl * (coeffs.mu / vmax);
        let dt = opts.cfl * dx / vmax;
        let xc: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) * dx).collect();
        let alpha_c: Vec<f64> = xc.iter().map(|&x| coeffs.alpha.value(x)).collect();
        let th1_c: Vec<f64> = xc.iter().map(|&x| coeffs.theta1.value(x)).collect();
        let th2_c: Vec<f64> = xc.iter().map(|&x| coeffs.theta2.value(x)).collect();

        let (ctrl_row, ctrl_tri) = match &controller_kernels {
            None => (None, None),
            Some(sol) => {
                let row = [0, 1, 2].map(|m| {
                    xc.iter()
                        .map(|&z| sol.field.interp(m, 1.0, z))
                        .collect::<Vec<f64>>()
                });
                let tri = [0, 1, 2].map(|m| {
                    let mut v = Vec::with_capacity(tri_idx(n - 1, n - 1) + 1);
                    for i in 0..n {
                        for j in 0..=i {
                            v.push(sol.field.interp(m, xc[i], xc[j]));
                        }
                    }
                    v
                });
                (Some(row), Some(tri))
            }
        };
        let (gains, gains_c, err_tri) = match &observer_kernels {
            None => (None, None, None),
            Some(sol) => {
                let g = observer_gains(&sol.field, coeffs.mu);
                let gc = [&g.p1, &g.p2, &g.p3]
                    .map(|p| xc.iter().map(|&z| sol.field.grid.interp_axis(p, z)).collect());
                let inv = observer_inverse_kernels(&sol.field);
                let tri = [0, 1, 2].map(|m| {
                    let mut v = Vec::with_capacity(tri_idx(n - 1, n - 1) + 1);
                    for i in 0..n {
                        for j in 0..=i {
                            v.push(inv.interp(m, xc[i], xc[j]));
                        }
                    }
                    v
                });
                (Some(g), Some(gc), Some(tri))
            }
        };
        let observer = match opts.controller {
            Controller::OutputFeedback => Some(match opts.observer_init {
                ObserverInit::Zero => PlantState::zeros(n),
                ObserverInit::PlantCopy => initial.clone(),
            }),
            _ => None,
        };

        Ok(Self {
            coeffs,
            opts: *opts,
            dx,
            dt,
            f1,
            f2,
            fw,
            t: initial.t,
            xc,
            alpha_c,
            th1_c,
            th2_c,
            plant: initial,
            observer,
            controller_kernels,
            observer_kernels,
            gains,
            ctrl_row,
            ctrl_tri,
            err_tri,
            gains_c,
        })
    }

    pub fn cell_centers(&self) -> &[f64] {
        &self.xc
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Nominal step respecting the Courant bound at the configured number.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn plant(&self) -> &PlantState {
        &self.plant
    }

    pub fn observer(&self) -> Option<&PlantState> {
        self.observer.as_ref()
    }

    pub fn controller_kernels(&self) -> Option<&KernelSolution> {
        self.controller_kernels.as_ref()
    }

    pub fn observer_kernels(&self) -> Option<&KernelSolution> {
        self.observer_kernels.as_ref()
    }

    pub fn gains(&self) -> Option<&ObserverGains> {
        self.gains.as_ref()
    }

    /// Kernel-weighted midpoint integral `Δx Σ_j [k₁(1,x_j)a + k₂(1,x_j)b +
    /// k₃(1,x_j)c]` of arbitrary cell fields.
    fn control_integral(&self, u1: &[f64], u2: &[f64], w: &[f64]) -> f64 {
        let row = self
            .ctrl_row
            .as_ref()
            .expect("control integral requires controller kernels");
        let mut acc = 0.0;
        for j in 0..self.opts.cells {
            acc += row[0][j] * u1[j] + row[1][j] * u2[j] + row[2][j] * w[j];
        }
        self.dx * acc
    }

    /// Feedback value for the current state under the configured law.
    pub fn control(&self) -> f64 {
        match self.opts.controller {
            Controller::None => 0.0,
            Controller::FullState => {
                let p = &self.plant;
                let last = self.opts.cells - 1;
                let integral = self.control_integral(&p.u1, &p.u2, &p.w);
                -self.coeffs.rho1 * p.u1[last] - self.coeffs.rho2 * p.u2[last] + integral
            }
            Controller::OutputFeedback => {
                let o = self.observer.as_ref().expect("observer state");
                let last = self.opts.cells - 1;
                let integral = self.control_integral(&o.u1, &o.u2, &o.w);
                let (b1, b2) = match self.opts.boundary_terms {
                    BoundaryTerms::Measured => (self.plant.u1[last], self.plant.u2[last]),
                    BoundaryTerms::Estimated => (o.u1[last], o.u2[last]),
                };
                -self.coeffs.rho1 * b1 - self.coeffs.rho2 * b2 + integral
            }
        }
    }

    /// Boundary trace values `(u₁, u₂, w)` at `x = 0` and `x = 1` implied by
    /// the discrete closures for a given control value.
    pub fn boundary_values(&self, u_ctrl: f64) -> ([f64; 3], [f64; 3]) {
        let p = &self.plant;
        let last = self.opts.cells - 1;
        let w0 = p.w[0];
        let left = [self.coeffs.q1 * w0, self.coeffs.q2 * w0, w0];
        let right = [
            p.u1[last],
            p.u2[last],
            self.coeffs.rho1 * p.u1[last] + self.coeffs.rho2 * p.u2[last] + u_ctrl,
        ];
        (left, right)
    }

    /// Backstepping image `χ(x_i) = w(x_i) − Δx Σ_{j≤i} [k₁u₁ + k₂u₂ + k₃w]`
    /// of the plant state; `None` without controller kernels.
    pub fn target_chi(&self) -> Option<Vec<f64>> {
        let tri = self.ctrl_tri.as_ref()?;
        let p = &self.plant;
        let mut chi = Vec::with_capacity(self.opts.cells);
        for i in 0..self.opts.cells {
            let mut acc = 0.0;
            for j in 0..=i {
                let q = tri_idx(i, j);
                acc += tri[0][q] * p.u1[j] + tri[1][q] * p.u2[j] + tri[2][q] * p.w[j];
            }
            chi.push(p.w[i] - self.dx * acc);
        }
        Some(chi)
    }

    /// Observer-error target variables `(π̃₁, π̃₂, φ̃)` through the inverse
    /// kernels; `None` without an observer.
    fn error_target(&self) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let tri = self.err_tri.as_ref()?;
        let o = self.observer.as_ref()?;
        let p = &self.plant;
        let n = self.opts.cells;
        let wt: Vec<f64> = (0..n).map(|j| p.w[j] - o.w[j]).collect();
        let mut pi1 = Vec::with_capacity(n);
        let mut pi2 = Vec::with_capacity(n);
        let mut phi = Vec::with_capacity(n);
        for i in 0..n {
            let (mut a1, mut a2, mut a3) = (0.0, 0.0, 0.0);
            for j in 0..=i {
                let q = tri_idx(i, j);
                a1 += tri[0][q] * wt[j];
                a2 += tri[1][q] * wt[j];
                a3 += tri[2][q] * wt[j];
            }
            pi1.push(p.u1[i] - o.u1[i] + self.dx * a1);
            pi2.push(p.u2[i] - o.u2[i] + self.dx * a2);
            phi.push(wt[i] + self.dx * a3);
        }
        Some((pi1, pi2, phi))
    }

    /// Advances plant (and observer) by `dt`, which must respect the
    /// transport stability bound.  Returns the control and output used.
    pub fn advance(&mut self, dt: f64) -> Result<StepInfo, SimError> {
        let bound = self.dx / self.coeffs.max_speed();
        if !(dt > 0.0) || dt > bound * (1.0 + 1e-9) {
            return Err(SimError::CflViolation { dt, bound });
        }
        // Reuse the precomputed factors on the nominal step so the unit
        // Courant case stays a bitwise shift; a truncated step recomputes.
        let (f1, f2, fw) = if dt == self.dt {
            (self.f1, self.f2, self.fw)
        } else {
            (
                self.coeffs.gamma1 * dt / self.dx,
                self.coeffs.gamma2 * dt / self.dx,
                self.coeffs.mu * dt / self.dx,
            )
        };
        let ctx = StepContext {
            f1,
            f2,
            fw,
            dt,
            sigma: self.coeffs.sigma,
            alpha_c: &self.alpha_c,
            th1_c: &self.th1_c,
            th2_c: &self.th2_c,
        };
        let u_ctrl = self.control();
        let y = self.plant.w[0];
        let last = self.opts.cells - 1;
        let w_right =
            self.coeffs.rho1 * self.plant.u1[last] + self.coeffs.rho2 * self.plant.u2[last] + u_ctrl;
        let (p1, p2, pw) = upwind_step(
            &ctx,
            &self.plant,
            self.coeffs.q1 * y,
            self.coeffs.q2 * y,
            w_right,
            None,
        );
        if let Some(obs) = &self.observer {
            let gains = self.gains_c.as_ref().expect("gains with observer");
            let inj = y - obs.w[0];
            let o_right =
                self.coeffs.rho1 * obs.u1[last] + self.coeffs.rho2 * obs.u2[last] + u_ctrl;
            let (o1, o2, ow) = upwind_step(
                &ctx,
                obs,
                self.coeffs.q1 * y,
                self.coeffs.q2 * y,
                o_right,
                Some((gains, inj)),
            );
            let obs = self.observer.as_mut().unwrap();
            obs.u1 = o1;
            obs.u2 = o2;
            obs.w = ow;
        }
        self.plant.u1 = p1;
        self.plant.u2 = p2;
        self.plant.w = pw;
        self.t += dt;
        self.plant.t = self.t;
        if let Some(obs) = self.observer.as_mut() {
            obs.t = self.t;
        }
        Ok(StepInfo { u: u_ctrl, y })
    }

    /// Trace row for the current state.
    pub fn record(&self) -> TraceRecord {
        let u_ctrl = self.control();
        let y = self.plant.w[0];
        let p = &self.plant;
        let (mut v1, mut chi_sup, mut chi_right) = (None, None, None);
        if self.ctrl_tri.is_some() {
            let chi = self.target_chi().unwrap();
            v1 = Some(lyapunov_v1(
                &self.xc,
                &p.u1,
                &p.u2,
                &chi,
                &self.opts.weights,
                self.coeffs.gamma1,
                self.coeffs.gamma2,
                self.coeffs.mu,
            ));
            chi_sup = Some(chi.iter().fold(0.0f64, |a, &c| a.max(c.abs())));
            let last = self.opts.cells - 1;
            let w_right = self.coeffs.rho1 * p.u1[last] + self.coeffs.rho2 * p.u2[last] + u_ctrl;
            chi_right = Some(w_right - self.control_integral(&p.u1, &p.u2, &p.w));
        }
        let (mut v2, mut obs_err) = (None, None);
        if let Some(o) = &self.observer {
            let n = self.opts.cells;
            let mut acc = 0.0;
            for j in 0..n {
                let d1 = p.u1[j] - o.u1[j];
                let d2 = p.u2[j] - o.u2[j];
                let d3 = p.w[j] - o.w[j];
                acc += d1 * d1 + d2 * d2 + d3 * d3;
            }
            obs_err = Some((self.dx * acc).sqrt());
            let (pi1, pi2, phi) = self.error_target().unwrap();
            v2 = Some(lyapunov_v2(
                &self.xc,
                &pi1,
                &pi2,
                &phi,
                &self.opts.weights,
                self.coeffs.gamma1,
                self.coeffs.gamma2,
                self.coeffs.mu,
            ));
        }
        TraceRecord {
            t: self.t,
            u: u_ctrl,
            y,
            norm_u1: l2_norm(self.dx, &p.u1),
            norm_u2: l2_norm(self.dx, &p.u2),
            norm_w: l2_norm(self.dx, &p.w),
            v1,
            v2,
            obs_err,
            chi_sup,
            chi_right,
        }
    }
}

/// Initial physical data: the reference bed bump
/// `B(0,x) = 0.4(1 + 0.25 e^{−(x−0.5)²/0.003})` under the free surface
/// `H(0,x) = 2.5 − B(0,x)` with velocity `V(0,x) = 10 sin(πx)/H(0,x)`.
fn initial_profiles(xc: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let b: Vec<f64> = xc
        .iter()
        .map(|&x| 0.4 * (1.0 + 0.25 * (-(x - 0.5) * (x - 0.5) / 0.003).exp()))
        .collect();
    let h: Vec<f64> = b.iter().map(|&bi| 2.5 - bi).collect();
    let v: Vec<f64> = xc
        .iter()
        .zip(&h)
        .map(|(&x, &hi)| 10.0 * (std::f64::consts::PI * x).sin() / hi)
        .collect();
    (b, h, v)
}

/// Samples the reference initial condition at cell centers, forms deviations
/// against the configured equilibrium, and maps them into the rescaled
/// characteristic variables `(u₁, u₂, w)`.
pub fn init_state(cfg: &SimConfig) -> Result<PlantState, SimError> {
    cfg.validate()?;
    let sp = spectrum(&cfg.setup)?;
    let cc = char_coefficients(&cfg.setup, &sp)?;
    let dx = 1.0 / cfg.cells as f64;
    let xc: Vec<f64> = (0..cfg.cells).map(|j| (j as f64 + 0.5) * dx).collect();
    let (b, h, v) = initial_profiles(&xc);
    let dh: Vec<f64> = h.iter().map(|&x| x - cfg.setup.hstar).collect();
    let du: Vec<f64> = v.iter().map(|&x| x - cfg.setup.vstar).collect();
    let db: Vec<f64> = b.iter().map(|&x| x - cfg.setup.bstar).collect();
    let field = to_characteristic(&cfg.setup, &sp, &xc, &dh, &du, &db)?;
    let w = rescale_w(&cc, &xc, &field.v);
    Ok(PlantState {
        t: 0.0,
        u1: field.u1,
        u2: field.u2,
        w,
    })
}

fn take_snapshot(
    engine: &Engine,
    setup: &EquilibriumSetup,
    sp: &Spectrum,
    cc: &CharCoefficients,
) -> Result<Snapshot, SimError> {
    let xc = engine.cell_centers().to_vec();
    let p = engine.plant();
    let v = unrescale_w(cc, &xc, &p.w);
    let field = CharField {
        x: xc.clone(),
        u1: p.u1.clone(),
        u2: p.u2.clone(),
        v: v.clone(),
    };
    let (h, u, b) = from_characteristic(setup, sp, &field)?;
    Ok(Snapshot {
        t: engine.time(),
        x: xc,
        u1: p.u1.clone(),
        u2: p.u2.clone(),
        w: p.w.clone(),
        v,
        h,
        u,
        b,
        observer: engine
            .observer()
            .map(|o| (o.u1.clone(), o.u2.clone(), o.w.clone())),
    })
}

/// Integrates a configured channel run from `t = 0` to `t_final`, recording
/// a trace row per step, ten uniformly spaced snapshots, and a downsampled
/// space-time history.  Deterministic for a given config.
pub fn run(cfg: &SimConfig) -> Result<RunOutput, SimError> {
    cfg.validate()?;
    let sp = spectrum(&cfg.setup)?;
    let cc = char_coefficients(&cfg.setup, &sp)?;
    let coeffs = AbstractCoefficients::from_channel(&cfg.setup, &cc);
    let initial = init_state(cfg)?;
    let mut engine = Engine::new(coeffs, initial, &EngineOptions::from(cfg))?;

    let dt = engine.dt();
    let steps = (cfg.t_final / dt - 1e-12).ceil() as usize;
    let stride = (steps + 255) / 255;

    let mut trace = Vec::with_capacity(steps + 1);
    let mut snapshots = Vec::with_capacity(10);
    let mut heat = HeatHistory::default();
    let snap_due = |k: usize, t: f64| t >= (k as f64) * cfg.t_final / 9.0 - 1e-9 * cfg.t_final;
    let mut next_snap = 0usize;

    let push_heat = |heat: &mut HeatHistory, e: &Engine| {
        heat.times.push(e.time());
        heat.u1.push(e.plant().u1.clone());
        heat.u2.push(e.plant().u2.clone());
        heat.w.push(e.plant().w.clone());
    };

    let rec = engine.record();
    if !engine.plant().is_finite() {
        return Err(SimError::NonFinite { t: engine.time() });
    }
    trace.push(rec);
    push_heat(&mut heat, &engine);
    while next_snap < 10 && snap_due(next_snap, engine.time()) {
        snapshots.push(take_snapshot(&engine, &cfg.setup, &sp, &cc)?);
        next_snap += 1;
    }

    for step in 0..steps {
        let remaining = cfg.t_final - engine.time();
        if remaining <= 0.0 {
            break;
        }
        let dtk = dt.min(remaining);
        engine.advance(dtk)?;
        if !engine.plant().is_finite() {
            return Err(SimError::NonFinite { t: engine.time() });
        }
        trace.push(engine.record());
        if (step + 1) % stride == 0 || step + 1 == steps {
            push_heat(&mut heat, &engine);
        }
        while next_snap < 10 && snap_due(next_snap, engine.time()) {
            snapshots.push(take_snapshot(&engine, &cfg.setup, &sp, &cc)?);
            next_snap += 1;
        }
    }
    while next_snap < 10 {
        snapshots.push(take_snapshot(&engine, &cfg.setup, &sp, &cc)?);
        next_snap += 1;
    }

    Ok(RunOutput {
        spectrum: sp,
        char_coeffs: cc,
        dx: engine.dx(),
        dt,
        steps,
        controller_kernels: engine.controller_kernels.take(),
        observer_kernels: engine.observer_kernels.take(),
        gains: engine.gains.take(),
        trace,
        snapshots,
        heat,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12e}")).unwrap_or_default()
}

/// Writes the per-step trace as CSV; inapplicable fields stay empty.
pub fn write_trace_csv<W: Write>(trace: &[TraceRecord], out: &mut W) -> io::Result<()> {
    writeln!(out, "t,U,y,norm_u1,norm_u2,norm_w,V1,V2,obs_err,chi_sup")?;
    for r in trace {
        writeln!(
            out,
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{},{},{}",
            r.t,
            r.u,
            r.y,
            r.norm_u1,
            r.norm_u2,
            r.norm_w,
            fmt_opt(r.v1),
            fmt_opt(r.v2),
            fmt_opt(r.obs_err),
            fmt_opt(r.chi_sup),
        )?;
    }
    Ok(())
}

impl Snapshot {
    /// Writes all fields of one snapshot as CSV, observer columns included
    /// when present.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        if self.observer.is_some() {
            writeln!(out, "x,u1,u2,w,v,h,u,b,u1_hat,u2_hat,w_hat")?;
        } else {
            writeln!(out, "x,u1,u2,w,v,h,u,b")?;
        }
        for j in 0..self.x.len() {
            write!(
                out,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                self.x[j],
                self.u1[j],
                self.u2[j],
                self.w[j],
                self.v[j],
                self.h[j],
                self.u[j],
                self.b[j],
            )?;
            if let Some((o1, o2, ow)) = &self.observer {
                write!(out, ",{:.12e},{:.12e},{:.12e}", o1[j], o2[j], ow[j])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TriangleGrid;
    use crate::kernels::{KernelField, KernelRole};

    fn table1_coeffs() -> (EquilibriumSetup, AbstractCoefficients) {
        let setup = crate::characteristics::tests::table1();
        let sp = spectrum(&setup).unwrap();
        let cc = char_coefficients(&setup, &sp).unwrap();
        (setup, AbstractCoefficients::from_channel(&setup, &cc))
    }

    fn table2_coeffs() -> (EquilibriumSetup, AbstractCoefficients) {
        let setup = crate::characteristics::tests::table2();
        let sp = spectrum(&setup).unwrap();
        let cc = char_coefficients(&setup, &sp).unwrap();
        (setup, AbstractCoefficients::from_channel(&setup, &cc))
    }

    fn opts(cells: usize, cfl: f64, controller: Controller) -> EngineOptions {
        EngineOptions {
            cells,
            cfl,
            controller,
            kernel_n: 101,
            ..EngineOptions::default()
        }
    }

    #[test]
    fn config_validation_rejects_bad_fields() {
        let setup = crate::characteristics::tests::table1();
        let base = SimConfig::new(setup);
        assert!(base.validate().is_ok());
        for bad in [
            SimConfig { cells: 5, ..base.clone() },
            SimConfig { cfl: 0.0, ..base.clone() },
            SimConfig { cfl: 1.5, ..base.clone() },
            SimConfig { t_final: -1.0, ..base.clone() },
            SimConfig { kernel_n: 2, ..base.clone() },
            SimConfig { kernel_tol: 0.0, ..base.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(SimError::Config(_))));
        }
    }

    #[test]
    fn initial_data_point_values() {
        // 25 cells put a center exactly at x = 0.5, the crest of the bump:
        // B = 0.4·1.25 = 0.5, H = 2.5 − 0.5 = 2, V = 10·sin(π/2)/2 = 5.
        let xc: Vec<f64> = (0..25).map(|j| (j as f64 + 0.5) / 25.0).collect();
        let (b, h, v) = initial_profiles(&xc);
        assert_eq!(xc[12], 0.5);
        assert!((b[12] - 0.5).abs() < 1e-15);
        assert!((h[12] - 2.0).abs() < 1e-15);
        assert!((v[12] - 5.0).abs() < 1e-14);
        // The bump is a near-flat tail at the walls: B(0) ≈ 0.4.
        assert!((b[0] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn init_state_round_trips_to_physical_deviations() {
        let setup = crate::characteristics::tests::table1();
        let cfg = SimConfig {
            cells: 50,
            ..SimConfig::new(setup)
        };
        let state = init_state(&cfg).unwrap();
        let sp = spectrum(&cfg.setup).unwrap();
        let cc = char_coefficients(&cfg.setup, &sp).unwrap();
        let dx = 1.0 / 50.0;
        let xc: Vec<f64> = (0..50).map(|j| (j as f64 + 0.5) * dx).collect();
        let v = unrescale_w(&cc, &xc, &state.w);
        let field = CharField {
            x: xc.clone(),
            u1: state.u1.clone(),
            u2: state.u2.clone(),
            v,
        };
        let (h, u, b) = from_characteristic(&cfg.setup, &sp, &field).unwrap();
        let (b0, h0, v0) = initial_profiles(&xc);
        for j in 0..50 {
            assert!((h[j] - (h0[j] - cfg.setup.hstar)).abs() < 1e-12);
            assert!((u[j] - (v0[j] - cfg.setup.vstar)).abs() < 1e-12);
            assert!((b[j] - (b0[j] - cfg.setup.bstar)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_state_stays_zero_under_feedback() {
        let (_, coeffs) = table1_coeffs();
        let mut e = Engine::new(
            coeffs,
            PlantState::zeros(20),
            &opts(20, 0.9, Controller::FullState),
        )
        .unwrap();
        for _ in 0..25 {
            let info = e.advance(e.dt()).unwrap();
            assert_eq!(info.u, 0.0);
            assert_eq!(info.y, 0.0);
        }
        assert!(e.plant().u1.iter().all(|&v| v == 0.0));
        assert!(e.plant().w.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_courant_is_exact_shift() {
        // Equal speeds, zero couplings, q = ρ = 0, cfl = 1: the upwind
        // update degenerates to a pure index shift, bit for bit (the profile
        // stays within a Sterbenz band, so the subtractions are exact).
        let coeffs = AbstractCoefficients::decoupled(1.0, 1.0, 1.0);
        let n = 64;
        let mut init = PlantState::zeros(n);
        let dx = 1.0 / n as f64;
        for j in 0..n {
            let x = (j as f64 + 0.5) * dx;
            let p = 0.75 + 0.25 * (2.0 * std::f64::consts::PI * x).sin();
            init.w[j] = p;
            init.u1[j] = p;
        }
        let before = init.clone();
        let mut e = Engine::new(coeffs, init, &opts(n, 1.0, Controller::None)).unwrap();
        e.advance(e.dt()).unwrap();
        let after = e.plant();
        for j in 0..n - 1 {
            assert_eq!(after.w[j], before.w[j + 1], "w shift at {j}");
        }
        assert_eq!(after.w[n - 1], 0.0);
        for j in 1..n {
            assert_eq!(after.u1[j], before.u1[j - 1], "u1 shift at {j}");
        }
        assert_eq!(after.u1[0], 0.0);
    }

    #[test]
    fn transport_converges_at_first_order() {
        // Pure leftward transport of a narrow bump: L¹ error against the
        // exact translate decays with order ≥ 0.8 across 100/200/400 cells.
        let coeffs = AbstractCoefficients::decoupled(1.0, 1.0, 1.0);
        let profile = |x: f64| (-(x - 0.5) * (x - 0.5) / 0.008).exp();
        let l1_err = |cells: usize| -> f64 {
            let dx = 1.0 / cells as f64;
            let mut init = PlantState::zeros(cells);
            for j in 0..cells {
                init.w[j] = profile((j as f64 + 0.5) * dx);
            }
            let mut e = Engine::new(coeffs, init, &opts(cells, 0.5, Controller::None)).unwrap();
            let t_final = 0.1;
            let mut t = 0.0;
            while t < t_final - 1e-12 {
                let dtk = e.dt().min(t_final - t);
                e.advance(dtk).unwrap();
                t += dtk;
            }
            let mut err = 0.0;
            for j in 0..cells {
                let x = (j as f64 + 0.5) * dx;
                err += (e.plant().w[j] - profile(x + t_final)).abs() * dx;
            }
            err
        };
        let (e100, e200, e400) = (l1_err(100), l1_err(200), l1_err(400));
        let o1 = (e100 / e200).log2();
        let o2 = (e200 / e400).log2();
        assert!(o1 >= 0.8 && o2 >= 0.8, "orders {o1:.2} {o2:.2}");
    }

    #[test]
    fn outflow_transport_is_monotone() {
        // Controller off, couplings zero, q = ρ = 0: each component is a
        // damped shift, so sup norms never grow (discrete CFL safety).
        let coeffs = AbstractCoefficients::decoupled(1.3, 0.7, 2.6);
        let n = 40;
        let mut init = PlantState::zeros(n);
        for j in 0..n {
            let x = (j as f64 + 0.5) / n as f64;
            init.u1[j] = (3.0 * x).sin();
            init.u2[j] = (5.0 * x).cos();
            init.w[j] = (2.0 * x).sin() - 0.3;
        }
        let mut e = Engine::new(coeffs, init, &opts(n, 0.85, Controller::None)).unwrap();
        let sup = |v: &[f64]| v.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let mut prev = [
            sup(&e.plant().u1),
            sup(&e.plant().u2),
            sup(&e.plant().w),
        ];
        for _ in 0..80 {
            e.advance(e.dt()).unwrap();
            let cur = [
                sup(&e.plant().u1),
                sup(&e.plant().u2),
                sup(&e.plant().w),
            ];
            for m in 0..3 {
                assert!(cur[m] <= prev[m] * (1.0 + 1e-14), "component {m} grew");
            }
            prev = cur;
        }
    }

    #[test]
    fn control_law_boundary_terms_without_kernels() {
        // Zero couplings solve to zero kernels, so only the ρ-terms remain:
        // u₁(1) = 2, u₂(1) = −1, ρ₁ = ρ₂ = 1.5 → U = −3 + 1.5 = −1.5.
        let coeffs = AbstractCoefficients {
            rho1: 1.5,
            rho2: 1.5,
            ..AbstractCoefficients::decoupled(1.0, 1.0, 1.0)
        };
        let n = 10;
        let mut init = PlantState::zeros(n);
        init.u1.iter_mut().for_each(|v| *v = 2.0);
        init.u2.iter_mut().for_each(|v| *v = -1.0);
        let e = Engine::new(coeffs, init, &opts(n, 0.9, Controller::FullState)).unwrap();
        assert_eq!(e.control(), -1.5);
    }

    #[test]
    fn control_law_constant_kernels_integrate_to_two() {
        // Constant kernels (−1, 0, −1) against u₁ ≡ 1, w ≡ 1, ρ = 0:
        // U = ∫(−1·1 + −1·1) = −2 with the midpoint rule (up to round-off
        // of Δx·Σ, a few ulps).
        let coeffs = AbstractCoefficients::decoupled(1.0, 1.0, 1.0);
        let n = 100;
        let grid = TriangleGrid::new(11).unwrap();
        let field = KernelField {
            grid,
            k: [
                vec![-1.0; grid.len()],
                vec![0.0; grid.len()],
                vec![-1.0; grid.len()],
            ],
            role: KernelRole::Controller,
        };
        let sol = KernelSolution {
            field,
            iterations: 1,
            change_history: vec![0.0],
        };
        let mut init = PlantState::zeros(n);
        init.u1.iter_mut().for_each(|v| *v = 1.0);
        init.w.iter_mut().for_each(|v| *v = 1.0);
        let e = Engine::with_kernels(
            coeffs,
            init,
            &opts(n, 0.9, Controller::FullState),
            Some(sol),
            None,
        )
        .unwrap();
        assert!((e.control() + 2.0).abs() < 1e-12, "{}", e.control());
    }

    #[test]
    fn chi_right_cancels_under_full_state_feedback() {
        let (_, coeffs) = table1_coeffs();
        let setup = crate::characteristics::tests::table1();
        let cfg = SimConfig {
            cells: 40,
            cfl: 0.95,
            t_final: 0.5,
            kernel_n: 101,
            ..SimConfig::new(setup)
        };
        let initial = init_state(&cfg).unwrap();
        let mut e = Engine::new(coeffs, initial, &EngineOptions::from(&cfg)).unwrap();
        for _ in 0..60 {
            let rec = e.record();
            let scale = rec.norm_u1 + rec.norm_u2 + rec.norm_w;
            assert!(
                rec.chi_right.unwrap().abs() <= 1e-10 * scale.max(1.0),
                "chi(1) = {:?} at t = {}",
                rec.chi_right,
                rec.t
            );
            e.advance(e.dt()).unwrap();
        }
    }

    #[test]
    fn observer_copy_tracks_plant_exactly() {
        let (_, coeffs) = table2_coeffs();
        let setup = crate::characteristics::tests::table2();
        let cfg = SimConfig {
            cells: 30,
            t_final: 0.5,
            controller: Controller::OutputFeedback,
            observer_init: ObserverInit::PlantCopy,
            kernel_n: 101,
            ..SimConfig::new(setup)
        };
        let initial = init_state(&cfg).unwrap();
        let mut e = Engine::new(coeffs, initial, &EngineOptions::from(&cfg)).unwrap();
        for _ in 0..50 {
            e.advance(e.dt()).unwrap();
            let rec = e.record();
            assert_eq!(rec.obs_err, Some(0.0));
        }
    }

    #[test]
    fn direct_error_system_matches_paired_difference() {
        // Evolve (plant − observer) directly with the error dynamics
        // (zero left ghosts, ρ-reflection right ghost, −p injection) and
        // compare against the paired closed-loop run: both are the same
        // linear recursion up to floating-point reassociation.
        let (_, coeffs) = table2_coeffs();
        let setup = crate::characteristics::tests::table2();
        let cells = 40;
        let cfg = SimConfig {
            cells,
            cfl: 0.9,
            t_final: 1.0,
            controller: Controller::OutputFeedback,
            kernel_n: 101,
            ..SimConfig::new(setup)
        };
        let initial = init_state(&cfg).unwrap();
        let mut e = Engine::new(coeffs, initial.clone(), &EngineOptions::from(&cfg)).unwrap();

        // Direct error state: observer starts at zero, so the error is the
        // initial plant state.
        let dx = 1.0 / cells as f64;
        let xc: Vec<f64> = (0..cells).map(|j| (j as f64 + 0.5) * dx).collect();
        let gains = e.gains().unwrap().clone();
        let kgrid = e.observer_kernels().unwrap().field.grid;
        let gp: [Vec<f64>; 3] = [&gains.p1, &gains.p2, &gains.p3]
            .map(|p| xc.iter().map(|&z| kgrid.interp_axis(p, z)).collect());
        let al: Vec<f64> = xc.iter().map(|&x| coeffs.alpha.value(x)).collect();
        let t1: Vec<f64> = xc.iter().map(|&x| coeffs.theta1.value(x)).collect();
        let t2: Vec<f64> = xc.iter().map(|&x| coeffs.theta2.value(x)).collect();
        let vmax = coeffs.max_speed();
        let (f1, f2, fw) = (
            cfg.cfl * (coeffs.gamma1 / vmax),
            cfg.cfl * (coeffs.gamma2 / vmax),
            cfg.cfl * (coeffs.mu / vmax),
        );
        let dt = cfg.cfl * dx / vmax;
        let (mut e1, mut e2, mut ew) = (initial.u1, initial.u2, initial.w);
        for _ in 0..100 {
            e.advance(dt).unwrap();
            let w0 = ew[0];
            let er = coeffs.rho1 * e1[cells - 1] + coeffs.rho2 * e2[cells - 1];
            let mut n1 = Vec::with_capacity(cells);
            let mut n2 = Vec::with_capacity(cells);
            let mut nw = Vec::with_capacity(cells);
            for j in 0..cells {
                let up1 = if j == 0 { 0.0 } else { e1[j - 1] };
                let up2 = if j == 0 { 0.0 } else { e2[j - 1] };
                let dn = if j == cells - 1 { er } else { ew[j + 1] };
                let s1 = coeffs.sigma[0][0] * e1[j] + coeffs.sigma[0][1] * e2[j] + al[j] * ew[j]
                    - gp[0][j] * w0;
                let s2 = coeffs.sigma[1][0] * e1[j] + coeffs.sigma[1][1] * e2[j] + al[j] * ew[j]
                    - gp[1][j] * w0;
                let sw = t1[j] * e1[j] + t2[j] * e2[j] - gp[2][j] * w0;
                n1.push(e1[j] - f1 * (e1[j] - up1) + dt * s1);
                n2.push(e2[j] - f2 * (e2[j] - up2) + dt * s2);
                nw.push(ew[j] + fw * (dn - ew[j]) + dt * sw);
            }
            e1 = n1;
            e2 = n2;
            ew = nw;
        }
        let (p, o) = (e.plant(), e.observer().unwrap());
        let mut dev = 0.0f64;
        for j in 0..cells {
            dev = dev
                .max((p.u1[j] - o.u1[j] - e1[j]).abs())
                .max((p.u2[j] - o.u2[j] - e2[j]).abs())
                .max((p.w[j] - o.w[j] - ew[j]).abs());
        }
        assert!(dev < 1e-10, "error-system deviation {dev:.3e}");
    }

    #[test]
    fn scaling_initial_state_scales_everything_bitwise() {
        // The whole loop is linear with state-independent coefficients, so
        // doubling the initial data doubles fields, U, and y exactly
        // (power-of-two scaling commutes with every rounding).
        let (_, coeffs) = table1_coeffs();
        let setup = crate::characteristics::tests::table1();
        let cfg = SimConfig {
            cells: 30,
            t_final: 0.3,
            kernel_n: 101,
            ..SimConfig::new(setup)
        };
        let initial = init_state(&cfg).unwrap();
        let mut doubled = initial.clone();
        for v in doubled
            .u1
            .iter_mut()
            .chain(doubled.u2.iter_mut())
            .chain(doubled.w.iter_mut())
        {
            *v *= 2.0;
        }
        let mut a = Engine::new(coeffs, initial, &EngineOptions::from(&cfg)).unwrap();
        let mut b = Engine::new(coeffs, doubled, &EngineOptions::from(&cfg)).unwrap();
        for _ in 0..40 {
            let ia = a.advance(a.dt()).unwrap();
            let ib = b.advance(b.dt()).unwrap();
            assert_eq!(2.0 * ia.u, ib.u);
            assert_eq!(2.0 * ia.y, ib.y);
        }
        for j in 0..30 {
            assert_eq!(2.0 * a.plant().u1[j], b.plant().u1[j]);
            assert_eq!(2.0 * a.plant().u2[j], b.plant().u2[j]);
            assert_eq!(2.0 * a.plant().w[j], b.plant().w[j]);
        }
    }

    #[test]
    fn boundary_closures_hold_by_construction() {
        let (_, coeffs) = table1_coeffs();
        let setup = crate::characteristics::tests::table1();
        let cfg = SimConfig {
            cells: 25,
            t_final: 0.2,
            kernel_n: 101,
            ..SimConfig::new(setup)
        };
        let initial = init_state(&cfg).unwrap();
        let mut e = Engine::new(coeffs, initial, &EngineOptions::from(&cfg)).unwrap();
        for _ in 0..20 {
            e.advance(e.dt()).unwrap();
            let u_ctrl = e.control();
            let (left, right) = e.boundary_values(u_ctrl);
            assert_eq!(left[0], coeffs.q1 * left[2]);
            assert_eq!(left[1], coeffs.q2 * left[2]);
            assert_eq!(
                right[2],
                coeffs.rho1 * right[0] + coeffs.rho2 * right[1] + u_ctrl
            );
        }
    }

    #[test]
    fn truncated_final_step_lands_on_t_final() {
        let setup = crate::characteristics::tests::table1();
        let cfg = SimConfig {
            cells: 20,
            t_final: 0.31,
            controller: Controller::None,
            ..SimConfig::new(setup)
        };
        let out = run(&cfg).unwrap();
        let last = out.trace.last().unwrap();
        assert!((last.t - 0.31).abs() < 1e-12, "{}", last.t);
        assert_eq!(out.trace.len(), out.steps + 1);
        assert_eq!(out.snapshots.len(), 10);
        assert!(out.heat.times.len() <= 256);
        assert_eq!(out.snapshots[0].t, 0.0);
        // Without kernels the trace carries no target diagnostics.
        assert!(last.v1.is_none() && last.chi_sup.is_none());
    }

    #[test]
    fn cfl_violation_rejected() {
        let (_, coeffs) = table1_coeffs();
        let mut e = Engine::new(
            coeffs,
            PlantState::zeros(20),
            &opts(20, 0.9, Controller::None),
        )
        .unwrap();
        let bound = e.dx() / coeffs.max_speed();
        assert!(matches!(
            e.advance(bound * 1.01),
            Err(SimError::CflViolation { .. })
        ));
        assert!(matches!(
            e.advance(0.0),
            Err(SimError::CflViolation { .. })
        ));
    }

    #[test]
    fn identical_configs_give_bitwise_identical_traces() {
        let setup = crate::characteristics::tests::table2();
        let cfg = SimConfig {
            cells: 25,
            t_final: 0.4,
            controller: Controller::OutputFeedback,
            kernel_n: 81,
            ..SimConfig::new(setup)
        };
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.snapshots, b.snapshots);
    }

    #[test]
    fn trace_and_snapshot_csv_shapes() {
        let setup = crate::characteristics::tests::table2();
        let cfg = SimConfig {
            cells: 20,
            t_final: 0.2,
            controller: Controller::OutputFeedback,
            kernel_n: 51,
            ..SimConfig::new(setup)
        };
        let out = run(&cfg).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&out.trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,U,y,norm_u1,norm_u2,norm_w,V1,V2,obs_err,chi_sup"
        );
        for line in lines {
            assert_eq!(line.split(',').count(), 10);
        }
        let mut sbuf = Vec::new();
        out.snapshots[3].write_csv(&mut sbuf).unwrap();
        let stext = String::from_utf8(sbuf).unwrap();
        assert!(stext.starts_with("x,u1,u2,w,v,h,u,b,u1_hat,u2_hat,w_hat\n"));
        assert_eq!(stext.lines().count(), 1 + 20);
        // Open-loop runs have no kernels: V1/V2/obs_err/chi_sup columns empty.
        let cfg2 = SimConfig {
            controller: Controller::None,
            ..cfg
        };
        let out2 = run(&cfg2).unwrap();
        let mut buf2 = Vec::new();
        write_trace_csv(&out2.trace, &mut buf2).unwrap();
        let line2 = String::from_utf8(buf2).unwrap();
        let row = line2.lines().nth(1).unwrap().to_string();
        assert!(row.ends_with(",,,,"));
        let mut sbuf2 = Vec::new();
        out2.snapshots[0].write_csv(&mut sbuf2).unwrap();
        assert!(String::from_utf8(sbuf2)
            .unwrap()
            .starts_with("x,u1,u2,w,v,h,u,b\n"));
    }
}
