//! Triangular Volterra operators used by the backstepping transforms.
//!
//! The forward transforms are of the form `(I + K∘)f` with
//! `(K∘f)(x) = ∫₀^x K(x,ξ) f(ξ) dξ`; their inverses are `(I + R∘)` where the
//! resolvent solves
//!
//! ```text
//!     R(x,ξ) = −K(x,ξ) − ∫_ξ^x K(x,s) R(s,ξ) ds.
//! ```
//!
//! This module provides the resolvent on a [`TriangleGrid`], the integral
//! couplings of the two target systems (`κ`, `c` for the full-state design,
//! `h`, `g` for the observer error), and the inverse-transform kernels
//! (`l₁,l₂,l₃` and `r₁,r₂,r₃`).  All integrals use composite trapezoid on the
//! grid nodes; a zero-length integral is 0, and recursions that contain the
//! unknown at an endpoint fold that half-weight into a division.

use crate::coefficients::AbstractCoefficients;
use crate::grid::TriangleGrid;
use crate::kernels::{KernelField, KernelRole};

/// Applies `(I + K∘)` to samples of `f` on the grid's axis nodes.
pub fn volterra_apply(grid: &TriangleGrid, kernel: &[f64], f: &[f64]) -> Vec<f64> {
    let h = grid.h();
    let mut out = Vec::with_capacity(grid.n);
    for i in 0..grid.n {
        let mut acc = 0.0;
        if i > 0 {
            acc += 0.5 * (kernel[grid.idx(i, 0)] * f[0] + kernel[grid.idx(i, i)] * f[i]);
            for j in 1..i {
                acc += kernel[grid.idx(i, j)] * f[j];
            }
        }
        out.push(f[i] + h * acc);
    }
    out
}

/// Resolvent of a packed triangular kernel, marched up each column with the
/// implicit diagonal endpoint divided out, so `(I + K∘)(I + R∘) = I` up to
/// quadrature error.
pub fn volterra_resolvent(grid: &TriangleGrid, kernel: &[f64]) -> Vec<f64> {
    let h = grid.h();
    let mut r = vec![0.0; grid.len()];
    for j in 0..grid.n {
        r[grid.idx(j, j)] = -kernel[grid.idx(j, j)];
        for i in j + 1..grid.n {
            let mut acc = 0.5 * kernel[grid.idx(i, j)] * r[grid.idx(j, j)];
            for s in j + 1..i {
                acc += kernel[grid.idx(i, s)] * r[grid.idx(s, j)];
            }
            r[grid.idx(i, j)] =
                (-kernel[grid.idx(i, j)] - h * acc) / (1.0 + 0.5 * h * kernel[grid.idx(i, i)]);
        }
    }
    r
}

/// Pointwise operator composition `(a∘b)(x,ξ) = ∫_ξ^x a(x,s) b(s,ξ) ds`.
pub fn compose(grid: &TriangleGrid, a: &[f64], b: &[f64]) -> Vec<f64> {
    let h = grid.h();
    let mut out = vec![0.0; grid.len()];
    for (i, j) in grid.nodes() {
        if i == j {
            continue;
        }
        let mut acc =
            0.5 * (a[grid.idx(i, j)] * b[grid.idx(j, j)] + a[grid.idx(i, i)] * b[grid.idx(i, j)]);
        for s in j + 1..i {
            acc += a[grid.idx(i, s)] * b[grid.idx(s, j)];
        }
        out[grid.idx(i, j)] = h * acc;
    }
    out
}

/// Which argument of the coupling coefficient `α` feeds the `κ`/`c` data
/// terms; the defining displays admit both readings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaArg {
    /// `α(x)` — evaluated at the outer variable (default).
    #[default]
    Outer,
    /// `α(ξ)` — evaluated at the integration variable.
    Inner,
}

/// Integral couplings of the full-state target system.
#[derive(Debug, Clone)]
pub struct CouplingKernels {
    pub grid: TriangleGrid,
    /// Weight of the transformed trace variable χ.  The defining equation
    /// `κ(x,ξ) = α(·)k₃(x,ξ) + ∫_ξ^x κ(x,s)k₃(s,ξ)ds` carries no row index,
    /// so one field serves both transport rows.
    pub kappa: Vec<f64>,
    /// `c[j]` weights ψ_{j+1}; row-independent for the same reason.
    pub c: [Vec<f64>; 2],
}

/// Computes the `κ` and `c` couplings from converged full-state kernels:
/// `κ` solves its Volterra equation row by row (the unknown at the lower
/// endpoint is divided out), then `c_j = α(·)k_j + κ∘k_j` by quadrature.
pub fn coupling_kernels(
    field: &KernelField,
    coeffs: &AbstractCoefficients,
    alpha_arg: AlphaArg,
) -> CouplingKernels {
    assert_eq!(field.role, KernelRole::Controller);
    let grid = field.grid;
    let h = grid.h();
    let k3 = &field.k[2];
    let alpha_at = |i: usize, j: usize| match alpha_arg {
        AlphaArg::Outer => coeffs.alpha.value(grid.x(i)),
        AlphaArg::Inner => coeffs.alpha.value(grid.x(j)),
    };

    let mut kappa = vec![0.0; grid.len()];
    for i in 0..grid.n {
        kappa[grid.idx(i, i)] = alpha_at(i, i) * k3[grid.idx(i, i)];
        for j in (0..i).rev() {
            let mut acc = 0.5 * kappa[grid.idx(i, i)] * k3[grid.idx(i, j)];
            for s in j + 1..i {
                acc += kappa[grid.idx(i, s)] * k3[grid.idx(s, j)];
            }
            kappa[grid.idx(i, j)] = (alpha_at(i, j) * k3[grid.idx(i, j)] + h * acc)
                / (1.0 - 0.5 * h * k3[grid.idx(j, j)]);
        }
    }

    let c = [0, 1].map(|m| {
        let kj = &field.k[m];
        let comp = compose(&grid, &kappa, kj);
        let mut out = vec![0.0; grid.len()];
        for (i, j) in grid.nodes() {
            let p = grid.idx(i, j);
            out[p] = alpha_at(i, j) * kj[p] + comp[p];
        }
        out
    });

    CouplingKernels { grid, kappa, c }
}

/// Integral couplings of the observer-error target system.
#[derive(Debug, Clone)]
pub struct ObserverCouplings {
    pub grid: TriangleGrid,
    /// `h[i]` weights the trace variable in the (i+1)-th transport row.
    pub h: [Vec<f64>; 2],
    /// `g[i][j]` weights π̃_{j+1} in the (i+1)-th transport row.
    pub g: [[Vec<f64>; 2]; 2],
}

/// Computes the `h` and `g` couplings from converged observer kernels:
/// `h_i(x,ξ) = −θ_i(ξ)m₃(x,ξ) − ∫_ξ^x m₃(x,s)h_i(s,ξ)ds` marched up each
/// column, then `g_ij = −θ_j(ξ)m_i − m_i∘h_j` by quadrature.
pub fn observer_coupling_kernels(
    field: &KernelField,
    coeffs: &AbstractCoefficients,
) -> ObserverCouplings {
    assert_eq!(field.role, KernelRole::Observer);
    let grid = field.grid;
    let h_step = grid.h();
    let m3 = &field.k[2];

    let hk = [0, 1].map(|m| {
        let theta = if m == 0 { coeffs.theta1 } else { coeffs.theta2 };
        let mut out = vec![0.0; grid.len()];
        for j in 0..grid.n {
            let t = theta.value(grid.x(j));
            out[grid.idx(j, j)] = -t * m3[grid.idx(j, j)];
            for i in j + 1..grid.n {
                let mut acc = 0.5 * m3[grid.idx(i, j)] * out[grid.idx(j, j)];
                for s in j + 1..i {
                    acc += m3[grid.idx(i, s)] * out[grid.idx(s, j)];
                }
                out[grid.idx(i, j)] = (-t * m3[grid.idx(i, j)] - h_step * acc)
                    / (1.0 + 0.5 * h_step * m3[grid.idx(i, i)]);
            }
        }
        out
    });

    let g = [0, 1].map(|i| {
        let mi = &field.k[i];
        [0, 1].map(|j| {
            let theta = if j == 0 { coeffs.theta1 } else { coeffs.theta2 };
            let comp = compose(&grid, mi, &hk[j]);
            let mut out = vec![0.0; grid.len()];
            for (row, col) in grid.nodes() {
                let p = grid.idx(row, col);
                out[p] = -theta.value(grid.x(col)) * mi[p] - comp[p];
            }
            out
        })
    });

    ObserverCouplings { grid, h: hk, g }
}

/// Kernels of an inverse backstepping transform.
#[derive(Debug, Clone)]
pub struct InverseKernels {
    pub grid: TriangleGrid,
    /// Components `(r₁, r₂, r₃)` for the observer error, `(l₁, l₂, l₃)` for
    /// the full-state transform.
    pub k: [Vec<f64>; 3],
}

impl InverseKernels {
    /// P1 interpolation of component `m` at `(x, ξ)`.
    pub fn interp(&self, m: usize, x: f64, xi: f64) -> f64 {
        self.grid.interp(&self.k[m], x, xi)
    }
}

/// Inverse kernels of the observer-error transform: `r₃ = resolvent(m₃)` and
/// `r_i = −m_i − m_i∘r₃`, so the error-target variables are recovered as
/// `π̃_i = ũ_i + ∫₀^x r_i(x,ξ) w̃(ξ) dξ` and `φ̃ = w̃ + ∫₀^x r₃(x,ξ) w̃(ξ) dξ`.
pub fn observer_inverse_kernels(field: &KernelField) -> InverseKernels {
    assert_eq!(field.role, KernelRole::Observer);
    let grid = field.grid;
    let r3 = volterra_resolvent(&grid, &field.k[2]);
    let make = |m: &[f64]| -> Vec<f64> {
        compose(&grid, m, &r3)
            .iter()
            .zip(m)
            .map(|(c, &mi)| -mi - c)
            .collect()
    };
    InverseKernels {
        grid,
        k: [make(&field.k[0]), make(&field.k[1]), r3],
    }
}

/// Inverse kernels of the full-state transform: `l₃ = resolvent(−k₃)` and
/// `l_i = k_i + l₃∘k_i`, so the trace variable is recovered as
/// `w = χ + ∫₀^x [l₁(x,ξ)u₁ + l₂(x,ξ)u₂ + l₃(x,ξ)χ] dξ`.
pub fn controller_inverse_kernels(field: &KernelField) -> InverseKernels {
    assert_eq!(field.role, KernelRole::Controller);
    let grid = field.grid;
    let neg: Vec<f64> = field.k[2].iter().map(|v| -v).collect();
    let l3 = volterra_resolvent(&grid, &neg);
    let make = |k: &[f64]| -> Vec<f64> {
        compose(&grid, &l3, k)
            .iter()
            .zip(k)
            .map(|(c, &ki)| ki + c)
            .collect()
    };
    InverseKernels {
        grid,
        k: [make(&field.k[0]), make(&field.k[1]), l3],
    }
}
