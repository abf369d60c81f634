//! Uniform grid on the triangle `T = {(x, ξ) : 0 ≤ ξ ≤ x ≤ 1}`.
//!
//! Nodes sit at `(x_i, ξ_j) = (i h, j h)` for `j ≤ i` with `h = 1/(n−1)`;
//! values are stored row-major in a packed lower-triangular layout.
//! Interpolation splits every unit cell along its main-diagonal direction
//! into two linear (P1) triangles, which keeps queries exact for linear
//! fields and well-defined arbitrarily close to the ξ = x edge.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("triangle grid needs at least 3 nodes per side, got {n}")]
    TooCoarse { n: usize },
}

/// Geometry of the packed triangular lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriangleGrid {
    /// Nodes per side.
    pub n: usize,
}

impl TriangleGrid {
    pub fn new(n: usize) -> Result<Self, GridError> {
        if n < 3 {
            return Err(GridError::TooCoarse { n });
        }
        Ok(Self { n })
    }

    /// Mesh width `h = 1/(n−1)`.
    pub fn h(&self) -> f64 {
        1.0 / (self.n - 1) as f64
    }

    /// Coordinate of node index `i`.
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    /// Packed index of node `(i, j)`, `j ≤ i`.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i < self.n);
        i * (i + 1) / 2 + j
    }

    /// Total node count `n(n+1)/2`.
    pub fn len(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Iterates `(i, j)` row-major over the triangle.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> {
        let n = self.n;
        (0..n).flat_map(move |i| (0..=i).map(move |j| (i, j)))
    }

    /// P1 interpolation of packed `values` at `(x, ξ)`; the query is clamped
    /// into the triangle, so callers may pass foot points that have drifted
    /// out by round-off.
    pub fn interp(&self, values: &[f64], x: f64, xi: f64) -> f64 {
        let h = self.h();
        let x = x.clamp(0.0, 1.0);
        let xi = xi.clamp(0.0, x);
        let i = ((x / h) as usize).min(self.n - 2);
        let mut j = ((xi / h) as usize).min(self.n - 2);
        if j > i {
            j = i;
        }
        let u = (x - self.x(i)) / h;
        let mut v = (xi - self.x(j)) / h;
        if i == j {
            // Diagonal cell: only the lower triangle lies inside the domain.
            v = v.min(u);
        }
        let f = |a: usize, b: usize| values[self.idx(a, b)];
        if v <= u {
            // Lower triangle (i,j) → (i+1,j) → (i+1,j+1).
            f(i, j) + (f(i + 1, j) - f(i, j)) * u + (f(i + 1, j + 1) - f(i + 1, j)) * v
        } else {
            // Upper triangle (i,j) → (i,j+1) → (i+1,j+1).
            f(i, j) + (f(i + 1, j + 1) - f(i, j + 1)) * u + (f(i, j + 1) - f(i, j)) * v
        }
    }

    /// Linear interpolation of a per-node axis profile `g(x_i)` (length `n`).
    pub fn interp_axis(&self, values: &[f64], x: f64) -> f64 {
        debug_assert_eq!(values.len(), self.n);
        let h = self.h();
        let x = x.clamp(0.0, 1.0);
        let i = ((x / h) as usize).min(self.n - 2);
        let t = (x - self.x(i)) / h;
        values[i] * (1.0 - t) + values[i + 1] * t
    }
}
