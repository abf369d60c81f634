//! Real roots of a monic cubic.
//!
//! Solves `z³ + a z² + b z + c = 0` by reduction to the depressed form and
//! the trigonometric method when all three roots are real, followed by a few
//! Newton polish steps on the original polynomial to remove the trig-branch
//! rounding.  Roots are returned in ascending order.

/// Outcome of the real-root solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CubicRoots {
    /// Three distinct real roots, ascending.
    ThreeReal([f64; 3]),
    /// At least two roots coincide (within the discriminant's resolution).
    Repeated,
    /// One real root and a complex-conjugate pair.
    ComplexPair,
}

/// Evaluates `p(z) = z³ + a z² + b z + c` and its derivative.
fn eval(a: f64, b: f64, c: f64, z: f64) -> (f64, f64) {
    let p = ((z + a) * z + b) * z + c;
    let dp = (3.0 * z + 2.0 * a) * z + b;
    (p, dp)
}

/// Newton refinement; cheap insurance against the `acos`/`cos` rounding of
/// the closed form.  Stops early once the residual is at round-off level.
fn polish(a: f64, b: f64, c: f64, mut z: f64) -> f64 {
    let scale = 1.0f64.max(a.abs()).max(b.abs()).max(c.abs());
    for _ in 0..5 {
        let (p, dp) = eval(a, b, c, z);
        if dp == 0.0 || p.abs() <= f64::EPSILON * scale {
            break;
        }
        let step = p / dp;
        z -= step;
        if step.abs() <= f64::EPSILON * z.abs() {
            break;
        }
    }
    z
}

/// Solves `z³ + a z² + b z + c = 0` over the reals.
pub fn solve_monic_cubic(a: f64, b: f64, c: f64) -> CubicRoots {
    // Depressed form: z = t - a/3,  t³ + p t + q = 0.
    let ao3 = a / 3.0;
    let p = b - a * ao3;
    let q = c + ao3 * (2.0 * ao3 * ao3 - b);

    // Discriminant of the depressed cubic: Δ = -4p³ - 27q².
    let disc = -4.0 * p * p * p - 27.0 * q * q;
    let scale = p.abs().powi(3).max(q * q).max(f64::MIN_POSITIVE);
    if disc.abs() <= 1e-12 * scale {
        return CubicRoots::Repeated;
    }
    if disc < 0.0 {
        return CubicRoots::ComplexPair;
    }

    // Three distinct real roots: t_k = 2√(-p/3) cos((φ - 2πk)/3).
    let m = 2.0 * (-p / 3.0).sqrt();
    let cos_arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
    let phi = cos_arg.acos();
    let mut roots = [0.0f64; 3];
    for (k, r) in roots.iter_mut().enumerate() {
        let t = m * ((phi - 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos();
        *r = polish(a, b, c, t - ao3);
    }
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    CubicRoots::ThreeReal(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roots_of(a: f64, b: f64, c: f64) -> [f64; 3] {
        match solve_monic_cubic(a, b, c) {
            CubicRoots::ThreeReal(r) => r,
            other => panic!("expected three real roots, got {other:?}"),
        }
    }

    #[test]
    fn factored_cubic() {
        // (z - 1)(z + 2)(z - 5) = z^3 - 4 z^2 - 7 z + 10
        let r = roots_of(-4.0, -7.0, 10.0);
        for (got, want) in r.iter().zip([-2.0, 1.0, 5.0]) {
            assert!((got - want).abs() < 1e-13, "{got} vs {want}");
        }
    }

    #[test]
    fn frictionless_channel_polynomial() {
        // a = 0 limit of the channel cubic with H* = 2, V* = 3, g = 9.81:
        // z^3 - 6 z^2 + (9 - 19.62) z = z (z - 3)^2 - 19.62 z,
        // roots {3 - sqrt(19.62), 0, 3 + sqrt(19.62)}.
        let r = roots_of(-6.0, 9.0 - 19.62, 0.0);
        let s = 19.62f64.sqrt();
        assert!((r[0] - (3.0 - s)).abs() < 1e-12);
        assert!(r[1].abs() < 1e-12);
        assert!((r[2] - (3.0 + s)).abs() < 1e-12);
        assert!((r[0] + 1.42944691807002).abs() < 1e-10);
        assert!((r[2] - 7.42944691807002).abs() < 1e-10);
    }

    #[test]
    fn residuals_are_tiny() {
        let (a, b, c) = (-6.0, -12.7432064128, 6.36961923848);
        let r = roots_of(a, b, c);
        let scale = 1.0f64.max(a.abs()).max(b.abs()).max(c.abs());
        for z in r {
            let (p, _) = eval(a, b, c, z);
            assert!(p.abs() < 1e-12 * scale, "residual {p:.3e}");
        }
    }

    #[test]
    fn repeated_roots_detected() {
        // (z - 1)^2 (z - 3) = z^3 - 5 z^2 + 7 z - 3
        assert_eq!(solve_monic_cubic(-5.0, 7.0, -3.0), CubicRoots::Repeated);
    }

    #[test]
    fn complex_pair_detected() {
        // z^3 + z + 1 has one real root.
        assert_eq!(solve_monic_cubic(0.0, 1.0, 1.0), CubicRoots::ComplexPair);
    }
}
