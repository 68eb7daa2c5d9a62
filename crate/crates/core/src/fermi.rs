//! Fermi-Dirac function and the bracketed scalar root finder used by the
//! thermal solves.

/// `f(x) = 1 / (1 + e^x)`, evaluated without overflow for any finite `x`.
#[inline]
pub fn fermi(x: f64) -> f64 {
    if x >= 0.0 {
        let e = libm::exp(-x);
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + libm::exp(x))
    }
}

/// `f(x) (1 - f(x))`, the occupation variance of a single mode.
#[inline]
pub fn fermi_variance(x: f64) -> f64 {
    let e = libm::exp(-libm::fabs(x));
    let d = 1.0 + e;
    e / (d * d)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct RootOutcome {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Newton iteration kept inside a sign-changing bracket; falls back to
/// bisection whenever the Newton step leaves the bracket or stalls.
///
/// `eval` returns `(g(x), g'(x))`. `g(lo)` and `g(hi)` must differ in sign.
pub(crate) fn bracketed_newton<F>(
    mut eval: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> RootOutcome
where
    F: FnMut(f64) -> (f64, f64),
{
    let (g_lo, _) = eval(lo);
    let lo_negative = g_lo < 0.0;
    let mut x = 0.5 * (lo + hi);
    let mut best = RootOutcome {
        x,
        residual: f64::INFINITY,
        iterations: 0,
        converged: false,
    };
    let mut prev_abs = f64::INFINITY;
    for it in 1..=max_iter {
        let (g, dg) = eval(x);
        if libm::fabs(g) < libm::fabs(best.residual) {
            best.x = x;
            best.residual = g;
        }
        best.iterations = it;
        if libm::fabs(g) <= tol {
            best.converged = true;
            return best;
        }
        if (g < 0.0) == lo_negative {
            lo = x;
        } else {
            hi = x;
        }
        let width = libm::fabs(hi - lo);
        let scale = libm::fmax(libm::fmax(libm::fabs(lo), libm::fabs(hi)), 1e-300);
        if width <= 4.0 * f64::EPSILON * scale {
            return best;
        }
        let newton = x - g / dg;
        let inside = dg != 0.0 && newton.is_finite() && newton > lo.min(hi) && newton < lo.max(hi);
        let stalled = libm::fabs(g) > 0.5 * prev_abs;
        x = if inside && !stalled {
            newton
        } else {
            0.5 * (lo + hi)
        };
        prev_abs = libm::fabs(g);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fermi_reference_values() {
        assert_eq!(fermi(0.0), 0.5);
        // beta = 2, omega - mu = 0.5
        assert!((fermi(2.0 * 0.5) - 0.268_941_421_369_995_1).abs() < 1e-15);
        assert_eq!(fermi(1e4), 0.0);
        assert_eq!(fermi(-1e4), 1.0);
        assert!(fermi(800.0) >= 0.0);
    }

    #[test]
    fn fermi_is_reflection_symmetric() {
        for &x in &[-30.0, -2.5, -0.1, 0.3, 7.0] {
            assert!((fermi(x) + fermi(-x) - 1.0).abs() < 1e-15);
            let f = fermi(x);
            assert!((fermi_variance(x) - f * (1.0 - f)).abs() < 1e-15);
        }
    }

    #[test]
    fn newton_finds_cubic_root() {
        let r = bracketed_newton(|x| (x * x * x - 2.0, 3.0 * x * x), 0.0, 2.0, 1e-14, 200);
        assert!(r.converged);
        assert!((r.x - libm::cbrt(2.0)).abs() < 1e-13);
    }

    #[test]
    fn newton_survives_flat_derivative() {
        // Derivative vanishes at the starting midpoint.
        let r = bracketed_newton(|x| (libm::tanh(x - 0.3), 0.0), -1.0, 1.0, 1e-12, 200);
        assert!((r.x - 0.3).abs() < 1e-11);
    }
}
