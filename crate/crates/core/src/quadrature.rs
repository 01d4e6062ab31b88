//! Adaptive Simpson quadrature, fixed Gauss-Legendre rules and the
//! monotone inversion table used for heteroclinic profiles.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 48;

/// Integral value together with the accumulated error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

/// Adaptive composite Simpson rule with interval bisection on the
/// Richardson error estimate. Fails when the accumulated estimate exceeds
/// `tol`, reporting the achieved error.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<Quad> {
    if a == b {
        return Ok(Quad {
            value: 0.0,
            error: 0.0,
        });
    }
    let mut err = 0.0;
    // Seed with a few panels so that integrands vanishing at the midpoint
    // cannot fool the first estimate.
    let panels = 8;
    let h = (b - a) / panels as f64;
    let mut value = 0.0;
    for k in 0..panels {
        let lo = a + k as f64 * h;
        let hi = if k + 1 == panels { b } else { lo + h };
        let flo = f(lo);
        let fhi = f(hi);
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        let s = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        value += recurse(
            &f,
            lo,
            hi,
            flo,
            fmid,
            fhi,
            s,
            tol / panels as f64,
            MAX_DEPTH,
            &mut err,
        );
    }
    if !value.is_finite() {
        return Err(Error::Quadrature {
            achieved: f64::INFINITY,
            requested: tol,
        });
    }
    if err > tol {
        return Err(Error::Quadrature {
            achieved: err,
            requested: tol,
        });
    }
    Ok(Quad { value, error: err })
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    err: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol || depth == 0 || (b - a).abs() < 1e-15 * a.abs().max(1.0) {
        *err += delta.abs() / 15.0;
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, err)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, err)
}

/// Plain composite Simpson rule on `2 * half_panels` subintervals.
pub fn composite_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, half_panels: usize) -> f64 {
    let n = 2 * half_panels.max(1);
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let x = a + k as f64 * h;
        s += if k % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    s * h / 3.0
}

/// Five-point Gauss-Legendre nodes and weights on [0, 1].
pub const GAUSS5: [(f64, f64); 5] = [
    (0.046_910_077_030_668_004, 0.118_463_442_528_094_54),
    (0.230_765_344_947_158_45, 0.239_314_335_249_683_23),
    (0.5, 0.284_444_444_444_444_44),
    (0.769_234_655_052_841_6, 0.239_314_335_249_683_23),
    (0.953_089_922_969_332, 0.118_463_442_528_094_54),
];

/// Tabulated inverse of `x(q) = ∫_{q_c}^{q} dq'/g(q')` for a speed `g`
/// that is positive on `(q_lo, q_hi)` and vanishes at both ends, so that
/// `q(x)` is the increasing heteroclinic orbit with `q(0) = q_c` and
/// `q'(x) = g(q(x))`.
///
/// The forward problem is singular at the ends, the inverse integral is
/// proper on every `[q_c, q_hi - gap]`. Each branch is sampled on the graded
/// mesh `q_hi - q = (q_hi - q_c) e^{-σ}`, where the integrand in σ stays
/// bounded, and `q(x)` is recovered by monotone cubic Hermite
/// interpolation with the exact slopes `g(q)`.
#[derive(Debug, Clone)]
pub struct InverseTable {
    xs: Vec<f64>,
    qs: Vec<f64>,
    slopes: Vec<f64>,
    q_lo_clamp: f64,
    q_hi_clamp: f64,
}

impl InverseTable {
    /// `clamp` is the relative gap (times `q_hi - q_lo`) kept from the ends.
    pub fn build(
        g: impl Fn(f64) -> f64,
        q_lo: f64,
        q_hi: f64,
        q_c: f64,
        clamp: f64,
        samples_per_branch: usize,
    ) -> Result<Self> {
        Self::build_with_tol(g, q_lo, q_hi, q_c, clamp, samples_per_branch, 1e-13)
    }

    /// As [`InverseTable::build`] with the per-sample quadrature tolerance
    /// `tol`, which must sit above the rounding noise of `g` near the ends.
    pub fn build_with_tol(
        g: impl Fn(f64) -> f64,
        q_lo: f64,
        q_hi: f64,
        q_c: f64,
        clamp: f64,
        samples_per_branch: usize,
        tol: f64,
    ) -> Result<Self> {
        let span = q_hi - q_lo;
        let gap_min = clamp * span;
        let right = Self::branch(&g, q_c, q_hi, gap_min, samples_per_branch, tol)?;
        let left = Self::branch(&g, q_c, q_lo, gap_min, samples_per_branch, tol)?;
        // left branch runs from q_c towards q_lo with decreasing x.
        let mut xs = Vec::with_capacity(left.len() + right.len());
        let mut qs = Vec::with_capacity(xs.capacity());
        for &(x, q) in left.iter().rev() {
            xs.push(x);
            qs.push(q);
        }
        for &(x, q) in right.iter().skip(1) {
            xs.push(x);
            qs.push(q);
        }
        let mut slopes: Vec<f64> = qs.iter().map(|&q| g(q).max(0.0)).collect();
        limit_slopes(&xs, &qs, &mut slopes);
        Ok(Self {
            xs,
            qs,
            slopes,
            q_lo_clamp: q_lo + gap_min,
            q_hi_clamp: q_hi - gap_min,
        })
    }

    fn branch(
        g: &impl Fn(f64) -> f64,
        q_c: f64,
        q_end: f64,
        gap_min: f64,
        samples: usize,
        tol: f64,
    ) -> Result<Vec<(f64, f64)>> {
        let dir = (q_end - q_c).signum();
        let gap0 = (q_end - q_c).abs();
        let sigma_max = (gap0 / gap_min).ln();
        let dsig = sigma_max / samples as f64;
        // dq/dσ = dir * gap(σ), dx/dσ = gap(σ) / g(q(σ)) (always >= 0 along
        // the direction of travel, sign applied below).
        let integrand = |s: f64| {
            let gap = gap0 * (-s).exp();
            let q = q_end - dir * gap;
            gap / g(q)
        };
        let mut out = Vec::with_capacity(samples + 1);
        out.push((0.0, q_c));
        let mut x = 0.0;
        for k in 0..samples {
            let s0 = k as f64 * dsig;
            let s1 = s0 + dsig;
            let piece = adaptive_simpson(integrand, s0, s1, tol).map_err(|e| match e {
                Error::Quadrature { achieved, .. } => Error::StandingWave {
                    endpoint: q_end,
                    achieved,
                },
                other => other,
            })?;
            x += dir * piece.value;
            let q = q_end - dir * gap0 * (-s1).exp();
            out.push((x, q));
        }
        Ok(out)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.q_lo_clamp;
        }
        if x >= self.xs[n - 1] {
            return self.q_hi_clamp;
        }
        let k = match self.xs.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
            Ok(k) => return self.qs[k],
            Err(k) => k - 1,
        };
        let (x0, x1) = (self.xs[k], self.xs[k + 1]);
        let (q0, q1) = (self.qs[k], self.qs[k + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let q = h00 * q0 + h10 * h * self.slopes[k] + h01 * q1 + h11 * h * self.slopes[k + 1];
        q.clamp(q0.min(q1), q0.max(q1))
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }
}

/// Fritsch-Carlson limiter keeping the Hermite interpolant monotone.
fn limit_slopes(xs: &[f64], qs: &[f64], slopes: &mut [f64]) {
    for k in 0..xs.len() - 1 {
        let secant = (qs[k + 1] - qs[k]) / (xs[k + 1] - xs[k]);
        if secant <= 0.0 {
            slopes[k] = 0.0;
            slopes[k + 1] = 0.0;
            continue;
        }
        let alpha = slopes[k] / secant;
        let beta = slopes[k + 1] / secant;
        let r = alpha * alpha + beta * beta;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            slopes[k] = tau * alpha * secant;
            slopes[k + 1] = tau * beta * secant;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_on_cubics() {
        let q = adaptive_simpson(|x| x * x * x - 2.0 * x + 1.0, -1.0, 2.0, 1e-12).unwrap();
        assert!((q.value - (3.75 - 3.0 + 3.0)).abs() < 1e-13);
    }

    #[test]
    fn simpson_handles_oscillatory_integrand() {
        let q = adaptive_simpson(|x| (10.0 * x).sin(), 0.0, 3.0, 1e-11).unwrap();
        let exact = (1.0 - (30.0_f64).cos()) / 10.0;
        assert!((q.value - exact).abs() < 1e-10);
    }

    #[test]
    fn simpson_reports_non_convergence() {
        let err = adaptive_simpson(|x| 1.0 / x, 0.0, 1.0, 1e-12).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }

    #[test]
    fn gauss5_integrates_degree_nine() {
        let s: f64 = GAUSS5.iter().map(|&(t, w)| w * t.powi(9)).sum();
        assert!((s - 0.1).abs() < 1e-15);
        let total: f64 = GAUSS5.iter().map(|&(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn inverse_table_reproduces_tanh() {
        // q' = (1 - q^2)/sqrt(2) has solution tanh(x/sqrt(2)).
        let g = |q: f64| (1.0 - q) * (1.0 + q) / std::f64::consts::SQRT_2;
        let table = InverseTable::build(g, -1.0, 1.0, 0.0, 1e-12, 1200).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..=400 {
            let x = -10.0 + 0.05 * k as f64;
            worst = worst.max((table.eval(x) - (x / std::f64::consts::SQRT_2).tanh()).abs());
        }
        assert!(worst < 1e-8, "worst {worst}");
    }
}
