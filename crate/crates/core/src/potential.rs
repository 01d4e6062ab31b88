//! Double-well and multi-well potentials.
//!
//! Wells (zeros) are declared data; nothing here root-finds them. The
//! built-in quartic and polynomial potentials carry exact derivatives.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type HessFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Tolerance on `W` and `W'` at declared wells of user-supplied potentials.
pub const WELL_TOL: f64 = 1e-10;

#[inline]
pub fn quartic_w(u: f64) -> f64 {
    let q = (u - 1.0) * (u + 1.0);
    0.25 * q * q
}

#[inline]
pub fn quartic_dw(u: f64) -> f64 {
    u * (u - 1.0) * (u + 1.0)
}

#[inline]
pub fn quartic_d2w(u: f64) -> f64 {
    3.0 * u * u - 1.0
}

/// Polynomial in ascending-degree coefficients. Near its anchor points
/// (the declared wells) it evaluates through the re-expanded Taylor
/// coefficients, which avoids cancellation where `W` vanishes quadratically.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
    anchors: Vec<(f64, Vec<f64>)>,
}

const ANCHOR_RADIUS: f64 = 0.25;

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self {
            coeffs,
            anchors: Vec::new(),
        }
    }

    pub fn with_anchors(mut self, points: &[f64]) -> Self {
        self.anchors = points
            .iter()
            .map(|&p| (p, shift(&self.coeffs, p)))
            .collect();
        self
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    fn local(&self, u: f64) -> (&[f64], f64) {
        for (p, c) in &self.anchors {
            if (u - p).abs() < ANCHOR_RADIUS {
                return (c, u - p);
            }
        }
        (&self.coeffs, u)
    }

    pub fn eval(&self, u: f64) -> f64 {
        let (c, x) = self.local(u);
        c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck)
    }

    pub fn deriv(&self, u: f64) -> f64 {
        let (c, x) = self.local(u);
        let mut acc = 0.0;
        for k in (1..c.len()).rev() {
            acc = acc * x + k as f64 * c[k];
        }
        acc
    }

    pub fn deriv2(&self, u: f64) -> f64 {
        let (c, x) = self.local(u);
        let mut acc = 0.0;
        for k in (2..c.len()).rev() {
            acc = acc * x + (k * (k - 1)) as f64 * c[k];
        }
        acc
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let anchors: Vec<f64> = self.anchors.iter().map(|(p, _)| *p).collect();
        Polynomial::new(self.coeffs.iter().map(|c| alpha * c).collect()).with_anchors(&anchors)
    }

    /// `u -> p(-u)`.
    pub fn reflected(&self) -> Self {
        let anchors: Vec<f64> = self.anchors.iter().map(|(p, _)| -*p).collect();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| if k % 2 == 1 { -c } else { c })
            .collect();
        Polynomial::new(coeffs).with_anchors(&anchors)
    }
}

/// Coefficients of `p(x0 + d)` in powers of `d` (repeated synthetic division).
fn shift(coeffs: &[f64], x0: f64) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    let n = c.len();
    for i in 0..n {
        for j in (i..n - 1).rev() {
            c[j] += x0 * c[j + 1];
        }
    }
    c
}

#[derive(Clone)]
enum ScalarKind {
    Quartic,
    Polynomial(Polynomial),
    Callback {
        w: ScalarFn,
        dw: ScalarFn,
        d2w: ScalarFn,
    },
}

/// Scalar double-well energy density `W` with its first two derivatives.
#[derive(Clone)]
pub struct ScalarPotential {
    kind: ScalarKind,
    wells: [f64; 2],
}

impl fmt::Debug for ScalarPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            ScalarKind::Quartic => "quartic".to_string(),
            ScalarKind::Polynomial(p) => format!("polynomial{:?}", p.coefficients()),
            ScalarKind::Callback { .. } => "callback".to_string(),
        };
        f.debug_struct("ScalarPotential")
            .field("kind", &kind)
            .field("wells", &self.wells)
            .finish()
    }
}

/// `lambda = min W''` over the wells, `rate_cap = r sqrt(2 lambda)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StiffnessConstants {
    pub lambda: f64,
    pub rate_cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    WellValue,
    WellSlope,
    WellCurvature,
    NegativeOffWells,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::WellValue => "W(well)≠0",
            ViolationKind::WellSlope => "W'(well)≠0",
            ViolationKind::WellCurvature => "W''(well)≤0",
            ViolationKind::NegativeOffWells => "W<0 off wells",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub location: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Violation with the largest magnitude.
    pub fn worst(&self) -> Option<&Violation> {
        self.violations
            .iter()
            .max_by(|a, b| a.value.abs().partial_cmp(&b.value.abs()).unwrap())
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

impl ScalarPotential {
    /// `W(u) = (u^2 - 1)^2 / 4`.
    pub fn quartic() -> Self {
        Self {
            kind: ScalarKind::Quartic,
            wells: [-1.0, 1.0],
        }
    }

    pub fn polynomial(coeffs: Vec<f64>, wells: [f64; 2]) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Potential(
                "polynomial needs finite coefficients".into(),
            ));
        }
        let wells = ordered(wells)?;
        Ok(Self {
            kind: ScalarKind::Polynomial(Polynomial::new(coeffs).with_anchors(&wells)),
            wells,
        })
    }

    pub fn from_callbacks(
        w: ScalarFn,
        dw: ScalarFn,
        d2w: ScalarFn,
        wells: [f64; 2],
    ) -> Result<Self> {
        Ok(Self {
            kind: ScalarKind::Callback { w, dw, d2w },
            wells: ordered(wells)?,
        })
    }

    pub fn is_quartic(&self) -> bool {
        matches!(self.kind, ScalarKind::Quartic)
    }

    pub fn wells(&self) -> [f64; 2] {
        self.wells
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match &self.kind {
            ScalarKind::Quartic => quartic_w(u),
            ScalarKind::Polynomial(p) => p.eval(u),
            ScalarKind::Callback { w, .. } => w(u),
        }
    }

    #[inline]
    pub fn deriv(&self, u: f64) -> f64 {
        match &self.kind {
            ScalarKind::Quartic => quartic_dw(u),
            ScalarKind::Polynomial(p) => p.deriv(u),
            ScalarKind::Callback { dw, .. } => dw(u),
        }
    }

    #[inline]
    pub fn deriv2(&self, u: f64) -> f64 {
        match &self.kind {
            ScalarKind::Quartic => quartic_d2w(u),
            ScalarKind::Polynomial(p) => p.deriv2(u),
            ScalarKind::Callback { d2w, .. } => d2w(u),
        }
    }

    /// `alpha * W` (polynomial forms only).
    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        let poly = self.as_polynomial()?;
        Ok(Self {
            kind: ScalarKind::Polynomial(poly.scaled(alpha)),
            wells: self.wells,
        })
    }

    /// `u -> W(-u)` (polynomial forms only).
    pub fn reflected(&self) -> Result<Self> {
        let poly = self.as_polynomial()?;
        let wells = [-self.wells[1], -self.wells[0]];
        Ok(Self {
            kind: ScalarKind::Polynomial(poly.reflected()),
            wells,
        })
    }

    fn as_polynomial(&self) -> Result<Polynomial> {
        match &self.kind {
            ScalarKind::Quartic => {
                Ok(Polynomial::new(vec![0.25, 0.0, -0.5, 0.0, 0.25]).with_anchors(&self.wells))
            }
            ScalarKind::Polynomial(p) => Ok(p.clone()),
            ScalarKind::Callback { .. } => Err(Error::Potential(
                "callback potentials cannot be transformed".into(),
            )),
        }
    }

    /// Maximum of `|W''|` on a uniform sample of `[lo, hi]`.
    pub fn max_abs_deriv2(&self, lo: f64, hi: f64, samples: usize) -> f64 {
        (0..=samples)
            .map(|k| lo + (hi - lo) * k as f64 / samples as f64)
            .map(|u| self.deriv2(u).abs())
            .fold(0.0, f64::max)
    }

    pub fn stiffness(&self, r: f64) -> StiffnessConstants {
        let lambda = self.deriv2(self.wells[0]).min(self.deriv2(self.wells[1]));
        StiffnessConstants {
            lambda,
            rate_cap: r * (2.0 * lambda).sqrt(),
        }
    }

    /// Samples the double-well assumptions on a uniform grid over
    /// `[min well - 1, max well + 1]`.
    pub fn validate(&self, samples: usize) -> Result<ValidationReport> {
        if samples < 10 {
            return Err(Error::Config(format!(
                "validation needs at least 10 samples, got {samples}"
            )));
        }
        let mut violations = Vec::new();
        for &w in &self.wells {
            let (v, d, d2) = (self.eval(w), self.deriv(w), self.deriv2(w));
            if v.abs() > WELL_TOL || !v.is_finite() {
                violations.push(Violation {
                    kind: ViolationKind::WellValue,
                    location: w,
                    value: v,
                });
            }
            if d.abs() > WELL_TOL || !d.is_finite() {
                violations.push(Violation {
                    kind: ViolationKind::WellSlope,
                    location: w,
                    value: d,
                });
            }
            if d2 <= 0.0 || !d2.is_finite() {
                violations.push(Violation {
                    kind: ViolationKind::WellCurvature,
                    location: w,
                    value: d2,
                });
            }
        }
        let lo = self.wells[0] - 1.0;
        let hi = self.wells[1] + 1.0;
        let mut worst: Option<Violation> = None;
        for k in 0..samples {
            let u = lo + (hi - lo) * k as f64 / (samples - 1) as f64;
            if self.wells.iter().any(|w| (u - w).abs() < 1e-9) {
                continue;
            }
            let v = self.eval(u);
            if !(v > 0.0) && worst.is_none_or(|x| v < x.value) {
                worst = Some(Violation {
                    kind: ViolationKind::NegativeOffWells,
                    location: u,
                    value: v,
                });
            }
        }
        violations.extend(worst);
        Ok(ValidationReport { violations })
    }

    /// Transition cost `∫ sqrt(2W)` between the wells.
    pub fn c0(&self, tol: f64) -> Result<f64> {
        if !(tol > 0.0) {
            return Err(Error::Config(
                "quadrature tolerance must be positive".into(),
            ));
        }
        let q = adaptive_simpson(
            |s| (2.0 * self.eval(s).max(0.0)).sqrt(),
            self.wells[0],
            self.wells[1],
            tol,
        )?;
        Ok(q.value)
    }
}

fn ordered(wells: [f64; 2]) -> Result<[f64; 2]> {
    if !(wells[0].is_finite() && wells[1].is_finite()) || wells[0] == wells[1] {
        return Err(Error::Potential(format!(
            "wells {wells:?} must be distinct and finite"
        )));
    }
    Ok(if wells[0] < wells[1] {
        wells
    } else {
        [wells[1], wells[0]]
    })
}

#[derive(Clone)]
enum VectorKind {
    DecoupledQuartic,
    PolynomialSum(Vec<Polynomial>),
    Embedded(ScalarPotential),
    Callback {
        w: VectorFn,
        grad: GradFn,
        hess: HessFn,
    },
}

/// Multi-well potential on `R^m` with declared zeros `z_1..z_K`.
#[derive(Clone)]
pub struct VectorPotential {
    m: usize,
    kind: VectorKind,
    zeros: Vec<Vec<f64>>,
}

impl fmt::Debug for VectorPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            VectorKind::DecoupledQuartic => "decoupled-quartic",
            VectorKind::PolynomialSum(_) => "polynomial-sum",
            VectorKind::Embedded(_) => "embedded-scalar",
            VectorKind::Callback { .. } => "callback",
        };
        f.debug_struct("VectorPotential")
            .field("m", &self.m)
            .field("kind", &kind)
            .field("zeros", &self.zeros)
            .finish()
    }
}

impl VectorPotential {
    /// `W(u) = Σ_c (u_c^2 - 1)^2 / 4` with the `2^m` zeros `(±1, ..., ±1)`.
    pub fn decoupled_quartic(m: usize) -> Result<Self> {
        if m == 0 || m > 8 {
            return Err(Error::Potential(format!(
                "decoupled quartic needs 1 <= m <= 8, got {m}"
            )));
        }
        let zeros = (0..1usize << m)
            .map(|bits| {
                (0..m)
                    .map(|c| if bits >> c & 1 == 1 { 1.0 } else { -1.0 })
                    .collect()
            })
            .collect();
        Ok(Self {
            m,
            kind: VectorKind::DecoupledQuartic,
            zeros,
        })
    }

    /// `W(u) = Σ_c p_c(u_c)`; zeros are all combinations of per-component wells.
    pub fn polynomial_sum(components: Vec<(Vec<f64>, [f64; 2])>) -> Result<Self> {
        let m = components.len();
        if m == 0 {
            return Err(Error::Potential(
                "polynomial-sum needs at least one component".into(),
            ));
        }
        let mut polys = Vec::with_capacity(m);
        let mut wells = Vec::with_capacity(m);
        for (coeffs, w) in components {
            let w = ordered(w)?;
            polys.push(Polynomial::new(coeffs).with_anchors(&w));
            wells.push(w);
        }
        let zeros = (0..1usize << m)
            .map(|bits| (0..m).map(|c| wells[c][bits >> c & 1]).collect())
            .collect();
        Ok(Self {
            m,
            kind: VectorKind::PolynomialSum(polys),
            zeros,
        })
    }

    /// The `m = 1` embedding of a scalar potential.
    pub fn embed(p: &ScalarPotential) -> Self {
        let zeros = p.wells().iter().map(|&w| vec![w]).collect();
        Self {
            m: 1,
            kind: VectorKind::Embedded(p.clone()),
            zeros,
        }
    }

    pub fn from_callbacks(
        m: usize,
        w: VectorFn,
        grad: GradFn,
        hess: HessFn,
        zeros: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if m == 0 || zeros.is_empty() || zeros.iter().any(|z| z.len() != m) {
            return Err(Error::Potential(
                "zeros must be non-empty points of R^m".into(),
            ));
        }
        Ok(Self {
            m,
            kind: VectorKind::Callback { w, grad, hess },
            zeros,
        })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn zeros(&self) -> &[Vec<f64>] {
        &self.zeros
    }

    /// Index of the declared zero equal to `u` (within 1e-12), if any.
    pub fn zero_index(&self, u: &[f64]) -> Option<usize> {
        self.zeros
            .iter()
            .position(|z| z.iter().zip(u).all(|(a, b)| (a - b).abs() <= 1e-12))
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        match &self.kind {
            VectorKind::DecoupledQuartic => u.iter().map(|&x| quartic_w(x)).sum(),
            VectorKind::PolynomialSum(ps) => ps.iter().zip(u).map(|(p, &x)| p.eval(x)).sum(),
            VectorKind::Embedded(p) => p.eval(u[0]),
            VectorKind::Callback { w, .. } => w(u),
        }
    }

    pub fn grad(&self, u: &[f64], out: &mut [f64]) {
        match &self.kind {
            VectorKind::DecoupledQuartic => {
                for (o, &x) in out.iter_mut().zip(u) {
                    *o = quartic_dw(x);
                }
            }
            VectorKind::PolynomialSum(ps) => {
                for ((o, &x), p) in out.iter_mut().zip(u).zip(ps) {
                    *o = p.deriv(x);
                }
            }
            VectorKind::Embedded(p) => out[0] = p.deriv(u[0]),
            VectorKind::Callback { grad, .. } => grad(u, out),
        }
    }

    pub fn hess(&self, u: &[f64]) -> DMatrix<f64> {
        match &self.kind {
            VectorKind::DecoupledQuartic => {
                DMatrix::from_fn(
                    self.m,
                    self.m,
                    |i, j| if i == j { quartic_d2w(u[i]) } else { 0.0 },
                )
            }
            VectorKind::PolynomialSum(ps) => DMatrix::from_fn(self.m, self.m, |i, j| {
                if i == j {
                    ps[i].deriv2(u[i])
                } else {
                    0.0
                }
            }),
            VectorKind::Embedded(p) => DMatrix::from_element(1, 1, p.deriv2(u[0])),
            VectorKind::Callback { hess, .. } => hess(u),
        }
    }

    /// `λ_0 = min_j` (smallest eigenvalue of the Hessian at `z_j`).
    pub fn min_hessian_eigenvalue(&self) -> Result<f64> {
        let mut lambda0 = f64::INFINITY;
        for (j, z) in self.zeros.iter().enumerate() {
            let h = self.hess(z);
            let asym = (&h - h.transpose()).abs().max();
            if asym > 1e-10 {
                return Err(Error::NonSymmetricHessian {
                    zero: j,
                    asymmetry: asym,
                });
            }
            let eig = SymmetricEigen::new(h);
            lambda0 = lambda0.min(eig.eigenvalues.min());
        }
        Ok(lambda0)
    }

    /// Checks `W(z_j) = 0`, `∇W(z_j) = 0` and positive definiteness.
    pub fn validate(&self) -> Result<()> {
        let mut g = vec![0.0; self.m];
        for (j, z) in self.zeros.iter().enumerate() {
            let w = self.eval(z);
            self.grad(z, &mut g);
            let gmax = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if w.abs() > WELL_TOL || gmax > WELL_TOL {
                return Err(Error::Potential(format!(
                    "zero {j} at {z:?} has W = {w:e}, |∇W| = {gmax:e}"
                )));
            }
        }
        let l0 = self.min_hessian_eigenvalue()?;
        if !(l0 > 0.0) {
            return Err(Error::Potential(format!(
                "Hessian not positive definite at a zero (λ0 = {l0})"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartic_values() {
        let p = ScalarPotential::quartic();
        assert_eq!(p.eval(1.0), 0.0);
        assert_eq!(p.eval(-1.0), 0.0);
        assert_eq!(p.eval(0.0), 0.25);
        assert_eq!(p.deriv2(1.0), 2.0);
        // finite-difference cross-check of W''
        let h = 1e-5;
        let fd = (p.deriv(1.0 + h) - p.deriv(1.0 - h)) / (2.0 * h);
        assert!((fd - 2.0).abs() < 1e-8);
    }

    #[test]
    fn polynomial_shift_matches_direct_evaluation() {
        let poly = Polynomial::new(vec![0.25, 0.0, -0.5, 0.0, 0.25]);
        let shifted = poly.clone().with_anchors(&[-1.0, 1.0]);
        for k in 0..50 {
            let u = -1.5 + 0.06 * k as f64;
            assert!((poly.eval(u) - shifted.eval(u)).abs() < 1e-14);
            assert!((poly.deriv(u) - shifted.deriv(u)).abs() < 1e-13);
            assert!((poly.deriv2(u) - shifted.deriv2(u)).abs() < 1e-13);
        }
        // near the well the shifted form keeps relative accuracy
        let d = 1e-9;
        let exact = quartic_w(1.0 - d);
        assert!((shifted.eval(1.0 - d) - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn quartic_validates() {
        let rep = ScalarPotential::quartic().validate(1000).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn single_well_fails_on_well_value() {
        let p = ScalarPotential::polynomial(vec![0.0, 0.0, 1.0], [-1.0, 1.0]).unwrap();
        let rep = p.validate(100).unwrap();
        assert!(!rep.passed());
        assert!(rep.has(ViolationKind::WellValue));
        assert_eq!(ViolationKind::WellValue.to_string(), "W(well)≠0");
    }

    #[test]
    fn sign_flip_fails_off_wells() {
        let p = ScalarPotential::polynomial(vec![-1.0, 0.0, 2.0, 0.0, -1.0], [-1.0, 1.0]).unwrap();
        let rep = p.validate(100).unwrap();
        assert!(rep.has(ViolationKind::NegativeOffWells));
        assert!(rep.has(ViolationKind::WellCurvature));
        let worst = rep
            .violations
            .iter()
            .find(|v| v.kind == ViolationKind::NegativeOffWells)
            .unwrap();
        assert!(worst.value < 0.0);
        assert_eq!(ViolationKind::NegativeOffWells.to_string(), "W<0 off wells");
    }

    #[test]
    fn validate_needs_ten_samples() {
        assert!(ScalarPotential::quartic().validate(9).is_err());
    }

    #[test]
    fn c0_quartic_closed_form() {
        let c0 = ScalarPotential::quartic().c0(1e-12).unwrap();
        assert!((c0 - 2.0 * 2.0_f64.sqrt() / 3.0).abs() < 1e-10);
    }

    #[test]
    fn c0_scaling_and_reflection() {
        let p = ScalarPotential::quartic();
        let c0 = p.c0(1e-12).unwrap();
        for alpha in [2.0_f64, 3.0] {
            let scaled = p.scaled(alpha * alpha).unwrap().c0(1e-12).unwrap();
            assert!((scaled - alpha * c0).abs() < 1e-9);
        }
        let refl = p.reflected().unwrap().c0(1e-12).unwrap();
        assert!((refl - c0).abs() < 1e-11);
    }

    #[test]
    fn c0_wide_wells_matches_refined_simpson() {
        let p = ScalarPotential::polynomial(vec![4.0, 0.0, -2.0, 0.0, 0.25], [-2.0, 2.0]).unwrap();
        let got = p.c0(1e-11).unwrap();
        // brute-force Simpson refinement until successive values agree to 1e-10
        let f = |s: f64| (2.0 * p.eval(s).max(0.0)).sqrt();
        let mut half = 16;
        let mut prev = crate::quadrature::composite_simpson(f, -2.0, 2.0, half);
        loop {
            half *= 2;
            let next = crate::quadrature::composite_simpson(f, -2.0, 2.0, half);
            if (next - prev).abs() < 1e-10 {
                prev = next;
                break;
            }
            prev = next;
        }
        assert!((got - prev).abs() < 1e-9, "{got} vs {prev}");
    }

    #[test]
    fn stiffness_of_quartic() {
        let s = ScalarPotential::quartic().stiffness(1.0 / 6.0);
        assert_eq!(s.lambda, 2.0);
        assert!((s.rate_cap - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn hessian_eigenvalues() {
        let emb = VectorPotential::embed(&ScalarPotential::quartic());
        assert_eq!(emb.min_hessian_eigenvalue().unwrap(), 2.0);

        let dq = VectorPotential::decoupled_quartic(2).unwrap();
        assert_eq!(dq.zeros().len(), 4);
        dq.validate().unwrap();
        assert!((dq.min_hessian_eigenvalue().unwrap() - 2.0).abs() < 1e-14);

        let diag = VectorPotential::from_callbacks(
            2,
            Arc::new(|u: &[f64]| 1.5 * u[0] * u[0] + 2.5 * u[1] * u[1]),
            Arc::new(|u: &[f64], g: &mut [f64]| {
                g[0] = 3.0 * u[0];
                g[1] = 5.0 * u[1];
            }),
            Arc::new(|_: &[f64]| DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 5.0])),
            vec![vec![0.0, 0.0]],
        )
        .unwrap();
        assert!((diag.min_hessian_eigenvalue().unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn asymmetric_hessian_is_rejected() {
        let p = VectorPotential::from_callbacks(
            2,
            Arc::new(|_: &[f64]| 0.0),
            Arc::new(|_: &[f64], g: &mut [f64]| g.fill(0.0)),
            Arc::new(|_: &[f64]| DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0])),
            vec![vec![0.0, 0.0]],
        )
        .unwrap();
        assert!(matches!(
            p.min_hessian_eigenvalue(),
            Err(Error::NonSymmetricHessian { .. })
        ));
    }
}
