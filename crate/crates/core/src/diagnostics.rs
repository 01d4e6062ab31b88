//! Energy, mass, dissipation and the variational lower-bound certificate.
//!
//! `P_ε` uses face differences for `u_x`, which makes it the exact
//! variational partner of the solver's `D₂`. The kinetic term uses a face
//! primitive `F` of `u_t` (cumulative trapezoid, with the face mean removed
//! in Dirichlet mode); with these choices the semi-discrete identity
//! `ε dE/dt = −‖F‖²` holds exactly and the measured residual is a pure
//! time-discretization error.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FaceField, GridFunction};
use crate::potential::ScalarPotential;
use crate::profiles::{primitive_for, step_primitive_for, StepProfile};
use crate::solver::{primitive_norm_sq, BoundaryMode, State};

/// `∫ ε/2 u_x² + W(u)/ε`: face differences for the gradient, trapezoid for `W`.
pub fn p_eps(u: &GridFunction, p: &ScalarPotential, eps: f64) -> f64 {
    let dx = u.grid.dx();
    let grad: f64 = u
        .values
        .windows(2)
        .map(|w| (w[1] - w[0]) * (w[1] - w[0]))
        .sum::<f64>()
        / dx;
    let pot = u
        .grid
        .integrate(&u.values.iter().map(|&v| p.eval(v)).collect::<Vec<_>>());
    0.5 * eps * grad + pot / eps
}

/// Face primitive of a node velocity: `F_{i+1/2} = Σ_{j≤i} m_j w_j` with
/// trapezoid weights `m_j`, minus its face mean in Dirichlet mode.
pub fn velocity_primitive(w: &GridFunction, mode: &BoundaryMode) -> FaceField {
    let grid = w.grid;
    let mut acc = 0.0;
    let mut values: Vec<f64> = w.values[..w.len() - 1]
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            acc += grid.weight(i) * v;
            acc
        })
        .collect();
    if matches!(mode, BoundaryMode::Dirichlet { .. }) {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        for v in &mut values {
            *v -= mean;
        }
    }
    FaceField { grid, values }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    pub p_eps: f64,
    pub kinetic: f64,
    pub e_eps: f64,
    pub mass: f64,
    pub diss_cum: f64,
}

impl EnergyReport {
    pub fn at(mut self, t: f64, diss_cum: f64) -> Self {
        self.t = t;
        self.diss_cum = diss_cum;
        self
    }
}

/// Report at `t = 0` with no accumulated dissipation; see [`EnergyReport::at`].
pub fn e_eps(
    u: &GridFunction,
    primitive: &FaceField,
    p: &ScalarPotential,
    eps: f64,
    tau: f64,
) -> EnergyReport {
    let pe = p_eps(u, p, eps);
    let kinetic = tau / (2.0 * eps) * primitive.l2_norm_sq();
    EnergyReport {
        t: 0.0,
        p_eps: pe,
        kinetic,
        e_eps: pe + kinetic,
        mass: u.integral(),
        diss_cum: 0.0,
    }
}

/// Energy of a solver state, using the face primitive matching its formulation.
pub fn state_energy(
    s: &State,
    p: &ScalarPotential,
    eps: f64,
    tau: f64,
    mode: &BoundaryMode,
    diss_cum: f64,
) -> EnergyReport {
    let pe = p_eps(&s.u, p, eps);
    let kinetic = tau / (2.0 * eps) * primitive_norm_sq(s, mode);
    EnergyReport {
        t: s.t,
        p_eps: pe,
        kinetic,
        e_eps: pe + kinetic,
        mass: s.u.integral(),
        diss_cum,
    }
}

pub fn mass(u: &GridFunction) -> f64 {
    u.integral()
}

/// `m(t) = m(0) + τ m'(0) (1 − e^{−t/τ})`.
pub fn mass_closed_form(t: f64, m0: f64, m0_prime: f64, tau: f64) -> f64 {
    m0 + tau * m0_prime * (-(-t / tau).exp_m1())
}

/// `|E(0) − E(T) − diss_cum(T)| / E(0)`.
pub fn dissipation_identity_residual(series: &[EnergyReport]) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} energy reports, need at least 2",
            series.len()
        )));
    }
    let first = series[0];
    let last = series[series.len() - 1];
    Ok(
        (first.e_eps - last.e_eps - (last.diss_cum - first.diss_cum)).abs()
            / first.e_eps.max(1e-300),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    BoundViolated,
    DistanceExceeded,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::BoundViolated => "bound violated",
            Verdict::DistanceExceeded => "distance exceeded",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundCertificate {
    pub n_layers: usize,
    /// Transition cost per layer (`c₀`, or the mean jump cost for systems).
    pub c0: f64,
    /// Limit energy `N c₀` (or `P₀[v]`).
    pub limit_energy: f64,
    pub rate: f64,
    pub eps: f64,
    pub l1_distance: f64,
    pub delta: f64,
    pub excess: f64,
    /// `−exp(−A/ε)`, with `C = 1`.
    pub floor: f64,
    pub verdict: Verdict,
}

impl LowerBoundCertificate {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        n_layers: usize,
        c0: f64,
        limit_energy: f64,
        energy: f64,
        rate: f64,
        eps: f64,
        l1_distance: f64,
        delta: f64,
    ) -> Self {
        let excess = energy - limit_energy;
        let floor = -(-rate / eps).exp();
        let verdict = if l1_distance > delta {
            Verdict::DistanceExceeded
        } else if excess >= floor {
            Verdict::Pass
        } else {
            Verdict::BoundViolated
        };
        Self {
            n_layers,
            c0,
            limit_energy,
            rate,
            eps,
            l1_distance,
            delta,
            excess,
            floor,
            verdict,
        }
    }
}

/// Default L¹ gate `δ = r/4 · (well gap)`.
pub fn default_delta(v: &StepProfile, p: &ScalarPotential) -> f64 {
    let [lo, hi] = p.wells();
    v.radius() / 4.0 * (hi - lo)
}

/// `P_ε[u] ≥ N c₀ − exp(−A/ε)` for `u` within `δ` of `v` in the primitive
/// L¹ distance (`ū` for Dirichlet, `ũ` for Neumann). `delta = None` uses
/// [`default_delta`].
pub fn lower_bound_certificate(
    u: &GridFunction,
    v: &StepProfile,
    p: &ScalarPotential,
    eps: f64,
    rate: f64,
    mode: &BoundaryMode,
    delta: Option<f64>,
) -> Result<LowerBoundCertificate> {
    let c0 = p.c0(1e-12)?;
    let pu = primitive_for(u, mode);
    let pv = step_primitive_for(v, u.grid, mode);
    let n = v.n_layers();
    Ok(LowerBoundCertificate::assemble(
        n,
        c0,
        n as f64 * c0,
        p_eps(u, p, eps),
        rate,
        eps,
        pu.l1_distance(&pv),
        delta.unwrap_or_else(|| default_delta(v, p)),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of `log(excess)`.
    pub residual: f64,
}

/// Least-squares fit of `log(excess)` against `1/ε`.
pub fn excess_decay_fit(pairs: &[(f64, f64)]) -> Result<DecayFit> {
    log_linear_fit(pairs, 3)
}

/// Least-squares fit of `log(y)` against `1/ε` over `(ε, y)` pairs, used
/// for excesses and exit times alike.
pub fn log_linear_fit(pairs: &[(f64, f64)], min_points: usize) -> Result<DecayFit> {
    if pairs.len() < min_points.max(2) {
        return Err(Error::InsufficientData(format!(
            "{} pairs, need at least {}",
            pairs.len(),
            min_points.max(2)
        )));
    }
    if let Some(&(eps, y)) = pairs.iter().find(|&&(_, y)| !(y > 0.0)) {
        return Err(Error::InsufficientData(format!(
            "non-positive value {y:e} at eps = {eps}"
        )));
    }
    let pts: Vec<(f64, f64)> = pairs.iter().map(|&(e, y)| (1.0 / e, y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all eps values coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(DecayFit {
        slope,
        intercept,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::profiles::{build_layer_profile, StandingWave};

    fn unit(n: usize) -> Grid {
        Grid::new(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn p_eps_examples() {
        let p = ScalarPotential::quartic();
        assert_eq!(p_eps(&GridFunction::constant(unit(33), 1.0), &p, 0.1), 0.0);
        let u = GridFunction::from_fn(unit(2001), |x| x);
        // trapezoid error of ∫(x²−1)²/4 is dx²/12 · [W']₀¹ = 0
        assert!((p_eps(&u, &p, 1.0) - 19.0 / 30.0).abs() < 1e-7);
    }

    #[test]
    fn p_eps_of_single_layer_sits_in_window() {
        let p = ScalarPotential::quartic();
        let c0 = p.c0(1e-13).unwrap();
        let eps = 0.02;
        let v = StepProfile::new((0.0, 1.0), vec![0.5], 1.0 / 6.0, -1.0).unwrap();
        let grid = unit(64_001);
        let u = build_layer_profile(&v, &StandingWave::Tanh, eps, grid).unwrap();
        let pe = p_eps(&u, &p, eps);
        assert!(
            pe >= c0 - 1e-6 && pe <= c0 + (-0.3f64 / eps).exp(),
            "{pe} vs {c0}"
        );
    }

    #[test]
    fn p_eps_reflection_invariant() {
        let p = ScalarPotential::quartic();
        let grid = unit(101);
        let u = GridFunction::from_fn(grid, |x| (5.0 * x).sin() + 0.3 * x);
        let mut r = u.clone();
        r.values.reverse();
        assert!((p_eps(&u, &p, 0.1) - p_eps(&r, &p, 0.1)).abs() < 1e-12);
    }

    #[test]
    fn energy_report_examples() {
        let p = ScalarPotential::quartic();
        let grid = unit(101);
        let u = GridFunction::from_fn(grid, |x| (3.0 * x).cos());
        let rep = e_eps(&u, &FaceField::zeros(grid), &p, 0.1, 1.0);
        assert_eq!(rep.e_eps, rep.p_eps);
        let w = GridFunction::from_fn(grid, |x| (7.0 * x).sin());
        let f = velocity_primitive(&w, &BoundaryMode::Neumann);
        let r1 = e_eps(&u, &f, &p, 0.1, 1.0);
        let r2 = e_eps(&u, &f, &p, 0.1, 2.0);
        assert_eq!(r1.p_eps, r2.p_eps);
        assert!((r2.kinetic - 2.0 * r1.kinetic).abs() < 1e-15 * r2.kinetic);
        assert_eq!(r1.e_eps, r1.p_eps + r1.kinetic);
    }

    #[test]
    fn dirichlet_primitive_has_zero_face_mean() {
        let grid = unit(64);
        let mut w = GridFunction::from_fn(grid, |x| (9.0 * x).cos() + 0.2);
        w.values[0] = 0.0;
        w.values[63] = 0.0;
        let f = velocity_primitive(
            &w,
            &BoundaryMode::Dirichlet {
                left: 1.0,
                right: 1.0,
            },
        );
        assert!(f.integral().abs() < 1e-15);
        // differences reproduce m_j w_j
        for i in 1..62 {
            assert!((f.values[i] - f.values[i - 1] - grid.dx() * w.values[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn mass_closed_form_examples() {
        assert_eq!(mass_closed_form(3.0, 0.7, 0.0, 1.0), 0.7);
        assert!((mass_closed_form(2f64.ln(), 0.0, 1.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((mass_closed_form(50.0 * 2.0, 0.3, 0.5, 2.0) - 1.3).abs() < 1e-12);
        let ts = [0.0, 0.5, 1.0, 3.0];
        for w in ts.windows(2) {
            assert!(mass_closed_form(w[1], 0.0, 0.1, 1.0) > mass_closed_form(w[0], 0.0, 0.1, 1.0));
        }
    }

    #[test]
    fn residual_of_stationary_series_is_zero() {
        let r = EnergyReport {
            t: 0.0,
            p_eps: 1.0,
            kinetic: 0.0,
            e_eps: 1.0,
            mass: 0.0,
            diss_cum: 0.0,
        };
        assert_eq!(
            dissipation_identity_residual(&[r, r.at(1.0, 0.0)]).unwrap(),
            0.0
        );
        assert!(dissipation_identity_residual(&[r]).is_err());
    }

    #[test]
    fn decay_fit_recovers_exponent() {
        let eps: [f64; 4] = [0.05, 0.04, 0.03, 0.025];
        let pairs: Vec<_> = eps.iter().map(|&e| (e, (-0.3 / e).exp())).collect();
        let fit = excess_decay_fit(&pairs).unwrap();
        assert!((fit.slope + 0.3).abs() < 1e-10);
        let pairs: Vec<_> = eps.iter().map(|&e| (e, 2.0 * (-0.3 / e).exp())).collect();
        let fit = excess_decay_fit(&pairs).unwrap();
        assert!((fit.slope + 0.3).abs() < 1e-10);
        assert!((fit.intercept - 2f64.ln()).abs() < 1e-9);
        assert!(excess_decay_fit(&[(0.1, 1.0), (0.2, 0.0), (0.3, 1.0)]).is_err());
        assert!(excess_decay_fit(&pairs[..2]).is_err());
        let two = log_linear_fit(&pairs[..2], 2).unwrap();
        assert!((two.slope + 0.3).abs() < 1e-10 && two.residual < 1e-12);
        assert!(log_linear_fit(&pairs[..1], 1).is_err());
    }

    #[test]
    fn certificate_examples() {
        let p = ScalarPotential::quartic();
        let eps = 0.02;
        let v = StepProfile::new((0.0, 1.0), vec![0.5], 1.0 / 6.0, -1.0).unwrap();
        // the construction excess is about 1e-9 here, so the quadrature
        // error must be far below that
        let grid = unit((1 << 20) + 1);
        let u0 = build_layer_profile(&v, &StandingWave::Tanh, eps, grid).unwrap();
        for mode in [
            BoundaryMode::Neumann,
            BoundaryMode::Dirichlet {
                left: -1.0,
                right: 1.0,
            },
        ] {
            let c = lower_bound_certificate(&u0, &v, &p, eps, 0.3, &mode, None).unwrap();
            assert_eq!(c.verdict, Verdict::Pass);
            assert!(c.excess > 0.0);

            let plus = GridFunction::constant(grid, 1.0);
            let c = lower_bound_certificate(&plus, &v, &p, eps, 0.3, &mode, None).unwrap();
            assert_eq!(c.verdict, Verdict::DistanceExceeded);
            assert_eq!(c.verdict.to_string(), "distance exceeded");

            let wide =
                GridFunction::from_fn(grid, |x| ((x - 0.5) / (10.0 * eps * 2f64.sqrt())).tanh());
            let c = lower_bound_certificate(&wide, &v, &p, eps, 0.3, &mode, None).unwrap();
            assert!(c.excess >= c.floor);
            assert_ne!(c.verdict, Verdict::BoundViolated);
        }
    }
}
