//! Time integration of `τ u_tt + u_t = (−ε² u_xx + W'(u))_xx`.
//!
//! Three formulations share the same spatial operators:
//!
//! * `SecondOrder`: the system `u_t = w`, `τ w_t = −w − ε² D₄u + D₂ W'(u)`,
//!   IMEX in time with the stiff `ε² D₄` term implicit;
//! * `Flux`: `u_t + Dv J = 0`, `τ J_t + J = −G(−ε² D₂u + W'(u))` with `u`
//!   at nodes and `J` on faces (Neumann only);
//! * `ClassicCh`: the `τ = 0` Cahn-Hilliard reference.
//!
//! Boundary closures use two ghost nodes per side: even reflection for
//! homogeneous Neumann, odd reflection about the pinned well value for
//! Dirichlet. With trapezoid weights the Neumann `D₂` equals `Dv ∘ G`, so
//! all formulations conserve the discrete mass when they should.

use serde::{Deserialize, Serialize};

use crate::banded::{BandedLu, Pentadiagonal};
use crate::diagnostics::velocity_primitive;
use crate::error::{Error, Result};
use crate::grid::{FaceField, Grid, GridFunction};
use crate::potential::ScalarPotential;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BoundaryMode {
    /// `u_x = u_xxx = 0` at both ends.
    Neumann,
    /// `u(a) = left`, `u(b) = right` (each ±1) and `u_xx = 0` at both ends.
    Dirichlet {
        #[serde(rename = "left_sign")]
        left: f64,
        #[serde(rename = "right_sign")]
        right: f64,
    },
}

impl BoundaryMode {
    pub fn validate(&self) -> Result<()> {
        if let BoundaryMode::Dirichlet { left, right } = *self {
            for s in [left, right] {
                if s != 1.0 && s != -1.0 {
                    return Err(Error::Config(format!(
                        "dirichlet signs must be ±1, got {s}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            BoundaryMode::Neumann => "neumann",
            BoundaryMode::Dirichlet { .. } => "dirichlet",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formulation {
    SecondOrder,
    Flux,
    ClassicCh,
}

impl Formulation {
    pub fn name(&self) -> &'static str {
        match self {
            Formulation::SecondOrder => "second-order",
            Formulation::Flux => "flux",
            Formulation::ClassicCh => "classic-ch",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "second-order" => Ok(Formulation::SecondOrder),
            "flux" => Ok(Formulation::Flux),
            "classic-ch" => Ok(Formulation::ClassicCh),
            other => Err(Error::Parse(format!("unknown formulation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub eps: f64,
    pub tau: f64,
    pub dt: f64,
    pub t_max: f64,
    pub formulation: Formulation,
    pub boundary: BoundaryMode,
    pub safety: f64,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::Config(format!(
                "eps = {} must be positive",
                self.eps
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt = {} must be positive", self.dt)));
        }
        match self.formulation {
            Formulation::ClassicCh => {}
            _ if !(self.tau > 0.0) => {
                return Err(Error::Config(format!(
                    "tau = {} must be positive",
                    self.tau
                )));
            }
            _ => {}
        }
        if self.formulation == Formulation::Flux && self.boundary != BoundaryMode::Neumann {
            return Err(Error::Config("flux requires neumann".into()));
        }
        self.boundary.validate()
    }
}

/// Time derivative data carried alongside `u`.
#[derive(Debug, Clone, PartialEq)]
pub enum Rate {
    /// `w = u_t` at the nodes (for `ClassicCh`: the last step's difference quotient).
    Velocity(GridFunction),
    /// `J` on the faces.
    Flux(FaceField),
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub step: u64,
    pub u: GridFunction,
    pub rate: Rate,
}

impl State {
    pub fn grid(&self) -> Grid {
        self.u.grid
    }

    /// `u_t` at the nodes.
    pub fn velocity(&self) -> GridFunction {
        match &self.rate {
            Rate::Velocity(w) => w.clone(),
            Rate::Flux(j) => {
                let mut out = vec![0.0; self.u.len()];
                divergence(&j.values, self.grid().dx(), &mut out);
                GridFunction {
                    grid: self.grid(),
                    values: out.into_iter().map(|d| -d).collect(),
                }
            }
        }
    }
}

/// Extends `u` by two ghost nodes per side.
pub fn apply_boundary_ghosts(u: &[f64], mode: &BoundaryMode) -> Vec<f64> {
    let mut ext = vec![0.0; u.len() + 4];
    fill_ghosts(u, mode, &mut ext);
    ext
}

pub(crate) fn fill_ghosts(u: &[f64], mode: &BoundaryMode, ext: &mut [f64]) {
    let n = u.len();
    ext[2..n + 2].copy_from_slice(u);
    match *mode {
        BoundaryMode::Neumann => {
            ext[1] = u[1];
            ext[0] = u[2];
            ext[n + 2] = u[n - 2];
            ext[n + 3] = u[n - 3];
        }
        BoundaryMode::Dirichlet { left, right } => {
            ext[2] = left;
            ext[1] = 2.0 * left - u[1];
            ext[0] = 2.0 * left - u[2];
            ext[n + 1] = right;
            ext[n + 2] = 2.0 * right - u[n - 2];
            ext[n + 3] = 2.0 * right - u[n - 3];
        }
    }
}

#[inline]
pub(crate) fn d2_ext(ext: &[f64], i: usize, inv_dx2: f64) -> f64 {
    (ext[i + 1] - 2.0 * ext[i + 2] + ext[i + 3]) * inv_dx2
}

#[inline]
pub(crate) fn d4_ext(ext: &[f64], i: usize, inv_dx4: f64) -> f64 {
    (ext[i] - 4.0 * ext[i + 1] + 6.0 * ext[i + 2] - 4.0 * ext[i + 3] + ext[i + 4]) * inv_dx4
}

/// `(Dv J)_i` with zero flux through both boundary faces.
pub(crate) fn divergence(j: &[f64], dx: f64, out: &mut [f64]) {
    let n = out.len();
    out[0] = 2.0 * j[0] / dx;
    for i in 1..n - 1 {
        out[i] = (j[i] - j[i - 1]) / dx;
    }
    out[n - 1] = -2.0 * j[n - 2] / dx;
}

/// Five-point `D₄` with the homogeneous ghost closure of `mode` (even
/// reflection, or odd reflection about 0 with pinned boundary rows).
pub fn d4_matrix(n: usize, dx: f64, mode: &BoundaryMode) -> Pentadiagonal {
    let stencil = [1.0, -4.0, 6.0, -4.0, 1.0];
    let inv = 1.0 / dx.powi(4);
    let odd = matches!(mode, BoundaryMode::Dirichlet { .. });
    let mut m = Pentadiagonal::zeros(n);
    for i in 0..n {
        if odd && (i == 0 || i + 1 == n) {
            continue;
        }
        for (k, &c) in stencil.iter().enumerate() {
            let j = i as isize + k as isize - 2;
            let (col, sign) = if j < 0 {
                ((-j) as usize, if odd { -1.0 } else { 1.0 })
            } else if j as usize >= n {
                (2 * (n - 1) - j as usize, if odd { -1.0 } else { 1.0 })
            } else {
                (j as usize, 1.0)
            };
            let cur = m.get(i, col);
            m.set(i, col, cur + sign * c * inv);
        }
    }
    m
}

/// Face Laplacian `G ∘ Dv` (tridiagonal, faces to faces).
fn face_laplacian(faces: usize, dx: f64) -> Pentadiagonal {
    let inv = 1.0 / (dx * dx);
    let mut m = Pentadiagonal::zeros(faces);
    for f in 0..faces {
        if f > 0 {
            m.set(f, f - 1, inv);
        }
        if f + 1 < faces {
            m.set(f, f + 1, inv);
        }
        let diag = if f == 0 || f + 1 == faces { -3.0 } else { -2.0 };
        m.set(f, f, diag * inv);
    }
    m
}

fn square_tridiagonal(t: &Pentadiagonal) -> Pentadiagonal {
    let n = t.len();
    let mut out = Pentadiagonal::zeros(n);
    for i in 0..n {
        for j in i.saturating_sub(2)..(i + 3).min(n) {
            let mut s = 0.0;
            for k in i.saturating_sub(1)..(i + 2).min(n) {
                s += t.get(i, k) * t.get(k, j);
            }
            out.set(i, j, s);
        }
    }
    out
}

/// `dt = safety · min(τ, dx² sqrt(τ)/ε, ε dx²/max|W''|)`, with the maximum
/// taken over `[-1.5, 1.5]`; the τ-dependent candidates drop out for the
/// classic equation.
pub fn select_dt(cfg: &SolverConfig, grid: Grid, p: &ScalarPotential) -> Result<f64> {
    if !(cfg.safety > 0.0) {
        return Err(Error::Config("safety must be positive".into()));
    }
    let dx2 = grid.dx() * grid.dx();
    let wmax = p.max_abs_deriv2(-1.5, 1.5, 3000).max(f64::MIN_POSITIVE);
    let mut dt = cfg.eps * dx2 / wmax;
    if cfg.formulation != Formulation::ClassicCh {
        dt = dt.min(cfg.tau).min(dx2 * cfg.tau.sqrt() / cfg.eps);
    }
    Ok(cfg.safety * dt)
}

/// Integrator owning the per-run factorization cache and work buffers.
#[derive(Debug, Clone)]
pub struct Solver {
    cfg: SolverConfig,
    potential: ScalarPotential,
    grid: Grid,
    lu: BandedLu,
    ext: Vec<f64>,
    ext_w: Vec<f64>,
    rhs: Vec<f64>,
    mu: Vec<f64>,
    div: Vec<f64>,
}

impl Solver {
    pub fn new(cfg: SolverConfig, potential: ScalarPotential, grid: Grid) -> Result<Self> {
        cfg.validate()?;
        let n = grid.len();
        let dx = grid.dx();
        let lu = match cfg.formulation {
            Formulation::SecondOrder => implicit_matrix(
                n,
                dx,
                &cfg.boundary,
                cfg.tau / cfg.dt + 1.0,
                cfg.dt * cfg.eps * cfg.eps,
            )
            .factor()?,
            Formulation::ClassicCh => {
                implicit_matrix(n, dx, &cfg.boundary, 1.0, cfg.dt * cfg.eps * cfg.eps).factor()?
            }
            Formulation::Flux => {
                let lf2 = square_tridiagonal(&face_laplacian(n - 1, dx));
                lf2.scale_shift(cfg.eps * cfg.eps * cfg.dt, cfg.tau / cfg.dt + 1.0)
                    .factor()?
            }
        };
        Ok(Self {
            cfg,
            potential,
            grid,
            lu,
            ext: vec![0.0; n + 4],
            ext_w: vec![0.0; n + 4],
            rhs: vec![0.0; n],
            mu: vec![0.0; n],
            div: vec![0.0; n],
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn potential(&self) -> &ScalarPotential {
        &self.potential
    }

    /// Builds the state at `t = 0` from `u_0`, `u_1`, checking the boundary
    /// compatibility of both.
    pub fn initial_state(&self, u0: GridFunction, u1: GridFunction) -> Result<State> {
        if u0.grid != self.grid || u1.grid != self.grid {
            return Err(Error::Config(
                "initial data grid differs from solver grid".into(),
            ));
        }
        if let BoundaryMode::Dirichlet { left, right } = self.cfg.boundary {
            let n = u0.len();
            if (u0.values[0] - left).abs() > 1e-12 || (u0.values[n - 1] - right).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "dirichlet signs ({left}, {right}) do not match u0 boundary values ({}, {})",
                    u0.values[0],
                    u0.values[n - 1]
                )));
            }
            if u1.values[0] != 0.0 || u1.values[n - 1] != 0.0 {
                return Err(Error::Config(
                    "dirichlet mode requires u1(a) = u1(b) = 0".into(),
                ));
            }
        }
        let rate = match self.cfg.formulation {
            Formulation::SecondOrder | Formulation::ClassicCh => Rate::Velocity(u1),
            Formulation::Flux => {
                let mass = u1.integral();
                if mass.abs() > 1e-12 * (1.0 + u1.max_abs()) {
                    return Err(Error::Config(format!(
                        "flux formulation needs zero-mean u1 (mass {mass:e}) for J(a) = J(b) = 0"
                    )));
                }
                let f = velocity_primitive(&u1, &BoundaryMode::Neumann);
                Rate::Flux(FaceField {
                    grid: self.grid,
                    values: f.values.iter().map(|v| -v).collect(),
                })
            }
        };
        Ok(State {
            t: 0.0,
            step: 0,
            u: u0,
            rate,
        })
    }

    /// One time step in place.
    pub fn step(&mut self, s: &mut State) -> Result<()> {
        match self.cfg.formulation {
            Formulation::SecondOrder => self.step_second_order(s),
            Formulation::Flux => self.step_flux(s),
            Formulation::ClassicCh => self.step_classic(s),
        }?;
        s.step += 1;
        s.t += self.cfg.dt;
        if s.u.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver {
                step: s.step,
                t: s.t,
                reason: "non-finite value in u".into(),
            });
        }
        Ok(())
    }

    /// `D₂ W'(u)` and `ε² D₄ u` into `rhs` as `D₂W'(u) − ε² D₄u`.
    fn explicit_terms(&mut self, u: &[f64]) {
        let n = u.len();
        let dx = self.grid.dx();
        let inv_dx2 = 1.0 / (dx * dx);
        let inv_dx4 = inv_dx2 * inv_dx2;
        let eps2 = self.cfg.eps * self.cfg.eps;
        fill_ghosts(u, &self.cfg.boundary, &mut self.ext);
        for (e, w) in self.ext_w.iter_mut().zip(&self.ext) {
            *e = self.potential.deriv(*w);
        }
        for i in 0..n {
            self.rhs[i] = d2_ext(&self.ext_w, i, inv_dx2) - eps2 * d4_ext(&self.ext, i, inv_dx4);
        }
        if matches!(self.cfg.boundary, BoundaryMode::Dirichlet { .. }) {
            self.rhs[0] = 0.0;
            self.rhs[n - 1] = 0.0;
        }
    }

    fn step_second_order(&mut self, s: &mut State) -> Result<()> {
        let Rate::Velocity(w) = &mut s.rate else {
            return Err(Error::Config(
                "second-order step needs a velocity state".into(),
            ));
        };
        self.explicit_terms(&s.u.values);
        let c = self.cfg.tau / self.cfg.dt;
        for (r, wi) in self.rhs.iter_mut().zip(&w.values) {
            *r += c * wi;
        }
        if matches!(self.cfg.boundary, BoundaryMode::Dirichlet { .. }) {
            let n = self.rhs.len();
            self.rhs[0] = 0.0;
            self.rhs[n - 1] = 0.0;
        }
        self.lu.solve(&mut self.rhs);
        let dt = self.cfg.dt;
        w.values.copy_from_slice(&self.rhs);
        for (u, wi) in s.u.values.iter_mut().zip(&w.values) {
            *u += dt * wi;
        }
        Ok(())
    }

    fn step_classic(&mut self, s: &mut State) -> Result<()> {
        self.explicit_terms(&s.u.values);
        let dt = self.cfg.dt;
        for r in self.rhs.iter_mut() {
            *r *= dt;
        }
        self.lu.solve(&mut self.rhs);
        for (u, d) in s.u.values.iter_mut().zip(&self.rhs) {
            *u += d;
        }
        let w: Vec<f64> = self.rhs.iter().map(|d| d / dt).collect();
        s.rate = Rate::Velocity(GridFunction {
            grid: self.grid,
            values: w,
        });
        Ok(())
    }

    fn step_flux(&mut self, s: &mut State) -> Result<()> {
        let Rate::Flux(j) = &mut s.rate else {
            return Err(Error::Config("flux step needs a flux state".into()));
        };
        let n = s.u.len();
        let dx = self.grid.dx();
        let inv_dx2 = 1.0 / (dx * dx);
        let eps2 = self.cfg.eps * self.cfg.eps;
        fill_ghosts(&s.u.values, &BoundaryMode::Neumann, &mut self.ext);
        for i in 0..n {
            self.mu[i] =
                -eps2 * d2_ext(&self.ext, i, inv_dx2) + self.potential.deriv(s.u.values[i]);
        }
        let c = self.cfg.tau / self.cfg.dt;
        let rhs = &mut self.rhs[..n - 1];
        for f in 0..n - 1 {
            rhs[f] = c * j.values[f] - (self.mu[f + 1] - self.mu[f]) / dx;
        }
        self.lu.solve(rhs);
        j.values.copy_from_slice(rhs);
        divergence(&j.values, dx, &mut self.div);
        let dt = self.cfg.dt;
        for (u, d) in s.u.values.iter_mut().zip(&self.div) {
            *u -= dt * d;
        }
        Ok(())
    }

    /// `ε^{-1} ‖primitive(u_t)‖²`, the instantaneous dissipation rate.
    pub fn dissipation_rate(&self, s: &State) -> f64 {
        primitive_norm_sq(s, &self.cfg.boundary) / self.cfg.eps
    }
}

/// `‖F‖²` for the face primitive `F` of `u_t` matching the boundary mode.
pub fn primitive_norm_sq(s: &State, mode: &BoundaryMode) -> f64 {
    match &s.rate {
        Rate::Flux(j) => j.l2_norm_sq(),
        Rate::Velocity(w) => velocity_primitive(w, mode).l2_norm_sq(),
    }
}

/// `a I + b D₄` with the boundary rows of Dirichlet mode pinned.
pub(crate) fn implicit_matrix(
    n: usize,
    dx: f64,
    mode: &BoundaryMode,
    a: f64,
    b: f64,
) -> Pentadiagonal {
    let mut m = d4_matrix(n, dx, mode).scale_shift(b, a);
    if matches!(mode, BoundaryMode::Dirichlet { .. }) {
        *m.row_mut(0) = [0.0, 0.0, 1.0, 0.0, 0.0];
        *m.row_mut(n - 1) = [0.0, 0.0, 1.0, 0.0, 0.0];
    }
    m
}

pub fn step_second_order(s: &State, cfg: &SolverConfig, p: &ScalarPotential) -> Result<State> {
    if cfg.formulation != Formulation::SecondOrder {
        return Err(Error::Config(
            "step_second_order needs the second-order formulation".into(),
        ));
    }
    single_step(s, cfg, p)
}

pub fn step_flux(s: &State, cfg: &SolverConfig, p: &ScalarPotential) -> Result<State> {
    if cfg.formulation != Formulation::Flux {
        return Err(Error::Config("step_flux needs the flux formulation".into()));
    }
    single_step(s, cfg, p)
}

pub fn step_classic_ch(s: &State, cfg: &SolverConfig, p: &ScalarPotential) -> Result<State> {
    if cfg.formulation != Formulation::ClassicCh {
        return Err(Error::Config(
            "step_classic_ch needs the classic formulation".into(),
        ));
    }
    single_step(s, cfg, p)
}

fn single_step(s: &State, cfg: &SolverConfig, p: &ScalarPotential) -> Result<State> {
    let mut solver = Solver::new(*cfg, p.clone(), s.grid())?;
    let mut next = s.clone();
    solver.step(&mut next)?;
    Ok(next)
}

/// A time stepper driven by [`run`].
pub trait Integrator {
    type State: Clone;

    fn step(&mut self, s: &mut Self::State) -> Result<()>;
    /// `ε^{-1} ‖primitive(u_t)‖²`.
    fn dissipation_rate(&self, s: &Self::State) -> f64;
    fn dt(&self) -> f64;
    fn t_max(&self) -> f64;
    fn time(s: &Self::State) -> f64;
    fn set_time(s: &mut Self::State, t: f64);
    fn steps(s: &Self::State) -> u64;
}

impl Integrator for Solver {
    type State = State;

    fn step(&mut self, s: &mut State) -> Result<()> {
        Solver::step(self, s)
    }

    fn dissipation_rate(&self, s: &State) -> f64 {
        Solver::dissipation_rate(self, s)
    }

    fn dt(&self) -> f64 {
        self.cfg.dt
    }

    fn t_max(&self) -> f64 {
        self.cfg.t_max
    }

    fn time(s: &State) -> f64 {
        s.t
    }

    fn set_time(s: &mut State, t: f64) {
        s.t = t;
    }

    fn steps(s: &State) -> u64 {
        s.step
    }
}

/// Receives the state at `t = 0` and after every output stride, together
/// with the cumulative dissipation.
pub trait Observer<S> {
    fn observe(&mut self, s: &S, diss_cum: f64) -> Result<()>;
}

impl<S, F: FnMut(&S, f64) -> Result<()>> Observer<S> for F {
    fn observe(&mut self, s: &S, diss_cum: f64) -> Result<()> {
        self(s, diss_cum)
    }
}

pub type StopPredicate<'a, S> = Box<dyn FnMut(&S) -> bool + 'a>;

pub struct RunOptions<'a, S> {
    /// Steps between observer calls.
    pub output_every: u64,
    /// Checked at every output stride, including `t = 0`.
    pub stop: Option<StopPredicate<'a, S>>,
}

impl<S> Default for RunOptions<'_, S> {
    fn default() -> Self {
        Self {
            output_every: 1,
            stop: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome<S> {
    pub state: S,
    /// `ε^{-1} ∫ ‖primitive(u_t)‖² dt`, trapezoid in time over every step.
    pub diss_cum: f64,
    pub stopped: bool,
}

/// Advances until `t >= t_max` or the stop predicate fires.
pub fn run<I: Integrator>(
    solver: &mut I,
    s0: I::State,
    observers: &mut [&mut dyn Observer<I::State>],
    mut opts: RunOptions<'_, I::State>,
) -> Result<RunOutcome<I::State>> {
    let dt = solver.dt();
    let t_max = solver.t_max();
    let stride = opts.output_every.max(1);
    let mut s = s0;
    let t0 = I::time(&s);
    let step0 = I::steps(&s);
    let total = if t_max > t0 {
        ((t_max - t0) / dt - 1e-9).ceil() as u64
    } else {
        0
    };
    let mut diss_cum = 0.0;
    let mut rate = solver.dissipation_rate(&s);
    for o in observers.iter_mut() {
        o.observe(&s, diss_cum)?;
    }
    if let Some(stop) = opts.stop.as_mut() {
        if stop(&s) {
            return Ok(RunOutcome {
                state: s,
                diss_cum,
                stopped: true,
            });
        }
    }
    for k in 1..=total {
        solver.step(&mut s).map_err(|e| match e {
            Error::Solver { reason, .. } => Error::Solver {
                step: step0 + k,
                t: t0 + k as f64 * dt,
                reason,
            },
            other => other,
        })?;
        I::set_time(&mut s, t0 + k as f64 * dt);
        let next = solver.dissipation_rate(&s);
        diss_cum += 0.5 * dt * (rate + next);
        rate = next;
        if k % stride == 0 || k == total {
            for o in observers.iter_mut() {
                o.observe(&s, diss_cum)?;
            }
            if let Some(stop) = opts.stop.as_mut() {
                if stop(&s) {
                    return Ok(RunOutcome {
                        state: s,
                        diss_cum,
                        stopped: true,
                    });
                }
            }
        }
    }
    Ok(RunOutcome {
        state: s,
        diss_cum,
        stopped: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::project_zero_mean;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn cfg(
        formulation: Formulation,
        boundary: BoundaryMode,
        eps: f64,
        tau: f64,
        dt: f64,
    ) -> SolverConfig {
        SolverConfig {
            eps,
            tau,
            dt,
            t_max: 1.0,
            formulation,
            boundary,
            safety: 0.2,
        }
    }

    #[test]
    fn ghost_examples() {
        let u: Vec<f64> = (1..=10).map(f64::from).collect();
        let ext = apply_boundary_ghosts(&u, &BoundaryMode::Neumann);
        assert_eq!(&ext[..2], &[3.0, 2.0]);
        assert_eq!(&ext[12..], &[9.0, 8.0]);

        let mut d = vec![1.0, 0.8, 0.5, 0.1, 0.0, -0.2, -0.6, -1.0];
        d[0] = 1.0;
        let ext = apply_boundary_ghosts(
            &d,
            &BoundaryMode::Dirichlet {
                left: 1.0,
                right: -1.0,
            },
        );
        assert!((ext[1] - 1.2).abs() < 1e-15);
        assert!((ext[10] - (-2.0 + 0.6)).abs() < 1e-15);
    }

    #[test]
    fn neumann_ghosts_zero_odd_derivatives() {
        let u: Vec<f64> = (0..20)
            .map(|i| (0.3 * i as f64).cos() + 0.1 * i as f64)
            .collect();
        let ext = apply_boundary_ghosts(&u, &BoundaryMode::Neumann);
        let dx = 0.05;
        for c in [2usize, u.len() + 1] {
            let ux = (ext[c + 1] - ext[c - 1]) / (2.0 * dx);
            let uxxx = (ext[c + 2] - 2.0 * ext[c + 1] + 2.0 * ext[c - 1] - ext[c - 2])
                / (2.0 * dx.powi(3));
            assert_eq!(ux, 0.0);
            assert_eq!(uxxx, 0.0);
        }
    }

    #[test]
    fn uniform_wells_are_fixed_points() {
        let grid = Grid::new(0.0, 1.0, 64).unwrap();
        let p = ScalarPotential::quartic();
        for (form, bc) in [
            (Formulation::SecondOrder, BoundaryMode::Neumann),
            (
                Formulation::SecondOrder,
                BoundaryMode::Dirichlet {
                    left: 1.0,
                    right: 1.0,
                },
            ),
            (Formulation::Flux, BoundaryMode::Neumann),
            (Formulation::ClassicCh, BoundaryMode::Neumann),
        ] {
            for c in [1.0, 0.0, -1.0] {
                if matches!(bc, BoundaryMode::Dirichlet { .. }) && c != 1.0 {
                    continue;
                }
                let solver = Solver::new(cfg(form, bc, 0.05, 1.0, 1e-3), p.clone(), grid).unwrap();
                let s0 = solver
                    .initial_state(GridFunction::constant(grid, c), GridFunction::zeros(grid))
                    .unwrap();
                let s1 = single_step(&s0, solver.config(), &p).unwrap();
                for v in &s1.u.values {
                    assert!((v - c).abs() <= 1e-14, "{form:?} {c}");
                }
            }
        }
    }

    /// Discrete symbol of the Neumann `D₂` on `cos(kx)` (an exact eigenvector
    /// of the even-reflection stencils when `k (b − a)/π` is an integer).
    fn d2_symbol(k: f64, dx: f64) -> f64 {
        -4.0 / (dx * dx) * (0.5 * k * dx).sin().powi(2)
    }

    /// Amplitude after one step from `1 ± δ cos(kx)`, `w = 0`, at x = 0. The
    /// symmetric difference cancels the quadratic part of `W'`.
    fn one_step_amplitude(form: Formulation, n: usize, k: f64, eps: f64, tau: f64, dt: f64) -> f64 {
        let grid = Grid::new(0.0, 1.0, n).unwrap();
        let p = ScalarPotential::quartic();
        let delta = 1e-4;
        let c = cfg(form, BoundaryMode::Neumann, eps, tau, dt);
        let solver = Solver::new(c, p.clone(), grid).unwrap();
        let end = |d: f64| {
            let u0 = GridFunction::from_fn(grid, |x| 1.0 + d * (k * x).cos());
            let s0 = solver.initial_state(u0, GridFunction::zeros(grid)).unwrap();
            single_step(&s0, &c, &p).unwrap().u.values[0]
        };
        (end(delta) - end(-delta)) / (2.0 * delta)
    }

    #[test]
    fn dispersion_relation_second_order() {
        let (n, eps, tau, dt) = (129, 0.05, 1.0, 1e-4);
        let k = 3.0 * PI;
        let dx = 1.0 / (n - 1) as f64;
        let amp = one_step_amplitude(Formulation::SecondOrder, n, k, eps, tau, dt);
        // discrete oracle: (τ/dt + 1 + dt ε² λ²) w' = −ε² λ² + 2λ, u' = 1 + dt w'
        let l = d2_symbol(k, dx);
        let discrete =
            1.0 + dt * (2.0 * l - eps * eps * l * l) / (tau / dt + 1.0 + dt * eps * eps * l * l);
        assert!((amp - discrete).abs() < 1e-9, "{amp} vs {discrete}");
        // continuous oracle: slow root of τ s² + s + c = 0 for a(0) = 1, a'(0) = 0
        let c = eps * eps * k.powi(4) + 2.0 * k * k;
        let disc = 1.0 - 4.0 * tau * c;
        assert!(disc < 0.0);
        let (s_re, s_im) = (-1.0 / (2.0 * tau), (-disc).sqrt() / (2.0 * tau));
        let exact = (s_re * dt).exp() * ((s_im * dt).cos() - (s_re / s_im) * (s_im * dt).sin());
        let tol = 2.0 * (c / tau) * dt * dt * (1.0 + (k * dx).powi(2));
        assert!(
            (amp - exact).abs() < tol,
            "amp {amp} exact {exact} tol {tol}"
        );
    }

    #[test]
    fn classic_decay_rate_matches_linear_theory() {
        let (n, eps, dt) = (257, 0.05, 1e-5);
        let k = 2.0 * PI;
        let dx = 1.0 / (n - 1) as f64;
        let amp = one_step_amplitude(Formulation::ClassicCh, n, k, eps, 0.0, dt);
        let l = d2_symbol(k, dx);
        let discrete = 1.0 + dt * (2.0 * l - eps * eps * l * l) / (1.0 + dt * eps * eps * l * l);
        assert!((amp - discrete).abs() < 1e-9, "{amp} vs {discrete}");
        let s = -(eps * eps * k.powi(4) + 2.0 * k * k);
        let tol = 2.0 * ((s * dt).powi(2) + (k * dx).powi(2) * s.abs() * dt);
        assert!(
            (amp - (s * dt).exp()).abs() < tol,
            "{amp} vs {}",
            (s * dt).exp()
        );
    }

    fn random_state(grid: Grid, seed: u64) -> (GridFunction, GridFunction) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w = (0..grid.len()).map(|_| rng.gen_range(-0.1..0.1)).collect();
        let u = GridFunction::new(grid, u).unwrap();
        let w = GridFunction::new(grid, w).unwrap();
        (u, project_zero_mean(&w))
    }

    #[test]
    fn flux_step_conserves_mass() {
        let grid = Grid::new(0.0, 1.0, 101).unwrap();
        let p = ScalarPotential::quartic();
        let c = cfg(Formulation::Flux, BoundaryMode::Neumann, 0.05, 1.0, 1e-3);
        for seed in 0..5 {
            let (u, w) = random_state(grid, seed);
            let mut solver = Solver::new(c, p.clone(), grid).unwrap();
            let mut s = solver.initial_state(u, w).unwrap();
            let m0 = s.u.integral();
            for _ in 0..10 {
                solver.step(&mut s).unwrap();
            }
            let m1 = s.u.integral();
            assert!((m1 - m0).abs() <= 1e-13 * (1.0 + m0.abs()), "{m0} {m1}");
        }
    }

    #[test]
    fn flux_with_zero_tau_equals_classic() {
        let grid = Grid::new(0.0, 1.0, 65).unwrap();
        let p = ScalarPotential::quartic();
        let u = GridFunction::from_fn(grid, |x| 0.8 * (3.0 * x).cos() + 0.1);
        let zero = GridFunction::zeros(grid);
        let dt = 1e-4;
        let flux_cfg = SolverConfig {
            tau: 0.0,
            ..cfg(Formulation::Flux, BoundaryMode::Neumann, 0.05, 0.0, dt)
        };
        // τ = 0 is outside the validated range for the flux formulation, so
        // assemble the solver by hand.
        let n = grid.len();
        let lf2 = square_tridiagonal(&face_laplacian(n - 1, grid.dx()));
        let lu = lf2.scale_shift(0.05 * 0.05 * dt, 1.0).factor().unwrap();
        let mut flux = Solver {
            cfg: flux_cfg,
            potential: p.clone(),
            grid,
            lu,
            ext: vec![0.0; n + 4],
            ext_w: vec![0.0; n + 4],
            rhs: vec![0.0; n],
            mu: vec![0.0; n],
            div: vec![0.0; n],
        };
        let mut sf = State {
            t: 0.0,
            step: 0,
            u: u.clone(),
            rate: Rate::Flux(FaceField::zeros(grid)),
        };
        flux.step(&mut sf).unwrap();

        let cc = cfg(Formulation::ClassicCh, BoundaryMode::Neumann, 0.05, 0.0, dt);
        let solver = Solver::new(cc, p.clone(), grid).unwrap();
        let s0 = solver.initial_state(u, zero).unwrap();
        let sc = step_classic_ch(&s0, &cc, &p).unwrap();
        for (a, b) in sf.u.values.iter().zip(&sc.u.values) {
            assert!((a - b).abs() < 1e-12, "{a} {b}");
        }
    }

    #[test]
    fn classic_conserves_mass() {
        let grid = Grid::new(0.0, 1.0, 101).unwrap();
        let p = ScalarPotential::quartic();
        let c = cfg(
            Formulation::ClassicCh,
            BoundaryMode::Neumann,
            0.05,
            0.0,
            1e-4,
        );
        let (u, _) = random_state(grid, 3);
        let mut solver = Solver::new(c, p, grid).unwrap();
        let mut s = solver.initial_state(u, GridFunction::zeros(grid)).unwrap();
        let mut m = s.u.integral();
        for _ in 0..20 {
            solver.step(&mut s).unwrap();
            let m1 = s.u.integral();
            assert!((m1 - m).abs() <= 1e-12 * (1.0 + m.abs()));
            m = m1;
        }
    }

    #[test]
    fn select_dt_formula() {
        let grid = Grid::new(0.0, 1.0, 513).unwrap();
        let p = ScalarPotential::quartic();
        let mut c = cfg(
            Formulation::SecondOrder,
            BoundaryMode::Neumann,
            0.05,
            1.0,
            1.0,
        );
        c.safety = 0.2;
        let dx = 1.0 / 512.0;
        let wmax = 3.0 * 1.5 * 1.5 - 1.0;
        let expect = 0.2
            * [1.0, dx * dx * 1.0 / 0.05, 0.05 * dx * dx / wmax]
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
        let got = select_dt(&c, grid, &p).unwrap();
        assert!(
            (got - expect).abs() < 1e-15 * expect.max(1e-300) + 1e-20,
            "{got} {expect}"
        );

        let fine = Grid::new(0.0, 1.0, 1025).unwrap();
        assert!(select_dt(&c, fine, &p).unwrap() * 4.0 <= got * (1.0 + 1e-12));

        c.safety = 0.0;
        assert_eq!(
            select_dt(&c, grid, &p).unwrap_err().to_string(),
            "invalid configuration: safety must be positive"
        );
    }

    #[test]
    fn flux_requires_neumann() {
        let c = cfg(
            Formulation::Flux,
            BoundaryMode::Dirichlet {
                left: -1.0,
                right: -1.0,
            },
            0.05,
            1.0,
            1e-3,
        );
        assert!(c
            .validate()
            .unwrap_err()
            .to_string()
            .contains("flux requires neumann"));
    }

    #[test]
    fn dirichlet_requires_pinned_data() {
        let grid = Grid::new(0.0, 1.0, 32).unwrap();
        let c = cfg(
            Formulation::SecondOrder,
            BoundaryMode::Dirichlet {
                left: -1.0,
                right: -1.0,
            },
            0.05,
            1.0,
            1e-3,
        );
        let solver = Solver::new(c, ScalarPotential::quartic(), grid).unwrap();
        let u = GridFunction::constant(grid, -1.0);
        assert!(solver
            .initial_state(u.clone(), GridFunction::constant(grid, 0.1))
            .is_err());
        assert!(solver
            .initial_state(GridFunction::constant(grid, 1.0), GridFunction::zeros(grid))
            .is_err());
        assert!(solver.initial_state(u, GridFunction::zeros(grid)).is_ok());
    }

    #[test]
    fn run_edge_cases() {
        let grid = Grid::new(0.0, 1.0, 32).unwrap();
        let p = ScalarPotential::quartic();
        let mut c = cfg(
            Formulation::SecondOrder,
            BoundaryMode::Neumann,
            0.1,
            1.0,
            1e-3,
        );
        c.t_max = 0.0;
        let mut solver = Solver::new(c, p.clone(), grid).unwrap();
        let u = GridFunction::from_fn(grid, |x| (3.0 * x).cos());
        let s0 = solver
            .initial_state(u.clone(), GridFunction::zeros(grid))
            .unwrap();
        let out = run(&mut solver, s0.clone(), &mut [], RunOptions::default()).unwrap();
        assert_eq!(out.state, s0);

        c.t_max = 1.0;
        let mut solver = Solver::new(c, p, grid).unwrap();
        let mut seen = 0;
        let mut obs = |_: &State, _: f64| -> Result<()> {
            seen += 1;
            Ok(())
        };
        let opts: RunOptions<State> = RunOptions {
            output_every: 10,
            stop: Some(Box::new(|_: &State| true)),
        };
        let out = run(&mut solver, s0.clone(), &mut [&mut obs], opts).unwrap();
        assert!(out.stopped);
        assert_eq!(out.state.step, 0);
        assert_eq!(seen, 1);
    }

    #[test]
    fn nan_is_reported_with_step() {
        let grid = Grid::new(0.0, 1.0, 32).unwrap();
        let p = ScalarPotential::quartic();
        let c = cfg(
            Formulation::SecondOrder,
            BoundaryMode::Neumann,
            0.1,
            1.0,
            1e-3,
        );
        let mut solver = Solver::new(c, p, grid).unwrap();
        let mut u = GridFunction::zeros(grid);
        u.values[5] = f64::NAN;
        let s0 = solver.initial_state(u, GridFunction::zeros(grid)).unwrap();
        let err = run(&mut solver, s0, &mut [], RunOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Solver { step: 1, .. }), "{err}");
    }
}
