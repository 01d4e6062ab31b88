//! Step profiles, the standing wave, N-layer initial data, initial
//! velocities and the boundary-adapted primitives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::potential::ScalarPotential;
use crate::quadrature::InverseTable;
use crate::solver::BoundaryMode;

/// Relative distance to the wells at which the tabulated wave is clamped.
pub const WAVE_CLAMP: f64 = 1e-12;
const WAVE_SAMPLES: usize = 1500;

/// Heteroclinic orbit `ω' = sqrt(2W(ω))`, `ω(0) = 0`, joining -1 to +1.
#[derive(Debug, Clone)]
pub enum StandingWave {
    /// `tanh(x / sqrt 2)` for the quartic.
    Tanh,
    Table(InverseTable),
}

impl StandingWave {
    pub fn new(p: &ScalarPotential) -> Result<Self> {
        let [lo, hi] = p.wells();
        if lo != -1.0 || hi != 1.0 {
            return Err(Error::Potential(format!(
                "standing wave needs wells ±1, got [{lo}, {hi}]"
            )));
        }
        if p.is_quartic() {
            return Ok(StandingWave::Tanh);
        }
        let speed = |q: f64| (2.0 * p.eval(q).max(0.0)).sqrt();
        Ok(StandingWave::Table(InverseTable::build(
            speed,
            -1.0,
            1.0,
            0.0,
            WAVE_CLAMP / 2.0,
            WAVE_SAMPLES,
        )?))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            StandingWave::Tanh => (x / std::f64::consts::SQRT_2).tanh(),
            StandingWave::Table(t) => t.eval(x),
        }
    }
}

/// `ω(x)` for a potential with wells ±1.
pub fn standing_wave(p: &ScalarPotential, x: f64) -> Result<f64> {
    Ok(StandingWave::new(p)?.eval(x))
}

/// Piecewise-constant limit `v` taking the values ±1, with jumps `h_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepProfile {
    a: f64,
    b: f64,
    jumps: Vec<f64>,
    r: f64,
    left_value: f64,
}

const TOUCH_TOL: f64 = 1e-12;

impl StepProfile {
    pub fn new(domain: (f64, f64), jumps: Vec<f64>, r: f64, left_value: f64) -> Result<Self> {
        let (a, b) = domain;
        if !(b > a) {
            return Err(Error::Profile(format!("empty domain [{a}, {b}]")));
        }
        if !(r > 0.0) {
            return Err(Error::Profile(format!("radius r = {r} must be positive")));
        }
        if left_value != 1.0 && left_value != -1.0 {
            return Err(Error::Profile(format!(
                "left_value must be ±1, got {left_value}"
            )));
        }
        if jumps.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Profile("jumps must be strictly increasing".into()));
        }
        let scale = (b - a).abs().max(1.0) * TOUCH_TOL;
        for (i, &h) in jumps.iter().enumerate() {
            if h - r < a - scale || h + r > b + scale {
                return Err(Error::JumpNearBoundary { jump: h, r, a, b });
            }
            if i > 0 {
                let gap = h - jumps[i - 1];
                if gap < 2.0 * r - scale {
                    return Err(Error::SeparationViolated {
                        prev: i,
                        next: i + 1,
                        gap,
                        two_r: 2.0 * r,
                    });
                }
            }
        }
        Ok(Self {
            a,
            b,
            jumps,
            r,
            left_value,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn left_value(&self) -> f64 {
        self.left_value
    }

    pub fn n_layers(&self) -> usize {
        self.jumps.len()
    }

    /// Value on plateau `k` (plateau 0 is `(a, h_1)`).
    pub fn plateau(&self, k: usize) -> f64 {
        if k.is_multiple_of(2) {
            self.left_value
        } else {
            -self.left_value
        }
    }

    pub fn right_value(&self) -> f64 {
        self.plateau(self.jumps.len())
    }

    /// `v(x)`; equals 0 exactly at a jump.
    pub fn value_at(&self, x: f64) -> f64 {
        let k = self.jumps.partition_point(|&h| h < x);
        if k < self.jumps.len() && self.jumps[k] == x {
            return 0.0;
        }
        self.plateau(k)
    }

    pub fn sample(&self, grid: Grid) -> GridFunction {
        GridFunction::from_fn(grid, |x| self.value_at(x))
    }

    /// Exact `∫_a^x v`.
    pub fn antiderivative(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        let mut lo = self.a;
        for (k, &h) in self.jumps.iter().enumerate() {
            if x <= h {
                return acc + self.plateau(k) * (x - lo);
            }
            acc += self.plateau(k) * (h - lo);
            lo = h;
        }
        acc + self.plateau(self.jumps.len()) * (x - lo)
    }

    /// `ṽ` at the nodes, exact.
    pub fn primitive_tilde(&self, grid: Grid) -> GridFunction {
        GridFunction::from_fn(grid, |x| self.antiderivative(x))
    }

    /// `v̄` at the nodes: exact antiderivative minus its trapezoid mean.
    pub fn primitive_bar(&self, grid: Grid) -> GridFunction {
        let t = self.primitive_tilde(grid);
        let m = t.mean();
        t.map(|y| y - m)
    }

    pub fn mass(&self) -> f64 {
        self.antiderivative(self.b)
    }
}

/// Growth profile `f(ε)` of the initial energy budget `1/f(ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FProfile {
    /// `ε^{-k}`
    Power { k: f64 },
    /// `exp(A/ε)`
    Exponential { rate: f64 },
}

impl FProfile {
    pub fn eval(&self, eps: f64) -> f64 {
        match *self {
            FProfile::Power { k } => eps.powf(-k),
            FProfile::Exponential { rate } => (rate / eps).exp(),
        }
    }
}

/// `ε`, the budget profile `f` and the decay rate `A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerParameters {
    pub eps: f64,
    pub f: FProfile,
    pub rate: f64,
}

impl LayerParameters {
    /// Checks `0 < A < r sqrt(2λ)` and `ε < r`.
    pub fn new(
        eps: f64,
        f: FProfile,
        rate: f64,
        v: &StepProfile,
        p: &ScalarPotential,
    ) -> Result<Self> {
        let cap = p.stiffness(v.radius()).rate_cap;
        if !(rate > 0.0 && rate < cap) {
            return Err(Error::Config(format!(
                "decay rate A = {rate} outside (0, r sqrt(2λ) = {cap})"
            )));
        }
        if !(eps > 0.0 && eps < v.radius()) {
            return Err(Error::Config(format!(
                "eps = {eps} must lie in (0, r = {})",
                v.radius()
            )));
        }
        Ok(Self { eps, f, rate })
    }

    /// `1/f(ε)`.
    pub fn excess_budget(&self) -> f64 {
        1.0 / self.f.eval(self.eps)
    }

    /// `T_ε = min{f(ε), exp(A/ε)}`.
    pub fn horizon(&self) -> f64 {
        self.f.eval(self.eps).min((self.rate / self.eps).exp())
    }

    /// `ε [1/f(ε) + exp(-A/ε)]`, the velocity budget with `C = 1`.
    pub fn velocity_budget(&self) -> f64 {
        self.eps * (self.excess_budget() + (-self.rate / self.eps).exp())
    }
}

/// The N-transition-layer datum `u_0^ε`: `v` outside the layer intervals,
/// the rescaled standing wave in the cores and linear blends on the outer
/// `ε`-collars.
pub fn build_layer_profile(
    v: &StepProfile,
    wave: &StandingWave,
    eps: f64,
    grid: Grid,
) -> Result<GridFunction> {
    let r = v.radius();
    if !(eps > 0.0 && eps < r) {
        return Err(Error::Profile(format!(
            "eps = {eps} must lie in (0, r = {r})"
        )));
    }
    if grid.dx() > eps / 4.0 {
        return Err(Error::Resolution {
            dx: grid.dx(),
            limit: eps / 4.0,
        });
    }
    let (a, b) = v.domain();
    if (grid.a() - a).abs() > 1e-12 || (grid.b() - b).abs() > 1e-12 {
        return Err(Error::Profile(format!(
            "grid [{}, {}] does not match the profile domain [{a}, {b}]",
            grid.a(),
            grid.b()
        )));
    }
    let phi = |y: f64| wave.eval(y / eps);
    let values = (0..grid.len())
        .map(|i| {
            let x = grid.x(i);
            for (k, &h) in v.jumps().iter().enumerate() {
                if x > h - r && x < h + r {
                    let before = v.plateau(k);
                    let after = v.plateau(k + 1);
                    let o = after;
                    return if x < h - r + eps {
                        before + (x - h + r) / eps * (phi(o * (-r + eps)) - before)
                    } else if x <= h + r - eps {
                        phi(o * (x - h))
                    } else {
                        after + (h + r - x) / eps * (phi(o * (r - eps)) - after)
                    };
                }
            }
            v.value_at(x)
        })
        .collect();
    GridFunction::new(grid, values)
}

/// Smooth layered datum `v(a) + Σ Δ_y [H((x − y)/ε) − 1{y < a}]` with
/// `H = (1 + ω)/2`, summed over the jumps of `v` and their mirror images
/// across both ends. Neumann images reverse the jump (even extension),
/// Dirichlet images keep it (odd extension about the boundary value), so
/// the ghost closure of `mode` holds to rounding. Unlike [`build_layer_profile`]
/// it has no collar kinks.
pub fn reflected_layer_profile(
    v: &StepProfile,
    wave: &StandingWave,
    eps: f64,
    grid: Grid,
    mode: &BoundaryMode,
) -> Result<GridFunction> {
    if !(eps > 0.0) {
        return Err(Error::Profile(format!("eps = {eps} must be positive")));
    }
    if grid.dx() > eps / 4.0 {
        return Err(Error::Resolution {
            dx: grid.dx(),
            limit: eps / 4.0,
        });
    }
    let (a, b) = v.domain();
    if (grid.a() - a).abs() > 1e-12 || (grid.b() - b).abs() > 1e-12 {
        return Err(Error::Profile(format!(
            "grid [{}, {}] does not match the profile domain [{a}, {b}]",
            grid.a(),
            grid.b()
        )));
    }
    if let BoundaryMode::Dirichlet { left, right } = *mode {
        if left != v.left_value() || right != v.right_value() {
            return Err(Error::Profile(format!(
                "Dirichlet signs ({left}, {right}) do not match the plateaus ({}, {})",
                v.left_value(),
                v.right_value()
            )));
        }
    }
    let len = b - a;
    let odd = matches!(mode, BoundaryMode::Dirichlet { .. });
    // far enough that the omitted images are saturated in double precision
    let cells = (40.0 * eps / len).ceil() as i64 + 1;
    let mut images = Vec::new();
    for k in -cells..=cells {
        for (i, &h) in v.jumps().iter().enumerate() {
            let delta = v.plateau(i + 1) - v.plateau(i);
            if k % 2 == 0 {
                images.push((h + k as f64 * len, delta));
            } else {
                let y = 2.0 * a - h + (k + 1) as f64 * len;
                images.push((y, if odd { delta } else { -delta }));
            }
        }
    }
    let step = |z: f64| 0.5 * (1.0 + wave.eval(z / eps));
    let mut u = GridFunction::from_fn(grid, |x| {
        let jumps: f64 = images
            .iter()
            .map(|&(y, d)| d * (step(x - y) - if y < a { 1.0 } else { 0.0 }))
            .sum();
        v.left_value() + jumps
    });
    if odd {
        let n = u.len();
        u.values[0] = v.left_value();
        u.values[n - 1] = v.right_value();
    }
    Ok(u)
}

/// `ū(x) = ∫_a^x u − (b−a)^{-1} ∫_a^b ∫_a^y u`, by cumulative trapezoid.
pub fn primitive_bar(u: &GridFunction) -> GridFunction {
    let t = primitive_tilde(u);
    let m = t.mean();
    t.map(|y| y - m)
}

/// `ũ(x) = ∫_a^x u`, by cumulative trapezoid; `ũ(a) = 0` exactly.
pub fn primitive_tilde(u: &GridFunction) -> GridFunction {
    let dx = u.grid.dx();
    let mut out = Vec::with_capacity(u.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in u.values.windows(2) {
        acc += 0.5 * dx * (w[0] + w[1]);
        out.push(acc);
    }
    GridFunction {
        grid: u.grid,
        values: out,
    }
}

/// Primitive matching the boundary mode: `ū` (Dirichlet) or `ũ` (Neumann).
pub fn primitive_for(u: &GridFunction, mode: &BoundaryMode) -> GridFunction {
    match mode {
        BoundaryMode::Neumann => primitive_tilde(u),
        BoundaryMode::Dirichlet { .. } => primitive_bar(u),
    }
}

pub fn step_primitive_for(v: &StepProfile, grid: Grid, mode: &BoundaryMode) -> GridFunction {
    match mode {
        BoundaryMode::Neumann => v.primitive_tilde(grid),
        BoundaryMode::Dirichlet { .. } => v.primitive_bar(grid),
    }
}

/// Removes the discrete (trapezoid) mean.
pub fn project_zero_mean(u1: &GridFunction) -> GridFunction {
    let m = u1.mean();
    u1.map(|y| y - m)
}

/// Uniform white noise in `[-amplitude, amplitude]` at every node.
pub fn noise_velocity(grid: Grid, amplitude: f64, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len())
        .map(|_| amplitude * rng.gen_range(-1.0..=1.0))
        .collect();
    GridFunction { grid, values }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetReport {
    /// `τ ‖primitive(u_1)‖²`
    pub lhs: f64,
    /// `ε [1/f(ε) + exp(-A/ε)]`
    pub budget: f64,
    pub ratio: f64,
    pub passed: bool,
}

/// Compares `τ‖ū_1‖²` (or `τ‖ũ_1‖²`) with the velocity budget, `C = 1`.
pub fn velocity_budget_check(
    u1: &GridFunction,
    params: &LayerParameters,
    tau: f64,
    mode: &BoundaryMode,
) -> BudgetReport {
    let lhs = tau * primitive_for(u1, mode).l2_norm_sq();
    let budget = params.velocity_budget();
    let ratio = lhs / budget;
    BudgetReport {
        lhs,
        budget,
        ratio,
        passed: ratio <= 1.0,
    }
}
