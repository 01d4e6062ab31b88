//! Vector-valued states for multi-well potentials: the geodesic transition
//! cost `φ`, the limit energy `P₀`, the componentwise IMEX solver under
//! homogeneous Neumann conditions, energies and the lower-bound certificate.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::banded::BandedLu;
use crate::diagnostics::{velocity_primitive, EnergyReport, LowerBoundCertificate};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::interfaces::InterfaceSet;
use crate::potential::VectorPotential;
use crate::profiles::{primitive_tilde, StepProfile};
use crate::quadrature::{adaptive_simpson, InverseTable, GAUSS5};
use crate::solver::{
    d2_ext, d4_ext, fill_ghosts, implicit_matrix, BoundaryMode, Formulation, Integrator,
    SolverConfig,
};

/// `n × m` node field stored node-major: `values[i*m + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub m: usize,
    pub values: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid, m: usize) -> Self {
        Self {
            grid,
            m,
            values: vec![0.0; grid.len() * m],
        }
    }

    pub fn constant(grid: Grid, z: &[f64]) -> Self {
        let values = (0..grid.len()).flat_map(|_| z.iter().copied()).collect();
        Self {
            grid,
            m: z.len(),
            values,
        }
    }

    pub fn from_components(components: &[GridFunction]) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::Config("no components".into()))?;
        let grid = first.grid;
        if components.iter().any(|c| c.grid != grid) {
            return Err(Error::Grid("components live on different grids".into()));
        }
        let m = components.len();
        let mut values = vec![0.0; grid.len() * m];
        for (c, f) in components.iter().enumerate() {
            for (i, &v) in f.values.iter().enumerate() {
                values[i * m + c] = v;
            }
        }
        Ok(Self { grid, m, values })
    }

    pub fn component(&self, c: usize) -> GridFunction {
        let values = self
            .values
            .iter()
            .skip(c)
            .step_by(self.m)
            .copied()
            .collect();
        GridFunction {
            grid: self.grid,
            values,
        }
    }

    pub fn components(&self) -> Vec<GridFunction> {
        (0..self.m).map(|c| self.component(c)).collect()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    /// Trapezoid mass of every component.
    pub fn masses(&self) -> Vec<f64> {
        self.components()
            .iter()
            .map(GridFunction::integral)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorState {
    pub t: f64,
    pub step: u64,
    pub u: VectorField,
    /// `u_t`.
    pub w: VectorField,
}

/// Piecewise-constant `v` with values among the zeros of the potential.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorStepProfile {
    geometry: StepProfile,
    labels: Vec<usize>,
    plateaus: Vec<Vec<f64>>,
}

impl VectorStepProfile {
    /// `labels[k]` indexes the zero taken on the k-th plateau.
    pub fn new(
        domain: (f64, f64),
        jumps: Vec<f64>,
        r: f64,
        labels: Vec<usize>,
        p: &VectorPotential,
    ) -> Result<Self> {
        let geometry = StepProfile::new(domain, jumps, r, 1.0)?;
        if labels.len() != geometry.n_layers() + 1 {
            return Err(Error::Profile(format!(
                "{} plateau labels for {} jumps",
                labels.len(),
                geometry.n_layers()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= p.zeros().len()) {
            return Err(Error::Profile(format!(
                "label {l} out of range ({} zeros)",
                p.zeros().len()
            )));
        }
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Profile("adjacent plateau labels must differ".into()));
        }
        let plateaus = labels.iter().map(|&l| p.zeros()[l].clone()).collect();
        Ok(Self {
            geometry,
            labels,
            plateaus,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        self.geometry.domain()
    }

    pub fn jumps(&self) -> &[f64] {
        self.geometry.jumps()
    }

    pub fn radius(&self) -> f64 {
        self.geometry.radius()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_layers(&self) -> usize {
        self.geometry.n_layers()
    }

    pub fn dim(&self) -> usize {
        self.plateaus[0].len()
    }

    pub fn plateau(&self, k: usize) -> &[f64] {
        &self.plateaus[k]
    }

    pub fn value_at(&self, x: f64) -> &[f64] {
        let k = self.jumps().partition_point(|&h| h <= x);
        &self.plateaus[k]
    }

    /// Exact `ṽ_c(x) = ∫_a^x v_c` at the nodes, per component.
    pub fn primitive_tilde(&self, grid: Grid) -> Vec<GridFunction> {
        let (a, _) = self.domain();
        let jumps = self.jumps();
        (0..self.dim())
            .map(|c| {
                GridFunction::from_fn(grid, |x| {
                    let mut acc = 0.0;
                    let mut left = a;
                    for (k, &h) in jumps.iter().enumerate() {
                        if x <= h {
                            break;
                        }
                        acc += self.plateaus[k][c] * (h - left);
                        left = h;
                    }
                    acc + self.value_at(x)[c] * (x - left)
                })
            })
            .collect()
    }
}

/// Piecewise-linear path through `R^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathCurve {
    pub points: Vec<Vec<f64>>,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl PathCurve {
    /// `p` equally spaced points on the segment.
    pub fn straight(xi1: &[f64], xi2: &[f64], p: usize) -> Self {
        let points = (0..p)
            .map(|k| {
                let t = k as f64 / (p - 1) as f64;
                xi1.iter().zip(xi2).map(|(a, b)| a + t * (b - a)).collect()
            })
            .collect();
        Self { points }
    }

    pub fn cumulative_length(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.points.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.points.windows(2) {
            acc += dist(&w[0], &w[1]);
            out.push(acc);
        }
        out
    }

    pub fn length(&self) -> f64 {
        *self.cumulative_length().last().unwrap_or(&0.0)
    }

    /// Point at arclength `s` (clamped to the ends).
    pub fn at(&self, s: f64, cumulative: &[f64]) -> Vec<f64> {
        let n = self.points.len();
        if s <= 0.0 || n == 1 {
            return self.points[0].clone();
        }
        if s >= cumulative[n - 1] {
            return self.points[n - 1].clone();
        }
        let k = cumulative.partition_point(|&c| c <= s).clamp(1, n - 1) - 1;
        let seg = cumulative[k + 1] - cumulative[k];
        let t = if seg > 0.0 {
            (s - cumulative[k]) / seg
        } else {
            0.0
        };
        self.points[k]
            .iter()
            .zip(&self.points[k + 1])
            .map(|(a, b)| a + t * (b - a))
            .collect()
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        Self { points }
    }

    /// Equal-arclength redistribution of the same number of points.
    fn reparameterize(&mut self) {
        let cum = self.cumulative_length();
        let total = cum[cum.len() - 1];
        let n = self.points.len();
        if total == 0.0 {
            return;
        }
        let mut next = Vec::with_capacity(n);
        next.push(self.points[0].clone());
        for j in 1..n - 1 {
            next.push(self.at(total * j as f64 / (n - 1) as f64, &cum));
        }
        next.push(self.points[n - 1].clone());
        self.points = next;
    }
}

fn speed(p: &VectorPotential, z: &[f64]) -> f64 {
    (2.0 * p.eval(z).max(0.0)).sqrt()
}

/// `J` of the path with five-point Gauss-Legendre per segment.
fn j_gauss(p: &VectorPotential, path: &PathCurve) -> f64 {
    let m = p.dim();
    let mut z = vec![0.0; m];
    path.points
        .windows(2)
        .map(|w| {
            let len = dist(&w[0], &w[1]);
            let s: f64 = GAUSS5
                .iter()
                .map(|&(t, wt)| {
                    for c in 0..m {
                        z[c] = w[0][c] + t * (w[1][c] - w[0][c]);
                    }
                    wt * speed(p, &z)
                })
                .sum();
            len * s
        })
        .sum()
}

/// `J` of the path with adaptive Simpson per segment.
fn j_adaptive(p: &VectorPotential, path: &PathCurve, tol: f64) -> Result<f64> {
    let segs = (path.points.len() - 1).max(1) as f64;
    let mut total = 0.0;
    for w in path.points.windows(2) {
        let len = dist(&w[0], &w[1]);
        if len == 0.0 {
            continue;
        }
        let f = |t: f64| {
            let z: Vec<f64> = w[0]
                .iter()
                .zip(&w[1])
                .map(|(a, b)| a + t * (b - a))
                .collect();
            speed(p, &z)
        };
        total += len * adaptive_simpson(f, 0.0, 1.0, tol / segs)?.value;
    }
    Ok(total)
}

/// Gradient of the Gauss `J` with respect to the interior points, with the
/// tangential component removed.
fn normal_gradient(p: &VectorPotential, path: &PathCurve) -> Vec<Vec<f64>> {
    let m = p.dim();
    let n = path.points.len();
    let mut grad = vec![vec![0.0; m]; n];
    let mut z = vec![0.0; m];
    let mut gw = vec![0.0; m];
    for k in 0..n - 1 {
        let (a, b) = (&path.points[k], &path.points[k + 1]);
        let len = dist(a, b);
        if len == 0.0 {
            continue;
        }
        let mut integral = 0.0;
        let mut ia = vec![0.0; m];
        let mut ib = vec![0.0; m];
        for &(t, wt) in &GAUSS5 {
            for c in 0..m {
                z[c] = a[c] + t * (b[c] - a[c]);
            }
            let g = speed(p, &z);
            integral += wt * g;
            if g > 1e-300 {
                p.grad(&z, &mut gw);
                for c in 0..m {
                    let dg = gw[c] / g;
                    ia[c] += wt * (1.0 - t) * dg;
                    ib[c] += wt * t * dg;
                }
            }
        }
        for c in 0..m {
            let unit = (b[c] - a[c]) / len;
            grad[k][c] += -unit * integral + len * ia[c];
            grad[k + 1][c] += unit * integral + len * ib[c];
        }
    }
    for k in 1..n - 1 {
        let tangent: Vec<f64> = (0..m)
            .map(|c| path.points[k + 1][c] - path.points[k - 1][c])
            .collect();
        let tn = tangent.iter().map(|v| v * v).sum::<f64>().sqrt();
        if tn > 0.0 {
            let dot: f64 = grad[k]
                .iter()
                .zip(&tangent)
                .map(|(g, t)| g * t)
                .sum::<f64>()
                / (tn * tn);
            for c in 0..m {
                grad[k][c] -= dot * tangent[c];
            }
        }
    }
    grad[0].iter_mut().for_each(|v| *v = 0.0);
    grad[n - 1].iter_mut().for_each(|v| *v = 0.0);
    grad
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicOptions {
    /// Path points `P ≥ 8`, endpoints included.
    pub points: usize,
    pub iters: usize,
    /// Relative stall tolerance on `J`.
    pub tol: f64,
    /// Extra descents from randomly bent initial paths.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        Self {
            points: 33,
            iters: 2000,
            tol: 1e-10,
            restarts: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geodesic {
    pub phi: f64,
    /// `J` of the straight segment, an upper bound for `phi`.
    pub straight: f64,
    pub path: PathCurve,
    pub iterations: usize,
}

/// `φ(ξ₁, ξ₂) = inf √2 ∫ √W(z) |z'|` over piecewise-linear paths, by
/// string-method relaxation from the straight segment.
pub fn geodesic_phi(
    p: &VectorPotential,
    xi1: &[f64],
    xi2: &[f64],
    opts: &GeodesicOptions,
) -> Result<Geodesic> {
    if xi1.len() != p.dim() || xi2.len() != p.dim() {
        return Err(Error::Config(format!(
            "endpoints must lie in R^{}",
            p.dim()
        )));
    }
    if opts.points < 8 {
        return Err(Error::Config(format!(
            "geodesic needs at least 8 points, got {}",
            opts.points
        )));
    }
    if dist(xi1, xi2) == 0.0 {
        return Ok(Geodesic {
            phi: 0.0,
            straight: 0.0,
            path: PathCurve {
                points: vec![xi1.to_vec()],
            },
            iterations: 0,
        });
    }
    let quad_tol = 1e-12;
    let straight = j_adaptive(
        p,
        &PathCurve {
            points: vec![xi1.to_vec(), xi2.to_vec()],
        },
        quad_tol,
    )?;
    let init = PathCurve::straight(xi1, xi2, opts.points);
    let (mut best, mut iterations) = descend(p, init.clone(), opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.restarts {
        let mut bent = init.clone();
        let amp = 0.25 * dist(xi1, xi2);
        let dir: Vec<f64> = (0..p.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = bent.points.len();
        for (k, pt) in bent.points.iter_mut().enumerate().take(n - 1).skip(1) {
            let bump = amp * (std::f64::consts::PI * k as f64 / (n - 1) as f64).sin();
            for (v, d) in pt.iter_mut().zip(&dir) {
                *v += bump * d;
            }
        }
        let (cand, it) = descend(p, bent, opts)?;
        iterations += it;
        if j_gauss(p, &cand) < j_gauss(p, &best) {
            best = cand;
        }
    }
    let phi = j_adaptive(p, &best, quad_tol)?;
    if phi <= straight {
        Ok(Geodesic {
            phi,
            straight,
            path: best,
            iterations,
        })
    } else {
        Ok(Geodesic {
            phi: straight,
            straight,
            path: init,
            iterations,
        })
    }
}

fn descend(
    p: &VectorPotential,
    mut path: PathCurve,
    opts: &GeodesicOptions,
) -> Result<(PathCurve, usize)> {
    path.reparameterize();
    let mut j = j_gauss(p, &path);
    let h = path.length() / (path.points.len() - 1) as f64;
    let mut alpha = f64::NAN;
    let mut trace = vec![j];
    let mut stalls = 0;
    for it in 0..opts.iters {
        let g = normal_gradient(p, &path);
        let gmax = g.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()));
        if gmax == 0.0 {
            return Ok((path, it));
        }
        if alpha.is_nan() {
            alpha = 0.1 * h / gmax;
        }
        let mut accepted = None;
        for _ in 0..60 {
            let mut cand = path.clone();
            for (pt, gk) in cand.points.iter_mut().zip(&g) {
                for (v, d) in pt.iter_mut().zip(gk) {
                    *v -= alpha * d;
                }
            }
            cand.reparameterize();
            let jc = j_gauss(p, &cand);
            if !jc.is_finite() {
                trace.push(jc);
                return Err(Error::DescentDiverged {
                    iterations: it,
                    trace,
                });
            }
            if jc <= j {
                accepted = Some((cand, jc));
                break;
            }
            alpha *= 0.5;
        }
        let Some((cand, jc)) = accepted else {
            return Ok((path, it));
        };
        let gain = j - jc;
        path = cand;
        j = jc;
        trace.push(j);
        if trace.len() > 64 {
            trace.remove(0);
        }
        alpha *= 1.5;
        if gain <= opts.tol * j.max(1.0) {
            stalls += 1;
            if stalls >= 10 {
                return Ok((path, it + 1));
            }
        } else {
            stalls = 0;
        }
    }
    Ok((path, opts.iters))
}

/// Write-once cache of `φ` keyed by (zero pair, points, tolerance).
#[derive(Debug, Default)]
pub struct PhiCache {
    map: Mutex<HashMap<(usize, usize, usize, u64), f64>>,
}

impl PhiCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// `φ(z_i, z_j)`, computed once per key.
    pub fn phi(
        &self,
        p: &VectorPotential,
        i: usize,
        j: usize,
        opts: &GeodesicOptions,
    ) -> Result<f64> {
        let key = (i, j, opts.points, opts.tol.to_bits());
        if let Some(&v) = self.map.lock().expect("phi cache poisoned").get(&key) {
            return Ok(v);
        }
        let zeros = p.zeros();
        let value = geodesic_phi(p, &zeros[i], &zeros[j], opts)?.phi;
        Ok(*self
            .map
            .lock()
            .expect("phi cache poisoned")
            .entry(key)
            .or_insert(value))
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("phi cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `P₀[v] = Σ_i φ(v(h_i − r), v(h_i + r))`.
pub fn p0(
    v: &VectorStepProfile,
    p: &VectorPotential,
    cache: &PhiCache,
    opts: &GeodesicOptions,
) -> Result<f64> {
    v.labels()
        .windows(2)
        .map(|w| cache.phi(p, w[0], w[1], opts))
        .sum()
}

/// Vector `P_ε` with `|u_x|²` Euclidean over face differences.
pub fn vector_p_eps(u: &VectorField, p: &VectorPotential, eps: f64) -> f64 {
    let dx = u.grid.dx();
    let m = u.m;
    let n = u.grid.len();
    let mut grad = 0.0;
    for i in 0..n - 1 {
        for c in 0..m {
            let d = u.values[(i + 1) * m + c] - u.values[i * m + c];
            grad += d * d;
        }
    }
    grad /= dx;
    let w: Vec<f64> = (0..n).map(|i| p.eval(u.node(i))).collect();
    0.5 * eps * grad + u.grid.integrate(&w) / eps
}

/// `√2 ∫ √W(u) |u_x|` over faces (midpoint values), the Young lower bound of `P_ε`.
pub fn young_bound(u: &VectorField, p: &VectorPotential) -> f64 {
    let m = u.m;
    let n = u.grid.len();
    let mut mid = vec![0.0; m];
    (0..n - 1)
        .map(|i| {
            for c in 0..m {
                mid[c] = 0.5 * (u.values[i * m + c] + u.values[(i + 1) * m + c]);
            }
            speed(p, &mid) * dist(u.node(i), u.node(i + 1))
        })
        .sum()
}

/// Energy report with the componentwise Neumann face primitive of `u_t`;
/// `mass` is the sum of the component masses.
pub fn vector_energy(s: &VectorState, p: &VectorPotential, eps: f64, tau: f64) -> EnergyReport {
    let pe = vector_p_eps(&s.u, p, eps);
    let kinetic = tau / (2.0 * eps) * primitive_norm_sq(&s.w);
    EnergyReport {
        t: s.t,
        p_eps: pe,
        kinetic,
        e_eps: pe + kinetic,
        mass: s.u.masses().iter().sum(),
        diss_cum: 0.0,
    }
}

fn primitive_norm_sq(w: &VectorField) -> f64 {
    w.components()
        .iter()
        .map(|c| velocity_primitive(c, &BoundaryMode::Neumann).l2_norm_sq())
        .sum()
}

/// Layer positions of a system state: between adjacent nodes whose nearest
/// zeros differ, the point where the distances to both zeros agree
/// (linear in between). For `m = 1` and wells ±1 this is the zero crossing.
pub fn locate_vector_layers(u: &VectorField, p: &VectorPotential) -> InterfaceSet {
    let zeros = p.zeros();
    let n = u.grid.len();
    let nearest: Vec<usize> = (0..n)
        .map(|i| {
            let node = u.node(i);
            (0..zeros.len())
                .min_by(|&a, &b| {
                    dist(node, &zeros[a])
                        .partial_cmp(&dist(node, &zeros[b]))
                        .unwrap()
                })
                .unwrap_or(0)
        })
        .collect();
    let mut points = Vec::new();
    for i in 0..n.saturating_sub(1) {
        let (ka, kb) = (nearest[i], nearest[i + 1]);
        if ka == kb {
            continue;
        }
        let f = |j: usize| dist(u.node(j), &zeros[ka]) - dist(u.node(j), &zeros[kb]);
        let (f0, f1) = (f(i), f(i + 1));
        let theta = if f1 != f0 {
            (f0 / (f0 - f1)).clamp(0.0, 1.0)
        } else {
            0.5
        };
        points.push(u.grid.x(i) + theta * u.grid.dx());
    }
    InterfaceSet::new(points, 0.5 * u.grid.dx())
}

/// Componentwise IMEX integrator (second-order form, Neumann).
#[derive(Debug, Clone)]
pub struct VectorSolver {
    cfg: SolverConfig,
    potential: VectorPotential,
    grid: Grid,
    lu: BandedLu,
    grad: Vec<f64>,
    ext: Vec<f64>,
    ext_w: Vec<f64>,
    comp: Vec<f64>,
    gcomp: Vec<f64>,
    rhs: Vec<f64>,
}

impl VectorSolver {
    pub fn new(cfg: SolverConfig, potential: VectorPotential, grid: Grid) -> Result<Self> {
        cfg.validate()?;
        if cfg.formulation != Formulation::SecondOrder || cfg.boundary != BoundaryMode::Neumann {
            return Err(Error::Config(
                "vector systems support the second-order formulation with neumann only".into(),
            ));
        }
        let n = grid.len();
        let lu = implicit_matrix(
            n,
            grid.dx(),
            &cfg.boundary,
            cfg.tau / cfg.dt + 1.0,
            cfg.dt * cfg.eps * cfg.eps,
        )
        .factor()?;
        let m = potential.dim();
        Ok(Self {
            cfg,
            potential,
            grid,
            lu,
            grad: vec![0.0; n * m],
            ext: vec![0.0; n + 4],
            ext_w: vec![0.0; n + 4],
            comp: vec![0.0; n],
            gcomp: vec![0.0; n],
            rhs: vec![0.0; n],
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn initial_state(&self, u0: VectorField, u1: VectorField) -> Result<VectorState> {
        let m = self.potential.dim();
        if u0.grid != self.grid || u1.grid != self.grid || u0.m != m || u1.m != m {
            return Err(Error::Config(
                "initial data shape differs from solver".into(),
            ));
        }
        Ok(VectorState {
            t: 0.0,
            step: 0,
            u: u0,
            w: u1,
        })
    }

    pub fn step(&mut self, s: &mut VectorState) -> Result<()> {
        let n = self.grid.len();
        let m = self.potential.dim();
        let dx = self.grid.dx();
        let inv_dx2 = 1.0 / (dx * dx);
        let inv_dx4 = inv_dx2 * inv_dx2;
        let eps2 = self.cfg.eps * self.cfg.eps;
        let c_tau = self.cfg.tau / self.cfg.dt;
        let dt = self.cfg.dt;
        for i in 0..n {
            self.potential.grad(
                &s.u.values[i * m..(i + 1) * m],
                &mut self.grad[i * m..(i + 1) * m],
            );
        }
        for c in 0..m {
            for i in 0..n {
                self.comp[i] = s.u.values[i * m + c];
                self.gcomp[i] = self.grad[i * m + c];
            }
            fill_ghosts(&self.comp, &BoundaryMode::Neumann, &mut self.ext);
            fill_ghosts(&self.gcomp, &BoundaryMode::Neumann, &mut self.ext_w);
            for i in 0..n {
                self.rhs[i] =
                    d2_ext(&self.ext_w, i, inv_dx2) - eps2 * d4_ext(&self.ext, i, inv_dx4);
            }
            for i in 0..n {
                self.rhs[i] += c_tau * s.w.values[i * m + c];
            }
            self.lu.solve(&mut self.rhs);
            for i in 0..n {
                s.w.values[i * m + c] = self.rhs[i];
                s.u.values[i * m + c] += dt * self.rhs[i];
            }
        }
        s.step += 1;
        s.t += dt;
        if s.u.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver {
                step: s.step,
                t: s.t,
                reason: "non-finite value in u".into(),
            });
        }
        Ok(())
    }
}

impl Integrator for VectorSolver {
    type State = VectorState;

    fn step(&mut self, s: &mut VectorState) -> Result<()> {
        VectorSolver::step(self, s)
    }

    fn dissipation_rate(&self, s: &VectorState) -> f64 {
        primitive_norm_sq(&s.w) / self.cfg.eps
    }

    fn dt(&self) -> f64 {
        self.cfg.dt
    }

    fn t_max(&self) -> f64 {
        self.cfg.t_max
    }

    fn time(s: &VectorState) -> f64 {
        s.t
    }

    fn set_time(s: &mut VectorState, t: f64) {
        s.t = t;
    }

    fn steps(s: &VectorState) -> u64 {
        s.step
    }
}

/// One vector step from `s`.
pub fn vector_step(
    s: &VectorState,
    cfg: &SolverConfig,
    p: &VectorPotential,
) -> Result<VectorState> {
    let mut solver = VectorSolver::new(*cfg, p.clone(), s.u.grid)?;
    let mut next = s.clone();
    solver.step(&mut next)?;
    Ok(next)
}

/// Layer datum along per-jump paths: each core traverses `paths[k]` (from
/// plateau `k` to plateau `k+1`) with `ds/dx = sqrt(2W)/ε`, centred at half
/// its arclength; the outer `ε`-collars blend linearly into the plateaus.
pub fn build_vector_layer_profile(
    v: &VectorStepProfile,
    paths: &[PathCurve],
    p: &VectorPotential,
    eps: f64,
    grid: Grid,
) -> Result<VectorField> {
    let r = v.radius();
    if paths.len() != v.n_layers() {
        return Err(Error::Profile(format!(
            "{} paths for {} jumps",
            paths.len(),
            v.n_layers()
        )));
    }
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
    let mut cores = Vec::with_capacity(paths.len());
    for (k, path) in paths.iter().enumerate() {
        let n = path.points.len();
        if dist(&path.points[0], v.plateau(k)) > 1e-12
            || dist(&path.points[n - 1], v.plateau(k + 1)) > 1e-12
        {
            return Err(Error::Profile(format!(
                "path {k} does not join plateaus {k} and {}",
                k + 1
            )));
        }
        let cum = path.cumulative_length();
        let len = cum[n - 1];
        let g = |s: f64| speed(p, &path.at(s, &cum));
        // the speed is evaluated at interpolated points, so its relative
        // rounding error grows like 1e-16 / gap near the zeros
        let table = InverseTable::build_with_tol(g, 0.0, len, 0.5 * len, 1e-8, 400, 1e-9)?;
        cores.push((cum, table));
    }
    let m = v.dim();
    let mut values = Vec::with_capacity(grid.len() * m);
    for i in 0..grid.len() {
        let x = grid.x(i);
        let layer = v.jumps().iter().position(|&h| x > h - r && x < h + r);
        match layer {
            None => values.extend_from_slice(v.value_at(x)),
            Some(k) => {
                let h = v.jumps()[k];
                let (cum, table) = &cores[k];
                let core = |y: f64| paths[k].at(table.eval(y / eps), cum);
                if x < h - r + eps {
                    let edge = core(-r + eps);
                    let t = (x - h + r) / eps;
                    values.extend(v.plateau(k).iter().zip(&edge).map(|(a, b)| a + t * (b - a)));
                } else if x <= h + r - eps {
                    values.extend(core(x - h));
                } else {
                    let edge = core(r - eps);
                    let t = (h + r - x) / eps;
                    values.extend(
                        v.plateau(k + 1)
                            .iter()
                            .zip(&edge)
                            .map(|(a, b)| a + t * (b - a)),
                    );
                }
            }
        }
    }
    Ok(VectorField { grid, m, values })
}

/// Default L¹ gate `δ = r/4 ·` (smallest distance between zeros).
pub fn default_vector_delta(v: &VectorStepProfile, p: &VectorPotential) -> f64 {
    let z = p.zeros();
    let mut gap = f64::INFINITY;
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            gap = gap.min(dist(&z[i], &z[j]));
        }
    }
    v.radius() / 4.0 * gap
}

/// `P_ε[u] ≥ P₀[v] − exp(−A/ε)` for `u` within `δ` of `v` in the summed
/// componentwise L¹ distance of the Neumann primitives.
pub fn vector_lower_bound_certificate(
    u: &VectorField,
    v: &VectorStepProfile,
    p: &VectorPotential,
    eps: f64,
    rate: f64,
    p0_value: f64,
    delta: Option<f64>,
) -> Result<LowerBoundCertificate> {
    let cap = v.radius() * (2.0 * p.min_hessian_eigenvalue()?).sqrt();
    if !(rate > 0.0 && rate < cap) {
        return Err(Error::Config(format!(
            "decay rate A = {rate} outside (0, r sqrt(2λ0) = {cap})"
        )));
    }
    let pv = v.primitive_tilde(u.grid);
    let l1: f64 = u
        .components()
        .iter()
        .zip(&pv)
        .map(|(c, vc)| primitive_tilde(c).l1_distance(vc))
        .sum();
    let n = v.n_layers();
    let per_layer = if n > 0 { p0_value / n as f64 } else { 0.0 };
    Ok(LowerBoundCertificate::assemble(
        n,
        per_layer,
        p0_value,
        vector_p_eps(u, p, eps),
        rate,
        eps,
        l1,
        delta.unwrap_or_else(|| default_vector_delta(v, p)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::ScalarPotential;
    use crate::solver::{Rate, Solver};
    use nalgebra::DMatrix;
    use std::sync::Arc;

    #[test]
    fn vector_layers_match_scalar_zero_crossings() {
        let grid = Grid::new(0.0, 1.0, 201).unwrap();
        let u = GridFunction::from_fn(grid, |x| {
            ((x - 0.3) / 0.05).tanh() * ((0.71 - x) / 0.05).tanh()
        });
        let q = VectorPotential::embed(&ScalarPotential::quartic());
        let vf = VectorField::from_components(std::slice::from_ref(&u)).unwrap();
        let a = locate_vector_layers(&vf, &q);
        let b = crate::interfaces::locate_layers(&u);
        assert_eq!(a.len(), 2);
        for (x, y) in a.points().iter().zip(b.points()) {
            assert!((x - y).abs() < 1e-14, "{x} {y}");
        }
        // a corner-to-corner step of the decoupled quartic
        let q2 = VectorPotential::decoupled_quartic(2).unwrap();
        let s = GridFunction::from_fn(grid, |x| ((x - 0.5) / 0.05).tanh());
        let vf2 = VectorField::from_components(&[s.clone(), s]).unwrap();
        let c = locate_vector_layers(&vf2, &q2);
        assert_eq!(c.len(), 1);
        assert!((c.points()[0] - 0.5).abs() < 1e-12);
    }

    fn opts() -> GeodesicOptions {
        GeodesicOptions {
            points: 17,
            iters: 3000,
            tol: 1e-12,
            restarts: 0,
            seed: 1,
        }
    }

    /// `q(u) (1 + β exp(−|u|²/s²))` with `q = |u − z1|²|u − z2|²/4`,
    /// `z1,2 = (∓1, 0)`: a bump on the straight segment forces a detour.
    fn bumped(beta: f64, s: f64) -> VectorPotential {
        let z1 = [-1.0, 0.0];
        let z2 = [1.0, 0.0];
        let parts = move |u: &[f64]| {
            let a: f64 = (u[0] - z1[0]).powi(2) + (u[1] - z1[1]).powi(2);
            let b: f64 = (u[0] - z2[0]).powi(2) + (u[1] - z2[1]).powi(2);
            let bump = 1.0 + beta * (-(u[0] * u[0] + u[1] * u[1]) / (s * s)).exp();
            (a, b, bump)
        };
        let w = Arc::new(move |u: &[f64]| {
            let (a, b, bump) = parts(u);
            a * b / 4.0 * bump
        });
        let grad = Arc::new(move |u: &[f64], out: &mut [f64]| {
            let (a, b, bump) = parts(u);
            let e = bump - 1.0;
            for c in 0..2 {
                let da = 2.0 * (u[c] - z1[c]);
                let db = 2.0 * (u[c] - z2[c]);
                let dq = (da * b + a * db) / 4.0;
                let dbump = e * (-2.0 * u[c] / (s * s));
                out[c] = dq * bump + a * b / 4.0 * dbump;
            }
        });
        let hess = Arc::new(move |u: &[f64]| {
            // analytic Hessian at the zeros (q = ∇q = 0 there): Hess q · bump
            let (a, b, bump) = parts(u);
            DMatrix::from_fn(2, 2, |i, j| {
                let di = |z: &[f64; 2]| 2.0 * (u[i] - z[i]);
                let dj = |z: &[f64; 2]| 2.0 * (u[j] - z[j]);
                let delta = if i == j { 2.0 } else { 0.0 };
                let hq = (delta * b + di(&z1) * dj(&z2) + dj(&z1) * di(&z2) + a * delta) / 4.0;
                hq * bump
            })
        });
        VectorPotential::from_callbacks(2, w, grad, hess, vec![z1.to_vec(), z2.to_vec()]).unwrap()
    }

    #[test]
    fn phi_degenerate_and_embedded() {
        let p = VectorPotential::embed(&ScalarPotential::quartic());
        assert_eq!(geodesic_phi(&p, &[1.0], &[1.0], &opts()).unwrap().phi, 0.0);
        let c0 = 2.0 * 2f64.sqrt() / 3.0;
        let g = geodesic_phi(&p, &[-1.0], &[1.0], &opts()).unwrap();
        assert!((g.phi - c0).abs() < 1e-10, "{}", g.phi);
        assert!(geodesic_phi(
            &p,
            &[-1.0],
            &[1.0],
            &GeodesicOptions {
                points: 5,
                ..opts()
            }
        )
        .is_err());
    }

    #[test]
    fn phi_decoupled_quartic() {
        let p = VectorPotential::decoupled_quartic(2).unwrap();
        let c0 = 2.0 * 2f64.sqrt() / 3.0;
        let adj = geodesic_phi(&p, &[-1.0, -1.0], &[1.0, -1.0], &opts()).unwrap();
        assert!((adj.phi - c0).abs() < 1e-8);
        let diag = geodesic_phi(&p, &[-1.0, -1.0], &[1.0, 1.0], &opts()).unwrap();
        assert!((diag.phi - 2.0 * c0).abs() < 1e-6, "{}", diag.phi);
        assert!(diag.phi <= diag.straight);
    }

    #[test]
    fn phi_detours_around_bump() {
        let p = bumped(4.0, 0.4);
        p.validate().unwrap();
        // the straight segment is a saddle by symmetry; restarts break it
        let o = GeodesicOptions {
            points: 33,
            restarts: 2,
            ..opts()
        };
        let g = geodesic_phi(&p, &[-1.0, 0.0], &[1.0, 0.0], &o).unwrap();
        // independent x-graph minimisation gives 1.555989 (straight 1.571338)
        assert!(g.phi < g.straight - 0.01, "{} vs {}", g.phi, g.straight);
        assert!((g.phi - 1.555_989).abs() < 5e-5, "{}", g.phi);
        let back = geodesic_phi(&p, &[1.0, 0.0], &[-1.0, 0.0], &o).unwrap();
        assert!(
            (g.phi - back.phi).abs() < 1e-6 * g.phi,
            "{} {}",
            g.phi,
            back.phi
        );
        let mid = g.path.points[16][1].abs();
        assert!(mid > 0.1, "path stayed on the axis: {mid}");
    }

    #[test]
    fn phi_triangle_inequality() {
        let p = VectorPotential::decoupled_quartic(2).unwrap();
        let z = p.zeros().to_vec();
        let o = opts();
        let f = |i: usize, j: usize| geodesic_phi(&p, &z[i], &z[j], &o).unwrap().phi;
        for (a, b, c) in [(0, 1, 3), (0, 2, 3), (1, 0, 2), (3, 1, 2)] {
            assert!(f(a, c) <= f(a, b) + f(b, c) + 2.0 * o.tol);
        }
    }

    #[test]
    fn p0_examples() {
        let p = VectorPotential::embed(&ScalarPotential::quartic());
        let cache = PhiCache::new();
        let c0 = 2.0 * 2f64.sqrt() / 3.0;
        let v =
            VectorStepProfile::new((0.0, 1.0), vec![0.25, 0.5, 0.75], 0.1, vec![0, 1, 0, 1], &p)
                .unwrap();
        assert!((p0(&v, &p, &cache, &opts()).unwrap() - 3.0 * c0).abs() < 1e-4);
        let flat = VectorStepProfile::new((0.0, 1.0), vec![], 0.1, vec![1], &p).unwrap();
        assert_eq!(p0(&flat, &p, &cache, &opts()).unwrap(), 0.0);

        let q = VectorPotential::decoupled_quartic(2).unwrap();
        let cache = PhiCache::new();
        let two =
            VectorStepProfile::new((0.0, 1.0), vec![0.3, 0.7], 0.1, vec![0, 3, 0], &q).unwrap();
        let phi03 = cache.phi(&q, 0, 3, &opts()).unwrap();
        assert_eq!(
            p0(&two, &q, &cache, &opts()).unwrap(),
            phi03 + cache.phi(&q, 3, 0, &opts()).unwrap()
        );
        assert!(VectorStepProfile::new((0.0, 1.0), vec![0.5], 0.1, vec![2, 2], &q).is_err());
    }

    #[test]
    fn vector_fixed_point_and_scalar_equivalence() {
        let grid = Grid::new(0.0, 1.0, 65).unwrap();
        let cfg = SolverConfig {
            eps: 0.05,
            tau: 1.0,
            dt: 1e-3,
            t_max: 0.05,
            formulation: Formulation::SecondOrder,
            boundary: BoundaryMode::Neumann,
            safety: 0.2,
        };
        let q = VectorPotential::decoupled_quartic(2).unwrap();
        for z in q.zeros() {
            let s = VectorState {
                t: 0.0,
                step: 0,
                u: VectorField::constant(grid, z),
                w: VectorField::zeros(grid, 2),
            };
            assert_eq!(vector_step(&s, &cfg, &q).unwrap().u, s.u);
        }

        let u1 = GridFunction::from_fn(grid, |x| 0.7 * (4.0 * x).cos());
        let u2 = GridFunction::from_fn(grid, |x| -0.3 + 0.5 * (9.0 * x).sin());
        let w1 = GridFunction::from_fn(grid, |x| 0.01 * (2.0 * x).sin());
        let w2 = GridFunction::zeros(grid);
        let mut vs = VectorSolver::new(cfg, q.clone(), grid).unwrap();
        let mut st = vs
            .initial_state(
                VectorField::from_components(&[u1.clone(), u2.clone()]).unwrap(),
                VectorField::from_components(&[w1.clone(), w2.clone()]).unwrap(),
            )
            .unwrap();
        let sp = ScalarPotential::quartic();
        let mut scalars: Vec<_> = [(u1, w1), (u2, w2)]
            .into_iter()
            .map(|(u, w)| {
                let s = Solver::new(cfg, sp.clone(), grid).unwrap();
                let st = s.initial_state(u, w).unwrap();
                (s, st)
            })
            .collect();
        for _ in 0..50 {
            vs.step(&mut st).unwrap();
            for (s, ss) in scalars.iter_mut() {
                s.step(ss).unwrap();
            }
        }
        for (c, (_, ss)) in scalars.iter().enumerate() {
            let comp = st.u.component(c);
            for (a, b) in comp.values.iter().zip(&ss.u.values) {
                assert!((a - b).abs() <= 1e-12);
            }
            let Rate::Velocity(w) = &ss.rate else {
                unreachable!()
            };
            assert_eq!(&st.w.component(c).values, &w.values);
        }
    }

    #[test]
    fn vector_energy_examples() {
        let grid = Grid::new(0.0, 1.0, 65).unwrap();
        let q = VectorPotential::decoupled_quartic(2).unwrap();
        let s = VectorState {
            t: 0.0,
            step: 0,
            u: VectorField::constant(grid, &[1.0, -1.0]),
            w: VectorField::zeros(grid, 2),
        };
        assert_eq!(vector_energy(&s, &q, 0.05, 1.0).e_eps, 0.0);

        let sp = ScalarPotential::quartic();
        let e = VectorPotential::embed(&sp);
        let u = GridFunction::from_fn(grid, |x| (5.0 * x).cos());
        let w = GridFunction::from_fn(grid, |x| (3.0 * std::f64::consts::PI * x).cos());
        let vs = VectorState {
            t: 0.0,
            step: 0,
            u: VectorField::from_components(std::slice::from_ref(&u)).unwrap(),
            w: VectorField::from_components(std::slice::from_ref(&w)).unwrap(),
        };
        let rv = vector_energy(&vs, &e, 0.05, 0.7);
        let f = velocity_primitive(&w, &BoundaryMode::Neumann);
        let rs = crate::diagnostics::e_eps(&u, &f, &sp, 0.05, 0.7);
        assert!((rv.e_eps - rs.e_eps).abs() <= 1e-14 * rs.e_eps);
    }

    #[test]
    fn vector_layer_profile_certificate_and_young_bound() {
        let q = VectorPotential::decoupled_quartic(2).unwrap();
        let eps = 0.05;
        let v = VectorStepProfile::new((0.0, 1.0), vec![0.5], 1.0 / 6.0, vec![0, 3], &q).unwrap();
        let g = geodesic_phi(&q, v.plateau(0), v.plateau(1), &opts()).unwrap();
        let grid = Grid::new(0.0, 1.0, 8001).unwrap();
        let u = build_vector_layer_profile(&v, std::slice::from_ref(&g.path), &q, eps, grid).unwrap();
        let cert = vector_lower_bound_certificate(&u, &v, &q, eps, 0.3, g.phi, None).unwrap();
        assert_eq!(cert.verdict, crate::diagnostics::Verdict::Pass);
        assert!(cert.excess > 0.0, "{}", cert.excess);
        let pe = vector_p_eps(&u, &q, eps);
        assert!(pe >= young_bound(&u, &q) - 1e-6);

        let far = VectorField::constant(grid, v.plateau(1));
        let cert = vector_lower_bound_certificate(&far, &v, &q, eps, 0.3, g.phi, None).unwrap();
        assert_eq!(cert.verdict, crate::diagnostics::Verdict::DistanceExceeded);
    }
}
