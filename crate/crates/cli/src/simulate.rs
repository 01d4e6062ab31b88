//! Single runs: initial data, time stepping, CSV rows, snapshots and the
//! run summary.

use std::cell::Cell;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use hch_core::{
    build_layer_profile, build_vector_layer_profile, dissipation_identity_residual, geodesic_phi,
    hausdorff, locate_vector_layers, lower_bound_certificate, max_layer_speed, noise_velocity, p0,
    project_zero_mean, read_grid_file, reflected_layer_profile, run, select_dt, state_energy,
    vector_energy, vector_lower_bound_certificate, BoundaryMode, EnergyReport, Formulation,
    GeodesicOptions, Grid, GridFunction, InterfaceMonitor, InterfaceSet, KBand, LayerTrack,
    LowerBoundCertificate, Observer, PhiCache, RunOptions, ScalarPotential, Snapshot, Solver,
    SolverConfig, StandingWave, State, StepProfile, VectorField, VectorPotential, VectorSolver,
    VectorState, VectorStepProfile,
};

use crate::config::{DtSpec, LayerShape, Mode, Potential, ProfileSpec, RunConfig, VelocitySpec};
use crate::output::{num, CsvWriter};

#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    /// Continue from a snapshot instead of the configured initial data.
    pub resume: Option<PathBuf>,
    /// Also write a gnuplot script next to the CSV files.
    pub plot: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MassSummary {
    /// `relaxation` (`m(0) + τ m'(0)(1 − e^{−t/τ})`), `conserved`, or `none`.
    pub law: String,
    pub m0: Vec<f64>,
    pub m0_prime: Vec<f64>,
    pub max_abs_deviation: Option<f64>,
    /// Deviation over `|m(0)| + τ|m'(0)|`.
    pub max_rel_deviation: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergySummary {
    pub e0: f64,
    pub e_final: f64,
    /// Largest increase of `E_ε` between recorded rows.
    pub max_increase: f64,
    /// `|E(0) − E(T) − diss(T)| / E(0)`.
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SnapshotRecord {
    pub t: f64,
    pub path: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub status: String,
    pub error: Option<String>,
    pub dt: f64,
    pub t_start: f64,
    pub t_final: f64,
    pub t_max: f64,
    pub eps: f64,
    pub tau: f64,
    pub rows: usize,
    pub stopped_on_exit: bool,
    pub exit_time: Option<f64>,
    /// Tracked run without exit before `t_final`.
    pub censored: bool,
    pub n_layers: usize,
    pub max_drift: Option<f64>,
    pub max_layer_speed: Option<f64>,
    pub layer_events: usize,
    pub certificate_initial: Option<LowerBoundCertificate>,
    pub certificate_final: Option<LowerBoundCertificate>,
    pub mass: MassSummary,
    pub energy: EnergySummary,
    pub snapshots: Vec<SnapshotRecord>,
}

impl Summary {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

fn grid_of(cfg: &RunConfig) -> Result<Grid> {
    Ok(Grid::new(cfg.domain.a, cfg.domain.b, cfg.domain.n)?)
}

fn modes(grid: Grid, terms: &[Mode], sine: bool) -> GridFunction {
    let (a, len) = (grid.a(), grid.length());
    GridFunction::from_fn(grid, |x| {
        let xi = (x - a) / len;
        terms
            .iter()
            .map(|m| {
                m.amplitude
                    * if sine {
                        (m.wavenumber * PI * xi).sin()
                    } else {
                        (m.wavenumber * PI * xi).cos()
                    }
            })
            .sum()
    })
}

fn pin_ends(mut u: GridFunction) -> GridFunction {
    let n = u.len();
    u.values[0] = 0.0;
    u.values[n - 1] = 0.0;
    u
}

fn step_profile(cfg: &RunConfig) -> Result<Option<StepProfile>> {
    Ok(match &cfg.profile {
        ProfileSpec::Layers {
            jumps,
            r,
            left_value,
            ..
        } => Some(StepProfile::new(
            (cfg.domain.a, cfg.domain.b),
            jumps.clone(),
            *r,
            *left_value,
        )?),
        _ => None,
    })
}

/// The configured initial position of a scalar run.
pub fn scalar_u0(cfg: &RunConfig, p: &ScalarPotential) -> Result<GridFunction> {
    let grid = grid_of(cfg)?;
    Ok(match &cfg.profile {
        ProfileSpec::Layers { shape, .. } => {
            let v = step_profile(cfg)?.expect("layers profile");
            let wave = StandingWave::new(p)?;
            match shape {
                LayerShape::Collared => build_layer_profile(&v, &wave, cfg.eps, grid)?,
                LayerShape::Reflected => {
                    reflected_layer_profile(&v, &wave, cfg.eps, grid, &cfg.boundary)?
                }
            }
        }
        ProfileSpec::Constant { value } => GridFunction::constant(grid, *value),
        ProfileSpec::Modes { mean, terms } => modes(grid, terms, false).map(|y| y + mean),
    })
}

/// The configured initial velocity of a scalar run.
pub fn scalar_u1(cfg: &RunConfig) -> Result<GridFunction> {
    let grid = grid_of(cfg)?;
    let dirichlet = matches!(cfg.boundary, BoundaryMode::Dirichlet { .. });
    let u1 = match &cfg.velocity {
        VelocitySpec::Zero => GridFunction::zeros(grid),
        VelocitySpec::Noise {
            amplitude,
            seed,
            mean,
        } => {
            let raw = noise_velocity(grid, *amplitude, seed.unwrap_or(cfg.seed));
            if dirichlet {
                raw
            } else {
                project_zero_mean(&raw).map(|w| w + mean)
            }
        }
        VelocitySpec::Modes { terms } => modes(grid, terms, dirichlet),
        VelocitySpec::File { path } => read_grid_file(path, grid)
            .with_context(|| format!("reading velocity file {}", path.display()))?,
    };
    Ok(if dirichlet { pin_ends(u1) } else { u1 })
}

pub fn resolve_dt(cfg: &RunConfig, grid: Grid, p: &ScalarPotential) -> Result<f64> {
    Ok(match cfg.time.dt {
        DtSpec::Fixed(dt) => dt,
        DtSpec::Auto(_) => select_dt(&solver_config(cfg, 1.0), grid, p)?,
    })
}

fn solver_config(cfg: &RunConfig, dt: f64) -> SolverConfig {
    SolverConfig {
        eps: cfg.eps,
        tau: cfg.tau,
        dt,
        t_max: cfg.time.t_max,
        formulation: cfg.formulation,
        boundary: cfg.boundary,
        safety: cfg.time.safety,
    }
}

/// The plateau zeros, per-jump geodesic paths and the system datum.
pub struct VectorInitial {
    pub profile: VectorStepProfile,
    pub u0: VectorField,
    pub p0: f64,
}

pub fn vector_initial(cfg: &RunConfig, q: &VectorPotential) -> Result<VectorInitial> {
    let grid = grid_of(cfg)?;
    let ProfileSpec::Layers {
        jumps,
        r,
        labels: Some(labels),
        ..
    } = &cfg.profile
    else {
        bail!("vector runs need a layers profile with labels");
    };
    let v = VectorStepProfile::new(
        (cfg.domain.a, cfg.domain.b),
        jumps.clone(),
        *r,
        labels.clone(),
        q,
    )?;
    let opts = GeodesicOptions::default();
    let mut paths = Vec::with_capacity(v.n_layers());
    for k in 0..v.n_layers() {
        paths.push(geodesic_phi(q, v.plateau(k), v.plateau(k + 1), &opts)?.path);
    }
    let u0 = build_vector_layer_profile(&v, &paths, q, cfg.eps, grid)?;
    let p0 = p0(&v, q, &PhiCache::new(), &opts)?;
    Ok(VectorInitial { profile: v, u0, p0 })
}

fn vector_u1(cfg: &RunConfig, m: usize) -> Result<VectorField> {
    let grid = grid_of(cfg)?;
    Ok(match &cfg.velocity {
        VelocitySpec::Zero => VectorField::zeros(grid, m),
        VelocitySpec::Noise {
            amplitude,
            seed,
            mean,
        } => {
            let base = seed.unwrap_or(cfg.seed);
            let comps: Vec<GridFunction> = (0..m)
                .map(|c| {
                    project_zero_mean(&noise_velocity(
                        grid,
                        *amplitude,
                        base.wrapping_add(c as u64),
                    ))
                    .map(|w| w + mean)
                })
                .collect();
            VectorField::from_components(&comps)?
        }
        _ => bail!("vector runs take zero or noise velocity"),
    })
}

/// Interface bookkeeping for one run kind.
trait Tracker<S> {
    fn record(&mut self, s: &S) -> Result<()>;
    fn track(&self) -> &LayerTrack;
    fn exit_time(&self) -> Option<f64>;
}

impl Tracker<State> for InterfaceMonitor {
    fn record(&mut self, s: &State) -> Result<()> {
        Ok(InterfaceMonitor::record(self, s.t, &s.u)?)
    }
    fn track(&self) -> &LayerTrack {
        InterfaceMonitor::track(self)
    }
    fn exit_time(&self) -> Option<f64> {
        InterfaceMonitor::exit_time(self)
    }
}

/// Layers of a system located by nearest-zero changes; the exit distance is
/// the Hausdorff distance of the layer sets.
struct VectorTracker {
    q: VectorPotential,
    initial: InterfaceSet,
    delta1: f64,
    track: LayerTrack,
    exit: Option<f64>,
}

impl Tracker<VectorState> for VectorTracker {
    fn record(&mut self, s: &VectorState) -> Result<()> {
        let now = locate_vector_layers(&s.u, &self.q);
        let d = hausdorff(&now, &self.initial).unwrap_or(f64::INFINITY);
        self.track.push(s.t, &now, d)?;
        if self.exit.is_none() && !(d <= self.delta1) {
            self.exit = Some(s.t);
        }
        Ok(())
    }
    fn track(&self) -> &LayerTrack {
        &self.track
    }
    fn exit_time(&self) -> Option<f64> {
        self.exit
    }
}

/// Per-kind measurements used by the recorder.
trait Probe<S> {
    fn energy(&self, s: &S, diss_cum: f64) -> EnergyReport;
    fn masses(&self, s: &S) -> Vec<f64>;
    fn snapshot(&self, s: &S) -> Snapshot;
    fn time(s: &S) -> f64;
}

struct ScalarProbe {
    p: ScalarPotential,
    eps: f64,
    tau: f64,
    mode: BoundaryMode,
    formulation: Formulation,
}

impl Probe<State> for ScalarProbe {
    fn energy(&self, s: &State, diss_cum: f64) -> EnergyReport {
        state_energy(s, &self.p, self.eps, self.tau, &self.mode, diss_cum)
    }
    fn masses(&self, s: &State) -> Vec<f64> {
        vec![s.u.integral()]
    }
    fn snapshot(&self, s: &State) -> Snapshot {
        Snapshot::from_state(s, self.eps, self.tau, self.formulation)
    }
    fn time(s: &State) -> f64 {
        s.t
    }
}

struct VectorProbe {
    q: VectorPotential,
    eps: f64,
    tau: f64,
}

impl Probe<VectorState> for VectorProbe {
    fn energy(&self, s: &VectorState, diss_cum: f64) -> EnergyReport {
        vector_energy(s, &self.q, self.eps, self.tau).at(s.t, diss_cum)
    }
    fn masses(&self, s: &VectorState) -> Vec<f64> {
        s.u.masses()
    }
    fn snapshot(&self, s: &VectorState) -> Snapshot {
        Snapshot::from_vector_state(s, self.eps, self.tau)
    }
    fn time(s: &VectorState) -> f64 {
        s.t
    }
}

/// Expected mass law for the run.
#[derive(Debug, Clone)]
enum MassLaw {
    Relaxation {
        t0: f64,
        m0: Vec<f64>,
        m1: Vec<f64>,
        tau: f64,
    },
    Conserved {
        m0: Vec<f64>,
    },
    None {
        m0: Vec<f64>,
    },
}

impl MassLaw {
    fn expected(&self, t: f64) -> Option<Vec<f64>> {
        match self {
            MassLaw::Relaxation { t0, m0, m1, tau } => Some(
                m0.iter()
                    .zip(m1)
                    .map(|(&a, &b)| hch_core::mass_closed_form(t - t0, a, b, *tau))
                    .collect(),
            ),
            MassLaw::Conserved { m0 } => Some(m0.clone()),
            MassLaw::None { .. } => None,
        }
    }

    fn scale(&self) -> f64 {
        match self {
            MassLaw::Relaxation { m0, m1, tau, .. } => m0
                .iter()
                .zip(m1)
                .map(|(a, b)| a.abs() + tau * b.abs())
                .fold(0.0, f64::max),
            MassLaw::Conserved { m0 } | MassLaw::None { m0 } => {
                m0.iter().fold(0.0_f64, |a, b| a.max(b.abs()))
            }
        }
    }

    fn summary(&self, max_abs: Option<f64>) -> MassSummary {
        let (law, m0, m1) = match self {
            MassLaw::Relaxation { m0, m1, .. } => ("relaxation", m0.clone(), m1.clone()),
            MassLaw::Conserved { m0 } => ("conserved", m0.clone(), vec![0.0; m0.len()]),
            MassLaw::None { m0 } => ("none", m0.clone(), Vec::new()),
        };
        let scale = self.scale();
        MassSummary {
            law: law.into(),
            m0,
            m0_prime: m1,
            max_abs_deviation: max_abs,
            max_rel_deviation: max_abs.map(|d| if scale > 0.0 { d / scale } else { d }),
        }
    }
}

struct Recorder<'a, S, P: Probe<S>, T: Tracker<S>> {
    probe: &'a P,
    tracker: Option<T>,
    calls: u64,
    stride: u64,
    total: u64,
    snapshot_steps: Vec<(u64, f64)>,
    dir: &'a Path,
    csv: CsvWriter,
    n_cols: usize,
    law: MassLaw,
    max_mass_dev: f64,
    first: Option<EnergyReport>,
    last_report: Option<EnergyReport>,
    max_increase: f64,
    rows: usize,
    snapshots: Vec<SnapshotRecord>,
    last_state: Option<S>,
    exit_flag: &'a Cell<bool>,
    stop_on_exit: bool,
}

impl<S: Clone, P: Probe<S>, T: Tracker<S>> Recorder<'_, S, P, T> {
    fn write_row(&mut self, s: &S, diss_cum: f64) -> Result<()> {
        let e = self.probe.energy(s, diss_cum);
        let first = *self.first.get_or_insert(e);
        let residual = dissipation_identity_residual(&[first, e]).unwrap_or(0.0);
        if let Some(prev) = self.last_report {
            self.max_increase = self.max_increase.max(e.e_eps - prev.e_eps);
        }
        self.last_report = Some(e);
        if let Some(expected) = self.law.expected(P::time(s)) {
            for (m, x) in self.probe.masses(s).iter().zip(expected) {
                self.max_mass_dev = self.max_mass_dev.max((m - x).abs());
            }
        }
        let mut row = vec![
            num(e.t),
            num(e.mass),
            num(e.p_eps),
            num(e.kinetic),
            num(e.e_eps),
            num(diss_cum),
            num(residual),
        ];
        match &mut self.tracker {
            Some(tr) => {
                tr.record(s)?;
                let track = tr.track();
                let last = track.len() - 1;
                row.push(track.counts()[last].to_string());
                let pos = &track.positions()[last];
                row.extend((0..self.n_cols).map(|i| num(pos.get(i).copied().unwrap_or(f64::NAN))));
                row.push(num(track.hausdorff()[last]));
                if self.stop_on_exit && tr.exit_time().is_some() {
                    self.exit_flag.set(true);
                }
            }
            None => {
                row.push("0".into());
                row.push(num(f64::NAN));
            }
        }
        debug_assert_eq!(row.len(), 9 + self.n_cols);
        self.csv.row(&row)?;
        self.rows += 1;
        self.last_state = Some(s.clone());
        Ok(())
    }
}

impl<S: Clone, P: Probe<S>, T: Tracker<S>> Observer<S> for Recorder<'_, S, P, T> {
    fn observe(&mut self, s: &S, diss_cum: f64) -> hch_core::Result<()> {
        let k = self.calls;
        self.calls += 1;
        let io =
            |e: anyhow::Error| hch_core::Error::Io(format!("output at t = {}: {e:#}", P::time(s)));
        if let Some(&(_, t)) = self.snapshot_steps.iter().find(|&&(step, _)| step == k) {
            let name = format!("snapshot_{:03}.hch", self.snapshots.len());
            self.probe.snapshot(s).write(&self.dir.join(&name))?;
            self.snapshots.push(SnapshotRecord { t, path: name });
        }
        if k == 0 || k.is_multiple_of(self.stride) || k == self.total {
            self.write_row(s, diss_cum).map_err(io)?;
        }
        Ok(())
    }
}

fn run_header(n_cols: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "t", "mass", "p_eps", "kinetic", "e_eps", "diss_cum", "residual", "n_layers",
    ]
    .map(String::from)
    .to_vec();
    h.extend((1..=n_cols).map(|i| format!("h_{i}")));
    h.push("hausdorff_from_init".into());
    h
}

fn write_track(path: &Path, track: &LayerTrack) -> Result<()> {
    let n = track.n_layers();
    let mut h = vec!["t".to_string(), "n_layers".to_string()];
    h.extend((1..=n).map(|i| format!("h_{i}")));
    h.push("hausdorff_from_init".into());
    let mut csv = CsvWriter::create(path, &h)?;
    for k in 0..track.len() {
        let mut row = vec![num(track.times()[k]), track.counts()[k].to_string()];
        row.extend(track.positions()[k].iter().map(|&x| num(x)));
        row.push(num(track.hausdorff()[k]));
        csv.row(&row)?;
    }
    csv.finish()
}

fn write_plot_script(dir: &Path, n_cols: usize) -> Result<()> {
    let mut f = BufWriter::new(File::create(dir.join("run.gp"))?);
    writeln!(f, "set datafile separator ','")?;
    writeln!(f, "set key autotitle columnhead")?;
    writeln!(f, "set xlabel 't'")?;
    writeln!(f, "set multiplot layout 2,1")?;
    writeln!(
        f,
        "plot 'run.csv' using 1:5 with lines, '' using 1:3 with lines"
    )?;
    if n_cols > 0 {
        let cols: Vec<String> = (0..n_cols)
            .map(|i| format!("'' using 1:{} with lines", 9 + i))
            .collect();
        writeln!(f, "plot 'run.csv' {}", &cols.join(", ")[3..])?;
    } else {
        writeln!(f, "plot 'run.csv' using 1:7 with lines")?;
    }
    writeln!(f, "unset multiplot")?;
    f.flush()?;
    Ok(())
}

/// Shared driver: sets up the recorder, runs, and assembles the summary.
#[allow(clippy::too_many_arguments)]
fn drive<I, P, T>(
    cfg: &RunConfig,
    dir: &Path,
    opts: &SimOptions,
    solver: &mut I,
    s0: I::State,
    probe: &P,
    tracker: Option<T>,
    law: MassLaw,
    dt: f64,
    certify: &dyn Fn(&I::State) -> Option<LowerBoundCertificate>,
) -> Result<Summary>
where
    I: hch_core::Integrator,
    I::State: Clone,
    P: Probe<I::State>,
    T: Tracker<I::State>,
{
    let t0 = P::time(&s0);
    let t_max = cfg.time.t_max;
    let total = if t_max > t0 {
        ((t_max - t0) / dt - 1e-9).ceil() as u64
    } else {
        0
    };
    let stride = ((cfg.output_every() / dt).round() as u64).max(1);
    let snapshot_steps = cfg
        .time
        .snapshots
        .iter()
        .filter(|&&t| t >= t0 - 1e-12)
        .map(|&t| ((((t - t0) / dt).round() as u64).min(total), t))
        .collect();
    let n_cols = match (&tracker, &cfg.profile) {
        (Some(_), ProfileSpec::Layers { jumps, .. }) => jumps.len(),
        _ => 0,
    };
    let csv = CsvWriter::create(&dir.join("run.csv"), &run_header(n_cols))?;
    let exit_flag = Cell::new(false);
    let certificate_initial = certify(&s0);
    let mut rec = Recorder {
        probe,
        tracker,
        calls: 0,
        stride,
        total,
        snapshot_steps,
        dir,
        csv,
        n_cols,
        law,
        max_mass_dev: 0.0,
        first: None,
        last_report: None,
        max_increase: 0.0,
        rows: 0,
        snapshots: Vec::new(),
        last_state: None,
        exit_flag: &exit_flag,
        stop_on_exit: cfg.stop.stop_on_exit,
    };
    let stop = |_: &I::State| exit_flag.get();
    let outcome = run(
        solver,
        s0,
        &mut [&mut rec],
        RunOptions {
            output_every: 1,
            stop: Some(Box::new(stop)),
        },
    );
    let (status, error, stopped) = match &outcome {
        Ok(o) => ("ok", None, o.stopped),
        Err(e) => {
            rec.csv.line(&format!("FAILED: {e}"))?;
            ("failed", Some(e.to_string()), false)
        }
    };
    rec.csv.finish()?;
    let final_state = match outcome {
        Ok(o) => Some(o.state),
        Err(_) => rec.last_state.clone(),
    };
    let certificate_final = final_state.as_ref().and_then(certify);
    let first = rec.first.unwrap_or(EnergyReport {
        t: t0,
        p_eps: 0.0,
        kinetic: 0.0,
        e_eps: 0.0,
        mass: 0.0,
        diss_cum: 0.0,
    });
    let last = rec.last_report.unwrap_or(first);
    let (exit_time, n_layers, max_drift, speed, events) = match &rec.tracker {
        Some(tr) => {
            let track = tr.track();
            write_track(&dir.join("track.csv"), track)?;
            (
                tr.exit_time(),
                track.n_layers(),
                Some(track.max_drift()),
                max_layer_speed(track).ok(),
                track.events().len(),
            )
        }
        None => (None, 0, None, None, 0),
    };
    if opts.plot {
        write_plot_script(dir, n_cols)?;
    }
    let tracked = rec.tracker.is_some();
    let summary = Summary {
        status: status.into(),
        error,
        dt,
        t_start: t0,
        t_final: final_state.as_ref().map_or(t0, P::time),
        t_max,
        eps: cfg.eps,
        tau: cfg.tau,
        rows: rec.rows,
        stopped_on_exit: stopped,
        exit_time,
        censored: tracked && status == "ok" && exit_time.is_none(),
        n_layers,
        max_drift,
        max_layer_speed: speed,
        layer_events: events,
        certificate_initial,
        certificate_final,
        mass: rec
            .law
            .summary((!matches!(rec.law, MassLaw::None { .. })).then_some(rec.max_mass_dev)),
        energy: EnergySummary {
            e0: first.e_eps,
            e_final: last.e_eps,
            max_increase: rec.max_increase,
            residual: dissipation_identity_residual(&[first, last]).unwrap_or(0.0),
        },
        snapshots: rec.snapshots.clone(),
    };
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    Ok(summary)
}

/// Runs `cfg`, writing `run.csv`, `track.csv`, snapshots and
/// `summary.json` into `dir`. Solver failures are reported in the summary
/// (status `failed`); setup errors are returned.
pub fn simulate(cfg: &RunConfig, dir: &Path, opts: &SimOptions) -> Result<Summary> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("config.json"), cfg.to_json() + "\n")?;
    match cfg.potential.build()? {
        Potential::Scalar(p) => simulate_scalar(cfg, dir, opts, p),
        Potential::Vector(q) => simulate_vector(cfg, dir, opts, q),
    }
}

fn simulate_scalar(
    cfg: &RunConfig,
    dir: &Path,
    opts: &SimOptions,
    p: ScalarPotential,
) -> Result<Summary> {
    let grid = grid_of(cfg)?;
    let dt = resolve_dt(cfg, grid, &p)?;
    let mut solver = Solver::new(solver_config(cfg, dt), p.clone(), grid)?;
    let u0 = scalar_u0(cfg, &p)?;
    let s0 = match &opts.resume {
        Some(path) => resume_scalar(cfg, path, grid)?,
        None => solver.initial_state(u0.clone(), scalar_u1(cfg)?)?,
    };
    let v = step_profile(cfg)?;
    let tracker = match &v {
        Some(v) if v.n_layers() > 0 => {
            let k = KBand::new(
                cfg.stop.k.iter().map(|iv| (iv[0], iv[1])).collect(),
                p.wells(),
            )?;
            Some(InterfaceMonitor::new(
                &u0,
                k,
                cfg.stop.delta1.expect("materialized"),
                v.radius(),
            )?)
        }
        _ => None,
    };
    let m0 = vec![s0.u.integral()];
    let law = match (cfg.boundary, cfg.formulation) {
        (BoundaryMode::Neumann, Formulation::SecondOrder) => MassLaw::Relaxation {
            t0: s0.t,
            m0,
            m1: vec![s0.velocity().integral()],
            tau: cfg.tau,
        },
        (BoundaryMode::Neumann, _) => MassLaw::Conserved { m0 },
        _ => MassLaw::None { m0 },
    };
    let probe = ScalarProbe {
        p: p.clone(),
        eps: cfg.eps,
        tau: cfg.tau,
        mode: cfg.boundary,
        formulation: cfg.formulation,
    };
    let certify = |s: &State| -> Option<LowerBoundCertificate> {
        let v = v.as_ref()?;
        lower_bound_certificate(
            &s.u,
            v,
            &p,
            cfg.eps,
            cfg.stop.certificate_rate,
            &cfg.boundary,
            cfg.stop.certificate_delta,
        )
        .ok()
    };
    drive(
        cfg,
        dir,
        opts,
        &mut solver,
        s0,
        &probe,
        tracker,
        law,
        dt,
        &certify,
    )
}

fn check_snapshot(cfg: &RunConfig, snap: &Snapshot, grid: Grid, m: usize) -> Result<()> {
    let h = &snap.header;
    if h.n != grid.len() || h.a != grid.a() || h.b != grid.b() || h.m != m {
        bail!(
            "snapshot grid (n = {}, m = {}, [{}, {}]) does not match the config",
            h.n,
            h.m,
            h.a,
            h.b
        );
    }
    if h.eps != cfg.eps || h.tau != cfg.tau || h.formulation != cfg.formulation.name() {
        bail!(
            "snapshot parameters (eps = {}, tau = {}, {}) do not match the config",
            h.eps,
            h.tau,
            h.formulation
        );
    }
    Ok(())
}

fn resume_scalar(cfg: &RunConfig, path: &Path, grid: Grid) -> Result<State> {
    let snap =
        Snapshot::read(path).with_context(|| format!("reading snapshot {}", path.display()))?;
    check_snapshot(cfg, &snap, grid, 1)?;
    Ok(snap.to_state()?)
}

fn simulate_vector(
    cfg: &RunConfig,
    dir: &Path,
    opts: &SimOptions,
    q: VectorPotential,
) -> Result<Summary> {
    let grid = grid_of(cfg)?;
    let init = vector_initial(cfg, &q)?;
    let dt = match cfg.time.dt {
        DtSpec::Fixed(dt) => dt,
        DtSpec::Auto(_) => bail!("vector runs need an explicit time.dt"),
    };
    let mut solver = VectorSolver::new(solver_config(cfg, dt), q.clone(), grid)?;
    let s0 = match &opts.resume {
        Some(path) => {
            let snap = Snapshot::read(path)
                .with_context(|| format!("reading snapshot {}", path.display()))?;
            check_snapshot(cfg, &snap, grid, q.dim())?;
            snap.to_vector_state()?
        }
        None => solver.initial_state(init.u0.clone(), vector_u1(cfg, q.dim())?)?,
    };
    let tracker = if init.profile.n_layers() > 0 {
        let initial = locate_vector_layers(&init.u0, &q);
        if initial.is_empty() {
            bail!("initial system datum has no located layers");
        }
        Some(VectorTracker {
            q: q.clone(),
            initial,
            delta1: cfg.stop.delta1.expect("materialized"),
            track: LayerTrack::new(init.profile.radius()),
            exit: None,
        })
    } else {
        None
    };
    let law = MassLaw::Relaxation {
        t0: s0.t,
        m0: s0.u.masses(),
        m1: s0.w.masses(),
        tau: cfg.tau,
    };
    let probe = VectorProbe {
        q: q.clone(),
        eps: cfg.eps,
        tau: cfg.tau,
    };
    let certify = |s: &VectorState| -> Option<LowerBoundCertificate> {
        vector_lower_bound_certificate(
            &s.u,
            &init.profile,
            &q,
            cfg.eps,
            cfg.stop.certificate_rate,
            init.p0,
            cfg.stop.certificate_delta,
        )
        .ok()
    };
    drive(
        cfg,
        dir,
        opts,
        &mut solver,
        s0,
        &probe,
        tracker,
        law,
        dt,
        &certify,
    )
}
