//! Parameter sweeps over `ε` or `τ` on a bounded worker pool.

use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use hch_core::{log_linear_fit, DecayFit};

use crate::config::config_from_value;
use crate::output::{num, CsvWriter};
use crate::simulate::{simulate, SimOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Axis {
    Eps(Vec<f64>),
    Tau(Vec<f64>),
}

impl Axis {
    fn values(&self) -> &[f64] {
        match self {
            Axis::Eps(v) | Axis::Tau(v) => v,
        }
    }

    fn key(&self) -> &'static str {
        match self {
            Axis::Eps(_) => "eps",
            Axis::Tau(_) => "tau",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    /// A run config (JSON object) shared by every point.
    pub base: Value,
    pub axis: Axis,
    /// Objects merged into `base` for each point (empty or one per point).
    #[serde(default)]
    pub overrides: Vec<Value>,
    #[serde(default)]
    pub workers: Option<usize>,
}

pub fn parse_plan(text: &str) -> Result<SweepPlan> {
    let plan: SweepPlan = serde_json::from_str(text).context("invalid sweep plan")?;
    let n = plan.axis.values().len();
    if n < 2 {
        bail!("a sweep needs at least 2 points, got {n}");
    }
    if !plan.overrides.is_empty() && plan.overrides.len() != n {
        bail!(
            "overrides ({}) and axis ({n}) lengths differ",
            plan.overrides.len()
        );
    }
    if !plan.base.is_object() || plan.overrides.iter().any(|o| !o.is_object()) {
        bail!("base and overrides must be JSON objects");
    }
    if plan.workers == Some(0) {
        bail!("workers must be positive");
    }
    Ok(plan)
}

fn merge(into: &mut Value, patch: &Value) {
    match (into, patch) {
        (Value::Object(a), Value::Object(b)) => {
            for (k, v) in b {
                merge(a.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

impl SweepPlan {
    /// The JSON config of point `k`, before parsing.
    pub fn point_value(&self, k: usize, seed: Option<u64>) -> Value {
        let mut v = self.base.clone();
        if let Some(o) = self.overrides.get(k) {
            merge(&mut v, o);
        }
        v[self.axis.key()] = Value::from(self.axis.values()[k]);
        if let Some(seed) = seed {
            v["seed"] = Value::from(seed);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub eps: f64,
    pub tau: f64,
    /// `P_ε[u₀] − N c₀` (or `− P₀[v]`) of the initial datum.
    pub excess: f64,
    pub exit_time: Option<f64>,
    pub censored: bool,
    pub t_max: f64,
    pub ok: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub points: Vec<PointResult>,
    pub excess_fit: Result<DecayFit, String>,
    pub exit_fit: Result<DecayFit, String>,
    pub all_censored: bool,
    pub any_failed: bool,
    pub lines: Vec<String>,
}

fn run_point(plan: &SweepPlan, k: usize, seed: Option<u64>, out: &Path) -> PointResult {
    let (eps_axis, tau_axis) = match &plan.axis {
        Axis::Eps(v) => (Some(v[k]), None),
        Axis::Tau(v) => (None, Some(v[k])),
    };
    let value = plan.point_value(k, seed);
    let fallback =
        |key: &str, axis: Option<f64>| axis.or_else(|| value[key].as_f64()).unwrap_or(f64::NAN);
    let mut res = PointResult {
        eps: fallback("eps", eps_axis),
        tau: fallback("tau", tau_axis),
        excess: f64::NAN,
        exit_time: None,
        censored: false,
        t_max: value["time"]["t_max"].as_f64().unwrap_or(f64::NAN),
        ok: false,
        error: None,
    };
    let dir = out.join(format!("point_{k:03}"));
    let outcome = config_from_value(value.clone()).and_then(|cfg| {
        res.eps = cfg.eps;
        res.tau = cfg.tau;
        simulate(&cfg, &dir, &SimOptions::default())
    });
    match outcome {
        Ok(s) => {
            res.excess = s.certificate_initial.map_or(f64::NAN, |c| c.excess);
            res.exit_time = s.exit_time;
            res.censored = s.censored;
            res.t_max = s.t_max;
            res.ok = s.ok();
            res.error = s.error;
        }
        Err(e) => res.error = Some(format!("{e:#}")),
    }
    if let Some(e) = &res.error {
        let _ = std::fs::create_dir_all(&dir)
            .and_then(|_| std::fs::write(dir.join("error.txt"), format!("{e}\n")));
    }
    res
}

fn describe(name: &str, fit: &Result<DecayFit, String>) -> String {
    match fit {
        Ok(f) => format!(
            "{name} fit: slope {} intercept {} residual {}",
            num(f.slope),
            num(f.intercept),
            num(f.residual)
        ),
        Err(e) => format!("{name} fit: unavailable ({e})"),
    }
}

/// Runs every point into `out/point_NNN/`, then writes `sweep.csv` and
/// `sweep_report.txt`. Point failures are flagged, not fatal.
pub fn run_sweep(
    plan: &SweepPlan,
    out: &Path,
    workers: Option<usize>,
    seed: Option<u64>,
) -> Result<SweepReport> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let n = plan.axis.values().len();
    let workers = workers.or(plan.workers).unwrap_or(1).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()?;
    let points: Vec<PointResult> = pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|k| run_point(plan, k, seed, out))
            .collect()
    });

    let by_eps = matches!(plan.axis, Axis::Eps(_));
    let excess_pairs: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.ok && p.excess.is_finite())
        .map(|p| (p.eps, p.excess))
        .collect();
    let exit_pairs: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.ok)
        .filter_map(|p| p.exit_time.map(|t| (p.eps, t)))
        .collect();
    let fit = |pairs: &[(f64, f64)]| -> Result<DecayFit, String> {
        if !by_eps {
            return Err("fits need an eps axis".into());
        }
        log_linear_fit(pairs, 2).map_err(|e| e.to_string())
    };
    let excess_fit = fit(&excess_pairs);
    let exit_fit = fit(&exit_pairs);
    let any_failed = points.iter().any(|p| !p.ok);
    let all_censored = points.iter().all(|p| p.ok && p.censored);

    let header: Vec<String> = [
        "point",
        "eps",
        "tau",
        "excess",
        "exit_time",
        "censored",
        "t_max",
        "status",
        "excess_slope",
        "exit_slope",
    ]
    .map(String::from)
    .to_vec();
    let mut csv = CsvWriter::create(&out.join("sweep.csv"), &header)?;
    let slope = |f: &Result<DecayFit, String>| num(f.as_ref().map_or(f64::NAN, |f| f.slope));
    for (k, p) in points.iter().enumerate() {
        csv.row(&[
            k.to_string(),
            num(p.eps),
            num(p.tau),
            num(p.excess),
            num(p.exit_time.unwrap_or(f64::NAN)),
            p.censored.to_string(),
            num(p.t_max),
            if p.ok { "ok" } else { "failed" }.into(),
            slope(&excess_fit),
            slope(&exit_fit),
        ])?;
    }
    csv.finish()?;

    let mut lines = vec![
        describe("excess", &excess_fit),
        describe("exit-time", &exit_fit),
    ];
    if all_censored {
        let t_max = points.iter().map(|p| p.t_max).fold(f64::INFINITY, f64::min);
        lines.push(format!(
            "all censored; lower bound on t_ε = t_max = {t_max}"
        ));
    }
    for (k, p) in points.iter().enumerate() {
        if let Some(e) = &p.error {
            lines.push(format!("point {k} failed: {e}"));
        }
    }
    std::fs::write(out.join("sweep_report.txt"), lines.join("\n") + "\n")?;
    Ok(SweepReport {
        points,
        excess_fit,
        exit_fit,
        all_censored,
        any_failed,
        lines,
    })
}
