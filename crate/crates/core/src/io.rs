//! `HCH1` snapshot files and two-column grid files.
//!
//! A snapshot is a header line
//! `HCH1 n=<n> m=<m> a=<a> b=<b> eps=<ε> tau=<τ> t=<t> formulation=<name>`
//! followed by `n` rows `x u_1..u_m [r_1..r_m]`, where `r` is `u_t` at the
//! nodes or, for the flux formulation, `J` at the face right of the node
//! (the last row then holds 0). Values are written with 17 significant
//! digits so a read-back reproduces them exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{FaceField, Grid, GridFunction};
use crate::solver::{Formulation, Rate, State};
use crate::vector::{VectorField, VectorState};

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotHeader {
    pub n: usize,
    pub m: usize,
    pub a: f64,
    pub b: f64,
    pub eps: f64,
    pub tau: f64,
    pub t: f64,
    pub formulation: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    /// `m` columns of `u`, each of length `n`.
    pub u: Vec<Vec<f64>>,
    /// Optional `m` columns of rate data.
    pub rate: Option<Vec<Vec<f64>>>,
}

impl Snapshot {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.header.a, self.header.b, self.header.n)
    }

    /// Scalar snapshot of a solver state.
    pub fn from_state(s: &State, eps: f64, tau: f64, formulation: Formulation) -> Self {
        let g = s.grid();
        let rate = match &s.rate {
            Rate::Velocity(w) => w.values.clone(),
            Rate::Flux(j) => {
                let mut v = j.values.clone();
                v.push(0.0);
                v
            }
        };
        Self {
            header: SnapshotHeader {
                n: g.len(),
                m: 1,
                a: g.a(),
                b: g.b(),
                eps,
                tau,
                t: s.t,
                formulation: formulation.name().to_string(),
            },
            u: vec![s.u.values.clone()],
            rate: Some(vec![rate]),
        }
    }

    /// Rebuilds a scalar state (step counter reset to 0).
    pub fn to_state(&self) -> Result<State> {
        if self.header.m != 1 {
            return Err(Error::Parse(format!(
                "expected a scalar snapshot, got m = {}",
                self.header.m
            )));
        }
        let grid = self.grid()?;
        let formulation = Formulation::from_name(&self.header.formulation)?;
        let u = GridFunction::new(grid, self.u[0].clone())?;
        let r = self
            .rate
            .as_ref()
            .map(|r| r[0].clone())
            .unwrap_or_else(|| vec![0.0; grid.len()]);
        let rate = match formulation {
            Formulation::Flux => Rate::Flux(FaceField::new(grid, r[..grid.len() - 1].to_vec())?),
            _ => Rate::Velocity(GridFunction::new(grid, r)?),
        };
        Ok(State {
            t: self.header.t,
            step: 0,
            u,
            rate,
        })
    }

    /// Vector snapshot of a (second-order) system state.
    pub fn from_vector_state(s: &VectorState, eps: f64, tau: f64) -> Self {
        let g = s.u.grid;
        let cols = |f: &VectorField| {
            f.components()
                .into_iter()
                .map(|c| c.values)
                .collect::<Vec<_>>()
        };
        Self {
            header: SnapshotHeader {
                n: g.len(),
                m: s.u.m,
                a: g.a(),
                b: g.b(),
                eps,
                tau,
                t: s.t,
                formulation: Formulation::SecondOrder.name().to_string(),
            },
            u: cols(&s.u),
            rate: Some(cols(&s.w)),
        }
    }

    /// Rebuilds a system state (step counter reset to 0).
    pub fn to_vector_state(&self) -> Result<VectorState> {
        if Formulation::from_name(&self.header.formulation)? != Formulation::SecondOrder {
            return Err(Error::Parse(
                "vector snapshots must use the second-order formulation".into(),
            ));
        }
        let grid = self.grid()?;
        let field = |cols: &[Vec<f64>]| -> Result<VectorField> {
            let comps = cols
                .iter()
                .map(|c| GridFunction::new(grid, c.clone()))
                .collect::<Result<Vec<_>>>()?;
            VectorField::from_components(&comps)
        };
        let u = field(&self.u)?;
        let w = match &self.rate {
            Some(r) => field(r)?,
            None => VectorField::zeros(grid, self.header.m),
        };
        Ok(VectorState {
            t: self.header.t,
            step: 0,
            u,
            w,
        })
    }

    pub fn to_text(&self) -> String {
        let h = &self.header;
        let mut out = format!(
            "HCH1 n={} m={} a={} b={} eps={} tau={} t={} formulation={}\n",
            h.n, h.m, h.a, h.b, h.eps, h.tau, h.t, h.formulation
        );
        let grid = Grid::new(h.a, h.b, h.n).ok();
        for i in 0..h.n {
            let x = grid.map_or(f64::NAN, |g| g.x(i));
            let _ = write!(out, "{x:.16e}");
            for col in self.u.iter().chain(self.rate.iter().flatten()) {
                let _ = write!(out, " {:.16e}", col[i]);
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines
            .next()
            .ok_or_else(|| Error::Parse("empty snapshot".into()))?;
        let mut fields = head.split_whitespace();
        if fields.next() != Some("HCH1") {
            return Err(Error::Parse("missing HCH1 magic".into()));
        }
        let mut get = |key: &str| -> Result<String> {
            let f = fields
                .next()
                .ok_or_else(|| Error::Parse(format!("header is missing {key}")))?;
            f.strip_prefix(key)
                .and_then(|v| v.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(|| Error::Parse(format!("expected {key}=..., found {f:?}")))
        };
        let num = |s: String, key: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad {key} value {s:?}")))
        };
        let n: usize = get("n")?
            .parse()
            .map_err(|_| Error::Parse("bad n".into()))?;
        let m: usize = get("m")?
            .parse()
            .map_err(|_| Error::Parse("bad m".into()))?;
        let a = num(get("a")?, "a")?;
        let b = num(get("b")?, "b")?;
        let eps = num(get("eps")?, "eps")?;
        let tau = num(get("tau")?, "tau")?;
        let t = num(get("t")?, "t")?;
        let formulation = get("formulation")?;
        if m == 0 {
            return Err(Error::Parse("m must be positive".into()));
        }
        let mut u = vec![Vec::with_capacity(n); m];
        let mut rate = vec![Vec::with_capacity(n); m];
        let mut cols = None;
        let mut rows = 0;
        for (k, line) in lines.enumerate() {
            let vals = line
                .split_whitespace()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("row {k}: bad number {s:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if vals.len() != 1 + m && vals.len() != 1 + 2 * m {
                return Err(Error::Parse(format!(
                    "row {k}: {} columns for m = {m}",
                    vals.len()
                )));
            }
            if *cols.get_or_insert(vals.len()) != vals.len() {
                return Err(Error::Parse(format!("row {k}: inconsistent column count")));
            }
            for c in 0..m {
                u[c].push(vals[1 + c]);
                if vals.len() == 1 + 2 * m {
                    rate[c].push(vals[1 + m + c]);
                }
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::Parse(format!(
                "header says n = {n}, found {rows} rows"
            )));
        }
        let has_rate = cols == Some(1 + 2 * m);
        Ok(Self {
            header: SnapshotHeader {
                n,
                m,
                a,
                b,
                eps,
                tau,
                t,
                formulation,
            },
            u,
            rate: has_rate.then_some(rate),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Reads `x value` rows (blank lines and `#` comments skipped) and checks
/// that the abscissae match the nodes of `grid`.
pub fn read_grid_file(path: &Path, grid: Grid) -> Result<GridFunction> {
    let text = std::fs::read_to_string(path)?;
    parse_grid_text(&text, grid)
}

pub fn parse_grid_text(text: &str, grid: Grid) -> Result<GridFunction> {
    let mut values = Vec::with_capacity(grid.len());
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        if parts.len() != 2 {
            return Err(Error::Parse(format!(
                "line {}: expected two columns",
                k + 1
            )));
        }
        let x: f64 = parts[0]
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad x", k + 1)))?;
        let v: f64 = parts[1]
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad value", k + 1)))?;
        let i = values.len();
        if i >= grid.len() {
            return Err(Error::Parse(format!("more than {} rows", grid.len())));
        }
        if (x - grid.x(i)).abs() > 1e-9 * grid.length() {
            return Err(Error::Parse(format!(
                "line {}: x = {x} does not match node {i} at {}",
                k + 1,
                grid.x(i)
            )));
        }
        values.push(v);
    }
    GridFunction::new(grid, values)
}
