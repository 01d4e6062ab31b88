//! Stand-alone computations: `c₀`, the standing wave, `φ`, initial-data
//! dumps and certificates of snapshots.

use std::path::Path;

use anyhow::{bail, Context, Result};

use hch_core::{
    geodesic_phi, lower_bound_certificate, vector_lower_bound_certificate, Geodesic,
    GeodesicOptions, Grid, LowerBoundCertificate, Snapshot, StandingWave, StepProfile,
};

use crate::config::{Potential, PotentialSpec, ProfileSpec, RunConfig};
use crate::output::write_table;
use crate::simulate::{scalar_u0, vector_initial};

/// `c₀ = ∫ sqrt(2W)` between the wells, to quadrature tolerance `tol`.
pub fn c0(spec: &PotentialSpec, tol: f64) -> Result<f64> {
    match spec.build()? {
        Potential::Scalar(p) => Ok(p.c0(tol)?),
        Potential::Vector(_) => bail!("c0 needs a scalar potential; use phi for systems"),
    }
}

/// Tabulates `ω` on `points` equally spaced abscissae of `[x_min, x_max]`
/// into `path` (if given) and returns the samples.
pub fn omega(
    spec: &PotentialSpec,
    x_min: f64,
    x_max: f64,
    points: usize,
    path: Option<&Path>,
) -> Result<Vec<(f64, f64)>> {
    let Potential::Scalar(p) = spec.build()? else {
        bail!("omega needs a scalar potential");
    };
    if points < 2 || !(x_max > x_min) {
        bail!("omega needs x_min < x_max and at least 2 points");
    }
    let wave = StandingWave::new(&p)?;
    let xs: Vec<f64> = (0..points)
        .map(|k| x_min + (x_max - x_min) * k as f64 / (points - 1) as f64)
        .collect();
    let ws: Vec<f64> = xs.iter().map(|&x| wave.eval(x)).collect();
    if let Some(path) = path {
        write_table(path, &[&xs, &ws])?;
    }
    Ok(xs.into_iter().zip(ws).collect())
}

/// `φ(z_from, z_to)` between two zeros of the potential (scalars embedded).
pub fn phi(
    spec: &PotentialSpec,
    from: usize,
    to: usize,
    opts: &GeodesicOptions,
) -> Result<Geodesic> {
    let q = spec.as_vector()?;
    let zeros = q.zeros();
    for i in [from, to] {
        if i >= zeros.len() {
            bail!("zero index {i} out of range ({} zeros)", zeros.len());
        }
    }
    Ok(geodesic_phi(&q, &zeros[from], &zeros[to], opts)?)
}

/// Writes the configured initial datum as `x u_1 .. u_m` rows.
pub fn profile(cfg: &RunConfig, path: &Path) -> Result<()> {
    let grid = Grid::new(cfg.domain.a, cfg.domain.b, cfg.domain.n)?;
    let xs = grid.nodes();
    let comps: Vec<Vec<f64>> = match cfg.potential.build()? {
        Potential::Scalar(p) => vec![scalar_u0(cfg, &p)?.values],
        Potential::Vector(q) => vector_initial(cfg, &q)?
            .u0
            .components()
            .into_iter()
            .map(|c| c.values)
            .collect(),
    };
    let mut cols: Vec<&[f64]> = vec![&xs];
    cols.extend(comps.iter().map(Vec::as_slice));
    write_table(path, &cols)
}

/// Lower-bound certificate of a snapshot against the configured step profile.
pub fn certify(cfg: &RunConfig, snapshot: &Path) -> Result<LowerBoundCertificate> {
    let snap = Snapshot::read(snapshot)
        .with_context(|| format!("reading snapshot {}", snapshot.display()))?;
    let ProfileSpec::Layers {
        jumps,
        r,
        left_value,
        ..
    } = &cfg.profile
    else {
        bail!("certify needs a layers profile in the config");
    };
    let rate = cfg.stop.certificate_rate;
    let delta = cfg.stop.certificate_delta;
    match cfg.potential.build()? {
        Potential::Scalar(p) => {
            let v = StepProfile::new((cfg.domain.a, cfg.domain.b), jumps.clone(), *r, *left_value)?;
            let u = snap.to_state()?.u;
            if u.grid.a() != v.domain().0 || u.grid.b() != v.domain().1 {
                bail!("snapshot domain does not match the profile domain");
            }
            Ok(lower_bound_certificate(
                &u,
                &v,
                &p,
                snap.header.eps,
                rate,
                &cfg.boundary,
                delta,
            )?)
        }
        Potential::Vector(q) => {
            let init = vector_initial(cfg, &q)?;
            let s = snap.to_vector_state()?;
            Ok(vector_lower_bound_certificate(
                &s.u,
                &init.profile,
                &q,
                snap.header.eps,
                rate,
                init.p0,
                delta,
            )?)
        }
    }
}
