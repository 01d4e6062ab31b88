//! Interface sets `I_K[u]`, the Hausdorff distance, zero-crossing layer
//! tracking and the exit-time monitor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;

/// Sorted finite point set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InterfaceSet {
    points: Vec<f64>,
}

impl InterfaceSet {
    /// Sorts and merges points closer than `dedup` (keeping the first).
    pub fn new(mut points: Vec<f64>, dedup: f64) -> Self {
        points.retain(|p| !p.is_nan());
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut out: Vec<f64> = Vec::with_capacity(points.len());
        for p in points {
            match out.last() {
                Some(&q) if p - q <= dedup => {}
                _ => out.push(p),
            }
        }
        Self { points: out }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `max_{a∈self} min_{b∈other} |a − b|`.
    fn directed(&self, other: &InterfaceSet) -> f64 {
        let b = &other.points;
        self.points
            .iter()
            .map(|&a| {
                let k = b.partition_point(|&y| y < a);
                let mut d = f64::INFINITY;
                if k < b.len() {
                    d = d.min((b[k] - a).abs());
                }
                if k > 0 {
                    d = d.min((a - b[k - 1]).abs());
                }
                d
            })
            .fold(0.0, f64::max)
    }
}

/// Hausdorff distance between two non-empty finite sets.
pub fn hausdorff(a: &InterfaceSet, b: &InterfaceSet) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInterface);
    }
    Ok(a.directed(b).max(b.directed(a)))
}

/// Finite union of closed intervals bounded away from the wells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KBand {
    intervals: Vec<(f64, f64)>,
}

impl KBand {
    pub fn new(intervals: Vec<(f64, f64)>, wells: [f64; 2]) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::Config("K needs at least one interval".into()));
        }
        for &(lo, hi) in &intervals {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Config(format!(
                    "K interval [{lo}, {hi}] is empty or not finite"
                )));
            }
            if let Some(w) = wells.iter().find(|&&w| lo <= w && w <= hi) {
                return Err(Error::Config(format!(
                    "K interval [{lo}, {hi}] contains the well {w}"
                )));
            }
        }
        Ok(Self { intervals })
    }

    /// `[−1/2, 1/2]`.
    pub fn standard() -> Self {
        Self {
            intervals: vec![(-0.5, 0.5)],
        }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn contains(&self, u: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo <= u && u <= hi)
    }
}

/// Endpoints of the maximal intervals on which the piecewise-linear
/// interpolant of `u` takes values in `K`.
pub fn interface_of_function(u: &GridFunction, k: &KBand) -> InterfaceSet {
    let grid = u.grid;
    let dx = grid.dx();
    let mut pieces: Vec<(f64, f64)> = Vec::new();
    for (i, w) in u.values.windows(2).enumerate() {
        let (p, q) = (w[0], w[1]);
        let x0 = grid.x(i);
        for &(lo, hi) in k.intervals() {
            // {s ∈ [0,1] : lo ≤ p + (q − p) s ≤ hi}
            let (s0, s1) = if p == q {
                if lo <= p && p <= hi {
                    (0.0, 1.0)
                } else {
                    continue;
                }
            } else {
                let a = (lo - p) / (q - p);
                let b = (hi - p) / (q - p);
                (a.min(b).max(0.0), a.max(b).min(1.0))
            };
            if s0 <= s1 {
                let left = if s0 == 0.0 { x0 } else { x0 + s0 * dx };
                let right = if s1 == 1.0 {
                    grid.x(i + 1)
                } else {
                    x0 + s1 * dx
                };
                pieces.push((left, right));
            }
        }
    }
    pieces.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in pieces {
        match merged.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    let points = merged.into_iter().flat_map(|(lo, hi)| [lo, hi]).collect();
    InterfaceSet::new(points, 0.5 * dx)
}

/// Zero crossings of `u`, linearly interpolated between bracketing nodes.
pub fn locate_layers(u: &GridFunction) -> InterfaceSet {
    let grid = u.grid;
    let mut points = Vec::new();
    for (i, &v) in u.values.iter().enumerate() {
        if v == 0.0 {
            points.push(grid.x(i));
        }
    }
    for (i, w) in u.values.windows(2).enumerate() {
        let (p, q) = (w[0], w[1]);
        if p * q < 0.0 {
            points.push(grid.x(i) + p / (p - q) * grid.dx());
        }
    }
    InterfaceSet::new(points, 0.5 * grid.dx())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Annihilation,
    Creation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerEvent {
    pub t: f64,
    pub kind: EventKind,
    /// Index of the lost layer (annihilation) or position of the new crossing (creation).
    pub layer: Option<usize>,
    pub position: f64,
}

/// Layer positions over time, matched to the initial layers by nearest
/// neighbour within `r/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerTrack {
    radius: f64,
    times: Vec<f64>,
    /// One row per time; lost layers are `NaN`.
    positions: Vec<Vec<f64>>,
    counts: Vec<usize>,
    hausdorff: Vec<f64>,
    events: Vec<LayerEvent>,
}

impl LayerTrack {
    pub fn new(radius: f64) -> Self {
        Self {
            radius,
            times: Vec::new(),
            positions: Vec::new(),
            counts: Vec::new(),
            hausdorff: Vec::new(),
            events: Vec::new(),
        }
    }

    /// Appends a record; the first call fixes the tracked layers.
    pub fn push(&mut self, t: f64, layers: &InterfaceSet, hausdorff_from_init: f64) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::Config(format!(
                    "track times must increase: {t} after {last}"
                )));
            }
        }
        let row = match self.positions.last() {
            None => layers.points().to_vec(),
            Some(prev) => {
                let pts = layers.points();
                let mut taken = vec![false; pts.len()];
                let mut row = vec![f64::NAN; prev.len()];
                for (i, &h) in prev.iter().enumerate() {
                    if h.is_nan() {
                        continue;
                    }
                    let best = pts
                        .iter()
                        .enumerate()
                        .filter(|&(j, &p)| !taken[j] && (p - h).abs() <= 0.5 * self.radius)
                        .min_by(|a, b| (a.1 - h).abs().partial_cmp(&(b.1 - h).abs()).unwrap());
                    match best {
                        Some((j, &p)) => {
                            taken[j] = true;
                            row[i] = p;
                        }
                        None => self.events.push(LayerEvent {
                            t,
                            kind: EventKind::Annihilation,
                            layer: Some(i),
                            position: h,
                        }),
                    }
                }
                for (j, &p) in pts.iter().enumerate() {
                    if !taken[j] {
                        self.events.push(LayerEvent {
                            t,
                            kind: EventKind::Creation,
                            layer: None,
                            position: p,
                        });
                    }
                }
                row
            }
        };
        self.times.push(t);
        self.positions.push(row);
        self.counts.push(layers.len());
        self.hausdorff.push(hausdorff_from_init);
        Ok(())
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        &self.positions
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn hausdorff(&self) -> &[f64] {
        &self.hausdorff
    }

    pub fn events(&self) -> &[LayerEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of initially tracked layers.
    pub fn n_layers(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    /// Largest recorded Hausdorff distance from the initial interface.
    pub fn max_drift(&self) -> f64 {
        self.hausdorff.iter().copied().fold(0.0, f64::max)
    }

    /// Records strictly before the first event (the whole track if none).
    pub fn before_first_event(&self) -> LayerTrack {
        let end = self.events.first().map_or(self.times.len(), |e| {
            self.times.partition_point(|&t| t < e.t)
        });
        LayerTrack {
            radius: self.radius,
            times: self.times[..end].to_vec(),
            positions: self.positions[..end].to_vec(),
            counts: self.counts[..end].to_vec(),
            hausdorff: self.hausdorff[..end].to_vec(),
            events: Vec::new(),
        }
    }
}

/// First recorded time with Hausdorff distance above `delta1`.
pub fn exit_time(track: &LayerTrack, delta1: f64) -> Option<f64> {
    track
        .times
        .iter()
        .zip(&track.hausdorff)
        .find(|&(_, &d)| !(d <= delta1))
        .map(|(&t, _)| t)
}

/// `dh_i/dt` at every record: centered differences inside, one-sided at
/// the ends.
pub fn layer_velocity(track: &LayerTrack, i: usize) -> Result<Vec<(f64, f64)>> {
    let n0 = track.n_layers();
    if i >= n0 {
        return Err(Error::Config(format!(
            "layer index {i} out of range (0..{n0})"
        )));
    }
    for (k, row) in track.positions.iter().enumerate() {
        if row[i].is_nan() || track.counts[k] != n0 {
            return Err(Error::LayerIdentityLost {
                t: track.times[k],
                before: n0,
                after: track.counts[k],
            });
        }
    }
    let t = &track.times;
    let h: Vec<f64> = track.positions.iter().map(|row| row[i]).collect();
    let m = t.len();
    if m < 2 {
        return Ok(t.iter().map(|&ti| (ti, 0.0)).collect());
    }
    Ok((0..m)
        .map(|k| {
            let (lo, hi) = (k.saturating_sub(1), (k + 1).min(m - 1));
            (t[k], (h[hi] - h[lo]) / (t[hi] - t[lo]))
        })
        .collect())
}

/// Largest `|dh_i/dt|` over all layers and records.
pub fn max_layer_speed(track: &LayerTrack) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..track.n_layers() {
        for (_, v) in layer_velocity(track, i)? {
            worst = worst.max(v.abs());
        }
    }
    Ok(worst)
}

/// Builds the layer track and the `I_K` distance record along a run.
#[derive(Debug, Clone)]
pub struct InterfaceMonitor {
    k: KBand,
    initial: InterfaceSet,
    delta1: f64,
    track: LayerTrack,
    exit: Option<f64>,
}

impl InterfaceMonitor {
    pub fn new(u0: &GridFunction, k: KBand, delta1: f64, radius: f64) -> Result<Self> {
        if !(delta1 > 0.0 && delta1 < radius) {
            return Err(Error::Config(format!(
                "delta1 = {delta1} outside (0, r = {radius})"
            )));
        }
        let initial = interface_of_function(u0, &k);
        if initial.is_empty() {
            return Err(Error::EmptyInterface);
        }
        Ok(Self {
            k,
            initial,
            delta1,
            track: LayerTrack::new(radius),
            exit: None,
        })
    }

    pub fn record(&mut self, t: f64, u: &GridFunction) -> Result<()> {
        let now = interface_of_function(u, &self.k);
        let d = hausdorff(&now, &self.initial).unwrap_or(f64::INFINITY);
        self.track.push(t, &locate_layers(u), d)?;
        if self.exit.is_none() && !(d <= self.delta1) {
            self.exit = Some(t);
        }
        Ok(())
    }

    pub fn initial(&self) -> &InterfaceSet {
        &self.initial
    }

    pub fn track(&self) -> &LayerTrack {
        &self.track
    }

    pub fn exit_time(&self) -> Option<f64> {
        self.exit
    }

    pub fn into_track(self) -> LayerTrack {
        self.track
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::profiles::{build_layer_profile, StandingWave, StepProfile};
    use proptest::prelude::*;

    fn set(p: &[f64]) -> InterfaceSet {
        InterfaceSet::new(p.to_vec(), 0.0)
    }

    #[test]
    fn hausdorff_examples() {
        assert_eq!(hausdorff(&set(&[0.0]), &set(&[1.0])).unwrap(), 1.0);
        let s = set(&[0.1, 0.4, 0.9]);
        assert_eq!(hausdorff(&s, &s).unwrap(), 0.0);
        assert_eq!(
            hausdorff(&set(&[0.0, 1.0]), &set(&[0.0, 3.0])).unwrap(),
            2.0
        );
        assert_eq!(
            hausdorff(&set(&[]), &s).unwrap_err().to_string(),
            "empty interface"
        );
    }

    proptest! {
        #[test]
        fn hausdorff_is_a_metric(
            a in prop::collection::vec(-4096i32..4096, 1..12),
            b in prop::collection::vec(-4096i32..4096, 1..12),
            c in prop::collection::vec(-4096i32..4096, 1..12),
        ) {
            let mk = |v: &[i32]| set(&v.iter().map(|&k| k as f64 / 1024.0).collect::<Vec<_>>());
            let (a, b, c) = (mk(&a), mk(&b), mk(&c));
            let ab = hausdorff(&a, &b).unwrap();
            prop_assert_eq!(ab, hausdorff(&b, &a).unwrap());
            prop_assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
            prop_assert_eq!(ab == 0.0, a == b);
            prop_assert!(hausdorff(&a, &c).unwrap() <= ab + hausdorff(&b, &c).unwrap());
        }
    }

    #[test]
    fn interface_examples() {
        let grid = Grid::new(0.0, 1.0, 2001).unwrap();
        let k = KBand::standard();
        assert!(interface_of_function(&GridFunction::constant(grid, 1.0), &k).is_empty());

        let eps = 0.02;
        let u = GridFunction::from_fn(grid, |x| ((x - 0.5) / (2f64.sqrt() * eps)).tanh());
        let i = interface_of_function(&u, &k);
        let w = 2f64.sqrt() * eps * 0.5f64.atanh();
        assert_eq!(i.len(), 2);
        assert!((i.points()[0] - (0.5 - w)).abs() <= grid.dx());
        assert!((i.points()[1] - (0.5 + w)).abs() <= grid.dx());
        assert!((w - 0.015_536_724).abs() < 1e-9);

        let v = StepProfile::new((0.0, 1.0), vec![1.0 / 3.0, 2.0 / 3.0], 1.0 / 6.0, -1.0).unwrap();
        let u0 = build_layer_profile(&v, &StandingWave::Tanh, eps, grid).unwrap();
        let i = interface_of_function(&u0, &k);
        assert_eq!(i.len(), 4);
        assert!(i.points()[1] < 0.5 && i.points()[2] > 0.5);
        let iv = set(v.jumps());
        assert!(hausdorff(&i, &iv).unwrap() < v.radius() / 2.0);
    }

    #[test]
    fn shrinking_k_never_enlarges() {
        let grid = Grid::new(0.0, 1.0, 501).unwrap();
        let u = GridFunction::from_fn(grid, |x| (9.0 * x).sin() * 0.9);
        let big = interface_of_function(&u, &KBand::standard());
        let small = interface_of_function(&u, &KBand::new(vec![(-0.2, 0.3)], [-1.0, 1.0]).unwrap());
        let lo = big.points()[0] - grid.dx();
        let hi = big.points()[big.len() - 1] + grid.dx();
        assert!(small
            .points()
            .iter()
            .all(|&p| p >= lo && p <= hi && (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn k_band_rejects_wells() {
        assert!(KBand::new(vec![(0.0, 1.0)], [-1.0, 1.0]).is_err());
        assert!(KBand::new(vec![(0.5, 0.2)], [-1.0, 1.0]).is_err());
    }

    #[test]
    fn locate_layers_examples() {
        let grid = Grid::new(0.0, 1.0, 101).unwrap();
        assert!(locate_layers(&GridFunction::constant(grid, 1.0)).is_empty());
        let l = locate_layers(&GridFunction::from_fn(grid, |x| x - 0.25));
        assert_eq!(l.len(), 1);
        assert!((l.points()[0] - 0.25).abs() < 1e-15);

        let fine = Grid::new(0.0, 1.0, 4001).unwrap();
        let v = StepProfile::new((0.0, 1.0), vec![0.3, 0.7], 0.1, 1.0).unwrap();
        let u0 = build_layer_profile(&v, &StandingWave::Tanh, 0.01, fine).unwrap();
        let l = locate_layers(&u0);
        assert_eq!(l.len(), 2);
        for (p, h) in l.points().iter().zip(v.jumps()) {
            assert!((p - h).abs() <= fine.dx());
        }
    }

    #[test]
    fn exit_time_examples() {
        let delta1 = 0.1;
        let mut track = LayerTrack::new(0.5);
        for k in 0..10 {
            track.push(k as f64, &set(&[0.3]), 0.0).unwrap();
        }
        assert_eq!(exit_time(&track, delta1), None);

        let mut track = LayerTrack::new(0.5);
        for k in 0..10 {
            let h = if k >= 5 { 0.3 + 2.0 * delta1 } else { 0.3 };
            track
                .push(k as f64, &set(&[h]), (h - 0.3f64).abs())
                .unwrap();
        }
        assert_eq!(exit_time(&track, delta1), Some(5.0));
        assert!(track.push(9.0, &set(&[0.3]), 0.0).is_err());
    }

    #[test]
    fn annihilation_is_an_event() {
        let mut track = LayerTrack::new(0.2);
        track.push(0.0, &set(&[0.45, 0.55]), 0.0).unwrap();
        track.push(1.0, &set(&[0.47, 0.53]), 0.02).unwrap();
        track.push(2.0, &set(&[]), f64::INFINITY).unwrap();
        assert_eq!(track.events().len(), 2);
        assert_eq!(track.events()[0].kind, EventKind::Annihilation);
        assert_eq!(exit_time(&track, 0.05), Some(2.0));
        let err = layer_velocity(&track, 0).unwrap_err();
        assert!(err.to_string().starts_with("layer identity lost"));
        let clean = track.before_first_event();
        assert_eq!(clean.len(), 2);
        assert!((layer_velocity(&clean, 1).unwrap()[0].1 + 0.02).abs() < 1e-12);
    }

    #[test]
    fn velocity_of_affine_motion() {
        let mut track = LayerTrack::new(0.5);
        for k in 0..20 {
            let t = 0.5 * k as f64;
            track.push(t, &set(&[0.2 + 1e-3 * t, 0.6]), 0.0).unwrap();
        }
        for (_, v) in layer_velocity(&track, 0).unwrap() {
            assert!((v - 1e-3).abs() < 1e-12);
        }
        for (_, v) in layer_velocity(&track, 1).unwrap() {
            assert_eq!(v, 0.0);
        }
        assert!((max_layer_speed(&track).unwrap() - 1e-3).abs() < 1e-12);
    }
}
