//! Strict JSON run configuration.
//!
//! Unknown keys are rejected everywhere. Defaults that depend on other
//! fields (`stop.delta1`, `time.output_every`, the noise seed) are filled
//! in by [`parse_config`], so a parsed config re-serializes to a complete,
//! round-trippable document.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use hch_core::{
    default_delta, default_vector_delta, BoundaryMode, Formulation, ScalarPotential, StepProfile,
    VectorPotential, VectorStepProfile,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `(u² − 1)² / 4`.
    Quartic,
    /// Polynomial with ascending `coefficients` and wells `[lo, hi]`.
    Polynomial {
        coefficients: Vec<f64>,
        wells: [f64; 2],
    },
    /// `Σ_c (u_c² − 1)² / 4` on `R^m`.
    DecoupledQuartic { m: usize },
    /// `Σ_c p_c(u_c)`.
    PolynomialSum { components: Vec<ComponentSpec> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub coefficients: Vec<f64>,
    pub wells: [f64; 2],
}

/// A potential resolved from its spec.
#[derive(Debug, Clone)]
pub enum Potential {
    Scalar(ScalarPotential),
    Vector(VectorPotential),
}

impl PotentialSpec {
    pub fn build(&self) -> Result<Potential> {
        Ok(match self {
            PotentialSpec::Quartic => Potential::Scalar(ScalarPotential::quartic()),
            PotentialSpec::Polynomial {
                coefficients,
                wells,
            } => Potential::Scalar(ScalarPotential::polynomial(coefficients.clone(), *wells)?),
            PotentialSpec::DecoupledQuartic { m } => {
                Potential::Vector(VectorPotential::decoupled_quartic(*m)?)
            }
            PotentialSpec::PolynomialSum { components } => {
                Potential::Vector(VectorPotential::polynomial_sum(
                    components
                        .iter()
                        .map(|c| (c.coefficients.clone(), c.wells))
                        .collect(),
                )?)
            }
        })
    }

    pub fn is_vector(&self) -> bool {
        matches!(
            self,
            PotentialSpec::DecoupledQuartic { .. } | PotentialSpec::PolynomialSum { .. }
        )
    }

    /// The potential as a system on `R^m` (scalars are embedded with `m = 1`).
    pub fn as_vector(&self) -> Result<VectorPotential> {
        Ok(match self.build()? {
            Potential::Scalar(p) => VectorPotential::embed(&p),
            Potential::Vector(q) => q,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    #[serde(default)]
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
    #[serde(default = "default_n")]
    pub n: usize,
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self {
            a: 0.0,
            b: 1.0,
            n: default_n(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LayerShape {
    /// Standing-wave cores with linear collars.
    #[default]
    Collared,
    /// Sum of standing waves over the jumps and their boundary images.
    Reflected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub amplitude: f64,
    /// `k` in `cos(kπξ)` (Neumann) or `sin(kπξ)` (Dirichlet), `ξ = (x − a)/(b − a)`.
    pub wavenumber: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// Layered datum built on the step function with the given jumps.
    Layers {
        jumps: Vec<f64>,
        r: f64,
        #[serde(default = "minus_one")]
        left_value: f64,
        #[serde(default)]
        shape: LayerShape,
        /// Plateau zero indices, vector potentials only.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<usize>>,
    },
    Constant {
        value: f64,
    },
    /// `mean + Σ amplitude · cos(kπξ)`, Neumann only.
    Modes {
        #[serde(default)]
        mean: f64,
        terms: Vec<Mode>,
    },
}

impl ProfileSpec {
    pub fn radius(&self) -> Option<f64> {
        match self {
            ProfileSpec::Layers { r, .. } => Some(*r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
#[derive(Default)]
pub enum VelocitySpec {
    #[default]
    Zero,
    /// Uniform nodal noise, shifted to the given mean (Neumann) or pinned
    /// to zero at the ends (Dirichlet).
    Noise {
        amplitude: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default)]
        mean: f64,
    },
    /// `Σ amplitude · cos(kπξ)` (Neumann) or `sin(kπξ)` (Dirichlet).
    Modes {
        terms: Vec<Mode>,
    },
    /// Two-column `x u` file on the configured grid.
    File {
        path: PathBuf,
    },
}


#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DtSpec {
    Fixed(f64),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    #[serde(default = "auto_dt")]
    pub dt: DtSpec,
    pub t_max: f64,
    /// Output interval in time units; defaults to `t_max / 100`.
    #[serde(default)]
    pub output_every: Option<f64>,
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default)]
    pub snapshots: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopSpec {
    /// Exit radius for the interface; defaults to `r / 2`.
    #[serde(default)]
    pub delta1: Option<f64>,
    #[serde(default = "default_k")]
    pub k: Vec<[f64; 2]>,
    /// Decay rate `A` of the lower-bound certificate.
    #[serde(default = "default_rate")]
    pub certificate_rate: f64,
    /// L¹ gate of the certificate; defaults to `r/4 ·` well gap.
    #[serde(default)]
    pub certificate_delta: Option<f64>,
    #[serde(default)]
    pub stop_on_exit: bool,
}

impl Default for StopSpec {
    fn default() -> Self {
        Self {
            delta1: None,
            k: default_k(),
            certificate_rate: default_rate(),
            certificate_delta: None,
            stop_on_exit: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "quartic")]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub domain: DomainSpec,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "one")]
    pub tau: f64,
    #[serde(default = "neumann")]
    pub boundary: BoundaryMode,
    #[serde(default = "second_order")]
    pub formulation: Formulation,
    /// A profile without `type` is a layers profile.
    #[serde(deserialize_with = "layers_by_default")]
    pub profile: ProfileSpec,
    #[serde(default)]
    pub velocity: VelocitySpec,
    pub time: TimeSpec,
    #[serde(default)]
    pub stop: StopSpec,
    #[serde(default)]
    pub seed: u64,
}

fn layers_by_default<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<ProfileSpec, D::Error> {
    let mut v = Value::deserialize(d)?;
    if let Value::Object(map) = &mut v {
        map.entry("type").or_insert_with(|| Value::from("layers"));
    }
    ProfileSpec::deserialize(v).map_err(serde::de::Error::custom)
}

fn one() -> f64 {
    1.0
}
fn minus_one() -> f64 {
    -1.0
}
fn default_n() -> usize {
    257
}
fn default_eps() -> f64 {
    0.05
}
fn default_safety() -> f64 {
    0.2
}
fn default_rate() -> f64 {
    0.3
}
fn default_k() -> Vec<[f64; 2]> {
    vec![[-0.5, 0.5]]
}
fn auto_dt() -> DtSpec {
    DtSpec::Auto(AutoTag::Auto)
}
fn quartic() -> PotentialSpec {
    PotentialSpec::Quartic
}
fn neumann() -> BoundaryMode {
    BoundaryMode::Neumann
}
fn second_order() -> Formulation {
    Formulation::SecondOrder
}

/// Strict parse with defaults materialized and cross-field checks applied.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let value: Value = serde_json::from_str(text).context("config is not valid JSON")?;
    config_from_value(value)
}

pub fn config_from_value(value: Value) -> Result<RunConfig> {
    // serde ignores extra keys next to the tag of a unit variant
    for (field, tag, unit) in [
        ("potential", "type", "quartic"),
        ("boundary", "kind", "neumann"),
        ("velocity", "type", "zero"),
    ] {
        if let Some(Value::Object(map)) = value.get(field) {
            if map.get(tag).and_then(Value::as_str) == Some(unit) {
                if let Some(extra) = map.keys().find(|k| *k != tag) {
                    bail!("invalid config: unknown field `{extra}` in {field}");
                }
            }
        }
    }
    let mut cfg: RunConfig = serde_json::from_value(value).context("invalid config")?;
    cfg.materialize();
    cfg.validate()?;
    cfg.materialize_gate()?;
    Ok(cfg)
}

impl RunConfig {
    fn materialize(&mut self) {
        if self.stop.delta1.is_none() {
            self.stop.delta1 = self.profile.radius().map(|r| r / 2.0);
        }
        if self.time.output_every.is_none() {
            let every = self.time.t_max / 100.0;
            self.time.output_every = Some(if every > 0.0 { every } else { 1.0 });
        }
        if let VelocitySpec::Noise {
            seed: seed @ None, ..
        } = &mut self.velocity
        {
            *seed = Some(self.seed);
        }
    }

    /// Default certificate gate, known once the profile is validated.
    fn materialize_gate(&mut self) -> Result<()> {
        if self.stop.certificate_delta.is_some() {
            return Ok(());
        }
        if let ProfileSpec::Layers {
            jumps,
            r,
            left_value,
            labels,
            ..
        } = &self.profile
        {
            let domain = (self.domain.a, self.domain.b);
            self.stop.certificate_delta = Some(match (self.potential.build()?, labels) {
                (Potential::Scalar(p), _) => default_delta(
                    &StepProfile::new(domain, jumps.clone(), *r, *left_value)?,
                    &p,
                ),
                (Potential::Vector(q), Some(labels)) => default_vector_delta(
                    &VectorStepProfile::new(domain, jumps.clone(), *r, labels.clone(), &q)?,
                    &q,
                ),
                (Potential::Vector(_), None) => unreachable!("labels checked"),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn dx(&self) -> f64 {
        (self.domain.b - self.domain.a) / (self.domain.n as f64 - 1.0)
    }

    pub fn output_every(&self) -> f64 {
        self.time.output_every.unwrap_or(1.0)
    }

    fn validate(&self) -> Result<()> {
        let d = &self.domain;
        if !(d.b > d.a) || d.n < 5 {
            bail!(
                "domain: need a < b and n >= 5, got [{}, {}] with n = {}",
                d.a,
                d.b,
                d.n
            );
        }
        if !(self.eps > 0.0) {
            bail!("eps = {} must be positive", self.eps);
        }
        if self.dx() > self.eps / 4.0 {
            bail!(
                "domain.n and eps: dx = {} exceeds eps/4 = {}",
                self.dx(),
                self.eps / 4.0
            );
        }
        match self.formulation {
            Formulation::ClassicCh if self.tau != 0.0 => {
                bail!("formulation classic-ch requires tau = 0")
            }
            Formulation::SecondOrder | Formulation::Flux if !(self.tau > 0.0) => {
                bail!(
                    "formulation {} requires tau > 0, got {}",
                    self.formulation.name(),
                    self.tau
                )
            }
            _ => {}
        }
        if self.formulation == Formulation::Flux && self.boundary != BoundaryMode::Neumann {
            bail!("flux requires neumann");
        }
        self.boundary.validate()?;
        self.validate_profile()?;
        self.validate_velocity()?;
        let t = &self.time;
        if !(t.t_max >= 0.0) {
            bail!("time.t_max = {} must be non-negative", t.t_max);
        }
        if let DtSpec::Fixed(dt) = t.dt {
            if !(dt > 0.0) {
                bail!("time.dt = {dt} must be positive or \"auto\"");
            }
        }
        if !(self.output_every() > 0.0) {
            bail!(
                "time.output_every = {} must be positive",
                self.output_every()
            );
        }
        if !(t.safety > 0.0) {
            bail!("time.safety = {} must be positive", t.safety);
        }
        if let Some(&s) = t.snapshots.iter().find(|&&s| !(0.0..=t.t_max).contains(&s)) {
            bail!(
                "time.snapshots and time.t_max: snapshot time {s} outside [0, {}]",
                t.t_max
            );
        }
        let s = &self.stop;
        if let (Some(delta1), Some(r)) = (s.delta1, self.profile.radius()) {
            if !(delta1 > 0.0 && delta1 < r) {
                bail!("stop.delta1 and profile.r: delta1 = {delta1} outside (0, r = {r})");
            }
        }
        if s.k.iter().any(|iv| !(iv[0] < iv[1])) {
            bail!("stop.k intervals must satisfy lo < hi");
        }
        if !(s.certificate_rate > 0.0) {
            bail!(
                "stop.certificate_rate = {} must be positive",
                s.certificate_rate
            );
        }
        Ok(())
    }

    fn validate_profile(&self) -> Result<()> {
        let domain = (self.domain.a, self.domain.b);
        let vector = self.potential.is_vector();
        if vector {
            if self.boundary != BoundaryMode::Neumann
                || self.formulation != Formulation::SecondOrder
            {
                bail!("vector potentials require neumann boundary and second-order formulation");
            }
            if matches!(self.time.dt, DtSpec::Auto(_)) {
                bail!("time.dt and potential: vector potentials need an explicit dt");
            }
            if !matches!(
                self.velocity,
                VelocitySpec::Zero | VelocitySpec::Noise { .. }
            ) {
                bail!("vector potentials take zero or noise velocity");
            }
        }
        match &self.profile {
            ProfileSpec::Layers {
                jumps,
                r,
                left_value,
                shape,
                labels,
            } => {
                let v = StepProfile::new(domain, jumps.clone(), *r, *left_value)?;
                if !(self.eps < *r) {
                    bail!(
                        "eps and profile.r: eps = {} must be below r = {r}",
                        self.eps
                    );
                }
                match (vector, labels) {
                    (true, None) => bail!("profile.labels required for vector potentials"),
                    (false, Some(_)) => {
                        bail!("profile.labels and potential: labels need a vector potential")
                    }
                    (true, Some(labels)) => {
                        VectorStepProfile::new(
                            domain,
                            jumps.clone(),
                            *r,
                            labels.clone(),
                            &self.potential.as_vector()?,
                        )?;
                        if *shape != LayerShape::Collared {
                            bail!("profile.shape and potential: vector profiles are collared");
                        }
                    }
                    (false, None) => {}
                }
                if let BoundaryMode::Dirichlet { left, right } = self.boundary {
                    if left != v.left_value() || right != v.right_value() {
                        bail!(
                            "boundary signs ({left}, {right}) and profile plateaus ({}, {}) disagree",
                            v.left_value(),
                            v.right_value()
                        );
                    }
                }
            }
            ProfileSpec::Constant { value } => {
                if vector {
                    bail!(
                        "profile constant and potential: vector potentials need a layers profile"
                    );
                }
                if let BoundaryMode::Dirichlet { left, right } = self.boundary {
                    if left != *value || right != *value {
                        bail!(
                            "boundary signs ({left}, {right}) and profile value {value} disagree"
                        );
                    }
                }
            }
            ProfileSpec::Modes { .. } => {
                if vector || self.boundary != BoundaryMode::Neumann {
                    bail!("profile modes requires a scalar potential and neumann boundary");
                }
            }
        }
        Ok(())
    }

    fn validate_velocity(&self) -> Result<()> {
        if let VelocitySpec::Noise {
            amplitude, mean, ..
        } = &self.velocity
        {
            if !(*amplitude >= 0.0) {
                bail!("velocity.amplitude = {amplitude} must be non-negative");
            }
            if *mean != 0.0
                && (self.formulation != Formulation::SecondOrder
                    || self.boundary != BoundaryMode::Neumann)
            {
                bail!("velocity.mean and formulation: a non-zero mean needs second-order with neumann");
            }
        }
        if self.formulation == Formulation::ClassicCh && self.velocity != VelocitySpec::Zero {
            bail!("velocity and formulation: classic-ch takes no initial velocity");
        }
        Ok(())
    }
}
