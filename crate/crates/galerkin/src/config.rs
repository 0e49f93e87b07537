//! JSON run-configuration surface shared by the CLI and the test suites.
//!
//! Configs are strict: unknown fields are schema errors carrying a JSON
//! pointer, out-of-range values are value errors, and exponent
//! admissibility is computed at parse time as warnings rather than errors.

use crate::error::{Error, Result};
use crate::operators::{
    NemytskiiKind, NemytskiiSpec, OperatorFamily, OperatorPart, RhsSpec, StructuralConstants,
};
use crate::profiles::TimeProfile;
use crate::solver::{InitialSpec, ProblemConfig, SpaceSpec};
use crate::spaces::SpaceKind;
use crate::verify::exponents::{
    exponent_report, format_rational, parse_rational, rational, rational_from_f64, rational_to_f64,
    Rational,
};
use crate::verify::CheckSettings;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

/// Exact rational carried through configs; accepts a JSON number or a
/// string like "11/5" and serializes back to the string form.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalValue(pub Rational);

impl Serialize for RationalValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_rational(&self.0))
    }
}

impl<'de> Deserialize<'de> for RationalValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = RationalValue;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                write!(f, "a number or a rational string like \"11/5\"")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
                parse_rational(v).map(RationalValue).map_err(E::custom)
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Self::Value, E> {
                rational_from_f64(v).map(RationalValue).map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Self::Value, E> {
                Ok(RationalValue(crate::verify::exponents::rational_int(v)))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Self::Value, E> {
                i64::try_from(v)
                    .map(|x| RationalValue(crate::verify::exponents::rational_int(x)))
                    .map_err(E::custom)
            }
        }
        deserializer.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub space: SpaceConfig,
    pub operator: OperatorConfig,
    #[serde(default = "default_rhs")]
    pub rhs: RhsSpec,
    pub initial: InitialSpec,
    pub time: TimeConfig,
    #[serde(default)]
    pub check: CheckConfig,
}

fn default_rhs() -> RhsSpec {
    RhsSpec::Zero
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub kind: SpaceKind,
    pub dim: u32,
    #[serde(default = "default_smoothness")]
    pub s: f64,
    #[serde(default)]
    pub quad_order: Option<u32>,
}

fn default_smoothness() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub p: RationalValue,
    #[serde(default)]
    pub delta: f64,
    pub parts: Vec<PartConfig>,
    #[serde(default)]
    pub constants: ConstantsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PartConfig {
    PLaplace,
    Nemytskii {
        kind: NemytskiiKindConfig,
        #[serde(default)]
        a: f64,
        #[serde(default = "default_r")]
        r: RationalValue,
        #[serde(default)]
        c: f64,
        #[serde(default)]
        c7: TimeProfile,
    },
    Convection,
}

fn default_r() -> RationalValue {
    RationalValue(rational(1, 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NemytskiiKindConfig {
    Power,
    Saturating,
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    #[serde(default = "one")]
    pub c1: f64,
    #[serde(default)]
    pub c2: TimeProfile,
    #[serde(default = "one")]
    pub c3: f64,
    #[serde(default)]
    pub c4: f64,
    #[serde(default)]
    pub q: f64,
    #[serde(default)]
    pub c5: TimeProfile,
}

fn one() -> f64 {
    1.0
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        ConstantsConfig {
            c1: 1.0,
            c2: TimeProfile::Zero,
            c3: 1.0,
            c4: 0.0,
            q: 0.0,
            c5: TimeProfile::Zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub horizon: f64,
    pub nsteps: u32,
    #[serde(default)]
    pub newton_tol: Option<f64>,
    #[serde(default)]
    pub newton_maxit: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub t_samples: Option<u32>,
    #[serde(default)]
    pub field_samples: Option<u32>,
    #[serde(default)]
    pub growth_samples: Option<u32>,
    #[serde(default)]
    pub pair_samples: Option<u32>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub ascent_starts: Option<u32>,
    #[serde(default)]
    pub ascent_iters: Option<u32>,
}

/// A fully validated run: the raw config (for digests and round trips), the
/// in-memory problem, checker settings, and parse-time admissibility
/// warnings.
#[derive(Debug)]
pub struct ParsedRun {
    pub raw: RunConfig,
    pub problem: ProblemConfig,
    pub checks: CheckSettings,
    pub warnings: Vec<String>,
}

const MAX_MODE_INDEX: usize = 1_000_000;
const MAX_NSTEPS: u32 = 10_000_000;

pub fn parse_config(path: impl AsRef<Path>) -> Result<ParsedRun> {
    let bytes = std::fs::read(path)?;
    parse_config_bytes(&bytes)
}

/// Strict parse of config JSON. Structural problems become schema errors
/// with a JSON pointer; range problems become value errors.
pub fn parse_config_bytes(bytes: &[u8]) -> Result<ParsedRun> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let raw: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let pointer = path_to_pointer(e.path());
        Error::Schema {
            pointer,
            message: e.inner().to_string(),
        }
    })?;
    validate(&raw)?;
    build(raw)
}

fn path_to_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for segment in path.iter() {
        match segment {
            Segment::Map { key } => {
                out.push('/');
                out.push_str(key);
            }
            Segment::Seq { index } => {
                out.push_str(&format!("/{index}"));
            }
            Segment::Enum { variant } => {
                out.push('/');
                out.push_str(variant);
            }
            Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

fn value_err(pointer: &str, msg: impl std::fmt::Display) -> Error {
    Error::Value(format!("{pointer}: {msg}"))
}

fn validate(raw: &RunConfig) -> Result<()> {
    match (raw.space.kind, raw.space.dim) {
        (SpaceKind::DirichletSine, 1 | 2) => {}
        (SpaceKind::TorusDivFree, 2) => {}
        (kind, dim) => {
            return Err(Error::Schema {
                pointer: "/space/dim".into(),
                message: format!("unsupported combination kind={kind:?}, dim={dim}"),
            })
        }
    }
    if !(raw.space.s.is_finite() && raw.space.s > 0.0) {
        return Err(value_err("/space/s", "smoothness index must be positive"));
    }
    if let Some(q) = raw.space.quad_order {
        if q > 4096 {
            return Err(value_err(
                "/space/quad_order",
                "exceeds the supported maximum 4096",
            ));
        }
    }

    let p = rational_to_f64(&raw.operator.p.0);
    if !(p.is_finite() && p > 1.0) {
        return Err(value_err("/operator/p", format!("must exceed 1, got {p}")));
    }
    if !(raw.operator.delta.is_finite() && raw.operator.delta >= 0.0) {
        return Err(value_err(
            "/operator/delta",
            "must be finite and nonnegative",
        ));
    }
    if raw.operator.parts.is_empty() {
        return Err(value_err("/operator/parts", "needs at least one part"));
    }
    let k = &raw.operator.constants;
    for (name, v) in [("c1", k.c1), ("c3", k.c3), ("c4", k.c4), ("q", k.q)] {
        if !v.is_finite() {
            return Err(value_err(
                &format!("/operator/constants/{name}"),
                "must be finite",
            ));
        }
    }
    if !(k.c1 > 0.0 && k.c3 > 0.0 && k.c4 >= 0.0 && k.q >= 0.0) {
        return Err(value_err(
            "/operator/constants",
            "need c1 > 0, c3 > 0, c4 >= 0, q >= 0",
        ));
    }
    for (name, prof) in [("c2", &k.c2), ("c5", &k.c5)] {
        if !prof.is_finite() || !prof.is_nonnegative() {
            return Err(value_err(
                &format!("/operator/constants/{name}"),
                "must be a finite nonnegative profile",
            ));
        }
    }

    for (i, part) in raw.operator.parts.iter().enumerate() {
        match part {
            PartConfig::Nemytskii { a, r, c, c7, .. } => {
                if raw.space.kind != SpaceKind::DirichletSine {
                    return Err(value_err(
                        &format!("/operator/parts/{i}"),
                        "superposition terms are defined on scalar spaces",
                    ));
                }
                if !(a.is_finite() && *a >= 0.0) || !c.is_finite() {
                    return Err(value_err(
                        &format!("/operator/parts/{i}"),
                        "non-finite parameters",
                    ));
                }
                if rational_to_f64(&r.0) < 1.0 {
                    return Err(value_err(
                        &format!("/operator/parts/{i}/r"),
                        "must be at least 1",
                    ));
                }
                if !c7.is_finite() || !c7.is_nonnegative() {
                    return Err(value_err(
                        &format!("/operator/parts/{i}/c7"),
                        "must be a finite nonnegative profile",
                    ));
                }
            }
            PartConfig::Convection => {
                if raw.space.kind != SpaceKind::TorusDivFree {
                    return Err(value_err(
                        &format!("/operator/parts/{i}"),
                        "convection needs the divergence-free space",
                    ));
                }
            }
            PartConfig::PLaplace => {}
        }
    }

    match &raw.rhs {
        RhsSpec::Mode { index, profile } => {
            if *index > MAX_MODE_INDEX {
                return Err(value_err("/rhs/index", "mode index too large"));
            }
            if !profile.is_finite() {
                return Err(value_err("/rhs/profile", "must be finite"));
            }
        }
        RhsSpec::Shape { profile } => {
            if raw.space.kind != SpaceKind::DirichletSine {
                return Err(value_err("/rhs", "the separable source shape is scalar"));
            }
            if !profile.is_finite() {
                return Err(value_err("/rhs/profile", "must be finite"));
            }
        }
        RhsSpec::Zero => {}
    }

    match &raw.initial {
        InitialSpec::Mode { index } if *index > MAX_MODE_INDEX => {
            return Err(value_err("/initial/index", "mode index too large"));
        }
        InitialSpec::Parabola => {
            if raw.space.kind != SpaceKind::DirichletSine || raw.space.dim != 1 {
                return Err(value_err(
                    "/initial",
                    "the parabola profile needs the unit interval",
                ));
            }
        }
        InitialSpec::TaylorGreen if raw.space.kind != SpaceKind::TorusDivFree => {
            return Err(value_err(
                "/initial",
                "the cellular vortex profile needs the torus",
            ));
        }
        _ => {}
    }

    if !(raw.time.horizon.is_finite() && raw.time.horizon > 0.0) {
        return Err(value_err("/time/horizon", "must be positive"));
    }
    if raw.time.nsteps > MAX_NSTEPS {
        return Err(value_err("/time/nsteps", "too many steps"));
    }
    if let Some(tol) = raw.time.newton_tol {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(value_err("/time/newton_tol", "must be positive"));
        }
    }
    if let Some(tolerance) = raw.check.tolerance {
        if !(tolerance.is_finite() && tolerance > 0.0) {
            return Err(value_err("/check/tolerance", "must be positive"));
        }
    }
    Ok(())
}

fn build(raw: RunConfig) -> Result<ParsedRun> {
    let mut warnings = Vec::new();
    let p_exact = raw.operator.p.0.clone();
    let horizon = raw.time.horizon;

    let mut parts = Vec::new();
    for part in &raw.operator.parts {
        match part {
            PartConfig::PLaplace => parts.push(OperatorPart::Principal),
            PartConfig::Convection => parts.push(OperatorPart::Convection),
            PartConfig::Nemytskii { kind, a, r, c, c7 } => {
                let kind = match kind {
                    NemytskiiKindConfig::Power => NemytskiiKind::Power,
                    NemytskiiKindConfig::Saturating => NemytskiiKind::Saturating,
                    NemytskiiKindConfig::Sum => NemytskiiKind::Sum,
                };
                let spec = NemytskiiSpec::new(kind, *a, r.0.clone(), *c, c7.clone(), horizon)?;
                // growth admissibility is advisory at parse time
                let report = exponent_report(raw.space.dim, &p_exact)?;
                if spec.r > report.r0 {
                    warnings.push(format!(
                        "superposition exponent r = {} exceeds the admissible ceiling r0 = {}",
                        format_rational(&spec.r),
                        format_rational(&report.r0),
                    ));
                }
                parts.push(OperatorPart::LowerOrder(spec));
            }
        }
    }

    let report = exponent_report(raw.space.dim, &p_exact)?;
    if !report.flags.scalar_admissible {
        warnings.push(format!(
            "p = {} is at or below the parabolic embedding threshold 2d/(d+2)",
            format_rational(&p_exact)
        ));
    }
    if parts
        .iter()
        .any(|pt| matches!(pt, OperatorPart::Convection))
        && !report.flags.fluid_admissible
    {
        warnings.push(format!(
            "p = {} is below 11/5; the convection growth bound has no declared exponent",
            format_rational(&p_exact)
        ));
    }

    let constants = StructuralConstants {
        c1: raw.operator.constants.c1,
        c2: raw.operator.constants.c2.clone(),
        c3: raw.operator.constants.c3,
        c4: raw.operator.constants.c4,
        q: raw.operator.constants.q,
        c5: raw.operator.constants.c5.clone(),
    };
    let family = OperatorFamily::new(p_exact, raw.operator.delta, parts, constants)?;

    let problem = ProblemConfig {
        space: SpaceSpec {
            kind: raw.space.kind,
            dim: raw.space.dim as usize,
            s: raw.space.s,
            quad_order: raw.space.quad_order.map(|q| q as usize),
        },
        family,
        rhs: raw.rhs.clone(),
        initial: raw.initial.clone(),
        horizon,
        nsteps: raw.time.nsteps as usize,
        newton_tol: raw.time.newton_tol.unwrap_or(1e-10),
        newton_maxit: raw.time.newton_maxit.unwrap_or(40) as usize,
    };
    problem.validate()?;

    let defaults = CheckSettings::default();
    let c = &raw.check;
    let checks = CheckSettings {
        seed: c.seed.unwrap_or(defaults.seed),
        horizon,
        t_samples: c
            .t_samples
            .map(|v| v as usize)
            .unwrap_or(defaults.t_samples),
        field_samples: c
            .field_samples
            .map(|v| v as usize)
            .unwrap_or(defaults.field_samples),
        growth_samples: c
            .growth_samples
            .map(|v| v as usize)
            .unwrap_or(defaults.growth_samples),
        pair_samples: c
            .pair_samples
            .map(|v| v as usize)
            .unwrap_or(defaults.pair_samples),
        tolerance: c.tolerance.unwrap_or(defaults.tolerance),
        ascent_starts: c
            .ascent_starts
            .map(|v| v as usize)
            .unwrap_or(defaults.ascent_starts),
        ascent_iters: c
            .ascent_iters
            .map(|v| v as usize)
            .unwrap_or(defaults.ascent_iters),
        ..defaults
    };

    Ok(ParsedRun {
        raw,
        problem,
        checks,
        warnings,
    })
}

/// SHA-256 of the canonical (parsed and re-serialized) config JSON.
pub fn config_digest(raw: &RunConfig) -> String {
    let canonical = serde_json::to_string(raw).expect("config structs always serialize");
    let hash = Sha256::digest(canonical.as_bytes());
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance record written next to run artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub seed: u64,
    pub tool_version: String,
    pub artifacts: Vec<String>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(digest: String, seed: u64) -> Self {
        RunManifest {
            config_digest: digest,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            artifacts: Vec::new(),
            timings_ms: BTreeMap::new(),
        }
    }
}

/// Built-in annotated example configs, also used as fuzz corpus seeds.
pub mod builtin {
    /// Linear diffusion of the first mode on the unit interval.
    pub const HEAT: &str = include_str!("../../../configs/heat.json");
    /// Cubic diffusion with a quartic superposition term.
    pub const SCALAR: &str = include_str!("../../../configs/scalar_plaplace.json");
    /// Degenerate diffusion with convection on the periodic torus.
    pub const FLUID: &str = include_str!("../../../configs/fluid_torus.json");

    pub fn all() -> [(&'static str, &'static str); 3] {
        [("heat", HEAT), ("scalar", SCALAR), ("fluid", FLUID)]
    }
}
