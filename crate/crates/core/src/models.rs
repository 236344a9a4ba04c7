//! Built-in models and the model-file loader.

use std::path::Path;

use serde::Deserialize;

use crate::canonical::{
    fdd_bernoulli, fdd_bernoulli_mixture, fdd_exchangeable, fdd_markov_pair, FddModel,
};
use crate::energy::{DependencyRadius, OnePointEnergyModel};
use crate::error::{Error, Result};
use crate::lattice::{Alphabet, Environment, Metric, Site, Symbol, Window};
use crate::potential::{ising_terms, FiniteRangePotential, PotentialTerm};

/// Nearest-neighbour Ising potential on `Z^d` with spins `{-1, +1}`:
/// `Φ_{t,s}(x) = -β x_t x_s` on neighbouring pairs and `Φ_t(x) = -h x_t`.
///
/// The potential doubles as its one-point energy model
/// `δ_t(x, u) = H_t(u) - H_t(x)`.
pub fn ising_model(dimension: usize, beta: f64, h: f64) -> Result<FiniteRangePotential> {
    if dimension == 0 {
        return Err(Error::ParamOutOfRange {
            name: "dimension",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    for (name, v) in [("beta", beta), ("h", h)] {
        if !v.is_finite() {
            return Err(Error::ParamOutOfRange {
                name,
                value: v,
                reason: "must be finite",
            });
        }
    }
    FiniteRangePotential::new(Alphabet::spins(), dimension, 1, ising_terms(dimension, beta, h))
}

/// Lattice area-interaction field on `{0, 1}`:
/// `δ_t(0, 1) = α + β · #(B(t,R) minus the balls B(s,R) around occupied s)`.
#[derive(Clone, Debug)]
pub struct WidomRowlinson {
    dimension: usize,
    radius: u32,
    alpha: f64,
    beta: f64,
    metric: Metric,
    alphabet: Alphabet,
    ball: Vec<Site>,
}

pub fn widom_rowlinson_onepoint(
    dimension: usize,
    radius: u32,
    alpha: f64,
    beta: f64,
    metric: Metric,
) -> Result<WidomRowlinson> {
    if dimension == 0 {
        return Err(Error::ParamOutOfRange {
            name: "dimension",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    if radius == 0 {
        return Err(Error::ParamOutOfRange {
            name: "R",
            value: 0.0,
            reason: "ball radius must be at least 1",
        });
    }
    for (name, v) in [("alpha", alpha), ("beta", beta)] {
        if !v.is_finite() {
            return Err(Error::ParamOutOfRange {
                name,
                value: v,
                reason: "must be finite",
            });
        }
    }
    let ball = Window::ball(&Site::origin(dimension), u64::from(radius), metric)
        .sites()
        .to_vec();
    Ok(WidomRowlinson {
        dimension,
        radius,
        alpha,
        beta,
        metric,
        alphabet: Alphabet::binary(),
        ball,
    })
}

impl WidomRowlinson {
    /// Points of `B(t, R)` not covered by a ball around an occupied boundary site.
    pub fn uncovered(&self, t: &Site, env: &dyn Environment) -> Result<usize> {
        let mut count = 0;
        for o in &self.ball {
            let p = t.translate(o);
            let mut covered = false;
            for o2 in &self.ball {
                let s = p.translate(o2);
                if &s != t && env.read(&s)? == 1 {
                    covered = true;
                    break;
                }
            }
            if !covered {
                count += 1;
            }
        }
        Ok(count)
    }
}

impl OnePointEnergyModel for WidomRowlinson {
    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }
    fn dimension(&self) -> usize {
        self.dimension
    }
    fn dependency_radius(&self) -> DependencyRadius {
        DependencyRadius::Finite(2 * self.radius)
    }
    fn evaluate(&self, t: &Site, x: Symbol, u: Symbol, env: &dyn Environment) -> Result<f64> {
        if x == u {
            return Ok(0.0);
        }
        let d01 = self.alpha + self.beta * self.uncovered(t, env)? as f64;
        Ok(if x == 0 { d01 } else { -d01 })
    }
    fn dependency_window(&self, t: &Site) -> Option<Window> {
        Some(Window::punctured_ball(t, 2 * u64::from(self.radius), self.metric))
    }
}

/// Translation-invariant one-point model given by a table of single-site
/// energies per neighbourhood pattern: `δ_t(x, u) = e(pattern, u) - e(pattern, x)`.
///
/// Nothing forces such a table to be a consistent field, which is what makes
/// it useful as a deliberately broken model.
#[derive(Clone, Debug)]
pub struct TabulatedOnePointModel {
    alphabet: Alphabet,
    dimension: usize,
    neighbours: Vec<Site>,
    energies: Vec<Vec<f64>>,
    radius: u32,
}

impl TabulatedOnePointModel {
    pub fn new(
        alphabet: Alphabet,
        dimension: usize,
        neighbours: Vec<Site>,
        energies: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let k = alphabet.size();
        let origin = Site::origin(dimension);
        for (i, s) in neighbours.iter().enumerate() {
            if s.dimension() != dimension {
                return Err(Error::validation(
                    format!("neighbours[{i}]"),
                    format!("expected {dimension} coordinates"),
                ));
            }
            if *s == origin || neighbours[..i].contains(s) {
                return Err(Error::validation(
                    format!("neighbours[{i}]"),
                    "offsets must be distinct and nonzero",
                ));
            }
        }
        let rows = crate::lattice::configuration_count(neighbours.len(), k)
            .ok_or_else(|| Error::validation("energies", "table too large"))?;
        if energies.len() as u64 != rows {
            return Err(Error::validation(
                "energies",
                format!("expected {rows} rows, got {}", energies.len()),
            ));
        }
        if let Some(i) = energies.iter().position(|r| r.len() != k || r.iter().any(|v| !v.is_finite())) {
            return Err(Error::validation(
                format!("energies[{i}]"),
                format!("expected {k} finite values"),
            ));
        }
        let radius = neighbours
            .iter()
            .map(|s| s.distance(&origin, Metric::Chebyshev))
            .max()
            .unwrap_or(0) as u32;
        Ok(TabulatedOnePointModel {
            alphabet,
            dimension,
            neighbours,
            energies,
            radius,
        })
    }
}

impl OnePointEnergyModel for TabulatedOnePointModel {
    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }
    fn dimension(&self) -> usize {
        self.dimension
    }
    fn dependency_radius(&self) -> DependencyRadius {
        DependencyRadius::Finite(self.radius)
    }
    fn evaluate(&self, t: &Site, x: Symbol, u: Symbol, env: &dyn Environment) -> Result<f64> {
        if x == u {
            return Ok(0.0);
        }
        let k = self.alphabet.size();
        let mut row = 0;
        for o in &self.neighbours {
            row = row * k + usize::from(env.read(&t.translate(o))?);
        }
        let e = &self.energies[row];
        Ok(e[usize::from(u)] - e[usize::from(x)])
    }
    fn dependency_window(&self, t: &Site) -> Option<Window> {
        Some(
            Window::new(self.dimension, self.neighbours.iter().map(|o| t.translate(o)))
                .expect("offsets validated distinct"),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Ising,
    WidomRowlinson,
    CustomPotential,
    CustomOnePoint,
    Fdd,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Ising => "ising",
            ModelKind::WidomRowlinson => "widom_rowlinson",
            ModelKind::CustomPotential => "custom_potential",
            ModelKind::CustomOnePoint => "custom_onepoint",
            ModelKind::Fdd => "fdd",
        }
    }
}

enum Built {
    Potential(FiniteRangePotential),
    OnePoint(Box<dyn OnePointEnergyModel>),
    Fdd(Box<dyn FddModel>),
}

/// A validated model file.
pub struct ModelSpec {
    pub kind: ModelKind,
    pub dimension: usize,
    pub alphabet: Alphabet,
    pub params: serde_json::Map<String, serde_json::Value>,
    built: Built,
}

impl std::fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelSpec")
            .field("kind", &self.kind)
            .field("dimension", &self.dimension)
            .field("alphabet", &self.alphabet)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl ModelSpec {
    /// The one-point energy model, for every kind except `fdd`.
    pub fn energy_model(&self) -> Option<&dyn OnePointEnergyModel> {
        match &self.built {
            Built::Potential(p) => Some(p),
            Built::OnePoint(m) => Some(m.as_ref()),
            Built::Fdd(_) => None,
        }
    }

    pub fn potential(&self) -> Option<&FiniteRangePotential> {
        match &self.built {
            Built::Potential(p) => Some(p),
            _ => None,
        }
    }

    pub fn fdd(&self) -> Option<&dyn FddModel> {
        match &self.built {
            Built::Fdd(f) => Some(f.as_ref()),
            _ => None,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kind: String,
    #[serde(default = "one")]
    dimension: usize,
    alphabet: Option<Vec<String>>,
    #[serde(default)]
    params: serde_json::Map<String, serde_json::Value>,
    range: Option<u32>,
    terms: Option<Vec<PotentialTerm>>,
    neighbours: Option<Vec<Site>>,
    energies: Option<Vec<Vec<f64>>>,
    metric: Option<String>,
}

fn one() -> usize {
    1
}

/// Reads a TOML (`.toml`) or JSON (any other extension) model file.
pub fn load_model(path: &Path) -> Result<ModelSpec> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{display}: {e}")))?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let raw: RawModel = if is_toml {
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: display.clone(),
            message: e.to_string().trim_end().to_string(),
        })?
    } else {
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: display.clone(),
            message: format!("line {} column {}: {e}", e.line(), e.column()),
        })?
    };
    build_model(raw)
}

/// Parses a model from TOML text.
pub fn model_from_toml(text: &str) -> Result<ModelSpec> {
    let raw: RawModel = toml::from_str(text).map_err(|e| Error::Parse {
        path: "<inline>".into(),
        message: e.to_string().trim_end().to_string(),
    })?;
    build_model(raw)
}

fn num(params: &serde_json::Map<String, serde_json::Value>, key: &str, default: Option<f64>) -> Result<f64> {
    match params.get(key) {
        Some(v) => v
            .as_f64()
            .ok_or_else(|| Error::validation(format!("params.{key}"), "expected a number")),
        None => default.ok_or_else(|| Error::validation(format!("params.{key}"), "missing")),
    }
}

fn string<'a>(params: &'a serde_json::Map<String, serde_json::Value>, key: &str) -> Result<Option<&'a str>> {
    match params.get(key) {
        Some(v) => v
            .as_str()
            .map(Some)
            .ok_or_else(|| Error::validation(format!("params.{key}"), "expected a string")),
        None => Ok(None),
    }
}

fn param_error(e: Error) -> Error {
    match e {
        Error::ParamOutOfRange { name, value, reason } => {
            Error::validation(format!("params.{name}"), format!("{value}: {reason}"))
        }
        Error::EqualParameters(p) => {
            Error::validation("params.p2", format!("must differ from p1 = {p}"))
        }
        other => other,
    }
}

fn build_model(raw: RawModel) -> Result<ModelSpec> {
    let params = raw.params;
    let dimension = raw.dimension;
    if dimension == 0 {
        return Err(Error::validation("dimension", "must be at least 1"));
    }
    let (kind, built) = match raw.kind.as_str() {
        "ising" => {
            let beta = num(&params, "beta", None)?;
            let h = num(&params, "h", Some(0.0))?;
            let p = ising_model(dimension, beta, h).map_err(param_error)?;
            (ModelKind::Ising, Built::Potential(p))
        }
        "widom_rowlinson" => {
            let r = num(&params, "R", None)?;
            if r.fract() != 0.0 || r < 0.0 || r > f64::from(u32::MAX) {
                return Err(Error::validation("params.R", "expected a nonnegative integer"));
            }
            let alpha = num(&params, "alpha", Some(0.0))?;
            let beta = num(&params, "beta", None)?;
            let metric = match string(&params, "metric")?.or(raw.metric.as_deref()) {
                None | Some("linf") => Metric::Chebyshev,
                Some("l1") => Metric::Manhattan,
                Some(other) => {
                    return Err(Error::validation(
                        "params.metric",
                        format!("expected \"linf\" or \"l1\", got {other:?}"),
                    ))
                }
            };
            let m = widom_rowlinson_onepoint(dimension, r as u32, alpha, beta, metric)
                .map_err(param_error)?;
            (ModelKind::WidomRowlinson, Built::OnePoint(Box::new(m)))
        }
        "custom_potential" => {
            let alphabet = alphabet_of(&raw.alphabet)?;
            let range = raw.range.ok_or_else(|| Error::validation("range", "missing"))?;
            let terms = raw.terms.unwrap_or_default();
            let p = FiniteRangePotential::new(alphabet, dimension, range, terms)?;
            (ModelKind::CustomPotential, Built::Potential(p))
        }
        "custom_onepoint" => {
            let alphabet = alphabet_of(&raw.alphabet)?;
            let neighbours = raw.neighbours.unwrap_or_default();
            let energies = raw
                .energies
                .ok_or_else(|| Error::validation("energies", "missing"))?;
            let m = TabulatedOnePointModel::new(alphabet, dimension, neighbours, energies)?;
            (ModelKind::CustomOnePoint, Built::OnePoint(Box::new(m)))
        }
        "fdd" => {
            let name = string(&params, "name")?
                .ok_or_else(|| Error::validation("params.name", "missing"))?;
            let f: Box<dyn FddModel> = match name {
                "bernoulli" => Box::new(fdd_bernoulli(num(&params, "p", None)?).map_err(param_error)?),
                "exchangeable" => Box::new(fdd_exchangeable()),
                "mixture" => Box::new(
                    fdd_bernoulli_mixture(
                        num(&params, "alpha", None)?,
                        num(&params, "p1", None)?,
                        num(&params, "p2", None)?,
                    )
                    .map_err(param_error)?,
                ),
                "markov_pair" => {
                    let plus = match string(&params, "sign")? {
                        None | Some("+") => true,
                        Some("-") => false,
                        Some(other) => {
                            return Err(Error::validation(
                                "params.sign",
                                format!("expected \"+\" or \"-\", got {other:?}"),
                            ))
                        }
                    };
                    let scale = num(&params, "scale", Some(1.0))?;
                    if dimension != 1 {
                        return Err(Error::validation("dimension", "markov_pair lives on the positive integers"));
                    }
                    Box::new(fdd_markov_pair(scale, plus).map_err(param_error)?)
                }
                other => {
                    return Err(Error::validation(
                        "params.name",
                        format!("unknown fdd model {other:?}"),
                    ))
                }
            };
            (ModelKind::Fdd, Built::Fdd(f))
        }
        other => {
            return Err(Error::validation(
                "kind",
                format!("unknown model kind {other:?}"),
            ))
        }
    };
    let alphabet = match &built {
        Built::Potential(p) => p.alphabet().clone(),
        Built::OnePoint(m) => m.alphabet().clone(),
        Built::Fdd(f) => f.alphabet().clone(),
    };
    if let (Some(declared), ModelKind::Ising | ModelKind::WidomRowlinson | ModelKind::Fdd) =
        (&raw.alphabet, kind)
    {
        if declared != alphabet.labels() {
            return Err(Error::validation(
                "alphabet",
                format!("{} models use the alphabet {:?}", kind.as_str(), alphabet.labels()),
            ));
        }
    }
    Ok(ModelSpec {
        kind,
        dimension,
        alphabet,
        params,
        built,
    })
}

fn alphabet_of(labels: &Option<Vec<String>>) -> Result<Alphabet> {
    let labels = labels
        .clone()
        .ok_or_else(|| Error::validation("alphabet", "missing"))?;
    Alphabet::new(labels)
}
