//! Finite-dimensional distribution models and increasing-volume traces of
//! `ln P_{t∪Λ}(x x̄_Λ) / P_{t∪Λ}(u x̄_Λ)`.
//!
//! A trace either settles (the field has a canonical one-point energy at that
//! boundary), swings between large values of both signs, or runs off to
//! infinity. [`diagnose`] reads a finite trace into one of those verdicts.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::lattice::{
    enumerate_configurations, Alphabet, Configuration, Metric, Site, Symbol, Window,
};
use crate::report::{ConsistencyReport, ViolationTracker};
use crate::specification::{log_sum_exp, ProbabilityTable};

/// A random field given by its finite-dimensional distributions `P_V`.
pub trait FddModel: Send + Sync {
    fn name(&self) -> &str;

    fn alphabet(&self) -> &Alphabet;

    /// `ln P_V(x)` with `V` the window of `x`.
    fn ln_prob(&self, x: &Configuration) -> Result<f64>;

    fn prob(&self, x: &Configuration) -> Result<f64> {
        Ok(self.ln_prob(x)?.exp())
    }

    /// `ln P_{t∪Λ}(x x̄_Λ) / P_{t∪Λ}(u x̄_Λ)` with `Λ` the window of `boundary`.
    fn ln_ratio(&self, t: &Site, x: Symbol, u: Symbol, boundary: &Configuration) -> Result<f64> {
        if x == u {
            return Ok(0.0);
        }
        let with_x = Configuration::single(t.clone(), x).concat(boundary)?;
        let with_u = Configuration::single(t.clone(), u).concat(boundary)?;
        Ok(self.ln_prob(&with_x)? - self.ln_prob(&with_u)?)
    }

    fn params(&self) -> serde_json::Value;
}

fn unit_interval(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(Error::ParamOutOfRange {
            name,
            value,
            reason: "must lie strictly between 0 and 1",
        })
    }
}

fn require_binary(a: &Alphabet, x: &Configuration) -> Result<usize> {
    if let Some(v) = x.values().iter().find(|v| usize::from(**v) >= a.size()) {
        return Err(Error::UnknownSymbol(v.to_string()));
    }
    Ok(x.values().iter().filter(|v| **v == 1).count())
}

/// Independent sites, each 1 with probability `p`.
#[derive(Clone, Debug)]
pub struct Bernoulli {
    p: f64,
    alphabet: Alphabet,
}

pub fn fdd_bernoulli(p: f64) -> Result<Bernoulli> {
    Ok(Bernoulli {
        p: unit_interval("p", p)?,
        alphabet: Alphabet::binary(),
    })
}

impl FddModel for Bernoulli {
    fn name(&self) -> &str {
        "bernoulli"
    }
    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }
    fn ln_prob(&self, x: &Configuration) -> Result<f64> {
        let ones = require_binary(&self.alphabet, x)? as f64;
        let zeros = x.values().len() as f64 - ones;
        Ok(ones * self.p.ln() + zeros * (1.0 - self.p).ln())
    }
    fn ln_ratio(&self, _t: &Site, x: Symbol, u: Symbol, _b: &Configuration) -> Result<f64> {
        let l = |s: Symbol| if s == 1 { self.p.ln() } else { (1.0 - self.p).ln() };
        Ok(if x == u { 0.0 } else { l(x) - l(u) })
    }
    fn params(&self) -> serde_json::Value {
        serde_json::json!({ "p": self.p })
    }
}

/// `P_V(x) = 1 / ((|V| + 1) C(|V|, |x|))`: the number of ones is uniform on
/// `0..=|V|` and given the count all placements are equally likely.
#[derive(Clone, Debug)]
pub struct Exchangeable {
    alphabet: Alphabet,
}

pub fn fdd_exchangeable() -> Exchangeable {
    Exchangeable {
        alphabet: Alphabet::binary(),
    }
}

impl FddModel for Exchangeable {
    fn name(&self) -> &str {
        "exchangeable"
    }
    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }
    fn ln_prob(&self, x: &Configuration) -> Result<f64> {
        let ones = require_binary(&self.alphabet, x)? as u64;
        let n = x.values().len() as u64;
        Ok(-((n + 1) as f64).ln() - ln_binomial(n, ones))
    }
    /// `ln (|x̄_Λ| + 1) / (|Λ| - |x̄_Λ| + 1)` for `x = 1, u = 0`.
    fn ln_ratio(&self, _t: &Site, x: Symbol, u: Symbol, b: &Configuration) -> Result<f64> {
        if x == u {
            return Ok(0.0);
        }
        let m = require_binary(&self.alphabet, b)? as f64;
        let n = b.values().len() as f64;
        let r = ((m + 1.0) / (n - m + 1.0)).ln();
        Ok(if x == 1 { r } else { -r })
    }
    fn params(&self) -> serde_json::Value {
        serde_json::json!({})
    }
}

/// `α P^{(p1)} + (1 - α) P^{(p2)}`.
#[derive(Clone, Debug)]
pub struct BernoulliMixture {
    alpha: f64,
    p1: f64,
    p2: f64,
    alphabet: Alphabet,
}

pub fn fdd_bernoulli_mixture(alpha: f64, p1: f64, p2: f64) -> Result<BernoulliMixture> {
    let alpha = unit_interval("alpha", alpha)?;
    let p1 = unit_interval("p1", p1)?;
    let p2 = unit_interval("p2", p2)?;
    if p1 == p2 {
        return Err(Error::EqualParameters(p1));
    }
    Ok(BernoulliMixture {
        alpha,
        p1,
        p2,
        alphabet: Alphabet::binary(),
    })
}

impl BernoulliMixture {
    /// `|Λ| f_Λ = m ln(p2/p1) + (n - m) ln(p̄2/p̄1)` for a boundary with `m`
    /// ones among `n` sites.
    pub fn log_likelihood_ratio(&self, n: usize, m: usize) -> f64 {
        m as f64 * (self.p2 / self.p1).ln()
            + (n - m) as f64 * ((1.0 - self.p2) / (1.0 - self.p1)).ln()
    }
}

impl FddModel for BernoulliMixture {
    fn name(&self) -> &str {
        "mixture"
    }
    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }
    fn ln_prob(&self, x: &Configuration) -> Result<f64> {
        let m = require_binary(&self.alphabet, x)? as f64;
        let z = x.values().len() as f64 - m;
        let c1 = self.alpha.ln() + m * self.p1.ln() + z * (1.0 - self.p1).ln();
        let c2 = (1.0 - self.alpha).ln() + m * self.p2.ln() + z * (1.0 - self.p2).ln();
        Ok(log_sum_exp(&[c1, c2]))
    }
    /// `ln (α p1 + ᾱ p2 e^L) / (α p̄1 + ᾱ p̄2 e^L)` with `L` the
    /// [log-likelihood ratio](Self::log_likelihood_ratio) of the boundary.
    fn ln_ratio(&self, _t: &Site, x: Symbol, u: Symbol, b: &Configuration) -> Result<f64> {
        if x == u {
            return Ok(0.0);
        }
        let m = require_binary(&self.alphabet, b)?;
        let l = self.log_likelihood_ratio(b.values().len(), m);
        let (a, abar) = (self.alpha.ln(), (1.0 - self.alpha).ln());
        let num = log_sum_exp(&[a + self.p1.ln(), abar + self.p2.ln() + l]);
        let den = log_sum_exp(&[a + (1.0 - self.p1).ln(), abar + (1.0 - self.p2).ln() + l]);
        Ok(if x == 1 { num - den } else { den - num })
    }
    fn params(&self) -> serde_json::Value {
        serde_json::json!({ "alpha": self.alpha, "p1": self.p1, "p2": self.p2 })
    }
}

/// The pair of Markov chains on `{1, 2, ...}` with spins `±1`, couplings
/// `c_j = exp(-scale 2^{-j})` and terminal factor `(1 ± x_n k_n) / 2`,
/// `k_n = Π_{j≥n} c_j = exp(-scale 2^{1-n})`.
///
/// Marginals are available on every finite subset of the positive integers:
/// summing out sites multiplies adjacent couplings, so the pair factor
/// between consecutive sites `a < b` of the window is `(1 + C(a,b) x_a x_b) / 2`
/// with `C(a,b) = Π_{a≤j<b} c_j`.
#[derive(Clone, Debug)]
pub struct MarkovPair {
    scale: f64,
    plus: bool,
    alphabet: Alphabet,
}

pub fn fdd_markov_pair(scale: f64, plus: bool) -> Result<MarkovPair> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::ParamOutOfRange {
            name: "scale",
            value: scale,
            reason: "must be positive and finite so that 0 < c_j < 1",
        });
    }
    Ok(MarkovPair {
        scale,
        plus,
        alphabet: Alphabet::spins(),
    })
}

impl MarkovPair {
    pub fn c(&self, j: i64) -> f64 {
        (-self.scale * 2f64.powi(-(j as i32))).exp()
    }

    pub fn k(&self, n: i64) -> f64 {
        (-self.scale * 2f64.powi(1 - n as i32)).exp()
    }

    /// `Π_{a≤j<b} c_j`.
    pub fn coupling(&self, a: i64, b: i64) -> f64 {
        (-self.scale * (2f64.powi(1 - a as i32) - 2f64.powi(1 - b as i32))).exp()
    }

    fn position(site: &Site) -> Result<i64> {
        if site.dimension() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                actual: site.dimension(),
            });
        }
        let p = site.coords()[0];
        if p < 1 {
            return Err(Error::NotInitialSegment(site.clone()));
        }
        Ok(p)
    }

    fn spin(&self, s: Symbol) -> f64 {
        self.alphabet.value(s)
    }

    fn pair_term(&self, a: i64, xa: f64, b: i64, xb: f64) -> f64 {
        ((1.0 + self.coupling(a, b) * xa * xb) / 2.0).ln()
    }

    fn end_term(&self, n: i64, xn: f64) -> f64 {
        let sign = if self.plus { 1.0 } else { -1.0 };
        ((1.0 + sign * xn * self.k(n)) / 2.0).ln()
    }
}

impl FddModel for MarkovPair {
    fn name(&self) -> &str {
        "markov_pair"
    }
    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }
    fn ln_prob(&self, x: &Configuration) -> Result<f64> {
        let sites = x.window().sites();
        let pos = sites.iter().map(Self::position).collect::<Result<Vec<_>>>()?;
        let spins: Vec<f64> = x.values().iter().map(|v| self.spin(*v)).collect();
        let Some(last) = pos.len().checked_sub(1) else {
            return Ok(0.0);
        };
        let mut total = self.end_term(pos[last], spins[last]);
        for i in 0..last {
            total += self.pair_term(pos[i], spins[i], pos[i + 1], spins[i + 1]);
        }
        Ok(total)
    }
    /// Only the factors containing `t` are evaluated; the rest cancel exactly.
    fn ln_ratio(&self, t: &Site, x: Symbol, u: Symbol, b: &Configuration) -> Result<f64> {
        if x == u {
            return Ok(0.0);
        }
        let tp = Self::position(t)?;
        let sites = b.window().sites();
        for s in sites {
            Self::position(s)?;
        }
        if b.get(t).is_some() {
            return Err(Error::OverlappingWindows(t.clone()));
        }
        let split = sites.partition_point(|s| s < t);
        let before = split.checked_sub(1).map(|i| (sites[i].coords()[0], self.spin(b.values()[i])));
        let after = sites.get(split).map(|s| (s.coords()[0], self.spin(b.values()[split])));
        let terms = |xt: f64| {
            let mut v = 0.0;
            if let Some((a, xa)) = before {
                v += self.pair_term(a, xa, tp, xt);
            }
            v += match after {
                Some((c, xc)) => self.pair_term(tp, xt, c, xc),
                None => self.end_term(tp, xt),
            };
            v
        };
        Ok(terms(self.spin(x)) - terms(self.spin(u)))
    }
    fn params(&self) -> serde_json::Value {
        serde_json::json!({ "scale": self.scale, "sign": if self.plus { "+" } else { "-" } })
    }
}

/// Marginals of one finite-volume distribution on a host window; windows
/// must lie inside the host.
#[derive(Clone, Debug)]
pub struct GibbsMarginals {
    host: ProbabilityTable,
}

impl GibbsMarginals {
    pub fn new(host: ProbabilityTable) -> Self {
        GibbsMarginals { host }
    }
}

impl FddModel for GibbsMarginals {
    fn name(&self) -> &str {
        "gibbs_marginals"
    }
    fn alphabet(&self) -> &Alphabet {
        self.host.alphabet()
    }
    fn ln_prob(&self, x: &Configuration) -> Result<f64> {
        let host = self.host.window();
        let k = self.host.alphabet().size();
        let positions = x
            .window()
            .sites()
            .iter()
            .map(|s| host.position(s).ok_or_else(|| Error::NotASubwindow(s.clone())))
            .collect::<Result<Vec<_>>>()?;
        let n = host.len();
        let mut total = 0.0;
        for (idx, p) in self.host.probs().iter().enumerate() {
            let matches = positions.iter().zip(x.values()).all(|(&pos, &v)| {
                (idx / k.pow((n - 1 - pos) as u32)) % k == usize::from(v)
            });
            if matches {
                total += p;
            }
        }
        Ok(total.ln())
    }
    fn params(&self) -> serde_json::Value {
        serde_json::json!({ "host": self.host.window().to_coordinate_lists() })
    }
}

/// Supplies boundary values `x̄_s` at every site.
pub trait BoundaryGenerator: Send + Sync {
    fn value(&self, s: &Site) -> Symbol;
}

impl<F: Fn(&Site) -> Symbol + Send + Sync> BoundaryGenerator for F {
    fn value(&self, s: &Site) -> Symbol {
        self(s)
    }
}

/// Every site carries the same symbol.
#[derive(Clone, Copy, Debug)]
pub struct ConstantBoundary(pub Symbol);

impl BoundaryGenerator for ConstantBoundary {
    fn value(&self, _s: &Site) -> Symbol {
        self.0
    }
}

/// Symbol 1 where the coordinate sum is a multiple of `period`, 0 elsewhere:
/// a boundary of density `1/period`.
#[derive(Clone, Copy, Debug)]
pub struct PeriodicBoundary {
    pub period: i64,
}

impl BoundaryGenerator for PeriodicBoundary {
    fn value(&self, s: &Site) -> Symbol {
        Symbol::from(s.coords().iter().sum::<i64>().rem_euclid(self.period) == 0)
    }
}

/// Shells around `center` grouped into blocks of `base^0, base^1, ...`
/// consecutive Chebyshev radii, alternating 1s and 0s starting with 1s.
#[derive(Clone, Debug)]
pub struct BlockBoundary {
    pub center: Site,
    pub base: u64,
}

impl BlockBoundary {
    /// Last radius of each block, `Σ_{j≤m} base^j`, up to `limit`.
    pub fn block_ends(&self, limit: u64) -> Vec<u64> {
        let mut out = Vec::new();
        let (mut len, mut end) = (1u64, 0u64);
        while end + len <= limit {
            end += len;
            out.push(end);
            len = len.saturating_mul(self.base.max(1));
        }
        out
    }
}

impl BoundaryGenerator for BlockBoundary {
    fn value(&self, s: &Site) -> Symbol {
        let r = s.distance(&self.center, Metric::Chebyshev);
        if r == 0 {
            return 1;
        }
        let (mut len, mut end, mut block) = (1u64, 0u64, 0u32);
        loop {
            end += len;
            if r <= end {
                return Symbol::from(block % 2 == 0);
            }
            len = len.saturating_mul(self.base.max(1));
            block += 1;
        }
    }
}

/// Increasing volumes `Λ_n` (the site `t` is removed from each).
#[derive(Clone, Debug)]
pub enum Schedule {
    /// Balls of the given radii around `t`.
    Balls { radii: Vec<u64>, metric: Metric },
    /// `{1, ..., n}` for each length.
    InitialSegments { lengths: Vec<i64> },
    Explicit(Vec<Window>),
}

impl Schedule {
    fn volumes(&self, t: &Site) -> Vec<Window> {
        let drop_t = |w: Window| w.filter(|s| s != t);
        match self {
            Schedule::Balls { radii, metric } => radii
                .iter()
                .map(|r| drop_t(Window::ball(t, *r, *metric)))
                .collect(),
            Schedule::InitialSegments { lengths } => lengths
                .iter()
                .map(|n| drop_t(Window::interval(1, *n)))
                .collect(),
            Schedule::Explicit(ws) => ws.iter().cloned().map(drop_t).collect(),
        }
    }
}

/// `|Σ_z P_V(x z) - P_{V∖s}(x)|` over every `s ∈ V` and every `x`, in
/// probability units.
pub fn check_kolmogorov_consistency(
    f: &dyn FddModel,
    window: &Window,
    tol: f64,
) -> Result<ConsistencyReport> {
    let a = f.alphabet();
    let mut tracker = ViolationTracker::new(tol);
    for s in window.sites() {
        let rest = window.filter(|r| r != s);
        for x in enumerate_configurations(&rest, a)? {
            let mut sum = 0.0;
            for z in a.symbols() {
                sum += f.prob(&x.concat(&Configuration::single(s.clone(), z))?)?;
            }
            let p = if rest.is_empty() { 1.0 } else { f.prob(&x)? };
            tracker.observe(sum - p, || {
                vec![
                    ("s", s.to_string()),
                    ("x", x.label_string(a)),
                ]
            });
        }
    }
    Ok(tracker.finish())
}

/// Reading of a trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Verdict {
    Converged { limit: f64, stable_from: usize },
    Oscillating { min: f64, max: f64 },
    Diverging { direction: i8 },
    Undetermined,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnoseOptions {
    pub stability_window: usize,
    pub tol: f64,
    pub blowup: f64,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        DiagnoseOptions {
            stability_window: 5,
            tol: 1e-6,
            blowup: 50.0,
        }
    }
}

/// Classifies a trace.
///
/// - Converged: the last `stability_window` values lie within `tol` of their
///   mean; `stable_from` is the first index after which every value does.
/// - Diverging: the last `stability_window` values are strictly monotone and
///   the final value is beyond `±blowup` in the direction of motion.
/// - Oscillating: the trace exceeds both `+blowup` and `-blowup`.
pub fn diagnose(values: &[f64], options: &DiagnoseOptions) -> Result<Verdict> {
    let w = options.stability_window.max(1);
    if values.len() < w {
        return Err(Error::TooFewValues {
            needed: w,
            got: values.len(),
        });
    }
    let tail = &values[values.len() - w..];
    let mean = tail.iter().sum::<f64>() / w as f64;
    if tail.iter().all(|v| (v - mean).abs() <= options.tol) {
        let stable_from = values
            .iter()
            .rposition(|v| (v - mean).abs() > options.tol)
            .map_or(0, |i| i + 1);
        return Ok(Verdict::Converged {
            limit: mean,
            stable_from,
        });
    }
    let last = values[values.len() - 1];
    if tail.windows(2).all(|p| p[1] > p[0]) && last > options.blowup {
        return Ok(Verdict::Diverging { direction: 1 });
    }
    if tail.windows(2).all(|p| p[1] < p[0]) && last < -options.blowup {
        return Ok(Verdict::Diverging { direction: -1 });
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if max > options.blowup && min < -options.blowup {
        return Ok(Verdict::Oscillating { min, max });
    }
    Ok(Verdict::Undetermined)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceTrace {
    /// `|Λ_n|` for each volume.
    pub sizes: Vec<usize>,
    pub values: Vec<f64>,
    pub verdict: Verdict,
}

/// `ln P_{t∪Λ_n}(x x̄_{Λ_n}) / P_{t∪Λ_n}(u x̄_{Λ_n})` along a schedule.
pub fn canonical_delta_trace(
    f: &dyn FddModel,
    t: &Site,
    x: Symbol,
    u: Symbol,
    xbar: &dyn BoundaryGenerator,
    schedule: &Schedule,
    options: &DiagnoseOptions,
) -> Result<ConvergenceTrace> {
    let volumes = schedule.volumes(t);
    if volumes.windows(2).any(|p| p[1].len() <= p[0].len()) {
        return Err(Error::validation("schedule", "volumes must strictly increase"));
    }
    let mut sizes = Vec::with_capacity(volumes.len());
    let mut values = Vec::with_capacity(volumes.len());
    for lambda in volumes {
        sizes.push(lambda.len());
        let b = Configuration::from_fn(lambda, |s| xbar.value(s));
        values.push(f.ln_ratio(t, x, u, &b)?);
    }
    let verdict = match diagnose(&values, options) {
        Ok(v) => v,
        Err(Error::TooFewValues { .. }) => Verdict::Undetermined,
        Err(e) => return Err(e),
    };
    Ok(ConvergenceTrace {
        sizes,
        values,
        verdict,
    })
}
