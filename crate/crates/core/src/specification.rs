//! Probability kernels in Gibbs form, Dobrushin-type consistency checks and
//! reconstruction of finite-volume kernels from one-point kernels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::energy::{check_cocycle, check_onepoint_consistency, OnePointEnergyModel, TransitionEnergyTable, DependencyRadius};
use crate::error::{Error, Result};
use crate::lattice::{
    enumerate_configurations, Alphabet, BoundaryCondition, Configuration, Environment, Overlay,
    Site, Symbol, Window,
};
use crate::report::{ConsistencyReport, ViolationTracker};

/// Probabilities below this are treated as zero.
pub const POSITIVITY_FLOOR: f64 = 1e-300;
/// Allowed deviation of a table's total mass from 1.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// `ln Σ exp(w_i)`.
pub fn log_sum_exp(w: &[f64]) -> f64 {
    let m = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || !m.is_finite() {
        return m;
    }
    m + w.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// A strictly positive distribution on `X^V`, indexed like
/// [`enumerate_configurations`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityTable {
    window: Window,
    alphabet: Alphabet,
    probs: Vec<f64>,
}

impl ProbabilityTable {
    pub fn new(window: Window, alphabet: Alphabet, probs: Vec<f64>) -> Result<Self> {
        let n = crate::lattice::check_budget(window.len(), alphabet.size(), u64::MAX)?;
        if probs.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: probs.len(),
            });
        }
        for (i, p) in probs.iter().enumerate() {
            if p.is_nan() || *p < POSITIVITY_FLOOR {
                return Err(Error::NotStrictlyPositive {
                    at: Configuration::from_index(window.clone(), alphabet.size(), i)
                        .label_string(&alphabet),
                    value: *p,
                });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(ProbabilityTable {
            window,
            alphabet,
            probs,
        })
    }

    /// Normalizes `exp(w)` by log-sum-exp.
    pub fn from_log_weights(window: Window, alphabet: Alphabet, w: &[f64]) -> Result<Self> {
        let z = log_sum_exp(w);
        let probs = w.iter().map(|v| (v - z).exp()).collect();
        Self::new(window, alphabet, probs)
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, x: &Configuration) -> f64 {
        self.probs[x.index(self.alphabet.size())]
    }

    /// Marginal on a subwindow, by summation.
    pub fn marginal(&self, sub: &Window) -> Result<ProbabilityTable> {
        let k = self.alphabet.size();
        let n = crate::lattice::check_budget(sub.len(), k, u64::MAX)?;
        let mut out = vec![0.0; n];
        for (i, p) in self.probs.iter().enumerate() {
            let c = Configuration::from_index(self.window.clone(), k, i);
            out[c.restrict(sub)?.index(k)] += p;
        }
        let sum: f64 = out.iter().sum();
        // Summation reorders rounding; renormalize so the result validates.
        for v in &mut out {
            *v /= sum;
        }
        ProbabilityTable::new(sub.clone(), self.alphabet.clone(), out)
    }

    /// `½ Σ |p - q|`.
    pub fn total_variation(&self, other: &ProbabilityTable) -> Result<f64> {
        if self.window != other.window || self.alphabet != other.alphabet {
            return Err(Error::AlphabetMismatch(
                "tables live on different windows or alphabets".into(),
            ));
        }
        Ok(0.5
            * self
                .probs
                .iter()
                .zip(&other.probs)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }

    pub fn to_json(&self) -> ProbabilityTableJson {
        let k = self.alphabet.size();
        ProbabilityTableJson {
            window: self.window.to_coordinate_lists(),
            probs: self
                .probs
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    (
                        Configuration::from_index(self.window.clone(), k, i)
                            .label_string(&self.alphabet),
                        *p,
                    )
                })
                .collect(),
        }
    }
}

/// External JSON form of a [`ProbabilityTable`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTableJson {
    pub window: Vec<Vec<i64>>,
    pub probs: BTreeMap<String, f64>,
}

/// `P(x) = exp δ(x, anchor) / Σ_z exp δ(z, anchor)`.
///
/// The table is checked for the cocycle law first (relative tolerance 1e-9)
/// since otherwise the result would depend on the anchor.
pub fn gibbs_distribution(
    delta: &TransitionEnergyTable,
    anchor: &Configuration,
) -> Result<ProbabilityTable> {
    let d = delta.dense()?;
    let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let report = check_cocycle(delta, 1e-9 * (1.0 + scale))?;
    if !report.passed {
        return Err(Error::CocycleViolation(report.worst_violation));
    }
    if anchor.window() != delta.window() {
        return Err(Error::validation("anchor", "not on the table's window"));
    }
    let n = delta.states();
    let a = anchor.index(delta.alphabet().size());
    let w: Vec<f64> = (0..n).map(|x| d[x * n + a]).collect();
    ProbabilityTable::from_log_weights(delta.window().clone(), delta.alphabet().clone(), &w)
}

/// Single-site kernel `q_t^{x̄}` as a probability vector over the alphabet.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OnePointKernel {
    pub site: Site,
    pub probs: Vec<f64>,
}

impl OnePointKernel {
    pub fn new(site: Site, probs: Vec<f64>) -> Result<Self> {
        for (i, p) in probs.iter().enumerate() {
            if p.is_nan() || *p < POSITIVITY_FLOOR {
                return Err(Error::NotStrictlyPositive {
                    at: format!("symbol {i} at {site}"),
                    value: *p,
                });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(OnePointKernel { site, probs })
    }

    pub fn prob(&self, x: Symbol) -> f64 {
        self.probs[usize::from(x)]
    }
}

/// Log-probabilities of the single-site kernel, written into `out`.
pub(crate) fn kernel_log_probs(
    m: &dyn OnePointEnergyModel,
    t: &Site,
    env: &dyn Environment,
    out: &mut Vec<f64>,
) -> Result<()> {
    out.clear();
    for z in m.alphabet().symbols() {
        out.push(if z == 0 { 0.0 } else { m.evaluate(t, z, 0, env)? });
    }
    let lz = log_sum_exp(out);
    for v in out.iter_mut() {
        *v -= lz;
    }
    Ok(())
}

/// `q_t^{x̄}(x) ∝ exp δ_t^{x̄}(x, u)` with reference `u` the first symbol.
pub fn onepoint_kernel(
    m: &dyn OnePointEnergyModel,
    t: &Site,
    env: &dyn Environment,
) -> Result<OnePointKernel> {
    let mut lp = Vec::new();
    kernel_log_probs(m, t, env, &mut lp)?;
    let probs: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
    // exp of normalized logs sums to 1 up to rounding; renormalize exactly.
    let sum: f64 = probs.iter().sum();
    OnePointKernel::new(t.clone(), probs.into_iter().map(|p| p / sum).collect())
}

/// A family of single-site kernels `(t, x̄) ↦ q_t^{x̄}`.
pub trait OnePointSpecification: Send + Sync {
    fn alphabet(&self) -> &Alphabet;
    fn kernel(&self, t: &Site, env: &dyn Environment) -> Result<OnePointKernel>;
}

/// Kernels in Gibbs form of a one-point energy model.
pub struct EnergyKernels<M>(pub M);

impl<M: OnePointEnergyModel> OnePointSpecification for EnergyKernels<M> {
    fn alphabet(&self) -> &Alphabet {
        self.0.alphabet()
    }
    fn kernel(&self, t: &Site, env: &dyn Environment) -> Result<OnePointKernel> {
        onepoint_kernel(&self.0, t, env)
    }
}

/// The one-point energy `δ_t^{x̄}(x, u) = ln q_t^{x̄}(x) / q_t^{x̄}(u)` of a kernel family.
pub struct KernelEnergyModel<K> {
    pub kernels: K,
    pub dimension: usize,
    pub radius: DependencyRadius,
}

impl<K: OnePointSpecification> OnePointEnergyModel for KernelEnergyModel<K> {
    fn alphabet(&self) -> &Alphabet {
        self.kernels.alphabet()
    }
    fn dimension(&self) -> usize {
        self.dimension
    }
    fn dependency_radius(&self) -> DependencyRadius {
        self.radius
    }
    fn evaluate(&self, t: &Site, x: Symbol, u: Symbol, env: &dyn Environment) -> Result<f64> {
        if x == u {
            return Ok(0.0);
        }
        let q = self.kernels.kernel(t, env)?;
        Ok(q.prob(x).ln() - q.prob(u).ln())
    }
}

/// Options for [`reconstruct_spec`].
#[derive(Clone, Debug)]
pub struct ReconstructOptions {
    /// Run the exchange-law check on every pair of sites first.
    pub precheck: bool,
    /// Visiting order, a permutation of `0..|V|`; canonical if `None`.
    pub order: Option<Vec<usize>>,
    /// Reference configuration `u`; all first symbol if `None`.
    pub reference: Option<Configuration>,
    /// Tolerance of the pre-check.
    pub tol: f64,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        ReconstructOptions {
            precheck: true,
            order: None,
            reference: None,
            tol: 1e-9,
        }
    }
}

/// `q_V^{x̄}` from one-point kernels, by the product
/// `q_V(x)/q_V(u) = Π_i q_{t_i}(x_i) / q_{t_i}(u_i)` where the kernel at `t_i`
/// sees `u` on earlier sites and `x` on later ones.
///
/// `boundary` must have interior `V`.
pub fn reconstruct_spec(
    m: &dyn OnePointEnergyModel,
    window: &Window,
    boundary: &BoundaryCondition,
    options: &ReconstructOptions,
) -> Result<ProbabilityTable> {
    if boundary.interior() != window {
        return Err(Error::validation("boundary", "interior of the boundary must equal V"));
    }
    let alphabet = m.alphabet();
    let n = window.len();
    let order: Vec<usize> = match &options.order {
        Some(o) => {
            let mut sorted = o.clone();
            sorted.sort_unstable();
            if sorted != (0..n).collect::<Vec<_>>() {
                return Err(Error::validation("order", "must be a permutation of the window's sites"));
            }
            o.clone()
        }
        None => (0..n).collect(),
    };
    let reference = match &options.reference {
        Some(r) if r.window() != window => {
            return Err(Error::validation("reference", "not on the window"))
        }
        Some(r) => r.clone(),
        None => Configuration::constant(window.clone(), 0),
    };
    if options.precheck {
        precheck_pairs(m, window, boundary, options.tol)?;
    }

    let mut lp = Vec::with_capacity(alphabet.size());
    let mut logw = Vec::new();
    for x in enumerate_configurations(window, alphabet)? {
        let mut working = x.clone();
        let mut w = 0.0;
        for &i in &order {
            let (xi, ui) = (x.values()[i], reference.values()[i]);
            if xi == ui {
                continue;
            }
            let t = &window.sites()[i];
            let env = Overlay {
                base: boundary,
                config: &working,
                hole: Some(t),
            };
            kernel_log_probs(m, t, &env, &mut lp)?;
            w += lp[usize::from(xi)] - lp[usize::from(ui)];
            working.set_at(i, ui);
        }
        logw.push(w);
    }
    ProbabilityTable::from_log_weights(window.clone(), alphabet.clone(), &logw)
}

fn precheck_pairs(
    m: &dyn OnePointEnergyModel,
    window: &Window,
    boundary: &BoundaryCondition,
    tol: f64,
) -> Result<()> {
    let sites = window.sites();
    for (a, t) in sites.iter().enumerate() {
        for s in &sites[a + 1..] {
            let pair = Window::new(window.dimension(), [t.clone(), s.clone()])?;
            let rest = window.difference(&pair);
            for z in enumerate_configurations(&rest, m.alphabet())? {
                let b = boundary.extend(&z)?;
                let r = check_onepoint_consistency(m, t, s, &b, tol)?;
                if !r.passed {
                    return Err(Error::InconsistentField {
                        t: t.clone(),
                        s: s.clone(),
                        violation: r.worst_violation,
                    });
                }
            }
        }
    }
    Ok(())
}

/// A family of finite-volume kernels `(V, x̄) ↦ q_V^{x̄}`.
///
/// The boundary passed to [`distribution`](Self::distribution) has interior exactly `V`.
pub trait SpecificationFamily {
    fn alphabet(&self) -> &Alphabet;
    fn distribution(&self, window: &Window, boundary: &BoundaryCondition) -> Result<ProbabilityTable>;
}

/// The specification rebuilt from a one-point model by [`reconstruct_spec`].
pub struct ReconstructedSpecification<M> {
    pub model: M,
    pub options: ReconstructOptions,
}

impl<M: OnePointEnergyModel> SpecificationFamily for ReconstructedSpecification<M> {
    fn alphabet(&self) -> &Alphabet {
        self.model.alphabet()
    }
    fn distribution(&self, window: &Window, boundary: &BoundaryCondition) -> Result<ProbabilityTable> {
        reconstruct_spec(&self.model, window, boundary, &self.options)
    }
}

fn split(v: &Window, i: &Window) -> Result<Window> {
    if let Some(s) = i.sites().iter().find(|s| !v.contains(s)) {
        return Err(Error::NotASubwindow(s.clone()));
    }
    Ok(v.difference(i))
}

/// Checks `q_V^{x̄}(xy) = (q_V^{x̄})_{V∖I}(x) · q_I^{x̄x}(y)` in log space.
pub fn check_dobrushin_consistency(
    q: &dyn SpecificationFamily,
    v: &Window,
    i: &Window,
    boundary: &BoundaryCondition,
    tol: f64,
) -> Result<ConsistencyReport> {
    let outer = split(v, i)?;
    let alphabet = q.alphabet();
    let qv = q.distribution(v, boundary)?;
    let marg = qv.marginal(&outer)?;
    let ys: Vec<Configuration> = enumerate_configurations(i, alphabet)?.collect();
    let mut tracker = ViolationTracker::new(tol);
    for x in enumerate_configurations(&outer, alphabet)? {
        let qi = q.distribution(i, &boundary.extend(&x)?)?;
        for y in &ys {
            let xy = x.concat(y)?;
            let r = qv.get(&xy).ln() - marg.get(&x).ln() - qi.get(y).ln();
            tracker.observe(r, || {
                vec![
                    ("x", x.label_string(alphabet)),
                    ("y", y.label_string(alphabet)),
                ]
            });
        }
    }
    Ok(tracker.finish())
}

/// Checks `q_V^{x̄}(xy)·q_{V∖I}^{x̄y}(u) = q_V^{x̄}(uy)·q_{V∖I}^{x̄y}(x)` in log space.
pub fn check_dobrushin_ratio_consistency(
    q: &dyn SpecificationFamily,
    v: &Window,
    i: &Window,
    boundary: &BoundaryCondition,
    tol: f64,
) -> Result<ConsistencyReport> {
    let outer = split(v, i)?;
    let alphabet = q.alphabet();
    let qv = q.distribution(v, boundary)?;
    let xs: Vec<Configuration> = enumerate_configurations(&outer, alphabet)?.collect();
    let mut tracker = ViolationTracker::new(tol);
    for y in enumerate_configurations(i, alphabet)? {
        let qo = q.distribution(&outer, &boundary.extend(&y)?)?;
        for x in &xs {
            let xy = x.concat(&y)?;
            for u in &xs {
                let uy = u.concat(&y)?;
                let r = qv.get(&xy).ln() + qo.get(u).ln() - qv.get(&uy).ln() - qo.get(x).ln();
                tracker.observe(r, || {
                    vec![
                        ("x", x.label_string(alphabet)),
                        ("u", u.label_string(alphabet)),
                        ("y", y.label_string(alphabet)),
                    ]
                });
            }
        }
    }
    Ok(tracker.finish())
}

/// Checks the eight-factor kernel law
/// `q_t^{x̄y}(x) q_s^{x̄x}(v) q_t^{x̄v}(u) q_s^{x̄u}(y) = q_s^{x̄x}(y) q_t^{x̄y}(u) q_s^{x̄u}(v) q_t^{x̄v}(x)`
/// in log space for all `x, u` at `t` and `y, v` at `s`.
pub fn check_kernel_consistency(
    k: &dyn OnePointSpecification,
    t: &Site,
    s: &Site,
    boundary: &dyn Environment,
    tol: f64,
) -> Result<ConsistencyReport> {
    if t == s {
        return Err(Error::validation("s", "the two sites must differ"));
    }
    let a = k.alphabet();
    // lq_t[w][x] = ln q_t(x) with s set to w; likewise lq_s.
    let logs = |at: &Site, other: &Site| -> Result<Vec<Vec<f64>>> {
        a.symbols()
            .map(|w| {
                let cfg = Configuration::single(other.clone(), w);
                let env = Overlay {
                    base: boundary,
                    config: &cfg,
                    hole: Some(at),
                };
                Ok(k.kernel(at, &env)?.probs.iter().map(|p| p.ln()).collect())
            })
            .collect()
    };
    let qt = logs(t, s)?;
    let qs = logs(s, t)?;
    let at = |w: Symbol, x: Symbol| qt[usize::from(w)][usize::from(x)];
    let as_ = |w: Symbol, y: Symbol| qs[usize::from(w)][usize::from(y)];
    let mut tracker = ViolationTracker::new(tol);
    for x in a.symbols() {
        for u in a.symbols() {
            for y in a.symbols() {
                for v in a.symbols() {
                    let lhs = at(y, x) + as_(x, v) + at(v, u) + as_(u, y);
                    let rhs = as_(x, y) + at(y, u) + as_(u, v) + at(v, x);
                    tracker.observe(lhs - rhs, || {
                        vec![
                            ("t", t.to_string()),
                            ("s", s.to_string()),
                            ("x", a.label(x).into()),
                            ("u", a.label(u).into()),
                            ("y", a.label(y).into()),
                            ("v", a.label(v).into()),
                        ]
                    });
                }
            }
        }
    }
    Ok(tracker.finish())
}
