//! Transition energies: finite-volume tables, one-point fields, the
//! consistency checks that tie them together, and the telescoping sum that
//! rebuilds `δ_V` from single-site energies.
//!
//! Sign convention: `δ(x, u) = ln P(x) / P(u)`, so for a Hamiltonian
//! `δ(x, u) = H(u) - H(x)`.

use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::{
    enumerate_configurations, Alphabet, BoundaryCondition, Configuration, Environment, Metric,
    Overlay, Site, Symbol, Tail, Window,
};
use crate::report::{ConsistencyReport, ViolationTracker};
use crate::specification::ProbabilityTable;

/// How far from a site a one-point energy may look.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DependencyRadius {
    Finite(u32),
    Unbounded,
}

/// A one-point transition energy field `t, x̄ ↦ δ_t^{x̄}`.
///
/// `evaluate` must be a pure function of its arguments and must only read the
/// environment at sites of [`dependency_window`](Self::dependency_window).
pub trait OnePointEnergyModel: Send + Sync {
    fn alphabet(&self) -> &Alphabet;

    fn dimension(&self) -> usize;

    fn dependency_radius(&self) -> DependencyRadius;

    /// `δ_t^{x̄}(x, u)` with `x̄` supplied by `env`.
    fn evaluate(&self, t: &Site, x: Symbol, u: Symbol, env: &dyn Environment) -> Result<f64>;

    /// Sites whose environments represent all others up to translation.
    fn reference_sites(&self) -> Vec<Site> {
        vec![Site::origin(self.dimension())]
    }

    /// Sites the energy at `t` may read; `None` for unbounded dependency.
    fn dependency_window(&self, t: &Site) -> Option<Window> {
        match self.dependency_radius() {
            DependencyRadius::Finite(r) => {
                Some(Window::punctured_ball(t, u64::from(r), Metric::Chebyshev))
            }
            DependencyRadius::Unbounded => None,
        }
    }
}

impl<M: OnePointEnergyModel + ?Sized> OnePointEnergyModel for &M {
    fn alphabet(&self) -> &Alphabet {
        (**self).alphabet()
    }
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn dependency_radius(&self) -> DependencyRadius {
        (**self).dependency_radius()
    }
    fn evaluate(&self, t: &Site, x: Symbol, u: Symbol, env: &dyn Environment) -> Result<f64> {
        (**self).evaluate(t, x, u, env)
    }
    fn reference_sites(&self) -> Vec<Site> {
        (**self).reference_sites()
    }
    fn dependency_window(&self, t: &Site) -> Option<Window> {
        (**self).dependency_window(t)
    }
}

impl<M: OnePointEnergyModel + ?Sized> OnePointEnergyModel for Box<M> {
    fn alphabet(&self) -> &Alphabet {
        (**self).alphabet()
    }
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn dependency_radius(&self) -> DependencyRadius {
        (**self).dependency_radius()
    }
    fn evaluate(&self, t: &Site, x: Symbol, u: Symbol, env: &dyn Environment) -> Result<f64> {
        (**self).evaluate(t, x, u, env)
    }
    fn reference_sites(&self) -> Vec<Site> {
        (**self).reference_sites()
    }
    fn dependency_window(&self, t: &Site) -> Option<Window> {
        (**self).dependency_window(t)
    }
}

/// A one-point model given by a closure, mostly for tests and perturbations.
pub struct FnOnePointModel<F> {
    pub alphabet: Alphabet,
    pub dimension: usize,
    pub radius: DependencyRadius,
    pub f: F,
}

impl<F> OnePointEnergyModel for FnOnePointModel<F>
where
    F: Fn(&Site, Symbol, Symbol, &dyn Environment) -> Result<f64> + Send + Sync,
{
    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
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
        (self.f)(t, x, u, env)
    }
}

/// Environment wrapper recording the farthest site read from a center.
pub struct ReadTracker<'a> {
    inner: &'a dyn Environment,
    center: Site,
    max_distance: Mutex<u64>,
}

impl<'a> ReadTracker<'a> {
    pub fn new(inner: &'a dyn Environment, center: Site) -> Self {
        ReadTracker {
            inner,
            center,
            max_distance: Mutex::new(0),
        }
    }

    /// Largest Chebyshev distance read so far.
    pub fn max_distance(&self) -> u64 {
        *self.max_distance.lock().expect("tracker lock")
    }
}

impl Environment for ReadTracker<'_> {
    fn read(&self, site: &Site) -> Result<Symbol> {
        let d = site.distance(&self.center, Metric::Chebyshev);
        let mut m = self.max_distance.lock().expect("tracker lock");
        *m = (*m).max(d);
        drop(m);
        self.inner.read(site)
    }
}

/// `δ_V` on one window: a dense `k^n × k^n` table, possibly partial.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionEnergyTable {
    window: Window,
    alphabet: Alphabet,
    states: usize,
    values: Vec<Option<f64>>,
}

impl TransitionEnergyTable {
    /// An empty table to be filled with [`set`](Self::set).
    pub fn partial(window: Window, alphabet: Alphabet) -> Result<Self> {
        let states = crate::lattice::check_budget(
            window.len(),
            alphabet.size(),
            crate::lattice::DEFAULT_ENUMERATION_BUDGET,
        )?;
        if states.checked_mul(states).is_none() || states * states > 1 << 26 {
            return Err(Error::BudgetExceeded {
                requested: (states as u128) * (states as u128),
                budget: 1 << 26,
            });
        }
        Ok(TransitionEnergyTable {
            window,
            alphabet,
            states,
            values: vec![None; states * states],
        })
    }

    pub fn from_fn(
        window: Window,
        alphabet: Alphabet,
        mut f: impl FnMut(&Configuration, &Configuration) -> Result<f64>,
    ) -> Result<Self> {
        let mut t = Self::partial(window, alphabet)?;
        let configs: Vec<Configuration> = enumerate_configurations(&t.window, &t.alphabet)?.collect();
        for (i, x) in configs.iter().enumerate() {
            for (j, u) in configs.iter().enumerate() {
                t.values[i * t.states + j] = Some(f(x, u)?);
            }
        }
        Ok(t)
    }

    /// `δ(x, u) = H(u) - H(x)` from energies indexed like the configurations.
    pub fn from_energies(window: Window, alphabet: Alphabet, energies: &[f64]) -> Result<Self> {
        let n = crate::lattice::check_budget(window.len(), alphabet.size(), u64::MAX)?;
        if energies.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: energies.len(),
            });
        }
        let k = alphabet.size();
        Self::from_fn(window, alphabet, |x, u| {
            Ok(energies[u.index(k)] - energies[x.index(k)])
        })
    }

    /// `δ(x, u) = ln P(x) / P(u)`.
    pub fn from_distribution(p: &ProbabilityTable) -> Result<Self> {
        let logs: Vec<f64> = p.probs().iter().map(|v| v.ln()).collect();
        let k = p.alphabet().size();
        Self::from_fn(p.window().clone(), p.alphabet().clone(), |x, u| {
            Ok(logs[x.index(k)] - logs[u.index(k)])
        })
    }

    pub fn zero(window: Window, alphabet: Alphabet) -> Result<Self> {
        Self::from_fn(window, alphabet, |_, _| Ok(0.0))
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn set(&mut self, x: &Configuration, u: &Configuration, value: f64) {
        let k = self.alphabet.size();
        self.values[x.index(k) * self.states + u.index(k)] = Some(value);
    }

    /// Entry by configuration indices.
    pub fn at(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.states + j]
    }

    pub fn get(&self, x: &Configuration, u: &Configuration) -> Option<f64> {
        let k = self.alphabet.size();
        self.at(x.index(k), u.index(k))
    }

    /// Every entry, or `IncompleteTable` naming the first missing pair.
    pub fn dense(&self) -> Result<Vec<f64>> {
        self.values
            .iter()
            .enumerate()
            .map(|(n, v)| {
                v.ok_or_else(|| {
                    let k = self.alphabet.size();
                    let (i, j) = (n / self.states, n % self.states);
                    Error::IncompleteTable {
                        x: Configuration::from_index(self.window.clone(), k, i)
                            .label_string(&self.alphabet),
                        u: Configuration::from_index(self.window.clone(), k, j)
                            .label_string(&self.alphabet),
                    }
                })
            })
            .collect()
    }

    fn label(&self, i: usize) -> String {
        Configuration::from_index(self.window.clone(), self.alphabet.size(), i)
            .label_string(&self.alphabet)
    }
}

/// Checks zero diagonal, antisymmetry and `δ(x,u) = δ(x,z) + δ(z,u)` for all triples.
///
/// Violations are absolute; callers wanting a relative bound scale `tol`.
pub fn check_cocycle(table: &TransitionEnergyTable, tol: f64) -> Result<ConsistencyReport> {
    let d = table.dense()?;
    let n = table.states();
    let mut tracker = ViolationTracker::new(tol);
    for x in 0..n {
        tracker.observe(d[x * n + x], || {
            vec![("law", "zero diagonal".into()), ("x", table.label(x))]
        });
        for u in 0..n {
            tracker.observe(d[x * n + u] + d[u * n + x], || {
                vec![
                    ("law", "antisymmetry".into()),
                    ("x", table.label(x)),
                    ("u", table.label(u)),
                ]
            });
            for z in 0..n {
                let r = d[x * n + u] - d[x * n + z] - d[z * n + u];
                tracker.observe(r, || {
                    vec![
                        ("law", "cocycle".into()),
                        ("x", table.label(x)),
                        ("u", table.label(u)),
                        ("z", table.label(z)),
                    ]
                });
            }
        }
    }
    Ok(tracker.finish())
}

/// A family of finite-volume transition energies `(V, x̄) ↦ δ_V^{x̄}`.
///
/// The boundary passed to [`table`](Self::table) has interior exactly `V`.
pub trait TransitionEnergyFamily {
    fn alphabet(&self) -> &Alphabet;
    fn table(&self, window: &Window, boundary: &BoundaryCondition) -> Result<TransitionEnergyTable>;
}

/// The family obtained by telescoping a one-point model.
pub struct AssembledField<M>(pub M);

impl<M: OnePointEnergyModel> TransitionEnergyFamily for AssembledField<M> {
    fn alphabet(&self) -> &Alphabet {
        self.0.alphabet()
    }

    fn table(&self, window: &Window, boundary: &BoundaryCondition) -> Result<TransitionEnergyTable> {
        TransitionEnergyTable::from_fn(window.clone(), self.0.alphabet().clone(), |x, u| {
            assemble_delta(&self.0, window, x, u, boundary)
        })
    }
}

/// Both forms of field consistency on a split `V ∪ I`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct FieldConsistencyReport {
    /// `δ_{V∪I}(xy, uy) = δ_V^{x̄y}(x, u)`.
    pub conditional: ConsistencyReport,
    /// `δ_{V∪I}(xy, uv) = δ_V^{x̄y}(x, u) + δ_I^{x̄u}(y, v)`.
    pub additive: ConsistencyReport,
}

impl FieldConsistencyReport {
    pub fn passed(&self) -> bool {
        self.conditional.passed && self.additive.passed
    }
}

/// Checks field consistency of `family` on the disjoint split `V ∪ I`.
///
/// `boundary` must have interior `V ∪ I`.
pub fn check_field_consistency(
    family: &dyn TransitionEnergyFamily,
    v: &Window,
    i: &Window,
    boundary: &BoundaryCondition,
    tol: f64,
) -> Result<FieldConsistencyReport> {
    let joint = v.disjoint_union(i)?;
    if boundary.interior() != &joint {
        return Err(Error::validation(
            "boundary",
            "interior of the boundary must equal V ∪ I",
        ));
    }
    let alphabet = family.alphabet().clone();
    let big = family.table(&joint, boundary)?;
    let big_d = big.dense()?;
    let nb = big.states();
    let k = alphabet.size();
    let xs: Vec<Configuration> = enumerate_configurations(v, &alphabet)?.collect();
    let ys: Vec<Configuration> = enumerate_configurations(i, &alphabet)?.collect();

    let mut v_tables = Vec::with_capacity(ys.len());
    for y in &ys {
        v_tables.push(family.table(v, &boundary.extend(y)?)?.dense()?);
    }
    let mut i_tables = Vec::with_capacity(xs.len());
    for x in &xs {
        i_tables.push(family.table(i, &boundary.extend(x)?)?.dense()?);
    }
    let nv = xs.len();
    let ni = ys.len();

    let joint_index =
        |x: &Configuration, y: &Configuration| x.concat(y).map(|c| c.index(k));

    let mut conditional = ViolationTracker::new(tol);
    let mut additive = ViolationTracker::new(tol);
    for (yi, y) in ys.iter().enumerate() {
        for (xi, x) in xs.iter().enumerate() {
            let xy = joint_index(x, y)?;
            for (ui, u) in xs.iter().enumerate() {
                let uy = joint_index(u, y)?;
                let r = big_d[xy * nb + uy] - v_tables[yi][xi * nv + ui];
                conditional.observe(r, || {
                    vec![
                        ("x", x.label_string(&alphabet)),
                        ("u", u.label_string(&alphabet)),
                        ("y", y.label_string(&alphabet)),
                    ]
                });
                for (wi, w) in ys.iter().enumerate() {
                    let uw = joint_index(u, w)?;
                    let r = big_d[xy * nb + uw]
                        - v_tables[yi][xi * nv + ui]
                        - i_tables[ui][yi * ni + wi];
                    additive.observe(r, || {
                        vec![
                            ("x", x.label_string(&alphabet)),
                            ("u", u.label_string(&alphabet)),
                            ("y", y.label_string(&alphabet)),
                            ("v", w.label_string(&alphabet)),
                        ]
                    });
                }
            }
        }
    }
    Ok(FieldConsistencyReport {
        conditional: conditional.finish(),
        additive: additive.finish(),
    })
}

/// Checks the one-point exchange law
/// `δ_t^{x̄y}(x,u) + δ_s^{x̄u}(y,v) = δ_s^{x̄x}(y,v) + δ_t^{x̄v}(x,u)`
/// for every `x, u` at `t` and `y, v` at `s`.
///
/// `boundary` supplies everything except `t` and `s`.
pub fn check_onepoint_consistency(
    m: &dyn OnePointEnergyModel,
    t: &Site,
    s: &Site,
    boundary: &dyn Environment,
    tol: f64,
) -> Result<ConsistencyReport> {
    if t == s {
        return Err(Error::validation("s", "the two sites must differ"));
    }
    let a = m.alphabet();
    let k = a.size();
    // d_t[w][x][u] = δ_t with s set to w; d_s[w][y][v] = δ_s with t set to w.
    let table = |at: &Site, other: &Site| -> Result<Vec<f64>> {
        let mut out = vec![0.0; k * k * k];
        for w in a.symbols() {
            let cfg = Configuration::single(other.clone(), w);
            let env = Overlay {
                base: boundary,
                config: &cfg,
                hole: Some(at),
            };
            for x in a.symbols() {
                for u in a.symbols() {
                    if x != u {
                        out[(usize::from(w) * k + usize::from(x)) * k + usize::from(u)] =
                            m.evaluate(at, x, u, &env)?;
                    }
                }
            }
        }
        Ok(out)
    };
    let dt = table(t, s)?;
    let ds = table(s, t)?;
    let idx = |w: Symbol, x: Symbol, u: Symbol| (usize::from(w) * k + usize::from(x)) * k + usize::from(u);

    let mut tracker = ViolationTracker::new(tol);
    for x in a.symbols() {
        for u in a.symbols() {
            for y in a.symbols() {
                for v in a.symbols() {
                    let lhs = dt[idx(y, x, u)] + ds[idx(u, y, v)];
                    let rhs = ds[idx(x, y, v)] + dt[idx(v, x, u)];
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

/// `δ_V^{x̄}(x, u)` telescoped over the canonical order of `V`.
pub fn assemble_delta(
    m: &dyn OnePointEnergyModel,
    window: &Window,
    x: &Configuration,
    u: &Configuration,
    boundary: &dyn BoundaryLike,
) -> Result<f64> {
    let order: Vec<usize> = (0..window.len()).collect();
    assemble_delta_ordered(m, window, x, u, boundary, &order)
}

/// Boundaries that declare their tail policy, so unbounded models can be refused
/// under a free tail before any evaluation.
pub trait BoundaryLike: Environment {
    fn tail(&self) -> Option<Tail>;
}

impl BoundaryLike for BoundaryCondition {
    fn tail(&self) -> Option<Tail> {
        Some(BoundaryCondition::tail(self))
    }
}

impl BoundaryLike for Overlay<'_> {
    fn tail(&self) -> Option<Tail> {
        None
    }
}

/// As [`assemble_delta`], visiting the sites of `V` in `order` (a permutation
/// of `0..|V|`).
pub fn assemble_delta_ordered(
    m: &dyn OnePointEnergyModel,
    window: &Window,
    x: &Configuration,
    u: &Configuration,
    boundary: &dyn BoundaryLike,
    order: &[usize],
) -> Result<f64> {
    if x.window() != window {
        return Err(Error::validation("x", "configuration is not on the window"));
    }
    if u.window() != window {
        return Err(Error::validation("u", "configuration is not on the window"));
    }
    let mut seen = vec![false; window.len()];
    if order.len() != window.len() || order.iter().any(|&i| i >= seen.len() || std::mem::replace(&mut seen[i], true)) {
        return Err(Error::validation("order", "must be a permutation of the window's sites"));
    }
    if m.dependency_radius() == DependencyRadius::Unbounded && boundary.tail() == Some(Tail::Free) {
        return Err(Error::UnboundedDependency);
    }
    let mut working = x.clone();
    let mut total = 0.0;
    for &i in order {
        let (xi, ui) = (x.values()[i], u.values()[i]);
        if xi == ui {
            continue;
        }
        let t = &window.sites()[i];
        let env = Overlay {
            base: boundary,
            config: &working,
            hole: Some(t),
        };
        total += m.evaluate(t, xi, ui, &env)?;
        working.set_at(i, ui);
    }
    Ok(total)
}

/// `ln P(x) / P(u)`.
pub fn delta_from_distribution(
    p: &ProbabilityTable,
    x: &Configuration,
    u: &Configuration,
) -> Result<f64> {
    let k = p.alphabet().size();
    for c in [x, u] {
        if c.window() != p.window() {
            return Err(Error::validation("configuration", "not on the table's window"));
        }
    }
    Ok(p.probs()[x.index(k)].ln() - p.probs()[u.index(k)].ln())
}

/// Empirical modulus of quasilocality at `t`.
///
/// For each radius `r`, draws `probes` pairs of boundaries that agree on the
/// Chebyshev ball of radius `r` around `t` and are independent uniform beyond
/// it out to a fixed horizon (tails fixed to symbol 0), and returns the
/// largest `|δ_t^{x̄}(x,u) - δ_t^{ȳ}(x,u)|` seen.
pub fn quasilocality_modulus(
    m: &dyn OnePointEnergyModel,
    t: &Site,
    radii: &[u64],
    probes: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("radii", "must be strictly increasing"));
    }
    let Some(&max_r) = radii.last() else {
        return Ok(Vec::new());
    };
    let horizon = match m.dependency_radius() {
        DependencyRadius::Finite(r) => max_r.max(u64::from(r)) + 1,
        DependencyRadius::Unbounded => max_r + 1,
    };
    let a = m.alphabet();
    let k = a.size() as u8;
    let interior = Window::singleton(t.clone());
    let region = Window::punctured_ball(t, horizon, Metric::Chebyshev);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut worst: f64 = 0.0;
        for _ in 0..probes {
            let mut first = Vec::with_capacity(region.len());
            let mut second = Vec::with_capacity(region.len());
            for site in region.sites() {
                let v = rng.gen_range(0..k);
                first.push(v);
                if site.distance(t, Metric::Chebyshev) <= r {
                    second.push(v);
                } else {
                    second.push(rng.gen_range(0..k));
                }
            }
            let b1 = BoundaryCondition::new(
                interior.clone(),
                Configuration::new(region.clone(), first)?,
                Tail::Fixed(0),
            )?;
            let b2 = BoundaryCondition::new(
                interior.clone(),
                Configuration::new(region.clone(), second)?,
                Tail::Fixed(0),
            )?;
            for x in a.symbols() {
                for u in a.symbols() {
                    if x < u {
                        let d = m.evaluate(t, x, u, &b1)? - m.evaluate(t, x, u, &b2)?;
                        worst = worst.max(d.abs());
                    }
                }
            }
        }
        out.push(worst);
    }
    Ok(out)
}
