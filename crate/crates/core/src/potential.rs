//! Finite-range interaction potentials, their Hamiltonians, and the
//! Hamiltonian-side consistency checks.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::energy::{DependencyRadius, OnePointEnergyModel};
use crate::error::{Error, Result};
use crate::lattice::{
    enumerate_configurations, Alphabet, BoundaryCondition, Configuration, Environment, Metric,
    Overlay, Site, Symbol, Window,
};
use crate::report::{ConsistencyReport, ViolationTracker};
use crate::specification::{ProbabilityTable, SpecificationFamily};

/// One interaction term `Φ_J`.
///
/// `values` is indexed by the configuration on `sites` taken in the listed
/// order, first site most significant. With `translate` the term is applied
/// at every lattice translate of `sites`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialTerm {
    pub sites: Vec<Site>,
    pub values: Vec<f64>,
    #[serde(default)]
    pub translate: bool,
}

/// A potential whose terms all have Chebyshev diameter at most `range`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteRangePotential {
    alphabet: Alphabet,
    dimension: usize,
    range: u32,
    terms: Vec<PotentialTerm>,
}

/// A placed copy of a term: term index plus the translation applied.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Instance {
    term: usize,
    shift: Site,
}

impl FiniteRangePotential {
    pub fn new(
        alphabet: Alphabet,
        dimension: usize,
        range: u32,
        terms: Vec<PotentialTerm>,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::validation("dimension", "must be at least 1"));
        }
        let k = alphabet.size();
        for (n, term) in terms.iter().enumerate() {
            let field = format!("terms[{n}]");
            if term.sites.is_empty() {
                return Err(Error::validation(field, "a term needs at least one site"));
            }
            let window = Window::new(dimension, term.sites.iter().cloned()).map_err(|e| {
                Error::validation(field.clone(), e.to_string())
            })?;
            let expected = crate::lattice::configuration_count(term.sites.len(), k)
                .ok_or_else(|| Error::validation(field.clone(), "value table too large"))?;
            if term.values.len() as u64 != expected {
                return Err(Error::validation(
                    field,
                    format!("expected {expected} values, got {}", term.values.len()),
                ));
            }
            if let Some(v) = term.values.iter().find(|v| !v.is_finite()) {
                return Err(Error::validation(field, format!("non-finite value {v}")));
            }
            let diam = window.diameter();
            if diam > u64::from(range) {
                return Err(Error::validation(
                    field,
                    format!("diameter {diam} exceeds the declared range {range}"),
                ));
            }
        }
        Ok(FiniteRangePotential {
            alphabet,
            dimension,
            range,
            terms,
        })
    }

    pub fn empty(alphabet: Alphabet, dimension: usize) -> Self {
        FiniteRangePotential {
            alphabet,
            dimension,
            range: 0,
            terms: Vec::new(),
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn range(&self) -> u32 {
        self.range
    }

    pub fn terms(&self) -> &[PotentialTerm] {
        &self.terms
    }

    /// Every placed term whose support meets `region`, deduplicated.
    fn instances_touching<'s>(&self, region: impl IntoIterator<Item = &'s Site>) -> BTreeSet<Instance> {
        let region: Vec<&Site> = region.into_iter().collect();
        let mut out = BTreeSet::new();
        let origin = Site::origin(self.dimension);
        for (n, term) in self.terms.iter().enumerate() {
            if term.translate {
                for w in &region {
                    for o in &term.sites {
                        out.insert(Instance {
                            term: n,
                            shift: w.offset_from(o),
                        });
                    }
                }
            } else if term.sites.iter().any(|s| region.contains(&s)) {
                out.insert(Instance {
                    term: n,
                    shift: origin.clone(),
                });
            }
        }
        out
    }

    fn instance_sites<'a>(&'a self, inst: &'a Instance) -> impl Iterator<Item = Site> + 'a {
        self.terms[inst.term]
            .sites
            .iter()
            .map(move |s| s.translate(&inst.shift))
    }

    fn term_value(&self, inst: &Instance, read: &dyn Fn(&Site) -> Result<Symbol>) -> Result<f64> {
        let k = self.alphabet.size();
        let mut idx = 0usize;
        for s in self.instance_sites(inst) {
            idx = idx * k + usize::from(read(&s)?);
        }
        Ok(self.terms[inst.term].values[idx])
    }

    /// Sites (other than `t`) that share a term with `t`.
    pub fn neighbours(&self, t: &Site) -> Window {
        let sites: BTreeSet<Site> = self
            .instances_touching([t])
            .iter()
            .flat_map(|i| self.instance_sites(i).collect::<Vec<_>>())
            .filter(|s| s != t)
            .collect();
        Window::new(self.dimension, sites).expect("set of sites has no duplicates")
    }
}

fn reader<'a>(
    config: &'a Configuration,
    env: &'a dyn Environment,
) -> impl Fn(&Site) -> Result<Symbol> + 'a {
    move |s| match config.get(s) {
        Some(v) => Ok(v),
        None => env.read(s).map_err(|e| match e {
            Error::TailUndefined(site) => Error::AnnulusTooSmall(site),
            other => other,
        }),
    }
}

/// `H_V^{x̄}(x) = Σ_{J ∩ V ≠ ∅} Φ_J(x x̄)`.
pub fn hamiltonian(
    phi: &FiniteRangePotential,
    window: &Window,
    x: &Configuration,
    boundary: &dyn Environment,
) -> Result<f64> {
    if x.window() != window {
        return Err(Error::validation("x", "configuration is not on the window"));
    }
    let read = reader(x, boundary);
    phi.instances_touching(window.sites())
        .iter()
        .map(|inst| phi.term_value(inst, &read))
        .sum()
}

/// `Δ_Φ` between two configurations on the same window: the sum of
/// `Φ_J(target) - Φ_J(base)` over the terms meeting the sites where they differ.
pub fn relative_hamiltonian(
    phi: &FiniteRangePotential,
    base: &Configuration,
    target: &Configuration,
    boundary: &dyn Environment,
) -> Result<f64> {
    if base.window() != target.window() {
        return Err(Error::validation("target", "configurations live on different windows"));
    }
    let changed: Vec<&Site> = base
        .window()
        .sites()
        .iter()
        .zip(base.values().iter().zip(target.values()))
        .filter(|(_, (a, b))| a != b)
        .map(|(s, _)| s)
        .collect();
    let rb = reader(base, boundary);
    let rt = reader(target, boundary);
    let mut total = 0.0;
    for inst in phi.instances_touching(changed) {
        total += phi.term_value(&inst, &rt)? - phi.term_value(&inst, &rb)?;
    }
    Ok(total)
}

/// `H_t^{x̄}(x)`, the energy of the terms containing `t`.
pub fn one_point_hamiltonian(
    phi: &FiniteRangePotential,
    t: &Site,
    x: Symbol,
    env: &dyn Environment,
) -> Result<f64> {
    let cfg = Configuration::single(t.clone(), x);
    let read = reader(&cfg, env);
    phi.instances_touching([t])
        .iter()
        .map(|inst| phi.term_value(inst, &read))
        .sum()
}

impl OnePointEnergyModel for FiniteRangePotential {
    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn dependency_radius(&self) -> DependencyRadius {
        DependencyRadius::Finite(self.range)
    }

    fn evaluate(&self, t: &Site, x: Symbol, u: Symbol, env: &dyn Environment) -> Result<f64> {
        if x == u {
            return Ok(0.0);
        }
        let cx = Configuration::single(t.clone(), x);
        let cu = Configuration::single(t.clone(), u);
        let (rx, ru) = (reader(&cx, env), reader(&cu, env));
        let mut total = 0.0;
        for inst in self.instances_touching([t]) {
            total += self.term_value(&inst, &ru)? - self.term_value(&inst, &rx)?;
        }
        Ok(total)
    }

    fn reference_sites(&self) -> Vec<Site> {
        let mut sites: BTreeSet<Site> = BTreeSet::new();
        sites.insert(Site::origin(self.dimension));
        for term in self.terms.iter().filter(|t| !t.translate) {
            sites.extend(term.sites.iter().cloned());
        }
        sites.into_iter().collect()
    }

    fn dependency_window(&self, t: &Site) -> Option<Window> {
        Some(self.neighbours(t))
    }
}

/// A one-point Hamiltonian family `(t, x̄) ↦ H_t^{x̄}`.
pub trait OnePointHamiltonian {
    fn alphabet(&self) -> &Alphabet;
    fn energy(&self, t: &Site, x: Symbol, env: &dyn Environment) -> Result<f64>;
}

impl OnePointHamiltonian for FiniteRangePotential {
    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }
    fn energy(&self, t: &Site, x: Symbol, env: &dyn Environment) -> Result<f64> {
        one_point_hamiltonian(self, t, x, env)
    }
}

/// `H_V^{x̄}` tabulated over `X^V`.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianTable {
    pub window: Window,
    pub boundary: BoundaryCondition,
    pub values: Vec<f64>,
}

impl HamiltonianTable {
    pub fn get(&self, x: &Configuration, alphabet_size: usize) -> f64 {
        self.values[x.index(alphabet_size)]
    }
}

/// A Hamiltonian family `(V, x̄) ↦ H_V^{x̄}`; the boundary has interior `V`.
pub trait HamiltonianFamily {
    fn alphabet(&self) -> &Alphabet;
    fn table(&self, window: &Window, boundary: &BoundaryCondition) -> Result<HamiltonianTable>;
}

impl HamiltonianFamily for FiniteRangePotential {
    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }
    fn table(&self, window: &Window, boundary: &BoundaryCondition) -> Result<HamiltonianTable> {
        let values = enumerate_configurations(window, &self.alphabet)?
            .map(|x| hamiltonian(self, window, &x, boundary))
            .collect::<Result<Vec<_>>>()?;
        Ok(HamiltonianTable {
            window: window.clone(),
            boundary: boundary.clone(),
            values,
        })
    }
}

impl SpecificationFamily for FiniteRangePotential {
    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }
    /// `exp(-H_V^{x̄}) / Z`.
    fn distribution(&self, window: &Window, boundary: &BoundaryCondition) -> Result<ProbabilityTable> {
        let h = HamiltonianFamily::table(self, window, boundary)?;
        let w: Vec<f64> = h.values.iter().map(|v| -v).collect();
        ProbabilityTable::from_log_weights(window.clone(), self.alphabet.clone(), &w)
    }
}

/// Checks the one-point Hamiltonian law
/// `H_t^{x̄y}(x) + H_s^{x̄x}(v) + H_t^{x̄v}(u) + H_s^{x̄u}(y) = H_s^{x̄x}(y) + H_t^{x̄y}(u) + H_s^{x̄u}(v) + H_t^{x̄v}(x)`.
pub fn check_onepoint_hamiltonian_consistency(
    h1: &dyn OnePointHamiltonian,
    t: &Site,
    s: &Site,
    boundary: &dyn Environment,
    tol: f64,
) -> Result<ConsistencyReport> {
    if t == s {
        return Err(Error::validation("s", "the two sites must differ"));
    }
    let a = h1.alphabet();
    let table = |at: &Site, other: &Site| -> Result<Vec<Vec<f64>>> {
        a.symbols()
            .map(|w| {
                let cfg = Configuration::single(other.clone(), w);
                let env = Overlay {
                    base: boundary,
                    config: &cfg,
                    hole: Some(at),
                };
                a.symbols().map(|x| h1.energy(at, x, &env)).collect()
            })
            .collect()
    };
    let ht = table(t, s)?;
    let hs = table(s, t)?;
    let et = |w: Symbol, x: Symbol| ht[usize::from(w)][usize::from(x)];
    let es = |w: Symbol, y: Symbol| hs[usize::from(w)][usize::from(y)];
    let mut tracker = ViolationTracker::new(tol);
    for x in a.symbols() {
        for u in a.symbols() {
            for y in a.symbols() {
                for v in a.symbols() {
                    let lhs = et(y, x) + es(x, v) + et(v, u) + es(u, y);
                    let rhs = es(x, y) + et(y, u) + es(u, v) + et(v, x);
                    tracker.observe(lhs - rhs, || {
                        vec![
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

/// Checks `H_{V∪I}^{x̄}(xy) + H_V^{x̄y}(u) = H_{V∪I}^{x̄}(uy) + H_V^{x̄y}(x)`.
///
/// `boundary` must have interior `V ∪ I`.
pub fn check_hamiltonian_consistency(
    h: &dyn HamiltonianFamily,
    v: &Window,
    i: &Window,
    boundary: &BoundaryCondition,
    tol: f64,
) -> Result<ConsistencyReport> {
    let joint = v.disjoint_union(i)?;
    if boundary.interior() != &joint {
        return Err(Error::validation("boundary", "interior of the boundary must equal V ∪ I"));
    }
    let a = h.alphabet();
    let k = a.size();
    let big = h.table(&joint, boundary)?;
    let xs: Vec<Configuration> = enumerate_configurations(v, a)?.collect();
    let mut tracker = ViolationTracker::new(tol);
    for y in enumerate_configurations(i, a)? {
        let small = h.table(v, &boundary.extend(&y)?)?;
        for x in &xs {
            let hxy = big.get(&x.concat(&y)?, k);
            for u in &xs {
                let huy = big.get(&u.concat(&y)?, k);
                let r = hxy + small.get(u, k) - huy - small.get(x, k);
                tracker.observe(r, || {
                    vec![
                        ("x", x.label_string(a)),
                        ("u", u.label_string(a)),
                        ("y", y.label_string(a)),
                    ]
                });
            }
        }
    }
    Ok(tracker.finish())
}

/// `H_V^{x̄}(x) = -ln q_V^{x̄}(x) / q_V^{x̄}(anchor)`; the anchor defaults to the
/// all-first-symbol configuration.
pub fn hamiltonian_from_spec(
    q: &dyn SpecificationFamily,
    window: &Window,
    boundary: &BoundaryCondition,
    anchor: Option<&Configuration>,
) -> Result<HamiltonianTable> {
    let p = q.distribution(window, boundary)?;
    let default_anchor;
    let anchor = match anchor {
        Some(a) => a,
        None => {
            default_anchor = Configuration::constant(window.clone(), 0);
            &default_anchor
        }
    };
    let la = p.get(anchor).ln();
    Ok(HamiltonianTable {
        window: window.clone(),
        boundary: boundary.clone(),
        values: p.probs().iter().map(|v| la - v.ln()).collect(),
    })
}

/// The Hamiltonian family read off a specification.
pub struct SpecHamiltonian<Q>(pub Q);

impl<Q: SpecificationFamily> HamiltonianFamily for SpecHamiltonian<Q> {
    fn alphabet(&self) -> &Alphabet {
        self.0.alphabet()
    }
    fn table(&self, window: &Window, boundary: &BoundaryCondition) -> Result<HamiltonianTable> {
        hamiltonian_from_spec(&self.0, window, boundary, None)
    }
}

/// Terms of the nearest-neighbour Ising potential with coupling `beta` and field `h`
/// on the spin alphabet (`-1` is symbol 0).
pub(crate) fn ising_terms(dimension: usize, beta: f64, h: f64) -> Vec<PotentialTerm> {
    let mut terms = Vec::with_capacity(dimension + 1);
    for axis in 0..dimension {
        let mut e = vec![0; dimension];
        e[axis] = 1;
        terms.push(PotentialTerm {
            sites: vec![Site::origin(dimension), Site::new(&e)],
            // -β x_t x_s over (--, -+, +-, ++).
            values: vec![-beta, beta, beta, -beta],
            translate: true,
        });
    }
    terms.push(PotentialTerm {
        sites: vec![Site::origin(dimension)],
        // -h x_t over (-, +).
        values: vec![h, -h],
        translate: true,
    });
    terms
}

/// Chebyshev neighbourhood of `window` wide enough for `phi`.
pub fn interaction_annulus(phi: &FiniteRangePotential, window: &Window) -> Window {
    window.neighbourhood(u64::from(phi.range()), Metric::Chebyshev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Tail;

    fn ising(beta: f64, h: f64) -> FiniteRangePotential {
        FiniteRangePotential::new(Alphabet::spins(), 1, 1, ising_terms(1, beta, h)).unwrap()
    }

    fn s(c: i64) -> Site {
        Site::new(&[c])
    }

    #[test]
    fn empty_potential_has_zero_energy() {
        let phi = FiniteRangePotential::empty(Alphabet::spins(), 1);
        let w = Window::interval(0, 2);
        let b = BoundaryCondition::constant(w.clone(), 1);
        for x in enumerate_configurations(&w, phi.alphabet()).unwrap() {
            assert_eq!(hamiltonian(&phi, &w, &x, &b).unwrap(), 0.0);
        }
    }

    #[test]
    fn ising_single_site_energy() {
        let phi = ising(0.5, 0.0);
        let w = Window::interval(0, 0);
        let b = BoundaryCondition::constant(w.clone(), 1);
        let plus = Configuration::constant(w.clone(), 1);
        assert_eq!(hamiltonian(&phi, &w, &plus, &b).unwrap(), -1.0);
        let minus = Configuration::constant(w.clone(), 0);
        assert_eq!(relative_hamiltonian(&phi, &minus, &plus, &b).unwrap(), -2.0);
        assert_eq!(relative_hamiltonian(&phi, &plus, &plus, &b).unwrap(), 0.0);
    }

    #[test]
    fn field_term_sums_over_sites() {
        let h = 0.7;
        let phi = FiniteRangePotential::new(
            Alphabet::spins(),
            1,
            0,
            vec![PotentialTerm {
                sites: vec![s(0)],
                values: vec![-h, h],
                translate: true,
            }],
        )
        .unwrap();
        let w = Window::interval(0, 3);
        let b = BoundaryCondition::constant(w.clone(), 0);
        let a = Alphabet::spins();
        for x in enumerate_configurations(&w, &a).unwrap() {
            let expected: f64 = x.values().iter().map(|v| h * a.value(*v)).sum();
            assert!((hamiltonian(&phi, &w, &x, &b).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn free_tail_too_small_annulus() {
        let phi = ising(0.5, 0.0);
        let w = Window::interval(0, 0);
        let b = BoundaryCondition::new(w.clone(), Configuration::single(s(-1), 1), Tail::Free).unwrap();
        let x = Configuration::constant(w.clone(), 1);
        assert!(matches!(hamiltonian(&phi, &w, &x, &b), Err(Error::AnnulusTooSmall(site)) if site == s(1)));
    }

    #[test]
    fn term_diameter_beyond_range_is_rejected() {
        let err = FiniteRangePotential::new(
            Alphabet::binary(),
            1,
            1,
            vec![PotentialTerm {
                sites: vec![s(0), s(2)],
                values: vec![0.0; 4],
                translate: true,
            }],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation { field, .. } if field == "terms[0]"));
    }

    #[test]
    fn ising_passes_hamiltonian_checks() {
        let phi = ising(0.4, 0.2);
        let b = BoundaryCondition::constant(Window::interval(0, 1), 1);
        let r = check_onepoint_hamiltonian_consistency(&phi, &s(0), &s(1), &b, 1e-12).unwrap();
        assert!(r.passed);
        let v = Window::interval(0, 0);
        let i = Window::interval(1, 2);
        let b = BoundaryCondition::constant(Window::interval(0, 2), 0);
        assert!(check_hamiltonian_consistency(&phi, &v, &i, &b, 1e-12).unwrap().passed);
    }

    #[test]
    fn neighbours_of_ising_site() {
        let phi = FiniteRangePotential::new(Alphabet::spins(), 2, 1, ising_terms(2, 1.0, 0.0)).unwrap();
        assert_eq!(phi.neighbours(&Site::new(&[0, 0])).len(), 4);
    }
}
