//! Sites, finite windows, configurations and boundary conditions on `Z^d`.
//!
//! Symbols are small integer indices into an [`Alphabet`]; labels only appear
//! at the edges (JSON, CLI). A [`Window`] keeps its sites in lexicographic
//! coordinate order and that order is the canonical enumeration used by every
//! telescoping sum and every exhaustive scan in the crate.

use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Index of a symbol inside its [`Alphabet`].
pub type Symbol = u8;

/// Default cap on the number of states an exhaustive enumeration may visit.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 1 << 24;

/// A lattice point of `Z^d`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(SmallVec<[i64; 3]>);

impl Site {
    pub fn new(coords: &[i64]) -> Self {
        Site(SmallVec::from_slice(coords))
    }

    pub fn origin(dimension: usize) -> Self {
        Site(SmallVec::from_elem(0, dimension))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn translate(&self, offset: &Site) -> Site {
        Site(self.0.iter().zip(offset.0.iter()).map(|(a, b)| a + b).collect())
    }

    /// `self - other`, the offset leading from `other` to `self`.
    pub fn offset_from(&self, other: &Site) -> Site {
        Site(self.0.iter().zip(other.0.iter()).map(|(a, b)| a - b).collect())
    }

    pub fn distance(&self, other: &Site, metric: Metric) -> u64 {
        let diffs = self.0.iter().zip(other.0.iter()).map(|(a, b)| a.abs_diff(*b));
        match metric {
            Metric::Chebyshev => diffs.max().unwrap_or(0),
            Metric::Manhattan => diffs.sum(),
        }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Lattice distance used for balls and dependency neighbourhoods.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    #[default]
    #[serde(rename = "linf")]
    Chebyshev,
    #[serde(rename = "l1")]
    Manhattan,
}

/// A finite set of sites with a canonical (lexicographic) order.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Window {
    dimension: usize,
    sites: Vec<Site>,
}

impl Window {
    /// Builds a window, sorting the sites into canonical order.
    pub fn new(dimension: usize, sites: impl IntoIterator<Item = Site>) -> Result<Self> {
        let mut sites: Vec<Site> = sites.into_iter().collect();
        for s in &sites {
            if s.dimension() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    actual: s.dimension(),
                });
            }
        }
        sites.sort();
        if let Some(w) = sites.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateSite(w[0].clone()));
        }
        Ok(Window { dimension, sites })
    }

    pub fn empty(dimension: usize) -> Self {
        Window {
            dimension,
            sites: Vec::new(),
        }
    }

    pub fn singleton(site: Site) -> Self {
        Window {
            dimension: site.dimension(),
            sites: vec![site],
        }
    }

    /// The one-dimensional window `{lo, ..., hi}`.
    pub fn interval(lo: i64, hi: i64) -> Self {
        Window {
            dimension: 1,
            sites: (lo..=hi).map(|i| Site::new(&[i])).collect(),
        }
    }

    /// The box `lo[i] <= s[i] <= hi[i]`.
    pub fn cuboid(lo: &[i64], hi: &[i64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                actual: hi.len(),
            });
        }
        let mut sites = vec![Site::new(&[])];
        for (a, b) in lo.iter().zip(hi) {
            sites = sites
                .into_iter()
                .flat_map(|s| {
                    (*a..=*b).map(move |c| {
                        let mut v = s.0.clone();
                        v.push(c);
                        Site(v)
                    })
                })
                .collect();
        }
        if lo.iter().zip(hi).any(|(a, b)| a > b) {
            sites.clear();
        }
        Window::new(lo.len(), sites)
    }

    /// Closed ball of `radius` around `center`.
    pub fn ball(center: &Site, radius: u64, metric: Metric) -> Self {
        let r = radius as i64;
        let lo: Vec<i64> = center.coords().iter().map(|c| c - r).collect();
        let hi: Vec<i64> = center.coords().iter().map(|c| c + r).collect();
        let cube = Window::cuboid(&lo, &hi).expect("ball bounds have matching dimension");
        cube.filter(|s| s.distance(center, metric) <= radius)
    }

    /// Ball of `radius` around `center` with the center removed.
    pub fn punctured_ball(center: &Site, radius: u64, metric: Metric) -> Self {
        Window::ball(center, radius, metric).filter(|s| s != center)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn position(&self, site: &Site) -> Option<usize> {
        self.sites.binary_search(site).ok()
    }

    pub fn contains(&self, site: &Site) -> bool {
        self.position(site).is_some()
    }

    pub fn filter(&self, mut keep: impl FnMut(&Site) -> bool) -> Window {
        Window {
            dimension: self.dimension,
            sites: self.sites.iter().filter(|s| keep(s)).cloned().collect(),
        }
    }

    pub fn is_subset_of(&self, other: &Window) -> bool {
        self.sites.iter().all(|s| other.contains(s))
    }

    pub fn is_disjoint(&self, other: &Window) -> bool {
        self.sites.iter().all(|s| !other.contains(s))
    }

    /// Union of two disjoint windows.
    pub fn disjoint_union(&self, other: &Window) -> Result<Window> {
        if let Some(s) = self.sites.iter().find(|s| other.contains(s)) {
            return Err(Error::OverlappingWindows(s.clone()));
        }
        self.union(other)
    }

    pub fn union(&self, other: &Window) -> Result<Window> {
        let dim = self.merged_dimension(other)?;
        let mut sites = self.sites.clone();
        sites.extend(other.sites.iter().filter(|s| !self.contains(s)).cloned());
        sites.sort();
        Ok(Window {
            dimension: dim,
            sites,
        })
    }

    pub fn difference(&self, other: &Window) -> Window {
        self.filter(|s| !other.contains(s))
    }

    /// Sites within `radius` of the window that are not in the window.
    pub fn neighbourhood(&self, radius: u64, metric: Metric) -> Window {
        let mut sites: Vec<Site> = Vec::new();
        for s in &self.sites {
            for n in Window::ball(s, radius, metric).sites {
                if !self.contains(&n) {
                    sites.push(n);
                }
            }
        }
        sites.sort();
        sites.dedup();
        Window {
            dimension: self.dimension,
            sites,
        }
    }

    /// Largest pairwise Chebyshev distance; zero for windows of at most one site.
    pub fn diameter(&self) -> u64 {
        let mut d = 0;
        for (i, a) in self.sites.iter().enumerate() {
            for b in &self.sites[i + 1..] {
                d = d.max(a.distance(b, Metric::Chebyshev));
            }
        }
        d
    }

    fn merged_dimension(&self, other: &Window) -> Result<usize> {
        if self.is_empty() {
            return Ok(other.dimension);
        }
        if !other.is_empty() && other.dimension != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: other.dimension,
            });
        }
        Ok(self.dimension)
    }

    /// Sorted coordinate lists, the external form of a window.
    pub fn to_coordinate_lists(&self) -> Vec<Vec<i64>> {
        self.sites.iter().map(|s| s.coords().to_vec()).collect()
    }
}

/// The finite single-site state space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alphabet {
    labels: Vec<String>,
    values: Option<Vec<f64>>,
}

impl Alphabet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::validation("alphabet", "alphabet must not be empty"));
        }
        if labels.len() > usize::from(Symbol::MAX) + 1 {
            return Err(Error::validation("alphabet", "at most 256 symbols are supported"));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::validation(
                    "alphabet",
                    format!("duplicate symbol {l:?}"),
                ));
            }
        }
        let values = labels
            .iter()
            .map(|l| l.parse::<f64>().ok())
            .collect::<Option<Vec<_>>>();
        Ok(Alphabet { labels, values })
    }

    /// `{-1, +1}` with numeric values -1 and 1.
    pub fn spins() -> Self {
        Alphabet {
            labels: vec!["-1".into(), "+1".into()],
            values: Some(vec![-1.0, 1.0]),
        }
    }

    /// `{0, 1}`.
    pub fn binary() -> Self {
        Alphabet {
            labels: vec!["0".into(), "1".into()],
            values: Some(vec![0.0, 1.0]),
        }
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn symbols(&self) -> impl Iterator<Item = Symbol> {
        (0..self.labels.len()).map(|i| i as Symbol)
    }

    pub fn label(&self, symbol: Symbol) -> &str {
        &self.labels[usize::from(symbol)]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn symbol(&self, label: &str) -> Result<Symbol> {
        self.labels
            .iter()
            .position(|l| l == label)
            .or_else(|| {
                // "+1" and "1" name the same spin.
                let v: f64 = label.parse().ok()?;
                self.values.as_ref()?.iter().position(|x| *x == v)
            })
            .map(|i| i as Symbol)
            .ok_or_else(|| Error::UnknownSymbol(label.to_string()))
    }

    /// Numeric value of a symbol: the parsed label if every label is numeric,
    /// the symbol index otherwise.
    pub fn value(&self, symbol: Symbol) -> f64 {
        match &self.values {
            Some(v) => v[usize::from(symbol)],
            None => f64::from(symbol),
        }
    }
}

/// An assignment of symbols to the sites of a window.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Configuration {
    window: Window,
    values: Vec<Symbol>,
}

impl Configuration {
    pub fn new(window: Window, values: Vec<Symbol>) -> Result<Self> {
        if window.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: window.len(),
                actual: values.len(),
            });
        }
        Ok(Configuration { window, values })
    }

    /// The empty configuration on the empty window.
    pub fn empty(dimension: usize) -> Self {
        Configuration {
            window: Window::empty(dimension),
            values: Vec::new(),
        }
    }

    pub fn constant(window: Window, symbol: Symbol) -> Self {
        let values = vec![symbol; window.len()];
        Configuration { window, values }
    }

    pub fn single(site: Site, symbol: Symbol) -> Self {
        Configuration {
            window: Window::singleton(site),
            values: vec![symbol],
        }
    }

    pub fn from_fn(window: Window, mut f: impl FnMut(&Site) -> Symbol) -> Self {
        let values = window.sites().iter().map(&mut f).collect();
        Configuration { window, values }
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn values(&self) -> &[Symbol] {
        &self.values
    }

    pub fn get(&self, site: &Site) -> Option<Symbol> {
        self.window.position(site).map(|i| self.values[i])
    }

    pub(crate) fn set_at(&mut self, index: usize, symbol: Symbol) {
        self.values[index] = symbol;
    }

    /// Concatenation `xy` of configurations on disjoint windows.
    pub fn concat(&self, other: &Configuration) -> Result<Configuration> {
        let window = self.window.disjoint_union(&other.window)?;
        let values = window
            .sites()
            .iter()
            .map(|s| {
                self.get(s)
                    .or_else(|| other.get(s))
                    .expect("site of the union comes from one operand")
            })
            .collect();
        Ok(Configuration { window, values })
    }

    /// Restriction `x_T` to a subwindow.
    pub fn restrict(&self, sub: &Window) -> Result<Configuration> {
        let values = sub
            .sites()
            .iter()
            .map(|s| self.get(s).ok_or_else(|| Error::NotASubwindow(s.clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Configuration {
            window: sub.clone(),
            values,
        })
    }

    /// Position in the lexicographic enumeration of `X^V` (first site most significant).
    pub fn index(&self, alphabet_size: usize) -> usize {
        self.values
            .iter()
            .fold(0, |acc, v| acc * alphabet_size + usize::from(*v))
    }

    pub fn from_index(window: Window, alphabet_size: usize, mut index: usize) -> Self {
        let mut values = vec![0; window.len()];
        for v in values.iter_mut().rev() {
            *v = (index % alphabet_size) as Symbol;
            index /= alphabet_size;
        }
        Configuration { window, values }
    }

    /// Comma-separated symbol labels in canonical site order.
    pub fn label_string(&self, alphabet: &Alphabet) -> String {
        self.values
            .iter()
            .map(|v| alphabet.label(*v))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn to_json(&self, alphabet: &Alphabet) -> ConfigurationJson {
        ConfigurationJson {
            sites: self.window.to_coordinate_lists(),
            values: self
                .values
                .iter()
                .map(|v| alphabet.label(*v).to_string())
                .collect(),
        }
    }

    pub fn from_json(json: &ConfigurationJson, alphabet: &Alphabet) -> Result<Configuration> {
        if json.sites.len() != json.values.len() {
            return Err(Error::LengthMismatch {
                expected: json.sites.len(),
                actual: json.values.len(),
            });
        }
        let dimension = json.sites.first().map_or(0, Vec::len);
        let mut pairs = json
            .sites
            .iter()
            .zip(&json.values)
            .map(|(c, l)| Ok((Site::new(c), alphabet.symbol(l)?)))
            .collect::<Result<Vec<_>>>()?;
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        let window = Window::new(dimension, pairs.iter().map(|p| p.0.clone()))?;
        Configuration::new(window, pairs.into_iter().map(|p| p.1).collect())
    }
}

/// External JSON form of a configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationJson {
    pub sites: Vec<Vec<i64>>,
    pub values: Vec<String>,
}

/// `k^n`, or `None` on overflow.
pub fn configuration_count(window_len: usize, alphabet_size: usize) -> Option<u64> {
    (alphabet_size as u64).checked_pow(u32::try_from(window_len).ok()?)
}

pub(crate) fn check_budget(window_len: usize, alphabet_size: usize, budget: u64) -> Result<usize> {
    match configuration_count(window_len, alphabet_size) {
        Some(n) if n <= budget => Ok(n as usize),
        other => Err(Error::BudgetExceeded {
            requested: other.map_or_else(
                || (alphabet_size as u128).saturating_pow(window_len as u32),
                u128::from,
            ),
            budget,
        }),
    }
}

/// All configurations on `window`, in lexicographic order.
pub fn enumerate_configurations(window: &Window, alphabet: &Alphabet) -> Result<Configurations> {
    enumerate_configurations_with_budget(window, alphabet, DEFAULT_ENUMERATION_BUDGET)
}

pub fn enumerate_configurations_with_budget(
    window: &Window,
    alphabet: &Alphabet,
    budget: u64,
) -> Result<Configurations> {
    let total = check_budget(window.len(), alphabet.size(), budget)?;
    Ok(Configurations {
        window: window.clone(),
        alphabet_size: alphabet.size(),
        next: 0,
        total,
    })
}

/// Iterator returned by [`enumerate_configurations`].
#[derive(Clone, Debug)]
pub struct Configurations {
    window: Window,
    alphabet_size: usize,
    next: usize,
    total: usize,
}

impl Iterator for Configurations {
    type Item = Configuration;

    fn next(&mut self) -> Option<Configuration> {
        if self.next >= self.total {
            return None;
        }
        let c = Configuration::from_index(self.window.clone(), self.alphabet_size, self.next);
        self.next += 1;
        Some(c)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.total - self.next;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Configurations {}

/// What lies beyond the annulus of a [`BoundaryCondition`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tail {
    /// Every site outside the annulus carries this symbol.
    Fixed(Symbol),
    /// Reading beyond the annulus is an error.
    Free,
}

/// Read access to the symbols surrounding a site or window.
pub trait Environment {
    fn read(&self, site: &Site) -> Result<Symbol>;
}

/// Finite stand-in for an infinite boundary condition: explicit values on an
/// annulus around the interior window and a tail policy for everything else.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryCondition {
    interior: Window,
    annulus: Configuration,
    tail: Tail,
}

impl BoundaryCondition {
    pub fn new(interior: Window, annulus: Configuration, tail: Tail) -> Result<Self> {
        if let Some(s) = annulus.window().sites().iter().find(|s| interior.contains(s)) {
            return Err(Error::OverlappingWindows(s.clone()));
        }
        Ok(BoundaryCondition {
            interior,
            annulus,
            tail,
        })
    }

    /// Constant boundary: every exterior site carries `symbol`.
    pub fn constant(interior: Window, symbol: Symbol) -> Self {
        let dim = interior.dimension();
        BoundaryCondition {
            interior,
            annulus: Configuration::empty(dim),
            tail: Tail::Fixed(symbol),
        }
    }

    pub fn interior(&self) -> &Window {
        &self.interior
    }

    pub fn annulus(&self) -> &Configuration {
        &self.annulus
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    /// The boundary `x̄y`: moves the sites of `config` from the interior into
    /// the annulus.
    pub fn extend(&self, config: &Configuration) -> Result<BoundaryCondition> {
        if let Some(s) = config
            .window()
            .sites()
            .iter()
            .find(|s| !self.interior.contains(s))
        {
            return Err(Error::NotASubwindow(s.clone()));
        }
        Ok(BoundaryCondition {
            interior: self.interior.difference(config.window()),
            annulus: self.annulus.concat(config)?,
            tail: self.tail,
        })
    }

    /// Same exterior values, viewed as the boundary of a smaller interior.
    /// Sites dropped from the interior must be supplied by `config` first; this
    /// only relabels a boundary whose interior already equals `interior` plus
    /// annulus sites.
    pub fn with_interior(&self, interior: Window) -> Result<BoundaryCondition> {
        BoundaryCondition::new(interior, self.annulus.clone(), self.tail)
    }
}

impl Environment for BoundaryCondition {
    fn read(&self, site: &Site) -> Result<Symbol> {
        if self.interior.contains(site) {
            return Err(Error::InteriorSiteRead(site.clone()));
        }
        if let Some(v) = self.annulus.get(site) {
            return Ok(v);
        }
        match self.tail {
            Tail::Fixed(v) => Ok(v),
            Tail::Free => Err(Error::TailUndefined(site.clone())),
        }
    }
}

/// Reads a boundary value; see [`Environment::read`].
pub fn read_boundary(boundary: &BoundaryCondition, site: &Site) -> Result<Symbol> {
    boundary.read(site)
}

/// A configuration laid over a base environment, with one site held out.
///
/// This is how `x̄ y` is formed on the fly without building a new boundary:
/// sites of `config` read from it, `hole` is the site being updated, and
/// everything else falls through to `base`.
pub struct Overlay<'a> {
    pub base: &'a dyn Environment,
    pub config: &'a Configuration,
    pub hole: Option<&'a Site>,
}

impl Environment for Overlay<'_> {
    fn read(&self, site: &Site) -> Result<Symbol> {
        if self.hole == Some(site) {
            return Err(Error::InteriorSiteRead(site.clone()));
        }
        match self.config.get(site) {
            Some(v) => Ok(v),
            None => self.base.read(site),
        }
    }
}
