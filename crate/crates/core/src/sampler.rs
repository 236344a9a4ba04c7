//! Single-site heat-bath sampler driven by a one-point energy model.
//!
//! Randomness is counter based: the uniform used at step `j` of sweep `n`
//! comes from the ChaCha8 stream `n` of the seed at word position `4j`, so a
//! trajectory is a pure function of `(seed, sweep, step)`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::energy::OnePointEnergyModel;
use crate::error::{Error, Result};
use crate::lattice::{
    Alphabet, BoundaryCondition, Configuration, Environment, Overlay, Site, Symbol, Window,
};
use crate::specification::kernel_log_probs;

/// Largest joint state space for which [`SampleStats::joint_counts`] is kept.
pub const JOINT_COUNT_LIMIT: usize = 1 << 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Scan {
    /// Sites in window order.
    #[default]
    Systematic,
    /// `|V|` uniformly chosen sites per sweep.
    Random,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub window: Window,
    pub boundary: BoundaryCondition,
    pub config: Configuration,
    pub rng_seed: u64,
    pub sweep_count: u64,
}

impl ChainState {
    pub fn new(boundary: BoundaryCondition, config: Configuration, rng_seed: u64) -> Result<Self> {
        if config.window() != boundary.interior() {
            return Err(Error::validation(
                "config",
                "configuration window must equal the boundary interior",
            ));
        }
        Ok(ChainState {
            window: config.window().clone(),
            boundary,
            config,
            rng_seed,
            sweep_count: 0,
        })
    }

    /// Starts from a configuration drawn uniformly from the seed.
    pub fn random(boundary: BoundaryCondition, alphabet: &Alphabet, rng_seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        rng.set_stream(u64::MAX);
        let k = alphabet.size() as Symbol;
        let config = Configuration::from_fn(boundary.interior().clone(), |_| rng.gen_range(0..k));
        Self::new(boundary, config, rng_seed)
    }

    fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(self.sweep_count);
        rng
    }
}

/// Inverse-CDF draw from normalized log-probabilities.
fn draw(log_probs: &[f64], u: f64) -> Symbol {
    let mut acc = 0.0;
    for (z, lp) in log_probs.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return z as Symbol;
        }
    }
    (log_probs.len() - 1) as Symbol
}

fn update_site(
    state: &mut ChainState,
    m: &dyn OnePointEnergyModel,
    idx: usize,
    u: f64,
    scratch: &mut Vec<f64>,
) -> Result<Symbol> {
    let site = &state.window.sites()[idx];
    let env = Overlay {
        base: &state.boundary,
        config: &state.config,
        hole: Some(site),
    };
    kernel_log_probs(m, site, &env, scratch)?;
    let z = draw(scratch, u);
    state.config.set_at(idx, z);
    Ok(z)
}

/// One sweep in window order.
pub fn heat_bath_sweep(state: &mut ChainState, m: &dyn OnePointEnergyModel) -> Result<()> {
    sweep_with(state, m, Scan::Systematic, &mut |_, _, _| Ok(()))
}

/// One sweep; `visit(state, idx, z)` runs after site `idx` took the value
/// `z`. Everything but `idx` is still what the kernel conditioned on.
fn sweep_with(
    state: &mut ChainState,
    m: &dyn OnePointEnergyModel,
    scan: Scan,
    visit: &mut dyn FnMut(&ChainState, usize, Symbol) -> Result<()>,
) -> Result<()> {
    let n = state.window.len();
    let mut rng = state.rng();
    let mut scratch = Vec::with_capacity(m.alphabet().size());
    for step in 0..n {
        rng.set_word_pos(4 * step as u128);
        let idx = match scan {
            Scan::Systematic => step,
            Scan::Random => rng.gen_range(0..n),
        };
        let u: f64 = rng.gen();
        let z = update_site(state, m, idx, u, &mut scratch)?;
        visit(state, idx, z)?;
    }
    state.sweep_count += 1;
    Ok(())
}

/// Visit counts for one site under one neighbourhood pattern.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PatternCounts {
    pub site: Vec<i64>,
    pub neighbourhood: Vec<Vec<i64>>,
    /// Labels of the neighbourhood values, in neighbourhood order.
    pub pattern: Vec<String>,
    /// Counts per symbol, indexed by symbol.
    pub counts: Vec<u64>,
    pub visits: u64,
    #[serde(skip)]
    pub pattern_symbols: Vec<Symbol>,
}

impl PatternCounts {
    /// The neighbourhood pattern as a configuration.
    pub fn pattern_configuration(&self) -> Configuration {
        let w = Window::new(
            self.site.len(),
            self.neighbourhood.iter().map(|c| Site::new(c)),
        )
        .expect("neighbourhood sites are distinct");
        Configuration::new(w, self.pattern_symbols.clone()).expect("pattern matches neighbourhood")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleStats {
    pub alphabet: Vec<String>,
    pub sites: Vec<Vec<i64>>,
    pub recorded_sweeps: u64,
    pub site_conditional_counts: Vec<PatternCounts>,
    /// Window average of the numeric symbol values after each recorded sweep.
    pub magnetization_trace: Vec<f64>,
    /// Visits of each joint configuration, by [`Configuration::index`], when
    /// the state space has at most [`JOINT_COUNT_LIMIT`] elements.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint_counts: Option<Vec<u64>>,
}

impl SampleStats {
    pub fn mean_magnetization(&self) -> Option<f64> {
        if self.magnetization_trace.is_empty() {
            return None;
        }
        Some(self.magnetization_trace.iter().sum::<f64>() / self.magnetization_trace.len() as f64)
    }

    /// Empirical joint law over the window, if joint counts were kept.
    pub fn empirical_joint(&self) -> Option<Vec<f64>> {
        let counts = self.joint_counts.as_ref()?;
        let total = self.recorded_sweeps.max(1) as f64;
        Some(counts.iter().map(|c| *c as f64 / total).collect())
    }

    /// `sweep,magnetization` rows.
    pub fn magnetization_csv(&self) -> String {
        let mut out = String::from("sweep,magnetization\n");
        for (i, m) in self.magnetization_trace.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, m));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ChainOptions {
    pub scan: Scan,
}

/// Runs `sweeps` sweeps from a seeded random start and records statistics
/// for the sweeps after `burn_in`.
pub fn run_chain(
    m: &dyn OnePointEnergyModel,
    window: &Window,
    boundary: &BoundaryCondition,
    sweeps: u64,
    burn_in: u64,
    seed: u64,
) -> Result<SampleStats> {
    run_chain_with(m, window, boundary, sweeps, burn_in, seed, ChainOptions::default())
}

pub fn run_chain_with(
    m: &dyn OnePointEnergyModel,
    window: &Window,
    boundary: &BoundaryCondition,
    sweeps: u64,
    burn_in: u64,
    seed: u64,
    options: ChainOptions,
) -> Result<SampleStats> {
    if sweeps < burn_in {
        return Err(Error::validation(
            "sweeps",
            format!("{sweeps} sweeps is fewer than the burn-in {burn_in}"),
        ));
    }
    let boundary = if boundary.interior() == window {
        boundary.clone()
    } else {
        boundary.with_interior(window.clone())?
    };
    let alphabet = m.alphabet().clone();
    let k = alphabet.size();
    let mut state = ChainState::random(boundary, &alphabet, seed)?;

    let sites = window.sites();
    let neighbourhoods: Vec<Window> = sites
        .iter()
        .map(|t| match m.dependency_window(t) {
            Some(w) => w,
            None => window.filter(|s| s != t),
        })
        .collect();
    let values: Vec<f64> = alphabet.symbols().map(|z| alphabet.value(z)).collect();
    let joint_size = crate::lattice::configuration_count(window.len(), k)
        .filter(|n| *n <= JOINT_COUNT_LIMIT as u64)
        .map(|n| n as usize);

    let mut cond: HashMap<(usize, Vec<Symbol>), Vec<u64>> = HashMap::new();
    let mut joint = joint_size.map(|n| vec![0u64; n]);
    let mut trace = Vec::with_capacity((sweeps - burn_in) as usize);
    let mut pattern = Vec::new();

    for n in 0..sweeps {
        let record = n >= burn_in;
        if record {
            let mut visit = |st: &ChainState, idx: usize, z: Symbol| -> Result<()> {
                pattern.clear();
                let env = Overlay {
                    base: &st.boundary,
                    config: &st.config,
                    hole: Some(&sites[idx]),
                };
                for s in neighbourhoods[idx].sites() {
                    pattern.push(env.read(s)?);
                }
                match cond.get_mut(&(idx, pattern.clone())) {
                    Some(c) => c[usize::from(z)] += 1,
                    None => {
                        let mut c = vec![0u64; k];
                        c[usize::from(z)] = 1;
                        cond.insert((idx, pattern.clone()), c);
                    }
                }
                Ok(())
            };
            sweep_with(&mut state, m, options.scan, &mut visit)?;
            let total: f64 = state.config.values().iter().map(|z| values[usize::from(*z)]).sum();
            trace.push(total / window.len().max(1) as f64);
            if let Some(j) = joint.as_mut() {
                j[state.config.index(k)] += 1;
            }
        } else {
            sweep_with(&mut state, m, options.scan, &mut |_, _, _| Ok(()))?;
        }
    }

    let mut entries: Vec<_> = cond.into_iter().collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    let site_conditional_counts = entries
        .into_iter()
        .map(|((idx, pat), counts)| PatternCounts {
            site: sites[idx].coords().to_vec(),
            neighbourhood: neighbourhoods[idx].to_coordinate_lists(),
            pattern: pat.iter().map(|z| alphabet.label(*z).to_string()).collect(),
            visits: counts.iter().sum(),
            counts,
            pattern_symbols: pat,
        })
        .collect();

    Ok(SampleStats {
        alphabet: alphabet.labels().to_vec(),
        sites: window.to_coordinate_lists(),
        recorded_sweeps: sweeps - burn_in,
        site_conditional_counts,
        magnetization_trace: trace,
        joint_counts: joint,
    })
}

/// Independent chains, one per seed, run in parallel.
pub fn run_chains(
    m: &dyn OnePointEnergyModel,
    window: &Window,
    boundary: &BoundaryCondition,
    sweeps: u64,
    burn_in: u64,
    seeds: &[u64],
) -> Result<Vec<SampleStats>> {
    seeds
        .par_iter()
        .map(|seed| run_chain(m, window, boundary, sweeps, burn_in, *seed))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{DependencyRadius, FnOnePointModel};
    use crate::models::ising_model;

    #[test]
    fn empty_stats_when_no_sweeps_recorded() {
        let m = ising_model(1, 0.5, 0.0).unwrap();
        let w = Window::interval(0, 3);
        let b = BoundaryCondition::constant(w.clone(), 1);
        let s = run_chain(&m, &w, &b, 10, 10, 1).unwrap();
        assert_eq!(s.recorded_sweeps, 0);
        assert!(s.site_conditional_counts.is_empty());
        assert!(s.magnetization_trace.is_empty());
        assert!(run_chain(&m, &w, &b, 5, 10, 1).is_err());
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let m = ising_model(1, 0.4, 0.1).unwrap();
        let w = Window::interval(0, 7);
        let b = BoundaryCondition::constant(w.clone(), 0);
        let a = run_chain(&m, &w, &b, 300, 20, 42).unwrap();
        assert_eq!(a, run_chain(&m, &w, &b, 300, 20, 42).unwrap());
        assert_ne!(a, run_chain(&m, &w, &b, 300, 20, 43).unwrap());
    }

    #[test]
    fn zero_model_gives_uniform_marginals() {
        let m = FnOnePointModel {
            alphabet: Alphabet::binary(),
            dimension: 1,
            radius: DependencyRadius::Finite(0),
            f: |_: &Site, _: Symbol, _: Symbol, _: &dyn Environment| Ok(0.0),
        };
        let w = Window::interval(0, 0);
        let b = BoundaryCondition::constant(w.clone(), 0);
        let n = 20_000;
        let s = run_chain(&m, &w, &b, n, 0, 7).unwrap();
        let ones = s.joint_counts.unwrap()[1] as f64;
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((ones - n as f64 / 2.0).abs() < 3.0 * sigma);
    }

    #[test]
    fn field_only_ising_marginal() {
        let m = ising_model(1, 0.0, 0.3).unwrap();
        let w = Window::interval(0, 0);
        let b = BoundaryCondition::constant(w.clone(), 0);
        let n = 20_000u64;
        let s = run_chain(&m, &w, &b, n, 0, 11).unwrap();
        let p = 0.3f64.exp() / (0.3f64.exp() + (-0.3f64).exp());
        assert!((p - 0.645656).abs() < 1e-6);
        let plus = s.joint_counts.unwrap()[1] as f64 / n as f64;
        assert!((plus - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn random_scan_is_reproducible() {
        let m = ising_model(1, 0.4, 0.0).unwrap();
        let w = Window::interval(0, 5);
        let b = BoundaryCondition::constant(w.clone(), 1);
        let o = ChainOptions { scan: Scan::Random };
        let a = run_chain_with(&m, &w, &b, 200, 0, 3, o).unwrap();
        assert_eq!(a, run_chain_with(&m, &w, &b, 200, 0, 3, o).unwrap());
        let visits: u64 = a.site_conditional_counts.iter().map(|p| p.visits).sum();
        assert_eq!(visits, 200 * 6);
    }
}
