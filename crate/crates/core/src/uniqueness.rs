//! Dobrushin-type uniqueness coefficients of a one-point field.
//!
//! Both coefficients are `sup_t Σ_{s≠t} sup_{x̄,ȳ differ only at s} D(x̄, ȳ)`
//! where `D` is the total variation of the one-point kernels (Dobrushin) or
//! half the largest difference of one-point energies (the energy variant).
//! The inner sup is taken over every configuration of the dependency
//! neighbourhood of `t`, which is exact for finite-range models.

use rayon::prelude::*;
use serde::Serialize;

use crate::energy::{DependencyRadius, OnePointEnergyModel};
use crate::error::{Error, Result};
use crate::lattice::{
    check_budget, BoundaryCondition, Configuration, Metric, Site, Tail, Window,
    DEFAULT_ENUMERATION_BUDGET,
};
use crate::specification::{onepoint_kernel, OnePointKernel};

/// `½ Σ_x |p(x) - q(x)|`.
pub fn tv_distance(p: &OnePointKernel, q: &OnePointKernel) -> Result<f64> {
    if p.probs.len() != q.probs.len() {
        return Err(Error::AlphabetMismatch(format!(
            "kernels over {} and {} symbols",
            p.probs.len(),
            q.probs.len()
        )));
    }
    if p.site != q.site {
        return Err(Error::validation(
            "kernel",
            format!("kernels at different sites {} and {}", p.site, q.site),
        ));
    }
    Ok(0.5 * p.probs.iter().zip(&q.probs).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UniquenessMethod {
    Dobrushin,
    Delta,
}

/// Sensitivity of the kernel at `site` to the boundary value at `site + offset`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairContribution {
    pub site: Vec<i64>,
    pub offset: Vec<i64>,
    pub contribution: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub method: UniquenessMethod,
    pub coefficient: f64,
    pub satisfied: bool,
    pub per_pair_contributions: Vec<PairContribution>,
    pub truncation_radius: u32,
    /// The neighbourhood was cut at `truncation_radius`, so the coefficient is
    /// only a lower bound.
    pub truncated: bool,
}

pub fn dobrushin_coefficient(
    m: &dyn OnePointEnergyModel,
    truncation_radius: u32,
) -> Result<UniquenessReport> {
    coefficient(m, truncation_radius, UniquenessMethod::Dobrushin, DEFAULT_ENUMERATION_BUDGET)
}

pub fn delta_uniqueness_coefficient(
    m: &dyn OnePointEnergyModel,
    truncation_radius: u32,
) -> Result<UniquenessReport> {
    coefficient(m, truncation_radius, UniquenessMethod::Delta, DEFAULT_ENUMERATION_BUDGET)
}

/// Either coefficient with an explicit enumeration budget.
pub fn coefficient(
    m: &dyn OnePointEnergyModel,
    truncation_radius: u32,
    method: UniquenessMethod,
    budget: u64,
) -> Result<UniquenessReport> {
    let exact = matches!(m.dependency_radius(), DependencyRadius::Finite(r) if r <= truncation_radius);
    let mut contributions = Vec::new();
    let mut sup = 0.0f64;
    for t in m.reference_sites() {
        let (neigh, tail) = match (exact, m.dependency_window(&t)) {
            (true, Some(w)) => (w, Tail::Free),
            _ => (
                Window::punctured_ball(&t, u64::from(truncation_radius), Metric::Chebyshev),
                Tail::Fixed(0),
            ),
        };
        let per_site = site_contributions(m, &t, &neigh, tail, method, budget)?;
        let total: f64 = per_site.iter().sum();
        sup = sup.max(total);
        for (s, c) in neigh.sites().iter().zip(per_site) {
            contributions.push(PairContribution {
                site: t.coords().to_vec(),
                offset: s.offset_from(&t).coords().to_vec(),
                contribution: c,
            });
        }
    }
    Ok(UniquenessReport {
        method,
        coefficient: sup,
        satisfied: sup < 1.0,
        per_pair_contributions: contributions,
        truncation_radius,
        truncated: !exact,
    })
}

/// For each site of `neigh`, the sup of the sensitivity over boundary pairs
/// differing only there.
fn site_contributions(
    m: &dyn OnePointEnergyModel,
    t: &Site,
    neigh: &Window,
    tail: Tail,
    method: UniquenessMethod,
    budget: u64,
) -> Result<Vec<f64>> {
    let k = m.alphabet().size();
    let total = check_budget(neigh.len(), k, budget)?;
    let interior = Window::singleton(t.clone());
    // One signature per boundary configuration: kernel probabilities, or the
    // energies δ_t(x, y) for x < y.
    let signatures: Vec<Vec<f64>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let annulus = Configuration::from_index(neigh.clone(), k, idx);
            let b = BoundaryCondition::new(interior.clone(), annulus, tail)?;
            match method {
                UniquenessMethod::Dobrushin => Ok(onepoint_kernel(m, t, &b)?.probs),
                UniquenessMethod::Delta => {
                    let mut out = Vec::with_capacity(k * (k - 1) / 2);
                    for x in m.alphabet().symbols() {
                        for y in m.alphabet().symbols().filter(|y| *y > x) {
                            out.push(m.evaluate(t, x, y, &b)?);
                        }
                    }
                    Ok(out)
                }
            }
        })
        .collect::<Result<_>>()?;

    let distance = |a: &[f64], b: &[f64]| -> f64 {
        let diffs = a.iter().zip(b).map(|(p, q)| (p - q).abs());
        match method {
            UniquenessMethod::Dobrushin => 0.5 * diffs.sum::<f64>(),
            UniquenessMethod::Delta => 0.5 * diffs.fold(0.0, f64::max),
        }
    };

    let n = neigh.len();
    (0..n)
        .into_par_iter()
        .map(|j| {
            let stride = k.pow((n - 1 - j) as u32);
            let mut worst = 0.0f64;
            for idx in 0..total {
                let digit = (idx / stride) % k;
                for other in digit + 1..k {
                    let jdx = idx + (other - digit) * stride;
                    worst = worst.max(distance(&signatures[idx], &signatures[jdx]));
                }
            }
            Ok(worst)
        })
        .collect()
}
