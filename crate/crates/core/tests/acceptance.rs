//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tefield::canonical::{
    canonical_delta_trace, check_kolmogorov_consistency, diagnose, fdd_bernoulli,
    fdd_bernoulli_mixture, fdd_exchangeable, fdd_markov_pair, BlockBoundary, DiagnoseOptions,
    FddModel, GibbsMarginals, PeriodicBoundary, Schedule, Verdict,
};
use tefield::energy::{
    assemble_delta, assemble_delta_ordered, check_onepoint_consistency, delta_from_distribution,
    OnePointEnergyModel, TransitionEnergyTable,
};
use tefield::lattice::{
    enumerate_configurations, Alphabet, BoundaryCondition, Configuration, Metric, Site, Symbol,
    Tail, Window,
};
use tefield::models::{ising_model, widom_rowlinson_onepoint, TabulatedOnePointModel};
use tefield::potential::{relative_hamiltonian, FiniteRangePotential, PotentialTerm};
use tefield::sampler::run_chain;
use tefield::specification::{
    check_dobrushin_consistency, check_dobrushin_ratio_consistency, check_kernel_consistency,
    gibbs_distribution, onepoint_kernel, reconstruct_spec, EnergyKernels, ProbabilityTable,
    ReconstructOptions, SpecificationFamily,
};
use tefield::uniqueness::{delta_uniqueness_coefficient, dobrushin_coefficient};

fn verdict(n: u32, pass: bool, detail: String) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {detail}");
}

fn alphabet(k: usize) -> Alphabet {
    Alphabet::new((0..k).map(|i| i.to_string()).collect()).unwrap()
}

fn site(c: &[i64]) -> Site {
    Site::new(c)
}

/// Sites outside `window` read by the kernels of its sites.
fn annulus_of(m: &dyn OnePointEnergyModel, window: &Window) -> Window {
    let mut sites: Vec<Site> = window
        .sites()
        .iter()
        .flat_map(|t| m.dependency_window(t).unwrap().sites().to_vec())
        .filter(|s| !window.contains(s))
        .collect();
    sites.sort();
    sites.dedup();
    Window::new(window.dimension(), sites).unwrap()
}

fn random_config(w: &Window, k: usize, rng: &mut ChaCha8Rng) -> Configuration {
    Configuration::from_fn(w.clone(), |_| rng.gen_range(0..k as Symbol))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn criterion_1_gibbs_bijection() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut forward, mut anchors, mut reverse) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=3);
        let k = rng.gen_range(2..=3);
        let a = alphabet(k);
        let w = Window::interval(0, n - 1);
        let configs: Vec<Configuration> = enumerate_configurations(&w, &a).unwrap().collect();

        let weights: Vec<f64> = configs.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
        let z: f64 = weights.iter().sum();
        let p = ProbabilityTable::new(w.clone(), a.clone(), weights.iter().map(|v| v / z).collect())
            .unwrap();
        let delta = TransitionEnergyTable::from_fn(w.clone(), a.clone(), |x, u| {
            delta_from_distribution(&p, x, u)
        })
        .unwrap();
        let first = gibbs_distribution(&delta, &configs[0]).unwrap();
        for anchor in &configs {
            let g = gibbs_distribution(&delta, anchor).unwrap();
            for (x, y) in g.probs().iter().zip(p.probs()) {
                forward = forward.max((x - y).abs());
            }
            for (x, y) in g.probs().iter().zip(first.probs()) {
                anchors = anchors.max((x - y).abs());
            }
        }

        let energies: Vec<f64> = configs.iter().map(|_| rng.gen_range(-3.0..3.0)).collect();
        let table = TransitionEnergyTable::from_energies(w.clone(), a.clone(), &energies).unwrap();
        let q = gibbs_distribution(&table, &configs[0]).unwrap();
        for x in &configs {
            for u in &configs {
                let back = delta_from_distribution(&q, x, u).unwrap();
                reverse = reverse.max((back - table.get(x, u).unwrap()).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        1,
        forward < 1e-12 && anchors < 1e-12 && reverse < 1e-12 && elapsed < Duration::from_secs(10),
        format!(
            "distribution round trip {forward:.2e}, anchor spread {anchors:.2e}, energy round trip {reverse:.2e}, {elapsed:.2?}"
        ),
    );
}

#[test]
fn criterion_2_order_independent_assembly() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ising1 = ising_model(1, 0.4, 0.2).unwrap();
    let ising2 = ising_model(2, 0.3, -0.1).unwrap();
    let wr1 = widom_rowlinson_onepoint(1, 1, 0.3, 0.7, Metric::Chebyshev).unwrap();
    let wr2 = widom_rowlinson_onepoint(2, 1, -0.2, 0.5, Metric::Manhattan).unwrap();

    let windows_1d: Vec<Window> = (1..=4).map(|n| Window::interval(0, n - 1)).collect();
    let windows_2d = vec![
        Window::cuboid(&[0, 0], &[1, 0]).unwrap(),
        Window::cuboid(&[0, 0], &[1, 1]).unwrap(),
        Window::new(2, [site(&[0, 0]), site(&[1, 0]), site(&[1, 1])]).unwrap(),
    ];
    let cases: Vec<(&dyn OnePointEnergyModel, Option<&FiniteRangePotential>, &Vec<Window>)> = vec![
        (&ising1, Some(&ising1), &windows_1d),
        (&ising2, Some(&ising2), &windows_2d),
        (&wr1, None, &windows_1d),
        (&wr2, None, &windows_2d),
    ];

    let (mut spread, mut oracle, mut evaluations) = (0.0f64, 0.0f64, 0usize);
    for (m, phi, windows) in cases {
        let a = m.alphabet().clone();
        for w in windows {
            let orders = permutations(w.len());
            let annulus = annulus_of(m, w);
            for _ in 0..4 {
                let b = BoundaryCondition::new(
                    w.clone(),
                    random_config(&annulus, a.size(), &mut rng),
                    Tail::Free,
                )
                .unwrap();
                for _ in 0..8 {
                    let x = random_config(w, a.size(), &mut rng);
                    let u = random_config(w, a.size(), &mut rng);
                    let reference = assemble_delta(m, w, &x, &u, &b).unwrap();
                    for o in &orders {
                        let v = assemble_delta_ordered(m, w, &x, &u, &b, o).unwrap();
                        spread = spread.max((v - reference).abs());
                        evaluations += 1;
                    }
                    if let Some(phi) = phi {
                        let h = relative_hamiltonian(phi, &x, &u, &b).unwrap();
                        oracle = oracle.max((h - reference).abs());
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        2,
        spread < 1e-10 && oracle < 1e-10 && elapsed < Duration::from_secs(30),
        format!(
            "order spread {spread:.2e} over {evaluations} assemblies, Ising relative Hamiltonian gap {oracle:.2e}, {elapsed:.2?}"
        ),
    );
}

#[test]
fn criterion_3_reconstruction_matches_gibbs() {
    let start = Instant::now();
    let ising1 = ising_model(1, 0.6, 0.15).unwrap();
    let ising2 = ising_model(2, 0.35, 0.05).unwrap();
    let windows: Vec<(&FiniteRangePotential, Window)> = vec![
        (&ising1, Window::interval(0, 0)),
        (&ising1, Window::interval(0, 1)),
        (&ising1, Window::interval(0, 2)),
        (&ising1, Window::interval(0, 3)),
        (&ising1, Window::new(1, [site(&[0]), site(&[2]), site(&[3])]).unwrap()),
        (&ising2, Window::singleton(site(&[0, 0]))),
        (&ising2, Window::cuboid(&[0, 0], &[1, 0]).unwrap()),
        (&ising2, Window::cuboid(&[0, 0], &[1, 1]).unwrap()),
        (&ising2, Window::cuboid(&[0, 0], &[3, 0]).unwrap()),
    ];
    let (mut worst, mut boundaries) = (0.0f64, 0usize);
    for (phi, w) in &windows {
        let annulus = annulus_of(*phi, w);
        for c in enumerate_configurations(&annulus, phi.alphabet()).unwrap() {
            let b = BoundaryCondition::new(w.clone(), c, Tail::Free).unwrap();
            let rebuilt = reconstruct_spec(*phi, w, &b, &ReconstructOptions::default()).unwrap();
            let direct = phi.distribution(w, &b).unwrap();
            worst = worst.max(rebuilt.total_variation(&direct).unwrap());
            boundaries += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        3,
        worst < 1e-12 && elapsed < Duration::from_secs(60),
        format!("worst total variation {worst:.2e} over {boundaries} boundaries, {elapsed:.2?}"),
    );
}

/// Random pair potential on `Z` with range 1 or 2.
fn random_potential(k: usize, rng: &mut ChaCha8Rng) -> FiniteRangePotential {
    let range = rng.gen_range(1..=2);
    let single = PotentialTerm {
        sites: vec![site(&[0])],
        values: (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        translate: true,
    };
    let pair = PotentialTerm {
        sites: vec![site(&[0]), site(&[range])],
        values: (0..k * k).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        translate: true,
    };
    FiniteRangePotential::new(alphabet(k), 1, range as u32, vec![single, pair]).unwrap()
}

/// A specification whose two-site distributions are tilted by a
/// configuration-dependent factor, breaking consistency with the rest.
struct Tilted<'a> {
    base: &'a FiniteRangePotential,
    tilt: Vec<f64>,
}

impl SpecificationFamily for Tilted<'_> {
    fn alphabet(&self) -> &Alphabet {
        self.base.alphabet()
    }
    fn distribution(
        &self,
        window: &Window,
        boundary: &BoundaryCondition,
    ) -> tefield::Result<ProbabilityTable> {
        let p = self.base.distribution(window, boundary)?;
        if window.len() != 2 {
            return Ok(p);
        }
        let w: Vec<f64> = p
            .probs()
            .iter()
            .enumerate()
            .map(|(i, v)| v.ln() + self.tilt[i % self.tilt.len()])
            .collect();
        ProbabilityTable::from_log_weights(window.clone(), p.alphabet().clone(), &w)
    }
}

fn subsets(w: &Window) -> Vec<Window> {
    let n = w.len();
    (1..(1usize << n))
        .map(|mask| w.filter(|s| mask >> w.position(s).unwrap() & 1 == 1))
        .collect()
}

/// Pass/fail of the two Dobrushin systems over every `(V', I)` with
/// `I ⊂ V' ⊆ V` proper and nonempty.
fn dobrushin_systems(q: &dyn SpecificationFamily, v: &Window, outer: &Configuration) -> (bool, bool) {
    let tol = 1e-9;
    let (mut dcc, mut ratio) = (true, true);
    for vp in subsets(v).into_iter().filter(|s| s.len() >= 2) {
        let rest = Window::new(
            1,
            outer
                .window()
                .sites()
                .iter()
                .filter(|s| !vp.contains(s))
                .cloned(),
        )
        .unwrap();
        let b = BoundaryCondition::new(vp.clone(), outer.restrict(&rest).unwrap(), Tail::Fixed(0))
            .unwrap();
        for i in subsets(&vp).into_iter().filter(|i| i.len() < vp.len()) {
            dcc &= check_dobrushin_consistency(q, &vp, &i, &b, tol).unwrap().passed;
            ratio &= check_dobrushin_ratio_consistency(q, &vp, &i, &b, tol).unwrap().passed;
        }
    }
    (dcc, ratio)
}

/// Nearest-neighbour tabulated model; symmetric couplings give a consistent
/// field, a mismatch between left and right couplings an inconsistent one.
fn tabulated(k: usize, consistent: bool, rng: &mut ChaCha8Rng) -> TabulatedOnePointModel {
    let h: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut j = vec![0.0; k * k];
    for a in 0..k {
        for b in a..k {
            let v = rng.gen_range(-1.0..1.0);
            j[a * k + b] = v;
            j[b * k + a] = v;
        }
    }
    let mut right = j.clone();
    if !consistent {
        for v in &mut right {
            *v += rng.gen_range(-0.5..0.5);
        }
    }
    // Row (l, r), column z: h_z + J(z, l) + J'(z, r).
    let mut energies = Vec::new();
    for l in 0..k {
        for r in 0..k {
            energies.push((0..k).map(|z| h[z] + j[z * k + l] + right[z * k + r]).collect());
        }
    }
    TabulatedOnePointModel::new(alphabet(k), 1, vec![site(&[-1]), site(&[1])], energies).unwrap()
}

#[test]
fn criterion_4_equivalent_consistency_systems() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let v = Window::interval(0, 2);
    let area = Window::interval(-2, 4);
    let (mut spec_agree, mut spec_fail, mut one_agree, mut one_fail) = (0, 0, 0, 0);
    let families = 500;
    for n in 0..families {
        let consistent = n % 2 == 0;
        let k = rng.gen_range(2..=3);
        let phi = random_potential(k, &mut rng);
        let outer = random_config(&area, k, &mut rng);
        let (dcc, ratio) = if consistent {
            dobrushin_systems(&phi, &v, &outer)
        } else {
            let tilt = (0..k * k).map(|_| rng.gen_range(-0.5..0.5)).collect();
            dobrushin_systems(&Tilted { base: &phi, tilt }, &v, &outer)
        };
        spec_agree += usize::from(dcc == ratio);
        spec_fail += usize::from(!dcc);

        let m = tabulated(k, consistent, &mut rng);
        let t = site(&[0]);
        let mut energy_pass = true;
        let mut kernel_pass = true;
        for s in [site(&[1]), site(&[-1])] {
            let both = Window::new(1, [t.clone(), s.clone()]).unwrap();
            let annulus = annulus_of(&m, &both);
            let b = BoundaryCondition::new(both, random_config(&annulus, k, &mut rng), Tail::Free)
                .unwrap();
            energy_pass &= check_onepoint_consistency(&m, &t, &s, &b, 1e-9).unwrap().passed;
            kernel_pass &= check_kernel_consistency(&EnergyKernels(&m), &t, &s, &b, 1e-9)
                .unwrap()
                .passed;
        }
        one_agree += usize::from(energy_pass == kernel_pass);
        one_fail += usize::from(!energy_pass);
    }
    let elapsed = start.elapsed();
    verdict(
        4,
        spec_agree == families && one_agree == families,
        format!(
            "Dobrushin systems agree {spec_agree}/{families} ({spec_fail} rejected), one-point systems agree {one_agree}/{families} ({one_fail} rejected), {elapsed:.2?}"
        ),
    );
}

#[test]
fn criterion_5_uniqueness_coefficients() {
    let free = ising_model(1, 0.0, 0.0).unwrap();
    let zero = dobrushin_coefficient(&free, 1).unwrap().coefficient;
    let (mut gap, mut dominated, mut threshold) = (0.0f64, true, true);
    let mut rows = Vec::new();
    for i in 1..=9 {
        let beta = i as f64 / 20.0;
        let m = ising_model(1, beta, 0.0).unwrap();
        let delta = delta_uniqueness_coefficient(&m, 1).unwrap();
        let dob = dobrushin_coefficient(&m, 1).unwrap();
        gap = gap.max((delta.coefficient - 4.0 * beta).abs());
        dominated &= delta.coefficient >= dob.coefficient;
        threshold &= delta.satisfied == (beta < 0.25);
        rows.push(format!("{beta}:{:.4}/{:.4}", delta.coefficient, dob.coefficient));
    }
    verdict(
        5,
        zero == 0.0 && gap < 1e-10 && dominated && threshold,
        format!(
            "free-field Dobrushin {zero}, |delta - 4 beta| {gap:.2e}, domination {dominated}, threshold {threshold} [{}]",
            rows.join(" ")
        ),
    );
}

#[test]
fn criterion_6_exchangeable_traces() {
    let f = fdd_exchangeable();
    let t = site(&[0]);
    let mut parts = Vec::new();
    let mut pass = true;
    for k in [2i64, 3, 4] {
        let p = 1.0 / k as f64;
        let target = (p / (1.0 - p)).ln();
        // Radius 5000 gives |Λ| = 10^4.
        let schedule = Schedule::Balls {
            radii: (4990..=5000).collect(),
            metric: Metric::Chebyshev,
        };
        let trace = canonical_delta_trace(
            &f,
            &t,
            1,
            0,
            &PeriodicBoundary { period: k },
            &schedule,
            &DiagnoseOptions::default(),
        )
        .unwrap();
        let last = *trace.values.last().unwrap();
        assert_eq!(*trace.sizes.last().unwrap(), 10_000);
        let err = (last - target).abs();
        pass &= err < 1e-6;
        parts.push(format!("k={k} error {err:.2e} at |Λ|=10^4"));
    }
    let blocks = BlockBoundary { center: t.clone(), base: 10 };
    // Six block ends give the stability window enough values.
    let schedule = Schedule::Balls {
        radii: blocks.block_ends(111_111),
        metric: Metric::Chebyshev,
    };
    let options = DiagnoseOptions {
        blowup: 1.0,
        ..DiagnoseOptions::default()
    };
    let trace = canonical_delta_trace(&f, &t, 1, 0, &blocks, &schedule, &options).unwrap();
    let oscillating = matches!(trace.verdict, Verdict::Oscillating { .. });
    pass &= oscillating;
    parts.push(format!("block boundary verdict {:?} (blowup 1)", trace.verdict));
    verdict(6, pass, parts.join(", "));
}

#[test]
fn criterion_7_mixture_swings() {
    let start = Instant::now();
    let f = fdd_bernoulli_mixture(0.5, 0.25, 0.75).unwrap();
    let t = site(&[0]);
    let blocks = BlockBoundary { center: t.clone(), base: 10 };
    // Block ends with |Λ| = 2r ≤ 10^4.
    let ends = blocks.block_ends(5000);
    let schedule = Schedule::Balls {
        radii: ends.clone(),
        metric: Metric::Chebyshev,
    };
    let trace =
        canonical_delta_trace(&f, &t, 1, 0, &blocks, &schedule, &DiagnoseOptions::default())
            .unwrap();
    let max = trace.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = trace.values.iter().copied().fold(f64::INFINITY, f64::min);

    // The exponent |Λ| f_Λ driving the ratio, at the same volumes.
    let drivers: Vec<f64> = ends
        .iter()
        .map(|r| {
            let w = Window::ball(&t, *r, Metric::Chebyshev).filter(|s| *s != t);
            let m = w.sites().iter().filter(|s| tefield::canonical::BoundaryGenerator::value(&blocks, s) == 1).count();
            f.log_likelihood_ratio(w.len(), m)
        })
        .collect();

    let longer = Schedule::Balls {
        radii: blocks.block_ends(111_111),
        metric: Metric::Chebyshev,
    };
    let configured = DiagnoseOptions {
        blowup: 1.0,
        ..DiagnoseOptions::default()
    };
    let extended = canonical_delta_trace(&f, &t, 1, 0, &blocks, &longer, &configured).unwrap();
    let elapsed = start.elapsed();
    let oscillating = matches!(extended.verdict, Verdict::Oscillating { .. });
    verdict(
        7,
        max > 50.0 && min < -50.0 && oscillating && elapsed < Duration::from_secs(5),
        format!(
            "trace range [{min:.4}, {max:.4}] at block ends {ends:?}, exponent |Λ|f_Λ {drivers:.1?}, verdict over six block ends at blowup 1 {:?}, {elapsed:.2?}",
            extended.verdict
        ),
    );
}

#[test]
fn criterion_8_markov_pair_same_ratios() {
    let plus = fdd_markov_pair(1.0, true).unwrap();
    let minus = fdd_markov_pair(1.0, false).unwrap();
    let c = |j: i64| (-(2f64.powi(-(j as i32)))).exp();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut sign_gap, mut formula_gap, mut windows) = (0.0f64, 0.0f64, 0usize);
    for t in 2..=10i64 {
        let ts = site(&[t]);
        let mut lambdas: Vec<Window> = ((t + 1)..=50)
            .map(|n| Window::interval(1, n).filter(|s| *s != ts))
            .collect();
        for _ in 0..100 {
            let len = rng.gen_range(2..=49usize);
            let mut sites = vec![t - 1, t + 1];
            while sites.len() < len {
                let s = rng.gen_range(1..=50);
                if s != t && !sites.contains(&s) {
                    sites.push(s);
                }
            }
            lambdas.push(Window::new(1, sites.iter().map(|s| site(&[*s]))).unwrap());
        }
        for lambda in &lambdas {
            windows += 1;
            let y = random_config(lambda, 2, &mut rng);
            let yl = y.get(&site(&[t - 1])).unwrap();
            let yr = y.get(&site(&[t + 1])).unwrap();
            let spin = |s: Symbol| if s == 1 { 1.0 } else { -1.0 };
            for (x, u) in [(1, 0), (0, 1)] {
                let direct = |f: &dyn FddModel| {
                    let xy = Configuration::single(ts.clone(), x).concat(&y).unwrap();
                    let uy = Configuration::single(ts.clone(), u).concat(&y).unwrap();
                    f.ln_prob(&xy).unwrap() - f.ln_prob(&uy).unwrap()
                };
                let values = [
                    plus.ln_ratio(&ts, x, u, &y).unwrap(),
                    minus.ln_ratio(&ts, x, u, &y).unwrap(),
                    direct(&plus),
                    direct(&minus),
                ];
                let (sx, su) = (spin(x), spin(u));
                let formula = ((1.0 + c(t - 1) * spin(yl) * sx) * (1.0 + c(t) * sx * spin(yr))
                    / ((1.0 + c(t - 1) * spin(yl) * su) * (1.0 + c(t) * su * spin(yr))))
                .ln();
                for v in values {
                    sign_gap = sign_gap.max((v - values[0]).abs());
                    formula_gap = formula_gap.max((v - formula).abs());
                }
            }
        }
    }
    verdict(
        8,
        sign_gap < 1e-12 && formula_gap < 1e-12,
        format!("sign gap {sign_gap:.2e}, two-factor formula gap {formula_gap:.2e} over {windows} windows"),
    );
}

#[test]
fn criterion_9_sampler_matches_exact_joint() {
    let start = Instant::now();
    let m = ising_model(1, 0.4, 0.1).unwrap();
    let w = Window::interval(0, 3);
    let plus = m.alphabet().symbol("+1").unwrap();
    let b = BoundaryCondition::constant(w.clone(), plus);
    let stats = run_chain(&m, &w, &b, 1_000_000, 1_000, 2024).unwrap();
    let exact = reconstruct_spec(&m, &w, &b, &ReconstructOptions::default()).unwrap();
    let empirical = stats.empirical_joint().unwrap();
    let tv = 0.5
        * empirical
            .iter()
            .zip(exact.probs())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();

    let (mut worst_ratio, mut patterns) = (0.0f64, 0usize);
    for pc in &stats.site_conditional_counts {
        if pc.visits < 200 {
            continue;
        }
        patterns += 1;
        let t = site(&pc.site);
        let env = BoundaryCondition::new(
            Window::singleton(t.clone()),
            pc.pattern_configuration(),
            Tail::Free,
        )
        .unwrap();
        let kernel = onepoint_kernel(&m, &t, &env).unwrap();
        let bound = 4.0 / (pc.visits as f64).sqrt();
        for (count, p) in pc.counts.iter().zip(&kernel.probs) {
            let dev = (*count as f64 / pc.visits as f64 - p).abs();
            worst_ratio = worst_ratio.max(dev / bound);
        }
    }
    let elapsed = start.elapsed();
    verdict(
        9,
        tv < 0.02 && worst_ratio < 1.0 && patterns > 0 && elapsed < Duration::from_secs(60),
        format!(
            "joint total variation {tv:.2e}, worst conditional deviation {worst_ratio:.3} of 4/sqrt(visits) over {patterns} patterns, {elapsed:.2?}"
        ),
    );
}

#[test]
fn criterion_10_kolmogorov_consistency() {
    let ising = ising_model(1, 0.5, 0.2).unwrap();
    let host = Window::interval(1, 5);
    let b = BoundaryCondition::constant(host.clone(), 0);
    let gibbs =
        GibbsMarginals::new(reconstruct_spec(&ising, &host, &b, &ReconstructOptions::default()).unwrap());
    let models: Vec<Box<dyn FddModel>> = vec![
        Box::new(fdd_bernoulli(0.3).unwrap()),
        Box::new(fdd_exchangeable()),
        Box::new(fdd_bernoulli_mixture(0.5, 0.25, 0.75).unwrap()),
        Box::new(fdd_markov_pair(1.0, true).unwrap()),
        Box::new(fdd_markov_pair(1.0, false).unwrap()),
        Box::new(gibbs),
    ];
    let windows: Vec<Window> = subsets(&host).into_iter().filter(|w| w.len() <= 3).collect();
    let mut worst = 0.0f64;
    let mut names = Vec::new();
    for f in &models {
        for w in &windows {
            let r = check_kolmogorov_consistency(f.as_ref(), w, 1e-12).unwrap();
            worst = worst.max(r.worst_violation);
        }
        names.push(f.name().to_string());
    }
    verdict(
        10,
        worst < 1e-12,
        format!("worst marginalization residual {worst:.2e} over {} windows for {}", windows.len(), names.join(", ")),
    );
}

#[test]
fn diagnose_reads_the_mixture_swing_as_oscillation() {
    // The same rule the acceptance traces use, on the textbook swing.
    let swings: Vec<f64> = (1..60)
        .map(|n| n as f64 * if n % 2 == 0 { 1.0 } else { -1.0 } * 3f64.ln())
        .collect();
    assert!(matches!(
        diagnose(&swings, &DiagnoseOptions::default()).unwrap(),
        Verdict::Oscillating { .. }
    ));
}
