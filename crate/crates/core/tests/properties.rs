use proptest::prelude::*;

use tefield::energy::{
    assemble_delta, check_cocycle, OnePointEnergyModel, TransitionEnergyTable,
};
use tefield::lattice::{BoundaryCondition, Configuration, Metric, Site, Symbol, Tail, Window};
use tefield::models::{ising_model, widom_rowlinson_onepoint};
use tefield::potential::relative_hamiltonian;
use tefield::specification::{gibbs_distribution, onepoint_kernel, ProbabilityTable};
use tefield::uniqueness::{delta_uniqueness_coefficient, dobrushin_coefficient};

fn interval_config(lo: i64, values: Vec<Symbol>) -> Configuration {
    let w = Window::interval(lo, lo + values.len() as i64 - 1);
    Configuration::new(w, values).unwrap()
}

fn spins(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Symbol>> {
    prop::collection::vec(0u8..2, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn concat_then_restrict_recovers_parts(a in spins(1..6), b in spins(1..6)) {
        let x = interval_config(0, a.clone());
        let y = interval_config(10, b.clone());
        let xy = x.concat(&y).unwrap();
        prop_assert_eq!(xy.window().len(), a.len() + b.len());
        prop_assert_eq!(xy.restrict(x.window()).unwrap(), x.clone());
        prop_assert_eq!(xy.restrict(y.window()).unwrap(), y.clone());
        prop_assert_eq!(y.concat(&x).unwrap(), xy);
    }

    #[test]
    fn index_round_trips(values in prop::collection::vec(0u8..3, 1..7)) {
        let x = interval_config(-3, values);
        let i = x.index(3);
        prop_assert_eq!(Configuration::from_index(x.window().clone(), 3, i), x);
    }

    #[test]
    fn energy_tables_are_cocycles(energies in prop::collection::vec(-5.0f64..5.0, 8)) {
        let w = Window::interval(0, 2);
        let t = TransitionEnergyTable::from_energies(w, tefield::lattice::Alphabet::binary(), &energies)
            .unwrap();
        prop_assert!(check_cocycle(&t, 1e-12).unwrap().passed);
    }

    #[test]
    fn gibbs_tables_are_normalized(energies in prop::collection::vec(-20.0f64..20.0, 9)) {
        let w = Window::interval(0, 1);
        let a = tefield::lattice::Alphabet::new(vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let t = TransitionEnergyTable::from_energies(w.clone(), a.clone(), &energies).unwrap();
        let p = gibbs_distribution(&t, &Configuration::constant(w, 0)).unwrap();
        let sum: f64 = p.probs().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(p.probs().iter().all(|v| *v > 0.0));
    }

    #[test]
    fn marginals_sum_to_one(weights in prop::collection::vec(0.01f64..1.0, 8)) {
        let w = Window::interval(0, 2);
        let z: f64 = weights.iter().sum();
        let p = ProbabilityTable::new(
            w,
            tefield::lattice::Alphabet::binary(),
            weights.iter().map(|v| v / z).collect(),
        )
        .unwrap();
        let m = p.marginal(&Window::new(1, [Site::new(&[0]), Site::new(&[2])]).unwrap()).unwrap();
        prop_assert_eq!(m.probs().len(), 4);
        prop_assert!((m.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ising_kernels_are_normalized_and_flip_symmetric(
        beta in -1.5f64..1.5,
        h in -1.0f64..1.0,
        left in 0u8..2,
        right in 0u8..2,
    ) {
        let m = ising_model(1, beta, h).unwrap();
        let mirror = ising_model(1, beta, -h).unwrap();
        let t = Site::new(&[0]);
        let env = |l: Symbol, r: Symbol| {
            BoundaryCondition::new(
                Window::singleton(t.clone()),
                Configuration::new(
                    Window::new(1, [Site::new(&[-1]), Site::new(&[1])]).unwrap(),
                    vec![l, r],
                )
                .unwrap(),
                Tail::Free,
            )
            .unwrap()
        };
        let q = onepoint_kernel(&m, &t, &env(left, right)).unwrap();
        prop_assert!((q.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // Flipping every spin and the field swaps the two probabilities.
        let flipped = onepoint_kernel(&mirror, &t, &env(1 - left, 1 - right)).unwrap();
        prop_assert!((q.prob(1) - flipped.prob(0)).abs() < 1e-12);
    }

    #[test]
    fn assembled_delta_is_antisymmetric_and_matches_hamiltonian(
        beta in -1.0f64..1.0,
        h in -1.0f64..1.0,
        x in spins(3..4),
        u in spins(3..4),
        outside in 0u8..2,
    ) {
        let m = ising_model(1, beta, h).unwrap();
        let x = interval_config(0, x);
        let u = interval_config(0, u);
        let b = BoundaryCondition::constant(x.window().clone(), outside);
        let xu = assemble_delta(&m, x.window(), &x, &u, &b).unwrap();
        let ux = assemble_delta(&m, x.window(), &u, &x, &b).unwrap();
        prop_assert!((xu + ux).abs() < 1e-12);
        let h = relative_hamiltonian(&m, &x, &u, &b).unwrap();
        prop_assert!((xu - h).abs() < 1e-12);
    }

    #[test]
    fn widom_rowlinson_delta_grows_with_uncovered_sites(
        alpha in -1.0f64..1.0,
        beta in 0.01f64..1.0,
        left in 0u8..2,
        right in 0u8..2,
    ) {
        let m = widom_rowlinson_onepoint(1, 1, alpha, beta, Metric::Chebyshev).unwrap();
        let t = Site::new(&[0]);
        let occupied = Window::new(1, [Site::new(&[-2]), Site::new(&[-1]), Site::new(&[1]), Site::new(&[2])]).unwrap();
        let make = |values: Vec<Symbol>| {
            BoundaryCondition::new(
                Window::singleton(t.clone()),
                Configuration::new(occupied.clone(), values).unwrap(),
                Tail::Free,
            )
            .unwrap()
        };
        let sparse = make(vec![0, left, right, 0]);
        let dense = make(vec![1, 1, 1, 1]);
        let ds = m.evaluate(&t, 0, 1, &sparse).unwrap();
        let dd = m.evaluate(&t, 0, 1, &dense).unwrap();
        let (cs, cd) = (m.uncovered(&t, &sparse).unwrap(), m.uncovered(&t, &dense).unwrap());
        prop_assert!(cs >= cd);
        prop_assert!((ds - (alpha + beta * cs as f64)).abs() < 1e-12);
        prop_assert!(ds >= dd);
    }

    #[test]
    fn delta_coefficient_dominates_dobrushin(beta in 0.0f64..1.5, h in -1.0f64..1.0) {
        let m = ising_model(1, beta, h).unwrap();
        let delta = delta_uniqueness_coefficient(&m, 1).unwrap().coefficient;
        let dob = dobrushin_coefficient(&m, 1).unwrap().coefficient;
        prop_assert!(delta + 1e-12 >= dob);
        prop_assert!((0.0..=2.0).contains(&dob));
        let free = dobrushin_coefficient(&ising_model(1, beta, 0.0).unwrap(), 1).unwrap();
        prop_assert!((free.coefficient - (2.0 * beta).tanh()).abs() < 1e-12);
    }
}
