mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use polyshift::distnet::{sim_filter_on, sim_inverse, InverseMethod, Network};
use polyshift::graph::{build_random_geometric_connected, Placement};
use polyshift::inverse::{optimal_poly, solve_with, SolveOptions};
use polyshift::operator::Operator;
use polyshift::shifts::{circulant_family, validate_shift};
use polyshift::ShiftFamily;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn execution_order_changes_no_bits(n in 10usize..120, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, _) = build_random_geometric_connected(n, 0.3, seed, Placement::Stratified, 500).unwrap();
        let s = validate_shift(Operator::Sparse(g.sym_normalized_laplacian().unwrap()), &g).unwrap();
        let fam = ShiftFamily::new(vec![s]).unwrap();
        let h = random_poly(vec![4], &mut rng);
        let x = random_vec(n, &mut rng);
        let base = sim_filter_on(&Network::new(&g, &fam).unwrap(), &h, &x).unwrap().0;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let net = Network::new(&g, &fam).unwrap().with_order(order).with_message_log();
        let (y, st) = sim_filter_on(&net, &h, &x).unwrap();
        prop_assert_eq!(base, y);
        prop_assert!(st.log.as_ref().unwrap().iter().all(|m| g.has_edge(m.src, m.dst)));
        prop_assert_eq!(st.sent_per_vertex.iter().sum::<usize>(), st.total_messages());
        prop_assert_eq!(st.received_per_vertex.iter().sum::<usize>(), st.total_messages());
    }

    #[test]
    fn distributed_iopa_matches_centralized(n in 12usize..100, l in 1usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, fam) = circulant_family(n, &[1, 3]).unwrap();
        let h = polyshift::PolyCoeffs::new(vec![1, 1], vec![3.0, -0.4, -0.5, 0.1]).unwrap();
        let b = random_vec(n, &mut rng);
        let approx = optimal_poly(&h, fam.spectrum().unwrap(), l).unwrap().approximant();
        let (x, _, st) = sim_inverse(&g, &fam, InverseMethod::Iopa, &h, &approx, &b, 6).unwrap();
        let want = solve_with(&h, &approx, &fam, &b, &SolveOptions::fixed(6)).unwrap().x;
        prop_assert!(rel_err(&x, &want) <= 1e-10);
        prop_assert!(st.rounds > 0);
    }
}
