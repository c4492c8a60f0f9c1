mod common;

use std::collections::{BTreeMap, BTreeSet};

use mmwave_diversity::channel::{ci_mean_path_loss, Condition, Distance3D};
use mmwave_diversity::diversity::{
    all_angle_reception_probability, best_n_path_loss, combination_count, empirical_cdf,
    enumerate_serving_combinations, path_loss_series, reception_table, reception_vs_serving_count,
    simulate_drop, LinkId, ModelSet, Node, OmniSource, RxMask, Scenario, Topology,
};
use mmwave_diversity::io::{parse_scenario, parse_topology};
use mmwave_diversity::Execution;
use proptest::prelude::*;

fn campus_topology() -> Topology {
    let text = std::fs::read_to_string(common::data_dir().join("campus_topology.json")).unwrap();
    parse_topology(&text).unwrap()
}

fn campus() -> Scenario {
    let text = std::fs::read_to_string(common::data_dir().join("campus_scenario.json")).unwrap();
    parse_scenario(&text).unwrap()
}

fn arb_topology() -> impl Strategy<Value = Topology> {
    prop::collection::vec(prop::collection::btree_set(0usize..6, 1..=6), 1..5).prop_map(|ues| {
        ues.into_iter()
            .enumerate()
            .map(|(u, set)| {
                (
                    format!("U{u}"),
                    set.into_iter().map(|b| format!("B{b}")).collect(),
                )
            })
            .collect()
    })
}

fn arb_mask() -> impl Strategy<Value = RxMask> {
    // mostly dense masks so full unions actually occur
    prop::collection::vec(prop::bool::weighted(0.93), 72)
        .prop_map(|b| RxMask::from_bools(&b).unwrap())
}

fn masks_for(topology: &Topology, pool: &[RxMask]) -> BTreeMap<LinkId, RxMask> {
    let mut out = BTreeMap::new();
    let mut i = 0;
    for (ue, set) in topology {
        for bs in set {
            out.insert(LinkId::new(ue.clone(), bs.clone()), pool[i % pool.len()]);
            i += 1;
        }
    }
    out
}

#[test]
fn campus_fixture_counts() {
    let topo = campus_topology();
    let counts: Vec<u64> = (1..=5).map(|k| combination_count(&topo, k)).collect();
    assert_eq!(counts, vec![36, 54, 42, 17, 3]);
    assert_eq!(campus().topology(), topo);
}

#[test]
fn first_neighbor_distances_match_campus_summary() {
    let stats = campus().nn_distance_stats(1).unwrap();
    let first = &stats[0];
    assert_eq!(first.count, 10);
    assert!((first.mean_m - 63.0).abs() < 1.0, "mean {}", first.mean_m);
    assert!((first.min_m - 21.0).abs() < 1.0, "min {}", first.min_m);
    assert!((first.max_m - 80.0).abs() < 1.0, "max {}", first.max_m);
}

#[test]
fn zero_sigma_detection_is_deterministic() {
    let mut models = ModelSet::default();
    models.directional_los = models.directional_los.with_sigma(0.0).unwrap();
    models.directional_nlos = models.directional_nlos.with_sigma(0.0).unwrap();
    models.directional_nlos_best = models.directional_nlos_best.with_sigma(0.0).unwrap();
    let ues: Vec<Node> = [
        (5.0, "near"),
        (60.0, "mid"),
        (180.0, "far"),
        (600.0, "very_far"),
    ]
    .iter()
    .map(|&(x, id)| Node::ue(id, x, 0.0).unwrap())
    .collect();
    let bs = vec![Node::base_station("B", 0.0, 0.0).unwrap()];
    let mut s = Scenario::fully_connected(bs, ues).unwrap();
    s.models = models;
    for cond in [Condition::Los, Condition::Nlos] {
        for l in &mut s.links {
            l.condition = Some(cond);
        }
        let trial = &simulate_drop(&s, 1, Execution::Sequential).unwrap()[0];
        for link in &trial.links {
            let d = Distance3D::from_m(link.distance_m).unwrap();
            let arbitrary =
                ci_mean_path_loss(models.directional(cond), d).unwrap() <= s.budget.max_pl_db;
            let best =
                ci_mean_path_loss(&models.directional_nlos_best, d).unwrap() <= s.budget.max_pl_db;
            for dir in 0..72 {
                let expected = if cond == Condition::Nlos && dir == 0 {
                    arbitrary || best
                } else {
                    arbitrary
                };
                assert_eq!(
                    link.mask.get(dir),
                    expected,
                    "{cond} {} dir {dir}",
                    link.link.ue
                );
            }
        }
    }
}

#[test]
fn best_two_trails_best_one() {
    let mut s = campus();
    s.omni_source = OmniSource::Model;
    let runs = simulate_drop(&s, 200, Execution::default()).unwrap();
    let series = path_loss_series(&s, &runs, 2);
    let m1 = common::median(&series["best_1"]);
    let m2 = common::median(&series["best_2"]);
    assert!(m2 > m1, "best_1 {m1} best_2 {m2}");
    for values in series.values() {
        let cdf = empirical_cdf(values);
        assert!(cdf.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1));
        assert_eq!(cdf.last().unwrap().1, 1.0);
    }
}

#[test]
fn fully_connected_reception_is_monotone_in_k() {
    let bs: Vec<Node> = (0..5)
        .map(|i| Node::base_station(format!("B{i}"), 40.0 * i as f64, 0.0).unwrap())
        .collect();
    let ues: Vec<Node> = (0..4)
        .map(|i| Node::ue(format!("U{i}"), 30.0 * i as f64 + 10.0, 60.0).unwrap())
        .collect();
    let mut s = Scenario::fully_connected(bs, ues).unwrap();
    s.budget.max_pl_db = 150.0;
    for seed in 0..4 {
        s.seed = seed;
        let counts = reception_vs_serving_count(&s, 8, 5, Execution::default()).unwrap();
        let p: Vec<f64> = counts.iter().map(|c| c.probability().unwrap()).collect();
        assert!(p.windows(2).all(|w| w[0] <= w[1]), "seed {seed}: {p:?}");
    }
}

#[test]
fn all_full_masks_give_certain_reception() {
    let mut s = campus();
    s.models.directional_los = s.models.directional_los.with_sigma(0.0).unwrap();
    for l in &mut s.links {
        l.condition = Some(Condition::Los);
    }
    let counts = reception_vs_serving_count(&s, 2, 5, Execution::default()).unwrap();
    assert!(counts.iter().all(|c| c.probability() == Some(1.0)));
}

proptest! {
    #[test]
    fn enumeration_matches_brute_force(topo in arb_topology(), k in 1usize..=6) {
        let listed = enumerate_serving_combinations(&topo, k);
        prop_assert_eq!(listed.len() as u64, combination_count(&topo, k));
        for (ue, set) in &topo {
            let items: Vec<String> = set.iter().cloned().collect();
            let brute = common::brute_force_subsets(&items, k);
            let ours: BTreeSet<Vec<String>> =
                listed.iter().filter(|(u, _)| u == ue).map(|(_, c)| c.clone()).collect();
            prop_assert_eq!(ours, brute);
        }
    }

    #[test]
    fn union_never_clears_bits(a in arb_mask(), b in arb_mask()) {
        let u = a.union(b);
        prop_assert!(u.is_superset_of(&a) && u.is_superset_of(&b));
        prop_assert!(u.count() >= a.count().max(b.count()));
    }

    #[test]
    fn single_ue_reception_is_monotone_in_k(pool in prop::collection::vec(arb_mask(), 6)) {
        let topo: Topology = [("U".to_string(), (0..6).map(|b| format!("B{b}")).collect())].into_iter().collect();
        let masks = masks_for(&topo, &pool);
        let table = reception_table(&masks, &topo, 6).unwrap();
        let p: Vec<f64> = table.iter().map(|c| c.probability().unwrap()).collect();
        prop_assert!(p.windows(2).all(|w| w[0] <= w[1]), "{:?}", p);
    }

    #[test]
    fn missing_link_is_reported(topo in arb_topology(), pool in prop::collection::vec(arb_mask(), 3)) {
        let mut masks = masks_for(&topo, &pool);
        let victim = masks.keys().next().unwrap().clone();
        masks.remove(&victim);
        prop_assert!(all_angle_reception_probability(&masks, &topo, 1).is_err());
    }

    #[test]
    fn best_n_is_sorted_and_order_free(
        losses in prop::collection::vec(60.0f64..200.0, 1..8),
        rotate in 0usize..8,
    ) {
        let named: Vec<(String, f64)> = losses.iter().enumerate().map(|(i, &l)| (format!("B{i}"), l)).collect();
        let sorted = best_n_path_loss(&named);
        prop_assert!(sorted.windows(2).all(|w| w[0].1 <= w[1].1));
        let mut shuffled = named.clone();
        shuffled.rotate_left(rotate % named.len());
        shuffled.reverse();
        prop_assert_eq!(best_n_path_loss(&shuffled), sorted);
    }

    #[test]
    fn mask_text_round_trips(m in arb_mask()) {
        let text = m.to_string();
        prop_assert_eq!(text.len(), 72);
        prop_assert_eq!(text.parse::<RxMask>().unwrap(), m);
    }

}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn trial_prefixes_do_not_depend_on_trial_count(seed in 0u64..50, extra in 1usize..4) {
        let mut s = campus();
        s.seed = seed;
        let short = simulate_drop(&s, 1, Execution::Sequential).unwrap();
        let long = simulate_drop(&s, 1 + extra, Execution::Parallel).unwrap();
        prop_assert_eq!(&short[0], &long[0]);
    }
}

#[test]
fn explicit_link_conditions_are_respected() {
    let mut s = campus();
    for (i, l) in s.links.iter_mut().enumerate() {
        l.condition = Some(if i % 2 == 0 {
            Condition::Los
        } else {
            Condition::Nlos
        });
    }
    let run = simulate_drop(&s, 3, Execution::default()).unwrap();
    for t in &run {
        for (i, l) in t.links.iter().enumerate() {
            let expected = if i % 2 == 0 {
                Condition::Los
            } else {
                Condition::Nlos
            };
            assert_eq!(l.condition, expected);
        }
    }
}
