mod common;

use proptest::prelude::*;

use common::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn queues_lose_nothing_and_respect_bounds(
        qt in queue_type(),
        bound in prop::option::of(1u32..6),
        ops in queue_ops(),
    ) {
        check_queue(qt, bound, &ops)?;
    }

    #[test]
    fn gate_releases_in_order(ops in gate_ops()) {
        check_gate(&ops)?;
    }

    #[test]
    fn percentiles_are_monotone(s in samples(), ps in prop::collection::vec(0.01f64..=100.0, 1..10)) {
        check_percentiles(&s, ps)?;
    }

    #[test]
    fn failing_tuples_are_never_targeted(ops in pm_ops()) {
        check_power_manager(&ops)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn random_graphs_run_each_node_once(seed in any::<u64>()) {
        check_random_scenario(seed)?;
    }
}

/// The generator must actually exercise the structures the properties guard.
#[test]
fn random_graphs_cover_fanin_pools_and_blocking() {
    let (mut fanin, mut pools, mut blocking, mut parked, mut merged) = (0, 0, 0, 0, 0);
    for seed in 0..200 {
        let (s, _) = random_scenario(seed);
        let nodes = &s.paths[0].nodes;
        let mut parents = vec![0; nodes.len()];
        for n in nodes {
            for &c in &n.childs {
                parents[c as usize] += 1;
            }
        }
        fanin += usize::from(parents[..nodes.len() - 1].iter().any(|&p| p > 1));
        pools += usize::from(s.instances.iter().any(|i| !i.connections.is_empty()));
        blocking += usize::from(nodes[0].enter_op.is_some());
        let r = qsim::run_default(&s).unwrap();
        parked += usize::from(r.counters.jobs_parked > 0);
        merged += usize::from(r.counters.copies_merged > 0);
    }
    println!("fanin={fanin} pools={pools} blocking={blocking} parked={parked} merged={merged}");
    for (what, n) in [
        ("fan-in", fanin),
        ("pools", pools),
        ("blocking", blocking),
        ("parking", parked),
        ("merges", merged),
    ] {
        assert!(n >= 10, "only {n} of 200 scenarios exercise {what}");
    }
}
