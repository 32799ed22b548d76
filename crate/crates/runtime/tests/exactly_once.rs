use std::sync::atomic::{AtomicU32, Ordering};

use dls_core::{ProcTechnique, TechniqueKind};
use dls_runtime::{setup, RunPlan, Transport};
use proptest::prelude::*;

fn proc_technique() -> impl Strategy<Value = ProcTechnique> {
    prop_oneof![
        1 => Just(ProcTechnique::Nodlb),
        10 => prop::sample::select(
            TechniqueKind::ALL
                .iter()
                .copied()
                .filter(|&t| t != TechniqueKind::Fsc)
                .collect::<Vec<_>>()
        )
        .prop_map(ProcTechnique::Dls),
    ]
}

fn thread_technique() -> impl Strategy<Value = TechniqueKind> {
    prop::sample::select(
        TechniqueKind::ALL
            .iter()
            .copied()
            .filter(|&t| t != TechniqueKind::Fsc)
            .collect::<Vec<_>>(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn each_index_runs_exactly_once(
        n in 1u64..3000,
        p in 1usize..6,
        t in 1usize..4,
        pt in proc_technique(),
        tt in thread_technique(),
        min in prop::option::of(1u64..20),
        seed in any::<u64>(),
        socket in any::<bool>(),
    ) {
        let mut plan = RunPlan::new(n, p, t, pt, tt);
        plan.proc_min_chunk = min;
        plan.seed = seed;
        if socket {
            plan.transport = Transport::LocalSocket;
        }
        let hits: Vec<AtomicU32> = (0..n).map(|_| AtomicU32::new(0)).collect();
        let mut rt = setup(plan).unwrap();
        let r = rt.run_loop(&|i, _| {
            hits[i as usize].fetch_add(1, Ordering::Relaxed);
        }).unwrap();
        for (i, h) in hits.iter().enumerate() {
            prop_assert_eq!(h.load(Ordering::Relaxed), 1, "index {}", i);
        }
        prop_assert_eq!(r.assigned_iterations().iter().sum::<u64>(), n);
    }
}
