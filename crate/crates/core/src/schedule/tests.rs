use super::*;

fn sched(t: TechniqueKind, n: u64, p: usize) -> Scheduler<f64> {
    Scheduler::new(t, n, p, SchedulerOptions::default()).unwrap()
}

/// Round-robin requests until every PE sees `None`.
fn drain(s: &mut Scheduler<f64>) -> Vec<ChunkAssignment> {
    let p = s.pe_count();
    let mut out = Vec::new();
    let mut idle = vec![false; p];
    let mut pe = 0;
    while idle.iter().any(|i| !i) {
        match s.next_chunk(pe).unwrap() {
            Some(c) => out.push(c),
            None => idle[pe] = true,
        }
        pe = (pe + 1) % p;
    }
    out
}

fn sizes(chunks: &[ChunkAssignment]) -> Vec<u64> {
    chunks.iter().map(|c| c.size).collect()
}

#[test]
fn create_defaults() {
    let s = sched(TechniqueKind::Gss, 100, 4);
    assert_eq!(s.remaining(), 100);
    assert_eq!(s.weights(), &[1.0, 1.0, 1.0, 1.0]);
    assert_eq!(s.outstanding(), 0);
}

#[test]
fn create_rejects_bad_shapes() {
    let zero_n = Scheduler::<f64>::new(TechniqueKind::Gss, 0, 4, Default::default());
    assert!(matches!(zero_n, Err(ScheduleError::InvalidArgument(_))));
    let zero_p = Scheduler::<f64>::new(TechniqueKind::Gss, 10, 0, Default::default());
    assert!(matches!(zero_p, Err(ScheduleError::InvalidArgument(_))));
}

#[test]
fn fsc_requires_parameters() {
    let r = Scheduler::<f64>::new(TechniqueKind::Fsc, 100, 4, Default::default());
    assert_eq!(r.unwrap_err(), ScheduleError::MissingParameter("fsc_params"));
    let opts = SchedulerOptions {
        fsc_params: Some(FscParams {
            overhead: 0.0,
            sigma: 1.0,
        }),
        ..Default::default()
    };
    let r = Scheduler::<f64>::new(TechniqueKind::Fsc, 100, 4, opts);
    assert!(matches!(r, Err(ScheduleError::InvalidArgument(_))));
}

#[test]
fn wf_initial_weights() {
    let opts = SchedulerOptions {
        initial_weights: Some(vec![1.5, 0.5]),
        ..Default::default()
    };
    let s = Scheduler::<f64>::new(TechniqueKind::Wf, 10, 2, opts).unwrap();
    assert_eq!(s.weights().iter().sum::<f64>(), 2.0);

    for bad in [vec![1.5, 0.6], vec![2.0, 0.0], vec![1.0]] {
        let opts = SchedulerOptions {
            initial_weights: Some(bad),
            ..Default::default()
        };
        assert!(Scheduler::<f64>::new(TechniqueKind::Wf, 10, 2, opts).is_err());
    }
}

#[test]
fn wf_weights_shape_chunks() {
    let opts = SchedulerOptions {
        initial_weights: Some(vec![1.5, 0.5]),
        ..Default::default()
    };
    let mut s = Scheduler::<f64>::new(TechniqueKind::Wf, 100, 2, opts).unwrap();
    // batch 50, share 25: PE0 gets round(37.5) = 38, PE1 gets min(round(12.5), 12) = 12
    assert_eq!(s.next_chunk(0).unwrap().unwrap().size, 38);
    assert_eq!(s.next_chunk(1).unwrap().unwrap().size, 12);
}

#[test]
fn gss_sequence() {
    let mut s = sched(TechniqueKind::Gss, 100, 4);
    let got = sizes(&drain(&mut s));
    assert_eq!(got, vec![25, 19, 14, 11, 8, 6, 5, 3, 3, 2, 1, 1, 1, 1]);
    assert!(s.is_exhausted());
}

#[test]
fn ss_three_then_exhausted() {
    let mut s = sched(TechniqueKind::Ss, 3, 2);
    for _ in 0..3 {
        assert_eq!(s.next_chunk(0).unwrap().unwrap().size, 1);
    }
    assert_eq!(s.next_chunk(0).unwrap(), None);
    assert_eq!(s.next_chunk(1).unwrap(), None);
}

#[test]
fn static_truncates_last_block() {
    let mut s = sched(TechniqueKind::Static, 10, 4);
    let chunks = drain(&mut s);
    assert_eq!(sizes(&chunks), vec![3, 3, 3, 1]);
    assert_eq!(chunks[3].start, 9);
}

#[test]
fn static_blocks_are_pe_indexed() {
    let mut s = sched(TechniqueKind::Static, 40, 4);
    let c = s.next_chunk(2).unwrap().unwrap();
    assert_eq!((c.start, c.size), (20, 10));
    assert_eq!(s.next_chunk(2).unwrap(), None);
    let c = s.next_chunk(0).unwrap().unwrap();
    assert_eq!((c.start, c.size), (0, 10));
    // N < P: trailing PEs have no block
    let mut s = sched(TechniqueKind::Static, 5, 4);
    assert_eq!(s.next_chunk(3).unwrap(), None);
}

#[test]
fn rand_within_bounds() {
    let opts = SchedulerOptions {
        seed: 42,
        ..Default::default()
    };
    let mut s = Scheduler::<f64>::new(TechniqueKind::Rand, 10_000, 4, opts).unwrap();
    let chunks = drain(&mut s);
    let (last, body) = chunks.split_last().unwrap();
    for c in body {
        assert!((25..=1250).contains(&c.size), "{}", c.size);
    }
    assert!(last.size <= 1250);
    assert_eq!(chunks.iter().map(|c| c.size).sum::<u64>(), 10_000);
}

#[test]
fn fac_batches() {
    let mut s = sched(TechniqueKind::Fac, 100, 4);
    let got = sizes(&drain(&mut s));
    // b = 50, c = 13; the batch holds P*c = 52 <= R
    assert_eq!(&got[..4], &[13, 13, 13, 13]);
    // R = 48 -> b = 24 -> 6 x4
    assert_eq!(&got[4..8], &[6, 6, 6, 6]);
    assert_eq!(got.iter().sum::<u64>(), 100);
}

#[test]
fn min_chunk_clamps() {
    let opts = SchedulerOptions {
        min_chunk: 10,
        ..Default::default()
    };
    let mut s = Scheduler::<f64>::new(TechniqueKind::Gss, 100, 4, opts).unwrap();
    let got = sizes(&drain(&mut s));
    assert_eq!(got, vec![25, 19, 14, 11, 10, 10, 10, 1]);
}

#[test]
fn next_chunk_rejects_bad_pe() {
    let mut s = sched(TechniqueKind::Ss, 3, 2);
    assert!(matches!(s.next_chunk(2), Err(ScheduleError::InvalidArgument(_))));
}

#[test]
fn report_conservation_and_double_report() {
    let mut s = sched(TechniqueKind::Fac, 1000, 3);
    let chunks = drain(&mut s);
    for c in &chunks {
        s.report_completion(c, 1e-3 * c.size as f64, 1e-5).unwrap();
    }
    let done: u64 = s.stats().iter().map(|r| r.iterations_done).sum();
    assert_eq!(done, 1000);
    let err = s.report_completion(&chunks[0], 1.0, 0.0).unwrap_err();
    assert!(matches!(err, ScheduleError::ProtocolViolation(_)));
}

#[test]
fn report_unknown_or_forged() {
    let mut s = sched(TechniqueKind::Gss, 100, 2);
    let c = s.next_chunk(0).unwrap().unwrap();
    let forged = ChunkAssignment { size: c.size + 1, ..c };
    assert!(matches!(
        s.report_completion(&forged, 1.0, 0.0),
        Err(ScheduleError::ProtocolViolation(_))
    ));
    let unknown = ChunkAssignment { start: 77, ..c };
    assert!(matches!(
        s.report_completion(&unknown, 1.0, 0.0),
        Err(ScheduleError::ProtocolViolation(_))
    ));
    assert!(matches!(
        s.report_completion(&c, -1.0, 0.0),
        Err(ScheduleError::InvalidArgument(_))
    ));
    s.report_completion(&c, 1.0, 0.0).unwrap();
}

#[test]
fn awf_c_favours_faster_pe() {
    // PE0 takes 2 ms per iteration, PE1 1 ms.
    let mut s = sched(TechniqueKind::AwfC, 1000, 2);
    let a = s.next_chunk(0).unwrap().unwrap();
    s.report_completion(&a, 2e-3 * a.size as f64, 0.0).unwrap();
    let b = s.next_chunk(1).unwrap().unwrap();
    s.report_completion(&b, 1e-3 * b.size as f64, 0.0).unwrap();
    let w = s.weights();
    assert!(w[1] > w[0]);
    assert!((w[1] - 4.0 / 3.0).abs() < 1e-9);
    assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-9);
}

#[test]
fn awf_b_waits_for_batch_completion() {
    let mut s = sched(TechniqueKind::AwfB, 1000, 2);
    let a = s.next_chunk(0).unwrap().unwrap();
    s.report_completion(&a, 2e-3 * a.size as f64, 0.0).unwrap();
    assert_eq!(s.weights(), &[1.0, 1.0], "batch still open");
    let b = s.next_chunk(1).unwrap().unwrap();
    assert_eq!(a.batch_id, b.batch_id);
    s.report_completion(&b, 1e-3 * b.size as f64, 0.0).unwrap();
    assert!(s.weights()[1] > s.weights()[0]);
}

#[test]
fn awf_d_counts_scheduling_time() {
    // equal exec time, PE0 pays heavy scheduling overhead
    let mut d = sched(TechniqueKind::AwfD, 1000, 2);
    let mut b = sched(TechniqueKind::AwfB, 1000, 2);
    for s in [&mut d, &mut b] {
        let x = s.next_chunk(0).unwrap().unwrap();
        let y = s.next_chunk(1).unwrap().unwrap();
        s.report_completion(&x, 1e-3 * x.size as f64, 0.5).unwrap();
        s.report_completion(&y, 1e-3 * y.size as f64, 0.0).unwrap();
    }
    assert!(d.weights()[1] > d.weights()[0]);
    assert!((b.weights()[0] - b.weights()[1]).abs() < 1e-12);
}

fn run_step(s: &mut Scheduler<f64>, per_iter: &[f64]) {
    let chunks = drain(s);
    for c in chunks {
        s.report_completion(&c, per_iter[c.pe_id] * c.size as f64, 0.0)
            .unwrap();
    }
}

#[test]
fn timestep_weights_symmetric() {
    let mut s = sched(TechniqueKind::Awf, 1000, 3);
    run_step(&mut s, &[1e-3, 1e-3, 1e-3]);
    let w = s.update_weights_timestep(0).unwrap();
    assert_eq!(w, vec![1.0, 1.0, 1.0]);
}

#[test]
fn timestep_weights_two_to_one() {
    let mut s = sched(TechniqueKind::Awf, 1000, 2);
    run_step(&mut s, &[1e-3, 2e-3]);
    let w = s.update_weights_timestep(0).unwrap();
    assert!((w[0] - 4.0 / 3.0).abs() < 1e-12);
    assert!((w[1] - 2.0 / 3.0).abs() < 1e-12);
    assert!((w.iter().sum::<f64>() - 2.0).abs() <= 2e-9);
}

#[test]
fn timestep_weighting_favours_recent_steps() {
    let mut s = sched(TechniqueKind::Awf, 1000, 2);
    run_step(&mut s, &[1e-3, 1e-3]);
    s.update_weights_timestep(0).unwrap();
    let mut next = sched(TechniqueKind::Awf, 1000, 2);
    carry_weights(&s, &mut next).unwrap();
    run_step(&mut next, &[1e-3, 4e-3]);
    let w = next.update_weights_timestep(1).unwrap();
    // PE1: (1*1 + 2*4)/3 = 3 ms vs PE0 1 ms -> w = (1.5, 0.5)
    assert!((w[0] - 1.5).abs() < 1e-9, "{w:?}");
    assert_eq!(next.stats()[1].timestep_wap.len(), 2);
}

#[test]
fn timestep_update_rejects_nonadaptive() {
    let mut s = sched(TechniqueKind::Fac, 100, 2);
    assert!(matches!(
        s.update_weights_timestep(0),
        Err(ScheduleError::InvalidArgument(_))
    ));
    let mut af = sched(TechniqueKind::Af, 100, 2);
    assert!(af.update_weights_timestep(0).is_err());
}

#[test]
fn timestep_update_needs_statistics() {
    let mut s = sched(TechniqueKind::Awf, 100, 2);
    assert!(s.update_weights_timestep(0).is_err());
}

#[test]
fn carry_copies_weights() {
    let opts = SchedulerOptions {
        initial_weights: Some(vec![1.2, 0.8]),
        ..Default::default()
    };
    let prev = Scheduler::<f64>::new(TechniqueKind::AwfB, 100, 2, opts).unwrap();
    let mut next = sched(TechniqueKind::AwfB, 100, 2);
    assert_eq!(next.weights(), &[1.0, 1.0]);
    prev.carry_weights_into(&mut next).unwrap();
    assert_eq!(next.weights(), &[1.2, 0.8]);
    assert!((next.weights().iter().sum::<f64>() - 2.0).abs() < 1e-12);
}

#[test]
fn carry_rejects_mismatch() {
    let prev = sched(TechniqueKind::Awf, 100, 2);
    let mut other_p = sched(TechniqueKind::Awf, 100, 3);
    assert!(carry_weights(&prev, &mut other_p).is_err());
    let mut other_t = sched(TechniqueKind::AwfC, 100, 2);
    assert!(carry_weights(&prev, &mut other_t).is_err());
    let fac = sched(TechniqueKind::Fac, 100, 2);
    let mut fac2 = sched(TechniqueKind::Fac, 100, 2);
    assert!(carry_weights(&fac, &mut fac2).is_err());
}

#[test]
fn af_falls_back_then_adapts() {
    let mut s = sched(TechniqueKind::Af, 10_000, 2);
    let mut per_pe = [0u64; 2];
    let mut pe = 0;
    while let Some(c) = s.next_chunk(pe).unwrap() {
        let tau = if pe == 0 { 1e-4 } else { 4e-4 };
        // alternate noise so sigma > 0
        let jitter = if c.round % 2 == 0 { 1.1 } else { 0.9 };
        s.report_completion(&c, tau * jitter * c.size as f64, 0.0)
            .unwrap();
        per_pe[pe] += c.size;
        pe = 1 - pe;
    }
    assert_eq!(per_pe.iter().sum::<u64>(), 10_000);
    assert!(per_pe[0] > per_pe[1], "{per_pe:?}");
}

#[test]
fn f32_scheduler_matches_f64_for_nonadaptive() {
    for t in [TechniqueKind::Gss, TechniqueKind::Fac, TechniqueKind::Tss, TechniqueKind::Wf] {
        let mut a = sched(t, 5000, 7);
        let mut b = Scheduler::<f32>::new(t, 5000, 7, Default::default()).unwrap();
        let mut pe = 0;
        loop {
            let x = a.next_chunk(pe).unwrap();
            let y = b.next_chunk(pe).unwrap();
            assert_eq!(x, y);
            if x.is_none() {
                break;
            }
            pe = (pe + 1) % 7;
        }
    }
}
