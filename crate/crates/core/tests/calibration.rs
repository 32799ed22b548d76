//! Busy-wait accuracy. Kept as the only test in this binary so it runs
//! without sibling test threads competing for the CPU.

use dls_core::kernels::{busy_wait, iterations_per_second};

#[test]
fn busy_wait_tracks_request() {
    assert!(iterations_per_second() > 0.0);
    for &target in &[50e-6, 200e-6, 1e-3, 10e-3] {
        // median of several runs absorbs an occasional preemption
        let mut runs: Vec<f64> = (0..9).map(|_| busy_wait(target)).collect();
        runs.sort_by(f64::total_cmp);
        let got = runs[runs.len() / 2];
        let err = (got - target).abs() / target;
        assert!(err <= 0.10, "requested {target} s, got {got} s ({:.1}%)", err * 100.0);
    }
}
