use std::time::Instant;

use wam_grad::gradcheck::{suite, GradCheckConfig};

#[test]
fn every_op_matches_central_differences() {
    let cfg = GradCheckConfig::default();
    let start = Instant::now();
    let results = suite::run_all(20, 2024).unwrap();
    for r in &results {
        eprintln!("{:<36} n={:<3} max rel err {:.3e}", r.op, r.instances, r.max_rel_error);
    }
    for r in &results {
        assert!(r.instances >= 20);
        assert!(
            r.max_rel_error <= cfg.tolerance,
            "{} failed: {:e}",
            r.op,
            r.max_rel_error
        );
    }
    assert!(start.elapsed().as_secs() < 120);
}
