//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! `cargo test -p hybrid-sketch --test acceptance [-- <id>...]`

use hybrid_sketch::experiments::{run_criteria, ExperimentConfig, CRITERIA};

fn main() {
    // libtest-style flags (e.g. --nocapture) may be forwarded; only numeric ids select criteria.
    let ids: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let cfg = ExperimentConfig::default();
    println!("acceptance: {} criteria, seed {}, {} trials", CRITERIA.len(), cfg.seed, cfg.trials);
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| ids.is_empty() || ids.contains(&c.id)) {
        let outcome = run_criteria(&cfg, &[c.id]).remove(0);
        println!("{outcome}");
        failed += !outcome.passed as usize;
    }
    if failed > 0 {
        println!("acceptance: {failed} failed");
        std::process::exit(1);
    }
    println!("acceptance: all passed");
}
