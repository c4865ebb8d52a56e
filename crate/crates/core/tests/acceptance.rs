//! Runs every acceptance criterion and prints one line per criterion.

use trapnls::acceptance::{run, AcceptanceConfig, CRITERIA};

fn main() {
    // `cargo test -- <filter>` narrows the run to criteria whose id or name contains the filter
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let cfg = AcceptanceConfig::default();
    let mut failed = 0;
    let mut ran = 0;
    for id in 1..=CRITERIA {
        let name = trapnls::acceptance::name(id);
        if !filters.is_empty() && !filters.iter().any(|f| id.to_string() == *f || name.contains(f.as_str())) {
            continue;
        }
        let c = run(id, &cfg);
        println!("{c}");
        ran += 1;
        if !c.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
