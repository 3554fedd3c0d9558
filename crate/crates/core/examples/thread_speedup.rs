// Times the same fit with different thread counts. Results are
// bit-identical whatever the thread count.

use gmm_diag::bench::run_bench;
use gmm_diag::{FitConfig, SynthSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let (data, _) = SynthSpec::random_clusters(16, 8, 0)?.sample(20_000, 0)?;
    let config = FitConfig {
        km_iter: 5,
        em_iter: 5,
        ..FitConfig::new(8)
    };
    let rows = run_bench(&data, &config, &[1, 2, 4])?;
    println!("threads,seconds,speedup,km_share");
    for r in &rows {
        println!("{},{:.4},{:.2},{:.2}", r.threads, r.seconds, r.speedup, r.km_share());
    }
    if rows.iter().any(|r| r.final_avg_log_p.to_bits() != rows[0].final_avg_log_p.to_bits()) {
        return Err("thread count changed the result".into());
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
