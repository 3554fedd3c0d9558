// Fits a two-component model to the classic two-cluster dataset:
// means 1..5 and 3..7, twice as many samples in the first cluster.

use gmm_diag::{learn, DistKind, FitConfig, SeedMode, SynthSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let (data, _) = SynthSpec::two_cluster().sample(10_000, 1)?;

    let config = FitConfig {
        dist: DistKind::Maha,
        seed_mode: SeedMode::RandomSubset,
        km_iter: 10,
        em_iter: 5,
        var_floor: 1e-10,
        ..FitConfig::new(2)
    };
    let (model, report) = learn(&data, &config)?;

    println!("avg log-likelihood {:.6}", report.final_avg_log_p().unwrap_or(f64::NAN));
    println!("fit took {:.3}s ({} k-means passes)", report.total_seconds(), report.km_iterations);
    for g in 0..model.n_gaus() {
        println!("heft {:.4}  mean {:.3?}", model.hefts()[g], model.mean(g));
    }

    let big = model.hefts().iter().copied().fold(0.0, f64::max);
    if (big - 2.0 / 3.0).abs() > 0.02 {
        return Err(format!("unexpected dominant heft {big}").into());
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
