// Seeding strategies and dead-mean revival in the k-means stage.

use gmm_diag::kmeans::{means_from_indices, run_kmeans_from, seed_indices};
use gmm_diag::{DistKind, DistMode, SeedMode, SynthSpec, Workers};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let (data, _) = SynthSpec::random_clusters(2, 4, 7)?.sample(2000, 7)?;
    let dist = DistMode::for_data(DistKind::Maha, &data)?;
    let workers = Workers::new(2)?;

    for mode in [SeedMode::StaticSubset, SeedMode::RandomSubset, SeedMode::StaticSpread, SeedMode::RandomSpread] {
        let idx = seed_indices(&data, 4, mode, &dist, 3)?;
        let r = run_kmeans_from(&data, means_from_indices(&data, &idx), &dist, 20, &workers, |_, _| {})?;
        println!(
            "{mode:?}: seeds {idx:?}, {} passes, objective {:.2}",
            r.iterations,
            r.objective.last().copied().unwrap_or(f64::NAN)
        );
    }

    // a mean nobody is close to gets moved onto the worst-served sample
    let mut means = means_from_indices(&data, &[0, 1, 2]);
    means.extend([1e6, 1e6]);
    let r = run_kmeans_from(&data, means, &dist, 10, &workers, |it, obj| println!("  pass {it}: {obj:.2}"))?;
    println!("counts after revival {:?} (revived after passes {:?})", r.state.counts, r.resurrections);
    if r.state.counts.contains(&0) {
        return Err("dead mean was not revived".into());
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
