// Driving EM one step at a time instead of through `learn`.

use gmm_diag::{em_step, GmmModel, SynthSpec, Workers};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SynthSpec::random_clusters(2, 3, 11)?;
    let (data, _) = spec.sample(5000, 11)?;

    // deliberately poor start: all means near the origin
    let mut model = GmmModel::from_params(
        &[[-0.5, 0.0], [0.0, 0.5], [0.5, 0.0]],
        &[[10.0, 10.0], [10.0, 10.0], [10.0, 10.0]],
        &[1.0 / 3.0; 3],
    )?;
    let workers = Workers::new(2)?;
    let mut prev = f64::NEG_INFINITY;
    for it in 0..30 {
        let (next, ll) = em_step(&data, &model, 1e-10, &workers)?;
        println!("iter {it:2}: avg log p {ll:.6}");
        if ll < prev - 1e-9 * prev.abs() {
            return Err("likelihood decreased".into());
        }
        prev = ll;
        model = next;
    }
    println!("final {:.6}, generator {:.6}", model.avg_log_p(&data)?, spec.to_model()?.avg_log_p(&data)?);
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
