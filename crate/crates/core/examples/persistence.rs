// Saving and loading models. The text format keeps every bit.

use gmm_diag::{learn, FitConfig, GmmModel, SynthSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let (data, _) = SynthSpec::random_clusters(3, 3, 5)?.sample(3000, 5)?;
    let (model, _) = learn(&data, &FitConfig::new(3))?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("model.gmm");
    model.save(&path)?;
    print!("{}", std::fs::read_to_string(&path)?);

    let loaded = GmmModel::load(&path)?;
    let (a, b) = (model.avg_log_p(&data)?, loaded.avg_log_p(&data)?);
    println!("in memory {a:.17e}\nreloaded  {b:.17e}");
    if loaded != model || a.to_bits() != b.to_bits() {
        return Err("round trip changed the model".into());
    }

    match GmmModel::from_text("GMM_DIAG 1\n2 1\n1.0\n0 0\n1 -1\n") {
        Err(e) => println!("rejected bad file: {e}"),
        Ok(_) => return Err("negative variance accepted".into()),
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
