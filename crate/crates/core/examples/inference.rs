// Assignment, histograms, responsibilities and sampling with a known model.

use gmm_diag::{responsibilities, AssignMode, GmmModel};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let model = GmmModel::from_params(&[[-2.0], [0.0], [4.0]], &[[0.5], [4.0], [1.0]], &[0.2, 0.5, 0.3])?;

    let x = [-1.0];
    println!("eucl assign {}", model.assign(&x, AssignMode::EuclDist)?);
    println!("prob assign {}", model.assign(&x, AssignMode::ProbDist)?);
    println!("responsibilities {:.4?}", responsibilities(&x, &model)?);

    let (data, labels) = model.generate_labelled(20_000, 42)?;
    let hist = model.norm_hist(&data, AssignMode::ProbDist)?;
    println!("hist {hist:.4?}");
    println!("hefts {:.4?}", model.hefts());

    let agree = model
        .assign_batch(&data, AssignMode::ProbDist)?
        .iter()
        .zip(&labels)
        .filter(|(a, b)| a == b)
        .count();
    println!("assignment matches generating component for {agree} of 20000 samples");
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
