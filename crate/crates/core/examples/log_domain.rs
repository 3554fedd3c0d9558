// Likelihoods are computed in the log domain, so points far from every
// mean still get a finite score where the plain density underflows to 0.

use gmm_diag::{log_add, GmmModel};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let model = GmmModel::from_params(&[[0.0, 0.0], [3.0, 1.0]], &[[1.0, 1.0], [0.5, 2.0]], &[0.4, 0.6])?;

    for far in [0.0, 10.0, 1e3, 1e6] {
        let x = [far, -far];
        let log_p = model.log_p(&x)?;
        println!("x = ({far:e}, {:e})  log p = {log_p:.6e}  p = {:e}", -far, log_p.exp());
        if !log_p.is_finite() {
            return Err("log-likelihood should stay finite".into());
        }
    }

    // e^1000 overflows, ln(e^1000 + e^999) does not
    println!("log_add(1000, 999) = {}", log_add(1000.0, 999.0));
    println!("per-component: {:.4} {:.4}", model.log_p_comp(&[1.0, 1.0], 0)?, model.log_p_comp(&[1.0, 1.0], 1)?);
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
