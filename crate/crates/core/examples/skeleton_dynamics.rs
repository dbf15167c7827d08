//! Radius map φ on log-radii for greedy radii: slopes, breakpoints, the fixed
//! radius, inverse branch, and the derived constants Λ_j, σ_j, n_j.

use padic_wander::skeleton::{
    check_generic, compute_n, lambda_log, make_generic, phi_inv_log, phi_log, s_log, varrho_log, LogRadius,
};

fn main() -> padic_wander::error::Result<()> {
    for p in [2, 3, 5] {
        let cfg = make_generic(p, 6, 2)?;
        let rho = varrho_log(p);
        let qs: Vec<String> = (1..=cfg.horizon()).map(|j| cfg.q(j).to_string()).collect();
        println!("p = {p}: radii q = [{}], log ρ = {rho}", qs.join(", "));
        println!("  φ(log ρ) = {}", phi_log(&cfg, &rho)?);
        println!("  generic: {:?}", check_generic(&cfg, 32));
        for j in 1..=cfg.horizon() {
            let q = cfg.q(j);
            println!(
                "  j = {j}: φ(q_j) = {:>5}  Λ_j = {:>4}  σ_j = {:>9}  n_j = {}",
                phi_log(&cfg, q)?.to_string(),
                lambda_log(&cfg, j)?.to_string(),
                s_log(&cfg, j)?.to_string(),
                compute_n(&cfg, j)?
            );
        }
        let x = LogRadius::new(7, 3);
        let y = phi_log(&cfg, &x)?;
        println!("  φ(7/3) = {y}, φ^-1 back: {}", phi_inv_log(&cfg, &y)?);
    }
    Ok(())
}
