//! Repelling fixed points w_j in each B_j: multipliers |λ_j| and the distances of
//! the inverse-branch orbit h^ℓ(0) to w_j.

use padic_wander::family::{eval_fprime, fixed_point, inverse_orbit, ParameterVector};
use padic_wander::padic::FieldContext;
use padic_wander::rational::int;
use padic_wander::skeleton::{lambda_log, make_generic};

fn main() -> padic_wander::error::Result<()> {
    let cfg = make_generic(2, 5, 2)?;
    let ctx = FieldContext::qp(2, 320)?;
    let c = ParameterVector::random(&cfg, &ctx, 3)?;
    for j in 1..cfg.horizon() {
        let w = fixed_point(&c, j, &int(260))?;
        let lam = lambda_log(&cfg, j)?;
        let mult = eval_fprime(&c, &w)?.value.valuation()?;
        println!("w_{j}: v(w) = {}, v(f'(w)) = {mult} (expected -Λ = -{lam})", w.valuation()?);
        let orbit = inverse_orbit(&c, j, 5, &int(260))?;
        let dists: Vec<String> =
            orbit.iter().map(|h| h.sub(&w).and_then(|d| d.valuation()).map(|v| v.to_string()).unwrap()).collect();
        println!("   v(h^ℓ(0) - w), ℓ = 1..5: {}", dists.join(", "));
    }
    Ok(())
}
