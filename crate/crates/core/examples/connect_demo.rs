//! Stage-1 connecting step: seed point, parameter Newton on c_2, and the
//! certified itinerary B_0 A B_1^2 B_0^10 of the same point under the new map.

use padic_wander::cli::connect_demo;
use padic_wander::family::orbit_json_lines;

fn main() -> padic_wander::error::Result<()> {
    let p = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2);
    let t = connect_demo(p, 0, 96)?;
    println!("p = {p}, seed field e = {}", t.seed_field.tower.iter().map(|l| l.d).product::<u64>());
    println!("v(x) = {}, v(w_1) = {}", t.seed_point.valuation, t.fixed_point_valuation);
    let s = &t.connect;
    println!("v(H(c)) = {} (predicted {})", s.v_h_initial, s.v_h_predicted);
    println!("slope valuations: {} (predicted {})", s.v_slope.iter().map(|v| v.0.to_string()).collect::<Vec<_>>().join(" "), s.v_slope_predicted);
    println!("v(c''_2 - c_2) = {} (predicted {})", s.v_shift, s.v_shift_predicted);
    println!("residual v(H(c'')) = {} after {} iterations", s.residual, s.iterations);
    println!("itinerary: {} ({} steps certified)", t.itinerary, t.certified_steps);
    println!("ok: {}", t.ok());
    print!("{}", orbit_json_lines(&t.orbit)?);
    Ok(())
}
