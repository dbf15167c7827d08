//! Stage plan for four radii: the hand-checkable values ℓ_2 = 4, m_1 = 16, every
//! inequality margin, and the forced radius trace of the stage-2 word.

use padic_wander::skeleton::{LogRadius, RadiiConfig};
use padic_wander::synthesis::{build_word, check_inequalities, radius_trace, synthesize};

fn main() -> padic_wander::error::Result<()> {
    let cfg = RadiiConfig::from_integers(2, &[2, 4, 7, 12])?;
    let eps = vec![LogRadius::integer(1); 3];
    let plan = synthesize(&cfg, &eps, 2)?;
    for k in 1..=2 {
        println!(
            "stage {k}: m = {:>2}  n = {}  ℓ_{} = {}  e_{} = {}  N = {}",
            plan.m(k),
            plan.n(k),
            k + 1,
            plan.ell(k + 1),
            k + 1,
            plan.e(k + 1),
            plan.big_n(k)
        );
    }
    println!("word: {}", build_word(&plan, 2)?);
    for m in check_inequalities(&cfg, &plan)? {
        println!("  {:?} j={:?} k={:?}: margin {}", m.family, m.j, m.k, m.value);
    }
    let trace = radius_trace(&cfg, &plan, 2)?;
    let entries: Vec<String> = trace.entry_radii.iter().map(|r| r.to_string()).collect();
    println!("entry radii r_k: {}", entries.join(", "));
    println!("forced steps: {}", trace.steps.len());
    Ok(())
}
