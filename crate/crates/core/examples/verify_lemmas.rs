//! Sampled checks of the norm, perturbation, derivative and stability laws,
//! followed by two negative controls that must fail.

use padic_wander::cli::{verify, Lemma};
use padic_wander::family::{MicroPlan, ParameterVector};
use padic_wander::padic::FieldContext;
use padic_wander::skeleton::make_generic;
use padic_wander::verify::stability_control;

fn main() -> padic_wander::error::Result<()> {
    let cfg = make_generic(3, 6, 2)?;
    let out = verify(&cfg, Lemma::All, 50, 1, None, 96)?;
    for r in &out.reports {
        println!(
            "{:<15} trials {:>4}  failures {}  certified {:>4}  worst margin {}",
            r.lemma,
            r.trials,
            r.failures,
            r.certified,
            r.worst_margin.as_ref().map_or("-".into(), |m| m.to_string())
        );
    }
    println!("suite passed: {}", out.passed);

    let tampered = verify(&cfg, Lemma::Norms, 50, 1, Some(1), 96)?;
    println!("dropped factor 1: {} failures", tampered.reports[0].failures);

    let ctx = FieldContext::qp(3, 96)?;
    let c = ParameterVector::random(&cfg, &ctx, 1)?;
    let ctrl = stability_control(&c, &MicroPlan::standard(&cfg)?, 20, 1);
    println!("stability beyond threshold: {} of {} prefixes changed", ctrl.failures, ctrl.trials);
    Ok(())
}
