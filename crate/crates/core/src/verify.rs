//! Sampled, exact-valuation checks of the quantitative lemmas.
//!
//! Every check compares rational valuations exactly. A trial passes when all its
//! comparisons hold, and is certified when every compared valuation was decidable
//! and (for single evaluations) not swamped by the tail bound. Trials run in
//! parallel; trial `t` draws from ChaCha stream `t` of the master seed, so
//! reports do not depend on scheduling.

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, EXIT_NUMERIC};
use crate::family::{
    classify, eval_f, eval_fprime, eval_partial, find_seed, fixed_point, inverse_orbit, itinerary,
    iterate, EvalResult, MicroPlan, ParameterVector, Seed,
};
use crate::padic::{random_with_valuation_rng, PadicElement};
use crate::rational::{ceil_i64, floor_i64, format_rational, int, rat, serde_opt_rational};
use crate::skeleton::{compute_n, lambda_log, phi_log, s_log, LogRadius, RadiiConfig};
use crate::synthesis::Symbol;

/// Outcome of one lemma check over many trials.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub lemma: String,
    pub trials: u64,
    pub failures: u64,
    pub certified: u64,
    /// Smallest slack over all comparisons; `0` for a satisfied equality,
    /// negative on failure. `None` when nothing was compared.
    #[serde(with = "serde_opt_rational")]
    pub worst_margin: Option<BigRational>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<FailureNote>,
    /// First trial with a comparison the precision could not decide.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_undecided: Option<FailureNote>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureNote {
    pub trial: u64,
    pub detail: String,
}

impl CheckReport {
    pub fn empty(lemma: &str, seed: u64) -> Self {
        CheckReport {
            lemma: lemma.to_string(),
            trials: 0,
            failures: 0,
            certified: 0,
            worst_margin: None,
            seed,
            first_failure: None,
            first_undecided: None,
        }
    }

    fn from_trial(lemma: &str, seed: u64, trial: u64, ch: Checks) -> Self {
        CheckReport {
            lemma: lemma.to_string(),
            trials: 1,
            failures: u64::from(!ch.ok),
            certified: u64::from(ch.certified),
            worst_margin: ch.margin,
            seed,
            first_failure: ch.detail.filter(|_| !ch.ok).map(|detail| FailureNote { trial, detail }),
            first_undecided: ch.undecided.map(|detail| FailureNote { trial, detail }),
        }
    }

    /// Associative combination of two reports over disjoint trials.
    pub fn merge(mut self, other: CheckReport) -> CheckReport {
        self.trials += other.trials;
        self.failures += other.failures;
        self.certified += other.certified;
        self.worst_margin = match (self.worst_margin.take(), other.worst_margin) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.first_failure = earliest(self.first_failure.take(), other.first_failure);
        self.first_undecided = earliest(self.first_undecided.take(), other.first_undecided);
        self
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn fully_certified(&self) -> bool {
        self.certified == self.trials
    }

    /// Certified trials as an exact fraction; `1` when vacuous.
    pub fn certified_fraction(&self) -> BigRational {
        if self.trials == 0 {
            int(1)
        } else {
            rat(self.certified as i64, self.trials as i64)
        }
    }

    /// Report for a check whose setup raised `e`: undecided when precision ran
    /// out, failed otherwise.
    pub fn precondition_error(lemma: &str, seed: u64, trials: u64, e: &Error) -> Self {
        if e.exit_code() == EXIT_NUMERIC {
            Self::precondition_undecided(lemma, seed, trials, e.to_string())
        } else {
            Self::precondition_failure(lemma, seed, trials, e.to_string())
        }
    }

    fn precondition_undecided(lemma: &str, seed: u64, trials: u64, detail: String) -> Self {
        CheckReport {
            lemma: lemma.to_string(),
            trials: trials.max(1),
            first_undecided: Some(FailureNote { trial: 0, detail: format!("precondition undecided: {detail}") }),
            ..CheckReport::empty(lemma, seed)
        }
    }

    fn precondition_failure(lemma: &str, seed: u64, trials: u64, detail: String) -> Self {
        CheckReport {
            lemma: lemma.to_string(),
            trials: trials.max(1),
            failures: trials.max(1),
            certified: 0,
            worst_margin: None,
            seed,
            first_failure: Some(FailureNote { trial: 0, detail: format!("precondition violated: {detail}") }),
            first_undecided: None,
        }
    }
}

fn earliest(a: Option<FailureNote>, b: Option<FailureNote>) -> Option<FailureNote> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if a.trial <= b.trial { a } else { b }),
        (a, b) => a.or(b),
    }
}

/// Comparisons accumulated within one trial.
struct Checks {
    ok: bool,
    certified: bool,
    margin: Option<BigRational>,
    detail: Option<String>,
    undecided: Option<String>,
}

impl Checks {
    fn new() -> Self {
        Checks { ok: true, certified: true, margin: None, detail: None, undecided: None }
    }

    fn undecided(&mut self, what: &str) {
        if self.certified {
            self.undecided = Some(what.to_string());
        }
        self.certified = false;
    }

    fn record(&mut self, what: &str, margin: BigRational, ok: bool) {
        if !ok && self.ok {
            self.detail = Some(format!("{what}: margin {}", format_rational(&margin)));
        }
        self.ok &= ok;
        self.margin = Some(match self.margin.take() {
            Some(m) => m.min(margin),
            None => margin,
        });
    }

    fn fail(&mut self, what: String) {
        if self.ok {
            self.detail = Some(what);
        }
        self.ok = false;
    }

    /// `measured == predicted`; an undecidable measurement only clears `certified`.
    fn equal(&mut self, what: &str, measured: Option<BigRational>, predicted: &BigRational) {
        match measured {
            Some(m) => {
                let diff = (&m - predicted).abs();
                let ok = diff.is_zero();
                self.record(
                    &format!("{what}: measured {} predicted {}", format_rational(&m), format_rational(predicted)),
                    -diff,
                    ok,
                );
            }
            None => self.undecided(what),
        }
    }

    /// `measured > bound`, or `>=` when `strict` is false.
    fn above(&mut self, what: &str, measured: Option<BigRational>, bound: &BigRational, strict: bool) {
        match measured {
            Some(m) => {
                let slack = &m - bound;
                let ok = if strict { slack.is_positive() } else { !slack.is_negative() };
                self.record(&format!("{what}: {} vs bound {}", format_rational(&m), format_rational(bound)), slack, ok);
            }
            None => self.undecided(what),
        }
    }

    fn same_symbol(&mut self, what: &str, got: Option<Symbol>, want: Symbol) {
        match got {
            Some(s) => self.record(&format!("{what}: {s} instead of {want}"), int(0), s == want),
            None => self.undecided(what),
        }
    }
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn run<F>(lemma: &str, trials: u64, seed: u64, body: F) -> CheckReport
where
    F: Fn(u64, &mut ChaCha8Rng) -> Result<Checks> + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            // Running out of precision leaves a trial undecided; other errors fail it.
            let ch = body(t, &mut rng).unwrap_or_else(|e| {
                let mut ch = Checks::new();
                if e.exit_code() == EXIT_NUMERIC {
                    ch.undecided(&format!("error: {e}"));
                } else {
                    ch.fail(format!("error: {e}"));
                }
                ch
            });
            CheckReport::from_trial(lemma, seed, t, ch)
        })
        .reduce(|| CheckReport::empty(lemma, seed), CheckReport::merge)
}

/// Valuation of a single evaluation, provided its error bound lies above it.
fn cert_val(r: &EvalResult) -> Option<BigRational> {
    let v = r.value.valuation().ok()?;
    match &r.err_val {
        Some(e) if e <= &v => None,
        _ => Some(v),
    }
}

/// Certified lower bound on the valuation: exact when decidable, otherwise the
/// error bound, which the true value and the computed one both exceed.
fn cert_lower(r: &EvalResult) -> Option<BigRational> {
    match (r.value.valuation().ok(), &r.err_val) {
        (Some(v), Some(e)) => Some(v.min(e.clone())),
        (Some(v), None) => Some(v),
        (None, e) => e.clone(),
    }
}

/// Valuation of a difference of two evaluations sharing the same tail.
fn diff_val(a: &EvalResult, b: &EvalResult) -> Result<Option<BigRational>> {
    Ok(a.value.sub(&b.value)?.valuation().ok())
}

fn sample(c: &ParameterVector, v: i64, rng: &mut ChaCha8Rng) -> Result<PadicElement> {
    random_with_valuation_rng(c.ctx(), &int(v), rng)
}

/// Smallest integer valuation strictly inside `B_j` relative to `c_j`.
fn first_inside(q: &LogRadius) -> i64 {
    floor_i64(&-q.value().clone()).unwrap() + 1
}

fn neg_phi(cfg: &RadiiConfig, v: &BigRational) -> Result<BigRational> {
    Ok(-phi_log(cfg, &LogRadius::from_rational(-v.clone()))?.into_rational())
}

/// A point of `A` with integer valuation in `[lo, hi]`, by rejection.
fn sample_a(c: &ParameterVector, lo: i64, hi: i64, rng: &mut ChaCha8Rng) -> Result<PadicElement> {
    for _ in 0..256 {
        let z = sample(c, rng.gen_range(lo..=hi), rng)?;
        if classify(c, &z)? == Symbol::A {
            return Ok(z);
        }
    }
    Err(Error::InvalidConfig("no point of A found by rejection".into()))
}

/// Norm law on `A ∪ B_0`, derivative laws on `B_0`, `A` and `B_j`, isometry on
/// `B_j`, and the mean value identity on `B_0`. `trials` samples per region;
/// regions are `B_0`, `A`, `B_1 … B_{J-1}`.
pub fn verify_norms(c: &ParameterVector, trials: u64, seed: u64) -> CheckReport {
    let cfg = c.cfg().clone();
    let jj = cfg.horizon();
    let regions = jj as u64 + 1;
    let q_s = cfg.tail_surrogate().into_rational();
    let inv_p1 = rat(1, cfg.p_i64() - 1);
    let lo = first_inside(cfg.last());
    run("norms", trials * regions, seed, |t, rng| {
        let mut ch = Checks::new();
        match t % regions {
            0 => {
                let z = sample(c, rng.gen_range(1..=2), rng)?;
                let vz = z.valuation()?;
                let f = eval_f(c, &z)?;
                let fp = eval_fprime(c, &z)?;
                let vf_pred = neg_phi(&cfg, &vz)?;
                ch.equal("v(f) on B_0", cert_val(&f), &vf_pred);
                ch.equal("v(f') on B_0", cert_val(&fp), &(&vf_pred - &vz + int(1)));
                let gap = floor_i64(&(&vz + &inv_p1)).unwrap() + 1 + rng.gen_range(0..3);
                let w = z.add(&sample(c, gap, rng)?)?;
                let fw = eval_f(c, &w)?;
                let dzw = int(gap);
                let measured = diff_val(&f, &fw)?;
                let tail_room = fw.value.valuation()? + &dzw + &q_s;
                let pred = &vf_pred - &vz + int(1) + &dzw;
                ch.equal("mean value on B_0", measured.filter(|m| m < &tail_room), &pred);
            }
            1 => {
                let z = sample_a(c, lo, 0, rng)?;
                let vz = z.valuation()?;
                let f = eval_f(c, &z)?;
                let fp = eval_fprime(c, &z)?;
                let vf_pred = neg_phi(&cfg, &vz)?;
                ch.equal("v(f) on A", cert_val(&f), &vf_pred);
                ch.above("v(f') on A", cert_lower(&fp), &(&vf_pred - &vz), false);
            }
            r => {
                let j = r as usize - 1;
                let lam = lambda_log(&cfg, j)?.into_rational();
                let inside = first_inside(cfg.q(j));
                let dz = inside + rng.gen_range(0..4);
                let dw = inside + rng.gen_range(0..4);
                let z = c.c(j).add(&sample(c, dz, rng)?)?;
                let w = c.c(j).add(&sample(c, dw, rng)?)?;
                ch.same_symbol("classify", classify(c, &z).ok(), Symbol::B(j));
                let f = eval_f(c, &z)?;
                let fw = eval_f(c, &w)?;
                let fp = eval_fprime(c, &z)?;
                ch.equal("v(f) on B_j", cert_val(&f), &(int(dz) - &lam));
                ch.equal("v(f') on B_j", cert_val(&fp), &-lam.clone());
                let vzw = z.sub(&w)?.valuation().ok();
                if let Some(vzw) = vzw {
                    ch.equal("isometry on B_j", diff_val(&f, &fw)?, &(vzw - &lam));
                } else {
                    ch.undecided("isometry on B_j: z = w");
                }
            }
        }
        Ok(ch)
    })
}

/// Parameter variation checks for `c_alt`, which must differ from `c` in exactly
/// one coordinate `j` with `v(c'_j - c_j) > -q_j`:
/// the variation identity on `B_k` (`k < j`), the strict bound
/// `v(f_{c'}(z) - f_c(z)) > v(f_c(z))` on `A ∪ B_0`, and the variation size over
/// `Δ_k`-type perturbations, which grows strictly with `k`.
pub fn verify_perturbation(c: &ParameterVector, c_alt: &ParameterVector, trials: u64, seed: u64) -> CheckReport {
    const LEMMA: &str = "perturbation";
    let cfg = c.cfg().clone();
    let jj = cfg.horizon();
    let mut changed = Vec::new();
    for j in 1..=jj {
        match c.c(j).sub(c_alt.c(j)).map(|d| d.valuation()) {
            Ok(Ok(v)) => changed.push((j, v)),
            Ok(Err(_)) => {}
            Err(e) => return CheckReport::precondition_error(LEMMA, seed, trials, &e),
        }
    }
    let (j, vdc) = match changed.as_slice() {
        [(j, v)] if v > &-cfg.q(*j).value().clone() => (*j, v.clone()),
        [] => (0, int(0)),
        _ => {
            let what = changed.iter().map(|(j, v)| format!("c_{j} moved by v = {}", format_rational(v)));
            return CheckReport::precondition_failure(LEMMA, seed, trials, what.collect::<Vec<_>>().join(", "));
        }
    };
    let lo = first_inside(cfg.last());
    // Variation on B_k needs some k < j; variation over Δ_k needs J >= 2.
    let kinds: Vec<u64> = [(0, j > 1), (1, true), (2, jj > 1)].iter().filter(|k| k.1).map(|k| k.0).collect();
    run(LEMMA, trials, seed, |t, rng| {
        let mut ch = Checks::new();
        match kinds[(t % kinds.len() as u64) as usize] {
            0 => {
                let k = rng.gen_range(1..j);
                let lam = lambda_log(&cfg, k)?.into_rational();
                let z = c.c(k).add(&sample(c, first_inside(cfg.q(k)) + rng.gen_range(0..4), rng)?)?;
                let f = eval_f(c, &z)?;
                let measured = diff_val(&eval_f(c_alt, &z)?, &f)?;
                let exact = f.value.valuation()? + z.valuation()? + &vdc + int(2) * cfg.q(j).value();
                ch.equal("variation on B_k", measured.clone(), &exact);
                // The supremum over B_k, attained only towards its boundary.
                let sup = -lam - int(2) * cfg.q(k).value() + int(2) * cfg.q(j).value() + &vdc;
                ch.above("variation bound on B_k", measured, &sup, true);
            }
            1 => {
                if j == 0 {
                    let z = sample(c, rng.gen_range(lo..=2), rng)?;
                    let d = eval_f(c_alt, &z)?.value.sub(&eval_f(c, &z)?.value)?;
                    if !d.is_zero() {
                        ch.fail("identical parameters give distinguishable values".into());
                    }
                    return Ok(ch);
                }
                let z = loop {
                    let z = sample(c, rng.gen_range(lo..=2), rng)?;
                    if matches!(classify(c, &z)?, Symbol::A | Symbol::B(0)) {
                        break z;
                    }
                };
                let f = eval_f(c, &z)?;
                let d = eval_f(c_alt, &z)?.value.sub(&f.value)?;
                let vf = f.value.valuation()?;
                match d.valuation_lower_bound() {
                    Some(lb) => ch.above("tangent bound", Some(lb), &vf, true),
                    None => ch.record("tangent bound", int(0), true),
                }
            }
            _ => {
                let k = rng.gen_range(1..jj);
                let z = sample(c, 0, rng)?;
                let mut alt = c.clone();
                let mut vk = int(0);
                for i in k..=jj {
                    let v = first_inside(cfg.q(i));
                    let a = c.c(i).add(&sample(c, v, rng)?)?;
                    if i == k {
                        vk = a.sub(c.c(i))?.valuation()?;
                    }
                    alt = alt.with_param(i, a)?;
                }
                let f = eval_f(c, &z)?;
                let pred = f.value.valuation()? + vk + int(2) * cfg.q(k).value();
                ch.equal("variation over Δ_k", diff_val(&eval_f(&alt, &z)?, &f)?, &pred);
            }
        }
        Ok(ch)
    })
}

/// `(f^N_{c + δ e_j}(z) - f^N_c(z)) / δ` at two valuation-separated `δ`; the
/// valuation counts only when both agree.
fn fd_partial(c: &ParameterVector, z: &PadicElement, j: usize, n: u64) -> Result<Option<BigRational>> {
    let ctx = c.ctx();
    let s = ctx.working_precision() / int(3);
    let s = ceil_i64(&s).unwrap();
    let base = iterate(c, z, n)?;
    let mut vals = Vec::new();
    for shift in [s, s + 4] {
        let delta = PadicElement::p_power(ctx, shift);
        let alt = c.with_param(j, c.c(j).add(&delta)?)?;
        let d = iterate(&alt, z, n)?.sub(&base)?.div(&delta)?;
        vals.push(d.valuation().ok());
    }
    Ok(match (&vals[0], &vals[1]) {
        (Some(a), Some(b)) if a == b => Some(a.clone()),
        _ => None,
    })
}

/// Parameter-derivative valuations by finite differences: one application
/// (`v(∂_j f) = v(z) + v(f) + 2 q_j`), `N`-fold composition inside
/// `D(0, R_j) ∖ (B_1 ∪ … ∪ B_{j-1})`, and the stage-1 orbit of a seed point
/// (`log|∂_j f^{N_1+ℓ'}| = q_1 + σ_1 - 2 q_j + ℓ' Λ_1`).
pub fn verify_partials(c: &ParameterVector, samples: u64, orbit_len: u64, seed: u64) -> CheckReport {
    const LEMMA: &str = "partials";
    let cfg = c.cfg().clone();
    let jj = cfg.horizon();
    let orbit_len = orbit_len.max(1);
    let micro = MicroPlan::standard(&cfg).and_then(|plan| {
        let target = c.ctx().working_precision() * rat(3, 4);
        find_seed(c, plan.m1, plan.n1, &target).map(|s| (plan, s))
    });
    let micro = match micro {
        Ok(m) if m.0.big_n() < orbit_len && jj >= 2 => Some(m),
        Ok(_) => None,
        Err(e) => return CheckReport::precondition_error(LEMMA, seed, samples, &e),
    };
    let kinds = if micro.is_some() { 3 } else { 2 };
    run(LEMMA, samples, seed, |t, rng| {
        let mut ch = Checks::new();
        match t % kinds {
            0 => {
                let j = rng.gen_range(1..=jj);
                let z = sample(c, rng.gen_range(first_inside(cfg.q(j))..=2), rng)?;
                let f = eval_f(c, &z)?;
                let pred = z.valuation()? + f.value.valuation()? + int(2) * cfg.q(j).value();
                ch.equal("∂_j f (analytic)", cert_val(&eval_partial(c, &z, j)?), &pred);
                ch.equal("∂_j f (difference)", fd_partial(c, &z, j, 1)?, &pred);
            }
            1 => {
                let (z, j, n, r) = loop {
                    let j = rng.gen_range(1..=jj);
                    let n = rng.gen_range(1..=orbit_len);
                    let top = ceil_i64(cfg.q(j).value()).unwrap() - 1;
                    if top < 0 {
                        continue;
                    }
                    let r = rng.gen_range(0..=top);
                    let mut radii = vec![LogRadius::integer(r)];
                    let mut inside = true;
                    for _ in 0..n {
                        let last = radii.last().unwrap();
                        if last >= cfg.q(j) {
                            inside = false;
                            break;
                        }
                        let next = phi_log(&cfg, last)?;
                        radii.push(next);
                    }
                    if !inside {
                        continue;
                    }
                    let z = sample(c, -r, rng)?;
                    let mut y = z.clone();
                    let mut clean = true;
                    for _ in 0..n {
                        if matches!(classify(c, &y)?, Symbol::B(i) if i > 0) {
                            clean = false;
                            break;
                        }
                        y = eval_f(c, &y)?.value;
                    }
                    if clean {
                        break (z, j, n, radii);
                    }
                };
                let pred = -(r[n as usize].value() + r[n as usize - 1].value()) + int(2) * cfg.q(j).value();
                ch.equal("∂_j f^N", fd_partial(c, &z, j, n)?, &pred);
            }
            _ => {
                let (plan, seed_pt): &(MicroPlan, Seed) = micro.as_ref().unwrap();
                let j = rng.gen_range(2..=jj);
                let ell = rng.gen_range(0..=orbit_len - plan.big_n());
                let x = &seed_pt.x;
                let wp = x.ctx().working_precision();
                // Keep f^{N_1+ℓ'}(z) within distance R_1 of w_1 after ℓ' expansions.
                let lam = lambda_log(&cfg, 1)?.into_rational();
                let reach = cfg.q(1).value() + int(ell as i64) * &lam;
                let dv = ceil_i64(&reach).unwrap() + 8 + rng.gen_range(0..4);
                if int(dv) >= &wp * rat(3, 4) - int(8) {
                    return Err(Error::PrecisionExhausted(format!("orbit length {ell} needs more precision")));
                }
                let z = x.add(&random_with_valuation_rng(x.ctx(), &int(dv), rng)?)?;
                let log = cfg.q(1).value() + s_log(&cfg, 1)?.value() - int(2) * cfg.q(j).value()
                    + int(ell as i64) * lambda_log(&cfg, 1)?.value();
                ch.equal("∂_j f^{N_1+ℓ'}", fd_partial(&seed_pt.params, &z, j, plan.big_n() + ell)?, &-log);
            }
        }
        Ok(ch)
    })
}

/// How the stability harness perturbs parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StabilityMode {
    /// `c_2` one unit inside `ε_2`, alternately together with `c_j`, `j >= 3`,
    /// one unit inside `R_j`.
    Within,
    /// Negative control: `c_1` moved one unit inside `R_1`. The prefix
    /// `B_0^{m1} A^{n1} B_1` is the same for every admissible parameter, so the
    /// control watches one more symbol, where the moved fixed point shows.
    Beyond,
}

/// Certified prefix `B_0^{m1} A^{n1} B_1` of a seed point stays unchanged under
/// perturbations inside the plan's thresholds.
pub fn verify_stability_micro(c: &ParameterVector, plan: &MicroPlan, trials: u64, seed: u64) -> CheckReport {
    stability_trials(c, plan, trials, seed, StabilityMode::Within)
}

/// Negative control for [`verify_stability_micro`]: trials whose prefix changes
/// are reported as failures, so a sensitive harness shows `failures > 0`.
pub fn stability_control(c: &ParameterVector, plan: &MicroPlan, trials: u64, seed: u64) -> CheckReport {
    stability_trials(c, plan, trials, seed, StabilityMode::Beyond)
}

fn stability_trials(c: &ParameterVector, plan: &MicroPlan, trials: u64, seed: u64, mode: StabilityMode) -> CheckReport {
    let lemma = match mode {
        StabilityMode::Within => "stability",
        StabilityMode::Beyond => "stability-control",
    };
    let cfg = c.cfg().clone();
    let target = c.ctx().working_precision() * rat(3, 4);
    let seed_pt = match find_seed(c, plan.m1, plan.n1, &target) {
        Ok(s) => s,
        Err(e) => return CheckReport::precondition_error(lemma, seed, trials, &e),
    };
    let len = plan.big_n() + 1 + u64::from(mode == StabilityMode::Beyond);
    let (base, certified) = itinerary(&seed_pt.params, &seed_pt.x, len);
    if certified < len {
        return CheckReport::precondition_undecided(lemma, seed, trials, format!("seed prefix {base} not certified"));
    }
    let ext = seed_pt.params.ctx().clone();
    run(lemma, trials, seed, |t, rng| {
        let mut ch = Checks::new();
        let mut alt = seed_pt.params.clone();
        let moved: Vec<(usize, i64)> = match mode {
            StabilityMode::Within => {
                let mut v = vec![(2, floor_i64(&-plan.eps_log.value().clone()).unwrap() + 1)];
                if t % 2 == 1 {
                    v.extend((3..=cfg.horizon()).map(|j| (j, first_inside(cfg.q(j)))));
                }
                v
            }
            StabilityMode::Beyond => vec![(1, first_inside(cfg.q(1)))],
        };
        for (j, v) in moved {
            let cj = c.c(j);
            let a = loop {
                let a = cj.add(&sample(c, v, rng)?)?;
                if a.valuation()? == -cfg.q(j).value().clone() {
                    break a;
                }
            };
            alt = alt.with_param(j, a.embed(&ext)?)?;
        }
        let (word, n) = itinerary(&alt, &seed_pt.x, len);
        if n < len {
            ch.undecided(&format!("prefix certified for {n} of {len} steps"));
        } else {
            ch.record(&format!("prefix {word} instead of {base}"), int(0), word == base);
        }
        Ok(ch)
    })
}

/// Points `z` with `v(z - x) > 2/(p-1)` share the certified prefix of `x`, and
/// `v((f^{m+n})'(z)) > m - q_1 - 1/(p-1)` along the way.
pub fn verify_uniform_prefix(seed_pt: &Seed, m: u64, prefix_len: u64, trials: u64, seed: u64) -> CheckReport {
    const LEMMA: &str = "uniform-prefix";
    let c = &seed_pt.params;
    let cfg = c.cfg().clone();
    let (base, certified) = itinerary(c, &seed_pt.x, prefix_len);
    if certified < prefix_len {
        return CheckReport::precondition_undecided(LEMMA, seed, trials, format!("prefix {base} not certified"));
    }
    let n = match compute_n(&cfg, 1) {
        Ok(n) => n,
        Err(e) => return CheckReport::precondition_error(LEMMA, seed, trials, &e),
    };
    let inv_p1 = rat(1, cfg.p_i64() - 1);
    let radius = floor_i64(&(int(2) * &inv_p1)).unwrap() + 1;
    let bound = int(m as i64) - cfg.q(1).value() - &inv_p1;
    run(LEMMA, trials, seed, |t, rng| {
        let mut ch = Checks::new();
        let z = if t == 0 {
            seed_pt.x.clone()
        } else {
            let v = radius + rng.gen_range(0..3);
            seed_pt.x.add(&random_with_valuation_rng(c.ctx(), &int(v), rng)?)?
        };
        let (word, got) = itinerary(c, &z, prefix_len);
        if got < prefix_len {
            ch.undecided(&format!("prefix certified for {got} of {prefix_len} steps"));
        } else {
            ch.record(&format!("prefix {word} instead of {base}"), int(0), word == base);
        }
        let mut y = z;
        let mut vd = int(0);
        for _ in 0..m + n {
            let d = eval_fprime(c, &y)?;
            match cert_val(&d) {
                Some(v) => vd += v,
                None => ch.undecided("derivative along the orbit"),
            }
            y = eval_f(c, &y)?.value;
        }
        ch.above("(f^{m+n})' bound", Some(vd), &bound, true);
        Ok(ch)
    })
}

/// Multipliers `v(f'(w_j)) = -Λ_j` and the inverse-branch distance law
/// `v(h^ℓ(0) - w_j) = -q_j + ℓ Λ_j` for `ℓ <= ell_max`, one trial per `j < J`.
///
/// Each disk is worked at a precision sized to its largest predicted distance.
pub fn verify_fixed_points(c: &ParameterVector, ell_max: u64) -> CheckReport {
    const LEMMA: &str = "fixed-points";
    let cfg = c.cfg().clone();
    let jj = cfg.horizon() as u64;
    run(LEMMA, jj.saturating_sub(1), 0, |t, _| {
        let mut ch = Checks::new();
        let j = t as usize + 1;
        let q = cfg.q(j).value().clone();
        let lam = lambda_log(&cfg, j)?.into_rational();
        let need = -q.clone() + int(ell_max as i64 + 2) * &lam;
        // Each factor of the product can cost up to its radius in digits.
        let q_top: BigRational = (1..=cfg.horizon()).map(|i| cfg.q(i).value().clone()).sum();
        let wp = c.ctx().working_precision().max(need + int(64) + int(2) * &q_top);
        let ctx = c.ctx().with_working_precision(&wp)?;
        let cj = c.in_context(&ctx)?;
        let target = &wp - int(32) - q_top;
        let w = fixed_point(&cj, j, &target)?;
        ch.same_symbol("w_j membership", classify(&cj, &w).ok(), Symbol::B(j));
        ch.equal("multiplier", cert_val(&eval_fprime(&cj, &w)?), &-lam.clone());
        if ell_max > 0 {
            let h = inverse_orbit(&cj, j, ell_max, &target)?;
            for (i, hi) in h.iter().enumerate() {
                let pred = -q.clone() + int(i as i64 + 1) * &lam;
                ch.equal(&format!("distance law at ℓ = {}", i + 1), hi.sub(&w)?.valuation().ok(), &pred);
            }
        }
        Ok(ch)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::FieldContext;

    fn setup() -> ParameterVector {
        let cfg = RadiiConfig::from_integers(2, &[2, 4, 7, 12]).unwrap();
        let ctx = FieldContext::qp(2, 96).unwrap();
        ParameterVector::random(&cfg, &ctx, 11).unwrap()
    }

    #[test]
    fn vacuous_and_merge() {
        let c = setup();
        let r = verify_norms(&c, 0, 1);
        assert!(r.passed() && r.fully_certified() && r.trials == 0);
        assert_eq!(r.certified_fraction(), int(1));
        let a = CheckReport { trials: 2, failures: 1, certified: 2, worst_margin: Some(int(-1)), ..CheckReport::empty("x", 0) };
        let b = CheckReport { trials: 3, certified: 1, worst_margin: Some(int(0)), ..CheckReport::empty("x", 0) };
        let ab = a.clone().merge(b.clone());
        assert_eq!(ab, b.merge(a));
        assert_eq!((ab.trials, ab.failures, ab.certified), (5, 1, 3));
        assert_eq!(ab.worst_margin, Some(int(-1)));
    }

    #[test]
    fn norms_pass_and_control_fails() {
        let c = setup();
        let r = verify_norms(&c, 20, 1);
        assert!(r.passed(), "{r:?}");
        assert!(r.fully_certified(), "{r:?}");
        assert_eq!(r, verify_norms(&c, 20, 1));
        let bad = verify_norms(&c.with_dropped_factor(1).unwrap(), 20, 1);
        assert!(bad.failures > 0);
    }

    #[test]
    fn perturbation_identities() {
        let c = setup();
        let mut rng = trial_rng(5, 0);
        let d = sample(&c, -5, &mut rng).unwrap();
        let alt = c.with_param(3, c.c(3).add(&d).unwrap()).unwrap();
        let r = verify_perturbation(&c, &alt, 30, 2);
        assert!(r.passed() && r.fully_certified(), "{r:?}");
        let same = verify_perturbation(&c, &c, 6, 2);
        assert!(same.passed(), "{same:?}");
        let two = alt.with_param(2, c.c(2).add(&sample(&c, -2, &mut rng).unwrap()).unwrap()).unwrap();
        assert!(!verify_perturbation(&c, &two, 6, 2).passed());
        let cfg3 = RadiiConfig::from_integers(3, &[2, 4, 6, 8]).unwrap();
        let c3 = ParameterVector::random(&cfg3, &FieldContext::qp(3, 60).unwrap(), 1).unwrap();
        let mut rng = trial_rng(6, 0);
        let beyond = loop {
            let a = c3.c(3).add(&sample(&c3, -6, &mut rng).unwrap()).unwrap();
            if a.valuation().unwrap() == int(-6) {
                break c3.with_param(3, a).unwrap();
            }
        };
        let r = verify_perturbation(&c3, &beyond, 6, 2);
        assert!(r.first_failure.unwrap().detail.starts_with("precondition"));
    }

    #[test]
    fn partials_match() {
        let c = setup();
        let r = verify_partials(&c, 30, 5, 3);
        assert!(r.passed() && r.fully_certified(), "{r:?}");
    }

    #[test]
    fn stability_and_uniform_prefix() {
        let c = setup();
        let plan = MicroPlan::standard(c.cfg()).unwrap();
        let r = verify_stability_micro(&c, &plan, 8, 4);
        assert!(r.passed() && r.fully_certified(), "{r:?}");
        assert!(stability_control(&c, &plan, 8, 4).failures > 0);
        let s = find_seed(&c, 1, 1, &int(60)).unwrap();
        let u = verify_uniform_prefix(&s, 1, 4, 10, 5);
        assert!(u.passed() && u.fully_certified(), "{u:?}");
    }

    #[test]
    fn fixed_points_small() {
        let c = setup();
        let r = verify_fixed_points(&c, 6);
        assert_eq!(r.trials, 3);
        assert!(r.passed() && r.fully_certified(), "{r:?}");
    }
}
