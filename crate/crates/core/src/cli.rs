//! Command-line driver: `certify`, `verify` and `connect-demo`.
//!
//! Each command is also a library function returning a serializable record.
//! Outputs are pretty JSON with rationals as `"num/den"` strings; failures print
//! `{"error", "message", "exit_code"}` to stderr.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result, EXIT_NUMERIC, EXIT_OK, EXIT_VERIFICATION};
use crate::family::{
    find_seed, connect_parameter, fixed_point, itinerary, orbit, ConnectSummary, MicroPlan, OrbitRecord,
    ParameterVector,
};
use crate::padic::{random_with_valuation_rng, FieldContext, PadicElement, TowerDescriptor};
use crate::rational::{int, serde_rational};
use crate::skeleton::{make_generic, LogRadius, RadiiConfig};
use crate::synthesis::{
    build_word, check_inequalities, radius_trace, synthesize, ItineraryWord, Margin, StagePlan, Symbol,
};
use crate::verify::{
    verify_fixed_points, verify_norms, verify_partials, verify_perturbation, verify_stability_micro,
    verify_uniform_prefix, CheckReport,
};

/// Minimum gap between consecutive greedy radii.
const GREEDY_GAP: i64 = 2;
/// Samples per check in the certificate's verification appendix.
const CERT_TRIALS: u64 = 16;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportDigest {
    pub lemma: String,
    pub trials: u64,
    pub failures: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub entry_radii: Vec<LogRadius>,
    pub below_varrho: Vec<bool>,
    pub forced_steps: usize,
    pub word: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub tool_version: String,
    pub seed: u64,
    pub config: RadiiConfig,
    pub eps_bar: Vec<LogRadius>,
    pub plan: StagePlan,
    pub margins: Vec<Margin>,
    pub all_margins_positive: bool,
    pub trace: TraceSummary,
    pub trace_consistent: bool,
    pub reports: Vec<ReportDigest>,
}

impl Certificate {
    pub fn ok(&self) -> bool {
        self.all_margins_positive && self.trace_consistent && self.reports.iter().all(|r| r.failures == 0)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn digest(r: &CheckReport) -> Result<ReportDigest> {
    Ok(ReportDigest {
        lemma: r.lemma.clone(),
        trials: r.trials,
        failures: r.failures,
        sha256: sha256_hex(serde_json::to_string(r)?.as_bytes()),
    })
}

/// Greedy radii, synthesized plan, all four inequality families, the forced
/// radius trace, and digests of a small verification run.
pub fn certify(p: u64, horizon: usize, stages: usize, eps_bar: &LogRadius, seed: u64) -> Result<Certificate> {
    if stages == 0 {
        return Err(Error::InvalidConfig("at least one stage is required".into()));
    }
    if horizon < stages + 1 {
        return Err(Error::HorizonExceeded(format!("J = {horizon} but K = {stages} needs J >= K + 1")));
    }
    let cfg = make_generic(p, horizon, GREEDY_GAP)?;
    let eps = vec![eps_bar.clone(); stages + 1];
    let plan = synthesize(&cfg, &eps, stages)?;
    let margins = check_inequalities(&cfg, &plan)?;
    let all_margins_positive = margins.iter().all(Margin::holds);
    let (trace, trace_consistent) = match radius_trace(&cfg, &plan, stages) {
        Ok(t) => (
            TraceSummary {
                entry_radii: t.entry_radii,
                below_varrho: t.below_varrho,
                forced_steps: t.steps.len(),
                word: build_word(&plan, stages)?.to_string(),
            },
            true,
        ),
        Err(_) => (
            TraceSummary { entry_radii: vec![], below_varrho: vec![], forced_steps: 0, word: String::new() },
            false,
        ),
    };
    let ctx = FieldContext::qp(p, 96)?;
    let c = ParameterVector::random(&cfg, &ctx, seed)?;
    let reports = vec![
        digest(&verify_norms(&c, CERT_TRIALS, seed))?,
        digest(&verify_partials(&c, CERT_TRIALS, 4, seed))?,
    ];
    Ok(Certificate {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        config: cfg,
        eps_bar: eps,
        plan,
        margins,
        all_margins_positive,
        trace,
        trace_consistent,
        reports,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lemma {
    Norms,
    Perturbation,
    Partials,
    Stability,
    Uniform,
    FixedPoints,
    All,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub config: RadiiConfig,
    pub seed: u64,
    pub drop_factor: Option<usize>,
    pub reports: Vec<CheckReport>,
    pub passed: bool,
}

impl VerifyOutcome {
    /// 3 on any failure, 4 when nothing failed but some trial stayed undecided.
    pub fn exit_code(&self) -> i32 {
        if self.reports.iter().any(|r| !r.passed()) {
            EXIT_VERIFICATION
        } else if self.passed {
            EXIT_OK
        } else {
            EXIT_NUMERIC
        }
    }
}

/// Runs the selected checks on random parameters for `cfg`. With
/// `drop_factor = Some(j)` the map omits factor `j` (negative control).
pub fn verify(
    cfg: &RadiiConfig,
    lemma: Lemma,
    trials: u64,
    seed: u64,
    drop_factor: Option<usize>,
    precision: i64,
) -> Result<VerifyOutcome> {
    let ctx = FieldContext::qp(cfg.p, precision)?;
    let mut c = ParameterVector::random(cfg, &ctx, seed)?;
    if let Some(j) = drop_factor {
        c = c.with_dropped_factor(j)?;
    }
    let want = |l: Lemma| lemma == l || lemma == Lemma::All;
    let mut reports = Vec::new();
    if want(Lemma::Norms) {
        reports.push(verify_norms(&c, trials, seed));
    }
    if want(Lemma::Perturbation) {
        let j = cfg.horizon();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let v = -cfg.q(j).value().clone() + int(2);
        let v = BigRational::from_integer(v.ceil().to_integer());
        let alt = c.with_param(j, c.c(j).add(&random_with_valuation_rng(&ctx, &v, &mut rng)?)?)?;
        reports.push(verify_perturbation(&c, &alt, trials, seed));
    }
    if want(Lemma::Partials) {
        reports.push(verify_partials(&c, trials, 6, seed));
    }
    if want(Lemma::Stability) {
        reports.push(verify_stability_micro(&c, &MicroPlan::standard(cfg)?, trials, seed));
    }
    if want(Lemma::Uniform) {
        let plan = MicroPlan::standard(cfg)?;
        let target = ctx.working_precision() * crate::rational::rat(3, 4);
        let report = match find_seed(&c, plan.m1, plan.n1, &target) {
            Ok(s) => verify_uniform_prefix(&s, plan.m1, plan.big_n() + 1, trials, seed),
            Err(e) => CheckReport::precondition_error("uniform-prefix", seed, trials, &e),
        };
        reports.push(report);
    }
    if want(Lemma::FixedPoints) {
        let ell = if trials == 0 { 0 } else { 20 };
        let r = if trials == 0 { CheckReport::empty("fixed-points", 0) } else { verify_fixed_points(&c, ell) };
        reports.push(r);
    }
    let passed = reports.iter().all(|r| r.passed() && r.fully_certified());
    Ok(VerifyOutcome { config: cfg.clone(), seed, drop_factor, reports, passed })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementRecord {
    #[serde(with = "serde_rational")]
    pub valuation: BigRational,
    pub value: PadicElement,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Transcript {
    pub p: u64,
    pub seed: u64,
    pub config: RadiiConfig,
    pub plan: MicroPlan,
    pub seed_field: TowerDescriptor,
    pub params: Vec<PadicElement>,
    pub seed_point: ElementRecord,
    pub seed_log_radii: Vec<LogRadius>,
    #[serde(with = "serde_rational")]
    pub fixed_point_valuation: BigRational,
    pub connect: ConnectSummary,
    pub moved_parameter: PadicElement,
    pub orbit: Vec<OrbitRecord>,
    pub expected_prefix: String,
    pub itinerary: String,
    pub certified_steps: u64,
    pub itinerary_ok: bool,
    /// The certified part of the itinerary agrees with the expected word.
    pub itinerary_consistent: bool,
    pub perturbation_matches: bool,
    pub residual_ok: bool,
}

impl Transcript {
    pub fn ok(&self) -> bool {
        self.itinerary_ok && self.perturbation_matches && self.residual_ok && self.connect.within_eps
    }

    /// 3 when a certified quantity contradicts the prediction, 4 when only the
    /// residual or the certified itinerary length falls short.
    pub fn exit_code(&self) -> i32 {
        if self.ok() {
            EXIT_OK
        } else if self.perturbation_matches && self.connect.within_eps && self.itinerary_consistent {
            EXIT_NUMERIC
        } else {
            EXIT_VERIFICATION
        }
    }
}

/// Trailing `B_0` symbols required after the orbit reaches 0.
pub const DEMO_TAIL: u64 = 10;
/// Residual valuation required of `H(c'')`.
pub const DEMO_RESIDUAL: i64 = 40;

fn demo_config(p: u64) -> Result<RadiiConfig> {
    match p {
        2 => RadiiConfig::from_integers(2, &[2, 4, 7, 12]),
        3 => make_generic(3, 8, GREEDY_GAP),
        _ => Err(Error::InvalidConfig(format!("the connecting demo supports p in {{2, 3}}, got {p}"))),
    }
}

/// Stage-1 connecting step end to end: random `c`, seed point `x` with
/// `f^{N_1}(x) = w_1`, parameter Newton on `c_2`, and forward certification of
/// `B_0^{m1} A^{n1} B_1^{ell} B_0^{T}`.
pub fn connect_demo(p: u64, seed: u64, precision: i64) -> Result<Transcript> {
    let cfg = demo_config(p)?;
    let ctx = FieldContext::qp(p, precision)?;
    let c = ParameterVector::random(&cfg, &ctx, seed)?;
    let plan = MicroPlan::standard(&cfg)?;
    let target = ctx.working_precision() * crate::rational::rat(3, 4);
    let seed_pt = find_seed(&c, plan.m1, plan.n1, &target)?;
    let w = fixed_point(&seed_pt.params, 1, &target)?;
    let out = connect_parameter(&seed_pt.params, &seed_pt.x, &plan.connect_request(int(DEMO_RESIDUAL)))?;
    let expected = ItineraryWord::default()
        .then(Symbol::B(0), plan.m1)
        .then(Symbol::A, plan.n1)
        .then(Symbol::B(1), plan.ell)
        .then(Symbol::B(0), DEMO_TAIL);
    let steps = expected.len() as u64;
    let (word, certified_steps) = itinerary(&out.params, &seed_pt.x, steps);
    let summary = out.summary();
    Ok(Transcript {
        p,
        seed,
        config: cfg,
        seed_field: seed_pt.x.ctx().tower_descriptor(),
        params: c.params().to_vec(),
        seed_point: ElementRecord { valuation: seed_pt.x.valuation()?, value: seed_pt.x.clone() },
        seed_log_radii: seed_pt.log_radii.clone(),
        fixed_point_valuation: w.valuation()?,
        moved_parameter: out.params.c(2).clone(),
        orbit: orbit(&out.params, &seed_pt.x, steps),
        expected_prefix: expected.to_string(),
        itinerary: word.to_string(),
        certified_steps,
        itinerary_ok: certified_steps == steps && word == expected,
        itinerary_consistent: expected.starts_with(&word),
        perturbation_matches: out.v_shift == out.v_shift_predicted,
        residual_ok: out.residual >= int(DEMO_RESIDUAL),
        connect: summary,
        plan,
    })
}

#[derive(Parser, Debug)]
#[command(name = "padic-wander", version, about = "Certificates and p-adic checks for wandering domains of f_c")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthesize a stage plan and write its certificate.
    Certify {
        #[arg(long, default_value_t = 2)]
        prime: u64,
        #[arg(long, default_value_t = 12)]
        horizon: usize,
        #[arg(long, default_value_t = 10)]
        stages: usize,
        #[arg(long, default_value = "1")]
        eps_bar: LogRadius,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the sampled lemma checks.
    Verify {
        /// Radii configuration JSON; greedy radii for --prime/--horizon otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        prime: u64,
        #[arg(long, default_value_t = 6)]
        horizon: usize,
        #[arg(long, value_enum, default_value_t = Lemma::All)]
        lemma: Lemma,
        #[arg(long, default_value_t = 200)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        drop_factor: Option<usize>,
        #[arg(long, default_value_t = 96)]
        precision: i64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stage-1 parameter Newton demo with a transcript.
    ConnectDemo {
        #[arg(long, default_value_t = 2)]
        prime: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 96)]
        precision: i64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit<T: Serialize>(value: &T, out: Option<&PathBuf>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Structured error line as printed on stderr.
pub fn error_json(e: &Error) -> String {
    serde_json::json!({ "error": e.kind(), "message": e.to_string(), "exit_code": e.exit_code() }).to_string()
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Certify { prime, horizon, stages, eps_bar, seed, out } => {
            let cert = certify(prime, horizon, stages, &eps_bar, seed)?;
            emit(&cert, out.as_ref())?;
            Ok(if cert.ok() { EXIT_OK } else { EXIT_VERIFICATION })
        }
        Command::Verify { config, prime, horizon, lemma, trials, seed, drop_factor, precision, out } => {
            let cfg = match config {
                Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
                None => make_generic(prime, horizon, GREEDY_GAP)?,
            };
            let outcome = verify(&cfg, lemma, trials, seed, drop_factor, precision)?;
            emit(&outcome, out.as_ref())?;
            Ok(outcome.exit_code())
        }
        Command::ConnectDemo { prime, seed, precision, out } => {
            let t = connect_demo(prime, seed, precision)?;
            emit(&t, out.as_ref())?;
            Ok(t.exit_code())
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certify_small_anchor() {
        let cert = certify(2, 5, 2, &LogRadius::integer(1), 0).unwrap();
        assert_eq!(cert.plan.ell(2), 4);
        assert_eq!(cert.plan.m(1), 16);
        assert!(cert.ok());
        let again = certify(2, 5, 2, &LogRadius::integer(1), 0).unwrap();
        assert_eq!(serde_json::to_string(&cert).unwrap(), serde_json::to_string(&again).unwrap());
    }

    #[test]
    fn certify_needs_horizon() {
        let e = certify(2, 2, 2, &LogRadius::integer(1), 0).unwrap_err();
        assert!(matches!(e, Error::HorizonExceeded(_)));
        assert_eq!(e.exit_code(), 2);
        assert!(error_json(&e).contains("\"error\":\"HorizonExceeded\""));
    }

    #[test]
    fn verify_vacuous_and_control() {
        let cfg = make_generic(2, 4, 2).unwrap();
        assert!(verify(&cfg, Lemma::All, 0, 1, None, 96).unwrap().passed);
        assert!(!verify(&cfg, Lemma::Norms, 10, 1, Some(1), 96).unwrap().passed);
    }

    #[test]
    fn demo_rejects_other_primes() {
        assert!(matches!(connect_demo(5, 0, 96), Err(Error::InvalidConfig(_))));
    }
}
