//! Itinerary words, stage plans and the four inequality families.
//!
//! All quantities are base-`p` logarithms. A plan for stages `1..=K` holds
//! `m_1..m_K`, `n_1..n_K`, `ℓ_2..ℓ_{K+1}` and `e_2..e_{K+1}` (the log of `ε_j`).

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{int, next_int_above, serde_rational};
use crate::skeleton::{
    compute_n, lambda_log, phi_inv_log, phi_inv_iter, phi_log, s_log, varrho_log, LogRadius,
    RadiiConfig,
};

/// Partition element: `A` or `B_j` (`B_0` is the open unit disk).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    A,
    B(usize),
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::A => f.write_str("A"),
            Symbol::B(j) => write!(f, "B_{j}"),
        }
    }
}

impl std::str::FromStr for Symbol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "A" {
            return Ok(Symbol::A);
        }
        s.strip_prefix("B_")
            .and_then(|j| j.parse().ok())
            .map(Symbol::B)
            .ok_or_else(|| Error::Serialization(format!("unknown symbol {s:?}")))
    }
}

impl Serialize for Symbol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Symbol {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItineraryWord {
    pub symbols: Vec<Symbol>,
}

impl ItineraryWord {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    fn push_run(&mut self, s: Symbol, count: u64) {
        self.symbols.extend(std::iter::repeat_n(s, count as usize));
    }

    /// Appends `count` copies of `s`.
    pub fn then(mut self, s: Symbol, count: u64) -> Self {
        self.push_run(s, count);
        self
    }

    pub fn starts_with(&self, prefix: &ItineraryWord) -> bool {
        self.symbols.starts_with(&prefix.symbols)
    }

    /// Largest `B_j` index occurring.
    pub fn max_disk(&self) -> usize {
        self.symbols
            .iter()
            .map(|s| match s {
                Symbol::A => 0,
                Symbol::B(j) => *j,
            })
            .max()
            .unwrap_or(0)
    }
}

impl fmt::Display for ItineraryWord {
    /// Run-length form, e.g. `B_0^2 A B_1^3`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut i = 0;
        while i < self.symbols.len() {
            let s = self.symbols[i];
            let mut run = 1;
            while i + run < self.symbols.len() && self.symbols[i + run] == s {
                run += 1;
            }
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            if run == 1 {
                write!(f, "{s}")?;
            } else {
                write!(f, "{s}^{run}")?;
            }
            i += run;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagePlan {
    #[serde(rename = "K")]
    pub stages: usize,
    pub m: Vec<u64>,
    pub n: Vec<u64>,
    /// `ℓ_2, ℓ_3, …`; may stop at `ℓ_K` for word building only.
    pub l: Vec<u64>,
    /// `e_2, e_3, …`.
    pub e: Vec<LogRadius>,
    #[serde(rename = "L")]
    pub big_l: Vec<u64>,
    #[serde(rename = "M")]
    pub big_m: Vec<u64>,
    #[serde(rename = "N")]
    pub big_n: Vec<u64>,
}

impl StagePlan {
    /// Builds a plan from its free data and fills in the indices `L, M, N`.
    pub fn from_parts(m: Vec<u64>, n: Vec<u64>, l: Vec<u64>, e: Vec<LogRadius>) -> Result<Self> {
        let k = m.len();
        if k == 0 || n.len() != k {
            return Err(Error::IncompletePlan("m and n must have equal positive length".into()));
        }
        if l.len() + 1 < k {
            return Err(Error::IncompletePlan(format!(
                "{k} stages need at least {} values of l",
                k - 1
            )));
        }
        if m.iter().chain(&n).chain(&l).any(|&x| x == 0) {
            return Err(Error::InvalidConfig("m, n and l entries must be >= 1".into()));
        }
        let (mut big_l, mut big_m, mut big_n) = (Vec::new(), Vec::new(), Vec::new());
        let mut lk = 0u64;
        for j in 0..k {
            if j > 0 {
                lk = big_n[j - 1] + l[j - 1];
            }
            big_l.push(lk);
            big_m.push(lk + m[j]);
            big_n.push(lk + m[j] + n[j]);
        }
        Ok(StagePlan { stages: k, m, n, l, e, big_l, big_m, big_n })
    }

    pub fn m(&self, k: usize) -> u64 {
        self.m[k - 1]
    }

    pub fn n(&self, k: usize) -> u64 {
        self.n[k - 1]
    }

    /// `ℓ_j` for `j >= 2`.
    pub fn ell(&self, j: usize) -> u64 {
        self.l[j - 2]
    }

    /// `e_j` for `j >= 2`.
    pub fn e(&self, j: usize) -> &LogRadius {
        &self.e[j - 2]
    }

    pub fn big_l(&self, k: usize) -> u64 {
        self.big_l[k - 1]
    }

    pub fn big_m(&self, k: usize) -> u64 {
        self.big_m[k - 1]
    }

    pub fn big_n(&self, k: usize) -> u64 {
        self.big_n[k - 1]
    }

    fn require_complete(&self) -> Result<()> {
        if self.l.len() < self.stages || self.e.len() < self.stages {
            return Err(Error::IncompletePlan(format!(
                "{} stages need l_2..l_{} and e_2..e_{}",
                self.stages,
                self.stages + 1,
                self.stages + 1
            )));
        }
        Ok(())
    }
}

/// `α^{(k)} = B_0^{m_1} A^{n_1} B_1^{ℓ_2} … B_{k-1}^{ℓ_k} B_0^{m_k} A^{n_k} B_k`.
pub fn build_word(plan: &StagePlan, k: usize) -> Result<ItineraryWord> {
    if k == 0 || k > plan.stages {
        return Err(Error::HorizonExceeded(format!("stage {k} outside 1..={}", plan.stages)));
    }
    let mut w = ItineraryWord::default();
    for j in 1..=k {
        if j > 1 {
            w.push_run(Symbol::B(j - 1), plan.ell(j));
        }
        w.push_run(Symbol::B(0), plan.m(j));
        w.push_run(Symbol::A, plan.n(j));
    }
    w.push_run(Symbol::B(k), 1);
    Ok(w)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Sci,
    Stability,
    Transversality,
    Connecting,
}

/// One inequality instance; `value` is right side minus left side.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Margin {
    pub family: Family,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub j: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<usize>,
    #[serde(with = "serde_rational")]
    pub value: BigRational,
}

impl Margin {
    pub fn holds(&self) -> bool {
        self.value.is_positive()
    }
}

/// Per-stage skeleton constants, 1-based through `J`.
struct Constants {
    rho: BigRational,
    inv: BigRational,
    q: Vec<BigRational>,
    lambda: Vec<BigRational>,
    sigma: Vec<BigRational>,
}

impl Constants {
    fn new(cfg: &RadiiConfig, upto: usize) -> Result<Self> {
        let mut c = Constants {
            rho: varrho_log(cfg.p).into_rational(),
            inv: BigRational::new(1.into(), BigInt::from(cfg.p - 1)),
            q: vec![BigRational::zero()],
            lambda: vec![BigRational::zero()],
            sigma: vec![BigRational::zero()],
        };
        for j in 1..=upto {
            c.q.push(cfg.q(j).value().clone());
            c.lambda.push(lambda_log(cfg, j)?.into_rational());
            c.sigma.push(s_log(cfg, j)?.into_rational());
        }
        Ok(c)
    }

    /// Right side of stability(j, k): the upper bound on `e_k`.
    fn stability_bound(&self, j: usize, k: usize, ell_j: u64) -> BigRational {
        &self.rho * int((k - j) as i64) + int(2) * &self.q[k]
            - &self.q[j - 1]
            - &self.sigma[j - 1]
            - int(ell_j as i64) * &self.lambda[j - 1]
    }

    /// `C_k = 1 + 1/(p-1) + 2 q_{k+1} - σ_k`; connecting(k) reads `C_k - ℓΛ_k < e_{k+1}`.
    fn connecting_constant(&self, k: usize) -> BigRational {
        int(1) + &self.inv + int(2) * &self.q[k + 1] - &self.sigma[k]
    }

    /// Left side of sci(k) plus `m_k`: sci reads `m_k > sci_floor`.
    fn sci_floor(&self, k: usize, ell_next: u64) -> BigRational {
        &self.inv + &self.q[k] + int(ell_next as i64) * &self.lambda[k]
    }

    /// Transversality(j) reads `m_j > transversality_floor`.
    fn transversality_floor(&self, j: usize, ell_j: u64) -> BigRational {
        int(2) * &self.inv
            + &self.q[j - 1]
            + &self.sigma[j - 1]
            + int(ell_j as i64) * &self.lambda[j - 1]
    }
}

fn require_horizon(cfg: &RadiiConfig, stages: usize) -> Result<()> {
    if cfg.horizon() < stages + 1 {
        return Err(Error::HorizonExceeded(format!(
            "{stages} stages need J >= {}, configured J = {}",
            stages + 1,
            cfg.horizon()
        )));
    }
    Ok(())
}

/// All inequality instances for stages `1..=K`, in the order sci, stability,
/// transversality, connecting.
pub fn check_inequalities(cfg: &RadiiConfig, plan: &StagePlan) -> Result<Vec<Margin>> {
    plan.require_complete()?;
    let kk = plan.stages;
    require_horizon(cfg, kk)?;
    let c = Constants::new(cfg, kk + 1)?;
    let mut out = Vec::new();
    for k in 1..=kk {
        let m = int(plan.m(k) as i64);
        out.push(Margin {
            family: Family::Sci,
            j: None,
            k: Some(k),
            value: m - c.sci_floor(k, plan.ell(k + 1)),
        });
    }
    for k in 2..=kk {
        for j in 2..k {
            out.push(Margin {
                family: Family::Stability,
                j: Some(j),
                k: Some(k),
                value: c.stability_bound(j, k, plan.ell(j)) - plan.e(k).value(),
            });
        }
    }
    for j in 2..=kk {
        out.push(Margin {
            family: Family::Transversality,
            j: Some(j),
            k: None,
            value: int(plan.m(j) as i64) - c.transversality_floor(j, plan.ell(j)),
        });
    }
    for k in 1..=kk {
        let lhs = c.connecting_constant(k) - int(plan.ell(k + 1) as i64) * &c.lambda[k];
        out.push(Margin {
            family: Family::Connecting,
            j: None,
            k: Some(k),
            value: plan.e(k + 1).value() - lhs,
        });
    }
    Ok(out)
}

fn to_u64(r: &BigInt) -> Result<u64> {
    r.to_u64()
        .ok_or_else(|| Error::InvalidConfig(format!("integer {r} out of range")))
}

/// Deterministic recursion: `e_2 = min(ē_2, 0)`; `ℓ_{k+1}` minimal with connecting(k)
/// strict; `e_{k+1} = min(ē_{k+1}, stability bounds) - 1`; each `m_k` minimal above
/// both the sci and transversality floors. `eps_bar` holds `ē_2..ē_{K+1}`.
pub fn synthesize(cfg: &RadiiConfig, eps_bar: &[LogRadius], stages: usize) -> Result<StagePlan> {
    if stages == 0 {
        return Err(Error::InvalidConfig("at least one stage is required".into()));
    }
    require_horizon(cfg, stages)?;
    if eps_bar.len() < stages {
        return Err(Error::InvalidConfig(format!(
            "need {stages} eps_bar values (j = 2..={}), got {}",
            stages + 1,
            eps_bar.len()
        )));
    }
    let c = Constants::new(cfg, stages + 1)?;
    let mut l: Vec<u64> = Vec::with_capacity(stages);
    let mut e: Vec<BigRational> = Vec::with_capacity(stages);
    e.push(eps_bar[0].value().clone().min(BigRational::zero()));
    for k in 1..=stages {
        if k > 1 {
            let mut bound = eps_bar[k - 1].value().clone();
            for j in 2..=k {
                bound = bound.min(c.stability_bound(j, k + 1, l[j - 2]));
            }
            e.push(bound - int(1));
        }
        // ℓ minimal with C_k - ℓΛ_k < e_{k+1}, i.e. ℓ > (C_k - e_{k+1}) / Λ_k.
        let ratio = (c.connecting_constant(k) - &e[k - 1]) / &c.lambda[k];
        let ell = next_int_above(&ratio).max(BigInt::from(1));
        l.push(to_u64(&ell)?);
    }
    let mut m = Vec::with_capacity(stages);
    for k in 1..=stages {
        let mut floor = c.sci_floor(k, l[k - 1]);
        if k >= 2 {
            floor = floor.max(c.transversality_floor(k, l[k - 2]));
        }
        m.push(to_u64(&next_int_above(&floor).max(BigInt::from(1)))?);
    }
    let n = (1..=stages).map(|k| compute_n(cfg, k)).collect::<Result<Vec<_>>>()?;
    let plan = StagePlan::from_parts(m, n, l, e.into_iter().map(LogRadius::from_rational).collect())?;
    debug_assert!(check_inequalities(cfg, &plan).unwrap().iter().all(Margin::holds));
    Ok(plan)
}

/// Forced value of `log|f^i(x)|` at step `i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceValue {
    Radius(LogRadius),
    /// Inside `B_j`, where `|z| = R_j`.
    InDisk(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: u64,
    pub value: TraceValue,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadiusTrace {
    pub steps: Vec<TraceStep>,
    /// `r_j = φ^{-(m_j+n_j)}(q_j)` for `j = 1..=k`.
    pub entry_radii: Vec<LogRadius>,
    /// Whether `r_j < log ρ`, per stage.
    pub below_varrho: Vec<bool>,
}

/// Forced log-radii along a point with itinerary `α^{(k)}`.
pub fn radius_trace(cfg: &RadiiConfig, plan: &StagePlan, k: usize) -> Result<RadiusTrace> {
    if k == 0 || k > plan.stages {
        return Err(Error::HorizonExceeded(format!("stage {k} outside 1..={}", plan.stages)));
    }
    if cfg.horizon() < k {
        return Err(Error::HorizonExceeded(format!("stage {k} beyond J = {}", cfg.horizon())));
    }
    let rho = varrho_log(cfg.p);
    let bad = |step: u64, what: &str, v: &LogRadius| {
        Error::InconsistentPlan(format!("step {step}: log-radius {v} is not in {what}"))
    };
    let mut trace = RadiusTrace { steps: Vec::new(), entry_radii: Vec::new(), below_varrho: Vec::new() };
    for j in 1..=k {
        let (lj, mj, nj) = (plan.big_l(j), plan.m(j), plan.n(j));
        let qj = cfg.q(j);
        // Backward from q_j: A-values first, then the B_0 run via the closed form.
        let mut a_vals = Vec::with_capacity(nj as usize);
        let mut x = qj.clone();
        for _ in 0..nj {
            x = phi_inv_log(cfg, &x)?;
            a_vals.push(x.clone());
        }
        let r = phi_inv_iter(cfg, qj, mj + nj)?;
        trace.below_varrho.push(r < rho);
        trace.entry_radii.push(r.clone());
        let mut v = r;
        for i in 0..mj {
            let step = lj + i;
            if !v.is_negative() {
                return Err(bad(step, "B_0", &v));
            }
            trace.steps.push(TraceStep { step, value: TraceValue::Radius(v.clone()) });
            v = phi_log(cfg, &v)?;
        }
        for (i, val) in a_vals.iter().rev().enumerate() {
            let step = lj + mj + i as u64;
            debug_assert_eq!(*val, v);
            if val.is_negative() || val >= qj || cfg.qs.contains(val) {
                return Err(bad(step, "A", val));
            }
            trace.steps.push(TraceStep { step, value: TraceValue::Radius(val.clone()) });
            v = phi_log(cfg, val)?;
        }
        if v != *qj {
            return Err(bad(plan.big_n(j), &format!("B_{j}"), &v));
        }
        let run = if j < k { plan.ell(j + 1) } else { 1 };
        for i in 0..run {
            trace.steps.push(TraceStep { step: plan.big_n(j) + i, value: TraceValue::InDisk(j) });
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn running() -> RadiiConfig {
        RadiiConfig::from_integers(2, &[2, 4, 7, 12]).unwrap()
    }

    fn zeros(k: usize) -> Vec<LogRadius> {
        vec![LogRadius::zero(); k]
    }

    fn margin_of(ms: &[Margin], fam: Family, j: Option<usize>, k: Option<usize>) -> BigRational {
        ms.iter()
            .find(|m| m.family == fam && m.j == j && m.k == k)
            .unwrap()
            .value
            .clone()
    }

    #[test]
    fn words() {
        let p = StagePlan::from_parts(vec![1], vec![1], vec![], vec![]).unwrap();
        let w = build_word(&p, 1).unwrap();
        assert_eq!(w.to_string(), "B_0 A B_1");
        assert_eq!(p.big_n(1), 2);

        let p = StagePlan::from_parts(vec![2, 1], vec![1, 2], vec![3], vec![]).unwrap();
        let w = build_word(&p, 2).unwrap();
        assert_eq!(w.to_string(), "B_0^2 A B_1^3 B_0 A^2 B_2");
        assert_eq!(w.len(), 10);
        assert_eq!(p.big_n(2), 9);
        assert_eq!(w.symbols[p.big_l(2) as usize], Symbol::B(0));
        assert!(build_word(&p, 3).is_err());
    }

    #[test]
    fn margin_examples() {
        let cfg = running();
        let plan = StagePlan::from_parts(
            vec![16, 17],
            vec![1, 2],
            vec![4, 3],
            vec![LogRadius::zero(), LogRadius::new(-5, 2)],
        )
        .unwrap();
        let ms = check_inequalities(&cfg, &plan).unwrap();
        assert_eq!(margin_of(&ms, Family::Connecting, None, Some(1)), BigRational::new(5.into(), 2.into()));
        assert_eq!(margin_of(&ms, Family::Sci, None, Some(1)), int(1));
        assert_eq!(
            margin_of(&ms, Family::Transversality, Some(2), None),
            BigRational::new(1.into(), 2.into())
        );
        let short = StagePlan::from_parts(vec![16, 17], vec![1, 2], vec![4], vec![]).unwrap();
        assert!(matches!(check_inequalities(&cfg, &short), Err(Error::IncompletePlan(_))));
    }

    #[test]
    fn hand_checked_plan() {
        let plan = synthesize(&running(), &zeros(2), 2).unwrap();
        assert_eq!(plan.l, vec![4, 3]);
        assert_eq!(plan.e, vec![LogRadius::zero(), LogRadius::new(-5, 2)]);
        assert_eq!(plan.m, vec![16, 27]);
        assert_eq!(plan.n, vec![1, 2]);
        assert!(check_inequalities(&running(), &plan).unwrap().iter().all(Margin::holds));
    }

    #[test]
    fn horizon_guard() {
        let cfg = RadiiConfig::from_integers(2, &[2, 4]).unwrap();
        assert!(matches!(synthesize(&cfg, &zeros(2), 2), Err(Error::HorizonExceeded(_))));
    }

    #[test]
    fn micro_trace() {
        let cfg = running();
        let plan = StagePlan::from_parts(vec![1], vec![1], vec![2], vec![LogRadius::zero()]).unwrap();
        let t = radius_trace(&cfg, &plan, 1).unwrap();
        assert_eq!(t.entry_radii, vec![LogRadius::new(-1, 4)]);
        assert_eq!(t.below_varrho, vec![false]);
        assert_eq!(t.steps[0].value, TraceValue::Radius(LogRadius::new(-1, 4)));
        assert_eq!(t.steps[1].value, TraceValue::Radius(LogRadius::new(1, 2)));
        assert_eq!(t.steps[2], TraceStep { step: 2, value: TraceValue::InDisk(1) });
    }

    #[test]
    fn full_trace_entry_radius() {
        let cfg = running();
        let plan = synthesize(&cfg, &zeros(2), 2).unwrap();
        let t = radius_trace(&cfg, &plan, 2).unwrap();
        // r_1 = φ^{-17}(2) = -1 + 3/2^17.
        let expect = LogRadius::new(-1, 1) + LogRadius::new(3, 1 << 17);
        assert_eq!(t.entry_radii[0], expect);
        assert_eq!(t.steps.len() as u64, plan.big_n(2) + 1);
        for (i, s) in t.steps.iter().enumerate() {
            assert_eq!(s.step, i as u64);
        }
    }

    #[test]
    fn symbol_text() {
        for s in [Symbol::A, Symbol::B(0), Symbol::B(12)] {
            assert_eq!(s.to_string().parse::<Symbol>().unwrap(), s);
        }
        assert!("C".parse::<Symbol>().is_err());
    }
}
