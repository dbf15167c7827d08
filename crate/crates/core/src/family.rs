//! The entire maps `f_c(z) = (z^p/p) ∏_j (1 - z/c_j)`, truncated at the configured
//! horizon `J` with a certified tail bound.
//!
//! Internally `f_c(z) = g(z) · C⁻¹ / p` with `g(z) = z^p ∏_j (c_j - z)` and
//! `C = ∏_j c_j`, so exact inputs only meet one inexact quantity, `C⁻¹`.
//!
//! Tail convention: the factors `j > J` are bounded using a surrogate radius
//! `q_{J+1} := q_J + (q_J - q_{J-1})`. For `v(z) > -q_J` each missing factor is
//! `1 + δ` with `v(δ) >= v(z) + q_{J+1}`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::padic::{
    adjoin_radical, newton_solve, random_with_valuation_rng, AnalyticFn, Ctx, PadicElement,
};
use crate::rational::{ceil_i64, format_rational, int, serde_rational};
use crate::skeleton::{
    compute_n, lambda_log, phi_inv_iter, phi_log, s_log, varrho_log, LogRadius, RadiiConfig,
};
use crate::synthesis::{ItineraryWord, Symbol};

fn scaled(ctx: &Ctx, r: &BigRational) -> Option<i64> {
    let s = r * BigRational::from_integer(ctx.ramification().into());
    s.is_integer().then(|| s.to_integer().to_i64()).flatten()
}

fn unscale(ctx: &Ctx, v: i64) -> BigRational {
    BigRational::new(v.into(), ctx.ramification().into())
}

/// Parameters `c_1 … c_J` with `v(c_j) = -q_j`, over one field context.
#[derive(Clone, Debug)]
pub struct ParameterVector {
    cfg: RadiiConfig,
    ctx: Ctx,
    c: Vec<PadicElement>,
    /// `1 / ∏ c_j` over the active factors.
    prod_inv: PadicElement,
    /// `1 / c_j`.
    c_inv: Vec<PadicElement>,
    dropped: Option<usize>,
    /// `-q_j` scaled by `e`.
    neg_q: Vec<i64>,
    tail_q: i64,
}

impl ParameterVector {
    pub fn new(cfg: &RadiiConfig, c: Vec<PadicElement>) -> Result<Self> {
        Self::build(cfg, c, None)
    }

    fn build(cfg: &RadiiConfig, c: Vec<PadicElement>, dropped: Option<usize>) -> Result<Self> {
        if c.len() != cfg.horizon() {
            return Err(Error::InvalidConfig(format!(
                "{} parameters for horizon J = {}",
                c.len(),
                cfg.horizon()
            )));
        }
        let ctx = c[0].ctx_arc();
        let mut neg_q = Vec::with_capacity(c.len());
        for (j, cj) in c.iter().enumerate() {
            if !cj.ctx().same_field(&ctx) {
                return Err(Error::ContextMismatch);
            }
            let target = -cfg.q(j + 1).value().clone();
            let vs = scaled(&ctx, &target).ok_or_else(|| Error::ValueGroupMismatch(format_rational(&target)))?;
            if cj.valuation_scaled() != Some(vs) {
                return Err(Error::InvalidConfig(format!(
                    "v(c_{}) must be {}",
                    j + 1,
                    format_rational(&target)
                )));
            }
            neg_q.push(vs);
        }
        if let Some(j) = dropped {
            if j == 0 || j > c.len() {
                return Err(Error::InvalidConfig(format!("no factor {j} to drop")));
            }
        }
        let tail_q = scaled(&ctx, cfg.tail_surrogate().value())
            .ok_or_else(|| Error::ValueGroupMismatch(cfg.tail_surrogate().to_string()))?;
        // Relative precision wp + φ(q_J) keeps every f-value on v(z) > -q_J at
        // absolute precision >= wp.
        let phi_top = phi_log(cfg, cfg.last())?;
        let guard = ceil_i64(phi_top.value()).unwrap_or(0).max(0) * ctx.ramification();
        let mut prod = PadicElement::one(&ctx);
        for (j, cj) in c.iter().enumerate() {
            if dropped != Some(j + 1) {
                prod = prod.mul(cj)?;
            }
        }
        let rel = ctx.wp_scaled() + guard;
        let prod_inv = prod.inverse_to(rel - prod.valuation_scaled().unwrap())?;
        let c_inv = c
            .iter()
            .zip(&neg_q)
            .map(|(cj, &vq)| cj.inverse_to(rel + vq))
            .collect::<Result<Vec<_>>>()?;
        Ok(ParameterVector { cfg: cfg.clone(), ctx, c, prod_inv, c_inv, dropped, neg_q, tail_q })
    }

    /// Random parameters with `v(c_j) = -q_j`, deterministic in `seed`.
    pub fn random(cfg: &RadiiConfig, ctx: &Ctx, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = cfg
            .qs
            .iter()
            .map(|q| random_with_valuation_rng(ctx, &-q.value().clone(), &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Self::new(cfg, c)
    }

    /// Negative control: evaluate `f` without factor `j`.
    pub fn with_dropped_factor(&self, j: usize) -> Result<Self> {
        Self::build(&self.cfg, self.c.clone(), Some(j))
    }

    pub fn dropped_factor(&self) -> Option<usize> {
        self.dropped
    }

    /// Copy with `c_j` replaced.
    pub fn with_param(&self, j: usize, a: PadicElement) -> Result<Self> {
        let mut c = self.c.clone();
        c[j - 1] = a;
        Self::build(&self.cfg, c, self.dropped)
    }

    /// Same parameters viewed in an extension field.
    pub fn embed(&self, ctx: &Ctx) -> Result<Self> {
        let c = self.c.iter().map(|x| x.embed(ctx)).collect::<Result<Vec<_>>>()?;
        Self::build(&self.cfg, c, self.dropped)
    }

    /// Same parameters with another context of the same field.
    pub fn in_context(&self, ctx: &Ctx) -> Result<Self> {
        let c = self.c.iter().map(|x| x.in_context(ctx)).collect::<Result<Vec<_>>>()?;
        Self::build(&self.cfg, c, self.dropped)
    }

    pub fn cfg(&self) -> &RadiiConfig {
        &self.cfg
    }

    pub fn ctx(&self) -> &Ctx {
        &self.ctx
    }

    /// `c_j`, 1-based.
    pub fn c(&self, j: usize) -> &PadicElement {
        &self.c[j - 1]
    }

    pub fn params(&self) -> &[PadicElement] {
        &self.c
    }

    fn active(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.c.len()).filter(move |&j| self.dropped != Some(j + 1))
    }

    fn check_tail(&self, z: &PadicElement) -> Result<i64> {
        let top = *self.neg_q.last().unwrap();
        match z.val_lower_scaled() {
            Some(v) if v <= top => Err(Error::TailBoundUnavailable(format_rational(&unscale(&self.ctx, v)))),
            Some(v) => Ok(v),
            None => Ok(i64::MAX / 4),
        }
    }

    /// `(c_j - z)` for the active factors.
    fn differences(&self, z: &PadicElement) -> Result<Vec<PadicElement>> {
        self.active().map(|j| self.c[j].sub(z)).collect()
    }
}

/// A value with a certified error valuation: `v(value - true) >= err_val`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalResult {
    pub value: PadicElement,
    /// `None` when the value is exact.
    pub err_val: Option<BigRational>,
}

impl EvalResult {
    fn exact(value: PadicElement) -> Self {
        EvalResult { value, err_val: None }
    }

    fn with_tail(value: PadicElement, tail: i64) -> Self {
        let ctx = value.ctx_arc();
        let bound = match (value.prec_scaled(), value.val_lower_scaled()) {
            (p, Some(v)) => Some(p.map_or(v + tail, |p| p.min(v + tail))),
            (p, None) => p,
        };
        EvalResult { value, err_val: bound.map(|b| unscale(&ctx, b)) }
    }

    /// The value with its precision lowered to the certified error bound.
    pub fn certified(&self) -> PadicElement {
        match &self.err_val {
            Some(e) => self.value.with_precision(e),
            None => self.value.clone(),
        }
    }
}

fn p_elem(ctx: &Ctx) -> PadicElement {
    PadicElement::p_power(ctx, 1)
}

/// Truncated `f_c(z)` with a certified error bound.
pub fn eval_f(c: &ParameterVector, z: &PadicElement) -> Result<EvalResult> {
    if !z.ctx().same_field(&c.ctx) {
        return Err(Error::ContextMismatch);
    }
    if z.is_exact() && z.is_zero() {
        return Ok(EvalResult::exact(PadicElement::zero(&c.ctx)));
    }
    let vz = c.check_tail(z)?;
    let mut g = z.pow(c.cfg.p as u32)?;
    for d in c.differences(z)? {
        g = g.mul(&d)?;
    }
    let value = g.mul(&c.prod_inv)?.div(&p_elem(&c.ctx))?;
    Ok(EvalResult::with_tail(value, vz + c.tail_q))
}

/// `f_c'(z)` by the product rule on `z^p ∏ (c_j - z)`.
pub fn eval_fprime(c: &ParameterVector, z: &PadicElement) -> Result<EvalResult> {
    if !z.ctx().same_field(&c.ctx) {
        return Err(Error::ContextMismatch);
    }
    let vz = c.check_tail(z)?;
    let p = c.cfg.p as u32;
    let diffs = c.differences(z)?;
    let n = diffs.len();
    let one = PadicElement::one(&c.ctx);
    // prefix[i] = ∏_{l<i} d_l, suffix[i] = ∏_{l>=i} d_l.
    let mut prefix = vec![one.clone()];
    for d in &diffs {
        prefix.push(prefix.last().unwrap().mul(d)?);
    }
    let mut suffix = vec![one.clone(); n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1].mul(&diffs[i])?;
    }
    let zp1 = z.pow(p - 1)?;
    let mut sum_others = PadicElement::zero(&c.ctx);
    for i in 0..n {
        sum_others = sum_others.add(&prefix[i].mul(&suffix[i + 1])?)?;
    }
    // g' = p z^{p-1} P - z^p Σ_j ∏_{i≠j} (c_i - z)
    let gp = zp1
        .mul(&PadicElement::from_i64(&c.ctx, p as i64))?
        .mul(&prefix[n])?
        .sub(&zp1.mul(z)?.mul(&sum_others)?)?;
    let value = gp.mul(&c.prod_inv)?.div(&p_elem(&c.ctx))?;
    // Tail: (f_J T)' = f_J' T + f_J T' with v(T - 1) >= v(z) + q_s and v(T') >= q_s.
    let fj = eval_f(c, z)?.value;
    let mut res = EvalResult::with_tail(value, vz + c.tail_q);
    if let Some(vf) = fj.val_lower_scaled() {
        let extra = unscale(&c.ctx, vf + c.tail_q);
        res.err_val = Some(match res.err_val {
            Some(e) => e.min(extra),
            None => extra,
        });
    }
    Ok(res)
}

/// `∂f_c/∂c_j (z) = (z^{p+1}/p) ∏_{i≠j}(c_i - z) / (C c_j)`.
pub fn eval_partial(c: &ParameterVector, z: &PadicElement, j: usize) -> Result<EvalResult> {
    if !z.ctx().same_field(&c.ctx) {
        return Err(Error::ContextMismatch);
    }
    if j == 0 || j > c.c.len() {
        return Err(Error::HorizonExceeded(format!("no parameter c_{j}")));
    }
    let vz = c.check_tail(z)?;
    if c.dropped == Some(j) {
        return Ok(EvalResult::exact(PadicElement::zero(&c.ctx)));
    }
    let mut g = z.pow(c.cfg.p as u32 + 1)?;
    for i in c.active() {
        if i + 1 != j {
            g = g.mul(&c.c[i].sub(z)?)?;
        }
    }
    let value = g.mul(&c.prod_inv)?.mul(&c.c_inv[j - 1])?.div(&p_elem(&c.ctx))?;
    Ok(EvalResult::with_tail(value, vz + c.tail_q))
}

/// Partition element of `z`: `B_0` if `v(z) > 0`, `B_j` if `v(z - c_j) > -q_j`, else `A`.
pub fn classify(c: &ParameterVector, z: &PadicElement) -> Result<Symbol> {
    let undecidable = |what: String| Error::UndecidableAtPrecision(what);
    let vz = match z.valuation_scaled() {
        Some(v) => v,
        None => {
            return match z.prec_scaled() {
                None => Ok(Symbol::B(0)),
                Some(pr) if pr > 0 => Ok(Symbol::B(0)),
                Some(pr) => Err(undecidable(format!(
                    "|z| unknown beyond precision {}",
                    format_rational(&unscale(&c.ctx, pr))
                ))),
            };
        }
    };
    if vz > 0 {
        return Ok(Symbol::B(0));
    }
    if let Some(j) = c.neg_q.iter().position(|&nq| nq == vz) {
        let d = z.sub(&c.c[j])?;
        let threshold = c.neg_q[j];
        return match d.valuation_scaled() {
            Some(v) if v > threshold => Ok(Symbol::B(j + 1)),
            Some(_) => Ok(Symbol::A),
            None => match d.prec_scaled() {
                Some(pr) if pr <= threshold => Err(undecidable(format!("|z - c_{}| at the boundary", j + 1))),
                _ => Ok(Symbol::B(j + 1)),
            },
        };
    }
    Ok(Symbol::A)
}

/// One orbit point as dumped in JSON lines.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub n: u64,
    /// Valuation, or its lower bound when the point is indistinguishable from 0;
    /// `None` for an exact zero.
    #[serde(with = "crate::rational::serde_opt_rational")]
    pub v: Option<BigRational>,
    #[serde(with = "symbol_compact")]
    pub symbol: Option<Symbol>,
    pub certified: bool,
}

/// One compact JSON object per line.
pub fn orbit_json_lines(records: &[OrbitRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out += &serde_json::to_string(r)?;
        out.push('\n');
    }
    Ok(out)
}

/// `"A"`, `"B0"`, `"B1"`, …; `null` when undecidable.
mod symbol_compact {
    use super::Symbol;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: &Option<Symbol>, ser: S) -> Result<S::Ok, S::Error> {
        match s {
            Some(Symbol::A) => ser.serialize_str("A"),
            Some(Symbol::B(j)) => ser.serialize_str(&format!("B{j}")),
            None => ser.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Symbol>, D::Error> {
        let s: Option<String> = Option::deserialize(d)?;
        s.map(|s| match s.as_str() {
            "A" => Ok(Symbol::A),
            other => other
                .strip_prefix('B')
                .and_then(|j| j.parse().ok())
                .map(Symbol::B)
                .ok_or_else(|| serde::de::Error::custom(format!("bad symbol {other:?}"))),
        })
        .transpose()
    }
}

/// Forward orbit with certified classification; stops at the first step that
/// cannot be certified.
pub fn orbit(c: &ParameterVector, z: &PadicElement, steps: u64) -> Vec<OrbitRecord> {
    let mut out = Vec::new();
    let mut cur = z.clone();
    for n in 0..steps {
        let sym = classify(c, &cur).ok();
        out.push(OrbitRecord { n, v: cur.valuation_lower_bound(), symbol: sym, certified: sym.is_some() });
        if sym.is_none() || n + 1 == steps {
            break;
        }
        match eval_f(c, &cur) {
            Ok(r) => cur = r.certified(),
            Err(_) => break,
        }
    }
    out
}

/// Itinerary of `z`: the certified prefix and its length.
pub fn itinerary(c: &ParameterVector, z: &PadicElement, steps: u64) -> (ItineraryWord, u64) {
    let records = orbit(c, z, steps);
    let symbols: Vec<Symbol> = records.iter().map_while(|r| r.symbol).collect();
    let n = symbols.len() as u64;
    (ItineraryWord { symbols }, n)
}

/// `f_J^n(z)` for the truncated map (arithmetic precision only).
pub fn iterate(c: &ParameterVector, z: &PadicElement, n: u64) -> Result<PadicElement> {
    let mut cur = z.clone();
    for _ in 0..n {
        cur = eval_f(c, &cur)?.value;
    }
    Ok(cur)
}

struct Preimage<'a> {
    c: &'a ParameterVector,
    y: PadicElement,
}

impl AnalyticFn for Preimage<'_> {
    fn eval(&self, x: &PadicElement) -> Result<PadicElement> {
        eval_f(self.c, x)?.value.sub(&self.y)
    }
    fn deriv(&self, x: &PadicElement) -> Result<PadicElement> {
        Ok(eval_fprime(self.c, x)?.value)
    }
}

struct FixedPointMap<'a> {
    c: &'a ParameterVector,
}

impl AnalyticFn for FixedPointMap<'_> {
    fn eval(&self, x: &PadicElement) -> Result<PadicElement> {
        eval_f(self.c, x)?.value.sub(x)
    }
    fn deriv(&self, x: &PadicElement) -> Result<PadicElement> {
        eval_fprime(self.c, x)?.value.sub(&PadicElement::one(x.ctx()))
    }
}

// Root finding below concerns the truncated map `f_J`; its distance to the
// full product is reported separately through `EvalResult::err_val`.

/// Solve `f_J(z) = y` by Newton from `z0`, to residual valuation `target`.
pub fn solve_preimage(
    c: &ParameterVector,
    y: &PadicElement,
    z0: &PadicElement,
    target: &BigRational,
) -> Result<PadicElement> {
    newton_solve(&Preimage { c, y: y.clone() }, z0, target)
}

/// The repelling fixed point `w_k ∈ B_k`, by Newton on `f - id` from `c_k`.
pub fn fixed_point(c: &ParameterVector, k: usize, target: &BigRational) -> Result<PadicElement> {
    if k == 0 || k > c.c.len() {
        return Err(Error::HorizonExceeded(format!("no disk B_{k}")));
    }
    newton_solve(&FixedPointMap { c }, c.c(k), target)
}

/// `h(0), h^2(0), …, h^ell(0)` for the inverse branch `h` of `f` on `B_k`.
/// `h(0) = c_k` exactly; later points solve `f(z) = previous` from the previous point.
pub fn inverse_orbit(
    c: &ParameterVector,
    k: usize,
    ell: u64,
    target: &BigRational,
) -> Result<Vec<PadicElement>> {
    if ell == 0 {
        return Err(Error::InvalidConfig("ell must be >= 1".into()));
    }
    if k == 0 || k > c.c.len() {
        return Err(Error::HorizonExceeded(format!("no disk B_{k}")));
    }
    let mut out = vec![c.c(k).clone()];
    while (out.len() as u64) < ell {
        let y = out.last().unwrap();
        let z = solve_preimage(c, y, y, target)?;
        out.push(z);
    }
    Ok(out)
}

/// A root of `z^d = a` in `ctx` or in a radical extension of it.
fn radical_root(ctx: &Ctx, a: &PadicElement, d: u64) -> Result<(Ctx, PadicElement)> {
    let va = a.valuation_scaled().ok_or(Error::IndistinguishableFromZero)?;
    if crate::rational::gcd_i64(va, d as i64) == 1 {
        return adjoin_radical(ctx, a, d);
    }
    if va % d as i64 != 0 {
        return Err(Error::UnsupportedExtension(format!(
            "degree-{d} root of an element of valuation {va}/{}",
            ctx.ramification()
        )));
    }
    // Unramified case: leading monomial times a residue root, refined by Newton.
    let m = PadicElement::monomial_with_valuation(ctx, va / d as i64);
    let u = a.div(&m.pow(d as u32)?)?;
    let r0 = u.unit_residue().ok_or(Error::IndistinguishableFromZero)?;
    let p = ctx.p();
    let root = (1..p)
        .find(|&r| num_traits::pow(BigInt::from(r), d as usize) % BigInt::from(p) == BigInt::from(r0))
        .ok_or_else(|| Error::UnsupportedExtension(format!("{r0} has no {d}-th root mod {p}")))?;
    let z0 = m.mul(&PadicElement::from_i64(ctx, root as i64))?;
    let mut coeffs = vec![PadicElement::zero(ctx); d as usize + 1];
    coeffs[0] = a.neg();
    coeffs[d as usize] = PadicElement::one(ctx);
    let poly = crate::padic::Polynomial::new(coeffs);
    let target = unscale(ctx, va + ctx.wp_scaled() / 2);
    let z = newton_solve(&poly, &z0, &target).map_err(|e| match e {
        Error::HenselConditionFailed { .. } => {
            Error::UnsupportedExtension(format!("degree-{d} root not liftable by Newton"))
        }
        other => other,
    })?;
    Ok((ctx.clone(), z))
}

/// `α + β z` in `K[z]/(z^2 + b z + c)`.
#[derive(Clone)]
struct Lin(PadicElement, PadicElement);

fn lin_mul(x: &Lin, y: &Lin, b: &PadicElement, c: &PadicElement) -> Result<Lin> {
    let zz = x.1.mul(&y.1)?;
    let lin = x.0.mul(&y.1)?.add(&x.1.mul(&y.0)?)?.sub(&zz.mul(b)?)?;
    Ok(Lin(x.0.mul(&y.0)?.sub(&zz.mul(c)?)?, lin))
}

fn lin_inv(x: &Lin, b: &PadicElement, c: &PadicElement) -> Result<Lin> {
    let (a, bb) = (&x.0, &x.1);
    let norm = a.square()?.sub(&a.mul(bb)?.mul(b)?)?.add(&bb.square()?.mul(c)?)?;
    let inv = norm.inverse()?;
    Ok(Lin(a.sub(&bb.mul(b)?)?.mul(&inv)?, bb.neg().mul(&inv)?))
}

/// Preimages of `y` of the two-root region as roots of the exact quadratic
/// factor `z^2 + b z + c` of `f(z) - y`, found as the fixed point of
/// `Q ↦ z^2 - p y E(z)^{-1} mod Q` with `E(z) = ∏ (1 - z/c_j)`.
fn quadratic_preimage(c: &ParameterVector, y: &PadicElement) -> Result<(Ctx, PadicElement)> {
    let ctx = c.ctx().clone();
    let wp = ctx.wp_scaled();
    let py = y.mul_p_power(1);
    let zero = PadicElement::zero(&ctx);
    let one = PadicElement::one(&ctx);
    let (mut b, mut cc) = (zero.clone(), py.neg());
    let mut converged = false;
    for _ in 0..4 * wp.max(16) {
        let mut e = Lin(one.clone(), zero.clone());
        for j in c.active() {
            e = lin_mul(&e, &Lin(one.clone(), c.c_inv[j].neg()), &b, &cc)?;
        }
        let r = lin_inv(&e, &b, &cc)?;
        let nb = py.mul(&r.1)?.neg().exact_truncated(wp);
        let nc = py.mul(&r.0)?.neg().exact_truncated(wp);
        let db = nb.sub(&b)?.val_lower_scaled().unwrap_or(i64::MAX);
        let dc = nc.sub(&cc)?.val_lower_scaled().unwrap_or(i64::MAX);
        b = nb;
        cc = nc;
        if db.min(dc) >= wp - ctx.ramification() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::PrecisionExhausted("quadratic factor did not converge".into()));
    }
    let disc = b.square()?.sub(&cc.mul(&PadicElement::from_i64(&ctx, 4))?)?;
    let (ext, s) = radical_root(&ctx, &disc, 2)?;
    let z = s.sub(&b.embed(&ext)?)?.div(&PadicElement::from_i64(&ext, 2))?;
    Ok((ext, z))
}

/// A point with itinerary `B_0^{m1} A^{n1} B_1 …`, with `f^{m1+n1}(x) = w_1`.
#[derive(Clone, Debug)]
pub struct Seed {
    pub x: PadicElement,
    /// Parameters embedded in the seed's field.
    pub params: ParameterVector,
    /// `w_1` in the seed's field.
    pub w: PadicElement,
    /// Log-radii `-v` of the backward orbit `f^{m1+n1-1}(x), …, x`.
    pub log_radii: Vec<LogRadius>,
}

/// Build `x` by backward steps from `w_1`: each preimage starts at a root of the
/// dominant monomial `coef · z^{p+j-1}` and is refined by Newton.
pub fn find_seed(c: &ParameterVector, m1: u64, n1: u64, target: &BigRational) -> Result<Seed> {
    if m1 == 0 || n1 == 0 {
        return Err(Error::InvalidConfig("m1 and n1 must be >= 1".into()));
    }
    let cfg = c.cfg();
    let n_1 = compute_n(cfg, 1)?;
    if n1 != n_1 {
        return Err(Error::InvalidConfig(format!("n1 = {n1} but the transition time n_1 is {n_1}")));
    }
    let w = fixed_point(c, 1, target)?;
    let mut params = c.clone();
    let mut y = w.clone();
    let mut w_ext = w;
    let mut log_radii = Vec::new();
    let p = cfg.p as usize;
    for t in 1..=(m1 + n1) {
        let r = phi_inv_iter(cfg, cfg.q(1), t)?;
        let region = cfg.qs.iter().position(|q| &r <= q).unwrap_or(cfg.horizon()) + 1;
        let degree = (p + region - 1) as u64;
        let ctx = params.ctx().clone();
        // coef = (1/p) ∏_{i<region} (-1/c_i)
        let mut coef = PadicElement::one(&ctx).div(&p_elem(&ctx))?;
        for i in 1..region {
            coef = coef.mul(&params.c_inv[i - 1].neg())?;
        }
        let (ext, z0) = if degree == 2 {
            quadratic_preimage(&params, &y)?
        } else {
            radical_root(&ctx, &y.div(&coef)?, degree)?
        };
        if !ext.same_field(&ctx) {
            params = params.embed(&ext)?;
            y = y.embed(&ext)?;
            w_ext = w_ext.embed(&ext)?;
        }
        let z = solve_preimage(&params, &y, &z0, target)?;
        let vz = z.valuation()?;
        if vz != -r.value().clone() {
            return Err(Error::InconsistentPlan(format!(
                "preimage {t} has valuation {} but the skeleton predicts {}",
                format_rational(&vz),
                format_rational(&-r.value().clone())
            )));
        }
        log_radii.push(r);
        y = z;
    }
    let mut expect = ItineraryWord::default()
        .then(Symbol::B(0), m1)
        .then(Symbol::A, n1)
        .then(Symbol::B(1), 1);
    let (word, _) = itinerary(&params, &y, m1 + n1 + 1);
    if !word.starts_with(&expect) {
        expect.symbols.truncate(word.len());
        return Err(Error::InconsistentPlan(format!("seed itinerary {word} does not start with {expect}")));
    }
    Ok(Seed { x: y, params, w: w_ext, log_radii })
}

/// Desk-scale first stage: `B_0^{m1} A^{n1} B_1^{ell}` with `c_2` as the moved parameter.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MicroPlan {
    pub m1: u64,
    pub n1: u64,
    pub ell: u64,
    /// `e_2`; perturbations of `c_2` must satisfy `v(Δc_2) > -e_2`.
    pub eps_log: LogRadius,
}

impl MicroPlan {
    /// `m1 = 1`, `n1 = n_1`, `ell = 2`, and `e_2` halfway between the connecting
    /// bound and `q_2`, so the connecting inequality holds and `|c''_2| = R_2`.
    pub fn standard(cfg: &RadiiConfig) -> Result<Self> {
        if cfg.horizon() < 2 {
            return Err(Error::HorizonExceeded("micro plan needs q_2".into()));
        }
        let ell = 2u64;
        let p = cfg.p_i64();
        let bound = int(1) + BigRational::new(1.into(), (p - 1).into()) + int(2) * cfg.q(2).value()
            - s_log(cfg, 1)?.value()
            - int(ell as i64) * lambda_log(cfg, 1)?.value();
        let eps = (bound + cfg.q(2).value()) / int(2);
        Ok(MicroPlan { m1: 1, n1: compute_n(cfg, 1)?, ell, eps_log: LogRadius::from_rational(eps) })
    }

    /// `N_1 = m1 + n1`.
    pub fn big_n(&self) -> u64 {
        self.m1 + self.n1
    }

    pub fn connect_request(&self, target: BigRational) -> ConnectRequest {
        ConnectRequest { k: 1, n_k: self.big_n(), ell: self.ell, eps_log: self.eps_log.clone(), target }
    }
}

/// Inputs of the parameter-Newton connecting step.
#[derive(Clone, Debug)]
pub struct ConnectRequest {
    /// Stage `k`; the parameter moved is `c_{k+1}`.
    pub k: usize,
    /// `N_k`, the orbit length after which `x` sits at `w_k`.
    pub n_k: u64,
    /// `ℓ_{k+1}`.
    pub ell: u64,
    /// `e_{k+1} = log ε_{k+1}`.
    pub eps_log: LogRadius,
    /// Required residual valuation of `H(c'')`.
    pub target: BigRational,
}

#[derive(Clone, Debug)]
pub struct ConnectOutcome {
    pub params: ParameterVector,
    pub iterations: u32,
    #[doc = "v(H(c)), measured."]
    pub v_h_initial: BigRational,
    /// `-q_k + ℓ Λ_k`.
    pub v_h_predicted: BigRational,
    pub v_slope: Vec<BigRational>,
    /// `2 q_{k+1} - q_k - σ_k`.
    pub v_slope_predicted: BigRational,
    pub v_shift: BigRational,
    pub v_shift_predicted: BigRational,
    /// Lower bound on `v(H(c''))`.
    pub residual: BigRational,
    /// `v(H(c)) > v(∂H) - e_{k+1} - log ρ`: `H` covers a disk containing 0.
    pub disk_criterion: bool,
    /// `v(c''_{k+1} - c_{k+1}) > -e_{k+1}`.
    pub within_eps: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct ConnectSummary {
    pub iterations: u32,
    #[serde(with = "serde_rational")]
    pub v_h_initial: BigRational,
    #[serde(with = "serde_rational")]
    pub v_h_predicted: BigRational,
    #[serde(with = "serde_rational")]
    pub v_slope_predicted: BigRational,
    pub v_slope: Vec<crate::padic::RationalText>,
    #[serde(with = "serde_rational")]
    pub v_shift: BigRational,
    #[serde(with = "serde_rational")]
    pub v_shift_predicted: BigRational,
    #[serde(with = "serde_rational")]
    pub residual: BigRational,
    pub disk_criterion: bool,
    pub within_eps: bool,
}

impl ConnectOutcome {
    pub fn summary(&self) -> ConnectSummary {
        ConnectSummary {
            iterations: self.iterations,
            v_h_initial: self.v_h_initial.clone(),
            v_h_predicted: self.v_h_predicted.clone(),
            v_slope_predicted: self.v_slope_predicted.clone(),
            v_slope: self.v_slope.iter().cloned().map(crate::padic::RationalText).collect(),
            v_shift: self.v_shift.clone(),
            v_shift_predicted: self.v_shift_predicted.clone(),
            residual: self.residual.clone(),
            disk_criterion: self.disk_criterion,
            within_eps: self.within_eps,
        }
    }
}

/// `H(a) = f_a^{N_k}(x) - h_a^{ℓ}(0)` with `a` substituted for `c_{k+1}`.
fn connect_residual(
    c: &ParameterVector,
    x: &PadicElement,
    req: &ConnectRequest,
    a: &PadicElement,
    inner: &BigRational,
) -> Result<PadicElement> {
    let pa = c.with_param(req.k + 1, a.clone())?;
    let fx = iterate(&pa, x, req.n_k)?;
    let h = inverse_orbit(&pa, req.k, req.ell, inner)?;
    fx.sub(h.last().unwrap())
}

/// Move `c_{k+1}` so that `f^{N_k}(x)` lands exactly on `h^{ℓ}(0)`, by a secant
/// Newton iteration whose slope valuation is checked against the skeleton.
pub fn connect_parameter(
    c: &ParameterVector,
    x: &PadicElement,
    req: &ConnectRequest,
) -> Result<ConnectOutcome> {
    let cfg = c.cfg();
    let (k, ell) = (req.k, req.ell);
    if k == 0 || k + 1 > cfg.horizon() {
        return Err(Error::HorizonExceeded(format!("stage {k} needs c_{}", k + 1)));
    }
    let ctx = c.ctx().clone();
    let q = |j: usize| cfg.q(j).value().clone();
    let lam = lambda_log(cfg, k)?.into_rational();
    let sig = s_log(cfg, k)?.into_rational();
    let v_h_predicted = -q(k) + int(ell as i64) * &lam;
    let v_slope_predicted = int(2) * q(k + 1) - q(k) - &sig;
    let v_shift_predicted = &v_h_predicted - &v_slope_predicted;
    let rho = varrho_log(cfg.p).into_rational();
    let e = req.eps_log.value().clone();
    // Inverse-orbit residuals are kept well beyond the requested target.
    let inner = unscale(&ctx, ctx.wp_scaled()) - &lam - int(4);

    let hensel = |vh: &BigRational, vs: &BigRational| Error::HenselConditionFailed {
        value_valuation: format_rational(vh),
        derivative_valuation: format_rational(vs),
    };

    let a0 = c.c(k + 1).clone();
    let mut a = a0.clone();
    let mut h = connect_residual(c, x, req, &a, &inner)?;
    let v_h_initial = h.valuation()?;
    let delta_v = ceil_i64(&v_shift_predicted).unwrap_or(0);
    let mut step = PadicElement::p_power(&ctx, delta_v);
    let mut h_next = connect_residual(c, x, req, &a.add(&step)?, &inner)?;
    let mut v_slope = Vec::new();
    let mut disk_criterion = None;
    let target_s = scaled(&ctx, &req.target).unwrap_or(i64::MAX);
    let mut iterations = 0;
    loop {
        let slope = h_next.sub(&h)?.div(&step)?;
        let vs = slope.valuation().map_err(|_| hensel(&v_h_initial, &v_slope_predicted))?;
        if vs != v_slope_predicted {
            return Err(hensel(&v_h_initial, &vs));
        }
        if disk_criterion.is_none() {
            let ok = v_h_initial > &vs - &e - &rho;
            if !ok {
                return Err(hensel(&v_h_initial, &vs));
            }
            disk_criterion = Some(ok);
        }
        v_slope.push(vs);
        // Secant step from the newer point.
        let (a_cur, h_cur) = (a.add(&step)?, h_next);
        let correction = h_cur.div(&slope)?;
        let a_new = a_cur.sub(&correction)?.exact_truncated(ctx.wp_scaled());
        let h_new = connect_residual(c, x, req, &a_new, &inner)?;
        iterations += 1;
        let vr = h_new.val_lower_scaled().unwrap_or(i64::MAX);
        if vr >= target_s || h_new.is_zero() {
            let shift = a_new.sub(&a0)?;
            let v_shift = shift.valuation()?;
            let within_eps = v_shift > -e.clone();
            let params = c.with_param(k + 1, a_new)?;
            return Ok(ConnectOutcome {
                params,
                iterations,
                v_h_initial,
                v_h_predicted,
                v_slope,
                v_slope_predicted,
                v_shift,
                v_shift_predicted,
                residual: unscale(&ctx, vr.min(h_new.prec_scaled().unwrap_or(vr))),
                disk_criterion: disk_criterion.unwrap_or(false),
                within_eps,
            });
        }
        if iterations >= 40 {
            return Err(Error::PrecisionExhausted(format!(
                "connecting residual stalled at valuation {}",
                format_rational(&unscale(&ctx, vr))
            )));
        }
        step = a_new.sub(&a_cur)?;
        if step.is_zero() {
            return Err(Error::PrecisionExhausted("secant step vanished".into()));
        }
        a = a_cur;
        h = h_cur;
        h_next = h_new;
    }
}

/// Whether `z` lies in the first region (`v(z) > -q_1`); used by samplers.
pub fn below_first_radius(cfg: &RadiiConfig, v: &BigRational) -> bool {
    v > &-cfg.q(1).value().clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::FieldContext;
    use crate::rational::rat;

    fn setup() -> ParameterVector {
        let cfg = RadiiConfig::from_integers(2, &[2, 4, 7, 12]).unwrap();
        let ctx = FieldContext::qp(2, 96).unwrap();
        ParameterVector::random(&cfg, &ctx, 7).unwrap()
    }

    #[test]
    fn norms_and_derivatives() {
        let c = setup();
        let ctx = c.ctx().clone();
        assert!(eval_f(&c, &PadicElement::zero(&ctx)).unwrap().value.is_zero());
        let two = PadicElement::from_i64(&ctx, 2);
        let r = eval_f(&c, &two).unwrap();
        assert_eq!(r.value.valuation().unwrap(), int(1));
        assert!(r.err_val.unwrap() > int(1));
        assert_eq!(eval_fprime(&c, &two).unwrap().value.valuation().unwrap(), int(1));
        assert_eq!(eval_partial(&c, &two, 1).unwrap().value.valuation().unwrap(), int(6));
        let z = PadicElement::p_power(&ctx, -3).add(&PadicElement::one(&ctx)).unwrap();
        assert_eq!(eval_f(&c, &z).unwrap().value.valuation().unwrap(), int(-8));
        let b1 = c.c(1).add(&PadicElement::one(&ctx)).unwrap();
        assert_eq!(eval_fprime(&c, &b1).unwrap().value.valuation().unwrap(), int(-3));
        let far = PadicElement::p_power(&ctx, -12);
        assert!(matches!(eval_f(&c, &far), Err(Error::TailBoundUnavailable(_))));
    }

    #[test]
    fn dropped_factor_changes_norm_in_b1() {
        let c = setup();
        let z = c.c(1).add(&PadicElement::one(c.ctx())).unwrap();
        let v = eval_f(&c, &z).unwrap().value.valuation().unwrap();
        let d = c.with_dropped_factor(1).unwrap();
        assert_ne!(eval_f(&d, &z).unwrap().value.valuation().unwrap(), v);
    }

    #[test]
    fn classification() {
        let c = setup();
        let ctx = c.ctx().clone();
        assert_eq!(classify(&c, &PadicElement::from_i64(&ctx, 2)).unwrap(), Symbol::B(0));
        assert_eq!(classify(&c, c.c(2)).unwrap(), Symbol::B(2));
        assert_eq!(classify(&c, &PadicElement::one(&ctx)).unwrap(), Symbol::A);
        assert_eq!(classify(&c, &c.c(1).add(c.c(1)).unwrap()).unwrap(), Symbol::A);
        let (w, n) = itinerary(&c, &PadicElement::zero(&ctx), 5);
        assert_eq!((w.to_string(), n), ("B_0^5".to_string(), 5));
    }

    #[test]
    fn fixed_point_and_inverse_branch() {
        let c = setup();
        let w = fixed_point(&c, 1, &int(60)).unwrap();
        assert_eq!(classify(&c, &w).unwrap(), Symbol::B(1));
        assert_eq!(eval_fprime(&c, &w).unwrap().value.valuation().unwrap(), int(-3));
        let h = inverse_orbit(&c, 1, 5, &int(60)).unwrap();
        let d: Vec<_> = h.iter().map(|x| x.sub(&w).unwrap().valuation().unwrap()).collect();
        assert_eq!(d, [1, 4, 7, 10, 13].map(int));
        assert!(eval_f(&c, &h[0]).unwrap().value.is_zero());
    }

    #[test]
    fn seed_and_connect() {
        let c = setup();
        assert!(find_seed(&c, 0, 1, &int(60)).is_err());
        let seed = find_seed(&c, 1, 1, &int(60)).unwrap();
        assert_eq!(seed.x.valuation().unwrap(), rat(1, 4));
        let (word, _) = itinerary(&seed.params, &seed.x, 4);
        assert_eq!(word.to_string(), "B_0 A B_1^2");
        let plan = MicroPlan::standard(c.cfg()).unwrap();
        assert_eq!(plan.eps_log, LogRadius::new(15, 4));
        let req = plan.connect_request(int(40));
        let out = connect_parameter(&seed.params, &seed.x, &req).unwrap();
        assert_eq!(out.v_h_initial, int(4));
        assert!(out.v_slope.iter().all(|v| *v == rat(11, 2)));
        assert_eq!(out.v_shift, rat(-3, 2));
        assert_eq!(out.v_shift, out.v_shift_predicted);
        assert!(out.residual >= int(40) && out.disk_criterion && out.within_eps);
        let (word, n) = itinerary(&out.params, &seed.x, 14);
        assert_eq!((word.to_string(), n), ("B_0 A B_1^2 B_0^10".to_string(), 14));
    }

    #[test]
    fn orbit_records_serialize_compactly() {
        let rec = OrbitRecord { n: 3, v: Some(rat(-1, 2)), symbol: Some(Symbol::B(0)), certified: true };
        let s = serde_json::to_string(&rec).unwrap();
        assert_eq!(s, r#"{"n":3,"v":"-1/2","symbol":"B0","certified":true}"#);
        assert_eq!(serde_json::from_str::<OrbitRecord>(&s).unwrap(), rec);
        let lines = orbit_json_lines(&[rec.clone(), rec]).unwrap();
        assert_eq!(lines.lines().count(), 2);
        assert!(lines.lines().all(|l| l == s));
    }
}
