use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::context::{Ctx, FieldContext, RationalText, TowerDescriptor};
use crate::error::{Error, Result};
use crate::rational::serde_opt_rational;

/// `unit · p^shift` with `p ∤ unit`; zero is `unit = 0, shift = 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Leaf {
    unit: BigInt,
    shift: i64,
}

fn p_pow(p: &BigInt, k: u64) -> BigInt {
    num_traits::pow(p.clone(), k as usize)
}

fn ceil_div(a: i64, b: i64) -> i64 {
    Integer::div_ceil(&a, &b)
}

impl Leaf {
    pub(crate) fn zero() -> Self {
        Leaf { unit: BigInt::zero(), shift: 0 }
    }

    fn new(p: &BigInt, unit: BigInt, shift: i64) -> Self {
        let mut l = Leaf { unit, shift };
        l.normalize(p);
        l
    }

    fn is_zero(&self) -> bool {
        self.unit.is_zero()
    }

    fn normalize(&mut self, p: &BigInt) {
        if self.unit.is_zero() {
            self.shift = 0;
            return;
        }
        if *p == BigInt::from(2) {
            let tz = self.unit.trailing_zeros().unwrap_or(0);
            if tz > 0 {
                self.unit >>= tz;
                self.shift += tz as i64;
            }
            return;
        }
        loop {
            let (q, r) = self.unit.div_rem(p);
            if !r.is_zero() {
                break;
            }
            self.unit = q;
            self.shift += 1;
        }
    }

    fn add(&self, other: &Leaf, p: &BigInt) -> Leaf {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let s = self.shift.min(other.shift);
        let a = &self.unit * p_pow(p, (self.shift - s) as u64);
        let b = &other.unit * p_pow(p, (other.shift - s) as u64);
        Leaf::new(p, a + b, s)
    }

    fn neg(&self) -> Leaf {
        Leaf { unit: -&self.unit, shift: self.shift }
    }

    fn mul(&self, other: &Leaf) -> Leaf {
        if self.is_zero() || other.is_zero() {
            return Leaf::zero();
        }
        Leaf { unit: &self.unit * &other.unit, shift: self.shift + other.shift }
    }

    /// Keep only the digits of `p`-adic valuation below `digits_below`.
    fn truncate_below(&mut self, p: &BigInt, digits_below: i64) {
        if self.is_zero() {
            return;
        }
        let count = digits_below - self.shift;
        if count <= 0 {
            *self = Leaf::zero();
            return;
        }
        let m = p_pow(p, count as u64);
        self.unit = self.unit.mod_floor(&m);
        // Prefer the balanced representative so negated values stay short.
        if &self.unit * 2 > m {
            self.unit -= &m;
        }
        self.normalize(p);
    }

    pub(crate) fn to_rational(&self, p: u64) -> BigRational {
        let pb = BigInt::from(p);
        if self.shift >= 0 {
            BigRational::from_integer(&self.unit * p_pow(&pb, self.shift as u64))
        } else {
            BigRational::new(self.unit.clone(), p_pow(&pb, (-self.shift) as u64))
        }
    }

    fn from_rational(r: &BigRational, p: &BigInt, digits_below: i64) -> Result<Leaf> {
        if r.is_zero() {
            return Ok(Leaf::zero());
        }
        let num = Leaf::new(p, r.numer().clone(), 0);
        let den = Leaf::new(p, r.denom().clone(), 0);
        let shift = num.shift - den.shift;
        if den.unit.abs().is_one() {
            return Ok(Leaf::new(p, num.unit * den.unit.signum(), shift));
        }
        // Non-p-power denominator: expand to the requested number of digits.
        let count = digits_below - shift;
        if count <= 0 {
            return Ok(Leaf::zero());
        }
        let m = p_pow(p, count as u64);
        let inv = mod_inverse(&den.unit, &m)
            .ok_or_else(|| Error::InvalidConfig(format!("{r} is not a p-adic number")))?;
        let mut l = Leaf::new(p, (num.unit * inv).mod_floor(&m), shift);
        l.truncate_below(p, digits_below);
        Ok(l)
    }
}

pub(crate) fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let g = a.extended_gcd(m);
    if !g.gcd.abs().is_one() {
        return None;
    }
    Some((g.x * g.gcd.signum()).mod_floor(m))
}

/// Finite-precision element of a radical tower over `ℚ_p`.
///
/// The representative is exact; `prec` (units of `1/e`) bounds how much of it is
/// certified. `prec = None` means the representative is the element itself.
#[derive(Clone)]
pub struct PadicElement {
    ctx: Ctx,
    leaves: Vec<Leaf>,
    prec: Option<i64>,
}

/// Multiply two level-`lvl` leaf vectors and reduce with `t_lvl^d = a_lvl`.
fn mul_level(ctx: &FieldContext, lvl: usize, x: &[Leaf], y: &[Leaf]) -> Vec<Leaf> {
    let p = &ctx.pbig;
    if lvl == 0 {
        return vec![x[0].mul(&y[0])];
    }
    let d = ctx.levels[lvl - 1].d as usize;
    let block = ctx.dims[lvl - 1];
    let zero_block = |b: &[Leaf]| b.iter().all(Leaf::is_zero);
    let mut prod: Vec<Option<Vec<Leaf>>> = vec![None; 2 * d - 1];
    for i in 0..d {
        let xi = &x[i * block..(i + 1) * block];
        if zero_block(xi) {
            continue;
        }
        for j in 0..d {
            let yj = &y[j * block..(j + 1) * block];
            if zero_block(yj) {
                continue;
            }
            let term = mul_level(ctx, lvl - 1, xi, yj);
            let slot = &mut prod[i + j];
            *slot = Some(match slot.take() {
                None => term,
                Some(acc) => add_vec(p, &acc, &term),
            });
        }
    }
    let a = &ctx.levels[lvl - 1].a;
    for k in (d..2 * d - 1).rev() {
        if let Some(hi) = prod[k].take() {
            let folded = mul_level(ctx, lvl - 1, &hi, a);
            let slot = &mut prod[k - d];
            *slot = Some(match slot.take() {
                None => folded,
                Some(acc) => add_vec(p, &acc, &folded),
            });
        }
    }
    let mut out = Vec::with_capacity(d * block);
    for slot in prod.into_iter().take(d) {
        match slot {
            Some(v) => out.extend(v),
            None => out.extend(std::iter::repeat_n(Leaf::zero(), block)),
        }
    }
    out
}

fn add_vec(p: &BigInt, x: &[Leaf], y: &[Leaf]) -> Vec<Leaf> {
    x.iter().zip(y).map(|(a, b)| a.add(b, p)).collect()
}

fn min_opt(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, None) => a,
        (None, b) => b,
    }
}

impl PadicElement {
    fn raw(ctx: &Ctx, leaves: Vec<Leaf>, prec: Option<i64>) -> Self {
        let mut x = PadicElement { ctx: ctx.clone(), leaves, prec };
        if let Some(n) = prec {
            x.truncate_to(n);
        }
        x
    }

    pub fn zero(ctx: &Ctx) -> Self {
        PadicElement { ctx: ctx.clone(), leaves: vec![Leaf::zero(); ctx.degree()], prec: None }
    }

    pub fn one(ctx: &Ctx) -> Self {
        Self::from_i64(ctx, 1)
    }

    pub fn from_i64(ctx: &Ctx, n: i64) -> Self {
        Self::from_bigint(ctx, BigInt::from(n))
    }

    pub fn from_bigint(ctx: &Ctx, n: BigInt) -> Self {
        let mut x = Self::zero(ctx);
        x.leaves[0] = Leaf::new(&ctx.pbig, n, 0);
        x
    }

    /// `p^k`.
    pub fn p_power(ctx: &Ctx, k: i64) -> Self {
        let mut x = Self::zero(ctx);
        x.leaves[0] = Leaf { unit: BigInt::one(), shift: k };
        x
    }

    /// A rational in `ℚ_p`: exact if its denominator is a power of `p`, otherwise
    /// expanded to the context's working precision.
    pub fn from_rational(ctx: &Ctx, r: &BigRational) -> Result<Self> {
        let leaf = Leaf::from_rational(r, &ctx.pbig, ceil_div(ctx.wp_scaled(), ctx.e))?;
        let exact = {
            let d = r.denom();
            let mut dd = d.clone();
            while (&dd % &ctx.pbig).is_zero() {
                dd /= &ctx.pbig;
            }
            dd.is_one()
        };
        let mut x = Self::zero(ctx);
        x.leaves[0] = leaf;
        if !exact {
            x.prec = Some(ctx.wp_scaled());
        }
        Ok(x)
    }

    pub(crate) fn from_leaf_rationals(
        ctx: &Ctx,
        digits: &[RationalText],
        prec: Option<i64>,
    ) -> Result<Self> {
        if digits.len() != ctx.degree() {
            return Err(Error::Serialization(format!(
                "expected {} coefficients, got {}",
                ctx.degree(),
                digits.len()
            )));
        }
        let leaves = digits
            .iter()
            .map(|r| {
                let d = r.0.denom();
                let mut dd = d.clone();
                while (&dd % &ctx.pbig).is_zero() {
                    dd /= &ctx.pbig;
                }
                if !dd.is_one() {
                    return Err(Error::Serialization(format!(
                        "coefficient {} has a denominator prime to p",
                        r.0
                    )));
                }
                Leaf::from_rational(&r.0, &ctx.pbig, 0)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::raw(ctx, leaves, prec))
    }

    /// The generator `t_k` of the `k`-th adjunction (1-based).
    pub fn generator(ctx: &Ctx, k: usize) -> Self {
        assert!(k >= 1 && k <= ctx.depth(), "no generator t_{k}");
        let mut x = Self::zero(ctx);
        x.leaves[ctx.dims[k - 1]] = Leaf { unit: BigInt::one(), shift: 0 };
        x
    }

    pub fn ctx(&self) -> &Ctx {
        &self.ctx
    }

    pub(crate) fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    pub fn p(&self) -> u64 {
        self.ctx.p
    }

    pub fn is_exact(&self) -> bool {
        self.prec.is_none()
    }

    /// Certified absolute precision, `None` if exact.
    pub fn precision(&self) -> Option<BigRational> {
        self.prec.map(|n| BigRational::new(n.into(), self.ctx.e.into()))
    }

    pub(crate) fn prec_scaled(&self) -> Option<i64> {
        self.prec
    }

    pub(crate) fn valuation_scaled(&self) -> Option<i64> {
        let e = self.ctx.e;
        self.leaves
            .iter()
            .zip(&self.ctx.offsets)
            .filter(|(l, _)| !l.is_zero())
            .map(|(l, o)| e * l.shift + o)
            .min()
    }

    /// Exact valuation; the representative is truncated below `prec`, so any
    /// surviving term is certified.
    pub fn valuation(&self) -> Result<BigRational> {
        self.valuation_scaled()
            .map(|v| BigRational::new(v.into(), self.ctx.e.into()))
            .ok_or(Error::IndistinguishableFromZero)
    }

    /// Indistinguishable from zero at its precision (or exactly zero).
    pub fn is_zero(&self) -> bool {
        self.leaves.iter().all(Leaf::is_zero)
    }

    /// Valuation if known, otherwise the precision (a lower bound). `None` for exact zero.
    pub(crate) fn val_lower_scaled(&self) -> Option<i64> {
        self.valuation_scaled().or(self.prec)
    }

    /// Lower bound on the valuation: exact valuation, or the precision for an
    /// element indistinguishable from zero. `None` only for exact zero.
    pub fn valuation_lower_bound(&self) -> Option<BigRational> {
        self.val_lower_scaled().map(|v| BigRational::new(v.into(), self.ctx.e.into()))
    }

    fn truncate_to(&mut self, n: i64) {
        let e = self.ctx.e;
        let p = self.ctx.pbig.clone();
        for (l, o) in self.leaves.iter_mut().zip(&self.ctx.offsets) {
            l.truncate_below(&p, ceil_div(n - o, e));
        }
    }

    /// Lower the precision to `min(prec, n)` (scaled units).
    pub(crate) fn with_prec_scaled(&self, n: i64) -> Self {
        let prec = min_opt(self.prec, Some(n));
        Self::raw(&self.ctx, self.leaves.clone(), prec)
    }

    /// Lower the precision to `min(prec, n)`.
    pub fn with_precision(&self, n: &BigRational) -> Self {
        let scaled = n * BigRational::from_integer(self.ctx.e.into());
        self.with_prec_scaled(scaled.floor().to_integer().try_into().unwrap_or(i64::MAX))
    }

    fn check_ctx(&self, other: &Self) -> Result<()> {
        if self.ctx.same_field(&other.ctx) {
            Ok(())
        } else {
            Err(Error::ContextMismatch)
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_ctx(other)?;
        let leaves = add_vec(&self.ctx.pbig, &self.leaves, &other.leaves);
        Ok(Self::raw(&self.ctx, leaves, min_opt(self.prec, other.prec)))
    }

    pub fn neg(&self) -> Self {
        PadicElement {
            ctx: self.ctx.clone(),
            leaves: self.leaves.iter().map(Leaf::neg).collect(),
            prec: self.prec,
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_ctx(other)?;
        let prec = match (self.prec, other.prec) {
            (None, None) => None,
            (px, py) => {
                let (vx, vy) = (self.val_lower_scaled(), other.val_lower_scaled());
                // A term `prec + v` with the other operand exactly zero is unbounded.
                let a = px.and_then(|px| vy.map(|vy| px + vy));
                let b = py.and_then(|py| vx.map(|vx| py + vx));
                match (a, b) {
                    (None, None) => return Ok(Self::zero(&self.ctx)),
                    (a, b) => min_opt(a, b),
                }
            }
        };
        let leaves = mul_level(&self.ctx, self.ctx.depth(), &self.leaves, &other.leaves);
        Ok(Self::raw(&self.ctx, leaves, prec))
    }

    pub fn square(&self) -> Result<Self> {
        self.mul(self)
    }

    pub fn pow(&self, k: u32) -> Result<Self> {
        let mut result = Self::one(&self.ctx);
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                result = result.mul(&base)?;
            }
            k >>= 1;
            if k > 0 {
                base = base.square()?;
            }
        }
        Ok(result)
    }

    /// Multiply by `p^k` exactly.
    pub fn mul_p_power(&self, k: i64) -> Self {
        PadicElement {
            ctx: self.ctx.clone(),
            leaves: self
                .leaves
                .iter()
                .map(|l| if l.is_zero() { l.clone() } else { Leaf { unit: l.unit.clone(), shift: l.shift + k } })
                .collect(),
            prec: self.prec.map(|n| n + k * self.ctx.e),
        }
    }

    /// `±p^k` if the element is exactly of that form.
    fn as_signed_p_power(&self) -> Option<(bool, i64)> {
        if self.prec.is_some() || self.leaves[1..].iter().any(|l| !l.is_zero()) {
            return None;
        }
        let l = &self.leaves[0];
        (l.unit.abs().is_one()).then(|| (l.unit.sign() == Sign::Minus, l.shift))
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        self.check_ctx(other)?;
        let vy = other.valuation_scaled().ok_or(Error::DivisionByIndistinguishableZero)?;
        if let Some((neg, k)) = other.as_signed_p_power() {
            let q = self.mul_p_power(-k);
            return Ok(if neg { q.neg() } else { q });
        }
        let vx = match self.val_lower_scaled() {
            None => return Ok(Self::zero(&self.ctx)),
            Some(v) => v,
        };
        let target = match (self.prec, other.prec) {
            (None, None) => vx - vy + self.ctx.wp_scaled(),
            (Some(px), None) => px - vy,
            (px, Some(py)) => min_opt(px.map(|px| px - vy), Some(py + vx - 2 * vy)).unwrap(),
        };
        if self.is_zero() {
            return Ok(Self::zero(&self.ctx).with_prec_scaled(target));
        }
        let inv = other.inverse_rep(target - vx)?;
        let mut q = PadicElement { ctx: self.ctx.clone(), leaves: self.leaves.clone(), prec: None }
            .mul(&inv)?;
        q.prec = Some(target);
        q.truncate_to(target);
        Ok(q)
    }

    pub fn inverse(&self) -> Result<Self> {
        Self::one(&self.ctx).div(self)
    }

    /// Inverse to absolute precision `n` (scaled), ignoring `self.prec`.
    pub(crate) fn inverse_to(&self, n: i64) -> Result<Self> {
        let mut inv = self.inverse_rep(n)?;
        inv.prec = Some(n);
        inv.truncate_to(n);
        Ok(inv)
    }

    /// Exact representative `g` of `1/x` (taking `x`'s representative as exact)
    /// with `v(g - 1/x) >= n`.
    fn inverse_rep(&self, n: i64) -> Result<Self> {
        let ctx = &self.ctx;
        let vx = self.valuation_scaled().ok_or(Error::DivisionByIndistinguishableZero)?;
        let exact = PadicElement { ctx: ctx.clone(), leaves: self.leaves.clone(), prec: None };
        if self.leaves[1..].iter().all(Leaf::is_zero) {
            let l = &self.leaves[0];
            let digits = ceil_div(n, ctx.e) + l.shift;
            let mut out = Self::zero(ctx);
            if digits > 0 {
                let m = p_pow(&ctx.pbig, digits as u64);
                let inv = mod_inverse(&l.unit, &m).expect("unit is prime to p");
                out.leaves[0] = Leaf::new(&ctx.pbig, inv, -l.shift);
            }
            return Ok(out);
        }
        if n <= -vx {
            return Ok(Self::zero(ctx));
        }
        let lead = lead_inverse(ctx, ctx.depth(), &self.leaves);
        let mut g = PadicElement { ctx: ctx.clone(), leaves: lead, prec: None };
        let one = Self::one(ctx);
        // v(g - 1/x) = v(1 - xg) - v(x); Newton squares 1 - xg.
        for _ in 0..128 {
            let r = one.sub(&exact.mul(&g)?)?;
            match r.valuation_scaled() {
                None => return Ok(g),
                Some(vr) if vr - vx >= n => return Ok(g),
                _ => {}
            }
            g = g.mul(&one.add(&r)?)?;
            g.truncate_to(n);
        }
        Err(Error::PrecisionExhausted("inverse iteration did not converge".into()))
    }

    /// Image in an extension of this element's context.
    pub fn embed(&self, target: &Ctx) -> Result<Self> {
        if !target.extends(&self.ctx) {
            return Err(Error::ContextMismatch);
        }
        let mut leaves = self.leaves.clone();
        leaves.resize(target.degree(), Leaf::zero());
        let factor = target.e / self.ctx.e;
        Ok(PadicElement { ctx: target.clone(), leaves, prec: self.prec.map(|n| n * factor) })
    }

    /// Inverse of `embed`, if the element lies in the subfield `base`.
    pub fn project(&self, base: &Ctx) -> Result<Self> {
        if !self.ctx.extends(base) {
            return Err(Error::ContextMismatch);
        }
        let n = base.degree();
        if self.leaves[n..].iter().any(|l| !l.is_zero()) {
            return Err(Error::ContextMismatch);
        }
        let factor = self.ctx.e / base.e;
        Ok(PadicElement {
            ctx: base.clone(),
            leaves: self.leaves[..n].to_vec(),
            prec: self.prec.map(|n| Integer::div_floor(&n, &factor)),
        })
    }

    /// Exact rational representative of an element of `ℚ_p` (degree-one part).
    pub fn to_rational(&self) -> Option<BigRational> {
        if self.leaves[1..].iter().any(|l| !l.is_zero()) {
            return None;
        }
        Some(self.leaves[0].to_rational(self.ctx.p))
    }

    /// Coefficients over the monomial basis, as exact rationals.
    pub fn coefficients(&self) -> Vec<BigRational> {
        self.leaves.iter().map(|l| l.to_rational(self.ctx.p)).collect()
    }

    /// Same element with a different context of the same field (e.g. another working precision).
    pub fn in_context(&self, ctx: &Ctx) -> Result<Self> {
        if !ctx.same_field(&self.ctx) {
            return Err(Error::ContextMismatch);
        }
        Ok(PadicElement { ctx: ctx.clone(), leaves: self.leaves.clone(), prec: self.prec })
    }
}

impl PadicElement {
    /// The representative truncated below `n` (scaled), then declared exact.
    /// Used for iterates whose accuracy is certified afterwards.
    pub(crate) fn exact_truncated(&self, n: i64) -> Self {
        let mut x = PadicElement { ctx: self.ctx.clone(), leaves: self.leaves.clone(), prec: None };
        x.truncate_to(n);
        x
    }

    /// Exact basis monomial times a power of `p` with valuation `v` (scaled).
    pub(crate) fn monomial_with_valuation(ctx: &Ctx, v: i64) -> Self {
        let e = ctx.e;
        let idx = ctx
            .offsets
            .iter()
            .position(|&o| (v - o).rem_euclid(e) == 0)
            .expect("offsets cover every residue class");
        let mut x = Self::zero(ctx);
        x.leaves[idx] = Leaf { unit: BigInt::one(), shift: (v - ctx.offsets[idx]) / e };
        x
    }

    /// Residue class in `F_p` of a unit (valuation zero).
    pub(crate) fn unit_residue(&self) -> Option<u64> {
        if self.valuation_scaled() != Some(0) {
            return None;
        }
        let l = &self.leaves[0];
        let r = l.unit.mod_floor(&self.ctx.pbig);
        u64::try_from(r).ok()
    }
}

/// Approximate inverse of the leading monomial of a level-`lvl` element.
fn lead_inverse(ctx: &FieldContext, lvl: usize, x: &[Leaf]) -> Vec<Leaf> {
    let p = &ctx.pbig;
    let n = ctx.dims[lvl];
    // Lower-level offsets are already expressed in top-level units.
    let (idx, lead) = x
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.is_zero())
        .min_by_key(|(i, l)| ctx.e * l.shift + ctx.offsets[*i])
        .expect("nonzero element");
    let unit_inv = mod_inverse(&lead.unit, p).expect("unit is prime to p");
    let mut acc = vec![Leaf::zero(); n];
    acc[0] = Leaf::new(p, unit_inv, -lead.shift);
    let exps = ctx.exponents(idx);
    for k in 1..=lvl {
        let i = exps[k - 1];
        if i == 0 {
            continue;
        }
        let d = ctx.levels[k - 1].d;
        let mut mono = vec![Leaf::zero(); n];
        mono[(d - i) as usize * ctx.dims[k - 1]] = Leaf { unit: BigInt::one(), shift: 0 };
        let mut a_inv = lead_inverse(ctx, k - 1, &ctx.levels[k - 1].a);
        a_inv.resize(n, Leaf::zero());
        acc = mul_level(ctx, lvl, &acc, &mono);
        acc = mul_level(ctx, lvl, &acc, &a_inv);
    }
    acc
}

impl PartialEq for PadicElement {
    /// Same field, same certified precision, same representative.
    fn eq(&self, other: &Self) -> bool {
        self.ctx.same_field(&other.ctx) && self.prec == other.prec && self.leaves == other.leaves
    }
}

impl Eq for PadicElement {}

impl fmt::Debug for PadicElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for PadicElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for (i, l) in self.leaves.iter().enumerate() {
            if l.is_zero() {
                continue;
            }
            let c = l.to_rational(self.ctx.p);
            let mono: Vec<String> = self
                .ctx
                .exponents(i)
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(k, &e)| if e == 1 { format!("t{}", k + 1) } else { format!("t{}^{e}", k + 1) })
                .collect();
            if mono.is_empty() {
                terms.push(format!("{c}"));
            } else {
                terms.push(format!("({c})*{}", mono.join("*")));
            }
        }
        if terms.is_empty() {
            terms.push("0".into());
        }
        match self.precision() {
            Some(n) => write!(f, "{} + O(p^{n})", terms.join(" + ")),
            None => f.write_str(&terms.join(" + ")),
        }
    }
}

/// Basic arithmetic operations, for callers that select the operation at runtime.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

pub fn field_arith(x: &PadicElement, y: &PadicElement, op: Op) -> Result<PadicElement> {
    match op {
        Op::Add => x.add(y),
        Op::Sub => x.sub(y),
        Op::Mul => x.mul(y),
        Op::Div => x.div(y),
    }
}

fn to_scaled(ctx: &FieldContext, v: &BigRational) -> Result<i64> {
    let s = v * BigRational::from_integer(ctx.e.into());
    if !s.is_integer() {
        return Err(Error::ValueGroupMismatch(format!("{v} (e = {})", ctx.e)));
    }
    i64::try_from(s.to_integer()).map_err(|_| Error::ValueGroupMismatch(v.to_string()))
}

/// Exact element of valuation `v` with random digits spanning `v .. v + working precision`.
pub fn random_with_valuation_rng<R: Rng + ?Sized>(
    ctx: &Ctx,
    v: &BigRational,
    rng: &mut R,
) -> Result<PadicElement> {
    let vs = to_scaled(ctx, v)?;
    let e = ctx.e;
    let top = vs + ctx.wp_scaled();
    let p = &ctx.pbig;
    let mut x = PadicElement::zero(ctx);
    for (idx, &o) in ctx.offsets.iter().enumerate() {
        let lowest = if (vs - o).rem_euclid(e) == 0 {
            (vs - o) / e
        } else {
            // Strictly above v.
            Integer::div_floor(&(vs - o), &e) + 1
        };
        let digits = ceil_div(top - o, e) - lowest;
        if digits <= 0 {
            continue;
        }
        let mut unit = BigInt::zero();
        for _ in 0..digits {
            unit = unit * p + BigInt::from(rng.gen_range(0..ctx.p));
        }
        if (vs - o).rem_euclid(e) == 0 {
            // Leading digit: force a unit.
            let low = BigInt::from(rng.gen_range(1..ctx.p));
            unit = unit * p + low;
            if rng.gen_bool(0.5) {
                unit = -unit;
            }
        }
        x.leaves[idx] = Leaf::new(p, unit, lowest);
    }
    Ok(x)
}

pub fn random_with_valuation(ctx: &Ctx, v: &BigRational, seed: u64) -> Result<PadicElement> {
    random_with_valuation_rng(ctx, v, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Serialize, Deserialize)]
struct ElementRepr {
    ctx: TowerDescriptor,
    digits: Vec<RationalText>,
    #[serde(with = "serde_opt_rational")]
    prec: Option<BigRational>,
}

impl Serialize for PadicElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ElementRepr {
            ctx: self.ctx.tower_descriptor(),
            digits: self.coefficients().into_iter().map(RationalText).collect(),
            prec: self.precision(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PadicElement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = ElementRepr::deserialize(d)?;
        let ctx = r.ctx.build().map_err(D::Error::custom)?;
        let prec = r.prec.as_ref().map(|n| to_scaled(&ctx, n)).transpose().map_err(D::Error::custom)?;
        PadicElement::from_leaf_rationals(&ctx, &r.digits, prec).map_err(D::Error::custom)
    }
}

impl PadicElement {
    /// Context handle shared with other elements; cheap to clone.
    pub fn ctx_arc(&self) -> Ctx {
        Arc::clone(&self.ctx)
    }
}
