use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use super::element::{Leaf, PadicElement};
use crate::error::{Error, Result};
use crate::rational::{ceil_i64, gcd_i64, serde_rational};
use crate::skeleton::is_prime;

/// Largest total ramification index a tower may reach.
pub const DEGREE_CAP: u64 = 64;

/// Working precision of `ℚ_p` contexts built with [`FieldContext::qp_default`].
pub const DEFAULT_WORKING_PRECISION: i64 = 64;

/// One adjunction `t^d = a`, with `a` stored exactly over the previous level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Level {
    pub d: u64,
    pub a: Vec<Leaf>,
}

/// `ℚ_p(t_1, …, t_L)` with `t_i^{d_i} = a_i`, each step totally ramified.
///
/// Elements are vectors of `ℚ_p` coefficients over the monomials
/// `t_1^{i_1} ⋯ t_L^{i_L}`, `0 <= i_k < d_k`, indexed in mixed radix with `i_1`
/// least significant. Valuations and precisions are integers in units of `1/e`.
#[derive(Debug)]
pub struct FieldContext {
    pub(crate) p: u64,
    pub(crate) pbig: BigInt,
    pub(crate) levels: Vec<Level>,
    pub(crate) e: i64,
    /// `dims[k] = d_1 ⋯ d_k`.
    pub(crate) dims: Vec<usize>,
    /// Valuation of each basis monomial, in units of `1/e`.
    pub(crate) offsets: Vec<i64>,
    /// `v(t_k)` in units of `1/e`.
    pub(crate) gen_vals: Vec<i64>,
    pub(crate) working_precision: i64,
}

pub type Ctx = Arc<FieldContext>;

impl FieldContext {
    /// `ℚ_p` with absolute working precision `wp` (in units of `v(p) = 1`).
    pub fn qp(p: u64, wp: i64) -> Result<Ctx> {
        if !is_prime(p) {
            return Err(Error::InvalidConfig(format!("{p} is not prime")));
        }
        if wp <= 0 {
            return Err(Error::InvalidConfig("working precision must be positive".into()));
        }
        Ok(Arc::new(FieldContext {
            p,
            pbig: BigInt::from(p),
            levels: Vec::new(),
            e: 1,
            dims: vec![1],
            offsets: vec![0],
            gen_vals: Vec::new(),
            working_precision: wp,
        }))
    }

    pub fn qp_default(p: u64) -> Result<Ctx> {
        Self::qp(p, DEFAULT_WORKING_PRECISION)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// Ramification index; the value group is `(1/e) ℤ`.
    pub fn ramification(&self) -> i64 {
        self.e
    }

    pub fn degree(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn working_precision(&self) -> BigRational {
        BigRational::new(self.working_precision.into(), self.e.into())
    }

    pub(crate) fn wp_scaled(&self) -> i64 {
        self.working_precision
    }

    /// Same field (tower) regardless of working precision.
    pub fn same_field(&self, other: &FieldContext) -> bool {
        std::ptr::eq(self, other) || (self.p == other.p && self.levels == other.levels)
    }

    /// True if `self` is obtained from `base` by appending adjunctions.
    pub fn extends(&self, base: &FieldContext) -> bool {
        self.p == base.p
            && self.levels.len() >= base.levels.len()
            && self.levels[..base.levels.len()] == base.levels[..]
    }

    /// Copy with a different working precision (same field).
    pub fn with_working_precision(&self, wp: &BigRational) -> Result<Ctx> {
        let scaled = ceil_i64(&(wp * BigRational::from_integer(self.e.into())))
            .filter(|&s| s > 0)
            .ok_or_else(|| Error::InvalidConfig(format!("bad working precision {wp}")))?;
        Ok(Arc::new(FieldContext {
            p: self.p,
            pbig: self.pbig.clone(),
            levels: self.levels.clone(),
            e: self.e,
            dims: self.dims.clone(),
            offsets: self.offsets.clone(),
            gen_vals: self.gen_vals.clone(),
            working_precision: scaled,
        }))
    }

    /// Exponents `(i_1, …, i_L)` of basis index `idx`.
    pub(crate) fn exponents(&self, mut idx: usize) -> Vec<u64> {
        self.levels
            .iter()
            .map(|l| {
                let i = idx as u64 % l.d;
                idx /= l.d as usize;
                i
            })
            .collect()
    }

    pub(crate) fn tower_descriptor(&self) -> TowerDescriptor {
        TowerDescriptor {
            p: self.p,
            working_precision: self.working_precision(),
            tower: self
                .levels
                .iter()
                .map(|l| LevelDescriptor {
                    d: l.d,
                    a: l.a.iter().map(|x| RationalText(x.to_rational(self.p))).collect(),
                })
                .collect(),
        }
    }
}

/// Adjoin `t` with `t^d = a`. Requires `gcd(e·v(a), d) = 1`, which makes
/// `x^d - a` Eisenstein-like (totally ramified, hence irreducible).
pub fn adjoin_radical(ctx: &Ctx, a: &PadicElement, d: u64) -> Result<(Ctx, PadicElement)> {
    if !a.ctx().same_field(ctx) {
        return Err(Error::ContextMismatch);
    }
    if d == 0 {
        return Err(Error::InvalidConfig("radical degree must be positive".into()));
    }
    if d == 1 {
        return Ok((ctx.clone(), a.clone()));
    }
    let va = a.valuation_scaled().ok_or(Error::IndistinguishableFromZero)?;
    if gcd_i64(va, d as i64) != 1 {
        return Err(Error::UnsupportedExtension(format!(
            "x^{d} - a with v(a) = {va}/{} is not totally ramified",
            ctx.e
        )));
    }
    let new_e = ctx.e as u64 * d;
    if new_e > DEGREE_CAP {
        return Err(Error::DegreeCapExceeded { degree: new_e, cap: DEGREE_CAP });
    }
    let di = d as i64;
    let mut levels = ctx.levels.clone();
    levels.push(Level { d, a: a.leaves().to_vec() });
    let mut gen_vals: Vec<i64> = ctx.gen_vals.iter().map(|v| v * di).collect();
    // v(t) = v(a)/d, i.e. va in units of 1/(e d).
    gen_vals.push(va);
    let old_n = ctx.offsets.len();
    let mut offsets = Vec::with_capacity(old_n * d as usize);
    for i in 0..di {
        offsets.extend(ctx.offsets.iter().map(|o| o * di + i * va));
    }
    let mut dims = ctx.dims.clone();
    dims.push(old_n * d as usize);
    let new_ctx = Arc::new(FieldContext {
        p: ctx.p,
        pbig: ctx.pbig.clone(),
        levels,
        e: new_e as i64,
        dims,
        offsets,
        gen_vals,
        working_precision: ctx.working_precision * di,
    });
    let t = PadicElement::generator(&new_ctx, new_ctx.depth());
    Ok((new_ctx, t))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelDescriptor {
    pub d: u64,
    pub a: Vec<RationalText>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TowerDescriptor {
    pub p: u64,
    #[serde(with = "serde_rational")]
    pub working_precision: BigRational,
    pub tower: Vec<LevelDescriptor>,
}

/// An exact rational in `"num/den"` text form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RationalText(#[serde(with = "serde_rational")] pub BigRational);

impl TowerDescriptor {
    pub fn build(&self) -> Result<Ctx> {
        let mut ctx = FieldContext::qp(self.p, 1)?;
        for l in &self.tower {
            let a = PadicElement::from_leaf_rationals(&ctx, &l.a, None)?;
            ctx = adjoin_radical(&ctx, &a, l.d)?.0;
        }
        ctx.with_working_precision(&self.working_precision)
    }
}

impl From<BigRational> for RationalText {
    fn from(r: BigRational) -> Self {
        RationalText(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn sqrt_two() {
        let q2 = FieldContext::qp_default(2).unwrap();
        let two = PadicElement::from_i64(&q2, 2);
        let (k, t) = adjoin_radical(&q2, &two, 2).unwrap();
        assert_eq!(k.ramification(), 2);
        assert_eq!(t.valuation().unwrap(), rat(1, 2));
        let sq = t.mul(&t).unwrap();
        assert_eq!(sq, PadicElement::from_i64(&k, 2));
    }

    #[test]
    fn twisted_sqrt_two() {
        // u = 17 ≡ 1 mod 8.
        let q2 = FieldContext::qp_default(2).unwrap();
        let a = PadicElement::from_i64(&q2, 34);
        let (k, t) = adjoin_radical(&q2, &a, 2).unwrap();
        assert_eq!(t.valuation().unwrap(), rat(1, 2));
        assert_eq!(t.pow(2).unwrap(), PadicElement::from_i64(&k, 34));
    }

    #[test]
    fn identity_and_failures() {
        let q2 = FieldContext::qp_default(2).unwrap();
        let two = PadicElement::from_i64(&q2, 2);
        let (k, t) = adjoin_radical(&q2, &two, 1).unwrap();
        assert!(k.same_field(&q2));
        assert_eq!(t, two);
        let four = PadicElement::from_i64(&q2, 4);
        assert!(matches!(adjoin_radical(&q2, &four, 2), Err(Error::UnsupportedExtension(_))));
        let one = PadicElement::from_i64(&q2, 1);
        assert!(matches!(adjoin_radical(&q2, &one, 3), Err(Error::UnsupportedExtension(_))));
    }

    #[test]
    fn two_level_tower() {
        let q3 = FieldContext::qp_default(3).unwrap();
        let three = PadicElement::from_i64(&q3, 3);
        let (k1, t1) = adjoin_radical(&q3, &three, 3).unwrap();
        let (k2, t2) = adjoin_radical(&k1, &t1, 3).unwrap();
        assert_eq!(k2.ramification(), 9);
        assert_eq!(t2.valuation().unwrap(), rat(1, 9));
        let t1_up = t1.embed(&k2).unwrap();
        assert_eq!(t2.pow(3).unwrap(), t1_up);
        assert_eq!(t2.pow(9).unwrap(), PadicElement::from_i64(&k2, 3));
        let desc = k2.tower_descriptor();
        assert!(desc.build().unwrap().same_field(&k2));
    }

    #[test]
    fn degree_cap() {
        let q2 = FieldContext::qp_default(2).unwrap();
        let two = PadicElement::from_i64(&q2, 2);
        assert!(matches!(
            adjoin_radical(&q2, &two, 65),
            Err(Error::DegreeCapExceeded { degree: 65, cap: 64 })
        ));
    }
}
