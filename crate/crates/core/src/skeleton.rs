//! Radius dynamics on the invariant arc `]0, ∞[` in base-`p` logarithmic
//! coordinates.
//!
//! A radius `r = p^q` is stored as the exact rational `q`. The radius map
//! `φ(r) = sup{|f_c(z)| : |z| <= r}` is piecewise monomial, so in log
//! coordinates it is piecewise affine:
//!
//! ```text
//! φ(q) = 1 + p q                                   q <= q_1
//! φ(q) = 1 - (q_1 + ... + q_{j-1}) + (p + j - 1) q   q_{j-1} < q <= q_j
//! ```
//!
//! Everything here is exact; nothing is ever rounded.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rational::{format_rational, parse_rational};

/// Exact base-`p` logarithm of a radius: `r = p^value`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LogRadius(BigRational);

impl LogRadius {
    pub fn new(num: i64, den: i64) -> Self {
        LogRadius(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn integer(n: i64) -> Self {
        LogRadius(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn zero() -> Self {
        LogRadius(BigRational::zero())
    }

    pub fn from_rational(r: BigRational) -> Self {
        LogRadius(r)
    }

    pub fn value(&self) -> &BigRational {
        &self.0
    }

    pub fn into_rational(self) -> BigRational {
        self.0
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn scale(&self, k: i64) -> Self {
        LogRadius(&self.0 * BigRational::from_integer(BigInt::from(k)))
    }

    pub fn div_int(&self, k: i64) -> Self {
        LogRadius(&self.0 / BigRational::from_integer(BigInt::from(k)))
    }
}

impl fmt::Display for LogRadius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.0))
    }
}

impl FromStr for LogRadius {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_rational(s).map(LogRadius)
    }
}

impl Serialize for LogRadius {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for LogRadius {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

macro_rules! log_radius_binop {
    ($tr:ident, $m:ident) => {
        impl $tr<&LogRadius> for &LogRadius {
            type Output = LogRadius;
            fn $m(self, rhs: &LogRadius) -> LogRadius {
                LogRadius((&self.0).$m(&rhs.0))
            }
        }
        impl $tr<LogRadius> for LogRadius {
            type Output = LogRadius;
            fn $m(self, rhs: LogRadius) -> LogRadius {
                LogRadius(self.0.$m(rhs.0))
            }
        }
        impl $tr<&LogRadius> for LogRadius {
            type Output = LogRadius;
            fn $m(self, rhs: &LogRadius) -> LogRadius {
                LogRadius(self.0.$m(&rhs.0))
            }
        }
    };
}

log_radius_binop!(Add, add);
log_radius_binop!(Sub, sub);

impl Mul<i64> for &LogRadius {
    type Output = LogRadius;
    fn mul(self, k: i64) -> LogRadius {
        self.scale(k)
    }
}

impl Neg for LogRadius {
    type Output = LogRadius;
    fn neg(self) -> LogRadius {
        LogRadius(-self.0)
    }
}

impl Neg for &LogRadius {
    type Output = LogRadius;
    fn neg(self) -> LogRadius {
        LogRadius(-&self.0)
    }
}

pub(crate) fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// A prime together with strictly increasing log-radii `q_1 < ... < q_J`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRadiiConfig")]
pub struct RadiiConfig {
    pub p: u64,
    pub qs: Vec<LogRadius>,
    /// Depth to which `check_generic` has been run successfully; 0 if never.
    pub generic_depth: u32,
}

#[derive(Deserialize)]
struct RawRadiiConfig {
    p: u64,
    qs: Vec<LogRadius>,
    #[serde(default)]
    generic_depth: u32,
}

impl TryFrom<RawRadiiConfig> for RadiiConfig {
    type Error = Error;
    fn try_from(raw: RawRadiiConfig) -> Result<Self> {
        let mut cfg = RadiiConfig::new(raw.p, raw.qs)?;
        cfg.generic_depth = raw.generic_depth;
        Ok(cfg)
    }
}

impl RadiiConfig {
    pub fn new(p: u64, qs: Vec<LogRadius>) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::InvalidConfig(format!("{p} is not prime")));
        }
        if qs.is_empty() {
            return Err(Error::InvalidConfig("at least one radius is required".into()));
        }
        if qs[0] <= LogRadius::integer(1) {
            return Err(Error::InvalidConfig(format!(
                "q_1 = {} must exceed 1 (R_1 > p)",
                qs[0]
            )));
        }
        if qs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("log-radii must be strictly increasing".into()));
        }
        Ok(RadiiConfig { p, qs, generic_depth: 0 })
    }

    pub fn from_integers(p: u64, qs: &[i64]) -> Result<Self> {
        Self::new(p, qs.iter().map(|&q| LogRadius::integer(q)).collect())
    }

    /// Number of configured radii `J`.
    pub fn horizon(&self) -> usize {
        self.qs.len()
    }

    /// `q_j`, 1-based.
    pub fn q(&self, j: usize) -> &LogRadius {
        &self.qs[j - 1]
    }

    pub fn last(&self) -> &LogRadius {
        self.qs.last().expect("non-empty by construction")
    }

    pub fn p_i64(&self) -> i64 {
        self.p as i64
    }

    /// Log-radius of the stand-in `R_{J+1}` used for tail bounds:
    /// `q_J + (q_J - q_{J-1})`, or `q_1 + 1` when `J = 1`.
    pub fn tail_surrogate(&self) -> LogRadius {
        let j = self.horizon();
        if j == 1 {
            self.q(1) + &LogRadius::integer(1)
        } else {
            self.q(j) + &(self.q(j) - self.q(j - 1))
        }
    }
}

/// `log_p ρ = -1/(p-1)`, the unique fixed point of `φ`.
pub fn varrho_log(p: u64) -> LogRadius {
    assert!(p >= 2, "p must be at least 2");
    LogRadius::new(-1, p as i64 - 1)
}

/// Region index (1-based) of `q` among `qs`: the `j` with `q_{j-1} < q <= q_j`.
/// Values above every `q_i` land in region `qs.len() + 1`.
fn region(qs: &[LogRadius], q: &LogRadius) -> usize {
    qs.iter().position(|qi| q <= qi).map_or(qs.len() + 1, |i| i + 1)
}

/// Region-`j` affine formula; only `q_1 .. q_{j-1}` are read.
fn phi_formula(p: u64, qs: &[LogRadius], j: usize, q: &LogRadius) -> LogRadius {
    let mut offset = LogRadius::integer(1);
    for qi in &qs[..j - 1] {
        offset = offset - qi;
    }
    offset + q * (p as i64 + j as i64 - 1)
}

/// `φ` on a possibly partial configuration, extending the last region's
/// successor formula above `q_J`. Used by greedy radius selection, where the
/// next radius is not yet known.
fn phi_extended(p: u64, qs: &[LogRadius], q: &LogRadius) -> LogRadius {
    phi_formula(p, qs, region(qs, q), q)
}

pub fn phi_log(cfg: &RadiiConfig, q: &LogRadius) -> Result<LogRadius> {
    if q > cfg.last() {
        return Err(Error::OutOfConfiguredRange {
            value: q.to_string(),
            limit: cfg.last().to_string(),
        });
    }
    Ok(phi_extended(cfg.p, &cfg.qs, q))
}

pub fn phi_inv_log(cfg: &RadiiConfig, q: &LogRadius) -> Result<LogRadius> {
    let top = phi_log(cfg, cfg.last())?;
    if q > &top {
        return Err(Error::OutOfConfiguredRange {
            value: q.to_string(),
            limit: top.to_string(),
        });
    }
    // φ is increasing, so region j of the preimage is found by comparing with φ(q_j).
    let mut j = 1;
    while j < cfg.horizon() && q > &phi_formula(cfg.p, &cfg.qs, j, cfg.q(j)) {
        j += 1;
    }
    let mut shifted = q - &LogRadius::integer(1);
    for qi in &cfg.qs[..j - 1] {
        shifted = shifted + qi;
    }
    Ok(shifted.div_int(cfg.p_i64() + j as i64 - 1))
}

/// `φ^{-t}(q)`. Once the value lies in `]−∞, φ(q_1)]` all further preimages stay in
/// the first region, where `φ^{-t}(x) = ρ + (x − ρ)/p^t`.
pub fn phi_inv_iter(cfg: &RadiiConfig, q: &LogRadius, t: u64) -> Result<LogRadius> {
    let first_image = phi_log(cfg, cfg.q(1))?;
    let mut x = q.clone();
    let mut left = t;
    while left > 0 && x > first_image {
        x = phi_inv_log(cfg, &x)?;
        left -= 1;
    }
    if left == 0 {
        return Ok(x);
    }
    let rho = varrho_log(cfg.p);
    let pow = num_traits::pow(BigInt::from(cfg.p), left as usize);
    let delta = (&x - &rho).into_rational() / BigRational::from_integer(pow);
    Ok(rho + LogRadius::from_rational(delta))
}

/// Transition time `n_j`: the least `n >= 1` with `φ^{-(n+1)}(q_j) < 0`.
pub fn compute_n(cfg: &RadiiConfig, j: usize) -> Result<u64> {
    if j == 0 || j > cfg.horizon() {
        return Err(Error::HorizonExceeded(format!("stage {j} outside 1..={}", cfg.horizon())));
    }
    let mut x = phi_inv_log(cfg, cfg.q(j))?;
    let mut n = 1;
    loop {
        x = phi_inv_log(cfg, &x)?;
        if x.is_negative() {
            return Ok(n);
        }
        n += 1;
    }
}

/// `Λ_j = log|λ_j| = φ(q_j) − q_j`.
pub fn lambda_log(cfg: &RadiiConfig, j: usize) -> Result<LogRadius> {
    Ok(phi_log(cfg, cfg.q(j))? - cfg.q(j))
}

/// `σ_j = log S_j = φ^{-1}(q_j)`.
pub fn s_log(cfg: &RadiiConfig, j: usize) -> Result<LogRadius> {
    phi_inv_log(cfg, cfg.q(j))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GenericCheck {
    Ok,
    /// `φ^n(q_i) = q_j` (1-based indices).
    Violation { i: usize, n: u32, j: usize },
}

/// Checks `φ^n(q_i) != q_j` for every `i < j` and `1 <= n <= depth`. Orbits
/// increase strictly, so iteration stops as soon as a value passes `q_J`.
pub fn check_generic(cfg: &RadiiConfig, depth: u32) -> GenericCheck {
    for i in 1..=cfg.horizon() {
        let mut x = cfg.q(i).clone();
        for n in 1..=depth {
            x = match phi_log(cfg, &x) {
                Ok(v) => v,
                Err(_) => break,
            };
            if let Some(j) = cfg.qs.iter().position(|q| *q == x) {
                return GenericCheck::Violation { i, n, j: j + 1 };
            }
        }
    }
    GenericCheck::Ok
}

/// Greedy integer radii: `q_1 = 2`, then each `q_j` is the least integer
/// `>= q_{j-1} + min_gap` that is not a forward orbit value of an earlier radius.
pub fn make_generic(p: u64, count: usize, min_gap: i64) -> Result<RadiiConfig> {
    if count == 0 || min_gap < 1 {
        return Err(Error::InvalidConfig("count and min_gap must be positive".into()));
    }
    if !is_prime(p) {
        return Err(Error::InvalidConfig(format!("{p} is not prime")));
    }
    let mut qs = vec![LogRadius::integer(2)];
    while qs.len() < count {
        let mut candidate = qs.last().unwrap() + &LogRadius::integer(min_gap);
        loop {
            // Orbit values up to the candidate only use formulas of regions <= qs.len()+1,
            // which do not depend on the radius being chosen.
            let mut forbidden = BTreeSet::new();
            for qi in &qs {
                let mut x = phi_extended(p, &qs, qi);
                while x <= candidate {
                    forbidden.insert(x.clone());
                    x = phi_extended(p, &qs, &x);
                }
            }
            if !forbidden.contains(&candidate) {
                break;
            }
            candidate = candidate + LogRadius::integer(1);
        }
        qs.push(candidate);
    }
    let mut cfg = RadiiConfig::new(p, qs)?;
    const CERTIFIED_DEPTH: u32 = 50;
    debug_assert_eq!(check_generic(&cfg, CERTIFIED_DEPTH), GenericCheck::Ok);
    cfg.generic_depth = CERTIFIED_DEPTH;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn running() -> RadiiConfig {
        RadiiConfig::from_integers(2, &[2, 4, 7, 12]).unwrap()
    }

    fn lr(n: i64, d: i64) -> LogRadius {
        LogRadius::new(n, d)
    }

    #[test]
    fn varrho_values() {
        assert_eq!(varrho_log(2), lr(-1, 1));
        assert_eq!(varrho_log(3), lr(-1, 2));
        assert_eq!(varrho_log(5), lr(-1, 4));
    }

    #[test]
    fn phi_examples() {
        let cfg = running();
        assert_eq!(phi_log(&cfg, &lr(-1, 1)).unwrap(), lr(-1, 1));
        assert_eq!(phi_log(&cfg, &lr(2, 1)).unwrap(), lr(5, 1));
        assert_eq!(phi_log(&cfg, &lr(4, 1)).unwrap(), lr(11, 1));
        assert!(matches!(
            phi_log(&cfg, &lr(13, 1)),
            Err(Error::OutOfConfiguredRange { .. })
        ));
    }

    #[test]
    fn phi_inv_examples() {
        let cfg = running();
        assert_eq!(phi_inv_log(&cfg, &lr(2, 1)).unwrap(), lr(1, 2));
        assert_eq!(phi_inv_log(&cfg, &lr(11, 1)).unwrap(), lr(4, 1));
        assert_eq!(phi_inv_log(&cfg, &lr(-1, 1)).unwrap(), lr(-1, 1));
        let top = phi_log(&cfg, &lr(12, 1)).unwrap();
        assert!(phi_inv_log(&cfg, &(top + lr(1, 1))).is_err());
    }

    #[test]
    fn transition_times() {
        let cfg = running();
        assert_eq!(compute_n(&cfg, 1).unwrap(), 1);
        assert_eq!(compute_n(&cfg, 2).unwrap(), 2);
        assert_eq!(compute_n(&cfg, 3).unwrap(), 2);
    }

    #[test]
    fn multipliers_and_preimages() {
        let cfg = running();
        assert_eq!(lambda_log(&cfg, 1).unwrap(), lr(3, 1));
        assert_eq!(s_log(&cfg, 1).unwrap(), lr(1, 2));
        assert_eq!(lambda_log(&cfg, 2).unwrap(), lr(7, 1));
        assert_eq!(s_log(&cfg, 2).unwrap(), lr(3, 2));
        assert_eq!(lambda_log(&cfg, 3).unwrap(), lr(16, 1));
        assert_eq!(s_log(&cfg, 3).unwrap(), lr(8, 3));
    }

    #[test]
    fn genericity() {
        assert_eq!(check_generic(&running(), 10), GenericCheck::Ok);
        let bad = RadiiConfig::from_integers(2, &[2, 4, 5]).unwrap();
        assert_eq!(check_generic(&bad, 2), GenericCheck::Violation { i: 1, n: 1, j: 3 });
        let single = RadiiConfig::from_integers(2, &[2]).unwrap();
        assert_eq!(check_generic(&single, 100), GenericCheck::Ok);
    }

    #[test]
    fn greedy_radii() {
        // 2 -> 5 and 4 -> 11 are the only orbit values below 7, so 6 is admissible.
        let cfg = make_generic(2, 3, 2).unwrap();
        assert_eq!(cfg.qs, vec![lr(2, 1), lr(4, 1), lr(6, 1)]);
        assert_eq!(make_generic(2, 1, 2).unwrap().qs, vec![lr(2, 1)]);
        // gap 3 lands on 5 = φ(2) and must skip it.
        assert_eq!(make_generic(2, 2, 3).unwrap().qs, vec![lr(2, 1), lr(6, 1)]);
        for p in [2, 3, 5] {
            for j in 1..=8 {
                let cfg = make_generic(p, j, 1).unwrap();
                assert_eq!(check_generic(&cfg, 50), GenericCheck::Ok);
            }
        }
    }

    #[test]
    fn iterated_inverse_matches_stepwise() {
        let cfg = running();
        let mut x = lr(7, 1);
        for t in 0..12u64 {
            assert_eq!(phi_inv_iter(&cfg, &lr(7, 1), t).unwrap(), x);
            x = phi_inv_log(&cfg, &x).unwrap();
        }
    }

    #[test]
    fn config_validation() {
        assert!(RadiiConfig::from_integers(4, &[2]).is_err());
        assert!(RadiiConfig::from_integers(2, &[1]).is_err());
        assert!(RadiiConfig::from_integers(2, &[3, 3]).is_err());
        assert!(RadiiConfig::from_integers(2, &[]).is_err());
    }

    #[test]
    fn json_shape() {
        let cfg = running();
        let s = serde_json::to_string(&cfg).unwrap();
        assert_eq!(s, r#"{"p":2,"qs":["2/1","4/1","7/1","12/1"],"generic_depth":0}"#);
        let back: RadiiConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cfg);
        assert!(serde_json::from_str::<RadiiConfig>(r#"{"p":2,"qs":["4","2"]}"#).is_err());
    }
}
