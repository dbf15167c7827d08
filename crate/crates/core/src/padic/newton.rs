use num_rational::BigRational;

use super::context::Ctx;
use super::element::PadicElement;
use crate::error::{Error, Result};
use crate::rational::ceil_i64;

/// A map that can be evaluated together with its derivative.
pub trait AnalyticFn {
    fn eval(&self, x: &PadicElement) -> Result<PadicElement>;
    fn deriv(&self, x: &PadicElement) -> Result<PadicElement>;
}

/// Dense polynomial, coefficients from the constant term upward.
#[derive(Clone, Debug)]
pub struct Polynomial {
    pub coeffs: Vec<PadicElement>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<PadicElement>) -> Self {
        assert!(!coeffs.is_empty(), "polynomial needs a coefficient");
        Polynomial { coeffs }
    }

    pub fn from_i64(ctx: &Ctx, coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| PadicElement::from_i64(ctx, c)).collect())
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }
}

impl AnalyticFn for Polynomial {
    fn eval(&self, x: &PadicElement) -> Result<PadicElement> {
        let mut acc = self.coeffs.last().unwrap().clone();
        for c in self.coeffs.iter().rev().skip(1) {
            acc = acc.mul(x)?.add(c)?;
        }
        Ok(acc)
    }

    fn deriv(&self, x: &PadicElement) -> Result<PadicElement> {
        let ctx = x.ctx();
        let mut acc = PadicElement::zero(ctx);
        for (k, c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc.mul(x)?.add(&c.mul(&PadicElement::from_i64(ctx, k as i64))?)?;
        }
        Ok(acc)
    }
}

const MAX_STEPS: usize = 96;

/// Newton iteration from `x0` under the Hensel condition `v(F(x0)) > 2 v(F'(x0))`.
///
/// Returns `x*` with `v(F(x*)) >= target`. The returned precision is capped by
/// `v(F(x*)) - v(F'(x*))`, the distance to the true root guaranteed by Hensel.
pub fn newton_solve<F: AnalyticFn + ?Sized>(
    f: &F,
    x0: &PadicElement,
    target: &BigRational,
) -> Result<PadicElement> {
    let e = x0.ctx().ramification();
    let target_s = ceil_i64(&(target * BigRational::from_integer(e.into())))
        .ok_or_else(|| Error::InvalidConfig(format!("target precision {target} out of range")))?;
    let wp = x0.ctx().wp_scaled();
    let mut x = x0.clone();
    let mut fx = f.eval(&x)?;
    let mut dfx = f.deriv(&x)?;
    let vd = dfx.valuation_scaled().ok_or_else(|| hensel_failure(&fx, &dfx))?;
    match fx.val_lower_scaled() {
        None => return Ok(x),
        Some(vf) if vf > 2 * vd => {}
        Some(_) => return Err(hensel_failure(&fx, &dfx)),
    }
    let mut last_vf = i64::MIN;
    for _ in 0..MAX_STEPS {
        let vd = dfx.valuation_scaled().ok_or(Error::PrecisionExhausted(
            "derivative became indistinguishable from zero".into(),
        ))?;
        let vf = match fx.val_lower_scaled() {
            None => return Ok(x),
            Some(v) => v,
        };
        if vf >= target_s {
            return Ok(x.with_prec_scaled((vf - vd).min(wp)));
        }
        if fx.is_zero() || vf <= last_vf {
            return Err(Error::PrecisionExhausted(format!(
                "residual certified only to valuation {vf}/{e}, target {target}"
            )));
        }
        last_vf = vf;
        // Iterates are guesses; only the final residual is certified.
        x = x.sub(&fx.div(&dfx)?)?.exact_truncated(wp);
        fx = f.eval(&x)?;
        dfx = f.deriv(&x)?;
    }
    Err(Error::PrecisionExhausted(format!("no convergence in {MAX_STEPS} steps")))
}

fn hensel_failure(fx: &PadicElement, dfx: &PadicElement) -> Error {
    let show = |x: &PadicElement| match x.valuation() {
        Ok(v) => crate::rational::format_rational(&v),
        Err(_) => match x.valuation_lower_bound() {
            Some(b) => format!(">={}", crate::rational::format_rational(&b)),
            None => "inf".into(),
        },
    };
    Error::HenselConditionFailed { value_valuation: show(fx), derivative_valuation: show(dfx) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::FieldContext;
    use crate::rational::int;

    #[test]
    fn sqrt_17_in_q2() {
        let q2 = FieldContext::qp(2, 80).unwrap();
        let f = Polynomial::from_i64(&q2, &[-17, 0, 1]);
        let x0 = PadicElement::one(&q2);
        let x = newton_solve(&f, &x0, &int(60)).unwrap();
        let r = f.eval(&x).unwrap();
        assert!(r.valuation_lower_bound().unwrap() >= int(60));
        assert!(x.sub(&x0).unwrap().valuation().unwrap() >= int(3));
        let sq = x.mul(&x).unwrap().sub(&PadicElement::from_i64(&q2, 17)).unwrap();
        assert!(sq.valuation_lower_bound().unwrap() >= int(60));
    }

    #[test]
    fn linear_is_one_step() {
        let q3 = FieldContext::qp_default(3).unwrap();
        let f = Polynomial::from_i64(&q3, &[-7, 1]);
        let x = newton_solve(&f, &PadicElement::one(&q3), &int(40)).unwrap();
        assert_eq!(x, PadicElement::from_i64(&q3, 7));
    }

    #[test]
    fn sqrt_2_fails_hensel() {
        let q2 = FieldContext::qp_default(2).unwrap();
        let f = Polynomial::from_i64(&q2, &[-2, 0, 1]);
        let err = newton_solve(&f, &PadicElement::one(&q2), &int(20)).unwrap_err();
        assert_eq!(
            err,
            Error::HenselConditionFailed {
                value_valuation: "0/1".into(),
                derivative_valuation: "1/1".into()
            }
        );
    }

    #[test]
    fn exhausted_when_target_beyond_working_precision() {
        let q2 = FieldContext::qp(2, 30).unwrap();
        let f = Polynomial::from_i64(&q2, &[-17, 0, 1]);
        let x0 = PadicElement::one(&q2);
        assert!(matches!(newton_solve(&f, &x0, &int(200)), Err(Error::PrecisionExhausted(_))));
    }
}
