//! Exact p-adic arithmetic: a totally ramified extension, valuations with
//! fractional values, and Hensel-certified Newton on a polynomial.

use num_rational::BigRational;
use padic_wander::padic::{adjoin_radical, newton_solve, AnalyticFn, FieldContext, PadicElement, Polynomial};

fn main() -> padic_wander::error::Result<()> {
    let q2 = FieldContext::qp(2, 64)?;
    // √2 generates a ramified quadratic extension.
    let (k, pi) = adjoin_radical(&q2, &PadicElement::from_i64(&q2, 2), 2)?;
    println!("K = Q_2(√2): e = {}, v(π) = {}", k.ramification(), pi.valuation()?);
    let x = pi.add(&PadicElement::one(&k))?;
    println!("v(1 + π) = {}, v((1 + π)^2 - 1) = {}", x.valuation()?, x.square()?.sub(&PadicElement::one(&k))?.valuation()?);

    // x^2 + 7 has a root in Z_2; start at 1 where v(F) = 3 > 2 v(F') = 2.
    let f = Polynomial::from_i64(&q2, &[7, 0, 1]);
    let root = newton_solve(&f, &PadicElement::one(&q2), &BigRational::from_integer(60.into()))?;
    println!("root of x^2 + 7: {root}");
    let lb = |x: PadicElement| x.valuation_lower_bound().map_or("inf".into(), |v| v.to_string());
    println!("v(F(root)) >= {}", lb(f.eval(&root)?));

    let q5 = FieldContext::qp(5, 40)?;
    let g = Polynomial::from_i64(&q5, &[-2, 0, 0, 1]);
    let r = newton_solve(&g, &PadicElement::from_i64(&q5, 3), &BigRational::from_integer(30.into()))?;
    println!("cube root of 2 in Z_5: {r}  (v(r^3 - 2) >= {})", lb(g.eval(&r)?));
    Ok(())
}
