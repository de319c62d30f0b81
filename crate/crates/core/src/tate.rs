//! The Tate curve `y^2 + xy = x^3 + a_4(q) x + a_6(q)`: its q-expansions,
//! the uniformization `u ↦ (X(u,q), Y(u,q))`, the formal group
//! identification with Ĝ_m, and the derivative bookkeeping for `L_p(E, s)`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;

use crate::coleman::TateParameter;
use crate::error::{LabError, Result};
use crate::padic::{iwasawa_log_scalar, PadicScalar, PrimeContext};
use crate::report::Check;
use crate::series::TruncatedSeries;

/// Order of the formal-group series.
pub const TATE_ORDER: usize = 128;

/// An integer q-series `Σ_{n ≤ M} c_n q^n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QSeries {
    pub coeffs: Vec<BigInt>,
}

impl QSeries {
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Evaluates at `q` with `v(q) ≥ 1`; the truncation must reach the
    /// precision of `q`.
    pub fn eval(&self, q: &PadicScalar) -> Result<PadicScalar> {
        let v = q.valuation();
        if v < 1 && !q.is_zero() {
            return Err(LabError::invalid("q-series need v(q) ≥ 1"));
        }
        if !q.is_zero() && (self.order() as i64 + 1) * v < q.precision() {
            return Err(LabError::precision(
                "q-series truncation",
                (self.order() as i64 + 1) * v,
                q.precision(),
            ));
        }
        let ctx = PrimeContext::new(q.p(), q.precision())?;
        let mut acc = ctx.zero();
        for c in self.coeffs.iter().rev() {
            acc = &(&acc * q) + &ctx.from_bigint(c);
        }
        Ok(acc)
    }
}

/// `s_k(q) = Σ_{n≥1} σ_k(n) q^n` to order `m`.
pub fn sk_series(k: u32, m: usize) -> QSeries {
    let mut coeffs = vec![BigInt::zero(); m + 1];
    for d in 1..=m {
        let dk = BigInt::from(d).pow(k);
        for n in (d..=m).step_by(d) {
            coeffs[n] += &dk;
        }
    }
    QSeries { coeffs }
}

/// The q-series of `a_4 = -5 s_3` and `a_6 = -(5 s_3 + 7 s_5)/12`.
///
/// With `a_4 = -s_3` the point `(X(u,q), Y(u,q))` misses the curve already
/// modulo `p^2`; the factor 5 is the one that makes the uniformization work.
pub fn a_series(m: usize) -> Result<(QSeries, QSeries)> {
    let s3 = sk_series(3, m);
    let s5 = sk_series(5, m);
    let a4 = QSeries {
        coeffs: s3.coeffs.iter().map(|c| -(BigInt::from(5) * c)).collect(),
    };
    let twelve = BigInt::from(12);
    let mut a6 = Vec::with_capacity(m + 1);
    for (n, (c3, c5)) in s3.coeffs.iter().zip(&s5.coeffs).enumerate() {
        let (quot, rem) = (BigInt::from(5) * c3 + BigInt::from(7) * c5).div_rem(&twelve);
        if !rem.is_zero() {
            return Err(LabError::property(format!(
                "5σ_3({n}) + 7σ_5({n}) is not divisible by 12"
            )));
        }
        a6.push(-quot);
    }
    Ok((a4, QSeries { coeffs: a6 }))
}

fn q_terms(q: &PadicScalar, prec: i64) -> usize {
    (prec / q.valuation().max(1)) as usize + 2
}

/// `(a_4(q), a_6(q))`.
pub fn a_invariants(q: &PadicScalar) -> Result<(PadicScalar, PadicScalar)> {
    if q.is_zero() {
        return Ok((q.zero_like(), q.zero_like()));
    }
    let (a4, a6) = a_series(q_terms(q, q.precision()))?;
    Ok((a4.eval(q)?, a6.eval(q)?))
}

fn work_ctx(x: &PadicScalar, extra: i64) -> PrimeContext {
    PrimeContext::new(x.p(), x.precision() + extra).expect("valid prime")
}

/// `t / (1 - t)^2`.
fn x_term(t: &PadicScalar) -> Result<PadicScalar> {
    let one = t.exact_int_like(1);
    let d = &one - t;
    t.div(&(&d * &d))
}

/// `t^k / (1 - t)^3`.
fn y_term(t: &PadicScalar, k: u64) -> Result<PadicScalar> {
    let one = t.exact_int_like(1);
    let d = &one - t;
    t.pow(k).div(&(&(&d * &d) * &d))
}

/// `X(u, q)`, `Y(u, q)` and the Weierstrass residual
/// `Y^2 + XY - X^3 - a_4 X - a_6`.
///
/// The `n < 0` terms are rewritten with `q^m u^(-1)`:
/// `X` gains `t/(1-t)^2` and `Y` gains `-t/(1-t)^3`, `t = q^m / u`.
pub fn uniformize_point(
    u: &PadicScalar,
    q: &PadicScalar,
) -> Result<(PadicScalar, PadicScalar, PadicScalar)> {
    if q.is_zero() || q.valuation() < 1 {
        return Err(LabError::invalid("the Tate parameter needs v(q) ≥ 1"));
    }
    if u.is_zero() || u.valuation() != 0 {
        return Err(LabError::invalid(
            "u must be a unit (reduce it modulo q^Z first)",
        ));
    }
    let prec = u.precision().min(q.precision());
    let one = u.exact_int_like(1);
    if (&one - u).is_zero() {
        return Err(LabError::InvalidInput(
            "u = 1 maps to the point at infinity".to_string(),
        ));
    }
    let u_inv = u.inv()?;
    let terms = q_terms(q, prec + 4);
    let mut x = x_term(u)?;
    let mut y = y_term(u, 2)?;
    let mut qm = q.clone();
    for _ in 1..terms {
        let a = &qm * u;
        let b = &qm * &u_inv;
        x = &(&x + &x_term(&a)?) + &x_term(&b)?;
        y = &(&y + &y_term(&a, 2)?) - &y_term(&b, 1)?;
        qm = &qm * q;
    }
    let s1 = sk_series(1, terms).eval(q)?;
    let x = &x - &(&s1 + &s1);
    let y = &y + &s1;
    let (a4, a6) = a_invariants(q)?;
    let residual = weierstrass_residual(&x, &y, &a4, &a6);
    Ok((x, y, residual))
}

pub fn weierstrass_residual(
    x: &PadicScalar,
    y: &PadicScalar,
    a4: &PadicScalar,
    a6: &PadicScalar,
) -> PadicScalar {
    let lhs = &(y * y) + &(x * y);
    let rhs = &(&(&(x * x) * x) + &(a4 * x)) + a6;
    &lhs - &rhs
}

/// `X(u, q)` and `Y(u, q)` by summing the two-sided series term by term
/// without rewriting, at twice the precision of the inputs.
pub fn uniformize_direct(u: &PadicScalar, q: &PadicScalar) -> Result<(PadicScalar, PadicScalar)> {
    let prec = u.precision().min(q.precision());
    let ctx = work_ctx(u, prec);
    let u2 = u.lift_to(2 * prec);
    let q2 = q.lift_to(2 * prec);
    let q_inv = q2.inv()?;
    let terms = q_terms(q, 2 * prec + 4);
    let mut x = x_term(&u2)?;
    let mut y = y_term(&u2, 2)?;
    let (mut qp, mut qn) = (q2.clone(), q_inv.clone());
    for _ in 1..terms {
        for t in [&qp * &u2, &qn * &u2] {
            x = &x + &x_term(&t)?;
            y = &y + &y_term(&t, 2)?;
        }
        qp = &qp * &q2;
        qn = &qn * &q_inv;
    }
    let mut s1 = ctx.zero();
    let mut qn = q2.clone();
    for n in 1..terms {
        let one = ctx.one();
        s1 = &s1 + &(&qn * &ctx.int(n as i64)).div(&(&one - &qn))?;
        qn = &qn * &q2;
    }
    Ok((&x - &(&s1 + &s1), &y + &s1))
}

/// The formal group of `y^2 + xy = x^3 + a_4 x + a_6` in `z = -x/y`.
#[derive(Debug, Clone)]
pub struct CurveFormalGroup {
    /// `w = -1/y` as a series in `z`.
    pub w: TruncatedSeries,
    /// `ω / dz` for `ω = dx / (2y + x)`.
    pub omega: TruncatedSeries,
    /// `λ_E = ∫ ω`.
    pub log: TruncatedSeries,
}

/// Solves `w = z^3 + z w + a_4 z w^2 + a_6 w^3` coefficient by coefficient
/// and forms `ω = (2 + z W'/W) / (2 - z) dz`, `W = w / z^3`.
pub fn curve_formal_group(
    a4: &PadicScalar,
    a6: &PadicScalar,
    order: usize,
) -> Result<CurveFormalGroup> {
    let top = order + 3;
    let zero = a4.zero_like();
    let mut w = vec![zero.clone(); top + 1];
    let mut w2 = vec![zero.clone(); top + 1];
    let mut w3 = vec![zero.clone(); top + 1];
    for n in 3..=top {
        let mut c = if n == 3 {
            a4.exact_int_like(1)
        } else {
            zero.clone()
        };
        c = &c + &w[n - 1];
        c = &c + &(a4 * &w2[n - 1]);
        c = &c + &(a6 * &w3[n]);
        w[n] = c;
        // w^2 and w^3 at index n only involve w up to n - 3
        if n + 3 <= top {
            let mut s = zero.clone();
            for i in 3..=n {
                if n + 3 - i >= 3 {
                    s = &s + &(&w[i] * &w[n + 3 - i]);
                }
            }
            w2[n + 3] = s;
        }
        if n + 3 <= top {
            let target = n + 3;
            if target >= 9 {
                let mut s = zero.clone();
                for i in 3..=target - 6 {
                    s = &s + &(&w[i] * &w2[target - i]);
                }
                w3[target] = s;
            }
        }
    }
    let big_w = TruncatedSeries::from_coeffs(w[3..=top].to_vec());
    let zwp = {
        let d = big_w.derivative();
        let mut c = vec![zero.clone(); order + 1];
        for k in 1..=order {
            c[k] = d.coeff(k - 1).clone();
        }
        TruncatedSeries::from_coeffs(c)
    };
    let ratio = &zwp * &big_w.truncate_order(order).inverse()?;
    let mut num = ratio;
    num.set_coeff(0, num.coeff(0) + &zero.exact_int_like(2));
    let mut den = vec![zero.clone(); order + 1];
    den[0] = zero.exact_int_like(2);
    den[1] = zero.exact_int_like(-1);
    let omega = &num * &TruncatedSeries::from_coeffs(den).inverse()?;
    let log = omega.truncate_order(order - 1).integrate()?;
    Ok(CurveFormalGroup {
        w: TruncatedSeries::from_coeffs(w),
        omega,
        log,
    })
}

/// `t(X)` with `λ_E(t(X)) = log(1 + X)`, by Newton's method on the series
/// equation; only `ω`, which is integral, is ever inverted.
pub fn formal_iso(group: &CurveFormalGroup, order: usize) -> Result<TruncatedSeries> {
    let ctx_zero = group.omega.ctx_zero();
    let ctx = PrimeContext::new(ctx_zero.p(), ctx_zero.precision())?;
    let target = TruncatedSeries::log1p(&ctx, order)?;
    let mut t = TruncatedSeries::var(&ctx, 1);
    let mut cur = 1usize;
    while cur < order {
        cur = (2 * cur).min(order);
        // Newton corrects its own errors: the iterate is reused as exact.
        let tc = t.pad_to(cur).map(|c| c.lift_to(ctx.prec()));
        let f = group.log.truncate_order(cur).compose(&tc)?;
        let diff = &f - &target.truncate_order(cur);
        let d = group.omega.truncate_order(cur).compose(&tc)?;
        t = &tc - &(&diff * &d.inverse()?);
    }
    Ok(t)
}

/// Integrality of `t`, `t ≡ X mod X^2`, `λ_E(t) = log(1 + X)` and
/// `ω(t) t' = dX / (1 + X)`.
pub fn verify_formal_iso(
    q: &PadicScalar,
    order: usize,
    threshold: i64,
    tag: &str,
) -> Result<Vec<Check>> {
    const ANCHOR: &str = "tate-formal-group";
    let ctx = PrimeContext::new(q.p(), q.precision())?;
    let (a4, a6) = a_invariants(q)?;
    let group = curve_formal_group(&a4, &a6, order + 1)?;
    let t = formal_iso(&group, order)?;
    let min_v = t.min_valuation_from(0);
    let lin = t
        .coeff(1)
        .residual_valuation(&ctx.one())
        .min(t.coeff(0).residual_valuation(&ctx.zero()));
    let comp = group.log.truncate_order(order).compose(&t)?;
    let target = TruncatedSeries::log1p(&ctx, order)?;
    let r_comp = (&comp - &target).min_valuation_from(0);
    let pull = &group
        .omega
        .truncate_order(order - 1)
        .compose(&t.truncate_order(order - 1))?
        * &t.derivative();
    let geom = TruncatedSeries::from_coeffs(
        (0..order)
            .map(|k| ctx.int(if k % 2 == 0 { 1 } else { -1 }))
            .collect(),
    );
    let r_pull = (&pull - &geom).min_valuation_from(0);
    Ok(vec![
        Check::measured(
            format!("tate.iso-integral.{tag}"),
            ANCHOR,
            min_v,
            0,
            format!("t(X) ∈ Z_p[[X]] to order {order}"),
        ),
        Check::measured(
            format!("tate.iso-linear.{tag}"),
            ANCHOR,
            lin,
            threshold,
            "t(X) ≡ X mod X^2",
        ),
        Check::measured(
            format!("tate.iso-composition.{tag}"),
            ANCHOR,
            r_comp,
            threshold,
            format!("λ_E(t(X)) = log(1+X) to order {order}"),
        ),
        Check::measured(
            format!("tate.iso-pullback.{tag}"),
            ANCHOR,
            r_pull,
            threshold,
            "ω_E(t(X)) t'(X) = 1/(1+X)",
        ),
    ])
}

/// Predicted leading terms of `L_p(E, s)` for a split multiplicative `E`
/// with period `q` and `L(E,1)/Ω⁺ = l_ratio`.
#[derive(Debug, Clone)]
pub struct MttReport {
    /// `d/dX` at 0, the Coleman-side formula with `E_0 = (1 - 1/p) l_ratio`.
    pub d_dx: PadicScalar,
    /// `d/ds` at 1, equal to `log_p κ(γ) · d/dX`.
    pub d_ds: PadicScalar,
    /// `(log_p q / ord_p q) · l_ratio`, free of the generator.
    pub d_ds_closed: PadicScalar,
}

pub fn mtt_report(
    q: &TateParameter,
    ctx: &PrimeContext,
    kappa_gamma: i64,
    l_ratio: &PadicScalar,
) -> Result<MttReport> {
    if q.ord == 0 {
        return Err(LabError::invalid(
            "ord_p(q) = 0: the curve is not split multiplicative",
        ));
    }
    let p = ctx.p() as i64;
    let lk = iwasawa_log_scalar(&ctx.int(kappa_gamma))?;
    let lq = q.log_over_ord(ctx)?;
    let euler = &ctx.one() - &ctx.ratio(1, p)?;
    let e0 = &euler * l_ratio;
    let factor = ctx.int(p).div(&(&lk * &ctx.int(p - 1)))?;
    let d_dx = &(&factor * &lq) * &e0;
    let d_ds = &lk * &d_dx;
    Ok(MttReport {
        d_dx,
        d_ds,
        d_ds_closed: &lq * l_ratio,
    })
}

/// The chain rule `d/ds = log_p κ(γ) d/dX`, the closed form, and invariance
/// of `d/ds` under `γ ↦ γ^2`.
pub fn verify_mtt(
    q: &TateParameter,
    ctx: &PrimeContext,
    kappa_gamma: i64,
    l_ratio: &PadicScalar,
    threshold: i64,
) -> Result<Vec<Check>> {
    const ANCHOR: &str = "mtt-derivative";
    let r = mtt_report(q, ctx, kappa_gamma, l_ratio)?;
    let sq = kappa_gamma
        .checked_mul(kappa_gamma)
        .ok_or_else(|| LabError::invalid("κ(γ)^2 overflows"))?;
    let r2 = mtt_report(q, ctx, sq, l_ratio)?;
    let lk = iwasawa_log_scalar(&ctx.int(kappa_gamma))?;
    let lk2 = iwasawa_log_scalar(&ctx.int(sq))?;
    let chain = r
        .d_ds
        .residual_valuation(&(&lk * &r.d_dx))
        .min(r2.d_ds.residual_valuation(&(&lk2 * &r2.d_dx)));
    Ok(vec![
        Check::measured(
            "mtt.closed-form",
            ANCHOR,
            r.d_ds.residual_valuation(&r.d_ds_closed),
            threshold,
            format!("d/ds L_p(E,1) = (log_p q/ord_p q) L = {}", r.d_ds),
        ),
        Check::measured(
            "mtt.generator-invariance",
            ANCHOR,
            r.d_ds.residual_valuation(&r2.d_ds),
            threshold,
            format!("d/ds unchanged for κ(γ)^2 = {sq}"),
        ),
        Check::measured(
            "mtt.chain-rule",
            ANCHOR,
            chain,
            threshold,
            "d/ds = log_p κ(γ) · d/dX",
        ),
    ])
}

/// The default grid of Tate parameters: `p`, `p(1+p)`, `p^2(1+p)`.
pub fn q_grid(p: u32) -> Vec<TateParameter> {
    let u = 1 + p as i64;
    vec![
        TateParameter { ord: 1, unit: 1 },
        TateParameter { ord: 1, unit: u },
        TateParameter { ord: 2, unit: u },
    ]
}

/// The default sample points `2`, `1 + p` and `ω(2)`.
pub fn u_grid(ctx: &PrimeContext) -> Result<Vec<PadicScalar>> {
    let p = ctx.p() as i64;
    let mut out = vec![ctx.int(2), ctx.int(1 + p)];
    let w = crate::padic::teichmuller(2, ctx)?;
    if out.iter().all(|x| !(x - &w).is_zero()) {
        out.push(w);
    }
    Ok(out)
}

/// Whether `x` is `1` to the precision of `x`.
pub fn is_one(x: &PadicScalar) -> bool {
    (x - &x.exact_int_like(1)).is_zero() || (x - &x.exact_int_like(1)).valuation() >= x.precision()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divisor_sums() {
        let s1 = sk_series(1, 5);
        let want: Vec<BigInt> = [0, 1, 3, 4, 7, 6]
            .iter()
            .map(|&x| BigInt::from(x))
            .collect();
        assert_eq!(s1.coeffs, want);
        assert_eq!(sk_series(3, 2).coeffs[2], BigInt::from(9));
        let (a4, a6) = a_series(10).unwrap();
        assert_eq!(a4.coeffs[1], BigInt::from(-5));
        assert_eq!(a4.coeffs[2], BigInt::from(-45));
        assert_eq!(a6.coeffs[1], BigInt::from(-1));
        assert!(a4.coeffs[0].is_zero() && a6.coeffs[0].is_zero());
    }

    #[test]
    fn weierstrass_at_p5() {
        let ctx = PrimeContext::new(5, 30).unwrap();
        let q = ctx.int(5);
        let (x, y, r) = uniformize_point(&ctx.int(2), &q).unwrap();
        assert!(r.valuation() >= 28, "{}", r.valuation());
        let (xd, yd) = uniformize_direct(&ctx.int(2), &q).unwrap();
        assert!(x.residual_valuation(&xd) >= 28);
        assert!(y.residual_valuation(&yd) >= 28);
        let (xi, _, _) = uniformize_point(&ctx.int(2).inv().unwrap(), &q).unwrap();
        assert!(x.residual_valuation(&xi) >= 28);
        assert!(uniformize_point(&ctx.one(), &q).is_err());
    }

    #[test]
    fn q_zero_curve() {
        // y^2 + xy = x^3 at X = u/(1-u)^2, Y = u^2/(1-u)^3
        let ctx = PrimeContext::new(3, 20).unwrap();
        let u = ctx.int(7);
        let x = x_term(&u).unwrap();
        let y = y_term(&u, 2).unwrap();
        let r = weierstrass_residual(&x, &y, &ctx.zero(), &ctx.zero());
        assert!(r.is_zero() || r.valuation() >= 18);
    }

    #[test]
    fn formal_iso_at_p3() {
        let ctx = PrimeContext::new(3, 24).unwrap();
        let q = TateParameter::standard(3).value(&ctx);
        let checks = verify_formal_iso(&q, 40, 18, "t").unwrap();
        for c in &checks {
            assert!(c.passed(), "{c:?}");
        }
    }

    #[test]
    fn mtt_cancellation() {
        let ctx = PrimeContext::new(3, 20).unwrap();
        let q = TateParameter::standard(3);
        let l = ctx.ratio(1, 2).unwrap();
        let r = mtt_report(&q, &ctx, 4, &l).unwrap();
        let want = &iwasawa_log_scalar(&ctx.int(4)).unwrap() * &l;
        assert!(r.d_ds.residual_valuation(&want) >= 18);
        for c in verify_mtt(&q, &ctx, 4, &l, 17).unwrap() {
            assert!(c.passed(), "{c:?}");
        }
        let z = mtt_report(&q, &ctx, 4, &ctx.zero()).unwrap();
        assert!(z.d_ds.is_zero() || z.d_ds.valuation() >= 18);
    }
}
