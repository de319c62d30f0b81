//! Truncated power series with p-adic coefficients.
//!
//! A [`TruncatedSeries`] of order `M` holds the coefficients of
//! `X^0 .. X^M`; everything beyond is unknown. Coefficients carry their own
//! valuation and precision, so series with denominators (logarithms) and
//! integral series live in the same type.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{LabError, Result};
use crate::padic::{convolve, PadicScalar, PrimeContext};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedSeries {
    coeffs: Vec<PadicScalar>,
}

impl TruncatedSeries {
    pub fn from_coeffs(coeffs: Vec<PadicScalar>) -> Self {
        assert!(
            !coeffs.is_empty(),
            "a series needs at least a constant term"
        );
        TruncatedSeries { coeffs }
    }

    pub fn zero(ctx: &PrimeContext, order: usize) -> Self {
        TruncatedSeries {
            coeffs: vec![ctx.zero(); order + 1],
        }
    }

    pub fn constant(c: PadicScalar, order: usize) -> Self {
        let mut coeffs = vec![c.zero_like(); order + 1];
        coeffs[0] = c;
        TruncatedSeries { coeffs }
    }

    pub fn one(ctx: &PrimeContext, order: usize) -> Self {
        Self::constant(ctx.one(), order)
    }

    /// The series `X`.
    pub fn var(ctx: &PrimeContext, order: usize) -> Self {
        let mut s = Self::zero(ctx, order);
        if order >= 1 {
            s.coeffs[1] = ctx.one();
        }
        s
    }

    /// `log(1 + X)`.
    pub fn log1p(ctx: &PrimeContext, order: usize) -> Result<Self> {
        let mut s = Self::zero(ctx, order);
        for m in 1..=order {
            let c = ctx.ratio(if m % 2 == 1 { 1 } else { -1 }, m as i64)?;
            s.coeffs[m] = c;
        }
        Ok(s)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, m: usize) -> &PadicScalar {
        &self.coeffs[m]
    }

    pub fn coeffs(&self) -> &[PadicScalar] {
        &self.coeffs
    }

    pub fn set_coeff(&mut self, m: usize, c: PadicScalar) {
        self.coeffs[m] = c;
    }

    pub fn ctx_zero(&self) -> PadicScalar {
        self.coeffs[0].zero_like()
    }

    /// Minimal coefficient valuation over degrees `from..=order`.
    pub fn min_valuation_from(&self, from: usize) -> i64 {
        self.coeffs[from.min(self.coeffs.len())..]
            .iter()
            .map(|c| c.valuation())
            .min()
            .unwrap_or(i64::MAX)
    }

    /// Minimal coefficient precision.
    pub fn min_precision(&self) -> i64 {
        self.coeffs.iter().map(|c| c.precision()).min().unwrap_or(0)
    }

    pub fn truncate_order(&self, order: usize) -> Self {
        let n = (order + 1).min(self.coeffs.len());
        TruncatedSeries {
            coeffs: self.coeffs[..n].to_vec(),
        }
    }

    pub fn truncate_prec(&self, prec: i64) -> Self {
        TruncatedSeries {
            coeffs: self.coeffs.iter().map(|c| c.truncate(prec)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(&PadicScalar) -> PadicScalar) -> Self {
        TruncatedSeries {
            coeffs: self.coeffs.iter().map(f).collect(),
        }
    }

    pub fn scale(&self, c: &PadicScalar) -> Self {
        self.map(|x| x * c)
    }

    pub fn derivative(&self) -> Self {
        let m = self.order();
        if m == 0 {
            return TruncatedSeries::constant(self.ctx_zero(), 0);
        }
        let coeffs = (1..=m)
            .map(|k| &self.coeffs[k] * &self.coeffs[k].exact_int_like(k as i64))
            .collect();
        TruncatedSeries { coeffs }
    }

    /// Antiderivative with zero constant term; order grows by one.
    pub fn integrate(&self) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(self.ctx_zero());
        for (k, c) in self.coeffs.iter().enumerate() {
            coeffs.push(c.div(&c.exact_int_like(k as i64 + 1))?);
        }
        Ok(TruncatedSeries { coeffs })
    }

    /// Multiplicative inverse; requires a nonzero constant term.
    pub fn inverse(&self) -> Result<Self> {
        let c0 = &self.coeffs[0];
        if c0.is_zero() {
            return Err(LabError::invalid(
                "series with zero constant term is not invertible",
            ));
        }
        let inv0 = c0.inv()?;
        let m = self.order();
        let mut out: Vec<PadicScalar> = Vec::with_capacity(m + 1);
        out.push(inv0.clone());
        for k in 1..=m {
            let mut acc = self.ctx_zero();
            for j in 1..=k {
                acc = &acc + &(&self.coeffs[j] * &out[k - j]);
            }
            out.push(-(&acc * &inv0));
        }
        Ok(TruncatedSeries { coeffs: out })
    }

    /// Evaluates the truncation at a scalar (a polynomial evaluation).
    pub fn eval_scalar(&self, x: &PadicScalar) -> Result<PadicScalar> {
        let mut acc = self.coeffs[self.order()].clone();
        for c in self.coeffs[..self.order()].iter().rev() {
            acc = &(&acc * x) + c;
        }
        Ok(acc)
    }

    /// Composition `self ∘ g`, requires `g(0) = 0`.
    ///
    /// Baby-step giant-step: with `k ≈ √M`, the powers `g^0..g^k` are formed
    /// once and the blocks of `k` coefficients are assembled by Horner in `g^k`.
    pub fn compose(&self, g: &TruncatedSeries) -> Result<Self> {
        if !g.coeffs[0].is_zero() {
            return Err(LabError::invalid(
                "inner series must have zero constant term",
            ));
        }
        let m = self.order().min(g.order());
        let g = g.truncate_order(m);
        let f = self.truncate_order(m);
        let k = ((m + 1) as f64).sqrt().ceil().max(1.0) as usize;
        let mut powers = vec![TruncatedSeries::constant(g.coeffs[0].int_like(1), m)];
        for i in 1..=k {
            let next = &powers[i - 1] * &g;
            powers.push(next);
        }
        let giant = powers[k].clone();
        let blocks = (f.order() + 1).div_ceil(k);
        let mut acc: Option<TruncatedSeries> = None;
        for b in (0..blocks).rev() {
            let mut block = TruncatedSeries::zero_like(&f, m);
            for i in 0..k {
                let idx = b * k + i;
                if idx > f.order() {
                    break;
                }
                let c = &f.coeffs[idx];
                block = &block + &powers[i].scale(c);
            }
            acc = Some(match acc {
                None => block,
                Some(a) => &(&a * &giant) + &block,
            });
        }
        Ok(acc.expect("at least one block"))
    }

    fn zero_like(other: &TruncatedSeries, order: usize) -> Self {
        TruncatedSeries {
            coeffs: vec![other.ctx_zero(); order + 1],
        }
    }

    /// Compositional inverse of a series `a_1 X + a_2 X^2 + ...` with `a_1`
    /// a unit, by Newton iteration with doubling order.
    pub fn reversion(&self) -> Result<Self> {
        if !self.coeffs[0].is_zero() {
            return Err(LabError::invalid("reversion needs zero constant term"));
        }
        let m = self.order();
        if m < 1 || self.coeffs[1].is_zero() {
            return Err(LabError::invalid("reversion needs a nonzero linear term"));
        }
        let df = self.derivative();
        let a1_inv = self.coeffs[1].inv()?;
        let mut g = TruncatedSeries::zero_like(self, 1);
        g.coeffs[1] = a1_inv;
        let mut cur = 1usize;
        while cur < m {
            cur = (2 * cur).min(m);
            let gc = g.pad_to(cur);
            let f_cut = self.truncate_order(cur);
            let mut fg = f_cut.compose(&gc)?;
            // subtract X
            fg.coeffs[1] = &fg.coeffs[1] - &fg.coeffs[1].int_like(1);
            let dfg = df.truncate_order(cur).pad_to(cur).compose(&gc)?;
            let corr = &fg * &dfg.inverse()?;
            g = &gc - &corr;
        }
        Ok(g)
    }

    /// Extends with zero coefficients (exact zeros) to the given order.
    pub fn pad_to(&self, order: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        let prec = self.min_precision();
        while coeffs.len() < order + 1 {
            coeffs.push(self.coeffs[0].zero_like().at_prec(prec));
        }
        coeffs.truncate(order + 1);
        TruncatedSeries { coeffs }
    }

    /// `log(f)` for `f(0) = 1`, via the integral of `f'/f`.
    pub fn log(&self) -> Result<Self> {
        let one = self.coeffs[0].int_like(1);
        if self.coeffs[0].residual_valuation(&one) < self.coeffs[0].precision() {
            return Err(LabError::invalid("log needs constant term 1"));
        }
        let m = self.order();
        let q = &self.derivative() * &self.inverse()?.truncate_order(m.saturating_sub(1));
        Ok(q.integrate()?.truncate_order(m))
    }

    /// `exp(f)` for `f(0) = 0`, by the recurrence m e_m = Σ k f_k e_{m-k}.
    pub fn exp(&self) -> Result<Self> {
        if !self.coeffs[0].is_zero() {
            return Err(LabError::invalid("exp needs zero constant term"));
        }
        let m = self.order();
        let kf: Vec<PadicScalar> = (0..=m)
            .map(|k| &self.coeffs[k] * &self.coeffs[k].exact_int_like(k as i64))
            .collect();
        let prec = self.min_precision().max(1);
        let mut e: Vec<PadicScalar> = Vec::with_capacity(m + 1);
        e.push(self.coeffs[0].int_like(1).at_prec(prec));
        for n in 1..=m {
            let mut acc = self.ctx_zero();
            for k in 1..=n {
                acc = &acc + &(&kf[k] * &e[n - k]);
            }
            let c = acc.div(&acc.exact_int_like(n as i64))?;
            e.push(c);
        }
        Ok(TruncatedSeries { coeffs: e })
    }

    /// `f((1+X)^p - 1)` truncated to the order of `f`.
    pub fn frobenius_substitute(&self) -> Self {
        let m = self.order();
        let one = self.coeffs[0].int_like(1);
        let p = one.p() as usize;
        // inner polynomial (1+X)^p - 1 has degree p
        let mut inner: Vec<PadicScalar> = vec![self.ctx_zero(); p + 1];
        let mut binom: i64 = 1;
        for (j, slot) in inner.iter_mut().enumerate().skip(1) {
            binom = binom * (p - j + 1) as i64 / j as i64;
            *slot = one.int_like(binom);
        }
        let mut acc = TruncatedSeries::constant(self.coeffs[m].clone(), m);
        for c in self.coeffs[..m].iter().rev() {
            // acc <- acc * inner + c, with inner sparse of degree p
            let mut next: Vec<PadicScalar> = vec![self.ctx_zero(); m + 1];
            for (i, a) in acc.coeffs.iter().enumerate() {
                for (j, b) in inner.iter().enumerate().skip(1) {
                    if i + j > m {
                        break;
                    }
                    next[i + j] = &next[i + j] + &(a * b);
                }
            }
            next[0] = &next[0] + c;
            acc = TruncatedSeries { coeffs: next };
        }
        acc
    }
}

/// `(1 + X)^a` for `a ∈ Z_p`, coefficients `C(a, m)` by the recurrence
/// `C(a, m) = C(a, m-1) (a - m + 1) / m`.
///
/// The exponent's precision bounds the result: each coefficient loses at
/// most `v_p(m)` digits relative to `a`.
pub fn binomial_power(a: &PadicScalar, order: usize) -> Result<TruncatedSeries> {
    let inv = SmallInverses::new(a, order)?;
    binomial_power_with(a, order, &inv)
}

/// Cached inverses of `1..=M` at the precision of a reference scalar.
pub struct SmallInverses {
    inv: Vec<PadicScalar>,
}

impl SmallInverses {
    pub fn new(reference: &PadicScalar, order: usize) -> Result<Self> {
        let prec = reference.precision().max(1);
        let base = reference.int_like(1).at_prec(prec);
        // v_p(m) ≤ log_p(M); the extra digits keep 1/m exact at `prec`
        let extra = 2 * (order.max(1) as f64).log(reference.p() as f64).ceil() as i64 + 2;
        let mut inv = Vec::with_capacity(order + 1);
        inv.push(base.zero_like());
        for m in 1..=order {
            inv.push(
                base.int_like(m as i64)
                    .lift_to(prec + extra)
                    .inv()?
                    .truncate(prec),
            );
        }
        Ok(SmallInverses { inv })
    }

    pub fn get(&self, m: usize) -> &PadicScalar {
        &self.inv[m]
    }
}

pub fn binomial_power_with(
    a: &PadicScalar,
    order: usize,
    inv: &SmallInverses,
) -> Result<TruncatedSeries> {
    if a.valuation() < 0 {
        return Err(LabError::invalid("binomial exponent must lie in Z_p"));
    }
    let one = a.int_like(1).at_prec(a.precision());
    let mut coeffs = Vec::with_capacity(order + 1);
    coeffs.push(one.clone());
    let mut c = one.clone();
    for m in 1..=order {
        let factor = a - &a.int_like(m as i64 - 1);
        c = &(&c * &factor) * inv.get(m);
        coeffs.push(c.clone());
    }
    Ok(TruncatedSeries { coeffs })
}

impl<'a> Add<&'a TruncatedSeries> for &'a TruncatedSeries {
    type Output = TruncatedSeries;
    fn add(self, rhs: &'a TruncatedSeries) -> TruncatedSeries {
        let m = self.order().min(rhs.order());
        TruncatedSeries {
            coeffs: (0..=m).map(|k| &self.coeffs[k] + &rhs.coeffs[k]).collect(),
        }
    }
}

impl<'a> Sub<&'a TruncatedSeries> for &'a TruncatedSeries {
    type Output = TruncatedSeries;
    fn sub(self, rhs: &'a TruncatedSeries) -> TruncatedSeries {
        let m = self.order().min(rhs.order());
        TruncatedSeries {
            coeffs: (0..=m).map(|k| &self.coeffs[k] - &rhs.coeffs[k]).collect(),
        }
    }
}

impl Neg for &TruncatedSeries {
    type Output = TruncatedSeries;
    fn neg(self) -> TruncatedSeries {
        self.map(|c| -c)
    }
}

impl<'a> Mul<&'a TruncatedSeries> for &'a TruncatedSeries {
    type Output = TruncatedSeries;
    fn mul(self, rhs: &'a TruncatedSeries) -> TruncatedSeries {
        let m = self.order().min(rhs.order());
        TruncatedSeries {
            coeffs: convolve(&self.coeffs[..=m], &rhs.coeffs[..=m], m + 1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::teichmuller;
    use num_bigint::BigUint;

    fn ctx(p: u32) -> PrimeContext {
        PrimeContext::new(p, 30).unwrap()
    }

    #[test]
    fn binomial_examples() {
        let c = ctx(5);
        let s = binomial_power(&c.one(), 6).unwrap();
        assert_eq!(s.coeff(1), &c.one());
        assert!(s.coeff(2).is_zero() && s.coeff(6).is_zero());
        let g = binomial_power(&c.with_prec(40).int(-1), 6).unwrap();
        for m in 0..=6 {
            let expect = c.int(if m % 2 == 0 { 1 } else { -1 });
            assert_eq!(g.coeff(m).residual_valuation(&expect), 30);
        }
        let w = teichmuller(2, &c).unwrap();
        let t = binomial_power(&w, 3).unwrap();
        assert_eq!(t.coeff(1).residue(2).unwrap(), BigUint::from(7u32));
        assert!(binomial_power(&c.ratio(1, 5).unwrap(), 3).is_err());
    }

    #[test]
    fn frobenius_examples() {
        let c = ctx(3);
        let x = TruncatedSeries::var(&c, 8);
        let fx = x.frobenius_substitute();
        let expect = [0, 3, 3, 1, 0, 0, 0, 0, 0];
        for (m, e) in expect.iter().enumerate() {
            assert!(fx.coeff(m).residual_valuation(&c.int(*e)) >= 30);
        }
        let l = TruncatedSeries::log1p(&c.with_prec(40), 20).unwrap();
        let fl = l.frobenius_substitute();
        let pl = l.scale(&c.with_prec(40).int(3));
        for m in 1..=20 {
            assert!(
                fl.coeff(m).residual_valuation(pl.coeff(m)) >= 30,
                "degree {m}"
            );
        }
        let one = TruncatedSeries::one(&c, 5).frobenius_substitute();
        assert_eq!(one.coeff(0), &c.one());
    }

    #[test]
    fn log_exp_roundtrip() {
        let c = ctx(5).with_prec(60);
        let l = TruncatedSeries::log1p(&c, 20).unwrap();
        assert_eq!(l.coeff(2), &c.ratio(-1, 2).unwrap());
        let e = l.exp().unwrap();
        assert!(e.coeff(1).residual_valuation(&c.one()) >= 40);
        for m in 2..=20 {
            assert!(e.coeff(m).valuation() >= 40, "degree {m}: {}", e.coeff(m));
        }
        let back = e.log().unwrap();
        for m in 1..=20 {
            assert!(back.coeff(m).residual_valuation(l.coeff(m)) >= 40);
        }
    }

    #[test]
    fn compose_examples() {
        let c = ctx(7);
        let mut f = TruncatedSeries::zero(&c, 6);
        f.set_coeff(2, c.one());
        let mut g = TruncatedSeries::var(&c, 6);
        g.set_coeff(2, c.one());
        let h = f.compose(&g).unwrap();
        let expect = [0, 0, 1, 2, 1, 0, 0];
        for (m, e) in expect.iter().enumerate() {
            assert_eq!(h.coeff(m).residual_valuation(&c.int(*e)), 30);
        }
        let x = TruncatedSeries::var(&c, 6);
        assert!(f.compose(&TruncatedSeries::one(&c, 6)).is_err());
        let fx = g.compose(&x).unwrap();
        assert_eq!(fx, g);
    }

    #[test]
    fn reversion_inverts() {
        let c = ctx(3);
        let mut f = TruncatedSeries::var(&c, 24);
        for m in 2..=24 {
            f.set_coeff(m, c.int((m * m) as i64 % 7 - 3));
        }
        let g = f.reversion().unwrap();
        let id = f.compose(&g).unwrap();
        for m in 0..=24 {
            let e = if m == 1 { c.one() } else { c.zero() };
            assert!(id.coeff(m).residual_valuation(&e) >= 30, "degree {m}");
        }
    }
}
