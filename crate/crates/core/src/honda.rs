//! The Honda logarithm `ℓ`, the integral isomorphism `ι = exp∘ℓ - 1` to the
//! multiplicative formal group, the point `ε` with `ℓ(ε) = p`, and the
//! formal group addition transported through `ι`.

use num_traits::ToPrimitive;

use crate::cyclotomic::{eval_series_at, field_log, CycloElement, TailBound};
use crate::error::{LabError, Result};
use crate::padic::{hensel_root, teichmuller, PadicScalar, PrimeContext};
use crate::series::{SmallInverses, TruncatedSeries};

/// Order of the compositional inverse of `ι`.
pub const IOTA_INVERSE_ORDER: usize = 128;

#[derive(Debug, Clone)]
pub struct HondaData {
    ctx: PrimeContext,
    pub ell: TruncatedSeries,
    pub iota: TruncatedSeries,
    pub iota_inv: TruncatedSeries,
    pub epsilon: PadicScalar,
}

/// `ceil(target · p^n (p-1)) + 8`: enough terms to evaluate at `ζ - 1` for
/// every layer up to `n_max`.
pub fn default_order(p: u32, n_max: u32, target: i64) -> usize {
    let d = (p as usize).pow(n_max) * (p as usize - 1);
    target as usize * d + 8
}

fn log_p_floor(m: usize, p: u32) -> i64 {
    let mut k = 0;
    let mut q = p as usize;
    while q <= m {
        k += 1;
        q *= p as usize;
    }
    k
}

/// `v_p(m!)`.
pub fn factorial_valuation(m: usize, p: u32) -> i64 {
    let mut v = 0;
    let mut q = p as usize;
    while q <= m {
        v += (m / q) as i64;
        q *= p as usize;
    }
    v
}

/// `ℓ` to order `order`, coefficients to absolute precision `target`.
///
/// The degree-`m` coefficient of `Σ_δ ((1+X)^(p^k δ) - 1)/p^k` equals
/// `(1/m) Σ_δ δ C(p^k δ - 1, m - 1)`, so `ℓ'` is summed as the integral
/// series `1/(1+X) + Σ_k Σ_δ δ (1+X)^(p^k δ - 1)` and integrated once.
///
/// With `t = p^k δ`, `C(t - 1, m) = (-1)^m Π_{i≤m} (1 - t/i)`; since
/// `Σ_δ δ = 0` only `r_m = Π_{i≤m}(1 - t/i) - 1` contributes, and it has
/// valuation at least `k - log_p(order)`, so its stored digits shrink as
/// `k` grows past `log_p(order)`. The loop runs until two consecutive blocks vanish at the
/// working precision.
pub fn build_ell(ctx: &PrimeContext, order: usize, target: i64) -> Result<TruncatedSeries> {
    let p = ctx.p();
    let lm = log_p_floor(order.max(1), p);
    let prime_prec = target + lm + 2;
    let work = prime_prec + 2 * lm + 4;
    let wc = ctx.with_prec(work);
    let deltas: Vec<PadicScalar> = (1..p as i64)
        .map(|b| teichmuller(b, &wc))
        .collect::<Result<_>>()?;
    let inv = SmallInverses::new(&wc.one(), order)?;

    // Σ_k Σ_δ δ r_m, degree m = 0..order-1
    let mut sums: Vec<PadicScalar> = vec![wc.zero(); order];
    let budget = work + 2 * lm + 16;
    let mut quiet = 0;
    let mut k = 0i64;
    while quiet < 2 {
        if k > budget {
            return Err(LabError::Convergence(format!(
                "k-sum for the Honda logarithm did not stabilize after {budget} blocks"
            )));
        }
        let mut block: Vec<PadicScalar> = vec![wc.zero(); order];
        for d in &deltas {
            let t = d.truncate(work - k).shift(k);
            if k <= lm {
                // t/i can have negative valuation: keep the product form so
                // relative precision is not lost through cancellation
                let mut u = wc.one();
                for (m, slot) in block.iter_mut().enumerate().skip(1) {
                    let step = &t * inv.get(m);
                    u = &u * &(&wc.one() - &step);
                    *slot = &*slot + &(&(&u - &wc.one()) * d);
                }
            } else {
                let mut r = wc.zero();
                for (m, slot) in block.iter_mut().enumerate().skip(1) {
                    let step = (&t * inv.get(m)).truncate(work);
                    let u = &r + &wc.one();
                    r = (&r - &(&u * &step)).truncate(work);
                    *slot = &*slot + &(&r * d);
                }
            }
        }
        let low = block
            .iter()
            .map(|c| c.valuation())
            .min()
            .unwrap_or(i64::MAX);
        if low >= prime_prec {
            quiet += 1;
        } else {
            quiet = 0;
        }
        for (s, b) in sums.iter_mut().zip(&block) {
            *s = &*s + b;
        }
        k += 1;
    }
    let prime: Vec<PadicScalar> = sums
        .iter()
        .enumerate()
        .map(|(m, s)| {
            let c = s + &wc.one();
            let c = if m % 2 == 0 { c } else { -&c };
            c.truncate(prime_prec)
        })
        .collect();
    Ok(TruncatedSeries::from_coeffs(prime)
        .integrate()?
        .truncate_prec(target))
}

/// Valuations found by [`check_honda`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HondaReport {
    pub order: usize,
    pub ell_at_zero_valuation: i64,
    /// Minimal valuation of `ℓ' - 1` (degrees ≥ 1 of ℓ').
    pub derivative_min_valuation: i64,
    pub derivative_constant_residual: i64,
    /// Minimal valuation of the coefficients of `(φ - p)∘ℓ`.
    pub frobenius_min_valuation: i64,
}

/// Checks `ℓ(0) = 0`, `ℓ' ∈ 1 + X Z_p[[X]]` and `(φ - p)∘ℓ ∈ p Z_p[[X]]`.
pub fn check_honda(ell: &TruncatedSeries) -> Result<HondaReport> {
    let order = ell.order();
    let d = ell.derivative();
    let one = d.coeff(0).int_like(1);
    let derivative_constant_residual = d.coeff(0).residual_valuation(&one);
    for m in 1..d.order() + 1 {
        if d.coeff(m).valuation() < 0 {
            return Err(LabError::property(format!(
                "ℓ' has a non-integral coefficient in degree {m}"
            )));
        }
    }
    let pr = ell.coeff(1).int_like(ell.coeff(1).p() as i64);
    let phi = &ell.frobenius_substitute() - &ell.scale(&pr);
    for m in 0..=phi.order() {
        if phi.coeff(m).valuation() < 1 {
            return Err(LabError::property(format!(
                "(φ - p)ℓ has valuation {} in degree {m}",
                phi.coeff(m).valuation()
            )));
        }
    }
    Ok(HondaReport {
        order,
        ell_at_zero_valuation: ell.coeff(0).valuation(),
        derivative_min_valuation: d.min_valuation_from(1),
        derivative_constant_residual,
        frobenius_min_valuation: phi.min_valuation_from(0),
    })
}

/// `ι = exp(ℓ) - 1`, certified integral.
pub fn build_iota(ell: &TruncatedSeries) -> Result<TruncatedSeries> {
    let mut e = ell.exp()?;
    let m0 = e.coeff(0).clone();
    e.set_coeff(0, &m0 - &m0.int_like(1));
    for m in 0..=e.order() {
        if e.coeff(m).valuation() < 0 {
            return Err(LabError::property(format!(
                "ι has a non-integral coefficient in degree {m}"
            )));
        }
    }
    Ok(e)
}

/// The root of `ℓ(X) = p` in `pZ_p`, Newton from `x0`.
pub fn solve_epsilon_from(
    ell: &TruncatedSeries,
    x0: &PadicScalar,
    target: i64,
) -> Result<PadicScalar> {
    let p = x0.p() as i64;
    if x0.valuation() < 1 {
        return Err(LabError::invalid("starting point must lie in pZ_p"));
    }
    let mut f = ell.clone();
    let c0 = f.coeff(0).clone();
    f.set_coeff(0, &c0 - &c0.int_like(p));
    hensel_root(&f, &x0.lift_to(target))
}

/// `ε` with `ℓ(ε) = p`, Newton from `x0 = p`.
pub fn solve_epsilon(ell: &TruncatedSeries, ctx: &PrimeContext) -> Result<PadicScalar> {
    let target = ctx.prec();
    solve_epsilon_from(ell, &ctx.int(ctx.p() as i64), target)
}

impl HondaData {
    /// Builds `ℓ`, `ι`, `ι^{-1}` and `ε` so that `ι` is known to
    /// `ctx.prec()` digits to order `order`.
    pub fn build(ctx: &PrimeContext, order: usize) -> Result<Self> {
        let target = ctx.prec();
        // exp(ℓ) divides by 1..order in turn and loses up to v_p(order!)
        let ell_prec = target + factorial_valuation(order, ctx.p()) + 10;
        let ell = build_ell(ctx, order, ell_prec)?;
        let iota = build_iota(&ell)?.truncate_prec(target + 4);
        let inv_order = IOTA_INVERSE_ORDER.min(order);
        let iota_inv = iota.truncate_order(inv_order).reversion()?;
        for m in 0..=iota_inv.order() {
            if iota_inv.coeff(m).valuation() < 0 {
                return Err(LabError::property(format!(
                    "ι^(-1) has a non-integral coefficient in degree {m}"
                )));
            }
        }
        let epsilon = solve_epsilon(&ell, &ctx.with_prec(target + 4))?;
        Ok(HondaData {
            ctx: ctx.clone(),
            ell,
            iota,
            iota_inv,
            epsilon,
        })
    }

    pub fn ctx(&self) -> &PrimeContext {
        &self.ctx
    }

    pub fn order(&self) -> usize {
        self.iota.order()
    }

    /// `ι(x)` for `x` in the maximal ideal of some `K_n`.
    pub fn iota_at(&self, x: &CycloElement) -> Result<CycloElement> {
        eval_series_at(&self.iota, x, TailBound::Integral, self.ctx.prec())
    }

    /// `ℓ(ε)` recomputed, for the defining-property check.
    pub fn ell_at_epsilon(&self) -> Result<PadicScalar> {
        self.ell.eval_scalar(&self.epsilon)
    }

    /// `ι(ε) ∈ pZ_p`.
    pub fn iota_at_epsilon(&self) -> Result<PadicScalar> {
        let t = self.iota.eval_scalar(&self.epsilon)?;
        Ok(t.truncate(self.ctx.prec()))
    }

    /// Solves `ι(w) = z` in `K_n` by Newton, starting from `ι^{-1}(z)`.
    pub fn iota_inverse_at(&self, z: &CycloElement) -> Result<CycloElement> {
        let target = self.ctx.prec();
        let mut w = eval_series_at(&self.iota_inv, z, TailBound::Polynomial, target)?;
        let diota = self.iota.derivative();
        for _ in 0..64 {
            let r = &self.iota_at(&w)? - z;
            if r.min_coord_valuation() >= target {
                return Ok(w.truncate(target));
            }
            let slope = eval_series_at(&diota, &w, TailBound::Polynomial, target)?;
            w = &w - &(&r * &slope.inverse()?);
            w = w.truncate(target + 2);
        }
        Err(LabError::NoConvergence(
            "Newton inversion of ι did not converge".into(),
        ))
    }

    /// `x [+]_F y = ι^{-1}((1 + ι(x))(1 + ι(y)) - 1)`.
    pub fn formal_add(&self, x: &CycloElement, y: &CycloElement) -> Result<CycloElement> {
        let one = CycloElement::one(x.field());
        let ix = &one + &self.iota_at(x)?;
        let iy = &one + &self.iota_at(y)?;
        let z = &(&ix * &iy) - &one;
        self.iota_inverse_at(&z)
    }

    /// `ℓ(x)` for `x` in the maximal ideal, via `ℓ = log(1 + ι)`.
    pub fn ell_at(&self, x: &CycloElement) -> Result<CycloElement> {
        let field = x.field().clone();
        field_log(&(&CycloElement::one(&field) + &self.iota_at(x)?))
    }
}

/// The rational number a coefficient approximates, for display.
pub fn describe(c: &PadicScalar) -> String {
    match c.rational_guess() {
        Some((n, d)) if d == 1.into() => n.to_string(),
        Some((n, d)) => format!("{n}/{d}"),
        None => format!("{c}"),
    }
}

/// Small-integer coefficient of a series, if it reconstructs as one.
pub fn as_small_rational(c: &PadicScalar) -> Option<(i64, i64)> {
    let (n, d) = c.rational_guess()?;
    Some((n.to_i64()?, d.to_i64()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `ℓ = L + (p-1) Σ_i L^{i(p-1)} / ((i(p-1))! (1 - p^{i(p-1)-1}))` with
    /// `L = log(1+X)`: the δ-sum kills every power of `L` not divisible by
    /// `p - 1`, and the k-sum is geometric.
    fn closed_form_ell(ctx: &PrimeContext, order: usize) -> TruncatedSeries {
        let p = ctx.p() as i64;
        let wc = ctx.with_prec(ctx.prec() + 2 * order as i64);
        let l = TruncatedSeries::log1p(&wc, order).unwrap();
        let mut acc = l.clone();
        let mut lp = TruncatedSeries::one(&wc, order);
        let lpm1 = {
            let mut t = TruncatedSeries::one(&wc, order);
            for _ in 0..(p - 1) {
                t = &t * &l;
            }
            t
        };
        let mut fact = wc.one();
        let mut i = 1i64;
        loop {
            lp = &lp * &lpm1;
            let j = i * (p - 1);
            if j as usize > order {
                break;
            }
            for t in (j - p + 2)..=j {
                fact = &fact * &wc.int(t);
            }
            let geo = &wc.one() - &wc.p_power(j - 1);
            let c = wc.int(p - 1).div(&(&fact * &geo)).unwrap();
            acc = &acc + &lp.scale(&c);
            i += 1;
        }
        acc.truncate_prec(ctx.prec())
    }

    #[test]
    fn ell_low_coefficients() {
        let ctx = PrimeContext::new(3, 30).unwrap();
        let ell = build_ell(&ctx, 40, 30).unwrap();
        assert!(ell.coeff(0).is_zero());
        assert_eq!(as_small_rational(ell.coeff(1)), Some((1, 1)));
        assert_eq!(as_small_rational(ell.coeff(2)), Some((-1, 1)));
        assert_eq!(as_small_rational(ell.coeff(3)), Some((5, 6)));
        let ctx5 = PrimeContext::new(5, 30).unwrap();
        let ell5 = build_ell(&ctx5, 40, 30).unwrap();
        assert_eq!(as_small_rational(ell5.coeff(2)), Some((-1, 2)));
    }

    #[test]
    fn ell_matches_closed_form() {
        for p in [3u32, 5, 7] {
            let ctx = PrimeContext::new(p, 25).unwrap();
            let order = 60;
            let ell = build_ell(&ctx, order, 25).unwrap();
            let oracle = closed_form_ell(&ctx, order);
            for m in 0..=order {
                let r = ell.coeff(m).residual_valuation(oracle.coeff(m));
                assert!(r >= 25 - 2 * log_p_floor(order, p), "p={p} m={m} r={r}");
            }
        }
    }

    #[test]
    fn honda_properties() {
        let ctx = PrimeContext::new(3, 30).unwrap();
        let ell = build_ell(&ctx, 130, 30).unwrap();
        let r = check_honda(&ell).unwrap();
        assert!(r.ell_at_zero_valuation >= 30);
        assert!(r.derivative_min_valuation >= 0);
        assert!(r.frobenius_min_valuation >= 1);
        // the degree-2 coefficient of φℓ - pℓ is -6 - (-3) = -3
        let pr = ctx.int(3);
        let phi = &ell.frobenius_substitute() - &ell.scale(&pr);
        assert_eq!(as_small_rational(phi.coeff(2)), Some((-3, 1)));
        assert!(phi.coeff(1).is_zero());
    }

    #[test]
    fn iota_low_coefficients() {
        let ctx = PrimeContext::new(3, 20).unwrap();
        let h = HondaData::build(&ctx, 60).unwrap();
        assert_eq!(as_small_rational(h.iota.coeff(1)), Some((1, 1)));
        assert_eq!(as_small_rational(h.iota.coeff(2)), Some((-1, 2)));
        assert!(h.iota.coeff(3).is_zero());
        assert_eq!(h.iota.coeff(2).residue(3).unwrap(), 13u32.into());
        let ctx5 = PrimeContext::new(5, 20).unwrap();
        let h5 = HondaData::build(&ctx5, 60).unwrap();
        assert!(h5.iota.coeff(2).is_zero());
    }

    #[test]
    fn iota_inverse_composes_back() {
        let ctx = PrimeContext::new(3, 20).unwrap();
        let h = HondaData::build(&ctx, 60).unwrap();
        let m = h.iota_inv.order();
        let id = h.iota.truncate_order(m).compose(&h.iota_inv).unwrap();
        assert!(id.coeff(1).residual_valuation(&ctx.one()) >= 20);
        for j in 2..=m {
            assert!(id.coeff(j).valuation() >= 20, "degree {j}");
        }
        let l = TruncatedSeries::log1p(&ctx, m).unwrap();
        let back = h.ell.truncate_order(m).compose(&h.iota_inv).unwrap();
        for j in 0..=m {
            assert!(
                back.coeff(j).residual_valuation(l.coeff(j)) >= 20 - 4,
                "degree {j}"
            );
        }
    }

    #[test]
    fn epsilon_is_a_root() {
        let ctx = PrimeContext::new(3, 30).unwrap();
        let h = HondaData::build(&ctx, 40).unwrap();
        let r = &h.ell_at_epsilon().unwrap() - &ctx.int(3);
        assert!(r.valuation() >= 30);
        assert_eq!(h.epsilon.residue(2).unwrap(), 3u32.into());
        let other = solve_epsilon_from(&h.ell, &ctx.int(12), 34).unwrap();
        assert!(other.residual_valuation(&h.epsilon) >= 30);
    }
}
