//! Exact p-adic scalars at tracked absolute precision.
//!
//! A [`PadicScalar`] is stored as `p^val * unit + O(p^prec)` with `unit` a
//! residue modulo `p^(prec - val)` coprime to `p`. Zero at precision `prec`
//! is stored with `val == prec`. Every operation propagates the absolute
//! precision the inputs justify and never more.

use std::borrow::Cow;
use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{LabError, Result};

/// Default number of cached powers of `p`.
const TABLE_DIGITS: usize = 4096;

/// Cached powers `p^0 .. p^TABLE_DIGITS`.
#[derive(Debug)]
pub struct PowerTable {
    p: u32,
    powers: Vec<BigUint>,
}

impl PowerTable {
    fn build(p: u32) -> Self {
        let mut powers = Vec::with_capacity(TABLE_DIGITS + 1);
        let mut acc = BigUint::one();
        for _ in 0..=TABLE_DIGITS {
            powers.push(acc.clone());
            acc *= p;
        }
        PowerTable { p, powers }
    }

    fn shared(p: u32) -> Arc<PowerTable> {
        static CACHE: OnceLock<Mutex<HashMap<u32, Arc<PowerTable>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("power table cache poisoned");
        guard
            .entry(p)
            .or_insert_with(|| Arc::new(PowerTable::build(p)))
            .clone()
    }

    pub fn pow(&self, k: i64) -> Cow<'_, BigUint> {
        debug_assert!(k >= 0);
        let k = k as usize;
        if k < self.powers.len() {
            Cow::Borrowed(&self.powers[k])
        } else {
            Cow::Owned(BigUint::from(self.p).pow(k as u32))
        }
    }
}

fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u32;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// The prime `p` together with the target absolute precision `N`.
#[derive(Clone)]
pub struct PrimeContext {
    p: u32,
    prec: i64,
    table: Arc<PowerTable>,
}

impl fmt::Debug for PrimeContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PrimeContext(p={}, N={})", self.p, self.prec)
    }
}

impl PrimeContext {
    pub const DEFAULT_PRECISION: i64 = 30;

    pub fn new(p: u32, prec: i64) -> Result<Self> {
        if !is_prime(p) {
            return Err(LabError::Config(format!("{p} is not prime")));
        }
        if p == 2 {
            return Err(LabError::Config(
                "p = 2 is not supported: the torsion group is trivial and 1/2 is not integral"
                    .into(),
            ));
        }
        if prec < 4 {
            return Err(LabError::Config(format!("precision {prec} < 4")));
        }
        Ok(PrimeContext {
            p,
            prec,
            table: PowerTable::shared(p),
        })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn prec(&self) -> i64 {
        self.prec
    }

    /// Same prime, different working precision.
    pub fn with_prec(&self, prec: i64) -> Self {
        PrimeContext {
            p: self.p,
            prec,
            table: self.table.clone(),
        }
    }

    pub fn table(&self) -> &Arc<PowerTable> {
        &self.table
    }

    pub fn zero(&self) -> PadicScalar {
        PadicScalar::zero_with(self.table.clone(), self.prec)
    }

    pub fn one(&self) -> PadicScalar {
        self.int(1)
    }

    pub fn int(&self, n: i64) -> PadicScalar {
        self.from_bigint(&BigInt::from(n))
    }

    pub fn from_bigint(&self, n: &BigInt) -> PadicScalar {
        PadicScalar::from_bigint_at(self.table.clone(), n, 0, self.prec)
    }

    /// The exact rational `num / den` at the context precision.
    pub fn ratio(&self, num: i64, den: i64) -> Result<PadicScalar> {
        if den == 0 {
            return Err(LabError::invalid("zero denominator"));
        }
        let (v, _) = split_p(&BigInt::from(den), self.p);
        // extra digits so the quotient keeps absolute precision N
        let wide = self.with_prec(self.prec + 2 * v);
        let n = wide.int(num);
        let d = wide.int(den);
        n.div(&d)
    }

    /// `p^k` exactly at the context precision.
    pub fn p_power(&self, k: i64) -> PadicScalar {
        PadicScalar::from_parts(self.table.clone(), k, BigUint::one(), self.prec.max(k + 1))
            .truncate(self.prec.max(k))
    }
}

/// Returns `(v_p(n), n / p^v)` for nonzero `n`.
fn split_p(n: &BigInt, p: u32) -> (i64, BigInt) {
    let mut v = 0;
    let mut m = n.clone();
    if m.is_zero() {
        return (0, m);
    }
    let pb = BigInt::from(p);
    loop {
        let (q, r) = m.div_rem(&pb);
        if !r.is_zero() {
            break;
        }
        m = q;
        v += 1;
    }
    (v, m)
}

/// An element of Q_p known modulo `p^prec`.
#[derive(Clone)]
pub struct PadicScalar {
    table: Arc<PowerTable>,
    val: i64,
    unit: BigUint,
    prec: i64,
}

impl PartialEq for PadicScalar {
    fn eq(&self, other: &Self) -> bool {
        self.table.p == other.table.p
            && self.val == other.val
            && self.prec == other.prec
            && self.unit == other.unit
    }
}

impl Eq for PadicScalar {}

impl PadicScalar {
    fn zero_with(table: Arc<PowerTable>, prec: i64) -> Self {
        PadicScalar {
            table,
            val: prec,
            unit: BigUint::zero(),
            prec,
        }
    }

    /// Builds `p^shift * value + O(p^prec)`, normalizing the unit part.
    fn from_parts(table: Arc<PowerTable>, shift: i64, value: BigUint, prec: i64) -> Self {
        if shift >= prec || value.is_zero() {
            return Self::zero_with(table, prec);
        }
        let p = table.p;
        let mut val = shift;
        let mut u = value;
        // strip p-factors before reducing so the valuation is exact
        loop {
            let (q, r) = u.div_rem(&BigUint::from(p));
            if !r.is_zero() {
                break;
            }
            u = q;
            val += 1;
            if val >= prec {
                return Self::zero_with(table, prec);
            }
        }
        let m = table.pow(prec - val);
        if u >= *m {
            u %= m.as_ref();
        }
        PadicScalar {
            table,
            val,
            unit: u,
            prec,
        }
    }

    /// Like `from_parts` but `value` is already reduced modulo `p^(prec - shift)`.
    fn from_residue(table: Arc<PowerTable>, shift: i64, value: BigUint, prec: i64) -> Self {
        if value.is_zero() || shift >= prec {
            return Self::zero_with(table, prec);
        }
        let p = table.p;
        if !(&value % p).is_zero() {
            return PadicScalar {
                table,
                val: shift,
                unit: value,
                prec,
            };
        }
        Self::from_parts(table, shift, value, prec)
    }

    fn from_bigint_at(table: Arc<PowerTable>, n: &BigInt, shift: i64, prec: i64) -> Self {
        if n.is_zero() || shift >= prec {
            return Self::zero_with(table, prec);
        }
        let (v, m) = split_p(n, table.p);
        let val = shift + v;
        if val >= prec {
            return Self::zero_with(table, prec);
        }
        let modulus = BigInt::from(table.pow(prec - val).into_owned());
        let r = m.mod_floor(&modulus);
        let (_, r) = r.into_parts();
        PadicScalar {
            table,
            val,
            unit: r,
            prec,
        }
    }

    pub fn p(&self) -> u32 {
        self.table.p
    }

    /// Valuation; for a zero scalar this is its absolute precision.
    pub fn valuation(&self) -> i64 {
        self.val
    }

    pub fn precision(&self) -> i64 {
        self.prec
    }

    pub fn relative_precision(&self) -> i64 {
        self.prec - self.val
    }

    pub fn is_zero(&self) -> bool {
        self.val >= self.prec
    }

    pub fn unit_part(&self) -> &BigUint {
        &self.unit
    }

    pub fn zero_like(&self) -> Self {
        Self::zero_with(self.table.clone(), self.prec)
    }

    pub fn int_like(&self, n: i64) -> Self {
        Self::from_bigint_at(self.table.clone(), &BigInt::from(n), 0, self.prec)
    }

    /// The integer `n` with enough digits that multiplying or dividing by it
    /// never limits the precision of a result near this scalar.
    pub fn exact_int_like(&self, n: i64) -> Self {
        let extra = self.prec.abs() + self.val.abs() + 64;
        Self::from_bigint_at(self.table.clone(), &BigInt::from(n), 0, self.prec + extra)
    }

    /// Reduces to a lower absolute precision (no-op if already lower).
    pub fn truncate(&self, prec: i64) -> Self {
        if prec >= self.prec {
            return self.clone();
        }
        if self.val >= prec {
            return Self::zero_with(self.table.clone(), prec);
        }
        let m = self.table.pow(prec - self.val);
        PadicScalar {
            table: self.table.clone(),
            val: self.val,
            unit: &self.unit % m.as_ref(),
            prec,
        }
    }

    /// Raises the absolute precision by padding the stored representative
    /// with zero digits.
    ///
    /// The representative is the one in `[0, p^prec)`, so this is only the
    /// intended value when that representative is exact (a non-negative
    /// integer, or a value whose higher digits are known to vanish).
    pub fn lift_to(&self, prec: i64) -> Self {
        if prec <= self.prec {
            return self.truncate(prec);
        }
        if self.is_zero() {
            return Self::zero_with(self.table.clone(), prec);
        }
        PadicScalar {
            table: self.table.clone(),
            val: self.val,
            unit: self.unit.clone(),
            prec,
        }
    }

    /// Sets the precision to `prec`, lifting or truncating.
    pub fn at_prec(&self, prec: i64) -> Self {
        self.lift_to(prec)
    }

    /// Multiplies by `p^k` (k may be negative).
    pub fn shift(&self, k: i64) -> Self {
        if self.is_zero() {
            return Self::zero_with(self.table.clone(), self.prec + k);
        }
        PadicScalar {
            table: self.table.clone(),
            val: self.val + k,
            unit: self.unit.clone(),
            prec: self.prec + k,
        }
    }

    /// Integer representative in `[0, p^prec)`; requires valuation ≥ 0.
    pub fn to_biguint(&self) -> Result<BigUint> {
        if self.is_zero() {
            return Ok(BigUint::zero());
        }
        if self.val < 0 {
            return Err(LabError::invalid("scalar is not integral"));
        }
        Ok(&self.unit * self.table.pow(self.val).as_ref())
    }

    /// Residue modulo `p^k` as an integer; requires valuation ≥ 0 and k ≤ prec.
    pub fn residue(&self, k: i64) -> Result<BigUint> {
        if k > self.prec {
            return Err(LabError::precision("residue", self.prec, k));
        }
        let r = self.to_biguint()?;
        Ok(r % self.table.pow(k).as_ref())
    }

    /// Small signed representative modulo `p^k` (symmetric range).
    pub fn signed_residue(&self, k: i64) -> Result<BigInt> {
        let m = self.table.pow(k).into_owned();
        let r = self.residue(k)?;
        let half = &m >> 1u32;
        Ok(if r > half {
            BigInt::from(r) - BigInt::from(m)
        } else {
            BigInt::from(r)
        })
    }

    pub fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(LabError::invalid("inverse of zero"));
        }
        let rel = self.prec - self.val;
        let inv = unit_inverse(&self.unit, self.table.p, rel, &self.table);
        Ok(PadicScalar {
            table: self.table.clone(),
            val: -self.val,
            unit: inv,
            prec: rel - self.val,
        })
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(self * &other.inv()?)
    }

    pub fn pow(&self, mut e: u64) -> Self {
        let mut base = self.clone();
        let mut acc = self.int_like(1).lift_to(self.prec.max(1));
        if e == 0 {
            return acc;
        }
        let mut first = true;
        while e > 0 {
            if e & 1 == 1 {
                acc = if first { base.clone() } else { &acc * &base };
                first = false;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Power with a large non-negative integer exponent.
    pub fn pow_big(&self, e: &BigUint) -> Self {
        if e.is_zero() {
            return self.int_like(1);
        }
        let mut acc: Option<Self> = None;
        let bits = e.bits();
        for i in (0..bits).rev() {
            if let Some(a) = acc.as_ref() {
                acc = Some(a * a);
            }
            if e.bit(i) {
                acc = Some(match acc {
                    None => self.clone(),
                    Some(a) => &a * self,
                });
            }
        }
        acc.expect("nonzero exponent")
    }

    /// Valuation of `self - other`, capped by the shared precision.
    pub fn residual_valuation(&self, other: &Self) -> i64 {
        (self - other).valuation()
    }

    /// Rational reconstruction `a/b` with |a|, |b| ≤ sqrt(p^k / 2), if one exists.
    pub fn rational_guess(&self) -> Option<(BigInt, BigInt)> {
        if self.is_zero() {
            return Some((BigInt::zero(), BigInt::one()));
        }
        let rel = self.prec - self.val;
        let m = BigInt::from(self.table.pow(rel).into_owned());
        let r = BigInt::from(self.unit.clone());
        let (a, b) = rational_reconstruct(&r, &m)?;
        let pk = BigInt::from(self.table.pow(self.val.abs()).into_owned());
        Some(if self.val >= 0 {
            reduce_fraction(a * pk, b)
        } else {
            reduce_fraction(a, b * pk)
        })
    }
}

fn reduce_fraction(a: BigInt, b: BigInt) -> (BigInt, BigInt) {
    let g = a.gcd(&b);
    let (mut a, mut b) = (a / &g, b / &g);
    if b.is_negative() {
        a = -a;
        b = -b;
    }
    (a, b)
}

fn rational_reconstruct(r: &BigInt, m: &BigInt) -> Option<(BigInt, BigInt)> {
    // Wang's algorithm: half-extended Euclid on (m, r).
    let bound = (m / BigInt::from(2)).sqrt();
    let (mut r0, mut r1) = (m.clone(), r.mod_floor(m));
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
    while r1 > bound {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        let t2 = &t0 - &q * &t1;
        r0 = std::mem::replace(&mut r1, r2);
        t0 = std::mem::replace(&mut t1, t2);
    }
    if t1.abs() > bound || t1.is_zero() {
        return None;
    }
    if !r1.gcd(&t1).is_one() {
        return None;
    }
    Some((r1, t1))
}

/// Inverse of a unit modulo `p^k` by Newton doubling from the inverse mod p.
fn unit_inverse(u: &BigUint, p: u32, k: i64, table: &PowerTable) -> BigUint {
    let u0 = (u % p).to_u64().expect("small residue");
    // inverse mod p via Fermat
    let mut x = BigUint::from(mod_pow_u64(u0, (p - 2) as u64, p as u64));
    let mut have = 1i64;
    while have < k {
        have = (2 * have).min(k);
        let m = table.pow(have);
        let ux = (u * &x) % m.as_ref();
        // x <- x (2 - u x)
        let two = BigUint::from(2u32) + m.as_ref();
        let corr = (two - ux) % m.as_ref();
        x = (x * corr) % m.as_ref();
    }
    x % table.pow(k).as_ref()
}

fn mod_pow_u64(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = (acc as u128 * b as u128 % m as u128) as u64;
        }
        b = (b as u128 * b as u128 % m as u128) as u64;
        e >>= 1;
    }
    acc
}

impl<'a> Add<&'a PadicScalar> for &'a PadicScalar {
    type Output = PadicScalar;
    fn add(self, rhs: &'a PadicScalar) -> PadicScalar {
        let prec = self.prec.min(rhs.prec);
        if rhs.is_zero() || rhs.val >= prec {
            return self.truncate(prec);
        }
        if self.is_zero() || self.val >= prec {
            return rhs.truncate(prec);
        }
        let table = &self.table;
        let v = self.val.min(rhs.val);
        let m = table.pow(prec - v);
        let a = if self.val > v {
            &self.unit * table.pow(self.val - v).as_ref()
        } else {
            self.unit.clone()
        };
        let b = if rhs.val > v {
            &rhs.unit * table.pow(rhs.val - v).as_ref()
        } else {
            rhs.unit.clone()
        };
        let mut s = a + b;
        if s >= *m {
            s %= m.as_ref();
        }
        PadicScalar::from_residue(table.clone(), v, s, prec)
    }
}

impl Neg for &PadicScalar {
    type Output = PadicScalar;
    fn neg(self) -> PadicScalar {
        if self.is_zero() {
            return self.clone();
        }
        let m = self.table.pow(self.prec - self.val);
        PadicScalar {
            table: self.table.clone(),
            val: self.val,
            unit: m.as_ref() - &self.unit,
            prec: self.prec,
        }
    }
}

impl Neg for PadicScalar {
    type Output = PadicScalar;
    fn neg(self) -> PadicScalar {
        -&self
    }
}

impl<'a> Sub<&'a PadicScalar> for &'a PadicScalar {
    type Output = PadicScalar;
    fn sub(self, rhs: &'a PadicScalar) -> PadicScalar {
        self + &(-rhs)
    }
}

impl<'a> Mul<&'a PadicScalar> for &'a PadicScalar {
    type Output = PadicScalar;
    fn mul(self, rhs: &'a PadicScalar) -> PadicScalar {
        let prec = (self.val + rhs.prec).min(rhs.val + self.prec);
        if self.is_zero() || rhs.is_zero() {
            return PadicScalar::zero_with(self.table.clone(), prec);
        }
        let val = self.val + rhs.val;
        if val >= prec {
            return PadicScalar::zero_with(self.table.clone(), prec);
        }
        let m = self.table.pow(prec - val);
        let u = (&self.unit * &rhs.unit) % m.as_ref();
        PadicScalar {
            table: self.table.clone(),
            val,
            unit: u,
            prec,
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $f:ident) => {
        impl $tr<PadicScalar> for PadicScalar {
            type Output = PadicScalar;
            fn $f(self, rhs: PadicScalar) -> PadicScalar {
                (&self).$f(&rhs)
            }
        }
        impl<'a> $tr<&'a PadicScalar> for PadicScalar {
            type Output = PadicScalar;
            fn $f(self, rhs: &'a PadicScalar) -> PadicScalar {
                (&self).$f(rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl fmt::Display for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.table.p;
        if self.is_zero() {
            return write!(f, "O({p}^{})", self.prec);
        }
        match self.rational_guess() {
            Some((a, b)) if b.is_one() => write!(f, "{a} + O({p}^{})", self.prec),
            Some((a, b)) => write!(f, "{a}/{b} + O({p}^{})", self.prec),
            None => write!(f, "{p}^{}*{} + O({p}^{})", self.val, self.unit, self.prec),
        }
    }
}

impl fmt::Debug for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Teichmüller lift of `a mod p` at the context precision.
pub fn teichmuller(a: i64, ctx: &PrimeContext) -> Result<PadicScalar> {
    let p = ctx.p() as i64;
    if a.rem_euclid(p) == 0 {
        return Err(LabError::invalid(format!("{a} is divisible by {p}")));
    }
    let n = ctx.prec();
    let m = ctx.table().pow(n).into_owned();
    let base = BigUint::from(a.rem_euclid(p) as u64);
    // a^(p^(N-1)) is the fixed point of x -> x^p modulo p^N
    let e = ctx.table().pow(n - 1).into_owned();
    let w = base.modpow(&e, &m);
    Ok(PadicScalar::from_residue(ctx.table().clone(), 0, w, n))
}

/// Splits a nonzero scalar as `p^v * ω * u` and returns `(v, ω, u)` with
/// `u ≡ 1 mod p`.
pub fn decompose_unit(x: &PadicScalar) -> Result<(i64, PadicScalar, PadicScalar)> {
    if x.is_zero() {
        return Err(LabError::invalid("zero has no unit decomposition"));
    }
    let v = x.valuation();
    let unit = x.shift(-v);
    let ctx = PrimeContext {
        p: x.p(),
        prec: unit.precision(),
        table: x.table.clone(),
    };
    let a = (&unit.unit % x.p()).to_i64().expect("small residue");
    let w = teichmuller(a, &ctx)?;
    let u = unit.div(&w)?;
    Ok((v, w, u))
}

/// log(1 + h) for v(h) ≥ 1, returned at absolute precision `target`.
fn log1p_series(h: &PadicScalar, target: i64) -> PadicScalar {
    let vh = h.valuation();
    if h.is_zero() {
        return h.zero_like().at_prec(target);
    }
    let p = h.p() as f64;
    let guard = ((target as f64).ln() / p.ln()).ceil() as i64 + 4;
    let h = h.at_prec(target + guard);
    let mut acc = h.zero_like();
    let mut pw = h.clone();
    let mut k = 1i64;
    loop {
        let vk = (k as f64).ln() / p.ln();
        if (k * vh) as f64 - vk.floor() >= (target + 1) as f64 && k > 2 {
            break;
        }
        let term = pw.div(&pw.exact_int_like(k)).expect("nonzero k");
        acc = if k % 2 == 1 {
            &acc + &term
        } else {
            &acc - &term
        };
        pw = &pw * &h;
        k += 1;
    }
    acc.truncate(target)
}

/// The Iwasawa logarithm on Q_p^× (log_p(p) = 0, torsion killed).
pub fn iwasawa_log_scalar(x: &PadicScalar) -> Result<PadicScalar> {
    if x.is_zero() {
        return Err(LabError::invalid("log of zero"));
    }
    let v = x.valuation();
    let unit = x.shift(-v);
    let rel = unit.precision();
    // u^(p-1) ≡ 1 mod p; log(u) = log(u^(p-1)) / (p-1)
    let p = x.p() as u64;
    let up = unit.pow(p - 1);
    let h = &up - &up.int_like(1);
    if h.valuation() < 1 {
        return Err(LabError::property("u^(p-1) is not a principal unit"));
    }
    let l = log1p_series(&h, rel);
    l.div(&l.int_like((p - 1) as i64))
}

/// exp(x) for v(x) ≥ 1, at the precision of `x`.
pub fn exp_scalar(x: &PadicScalar) -> Result<PadicScalar> {
    if x.valuation() < 1 {
        return Err(LabError::invalid("exp outside its disc of convergence"));
    }
    let target = x.precision();
    let p = x.p() as i64;
    // v(k!) ≤ k/(p-1): guard digits cover the factorial loss at the cut
    let slope = x.valuation() as f64 - 1.0 / (p as f64 - 1.0);
    let terms = ((target as f64 + 2.0) / slope).ceil() as i64 + 2;
    let guard = terms / (p - 1) + 2;
    let xl = x.at_prec(target + guard);
    let mut acc = xl.int_like(1);
    let mut term = xl.int_like(1);
    for k in 1..=terms {
        term = (&term * &xl).div(&xl.exact_int_like(k))?;
        acc = &acc + &term;
    }
    Ok(acc.truncate(target))
}

/// Newton iteration for a root of a power series near `x0`.
pub fn hensel_root(f: &crate::series::TruncatedSeries, x0: &PadicScalar) -> Result<PadicScalar> {
    let df = f.derivative();
    let target = x0.precision();
    let fx = f.eval_scalar(x0)?;
    let dfx = df.eval_scalar(x0)?;
    if fx.is_zero() {
        return Ok(x0.clone());
    }
    if dfx.is_zero() || fx.valuation() <= 2 * dfx.valuation() {
        return Err(LabError::NoConvergence(format!(
            "Hensel criterion fails: v(f(x0)) = {}, v(f'(x0)) = {}",
            fx.valuation(),
            dfx.valuation()
        )));
    }
    let mut x = x0.clone();
    for _ in 0..128 {
        let fx = f.eval_scalar(&x)?;
        if fx.valuation() >= target {
            return Ok(x.truncate(target));
        }
        let dfx = df.eval_scalar(&x)?;
        let step = fx.div(&dfx)?;
        x = (&x - &step).at_prec(target);
    }
    Err(LabError::NoConvergence(
        "Newton iteration did not reach precision".into(),
    ))
}

/// Truncated product of two coefficient sequences.
///
/// Coefficients are accumulated as exact integers and reduced once per
/// output slot; the precision of slot `k` is the minimum over all pairs
/// `i + j = k` of `min(v_i + N_j, v_j + N_i)`.
pub(crate) fn convolve(a: &[PadicScalar], b: &[PadicScalar], out_len: usize) -> Vec<PadicScalar> {
    let table = match a.first().or(b.first()) {
        Some(x) => x.table.clone(),
        None => return Vec::new(),
    };
    let min_val = |s: &[PadicScalar]| s.iter().filter(|x| !x.is_zero()).map(|x| x.val).min();
    let (va, vb) = match (min_val(a), min_val(b)) {
        (Some(va), Some(vb)) => (va, vb),
        _ => {
            return (0..out_len)
                .map(|k| {
                    let prec = slot_precision(a, b, k);
                    PadicScalar::zero_with(table.clone(), prec)
                })
                .collect()
        }
    };
    let lift = |s: &[PadicScalar], v0: i64| -> Vec<Option<BigUint>> {
        s.iter()
            .map(|x| {
                if x.is_zero() {
                    None
                } else {
                    Some(&x.unit * table.pow(x.val - v0).as_ref())
                }
            })
            .collect()
    };
    let la = lift(a, va);
    let lb = lift(b, vb);
    let mut out = Vec::with_capacity(out_len);
    for k in 0..out_len {
        let prec = slot_precision(a, b, k);
        let mut acc = BigUint::zero();
        let lo = k.saturating_sub(b.len().saturating_sub(1));
        let hi = k.min(a.len().saturating_sub(1));
        if lo <= hi {
            for i in lo..=hi {
                if let (Some(x), Some(y)) = (&la[i], &lb[k - i]) {
                    acc += x * y;
                }
            }
        }
        out.push(PadicScalar::from_parts(table.clone(), va + vb, acc, prec));
    }
    out
}

fn slot_precision(a: &[PadicScalar], b: &[PadicScalar], k: usize) -> i64 {
    let mut prec = i64::MAX;
    let lo = k.saturating_sub(b.len().saturating_sub(1));
    let hi = k.min(a.len().saturating_sub(1));
    if lo <= hi && !a.is_empty() && !b.is_empty() {
        for i in lo..=hi {
            let (x, y) = (&a[i], &b[k - i]);
            prec = prec.min(x.val + y.prec).min(y.val + x.prec);
        }
    }
    if prec == i64::MAX {
        // slot beyond both supports: exact zero at the inputs' precision
        prec = a.iter().chain(b.iter()).map(|x| x.prec).min().unwrap_or(0);
    }
    prec
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(p: u32) -> PrimeContext {
        PrimeContext::new(p, 30).unwrap()
    }

    #[test]
    fn rejects_two_and_composites() {
        assert!(PrimeContext::new(2, 30).is_err());
        assert!(PrimeContext::new(9, 30).is_err());
        assert!(PrimeContext::new(3, 3).is_err());
    }

    #[test]
    fn arithmetic_tracks_precision() {
        let c = ctx(3);
        let a = c.int(9);
        assert_eq!(a.valuation(), 2);
        let b = a.div(&c.int(27)).unwrap();
        assert_eq!(b.valuation(), -1);
        // 27 + O(3^30) has relative precision 27, so 9/27 is known mod 3^26
        assert_eq!(b.precision(), 26);
        let s = &c.int(1) + &c.int(-1);
        assert!(s.is_zero());
        let half = c.ratio(1, 2).unwrap();
        assert_eq!((&half * &c.int(2)).residual_valuation(&c.one()), 30);
    }

    #[test]
    fn teichmuller_examples() {
        assert_eq!(teichmuller(1, &ctx(5)).unwrap(), ctx(5).one());
        let w = teichmuller(2, &ctx(5)).unwrap();
        assert_eq!(w.residue(2).unwrap(), BigUint::from(7u32));
        assert_eq!(w.pow(4).residual_valuation(&ctx(5).one()), 30);
        let w3 = teichmuller(2, &ctx(3)).unwrap();
        assert_eq!(w3, ctx(3).int(-1));
        assert!(teichmuller(10, &ctx(5)).is_err());
    }

    #[test]
    fn teichmuller_is_multiplicative() {
        let c = ctx(7);
        for a in 1..7 {
            for b in 1..7 {
                let lhs = &teichmuller(a, &c).unwrap() * &teichmuller(b, &c).unwrap();
                let rhs = teichmuller((a * b) % 7, &c).unwrap();
                assert_eq!(lhs.residual_valuation(&rhs), 30);
            }
        }
    }

    #[test]
    fn log_examples() {
        let c = ctx(3);
        assert!(iwasawa_log_scalar(&c.one()).unwrap().is_zero());
        assert!(iwasawa_log_scalar(&c.int(3)).unwrap().is_zero());
        let l4 = iwasawa_log_scalar(&c.int(4)).unwrap();
        assert_eq!(l4.residue(3).unwrap(), BigUint::from(21u32));
        assert!(iwasawa_log_scalar(&c.zero()).is_err());
        // torsion dies
        assert!(iwasawa_log_scalar(&c.int(-1)).unwrap().is_zero());
    }

    #[test]
    fn log_is_additive_and_exp_inverts() {
        let c = ctx(5);
        let x = c.int(6);
        let y = c.int(11);
        let lhs = iwasawa_log_scalar(&(&x * &y)).unwrap();
        let rhs = &iwasawa_log_scalar(&x).unwrap() + &iwasawa_log_scalar(&y).unwrap();
        assert!(lhs.residual_valuation(&rhs) >= 30);
        let l = iwasawa_log_scalar(&x).unwrap();
        assert!(exp_scalar(&l).unwrap().residual_valuation(&x) >= 29);
    }

    #[test]
    fn rational_reconstruction() {
        let c = ctx(3);
        let x = c.ratio(-5, 6).unwrap();
        let (a, b) = x.rational_guess().unwrap();
        assert_eq!((a, b), (BigInt::from(-5), BigInt::from(6)));
        assert_eq!(format!("{}", c.ratio(-1, 2).unwrap()), "-1/2 + O(3^30)");
    }
}
