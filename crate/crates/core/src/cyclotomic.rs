//! Arithmetic in `K_n = Q_p(ζ)` with `ζ` a primitive `p^(n+1)`-th root of
//! unity, the Galois action `ζ ↦ ζ^a`, traces and norms down the tower,
//! and the cyclotomic Z_p-layer `k_n` as the subfield fixed by the
//! Teichmüller subgroup.
//!
//! Elements are coefficient vectors over the power basis `ζ^0..ζ^(d-1)`,
//! `d = p^n (p-1)`. Reduction uses `Σ_{t<p} ζ^(r + t p^n) = 0`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use crate::error::{LabError, Result};
use crate::padic::{convolve, iwasawa_log_scalar, teichmuller, PadicScalar, PrimeContext};
use crate::series::TruncatedSeries;

/// Rational valuation normalized by `v(p) = 1`.
pub type Valuation = Ratio<i64>;

pub struct CycloField {
    ctx: PrimeContext,
    layer: u32,
    pn: usize,
    order: usize,
    degree: usize,
}

impl fmt::Debug for CycloField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Q_{}(zeta_{}) [degree {}]",
            self.ctx.p(),
            self.order,
            self.degree
        )
    }
}

impl CycloField {
    /// `K_n` for layer `n` (roots of unity of order `p^(n+1)`).
    pub fn new(ctx: &PrimeContext, layer: u32) -> Arc<Self> {
        let p = ctx.p() as usize;
        let pn = p.pow(layer);
        Arc::new(CycloField {
            ctx: ctx.clone(),
            layer,
            pn,
            order: pn * p,
            degree: pn * (p - 1),
        })
    }

    pub fn ctx(&self) -> &PrimeContext {
        &self.ctx
    }

    pub fn p(&self) -> u32 {
        self.ctx.p()
    }

    pub fn layer(&self) -> u32 {
        self.layer
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Order of ζ, `p^(n+1)`.
    pub fn root_order(&self) -> usize {
        self.order
    }

    /// `p^n`, the degree of `k_n` over Q_p.
    pub fn layer_degree(&self) -> usize {
        self.pn
    }

    /// Folds a dense vector indexed by exponents into the power basis.
    fn reduce(&self, mut dense: Vec<PadicScalar>) -> Vec<PadicScalar> {
        let d = self.degree;
        let p = self.ctx.p() as usize;
        for j in (d..dense.len()).rev() {
            let c = dense[j].clone();
            if c.is_zero() && c.precision() >= self.ctx.prec() {
                continue;
            }
            let r = j - (p - 1) * self.pn;
            for t in 0..(p - 1) {
                let idx = r + t * self.pn;
                dense[idx] = &dense[idx] - &c;
            }
        }
        dense.truncate(d);
        dense
    }
}

#[derive(Clone)]
pub struct CycloElement {
    field: Arc<CycloField>,
    coords: Vec<PadicScalar>,
}

impl PartialEq for CycloElement {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.field, &other.field) && self.coords == other.coords
    }
}

impl fmt::Debug for CycloElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .coords
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| format!("({c})z^{i}"))
            .collect();
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

impl CycloElement {
    pub fn zero(field: &Arc<CycloField>) -> Self {
        CycloElement {
            field: field.clone(),
            coords: vec![field.ctx.zero(); field.degree],
        }
    }

    pub fn from_scalar(field: &Arc<CycloField>, s: &PadicScalar) -> Self {
        let mut x = Self::zero(field);
        x.coords[0] = s.clone();
        x
    }

    pub fn one(field: &Arc<CycloField>) -> Self {
        Self::from_scalar(field, &field.ctx.one())
    }

    /// `ζ^k` for any integer `k`.
    pub fn zeta_pow(field: &Arc<CycloField>, k: i64) -> Self {
        let e = k.rem_euclid(field.order as i64) as usize;
        let mut dense = vec![field.ctx.zero(); field.order];
        dense[e] = field.ctx.one();
        CycloElement {
            field: field.clone(),
            coords: field.reduce(dense),
        }
    }

    pub fn from_coords(field: &Arc<CycloField>, coords: Vec<PadicScalar>) -> Result<Self> {
        if coords.len() != field.degree {
            return Err(LabError::invalid("coordinate vector has wrong length"));
        }
        Ok(CycloElement {
            field: field.clone(),
            coords,
        })
    }

    pub fn field(&self) -> &Arc<CycloField> {
        &self.field
    }

    pub fn coords(&self) -> &[PadicScalar] {
        &self.coords
    }

    /// Multiplies by `p^k`.
    pub fn shift(&self, k: i64) -> Self {
        CycloElement {
            field: self.field.clone(),
            coords: self.coords.iter().map(|c| c.shift(k)).collect(),
        }
    }

    pub fn scale(&self, s: &PadicScalar) -> Self {
        CycloElement {
            field: self.field.clone(),
            coords: self.coords.iter().map(|c| c * s).collect(),
        }
    }

    /// Minimal absolute precision over the coordinates.
    pub fn precision(&self) -> i64 {
        self.coords.iter().map(|c| c.precision()).min().unwrap_or(0)
    }

    pub fn truncate(&self, prec: i64) -> Self {
        CycloElement {
            field: self.field.clone(),
            coords: self.coords.iter().map(|c| c.truncate(prec)).collect(),
        }
    }

    /// See [`PadicScalar::lift_to`]; pads coordinate representatives.
    pub fn lift_to(&self, prec: i64) -> Self {
        CycloElement {
            field: self.field.clone(),
            coords: self.coords.iter().map(|c| c.lift_to(prec)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    /// Smallest coordinate valuation (a lower bound for the true valuation).
    pub fn min_coord_valuation(&self) -> i64 {
        self.coords.iter().map(|c| c.valuation()).min().unwrap_or(0)
    }

    /// The scalar this element equals, if all non-constant coordinates vanish.
    pub fn as_scalar(&self) -> Option<PadicScalar> {
        if self.coords[1..].iter().all(|c| c.is_zero()) {
            Some(self.coords[0].clone())
        } else {
            None
        }
    }

    /// Exact valuation via the basis `(ζ-1)^j`, in which the valuations of
    /// the terms are pairwise distinct modulo Z.
    pub fn valuation(&self) -> Valuation {
        let d = self.field.degree;
        // b_j = Σ_i c_i C(i, j)
        let mut best: Option<Valuation> = None;
        let mut binom_row: Vec<BigUint> = vec![BigUint::from(1u32)];
        let mut rows: Vec<Vec<BigUint>> = Vec::with_capacity(d);
        for i in 0..d {
            if i > 0 {
                let mut next = vec![BigUint::from(1u32); i + 1];
                for j in 1..i {
                    next[j] = &binom_row[j - 1] + &binom_row[j];
                }
                binom_row = next;
            }
            rows.push(binom_row.clone());
        }
        for j in 0..d {
            let mut b = self.field.ctx.zero().lift_to(self.precision());
            for (i, row) in rows.iter().enumerate().skip(j) {
                let c = &self.coords[i];
                let k = self
                    .field
                    .ctx
                    .with_prec(c.precision())
                    .from_bigint(&row[j].clone().into());
                b = &b + &(c * &k);
            }
            let v = Valuation::new(b.valuation() * d as i64 + j as i64, d as i64);
            best = Some(match best {
                None => v,
                Some(w) if v < w => v,
                Some(w) => w,
            });
        }
        best.unwrap_or_else(Valuation::zero)
    }

    pub fn pow(&self, mut e: u64) -> Self {
        let mut acc = CycloElement::one(&self.field).lift_to(self.precision());
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    pub fn pow_big(&self, e: &BigUint) -> Self {
        let mut acc = CycloElement::one(&self.field).lift_to(self.precision());
        for i in (0..e.bits()).rev() {
            acc = &acc * &acc;
            if e.bit(i) {
                acc = &acc * self;
            }
        }
        acc
    }

    /// `σ_a : ζ ↦ ζ^a`.
    pub fn galois(&self, a: u64) -> Self {
        let field = &self.field;
        let n = field.order as u64;
        let mut dense = vec![field.ctx.zero().lift_to(self.precision()); field.order];
        for (i, c) in self.coords.iter().enumerate() {
            let e = ((i as u64) * (a % n) % n) as usize;
            dense[e] = &dense[e] + c;
        }
        CycloElement {
            field: field.clone(),
            coords: field.reduce(dense),
        }
    }

    /// Multiplicative inverse as `∏_{a≠1} σ_a(x) / N(x)`.
    pub fn inverse(&self) -> Result<Self> {
        let field = &self.field;
        let mut cofactor = CycloElement::one(field).lift_to(self.precision());
        for a in unit_residues(field.order as u64) {
            if a != 1 {
                cofactor = &cofactor * &self.galois(a);
            }
        }
        let norm = &cofactor * self;
        let s = norm
            .as_scalar()
            .ok_or_else(|| LabError::property("norm is not a scalar"))?;
        if s.is_zero() {
            return Err(LabError::invalid("inverse of zero (at working precision)"));
        }
        Ok(cofactor.scale(&s.inv()?))
    }

    /// Elementwise agreement: minimal valuation of `self - other`.
    pub fn residual_valuation(&self, other: &Self) -> i64 {
        (self - other).min_coord_valuation()
    }

    /// Image under the inclusion `K_n ⊂ K_m` for `m ≥ n`.
    pub fn embed(&self, target: &Arc<CycloField>) -> Result<Self> {
        if target.layer < self.field.layer || target.ctx.p() != self.field.ctx.p() {
            return Err(LabError::invalid("can only embed into a higher layer"));
        }
        let step = target.order / self.field.order;
        let mut x = CycloElement::zero(target).lift_to(self.precision());
        for (i, c) in self.coords.iter().enumerate() {
            x.coords[i * step] = c.clone();
        }
        Ok(x)
    }

    /// Reads an element of `K_m` (m ≤ n) lying inside `K_n` back in `K_m`.
    pub fn restrict(&self, target: &Arc<CycloField>) -> Result<Self> {
        if target.layer > self.field.layer {
            return Err(LabError::invalid("cannot restrict to a higher layer"));
        }
        let step = self.field.order / target.order;
        let mut out = CycloElement::zero(target).lift_to(self.precision());
        for (i, c) in self.coords.iter().enumerate() {
            if i % step == 0 {
                out.coords[i / step] = c.clone();
            } else if !c.is_zero() {
                return Err(LabError::invalid(format!(
                    "element does not lie in layer {} (coordinate {i} has valuation {})",
                    target.layer,
                    c.valuation()
                )));
            }
        }
        Ok(out)
    }
}

impl<'a> Add<&'a CycloElement> for &'a CycloElement {
    type Output = CycloElement;
    fn add(self, rhs: &'a CycloElement) -> CycloElement {
        CycloElement {
            field: self.field.clone(),
            coords: self
                .coords
                .iter()
                .zip(&rhs.coords)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl<'a> Sub<&'a CycloElement> for &'a CycloElement {
    type Output = CycloElement;
    fn sub(self, rhs: &'a CycloElement) -> CycloElement {
        CycloElement {
            field: self.field.clone(),
            coords: self
                .coords
                .iter()
                .zip(&rhs.coords)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Neg for &CycloElement {
    type Output = CycloElement;
    fn neg(self) -> CycloElement {
        CycloElement {
            field: self.field.clone(),
            coords: self.coords.iter().map(|a| -a).collect(),
        }
    }
}

impl<'a> Mul<&'a CycloElement> for &'a CycloElement {
    type Output = CycloElement;
    fn mul(self, rhs: &'a CycloElement) -> CycloElement {
        let d = self.field.degree;
        let dense = convolve(&self.coords, &rhs.coords, 2 * d - 1);
        CycloElement {
            field: self.field.clone(),
            coords: self.field.reduce(dense),
        }
    }
}

/// Residues in `[1, n)` coprime to `p` (n a power of p).
pub fn unit_residues(n: u64) -> impl Iterator<Item = u64> {
    let p = smallest_prime_factor(n);
    (1..n).filter(move |a| a % p != 0)
}

fn smallest_prime_factor(n: u64) -> u64 {
    (2..=n).find(|d| n.is_multiple_of(*d)).unwrap_or(n)
}

/// The tower `K_0 ⊂ K_1 ⊂ ... ⊂ K_{n_max}` with a chosen generator `γ` of Γ.
#[derive(Debug, Clone)]
pub struct CycloTower {
    ctx: PrimeContext,
    kappa_gamma: i64,
    fields: Vec<Arc<CycloField>>,
}

/// A Galois element `σ_a` at layer `n`, with its factorization
/// `a = ω(a) · κ(γ)^i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GaloisElement {
    pub layer: u32,
    pub exponent: u64,
    pub delta_part: u64,
    pub gamma_index: u64,
}

impl CycloTower {
    pub fn new(ctx: &PrimeContext, n_max: u32, kappa_gamma: i64) -> Result<Self> {
        let p = ctx.p() as i64;
        if kappa_gamma.rem_euclid(p) != 1 || kappa_gamma.rem_euclid(p * p) == 1 {
            return Err(LabError::Config(format!(
                "kappa(gamma) = {kappa_gamma} does not generate 1 + pZ_p"
            )));
        }
        let fields = (0..=n_max).map(|n| CycloField::new(ctx, n)).collect();
        Ok(CycloTower {
            ctx: ctx.clone(),
            kappa_gamma,
            fields,
        })
    }

    pub fn ctx(&self) -> &PrimeContext {
        &self.ctx
    }

    pub fn p(&self) -> u32 {
        self.ctx.p()
    }

    pub fn n_max(&self) -> u32 {
        self.fields.len() as u32 - 1
    }

    pub fn kappa_gamma(&self) -> i64 {
        self.kappa_gamma
    }

    pub fn field(&self, n: u32) -> &Arc<CycloField> {
        &self.fields[n as usize]
    }

    /// κ(γ)^i modulo `p^(n+1)`.
    pub fn gamma_power(&self, n: u32, i: u64) -> u64 {
        let m = self.field(n).order as u64;
        let mut acc = 1u64;
        let g = self.kappa_gamma.rem_euclid(m as i64) as u64;
        for _ in 0..(i % self.field(n).pn as u64) {
            acc = acc * g % m;
        }
        acc
    }

    /// The exponents of Γ_n in order `γ^0, γ^1, ...`.
    pub fn gamma_exponents(&self, n: u32) -> Vec<u64> {
        let m = self.field(n).order as u64;
        let g = self.kappa_gamma.rem_euclid(m as i64) as u64;
        let mut out = Vec::with_capacity(self.field(n).pn);
        let mut acc = 1u64;
        for _ in 0..self.field(n).pn {
            out.push(acc);
            acc = acc * g % m;
        }
        out
    }

    /// The Teichmüller exponents `ω(b) mod p^(n+1)`, `b = 1..p-1`.
    pub fn delta_exponents(&self, n: u32) -> Vec<u64> {
        let pc = self.ctx.with_prec(n as i64 + 2);
        let m = self.field(n).order as u64;
        (1..self.p() as i64)
            .map(|b| {
                let w = teichmuller(b, &pc).expect("b is a unit");
                (w.residue(n as i64 + 1)
                    .expect("integral")
                    .to_u64()
                    .expect("small"))
                    % m
            })
            .collect()
    }

    /// Factors `σ_a` into its Δ-part and the index `i` with Γ-part `γ^i`,
    /// the index being `log_p⟨a⟩ / log_p κ(γ) mod p^n`.
    pub fn galois_element(&self, n: u32, a: u64) -> Result<GaloisElement> {
        let p = self.p() as u64;
        let m = self.field(n).order as u64;
        if a.is_multiple_of(p) {
            return Err(LabError::invalid(format!("{a} is not a unit mod {m}")));
        }
        let a = a % m;
        let prec = n as i64 + 4;
        let pc = self.ctx.with_prec(prec);
        let w = teichmuller((a % p) as i64, &pc)?;
        let delta_part = w.residue(n as i64 + 1)?.to_u64().expect("small") % m;
        let gamma_index = if n == 0 {
            0
        } else {
            let la = iwasawa_log_scalar(&pc.int(a as i64))?;
            let lg = iwasawa_log_scalar(&pc.int(self.kappa_gamma))?;
            let ratio = la.div(&lg)?;
            ratio.residue(n as i64)?.to_u64().expect("small")
        };
        Ok(GaloisElement {
            layer: n,
            exponent: a,
            delta_part,
            gamma_index,
        })
    }

    pub fn galois_apply(&self, sigma: &GaloisElement, x: &CycloElement) -> CycloElement {
        x.galois(sigma.exponent)
    }

    /// Whether `x` is fixed by the Teichmüller subgroup Δ (i.e. lies in `k_n`).
    pub fn is_delta_fixed(&self, x: &CycloElement, tolerance: i64) -> bool {
        let n = x.field.layer;
        self.delta_exponents(n)
            .into_iter()
            .all(|d| x.galois(d).residual_valuation(x) >= tolerance)
    }

    /// Average over Δ, the projection `K_n → k_n`.
    pub fn delta_average(&self, x: &CycloElement) -> Result<CycloElement> {
        let n = x.field.layer;
        let mut acc = CycloElement::zero(&x.field).lift_to(x.precision());
        let ds = self.delta_exponents(n);
        for d in &ds {
            acc = &acc + &x.galois(*d);
        }
        let inv = x.field.ctx.int(ds.len() as i64).inv()?;
        Ok(acc.scale(&inv))
    }

    /// Sum of the conjugates of `x` over `Gal(K_n / K_m)`, read in `K_m`.
    ///
    /// For `x ∈ k_n` this is also `Tr_{k_n/k_m}(x)`.
    pub fn trace_to_level(&self, x: &CycloElement, m: u32) -> Result<CycloElement> {
        let n = x.field.layer;
        if m > n {
            return Err(LabError::invalid(format!(
                "trace from level {n} to level {m}"
            )));
        }
        let step = self.field(m).order as u64;
        let top = x.field.order as u64;
        let mut acc = CycloElement::zero(&x.field).lift_to(x.precision());
        let mut a = 1u64;
        while a < top {
            acc = &acc + &x.galois(a);
            a += step;
        }
        acc.restrict(self.field(m))
    }

    /// Product of the conjugates of `x` over `Gal(K_n / K_m)`, read in `K_m`.
    pub fn norm_to_level(&self, x: &CycloElement, m: u32) -> Result<CycloElement> {
        let n = x.field.layer;
        if m > n {
            return Err(LabError::invalid(format!(
                "norm from level {n} to level {m}"
            )));
        }
        let step = self.field(m).order as u64;
        let top = x.field.order as u64;
        let mut acc = CycloElement::one(&x.field).lift_to(x.precision());
        let mut a = 1u64;
        while a < top {
            acc = &acc * &x.galois(a);
            a += step;
        }
        acc.restrict(self.field(m))
    }

    /// `Tr_{K_n/Q_p}`.
    pub fn absolute_trace(&self, x: &CycloElement) -> Result<PadicScalar> {
        let mut acc = CycloElement::zero(&x.field).lift_to(x.precision());
        for a in unit_residues(x.field.order as u64) {
            acc = &acc + &x.galois(a);
        }
        acc.as_scalar()
            .ok_or_else(|| LabError::property("absolute trace is not a scalar"))
    }

    /// `N_{K_n/Q_p}`.
    pub fn absolute_norm(&self, x: &CycloElement) -> Result<PadicScalar> {
        let mut acc = CycloElement::one(&x.field).lift_to(x.precision());
        for a in unit_residues(x.field.order as u64) {
            acc = &acc * &x.galois(a);
        }
        acc.as_scalar()
            .ok_or_else(|| LabError::property("absolute norm is not a scalar"))
    }

    /// `Tr_{k_n/Q_p}` for `x ∈ k_n`.
    pub fn layer_trace(&self, x: &CycloElement) -> Result<PadicScalar> {
        self.trace_to_level(x, 0)?
            .as_scalar()
            .ok_or_else(|| LabError::property("element is not Δ-fixed: trace is not in Q_p"))
    }

    /// `N_{k_n/Q_p}` for `x ∈ k_n`.
    pub fn layer_norm(&self, x: &CycloElement) -> Result<PadicScalar> {
        self.norm_to_level(x, 0)?
            .as_scalar()
            .ok_or_else(|| LabError::property("element is not Δ-fixed: norm is not in Q_p"))
    }

    /// `π_n = ∏_{δ∈Δ} (ζ^δ - 1)`, a uniformizer of `k_n`.
    pub fn uniformizer_pi(&self, n: u32) -> CycloElement {
        let field = self.field(n);
        let one = CycloElement::one(field);
        let mut acc = one.clone();
        for d in self.delta_exponents(n) {
            acc = &acc * &(&CycloElement::zeta_pow(field, d as i64) - &one);
        }
        acc
    }

    /// The Iwasawa logarithm on `K_n^×`; see [`field_log`].
    pub fn field_log(&self, x: &CycloElement) -> Result<CycloElement> {
        field_log(x)
    }

    /// See [`field_exp`].
    pub fn field_exp(&self, x: &CycloElement) -> Result<CycloElement> {
        field_exp(x)
    }

    /// `(γ - 1) y = v` in `k_n`, normalized by `Tr(y) = 0`:
    /// `y = -(1/p^n) Σ_{t<p^n} (p^n - 1 - t) γ^t(v)`.
    pub fn gamma_solve(&self, v: &CycloElement) -> Result<CycloElement> {
        let n = v.field.layer;
        let field = v.field.clone();
        let pn = field.pn as i64;
        let tr = self.layer_trace(v)?;
        let tol = v.precision() - 2;
        if tr.valuation() < tol {
            return Err(LabError::Unsolvable(format!(
                "Tr(v) = {tr} is not zero, (γ-1)y = v has no solution"
            )));
        }
        let mut acc = CycloElement::zero(&field).lift_to(v.precision());
        for (t, a) in self.gamma_exponents(n).into_iter().enumerate() {
            let w = field
                .ctx
                .with_prec(v.precision() + 2)
                .int(pn - 1 - t as i64);
            acc = &acc + &v.galois(a).scale(&w);
        }
        Ok(-&acc.shift(-(n as i64)))
    }
}

/// The Iwasawa logarithm on `K_n^×`.
///
/// `x` is brought to a principal unit `z = (x^d / p^r)^(p-1)` and then to
/// `z^(p^j)` with `v(z^(p^j) - 1) ≥ 1`; the series for `log(1+h)` is summed
/// there and divided back. Torsion and `p` are killed by construction.
pub fn field_log(x: &CycloElement) -> Result<CycloElement> {
    let field = x.field.clone();
    if x.is_zero() {
        return Err(LabError::invalid("log of zero"));
    }
    let p = field.ctx.p() as u64;
    let d = field.degree as i64;
    let v = x.valuation();
    let honest = x.precision() - v.ceil().to_integer();
    let guard = 2 * field.layer as i64 + 8;
    let xl = x.lift_to(x.precision() + guard);
    // y = x^d / p^r is a unit; r = v * d
    let r = (v * Valuation::from_integer(d)).to_integer();
    let (y, root) = if r == 0 {
        (xl, 1)
    } else {
        (xl.pow(d as u64).shift(-r), d)
    };
    let mut z = y.pow(p - 1);
    let one = CycloElement::one(&field).lift_to(z.precision());
    let mut j = 0i64;
    while (&z - &one).valuation() < Valuation::from_integer(1) {
        z = z.pow(p);
        j += 1;
        if j > 4 * field.layer as i64 + 8 {
            return Err(LabError::property("principal unit failed to approach 1"));
        }
    }
    let h = &z - &one;
    let target = z.precision();
    let vh = h.min_coord_valuation().max(1);
    let pf = p as f64;
    let mut acc = CycloElement::zero(&field).lift_to(target);
    let mut pw = h.clone();
    let mut k = 1i64;
    loop {
        let lk = (k as f64).ln() / pf.ln();
        if k > 2 && (k * vh) as f64 - lk.floor() >= target as f64 {
            break;
        }
        let inv_k = field.ctx.with_prec(target + 8).int(k).inv()?;
        let term = pw.scale(&inv_k);
        acc = if k % 2 == 1 {
            &acc + &term
        } else {
            &acc - &term
        };
        pw = &pw * &h;
        k += 1;
    }
    let denom = field
        .ctx
        .with_prec(target + 8)
        .int((p as i64 - 1) * root)
        .inv()?;
    let out = acc.scale(&denom).shift(-j);
    Ok(out.truncate(honest))
}

/// `exp(x)` for `v(x) > 1/(p-1)`.
pub fn field_exp(x: &CycloElement) -> Result<CycloElement> {
    let field = x.field.clone();
    let p = field.ctx.p() as i64;
    let v = x.valuation();
    let bound = Valuation::new(1, p - 1);
    if v <= bound {
        return Err(LabError::invalid(format!(
            "exp diverges: v(x) = {v} ≤ 1/(p-1)"
        )));
    }
    let target = x.precision();
    let slope = (v - bound).to_f64().expect("finite");
    let terms = ((target as f64 + 2.0) / slope).ceil() as i64 + 2;
    // dividing by k! costs about terms/(p-1) digits in coordinates
    let work = target + terms / (p - 1) + 4;
    let mut acc = CycloElement::one(&field).lift_to(work);
    let mut term = acc.clone();
    let xl = x.lift_to(work);
    for k in 1..=terms {
        let inv_k = field.ctx.with_prec(work).int(k).inv()?;
        term = (&term * &xl).scale(&inv_k);
        acc = &acc + &term;
    }
    Ok(acc.truncate(target))
}

/// Lower bound on the valuations of the coefficients past the truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailBound {
    /// The series is a polynomial; nothing is lost.
    Polynomial,
    /// Coefficients are integral.
    Integral,
    /// `v(f_m) ≥ -floor(log_p m)`, as for logarithms.
    LogLike,
}

/// `Σ f_m x^m` by Horner, with the result precision capped by the tail bound.
pub fn eval_series_at(
    f: &TruncatedSeries,
    x: &CycloElement,
    tail: TailBound,
    target: i64,
) -> Result<CycloElement> {
    let field = x.field.clone();
    let m = f.order();
    let vx = x.valuation();
    if vx <= Valuation::zero() {
        return Err(LabError::invalid(
            "evaluation point must have positive valuation",
        ));
    }
    let p = field.ctx.p() as f64;
    let tail_val = |deg: usize| -> f64 {
        let base = deg as f64 * vx.to_f64().expect("finite");
        match tail {
            TailBound::Polynomial => f64::INFINITY,
            TailBound::Integral => base,
            TailBound::LogLike => base - ((deg as f64).ln() / p.ln()).floor(),
        }
    };
    let cap = tail_val(m + 1);
    if cap < target as f64 {
        let per = vx.to_f64().expect("finite");
        let mut need = ((target as f64) / per).ceil() as usize;
        while tail_val(need + 1) < target as f64 {
            need += 1;
        }
        return Err(LabError::precision(
            format!("series truncated at order {m}; order {need} required"),
            cap.floor() as i64,
            target,
        ));
    }
    let mut acc = CycloElement::from_scalar(&field, f.coeff(m));
    for c in f.coeffs()[..m].iter().rev() {
        acc = &acc * x;
        acc.coords[0] = &acc.coords[0] + c;
    }
    if cap.is_finite() {
        Ok(acc.truncate(cap.floor() as i64))
    } else {
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tower(p: u32, n: u32) -> CycloTower {
        let ctx = PrimeContext::new(p, 30).unwrap();
        CycloTower::new(&ctx, n, 1 + p as i64).unwrap()
    }

    #[test]
    fn zeta_has_exact_order() {
        let t = tower(3, 1);
        let f = t.field(1);
        let z = CycloElement::zeta_pow(f, 1);
        assert!(z.pow(9).residual_valuation(&CycloElement::one(f)) >= 30);
        assert!(z.pow(3).residual_valuation(&CycloElement::one(f)) < 30);
    }

    #[test]
    fn galois_action_basics() {
        let t = tower(3, 0);
        let f = t.field(0);
        let z = CycloElement::zeta_pow(f, 1);
        assert_eq!(z.galois(1), z);
        assert_eq!(z.galois(2), CycloElement::zeta_pow(f, 2));
        let avg = &z + &z.galois(2);
        assert_eq!(avg.as_scalar().unwrap(), f.ctx().int(-1));
    }

    #[test]
    fn trace_and_norm_examples() {
        let t = tower(5, 2);
        let f0 = t.field(0);
        let z = CycloElement::zeta_pow(f0, 1);
        assert_eq!(t.absolute_trace(&z).unwrap(), f0.ctx().int(-1));
        let one = CycloElement::one(f0);
        assert_eq!(t.absolute_norm(&(&one - &z)).unwrap(), f0.ctx().int(5));
        let f2 = t.field(2);
        let tr = t.absolute_trace(&CycloElement::one(f2)).unwrap();
        assert_eq!(tr, f2.ctx().int(100));
    }

    #[test]
    fn tower_transitivity() {
        let t = tower(3, 2);
        let f2 = t.field(2);
        let x =
            &CycloElement::zeta_pow(f2, 5) + &CycloElement::zeta_pow(f2, 7).scale(&f2.ctx().int(4));
        let direct = t.trace_to_level(&x, 0).unwrap();
        let step = t
            .trace_to_level(&t.trace_to_level(&x, 1).unwrap(), 0)
            .unwrap();
        assert_eq!(direct.residual_valuation(&step), 30);
    }

    #[test]
    fn uniformizer_examples() {
        let t = tower(3, 1);
        let pi0 = t.uniformizer_pi(0);
        assert_eq!(pi0.as_scalar().unwrap(), t.ctx().int(3));
        let pi1 = t.uniformizer_pi(1);
        assert!(t.is_delta_fixed(&pi1, 30));
        assert_eq!(pi1.valuation(), Valuation::new(1, 3));
        assert_eq!(t.layer_norm(&pi1).unwrap(), t.ctx().int(3));
        let t5 = tower(5, 1);
        assert_eq!(t5.uniformizer_pi(1).valuation(), Valuation::new(1, 5));
    }

    #[test]
    fn gamma_index_matches_discrete_log() {
        let t = tower(3, 2);
        for (i, a) in t.gamma_exponents(2).into_iter().enumerate() {
            let g = t.galois_element(2, a).unwrap();
            assert_eq!(g.gamma_index, i as u64);
            assert_eq!(g.delta_part, 1);
        }
        let g = t.galois_element(2, 26).unwrap();
        assert_eq!(g.delta_part, 26);
        assert_eq!(g.gamma_index, 0);
        assert!(t.galois_element(2, 9).is_err());
    }

    #[test]
    fn log_kills_torsion_and_p() {
        let t = tower(3, 1);
        let f = t.field(1);
        let z = CycloElement::zeta_pow(f, 1);
        assert!(t.field_log(&z).unwrap().is_zero());
        assert!(t.field_log(&t.uniformizer_pi(0)).unwrap().is_zero());
        let pi1 = t.uniformizer_pi(1);
        let lp = t.field_log(&pi1).unwrap();
        // Tr ∘ log = log ∘ N, and N(π_1) = 3
        let tr = t.layer_trace(&lp).unwrap();
        assert!(tr.valuation() >= 25, "{tr}");
    }

    #[test]
    fn log_and_exp_invert() {
        let t = tower(5, 1);
        let f = t.field(1);
        let x = &CycloElement::one(f) + &t.uniformizer_pi(1).pow(2).scale(&t.ctx().int(7));
        let l = t.field_log(&x).unwrap();
        let back = t.field_exp(&l).unwrap();
        assert!(back.residual_valuation(&x) >= 25);
        assert!(t.field_exp(&t.uniformizer_pi(1)).is_err());
    }

    #[test]
    fn log_of_product_is_sum() {
        let t = tower(3, 1);
        let f = t.field(1);
        let a =
            &CycloElement::zeta_pow(f, 1) + &CycloElement::zeta_pow(f, 4).scale(&t.ctx().int(3));
        let b = &CycloElement::one(f) + &CycloElement::zeta_pow(f, 2).scale(&t.ctx().int(-1));
        let lhs = t.field_log(&(&a * &b)).unwrap();
        let rhs = &t.field_log(&a).unwrap() + &t.field_log(&b).unwrap();
        assert!(lhs.residual_valuation(&rhs) >= 24);
    }

    #[test]
    fn inverse_and_logs_of_norms() {
        let t = tower(3, 2);
        let f = t.field(2);
        let x =
            &CycloElement::zeta_pow(f, 1) + &CycloElement::zeta_pow(f, 11).scale(&t.ctx().int(2));
        let inv = x.inverse().unwrap();
        assert!((&inv * &x).residual_valuation(&CycloElement::one(f)) >= 28);
        let u = &CycloElement::one(f) + &t.uniformizer_pi(2);
        let u = t.delta_average(&u).unwrap();
        let lhs = t.layer_trace(&t.field_log(&u).unwrap()).unwrap();
        let n = t.layer_norm(&u).unwrap();
        let rhs = iwasawa_log_scalar(&n).unwrap();
        assert!(lhs.residual_valuation(&rhs) >= 24);
    }

    #[test]
    fn gamma_solve_examples() {
        let t = tower(3, 1);
        let f = t.field(1);
        let zero = CycloElement::zero(f);
        assert!(t.gamma_solve(&zero).unwrap().is_zero());
        let one = CycloElement::one(f);
        assert!(matches!(t.gamma_solve(&one), Err(LabError::Unsolvable(_))));
        let x = t.uniformizer_pi(1);
        let v = &x.galois(4) - &x;
        let y = t.gamma_solve(&v).unwrap();
        assert!((&y.galois(4) - &y).residual_valuation(&v) >= 27);
    }

    #[test]
    fn eval_series_requests_order() {
        let t = tower(3, 1);
        let f = t.field(1);
        let x = &CycloElement::zeta_pow(f, 1) - &CycloElement::one(f);
        let s = TruncatedSeries::var(t.ctx(), 10);
        let e = eval_series_at(&s, &x, TailBound::Polynomial, 30).unwrap();
        assert_eq!(e, x);
        let err = eval_series_at(&s, &x, TailBound::Integral, 30).unwrap_err();
        assert!(matches!(err, LabError::Precision { .. }));
    }
}
