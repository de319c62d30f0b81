//! The local points `c_n = ι((ζ - 1) [+]_F ε)` and the units `d_n`, their
//! norm and trace compatibilities, the closed form of `log_p d_n`, the lattice
//! generated by the conjugates of `d_n` and `u = 1 + p`, and the
//! decomposition `d_n = x_n^γ / x_n` with `x_n = π_n^e u_n`.

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::ToPrimitive;

use crate::cyclotomic::{field_log, CycloElement, CycloTower};
use crate::error::{LabError, Result};
use crate::honda::HondaData;
use crate::linalg::{index_valuation, Echelon, Row};
use crate::padic::{exp_scalar, iwasawa_log_scalar, PadicScalar};
use crate::report::Check;

/// Points at one layer.
///
/// `1 + c_n` equals `ζ · exp(S(ζ - 1)) · exp(p)` with
/// `S = ℓ - log(1+X)`, a root of unity times a Δ-fixed unit; `d_n` is the
/// Δ-fixed factor `ζ^(-1) (1 + c_n)`. The logarithm does not see the
/// difference.
#[derive(Debug, Clone)]
pub struct LevelPoints {
    pub level: u32,
    /// `ι((ζ - 1) [+]_F ε)`, valuation `1/(p^n (p-1))`.
    pub c: CycloElement,
    pub d: CycloElement,
    pub log_d: CycloElement,
}

#[derive(Debug, Clone)]
pub struct PointFamily {
    pub levels: Vec<LevelPoints>,
}

impl PointFamily {
    pub fn level(&self, n: u32) -> Result<&LevelPoints> {
        self.levels
            .get(n as usize)
            .ok_or_else(|| LabError::invalid(format!("level {n} was not built")))
    }

    pub fn n_max(&self) -> u32 {
        self.levels.len() as u32 - 1
    }
}

/// `ζ - 1` in `K_n`.
pub fn zeta_minus_one(tower: &CycloTower, n: u32) -> CycloElement {
    let f = tower.field(n);
    &CycloElement::zeta_pow(f, 1) - &CycloElement::one(f)
}

/// Builds `c_n`, `d_n` and `log_p d_n` at layer `n`.
pub fn build_level(honda: &HondaData, tower: &CycloTower, n: u32) -> Result<LevelPoints> {
    let f = tower.field(n);
    let x = zeta_minus_one(tower, n);
    let eps = CycloElement::from_scalar(f, &honda.epsilon);
    let w = honda.formal_add(&x, &eps)?;
    let c = honda.iota_at(&w)?;
    let want = Ratio::new(1, f.degree() as i64);
    if c.valuation() != want {
        return Err(LabError::property(format!(
            "v(c_{n}) = {} instead of {want}",
            c.valuation()
        )));
    }
    let d = &CycloElement::zeta_pow(f, -1) * &(&CycloElement::one(f) + &c);
    let tol = d.precision() - 2;
    if !tower.is_delta_fixed(&d, tol) {
        return Err(LabError::property(format!("d_{n} is not fixed by Δ")));
    }
    let log_d = field_log(&d)?;
    Ok(LevelPoints {
        level: n,
        c,
        d,
        log_d,
    })
}

pub fn build_points(honda: &HondaData, tower: &CycloTower, n_max: u32) -> Result<PointFamily> {
    let levels = (0..=n_max)
        .map(|n| build_level(honda, tower, n))
        .collect::<Result<_>>()?;
    Ok(PointFamily { levels })
}

/// `d_n` by the second route `ζ^(-1) exp(p) (1 + ι(ζ - 1))`, using
/// `ℓ(ε) = p` in place of the formal group addition.
pub fn d_by_exponential(honda: &HondaData, tower: &CycloTower, n: u32) -> Result<CycloElement> {
    let f = tower.field(n);
    let x = zeta_minus_one(tower, n);
    let one = CycloElement::one(f);
    let e = exp_scalar(&honda.ctx().int(tower.p() as i64))?;
    let raw = (&one + &honda.iota_at(&x)?).scale(&e);
    Ok(&CycloElement::zeta_pow(f, -1) * &raw)
}

/// `Σ_{k≤n} Σ_δ (ζ^(p^k δ) - 1) / p^k`, the value of `ℓ(ζ - 1)`.
pub fn closed_form_ell_at_zeta(tower: &CycloTower, n: u32) -> CycloElement {
    let f = tower.field(n);
    let one = CycloElement::one(f);
    let p = tower.p() as i64;
    let deltas = tower.delta_exponents(n);
    let mut acc = CycloElement::zero(f);
    let mut pk = 1i64;
    for k in 0..=n {
        let mut block = CycloElement::zero(f);
        for &d in &deltas {
            block = &block + &(&CycloElement::zeta_pow(f, pk * d as i64) - &one);
        }
        acc = &acc + &block.shift(-(k as i64));
        pk *= p;
    }
    acc
}

/// `p + Σ_{k≤n} Σ_δ (ζ^(p^k δ) - 1) / p^k`.
pub fn closed_form_log(tower: &CycloTower, n: u32) -> CycloElement {
    let f = tower.field(n);
    let p = tower.ctx().int(tower.p() as i64);
    &CycloElement::from_scalar(f, &p) + &closed_form_ell_at_zeta(tower, n)
}

/// Norm and trace compatibility of the family, plus `d_0 = 1`.
pub fn verify_norm_tower(fam: &PointFamily, tower: &CycloTower, threshold: i64) -> Vec<Check> {
    let mut out = Vec::new();
    const ANCHOR: &str = "norm-compatible-points";
    if let Ok(l0) = fam.level(0) {
        let one = CycloElement::one(tower.field(0));
        let r = l0.d.residual_valuation(&one);
        out.push(Check::measured(
            "points.d0-is-one",
            ANCHOR,
            r,
            tower.ctx().prec(),
            "d_0 = 1",
        ));
    }
    for n in 1..=fam.n_max() {
        let name = format!("points.norm-tower.n{n}");
        let check = (|| -> Result<Vec<Check>> {
            let ln = fam.level(n)?;
            let lm = fam.level(n - 1)?;
            let nd = tower.norm_to_level(&ln.d, n - 1)?;
            let r = nd.residual_valuation(&lm.d);
            let tr = tower.trace_to_level(&ln.log_d, n - 1)?;
            let rt = tr.residual_valuation(&lm.log_d);
            Ok(vec![
                Check::measured(
                    name.clone(),
                    ANCHOR,
                    r,
                    threshold,
                    format!("N(d_{n}) = d_{}", n - 1),
                ),
                Check::measured(
                    format!("points.trace-tower.n{n}"),
                    ANCHOR,
                    rt,
                    threshold,
                    format!("Tr(log d_{n}) = log d_{}", n - 1),
                ),
            ])
        })();
        match check {
            Ok(v) => out.extend(v),
            Err(e) => out.push(Check::failed(name, ANCHOR, &e)),
        }
    }
    out
}

/// Compares `log_p d_n` with its closed form, each summand separately, and
/// `d_n` with its second construction; also `N(d_n^σ) = 1`.
pub fn verify_log_formula(
    fam: &PointFamily,
    honda: &HondaData,
    tower: &CycloTower,
    n: u32,
    threshold: i64,
) -> Result<Vec<Check>> {
    const ANCHOR: &str = "closed-form-log";
    let lp = fam.level(n)?;
    let closed = closed_form_log(tower, n);
    let mut out = vec![Check::measured(
        format!("points.log-formula.n{n}"),
        ANCHOR,
        lp.log_d.residual_valuation(&closed),
        threshold,
        "log d_n = p + Σ_k Σ_δ (ζ^(p^k δ) - 1)/p^k",
    )];
    let x = zeta_minus_one(tower, n);
    let ell_x = honda.ell_at(&x)?;
    let r_zeta = ell_x.residual_valuation(&closed_form_ell_at_zeta(tower, n));
    let p = honda.ctx().int(tower.p() as i64);
    let r_eps = honda.ell_at_epsilon()?.residual_valuation(&p);
    out.push(Check::measured(
        format!("points.log-summands.n{n}"),
        ANCHOR,
        r_zeta.min(r_eps),
        threshold,
        "ℓ(ζ - 1) and ℓ(ε) = p separately",
    ));
    let alt = d_by_exponential(honda, tower, n)?;
    out.push(Check::measured(
        format!("points.two-constructions.n{n}"),
        "local-points",
        lp.d.residual_valuation(&alt),
        threshold,
        "ι((ζ-1) [+] ε) = exp(p)(1 + ι(ζ-1)) - 1",
    ));
    let one = tower.ctx().one();
    let mut worst = i64::MAX;
    for a in tower.gamma_exponents(n) {
        let nm = tower.layer_norm(&lp.d.galois(a))?;
        worst = worst.min(nm.residual_valuation(&one));
    }
    out.push(Check::measured(
        format!("points.conjugate-norms.n{n}"),
        "norm-compatible-points",
        worst,
        threshold,
        "N(d_n^σ) = 1 for all σ in Γ_n",
    ));
    Ok(out)
}

fn coords(x: &CycloElement) -> Row {
    x.coords().to_vec()
}

/// `log_p(U^1_n)` as a Z_p-lattice, spanned by `log(1 + π_n^j)` for
/// `1 ≤ j < i_0 + p^n`, `i_0 = floor(p^n/(p-1)) + 1`: the quotients
/// `U^(j)/U^(j+1)` are generated by `1 + π^j`, and raising to the p-th
/// power maps `U^(j)` onto `U^(j+p^n)` once `j ≥ i_0`.
#[derive(Debug, Clone)]
pub struct UnitLattice {
    pub level: u32,
    pub generators: Vec<CycloElement>,
    pub logs: Vec<CycloElement>,
    pub basis: Echelon,
}

impl UnitLattice {
    pub fn new(tower: &CycloTower, n: u32, tolerance: i64) -> Result<Self> {
        let f = tower.field(n);
        let pn = f.layer_degree();
        let i0 = pn / (tower.p() as usize - 1) + 1;
        let pi = tower.uniformizer_pi(n);
        let one = CycloElement::one(f);
        let mut generators = Vec::new();
        let mut logs = Vec::new();
        let mut pw = one.clone();
        for _ in 1..(i0 + pn) {
            pw = &pw * &pi;
            let g = &one + &pw;
            logs.push(field_log(&g)?);
            generators.push(g);
        }
        let rows: Vec<Row> = logs.iter().map(coords).collect();
        let basis = Echelon::new(&rows, tolerance)?;
        if basis.rank() != pn {
            return Err(LabError::property(format!(
                "log(U^1_{n}) has rank {} instead of {pn}",
                basis.rank()
            )));
        }
        Ok(UnitLattice {
            level: n,
            generators,
            logs,
            basis,
        })
    }

    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    /// Integral coefficients `s_j` with `y = Σ s_j log(1 + π^j)`, if any.
    pub fn decompose(&self, y: &CycloElement) -> Result<Option<Row>> {
        Ok(self
            .basis
            .member(&coords(y))?
            .map(|c| self.basis.generator_coefficients(&c)))
    }

    /// `Π (1 + π^j)^(s_j)`, exponents reduced modulo `p^digits`.
    pub fn unit_from(&self, s: &Row, digits: i64) -> Result<CycloElement> {
        let f = self.generators[0].field().clone();
        let mut acc = CycloElement::one(&f);
        for (g, sj) in self.generators.iter().zip(s) {
            if sj.is_zero() {
                continue;
            }
            let e: BigUint = sj.residue(digits.min(sj.precision()))?;
            acc = &acc * &g.pow_big(&e);
        }
        Ok(acc)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationReport {
    pub level: u32,
    pub rank: usize,
    pub index_valuation: i64,
}

/// Index of the span of `{log d_n^σ} ∪ {log u}` in `log_p(U^1_n)`.
pub fn verify_generation(
    fam: &PointFamily,
    tower: &CycloTower,
    n: u32,
    tolerance: i64,
) -> Result<GenerationReport> {
    let lp = fam.level(n)?;
    let lattice = UnitLattice::new(tower, n, tolerance)?;
    let f = tower.field(n);
    let u = tower.ctx().int(1 + tower.p() as i64);
    let lu = iwasawa_log_scalar(&u)?;
    let mut sub: Vec<Row> = tower
        .gamma_exponents(n)
        .into_iter()
        .map(|a| coords(&lp.log_d.galois(a)))
        .collect();
    sub.push(coords(&CycloElement::from_scalar(f, &lu)));
    let big: Vec<Row> = lattice.logs.iter().map(coords).collect();
    let index = index_valuation(&big, &sub, tolerance)?;
    Ok(GenerationReport {
        level: n,
        rank: lattice.rank(),
        index_valuation: index,
    })
}

#[derive(Debug, Clone)]
pub struct H90Solution {
    pub level: u32,
    /// The class `e_n ∈ {0, ..., p^n - 1}`.
    pub e: u64,
    pub u: CycloElement,
    pub x: CycloElement,
    /// Valuation of `x^γ / x - d_n`.
    pub residual: i64,
    /// Valuation of `N(u_n) - 1`.
    pub norm_residual: i64,
}

/// Finds the unique `e` for which `log d_n - e (γ - 1) log π_n` is
/// `(γ - 1)` applied to an element of `log_p(U^1_n)`, and rebuilds `u_n`.
/// `π_n^γ / π_n` where `γ: ζ ↦ ζ^a`.
fn pi_gamma_ratio(tower: &CycloTower, n: u32, a: u64) -> CycloElement {
    let field = tower.field(n);
    let mut acc = CycloElement::one(field);
    for d in tower.delta_exponents(n) {
        let mut sum = CycloElement::zero(field);
        for i in 0..a {
            sum = &sum + &CycloElement::zeta_pow(field, (d as i64) * (i as i64));
        }
        acc = &acc * &sum;
    }
    acc
}

pub fn solve_h90(fam: &PointFamily, tower: &CycloTower, n: u32) -> Result<H90Solution> {
    let lp = fam.level(n)?;
    let prec = tower.ctx().prec();
    let tolerance = prec - 2 * n as i64 - 4;
    let lattice = UnitLattice::new(tower, n, tolerance)?;
    let pi = tower.uniformizer_pi(n);
    let gamma = tower.gamma_power(n, 1);
    let log_pi = field_log(&pi)?;
    let g = &log_pi.galois(gamma) - &log_pi;
    let pn = tower.field(n).layer_degree() as u64;
    let mut found: Vec<(u64, Row)> = Vec::new();
    for e in 0..pn {
        let v = &lp.log_d - &g.scale(&tower.ctx().int(e as i64));
        let y = tower.gamma_solve(&v)?;
        if let Some(s) = lattice.decompose(&y)? {
            found.push((e, s));
        }
    }
    let (e, s) = match found.len() {
        0 => {
            return Err(LabError::ModelFailure(format!(
                "no e in 0..{pn} gives a Hilbert 90 solution at level {n}"
            )))
        }
        1 => found.pop().expect("one candidate"),
        _ => {
            let es: Vec<u64> = found.iter().map(|(e, _)| *e).collect();
            return Err(LabError::precision(
                format!("several candidates {es:?} for e at level {n}"),
                tolerance,
                prec,
            ));
        }
    };
    let u = lattice.unit_from(&s, prec + 4)?;
    let x = &pi.pow(e) * &u;
    // Dividing by π directly costs precision; π^γ/π is a product of
    // geometric sums.
    let quotient = &(&u.galois(gamma) * &u.inverse()?) * &pi_gamma_ratio(tower, n, gamma).pow(e);
    let residual = quotient.residual_valuation(&lp.d);
    let norm = tower.layer_norm(&u)?;
    let norm_residual = norm.residual_valuation(&tower.ctx().one());
    Ok(H90Solution {
        level: n,
        e,
        u,
        x,
        residual,
        norm_residual,
    })
}

#[derive(Debug, Clone)]
pub struct CongruenceReport {
    pub level: u32,
    pub e: u64,
    /// `e (p-1) log_p κ(γ)`.
    pub rhs: PadicScalar,
    /// Valuation of `p - rhs`; the congruence needs at least `n + 1`.
    pub residual: i64,
    /// `p / ((p-1) log_p κ(γ)) mod p^n`.
    pub predicted_e: u64,
}

/// `p ≡ e_n (p-1) log_p κ(γ) mod p^(n+1)`, with `e_n` from [`solve_h90`].
pub fn verify_exponent_congruence(sol: &H90Solution, tower: &CycloTower) -> Result<CongruenceReport> {
    let ctx = tower.ctx();
    let p = tower.p() as i64;
    let lk = iwasawa_log_scalar(&ctx.int(tower.kappa_gamma()))?;
    let rhs = &lk * &ctx.int(sol.e as i64 * (p - 1));
    let lhs = ctx.int(p);
    let residual = lhs.residual_valuation(&rhs);
    let pred = lhs.div(&(&lk * &ctx.int(p - 1)))?;
    let predicted_e = if sol.level == 0 {
        0
    } else {
        pred.residue(sol.level as i64)?.to_u64().unwrap_or(u64::MAX)
    };
    Ok(CongruenceReport {
        level: sol.level,
        e: sol.e,
        rhs,
        residual,
        predicted_e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::honda::default_order;
    use crate::padic::PrimeContext;

    fn setup(p: u32, n: u32, prec: i64) -> (HondaData, CycloTower, PointFamily) {
        let ctx = PrimeContext::new(p, prec).unwrap();
        let honda = HondaData::build(&ctx, default_order(p, n, prec)).unwrap();
        let tower = CycloTower::new(&ctx, n, 1 + p as i64).unwrap();
        let fam = build_points(&honda, &tower, n).unwrap();
        (honda, tower, fam)
    }

    #[test]
    fn level_zero_point_is_trivial() {
        let (h, t, fam) = setup(3, 1, 20);
        assert!(fam.level(0).unwrap().log_d.is_zero());
        let checks = verify_norm_tower(&fam, &t, 18);
        assert!(checks.iter().all(|c| c.passed()), "{checks:?}");
        let closed = closed_form_log(&t, 0);
        assert!(closed.is_zero());
        let checks = verify_log_formula(&fam, &h, &t, 1, 18).unwrap();
        assert!(checks.iter().all(|c| c.passed()), "{checks:?}");
    }

    #[test]
    fn uniformizer_ratio_is_exact() {
        let (_, t, _) = setup(5, 1, 20);
        let a = t.gamma_power(1, 1);
        let pi = t.uniformizer_pi(1);
        let lhs = &pi_gamma_ratio(&t, 1, a) * &pi;
        assert!(lhs.residual_valuation(&pi.galois(a)) >= 20);
    }

    #[test]
    fn hilbert_90_and_congruence_at_p3() {
        let (_, t, fam) = setup(3, 1, 20);
        let g = verify_generation(&fam, &t, 1, 14).unwrap();
        assert_eq!(g.index_valuation, 0);
        assert_eq!(g.rank, 3);
        let sol = solve_h90(&fam, &t, 1).unwrap();
        assert_eq!(sol.e, 2);
        assert!(sol.residual >= 14, "{}", sol.residual);
        assert!(sol.norm_residual >= 14, "{}", sol.norm_residual);
        let r = verify_exponent_congruence(&sol, &t).unwrap();
        assert!(r.residual >= 2);
        assert_eq!(r.predicted_e, 2);
    }

    #[test]
    fn level_zero_generation_is_u_alone() {
        let (_, t, fam) = setup(5, 0, 20);
        let g = verify_generation(&fam, &t, 0, 16).unwrap();
        assert_eq!((g.rank, g.index_valuation), (1, 0));
    }
}
