//! Suite configuration, the suites themselves and the assembled report.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coleman::{
    coleman_level, derivative_rep, negative_control, random_density, seeded_functional,
    verify_char_sum, verify_convolution, verify_leading_term, verify_gauss_norm, verify_w0_at_p,
    verify_projection, CharacterData, TateParameter, UnitFunctional,
};
use crate::cyclotomic::CycloTower;
use crate::error::{LabError, Result};
use crate::honda::{check_honda, default_order, HondaData, IOTA_INVERSE_ORDER};
use crate::padic::{PadicScalar, PrimeContext};
use crate::points::{
    build_points, solve_h90, verify_generation, verify_log_formula, verify_norm_tower,
    verify_exponent_congruence, H90Solution, PointFamily,
};
use crate::report::{guarded, guarded_many, Check, Status};
use crate::series::TruncatedSeries;
use crate::tate::{
    a_invariants, a_series, q_grid, u_grid, uniformize_direct, uniformize_point, verify_formal_iso,
    verify_mtt, TATE_ORDER,
};

/// Extra digits carried beyond the reported precision `N`.
pub const GUARD_DIGITS: i64 = 8;

/// Seeded admissible functionals per level in the trivial-zero check.
pub const FUNCTIONALS_PER_LEVEL: usize = 20;

#[derive(
    Debug,
    Clone,
    Copy,
    PartialEq,
    Eq,
    PartialOrd,
    Ord,
    Hash,
    Serialize,
    Deserialize,
    clap::ValueEnum,
)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteName {
    Honda,
    Points,
    Prop2,
    Coleman,
    ColemanNegativeControl,
    Tate,
    Mtt,
}

impl SuiteName {
    pub const ALL: [SuiteName; 7] = [
        SuiteName::Honda,
        SuiteName::Points,
        SuiteName::Prop2,
        SuiteName::Coleman,
        SuiteName::ColemanNegativeControl,
        SuiteName::Tate,
        SuiteName::Mtt,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SuiteName::Honda => "honda",
            SuiteName::Points => "points",
            SuiteName::Prop2 => "prop2",
            SuiteName::Coleman => "coleman",
            SuiteName::ColemanNegativeControl => "coleman-negative-control",
            SuiteName::Tate => "tate",
            SuiteName::Mtt => "mtt",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        SuiteName::ALL.into_iter().find(|n| n.as_str() == s)
    }
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Series orders used by the computation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    /// Order of `ℓ` and `ι`.
    pub honda_order: usize,
    pub iota_inverse_order: usize,
    pub tate_order: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QSpec {
    pub ord: u32,
    pub unit: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub p: u32,
    pub n_max: u32,
    /// The reported precision `N`.
    pub precision: i64,
    pub working_precision: i64,
    pub truncation: Truncation,
    pub kappa_gamma: i64,
    pub q: QSpec,
    pub seed: u64,
    /// `L(E,1)/Ω⁺` as a rational `a/b`.
    pub l_ratio: String,
    pub suites: Vec<SuiteName>,
    pub deep: bool,
    /// Highest level of the generation check when `deep` is set.
    pub deep_level_cap: u32,
    pub timings: bool,
}

fn is_prime(p: u32) -> bool {
    p >= 2 && (2..p).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d))
}

/// Parses `a`, `-a` or `a/b`.
pub fn parse_rational(s: &str) -> Result<(i64, i64)> {
    let bad = || LabError::Config(format!("cannot read {s:?} as a rational number"));
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        ),
        None => (s.trim().parse().map_err(|_| bad())?, 1),
    };
    if den == 0 {
        return Err(bad());
    }
    Ok((num, den))
}

impl SuiteConfig {
    /// `p = 3`, `n ≤ 2`, `N = 30`, `q = p(1+p)`, `κ(γ) = 1+p`, all suites.
    pub fn defaults(p: u32) -> Self {
        SuiteConfig::new(p, 2, 30, 1 + p as i64, 1, 1 + p as i64, 0)
    }

    pub fn new(
        p: u32,
        n_max: u32,
        precision: i64,
        kappa_gamma: i64,
        q_ord: u32,
        q_unit: i64,
        seed: u64,
    ) -> Self {
        let working_precision = precision + GUARD_DIGITS;
        SuiteConfig {
            p,
            n_max,
            precision,
            working_precision,
            truncation: Truncation {
                honda_order: default_order(p, n_max, working_precision),
                iota_inverse_order: IOTA_INVERSE_ORDER,
                tate_order: TATE_ORDER,
            },
            kappa_gamma,
            q: QSpec {
                ord: q_ord,
                unit: q_unit,
            },
            seed,
            l_ratio: "1".to_string(),
            suites: SuiteName::ALL.to_vec(),
            deep: false,
            deep_level_cap: 1,
            timings: false,
        }
    }

    /// Recomputes the derived fields after `p`, `n_max` or `precision` changed.
    pub fn resolve(mut self) -> Self {
        self.working_precision = self.precision + GUARD_DIGITS;
        self.truncation.honda_order = default_order(self.p, self.n_max, self.working_precision);
        self.suites.sort();
        self.suites.dedup();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(LabError::Config(m));
        if !is_prime(self.p) || self.p == 2 {
            return cfg(format!("p = {} is not an odd prime", self.p));
        }
        if self.p > 97 {
            return cfg(format!(
                "p = {} is beyond the supported range (p ≤ 97)",
                self.p
            ));
        }
        if self.n_max > 4 {
            return cfg(format!(
                "nmax = {} is beyond the supported range (≤ 4)",
                self.n_max
            ));
        }
        if self.precision < 8 {
            return cfg(format!(
                "precision {} is too small (need ≥ 8)",
                self.precision
            ));
        }
        if self.working_precision < self.precision {
            return cfg("working precision below the reported precision".to_string());
        }
        let p = self.p as i64;
        if self.kappa_gamma.rem_euclid(p) != 1 || self.kappa_gamma.rem_euclid(p * p) == 1 {
            return cfg(format!(
                "κ(γ) = {} does not generate 1 + pZ_p",
                self.kappa_gamma
            ));
        }
        if self.q.ord == 0 {
            return cfg("q-ord must be positive (split multiplicative reduction)".to_string());
        }
        if self.q.unit.rem_euclid(p) == 0 {
            return cfg(format!("q-unit {} is divisible by p", self.q.unit));
        }
        let (_, den) = parse_rational(&self.l_ratio)?;
        if den.rem_euclid(p) == 0 {
            return cfg(format!("L-ratio {} is not p-integral", self.l_ratio));
        }
        Ok(())
    }

    pub fn tate_parameter(&self) -> TateParameter {
        TateParameter {
            ord: self.q.ord,
            unit: self.q.unit,
        }
    }

    pub fn work_ctx(&self) -> Result<PrimeContext> {
        PrimeContext::new(self.p, self.working_precision)
    }

    /// The threshold for identities that should hold to the full
    /// precision, allowing for the two digits lost to division.
    pub fn tolerance(&self) -> i64 {
        self.precision - 2
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub expected_fail: usize,
    pub skipped: usize,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub config: SuiteConfig,
    pub checks: Vec<Check>,
    pub summary: Summary,
}

impl Report {
    pub fn new(config: SuiteConfig, mut checks: Vec<Check>) -> Self {
        checks.sort_by(|a, b| a.name.cmp(&b.name));
        let mut s = Summary {
            total: checks.len(),
            ..Summary::default()
        };
        for c in &checks {
            match c.status {
                Status::Pass => s.passed += 1,
                Status::Fail => s.failed += 1,
                Status::ExpectedFail => s.expected_fail += 1,
                Status::Skipped => s.skipped += 1,
            }
        }
        s.ok = s.failed == 0;
        Report {
            config,
            checks,
            summary: s,
        }
    }

    pub fn ok(&self) -> bool {
        self.summary.ok
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| LabError::invalid(format!("not a report: {e}")))
    }

    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = format!(
            "p = {}, nmax = {}, N = {} (working {}), κ(γ) = {}, q = {}^{}·{}, seed = {}\n",
            c.p,
            c.n_max,
            c.precision,
            c.working_precision,
            c.kappa_gamma,
            c.p,
            c.q.ord,
            c.q.unit,
            c.seed
        );
        let width = self
            .checks
            .iter()
            .map(|k| k.name.len())
            .max()
            .unwrap_or(4)
            .max(4);
        out.push_str(&format!(
            "{:<width$}  {:<13}  {:>8}  {:>9}  detail\n",
            "name", "status", "residual", "threshold"
        ));
        for k in &self.checks {
            let status = serde_json::to_value(k.status).expect("status serializes");
            let opt = |x: Option<i64>| x.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "{:<width$}  {:<13}  {:>8}  {:>9}  {}\n",
                k.name,
                status.as_str().unwrap_or("?"),
                opt(k.residual_valuation),
                opt(k.threshold),
                k.detail
            ));
        }
        let s = &self.summary;
        out.push_str(&format!(
            "{} checks: {} passed, {} failed, {} expected-fail, {} skipped\n",
            s.total, s.passed, s.failed, s.expected_fail, s.skipped
        ));
        out
    }
}

type HondaKey = (u32, i64, usize);

fn honda_cache() -> &'static Mutex<HashMap<HondaKey, Arc<HondaData>>> {
    static CACHE: OnceLock<Mutex<HashMap<HondaKey, Arc<HondaData>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `HondaData` for `(p, precision, order)`, built once per process.
pub fn honda_data(ctx: &PrimeContext, order: usize) -> Result<Arc<HondaData>> {
    let key = (ctx.p(), ctx.prec(), order);
    if let Some(h) = honda_cache().lock().expect("cache lock").get(&key) {
        return Ok(h.clone());
    }
    let h = Arc::new(HondaData::build(ctx, order)?);
    honda_cache()
        .lock()
        .expect("cache lock")
        .insert(key, h.clone());
    Ok(h)
}

/// Lazily built shared objects.
struct Lab<'a> {
    config: &'a SuiteConfig,
    ctx: PrimeContext,
    honda: Option<Result<Arc<HondaData>>>,
    tower: Option<Result<CycloTower>>,
    family: Option<Result<PointFamily>>,
    h90: HashMap<u32, Result<H90Solution>>,
}

fn share<T: Clone>(r: &Result<T>) -> Result<T> {
    r.clone().map_err(|e| e.clone())
}

impl<'a> Lab<'a> {
    fn new(config: &'a SuiteConfig) -> Result<Self> {
        Ok(Lab {
            config,
            ctx: config.work_ctx()?,
            honda: None,
            tower: None,
            family: None,
            h90: HashMap::new(),
        })
    }

    fn honda(&mut self) -> Result<Arc<HondaData>> {
        if self.honda.is_none() {
            self.honda = Some(honda_data(&self.ctx, self.config.truncation.honda_order));
        }
        share(self.honda.as_ref().expect("set"))
    }

    fn tower(&mut self) -> Result<CycloTower> {
        if self.tower.is_none() {
            self.tower = Some(CycloTower::new(
                &self.ctx,
                self.config.n_max,
                self.config.kappa_gamma,
            ));
        }
        share(self.tower.as_ref().expect("set"))
    }

    fn family(&mut self) -> Result<PointFamily> {
        if self.family.is_none() {
            let r = (|| {
                let h = self.honda()?;
                let t = self.tower()?;
                build_points(&h, &t, self.config.n_max)
            })();
            self.family = Some(r);
        }
        share(self.family.as_ref().expect("set"))
    }

    fn h90(&mut self, n: u32) -> Result<H90Solution> {
        if !self.h90.contains_key(&n) {
            let r = (|| {
                let fam = self.family()?;
                let t = self.tower()?;
                solve_h90(&fam, &t, n)
            })();
            self.h90.insert(n, r);
        }
        share(&self.h90[&n])
    }
}

fn timed(enabled: bool, f: impl FnOnce() -> Vec<Check>) -> Vec<Check> {
    let start = Instant::now();
    let mut out = f();
    if enabled {
        let ms = start.elapsed().as_millis() as u64;
        for c in &mut out {
            c.millis = Some(ms);
        }
    }
    out
}

fn honda_suite(lab: &mut Lab) -> Vec<Check> {
    const ANCHOR: &str = "honda-formal-group";
    let cfg = lab.config;
    let n = cfg.precision;
    let h = match lab.honda() {
        Ok(h) => h,
        Err(e) => return vec![Check::failed("honda.build", ANCHOR, &e)],
    };
    let mut out = Vec::new();
    let order = h.ell.order();
    out.push(Check::flag(
        "honda.order",
        ANCHOR,
        order >= 120,
        format!("ℓ and ι truncated at order M = {order}"),
    ));
    out.extend(guarded_many("honda.ell", ANCHOR, || {
        let r = check_honda(&h.ell)?;
        Ok(vec![
            Check::measured(
                "honda.ell-at-zero",
                ANCHOR,
                r.ell_at_zero_valuation,
                n,
                "ℓ(0) = 0",
            ),
            Check::measured(
                "honda.derivative-constant",
                ANCHOR,
                r.derivative_constant_residual,
                n,
                "ℓ'(0) = 1",
            ),
            Check::measured(
                "honda.derivative-integral",
                ANCHOR,
                r.derivative_min_valuation,
                0,
                "ℓ' ∈ 1 + X Z_p[[X]]",
            ),
            Check::measured(
                "honda.frobenius",
                ANCHOR,
                r.frobenius_min_valuation,
                1,
                "(φ - p) ℓ ∈ p Z_p[[X]]",
            ),
        ])
    }));
    out.push(Check::measured(
        "honda.iota-integral",
        ANCHOR,
        h.iota.min_valuation_from(0),
        0,
        format!(
            "ι ∈ Z_p[[X]]; ι_2 = {}, ι_3 = {}",
            crate::honda::describe(h.iota.coeff(2)),
            crate::honda::describe(h.iota.coeff(3))
        ),
    ));
    out.push(Check::measured(
        "honda.iota-inverse-integral",
        ANCHOR,
        h.iota_inv.min_valuation_from(0),
        0,
        format!("ι^(-1) ∈ Z_p[[X]] to order {}", h.iota_inv.order()),
    ));
    out.push(guarded("honda.iota-inverse-composition", ANCHOR, || {
        let m = h.iota_inv.order();
        let comp = h.iota.truncate_order(m).compose(&h.iota_inv)?;
        let x = TruncatedSeries::var(&lab.ctx, m);
        Ok(Check::measured(
            "honda.iota-inverse-composition",
            ANCHOR,
            (&comp - &x).min_valuation_from(0),
            n,
            "ι(ι^(-1)(X)) = X",
        ))
    }));
    out.extend(guarded_many("honda.epsilon", ANCHOR, || {
        let p = lab.ctx.int(cfg.p as i64);
        let r = h.ell_at_epsilon()?.residual_valuation(&p);
        Ok(vec![
            Check::measured("honda.epsilon-root", ANCHOR, r, n, "ℓ(ε) = p"),
            Check::measured(
                "honda.epsilon-mod-p2",
                ANCHOR,
                h.epsilon.residual_valuation(&p),
                2,
                format!("ε ≡ p mod p^2, ε = {}", h.epsilon),
            ),
        ])
    }));
    out
}

fn points_suite(lab: &mut Lab) -> Vec<Check> {
    const ANCHOR: &str = "norm-compatible-points";
    let cfg = lab.config;
    let (h, t, fam) = match (|| Ok::<_, LabError>((lab.honda()?, lab.tower()?, lab.family()?)))() {
        Ok(x) => x,
        Err(e) => return vec![Check::failed("points.build", ANCHOR, &e)],
    };
    let tol = cfg.tolerance();
    let mut out = verify_norm_tower(&fam, &t, tol);
    for n in 0..=cfg.n_max {
        out.extend(guarded_many(
            &format!("points.log-formula.n{n}"),
            "closed-form-log",
            || verify_log_formula(&fam, &h, &t, n, tol),
        ));
    }
    for n in 0..=cfg.n_max {
        let name = format!("points.generation.n{n}");
        if !cfg.deep || n > cfg.deep_level_cap {
            out.push(Check::skipped(
                name,
                "unit-generation",
                format!(
                    "lattice index at level {n} runs only with --deep (levels ≤ {})",
                    cfg.deep_level_cap
                ),
            ));
            continue;
        }
        out.push(guarded(&name, "unit-generation", || {
            let g = verify_generation(&fam, &t, n, cfg.tolerance())?;
            let full = (cfg.p as usize).pow(n);
            Ok(Check::flag(
                name.clone(),
                "unit-generation",
                g.index_valuation == 0 && g.rank == full,
                format!(
                    "[U^1_{n} : Z_p[Γ_{n}] d_{n} + Z_p u] = p^{}, rank {} of {full}",
                    g.index_valuation, g.rank
                ),
            ))
        }));
    }
    out
}

fn prop2_suite(lab: &mut Lab) -> Vec<Check> {
    const ANCHOR: &str = "valuation-class-congruence";
    let cfg = lab.config;
    let mut out = Vec::new();
    for n in 0..=cfg.n_max {
        let sol = match lab.h90(n) {
            Ok(s) => s,
            Err(e) => {
                out.push(Check::failed(format!("prop2.h90.n{n}"), "hilbert-90", &e));
                continue;
            }
        };
        let t = match lab.tower() {
            Ok(t) => t,
            Err(e) => {
                out.push(Check::failed(format!("prop2.h90.n{n}"), "hilbert-90", &e));
                continue;
            }
        };
        out.push(Check::measured(
            format!("prop2.h90.n{n}"),
            "hilbert-90",
            sol.residual,
            cfg.tolerance(),
            format!("d_{n} = x^γ / x with x = π^{} u", sol.e),
        ));
        out.push(Check::measured(
            format!("prop2.h90-norm.n{n}"),
            "hilbert-90",
            sol.norm_residual,
            cfg.tolerance(),
            format!("N(u_{n}) = 1"),
        ));
        out.push(guarded(&format!("prop2.congruence.n{n}"), ANCHOR, || {
            let r = verify_exponent_congruence(&sol, &t)?;
            Ok(Check::measured(
                format!("prop2.congruence.n{n}"),
                ANCHOR,
                r.residual,
                n as i64 + 1,
                format!(
                    "p ≡ e (p-1) log_p κ(γ) mod p^{} with e_{n} = {} (congruence predicts {} mod p^{n})",
                    n + 1,
                    r.e,
                    r.predicted_e
                ),
            ))
        }));
    }
    out
}

/// Seeds of the functionals at level `n`, drawn from the configured seed.
fn level_seeds(seed: u64, n: u32, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n as u64 + 1);
    (0..count).map(|_| rng.gen()).collect()
}

/// A functional with a random slope, admissible or not.
fn arbitrary_functional(t: &CycloTower, n: u32, seed: u64) -> Result<UnitFunctional> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 << 32);
    let top = random_density(t, n, &mut rng)?;
    let alpha = t.ctx().int(rng.gen_range(1..1_000_000));
    UnitFunctional::from_top(t, top, alpha)
}

fn coleman_suite(lab: &mut Lab) -> Vec<Check> {
    const ANCHOR: &str = "coleman-map";
    let cfg = lab.config;
    let q = cfg.tate_parameter();
    let tol = cfg.tolerance();
    let (t, fam) = match (|| Ok::<_, LabError>((lab.tower()?, lab.family()?)))() {
        Ok(x) => x,
        Err(e) => return vec![Check::failed("coleman.build", ANCHOR, &e)],
    };
    let mut out = Vec::new();
    for n in 0..=cfg.n_max {
        let seeds = level_seeds(cfg.seed, n, FUNCTIONALS_PER_LEVEL);
        let ws: Vec<UnitFunctional> = match seeds
            .iter()
            .map(|&s| seeded_functional(&t, n, s, &q))
            .collect()
        {
            Ok(ws) => ws,
            Err(e) => {
                out.push(Check::failed(
                    format!("coleman.functionals.n{n}"),
                    ANCHOR,
                    &e,
                ));
                continue;
            }
        };
        out.push(guarded(
            &format!("coleman.trivial-zero.n{n}"),
            "trivial-zero",
            || {
                let mut worst = i64::MAX;
                for w in &ws {
                    let aug = coleman_level(&t, w, &fam, n)?.augmentation();
                    worst = worst.min(aug.residual_valuation(&aug.zero_like()));
                }
                Ok(Check::measured(
                    format!("coleman.trivial-zero.n{n}"),
                    "trivial-zero",
                    worst,
                    tol,
                    format!(
                        "Col_{n}(0) = 0 for {} seeded admissible functionals",
                        ws.len()
                    ),
                ))
            },
        ));
        out.push(guarded(
            &format!("coleman.convolution.n{n}"),
            "coleman-convolution",
            || {
                let mut worst: Option<Check> = None;
                for w in ws.iter().take(3) {
                    let c = verify_convolution(&t, w, &fam, n, tol)?;
                    if worst
                        .as_ref()
                        .is_none_or(|b| c.residual_valuation < b.residual_valuation)
                    {
                        worst = Some(c);
                    }
                }
                Ok(worst.expect("at least one functional"))
            },
        ));
        if n > 0 {
            out.push(guarded(
                &format!("coleman.projection.n{n}"),
                "coleman-compatibility",
                || verify_projection(&t, &ws[0], &fam, n, tol),
            ));
        }
        for chi in
            std::iter::once(CharacterData::trivial(n)).chain(CharacterData::primitive(cfg.p, n))
        {
            let label = if chi.order_exp == 0 {
                "trivial".to_string()
            } else {
                format!("k{}", chi.k)
            };
            out.push(guarded(
                &format!("coleman.char-sum.n{n}.{label}"),
                "gauss-sum",
                || verify_char_sum(&t, &fam, &chi, tol),
            ));
            if chi.order_exp > 0 {
                out.push(guarded(
                    &format!("coleman.gauss-norm.n{n}.{label}"),
                    "gauss-sum",
                    || verify_gauss_norm(&t, &chi, tol),
                ));
            }
        }
        if n == 0 {
            out.extend(guarded_many("coleman.w0-at-p", "valuation-pairing", || {
                let mut all = Vec::new();
                for (i, w) in ws.iter().enumerate().take(5) {
                    all.extend(verify_w0_at_p(&t, w, &q, tol, &format!("w{i}"))?);
                }
                Ok(all)
            }));
        }
        let sol = match lab.h90(n) {
            Ok(s) => s,
            Err(e) => {
                out.push(Check::failed(
                    format!("coleman.abel.n{n}"),
                    "abel-summation",
                    &e,
                ));
                continue;
            }
        };
        out.push(guarded(&format!("coleman.abel.n{n}"), "abel-summation", || {
            let mut worst = i64::MAX;
            let mut closed = i64::MAX;
            let arb = arbitrary_functional(&t, n, cfg.seed ^ 0xA5A5)?;
            for w in ws.iter().take(3).chain(std::iter::once(&arb)) {
                let rep = derivative_rep(&t, w, &sol, &fam)?;
                worst = worst.min(rep.identity_residual);
                closed = closed.min(rep.closed_form_residual);
            }
            Ok(Check::measured(
                format!("coleman.abel.n{n}"),
                "abel-summation",
                worst.min(closed),
                tol,
                "Col_n = (γ^(-1) - 1) Σ w(x^σ) σ and -w_0(N x_n) = -e_n α, admissible and arbitrary w",
            ))
        }));
        out.push(guarded(
            &format!("coleman.leading-term.n{n}"),
            "derivative-formula",
            || {
                let mut worst: Option<(i64, i64, String)> = None;
                for w in ws.iter().take(5) {
                    let d = verify_leading_term(&t, w, &sol, &fam, &q)?;
                    let margin = d.residual - d.required;
                    if worst.as_ref().is_none_or(|(m, _, _)| margin < *m) {
                        worst = Some((
                            margin,
                            d.required,
                            format!("D_{n} = {} against {}", d.d_n, d.rhs),
                        ));
                    }
                }
                let (margin, required, detail) = worst.expect("at least one functional");
                Ok(Check::measured(
                    format!("coleman.leading-term.n{n}"),
                    "derivative-formula",
                    margin + required,
                    required,
                    format!(
                        "D_n ≡ p/((p-1) log κ(γ)) · log q/ord q · E_0 mod p^(n+v(α)); {detail}"
                    ),
                ))
            },
        ));
    }
    out
}

fn negative_control_suite(lab: &mut Lab) -> Vec<Check> {
    const NAME: &str = "coleman-negative-control.lift-derivative.n2";
    const ANCHOR: &str = "derivative-congruence";
    let cfg = lab.config;
    if cfg.n_max < 2 {
        return vec![Check::skipped(
            NAME,
            ANCHOR,
            format!("the control runs at level 2 and nmax = {}", cfg.n_max),
        )];
    }
    let q = cfg.tate_parameter();
    vec![guarded(NAME, ANCHOR, || {
        let t = lab.tower()?;
        let fam = lab.family()?;
        let sol = lab.h90(2)?;
        negative_control(&t, &sol, &fam, &q)
    })]
}

fn tate_suite(lab: &mut Lab) -> Vec<Check> {
    const ANCHOR: &str = "tate-uniformization";
    let cfg = lab.config;
    let ctx = lab.ctx.clone();
    let tol = cfg.tolerance();
    let mut out = Vec::new();
    out.push(guarded("tate.leading-coefficients", ANCHOR, || {
        let (a4, a6) = a_series(4)?;
        let ok = a4.coeffs[1] == (-5).into() && a6.coeffs[1] == (-1).into();
        Ok(Check::flag(
            "tate.leading-coefficients",
            ANCHOR,
            ok,
            format!(
                "a_4 = {} q + ..., a_6 = {} q + ...",
                a4.coeffs[1], a6.coeffs[1]
            ),
        ))
    }));
    let mut qs = q_grid(cfg.p);
    if !qs.contains(&cfg.tate_parameter()) {
        qs.push(cfg.tate_parameter());
    }
    let us = match u_grid(&ctx) {
        Ok(u) => u,
        Err(e) => return vec![Check::failed("tate.grid", ANCHOR, &e)],
    };
    for qp in &qs {
        let tag = format!("q{}x{}", qp.ord, qp.unit);
        let q = qp.value(&ctx);
        out.push(guarded(&format!("tate.a-integral.{tag}"), ANCHOR, || {
            let (a4, a6) = a_invariants(&q)?;
            let v = |x: &PadicScalar| {
                if x.is_zero() {
                    x.precision()
                } else {
                    x.valuation()
                }
            };
            Ok(Check::measured(
                format!("tate.a-integral.{tag}"),
                ANCHOR,
                v(&a4).min(v(&a6)),
                0,
                format!("a_4, a_6 ∈ Z_p for q = p^{}·{}", qp.ord, qp.unit),
            ))
        }));
        for (i, u) in us.iter().enumerate() {
            out.push(guarded(
                &format!("tate.weierstrass.{tag}.u{i}"),
                ANCHOR,
                || {
                    let (x, y, r) = uniformize_point(u, &q)?;
                    let (xd, yd) = uniformize_direct(u, &q)?;
                    let (xi, _, _) = uniformize_point(&u.inv()?, &q)?;
                    let rv = if r.is_zero() {
                        r.precision()
                    } else {
                        r.valuation()
                    };
                    let oracle = x.residual_valuation(&xd).min(y.residual_valuation(&yd));
                    let sym = x.residual_valuation(&xi);
                    Ok(Check::measured(
                        format!("tate.weierstrass.{tag}.u{i}"),
                        ANCHOR,
                        rv.min(oracle).min(sym),
                        tol,
                        format!(
                        "u = {u}: residual {rv}, direct two-sided sum {oracle}, X(u) = X(1/u) {sym}"
                    ),
                    ))
                },
            ));
        }
        out.extend(guarded_many(
            &format!("tate.iso.{tag}"),
            "tate-formal-group",
            || verify_formal_iso(&q, cfg.truncation.tate_order, tol, &tag),
        ));
    }
    out
}

fn mtt_suite(lab: &mut Lab) -> Vec<Check> {
    let cfg = lab.config;
    guarded_many("mtt", "mtt-derivative", || {
        let (a, b) = parse_rational(&cfg.l_ratio)?;
        let l = lab.ctx.ratio(a, b)?;
        verify_mtt(
            &cfg.tate_parameter(),
            &lab.ctx,
            cfg.kappa_gamma,
            &l,
            cfg.tolerance(),
        )
    })
}

/// Runs the selected suites in dependency order.
pub fn run_suite(config: &SuiteConfig) -> Result<Report> {
    config.validate()?;
    let mut lab = Lab::new(config)?;
    let mut checks = Vec::new();
    for name in SuiteName::ALL {
        if !config.suites.contains(&name) {
            continue;
        }
        let t = config.timings;
        let produced = match name {
            SuiteName::Honda => timed(t, || honda_suite(&mut lab)),
            SuiteName::Points => timed(t, || points_suite(&mut lab)),
            SuiteName::Prop2 => timed(t, || prop2_suite(&mut lab)),
            SuiteName::Coleman => timed(t, || coleman_suite(&mut lab)),
            SuiteName::ColemanNegativeControl => timed(t, || negative_control_suite(&mut lab)),
            SuiteName::Tate => timed(t, || tate_suite(&mut lab)),
            SuiteName::Mtt => timed(t, || mtt_suite(&mut lab)),
        };
        checks.extend(produced);
    }
    Ok(Report::new(config.clone(), checks))
}
