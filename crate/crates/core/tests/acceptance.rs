//! Acceptance criteria on the default grid: `p = 3` with `n ≤ 2` and
//! `p = 5` with `n ≤ 1`, at `N = 30`. Prints one line per criterion.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use padic_lab::coleman::TateParameter;
use padic_lab::cyclotomic::CycloTower;
use padic_lab::padic::{iwasawa_log_scalar, PrimeContext};
use padic_lab::points::{build_points, closed_form_log, solve_h90};
use padic_lab::report::{Check, Status};
use padic_lab::suite::{honda_data, run_suite, Report, SuiteConfig};
use padic_lab::tate::{a_invariants, sk_series, uniformize_point, weierstrass_residual};

const N: i64 = 30;

/// Criteria that cannot pass as stated. See the notes printed with them.
const DOCUMENTED_UNATTAINABLE: &[u32] = &[10];

struct Grid {
    p: u32,
    n_max: u32,
    report: Report,
}

fn config(p: u32, n_max: u32, prec: i64) -> SuiteConfig {
    let mut c = SuiteConfig::defaults(p);
    c.n_max = n_max;
    c.precision = prec;
    c.deep = p == 3;
    c.resolve()
}

fn run(p: u32, n_max: u32, prec: i64) -> Report {
    run_suite(&config(p, n_max, prec)).expect("valid configuration")
}

struct Outcome {
    ok: bool,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            ok: true,
            notes: Vec::new(),
        }
    }

    fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.ok = false;
            self.notes.push(what.into());
        }
    }

    /// Every check with one of the given prefixes passes, and there is at least one.
    fn all_pass(&mut self, g: &Grid, prefixes: &[&str]) {
        for prefix in prefixes {
            let checks: Vec<&Check> = g
                .report
                .checks
                .iter()
                .filter(|c| c.name.starts_with(prefix))
                .collect();
            self.require(!checks.is_empty(), format!("p={}: no {prefix} checks", g.p));
            for c in checks {
                self.require(
                    c.passed(),
                    format!("p={}: {} is {:?} ({})", g.p, c.name, c.status, c.detail),
                );
            }
        }
    }

    fn passes(&mut self, g: &Grid, name: &str) {
        match g.report.check(name) {
            Some(c) => self.require(
                c.passed(),
                format!("p={}: {name} is {:?} ({})", g.p, c.status, c.detail),
            ),
            None => self.require(false, format!("p={}: {name} missing", g.p)),
        }
    }

    fn threshold_at_least(&mut self, g: &Grid, name: &str, t: i64) {
        let got = g.report.check(name).and_then(|c| c.threshold);
        self.require(
            got.is_some_and(|x| x >= t),
            format!("p={}: {name} threshold {got:?} < {t}", g.p),
        );
    }
}

fn honda(grids: &[Grid]) -> Outcome {
    let mut o = Outcome::new();
    for g in grids {
        o.all_pass(g, &["honda."]);
        let t = &g.report.config.truncation;
        o.require(
            t.honda_order >= 120,
            format!("p={}: M = {}", g.p, t.honda_order),
        );
        o.require(
            t.iota_inverse_order >= 120,
            format!("p={}: ι^(-1) order {}", g.p, t.iota_inverse_order),
        );
        for exact in [
            "honda.ell-at-zero",
            "honda.derivative-constant",
            "honda.iota-inverse-composition",
        ] {
            o.threshold_at_least(g, exact, N);
        }
    }
    o
}

fn epsilon(grids: &[Grid]) -> Outcome {
    let mut o = Outcome::new();
    for g in grids {
        o.passes(g, "honda.epsilon-root");
        o.threshold_at_least(g, "honda.epsilon-root", N);
        o.passes(g, "honda.epsilon-mod-p2");
    }
    o
}

fn norm_tower(grids: &[Grid]) -> Outcome {
    let mut o = Outcome::new();
    for g in grids {
        o.passes(g, "points.d0-is-one");
        for n in 1..=g.n_max {
            o.passes(g, &format!("points.norm-tower.n{n}"));
            o.passes(g, &format!("points.trace-tower.n{n}"));
        }
    }
    o
}

fn log_formula(grids: &[Grid]) -> Outcome {
    let mut o = Outcome::new();
    for g in grids {
        for n in 0..=g.n_max {
            o.passes(g, &format!("points.log-formula.n{n}"));
        }
        let ctx = PrimeContext::new(g.p, N).unwrap();
        let t = CycloTower::new(&ctx, 0, 1 + g.p as i64).unwrap();
        o.require(
            closed_form_log(&t, 0).is_zero(),
            format!("p={}: closed form at n = 0 is not 0", g.p),
        );
    }
    o
}

fn generation(grids: &[Grid]) -> Outcome {
    let mut o = Outcome::new();
    let g = grids.iter().find(|g| g.p == 3).expect("p = 3 on the grid");
    o.passes(g, "points.generation.n1");
    if let Some(c) = g.report.check("points.generation.n1") {
        o.require(c.detail.contains("= p^0,"), format!("index: {}", c.detail));
    }
    o
}

fn congruence(grids: &[Grid]) -> Outcome {
    let mut o = Outcome::new();
    for g in grids {
        for n in 0..=g.n_max {
            o.passes(g, &format!("prop2.h90.n{n}"));
            o.passes(g, &format!("prop2.congruence.n{n}"));
        }
    }
    let c = config(3, 1, N);
    let ctx = c.work_ctx().unwrap();
    let h = honda_data(&ctx, c.truncation.honda_order).unwrap();
    let t = CycloTower::new(&ctx, 1, c.kappa_gamma).unwrap();
    let fam = build_points(&h, &t, 1).unwrap();
    match solve_h90(&fam, &t, 1) {
        Ok(sol) => o.require(sol.e % 3 == 2, format!("p=3: e_1 = {}", sol.e)),
        Err(e) => o.require(false, format!("p=3: Hilbert 90 solve failed: {e}")),
    }
    o
}

fn coleman(grids: &[Grid]) -> Outcome {
    let mut o = Outcome::new();
    for g in grids {
        for n in 0..=g.n_max {
            o.passes(g, &format!("coleman.trivial-zero.n{n}"));
            o.passes(g, &format!("coleman.convolution.n{n}"));
            o.passes(g, &format!("coleman.char-sum.n{n}.trivial"));
            let p = g.p as usize;
            let primitive = if n == 0 { 0 } else { p.pow(n) - p.pow(n - 1) };
            for prefix in ["coleman.char-sum", "coleman.gauss-norm"] {
                let hits = g
                    .report
                    .checks
                    .iter()
                    .filter(|c| c.name.starts_with(&format!("{prefix}.n{n}.k")))
                    .inspect(|c| o.require(c.passed(), format!("p={}: {} failed", g.p, c.name)))
                    .count();
                o.require(
                    hits == primitive,
                    format!(
                        "p={}: {hits} {prefix} checks at n={n}, want {primitive}",
                        g.p
                    ),
                );
            }
        }
        if let Some(c) = g.report.check("coleman.trivial-zero.n0") {
            o.require(c.detail.contains("20 seeded"), c.detail.clone());
        }
    }
    o
}

fn derivative_chain(grids: &[Grid]) -> Outcome {
    let mut o = Outcome::new();
    for g in grids {
        o.all_pass(g, &["coleman.w0-at-p.", "coleman.q-vanishes."]);
        for n in 0..=g.n_max {
            o.passes(g, &format!("coleman.abel.n{n}"));
            o.passes(g, &format!("coleman.leading-term.n{n}"));
        }
    }
    o
}

fn negative_control(grids: &[Grid]) -> Outcome {
    let mut o = Outcome::new();
    let g = grids.iter().find(|g| g.p == 3).expect("p = 3 on the grid");
    let name = "coleman-negative-control.lift-derivative.n2";
    match g.report.check(name) {
        Some(c) => {
            o.require(
                c.status == Status::ExpectedFail,
                format!("{name} is {:?}", c.status),
            );
            o.require(
                c.residual_valuation
                    .zip(c.threshold)
                    .is_some_and(|(r, t)| r < t && t == 2),
                format!(
                    "{name}: residual {:?}, threshold {:?}",
                    c.residual_valuation, c.threshold
                ),
            );
        }
        None => o.require(false, format!("{name} missing")),
    }
    o
}

fn tate(grids: &[Grid]) -> Outcome {
    let mut o = Outcome::new();
    for g in grids {
        o.all_pass(
            g,
            &[
                "tate.a-integral.",
                "tate.weierstrass.",
                "tate.iso-integral.",
                "tate.iso-composition.",
                "tate.iso-pullback.",
                "tate.leading-coefficients",
            ],
        );
    }
    // The stated leading coefficients −1·q for both a_4 and a_6 force
    // a_4 = −s_3, and that curve does not carry the uniformized points.
    let l = sk_series(3, 4);
    o.require(
        l.coeffs[1] == 1.into(),
        format!("s_3 leading coefficient {}", l.coeffs[1]),
    );
    for g in grids {
        let ctx = PrimeContext::new(g.p, N + 8).unwrap();
        let q = TateParameter::standard(g.p).value(&ctx);
        let (_, a6) = a_invariants(&q).unwrap();
        let stated_a4 = -&sk_series(3, 256).eval(&q).unwrap();
        let (x, y, _) = uniformize_point(&ctx.int(2), &q).unwrap();
        let r = weierstrass_residual(&x, &y, &stated_a4, &a6);
        let v = if r.is_zero() {
            r.precision()
        } else {
            r.valuation()
        };
        o.require(
            v >= N - 2,
            format!("p={}: with a_4 = -s_3 (leading coefficient -1) the Weierstrass residual has valuation {v}; a_4 = -5 s_3 gives ≥ N - 2", g.p),
        );
    }
    o
}

fn mtt(grids: &[Grid]) -> Outcome {
    let mut o = Outcome::new();
    for g in grids {
        o.all_pass(g, &["mtt."]);
        let ctx = PrimeContext::new(g.p, N + 8).unwrap();
        let p = g.p as i64;
        for (num, den) in [(1, 1), (3, 7), (-2, 11)] {
            if den % p == 0 {
                continue;
            }
            let l = ctx.ratio(num, den).unwrap();
            let q = TateParameter::standard(g.p);
            let euler = &ctx.one() - &ctx.ratio(1, p).unwrap();
            let normalization = ctx.ratio(p, p - 1).unwrap();
            let expected =
                &(&(&iwasawa_log_scalar(&ctx.int(1 + p)).unwrap() * &euler) * &l) * &normalization;
            for kappa in [1 + p, (1 + p) * (1 + p)] {
                let r = padic_lab::tate::mtt_report(&q, &ctx, kappa, &l).unwrap();
                let res = r.d_ds.residual_valuation(&expected);
                o.require(
                    res >= N - 2,
                    format!("p={}, L={num}/{den}, κ={kappa}: residual {res}", g.p),
                );
            }
        }
    }
    o
}

fn statuses(r: &Report) -> BTreeMap<String, Status> {
    r.checks
        .iter()
        .map(|c| (c.name.clone(), c.status))
        .collect()
}

fn determinism(grids: &[Grid]) -> Outcome {
    let mut o = Outcome::new();
    for g in grids {
        let again = run(g.p, g.n_max, N);
        o.require(
            again.to_json() == g.report.to_json(),
            format!("p={}: JSON differs between runs", g.p),
        );
        let finer = run(g.p, g.n_max, N + 5);
        let (a, b) = (statuses(&g.report), statuses(&finer));
        o.require(
            a.keys().eq(b.keys()),
            format!("p={}: check names change at N + 5", g.p),
        );
        for (name, s) in &a {
            if let Some(t) = b.get(name) {
                o.require(
                    s == t,
                    format!("p={}: {name} is {s:?} at N and {t:?} at N + 5", g.p),
                );
            }
        }
    }
    o
}

fn main() -> ExitCode {
    let start = Instant::now();
    let grids = vec![
        Grid {
            p: 3,
            n_max: 2,
            report: run(3, 2, N),
        },
        Grid {
            p: 5,
            n_max: 1,
            report: run(5, 1, N),
        },
    ];
    type Criterion = (u32, &'static str, fn(&[Grid]) -> Outcome);
    let criteria: [Criterion; 12] = [
        (1, "Honda logarithm, ι and ι^(-1)", honda),
        (2, "ε: ℓ(ε) = p and ε ≡ p mod p^2", epsilon),
        (3, "d_0 = 1, norm and trace towers", norm_tower),
        (4, "closed-form logarithm of d_n", log_formula),
        (5, "generation of U^1_1 by d_1 and u (p = 3)", generation),
        (6, "Hilbert 90 exponent congruence", congruence),
        (7, "trivial zero, convolution, Gauss sums", coleman),
        (
            8,
            "Abel identity, w_0(p) formula, leading term",
            derivative_chain,
        ),
        (9, "negative control is detected", negative_control),
        (10, "Tate curve a_4, a_6, points and formal group", tate),
        (11, "derivative bookkeeping and generator invariance", mtt),
        (12, "determinism and N + 5 robustness", determinism),
    ];
    let mut unexpected = Vec::new();
    for (id, title, f) in criteria {
        let o = f(&grids);
        let documented = DOCUMENTED_UNATTAINABLE.contains(&id);
        let tag = match (o.ok, documented) {
            (true, _) => "PASS",
            (false, true) => "FAIL (documented)",
            (false, false) => "FAIL",
        };
        println!("criterion {id:2}: {tag:17} {title}");
        for n in &o.notes {
            println!("    {n}");
        }
        if o.ok == documented {
            unexpected.push(id);
        }
    }
    println!("acceptance finished in {:.1?}", start.elapsed());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcome for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
