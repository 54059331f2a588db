//! Acceptance criteria 1–10, one PASS/FAIL line each. Exits non-zero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nsdt_core::connection::{verify_structural_identities, FoliatedGeometry};
use nsdt_core::curvature::{spin_curvature_plus, weyl_decomposition, AsdNorm};
use nsdt_core::fields::{rat, Polynomial, ResidualStatus, ScalarField, ZeroTest};
use nsdt_core::geodesics::{sample_beta_intersections, sample_zollfrei, TracerConfig};
use nsdt_core::killing::{canonical_connection, check_conformal_killing, check_killing_implications, check_sd_foliation, KillingCandidate};
use nsdt_core::metric::{check_sd_system_with, generate_sd_family, perturb_off_family, SdTriple};
use nsdt_core::spec::MetricSpec;
use nsdt_core::suite::{run_check_suite, SuiteOptions};
use nsdt_core::twistor::{
    build_twistor_lift, check_basic, check_lax_integrability, induced_projective_connection, reduction_residuals,
    LaxReport, TwistorLift,
};

const SEED: u64 = 42;
const FAMILY_SIZE: usize = 20;
const FIBER_DEGREE: u32 = 2;
const BASE_DEGREE: u32 = 1;

const EXAMPLE_BUDGET: Duration = Duration::from_secs(5);
const FORWARD_BUDGET: Duration = Duration::from_secs(60);
const ZOLLFREI_BUDGET: Duration = Duration::from_secs(30);

const ZOLLFREI_SAMPLES: usize = 50;
const ZOLLFREI_STEP: f64 = 1e-3;
const PERIOD_TOLERANCE: f64 = 1e-4;
const NULL_DEFECT_TOLERANCE: f64 = 1e-7;
const BETA_PAIRS: usize = 100;

fn x(a: usize) -> Polynomial {
    Polynomial::var(a)
}

fn example() -> SdTriple {
    let p = (&x(2) * &x(3)).scale(&rat(-2, 1));
    SdTriple { p: p.clone(), q: p, r: &x(2).pow(2) + &x(3).pow(2) }
}

fn family() -> Vec<SdTriple> {
    generate_sd_family(FIBER_DEGREE, BASE_DEGREE, SEED, FAMILY_SIZE).expect("feasible degrees")
}

fn geometry(t: &SdTriple, zt: &ZeroTest) -> FoliatedGeometry {
    FoliatedGeometry::new(&t.metric(), zt).expect("special form is foliated")
}

fn lift_of(g: &FoliatedGeometry) -> TwistorLift {
    build_twistor_lift(&g.components, &g.tetrad)
}

fn asd_exact(g: &FoliatedGeometry, zt: &ZeroTest) -> bool {
    let w = weyl_decomposition(&g.metric, &g.tetrad).expect("curvature");
    matches!(w.report(zt).asd_norm, AsdNorm::Exact(_))
}

fn asd_nonzero(g: &FoliatedGeometry, zt: &ZeroTest) -> bool {
    let w = weyl_decomposition(&g.metric, &g.tetrad).expect("curvature");
    let r = w.report(zt);
    !r.sd && matches!(r.asd_norm, AsdNorm::Max(v) if v > 0.0)
}

fn lax_exact(l: &LaxReport) -> bool {
    let exact = |s: &[nsdt_core::fields::ResidualSummary]| s.iter().all(|r| r.status == ResidualStatus::ExactZero);
    l.integrable && exact(&l.q2.residuals) && exact(&l.identity.residuals) && l.bracket_exact
}

fn omega_plus_basic(g: &FoliatedGeometry) -> bool {
    spin_curvature_plus(g).interior.iter().all(|r| r.field.is_exact_zero())
}

fn sd_foliation(g: &FoliatedGeometry, zt: &ZeroTest) -> bool {
    match canonical_connection(&g.components, zt) {
        Ok(tau) => check_sd_foliation(g, &tau, zt).pass,
        Err(_) => false,
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn criterion_1(zt: &ZeroTest) -> Outcome {
    let start = Instant::now();
    let t = example();
    let [p, q, r] = [&t.p, &t.q, &t.r].map(|f| ScalarField::from(f.clone()));
    let sd = check_sd_system_with(&p, &q, &r, zt);
    let sd_exact = sd.summaries.iter().all(|s| s.status == ResidualStatus::ExactZero);
    let g = geometry(&t, zt);
    let weyl = asd_exact(&g, zt);
    let lift = lift_of(&g);
    let lax = lax_exact(&check_lax_integrability(&lift, zt));
    let basic = check_basic(&lift, zt).expect("self-dual");
    let d2q1 = lift.tetrad.p0().apply(&lift.q[1]);
    let d2q1_nonzero = !d2q1.is_exact_zero();
    let basic_fails = !basic.basic && basic.criterion.residuals.iter().any(|r| r.id == "p0 q1" && !r.status.passes());
    let sdf_fails = !sd_foliation(&g, zt);
    let elapsed = start.elapsed();
    Outcome {
        pass: sd_exact && weyl && lax && basic_fails && d2q1_nonzero && sdf_fails && elapsed < EXAMPLE_BUDGET,
        detail: format!(
            "sd-system exact={sd_exact} W- exact-zero={weyl} lax exact={lax} basic fails={basic_fails} (d2 q1 = {}) sd-foliation fails={sdf_fails} {:.2}s",
            d2q1.as_poly().map(|p| p.to_string()).unwrap_or_default(),
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_2(zt: &ZeroTest) -> Outcome {
    let start = Instant::now();
    let fam = family();
    let mut ok = 0;
    for t in &fam {
        let g = geometry(t, zt);
        if asd_exact(&g, zt) && lax_exact(&check_lax_integrability(&lift_of(&g), zt)) {
            ok += 1;
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: ok == fam.len() && elapsed < FORWARD_BUDGET,
        detail: format!("{ok}/{} exact on both oracles, {:.2}s", fam.len(), elapsed.as_secs_f64()),
    }
}

fn criterion_3(zt: &ZeroTest) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let fam = family();
    let mut both = 0;
    let mut disagree = 0;
    for t in &fam {
        let off = perturb_off_family(t, &mut rng);
        let g = geometry(&off, zt);
        let weyl_fails = asd_nonzero(&g, zt);
        let lax_fails = !check_lax_integrability(&lift_of(&g), zt).integrable;
        if weyl_fails && lax_fails {
            both += 1;
        } else if weyl_fails != lax_fails {
            disagree += 1;
        }
    }
    Outcome {
        pass: both == fam.len(),
        detail: format!("{both}/{} fail on both oracles, {disagree} disagreements", fam.len()),
    }
}

fn criterion_4(zt: &ZeroTest) -> Outcome {
    let mut set = family();
    set.push(example());
    let (mut agree_a, mut agree_b, mut basic_count) = (0, 0, 0);
    for t in &set {
        let g = geometry(t, zt);
        let basic = check_basic(&lift_of(&g), zt).expect("self-dual").basic;
        basic_count += basic as usize;
        agree_a += (basic == omega_plus_basic(&g)) as usize;
        agree_b += (basic == sd_foliation(&g, zt)) as usize;
    }
    let n = set.len();
    Outcome {
        pass: agree_a == n && agree_b == n,
        detail: format!("(a) {agree_a}/{n} (b) {agree_b}/{n}, {basic_count} basic"),
    }
}

fn criterion_5(zt: &ZeroTest) -> Outcome {
    let mut set = family();
    set.push(example());
    // fiber-affine members are basic, so the check is never vacuous
    set.extend(generate_sd_family(1, BASE_DEGREE, SEED, FAMILY_SIZE).expect("feasible degrees"));
    let (mut basic, mut exact) = (0, 0);
    for t in &set {
        let g = geometry(t, zt);
        let lift = lift_of(&g);
        if !check_basic(&lift, zt).expect("self-dual").basic {
            continue;
        }
        basic += 1;
        let conn = induced_projective_connection(&lift, zt).expect("basic");
        if reduction_residuals(&conn, &lift).iter().all(|r| r.field.is_exact_zero()) {
            exact += 1;
        }
    }
    Outcome { pass: basic > 0 && exact == basic, detail: format!("{exact}/{basic} basic triples match coefficient-wise") }
}

fn criterion_6(zt: &ZeroTest) -> Outcome {
    let mut set = family();
    set.push(example());
    let names = ["ideal", "commutators", "fiber-vanishing", "b=c", "self-duality-printed"];
    let mut holds = [0usize; 5];
    let mut corrected = 0;
    for t in &set {
        let g = geometry(t, zt);
        let r = verify_structural_identities(&g, true, zt);
        for (k, name) in names.iter().enumerate() {
            let group = r.group(name).expect("group present");
            if group.residuals.iter().all(|s| s.status == ResidualStatus::ExactZero) {
                holds[k] += 1;
            }
        }
        corrected += r.group("self-duality").is_some_and(|g| g.pass) as usize;
    }
    let n = set.len();
    let detail = names.iter().zip(holds).map(|(name, h)| format!("{name} {h}/{n}")).collect::<Vec<_>>().join(", ");
    Outcome {
        pass: holds.iter().all(|&h| h == n),
        detail: format!("{detail}; derived self-duality identities {corrected}/{n}"),
    }
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let cfg = TracerConfig { step: ZOLLFREI_STEP, ..TracerConfig::default() };
    let r = sample_zollfrei(ZOLLFREI_SAMPLES, SEED, &cfg).expect("tracer");
    let elapsed = start.elapsed();
    let closed = r.samples.iter().filter(|s| matches!(s.closure, nsdt_core::geodesics::Closure::Closed { .. })).count();
    Outcome {
        pass: r.all_closed
            && r.max_period_error < PERIOD_TOLERANCE
            && r.max_null_defect < NULL_DEFECT_TOLERANCE
            && elapsed < ZOLLFREI_BUDGET,
        detail: format!(
            "{closed}/{ZOLLFREI_SAMPLES} closed, max |T-2pi| {:.2e} (2pi = {:.4}), max null defect {:.2e}, {:.2}s",
            r.max_period_error,
            2.0 * PI,
            r.max_null_defect,
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_8() -> Outcome {
    let r = sample_beta_intersections(BETA_PAIRS, SEED).expect("sampling");
    let compared = BETA_PAIRS - r.skipped_identical;
    let two = r.histogram.get(&2).copied().unwrap_or(0);
    Outcome {
        pass: compared > 0 && two == compared && r.beta_planes == r.planes_sampled,
        detail: format!(
            "histogram {:?}, {} identical skipped, {}/{} tangent planes beta",
            r.histogram, r.skipped_identical, r.beta_planes, r.planes_sampled
        ),
    }
}

fn criterion_9(zt: &ZeroTest) -> Outcome {
    let t = SdTriple {
        p: &(&x(0) * &x(2)) + &x(3).scale(&rat(2, 1)),
        q: &(&x(1) * &x(3)) - &x(2),
        r: &(&x(1) * &x(2)) + &(&x(0) * &x(3)),
    };
    let g = geometry(&t, zt);
    let k = KillingCandidate { k0: x(2).into(), k1: x(3).into() };
    let check = check_conformal_killing(&g, &k, zt).expect("consistent η");
    let rep = &check.report;
    let eta_one = check.eta.as_poly() == Some(&Polynomial::from_int(1));
    let dual_path = rep.tensor.pass && rep.components.pass && rep.eta_agreement == ResidualStatus::ExactZero;
    let groups_exact = rep.groups.residuals.iter().all(|r| r.status == ResidualStatus::ExactZero);
    let implications = check_killing_implications(&g, &k, &check, zt).expect("self-dual, η ≠ 0");
    let sd = asd_exact(&g, zt);
    Outcome {
        pass: sd && rep.killing && eta_one && dual_path && groups_exact && implications.dw_basic,
        detail: format!(
            "sd={sd} killing={} eta=1:{eta_one} dual-path={dual_path} equations exact={groups_exact} basic={}",
            rep.killing, implications.dw_basic
        ),
    }
}

fn criterion_10() -> Outcome {
    let opts = SuiteOptions::default();
    let mut specs = vec![("example".to_string(), MetricSpec::special_form(&example()))];
    specs.extend(family().iter().take(3).enumerate().map(|(i, t)| (format!("family-{i}"), MetricSpec::special_form(t))));
    let mut identical = 0;
    for (id, spec) in &specs {
        let a = run_check_suite(spec, id, &opts).expect("valid spec").to_json();
        let b = run_check_suite(spec, id, &opts).expect("valid spec").to_json();
        identical += (a == b) as usize;
    }
    Outcome { pass: identical == specs.len(), detail: format!("{identical}/{} specs byte-identical", specs.len()) }
}

fn main() -> ExitCode {
    let zt = ZeroTest::default();
    let criteria: Vec<(u32, Box<dyn Fn() -> Outcome>)> = vec![
        (1, Box::new(|| criterion_1(&zt))),
        (2, Box::new(|| criterion_2(&zt))),
        (3, Box::new(|| criterion_3(&zt))),
        (4, Box::new(|| criterion_4(&zt))),
        (5, Box::new(|| criterion_5(&zt))),
        (6, Box::new(|| criterion_6(&zt))),
        (7, Box::new(criterion_7)),
        (8, Box::new(criterion_8)),
        (9, Box::new(|| criterion_9(&zt))),
        (10, Box::new(criterion_10)),
    ];
    let mut failed = Vec::new();
    for (n, run) in &criteria {
        let o = run();
        println!("criterion {n:>2}: {}  {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(*n);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
