//! Full check pipeline over a metric spec, with dependency-aware skipping.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use crate::connection::{verify_structural_identities, FoliatedGeometry, IdentityGroup};
use crate::curvature::{weyl_decomposition, WeylReport};
use crate::fields::{ProbeConfig, Residual, ResidualStatus, ResidualSummary, TermSpec, ZeroTest};
use crate::killing::{canonical_connection, check_conformal_killing, check_killing_implications, check_sd_foliation};
use crate::metric::{sd_residuals, MetricBackend};
use crate::spec::{BackendSpec, MetricSpec, SpecParseError};
use crate::twistor::{
    build_twistor_lift, check_basic, check_lax_integrability, induced_projective_connection,
    reduction_residuals, serialize_coeffs, TwistorReport,
};

pub const CHECK_NAMES: [&str; 7] = ["signature", "sd", "integrable", "basic", "sd_foliation", "killing", "structural"];

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", content = "reason", rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped(String),
    ExactZero,
}

impl CheckStatus {
    pub fn passes(&self) -> bool {
        matches!(self, CheckStatus::Pass | CheckStatus::ExactZero)
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, CheckStatus::Fail)
    }

    fn from_summaries(s: &[ResidualSummary]) -> Self {
        if s.iter().all(|r| r.status == ResidualStatus::ExactZero) {
            CheckStatus::ExactZero
        } else if s.iter().all(|r| r.status.passes()) {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        }
    }

    /// Downgrades to `Fail` when an extra condition does not hold.
    fn and(self, ok: bool) -> Self {
        if ok {
            self
        } else {
            CheckStatus::Fail
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    #[serde(flatten)]
    pub status: CheckStatus,
    /// Ids of residuals that do not vanish.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failing: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub residuals: Vec<ResidualSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<serde_json::Value>,
}

impl CheckOutcome {
    fn skipped(name: &str, reason: impl Into<String>) -> Self {
        Self { name: name.into(), status: CheckStatus::Skipped(reason.into()), failing: vec![], residuals: vec![], details: None }
    }

    fn from_summaries(name: &str, residuals: Vec<ResidualSummary>) -> Self {
        let status = CheckStatus::from_summaries(&residuals);
        let failing = residuals.iter().filter(|r| !r.status.passes()).map(|r| r.id.clone()).collect();
        Self { name: name.into(), status, failing, residuals, details: None }
    }

    fn with_details(mut self, details: serde_json::Value) -> Self {
        self.details = Some(details);
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KillingSummary {
    pub killing: bool,
    pub eta: Vec<TermSpec>,
    pub dw_basic: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeSummary {
    pub seed: u64,
    pub count: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckSuiteReport {
    pub metric_id: String,
    pub backend: String,
    pub tolerance: f64,
    pub probes: ProbeSummary,
    pub pass: bool,
    pub checks: Vec<CheckOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weyl: Option<WeylReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub twistor: Option<TwistorReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub killing: Option<KillingSummary>,
    /// Reported only; never part of `pass`.
    pub informational: Vec<IdentityGroup>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub tolerance: f64,
    pub probes: ProbeConfig,
    pub timings: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, probes: ProbeConfig::default(), timings: false }
    }
}

impl CheckSuiteReport {
    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "metric {} ({})", self.metric_id, self.backend);
        for c in &self.checks {
            let status = match &c.status {
                CheckStatus::Pass => "pass".to_string(),
                CheckStatus::Fail => "fail".to_string(),
                CheckStatus::ExactZero => "exact-zero".to_string(),
                CheckStatus::Skipped(r) => format!("skipped ({r})"),
            };
            let _ = write!(s, "  {:<13} {status}", c.name);
            if !c.failing.is_empty() {
                let _ = write!(s, "  [{}]", c.failing.join(", "));
            }
            s.push('\n');
        }
        for g in &self.informational {
            let _ = writeln!(s, "  info {:<18} {}", g.name, if g.pass { "holds" } else { "does not hold" });
        }
        if let Some(t) = &self.timings_ms {
            let total: f64 = t.values().sum();
            let _ = writeln!(s, "  time {total:.1} ms");
        }
        let _ = writeln!(s, "{}", if self.pass { "PASS" } else { "FAIL" });
        s
    }
}

fn backend_name(spec: &MetricSpec) -> &'static str {
    match spec.backend {
        BackendSpec::SpecialForm { .. } => "special-form",
        BackendSpec::ProductSphere { .. } => "product-sphere",
        BackendSpec::Generic { .. } => "generic",
    }
}

struct Timer {
    on: bool,
    map: BTreeMap<String, f64>,
    last: Instant,
}

impl Timer {
    fn lap(&mut self, name: &str) {
        if self.on {
            let now = Instant::now();
            self.map.insert(name.to_string(), (now - self.last).as_secs_f64() * 1e3);
            self.last = now;
        }
    }
}

fn summarize(rs: &[Residual], zt: &ZeroTest) -> Vec<ResidualSummary> {
    rs.iter().map(|r| r.summarize(zt)).collect()
}

fn prefixed(groups: &[IdentityGroup]) -> Vec<ResidualSummary> {
    groups
        .iter()
        .flat_map(|g| {
            g.residuals.iter().map(move |r| ResidualSummary { id: format!("{}: {}", g.name, r.id), status: r.status.clone() })
        })
        .collect()
}

/// Runs every check on the metric described by `spec`.
pub fn run_check_suite(
    spec: &MetricSpec,
    metric_id: &str,
    opts: &SuiteOptions,
) -> Result<CheckSuiteReport, SpecParseError> {
    let mut timer = Timer { on: opts.timings, map: BTreeMap::new(), last: Instant::now() };
    let zt = ZeroTest::new(opts.tolerance, &opts.probes);
    let m = spec.build()?;
    let killing_candidate = spec.killing_candidate()?;
    timer.lap("build");

    let mut report = CheckSuiteReport {
        metric_id: metric_id.to_string(),
        backend: backend_name(spec).to_string(),
        tolerance: opts.tolerance,
        probes: ProbeSummary { seed: opts.probes.seed, count: opts.probes.count },
        pass: true,
        checks: Vec::new(),
        weyl: None,
        twistor: None,
        killing: None,
        informational: Vec::new(),
        timings_ms: None,
    };
    let skip_rest = |report: &mut CheckSuiteReport, from: usize, reason: &str| {
        for name in &CHECK_NAMES[from..] {
            report.checks.push(CheckOutcome::skipped(name, reason));
        }
    };

    match m.check_signature(&opts.probes) {
        Ok(()) => report.checks.push(CheckOutcome {
            name: "signature".into(),
            status: CheckStatus::Pass,
            failing: vec![],
            residuals: vec![],
            details: None,
        }),
        Err(e) => {
            report.checks.push(CheckOutcome {
                name: "signature".into(),
                status: CheckStatus::Fail,
                failing: vec![],
                residuals: vec![],
                details: Some(json!({ "error": e.to_string() })),
            });
            skip_rest(&mut report, 1, "metric is not neutral");
            return Ok(finish(report, timer));
        }
    }

    let g = match FoliatedGeometry::new(&m, &zt) {
        Ok(g) => g,
        Err(e) => {
            skip_rest(&mut report, 1, &format!("no adapted foliation tetrad: {e}"));
            timer.lap("tetrad");
            return Ok(finish(report, timer));
        }
    };
    timer.lap("tetrad");

    // sd: PDE system (special form) and the Weyl oracle
    let mut sd_summaries = Vec::new();
    if let MetricBackend::SpecialForm { p, q, r } = m.backend() {
        sd_summaries.extend(summarize(&sd_residuals(p, q, r), &zt));
    }
    let sd = match weyl_decomposition(&m, &g.tetrad) {
        Ok(w) => {
            let wr = w.report(&zt);
            for i in 0..3 {
                for j in i..3 {
                    sd_summaries.push(Residual::new(format!("W-[{i}{j}]"), w.w_minus[i][j].clone()).summarize(&zt));
                }
            }
            let outcome = CheckOutcome::from_summaries("sd", sd_summaries);
            report.weyl = Some(wr);
            outcome
        }
        Err(e) => CheckOutcome::skipped("sd", format!("curvature unavailable: {e}")),
    };
    let self_dual = sd.status.passes();
    report.checks.push(sd);
    timer.lap("sd");

    let lift = build_twistor_lift(&g.components, &g.tetrad);
    let lax = check_lax_integrability(&lift, &zt);
    let mut lax_summaries = lax.q2.residuals.clone();
    lax_summaries.extend(lax.identity.residuals.iter().cloned());
    let mut integrable = CheckOutcome::from_summaries("integrable", lax_summaries).with_details(json!({
        "bracket_pass": lax.bracket_pass,
        "bracket_exact": lax.bracket_exact,
    }));
    integrable.status = integrable.status.and(lax.bracket_pass);
    report.checks.push(integrable);
    timer.lap("integrable");

    let mut twistor =
        TwistorReport { q_coeffs: serialize_coeffs(&lift.q), integrable: lax.integrable, basic: None, reduction_identity: None };
    let basic = if !self_dual {
        CheckOutcome::skipped("basic", "requires self-duality (sd failed)")
    } else {
        match check_basic(&lift, &zt) {
            Err(e) => CheckOutcome::skipped("basic", e.to_string()),
            Ok(b) => {
                twistor.basic = Some(b.basic);
                if b.basic {
                    twistor.reduction_identity = induced_projective_connection(&lift, &zt)
                        .ok()
                        .map(|conn| reduction_residuals(&conn, &lift).iter().all(|r| zt.status(&r.field).passes()));
                }
                CheckOutcome::from_summaries("basic", b.criterion.residuals).with_details(json!({
                    "printed_form": b.printed_form.pass,
                    "reduction_identity": twistor.reduction_identity,
                }))
            }
        }
    };
    report.checks.push(basic);
    report.twistor = Some(twistor);
    timer.lap("basic");

    let sdf = match canonical_connection(&g.components, &zt) {
        Err(ne) => {
            let bad: Vec<_> = ne.violations.residuals.iter().filter(|r| !r.status.passes()).map(|r| r.id.clone()).collect();
            CheckOutcome::skipped("sd_foliation", format!("canonical connection does not exist ({} nonzero)", bad.join(", ")))
        }
        Ok(tau) => {
            let r = check_sd_foliation(&g, &tau, &zt);
            CheckOutcome::from_summaries("sd_foliation", prefixed(&[r.criterion, r.curvature]))
        }
    };
    report.checks.push(sdf);
    timer.lap("sd_foliation");

    let killing = match killing_candidate {
        None => CheckOutcome::skipped("killing", "no killing field in spec"),
        Some(k) => match check_conformal_killing(&g, &k, &zt) {
            Err(e) => CheckOutcome {
                name: "killing".into(),
                status: CheckStatus::Fail,
                failing: vec![],
                residuals: vec![],
                details: Some(json!({ "error": e.to_string() })),
            },
            Ok(check) => {
                let rep = &check.report;
                let dw_basic = if self_dual && rep.killing {
                    check_killing_implications(&g, &k, &check, &zt).ok().map(|i| i.dw_basic)
                } else {
                    None
                };
                report.killing = Some(KillingSummary { killing: rep.killing, eta: rep.eta.clone(), dw_basic });
                let mut summaries = prefixed(&[rep.tensor.clone(), rep.components.clone(), rep.groups.clone()]);
                summaries.push(ResidualSummary { id: "eta agreement".into(), status: rep.eta_agreement.clone() });
                let mut out = CheckOutcome::from_summaries("killing", summaries);
                out.status = out.status.and(rep.killing);
                out
            }
        },
    };
    report.checks.push(killing);
    timer.lap("killing");

    let structural = verify_structural_identities(&g, self_dual, &zt);
    report.checks.push(CheckOutcome::from_summaries("structural", prefixed(&structural.groups)));
    report.informational = structural.informational;
    timer.lap("structural");

    Ok(finish(report, timer))
}

fn finish(mut report: CheckSuiteReport, timer: Timer) -> CheckSuiteReport {
    report.pass = !report.checks.iter().any(|c| c.status.is_failure());
    if timer.on {
        report.timings_ms = Some(timer.map);
    }
    report
}
