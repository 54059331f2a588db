//! Canonical connection on the α-distribution line bundle, the self-dual
//! foliation criterion, and null conformal Killing fields K = K⁰𝔭₀ + K¹𝔭₁.

use serde::Serialize;
use thiserror::Error;

use crate::connection::{ConnectionComponents, FoliatedGeometry, FrameBrackets, IdentityGroup, OneForm};
use crate::fields::{Residual, ResidualStatus, ScalarField, TermSpec, ZeroTest};
use crate::metric::NeutralMetric;
use crate::tetrad::{NullTetrad, VectorField, FRAME_NAMES, NULL_GRAM};
use crate::twistor::{build_twistor_lift, check_basic, TwistorError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KillingError {
    #[error("fitted η from the tensor path ({tensor}) disagrees with 𝔭₀K⁰ = 𝔭₁K¹")]
    InconsistentEta { tensor: String },
    #[error("𝔭₀K⁰ and 𝔭₁K¹ differ, so no single η exists")]
    EtaMismatch,
    #[error("η vanishes identically")]
    ZeroEta,
    #[error(transparent)]
    Twistor(#[from] TwistorError),
}

const E0: usize = 0;
const E1: usize = 1;
const P0: usize = 2;
const P1: usize = 3;

#[derive(Clone, Debug)]
pub struct CanonicalConnection {
    pub tau: OneForm,
}

#[derive(Clone, Debug, Serialize)]
pub struct NonExistent {
    /// e(𝔭₀), e(𝔭₁) summaries.
    pub violations: IdentityGroup,
}

/// Residuals of the equations ((a+d)/2 + τ)(e_A) = 0, e(e_A) + ((a+d)/2 + τ)(𝔭_A) = 0, e(𝔭_A) = 0.
pub fn canonical_equations(c: &ConnectionComponents, tau: &OneForm) -> Vec<Residual> {
    let s = c.a.add(&c.d).half().add(tau);
    let e = &c.e.0;
    vec![
        Residual::new("((a+d)/2+tau)(e0)", s.0[E0].clone()),
        Residual::new("((a+d)/2+tau)(e1)", s.0[E1].clone()),
        Residual::new("e(e0)+((a+d)/2+tau)(p0)", &e[E0] + &s.0[P0]),
        Residual::new("e(e1)+((a+d)/2+tau)(p1)", &e[E1] + &s.0[P1]),
        Residual::new("e(p0)", e[P0].clone()),
        Residual::new("e(p1)", e[P1].clone()),
    ]
}

pub fn canonical_connection(
    c: &ConnectionComponents,
    zt: &ZeroTest,
) -> Result<CanonicalConnection, NonExistent> {
    let checks = [
        Residual::new("e(p0)", c.e.0[P0].clone()),
        Residual::new("e(p1)", c.e.0[P1].clone()),
    ];
    let violations = IdentityGroup::from_residuals("canonical-existence", &checks, zt);
    if !violations.pass {
        return Err(NonExistent { violations });
    }
    let apd = c.a.add(&c.d).half();
    let tau = OneForm([
        -&apd.0[E0],
        -&apd.0[E1],
        &(-&c.e.0[E0]) - &apd.0[P0],
        &(-&c.e.0[E1]) - &apd.0[P1],
    ]);
    Ok(CanonicalConnection { tau })
}

/// dθ(E_a, E_b) = E_a θ(E_b) − E_b θ(E_a) − θ([E_a, E_b]).
pub fn exterior_derivative(theta: &OneForm, t: &NullTetrad, br: &FrameBrackets, a: usize, b: usize) -> ScalarField {
    &(&t.frame[a].apply(&theta.0[b]) - &t.frame[b].apply(&theta.0[a])) - &theta.on(&br.c[a][b])
}

#[derive(Clone, Debug, Serialize)]
pub struct SdFoliationReport {
    pub pass: bool,
    pub criterion: IdentityGroup,
    pub curvature: IdentityGroup,
}

pub fn sd_foliation_residuals(g: &FoliatedGeometry) -> Vec<Residual> {
    let apd = g.components.a.add(&g.components.d);
    let p0 = |f: &ScalarField| g.tetrad.p0().apply(f);
    let p1 = |f: &ScalarField| g.tetrad.p1().apply(f);
    vec![
        Residual::new("p0(a+d)(e0)", p0(&apd.0[E0])),
        Residual::new("p1(a+d)(e1)", p1(&apd.0[E1])),
        Residual::new("p0(a+d)(e1)+p1(a+d)(e0)", &p0(&apd.0[E1]) + &p1(&apd.0[E0])),
    ]
}

pub fn dtau_residuals(g: &FoliatedGeometry, tau: &CanonicalConnection) -> Vec<Residual> {
    let d = |a, b| exterior_derivative(&tau.tau, &g.tetrad, &g.brackets, a, b);
    vec![
        Residual::new("dtau(e0,p0)", d(E0, P0)),
        Residual::new("dtau(e1,p1)", d(E1, P1)),
        Residual::new("dtau(e0,p1)+dtau(e1,p0)", &d(E0, P1) + &d(E1, P0)),
    ]
}

pub fn check_sd_foliation(
    g: &FoliatedGeometry,
    tau: &CanonicalConnection,
    zt: &ZeroTest,
) -> SdFoliationReport {
    let criterion = IdentityGroup::from_residuals("sd-foliation", &sd_foliation_residuals(g), zt);
    let curvature = IdentityGroup::from_residuals("dtau", &dtau_residuals(g, tau), zt);
    SdFoliationReport { pass: criterion.pass && curvature.pass, criterion, curvature }
}

/// K = K⁰𝔭₀ + K¹𝔭₁.
#[derive(Clone, Debug)]
pub struct KillingCandidate {
    pub k0: ScalarField,
    pub k1: ScalarField,
}

impl KillingCandidate {
    pub fn vector(&self, t: &NullTetrad) -> VectorField {
        t.p0().scale(&self.k0).add(&t.p1().scale(&self.k1))
    }
}

/// Chart components of ℒ_K g.
pub fn lie_derivative_metric(m: &NeutralMetric, k: &VectorField) -> [[ScalarField; 4]; 4] {
    let dk: Vec<Vec<ScalarField>> = (0..4).map(|c| (0..4).map(|i| k.0[c].differentiate(i)).collect()).collect();
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let mut terms = vec![k.apply(m.entry(i, j))];
            for c in 0..4 {
                terms.push(m.entry(c, j) * &dk[c][i]);
                terms.push(m.entry(i, c) * &dk[c][j]);
            }
            crate::fields::sum(&terms)
        })
    })
}

/// Frame components of ∇_{E_a}K: `v[a][i]`.
fn covariant_of_k(g: &FoliatedGeometry, k: &KillingCandidate) -> [[ScalarField; 4]; 4] {
    let w = &g.form.w;
    std::array::from_fn(|a| {
        let ea = &g.tetrad.frame[a];
        std::array::from_fn(|i| {
            let mut terms = vec![&w[i][P0].0[a] * &k.k0, &w[i][P1].0[a] * &k.k1];
            if i == P0 {
                terms.push(ea.apply(&k.k0));
            }
            if i == P1 {
                terms.push(ea.apply(&k.k1));
            }
            crate::fields::sum(&terms)
        })
    })
}

/// g(V, E_b) from frame components of V.
fn lower(v: &[ScalarField; 4], b: usize) -> ScalarField {
    match b {
        0 => v[3].clone(),
        1 => -&v[2],
        2 => -&v[1],
        _ => v[0].clone(),
    }
}

/// ℒ_K g(E_a, E_b) − η g(E_a, E_b) from connection components, labelled by equation group.
pub fn killing_component_residuals(
    g: &FoliatedGeometry,
    k: &KillingCandidate,
    eta: &ScalarField,
) -> Vec<Residual> {
    let v = covariant_of_k(g, k);
    let mut out = Vec::new();
    for a in 0..4 {
        for b in a..4 {
            let l = &lower(&v[a], b) + &lower(&v[b], a);
            let rhs = eta.scale_int(NULL_GRAM[a][b]);
            out.push(Residual::new(
                format!("L_K g({},{}) - eta g", FRAME_NAMES[a], FRAME_NAMES[b]),
                &l - &rhs,
            ));
        }
    }
    out
}

/// The five equation groups in their written form (valid when e = 0 and a..d vanish on 𝔭ᵢ).
pub fn killing_equation_groups(
    g: &FoliatedGeometry,
    k: &KillingCandidate,
    eta: &ScalarField,
) -> Vec<Residual> {
    let c = &g.components;
    let t = &g.tetrad;
    let (a, b, cc, d) = (&c.a.0, &c.b.0, &c.c.0, &c.d.0);
    let (k0, k1) = (&k.k0, &k.k1);
    vec![
        Residual::new("p0 K1", t.p0().apply(k1)),
        Residual::new("p1 K0", t.p1().apply(k0)),
        Residual::new("p0 K0 - eta", &t.p0().apply(k0) - eta),
        Residual::new("p1 K1 - eta", &t.p1().apply(k1) - eta),
        Residual::new(
            "e0 K1 + c0 K0 - a0 K1",
            crate::fields::sum(&[t.e0().apply(k1), &cc[E0] * k0, -(&a[E0] * k1)]),
        ),
        Residual::new(
            "e1 K0 - d1 K0 + b1 K1",
            crate::fields::sum(&[t.e1().apply(k0), -(&d[E1] * k0), &b[E1] * k1]),
        ),
        Residual::new(
            "e0 K0 - d0 K0 + b0 K1 - (e1 K1 + c1 K0 - a1 K1)",
            crate::fields::sum(&[
                t.e0().apply(k0),
                -(&d[E0] * k0),
                &b[E0] * k1,
                -t.e1().apply(k1),
                -(&cc[E1] * k0),
                &a[E1] * k1,
            ]),
        ),
    ]
}

#[derive(Clone, Debug, Serialize)]
pub struct KillingReport {
    pub killing: bool,
    pub eta: Vec<TermSpec>,
    pub eta_exact: bool,
    pub tensor: IdentityGroup,
    pub components: IdentityGroup,
    pub groups: IdentityGroup,
    pub eta_agreement: ResidualStatus,
}

#[derive(Clone, Debug)]
pub struct KillingCheck {
    pub report: KillingReport,
    pub eta: ScalarField,
}

pub fn check_conformal_killing(
    g: &FoliatedGeometry,
    k: &KillingCandidate,
    zt: &ZeroTest,
) -> Result<KillingCheck, KillingError> {
    let t = &g.tetrad;
    let eta0 = t.p0().apply(&k.k0);
    let eta1 = t.p1().apply(&k.k1);
    if !zt.status(&(&eta0 - &eta1)).passes() {
        return Err(KillingError::EtaMismatch);
    }
    let kv = k.vector(t);
    let lk = lie_derivative_metric(&g.metric, &kv);
    // fitted η = ℒ_K g(e₀, 𝔭₁)
    let lk_field = |x: &VectorField, y: &VectorField| -> ScalarField {
        let mut terms = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                terms.push(&(&lk[i][j] * &x.0[i]) * &y.0[j]);
            }
        }
        crate::fields::sum(&terms)
    };
    let eta = lk_field(t.e0(), t.p1());
    let mut tensor = Vec::new();
    for i in 0..4 {
        for j in i..4 {
            tensor.push(Residual::new(format!("L_K g_{i}{j} - eta g_{i}{j}"), &lk[i][j] - &(&eta * g.metric.entry(i, j))));
        }
    }
    let agreement = zt.status(&(&eta - &eta0));
    let tensor = IdentityGroup::from_residuals("tensor", &tensor, zt);
    let components = IdentityGroup::from_residuals("components", &killing_component_residuals(g, k, &eta0), zt);
    let groups = IdentityGroup::from_residuals("equation-groups", &killing_equation_groups(g, k, &eta0), zt);
    if tensor.pass && components.pass && !agreement.passes() {
        return Err(KillingError::InconsistentEta { tensor: format!("{eta:?}") });
    }
    let killing = tensor.pass && components.pass && agreement.passes();
    let report = KillingReport {
        killing,
        eta: eta.as_poly().map(|p| p.to_specs()).unwrap_or_default(),
        eta_exact: eta.is_polynomial(),
        tensor,
        components,
        groups,
        eta_agreement: agreement,
    };
    Ok(KillingCheck { report, eta })
}

/// Consequences of a null conformal Killing field on a self-dual metric.
#[derive(Clone, Debug, Serialize)]
pub struct KillingImplications {
    pub consequences: IdentityGroup,
    pub coefficient_identities: IdentityGroup,
    pub eta_derivatives: IdentityGroup,
    pub eta_nonzero_at_probes: bool,
    pub dw_basic: bool,
}

pub const ETA_MARGIN: f64 = 1e-9;

/// 𝔭₀a₁+𝔭₁a₀, 𝔭₀d₁+𝔭₁d₀, 𝔭₀a₀, 𝔭₁d₁, 𝔭₀b₁, 𝔭₁b₀ in their written form.
pub fn killing_consequence_residuals(g: &FoliatedGeometry) -> Vec<Residual> {
    let c = &g.components;
    let p0 = |f: &ScalarField| g.tetrad.p0().apply(f);
    let p1 = |f: &ScalarField| g.tetrad.p1().apply(f);
    vec![
        Residual::new("p0 a1 + p1 a0", &p0(&c.a.0[E1]) + &p1(&c.a.0[E0])),
        Residual::new("p0 d1 + p1 d0", &p0(&c.d.0[E1]) + &p1(&c.d.0[E0])),
        Residual::new("p0 a0", p0(&c.a.0[E0])),
        Residual::new("p1 d1", p1(&c.d.0[E1])),
        Residual::new("p0 b1", p0(&c.b.0[E1])),
        Residual::new("p1 b0", p1(&c.b.0[E0])),
    ]
}

/// 𝔭ᵢ applied to the fiber-affine coefficients: 𝔭ᵢc_k, 𝔭ᵢb_k, 𝔭ᵢ(a−d)_k.
pub fn killing_coefficient_residuals(g: &FoliatedGeometry) -> Vec<Residual> {
    let c = &g.components;
    let amd = c.a.sub(&c.d);
    let mut out = Vec::new();
    for (i, v) in [g.tetrad.p0(), g.tetrad.p1()].into_iter().enumerate() {
        for k in [E0, E1] {
            out.push(Residual::new(format!("p{i} c{k}"), v.apply(&c.c.0[k])));
            out.push(Residual::new(format!("p{i} b{k}"), v.apply(&c.b.0[k])));
            out.push(Residual::new(format!("p{i} (a-d){k}"), v.apply(&amd.0[k])));
        }
    }
    out
}

/// e₀η and e₁η against their four expressions in K and the components.
pub fn eta_derivative_residuals(g: &FoliatedGeometry, k: &KillingCandidate, eta: &ScalarField) -> Vec<Residual> {
    let c = &g.components;
    let t = &g.tetrad;
    let p0 = |f: &ScalarField| t.p0().apply(f);
    let p1 = |f: &ScalarField| t.p1().apply(f);
    let (k0, k1) = (&k.k0, &k.k1);
    let (a, b, cc, d) = (&c.a.0, &c.b.0, &c.c.0, &c.d.0);
    let e0eta = t.e0().apply(eta);
    let e1eta = t.e1().apply(eta);
    let d0c1 = &d[E0] + &cc[E1];
    let a1b0 = &a[E1] + &b[E0];
    let exprs = [
        ("e0 eta (1)", &e0eta, &(-(&p1(&cc[E0]) * k0)) + &(&p1(&a[E0]) * k1)),
        ("e1 eta (2)", &e1eta, &(&p0(&d[E1]) * k0) - &(&p0(&b[E1]) * k1)),
        ("e0 eta (3)", &e0eta, &(&p0(&d0c1) * k0) - &(&p0(&a1b0) * k1)),
        ("e1 eta (4)", &e1eta, &(-(&p1(&d0c1) * k0)) + &(&p1(&a1b0) * k1)),
    ];
    exprs.into_iter().map(|(id, lhs, rhs)| Residual::new(id, lhs - &rhs)).collect()
}

pub fn check_killing_implications(
    g: &FoliatedGeometry,
    k: &KillingCandidate,
    check: &KillingCheck,
    zt: &ZeroTest,
) -> Result<KillingImplications, KillingError> {
    let lift = build_twistor_lift(&g.components, &g.tetrad);
    // guard: the self-duality hypothesis
    let basic = check_basic(&lift, zt)?;
    if check.eta.is_exact_zero() || check.eta.is_identically_zero(ETA_MARGIN, zt.points().len()) {
        return Err(KillingError::ZeroEta);
    }
    let eta_nonzero_at_probes = zt.points().iter().all(|x| check.eta.eval_raw(x).abs() > ETA_MARGIN);
    Ok(KillingImplications {
        consequences: IdentityGroup::from_residuals("killing-consequences", &killing_consequence_residuals(g), zt),
        coefficient_identities: IdentityGroup::from_residuals(
            "killing-coefficients",
            &killing_coefficient_residuals(g),
            zt,
        ),
        eta_derivatives: IdentityGroup::from_residuals("eta-derivatives", &eta_derivative_residuals(g, k, &check.eta), zt),
        eta_nonzero_at_probes,
        dw_basic: basic.basic,
    })
}
