//! Twistor lift 𝔪₁ = e₀+ζe₁+Q₁(ζ)∂ζ, 𝔪₂ = 𝔭₀+ζ𝔭₁+Q₂(ζ)∂ζ, its integrability,
//! the basic criterion, and the induced projective structure on the leaf space.

use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;
use serde::Serialize;
use thiserror::Error;

use crate::connection::{ConnectionComponents, IdentityGroup};
use crate::fields::{rat, sum, ChartPoint, Residual, ScalarField, TermSpec, ZeroTest};
use crate::metric::NeutralMetric;
use crate::tetrad::{NullTetrad, VectorField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TwistorError {
    #[error("metric is not self-dual: {0} does not vanish")]
    NotSelfDual(String),
    #[error("foliation is not basic: {0} does not vanish")]
    NotBasic(String),
}

const E0: usize = 0;
const E1: usize = 1;
const P0: usize = 2;
const P1: usize = 3;

/// ζ values for the direct bracket test.
pub const LAX_SAMPLE_ZETAS: [(i64, i64); 5] = [(-2, 1), (-1, 2), (0, 1), (1, 3), (3, 1)];

#[derive(Clone, Debug)]
pub struct TwistorLift {
    /// Q₁(ζ) = q₀ + q₁ζ + q₂ζ² + q₃ζ³.
    pub q: [ScalarField; 4],
    /// Coefficients of Q₂(ζ).
    pub q2: [ScalarField; 4],
    pub tetrad: NullTetrad,
    pub components: ConnectionComponents,
}

/// Coefficients of −(c + ζ(d−a) − ζ²b)(X + ζY) for X, Y = frame directions `x`, `y`.
fn lift_cubic(c: &ConnectionComponents, x: usize, y: usize) -> [ScalarField; 4] {
    let amd = c.a.sub(&c.d);
    [
        -&c.c.0[x],
        &amd.0[x] - &c.c.0[y],
        &amd.0[y] + &c.b.0[x],
        c.b.0[y].clone(),
    ]
}

pub fn build_twistor_lift(c: &ConnectionComponents, t: &NullTetrad) -> TwistorLift {
    TwistorLift {
        q: lift_cubic(c, E0, E1),
        q2: lift_cubic(c, P0, P1),
        tetrad: t.clone(),
        components: c.clone(),
    }
}

/// Σ fₖζᵏ at a rational ζ.
fn eval_cubic(f: &[ScalarField], z: &BigRational) -> ScalarField {
    let mut acc = ScalarField::zero();
    for c in f.iter().rev() {
        acc = &acc.scale(z) + c;
    }
    acc
}

fn derivative_cubic(f: &[ScalarField; 4]) -> [ScalarField; 3] {
    [f[1].clone(), f[2].scale_int(2), f[3].scale_int(3)]
}

impl TwistorLift {
    pub fn q2_residuals(&self) -> Vec<Residual> {
        self.q2.iter().enumerate().map(|(k, f)| Residual::new(format!("Q2 zeta^{k}"), f.clone())).collect()
    }

    /// ζ-coefficients of (𝔭₀+ζ𝔭₁)Q₁(ζ).
    pub fn identity_residuals(&self) -> Vec<Residual> {
        let p0 = |k: usize| self.tetrad.p0().apply(&self.q[k]);
        let p1 = |k: usize| self.tetrad.p1().apply(&self.q[k]);
        vec![
            Residual::new("p0 q0", p0(0)),
            Residual::new("p0 q1 + p1 q0", &p0(1) + &p1(0)),
            Residual::new("p0 q2 + p1 q1", &p0(2) + &p1(1)),
            Residual::new("p0 q3 + p1 q2", &p0(3) + &p1(2)),
            Residual::new("p1 q3", p1(3)),
        ]
    }

    /// 𝔪₁, 𝔪₂ and [𝔪₁, 𝔪₂] at fixed ζ, as 5-component fields (x⁰..x³, ζ).
    pub fn lifted_fields(&self, z: &BigRational) -> [[ScalarField; 5]; 3] {
        let t = &self.tetrad;
        let x = t.e0().add(&t.e1().scale(&ScalarField::constant(z.clone())));
        let y = t.p0().add(&t.p1().scale(&ScalarField::constant(z.clone())));
        let q1 = eval_cubic(&self.q, z);
        let q2 = eval_cubic(&self.q2, z);
        let dq1 = eval_cubic(&derivative_cubic(&self.q), z);
        let dq2 = eval_cubic(&derivative_cubic(&self.q2), z);
        let chart = x.bracket(&y).add(&t.p1().scale(&q1)).sub(&t.e1().scale(&q2));
        let fiber = sum(&[x.apply(&q2), &q1 * &dq2, -y.apply(&q1), -(&q2 * &dq1)]);
        let five = |v: &VectorField, f: ScalarField| -> [ScalarField; 5] {
            [v.0[0].clone(), v.0[1].clone(), v.0[2].clone(), v.0[3].clone(), f]
        };
        [five(&x, q1), five(&y, q2), five(&chart, fiber)]
    }

    /// 3×3 minors of [𝔪₁ 𝔪₂ [𝔪₁,𝔪₂]] at each sampled ζ; all vanish iff the bracket lies in the span.
    pub fn bracket_minors(&self) -> Vec<(String, ScalarField)> {
        let mut out = Vec::new();
        for &(n, d) in &LAX_SAMPLE_ZETAS {
            let z = rat(n, d);
            let cols = self.lifted_fields(&z);
            for r0 in 0..5 {
                for r1 in (r0 + 1)..5 {
                    for r2 in (r1 + 1)..5 {
                        let e = |r: usize, c: usize| &cols[c][r];
                        let m = [r0, r1, r2];
                        let det = sum(&[
                            &(e(m[0], 0) * e(m[1], 1)) * e(m[2], 2),
                            &(e(m[1], 0) * e(m[2], 1)) * e(m[0], 2),
                            &(e(m[2], 0) * e(m[0], 1)) * e(m[1], 2),
                            -(&(e(m[2], 0) * e(m[1], 1)) * e(m[0], 2)),
                            -(&(e(m[1], 0) * e(m[0], 1)) * e(m[2], 2)),
                            -(&(e(m[0], 0) * e(m[2], 1)) * e(m[1], 2)),
                        ]);
                        out.push((format!("zeta={z} minor {r0}{r1}{r2}"), det));
                    }
                }
            }
        }
        out
    }

    /// Least-squares residual of [𝔪₁,𝔪₂] against span{𝔪₁,𝔪₂}, per ζ and point.
    pub fn bracket_least_squares(&self, points: &[ChartPoint]) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for &(n, d) in &LAX_SAMPLE_ZETAS {
            let z = rat(n, d);
            let cols = self.lifted_fields(&z);
            for (i, x) in points.iter().enumerate() {
                let a = DMatrix::from_fn(5, 2, |r, c| cols[c][r].eval_raw(x));
                let b = DVector::from_fn(5, |r, _| cols[2][r].eval_raw(x));
                let res = match a.clone().svd(true, true).solve(&b, 1e-12) {
                    Ok(sol) => (&a * sol - &b).amax(),
                    Err(_) => f64::NAN,
                };
                out.push((format!("zeta={z} probe {i}"), res));
            }
        }
        out
    }
}

pub const BRACKET_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct LaxReport {
    pub integrable: bool,
    pub q2: IdentityGroup,
    pub identity: IdentityGroup,
    /// Direct bracket test: exact minors on polynomial data, least squares otherwise.
    pub bracket_pass: bool,
    pub bracket_max: f64,
    pub bracket_exact: bool,
}

pub fn check_lax_integrability(lift: &TwistorLift, zt: &ZeroTest) -> LaxReport {
    let q2 = IdentityGroup::from_residuals("Q2", &lift.q2_residuals(), zt);
    let identity = IdentityGroup::from_residuals("(p0+zeta p1)Q1", &lift.identity_residuals(), zt);
    let minors = lift.bracket_minors();
    let polynomial = minors.iter().all(|(_, f)| f.is_polynomial());
    let (bracket_pass, bracket_max, bracket_exact) = if polynomial {
        let all_zero = minors.iter().all(|(_, f)| f.is_exact_zero());
        let max = minors
            .iter()
            .flat_map(|(_, f)| zt.points().iter().map(move |x| f.eval_raw(x).abs()))
            .fold(0.0, f64::max);
        (all_zero, max, all_zero)
    } else {
        let ls = lift.bracket_least_squares(zt.points());
        let max = ls.iter().map(|(_, v)| *v).fold(0.0, |a: f64, b| if b.is_nan() { f64::INFINITY } else { a.max(b) });
        (max <= BRACKET_TOLERANCE, max, false)
    };
    LaxReport { integrable: q2.pass && identity.pass, q2, identity, bracket_pass, bracket_max, bracket_exact }
}

#[derive(Clone, Debug, Serialize)]
pub struct BasicReport {
    pub basic: bool,
    /// 𝔭ᵢqⱼ.
    pub criterion: IdentityGroup,
    /// 𝔭ᵢb(e_k) and 𝔭ᵢ(a−d)(e_k), reported only.
    pub printed_form: IdentityGroup,
}

pub fn basic_residuals(lift: &TwistorLift) -> Vec<Residual> {
    let mut out = Vec::new();
    for (i, v) in [lift.tetrad.p0(), lift.tetrad.p1()].into_iter().enumerate() {
        for j in 0..4 {
            out.push(Residual::new(format!("p{i} q{j}"), v.apply(&lift.q[j])));
        }
    }
    out
}

pub fn printed_basic_residuals(lift: &TwistorLift) -> Vec<Residual> {
    let c = &lift.components;
    let amd = c.a.sub(&c.d);
    let mut out = Vec::new();
    for (i, v) in [lift.tetrad.p0(), lift.tetrad.p1()].into_iter().enumerate() {
        for k in [E0, E1] {
            out.push(Residual::new(format!("p{i} b(e{k})"), v.apply(&c.b.0[k])));
            out.push(Residual::new(format!("p{i} (a-d)(e{k})"), v.apply(&amd.0[k])));
        }
    }
    out
}

pub fn check_basic(lift: &TwistorLift, zt: &ZeroTest) -> Result<BasicReport, TwistorError> {
    let lax = check_lax_integrability(lift, zt);
    if !lax.integrable {
        let bad = lax
            .q2
            .residuals
            .iter()
            .chain(&lax.identity.residuals)
            .find(|r| !r.status.passes())
            .map(|r| r.id.clone())
            .unwrap_or_default();
        return Err(TwistorError::NotSelfDual(bad));
    }
    let criterion = IdentityGroup::from_residuals("basic", &basic_residuals(lift), zt);
    let printed_form = IdentityGroup::from_residuals("basic-printed", &printed_basic_residuals(lift), zt);
    Ok(BasicReport { basic: criterion.pass, criterion, printed_form })
}

/// Torsion-free connection on the leaf chart (y⁰, y¹) = (x⁰, x¹).
#[derive(Clone, Debug)]
pub struct ProjectiveConnection2D {
    /// `omega[i][j][k]` = ωⁱ_j(∂_{yᵏ}) = Γⁱ_{kj}.
    pub omega: [[[ScalarField; 2]; 2]; 2],
    pub representative: Representative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representative {
    /// Built from b, c and a−d, which all descend.
    Components,
    /// Built from q₀..q₃ alone when the individual components do not descend.
    Normalized,
}

impl ProjectiveConnection2D {
    pub fn zero() -> Self {
        Self { omega: std::array::from_fn(|_| std::array::from_fn(|_| std::array::from_fn(|_| ScalarField::zero()))), representative: Representative::Components }
    }

    /// Connection with the given Christoffels Γⁱ_{kj}, indexed `[i][k][j]`.
    pub fn from_christoffel(gamma: [[[ScalarField; 2]; 2]; 2]) -> Self {
        Self {
            omega: std::array::from_fn(|i| std::array::from_fn(|j| std::array::from_fn(|k| gamma[i][k][j].clone()))),
            representative: Representative::Components,
        }
    }

    pub fn torsion_residuals(&self) -> Vec<Residual> {
        (0..2)
            .map(|i| Residual::new(format!("torsion^{i}_01"), &self.omega[i][1][0] - &self.omega[i][0][1]))
            .collect()
    }

    /// Coefficients F₀..F₃ of the ζ-component −(ω¹₀ + ζ(ω¹₁−ω⁰₀) − ζ²ω⁰₁)(∂₀+ζ∂₁).
    pub fn spray_coefficients(&self) -> [ScalarField; 4] {
        let w = &self.omega;
        let diff = |k: usize| &w[1][1][k] - &w[0][0][k];
        [
            -&w[1][0][0],
            -(&w[1][0][1] + &diff(0)),
            &w[0][1][0] - &diff(1),
            w[0][1][1].clone(),
        ]
    }
}

/// Which affine chart of ℝP¹ the fiber coordinate lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FiberChart {
    /// ζ, direction ∂₀ + ζ∂₁.
    Affine,
    /// ζ̃ = 1/ζ, direction ζ̃∂₀ + ∂₁.
    Inverted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SprayState {
    pub y: [f64; 2],
    pub zeta: f64,
    pub chart: FiberChart,
}

impl SprayState {
    pub fn point(&self) -> ChartPoint {
        ChartPoint::new([self.y[0], self.y[1], 0.0, 0.0]).expect("finite leaf coordinates")
    }

    /// Same direction in the other chart; the caller tracks orientation via the sign of ζ.
    pub fn switched(&self) -> SprayState {
        SprayState {
            y: self.y,
            zeta: 1.0 / self.zeta,
            chart: match self.chart {
                FiberChart::Affine => FiberChart::Inverted,
                FiberChart::Inverted => FiberChart::Affine,
            },
        }
    }
}

/// Spray vector (ẏ⁰, ẏ¹, ζ̇) in the chart of `state`.
pub fn projective_spray(coeffs: &[ScalarField; 4], state: &SprayState) -> [f64; 3] {
    let x = state.point();
    let f: [f64; 4] = std::array::from_fn(|k| coeffs[k].eval_raw(&x));
    let z = state.zeta;
    match state.chart {
        FiberChart::Affine => [1.0, z, f[0] + z * (f[1] + z * (f[2] + z * f[3]))],
        FiberChart::Inverted => [z, 1.0, -(f[3] + z * (f[2] + z * (f[1] + z * f[0])))],
    }
}

/// Disagreement of the two chart sprays at a point of the overlap, after rescaling.
pub fn chart_overlap_residual(coeffs: &[ScalarField; 4], y: [f64; 2], zeta: f64) -> f64 {
    let a = projective_spray(coeffs, &SprayState { y, zeta, chart: FiberChart::Affine });
    let zt = 1.0 / zeta;
    let b = projective_spray(coeffs, &SprayState { y, zeta: zt, chart: FiberChart::Inverted });
    // dζ = −ζ̃⁻² dζ̃; chart-B vector equals ζ̃ times the chart-A vector
    let pushed = [b[0], b[1], -b[2] / (zt * zt)];
    (0..3).map(|i| (pushed[i] - zt * a[i]).abs()).fold(0.0, f64::max)
}

fn descends(fields: &[&ScalarField], t: &NullTetrad, zt: &ZeroTest) -> bool {
    fields.iter().all(|f| {
        zt.status(&t.p0().apply(f)).passes() && zt.status(&t.p1().apply(f)).passes()
    })
}

pub fn induced_projective_connection(
    lift: &TwistorLift,
    zt: &ZeroTest,
) -> Result<ProjectiveConnection2D, TwistorError> {
    let basic = check_basic(lift, zt)?;
    if !basic.basic {
        let bad = basic.criterion.residuals.iter().find(|r| !r.status.passes()).map(|r| r.id.clone());
        return Err(TwistorError::NotBasic(bad.unwrap_or_default()));
    }
    let c = &lift.components;
    let amd = c.a.sub(&c.d);
    let (b0, b1, c0, c1) = (&c.b.0[E0], &c.b.0[E1], &c.c.0[E0], &c.c.0[E1]);
    let w00 = [&amd.0[E0] + c1, b0.clone()];
    let w11 = [c1.clone(), &(-&amd.0[E1]) + b0];
    let entries = [b0, b1, c0, c1, &w00[0], &w11[1]];
    if descends(&entries, &lift.tetrad, zt) {
        return Ok(ProjectiveConnection2D {
            omega: [[w00, [b0.clone(), b1.clone()]], [[c0.clone(), c1.clone()], w11]],
            representative: Representative::Components,
        });
    }
    let q = &lift.q;
    let h = |f: &ScalarField| f.half();
    let z = ScalarField::zero;
    Ok(ProjectiveConnection2D {
        omega: [
            [[z(), h(&q[2])], [h(&q[2]), q[3].clone()]],
            [[-&q[0], -h(&q[1])], [-h(&q[1]), z()]],
        ],
        representative: Representative::Normalized,
    })
}

/// Γ𝔫 − Π_*𝔪₁: ζ-coefficients of the spray against Q₁, and the chart part of e₀, e₁.
pub fn reduction_residuals(conn: &ProjectiveConnection2D, lift: &TwistorLift) -> Vec<Residual> {
    let f = conn.spray_coefficients();
    let mut out: Vec<Residual> =
        (0..4).map(|k| Residual::new(format!("spray zeta^{k} - q{k}"), &f[k] - &lift.q[k])).collect();
    for (name, v, want) in [("e0", lift.tetrad.e0(), [1, 0]), ("e1", lift.tetrad.e1(), [0, 1])] {
        for k in 0..2 {
            out.push(Residual::new(format!("pi_* {name}^{k}"), &v.0[k] - &ScalarField::from_int(want[k])));
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct TwistorReport {
    pub q_coeffs: Vec<Vec<TermSpec>>,
    pub integrable: bool,
    pub basic: Option<bool>,
    pub reduction_identity: Option<bool>,
}

pub fn serialize_coeffs(fs: &[ScalarField]) -> Vec<Vec<TermSpec>> {
    fs.iter().map(|f| f.as_poly().map(|p| p.to_specs()).unwrap_or_default()).collect()
}

pub fn twistor_report(lift: &TwistorLift, zt: &ZeroTest) -> TwistorReport {
    let lax = check_lax_integrability(lift, zt);
    let basic = check_basic(lift, zt).ok().map(|b| b.basic);
    let reduction_identity = induced_projective_connection(lift, zt).ok().map(|conn| {
        reduction_residuals(&conn, lift).iter().all(|r| zt.status(&r.field).passes())
    });
    TwistorReport { q_coeffs: serialize_coeffs(&lift.q), integrable: lax.integrable, basic, reduction_identity }
}

/// Round unit-sphere connection in (θ, φ).
pub fn round_sphere_connection() -> ProjectiveConnection2D {
    let z = ScalarField::zero;
    let sc = ScalarField::from_fn(|x| {
        let t = x.coords()[0];
        -t.sin() * t.cos()
    });
    let cot = ScalarField::from_fn(|x| {
        let t = x.coords()[0];
        t.cos() / t.sin()
    });
    // Γ^θ_{φφ} = −sinθcosθ, Γ^φ_{θφ} = Γ^φ_{φθ} = cotθ
    ProjectiveConnection2D::from_christoffel([
        [[z(), z()], [z(), sc]],
        [[z(), cot.clone()], [cot, z()]],
    ])
}

/// Lift built from the foliation tetrad of `m`.
pub fn lift_for(
    m: &NeutralMetric,
    zt: &ZeroTest,
) -> Result<TwistorLift, crate::connection::ConnectionError> {
    let g = crate::connection::FoliatedGeometry::new(m, zt)?;
    Ok(build_twistor_lift(&g.components, &g.tetrad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Polynomial;
    use crate::metric::{generate_sd_family, perturb_off_family, SdTriple};
    use rand::SeedableRng;

    fn x(a: usize) -> Polynomial {
        Polynomial::var(a)
    }

    fn example() -> SdTriple {
        let p = (&x(2) * &x(3)).scale(&rat(-2, 1));
        SdTriple { p: p.clone(), q: p, r: &x(2).pow(2) + &x(3).pow(2) }
    }

    fn lift(t: &SdTriple) -> TwistorLift {
        lift_for(&t.metric(), &ZeroTest::default()).unwrap()
    }

    fn poly(f: &ScalarField) -> Polynomial {
        f.as_poly().unwrap().clone()
    }

    #[test]
    fn example_lift_coefficients() {
        let l = lift(&example());
        assert_eq!(poly(&l.q[0]), x(3));
        assert_eq!(poly(&l.q[1]), -&x(2));
        assert_eq!(poly(&l.q[2]), -&x(3));
        assert_eq!(poly(&l.q[3]), x(2));
        assert!(l.q2.iter().all(|f| f.is_exact_zero()));
    }

    #[test]
    fn flat_lift_vanishes() {
        let l = lift_for(&NeutralMetric::flat(), &ZeroTest::default()).unwrap();
        assert!(l.q.iter().chain(&l.q2).all(|f| f.is_exact_zero()));
        let zt = ZeroTest::default();
        assert!(check_basic(&l, &zt).unwrap().basic);
        let conn = induced_projective_connection(&l, &zt).unwrap();
        assert!(conn.omega.iter().flatten().flatten().all(|f| f.is_exact_zero()));
    }

    #[test]
    fn example_integrable_but_not_basic() {
        let zt = ZeroTest::default();
        let l = lift(&example());
        let lax = check_lax_integrability(&l, &zt);
        assert!(lax.integrable && lax.bracket_pass && lax.bracket_exact);
        let b = check_basic(&l, &zt).unwrap();
        assert!(!b.basic);
        // ∂₂q₁ = −1
        assert_eq!(poly(&l.tetrad.p0().apply(&l.q[1])), Polynomial::from_int(-1));
        assert!(matches!(induced_projective_connection(&l, &zt), Err(TwistorError::NotBasic(_))));
    }

    #[test]
    fn non_sd_metric_fails_both_paths() {
        let zt = ZeroTest::default();
        let l = lift(&SdTriple { p: x(3).pow(2), q: Polynomial::zero(), r: Polynomial::zero() });
        let lax = check_lax_integrability(&l, &zt);
        assert!(!lax.integrable && !lax.bracket_pass);
        assert!(matches!(check_basic(&l, &zt), Err(TwistorError::NotSelfDual(_))));
    }

    #[test]
    fn family_and_perturbations_agree_across_paths() {
        let zt = ZeroTest::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for t in generate_sd_family(2, 1, 4, 5).unwrap() {
            let lax = check_lax_integrability(&lift(&t), &zt);
            assert!(lax.integrable && lax.bracket_pass);
            let bad = check_lax_integrability(&lift(&perturb_off_family(&t, &mut rng)), &zt);
            assert!(!bad.integrable && !bad.bracket_pass);
        }
    }

    #[test]
    fn numeric_bracket_path_agrees() {
        let l = lift(&example());
        let pts = ZeroTest::default().points().to_vec();
        assert!(l.bracket_least_squares(&pts).iter().all(|(_, v)| *v < BRACKET_TOLERANCE));
        let bad = lift(&SdTriple { p: x(3).pow(2), q: Polynomial::zero(), r: Polynomial::zero() });
        assert!(bad.bracket_least_squares(&pts).iter().any(|(_, v)| *v > 1e-3));
    }

    #[test]
    fn reduction_identity_on_basic_members() {
        let zt = ZeroTest::default();
        let mut checked = 0;
        for t in generate_sd_family(2, 1, 42, 20).unwrap() {
            let l = lift(&t);
            if let Ok(conn) = induced_projective_connection(&l, &zt) {
                assert!(reduction_residuals(&conn, &l).iter().all(|r| r.field.is_exact_zero()));
                assert!(conn.torsion_residuals().iter().all(|r| r.field.is_exact_zero()));
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn normalized_representative_when_components_do_not_descend() {
        let zt = ZeroTest::default();
        let t = SdTriple { p: -&x(3).pow(2), q: -&x(2).pow(2), r: &x(2) * &x(3) };
        let l = lift(&t);
        let conn = induced_projective_connection(&l, &zt).unwrap();
        assert_eq!(conn.representative, Representative::Normalized);
        assert!(reduction_residuals(&conn, &l).iter().all(|r| r.field.is_exact_zero()));
    }

    #[test]
    fn constant_q_gives_constant_leaf_connection() {
        let zt = ZeroTest::default();
        // fiber-linear p, q, r with constant coefficients
        let t = SdTriple { p: x(3).scale(&rat(2, 1)), q: x(2).scale(&rat(-4, 1)), r: &x(2) + &x(3) };
        let l = lift(&t);
        assert!(l.q.iter().all(|f| f.as_poly().unwrap().constant_value().is_some()));
        let conn = induced_projective_connection(&l, &zt).unwrap();
        assert!(conn.omega.iter().flatten().flatten().all(|f| f.as_poly().unwrap().constant_value().is_some()));
    }

    #[test]
    fn charts_agree_on_overlap() {
        let conn = round_sphere_connection();
        let f = conn.spray_coefficients();
        for zeta in [1.0, -1.0, 0.8, 1.3] {
            assert!(chart_overlap_residual(&f, [1.0, 0.4], zeta) < 1e-12);
        }
    }

    #[test]
    fn zero_connection_spray_is_straight() {
        let f = ProjectiveConnection2D::zero().spray_coefficients();
        let v = projective_spray(&f, &SprayState { y: [0.3, 0.2], zeta: 0.7, chart: FiberChart::Affine });
        assert_eq!(v, [1.0, 0.7, 0.0]);
    }
}
