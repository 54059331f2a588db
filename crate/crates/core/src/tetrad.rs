//! Null tetrads adapted to the vertical distribution span(∂₂, ∂₃), Λ± frames and
//! α/β classification of null 2-planes.

use nalgebra::{Matrix4, Matrix6, SymmetricEigen, Vector4, Vector6};
use serde::Serialize;
use thiserror::Error;

use crate::fields::{
    rat, ChartPoint, FieldError, ProbeConfig, Residual, ResidualSummary, ScalarField, ZeroTest,
};
use crate::metric::{MetricBackend, MetricError, NeutralMetric};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TetradError {
    #[error("vertical distribution span(∂2,∂3) is not totally null")]
    NotFoliated,
    #[error("matrix [[g12,g13],[g02,g03]] is singular at {0:?}")]
    DegenerateVertical([f64; 4]),
    #[error("input vectors are linearly dependent")]
    IndecomposableInput,
    #[error("classification is indeterminate: nullity defect {0:e} lies in the margin band")]
    Indeterminate(f64),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Vector field in chart components.
#[derive(Clone, Debug)]
pub struct VectorField(pub [ScalarField; 4]);

impl VectorField {
    pub fn zero() -> Self {
        Self(std::array::from_fn(|_| ScalarField::zero()))
    }

    pub fn coordinate(axis: usize) -> Self {
        let mut v = Self::zero();
        v.0[axis] = ScalarField::one();
        v
    }

    /// Directional derivative X(f) = Xⁱ∂ᵢf.
    pub fn apply(&self, f: &ScalarField) -> ScalarField {
        let mut acc = ScalarField::zero();
        for i in 0..4 {
            if !self.0[i].is_exact_zero() {
                acc = &acc + &(&self.0[i] * &f.differentiate(i));
            }
        }
        acc
    }

    pub fn bracket(&self, other: &VectorField) -> VectorField {
        VectorField(std::array::from_fn(|k| &self.apply(&other.0[k]) - &other.apply(&self.0[k])))
    }

    pub fn scale(&self, f: &ScalarField) -> VectorField {
        VectorField(std::array::from_fn(|k| f * &self.0[k]))
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        VectorField(std::array::from_fn(|k| &self.0[k] + &other.0[k]))
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        VectorField(std::array::from_fn(|k| &self.0[k] - &other.0[k]))
    }

    pub fn at(&self, x: &ChartPoint) -> Vector4<f64> {
        Vector4::from_fn(|k, _| self.0[k].eval_raw(x))
    }
}

/// g(X, Y).
pub fn pairing(m: &NeutralMetric, x: &VectorField, y: &VectorField) -> ScalarField {
    let mut acc = ScalarField::zero();
    for i in 0..4 {
        for j in 0..4 {
            let g = m.entry(i, j);
            if g.is_exact_zero() || x.0[i].is_exact_zero() || y.0[j].is_exact_zero() {
                continue;
            }
            acc = &acc + &(&(g * &x.0[i]) * &y.0[j]);
        }
    }
    acc
}

/// Gram matrix of the null tetrad: g(e₀,𝔭₁)=1, g(e₁,𝔭₀)=−1, all else 0. Its own inverse.
pub const NULL_GRAM: [[i64; 4]; 4] = [[0, 0, 0, 1], [0, 0, -1, 0], [0, -1, 0, 0], [1, 0, 0, 0]];

pub const FRAME_NAMES: [&str; 4] = ["e0", "e1", "p0", "p1"];

/// Ordered frame (e₀, e₁, 𝔭₀, 𝔭₁).
#[derive(Clone, Debug)]
pub struct NullTetrad {
    pub frame: [VectorField; 4],
}

impl NullTetrad {
    pub fn new(e0: VectorField, e1: VectorField, p0: VectorField, p1: VectorField) -> Self {
        Self { frame: [e0, e1, p0, p1] }
    }

    pub fn e0(&self) -> &VectorField {
        &self.frame[0]
    }
    pub fn e1(&self) -> &VectorField {
        &self.frame[1]
    }
    pub fn p0(&self) -> &VectorField {
        &self.frame[2]
    }
    pub fn p1(&self) -> &VectorField {
        &self.frame[3]
    }

    /// Frame coefficients cᵃ of V = cᵃE_a, from cᵃ = η^{ab} g(E_b, V).
    pub fn coefficients(&self, m: &NeutralMetric, v: &VectorField) -> [ScalarField; 4] {
        let g = |b: usize| pairing(m, &self.frame[b], v);
        [g(3), -g(2), -g(1), g(0)]
    }

    /// Determinant of the component matrix (columns are frame vectors).
    pub fn determinant(&self) -> ScalarField {
        let m: [[ScalarField; 4]; 4] =
            std::array::from_fn(|i| std::array::from_fn(|j| self.frame[j].0[i].clone()));
        crate::metric::det4(&m)
    }

    pub fn matrix_at(&self, x: &ChartPoint) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.frame[j].0[i].eval_raw(x))
    }
}

/// Tetrad of the foliation by the vertical planes span(∂₂, ∂₃).
pub fn construct_foliation_tetrad(m: &NeutralMetric) -> Result<NullTetrad, TetradError> {
    let d = VectorField::coordinate;
    match m.backend() {
        MetricBackend::SpecialForm { p, q, r } => {
            let e0 = d(0).add(&d(2).scale(&r.half())).sub(&d(3).scale(&p.half()));
            let e1 = d(1).add(&d(2).scale(&q.half())).sub(&d(3).scale(&r.half()));
            Ok(NullTetrad::new(e0, e1, d(2), d(3)))
        }
        MetricBackend::ProductSphere { .. } => Err(TetradError::NotFoliated),
        MetricBackend::Generic => generic_foliation_tetrad(m),
    }
}

fn generic_foliation_tetrad(m: &NeutralMetric) -> Result<NullTetrad, TetradError> {
    let zt = ZeroTest::default();
    for (i, j) in [(2, 2), (2, 3), (3, 3)] {
        if !zt.status(m.entry(i, j)).passes() {
            return Err(TetradError::NotFoliated);
        }
    }
    let g = |i: usize, j: usize| m.entry(i, j).clone();
    let det = &(&g(1, 2) * &g(0, 3)) - &(&g(1, 3) * &g(0, 2));
    if det.is_exact_zero() {
        return Err(TetradError::DegenerateVertical([0.0; 4]));
    }
    for x in zt.points() {
        if det.eval_raw(x).abs() < 1e-12 {
            return Err(TetradError::DegenerateVertical(*x.coords()));
        }
    }
    let vert = |a: ScalarField, b: ScalarField| -> Result<VectorField, FieldError> {
        let mut v = VectorField::zero();
        v.0[2] = a.checked_div(&det)?;
        v.0[3] = b.checked_div(&det)?;
        Ok(v)
    };
    let p0 = vert(-g(0, 3), g(0, 2))?;
    let p1 = vert(-g(1, 3), g(1, 2))?;
    let e0 = VectorField::coordinate(0).add(&p0.scale(&g(0, 1).half())).sub(&p1.scale(&g(0, 0).half()));
    let e1 = VectorField::coordinate(1).add(&p0.scale(&g(1, 1).half())).sub(&p1.scale(&g(0, 1).half()));
    Ok(NullTetrad::new(e0, e1, p0, p1))
}

/// Deviation of the frame Gram matrix from the null pattern.
#[derive(Clone, Debug, Serialize)]
pub struct TetradValidation {
    pub entries: Vec<ResidualSummary>,
    pub max_abs: f64,
    pub offending: Option<String>,
    pub orientation_positive: bool,
    #[serde(skip)]
    pub residuals: Vec<Residual>,
}

impl TetradValidation {
    pub fn exact(&self) -> bool {
        self.entries.iter().all(|e| e.status == crate::fields::ResidualStatus::ExactZero)
    }

    pub fn passes(&self) -> bool {
        self.offending.is_none()
    }
}

pub fn validate_tetrad(t: &NullTetrad, m: &NeutralMetric, zt: &ZeroTest) -> TetradValidation {
    let mut residuals = Vec::new();
    for a in 0..4 {
        for b in a..4 {
            let f = &pairing(m, &t.frame[a], &t.frame[b]) - &ScalarField::from_int(NULL_GRAM[a][b]);
            residuals.push(Residual::new(format!("g({},{})", FRAME_NAMES[a], FRAME_NAMES[b]), f));
        }
    }
    let entries: Vec<ResidualSummary> = residuals.iter().map(|r| r.summarize(zt)).collect();
    let mut max_abs: f64 = 0.0;
    let mut offending = None;
    for e in &entries {
        match e.status {
            crate::fields::ResidualStatus::ExactZero => {}
            crate::fields::ResidualStatus::WithinTolerance { max_abs: v } => max_abs = max_abs.max(v),
            crate::fields::ResidualStatus::Nonzero { max_abs: v } => {
                if v >= max_abs || offending.is_none() {
                    offending = Some(e.id.clone());
                }
                max_abs = max_abs.max(v);
            }
            crate::fields::ResidualStatus::Undefined => {
                max_abs = f64::INFINITY;
                offending = Some(e.id.clone());
            }
        }
    }
    let det = t.determinant();
    let orientation_positive = zt.points().iter().all(|x| det.eval_raw(x) > 0.0);
    TetradValidation { entries, max_abs, offending, orientation_positive, residuals }
}

/// Chart bivector with components over (01, 02, 03, 12, 13, 23).
#[derive(Clone, Debug)]
pub struct ChartBivector(pub [ScalarField; 6]);

pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

impl ChartBivector {
    pub fn wedge(x: &VectorField, y: &VectorField) -> Self {
        Self(PAIRS.map(|(i, j)| &(&x.0[i] * &y.0[j]) - &(&x.0[j] * &y.0[i])))
    }

    pub fn add(&self, o: &Self) -> Self {
        Self(std::array::from_fn(|k| &self.0[k] + &o.0[k]))
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self(std::array::from_fn(|k| &self.0[k] - &o.0[k]))
    }

    pub fn scale(&self, f: &ScalarField) -> Self {
        Self(std::array::from_fn(|k| f * &self.0[k]))
    }

    /// Antisymmetric component B^{ij}.
    pub fn component(&self, i: usize, j: usize) -> ScalarField {
        if i == j {
            return ScalarField::zero();
        }
        let (a, b, s) = if i < j { (i, j, false) } else { (j, i, true) };
        let k = PAIRS.iter().position(|&p| p == (a, b)).expect("pair");
        if s {
            -&self.0[k]
        } else {
            self.0[k].clone()
        }
    }

    pub fn at(&self, x: &ChartPoint) -> Vector6<f64> {
        Vector6::from_fn(|k, _| self.0[k].eval_raw(x))
    }
}

/// Induced pairing on bivectors, G(u∧v, x∧y) = g(u,x)g(v,y) − g(u,y)g(v,x).
pub fn bivector_pairing(m: &NeutralMetric, u: &ChartBivector, v: &ChartBivector) -> ScalarField {
    let mut acc = ScalarField::zero();
    for (a, &(i, j)) in PAIRS.iter().enumerate() {
        if u.0[a].is_exact_zero() {
            continue;
        }
        for (b, &(k, l)) in PAIRS.iter().enumerate() {
            if v.0[b].is_exact_zero() {
                continue;
            }
            let w = &(m.entry(i, k) * m.entry(j, l)) - &(m.entry(i, l) * m.entry(j, k));
            if !w.is_exact_zero() {
                acc = &acc + &(&w * &(&u.0[a] * &v.0[b]));
            }
        }
    }
    acc
}

/// (φ₁, φ₂, φ₃′) and (ψ₁, ψ₂, ψ₃′) with φ₃′ = √2 φ₃ and ψ₃′ = √2 ψ₃.
#[derive(Clone, Debug)]
pub struct LambdaFrames {
    pub phi: [ChartBivector; 3],
    pub psi: [ChartBivector; 3],
}

/// Scale from the stored third frame elements to the unit-normalized ones.
pub const THIRD_FRAME_SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Pairing of each triple with itself in the stored basis; the inverse of
/// [[0,1,0],[1,0,0],[0,0,−2]] is [[0,1,0],[1,0,0],[0,0,−1/2]].
pub const FRAME_PAIRING: [[i64; 3]; 3] = [[0, 1, 0], [1, 0, 0], [0, 0, -2]];

pub fn lambda_frames(t: &NullTetrad) -> LambdaFrames {
    let w = ChartBivector::wedge;
    let [e0, e1, p0, p1] = &t.frame;
    LambdaFrames {
        phi: [w(e0, e1), w(p0, p1), w(e0, p1).sub(&w(e1, p0))],
        psi: [w(e0, p0), w(e1, p1), w(e0, p1).add(&w(e1, p0))],
    }
}

/// Coefficients of a bivector over the stored (φ, ψ) bases.
pub fn decompose_bivector(
    m: &NeutralMetric,
    frames: &LambdaFrames,
    b: &ChartBivector,
) -> ([ScalarField; 3], [ScalarField; 3]) {
    let solve = |basis: &[ChartBivector; 3]| -> [ScalarField; 3] {
        let p = basis.clone().map(|e| bivector_pairing(m, b, &e));
        [p[1].clone(), p[0].clone(), p[2].scale(&rat(-1, 2))]
    };
    (solve(&frames.phi), solve(&frames.psi))
}

/// Numeric coefficients over (φ₁,φ₂,φ₃,ψ₁,ψ₂,ψ₃), third elements normalized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bivector {
    pub coeffs: [f64; 6],
}

impl Bivector {
    /// Self-wedge B∧B in the frame: 2h(B,B)-weighted Plücker quadric.
    pub fn plucker(&self) -> f64 {
        let c = &self.coeffs;
        (2.0 * c[0] * c[1] - c[2] * c[2]) - (2.0 * c[3] * c[4] - c[5] * c[5])
    }

    pub fn phi_norm(&self) -> f64 {
        self.coeffs[..3].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn psi_norm(&self) -> f64 {
        self.coeffs[3..].iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NullPlaneClass {
    Alpha,
    Beta,
    NotTotallyNull,
}

/// Positively oriented null tetrad of a Gram matrix, as matrix columns.
pub fn pointwise_null_tetrad(g: &Matrix4<f64>) -> Result<Matrix4<f64>, TetradError> {
    let eig = SymmetricEigen::new(*g);
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for k in 0..4 {
        let l = eig.eigenvalues[k];
        let v = eig.eigenvectors.column(k) / l.abs().sqrt();
        if l > 0.0 {
            pos.push(v);
        } else if l < 0.0 {
            neg.push(v);
        }
    }
    if pos.len() != 2 || neg.len() != 2 {
        return Err(MetricError::SingularMetric.into());
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let e0 = (pos[0] + neg[0]) * s;
    let p1 = (pos[0] - neg[0]) * s;
    let mut e1 = (pos[1] + neg[1]) * s;
    let mut p0 = -(pos[1] - neg[1]) * s;
    let mut m = Matrix4::from_columns(&[e0, e1, p0, p1]);
    if m.determinant() < 0.0 {
        std::mem::swap(&mut e1, &mut p0);
        m = Matrix4::from_columns(&[e0, e1, p0, p1]);
    }
    Ok(m)
}

fn wedge6(u: &Vector4<f64>, v: &Vector4<f64>) -> Vector6<f64> {
    Vector6::from_iterator(PAIRS.iter().map(|&(i, j)| u[i] * v[j] - u[j] * v[i]))
}

fn pair6(g: &Matrix4<f64>, a: &Vector6<f64>, b: &Vector6<f64>) -> f64 {
    let mut s = 0.0;
    for (x, &(i, j)) in PAIRS.iter().enumerate() {
        for (y, &(k, l)) in PAIRS.iter().enumerate() {
            s += (g[(i, k)] * g[(j, l)] - g[(i, l)] * g[(j, k)]) * a[x] * b[y];
        }
    }
    s
}

/// Frame decomposition of v∧w at a point, with respect to a positively oriented null tetrad.
pub fn frame_bivector_at(g: &Matrix4<f64>, v: &Vector4<f64>, w: &Vector4<f64>) -> Result<Bivector, TetradError> {
    let t = pointwise_null_tetrad(g)?;
    let c = |k: usize| t.column(k).into_owned();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let basis = [
        wedge6(&c(0), &c(1)),
        wedge6(&c(2), &c(3)),
        (wedge6(&c(0), &c(3)) - wedge6(&c(1), &c(2))) * s,
        wedge6(&c(0), &c(2)),
        wedge6(&c(1), &c(3)),
        (wedge6(&c(0), &c(3)) + wedge6(&c(1), &c(2))) * s,
    ];
    let b = wedge6(v, w);
    let gram = Matrix6::from_fn(|i, j| pair6(g, &basis[i], &basis[j]));
    let rhs = Vector6::from_fn(|i, _| pair6(g, &b, &basis[i]));
    let sol = gram.lu().solve(&rhs).ok_or(MetricError::SingularMetric)?;
    Ok(Bivector { coeffs: std::array::from_fn(|k| sol[k]) })
}

/// Margins for the nullity test, relative to the largest Gram entry.
pub const NULL_MARGIN: f64 = 1e-9;
pub const NOT_NULL_MARGIN: f64 = 1e-6;

pub fn classify_null_plane(
    v: [f64; 4],
    w: [f64; 4],
    m: &NeutralMetric,
    x: &ChartPoint,
) -> Result<NullPlaneClass, TetradError> {
    let g = m.gram_at(x)?;
    let (v, w) = (Vector4::from(v), Vector4::from(w));
    let vw = wedge6(&v, &w);
    if vw.norm() <= 1e-12 * v.norm() * w.norm() || v.norm() == 0.0 || w.norm() == 0.0 {
        return Err(TetradError::IndecomposableInput);
    }
    let scale = g.amax() * v.norm().max(w.norm()).powi(2);
    let defect = [v.dot(&(g * v)), v.dot(&(g * w)), w.dot(&(g * w))]
        .iter()
        .map(|d| d.abs())
        .fold(0.0, f64::max)
        / scale;
    if defect > NOT_NULL_MARGIN {
        return Ok(NullPlaneClass::NotTotallyNull);
    }
    if defect > NULL_MARGIN {
        return Err(TetradError::Indeterminate(defect));
    }
    let b = frame_bivector_at(&g, &v, &w)?;
    let total = b.phi_norm() + b.psi_norm();
    let tol = 1e-6 * total;
    match (b.phi_norm() <= tol, b.psi_norm() <= tol) {
        (false, true) => Ok(NullPlaneClass::Alpha),
        (true, false) => Ok(NullPlaneClass::Beta),
        _ => Err(TetradError::Indeterminate(defect)),
    }
}

/// Probe points for tetrad-level checks of a metric.
pub fn tetrad_probes(m: &NeutralMetric, probes: &ProbeConfig) -> Vec<ChartPoint> {
    m.chart_probes(probes)
}
