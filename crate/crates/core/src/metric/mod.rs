//! Neutral metrics: the special coordinate form, the self-duality system and the S²×S² model.

mod family;

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use nalgebra::{Matrix4, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

use crate::fields::{
    ChartPoint, FieldError, Polynomial, DEFAULT_FD_STEP, ProbeConfig, Residual, ResidualSummary, ScalarField,
    ZeroTest,
};

pub use family::{
    generate_sd_family, perturb_off_family, sd_null_space, sd_residual_polys, SdTriple,
};

/// Smallest sin θ accepted on the product-sphere chart.
pub const DEFAULT_CHART_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("metric is not symmetric in entry ({0},{1})")]
    Asymmetric(usize, usize),
    #[error("signature at {point:?} is ({positive},{negative}), expected (2,2)")]
    Signature { point: [f64; 4], positive: usize, negative: usize },
    #[error("chart singularity at {0:?}: sin θ below the chart margin")]
    ChartSingularity([f64; 4]),
    #[error("metric is singular")]
    SingularMetric,
    #[error("no solutions for the requested degrees")]
    InfeasibleDegree,
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Clone, Debug)]
pub enum MetricBackend {
    SpecialForm { p: ScalarField, q: ScalarField, r: ScalarField },
    /// Chart (θ₁, φ₁, θ₂, φ₂) on S²×S² with g = g_round ⊖ g_round.
    ProductSphere { chart_margin: f64 },
    Generic,
}

pub type MetricMatrix = [[ScalarField; 4]; 4];

#[derive(Clone, Debug)]
pub struct NeutralMetric {
    g: MetricMatrix,
    backend: MetricBackend,
    dg: Arc<OnceLock<Vec<ScalarField>>>,
}

fn zeros() -> MetricMatrix {
    std::array::from_fn(|_| std::array::from_fn(|_| ScalarField::zero()))
}

impl NeutralMetric {
    fn with(g: MetricMatrix, backend: MetricBackend) -> Self {
        Self { g, backend, dg: Arc::new(OnceLock::new()) }
    }

    /// Rows [[p,r,0,1],[r,q,−1,0],[0,−1,0,0],[1,0,0,0]].
    pub fn special_form(p: ScalarField, q: ScalarField, r: ScalarField) -> Self {
        let mut g = zeros();
        g[0][0] = p.clone();
        g[1][1] = q.clone();
        g[0][1] = r.clone();
        g[1][0] = r.clone();
        g[0][3] = ScalarField::one();
        g[3][0] = ScalarField::one();
        g[1][2] = ScalarField::from_int(-1);
        g[2][1] = ScalarField::from_int(-1);
        Self::with(g, MetricBackend::SpecialForm { p, q, r })
    }

    pub fn special_form_poly(p: Polynomial, q: Polynomial, r: Polynomial) -> Self {
        Self::special_form(p.into(), q.into(), r.into())
    }

    pub fn flat() -> Self {
        Self::special_form_poly(Polynomial::zero(), Polynomial::zero(), Polynomial::zero())
    }

    pub fn product_sphere() -> Self {
        Self::product_sphere_with_margin(DEFAULT_CHART_MARGIN)
    }

    pub fn product_sphere_with_margin(chart_margin: f64) -> Self {
        Self::product_sphere_with(chart_margin, DEFAULT_FD_STEP).expect("default step is valid")
    }

    /// Product sphere whose callback entries differentiate with step `fd_step`.
    pub fn product_sphere_with(chart_margin: f64, fd_step: f64) -> Result<Self, MetricError> {
        let mut g = zeros();
        g[0][0] = ScalarField::one();
        g[2][2] = ScalarField::from_int(-1);
        g[1][1] = ScalarField::callback(fd_step, |x| x.coords()[0].sin().powi(2))?;
        g[3][3] = ScalarField::callback(fd_step, |x| -x.coords()[2].sin().powi(2))?;
        Ok(Self::with(g, MetricBackend::ProductSphere { chart_margin }))
    }

    /// Arbitrary symmetric matrix of fields; symmetry is checked exactly or at probes.
    pub fn generic(g: MetricMatrix) -> Result<Self, MetricError> {
        let zt = ZeroTest::default();
        for i in 0..4 {
            for j in (i + 1)..4 {
                if !zt.status(&(&g[i][j] - &g[j][i])).passes() {
                    return Err(MetricError::Asymmetric(i, j));
                }
            }
        }
        Ok(Self::with(g, MetricBackend::Generic))
    }

    pub fn entry(&self, i: usize, j: usize) -> &ScalarField {
        &self.g[i][j]
    }

    pub fn matrix(&self) -> &MetricMatrix {
        &self.g
    }

    pub fn backend(&self) -> &MetricBackend {
        &self.backend
    }

    pub fn is_polynomial(&self) -> bool {
        self.g.iter().flatten().all(|f| f.is_polynomial())
    }

    pub fn determinant(&self) -> ScalarField {
        det4(&self.g)
    }

    /// Inverse matrix; exact when the determinant is a nonzero constant polynomial.
    pub fn inverse(&self) -> Result<MetricMatrix, MetricError> {
        let det = self.determinant();
        if det.is_exact_zero() {
            return Err(MetricError::SingularMetric);
        }
        let exact = det.as_poly().and_then(|p| p.constant_value()).is_some();
        if exact {
            let mut inv = zeros();
            for i in 0..4 {
                for j in 0..4 {
                    inv[i][j] = cofactor(&self.g, j, i).checked_div(&det)?;
                }
            }
            return Ok(inv);
        }
        let m = self.clone();
        Ok(std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let m = m.clone();
                ScalarField::from_fn(move |x| {
                    m.raw_gram(x).try_inverse().map(|inv| inv[(i, j)]).unwrap_or(f64::NAN)
                })
            })
        }))
    }

    fn raw_gram(&self, x: &ChartPoint) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.g[i][j].eval_raw(x))
    }

    fn check_chart(&self, x: &ChartPoint) -> Result<(), MetricError> {
        if let MetricBackend::ProductSphere { chart_margin } = self.backend {
            let c = x.coords();
            if c[0].sin().abs() < chart_margin || c[2].sin().abs() < chart_margin {
                return Err(MetricError::ChartSingularity(*c));
            }
        }
        Ok(())
    }

    pub fn gram_at(&self, x: &ChartPoint) -> Result<Matrix4<f64>, MetricError> {
        self.check_chart(x)?;
        let m = self.raw_gram(x);
        if m.iter().all(|v| v.is_finite()) {
            Ok(m)
        } else {
            Err(FieldError::Evaluation(*x.coords()).into())
        }
    }

    /// Counts of positive and negative eigenvalues.
    pub fn signature_at(&self, x: &ChartPoint) -> Result<(usize, usize), MetricError> {
        let eig = SymmetricEigen::new(self.gram_at(x)?);
        let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
        let pos = eig.eigenvalues.iter().filter(|&&v| v > 1e-12 * scale).count();
        let neg = eig.eigenvalues.iter().filter(|&&v| v < -1e-12 * scale).count();
        Ok((pos, neg))
    }

    pub fn check_signature(&self, probes: &ProbeConfig) -> Result<(), MetricError> {
        for x in self.chart_probes(probes) {
            let (positive, negative) = self.signature_at(&x)?;
            if (positive, negative) != (2, 2) {
                return Err(MetricError::Signature { point: *x.coords(), positive, negative });
            }
        }
        Ok(())
    }

    /// Probe points adapted to the backend's chart domain.
    pub fn chart_probes(&self, probes: &ProbeConfig) -> Vec<ChartPoint> {
        match self.backend {
            MetricBackend::ProductSphere { .. } => {
                let box_ = ProbeConfig { lo: 0.3, hi: PI - 0.3, ..probes.clone() };
                box_.points()
            }
            _ => probes.points(),
        }
    }

    fn first_derivatives(&self) -> &Vec<ScalarField> {
        self.dg.get_or_init(|| {
            let mut out = Vec::with_capacity(64);
            for k in 0..4 {
                for i in 0..4 {
                    for j in 0..4 {
                        out.push(self.g[i][j].differentiate(k));
                    }
                }
            }
            out
        })
    }

    /// Christoffel symbols Γ^k_{ij} at a point, indexed `[k][i][j]`.
    pub fn christoffel_at(&self, x: &ChartPoint) -> Result<[[[f64; 4]; 4]; 4], MetricError> {
        self.check_chart(x)?;
        if let MetricBackend::ProductSphere { .. } = self.backend {
            return Ok(sphere_christoffel(x));
        }
        let g = self.gram_at(x)?;
        let inv = g.try_inverse().ok_or(MetricError::SingularMetric)?;
        let d = self.first_derivatives();
        let mut dg = [[[0.0; 4]; 4]; 4];
        for k in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    dg[k][i][j] = d[16 * k + 4 * i + j].eval_raw(x);
                }
            }
        }
        let mut out = [[[0.0; 4]; 4]; 4];
        for k in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    let mut s = 0.0;
                    for l in 0..4 {
                        s += inv[(k, l)] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
                    }
                    out[k][i][j] = 0.5 * s;
                }
            }
        }
        if out.iter().flatten().flatten().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(FieldError::Evaluation(*x.coords()).into())
        }
    }
}

fn sphere_christoffel(x: &ChartPoint) -> [[[f64; 4]; 4]; 4] {
    let c = x.coords();
    let mut out = [[[0.0; 4]; 4]; 4];
    for (t, ph) in [(0, 1), (2, 3)] {
        let (s, co) = c[t].sin_cos();
        out[t][ph][ph] = -s * co;
        out[ph][t][ph] = co / s;
        out[ph][ph][t] = co / s;
    }
    out
}

/// Gram matrix diag(1, sin²θ₁, −1, −sin²θ₂) of the standard S²×S².
pub fn standard_s2xs2(x: &ChartPoint) -> Result<Matrix4<f64>, MetricError> {
    NeutralMetric::product_sphere().gram_at(x)
}

fn minor3(m: &MetricMatrix, rows: [usize; 3], cols: [usize; 3]) -> ScalarField {
    let e = |i: usize, j: usize| &m[rows[i]][cols[j]];
    let t1 = e(0, 0) * &(&(e(1, 1) * e(2, 2)) - &(e(1, 2) * e(2, 1)));
    let t2 = e(0, 1) * &(&(e(1, 0) * e(2, 2)) - &(e(1, 2) * e(2, 0)));
    let t3 = e(0, 2) * &(&(e(1, 0) * e(2, 1)) - &(e(1, 1) * e(2, 0)));
    &(&t1 - &t2) + &t3
}

fn others(k: usize) -> [usize; 3] {
    let v: Vec<usize> = (0..4).filter(|&i| i != k).collect();
    [v[0], v[1], v[2]]
}

fn cofactor(m: &MetricMatrix, i: usize, j: usize) -> ScalarField {
    let c = minor3(m, others(i), others(j));
    if (i + j).is_multiple_of(2) {
        c
    } else {
        -c
    }
}

pub fn det4(m: &MetricMatrix) -> ScalarField {
    let mut acc = ScalarField::zero();
    for j in 0..4 {
        acc = &acc + &(&m[0][j] * &cofactor(m, 0, j));
    }
    acc
}

/// Residuals of the self-duality system for the special form.
#[derive(Clone, Debug)]
pub struct SdSystemReport {
    pub residuals: Vec<Residual>,
    pub summaries: Vec<ResidualSummary>,
    pub equation_pass: Vec<bool>,
    pub pass: bool,
}

#[derive(Serialize)]
struct SdSystemJson<'a> {
    pass: bool,
    residuals: &'a [ResidualSummary],
}

impl SdSystemReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(SdSystemJson { pass: self.pass, residuals: &self.summaries })
            .expect("serializable")
    }
}

pub const SD_EQUATION_IDS: [&str; 5] =
    ["d22p", "d33q", "d33p+d22q+4d23r", "d22r+d23p", "d33r+d23q"];

/// The five second-order conditions for W⁻ = 0 on the special form.
pub fn sd_residuals(p: &ScalarField, q: &ScalarField, r: &ScalarField) -> Vec<Residual> {
    let d = |f: &ScalarField, i: usize, j: usize| f.differentiate(i).differentiate(j);
    let fields = [
        d(p, 2, 2),
        d(q, 3, 3),
        &(&d(p, 3, 3) + &d(q, 2, 2)) + &d(r, 2, 3).scale_int(4),
        &d(r, 2, 2) + &d(p, 2, 3),
        &d(r, 3, 3) + &d(q, 2, 3),
    ];
    SD_EQUATION_IDS.iter().zip(fields).map(|(id, f)| Residual::new(*id, f)).collect()
}

pub fn check_sd_system_with(
    p: &ScalarField,
    q: &ScalarField,
    r: &ScalarField,
    zt: &ZeroTest,
) -> SdSystemReport {
    let residuals = sd_residuals(p, q, r);
    let summaries: Vec<_> = residuals.iter().map(|r| r.summarize(zt)).collect();
    let equation_pass: Vec<bool> = summaries.iter().map(|s| s.status.passes()).collect();
    let pass = equation_pass.iter().all(|&b| b);
    SdSystemReport { residuals, summaries, equation_pass, pass }
}

pub fn check_sd_system(p: &ScalarField, q: &ScalarField, r: &ScalarField) -> SdSystemReport {
    check_sd_system_with(p, q, r, &ZeroTest::default())
}
