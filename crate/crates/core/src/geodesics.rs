//! Null geodesics with RK4, closure detection on the standard S²×S²,
//! β-surface intersection sampling and projective-spray tracing.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::fields::{ChartPoint, FieldError, ScalarField};
use crate::metric::{MetricBackend, MetricError, NeutralMetric};
use crate::tetrad::{classify_null_plane, NullPlaneClass, TetradError};
use crate::twistor::{projective_spray, FiberChart, SprayState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeodesicError {
    #[error("requested {requested} steps exceeds the limit of {max}")]
    StepLimitExceeded { requested: usize, max: usize },
    #[error("invalid tracer configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("initial velocity is zero")]
    ZeroVelocity,
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Tetrad(#[from] TetradError),
    #[error("write failed: {0}")]
    Io(String),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TracerConfig {
    pub step: f64,
    pub steps: usize,
    pub max_steps: usize,
    pub closure_tolerance: f64,
    /// Rotate product-sphere charts near the poles instead of failing.
    pub rotate_charts: bool,
}

impl Default for TracerConfig {
    fn default() -> Self {
        Self { step: 1e-3, steps: 7000, max_steps: 100_000, closure_tolerance: 1e-5, rotate_charts: true }
    }
}

impl TracerConfig {
    pub fn validate(&self) -> Result<(), GeodesicError> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(GeodesicError::InvalidConfig("step must be positive"));
        }
        if !(self.closure_tolerance > 0.0) {
            return Err(GeodesicError::InvalidConfig("closure tolerance must be positive"));
        }
        if self.steps > self.max_steps {
            return Err(GeodesicError::StepLimitExceeded { requested: self.steps, max: self.max_steps });
        }
        Ok(())
    }
}

/// Axes of each sphere factor's spherical chart inside ℝ³ (columns).
pub type ChartFrames = [Matrix3<f64>; 2];

#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicState {
    pub position: ChartPoint,
    pub velocity: [f64; 4],
    pub t: f64,
    pub frames: ChartFrames,
}

impl GeodesicState {
    pub fn new(position: [f64; 4], velocity: [f64; 4]) -> Result<Self, GeodesicError> {
        if velocity.iter().any(|v| !v.is_finite()) {
            return Err(FieldError::NonFinitePoint.into());
        }
        if velocity.iter().all(|v| *v == 0.0) {
            return Err(GeodesicError::ZeroVelocity);
        }
        Ok(Self {
            position: ChartPoint::new(position)?,
            velocity,
            t: 0.0,
            frames: [Matrix3::identity(), Matrix3::identity()],
        })
    }

    fn packed(&self) -> State8 {
        let x = self.position.coords();
        std::array::from_fn(|i| if i < 4 { x[i] } else { self.velocity[i - 4] })
    }
}

/// Below this sin θ the tracer rotates the factor's chart.
pub const POLE_ROTATION_SIN: f64 = 0.3;

type State8 = [f64; 8];

fn rhs(m: &NeutralMetric, s: &State8) -> Result<State8, GeodesicError> {
    let x = ChartPoint::new([s[0], s[1], s[2], s[3]])?;
    let g = m.christoffel_at(&x)?;
    let mut out = [0.0; 8];
    for k in 0..4 {
        out[k] = s[4 + k];
        let mut acc = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                acc += g[k][i][j] * s[4 + i] * s[4 + j];
            }
        }
        out[4 + k] = -acc;
    }
    Ok(out)
}

fn axpy<const N: usize>(a: &[f64; N], h: f64, k: &[f64; N]) -> [f64; N] {
    std::array::from_fn(|i| a[i] + h * k[i])
}

fn rk4<const N: usize, E>(
    f: impl Fn(&[f64; N]) -> Result<[f64; N], E>,
    s: &[f64; N],
    h: f64,
) -> Result<[f64; N], E> {
    let k1 = f(s)?;
    let k2 = f(&axpy(s, h / 2.0, &k1))?;
    let k3 = f(&axpy(s, h / 2.0, &k2))?;
    let k4 = f(&axpy(s, h, &k3))?;
    Ok(std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])))
}

pub fn sphere_point(theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

/// Position and velocity in ℝ³ of one factor, in local chart axes.
pub fn local_embedding(theta: f64, phi: f64, dtheta: f64, dphi: f64) -> (Vector3<f64>, Vector3<f64>) {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let p = Vector3::new(st * cp, st * sp, ct);
    let d_theta = Vector3::new(ct * cp, ct * sp, -st);
    let d_phi = Vector3::new(-st * sp, st * cp, 0.0);
    (p, d_theta * dtheta + d_phi * dphi)
}

/// Chart coordinates and velocity of an ℝ³ point and tangent vector, in the chart with axes `frame`.
pub fn chart_coordinates(frame: &Matrix3<f64>, p: &Vector3<f64>, v: &Vector3<f64>) -> ([f64; 2], [f64; 2]) {
    let pl = frame.transpose() * p;
    let vl = frame.transpose() * v;
    let theta = pl.z.clamp(-1.0, 1.0).acos();
    let phi = pl.y.atan2(pl.x);
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let d_theta = Vector3::new(ct * cp, ct * sp, -st);
    let d_phi = Vector3::new(-sp, cp, 0.0);
    ([theta, phi], [vl.dot(&d_theta), vl.dot(&d_phi) / st])
}

/// Re-chart factor `k` so its point sits on the chart equator at φ = 0.
fn rotate_factor(frames: &mut ChartFrames, s: &mut State8, k: usize) {
    let t = 2 * k;
    let (pl, vl) = local_embedding(s[t], s[t + 1], s[4 + t], s[5 + t]);
    let (p, v) = (frames[k] * pl, frames[k] * vl);
    let mut c2 = p.cross(&v);
    if c2.norm() < 1e-12 {
        let trial = if p.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        c2 = p.cross(&trial);
    }
    let c2 = c2.normalize();
    let c0 = p.normalize();
    let c1 = c2.cross(&c0);
    let new = Matrix3::from_columns(&[c0, c1, c2]);
    let vloc = new.transpose() * v;
    s[t] = PI / 2.0;
    s[t + 1] = 0.0;
    s[4 + t] = -vloc.z;
    s[5 + t] = vloc.y;
    frames[k] = new;
}

fn is_sphere(m: &NeutralMetric) -> bool {
    matches!(m.backend(), MetricBackend::ProductSphere { .. })
}

/// Fixed-step RK4 integration of the geodesic equation, `cfg.steps` steps.
pub fn trace_geodesic(
    m: &NeutralMetric,
    init: &GeodesicState,
    cfg: &TracerConfig,
) -> Result<Vec<GeodesicState>, GeodesicError> {
    cfg.validate()?;
    let sphere = is_sphere(m);
    let mut s = init.packed();
    let mut frames = init.frames;
    let mut t = init.t;
    let mut path = Vec::with_capacity(cfg.steps + 1);
    let push = |path: &mut Vec<GeodesicState>, s: &State8, t: f64, frames: &ChartFrames| -> Result<(), GeodesicError> {
        path.push(GeodesicState {
            position: ChartPoint::new([s[0], s[1], s[2], s[3]])?,
            velocity: [s[4], s[5], s[6], s[7]],
            t,
            frames: *frames,
        });
        Ok(())
    };
    for step in 0..=cfg.steps {
        if sphere {
            for k in 0..2 {
                if s[2 * k].sin().abs() < POLE_ROTATION_SIN {
                    if !cfg.rotate_charts {
                        return Err(MetricError::ChartSingularity([s[0], s[1], s[2], s[3]]).into());
                    }
                    rotate_factor(&mut frames, &mut s, k);
                }
            }
        }
        push(&mut path, &s, t, &frames)?;
        if step == cfg.steps {
            break;
        }
        s = rk4(|y| rhs(m, y), &s, cfg.step)?;
        t += cfg.step;
    }
    Ok(path)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NullDefect {
    /// max |g(γ′, γ′)| along the path.
    pub max: f64,
    /// Per-factor drift of θ′² + sin²θ φ′² on product-sphere paths.
    pub factor_energy_drift: Option<[f64; 2]>,
}

pub fn null_defect(path: &[GeodesicState], m: &NeutralMetric) -> Result<NullDefect, GeodesicError> {
    let mut max: f64 = 0.0;
    for st in path {
        let g = m.gram_at(&st.position)?;
        let v = nalgebra::Vector4::from(st.velocity);
        max = max.max(v.dot(&(g * v)).abs());
    }
    let factor_energy_drift = is_sphere(m).then(|| {
        let energy = |st: &GeodesicState, k: usize| {
            let x = st.position.coords();
            let v = st.velocity;
            v[2 * k].powi(2) + x[2 * k].sin().powi(2) * v[2 * k + 1].powi(2)
        };
        std::array::from_fn(|k| {
            let e0 = path.first().map_or(0.0, |s| energy(s, k));
            path.iter().map(|s| (energy(s, k) - e0).abs()).fold(0.0, f64::max)
        })
    });
    Ok(NullDefect { max, factor_energy_drift })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Closure {
    Closed { period: f64, distance: f64 },
    Open,
}

/// Embedding in ℝ³×ℝ³ (positions and unit velocities per factor) or the chart itself.
fn embedding(st: &GeodesicState, sphere: bool) -> Vec<f64> {
    let x = st.position.coords();
    let v = st.velocity;
    if sphere {
        let mut out = Vec::with_capacity(12);
        for k in 0..2 {
            let (pl, vl) = local_embedding(x[2 * k], x[2 * k + 1], v[2 * k], v[2 * k + 1]);
            let p = st.frames[k] * pl;
            let u = st.frames[k] * vl;
            let u = if u.norm() > 0.0 { u.normalize() } else { u };
            out.extend(p.iter().chain(u.iter()));
        }
        out
    } else {
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        x.iter().copied().chain(v.iter().map(|a| a / n)).collect()
    }
}

/// Smallest parameter T > 0 where the sampled curve returns to its start within `tolerance`.
pub fn closure_from_samples(ts: &[f64], pts: &[Vec<f64>], tolerance: f64) -> Closure {
    if pts.len() < 3 {
        return Closure::Open;
    }
    let d: Vec<f64> = pts
        .iter()
        .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        .collect();
    // leave the start before looking for a return
    let away = (100.0 * tolerance * tolerance).max(1e-4);
    let Some(start) = d.iter().position(|&v| v > away) else {
        return Closure::Open;
    };
    for i in (start + 1)..(d.len() - 1) {
        if d[i] <= d[i - 1] && d[i] <= d[i + 1] {
            // vertex of the parabola through three samples
            let (y0, y1, y2) = (d[i - 1], d[i], d[i + 1]);
            let h = ts[i + 1] - ts[i];
            let denom = y0 - 2.0 * y1 + y2;
            let shift = if denom > 0.0 { 0.5 * h * (y0 - y2) / denom } else { 0.0 };
            let vmin = (y1 - denom * (shift / h).powi(2) / 2.0).max(0.0);
            let distance = vmin.sqrt();
            if distance <= tolerance {
                return Closure::Closed { period: ts[i] + shift - ts[0], distance };
            }
        }
    }
    Closure::Open
}

pub fn detect_closure(path: &[GeodesicState], m: &NeutralMetric, tolerance: f64) -> Closure {
    let sphere = is_sphere(m);
    let ts: Vec<f64> = path.iter().map(|s| s.t).collect();
    let pts: Vec<Vec<f64>> = path.iter().map(|s| embedding(s, sphere)).collect();
    closure_from_samples(&ts, &pts, tolerance)
}

/// Random unit tangent vector at (θ, φ) of the round sphere, in chart components.
fn random_unit_direction<R: Rng>(rng: &mut R, theta: f64) -> [f64; 2] {
    let a: f64 = rng.gen_range(0.0..2.0 * PI);
    [a.cos(), a.sin() / theta.sin()]
}

/// Null initial condition with unit speed in each factor.
pub fn random_null_state<R: Rng>(rng: &mut R) -> GeodesicState {
    let th1 = rng.gen_range(0.3..PI - 0.3);
    let th2 = rng.gen_range(0.3..PI - 0.3);
    let ph1 = rng.gen_range(-PI..PI);
    let ph2 = rng.gen_range(-PI..PI);
    let u = random_unit_direction(rng, th1);
    let w = random_unit_direction(rng, th2);
    GeodesicState::new([th1, ph1, th2, ph2], [u[0], u[1], w[0], w[1]]).expect("finite sample")
}

#[derive(Clone, Debug, Serialize)]
pub struct ZollfreiSample {
    pub closure: Closure,
    pub null_defect: f64,
    pub factor_energy_drift: [f64; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct ZollfreiReport {
    pub samples: Vec<ZollfreiSample>,
    pub all_closed: bool,
    pub max_period_error: f64,
    pub max_null_defect: f64,
}

pub fn sample_zollfrei(n: usize, seed: u64, cfg: &TracerConfig) -> Result<ZollfreiReport, GeodesicError> {
    let m = NeutralMetric::product_sphere();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let init = random_null_state(&mut rng);
        let path = trace_geodesic(&m, &init, cfg)?;
        let nd = null_defect(&path, &m)?;
        samples.push(ZollfreiSample {
            closure: detect_closure(&path, &m, cfg.closure_tolerance),
            null_defect: nd.max,
            factor_energy_drift: nd.factor_energy_drift.unwrap_or([0.0; 2]),
        });
    }
    let all_closed = samples.iter().all(|s| matches!(s.closure, Closure::Closed { .. }));
    let max_period_error = samples
        .iter()
        .map(|s| match s.closure {
            Closure::Closed { period, .. } => (period - 2.0 * PI).abs(),
            Closure::Open => f64::INFINITY,
        })
        .fold(0.0, f64::max);
    let max_null_defect = samples.iter().map(|s| s.null_defect).fold(0.0, f64::max);
    Ok(ZollfreiReport { samples, all_closed, max_period_error, max_null_defect })
}

/// Orientation-reversing isometry σ = antipodal ∘ R of the unit sphere.
#[derive(Clone, Copy, Debug)]
pub struct ReversingIsometry {
    pub rotation: Rotation3<f64>,
}

impl ReversingIsometry {
    pub fn apply(&self, x: &Vector3<f64>) -> Vector3<f64> {
        -(self.rotation * x)
    }

    pub fn random<R: Rng>(rng: &mut R) -> Self {
        // uniform rotation from a uniform unit quaternion
        let q = nalgebra::Quaternion::new(
            gauss(rng),
            gauss(rng),
            gauss(rng),
            gauss(rng),
        );
        Self { rotation: nalgebra::UnitQuaternion::from_quaternion(q).to_rotation_matrix() }
    }
}

fn gauss<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Points x with σ₁(x) = σ₂(x), from the kernel of R₂ᵀR₁ − I; `None` when the maps coincide.
pub fn graph_intersections(s1: &ReversingIsometry, s2: &ReversingIsometry) -> Option<Vec<Vector3<f64>>> {
    let m = s2.rotation.matrix().transpose() * s1.rotation.matrix() - Matrix3::identity();
    let svd = m.svd(true, true);
    let v_t = svd.v_t.expect("requested");
    let kernel: Vec<Vector3<f64>> = (0..3)
        .filter(|&i| svd.singular_values[i] < 1e-9)
        .map(|i| v_t.row(i).transpose().into_owned())
        .collect();
    match kernel.len() {
        3 => None,
        0 => Some(Vec::new()),
        1 => {
            let a = kernel[0].normalize();
            let pts: Vec<Vector3<f64>> = [a, -a]
                .into_iter()
                .filter(|x| (s1.apply(x) - s2.apply(x)).norm() < 1e-9)
                .collect();
            Some(pts)
        }
        // a rotation never fixes exactly a plane; report what the kernel gives
        _ => Some(Vec::new()),
    }
}

/// Classification of the graph's tangent plane at a random point.
pub fn classify_graph_plane<R: Rng>(
    s: &ReversingIsometry,
    rng: &mut R,
) -> Result<NullPlaneClass, GeodesicError> {
    let m = NeutralMetric::product_sphere();
    let id = Matrix3::identity();
    loop {
        let th = rng.gen_range(0.5..PI - 0.5);
        let ph = rng.gen_range(-PI..PI);
        let x = sphere_point(th, ph);
        let y = s.apply(&x);
        let ([th2, ph2], _) = chart_coordinates(&id, &y, &Vector3::zeros());
        if th2.sin() < 0.3 {
            continue;
        }
        // tangent vector (u, dσ u) of the graph in chart components
        let lift = |u: Vector3<f64>| -> [f64; 4] {
            let (_, a) = chart_coordinates(&id, &x, &u);
            let (_, b) = chart_coordinates(&id, &y, &(-(s.rotation * u)));
            [a[0], a[1], b[0], b[1]]
        };
        let (_, d_th, d_ph) = tangent_basis(th, ph);
        let p = ChartPoint::new([th, ph, th2, ph2])?;
        return Ok(classify_null_plane(lift(d_th), lift(d_ph), &m, &p)?);
    }
}

fn tangent_basis(theta: f64, phi: f64) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    (
        Vector3::new(st * cp, st * sp, ct),
        Vector3::new(ct * cp, ct * sp, -st),
        Vector3::new(-sp, cp, 0.0),
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct BetaIntersectionReport {
    /// Number of intersection points → number of pairs.
    pub histogram: BTreeMap<usize, usize>,
    pub skipped_identical: usize,
    /// Sampled tangent planes of the graphs that classify as β-planes.
    pub beta_planes: usize,
    pub planes_sampled: usize,
}

pub fn sample_beta_intersections(n: usize, seed: u64) -> Result<BetaIntersectionReport, GeodesicError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut histogram = BTreeMap::new();
    let mut skipped_identical = 0;
    let mut beta_planes = 0;
    let mut planes_sampled = 0;
    for _ in 0..n {
        let s1 = ReversingIsometry::random(&mut rng);
        let s2 = ReversingIsometry::random(&mut rng);
        match graph_intersections(&s1, &s2) {
            None => skipped_identical += 1,
            Some(pts) => *histogram.entry(pts.len()).or_insert(0) += 1,
        }
        for s in [&s1, &s2] {
            planes_sampled += 1;
            if classify_graph_plane(s, &mut rng)? == NullPlaneClass::Beta {
                beta_planes += 1;
            }
        }
    }
    Ok(BetaIntersectionReport { histogram, skipped_identical, beta_planes, planes_sampled })
}

/// Projective-spray path sample: leaf point and unit tangent direction in ℝ³.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SprayPoint {
    pub s: f64,
    pub state: SprayState,
    pub sign: f64,
}

/// RK4 along the spray, switching ℝP¹ charts when |ζ| > 1 and carrying the orientation sign.
pub fn trace_spray(
    coeffs: &[ScalarField; 4],
    init: SprayState,
    step: f64,
    steps: usize,
) -> Result<Vec<SprayPoint>, GeodesicError> {
    if !(step > 0.0) {
        return Err(GeodesicError::InvalidConfig("step must be positive"));
    }
    let mut state = init;
    let mut sign = 1.0;
    let mut out = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        if state.zeta.abs() > 1.0 {
            sign *= state.zeta.signum();
            state = state.switched();
        }
        out.push(SprayPoint { s: i as f64 * step, state, sign });
        if i == steps {
            break;
        }
        let chart = state.chart;
        let f = |y: &[f64; 3]| -> Result<[f64; 3], GeodesicError> {
            let st = SprayState { y: [y[0], y[1]], zeta: y[2], chart };
            ChartPoint::new([y[0], y[1], 0.0, 0.0])?;
            let v = projective_spray(coeffs, &st);
            Ok(v.map(|c| sign * c))
        };
        let y = rk4(f, &[state.y[0], state.y[1], state.zeta], step)?;
        state = SprayState { y: [y[0], y[1]], zeta: y[2], chart };
    }
    Ok(out)
}

/// Position and unit direction of a spray point on the round sphere chart (θ, φ).
pub fn spray_embedding(p: &SprayPoint) -> Vec<f64> {
    let (dth, dph) = match p.state.chart {
        FiberChart::Affine => (1.0, p.state.zeta),
        FiberChart::Inverted => (p.state.zeta, 1.0),
    };
    let (x, v) = local_embedding(p.state.y[0], p.state.y[1], p.sign * dth, p.sign * dph);
    let v = v.normalize();
    x.iter().chain(v.iter()).copied().collect()
}

pub fn detect_spray_closure(path: &[SprayPoint], tolerance: f64) -> Closure {
    let ts: Vec<f64> = path.iter().map(|p| p.s).collect();
    let pts: Vec<Vec<f64>> = path.iter().map(spray_embedding).collect();
    closure_from_samples(&ts, &pts, tolerance)
}

/// CSV with columns t, x0..x3, v0..v3, null_defect.
pub fn write_csv<W: Write>(path: &[GeodesicState], m: &NeutralMetric, out: &mut W) -> Result<(), GeodesicError> {
    let io = |e: std::io::Error| GeodesicError::Io(e.to_string());
    writeln!(out, "t,x0,x1,x2,x3,v0,v1,v2,v3,null_defect").map_err(io)?;
    for st in path {
        let g = m.gram_at(&st.position)?;
        let v = nalgebra::Vector4::from(st.velocity);
        let defect = v.dot(&(g * v));
        let x = st.position.coords();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{:e}",
            st.t, x[0], x[1], x[2], x[3], st.velocity[0], st.velocity[1], st.velocity[2], st.velocity[3], defect
        )
        .map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::twistor::{round_sphere_connection, ProjectiveConnection2D};

    fn equal_speed() -> GeodesicState {
        GeodesicState::new([PI / 2.0, 0.0, PI / 2.0, 0.0], [0.0, 1.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn flat_null_line_is_straight_and_open() {
        let m = NeutralMetric::flat();
        // g₀₃ = 1, g₁₂ = −1: v = (1,0,0,0) is null
        let init = GeodesicState::new([0.1, 0.2, 0.3, 0.4], [1.0, 0.0, 0.0, 0.0]).unwrap();
        let cfg = TracerConfig { steps: 2000, ..TracerConfig::default() };
        let path = trace_geodesic(&m, &init, &cfg).unwrap();
        let last = path.last().unwrap();
        assert!((last.position.coords()[0] - 2.1).abs() < 1e-9);
        assert_eq!(null_defect(&path, &m).unwrap().max, 0.0);
        assert_eq!(detect_closure(&path, &m, 1e-5), Closure::Open);
    }

    #[test]
    fn equal_speed_great_circles_close_at_two_pi() {
        let m = NeutralMetric::product_sphere();
        let cfg = TracerConfig { steps: 10_000, ..TracerConfig::default() };
        let path = trace_geodesic(&m, &equal_speed(), &cfg).unwrap();
        let nd = null_defect(&path, &m).unwrap();
        assert!(nd.max < 1e-8, "{}", nd.max);
        match detect_closure(&path, &m, 1e-5) {
            Closure::Closed { period, .. } => assert!((period - 2.0 * PI).abs() < 1e-5, "{period}"),
            Closure::Open => panic!("open"),
        }
    }

    #[test]
    fn meridian_crosses_poles_by_rotation() {
        let m = NeutralMetric::product_sphere();
        let init = GeodesicState::new([PI / 2.0, 0.3, 1.0, -0.5], [1.0, 0.0, 0.0, 1.0 / 1f64.sin()]).unwrap();
        let path = trace_geodesic(&m, &init, &TracerConfig::default()).unwrap();
        assert!(path.iter().any(|s| s.frames[0] != Matrix3::identity()));
        assert!(null_defect(&path, &m).unwrap().max < 1e-8);
        assert!(matches!(detect_closure(&path, &m, 1e-5), Closure::Closed { period, .. } if (period - 2.0 * PI).abs() < 1e-5));
        let no_rotation = TracerConfig { rotate_charts: false, ..TracerConfig::default() };
        assert!(matches!(
            trace_geodesic(&m, &init, &no_rotation),
            Err(GeodesicError::Metric(MetricError::ChartSingularity(_)))
        ));
    }

    #[test]
    fn non_null_defect_is_conserved() {
        let m = NeutralMetric::product_sphere();
        let init = GeodesicState::new([1.0, 0.0, 2.0, 0.0], [0.5, 0.0, 0.0, 0.0]).unwrap();
        let cfg = TracerConfig { steps: 3000, ..TracerConfig::default() };
        let path = trace_geodesic(&m, &init, &cfg).unwrap();
        assert!((null_defect(&path, &m).unwrap().max - 0.25).abs() < 1e-8);
    }

    #[test]
    fn step_limit_and_config_errors() {
        let m = NeutralMetric::flat();
        let cfg = TracerConfig { steps: 200_000, ..TracerConfig::default() };
        assert!(matches!(trace_geodesic(&m, &equal_speed(), &cfg), Err(GeodesicError::StepLimitExceeded { .. })));
        let cfg = TracerConfig { step: 0.0, ..TracerConfig::default() };
        assert!(trace_geodesic(&m, &equal_speed(), &cfg).is_err());
        assert!(matches!(GeodesicState::new([0.0; 4], [0.0; 4]), Err(GeodesicError::ZeroVelocity)));
    }

    #[test]
    fn chart_coordinates_invert_embedding() {
        let (p, v) = local_embedding(1.1, -0.7, 0.3, 0.9);
        let (x, u) = chart_coordinates(&Matrix3::identity(), &p, &v);
        assert!((x[0] - 1.1).abs() < 1e-12 && (x[1] + 0.7).abs() < 1e-12);
        assert!((u[0] - 0.3).abs() < 1e-12 && (u[1] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn zollfrei_sample_closes() {
        let rep = sample_zollfrei(5, 3, &TracerConfig::default()).unwrap();
        assert!(rep.all_closed);
        assert!(rep.max_period_error < 1e-5);
        assert!(rep.max_null_defect < 1e-8);
    }

    #[test]
    fn reversing_isometry_graphs_meet_twice() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s1 = ReversingIsometry::random(&mut rng);
        assert!(graph_intersections(&s1, &s1).is_none());
        for _ in 0..20 {
            let s2 = ReversingIsometry::random(&mut rng);
            assert_eq!(graph_intersections(&s1, &s2).unwrap().len(), 2);
        }
    }

    #[test]
    fn graphs_are_beta_surfaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let s = ReversingIsometry::random(&mut rng);
            assert_eq!(classify_graph_plane(&s, &mut rng).unwrap(), NullPlaneClass::Beta);
        }
    }

    #[test]
    fn round_sphere_spray_closes() {
        let f = round_sphere_connection().spray_coefficients();
        // inclination below 1 rad keeps the circle away from the chart poles
        let init = SprayState { y: [PI / 2.0, 0.0], zeta: 1.5, chart: FiberChart::Affine };
        let path = trace_spray(&f, init, 1e-3, 12_000).unwrap();
        assert!(path.iter().any(|p| p.state.chart == FiberChart::Inverted));
        assert!(matches!(detect_spray_closure(&path, 1e-5), Closure::Closed { .. }));
    }

    #[test]
    fn zero_spray_is_a_line() {
        let f = ProjectiveConnection2D::zero().spray_coefficients();
        let init = SprayState { y: [0.0, 0.0], zeta: 0.5, chart: FiberChart::Affine };
        let path = trace_spray(&f, init, 1e-2, 100).unwrap();
        let last = path.last().unwrap().state;
        assert!((last.zeta - 0.5).abs() < 1e-15);
        assert!((last.y[1] - 0.5 * last.y[0]).abs() < 1e-12);
        assert_eq!(detect_spray_closure(&path, 1e-5), Closure::Open);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let m = NeutralMetric::product_sphere();
        let cfg = TracerConfig { steps: 3, ..TracerConfig::default() };
        let path = trace_geodesic(&m, &equal_speed(), &cfg).unwrap();
        let mut buf = Vec::new();
        write_csv(&path, &m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x0,x1,x2,x3,v0,v1,v2,v3,null_defect\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
