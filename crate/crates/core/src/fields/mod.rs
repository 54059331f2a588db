//! Scalar fields on a 4D chart: exact rational polynomials or numeric callbacks.

mod poly;

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use poly::{
    format_rational, parse_rational, rat, rational_to_f64, Exponent, Polynomial, TermSpec,
    MAX_PARSED_EXPONENT,
};

pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("chart point has a non-finite coordinate")]
    NonFinitePoint,
    #[error("field evaluated to a non-finite value at {0:?}")]
    Evaluation([f64; 4]),
    #[error("malformed rational {0:?}")]
    BadRational(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
    #[error("exponent {0} exceeds the accepted maximum")]
    ExponentTooLarge(u32),
    #[error("division by the zero polynomial")]
    DivisionByZero,
    #[error("finite-difference step must be positive and finite, got {0}")]
    InvalidStep(f64),
}

/// A point (x⁰, x¹, x², x³) of the chart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint([f64; 4]);

impl ChartPoint {
    pub fn new(coords: [f64; 4]) -> Result<Self, FieldError> {
        if coords.iter().all(|c| c.is_finite()) {
            Ok(Self(coords))
        } else {
            Err(FieldError::NonFinitePoint)
        }
    }

    pub fn coords(&self) -> &[f64; 4] {
        &self.0
    }

    fn shifted(&self, axis: usize, h: f64) -> ChartPoint {
        let mut c = self.0;
        c[axis] += h;
        ChartPoint(c)
    }
}

type Func = Arc<dyn Fn(&ChartPoint) -> f64 + Send + Sync>;

/// Numeric field with the step used for its central differences.
#[derive(Clone)]
pub struct Callback {
    f: Func,
    h: f64,
}

impl Callback {
    pub fn step(&self) -> f64 {
        self.h
    }
}

#[derive(Clone)]
pub enum ScalarField {
    Polynomial(Polynomial),
    Callback(Callback),
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Polynomial(p) => write!(f, "{p:?}"),
            ScalarField::Callback(c) => write!(f, "Callback(h={})", c.h),
        }
    }
}

impl From<Polynomial> for ScalarField {
    fn from(p: Polynomial) -> Self {
        ScalarField::Polynomial(p)
    }
}

/// Polynomial with coefficients pre-converted for fast numeric evaluation.
struct FloatPoly(Vec<(f64, Exponent)>);

impl FloatPoly {
    fn new(p: &Polynomial) -> Self {
        Self(p.terms().map(|(e, c)| (rational_to_f64(c), *e)).collect())
    }

    fn eval(&self, x: &ChartPoint) -> f64 {
        let c = x.coords();
        self.0
            .iter()
            .map(|(q, e)| {
                let mut v = *q;
                for a in 0..4 {
                    if e[a] > 0 {
                        v *= c[a].powi(e[a] as i32);
                    }
                }
                v
            })
            .sum()
    }
}

impl ScalarField {
    pub fn zero() -> Self {
        Polynomial::zero().into()
    }

    pub fn one() -> Self {
        Polynomial::one().into()
    }

    pub fn constant(c: BigRational) -> Self {
        Polynomial::constant(c).into()
    }

    pub fn from_int(c: i64) -> Self {
        Polynomial::from_int(c).into()
    }

    pub fn var(axis: usize) -> Self {
        Polynomial::var(axis).into()
    }

    pub fn callback<F>(h: f64, f: F) -> Result<Self, FieldError>
    where
        F: Fn(&ChartPoint) -> f64 + Send + Sync + 'static,
    {
        if !(h > 0.0 && h.is_finite()) {
            return Err(FieldError::InvalidStep(h));
        }
        Ok(ScalarField::Callback(Callback { f: Arc::new(f), h }))
    }

    /// Callback with the default finite-difference step.
    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(&ChartPoint) -> f64 + Send + Sync + 'static,
    {
        ScalarField::Callback(Callback { f: Arc::new(f), h: DEFAULT_FD_STEP })
    }

    /// Numeric constant; stays a callback so no exactness is implied.
    pub fn numeric_constant(v: f64) -> Self {
        Self::from_fn(move |_| v)
    }

    pub fn as_poly(&self) -> Option<&Polynomial> {
        match self {
            ScalarField::Polynomial(p) => Some(p),
            ScalarField::Callback(_) => None,
        }
    }

    pub fn is_polynomial(&self) -> bool {
        matches!(self, ScalarField::Polynomial(_))
    }

    pub fn is_exact_zero(&self) -> bool {
        matches!(self, ScalarField::Polynomial(p) if p.is_zero())
    }

    pub fn fd_step(&self) -> Option<f64> {
        match self {
            ScalarField::Polynomial(_) => None,
            ScalarField::Callback(c) => Some(c.h),
        }
    }

    /// Evaluation without the finiteness check.
    pub fn eval_raw(&self, x: &ChartPoint) -> f64 {
        match self {
            ScalarField::Polynomial(p) => p.evaluate(x),
            ScalarField::Callback(c) => (c.f)(x),
        }
    }

    pub fn evaluate(&self, x: &ChartPoint) -> Result<f64, FieldError> {
        let v = self.eval_raw(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(FieldError::Evaluation(*x.coords()))
        }
    }

    fn to_fn(&self) -> Func {
        match self {
            ScalarField::Polynomial(p) => {
                let fp = FloatPoly::new(p);
                Arc::new(move |x| fp.eval(x))
            }
            ScalarField::Callback(c) => c.f.clone(),
        }
    }

    fn joint_step(&self, other: &ScalarField) -> f64 {
        match (self.fd_step(), other.fd_step()) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => DEFAULT_FD_STEP,
        }
    }

    fn combine(&self, other: &ScalarField, op: fn(f64, f64) -> f64) -> ScalarField {
        let (a, b) = (self.to_fn(), other.to_fn());
        ScalarField::Callback(Callback {
            f: Arc::new(move |x| op(a(x), b(x))),
            h: self.joint_step(other),
        })
    }

    /// Applies a real function pointwise; the result is numeric.
    pub fn map(&self, op: impl Fn(f64) -> f64 + Send + Sync + 'static) -> ScalarField {
        let a = self.to_fn();
        let h = self.fd_step().unwrap_or(DEFAULT_FD_STEP);
        ScalarField::Callback(Callback { f: Arc::new(move |x| op(a(x))), h })
    }

    pub fn differentiate(&self, axis: usize) -> ScalarField {
        assert!(axis < 4, "axis out of range");
        match self {
            ScalarField::Polynomial(p) => p.differentiate(axis).into(),
            ScalarField::Callback(c) => {
                let f = c.f.clone();
                let h = c.h;
                ScalarField::Callback(Callback {
                    f: Arc::new(move |x| (f(&x.shifted(axis, h)) - f(&x.shifted(axis, -h))) / (2.0 * h)),
                    h,
                })
            }
        }
    }

    pub fn scale(&self, c: &BigRational) -> ScalarField {
        match self {
            ScalarField::Polynomial(p) => p.scale(c).into(),
            ScalarField::Callback(_) => {
                let k = rational_to_f64(c);
                self.map(move |v| k * v)
            }
        }
    }

    pub fn scale_int(&self, c: i64) -> ScalarField {
        self.scale(&BigRational::from_integer(c.into()))
    }

    pub fn half(&self) -> ScalarField {
        self.scale(&rat(1, 2))
    }

    /// Quotient; exact when the divisor is a nonzero constant polynomial.
    pub fn checked_div(&self, d: &ScalarField) -> Result<ScalarField, FieldError> {
        if let ScalarField::Polynomial(q) = d {
            if let Some(c) = q.constant_value() {
                if c.is_zero() {
                    return Err(FieldError::DivisionByZero);
                }
                return Ok(self.scale(&c.recip()));
            }
        }
        Ok(self.combine(d, |a, b| a / b))
    }

    /// √|f|; exact for constant polynomials that are squares of rationals.
    pub fn sqrt_abs(&self) -> ScalarField {
        if let ScalarField::Polynomial(p) = self {
            if let Some(c) = p.constant_value() {
                let c = c.abs();
                let (n, d) = (c.numer().sqrt(), c.denom().sqrt());
                if &(&n * &n) == c.numer() && &(&d * &d) == c.denom() {
                    return ScalarField::constant(BigRational::new(n, d));
                }
            }
        }
        self.map(|v| v.abs().sqrt())
    }

    /// Polynomial: exact emptiness. Callback: |f| ≤ tolerance at seeded probes.
    pub fn is_identically_zero(&self, tolerance: f64, probe_points: usize) -> bool {
        match self {
            ScalarField::Polynomial(p) => p.is_zero(),
            ScalarField::Callback(_) => {
                let probes = ProbeConfig { count: probe_points.max(1), ..ProbeConfig::default() };
                probes.points().iter().all(|x| {
                    let v = self.eval_raw(x);
                    v.is_finite() && v.abs() <= tolerance
                })
            }
        }
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        match (self, rhs) {
            (ScalarField::Polynomial(a), ScalarField::Polynomial(b)) => (a + b).into(),
            _ if self.is_exact_zero() => rhs.clone(),
            _ if rhs.is_exact_zero() => self.clone(),
            _ => self.combine(rhs, |a, b| a + b),
        }
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        match (self, rhs) {
            (ScalarField::Polynomial(a), ScalarField::Polynomial(b)) => (a - b).into(),
            _ if rhs.is_exact_zero() => self.clone(),
            _ => self.combine(rhs, |a, b| a - b),
        }
    }
}

impl Mul for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: &ScalarField) -> ScalarField {
        match (self, rhs) {
            (ScalarField::Polynomial(a), ScalarField::Polynomial(b)) => (a * b).into(),
            _ if self.is_exact_zero() || rhs.is_exact_zero() => ScalarField::zero(),
            (ScalarField::Polynomial(a), _) if a.constant_value().is_some_and(|c| c.is_one()) => {
                rhs.clone()
            }
            (_, ScalarField::Polynomial(b)) if b.constant_value().is_some_and(|c| c.is_one()) => {
                self.clone()
            }
            _ => self.combine(rhs, |a, b| a * b),
        }
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        match self {
            ScalarField::Polynomial(p) => (-p).into(),
            ScalarField::Callback(_) => self.map(|v| -v),
        }
    }
}

macro_rules! owned_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr for ScalarField {
            type Output = ScalarField;
            fn $m(self, rhs: ScalarField) -> ScalarField { (&self).$m(&rhs) }
        }
        impl $tr<&ScalarField> for ScalarField {
            type Output = ScalarField;
            fn $m(self, rhs: &ScalarField) -> ScalarField { (&self).$m(rhs) }
        }
        impl $tr<ScalarField> for &ScalarField {
            type Output = ScalarField;
            fn $m(self, rhs: ScalarField) -> ScalarField { self.$m(&rhs) }
        }
    )*};
}
owned_ops!(Add add, Sub sub, Mul mul);

impl Neg for ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        -&self
    }
}

/// Sum of a sequence of fields.
pub fn sum<'a, I: IntoIterator<Item = &'a ScalarField>>(it: I) -> ScalarField {
    let mut polys = Polynomial::zero();
    let mut numeric: Option<ScalarField> = None;
    for f in it {
        match f {
            ScalarField::Polynomial(p) => polys = &polys + p,
            ScalarField::Callback(_) => {
                numeric = Some(match numeric {
                    None => f.clone(),
                    Some(acc) => &acc + f,
                })
            }
        }
    }
    match numeric {
        None => polys.into(),
        Some(n) => &n + &ScalarField::from(polys),
    }
}

/// Seeded probe points in a box of the chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub seed: u64,
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { seed: 42, count: 12, lo: 0.5, hi: 2.5 }
    }
}

impl ProbeConfig {
    pub fn points(&self) -> Vec<ChartPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.count)
            .map(|_| ChartPoint([0; 4].map(|_: i32| rng.gen_range(self.lo..self.hi))))
            .collect()
    }
}

/// Outcome of a zero test on one residual.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ResidualStatus {
    ExactZero,
    WithinTolerance { max_abs: f64 },
    Nonzero { max_abs: f64 },
    Undefined,
}

impl ResidualStatus {
    pub fn passes(&self) -> bool {
        matches!(self, ResidualStatus::ExactZero | ResidualStatus::WithinTolerance { .. })
    }
}

/// Tolerance plus probe points shared by a batch of residual checks.
#[derive(Clone, Debug)]
pub struct ZeroTest {
    pub tolerance: f64,
    points: Vec<ChartPoint>,
}

impl ZeroTest {
    pub fn new(tolerance: f64, probes: &ProbeConfig) -> Self {
        Self { tolerance, points: probes.points() }
    }

    pub fn points(&self) -> &[ChartPoint] {
        &self.points
    }

    fn probe_max(&self, f: &ScalarField) -> Option<f64> {
        let mut m: f64 = 0.0;
        for x in &self.points {
            let v = f.eval_raw(x);
            if !v.is_finite() {
                return None;
            }
            m = m.max(v.abs());
        }
        Some(m)
    }

    pub fn status(&self, f: &ScalarField) -> ResidualStatus {
        match f {
            ScalarField::Polynomial(p) if p.is_zero() => ResidualStatus::ExactZero,
            ScalarField::Polynomial(p) => {
                let m = self.probe_max(f).unwrap_or(f64::INFINITY);
                ResidualStatus::Nonzero { max_abs: m.max(p.max_abs_coeff().min(f64::MAX)) }
            }
            ScalarField::Callback(_) => match self.probe_max(f) {
                None => ResidualStatus::Undefined,
                Some(m) if m <= self.tolerance => ResidualStatus::WithinTolerance { max_abs: m },
                Some(m) => ResidualStatus::Nonzero { max_abs: m },
            },
        }
    }
}

impl Default for ZeroTest {
    fn default() -> Self {
        Self::new(1e-8, &ProbeConfig::default())
    }
}

/// A named field that should vanish.
#[derive(Clone, Debug)]
pub struct Residual {
    pub id: String,
    pub field: ScalarField,
}

impl Residual {
    pub fn new(id: impl Into<String>, field: ScalarField) -> Self {
        Self { id: id.into(), field }
    }

    pub fn summarize(&self, zt: &ZeroTest) -> ResidualSummary {
        ResidualSummary { id: self.id.clone(), status: zt.status(&self.field) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualSummary {
    pub id: String,
    #[serde(flatten)]
    pub status: ResidualStatus,
}

pub fn summarize_all(rs: &[Residual], zt: &ZeroTest) -> Vec<ResidualSummary> {
    rs.iter().map(|r| r.summarize(zt)).collect()
}

pub fn all_pass(s: &[ResidualSummary]) -> bool {
    s.iter().all(|r| r.status.passes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(c: [f64; 4]) -> ChartPoint {
        ChartPoint::new(c).unwrap()
    }

    #[test]
    fn chart_point_rejects_nan() {
        assert_eq!(ChartPoint::new([0.0, f64::NAN, 0.0, 0.0]), Err(FieldError::NonFinitePoint));
    }

    #[test]
    fn callback_zero_test() {
        let f = ScalarField::from_fn(|_| 1e-14);
        assert!(f.is_identically_zero(1e-10, 8));
        assert!(!ScalarField::one().is_identically_zero(1.0, 8));
        let g = &ScalarField::var(2) - &ScalarField::var(2);
        assert!(g.is_identically_zero(0.0, 1));
    }

    #[test]
    fn non_finite_callback_is_an_error() {
        let f = ScalarField::from_fn(|x| 1.0 / x.coords()[0]);
        assert!(matches!(f.evaluate(&pt([0.0; 4])), Err(FieldError::Evaluation(_))));
    }

    #[test]
    fn callback_derivative_is_second_order() {
        let poly = &(&ScalarField::var(2) * &ScalarField::var(3)) * &ScalarField::var(2);
        let cb = ScalarField::from_fn(|x| {
            let c = x.coords();
            c[2] * c[2] * c[3]
        });
        let x = pt([0.3, 0.1, 1.2, -0.7]);
        for axis in 0..4 {
            let exact = poly.differentiate(axis).evaluate(&x).unwrap();
            let approx = cb.differentiate(axis).evaluate(&x).unwrap();
            assert!((exact - approx).abs() < 1e-8, "axis {axis}: {exact} vs {approx}");
        }
        let exact = poly.differentiate(2).differentiate(2).evaluate(&x).unwrap();
        let approx = cb.differentiate(2).differentiate(2).evaluate(&x).unwrap();
        assert!((exact - approx).abs() < 1e-4);
    }

    #[test]
    fn invalid_step_rejected() {
        assert!(ScalarField::callback(0.0, |_| 0.0).is_err());
        assert!(ScalarField::callback(f64::NAN, |_| 0.0).is_err());
    }

    #[test]
    fn exact_division_and_roots() {
        let f = ScalarField::var(1).scale_int(6);
        let q = f.checked_div(&ScalarField::from_int(3)).unwrap();
        assert_eq!(q.as_poly(), Some(&Polynomial::var(1).scale(&rat(2, 1))));
        assert_eq!(f.checked_div(&ScalarField::zero()).unwrap_err(), FieldError::DivisionByZero);
        let r = ScalarField::constant(rat(-9, 4)).sqrt_abs();
        assert_eq!(r.as_poly().and_then(|p| p.constant_value()), Some(rat(3, 2)));
        assert!(!ScalarField::from_int(2).sqrt_abs().is_polynomial());
    }

    #[test]
    fn probes_are_seeded() {
        let a = ProbeConfig::default().points();
        let b = ProbeConfig::default().points();
        assert_eq!(a, b);
        let c = ProbeConfig { seed: 7, ..ProbeConfig::default() }.points();
        assert_ne!(a, c);
        assert!(a.iter().all(|p| p.coords().iter().all(|&v| (0.5..2.5).contains(&v))));
    }

    #[test]
    fn residual_status_kinds() {
        let zt = ZeroTest::default();
        assert_eq!(zt.status(&ScalarField::zero()), ResidualStatus::ExactZero);
        assert!(matches!(zt.status(&ScalarField::one()), ResidualStatus::Nonzero { .. }));
        let tiny = ScalarField::from_fn(|_| 1e-12);
        assert!(matches!(zt.status(&tiny), ResidualStatus::WithinTolerance { .. }));
        let nan = ScalarField::from_fn(|_| f64::NAN);
        assert_eq!(zt.status(&nan), ResidualStatus::Undefined);
        let json = serde_json::to_string(&Residual::new("r", ScalarField::zero()).summarize(&zt)).unwrap();
        assert_eq!(json, r#"{"id":"r","status":"exact-zero"}"#);
    }

    #[test]
    fn mixed_arithmetic_falls_back_to_numeric() {
        let p = ScalarField::var(0);
        let c = ScalarField::from_fn(|x| x.coords()[1]);
        let s = &p + &c;
        assert!(!s.is_polynomial());
        assert_eq!(s.evaluate(&pt([1.0, 2.0, 0.0, 0.0])).unwrap(), 3.0);
        assert!((&ScalarField::zero() * &c).is_exact_zero());
    }
}
