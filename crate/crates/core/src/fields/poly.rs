use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::{ChartPoint, FieldError};

/// Exponents of (x⁰, x¹, x², x³).
pub type Exponent = [u32; 4];

/// Largest exponent accepted from serialized input.
pub const MAX_PARSED_EXPONENT: u32 = 64;

/// Multivariate polynomial over ℚ in the four chart coordinates.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Polynomial {
    terms: BTreeMap<Exponent, BigRational>,
}

/// Serialized form of one term: `{"coeff": "num/den", "exps": [i, j, k, l]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermSpec {
    pub coeff: String,
    pub exps: Exponent,
}

pub fn parse_rational(s: &str) -> Result<BigRational, FieldError> {
    let t = s.trim();
    let bad = || FieldError::BadRational(s.to_string());
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    if num.is_empty() || den.is_empty() || den.starts_with(['+', '-']) {
        return Err(bad());
    }
    let n: BigInt = num.parse().map_err(|_| bad())?;
    let d: BigInt = den.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(FieldError::ZeroDenominator(s.to_string()));
    }
    Ok(BigRational::new(n, d))
}

pub fn format_rational(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn rational_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        Self::monomial(c, [0; 4])
    }

    pub fn from_int(c: i64) -> Self {
        Self::constant(BigRational::from_integer(c.into()))
    }

    pub fn monomial(c: BigRational, exps: Exponent) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(exps, c);
        }
        Self { terms }
    }

    /// The coordinate function xᵃ.
    pub fn var(axis: usize) -> Self {
        let mut e = [0; 4];
        e[axis] = 1;
        Self::monomial(BigRational::one(), e)
    }

    /// Builds from possibly repeated exponents; repeated terms are summed.
    pub fn from_terms<I: IntoIterator<Item = (BigRational, Exponent)>>(it: I) -> Self {
        let mut p = Self::zero();
        for (c, e) in it {
            p.add_term(e, c);
        }
        p
    }

    pub fn from_specs(specs: &[TermSpec]) -> Result<Self, FieldError> {
        let mut p = Self::zero();
        for t in specs {
            if let Some(&e) = t.exps.iter().find(|&&e| e > MAX_PARSED_EXPONENT) {
                return Err(FieldError::ExponentTooLarge(e));
            }
            p.add_term(t.exps, parse_rational(&t.coeff)?);
        }
        Ok(p)
    }

    pub fn to_specs(&self) -> Vec<TermSpec> {
        self.terms
            .iter()
            .map(|(e, c)| TermSpec { coeff: format_rational(c), exps: *e })
            .collect()
    }

    fn add_term(&mut self, e: Exponent, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(e).or_insert_with(BigRational::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&e);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &BigRational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, e: &Exponent) -> BigRational {
        self.terms.get(e).cloned().unwrap_or_else(BigRational::zero)
    }

    /// `Some(c)` when the polynomial is the constant c (including 0).
    pub fn constant_value(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&[0; 4]).cloned(),
            _ => None,
        }
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    /// Largest exponent sum over the given axes.
    pub fn degree_in(&self, axes: &[usize]) -> u32 {
        self.terms
            .keys()
            .map(|e| axes.iter().map(|&a| e[a]).sum())
            .max()
            .unwrap_or(0)
    }

    pub fn depends_on(&self, axis: usize) -> bool {
        self.terms.keys().any(|e| e[axis] > 0)
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self { terms: self.terms.iter().map(|(e, v)| (*e, v * c)).collect() }
    }

    pub fn differentiate(&self, axis: usize) -> Self {
        let mut out = BTreeMap::new();
        for (e, c) in &self.terms {
            if e[axis] == 0 {
                continue;
            }
            let mut ne = *e;
            ne[axis] -= 1;
            out.insert(ne, c * BigRational::from_integer(e[axis].into()));
        }
        Self { terms: out }
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    pub fn evaluate(&self, x: &ChartPoint) -> f64 {
        let c = x.coords();
        self.terms
            .iter()
            .map(|(e, q)| {
                let mut v = rational_to_f64(q);
                for a in 0..4 {
                    if e[a] > 0 {
                        v *= c[a].powi(e[a] as i32);
                    }
                }
                v
            })
            .sum()
    }

    pub fn evaluate_exact(&self, x: &[BigRational; 4]) -> BigRational {
        let mut acc = BigRational::zero();
        for (e, q) in &self.terms {
            let mut v = q.clone();
            for a in 0..4 {
                for _ in 0..e[a] {
                    v *= &x[a];
                }
            }
            acc += v;
        }
        acc
    }

    /// Largest absolute coefficient, used in reports.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| rational_to_f64(&c.abs())).fold(0.0, f64::max)
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(*e, c.clone());
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(*e, -c);
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial { terms: self.terms.iter().map(|(e, c)| (*e, -c)).collect() }
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut acc: BTreeMap<Exponent, BigRational> = BTreeMap::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &rhs.terms {
                let e = [e1[0] + e2[0], e1[1] + e2[1], e1[2] + e2[2], e1[3] + e2[3]];
                *acc.entry(e).or_insert_with(BigRational::zero) += c1 * c2;
            }
        }
        acc.retain(|_, c| !c.is_zero());
        Polynomial { terms: acc }
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (e, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            if i > 0 {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            } else if neg {
                write!(f, "-")?;
            }
            let a = c.abs();
            let is_unit = e.iter().all(|&k| k == 0);
            if !a.is_one() || is_unit {
                write!(f, "{}", format_rational(&a))?;
            }
            let mut first = a.is_one() && !is_unit;
            for (axis, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                if !first {
                    write!(f, "*")?;
                }
                first = false;
                write!(f, "x{axis}")?;
                if k > 1 {
                    write!(f, "^{k}")?;
                }
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x(a: usize) -> Polynomial {
        Polynomial::var(a)
    }

    #[test]
    fn parse_rationals() {
        assert_eq!(parse_rational("3").unwrap(), rat(3, 1));
        assert_eq!(parse_rational(" -6/4 ").unwrap(), rat(-3, 2));
        assert!(matches!(parse_rational("1/0"), Err(FieldError::ZeroDenominator(_))));
        assert!(parse_rational("1/-2").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn cancellation_drops_terms() {
        let p = &x(2) - &x(2);
        assert!(p.is_zero());
        assert_eq!(p.len(), 0);
    }

    #[test]
    fn derivatives() {
        let f = &x(2).pow(2) + &x(3).pow(2);
        assert_eq!(f.differentiate(2), x(2).scale(&rat(2, 1)));
        let g = (&x(2) * &x(3)).scale(&rat(-2, 1));
        assert_eq!(g.differentiate(2).differentiate(3), Polynomial::from_int(-2));
        assert!((&x(2) * &x(3)).differentiate(0).is_zero());
    }

    #[test]
    fn evaluation() {
        let f = &x(2) * &x(3);
        let p = ChartPoint::new([0.0, 0.0, 2.0, 3.0]).unwrap();
        assert_eq!(f.evaluate(&p), 6.0);
        assert_eq!(Polynomial::zero().evaluate(&p), 0.0);
        let g = f.scale(&rat(-2, 1));
        assert_eq!(g.evaluate(&ChartPoint::new([1.0; 4]).unwrap()), -2.0);
    }

    #[test]
    fn spec_round_trip() {
        let f = &(&x(0) * &x(3)).scale(&rat(5, 7)) - &Polynomial::from_int(2);
        let back = Polynomial::from_specs(&f.to_specs()).unwrap();
        assert_eq!(f, back);
        let dup = vec![
            TermSpec { coeff: "1/2".into(), exps: [0, 0, 1, 0] },
            TermSpec { coeff: "-1/2".into(), exps: [0, 0, 1, 0] },
        ];
        assert!(Polynomial::from_specs(&dup).unwrap().is_zero());
    }

    #[test]
    fn display() {
        let f = &(&x(2) * &x(3)).scale(&rat(-2, 1)) + &Polynomial::from_int(1);
        assert_eq!(f.to_string(), "1 - 2*x2*x3");
    }

    fn arb_poly() -> impl Strategy<Value = Polynomial> {
        prop::collection::vec(((-9i64..=9), (1i64..=4), prop::array::uniform4(0u32..=3)), 0..6)
            .prop_map(|ts| Polynomial::from_terms(ts.into_iter().map(|(n, d, e)| (rat(n, d), e))))
    }

    fn arb_point() -> impl Strategy<Value = [f64; 4]> {
        prop::array::uniform4(-1.5f64..1.5)
    }

    proptest! {
        #[test]
        fn mixed_partials_commute(f in arb_poly(), i in 0usize..4, j in 0usize..4) {
            prop_assert_eq!(f.differentiate(i).differentiate(j), f.differentiate(j).differentiate(i));
        }

        #[test]
        fn derivative_matches_analytic(f in arb_poly(), i in 0usize..4, pt in arb_point()) {
            // analytic partial evaluated term by term
            let mut expect = 0.0;
            for (e, c) in f.terms() {
                if e[i] == 0 { continue; }
                let mut v = rational_to_f64(c) * e[i] as f64;
                for a in 0..4 {
                    let k = if a == i { e[a] - 1 } else { e[a] };
                    v *= pt[a].powi(k as i32);
                }
                expect += v;
            }
            let got = f.differentiate(i).evaluate(&ChartPoint::new(pt).unwrap());
            prop_assert!((got - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }

        #[test]
        fn ring_laws(f in arb_poly(), g in arb_poly(), h in arb_poly()) {
            prop_assert_eq!(&(&f * &g) * &h, &f * &(&g * &h));
            prop_assert_eq!(&f * &(&g + &h), &(&f * &g) + &(&f * &h));
            prop_assert!((&(&(&f + &g) - &g) - &f).is_zero());
        }

        #[test]
        fn leibniz(f in arb_poly(), g in arb_poly(), i in 0usize..4) {
            let lhs = (&f * &g).differentiate(i);
            let rhs = &(&f.differentiate(i) * &g) + &(&f * &g.differentiate(i));
            prop_assert_eq!(lhs, rhs);
        }
    }
}
