use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{sd_residuals, MetricError, NeutralMetric};
use crate::fields::{Exponent, Polynomial, ScalarField};

/// Polynomial (p, q, r) of a special-form metric.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SdTriple {
    pub p: Polynomial,
    pub q: Polynomial,
    pub r: Polynomial,
}

impl SdTriple {
    pub fn metric(&self) -> NeutralMetric {
        NeutralMetric::special_form_poly(self.p.clone(), self.q.clone(), self.r.clone())
    }

    fn parts(&self) -> [&Polynomial; 3] {
        [&self.p, &self.q, &self.r]
    }

    fn is_zero(&self) -> bool {
        self.parts().iter().all(|f| f.is_zero())
    }

    fn combine(terms: &[(i64, &SdTriple)]) -> SdTriple {
        let mut acc = [Polynomial::zero(), Polynomial::zero(), Polynomial::zero()];
        for (w, t) in terms {
            let w = BigRational::from_integer((*w).into());
            for (a, f) in acc.iter_mut().zip(t.parts()) {
                *a = &*a + &f.scale(&w);
            }
        }
        let [p, q, r] = acc;
        SdTriple { p, q, r }
    }
}

/// Exact residual polynomials of the self-duality system.
pub fn sd_residual_polys(t: &SdTriple) -> Vec<Polynomial> {
    let [p, q, r] = t.parts().map(|f| ScalarField::from(f.clone()));
    sd_residuals(&p, &q, &r)
        .into_iter()
        .map(|res| res.field.as_poly().cloned().expect("polynomial input"))
        .collect()
}

fn monomials(fiber_degree: u32, base_degree: u32) -> Vec<Exponent> {
    let mut out = Vec::new();
    for b in 0..=base_degree {
        for i0 in 0..=b {
            for f in 0..=fiber_degree {
                for i2 in 0..=f {
                    out.push([i0, b - i0, i2, f - i2]);
                }
            }
        }
    }
    out
}

/// Basis of the null space of `rows` (each of length `ncols`) by exact row reduction.
fn null_space(mut rows: Vec<Vec<BigRational>>, ncols: usize) -> Vec<Vec<BigRational>> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        let Some(k) = (r..rows.len()).find(|&k| !rows[k][c].is_zero()) else { continue };
        rows.swap(r, k);
        let inv = rows[r][c].recip();
        for v in rows[r].iter_mut() {
            *v *= &inv;
        }
        for k in 0..rows.len() {
            if k != r && !rows[k][c].is_zero() {
                let factor = rows[k][c].clone();
                for j in c..ncols {
                    let delta = &factor * &rows[r][j];
                    rows[k][j] -= delta;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    let mut basis = Vec::new();
    for free in (0..ncols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![BigRational::zero(); ncols];
        v[free] = BigRational::one();
        for (i, &pc) in pivots.iter().enumerate() {
            v[pc] = -rows[i][free].clone();
        }
        basis.push(v);
    }
    basis
}

/// Basis of the polynomial solutions of the self-duality system with the given degrees.
pub fn sd_null_space(fiber_degree: u32, base_degree: u32) -> Vec<SdTriple> {
    let monos = monomials(fiber_degree, base_degree);
    let n = monos.len();
    let mut images: Vec<Vec<Polynomial>> = Vec::with_capacity(3 * n);
    for slot in 0..3 {
        for e in &monos {
            let m = Polynomial::monomial(BigRational::one(), *e);
            let mut parts = [Polynomial::zero(), Polynomial::zero(), Polynomial::zero()];
            parts[slot] = m;
            let [p, q, r] = parts;
            images.push(sd_residual_polys(&SdTriple { p, q, r }));
        }
    }
    let mut keys: Vec<(usize, Exponent)> = images
        .iter()
        .flat_map(|res| res.iter().enumerate().flat_map(|(k, f)| f.terms().map(move |(e, _)| (k, *e))))
        .collect();
    keys.sort();
    keys.dedup();
    let rows: Vec<Vec<BigRational>> = keys
        .iter()
        .map(|(k, e)| images.iter().map(|res| res[*k].coeff(e)).collect())
        .collect();
    null_space(rows, 3 * n)
        .into_iter()
        .map(|v| {
            let field = |slot: usize| {
                Polynomial::from_terms(monos.iter().enumerate().map(|(i, e)| (v[slot * n + i].clone(), *e)))
            };
            SdTriple { p: field(0), q: field(1), r: field(2) }
        })
        .collect()
}

/// Random members of the solution space of the self-duality system.
///
/// Each member first draws an effective fiber degree in `0..=fiber_degree`, then a
/// random small-integer combination of the null-space basis for that degree.
pub fn generate_sd_family(
    fiber_degree: u32,
    base_degree: u32,
    seed: u64,
    count: usize,
) -> Result<Vec<SdTriple>, MetricError> {
    let bases: Vec<Vec<SdTriple>> =
        (0..=fiber_degree).map(|d| sd_null_space(d, base_degree)).collect();
    if bases.iter().any(|b| b.is_empty()) {
        return Err(MetricError::InfeasibleDegree);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let basis = &bases[rng.gen_range(0..=fiber_degree as usize)];
        let weights: Vec<(i64, &SdTriple)> =
            basis.iter().map(|b| (rng.gen_range(-3..=3), b)).collect();
        let t = SdTriple::combine(&weights);
        if !t.is_zero() {
            out.push(t);
        }
    }
    Ok(out)
}

/// Adds one random monomial of fiber degree 2 or 3 that breaks the system.
pub fn perturb_off_family<R: Rng>(t: &SdTriple, rng: &mut R) -> SdTriple {
    loop {
        let fiber = rng.gen_range(2..=3u32);
        let i2 = rng.gen_range(0..=fiber);
        let e = [rng.gen_range(0..=1), rng.gen_range(0..=1), i2, fiber - i2];
        let c = loop {
            let c: i64 = rng.gen_range(-3..=3);
            if c != 0 {
                break c;
            }
        };
        let m = Polynomial::monomial(BigRational::from_integer(c.into()), e);
        let mut out = t.clone();
        match rng.gen_range(0..3) {
            0 => out.p = &out.p + &m,
            1 => out.q = &out.q + &m,
            _ => out.r = &out.r + &m,
        }
        if sd_residual_polys(&out).iter().any(|f| !f.is_zero()) {
            return out;
        }
    }
}
