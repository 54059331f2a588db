//! Riemann and Weyl tensors, the Hodge star on bivectors and 2-forms, the W±
//! blocks over the (φ, ψ) frames and the spin curvature Ω⁺.

use serde::Serialize;

use crate::connection::{
    christoffel, split_spin_parts, Christoffel, ConnectionError, FoliatedGeometry, FrameBrackets,
    OneForm, Sl2Form,
};
use crate::fields::{sum, ChartPoint, Residual, ResidualStatus, ScalarField, ZeroTest};
use crate::metric::NeutralMetric;
use crate::tetrad::{lambda_frames, ChartBivector, NullTetrad, FRAME_NAMES, PAIRS};

fn pair_index(k: usize, l: usize) -> Option<(usize, i64)> {
    if k == l {
        return None;
    }
    let (a, b, s) = if k < l { (k, l, 1) } else { (l, k, -1) };
    PAIRS.iter().position(|&p| p == (a, b)).map(|i| (i, s))
}

/// Chart curvature with R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_{[X,Y]}Z.
#[derive(Clone, Debug)]
pub struct CurvatureTensor {
    /// R^i_{jkl} for k < l, indexed `[i][j][pair]`.
    upper: Vec<Vec<Vec<ScalarField>>>,
    /// R_{ijkl} = g_{im}R^m_{jkl}, indexed `[i][j][pair]`.
    lower: Vec<Vec<Vec<ScalarField>>>,
    pub ricci: [[ScalarField; 4]; 4],
    pub scalar: ScalarField,
}

pub fn riemann(m: &NeutralMetric) -> Result<CurvatureTensor, ConnectionError> {
    let ch = christoffel(m)?;
    riemann_from(m, &ch)
}

pub fn riemann_from(m: &NeutralMetric, ch: &Christoffel) -> Result<CurvatureTensor, ConnectionError> {
    let gam = &ch.gamma;
    let upper: Vec<Vec<Vec<ScalarField>>> = (0..4)
        .map(|i| {
            (0..4)
                .map(|j| {
                    PAIRS
                        .iter()
                        .map(|&(k, l)| {
                            let mut terms =
                                vec![gam[i][l][j].differentiate(k), -gam[i][k][j].differentiate(l)];
                            for n in 0..4 {
                                if !gam[i][k][n].is_exact_zero() && !gam[n][l][j].is_exact_zero() {
                                    terms.push(&gam[i][k][n] * &gam[n][l][j]);
                                }
                                if !gam[i][l][n].is_exact_zero() && !gam[n][k][j].is_exact_zero() {
                                    terms.push(-(&gam[i][l][n] * &gam[n][k][j]));
                                }
                            }
                            sum(&terms)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let lower: Vec<Vec<Vec<ScalarField>>> = (0..4)
        .map(|i| {
            (0..4)
                .map(|j| {
                    (0..6)
                        .map(|p| {
                            let terms: Vec<ScalarField> = (0..4)
                                .filter(|&n| !m.entry(i, n).is_exact_zero())
                                .map(|n| m.entry(i, n) * &upper[n][j][p])
                                .collect();
                            sum(&terms)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let up = |i: usize, j: usize, k: usize, l: usize| -> ScalarField {
        match pair_index(k, l) {
            None => ScalarField::zero(),
            Some((p, s)) => upper[i][j][p].scale_int(s),
        }
    };
    let ricci: [[ScalarField; 4]; 4] = std::array::from_fn(|j| {
        std::array::from_fn(|l| sum(&(0..4).map(|i| up(i, j, i, l)).collect::<Vec<_>>()))
    });
    let inv = m.inverse()?;
    let mut terms = Vec::new();
    for j in 0..4 {
        for l in 0..4 {
            if !inv[j][l].is_exact_zero() {
                terms.push(&inv[j][l] * &ricci[j][l]);
            }
        }
    }
    Ok(CurvatureTensor { upper, lower, ricci, scalar: sum(&terms) })
}

impl CurvatureTensor {
    /// R_{ijkl}.
    pub fn lowered(&self, i: usize, j: usize, k: usize, l: usize) -> ScalarField {
        match pair_index(k, l) {
            None => ScalarField::zero(),
            Some((p, s)) => self.lower[i][j][p].scale_int(s),
        }
    }

    /// R^i_{jkl}.
    pub fn raised(&self, i: usize, j: usize, k: usize, l: usize) -> ScalarField {
        match pair_index(k, l) {
            None => ScalarField::zero(),
            Some((p, s)) => self.upper[i][j][p].scale_int(s),
        }
    }

    /// Antisymmetry in the first pair, pair symmetry and the first Bianchi identity.
    pub fn symmetry_residuals(&self) -> Vec<Residual> {
        let r = |i, j, k, l| self.lowered(i, j, k, l);
        let mut out = Vec::new();
        for (p, &(k, l)) in PAIRS.iter().enumerate() {
            for i in 0..4 {
                for j in i..4 {
                    out.push(Residual::new(
                        format!("R{i}{j}{k}{l}+R{j}{i}{k}{l}"),
                        &self.lower[i][j][p] + &self.lower[j][i][p],
                    ));
                }
            }
            for &(i, j) in PAIRS.iter() {
                out.push(Residual::new(format!("R{i}{j}{k}{l}-R{k}{l}{i}{j}"), &r(i, j, k, l) - &r(k, l, i, j)));
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    for l in (k + 1)..4 {
                        let b = sum(&[r(i, j, k, l), r(i, k, l, j), r(i, l, j, k)]);
                        out.push(Residual::new(format!("bianchi {i}{j}{k}{l}"), b));
                    }
                }
            }
        }
        out
    }

    /// Weyl tensor C_{ijkl} with the Schouten tensor S = ½(Ric − (R/6)g).
    pub fn weyl(&self, m: &NeutralMetric) -> WeylTensor {
        let sixth = self.scalar.scale(&crate::fields::rat(1, 6));
        let s: [[ScalarField; 4]; 4] = std::array::from_fn(|i| {
            std::array::from_fn(|j| (&self.ricci[i][j] - &(&sixth * m.entry(i, j))).half())
        });
        let g = |i: usize, j: usize| m.entry(i, j);
        let c = (0..4)
            .map(|i| {
                (0..4)
                    .map(|j| {
                        PAIRS
                            .iter()
                            .map(|&(k, l)| {
                                let corr = sum(&[
                                    g(i, k) * &s[j][l],
                                    -(g(i, l) * &s[j][k]),
                                    -(g(j, k) * &s[i][l]),
                                    g(j, l) * &s[i][k],
                                ]);
                                &self.lowered(i, j, k, l) - &corr
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        WeylTensor { lower: c }
    }

    /// ¼ R_{ijkl}X^{ij}Y^{kl} on chart bivectors.
    pub fn on_bivectors(&self, x: &ChartBivector, y: &ChartBivector) -> ScalarField {
        contract(&self.lower, x, y)
    }
}

fn contract(t: &[Vec<Vec<ScalarField>>], x: &ChartBivector, y: &ChartBivector) -> ScalarField {
    let mut terms = Vec::new();
    for (a, &(i, j)) in PAIRS.iter().enumerate() {
        if x.0[a].is_exact_zero() {
            continue;
        }
        for b in 0..6 {
            if y.0[b].is_exact_zero() || t[i][j][b].is_exact_zero() {
                continue;
            }
            terms.push(&(&t[i][j][b] * &x.0[a]) * &y.0[b]);
        }
    }
    sum(&terms)
}

#[derive(Clone, Debug)]
pub struct WeylTensor {
    lower: Vec<Vec<Vec<ScalarField>>>,
}

impl WeylTensor {
    pub fn on_bivectors(&self, x: &ChartBivector, y: &ChartBivector) -> ScalarField {
        contract(&self.lower, x, y)
    }

    pub fn lowered(&self, i: usize, j: usize, k: usize, l: usize) -> ScalarField {
        match pair_index(k, l) {
            None => ScalarField::zero(),
            Some((p, s)) => self.lower[i][j][p].scale_int(s),
        }
    }
}

/// Hodge star with ε(e₀,e₁,𝔭₀,𝔭₁) > 0, as 6×6 matrices over chart pairs.
#[derive(Clone, Debug)]
pub struct HodgeStar {
    /// +1 when the chart basis is positively oriented.
    pub orientation: i64,
    bivector: [[ScalarField; 6]; 6],
    form: [[ScalarField; 6]; 6],
}

fn perm_sign(p: [usize; 4]) -> i64 {
    let mut s = 1;
    for i in 0..4 {
        for j in (i + 1)..4 {
            if p[i] == p[j] {
                return 0;
            }
            if p[i] > p[j] {
                s = -s;
            }
        }
    }
    s
}

/// Sign of the tetrad determinant at the first point where it is nonzero.
pub fn tetrad_orientation(t: &NullTetrad, points: &[ChartPoint]) -> i64 {
    let det = t.determinant();
    if let Some(c) = det.as_poly().and_then(|p| p.constant_value()) {
        use num_traits::Signed;
        return if c.is_negative() { -1 } else { 1 };
    }
    points
        .iter()
        .map(|x| det.eval_raw(x))
        .find(|v| v.is_finite() && *v != 0.0)
        .map_or(1, |v| if v < 0.0 { -1 } else { 1 })
}

pub fn hodge_star(m: &NeutralMetric, orientation: i64) -> Result<HodgeStar, ConnectionError> {
    let inv = m.inverse().map_err(ConnectionError::from)?;
    let vol = m.determinant().sqrt_abs().scale_int(orientation);
    let eps = |a: usize, b: usize, c: usize, d: usize| -> ScalarField {
        match perm_sign([a, b, c, d]) {
            0 => ScalarField::zero(),
            s => vol.scale_int(s),
        }
    };
    // bivector: (*B)^{ab} = Σ_{c<d} g^{ae}g^{bf} ε_{efcd} B^{cd}
    let bivector = std::array::from_fn(|r| {
        let (a, b) = PAIRS[r];
        std::array::from_fn(|s| {
            let (c, d) = PAIRS[s];
            let mut terms = Vec::new();
            for e in 0..4 {
                for f in 0..4 {
                    if inv[a][e].is_exact_zero() || inv[b][f].is_exact_zero() || perm_sign([e, f, c, d]) == 0 {
                        continue;
                    }
                    terms.push(&(&inv[a][e] * &inv[b][f]) * &eps(e, f, c, d));
                }
            }
            sum(&terms)
        })
    });
    // form: (*F)_{ab} = Σ_{c<d} ε_{abef} g^{ec}g^{fd} F_{cd}
    let form = std::array::from_fn(|r| {
        let (a, b) = PAIRS[r];
        std::array::from_fn(|s| {
            let (c, d) = PAIRS[s];
            let mut terms = Vec::new();
            for e in 0..4 {
                for f in 0..4 {
                    if inv[e][c].is_exact_zero() || inv[f][d].is_exact_zero() || perm_sign([a, b, e, f]) == 0 {
                        continue;
                    }
                    terms.push(&(&inv[e][c] * &inv[f][d]) * &eps(a, b, e, f));
                }
            }
            sum(&terms)
        })
    });
    Ok(HodgeStar { orientation, bivector, form })
}

fn apply6(mat: &[[ScalarField; 6]; 6], v: &[ScalarField; 6]) -> [ScalarField; 6] {
    std::array::from_fn(|r| {
        let terms: Vec<ScalarField> = (0..6)
            .filter(|&s| !mat[r][s].is_exact_zero() && !v[s].is_exact_zero())
            .map(|s| &mat[r][s] * &v[s])
            .collect();
        sum(&terms)
    })
}

impl HodgeStar {
    pub fn apply_bivector(&self, b: &ChartBivector) -> ChartBivector {
        ChartBivector(apply6(&self.bivector, &b.0))
    }

    /// Acts on 2-forms given by their components F_{ij}, i < j, in pair order.
    pub fn apply_form(&self, f: &[ScalarField; 6]) -> [ScalarField; 6] {
        apply6(&self.form, f)
    }

    /// Entries of *∘* − Id on both bivectors and forms.
    pub fn involution_residuals(&self) -> Vec<Residual> {
        let mut out = Vec::new();
        for (name, m) in [("bivector", &self.bivector), ("form", &self.form)] {
            for r in 0..6 {
                for s in 0..6 {
                    let mut terms: Vec<ScalarField> = (0..6).map(|k| &m[r][k] * &m[k][s]).collect();
                    if r == s {
                        terms.push(ScalarField::from_int(-1));
                    }
                    out.push(Residual::new(format!("{name} **-1 [{r}][{s}]"), sum(&terms)));
                }
            }
        }
        out
    }

    /// *φᵢ − φᵢ and *ψᵢ + ψᵢ for the frames of `t`.
    pub fn eigenframe_residuals(&self, t: &NullTetrad) -> Vec<Residual> {
        let frames = lambda_frames(t);
        let mut out = Vec::new();
        for (i, f) in frames.phi.iter().enumerate() {
            let d = self.apply_bivector(f).sub(f);
            for (k, v) in d.0.into_iter().enumerate() {
                out.push(Residual::new(format!("*phi{}-phi{}[{k}]", i + 1, i + 1), v));
            }
        }
        for (i, f) in frames.psi.iter().enumerate() {
            let d = self.apply_bivector(f).add(f);
            for (k, v) in d.0.into_iter().enumerate() {
                out.push(Residual::new(format!("*psi{}+psi{}[{k}]", i + 1, i + 1), v));
            }
        }
        out
    }
}

/// h⁻¹ on the stored frame basis.
const FRAME_PAIRING_INV: [[(i64, i64); 3]; 3] = [[(0, 1), (1, 1), (0, 1)], [(1, 1), (0, 1), (0, 1)], [(0, 1), (0, 1), (-1, 2)]];

/// Weyl tensor over the frames: blocks of W(B, B') = ¼ C_{ijkl}B^{ij}B'^{kl}.
#[derive(Clone, Debug)]
pub struct WeylDecomposition {
    /// φ-block, bilinear form on the stored basis (φ₁, φ₂, √2φ₃).
    pub w_plus: [[ScalarField; 3]; 3],
    /// ψ-block on (ψ₁, ψ₂, √2ψ₃).
    pub w_minus: [[ScalarField; 3]; 3],
    pub mixed: [[ScalarField; 3]; 3],
    pub orientation: i64,
}

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum AsdNorm {
    Exact(&'static str),
    Max(f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct WeylReport {
    pub asd_norm: AsdNorm,
    pub sd: bool,
    pub sd_norm: AsdNorm,
    pub orientation: i64,
}

pub fn weyl_decomposition(m: &NeutralMetric, t: &NullTetrad) -> Result<WeylDecomposition, ConnectionError> {
    let ch = christoffel(m)?;
    let r = riemann_from(m, &ch)?;
    let w = r.weyl(m);
    let frames = lambda_frames(t);
    let block = |x: &[ChartBivector; 3], y: &[ChartBivector; 3]| -> [[ScalarField; 3]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| w.on_bivectors(&x[i], &y[j])))
    };
    Ok(WeylDecomposition {
        w_plus: block(&frames.phi, &frames.phi),
        w_minus: block(&frames.psi, &frames.psi),
        mixed: block(&frames.phi, &frames.psi),
        orientation: tetrad_orientation(t, ZeroTest::default().points()),
    })
}

fn norm_of(block: &[[ScalarField; 3]; 3], zt: &ZeroTest) -> (AsdNorm, bool) {
    let mut max: f64 = 0.0;
    let mut exact = true;
    let mut pass = true;
    for f in block.iter().flatten() {
        match zt.status(f) {
            ResidualStatus::ExactZero => {}
            ResidualStatus::WithinTolerance { max_abs } => {
                exact = false;
                max = max.max(max_abs);
            }
            ResidualStatus::Nonzero { max_abs } => {
                exact = false;
                pass = false;
                max = max.max(max_abs);
            }
            ResidualStatus::Undefined => {
                exact = false;
                pass = false;
                max = f64::INFINITY;
            }
        }
    }
    (if exact { AsdNorm::Exact("exact-zero") } else { AsdNorm::Max(max) }, pass)
}

impl WeylDecomposition {
    /// Trace of h⁻¹W on each block.
    fn trace(block: &[[ScalarField; 3]; 3]) -> ScalarField {
        let mut terms = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                let (n, d) = FRAME_PAIRING_INV[i][j];
                if n != 0 {
                    terms.push(block[j][i].scale(&crate::fields::rat(n, d)));
                }
            }
        }
        sum(&terms)
    }

    /// Symmetry and trace-freeness of both blocks, and the vanishing mixed block.
    pub fn structure_residuals(&self) -> Vec<Residual> {
        let mut out = Vec::new();
        for (name, b) in [("W+", &self.w_plus), ("W-", &self.w_minus)] {
            for i in 0..3 {
                for j in (i + 1)..3 {
                    out.push(Residual::new(format!("{name}[{i}{j}]-[{j}{i}]"), &b[i][j] - &b[j][i]));
                }
            }
            out.push(Residual::new(format!("tr {name}"), Self::trace(b)));
        }
        for i in 0..3 {
            for j in 0..3 {
                out.push(Residual::new(format!("W(phi{},psi{})", i + 1, j + 1), self.mixed[i][j].clone()));
            }
        }
        out
    }

    pub fn report(&self, zt: &ZeroTest) -> WeylReport {
        let (asd_norm, sd) = norm_of(&self.w_minus, zt);
        let (sd_norm, _) = norm_of(&self.w_plus, zt);
        WeylReport { asd_norm, sd, sd_norm, orientation: self.orientation }
    }
}

/// A 2-form given by its values on frame pairs (a, b), a < b.
pub type FrameTwoForm = [ScalarField; 6];

/// Curvature Ω = dω + ω∧ω of a matrix of 1-forms, evaluated on frame pairs.
pub fn frame_curvature<const N: usize>(
    w: &[[OneForm; N]; N],
    t: &NullTetrad,
    brackets: &FrameBrackets,
) -> [[FrameTwoForm; N]; N] {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            PAIRS.map(|(a, b)| {
                let mut terms = vec![
                    t.frame[a].apply(&w[i][j].0[b]),
                    -t.frame[b].apply(&w[i][j].0[a]),
                    -w[i][j].on(&brackets.c[a][b]),
                ];
                for k in 0..N {
                    terms.push(&w[i][k].0[a] * &w[k][j].0[b]);
                    terms.push(-(&w[i][k].0[b] * &w[k][j].0[a]));
                }
                sum(&terms)
            })
        })
    })
}

/// Value of a frame 2-form on (E_a, E_b) for any a, b.
pub fn two_form_at(f: &FrameTwoForm, a: usize, b: usize) -> ScalarField {
    match pair_index(a, b) {
        None => ScalarField::zero(),
        Some((p, s)) => f[p].scale_int(s),
    }
}

#[derive(Clone, Debug)]
pub struct SpinCurvature {
    pub omega: [[FrameTwoForm; 2]; 2],
    /// i(𝔭₀)Ω⁺ and i(𝔭₁)Ω⁺ evaluated on each frame direction.
    pub interior: Vec<Residual>,
}

/// Ω⁺ of the ω⁺ = [[(a−d)/2, b],[c,(d−a)/2]] part and its vertical interior products.
pub fn spin_curvature_plus(g: &FoliatedGeometry) -> SpinCurvature {
    let plus: Sl2Form = split_spin_parts(&g.components).plus;
    let omega = frame_curvature(&plus, &g.tetrad, &g.brackets);
    let mut interior = Vec::new();
    for v in [2, 3] {
        for i in 0..2 {
            for j in 0..2 {
                for b in 0..4 {
                    if b == v {
                        continue;
                    }
                    interior.push(Residual::new(
                        format!("i({})Omega+[{i}{j}]({})", FRAME_NAMES[v], FRAME_NAMES[b]),
                        two_form_at(&omega[i][j], v, b),
                    ));
                }
            }
        }
    }
    SpinCurvature { omega, interior }
}
