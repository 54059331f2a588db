//! JSON metric specs.
//!
//! ```json
//! {"backend": "special-form", "p": [{"coeff": "-2", "exps": [0, 0, 1, 1]}], "q": [], "r": []}
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{FieldError, Polynomial, ScalarField, TermSpec, DEFAULT_FD_STEP};
use crate::killing::KillingCandidate;
use crate::metric::{MetricError, NeutralMetric, SdTriple, DEFAULT_CHART_MARGIN};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecParseError {
    #[error("malformed spec JSON: {0}")]
    Json(String),
    #[error("field {field}: {source}")]
    Field { field: String, source: FieldError },
    #[error("generic backend needs 16 metric entries, got {0}")]
    EntryCount(usize),
    #[error("chart margin must lie in (0, 1), got {0}")]
    ChartMargin(f64),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "kebab-case")]
pub enum BackendSpec {
    SpecialForm {
        p: Vec<TermSpec>,
        q: Vec<TermSpec>,
        r: Vec<TermSpec>,
    },
    ProductSphere {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        chart_margin: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fd_step: Option<f64>,
    },
    /// Row-major g_ij.
    Generic { g: Vec<Vec<TermSpec>> },
}

/// Null vector field K = K⁰𝔭₀ + K¹𝔭₁ to test for the conformal Killing property.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KillingSpec {
    pub k0: Vec<TermSpec>,
    pub k1: Vec<TermSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(flatten)]
    pub backend: BackendSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub killing: Option<KillingSpec>,
}

fn poly(field: &str, terms: &[TermSpec]) -> Result<Polynomial, SpecParseError> {
    Polynomial::from_specs(terms).map_err(|source| SpecParseError::Field { field: field.to_string(), source })
}

impl MetricSpec {
    pub fn special_form(t: &SdTriple) -> Self {
        Self {
            id: None,
            backend: BackendSpec::SpecialForm { p: t.p.to_specs(), q: t.q.to_specs(), r: t.r.to_specs() },
            killing: None,
        }
    }

    /// Checks every term and the backend-specific shape without building the metric.
    pub fn validate(&self) -> Result<(), SpecParseError> {
        match &self.backend {
            BackendSpec::SpecialForm { p, q, r } => {
                for (name, f) in [("p", p), ("q", q), ("r", r)] {
                    poly(name, f)?;
                }
            }
            BackendSpec::ProductSphere { chart_margin, fd_step } => {
                let m = chart_margin.unwrap_or(DEFAULT_CHART_MARGIN);
                if !(m > 0.0 && m < 1.0) {
                    return Err(SpecParseError::ChartMargin(m));
                }
                let h = fd_step.unwrap_or(DEFAULT_FD_STEP);
                if !(h > 0.0 && h.is_finite()) {
                    return Err(SpecParseError::Field { field: "fd_step".into(), source: FieldError::InvalidStep(h) });
                }
            }
            BackendSpec::Generic { g } => {
                if g.len() != 16 {
                    return Err(SpecParseError::EntryCount(g.len()));
                }
                for (k, e) in g.iter().enumerate() {
                    poly(&format!("g{}{}", k / 4, k % 4), e)?;
                }
            }
        }
        if let Some(k) = &self.killing {
            poly("killing.k0", &k.k0)?;
            poly("killing.k1", &k.k1)?;
        }
        Ok(())
    }

    pub fn build(&self) -> Result<NeutralMetric, SpecParseError> {
        self.validate()?;
        Ok(match &self.backend {
            BackendSpec::SpecialForm { p, q, r } => {
                NeutralMetric::special_form_poly(poly("p", p)?, poly("q", q)?, poly("r", r)?)
            }
            BackendSpec::ProductSphere { chart_margin, fd_step } => NeutralMetric::product_sphere_with(
                chart_margin.unwrap_or(DEFAULT_CHART_MARGIN),
                fd_step.unwrap_or(DEFAULT_FD_STEP),
            )?,
            BackendSpec::Generic { g } => {
                let mut entries = Vec::with_capacity(16);
                for (k, e) in g.iter().enumerate() {
                    entries.push(ScalarField::from(poly(&format!("g{}{}", k / 4, k % 4), e)?));
                }
                let m = std::array::from_fn(|i| std::array::from_fn(|j| entries[4 * i + j].clone()));
                NeutralMetric::generic(m)?
            }
        })
    }

    pub fn killing_candidate(&self) -> Result<Option<KillingCandidate>, SpecParseError> {
        self.killing
            .as_ref()
            .map(|k| {
                Ok(KillingCandidate {
                    k0: poly("killing.k0", &k.k0)?.into(),
                    k1: poly("killing.k1", &k.k1)?.into(),
                })
            })
            .transpose()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// Parses and validates a spec; the metric itself is built by [`MetricSpec::build`].
pub fn parse_metric_spec(s: &str) -> Result<MetricSpec, SpecParseError> {
    let spec: MetricSpec = serde_json::from_str(s).map_err(|e| SpecParseError::Json(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}
