//! Named problems: coefficient field, domain, data and the regularity each one declares.

use crate::bvp::{RightHandSide, WhitneyData};
use crate::error::{Error, Result};
use crate::func::{AnalyticField, FieldJet, Term};
use crate::geometry::{GraphDomain, Psi, Regularity};
use crate::tensor::{builtin_field, FourierEntry, PeriodicCoefficientField};
use serde::{Deserialize, Serialize};

/// How the coefficient field is obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldSpec {
    Builtin {
        name: String,
        #[serde(default)]
        value: Option<f64>,
    },
    /// Inline Fourier coefficients on the unit torus.
    Fourier {
        d: usize,
        entries: Vec<FourierEntry>,
        mu: f64,
        #[serde(default)]
        holder: Option<crate::tensor::HolderModulus>,
        #[serde(default)]
        vmo: Option<String>,
    },
}

/// A coefficient field on a domain with Dirichlet data `G` and right-hand side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    #[serde(default)]
    pub description: String,
    pub field: FieldSpec,
    pub domain: GraphDomain,
    #[serde(default = "default_m")]
    pub m: u32,
    #[serde(default = "default_n")]
    pub n: usize,
    /// Ambient field whose jets give the boundary data.
    pub g: AnalyticField,
    pub rhs: RightHandSide,
}

fn default_m() -> u32 {
    1
}

fn default_n() -> usize {
    1
}

/// Hypotheses a scenario satisfies, read off its field and domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Declarations {
    /// `None` for a `C^1` domain without a Hölder modulus on the gradient.
    pub c1theta: Option<f64>,
    pub c1: bool,
    pub symmetric: bool,
    pub holder: bool,
    pub vmo: bool,
    pub constant: bool,
}

/// A scenario made concrete.
#[derive(Clone, Debug)]
pub struct Problem {
    pub id: String,
    pub field: PeriodicCoefficientField,
    pub domain: GraphDomain,
    pub data: WhitneyData,
    pub rhs: RightHandSide,
}

impl Problem {
    pub fn m(&self) -> u32 {
        self.field.m()
    }

    pub fn d(&self) -> usize {
        self.field.d()
    }
}

impl Scenario {
    pub fn d(&self) -> usize {
        self.domain.d
    }

    pub fn build_field(&self) -> Result<PeriodicCoefficientField> {
        match &self.field {
            FieldSpec::Builtin { name, value } => builtin_field(name, Some(self.d()), self.n, self.m, *value),
            FieldSpec::Fourier { d, entries, mu, holder, vmo } => {
                if *d != self.d() {
                    return Err(Error::ConfigInvalid(format!("field is {d}-dimensional, the domain {}", self.d())));
                }
                let f = PeriodicCoefficientField::fourier(&self.id, *d, self.n, self.m, entries, *mu)?
                    .with_holder(*holder)
                    .with_vmo(vmo.clone().map(|description| crate::tensor::VmoModulus { description }));
                Ok(f)
            }
        }
    }

    pub fn problem(&self) -> Result<Problem> {
        let field = self.build_field()?;
        if self.g.d != self.d() || self.g.n() != self.n {
            return Err(Error::ConfigInvalid(format!("boundary data of {} must be a {}-vector field in d = {}", self.id, self.n, self.d())));
        }
        if self.rhs.terms.iter().any(|(a, f)| f.d != self.d() || f.n() != self.n || a.order() > self.m) {
            return Err(Error::ConfigInvalid(format!("right-hand side of {} does not match (d, n, m)", self.id)));
        }
        Ok(Problem {
            id: self.id.clone(),
            field,
            domain: self.domain.clone(),
            data: WhitneyData::new(self.g.clone()),
            rhs: self.rhs.clone(),
        })
    }

    pub fn declarations(&self) -> Result<Declarations> {
        let field = self.build_field()?;
        let (c1, c1theta) = match &self.domain.regularity {
            Some(Regularity::C1Theta { theta, .. }) => (true, Some(*theta)),
            Some(Regularity::C1 { .. }) => (true, None),
            None => (self.domain.is_flat(), if self.domain.is_flat() { Some(1.0) } else { None }),
        };
        Ok(Declarations {
            c1theta,
            c1,
            symmetric: field.is_symmetric(),
            holder: field.holder().is_some() || field.is_constant(),
            vmo: field.vmo().is_some() || field.is_constant(),
            constant: field.is_constant(),
        })
    }

    /// Same scenario with the order of the operator changed, for the `m = 2` variants.
    pub fn with_order(mut self, m: u32) -> Self {
        self.m = m;
        self
    }
}

fn unit_source(d: usize) -> RightHandSide {
    RightHandSide::source(AnalyticField::constant(d, &[1.0]), 4.0)
}

fn flat_box() -> GraphDomain {
    GraphDomain::graph(0.5, Psi::Flat, Some(Regularity::C1Theta { theta: 1.0, m1: 0.0 })).expect("flat box")
}

fn builtin(id: &str, description: &str, field: &str, domain: GraphDomain, g: AnalyticField, rhs: RightHandSide) -> Scenario {
    Scenario {
        id: id.into(),
        description: description.into(),
        field: FieldSpec::Builtin { name: field.into(), value: None },
        domain,
        m: 1,
        n: 1,
        g,
        rhs,
    }
}

/// The registry shipped with the library.
pub fn builtin_scenarios() -> Vec<Scenario> {
    let zero1 = AnalyticField::zero(1, 1);
    let zero2 = AnalyticField::zero(2, 1);
    // x_2 (1 + x_1): vanishes on the flat bottom, so solutions with zero source are homogeneous there.
    let bottom_zero = AnalyticField::scalar(2, vec![Term::monomial(1.0, &[0, 1]), Term::monomial(1.0, &[1, 1])]);
    let smooth_g = AnalyticField::scalar(2, vec![Term::monomial(0.5, &[1, 0]), Term::monomial(1.0, &[0, 2]), Term::sine(0.25, 2, 0, 3.0)]);
    let c1theta = GraphDomain::graph(
        0.5,
        Psi::PowerBump { coeff: 0.3, exponent: 1.5 },
        Some(Regularity::C1Theta { theta: 0.5, m1: 1.0 }),
    )
    .expect("bump domain");
    let sine = GraphDomain::graph(
        0.5,
        Psi::Sine { amp: 0.05, freq: 2.0 * std::f64::consts::PI },
        Some(Regularity::C1 { lipschitz: 0.33, modulus: "smooth".into() }),
    )
    .expect("sine domain");
    vec![
        builtin("constant", "constant A = 1.5 on (0, 1), f = 1, zero data", "constant", GraphDomain::interval(1.0), zero1.clone(), unit_source(1)),
        builtin("sin1d", "a(y) = 2 + sin(2 pi y) on (0, 1), f = 1, zero data", "sin1d", GraphDomain::interval(1.0), zero1, unit_source(1)),
        builtin("laminate2d", "laminate a(y_1) on the flat box D(1/2), f = 1, zero data", "laminate2d", flat_box(), zero2.clone(), unit_source(2)),
        builtin(
            "laminate2d-homogeneous",
            "laminate on D(1/2), f = 0, G = x_2 (1 + x_1) vanishing on the bottom",
            "laminate2d",
            flat_box(),
            bottom_zero,
            RightHandSide::zero(),
        ),
        builtin("checker-smooth", "mollified checkerboard {1, 4} on D(1/2), f = 1, zero data", "checker-smooth", flat_box(), zero2.clone(), unit_source(2)),
        builtin("c1theta-bump", "laminate on the C^{1,1/2} domain psi = 0.3 |x|^{3/2}, f = 1, smooth G", "laminate2d", c1theta, smooth_g, unit_source(2)),
        builtin("sine-graph", "laminate on a C^1 sine graph domain, f = 1, zero data", "laminate2d", sine, zero2.clone(), unit_source(2)),
        builtin("skew-laminate2d", "non-symmetric laminate on D(1/2), f = 1, zero data", "skew-laminate2d", flat_box(), zero2, unit_source(2)),
    ]
}

pub fn find_builtin(id: &str) -> Option<Scenario> {
    builtin_scenarios().into_iter().find(|s| s.id == id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_builds_every_problem() {
        let all = builtin_scenarios();
        for id in ["constant", "sin1d", "laminate2d", "checker-smooth", "c1theta-bump"] {
            assert!(all.iter().any(|s| s.id == id), "{id}");
        }
        for s in &all {
            let p = s.problem().unwrap();
            assert_eq!(p.d(), s.d());
            s.declarations().unwrap();
        }
        let bump = find_builtin("c1theta-bump").unwrap().declarations().unwrap();
        assert_eq!(bump.c1theta, Some(0.5));
        assert!(bump.holder);
        let sine = find_builtin("sine-graph").unwrap().declarations().unwrap();
        assert!(sine.c1 && sine.c1theta.is_none());
        assert!(!find_builtin("skew-laminate2d").unwrap().declarations().unwrap().symmetric);
    }

    #[test]
    fn scenarios_roundtrip_through_json() {
        for s in builtin_scenarios() {
            let text = serde_json::to_string(&s).unwrap();
            let back: Scenario = serde_json::from_str(&text).unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn second_order_variant_of_sin1d() {
        let s = find_builtin("sin1d").unwrap().with_order(2);
        assert_eq!(s.problem().unwrap().m(), 2);
    }
}
