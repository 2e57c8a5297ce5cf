use homlab_core::error::{Error, Result};
use homlab_core::func::AnalyticField;
use homlab_core::geometry::{GraphDomain, Regularity};
use homlab_core::scenario::Scenario;
use homlab_core::tensor::multiindices_up_to;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const SCHEMA: &str = include_str!("../config.schema.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Monitor {
    Cell,
    Rates,
    Excess,
    HolderEnvelope,
    LipschitzEnvelope,
    ReverseHolder,
    Wmp,
    Caccioppoli,
    Smoothing,
}

impl Monitor {
    pub const ALL: [Monitor; 9] = [
        Monitor::Cell,
        Monitor::Rates,
        Monitor::Excess,
        Monitor::HolderEnvelope,
        Monitor::LipschitzEnvelope,
        Monitor::ReverseHolder,
        Monitor::Wmp,
        Monitor::Caccioppoli,
        Monitor::Smoothing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Monitor::Cell => "cell",
            Monitor::Rates => "rates",
            Monitor::Excess => "excess",
            Monitor::HolderEnvelope => "holder-envelope",
            Monitor::LipschitzEnvelope => "lipschitz-envelope",
            Monitor::ReverseHolder => "reverse-holder",
            Monitor::Wmp => "wmp",
            Monitor::Caccioppoli => "caccioppoli",
            Monitor::Smoothing => "smoothing",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Monitor::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown monitor {s:?}")))
    }
}

fn default_kappa() -> f64 {
    16.0
}
fn default_lambda() -> f64 {
    0.5
}
fn default_exponent() -> f64 {
    4.0
}
fn default_sigma() -> f64 {
    0.5
}
fn default_seed() -> u64 {
    7
}
fn default_samples() -> usize {
    10
}
fn default_true() -> bool {
    true
}
fn default_budget() -> usize {
    4_000_000
}
fn default_fraction() -> f64 {
    0.1
}

/// Everything a run needs; `out` and `workers` do not enter the reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    /// Overrides the order of the scenario.
    #[serde(default)]
    pub m: Option<u32>,
    /// Expected dimensions, checked against the scenario.
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub n: Option<usize>,
    pub eps: Vec<f64>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    pub monitors: Vec<Monitor>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_exponent")]
    pub p: f64,
    #[serde(default = "default_exponent")]
    pub q: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Radii of the envelope rows; defaults to dyadic radii from `R` down to the largest `eps`.
    #[serde(default)]
    pub r_grid: Option<Vec<f64>>,
    /// Boundary point for the ball monitors.
    #[serde(default)]
    pub center: Option<[f64; 2]>,
    /// Ball radius `r` of the ball monitors (the outer ball has radius `2r`).
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub full_scale: bool,
    /// Random inputs per scale for the smoothing monitor.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_fraction")]
    pub indicator_fraction: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub cache: bool,
}

impl RunConfig {
    pub fn new(scenario: &str, eps: Vec<f64>, monitors: Vec<Monitor>) -> Self {
        Self {
            scenario: scenario.into(),
            m: None,
            d: None,
            n: None,
            eps,
            kappa: default_kappa(),
            monitors,
            lambda: default_lambda(),
            p: default_exponent(),
            q: default_exponent(),
            sigma: default_sigma(),
            r_grid: None,
            center: None,
            radius: None,
            full_scale: false,
            samples: default_samples(),
            indicator_fraction: default_fraction(),
            seed: default_seed(),
            budget: default_budget(),
            workers: None,
            out: None,
            cache: true,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(format!("config does not parse: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::ConfigInvalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The fields that determine report contents.
    pub fn reported(&self) -> Self {
        Self { out: None, workers: None, cache: true, ..self.clone() }
    }

    pub fn radii(&self, domain: &GraphDomain) -> Vec<f64> {
        if let Some(g) = &self.r_grid {
            return g.clone();
        }
        let top = self.eps.iter().cloned().fold(0.0, f64::max);
        homlab_core::monitors::dyadic_scales(top, domain.r)
    }

    pub fn center_point(&self) -> [f64; 2] {
        self.center.unwrap_or([0.0, 0.0])
    }

    pub fn ball_radius(&self, domain: &GraphDomain) -> f64 {
        self.radius.unwrap_or(0.4 * domain.r)
    }

    /// Scenario with the order override applied.
    pub fn resolve(&self, scenario: &Scenario) -> Scenario {
        match self.m {
            Some(m) => scenario.clone().with_order(m),
            None => scenario.clone(),
        }
    }

    /// Checks every precondition of the selected monitors; all violations are reported together.
    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        let mut bad: Vec<String> = Vec::new();
        let s = self.resolve(scenario);
        let domain = &s.domain;
        let (d, m) = (s.d(), s.m);
        if self.monitors.is_empty() {
            bad.push("no monitor selected".into());
        }
        if self.eps.is_empty() || self.eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            bad.push("eps values must lie in (0, 1) and the list must be non-empty".into());
        }
        if !(self.kappa >= 1.0) {
            bad.push(format!("kappa = {} must be at least 1 (mesh size h = eps / kappa)", self.kappa));
        }
        if let Some(w) = self.workers {
            if w == 0 {
                bad.push("workers must be positive".into());
            }
        }
        if !(m == 1 || m == 2) {
            bad.push(format!("m = {m}: only orders 1 and 2 are supported"));
        }
        if let Some(want) = self.d {
            if want != d {
                bad.push(format!("d = {want} but scenario {} is {d}-dimensional", s.id));
            }
        }
        if let Some(want) = self.n {
            if want != s.n {
                bad.push(format!("n = {want} but scenario {} has n = {}", s.id, s.n));
            }
        }
        let decl = match s.problem().and_then(|_| s.declarations()) {
            Ok(decl) => Some(decl),
            Err(e) => {
                bad.push(format!("scenario {}: {e}", s.id));
                None
            }
        };
        let theta = domain.regularity.as_ref().and_then(Regularity::theta);
        let (df, mf) = (d as f64, f64::from(m));
        let p_floor = (df / (mf + 1.0)).max(2.0 * df / (df + 2.0 * mf - 2.0)).max(1.0);
        let max_eps = self.eps.iter().cloned().fold(0.0, f64::max);
        for monitor in &self.monitors {
            let name = monitor.name();
            match monitor {
                Monitor::Cell => {}
                Monitor::Rates => {
                    if self.eps.len() < 3 {
                        bad.push(format!("{name}: a slope fit needs at least 3 eps values"));
                    }
                    if !(self.indicator_fraction > 0.0) {
                        bad.push(format!("{name}: indicator_fraction must be positive"));
                    }
                }
                Monitor::Excess => {
                    if !(self.lambda > 0.0 && self.lambda < 1.0) {
                        bad.push(format!("{name}: lambda = {} outside the excess range 0 < lambda < 1", self.lambda));
                    }
                    if !(self.p > p_floor) {
                        bad.push(format!("{name}: p = {} must exceed max{{d/(m+1), 2d/(d+2m-2), 1}} = {p_floor}", self.p));
                    }
                    if !(self.q > df && self.q >= 2.0) {
                        bad.push(format!("{name}: q = {} must satisfy q > d = {d} and q >= 2", self.q));
                    }
                    match theta {
                        Some(t) if self.sigma > 0.0 && self.sigma <= t => {}
                        Some(t) => bad.push(format!("{name}: sigma = {} must lie in (0, theta] = (0, {t}]", self.sigma)),
                        None => bad.push(format!("{name}: the H functional needs a C^(1,theta) domain")),
                    }
                    if self.full_scale && !decl.as_ref().is_some_and(|x| x.holder) {
                        bad.push(format!("{name}: full-scale mode needs Hölder-continuous coefficients"));
                    }
                }
                Monitor::HolderEnvelope => {
                    let cap = (mf + 1.0 - df / self.p).min(1.0);
                    if !(self.lambda > 0.0 && self.lambda < cap) {
                        bad.push(format!(
                            "{name}: lambda = {} outside the Hölder envelope range 0 < lambda < min{{m+1-d/p, 1}} = {cap}",
                            self.lambda
                        ));
                    }
                    if !decl.as_ref().is_some_and(|x| x.c1) {
                        bad.push(format!("{name}: the domain must be C^1"));
                    }
                    self.check_radii(name, domain, max_eps, &mut bad);
                }
                Monitor::LipschitzEnvelope => {
                    match theta {
                        Some(t) if self.sigma > 0.0 && self.sigma <= t => {}
                        Some(t) => bad.push(format!("{name}: sigma = {} must lie in (0, theta] = (0, {t}]", self.sigma)),
                        None => bad.push(format!("{name}: the domain must carry C^(1,theta) metadata")),
                    }
                    if !(self.q > df && self.q >= 2.0) {
                        bad.push(format!("{name}: q = {} must satisfy q > d = {d} and q >= 2", self.q));
                    }
                    if self.full_scale && !decl.as_ref().is_some_and(|x| x.holder) {
                        bad.push(format!("{name}: full-scale mode needs Hölder-continuous coefficients"));
                    }
                    self.check_radii(name, domain, max_eps, &mut bad);
                }
                Monitor::ReverseHolder => {
                    if self.p < 2.0 {
                        bad.push(format!("{name}: p = {} must be at least 2", self.p));
                    }
                    if !s.rhs.is_zero() {
                        bad.push(format!("{name}: the scenario has a nonzero right-hand side"));
                    }
                    self.check_ball(name, domain, &s.g, m, &mut bad);
                }
                Monitor::Wmp => {
                    if self.p < 2.0 {
                        bad.push(format!("{name}: p = {} must be at least 2", self.p));
                    }
                    if !decl.as_ref().is_some_and(|x| x.vmo) {
                        bad.push(format!("{name}: coefficients must carry VMO metadata"));
                    }
                    if !decl.as_ref().is_some_and(|x| x.c1) {
                        bad.push(format!("{name}: the domain must be C^1"));
                    }
                }
                Monitor::Caccioppoli => {
                    let r = self.ball_radius(domain);
                    if !(r > 0.0 && 2.0 * r <= domain.r) {
                        bad.push(format!("{name}: radius = {r} must lie in (0, R/2] with R = {}", domain.r));
                    }
                    self.check_center(name, domain, &mut bad);
                }
                Monitor::Smoothing => {
                    if self.samples == 0 {
                        bad.push(format!("{name}: samples must be positive"));
                    }
                    if self.eps.iter().any(|e| *e > 0.25) {
                        bad.push(format!("{name}: eps must be at most 1/4"));
                    }
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(bad.join("; ")))
        }
    }

    fn check_radii(&self, name: &str, domain: &GraphDomain, max_eps: f64, bad: &mut Vec<String>) {
        let grid = self.radii(domain);
        if grid.is_empty() {
            bad.push(format!("{name}: no radius between eps and R = {}", domain.r));
        }
        if grid.iter().any(|r| *r < max_eps * (1.0 - 1e-12) || *r > domain.r * (1.0 + 1e-12)) {
            bad.push(format!("{name}: radii must lie in [max eps, R] = [{max_eps}, {}]", domain.r));
        }
    }

    fn check_center(&self, name: &str, domain: &GraphDomain, bad: &mut Vec<String>) {
        let c = self.center_point();
        if domain.nearest_boundary_point(&c[..domain.d]).0 > 1e-12 {
            bad.push(format!("{name}: center {c:?} is not a boundary point"));
        }
    }

    fn check_ball(&self, name: &str, domain: &GraphDomain, g: &AnalyticField, m: u32, bad: &mut Vec<String>) {
        self.check_center(name, domain, bad);
        let c = self.center_point();
        let r2 = 2.0 * self.ball_radius(domain);
        let idx = multiindices_up_to(domain.d, m - 1);
        let near = boundary_samples(domain, 256).into_iter().filter(|x| (0..domain.d).map(|k| (x[k] - c[k]).powi(2)).sum::<f64>() < r2 * r2);
        for x in near {
            if idx.iter().any(|a| g.derivative(a, &x[..domain.d]).iter().any(|v| v.abs() > 1e-12)) {
                bad.push(format!("{name}: boundary data do not vanish on the double ball (radius {r2}) at {x:?}"));
                return;
            }
        }
    }
}

/// Points on the boundary of the domain, `k` per side.
fn boundary_samples(domain: &GraphDomain, k: usize) -> Vec<[f64; 2]> {
    let r = domain.r;
    if domain.d == 1 {
        return vec![[0.0, 0.0], [r, 0.0]];
    }
    let mut out = Vec::new();
    for i in 0..=k {
        let s = -r + 2.0 * r * i as f64 / k as f64;
        let t = r * i as f64 / k as f64;
        let p = domain.psi.value(s);
        out.push([s, p]);
        out.push([s, p + r]);
        out.push([-r, domain.psi.value(-r) + t]);
        out.push([r, domain.psi.value(r) + t]);
    }
    out
}

/// Configurations shipped with the binary.
pub fn builtin_configs() -> Vec<(&'static str, RunConfig)> {
    let dyadic = |a: i32, b: i32| (a..=b).map(|k| 2f64.powi(-k)).collect::<Vec<f64>>();
    let mut sin1d_rates = RunConfig::new("sin1d", dyadic(3, 6), vec![Monitor::Cell, Monitor::Rates]);
    sin1d_rates.kappa = 64.0;
    let laminate_rates = RunConfig::new("laminate2d", dyadic(3, 5), vec![Monitor::Cell, Monitor::Rates]);
    let mut sin1d_holder = RunConfig::new("sin1d", dyadic(5, 6), vec![Monitor::HolderEnvelope]);
    sin1d_holder.r_grid = Some(dyadic(1, 5));
    let mut lipschitz = RunConfig::new("c1theta-bump", dyadic(3, 4), vec![Monitor::LipschitzEnvelope]);
    lipschitz.kappa = 8.0;
    lipschitz.full_scale = true;
    let mut reverse = RunConfig::new("laminate2d-homogeneous", dyadic(3, 5), vec![Monitor::ReverseHolder, Monitor::Wmp]);
    reverse.kappa = 8.0;
    let mut excess = RunConfig::new("sin1d", dyadic(4, 5), vec![Monitor::Excess, Monitor::Caccioppoli]);
    excess.radius = Some(0.25);
    let constant = RunConfig::new("constant", dyadic(3, 5), vec![Monitor::Cell, Monitor::Rates, Monitor::Excess]);
    let mut smoothing = RunConfig::new("sin1d", dyadic(3, 5), vec![Monitor::Smoothing]);
    smoothing.samples = 10;
    vec![
        ("sin1d-rates", sin1d_rates),
        ("laminate2d-rates", laminate_rates),
        ("sin1d-holder", sin1d_holder),
        ("c1theta-lipschitz", lipschitz),
        ("laminate2d-reverse-holder", reverse),
        ("sin1d-excess", excess),
        ("constant-trivial", constant),
        ("sin1d-smoothing", smoothing),
    ]
}

pub fn find_config(name: &str) -> Option<RunConfig> {
    builtin_configs().into_iter().find(|(n, _)| *n == name).map(|(_, c)| c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use homlab_core::scenario::find_builtin;

    #[test]
    fn builtin_configs_validate() {
        for (name, cfg) in builtin_configs() {
            let s = find_builtin(&cfg.scenario).unwrap();
            cfg.validate(&s).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn lambda_outside_the_holder_range_is_named() {
        let mut cfg = find_config("sin1d-holder").unwrap();
        cfg.lambda = 1.5;
        let err = cfg.validate(&find_builtin("sin1d").unwrap()).unwrap_err().to_string();
        assert!(err.contains("lambda = 1.5 outside the Hölder envelope range"), "{err}");
    }

    #[test]
    fn lipschitz_needs_c1theta() {
        let cfg = RunConfig::new("sine-graph", vec![0.125], vec![Monitor::LipschitzEnvelope]);
        let err = cfg.validate(&find_builtin("sine-graph").unwrap()).unwrap_err().to_string();
        assert!(err.contains("C^(1,theta)"), "{err}");
    }

    #[test]
    fn reverse_holder_needs_homogeneous_data() {
        let cfg = RunConfig::new("laminate2d", vec![0.125], vec![Monitor::ReverseHolder]);
        let err = cfg.validate(&find_builtin("laminate2d").unwrap()).unwrap_err().to_string();
        assert!(err.contains("nonzero right-hand side"), "{err}");
        let mut cfg = RunConfig::new("laminate2d-homogeneous", vec![0.125], vec![Monitor::ReverseHolder]);
        cfg.radius = Some(0.3);
        let err = cfg.validate(&find_builtin("laminate2d-homogeneous").unwrap()).unwrap_err().to_string();
        assert!(err.contains("do not vanish"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(RunConfig::from_json(r#"{"scenario": "sin1d", "eps": [0.1], "monitors": ["cell"], "lamda": 0.5}"#).is_err());
        let cfg = RunConfig::from_json(r#"{"scenario": "sin1d", "eps": [0.1], "monitors": ["cell", "holder-envelope"]}"#).unwrap();
        assert_eq!(cfg.kappa, 16.0);
        assert_eq!(cfg.monitors, vec![Monitor::Cell, Monitor::HolderEnvelope]);
    }
}
