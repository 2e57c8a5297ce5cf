use super::coeff::CoefficientTensor;
use super::multiindex::{enumerate_multiindices, MultiIndex};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;

pub const DEFAULT_RESOLUTION: usize = 64;
pub const DEFAULT_PROBE_SEED: u64 = 0x5eed_e11c;

/// Physical width of the Gaussian used to pre-mollify piecewise-constant
/// fields: four cells of the default 64-point cell grid.
pub const CHECKER_MOLLIFICATION_WIDTH: f64 = 4.0 / 64.0;

/// One Fourier mode `cos * cos(2 pi k.y) + sin * sin(2 pi k.y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigMode {
    pub k: Vec<i32>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// A real trigonometric polynomial on the unit torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigSeries {
    #[serde(default)]
    pub mean: f64,
    #[serde(default)]
    pub modes: Vec<TrigMode>,
}

impl TrigSeries {
    pub fn constant(c: f64) -> Self {
        Self { mean: c, modes: Vec::new() }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let mut s = self.mean;
        for m in &self.modes {
            let phase: f64 = 2.0 * PI * m.k.iter().zip(y).map(|(&k, &x)| f64::from(k) * x).sum::<f64>();
            if m.cos != 0.0 {
                s += m.cos * phase.cos();
            }
            if m.sin != 0.0 {
                s += m.sin * phase.sin();
            }
        }
        s
    }

    /// Gradient with respect to `y`.
    pub fn grad(&self, y: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; y.len()];
        for m in &self.modes {
            let phase: f64 = 2.0 * PI * m.k.iter().zip(y).map(|(&k, &x)| f64::from(k) * x).sum::<f64>();
            let dphase = -m.cos * phase.sin() + m.sin * phase.cos();
            for (gk, &k) in g.iter_mut().zip(&m.k) {
                *gk += 2.0 * PI * f64::from(k) * dphase;
            }
        }
        g
    }

    pub fn max_frequency(&self) -> i32 {
        self.modes
            .iter()
            .flat_map(|m| m.k.iter().map(|k| k.abs()))
            .max()
            .unwrap_or(0)
    }
}

/// `mid + amp * s(y_1) s(y_2)` where `s` is a square wave mollified by a Gaussian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothedChecker {
    pub low: f64,
    pub high: f64,
    pub width: f64,
    /// Odd-harmonic sine coefficients of the mollified square wave.
    harmonics: Vec<(i32, f64)>,
}

impl SmoothedChecker {
    pub fn new(low: f64, high: f64, width: f64) -> Self {
        let mut harmonics = Vec::new();
        let mut k = 1;
        loop {
            let damp = (-2.0 * PI * PI * width * width * f64::from(k * k)).exp();
            let c = 4.0 / (PI * f64::from(k)) * damp;
            if c < 1e-18 || k > 4001 {
                break;
            }
            harmonics.push((k, c));
            k += 2;
        }
        Self { low, high, width, harmonics }
    }

    fn wave(&self, t: f64) -> (f64, f64) {
        let mut v = 0.0;
        let mut dv = 0.0;
        for &(k, c) in &self.harmonics {
            let ph = 2.0 * PI * f64::from(k) * t;
            v += c * ph.sin();
            dv += c * 2.0 * PI * f64::from(k) * ph.cos();
        }
        (v, dv)
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let mid = 0.5 * (self.low + self.high);
        let amp = 0.5 * (self.high - self.low);
        let p: f64 = y.iter().map(|&t| self.wave(t).0).product();
        mid + amp * p
    }

    pub fn grad(&self, y: &[f64]) -> Vec<f64> {
        let amp = 0.5 * (self.high - self.low);
        let waves: Vec<(f64, f64)> = y.iter().map(|&t| self.wave(t)).collect();
        (0..y.len())
            .map(|k| {
                amp * waves
                    .iter()
                    .enumerate()
                    .map(|(l, w)| if l == k { w.1 } else { w.0 })
                    .product::<f64>()
            })
            .collect()
    }

    pub fn max_frequency(&self) -> i32 {
        self.harmonics.last().map(|h| h.0).unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ScalarProfile {
    Trig(TrigSeries),
    SmoothedChecker(SmoothedChecker),
}

impl ScalarProfile {
    fn eval(&self, y: &[f64]) -> f64 {
        match self {
            ScalarProfile::Trig(t) => t.eval(y),
            ScalarProfile::SmoothedChecker(c) => c.eval(y),
        }
    }

    fn grad(&self, y: &[f64]) -> Vec<f64> {
        match self {
            ScalarProfile::Trig(t) => t.grad(y),
            ScalarProfile::SmoothedChecker(c) => c.grad(y),
        }
    }

    fn max_frequency(&self) -> i32 {
        match self {
            ScalarProfile::Trig(t) => t.max_frequency(),
            ScalarProfile::SmoothedChecker(c) => c.max_frequency(),
        }
    }
}

/// One tensor slot `(alpha, beta, i, j)` carrying a trigonometric polynomial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierEntry {
    pub alpha: MultiIndex,
    pub beta: MultiIndex,
    #[serde(default)]
    pub i: usize,
    #[serde(default)]
    pub j: usize,
    #[serde(flatten)]
    pub series: TrigSeries,
}

#[derive(Clone, Debug, PartialEq)]
enum Profile {
    Constant(CoefficientTensor),
    /// `a(y) delta_{ab} delta_{ij}`.
    Isotropic(ScalarProfile),
    /// Slot offsets into the tensor with their series; unlisted slots vanish.
    Fourier(Vec<(usize, TrigSeries)>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderModulus {
    pub lambda0: f64,
    pub tau0: f64,
}

/// Declared bookkeeping only; never estimated from samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmoModulus {
    pub description: String,
}

/// `y -> A(y)` on the unit torus together with its hypothesis metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicCoefficientField {
    id: String,
    d: usize,
    n: usize,
    m: u32,
    mu: f64,
    resolution: usize,
    profile: Profile,
    transposed: bool,
    symmetric: bool,
    holder: Option<HolderModulus>,
    vmo: Option<VmoModulus>,
    mollification_width: Option<f64>,
}

/// Result of the sampled ellipticity check.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EllipticityReport {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub mu: f64,
    pub grid_points: usize,
    pub probes: usize,
    pub seed: u64,
    /// Always true: finitely many probes only spot-check the quantifier over all symbols.
    pub spot_checked: bool,
}

impl PeriodicCoefficientField {
    pub fn constant(id: &str, tensor: CoefficientTensor, mu: f64) -> Self {
        let (d, n, m) = tensor.dims();
        let symmetric = tensor.is_symmetric(0.0);
        Self {
            id: id.to_string(),
            d,
            n,
            m,
            mu,
            resolution: DEFAULT_RESOLUTION,
            profile: Profile::Constant(tensor),
            transposed: false,
            symmetric,
            holder: Some(HolderModulus { lambda0: 0.0, tau0: 0.5 }),
            vmo: Some(VmoModulus { description: "constant".into() }),
            mollification_width: None,
        }
    }

    pub fn isotropic(id: &str, d: usize, n: usize, m: u32, profile: ScalarProfile, mu: f64) -> Self {
        Self {
            id: id.to_string(),
            d,
            n,
            m,
            mu,
            resolution: DEFAULT_RESOLUTION,
            profile: Profile::Isotropic(profile),
            transposed: false,
            symmetric: true,
            holder: None,
            vmo: None,
            mollification_width: None,
        }
    }

    pub fn fourier(id: &str, d: usize, n: usize, m: u32, entries: &[FourierEntry], mu: f64) -> Result<Self> {
        let template = CoefficientTensor::zeros(d, n, m);
        let idx = enumerate_multiindices(d, m);
        let mut slots = Vec::with_capacity(entries.len());
        for e in entries {
            let a = idx.iter().position(|x| *x == e.alpha).ok_or_else(|| {
                Error::InvalidInput(format!("alpha {} is not an order-{m} index in dimension {d}", e.alpha))
            })?;
            let b = idx.iter().position(|x| *x == e.beta).ok_or_else(|| {
                Error::InvalidInput(format!("beta {} is not an order-{m} index in dimension {d}", e.beta))
            })?;
            if e.i >= n || e.j >= n {
                return Err(Error::InvalidInput(format!("component ({}, {}) out of range for n = {n}", e.i, e.j)));
            }
            if e.series.modes.iter().any(|md| md.k.len() != d) {
                return Err(Error::InvalidInput("Fourier wave vector has the wrong dimension".into()));
            }
            slots.push((template.offset(a, b, e.i, e.j), e.series.clone()));
        }
        let mut field = Self {
            id: id.to_string(),
            d,
            n,
            m,
            mu,
            resolution: DEFAULT_RESOLUTION,
            profile: Profile::Fourier(slots),
            transposed: false,
            symmetric: false,
            holder: None,
            vmo: None,
            mollification_width: None,
        };
        field.symmetric = field.detect_symmetry();
        Ok(field)
    }

    fn detect_symmetry(&self) -> bool {
        let n: usize = 7;
        let mut t = CoefficientTensor::zeros(self.d, self.n, self.m);
        for s in 0..n.pow(self.d as u32) {
            let y: Vec<f64> = (0..self.d)
                .map(|k| ((s / n.pow(k as u32)) % n) as f64 / n as f64 + 0.013 * (k + 1) as f64)
                .collect();
            self.eval_into(&y, &mut t);
            if !t.is_symmetric(1e-14) {
                return false;
            }
        }
        true
    }

    pub fn with_resolution(mut self, resolution: usize) -> Self {
        self.resolution = resolution;
        self
    }

    pub fn with_holder(mut self, holder: Option<HolderModulus>) -> Self {
        self.holder = holder;
        self
    }

    pub fn with_vmo(mut self, vmo: Option<VmoModulus>) -> Self {
        self.vmo = vmo;
        self
    }

    pub fn with_mollification_width(mut self, w: Option<f64>) -> Self {
        self.mollification_width = w;
        self
    }

    pub fn with_id(mut self, id: &str) -> Self {
        self.id = id.to_string();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dims(&self) -> (usize, usize, u32) {
        (self.d, self.n, self.m)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn is_transposed(&self) -> bool {
        self.transposed
    }

    pub fn holder(&self) -> Option<HolderModulus> {
        self.holder
    }

    pub fn vmo(&self) -> Option<&VmoModulus> {
        self.vmo.as_ref()
    }

    pub fn mollification_width(&self) -> Option<f64> {
        self.mollification_width
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.profile, Profile::Constant(_))
    }

    /// Highest wave number present in the profile (0 for constant fields).
    pub fn max_frequency(&self) -> i32 {
        match &self.profile {
            Profile::Constant(_) => 0,
            Profile::Isotropic(p) => p.max_frequency(),
            Profile::Fourier(slots) => slots.iter().map(|(_, s)| s.max_frequency()).max().unwrap_or(0),
        }
    }

    /// The adjoint field `A*^{ab}_{ij}(y) = A^{ba}_{ji}(y)`.
    pub fn adjoint(&self) -> Self {
        let mut f = self.clone();
        f.transposed = !self.transposed;
        f.id = if self.transposed {
            self.id.trim_end_matches("*").to_string()
        } else {
            format!("{}*", self.id)
        };
        f
    }

    /// `A(y)` written into `out`, which must have this field's dimensions.
    pub fn eval_into(&self, y: &[f64], out: &mut CoefficientTensor) {
        match &self.profile {
            Profile::Constant(t) => out.entries_mut().copy_from_slice(t.entries()),
            Profile::Isotropic(p) => {
                let a = p.eval(y);
                out.entries_mut().fill(0.0);
                for s in 0..out.index_count() {
                    for i in 0..self.n {
                        out.set_at(s, s, i, i, a);
                    }
                }
            }
            Profile::Fourier(slots) => {
                out.entries_mut().fill(0.0);
                for (o, series) in slots {
                    out.entries_mut()[*o] += series.eval(y);
                }
            }
        }
        if self.transposed {
            let t = out.transpose();
            *out = t;
        }
    }

    pub fn eval(&self, y: &[f64]) -> CoefficientTensor {
        let mut t = CoefficientTensor::zeros(self.d, self.n, self.m);
        self.eval_into(y, &mut t);
        t
    }

    /// Euclidean norm of the entrywise gradient, used to size declared Hölder constants.
    pub fn grad_norm(&self, y: &[f64]) -> f64 {
        match &self.profile {
            Profile::Constant(_) => 0.0,
            Profile::Isotropic(p) => p.grad(y).iter().map(|g| g * g).sum::<f64>().sqrt(),
            Profile::Fourier(slots) => slots
                .iter()
                .map(|(_, s)| s.grad(y).iter().map(|g| g * g).sum::<f64>())
                .sum::<f64>()
                .sqrt(),
        }
    }

    pub fn sample(&self, resolution: usize) -> SampledField {
        let d = self.d;
        let points = resolution.pow(d as u32);
        let template = CoefficientTensor::zeros(self.d, self.n, self.m);
        let slots = template.entries().len();
        let mut values = vec![vec![0.0; points]; slots];
        let mut t = template.clone();
        let mut y = vec![0.0; d];
        for p in 0..points {
            grid_point(p, resolution, d, &mut y);
            self.eval_into(&y, &mut t);
            for (s, v) in t.entries().iter().enumerate() {
                values[s][p] = *v;
            }
        }
        SampledField { d, n: self.n, m: self.m, resolution, values }
    }

    /// Content hash of the field samples at `resolution`.
    pub fn fingerprint(&self, resolution: usize) -> String {
        let s = self.sample(resolution);
        let mut h = Sha256::new();
        h.update(self.id.as_bytes());
        h.update([self.d as u8, self.n as u8, self.m as u8]);
        h.update((resolution as u64).to_le_bytes());
        for slot in &s.values {
            for v in slot {
                h.update(v.to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn check_ellipticity(&self, probes: usize) -> Result<EllipticityReport> {
        self.check_ellipticity_seeded(probes, DEFAULT_PROBE_SEED)
    }

    /// Sampled check of `mu |xi|^2 <= A xi.xi <= |xi|^2 / mu` over the cell grid.
    pub fn check_ellipticity_seeded(&self, probes: usize, seed: u64) -> Result<EllipticityReport> {
        if probes == 0 {
            return Err(Error::InvalidInput("at least one probe is required".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let template = CoefficientTensor::zeros(self.d, self.n, self.m);
        let len = template.symbol_len();
        let xis: Vec<Vec<f64>> = (0..probes)
            .map(|_| {
                let mut v: Vec<f64> = (0..len).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                v.iter_mut().for_each(|x| *x /= norm);
                v
            })
            .collect();
        let res = self.resolution;
        let points = res.pow(self.d as u32);
        let mut t = template;
        let mut y = vec![0.0; self.d];
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let slack = 1e-12;
        for p in 0..points {
            grid_point(p, res, self.d, &mut y);
            self.eval_into(&y, &mut t);
            for xi in &xis {
                let q = t.bilinear(xi, xi);
                lo = lo.min(q);
                hi = hi.max(q);
                if q < self.mu * (1.0 - slack) || q > (1.0 + slack) / self.mu {
                    return Err(Error::EllipticityViolation(format!(
                        "field {} at y = {y:?}: form ratio {q} outside [{}, {}]",
                        self.id,
                        self.mu,
                        1.0 / self.mu
                    )));
                }
            }
        }
        Ok(EllipticityReport {
            min_ratio: lo,
            max_ratio: hi,
            mu: self.mu,
            grid_points: points,
            probes,
            seed,
            spot_checked: true,
        })
    }
}

/// Writes the coordinates of flat grid index `p` (axis 0 fastest).
#[inline]
pub fn grid_point(p: usize, resolution: usize, d: usize, y: &mut [f64]) {
    let mut rem = p;
    for yk in y.iter_mut().take(d) {
        *yk = (rem % resolution) as f64 / resolution as f64;
        rem /= resolution;
    }
}

/// Entry-major samples of a coefficient field on the `N^d` cell grid.
#[derive(Clone, Debug)]
pub struct SampledField {
    pub d: usize,
    pub n: usize,
    pub m: u32,
    pub resolution: usize,
    /// `values[slot][grid point]` with slots in [`CoefficientTensor`] order.
    pub values: Vec<Vec<f64>>,
}

impl SampledField {
    pub fn points(&self) -> usize {
        self.resolution.pow(self.d as u32)
    }

    pub fn mean(&self) -> CoefficientTensor {
        let p = self.points() as f64;
        let entries = self.values.iter().map(|v| v.iter().sum::<f64>() / p).collect();
        CoefficientTensor::from_entries(self.d, self.n, self.m, entries)
    }

    pub fn at(&self, p: usize) -> CoefficientTensor {
        let entries = self.values.iter().map(|v| v[p]).collect();
        CoefficientTensor::from_entries(self.d, self.n, self.m, entries)
    }
}

/// JSON description of a coefficient field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldSpec {
    Builtin {
        name: String,
        #[serde(default)]
        d: Option<usize>,
        #[serde(default)]
        n: Option<usize>,
        #[serde(default)]
        m: Option<u32>,
        #[serde(default)]
        value: Option<f64>,
        #[serde(default)]
        resolution: Option<usize>,
    },
    Fourier {
        id: String,
        d: usize,
        #[serde(default = "one")]
        n: usize,
        m: u32,
        mu: f64,
        entries: Vec<FourierEntry>,
        #[serde(default)]
        holder: Option<HolderModulus>,
        #[serde(default)]
        vmo: Option<VmoModulus>,
        #[serde(default)]
        resolution: Option<usize>,
    },
}

fn one() -> usize {
    1
}

pub const BUILTIN_FIELDS: &[&str] = &["constant", "sin1d", "laminate2d", "checker-smooth", "skew-laminate2d"];

impl FieldSpec {
    pub fn builtin(name: &str, m: u32) -> Self {
        FieldSpec::Builtin { name: name.into(), d: None, n: None, m: Some(m), value: None, resolution: None }
    }

    pub fn build(&self) -> Result<PeriodicCoefficientField> {
        match self {
            FieldSpec::Builtin { name, d, n, m, value, resolution } => {
                let m = m.unwrap_or(1);
                let n = n.unwrap_or(1);
                let f = builtin_field(name, *d, n, m, *value)?;
                Ok(match resolution {
                    Some(r) => f.with_resolution(*r),
                    None => f,
                })
            }
            FieldSpec::Fourier { id, d, n, m, mu, entries, holder, vmo, resolution } => {
                if *mu <= 0.0 {
                    return Err(Error::InvalidInput("fields need a declared ellipticity constant mu > 0".into()));
                }
                let f = PeriodicCoefficientField::fourier(id, *d, *n, *m, entries, *mu)?
                    .with_holder(*holder)
                    .with_vmo(vmo.clone());
                Ok(match resolution {
                    Some(r) => f.with_resolution(*r),
                    None => f,
                })
            }
        }
    }
}

fn sine_profile(axis: usize, d: usize) -> ScalarProfile {
    let mut k = vec![0; d];
    k[axis] = 1;
    ScalarProfile::Trig(TrigSeries { mean: 2.0, modes: vec![TrigMode { k, cos: 0.0, sin: 1.0 }] })
}

fn smooth_metadata(f: PeriodicCoefficientField, lambda0: f64) -> PeriodicCoefficientField {
    f.with_holder(Some(HolderModulus { lambda0, tau0: 0.5 }))
        .with_vmo(Some(VmoModulus { description: format!("uniformly continuous, rho(t) = {lambda0:.6} t") }))
}

/// Named fields from the scenario registry.
pub fn builtin_field(name: &str, d: Option<usize>, n: usize, m: u32, value: Option<f64>) -> Result<PeriodicCoefficientField> {
    let fixed_d = |want: usize| -> Result<usize> {
        match d {
            Some(got) if got != want => {
                Err(Error::InvalidInput(format!("builtin field {name} is {want}-dimensional, got d = {got}")))
            }
            _ => Ok(want),
        }
    };
    let f = match name {
        "constant" => {
            let c = value.unwrap_or(1.5);
            if c <= 0.0 {
                return Err(Error::InvalidInput("constant field needs a positive value".into()));
            }
            let d = d.unwrap_or(1);
            PeriodicCoefficientField::constant(name, CoefficientTensor::scaled_identity(d, n, m, c), c.min(1.0 / c))
        }
        "sin1d" => {
            let d = fixed_d(1)?;
            smooth_metadata(
                PeriodicCoefficientField::isotropic(name, d, n, m, sine_profile(0, d), 1.0 / 3.0),
                2.0 * PI,
            )
        }
        "laminate2d" => {
            let d = fixed_d(2)?;
            smooth_metadata(
                PeriodicCoefficientField::isotropic(name, d, n, m, sine_profile(0, d), 1.0 / 3.0),
                2.0 * PI,
            )
        }
        "checker-smooth" => {
            let d = fixed_d(2)?;
            let checker = SmoothedChecker::new(1.0, 4.0, CHECKER_MOLLIFICATION_WIDTH);
            let profile = ScalarProfile::SmoothedChecker(checker);
            let mut lip: f64 = 0.0;
            for s in 0..64 * 64 {
                let y = [(s % 64) as f64 / 64.0, (s / 64) as f64 / 64.0];
                lip = lip.max(profile.grad(&y).iter().map(|g| g * g).sum::<f64>().sqrt());
            }
            smooth_metadata(PeriodicCoefficientField::isotropic(name, d, n, m, profile, 0.24), 1.1 * lip)
                .with_mollification_width(Some(CHECKER_MOLLIFICATION_WIDTH))
        }
        "skew-laminate2d" => {
            let d = fixed_d(2)?;
            if m != 1 {
                return Err(Error::InvalidInput("skew-laminate2d is defined for m = 1".into()));
            }
            let e1 = MultiIndex::unit(2, 0);
            let e2 = MultiIndex::unit(2, 1);
            let diag = TrigSeries { mean: 2.0, modes: vec![TrigMode { k: vec![1, 0], cos: 0.0, sin: 1.0 }] };
            let skew = |c: f64| TrigSeries { mean: 0.0, modes: vec![TrigMode { k: vec![0, 1], cos: c, sin: 0.0 }] };
            let mut entries = Vec::new();
            for i in 0..n {
                entries.push(FourierEntry { alpha: e1.clone(), beta: e1.clone(), i, j: i, series: diag.clone() });
                entries.push(FourierEntry { alpha: e2.clone(), beta: e2.clone(), i, j: i, series: diag.clone() });
                entries.push(FourierEntry { alpha: e1.clone(), beta: e2.clone(), i, j: i, series: skew(0.5) });
                entries.push(FourierEntry { alpha: e2.clone(), beta: e1.clone(), i, j: i, series: skew(-0.5) });
            }
            smooth_metadata(PeriodicCoefficientField::fourier(name, d, n, m, &entries, 1.0 / 3.0)?, 2.0 * PI)
        }
        other => return Err(Error::InvalidInput(format!("unknown builtin field {other:?}"))),
    };
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_field_has_unit_ratios() {
        let f = builtin_field("constant", Some(2), 2, 2, Some(1.0)).unwrap();
        let r = f.check_ellipticity(16).unwrap();
        assert!((r.min_ratio - 1.0).abs() < 1e-14);
        assert!((r.max_ratio - 1.0).abs() < 1e-14);
        assert!(r.spot_checked);
    }

    #[test]
    fn sin1d_extrema_on_the_grid() {
        // a = 2 + sin(2 pi y) attains 1 and 3 at y = 3/4 and y = 1/4, both grid points.
        let f = builtin_field("sin1d", None, 1, 1, None).unwrap();
        let r = f.check_ellipticity(4).unwrap();
        assert!((r.min_ratio - 1.0).abs() < 1e-14);
        assert!((r.max_ratio - 3.0).abs() < 1e-14);
    }

    #[test]
    fn negative_eigenvalue_is_rejected() {
        let mut mode = TrigMode { k: vec![1], cos: 0.0, sin: 0.0 };
        mode.sin = 3.0;
        let entries = vec![FourierEntry {
            alpha: MultiIndex::unit(1, 0),
            beta: MultiIndex::unit(1, 0),
            i: 0,
            j: 0,
            series: TrigSeries { mean: 2.0, modes: vec![mode] },
        }];
        let f = PeriodicCoefficientField::fourier("bad", 1, 1, 1, &entries, 0.2).unwrap();
        assert!(matches!(f.check_ellipticity(3), Err(Error::EllipticityViolation(_))));
    }

    #[test]
    fn periodicity_on_wraparound() {
        for name in ["laminate2d", "checker-smooth", "skew-laminate2d"] {
            let f = builtin_field(name, None, 1, 1, None).unwrap();
            for s in 0..25 {
                let y = [s as f64 * 0.037, 0.11 + s as f64 * 0.05];
                let shifted = [y[0] + 1.0, y[1] - 2.0];
                assert!(f.eval(&y).max_abs_diff(&f.eval(&shifted)) < 1e-12, "{name}");
            }
        }
    }

    #[test]
    fn checker_is_smoothed_two_phase() {
        let f = builtin_field("checker-smooth", None, 1, 1, None).unwrap();
        let center = f.eval(&[0.25, 0.25]).at(0, 0, 0, 0);
        let other = f.eval(&[0.75, 0.25]).at(0, 0, 0, 0);
        assert!((center - 4.0).abs() < 1e-3, "{center}");
        assert!((other - 1.0).abs() < 1e-3, "{other}");
        f.check_ellipticity(2).unwrap();
    }

    #[test]
    fn adjoint_transposes_samples() {
        let f = builtin_field("skew-laminate2d", None, 1, 1, None).unwrap();
        assert!(!f.is_symmetric());
        let g = f.adjoint();
        let y = [0.3, 0.8];
        assert_eq!(g.eval(&y), f.eval(&y).transpose());
        assert_eq!(g.adjoint().id(), f.id());
        assert!(builtin_field("laminate2d", None, 1, 1, None).unwrap().is_symmetric());
    }

    #[test]
    fn fourier_spec_roundtrip() {
        let json = r#"{"kind":"fourier","id":"inline","d":1,"m":1,"mu":0.3,
            "entries":[{"alpha":[1],"beta":[1],"mean":2.0,"modes":[{"k":[1],"sin":1.0}]}]}"#;
        let spec: FieldSpec = serde_json::from_str(json).unwrap();
        let f = spec.build().unwrap();
        let g = builtin_field("sin1d", None, 1, 1, None).unwrap();
        for s in 0..10 {
            let y = [s as f64 / 10.0];
            assert!(f.eval(&y).max_abs_diff(&g.eval(&y)) < 1e-15);
        }
        assert!(f.is_symmetric());
    }
}
