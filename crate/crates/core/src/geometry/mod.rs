//! Graph domains `D(r, psi)`, boundary distance, boundary layers, cutoffs and meshes.

mod cutoff;
mod mesh;

pub use cutoff::{build_cutoff, ramp, CutoffField};
pub use mesh::{build_mesh, BoundaryTag, CellMap, ElementFamily, Mesh};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Defining function of the lower boundary, `x_d = psi(x')`, with `psi(0) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Psi {
    Flat,
    /// `amp * sin(freq * s)`.
    Sine { amp: f64, freq: f64 },
    /// `coeff * |s|^exponent`; `C^{1, exponent - 1}` for `1 < exponent < 2`.
    PowerBump { coeff: f64, exponent: f64 },
}

impl Psi {
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            Psi::Flat => 0.0,
            Psi::Sine { amp, freq } => amp * (freq * s).sin(),
            Psi::PowerBump { coeff, exponent } => coeff * s.abs().powf(exponent),
        }
    }

    pub fn deriv(&self, s: f64) -> f64 {
        match *self {
            Psi::Flat => 0.0,
            Psi::Sine { amp, freq } => amp * freq * (freq * s).cos(),
            Psi::PowerBump { coeff, exponent } => coeff * exponent * s.abs().powf(exponent - 1.0) * s.signum(),
        }
    }

    pub fn is_flat(&self) -> bool {
        match *self {
            Psi::Flat => true,
            Psi::Sine { amp, freq } => amp == 0.0 || freq == 0.0,
            Psi::PowerBump { coeff, .. } => coeff == 0.0,
        }
    }

    /// Sampled `max |psi'|` on `[-r, r]`.
    pub fn slope_bound(&self, r: f64) -> f64 {
        (0..=4096).map(|k| self.deriv(-r + 2.0 * r * f64::from(k) / 4096.0).abs()).fold(0.0, f64::max)
    }

    /// Sampled Hölder seminorm of `psi'` with exponent `theta` on `[-r, r]`.
    pub fn derivative_holder(&self, r: f64, theta: f64) -> f64 {
        let s: Vec<f64> = (0..=256).map(|k| -r + 2.0 * r * f64::from(k) / 256.0).collect();
        let mut best = 0.0f64;
        for (a, &x) in s.iter().enumerate() {
            for &y in &s[a + 1..] {
                best = best.max((self.deriv(x) - self.deriv(y)).abs() / (y - x).powf(theta));
            }
        }
        best
    }
}

/// Declared boundary regularity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum Regularity {
    /// `|grad psi| <= lipschitz` with a described modulus of continuity for `grad psi`.
    C1 { lipschitz: f64, modulus: String },
    /// `||grad psi||_{C^theta} <= m1`.
    C1Theta { theta: f64, m1: f64 },
}

impl Regularity {
    pub fn theta(&self) -> Option<f64> {
        match self {
            Regularity::C1Theta { theta, .. } => Some(*theta),
            Regularity::C1 { .. } => None,
        }
    }
}

/// Which `eps`-layer of the domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layer {
    /// `{delta > eps}`.
    Inner,
    /// `{delta < eps}` inside the domain.
    Collar,
    /// `{x in R^d : dist(x, boundary) < eps}`, both sides of the boundary.
    OuterCollar,
}

/// `(0, r)` for `d = 1`; `D(r, psi) = {|x'| < r, psi(x') < x_d < psi(x') + r}` for `d = 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDomain {
    pub d: usize,
    pub r: f64,
    pub psi: Psi,
    #[serde(default)]
    pub regularity: Option<Regularity>,
}

const GRAPH_SAMPLES: usize = 64;

impl GraphDomain {
    pub fn interval(r: f64) -> Self {
        Self { d: 1, r, psi: Psi::Flat, regularity: Some(Regularity::C1Theta { theta: 1.0, m1: 0.0 }) }
    }

    /// Checks `psi(0) = 0` and the declared bounds on sampled slopes.
    pub fn graph(r: f64, psi: Psi, regularity: Option<Regularity>) -> Result<Self> {
        if psi.value(0.0).abs() > 1e-14 {
            return Err(Error::InvalidInput(format!("psi(0) = {} must vanish", psi.value(0.0))));
        }
        if !(r > 0.0) {
            return Err(Error::InvalidInput("domain size must be positive".into()));
        }
        match &regularity {
            Some(Regularity::C1 { lipschitz, .. }) if psi.slope_bound(r) > lipschitz * (1.0 + 1e-12) => {
                return Err(Error::InvalidInput(format!(
                    "sampled |grad psi| = {} exceeds the declared bound {lipschitz}",
                    psi.slope_bound(r)
                )));
            }
            Some(Regularity::C1Theta { theta, m1 }) => {
                let norm = psi.slope_bound(r) + psi.derivative_holder(r, *theta);
                if norm > m1 * (1.0 + 1e-9) {
                    return Err(Error::InvalidInput(format!(
                        "sampled C^theta norm of grad psi is {norm}, above the declared {m1}"
                    )));
                }
            }
            _ => {}
        }
        Ok(Self { d: 2, r, psi, regularity })
    }

    pub fn is_flat(&self) -> bool {
        self.d == 1 || self.psi.is_flat()
    }

    pub fn measure(&self) -> f64 {
        if self.d == 1 {
            self.r
        } else {
            2.0 * self.r * self.r
        }
    }

    pub fn diameter(&self) -> f64 {
        if self.d == 1 {
            return self.r;
        }
        let mut best = 0.0f64;
        let s: Vec<f64> = (0..=64).map(|k| -self.r + 2.0 * self.r * f64::from(k) / 64.0).collect();
        for &a in &s {
            for &b in &s {
                let dy = (self.psi.value(b) - self.psi.value(a)).abs() + self.r;
                best = best.max(((b - a).powi(2) + dy * dy).sqrt());
            }
        }
        best
    }

    /// Membership in `D_rho` (or `(0, rho)` in 1D), strict inequalities.
    pub fn in_sub(&self, x: &[f64], rho: f64) -> bool {
        if self.d == 1 {
            return x[0] > 0.0 && x[0] < rho;
        }
        let p = self.psi.value(x[0]);
        x[0].abs() < rho && x[1] > p && x[1] < p + rho
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.in_sub(x, self.r)
    }

    /// Membership in the closure, widened by `slack`.
    pub fn contains_closure(&self, x: &[f64], slack: f64) -> bool {
        if self.d == 1 {
            return x[0] >= -slack && x[0] <= self.r + slack;
        }
        let p = self.psi.value(x[0]);
        x[0].abs() <= self.r + slack && x[1] >= p - slack && x[1] <= p + self.r + slack
    }

    /// Point on the graph part `Delta_rho` within `tol`.
    pub fn on_delta(&self, x: &[f64], rho: f64, tol: f64) -> bool {
        if self.d == 1 {
            return x[0].abs() <= tol;
        }
        x[0].abs() < rho && (x[1] - self.psi.value(x[0])).abs() <= tol
    }

    /// Distance to the boundary of `D_r` and a nearest boundary point, for any point of the plane.
    pub fn nearest_boundary_point(&self, x: &[f64]) -> (f64, [f64; 2]) {
        let r = self.r;
        if self.d == 1 {
            return if x[0] <= r - x[0] { (x[0].abs(), [0.0, 0.0]) } else { ((r - x[0]).abs(), [r, 0.0]) };
        }
        let (x1, x2) = (x[0], x[1]);
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        for side in [-r, r] {
            let lo = self.psi.value(side);
            let t = x2.clamp(lo, lo + r);
            let dist = ((x1 - side).powi(2) + (x2 - t).powi(2)).sqrt();
            if dist < best.0 {
                best = (dist, [side, t]);
            }
        }
        for off in [0.0, r] {
            if let Some(cand) = self.graph_distance(x1, x2, off, best.0) {
                if cand.0 < best.0 {
                    best = cand;
                }
            }
        }
        best
    }

    /// Distance from `(x1, x2)` to `{(s, psi(s) + off) : |s| <= r}` if it may beat `bound`.
    fn graph_distance(&self, x1: f64, x2: f64, off: f64, bound: f64) -> Option<(f64, [f64; 2])> {
        let r = self.r;
        let dist2 = |s: f64| (s - x1).powi(2) + (self.psi.value(s) + off - x2).powi(2);
        let mut bound = bound;
        if x1.abs() <= r {
            bound = bound.min((x2 - self.psi.value(x1) - off).abs());
        }
        let (lo, hi) = ((x1 - bound).max(-r), (x1 + bound).min(r));
        if lo > hi {
            return None;
        }
        if self.psi.is_flat() {
            let s = x1.clamp(-r, r);
            return Some((dist2(s).sqrt(), [s, off]));
        }
        let step = (hi - lo) / GRAPH_SAMPLES as f64;
        let (mut k_best, mut f_best) = (0, f64::INFINITY);
        for k in 0..=GRAPH_SAMPLES {
            let f = dist2(lo + step * k as f64);
            if f < f_best {
                (k_best, f_best) = (k, f);
            }
        }
        let mut a = lo + step * k_best.saturating_sub(1) as f64;
        let mut b = (lo + step * (k_best + 1) as f64).min(hi);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (dist2(c), dist2(d));
        while b - a > 1e-14 * r.max(1.0) {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = dist2(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = dist2(d);
            }
        }
        let s = [0.5 * (a + b), lo + step * k_best as f64]
            .into_iter()
            .min_by(|p, q| dist2(*p).total_cmp(&dist2(*q)))
            .expect("two candidates");
        Some((dist2(s).sqrt(), [s, self.psi.value(s) + off]))
    }

    /// `delta(x) = dist(x, boundary)` for `x` in the closure of the domain.
    pub fn boundary_distance(&self, x: &[f64]) -> Result<f64> {
        if !self.contains_closure(x, 1e-12 * self.r) {
            return Err(Error::OutsideDomain(x[..self.d].to_vec()));
        }
        Ok(self.nearest_boundary_point(x).0)
    }

    pub fn in_layer(&self, x: &[f64], eps: f64, which: Layer) -> bool {
        match which {
            Layer::Inner => self.contains(x) && self.nearest_boundary_point(x).0 > eps,
            Layer::Collar => self.contains(x) && self.nearest_boundary_point(x).0 < eps,
            Layer::OuterCollar => self.nearest_boundary_point(x).0 < eps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sine_domain(r: f64) -> GraphDomain {
        GraphDomain::graph(
            r,
            Psi::Sine { amp: 0.1, freq: 1.0 },
            Some(Regularity::C1 { lipschitz: 0.1, modulus: "0.1 t".into() }),
        )
        .unwrap()
    }

    #[test]
    fn interval_and_flat_distances() {
        let i = GraphDomain::interval(1.0);
        assert!((i.boundary_distance(&[0.3]).unwrap() - 0.3).abs() < 1e-15);
        assert!(matches!(i.boundary_distance(&[1.5]), Err(Error::OutsideDomain(_))));
        let flat = GraphDomain::graph(1.0, Psi::Flat, None).unwrap();
        assert!((flat.boundary_distance(&[0.0, 0.2]).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn graph_distance_matches_dense_sampling() {
        let dom = sine_domain(1.0);
        let x = [0.0, 0.5];
        let mut brute = f64::INFINITY;
        let n = 100_000;
        for k in 0..=n {
            let s = -1.0 + 2.0 * k as f64 / n as f64;
            let p = dom.psi.value(s);
            for y in [p, p + 1.0] {
                brute = brute.min(((s - x[0]).powi(2) + (y - x[1]).powi(2)).sqrt());
            }
        }
        for side in [-1.0f64, 1.0] {
            let lo = dom.psi.value(side);
            for k in 0..=n {
                let t = lo + k as f64 / n as f64;
                brute = brute.min(((side - x[0]).powi(2) + (t - x[1]).powi(2)).sqrt());
            }
        }
        let delta = dom.boundary_distance(&x).unwrap();
        assert!((delta - brute).abs() < 1e-6, "{delta} vs {brute}");
        assert!(delta <= brute + 1e-12);
    }

    #[test]
    fn distance_is_one_lipschitz() {
        let dom = sine_domain(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sample = |rng: &mut ChaCha8Rng| loop {
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-0.2..1.2)];
            if dom.contains(&x) {
                return x;
            }
        };
        for _ in 0..300 {
            let (a, b) = (sample(&mut rng), sample(&mut rng));
            for k in 0..10 {
                let t = f64::from(k) / 10.0;
                let s = f64::from(k + 1) / 10.0;
                let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                let q = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                let dp = dom.nearest_boundary_point(&p).0;
                let dq = dom.nearest_boundary_point(&q).0;
                let len = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                assert!((dp - dq).abs() <= len + 1e-9);
            }
        }
    }

    #[test]
    fn layers_partition_the_interval() {
        let i = GraphDomain::interval(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let x = [rng.random_range(0.0..1.0)];
            let inner = i.in_layer(&x, 0.1, Layer::Inner);
            let collar = i.in_layer(&x, 0.1, Layer::Collar);
            let on = (i.boundary_distance(&x).unwrap() - 0.1).abs() == 0.0;
            assert_eq!(u8::from(inner) + u8::from(collar) + u8::from(on), 1);
        }
        assert!(i.in_layer(&[0.5], 0.1, Layer::Inner));
        assert!(i.in_layer(&[-0.05], 0.1, Layer::OuterCollar));
        assert!(!i.in_layer(&[-0.05], 0.1, Layer::Collar));
    }

    #[test]
    fn collar_area_matches_monte_carlo() {
        let dom = GraphDomain::graph(1.0, Psi::Flat, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let total = 1_000_000;
        let hits = (0..total)
            .filter(|_| {
                let x = [rng.random_range(-1.0..1.0), rng.random_range(0.0..1.0)];
                dom.in_layer(&x, 0.1, Layer::Collar)
            })
            .count();
        let mc = 2.0 * hits as f64 / total as f64;
        let mesh = build_mesh(&dom, 1.0 / 80.0, 1).unwrap();
        let quad = mesh.region_measure(|x| dom.in_layer(x, 0.1, Layer::Collar));
        // Exact collar area of the 2 x 1 rectangle: 2 - 1.8 * 0.8.
        assert!((mc - 0.56).abs() < 0.02 * 0.56);
        assert!((quad - mc).abs() < 0.02 * mc);
    }

    #[test]
    fn regularity_metadata_is_checked() {
        assert!(GraphDomain::graph(1.0, Psi::Sine { amp: 0.1, freq: 1.0 }, Some(Regularity::C1 { lipschitz: 0.05, modulus: String::new() })).is_err());
        let bump = Psi::PowerBump { coeff: 0.3, exponent: 1.5 };
        let m1 = bump.slope_bound(0.5) + bump.derivative_holder(0.5, 0.5);
        assert!(GraphDomain::graph(0.5, bump.clone(), Some(Regularity::C1Theta { theta: 0.5, m1: m1 * 1.01 })).is_ok());
        assert!(GraphDomain::graph(0.5, Psi::Sine { amp: 0.1, freq: 1.0 }, None).is_ok());
        assert!(GraphDomain::graph(0.5, Psi::PowerBump { coeff: 0.3, exponent: 1.5 }, Some(Regularity::C1Theta { theta: 0.5, m1: 0.1 })).is_err());
    }
}
