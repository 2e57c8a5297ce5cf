//! Smoothing operators, the two-scale remainder, and the norm library.

mod kernel;
mod norms;
mod remainder;
mod smooth;

pub use kernel::{tau_slot, KernelTable, MollifierKernel, KERNEL_ID, TABLE_ORDER};
pub use norms::{gradient_holder_seminorm, holder_seminorm, norm, norm_on, region_measure, region_points, NormKind, Region, HOLDER_PAIRS, HOLDER_SEED};
pub use remainder::{two_scale_remainder, TwoScaleRemainder};
pub use smooth::{smooth, Extension, SmoothedField, Source};

use crate::error::Result;
use crate::func::{AnalyticField, FieldJet, Term};
use crate::geometry::{build_cutoff, build_mesh, GraphDomain};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Which smoothing estimate a ratio probes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothingLemma {
    /// `||g(x/eps) S(f) rho||_{L2(Omega^{3eps}; delta)} / (||g||_{L2(Q)} ||f||_{L2(Omega^{2eps}; delta)})`.
    OscillatingProduct,
    /// The same with weight `delta^{-1}`.
    OscillatingProductInverse,
    /// `eps ||S(D f)||_{L2(Omega^{3eps}; delta)} / ||f||_{L2(Omega^eps; delta)}`.
    DerivativeTransfer,
    /// `||S f - f||_{L2(Omega^{2eps}; delta)} / (eps ||nabla f||_{L2(Omega^eps; delta)})`.
    Approximation,
}

impl SmoothingLemma {
    pub const ALL: [SmoothingLemma; 4] = [
        SmoothingLemma::OscillatingProduct,
        SmoothingLemma::OscillatingProductInverse,
        SmoothingLemma::DerivativeTransfer,
        SmoothingLemma::Approximation,
    ];
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmoothingRatioRow {
    pub lemma: SmoothingLemma,
    pub sample: usize,
    pub eps: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmoothingRatioReport {
    pub d: usize,
    pub seed: u64,
    pub rows: Vec<SmoothingRatioRow>,
    /// Largest `max / min` of a ratio over the scales, per lemma.
    pub variation: Vec<(SmoothingLemma, f64)>,
}

/// A 1-periodic trigonometric polynomial `g` with its `L^2(Q)` norm.
#[derive(Clone, Debug)]
struct PeriodicProbe {
    field: AnalyticField,
    l2: f64,
}

/// Random inputs on the scale of `eps`: `f(x) = F(x / eps)` with `F` a trigonometric polynomial of
/// non-integer frequencies, and a 1-periodic `g`. Scaling with `eps` keeps every ratio of order one.
fn random_inputs(d: usize, eps: f64, rng_seed: u64) -> (AnalyticField, PeriodicProbe) {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut f = vec![Term::monomial(rng.random_range(-1.0..1.0), &[])];
    for _ in 0..3 {
        let mut freq = vec![0.0; d];
        let mut phase = vec![0.0; d];
        for k in 0..d {
            freq[k] = rng.random_range(0.2..1.5) / eps;
            phase[k] = rng.random_range(0.0..2.0 * PI);
        }
        f.push(Term { coeff: rng.random_range(-1.0..1.0), powers: vec![], freq, phase });
    }
    let mut g = vec![Term::monomial(1.0 + rng.random_range(0.0..1.0), &[])];
    let mut l2sq = g[0].coeff.powi(2);
    for _ in 0..2 {
        let mut freq = vec![0.0; d];
        let mut phase = vec![0.0; d];
        let axis = rng.random_range(0..d);
        freq[axis] = 2.0 * PI * f64::from(rng.random_range(1..4u32));
        phase[axis] = rng.random_range(0.0..2.0 * PI);
        let c: f64 = rng.random_range(-1.0..1.0);
        l2sq += c * c / 2.0;
        g.push(Term { coeff: c, powers: vec![], freq, phase });
    }
    (AnalyticField::scalar(d, f), PeriodicProbe { field: AnalyticField::scalar(d, g), l2: l2sq.sqrt() })
}

/// Ratio families of the smoothing estimates over `samples` random inputs and each `eps`.
///
/// The domain is `(0, 4)` for `d = 1` and the flat `D(2)` for `d = 2`, so the layer `Omega^{4eps}`
/// stays large at `eps = 1/8`; the mesh resolves each scale with `kappa` points per `eps`.
pub fn smoothing_lemma_ratios(d: usize, eps_list: &[f64], samples: usize, seed: u64, kappa: f64) -> Result<SmoothingRatioReport> {
    let domain = if d == 1 { GraphDomain::interval(4.0) } else { GraphDomain::graph(2.0, crate::geometry::Psi::Flat, None)? };
    let kernel = Arc::new(MollifierKernel::new(d));
    let mut rows = Vec::new();
    for &eps in eps_list {
        let mesh = Arc::new(build_mesh(&domain, eps / kappa, 1)?);
        let cutoff = build_cutoff(&domain, eps, &mesh, kappa)?;
        for s in 0..samples {
            let (f, g) = random_inputs(d, eps, seed.wrapping_add(s as u64));
            let sf = smooth(Source::Analytic(f.clone()), eps, false, kernel.clone())?;
            let weighted = |field: &dyn FieldJet, kind: NormKind, t: f64| norm(field, &mesh, kind, &Region::Inner { t }, false);
            for lemma in SmoothingLemma::ALL {
                let ratio = match lemma {
                    SmoothingLemma::OscillatingProduct | SmoothingLemma::OscillatingProductInverse => {
                        let kind = if lemma == SmoothingLemma::OscillatingProduct { NormKind::L2Delta } else { NormKind::L2InvDelta };
                        let prod = Product { sf: &sf, g: &g, eps, rho: &cutoff };
                        weighted(&prod, kind, 3.0 * eps)? / (g.l2 * weighted(&f, kind, 2.0 * eps)?)
                    }
                    SmoothingLemma::DerivativeTransfer => {
                        let ds = Gradient { inner: &sf };
                        eps * weighted(&ds, NormKind::L2Delta, 3.0 * eps)? / weighted(&f, NormKind::L2Delta, eps)?
                    }
                    SmoothingLemma::Approximation => {
                        let diff = Difference { a: &sf, b: &f };
                        let grad = Gradient { inner: &f };
                        weighted(&diff, NormKind::L2Delta, 2.0 * eps)? / (eps * weighted(&grad, NormKind::L2Delta, eps)?)
                    }
                };
                rows.push(SmoothingRatioRow { lemma, sample: s, eps, ratio });
            }
        }
    }
    let mut variation = Vec::new();
    for lemma in SmoothingLemma::ALL {
        let mut worst = 1.0f64;
        for s in 0..samples {
            let vals: Vec<f64> = rows.iter().filter(|r| r.lemma == lemma && r.sample == s).map(|r| r.ratio).collect();
            let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
            worst = worst.max(hi / lo);
        }
        variation.push((lemma, worst));
    }
    Ok(SmoothingRatioReport { d, seed, rows, variation })
}

/// `g(x/eps) S(f)(x) rho(x)`.
struct Product<'a> {
    sf: &'a SmoothedField,
    g: &'a PeriodicProbe,
    eps: f64,
    rho: &'a crate::geometry::CutoffField,
}

impl FieldJet for Product<'_> {
    fn d(&self) -> usize {
        self.sf.d()
    }
    fn n(&self) -> usize {
        1
    }
    fn max_order(&self) -> u32 {
        0
    }
    fn jet(&self, x: &[f64], _order: u32, out: &mut [f64]) {
        let rho = self.rho.value(x);
        if rho == 0.0 {
            out[0] = 0.0;
            return;
        }
        let y: Vec<f64> = x.iter().map(|v| v / self.eps).collect();
        out[0] = self.g.field.value(&y)[0] * self.sf.value(x)[0] * rho;
    }
}

/// `|nabla f|` as a scalar field.
struct Gradient<'a> {
    inner: &'a dyn FieldJet,
}

impl FieldJet for Gradient<'_> {
    fn d(&self) -> usize {
        self.inner.d()
    }
    fn n(&self) -> usize {
        1
    }
    fn max_order(&self) -> u32 {
        0
    }
    fn jet(&self, x: &[f64], _order: u32, out: &mut [f64]) {
        let d = self.inner.d();
        let n = self.inner.n();
        let mut j = vec![0.0; crate::func::jet_len(d, n, 1)];
        self.inner.jet(x, 1, &mut j);
        out[0] = crate::func::jet_tensor_norm(d, n, &j, 1);
    }
}

/// `a - b` (values only).
pub struct Difference<'a> {
    pub a: &'a dyn FieldJet,
    pub b: &'a dyn FieldJet,
}

impl FieldJet for Difference<'_> {
    fn d(&self) -> usize {
        self.a.d()
    }
    fn n(&self) -> usize {
        self.a.n()
    }
    fn max_order(&self) -> u32 {
        self.a.max_order().min(self.b.max_order())
    }
    fn jet(&self, x: &[f64], order: u32, out: &mut [f64]) {
        let len = crate::func::jet_len(self.d(), self.n(), order);
        let mut t = vec![0.0; len];
        self.a.jet(x, order, out);
        self.b.jet(x, order, &mut t);
        for k in 0..len {
            out[k] -= t[k];
        }
    }
    fn jet_in_cell(&self, cell: usize, xi: &[f64], x: &[f64], order: u32, out: &mut [f64]) {
        let len = crate::func::jet_len(self.d(), self.n(), order);
        let mut t = vec![0.0; len];
        self.a.jet_in_cell(cell, xi, x, order, out);
        self.b.jet_in_cell(cell, xi, x, order, &mut t);
        for k in 0..len {
            out[k] -= t[k];
        }
    }
}

#[cfg(test)]
mod tests;
