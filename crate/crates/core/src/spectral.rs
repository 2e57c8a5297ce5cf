//! FFT helpers on the `N^d` torus grid (`d <= 2`, axis 0 fastest) and sparse trigonometric interpolants.

use crate::tensor::MultiIndex;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

pub struct Spectral {
    d: usize,
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Spectral {
    pub fn new(d: usize, n: usize) -> Self {
        assert!((1..=2).contains(&d), "spectral grids support d = 1, 2");
        let mut planner = FftPlanner::new();
        Self { d, n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        for row in data.chunks_exact_mut(n) {
            plan.process(row);
        }
        if self.d == 2 {
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for i in 0..n {
                for j in 0..n {
                    col[j] = data[j * n + i];
                }
                plan.process(&mut col);
                for j in 0..n {
                    data[j * n + i] = col[j];
                }
            }
        }
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut data, &self.fwd);
        data
    }

    /// Inverse of [`Spectral::forward`], keeping the real part.
    pub fn inverse(&self, spec: &[Complex64]) -> Vec<f64> {
        let mut data = spec.to_vec();
        self.transform(&mut data, &self.inv);
        let s = 1.0 / self.points() as f64;
        data.iter().map(|c| c.re * s).collect()
    }

    /// Signed wave number of FFT bin `i`.
    #[inline]
    pub fn wavenumber(&self, i: usize) -> i64 {
        if i <= self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Wave vector of flat bin `p`.
    pub fn wave(&self, p: usize) -> [i64; 2] {
        let n = self.n;
        if self.d == 1 {
            [self.wavenumber(p), 0]
        } else {
            [self.wavenumber(p % n), self.wavenumber(p / n)]
        }
    }

    fn is_nyquist(&self, k: i64) -> bool {
        self.n % 2 == 0 && k == self.n as i64 / 2
    }

    /// `prod (2 pi i k_l)^{alpha_l}`, zero on Nyquist bins of differentiated axes.
    pub fn derivative_symbol(&self, p: usize, alpha: &MultiIndex) -> Complex64 {
        let k = self.wave(p);
        let mut s = Complex64::new(1.0, 0.0);
        for (l, &a) in alpha.components().iter().enumerate() {
            if a == 0 {
                continue;
            }
            if self.is_nyquist(k[l]) {
                return Complex64::new(0.0, 0.0);
            }
            s *= Complex64::new(0.0, 2.0 * PI * k[l] as f64).powu(a);
        }
        s
    }

    pub fn differentiate_spec(&self, spec: &[Complex64], alpha: &MultiIndex) -> Vec<Complex64> {
        spec.iter().enumerate().map(|(p, c)| c * self.derivative_symbol(p, alpha)).collect()
    }

    pub fn differentiate(&self, f: &[f64], alpha: &MultiIndex) -> Vec<f64> {
        if alpha.order() == 0 {
            return f.to_vec();
        }
        self.inverse(&self.differentiate_spec(&self.forward(f), alpha))
    }

    /// Zeros the mean and every bin with some `|k_l| > kmax`.
    pub fn truncate(&self, spec: &mut [Complex64], kmax: i64) {
        for (p, c) in spec.iter_mut().enumerate() {
            let k = self.wave(p);
            if (k[0] == 0 && k[1] == 0) || k[0].abs() > kmax || k[1].abs() > kmax {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Largest retained wave number under the two-thirds rule.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.n / 3) as i64
    }

    /// `sum_k sum_{|alpha| <= s} |(2 pi k)^alpha|^2 |f_k|^2`, the squared `H^s(Q)` norm.
    pub fn sobolev_norm_sq(&self, f: &[f64], s: u32) -> f64 {
        let spec = self.forward(f);
        let scale = 1.0 / (self.points() as f64).powi(2);
        let mut total = 0.0;
        for (p, c) in spec.iter().enumerate() {
            let k = self.wave(p);
            let kx = [2.0 * PI * k[0] as f64, 2.0 * PI * k[1] as f64];
            let mut w = 0.0;
            for alpha in crate::tensor::multiindices_up_to(self.d, s) {
                w += alpha.components().iter().enumerate().map(|(l, &a)| kx[l].powi(2 * a as i32)).product::<f64>();
            }
            total += w * c.norm_sqr() * scale;
        }
        total
    }
}

/// Trigonometric interpolant of grid samples, keeping only non-negligible modes.
#[derive(Clone, Debug)]
pub struct TrigInterpolant {
    d: usize,
    /// `(k, c_k)` with `f(y) = sum Re(c_k e^{2 pi i k.y})`, conjugate pairs folded.
    modes: Vec<([i64; 2], Complex64)>,
    mean: f64,
}

impl TrigInterpolant {
    /// Modes below `rel_cutoff` times the largest coefficient are dropped.
    pub fn from_samples(spectral: &Spectral, f: &[f64], rel_cutoff: f64) -> Self {
        let spec = spectral.forward(f);
        let np = spectral.points() as f64;
        let maxc = spec.iter().skip(1).map(|c| c.norm()).fold(0.0, f64::max) / np;
        let mut modes = Vec::new();
        let mut mean = 0.0;
        for (p, c) in spec.iter().enumerate() {
            let k = spectral.wave(p);
            let c = c / np;
            if k == [0, 0] {
                mean = c.re;
                continue;
            }
            // Fold `k` and `-k` into one term with weight 2; Nyquist bins are their own partner.
            let nyq = |kk: i64| spectral.is_nyquist(kk);
            let self_paired = (k[0] == 0 || nyq(k[0])) && (k[1] == 0 || nyq(k[1]));
            let canonical = if nyq(k[1]) { k[0] > 0 } else { k[1] > 0 || (k[1] == 0 && k[0] > 0) };
            if !canonical && !self_paired {
                continue;
            }
            if c.norm() <= rel_cutoff * maxc {
                continue;
            }
            let w = if self_paired { 1.0 } else { 2.0 };
            modes.push((k, c * w));
        }
        Self { d: spectral.d(), modes, mean }
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    /// Derivatives `D^alpha f(y)` for every `alpha` in `alphas`.
    pub fn eval_derivatives(&self, y: &[f64], alphas: &[MultiIndex], out: &mut [f64]) {
        out.fill(0.0);
        for (slot, a) in alphas.iter().enumerate() {
            if a.order() == 0 {
                out[slot] = self.mean;
            }
        }
        let y1 = if self.d == 2 { y[1] } else { 0.0 };
        for &(k, c) in &self.modes {
            let phase = 2.0 * PI * (k[0] as f64 * y[0] + k[1] as f64 * y1);
            let e = Complex64::from_polar(1.0, phase) * c;
            for (slot, a) in alphas.iter().enumerate() {
                let mut s = Complex64::new(1.0, 0.0);
                for (l, &al) in a.components().iter().enumerate() {
                    if al > 0 {
                        s *= Complex64::new(0.0, 2.0 * PI * k[l] as f64).powu(al);
                    }
                }
                out[slot] += (e * s).re;
            }
        }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let mut out = [0.0];
        self.eval_derivatives(y, &[MultiIndex::zero(self.d)], &mut out);
        out[0]
    }
}
