//! Periodic cell problems: correctors, effective tensor, flux tensor and dual correctors.

mod cache;

pub use cache::{cache_key, clear_cache, load_or_solve, CacheOutcome};

use crate::error::{Error, Result};
use crate::linalg::{bicgstab, pcg, KrylovOptions, LinearOperator, Preconditioner};
use crate::spectral::{Spectral, TrigInterpolant};
use crate::tensor::{enumerate_multiindices, CoefficientTensor, MultiIndex, PeriodicCoefficientField, SampledField};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const CELL_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellOptions {
    /// Grid points per axis; `None` uses the field's own resolution.
    pub resolution: Option<usize>,
    pub tol: f64,
}

impl Default for CellOptions {
    fn default() -> Self {
        Self { resolution: None, tol: CELL_TOLERANCE }
    }
}

/// Correctors `chi^gamma_{ij}` on the cell grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectorSet {
    pub field_id: String,
    pub fingerprint: String,
    pub d: usize,
    pub n: usize,
    pub m: u32,
    pub resolution: usize,
    pub adjoint: bool,
    pub tol: f64,
    /// Largest relative Galerkin residual over all columns.
    pub residual: f64,
    pub iterations: usize,
    pub mollification_width: Option<f64>,
    /// `chi[g][i * n + j]`: samples of `chi^{gamma_g}_{ij}`.
    pub chi: Vec<Vec<Vec<f64>>>,
}

impl CorrectorSet {
    pub fn indices(&self) -> Vec<MultiIndex> {
        enumerate_multiindices(self.d, self.m)
    }

    pub fn column(&self, g: usize, i: usize, j: usize) -> &[f64] {
        &self.chi[g][i * self.n + j]
    }

    pub fn spectral(&self) -> Spectral {
        Spectral::new(self.d, self.resolution)
    }

    /// Largest `|mean(chi^gamma_{ij})|`.
    pub fn max_mean(&self) -> f64 {
        let p = self.resolution.pow(self.d as u32) as f64;
        self.chi
            .iter()
            .flatten()
            .map(|f| (f.iter().sum::<f64>() / p).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.chi.iter().flatten().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `dchi[b][g][l * n + j] = D^{gamma_g} chi^{beta_b}_{lj}` on the grid.
    pub fn derivatives(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        let sp = self.spectral();
        let idx = self.indices();
        self.chi
            .iter()
            .map(|col| {
                idx.iter()
                    .map(|g| col.iter().map(|f| sp.differentiate(f, g)).collect())
                    .collect()
            })
            .collect()
    }

    /// Trigonometric interpolants `interp[g][i * n + j]` for off-grid evaluation.
    pub fn interpolants(&self) -> Vec<Vec<TrigInterpolant>> {
        let sp = self.spectral();
        self.chi
            .iter()
            .map(|col| col.iter().map(|f| TrigInterpolant::from_samples(&sp, f, 1e-15)).collect())
            .collect()
    }

    fn check_provenance(&self, field: &PeriodicCoefficientField) -> Result<()> {
        let fp = field.fingerprint(self.resolution);
        if fp != self.fingerprint || field.dims() != (self.d, self.n, self.m) {
            return Err(Error::MismatchedCorrectors(format!(
                "correctors were solved for {} ({}), not {}",
                self.field_id,
                &self.fingerprint[..12],
                field.id()
            )));
        }
        Ok(())
    }

    /// Recomputes the relative Galerkin residual against `field`.
    pub fn weak_residual(&self, field: &PeriodicCoefficientField) -> Result<f64> {
        self.check_provenance(field)?;
        let op = CellOperator::new(field, self.resolution);
        let mut worst: f64 = 0.0;
        for (g, col) in self.chi.iter().enumerate() {
            for j in 0..self.n {
                let b = op.rhs(g, j);
                let x: Vec<f64> = (0..self.n).flat_map(|i| col[i * self.n + j].iter().copied()).collect();
                let mut ax = vec![0.0; x.len()];
                LinearOperator::apply(&op, &x, &mut ax);
                let bn = crate::linalg::krylov::norm(&b);
                let r = ax.iter().zip(&b).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
                worst = worst.max(if bn > 0.0 { r / bn } else { r });
            }
        }
        Ok(worst)
    }
}

/// Galerkin operator `phi -> P (-1)^m sum_a D^a (A^{ab} D^b phi)` on mean-zero trigonometric
/// polynomials with `|k_l| <= N/3`, using grid quadrature for the product.
struct CellOperator {
    sp: Spectral,
    n: usize,
    m: u32,
    idx: Vec<MultiIndex>,
    samples: SampledField,
    template: CoefficientTensor,
    kmax: i64,
    /// Per-bin inverse of the mean-coefficient symbol, `n x n` row-major.
    precond: Vec<Option<Vec<Complex64>>>,
}

impl CellOperator {
    fn new(field: &PeriodicCoefficientField, resolution: usize) -> Self {
        let (d, n, m) = field.dims();
        let sp = Spectral::new(d, resolution);
        let samples = field.sample(resolution);
        let mean = samples.mean();
        let idx = enumerate_multiindices(d, m);
        let kmax = sp.dealias_cutoff();
        let scale = (2.0 * PI).powi(2 * m as i32);
        let precond = (0..sp.points())
            .map(|p| {
                let k = sp.wave(p);
                if k == [0, 0] || k[0].abs() > kmax || k[1].abs() > kmax {
                    return None;
                }
                let kf = [k[0] as f64, k[1] as f64];
                let mono = |a: &MultiIndex| -> f64 {
                    a.components().iter().enumerate().map(|(l, &e)| kf[l].powi(e as i32)).product()
                };
                let mut mat = DMatrix::<f64>::zeros(n, n);
                for (a, al) in idx.iter().enumerate() {
                    for (b, be) in idx.iter().enumerate() {
                        let w = scale * mono(al) * mono(be);
                        for i in 0..n {
                            for l in 0..n {
                                mat[(i, l)] += w * mean.at(a, b, i, l);
                            }
                        }
                    }
                }
                let inv = mat.try_inverse()?;
                Some((0..n * n).map(|q| Complex64::new(inv[(q / n, q % n)], 0.0)).collect())
            })
            .collect();
        let template = CoefficientTensor::zeros(d, n, m);
        Self { sp, n, m, idx, samples, template, kmax, precond }
    }

    fn points(&self) -> usize {
        self.sp.points()
    }

    /// Galerkin right side for column `(gamma_g, j)`: `-P (-1)^m sum_a D^a A^{a gamma}_{. j}`.
    fn rhs(&self, g: usize, j: usize) -> Vec<f64> {
        let np = self.points();
        let sign = if self.m % 2 == 0 { -1.0 } else { 1.0 };
        let mut out = vec![0.0; self.n * np];
        for i in 0..self.n {
            let mut acc = vec![Complex64::new(0.0, 0.0); np];
            for (a, al) in self.idx.iter().enumerate() {
                let slot = self.template.offset(a, g, i, j);
                let spec = self.sp.forward(&self.samples.values[slot]);
                for (p, c) in spec.iter().enumerate() {
                    acc[p] += c * self.sp.derivative_symbol(p, al);
                }
            }
            self.sp.truncate(&mut acc, self.kmax);
            let f = self.sp.inverse(&acc);
            for (o, v) in out[i * np..(i + 1) * np].iter_mut().zip(f) {
                *o = sign * v;
            }
        }
        out
    }
}

impl LinearOperator for CellOperator {
    fn dim(&self) -> usize {
        self.n * self.points()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let np = self.points();
        let (n, k) = (self.n, self.idx.len());
        let mut du = vec![vec![0.0; np]; k * n];
        for l in 0..n {
            let mut spec = self.sp.forward(&x[l * np..(l + 1) * np]);
            self.sp.truncate(&mut spec, self.kmax);
            for (b, be) in self.idx.iter().enumerate() {
                du[b * n + l] = self.sp.inverse(&self.sp.differentiate_spec(&spec, be));
            }
        }
        let sign = if self.m % 2 == 0 { 1.0 } else { -1.0 };
        for i in 0..n {
            let mut acc = vec![Complex64::new(0.0, 0.0); np];
            for (a, al) in self.idx.iter().enumerate() {
                let mut sigma = vec![0.0; np];
                for b in 0..k {
                    for l in 0..n {
                        let coeff = &self.samples.values[self.template.offset(a, b, i, l)];
                        let dv = &du[b * n + l];
                        for p in 0..np {
                            sigma[p] += coeff[p] * dv[p];
                        }
                    }
                }
                let spec = self.sp.forward(&sigma);
                for (p, c) in spec.iter().enumerate() {
                    acc[p] += c * self.sp.derivative_symbol(p, al);
                }
            }
            self.sp.truncate(&mut acc, self.kmax);
            let f = self.sp.inverse(&acc);
            for (o, v) in y[i * np..(i + 1) * np].iter_mut().zip(f) {
                *o = sign * v;
            }
        }
    }
}

impl Preconditioner for CellOperator {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let np = self.points();
        let n = self.n;
        let specs: Vec<Vec<Complex64>> = (0..n).map(|l| self.sp.forward(&r[l * np..(l + 1) * np])).collect();
        for i in 0..n {
            let mut out = vec![Complex64::new(0.0, 0.0); np];
            for (p, o) in out.iter_mut().enumerate() {
                if let Some(inv) = &self.precond[p] {
                    *o = (0..n).map(|l| inv[i * n + l] * specs[l][p]).sum();
                }
            }
            z[i * np..(i + 1) * np].copy_from_slice(&self.sp.inverse(&out));
        }
    }
}

fn solve_field(field: &PeriodicCoefficientField, opts: CellOptions, adjoint: bool) -> Result<CorrectorSet> {
    let resolution = opts.resolution.unwrap_or(field.resolution());
    if resolution < 8 {
        return Err(Error::InvalidInput(format!("cell grid needs N >= 8, got {resolution}")));
    }
    field.check_ellipticity(8)?;
    let (d, n, m) = field.dims();
    let op = CellOperator::new(field, resolution);
    let k = op.idx.len();
    let np = op.points();
    let kopts = KrylovOptions { tol: opts.tol, max_iter: 10 * np, op_norm: 0.0 };
    let columns: Vec<(usize, usize)> = (0..k).flat_map(|g| (0..n).map(move |j| (g, j))).collect();
    let solved: Vec<Result<(Vec<f64>, usize, f64)>> = columns
        .par_iter()
        .map(|&(g, j)| {
            if field.is_constant() {
                return Ok((vec![0.0; n * np], 0, 0.0));
            }
            let b = op.rhs(g, j);
            let mut x = vec![0.0; b.len()];
            let stats = if field.is_symmetric() {
                pcg(&op, &op, &b, &mut x, kopts)?
            } else {
                bicgstab(&op, &op, &b, &mut x, kopts)?
            };
            Ok((x, stats.iterations, stats.residual))
        })
        .collect();
    let mut chi = vec![vec![Vec::new(); n * n]; k];
    let (mut iterations, mut residual) = (0, 0.0f64);
    for (&(g, j), res) in columns.iter().zip(solved) {
        let (x, it, r) = res?;
        iterations += it;
        residual = residual.max(r);
        for i in 0..n {
            chi[g][i * n + j] = x[i * np..(i + 1) * np].to_vec();
        }
    }
    Ok(CorrectorSet {
        field_id: field.id().to_string(),
        fingerprint: field.fingerprint(resolution),
        d,
        n,
        m,
        resolution,
        adjoint,
        tol: opts.tol,
        residual,
        iterations,
        mollification_width: field.mollification_width(),
        chi,
    })
}

pub fn solve_correctors(field: &PeriodicCoefficientField, opts: CellOptions) -> Result<CorrectorSet> {
    solve_field(field, opts, false)
}

/// Correctors of `A*`; their provenance is the adjoint field.
pub fn solve_adjoint_correctors(field: &PeriodicCoefficientField, opts: CellOptions) -> Result<CorrectorSet> {
    solve_field(&field.adjoint(), opts, true)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveTensor {
    pub tensor: CoefficientTensor,
    pub field_id: String,
    pub fingerprint: String,
    pub corrector_residual: f64,
}

impl EffectiveTensor {
    /// `(mu_bar, 1/mu_bar)`-style extremes of the form over the given probes.
    pub fn form_range(&self, probes: &[Vec<f64>]) -> (f64, f64) {
        probes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), xi| {
            let q = self.tensor.bilinear(xi, xi) / xi.iter().map(|x| x * x).sum::<f64>();
            (lo.min(q), hi.max(q))
        })
    }
}

/// `Abar^{ab}_{ij} = mean(A^{ab}_{ij} + sum_g A^{ag}_{il} D^g chi^b_{lj})` over the cell grid.
pub fn effective_tensor(field: &PeriodicCoefficientField, chi: &CorrectorSet) -> Result<EffectiveTensor> {
    chi.check_provenance(field)?;
    let flux = corrected_flux(field, chi);
    let np = chi.resolution.pow(chi.d as u32) as f64;
    // Offsetting by the first sample keeps constant slots exact.
    let entries = flux.iter().map(|f| f[0] + f.iter().map(|v| v - f[0]).sum::<f64>() / np).collect();
    Ok(EffectiveTensor {
        tensor: CoefficientTensor::from_entries(chi.d, chi.n, chi.m, entries),
        field_id: chi.field_id.clone(),
        fingerprint: chi.fingerprint.clone(),
        corrector_residual: chi.residual,
    })
}

/// `A + A D chi` per tensor slot on the cell grid.
fn corrected_flux(field: &PeriodicCoefficientField, chi: &CorrectorSet) -> Vec<Vec<f64>> {
    let samples = field.sample(chi.resolution);
    let dchi = chi.derivatives();
    let t = CoefficientTensor::zeros(chi.d, chi.n, chi.m);
    let (k, n) = (t.index_count(), chi.n);
    let mut out = samples.values.clone();
    for a in 0..k {
        for b in 0..k {
            for i in 0..n {
                for j in 0..n {
                    let o = t.offset(a, b, i, j);
                    for g in 0..k {
                        for l in 0..n {
                            let coeff = &samples.values[t.offset(a, g, i, l)];
                            let dv = &dchi[b][g][l * n + j];
                            for (p, v) in out[o].iter_mut().enumerate() {
                                *v += coeff[p] * dv[p];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// `B^{ab}_{ij}(y)` on the cell grid, slot-major in [`CoefficientTensor`] order.
#[derive(Clone, Debug)]
pub struct FluxTensor {
    pub field_id: String,
    pub fingerprint: String,
    pub d: usize,
    pub n: usize,
    pub m: u32,
    pub resolution: usize,
    pub adjoint: bool,
    pub tol: f64,
    /// `L^2(Q)` norm of the coefficient samples, the scale for divergence residuals.
    pub coefficient_norm: f64,
    pub values: Vec<Vec<f64>>,
}

impl FluxTensor {
    pub fn slot(&self, a: usize, b: usize, i: usize, j: usize) -> &[f64] {
        let t = CoefficientTensor::zeros(self.d, self.n, self.m);
        &self.values[t.offset(a, b, i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_mean(&self) -> f64 {
        let np = self.resolution.pow(self.d as u32) as f64;
        self.values.iter().map(|f| (f.iter().sum::<f64>() / np).abs()).fold(0.0, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        let np = self.resolution.pow(self.d as u32) as f64;
        (self.values.iter().flatten().map(|v| v * v).sum::<f64>() / np).sqrt()
    }

    /// `|sum_a D^a B^{ab}| / ((2 pi)^m max(|B|, |A|))` in `L^2(Q)`.
    pub fn divergence_residual(&self) -> f64 {
        let sp = Spectral::new(self.d, self.resolution);
        let t = CoefficientTensor::zeros(self.d, self.n, self.m);
        let idx = enumerate_multiindices(self.d, self.m);
        let np = sp.points();
        let mut total = 0.0;
        for b in 0..idx.len() {
            for i in 0..self.n {
                for j in 0..self.n {
                    let mut acc = vec![Complex64::new(0.0, 0.0); np];
                    for (a, al) in idx.iter().enumerate() {
                        let spec = sp.forward(&self.values[t.offset(a, b, i, j)]);
                        for (p, c) in spec.iter().enumerate() {
                            acc[p] += c * sp.derivative_symbol(p, al);
                        }
                    }
                    total += sp.inverse(&acc).iter().map(|v| v * v).sum::<f64>() / np as f64;
                }
            }
        }
        let scale = (2.0 * PI).powi(self.m as i32) * self.l2_norm().max(self.coefficient_norm);
        if scale > 0.0 {
            total.sqrt() / scale
        } else {
            0.0
        }
    }
}

/// `B = A + A D chi - Abar` on the cell grid.
pub fn flux_tensor(field: &PeriodicCoefficientField, chi: &CorrectorSet, abar: &EffectiveTensor) -> Result<FluxTensor> {
    chi.check_provenance(field)?;
    if abar.fingerprint != chi.fingerprint {
        return Err(Error::MismatchedCorrectors(format!(
            "effective tensor belongs to {}, correctors to {}",
            abar.field_id, chi.field_id
        )));
    }
    let mut values = corrected_flux(field, chi);
    for (v, mean) in values.iter_mut().zip(abar.tensor.entries()) {
        v.iter_mut().for_each(|x| *x -= mean);
    }
    let samples = field.sample(chi.resolution);
    let np = samples.points() as f64;
    let coefficient_norm = (samples.values.iter().flatten().map(|v| v * v).sum::<f64>() / np).sqrt();
    Ok(FluxTensor {
        field_id: chi.field_id.clone(),
        fingerprint: chi.fingerprint.clone(),
        d: chi.d,
        n: chi.n,
        m: chi.m,
        resolution: chi.resolution,
        adjoint: chi.adjoint,
        tol: chi.tol,
        coefficient_norm,
        values,
    })
}

/// Antisymmetric potentials with `sum_g D^g Bfrak^{g a b} = B^{ab}`.
#[derive(Clone, Debug)]
pub struct DualCorrectorSet {
    pub field_id: String,
    pub d: usize,
    pub n: usize,
    pub m: u32,
    pub resolution: usize,
    pub adjoint: bool,
    /// `values[((g * k + a) * k + b) * n * n + i * n + j]`.
    pub values: Vec<Vec<f64>>,
    pub divergence_residual: f64,
    /// Largest pointwise `|sum_g D^g Bfrak^{gab}_{ij} - B^{ab}_{ij}|`.
    pub potential_residual: f64,
    /// `|Bfrak|_{H^m(Q)} / |B|_{L^2(Q)}`, absent when `B = 0`.
    pub hm_bound_ratio: Option<f64>,
}

impl DualCorrectorSet {
    fn k(&self) -> usize {
        enumerate_multiindices(self.d, self.m).len()
    }

    pub fn get(&self, g: usize, a: usize, b: usize, i: usize, j: usize) -> &[f64] {
        let k = self.k();
        let n = self.n;
        &self.values[((g * k + a) * k + b) * n * n + i * n + j]
    }

    /// `max |Bfrak^{gab} + Bfrak^{agb}|` over all entries and grid points.
    pub fn antisymmetry_defect(&self) -> f64 {
        let k = self.k();
        let n = self.n;
        let mut worst: f64 = 0.0;
        for g in 0..k {
            for a in 0..k {
                for b in 0..k {
                    for i in 0..n {
                        for j in 0..n {
                            let x = self.get(g, a, b, i, j);
                            let y = self.get(a, g, b, i, j);
                            worst = x.iter().zip(y).fold(worst, |w, (p, q)| w.max((p + q).abs()));
                        }
                    }
                }
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Builds `Bfrak^{gab} = D^g Phi^{ab} - D^a Phi^{gb}` where `sum_{|g|=m} D^{2g} Phi^{ab} = B^{ab}`.
pub fn dual_correctors(flux: &FluxTensor) -> Result<DualCorrectorSet> {
    let divergence_residual = flux.divergence_residual();
    if divergence_residual > 100.0 * flux.tol {
        return Err(Error::NotDivergenceFree(divergence_residual));
    }
    let (d, n, m) = (flux.d, flux.n, flux.m);
    let sp = Spectral::new(d, flux.resolution);
    let np = sp.points();
    let idx = enumerate_multiindices(d, m);
    let k = idx.len();
    let t = CoefficientTensor::zeros(d, n, m);
    let symbol: Vec<Complex64> = (0..np)
        .map(|p| idx.iter().map(|g| sp.derivative_symbol(p, g).powu(2)).sum())
        .collect();
    // Spectra of Phi^{ab}_{ij} per slot.
    let phi: Vec<Vec<Complex64>> = flux
        .values
        .iter()
        .map(|bv| {
            sp.forward(bv)
                .iter()
                .zip(&symbol)
                .map(|(c, s)| if s.norm() > 0.0 { c / s } else { Complex64::new(0.0, 0.0) })
                .collect()
        })
        .collect();
    let mut values = vec![Vec::new(); k * k * k * n * n];
    let at = |g: usize, a: usize, b: usize, i: usize, j: usize| ((g * k + a) * k + b) * n * n + i * n + j;
    for b in 0..k {
        for i in 0..n {
            for j in 0..n {
                for g in 0..k {
                    values[at(g, g, b, i, j)] = vec![0.0; np];
                    for a in (g + 1)..k {
                        let pa = &phi[t.offset(a, b, i, j)];
                        let pg = &phi[t.offset(g, b, i, j)];
                        let spec: Vec<Complex64> = (0..np)
                            .map(|p| sp.derivative_symbol(p, &idx[g]) * pa[p] - sp.derivative_symbol(p, &idx[a]) * pg[p])
                            .collect();
                        let v = sp.inverse(&spec);
                        values[at(a, g, b, i, j)] = v.iter().map(|x| -x).collect();
                        values[at(g, a, b, i, j)] = v;
                    }
                }
            }
        }
    }
    let mut potential_residual: f64 = 0.0;
    let mut hm_sq = 0.0;
    for a in 0..k {
        for b in 0..k {
            for i in 0..n {
                for j in 0..n {
                    let mut acc = vec![Complex64::new(0.0, 0.0); np];
                    for (g, gi) in idx.iter().enumerate() {
                        let f = &values[at(g, a, b, i, j)];
                        hm_sq += sp.sobolev_norm_sq(f, m);
                        let spec = sp.forward(f);
                        for (p, c) in spec.iter().enumerate() {
                            acc[p] += c * sp.derivative_symbol(p, gi);
                        }
                    }
                    let div = sp.inverse(&acc);
                    let target = &flux.values[t.offset(a, b, i, j)];
                    potential_residual =
                        div.iter().zip(target).fold(potential_residual, |w, (x, y)| w.max((x - y).abs()));
                }
            }
        }
    }
    let bnorm = flux.l2_norm();
    let scale_b = bnorm * bnorm;
    let hm_bound_ratio = if scale_b > 1e-24 { Some((hm_sq / scale_b).sqrt()) } else { None };
    Ok(DualCorrectorSet {
        field_id: flux.field_id.clone(),
        d,
        n,
        m,
        resolution: flux.resolution,
        adjoint: flux.adjoint,
        values,
        divergence_residual,
        potential_residual,
        hm_bound_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{builtin_field, FourierEntry, TrigMode, TrigSeries};

    fn sin1d(m: u32) -> PeriodicCoefficientField {
        builtin_field("sin1d", None, 1, m, None).unwrap()
    }

    #[test]
    fn constant_field_has_zero_correctors() {
        let f = builtin_field("constant", Some(2), 2, 1, Some(1.7)).unwrap();
        let chi = solve_correctors(&f, CellOptions { resolution: Some(16), ..Default::default() }).unwrap();
        assert_eq!(chi.max_abs(), 0.0);
        assert!(chi.residual <= 1e-12);
        let abar = effective_tensor(&f, &chi).unwrap();
        assert!(abar.tensor.max_abs_diff(&f.eval(&[0.0, 0.0])) == 0.0);
    }

    #[test]
    fn sin1d_corrector_derivative_closed_form() {
        let f = sin1d(1);
        let chi = solve_correctors(&f, CellOptions::default()).unwrap();
        let dchi = chi.derivatives();
        let y = 0.25;
        let p = (y * 64.0) as usize;
        let expected = 3f64.sqrt() / 3.0 - 1.0;
        assert!((dchi[0][0][0][p] - expected).abs() < 1e-9, "{}", dchi[0][0][0][p]);
        let abar = effective_tensor(&f, &chi).unwrap();
        assert!((abar.tensor.at(0, 0, 0, 0) - 3f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn fourth_order_corrector_profile() {
        let f = sin1d(2);
        let chi = solve_correctors(&f, CellOptions::default()).unwrap();
        let d2 = &chi.derivatives()[0][0][0];
        for p in (0..64).step_by(7) {
            let y = p as f64 / 64.0;
            let exact = 3f64.sqrt() / (2.0 + (2.0 * PI * y).sin()) - 1.0;
            assert!((d2[p] - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn harmonic_mean_for_random_trig_coefficients() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let modes: Vec<TrigMode> = (1..=3)
                .map(|k| TrigMode { k: vec![k], cos: 0.3 * (rng.random::<f64>() - 0.5), sin: 0.3 * (rng.random::<f64>() - 0.5) })
                .collect();
            let series = TrigSeries { mean: 1.5, modes };
            let e1 = MultiIndex::unit(1, 0);
            let entries = vec![FourierEntry { alpha: e1.clone(), beta: e1, i: 0, j: 0, series: series.clone() }];
            let f = PeriodicCoefficientField::fourier("random", 1, 1, 1, &entries, 0.4).unwrap();
            let chi = solve_correctors(&f, CellOptions::default()).unwrap();
            let abar = effective_tensor(&f, &chi).unwrap().tensor.at(0, 0, 0, 0);
            // Oracle: harmonic mean by composite Simpson on a fine grid.
            let q = 20_000;
            let h = 1.0 / q as f64;
            let inv: f64 = (0..=q)
                .map(|s| {
                    let w = if s == 0 || s == q { 1.0 } else if s % 2 == 1 { 4.0 } else { 2.0 };
                    w / series.eval(&[s as f64 * h])
                })
                .sum::<f64>()
                * h
                / 3.0;
            assert!((abar - 1.0 / inv).abs() < 1e-7, "{abar} vs {}", 1.0 / inv);
        }
    }

    #[test]
    fn laminate_flux_and_dual_correctors() {
        let f = builtin_field("laminate2d", None, 1, 1, None).unwrap();
        let chi = solve_correctors(&f, CellOptions::default()).unwrap();
        let abar = effective_tensor(&f, &chi).unwrap();
        let e1 = MultiIndex::unit(2, 0);
        let e2 = MultiIndex::unit(2, 1);
        assert!((abar.tensor.get(&e1, &e1, 0, 0).unwrap() - 3f64.sqrt()).abs() < 1e-8);
        assert!((abar.tensor.get(&e2, &e2, 0, 0).unwrap() - 2.0).abs() < 1e-8);
        let b = flux_tensor(&f, &chi, &abar).unwrap();
        assert!(b.max_mean() < 1e-12);
        assert!(b.divergence_residual() < 1e-9);
        let idx = enumerate_multiindices(2, 1);
        let a1 = idx.iter().position(|x| *x == e1).unwrap();
        let a2 = idx.iter().position(|x| *x == e2).unwrap();
        assert!(b.slot(a1, a1, 0, 0).iter().all(|v| v.abs() < 1e-8));
        for (p, v) in b.slot(a2, a2, 0, 0).iter().enumerate() {
            let y1 = (p % 64) as f64 / 64.0;
            assert!((v - (2.0 * PI * y1).sin()).abs() < 1e-8);
        }
        let dual = dual_correctors(&b).unwrap();
        assert_eq!(dual.antisymmetry_defect(), 0.0);
        assert!(dual.potential_residual < 1e-8);
    }

    #[test]
    fn adjoint_duality_on_skew_field() {
        let f = builtin_field("skew-laminate2d", None, 1, 1, None).unwrap();
        let opts = CellOptions { resolution: Some(32), ..Default::default() };
        let chi = solve_correctors(&f, opts).unwrap();
        let chis = solve_adjoint_correctors(&f, opts).unwrap();
        let abar = effective_tensor(&f, &chi).unwrap();
        let abars = effective_tensor(&f.adjoint(), &chis).unwrap();
        assert!(abars.tensor.max_abs_diff(&abar.tensor.transpose()) < 1e-8);
        assert!(matches!(effective_tensor(&f, &chis), Err(Error::MismatchedCorrectors(_))));
        // Transpose-then-solve oracle.
        let t = PeriodicCoefficientField::fourier(
            "transposed",
            2,
            1,
            1,
            &[
                entry(0, 0, 2.0, [1, 0], 0.0, 1.0),
                entry(1, 1, 2.0, [1, 0], 0.0, 1.0),
                entry(0, 1, 0.0, [0, 1], -0.5, 0.0),
                entry(1, 0, 0.0, [0, 1], 0.5, 0.0),
            ],
            1.0 / 3.0,
        )
        .unwrap();
        let chit = solve_correctors(&t, opts).unwrap();
        for g in 0..2 {
            let diff = chit.column(g, 0, 0).iter().zip(chis.column(g, 0, 0)).fold(0.0f64, |w, (a, b)| w.max((a - b).abs()));
            assert!(diff < 1e-9);
        }
    }

    fn entry(a: usize, b: usize, mean: f64, k: [i32; 2], cos: f64, sin: f64) -> FourierEntry {
        let e = [MultiIndex::unit(2, 0), MultiIndex::unit(2, 1)];
        FourierEntry {
            alpha: e[a].clone(),
            beta: e[b].clone(),
            i: 0,
            j: 0,
            series: TrigSeries { mean, modes: vec![TrigMode { k: k.to_vec(), cos, sin }] },
        }
    }
}
