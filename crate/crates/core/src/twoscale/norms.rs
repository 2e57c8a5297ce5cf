//! Discrete norms over mesh quadrature, restricted to regions.

use crate::error::{Error, Result};
use crate::func::{jet_len, jet_tensor_norm, FieldJet};
use crate::geometry::Mesh;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const HOLDER_PAIRS: usize = 10_000;
pub const HOLDER_SEED: u64 = 0x401d_e5;

/// Subsets of the computational domain on which norms are taken.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Region {
    All,
    /// `D_r`: `|x'| < r`, `0 < x_d - psi(x') < r`.
    Sub { r: f64 },
    /// `Omega^t = {delta > t}`.
    Inner { t: f64 },
    /// `Omega_t = {delta < t}`.
    Collar { t: f64 },
    /// `{s < delta < t}`.
    Shell { s: f64, t: f64 },
    /// `B(center, r)` intersected with the domain.
    Ball { center: [f64; 2], r: f64 },
    /// `D_r` intersected with `Omega^t`.
    SubInner { r: f64, t: f64 },
}

impl Region {
    pub fn contains(&self, mesh: &Mesh, x: &[f64]) -> bool {
        let delta = || mesh.domain.nearest_boundary_point(x).0;
        match *self {
            Region::All => true,
            Region::Sub { r } => mesh.in_sub(x, r),
            Region::Inner { t } => delta() > t,
            Region::Collar { t } => delta() < t,
            Region::Shell { s, t } => {
                let dl = delta();
                dl > s && dl < t
            }
            Region::Ball { center, r } => {
                let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum();
                d2 < r * r
            }
            Region::SubInner { r, t } => mesh.in_sub(x, r) && delta() > t,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Region::All => "domain".into(),
            Region::Sub { r } => format!("D_{r}"),
            Region::Inner { t } => format!("inner_{t}"),
            Region::Collar { t } => format!("collar_{t}"),
            Region::Shell { s, t } => format!("shell_{s}_{t}"),
            Region::Ball { center, r } => format!("ball_{}_{}_{r}", center[0], center[1]),
            Region::SubInner { r, t } => format!("D_{r}^inner_{t}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NormKind {
    L2,
    Lp { p: f64 },
    LInf,
    /// `(sum_{|alpha| <= s} ||D^alpha f||^2)^{1/2}`.
    Hs { s: u32 },
    /// `|nabla^j f|` in `L^p`, with the full-tensor Frobenius norm.
    GradLp { j: u32, p: f64 },
    GradLInf { j: u32 },
    /// `(int |f|^2 delta)^{1/2}`.
    L2Delta,
    /// `(int |f|^2 / delta)^{1/2}`.
    L2InvDelta,
    /// Sampled `sup |f(x) - f(y)| / |x - y|^sigma`, a lower bound.
    Holder { sigma: f64 },
    /// `sum_{j <= m} sup |nabla^j f|`: the `C^{m-1,1}` norm of smooth data.
    CLipData { m: u32 },
    /// `sum_{j <= m} sup |nabla^j f| + [nabla^m f]_{C^{0,sigma}}`.
    CHolderData { m: u32, sigma: f64 },
}

impl NormKind {
    fn order(&self) -> u32 {
        match *self {
            NormKind::Hs { s } => s,
            NormKind::GradLp { j, .. } | NormKind::GradLInf { j } => j,
            NormKind::CLipData { m } | NormKind::CHolderData { m, .. } => m,
            _ => 0,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            NormKind::L2 => "L2".into(),
            NormKind::Lp { p } => format!("L{p}"),
            NormKind::LInf => "Linf".into(),
            NormKind::Hs { s } => format!("H{s}"),
            NormKind::GradLp { j, p } => format!("grad{j}_L{p}"),
            NormKind::GradLInf { j } => format!("grad{j}_Linf"),
            NormKind::L2Delta => "L2_delta".into(),
            NormKind::L2InvDelta => "L2_inv_delta".into(),
            NormKind::Holder { sigma } => format!("C0,{sigma}"),
            NormKind::CLipData { m } => format!("C{},1", m.saturating_sub(1)),
            NormKind::CHolderData { m, sigma } => format!("C{m},{sigma}"),
        }
    }
}

/// Quadrature points of `mesh` inside `region`: `(cell, xi, x, weight)`.
pub fn region_points(mesh: &Mesh, region: &Region) -> Vec<(usize, [f64; 2], [f64; 2], f64)> {
    let d = mesh.d();
    let rule = mesh.reference_rule();
    let mut out = Vec::new();
    for c in 0..mesh.n_cells() {
        let map = mesh.cell_map(c);
        for (xi, w) in &rule {
            let x = map.map(xi);
            if region.contains(mesh, &x[..d]) {
                out.push((c, *xi, x, w * map.det));
            }
        }
    }
    out
}

/// Norm of `f` over `region`; `average` replaces integrals by averages `(1/|R|) int`.
pub fn norm(f: &dyn FieldJet, mesh: &Mesh, kind: NormKind, region: &Region, average: bool) -> Result<f64> {
    let pts = region_points(mesh, region);
    norm_on(f, mesh, kind, &pts, average)
}

pub fn norm_on(
    f: &dyn FieldJet,
    mesh: &Mesh,
    kind: NormKind,
    pts: &[(usize, [f64; 2], [f64; 2], f64)],
    average: bool,
) -> Result<f64> {
    use rayon::prelude::*;
    let d = mesh.d();
    let n = f.n();
    let order = kind.order();
    if order > f.max_order() {
        return Err(Error::InvalidInput(format!("{} needs derivatives of order {order}", kind.label())));
    }
    if pts.is_empty() {
        return Ok(0.0);
    }
    let measure: f64 = pts.iter().map(|p| p.3).sum();
    let scale = if average { 1.0 / measure } else { 1.0 };
    let len = jet_len(d, n, order);
    let eval = |p: &(usize, [f64; 2], [f64; 2], f64)| -> Vec<f64> {
        let mut jet = vec![0.0; len];
        f.jet_in_cell(p.0, &p.1, &p.2[..d], order, &mut jet);
        jet
    };
    let value = |jet: &[f64]| -> f64 { jet[..n].iter().map(|v| v * v).sum::<f64>().sqrt() };
    let integral = |g: &(dyn Fn(&(usize, [f64; 2], [f64; 2], f64), &[f64]) -> f64 + Sync)| -> f64 {
        pts.par_iter().map(|p| p.3 * g(p, &eval(p))).collect::<Vec<f64>>().iter().sum::<f64>() * scale
    };
    let sup = |g: &(dyn Fn(&[f64]) -> f64 + Sync)| -> f64 {
        pts.par_iter().map(|p| g(&eval(p))).reduce(|| 0.0, f64::max)
    };
    let delta = |x: &[f64]| mesh.domain.nearest_boundary_point(x).0;
    Ok(match kind {
        NormKind::L2 => integral(&|_, j| value(j).powi(2)).sqrt(),
        NormKind::Lp { p } => integral(&|_, j| value(j).powf(p)).powf(1.0 / p),
        NormKind::LInf => sup(&|j| value(j)),
        NormKind::Hs { .. } => integral(&|_, j| j.iter().map(|v| v * v).sum()).sqrt(),
        NormKind::GradLp { j: k, p } => integral(&|_, j| jet_tensor_norm(d, n, j, k).powf(p)).powf(1.0 / p),
        NormKind::GradLInf { j: k } => sup(&|j| jet_tensor_norm(d, n, j, k)),
        NormKind::L2Delta => integral(&|p, j| value(j).powi(2) * delta(&p.2[..d])).sqrt(),
        NormKind::L2InvDelta => {
            if pts.iter().any(|p| delta(&p.2[..d]) < 1e-14) {
                return Err(Error::WeightUnavailable);
            }
            integral(&|p, j| value(j).powi(2) / delta(&p.2[..d])).sqrt()
        }
        NormKind::Holder { sigma } => holder_seminorm(pts, d, sigma, |x, out| {
            let mut jet = vec![0.0; n];
            f.jet(x, 0, &mut jet);
            out.copy_from_slice(&jet);
        }, n),
        NormKind::CLipData { m } => (0..=m).map(|k| sup(&|j| jet_tensor_norm(d, n, j, k))).sum(),
        NormKind::CHolderData { m, sigma } => {
            let lip: f64 = (0..=m).map(|k| sup(&|j| jet_tensor_norm(d, n, j, k))).sum();
            lip + gradient_holder_seminorm(f, pts, d, m, sigma)
        }
    })
}

/// Sampled `[nabla^m f]_{C^{0,sigma}}` with the full-tensor norm.
pub fn gradient_holder_seminorm(f: &dyn FieldJet, pts: &[(usize, [f64; 2], [f64; 2], f64)], d: usize, m: u32, sigma: f64) -> f64 {
    let n = f.n();
    let top: Vec<_> = crate::tensor::multiindices_up_to(d, m).into_iter().filter(|a| a.order() == m).collect();
    let ntop = top.len();
    let len = jet_len(d, n, m);
    let start = len - ntop * n;
    // Scale components by sqrt(m!/alpha!) so the Euclidean norm is the tensor norm.
    let weights: Vec<f64> = top.iter().map(|a| (f64::from((1..=m).product::<u32>()) / a.factorial()).sqrt()).collect();
    let mut jet = vec![0.0; len];
    holder_seminorm(
        pts,
        d,
        sigma,
        |x, out| {
            f.jet(x, m, &mut jet);
            for (t, w) in weights.iter().enumerate() {
                for i in 0..n {
                    out[t * n + i] = w * jet[start + t * n + i];
                }
            }
        },
        ntop * n,
    )
}

/// Sampled Hölder seminorm: random pairs of quadrature points, half of them at short range.
pub fn holder_seminorm(
    pts: &[(usize, [f64; 2], [f64; 2], f64)],
    d: usize,
    sigma: f64,
    mut eval: impl FnMut(&[f64], &mut [f64]),
    width: usize,
) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(HOLDER_SEED);
    let mut a = vec![0.0; width];
    let mut b = vec![0.0; width];
    let mut best = 0.0f64;
    let npts = pts.len();
    for k in 0..HOLDER_PAIRS {
        let i = rng.random_range(0..npts);
        let j = if k % 2 == 0 {
            rng.random_range(0..npts)
        } else {
            // a nearby point in the sample ordering, which follows the mesh cells
            let off = rng.random_range(1..=8usize.min(npts - 1));
            (i + off) % npts
        };
        let (x, y) = (&pts[i].2[..d], &pts[j].2[..d]);
        let dist: f64 = x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        if dist < 1e-14 {
            continue;
        }
        eval(x, &mut a);
        eval(y, &mut b);
        let diff: f64 = a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        best = best.max(diff / dist.powf(sigma));
    }
    best
}

/// Measure of a region under mesh quadrature.
pub fn region_measure(mesh: &Mesh, region: &Region) -> f64 {
    region_points(mesh, region).iter().map(|p| p.3).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvp::DiscreteField;
    use crate::func::{AnalyticField, Term};
    use crate::geometry::{build_mesh, GraphDomain};
    use std::sync::Arc;

    fn unit_mesh() -> Arc<Mesh> {
        Arc::new(build_mesh(&GraphDomain::interval(1.0), 1.0 / 64.0, 1).unwrap())
    }

    #[test]
    fn weighted_and_sobolev_examples() {
        let mesh = unit_mesh();
        let one = AnalyticField::constant(1, &[1.0]);
        let v = norm(&one, &mesh, NormKind::L2Delta, &Region::All, false).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        let x = DiscreteField::interpolate(mesh.clone(), &AnalyticField::scalar(1, vec![Term::monomial(1.0, &[1])]));
        let h1 = norm(&x, &mesh, NormKind::Hs { s: 1 }, &Region::All, false).unwrap();
        assert!((h1 - (4.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let zero = AnalyticField::zero(1, 1);
        for kind in [NormKind::L2, NormKind::LInf, NormKind::Hs { s: 1 }, NormKind::L2InvDelta, NormKind::Holder { sigma: 0.5 }, NormKind::CLipData { m: 1 }] {
            assert_eq!(norm(&zero, &mesh, kind, &Region::All, false).unwrap(), 0.0);
        }
    }

    #[test]
    fn averages_and_regions() {
        let mesh = unit_mesh();
        let x2 = AnalyticField::scalar(1, vec![Term::monomial(1.0, &[2])]);
        // average of x^4 over (0, 1/4) is (1/4)^4 / 5
        let v = norm(&x2, &mesh, NormKind::L2, &Region::Sub { r: 0.25 }, true).unwrap();
        assert!((v - (0.25f64.powi(4) / 5.0).sqrt()).abs() < 1e-7, "{v}");
        assert!((region_measure(&mesh, &Region::Collar { t: 0.125 }) - 0.25).abs() < 1e-12);
        let lip = norm(&x2, &mesh, NormKind::CLipData { m: 2 }, &Region::All, false).unwrap();
        // sup x^2 + sup 2x + sup 2 over quadrature points
        assert!((lip - 5.0).abs() < 0.05);
        let sqrt = AnalyticField::scalar(1, vec![Term::monomial(1.0, &[1])]);
        let semi = norm(&sqrt, &mesh, NormKind::Holder { sigma: 1.0 }, &Region::All, false).unwrap();
        assert!((semi - 1.0).abs() < 1e-9);
    }
}
