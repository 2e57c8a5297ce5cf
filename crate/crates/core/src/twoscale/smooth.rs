use super::kernel::{KernelTable, MollifierKernel, TABLE_ORDER};
use crate::bvp::DiscreteField;
use crate::error::{Error, Result};
use crate::func::{AnalyticField, FieldJet};
use crate::tensor::multiindices_up_to;
use std::sync::Arc;

/// How a discrete field is continued outside its mesh.
#[derive(Clone, Debug)]
pub enum Extension {
    /// No continuation: leaving the mesh is an error.
    None,
    Zero,
    /// Continue by a smooth ambient field, typically the boundary data `G`.
    Field(AnalyticField),
}

/// Values to be smoothed: an analytic field, or a discrete field (or one of its derivatives).
#[derive(Clone, Debug)]
pub enum Source {
    Analytic(AnalyticField),
    Discrete { field: DiscreteField, ext: Extension },
    /// Derivative `D^gamma` of a discrete field, `gamma` given by its graded position.
    DiscreteDerivative { field: DiscreteField, order: u32, slot: usize, ext: Extension },
}

impl Source {
    pub fn n(&self) -> usize {
        match self {
            Source::Analytic(f) => f.n(),
            Source::Discrete { field, .. } | Source::DiscreteDerivative { field, .. } => field.n,
        }
    }

    pub fn d(&self) -> usize {
        match self {
            Source::Analytic(f) => f.d,
            Source::Discrete { field, .. } | Source::DiscreteDerivative { field, .. } => field.mesh.d(),
        }
    }

    /// Adds `w * f(y)` into `out`.
    fn accumulate(&self, y: &[f64], w: &[f64], out: &mut [f64], buf: &mut [f64]) -> Result<()> {
        let n = self.n();
        let (field, ext, order, slot) = match self {
            Source::Analytic(f) => {
                let v = f.value(y);
                for (k, wk) in w.iter().enumerate() {
                    for i in 0..n {
                        out[k * n + i] += wk * v[i];
                    }
                }
                return Ok(());
            }
            Source::Discrete { field, ext } => (field, ext, 0, 0),
            Source::DiscreteDerivative { field, order, slot, ext } => (field, ext, *order, *slot),
        };
        match field.mesh.locate(y) {
            Some((c, xi)) => {
                field.jet_in_cell(c, &xi, y, order, buf);
                for (k, wk) in w.iter().enumerate() {
                    for i in 0..n {
                        out[k * n + i] += wk * buf[slot * n + i];
                    }
                }
            }
            None => match ext {
                Extension::None => {
                    return Err(Error::SupportUnavailable(format!("{y:?} lies outside the mesh and no extension is given")))
                }
                Extension::Zero => {}
                Extension::Field(g) => {
                    let pos = multiindices_up_to(g.d, order)[slot].clone();
                    let v = g.derivative(&pos, y);
                    for (k, wk) in w.iter().enumerate() {
                        for i in 0..n {
                            out[k * n + i] += wk * v[i];
                        }
                    }
                }
            },
        }
        Ok(())
    }
}

/// `S_eps f` or `S_eps^2 f`, evaluated lazily by kernel quadrature together with derivatives up to order 2.
#[derive(Clone, Debug)]
pub struct SmoothedField {
    pub source: Source,
    pub eps: f64,
    pub twice: bool,
    kernel: Arc<MollifierKernel>,
}

/// `S_eps f`; `S_eps^2 f` when `twice`.
pub fn smooth(source: Source, eps: f64, twice: bool, kernel: Arc<MollifierKernel>) -> Result<SmoothedField> {
    if eps <= 0.0 {
        return Err(Error::InvalidInput("smoothing scale must be positive".into()));
    }
    if kernel.d != source.d() {
        return Err(Error::InvalidInput("kernel and field dimensions differ".into()));
    }
    Ok(SmoothedField { source, eps, twice, kernel })
}

impl SmoothedField {
    fn table(&self) -> &KernelTable {
        if self.twice {
            &self.kernel.double
        } else {
            &self.kernel.single
        }
    }

    /// Support radius of the kernel in physical units.
    pub fn reach(&self) -> f64 {
        self.eps * self.table().radius
    }

    pub fn try_jet(&self, x: &[f64], order: u32, out: &mut [f64]) -> Result<()> {
        assert!(order <= TABLE_ORDER);
        let d = self.kernel.d;
        let n = self.source.n();
        let t = self.table();
        let ntau = multiindices_up_to(d, order).len();
        out[..ntau * n].fill(0.0);
        let mut buf = vec![0.0; 6 * n];
        let mut w = vec![0.0; ntau];
        let mut y = [0.0; 2];
        for (q, z) in t.nodes.iter().enumerate() {
            for k in 0..d {
                y[k] = x[k] - self.eps * z[k];
            }
            for (s, wk) in w.iter_mut().enumerate() {
                *wk = t.weights[s][q];
            }
            self.source.accumulate(&y[..d], &w, out, &mut buf)?;
        }
        let idx = multiindices_up_to(d, order);
        for (s, a) in idx.iter().enumerate() {
            let f = self.eps.powi(-(a.order() as i32));
            for v in &mut out[s * n..(s + 1) * n] {
                *v *= f;
            }
        }
        Ok(())
    }
}

impl FieldJet for SmoothedField {
    fn d(&self) -> usize {
        self.kernel.d
    }

    fn n(&self) -> usize {
        self.source.n()
    }

    fn max_order(&self) -> u32 {
        TABLE_ORDER
    }

    fn jet(&self, x: &[f64], order: u32, out: &mut [f64]) {
        self.try_jet(x, order, out).unwrap_or_else(|e| panic!("smoothing failed: {e}"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::Term;
    use crate::geometry::{build_mesh, GraphDomain};

    #[test]
    fn constants_and_affine_fields_are_preserved() {
        for d in [1usize, 2] {
            let k = Arc::new(MollifierKernel::new(d));
            let x1: &[u32] = if d == 1 { &[1] } else { &[1, 0] };
            let terms = vec![Term::monomial(2.5, &[]), Term::monomial(-1.5, x1)];
            let f = AnalyticField::scalar(d, terms);
            for twice in [false, true] {
                let s = smooth(Source::Analytic(f.clone()), 0.1, twice, k.clone()).unwrap();
                let x = [0.31, 0.2];
                let mut j = vec![0.0; multiindices_up_to(d, 2).len()];
                s.jet(&x[..d], 2, &mut j);
                assert!((j[0] - f.value(&x[..d])[0]).abs() < 1e-12);
                let dx = crate::tensor::graded_position(&crate::tensor::MultiIndex::unit(d, 0));
                assert!((j[dx] + 1.5).abs() < 1e-9, "{}", j[dx]);
            }
        }
        let k = Arc::new(MollifierKernel::new(1));
        let c = smooth(Source::Analytic(AnalyticField::constant(1, &[3.0])), 0.2, false, k).unwrap();
        assert!((c.value(&[0.4])[0] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn sine_smoothing_error_is_order_eps() {
        // ||S_eps f - f||_{L2(0,1)} / (eps ||f'||_{L2(0,1)}) for f = sin(2 pi x).
        let k = Arc::new(MollifierKernel::new(1));
        let w = 2.0 * std::f64::consts::PI;
        let f = AnalyticField::scalar(1, vec![Term::sine(1.0, 1, 0, w)]);
        let eps = 0.1;
        let s = smooth(Source::Analytic(f), eps, false, k).unwrap();
        let (xs, ws) = crate::quadrature::composite(0.0, 1.0, 64, 6);
        let err: f64 = xs.iter().zip(&ws).map(|(x, q)| q * (s.value(&[*x])[0] - (w * x).sin()).powi(2)).sum::<f64>().sqrt();
        let grad = w / 2f64.sqrt();
        let ratio = err / (eps * grad);
        assert!(ratio <= 1.2, "{ratio}");
        assert!(ratio > 0.0);
    }

    #[test]
    fn leaving_the_mesh_needs_an_extension() {
        let mesh = Arc::new(build_mesh(&GraphDomain::interval(1.0), 1.0 / 32.0, 1).unwrap());
        let u = DiscreteField::interpolate(mesh, &AnalyticField::scalar(1, vec![Term::monomial(1.0, &[1])]));
        let k = Arc::new(MollifierKernel::new(1));
        let s = smooth(Source::Discrete { field: u.clone(), ext: Extension::None }, 0.1, false, k.clone()).unwrap();
        let mut v = [0.0];
        assert!(matches!(s.try_jet(&[0.02], 0, &mut v), Err(Error::SupportUnavailable(_))));
        s.try_jet(&[0.5], 0, &mut v).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-12);
        let g = AnalyticField::scalar(1, vec![Term::monomial(1.0, &[1])]);
        let s = smooth(Source::Discrete { field: u, ext: Extension::Field(g) }, 0.1, true, k).unwrap();
        s.try_jet(&[0.02], 0, &mut v).unwrap();
        assert!((v[0] - 0.02).abs() < 1e-12);
    }
}
