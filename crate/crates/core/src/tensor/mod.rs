//! Multi-indices, coefficient tensors, periodic fields and polynomial projection.

pub mod coeff;
pub mod field;
pub mod multiindex;
pub mod polynomial;

pub use coeff::CoefficientTensor;
pub use field::{
    builtin_field, EllipticityReport, FieldSpec, FourierEntry, HolderModulus, PeriodicCoefficientField, SampledField,
    TrigMode, TrigSeries, VmoModulus,
};
pub use multiindex::{
    binomial, count_of_order, count_up_to, enumerate_multiindices, graded_position, multiindices_up_to, MultiIndex,
};
pub use polynomial::{project_polynomial, PolynomialElement, RegionSamples};
