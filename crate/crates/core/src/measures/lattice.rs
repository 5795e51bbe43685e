use super::cdf::IntegratedCdf;
use super::hull::convex_envelope;
use super::{Distribution, MeasureError};

const MEAN_TOL: f64 = 1e-9;

fn check_means(f: &Distribution, g: &Distribution) -> Result<(), MeasureError> {
    let (a, b) = (f.mean(), g.mean());
    if (a - b).abs() > MEAN_TOL {
        return Err(MeasureError::MeanMismatch(a, b));
    }
    Ok(())
}

/// Least upper bound in the informativeness order: the distribution whose
/// integrated CDF is `max(C_F, C_G)`.
pub fn join(f: &Distribution, g: &Distribution) -> Result<Distribution, MeasureError> {
    check_means(f, g)?;
    let (cf, cg) = (f.integrated_cdf(), g.integrated_cdf());
    IntegratedCdf::from_piecewise(cf.as_piecewise().pointwise(cg.as_piecewise(), true)).to_distribution()
}

/// Greatest lower bound: the convex envelope of `min(C_F, C_G)`.
pub fn meet(f: &Distribution, g: &Distribution) -> Result<Distribution, MeasureError> {
    check_means(f, g)?;
    let (cf, cg) = (f.integrated_cdf(), g.integrated_cdf());
    let low = cf.as_piecewise().pointwise(cg.as_piecewise(), false);
    IntegratedCdf::from_piecewise(convex_envelope(&low)).to_distribution()
}
