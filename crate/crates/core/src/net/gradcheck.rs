//! Central-difference verification of analytic gradients.

/// Result of comparing analytic and numerical gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub coordinates_checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// Step size for central differences.
pub const STEP: f64 = 1e-5;
/// Coordinates checked when the parameter vector is larger.
pub const MAX_COORDS: usize = 512;
/// Denominator floor so coordinates with vanishing gradient are compared
/// absolutely.
const FLOOR: f64 = 1e-6;

/// Compares the gradient returned by `f` at `params` with central
/// differences of its loss. Up to [`MAX_COORDS`] evenly strided
/// coordinates are checked.
pub fn grad_check<F>(f: F, params: &[f64]) -> GradCheckReport
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(params);
    assert_eq!(analytic.len(), params.len(), "gradient length");
    let stride = params.len().div_ceil(MAX_COORDS).max(1);
    let mut probe = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        coordinates_checked: 0,
    };
    for i in (0..params.len()).step_by(stride) {
        probe[i] = params[i] + STEP;
        let up = f(&probe).0;
        probe[i] = params[i] - STEP;
        let down = f(&probe).0;
        probe[i] = params[i];
        let numeric = (up - down) / (2.0 * STEP);
        let denom = analytic[i].abs().max(numeric.abs()).max(FLOOR);
        let rel = (analytic[i] - numeric).abs() / denom;
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_index = i;
        }
        report.coordinates_checked += 1;
    }
    report
}
