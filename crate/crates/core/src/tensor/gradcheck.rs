//! Finite-difference verification of analytic gradients.
//!
//! The checker perturbs one parameter coordinate at a time, re-evaluates a
//! scalar loss function, and compares the central difference against the
//! analytic gradient. It is meant for tests at small dimensions, where
//! exhaustively sweeping every coordinate is affordable.

use super::store::{GradStore, ParamId, ParamStore};

/// Relative error with an absolute floor of 1, so tiny gradients are compared
/// absolutely and large ones relatively.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / f64::max(1.0, f64::max(a.abs(), b.abs()))
}

/// Central difference of `f` w.r.t. coordinate (i, j) of parameter `id`.
pub fn central_difference(
    store: &ParamStore,
    id: ParamId,
    i: usize,
    j: usize,
    h: f64,
    mut f: impl FnMut(&ParamStore) -> f64,
) -> f64 {
    let mut plus = store.clone();
    let base = plus.value(id).get(i, j);
    plus.value_mut(id).set(i, j, base + h);
    let f_plus = f(&plus);
    let mut minus = store.clone();
    minus.value_mut(id).set(i, j, base - h);
    let f_minus = f(&minus);
    (f_plus - f_minus) / (2.0 * h)
}

/// Result of sweeping every coordinate of every parameter.
#[derive(Debug)]
pub struct GradCheckReport {
    /// Worst relative error observed.
    pub max_rel_err: f64,
    /// (parameter name, row, col, analytic, numeric) of the worst coordinate.
    pub worst: Option<(String, usize, usize, f64, f64)>,
    /// Total coordinates checked.
    pub coordinates: usize,
}

/// Compare `analytic` gradients against central differences of `f` for every
/// coordinate of every parameter in the store.
pub fn check_all_params(
    store: &ParamStore,
    analytic: &GradStore,
    h: f64,
    mut f: impl FnMut(&ParamStore) -> f64,
) -> GradCheckReport {
    let mut report = GradCheckReport { max_rel_err: 0.0, worst: None, coordinates: 0 };
    let ids: Vec<ParamId> = store.iter().map(|(id, _, _)| id).collect();
    for id in ids {
        let (rows, cols) = store.value(id).shape();
        for i in 0..rows {
            for j in 0..cols {
                let numeric = central_difference(store, id, i, j, h, &mut f);
                let a = analytic.get(id).get(i, j);
                let err = relative_error(a, numeric);
                report.coordinates += 1;
                if err > report.max_rel_err {
                    report.max_rel_err = err;
                    report.worst =
                        Some((store.name(id).to_string(), i, j, a, numeric));
                }
            }
        }
    }
    report
}
