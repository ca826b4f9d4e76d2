use crate::diffcore::params::ParamStore;
use crate::diffcore::tape::{Tape, Var};

/// Denominator floor for relative errors, so near-zero gradients are judged
/// on absolute error instead.
pub const REL_ERROR_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct Mismatch {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
    /// Entries whose relative error exceeds the tolerance.
    pub failures: Vec<Mismatch>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares the tape gradient of `loss` with central differences for every
/// value in `store`. `loss` must be deterministic and return a scalar node.
/// The store's gradients are left zeroed.
pub fn grad_check<F>(store: &mut ParamStore, eps: f64, tol: f64, loss: F) -> GradCheckReport
where
    F: Fn(&mut Tape, &ParamStore) -> Var,
{
    store.zero_grads();
    let mut tape = Tape::new();
    let out = loss(&mut tape, store);
    tape.backward(out, 1.0, store);
    let analytic: Vec<Vec<f64>> = store.params().iter().map(|p| p.grad.clone()).collect();
    store.zero_grads();

    let eval = |store: &ParamStore| {
        let mut t = Tape::new();
        let v = loss(&mut t, store);
        t.scalar(v)
    };

    let mut report = GradCheckReport { checked: 0, max_rel_error: 0.0, tolerance: tol, failures: Vec::new() };
    let ids: Vec<_> = store.ids().collect();
    for (pi, id) in ids.into_iter().enumerate() {
        for i in 0..store.value(id).len() {
            let orig = store.value(id)[i];
            store.value_mut(id)[i] = orig + eps;
            let plus = eval(store);
            store.value_mut(id)[i] = orig - eps;
            let minus = eval(store);
            store.value_mut(id)[i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[pi][i];
            let rel = relative_error(a, numeric);
            report.checked += 1;
            report.max_rel_error = report.max_rel_error.max(rel);
            if !(rel < tol) {
                report.failures.push(Mismatch {
                    param: store.get(id).name.clone(),
                    index: i,
                    analytic: a,
                    numeric,
                    rel_error: rel,
                });
            }
        }
    }
    report
}
