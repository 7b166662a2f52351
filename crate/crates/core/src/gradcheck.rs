//! Central finite-difference checks of analytic gradients, in f64.

use crate::params::{Gradients, ParamId, ParamStore};

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct GradCheckSettings {
    pub step: f64,
    /// Lower bound on the relative-error denominator. Gradients smaller than this are
    /// effectively held to an absolute error of `floor * max_rel`.
    pub floor: f64,
}

impl Default for GradCheckSettings {
    fn default() -> Self {
        Self { step: 1e-5, floor: 1e-4 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradMismatch {
    pub name: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    /// Entry with the largest relative error.
    pub worst: Option<GradMismatch>,
}

impl GradCheckReport {
    pub fn max_rel(&self) -> f64 {
        self.worst.as_ref().map_or(0.0, |w| w.rel)
    }
}

/// Compares `grads` against `(loss(w + h) - loss(w - h)) / 2h` for every element of
/// every tensor in `ids`. Parameters absent from `grads` count as zero gradient.
pub fn check_gradients(
    store: &ParamStore<f64>,
    ids: &[ParamId],
    grads: &Gradients<f64>,
    settings: GradCheckSettings,
    loss: impl Fn(&ParamStore<f64>) -> f64,
) -> GradCheckReport {
    let mut probe = store.clone();
    let mut report = GradCheckReport::default();
    let h = settings.step;
    for &id in ids {
        for k in 0..store.get(id).len() {
            let orig = store.get(id).data()[k];
            probe.get_mut(id).data_mut()[k] = orig + h;
            let up = loss(&probe);
            probe.get_mut(id).data_mut()[k] = orig - h;
            let down = loss(&probe);
            probe.get_mut(id).data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.get(id).map_or(0.0, |g| g.data()[k]);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(settings.floor);
            if report.worst.as_ref().is_none_or(|w| rel > w.rel) {
                report.worst =
                    Some(GradMismatch { name: store.name(id).to_string(), index: k, analytic, numeric, rel });
            }
            report.checked += 1;
        }
    }
    report
}

/// Number of tensors in `ids` with at least one gradient entry above `eps` in magnitude.
pub fn count_nonzero(grads: &Gradients<f64>, ids: &[ParamId], eps: f64) -> usize {
    ids.iter().filter(|&&id| grads.get(id).is_some_and(|g| g.data().iter().any(|v| v.abs() > eps))).count()
}
