//! Finite-difference verification of reverse-mode gradients.

use super::params::ParamSet;
use super::tape::{Id, Tape};

pub const DEFAULT_STEP: f64 = 1e-5;

/// Compares reverse-mode gradients against central finite differences for
/// every parameter scalar and returns the maximum relative error.
///
/// `forward` must rebuild the loss from scratch on the given tape (the
/// parameters are injected as the first leaves, ids aligned with the set).
/// Run this in f64: the default step underflows f32 precision.
pub fn grad_check<F>(params: &mut ParamSet<f64>, mut forward: F) -> f64
where
    F: FnMut(&mut Tape<f64>, &[Id]) -> Id,
{
    let analytic: Vec<Vec<f64>> = {
        let mut tape = Tape::new();
        let ids = params.inject(&mut tape);
        let loss = forward(&mut tape, &ids);
        tape.backward(loss);
        ids.iter().map(|&id| tape.grad(id).unwrap().to_vec()).collect()
    };

    let mut max_rel = 0.0f64;
    for p in 0..params.len() {
        for i in 0..analytic[p].len() {
            let numeric = {
                let original = params.get(super::params::PIdx(p)).data[i];
                let mut eval = |value: f64| -> f64 {
                    params.get_mut(super::params::PIdx(p)).data[i] = value;
                    let mut tape = Tape::new();
                    let ids = params.inject(&mut tape);
                    let loss = forward(&mut tape, &ids);
                    tape.scalar(loss)
                };
                let plus = eval(original + DEFAULT_STEP);
                let minus = eval(original - DEFAULT_STEP);
                params.get_mut(super::params::PIdx(p)).data[i] = original;
                (plus - minus) / (2.0 * DEFAULT_STEP)
            };
            let a = analytic[p][i];
            let denom = a.abs().max(numeric.abs());
            // Below the finite-difference noise floor, compare absolutely.
            let rel = if denom < 1e-6 { (a - numeric).abs() } else { (a - numeric).abs() / denom };
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    max_rel
}
