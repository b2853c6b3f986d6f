//! Central finite-difference check of tape gradients.

use super::{Tape, Tensor, Var};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub n_checked: usize,
}

/// Magnitude below which differences are measured absolutely.
pub const REL_FLOOR: f64 = 1e-6;

/// Compares backprop gradients with central differences of step `eps`.
///
/// `build` records the given parameter tensors on the tape (in order) and
/// returns the scalar loss plus the tape handle of each parameter.
pub fn gradient_check<F>(params: &[Tensor<f64>], eps: f64, build: F) -> Result<GradCheck>
where
    F: Fn(&mut Tape<f64>, &[Tensor<f64>]) -> Result<(Var, Vec<Var>)>,
{
    let mut tape = Tape::new();
    let (loss, vars) = build(&mut tape, params)?;
    tape.backward(loss)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(params)
        .map(|(&v, p)| tape.grad(v).map_or_else(|| vec![0.0; p.len()], <[f64]>::to_vec))
        .collect();

    let eval = |ps: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::new();
        let (loss, _) = build(&mut tape, ps)?;
        Ok(tape.scalar(loss))
    };

    let mut work = params.to_vec();
    let mut out = GradCheck {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        n_checked: 0,
    };
    for p in 0..work.len() {
        for i in 0..work[p].len() {
            let orig = work[p].values[i];
            work[p].values[i] = orig + eps;
            let up = eval(&work)?;
            work[p].values[i] = orig - eps;
            let down = eval(&work)?;
            work[p].values[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[p][i];
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(REL_FLOOR);
            out.max_abs_error = out.max_abs_error.max(abs);
            out.max_rel_error = out.max_rel_error.max(rel);
            out.n_checked += 1;
        }
    }
    Ok(out)
}
