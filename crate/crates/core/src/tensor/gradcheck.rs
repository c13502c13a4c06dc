use super::{BoundParams, ParamStore, Tape, Var};
use crate::error::{Error, Result};

/// Denominator floor of the relative error, so gradients that are zero up to
/// rounding are compared absolutely.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst element.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
    pub analytic: ParamStore,
}

fn evaluate<F>(f: &F, params: &ParamStore, requires_grad: bool) -> Result<(Tape, BoundParams, Var)>
where
    F: Fn(&mut Tape, &BoundParams) -> Result<Var>,
{
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, requires_grad);
    let out = f(&mut tape, &bound)?;
    let v = tape.value(out);
    if v.len() != 1 {
        return Err(Error::shape("grad_check", "function must return a single value"));
    }
    if !v.item().is_finite() {
        return Err(Error::NonFinite { op: "grad_check" });
    }
    Ok((tape, bound, out))
}

/// Compares reverse-mode gradients of every parameter element against central
/// differences `(f(θ+eps) - f(θ-eps)) / (2 eps)`.
pub fn grad_check<F>(f: F, params: &ParamStore, eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &BoundParams) -> Result<Var>,
{
    if !(1e-7..=1e-4).contains(&eps) {
        return Err(Error::Domain(format!("grad_check eps {eps} outside [1e-7, 1e-4]")));
    }
    let (tape, bound, out) = evaluate(&f, params, true)?;
    let mut grads = tape.backward(out)?;
    let analytic = params.collect_grads(&bound, &mut grads);

    let mut probe = params.clone();
    let mut max_rel_error: f64 = 0.0;
    let mut worst = None;
    let mut checked = 0;
    let names: Vec<String> = params.iter().map(|(n, _)| n.to_string()).collect();
    for name in names {
        let len = params.get(&name).map_or(0, |t| t.len());
        for i in 0..len {
            let original = params.get(&name).unwrap().data()[i];
            let mut at = |x: f64| -> Result<f64> {
                probe.get_mut(&name).unwrap().data_mut()[i] = x;
                let (tape, _, out) = evaluate(&f, &probe, false)?;
                Ok(tape.value(out).item())
            };
            let plus = at(original + eps)?;
            let minus = at(original - eps)?;
            at(original)?;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.get(&name).unwrap().data()[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
            if rel > max_rel_error {
                max_rel_error = rel;
                worst = Some((name.clone(), i));
            }
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        max_rel_error,
        worst,
        checked,
        analytic,
    })
}
