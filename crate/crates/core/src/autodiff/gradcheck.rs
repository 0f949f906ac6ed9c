use super::graph::{Graph, Var};
use super::params::ParameterVector;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Compare reverse-mode gradients against central finite differences.
///
/// `build` constructs a scalar function of the bound parameters inside a
/// fresh graph. Returns `max |analytic - numeric| / max(1, |numeric|)` over
/// every parameter coordinate.
pub fn finite_difference_check<S, F>(build: F, params: &ParameterVector<S>, step: S) -> Result<S>
where
    S: Scalar,
    F: Fn(&mut Graph<S>, &[Var]) -> Result<Var>,
{
    if !(step > S::zero()) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let eval = |p: &ParameterVector<S>| -> Result<S> {
        let mut g = Graph::new();
        let vars = p.bind(&mut g);
        let out = build(&mut g, &vars)?;
        let v = g.value(out).item().ok_or_else(|| {
            Error::Graph(format!("expected scalar output, got {:?}", g.value(out).shape()))
        })?;
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("function value {v}")));
        }
        Ok(v)
    };

    let mut g = Graph::new();
    let vars = params.bind(&mut g);
    let out = build(&mut g, &vars)?;
    let analytic = params.gradients_for(&vars, &g.backward(out)?)?.flat();

    let mut theta = params.flat();
    let mut probe = params.clone();
    let mut worst = S::zero();
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + step;
        probe.set_flat(&theta)?;
        let plus = eval(&probe)?;
        theta[i] = orig - step;
        probe.set_flat(&theta)?;
        let minus = eval(&probe)?;
        theta[i] = orig;
        let numeric = (plus - minus) / (step + step);
        let err = (analytic[i] - numeric).abs() / numeric.abs().max(S::one());
        worst = worst.max(err);
    }
    Ok(worst)
}
