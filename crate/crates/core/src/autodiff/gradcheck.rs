use super::{AdError, Array, Primitive, Tape, Var};

/// Outcome of comparing analytic gradients with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// `max |analytic - numeric| / max(|numeric|, 1e-8)` over every entry.
    pub max_rel_error: f64,
    /// `(param index, flat entry index)` of the worst entry.
    pub worst: Option<(usize, usize)>,
    pub entries_checked: usize,
}

const DENOM_FLOOR: f64 = 1e-8;

/// Checks the gradient of the scalar built by `builder` with respect to
/// every entry of `params`, using central differences with step `eps`.
///
/// `builder` receives a fresh tape and the parameter leaves in order.
pub fn finite_difference_check<F>(
    builder: F,
    params: &[Array],
    eps: f64,
) -> Result<GradCheckReport, AdError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, AdError>,
{
    finite_difference_check_with(builder, params, eps, None)
}

/// As [`finite_difference_check`], optionally corrupting one primitive's
/// gradient rule in the analytic pass.
pub fn finite_difference_check_with<F>(
    builder: F,
    params: &[Array],
    eps: f64,
    fault: Option<Primitive>,
) -> Result<GradCheckReport, AdError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, AdError>,
{
    if !(eps > 0.0 && eps <= 1e-3) {
        return Err(AdError::InvalidArgument(format!(
            "finite-difference step {eps} outside (0, 1e-3]"
        )));
    }
    let eval = |values: &[Array]| -> Result<f64, AdError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|a| tape.param(a.clone())).collect();
        let loss = builder(&mut tape, &vars)?;
        let v = tape.value(loss);
        if v.len() != 1 {
            return Err(AdError::NonScalarLoss(v.shape().to_vec()));
        }
        Ok(v.item())
    };

    let first = eval(params)?;
    let second = eval(params)?;
    if first.to_bits() != second.to_bits() {
        return Err(AdError::NonDeterministic { first, second });
    }

    let mut tape = match fault {
        Some(p) => Tape::with_fault(p),
        None => Tape::new(),
    };
    let vars: Vec<Var> = params.iter().map(|a| tape.param(a.clone())).collect();
    let loss = builder(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        entries_checked: 0,
    };
    let mut work: Vec<Array> = params.to_vec();
    for (pi, var) in vars.iter().enumerate() {
        let analytic = grads.wrt(*var);
        for e in 0..params[pi].len() {
            let orig = params[pi].data()[e];
            work[pi].data_mut()[e] = orig + eps;
            let up = eval(&work)?;
            work[pi].data_mut()[e] = orig - eps;
            let down = eval(&work)?;
            work[pi].data_mut()[e] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let err = (analytic.data()[e] - numeric).abs() / numeric.abs().max(DENOM_FLOOR);
            report.entries_checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some((pi, e));
            }
        }
    }
    Ok(report)
}
