use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Gradient magnitudes below this compare by absolute difference.
pub const REL_ERROR_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct GradReport {
    pub max_rel_error: f64,
    /// Coordinate where `max_rel_error` occurs.
    pub worst_index: usize,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub passed: bool,
}

fn eval<F>(f: &F, x: &Tensor<f64>) -> Result<(Tape<f64>, Var, Var)>
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let y = f(&mut tape, xv)?;
    if tape.value(y).numel() != 1 {
        return Err(Error::shape(format!(
            "grad_check needs a scalar function, got shape {:?}",
            tape.value(y).shape()
        )));
    }
    Ok((tape, xv, y))
}

/// Compare the backpropagated gradient of scalar `f` at `x0` with central
/// finite differences of step `h`.
///
/// The error at each coordinate is `|a - n| / max(|a|, |n|, REL_ERROR_FLOOR)`;
/// the check passes when the maximum is below `tol`.
pub fn grad_check<F>(f: F, x0: &Tensor<f64>, h: f64, tol: f64) -> Result<GradReport>
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var>,
{
    let (mut tape, xv, y) = eval(&f, x0)?;
    tape.backward(y)?;
    let analytic: Vec<f64> = match tape.grad(xv) {
        Some(g) => g.data().to_vec(),
        None => vec![0.0; x0.numel()],
    };
    let mut numeric = Vec::with_capacity(x0.numel());
    let mut x = x0.clone();
    for i in 0..x0.numel() {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + h;
        let (tp, _, yp) = eval(&f, &x)?;
        let fp = tp.value(yp).data()[0];
        x.data_mut()[i] = orig - h;
        let (tm, _, ym) = eval(&f, &x)?;
        let fm = tm.value(ym).data()[0];
        x.data_mut()[i] = orig;
        numeric.push((fp - fm) / (2.0 * h));
    }
    let (mut worst, mut max_err) = (0, 0.0f64);
    for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        let e = (a - n).abs() / a.abs().max(n.abs()).max(REL_ERROR_FLOOR);
        if !(e <= max_err) {
            max_err = e;
            worst = i;
        }
    }
    Ok(GradReport {
        max_rel_error: max_err,
        worst_index: worst,
        analytic,
        numeric,
        passed: max_err < tol,
    })
}
