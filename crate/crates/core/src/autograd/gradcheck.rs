use super::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Compare reverse-mode gradients of a scalar function against central
/// differences at every coordinate of `point`.
///
/// `f` builds the function on a fresh graph from the leaf holding the point.
/// Returns `max |analytic - numeric| / max(1, |analytic|)`.
pub fn finite_diff_check<F>(f: F, point: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    let all: Vec<usize> = (0..point.numel()).collect();
    finite_diff_check_at(f, point, eps, &all)
}

/// [`finite_diff_check`] restricted to the listed flat coordinates.
pub fn finite_diff_check_at<F>(f: F, point: &Tensor, eps: f64, coords: &[usize]) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    if !point.all_finite() {
        return Err(Error::Numeric("finite_diff_check at a non-finite point".into()));
    }
    let mut g = Graph::new();
    let x = g.input(point.clone());
    let y = f(&mut g, x)?;
    let analytic = g.backward(y)?.wrt(x);

    let eval = |p: Tensor| -> Result<f64> {
        let mut g = Graph::new();
        let x = g.constant(p);
        let y = f(&mut g, x)?;
        let v = g.value(y).item()?;
        if !v.is_finite() {
            return Err(Error::Numeric(format!("function value {v} during finite differencing")));
        }
        Ok(v)
    };

    let mut worst: f64 = 0.0;
    for &i in coords {
        let mut plus = point.clone();
        plus.data_mut()[i] += eps;
        let mut minus = point.clone();
        minus.data_mut()[i] -= eps;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * eps);
        let a = analytic.data()[i];
        worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three() {
        let err = finite_diff_check(|g, x| g.mul(x, x), &Tensor::scalar(3.0), 1e-5).unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn non_finite_output_is_numeric_error() {
        let r = finite_diff_check(
            |g, x| {
                let big = g.scale(x, f64::INFINITY);
                Ok(g.sum(big))
            },
            &Tensor::scalar(1.0),
            1e-5,
        );
        assert!(matches!(r, Err(Error::Numeric(_))));
    }
}
