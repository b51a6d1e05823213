use super::{Graph, ParamStore, Var};
use crate::Scalar;

/// Result of comparing reverse-mode gradients against central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDiffReport {
    /// `max |analytic − numeric| / max(1, |analytic|, |numeric|)`
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub coordinates: usize,
}

/// Checks the gradient of `loss_fn` at `params` coordinate by coordinate.
///
/// `loss_fn` must be deterministic: any dropout masks have to be frozen by the
/// caller, otherwise the numeric side is meaningless.
pub fn finite_diff_check<F, L>(loss_fn: L, params: &ParamStore<F>, h: F) -> FiniteDiffReport
where
    F: Scalar,
    L: Fn(&mut Graph<F>, &ParamStore<F>) -> Var,
{
    let analytic = {
        let mut g = Graph::new();
        let loss = loss_fn(&mut g, params);
        g.grad(loss, params)
    };
    let eval = |store: &ParamStore<F>| {
        let mut g = Graph::new();
        let loss = loss_fn(&mut g, store);
        g.scalar_value(loss)
    };

    let mut work = params.clone();
    let mut report = FiniteDiffReport {
        max_rel_error: 0.0,
        worst: None,
        coordinates: 0,
    };
    let two_h = h + h;
    for (name, (id, grad)) in analytic.names().iter().zip(analytic.iter()) {
        for i in 0..grad.len() {
            let orig = work.value(id).data()[i];
            work.value_mut(id).data_mut()[i] = orig + h;
            let plus = eval(&work);
            work.value_mut(id).data_mut()[i] = orig - h;
            let minus = eval(&work);
            work.value_mut(id).data_mut()[i] = orig;

            let numeric = ((plus - minus) / two_h).as_f64();
            let a = grad.data()[i].as_f64();
            let denom = 1f64.max(a.abs()).max(numeric.abs());
            let err = (a - numeric).abs() / denom;
            report.coordinates += 1;
            if err > report.max_rel_error || err.is_nan() {
                report.max_rel_error = err;
                report.worst = Some((name.clone(), i));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcore::Tensor;

    #[test]
    fn quadratic_is_exact() {
        let mut s = ParamStore::<f64>::new();
        let p = s.insert("p", "default", true, Tensor::vector(vec![0.3, -1.2, 2.5]));
        let r = finite_diff_check(
            |g, st| {
                let v = g.param(st, p);
                let sq = g.mul(v, v);
                let s = g.sum(sq);
                g.scale(s, 0.5)
            },
            &s,
            1e-5,
        );
        assert!(r.max_rel_error <= 1e-9, "{r:?}");
        assert_eq!(r.coordinates, 3);
    }

    #[test]
    fn constant_loss_has_zero_error() {
        let mut s = ParamStore::<f64>::new();
        s.insert("p", "default", true, Tensor::vector(vec![1.0, 2.0]));
        let r = finite_diff_check(|g, _| g.constant(Tensor::scalar(4.0)), &s, 1e-5);
        assert_eq!(r.max_rel_error, 0.0);
    }
}
