//! Shared helpers for the unit tests.

/// Max relative error between `analytic` and central finite differences
/// (h = 1e-5) of `eval` at `values`, with the relative error using
/// denominator `max(|analytic|, |numeric|, 1e-8)`.
pub(crate) fn fd_max_rel_err(
    values: &[f64],
    analytic: &[f64],
    mut eval: impl FnMut(&[f64]) -> f64,
) -> f64 {
    assert_eq!(values.len(), analytic.len(), "gradient arity mismatch");
    let h = 1e-5;
    let mut buf = values.to_vec();
    let mut max_err: f64 = 0.0;
    for i in 0..buf.len() {
        let orig = buf[i];
        buf[i] = orig + h;
        let up = eval(&buf);
        buf[i] = orig - h;
        let down = eval(&buf);
        buf[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
        max_err = max_err.max((analytic[i] - numeric).abs() / denom);
    }
    max_err
}
