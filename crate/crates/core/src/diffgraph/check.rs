/// Central-difference gradient of `f` at `x` with step `h`.
pub fn central_difference(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest `|analytic - numeric| / max(1, |numeric|)` over all coordinates,
/// where `numeric` is the central difference of `f` at `x` with step `h`.
pub fn grad_check(f: &mut dyn FnMut(&[f64]) -> f64, analytic: &[f64], x: &[f64], h: f64) -> f64 {
    assert_eq!(analytic.len(), x.len(), "gradient length mismatch");
    central_difference(f, x, h)
        .iter()
        .zip(analytic)
        .map(|(n, a)| (a - n).abs() / n.abs().max(1.0))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three() {
        let mut f = |x: &[f64]| x[0] * x[0];
        let err = grad_check(&mut f, &[6.0], &[3.0], 1e-6);
        assert!(err < 1e-8, "{err}");
    }
}
