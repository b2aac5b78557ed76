//! Small regression helpers shared by the estimate and experiment modules.

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Sum of squared residuals.
    pub residual: f64,
    /// Standard error of the slope (zero for two points).
    pub slope_stderr: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`. Needs two distinct `x`.
pub(crate) fn line_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let slope_stderr = if n > 2 { (residual / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Some(LineFit {
        slope,
        intercept,
        residual,
        slope_stderr,
    })
}

pub(crate) fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let f = line_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept + 1.0).abs() < 1e-14);
        assert!(f.residual < 1e-28 && f.slope_stderr < 1e-14);
        assert!(line_fit(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
