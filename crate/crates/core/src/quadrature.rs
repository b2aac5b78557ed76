//! Gauss-Legendre rules and graded integration of negative powers of
//! piecewise-linear boundary traces.

/// A Gauss-Legendre rule on the reference interval [-1, 1].
#[derive(Debug, Clone, Copy)]
pub struct GaussRule {
    pub nodes: &'static [f64],
    pub weights: &'static [f64],
}

pub const GAUSS2: GaussRule = GaussRule {
    nodes: &[-0.577_350_269_189_625_8, 0.577_350_269_189_625_8],
    weights: &[1.0, 1.0],
};

pub const GAUSS3: GaussRule = GaussRule {
    nodes: &[-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4],
    weights: &[5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0],
};

pub const GAUSS5: GaussRule = GaussRule {
    nodes: &[
        -0.906_179_845_938_664,
        -0.538_469_310_105_683,
        0.0,
        0.538_469_310_105_683,
        0.906_179_845_938_664,
    ],
    weights: &[
        0.236_926_885_056_189_1,
        0.478_628_670_499_366_5,
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
    ],
};

impl GaussRule {
    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Quadrature points and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(self.weights)
            .map(move |(&x, &w)| (mid + half * x, w * half))
    }
}

/// Outcome of a possibly singular integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SingularIntegral {
    Finite(f64),
    Divergent,
}

impl SingularIntegral {
    pub fn value(self) -> Option<f64> {
        match self {
            SingularIntegral::Finite(v) => Some(v),
            SingularIntegral::Divergent => None,
        }
    }

    pub fn is_divergent(self) -> bool {
        matches!(self, SingularIntegral::Divergent)
    }
}

impl std::ops::Add for SingularIntegral {
    type Output = SingularIntegral;
    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (SingularIntegral::Finite(a), SingularIntegral::Finite(b)) => {
                SingularIntegral::Finite(a + b)
            }
            _ => SingularIntegral::Divergent,
        }
    }
}

const MAX_LEVELS: usize = 1200;
const RATIO_DIVERGENT: f64 = 1.0 - 1e-6;
const TAIL_TOL: f64 = 1e-14;

/// Integrates `|u(t)|^(-beta)` over `t ∈ [0, length]` where `u` is linear with
/// end values `u0`, `u1`.
///
/// Zeros of `u` are located exactly and the integrand is integrated by dyadic
/// subdivision toward the zero (or toward the smaller endpoint). The tail next
/// to an exact zero is extrapolated geometrically from successive level
/// contributions; a level ratio that does not fall below one is reported as
/// divergence.
pub fn integrate_abs_power_linear(u0: f64, u1: f64, length: f64, beta: f64) -> SingularIntegral {
    if length <= 0.0 {
        return SingularIntegral::Finite(0.0);
    }
    if beta <= 0.0 {
        let p = -beta;
        let v = GAUSS5.integrate(0.0, length, |t| {
            (u0 + (u1 - u0) * t / length).abs().powf(p)
        });
        return SingularIntegral::Finite(v);
    }
    let slope = (u1 - u0) / length;
    if slope == 0.0 {
        if u0 == 0.0 {
            return SingularIntegral::Divergent;
        }
        return SingularIntegral::Finite(length * u0.abs().powf(-beta));
    }
    let zero = -u0 / slope;
    if zero > 0.0 && zero < length {
        // split at the sign change; both halves start from an exact zero
        let left = graded(0.0, slope.abs(), zero, beta);
        let right = graded(0.0, slope.abs(), length - zero, beta);
        return left + right;
    }
    // |u| is monotone on the interval; grade toward the smaller end
    if u0.abs() <= u1.abs() {
        graded(u0.abs(), slope.abs(), length, beta)
    } else {
        graded(u1.abs(), slope.abs(), length, beta)
    }
}

/// `∫_0^len (a + s d)^(-beta) dd` with `a ≥ 0`, `s > 0`, graded toward `d = 0`.
fn graded(a: f64, s: f64, len: f64, beta: f64) -> SingularIntegral {
    let f = |d: f64| (a + s * d).powf(-beta);
    if a > 0.0 && a >= 0.25 * (a + s * len) {
        // no near-zero: a composite rule is accurate
        let n = 4;
        let h = len / n as f64;
        let v = (0..n)
            .map(|k| GAUSS5.integrate(k as f64 * h, (k + 1) as f64 * h, f))
            .sum();
        return SingularIntegral::Finite(v);
    }
    let mut total = 0.0;
    let mut upper = len;
    let mut prev: Option<f64> = None;
    for _ in 0..MAX_LEVELS {
        let lower = 0.5 * upper;
        let w = 0.25 * (upper - lower);
        let c: f64 = (0..4)
            .map(|k| GAUSS5.integrate(lower + k as f64 * w, lower + (k + 1) as f64 * w, f))
            .sum();
        total += c;
        if a > 0.0 && s * lower < 1e-3 * a {
            // the integrand is flat on [0, lower]
            let tail = GAUSS5.integrate(0.0, lower, f);
            return SingularIntegral::Finite(total + tail);
        }
        if a == 0.0 {
            if let Some(p) = prev {
                let rho = c / p;
                if rho >= RATIO_DIVERGENT || !rho.is_finite() {
                    return SingularIntegral::Divergent;
                }
                let tail = c * rho / (1.0 - rho);
                if tail <= TAIL_TOL * total {
                    return SingularIntegral::Finite(total + tail);
                }
            }
        }
        prev = Some(c);
        upper = lower;
        if upper == 0.0 {
            break;
        }
    }
    if total.is_finite() && a > 0.0 {
        SingularIntegral::Finite(total)
    } else {
        SingularIntegral::Divergent
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rules_are_exact_to_their_degree() {
        // degree 2n-1
        for (rule, deg) in [(GAUSS2, 3), (GAUSS3, 5), (GAUSS5, 9)] {
            let v = rule.integrate(0.0, 2.0, |x| x.powi(deg));
            let exact = 2f64.powi(deg + 1) / (deg + 1) as f64;
            assert!((v - exact).abs() < 1e-12 * exact, "{deg}: {v} vs {exact}");
        }
    }

    #[test]
    fn power_weight_against_closed_form() {
        // ∫_0^r t^{-2/3} dt = 3 r^{1/3}
        let r = 0.2;
        let v = integrate_abs_power_linear(0.0, r, r, 2.0 / 3.0).value().unwrap();
        let exact = 3.0 * r.powf(1.0 / 3.0);
        assert!((v - exact).abs() < 1e-9 * exact, "{v} vs {exact}");
    }

    #[test]
    fn sign_change_inside_segment() {
        // u = t - 0.5 on [0,1], beta = 1/2: 2 * 2 * sqrt(0.5)
        let v = integrate_abs_power_linear(-0.5, 0.5, 1.0, 0.5).value().unwrap();
        let exact = 4.0 * 0.5f64.sqrt();
        assert!((v - exact).abs() < 1e-9, "{v} vs {exact}");
    }

    #[test]
    fn reciprocal_weight_diverges() {
        assert!(integrate_abs_power_linear(0.0, 1.0, 1.0, 1.0).is_divergent());
        assert!(integrate_abs_power_linear(-1.0, 1.0, 1.0, 1.5).is_divergent());
    }

    #[test]
    fn near_zero_without_zero_is_finite() {
        // u from 1e-8 to 1: analytic ∫ (a + s t)^{-1} = ln(u1/u0)/s
        let u0 = 1e-8;
        let v = integrate_abs_power_linear(u0, 1.0, 1.0, 1.0).value().unwrap();
        let exact = (1.0 / u0).ln() / (1.0 - u0);
        assert!((v - exact).abs() < 1e-7 * exact, "{v} vs {exact}");
    }
}
