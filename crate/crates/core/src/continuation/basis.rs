use crate::geometry::{Domain, Vec2};

/// Harmonic polynomials `1, Re z^k, Im z^k (k = 1..=degree)` in the scaled
/// variable `z = (x − c)/R`, with `c` the centroid and `R` the largest
/// boundary distance from it.
#[derive(Debug, Clone, Copy)]
pub struct HarmonicBasis {
    pub degree: usize,
    pub center: Vec2,
    pub scale: f64,
}

impl HarmonicBasis {
    pub fn for_domain(domain: &Domain, degree: usize) -> Self {
        let center = domain.centroid();
        let scale = domain
            .curve
            .sample(16)
            .iter()
            .map(|(_, p)| (p - center).norm())
            .fold(0.0, f64::max);
        HarmonicBasis { degree, center, scale }
    }

    pub fn len(&self) -> usize {
        2 * self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Values and gradients of every basis function at `x`.
    pub fn eval(&self, x: &Vec2) -> (Vec<f64>, Vec<Vec2>) {
        let n = self.len();
        let mut val = Vec::with_capacity(n);
        let mut grad = Vec::with_capacity(n);
        let zr = (x.x - self.center.x) / self.scale;
        let zi = (x.y - self.center.y) / self.scale;
        val.push(1.0);
        grad.push(Vec2::zeros());
        // p = z^(k-1), starting at 1
        let (mut pr, mut pi) = (1.0, 0.0);
        for k in 1..=self.degree {
            let kf = k as f64 / self.scale;
            // d/dx z^k = k z^(k-1) / R, d/dy = i k z^(k-1) / R
            let (dr, di) = (kf * pr, kf * pi);
            let (nr, ni) = (pr * zr - pi * zi, pr * zi + pi * zr);
            val.push(nr);
            grad.push(Vec2::new(dr, -di));
            val.push(ni);
            grad.push(Vec2::new(di, dr));
            pr = nr;
            pi = ni;
        }
        (val, grad)
    }
}
