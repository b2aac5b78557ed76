use crate::error::{Error, Result};

use super::curve::{BoundaryCurve, Segment, Vec2};

/// Which part of the partitioned boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// Accessible portion, where data is measured.
    A,
    /// Inaccessible portion, carrying the Robin condition.
    I,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::I,
            Side::I => Side::A,
        }
    }
}

/// An open arclength interval `(start, start + span)` on a closed curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcInterval {
    pub start: f64,
    pub span: f64,
}

/// A finite union of non-wrapping arclength intervals in `[0, L)`, each open.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArcSet {
    pub intervals: Vec<(f64, f64)>,
}

impl ArcSet {
    pub fn empty() -> Self {
        ArcSet::default()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    /// Membership of a wrapped arclength parameter.
    pub fn contains(&self, s: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| s > a && s < b)
    }

    /// Membership with the endpoints included.
    pub fn contains_closed(&self, s: f64, tol: f64) -> bool {
        self.intervals
            .iter()
            .any(|&(a, b)| s >= a - tol && s <= b + tol)
    }

    /// Whether every interval of `self` lies inside some interval of `other`.
    pub fn is_subset_of(&self, other: &ArcSet, tol: f64) -> bool {
        self.intervals.iter().all(|&(a, b)| {
            other
                .intervals
                .iter()
                .any(|&(c, d)| a >= c - tol && b <= d + tol)
        })
    }

    fn normalized(mut intervals: Vec<(f64, f64)>, tol: f64) -> ArcSet {
        intervals.retain(|(a, b)| b - a > 0.0);
        intervals.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (a, b) in intervals {
            match out.last_mut() {
                Some(last) if a <= last.1 + tol => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        ArcSet { intervals: out }
    }
}

impl ArcInterval {
    pub fn end(&self) -> f64 {
        self.start + self.span
    }

    /// Split into non-wrapping pieces of `[0, length)`.
    pub fn to_set(&self, length: f64) -> ArcSet {
        let a = self.start.rem_euclid(length);
        let b = a + self.span;
        if b <= length + 1e-15 * length {
            ArcSet {
                intervals: vec![(a, b.min(length))],
            }
        } else {
            ArcSet {
                intervals: vec![(0.0, b - length), (a, length)],
            }
        }
    }

    /// Open-interval membership of an arclength parameter.
    pub fn contains(&self, s: f64, length: f64) -> bool {
        let d = (s - self.start).rem_euclid(length);
        d > 0.0 && d < self.span
    }

    /// Offset of `s` from the start along the arc, if inside the closed arc.
    pub fn offset_of(&self, s: f64, length: f64, tol: f64) -> Option<f64> {
        let d = (s - self.start).rem_euclid(length);
        if d <= self.span + tol {
            Some(d.min(self.span))
        } else if length - d <= tol {
            Some(0.0)
        } else {
            None
        }
    }
}

/// Intersection of a Euclidean ball around a boundary point with the boundary.
#[derive(Debug, Clone)]
pub struct SurfaceBall {
    pub center: Vec2,
    pub center_param: f64,
    pub radius: f64,
    pub arc_support: ArcSet,
    /// `2r / sqrt(1 + M²)`; recorded for comparison, never enforced.
    pub sanity_lower_bound: f64,
}

impl SurfaceBall {
    pub fn arclength(&self) -> f64 {
        self.arc_support.measure()
    }
}

/// Planar domain with boundary split into accessible and inaccessible arcs.
#[derive(Debug, Clone)]
pub struct Domain {
    pub name: String,
    pub curve: BoundaryCurve,
    pub gamma_a: ArcInterval,
    pub gamma_i: ArcInterval,
    pub d0: f64,
    margin_i_r0: ArcSet,
}

const MARGIN_SAMPLES: usize = 4096;

impl Domain {
    /// `gamma_i` is given as an arclength interval; `gamma_a` is its
    /// complement so that the two are open, disjoint and cover the boundary.
    pub fn new(name: &str, curve: BoundaryCurve, gamma_i: ArcInterval, d0: f64) -> Result<Self> {
        let len = curve.length();
        if !(gamma_i.span > 0.0 && gamma_i.span < len) {
            return Err(Error::InvalidInput(format!(
                "inaccessible arc span {} must lie in (0, {len})",
                gamma_i.span
            )));
        }
        let gamma_i = ArcInterval {
            start: gamma_i.start.rem_euclid(len),
            span: gamma_i.span,
        };
        let gamma_a = ArcInterval {
            start: (gamma_i.start + gamma_i.span).rem_euclid(len),
            span: len - gamma_i.span,
        };
        let diam = diameter(&curve);
        if diam > d0 * (1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!(
                "domain diameter {diam:.6} exceeds d0 = {d0}"
            )));
        }
        let mut domain = Domain {
            name: name.to_string(),
            curve,
            gamma_a,
            gamma_i,
            d0,
            margin_i_r0: ArcSet::empty(),
        };
        let r0 = domain.curve.r0;
        domain.margin_i_r0 = domain.compute_margin(Side::I, r0);
        Ok(domain)
    }

    /// Builds a domain with `gamma_a` given explicitly; it must be the
    /// complement of `gamma_i`.
    pub fn with_arcs(
        name: &str,
        curve: BoundaryCurve,
        gamma_a: ArcInterval,
        gamma_i: ArcInterval,
        d0: f64,
    ) -> Result<Self> {
        let len = curve.length();
        let tol = 1e-9 * len;
        let gap = (gamma_i.end() - gamma_a.start).rem_euclid(len);
        let gap = gap.min(len - gap);
        let gap2 = (gamma_a.end() - gamma_i.start).rem_euclid(len);
        let gap2 = gap2.min(len - gap2);
        if (gamma_a.span + gamma_i.span - len).abs() > tol || gap > tol || gap2 > tol {
            return Err(Error::InvalidInput(
                "accessible and inaccessible arcs must be complementary".into(),
            ));
        }
        Self::new(name, curve, gamma_i, d0)
    }

    pub fn arc(&self, side: Side) -> ArcInterval {
        match side {
            Side::A => self.gamma_a,
            Side::I => self.gamma_i,
        }
    }

    pub fn r0(&self) -> f64 {
        self.curve.r0
    }

    pub fn length(&self) -> f64 {
        self.curve.length()
    }

    /// Side containing the arclength parameter, `None` at the two junctions.
    pub fn side_of(&self, s: f64) -> Option<Side> {
        let len = self.length();
        if self.gamma_i.contains(s, len) {
            Some(Side::I)
        } else if self.gamma_a.contains(s, len) {
            Some(Side::A)
        } else {
            None
        }
    }

    /// Distance from `x` to the closure of an arc.
    pub fn distance_to(&self, x: &Vec2, side: Side) -> f64 {
        let arc = self.arc(side);
        self.curve.distance_to_arc(x, arc.start, arc.end())
    }

    /// Snaps a point onto the boundary, failing beyond `1e-9 · d0`.
    pub fn snap(&self, x: &Vec2) -> Result<f64> {
        let (s, d) = self.curve.project(x);
        let tol = 1e-9 * self.d0;
        if d > tol {
            return Err(Error::OffBoundary {
                x: x.x,
                y: x.y,
                distance: d,
                tolerance: tol,
            });
        }
        Ok(s)
    }

    /// Points of the chosen arc at distance greater than `rho` from the other
    /// arc. Empty when `rho` exceeds the arc's inradius.
    pub fn interior_margin_subset(&self, side: Side, rho: f64) -> Result<ArcSet> {
        if !(rho > 0.0) {
            return Err(Error::InvalidInput(format!("margin rho = {rho} must be positive")));
        }
        if side == Side::I && (rho - self.curve.r0).abs() <= 1e-15 * self.curve.r0 {
            return Ok(self.margin_i_r0.clone());
        }
        Ok(self.compute_margin(side, rho))
    }

    /// The inaccessible margin subset at `rho = r0`, cached at construction.
    pub fn margin_i_r0(&self) -> &ArcSet {
        &self.margin_i_r0
    }

    fn compute_margin(&self, side: Side, rho: f64) -> ArcSet {
        let arc = self.arc(side);
        let other = side.other();
        let len = self.length();
        let mut params: Vec<f64> = (0..=MARGIN_SAMPLES)
            .map(|k| arc.start + arc.span * k as f64 / MARGIN_SAMPLES as f64)
            .collect();
        // joints matter for polygons: distance has kinks there
        for &o in self.curve.offsets() {
            let d = (o - arc.start).rem_euclid(len);
            if d > 0.0 && d < arc.span {
                params.push(arc.start + d);
            }
        }
        params.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let excess =
            |s: f64| self.distance_to(&self.curve.point_at(s), other) - rho;
        let vals: Vec<f64> = params.iter().map(|&s| excess(s)).collect();
        let refine = |mut lo: f64, mut hi: f64| {
            // excess(lo) <= 0 < excess(hi) or reverse; find the crossing
            let flo = excess(lo) > 0.0;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if (excess(mid) > 0.0) == flo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let mut raw = Vec::new();
        let mut open: Option<f64> = None;
        for k in 0..params.len() {
            let inside = vals[k] > 0.0;
            match (open, inside) {
                (None, true) => {
                    let a = if k == 0 { params[0] } else { refine(params[k - 1], params[k]) };
                    open = Some(a);
                }
                (Some(a), false) => {
                    let b = refine(params[k - 1], params[k]);
                    raw.push((a, b));
                    open = None;
                }
                _ => {}
            }
        }
        if let Some(a) = open {
            raw.push((a, *params.last().unwrap()));
        }
        // unwrap onto [0, len)
        let mut pieces = Vec::new();
        for (a, b) in raw {
            let aw = a.rem_euclid(len);
            let bw = aw + (b - a);
            if bw <= len {
                pieces.push((aw, bw));
            } else {
                pieces.push((aw, len));
                pieces.push((0.0, bw - len));
            }
        }
        ArcSet::normalized(pieces, 0.0)
    }

    /// `B_r(x0) ∩ ∂Ω` as arclength intervals.
    pub fn surface_ball(&self, x0: &Vec2, r: f64) -> Result<SurfaceBall> {
        if !(r > 0.0) {
            return Err(Error::InvalidInput(format!("radius {r} must be positive")));
        }
        let s0 = self.snap(x0)?;
        let center = self.curve.point_at(s0);
        let mut pieces = Vec::new();
        for (i, seg) in self.curve.segments().iter().enumerate() {
            for (ta, tb) in segment_in_ball(seg, &center, r) {
                let a = self.curve.param_of(i, ta);
                let b = self.curve.param_of(i, tb);
                pieces.push((a, b));
            }
        }
        let len = self.length();
        let mut set = ArcSet::normalized(pieces, 1e-12 * len);
        // merge across the parametrization seam
        if set.intervals.len() >= 2 {
            let first = set.intervals[0];
            let last = *set.intervals.last().unwrap();
            if first.0 <= 1e-12 * len && last.1 >= len * (1.0 - 1e-12) {
                // keep as two pieces; membership is unaffected
                set.intervals[0].0 = 0.0;
                let n = set.intervals.len();
                set.intervals[n - 1].1 = len;
            }
        }
        Ok(SurfaceBall {
            center,
            center_param: s0,
            radius: r,
            arc_support: set,
            sanity_lower_bound: 2.0 * r / (1.0 + self.curve.m * self.curve.m).sqrt(),
        })
    }

    /// Whether the surface ball `Δ_r(x0)` stays strictly inside the
    /// inaccessible arc.
    pub fn ball_within_gamma_i(&self, x0: &Vec2, r: f64) -> bool {
        self.distance_to(x0, Side::A) > r
    }

    /// Area enclosed by the boundary.
    pub fn area(&self) -> f64 {
        let mut a = 0.0;
        for seg in self.curve.segments() {
            a += crate::quadrature::GAUSS5.integrate(0.0, 1.0, |t| {
                let p = seg.eval(t);
                let d = seg.deriv(t);
                0.5 * (p.x * d.y - p.y * d.x)
            });
        }
        a
    }

    pub fn centroid(&self) -> Vec2 {
        let mut c = Vec2::zeros();
        let mut a = 0.0;
        for seg in self.curve.segments() {
            let n = match seg {
                Segment::Line { .. } => 1,
                Segment::Cubic { .. } => 8,
            };
            for k in 0..n {
                let t0 = k as f64 / n as f64;
                let t1 = (k + 1) as f64 / n as f64;
                for (t, w) in crate::quadrature::GAUSS5.mapped(t0, t1) {
                    let p = seg.eval(t);
                    let d = seg.deriv(t);
                    let da = 0.5 * (p.x * d.y - p.y * d.x) * w;
                    a += da;
                    c += p * (da * 2.0 / 3.0);
                }
            }
        }
        c / a
    }
}

fn diameter(curve: &BoundaryCurve) -> f64 {
    let pts = curve.sample(8);
    let mut d: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d = d.max((pts[i].1 - pts[j].1).norm());
        }
    }
    d
}

/// Parameter sub-intervals of a segment inside the open ball.
fn segment_in_ball(seg: &Segment, c: &Vec2, r: f64) -> Vec<(f64, f64)> {
    let r2 = r * r;
    match seg {
        Segment::Line { a, b } => {
            let d = b - a;
            let f = a - c;
            let qa = d.norm_squared();
            let qb = 2.0 * f.dot(&d);
            let qc = f.norm_squared() - r2;
            let disc = qb * qb - 4.0 * qa * qc;
            if disc <= 0.0 {
                return vec![];
            }
            let sq = disc.sqrt();
            let t0 = ((-qb - sq) / (2.0 * qa)).max(0.0);
            let t1 = ((-qb + sq) / (2.0 * qa)).min(1.0);
            if t1 > t0 {
                vec![(t0, t1)]
            } else {
                vec![]
            }
        }
        Segment::Cubic { .. } => {
            let n = 64;
            let g = |t: f64| (seg.eval(t) - c).norm_squared() - r2;
            let bisect = |mut lo: f64, mut hi: f64| {
                let glo = g(lo) < 0.0;
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if (g(mid) < 0.0) == glo {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            };
            let mut out = Vec::new();
            let mut open: Option<f64> = if g(0.0) < 0.0 { Some(0.0) } else { None };
            let mut prev = 0.0;
            for k in 1..=n {
                let t = k as f64 / n as f64;
                let inside = g(t) < 0.0;
                match (open, inside) {
                    (None, true) => open = Some(bisect(prev, t)),
                    (Some(a), false) => {
                        out.push((a, bisect(prev, t)));
                        open = None;
                    }
                    _ => {}
                }
                prev = t;
            }
            if let Some(a) = open {
                out.push((a, 1.0));
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    pub(crate) fn unit_square() -> Domain {
        let v = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let curve = BoundaryCurve::polygon(&v, None, 0.25, 2.0).unwrap();
        Domain::new("square", curve, ArcInterval { start: 0.0, span: 1.0 }, 1.5).unwrap()
    }

    fn unit_disk() -> Domain {
        let curve = BoundaryCurve::circle(Vec2::zeros(), 1.0, 128, 0.25, 1.0).unwrap();
        let len = curve.length();
        Domain::new(
            "disk",
            curve,
            ArcInterval { start: 0.5 * len, span: 0.5 * len },
            2.0 + 1e-6,
        )
        .unwrap()
    }

    #[test]
    fn partition_covers_boundary() {
        for d in [unit_square(), unit_disk()] {
            let total = d.gamma_a.span + d.gamma_i.span;
            assert!((total - d.length()).abs() <= 1e-12 * d.length());
        }
    }

    #[test]
    fn diameter_bound_enforced() {
        let v = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let curve = BoundaryCurve::polygon(&v, None, 0.25, 2.0).unwrap();
        assert!(Domain::new("sq", curve, ArcInterval { start: 0.0, span: 1.0 }, 1.0).is_err());
    }

    #[test]
    fn explicit_arcs_must_be_complementary() {
        let v = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let curve = BoundaryCurve::polygon(&v, None, 0.25, 2.0).unwrap();
        let ok = Domain::with_arcs(
            "sq",
            curve.clone(),
            ArcInterval { start: 1.0, span: 3.0 },
            ArcInterval { start: 0.0, span: 1.0 },
            1.5,
        );
        assert!(ok.is_ok());
        let bad = Domain::with_arcs(
            "sq",
            curve,
            ArcInterval { start: 1.5, span: 2.5 },
            ArcInterval { start: 0.0, span: 1.0 },
            1.5,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn square_margin_subset() {
        let d = unit_square();
        let m = d.interior_margin_subset(Side::I, 0.25).unwrap();
        assert_eq!(m.intervals.len(), 1);
        let (a, b) = m.intervals[0];
        assert!((a - 0.25).abs() < 1e-10 && (b - 0.75).abs() < 1e-10, "{a} {b}");
        assert!(d.interior_margin_subset(Side::I, 0.0).is_err());
        assert!(d.interior_margin_subset(Side::I, 0.6).unwrap().is_empty());
    }

    #[test]
    fn disk_margin_subset_against_brute_force() {
        let d = unit_disk();
        let rho = 0.1;
        let m = d.interior_margin_subset(Side::I, rho).unwrap();
        assert_eq!(m.intervals.len(), 1);
        let (a, b) = m.intervals[0];
        // oracle: dense sampling of the closed upper arc, brute-force distance
        let upper: Vec<Vec2> = (0..=200_000)
            .map(|k| {
                let th = PI * k as f64 / 200_000.0;
                Vec2::new(th.cos(), th.sin())
            })
            .collect();
        let dist = |th: f64| {
            let p = Vec2::new(th.cos(), th.sin());
            upper.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min)
        };
        // bisection on the oracle for the angular shortening at the start
        let (mut lo, mut hi) = (PI, 1.2 * PI);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if dist(mid) > rho {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let shortening = lo - PI;
        assert!((shortening - 2.0 * (0.05f64).asin()).abs() < 1e-4);
        let len = d.length();
        let scale = 2.0 * PI / len;
        assert!(((a - d.gamma_i.start) * scale - shortening).abs() < 1e-4);
        assert!(((d.gamma_i.end() - b) * scale - shortening).abs() < 1e-4);
    }

    #[test]
    fn margin_is_monotone_and_cached() {
        let d = unit_square();
        let m1 = d.interior_margin_subset(Side::I, 0.1).unwrap();
        let m2 = d.interior_margin_subset(Side::I, 0.3).unwrap();
        assert!(m2.is_subset_of(&m1, 1e-12));
        assert_eq!(d.interior_margin_subset(Side::I, 0.25).unwrap(), *d.margin_i_r0());
    }

    #[test]
    fn square_surface_balls() {
        let d = unit_square();
        let b = d.surface_ball(&Vec2::new(0.5, 0.0), 0.2).unwrap();
        assert_eq!(b.arc_support.intervals.len(), 1);
        let (a, e) = b.arc_support.intervals[0];
        assert!((a - 0.3).abs() < 1e-12 && (e - 0.7).abs() < 1e-12);
        assert!((b.arclength() - 0.4).abs() < 1e-12);

        let c = d.surface_ball(&Vec2::new(0.0, 0.0), 0.2).unwrap();
        assert_eq!(c.arc_support.intervals.len(), 2);
        assert!((c.arclength() - 0.4).abs() < 1e-12);

        assert!(matches!(
            d.surface_ball(&Vec2::new(0.5, 0.1), 0.2),
            Err(Error::OffBoundary { .. })
        ));
    }

    #[test]
    fn disk_surface_ball_chord_angle() {
        let d = unit_disk();
        let b = d.surface_ball(&Vec2::new(1.0, 0.0), 0.5).unwrap();
        let half = 2.0 * (0.25f64).asin();
        assert!((half - 0.5054).abs() < 1e-4);
        assert!((b.arclength() - 2.0 * half).abs() < 1e-4, "{}", b.arclength());
        // dense sampling cross-check
        let n = 100_000;
        let inside = (0..n)
            .filter(|&k| {
                let th = 2.0 * PI * (k as f64 + 0.5) / n as f64;
                (Vec2::new(th.cos(), th.sin()) - Vec2::new(1.0, 0.0)).norm() < 0.5
            })
            .count();
        assert!((inside as f64 / n as f64 * 2.0 * PI - b.arclength()).abs() < 1e-3);
    }

    #[test]
    fn surface_ball_monotone_in_radius() {
        let d = unit_disk();
        let x0 = Vec2::new(0.0, -1.0);
        let mut prev: Option<ArcSet> = None;
        for r in [0.05, 0.1, 0.3, 0.7, 1.5] {
            let b = d.surface_ball(&x0, r).unwrap();
            if let Some(p) = prev {
                assert!(p.is_subset_of(&b.arc_support, 1e-9));
            }
            prev = Some(b.arc_support);
        }
    }
}
