use nalgebra::{DMatrix, DVector, Vector2};

use crate::error::{Error, Result};
use crate::quadrature::GAUSS5;

pub type Vec2 = Vector2<f64>;

/// Turning angle (radians) above which a joint counts as a corner.
const FRAME_ROTATIONS: usize = 32;

pub const CORNER_ANGLE: f64 = 1e-6;

const TABLE_STEPS: usize = 32;

/// Smoothness class of the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularity {
    Lipschitz,
    C1Alpha(f64),
    C11,
}

impl Regularity {
    pub fn is_smooth(&self) -> bool {
        !matches!(self, Regularity::Lipschitz)
    }
}

impl std::fmt::Display for Regularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regularity::Lipschitz => write!(f, "lipschitz"),
            Regularity::C1Alpha(a) => write!(f, "c1alpha({a})"),
            Regularity::C11 => write!(f, "c11"),
        }
    }
}

/// One piece of the boundary: a line or a cubic Bezier.
#[derive(Debug, Clone)]
pub enum Segment {
    Line { a: Vec2, b: Vec2 },
    Cubic { p: [Vec2; 4], table: Vec<f64> },
}

impl Segment {
    pub fn line(a: Vec2, b: Vec2) -> Self {
        Segment::Line { a, b }
    }

    pub fn cubic(p: [Vec2; 4]) -> Self {
        let mut seg = Segment::Cubic {
            p,
            table: Vec::new(),
        };
        let mut table = Vec::with_capacity(TABLE_STEPS + 1);
        table.push(0.0);
        let mut acc = 0.0;
        for k in 0..TABLE_STEPS {
            let t0 = k as f64 / TABLE_STEPS as f64;
            let t1 = (k + 1) as f64 / TABLE_STEPS as f64;
            acc += GAUSS5.integrate(t0, t1, |t| seg.deriv(t).norm());
            table.push(acc);
        }
        if let Segment::Cubic { table: tb, .. } = &mut seg {
            *tb = table;
        }
        seg
    }

    /// Point at local parameter `t ∈ [0, 1]`.
    pub fn eval(&self, t: f64) -> Vec2 {
        match self {
            Segment::Line { a, b } => a + (b - a) * t,
            Segment::Cubic { p, .. } => {
                let s = 1.0 - t;
                p[0] * (s * s * s) + p[1] * (3.0 * s * s * t) + p[2] * (3.0 * s * t * t)
                    + p[3] * (t * t * t)
            }
        }
    }

    pub fn deriv(&self, t: f64) -> Vec2 {
        match self {
            Segment::Line { a, b } => b - a,
            Segment::Cubic { p, .. } => {
                let s = 1.0 - t;
                (p[1] - p[0]) * (3.0 * s * s)
                    + (p[2] - p[1]) * (6.0 * s * t)
                    + (p[3] - p[2]) * (3.0 * t * t)
            }
        }
    }

    pub fn length(&self) -> f64 {
        match self {
            Segment::Line { a, b } => (b - a).norm(),
            Segment::Cubic { table, .. } => *table.last().unwrap(),
        }
    }

    /// Arclength from the segment start to local parameter `t`.
    pub fn length_to(&self, t: f64) -> f64 {
        match self {
            Segment::Line { a, b } => (b - a).norm() * t,
            Segment::Cubic { table, .. } => {
                let x = (t.clamp(0.0, 1.0) * TABLE_STEPS as f64).min(TABLE_STEPS as f64 - 1e-12);
                let k = x.floor() as usize;
                let t0 = k as f64 / TABLE_STEPS as f64;
                table[k] + GAUSS5.integrate(t0, t, |u| self.deriv(u).norm())
            }
        }
    }

    /// Local parameter at arclength `l` from the segment start.
    pub fn param_at(&self, l: f64) -> f64 {
        match self {
            Segment::Line { a, b } => {
                let len = (b - a).norm();
                (l / len).clamp(0.0, 1.0)
            }
            Segment::Cubic { table, .. } => {
                let total = *table.last().unwrap();
                let l = l.clamp(0.0, total);
                let k = match table.iter().position(|&v| v > l) {
                    Some(0) => 0,
                    Some(k) => k - 1,
                    None => TABLE_STEPS - 1,
                };
                let span = table[k + 1] - table[k];
                let mut t = (k as f64 + if span > 0.0 { (l - table[k]) / span } else { 0.0 })
                    / TABLE_STEPS as f64;
                for _ in 0..20 {
                    let err = self.length_to(t) - l;
                    let speed = self.deriv(t).norm();
                    if speed == 0.0 {
                        break;
                    }
                    let step = err / speed;
                    t = (t - step).clamp(0.0, 1.0);
                    if step.abs() < 1e-15 {
                        break;
                    }
                }
                t
            }
        }
    }

    pub fn start(&self) -> Vec2 {
        self.eval(0.0)
    }

    pub fn end(&self) -> Vec2 {
        self.eval(1.0)
    }
}

/// Closed, counter-clockwise, arclength-parametrized boundary.
#[derive(Debug, Clone)]
pub struct BoundaryCurve {
    segments: Vec<Segment>,
    offsets: Vec<f64>,
    length: f64,
    corners: Vec<usize>,
    regularity: Regularity,
    pub r0: f64,
    pub m: f64,
}

impl BoundaryCurve {
    /// Builds a curve from segments. `declared` overrides the detected class;
    /// declaring a smooth class on a curve with corners is rejected.
    pub fn new(
        mut segments: Vec<Segment>,
        declared: Option<Regularity>,
        r0: f64,
        m: f64,
    ) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Geometry("boundary has no segments".into()));
        }
        if !(r0 > 0.0 && m > 0.0) {
            return Err(Error::InvalidInput("r0 and M must be positive".into()));
        }
        let n = segments.len();
        for i in 0..n {
            let gap = (segments[i].end() - segments[(i + 1) % n].start()).norm();
            let scale = segments[i].length().max(1e-300);
            if gap > 1e-9 * scale.max(1.0) {
                return Err(Error::Geometry(format!(
                    "segment {i} does not join segment {} (gap {gap:e})",
                    (i + 1) % n
                )));
            }
        }
        if signed_area(&segments) < 0.0 {
            segments.reverse();
            for s in segments.iter_mut() {
                *s = match s {
                    Segment::Line { a, b } => Segment::line(*b, *a),
                    Segment::Cubic { p, .. } => Segment::cubic([p[3], p[2], p[1], p[0]]),
                };
            }
        }
        let mut offsets = Vec::with_capacity(n);
        let mut acc = 0.0;
        for s in &segments {
            offsets.push(acc);
            acc += s.length();
        }
        let corners = (0..n)
            .filter(|&i| {
                let prev = &segments[(i + n - 1) % n];
                let a = prev.deriv(1.0).normalize();
                let b = segments[i].deriv(0.0).normalize();
                let angle = a.perp(&b).atan2(a.dot(&b)).abs();
                angle > CORNER_ANGLE
            })
            .collect::<Vec<_>>();
        let detected = if corners.is_empty() {
            Regularity::C11
        } else {
            Regularity::Lipschitz
        };
        let regularity = match declared {
            None => detected,
            Some(r) if r.is_smooth() && !corners.is_empty() => {
                return Err(Error::RegularityMismatch {
                    declared: r.to_string(),
                    corners: corners.len(),
                });
            }
            Some(r) => r,
        };
        let curve = BoundaryCurve {
            segments,
            offsets,
            length: acc,
            corners,
            regularity,
            r0,
            m,
        };
        curve.check_simple()?;
        if matches!(curve.regularity, Regularity::Lipschitz) {
            let c = curve.local_graph_constant()?;
            if c > m * (1.0 + 1e-9) {
                return Err(Error::Geometry(format!(
                    "local graph constant {c:.4} exceeds M = {m}"
                )));
            }
        }
        Ok(curve)
    }

    /// Closed polygon through `vertices`.
    pub fn polygon(vertices: &[Vec2], declared: Option<Regularity>, r0: f64, m: f64) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::Geometry("polygon needs at least 3 vertices".into()));
        }
        let n = vertices.len();
        let segs = (0..n)
            .map(|i| Segment::line(vertices[i], vertices[(i + 1) % n]))
            .collect();
        Self::new(segs, declared, r0, m)
    }

    /// Periodic interpolating cubic spline through `points` (C² in its
    /// parameter), converted to Bezier segments.
    pub fn spline(points: &[Vec2], declared: Option<Regularity>, r0: f64, m: f64) -> Result<Self> {
        let n = points.len();
        if n < 4 {
            return Err(Error::Geometry("spline needs at least 4 control points".into()));
        }
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut rx = DVector::<f64>::zeros(n);
        let mut ry = DVector::<f64>::zeros(n);
        for i in 0..n {
            a[(i, (i + n - 1) % n)] += 1.0;
            a[(i, i)] += 4.0;
            a[(i, (i + 1) % n)] += 1.0;
            let d = (points[(i + 1) % n] - points[(i + n - 1) % n]) * 3.0;
            rx[i] = d.x;
            ry[i] = d.y;
        }
        let lu = a.lu();
        let dx = lu
            .solve(&rx)
            .ok_or_else(|| Error::Geometry("spline system singular".into()))?;
        let dy = lu
            .solve(&ry)
            .ok_or_else(|| Error::Geometry("spline system singular".into()))?;
        let segs = (0..n)
            .map(|i| {
                let j = (i + 1) % n;
                let di = Vec2::new(dx[i], dy[i]);
                let dj = Vec2::new(dx[j], dy[j]);
                Segment::cubic([points[i], points[i] + di / 3.0, points[j] - dj / 3.0, points[j]])
            })
            .collect();
        Self::new(segs, declared, r0, m)
    }

    /// Spline approximation of a circle with `n` control points, starting at
    /// angle zero.
    pub fn circle(center: Vec2, radius: f64, n: usize, r0: f64, m: f64) -> Result<Self> {
        let pts: Vec<Vec2> = (0..n)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                center + Vec2::new(th.cos(), th.sin()) * radius
            })
            .collect();
        Self::spline(&pts, None, r0, m)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn regularity(&self) -> Regularity {
        self.regularity
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Arclength offset of the start of each segment.
    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Indices of segments whose start joint is a corner.
    pub fn corners(&self) -> &[usize] {
        &self.corners
    }

    pub fn corner_params(&self) -> Vec<f64> {
        self.corners.iter().map(|&i| self.offsets[i]).collect()
    }

    pub fn wrap(&self, s: f64) -> f64 {
        let w = s.rem_euclid(self.length);
        if w >= self.length {
            0.0
        } else {
            w
        }
    }

    /// Segment index and local parameter at arclength `s`.
    pub fn locate(&self, s: f64) -> (usize, f64) {
        let s = self.wrap(s);
        let i = match self.offsets.iter().position(|&o| o > s) {
            Some(0) => 0,
            Some(k) => k - 1,
            None => self.segments.len() - 1,
        };
        (i, self.segments[i].param_at(s - self.offsets[i]))
    }

    pub fn point_at(&self, s: f64) -> Vec2 {
        let (i, t) = self.locate(s);
        self.segments[i].eval(t)
    }

    /// Unit tangent (direction of increasing arclength).
    pub fn tangent_at(&self, s: f64) -> Vec2 {
        let (i, t) = self.locate(s);
        self.segments[i].deriv(t).normalize()
    }

    /// Outward unit normal (the curve runs counter-clockwise).
    pub fn normal_at(&self, s: f64) -> Vec2 {
        let t = self.tangent_at(s);
        Vec2::new(t.y, -t.x)
    }

    /// Arclength of `(segment, t)`.
    pub fn param_of(&self, seg: usize, t: f64) -> f64 {
        self.offsets[seg] + self.segments[seg].length_to(t)
    }

    /// Closest curve point to `x`: returns `(s, distance)`.
    pub fn project(&self, x: &Vec2) -> (f64, f64) {
        let mut best = (0.0, f64::INFINITY);
        for (i, seg) in self.segments.iter().enumerate() {
            let (t, d) = closest_on_segment(seg, x, 0.0, 1.0);
            if d < best.1 {
                best = (self.param_of(i, t), d);
            }
        }
        (self.wrap(best.0), best.1)
    }

    /// Distance from `x` to the closed arc `[from, to]` (arclength, may wrap).
    pub fn distance_to_arc(&self, x: &Vec2, from: f64, to: f64) -> f64 {
        let from = self.wrap(from);
        let span = (self.wrap(to) - from).rem_euclid(self.length);
        let span = if span == 0.0 && to != from { self.length } else { span };
        let mut best = f64::INFINITY;
        for (i, seg) in self.segments.iter().enumerate() {
            let o = self.offsets[i];
            let len = seg.length();
            // intersect [o, o+len] with [from, from+span] modulo length
            for shift in [-self.length, 0.0, self.length] {
                let a = (from + shift).max(o);
                let b = (from + span + shift).min(o + len);
                if b < a {
                    continue;
                }
                let ta = seg.param_at(a - o);
                let tb = seg.param_at(b - o);
                let (_, d) = closest_on_segment(seg, x, ta, tb);
                best = best.min(d);
            }
        }
        best
    }

    /// Polyline sample of the whole curve with at least `per_segment`
    /// points per segment; returns `(s, point)` pairs.
    pub fn sample(&self, per_segment: usize) -> Vec<(f64, Vec2)> {
        let mut out = Vec::new();
        for (i, seg) in self.segments.iter().enumerate() {
            let n = match seg {
                Segment::Line { .. } => 1,
                Segment::Cubic { .. } => per_segment.max(1),
            };
            for k in 0..n {
                let l = seg.length() * k as f64 / n as f64;
                let t = seg.param_at(l);
                out.push((self.offsets[i] + l, seg.eval(t)));
            }
        }
        out
    }

    /// Maximum over the curve of `sup|φ|/r0 + Lip(φ)` for the local graph
    /// representation in a ball of radius `r0`, evaluated on a dense sample.
    /// Fails if the boundary inside some ball is not a graph over the local
    /// frame.
    pub fn local_graph_constant(&self) -> Result<f64> {
        let dense = self.dense_sample();
        let n = dense.len();
        let mut worst: f64 = 0.0;
        let centers: Vec<usize> = (0..n).step_by((n / 256).max(1)).collect();
        let corner_set: Vec<f64> = self.corner_params();
        for &c in &centers {
            let (sc, pc) = dense[c];
            let at_corner = corner_set.iter().any(|&cs| (cs - sc).abs() < 1e-12);
            let base = if at_corner {
                let tin = self.tangent_at(sc - 1e-9 * self.length);
                let tout = self.tangent_at(sc);
                let b = tin + tout;
                if b.norm() < 1e-12 {
                    return Err(Error::Geometry("cusp in boundary".into()));
                }
                b.normalize()
            } else {
                self.tangent_at(sc)
            };
            // the frame may be rotated freely; keep the best one
            let mut best = f64::INFINITY;
            for j in 0..FRAME_ROTATIONS {
                let th = std::f64::consts::PI * (j as f64 / FRAME_ROTATIONS as f64 - 0.5);
                let (sn, cs) = th.sin_cos();
                let tangent = Vec2::new(cs * base.x - sn * base.y, sn * base.x + cs * base.y);
                if let Some(v) = self.graph_constant_in_frame(&dense, c, pc, tangent) {
                    best = best.min(v);
                }
            }
            if !best.is_finite() {
                return Err(Error::Geometry(format!(
                    "boundary is not a local graph near s = {sc:.6}"
                )));
            }
            worst = worst.max(best);
        }
        Ok(worst)
    }

    fn graph_constant_in_frame(
        &self,
        dense: &[(f64, Vec2)],
        c: usize,
        pc: Vec2,
        tangent: Vec2,
    ) -> Option<f64> {
        let n = dense.len();
        let normal_in = Vec2::new(-tangent.y, tangent.x);
        // connected run of samples around c inside the cylinder |x'| < r0
        let mut run = vec![(0.0f64, 0.0f64)];
        for dir in [1isize, -1] {
            let mut k = 1;
            let mut last = (0.0f64, 0.0f64);
            loop {
                let idx = ((c as isize + dir * k as isize).rem_euclid(n as isize)) as usize;
                if idx == c {
                    break;
                }
                let d = dense[idx].1 - pc;
                let x = d.dot(&tangent);
                let y = d.dot(&normal_in);
                if x.abs() >= self.r0 || d.norm() >= 2.0 * self.r0 {
                    // close the run at the cylinder wall
                    if x.abs() >= self.r0 && (x - last.0).abs() > 0.0 && last.0.abs() < self.r0 {
                        let wall = self.r0.copysign(x) * (1.0 - 1e-12);
                        let t = (wall - last.0) / (x - last.0);
                        run.push((wall, last.1 + t * (y - last.1)));
                    }
                    break;
                }
                run.push((x, y));
                last = (x, y);
                k += 1;
            }
        }
        run.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut lip: f64 = 0.0;
        for w in run.windows(2) {
            let dx = w[1].0 - w[0].0;
            if dx <= 1e-12 * self.r0 {
                return None;
            }
            lip = lip.max((w[1].1 - w[0].1).abs() / dx);
        }
        let sup = run.iter().fold(0.0f64, |m, w| m.max(w.1.abs()));
        Some(sup / self.r0 + lip)
    }

    fn dense_sample(&self) -> Vec<(f64, Vec2)> {
        let step = (self.r0 / 64.0).min(self.length / 512.0);
        let mut out = Vec::new();
        for (i, seg) in self.segments.iter().enumerate() {
            let n = (seg.length() / step).ceil().max(1.0) as usize;
            for k in 0..n {
                let l = seg.length() * k as f64 / n as f64;
                out.push((self.offsets[i] + l, seg.eval(seg.param_at(l))));
            }
        }
        out
    }

    fn check_simple(&self) -> Result<()> {
        let pts = self.sample(16);
        let n = pts.len();
        for i in 0..n {
            let a0 = pts[i].1;
            let a1 = pts[(i + 1) % n].1;
            for j in i + 2..n {
                if (j + 1) % n == i {
                    continue;
                }
                let b0 = pts[j].1;
                let b1 = pts[(j + 1) % n].1;
                if segments_cross(&a0, &a1, &b0, &b1) {
                    return Err(Error::Geometry(format!(
                        "boundary self-intersects near s = {:.6}",
                        pts[i].0
                    )));
                }
            }
        }
        Ok(())
    }
}

fn signed_area(segments: &[Segment]) -> f64 {
    let mut area = 0.0;
    for seg in segments {
        area += GAUSS5.integrate(0.0, 1.0, |t| {
            let p = seg.eval(t);
            let d = seg.deriv(t);
            0.5 * (p.x * d.y - p.y * d.x)
        });
    }
    area
}

fn segments_cross(a0: &Vec2, a1: &Vec2, b0: &Vec2, b1: &Vec2) -> bool {
    let d1 = (a1 - a0).perp(&(b0 - a0));
    let d2 = (a1 - a0).perp(&(b1 - a0));
    let d3 = (b1 - b0).perp(&(a0 - b0));
    let d4 = (b1 - b0).perp(&(a1 - b0));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Closest point of `seg` restricted to `t ∈ [ta, tb]`.
pub(crate) fn closest_on_segment(seg: &Segment, x: &Vec2, ta: f64, tb: f64) -> (f64, f64) {
    match seg {
        Segment::Line { a, b } => {
            let d = b - a;
            let len2 = d.norm_squared();
            let t = if len2 > 0.0 { ((x - a).dot(&d) / len2).clamp(ta, tb) } else { ta };
            (t, (a + d * t - x).norm())
        }
        Segment::Cubic { .. } => {
            let n = 24;
            let mut best = (ta, (seg.eval(ta) - x).norm());
            for k in 1..=n {
                let t = ta + (tb - ta) * k as f64 / n as f64;
                let d = (seg.eval(t) - x).norm();
                if d < best.1 {
                    best = (t, d);
                }
            }
            // golden-section refinement in the bracketing cell
            let h = (tb - ta) / n as f64;
            let (mut lo, mut hi) = ((best.0 - h).max(ta), (best.0 + h).min(tb));
            let g = 0.618_033_988_749_895;
            let f = |t: f64| (seg.eval(t) - x).norm();
            let mut c = hi - g * (hi - lo);
            let mut d = lo + g * (hi - lo);
            let (mut fc, mut fd) = (f(c), f(d));
            for _ in 0..60 {
                if fc < fd {
                    hi = d;
                    d = c;
                    fd = fc;
                    c = hi - g * (hi - lo);
                    fc = f(c);
                } else {
                    lo = c;
                    c = d;
                    fc = fd;
                    d = lo + g * (hi - lo);
                    fd = f(d);
                }
            }
            let t = 0.5 * (lo + hi);
            let dt = f(t);
            if dt < best.1 {
                (t, dt)
            } else {
                best
            }
        }
    }
}
