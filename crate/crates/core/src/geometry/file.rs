//! Domain description files (TOML).
//!
//! ```toml
//! name = "unit-square"
//! d0 = 1.5
//! r0 = 0.25
//! M = 2.0
//! regularity = "lipschitz"   # optional: lipschitz | c1alpha | c11 (detected when absent)
//! alpha = 1.0                # used with c1alpha
//! arc_units = "length"       # or "fraction" of the total perimeter
//! gamma_i = [0.0, 1.0]       # start and end along the counter-clockwise parametrization
//! gamma_a = [1.0, 4.0]       # optional; must be the complement of gamma_i
//!
//! [boundary]
//! kind = "polygon"           # polygon | spline | circle
//! vertices = [[0, 0], [1, 0], [1, 1], [0, 1]]
//! # spline:  points = [[x, y], ...]
//! # circle:  center = [0, 0], radius = 1.0, control_points = 128
//! ```
//!
//! The parametrization starts at the first vertex (or at angle zero for a
//! circle) and runs counter-clockwise; clockwise vertex lists are rejected so
//! that arc ranges keep their meaning.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::curve::{BoundaryCurve, Regularity, Vec2};
use super::domain::{ArcInterval, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ArcUnits {
    #[default]
    Length,
    Fraction,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BoundarySpec {
    Polygon {
        vertices: Vec<[f64; 2]>,
    },
    Spline {
        points: Vec<[f64; 2]>,
    },
    Circle {
        center: [f64; 2],
        radius: f64,
        #[serde(default = "default_control_points")]
        control_points: usize,
    },
}

fn default_control_points() -> usize {
    128
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainFile {
    pub name: String,
    pub d0: f64,
    pub r0: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(default)]
    pub regularity: Option<String>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub arc_units: ArcUnits,
    pub gamma_i: [f64; 2],
    #[serde(default)]
    pub gamma_a: Option<[f64; 2]>,
    pub boundary: BoundarySpec,
}

impl DomainFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn build(&self) -> Result<Domain> {
        let declared = match self.regularity.as_deref() {
            None => None,
            Some("lipschitz") => Some(Regularity::Lipschitz),
            Some("c11") => Some(Regularity::C11),
            Some("c1alpha") => {
                let a = self.alpha.unwrap_or(1.0);
                if !(a > 0.0 && a <= 1.0) {
                    return Err(Error::InvalidInput(format!("alpha {a} must lie in (0, 1]")));
                }
                Some(Regularity::C1Alpha(a))
            }
            Some(other) => {
                return Err(Error::Parse(format!("unknown regularity class '{other}'")));
            }
        };
        let curve = match &self.boundary {
            BoundarySpec::Polygon { vertices } => {
                let v = to_points(vertices);
                if shoelace(&v) <= 0.0 {
                    return Err(Error::Geometry(
                        "polygon vertices must be listed counter-clockwise".into(),
                    ));
                }
                BoundaryCurve::polygon(&v, declared, self.r0, self.m)?
            }
            BoundarySpec::Spline { points } => {
                let v = to_points(points);
                if shoelace(&v) <= 0.0 {
                    return Err(Error::Geometry(
                        "spline points must be listed counter-clockwise".into(),
                    ));
                }
                BoundaryCurve::spline(&v, declared, self.r0, self.m)?
            }
            BoundarySpec::Circle {
                center,
                radius,
                control_points,
            } => {
                let c = BoundaryCurve::circle(
                    Vec2::new(center[0], center[1]),
                    *radius,
                    *control_points,
                    self.r0,
                    self.m,
                )?;
                match declared {
                    Some(r) => {
                        let pts: Vec<Vec2> = (0..*control_points)
                            .map(|k| {
                                let th = 2.0 * std::f64::consts::PI * k as f64
                                    / *control_points as f64;
                                Vec2::new(center[0], center[1])
                                    + Vec2::new(th.cos(), th.sin()) * *radius
                            })
                            .collect();
                        BoundaryCurve::spline(&pts, Some(r), self.r0, self.m)?
                    }
                    None => c,
                }
            }
        };
        let len = curve.length();
        let scale = match self.arc_units {
            ArcUnits::Length => 1.0,
            ArcUnits::Fraction => len,
        };
        let to_arc = |r: [f64; 2]| {
            let a = r[0] * scale;
            let b = r[1] * scale;
            let span = (b - a).rem_euclid(len);
            let span = if span == 0.0 && b != a { len } else { span };
            ArcInterval { start: a, span }
        };
        let gamma_i = to_arc(self.gamma_i);
        match self.gamma_a {
            Some(ga) => Domain::with_arcs(&self.name, curve, to_arc(ga), gamma_i, self.d0),
            None => Domain::new(&self.name, curve, gamma_i, self.d0),
        }
    }

    /// Converts a parameter in file units to arclength.
    pub fn to_arclength(&self, domain: &Domain, s: f64) -> f64 {
        match self.arc_units {
            ArcUnits::Length => s,
            ArcUnits::Fraction => s * domain.length(),
        }
    }
}

fn to_points(v: &[[f64; 2]]) -> Vec<Vec2> {
    v.iter().map(|p| Vec2::new(p[0], p[1])).collect()
}

fn shoelace(v: &[Vec2]) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| v[i].x * v[(i + 1) % n].y - v[(i + 1) % n].x * v[i].y)
        .sum::<f64>()
        * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = r#"
name = "unit-square"
d0 = 1.5
r0 = 0.25
M = 2.0
gamma_i = [0.0, 1.0]
gamma_a = [1.0, 4.0]

[boundary]
kind = "polygon"
vertices = [[0, 0], [1, 0], [1, 1], [0, 1]]
"#;

    #[test]
    fn parses_square() {
        let d = DomainFile::from_toml(SQUARE).unwrap().build().unwrap();
        assert_eq!(d.curve.regularity(), Regularity::Lipschitz);
        assert!((d.gamma_i.span - 1.0).abs() < 1e-15);
        assert!((d.gamma_a.start - 1.0).abs() < 1e-15);
    }

    #[test]
    fn clockwise_polygon_rejected() {
        let text = SQUARE.replace("[[0, 0], [1, 0], [1, 1], [0, 1]]", "[[0, 0], [0, 1], [1, 1], [1, 0]]");
        assert!(DomainFile::from_toml(&text).unwrap().build().is_err());
    }

    #[test]
    fn circle_in_fraction_units() {
        let text = r#"
name = "disk"
d0 = 2.001
r0 = 0.25
M = 1.0
arc_units = "fraction"
regularity = "c11"
gamma_i = [0.5, 1.0]

[boundary]
kind = "circle"
center = [0, 0]
radius = 1.0
control_points = 64
"#;
        let d = DomainFile::from_toml(text).unwrap().build().unwrap();
        assert!((d.gamma_i.span - 0.5 * d.length()).abs() < 1e-12);
        assert_eq!(d.curve.regularity(), Regularity::C11);
    }
}
