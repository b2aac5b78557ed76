use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::continuation::{ArcSampling, CauchyData, Regularization};
use crate::error::{Error, Result};
use crate::forward::{solve_forward_on, DiscreteField, FluxPiece, NeumannFlux, RobinCoefficient};
use crate::geometry::{Domain, DomainFile, Side};
use crate::mesh::{MeshKind, TriMesh};
use crate::recovery::RecoveryConfig;

/// A domain given by file path (relative to the config) or inline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DomainSource {
    Path(PathBuf),
    Inline(Box<DomainFile>),
}

/// Ground-truth γ, piecewise linear on Γ_I: explicit `(offset, value)`
/// knots in arclength from the start of Γ_I, or a plateau.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaSpec {
    #[serde(default)]
    pub knots: Vec<[f64; 2]>,
    #[serde(default)]
    pub plateau: Option<PlateauSpec>,
    pub gamma0: f64,
}

/// `value` on the inner part of Γ_I, rising from 0 at both ends along a
/// `sin²` ramp of arclength `ramp` sampled at `segments` knots.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlateauSpec {
    pub value: f64,
    pub ramp: f64,
    #[serde(default = "default_ramp_segments")]
    pub segments: usize,
}

fn default_ramp_segments() -> usize {
    16
}

impl GammaSpec {
    /// Knots on a Γ_I of the given length.
    pub fn knots_on(&self, length: f64) -> Result<Vec<(f64, f64)>> {
        let mut out: Vec<(f64, f64)> = self.knots.iter().map(|k| (k[0], k[1])).collect();
        if let Some(p) = self.plateau {
            if !out.is_empty() {
                return Err(Error::Configuration("give either γ knots or a plateau, not both".into()));
            }
            if !(p.ramp > 0.0 && 2.0 * p.ramp < length) || p.segments == 0 {
                return Err(Error::Configuration(format!(
                    "plateau ramp {} must be positive and shorter than half of Γ_I",
                    p.ramp
                )));
            }
            let n = p.segments;
            let rise = |k: usize| {
                let t = k as f64 / n as f64;
                (p.ramp * t, p.value * (0.5 * std::f64::consts::PI * t).sin().powi(2))
            };
            out.extend((0..=n).map(rise));
            out.extend((0..=n).rev().map(rise).map(|(s, v)| (length - s, v)));
        }
        if out.is_empty() {
            return Err(Error::Configuration("γ needs knots or a plateau".into()));
        }
        Ok(out)
    }
}

/// `amplitude · sin²(π (s − from)/(to − from))` on `[from, to]`, sampled
/// as `segments` linear pieces.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BumpSpec {
    pub from: f64,
    pub to: f64,
    pub amplitude: f64,
    #[serde(default = "default_segments")]
    pub segments: usize,
}

fn default_segments() -> usize {
    32
}

impl BumpSpec {
    pub fn pieces(&self) -> Vec<FluxPiece> {
        let n = self.segments.max(1);
        let at = |k: usize| {
            let t = k as f64 / n as f64;
            (self.from + (self.to - self.from) * t, self.amplitude * (std::f64::consts::PI * t).sin().powi(2))
        };
        (0..n)
            .map(|k| {
                let (a, va) = at(k);
                let (b, vb) = at(k + 1);
                FluxPiece {
                    from: a,
                    to: b,
                    start_value: va,
                    end_value: vb,
                }
            })
            .collect()
    }
}

/// Current flux on Γ_A: explicit linear pieces plus optional bumps. Ends
/// use the domain file's arc units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FluxSpec {
    #[serde(default)]
    pub pieces: Vec<FluxPiece>,
    #[serde(default)]
    pub bumps: Vec<BumpSpec>,
    #[serde(default)]
    pub support_margin: f64,
    #[serde(default = "infinite")]
    pub holder_bound: f64,
    #[serde(default = "one")]
    pub holder_exponent: f64,
}

fn infinite() -> f64 {
    f64::INFINITY
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimateWindow {
    /// Number of probe centers spread over Γ_I^{r0}.
    pub centers: usize,
    /// Cap r̄ on the radius window; the lower end is `4h`.
    pub r_bar: f64,
    pub n_radii: usize,
    /// Muckenhoupt exponent.
    pub p: f64,
}

impl Default for EstimateWindow {
    fn default() -> Self {
        EstimateWindow {
            centers: 3,
            r_bar: 0.25,
            n_radii: 6,
            p: 4.0,
        }
    }
}

fn default_eps() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
}

fn default_draws() -> usize {
    20
}

fn default_degree() -> usize {
    10
}

fn default_regularization() -> Regularization {
    Regularization::Discrepancy
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// One experiment, read from TOML.
///
/// ```toml
/// seed = 7
/// domain = "square.toml"
/// h = 0.03125
/// eps = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
/// draws = 20
/// output = "out/square"
///
/// [gamma]
/// knots = [[0.0, 0.5]]
/// gamma0 = 0.5
///
/// [flux]
/// pieces = [{ from = 2.0, to = 3.0, start_value = 1.0, end_value = 1.0 }]
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub domain: DomainSource,
    pub h: f64,
    #[serde(default)]
    pub mesh: MeshKind,
    pub gamma: GammaSpec,
    pub flux: FluxSpec,
    /// Strictly decreasing noise levels; a trailing 0 adds a clean run.
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    #[serde(default = "default_draws")]
    pub draws: usize,
    /// Largest degree of the harmonic continuation basis.
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_regularization")]
    pub regularization: Regularization,
    #[serde(default)]
    pub recovery: RecoveryConfig,
    #[serde(default)]
    pub estimates: EstimateWindow,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::Configuration(format!("mesh size h = {} must be positive", self.h)));
        }
        if self.draws == 0 {
            return Err(Error::Configuration("draws must be at least 1".into()));
        }
        if self.eps.is_empty() {
            return Err(Error::Configuration("the ε grid is empty".into()));
        }
        if self.eps.iter().any(|e| !(*e >= 0.0 && *e < 1.0)) {
            return Err(Error::Configuration("noise levels must lie in [0, 1)".into()));
        }
        if self.eps.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Configuration("the ε grid must be strictly decreasing".into()));
        }
        if self.degree < 2 {
            return Err(Error::Configuration("continuation degree must be at least 2".into()));
        }
        if self.gamma.knots.is_empty() && self.gamma.plateau.is_none() {
            return Err(Error::Configuration("γ needs knots or a plateau".into()));
        }
        self.recovery.validate()?;
        let w = &self.estimates;
        if !(w.r_bar > 0.0) || w.n_radii < 3 || !(w.p > 1.0) {
            return Err(Error::Configuration(
                "estimate window needs r_bar > 0, n_radii ≥ 3 and p > 1".into(),
            ));
        }
        Ok(())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(&self.output)
    }

    pub fn domain_file(&self) -> Result<DomainFile> {
        match &self.domain {
            DomainSource::Path(p) => DomainFile::load(&self.base_dir.join(p)),
            DomainSource::Inline(d) => Ok((**d).clone()),
        }
    }

    /// Noise levels of the sweep, without a trailing clean level.
    pub fn noisy_levels(&self) -> Vec<f64> {
        self.eps.iter().copied().filter(|e| *e > 0.0).collect()
    }

    /// Decades covered by the noisy levels.
    pub fn decades(&self) -> f64 {
        let e = self.noisy_levels();
        match (e.first(), e.last()) {
            (Some(a), Some(b)) => (a / b).log10(),
            _ => 0.0,
        }
    }
}

/// The a priori data `(r0, M, d0, γ0, E, r̂)` of the problem class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AprioriData {
    pub r0: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub d0: f64,
    pub gamma0: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub r_hat: f64,
}

/// Everything resolved from a config that does not depend on noise.
#[derive(Debug, Clone)]
pub struct Problem {
    pub domain: Domain,
    pub mesh: Arc<TriMesh>,
    pub flux: NeumannFlux,
    pub gamma: RobinCoefficient,
    /// Forward solution with the true γ.
    pub field: DiscreteField,
    /// Exact Cauchy data on Γ_A.
    pub data: CauchyData,
    /// Γ_I nodes where continuation and recovery are evaluated.
    pub target: ArcSampling,
    pub apriori: AprioriData,
}

impl Problem {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let file = cfg.domain_file()?;
        let domain = file.build()?;
        let h = cfg.h;
        let mesh = Arc::new(TriMesh::generate(&domain, h, cfg.mesh)?);
        Self::on_mesh(cfg, &file, domain, mesh)
    }

    pub(crate) fn on_mesh(cfg: &ExperimentConfig, file: &DomainFile, domain: Domain, mesh: Arc<TriMesh>) -> Result<Self> {
        let pieces = cfg
            .flux
            .pieces
            .iter()
            .cloned()
            .chain(cfg.flux.bumps.iter().flat_map(BumpSpec::pieces))
            .map(|p: FluxPiece| FluxPiece {
                from: file.to_arclength(&domain, p.from),
                to: file.to_arclength(&domain, p.to),
                ..p
            })
            .collect();
        let flux = NeumannFlux::new(
            pieces,
            cfg.flux.support_margin,
            cfg.flux.holder_bound,
            cfg.flux.holder_exponent,
        )?;
        let gamma = RobinCoefficient::piecewise_linear(cfg.gamma.knots_on(domain.gamma_i.span)?, cfg.gamma.gamma0)?;
        let field = solve_forward_on(&mesh, &domain, &flux, &gamma)?;
        let data = CauchyData::from_field(&field, &domain, Some(&flux));
        let target = ArcSampling::nodes_on_mesh(&field, &domain, Side::I);
        let apriori = AprioriData {
            r0: domain.r0(),
            m: file.m,
            d0: domain.d0,
            gamma0: gamma.gamma0,
            e: flux.holder_bound,
            r_hat: flux.support_margin,
        };
        Ok(Problem {
            domain,
            mesh,
            flux,
            gamma,
            field,
            data,
            target,
            apriori,
        })
    }

    /// Recovery settings with the clamp defaulting to γ0.
    pub fn recovery_config(&self, cfg: &ExperimentConfig) -> RecoveryConfig {
        RecoveryConfig {
            gamma0: cfg.recovery.gamma0.or(Some(self.gamma.gamma0)),
            ..cfg.recovery
        }
    }
}
