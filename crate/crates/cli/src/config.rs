//! Model files (one Lévy process each) and scenario files (a validation run).
//!
//! Both are TOML. Unknown keys are rejected and every numeric invariant of
//! the specs is checked at load time.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use refracted_core::{LevySpec, RefractedSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// On-disk form of a [`LevySpec`].
///
/// ```toml
/// family = "cpp"
/// delta = 2.0
/// lambda = [1.0]
/// mu = [1.0]
/// ```
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelFile {
    #[serde(alias = "CPP")]
    Cpp {
        delta: f64,
        lambda: Vec<f64>,
        mu: Vec<f64>,
    },
    #[serde(alias = "STABLE")]
    Stable { alpha: f64 },
}

impl ModelFile {
    pub fn to_spec(&self) -> refracted_core::Result<LevySpec> {
        match self {
            Self::Cpp { delta, lambda, mu } => LevySpec::cpp(*delta, lambda.clone(), mu.clone()),
            Self::Stable { alpha } => LevySpec::stable(*alpha),
        }
    }
}

pub fn parse_model(text: &str, origin: &str) -> Result<LevySpec> {
    let file: ModelFile =
        toml::from_str(text).map_err(|e| CliError::config(origin, e.to_string()))?;
    file.to_spec()
        .map_err(|e| CliError::config(origin, e.to_string()))
}

pub fn load_model(path: &Path) -> Result<LevySpec> {
    let text = read(path)?;
    parse_model(&text, &path.display().to_string())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// Boundary values and degenerate cases, checked with tolerance 0.
    Trivial,
    /// Generalized formulas against the drift-refracted closed forms.
    KlEquivalence,
    /// Transform, normalization, resolvent-mass and resolvent-equation identities.
    Identities,
    /// Monte Carlo against the analytic exit and occupation formulas.
    Mc,
    #[default]
    All,
}

/// One (b, a, x0, q) configuration of the exit functional.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExitCase {
    pub b: f64,
    pub a: f64,
    pub x0: f64,
    pub q: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSettings {
    /// Truncation levels for the convergence study; exit and occupation
    /// checks use the last one.
    pub levels: Vec<u32>,
    pub reps: u64,
    pub seed: u64,
    pub exit: Vec<ExitCase>,
    pub convergence: ExitCase,
    pub occupation_reps: u64,
    /// 0 skips the occupation checks.
    pub occupation_bins: usize,
    pub occupation_q: f64,
    pub occupation_x0: f64,
    /// (b, a); the bins split [b, a] evenly.
    pub occupation_barriers: [f64; 2],
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            levels: vec![4, 16, 64],
            reps: 1_000_000,
            seed: 2024,
            exit: vec![
                ExitCase {
                    b: -1.0,
                    a: 1.0,
                    x0: 0.0,
                    q: 0.0,
                },
                ExitCase {
                    b: -1.0,
                    a: 1.0,
                    x0: 0.5,
                    q: 1.0,
                },
            ],
            convergence: ExitCase {
                b: -1.0,
                a: 1.0,
                x0: 0.5,
                q: 1.0,
            },
            occupation_reps: 100_000,
            occupation_bins: 10,
            occupation_q: 1.0,
            occupation_x0: 0.0,
            occupation_barriers: [-1.0, 1.0],
        }
    }
}

/// Relative tolerances unless noted.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub transform: f64,
    pub kl: f64,
    pub dual_route: f64,
    pub mass: f64,
    /// Absolute.
    pub resolvent_equation: f64,
    /// Absolute, added to 3 standard errors per bin.
    pub occupation: f64,
    /// Relative quadrature tolerance of the resolvent paths.
    pub resolvent_quadrature: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            transform: 1e-5,
            kl: 1e-5,
            dual_route: 1e-5,
            mass: 1e-5,
            resolvent_equation: 1e-3,
            occupation: 1e-4,
            resolvent_quadrature: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    suite: Suite,
    model_x: PathBuf,
    model_y: Option<PathBuf>,
    #[serde(default = "default_q")]
    q: Vec<f64>,
    #[serde(default = "default_barriers")]
    barriers: Vec<[f64; 2]>,
    #[serde(default = "default_x_grid")]
    x_grid: Vec<f64>,
    #[serde(default = "default_y_grid")]
    y_grid: Vec<f64>,
    #[serde(default = "default_kl_alpha")]
    kl_alpha: f64,
    #[serde(default = "default_resolvent_equation_q")]
    resolvent_equation_q: [f64; 2],
    #[serde(default)]
    mc: McSettings,
    #[serde(default)]
    tolerances: Tolerances,
}

fn default_q() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

fn default_barriers() -> Vec<[f64; 2]> {
    vec![[-2.0, 2.0]]
}

fn default_x_grid() -> Vec<f64> {
    vec![-1.5, -0.75, 0.0, 0.75, 1.5]
}

fn default_y_grid() -> Vec<f64> {
    vec![-1.8, -0.9, -0.3, 0.4, 1.2]
}

fn default_kl_alpha() -> f64 {
    0.5
}

fn default_resolvent_equation_q() -> [f64; 2] {
    [1.0, 2.0]
}

/// A validated scenario with its models loaded.
#[derive(Clone, Debug, Serialize)]
pub struct Scenario {
    pub suite: Suite,
    pub x: LevySpec,
    pub y: LevySpec,
    #[serde(skip)]
    pub spec: RefractedSpec,
    pub q: Vec<f64>,
    pub barriers: Vec<(f64, f64)>,
    pub x_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    pub kl_alpha: f64,
    pub resolvent_equation_q: [f64; 2],
    pub mc: McSettings,
    pub tolerances: Tolerances,
}

impl Scenario {
    /// Loads a scenario file; model paths are relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, &path.display().to_string(), base)
    }

    pub fn parse(text: &str, origin: &str, base: &Path) -> Result<Self> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| CliError::config(origin, e.to_string()))?;
        let x = load_model(&base.join(&file.model_x))?;
        let y = match &file.model_y {
            Some(p) => load_model(&base.join(p))?,
            None => x.clone(),
        };
        let spec = RefractedSpec::new(x.clone(), y.clone())
            .map_err(|e| CliError::config(origin, e.to_string()))?;
        let scenario = Self {
            suite: file.suite,
            x,
            y,
            spec,
            q: file.q,
            barriers: file.barriers.iter().map(|p| (p[0], p[1])).collect(),
            x_grid: file.x_grid,
            y_grid: file.y_grid,
            kl_alpha: file.kl_alpha,
            resolvent_equation_q: file.resolvent_equation_q,
            mc: file.mc,
            tolerances: file.tolerances,
        };
        scenario
            .validate()
            .map_err(|m| CliError::config(origin, m))?;
        Ok(scenario)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let finite = |key: &str, v: &[f64]| match v.iter().find(|x| !x.is_finite()) {
            Some(x) => Err(format!("{key}: {x} is not finite")),
            None => Ok(()),
        };
        if self.q.is_empty() {
            return Err("q: at least one discount rate is needed".into());
        }
        finite("q", &self.q)?;
        if let Some(q) = self.q.iter().find(|&&q| q < 0.0) {
            return Err(format!("q: {q} is negative"));
        }
        for &(b, a) in &self.barriers {
            if !(b < 0.0 && 0.0 < a && a.is_finite() && b.is_finite()) {
                return Err(format!("barriers: need b < 0 < a, got [{b}, {a}]"));
            }
        }
        finite("x_grid", &self.x_grid)?;
        finite("y_grid", &self.y_grid)?;
        if !(self.kl_alpha > 0.0 && self.kl_alpha.is_finite()) {
            return Err(format!("kl_alpha: must be positive, got {}", self.kl_alpha));
        }
        let [q1, q2] = self.resolvent_equation_q;
        if !(q1 > 0.0 && q2 > 0.0 && q1 != q2 && q1.is_finite() && q2.is_finite()) {
            return Err(format!(
                "resolvent_equation_q: need two distinct positive rates, got [{q1}, {q2}]"
            ));
        }
        let mc = &self.mc;
        if mc.levels.is_empty() || mc.levels.windows(2).any(|w| w[0] >= w[1]) || mc.levels[0] == 0 {
            return Err("mc.levels: must be positive and strictly increasing".into());
        }
        if mc.reps == 0 || mc.occupation_reps == 0 {
            return Err("mc: replicate counts must be positive".into());
        }
        if !(mc.occupation_q >= 0.0 && mc.occupation_q.is_finite()) {
            return Err(format!(
                "mc.occupation_q: must be >= 0, got {}",
                mc.occupation_q
            ));
        }
        let [ob, oa] = mc.occupation_barriers;
        if !(ob < 0.0
            && oa > 0.0
            && ob <= mc.occupation_x0
            && mc.occupation_x0 <= oa
            && oa.is_finite()
            && ob.is_finite())
        {
            return Err(format!(
                "mc.occupation_barriers: need b < 0 < a around occupation_x0, got [{ob}, {oa}]"
            ));
        }
        for (i, c) in mc.exit.iter().chain([&mc.convergence]).enumerate() {
            if !(c.b < 0.0
                && c.a > 0.0
                && c.b <= c.x0
                && c.x0 <= c.a
                && c.q >= 0.0
                && c.q.is_finite())
            {
                return Err(format!(
                    "mc exit case {i}: need b < 0 < a, b <= x0 <= a and q >= 0, got {c:?}"
                ));
            }
        }
        let t = &self.tolerances;
        for (key, v) in [
            ("transform", t.transform),
            ("kl", t.kl),
            ("dual_route", t.dual_route),
            ("mass", t.mass),
            ("resolvent_equation", t.resolvent_equation),
            ("occupation", t.occupation),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!(
                    "tolerances.{key}: must be finite and >= 0, got {v}"
                ));
            }
        }
        if !(t.resolvent_quadrature > 0.0 && t.resolvent_quadrature < 1.0) {
            return Err(format!(
                "tolerances.resolvent_quadrature: must lie in (0, 1), got {}",
                t.resolvent_quadrature
            ));
        }
        if self.suite == Suite::KlEquivalence && !self.x.is_bounded_variation() {
            return Err("suite kl-equivalence needs a bounded-variation X".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the resolved scenario.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(Sha256::digest(&json))
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_files() {
        let s = parse_model(
            "family = \"cpp\"\ndelta = 2.0\nlambda = [1.0]\nmu = [1.0]\n",
            "x",
        )
        .unwrap();
        assert_eq!(s, LevySpec::cpp(2.0, vec![1.0], vec![1.0]).unwrap());
        let s = parse_model("family = \"STABLE\"\nalpha = 1.5\n", "x").unwrap();
        assert_eq!(s, LevySpec::stable(1.5).unwrap());
    }

    #[test]
    fn model_errors_name_the_key() {
        let err = parse_model(
            "family = \"cpp\"\ndelta = 2.0\nlambda = [1.0]\nmu = [1.0]\nsigma = 1.0\n",
            "m.toml",
        )
        .unwrap_err()
        .to_string();
        assert!(err.starts_with("CONFIG_INVALID: m.toml"), "{err}");
        assert!(err.contains("sigma"), "{err}");
        let err = parse_model("family = \"stable\"\nalpha = 2.5\n", "m.toml").unwrap_err();
        assert!(matches!(err, CliError::ConfigInvalid { .. }));
        let err = parse_model(
            "family = \"cpp\"\ndelta = 2.0\nlambda = [1.0, 2.0]\nmu = [1.0]\n",
            "m.toml",
        );
        assert!(err.is_err());
    }
}
