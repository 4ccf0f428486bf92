use crate::CliError;
use multilayer::layered::{uniform_grid, GreensProblem, LayeredMedium};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    pub fd: Option<FdConfig>,
    #[serde(default)]
    pub eval: EvalConfig,
    pub output: Option<PathBuf>,
}

/// Either explicit `boundaries` + `sigmas`, or `domain` + `sigma` split into
/// `solver.layers` equal layers.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub boundaries: Option<Vec<f64>>,
    pub sigmas: Option<Vec<f64>>,
    pub domain: Option<[f64; 2]>,
    pub sigma: Option<SigmaProfile>,
    pub x0: f64,
    #[serde(rename = "T")]
    pub t: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaProfile {
    Constant(f64),
    /// `sigma_i = exp(-rate * i / N)`, i = 1..N.
    LayerExponential { rate: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_order")]
    pub m: usize,
    pub layers: Option<usize>,
}

fn default_order() -> usize {
    16
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { m: default_order(), layers: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdConfig {
    pub nx: usize,
    pub nt: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EvalConfig {
    Count(usize),
    Points(Vec<f64>),
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig::Count(101)
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub layers: Option<usize>,
    pub stehfest: Option<usize>,
    pub fd_nx: Option<usize>,
    pub fd_nt: Option<usize>,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(p) = &o.out {
            self.output = Some(p.clone());
        }
        if let Some(n) = o.layers {
            self.solver.layers = Some(n);
        }
        if let Some(m) = o.stehfest {
            self.solver.m = m;
        }
        if o.fd_nx.is_some() || o.fd_nt.is_some() {
            let fd = self.fd.get_or_insert(FdConfig { nx: 0, nt: 0 });
            if let Some(n) = o.fd_nx {
                fd.nx = n;
            }
            if let Some(n) = o.fd_nt {
                fd.nt = n;
            }
        }
    }

    pub fn medium(&self) -> Result<LayeredMedium, CliError> {
        let p = &self.problem;
        let explicit = p.boundaries.is_some() || p.sigmas.is_some();
        let profile = p.domain.is_some() || p.sigma.is_some();
        if explicit && profile {
            return Err(CliError::Config(
                "problem: give either boundaries + sigmas or domain + sigma, not both".into(),
            ));
        }
        if explicit {
            let b = p.boundaries.clone().ok_or_else(|| CliError::Config("problem.boundaries: missing".into()))?;
            let s = p.sigmas.clone().ok_or_else(|| CliError::Config("problem.sigmas: missing".into()))?;
            if b.len() < 2 {
                return Err(CliError::Config("problem.boundaries: need at least two values".into()));
            }
            if s.len() != b.len() - 1 {
                return Err(CliError::Config(format!(
                    "problem.sigmas: expected {} values for {} boundaries, got {}",
                    b.len() - 1,
                    b.len(),
                    s.len()
                )));
            }
            if let Some(n) = self.solver.layers {
                if n != s.len() {
                    return Err(CliError::Config(format!(
                        "solver.layers: {n} disagrees with the {} explicit layers",
                        s.len()
                    )));
                }
            }
            return LayeredMedium::new(b, s).map_err(|e| CliError::Config(format!("problem: {e}")));
        }
        let [y0, yn] = p.domain.ok_or_else(|| CliError::Config("problem.domain: missing".into()))?;
        let sigma = p.sigma.ok_or_else(|| CliError::Config("problem.sigma: missing".into()))?;
        let n = self.solver.layers.ok_or_else(|| CliError::Config("solver.layers: required with problem.domain".into()))?;
        let medium = match sigma {
            SigmaProfile::Constant(s) => LayeredMedium::uniform(y0, yn, n, |_| s),
            SigmaProfile::LayerExponential { rate } => {
                LayeredMedium::uniform(y0, yn, n, |i| (-rate * i as f64 / n as f64).exp())
            }
        };
        medium.map_err(|e| CliError::Config(format!("problem: {e}")))
    }

    pub fn greens_problem(&self) -> Result<GreensProblem, CliError> {
        GreensProblem::new(self.medium()?, self.problem.x0, self.problem.t)
            .map_err(|e| CliError::Config(format!("problem: {e}")))
    }

    pub fn abscissas(&self, y0: f64, yn: f64) -> Result<Vec<f64>, CliError> {
        match &self.eval {
            EvalConfig::Count(0) => Err(CliError::Config("eval.count: must be positive".into())),
            EvalConfig::Count(n) => Ok(uniform_grid(y0, yn, *n)),
            EvalConfig::Points(xs) => {
                if xs.is_empty() {
                    return Err(CliError::Config("eval.points: empty".into()));
                }
                if let Some(x) = xs.iter().find(|x| !(**x >= y0 && **x <= yn)) {
                    return Err(CliError::Config(format!("eval.points: {x} outside [{y0}, {yn}]")));
                }
                Ok(xs.clone())
            }
        }
    }

    pub fn fd(&self) -> Result<&FdConfig, CliError> {
        self.fd.as_ref().ok_or_else(|| CliError::Config("fd: block required for compare".into()))
    }
}
