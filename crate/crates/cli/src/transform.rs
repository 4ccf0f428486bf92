use crate::config::read_json;
use crate::output::Table;
use crate::CliError;
use multilayer::layered::uniform_grid;
use multilayer::transforms::{
    bk_affine_zcb, bk_layer_chart, dupire_shared_clock, dupire_to_heat, nondivergent_to_divergent, verhulst_chart,
    Curve, DiffusionProfile, TermStructure,
};
use multilayer::volterra::{build_internal_boundaries, Polynomial};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum Kind {
    Dupire,
    Bk,
    BkZcb,
    Verhulst,
    Divergent,
}

/// A number or `{"t": [...], "v": [...]}` samples.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CurveSpec {
    Constant(f64),
    Samples { t: Vec<f64>, v: Vec<f64> },
}

impl CurveSpec {
    fn build(&self, name: &str) -> Result<Curve, CliError> {
        match self {
            CurveSpec::Constant(c) => Ok(Curve::Constant(*c)),
            CurveSpec::Samples { t, v } => {
                Curve::samples(t.clone(), v.clone()).map_err(|e| CliError::Config(format!("{name}: {e}")))
            }
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermsSpec {
    r: Option<CurveSpec>,
    q: Option<CurveSpec>,
    kappa: Option<CurveSpec>,
    theta: Option<CurveSpec>,
    sigma: Option<CurveSpec>,
    s: Option<CurveSpec>,
}

impl TermsSpec {
    fn build(&self) -> Result<TermStructure, CliError> {
        let get = |c: &Option<CurveSpec>, name: &str| match c {
            Some(c) => c.build(&format!("terms.{name}")),
            None => Ok(Curve::Constant(0.0)),
        };
        Ok(TermStructure {
            r: get(&self.r, "r")?,
            q: get(&self.q, "q")?,
            kappa: get(&self.kappa, "kappa")?,
            theta: get(&self.theta, "theta")?,
            sigma: get(&self.sigma, "sigma")?,
            s: get(&self.s, "s")?,
        })
    }
}

fn default_samples() -> usize {
    11
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DupireParams {
    #[serde(default)]
    terms: TermsSpec,
    variance: Option<CurveSpec>,
    maturity: f64,
    #[serde(default = "default_samples")]
    samples: usize,
    #[serde(default)]
    shared_clock: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BkParams {
    #[serde(default)]
    terms: TermsSpec,
    a: CurveSpec,
    b: CurveSpec,
    maturity: f64,
    #[serde(default = "default_samples")]
    samples: usize,
    /// Only for bk-zcb.
    rate_unit: Option<f64>,
    z: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerhulstParams {
    #[serde(default)]
    terms: TermsSpec,
    rate_unit: f64,
    layer: usize,
    layers: usize,
    barrier: CurveSpec,
    horizon: f64,
    #[serde(default = "default_samples")]
    samples: usize,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum ProfileSpec {
    Constant(f64),
    ExpVolatility(f64),
    ExpVariance(f64),
    Sampled { x: Vec<f64>, xi: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DivergentParams {
    profile: ProfileSpec,
    c1: f64,
    #[serde(default)]
    c2: f64,
    z: Vec<f64>,
    #[serde(default)]
    boundaries: Vec<f64>,
}

fn sample_times(horizon: f64, count: usize) -> Result<Vec<f64>, CliError> {
    if count < 2 {
        return Err(CliError::Config("samples: need at least 2".into()));
    }
    Ok(uniform_grid(0.0, horizon, count))
}

pub fn cmd_transform(kind: Kind, config: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let table = match kind {
        Kind::Dupire => {
            let p: DupireParams = read_json(config)?;
            let ts = p.terms.build()?;
            let times = sample_times(p.maturity, p.samples)?;
            let chart = if p.shared_clock {
                dupire_shared_clock(&ts, &times)?
            } else {
                let v = p
                    .variance
                    .as_ref()
                    .ok_or_else(|| CliError::Config("variance: required unless shared_clock".into()))?
                    .build("variance")?;
                dupire_to_heat(&ts, &v, &times)?
            };
            let mut t = Table::new(&["t", "tau", "x_scale", "multiplier"]);
            for s in &chart.samples {
                t.push(vec![s.t, s.tau, s.x_scale, s.multiplier(1.0)]);
            }
            t
        }
        Kind::Bk => {
            let p: BkParams = read_json(config)?;
            let ts = p.terms.build()?;
            let (a, b) = (p.a.build("a")?, p.b.build("b")?);
            let times = sample_times(p.maturity, p.samples)?;
            let chart = bk_layer_chart(&ts, &|t| a.eval(t), &|t| b.eval(t), p.maturity, &times)?;
            let mut t = Table::new(&["t", "tau", "psi", "rho", "alpha", "beta"]);
            for s in &chart.samples {
                t.push(vec![s.t, s.tau, s.x_scale, s.x_shift, s.log_slope, s.log_shift]);
            }
            t
        }
        Kind::BkZcb => {
            let p: BkParams = read_json(config)?;
            let ts = p.terms.build()?;
            let (a, b) = (p.a.build("a")?, p.b.build("b")?);
            let unit = p.rate_unit.ok_or_else(|| CliError::Config("rate_unit: required for bk-zcb".into()))?;
            let zs = p.z.unwrap_or_else(|| vec![0.0]);
            let times = sample_times(p.maturity, p.samples)?;
            let mut t = Table::new(&["t", "z", "F"]);
            for &tt in &times {
                for &z in &zs {
                    let f = bk_affine_zcb(&ts, &|s| a.eval(s), &|s| b.eval(s), unit, tt, p.maturity, z)?;
                    t.push(vec![tt, z, f]);
                }
            }
            t
        }
        Kind::Verhulst => {
            let p: VerhulstParams = read_json(config)?;
            let ts = p.terms.build()?;
            let barrier = p.barrier.build("barrier")?;
            let times = sample_times(p.horizon, p.samples)?;
            let c = verhulst_chart(&ts, p.rate_unit, p.layer, p.layers, &|t| barrier.eval(t), p.horizon, &times)?;
            let mut t = Table::new(&["t", "tau", "a", "d", "f", "g", "y", "nu", "x_shift", "log_shift"]);
            for (s, c) in c.samples.iter().zip(&c.chart.samples) {
                t.push(vec![s.t, c.tau, s.a, s.d, s.f, s.g, s.y, s.nu, c.x_shift, c.log_shift]);
            }
            t
        }
        Kind::Divergent => {
            let p: DivergentParams = read_json(config)?;
            let profile = match p.profile {
                ProfileSpec::Constant(v) => DiffusionProfile::Constant(v),
                ProfileSpec::ExpVolatility(a) => DiffusionProfile::ExpVolatility(a),
                ProfileSpec::ExpVariance(a) => DiffusionProfile::ExpVariance(a),
                ProfileSpec::Sampled { x, xi } => DiffusionProfile::Sampled { xs: x, values: xi },
            };
            let map = nondivergent_to_divergent(profile, p.c1, p.c2)?;
            let mut t = Table::new(&["z", "x", "sigma_sq"]);
            for &z in &p.z {
                t.push(vec![z, map.x_of_z(z)?, map.sigma_sq_of_z(z)?]);
            }
            if !p.boundaries.is_empty() {
                let images = map.boundary_images(&p.boundaries)?;
                for z in &images {
                    eprintln!("boundary image z = {}", crate::output::number(*z));
                }
            }
            t
        }
    };
    table.emit(out)?;
    Ok(())
}

/// A constant or ascending polynomial coefficients.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum PolySpec {
    Constant(f64),
    Coefficients(Vec<f64>),
}

impl PolySpec {
    fn build(&self) -> Polynomial {
        match self {
            PolySpec::Constant(c) => Polynomial::constant(*c),
            PolySpec::Coefficients(c) => Polynomial::new(c.clone()),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundaryParams {
    lower: PolySpec,
    upper: PolySpec,
    layers: usize,
    degree: usize,
    horizon: f64,
}

const BOUNDARY_SAMPLES: usize = 200;

fn coeffs_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}_coeffs.csv"))
}

pub fn cmd_boundaries(config: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let p: BoundaryParams = read_json(config)?;
    let (lo, hi) = (p.lower.build(), p.upper.build());
    let set = build_internal_boundaries(&|t| lo.eval(t), &|t| hi.eval(t), p.layers, p.degree, p.horizon)?;

    let mut coeffs = Table::with_header(
        std::iter::once("boundary".to_string()).chain((0..=p.degree).map(|k| format!("c{k}"))).collect(),
    );
    for (i, c) in set.coeffs.iter().enumerate() {
        let mut row = vec![(i + 1) as f64];
        row.extend(c);
        coeffs.push(row);
    }
    let mut table = Table::with_header(
        std::iter::once("t".to_string()).chain((0..=p.layers).map(|i| format!("y{i}"))).collect(),
    );
    for t in set.sample_times(BOUNDARY_SAMPLES) {
        let mut row = vec![t, lo.eval(t)];
        row.extend((0..p.layers - 1).map(|i| set.boundary(i).eval(t)));
        row.push(hi.eval(t));
        table.push(row);
    }
    match out {
        Some(path) => {
            table.emit(Some(path))?;
            coeffs.emit(Some(&coeffs_path(path)))?;
        }
        None => {
            coeffs.emit(None)?;
            println!();
            table.emit(None)?;
        }
    }
    Ok(())
}
