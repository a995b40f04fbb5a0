//! Fully resolved run configurations. Each command turns its flags (or a
//! `--config` file) into one of these, and the manifest records it verbatim.

use std::path::Path;

use inaragg_core::limits::scaling_factor;
use inaragg_core::{
    validate, Centering, ExponentFormula, GrowthSchedule, LimitRegime, MixingLaw, ModelParams,
    PanelSpec, Psi, QuadMethod, QuadratureSpec, RegimeCase, ThetaVec, TimeGrid,
};
use serde::{Deserialize, Serialize};

use crate::args::{
    CenteringArg, CfArgs, FormulaArg, LimitArgs, MethodArg, ModelArgs, QuadArgs, SimulateArgs,
    Suite, VerifyArgs,
};
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub panel: PanelSpec,
    pub reps: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaChoice {
    K,
    KTilde,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CfConfig {
    pub copies: u64,
    pub n: u64,
    pub grid: TimeGrid,
    pub mixing: MixingLaw,
    pub params: ModelParams,
    pub points: Vec<ThetaVec>,
    pub scale: f64,
    pub formula: FormulaChoice,
    pub quad: QuadratureSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitConfig {
    pub grid: TimeGrid,
    pub mixing: MixingLaw,
    pub params: ModelParams,
    pub thetas: ThetaVec,
    pub schedule: GrowthSchedule,
    pub quad: QuadratureSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub suite: Suite,
    pub seed: u64,
    pub reps: u64,
    pub m: usize,
    pub cases: usize,
    pub n_max: u64,
    pub inject_bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum RunConfig {
    Simulate(SimulateConfig),
    Cf(CfConfig),
    Limit(LimitConfig),
    Verify(VerifyConfig),
}

impl RunConfig {
    pub fn command(&self) -> &'static str {
        match self {
            Self::Simulate(_) => "simulate",
            Self::Cf(_) => "cf",
            Self::Limit(_) => "limit",
            Self::Verify(_) => "verify",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Self::Simulate(c) => Some(c.seed),
            Self::Verify(c) => Some(c.seed),
            _ => None,
        }
    }

    /// Reads a bare config or a manifest (whose `config` field is used).
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let mut value: serde_json::Value = serde_json::from_str(&text)?;
        if let Some(inner) = value.get_mut("config") {
            value = inner.take();
        }
        serde_json::from_value(value).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }
}

pub fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse()
                .map_err(|_| CliError::Validation(format!("cannot parse {what} entry {p:?}")))
        })
        .collect()
}

fn read_psi_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    #[derive(Deserialize)]
    struct Row {
        x: f64,
        psi: f64,
    }
    let file = std::fs::File::open(path).map_err(CliError::io(path))?;
    let mut xs = Vec::new();
    let mut values = Vec::new();
    for row in csv::Reader::from_reader(file).deserialize() {
        let row: Row = row?;
        xs.push(row.x);
        values.push(row.psi);
    }
    Ok((xs, values))
}

pub fn mixing_from_args(m: &ModelArgs) -> Result<MixingLaw, CliError> {
    let beta = m
        .beta
        .ok_or_else(|| CliError::Validation("--beta is required (or pass --config)".into()))?;
    if !(beta > -1.0 && beta.is_finite()) {
        return Err(inaragg_core::ValidationError::BetaOutOfRange(beta).into());
    }
    let (kind, arg) = m.psi.split_once(':').unwrap_or((m.psi.as_str(), ""));
    let number = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| CliError::Validation(format!("cannot parse --psi parameter {s:?}")))
    };
    let law = match (kind, arg) {
        ("beta", "") => match m.psi1 {
            Some(psi1) => MixingLaw::beta_form_with_psi1(beta, psi1)?,
            None => MixingLaw::beta_form(0.0, beta),
        },
        ("beta", a) => {
            let mut law = MixingLaw::beta_form(number(a)?, beta);
            if let Some(psi1) = m.psi1 {
                law.psi1 = psi1;
            }
            law
        }
        ("const", c) => {
            let c = number(c)?;
            MixingLaw {
                beta,
                psi: Psi::Constant { c },
                psi1: m.psi1.unwrap_or(c),
            }
        }
        ("table", path) => {
            let (xs, values) = read_psi_table(Path::new(path))?;
            let psi1 = m.psi1.or(values.last().copied()).unwrap_or(0.0);
            if m.normalize {
                MixingLaw::tabulated_normalized(beta, xs, values, psi1)?
            } else {
                MixingLaw::tabulated(beta, xs, values, psi1)
            }
        }
        _ => {
            return Err(CliError::Validation(format!(
                "--psi must be beta, beta:<a>, const:<c> or table:<path> (got {:?})",
                m.psi
            )))
        }
    };
    Ok(law)
}

/// Mixing law, parameters and time grid after full validation.
fn model_from_args(
    m: &ModelArgs,
    thetas: Option<ThetaVec>,
) -> Result<(MixingLaw, ModelParams, TimeGrid, ThetaVec), CliError> {
    let mixing = mixing_from_args(m)?;
    let times: Vec<f64> = parse_list(&m.times, "--times")?;
    let thetas = thetas.unwrap_or_else(|| ThetaVec::new(vec![1.0; times.len()]));
    let cfg = validate(mixing, ModelParams { lambda: m.lambda }, times, thetas)?;
    Ok((cfg.mixing, cfg.params, cfg.grid, cfg.thetas))
}

fn quad_from_args(q: &QuadArgs) -> Result<QuadratureSpec, CliError> {
    let method = match q.method {
        MethodArg::De => QuadMethod::DoubleExponential,
        MethodArg::Gk => QuadMethod::AdaptiveWithSubstitution,
    };
    let mut spec = QuadratureSpec::with_method(method);
    if let Some(t) = q.abs_tol {
        spec.abs_tol = t;
    }
    if let Some(t) = q.rel_tol {
        spec.rel_tol = t;
    }
    if let Some(r) = q.max_refinements {
        spec.max_refinements = r;
    }
    spec.check().map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(spec)
}

fn require_n(n: Option<u64>) -> Result<u64, CliError> {
    match n {
        Some(n) if n >= 1 => Ok(n),
        Some(_) => Err(CliError::Validation("--n must be >= 1".into())),
        None => Err(CliError::Validation("--n is required (or pass --config)".into())),
    }
}

impl SimulateConfig {
    pub fn from_args(a: &SimulateArgs) -> Result<Self, CliError> {
        let (mixing, params, grid, _) = model_from_args(&a.model, None)?;
        let centering = match a.centering {
            CenteringArg::Conditional => Centering::Conditional,
            CenteringArg::SampleMean => Centering::SampleMean,
        };
        let cfg = Self {
            panel: PanelSpec {
                copies: a.copies,
                n: require_n(a.n)?,
                grid,
                mixing,
                params,
                centering,
            },
            reps: a.reps,
            seed: a.seed,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), CliError> {
        let p = &self.panel;
        validate(p.mixing.clone(), p.params, p.grid.times().to_vec(), ThetaVec::zeros(p.grid.len()))?;
        if p.copies == 0 || p.n == 0 || self.reps == 0 {
            return Err(CliError::Validation("--N, --n and --reps must be >= 1".into()));
        }
        Ok(())
    }
}

fn parse_points(s: &str, m: usize) -> Result<Vec<ThetaVec>, CliError> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let v: Vec<f64> = parse_list(p, "--thetas")?;
            if v.len() != m {
                return Err(CliError::Validation(format!(
                    "frequency vector {p:?} has {} entries but there are {m} times",
                    v.len()
                )));
            }
            Ok(ThetaVec::new(v))
        })
        .collect()
}

fn parse_grid(s: &str, m: usize) -> Result<Vec<ThetaVec>, CliError> {
    let bad = || CliError::Validation(format!("--grid must be <count>:<radius> (got {s:?})"));
    let (count, radius) = s.split_once(':').ok_or_else(bad)?;
    let count: usize = count.parse().map_err(|_| bad())?;
    let radius: f64 = radius.parse().map_err(|_| bad())?;
    if count == 0 || !(radius.is_finite() && radius >= 0.0) {
        return Err(bad());
    }
    Ok(inaragg_core::verify::theta_line_grid(m, count, radius))
}

impl CfConfig {
    pub fn from_args(a: &CfArgs) -> Result<Self, CliError> {
        let (mixing, params, grid, _) = model_from_args(&a.model, None)?;
        let n = require_n(a.n)?;
        let points = match &a.thetas {
            Some(t) => parse_points(t, grid.len())?,
            None => parse_grid(&a.grid, grid.len())?,
        };
        let scale = if a.scale == "auto" {
            let regime = LimitRegime::for_law(&mixing)?;
            scaling_factor(&regime, a.copies, n)?
        } else {
            a.scale
                .parse()
                .map_err(|_| CliError::Validation(format!("--scale must be a number or auto (got {:?})", a.scale)))?
        };
        let formula = match a.formula {
            FormulaArg::K => FormulaChoice::K,
            FormulaArg::Ktilde => FormulaChoice::KTilde,
            FormulaArg::Both => FormulaChoice::Both,
        };
        let cfg = Self {
            copies: a.copies,
            n,
            grid,
            mixing,
            params,
            points,
            scale,
            formula,
            quad: quad_from_args(&a.quad)?,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), CliError> {
        for p in &self.points {
            validate(self.mixing.clone(), self.params, self.grid.times().to_vec(), p.clone())?;
        }
        if self.points.is_empty() {
            return Err(CliError::Validation("no frequency vectors given".into()));
        }
        if self.copies == 0 || self.n == 0 || !self.scale.is_finite() {
            return Err(CliError::Validation("--N and --n must be >= 1 and --scale finite".into()));
        }
        self.quad.check().map_err(|e| CliError::Validation(e.to_string()))
    }

    pub fn formulas(&self) -> Vec<ExponentFormula> {
        match self.formula {
            FormulaChoice::K => vec![ExponentFormula::K],
            FormulaChoice::KTilde => vec![ExponentFormula::KTilde],
            FormulaChoice::Both => vec![ExponentFormula::K, ExponentFormula::KTilde],
        }
    }
}

fn parse_schedule(s: &str, ns: &[u64]) -> Result<GrowthSchedule, CliError> {
    let bad = || CliError::Validation(format!("--schedule must be power:<p>, exp:<p> or pairs:<n>=<N>,... (got {s:?})"));
    let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
    let schedule = match kind {
        "power" => GrowthSchedule::power(ns, arg.parse().map_err(|_| bad())?)?,
        "exp" => GrowthSchedule::exp_ceil_power(ns, arg.parse().map_err(|_| bad())?)?,
        "pairs" => {
            let pairs = arg
                .split(',')
                .map(|p| {
                    let (n, nn) = p.split_once('=').ok_or_else(bad)?;
                    Ok((n.trim().parse().map_err(|_| bad())?, nn.trim().parse().map_err(|_| bad())?))
                })
                .collect::<Result<Vec<(u64, u64)>, CliError>>()?;
            GrowthSchedule::new(pairs)?
        }
        _ => return Err(bad()),
    };
    Ok(schedule)
}

impl LimitConfig {
    pub fn from_args(a: &LimitArgs) -> Result<Self, CliError> {
        let thetas = match &a.thetas {
            Some(t) => Some(ThetaVec::new(parse_list(t, "--thetas")?)),
            None => None,
        };
        let (mixing, params, grid, thetas) = model_from_args(&a.model, thetas)?;
        let regime = LimitRegime::for_law(&mixing)?;
        let (default_ns, default_schedule) = match regime.case {
            RegimeCase::Stable => ("8,16,32,64", "power:4"),
            RegimeCase::Gaussian => ("16,32,64,128", "exp:0.7"),
        };
        let ns: Vec<u64> = parse_list(a.ns.as_deref().unwrap_or(default_ns), "--ns")?;
        let schedule = match &a.schedule {
            Some(s) if s.starts_with("pairs:") => parse_schedule(s, &[])?,
            Some(s) => parse_schedule(s, &ns)?,
            None => parse_schedule(default_schedule, &ns)?,
        };
        let cfg = Self {
            grid,
            mixing,
            params,
            thetas,
            schedule,
            quad: quad_from_args(&a.quad)?,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), CliError> {
        validate(self.mixing.clone(), self.params, self.grid.times().to_vec(), self.thetas.clone())?;
        LimitRegime::for_law(&self.mixing)?;
        GrowthSchedule::new(self.schedule.pairs.clone())?;
        self.quad.check().map_err(|e| CliError::Validation(e.to_string()))
    }
}

impl VerifyConfig {
    pub fn from_args(a: &VerifyArgs) -> Result<Self, CliError> {
        let cfg = Self {
            suite: a.suite,
            seed: a.seed,
            reps: a.reps,
            m: a.m,
            cases: a.cases,
            n_max: a.n_max,
            inject_bias: a.inject_bias,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), CliError> {
        if self.m == 0 || self.cases == 0 || self.n_max == 0 || !self.inject_bias.is_finite() {
            return Err(CliError::Validation("--m, --cases and --n-max must be >= 1".into()));
        }
        if self.reps < 10 {
            return Err(CliError::Validation("--reps must be >= 10".into()));
        }
        Ok(())
    }
}
