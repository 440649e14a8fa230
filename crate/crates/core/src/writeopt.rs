//! Write-voltage design.
//!
//! The proposed scheme minimizes
//! `C_write = 2^(-1.5 d) * omega_lsb + 4^(-d) * omega_msb`
//! by alternating 1-D searches over `V1` and `V2`. Four baselines are
//! provided: fixed equal-thirds voltages, minimum total RBER, minimum RBER
//! difference (solved as the minimax `max(omega_msb, omega_lsb)`), and maximum
//! capacity of the hard-read channel.

use crate::channel::{build_state_model, mutual_information, ChannelParams, Rber, StateModel, WriteVoltages};
use crate::optim::{grid_then_golden, LineMin};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WriteError {
    #[error("invalid write search config: {0}")]
    InvalidConfig(String),
    #[error("no feasible write voltages found")]
    NoFeasiblePoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WriteCostInput {
    pub omega_lsb: f64,
    pub omega_msb: f64,
    pub d_min: usize,
}

pub fn write_cost(inp: &WriteCostInput) -> f64 {
    let d = inp.d_min as f64;
    (-1.5 * d).exp2() * inp.omega_lsb + (-2.0 * d).exp2() * inp.omega_msb
}

/// Which page an ML error estimate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlPage {
    Msb,
    Lsb,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Approximate post-decoding BER of one page under ML decoding.
///
/// `transition` scales the raw error rate `omega` (the sum of the relevant
/// adjacent-state transition weights); `spectrum(d)` is the number of
/// codewords at weight `d`. The spectrum is taken at `d_min` and the next
/// even weight. Not used by any optimizer; the cost function drops the
/// spectrum and binomial factors. How `transition` and `omega` are normalized
/// is left to the caller.
pub fn ml_ber_estimate(page: MlPage, transition: f64, omega: f64, d_min: usize, spectrum: &dyn Fn(usize) -> f64) -> f64 {
    let base = (transition * omega).powi(d_min.div_ceil(2) as i32);
    let mut weights = vec![d_min, 2 * d_min.div_ceil(2)];
    weights.dedup();
    let sum: f64 = weights
        .into_iter()
        .map(|d| {
            let penalty = match page {
                MlPage::Lsb => (-((3 * d).div_ceil(2) as f64)).exp2(),
                MlPage::Msb => (-2.0 * d as f64).exp2(),
            };
            spectrum(d) * penalty * binomial(d, d.div_ceil(2))
        })
        .sum();
    base * sum
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WriteSearchConfig {
    /// Grid points per 1-D pass, endpoints included.
    pub m_grid: usize,
    pub q_max: usize,
    pub v2_init: f64,
    pub tol: f64,
}

impl Default for WriteSearchConfig {
    fn default() -> Self {
        WriteSearchConfig {
            m_grid: 200,
            q_max: 50,
            v2_init: 3.3,
            tol: 1e-4,
        }
    }
}

impl WriteSearchConfig {
    pub fn validate(&self) -> Result<(), WriteError> {
        if self.m_grid < 3 {
            return Err(WriteError::InvalidConfig(format!("m_grid must be >= 3, got {}", self.m_grid)));
        }
        if self.q_max < 1 {
            return Err(WriteError::InvalidConfig("q_max must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(WriteError::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WriteScheme {
    Proposed,
    Fixed,
    MinRber,
    Mrd,
    Mcc,
}

impl WriteScheme {
    pub const ALL: [WriteScheme; 5] = [
        WriteScheme::Proposed,
        WriteScheme::Fixed,
        WriteScheme::MinRber,
        WriteScheme::Mrd,
        WriteScheme::Mcc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WriteScheme::Proposed => "proposed",
            WriteScheme::Fixed => "fixed",
            WriteScheme::MinRber => "min-rber",
            WriteScheme::Mrd => "mrd",
            WriteScheme::Mcc => "mcc",
        }
    }
}

impl fmt::Display for WriteScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WriteScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        WriteScheme::ALL
            .into_iter()
            .find(|w| w.name() == s)
            .ok_or_else(|| format!("unknown write scheme `{s}`"))
    }
}

/// The quantity each optimizing scheme minimizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WriteObjective {
    /// `C_write` at the given minimum distance.
    Cost { d_min: usize },
    TotalRber,
    /// `max(omega_msb, omega_lsb)`.
    WorstPage,
    /// Negative mutual information of the hard-read channel.
    NegCapacity,
}

/// RBERs at the hard thresholds, or `None` outside the feasible region.
pub fn evaluate_rber(params: &ChannelParams, w: WriteVoltages) -> Option<(StateModel, Rber)> {
    let model = build_state_model(params, w).ok()?;
    let th = model.hard_thresholds().ok()?;
    let r = model.rber(&th);
    Some((model, r))
}

impl WriteObjective {
    /// Objective value; `+inf` when `w` is infeasible or degenerate.
    pub fn eval(&self, params: &ChannelParams, w: WriteVoltages) -> f64 {
        let Some((model, r)) = evaluate_rber(params, w) else {
            return f64::INFINITY;
        };
        match *self {
            WriteObjective::Cost { d_min } => write_cost(&WriteCostInput {
                omega_lsb: r.lsb,
                omega_msb: r.msb,
                d_min,
            }),
            WriteObjective::TotalRber => r.msb + r.lsb,
            WriteObjective::WorstPage => r.msb.max(r.lsb),
            WriteObjective::NegCapacity => match model.hard_thresholds() {
                Ok(th) => -mutual_information(&model, &th.t),
                Err(_) => f64::INFINITY,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WriteDesign {
    pub voltages: WriteVoltages,
    /// Objective value at `voltages`.
    pub objective: f64,
    pub rber: Rber,
    pub iterations: usize,
    /// Objective after each accepted coordinate step (coordinate descent only).
    pub history: Vec<f64>,
    pub degenerate_brackets: usize,
}

fn finish(params: &ChannelParams, voltages: WriteVoltages, objective: f64, iterations: usize, history: Vec<f64>, degenerate: usize) -> Result<WriteDesign, WriteError> {
    let (_, rber) = evaluate_rber(params, voltages).ok_or(WriteError::NoFeasiblePoint)?;
    if !objective.is_finite() {
        return Err(WriteError::NoFeasiblePoint);
    }
    Ok(WriteDesign {
        voltages,
        objective,
        rber,
        iterations,
        history,
        degenerate_brackets: degenerate,
    })
}

/// Alternating 1-D minimization of `obj` over `V1 in (V_min, V2)` and
/// `V2 in (V1, V_max)`, starting from `V2 = v2_init`. A move is kept only if
/// it does not raise the objective.
pub fn coordinate_descent(params: &ChannelParams, obj: WriteObjective, cfg: &WriteSearchConfig) -> Result<WriteDesign, WriteError> {
    cfg.validate()?;
    let (lo, hi) = (params.v_min, params.v_max);
    let mut v2 = cfg.v2_init.clamp(lo, hi);
    let mut v1 = 0.5 * (lo + v2);
    let f = |a: f64, b: f64| obj.eval(params, WriteVoltages::new(a, b));
    let mut cur = f(v1, v2);
    let mut history = vec![cur];
    let mut degenerate = 0;
    let mut iterations = 0;
    let mut accept = |m: &LineMin, cur: &mut f64, x: &mut f64, history: &mut Vec<f64>| {
        if m.degenerate {
            degenerate += 1;
        }
        if m.f <= *cur {
            let moved = (m.x - *x).abs();
            *x = m.x;
            *cur = m.f;
            history.push(m.f);
            moved
        } else {
            0.0
        }
    };
    for q in 1..=cfg.q_max {
        iterations = q;
        let m1 = grid_then_golden(|a| f(a, v2), lo, v2, cfg.m_grid, cfg.tol);
        let d1 = accept(&m1, &mut cur, &mut v1, &mut history);
        let m2 = grid_then_golden(|b| f(v1, b), v1, hi, cfg.m_grid, cfg.tol);
        let d2 = accept(&m2, &mut cur, &mut v2, &mut history);
        if d1 < cfg.tol && d2 < cfg.tol {
            break;
        }
    }
    finish(params, WriteVoltages::new(v1, v2), cur, iterations, history, degenerate)
}

/// Joint minimization by nesting: for each `V1` the best `V2` is found by a
/// grid plus golden-section pass, and the resulting profile is minimized over
/// `V1` the same way. Unlike coordinate descent this does not stall on the
/// ridge of a minimax objective.
pub fn nested_search(params: &ChannelParams, obj: WriteObjective, cfg: &WriteSearchConfig) -> Result<WriteDesign, WriteError> {
    cfg.validate()?;
    let (lo, hi) = (params.v_min, params.v_max);
    let mut degenerate = 0;
    let inner = |v1: f64| grid_then_golden(|b| obj.eval(params, WriteVoltages::new(v1, b)), v1, hi, cfg.m_grid, cfg.tol);
    let outer = grid_then_golden(|a| inner(a).f, lo, hi, cfg.m_grid, cfg.tol);
    if outer.degenerate {
        degenerate += 1;
    }
    let best = inner(outer.x);
    if best.degenerate {
        degenerate += 1;
    }
    finish(params, WriteVoltages::new(outer.x, best.x), best.f, 1, vec![best.f], degenerate)
}

/// The proposed design: coordinate descent on `C_write`.
pub fn optimize_write(params: &ChannelParams, d_min: usize, cfg: &WriteSearchConfig) -> Result<WriteDesign, WriteError> {
    coordinate_descent(params, WriteObjective::Cost { d_min }, cfg)
}

/// Equal-thirds split of `[V_min, V_max]`.
pub fn fixed_default(params: &ChannelParams) -> WriteVoltages {
    let span = params.v_max - params.v_min;
    WriteVoltages::new(params.v_min + span / 3.0, params.v_min + 2.0 * span / 3.0)
}

/// Configured constants, independent of the operating point.
pub fn baseline_fixed(params: &ChannelParams, fixed: Option<WriteVoltages>) -> Result<WriteDesign, WriteError> {
    let w = fixed.unwrap_or_else(|| fixed_default(params));
    let (_, r) = evaluate_rber(params, w).ok_or(WriteError::NoFeasiblePoint)?;
    finish(params, w, r.msb + r.lsb, 0, Vec::new(), 0)
}

pub fn baseline_min_rber(params: &ChannelParams, cfg: &WriteSearchConfig) -> Result<WriteDesign, WriteError> {
    coordinate_descent(params, WriteObjective::TotalRber, cfg)
}

pub fn baseline_mrd(params: &ChannelParams, cfg: &WriteSearchConfig) -> Result<WriteDesign, WriteError> {
    nested_search(params, WriteObjective::WorstPage, cfg)
}

pub fn baseline_mcc(params: &ChannelParams, cfg: &WriteSearchConfig) -> Result<WriteDesign, WriteError> {
    nested_search(params, WriteObjective::NegCapacity, cfg)
}

/// Dispatches on the scheme. `fixed` overrides the equal-thirds constants.
pub fn design_write(
    scheme: WriteScheme,
    params: &ChannelParams,
    d_min: usize,
    cfg: &WriteSearchConfig,
    fixed: Option<WriteVoltages>,
) -> Result<WriteDesign, WriteError> {
    match scheme {
        WriteScheme::Proposed => optimize_write(params, d_min, cfg),
        WriteScheme::Fixed => baseline_fixed(params, fixed),
        WriteScheme::MinRber => baseline_min_rber(params, cfg),
        WriteScheme::Mrd => baseline_mrd(params, cfg),
        WriteScheme::Mcc => baseline_mcc(params, cfg),
    }
}
