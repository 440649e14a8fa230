//! MLC threshold-voltage channel.
//!
//! Each of the four Gray-mapped states `{11, 10, 00, 01}` is modeled as a
//! Gaussian whose mean and spread depend on the write voltages, program/erase
//! cycling (RTN) and retention time (charge leakage). The same Gaussian model
//! drives densities, raw bit error rates, entropy, LLRs and Monte-Carlo
//! sampling.

use crate::kv::{self, FlatEntry, KvError};
use crate::special::{gaussian_interval_mass, normal_cdf, normal_ln_pdf, normal_pdf, normal_sf};
use rand::Rng;
use rand_distr::StandardNormal;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChannelError {
    #[error("invalid channel parameters: {0}")]
    InvalidParams(String),
    #[error("infeasible write voltages v1={v1}, v2={v2}")]
    InfeasibleWrite { v1: f64, v2: f64 },
    #[error("state model produced a non-finite value")]
    NonFinite,
    #[error("no density intersection between states {lower} and {upper}")]
    NoRootInInterval {
        lower: &'static str,
        upper: &'static str,
    },
}

/// Threshold-voltage states in ascending voltage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellState {
    S11,
    S10,
    S00,
    S01,
}

impl CellState {
    pub const ALL: [CellState; 4] = [CellState::S11, CellState::S10, CellState::S00, CellState::S01];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Left bit of the Gray label.
    pub fn msb(self) -> u8 {
        match self {
            CellState::S11 | CellState::S10 => 1,
            CellState::S00 | CellState::S01 => 0,
        }
    }

    /// Right bit of the Gray label.
    pub fn lsb(self) -> u8 {
        match self {
            CellState::S11 | CellState::S01 => 1,
            CellState::S10 | CellState::S00 => 0,
        }
    }

    pub fn from_bits(msb: u8, lsb: u8) -> CellState {
        match (msb & 1, lsb & 1) {
            (1, 1) => CellState::S11,
            (1, 0) => CellState::S10,
            (0, 0) => CellState::S00,
            _ => CellState::S01,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CellState::S11 => "11",
            CellState::S10 => "10",
            CellState::S00 => "00",
            CellState::S01 => "01",
        }
    }
}

/// Logical page of an MLC wordline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Page {
    Msb,
    Lsb,
}

impl Page {
    pub fn bit(self, state: CellState) -> u8 {
        match self {
            Page::Msb => state.msb(),
            Page::Lsb => state.lsb(),
        }
    }
}

/// Physical constants of the channel plus the operating point `(pe, t_ret)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub v_min: f64,
    pub v_max: f64,
    /// ISPP step size.
    pub v_pp: f64,
    /// Erase-state programming noise.
    pub sigma_e: f64,
    /// Programmed-state programming noise.
    pub sigma_p: f64,
    /// RTN spread is `rtn_coeff * pe^rtn_exp`.
    pub rtn_coeff: f64,
    pub rtn_exp: f64,
    pub a_r: f64,
    pub b_r: f64,
    pub alpha1: f64,
    pub alpha0: f64,
    pub x0: f64,
    /// Program/erase cycles.
    pub pe: f64,
    /// Retention time in hours.
    pub t_ret: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            v_min: 1.4,
            v_max: 3.93,
            v_pp: 0.3,
            sigma_e: 0.35,
            sigma_p: 0.05,
            rtn_coeff: 0.00025,
            rtn_exp: 0.62,
            a_r: 0.000055,
            b_r: 0.000235,
            alpha1: 0.62,
            alpha0: 0.32,
            x0: 1.4,
            pe: 0.0,
            t_ret: 0.0,
        }
    }
}

const PARAM_KEYS: [&str; 14] = [
    "v_min", "v_max", "v_pp", "sigma_e", "sigma_p", "rtn_coeff", "rtn_exp", "a_r", "b_r", "alpha1",
    "alpha0", "x0", "pe", "t_ret",
];

impl ChannelParams {
    /// Same constants at another operating point.
    pub fn at(&self, pe: f64, t_ret: f64) -> ChannelParams {
        ChannelParams { pe, t_ret, ..*self }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |msg: &str| Err(ChannelError::InvalidParams(msg.to_string()));
        let all = [
            self.v_min, self.v_max, self.v_pp, self.sigma_e, self.sigma_p, self.rtn_coeff,
            self.rtn_exp, self.a_r, self.b_r, self.alpha1, self.alpha0, self.x0, self.pe, self.t_ret,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return bad("all parameters must be finite");
        }
        if self.v_min >= self.v_max {
            return bad("v_min must be below v_max");
        }
        if self.v_pp <= 0.0 {
            return bad("v_pp must be positive");
        }
        if self.sigma_e <= 0.0 || self.sigma_p <= 0.0 {
            return bad("sigma_e and sigma_p must be positive");
        }
        if self.pe < 0.0 || self.t_ret < 0.0 {
            return bad("pe and t_ret must be non-negative");
        }
        Ok(())
    }

    /// RTN standard deviation at the current PE count.
    pub fn rtn_sigma(&self) -> f64 {
        self.rtn_coeff * self.pe.powf(self.rtn_exp)
    }

    /// Factor multiplying `(v - x0)` in the retention mean shift.
    pub fn retention_factor(&self) -> f64 {
        (self.a_r * self.pe.powf(self.alpha1) + self.b_r * self.pe.powf(self.alpha0))
            * self.t_ret.ln_1p()
    }

    fn field_mut(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "v_min" => &mut self.v_min,
            "v_max" => &mut self.v_max,
            "v_pp" => &mut self.v_pp,
            "sigma_e" => &mut self.sigma_e,
            "sigma_p" => &mut self.sigma_p,
            "rtn_coeff" => &mut self.rtn_coeff,
            "rtn_exp" => &mut self.rtn_exp,
            "a_r" => &mut self.a_r,
            "b_r" => &mut self.b_r,
            "alpha1" => &mut self.alpha1,
            "alpha0" => &mut self.alpha0,
            "x0" => &mut self.x0,
            "pe" => &mut self.pe,
            "t_ret" => &mut self.t_ret,
            _ => return None,
        })
    }

    fn field(&self, key: &str) -> f64 {
        let mut copy = *self;
        *copy.field_mut(key).expect("known key")
    }

    /// Sets one field by its key name (without the `channel.` prefix).
    pub fn set(&mut self, key: &str, value: f64) -> bool {
        match self.field_mut(key) {
            Some(f) => {
                *f = value;
                true
            }
            None => false,
        }
    }

    /// Applies `channel.*` entries; other prefixes are ignored, unknown
    /// `channel.*` keys are errors.
    pub fn apply_entries(&mut self, entries: &[FlatEntry]) -> Result<(), KvError> {
        for e in entries {
            let Some(name) = e.key.strip_prefix("channel.") else {
                continue;
            };
            let value: f64 = kv::parse_value(&e.key, &e.value, e.line)?;
            if !self.set(name, value) {
                return Err(KvError::new(e.line, format!("unknown key `{}`", e.key)));
            }
        }
        Ok(())
    }

    /// Flat `channel.key = value` block; values use the shortest decimal that
    /// parses back to the same `f64`.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for key in PARAM_KEYS {
            let _ = writeln!(out, "channel.{key} = {}", self.field(key));
        }
        out
    }

    /// Parses a block produced by [`ChannelParams::to_kv`]; missing keys keep
    /// their defaults.
    pub fn from_kv(text: &str) -> Result<ChannelParams, KvError> {
        let entries = kv::parse_flat(text)?;
        if let Some(e) = entries.iter().find(|e| !e.key.starts_with("channel.")) {
            return Err(KvError::new(e.line, format!("unknown key `{}`", e.key)));
        }
        let mut params = ChannelParams::default();
        params.apply_entries(&entries)?;
        Ok(params)
    }
}

/// Retention mean shift and its standard deviation for a state whose
/// noise-free programmed voltage is `v_nominal`.
pub fn retention_shift(params: &ChannelParams, v_nominal: f64) -> (f64, f64) {
    let mu_r = params.retention_factor() * (v_nominal - params.x0);
    (mu_r, 0.4 * mu_r.abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WriteVoltages {
    pub v1: f64,
    pub v2: f64,
}

impl WriteVoltages {
    pub fn new(v1: f64, v2: f64) -> Self {
        WriteVoltages { v1, v2 }
    }

    pub fn is_feasible(&self, params: &ChannelParams) -> bool {
        params.v_min < self.v1 && self.v1 < self.v2 && self.v2 < params.v_max
    }
}

/// Noise-free center of each state: `V_min` for the erased state and the
/// middle of the ISPP step for programmed states.
pub fn nominal_voltages(params: &ChannelParams, write: WriteVoltages) -> [f64; 4] {
    let half = params.v_pp / 2.0;
    [params.v_min, write.v1 + half, write.v2 + half, params.v_max + half]
}

/// Per-state Gaussian parameters at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateModel {
    pub mu: [f64; 4],
    pub sigma: [f64; 4],
    pub write: WriteVoltages,
}

pub fn build_state_model(params: &ChannelParams, write: WriteVoltages) -> Result<StateModel, ChannelError> {
    if !write.is_feasible(params) {
        return Err(ChannelError::InfeasibleWrite {
            v1: write.v1,
            v2: write.v2,
        });
    }
    let sigma_t = params.rtn_sigma();
    let nominal = nominal_voltages(params, write);
    let mut mu = [0.0; 4];
    let mut sigma = [0.0; 4];
    for (i, &v) in nominal.iter().enumerate() {
        let (mu_r, sigma_r) = retention_shift(params, v);
        let sigma_prog = if i == 0 { params.sigma_e } else { params.sigma_p };
        mu[i] = v - mu_r;
        sigma[i] = (sigma_prog * sigma_prog + sigma_t * sigma_t + sigma_r * sigma_r).sqrt();
    }
    if mu.iter().chain(sigma.iter()).any(|x| !x.is_finite()) {
        return Err(ChannelError::NonFinite);
    }
    Ok(StateModel { mu, sigma, write })
}

/// Decision boundaries where adjacent state densities are equal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardThresholds {
    pub t: [f64; 3],
}

/// Raw bit error rates of the two pages under hard thresholding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rber {
    pub msb: f64,
    pub lsb: f64,
}

impl StateModel {
    /// Builds a model directly from per-state parameters (synthetic models).
    pub fn from_parts(mu: [f64; 4], sigma: [f64; 4]) -> StateModel {
        StateModel {
            mu,
            sigma,
            write: WriteVoltages::new(mu[1], mu[2]),
        }
    }

    pub fn pdf(&self, state: CellState, v: f64) -> f64 {
        let i = state.index();
        normal_pdf(v, self.mu[i], self.sigma[i])
    }

    pub fn ln_pdf(&self, state: CellState, v: f64) -> f64 {
        let i = state.index();
        normal_ln_pdf(v, self.mu[i], self.sigma[i])
    }

    /// `P(a < v < b | state)`.
    pub fn interval_mass(&self, state: CellState, a: f64, b: f64) -> f64 {
        let i = state.index();
        gaussian_interval_mass(a, b, self.mu[i], self.sigma[i])
    }

    pub fn sample<R: Rng + ?Sized>(&self, state: CellState, rng: &mut R) -> f64 {
        let i = state.index();
        let z: f64 = rng.sample(StandardNormal);
        self.mu[i] + self.sigma[i] * z
    }

    pub fn hard_thresholds(&self) -> Result<HardThresholds, ChannelError> {
        let mut t = [0.0; 3];
        for (k, slot) in t.iter_mut().enumerate() {
            *slot = density_crossing(self.mu[k], self.sigma[k], self.mu[k + 1], self.sigma[k + 1])
                .ok_or(ChannelError::NoRootInInterval {
                    lower: CellState::ALL[k].label(),
                    upper: CellState::ALL[k + 1].label(),
                })?;
        }
        Ok(HardThresholds { t })
    }

    /// Page error rates of hard reads: the MSB page is read at `t2` alone and
    /// the LSB page against the window `(t1, t3)`. When no state reaches past
    /// its neighbors this equals the adjacent-pair sum
    /// `1/4 [P(v>t2|10) + P(v<t2|00)]` and
    /// `1/4 [P(v>t1|11) + P(v<t1|10) + P(v>t3|00) + P(v<t3|01)]`; the
    /// remaining terms keep it exact for worn or badly placed states.
    pub fn rber(&self, th: &HardThresholds) -> Rber {
        let (mu, sg) = (&self.mu, &self.sigma);
        let above = |i: usize, t: f64| normal_sf((t - mu[i]) / sg[i]);
        let below = |i: usize, t: f64| normal_cdf((t - mu[i]) / sg[i]);
        let inside = |i: usize, a: f64, b: f64| gaussian_interval_mass(a, b, mu[i], sg[i]);
        let [t1, t2, t3] = th.t;
        Rber {
            msb: 0.25 * (above(0, t2) + above(1, t2) + below(2, t2) + below(3, t2)),
            lsb: 0.25
                * (inside(0, t1, t3) + below(1, t1) + above(1, t3) + below(2, t1) + above(2, t3) + inside(3, t1, t3)),
        }
    }

    /// Conditional region masses `P(region r | state)` for the quantizer with
    /// the given increasing edges; regions are `(-inf, e0), (e0, e1), ..., (e_last, inf)`.
    pub fn region_masses(&self, edges: &[f64]) -> Vec<[f64; 4]> {
        let mut out = Vec::with_capacity(edges.len() + 1);
        for r in 0..=edges.len() {
            let a = if r == 0 { f64::NEG_INFINITY } else { edges[r - 1] };
            let b = if r == edges.len() { f64::INFINITY } else { edges[r] };
            let mut row = [0.0; 4];
            for s in CellState::ALL {
                row[s.index()] = self.interval_mass(s, a, b);
            }
            out.push(row);
        }
        out
    }
}

/// Root of `p_i(v) = p_j(v)` strictly between the two means.
fn density_crossing(mu_i: f64, s_i: f64, mu_j: f64, s_j: f64) -> Option<f64> {
    if !(mu_i < mu_j) {
        return None;
    }
    let (wi, wj) = (1.0 / (s_i * s_i), 1.0 / (s_j * s_j));
    let a = wi - wj;
    let b = 2.0 * (mu_j * wj - mu_i * wi);
    let c = mu_i * mu_i * wi - mu_j * mu_j * wj + 2.0 * (s_i / s_j).ln();
    let inside = |v: f64| v > mu_i && v < mu_j;
    let root = if a.abs() <= 1e-12 * (wi + wj) {
        Some(-c / b).filter(|&v| inside(v))
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return None;
        }
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        [q / a, c / q].into_iter().find(|&v| inside(v))
    }?;
    // One Newton step on the log-density difference tightens the cancellation
    // error of the closed form.
    let g = |v: f64| normal_ln_pdf(v, mu_i, s_i) - normal_ln_pdf(v, mu_j, s_j);
    let dg = |v: f64| -(v - mu_i) * wi + (v - mu_j) * wj;
    let d = dg(root);
    let polished = if d != 0.0 { root - g(root) / d } else { root };
    Some(if inside(polished) && g(polished).abs() <= g(root).abs() { polished } else { root })
}

/// Mutual information in bits between a uniform 4-ary input and the region
/// index of the quantizer with the given edges.
pub fn mutual_information(model: &StateModel, edges: &[f64]) -> f64 {
    mutual_information_from_masses(&model.region_masses(edges))
}

pub fn mutual_information_from_masses(masses: &[[f64; 4]]) -> f64 {
    let mut mi = 0.0;
    for row in masses {
        let py: f64 = row.iter().sum::<f64>() * 0.25;
        if py <= 0.0 {
            continue;
        }
        for &p in row {
            if p > 0.0 {
                mi += 0.25 * p * (p / py).log2();
            }
        }
    }
    mi.max(0.0)
}

/// Exact density of a programmed state before the Gaussian approximation:
/// the ISPP step is uniform on `[v_start, v_start + v_pp]` and convolved with
/// Gaussian noise of spread `sigma`. Reference only; the rest of the crate
/// uses the Gaussian model.
pub fn ispp_programmed_pdf(v_start: f64, v_pp: f64, sigma: f64, x: f64) -> f64 {
    gaussian_interval_mass(v_start, v_start + v_pp, x, sigma) / v_pp
}
