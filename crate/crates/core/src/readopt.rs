//! Read-voltage placement and soft-read LLRs.
//!
//! Six read voltages are placed where the posterior state entropy `H(v)`
//! equals a level `theta`, two around each hard threshold. The proposed
//! scheme picks `theta` by minimizing
//! `C_oa = c1 * C_pe + c2 * C_llr`, where both components weight per-page
//! LLR/error-mass sums by `2^(-1.5 d)` (LSB) and `4^(-d)` (MSB).

use crate::channel::{mutual_information_from_masses, CellState, ChannelError, Page, StateModel};
use crate::optim::golden_section;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Largest LLR magnitude produced for a region.
pub const LLR_CLAMP: f64 = 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReadError {
    #[error("theta {theta} has no entropy crossing next to threshold t{threshold}")]
    ThetaOutOfRange { theta: f64, threshold: usize },
    #[error("theta {theta} is too small: read windows around t{threshold} overlap a neighbor")]
    OverlapError { theta: f64, threshold: usize },
    #[error("regressors are collinear; widen the theta grid")]
    RankDeficient,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Posterior entropy (bits) of the state given the voltage, equal priors.
pub fn entropy(model: &StateModel, v: f64) -> f64 {
    let lp = CellState::ALL.map(|s| model.ln_pdf(s, v));
    let m = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w = lp.map(|x| (x - m).exp());
    let z: f64 = w.iter().sum();
    let ln_z = z.ln();
    let mut h = 0.0;
    for (&wi, &li) in w.iter().zip(&lp) {
        if wi > 0.0 {
            // ln q_i = (l_i - m) - ln z
            h -= wi / z * ((li - m) - ln_z);
        }
    }
    (h / std::f64::consts::LN_2).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadVoltages {
    pub r: [f64; 6],
    /// Entropy level that produced the voltages, if any.
    pub theta: Option<f64>,
}

/// Scan step relative to the local spread.
const SCAN_STEPS_PER_SIGMA: f64 = 100.0;

/// First point walking from `from` toward `to` where `H` drops to `theta`,
/// bisected to machine precision. `None` if `H` stays above `theta`.
fn flank_root(model: &StateModel, theta: f64, from: f64, to: f64, step: f64) -> Option<f64> {
    let g = |v: f64| entropy(model, v) - theta;
    let dir = (to - from).signum();
    let n = ((to - from).abs() / step).ceil().max(1.0) as usize;
    let mut prev = from;
    for i in 1..=n {
        let x = if i == n { to } else { from + dir * step * i as f64 };
        if g(x) <= 0.0 {
            let (mut a, mut b) = (prev, x);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid == a || mid == b {
                    break;
                }
                if g(mid) > 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            return Some(if g(a).abs() <= g(b).abs() { a } else { b });
        }
        prev = x;
    }
    None
}

/// Solves `H(R) = theta` on both flanks of each hard threshold. Inner flanks
/// stop at the neighboring state's mean, outer flanks at six local sigmas.
pub fn solve_read_voltages(model: &StateModel, theta: f64) -> Result<ReadVoltages, ReadError> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(ReadError::InvalidInput(format!("theta must lie in (0, 1), got {theta}")));
    }
    let th = model.hard_thresholds()?;
    let (mu, sg) = (&model.mu, &model.sigma);
    let mut r = [0.0; 6];
    for (k, &t) in th.t.iter().enumerate() {
        let threshold = k + 1;
        if entropy(model, t) <= theta {
            return Err(ReadError::ThetaOutOfRange { theta, threshold });
        }
        let s_loc = sg[k].max(sg[k + 1]);
        let lo = if k == 0 { t - 6.0 * s_loc } else { (t - 6.0 * s_loc).max(mu[k]) };
        let hi = if k == 2 { t + 6.0 * s_loc } else { (t + 6.0 * s_loc).min(mu[k + 1]) };
        let step = s_loc / SCAN_STEPS_PER_SIGMA;
        let side = |end: f64, inner: bool| {
            flank_root(model, theta, t, end, step).ok_or(if inner {
                ReadError::OverlapError { theta, threshold }
            } else {
                ReadError::ThetaOutOfRange { theta, threshold }
            })
        };
        r[2 * k] = side(lo, k > 0)?;
        r[2 * k + 1] = side(hi, k < 2)?;
    }
    for k in 0..2 {
        if r[2 * k + 1] >= r[2 * k + 2] {
            return Err(ReadError::OverlapError { theta, threshold: k + 1 });
        }
    }
    Ok(ReadVoltages { r, theta: Some(theta) })
}

/// Per-region LLRs and error masses for both pages.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrTable {
    /// Region boundaries; regions are `(-inf, e0), (e0, e1), ..., (e_last, inf)`.
    pub edges: Vec<f64>,
    /// `P(region | state)` per region.
    pub masses: Vec<[f64; 4]>,
    pub l_msb: Vec<f64>,
    pub l_lsb: Vec<f64>,
    pub p_msb: Vec<f64>,
    pub p_lsb: Vec<f64>,
}

impl LlrTable {
    pub fn num_regions(&self) -> usize {
        self.masses.len()
    }

    /// Region index of a sensed voltage.
    pub fn region(&self, v: f64) -> usize {
        self.edges.partition_point(|&e| e <= v)
    }

    pub fn llr(&self, page: Page, region: usize) -> f64 {
        match page {
            Page::Msb => self.l_msb[region],
            Page::Lsb => self.l_lsb[region],
        }
    }

    pub fn mutual_information(&self) -> f64 {
        mutual_information_from_masses(&self.masses)
    }
}

fn page_column(masses: &[[f64; 4]], page: Page) -> (Vec<f64>, Vec<f64>) {
    let mut ls = Vec::with_capacity(masses.len());
    let mut ps = Vec::with_capacity(masses.len());
    for row in masses {
        let (mut zero, mut one) = (0.0, 0.0);
        for s in CellState::ALL {
            if page.bit(s) == 0 {
                zero += row[s.index()];
            } else {
                one += row[s.index()];
            }
        }
        let l = if zero == 0.0 && one == 0.0 {
            0.0
        } else {
            (zero.ln() - one.ln()).clamp(-LLR_CLAMP, LLR_CLAMP)
        };
        let decision = if l >= 0.0 { 0 } else { 1 };
        let err: f64 = CellState::ALL
            .iter()
            .filter(|&&s| page.bit(s) != decision)
            .map(|s| row[s.index()])
            .sum();
        ls.push(l);
        ps.push(0.25 * err);
    }
    (ls, ps)
}

/// LLR table for the quantizer with increasing `edges` (any count).
pub fn llr_table_for_edges(model: &StateModel, edges: &[f64]) -> LlrTable {
    let masses = model.region_masses(edges);
    let (l_msb, p_msb) = page_column(&masses, Page::Msb);
    let (l_lsb, p_lsb) = page_column(&masses, Page::Lsb);
    LlrTable {
        edges: edges.to_vec(),
        masses,
        l_msb,
        l_lsb,
        p_msb,
        p_lsb,
    }
}

pub fn llr_table(model: &StateModel, reads: &ReadVoltages) -> LlrTable {
    llr_table_for_edges(model, &reads.r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alphas {
    pub pe_lsb: f64,
    pub llr_lsb: f64,
    pub pe_msb: f64,
    pub llr_msb: f64,
}

pub fn alphas(table: &LlrTable) -> Alphas {
    let abs_sum = |l: &[f64], p: &[f64]| l.iter().zip(p).map(|(l, p)| l.abs() * p).sum::<f64>();
    let sum = |l: &[f64], p: &[f64]| l.iter().zip(p).map(|(l, p)| l * p).sum::<f64>();
    Alphas {
        pe_lsb: abs_sum(&table.l_lsb, &table.p_lsb),
        llr_lsb: sum(&table.l_lsb, &table.p_lsb),
        pe_msb: abs_sum(&table.l_msb, &table.p_msb),
        llr_msb: sum(&table.l_msb, &table.p_msb),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    pub c1: f64,
    pub c2: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights { c1: 1.0, c2: 1.0 }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<(), ReadError> {
        if !(self.c1.is_finite() && self.c2.is_finite()) || (self.c1 == 0.0 && self.c2 == 0.0) {
            return Err(ReadError::InvalidInput(format!("bad cost weights ({}, {})", self.c1, self.c2)));
        }
        Ok(())
    }
}

/// `(C_pe, C_llr)`.
pub fn read_cost_components(a: &Alphas, d_min: usize) -> (f64, f64) {
    let d = d_min as f64;
    let (wl, wm) = ((-1.5 * d).exp2(), (-2.0 * d).exp2());
    (wl * a.pe_lsb + wm * a.pe_msb, wl * a.llr_lsb + wm * a.llr_msb)
}

pub fn read_cost(a: &Alphas, d_min: usize, w: &CostWeights) -> f64 {
    let (pe, llr) = read_cost_components(a, d_min);
    w.c1 * pe + w.c2 * llr
}

/// Cost components at one entropy level.
pub fn theta_costs(model: &StateModel, theta: f64, d_min: usize) -> Result<(f64, f64), ReadError> {
    let reads = solve_read_voltages(model, theta)?;
    Ok(read_cost_components(&alphas(&llr_table(model, &reads)), d_min))
}

/// Least-squares fit `ber ~ b0 + c1 * cost_pe + c2 * cost_llr`; returns the
/// two slopes.
pub fn calibrate_weights(theta_grid: &[f64], ber: &[f64], cost_pe: &[f64], cost_llr: &[f64]) -> Result<CostWeights, ReadError> {
    let n = theta_grid.len();
    if n < 3 {
        return Err(ReadError::InvalidInput(format!("need at least 3 grid points, got {n}")));
    }
    if ber.len() != n || cost_pe.len() != n || cost_llr.len() != n {
        return Err(ReadError::InvalidInput("sample vectors are not aligned".into()));
    }
    if ber.iter().chain(cost_pe).chain(cost_llr).any(|x| !x.is_finite()) {
        return Err(ReadError::InvalidInput("non-finite sample".into()));
    }
    let mean = |x: &[f64]| x.iter().sum::<f64>() / n as f64;
    let centered = |x: &[f64]| {
        let m = mean(x);
        x.iter().map(|v| v - m).collect::<Vec<f64>>()
    };
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (x1, x2, y) = (centered(cost_pe), centered(cost_llr), centered(ber));
    let (n1, n2) = (norm(&x1), norm(&x2));
    if n1 == 0.0 || n2 == 0.0 {
        return Err(ReadError::RankDeficient);
    }
    let u1: Vec<f64> = x1.iter().map(|v| v / n1).collect();
    let u2: Vec<f64> = x2.iter().map(|v| v / n2).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(a, b)| a * b).sum::<f64>();
    let r = dot(&u1, &u2);
    let det = 1.0 - r * r;
    if det < 1e-12 {
        return Err(ReadError::RankDeficient);
    }
    let (g1, g2) = (dot(&u1, &y), dot(&u2, &y));
    let b1 = (g1 - r * g2) / det;
    let b2 = (g2 - r * g1) / det;
    Ok(CostWeights { c1: b1 / n1, c2: b2 / n2 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaOptimum {
    pub theta: f64,
    pub reads: ReadVoltages,
    pub cost: f64,
    /// Search interval actually used (narrower than requested if the
    /// requested bounds were not all solvable).
    pub bounds: (f64, f64),
}

/// Golden-section minimization of `cost(theta)` over `bounds`. If a bound is
/// not solvable the interval is shrunk once to the solvable part (found by
/// bisection from a solvable interior probe); if that fails too the error is
/// returned.
pub fn minimize_theta<F>(mut cost: F, bounds: (f64, f64), tol: f64) -> Result<(f64, f64, (f64, f64)), ReadError>
where
    F: FnMut(f64) -> Result<f64, ReadError>,
{
    let (mut lo, mut hi) = bounds;
    if !(lo < hi) {
        return Err(ReadError::InvalidInput(format!("empty theta bounds [{lo}, {hi}]")));
    }
    let f_lo = cost(lo);
    let f_hi = cost(hi);
    if f_lo.is_err() || f_hi.is_err() {
        // A solvable probe: the midpoint, else the nearest of 15 interior points.
        let centre = 0.5 * (lo + hi);
        let mut probes: Vec<f64> = (1..16).map(|i| lo + (hi - lo) * i as f64 / 16.0).collect();
        probes.sort_by(|a, b| (a - centre).abs().total_cmp(&(b - centre).abs()));
        let Some(mid) = probes.into_iter().find(|&t| cost(t).is_ok()) else {
            return Err(f_lo.err().or(f_hi.err()).expect("a bound failed"));
        };
        let edge = |cost: &mut F, mut ok: f64, mut bad: f64| {
            while (ok - bad).abs() > 1e-6 {
                let m = 0.5 * (ok + bad);
                if cost(m).is_ok() {
                    ok = m;
                } else {
                    bad = m;
                }
            }
            ok
        };
        if f_lo.is_err() {
            lo = edge(&mut cost, mid, lo);
        }
        if f_hi.is_err() {
            hi = edge(&mut cost, mid, hi);
        }
        log::warn!("theta bounds shrunk to [{lo:.6}, {hi:.6}]");
    }
    let mut first_err = None;
    let (x, fx) = golden_section(
        |t| match cost(t) {
            Ok(v) => v,
            Err(e) => {
                first_err.get_or_insert(e);
                f64::INFINITY
            }
        },
        lo,
        hi,
        tol,
    );
    if let Some(e) = first_err {
        return Err(e);
    }
    let (f_lo, f_hi) = (cost(lo)?, cost(hi)?);
    let best = [(lo, f_lo), (hi, f_hi)]
        .into_iter()
        .fold((x, fx), |b, p| if p.1 < b.1 { p } else { b });
    Ok((best.0, best.1, (lo, hi)))
}

pub fn optimize_theta(model: &StateModel, d_min: usize, w: &CostWeights, bounds: (f64, f64), tol: f64) -> Result<ThetaOptimum, ReadError> {
    w.validate()?;
    let (theta, cost, used) = minimize_theta(
        |t| {
            let (pe, llr) = theta_costs(model, t, d_min)?;
            Ok(w.c1 * pe + w.c2 * llr)
        },
        bounds,
        tol,
    )?;
    Ok(ThetaOptimum {
        theta,
        reads: solve_read_voltages(model, theta)?,
        cost,
        bounds: used,
    })
}

/// Six voltages evenly spaced between the erased and highest state means.
pub fn uniform_reads(model: &StateModel) -> ReadVoltages {
    let (a, b) = (model.mu[0], model.mu[3]);
    let step = (b - a) / 7.0;
    let mut r = [0.0; 6];
    for (i, slot) in r.iter_mut().enumerate() {
        *slot = a + step * (i + 1) as f64;
    }
    ReadVoltages { r, theta: None }
}

fn mi_of(model: &StateModel, r: &[f64; 6]) -> f64 {
    mutual_information_from_masses(&model.region_masses(r))
}

/// Cyclic coordinate ascent on a lattice of spacing `step`: each voltage in
/// turn moves to the best lattice point strictly between its neighbors and
/// within `reach` of its current value.
fn ascend(model: &StateModel, r: &mut [f64; 6], best: &mut f64, step: f64, reach: f64) {
    loop {
        let mut improved = false;
        for i in 0..6 {
            let left = if i == 0 { r[0] - reach } else { r[i - 1].max(r[i] - reach) };
            let right = if i == 5 { r[5] + reach } else { r[i + 1].min(r[i] + reach) };
            let k_lo = (left / step).floor() as i64 + 1;
            let k_hi = (right / step).ceil() as i64 - 1;
            let mut trial = *r;
            for k in k_lo..=k_hi {
                let x = k as f64 * step;
                if x <= left || x >= right || x == r[i] {
                    continue;
                }
                trial[i] = x;
                let mi = mi_of(model, &trial);
                if mi > *best + 1e-15 {
                    *best = mi;
                    r[i] = x;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
}

/// Maximum mutual-information reads by cyclic coordinate ascent on a 1 mV
/// lattice, refined at 0.1 mV and 0.01 mV.
pub fn mmi_reads(model: &StateModel) -> ReadVoltages {
    let uni = uniform_reads(model).r;
    let mut r = uni;
    let mut best = mi_of(model, &uni);
    if let Ok(ent) = solve_read_voltages(model, 0.5) {
        let mi = mi_of(model, &ent.r);
        if mi > best {
            r = ent.r;
            best = mi;
        }
    }
    let span = model.mu[3] - model.mu[0] + 6.0 * model.sigma[3];
    ascend(model, &mut r, &mut best, 1e-3, span);
    ascend(model, &mut r, &mut best, 1e-4, 1e-3);
    ascend(model, &mut r, &mut best, 1e-5, 1e-4);
    ReadVoltages { r, theta: None }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReadScheme {
    /// Entropy reads at the cost-optimal theta.
    Proposed,
    Uniform,
    Mmi,
    /// Entropy reads at a configured theta.
    EntropyFixed,
    /// The three hard thresholds only.
    Hard,
}

impl ReadScheme {
    pub const ALL: [ReadScheme; 5] = [
        ReadScheme::Proposed,
        ReadScheme::Uniform,
        ReadScheme::Mmi,
        ReadScheme::EntropyFixed,
        ReadScheme::Hard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReadScheme::Proposed => "proposed",
            ReadScheme::Uniform => "uniform",
            ReadScheme::Mmi => "mmi",
            ReadScheme::EntropyFixed => "entropy-fixed",
            ReadScheme::Hard => "hard",
        }
    }
}

impl fmt::Display for ReadScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReadScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReadScheme::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| format!("unknown read scheme `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadConfig {
    pub theta_bounds: (f64, f64),
    pub theta_tol: f64,
    /// Level used by the fixed-entropy scheme.
    pub theta_fixed: f64,
    pub weights: CostWeights,
}

impl Default for ReadConfig {
    fn default() -> Self {
        ReadConfig {
            theta_bounds: (0.05, 0.95),
            theta_tol: 1e-3,
            theta_fixed: 0.35,
            weights: CostWeights::default(),
        }
    }
}

/// A complete read plan: voltages plus the LLR table used by the decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadPlan {
    pub scheme: ReadScheme,
    pub theta: Option<f64>,
    pub table: LlrTable,
}

impl ReadPlan {
    pub fn edges(&self) -> &[f64] {
        &self.table.edges
    }
}

pub fn design_read(scheme: ReadScheme, model: &StateModel, d_min: usize, cfg: &ReadConfig) -> Result<ReadPlan, ReadError> {
    let (edges, theta) = match scheme {
        ReadScheme::Proposed => {
            let opt = optimize_theta(model, d_min, &cfg.weights, cfg.theta_bounds, cfg.theta_tol)?;
            (opt.reads.r.to_vec(), Some(opt.theta))
        }
        ReadScheme::Uniform => (uniform_reads(model).r.to_vec(), None),
        ReadScheme::Mmi => (mmi_reads(model).r.to_vec(), None),
        ReadScheme::EntropyFixed => {
            let r = solve_read_voltages(model, cfg.theta_fixed)?;
            (r.r.to_vec(), Some(cfg.theta_fixed))
        }
        ReadScheme::Hard => (model.hard_thresholds()?.t.to_vec(), None),
    };
    Ok(ReadPlan {
        scheme,
        theta,
        table: llr_table_for_edges(model, &edges),
    })
}
