//! Monte-Carlo BER campaigns.
//!
//! Every frame writes one codeword per page into `n` cells, samples the
//! threshold voltages, quantizes them with the read plan and decodes the two
//! pages independently. Each frame draws from its own generator seeded by
//! `(master_seed, grid_index, frame_index)`, and counters are integer sums,
//! so results do not depend on thread count or scheduling.

use crate::channel::{build_state_model, CellState, ChannelError, ChannelParams, StateModel, WriteVoltages};
use crate::kv::{self, round_sig9, KvError};
use crate::ldpc::{BitConvention, BpScratch, LdpcCode};
use crate::readopt::{
    calibrate_weights, design_read, llr_table_for_edges, optimize_theta, solve_read_voltages, theta_costs, CostWeights,
    ReadConfig, ReadError, ReadPlan, ReadScheme,
};
use crate::writeopt::{design_write, optimize_write, WriteError, WriteScheme, WriteSearchConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::{self, Write as _};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid campaign config: {0}")]
    Config(String),
    #[error(transparent)]
    Write(#[from] WriteError),
    #[error(transparent)]
    Read(#[from] ReadError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Parse(#[from] KvError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub const CSV_HEADER: &str = "pe,t_ret,write_scheme,read_scheme,ber_msb,ber_lsb,ber_total,fer,frames,events,mean_iters";
pub const VOLTAGES_HEADER: &str = "pe,t_ret,write_scheme,read_scheme,v1,v2,theta,r1,r2,r3,r4,r5,r6,stop_rule";

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub channel: ChannelParams,
    pub pe_list: Vec<f64>,
    pub t_list: Vec<f64>,
    pub write_scheme: WriteScheme,
    pub read_scheme: ReadScheme,
    /// Frame cap per grid point.
    pub frames: u64,
    /// Stop once this many bit errors were seen; 0 always runs to the cap.
    pub min_events: u64,
    /// Frames between stop-rule checks.
    pub batch: u64,
    pub master_seed: u64,
    pub max_iter: usize,
    pub write: WriteSearchConfig,
    pub fixed_write: Option<WriteVoltages>,
    pub read: ReadConfig,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            channel: ChannelParams::default(),
            pe_list: vec![6000.0],
            t_list: vec![15000.0],
            write_scheme: WriteScheme::Proposed,
            read_scheme: ReadScheme::Proposed,
            frames: 10_000,
            min_events: 100,
            batch: 64,
            master_seed: 1,
            max_iter: 50,
            write: WriteSearchConfig::default(),
            fixed_write: None,
            read: ReadConfig::default(),
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.frames < 1 {
            return Err(HarnessError::Config("frames must be at least 1".into()));
        }
        if self.pe_list.is_empty() || self.t_list.is_empty() {
            return Err(HarnessError::Config("grid needs at least one PE and one T value".into()));
        }
        if self.batch < 1 {
            return Err(HarnessError::Config("batch must be at least 1".into()));
        }
        if self.max_iter < 1 {
            return Err(HarnessError::Config("max_iter must be at least 1".into()));
        }
        self.channel.validate()?;
        self.write.validate()?;
        Ok(())
    }

    /// Grid points in sweep order (PE outer, T inner).
    pub fn grid(&self) -> Vec<(f64, f64)> {
        self.pe_list
            .iter()
            .flat_map(|&pe| self.t_list.iter().map(move |&t| (pe, t)))
            .collect()
    }
}

/// Stream seed for one frame.
pub fn frame_seed(master: u64, grid_index: u64, frame_index: u64) -> u64 {
    let mut z = master;
    for word in [grid_index, frame_index] {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15) ^ word;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Summable per-frame tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub frames: u64,
    pub bit_err_msb: u64,
    pub bit_err_lsb: u64,
    pub frame_err_msb: u64,
    pub frame_err_lsb: u64,
    pub iterations: u64,
}

impl Counters {
    pub fn add(self, o: Counters) -> Counters {
        Counters {
            frames: self.frames + o.frames,
            bit_err_msb: self.bit_err_msb + o.bit_err_msb,
            bit_err_lsb: self.bit_err_lsb + o.bit_err_lsb,
            frame_err_msb: self.frame_err_msb + o.frame_err_msb,
            frame_err_lsb: self.frame_err_lsb + o.frame_err_lsb,
            iterations: self.iterations + o.iterations,
        }
    }

    pub fn events(&self) -> u64 {
        self.bit_err_msb + self.bit_err_lsb
    }
}

/// Everything needed to simulate one operating point.
#[derive(Debug, Clone)]
pub struct PointSetup {
    pub params: ChannelParams,
    pub write: WriteVoltages,
    pub model: StateModel,
    pub plan: ReadPlan,
}

impl PointSetup {
    pub fn new(params: ChannelParams, write: WriteVoltages, plan_for: impl FnOnce(&StateModel) -> Result<ReadPlan, ReadError>) -> Result<Self, HarnessError> {
        let model = build_state_model(&params, write)?;
        let plan = plan_for(&model)?;
        Ok(PointSetup { params, write, model, plan })
    }
}

struct FrameScratch {
    msg: [Vec<u8>; 2],
    cw: [Vec<u8>; 2],
    llr: [Vec<f64>; 2],
    bp: BpScratch,
}

impl FrameScratch {
    fn new(code: &LdpcCode) -> Self {
        let (n, k) = (code.n(), code.k());
        FrameScratch {
            msg: [vec![0; k], vec![0; k]],
            cw: [vec![0; n], vec![0; n]],
            llr: [vec![0.0; n], vec![0.0; n]],
            bp: BpScratch::default(),
        }
    }
}

fn fill_bits(rng: &mut ChaCha8Rng, out: &mut [u8]) {
    for chunk in out.chunks_mut(64) {
        let word: u64 = rng.random();
        for (i, b) in chunk.iter_mut().enumerate() {
            *b = ((word >> i) & 1) as u8;
        }
    }
}

fn simulate_frame(code: &LdpcCode, setup: &PointSetup, max_iter: usize, seed: u64, s: &mut FrameScratch) -> Counters {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let enc = code.encoder();
    for p in 0..2 {
        fill_bits(&mut rng, &mut s.msg[p]);
        enc.encode_into(&s.msg[p], &mut s.cw[p]);
    }
    let table = &setup.plan.table;
    for j in 0..code.n() {
        let state = CellState::from_bits(s.cw[0][j], s.cw[1][j]);
        let v = setup.model.sample(state, &mut rng);
        let r = table.region(v);
        s.llr[0][j] = table.l_msb[r];
        s.llr[1][j] = table.l_lsb[r];
    }
    let mut c = Counters {
        frames: 1,
        ..Counters::default()
    };
    for p in 0..2 {
        let (iters, _) = code.decoder().decode_into(&s.llr[p], max_iter, BitConvention::ZeroPositive, &mut s.bp);
        let errors = enc
            .info_positions()
            .iter()
            .zip(&s.msg[p])
            .filter(|(&pos, &m)| s.bp.bits[pos] != m)
            .count() as u64;
        c.iterations += iters as u64;
        if p == 0 {
            c.bit_err_msb = errors;
            c.frame_err_msb = (errors > 0) as u64;
        } else {
            c.bit_err_lsb = errors;
            c.frame_err_lsb = (errors > 0) as u64;
        }
    }
    c
}

/// Simulates frames `range` of one grid point in parallel.
pub fn simulate_frames(code: &LdpcCode, setup: &PointSetup, max_iter: usize, master_seed: u64, grid_index: u64, range: std::ops::Range<u64>) -> Counters {
    range
        .into_par_iter()
        .map_init(
            || FrameScratch::new(code),
            |s, f| simulate_frame(code, setup, max_iter, frame_seed(master_seed, grid_index, f), s),
        )
        .reduce(Counters::default, Counters::add)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MinEvents,
    FrameCap,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::MinEvents => "min-events",
            StopReason::FrameCap => "frame-cap",
        })
    }
}

/// Runs batches until `min_events` bit errors (if nonzero) or `cap` frames.
pub fn run_frames(code: &LdpcCode, setup: &PointSetup, cfg: &CampaignConfig, grid_index: u64) -> (Counters, StopReason) {
    let mut total = Counters::default();
    while total.frames < cfg.frames {
        let end = (total.frames + cfg.batch).min(cfg.frames);
        total = total.add(simulate_frames(code, setup, cfg.max_iter, cfg.master_seed, grid_index, total.frames..end));
        if cfg.min_events > 0 && total.events() >= cfg.min_events {
            return (total, StopReason::MinEvents);
        }
    }
    (total, StopReason::FrameCap)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointReport {
    pub pe: f64,
    pub t_ret: f64,
    pub write_scheme: WriteScheme,
    pub read_scheme: ReadScheme,
    pub counts: Counters,
    /// Information bits per page per frame.
    pub k: usize,
    pub stop: StopReason,
    pub write: WriteVoltages,
    pub theta: Option<f64>,
    pub edges: Vec<f64>,
    pub wall_time: Duration,
}

impl PointReport {
    fn page_bits(&self) -> f64 {
        (self.counts.frames * self.k as u64) as f64
    }

    pub fn ber_msb(&self) -> f64 {
        self.counts.bit_err_msb as f64 / self.page_bits()
    }

    pub fn ber_lsb(&self) -> f64 {
        self.counts.bit_err_lsb as f64 / self.page_bits()
    }

    pub fn ber_total(&self) -> f64 {
        self.counts.events() as f64 / (2.0 * self.page_bits())
    }

    pub fn fer(&self) -> f64 {
        (self.counts.frame_err_msb + self.counts.frame_err_lsb) as f64 / (2 * self.counts.frames) as f64
    }

    pub fn mean_iters(&self) -> f64 {
        self.counts.iterations as f64 / (2 * self.counts.frames) as f64
    }

    /// Binomial standard error of `ber_total`.
    pub fn ber_std_err(&self) -> f64 {
        let p = self.ber_total();
        (p * (1.0 - p) / (2.0 * self.page_bits())).sqrt()
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.9e},{:.9e},{:.9e},{:.9e},{},{},{:.6}",
            self.pe,
            self.t_ret,
            self.write_scheme,
            self.read_scheme,
            self.ber_msb(),
            self.ber_lsb(),
            self.ber_total(),
            self.fer(),
            self.counts.frames,
            self.counts.events(),
            self.mean_iters()
        )
    }

    /// Voltages used at this point, nine significant digits; missing reads
    /// are left empty.
    pub fn voltages_row(&self) -> String {
        let mut cols = vec![
            self.pe.to_string(),
            self.t_ret.to_string(),
            self.write_scheme.to_string(),
            self.read_scheme.to_string(),
            round_sig9(self.write.v1).to_string(),
            round_sig9(self.write.v2).to_string(),
            self.theta.map(|t| round_sig9(t).to_string()).unwrap_or_default(),
        ];
        for i in 0..6 {
            cols.push(self.edges.get(i).map(|&e| round_sig9(e).to_string()).unwrap_or_default());
        }
        cols.push(self.stop.to_string());
        cols.join(",")
    }
}

/// Resolves write voltages and the read plan at one operating point, taking
/// proposed-scheme values from `lut` when given.
pub fn resolve_point(cfg: &CampaignConfig, code: &LdpcCode, pe: f64, t_ret: f64, lut: Option<&Lut>) -> Result<PointSetup, HarnessError> {
    let params = cfg.channel.at(pe, t_ret);
    let d_min = code.d_min_est();
    let record = match lut {
        Some(l) => {
            let r = l.lookup(pe, t_ret).ok_or_else(|| HarnessError::Config("empty LUT".into()))?;
            if !r.valid {
                return Err(HarnessError::Config(format!("LUT point pe={} t={} is marked invalid", r.pe, r.t_ret)));
            }
            Some(r.clone())
        }
        None => None,
    };
    let write = match (&record, cfg.write_scheme) {
        (Some(r), WriteScheme::Proposed) => WriteVoltages::new(r.v1, r.v2),
        _ => design_write(cfg.write_scheme, &params, d_min, &cfg.write, cfg.fixed_write)?.voltages,
    };
    PointSetup::new(params, write, |model| match (&record, cfg.read_scheme) {
        (Some(r), ReadScheme::Proposed) => Ok(ReadPlan {
            scheme: ReadScheme::Proposed,
            theta: Some(r.theta),
            table: llr_table_for_edges(model, &r.reads),
        }),
        _ => design_read(cfg.read_scheme, model, d_min, &cfg.read),
    })
}

pub fn run_point(cfg: &CampaignConfig, code: &LdpcCode, setup: &PointSetup, grid_index: u64) -> PointReport {
    let start = Instant::now();
    let (counts, stop) = run_frames(code, setup, cfg, grid_index);
    PointReport {
        pe: setup.params.pe,
        t_ret: setup.params.t_ret,
        write_scheme: cfg.write_scheme,
        read_scheme: cfg.read_scheme,
        counts,
        k: code.k(),
        stop,
        write: setup.write,
        theta: setup.plan.theta,
        edges: setup.plan.edges().to_vec(),
        wall_time: start.elapsed(),
    }
}

/// Runs every grid point in order, handing each report to `sink` as soon as
/// it is done so partial results survive an interruption.
pub fn run_sweep<F>(cfg: &CampaignConfig, code: &LdpcCode, lut: Option<&Lut>, mut sink: F) -> Result<Vec<PointReport>, HarnessError>
where
    F: FnMut(&PointReport) -> Result<(), HarnessError>,
{
    cfg.validate()?;
    let mut out = Vec::new();
    for (i, (pe, t)) in cfg.grid().into_iter().enumerate() {
        let setup = resolve_point(cfg, code, pe, t, lut)?;
        let report = run_point(cfg, code, &setup, i as u64);
        log::info!(
            "pe={pe} t={t}: ber={:.3e} frames={} ({}) in {:.2?}",
            report.ber_total(),
            report.counts.frames,
            report.stop,
            report.wall_time
        );
        sink(&report)?;
        out.push(report);
    }
    Ok(out)
}

pub fn csv_document(reports: &[PointReport]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    pub pe: f64,
    pub t_ret: f64,
    pub thetas: Vec<f64>,
    pub frames: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            pe: 6000.0,
            t_ret: 15000.0,
            thetas: (0..8).map(|i| 0.15 + 0.1 * i as f64).collect(),
            frames: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub pe: f64,
    pub t_ret: f64,
    pub d_min: usize,
    pub thetas: Vec<f64>,
    pub ber: Vec<f64>,
    pub cost_pe: Vec<f64>,
    pub cost_llr: Vec<f64>,
    pub weights: CostWeights,
}

impl Calibration {
    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| round_sig9(*x).to_string()).collect::<Vec<_>>().join(", ");
        let mut s = String::from("[calibration]\n");
        let _ = writeln!(s, "pe = {}", self.pe);
        let _ = writeln!(s, "t_ret = {}", self.t_ret);
        let _ = writeln!(s, "d_min = {}", self.d_min);
        let _ = writeln!(s, "c1 = {}", round_sig9(self.weights.c1));
        let _ = writeln!(s, "c2 = {}", round_sig9(self.weights.c2));
        let _ = writeln!(s, "thetas = {}", list(&self.thetas));
        let _ = writeln!(s, "ber = {}", list(&self.ber));
        let _ = writeln!(s, "cost_pe = {}", list(&self.cost_pe));
        let _ = writeln!(s, "cost_llr = {}", list(&self.cost_llr));
        s
    }

    pub fn from_text(text: &str) -> Result<Calibration, KvError> {
        let mut c = Calibration {
            pe: 0.0,
            t_ret: 0.0,
            d_min: 0,
            thetas: Vec::new(),
            ber: Vec::new(),
            cost_pe: Vec::new(),
            cost_llr: Vec::new(),
            weights: CostWeights { c1: 0.0, c2: 0.0 },
        };
        let mut seen = 0;
        for e in kv::parse_flat(text)? {
            let (k, v, line) = (e.key.as_str(), e.value.as_str(), e.line);
            match k {
                "calibration.pe" => c.pe = kv::parse_value(k, v, line)?,
                "calibration.t_ret" => c.t_ret = kv::parse_value(k, v, line)?,
                "calibration.d_min" => c.d_min = kv::parse_value(k, v, line)?,
                "calibration.c1" => c.weights.c1 = kv::parse_value(k, v, line)?,
                "calibration.c2" => c.weights.c2 = kv::parse_value(k, v, line)?,
                "calibration.thetas" => c.thetas = kv::parse_list(k, v, line)?,
                "calibration.ber" => c.ber = kv::parse_list(k, v, line)?,
                "calibration.cost_pe" => c.cost_pe = kv::parse_list(k, v, line)?,
                "calibration.cost_llr" => c.cost_llr = kv::parse_list(k, v, line)?,
                _ => return Err(KvError::new(line, format!("unknown key `{k}`"))),
            }
            seen += 1;
        }
        if seen == 0 {
            return Err(KvError::new(0, "no calibration block"));
        }
        Ok(c)
    }
}

/// Measures coded BER at each theta with the proposed write voltages, then
/// regresses it on the two cost components.
pub fn run_calibration(base: &CampaignConfig, code: &LdpcCode, cal: &CalibrationConfig) -> Result<Calibration, HarnessError> {
    let params = base.channel.at(cal.pe, cal.t_ret);
    let d_min = code.d_min_est();
    let write = optimize_write(&params, d_min, &base.write)?.voltages;
    let model = build_state_model(&params, write)?;
    let cfg = CampaignConfig {
        frames: cal.frames,
        min_events: 0,
        ..base.clone()
    };
    let (mut ber, mut cost_pe, mut cost_llr) = (Vec::new(), Vec::new(), Vec::new());
    for (i, &theta) in cal.thetas.iter().enumerate() {
        let reads = solve_read_voltages(&model, theta)?;
        let plan = ReadPlan {
            scheme: ReadScheme::EntropyFixed,
            theta: Some(theta),
            table: llr_table_for_edges(&model, &reads.r),
        };
        let setup = PointSetup {
            params,
            write,
            model,
            plan,
        };
        let (counts, _) = run_frames(code, &setup, &cfg, i as u64);
        let b = counts.events() as f64 / (2 * counts.frames * code.k() as u64) as f64;
        let (pe, llr) = theta_costs(&model, theta, d_min)?;
        log::info!("calibration theta={theta:.2}: ber={b:.4e} c_pe={pe:.4e} c_llr={llr:.4e}");
        ber.push(b);
        cost_pe.push(pe);
        cost_llr.push(llr);
    }
    let weights = calibrate_weights(&cal.thetas, &ber, &cost_pe, &cost_llr)?;
    Ok(Calibration {
        pe: cal.pe,
        t_ret: cal.t_ret,
        d_min,
        thetas: cal.thetas.clone(),
        ber,
        cost_pe,
        cost_llr,
        weights,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LutRecord {
    pub pe: f64,
    pub t_ret: f64,
    pub v1: f64,
    pub v2: f64,
    pub theta: f64,
    pub reads: [f64; 6],
    pub c1: f64,
    pub c2: f64,
    pub d_min: usize,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lut {
    pub records: Vec<LutRecord>,
}

impl Lut {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let f = |x: f64| round_sig9(x).to_string();
        for r in &self.records {
            let _ = writeln!(s, "[point pe={} t={}]", r.pe, r.t_ret);
            let _ = writeln!(s, "v1 = {}", f(r.v1));
            let _ = writeln!(s, "v2 = {}", f(r.v2));
            let _ = writeln!(s, "theta = {}", f(r.theta));
            for (i, x) in r.reads.iter().enumerate() {
                let _ = writeln!(s, "r{} = {}", i + 1, f(*x));
            }
            let _ = writeln!(s, "c1 = {}", f(r.c1));
            let _ = writeln!(s, "c2 = {}", f(r.c2));
            let _ = writeln!(s, "d_min = {}", r.d_min);
            let _ = writeln!(s, "valid = {}", r.valid);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Lut, KvError> {
        let mut records: Vec<LutRecord> = Vec::new();
        for item in kv::parse(text)? {
            match item {
                kv::Item::Section { name, attrs, line } => {
                    if name != "point" {
                        return Err(KvError::new(line, format!("unknown section `{name}`")));
                    }
                    let mut rec = LutRecord {
                        pe: f64::NAN,
                        t_ret: f64::NAN,
                        v1: f64::NAN,
                        v2: f64::NAN,
                        theta: f64::NAN,
                        reads: [f64::NAN; 6],
                        c1: f64::NAN,
                        c2: f64::NAN,
                        d_min: 0,
                        valid: false,
                    };
                    for (k, v) in attrs {
                        match k.as_str() {
                            "pe" => rec.pe = kv::parse_value(&k, &v, line)?,
                            "t" => rec.t_ret = kv::parse_value(&k, &v, line)?,
                            _ => return Err(KvError::new(line, format!("unknown attribute `{k}`"))),
                        }
                    }
                    if rec.pe.is_nan() || rec.t_ret.is_nan() {
                        return Err(KvError::new(line, "point header needs pe= and t="));
                    }
                    records.push(rec);
                }
                kv::Item::Pair { key, value, line } => {
                    let rec = records
                        .last_mut()
                        .ok_or_else(|| KvError::new(line, "key outside a [point] block"))?;
                    let (k, v) = (key.as_str(), value.as_str());
                    match k {
                        "v1" => rec.v1 = kv::parse_value(k, v, line)?,
                        "v2" => rec.v2 = kv::parse_value(k, v, line)?,
                        "theta" => rec.theta = kv::parse_value(k, v, line)?,
                        "c1" => rec.c1 = kv::parse_value(k, v, line)?,
                        "c2" => rec.c2 = kv::parse_value(k, v, line)?,
                        "d_min" => rec.d_min = kv::parse_value(k, v, line)?,
                        "valid" => rec.valid = kv::parse_value(k, v, line)?,
                        _ => {
                            let idx = k
                                .strip_prefix('r')
                                .and_then(|i| i.parse::<usize>().ok())
                                .filter(|i| (1..=6).contains(i))
                                .ok_or_else(|| KvError::new(line, format!("unknown key `{k}`")))?;
                            rec.reads[idx - 1] = kv::parse_value(k, v, line)?;
                        }
                    }
                }
            }
        }
        Ok(Lut { records })
    }

    /// Nearest record, with each axis scaled by the grid's span.
    pub fn lookup(&self, pe: f64, t_ret: f64) -> Option<&LutRecord> {
        let span = |f: fn(&LutRecord) -> f64| {
            let lo = self.records.iter().map(f).fold(f64::INFINITY, f64::min);
            let hi = self.records.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                hi - lo
            } else {
                1.0
            }
        };
        let (sp, st) = (span(|r| r.pe), span(|r| r.t_ret));
        self.records.iter().min_by(|a, b| {
            let d = |r: &LutRecord| ((r.pe - pe) / sp).powi(2) + ((r.t_ret - t_ret) / st).powi(2);
            d(a).total_cmp(&d(b))
        })
    }
}

/// Optimizes write voltages and theta at every grid point. Failures mark the
/// record invalid instead of aborting.
pub fn build_lut(cfg: &CampaignConfig, code: &LdpcCode, weights: &CostWeights) -> Result<Lut, HarnessError> {
    cfg.validate()?;
    weights.validate()?;
    let d_min = code.d_min_est();
    let records: Vec<LutRecord> = cfg
        .grid()
        .into_par_iter()
        .map(|(pe, t)| {
            let params = cfg.channel.at(pe, t);
            let mut rec = LutRecord {
                pe,
                t_ret: t,
                v1: f64::NAN,
                v2: f64::NAN,
                theta: f64::NAN,
                reads: [f64::NAN; 6],
                c1: weights.c1,
                c2: weights.c2,
                d_min,
                valid: false,
            };
            let mut attempt = || -> Result<(), HarnessError> {
                let w = optimize_write(&params, d_min, &cfg.write)?.voltages;
                rec.v1 = w.v1;
                rec.v2 = w.v2;
                let model = build_state_model(&params, w)?;
                let opt = optimize_theta(&model, d_min, weights, cfg.read.theta_bounds, cfg.read.theta_tol)?;
                rec.theta = opt.theta;
                rec.reads = opt.reads.r;
                Ok(())
            };
            match attempt() {
                Ok(()) => rec.valid = true,
                Err(e) => log::warn!("LUT point pe={pe} t={t} invalid: {e}"),
            }
            rec
        })
        .collect();
    let lut = Lut { records };
    for v in lut.v1_trend_violations() {
        log::warn!("LUT trend: V1* at T=0 rises from PE={} to PE={}", v.0, v.1);
    }
    Ok(lut)
}

impl Lut {
    /// Consecutive PE pairs at `T = 0` where stored `V1*` increases.
    pub fn v1_trend_violations(&self) -> Vec<(f64, f64)> {
        let mut fresh: Vec<&LutRecord> = self.records.iter().filter(|r| r.t_ret == 0.0 && r.valid).collect();
        fresh.sort_by(|a, b| a.pe.total_cmp(&b.pe));
        fresh
            .windows(2)
            .filter(|w| w[1].v1 > w[0].v1 + 1e-9)
            .map(|w| (w[0].pe, w[1].pe))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::{CodeConfig, DegreeProfile};

    fn test_code() -> LdpcCode {
        LdpcCode::peg_construct(&CodeConfig {
            n: 256,
            k: 224,
            profile: DegreeProfile::high_rate(),
            dmin_override: Some(4),
            require_girth6: false,
            ..CodeConfig::default()
        })
        .unwrap()
    }

    fn quick(pe: f64, t: f64) -> CampaignConfig {
        CampaignConfig {
            pe_list: vec![pe],
            t_list: vec![t],
            frames: 200,
            min_events: 0,
            write: WriteSearchConfig {
                m_grid: 40,
                ..WriteSearchConfig::default()
            },
            ..CampaignConfig::default()
        }
    }

    #[test]
    fn noiseless_channel_has_no_errors() {
        let code = test_code();
        let mut cfg = quick(0.0, 0.0);
        cfg.channel.sigma_e = 1e-6;
        cfg.channel.sigma_p = 1e-6;
        cfg.frames = 100;
        cfg.write_scheme = WriteScheme::Fixed;
        cfg.read_scheme = ReadScheme::Uniform;
        let reports = run_sweep(&cfg, &code, None, |_| Ok(())).unwrap();
        assert_eq!(reports[0].counts.events(), 0);
        assert_eq!(reports[0].ber_total(), 0.0);
        assert_eq!(reports[0].stop, StopReason::FrameCap);
    }

    #[test]
    fn reruns_are_identical_and_thread_independent() {
        let code = test_code();
        let cfg = quick(12000.0, 10000.0);
        let a = csv_document(&run_sweep(&cfg, &code, None, |_| Ok(())).unwrap());
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| csv_document(&run_sweep(&cfg, &code, None, |_| Ok(())).unwrap()));
        assert_eq!(a, b);
        assert!(a.starts_with(CSV_HEADER));
    }

    #[test]
    fn stop_rule_is_reported() {
        let code = test_code();
        let mut cfg = quick(18000.0, 15000.0);
        cfg.min_events = 10;
        cfg.frames = 10_000;
        cfg.read_scheme = ReadScheme::Hard;
        let r = &run_sweep(&cfg, &code, None, |_| Ok(())).unwrap()[0];
        assert_eq!(r.stop, StopReason::MinEvents);
        assert!(r.counts.events() >= 10 && r.counts.frames < 10_000);
        assert_eq!(r.counts.frames % cfg.batch, 0);
    }

    #[test]
    fn report_arithmetic() {
        let r = PointReport {
            pe: 0.0,
            t_ret: 0.0,
            write_scheme: WriteScheme::Fixed,
            read_scheme: ReadScheme::Hard,
            counts: Counters {
                frames: 10,
                bit_err_msb: 30,
                bit_err_lsb: 10,
                frame_err_msb: 2,
                frame_err_lsb: 1,
                iterations: 100,
            },
            k: 100,
            stop: StopReason::FrameCap,
            write: WriteVoltages::new(2.0, 3.0),
            theta: None,
            edges: vec![2.0, 2.5, 3.0],
            wall_time: Duration::ZERO,
        };
        assert_eq!(r.ber_msb(), 0.03);
        assert_eq!(r.ber_lsb(), 0.01);
        assert_eq!(r.ber_total(), 0.02);
        assert_eq!(r.fer(), 0.15);
        assert_eq!(r.mean_iters(), 5.0);
        assert!(r.voltages_row().ends_with("2,2.5,3,,,,frame-cap"));
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = quick(0.0, 0.0);
        cfg.frames = 0;
        assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))));
        let mut cfg = quick(0.0, 0.0);
        cfg.t_list.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn frame_seeds_differ() {
        let a = frame_seed(1, 0, 0);
        assert_ne!(a, frame_seed(1, 0, 1));
        assert_ne!(a, frame_seed(1, 1, 0));
        assert_ne!(a, frame_seed(2, 0, 0));
        assert_eq!(a, frame_seed(1, 0, 0));
    }

    fn sample_lut() -> Lut {
        let rec = |pe: f64, t: f64, v1: f64| LutRecord {
            pe,
            t_ret: t,
            v1,
            v2: 3.012345678912,
            theta: 0.55,
            reads: [2.0, 2.1, 2.6, 2.7, 3.2, 3.3],
            c1: 1.5e-3,
            c2: -2.0,
            d_min: 4,
            valid: true,
        };
        Lut {
            records: vec![rec(0.0, 0.0, 2.4), rec(6000.0, 0.0, 2.3), rec(6000.0, 15000.0, 2.35), rec(12000.0, 0.0, 2.31)],
        }
    }

    #[test]
    fn lut_round_trip_and_lookup() {
        let lut = sample_lut();
        let text = lut.to_text();
        let back = Lut::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.records[0].v2, round_sig9(3.012345678912));
        assert_eq!(back.lookup(6000.0, 15000.0).unwrap().t_ret, 15000.0);
        assert_eq!(back.lookup(6500.0, 14000.0).unwrap().v1, 2.35);
        assert_eq!(back.lookup(1000.0, 100.0).unwrap().pe, 0.0);
        assert_eq!(lut.v1_trend_violations(), vec![(6000.0, 12000.0)]);
        assert!(Lut::from_text("[point pe=1]\nv1 = 2\n").is_err());
        assert!(Lut::from_text("[point pe=1 t=0]\nbogus = 2\n").is_err());
    }

    #[test]
    fn calibration_text_round_trip() {
        let c = Calibration {
            pe: 6000.0,
            t_ret: 15000.0,
            d_min: 4,
            thetas: vec![0.15, 0.25, 0.35],
            ber: vec![1e-3, 8e-4, 9e-4],
            cost_pe: vec![4e-4, 3.9e-4, 4.1e-4],
            cost_llr: vec![2.8e-4, 2.5e-4, 2.4e-4],
            weights: CostWeights { c1: 2.5, c2: -1.25 },
        };
        assert_eq!(Calibration::from_text(&c.to_text()).unwrap(), c);
        assert!(Calibration::from_text("[calibration]\nc3 = 1\n").is_err());
    }

    #[test]
    fn lut_build_marks_unsolvable_points_invalid() {
        let code = test_code();
        let mut cfg = quick(6000.0, 15000.0);
        cfg.pe_list = vec![6000.0, 18000.0];
        cfg.t_list = vec![20000.0];
        // Levels this low make the windows of worn cells overlap.
        cfg.read.theta_bounds = (0.001, 0.002);
        let lut = build_lut(&cfg, &code, &CostWeights::default()).unwrap();
        assert_eq!(lut.records.len(), 2);
        let worn = &lut.records[1];
        assert!(!worn.valid && worn.theta.is_nan() && worn.v1.is_finite());
        let back = Lut::from_text(&lut.to_text()).unwrap();
        assert!(!back.records[1].valid);
        cfg.read.theta_bounds = (0.1, 0.9);
        assert!(build_lut(&cfg, &code, &CostWeights::default()).unwrap().records[0].valid);
    }

}
