//! Run configuration file.
//!
//! ```text
//! master_seed = 7
//! [channel]
//! pe = 6000
//! t_ret = 15000
//! [code]
//! d_min = 4
//! [sweep]
//! pe = 2000, 6000, 10000
//! t = 10000
//! frames = 2000
//! ```
//!
//! Every key is optional. Unknown keys are rejected with their line number.

use flashsim::channel::{ChannelParams, WriteVoltages};
use flashsim::harness::{CalibrationConfig, CampaignConfig};
use flashsim::kv::{self, FlatEntry, KvError};
use flashsim::ldpc::CodeConfig;
use flashsim::readopt::{CostWeights, ReadConfig, ReadScheme};
use flashsim::writeopt::{WriteScheme, WriteSearchConfig};
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    /// Sweep CSV; stdout when unset.
    pub csv: Option<PathBuf>,
    pub voltages: Option<PathBuf>,
    pub lut: PathBuf,
    pub calibration: PathBuf,
}

impl Default for OutputPaths {
    fn default() -> Self {
        OutputPaths {
            csv: None,
            voltages: None,
            lut: PathBuf::from("lut.txt"),
            calibration: PathBuf::from("calibration.txt"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub master_seed: u64,
    /// Physical constants; `pe` and `t_ret` are the single operating point
    /// used by `inspect`, `optimize-write` and `optimize-read`.
    pub channel: ChannelParams,
    pub code: CodeConfig,
    pub write_scheme: WriteScheme,
    pub write: WriteSearchConfig,
    pub fixed_write: Option<WriteVoltages>,
    pub read_scheme: ReadScheme,
    pub read: ReadConfig,
    /// Weights given in the file, which take priority over a calibration file.
    pub weights: Option<CostWeights>,
    pub pe_list: Vec<f64>,
    pub t_list: Vec<f64>,
    pub frames: u64,
    pub min_events: u64,
    pub batch: u64,
    pub calibrate: CalibrationConfig,
    pub output: OutputPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        let campaign = CampaignConfig::default();
        RunConfig {
            master_seed: campaign.master_seed,
            channel: ChannelParams::default(),
            code: CodeConfig::default(),
            write_scheme: WriteScheme::Proposed,
            write: WriteSearchConfig::default(),
            fixed_write: None,
            read_scheme: ReadScheme::Proposed,
            read: ReadConfig::default(),
            weights: None,
            pe_list: vec![2000.0, 6000.0, 10000.0, 14000.0, 18000.0],
            t_list: vec![10000.0],
            frames: campaign.frames,
            min_events: campaign.min_events,
            batch: campaign.batch,
            calibrate: CalibrationConfig::default(),
            output: OutputPaths::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, KvError> {
        let entries = kv::parse_flat(text)?;
        let mut cfg = RunConfig::default();
        cfg.channel.apply_entries(&entries)?;
        let (mut fixed_v1, mut fixed_v2) = (None, None);
        let (mut c1, mut c2) = (None, None);
        for e in entries.iter().filter(|e| !e.key.starts_with("channel.")) {
            let FlatEntry { key, value, line } = e;
            let (k, v, line) = (key.as_str(), value.as_str(), *line);
            match k {
                "master_seed" => cfg.master_seed = kv::parse_value(k, v, line)?,
                "code.n" => cfg.code.n = kv::parse_value(k, v, line)?,
                "code.k" => cfg.code.k = kv::parse_value(k, v, line)?,
                "code.profile" => cfg.code.profile = kv::parse_value(k, v, line)?,
                "code.seed" => cfg.code.seed = kv::parse_value(k, v, line)?,
                "code.dmin_effort" => cfg.code.dmin_effort = kv::parse_value(k, v, line)?,
                "code.d_min" => cfg.code.dmin_override = Some(kv::parse_value(k, v, line)?),
                "code.require_girth6" => cfg.code.require_girth6 = kv::parse_value(k, v, line)?,
                "code.max_iter" => cfg.code.max_iter = kv::parse_value(k, v, line)?,
                "write.scheme" => cfg.write_scheme = kv::parse_value(k, v, line)?,
                "write.m_grid" => cfg.write.m_grid = kv::parse_value(k, v, line)?,
                "write.q_max" => cfg.write.q_max = kv::parse_value(k, v, line)?,
                "write.v2_init" => cfg.write.v2_init = kv::parse_value(k, v, line)?,
                "write.tol" => cfg.write.tol = kv::parse_value(k, v, line)?,
                "write.fixed_v1" => fixed_v1 = Some(kv::parse_value(k, v, line)?),
                "write.fixed_v2" => fixed_v2 = Some(kv::parse_value(k, v, line)?),
                "read.scheme" => cfg.read_scheme = kv::parse_value(k, v, line)?,
                "read.theta_min" => cfg.read.theta_bounds.0 = kv::parse_value(k, v, line)?,
                "read.theta_max" => cfg.read.theta_bounds.1 = kv::parse_value(k, v, line)?,
                "read.theta_tol" => cfg.read.theta_tol = kv::parse_value(k, v, line)?,
                "read.theta_fixed" => cfg.read.theta_fixed = kv::parse_value(k, v, line)?,
                "read.c1" => c1 = Some(kv::parse_value(k, v, line)?),
                "read.c2" => c2 = Some(kv::parse_value(k, v, line)?),
                "sweep.pe" => cfg.pe_list = kv::parse_list(k, v, line)?,
                "sweep.t" => cfg.t_list = kv::parse_list(k, v, line)?,
                "sweep.frames" => cfg.frames = kv::parse_value(k, v, line)?,
                "sweep.min_events" => cfg.min_events = kv::parse_value(k, v, line)?,
                "sweep.batch" => cfg.batch = kv::parse_value(k, v, line)?,
                "calibrate.pe" => cfg.calibrate.pe = kv::parse_value(k, v, line)?,
                "calibrate.t_ret" => cfg.calibrate.t_ret = kv::parse_value(k, v, line)?,
                "calibrate.thetas" => cfg.calibrate.thetas = kv::parse_list(k, v, line)?,
                "calibrate.frames" => cfg.calibrate.frames = kv::parse_value(k, v, line)?,
                "output.csv" => cfg.output.csv = Some(PathBuf::from(v)),
                "output.voltages" => cfg.output.voltages = Some(PathBuf::from(v)),
                "output.lut" => cfg.output.lut = PathBuf::from(v),
                "output.calibration" => cfg.output.calibration = PathBuf::from(v),
                _ => return Err(KvError::new(line, format!("unknown key `{k}`"))),
            }
        }
        let line_of = |key: &str| entries.iter().find(|e| e.key == key).map_or(0, |e| e.line);
        cfg.fixed_write = match (fixed_v1, fixed_v2) {
            (Some(v1), Some(v2)) => Some(WriteVoltages::new(v1, v2)),
            (None, None) => None,
            (Some(_), None) => return Err(KvError::new(line_of("write.fixed_v1"), "write.fixed_v1 needs write.fixed_v2")),
            (None, Some(_)) => return Err(KvError::new(line_of("write.fixed_v2"), "write.fixed_v2 needs write.fixed_v1")),
        };
        cfg.weights = match (c1, c2) {
            (Some(c1), Some(c2)) => Some(CostWeights { c1, c2 }),
            (None, None) => None,
            (Some(_), None) => return Err(KvError::new(line_of("read.c1"), "read.c1 needs read.c2")),
            (None, Some(_)) => return Err(KvError::new(line_of("read.c2"), "read.c2 needs read.c1")),
        };
        Ok(cfg)
    }

    /// Checks value ranges that the parser cannot see.
    pub fn validate(&self) -> Result<(), String> {
        self.channel.validate().map_err(|e| e.to_string())?;
        self.write.validate().map_err(|e| e.to_string())?;
        let (lo, hi) = self.read.theta_bounds;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(format!("theta bounds must satisfy 0 < min < max < 1, got ({lo}, {hi})"));
        }
        if !(self.read.theta_tol > 0.0) {
            return Err("read.theta_tol must be positive".into());
        }
        if !(0.0 < self.read.theta_fixed && self.read.theta_fixed < 1.0) {
            return Err("read.theta_fixed must lie in (0, 1)".into());
        }
        if let Some(w) = &self.weights {
            w.validate().map_err(|e| e.to_string())?;
        }
        let lists = self.pe_list.iter().chain(&self.t_list).chain(&self.calibrate.thetas);
        if lists.clone().any(|x| !x.is_finite()) {
            return Err("sweep and calibration lists must be finite".into());
        }
        if self.pe_list.iter().chain(&self.t_list).any(|&x| x < 0.0) {
            return Err("sweep PE and T values must be non-negative".into());
        }
        if self.calibrate.frames < 1 {
            return Err("calibrate.frames must be at least 1".into());
        }
        if self.calibrate.thetas.len() < 3 {
            return Err("calibrate.thetas needs at least 3 values".into());
        }
        Ok(())
    }

    pub fn campaign(&self, weights: Option<CostWeights>) -> CampaignConfig {
        let mut read = self.read;
        if let Some(w) = weights {
            read.weights = w;
        }
        CampaignConfig {
            channel: self.channel,
            pe_list: self.pe_list.clone(),
            t_list: self.t_list.clone(),
            write_scheme: self.write_scheme,
            read_scheme: self.read_scheme,
            frames: self.frames,
            min_events: self.min_events,
            batch: self.batch,
            master_seed: self.master_seed,
            max_iter: self.code.max_iter,
            write: self.write,
            fixed_write: self.fixed_write,
            read,
        }
    }
}
