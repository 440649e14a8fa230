use crate::config::RunConfig;
use flashsim::channel::{build_state_model, CellState, ChannelParams, StateModel};
use flashsim::harness::{
    build_lut, resolve_point, run_calibration, run_sweep, Calibration, HarnessError, Lut, CSV_HEADER, VOLTAGES_HEADER,
};
use flashsim::kv::KvError;
use flashsim::ldpc::{estimate_dmin, from_alist, to_alist, CodeConfig, LdpcCode, LdpcError};
use flashsim::readopt::{
    alphas, design_read, entropy, llr_table_for_edges, read_cost, CostWeights, ReadError, ReadScheme,
};
use flashsim::writeopt::{design_write, write_cost, WriteCostInput, WriteError, WriteScheme};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use thiserror::Error;

/// Points in the `inspect` entropy trace.
pub const TRACE_POINTS: usize = 512;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("optimizer failed: {0}")]
    Optimizer(String),
    #[error("missing dependency: {0}")]
    Missing(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Optimizer(_) => 3,
            CliError::Missing(_) => 4,
        })
    }

    fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<KvError> for CliError {
    fn from(e: KvError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<WriteError> for CliError {
    fn from(e: WriteError) -> Self {
        match e {
            WriteError::InvalidConfig(m) => CliError::Config(m),
            e => CliError::Optimizer(e.to_string()),
        }
    }
}

impl From<ReadError> for CliError {
    fn from(e: ReadError) -> Self {
        match e {
            ReadError::InvalidInput(m) => CliError::Config(m),
            e => CliError::Optimizer(e.to_string()),
        }
    }
}

impl From<LdpcError> for CliError {
    fn from(e: LdpcError) -> Self {
        match e {
            LdpcError::ConstructionFailed(m) => CliError::Optimizer(m),
            e => CliError::Config(e.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(m) => CliError::Config(m),
            HarnessError::Parse(e) => e.into(),
            HarnessError::Write(e) => e.into(),
            HarnessError::Read(e) => e.into(),
            HarnessError::Channel(e) => CliError::Optimizer(e.to_string()),
            HarnessError::Io(e) => CliError::Io {
                path: "output".into(),
                source: e,
            },
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Reads a file the command depends on; absence is a missing dependency
/// rather than an i/o failure.
fn read_dependency(path: &Path, what: &str) -> Result<String, CliError> {
    if !path.exists() {
        return Err(CliError::Missing(format!("{what} `{}` not found", path.display())));
    }
    read_file(path)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes to `path` or, when it is `None`, to stdout.
fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_file(p, text),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

pub fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => {
            let text = read_file(p)?;
            RunConfig::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
        None => Ok(RunConfig::default()),
    }
}

pub fn build_code(cfg: &CodeConfig) -> Result<LdpcCode, CliError> {
    let code = LdpcCode::peg_construct(cfg)?;
    log::info!("code n={} k={} d_min={}", code.n(), code.k(), code.d_min_est());
    Ok(code)
}

/// Weights by precedence: explicit flag, config file, calibration file.
pub fn resolve_weights(cfg: &RunConfig, flag: Option<CostWeights>) -> Result<Option<CostWeights>, CliError> {
    if let Some(w) = flag.or(cfg.weights) {
        return Ok(Some(w));
    }
    if !cfg.output.calibration.exists() {
        return Ok(None);
    }
    let cal = Calibration::from_text(&read_file(&cfg.output.calibration)?)?;
    Ok(Some(cal.weights))
}

fn require_weights(cfg: &RunConfig, flag: Option<CostWeights>) -> Result<CostWeights, CliError> {
    resolve_weights(cfg, flag)?.ok_or_else(|| {
        CliError::Missing(format!(
            "calibration file `{}` not found; run `calibrate` or pass --weights c1,c2",
            cfg.output.calibration.display()
        ))
    })
}

fn point_params(cfg: &RunConfig) -> ChannelParams {
    cfg.channel
}

fn operating_model(cfg: &RunConfig, d_min: usize) -> Result<StateModel, CliError> {
    let params = point_params(cfg);
    let w = design_write(cfg.write_scheme, &params, d_min, &cfg.write, cfg.fixed_write)?.voltages;
    build_state_model(&params, w).map_err(|e| CliError::Optimizer(e.to_string()))
}

fn trace_range(model: &StateModel) -> (f64, f64) {
    (model.mu[0] - 4.0 * model.sigma[0], model.mu[3] + 4.0 * model.sigma[3])
}

/// Entropy trace as `v,entropy` CSV.
pub fn entropy_trace(model: &StateModel) -> String {
    let (lo, hi) = trace_range(model);
    let mut s = String::from("v,entropy\n");
    for i in 0..TRACE_POINTS {
        let v = lo + (hi - lo) * i as f64 / (TRACE_POINTS - 1) as f64;
        s.push_str(&format!("{v},{}\n", entropy(model, v)));
    }
    s
}

pub fn inspect(cfg: &RunConfig, trace: Option<&Path>) -> Result<(), CliError> {
    let params = point_params(cfg);
    let d_min = if cfg.write_scheme == WriteScheme::Proposed {
        build_code(&cfg.code)?.d_min_est()
    } else {
        0
    };
    let model = operating_model(cfg, d_min)?;
    let th = model.hard_thresholds().map_err(|e| CliError::Optimizer(e.to_string()))?;
    let rber = model.rber(&th);
    let mut s = String::from("quantity,value\n");
    s.push_str(&format!("pe,{}\nt_ret,{}\n", params.pe, params.t_ret));
    s.push_str(&format!("write_scheme,{}\nv1,{}\nv2,{}\n", cfg.write_scheme, model.write.v1, model.write.v2));
    for (i, st) in CellState::ALL.iter().enumerate() {
        s.push_str(&format!("mu_s{},{}\n", st.label(), model.mu[i]));
        s.push_str(&format!("sigma_s{},{}\n", st.label(), model.sigma[i]));
    }
    for (i, t) in th.t.iter().enumerate() {
        s.push_str(&format!("t{},{t}\n", i + 1));
    }
    s.push_str(&format!("omega_msb,{}\nomega_lsb,{}\n", rber.msb, rber.lsb));
    emit(None, &s)?;
    if let Some(p) = trace {
        write_file(p, &entropy_trace(&model))?;
    }
    Ok(())
}

pub fn optimize_write(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let params = point_params(cfg);
    let d_min = build_code(&cfg.code)?.d_min_est();
    let design = design_write(cfg.write_scheme, &params, d_min, &cfg.write, cfg.fixed_write)?;
    if design.degenerate_brackets > 0 {
        log::warn!("{} line searches ended on a bracket edge", design.degenerate_brackets);
    }
    let cost = write_cost(&WriteCostInput {
        omega_lsb: design.rber.lsb,
        omega_msb: design.rber.msb,
        d_min,
    });
    let row = format!(
        "v1,v2,cost,omega_msb,omega_lsb\n{},{},{},{},{}\n",
        design.voltages.v1, design.voltages.v2, cost, design.rber.msb, design.rber.lsb
    );
    emit(out, &row)
}

pub fn optimize_read(cfg: &RunConfig, weights_flag: Option<CostWeights>, out: Option<&Path>) -> Result<(), CliError> {
    if cfg.read_scheme == ReadScheme::Hard {
        return Err(CliError::Config("optimize-read needs a six-voltage scheme; `hard` has three".into()));
    }
    let weights = match cfg.read_scheme {
        ReadScheme::Proposed => Some(require_weights(cfg, weights_flag)?),
        _ => resolve_weights(cfg, weights_flag)?,
    };
    let d_min = build_code(&cfg.code)?.d_min_est();
    let model = operating_model(cfg, d_min)?;
    let mut read = cfg.read;
    if let Some(w) = weights {
        read.weights = w;
    }
    let plan = design_read(cfg.read_scheme, &model, d_min, &read)?;
    let mut cols = vec![plan.theta.map(|t| t.to_string()).unwrap_or_default()];
    cols.extend(plan.edges().iter().map(|r| r.to_string()));
    match weights {
        Some(w) => {
            let table = llr_table_for_edges(&model, plan.edges());
            let cost = read_cost(&alphas(&table), d_min, &w);
            cols.extend([w.c1.to_string(), w.c2.to_string(), cost.to_string()]);
        }
        None => cols.extend([String::new(), String::new(), String::new()]),
    }
    emit(out, &format!("theta_star,r1,r2,r3,r4,r5,r6,c1,c2,cost\n{}\n", cols.join(",")))
}

pub fn calibrate(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let code = build_code(&cfg.code)?;
    let cal = run_calibration(&cfg.campaign(None), &code, &cfg.calibrate)?;
    let path = out.unwrap_or(&cfg.output.calibration);
    write_file(path, &cal.to_text())?;
    emit(None, &format!("c1,c2\n{},{}\n", cal.weights.c1, cal.weights.c2))
}

pub struct SweepOutputs {
    pub csv: Option<PathBuf>,
    pub voltages: Option<PathBuf>,
    pub lut: Option<PathBuf>,
}

pub fn sweep(cfg: &RunConfig, weights_flag: Option<CostWeights>, outs: &SweepOutputs) -> Result<(), CliError> {
    let lut = match &outs.lut {
        Some(p) => Some(Lut::from_text(&read_dependency(p, "LUT file")?)?),
        None => None,
    };
    let weights = if cfg.read_scheme == ReadScheme::Proposed && lut.is_none() {
        Some(require_weights(cfg, weights_flag)?)
    } else {
        resolve_weights(cfg, weights_flag)?
    };
    let campaign = cfg.campaign(weights);
    campaign.validate()?;
    let code = build_code(&cfg.code)?;
    // Resolve every point first so optimizer failures abort before any frames run.
    for (pe, t) in campaign.grid() {
        resolve_point(&campaign, &code, pe, t, lut.as_ref())?;
    }
    let mut csv: Box<dyn Write> = match &outs.csv {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p).map_err(|e| CliError::io(p, e))?)),
        None => Box::new(io::stdout()),
    };
    let mut volt = match &outs.voltages {
        Some(p) => Some(io::BufWriter::new(fs::File::create(p).map_err(|e| CliError::io(p, e))?)),
        None => None,
    };
    writeln!(csv, "{CSV_HEADER}")?;
    if let Some(v) = volt.as_mut() {
        writeln!(v, "{VOLTAGES_HEADER}")?;
    }
    run_sweep(&campaign, &code, lut.as_ref(), |r| {
        writeln!(csv, "{}", r.csv_row())?;
        csv.flush()?;
        if let Some(v) = volt.as_mut() {
            writeln!(v, "{}", r.voltages_row())?;
            v.flush()?;
        }
        Ok(())
    })?;
    Ok(())
}

pub fn build_lut_cmd(cfg: &RunConfig, weights_flag: Option<CostWeights>, out: Option<&Path>) -> Result<(), CliError> {
    let weights = require_weights(cfg, weights_flag)?;
    let campaign = cfg.campaign(Some(weights));
    let code = build_code(&cfg.code)?;
    let lut = build_lut(&campaign, &code, &weights)?;
    let invalid = lut.records.iter().filter(|r| !r.valid).count();
    if invalid > 0 {
        log::warn!("{invalid} of {} LUT points are invalid", lut.records.len());
    }
    write_file(out.unwrap_or(&cfg.output.lut), &lut.to_text())
}

pub struct DminArgs {
    pub effort: Option<usize>,
    pub alist: Option<PathBuf>,
    pub alist_out: Option<PathBuf>,
}

pub fn dmin(cfg: &RunConfig, args: &DminArgs) -> Result<(), CliError> {
    let effort = args.effort.unwrap_or(cfg.code.dmin_effort);
    let h = match &args.alist {
        Some(p) => from_alist(&read_dependency(p, "alist file")?)?,
        // The override only skips the estimate inside construction.
        None => LdpcCode::peg_construct(&CodeConfig {
            dmin_override: Some(0),
            ..cfg.code.clone()
        })?
        .parity_check()
        .clone(),
    };
    if let Some(p) = &args.alist_out {
        write_file(p, &to_alist(&h))?;
    }
    let est = estimate_dmin(&h, effort, cfg.code.seed)
        .ok_or_else(|| CliError::Optimizer("code has no nonzero codeword".into()))?;
    let (m, n) = (h.num_rows(), h.num_cols());
    let girth = h.girth().map(|g| g.to_string()).unwrap_or_default();
    emit(
        None,
        &format!(
            "n,m,girth,d_min,exact,effort\n{n},{m},{girth},{},{},{effort}\n",
            est.weight, est.exact
        ),
    )
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::io(Path::new("output"), e)
    }
}
