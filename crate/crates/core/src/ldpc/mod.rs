//! Binary LDPC codes: construction, encoding, decoding and distance estimation.

mod alist;
mod bp;
mod dmin;
mod encoder;
mod gf2;
mod peg;
mod sparse;

pub use alist::{from_alist, to_alist};
pub use bp::{BitConvention, BpDecoder, BpScratch, DecodeResult};
pub use dmin::{estimate_dmin, DminEstimate, EXHAUSTIVE_MAX_N};
pub use encoder::SystematicEncoder;
pub use peg::{peg_matrix, DegreeProfile};
pub use sparse::ParityCheck;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LdpcError {
    #[error("invalid code parameters: {0}")]
    InvalidParams(String),
    #[error("invalid degree profile: {0}")]
    InvalidProfile(String),
    #[error("code construction failed: {0}")]
    ConstructionFailed(String),
    #[error("malformed alist: {0}")]
    Alist(String),
}

/// Allowed gap between the realized and the requested rate.
pub const RATE_TOLERANCE: f64 = 0.005;

/// Parameters for building a code with PEG.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeConfig {
    pub n: usize,
    pub k: usize,
    pub profile: DegreeProfile,
    pub seed: u64,
    /// Information-set trials for the distance estimate.
    pub dmin_effort: usize,
    /// Skips the distance search and uses this value.
    pub dmin_override: Option<usize>,
    /// Fail unless the Tanner graph is free of 4-cycles.
    pub require_girth6: bool,
    pub max_iter: usize,
}

impl Default for CodeConfig {
    fn default() -> Self {
        CodeConfig {
            n: 1024,
            k: 911,
            profile: DegreeProfile::high_rate(),
            seed: 1,
            dmin_effort: 5000,
            dmin_override: None,
            require_girth6: true,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LdpcCode {
    h: ParityCheck,
    encoder: SystematicEncoder,
    decoder: BpDecoder,
    d_min_est: usize,
}

impl LdpcCode {
    /// Wraps an existing parity-check matrix. `d_min` of `None` runs the
    /// estimator with `effort` trials.
    pub fn from_parity_check(h: ParityCheck, d_min: Option<usize>, effort: usize, seed: u64) -> Result<Self, LdpcError> {
        let encoder = SystematicEncoder::new(&h);
        if encoder.k() == 0 {
            return Err(LdpcError::InvalidParams("parity-check matrix has full column rank".into()));
        }
        let d_min_est = match d_min {
            Some(0) => return Err(LdpcError::InvalidParams("d_min must be positive".into())),
            Some(d) => d,
            None => estimate_dmin(&h, effort, seed).map_or(h.num_cols(), |e| e.weight),
        };
        let decoder = BpDecoder::new(&h);
        Ok(LdpcCode {
            h,
            encoder,
            decoder,
            d_min_est,
        })
    }

    pub fn peg_construct(cfg: &CodeConfig) -> Result<Self, LdpcError> {
        let (n, k) = (cfg.n, cfg.k);
        if !(n > k && k > 0) {
            return Err(LdpcError::InvalidParams(format!("need n > k > 0, got n={n} k={k}")));
        }
        let m = n - k;
        let degrees = cfg.profile.realize(n, m)?;
        let h = peg_matrix(n, m, &degrees, cfg.seed)?;
        if cfg.require_girth6 && h.has_four_cycle() {
            return Err(LdpcError::ConstructionFailed(format!(
                "4-cycle unavoidable for n={n} k={k} profile {}",
                cfg.profile
            )));
        }
        let code = LdpcCode::from_parity_check(h, cfg.dmin_override, cfg.dmin_effort, cfg.seed)?;
        let target = k as f64 / n as f64;
        if (code.rate() - target).abs() > RATE_TOLERANCE {
            return Err(LdpcError::ConstructionFailed(format!(
                "rank-deficient H gives rate {:.4}, requested {target:.4}",
                code.rate()
            )));
        }
        log::debug!("built ({n},{}) code, d_min estimate {}", code.k(), code.d_min_est);
        Ok(code)
    }

    pub fn n(&self) -> usize {
        self.h.num_cols()
    }

    /// Dimension of the code (can exceed the requested `k` if H is rank deficient).
    pub fn k(&self) -> usize {
        self.encoder.k()
    }

    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.n() as f64
    }

    pub fn parity_check(&self) -> &ParityCheck {
        &self.h
    }

    pub fn encoder(&self) -> &SystematicEncoder {
        &self.encoder
    }

    pub fn decoder(&self) -> &BpDecoder {
        &self.decoder
    }

    pub fn d_min_est(&self) -> usize {
        self.d_min_est
    }

    pub fn encode(&self, msg: &[u8]) -> Vec<u8> {
        self.encoder.encode(msg)
    }

    pub fn bp_decode(&self, llr: &[f64], max_iter: usize) -> DecodeResult {
        self.decoder.decode(llr, max_iter)
    }
}
