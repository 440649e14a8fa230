//! Simulation and optimization toolkit for LDPC-coded MLC NAND flash.
//!
//! - [`channel`]: Gaussian threshold-voltage model, hard thresholds, RBERs.
//! - [`ldpc`]: PEG construction, systematic encoding, sum-product decoding,
//!   minimum-distance estimation and alist I/O.
//! - [`writeopt`]: write-voltage cost function, coordinate-descent design and
//!   the fixed / min-RBER / MRD / MCC baselines.
//! - [`readopt`]: entropy-based read-voltage placement, region LLRs, the
//!   LLR-aware read cost, weight calibration and the uniform / MMI baselines.
//! - [`harness`]: Monte-Carlo BER campaigns, sweeps and LUT building.

pub mod channel;
pub mod harness;
pub mod kv;
pub mod ldpc;
pub mod optim;
pub mod readopt;
pub mod special;
pub mod writeopt;
