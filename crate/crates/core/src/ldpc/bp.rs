//! Flooding sum-product decoder with the exact tanh check-node rule.

use super::ParityCheck;

/// Largest magnitude of a check-to-variable tanh product; keeps `atanh` finite
/// (messages saturate near 35).
const MAX_TANH: f64 = 1.0 - 1e-15;

/// Which bit value a positive LLR favors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitConvention {
    #[default]
    ZeroPositive,
    OnePositive,
}


#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub bits: Vec<u8>,
    pub iterations: usize,
    /// Syndrome of `bits` is zero.
    pub converged: bool,
}

/// Reusable message buffers for one decoding thread.
#[derive(Debug, Clone, Default)]
pub struct BpScratch {
    q: Vec<f64>,
    r: Vec<f64>,
    t: Vec<f64>,
    prefix: Vec<f64>,
    total: Vec<f64>,
    flipped: Vec<f64>,
    pub bits: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct BpDecoder {
    n: usize,
    check_ptr: Vec<usize>,
    edge_var: Vec<usize>,
    var_ptr: Vec<usize>,
    var_edges: Vec<usize>,
    max_check_degree: usize,
}

impl BpDecoder {
    pub fn new(h: &ParityCheck) -> Self {
        let n = h.num_cols();
        let mut check_ptr = vec![0];
        let mut edge_var = Vec::with_capacity(h.num_ones());
        for row in h.rows() {
            edge_var.extend_from_slice(row);
            check_ptr.push(edge_var.len());
        }
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (e, &v) in edge_var.iter().enumerate() {
            buckets[v].push(e);
        }
        let mut var_ptr = vec![0];
        let mut var_edges = Vec::with_capacity(edge_var.len());
        for b in buckets {
            var_edges.extend(b);
            var_ptr.push(var_edges.len());
        }
        let max_check_degree = h.rows().iter().map(Vec::len).max().unwrap_or(0);
        BpDecoder {
            n,
            check_ptr,
            edge_var,
            var_ptr,
            var_edges,
            max_check_degree,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Decodes with early exit on a zero syndrome; positive LLR means bit 0.
    pub fn decode(&self, llr: &[f64], max_iter: usize) -> DecodeResult {
        self.decode_with_convention(llr, max_iter, BitConvention::ZeroPositive)
    }

    pub fn decode_with_convention(&self, llr: &[f64], max_iter: usize, convention: BitConvention) -> DecodeResult {
        let mut scratch = BpScratch::default();
        let (iterations, converged) = self.decode_into(llr, max_iter, convention, &mut scratch);
        DecodeResult {
            bits: scratch.bits,
            iterations,
            converged,
        }
    }

    /// Allocation-free decode; hard decisions are left in `scratch.bits`.
    /// Returns `(iterations, converged)`.
    pub fn decode_into(
        &self,
        llr: &[f64],
        max_iter: usize,
        convention: BitConvention,
        scratch: &mut BpScratch,
    ) -> (usize, bool) {
        assert_eq!(llr.len(), self.n, "llr length must equal n");
        // Messages always run in the zero-positive domain.
        let mut flipped = std::mem::take(&mut scratch.flipped);
        let llr = match convention {
            BitConvention::ZeroPositive => llr,
            BitConvention::OnePositive => {
                flipped.clear();
                flipped.extend(llr.iter().map(|l| -l));
                &flipped[..]
            }
        };
        let out = self.run(llr, max_iter, scratch);
        scratch.flipped = flipped;
        out
    }

    fn run(&self, llr: &[f64], max_iter: usize, scratch: &mut BpScratch) -> (usize, bool) {
        self.prepare(llr, scratch);
        for it in 1..=max_iter.max(1) {
            self.iterate(llr, scratch);
            for (b, &t) in scratch.bits.iter_mut().zip(&scratch.total) {
                *b = (t < 0.0) as u8;
            }
            if self.syndrome_zero(&scratch.bits) {
                return (it, true);
            }
        }
        (max_iter.max(1), false)
    }

    /// Posterior LLRs after exactly `iterations` rounds, without early exit.
    pub fn marginals(&self, llr: &[f64], iterations: usize) -> Vec<f64> {
        assert_eq!(llr.len(), self.n);
        let mut scratch = BpScratch::default();
        self.prepare(llr, &mut scratch);
        for _ in 0..iterations {
            self.iterate(llr, &mut scratch);
        }
        scratch.total
    }

    fn prepare(&self, llr: &[f64], s: &mut BpScratch) {
        let e = self.edge_var.len();
        s.q.clear();
        s.q.extend(self.edge_var.iter().map(|&v| llr[v]));
        s.r.clear();
        s.r.resize(e, 0.0);
        s.t.resize(self.max_check_degree, 0.0);
        s.prefix.resize(self.max_check_degree + 1, 0.0);
        s.total.clear();
        s.total.extend_from_slice(llr);
        s.bits.clear();
        s.bits.resize(self.n, 0);
    }

    fn iterate(&self, llr: &[f64], s: &mut BpScratch) {
        for c in 0..self.check_ptr.len() - 1 {
            let (lo, hi) = (self.check_ptr[c], self.check_ptr[c + 1]);
            let deg = hi - lo;
            let t = &mut s.t[..deg];
            for (ti, &q) in t.iter_mut().zip(&s.q[lo..hi]) {
                *ti = (0.5 * q).tanh();
            }
            // prefix[i] = prod t[..i]; walk back with a running suffix.
            s.prefix[0] = 1.0;
            for i in 0..deg {
                s.prefix[i + 1] = s.prefix[i] * t[i];
            }
            let mut suffix = 1.0;
            for i in (0..deg).rev() {
                let p = (s.prefix[i] * suffix).clamp(-MAX_TANH, MAX_TANH);
                s.r[lo + i] = 2.0 * p.atanh();
                suffix *= t[i];
            }
        }
        for v in 0..self.n {
            let edges = &self.var_edges[self.var_ptr[v]..self.var_ptr[v + 1]];
            let total = llr[v] + edges.iter().map(|&e| s.r[e]).sum::<f64>();
            s.total[v] = total;
            for &e in edges {
                s.q[e] = total - s.r[e];
            }
        }
    }

    fn syndrome_zero(&self, bits: &[u8]) -> bool {
        (0..self.check_ptr.len() - 1).all(|c| {
            self.edge_var[self.check_ptr[c]..self.check_ptr[c + 1]]
                .iter()
                .fold(0u8, |acc, &v| acc ^ bits[v])
                == 0
        })
    }
}
