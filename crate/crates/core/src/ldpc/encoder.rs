use super::gf2::{dot, pack_bits, BitMatrix};
use super::ParityCheck;

/// Systematic encoder derived from a parity-check matrix by Gauss-Jordan
/// elimination. Message bits are copied verbatim into `info_positions`; each
/// remaining position is the parity of a subset of message bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystematicEncoder {
    n: usize,
    info_positions: Vec<usize>,
    parity_positions: Vec<usize>,
    /// One packed row over message-bit indices per parity position.
    parity_rows: Vec<Vec<u64>>,
}

impl SystematicEncoder {
    pub fn new(h: &ParityCheck) -> Self {
        let n = h.num_cols();
        let mut m = BitMatrix::from_parity_check(h);
        // Pivot from the right so parity positions gather at the end.
        let order: Vec<usize> = (0..n).rev().collect();
        let pivots = m.reduce(&order);
        let mut is_parity = vec![false; n];
        for &p in &pivots {
            is_parity[p] = true;
        }
        let info_positions: Vec<usize> = (0..n).filter(|&c| !is_parity[c]).collect();
        let parity_rows = (0..pivots.len())
            .map(|r| {
                let bits: Vec<u8> = info_positions.iter().map(|&c| m.get(r, c) as u8).collect();
                pack_bits(&bits)
            })
            .collect();
        SystematicEncoder {
            n,
            info_positions,
            parity_positions: pivots,
            parity_rows,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.info_positions.len()
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn encode(&self, msg: &[u8]) -> Vec<u8> {
        let mut cw = vec![0u8; self.n];
        self.encode_into(msg, &mut cw);
        cw
    }

    pub fn encode_into(&self, msg: &[u8], cw: &mut [u8]) {
        assert_eq!(msg.len(), self.k(), "message length must equal k");
        assert_eq!(cw.len(), self.n);
        for (&pos, &b) in self.info_positions.iter().zip(msg) {
            cw[pos] = b & 1;
        }
        let packed = pack_bits(msg);
        for (&pos, row) in self.parity_positions.iter().zip(&self.parity_rows) {
            cw[pos] = dot(row, &packed);
        }
    }

    /// Message bits read back from a codeword.
    pub fn extract(&self, cw: &[u8]) -> Vec<u8> {
        self.info_positions.iter().map(|&p| cw[p]).collect()
    }
}
