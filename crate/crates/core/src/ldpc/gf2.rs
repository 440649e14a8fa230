//! Dense GF(2) matrices packed into `u64` words.

use super::ParityCheck;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    words: usize,
    data: Vec<u64>,
}

pub fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words = words_for(cols);
        BitMatrix {
            rows,
            cols,
            words,
            data: vec![0; rows * words],
        }
    }

    pub fn from_parity_check(h: &ParityCheck) -> Self {
        let mut m = BitMatrix::zeros(h.num_rows(), h.num_cols());
        for r in 0..h.num_rows() {
            for &c in h.row(r) {
                m.set(r, c, true);
            }
        }
        m
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        (self.data[r * self.words + c / 64] >> (c % 64)) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        let w = &mut self.data[r * self.words + c / 64];
        if v {
            *w |= 1 << (c % 64);
        } else {
            *w &= !(1 << (c % 64));
        }
    }

    #[cfg(test)]
    pub fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.words..(r + 1) * self.words]
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for w in 0..self.words {
            self.data.swap(a * self.words + w, b * self.words + w);
        }
    }

    fn xor_row(&mut self, src: usize, dst: usize) {
        let (s, d) = (src * self.words, dst * self.words);
        for w in 0..self.words {
            let v = self.data[s + w];
            self.data[d + w] ^= v;
        }
    }

    /// Gauss-Jordan elimination trying pivot columns in `order`.
    ///
    /// Returns the pivot column of each of the first `rank` rows; afterwards
    /// every pivot column is a unit vector and rows past `rank` are zero.
    pub fn reduce(&mut self, order: &[usize]) -> Vec<usize> {
        let mut pivots = Vec::new();
        for &c in order {
            let rank = pivots.len();
            if rank == self.rows {
                break;
            }
            let Some(p) = (rank..self.rows).find(|&r| self.get(r, c)) else {
                continue;
            };
            self.swap_rows(p, rank);
            for r in 0..self.rows {
                if r != rank && self.get(r, c) {
                    self.xor_row(rank, r);
                }
            }
            pivots.push(c);
        }
        pivots
    }

    /// Column `c` restricted to the first `rank` rows, packed.
    pub fn column_bits(&self, c: usize, rank: usize) -> Vec<u64> {
        let mut out = vec![0u64; words_for(rank)];
        for r in 0..rank {
            if self.get(r, c) {
                out[r / 64] |= 1 << (r % 64);
            }
        }
        out
    }

    #[cfg(test)]
    pub fn rank(&self) -> usize {
        let mut copy = self.clone();
        let order: Vec<usize> = (0..self.cols).collect();
        copy.reduce(&order).len()
    }
}

pub fn pack_bits(bits: &[u8]) -> Vec<u64> {
    let mut out = vec![0u64; words_for(bits.len())];
    for (i, &b) in bits.iter().enumerate() {
        if b & 1 == 1 {
            out[i / 64] |= 1 << (i % 64);
        }
    }
    out
}

pub fn dot(a: &[u64], b: &[u64]) -> u8 {
    let ones: u32 = a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum();
    (ones & 1) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduce_finds_rank_and_unit_pivots() {
        let h = ParityCheck::from_dense(&[
            &[1, 1, 0, 1, 0],
            &[0, 1, 1, 0, 1],
            &[1, 0, 1, 1, 1], // sum of the first two
        ]);
        let mut m = BitMatrix::from_parity_check(&h);
        let pivots = m.reduce(&[0, 1, 2, 3, 4]);
        assert_eq!(pivots, vec![0, 1]);
        for (i, &c) in pivots.iter().enumerate() {
            for r in 0..3 {
                assert_eq!(m.get(r, c), r == i);
            }
        }
        assert!(m.row(2).iter().all(|&w| w == 0));
        assert_eq!(BitMatrix::from_parity_check(&h).rank(), 2);
    }

    #[test]
    fn dot_product_parity() {
        let a = pack_bits(&[1, 0, 1, 1]);
        let b = pack_bits(&[1, 1, 1, 0]);
        assert_eq!(dot(&a, &b), 0);
        let b = pack_bits(&[1, 1, 0, 0]);
        assert_eq!(dot(&a, &b), 1);
    }
}
