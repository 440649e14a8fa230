//! Minimum-distance estimation.
//!
//! Short codes (`n <= 24`) are enumerated exhaustively. Longer codes use
//! information-set resampling: every trial permutes the columns, brings the
//! parity-check matrix to systematic form over the permuted order, and checks
//! all codewords with at most two nonzero information bits (Lee-Brickell with
//! `p = 2`). Even trials order columns by Tanner-graph distance from a random
//! seed column, which keeps low-weight codewords localized around that column
//! inside the parity set where they become visible. The lightest codeword seen
//! so far is kept, so the estimate is an upper bound that never grows with
//! more trials.

use super::encoder::SystematicEncoder;
use super::gf2::BitMatrix;
use super::ParityCheck;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest length handled by exhaustive enumeration.
pub const EXHAUSTIVE_MAX_N: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DminEstimate {
    pub weight: usize,
    /// A codeword of that weight.
    pub codeword: Vec<u8>,
    /// True when the whole code was enumerated.
    pub exact: bool,
}

/// Estimates the minimum distance; `None` for a code with no nonzero codeword.
pub fn estimate_dmin(h: &ParityCheck, effort: usize, seed: u64) -> Option<DminEstimate> {
    if h.num_cols() <= EXHAUSTIVE_MAX_N {
        exhaustive(h)
    } else {
        information_set_search(h, effort.max(1), seed)
    }
}

fn exhaustive(h: &ParityCheck) -> Option<DminEstimate> {
    let enc = SystematicEncoder::new(h);
    let k = enc.k();
    if k == 0 {
        return None;
    }
    let basis: Vec<u32> = (0..k)
        .map(|i| {
            let mut msg = vec![0u8; k];
            msg[i] = 1;
            let cw = enc.encode(&msg);
            cw.iter().enumerate().fold(0u32, |acc, (j, &b)| acc | ((b as u32) << j))
        })
        .collect();
    // Gray-code walk: consecutive messages differ in one bit.
    let mut word = 0u32;
    let mut best = u32::MAX;
    let mut best_word = 0u32;
    for step in 1u64..(1u64 << k) {
        word ^= basis[step.trailing_zeros() as usize];
        let w = word.count_ones();
        if w < best {
            best = w;
            best_word = word;
        }
    }
    let codeword = (0..h.num_cols()).map(|j| ((best_word >> j) & 1) as u8).collect();
    Some(DminEstimate {
        weight: best as usize,
        codeword,
        exact: true,
    })
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut z = seed ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

/// Columns in BFS order from `start` (excluded), shuffled within each layer,
/// followed by unreachable columns and finally `start` itself.
fn localized_order(h: &ParityCheck, start: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = h.num_cols();
    let mut seen = vec![false; n];
    let mut check_seen = vec![false; h.num_rows()];
    seen[start] = true;
    let mut order = Vec::with_capacity(n);
    let mut frontier = vec![start];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &v in &frontier {
            for &c in h.col(v) {
                if check_seen[c] {
                    continue;
                }
                check_seen[c] = true;
                for &u in h.row(c) {
                    if !seen[u] {
                        seen[u] = true;
                        next.push(u);
                    }
                }
            }
        }
        next.shuffle(rng);
        order.extend_from_slice(&next);
        frontier = next;
    }
    let mut rest: Vec<usize> = (0..n).filter(|&v| !seen[v]).collect();
    rest.shuffle(rng);
    order.extend(rest);
    order.push(start);
    order
}

fn information_set_search(h: &ParityCheck, trials: usize, seed: u64) -> Option<DminEstimate> {
    let n = h.num_cols();
    let base = BitMatrix::from_parity_check(h);
    let mut best: Option<DminEstimate> = None;
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let order = if trial % 2 == 0 {
            let start = rng.random_range(0..n);
            localized_order(h, start, &mut rng)
        } else {
            let mut o: Vec<usize> = (0..n).collect();
            o.shuffle(&mut rng);
            o
        };
        let mut m = base.clone();
        let pivots = m.reduce(&order);
        let rank = pivots.len();
        let mut is_pivot = vec![false; n];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        let info: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        if info.is_empty() {
            return None;
        }
        let cols: Vec<Vec<u64>> = info.iter().map(|&c| m.column_bits(c, rank)).collect();
        let pop = |v: &[u64]| v.iter().map(|w| w.count_ones() as usize).sum::<usize>();

        let mut trial_best = usize::MAX;
        let mut trial_pick: (usize, Option<usize>) = (0, None);
        for (i, ci) in cols.iter().enumerate() {
            let w = 1 + pop(ci);
            if w < trial_best {
                trial_best = w;
                trial_pick = (i, None);
            }
        }
        for i in 0..cols.len() {
            for j in i + 1..cols.len() {
                let w = 2 + cols[i]
                    .iter()
                    .zip(&cols[j])
                    .map(|(a, b)| (a ^ b).count_ones() as usize)
                    .sum::<usize>();
                if w < trial_best {
                    trial_best = w;
                    trial_pick = (i, Some(j));
                }
            }
        }
        if best.as_ref().is_some_and(|b| b.weight <= trial_best) {
            continue;
        }
        let mut codeword = vec![0u8; n];
        let mut parity = cols[trial_pick.0].clone();
        codeword[info[trial_pick.0]] = 1;
        if let Some(j) = trial_pick.1 {
            codeword[info[j]] = 1;
            for (a, b) in parity.iter_mut().zip(&cols[j]) {
                *a ^= b;
            }
        }
        for (r, &p) in pivots.iter().enumerate() {
            if (parity[r / 64] >> (r % 64)) & 1 == 1 {
                codeword[p] = 1;
            }
        }
        debug_assert!(h.is_codeword(&codeword));
        best = Some(DminEstimate {
            weight: trial_best,
            codeword,
            exact: false,
        });
    }
    best
}
