//! Progressive edge growth.
//!
//! Columns are processed in order of increasing degree. Each new edge of a
//! column goes to a check node that is unreachable from the column in the
//! current Tanner graph or, when every check is reachable, to one at maximum
//! distance. Ties are broken by lowest check degree, then at random.

use super::{LdpcError, ParityCheck};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

/// Variable-node degree distribution as `(degree, fraction of columns)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeProfile {
    pub entries: Vec<(usize, f64)>,
}

impl DegreeProfile {
    pub fn regular(degree: usize) -> Self {
        DegreeProfile {
            entries: vec![(degree, 1.0)],
        }
    }

    /// Mostly degree-3 columns with a degree-4 share, used for the
    /// high-rate default code.
    pub fn high_rate() -> Self {
        DegreeProfile {
            entries: vec![(3, 0.8), (4, 0.2)],
        }
    }

    /// Per-column degrees in ascending order; counts are apportioned by
    /// largest remainder so they sum to `n`.
    pub fn realize(&self, n: usize, m: usize) -> Result<Vec<usize>, LdpcError> {
        let total: f64 = self.entries.iter().map(|e| e.1).sum();
        if self.entries.is_empty() || !(total > 0.0) || self.entries.iter().any(|e| e.1 < 0.0) {
            return Err(LdpcError::InvalidProfile("fractions must be non-negative with a positive sum".into()));
        }
        if let Some(&(d, _)) = self.entries.iter().find(|e| e.0 == 0 || e.0 > m) {
            return Err(LdpcError::InvalidProfile(format!("degree {d} not in 1..={m}")));
        }
        let exact: Vec<f64> = self.entries.iter().map(|e| e.1 / total * n as f64).collect();
        let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
        let mut short = n - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..exact.len()).collect();
        order.sort_by(|&a, &b| {
            let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
            fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if short == 0 {
                break;
            }
            counts[i] += 1;
            short -= 1;
        }
        let mut degrees: Vec<usize> = self
            .entries
            .iter()
            .zip(&counts)
            .flat_map(|(&(d, _), &c)| std::iter::repeat_n(d, c))
            .collect();
        degrees.sort_unstable();
        Ok(degrees)
    }
}

impl fmt::Display for DegreeProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.entries.iter().map(|(d, w)| format!("{d}:{w}")).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for DegreeProfile {
    type Err = LdpcError;

    /// `"3:0.8,4:0.2"`; a bare `"3"` is a regular profile.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || LdpcError::InvalidProfile(format!("cannot parse degree profile `{s}`"));
        let mut entries = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (d, w) = part.split_once(':').unwrap_or((part, "1"));
            let d: usize = d.trim().parse().map_err(|_| bad())?;
            let w: f64 = w.trim().parse().map_err(|_| bad())?;
            entries.push((d, w));
        }
        if entries.is_empty() {
            return Err(bad());
        }
        Ok(DegreeProfile { entries })
    }
}

/// Runs PEG for an `m x n` matrix with the given ascending column degrees.
pub fn peg_matrix(n: usize, m: usize, degrees: &[usize], seed: u64) -> Result<ParityCheck, LdpcError> {
    assert_eq!(degrees.len(), n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = ParityCheck::empty(m, n);
    let mut check_deg = vec![0usize; m];
    let mut dist = vec![usize::MAX; m];
    let mut var_seen = vec![false; n];
    let mut queue = VecDeque::new();

    for (col, &deg) in degrees.iter().enumerate() {
        for edge in 0..deg {
            let candidates: Vec<usize> = if edge == 0 {
                (0..m).collect()
            } else {
                check_distances(&h, col, &mut dist, &mut var_seen, &mut queue);
                let unreached: Vec<usize> = (0..m).filter(|&c| dist[c] == usize::MAX).collect();
                if !unreached.is_empty() {
                    unreached
                } else {
                    let far = (0..m).filter(|&c| !h.contains(c, col)).map(|c| dist[c]).max();
                    match far {
                        Some(far) => (0..m).filter(|&c| dist[c] == far && !h.contains(c, col)).collect(),
                        None => Vec::new(),
                    }
                }
            };
            let min_deg = candidates.iter().map(|&c| check_deg[c]).min().ok_or_else(|| {
                LdpcError::ConstructionFailed(format!("no check node available for column {col}"))
            })?;
            let lightest: Vec<usize> = candidates.into_iter().filter(|&c| check_deg[c] == min_deg).collect();
            let chosen = lightest[rng.random_range(0..lightest.len())];
            h.insert(chosen, col);
            check_deg[chosen] += 1;
        }
    }
    Ok(h)
}

/// BFS distances (in check levels) from column `col` to every check.
fn check_distances(
    h: &ParityCheck,
    col: usize,
    dist: &mut [usize],
    var_seen: &mut [bool],
    queue: &mut VecDeque<usize>,
) {
    dist.iter_mut().for_each(|d| *d = usize::MAX);
    var_seen.iter_mut().for_each(|s| *s = false);
    queue.clear();
    var_seen[col] = true;
    queue.push_back(col);
    let mut level = vec![0usize; var_seen.len()];
    while let Some(v) = queue.pop_front() {
        for &c in h.col(v) {
            if dist[c] != usize::MAX {
                continue;
            }
            dist[c] = level[v] + 1;
            for &u in h.row(c) {
                if !var_seen[u] {
                    var_seen[u] = true;
                    level[u] = dist[c];
                    queue.push_back(u);
                }
            }
        }
    }
}
