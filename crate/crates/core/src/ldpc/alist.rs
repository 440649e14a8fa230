//! MacKay's alist format for sparse parity-check matrices.
//!
//! ```text
//! n m
//! max_col_weight max_row_weight
//! <n column weights>
//! <m row weights>
//! <n lines: 1-based row indices of each column, zero padded>
//! <m lines: 1-based column indices of each row, zero padded>
//! ```

use super::{LdpcError, ParityCheck};
use std::fmt::Write as _;

pub fn to_alist(h: &ParityCheck) -> String {
    let (n, m) = (h.num_cols(), h.num_rows());
    let col_w: Vec<usize> = (0..n).map(|c| h.col(c).len()).collect();
    let row_w: Vec<usize> = (0..m).map(|r| h.row(r).len()).collect();
    let max_c = col_w.iter().copied().max().unwrap_or(0);
    let max_r = row_w.iter().copied().max().unwrap_or(0);
    let join = |v: &mut dyn Iterator<Item = usize>| v.map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let padded = |idx: &[usize], width: usize| {
        let mut it = idx.iter().map(|&i| i + 1).chain(std::iter::repeat(0)).take(width);
        join(&mut it)
    };
    let mut out = String::new();
    let _ = writeln!(out, "{n} {m}");
    let _ = writeln!(out, "{max_c} {max_r}");
    let _ = writeln!(out, "{}", join(&mut col_w.iter().copied()));
    let _ = writeln!(out, "{}", join(&mut row_w.iter().copied()));
    for c in 0..n {
        let _ = writeln!(out, "{}", padded(h.col(c), max_c));
    }
    for r in 0..m {
        let _ = writeln!(out, "{}", padded(h.row(r), max_r));
    }
    out
}

pub fn from_alist(text: &str) -> Result<ParityCheck, LdpcError> {
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let nums = |idx: usize| -> Result<Vec<usize>, LdpcError> {
        let line = lines
            .get(idx)
            .ok_or_else(|| LdpcError::Alist(format!("missing line {}", idx + 1)))?;
        line.split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| LdpcError::Alist(format!("line {}: bad integer `{t}`", idx + 1)))
            })
            .collect()
    };
    let header = nums(0)?;
    let [n, m] = header[..] else {
        return Err(LdpcError::Alist("line 1: expected `n m`".into()));
    };
    let col_w = nums(2)?;
    let row_w = nums(3)?;
    if col_w.len() != n || row_w.len() != m {
        return Err(LdpcError::Alist("weight lists do not match n and m".into()));
    }
    let mut rows: Vec<Vec<usize>> = Vec::with_capacity(m);
    for r in 0..m {
        let entries: Vec<usize> = nums(4 + n + r)?.into_iter().filter(|&x| x != 0).collect();
        if entries.len() != row_w[r] {
            return Err(LdpcError::Alist(format!("row {} weight mismatch", r + 1)));
        }
        if let Some(&bad) = entries.iter().find(|&&x| x > n) {
            return Err(LdpcError::Alist(format!("row {}: column {bad} out of range", r + 1)));
        }
        rows.push(entries.into_iter().map(|x| x - 1).collect());
    }
    let h = ParityCheck::from_rows(n, &rows);
    for c in 0..n {
        let mut entries: Vec<usize> = nums(4 + c)?.into_iter().filter(|&x| x != 0).map(|x| x - 1).collect();
        entries.sort_unstable();
        if entries.len() != col_w[c] || entries != h.col(c) {
            return Err(LdpcError::Alist(format!("column {} disagrees with row lists", c + 1)));
        }
    }
    Ok(h)
}
