use std::collections::VecDeque;

/// Sparse binary parity-check matrix with both row and column adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheck {
    n: usize,
    rows: Vec<Vec<usize>>,
    cols: Vec<Vec<usize>>,
}

impl ParityCheck {
    /// An `m x n` matrix with no ones.
    pub fn empty(m: usize, n: usize) -> Self {
        ParityCheck {
            n,
            rows: vec![Vec::new(); m],
            cols: vec![Vec::new(); n],
        }
    }

    /// Builds from row supports; duplicate entries cancel (GF(2)).
    pub fn from_rows(n: usize, rows: &[Vec<usize>]) -> Self {
        let mut h = ParityCheck::empty(rows.len(), n);
        for (r, row) in rows.iter().enumerate() {
            for &c in row {
                assert!(c < n, "column index {c} out of range");
                h.toggle(r, c);
            }
        }
        h
    }

    /// Builds from a dense 0/1 matrix given row by row.
    pub fn from_dense(rows: &[&[u8]]) -> Self {
        let n = rows.first().map_or(0, |r| r.len());
        let supports: Vec<Vec<usize>> = rows
            .iter()
            .map(|r| r.iter().enumerate().filter(|(_, &b)| b & 1 == 1).map(|(i, _)| i).collect())
            .collect();
        ParityCheck::from_rows(n, &supports)
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.n
    }

    pub fn num_ones(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.rows[r]
    }

    pub fn col(&self, c: usize) -> &[usize] {
        &self.cols[c]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        self.rows[r].binary_search(&c).is_ok()
    }

    pub fn insert(&mut self, r: usize, c: usize) {
        if let Err(pos) = self.rows[r].binary_search(&c) {
            self.rows[r].insert(pos, c);
            let cpos = self.cols[c].binary_search(&r).unwrap_err();
            self.cols[c].insert(cpos, r);
        }
    }

    fn toggle(&mut self, r: usize, c: usize) {
        match self.rows[r].binary_search(&c) {
            Ok(pos) => {
                self.rows[r].remove(pos);
                let cpos = self.cols[c].binary_search(&r).unwrap();
                self.cols[c].remove(cpos);
            }
            Err(_) => self.insert(r, c),
        }
    }

    /// `H * bits^T == 0` over GF(2); `bits` holds one bit per byte.
    pub fn is_codeword(&self, bits: &[u8]) -> bool {
        assert_eq!(bits.len(), self.n);
        self.rows
            .iter()
            .all(|row| row.iter().fold(0u8, |acc, &c| acc ^ (bits[c] & 1)) == 0)
    }

    /// True if two columns share two or more rows.
    pub fn has_four_cycle(&self) -> bool {
        let m = self.rows.len();
        let mut seen = vec![false; m * m];
        for col in &self.cols {
            for (i, &a) in col.iter().enumerate() {
                for &b in &col[i + 1..] {
                    let idx = a * m + b;
                    if seen[idx] {
                        return true;
                    }
                    seen[idx] = true;
                }
            }
        }
        false
    }

    /// Length of the shortest cycle in the Tanner graph, or `None` if acyclic.
    pub fn girth(&self) -> Option<usize> {
        // Nodes: variables 0..n, checks n..n+m.
        let n = self.n;
        let total = n + self.rows.len();
        let neighbors = |u: usize| -> &[usize] {
            if u < n {
                &self.cols[u]
            } else {
                &self.rows[u - n]
            }
        };
        let mut best: Option<usize> = None;
        let mut dist = vec![usize::MAX; total];
        let mut parent = vec![usize::MAX; total];
        let mut queue = VecDeque::new();
        for start in 0..n {
            dist.iter_mut().for_each(|d| *d = usize::MAX);
            dist[start] = 0;
            parent[start] = usize::MAX;
            queue.clear();
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                if let Some(g) = best {
                    if 2 * dist[u] + 1 >= g {
                        break;
                    }
                }
                for &raw in neighbors(u) {
                    let v = if u < n { raw + n } else { raw };
                    if v == parent[u] {
                        continue;
                    }
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        parent[v] = u;
                        queue.push_back(v);
                    } else {
                        let len = dist[u] + dist[v] + 1;
                        best = Some(best.map_or(len, |g| g.min(len)));
                    }
                }
            }
        }
        best
    }
}
