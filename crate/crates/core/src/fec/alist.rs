//! Sparse parity-check matrices in alist format.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use super::FecError;

/// Binary parity-check matrix stored as row and column adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheckMatrix {
    n: usize,
    m: usize,
    cols: Vec<Vec<u32>>,
    rows: Vec<Vec<u32>>,
}

impl ParityCheckMatrix {
    /// Builds from per-column row lists. Rows are derived.
    pub fn from_columns(m: usize, cols: Vec<Vec<u32>>) -> Result<Self, FecError> {
        let n = cols.len();
        let mut rows = vec![Vec::new(); m];
        for (j, col) in cols.iter().enumerate() {
            if col.is_empty() {
                return Err(FecError::EmptyColumn(j));
            }
            let mut seen = HashSet::new();
            for &r in col {
                if r as usize >= m {
                    return Err(FecError::DimensionMismatch(format!(
                        "column {j} references row {r} but m = {m}"
                    )));
                }
                if !seen.insert(r) {
                    return Err(FecError::DimensionMismatch(format!(
                        "column {j} lists row {r} twice"
                    )));
                }
                rows[r as usize].push(j as u32);
            }
        }
        let mut cols = cols;
        cols.iter_mut().for_each(|c| c.sort_unstable());
        Ok(Self { n, m, cols, rows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn cols(&self) -> &[Vec<u32>] {
        &self.cols
    }

    pub fn edges(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    /// True when every parity check is satisfied by the 0/1 word `bits`.
    pub fn syndrome_ok(&self, bits: &[u8]) -> bool {
        self.rows
            .iter()
            .all(|row| row.iter().fold(0u8, |acc, &j| acc ^ bits[j as usize]) == 0)
    }

    pub fn syndrome(&self, bits: &[u8]) -> Vec<u8> {
        self.rows
            .iter()
            .map(|row| row.iter().fold(0u8, |acc, &j| acc ^ bits[j as usize]))
            .collect()
    }

    /// No two columns share more than one row, i.e. the Tanner graph has no 4-cycles.
    pub fn has_girth_at_least_6(&self) -> bool {
        let mut pairs = HashSet::new();
        for col in &self.cols {
            for a in 0..col.len() {
                for b in a + 1..col.len() {
                    if !pairs.insert((col[a], col[b])) {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn load(path: &Path) -> Result<Self, FecError> {
        let text = std::fs::read_to_string(path).map_err(|source| FecError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_alist(&text)
    }

    pub fn parse_alist(text: &str) -> Result<Self, FecError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut next_nums = |what: &str| -> Result<(usize, Vec<usize>), FecError> {
            let (no, line) = lines.next().ok_or_else(|| FecError::Parse {
                line: text.lines().count() + 1,
                msg: format!("unexpected end of file, expected {what}"),
            })?;
            let nums = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>().map_err(|_| FecError::Parse {
                        line: no,
                        msg: format!("bad integer {t:?} in {what}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((no, nums))
        };

        let (no, dims) = next_nums("dimensions")?;
        if dims.len() != 2 {
            return Err(FecError::Parse {
                line: no,
                msg: "expected `n m`".into(),
            });
        }
        let (n, m) = (dims[0], dims[1]);
        let (no, maxw) = next_nums("maximum weights")?;
        if maxw.len() != 2 {
            return Err(FecError::Parse {
                line: no,
                msg: "expected `max_col_weight max_row_weight`".into(),
            });
        }
        let (no, col_w) = next_nums("column weights")?;
        if col_w.len() != n {
            return Err(FecError::DimensionMismatch(format!(
                "line {no}: {} column weights for n = {n}",
                col_w.len()
            )));
        }
        let (no, row_w) = next_nums("row weights")?;
        if row_w.len() != m {
            return Err(FecError::DimensionMismatch(format!(
                "line {no}: {} row weights for m = {m}",
                row_w.len()
            )));
        }
        let mut cols = Vec::with_capacity(n);
        for (j, &w) in col_w.iter().enumerate() {
            let (no, entries) = next_nums("column entries")?;
            let rows: Vec<u32> = entries.iter().filter(|&&e| e != 0).map(|&e| e as u32 - 1).collect();
            if rows.len() != w {
                return Err(FecError::Parse {
                    line: no,
                    msg: format!("column {j} lists {} rows, weight says {w}", rows.len()),
                });
            }
            cols.push(rows);
        }
        let mut row_lists = Vec::with_capacity(m);
        for (i, &w) in row_w.iter().enumerate() {
            let (no, entries) = next_nums("row entries")?;
            let c: Vec<u32> = entries.iter().filter(|&&e| e != 0).map(|&e| e as u32 - 1).collect();
            if c.len() != w {
                return Err(FecError::Parse {
                    line: no,
                    msg: format!("row {i} lists {} columns, weight says {w}", c.len()),
                });
            }
            row_lists.push(c);
        }
        let h = Self::from_columns(m, cols)?;
        for (i, listed) in row_lists.iter_mut().enumerate() {
            listed.sort_unstable();
            if *listed != h.rows[i] {
                return Err(FecError::DimensionMismatch(format!(
                    "row {i} disagrees with the column lists"
                )));
            }
        }
        Ok(h)
    }

    pub fn to_alist(&self) -> String {
        let max_c = self.cols.iter().map(Vec::len).max().unwrap_or(0);
        let max_r = self.rows.iter().map(Vec::len).max().unwrap_or(0);
        let mut s = String::new();
        let join = |v: Vec<String>| v.join(" ");
        let _ = writeln!(s, "{} {}", self.n, self.m);
        let _ = writeln!(s, "{max_c} {max_r}");
        let _ = writeln!(s, "{}", join(self.cols.iter().map(|c| c.len().to_string()).collect()));
        let _ = writeln!(s, "{}", join(self.rows.iter().map(|r| r.len().to_string()).collect()));
        for (lists, width) in [(&self.cols, max_c), (&self.rows, max_r)] {
            for l in lists.iter() {
                let mut e: Vec<String> = l.iter().map(|&x| (x + 1).to_string()).collect();
                e.resize(width, "0".into());
                let _ = writeln!(s, "{}", join(e));
            }
        }
        s
    }
}
