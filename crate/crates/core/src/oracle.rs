//! Plaintext reference implementations of edit distance.
//!
//! Everything here works on `char` slices and plain integers; the encrypted
//! pipeline is checked against these functions.

use crate::error::{Error, Result};

/// Prefix edit distances `D[i][j]` for `a[..i]` and `b[..j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DMatrix {
    rows: usize,
    cols: usize,
    cells: Vec<u32>,
}

impl DMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.cells[i * self.cols + j]
    }

    pub fn distance(&self) -> u32 {
        self.get(self.rows - 1, self.cols - 1)
    }
}

/// Horizontal and vertical differentials of a [`DMatrix`].
///
/// `dv(i, j) = D[i][j] - D[i-1][j]` and `dh(i, j) = D[i][j] - D[i][j-1]`,
/// with the boundary convention `dv(i, 0) = 1`, `dh(0, j) = 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffMatrices {
    m: usize,
    n: usize,
    dv: Vec<i8>,
    dh: Vec<i8>,
}

impl DiffMatrices {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Defined for `1 <= i <= m`, `0 <= j <= n`.
    pub fn dv(&self, i: usize, j: usize) -> i8 {
        assert!(i >= 1 && i <= self.m && j <= self.n);
        if j == 0 {
            1
        } else {
            self.dv[(i - 1) * self.n + (j - 1)]
        }
    }

    /// Defined for `0 <= i <= m`, `1 <= j <= n`.
    pub fn dh(&self, i: usize, j: usize) -> i8 {
        assert!(j >= 1 && j <= self.n && i <= self.m);
        if i == 0 {
            1
        } else {
            self.dh[(i - 1) * self.n + (j - 1)]
        }
    }

    /// Sum of differentials along a monotone lattice path from `(0, 0)`.
    ///
    /// `steps` holds `true` for a step down (`i + 1`) and `false` for a step
    /// right (`j + 1`).
    pub fn path_sum(&self, steps: &[bool]) -> i64 {
        let (mut i, mut j) = (0, 0);
        let mut sum = 0i64;
        for &down in steps {
            if down {
                i += 1;
                sum += self.dv(i, j) as i64;
            } else {
                j += 1;
                sum += self.dh(i, j) as i64;
            }
        }
        sum
    }
}

/// Wagner-Fischer with unit insert, delete and substitute costs.
pub fn wf_distance(a: &[char], b: &[char]) -> (u32, DMatrix) {
    let (m, n) = (a.len(), b.len());
    let cols = n + 1;
    let mut cells = vec![0u32; (m + 1) * cols];
    for (j, c) in cells.iter_mut().take(cols).enumerate() {
        *c = j as u32;
    }
    for i in 1..=m {
        cells[i * cols] = i as u32;
        for j in 1..=n {
            let sub = cells[(i - 1) * cols + j - 1] + u32::from(a[i - 1] != b[j - 1]);
            let del = cells[(i - 1) * cols + j] + 1;
            let ins = cells[i * cols + j - 1] + 1;
            cells[i * cols + j] = sub.min(del).min(ins);
        }
    }
    let matrix = DMatrix {
        rows: m + 1,
        cols,
        cells,
    };
    (matrix.distance(), matrix)
}

pub fn levenshtein(a: &str, b: &str) -> u32 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    wf_distance(&a, &b).0
}

pub fn diff_matrices(a: &[char], b: &[char]) -> DiffMatrices {
    let (_, d) = wf_distance(a, b);
    let (m, n) = (a.len(), b.len());
    let mut dv = Vec::with_capacity(m * n);
    let mut dh = Vec::with_capacity(m * n);
    for i in 1..=m {
        for j in 1..=n {
            dv.push((d.get(i, j) as i64 - d.get(i - 1, j) as i64) as i8);
            dh.push((d.get(i, j) as i64 - d.get(i, j - 1) as i64) as i8);
        }
    }
    DiffMatrices { m, n, dv, dh }
}

/// Outputs of one differential cell given its inputs.
///
/// Returns `(dv_out, dh_out)` where both equal `min(-eq, dv_in, dh_in) + 1`
/// minus the opposite input.
pub fn cell_reference(eq: u8, dv_in: i8, dh_in: i8) -> Result<(i8, i8)> {
    if eq > 1 {
        return Err(Error::InvalidCircuit(format!(
            "eq must be 0 or 1, got {eq}"
        )));
    }
    for d in [dv_in, dh_in] {
        if !(-1..=1).contains(&d) {
            return Err(Error::InvalidCircuit(format!(
                "differential must be in -1..=1, got {d}"
            )));
        }
    }
    let min = (-(eq as i8)).min(dv_in).min(dh_in);
    Ok((min + 1 - dh_in, min + 1 - dv_in))
}

/// Edit distance restricted to cells with `|i - j| <= half_width`.
///
/// Reads outside the band are taken as `+1` differentials, which is the same
/// as never letting the path leave the band. The result is never below the
/// true distance and equals it when every optimal path stays in the band.
pub fn banded_distance(a: &[char], b: &[char], half_width: usize) -> Result<u32> {
    let (m, n) = (a.len(), b.len());
    if half_width < m.abs_diff(n) {
        return Err(Error::BandTooNarrow { half_width, m, n });
    }
    // D values for in-band cells; out-of-band reads fall back to neighbour + 1.
    let in_band = |i: usize, j: usize| i.abs_diff(j) <= half_width;
    let cols = n + 1;
    let mut d: Vec<Option<u32>> = vec![None; (m + 1) * cols];
    for i in 0..=m {
        for j in 0..=n {
            if !in_band(i, j) {
                continue;
            }
            let value = if i == 0 {
                j as u32
            } else if j == 0 {
                i as u32
            } else {
                let diag = d[(i - 1) * cols + j - 1].expect("diagonal is always in band");
                let up = d[(i - 1) * cols + j].unwrap_or(diag + 1);
                let left = d[i * cols + j - 1].unwrap_or(diag + 1);
                let sub = diag + u32::from(a[i - 1] != b[j - 1]);
                sub.min(up + 1).min(left + 1)
            };
            d[i * cols + j] = Some(value);
        }
    }
    Ok(d[m * cols + n].expect("corner is in band"))
}
