//! The single-bootstrap differential edit distance kernel.
//!
//! Every cell receives `dv_in = Δv[i][j-1]`, `dh_in = Δh[i-1][j]` and the
//! encrypted `9·eq` of its character pair, packs them into one key in
//! `[0, 18)` and bootstraps once to obtain `M = 1 + min(-eq, dv_in, dh_in)`.
//! Both outputs follow linearly: `dv_out = M - dh_in`, `dh_out = M - dv_in`.
//!
//! The 18-entry function fits a 16-entry table because keys 16 and 17 map
//! to 0, as do keys 0 and 1, so the negacyclic image of the first two entries
//! is already correct.

use crate::backend::{Backend, Lut16, NoiseLedger, LUT_SIZE};
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};

/// Number of reachable packed keys.
pub const KEY_COUNT: u8 = 18;
/// Constant added to every key so that the smallest key is 0.
const KEY_OFFSET: i64 = 4;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum KeyEncoding {
    /// `(dv + 1) + 3(1 + dh) + 9eq`
    Original,
    /// `(1 - dv) + 3(1 + dh) + 9eq`; halves the weight of the noise terms
    /// shared by `dv_in` and `dh_in`.
    #[default]
    Negated,
}

impl KeyEncoding {
    pub fn dv_coefficient(self) -> i64 {
        match self {
            KeyEncoding::Original => 1,
            KeyEncoding::Negated => -1,
        }
    }

    pub fn key(self, eq: u8, dv: i8, dh: i8) -> u8 {
        (self.dv_coefficient() * dv as i64 + 3 * dh as i64 + 9 * eq as i64 + KEY_OFFSET) as u8
    }

    /// `(eq, dv, dh)` for a reachable key.
    pub fn decode(self, key: u8) -> Option<(u8, i8, i8)> {
        if key >= KEY_COUNT {
            return None;
        }
        let eq = key / 9;
        let rest = key % 9;
        let dh = (rest / 3) as i8 - 1;
        let low = (rest % 3) as i8;
        let dv = match self {
            KeyEncoding::Original => low - 1,
            KeyEncoding::Negated => 1 - low,
        };
        Some((eq, dv, dh))
    }
}

/// `1 + min(-eq, dv, dh)`.
pub fn min_value(eq: u8, dv: i8, dh: i8) -> u8 {
    (1 + (-(eq as i8)).min(dv).min(dh)) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinLut {
    lut: Lut16,
    encoding: KeyEncoding,
}

impl MinLut {
    pub fn lut(&self) -> &Lut16 {
        &self.lut
    }

    pub fn encoding(&self) -> KeyEncoding {
        self.encoding
    }
}

pub fn build_min_lut(encoding: KeyEncoding) -> Result<MinLut> {
    let lut = Lut16::from_fn(|x| {
        let (eq, dv, dh) = encoding.decode(x).expect("keys below 16 are reachable");
        min_value(eq, dv, dh) as i64
    });
    for key in LUT_SIZE as u8..KEY_COUNT {
        let (eq, dv, dh) = encoding.decode(key).expect("reachable");
        if lut.eval(key) != min_value(eq, dv, dh) {
            return Err(Error::PackingViolation { key });
        }
    }
    Ok(MinLut { lut, encoding })
}

/// Noise variance of the packed key built from the given ledgers.
pub fn predict_key_variance(
    dv_in: &NoiseLedger,
    dh_in: &NoiseLedger,
    eq9: &NoiseLedger,
    encoding: KeyEncoding,
) -> u64 {
    NoiseLedger::combination_variance(&[(dv_in, encoding.dv_coefficient()), (dh_in, 3), (eq9, 1)])
}

#[derive(Debug, Clone)]
pub struct CellOutput<C> {
    pub dv_out: C,
    pub dh_out: C,
    pub min: C,
}

/// One cell: a single bootstrap plus linear operations.
pub fn cell_kernel<B: Backend>(
    be: &B,
    dv_in: &B::Ciphertext,
    dh_in: &B::Ciphertext,
    eq9: &B::Ciphertext,
    lut: &MinLut,
) -> Result<CellOutput<B::Ciphertext>> {
    let key = build_key(be, dv_in, dh_in, eq9, lut.encoding);
    let min = be.pbs(&key, &lut.lut)?;
    Ok(CellOutput {
        dv_out: be.sub(&min, dh_in),
        dh_out: be.sub(&min, dv_in),
        min,
    })
}

fn build_key<B: Backend>(
    be: &B,
    dv_in: &B::Ciphertext,
    dh_in: &B::Ciphertext,
    eq9: &B::Ciphertext,
    encoding: KeyEncoding,
) -> B::Ciphertext {
    let v = be.scalar_mul(dv_in, encoding.dv_coefficient());
    let h = be.scalar_mul(dh_in, 3);
    let key = be.add(&be.add(&v, &h), eq9);
    be.scalar_add(&key, KEY_OFFSET)
}

/// Smallest key variance reachable with freshly bootstrapped operands.
pub fn min_key_variance(encoding: KeyEncoding) -> u64 {
    let c = encoding.dv_coefficient();
    (c * c + 9 + 1) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BandMode {
    /// Every cell.
    Exact,
    /// Only the cells an optimal path can visit.
    Skip,
    /// Cells within `ell` of the diagonal; exact for distances up to `ell`.
    Approx(usize),
}

impl BandMode {
    pub fn name(self) -> &'static str {
        match self {
            BandMode::Exact => "exact",
            BandMode::Skip => "skip",
            BandMode::Approx(_) => "approx",
        }
    }

    pub fn resolve(self, m: usize, n: usize) -> Result<BandSpec> {
        let delta = m.abs_diff(n);
        let (half_width, extraction) = match self {
            BandMode::Exact => (m.max(n), Extraction::LastRow),
            // A path reaching offset k beyond the length difference costs at
            // least 2k - delta; this is the smallest band that excludes only
            // paths costlier than max(m, n).
            BandMode::Skip => ((m.max(n) + delta).div_ceil(2), Extraction::Staircase),
            BandMode::Approx(ell) => (ell, Extraction::Staircase),
        };
        BandSpec::new(self, half_width, extraction, m, n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Extraction {
    /// `m + Σ_j Δh[m][j]`; needs the whole last row.
    LastRow,
    /// Alternating right/down steps along the diagonal, then straight to the corner.
    Staircase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BandSpec {
    pub mode: BandMode,
    pub half_width: usize,
    pub extraction: Extraction,
}

impl BandSpec {
    pub fn new(
        mode: BandMode,
        half_width: usize,
        extraction: Extraction,
        m: usize,
        n: usize,
    ) -> Result<Self> {
        if half_width < m.abs_diff(n) {
            return Err(Error::BandTooNarrow { half_width, m, n });
        }
        if extraction == Extraction::LastRow && half_width < m.max(n) {
            return Err(Error::InvalidCircuit(
                "last-row extraction needs the full grid".into(),
            ));
        }
        Ok(Self {
            mode,
            half_width,
            extraction,
        })
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i.abs_diff(j) <= self.half_width
    }
}

/// `m(2ℓ + 1) - ℓ² - ℓ`: cells of an `m × m` grid within `ℓ` of the diagonal.
pub fn band_cell_count(m: u64, ell: u64) -> u64 {
    assert!(ell <= m, "band half-width exceeds the grid");
    m * (2 * ell + 1) - ell * ell - ell
}

/// Direct count of cells `1..=m × 1..=n` with `|i - j| <= half_width`.
pub fn visited_cell_count(m: usize, n: usize, half_width: usize) -> u64 {
    (1..=m)
        .map(|i| {
            let lo = i.saturating_sub(half_width).max(1);
            let hi = (i + half_width).min(n);
            hi.saturating_sub(lo) as u64 + u64::from(hi >= lo)
        })
        .sum()
}

/// Provider of the encrypted `9·eq` for the pair `(a_i, b_j)`, 1-based.
pub trait Eq9Source<B: Backend>: Sync {
    fn eq9(&self, be: &B, i: usize, j: usize) -> Result<B::Ciphertext>;
}

/// How the first row and column of differentials (all equal to 1) enter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    /// Fresh encryptions of 1, each its own noise source.
    #[default]
    Fresh,
    /// Noiseless public constants.
    Trivial,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KernelConfig {
    pub encoding: KeyEncoding,
    pub boundary: BoundaryKind,
    pub parallelism: Parallelism,
}

/// Banded storage of the differential ciphertexts, boundaries included.
#[derive(Debug, Clone)]
pub struct DeltaGrid<C> {
    m: usize,
    n: usize,
    half_width: usize,
    stride: usize,
    dv: Vec<Option<C>>,
    dh: Vec<Option<C>>,
}

impl<C: Clone> DeltaGrid<C> {
    fn new(m: usize, n: usize, half_width: usize) -> Self {
        let half_width = half_width.min(m.max(n));
        let stride = 2 * half_width + 1;
        Self {
            m,
            n,
            half_width,
            stride,
            dv: vec![None; (m + 1) * stride],
            dh: vec![None; (m + 1) * stride],
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i <= self.m && j <= self.n && i.abs_diff(j) <= self.half_width
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        self.in_band(i, j)
            .then(|| i * self.stride + (j + self.half_width - i))
    }

    /// Stored `Δv[i][j]`; `None` outside the band or when not computed.
    pub fn dv(&self, i: usize, j: usize) -> Option<&C> {
        self.slot(i, j).and_then(|s| self.dv[s].as_ref())
    }

    pub fn dh(&self, i: usize, j: usize) -> Option<&C> {
        self.slot(i, j).and_then(|s| self.dh[s].as_ref())
    }

    fn set_dv(&mut self, i: usize, j: usize, c: C) {
        let s = self.slot(i, j).expect("in band");
        self.dv[s] = Some(c);
    }

    fn set_dh(&mut self, i: usize, j: usize, c: C) {
        let s = self.slot(i, j).expect("in band");
        self.dh[s] = Some(c);
    }
}

/// A distance as a public offset plus encrypted partial sums.
///
/// Each part sums at most 15 differentials so it decodes unambiguously as a
/// signed value; a single 5-bit ciphertext would wrap at 32.
#[derive(Debug, Clone)]
pub struct EncryptedScore<C> {
    pub offset: i64,
    pub parts: Vec<C>,
}

/// Differentials per partial sum.
pub const SCORE_GROUP: usize = 15;

impl<C: Clone> EncryptedScore<C> {
    fn from_terms<B: Backend<Ciphertext = C>>(be: &B, offset: i64, terms: Vec<C>) -> Self {
        let parts = terms
            .chunks(SCORE_GROUP)
            .map(|g| g[1..].iter().fold(g[0].clone(), |acc, c| be.add(&acc, c)))
            .collect();
        Self { offset, parts }
    }

    /// Folds everything into one ciphertext; only meaningful below 32.
    pub fn collapse<B: Backend<Ciphertext = C>>(&self, be: &B) -> Result<C> {
        let start = be.trivial(self.offset.rem_euclid(32) as u8)?;
        Ok(self.parts.iter().fold(start, |acc, p| be.add(&acc, p)))
    }
}

/// Reads a partial sum as a signed value in `[-16, 16)`.
pub fn decode_signed(v: u8) -> i64 {
    if v >= 16 {
        v as i64 - 32
    } else {
        v as i64
    }
}

pub fn decrypt_score<B: Backend>(be: &B, score: &EncryptedScore<B::Ciphertext>) -> i64 {
    score.offset
        + score
            .parts
            .iter()
            .map(|p| decode_signed(be.decrypt(p)))
            .sum::<i64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellTrace {
    pub i: usize,
    pub j: usize,
    /// Variance of the key that was bootstrapped (after any refresh).
    pub key_variance: u64,
    /// Variance the key would have had without refreshing.
    pub predicted_variance: u64,
    pub refreshes: u8,
}

#[derive(Debug, Clone)]
pub struct DistanceRun<C> {
    pub score: EncryptedScore<C>,
    pub grid: DeltaGrid<C>,
    pub band: BandSpec,
    pub visited_cells: u64,
    pub kernel_pbs: u64,
    pub refreshes: u64,
    pub max_key_variance: u64,
    /// One entry per visited cell, in traversal order.
    pub trace: Vec<CellTrace>,
}

enum Operand<'a, C> {
    Stored(&'a C),
    /// Public +1, used for boundaries that are not stored and for reads
    /// outside the band.
    One(C),
}

impl<C> Operand<'_, C> {
    fn get(&self) -> &C {
        match self {
            Operand::Stored(c) => c,
            Operand::One(c) => c,
        }
    }
}

struct CellResult<C> {
    i: usize,
    j: usize,
    dv_out: C,
    dh_out: C,
    refreshed_dv: Option<C>,
    refreshed_dh: Option<C>,
    trace: CellTrace,
}

fn refresh_differential<B: Backend>(be: &B, d: &B::Ciphertext) -> Result<B::Ciphertext> {
    // {-1, 0, 1} -> {0, 1, 2} so the value sits in the programmable half
    let shifted = be.scalar_add(d, 1);
    let fresh = be.refresh(&shifted)?;
    Ok(be.scalar_add(&fresh, -1))
}

/// Operands for one cell after refreshing them if the key would exceed the
/// noise budget.
pub struct RefreshedOperands<C> {
    pub dv_in: Option<C>,
    pub dh_in: Option<C>,
    pub eq9: Option<C>,
    pub predicted_variance: u64,
    pub key_variance: u64,
    pub refreshes: u8,
}

/// Refreshes the cell's operands when the predicted key variance exceeds the
/// budget. Operands that are already at fresh-bootstrap noise are left alone.
pub fn refresh_if_needed<B: Backend>(
    be: &B,
    dv_in: &B::Ciphertext,
    dh_in: &B::Ciphertext,
    eq9: &B::Ciphertext,
    encoding: KeyEncoding,
) -> Result<RefreshedOperands<B::Ciphertext>> {
    let budget = be.noise_params().max_variance_budget;
    let c = encoding.dv_coefficient();
    let predicted = be.combination_variance(&[(dv_in, c), (dh_in, 3), (eq9, 1)]);
    let mut out = RefreshedOperands {
        dv_in: None,
        dh_in: None,
        eq9: None,
        predicted_variance: predicted,
        key_variance: predicted,
        refreshes: 0,
    };
    if predicted <= budget {
        return Ok(out);
    }
    if be.variance(dv_in) > 1 {
        out.dv_in = Some(refresh_differential(be, dv_in)?);
        out.refreshes += 1;
    }
    if be.variance(dh_in) > 1 {
        out.dh_in = Some(refresh_differential(be, dh_in)?);
        out.refreshes += 1;
    }
    let dv = out.dv_in.as_ref().unwrap_or(dv_in);
    let dh = out.dh_in.as_ref().unwrap_or(dh_in);
    out.key_variance = be.combination_variance(&[(dv, c), (dh, 3), (eq9, 1)]);
    if out.key_variance > budget && be.variance(eq9) > 1 {
        out.eq9 = Some(be.refresh(eq9)?);
        out.refreshes += 1;
        let e = out.eq9.as_ref().expect("just set");
        out.key_variance = be.combination_variance(&[(dv, c), (dh, 3), (e, 1)]);
    }
    Ok(out)
}

/// Encrypted edit distance of two strings of lengths `m` and `n`.
pub fn distance<B, E>(
    be: &B,
    eq9: &E,
    m: usize,
    n: usize,
    mode: BandMode,
    config: &KernelConfig,
) -> Result<DistanceRun<B::Ciphertext>>
where
    B: Backend,
    E: Eq9Source<B> + ?Sized,
{
    let band = mode.resolve(m, n)?;
    distance_with_band(be, eq9, m, n, band, config)
}

pub fn distance_with_band<B, E>(
    be: &B,
    eq9: &E,
    m: usize,
    n: usize,
    band: BandSpec,
    config: &KernelConfig,
) -> Result<DistanceRun<B::Ciphertext>>
where
    B: Backend,
    E: Eq9Source<B> + ?Sized,
{
    if band.half_width < m.abs_diff(n) {
        return Err(Error::BandTooNarrow {
            half_width: band.half_width,
            m,
            n,
        });
    }
    let budget = be.noise_params().max_variance_budget;
    let minimum = min_key_variance(config.encoding);
    if budget < minimum {
        return Err(Error::BudgetTooSmall { budget, minimum });
    }
    let lut = build_min_lut(config.encoding)?;
    let mut grid = DeltaGrid::new(m, n, band.half_width);

    let boundary_one = || match config.boundary {
        BoundaryKind::Fresh => be.encrypt(1),
        BoundaryKind::Trivial => be.trivial(1),
    };
    for i in 1..=m.min(grid.half_width) {
        grid.set_dv(i, 0, boundary_one()?);
    }
    for j in 1..=n.min(grid.half_width) {
        grid.set_dh(0, j, boundary_one()?);
    }

    let mut trace = Vec::with_capacity(visited_cell_count(m, n, grid.half_width) as usize);
    for k in 2..=m + n {
        let lo = k.saturating_sub(n).max(1);
        let hi = (k - 1).min(m);
        let cells: Vec<(usize, usize)> = (lo..=hi)
            .map(|i| (i, k - i))
            .filter(|&(i, j)| grid.in_band(i, j))
            .collect();
        if cells.is_empty() {
            continue;
        }
        let grid_ref = &grid;
        let results = par::try_map_slice(config.parallelism, &cells, |&(i, j)| {
            compute_cell(be, eq9, grid_ref, &lut, i, j)
        })?;
        for r in results {
            if let Some(c) = r.refreshed_dv {
                grid.set_dv(r.i, r.j - 1, c);
            }
            if let Some(c) = r.refreshed_dh {
                grid.set_dh(r.i - 1, r.j, c);
            }
            grid.set_dv(r.i, r.j, r.dv_out);
            grid.set_dh(r.i, r.j, r.dh_out);
            trace.push(r.trace);
        }
    }

    let score = extract_score(be, &grid, band.extraction)?;
    let visited_cells = trace.len() as u64;
    Ok(DistanceRun {
        score,
        band,
        visited_cells,
        kernel_pbs: visited_cells,
        refreshes: trace.iter().map(|t| t.refreshes as u64).sum(),
        max_key_variance: trace.iter().map(|t| t.key_variance).max().unwrap_or(0),
        trace,
        grid,
    })
}

fn read_dv<'g, B: Backend>(
    be: &B,
    grid: &'g DeltaGrid<B::Ciphertext>,
    i: usize,
    j: usize,
) -> Result<Operand<'g, B::Ciphertext>> {
    match grid.dv(i, j) {
        Some(c) => Ok(Operand::Stored(c)),
        None => Ok(Operand::One(be.trivial(1)?)),
    }
}

fn read_dh<'g, B: Backend>(
    be: &B,
    grid: &'g DeltaGrid<B::Ciphertext>,
    i: usize,
    j: usize,
) -> Result<Operand<'g, B::Ciphertext>> {
    match grid.dh(i, j) {
        Some(c) => Ok(Operand::Stored(c)),
        None => Ok(Operand::One(be.trivial(1)?)),
    }
}

fn compute_cell<B, E>(
    be: &B,
    eq9: &E,
    grid: &DeltaGrid<B::Ciphertext>,
    lut: &MinLut,
    i: usize,
    j: usize,
) -> Result<CellResult<B::Ciphertext>>
where
    B: Backend,
    E: Eq9Source<B> + ?Sized,
{
    let dv = read_dv(be, grid, i, j - 1)?;
    let dh = read_dh(be, grid, i - 1, j)?;
    let e = eq9.eq9(be, i, j)?;
    let ops = refresh_if_needed(be, dv.get(), dh.get(), &e, lut.encoding)?;
    let dv_in = ops.dv_in.as_ref().unwrap_or(dv.get());
    let dh_in = ops.dh_in.as_ref().unwrap_or(dh.get());
    let e_in = ops.eq9.as_ref().unwrap_or(&e);
    let out = cell_kernel(be, dv_in, dh_in, e_in, lut)?;
    Ok(CellResult {
        i,
        j,
        dv_out: out.dv_out,
        dh_out: out.dh_out,
        trace: CellTrace {
            i,
            j,
            key_variance: ops.key_variance,
            predicted_variance: ops.predicted_variance,
            refreshes: ops.refreshes,
        },
        refreshed_dv: ops.dv_in,
        refreshed_dh: ops.dh_in,
    })
}

/// Sums differentials along the extraction path. No bootstraps.
///
/// Boundary and out-of-band differentials are the public constant 1 and go
/// into the offset.
pub fn extract_score<B: Backend>(
    be: &B,
    grid: &DeltaGrid<B::Ciphertext>,
    extraction: Extraction,
) -> Result<EncryptedScore<B::Ciphertext>> {
    let (m, n) = (grid.m, grid.n);
    if extraction == Extraction::LastRow && m > 0 && n > 0 && grid.half_width < m.max(n) {
        return Err(Error::InvalidCircuit(
            "last row is not fully computed".into(),
        ));
    }
    // the left boundary column contributes m public ones to the last row sum
    let mut offset = if extraction == Extraction::LastRow {
        m as i64
    } else {
        0
    };
    let mut terms = Vec::new();
    let mut take = |c: Option<&B::Ciphertext>, boundary: bool| match c {
        Some(c) if !boundary => terms.push(c.clone()),
        _ => offset += 1,
    };
    match extraction {
        Extraction::LastRow => {
            for j in 1..=n {
                take(grid.dh(m, j), m == 0);
            }
        }
        Extraction::Staircase => {
            let diag = m.min(n);
            for d in 1..=diag {
                if m <= n {
                    take(grid.dh(d - 1, d), d == 1);
                    take(grid.dv(d, d), false);
                } else {
                    take(grid.dv(d, d - 1), d == 1);
                    take(grid.dh(d, d), false);
                }
            }
            for j in diag + 1..=n {
                take(grid.dh(m, j), m == 0);
            }
            for i in diag + 1..=m {
                take(grid.dv(i, n), n == 0);
            }
        }
    }
    Ok(EncryptedScore::from_terms(be, offset, terms))
}

/// Sums differentials along an arbitrary monotone path that stays in the band.
///
/// `steps` holds `true` for a step down and `false` for a step right.
pub fn extract_path<B: Backend>(
    be: &B,
    grid: &DeltaGrid<B::Ciphertext>,
    steps: &[bool],
) -> Result<EncryptedScore<B::Ciphertext>> {
    let (mut i, mut j) = (0usize, 0usize);
    let mut offset = 0i64;
    let mut terms = Vec::new();
    for &down in steps {
        if down {
            i += 1;
        } else {
            j += 1;
        }
        if !grid.in_band(i, j) {
            return Err(Error::InvalidCircuit(format!(
                "path leaves the band at ({i}, {j})"
            )));
        }
        let boundary = if down { j == 0 } else { i == 0 };
        if boundary {
            offset += 1;
            continue;
        }
        let c = if down { grid.dv(i, j) } else { grid.dh(i, j) };
        terms.push(c.expect("in-band cell was computed").clone());
    }
    if (i, j) != (grid.m, grid.n) {
        return Err(Error::InvalidCircuit(
            "path does not end at the corner".into(),
        ));
    }
    Ok(EncryptedScore::from_terms(be, offset, terms))
}
