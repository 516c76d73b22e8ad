//! Ciphertext backend interface and the simulated TFHE implementation.
//!
//! The simulated backend keeps the plaintext residue in clear and tracks noise
//! symbolically: every fresh encryption and every bootstrap output mints a new
//! noise source, and linear operations combine the per-source coefficients.
//! The variance of a ciphertext is the sum of its squared coefficients, in
//! units of the variance of one freshly bootstrapped ciphertext.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

/// Number of distinct plaintext values, padding bit included.
pub const PLAINTEXT_MODULUS: u8 = 32;
/// Number of freely programmable table entries (padding bit clear).
pub const LUT_SIZE: usize = 16;

fn reduce(v: i64) -> u8 {
    v.rem_euclid(PLAINTEXT_MODULUS as i64) as u8
}

fn check_plaintext(v: u8) -> Result<u8> {
    if v < PLAINTEXT_MODULUS {
        Ok(v)
    } else {
        Err(Error::ValueOutOfRange { value: v as i64 })
    }
}

/// A 16-entry programmable bootstrap table.
///
/// Inputs with the padding bit set evaluate to the negation (mod 32) of the
/// entry at `x - 16`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Lut16 {
    entries: [u8; LUT_SIZE],
}

impl Lut16 {
    pub fn new(entries: [u8; LUT_SIZE]) -> Result<Self> {
        for &e in &entries {
            check_plaintext(e)?;
        }
        Ok(Self { entries })
    }

    /// Builds a table from `f` on `0..16`, reducing each output mod 32.
    pub fn from_fn(f: impl Fn(u8) -> i64) -> Self {
        let mut entries = [0u8; LUT_SIZE];
        for (x, e) in entries.iter_mut().enumerate() {
            *e = reduce(f(x as u8));
        }
        Self { entries }
    }

    pub fn identity() -> Self {
        Self::from_fn(|x| x as i64)
    }

    pub fn entries(&self) -> &[u8; LUT_SIZE] {
        &self.entries
    }

    pub fn eval(&self, x: u8) -> u8 {
        negacyclic_eval(self, x)
    }

    /// Evaluation projected onto the 4 message bits, the way lookup tables
    /// are usually printed (`-1` shows up as `15`).
    pub fn eval_message(&self, x: u8) -> u8 {
        self.eval(x) % LUT_SIZE as u8
    }

    /// One line per base entry, `index<TAB>output`, decimal.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, e) in self.entries.iter().enumerate() {
            out.push_str(&format!("{i}\t{e}\n"));
        }
        out
    }

    pub fn parse_dump(text: &str) -> Result<Self> {
        let mut entries = [0u8; LUT_SIZE];
        let mut seen = [false; LUT_SIZE];
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (idx, out) = line
                .split_once('\t')
                .ok_or_else(|| Error::Format(format!("expected index<TAB>output, got {line:?}")))?;
            let idx: usize = idx
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad index {idx:?}")))?;
            let out: u8 = out
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad output {out:?}")))?;
            if idx >= LUT_SIZE || seen[idx] {
                return Err(Error::Format(format!(
                    "index {idx} out of range or repeated"
                )));
            }
            entries[idx] = check_plaintext(out)?;
            seen[idx] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Format("dump must list all 16 entries".into()));
        }
        Ok(Self { entries })
    }
}

impl fmt::Debug for Lut16 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Lut16").field(&self.entries).finish()
    }
}

/// Evaluates `lut` on the full 32-value plaintext space.
pub fn negacyclic_eval(lut: &Lut16, x: u8) -> u8 {
    let x = x % PLAINTEXT_MODULUS;
    if (x as usize) < LUT_SIZE {
        lut.entries[x as usize]
    } else {
        reduce(-(lut.entries[x as usize - LUT_SIZE] as i64))
    }
}

/// Identifier of one independent noise source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourceId(pub u64);

/// Signed per-source noise coefficients, sorted by source id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NoiseLedger {
    terms: Vec<(SourceId, i64)>,
}

impl NoiseLedger {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn fresh(id: SourceId) -> Self {
        Self {
            terms: vec![(id, 1)],
        }
    }

    /// Builds a ledger from arbitrary terms, merging repeated ids.
    pub fn from_terms(terms: impl IntoIterator<Item = (SourceId, i64)>) -> Self {
        let mut terms: Vec<_> = terms.into_iter().collect();
        terms.sort_unstable_by_key(|t| t.0);
        let mut merged: Vec<(SourceId, i64)> = Vec::with_capacity(terms.len());
        for (id, c) in terms {
            match merged.last_mut() {
                Some((last, acc)) if *last == id => *acc += c,
                _ => merged.push((id, c)),
            }
        }
        merged.retain(|t| t.1 != 0);
        Self { terms: merged }
    }

    pub fn terms(&self) -> &[(SourceId, i64)] {
        &self.terms
    }

    pub fn coefficient(&self, id: SourceId) -> i64 {
        self.terms
            .binary_search_by_key(&id, |t| t.0)
            .map(|i| self.terms[i].1)
            .unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn variance(&self) -> u64 {
        self.terms.iter().map(|&(_, c)| (c * c) as u64).sum()
    }

    /// `Σ k_i · ledger_i`, cancelling coefficients that reach zero.
    pub fn linear_combination(parts: &[(&NoiseLedger, i64)]) -> Self {
        let mut acc = Vec::new();
        let mut first = true;
        for &(l, k) in parts {
            if k == 0 || l.terms.is_empty() {
                continue;
            }
            if first {
                acc = l.terms.iter().map(|&(id, c)| (id, c * k)).collect();
                first = false;
            } else {
                acc = merge_scaled(&acc, &l.terms, k);
            }
        }
        Self { terms: acc }
    }

    /// Variance of `Σ k_i · ledger_i` without materializing the result.
    pub fn combination_variance(parts: &[(&NoiseLedger, i64)]) -> u64 {
        match parts {
            [] => 0,
            [(l, k)] => l.variance() * (k * k) as u64,
            _ => Self::linear_combination(parts).variance(),
        }
    }

    pub fn scaled(&self, k: i64) -> Self {
        if k == 0 {
            return Self::empty();
        }
        Self {
            terms: self.terms.iter().map(|&(id, c)| (id, c * k)).collect(),
        }
    }
}

/// `a + k·b` for two sorted term lists, dropping zero coefficients.
fn merge_scaled(a: &[(SourceId, i64)], b: &[(SourceId, i64)], k: i64) -> Vec<(SourceId, i64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push((b[j].0, b[j].1 * k));
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                let c = a[i].1 + b[j].1 * k;
                if c != 0 {
                    out.push((a[i].0, c));
                }
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend(b[j..].iter().map(|&(id, c)| (id, c * k)));
    out
}

/// Plaintext residue plus its noise ledger.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimCiphertext {
    value: u8,
    ledger: NoiseLedger,
}

impl SimCiphertext {
    /// Reassembles a ciphertext from stored parts.
    pub fn from_parts(value: u8, ledger: NoiseLedger) -> Result<Self> {
        Ok(Self {
            value: check_plaintext(value)?,
            ledger,
        })
    }

    pub fn ledger(&self) -> &NoiseLedger {
        &self.ledger
    }

    pub fn variance(&self) -> u64 {
        self.ledger.variance()
    }

    /// The plaintext residue. Only the simulator can see this.
    pub fn raw_value(&self) -> u8 {
        self.value
    }
}

/// Noise budget in units of one fresh bootstrap variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseParams {
    pub max_variance_budget: u64,
}

impl NoiseParams {
    /// Small parameter set tolerating 25 fresh additions.
    pub const SMALL: NoiseParams = NoiseParams {
        max_variance_budget: 25,
    };
    /// Approximation of common production parameters (about 4000 additions).
    pub const PRODUCTION: NoiseParams = NoiseParams {
        max_variance_budget: 4000,
    };

    pub fn new(max_variance_budget: u64) -> Result<Self> {
        if max_variance_budget == 0 {
            return Err(Error::BudgetTooSmall {
                budget: 0,
                minimum: 1,
            });
        }
        Ok(Self {
            max_variance_budget,
        })
    }
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self::PRODUCTION
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BackendStats {
    pub pbs_count: u64,
    pub refresh_count: u64,
    pub linear_op_count: u64,
}

impl BackendStats {
    pub fn since(&self, earlier: &BackendStats) -> BackendStats {
        BackendStats {
            pbs_count: self.pbs_count - earlier.pbs_count,
            refresh_count: self.refresh_count - earlier.refresh_count,
            linear_op_count: self.linear_op_count - earlier.linear_op_count,
        }
    }
}

/// Thread-safe counters behind [`BackendStats`].
#[derive(Debug, Default)]
pub struct StatsCounters {
    pbs: AtomicU64,
    refresh: AtomicU64,
    linear: AtomicU64,
}

impl StatsCounters {
    pub fn snapshot(&self) -> BackendStats {
        BackendStats {
            pbs_count: self.pbs.load(Ordering::Relaxed),
            refresh_count: self.refresh.load(Ordering::Relaxed),
            linear_op_count: self.linear.load(Ordering::Relaxed),
        }
    }

    fn bump_pbs(&self) {
        self.pbs.fetch_add(1, Ordering::Relaxed);
    }

    fn bump_refresh(&self) {
        self.refresh.fetch_add(1, Ordering::Relaxed);
    }

    fn bump_linear(&self) {
        self.linear.fetch_add(1, Ordering::Relaxed);
    }
}

/// Operations an FHE scheme with programmable bootstrapping must provide.
///
/// Plaintexts live in `Z_32`; the top bit is the padding bit.
pub trait Backend: Sync {
    type Ciphertext: Clone + Send + Sync + fmt::Debug;

    fn encrypt(&self, v: u8) -> Result<Self::Ciphertext>;
    /// Noiseless encryption of a public constant.
    fn trivial(&self, v: u8) -> Result<Self::Ciphertext>;
    fn decrypt(&self, ct: &Self::Ciphertext) -> u8;

    fn add(&self, x: &Self::Ciphertext, y: &Self::Ciphertext) -> Self::Ciphertext;
    fn sub(&self, x: &Self::Ciphertext, y: &Self::Ciphertext) -> Self::Ciphertext;
    fn scalar_mul(&self, x: &Self::Ciphertext, k: i64) -> Self::Ciphertext;
    fn scalar_add(&self, x: &Self::Ciphertext, k: i64) -> Self::Ciphertext;

    fn pbs(&self, x: &Self::Ciphertext, lut: &Lut16) -> Result<Self::Ciphertext>;
    /// Identity bootstrap; the input must encode a value in `[0, 16)`.
    fn refresh(&self, x: &Self::Ciphertext) -> Result<Self::Ciphertext>;

    /// Noise variance of `Σ k_i · x_i`, in fresh-bootstrap units.
    fn combination_variance(&self, terms: &[(&Self::Ciphertext, i64)]) -> u64;
    fn variance(&self, x: &Self::Ciphertext) -> u64 {
        self.combination_variance(&[(x, 1)])
    }
    fn noise_params(&self) -> NoiseParams;
    fn stats(&self) -> BackendStats;
}

/// The simulated TFHE backend.
#[derive(Debug)]
pub struct SimBackend {
    params: NoiseParams,
    next_source: AtomicU64,
    counters: StatsCounters,
    empty: NoiseLedger,
}

impl SimBackend {
    pub fn new(params: NoiseParams) -> Self {
        Self {
            params,
            next_source: AtomicU64::new(0),
            counters: StatsCounters::default(),
            empty: NoiseLedger::empty(),
        }
    }

    fn mint(&self) -> SourceId {
        SourceId(self.next_source.fetch_add(1, Ordering::Relaxed))
    }

    /// Continue minting ids after `id`, so that ciphertexts loaded from storage
    /// never share a source with new ones.
    pub fn reserve_sources_through(&self, id: SourceId) {
        self.next_source.fetch_max(id.0 + 1, Ordering::Relaxed);
    }

    fn bootstrap(&self, x: &SimCiphertext, lut: &Lut16) -> Result<SimCiphertext> {
        let variance = x.variance();
        if variance > self.params.max_variance_budget {
            return Err(Error::NoiseBudgetExceeded {
                variance,
                budget: self.params.max_variance_budget,
            });
        }
        self.counters.bump_pbs();
        Ok(SimCiphertext {
            value: lut.eval(x.value),
            ledger: NoiseLedger::fresh(self.mint()),
        })
    }
}

impl Default for SimBackend {
    fn default() -> Self {
        Self::new(NoiseParams::default())
    }
}

impl Backend for SimBackend {
    type Ciphertext = SimCiphertext;

    fn encrypt(&self, v: u8) -> Result<SimCiphertext> {
        Ok(SimCiphertext {
            value: check_plaintext(v)?,
            ledger: NoiseLedger::fresh(self.mint()),
        })
    }

    fn trivial(&self, v: u8) -> Result<SimCiphertext> {
        Ok(SimCiphertext {
            value: check_plaintext(v)?,
            ledger: NoiseLedger::empty(),
        })
    }

    fn decrypt(&self, ct: &SimCiphertext) -> u8 {
        ct.value
    }

    fn add(&self, x: &SimCiphertext, y: &SimCiphertext) -> SimCiphertext {
        self.counters.bump_linear();
        SimCiphertext {
            value: reduce(x.value as i64 + y.value as i64),
            ledger: NoiseLedger::linear_combination(&[(&x.ledger, 1), (&y.ledger, 1)]),
        }
    }

    fn sub(&self, x: &SimCiphertext, y: &SimCiphertext) -> SimCiphertext {
        self.counters.bump_linear();
        SimCiphertext {
            value: reduce(x.value as i64 - y.value as i64),
            ledger: NoiseLedger::linear_combination(&[(&x.ledger, 1), (&y.ledger, -1)]),
        }
    }

    fn scalar_mul(&self, x: &SimCiphertext, k: i64) -> SimCiphertext {
        self.counters.bump_linear();
        SimCiphertext {
            value: reduce(x.value as i64 * k),
            ledger: x.ledger.scaled(k),
        }
    }

    fn scalar_add(&self, x: &SimCiphertext, k: i64) -> SimCiphertext {
        self.counters.bump_linear();
        SimCiphertext {
            value: reduce(x.value as i64 + k),
            ledger: x.ledger.clone(),
        }
    }

    fn pbs(&self, x: &SimCiphertext, lut: &Lut16) -> Result<SimCiphertext> {
        self.bootstrap(x, lut)
    }

    fn refresh(&self, x: &SimCiphertext) -> Result<SimCiphertext> {
        if x.value as usize >= LUT_SIZE {
            return Err(Error::ValueOutsideLutHalf { value: x.value });
        }
        let out = self.bootstrap(x, &Lut16::identity())?;
        self.counters.bump_refresh();
        Ok(out)
    }

    fn combination_variance(&self, terms: &[(&SimCiphertext, i64)]) -> u64 {
        let mut ledgers = [(&self.empty, 0i64); 4];
        if terms.len() > ledgers.len() {
            let all: Vec<_> = terms.iter().map(|(c, k)| (&c.ledger, *k)).collect();
            return NoiseLedger::combination_variance(&all);
        }
        for (slot, (c, k)) in ledgers.iter_mut().zip(terms) {
            *slot = (&c.ledger, *k);
        }
        NoiseLedger::combination_variance(&ledgers[..terms.len()])
    }

    fn noise_params(&self) -> NoiseParams {
        self.params
    }

    fn stats(&self) -> BackendStats {
        self.counters.snapshot()
    }
}
