//! Equality tables for an encrypted string matched against plaintext queries.
//!
//! Each entry holds the encrypted `9·[x_i = c]` for one alphabet character
//! `c` and one encrypted position `i`. Queries then read their `eq9` values
//! from the table without bootstrapping.

use std::collections::BTreeMap;

use crate::backend::{Backend, NoiseLedger, SimBackend, SimCiphertext, SourceId};
use crate::encoding::{AlphabetName, AlphabetSpec, EncryptedString};
use crate::equality::{eq4, eq_folded, EqScale};
use crate::error::{Error, Result};
use crate::kernel::{self, BandMode, DistanceRun, Eq9Source, KernelConfig};
use crate::par::{self, Parallelism};

#[derive(Debug, Clone)]
pub struct EqTable<C> {
    spec: AlphabetSpec,
    subset: Vec<char>,
    m: usize,
    entries: Vec<C>,
}

impl<C: Clone> EqTable<C> {
    pub fn spec(&self) -> &AlphabetSpec {
        &self.spec
    }

    /// Characters with a row, sorted.
    pub fn subset(&self) -> &[char] {
        &self.subset
    }

    /// Length of the encrypted string.
    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    fn row(&self, c: char) -> Result<usize> {
        self.subset
            .binary_search(&c)
            .map_err(|_| Error::CharNotInSubset(c))
    }

    /// Encrypted `9·eq` of the character at 1-based `position` and `c`.
    pub fn lookup(&self, c: char, position: usize) -> Result<&C> {
        let row = self.row(c)?;
        if position == 0 || position > self.m {
            return Err(Error::PositionOutOfRange {
                position,
                len: self.m,
            });
        }
        Ok(&self.entries[row * self.m + position - 1])
    }
}

/// Bootstraps needed per table entry for an alphabet.
pub fn pbs_per_entry(spec: &AlphabetSpec) -> usize {
    spec.symbol_count()
}

/// Builds the table for `subset` (the whole alphabet when `None`).
pub fn build_eq_table<B: Backend>(
    be: &B,
    xs: &EncryptedString<B::Ciphertext>,
    spec: &AlphabetSpec,
    subset: Option<&[char]>,
    parallelism: Parallelism,
) -> Result<EqTable<B::Ciphertext>> {
    let mut chars: Vec<char> = match subset {
        Some(s) => s.to_vec(),
        None => spec.chars().collect(),
    };
    chars.sort_unstable();
    chars.dedup();
    // plaintext symbols become trivial ciphertexts once per character
    let plain = chars
        .iter()
        .map(|&c| {
            spec.encode_char(c)?
                .symbols
                .into_iter()
                .map(|s| be.trivial(s))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let m = xs.len();
    let cells: Vec<(usize, usize)> = (0..chars.len())
        .flat_map(|r| (0..m).map(move |i| (r, i)))
        .collect();
    let entries = par::try_map_slice(parallelism, &cells, |&(r, i)| {
        let x = xs.char_at(i);
        let y = &plain[r];
        if x.len() != y.len() {
            return Err(Error::InvalidCircuit(
                "encrypted string does not match the alphabet layout".into(),
            ));
        }
        if x.len() == 1 {
            eq4(be, &x[0], &y[0], EqScale::Nine)
        } else {
            eq_folded(be, x, y, EqScale::Nine)
        }
    })?;
    Ok(EqTable {
        spec: spec.clone(),
        subset: chars,
        m,
        entries,
    })
}

/// Table lookups for a plaintext string, in the `eq9` shape the kernel reads.
pub struct TableLookup<'a, C> {
    table: &'a EqTable<C>,
    plain: Vec<char>,
}

impl<'a, C: Clone> TableLookup<'a, C> {
    pub fn new(table: &'a EqTable<C>, plain: &str) -> Result<Self> {
        let plain: Vec<char> = plain.chars().collect();
        for &c in &plain {
            table.row(c)?;
        }
        Ok(Self { table, plain })
    }

    pub fn plain_len(&self) -> usize {
        self.plain.len()
    }
}

impl<B: Backend> Eq9Source<B> for TableLookup<'_, B::Ciphertext> {
    fn eq9(&self, _be: &B, i: usize, j: usize) -> Result<B::Ciphertext> {
        self.table.lookup(self.plain[j - 1], i).cloned()
    }
}

/// Distance between the table's encrypted string (rows) and `plain` (columns).
pub fn distance_preprocessed<B: Backend>(
    be: &B,
    table: &EqTable<B::Ciphertext>,
    plain: &str,
    mode: BandMode,
    config: &KernelConfig,
) -> Result<DistanceRun<B::Ciphertext>> {
    let lookup = TableLookup::new(table, plain)?;
    kernel::distance(be, &lookup, table.len(), lookup.plain_len(), mode, config)
}

const MAGIC: &[u8; 4] = b"LVEQ";
const VERSION: u16 = 1;

impl EqTable<SimCiphertext> {
    /// Serializes the table; see the README for the layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let name = self.spec.name().to_string();
        put_u32(&mut out, name.len() as u32);
        out.extend_from_slice(name.as_bytes());
        out.push(self.spec.widths().len() as u8);
        out.extend_from_slice(self.spec.widths());
        let codes: Vec<(char, u32)> = self.spec.codes().collect();
        put_u32(&mut out, codes.len() as u32);
        for (c, code) in codes {
            put_u32(&mut out, c as u32);
            put_u32(&mut out, code);
        }
        put_u32(&mut out, self.subset.len() as u32);
        for &c in &self.subset {
            put_u32(&mut out, c as u32);
        }
        put_u32(&mut out, self.m as u32);
        for ct in &self.entries {
            out.push(ct.raw_value());
            let terms = ct.ledger().terms();
            put_u32(&mut out, terms.len() as u32);
            for &(id, coef) in terms {
                out.extend_from_slice(&id.0.to_le_bytes());
                out.extend_from_slice(&coef.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("not an equality table".into()));
        }
        let version = u16::from_le_bytes(r.take(2)?.try_into().expect("2 bytes"));
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported table version {version}"
            )));
        }
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| Error::Format("alphabet name is not UTF-8".into()))?;
        let width_count = r.take(1)?[0] as usize;
        let widths = r.take(width_count)?.to_vec();
        let code_count = r.u32()? as usize;
        let mut codes = BTreeMap::new();
        for _ in 0..code_count {
            let c = r.char()?;
            codes.insert(c, r.u32()?);
        }
        let spec = match AlphabetSpec::by_name(&name) {
            Ok(builtin) => builtin,
            Err(_) => AlphabetSpec::new(AlphabetName::Custom(name), widths.clone(), codes.clone())?,
        };
        if spec.widths() != widths.as_slice() || spec.codes().collect::<BTreeMap<_, _>>() != codes {
            return Err(Error::Format(
                "alphabet does not match its built-in definition".into(),
            ));
        }
        let subset_len = r.u32()? as usize;
        let mut subset = Vec::with_capacity(subset_len.min(1 << 16));
        for _ in 0..subset_len {
            let c = r.char()?;
            spec.code(c)?;
            subset.push(c);
        }
        if subset.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Format("subset must be sorted and unique".into()));
        }
        let m = r.u32()? as usize;
        let count = subset_len
            .checked_mul(m)
            .ok_or_else(|| Error::Format("table too large".into()))?;
        let mut entries = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let value = r.take(1)?[0];
            let terms = r.u32()? as usize;
            let mut ledger = Vec::with_capacity(terms.min(1 << 16));
            for _ in 0..terms {
                let id = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
                let coef = i64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
                ledger.push((SourceId(id), coef));
            }
            entries.push(SimCiphertext::from_parts(
                value,
                NoiseLedger::from_terms(ledger),
            )?);
        }
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after table".into()));
        }
        Ok(Self {
            spec,
            subset,
            m,
            entries,
        })
    }

    /// Makes `be` mint source ids above every id stored in the table.
    pub fn register_sources(&self, be: &SimBackend) {
        if let Some(max) = self
            .entries
            .iter()
            .flat_map(|c| c.ledger().terms().iter().map(|t| t.0))
            .max()
        {
            be.reserve_sources_through(max);
        }
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("truncated table".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn char(&mut self) -> Result<char> {
        let v = self.u32()?;
        char::from_u32(v).ok_or_else(|| Error::Format(format!("invalid character {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::NoiseParams;
    use crate::encoding::encrypt_string;
    use crate::kernel::decrypt_score;

    #[test]
    fn abbey_table() {
        let be = SimBackend::default();
        let spec = AlphabetSpec::lower26();
        let xs = encrypt_string("abbey", &spec, &be).unwrap();
        let table = build_eq_table(&be, &xs, &spec, None, Parallelism::Parallel).unwrap();
        assert_eq!((table.subset().len(), table.len()), (26, 5));
        assert_eq!(be.stats().pbs_count, 2 * 26 * 5);
        let bold = [('a', 1), ('b', 2), ('b', 3), ('e', 4), ('y', 5)];
        for c in 'a'..='z' {
            for i in 1..=5 {
                let want = if bold.contains(&(c, i)) { 9 } else { 0 };
                assert_eq!(be.decrypt(table.lookup(c, i).unwrap()), want, "{c}@{i}");
            }
        }
        let before = be.stats();
        for _ in 0..10 {
            table.lookup('b', 2).unwrap();
        }
        assert_eq!(be.stats(), before);
        assert_eq!(
            table.lookup('B', 1).unwrap_err(),
            Error::CharNotInSubset('B')
        );
        assert_eq!(
            table.lookup('a', 6).unwrap_err(),
            Error::PositionOutOfRange {
                position: 6,
                len: 5
            }
        );
        assert!(table.lookup('a', 0).is_err());
    }

    #[test]
    fn dna_table_costs_one_pbs_per_entry() {
        let be = SimBackend::default();
        let spec = AlphabetSpec::dna4();
        let s: String = "ACGT".repeat(52) + "AC";
        let xs = encrypt_string(&s, &spec, &be).unwrap();
        let table = build_eq_table(&be, &xs, &spec, None, Parallelism::Sequential).unwrap();
        assert_eq!(table.entry_count(), 4 * 210);
        assert_eq!(be.stats().pbs_count, 840);
        assert_eq!(pbs_per_entry(&spec), 1);
    }

    #[test]
    fn empty_string_gives_empty_table() {
        let be = SimBackend::default();
        let spec = AlphabetSpec::lower26();
        let xs = encrypt_string("", &spec, &be).unwrap();
        let table = build_eq_table(&be, &xs, &spec, None, Parallelism::Sequential).unwrap();
        assert!(table.is_empty());
        assert_eq!(table.entry_count(), 0);
        let run = distance_preprocessed(
            &be,
            &table,
            "abc",
            BandMode::Exact,
            &KernelConfig::default(),
        )
        .unwrap();
        assert_eq!(decrypt_score(&be, &run.score), 3);
    }

    #[test]
    fn subset_queries() {
        let be = SimBackend::default();
        let spec = AlphabetSpec::ascii7();
        let xs = encrypt_string("Anna", &spec, &be).unwrap();
        let table = build_eq_table(
            &be,
            &xs,
            &spec,
            Some(&['n', 'A', 'a', 'n']),
            Parallelism::Sequential,
        )
        .unwrap();
        assert_eq!(table.subset(), &['A', 'a', 'n']);
        assert_eq!(be.stats().pbs_count, 2 * 3 * 4);
        let cfg = KernelConfig::default();
        let run = distance_preprocessed(&be, &table, "Ana", BandMode::Exact, &cfg).unwrap();
        assert_eq!(decrypt_score(&be, &run.score), 1);
        assert_eq!(
            distance_preprocessed(&be, &table, "Bob", BandMode::Exact, &cfg).unwrap_err(),
            Error::CharNotInSubset('B')
        );
    }

    #[test]
    fn serialization_roundtrip() {
        let be = SimBackend::new(NoiseParams::PRODUCTION);
        let spec = AlphabetSpec::parse("name=tiny\nwidths=2\nchars=xyz\n").unwrap();
        let xs = encrypt_string("xzzy", &spec, &be).unwrap();
        let table = build_eq_table(&be, &xs, &spec, None, Parallelism::Sequential).unwrap();
        let bytes = table.to_bytes();
        let back = EqTable::from_bytes(&bytes).unwrap();
        assert_eq!(back.spec(), table.spec());
        assert_eq!(back.subset(), table.subset());
        assert_eq!(back.entries, table.entries);

        let fresh = SimBackend::default();
        back.register_sources(&fresh);
        let next = fresh.encrypt(0).unwrap();
        let max_id = table
            .entries
            .iter()
            .map(|c| c.ledger().terms()[0].0)
            .max()
            .unwrap();
        assert!(next.ledger().terms()[0].0 > max_id);

        assert!(EqTable::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(EqTable::from_bytes(&bad).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(EqTable::from_bytes(&extra).is_err());
    }

    #[test]
    fn builtin_alphabet_roundtrip() {
        let be = SimBackend::default();
        let spec = AlphabetSpec::ascii7();
        let xs = encrypt_string("hi\n", &spec, &be).unwrap();
        let table =
            build_eq_table(&be, &xs, &spec, Some(&['h', '\n']), Parallelism::Sequential).unwrap();
        let back = EqTable::from_bytes(&table.to_bytes()).unwrap();
        assert_eq!(back.spec().name(), &AlphabetName::Ascii7);
        assert_eq!(be.decrypt(back.lookup('\n', 3).unwrap()), 9);
    }
}
