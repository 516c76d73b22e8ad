//! Encrypted character equality circuits and their bootstrap costs.
//!
//! * [`eq4`]: subtract two 4-bit symbols and look the difference up in a
//!   table that is non-zero only at 0. The difference spans 31 values, which
//!   the negacyclic table covers because every entry but the first is 0.
//! * [`eq_folded`]: compare the first symbol with [`eq4`], then fold every
//!   further 3-bit symbol into `2 * (x - y) + (1 - eq)` and look that up
//!   again. ASCII is the two-symbol case ([`eq_ascii`]).
//! * [`eq_chunked_merge`]: the chunk-then-merge baseline: one sub-equality
//!   per chunk, then sums of up to 15 sub-results checked against their
//!   maximum.

use crate::backend::{Backend, Lut16, LUT_SIZE};
use crate::error::{Error, Result};

/// Output value of an equality circuit when the inputs match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EqScale {
    One = 1,
    Nine = 9,
}

impl EqScale {
    pub fn value(self) -> u8 {
        self as u8
    }
}

/// Largest number of sub-results one merge lookup can sum.
pub const MERGE_GROUP: usize = LUT_SIZE - 1;

pub fn eq_lut(scale: EqScale) -> Lut16 {
    let s = scale.value() as i64;
    Lut16::from_fn(|x| if x == 0 { s } else { 0 })
}

/// Table that is `scale` exactly at `n_sub` and 0 elsewhere.
pub fn merge_lut(n_sub: usize, scale: EqScale) -> Result<Lut16> {
    if n_sub == 0 || n_sub > MERGE_GROUP {
        return Err(Error::InvalidCircuit(format!(
            "merge group of {n_sub} sub-results does not fit one lookup"
        )));
    }
    let s = scale.value() as i64;
    Ok(Lut16::from_fn(|x| if x as usize == n_sub { s } else { 0 }))
}

/// Sub-equality table for 2-bit chunks packed as `x + 4 * y`.
pub fn packed_two_bit_lut() -> Lut16 {
    Lut16::from_fn(|k| i64::from(k % 4 == k / 4))
}

/// One-bootstrap equality of two symbols in `[0, 16)`.
pub fn eq4<B: Backend>(
    be: &B,
    x: &B::Ciphertext,
    y: &B::Ciphertext,
    scale: EqScale,
) -> Result<B::Ciphertext> {
    let diff = be.sub(x, y);
    be.pbs(&diff, &eq_lut(scale))
}

/// Chained equality over a `[<=4, <=3, <=3, ...]` symbol layout.
///
/// Costs one bootstrap per symbol.
pub fn eq_folded<B: Backend>(
    be: &B,
    x: &[B::Ciphertext],
    y: &[B::Ciphertext],
    scale: EqScale,
) -> Result<B::Ciphertext> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::InvalidCircuit(format!(
            "symbol counts differ or are zero: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let last = x.len() - 1;
    let first_scale = if last == 0 { scale } else { EqScale::One };
    let mut eq = eq4(be, &x[0], &y[0], first_scale)?;
    for k in 1..x.len() {
        // 2 * (x_k - y_k) + (1 - eq) lies in [-14, 15] for 3-bit symbols
        let doubled = be.scalar_mul(&be.sub(&x[k], &y[k]), 2);
        let not_eq = be.scalar_add(&be.scalar_mul(&eq, -1), 1);
        let z = be.add(&doubled, &not_eq);
        let s = if k == last { scale } else { EqScale::One };
        eq = be.pbs(&z, &eq_lut(s))?;
    }
    Ok(eq)
}

/// Two-bootstrap equality of 7-bit characters stored as `[4-bit, 3-bit]`.
pub fn eq_ascii<B: Backend>(
    be: &B,
    x: &[B::Ciphertext],
    y: &[B::Ciphertext],
    scale: EqScale,
) -> Result<B::Ciphertext> {
    if x.len() != 2 || y.len() != 2 {
        return Err(Error::InvalidCircuit(
            "ASCII equality needs exactly two symbols per character".into(),
        ));
    }
    eq_folded(be, x, y, scale)
}

/// Chunk-wise sub-equalities merged by summing and checking the maximum.
///
/// `chunk_bits == 2` packs each pair as `x + 4 * y`; 3- and 4-bit chunks use
/// the subtraction check. More than 15 chunks are merged over several levels.
pub fn eq_chunked_merge<B: Backend>(
    be: &B,
    x: &[B::Ciphertext],
    y: &[B::Ciphertext],
    chunk_bits: u8,
    scale: EqScale,
) -> Result<B::Ciphertext> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::InvalidCircuit(format!(
            "chunk counts differ or are zero: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let subs = x
        .iter()
        .zip(y)
        .map(|(xc, yc)| match chunk_bits {
            2 => {
                let packed = be.add(xc, &be.scalar_mul(yc, 4));
                be.pbs(&packed, &packed_two_bit_lut())
            }
            3 | 4 => eq4(be, xc, yc, EqScale::One),
            t => Err(Error::InvalidCircuit(format!("unsupported chunk size {t}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    merge_tree(be, subs, scale)
}

fn merge_tree<B: Backend>(
    be: &B,
    mut items: Vec<B::Ciphertext>,
    scale: EqScale,
) -> Result<B::Ciphertext> {
    loop {
        let top = items.len() <= MERGE_GROUP;
        let level_scale = if top { scale } else { EqScale::One };
        let next = items
            .chunks(MERGE_GROUP)
            .map(|group| {
                let sum = group[1..]
                    .iter()
                    .fold(group[0].clone(), |acc, c| be.add(&acc, c));
                be.pbs(&sum, &merge_lut(group.len(), level_scale)?)
            })
            .collect::<Result<Vec<_>>>()?;
        if top {
            return Ok(next.into_iter().next().expect("one group at the top"));
        }
        items = next;
    }
}

/// Merge bootstraps needed to fold `n_sub` sub-results into one.
pub fn merge_pbs_count(n_sub: u32) -> u32 {
    let mut remaining = n_sub.max(1);
    let mut total = 0;
    loop {
        let groups = remaining.div_ceil(MERGE_GROUP as u32);
        total += groups;
        if groups == 1 {
            return total;
        }
        remaining = groups;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EqTechnique {
    /// 2-bit chunks packed as `x + 4y`, then merged.
    Standard2Bit,
    /// 4-bit subtraction check with chained 3-bit folds.
    Ours4Bit,
    /// 4-bit subtraction sub-checks, then merged.
    Combined,
}

/// Bootstraps needed to compare two `bit_width`-bit characters.
pub fn eq_cost(technique: EqTechnique, bit_width: u32) -> u32 {
    assert!(bit_width >= 1, "bit width must be positive");
    match technique {
        EqTechnique::Ours4Bit => 1 + bit_width.saturating_sub(4).div_ceil(3),
        EqTechnique::Standard2Bit => {
            let subs = bit_width.div_ceil(2);
            subs + merge_pbs_count(subs)
        }
        EqTechnique::Combined => {
            let subs = bit_width.div_ceil(4);
            subs + merge_pbs_count(subs)
        }
    }
}

/// Symbol widths for the chained fold over a `bit_width`-bit character.
pub fn folded_layout(bit_width: u32) -> Vec<u8> {
    let mut widths = vec![bit_width.min(4) as u8];
    let mut rest = bit_width.saturating_sub(4);
    while rest > 0 {
        let w = rest.min(3);
        widths.push(w as u8);
        rest -= w;
    }
    widths
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::SimBackend;
    use crate::encoding::{chunk_code, AlphabetSpec};

    fn enc_all(be: &SimBackend, syms: &[u8]) -> Vec<crate::backend::SimCiphertext> {
        syms.iter().map(|&s| be.encrypt(s).unwrap()).collect()
    }

    #[test]
    fn eq_lut_covers_all_differences() {
        for scale in [EqScale::One, EqScale::Nine] {
            let lut = eq_lut(scale);
            for x in 0..16i64 {
                for y in 0..16i64 {
                    let d = (x - y).rem_euclid(32) as u8;
                    assert_ne!(d, 16);
                    let want = if x == y { scale.value() } else { 0 };
                    assert_eq!(lut.eval(d), want);
                }
            }
        }
    }

    #[test]
    fn eq4_examples() {
        let be = SimBackend::default();
        let (a, b) = (be.encrypt(13).unwrap(), be.encrypt(13).unwrap());
        assert_eq!(be.decrypt(&eq4(&be, &a, &b, EqScale::One).unwrap()), 1);
        let (a, b) = (be.encrypt(0).unwrap(), be.encrypt(15).unwrap());
        assert_eq!(be.decrypt(&eq4(&be, &a, &b, EqScale::Nine).unwrap()), 0);
        assert_eq!(be.stats().pbs_count, 2);
    }

    #[test]
    fn eq_ascii_examples() {
        let be = SimBackend::default();
        let spec = AlphabetSpec::ascii7();
        let enc = |c| enc_all(&be, &spec.encode_char(c).unwrap().symbols);
        let before = be.stats().pbs_count;
        let r = eq_ascii(&be, &enc('A'), &enc('A'), EqScale::Nine).unwrap();
        assert_eq!(be.decrypt(&r), 9);
        assert_eq!(be.stats().pbs_count - before, 2);
        assert_eq!(
            be.decrypt(&eq_ascii(&be, &enc('A'), &enc('B'), EqScale::Nine).unwrap()),
            0
        );
        assert_eq!(
            be.decrypt(&eq_ascii(&be, &enc('A'), &enc('a'), EqScale::One).unwrap()),
            0
        );
        assert!(eq_ascii(&be, &enc('A')[..1], &enc('A')[..1], EqScale::One).is_err());
    }

    #[test]
    fn chunked_merge_counts() {
        let be = SimBackend::default();
        for (t, pbs) in [(2u8, 5u64), (4, 3)] {
            let xs = enc_all(&be, &chunk_code('q' as u32, 7, t).unwrap());
            let ys = enc_all(&be, &chunk_code('q' as u32, 7, t).unwrap());
            let before = be.stats().pbs_count;
            let r = eq_chunked_merge(&be, &xs, &ys, t, EqScale::Nine).unwrap();
            assert_eq!(be.decrypt(&r), 9);
            assert_eq!(be.stats().pbs_count - before, pbs);
        }
    }

    #[test]
    fn chunked_merge_single_difference() {
        let be = SimBackend::default();
        for t in [2u8, 3, 4] {
            let base = chunk_code(0b1011001, 7, t).unwrap();
            let xs = enc_all(&be, &base);
            assert_eq!(
                be.decrypt(&eq_chunked_merge(&be, &xs, &xs.clone(), t, EqScale::One).unwrap()),
                1
            );
            for pos in 0..base.len() {
                for alt in 0..(1u8 << t) {
                    if alt == base[pos] {
                        continue;
                    }
                    let mut other = base.clone();
                    other[pos] = alt;
                    let ys = enc_all(&be, &other);
                    let r = eq_chunked_merge(&be, &xs, &ys, t, EqScale::One).unwrap();
                    assert_eq!(be.decrypt(&r), 0, "t={t} pos={pos} alt={alt}");
                }
            }
        }
    }

    #[test]
    fn multi_level_merge() {
        // 40 two-bit chunks: 40 subs, then 3 groups, then 1 more merge
        let be = SimBackend::default();
        let xs = enc_all(&be, &[1; 40]);
        let mut ys_syms = vec![1u8; 40];
        let before = be.stats().pbs_count;
        let r = eq_chunked_merge(&be, &xs, &enc_all(&be, &ys_syms), 2, EqScale::Nine).unwrap();
        assert_eq!(be.decrypt(&r), 9);
        assert_eq!(be.stats().pbs_count - before, 40 + 4);
        assert_eq!(merge_pbs_count(40), 4);
        ys_syms[37] = 2;
        let r = eq_chunked_merge(&be, &xs, &enc_all(&be, &ys_syms), 2, EqScale::Nine).unwrap();
        assert_eq!(be.decrypt(&r), 0);
    }

    #[test]
    fn folded_wide_characters() {
        let be = SimBackend::default();
        for bits in [5u32, 10, 13, 16] {
            let layout = folded_layout(bits);
            let split = |code: u32| {
                let mut out = Vec::new();
                let mut c = code;
                for &w in &layout {
                    out.push((c & ((1 << w) - 1)) as u8);
                    c >>= w;
                }
                out
            };
            let code = (1u32 << bits) - 3;
            let xs = enc_all(&be, &split(code));
            let before = be.stats().pbs_count;
            let r = eq_folded(&be, &xs, &xs.clone(), EqScale::Nine).unwrap();
            assert_eq!(be.decrypt(&r), 9);
            assert_eq!(
                (be.stats().pbs_count - before) as u32,
                eq_cost(EqTechnique::Ours4Bit, bits)
            );
            for flip in 0..bits {
                let ys = enc_all(&be, &split(code ^ (1 << flip)));
                assert_eq!(
                    be.decrypt(&eq_folded(&be, &xs, &ys, EqScale::Nine).unwrap()),
                    0
                );
            }
        }
    }

    #[test]
    fn cost_model_points() {
        assert_eq!(eq_cost(EqTechnique::Ours4Bit, 7), 2);
        assert_eq!(eq_cost(EqTechnique::Standard2Bit, 7), 5);
        assert_eq!(eq_cost(EqTechnique::Combined, 7), 3);
        for b in 5..=16 {
            let ours = eq_cost(EqTechnique::Ours4Bit, b);
            assert!(ours <= eq_cost(EqTechnique::Standard2Bit, b));
            assert!(ours <= eq_cost(EqTechnique::Combined, b));
        }
        // combined wins eventually
        assert!(eq_cost(EqTechnique::Combined, 32) < eq_cost(EqTechnique::Ours4Bit, 32));
    }

    #[test]
    fn merge_lut_bounds() {
        assert!(merge_lut(0, EqScale::One).is_err());
        assert!(merge_lut(16, EqScale::One).is_err());
        let lut = merge_lut(4, EqScale::Nine).unwrap();
        assert_eq!((lut.eval(4), lut.eval(3), lut.eval(0)), (9, 0, 0));
    }
}
