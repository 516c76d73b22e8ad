//! End-to-end encrypted distance with on-line character equality.

use crate::backend::Backend;
use crate::encoding::{AlphabetSpec, EncryptedString};
use crate::equality::{eq4, eq_folded, EqScale};
use crate::error::{Error, Result};
use crate::kernel::{self, BandMode, DistanceRun, Eq9Source, KernelConfig};

/// Computes `eq9` for each cell from the two encrypted strings.
pub struct OnlineEq<'a, C> {
    a: &'a EncryptedString<C>,
    b: &'a EncryptedString<C>,
}

impl<'a, C> OnlineEq<'a, C> {
    pub fn new(a: &'a EncryptedString<C>, b: &'a EncryptedString<C>) -> Self {
        Self { a, b }
    }
}

impl<B: Backend> Eq9Source<B> for OnlineEq<'_, B::Ciphertext> {
    fn eq9(&self, be: &B, i: usize, j: usize) -> Result<B::Ciphertext> {
        let (x, y) = (self.a.char_at(i - 1), self.b.char_at(j - 1));
        match (x.len(), y.len()) {
            (1, 1) => eq4(be, &x[0], &y[0], EqScale::Nine),
            (p, q) if p == q => eq_folded(be, x, y, EqScale::Nine),
            _ => Err(Error::InvalidCircuit(
                "strings use different layouts".into(),
            )),
        }
    }
}

/// Bootstraps the on-line equality spends per visited cell.
pub fn equality_pbs_per_cell(spec: &AlphabetSpec) -> u64 {
    spec.symbol_count() as u64
}

pub fn encrypted_distance<B: Backend>(
    be: &B,
    a: &EncryptedString<B::Ciphertext>,
    b: &EncryptedString<B::Ciphertext>,
    mode: BandMode,
    config: &KernelConfig,
) -> Result<DistanceRun<B::Ciphertext>> {
    kernel::distance(be, &OnlineEq::new(a, b), a.len(), b.len(), mode, config)
}
