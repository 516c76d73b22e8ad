//! Encrypted edit distance over a simulated bootstrapping backend.

pub mod backend;
pub mod encoding;
pub mod equality;
pub mod error;
pub mod kernel;
pub mod oracle;
pub mod par;
pub mod pipeline;
pub mod preprocess;

pub use backend::{Backend, Lut16, NoiseLedger, NoiseParams, SimBackend, SimCiphertext};
pub use encoding::{encrypt_string, AlphabetSpec, EncryptedString};
pub use error::{Error, Result};
pub use kernel::{decrypt_score, BandMode, DistanceRun, KernelConfig, KeyEncoding};
pub use par::Parallelism;
pub use pipeline::encrypted_distance;
pub use preprocess::{build_eq_table, distance_preprocessed, EqTable};
