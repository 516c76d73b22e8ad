//! Character alphabets and their split into per-ciphertext symbols.
//!
//! Symbols are little-endian: symbol 0 holds the lowest bits. The first
//! symbol may be up to 4 bits wide and every later symbol up to 3 bits, which
//! is what the chained equality fold needs to stay inside the 31-value
//! lookup window.

use std::collections::BTreeMap;
use std::fmt;

use crate::backend::Backend;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlphabetName {
    Ascii7,
    Lower26,
    Dna4,
    Custom(String),
}

impl fmt::Display for AlphabetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphabetName::Ascii7 => f.write_str("ascii7"),
            AlphabetName::Lower26 => f.write_str("lower26"),
            AlphabetName::Dna4 => f.write_str("dna4"),
            AlphabetName::Custom(name) => f.write_str(name),
        }
    }
}

/// An alphabet: a character-to-code table plus the symbol layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlphabetSpec {
    name: AlphabetName,
    widths: Vec<u8>,
    codes: BTreeMap<char, u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodedChar {
    pub symbols: Vec<u8>,
}

impl AlphabetSpec {
    pub fn new(name: AlphabetName, widths: Vec<u8>, codes: BTreeMap<char, u32>) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::InvalidAlphabet("symbol layout is empty".into()));
        }
        if !(1..=4).contains(&widths[0]) || widths[1..].iter().any(|w| !(1..=3).contains(w)) {
            return Err(Error::InvalidAlphabet(format!(
                "layout {widths:?} needs a first symbol of 1-4 bits and later symbols of 1-3 bits"
            )));
        }
        let total: u32 = widths.iter().map(|&w| w as u32).sum();
        if total > 31 {
            return Err(Error::InvalidAlphabet("layout wider than 31 bits".into()));
        }
        if codes.is_empty() {
            return Err(Error::InvalidAlphabet("no characters".into()));
        }
        let mut seen = BTreeMap::new();
        for (&c, &code) in &codes {
            if code >> total != 0 {
                return Err(Error::InvalidAlphabet(format!(
                    "code {code} of {c:?} does not fit in {total} bits"
                )));
            }
            if let Some(other) = seen.insert(code, c) {
                return Err(Error::InvalidAlphabet(format!(
                    "{other:?} and {c:?} share code {code}"
                )));
            }
        }
        Ok(Self {
            name,
            widths,
            codes,
        })
    }

    /// 7-bit ASCII split into a 4-bit and a 3-bit symbol.
    pub fn ascii7() -> Self {
        let codes = (0u32..128)
            .map(|c| (char::from_u32(c).expect("ascii"), c))
            .collect();
        Self::new(AlphabetName::Ascii7, vec![4, 3], codes).expect("valid layout")
    }

    /// Lowercase `a..=z` with their ASCII codes and the ASCII layout.
    pub fn lower26() -> Self {
        let codes = ('a'..='z').map(|c| (c, c as u32)).collect();
        Self::new(AlphabetName::Lower26, vec![4, 3], codes).expect("valid layout")
    }

    /// Nucleotides, one 2-bit symbol each.
    pub fn dna4() -> Self {
        let codes = [('A', 0), ('C', 1), ('G', 2), ('T', 3)]
            .into_iter()
            .collect();
        Self::new(AlphabetName::Dna4, vec![2], codes).expect("valid layout")
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "ascii7" => Ok(Self::ascii7()),
            "lower26" => Ok(Self::lower26()),
            "dna4" => Ok(Self::dna4()),
            other => Err(Error::InvalidAlphabet(format!(
                "unknown alphabet {other:?}"
            ))),
        }
    }

    pub fn name(&self) -> &AlphabetName {
        &self.name
    }

    pub fn widths(&self) -> &[u8] {
        &self.widths
    }

    pub fn bit_width(&self) -> u32 {
        self.widths.iter().map(|&w| w as u32).sum()
    }

    pub fn symbol_count(&self) -> usize {
        self.widths.len()
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn chars(&self) -> impl Iterator<Item = char> + '_ {
        self.codes.keys().copied()
    }

    pub fn codes(&self) -> impl Iterator<Item = (char, u32)> + '_ {
        self.codes.iter().map(|(&c, &v)| (c, v))
    }

    pub fn contains(&self, c: char) -> bool {
        self.codes.contains_key(&c)
    }

    pub fn code(&self, c: char) -> Result<u32> {
        self.codes
            .get(&c)
            .copied()
            .ok_or(Error::CharNotInAlphabet(c))
    }

    pub fn encode_char(&self, c: char) -> Result<EncodedChar> {
        let mut code = self.code(c)?;
        let symbols = self
            .widths
            .iter()
            .map(|&w| {
                let s = (code & ((1 << w) - 1)) as u8;
                code >>= w;
                s
            })
            .collect();
        Ok(EncodedChar { symbols })
    }

    pub fn decode_char(&self, encoded: &EncodedChar) -> Option<char> {
        if encoded.symbols.len() != self.widths.len() {
            return None;
        }
        let mut code = 0u32;
        let mut shift = 0u32;
        for (&s, &w) in encoded.symbols.iter().zip(&self.widths) {
            if s >> w != 0 {
                return None;
            }
            code |= (s as u32) << shift;
            shift += w as u32;
        }
        self.codes.iter().find(|(_, &v)| v == code).map(|(&c, _)| c)
    }

    /// Parses the line-based `key=value` alphabet file.
    ///
    /// Keys: `name`, `widths` (comma separated, low symbol first), `chars`
    /// (codes assigned 0, 1, 2, ... in order) and repeatable `map=<char>:<code>`.
    /// Lines starting with `#` are comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut name = None;
        let mut widths = None;
        let mut codes = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let bad = |what: &str| Error::InvalidAlphabet(format!("line {}: {what}", lineno + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad("expected key=value"))?;
            match key.trim() {
                "name" => name = Some(value.trim().to_string()),
                "widths" => {
                    let ws = value
                        .split(',')
                        .map(|w| w.trim().parse::<u8>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| bad("widths must be integers"))?;
                    widths = Some(ws);
                }
                "chars" => {
                    for c in value.chars() {
                        let next = codes.len() as u32;
                        if codes.insert(c, next).is_some() {
                            return Err(bad(&format!("duplicate character {c:?}")));
                        }
                    }
                }
                "map" => {
                    let (c, code) = value
                        .rsplit_once(':')
                        .ok_or_else(|| bad("map needs <char>:<code>"))?;
                    let mut it = c.chars();
                    let ch = match (it.next(), it.next()) {
                        (Some(ch), None) => ch,
                        _ => return Err(bad("map key must be one character")),
                    };
                    let code = code.trim().parse::<u32>().map_err(|_| bad("bad code"))?;
                    if codes.insert(ch, code).is_some() {
                        return Err(bad(&format!("duplicate character {ch:?}")));
                    }
                }
                other => return Err(bad(&format!("unknown key {other:?}"))),
            }
        }
        let name = name.ok_or_else(|| Error::InvalidAlphabet("missing name".into()))?;
        let widths = widths.ok_or_else(|| Error::InvalidAlphabet("missing widths".into()))?;
        let name = match name.as_str() {
            "ascii7" | "lower26" | "dna4" => {
                return Err(Error::InvalidAlphabet(format!(
                    "{name:?} is a built-in alphabet name"
                )))
            }
            _ => AlphabetName::Custom(name),
        };
        Self::new(name, widths, codes)
    }

    /// Inverse of [`AlphabetSpec::parse`] for custom alphabets.
    pub fn to_config(&self) -> String {
        let widths: Vec<String> = self.widths.iter().map(|w| w.to_string()).collect();
        let mut out = format!("name={}\nwidths={}\n", self.name, widths.join(","));
        for (c, code) in &self.codes {
            out.push_str(&format!("map={c}:{code}\n"));
        }
        out
    }
}

/// Splits a 7-bit ASCII character into `chunk_bits`-sized little-endian chunks.
pub fn encode_chunked(c: char, chunk_bits: u8) -> Result<Vec<u8>> {
    if !c.is_ascii() {
        return Err(Error::CharNotInAlphabet(c));
    }
    chunk_code(c as u32, 7, chunk_bits)
}

/// `ceil(bit_width / chunk_bits)` little-endian chunks of `code`.
pub fn chunk_code(code: u32, bit_width: u32, chunk_bits: u8) -> Result<Vec<u8>> {
    if !(2..=4).contains(&chunk_bits) {
        return Err(Error::InvalidAlphabet(format!(
            "chunk size must be 2, 3 or 4 bits, got {chunk_bits}"
        )));
    }
    if bit_width == 0 || bit_width > 32 || (bit_width < 32 && code >> bit_width != 0) {
        return Err(Error::InvalidAlphabet(format!(
            "code {code} does not fit in {bit_width} bits"
        )));
    }
    let t = chunk_bits as u32;
    let count = bit_width.div_ceil(t);
    Ok((0..count)
        .map(|k| ((code >> (k * t)) & ((1 << t) - 1)) as u8)
        .collect())
}

pub fn unchunk(chunks: &[u8], chunk_bits: u8) -> u32 {
    chunks
        .iter()
        .enumerate()
        .map(|(k, &c)| (c as u32) << (k as u32 * chunk_bits as u32))
        .sum()
}

/// An encrypted string: one ciphertext per symbol per character.
#[derive(Debug, Clone)]
pub struct EncryptedString<C> {
    chars: Vec<Vec<C>>,
}

impl<C> EncryptedString<C> {
    pub fn from_chars(chars: Vec<Vec<C>>) -> Self {
        Self { chars }
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    /// Symbols of the character at 0-based `index`.
    pub fn char_at(&self, index: usize) -> &[C] {
        &self.chars[index]
    }

    pub fn ciphertext_count(&self) -> usize {
        self.chars.iter().map(Vec::len).sum()
    }
}

pub fn encrypt_string<B: Backend>(
    s: &str,
    spec: &AlphabetSpec,
    backend: &B,
) -> Result<EncryptedString<B::Ciphertext>> {
    let chars = s
        .chars()
        .map(|c| {
            spec.encode_char(c)?
                .symbols
                .into_iter()
                .map(|sym| backend.encrypt(sym))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EncryptedString { chars })
}

pub fn decrypt_string<B: Backend>(
    es: &EncryptedString<B::Ciphertext>,
    spec: &AlphabetSpec,
    backend: &B,
) -> Option<String> {
    es.chars
        .iter()
        .map(|syms| {
            let symbols = syms.iter().map(|c| backend.decrypt(c)).collect();
            spec.decode_char(&EncodedChar { symbols })
        })
        .collect()
}
