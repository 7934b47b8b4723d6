//! SMILES tokenization.
//!
//! Splits a SMILES string into chemically meaningful fragments via a single
//! alternation pattern: bracket atoms first, two-letter halogens before the
//! single letters they start with, two-digit `%NN` ring bonds before bare
//! digits. Matching is greedy left to right; any character no alternative
//! consumes is an error, never silently skipped. Tokenization is lossless:
//! the concatenated tokens reproduce the input exactly.

use std::sync::LazyLock;

use regex::Regex;

use crate::error::{Error, Result};

/// The tokenization pattern. Alternatives are tried in the written order.
///
/// Stored once; golden tests cover it. Do not re-derive per call.
pub const TOKEN_PATTERN: &str = r"(\[[^\]]+]|Br?|Cl?|N|O|S|P|F|I|b|c|n|o|s|p|\(|\)|\.|=|#|-|\+|\\|\/|:|~|@|\?|>|\*|\$|\%[0-9]{2}|[0-9])";

static TOKEN_REGEX: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(TOKEN_PATTERN).expect("token pattern compiles"));

/// A lossless tokenization of one SMILES string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    source: String,
    tokens: Vec<String>,
}

impl TokenSequence {
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Tokens joined by `sep` (conventional preprocessing output uses " ").
    pub fn joined(&self, sep: &str) -> String {
        self.tokens.join(sep)
    }
}

/// Tokenize a SMILES string.
///
/// Errors carry the byte offset and the offending character for any input
/// the pattern cannot fully consume; empty input is rejected.
pub fn tokenize(smiles: &str) -> Result<TokenSequence> {
    if smiles.is_empty() {
        return Err(Error::InvalidArgument("empty SMILES input".into()));
    }
    let mut tokens = Vec::new();
    let mut pos = 0;
    for m in TOKEN_REGEX.find_iter(smiles) {
        if m.start() != pos {
            let ch = smiles[pos..].chars().next().expect("offset within input");
            return Err(Error::Tokenize { offset: pos, ch });
        }
        tokens.push(m.as_str().to_owned());
        pos = m.end();
    }
    if pos != smiles.len() {
        let ch = smiles[pos..].chars().next().expect("offset within input");
        return Err(Error::Tokenize { offset: pos, ch });
    }
    Ok(TokenSequence { source: smiles.to_owned(), tokens })
}
