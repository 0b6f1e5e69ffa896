use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// Token inventory with fixed reserved indices: 0 = sentence begin,
/// 1 = sentence end, 2 = unknown.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

pub const BOS_ID: u32 = 0;
pub const EOS_ID: u32 = 1;
pub const UNK_ID: u32 = 2;

impl Vocabulary {
    /// Builds a vocabulary from the regular (non-reserved) tokens.
    pub fn new<S: AsRef<str>>(regular_tokens: &[S]) -> Result<Self> {
        let mut tokens = vec![BOS.to_string(), EOS.to_string(), UNK.to_string()];
        tokens.extend(regular_tokens.iter().map(|t| t.as_ref().to_string()));
        Self::from_full_list(tokens)
    }

    fn from_full_list(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 3 || tokens[0] != BOS || tokens[1] != EOS || tokens[2] != UNK {
            return Err(Error::Vocab(format!(
                "reserved tokens must be `{BOS}`, `{EOS}`, `{UNK}` on the first three lines"
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::Vocab(format!("invalid token at index {i}: {tok:?}")));
            }
            if index.insert(tok.clone(), i as u32).is_some() {
                return Err(Error::Vocab(format!("duplicate token `{tok}`")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    /// One token per line, line number = index, reserved tokens on the first lines.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut tokens = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            tokens.push(line.trim().to_string());
        }
        Self::from_full_list(tokens)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for tok in &self.tokens {
            writeln!(out, "{tok}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    /// Index of `token`, falling back to the UNK index for unknown words.
    pub fn index_or_unk(&self, token: &str) -> u32 {
        self.index_of(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, words: &[&str]) -> Vec<u32> {
        words.iter().map(|w| self.index_or_unk(w)).collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Vec<&str> {
        ids.iter()
            .map(|&id| self.token(id).unwrap_or(UNK))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_bijection() {
        let v = Vocabulary::new(&["cat", "dog"]).unwrap();
        assert_eq!(v.len(), 5);
        for i in 0..v.len() as u32 {
            let tok = v.token(i).unwrap();
            assert_eq!(v.index_of(tok), Some(i));
        }
        assert_eq!(v.index_of("cat"), Some(3));
        assert_eq!(v.index_or_unk("missing"), UNK_ID);
    }

    #[test]
    fn duplicate_rejected() {
        assert!(Vocabulary::new(&["x", "x"]).is_err());
    }

    #[test]
    fn reserved_tokens_fixed() {
        let v = Vocabulary::new::<&str>(&[]).unwrap();
        assert_eq!(v.token(BOS_ID), Some(BOS));
        assert_eq!(v.token(EOS_ID), Some(EOS));
        assert_eq!(v.token(UNK_ID), Some(UNK));
    }

    #[test]
    fn save_load_identical() {
        let v = Vocabulary::new(&["a", "b", "c"]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.txt");
        v.save(&p).unwrap();
        assert_eq!(Vocabulary::load(&p).unwrap(), v);
    }
}
