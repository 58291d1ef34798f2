// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ImageError {
    pub line: usize,
    pub message: String,
}

/// Program memory contents, one 32-bit word per address from 0.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct MemoryImage {
    pub words: Vec<u32>,
}

impl MemoryImage {
    pub fn new(words: Vec<u32>) -> Self {
        MemoryImage { words }
    }

    /// Parses the hex-word format: one 8-digit word per line, `#`
    /// comments, blank lines ignored.
    pub fn parse(text: &str) -> Result<MemoryImage, ImageError> {
        let mut words = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let t = raw.split('#').next().unwrap_or("").trim();
            if t.is_empty() {
                continue;
            }
            let err = |message: String| ImageError {
                line: i + 1,
                message,
            };
            let hex = t.strip_prefix("0x").unwrap_or(t);
            if hex.len() != 8 || !hex.chars().all(|c| c.is_ascii_hexdigit()) {
                return Err(err(format!("expected an 8-digit hex word, got `{t}`")));
            }
            words.push(u32::from_str_radix(hex, 16).map_err(|e| err(e.to_string()))?);
        }
        Ok(MemoryImage { words })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.words.len() * 9);
        for w in &self.words {
            writeln!(s, "{w:08x}").unwrap();
        }
        s
    }

    /// Little-endian byte view.
    pub fn bytes(&self) -> Vec<u8> {
        self.words.iter().flat_map(|w| w.to_le_bytes()).collect()
    }

    pub fn len_bytes(&self) -> usize {
        self.words.len() * 4
    }
}
