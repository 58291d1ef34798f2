// SPDX-License-Identifier: Apache-2.0

//! Minimal RV32I assembler: one instruction per line, `#` comments,
//! `label:` definitions, ABI register names and `.word`.

use std::collections::HashMap;

use thiserror::Error;

use super::{encode, EncodeError, Format, Kind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AsmError {
    #[error("line {line}: {message}")]
    SyntaxError { line: usize, message: String },
    #[error("line {line}: unknown mnemonic `{mnemonic}`")]
    UnknownMnemonic { line: usize, mnemonic: String },
    #[error("line {line}: immediate {value} out of range")]
    ImmediateOutOfRange { line: usize, value: i64 },
}

fn syntax(line: usize, message: impl Into<String>) -> AsmError {
    AsmError::SyntaxError {
        line,
        message: message.into(),
    }
}

const ABI: [&str; 32] = [
    "zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1", "a0", "a1", "a2", "a3", "a4",
    "a5", "a6", "a7", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9", "s10", "s11", "t3", "t4",
    "t5", "t6",
];

fn register(tok: &str, line: usize) -> Result<u32, AsmError> {
    let t = tok.trim().to_ascii_lowercase();
    if t == "fp" {
        return Ok(8);
    }
    if let Some(i) = ABI.iter().position(|n| *n == t) {
        return Ok(i as u32);
    }
    match t.strip_prefix('x').and_then(|n| n.parse::<u32>().ok()) {
        Some(n) if n < 32 => Ok(n),
        _ => Err(syntax(line, format!("bad register `{}`", tok.trim()))),
    }
}

fn number(tok: &str) -> Option<i64> {
    let t = tok.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let v = if let Some(h) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        i64::from_str_radix(h, 16).ok()?
    } else {
        body.parse::<i64>().ok()?
    };
    Some(if neg { -v } else { v })
}

fn immediate(tok: &str, line: usize) -> Result<i64, AsmError> {
    number(tok).ok_or_else(|| syntax(line, format!("bad immediate `{}`", tok.trim())))
}

/// `imm(reg)`
fn mem_operand(tok: &str, line: usize) -> Result<(i64, u32), AsmError> {
    let t = tok.trim();
    let open = t
        .find('(')
        .ok_or_else(|| syntax(line, format!("expected imm(reg), got `{t}`")))?;
    let inner = t[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| syntax(line, format!("missing `)` in `{t}`")))?;
    let imm = if t[..open].trim().is_empty() {
        0
    } else {
        immediate(&t[..open], line)?
    };
    Ok((imm, register(inner, line)?))
}

struct Line<'a> {
    number: usize,
    mnemonic: &'a str,
    operands: Vec<&'a str>,
    addr: u32,
}

/// Assembles `source` into words placed from address 0.
pub fn assemble(source: &str) -> Result<Vec<u32>, AsmError> {
    let mut labels: HashMap<&str, u32> = HashMap::new();
    let mut lines = Vec::new();
    let mut addr = 0u32;
    for (i, raw) in source.lines().enumerate() {
        let number = i + 1;
        let mut text = raw.split('#').next().unwrap_or("").trim();
        while let Some(colon) = text.find(':') {
            let label = text[..colon].trim();
            if label.is_empty() || !label.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '.') {
                return Err(syntax(number, format!("bad label `{label}`")));
            }
            if labels.insert(label, addr).is_some() {
                return Err(syntax(number, format!("duplicate label `{label}`")));
            }
            text = text[colon + 1..].trim();
        }
        if text.is_empty() {
            continue;
        }
        let (mnemonic, rest) = match text.find(char::is_whitespace) {
            Some(p) => (&text[..p], text[p..].trim()),
            None => (text, ""),
        };
        let operands = if rest.is_empty() {
            Vec::new()
        } else {
            rest.split(',').map(str::trim).collect()
        };
        lines.push(Line {
            number,
            mnemonic,
            operands,
            addr,
        });
        addr = addr.wrapping_add(4);
    }
    lines
        .iter()
        .map(|l| assemble_line(l, &labels))
        .collect()
}

/// Assembles a list of lines (same syntax as [`assemble`]).
pub fn assemble_lines<S: AsRef<str>>(lines: &[S]) -> Result<Vec<u32>, AsmError> {
    let joined: Vec<&str> = lines.iter().map(|s| s.as_ref()).collect();
    assemble(&joined.join("\n"))
}

fn assemble_line(l: &Line<'_>, labels: &HashMap<&str, u32>) -> Result<u32, AsmError> {
    let n = l.number;
    let ops = &l.operands;
    let want = |count: usize| -> Result<(), AsmError> {
        if ops.len() == count {
            Ok(())
        } else {
            Err(syntax(
                n,
                format!("`{}` takes {count} operands, got {}", l.mnemonic, ops.len()),
            ))
        }
    };
    // Branch/jump target: a label or a numeric pc-relative offset.
    let target = |tok: &str| -> Result<i64, AsmError> {
        match labels.get(tok.trim()) {
            Some(&a) => Ok(a as i64 - l.addr as i64),
            None => number(tok).ok_or_else(|| syntax(n, format!("unknown label `{}`", tok.trim()))),
        }
    };

    let lower = l.mnemonic.to_ascii_lowercase();
    match lower.as_str() {
        ".word" => {
            want(1)?;
            let v = immediate(ops[0], n)?;
            if !(-(1i64 << 31)..(1i64 << 32)).contains(&v) {
                return Err(AsmError::ImmediateOutOfRange { line: n, value: v });
            }
            return Ok(v as u32);
        }
        "nop" => {
            want(0)?;
            return finish(n, encode(Kind::Addi, 0, 0, 0, 0));
        }
        _ => {}
    }
    let kind = match Kind::from_mnemonic(&lower) {
        Some(k) if k != Kind::Illegal => k,
        _ => {
            return Err(AsmError::UnknownMnemonic {
                line: n,
                mnemonic: l.mnemonic.to_string(),
            })
        }
    };
    let r = |i: usize| register(ops[i], n);
    let word = match kind.format() {
        Format::R => {
            want(3)?;
            encode(kind, r(0)?, r(1)?, r(2)?, 0)
        }
        Format::I | Format::Shift => {
            want(3)?;
            encode(kind, r(0)?, r(1)?, 0, immediate(ops[2], n)?)
        }
        Format::Load => {
            want(2)?;
            let (imm, base) = mem_operand(ops[1], n)?;
            encode(kind, r(0)?, base, 0, imm)
        }
        Format::Jalr => {
            // jalr rd, imm(rs1) | jalr rd, rs1, imm | jalr rs1
            match ops.len() {
                1 => encode(kind, 1, r(0)?, 0, 0),
                2 => {
                    let (imm, base) = mem_operand(ops[1], n)?;
                    encode(kind, r(0)?, base, 0, imm)
                }
                _ => {
                    want(3)?;
                    encode(kind, r(0)?, r(1)?, 0, immediate(ops[2], n)?)
                }
            }
        }
        Format::Store => {
            want(2)?;
            let (imm, base) = mem_operand(ops[1], n)?;
            encode(kind, 0, base, r(0)?, imm)
        }
        Format::Branch => {
            want(3)?;
            encode(kind, 0, r(0)?, r(1)?, target(ops[2])?)
        }
        Format::Upper => {
            want(2)?;
            encode(kind, r(0)?, 0, 0, immediate(ops[1], n)?)
        }
        Format::Jump => match ops.len() {
            1 => encode(kind, 1, 0, 0, target(ops[0])?),
            _ => {
                want(2)?;
                encode(kind, r(0)?, 0, 0, target(ops[1])?)
            }
        },
        Format::None => {
            want(0)?;
            encode(kind, 0, 0, 0, 0)
        }
    };
    finish(n, word)
}

fn finish(line: usize, r: Result<u32, EncodeError>) -> Result<u32, AsmError> {
    r.map_err(|e| match e {
        EncodeError::ImmediateOutOfRange { value, .. } => {
            AsmError::ImmediateOutOfRange { line, value }
        }
        other => syntax(line, other.to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::{decode, Instr};
    use proptest::prelude::*;

    #[test]
    fn reference_words() {
        assert_eq!(assemble("addi x1, x0, 5").unwrap(), vec![0x0050_0093]);
        assert_eq!(assemble("ebreak").unwrap(), vec![0x0010_0073]);
        assert_eq!(assemble("lw sp, 8(ra)").unwrap(), vec![0x0080_a103]);
        assert_eq!(assemble("nop").unwrap(), vec![0x0000_0013]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(
            assemble("addi x1, x0, 99999"),
            Err(AsmError::ImmediateOutOfRange { line: 1, value: 99999 })
        );
        assert!(matches!(
            assemble("nop\nfrob x1, x2"),
            Err(AsmError::UnknownMnemonic { line: 2, .. })
        ));
        assert!(matches!(
            assemble("nop\n\naddi x1, x0"),
            Err(AsmError::SyntaxError { line: 3, .. })
        ));
        assert!(matches!(
            assemble("add x1, x2, x32"),
            Err(AsmError::SyntaxError { line: 1, .. })
        ));
        assert!(matches!(
            assemble("beq x1, x2, nowhere"),
            Err(AsmError::SyntaxError { line: 1, .. })
        ));
    }

    #[test]
    fn labels_resolve_both_directions() {
        let w = assemble(
            "top: addi x1, x1, 1   # count
                  bne x1, x2, top
                  jal x0, end
                  nop
             end: ebreak",
        )
        .unwrap();
        assert_eq!(decode(w[1]).imm, -4);
        assert_eq!(decode(w[2]).imm, 8);
    }

    #[test]
    fn word_directive_and_comments() {
        let w = assemble("# header\n.word 0xdeadbeef\n.word -1 # trailing").unwrap();
        assert_eq!(w, vec![0xdead_beef, 0xffff_ffff]);
    }

    fn text_of(i: &Instr) -> String {
        i.to_string()
    }

    fn legal_word() -> impl Strategy<Value = u32> {
        (
            proptest::sample::select(&Kind::ALL[..38]),
            0u32..32,
            0u32..32,
            0u32..32,
            any::<i64>(),
        )
            .prop_map(|(k, rd, rs1, rs2, r)| {
                let imm = match k.format() {
                    Format::Shift => r.rem_euclid(32),
                    Format::Branch => (r.rem_euclid(4096) - 2048) * 2,
                    Format::Upper => r.rem_euclid(1 << 20),
                    Format::Jump => (r.rem_euclid(1 << 20) - (1 << 19)) * 2,
                    _ => r.rem_euclid(4096) - 2048,
                };
                encode(k, rd, rs1, rs2, imm).unwrap()
            })
    }

    proptest! {
        // assemble(disassemble(w)) == w for every legal word.
        #[test]
        fn disassembly_reassembles(w in legal_word()) {
            let i = decode(w);
            prop_assert_eq!(assemble(&text_of(&i)).unwrap(), vec![w]);
        }
    }
}
