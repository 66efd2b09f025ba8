//! Text form of kernel expressions.
//!
//! Grammar (whitespace-insensitive, parameters keyword-only):
//!
//! ```text
//! expr     := leaf | combo
//! leaf     := ("rbf" | "periodic" | "locper" | "linear") "(" kvpairs? ")"
//! combo    := ("sum" | "product") "(" expr ("," expr)+ ")"
//! kvpairs  := key "=" number ("," key "=" number)*
//! ```
//!
//! Omitted leaf parameters take documented defaults (`var=1`, `len=1`,
//! `period=1`, `plen=len`, `offset=0`).

use super::{KernelError, KernelSpec};

/// Parses the canonical text form back into a [`KernelSpec`].
///
/// The result is validated, so a successfully parsed spec is always usable.
pub fn parse_kernel(input: &str) -> Result<KernelSpec, KernelError> {
    let mut p = Parser {
        bytes: input.as_bytes(),
        pos: 0,
    };
    let spec = p.expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(p.err("trailing input after kernel expression"));
    }
    spec.validate()?;
    Ok(spec)
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: impl Into<String>) -> KernelError {
        KernelError::Parse {
            position: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expect(&mut self, ch: u8) -> Result<(), KernelError> {
        if self.peek() == Some(ch) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{}`", ch as char)))
        }
    }

    fn ident(&mut self) -> Result<&'a str, KernelError> {
        self.skip_ws();
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_')
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected an identifier"));
        }
        Ok(std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii range"))
    }

    fn number(&mut self) -> Result<f64, KernelError> {
        self.skip_ws();
        let start = self.pos;
        if self.bytes.get(self.pos).is_some_and(|b| *b == b'+' || *b == b'-') {
            self.pos += 1;
        }
        let mut seen_exp = false;
        while let Some(&b) = self.bytes.get(self.pos) {
            match b {
                b'0'..=b'9' | b'.' => self.pos += 1,
                b'e' | b'E' if !seen_exp => {
                    seen_exp = true;
                    self.pos += 1;
                    if self.bytes.get(self.pos).is_some_and(|b| *b == b'+' || *b == b'-') {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii range");
        text.parse::<f64>().map_err(|_| {
            self.pos = start;
            self.err(format!("expected a number, got `{text}`"))
        })
    }

    fn expr(&mut self) -> Result<KernelSpec, KernelError> {
        let name_pos = self.pos;
        let name = self.ident()?.to_ascii_lowercase();
        self.expect(b'(')?;
        let spec = match name.as_str() {
            "rbf" | "periodic" | "locper" | "linear" => self.leaf(&name)?,
            "sum" | "product" => {
                let mut children = vec![self.expr()?];
                while self.peek() == Some(b',') {
                    self.pos += 1;
                    children.push(self.expr()?);
                }
                if children.len() < 2 {
                    return Err(KernelError::TooFewChildren {
                        combinator: if name == "sum" { "sum" } else { "product" },
                        got: children.len(),
                    });
                }
                if name == "sum" {
                    KernelSpec::Sum(children)
                } else {
                    KernelSpec::Product(children)
                }
            }
            other => {
                self.pos = name_pos;
                return Err(self.err(format!(
                    "unknown kernel `{other}` (expected rbf, periodic, locper, linear, sum, product)"
                )));
            }
        };
        self.expect(b')')?;
        Ok(spec)
    }

    fn leaf(&mut self, name: &str) -> Result<KernelSpec, KernelError> {
        let mut pairs: Vec<(String, f64)> = Vec::new();
        if self.peek() != Some(b')') {
            loop {
                let key = self.ident()?.to_ascii_lowercase();
                self.expect(b'=')?;
                let value = self.number()?;
                if pairs.iter().any(|(k, _)| *k == key) {
                    return Err(self.err(format!("duplicate parameter `{key}`")));
                }
                pairs.push((key, value));
                if self.peek() == Some(b',') {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        let allowed: &[&str] = match name {
            "rbf" => &["var", "len"],
            "periodic" => &["var", "period", "len"],
            "locper" => &["var", "period", "len", "plen"],
            "linear" => &["var", "offset"],
            _ => unreachable!("caller matched the name"),
        };
        for (k, _) in &pairs {
            if !allowed.contains(&k.as_str()) {
                return Err(self.err(format!("`{name}` has no parameter `{k}`")));
            }
        }
        let get = |key: &str| pairs.iter().find(|(k, _)| k == key).map(|(_, v)| *v);
        let var = get("var").unwrap_or(1.0);
        Ok(match name {
            "rbf" => KernelSpec::Rbf {
                var,
                len: get("len").unwrap_or(1.0),
            },
            "periodic" => KernelSpec::Periodic {
                var,
                period: get("period").unwrap_or(1.0),
                len: get("len").unwrap_or(1.0),
            },
            "locper" => {
                let len = get("len").unwrap_or(1.0);
                KernelSpec::LocallyPeriodic {
                    var,
                    period: get("period").unwrap_or(1.0),
                    len,
                    plen: get("plen").unwrap_or(len),
                }
            }
            "linear" => KernelSpec::Linear {
                var,
                offset: get("offset").unwrap_or(0.0),
            },
            _ => unreachable!("caller matched the name"),
        })
    }
}
