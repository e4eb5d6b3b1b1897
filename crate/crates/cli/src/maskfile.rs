//! Plain-text mask file.
//!
//! ```text
//! YLGM1
//! pattern=ltr n_query=9 n_key=9 steps=2 stride=3 esa=none
//! 111000000
//! ...            one line of '0'/'1' per query row
//!
//! 100100100      steps separated by one empty line
//! ...
//! ```
//!
//! `esa` is `none` or `<height>x<width>`. Every step has `n_key` columns.
//! The last step has `n_query` rows; earlier steps are square.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;
use ylg_core::{AttentionMask, PatternFactorization, PatternKind};

pub const MAGIC: &str = "YLGM1";

#[derive(Debug, Error, PartialEq)]
pub enum MaskFileError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("mask file content: {0}")]
    Content(#[from] ylg_core::Error),
}

fn syntax<T>(line: usize, message: impl Into<String>) -> Result<T, MaskFileError> {
    Err(MaskFileError::Syntax {
        line,
        message: message.into(),
    })
}

/// Parsed file contents; steps are not yet checked for empty rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskFile {
    pub pattern: PatternKind,
    pub n_query: usize,
    pub n_key: usize,
    pub stride: usize,
    pub grid: Option<(usize, usize)>,
    pub steps: Vec<AttentionMask>,
}

impl MaskFile {
    pub fn from_factorization(f: &PatternFactorization) -> Self {
        Self {
            pattern: f.kind(),
            n_query: f.query_count(),
            n_key: f.n(),
            stride: f.stride(),
            grid: f.grid(),
            steps: f.steps().to_vec(),
        }
    }

    pub fn to_factorization(&self) -> Result<PatternFactorization, MaskFileError> {
        Ok(
            PatternFactorization::new(self.pattern, self.stride, self.steps.clone())?
                .with_grid(self.grid),
        )
    }

    pub fn render(&self) -> String {
        let esa = match self.grid {
            Some((h, w)) => format!("{h}x{w}"),
            None => "none".to_string(),
        };
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        let _ = writeln!(
            out,
            "pattern={} n_query={} n_key={} steps={} stride={} esa={}",
            self.pattern,
            self.n_query,
            self.n_key,
            self.steps.len(),
            self.stride,
            esa
        );
        for (i, step) in self.steps.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            for q in 0..step.n_query() {
                out.extend(step.row(q).iter().map(|&b| if b { '1' } else { '0' }));
                out.push('\n');
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, MaskFileError> {
        let lines: Vec<&str> = text.lines().collect();
        if lines.first() != Some(&MAGIC) {
            return syntax(1, format!("expected magic '{MAGIC}'"));
        }
        let Some(header) = lines.get(1) else {
            return syntax(2, "missing header");
        };
        let header = Header::parse(header)?;

        let mut steps = Vec::with_capacity(header.steps);
        let mut cursor = 2;
        for i in 0..header.steps {
            if i > 0 {
                if lines.get(cursor) != Some(&"") {
                    return syntax(cursor + 1, "expected an empty line between steps");
                }
                cursor += 1;
            }
            let rows = if i + 1 == header.steps {
                header.n_query
            } else {
                header.n_key
            };
            let mut bits = Vec::with_capacity(rows * header.n_key);
            for r in 0..rows {
                let Some(line) = lines.get(cursor) else {
                    return syntax(cursor + 1, format!("step {i} ends after {r} rows"));
                };
                if line.len() != header.n_key {
                    return syntax(
                        cursor + 1,
                        format!("row has {} columns, expected {}", line.len(), header.n_key),
                    );
                }
                for ch in line.chars() {
                    match ch {
                        '0' => bits.push(false),
                        '1' => bits.push(true),
                        other => {
                            return syntax(cursor + 1, format!("unexpected character '{other}'"))
                        }
                    }
                }
                cursor += 1;
            }
            steps.push(AttentionMask::from_bits(rows, header.n_key, bits)?);
        }
        if cursor != lines.len() {
            return syntax(cursor + 1, "trailing content after the last step");
        }
        Ok(Self {
            pattern: header.pattern,
            n_query: header.n_query,
            n_key: header.n_key,
            stride: header.stride,
            grid: header.grid,
            steps,
        })
    }
}

struct Header {
    pattern: PatternKind,
    n_query: usize,
    n_key: usize,
    steps: usize,
    stride: usize,
    grid: Option<(usize, usize)>,
}

impl Header {
    fn parse(line: &str) -> Result<Self, MaskFileError> {
        const KEYS: [&str; 6] = ["pattern", "n_query", "n_key", "steps", "stride", "esa"];
        let fields: Vec<(&str, &str)> = line
            .split(' ')
            .map(|kv| kv.split_once('=').unwrap_or((kv, "")))
            .collect();
        if fields.len() != KEYS.len() || fields.iter().zip(KEYS).any(|((k, _), want)| *k != want) {
            return syntax(2, format!("header must list {}", KEYS.join(", ")));
        }
        let count = |i: usize| -> Result<usize, MaskFileError> {
            usize::from_str(fields[i].1).or_else(|_| syntax(2, format!("bad {} value", KEYS[i])))
        };
        let pattern = PatternKind::from_str(fields[0].1).or_else(|e| syntax(2, e.to_string()))?;
        let grid = match fields[5].1 {
            "none" => None,
            dims => Some(parse_dims(dims).ok_or_else(|| MaskFileError::Syntax {
                line: 2,
                message: format!("bad esa grid '{dims}'"),
            })?),
        };
        let header = Self {
            pattern,
            n_query: count(1)?,
            n_key: count(2)?,
            steps: count(3)?,
            stride: count(4)?,
            grid,
        };
        if header.n_key == 0 || header.n_query == 0 || header.steps == 0 {
            return syntax(2, "counts must be positive");
        }
        Ok(header)
    }
}

/// Parses `HxW`.
pub fn parse_dims(s: &str) -> Option<(usize, usize)> {
    let (h, w) = s.split_once(['x', 'X'])?;
    let h = h.parse().ok()?;
    let w = w.parse().ok()?;
    (h > 0 && w > 0).then_some((h, w))
}
