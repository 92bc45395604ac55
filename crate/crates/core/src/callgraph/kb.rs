//! The API knowledge base: effect and return behavior of framework and
//! library callables that are not part of the analyzed sources.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::names::QualifiedName;
use crate::types::PrimitiveKind;

pub const DEFAULT_KB: &str = include_str!("default.kb");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EffectClass {
    PureTensor,
    Io,
    VariableCreation,
    Randomness,
    Unknown,
}

impl FromStr for EffectClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "pure-tensor" => Self::PureTensor,
            "io" => Self::Io,
            "variable-creation" => Self::VariableCreation,
            "randomness" => Self::Randomness,
            "unknown" => Self::Unknown,
            other => return Err(format!("unknown effect class `{other}`")),
        })
    }
}

/// What a call to a knowledge-base entry evaluates to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReturnTemplate {
    /// A tensor. Shape is read from a literal shape argument (positional
    /// index or `shape=` keyword) or from a nested-list value literal.
    Tensor {
        shape_arg: Option<usize>,
        value_arg: Option<usize>,
    },
    /// A callable object; calling the instance yields a tensor.
    Layer,
    Primitive(PrimitiveKind),
    Object,
    Unknown,
}

impl FromStr for ReturnTemplate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(kind) = PrimitiveKind::from_keyword(s) {
            return Ok(Self::Primitive(kind));
        }
        match s {
            "tensor" => {
                return Ok(Self::Tensor {
                    shape_arg: None,
                    value_arg: None,
                })
            }
            "layer" => return Ok(Self::Layer),
            "object" => return Ok(Self::Object),
            _ => {}
        }
        let inner = s
            .strip_prefix("tensor(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| format!("unknown return template `{s}`"))?;
        let mut shape_arg = None;
        let mut value_arg = None;
        for part in inner.split(',') {
            let (key, index) = part
                .split_once('=')
                .ok_or_else(|| format!("malformed tensor parameter `{part}`"))?;
            let index: usize = index
                .trim()
                .parse()
                .map_err(|_| format!("argument index `{index}` is not a number"))?;
            match key.trim() {
                "shape" => shape_arg = Some(index),
                "value" => value_arg = Some(index),
                other => return Err(format!("unknown tensor parameter `{other}`")),
            }
        }
        Ok(Self::Tensor {
            shape_arg,
            value_arg,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KbEntry {
    pub pattern: QualifiedName,
    /// Pattern ended in `.*` and matches strictly longer names.
    pub wildcard: bool,
    pub effect: EffectClass,
    pub returns: ReturnTemplate,
}

impl fmt::Display for KbEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pattern)?;
        if self.wildcard {
            f.write_str(".*")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("knowledge base line {line}: {message}")]
pub struct KbError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct ApiKnowledgeBase {
    entries: Vec<KbEntry>,
}

impl ApiKnowledgeBase {
    pub fn parse(text: &str) -> Result<Self, KbError> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| KbError { line, message };
            let fields: Vec<&str> = content.split_whitespace().collect();
            if !(2..=3).contains(&fields.len()) {
                return Err(err(format!("expected 2 or 3 fields, found {}", fields.len())));
            }
            let (dotted, wildcard) = match fields[0].strip_suffix(".*") {
                Some(prefix) => (prefix, true),
                None => (fields[0], false),
            };
            let pattern = QualifiedName::parse(dotted)
                .filter(|qn| qn.segments().iter().all(|s| s != "*"))
                .ok_or_else(|| err(format!("invalid pattern `{}`", fields[0])))?;
            let effect = fields[1].parse().map_err(err)?;
            let returns = match fields.get(2) {
                Some(r) => r.parse().map_err(err)?,
                None => ReturnTemplate::Unknown,
            };
            entries.push(KbEntry {
                pattern,
                wildcard,
                effect,
                returns,
            });
        }
        Ok(Self { entries })
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_KB).expect("embedded knowledge base is well formed")
    }

    /// Appends `other`; its entries override equal patterns already present.
    pub fn extend(&mut self, other: ApiKnowledgeBase) {
        self.entries.extend(other.entries);
    }

    pub fn entries(&self) -> &[KbEntry] {
        &self.entries
    }

    /// Longest-prefix match. A later entry with the same pattern overrides
    /// an earlier one.
    pub fn lookup(&self, qn: &QualifiedName) -> Option<&KbEntry> {
        self.lookup_index(qn).map(|i| &self.entries[i])
    }

    pub fn lookup_index(&self, qn: &QualifiedName) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, entry) in self.entries.iter().enumerate() {
            let matches = if entry.wildcard {
                qn.len() > entry.pattern.len() && qn.starts_with(&entry.pattern)
            } else {
                *qn == entry.pattern
            };
            if matches && best.is_none_or(|b| entry.pattern.len() >= self.entries[b].pattern.len()) {
                best = Some(i);
            }
        }
        best
    }

    pub fn entry(&self, index: usize) -> &KbEntry {
        &self.entries[index]
    }
}
