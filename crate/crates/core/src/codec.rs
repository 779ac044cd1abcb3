// SPDX-License-Identifier: Apache-2.0

//! Deterministic CBOR-style encoding.
//!
//! Every signed or hashed structure in the lab goes through this codec, so the
//! rules are strict in both directions:
//!
//! - integers use the shortest head form,
//! - all lengths are definite,
//! - map keys are text strings, sorted by the bytewise order of their encoded
//!   form (shorter keys first), with no duplicates,
//! - floats are always IEEE-754 binary64 (`0xfb`).
//!
//! The decoder rejects anything the encoder would not have produced, which
//! makes `encode` injective and `encode(decode(b)) == b` for every accepted `b`.

use std::collections::BTreeMap;

use thiserror::Error;

const MAX_DEPTH: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("unexpected end of input at offset {0}")]
    Truncated(usize),
    #[error("{0} trailing bytes after value")]
    TrailingBytes(usize),
    #[error("non-canonical encoding at offset {0}")]
    NonCanonical(usize),
    #[error("unsupported major type or simple value {0:#04x}")]
    Unsupported(u8),
    #[error("map keys out of order or duplicated at offset {0}")]
    KeyOrder(usize),
    #[error("invalid utf-8 in text string")]
    InvalidUtf8,
    #[error("nesting deeper than {MAX_DEPTH}")]
    TooDeep,
    #[error("expected {expected}, found {found}")]
    Type {
        expected: &'static str,
        found: &'static str,
    },
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("invalid value for `{field}`: {reason}")]
    InvalidField { field: &'static str, reason: String },
}

/// A decoded value. Map keys are always text.
#[derive(Debug, Clone)]
pub enum Value {
    Unsigned(u64),
    /// Encodes the integer `-1 - n`.
    Negative(u64),
    Bytes(Vec<u8>),
    Text(String),
    Array(Vec<Value>),
    Map(BTreeMap<String, Value>),
    Float(f64),
    Bool(bool),
    Null,
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        use Value::*;
        match (self, other) {
            (Unsigned(a), Unsigned(b)) | (Negative(a), Negative(b)) => a == b,
            (Bytes(a), Bytes(b)) => a == b,
            (Text(a), Text(b)) => a == b,
            (Array(a), Array(b)) => a == b,
            (Map(a), Map(b)) => a == b,
            (Float(a), Float(b)) => a.to_bits() == b.to_bits(),
            (Bool(a), Bool(b)) => a == b,
            (Null, Null) => true,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Value {
    pub fn int(v: i64) -> Value {
        if v >= 0 {
            Value::Unsigned(v as u64)
        } else {
            Value::Negative(!(v as u64))
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Value::Unsigned(_) | Value::Negative(_) => "integer",
            Value::Bytes(_) => "bytes",
            Value::Text(_) => "text",
            Value::Array(_) => "array",
            Value::Map(_) => "map",
            Value::Float(_) => "float",
            Value::Bool(_) => "bool",
            Value::Null => "null",
        }
    }

    pub fn as_i64(&self) -> Result<i64, CodecError> {
        match *self {
            Value::Unsigned(n) if n <= i64::MAX as u64 => Ok(n as i64),
            Value::Negative(n) if n <= i64::MAX as u64 => Ok(!(n as i64)),
            _ => Err(self.type_error("i64")),
        }
    }

    pub fn as_u64(&self) -> Result<u64, CodecError> {
        match *self {
            Value::Unsigned(n) => Ok(n),
            _ => Err(self.type_error("u64")),
        }
    }

    pub fn into_bytes(self) -> Result<Vec<u8>, CodecError> {
        match self {
            Value::Bytes(b) => Ok(b),
            other => Err(other.type_error("bytes")),
        }
    }

    pub fn into_text(self) -> Result<String, CodecError> {
        match self {
            Value::Text(s) => Ok(s),
            other => Err(other.type_error("text")),
        }
    }

    pub fn into_array(self) -> Result<Vec<Value>, CodecError> {
        match self {
            Value::Array(a) => Ok(a),
            other => Err(other.type_error("array")),
        }
    }

    pub fn into_map(self) -> Result<BTreeMap<String, Value>, CodecError> {
        match self {
            Value::Map(m) => Ok(m),
            other => Err(other.type_error("map")),
        }
    }

    fn type_error(&self, expected: &'static str) -> CodecError {
        CodecError::Type {
            expected,
            found: self.kind(),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_owned())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

impl From<&[u8]> for Value {
    fn from(b: &[u8]) -> Self {
        Value::Bytes(b.to_vec())
    }
}

impl From<u64> for Value {
    fn from(n: u64) -> Self {
        Value::Unsigned(n)
    }
}

impl From<i64> for Value {
    fn from(n: i64) -> Self {
        Value::int(n)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

/// Types with a canonical byte representation.
pub trait Canonical: Sized {
    fn to_value(&self) -> Value;
    fn from_value(value: Value) -> Result<Self, CodecError>;

    fn canonical_bytes(&self) -> Vec<u8> {
        encode(&self.to_value())
    }

    fn from_canonical_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        Self::from_value(decode(bytes)?)
    }
}

impl<T: Canonical> Canonical for Vec<T> {
    fn to_value(&self) -> Value {
        Value::Array(self.iter().map(Canonical::to_value).collect())
    }

    fn from_value(value: Value) -> Result<Self, CodecError> {
        value.into_array()?.into_iter().map(T::from_value).collect()
    }
}

/// Builds a map value field by field.
#[derive(Default)]
pub struct MapBuilder(BTreeMap<String, Value>);

impl MapBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn field(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.0.insert(key.to_owned(), value.into());
        self
    }

    pub fn optional(self, key: &str, value: Option<impl Into<Value>>) -> Self {
        match value {
            Some(v) => self.field(key, v),
            None => self,
        }
    }

    pub fn build(self) -> Value {
        Value::Map(self.0)
    }
}

/// Strict field extraction from a decoded map. `finish` rejects leftovers.
pub struct MapReader {
    fields: BTreeMap<String, Value>,
}

impl MapReader {
    pub fn new(value: Value) -> Result<Self, CodecError> {
        Ok(Self {
            fields: value.into_map()?,
        })
    }

    pub fn take(&mut self, key: &'static str) -> Result<Value, CodecError> {
        self.fields
            .remove(key)
            .ok_or(CodecError::MissingField(key))
    }

    pub fn take_optional(&mut self, key: &'static str) -> Option<Value> {
        self.fields.remove(key)
    }

    pub fn i64(&mut self, key: &'static str) -> Result<i64, CodecError> {
        self.take(key)?.as_i64()
    }

    pub fn u64(&mut self, key: &'static str) -> Result<u64, CodecError> {
        self.take(key)?.as_u64()
    }

    pub fn text(&mut self, key: &'static str) -> Result<String, CodecError> {
        self.take(key)?.into_text()
    }

    pub fn bytes(&mut self, key: &'static str) -> Result<Vec<u8>, CodecError> {
        self.take(key)?.into_bytes()
    }

    pub fn decode<T: Canonical>(&mut self, key: &'static str) -> Result<T, CodecError> {
        T::from_value(self.take(key)?)
    }

    pub fn decode_optional<T: Canonical>(
        &mut self,
        key: &'static str,
    ) -> Result<Option<T>, CodecError> {
        self.take_optional(key).map(T::from_value).transpose()
    }

    pub fn finish(self) -> Result<(), CodecError> {
        match self.fields.into_keys().next() {
            Some(key) => Err(CodecError::UnknownField(key)),
            None => Ok(()),
        }
    }
}

pub fn encode(value: &Value) -> Vec<u8> {
    let mut out = Vec::new();
    encode_into(value, &mut out);
    out
}

fn write_head(major: u8, n: u64, out: &mut Vec<u8>) {
    let m = major << 5;
    if n < 24 {
        out.push(m | n as u8);
    } else if n <= u8::MAX as u64 {
        out.push(m | 24);
        out.push(n as u8);
    } else if n <= u16::MAX as u64 {
        out.push(m | 25);
        out.extend_from_slice(&(n as u16).to_be_bytes());
    } else if n <= u32::MAX as u64 {
        out.push(m | 26);
        out.extend_from_slice(&(n as u32).to_be_bytes());
    } else {
        out.push(m | 27);
        out.extend_from_slice(&n.to_be_bytes());
    }
}

fn encode_into(value: &Value, out: &mut Vec<u8>) {
    match value {
        Value::Unsigned(n) => write_head(0, *n, out),
        Value::Negative(n) => write_head(1, *n, out),
        Value::Bytes(b) => {
            write_head(2, b.len() as u64, out);
            out.extend_from_slice(b);
        }
        Value::Text(s) => {
            write_head(3, s.len() as u64, out);
            out.extend_from_slice(s.as_bytes());
        }
        Value::Array(items) => {
            write_head(4, items.len() as u64, out);
            for item in items {
                encode_into(item, out);
            }
        }
        Value::Map(map) => {
            let mut entries: Vec<(Vec<u8>, &Value)> = map
                .iter()
                .map(|(k, v)| (encode(&Value::Text(k.clone())), v))
                .collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            write_head(5, entries.len() as u64, out);
            for (key, v) in entries {
                out.extend_from_slice(&key);
                encode_into(v, out);
            }
        }
        Value::Float(f) => {
            out.push(0xfb);
            out.extend_from_slice(&f.to_bits().to_be_bytes());
        }
        Value::Bool(false) => out.push(0xf4),
        Value::Bool(true) => out.push(0xf5),
        Value::Null => out.push(0xf6),
    }
}

pub fn decode(bytes: &[u8]) -> Result<Value, CodecError> {
    let mut decoder = Decoder { input: bytes, pos: 0 };
    let value = decoder.value(0)?;
    match bytes.len() - decoder.pos {
        0 => Ok(value),
        n => Err(CodecError::TrailingBytes(n)),
    }
}

struct Decoder<'a> {
    input: &'a [u8],
    pos: usize,
}

impl Decoder<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], CodecError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.input.len())
            .ok_or(CodecError::Truncated(self.pos))?;
        let slice = &self.input[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn head(&mut self) -> Result<(u8, u8, u64), CodecError> {
        let start = self.pos;
        let initial = self.take(1)?[0];
        let major = initial >> 5;
        let info = initial & 0x1f;
        if major == 7 {
            return Ok((major, info, 0));
        }
        let n = match info {
            0..=23 => info as u64,
            24 => self.take(1)?[0] as u64,
            25 => u16::from_be_bytes(self.take(2)?.try_into().unwrap()) as u64,
            26 => u32::from_be_bytes(self.take(4)?.try_into().unwrap()) as u64,
            27 => u64::from_be_bytes(self.take(8)?.try_into().unwrap()),
            _ => return Err(CodecError::Unsupported(initial)),
        };
        let minimal = match info {
            24 => n >= 24,
            25 => n > u8::MAX as u64,
            26 => n > u16::MAX as u64,
            27 => n > u32::MAX as u64,
            _ => true,
        };
        if !minimal {
            return Err(CodecError::NonCanonical(start));
        }
        Ok((major, info, n))
    }

    fn length(&self, n: u64) -> Result<usize, CodecError> {
        // Every element occupies at least one byte, so no declared length can
        // exceed what is left of the input.
        let remaining = (self.input.len() - self.pos) as u64;
        if n > remaining {
            return Err(CodecError::Truncated(self.pos));
        }
        Ok(n as usize)
    }

    fn value(&mut self, depth: usize) -> Result<Value, CodecError> {
        if depth > MAX_DEPTH {
            return Err(CodecError::TooDeep);
        }
        let start = self.pos;
        let (major, info, n) = self.head()?;
        match major {
            0 => Ok(Value::Unsigned(n)),
            1 => Ok(Value::Negative(n)),
            2 => {
                let len = self.length(n)?;
                Ok(Value::Bytes(self.take(len)?.to_vec()))
            }
            3 => {
                let len = self.length(n)?;
                let raw = self.take(len)?;
                String::from_utf8(raw.to_vec())
                    .map(Value::Text)
                    .map_err(|_| CodecError::InvalidUtf8)
            }
            4 => {
                let len = self.length(n)?;
                let mut items = Vec::with_capacity(len);
                for _ in 0..len {
                    items.push(self.value(depth + 1)?);
                }
                Ok(Value::Array(items))
            }
            5 => {
                let len = self.length(n)?;
                let mut map = BTreeMap::new();
                let mut previous: Option<&[u8]> = None;
                for _ in 0..len {
                    let key_start = self.pos;
                    let key = match self.value(depth + 1)? {
                        Value::Text(k) => k,
                        other => {
                            return Err(CodecError::Type {
                                expected: "text key",
                                found: other.kind(),
                            })
                        }
                    };
                    let encoded_key = &self.input[key_start..self.pos];
                    if previous.is_some_and(|p| p >= encoded_key) {
                        return Err(CodecError::KeyOrder(key_start));
                    }
                    previous = Some(encoded_key);
                    let value = self.value(depth + 1)?;
                    map.insert(key, value);
                }
                Ok(Value::Map(map))
            }
            7 => match info {
                20 => Ok(Value::Bool(false)),
                21 => Ok(Value::Bool(true)),
                22 => Ok(Value::Null),
                27 => {
                    let bits = u64::from_be_bytes(self.take(8)?.try_into().unwrap());
                    Ok(Value::Float(f64::from_bits(bits)))
                }
                _ => Err(CodecError::Unsupported(self.input[start])),
            },
            // tags (major 6) are not part of the format
            _ => Err(CodecError::Unsupported(self.input[start])),
        }
    }
}
