//! Minimal strict DER encoder/decoder.
//!
//! The tag set is closed: anything outside [`DerValue`] is rejected on decode.
//! Accepted input always re-encodes byte-for-byte, which is what signature
//! verification over re-encoded structures relies on.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::time::GeneralizedTime;

pub const MAX_DEPTH: usize = 32;
pub const MAX_ELEMENT_LEN: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DerError {
    #[error("input truncated")]
    Truncated,
    #[error("length not minimally encoded")]
    NonMinimalLength,
    #[error("integer not minimally encoded")]
    NonMinimalInteger,
    #[error("indefinite length not allowed in DER")]
    IndefiniteLength,
    #[error("trailing bytes after value")]
    TrailingGarbage,
    #[error("unsupported tag 0x{0:02x}")]
    UnknownTag(u8),
    #[error("nesting deeper than {MAX_DEPTH}")]
    TooDeep,
    #[error("element length {0} exceeds limit")]
    TooLong(usize),
    #[error("non-canonical encoding: {0}")]
    NonCanonical(&'static str),
    #[error("invalid value: {0}")]
    InvalidValue(String),
}

/// Object identifier, stored as its arcs.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Oid(Vec<u64>);

impl Oid {
    pub fn new(arcs: Vec<u64>) -> Result<Self, DerError> {
        let ok = arcs.len() >= 2
            && arcs[0] <= 2
            && (arcs[0] == 2 || arcs[1] < 40)
            && arcs[0]
                .checked_mul(40)
                .and_then(|v| v.checked_add(arcs[1]))
                .is_some();
        if ok {
            Ok(Self(arcs))
        } else {
            Err(DerError::InvalidValue(format!(
                "bad object identifier arcs {arcs:?}"
            )))
        }
    }

    /// For compile-time-known identifiers. Panics on invalid arcs.
    pub fn from_arcs(arcs: &[u64]) -> Self {
        Self::new(arcs.to_vec()).expect("static OID is valid")
    }

    pub fn arcs(&self) -> &[u64] {
        &self.0
    }

    /// `self` extended by one more arc.
    pub fn child(&self, arc: u64) -> Self {
        let mut arcs = self.0.clone();
        arcs.push(arc);
        Self(arcs)
    }
}

impl fmt::Display for Oid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, arc) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{arc}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Oid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Oid({self})")
    }
}

impl FromStr for Oid {
    type Err = DerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let arcs = s
            .trim()
            .split('.')
            .map(|a| a.parse::<u64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| DerError::InvalidValue(format!("bad object identifier {s:?}")))?;
        Self::new(arcs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitString {
    pub bytes: Vec<u8>,
    pub unused_bits: u8,
}

impl BitString {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Self {
            bytes,
            unused_bits: 0,
        }
    }

    /// Named-bit-list encoding: bit 0 is the MSB of the first octet, trailing zero bits dropped.
    pub fn from_flags(bits: u16) -> Self {
        if bits == 0 {
            return Self {
                bytes: Vec::new(),
                unused_bits: 0,
            };
        }
        let mut rev = 0u16;
        for i in 0..16 {
            if bits & (1 << i) != 0 {
                rev |= 1 << (15 - i);
            }
        }
        let highest = 15 - bits.leading_zeros() as u8; // index of last set bit
        let nbytes = highest as usize / 8 + 1;
        let bytes = rev.to_be_bytes()[..nbytes].to_vec();
        let unused_bits = (nbytes as u8 * 8) - highest - 1;
        Self { bytes, unused_bits }
    }

    pub fn to_flags(&self) -> u16 {
        let mut bits = 0u16;
        for (i, byte) in self.bytes.iter().take(2).enumerate() {
            for j in 0..8 {
                if byte & (0x80 >> j) != 0 {
                    bits |= 1 << (i * 8 + j);
                }
            }
        }
        bits
    }
}

/// A decoded DER value from the supported tag subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DerValue {
    Boolean(bool),
    Integer(BigInt),
    OctetString(Vec<u8>),
    BitString(BitString),
    Null,
    Oid(Oid),
    Utf8String(String),
    PrintableString(String),
    GeneralizedTime(GeneralizedTime),
    Sequence(Vec<DerValue>),
    /// SET OF; elements are emitted sorted by their encodings.
    Set(Vec<DerValue>),
    /// Context-specific tag. An implicit tag always wraps an `OctetString`
    /// carrying the raw primitive contents.
    Tagged {
        number: u8,
        explicit: bool,
        inner: Box<DerValue>,
    },
}

const TAG_BOOLEAN: u8 = 0x01;
const TAG_INTEGER: u8 = 0x02;
const TAG_BIT_STRING: u8 = 0x03;
const TAG_OCTET_STRING: u8 = 0x04;
const TAG_NULL: u8 = 0x05;
const TAG_OID: u8 = 0x06;
const TAG_UTF8: u8 = 0x0c;
const TAG_PRINTABLE: u8 = 0x13;
const TAG_GENERALIZED_TIME: u8 = 0x18;
const TAG_SEQUENCE: u8 = 0x30;
const TAG_SET: u8 = 0x31;
const CONTEXT: u8 = 0x80;
const CONSTRUCTED: u8 = 0x20;
const MAX_TAG_NUMBER: u8 = 30;

pub fn is_printable(s: &str) -> bool {
    s.bytes()
        .all(|b| b.is_ascii_alphanumeric() || b" '()+,-./:=?".contains(&b))
}

impl DerValue {
    pub fn int(v: i64) -> Self {
        DerValue::Integer(BigInt::from(v))
    }

    pub fn uint(v: u64) -> Self {
        DerValue::Integer(BigInt::from(v))
    }

    pub fn explicit(number: u8, inner: DerValue) -> Self {
        DerValue::Tagged {
            number,
            explicit: true,
            inner: Box::new(inner),
        }
    }

    pub fn implicit(number: u8, contents: Vec<u8>) -> Self {
        DerValue::Tagged {
            number,
            explicit: false,
            inner: Box::new(DerValue::OctetString(contents)),
        }
    }

    pub fn utf8(s: impl Into<String>) -> Self {
        DerValue::Utf8String(s.into())
    }

    /// Identifier octet.
    pub fn tag(&self) -> u8 {
        match self {
            DerValue::Boolean(_) => TAG_BOOLEAN,
            DerValue::Integer(_) => TAG_INTEGER,
            DerValue::OctetString(_) => TAG_OCTET_STRING,
            DerValue::BitString(_) => TAG_BIT_STRING,
            DerValue::Null => TAG_NULL,
            DerValue::Oid(_) => TAG_OID,
            DerValue::Utf8String(_) => TAG_UTF8,
            DerValue::PrintableString(_) => TAG_PRINTABLE,
            DerValue::GeneralizedTime(_) => TAG_GENERALIZED_TIME,
            DerValue::Sequence(_) => TAG_SEQUENCE,
            DerValue::Set(_) => TAG_SET,
            DerValue::Tagged {
                number,
                explicit: true,
                ..
            } => CONTEXT | CONSTRUCTED | number,
            DerValue::Tagged {
                number,
                explicit: false,
                ..
            } => CONTEXT | number,
        }
    }

    /// Same value with every SET's elements in canonical order, i.e. what
    /// `decode(encode(self))` yields.
    pub fn canonical(&self) -> Result<DerValue, DerError> {
        Ok(match self {
            DerValue::Sequence(items) => DerValue::Sequence(
                items
                    .iter()
                    .map(DerValue::canonical)
                    .collect::<Result<_, _>>()?,
            ),
            DerValue::Set(items) => {
                let mut encoded = items
                    .iter()
                    .map(|v| Ok((encode(v)?, v.canonical()?)))
                    .collect::<Result<Vec<_>, DerError>>()?;
                encoded.sort_by(|a, b| a.0.cmp(&b.0));
                DerValue::Set(encoded.into_iter().map(|(_, v)| v).collect())
            }
            DerValue::Tagged {
                number,
                explicit,
                inner,
            } => DerValue::Tagged {
                number: *number,
                explicit: *explicit,
                inner: Box::new(inner.canonical()?),
            },
            other => other.clone(),
        })
    }

    pub fn as_u64(&self) -> Option<u64> {
        match self {
            DerValue::Integer(i) => i.to_u64(),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            DerValue::Integer(i) => i.to_i64(),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            DerValue::Boolean(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_oid(&self) -> Option<&Oid> {
        match self {
            DerValue::Oid(o) => Some(o),
            _ => None,
        }
    }

    pub fn as_octets(&self) -> Option<&[u8]> {
        match self {
            DerValue::OctetString(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_bit_string(&self) -> Option<&BitString> {
        match self {
            DerValue::BitString(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_time(&self) -> Option<GeneralizedTime> {
        match self {
            DerValue::GeneralizedTime(t) => Some(*t),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            DerValue::Utf8String(s) | DerValue::PrintableString(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_sequence(&self) -> Option<&[DerValue]> {
        match self {
            DerValue::Sequence(items) => Some(items),
            _ => None,
        }
    }

    pub fn as_set(&self) -> Option<&[DerValue]> {
        match self {
            DerValue::Set(items) => Some(items),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Encoding

pub fn encode(value: &DerValue) -> Result<Vec<u8>, DerError> {
    let mut out = Vec::new();
    encode_into(value, &mut out, 1)?;
    Ok(out)
}

fn push_length(len: usize, out: &mut Vec<u8>) {
    if len < 0x80 {
        out.push(len as u8);
    } else {
        let bytes = (len as u64).to_be_bytes();
        let skip = bytes.iter().take_while(|b| **b == 0).count();
        out.push(0x80 | (8 - skip) as u8);
        out.extend_from_slice(&bytes[skip..]);
    }
}

fn encode_into(value: &DerValue, out: &mut Vec<u8>, depth: usize) -> Result<(), DerError> {
    if depth > MAX_DEPTH {
        return Err(DerError::InvalidValue("nesting too deep".into()));
    }
    let content = content_octets(value, depth)?;
    if content.len() > MAX_ELEMENT_LEN {
        return Err(DerError::TooLong(content.len()));
    }
    out.push(value.tag());
    push_length(content.len(), out);
    out.extend_from_slice(&content);
    Ok(())
}

fn content_octets(value: &DerValue, depth: usize) -> Result<Vec<u8>, DerError> {
    Ok(match value {
        DerValue::Boolean(b) => vec![if *b { 0xff } else { 0x00 }],
        DerValue::Integer(i) => i.to_signed_bytes_be(),
        DerValue::OctetString(b) => b.clone(),
        DerValue::BitString(bs) => {
            if bs.unused_bits > 7 {
                return Err(DerError::InvalidValue(format!(
                    "{} unused bits",
                    bs.unused_bits
                )));
            }
            if bs.bytes.is_empty() && bs.unused_bits != 0 {
                return Err(DerError::InvalidValue(
                    "unused bits in empty bit string".into(),
                ));
            }
            if let Some(last) = bs.bytes.last() {
                if last & ((1u8 << bs.unused_bits) - 1) != 0 {
                    return Err(DerError::InvalidValue("nonzero padding bits".into()));
                }
            }
            let mut c = Vec::with_capacity(bs.bytes.len() + 1);
            c.push(bs.unused_bits);
            c.extend_from_slice(&bs.bytes);
            c
        }
        DerValue::Null => Vec::new(),
        DerValue::Oid(oid) => encode_oid(oid)?,
        DerValue::Utf8String(s) => s.as_bytes().to_vec(),
        DerValue::PrintableString(s) => {
            if !is_printable(s) {
                return Err(DerError::InvalidValue(format!(
                    "not a PrintableString: {s:?}"
                )));
            }
            s.as_bytes().to_vec()
        }
        DerValue::GeneralizedTime(t) => t.to_der_string().into_bytes(),
        DerValue::Sequence(items) => {
            let mut c = Vec::new();
            for item in items {
                encode_into(item, &mut c, depth + 1)?;
            }
            c
        }
        DerValue::Set(items) => {
            let mut encoded = Vec::with_capacity(items.len());
            for item in items {
                let mut e = Vec::new();
                encode_into(item, &mut e, depth + 1)?;
                encoded.push(e);
            }
            encoded.sort();
            encoded.concat()
        }
        DerValue::Tagged {
            number,
            explicit,
            inner,
        } => {
            if *number > MAX_TAG_NUMBER {
                return Err(DerError::InvalidValue(format!(
                    "tag number {number} needs high-tag form"
                )));
            }
            if *explicit {
                let mut c = Vec::new();
                encode_into(inner, &mut c, depth + 1)?;
                c
            } else {
                match inner.as_ref() {
                    DerValue::OctetString(raw) => raw.clone(),
                    _ => {
                        return Err(DerError::InvalidValue(
                            "implicit tag must wrap raw contents".into(),
                        ))
                    }
                }
            }
        }
    })
}

fn encode_oid(oid: &Oid) -> Result<Vec<u8>, DerError> {
    let arcs = oid.arcs();
    let Ok(oid) = Oid::new(arcs.to_vec()) else {
        return Err(DerError::InvalidValue(format!(
            "bad object identifier {arcs:?}"
        )));
    };
    let arcs = oid.arcs();
    let mut out = Vec::new();
    let first = arcs[0] * 40 + arcs[1];
    for arc in std::iter::once(first).chain(arcs[2..].iter().copied()) {
        let mut groups = vec![(arc & 0x7f) as u8];
        let mut rest = arc >> 7;
        while rest > 0 {
            groups.push(0x80 | (rest & 0x7f) as u8);
            rest >>= 7;
        }
        out.extend(groups.iter().rev());
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Decoding

/// Decodes one value from the front of `input`, returning it and the number of bytes consumed.
pub fn decode(input: &[u8]) -> Result<(DerValue, usize), DerError> {
    decode_at(input, 1)
}

/// Decodes a complete message: exactly one value and nothing after it.
pub fn decode_all(input: &[u8]) -> Result<DerValue, DerError> {
    let (value, used) = decode(input)?;
    if used != input.len() {
        return Err(DerError::TrailingGarbage);
    }
    Ok(value)
}

fn read_header(input: &[u8]) -> Result<(u8, usize, usize), DerError> {
    let tag = *input.first().ok_or(DerError::Truncated)?;
    let first = *input.get(1).ok_or(DerError::Truncated)?;
    let (len, header) = if first < 0x80 {
        (first as usize, 2)
    } else if first == 0x80 {
        return Err(DerError::IndefiniteLength);
    } else {
        let n = (first & 0x7f) as usize;
        if n > 4 {
            return Err(DerError::TooLong(usize::MAX));
        }
        let bytes = input.get(2..2 + n).ok_or(DerError::Truncated)?;
        if bytes[0] == 0 {
            return Err(DerError::NonMinimalLength);
        }
        let len = bytes.iter().fold(0usize, |acc, b| (acc << 8) | *b as usize);
        if len < 0x80 {
            return Err(DerError::NonMinimalLength);
        }
        (len, 2 + n)
    };
    if len > MAX_ELEMENT_LEN {
        return Err(DerError::TooLong(len));
    }
    Ok((tag, len, header))
}

fn decode_at(input: &[u8], depth: usize) -> Result<(DerValue, usize), DerError> {
    if depth > MAX_DEPTH {
        return Err(DerError::TooDeep);
    }
    let (tag, len, header) = read_header(input)?;
    let content = input.get(header..header + len).ok_or(DerError::Truncated)?;
    let value = match tag {
        TAG_BOOLEAN => match content {
            [0x00] => DerValue::Boolean(false),
            [0xff] => DerValue::Boolean(true),
            [_] => return Err(DerError::NonCanonical("boolean must be 00 or ff")),
            _ => return Err(DerError::NonCanonical("boolean length")),
        },
        TAG_INTEGER => DerValue::Integer(decode_integer(content)?),
        TAG_BIT_STRING => {
            let (&unused, bytes) = content
                .split_first()
                .ok_or(DerError::NonCanonical("empty bit string"))?;
            if unused > 7 || (bytes.is_empty() && unused != 0) {
                return Err(DerError::NonCanonical("bit string unused-bit count"));
            }
            if let Some(last) = bytes.last() {
                if last & ((1u8 << unused) - 1) != 0 {
                    return Err(DerError::NonCanonical("bit string padding"));
                }
            }
            DerValue::BitString(BitString {
                bytes: bytes.to_vec(),
                unused_bits: unused,
            })
        }
        TAG_OCTET_STRING => DerValue::OctetString(content.to_vec()),
        TAG_NULL => {
            if !content.is_empty() {
                return Err(DerError::NonCanonical("null with content"));
            }
            DerValue::Null
        }
        TAG_OID => DerValue::Oid(decode_oid(content)?),
        TAG_UTF8 => DerValue::Utf8String(
            std::str::from_utf8(content)
                .map_err(|_| DerError::InvalidValue("invalid UTF-8".into()))?
                .to_string(),
        ),
        TAG_PRINTABLE => {
            let s = std::str::from_utf8(content)
                .map_err(|_| DerError::InvalidValue("non-ASCII".into()))?;
            if !is_printable(s) {
                return Err(DerError::InvalidValue("not a PrintableString".into()));
            }
            DerValue::PrintableString(s.to_string())
        }
        TAG_GENERALIZED_TIME => {
            let s = std::str::from_utf8(content)
                .map_err(|_| DerError::InvalidValue("time not ASCII".into()))?;
            DerValue::GeneralizedTime(
                GeneralizedTime::parse_der_string(s)
                    .map_err(|e| DerError::InvalidValue(e.to_string()))?,
            )
        }
        TAG_SEQUENCE => DerValue::Sequence(decode_children(content, depth)?.0),
        TAG_SET => {
            let (items, spans) = decode_children(content, depth)?;
            if spans
                .windows(2)
                .any(|w| content[w[0].clone()] > content[w[1].clone()])
            {
                return Err(DerError::NonCanonical("SET OF elements not sorted"));
            }
            DerValue::Set(items)
        }
        t if t & 0xc0 == CONTEXT && (t & 0x1f) <= MAX_TAG_NUMBER => {
            let number = t & 0x1f;
            if t & CONSTRUCTED != 0 {
                let (inner, used) = decode_at(content, depth + 1)?;
                if used != content.len() {
                    return Err(DerError::NonCanonical(
                        "explicit tag must wrap exactly one value",
                    ));
                }
                DerValue::explicit(number, inner)
            } else {
                DerValue::implicit(number, content.to_vec())
            }
        }
        other => return Err(DerError::UnknownTag(other)),
    };
    Ok((value, header + len))
}

type Span = std::ops::Range<usize>;

fn decode_children(content: &[u8], depth: usize) -> Result<(Vec<DerValue>, Vec<Span>), DerError> {
    let mut items = Vec::new();
    let mut spans = Vec::new();
    let mut pos = 0;
    while pos < content.len() {
        let (item, used) = decode_at(&content[pos..], depth + 1)?;
        items.push(item);
        spans.push(pos..pos + used);
        pos += used;
    }
    Ok((items, spans))
}

fn decode_integer(content: &[u8]) -> Result<BigInt, DerError> {
    match content {
        [] => Err(DerError::NonCanonical("empty integer")),
        [0x00, b, ..] if b & 0x80 == 0 => Err(DerError::NonMinimalInteger),
        [0xff, b, ..] if b & 0x80 != 0 => Err(DerError::NonMinimalInteger),
        _ => Ok(BigInt::from_signed_bytes_be(content)),
    }
}

fn decode_oid(content: &[u8]) -> Result<Oid, DerError> {
    if content.is_empty() {
        return Err(DerError::NonCanonical("empty object identifier"));
    }
    let mut subids = Vec::new();
    let mut acc: u64 = 0;
    let mut fresh = true;
    for &b in content {
        if fresh && b == 0x80 {
            return Err(DerError::NonCanonical(
                "object identifier arc has leading 0x80",
            ));
        }
        if acc > (u64::MAX >> 7) {
            return Err(DerError::InvalidValue(
                "object identifier arc overflows".into(),
            ));
        }
        acc = (acc << 7) | (b & 0x7f) as u64;
        fresh = b & 0x80 == 0;
        if fresh {
            subids.push(acc);
            acc = 0;
        }
    }
    if !fresh {
        return Err(DerError::Truncated);
    }
    let first = subids[0];
    let (a, b) = match first {
        0..=39 => (0, first),
        40..=79 => (1, first - 40),
        _ => (2, first - 80),
    };
    let mut arcs = vec![a, b];
    arcs.extend_from_slice(&subids[1..]);
    Oid::new(arcs)
}

// ---------------------------------------------------------------------------
// Structure helpers used by the message and certificate parsers.

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("structure mismatch: {0}")]
pub struct Mismatch(pub String);

pub fn mismatch(what: impl Into<String>) -> Mismatch {
    Mismatch(what.into())
}

/// Cursor over the elements of a SEQUENCE.
pub struct Fields<'a> {
    items: &'a [DerValue],
    pos: usize,
    context: &'static str,
}

impl<'a> Fields<'a> {
    pub fn of(value: &'a DerValue, context: &'static str) -> Result<Self, Mismatch> {
        let items = value
            .as_sequence()
            .ok_or_else(|| mismatch(format!("{context}: expected SEQUENCE")))?;
        Ok(Self {
            items,
            pos: 0,
            context,
        })
    }

    pub fn next(&mut self, what: &str) -> Result<&'a DerValue, Mismatch> {
        let item = self
            .items
            .get(self.pos)
            .ok_or_else(|| mismatch(format!("{}: missing {what}", self.context)))?;
        self.pos += 1;
        Ok(item)
    }

    pub fn peek(&self) -> Option<&'a DerValue> {
        self.items.get(self.pos)
    }

    /// Consumes the next element if it carries the given explicit context tag.
    pub fn explicit(&mut self, number: u8) -> Option<&'a DerValue> {
        match self.peek() {
            Some(DerValue::Tagged {
                number: n,
                explicit: true,
                inner,
            }) if *n == number => {
                self.pos += 1;
                Some(inner)
            }
            _ => None,
        }
    }

    /// Consumes the next element if it carries the given implicit context tag.
    pub fn implicit(&mut self, number: u8) -> Option<&'a [u8]> {
        match self.peek() {
            Some(DerValue::Tagged {
                number: n,
                explicit: false,
                inner,
            }) if *n == number => {
                self.pos += 1;
                inner.as_octets()
            }
            _ => None,
        }
    }

    /// Consumes a BOOLEAN encoded only when TRUE (DEFAULT FALSE).
    pub fn default_false(&mut self, what: &str) -> Result<bool, Mismatch> {
        match self.peek() {
            Some(DerValue::Boolean(true)) => {
                self.pos += 1;
                Ok(true)
            }
            Some(DerValue::Boolean(false)) => Err(mismatch(format!(
                "{}: {what} FALSE must be omitted",
                self.context
            ))),
            _ => Ok(false),
        }
    }

    pub fn finish(&self) -> Result<(), Mismatch> {
        if self.pos == self.items.len() {
            Ok(())
        } else {
            Err(mismatch(format!(
                "{}: unexpected trailing fields",
                self.context
            )))
        }
    }

    pub fn oid(&mut self, what: &str) -> Result<&'a Oid, Mismatch> {
        let ctx = self.context;
        self.next(what)?
            .as_oid()
            .ok_or_else(|| mismatch(format!("{ctx}: {what} must be an OID")))
    }

    pub fn u64(&mut self, what: &str) -> Result<u64, Mismatch> {
        let ctx = self.context;
        self.next(what)?
            .as_u64()
            .ok_or_else(|| mismatch(format!("{ctx}: {what} must be a non-negative INTEGER")))
    }

    pub fn i64(&mut self, what: &str) -> Result<i64, Mismatch> {
        let ctx = self.context;
        self.next(what)?
            .as_i64()
            .ok_or_else(|| mismatch(format!("{ctx}: {what} must be an INTEGER")))
    }

    pub fn time(&mut self, what: &str) -> Result<GeneralizedTime, Mismatch> {
        let ctx = self.context;
        self.next(what)?
            .as_time()
            .ok_or_else(|| mismatch(format!("{ctx}: {what} must be GeneralizedTime")))
    }

    pub fn octets(&mut self, what: &str) -> Result<&'a [u8], Mismatch> {
        let ctx = self.context;
        self.next(what)?
            .as_octets()
            .ok_or_else(|| mismatch(format!("{ctx}: {what} must be an OCTET STRING")))
    }

    pub fn sequence(&mut self, what: &str) -> Result<&'a [DerValue], Mismatch> {
        let ctx = self.context;
        self.next(what)?
            .as_sequence()
            .ok_or_else(|| mismatch(format!("{ctx}: {what} must be a SEQUENCE")))
    }
}

/// Non-negative integer from implicit-tag contents.
pub fn implicit_u64(raw: &[u8]) -> Option<u64> {
    let i = decode_integer(raw).ok()?;
    if i.is_negative() {
        None
    } else {
        i.to_u64()
    }
}

pub fn u64_contents(v: u64) -> Vec<u8> {
    BigInt::from(v).to_signed_bytes_be()
}

pub fn is_zero(i: &BigInt) -> bool {
    i.is_zero()
}
