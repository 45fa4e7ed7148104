//! Strict JSON reader and canonical writer.
//!
//! The reader keeps the byte offset of every value so field-level errors can
//! point into the frame, and it rejects duplicate object keys. The writer emits
//! the canonical form: keys sorted, no whitespace, integers without a
//! fractional part, reals with at most six fractional digits and at least one.

use std::collections::BTreeMap;
use std::fmt::Write as _;

const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("at byte {offset}: {reason}")]
pub struct JsonError {
    pub offset: usize,
    pub reason: String,
}

impl JsonError {
    fn new(offset: usize, reason: impl Into<String>) -> Self {
        Self { offset, reason: reason.into() }
    }
}

/// Parsed value with its starting offset in the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub offset: usize,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Bool(bool),
    /// Non-negative integer literal (no fraction, no exponent).
    Int(u64),
    /// Negative integer literal.
    NegInt(i64),
    Real(f64),
    Str(String),
    Array(Vec<Node>),
    /// Members in input order; keys are unique.
    Object(Vec<(String, Node)>),
}

impl Value {
    pub fn kind(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::Bool(_) => "bool",
            Value::Int(_) | Value::NegInt(_) => "integer",
            Value::Real(_) => "real",
            Value::Str(_) => "string",
            Value::Array(_) => "array",
            Value::Object(_) => "object",
        }
    }
}

pub fn parse(input: &[u8]) -> Result<Node, JsonError> {
    let mut p = Parser { input, pos: 0 };
    p.skip_ws();
    let node = p.value(0)?;
    p.skip_ws();
    if p.pos != input.len() {
        return Err(JsonError::new(p.pos, "trailing bytes after value"));
    }
    Ok(node)
}

struct Parser<'a> {
    input: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.input.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, b: u8) -> Result<(), JsonError> {
        match self.peek() {
            Some(c) if c == b => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => Err(JsonError::new(self.pos, format!("expected '{}', found '{}'", b as char, c.escape_ascii()))),
            None => Err(JsonError::new(self.pos, format!("expected '{}', found end of input", b as char))),
        }
    }

    fn literal(&mut self, word: &str, v: Value) -> Result<Value, JsonError> {
        if self.input[self.pos..].starts_with(word.as_bytes()) {
            self.pos += word.len();
            Ok(v)
        } else {
            Err(JsonError::new(self.pos, "invalid literal"))
        }
    }

    fn value(&mut self, depth: usize) -> Result<Node, JsonError> {
        if depth > MAX_DEPTH {
            return Err(JsonError::new(self.pos, "nesting too deep"));
        }
        let offset = self.pos;
        let value = match self.peek() {
            None => return Err(JsonError::new(self.pos, "unexpected end of input")),
            Some(b'{') => self.object(depth)?,
            Some(b'[') => self.array(depth)?,
            Some(b'"') => Value::Str(self.string()?),
            Some(b't') => self.literal("true", Value::Bool(true))?,
            Some(b'f') => self.literal("false", Value::Bool(false))?,
            Some(b'n') => self.literal("null", Value::Null)?,
            Some(b'-' | b'0'..=b'9') => self.number()?,
            Some(c) => return Err(JsonError::new(self.pos, format!("unexpected byte '{}'", c.escape_ascii()))),
        };
        Ok(Node { offset, value })
    }

    fn object(&mut self, depth: usize) -> Result<Value, JsonError> {
        self.expect(b'{')?;
        let mut members: Vec<(String, Node)> = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b'}') {
            self.pos += 1;
            return Ok(Value::Object(members));
        }
        loop {
            self.skip_ws();
            let key_at = self.pos;
            if self.peek() != Some(b'"') {
                return Err(JsonError::new(self.pos, "expected object key"));
            }
            let key = self.string()?;
            if members.iter().any(|(k, _)| *k == key) {
                return Err(JsonError::new(key_at, format!("duplicate key \"{key}\"")));
            }
            self.skip_ws();
            self.expect(b':')?;
            self.skip_ws();
            let v = self.value(depth + 1)?;
            members.push((key, v));
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {
                    self.pos += 1;
                    return Ok(Value::Object(members));
                }
                _ => return Err(JsonError::new(self.pos, "expected ',' or '}'")),
            }
        }
    }

    fn array(&mut self, depth: usize) -> Result<Value, JsonError> {
        self.expect(b'[')?;
        let mut items = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b']') {
            self.pos += 1;
            return Ok(Value::Array(items));
        }
        loop {
            self.skip_ws();
            items.push(self.value(depth + 1)?);
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b']') => {
                    self.pos += 1;
                    return Ok(Value::Array(items));
                }
                _ => return Err(JsonError::new(self.pos, "expected ',' or ']'")),
            }
        }
    }

    fn hex4(&mut self) -> Result<u32, JsonError> {
        let Some(digits) = self.input.get(self.pos..self.pos + 4) else {
            return Err(JsonError::new(self.pos, "truncated \\u escape"));
        };
        let s = std::str::from_utf8(digits).map_err(|_| JsonError::new(self.pos, "invalid \\u escape"))?;
        let v = u32::from_str_radix(s, 16).map_err(|_| JsonError::new(self.pos, "invalid \\u escape"))?;
        if !s.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(JsonError::new(self.pos, "invalid \\u escape"));
        }
        self.pos += 4;
        Ok(v)
    }

    fn string(&mut self) -> Result<String, JsonError> {
        self.expect(b'"')?;
        let mut out = String::new();
        loop {
            let start = self.pos;
            while let Some(c) = self.peek() {
                if c == b'"' || c == b'\\' || c < 0x20 {
                    break;
                }
                self.pos += 1;
            }
            let chunk = std::str::from_utf8(&self.input[start..self.pos])
                .map_err(|e| JsonError::new(start + e.valid_up_to(), "invalid UTF-8"))?;
            out.push_str(chunk);
            match self.peek() {
                None => return Err(JsonError::new(self.pos, "unterminated string")),
                Some(b'"') => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some(b'\\') => {
                    let esc_at = self.pos;
                    self.pos += 1;
                    let Some(e) = self.peek() else {
                        return Err(JsonError::new(self.pos, "unterminated escape"));
                    };
                    self.pos += 1;
                    match e {
                        b'"' => out.push('"'),
                        b'\\' => out.push('\\'),
                        b'/' => out.push('/'),
                        b'b' => out.push('\u{8}'),
                        b'f' => out.push('\u{c}'),
                        b'n' => out.push('\n'),
                        b'r' => out.push('\r'),
                        b't' => out.push('\t'),
                        b'u' => {
                            let hi = self.hex4()?;
                            let cp = if (0xD800..0xDC00).contains(&hi) {
                                if self.input.get(self.pos..self.pos + 2) != Some(b"\\u") {
                                    return Err(JsonError::new(esc_at, "unpaired surrogate"));
                                }
                                self.pos += 2;
                                let lo = self.hex4()?;
                                if !(0xDC00..0xE000).contains(&lo) {
                                    return Err(JsonError::new(esc_at, "unpaired surrogate"));
                                }
                                0x10000 + ((hi - 0xD800) << 10) + (lo - 0xDC00)
                            } else {
                                hi
                            };
                            let ch = char::from_u32(cp).ok_or_else(|| JsonError::new(esc_at, "invalid code point"))?;
                            out.push(ch);
                        }
                        _ => return Err(JsonError::new(esc_at, "invalid escape")),
                    }
                }
                Some(_) => return Err(JsonError::new(self.pos, "control character in string")),
            }
        }
    }

    fn number(&mut self) -> Result<Value, JsonError> {
        let start = self.pos;
        let negative = self.peek() == Some(b'-');
        if negative {
            self.pos += 1;
        }
        let int_start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        let int_digits = self.pos - int_start;
        if int_digits == 0 {
            return Err(JsonError::new(self.pos, "expected digit"));
        }
        if int_digits > 1 && self.input[int_start] == b'0' {
            return Err(JsonError::new(int_start, "leading zero"));
        }
        let mut is_real = false;
        if self.peek() == Some(b'.') {
            is_real = true;
            self.pos += 1;
            let frac_start = self.pos;
            while matches!(self.peek(), Some(b'0'..=b'9')) {
                self.pos += 1;
            }
            if self.pos == frac_start {
                return Err(JsonError::new(self.pos, "expected fractional digit"));
            }
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            is_real = true;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            let exp_start = self.pos;
            while matches!(self.peek(), Some(b'0'..=b'9')) {
                self.pos += 1;
            }
            if self.pos == exp_start {
                return Err(JsonError::new(self.pos, "expected exponent digit"));
            }
        }
        // all bytes in range are ASCII
        let text = std::str::from_utf8(&self.input[start..self.pos]).expect("ascii number");
        if is_real {
            let v: f64 = text.parse().map_err(|_| JsonError::new(start, "invalid number"))?;
            if !v.is_finite() {
                return Err(JsonError::new(start, "number out of range"));
            }
            Ok(Value::Real(v))
        } else if negative {
            text.parse::<i64>().map(Value::NegInt).map_err(|_| JsonError::new(start, "integer out of range"))
        } else {
            text.parse::<u64>().map(Value::Int).map_err(|_| JsonError::new(start, "integer out of range"))
        }
    }
}

/// Owned JSON tree for writing. Object keys are kept sorted by the map.
#[derive(Debug, Clone, PartialEq)]
pub enum Json {
    Null,
    Bool(bool),
    Int(u64),
    Real(f64),
    Str(String),
    Array(Vec<Json>),
    Object(BTreeMap<String, Json>),
}

impl Json {
    pub fn object() -> ObjectBuilder {
        ObjectBuilder(BTreeMap::new())
    }

    pub fn to_canonical(&self) -> String {
        let mut out = String::new();
        write_canonical(self, &mut out);
        out
    }
}

pub struct ObjectBuilder(BTreeMap<String, Json>);

impl ObjectBuilder {
    pub fn field(mut self, key: &str, v: impl Into<Json>) -> Self {
        self.0.insert(key.to_owned(), v.into());
        self
    }

    pub fn opt(self, key: &str, v: Option<impl Into<Json>>) -> Self {
        match v {
            Some(v) => self.field(key, v),
            None => self,
        }
    }

    pub fn build(self) -> Json {
        Json::Object(self.0)
    }
}

impl From<u64> for Json {
    fn from(v: u64) -> Self {
        Json::Int(v)
    }
}
impl From<u32> for Json {
    fn from(v: u32) -> Self {
        Json::Int(v.into())
    }
}
impl From<u16> for Json {
    fn from(v: u16) -> Self {
        Json::Int(v.into())
    }
}
impl From<u8> for Json {
    fn from(v: u8) -> Self {
        Json::Int(v.into())
    }
}
impl From<f64> for Json {
    fn from(v: f64) -> Self {
        Json::Real(v)
    }
}
impl From<bool> for Json {
    fn from(v: bool) -> Self {
        Json::Bool(v)
    }
}
impl From<&str> for Json {
    fn from(v: &str) -> Self {
        Json::Str(v.to_owned())
    }
}
impl From<String> for Json {
    fn from(v: String) -> Self {
        Json::Str(v)
    }
}
impl From<Vec<Json>> for Json {
    fn from(v: Vec<Json>) -> Self {
        Json::Array(v)
    }
}

/// Rounds to the six-decimal grid reals are carried on.
pub fn quantize(x: f64) -> f64 {
    let q = (x * 1e6).round() / 1e6;
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

/// True if `x` is finite and survives a trip through the canonical real form.
pub fn is_on_grid(x: f64) -> bool {
    x.is_finite() && format_real(x).parse::<f64>() == Ok(x)
}

pub fn format_real(x: f64) -> String {
    let mut s = format!("{:.6}", x);
    while s.ends_with('0') && !s.ends_with(".0") {
        s.pop();
    }
    if s == "-0.0" {
        s = "0.0".to_owned();
    }
    s
}

fn write_canonical(v: &Json, out: &mut String) {
    match v {
        Json::Null => out.push_str("null"),
        Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Json::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Json::Real(x) => out.push_str(&format_real(*x)),
        Json::Str(s) => write_string(s, out),
        Json::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        Json::Object(map) => {
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_string(k, out);
                out.push(':');
                write_canonical(item, out);
            }
            out.push('}');
        }
    }
}

fn write_string(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            '\u{8}' => out.push_str("\\b"),
            '\u{c}' => out.push_str("\\f"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

/// Typed accessors over a parsed object, producing offset-carrying errors.
pub struct Fields<'a> {
    offset: usize,
    members: &'a [(String, Node)],
}

impl<'a> Fields<'a> {
    pub fn of(node: &'a Node) -> Result<Self, JsonError> {
        match &node.value {
            Value::Object(m) => Ok(Self { offset: node.offset, members: m }),
            other => Err(JsonError::new(node.offset, format!("expected object, found {}", other.kind()))),
        }
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn get(&self, key: &str) -> Option<&'a Node> {
        self.members.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn req(&self, key: &str) -> Result<&'a Node, JsonError> {
        self.get(key).ok_or_else(|| JsonError::new(self.offset, format!("missing field \"{key}\"")))
    }

    /// Rejects members not in `allowed`.
    pub fn only(&self, allowed: &[&str]) -> Result<(), JsonError> {
        for (k, v) in self.members {
            if !allowed.contains(&k.as_str()) {
                return Err(JsonError::new(v.offset, format!("unknown field \"{k}\"")));
            }
        }
        Ok(())
    }

    pub fn uint(&self, key: &str, max: u64) -> Result<u64, JsonError> {
        as_uint(self.req(key)?, key, max)
    }

    pub fn opt_uint(&self, key: &str, max: u64) -> Result<Option<u64>, JsonError> {
        self.get(key).map(|n| as_uint(n, key, max)).transpose()
    }

    pub fn real(&self, key: &str) -> Result<f64, JsonError> {
        as_real(self.req(key)?, key)
    }

    pub fn opt_real(&self, key: &str) -> Result<Option<f64>, JsonError> {
        self.get(key).map(|n| as_real(n, key)).transpose()
    }

    pub fn str(&self, key: &str) -> Result<&'a str, JsonError> {
        as_str(self.req(key)?, key)
    }

    pub fn opt_str(&self, key: &str) -> Result<Option<&'a str>, JsonError> {
        self.get(key).map(|n| as_str(n, key)).transpose()
    }

    pub fn bool(&self, key: &str) -> Result<bool, JsonError> {
        let n = self.req(key)?;
        match n.value {
            Value::Bool(b) => Ok(b),
            ref other => Err(JsonError::new(n.offset, format!("field \"{key}\": expected bool, found {}", other.kind()))),
        }
    }

    pub fn opt_bool(&self, key: &str) -> Result<Option<bool>, JsonError> {
        if self.get(key).is_none() {
            return Ok(None);
        }
        self.bool(key).map(Some)
    }

    pub fn array(&self, key: &str) -> Result<&'a [Node], JsonError> {
        as_array(self.req(key)?, key)
    }

    pub fn opt_array(&self, key: &str) -> Result<Option<&'a [Node]>, JsonError> {
        self.get(key).map(|n| as_array(n, key)).transpose()
    }
}

pub fn as_uint(n: &Node, what: &str, max: u64) -> Result<u64, JsonError> {
    match n.value {
        Value::Int(v) if v <= max => Ok(v),
        Value::Int(v) => Err(JsonError::new(n.offset, format!("\"{what}\": {v} out of range 0..={max}"))),
        Value::NegInt(v) => Err(JsonError::new(n.offset, format!("\"{what}\": {v} out of range 0..={max}"))),
        ref other => Err(JsonError::new(n.offset, format!("\"{what}\": expected integer, found {}", other.kind()))),
    }
}

/// Reals accept integer literals too; canonical checks happen at the codec.
pub fn as_real(n: &Node, what: &str) -> Result<f64, JsonError> {
    match n.value {
        Value::Real(v) => Ok(v),
        Value::Int(v) => Ok(v as f64),
        Value::NegInt(v) => Ok(v as f64),
        ref other => Err(JsonError::new(n.offset, format!("\"{what}\": expected number, found {}", other.kind()))),
    }
}

pub fn as_str<'a>(n: &'a Node, what: &str) -> Result<&'a str, JsonError> {
    match &n.value {
        Value::Str(s) => Ok(s),
        other => Err(JsonError::new(n.offset, format!("\"{what}\": expected string, found {}", other.kind()))),
    }
}

pub fn as_array<'a>(n: &'a Node, what: &str) -> Result<&'a [Node], JsonError> {
    match &n.value {
        Value::Array(a) => Ok(a),
        other => Err(JsonError::new(n.offset, format!("\"{what}\": expected array, found {}", other.kind()))),
    }
}

/// 1-based line and column of a byte offset.
pub fn line_col(input: &[u8], offset: usize) -> (usize, usize) {
    let upto = &input[..offset.min(input.len())];
    let line = upto.iter().filter(|&&b| b == b'\n').count() + 1;
    let col = upto.iter().rev().take_while(|&&b| b != b'\n').count() + 1;
    (line, col)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nested() {
        let n = parse(br#" {"a": [1, -2, 3.5, "x\n\u00e9"], "b": {"c": null, "d": true}} "#).unwrap();
        let f = Fields::of(&n).unwrap();
        let a = f.array("a").unwrap();
        assert_eq!(a[0].value, Value::Int(1));
        assert_eq!(a[1].value, Value::NegInt(-2));
        assert_eq!(a[2].value, Value::Real(3.5));
        assert_eq!(a[3].value, Value::Str("x\né".into()));
        assert_eq!(n.offset, 1);
    }

    #[test]
    fn rejects_duplicates_with_offset() {
        let e = parse(br#"{"a":1,"a":2}"#).unwrap_err();
        assert_eq!(e.offset, 7);
        assert!(e.reason.contains("duplicate"));
    }

    #[test]
    fn rejects_garbage() {
        for bad in [&b""[..], b"{", b"[1,]", b"01", b"1.", b"\"\\x\"", b"{\"a\" 1}", b"tru", b"1 2", b"-", b"\"\xff\""] {
            assert!(parse(bad).is_err(), "{:?}", String::from_utf8_lossy(bad));
        }
    }

    #[test]
    fn integer_range() {
        assert_eq!(parse(b"18446744073709551615").unwrap().value, Value::Int(u64::MAX));
        assert!(parse(b"18446744073709551616").is_err());
    }

    #[test]
    fn depth_limit() {
        let deep = "[".repeat(100) + &"]".repeat(100);
        assert!(parse(deep.as_bytes()).unwrap_err().reason.contains("deep"));
    }

    #[test]
    fn surrogate_pairs() {
        assert_eq!(parse(br#""\ud83d\ude00""#).unwrap().value, Value::Str("😀".into()));
        assert!(parse(br#""\ud83d""#).is_err());
    }

    #[test]
    fn canonical_writer() {
        let j = Json::object()
            .field("z", 1u64)
            .field("a", Json::Array(vec![Json::Real(2.0), Json::Real(0.125), Json::Real(1e-7)]))
            .field("m", "q\"\u{1}")
            .build();
        assert_eq!(j.to_canonical(), r#"{"a":[2.0,0.125,0.0],"m":"q\"\u0001","z":1}"#);
    }

    #[test]
    fn real_format() {
        assert_eq!(format_real(10.0), "10.0");
        assert_eq!(format_real(0.1), "0.1");
        assert_eq!(format_real(-0.0), "0.0");
        assert_eq!(format_real(1234567.123456), "1234567.123456");
        assert!(is_on_grid(0.1));
        assert!(!is_on_grid(0.1234567));
        assert!(is_on_grid(quantize(0.1234567)));
        assert!(!is_on_grid(f64::NAN));
    }

    #[test]
    fn line_and_column() {
        let src = b"{\n  \"a\": x\n}";
        let e = parse(src).unwrap_err();
        assert_eq!(line_col(src, e.offset), (2, 8));
    }

    proptest::proptest! {
        #[test]
        fn never_panics(bytes in proptest::collection::vec(proptest::prelude::any::<u8>(), 0..64)) {
            let _ = parse(&bytes);
        }

        #[test]
        fn string_roundtrip(s in ".*") {
            let text = Json::Str(s.clone()).to_canonical();
            proptest::prop_assert_eq!(parse(text.as_bytes()).unwrap().value, Value::Str(s));
        }
    }
}
