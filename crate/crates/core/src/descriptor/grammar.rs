//! The descriptor document grammar: an indentation-based key/value tree.
//!
//! A document is a record of `key: scalar` pairs and nested blocks. Nesting
//! is two spaces exactly per level, list items carry a `- ` prefix, scalars
//! are bare tokens or double-quoted strings, and integers are unsigned
//! decimal. One document per file, UTF-8, LF line endings.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scalar {
    Str(String),
    Int(u64),
}

impl Scalar {
    /// String view of the scalar; bare integers coerce to their decimal form.
    pub fn as_str(&self) -> String {
        match self {
            Scalar::Str(s) => s.clone(),
            Scalar::Int(n) => n.to_string(),
        }
    }

    pub fn as_int(&self) -> Option<u64> {
        match self {
            Scalar::Int(n) => Some(*n),
            Scalar::Str(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Value {
    Scalar(Scalar),
    List(Vec<Value>),
    Map(Vec<(String, Value)>),
}

impl Value {
    pub fn as_map(&self) -> Option<&[(String, Value)]> {
        match self {
            Value::Map(entries) => Some(entries),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(items) => Some(items),
            _ => None,
        }
    }

    pub fn as_scalar(&self) -> Option<&Scalar> {
        match self {
            Value::Scalar(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrammarError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for GrammarError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

struct Line<'a> {
    number: usize,
    indent: usize,
    text: &'a str,
}

fn err(line: usize, message: impl Into<String>) -> GrammarError {
    GrammarError {
        line,
        message: message.into(),
    }
}

fn split_lines(input: &str) -> Result<Vec<Line<'_>>, GrammarError> {
    let mut lines = Vec::new();
    for (idx, raw) in input.split('\n').enumerate() {
        let number = idx + 1;
        if raw.contains('\r') {
            return Err(err(number, "carriage return; documents use LF line endings"));
        }
        if raw.contains('\t') {
            return Err(err(number, "tab character; indentation is spaces only"));
        }
        let trimmed = raw.trim_end_matches(' ');
        if trimmed.is_empty() {
            continue;
        }
        let indent = trimmed.len() - trimmed.trim_start_matches(' ').len();
        if indent % 2 != 0 {
            return Err(err(
                number,
                format!("indentation of {indent} spaces is not a multiple of 2"),
            ));
        }
        lines.push(Line {
            number,
            indent,
            text: &trimmed[indent..],
        });
    }
    Ok(lines)
}

fn is_key_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '-' || c == '_'
}

/// Splits `key: rest` / `key:` forms. Returns (key, Some(scalar-text)) or (key, None)
/// when the key opens a nested block.
fn split_key_line<'a>(line: &Line<'a>) -> Result<(&'a str, Option<&'a str>), GrammarError> {
    let colon = line
        .text
        .find(':')
        .ok_or_else(|| err(line.number, format!("expected `key:` form, got `{}`", line.text)))?;
    let key = &line.text[..colon];
    if key.is_empty() || !key.chars().all(is_key_char) {
        return Err(err(line.number, format!("invalid key `{key}`")));
    }
    let rest = &line.text[colon + 1..];
    if rest.is_empty() {
        Ok((key, None))
    } else if let Some(scalar) = rest.strip_prefix(' ') {
        if scalar.is_empty() {
            Err(err(line.number, "missing scalar after `: `"))
        } else {
            Ok((key, Some(scalar)))
        }
    } else {
        Err(err(line.number, "expected a space after `:`"))
    }
}

fn parse_scalar(text: &str, line: usize) -> Result<Scalar, GrammarError> {
    if let Some(stripped) = text.strip_prefix('"') {
        let mut out = String::new();
        let mut chars = stripped.chars();
        loop {
            match chars.next() {
                None => return Err(err(line, "unterminated quoted string")),
                Some('"') => break,
                Some('\\') => match chars.next() {
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    other => {
                        return Err(err(
                            line,
                            format!("unsupported escape `\\{}`", other.map(String::from).unwrap_or_default()),
                        ))
                    }
                },
                Some(c) => out.push(c),
            }
        }
        if chars.next().is_some() {
            return Err(err(line, "trailing characters after closing quote"));
        }
        return Ok(Scalar::Str(out));
    }
    if text.chars().all(|c| c.is_ascii_digit()) {
        return text
            .parse::<u64>()
            .map(Scalar::Int)
            .map_err(|_| err(line, format!("integer `{text}` out of range")));
    }
    Ok(Scalar::Str(text.to_string()))
}

/// True when the list-item body `text` opens a record (`key: ...` / `key:`)
/// rather than being a bare scalar.
fn looks_like_record(text: &str) -> bool {
    if text.starts_with('"') {
        return false;
    }
    match text.find(':') {
        None => false,
        Some(0) => false,
        Some(pos) => {
            let key = &text[..pos];
            let rest = &text[pos + 1..];
            key.chars().all(is_key_char) && (rest.is_empty() || rest.starts_with(' '))
        }
    }
}

struct Parser<'a> {
    lines: Vec<Line<'a>>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Line<'a>> {
        self.lines.get(self.pos)
    }

    fn parse_block(&mut self, indent: usize) -> Result<Value, GrammarError> {
        let first = match self.peek() {
            Some(line) if line.indent == indent => line,
            Some(line) => return Err(err(line.number, "unexpected indentation")),
            None => return Err(err(0, "empty block")),
        };
        if first.text.starts_with("- ") || first.text == "-" {
            self.parse_list(indent)
        } else {
            self.parse_map(indent)
        }
    }

    fn parse_map(&mut self, indent: usize) -> Result<Value, GrammarError> {
        let mut entries: Vec<(String, Value)> = Vec::new();
        while let Some(line) = self.peek() {
            if line.indent != indent {
                break;
            }
            if line.text.starts_with("- ") {
                return Err(err(line.number, "list item in record context"));
            }
            let number = line.number;
            let (key, scalar_text) = split_key_line(line)?;
            if entries.iter().any(|(k, _)| k == key) {
                return Err(err(number, format!("duplicate key `{key}`")));
            }
            let key = key.to_string();
            self.pos += 1;
            let value = match scalar_text {
                Some(text) => Value::Scalar(parse_scalar(text, number)?),
                None => match self.peek() {
                    Some(next) if next.indent == indent + 2 => self.parse_block(indent + 2)?,
                    Some(next) if next.indent > indent + 2 => {
                        return Err(err(next.number, "over-indented block (nesting is 2 spaces)"))
                    }
                    _ => {
                        return Err(err(
                            number,
                            format!("key `{key}:` opens a block but nothing is nested under it"),
                        ))
                    }
                },
            };
            entries.push((key, value));
        }
        Ok(Value::Map(entries))
    }

    fn parse_list(&mut self, indent: usize) -> Result<Value, GrammarError> {
        let mut items = Vec::new();
        while let Some(line) = self.peek() {
            if line.indent != indent {
                break;
            }
            if !line.text.starts_with("- ") {
                break;
            }
            let number = line.number;
            let body = &line.text[2..];
            if body.is_empty() {
                return Err(err(number, "empty list item"));
            }
            if looks_like_record(body) {
                items.push(self.parse_item_record(indent, body, number)?);
            } else {
                self.pos += 1;
                items.push(Value::Scalar(parse_scalar(body, number)?));
            }
        }
        Ok(Value::List(items))
    }

    /// A record list item: the first field rides on the `- ` line, the
    /// remaining fields sit two spaces deeper than the dash.
    fn parse_item_record(&mut self, indent: usize, body: &'a str, number: usize) -> Result<Value, GrammarError> {
        let field_indent = indent + 2;
        let first = Line {
            number,
            indent: field_indent,
            text: body,
        };
        let (key, scalar_text) = split_key_line(&first)?;
        let key = key.to_string();
        self.pos += 1;
        let first_value = match scalar_text {
            Some(text) => Value::Scalar(parse_scalar(text, number)?),
            None => match self.peek() {
                Some(next) if next.indent == field_indent + 2 => self.parse_block(field_indent + 2)?,
                _ => {
                    return Err(err(
                        number,
                        format!("key `{key}:` opens a block but nothing is nested under it"),
                    ))
                }
            },
        };
        let mut entries = vec![(key, first_value)];
        while let Some(line) = self.peek() {
            if line.indent != field_indent || line.text.starts_with("- ") {
                break;
            }
            let number = line.number;
            let (key, scalar_text) = split_key_line(line)?;
            if entries.iter().any(|(k, _)| k == key) {
                return Err(err(number, format!("duplicate key `{key}`")));
            }
            let key = key.to_string();
            self.pos += 1;
            let value = match scalar_text {
                Some(text) => Value::Scalar(parse_scalar(text, number)?),
                None => match self.peek() {
                    Some(next) if next.indent == field_indent + 2 => self.parse_block(field_indent + 2)?,
                    _ => {
                        return Err(err(
                            number,
                            format!("key `{key}:` opens a block but nothing is nested under it"),
                        ))
                    }
                },
            };
            entries.push((key, value));
        }
        Ok(Value::Map(entries))
    }
}

/// Parses one document into its record tree.
pub fn parse_document(input: &str) -> Result<Value, GrammarError> {
    let lines = split_lines(input)?;
    if lines.is_empty() {
        return Err(err(1, "empty document"));
    }
    let mut parser = Parser { lines, pos: 0 };
    let value = parser.parse_map(0)?;
    if let Some(line) = parser.peek() {
        return Err(err(line.number, "unexpected indentation"));
    }
    Ok(value)
}

fn is_bare_safe(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | '/' | '@' | '%' | '='))
}

fn write_scalar(out: &mut String, scalar: &Scalar) {
    match scalar {
        Scalar::Int(n) => out.push_str(&n.to_string()),
        Scalar::Str(s) => {
            if is_bare_safe(s) {
                out.push_str(s);
            } else {
                out.push('"');
                for c in s.chars() {
                    match c {
                        '"' => out.push_str("\\\""),
                        '\\' => out.push_str("\\\\"),
                        c => out.push(c),
                    }
                }
                out.push('"');
            }
        }
    }
}

fn write_map(out: &mut String, entries: &[(String, Value)], indent: usize) {
    let pad = " ".repeat(indent);
    for (key, value) in entries {
        match value {
            Value::Scalar(s) => {
                out.push_str(&pad);
                out.push_str(key);
                out.push_str(": ");
                write_scalar(out, s);
                out.push('\n');
            }
            Value::Map(inner) if !inner.is_empty() => {
                out.push_str(&pad);
                out.push_str(key);
                out.push_str(":\n");
                write_map(out, inner, indent + 2);
            }
            Value::List(items) if !items.is_empty() => {
                out.push_str(&pad);
                out.push_str(key);
                out.push_str(":\n");
                write_list(out, items, indent + 2);
            }
            // Empty blocks cannot be expressed in the grammar; omit the key.
            Value::Map(_) | Value::List(_) => {}
        }
    }
}

fn write_list(out: &mut String, items: &[Value], indent: usize) {
    let pad = " ".repeat(indent);
    for item in items {
        match item {
            Value::Scalar(s) => {
                out.push_str(&pad);
                out.push_str("- ");
                write_scalar(out, s);
                out.push('\n');
            }
            Value::Map(entries) if !entries.is_empty() => {
                let mut first = true;
                for (key, value) in entries {
                    let lead = if first { format!("{pad}- ") } else { format!("{pad}  ") };
                    first = false;
                    match value {
                        Value::Scalar(s) => {
                            out.push_str(&lead);
                            out.push_str(key);
                            out.push_str(": ");
                            write_scalar(out, s);
                            out.push('\n');
                        }
                        Value::Map(inner) if !inner.is_empty() => {
                            out.push_str(&lead);
                            out.push_str(key);
                            out.push_str(":\n");
                            write_map(out, inner, indent + 4);
                        }
                        Value::List(inner) if !inner.is_empty() => {
                            out.push_str(&lead);
                            out.push_str(key);
                            out.push_str(":\n");
                            write_list(out, inner, indent + 4);
                        }
                        Value::Map(_) | Value::List(_) => {}
                    }
                }
            }
            Value::Map(_) => {}
            Value::List(_) => {}
        }
    }
}

/// Serializes a record tree back to document text. Parsing the output yields
/// a tree equal to the input (empty nested blocks excepted, which the grammar
/// cannot express).
pub fn serialize_document(value: &Value) -> String {
    let mut out = String::new();
    match value {
        Value::Map(entries) => write_map(&mut out, entries, 0),
        Value::List(items) => write_list(&mut out, items, 0),
        Value::Scalar(s) => {
            write_scalar(&mut out, s);
            out.push('\n');
        }
    }
    out
}
