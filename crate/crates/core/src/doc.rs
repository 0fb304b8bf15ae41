//! Line-oriented nested key-value documents.
//!
//! This is the on-disk form of both application manifests and experiment
//! specs: a restricted subset of the usual indentation-based configuration
//! syntax. The accepted grammar is
//!
//! ```text
//! document   := block(0)
//! block(n)   := map(n) | list(n) | scalar-line(n)
//! map(n)     := ( indent(n) key ':' ( ' ' inline | EOL [ block(n+2) ] ) )+
//! list(n)    := ( indent(n) '-' ( ' ' <content continued at indent n+2> | EOL [ block(n+2) ] ) )+
//! inline     := quoted | flow-list | plain
//! flow-list  := '[' [ scalar ( ',' scalar )* ] ']'
//! quoted     := '"' ( char | '\"' | '\\' | '\n' | '\t' | '\r' | '\uXXXX' )* '"'
//! key        := [A-Za-z0-9_./-]+
//! ```
//!
//! Indentation is spaces only, two per level. Blank lines and lines whose
//! first non-space character is `#` are ignored, as is a ` #` comment
//! trailing a value. A key without a value and without a nested block is
//! null.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

/// 1-based line and column (column counted in bytes).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scalar {
    pub text: String,
    /// Whether the scalar was (or should be) written in double quotes.
    pub quoted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Null,
    Scalar(Scalar),
    List(Vec<Node>),
    Map(Vec<(String, Node)>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub pos: Pos,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pos}: {message}")]
pub struct SyntaxError {
    pub pos: Pos,
    pub message: String,
}

fn syntax(line: usize, col: usize, message: impl Into<String>) -> SyntaxError {
    SyntaxError {
        pos: Pos { line, col },
        message: message.into(),
    }
}

#[derive(Debug)]
enum LineKind {
    Item,
    Content(String),
}

#[derive(Debug)]
struct Line {
    indent: usize,
    pos: Pos,
    kind: LineKind,
}

fn lex(text: &str) -> Result<Vec<Line>, SyntaxError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines = Vec::new();
    for (i, raw) in text.split('\n').enumerate() {
        let line_no = i + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let indent = raw.len() - raw.trim_start_matches(' ').len();
        let rest = &raw[indent..];
        if rest.starts_with('\t') {
            return Err(syntax(
                line_no,
                indent + 1,
                "tabs are not allowed in indentation",
            ));
        }
        let rest = rest.trim_end();
        if rest.is_empty() || rest.starts_with('#') {
            continue;
        }
        if let Some((off, c)) = rest
            .char_indices()
            .find(|(_, c)| c.is_control() && *c != '\t')
        {
            return Err(syntax(
                line_no,
                indent + off + 1,
                format!("control character U+{:04X} is not allowed", c as u32),
            ));
        }
        if indent % 2 != 0 {
            return Err(syntax(
                line_no,
                indent + 1,
                "indentation must be a multiple of two spaces",
            ));
        }
        let mut level = indent;
        let mut s = rest;
        loop {
            if s == "-" {
                lines.push(Line {
                    indent: level,
                    pos: Pos {
                        line: line_no,
                        col: level + 1,
                    },
                    kind: LineKind::Item,
                });
                s = "";
                break;
            }
            if let Some(after) = s.strip_prefix("- ") {
                lines.push(Line {
                    indent: level,
                    pos: Pos {
                        line: line_no,
                        col: level + 1,
                    },
                    kind: LineKind::Item,
                });
                if after.starts_with(' ') {
                    return Err(syntax(
                        line_no,
                        level + 3,
                        "list item content must follow `- ` after exactly one space",
                    ));
                }
                level += 2;
                s = after;
                continue;
            }
            break;
        }
        if !s.is_empty() {
            lines.push(Line {
                indent: level,
                pos: Pos {
                    line: line_no,
                    col: level + 1,
                },
                kind: LineKind::Content(s.to_string()),
            });
        }
    }
    Ok(lines)
}

enum KeySplit<'a> {
    Key(&'a str, &'a str),
    NotKey,
    BadKey(&'a str),
}

fn is_key_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-' | '/')
}

fn split_key(s: &str) -> KeySplit<'_> {
    if s.starts_with('"') || s.starts_with('[') {
        return KeySplit::NotKey;
    }
    let bytes = s.as_bytes();
    for (i, b) in bytes.iter().enumerate() {
        if *b == b':' && (i + 1 == bytes.len() || bytes[i + 1] == b' ') {
            let key = &s[..i];
            if key.is_empty() || !key.chars().all(is_key_char) {
                return KeySplit::BadKey(key);
            }
            return KeySplit::Key(key, s[i + 1..].trim_start());
        }
    }
    KeySplit::NotKey
}

fn parse_quoted(s: &str, pos: Pos) -> Result<(String, &str), SyntaxError> {
    debug_assert!(s.starts_with('"'));
    let mut out = String::new();
    let mut chars = s.char_indices().skip(1);
    while let Some((i, c)) = chars.next() {
        match c {
            '"' => return Ok((out, &s[i + 1..])),
            '\\' => {
                let Some((j, e)) = chars.next() else {
                    break;
                };
                match e {
                    '"' => out.push('"'),
                    '\\' => out.push('\\'),
                    'n' => out.push('\n'),
                    't' => out.push('\t'),
                    'r' => out.push('\r'),
                    'u' => {
                        let hex = s
                            .get(j + 1..j + 5)
                            .ok_or_else(|| syntax(pos.line, pos.col + j, "truncated \\u escape"))?;
                        let code = u32::from_str_radix(hex, 16)
                            .ok()
                            .filter(|_| hex.chars().all(|h| h.is_ascii_hexdigit()))
                            .and_then(char::from_u32)
                            .ok_or_else(|| {
                                syntax(pos.line, pos.col + j, format!("invalid \\u escape `{hex}`"))
                            })?;
                        out.push(code);
                        for _ in 0..4 {
                            chars.next();
                        }
                    }
                    other => {
                        return Err(syntax(
                            pos.line,
                            pos.col + j,
                            format!("unknown escape `\\{other}`"),
                        ))
                    }
                }
            }
            c => out.push(c),
        }
    }
    Err(syntax(pos.line, pos.col, "unterminated quoted string"))
}

fn expect_trailing_nothing(rest: &str, pos: Pos, consumed: usize) -> Result<(), SyntaxError> {
    let trimmed = rest.trim_start();
    if trimmed.is_empty() || (trimmed.starts_with('#') && trimmed.len() < rest.len()) {
        Ok(())
    } else {
        Err(syntax(
            pos.line,
            pos.col + consumed + (rest.len() - trimmed.len()),
            "unexpected characters after value",
        ))
    }
}

fn strip_plain_comment(s: &str) -> &str {
    match s.find(" #") {
        Some(i) => s[..i].trim_end(),
        None => s,
    }
}

const UNSUPPORTED_LEADERS: &[char] = &['{', '\'', '|', '>', '&', '*', '!', '%', '`', ']', ','];

fn parse_flow_item(piece: &str, pos: Pos) -> Result<Node, SyntaxError> {
    if piece.starts_with('"') {
        let (text, rest) = parse_quoted(piece, pos)?;
        if !rest.trim().is_empty() {
            return Err(syntax(
                pos.line,
                pos.col,
                "unexpected characters after quoted item",
            ));
        }
        return Ok(Node {
            pos,
            value: Value::Scalar(Scalar { text, quoted: true }),
        });
    }
    if piece.is_empty() {
        return Err(syntax(pos.line, pos.col, "empty flow list item"));
    }
    if piece.starts_with(UNSUPPORTED_LEADERS) || piece.starts_with('[') || piece.contains('"') {
        return Err(syntax(pos.line, pos.col, "unsupported flow list item"));
    }
    Ok(Node {
        pos,
        value: Value::Scalar(Scalar {
            text: piece.to_string(),
            quoted: false,
        }),
    })
}

fn parse_flow_list(s: &str, pos: Pos) -> Result<Node, SyntaxError> {
    debug_assert!(s.starts_with('['));
    let mut items = Vec::new();
    let mut in_quote = false;
    let mut escaped = false;
    let mut start = 1;
    let mut close = None;
    for (i, c) in s.char_indices().skip(1) {
        if in_quote {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_quote = false;
            }
            continue;
        }
        match c {
            '"' => in_quote = true,
            ',' | ']' => {
                let raw = &s[start..i];
                let piece = raw.trim();
                let piece_pos = Pos {
                    line: pos.line,
                    col: pos.col + start + (raw.len() - raw.trim_start().len()),
                };
                if c == ']' && piece.is_empty() && items.is_empty() {
                    close = Some(i);
                    break;
                }
                items.push(parse_flow_item(piece, piece_pos)?);
                start = i + 1;
                if c == ']' {
                    close = Some(i);
                    break;
                }
            }
            '[' | '{' => {
                return Err(syntax(
                    pos.line,
                    pos.col + i,
                    "nested flow collections are not supported",
                ))
            }
            _ => {}
        }
    }
    let close = close.ok_or_else(|| syntax(pos.line, pos.col, "unterminated flow list"))?;
    expect_trailing_nothing(&s[close + 1..], pos, close + 1)?;
    Ok(Node {
        pos,
        value: Value::List(items),
    })
}

fn parse_inline(s: &str, pos: Pos) -> Result<Node, SyntaxError> {
    if s.starts_with('"') {
        let (text, rest) = parse_quoted(s, pos)?;
        expect_trailing_nothing(rest, pos, s.len() - rest.len())?;
        return Ok(Node {
            pos,
            value: Value::Scalar(Scalar { text, quoted: true }),
        });
    }
    if s.starts_with('[') {
        return parse_flow_list(s, pos);
    }
    if s.starts_with(UNSUPPORTED_LEADERS) {
        return Err(syntax(pos.line, pos.col, "unsupported value syntax"));
    }
    Ok(Node {
        pos,
        value: Value::Scalar(Scalar {
            text: strip_plain_comment(s).to_string(),
            quoted: false,
        }),
    })
}

struct Parser {
    lines: Vec<Line>,
    idx: usize,
}

impl Parser {
    fn peek_indent(&self) -> Option<usize> {
        self.lines.get(self.idx).map(|l| l.indent)
    }

    fn nested(&mut self, indent: usize, fallback: Pos) -> Result<Node, SyntaxError> {
        match self.peek_indent() {
            Some(i) if i == indent + 2 => self.block(indent + 2),
            Some(i) if i > indent => {
                let l = &self.lines[self.idx];
                Err(syntax(
                    l.pos.line,
                    l.pos.col,
                    format!("expected indentation of {} spaces, found {}", indent + 2, i),
                ))
            }
            _ => Ok(Node {
                pos: fallback,
                value: Value::Null,
            }),
        }
    }

    fn block(&mut self, indent: usize) -> Result<Node, SyntaxError> {
        let first = &self.lines[self.idx];
        let pos = first.pos;
        match &first.kind {
            LineKind::Item => self.list(indent, pos),
            LineKind::Content(s) => match split_key(s) {
                KeySplit::Key(..) => self.map(indent, pos),
                KeySplit::BadKey(k) => Err(syntax(pos.line, pos.col, format!("invalid key `{k}`"))),
                KeySplit::NotKey => {
                    let node = parse_inline(s, pos)?;
                    self.idx += 1;
                    if let Some(i) = self.peek_indent() {
                        if i >= indent {
                            let l = &self.lines[self.idx];
                            return Err(syntax(
                                l.pos.line,
                                l.pos.col,
                                "unexpected content after a scalar value",
                            ));
                        }
                    }
                    Ok(node)
                }
            },
        }
    }

    fn list(&mut self, indent: usize, pos: Pos) -> Result<Node, SyntaxError> {
        let mut items = Vec::new();
        while let Some(line) = self.lines.get(self.idx) {
            if line.indent != indent {
                break;
            }
            let item_pos = line.pos;
            if let LineKind::Content(_) = line.kind {
                return Err(syntax(
                    item_pos.line,
                    item_pos.col,
                    "expected a list item `- `",
                ));
            }
            self.idx += 1;
            items.push(self.nested(indent, item_pos)?);
        }
        Ok(Node {
            pos,
            value: Value::List(items),
        })
    }

    fn map(&mut self, indent: usize, pos: Pos) -> Result<Node, SyntaxError> {
        let mut entries: Vec<(String, Node)> = Vec::new();
        let mut seen = HashSet::new();
        while let Some(line) = self.lines.get(self.idx) {
            if line.indent != indent {
                break;
            }
            let key_pos = line.pos;
            let LineKind::Content(s) = &line.kind else {
                return Err(syntax(
                    key_pos.line,
                    key_pos.col,
                    "expected `key: value`, found a list item",
                ));
            };
            let (key, rest) = match split_key(s) {
                KeySplit::Key(k, r) => (k.to_string(), r.to_string()),
                KeySplit::BadKey(k) => {
                    return Err(syntax(
                        key_pos.line,
                        key_pos.col,
                        format!("invalid key `{k}`"),
                    ))
                }
                KeySplit::NotKey => {
                    return Err(syntax(key_pos.line, key_pos.col, "expected `key: value`"))
                }
            };
            if !seen.insert(key.clone()) {
                return Err(syntax(
                    key_pos.line,
                    key_pos.col,
                    format!("duplicate key `{key}`"),
                ));
            }
            let value_col = key_pos.col + s.len() - rest.len();
            self.idx += 1;
            let rest = if rest.starts_with('#') {
                ""
            } else {
                rest.as_str()
            };
            let value = if rest.is_empty() {
                self.nested(indent, key_pos)?
            } else {
                let node = parse_inline(
                    rest,
                    Pos {
                        line: key_pos.line,
                        col: value_col,
                    },
                )?;
                if let Some(i) = self.peek_indent() {
                    if i > indent {
                        let l = &self.lines[self.idx];
                        return Err(syntax(l.pos.line, l.pos.col, "unexpected indentation"));
                    }
                }
                node
            };
            entries.push((key, value));
        }
        Ok(Node {
            pos,
            value: Value::Map(entries),
        })
    }
}

/// Parses a document. An empty document is an empty map.
pub fn parse(text: &str) -> Result<Node, SyntaxError> {
    let lines = lex(text)?;
    let mut parser = Parser { lines, idx: 0 };
    let Some(first) = parser.lines.first() else {
        return Ok(Node {
            pos: Pos { line: 1, col: 1 },
            value: Value::Map(Vec::new()),
        });
    };
    if first.indent != 0 {
        return Err(syntax(
            first.pos.line,
            first.pos.col,
            "document must start at column 1",
        ));
    }
    let node = parser.block(0)?;
    if let Some(l) = parser.lines.get(parser.idx) {
        return Err(syntax(l.pos.line, l.pos.col, "unexpected content"));
    }
    Ok(node)
}

fn is_plain_safe(text: &str) -> bool {
    let Some(first) = text.chars().next() else {
        return false;
    };
    let allowed = |c: char| c.is_ascii_alphanumeric() || "_.-/+:@=~".contains(c);
    (first.is_ascii_alphanumeric() || "_./+~".contains(first) || (first == '-' && text.len() > 1))
        && text.chars().all(allowed)
        && !text.ends_with(':')
        && !text.starts_with("- ")
}

fn quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if c.is_control() => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn render_scalar(s: &Scalar) -> String {
    if !s.quoted && is_plain_safe(&s.text) {
        s.text.clone()
    } else {
        quote(&s.text)
    }
}

fn flow_form(items: &[Node]) -> Option<String> {
    let parts: Option<Vec<String>> = items
        .iter()
        .map(|n| match &n.value {
            Value::Scalar(s) => Some(render_scalar(s)),
            _ => None,
        })
        .collect();
    parts.map(|p| format!("[{}]", p.join(", ")))
}

fn render(value: &Value, indent: usize, out: &mut Vec<String>) {
    let pad = " ".repeat(indent);
    match value {
        Value::Null => {}
        Value::Scalar(s) => out.push(format!("{pad}{}", render_scalar(s))),
        Value::Map(entries) => {
            for (k, v) in entries {
                match &v.value {
                    Value::Null => out.push(format!("{pad}{k}:")),
                    Value::Scalar(s) => out.push(format!("{pad}{k}: {}", render_scalar(s))),
                    Value::List(items) => match flow_form(items) {
                        Some(flow) => out.push(format!("{pad}{k}: {flow}")),
                        None => {
                            out.push(format!("{pad}{k}:"));
                            render(&v.value, indent + 2, out);
                        }
                    },
                    Value::Map(m) if m.is_empty() => out.push(format!("{pad}{k}:")),
                    Value::Map(_) => {
                        out.push(format!("{pad}{k}:"));
                        render(&v.value, indent + 2, out);
                    }
                }
            }
        }
        Value::List(items) => {
            for item in items {
                let mut lines = Vec::new();
                match &item.value {
                    Value::List(inner) if !inner.is_empty() => match flow_form(inner) {
                        Some(flow) => lines.push(format!("{}{flow}", " ".repeat(indent + 2))),
                        None => render(&item.value, indent + 2, &mut lines),
                    },
                    Value::List(_) => lines.push(format!("{}[]", " ".repeat(indent + 2))),
                    other => render(other, indent + 2, &mut lines),
                }
                if lines.is_empty() {
                    out.push(format!("{pad}-"));
                } else {
                    lines[0] = format!("{pad}- {}", &lines[0][indent + 2..]);
                    out.extend(lines);
                }
            }
        }
    }
}

/// Renders a value as a document with a trailing newline.
pub fn to_text(value: &Value) -> String {
    let mut lines = Vec::new();
    render(value, 0, &mut lines);
    let mut text = lines.join("\n");
    text.push('\n');
    text
}

// Construction helpers for typed serializers.

pub fn node(value: Value) -> Node {
    Node {
        pos: Pos::default(),
        value,
    }
}

pub fn plain(text: impl Into<String>) -> Node {
    node(Value::Scalar(Scalar {
        text: text.into(),
        quoted: false,
    }))
}

pub fn quoted(text: impl Into<String>) -> Node {
    node(Value::Scalar(Scalar {
        text: text.into(),
        quoted: true,
    }))
}

pub fn list(items: Vec<Node>) -> Node {
    node(Value::List(items))
}

/// Incrementally built map preserving insertion order.
#[derive(Debug, Default)]
pub struct MapBuilder(Vec<(String, Node)>);

impl MapBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(mut self, key: &str, value: Node) -> Self {
        self.0.push((key.to_string(), value));
        self
    }

    pub fn put_opt(self, key: &str, value: Option<Node>) -> Self {
        match value {
            Some(v) => self.put(key, v),
            None => self,
        }
    }

    pub fn build(self) -> Node {
        node(Value::Map(self.0))
    }
}

/// A decoding problem tied to a document location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub pos: Pos,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: `{}`: {}", self.pos, self.path, self.message)
    }
}

pub fn join_path(base: &str, key: &str) -> String {
    if base.is_empty() {
        key.to_string()
    } else {
        format!("{base}.{key}")
    }
}

impl Node {
    pub fn issue(&self, path: &str, message: impl Into<String>) -> Issue {
        Issue {
            pos: self.pos,
            path: path.to_string(),
            message: message.into(),
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self.value, Value::Null)
    }

    pub fn scalar(&self) -> Option<&Scalar> {
        match &self.value {
            Value::Scalar(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        self.scalar().map(|s| s.text.as_str())
    }

    /// List items; null counts as an empty list.
    pub fn as_list(&self) -> Option<&[Node]> {
        match &self.value {
            Value::List(items) => Some(items),
            Value::Null => Some(&[]),
            _ => None,
        }
    }

    pub fn expect_str(&self, path: &str) -> Result<String, Issue> {
        self.as_str()
            .map(str::to_string)
            .ok_or_else(|| self.issue(path, "expected a string"))
    }

    pub fn expect_u64(&self, path: &str) -> Result<u64, Issue> {
        self.as_str()
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(|| self.issue(path, "expected a nonnegative integer"))
    }

    pub fn expect_u32(&self, path: &str) -> Result<u32, Issue> {
        self.as_str()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| self.issue(path, "expected a nonnegative 32-bit integer"))
    }

    pub fn expect_f64(&self, path: &str) -> Result<f64, Issue> {
        self.as_str()
            .and_then(|s| s.parse::<f64>().ok())
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.issue(path, "expected a finite number"))
    }
}

/// Keyed access to a map node that remembers which keys were consumed,
/// so the remainder can be reported as unknown.
pub struct Fields<'a> {
    path: String,
    node: &'a Node,
    entries: &'a [(String, Node)],
    used: Vec<bool>,
}

impl<'a> Fields<'a> {
    pub fn new(node: &'a Node, path: &str) -> Result<Self, Issue> {
        let entries: &[(String, Node)] = match &node.value {
            Value::Map(entries) => entries,
            Value::Null => &[],
            _ => return Err(node.issue(path, "expected a mapping")),
        };
        Ok(Self {
            path: path.to_string(),
            node,
            entries,
            used: vec![false; entries.len()],
        })
    }

    pub fn path(&self, key: &str) -> String {
        join_path(&self.path, key)
    }

    /// Returns the value for `key`; a null value reads as absent.
    pub fn get(&mut self, key: &str) -> Option<&'a Node> {
        let i = self.entries.iter().position(|(k, _)| k == key)?;
        self.used[i] = true;
        let node = &self.entries[i].1;
        (!node.is_null()).then_some(node)
    }

    pub fn require(&mut self, key: &str, issues: &mut Vec<Issue>) -> Option<&'a Node> {
        let found = self.get(key);
        if found.is_none() {
            issues.push(
                self.node
                    .issue(&self.path(key), "required field is missing"),
            );
        }
        found
    }

    /// Paths and positions of keys never requested.
    pub fn unknown(&self) -> Vec<Issue> {
        self.entries
            .iter()
            .zip(&self.used)
            .filter(|(_, used)| !**used)
            .map(|((k, n), _)| Issue {
                pos: n.pos,
                path: join_path(&self.path, k),
                message: "unknown key".to_string(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text_of(node: &Node) -> String {
        to_text(&node.value)
    }

    #[test]
    fn parses_nested_maps_and_lists() {
        let doc = "\
app: demo
services:
  - name: frontend
    replicas: 2
  - name: backend
    tags: [a, \"b c\"]
limits:
  cpu: 0.5
";
        let root = parse(doc).unwrap();
        let Value::Map(entries) = &root.value else {
            panic!("not a map")
        };
        assert_eq!(entries.len(), 3);
        let services = entries[1].1.as_list().unwrap();
        assert_eq!(services.len(), 2);
        let Value::Map(first) = &services[0].value else {
            panic!()
        };
        assert_eq!(first[1].0, "replicas");
        assert_eq!(first[1].1.as_str(), Some("2"));
        assert_eq!(first[1].1.pos, Pos { line: 4, col: 15 });
        assert_eq!(text_of(&root), doc);
    }

    #[test]
    fn quoted_strings_keep_empty_and_escapes() {
        let root = parse("a: \"\"\nb: \"x \\\"y\\\"\"\n").unwrap();
        let Value::Map(e) = &root.value else { panic!() };
        assert_eq!(e[0].1.scalar().unwrap().text, "");
        assert!(e[0].1.scalar().unwrap().quoted);
        assert_eq!(e[1].1.as_str(), Some("x \"y\""));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let root = parse("# header\n\na: 1 # trailing\n  \nb: \"#x\" # c\n").unwrap();
        let Value::Map(e) = &root.value else { panic!() };
        assert_eq!(e[0].1.as_str(), Some("1"));
        assert_eq!(e[1].1.as_str(), Some("#x"));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse("a: 1\n   b: 2\n").unwrap_err();
        assert_eq!(err.pos.line, 2);
        let err = parse("a:\n\tb: 1\n").unwrap_err();
        assert_eq!(err.pos, Pos { line: 2, col: 1 });
        let err = parse("a: 1\na: 2\n").unwrap_err();
        assert!(err.message.contains("duplicate"));
        let err = parse("a: \"open\n").unwrap_err();
        assert!(err.message.contains("unterminated"));
        let err = parse("a:\n  - x\n  y: 1\n").unwrap_err();
        assert_eq!(err.pos.line, 3);
        let err = parse("a: {x: 1}\n").unwrap_err();
        assert!(err.message.contains("unsupported"));
    }

    #[test]
    fn empty_and_null_values() {
        let root = parse("a:\nb: []\n").unwrap();
        let Value::Map(e) = &root.value else { panic!() };
        assert!(e[0].1.is_null());
        assert_eq!(e[1].1.as_list().unwrap().len(), 0);
        assert_eq!(parse("").unwrap().value, Value::Map(vec![]));
    }

    #[test]
    fn nested_list_items_round_trip() {
        let value = Value::List(vec![
            list(vec![
                plain("a"),
                MapBuilder::new().put("k", plain("v")).build(),
            ]),
            MapBuilder::new()
                .put(
                    "inner",
                    list(vec![MapBuilder::new().put("x", quoted("1")).build()]),
                )
                .build(),
            node(Value::Null),
        ]);
        let text = to_text(&value);
        let back = parse(&text).unwrap();
        assert_eq!(to_text(&back.value), text);
    }

    #[test]
    fn plain_safety_rule() {
        for s in ["5M", "10ms", "a/b:c", "-5", "x.y", "component:NetMA"] {
            assert!(is_plain_safe(s), "{s}");
        }
        for s in ["", "-", "a b", "x:", "#x", "[a", "\"q", "a,b"] {
            assert!(!is_plain_safe(s), "{s}");
        }
    }
}
