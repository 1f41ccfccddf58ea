//! Source canonicalization and tokenization.
//!
//! Canonicalization strips comments (`// …`, `# …`, `/* … */`) and all
//! whitespace so that fingerprints are insensitive to formatting noise.
//! The comment grammar is a deliberate language-agnostic heuristic: string
//! literals are not protected, and a `//` inside one starts a comment.
//!
//! Tokenization is separate and works on the raw text (comments included):
//! words are maximal `[A-Za-z0-9_]` runs, everything else that is not
//! whitespace is a single-character symbol token.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Raw input text plus an optional, purely informational language tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceText {
    pub content: String,
    pub language_hint: Option<String>,
}

impl SourceText {
    pub fn new(content: impl Into<String>) -> Self {
        Self {
            content: content.into(),
            language_hint: None,
        }
    }
}

impl From<&str> for SourceText {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

impl From<String> for SourceText {
    fn from(s: String) -> Self {
        Self::new(s)
    }
}

/// Canonicalized text: no whitespace, no comments, case preserved.
///
/// `origin_map[i]` is the byte offset in the original content of the i-th
/// canonical character, so fingerprint matches can be reported against the
/// original text. It is strictly increasing and has one entry per char.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalText {
    pub chars: String,
    pub origin_map: Vec<usize>,
}

impl CanonicalText {
    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    /// Number of canonical characters (not bytes).
    pub fn char_count(&self) -> usize {
        self.origin_map.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TokenKind {
    Word,
    Symbol,
}

/// One token: a byte span of the original text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token {
    pub start: usize,
    pub len: usize,
    pub kind: TokenKind,
}

impl Token {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

/// Ordered tokens over an owned copy of the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenStream {
    text: String,
    tokens: Vec<Token>,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn token_text(&self, i: usize) -> &str {
        let t = &self.tokens[i];
        &self.text[t.start..t.end()]
    }

    /// Word-token texts in stream order.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tokens
            .iter()
            .filter(|t| t.kind == TokenKind::Word)
            .map(|t| &self.text[t.start..t.end()])
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WindowError {
    #[error("token window start={start} length={length} out of range for {available} tokens")]
    OutOfRange {
        start: usize,
        length: usize,
        available: usize,
    },
}

/// One comment/whitespace stripping pass.
///
/// Returns the kept characters and, per kept character, its byte offset in
/// `input`.
fn strip_once(input: &str) -> (String, Vec<usize>) {
    let bytes = input.as_bytes();
    let mut out = String::with_capacity(input.len());
    let mut map = Vec::new();
    let mut iter = input.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        match c {
            '/' if bytes.get(i + 1) == Some(&b'/') => {
                // Line comment: consume up to (not including) the newline.
                while let Some(&(_, c2)) = iter.peek() {
                    if c2 == '\n' {
                        break;
                    }
                    iter.next();
                }
            }
            '/' if bytes.get(i + 1) == Some(&b'*') => {
                iter.next();
                // Block comment; an unterminated one runs to end of input.
                let mut prev = '\0';
                for (_, c2) in iter.by_ref() {
                    if prev == '*' && c2 == '/' {
                        break;
                    }
                    prev = c2;
                }
            }
            '#' => {
                while let Some(&(_, c2)) = iter.peek() {
                    if c2 == '\n' {
                        break;
                    }
                    iter.next();
                }
            }
            c if c.is_whitespace() => {}
            c => {
                out.push(c);
                map.push(i);
            }
        }
    }
    (out, map)
}

/// Strip comments and whitespace, keeping a map back to original byte offsets.
///
/// Removing whitespace can merge characters into new comment starts
/// (`"a / / b"` squeezes to `"a//b"`), so stripping is iterated to a fixed
/// point; this makes the operation idempotent on its own output.
pub fn canonicalize(src: &SourceText) -> CanonicalText {
    let (mut chars, mut map) = strip_once(&src.content);
    loop {
        let (next, inner) = strip_once(&chars);
        if next == chars {
            break;
        }
        let mut composed = Vec::with_capacity(inner.len());
        let mut want = inner.iter().peekable();
        for (ord, (byte_idx, _)) in chars.char_indices().enumerate() {
            match want.peek() {
                Some(&&w) if w == byte_idx => {
                    composed.push(map[ord]);
                    want.next();
                }
                Some(_) => {}
                None => break,
            }
        }
        chars = next;
        map = composed;
    }
    CanonicalText {
        chars,
        origin_map: map,
    }
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Split raw text into word and symbol tokens; whitespace separates and is
/// discarded. Comments are not stripped here.
pub fn tokenize(src: &SourceText) -> TokenStream {
    let text = src.content.clone();
    let mut tokens = Vec::new();
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if c.is_whitespace() {
            continue;
        }
        if is_word_char(c) {
            let mut end = i + c.len_utf8();
            while let Some(&(j, c2)) = iter.peek() {
                if is_word_char(c2) {
                    end = j + c2.len_utf8();
                    iter.next();
                } else {
                    break;
                }
            }
            tokens.push(Token {
                start: i,
                len: end - i,
                kind: TokenKind::Word,
            });
        } else {
            tokens.push(Token {
                start: i,
                len: c.len_utf8(),
                kind: TokenKind::Symbol,
            });
        }
    }
    TokenStream { text, tokens }
}

/// Extract the original-text span covering `length` tokens starting at token
/// `start`. Interior whitespace is preserved.
pub fn extract_window(
    ts: &TokenStream,
    start: usize,
    length: usize,
) -> Result<SourceText, WindowError> {
    if length == 0 || start.checked_add(length).map_or(true, |e| e > ts.len()) {
        return Err(WindowError::OutOfRange {
            start,
            length,
            available: ts.len(),
        });
    }
    let first = &ts.tokens[start];
    let last = &ts.tokens[start + length - 1];
    Ok(SourceText::new(&ts.text[first.start..last.end()]))
}
