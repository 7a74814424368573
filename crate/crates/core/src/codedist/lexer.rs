use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Keyword,
    Identifier,
    Number,
    String,
    Operator,
    Punctuation,
    Comment,
    Newline,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
}

impl Token {
    pub fn new(kind: TokenKind, text: impl Into<String>) -> Self {
        Self {
            kind,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenSeq {
    pub tokens: Vec<Token>,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token texts joined by single spaces. For sources without comments or
    /// unterminated strings, lexing the result gives back an equal sequence.
    pub fn render(&self) -> String {
        self.tokens
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import",
    "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while",
    "with", "yield",
];

// Longest first so that greedy matching picks the longest operator.
const OPERATORS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "==", "!=", "<=", ">=", "<<", ">>",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=", "+", "-", "*", "/", "%", "@", "&", "|",
    "^", "~", "<", ">", "=", "!", ".",
];

const STRING_PREFIXES: &[&str] = &["r", "u", "b", "f", "br", "rb", "fr", "rf"];

fn is_ident_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    depth: usize,
    line_has_tokens: bool,
    out: Vec<Token>,
}

impl<'a> Lexer<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn push(&mut self, kind: TokenKind, start: usize) {
        let text = &self.src[start..self.pos];
        self.out.push(Token::new(kind, text));
        self.line_has_tokens = true;
    }

    fn run(mut self) -> Vec<Token> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                '\n' => {
                    self.pos += 1;
                    if self.depth == 0 && self.line_has_tokens {
                        self.out.push(Token::new(TokenKind::Newline, "\n"));
                        self.line_has_tokens = false;
                    }
                }
                '\\' if self.rest()[1..].starts_with('\n') => self.pos += 2,
                '\\' if self.rest()[1..].starts_with("\r\n") => self.pos += 3,
                c if c.is_whitespace() => self.pos += c.len_utf8(),
                '#' => {
                    let end = self
                        .rest()
                        .find('\n')
                        .map_or(self.src.len(), |i| self.pos + i);
                    let text = self.src[start..end].trim_end();
                    self.out.push(Token::new(TokenKind::Comment, text));
                    self.line_has_tokens = true;
                    self.pos = end;
                }
                '\'' | '"' => self.string(start),
                c if c.is_ascii_digit() => self.number(start),
                '.' if self.rest()[1..].starts_with(|d: char| d.is_ascii_digit()) => {
                    self.number(start)
                }
                c if is_ident_start(c) => self.word(start),
                '(' | '[' | '{' => {
                    self.pos += 1;
                    self.depth += 1;
                    self.push(TokenKind::Punctuation, start);
                }
                ')' | ']' | '}' => {
                    self.pos += 1;
                    self.depth = self.depth.saturating_sub(1);
                    self.push(TokenKind::Punctuation, start);
                }
                ',' | ':' | ';' => {
                    if c == ':' && self.rest().starts_with(":=") {
                        self.pos += 2;
                        self.push(TokenKind::Operator, start);
                    } else {
                        self.pos += 1;
                        self.push(TokenKind::Punctuation, start);
                    }
                }
                _ => {
                    if let Some(op) = OPERATORS.iter().find(|op| self.rest().starts_with(**op)) {
                        self.pos += op.len();
                        self.push(TokenKind::Operator, start);
                    } else {
                        self.pos += c.len_utf8();
                        self.push(TokenKind::Punctuation, start);
                    }
                }
            }
        }
        self.out
    }

    fn word(&mut self, start: usize) {
        let len = self
            .rest()
            .char_indices()
            .find(|&(_, c)| !is_ident_continue(c))
            .map_or(self.rest().len(), |(i, _)| i);
        self.pos += len;
        let word = &self.src[start..self.pos];
        if matches!(self.peek(), Some('\'' | '"'))
            && STRING_PREFIXES.contains(&word.to_ascii_lowercase().as_str())
        {
            self.string(start);
            return;
        }
        let kind = if KEYWORDS.contains(&word) {
            TokenKind::Keyword
        } else {
            TokenKind::Identifier
        };
        self.push(kind, start);
    }

    /// Lexes a string literal whose opening quote is at `self.pos`; `start`
    /// may be earlier when a prefix like `r` or `f` was consumed.
    fn string(&mut self, start: usize) {
        let quote = self.peek().expect("quote");
        let triple: String = std::iter::repeat_n(quote, 3).collect();
        if self.rest().starts_with(&triple) {
            self.pos += 3;
            let mut escaped = false;
            while let Some(c) = self.peek() {
                if !escaped && self.rest().starts_with(&triple) {
                    self.pos += 3;
                    break;
                }
                escaped = !escaped && c == '\\';
                self.pos += c.len_utf8();
            }
            self.push(TokenKind::String, start);
            return;
        }
        self.pos += 1;
        let mut escaped = false;
        let mut closed = false;
        while let Some(c) = self.peek() {
            if c == '\n' && !escaped {
                break;
            }
            self.pos += c.len_utf8();
            if !escaped && c == quote {
                closed = true;
                break;
            }
            escaped = !escaped && c == '\\';
        }
        let mut text = &self.src[start..self.pos];
        if !closed {
            // Trailing whitespace of an unterminated literal is a separator.
            text = text.trim_end();
        }
        self.out.push(Token::new(TokenKind::String, text));
        self.line_has_tokens = true;
    }

    fn number(&mut self, start: usize) {
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        let radix_prefix = bytes.get(i) == Some(&b'0')
            && matches!(
                bytes.get(i + 1),
                Some(b'x' | b'X' | b'o' | b'O' | b'b' | b'B')
            );
        if radix_prefix {
            i += 2;
            while i < bytes.len() && (bytes[i].is_ascii_hexdigit() || bytes[i] == b'_') {
                i += 1;
            }
        } else {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
                i += 1;
            }
            if bytes.get(i) == Some(&b'.') {
                i += 1;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
                    i += 1;
                }
            }
            if matches!(bytes.get(i), Some(b'e' | b'E')) {
                let mut j = i + 1;
                if matches!(bytes.get(j), Some(b'+' | b'-')) {
                    j += 1;
                }
                if bytes.get(j).is_some_and(u8::is_ascii_digit) {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            if matches!(bytes.get(i), Some(b'j' | b'J')) {
                i += 1;
            }
        }
        self.pos = i;
        self.push(TokenKind::Number, start);
    }
}

/// Splits source text into tokens. Whitespace and indentation are dropped,
/// comments are kept, and a newline token ends every logical line that
/// produced at least one token.
pub fn tokenize(source: &str) -> TokenSeq {
    let lexer = Lexer {
        src: source,
        pos: 0,
        depth: 0,
        line_has_tokens: false,
        out: Vec::new(),
    };
    TokenSeq {
        tokens: lexer.run(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use TokenKind::*;

    fn kinds(src: &str) -> Vec<(TokenKind, std::string::String)> {
        tokenize(src)
            .tokens
            .into_iter()
            .map(|t| (t.kind, t.text))
            .collect()
    }

    fn t(kind: TokenKind, text: &str) -> (TokenKind, std::string::String) {
        (kind, text.to_string())
    }

    #[test]
    fn empty_source() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \n\n  ").is_empty());
    }

    #[test]
    fn simple_assignment() {
        assert_eq!(
            kinds("x = 1"),
            vec![t(Identifier, "x"), t(Operator, "="), t(Number, "1")]
        );
    }

    #[test]
    fn trailing_comment() {
        assert_eq!(
            kinds("x = 1  # c"),
            vec![
                t(Identifier, "x"),
                t(Operator, "="),
                t(Number, "1"),
                t(Comment, "# c")
            ]
        );
    }

    #[test]
    fn logical_lines_and_brackets() {
        let src = "def f(a,\n      b):\n    return a+b\n\n\nprint(f(1, 2))\n";
        let toks = kinds(src);
        let newlines = toks.iter().filter(|(k, _)| *k == Newline).count();
        assert_eq!(newlines, 3);
        assert_eq!(toks[0], t(Keyword, "def"));
        assert!(toks.contains(&t(Operator, "+")));
    }

    #[test]
    fn strings_with_prefixes_and_triple_quotes() {
        let toks = kinds("s = f'{x}' + r\"a\\\"b\" + '''multi\nline'''\n");
        assert_eq!(toks[2], t(String, "f'{x}'"));
        assert_eq!(toks[4], t(String, "r\"a\\\"b\""));
        assert_eq!(toks[6], t(String, "'''multi\nline'''"));
        assert_eq!(toks[7], t(Newline, "\n"));
        assert_eq!(toks.len(), 8);
    }

    #[test]
    fn hash_inside_string_is_not_comment() {
        assert_eq!(kinds("'#x'"), vec![t(String, "'#x'")]);
    }

    #[test]
    fn numbers() {
        assert_eq!(
            kinds("0x1F 1_000 3.14 .5 1e-3 2j 7."),
            vec![
                t(Number, "0x1F"),
                t(Number, "1_000"),
                t(Number, "3.14"),
                t(Number, ".5"),
                t(Number, "1e-3"),
                t(Number, "2j"),
                t(Number, "7.")
            ]
        );
    }

    #[test]
    fn operators_longest_match() {
        assert_eq!(
            kinds("a //= b ** 2 != c"),
            vec![
                t(Identifier, "a"),
                t(Operator, "//="),
                t(Identifier, "b"),
                t(Operator, "**"),
                t(Number, "2"),
                t(Operator, "!="),
                t(Identifier, "c")
            ]
        );
    }

    #[test]
    fn unknown_characters_become_punctuation() {
        assert_eq!(kinds("a $ b")[1], t(Punctuation, "$"));
        assert_eq!(kinds("?")[0], t(Punctuation, "?"));
    }

    #[test]
    fn backslash_continuation_joins_lines() {
        let toks = kinds("x = 1 + \\\n    2\n");
        assert_eq!(toks.iter().filter(|(k, _)| *k == Newline).count(), 1);
    }

    #[test]
    fn render_relexes_to_same_sequence() {
        let src = "def f(s):\n    # reverse\n    return s[::-1]  # done\nx = 'it''s'\ny = \"open\n";
        let seq = tokenize(src);
        assert_eq!(tokenize(&seq.render()), seq);
    }
}
