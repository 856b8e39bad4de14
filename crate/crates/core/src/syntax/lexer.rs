use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    /// Magnitude of an integer literal; sign is handled by the parser.
    Int(u64),
    Assign,
    Semi,
    Comma,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Plus,
    Minus,
    Star,
    EqEq,
    NotEq,
    Lt,
    Le,
    AndAnd,
    OrOr,
    Bang,
    Question,
    Colon,
    Arrow,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::Assign => ":=",
            Tok::Semi => ";",
            Tok::Comma => ",",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::EqEq => "==",
            Tok::NotEq => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Bang => "!",
            Tok::Question => "?",
            Tok::Colon => ":",
            Tok::Arrow => "->",
            Tok::Ident(_) | Tok::Int(_) => "",
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub(crate) fn lex(text: &str, first_line: usize) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let line_no = first_line + li;
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            if c == '#' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let push = |out: &mut Vec<Spanned>, tok| out.push(Spanned { tok, line: line_no, col });
            if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                push(&mut out, Tok::Ident(chars[start..i].iter().collect()));
                continue;
            }
            if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let digits: String = chars[start..i].iter().collect();
                let n = digits.parse::<u64>().map_err(|_| ParseError {
                    line: line_no,
                    col,
                    message: format!("integer literal `{digits}` out of range"),
                })?;
                push(&mut out, Tok::Int(n));
                continue;
            }
            let next = chars.get(i + 1).copied();
            let (tok, width) = match (c, next) {
                (':', Some('=')) => (Tok::Assign, 2),
                ('=', Some('=')) => (Tok::EqEq, 2),
                ('!', Some('=')) => (Tok::NotEq, 2),
                ('<', Some('=')) => (Tok::Le, 2),
                ('&', Some('&')) => (Tok::AndAnd, 2),
                ('|', Some('|')) => (Tok::OrOr, 2),
                ('-', Some('>')) => (Tok::Arrow, 2),
                (':', _) => (Tok::Colon, 1),
                (';', _) => (Tok::Semi, 1),
                (',', _) => (Tok::Comma, 1),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                ('{', _) => (Tok::LBrace, 1),
                ('}', _) => (Tok::RBrace, 1),
                ('[', _) => (Tok::LBracket, 1),
                (']', _) => (Tok::RBracket, 1),
                ('+', _) => (Tok::Plus, 1),
                ('-', _) => (Tok::Minus, 1),
                ('*', _) => (Tok::Star, 1),
                ('<', _) => (Tok::Lt, 1),
                ('!', _) => (Tok::Bang, 1),
                ('?', _) => (Tok::Question, 1),
                _ => {
                    return Err(ParseError {
                        line: line_no,
                        col,
                        message: format!("unexpected character `{c}`"),
                    })
                }
            };
            push(&mut out, tok);
            i += width;
        }
    }
    Ok(out)
}
