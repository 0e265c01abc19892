use super::ast::SourceLocation;
use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// Integer literal: value plus the exact spelling.
    Int(u64, String),
    Punct(&'static str),
    /// `#` at the start of a line.
    Hash,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(_, s) => format!("integer `{s}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Hash => "`#`".to_string(),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
    /// Inclusive end position.
    pub end_line: u32,
    pub end_col: u32,
}

// Longest match first.
const PUNCTS: &[&str] = &[
    "<<=", ">>=", "->", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=", "*=", "/=",
    "%=", "&=", "|=", "^=", "(", ")", "{", "}", "[", "]", ";", ",", ".", "+", "-", "*", "/", "%",
    "&", "|", "^", "~", "!", "<", ">", "=",
];

pub fn tokenize(src: &str, file: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let mut line_start = true;

    let err = |line: u32, col: u32, msg: String| ParseError {
        loc: SourceLocation::point(file, line, col),
        expected: Vec::new(),
        message: msg,
    };

    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            line_start = true;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
                col += 1;
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            let (sl, sc) = (line, col);
            i += 2;
            col += 2;
            loop {
                match chars.get(i) {
                    None => return Err(err(sl, sc, "unterminated block comment".into())),
                    Some('*') if chars.get(i + 1) == Some(&'/') => {
                        i += 2;
                        col += 2;
                        break;
                    }
                    Some('\n') => {
                        i += 1;
                        line += 1;
                        col = 1;
                    }
                    Some(_) => {
                        i += 1;
                        col += 1;
                    }
                }
            }
            continue;
        }

        let (sl, sc) = (line, col);
        let at_line_start = std::mem::replace(&mut line_start, false);

        if c == '#' {
            if !at_line_start {
                return Err(err(sl, sc, "`#` must start a line".into()));
            }
            out.push(Token { tok: Tok::Hash, line: sl, col: sc, end_line: sl, end_col: sc });
            i += 1;
            col += 1;
            continue;
        }

        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            out.push(Token { tok: Tok::Ident(word), line: sl, col: sc, end_line: sl, end_col: col - 1 });
            continue;
        }

        if c.is_ascii_digit() {
            let start = i;
            let hex = c == '0' && matches!(chars.get(i + 1), Some('x') | Some('X'));
            if hex {
                i += 2;
                while i < chars.len() && chars[i].is_ascii_hexdigit() {
                    i += 1;
                }
            } else {
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                return Err(err(sl, sc, "malformed integer literal".into()));
            }
            let spelling: String = chars[start..i].iter().collect();
            let parsed = if hex {
                u64::from_str_radix(&spelling[2..], 16)
            } else {
                spelling.parse::<u64>()
            };
            let value = parsed.map_err(|_| err(sl, sc, format!("integer literal `{spelling}` out of range")))?;
            col += (i - start) as u32;
            out.push(Token { tok: Tok::Int(value, spelling), line: sl, col: sc, end_line: sl, end_col: col - 1 });
            continue;
        }

        if c == '\'' {
            // 'x' or '\n'-style escapes.
            let (value, len) = match (chars.get(i + 1), chars.get(i + 2), chars.get(i + 3)) {
                (Some('\\'), Some(e), Some('\'')) => {
                    let v = match e {
                        'n' => b'\n',
                        't' => b'\t',
                        '0' => 0,
                        '\\' => b'\\',
                        '\'' => b'\'',
                        _ => return Err(err(sl, sc, format!("unknown escape `\\{e}`"))),
                    };
                    (v as u64, 4)
                }
                (Some(ch), Some('\''), _) if ch.is_ascii() && *ch != '\\' => (*ch as u64, 3),
                _ => return Err(err(sl, sc, "malformed character literal".into())),
            };
            let spelling: String = chars[i..i + len].iter().collect();
            i += len;
            col += len as u32;
            out.push(Token { tok: Tok::Int(value, spelling), line: sl, col: sc, end_line: sl, end_col: col - 1 });
            continue;
        }

        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                i += p.len();
                col += p.len() as u32;
                out.push(Token { tok: Tok::Punct(p), line: sl, col: sc, end_line: sl, end_col: col - 1 });
            }
            None => return Err(err(sl, sc, format!("unexpected character `{c}`"))),
        }
    }
    out.push(Token { tok: Tok::Eof, line, col, end_line: line, end_col: col });
    Ok(out)
}
