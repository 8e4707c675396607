use super::ast::{
    Alias, ConstraintTarget, ContentItem, DeduceOp, EntityRef, LogicalForm, PropertyConstraint,
    QuoteStyle, TextAtom,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at byte {position}: expected {expected}, found {found}")]
    Syntax { position: usize, expected: String, found: String },
    #[error("unknown function `{name}` at byte {position}")]
    UnknownFunction { position: usize, name: String },
    #[error("unknown deduce op `{op}` at byte {position}")]
    UnknownDeduceOp { position: usize, op: String },
}

impl ParseError {
    pub fn position(&self) -> usize {
        match self {
            ParseError::Syntax { position, .. }
            | ParseError::UnknownFunction { position, .. }
            | ParseError::UnknownDeduceOp { position, .. } => *position,
        }
    }
}

/// Parses one action expression. Total: any input yields an AST or a
/// positioned error, never a panic or hang. The leading `ActionN:` label, if
/// any, must already be stripped by the caller.
pub fn parse_action(input: &str) -> Result<LogicalForm, ParseError> {
    let mut cur = Cursor::new(input);
    cur.skip_ws();
    let func_pos = cur.pos;
    let func = cur.ident().ok_or_else(|| cur.err("a function name"))?;
    let form = match func {
        "Retrieval" => parse_retrieval(&mut cur)?,
        "Deduce" => parse_deduce(&mut cur, true)?,
        "Math" => parse_deduce(&mut cur, false)?,
        "Output" => parse_output(&mut cur)?,
        other => {
            return Err(ParseError::UnknownFunction {
                position: func_pos,
                name: other.to_owned(),
            })
        }
    };
    cur.skip_ws();
    if !cur.at_end() {
        return Err(cur.err("end of input"));
    }
    Ok(form)
}

fn parse_retrieval(cur: &mut Cursor) -> Result<LogicalForm, ParseError> {
    cur.expect('(')?;
    let (mut s, mut p, mut o) = (None, None, None);
    let mut constraints = Vec::new();
    loop {
        cur.skip_ws();
        let key_pos = cur.pos;
        let key = cur.ident().ok_or_else(|| cur.err("an s/p/o slot or constraint"))?;
        let target = match key {
            "s" => ConstraintTarget::Subject,
            "p" => ConstraintTarget::Predicate,
            "o" => ConstraintTarget::Object,
            other => {
                return Err(ParseError::Syntax {
                    position: key_pos,
                    expected: "one of `s`, `p`, `o`".into(),
                    found: format!("`{other}`"),
                })
            }
        };
        cur.skip_ws();
        if cur.eat('.') {
            // Property constraint: prop names may contain spaces (`Degree of burn`).
            cur.skip_ws();
            let prop_start = cur.pos;
            let prop = cur.take_until(|c| c == '=' || c == ',' || c == ')');
            let prop = prop.trim();
            if prop.is_empty() || !cur.eat('=') {
                cur.pos = prop_start;
                return Err(cur.err("a property name followed by `=`"));
            }
            let value = parse_atom(cur)?;
            constraints.push(PropertyConstraint { target, prop: prop.to_owned(), value });
        } else if cur.eat('=') {
            let slot = match target {
                ConstraintTarget::Subject => &mut s,
                ConstraintTarget::Predicate => &mut p,
                ConstraintTarget::Object => &mut o,
            };
            if slot.is_some() {
                return Err(ParseError::Syntax {
                    position: key_pos,
                    expected: "each of s/p/o exactly once".into(),
                    found: format!("a second `{}` slot", target.symbol()),
                });
            }
            *slot = Some(parse_entity(cur)?);
        } else {
            return Err(cur.err("`=` or `.`"));
        }
        cur.skip_ws();
        if cur.eat(',') {
            continue;
        }
        cur.expect(')')?;
        break;
    }
    let missing = |slot: char| ParseError::Syntax {
        position: cur.pos,
        expected: format!("a `{slot}=` slot"),
        found: "end of argument list".into(),
    };
    Ok(LogicalForm::Retrieval {
        s: s.ok_or_else(|| missing('s'))?,
        p: p.ok_or_else(|| missing('p'))?,
        o: o.ok_or_else(|| missing('o'))?,
        constraints,
    })
}

fn parse_entity(cur: &mut Cursor) -> Result<EntityRef, ParseError> {
    cur.skip_ws();
    let alias_raw = cur.ident().ok_or_else(|| cur.err("an alias"))?;
    let alias = Alias::new(alias_raw).expect("ident tokens are valid aliases");
    cur.skip_ws();
    let type_name = if cur.eat(':') {
        cur.skip_ws();
        let start = cur.pos;
        let ty = cur.take_until(|c| c == '[' || c == ',' || c == ')');
        let ty = ty.trim_end();
        if ty.is_empty() {
            cur.pos = start;
            return Err(cur.err("a type name"));
        }
        Some(ty.to_owned())
    } else {
        None
    };
    cur.skip_ws();
    let display_name = if cur.eat('[') {
        let atom = parse_atom_in_brackets(cur)?;
        cur.skip_ws();
        cur.expect(']')?;
        Some(atom)
    } else {
        None
    };
    Ok(EntityRef { alias, type_name, display_name })
}

fn parse_deduce(cur: &mut Cursor, with_op: bool) -> Result<LogicalForm, ParseError> {
    cur.expect('(')?;
    let mut op = None;
    let mut content: Option<Vec<ContentItem>> = None;
    let mut target = None;
    loop {
        cur.skip_ws();
        let key_pos = cur.pos;
        let key = cur.ident().ok_or_else(|| cur.err("an argument name"))?;
        cur.skip_ws();
        cur.expect('=')?;
        match key {
            "op" if with_op => {
                cur.skip_ws();
                let op_pos = cur.pos;
                let name = cur.ident().ok_or_else(|| cur.err("a deduce op"))?;
                op = Some(DeduceOp::from_name(name).ok_or(ParseError::UnknownDeduceOp {
                    position: op_pos,
                    op: name.to_owned(),
                })?);
            }
            "content" => content = Some(parse_content_list(cur)?),
            "target" => {
                let atom = parse_atom(cur)?;
                if atom.text.is_empty() {
                    return Err(ParseError::Syntax {
                        position: key_pos,
                        expected: "a non-empty target".into(),
                        found: "an empty atom".into(),
                    });
                }
                target = Some(atom);
            }
            other => {
                return Err(ParseError::Syntax {
                    position: key_pos,
                    expected: if with_op {
                        "`op`, `content` or `target`".into()
                    } else {
                        "`content` or `target`".into()
                    },
                    found: format!("`{other}`"),
                })
            }
        }
        cur.skip_ws();
        if cur.eat(',') {
            continue;
        }
        cur.expect(')')?;
        break;
    }
    let end_pos = cur.pos;
    let missing = |what: &str| ParseError::Syntax {
        position: end_pos,
        expected: format!("a `{what}=` argument"),
        found: "end of argument list".into(),
    };
    let content = content.ok_or_else(|| missing("content"))?;
    let target = target.ok_or_else(|| missing("target"))?;
    let op = if with_op { Some(op.ok_or_else(|| missing("op"))?) } else { None };
    let out = parse_out_alias(cur)?;
    Ok(match op {
        Some(op) => LogicalForm::Deduce { op, content, target, out },
        None => LogicalForm::Math { content, target, out },
    })
}

fn parse_content_list(cur: &mut Cursor) -> Result<Vec<ContentItem>, ParseError> {
    cur.skip_ws();
    cur.expect('[')?;
    let mut items = Vec::new();
    cur.skip_ws();
    if cur.eat(']') {
        return Ok(items);
    }
    loop {
        let atom = parse_atom_in_brackets(cur)?;
        items.push(match Alias::new(atom.text.as_str()) {
            Some(alias) => ContentItem::Alias(alias),
            None => ContentItem::Literal(atom),
        });
        cur.skip_ws();
        if cur.eat(',') {
            continue;
        }
        cur.expect(']')?;
        break;
    }
    Ok(items)
}

fn parse_output(cur: &mut Cursor) -> Result<LogicalForm, ParseError> {
    cur.expect('(')?;
    let mut args = Vec::new();
    loop {
        cur.skip_ws();
        let raw = cur.ident().ok_or_else(|| cur.err("an alias"))?;
        args.push(Alias::new(raw).expect("ident tokens are valid aliases"));
        cur.skip_ws();
        if cur.eat(',') {
            continue;
        }
        cur.expect(')')?;
        break;
    }
    Ok(LogicalForm::Output { args })
}

fn parse_out_alias(cur: &mut Cursor) -> Result<Alias, ParseError> {
    cur.skip_ws();
    if !(cur.eat_str("->") || cur.eat('\u{2192}')) {
        return Err(cur.err("`->` and an output alias"));
    }
    cur.skip_ws();
    let raw = cur.ident().ok_or_else(|| cur.err("an output alias"))?;
    Ok(Alias::new(raw).expect("ident tokens are valid aliases"))
}

/// Atom in argument position: terminated by a top-level `,` or `)`.
fn parse_atom(cur: &mut Cursor) -> Result<TextAtom, ParseError> {
    parse_atom_impl(cur, false)
}

/// Atom inside `[...]`: a top-level `]` also terminates it.
fn parse_atom_in_brackets(cur: &mut Cursor) -> Result<TextAtom, ParseError> {
    parse_atom_impl(cur, true)
}

fn parse_atom_impl(cur: &mut Cursor, in_brackets: bool) -> Result<TextAtom, ParseError> {
    cur.skip_ws();
    match cur.peek() {
        Some('`') => quoted_atom(cur, '`', QuoteStyle::BacktickApostrophe),
        Some('\'') => quoted_atom(cur, '\'', QuoteStyle::Single),
        Some('"') => {
            cur.bump();
            let start = cur.pos;
            let end = cur.src[cur.pos..]
                .find('"')
                .map(|i| cur.pos + i)
                .ok_or_else(|| cur.err_at(start, "a closing `\"`"))?;
            let text = cur.src[start..end].to_owned();
            cur.pos = end + 1;
            Ok(TextAtom::quoted(text, QuoteStyle::Double))
        }
        _ => bare_atom(cur, in_brackets),
    }
}

/// Backtick-apostrophe and single-quote styles share the closing rule: an
/// apostrophe only closes the atom when the next non-space character is a
/// delimiter, so apostrophes inside the text do not terminate it early.
fn quoted_atom(cur: &mut Cursor, open: char, style: QuoteStyle) -> Result<TextAtom, ParseError> {
    debug_assert_eq!(cur.peek(), Some(open));
    cur.bump();
    let start = cur.pos;
    let bytes = cur.src.as_bytes();
    let mut i = cur.pos;
    while i < bytes.len() {
        if bytes[i] == b'\'' {
            let mut j = i + 1;
            while j < bytes.len() && (bytes[j] as char).is_whitespace() {
                j += 1;
            }
            if j >= bytes.len() || matches!(bytes[j], b',' | b')' | b']') {
                let text = cur.src[start..i].to_owned();
                cur.pos = i + 1;
                return Ok(TextAtom::quoted(text, style));
            }
        }
        i += 1;
    }
    Err(cur.err_at(start, "a closing `'`"))
}

/// Unquoted run up to the next top-level delimiter; nested parentheses and
/// brackets stay part of the text.
fn bare_atom(cur: &mut Cursor, in_brackets: bool) -> Result<TextAtom, ParseError> {
    let start = cur.pos;
    let mut parens = 0usize;
    let mut brackets = 0usize;
    for (off, c) in cur.src[start..].char_indices() {
        let i = start + off;
        match c {
            '(' => parens += 1,
            ')' if parens > 0 => parens -= 1,
            '[' => brackets += 1,
            ']' if brackets > 0 => brackets -= 1,
            ')' | ',' if parens == 0 && brackets == 0 => {
                return finish_bare(cur, start, i);
            }
            ']' if in_brackets && parens == 0 => {
                return finish_bare(cur, start, i);
            }
            _ => {}
        }
    }
    finish_bare(cur, start, cur.src.len())
}

fn finish_bare(cur: &mut Cursor, start: usize, end: usize) -> Result<TextAtom, ParseError> {
    let text = cur.src[start..end].trim_end();
    if text.is_empty() {
        return Err(cur.err_at(start, "a value"));
    }
    cur.pos = start + text.len();
    Ok(TextAtom::new(text))
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor { src, pos: 0 }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn eat_str(&mut self, s: &str) -> bool {
        if self.src[self.pos..].starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("`{c}`")))
        }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn ident(&mut self) -> Option<&'a str> {
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => self.bump(),
            _ => return None,
        };
        while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
            self.bump();
        }
        Some(&self.src[start..self.pos])
    }

    /// Consumes characters until `stop` matches; the stop character itself is
    /// left in place.
    fn take_until(&mut self, stop: impl Fn(char) -> bool) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if stop(c) {
                break;
            }
            self.bump();
        }
        &self.src[start..self.pos]
    }

    fn err(&self, expected: &str) -> ParseError {
        self.err_at(self.pos, expected)
    }

    fn err_at(&self, position: usize, expected: &str) -> ParseError {
        let rest = &self.src[position.min(self.src.len())..];
        let found = if rest.is_empty() {
            "end of input".to_owned()
        } else {
            let snippet: String = rest.chars().take(12).collect();
            format!("`{snippet}`")
        };
        ParseError::Syntax { position, expected: expected.to_owned(), found }
    }
}
