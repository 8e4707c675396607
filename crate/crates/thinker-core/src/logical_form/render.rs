use super::ast::{ContentItem, EntityRef, LogicalForm, QuoteStyle, TextAtom};
use std::fmt::Write;

/// Prints an action in canonical form: `, ` between arguments, no spaces
/// around `=`, ASCII `->` before the output alias, and each atom quoted with
/// its recorded style when that style survives a re-parse (promoted to a safe
/// style otherwise). `parse_action(render_action(&form))` reconstructs an
/// equal form for any form free of identifier-shaped literals; those re-parse
/// as alias references by grammar.
pub fn render_action(form: &LogicalForm) -> String {
    let mut out = String::new();
    match form {
        LogicalForm::Retrieval { s, p, o, constraints } => {
            out.push_str("Retrieval(");
            write_entity(&mut out, 's', s);
            out.push_str(", ");
            write_entity(&mut out, 'p', p);
            out.push_str(", ");
            write_entity(&mut out, 'o', o);
            for c in constraints {
                let _ = write!(out, ", {}.{}=", c.target.symbol(), c.prop);
                write_atom(&mut out, &c.value, false);
            }
            out.push(')');
        }
        LogicalForm::Deduce { op, content, target, out: alias } => {
            let _ = write!(out, "Deduce(op={}, content=", op.name());
            write_content(&mut out, content);
            out.push_str(", target=");
            write_atom(&mut out, target, false);
            let _ = write!(out, ")->{alias}");
        }
        LogicalForm::Math { content, target, out: alias } => {
            out.push_str("Math(content=");
            write_content(&mut out, content);
            out.push_str(", target=");
            write_atom(&mut out, target, false);
            let _ = write!(out, ")->{alias}");
        }
        LogicalForm::Output { args } => {
            out.push_str("Output(");
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(a.as_str());
            }
            out.push(')');
        }
    }
    out
}

impl std::fmt::Display for LogicalForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&render_action(self))
    }
}

fn write_entity(out: &mut String, slot: char, e: &EntityRef) {
    let _ = write!(out, "{slot}={}", e.alias);
    if let Some(ty) = &e.type_name {
        let _ = write!(out, ":{ty}");
    }
    if let Some(name) = &e.display_name {
        out.push('[');
        write_atom(out, name, true);
        out.push(']');
    }
}

fn write_content(out: &mut String, items: &[ContentItem]) {
    out.push('[');
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        match item {
            ContentItem::Alias(a) => out.push_str(a.as_str()),
            ContentItem::Literal(atom) => write_atom(out, atom, true),
        }
    }
    out.push(']');
}

fn write_atom(out: &mut String, atom: &TextAtom, in_brackets: bool) {
    let style = effective_style(atom, in_brackets);
    match style {
        QuoteStyle::Bare => out.push_str(&atom.text),
        QuoteStyle::BacktickApostrophe => {
            let _ = write!(out, "`{}'", atom.text);
        }
        QuoteStyle::Single => {
            let _ = write!(out, "'{}'", atom.text);
        }
        QuoteStyle::Double => {
            let _ = write!(out, "\"{}\"", atom.text);
        }
    }
}

fn effective_style(atom: &TextAtom, in_brackets: bool) -> QuoteStyle {
    let text = atom.text.as_str();
    match atom.quote {
        QuoteStyle::Bare if bare_safe(text, in_brackets) => QuoteStyle::Bare,
        QuoteStyle::Double if !text.contains('"') => QuoteStyle::Double,
        QuoteStyle::Single if apostrophe_safe(text) => QuoteStyle::Single,
        _ if apostrophe_safe(text) => QuoteStyle::BacktickApostrophe,
        _ if !text.contains('"') => QuoteStyle::Double,
        // No style can hold this text losslessly; backtick keeps the most.
        _ => QuoteStyle::BacktickApostrophe,
    }
}

/// A bare atom survives a re-parse only if no character could act as a
/// delimiter or opening quote and the ends carry no trimmable whitespace.
fn bare_safe(text: &str, in_brackets: bool) -> bool {
    if text.is_empty() || text != text.trim() {
        return false;
    }
    if text.starts_with(['`', '\'', '"']) {
        return false;
    }
    let _ = in_brackets;
    !text.contains(['(', ')', '[', ']', ',', '\n'])
}

/// Inside `'`-closed quotes an interior apostrophe is harmless unless the
/// next non-space character is a delimiter, which would end the atom early.
fn apostrophe_safe(text: &str) -> bool {
    let bytes = text.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if b != b'\'' {
            continue;
        }
        let mut j = i + 1;
        while j < bytes.len() && (bytes[j] as char).is_whitespace() {
            j += 1;
        }
        if j < bytes.len() && matches!(bytes[j], b',' | b')' | b']') {
            return false;
        }
    }
    true
}
