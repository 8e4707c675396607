use std::collections::BTreeSet;
use std::fmt;

/// Variable name linking sub-problems: `o1`, `math6`, `deduce_2`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Alias(String);

impl Alias {
    /// Accepts `[A-Za-z_][A-Za-z0-9_]*`, rejects everything else.
    pub fn new(name: impl Into<String>) -> Option<Alias> {
        let name = name.into();
        if Self::is_valid(&name) {
            Some(Alias(name))
        } else {
            None
        }
    }

    pub fn is_valid(name: &str) -> bool {
        let mut chars = name.chars();
        match chars.next() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return false,
        }
        chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Alias {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl serde::Serialize for Alias {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> serde::Deserialize<'de> for Alias {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Alias::new(raw.as_str())
            .ok_or_else(|| serde::de::Error::custom(format!("invalid alias `{raw}`")))
    }
}

/// Quote delimiters observed around a text atom in the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuoteStyle {
    #[default]
    Bare,
    /// `` `text' ``, the canonical style on output.
    BacktickApostrophe,
    /// `'text'`
    Single,
    /// `"text"`
    Double,
}

/// Free text plus the quoting it carried in the source.
///
/// Equality ignores the quote style: `` `2002' `` and `2002` are the same
/// atom. The style is kept only as surface information for diagnostics.
#[derive(Debug, Clone, Eq)]
pub struct TextAtom {
    pub text: String,
    pub quote: QuoteStyle,
}

impl TextAtom {
    pub fn new(text: impl Into<String>) -> Self {
        TextAtom { text: text.into(), quote: QuoteStyle::Bare }
    }

    pub fn quoted(text: impl Into<String>, quote: QuoteStyle) -> Self {
        TextAtom { text: text.into(), quote }
    }
}

impl PartialEq for TextAtom {
    fn eq(&self, other: &Self) -> bool {
        self.text == other.text
    }
}

impl fmt::Display for TextAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// One slot of a `Retrieval` triple.
///
/// A bare alias (no type, no display name) is a back-reference to a variable
/// introduced earlier in the plan; a slot carrying a type and/or name
/// introduces a fresh variable.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityRef {
    pub alias: Alias,
    pub type_name: Option<String>,
    pub display_name: Option<TextAtom>,
}

impl EntityRef {
    pub fn back_reference(alias: Alias) -> Self {
        EntityRef { alias, type_name: None, display_name: None }
    }

    pub fn fresh(alias: Alias, type_name: Option<&str>, display_name: Option<&str>) -> Self {
        EntityRef {
            alias,
            type_name: type_name.map(str::to_owned),
            display_name: display_name.map(TextAtom::new),
        }
    }

    /// True when the slot is only an alias, i.e. refers back to an earlier
    /// variable instead of introducing one.
    pub fn is_back_reference(&self) -> bool {
        self.type_name.is_none() && self.display_name.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintTarget {
    Subject,
    Predicate,
    Object,
}

impl ConstraintTarget {
    pub fn symbol(self) -> char {
        match self {
            ConstraintTarget::Subject => 's',
            ConstraintTarget::Predicate => 'p',
            ConstraintTarget::Object => 'o',
        }
    }
}

/// `s.ReleaseYear=2002` style property filter on one SPO slot.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyConstraint {
    pub target: ConstraintTarget,
    pub prop: String,
    pub value: TextAtom,
}

/// Closed set of deduction operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeduceOp {
    Extract,
    Judgement,
    Entailment,
    Choice,
    MultiChoice,
}

impl DeduceOp {
    pub fn name(self) -> &'static str {
        match self {
            DeduceOp::Extract => "extract",
            DeduceOp::Judgement => "judgement",
            DeduceOp::Entailment => "entailment",
            DeduceOp::Choice => "choice",
            DeduceOp::MultiChoice => "multiChoice",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "extract" => Some(DeduceOp::Extract),
            "judgement" => Some(DeduceOp::Judgement),
            "entailment" => Some(DeduceOp::Entailment),
            "choice" => Some(DeduceOp::Choice),
            "multiChoice" => Some(DeduceOp::MultiChoice),
            _ => None,
        }
    }
}

impl fmt::Display for DeduceOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Element of a `content=[...]` list: either a variable reference or a
/// literal known condition carried verbatim.
#[derive(Debug, Clone, PartialEq)]
pub enum ContentItem {
    Alias(Alias),
    Literal(TextAtom),
}

impl ContentItem {
    pub fn literal(text: impl Into<String>) -> Self {
        ContentItem::Literal(TextAtom::new(text))
    }

    pub fn alias(&self) -> Option<&Alias> {
        match self {
            ContentItem::Alias(a) => Some(a),
            ContentItem::Literal(_) => None,
        }
    }
}

/// One action expression of the DSL.
#[derive(Debug, Clone, PartialEq)]
pub enum LogicalForm {
    Retrieval {
        s: EntityRef,
        p: EntityRef,
        o: EntityRef,
        constraints: Vec<PropertyConstraint>,
    },
    Deduce {
        op: DeduceOp,
        content: Vec<ContentItem>,
        target: TextAtom,
        out: Alias,
    },
    Math {
        content: Vec<ContentItem>,
        target: TextAtom,
        out: Alias,
    },
    Output {
        args: Vec<Alias>,
    },
}

impl LogicalForm {
    pub fn func_name(&self) -> &'static str {
        match self {
            LogicalForm::Retrieval { .. } => "Retrieval",
            LogicalForm::Deduce { .. } => "Deduce",
            LogicalForm::Math { .. } => "Math",
            LogicalForm::Output { .. } => "Output",
        }
    }

    /// Alias that receives this action's answer once solved: the object
    /// alias of a `Retrieval`, the arrow alias of `Deduce`/`Math`.
    pub fn output_alias(&self) -> Option<&Alias> {
        match self {
            LogicalForm::Retrieval { o, .. } => Some(&o.alias),
            LogicalForm::Deduce { out, .. } | LogicalForm::Math { out, .. } => Some(out),
            LogicalForm::Output { .. } => None,
        }
    }

    pub fn content(&self) -> Option<&[ContentItem]> {
        match self {
            LogicalForm::Deduce { content, .. } | LogicalForm::Math { content, .. } => {
                Some(content)
            }
            _ => None,
        }
    }

    /// Every alias occurring anywhere in the form, defined or referenced.
    pub fn aliases(&self) -> BTreeSet<&Alias> {
        let mut set = BTreeSet::new();
        match self {
            LogicalForm::Retrieval { s, p, o, .. } => {
                set.insert(&s.alias);
                set.insert(&p.alias);
                set.insert(&o.alias);
            }
            LogicalForm::Deduce { content, out, .. } | LogicalForm::Math { content, out, .. } => {
                set.extend(content.iter().filter_map(ContentItem::alias));
                set.insert(out);
            }
            LogicalForm::Output { args } => set.extend(args.iter()),
        }
        set
    }

    /// Aliases this form consumes: bare SPO back-references, content alias
    /// items and `Output` arguments.
    pub fn referenced_aliases(&self) -> Vec<&Alias> {
        match self {
            // The o slot always names this action's own output, so only s
            // and p can point backwards.
            LogicalForm::Retrieval { s, p, .. } => [s, p]
                .into_iter()
                .filter(|r| r.is_back_reference())
                .map(|r| &r.alias)
                .collect(),
            LogicalForm::Deduce { content, .. } | LogicalForm::Math { content, .. } => {
                content.iter().filter_map(ContentItem::alias).collect()
            }
            LogicalForm::Output { args } => args.iter().collect(),
        }
    }
}

impl serde::Serialize for LogicalForm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::render_action(self))
    }
}

impl<'de> serde::Deserialize<'de> for LogicalForm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        super::parse_action(&raw).map_err(serde::de::Error::custom)
    }
}
