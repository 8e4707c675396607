//! The logical-form action DSL: `Retrieval`, `Deduce`, `Math`, `Output`.
//!
//! Each sub-problem in a plan pairs a natural-language step with one action
//! expression. Actions name their results through aliases (`o1`, `math6`),
//! which later actions may reference either bare (`s=o1`) or inside content
//! lists (`content=[o1, o2]`); steps reference earlier results as `#1`, `#2`.
//!
//! Grammar accepted by [`parse_action`] (EBNF, whitespace-insensitive
//! between tokens):
//!
//! ```text
//! action      = "Retrieval" "(" spo-args ")"
//!             | "Deduce"    "(" deduce-args ")" arrow alias
//!             | "Math"      "(" math-args   ")" arrow alias
//!             | "Output"    "(" alias { "," alias } ")" ;
//! spo-args    = spo-arg { "," ( spo-arg | constraint ) } ;
//! spo-arg     = ( "s" | "p" | "o" ) "=" entity ;
//! entity      = alias [ ":" type ] [ "[" name "]" ] ;
//! constraint  = ( "s" | "p" | "o" ) "." prop "=" text ;
//! deduce-args = "op=" op-name "," "content=" list "," "target=" text ;
//! math-args   = "content=" list "," "target=" text ;
//! op-name     = "extract" | "judgement" | "entailment" | "choice" | "multiChoice" ;
//! list        = "[" [ item { "," item } ] "]" ;
//! arrow       = "->" | "\u{2192}" ;
//! alias       = ident ;                    (* [A-Za-z_][A-Za-z0-9_]* *)
//! type        = unquoted text, may contain spaces, ends at "[", "," or ")" ;
//! prop        = unquoted text up to "=" ;
//! name, text, item = quoted or bare text atom ;
//! ```
//!
//! Text atoms accept three quote styles plus bare text. The canonical style
//! is backtick-apostrophe (`` `name' ``); a closing apostrophe only counts
//! when the next non-space character is a delimiter (`,`, `)`, `]` or end of
//! input), so apostrophes inside quoted text survive (`` `What's next' ``).
//! Bare atoms run to the next top-level delimiter and keep balanced
//! parentheses/brackets intact. Bare and quoted items in content lists and
//! `Output` argument positions that look like identifiers are treated as
//! alias references; everything else is literal text.
//!
//! [`render_action`] prints the canonical form: backtick-apostrophe quoting
//! for names, targets, constraint values and literal content items; bare
//! aliases; `->` arrows. `parse(render(f))` reproduces `f` for every valid
//! form (equality ignores the recorded quote style, which is surface syntax).

mod ast;
mod parser;
mod render;
mod subst;

pub use ast::{
    Alias, ConstraintTarget, ContentItem, DeduceOp, EntityRef, LogicalForm, PropertyConstraint,
    QuoteStyle, TextAtom,
};
pub use parser::{parse_action, ParseError};
pub use render::render_action;
pub use subst::{step_refs, substitute_refs, SubstError};
