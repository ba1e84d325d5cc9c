//! Syntax: abstract terms, the concrete grammar, and term-level utilities.

pub mod ast;
pub mod binding;
pub mod desugar;
pub mod lexer;
pub mod parser;
pub mod path;
pub mod pretty;
pub mod subst;

pub use ast::{CompTerm, CompType, OpName, ValueTerm, ValueType, ALL_OPS};
pub use binding::{
    alpha_cmp_comp, alpha_cmp_value, alpha_eq_comp, alpha_eq_value, alpha_hash_comp,
    alpha_hash_value, free_vars_comp, free_vars_value, fresh_name,
};
pub use desugar::desugar;
pub use parser::{parse, parse_value, parse_value_type, parse_with_spans, ParseError, Span, SpanTree};
pub use path::{children, get_at, preorder, replace_at, TermNode, TermRef};
pub use pretty::{pretty_comp, pretty_value};
pub use subst::{
    apply_closed_comp, apply_comp, apply_value, subst_closed_comp, substitute_comp,
    substitute_value, Subst,
};
