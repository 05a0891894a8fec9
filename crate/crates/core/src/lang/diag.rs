use std::fmt;

use serde::Serialize;

use super::ast::Span;

/// Upper bound on diagnostics reported for one input.
pub const MAX_DIAGNOSTICS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum DiagCode {
    #[serde(rename = "E_LEX")]
    Lexical,
    #[serde(rename = "E_SYNTAX")]
    Syntax,
    #[serde(rename = "E_UNKNOWN_IDENT")]
    UnknownIdentifier,
    #[serde(rename = "E_UNKNOWN_FIELD")]
    UnknownField,
    #[serde(rename = "E_DUPLICATE_TYPE")]
    DuplicateType,
    #[serde(rename = "E_DUPLICATE_OBJECT")]
    DuplicateObject,
    #[serde(rename = "E_DUPLICATE_FIELD")]
    DuplicateField,
    #[serde(rename = "E_SORT")]
    SortMismatch,
    #[serde(rename = "E_INVALID_DECL")]
    InvalidDeclaration,
}

impl DiagCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagCode::Lexical => "E_LEX",
            DiagCode::Syntax => "E_SYNTAX",
            DiagCode::UnknownIdentifier => "E_UNKNOWN_IDENT",
            DiagCode::UnknownField => "E_UNKNOWN_FIELD",
            DiagCode::DuplicateType => "E_DUPLICATE_TYPE",
            DiagCode::DuplicateObject => "E_DUPLICATE_OBJECT",
            DiagCode::DuplicateField => "E_DUPLICATE_FIELD",
            DiagCode::SortMismatch => "E_SORT",
            DiagCode::InvalidDeclaration => "E_INVALID_DECL",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub code: DiagCode,
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl Diagnostic {
    pub fn new(code: DiagCode, span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            code,
            line: span.line,
            col: span.col,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: error[{}]: {}",
            self.line,
            self.col,
            self.code.as_str(),
            self.message
        )
    }
}

/// A failed parse: at least one diagnostic, sorted by position.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}", render(.0))]
pub struct Diagnostics(pub Vec<Diagnostic>);

fn render(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

impl Diagnostics {
    /// Sorts by source position and truncates to [`MAX_DIAGNOSTICS`].
    pub fn normalized(mut diags: Vec<Diagnostic>) -> Self {
        diags.sort_by_key(|d| (d.line, d.col));
        diags.dedup();
        diags.truncate(MAX_DIAGNOSTICS);
        Diagnostics(diags)
    }

    pub fn first(&self) -> &Diagnostic {
        &self.0[0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Diagnostic> {
        self.0.iter()
    }
}
