//! The `.tvk` model language: syntax, resolution and evaluation.

pub mod ast;
pub mod diag;
pub mod dims;
pub mod eval;
pub mod expand;
pub mod lexer;
pub mod model;
pub mod parser;
pub mod prelude;
pub mod pretty;
pub mod resolve;

pub use diag::{DiagCode, Diagnostic, Diagnostics};
pub use model::Model;
pub use parser::{parse_ast, parse_expr};
pub use resolve::{parse_model, resolve};
