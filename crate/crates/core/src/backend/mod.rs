// SPDX-License-Identifier: Apache-2.0

//! Verilog emission, structural lint and the cross-configuration size report.

mod lint;
mod report;
mod verilog;

use thiserror::Error;

pub use lint::{lint, LintKind, LintViolation};
pub use report::{size_report, size_row, SizeReport, SizeRow};
pub use verilog::{
    emit_verilog, section_text, staging_register_names, stripped_len, SECTION_BEGIN, SECTION_END,
};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("cannot emit {0}")]
    UnsupportedNode(String),
    #[error("design fails lint: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Lint(Vec<LintViolation>),
    #[error("size report needs at least one configuration")]
    NoConfigs,
    #[error(transparent)]
    Core(#[from] crate::cpu::CoreError),
    #[error(transparent)]
    Graph(#[from] crate::stagegraph::Error),
}

/// Lints, then emits.
pub fn emit_checked(design: &crate::stagegraph::ElaboratedDesign) -> Result<String, BackendError> {
    lint(design).map_err(BackendError::Lint)?;
    emit_verilog(design)
}
