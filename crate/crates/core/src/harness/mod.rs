// SPDX-License-Identifier: Apache-2.0

//! RVFI retirement records and the verification harness that presents
//! them from the pipeline.

mod attach;
mod record;

pub use attach::{attach_rvfi, attach_rvfi_with, extract_record, RvfiPorts};
pub use record::{RvfiField, RvfiRecord, RvfiTrace, TraceError};
