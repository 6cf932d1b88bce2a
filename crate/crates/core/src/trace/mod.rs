//! Memory access records, trace files and synthetic trace generators.

mod format;
mod gen;

pub use format::{read_trace, read_trace_bytes, write_trace, write_trace_bytes, TraceFormat, TRACE_MAGIC, TRACE_VERSION};
pub use gen::{generate_few_to_many, generate_many_to_few, TraceGenConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::PADDR_BITS;

/// Origin of a memory request.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessKind {
    IFetch,
    Load,
    Store,
}

impl AccessKind {
    pub fn is_instruction(self) -> bool {
        matches!(self, AccessKind::IFetch)
    }

    pub(crate) fn code(self) -> u64 {
        match self {
            AccessKind::IFetch => 0,
            AccessKind::Load => 1,
            AccessKind::Store => 2,
        }
    }

    pub(crate) fn from_code(code: u64) -> Option<Self> {
        match code {
            0 => Some(AccessKind::IFetch),
            1 => Some(AccessKind::Load),
            2 => Some(AccessKind::Store),
            _ => None,
        }
    }

    pub fn letter(self) -> char {
        match self {
            AccessKind::IFetch => 'I',
            AccessKind::Load => 'L',
            AccessKind::Store => 'S',
        }
    }

    pub fn from_letter(c: &str) -> Option<Self> {
        match c {
            "I" => Some(AccessKind::IFetch),
            "L" => Some(AccessKind::Load),
            "S" => Some(AccessKind::Store),
            _ => None,
        }
    }
}

/// One trace record.
///
/// `pc` is the virtual address of the instruction that issued the request;
/// for an instruction fetch it is the fetched instruction itself, so `pc`
/// and `paddr` agree on the 12-bit page offset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MemoryAccess {
    pub seq: u64,
    pub core: u8,
    pub kind: AccessKind,
    pub pc: u64,
    pub paddr: u64,
}

/// Largest core id representable in a packed record (6 bits).
pub const MAX_CORES: usize = 64;

impl MemoryAccess {
    pub fn line(&self) -> u64 {
        crate::line_of(self.paddr)
    }

    pub fn is_instruction(&self) -> bool {
        self.kind.is_instruction()
    }

    /// Checks the record-level invariants.
    pub fn validate(&self) -> Result<(), TraceError> {
        if self.paddr >> PADDR_BITS != 0 {
            return Err(TraceError::Invalid(format!(
                "record {}: paddr {:#x} exceeds {PADDR_BITS} bits",
                self.seq, self.paddr
            )));
        }
        if self.core as usize >= MAX_CORES {
            return Err(TraceError::Invalid(format!("record {}: core {} out of range", self.seq, self.core)));
        }
        if self.kind == AccessKind::IFetch && (self.pc ^ self.paddr) & 0xfff != 0 {
            return Err(TraceError::Invalid(format!(
                "record {}: ifetch pc {:#x} and paddr {:#x} disagree on page offset",
                self.seq, self.pc, self.paddr
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic {found:?} (expected \"PLLC\")")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported trace version {found} (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("truncated record at byte offset {offset}")]
    Truncated { offset: u64 },
    #[error("malformed record at {location}: {reason}")]
    Malformed { location: String, reason: String },
    #[error("invalid trace: {0}")]
    Invalid(String),
    #[error("invalid generator config: {0}")]
    Config(String),
}
