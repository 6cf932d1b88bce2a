//! On-disk trace encodings.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! header  16 B : magic "PLLC" | version u16 | core_count u16 | record_count u64
//! record  24 B : seq u64 | pc u64 | word u64
//! word         : kind (bits 63..62) | core (bits 61..56) | paddr (bits 43..0)
//! ```
//!
//! The text form carries one record per line, `seq core kind pc paddr`, with
//! all numbers in hex and kind one of `I`, `L`, `S`. Its first line is the
//! header comment `# PLLC v<version> cores=<n>`.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{AccessKind, MemoryAccess, TraceError};

pub const TRACE_MAGIC: [u8; 4] = *b"PLLC";
pub const TRACE_VERSION: u16 = 1;

const HEADER_LEN: usize = 16;
const RECORD_LEN: usize = 24;
const PADDR_MASK: u64 = (1 << 56) - 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceFormat {
    Binary,
    Text,
}

impl TraceFormat {
    /// `.txt` selects the text form; anything else is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("txt") => TraceFormat::Text,
            _ => TraceFormat::Binary,
        }
    }
}

fn core_count(stream: &[MemoryAccess]) -> u16 {
    stream.iter().map(|a| a.core as u16 + 1).max().unwrap_or(0)
}

pub fn write_trace_bytes(stream: &[MemoryAccess], format: TraceFormat) -> Result<Vec<u8>, TraceError> {
    for acc in stream {
        acc.validate()?;
    }
    check_monotonic(stream)?;
    let mut out = Vec::new();
    match format {
        TraceFormat::Binary => {
            out.reserve(HEADER_LEN + RECORD_LEN * stream.len());
            out.extend_from_slice(&TRACE_MAGIC);
            out.extend_from_slice(&TRACE_VERSION.to_le_bytes());
            out.extend_from_slice(&core_count(stream).to_le_bytes());
            out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
            for acc in stream {
                let word = acc.kind.code() << 62 | (acc.core as u64) << 56 | acc.paddr;
                out.extend_from_slice(&acc.seq.to_le_bytes());
                out.extend_from_slice(&acc.pc.to_le_bytes());
                out.extend_from_slice(&word.to_le_bytes());
            }
        }
        TraceFormat::Text => {
            writeln!(out, "# PLLC v{} cores={}", TRACE_VERSION, core_count(stream))?;
            for acc in stream {
                writeln!(out, "{:x} {:x} {} {:x} {:x}", acc.seq, acc.core, acc.kind.letter(), acc.pc, acc.paddr)?;
            }
        }
    }
    Ok(out)
}

pub fn write_trace(path: &Path, stream: &[MemoryAccess]) -> Result<(), TraceError> {
    let bytes = write_trace_bytes(stream, TraceFormat::from_path(path))?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<Vec<MemoryAccess>, TraceError> {
    let bytes = fs::read(path)?;
    read_trace_bytes(&bytes, TraceFormat::from_path(path))
}

pub fn read_trace_bytes(bytes: &[u8], format: TraceFormat) -> Result<Vec<MemoryAccess>, TraceError> {
    let stream = match format {
        TraceFormat::Binary => decode_binary(bytes)?,
        TraceFormat::Text => decode_text(bytes)?,
    };
    for acc in &stream {
        acc.validate()?;
    }
    check_monotonic(&stream)?;
    Ok(stream)
}

fn check_monotonic(stream: &[MemoryAccess]) -> Result<(), TraceError> {
    for w in stream.windows(2) {
        if w[1].seq <= w[0].seq {
            return Err(TraceError::Invalid(format!("seq {} follows {} (must strictly increase)", w[1].seq, w[0].seq)));
        }
    }
    Ok(())
}

fn u64_at(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8-byte slice"))
}

fn decode_binary(bytes: &[u8]) -> Result<Vec<MemoryAccess>, TraceError> {
    if bytes.len() < HEADER_LEN {
        return Err(TraceError::Truncated { offset: 0 });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().expect("4-byte slice");
    if magic != TRACE_MAGIC {
        return Err(TraceError::BadMagic { found: magic });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != TRACE_VERSION {
        return Err(TraceError::VersionMismatch { found: version, expected: TRACE_VERSION });
    }
    let declared_cores = u16::from_le_bytes([bytes[6], bytes[7]]);
    let count = u64_at(bytes, 8);

    let body = &bytes[HEADER_LEN..];
    let whole = body.len() / RECORD_LEN;
    if (whole as u64) < count {
        let offset = (HEADER_LEN + whole * RECORD_LEN) as u64;
        return Err(TraceError::Truncated { offset });
    }
    if body.len() != count as usize * RECORD_LEN {
        return Err(TraceError::Malformed {
            location: format!("byte offset {}", HEADER_LEN + count as usize * RECORD_LEN),
            reason: "trailing bytes after declared records".into(),
        });
    }

    let mut out = Vec::with_capacity(count as usize);
    for i in 0..count as usize {
        let at = i * RECORD_LEN;
        let offset = (HEADER_LEN + at) as u64;
        let seq = u64_at(body, at);
        let pc = u64_at(body, at + 8);
        let word = u64_at(body, at + 16);
        let kind = AccessKind::from_code(word >> 62).ok_or_else(|| TraceError::Malformed {
            location: format!("byte offset {offset}"),
            reason: "invalid access kind 3".into(),
        })?;
        let core = ((word >> 56) & 0x3f) as u8;
        if core as u16 >= declared_cores {
            return Err(TraceError::Malformed {
                location: format!("byte offset {offset}"),
                reason: format!("core {core} >= declared core_count {declared_cores}"),
            });
        }
        out.push(MemoryAccess { seq, core, kind, pc, paddr: word & PADDR_MASK });
    }
    Ok(out)
}

fn decode_text(bytes: &[u8]) -> Result<Vec<MemoryAccess>, TraceError> {
    let text = std::str::from_utf8(bytes).map_err(|e| TraceError::Malformed {
        location: format!("byte offset {}", e.valid_up_to()),
        reason: "not utf-8".into(),
    })?;
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l).unwrap_or("");
    let version = header
        .strip_prefix("# PLLC v")
        .and_then(|rest| rest.split_whitespace().next())
        .and_then(|v| v.parse::<u16>().ok())
        .ok_or_else(|| TraceError::Malformed { location: "line 1".into(), reason: "missing `# PLLC v<n>` header".into() })?;
    if version != TRACE_VERSION {
        return Err(TraceError::VersionMismatch { found: version, expected: TRACE_VERSION });
    }

    let mut out = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let location = format!("line {}", idx + 1);
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(TraceError::Malformed { location, reason: format!("expected 5 fields, found {}", fields.len()) });
        }
        let hex = |s: &str, what: &str| {
            u64::from_str_radix(s, 16)
                .map_err(|_| TraceError::Malformed { location: location.clone(), reason: format!("bad hex {what} `{s}`") })
        };
        let seq = hex(fields[0], "seq")?;
        let core = hex(fields[1], "core")?;
        if core >= super::MAX_CORES as u64 {
            return Err(TraceError::Malformed { location, reason: format!("core {core} out of range") });
        }
        let kind = AccessKind::from_letter(fields[2])
            .ok_or_else(|| TraceError::Malformed { location: location.clone(), reason: format!("bad kind `{}`", fields[2]) })?;
        let pc = hex(fields[3], "pc")?;
        let paddr = hex(fields[4], "paddr")?;
        out.push(MemoryAccess { seq, core: core as u8, kind, pc, paddr });
    }
    Ok(out)
}
