//! Per-access event records and their one-line text form:
//! `seq core kind level latency line victim pair`, where `line` is the hex
//! line address, victim is `-` or `I:<hex addr>` / `D:<hex addr>`, and pair
//! is `-` or the hex line of the instruction a data access was attributed to.

use super::LevelHit;
use crate::trace::AccessKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub seq: u64,
    pub core: u8,
    pub kind: AccessKind,
    pub level_hit: LevelHit,
    pub latency: u64,
    pub line: u64,
    pub victim: Option<(u64, bool)>,
    pub paired_il: Option<u64>,
}

impl Event {
    pub fn to_line(&self) -> String {
        let victim = match self.victim {
            None => "-".to_string(),
            Some((addr, true)) => format!("I:{addr:#x}"),
            Some((addr, false)) => format!("D:{addr:#x}"),
        };
        let pair = self.paired_il.map_or_else(|| "-".to_string(), |l| format!("{l:#x}"));
        format!(
            "{} {} {} {} {} {:#x} {} {}",
            self.seq,
            self.core,
            self.kind.letter(),
            self.level_hit.as_str(),
            self.latency,
            self.line,
            victim,
            pair
        )
    }
}

pub fn parse_event_line(line: &str) -> Result<Event, String> {
    let f: Vec<&str> = line.split_whitespace().collect();
    let [seq, core, kind, level, latency, line, victim, pair] = f[..] else {
        return Err(format!("expected 8 fields, found {}", f.len()));
    };
    let num = |s: &str, what: &str| s.parse::<u64>().map_err(|e| format!("bad {what} `{s}`: {e}"));
    let hex = |s: &str, what: &str| {
        u64::from_str_radix(s.trim_start_matches("0x"), 16).map_err(|e| format!("bad {what} `{s}`: {e}"))
    };
    let victim = match victim {
        "-" => None,
        v => {
            let (class, addr) = v.split_once(':').ok_or_else(|| format!("bad victim `{v}`"))?;
            let addr = hex(addr, "victim")?;
            match class {
                "I" => Some((addr, true)),
                "D" => Some((addr, false)),
                _ => return Err(format!("bad victim class `{class}`")),
            }
        }
    };
    Ok(Event {
        seq: num(seq, "seq")?,
        core: u8::try_from(num(core, "core")?).map_err(|e| e.to_string())?,
        kind: AccessKind::from_letter(kind).ok_or_else(|| format!("bad kind `{kind}`"))?,
        level_hit: LevelHit::parse(level).ok_or_else(|| format!("bad level `{level}`"))?,
        latency: num(latency, "latency")?,
        line: hex(line, "line")?,
        victim,
        paired_il: if pair == "-" { None } else { Some(hex(pair, "pair")?) },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        for (victim, paired_il) in [(None, None), (Some((0xabc0, true)), Some(0x77)), (Some((0x40, false)), None)] {
            let e = Event {
                seq: 9,
                core: 3,
                kind: AccessKind::Store,
                level_hit: LevelHit::Memory,
                latency: 190,
                line: 0x1234,
                victim,
                paired_il,
            };
            assert_eq!(parse_event_line(&e.to_line()).unwrap(), e);
        }
        assert_eq!(parse_event_line("5 1 L llc 43 0x10 - 0x2").unwrap().paired_il, Some(2));
        assert!(parse_event_line("1 2 3").is_err());
    }
}
