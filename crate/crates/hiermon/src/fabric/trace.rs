//! Structured event trace.
//!
//! Every observable simulation event is appended to the trace as one record.
//! The export format is line-delimited, one record per line, tab-separated,
//! with a fixed field order:
//!
//! ```text
//! time<TAB>kind<TAB>from<TAB>to<TAB>payload<TAB>reason
//! ```
//!
//! * `time` — virtual milliseconds, decimal.
//! * `kind` — one of `deliver`, `drop`, `timer`, `crash`, `restart`, `note`.
//! * `from` / `to` — actor names, or `-` when not applicable.
//! * `payload` — a one-line summary of the message or note body.
//! * `reason` — drop reason (`loss`, `partition`, `crashed`, `stale`,
//!   `undeliverable`) or `-`.
//!
//! The field order and separators are frozen: golden-trace tests compare
//! runs byte for byte, and the `verify` oracles re-parse this text.

use std::fmt;

use crate::fabric::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Deliver,
    Drop,
    Timer,
    Crash,
    Restart,
    Note,
}

impl TraceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::Deliver => "deliver",
            TraceKind::Drop => "drop",
            TraceKind::Timer => "timer",
            TraceKind::Crash => "crash",
            TraceKind::Restart => "restart",
            TraceKind::Note => "note",
        }
    }

    pub fn parse(s: &str) -> Option<TraceKind> {
        Some(match s {
            "deliver" => TraceKind::Deliver,
            "drop" => TraceKind::Drop,
            "timer" => TraceKind::Timer,
            "crash" => TraceKind::Crash,
            "restart" => TraceKind::Restart,
            "note" => TraceKind::Note,
            _ => return None,
        })
    }
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub time: SimTime,
    pub kind: TraceKind,
    pub from: String,
    pub to: String,
    pub payload: String,
    pub reason: String,
}

fn field(s: &str) -> &str {
    if s.is_empty() {
        "-"
    } else {
        s
    }
}

impl TraceRecord {
    pub fn render(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.time.millis(),
            self.kind,
            field(&self.from),
            field(&self.to),
            field(&self.payload),
            field(&self.reason),
        )
    }

    /// Parse one exported line. Returns `None` on any structural mismatch.
    pub fn parse_line(line: &str) -> Option<TraceRecord> {
        let mut parts = line.split('\t');
        let time = parts.next()?.parse::<u64>().ok()?;
        let kind = TraceKind::parse(parts.next()?)?;
        let from = parts.next()?.to_string();
        let to = parts.next()?.to_string();
        let payload = parts.next()?.to_string();
        let reason = parts.next()?.to_string();
        if parts.next().is_some() {
            return None;
        }
        Some(TraceRecord {
            time: SimTime::from_millis(time),
            kind,
            from,
            to,
            payload,
            reason,
        })
    }
}

/// Ordered sequence of trace records for one run.
#[derive(Debug, Clone, Default)]
pub struct EventTrace {
    records: Vec<TraceRecord>,
}

impl EventTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: TraceRecord) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Render the whole trace in export format, one record per line,
    /// with a trailing newline when nonempty.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.render());
            out.push('\n');
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<EventTrace, usize> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            match TraceRecord::parse_line(line) {
                Some(r) => records.push(r),
                None => return Err(i + 1),
            }
        }
        Ok(EventTrace { records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_parse_round_trip() {
        let rec = TraceRecord {
            time: SimTime::from_millis(1500),
            kind: TraceKind::Deliver,
            from: "n1".into(),
            to: "boot".into(),
            payload: "hb node=n1".into(),
            reason: String::new(),
        };
        let line = rec.render();
        assert_eq!(line, "1500\tdeliver\tn1\tboot\thb node=n1\t-");
        let back = TraceRecord::parse_line(&line).unwrap();
        assert_eq!(back.time, rec.time);
        assert_eq!(back.kind, rec.kind);
        assert_eq!(back.payload, rec.payload);
        assert_eq!(back.reason, "-");
    }

    #[test]
    fn malformed_lines_rejected() {
        assert!(TraceRecord::parse_line("not a record").is_none());
        assert!(TraceRecord::parse_line("10\tbogus\ta\tb\tc\td").is_none());
        assert!(TraceRecord::parse_line("10\tdeliver\ta\tb\tc\td\textra").is_none());
    }
}
