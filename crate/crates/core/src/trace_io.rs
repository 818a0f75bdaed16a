//! CSV trace formats.
//!
//! Event files list On periods, one per line, under the header
//! `t_start,duration,rate`. Binned files start with a metadata line
//! `# delta=<Δ> origin=<t0> n=<len> seed=<seed>` followed by the header
//! `bin_index,value`. Floats are written in shortest round-trip form, so
//! writing and reading back is exact.

use std::io::{BufRead, Write};

use crate::error::{invalid, Error, Result};
use crate::source::{BinnedTrace, Epoch, RenewalTimeline};

pub const EVENT_HEADER: &str = "t_start,duration,rate";
pub const BINNED_HEADER: &str = "bin_index,value";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub t_start: f64,
    pub duration: f64,
    pub rate: f64,
}

/// Writes the On periods of `timeline`. Zero-length On periods (an Off
/// start) are skipped.
pub fn write_events<W: Write>(timeline: &RenewalTimeline, mut w: W) -> Result<()> {
    writeln!(w, "{EVENT_HEADER}")?;
    for e in timeline.epochs.iter().filter(|e| e.on > 0.0) {
        writeln!(w, "{},{},{}", e.start, e.on, e.rate)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_binned<W: Write>(trace: &BinnedTrace, mut w: W) -> Result<()> {
    let seed = trace.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
    writeln!(w, "# delta={} origin={} n={} seed={seed}", trace.bin_width, trace.origin, trace.len())?;
    writeln!(w, "{BINNED_HEADER}")?;
    for (i, v) in trace.values.iter().enumerate() {
        writeln!(w, "{i},{v}")?;
    }
    w.flush()?;
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn field<T: std::str::FromStr>(raw: &str, what: &str, line: usize) -> Result<T> {
    raw.trim().parse().map_err(|_| parse_err(line, format!("cannot parse {what} from {raw:?}")))
}

fn finite(v: f64, what: &str, line: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(parse_err(line, format!("{what} is not finite")))
    }
}

/// Non-empty lines with 1-based line numbers.
fn lines<R: BufRead>(r: R) -> impl Iterator<Item = Result<(usize, String)>> {
    r.lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l.trim_end().to_string())).map_err(Error::from))
        .filter(|l| !matches!(l, Ok((_, s)) if s.is_empty()))
}

pub fn read_events<R: BufRead>(r: R) -> Result<Vec<EventRecord>> {
    let mut it = lines(r);
    match it.next().transpose()? {
        Some((_, h)) if h == EVENT_HEADER => {}
        Some((n, h)) => return Err(parse_err(n, format!("expected header {EVENT_HEADER:?}, found {h:?}"))),
        None => return Err(parse_err(1, "empty file")),
    }
    let mut out = Vec::new();
    let mut last_end = f64::NEG_INFINITY;
    for l in it {
        let (n, s) = l?;
        let cols: Vec<&str> = s.split(',').collect();
        if cols.len() != 3 {
            return Err(parse_err(n, format!("expected 3 columns, found {}", cols.len())));
        }
        let t_start = finite(field(cols[0], "t_start", n)?, "t_start", n)?;
        let duration = finite(field(cols[1], "duration", n)?, "duration", n)?;
        let rate = finite(field(cols[2], "rate", n)?, "rate", n)?;
        if duration < 0.0 || rate < 0.0 {
            return Err(parse_err(n, "duration and rate must be non-negative"));
        }
        if t_start < last_end {
            return Err(parse_err(n, "events overlap or are out of order"));
        }
        last_end = t_start + duration;
        out.push(EventRecord { t_start, duration, rate });
    }
    Ok(out)
}

/// Rebuilds a timeline from On periods; gaps become Off time. `horizon`
/// must cover every event start.
pub fn events_to_timeline(events: &[EventRecord], horizon: f64) -> Result<RenewalTimeline> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(invalid(format!("horizon must be positive, got {horizon}")));
    }
    let mut epochs = Vec::with_capacity(events.len() + 1);
    let first = events.first().map_or(horizon, |e| e.t_start);
    if first > 0.0 {
        epochs.push(Epoch { start: 0.0, on: 0.0, off: first, rate: 0.0 });
    }
    for (i, e) in events.iter().enumerate() {
        if e.t_start >= horizon {
            return Err(invalid(format!("event at {} starts beyond horizon {horizon}", e.t_start)));
        }
        let next = events.get(i + 1).map_or(horizon.max(e.t_start + e.duration), |n| n.t_start);
        epochs.push(Epoch { start: e.t_start, on: e.duration, off: next - e.t_start - e.duration, rate: e.rate });
    }
    Ok(RenewalTimeline { epochs, horizon })
}

fn parse_preamble(s: &str, line: usize) -> Result<(f64, f64, Option<usize>, Option<u64>)> {
    let (mut delta, mut origin, mut n, mut seed) = (None, 0.0, None, None);
    for tok in s.trim_start_matches('#').split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| parse_err(line, format!("malformed metadata token {tok:?}")))?;
        match k {
            "delta" => delta = Some(finite(field(v, "delta", line)?, "delta", line)?),
            "origin" => origin = finite(field(v, "origin", line)?, "origin", line)?,
            "n" => n = Some(field(v, "n", line)?),
            "seed" if v == "none" => seed = None,
            "seed" => seed = Some(field(v, "seed", line)?),
            _ => return Err(parse_err(line, format!("unknown metadata key {k:?}"))),
        }
    }
    let delta = delta.ok_or_else(|| parse_err(line, "metadata lacks delta"))?;
    if delta <= 0.0 {
        return Err(parse_err(line, "delta must be positive"));
    }
    Ok((delta, origin, n, seed))
}

/// Reads a binned trace. Without the metadata line the bin width is 1 and
/// the origin 0.
pub fn read_binned<R: BufRead>(r: R) -> Result<BinnedTrace> {
    let mut it = lines(r);
    let (mut n, mut s) = it.next().transpose()?.ok_or_else(|| parse_err(1, "empty file"))?;
    let (mut delta, mut origin, mut declared, mut seed) = (1.0, 0.0, None, None);
    if s.starts_with('#') {
        (delta, origin, declared, seed) = parse_preamble(&s, n)?;
        (n, s) = it.next().transpose()?.ok_or_else(|| parse_err(n + 1, "missing header"))?;
    }
    if s != BINNED_HEADER {
        return Err(parse_err(n, format!("expected header {BINNED_HEADER:?}, found {s:?}")));
    }
    let mut values = Vec::with_capacity(declared.unwrap_or(0));
    for l in it {
        let (n, s) = l?;
        let (idx, val) = s.split_once(',').ok_or_else(|| parse_err(n, "expected 2 columns"))?;
        let idx: usize = field(idx, "bin_index", n)?;
        if idx != values.len() {
            return Err(parse_err(n, format!("expected bin_index {}, found {idx}", values.len())));
        }
        values.push(finite(field(val, "value", n)?, "value", n)?);
    }
    if let Some(d) = declared {
        if d != values.len() {
            return Err(parse_err(1, format!("metadata declares n={d} but {} bins follow", values.len())));
        }
    }
    let mut trace = BinnedTrace::new(delta, origin, values)?;
    trace.seed = seed;
    Ok(trace)
}

/// A trace file of either format, told apart by its first line.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceFile {
    Events(Vec<EventRecord>),
    Binned(BinnedTrace),
}

pub fn read_trace<R: BufRead>(mut r: R) -> Result<TraceFile> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let first = buf.split(|&b| b == b'\n').find(|l| !l.iter().all(u8::is_ascii_whitespace)).unwrap_or(&[]);
    if String::from_utf8_lossy(first).trim() == EVENT_HEADER {
        read_events(&buf[..]).map(TraceFile::Events)
    } else {
        read_binned(&buf[..]).map(TraceFile::Binned)
    }
}
