//! CSV encodings of simulated data.
//!
//! * trace: header `bin_ms,counts[,true_state]`, one row per bin, `bin_ms`
//!   the bin start time;
//! * shots: header `pre_counts,post_counts[,true_pre,true_post]`;
//! * histogram: header `count,shots`.
//!
//! States are written as `NV-` / `NV0`. Floats use Rust's shortest
//! round-trip formatting, so output is byte-stable for a given seed.

use std::io::{BufRead, Write};

use super::{CountHistogram, PhotonTrace, ShotRecord};
use crate::error::{Error, Result};
use crate::units::ChargeState;

fn io_err(e: std::io::Error) -> Error {
    Error::domain(format!("i/o: {e}"))
}

pub fn write_trace_csv<W: Write>(trace: &PhotonTrace, mut w: W) -> std::io::Result<()> {
    match &trace.true_path {
        Some(path) => {
            writeln!(w, "bin_ms,counts,true_state")?;
            for (i, (c, s)) in trace.counts.iter().zip(path).enumerate() {
                writeln!(w, "{},{},{}", i as f64 * trace.bin_width, c, s.label())?;
            }
        }
        None => {
            writeln!(w, "bin_ms,counts")?;
            for (i, c) in trace.counts.iter().enumerate() {
                writeln!(w, "{},{}", i as f64 * trace.bin_width, c)?;
            }
        }
    }
    Ok(())
}

fn parse_state(s: &str, line: usize) -> Result<ChargeState> {
    ChargeState::from_label(s.trim()).ok_or_else(|| Error::domain(format!("line {line}: unknown state {s:?}")))
}

fn parse_num<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::domain(format!("line {line}: cannot parse {s:?}")))
}

/// Reads a trace CSV. The bin width is taken from `bin_width` if given,
/// otherwise from the spacing of the first two rows.
pub fn read_trace_csv<R: BufRead>(r: R, bin_width: Option<f64>) -> Result<PhotonTrace> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::InsufficientData("empty trace file".into()))?.map_err(io_err)?;
    let cols: Vec<&str> = header.trim().split(',').collect();
    let with_state = match cols.as_slice() {
        ["bin_ms", "counts"] => false,
        ["bin_ms", "counts", "true_state"] => true,
        _ => return Err(Error::domain(format!("unexpected trace header {header:?}"))),
    };
    let mut times = Vec::new();
    let mut counts = Vec::new();
    let mut states = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols.len() {
            return Err(Error::domain(format!("line {}: expected {} fields", i + 2, cols.len())));
        }
        times.push(parse_num::<f64>(f[0], i + 2)?);
        counts.push(parse_num::<u64>(f[1], i + 2)?);
        if with_state {
            states.push(parse_state(f[2], i + 2)?);
        }
    }
    let width = match bin_width {
        Some(w) => w,
        None if times.len() >= 2 => times[1] - times[0],
        None => return Err(Error::InsufficientData("cannot infer bin width from one row".into())),
    };
    PhotonTrace::new(width, counts, with_state.then_some(states))
}

pub fn write_shots_csv<W: Write>(shots: &[ShotRecord], mut w: W) -> std::io::Result<()> {
    let with_truth = shots.iter().all(|s| s.true_pre.is_some() && s.true_post.is_some());
    if with_truth {
        writeln!(w, "pre_counts,post_counts,true_pre,true_post")?;
    } else {
        writeln!(w, "pre_counts,post_counts")?;
    }
    for s in shots {
        match (with_truth, s.true_pre, s.true_post) {
            (true, Some(a), Some(b)) => writeln!(w, "{},{},{},{}", s.pre_counts, s.post_counts, a.label(), b.label())?,
            _ => writeln!(w, "{},{}", s.pre_counts, s.post_counts)?,
        }
    }
    Ok(())
}

pub fn read_shots_csv<R: BufRead>(r: R) -> Result<Vec<ShotRecord>> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::InsufficientData("empty shot file".into()))?.map_err(io_err)?;
    let with_truth = match header.trim() {
        "pre_counts,post_counts" => false,
        "pre_counts,post_counts,true_pre,true_post" => true,
        h => return Err(Error::domain(format!("unexpected shot header {h:?}"))),
    };
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let n = if with_truth { 4 } else { 2 };
        if f.len() != n {
            return Err(Error::domain(format!("line {}: expected {n} fields", i + 2)));
        }
        out.push(ShotRecord {
            pre_counts: parse_num(f[0], i + 2)?,
            post_counts: parse_num(f[1], i + 2)?,
            true_pre: if with_truth { Some(parse_state(f[2], i + 2)?) } else { None },
            true_post: if with_truth { Some(parse_state(f[3], i + 2)?) } else { None },
        });
    }
    Ok(out)
}

pub fn write_histogram_csv<W: Write>(h: &CountHistogram, mut w: W) -> std::io::Result<()> {
    writeln!(w, "count,shots")?;
    for (k, c) in h.counts.iter().enumerate() {
        writeln!(w, "{k},{c}")?;
    }
    Ok(())
}

pub fn read_histogram_csv<R: BufRead>(r: R) -> Result<CountHistogram> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::InsufficientData("empty histogram file".into()))?.map_err(io_err)?;
    if header.trim() != "count,shots" {
        return Err(Error::domain(format!("unexpected histogram header {header:?}")));
    }
    let mut counts: Vec<u64> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let (k, c) = line
            .split_once(',')
            .ok_or_else(|| Error::domain(format!("line {}: expected 2 fields", i + 2)))?;
        let k: usize = parse_num(k, i + 2)?;
        let c: u64 = parse_num(c, i + 2)?;
        if k >= counts.len() {
            counts.resize(k + 1, 0);
        }
        counts[k] += c;
    }
    Ok(CountHistogram { counts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_round_trip() {
        let tr = PhotonTrace::new(
            0.5,
            vec![3, 0, 7],
            Some(vec![ChargeState::Negative, ChargeState::Neutral, ChargeState::Negative]),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&tr, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "bin_ms,counts,true_state\n0,3,NV-\n0.5,0,NV0\n1,7,NV-\n"
        );
        assert_eq!(read_trace_csv(buf.as_slice(), None).unwrap(), tr);
    }

    #[test]
    fn shots_round_trip() {
        let shots = vec![
            ShotRecord { pre_counts: 30, post_counts: 2, true_pre: Some(ChargeState::Negative), true_post: Some(ChargeState::Neutral) },
            ShotRecord { pre_counts: 1, post_counts: 4, true_pre: Some(ChargeState::Neutral), true_post: Some(ChargeState::Neutral) },
        ];
        let mut buf = Vec::new();
        write_shots_csv(&shots, &mut buf).unwrap();
        assert_eq!(read_shots_csv(buf.as_slice()).unwrap(), shots);
    }

    #[test]
    fn histogram_round_trip() {
        let h = CountHistogram { counts: vec![4, 0, 9] };
        let mut buf = Vec::new();
        write_histogram_csv(&h, &mut buf).unwrap();
        assert_eq!(read_histogram_csv(buf.as_slice()).unwrap(), h);
    }

    #[test]
    fn bad_headers_rejected() {
        assert!(read_trace_csv("time,counts\n0,1\n".as_bytes(), None).is_err());
        assert!(read_shots_csv("a,b\n".as_bytes()).is_err());
        assert!(read_histogram_csv("k,n\n".as_bytes()).is_err());
        assert!(read_trace_csv("bin_ms,counts\n0,x\n".as_bytes(), Some(1.0)).is_err());
    }
}
