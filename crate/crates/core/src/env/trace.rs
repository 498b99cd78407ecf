//! Newline-delimited JSON trajectory dumps.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::StepEvents;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: u64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub roll: f64,
    pub pitch: f64,
    pub action: Vec<f64>,
    pub reward: f64,
    pub f_s: f64,
    pub events: StepEvents,
}

pub fn write_trace<W: Write>(mut out: W, records: &[TraceRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_trace<R: BufRead>(input: R) -> io::Result<Vec<TraceRecord>> {
    input
        .lines()
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()))
        .map(|l| {
            let l = l?;
            serde_json::from_str(&l).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_record_per_line() {
        let rec = TraceRecord {
            t: 3,
            x: 0.25,
            y: -1.0,
            yaw: 0.1,
            roll: 0.0,
            pitch: 0.01,
            action: vec![0.5, 0.0, 0.0, -0.5],
            reward: 0.02,
            f_s: 0.25,
            events: StepEvents {
                near_boundary_outbound: true,
                ..StepEvents::default()
            },
        };
        let mut buf = Vec::new();
        write_trace(&mut buf, &[rec.clone(), rec.clone()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("{\"t\":3,"));
        assert_eq!(read_trace(&buf[..]).unwrap(), vec![rec.clone(), rec]);
    }
}
