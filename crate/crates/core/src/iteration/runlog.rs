//! Line-delimited run log: a header line, one line per attempt, then one
//! accuracy line per iteration.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AccuracyPoint, AttemptRecord, IterationConfig, RunLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub run_id: String,
    pub config: IterationConfig,
    pub template_version: u32,
    pub student: String,
    pub teacher: Option<String>,
    pub map_id: String,
    pub n_tasks: usize,
}

impl Default for RunHeader {
    fn default() -> Self {
        Self {
            run_id: String::new(),
            config: IterationConfig::default(),
            template_version: crate::prompting::template_version(),
            student: String::new(),
            teacher: None,
            map_id: String::new(),
            n_tasks: 0,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RunLogLine {
    Header(RunHeader),
    Attempt(AttemptRecord),
    Accuracy(AccuracyPoint),
}

#[derive(Debug, Error)]
pub enum RunLogError {
    #[error("line {line}: {reason}")]
    BadLine { line: usize, reason: String },
    #[error("line {0}: header must be the first line")]
    MisplacedHeader(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_runlog(mut out: impl Write, log: &RunLog) -> std::io::Result<()> {
    let mut line = |l: &RunLogLine| -> std::io::Result<()> {
        serde_json::to_writer(&mut out, l)?;
        out.write_all(b"\n")
    };
    line(&RunLogLine::Header(log.header.clone()))?;
    for a in &log.attempts {
        line(&RunLogLine::Attempt(a.clone()))?;
    }
    for p in &log.accuracy {
        line(&RunLogLine::Accuracy(*p))?;
    }
    Ok(())
}

/// Reads a run log. A file with no lines yields an empty log.
pub fn read_runlog(reader: impl BufRead) -> Result<RunLog, RunLogError> {
    let mut header = None;
    let mut attempts = Vec::new();
    let mut accuracy = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: RunLogLine = serde_json::from_str(&line)
            .map_err(|e| RunLogError::BadLine { line: i + 1, reason: e.to_string() })?;
        match parsed {
            RunLogLine::Header(h) => {
                if header.is_some() || !attempts.is_empty() || !accuracy.is_empty() {
                    return Err(RunLogError::MisplacedHeader(i + 1));
                }
                header = Some(h);
            }
            RunLogLine::Attempt(a) => attempts.push(a),
            RunLogLine::Accuracy(p) => accuracy.push(p),
        }
    }
    Ok(RunLog { header: header.unwrap_or_default(), attempts, accuracy })
}

pub fn read_runlog_file(path: impl AsRef<Path>) -> Result<RunLog, RunLogError> {
    let file = std::fs::File::open(path)?;
    read_runlog(std::io::BufReader::new(file))
}

/// Two-column `iteration,sr` CSV for accuracy curves.
pub fn write_accuracy_csv(mut out: impl Write, series: &[AccuracyPoint]) -> std::io::Result<()> {
    writeln!(out, "iteration,sr")?;
    for p in series {
        writeln!(out, "{},{:?}", p.iteration, p.sr)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iteration::ParseOutcome;
    use crate::output::ModelOutput;
    use crate::world::Point;

    fn sample() -> RunLog {
        let mut ok = AttemptRecord::empty(1, "t1");
        ok.parsed = ParseOutcome::Ok(ModelOutput { explanation: "e".into(), positions: vec![Point::new(1.0, 2.0)] });
        ok.success = true;
        ok.ne = Some(0.125);
        ok.inference_duration = 0.5;
        ok.motion_duration = 9.5;
        ok.total_duration = 10.0;
        RunLog {
            header: RunHeader { run_id: "r".into(), n_tasks: 2, ..RunHeader::default() },
            attempts: vec![ok, AttemptRecord::empty(1, "t2")],
            accuracy: vec![AccuracyPoint { iteration: 1, sr: 0.5 }],
        }
    }

    #[test]
    fn round_trip() {
        let log = sample();
        let mut buf = Vec::new();
        write_runlog(&mut buf, &log).unwrap();
        assert_eq!(buf.iter().filter(|b| **b == b'\n').count(), 4);
        assert_eq!(read_runlog(buf.as_slice()).unwrap(), log);
    }

    #[test]
    fn empty_input_is_empty_log() {
        let log = read_runlog(&b""[..]).unwrap();
        assert!(log.attempts.is_empty() && log.accuracy.is_empty());
    }

    #[test]
    fn rejects_garbage_and_late_header() {
        assert!(matches!(read_runlog(&b"{nope"[..]), Err(RunLogError::BadLine { line: 1, .. })));
        let mut buf = Vec::new();
        write_runlog(&mut buf, &sample()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        let doubled = format!("{text}{header}\n");
        assert!(matches!(read_runlog(doubled.as_bytes()), Err(RunLogError::MisplacedHeader(5))));
    }

    #[test]
    fn accuracy_csv() {
        let mut buf = Vec::new();
        write_accuracy_csv(&mut buf, &[AccuracyPoint { iteration: 1, sr: 0.0 }, AccuracyPoint { iteration: 2, sr: 0.75 }])
            .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iteration,sr\n1,0.0\n2,0.75\n");
    }
}
