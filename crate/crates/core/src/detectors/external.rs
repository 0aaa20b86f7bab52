//! Adapter running an out-of-process detector over a line protocol.

use super::Detector;
use crate::corpus::{format_timestamp, TimeRecord};
use crate::error::{Error, Result};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc;
use std::thread::JoinHandle;
use std::time::Duration;

/// How long to wait for a score line before giving up on the child.
pub const DEFAULT_STEP_TIMEOUT: Duration = Duration::from_secs(60);

/// Runs a shell command as a child process and speaks a line protocol with
/// it: one `timestamp,value` line on its stdin per record, one score line
/// expected back on its stdout. A fresh child is spawned per stream, so
/// external detectors never leak state across streams.
///
/// Reading happens on a helper thread so a stuck child turns into a timeout
/// error instead of hanging the run.
pub struct ExternalDetector {
    command: String,
    child: Child,
    stdin: Option<ChildStdin>,
    lines: mpsc::Receiver<std::io::Result<String>>,
    reader: Option<JoinHandle<()>>,
    timeout: Duration,
    records_sent: usize,
}

impl ExternalDetector {
    pub fn spawn(command: &str) -> Result<Self> {
        Self::spawn_with_timeout(command, DEFAULT_STEP_TIMEOUT)
    }

    pub fn spawn_with_timeout(command: &str, timeout: Duration) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| Error::ExternalDetector(format!("failed to spawn `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("stdin was piped");
        let stdout = child.stdout.take().expect("stdout was piped");
        let (sender, lines) = mpsc::channel();
        let reader = std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if sender.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            command: command.to_owned(),
            child,
            stdin: Some(stdin),
            lines,
            reader: Some(reader),
            timeout,
            records_sent: 0,
        })
    }

    fn protocol_error(&mut self, message: String) -> Error {
        let status = match self.child.try_wait() {
            Ok(Some(status)) => format!(" (child exited with {status})"),
            _ => String::new(),
        };
        Error::ExternalDetector(format!("`{}`: {message}{status}", self.command))
    }
}

impl Detector for ExternalDetector {
    fn step(&mut self, record: &TimeRecord) -> Result<f64> {
        let line = format!("{},{}\n", format_timestamp(&record.timestamp), record.value);
        let write_result = match self.stdin.as_mut() {
            Some(stdin) => stdin.write_all(line.as_bytes()).and_then(|_| stdin.flush()),
            None => return Err(self.protocol_error("stdin already closed".into())),
        };
        if let Err(e) = write_result {
            return Err(self.protocol_error(format!("failed to send record: {e}")));
        }
        let index = self.records_sent;
        self.records_sent += 1;
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(text)) => {
                let value = text.trim().parse::<f64>().map_err(|_| {
                    self.protocol_error(format!("expected a numeric score line, got `{text}`"))
                })?;
                // Out-of-range replies are a protocol violation, caught here
                // so the failure names the offending record.
                if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                    return Err(Error::ScoreOutOfRange { index, value });
                }
                Ok(value)
            }
            Ok(Err(e)) => Err(self.protocol_error(format!("failed to read score: {e}"))),
            Err(mpsc::RecvTimeoutError::Timeout) => {
                Err(self.protocol_error(format!("no score within {:.0?}", self.timeout)))
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                Err(self.protocol_error("exited before scoring all records".into()))
            }
        }
    }
}

impl Drop for ExternalDetector {
    fn drop(&mut self) {
        // Closing stdin lets a well-behaved child exit on its own; kill
        // covers the rest. Reaping avoids zombie processes.
        self.stdin.take();
        let _ = self.child.kill();
        let _ = self.child.wait();
        if let Some(reader) = self.reader.take() {
            let _ = reader.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_timestamp;

    fn record(i: i64, value: f64) -> TimeRecord {
        TimeRecord {
            timestamp: parse_timestamp("2015-01-01 00:00:00").unwrap()
                + chrono::Duration::seconds(300 * i),
            value,
        }
    }

    #[test]
    fn echoes_scores_line_by_line() {
        let mut d = ExternalDetector::spawn("while read line; do echo 0.25; done").unwrap();
        for i in 0..5 {
            assert_eq!(d.step(&record(i, 1.5)).unwrap(), 0.25);
        }
    }

    #[test]
    fn child_sees_canonical_timestamp_and_value() {
        // The child echoes the value column back as the score.
        let mut d =
            ExternalDetector::spawn("while read line; do echo \"$line\" | cut -d, -f2; done")
                .unwrap();
        assert_eq!(d.step(&record(0, 0.75)).unwrap(), 0.75);
    }

    #[test]
    fn garbage_output_is_a_protocol_error() {
        let mut d = ExternalDetector::spawn("while read line; do echo banana; done").unwrap();
        let err = d.step(&record(0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::ExternalDetector(_)));
        assert!(err.to_string().contains("banana"));
    }

    #[test]
    fn early_exit_is_reported() {
        let mut d = ExternalDetector::spawn("read line; echo 0.5").unwrap();
        assert_eq!(d.step(&record(0, 1.0)).unwrap(), 0.5);
        let err = d.step(&record(1, 2.0)).unwrap_err();
        assert!(matches!(err, Error::ExternalDetector(_)));
    }

    #[test]
    fn stuck_child_times_out() {
        let mut d =
            ExternalDetector::spawn_with_timeout("sleep 30", Duration::from_millis(100)).unwrap();
        let err = d.step(&record(0, 1.0)).unwrap_err();
        assert!(err.to_string().contains("no score within"));
    }

    #[test]
    fn out_of_range_scores_are_rejected_with_the_record_index() {
        let mut d =
            ExternalDetector::spawn("read line; echo 0.5; while read line; do echo 1.5; done")
                .unwrap();
        assert_eq!(d.step(&record(0, 1.0)).unwrap(), 0.5);
        let err = d.step(&record(1, 2.0)).unwrap_err();
        assert!(matches!(err, Error::ScoreOutOfRange { index: 1, value } if value == 1.5));
    }
}
