use std::io::{BufReader, BufWriter, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use super::protocol::{self, DenoiseRequest, Response};
use super::{check_query_time, Conditioning, Denoiser};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const STDERR_CAP: usize = 16 * 1024;
const STDERR_GRACE: Duration = Duration::from_millis(500);

/// Denoiser backed by a subprocess that speaks [`protocol`] over its
/// stdin/stdout. One request is in flight at a time; concurrent callers
/// queue on an internal lock. After any transport failure the subprocess is
/// killed and a fresh one is started on the next call.
pub struct ExternalDenoiser {
    argv: Vec<String>,
    timeout: Duration,
    session: Mutex<Option<Session>>,
}

struct Session {
    child: Child,
    requests: Sender<Vec<u8>>,
    replies: Receiver<Result<Response>>,
    stderr: Arc<Mutex<String>>,
    stderr_done: Receiver<()>,
}

impl Session {
    fn spawn(argv: &[String]) -> Result<Self> {
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::ExternalDenoiser {
                message: format!("cannot start `{}`: {e}", argv.join(" ")),
                diagnostics: String::new(),
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut err_pipe = child.stderr.take().expect("piped stderr");

        let (req_tx, req_rx) = mpsc::channel::<Vec<u8>>();
        thread::spawn(move || writer_loop(stdin, req_rx));

        let (rep_tx, rep_rx) = mpsc::channel();
        thread::spawn(move || {
            let mut r = BufReader::new(stdout);
            loop {
                let msg = protocol::read_response(&mut r);
                let failed = msg.is_err();
                if rep_tx.send(msg).is_err() || failed {
                    break;
                }
            }
        });

        let stderr = Arc::new(Mutex::new(String::new()));
        let sink = Arc::clone(&stderr);
        let (done_tx, done_rx) = mpsc::channel();
        thread::spawn(move || {
            let mut buf = [0u8; 4096];
            while let Ok(n) = err_pipe.read(&mut buf) {
                if n == 0 {
                    break;
                }
                let mut s = sink.lock().unwrap_or_else(|p| p.into_inner());
                if s.len() < STDERR_CAP {
                    s.push_str(&String::from_utf8_lossy(&buf[..n]));
                }
            }
            let _ = done_tx.send(());
        });

        Ok(Self {
            child,
            requests: req_tx,
            replies: rep_rx,
            stderr,
            stderr_done: done_rx,
        })
    }

    /// Kills the process and returns whatever it wrote to stderr.
    fn shut_down(mut self) -> (String, String) {
        let status = match self.child.try_wait() {
            Ok(Some(s)) => format!("exited with {s}"),
            _ => {
                let _ = self.child.kill();
                match self.child.wait() {
                    Ok(_) => "killed".to_string(),
                    Err(e) => format!("could not be reaped: {e}"),
                }
            }
        };
        let _ = self.stderr_done.recv_timeout(STDERR_GRACE);
        let diag = self.stderr.lock().unwrap_or_else(|p| p.into_inner()).clone();
        (status, diag)
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn writer_loop(stdin: ChildStdin, rx: Receiver<Vec<u8>>) {
    let mut w = BufWriter::new(stdin);
    for frame in rx {
        if w.write_all(&frame).and_then(|_| w.flush()).is_err() {
            break;
        }
    }
}

impl ExternalDenoiser {
    /// Starts `command_line` (split with shell quoting rules, not run through
    /// a shell). `timeout_ms` bounds each request round-trip.
    pub fn new(command_line: &str, timeout_ms: u64) -> Result<Self> {
        let argv = shlex::split(command_line)
            .filter(|a| !a.is_empty())
            .ok_or_else(|| Error::invalid(format!("cannot parse denoiser command `{command_line}`")))?;
        if timeout_ms == 0 {
            return Err(Error::invalid("denoiser timeout must be positive"));
        }
        let session = Session::spawn(&argv)?;
        Ok(Self {
            argv,
            timeout: Duration::from_millis(timeout_ms),
            session: Mutex::new(Some(session)),
        })
    }

    pub fn command(&self) -> String {
        self.argv.join(" ")
    }

    /// Sends one request and waits for the reply.
    pub fn round_trip(&self, req: &DenoiseRequest) -> Result<Response> {
        let mut frame = Vec::new();
        protocol::write_request(&mut frame, req)?;

        let mut guard = self.session.lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            *guard = Some(Session::spawn(&self.argv)?);
        }
        let session = guard.as_mut().expect("session present");

        let sent = session.requests.send(frame).is_ok();
        let outcome = if sent {
            session.replies.recv_timeout(self.timeout)
        } else {
            Err(RecvTimeoutError::Disconnected)
        };
        let failure = match outcome {
            Ok(Ok(resp)) => return Ok(resp),
            Ok(Err(Error::Protocol(m))) if m.starts_with("stream ended") => "closed its output".to_string(),
            Ok(Err(e)) => format!("sent an unreadable reply: {e}"),
            Err(RecvTimeoutError::Timeout) => format!("did not answer within {} ms", self.timeout.as_millis()),
            Err(RecvTimeoutError::Disconnected) => "closed its output".to_string(),
        };
        let (status, diagnostics) = guard.take().expect("session present").shut_down();
        Err(Error::ExternalDenoiser {
            message: format!("`{}` {failure}; process {status}", self.command()),
            diagnostics,
        })
    }
}

impl std::fmt::Debug for ExternalDenoiser {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalDenoiser")
            .field("argv", &self.argv)
            .field("timeout", &self.timeout)
            .finish()
    }
}

impl Denoiser for ExternalDenoiser {
    fn predict_eps(&self, x_t: &Tensor, t: f64, cond: &Conditioning) -> Result<Tensor> {
        check_query_time(t)?;
        cond.x_corrupt.check_same_shape(x_t)?;
        let req = DenoiseRequest {
            t,
            x_t: x_t.clone(),
            x_corrupt: cond.x_corrupt.clone(),
        };
        match self.round_trip(&req)? {
            Response::Eps(eps) => {
                if eps.shape() != x_t.shape() {
                    return Err(Error::Protocol(format!(
                        "reply has shape {:?}, request had {:?}",
                        eps.shape(),
                        x_t.shape()
                    )));
                }
                Ok(eps)
            }
            Response::Error(message) => Err(Error::ExternalDenoiser {
                message: format!("`{}` reported: {message}", self.command()),
                diagnostics: String::new(),
            }),
        }
    }

    fn name(&self) -> &str {
        "external"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bad_commands() {
        assert!(matches!(ExternalDenoiser::new("", 100), Err(Error::InvalidArgument(_))));
        assert!(matches!(ExternalDenoiser::new("'unterminated", 100), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            ExternalDenoiser::new("/nonexistent/denoiser-binary", 100),
            Err(Error::ExternalDenoiser { .. })
        ));
    }

    #[cfg(unix)]
    #[test]
    fn silent_process_times_out() {
        let d = ExternalDenoiser::new("sleep 30", 200).unwrap();
        let x = Tensor::zeros(&[2, 2]).unwrap();
        let start = std::time::Instant::now();
        let err = d.predict_eps(&x, 0.5, &Conditioning::new(x.clone())).unwrap_err();
        assert!(matches!(err, Error::ExternalDenoiser { .. }), "{err}");
        assert!(start.elapsed() < Duration::from_secs(5));
    }

    #[cfg(unix)]
    #[test]
    fn exiting_process_reports_stderr() {
        let d = ExternalDenoiser::new("sh -c 'echo boom >&2; exit 3'", 2000).unwrap();
        let x = Tensor::zeros(&[3]).unwrap();
        match d.predict_eps(&x, 0.5, &Conditioning::new(x.clone())).unwrap_err() {
            Error::ExternalDenoiser { diagnostics, .. } => assert!(diagnostics.contains("boom")),
            e => panic!("unexpected {e}"),
        }
    }
}
