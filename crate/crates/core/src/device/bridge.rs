//! JSON-lines bridge protocol.
//!
//! One request per line, one response per line:
//!
//! | request                                   | response                                                    |
//! |-------------------------------------------|-------------------------------------------------------------|
//! | `{"op":"current_page"}`                   | `{"activity":..,"hierarchy":..}`                            |
//! | `{"op":"execute","command":{..}}`         | `{"result":"ok","activity":..,"hierarchy":..}`              |
//! |                                           | `{"result":"no_effect"}`                                    |
//! |                                           | `{"result":"crash","message":..}`                           |
//! |                                           | `{"result":"invalid_target","widget":..}`                   |
//! | `{"op":"restart"}`                        | `{"ok":true}`                                               |
//!
//! Any request may instead be answered with `{"error":..}`. Commands use the
//! canonical [`ExecutiveCommand`] JSON form.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};

use serde::{Deserialize, Serialize};

use super::{DeviceError, Driver, ExecResult};
use crate::answer::ExecutiveCommand;
use crate::gui::parse_view_hierarchy;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum Request {
    CurrentPage,
    Execute { command: ExecutiveCommand },
    Restart,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
enum ExecReply {
    Ok { activity: String, hierarchy: String },
    NoEffect,
    Crash { message: String },
    InvalidTarget { widget: String },
}

#[derive(Debug, Serialize, Deserialize)]
struct PageReply {
    activity: String,
    hierarchy: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct AckReply {
    ok: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct ErrorReply {
    error: String,
}

/// Client side of the bridge, speaking to a device adapter over any
/// bidirectional byte stream.
pub struct BridgeDriver {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    child: Option<Child>,
}

impl BridgeDriver {
    pub fn from_streams(reader: impl Read + Send + 'static, writer: impl Write + Send + 'static) -> Self {
        Self { reader: Box::new(BufReader::new(reader)), writer: Box::new(writer), child: None }
    }

    /// Connects to an adapter listening on `addr` (`host:port`).
    pub fn connect_tcp(addr: &str) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        Ok(Self::from_streams(reader, stream))
    }

    /// Spawns an adapter process and talks to it over its stdio.
    pub fn spawn(program: &str, args: &[String]) -> io::Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().ok_or_else(|| io::Error::other("no child stdin"))?;
        let stdout = child.stdout.take().ok_or_else(|| io::Error::other("no child stdout"))?;
        let mut driver = Self::from_streams(stdout, stdin);
        driver.child = Some(child);
        Ok(driver)
    }

    fn roundtrip(&mut self, request: &Request) -> Result<serde_json::Value, DeviceError> {
        let mut line = serde_json::to_string(request).map_err(|e| DeviceError::Protocol(e.to_string()))?;
        line.push('\n');
        self.writer
            .write_all(line.as_bytes())
            .and_then(|()| self.writer.flush())
            .map_err(|_| DeviceError::DeviceGone)?;
        let mut reply = String::new();
        match self.reader.read_line(&mut reply) {
            Ok(0) | Err(_) => return Err(DeviceError::DeviceGone),
            Ok(_) => {}
        }
        let value: serde_json::Value =
            serde_json::from_str(reply.trim_end()).map_err(|e| DeviceError::Protocol(format!("bad reply: {e}")))?;
        if let Ok(ErrorReply { error }) = serde_json::from_value::<ErrorReply>(value.clone()) {
            return Err(DeviceError::Protocol(error));
        }
        Ok(value)
    }

    fn decode<T: for<'de> Deserialize<'de>>(value: serde_json::Value) -> Result<T, DeviceError> {
        serde_json::from_value(value).map_err(|e| DeviceError::Protocol(format!("unexpected reply: {e}")))
    }
}

impl Drop for BridgeDriver {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

impl Driver for BridgeDriver {
    fn current_page(&mut self) -> Result<(String, String), DeviceError> {
        let reply: PageReply = Self::decode(self.roundtrip(&Request::CurrentPage)?)?;
        Ok((reply.activity, reply.hierarchy))
    }

    fn execute(&mut self, command: &ExecutiveCommand) -> Result<ExecResult, DeviceError> {
        let reply: ExecReply = Self::decode(self.roundtrip(&Request::Execute { command: command.clone() })?)?;
        Ok(match reply {
            ExecReply::Ok { activity, hierarchy } => ExecResult::Ok(
                parse_view_hierarchy(&hierarchy, &activity).map_err(|e| DeviceError::Protocol(e.to_string()))?,
            ),
            ExecReply::NoEffect => ExecResult::NoEffect,
            ExecReply::Crash { message } => ExecResult::Crash(message),
            ExecReply::InvalidTarget { widget } => ExecResult::InvalidTarget(widget),
        })
    }

    fn restart(&mut self) -> Result<(), DeviceError> {
        let reply: AckReply = Self::decode(self.roundtrip(&Request::Restart)?)?;
        if reply.ok {
            Ok(())
        } else {
            Err(DeviceError::Protocol("restart refused".to_string()))
        }
    }
}

fn reply_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).unwrap_or_else(|e| format!("{{\"error\":\"{e}\"}}"))
}

/// Serves the bridge protocol for `driver` until `reader` reaches EOF.
/// Malformed requests and driver errors are answered with `{"error":..}`.
pub fn serve_bridge<D: Driver>(driver: &mut D, reader: impl BufRead, mut writer: impl Write) -> io::Result<()> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let error = |e: String| reply_line(&ErrorReply { error: e });
        let reply = match serde_json::from_str::<Request>(&line) {
            Err(e) => error(format!("bad request: {e}")),
            Ok(Request::CurrentPage) => match driver.current_page() {
                Ok((activity, hierarchy)) => reply_line(&PageReply { activity, hierarchy }),
                Err(e) => error(e.to_string()),
            },
            Ok(Request::Execute { command }) => match driver.execute(&command) {
                Ok(ExecResult::Ok(_)) => match driver.current_page() {
                    Ok((activity, hierarchy)) => reply_line(&ExecReply::Ok { activity, hierarchy }),
                    Err(e) => error(e.to_string()),
                },
                Ok(ExecResult::NoEffect) => reply_line(&ExecReply::NoEffect),
                Ok(ExecResult::Crash(message)) => reply_line(&ExecReply::Crash { message }),
                Ok(ExecResult::InvalidTarget(widget)) => reply_line(&ExecReply::InvalidTarget { widget }),
                Err(e) => error(e.to_string()),
            },
            Ok(Request::Restart) => match driver.restart() {
                Ok(()) => reply_line(&AckReply { ok: true }),
                Err(e) => error(e.to_string()),
            },
        };
        writer.write_all(reply.as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(())
}
