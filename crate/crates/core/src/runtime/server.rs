//! Single-client play server over raw TCP or WebSocket. The transport is
//! picked per connection: a client opening with an HTTP `GET` gets the
//! WebSocket handshake, anything else is treated as line-delimited TCP.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};

use tungstenite::{Message, WebSocket};

use super::protocol::{check_hello, Frame, FrameKind, ProtocolError, PROTOCOL_VERSION};
use super::{Mode, RuntimeError, Session};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ServeOptions {
    /// Mirror intervention frames to the client.
    pub debug: bool,
}

/// Everything that crossed the wire: `>` server to client, `<` client to
/// server, `#` connection events.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub lines: Vec<String>,
    pub violations: u32,
}

impl Transcript {
    pub fn text(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}

enum Conn {
    Tcp(BufReader<TcpStream>, TcpStream),
    Ws(Box<WebSocket<TcpStream>>),
}

fn io(e: impl ToString) -> RuntimeError {
    RuntimeError::Io(e.to_string())
}

impl Conn {
    fn open(stream: TcpStream) -> Result<Conn, RuntimeError> {
        let mut head = [0u8; 4];
        let n = stream.peek(&mut head).map_err(io)?;
        if head[..n].starts_with(b"GET ") {
            let ws = tungstenite::accept(stream).map_err(io)?;
            Ok(Conn::Ws(Box::new(ws)))
        } else {
            let w = stream.try_clone().map_err(io)?;
            Ok(Conn::Tcp(BufReader::new(stream), w))
        }
    }

    /// Next line, `None` on disconnect.
    fn recv(&mut self) -> Result<Option<String>, RuntimeError> {
        match self {
            Conn::Tcp(r, _) => {
                let mut line = String::new();
                match r.read_line(&mut line) {
                    Ok(0) => Ok(None),
                    Ok(_) => Ok(Some(line.trim_end_matches(['\r', '\n']).to_string())),
                    Err(e) if e.kind() == std::io::ErrorKind::ConnectionReset => Ok(None),
                    Err(e) => Err(io(e)),
                }
            }
            Conn::Ws(ws) => loop {
                match ws.read() {
                    Ok(Message::Text(t)) => return Ok(Some(t.trim_end_matches(['\r', '\n']).to_string())),
                    Ok(Message::Close(_)) => return Ok(None),
                    Ok(_) => continue,
                    Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(None),
                    Err(tungstenite::Error::Io(e)) if e.kind() == std::io::ErrorKind::ConnectionReset => {
                        return Ok(None)
                    }
                    Err(e) => return Err(io(e)),
                }
            },
        }
    }

    fn send(&mut self, f: &Frame) -> Result<(), RuntimeError> {
        let line = f.to_string();
        match self {
            Conn::Tcp(_, w) => {
                w.write_all(line.as_bytes()).map_err(io)?;
                w.write_all(b"\n").map_err(io)
            }
            Conn::Ws(ws) => ws.send(Message::text(line)).map_err(io),
        }
    }

    fn close(&mut self) {
        match self {
            Conn::Tcp(_, w) => {
                let _ = w.shutdown(std::net::Shutdown::Both);
            }
            Conn::Ws(ws) => {
                let _ = ws.close(None);
                let _ = ws.flush();
            }
        }
    }
}

pub fn bind(addr: &str) -> Result<TcpListener, RuntimeError> {
    TcpListener::bind(addr).map_err(|e| RuntimeError::BindFailure(format!("{addr}: {e}")))
}

enum ClientEnd {
    Disconnected,
    Violation(ProtocolError),
    StoryOver,
}

fn send(conn: &mut Conn, t: &mut Transcript, f: &Frame) -> Result<(), RuntimeError> {
    t.lines.push(format!("> {f}"));
    conn.send(f)
}

fn handle(session: &mut Session, conn: &mut Conn, t: &mut Transcript, opts: ServeOptions) -> Result<ClientEnd, RuntimeError> {
    let Some(first) = conn.recv()? else {
        return Ok(ClientEnd::Disconnected);
    };
    t.lines.push(format!("< {first}"));
    if let Err(e) = Frame::parse(&first).and_then(|f| check_hello(&f)) {
        return Ok(ClientEnd::Violation(e));
    }
    let name = session.world.scenario.name.clone();
    send(conn, t, &Frame::new(FrameKind::Hello).with("version", PROTOCOL_VERSION).with("scenario", name))?;
    for f in session.state_frames() {
        send(conn, t, &f)?;
    }
    loop {
        if session.is_over() {
            return Ok(ClientEnd::StoryOver);
        }
        let Some(line) = conn.recv()? else {
            return Ok(ClientEnd::Disconnected);
        };
        t.lines.push(format!("< {line}"));
        let frame = match Frame::parse(&line) {
            Ok(f) if f.kind == FrameKind::Input => f,
            Ok(f) => return Ok(ClientEnd::Violation(ProtocolError::Unexpected(f.kind.name().into()))),
            Err(e) => return Ok(ClientEnd::Violation(e)),
        };
        let input: Vec<String> = frame.get("text").filter(|s| !s.trim().is_empty()).map(str::to_string).into_iter().collect();
        for f in session.tick(&input)? {
            if f.kind != FrameKind::Intervention || opts.debug {
                send(conn, t, &f)?;
            }
        }
        if session.is_over() {
            for f in session.state_frames().into_iter().take(1) {
                send(conn, t, &f)?;
            }
        }
    }
}

/// Serves the session to one client at a time. A client breaking the
/// protocol is sent an error frame and dropped, and the session waits for
/// the next one; a clean disconnect or the end of the story ends serving.
pub fn serve(session: &mut Session, listener: &TcpListener, opts: ServeOptions) -> Result<Transcript, RuntimeError> {
    session.mode = Mode::Interactive;
    let mut t = Transcript::default();
    loop {
        let (stream, _) = listener.accept().map_err(io)?;
        let mut conn = Conn::open(stream)?;
        t.lines.push("# connect".into());
        match handle(session, &mut conn, &mut t, opts)? {
            ClientEnd::Violation(e) => {
                t.violations += 1;
                let _ = send(&mut conn, &mut t, &Frame::error(&e));
                t.lines.push(format!("# drop: {e}"));
                conn.close();
            }
            ClientEnd::Disconnected => {
                t.lines.push("# disconnect".into());
                return Ok(t);
            }
            ClientEnd::StoryOver => {
                t.lines.push("# story over".into());
                conn.close();
                return Ok(t);
            }
        }
    }
}
