//! Line-oriented wire format shared by the TCP and WebSocket transports:
//! `type<TAB>key=value<TAB>…`, one frame per line.

use std::fmt;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("unknown frame type '{0}'")]
    UnknownType(String),
    #[error("unexpected {0} frame")]
    Unexpected(String),
    #[error("protocol version {got} not supported (want {want})")]
    Version { got: String, want: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameKind {
    Hello,
    State,
    Utterance,
    Value,
    Scene,
    Intervention,
    Error,
    Input,
}

impl FrameKind {
    pub const ALL: [FrameKind; 8] = [
        FrameKind::Hello,
        FrameKind::State,
        FrameKind::Utterance,
        FrameKind::Value,
        FrameKind::Scene,
        FrameKind::Intervention,
        FrameKind::Error,
        FrameKind::Input,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FrameKind::Hello => "hello",
            FrameKind::State => "state",
            FrameKind::Utterance => "utterance",
            FrameKind::Value => "value",
            FrameKind::Scene => "scene",
            FrameKind::Intervention => "intervention",
            FrameKind::Error => "error",
            FrameKind::Input => "input",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    pub kind: FrameKind,
    pub fields: Vec<(String, String)>,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut it = s.chars();
    while let Some(c) = it.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        out.push(match it.next()? {
            '\\' => '\\',
            't' => '\t',
            'n' => '\n',
            'r' => '\r',
            _ => return None,
        });
    }
    Some(out)
}

impl Frame {
    pub fn new(kind: FrameKind) -> Self {
        Frame {
            kind,
            fields: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn input(text: &str) -> Self {
        Frame::new(FrameKind::Input).with("text", text)
    }

    pub fn hello() -> Self {
        Frame::new(FrameKind::Hello).with("version", PROTOCOL_VERSION)
    }

    pub fn error(message: impl ToString) -> Self {
        Frame::new(FrameKind::Error).with("message", message)
    }

    pub fn parse(line: &str) -> Result<Frame, ProtocolError> {
        let line = line.strip_suffix('\n').unwrap_or(line);
        let line = line.strip_suffix('\r').unwrap_or(line);
        let mut parts = line.split('\t');
        let ty = parts.next().unwrap_or_default();
        let kind = FrameKind::ALL
            .into_iter()
            .find(|k| k.name() == ty)
            .ok_or_else(|| ProtocolError::UnknownType(ty.to_string()))?;
        let mut fields = Vec::new();
        for p in parts {
            let bad = || ProtocolError::Malformed(line.to_string());
            let (k, v) = p.split_once('=').ok_or_else(bad)?;
            if k.is_empty() || !k.bytes().all(|b| b.is_ascii_lowercase() || b == b'_') {
                return Err(bad());
            }
            fields.push((k.to_string(), unescape(v).ok_or_else(bad)?));
        }
        Ok(Frame { kind, fields })
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.name())?;
        for (k, v) in &self.fields {
            write!(f, "\t{k}={}", escape(v))?;
        }
        Ok(())
    }
}

/// Client hello must name a version we speak.
pub fn check_hello(frame: &Frame) -> Result<(), ProtocolError> {
    if frame.kind != FrameKind::Hello {
        return Err(ProtocolError::Unexpected(frame.kind.name().into()));
    }
    match frame.get("version") {
        Some(v) if v.parse() == Ok(PROTOCOL_VERSION) => Ok(()),
        got => Err(ProtocolError::Version {
            got: got.unwrap_or("").to_string(),
            want: PROTOCOL_VERSION,
        }),
    }
}
