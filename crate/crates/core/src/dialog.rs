//! Player input lines converted to dialog moves, and moves to facts.

use std::fmt;

use crate::atom::{Atom, Fact, Pattern, Term};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DialogError {
    #[error("malformed command: {0}")]
    MalformedCommand(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MoveKind {
    Say,
    Ask,
    Tell,
    Act,
}

impl MoveKind {
    pub fn name(self) -> &'static str {
        match self {
            MoveKind::Say => "say",
            MoveKind::Ask => "ask",
            MoveKind::Tell => "tell",
            MoveKind::Act => "act",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DialogMove {
    pub speaker: String,
    pub kind: MoveKind,
    /// Utterance text, or for `act` the verb followed by its arguments.
    pub content: Vec<String>,
    /// `None` addresses everyone in the active scene.
    pub addressee: Option<String>,
}

impl DialogMove {
    /// Fact the move leaves in a listener's world model.
    pub fn fact(&self) -> Fact {
        let mut args = vec![Atom::str(self.speaker.as_str())];
        args.extend(self.content.iter().map(|c| Atom::str(c.as_str())));
        let pred = match self.kind {
            MoveKind::Act => "act",
            _ => "heard",
        };
        Fact::new(pred, args)
    }

    pub fn pattern(&self) -> Pattern {
        let f = self.fact();
        Pattern::new(f.predicate, f.args.into_iter().map(Term::Atom).collect())
    }
}

impl fmt::Display for DialogMove {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, &self.addressee) {
            (MoveKind::Act, _) => write!(f, "/act {}", self.content.join(" ")),
            (_, Some(a)) => write!(f, "@{a}: {}", self.content.join(" ")),
            (_, None) => f.write_str(&self.content.join(" ")),
        }
    }
}

/// `@Agent: text` addresses one character, `/act verb args…` performs an
/// action, bare text speaks to the characters of the active scene. A
/// trailing `?` turns an utterance into a question.
pub fn convert_input(raw: &str, player: &str) -> Result<DialogMove, DialogError> {
    let line = raw.trim();
    let bad = || DialogError::MalformedCommand(raw.to_string());
    if line.is_empty() {
        return Err(bad());
    }
    let utter = |text: &str, addressee: Option<String>| {
        let text = text.trim();
        if text.is_empty() {
            return Err(bad());
        }
        let kind = if text.ends_with('?') { MoveKind::Ask } else { MoveKind::Say };
        Ok(DialogMove {
            speaker: player.to_string(),
            kind,
            content: vec![text.to_string()],
            addressee,
        })
    };
    if let Some(rest) = line.strip_prefix('@') {
        let (who, text) = rest.split_once(':').ok_or_else(bad)?;
        let who = who.trim();
        if who.is_empty() || who.contains(char::is_whitespace) {
            return Err(bad());
        }
        return utter(text, Some(who.to_string()));
    }
    if let Some(rest) = line.strip_prefix('/') {
        let mut words = rest.split_whitespace();
        return match words.next() {
            Some("act") => {
                let content: Vec<String> = words.map(str::to_string).collect();
                if content.is_empty() {
                    return Err(bad());
                }
                Ok(DialogMove {
                    speaker: player.to_string(),
                    kind: MoveKind::Act,
                    content,
                    addressee: None,
                })
            }
            _ => Err(bad()),
        };
    }
    utter(line, None)
}
