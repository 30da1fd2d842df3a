use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use super::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LintCode {
    /// Undesirable end state.
    E1,
    /// Start state missing or duplicated.
    E2,
    /// Desirable scene that cannot reach an end.
    W1,
    /// Undesirable scene with no way back to a desirable one.
    W2,
    /// Two climactic scenes adjacent.
    W3,
    /// Transition needing more parameter changes than allowed.
    W4,
}

impl LintCode {
    pub fn severity(self) -> Severity {
        match self {
            LintCode::E1 | LintCode::E2 => Severity::Error,
            _ => Severity::Warning,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Finding {
    pub code: LintCode,
    /// Scene or transition the finding is about.
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.code.severity() {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev} {:?} {}: {}", self.code, self.subject, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LintReport {
    pub findings: Vec<Finding>,
}

impl LintReport {
    pub fn has_errors(&self) -> bool {
        self.findings.iter().any(|f| f.code.severity() == Severity::Error)
    }

    pub fn codes(&self) -> Vec<(LintCode, &str)> {
        self.findings.iter().map(|f| (f.code, f.subject.as_str())).collect()
    }

    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

fn closure(from: &[usize], adj: &[Vec<usize>]) -> BTreeSet<usize> {
    let mut seen: BTreeSet<usize> = from.iter().copied().collect();
    let mut q: VecDeque<usize> = from.iter().copied().collect();
    while let Some(n) = q.pop_front() {
        for &m in &adj[n] {
            if seen.insert(m) {
                q.push_back(m);
            }
        }
    }
    seen
}

/// Forward reachability from `start` and backward reachability to `ends`
/// over a plain successor graph.
pub fn lint_scene_graph(
    n: usize,
    edges: &[(usize, usize)],
    start: &[usize],
    ends: &[usize],
) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let mut fwd = vec![Vec::new(); n];
    let mut back = vec![Vec::new(); n];
    for &(a, b) in edges {
        fwd[a].push(b);
        back[b].push(a);
    }
    (closure(start, &fwd), closure(ends, &back))
}

/// Design-rule checks E1, E2 and W1–W4.
pub fn validate_scenario(s: &Scenario) -> LintReport {
    let mut findings = Vec::new();
    let mut add = |code, subject: &str, message: String| {
        findings.push(Finding {
            code,
            subject: subject.to_string(),
            message,
        })
    };

    for sc in &s.scenes {
        if sc.end && !sc.desirable {
            add(LintCode::E1, &sc.id, "an undesirable scene cannot be an end scene".into());
        }
    }
    let starts: Vec<&SceneDef> = s.scenes.iter().filter(|x| x.start).collect();
    if starts.len() != 1 {
        add(
            LintCode::E2,
            &s.name,
            format!("expected exactly one start scene, found {}", starts.len()),
        );
    }

    let idx = |id: &str| s.scenes.iter().position(|x| x.id == id);
    let edges: Vec<(usize, usize)> = s
        .transitions
        .iter()
        .filter_map(|t| Some((idx(&t.from)?, idx(&t.to)?)))
        .collect();
    let ends: Vec<usize> = (0..s.scenes.len()).filter(|&i| s.scenes[i].end).collect();
    let (_, to_end) = lint_scene_graph(s.scenes.len(), &edges, &[], &ends);
    for (i, sc) in s.scenes.iter().enumerate() {
        if sc.desirable && !to_end.contains(&i) {
            add(LintCode::W1, &sc.id, "desirable scene has no path to an end scene".into());
        }
    }
    for (i, sc) in s.scenes.iter().enumerate() {
        if sc.desirable {
            continue;
        }
        let succ: Vec<usize> = edges.iter().filter(|e| e.0 == i).map(|e| e.1).collect();
        let (reach, _) = lint_scene_graph(s.scenes.len(), &edges, &succ, &[]);
        if !reach.iter().any(|&j| s.scenes[j].desirable) {
            add(
                LintCode::W2,
                &sc.id,
                "undesirable scene has no recovery path to a desirable scene".into(),
            );
        }
    }
    if s.settings.oscillation {
        let climactic: Vec<bool> = s.scenes.iter().map(|x| s.is_climactic(x)).collect();
        for t in &s.transitions {
            if let (Some(a), Some(b)) = (idx(&t.from), idx(&t.to)) {
                if a != b && climactic[a] && climactic[b] {
                    add(
                        LintCode::W3,
                        &t.name,
                        format!("climactic scenes {} and {} are adjacent", t.from, t.to),
                    );
                }
            }
        }
    }
    for t in &s.transitions {
        let needed: usize = t.guards.iter().map(|g| g.fixed().count()).sum();
        if needed > s.settings.max_updates {
            add(
                LintCode::W4,
                &t.name,
                format!(
                    "label fixes {needed} conditions, more than the {} updates allowed",
                    s.settings.max_updates
                ),
            );
        }
    }
    LintReport { findings }
}
