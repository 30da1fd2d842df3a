use std::fmt::Write as _;

use super::*;
use crate::agent::write_program;
use crate::atom::quote_str;

fn block(out: &mut String, program: &Program, indent: &str) {
    for line in write_program(program).lines() {
        if line.is_empty() {
            out.push('\n');
        } else {
            let _ = writeln!(out, "{indent}{line}");
        }
    }
}

fn arg(a: &str) -> String {
    let plain = !a.is_empty()
        && a.chars()
            .all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | ':' | '(' | ')' | ',' | '*'));
    if plain && a != "cost" {
        a.to_string()
    } else {
        quote_str(a)
    }
}

/// Canonical `.plot` text; `parse_scenario` of the result equals the input.
pub fn serialize_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    let st = &s.settings;
    let _ = writeln!(out, "scenario {} {{", s.name);
    let _ = writeln!(out, "  player {}", st.player);
    let _ = writeln!(out, "  radical {}", st.radical);
    let _ = writeln!(out, "  max_updates {}", st.max_updates);
    let _ = writeln!(out, "  oscillation {}", if st.oscillation { "on" } else { "off" });
    for (g, v) in &st.globals {
        let _ = writeln!(out, "  global {g} {v}");
    }
    if !st.primitives.is_empty() {
        let _ = writeln!(out, "  primitive {}", st.primitives.join(" "));
    }
    for r in &st.repertoire {
        let _ = writeln!(out, "  repertoire {}", quote_str(r));
    }
    for (a, c) in &st.costs {
        let _ = writeln!(out, "  cost {} {c}", a.name());
    }
    out.push_str("}\n\n");

    for v in &s.values {
        let _ = write!(
            out,
            "value {} {}..{} poles {} derive {}",
            v.name,
            v.lo,
            v.hi,
            quote_str(&format!("{}/{}", v.pole_low, v.pole_high)),
            v.derive
        );
        if let Some(n) = v.neutral {
            let _ = write!(out, " neutral {n}");
        }
        out.push('\n');
    }
    if !s.values.is_empty() {
        out.push('\n');
    }

    for c in &s.conditions {
        let _ = write!(out, "condition {} {} ", c.index, c.kind.keyword());
        let _ = match &c.kind {
            ConditionKind::Range { path, lo, hi } => writeln!(out, "{path} {lo} {hi}"),
            ConditionKind::Boolean { path } => writeln!(out, "{path}"),
            ConditionKind::Greater { path, threshold }
            | ConditionKind::Less { path, threshold }
            | ConditionKind::Equal { path, threshold } => writeln!(out, "{path} {threshold}"),
            ConditionKind::Knows { agent, pattern } => writeln!(out, "{agent}:{}", pattern.call_form()),
            ConditionKind::Feels { agent, emotion, min } => writeln!(out, "{agent}:{emotion} {min}"),
            ConditionKind::HasGoal { agent, goal } => writeln!(out, "{agent}:{goal}"),
            ConditionKind::HasPlan { agent, plan } => writeln!(out, "{agent}:{plan}"),
        };
    }
    if !s.conditions.is_empty() {
        out.push('\n');
    }

    for a in &s.agents {
        let _ = writeln!(out, "agent {}{} {{", a.name, if a.offstage { " offstage" } else { "" });
        block(&mut out, &a.program, "  ");
        out.push_str("}\n\n");
    }

    for sc in &s.scenes {
        let _ = write!(
            out,
            "scene {} {}",
            sc.id,
            if sc.desirable { "desirable" } else { "undesirable" }
        );
        if sc.start {
            out.push_str(" start");
        }
        if sc.end {
            out.push_str(" end");
        }
        out.push_str(match sc.kind {
            SceneKind::Kernel => " kernel",
            SceneKind::Satellite => " satellite",
        });
        if sc.climactic {
            out.push_str(" climactic");
        }
        out.push_str(" {\n");
        for b in &sc.beats {
            let _ = writeln!(out, "  beat {} agent {} {{", b.id, b.agent);
            block(&mut out, &b.program, "    ");
            out.push_str("  }\n");
        }
        out.push_str("}\n\n");
    }

    for t in &s.transitions {
        let _ = write!(out, "transition {} {} -> {} guard", t.name, t.from, t.to);
        for g in &t.guards {
            let _ = write!(out, " \"{g}\"");
        }
        out.push('\n');
    }
    if !s.transitions.is_empty() {
        out.push('\n');
    }

    for e in &s.effectors {
        let _ = write!(out, "effector {} {} {}", e.id, e.class.name(), e.action.name());
        for a in &e.args {
            let _ = write!(out, " {}", arg(a));
        }
        if let Some(c) = e.cost {
            let _ = write!(out, " cost {c}");
        }
        out.push('\n');
    }
    out
}
