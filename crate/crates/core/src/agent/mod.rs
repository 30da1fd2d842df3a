//! Miniature BDI interpreter: world model, plan library, intention stack,
//! observer hook, and deep snapshots for side-effect-free look-ahead.
//!
//! One call to [`AgentState::interpreter_cycle`] clears the condition cache,
//! invokes the observer, then executes exactly one plan step of the top
//! intention (or selects a plan when the agent has none). Control flow inside
//! a plan (OR branches, completion, failure propagation) is settled eagerly
//! and never consumes a cycle of its own.

pub mod dsl;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::atom::{Atom, Bindings, Fact, FactKey, Num, Pattern, Term};

pub use dsl::{parse_program, write_program, DslError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GoalKind {
    Achieve,
    Perform,
}

impl GoalKind {
    pub fn keyword(self) -> &'static str {
        match self {
            GoalKind::Achieve => "ACHIEVE",
            GoalKind::Perform => "PERFORM",
        }
    }
}

/// Top-level goal. ACHIEVE goals persist on the goal list; PERFORM goals are
/// dropped after one successful plan execution.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GoalDecl {
    pub kind: GoalKind,
    pub name: String,
    pub args: Vec<Atom>,
    pub priority: i64,
    /// Provenance tag for goals injected by scene activation.
    pub tag: Option<String>,
}

impl GoalDecl {
    pub fn achieve(name: impl Into<String>, priority: i64) -> Self {
        GoalDecl {
            kind: GoalKind::Achieve,
            name: name.into(),
            args: Vec::new(),
            priority,
            tag: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GoalPattern {
    pub kind: GoalKind,
    pub name: String,
    pub args: Vec<Term>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Gt,
    Lt,
    Ge,
    Le,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Gt => ">",
            CmpOp::Lt => "<",
            CmpOp::Ge => ">=",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    /// Numbers compare numerically; strings only support equality.
    pub fn eval(self, a: &Atom, b: &Atom) -> bool {
        match (a, b) {
            (Atom::Num(x), Atom::Num(y)) => match self {
                CmpOp::Gt => x > y,
                CmpOp::Lt => x < y,
                CmpOp::Ge => x >= y,
                CmpOp::Le => x <= y,
                CmpOp::Eq => x == y,
                CmpOp::Ne => x != y,
            },
            _ => match self {
                CmpOp::Eq => a == b,
                CmpOp::Ne => a != b,
                _ => false,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Step {
    Fact(Pattern),
    Retrieve(Pattern),
    Test { op: CmpOp, lhs: Term, rhs: Term },
    Achieve { name: String, args: Vec<Term> },
    Perform { action: String, args: Vec<Term> },
    Execute { action: String, args: Vec<Term> },
    Or(Vec<Vec<Step>>),
    Assert(Pattern),
    Retract(Pattern),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Instr {
    Do(Step),
    /// Install a failure handler jumping to the target.
    Try(usize),
    EndTry,
    Jump(usize),
}

fn compile_steps(steps: &[Step], code: &mut Vec<Instr>) {
    for s in steps {
        match s {
            Step::Or(branches) => {
                let mut exits = Vec::new();
                for (i, b) in branches.iter().enumerate() {
                    let last = i + 1 == branches.len();
                    let try_at = code.len();
                    if !last {
                        code.push(Instr::Try(0));
                    }
                    compile_steps(b, code);
                    if !last {
                        code.push(Instr::EndTry);
                        exits.push(code.len());
                        code.push(Instr::Jump(0));
                        let next = code.len();
                        code[try_at] = Instr::Try(next);
                    }
                }
                let end = code.len();
                for e in exits {
                    code[e] = Instr::Jump(end);
                }
            }
            other => code.push(Instr::Do(other.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Plan {
    pub name: String,
    pub goal: GoalPattern,
    pub precondition: Vec<Step>,
    pub body: Vec<Step>,
    pub effects: Vec<Step>,
    pub utility: i64,
    pub tag: Option<String>,
    code: Vec<Instr>,
}

impl Plan {
    pub fn new(
        name: String,
        goal: GoalPattern,
        precondition: Vec<Step>,
        body: Vec<Step>,
        effects: Vec<Step>,
        utility: i64,
    ) -> Self {
        let mut code = Vec::new();
        compile_steps(&body, &mut code);
        Plan {
            name,
            goal,
            precondition,
            body,
            effects,
            utility,
            tag: None,
            code,
        }
    }

    pub fn with_tag(mut self, tag: Option<String>) -> Self {
        self.tag = tag;
        self
    }

    /// A copy keeping name and goal whose body only idles.
    pub fn idle_substitute(&self) -> Plan {
        Plan::new(
            self.name.clone(),
            self.goal.clone(),
            Vec::new(),
            vec![Step::Execute {
                action: "doIdle".into(),
                args: Vec::new(),
            }],
            Vec::new(),
            self.utility,
        )
        .with_tag(self.tag.clone())
    }
}

/// Parsed agent source.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub goals: Vec<GoalDecl>,
    pub facts: Vec<Fact>,
    pub plans: Vec<Arc<Plan>>,
}

/// Belief database with one fact per slot (last writer wins).
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct WorldModel {
    facts: BTreeMap<FactKey, Fact>,
}

impl WorldModel {
    /// Upserts; returns the replaced fact if the slot was occupied by a
    /// different one, and whether anything changed.
    pub fn assert(&mut self, fact: Fact) -> (bool, Option<Fact>) {
        let key = fact.key();
        match self.facts.get(&key) {
            Some(old) if *old == fact => (false, None),
            _ => {
                let old = self.facts.insert(key, fact);
                (true, old)
            }
        }
    }

    /// Removes every fact matching the pattern, either against all arguments
    /// or against the slot key.
    pub fn retract(&mut self, pattern: &Pattern) -> Vec<Fact> {
        let doomed: Vec<FactKey> = self
            .facts
            .iter()
            .filter(|(k, f)| pattern.matches(f) || pattern.matches_key(k))
            .map(|(k, _)| k.clone())
            .collect();
        doomed.into_iter().filter_map(|k| self.facts.remove(&k)).collect()
    }

    pub fn query(&self, pattern: &Pattern, b: &Bindings) -> Option<(Bindings, &Fact)> {
        self.facts
            .values()
            .find_map(|f| pattern.unify(f, b).map(|nb| (nb, f)))
    }

    pub fn matching<'a>(&'a self, pattern: &'a Pattern) -> impl Iterator<Item = &'a Fact> + 'a {
        self.facts
            .iter()
            .filter(move |(k, f)| pattern.matches(f) || pattern.matches_key(k))
            .map(|(_, f)| f)
    }

    pub fn get(&self, key: &FactKey) -> Option<&Fact> {
        self.facts.get(key)
    }

    pub fn value(&self, key: &FactKey) -> Option<Num> {
        self.facts.get(key).and_then(Fact::value)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Fact> {
        self.facts.values()
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn contains(&self, f: &Fact) -> bool {
        self.facts.get(&f.key()) == Some(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GoalInstance {
    pub kind: GoalKind,
    pub name: String,
    pub args: Vec<Atom>,
}

impl fmt::Display for GoalInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind.keyword(), self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        Ok(())
    }
}

/// Direction a numeric fact must move to undo a passed test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Down,
    Up,
    Either,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Read {
    key: FactKey,
    var: Option<String>,
}

/// Causal record of one world-model write made by a plan. Only collected
/// when tracing is switched on (look-ahead copies).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WriteRecord {
    pub cycle: u64,
    pub agent: String,
    pub written: Pattern,
    /// Innermost plan performing the write.
    pub plan: String,
    pub root_goal: String,
    pub stack_goals: Vec<String>,
    /// Numeric fact slots whose values enabled this write.
    pub supports: Vec<(FactKey, Direction)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Intention {
    pub goal: GoalInstance,
    pub plan: Arc<Plan>,
    pub pc: usize,
    pub bindings: Bindings,
    handlers: Vec<(usize, Bindings, usize, usize)>,
    reads: Vec<Read>,
    passed_tests: Vec<(CmpOp, Term, Term)>,
    awaiting_child: bool,
    child_failed: bool,
}

impl Intention {
    fn new(goal: GoalInstance, plan: Arc<Plan>, bindings: Bindings) -> Self {
        Intention {
            goal,
            plan,
            pc: 0,
            bindings,
            handlers: Vec::new(),
            reads: Vec::new(),
            passed_tests: Vec::new(),
            awaiting_child: false,
            child_failed: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    /// Externally observable action (dialog, gesture).
    Perform,
    /// Internal action, logged only.
    Execute,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AgentEvent {
    pub cycle: u64,
    pub agent: String,
    pub kind: EventKind,
    pub action: String,
    pub args: Vec<Atom>,
}

impl AgentEvent {
    pub fn call(&self) -> String {
        let args: Vec<String> = self.args.iter().map(Atom::to_string).collect();
        format!("{}({})", self.action, args.join(","))
    }
}

/// `cycle<TAB>agent<TAB>PERFORM|EXECUTE<TAB>action(args…)`
impl fmt::Display for AgentEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            EventKind::Perform => "PERFORM",
            EventKind::Execute => "EXECUTE",
        };
        write!(f, "{}\t{}\t{}\t{}", self.cycle, self.agent, kind, self.call())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgentError {
    #[error("primitive action '{0}' is not registered")]
    PrimitiveNotRegistered(String),
}

/// Names of primitive actions agents may PERFORM or EXECUTE.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Primitives(BTreeSet<String>);

impl Primitives {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Primitives(names.into_iter().map(Into::into).collect())
    }

    /// say, ask, tell, act, doIdle, idle, wait.
    pub fn standard() -> Self {
        Self::new(["say", "ask", "tell", "act", "doIdle", "idle", "wait"])
    }

    pub fn register(&mut self, name: impl Into<String>) {
        self.0.insert(name.into());
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CachedCondition {
    pub value: bool,
    /// Predicates the evaluation read; writes to them invalidate the entry.
    pub reads: Vec<String>,
}

/// One character of the object system.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AgentState {
    pub id: String,
    pub world: WorldModel,
    pub plans: Vec<Arc<Plan>>,
    pub goals: Vec<GoalDecl>,
    pub intentions: Vec<Intention>,
    pub present: bool,
    pub cycle: u64,
    pub observer_calls: u64,
    pub steps_executed: u64,
    pub skip_cycles: u32,
    pub cond_cache: BTreeMap<usize, CachedCondition>,
    pub cond_evals: u64,
    trace: Option<Vec<WriteRecord>>,
}

/// Deep copy of an agent minus its observer binding.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Snapshot(AgentState);

impl Snapshot {
    pub fn restore(&self) -> AgentState {
        self.0.clone()
    }

    pub fn agent(&self) -> &AgentState {
        &self.0
    }
}

enum StepResult {
    Advance,
    Pushed,
    Fail,
}

impl AgentState {
    pub fn new(id: impl Into<String>, program: &Program) -> Self {
        let mut world = WorldModel::default();
        for f in &program.facts {
            world.assert(f.clone());
        }
        AgentState {
            id: id.into(),
            world,
            plans: program.plans.clone(),
            goals: program.goals.clone(),
            intentions: Vec::new(),
            present: true,
            cycle: 0,
            observer_calls: 0,
            steps_executed: 0,
            skip_cycles: 0,
            cond_cache: BTreeMap::new(),
            cond_evals: 0,
            trace: None,
        }
    }

    /// Parses agent source into a fresh agent.
    pub fn parse(id: impl Into<String>, src: &str) -> Result<Self, DslError> {
        Ok(Self::new(id, &parse_program(src)?))
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot(self.clone())
    }

    /// Deterministic textual dump of the full state.
    pub fn state_digest(&self) -> String {
        format!("{self:?}")
    }

    pub fn set_tracing(&mut self, on: bool) {
        self.trace = if on { Some(Vec::new()) } else { None };
    }

    pub fn take_trace(&mut self) -> Vec<WriteRecord> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn plan(&self, name: &str) -> Option<&Arc<Plan>> {
        self.plans.iter().find(|p| p.name == name)
    }

    pub fn has_goal(&self, name: &str) -> bool {
        self.goals.iter().any(|g| g.name == name)
    }

    // ---- world model edits ----------------------------------------------

    pub fn assert_fact(&mut self, fact: Fact) -> bool {
        let pred = fact.predicate.clone();
        let (changed, _) = self.world.assert(fact);
        if changed {
            self.invalidate(&pred);
        }
        changed
    }

    pub fn retract_fact(&mut self, pattern: &Pattern) -> Vec<Fact> {
        let removed = self.world.retract(pattern);
        if !removed.is_empty() {
            self.invalidate(&pattern.predicate);
        }
        removed
    }

    fn invalidate(&mut self, predicate: &str) {
        self.cond_cache
            .retain(|_, c| !c.reads.iter().any(|p| p == predicate || p == "*"));
    }

    // ---- structural edits -------------------------------------------------

    pub fn add_plan(&mut self, plan: Arc<Plan>) {
        self.plans.push(plan);
        self.invalidate("#plan");
    }

    /// Removes the named plan; intentions executing it are aborted.
    pub fn remove_plan(&mut self, name: &str) -> bool {
        let before = self.plans.len();
        self.plans.retain(|p| p.name != name);
        if let Some(i) = self.intentions.iter().position(|it| it.plan.name == name) {
            self.abort_from(i);
        }
        self.invalidate("#plan");
        self.plans.len() != before
    }

    pub fn replace_plan(&mut self, name: &str, replacement: Arc<Plan>) -> bool {
        match self.plans.iter().position(|p| p.name == name) {
            Some(i) => {
                self.plans[i] = replacement;
                if let Some(j) = self.intentions.iter().position(|it| it.plan.name == name) {
                    self.abort_from(j);
                }
                self.invalidate("#plan");
                true
            }
            None => false,
        }
    }

    pub fn add_goal(&mut self, goal: GoalDecl) {
        self.goals.push(goal);
        self.invalidate("#goal");
    }

    /// Removes goals by name; the running intention stack is dropped if it
    /// serves a removed goal.
    pub fn remove_goal(&mut self, name: &str) -> bool {
        let before = self.goals.len();
        self.goals.retain(|g| g.name != name);
        if self.intentions.first().is_some_and(|it| it.goal.name == name) {
            self.intentions.clear();
        }
        self.invalidate("#goal");
        self.goals.len() != before
    }

    /// Removes every plan and goal carrying `tag`.
    pub fn remove_tagged(&mut self, tag: &str) {
        let names: Vec<String> = self
            .plans
            .iter()
            .filter(|p| p.tag.as_deref() == Some(tag))
            .map(|p| p.name.clone())
            .collect();
        for n in names {
            self.plans.retain(|p| !(p.name == n && p.tag.as_deref() == Some(tag)));
            if let Some(i) = self
                .intentions
                .iter()
                .position(|it| it.plan.name == n && it.plan.tag.as_deref() == Some(tag))
            {
                self.abort_from(i);
            }
        }
        let goals: Vec<String> = self
            .goals
            .iter()
            .filter(|g| g.tag.as_deref() == Some(tag))
            .map(|g| g.name.clone())
            .collect();
        self.goals.retain(|g| g.tag.as_deref() != Some(tag));
        for g in goals {
            if self.intentions.first().is_some_and(|it| it.goal.name == g) {
                self.intentions.clear();
            }
        }
        self.invalidate("#plan");
        self.invalidate("#goal");
    }

    fn abort_from(&mut self, i: usize) {
        self.intentions.truncate(i);
        if let Some(parent) = self.intentions.last_mut() {
            parent.child_failed = true;
        }
    }

    // ---- plan selection ---------------------------------------------------

    /// Applicable plan for `goal`: goal pattern unifies, the precondition and
    /// leading FACT/RETRIEVE/TEST prefix are satisfiable, and the EFFECTS would
    /// change the world model. Highest utility wins; ties go to the earlier
    /// declaration.
    pub fn select_plan(&self, goal: &GoalInstance) -> Option<(Arc<Plan>, Bindings)> {
        let mut best: Option<(Arc<Plan>, Bindings)> = None;
        for plan in &self.plans {
            if plan.goal.kind != goal.kind || plan.goal.name != goal.name {
                continue;
            }
            if plan.goal.args.len() != goal.args.len() {
                continue;
            }
            let pat = Pattern::new(plan.goal.name.clone(), plan.goal.args.clone());
            let Some(gb) = pat.unify(&Fact::new(goal.name.clone(), goal.args.clone()), &Bindings::new())
            else {
                continue;
            };
            let Some(start) = self.satisfy(&plan.precondition, &gb) else {
                continue;
            };
            let prefix: Vec<Step> = plan
                .body
                .iter()
                .take_while(|s| matches!(s, Step::Fact(_) | Step::Retrieve(_) | Step::Test { .. }))
                .cloned()
                .collect();
            let Some(after_prefix) = self.satisfy(&prefix, &start) else {
                continue;
            };
            if !self.effects_would_change(plan, &after_prefix) {
                continue;
            }
            if best.as_ref().is_none_or(|(b, _)| plan.utility > b.utility) {
                best = Some((plan.clone(), start));
            }
        }
        best
    }

    fn satisfy(&self, steps: &[Step], b: &Bindings) -> Option<Bindings> {
        let mut b = b.clone();
        for s in steps {
            match s {
                Step::Fact(p) | Step::Retrieve(p) => b = self.world.query(p, &b)?.0,
                Step::Test { op, lhs, rhs } => {
                    let (x, y) = (lhs.resolve(&b)?, rhs.resolve(&b)?);
                    if !op.eval(&x, &y) {
                        return None;
                    }
                }
                _ => {}
            }
        }
        Some(b)
    }

    fn effects_would_change(&self, plan: &Plan, b: &Bindings) -> bool {
        if plan.effects.is_empty() {
            return true;
        }
        plan.effects.iter().any(|e| match e {
            Step::Assert(p) => match p.ground(b) {
                Some(f) => !self.world.contains(&f),
                None => true,
            },
            Step::Retract(p) => self.world.matching(&p.substitute(b)).next().is_some(),
            _ => true,
        })
    }

    fn goal_instance(g: &GoalDecl) -> GoalInstance {
        GoalInstance {
            kind: g.kind,
            name: g.name.clone(),
            args: g.args.clone(),
        }
    }

    /// Top-level goals ordered by priority (desc), then declaration order.
    fn ranked_goals(&self) -> Vec<&GoalDecl> {
        let mut v: Vec<(usize, &GoalDecl)> = self.goals.iter().enumerate().collect();
        v.sort_by(|a, b| b.1.priority.cmp(&a.1.priority).then(a.0.cmp(&b.0)));
        v.into_iter().map(|(_, g)| g).collect()
    }

    fn pick_top_level(&self, above: Option<i64>) -> Option<Intention> {
        for g in self.ranked_goals() {
            if above.is_some_and(|p| g.priority <= p) {
                break;
            }
            let gi = Self::goal_instance(g);
            if let Some((plan, b)) = self.select_plan(&gi) {
                return Some(Intention::new(gi, plan, b));
            }
        }
        None
    }

    fn root_priority(&self) -> i64 {
        self.intentions
            .first()
            .and_then(|it| self.goals.iter().find(|g| g.name == it.goal.name && g.args == it.goal.args))
            .map_or(0, |g| g.priority)
    }

    // ---- the cycle ----------------------------------------------------------

    /// First half of a cycle: clear the per-cycle condition cache and invoke
    /// the observer.
    pub fn begin_cycle(&mut self, observer: &mut dyn FnMut(&AgentState)) {
        self.cycle += 1;
        self.cond_cache.clear();
        self.observer_calls += 1;
        observer(self);
    }

    /// Second half of a cycle: one plan step.
    pub fn execute_step(&mut self, prims: &Primitives) -> Result<Vec<AgentEvent>, AgentError> {
        let mut events = Vec::new();
        if self.skip_cycles > 0 {
            self.skip_cycles -= 1;
            return Ok(events);
        }
        self.settle();
        if self.intentions.is_empty() {
            if let Some(it) = self.pick_top_level(None) {
                self.intentions.push(it);
            }
            return Ok(events);
        }
        self.steps_executed += 1;
        let top = self.intentions.len() - 1;
        let Instr::Do(step) = self.intentions[top].plan.code[self.intentions[top].pc].clone() else {
            unreachable!("settle leaves the pc on a step");
        };
        match self.run_step(&step, prims, &mut events)? {
            StepResult::Advance => self.intentions[top].pc += 1,
            StepResult::Pushed => {}
            StepResult::Fail => self.fail(),
        }
        self.settle();
        Ok(events)
    }

    /// Full cycle: [`begin_cycle`](Self::begin_cycle) then
    /// [`execute_step`](Self::execute_step).
    pub fn interpreter_cycle(
        &mut self,
        prims: &Primitives,
        observer: &mut dyn FnMut(&AgentState),
    ) -> Result<Vec<AgentEvent>, AgentError> {
        self.begin_cycle(observer);
        self.execute_step(prims)
    }

    fn run_step(
        &mut self,
        step: &Step,
        prims: &Primitives,
        events: &mut Vec<AgentEvent>,
    ) -> Result<StepResult, AgentError> {
        let top = self.intentions.len() - 1;
        let b = self.intentions[top].bindings.clone();
        Ok(match step {
            Step::Fact(p) | Step::Retrieve(p) => match self.world.query(p, &b) {
                Some((nb, fact)) => {
                    let read = fact.value().map(|_| Read {
                        key: fact.key(),
                        var: match p.args.last() {
                            Some(Term::Var(v)) => Some(v.clone()),
                            _ => None,
                        },
                    });
                    let it = &mut self.intentions[top];
                    it.bindings = nb;
                    if let Some(r) = read {
                        if r.var.is_some() || matches!(p.args.last(), Some(Term::Atom(Atom::Num(_)))) {
                            it.reads.push(r);
                        }
                    }
                    StepResult::Advance
                }
                None => StepResult::Fail,
            },
            Step::Test { op, lhs, rhs } => match (lhs.resolve(&b), rhs.resolve(&b)) {
                (Some(x), Some(y)) if op.eval(&x, &y) => {
                    self.intentions[top].passed_tests.push((*op, lhs.clone(), rhs.clone()));
                    StepResult::Advance
                }
                _ => StepResult::Fail,
            },
            Step::Achieve { name, args } => {
                let Some(args) = args.iter().map(|t| t.resolve(&b)).collect::<Option<Vec<_>>>() else {
                    return Ok(StepResult::Fail);
                };
                let goal = GoalInstance {
                    kind: GoalKind::Achieve,
                    name: name.clone(),
                    args,
                };
                if let Some(it) = self.pick_top_level(Some(self.root_priority())) {
                    // a strictly higher-priority goal preempts at this selection point
                    self.intentions.clear();
                    self.intentions.push(it);
                    return Ok(StepResult::Pushed);
                }
                match self.select_plan(&goal) {
                    Some((plan, nb)) => {
                        self.intentions[top].awaiting_child = true;
                        self.intentions.push(Intention::new(goal, plan, nb));
                        StepResult::Pushed
                    }
                    None => StepResult::Fail,
                }
            }
            Step::Perform { action, args } | Step::Execute { action, args } => {
                if !prims.contains(action) {
                    return Err(AgentError::PrimitiveNotRegistered(action.clone()));
                }
                let Some(args) = args.iter().map(|t| t.resolve(&b)).collect::<Option<Vec<_>>>() else {
                    return Ok(StepResult::Fail);
                };
                events.push(AgentEvent {
                    cycle: self.cycle,
                    agent: self.id.clone(),
                    kind: if matches!(step, Step::Perform { .. }) {
                        EventKind::Perform
                    } else {
                        EventKind::Execute
                    },
                    action: action.clone(),
                    args,
                });
                StepResult::Advance
            }
            Step::Assert(_) | Step::Retract(_) => {
                self.write(top, step);
                StepResult::Advance
            }
            Step::Or(_) => unreachable!("OR is compiled away"),
        })
    }

    fn write(&mut self, at: usize, step: &Step) {
        let b = self.intentions[at].bindings.clone();
        let written = match step {
            Step::Assert(p) => {
                let Some(f) = p.ground(&b) else { return };
                let pat = Pattern::new(
                    f.predicate.clone(),
                    f.args.iter().cloned().map(Term::Atom).collect(),
                );
                self.assert_fact(f);
                pat
            }
            Step::Retract(p) => {
                let p = p.substitute(&b);
                self.retract_fact(&p);
                p
            }
            _ => return,
        };
        if self.trace.is_some() {
            let rec = self.write_record(at, written);
            if let Some(t) = self.trace.as_mut() {
                t.push(rec);
            }
        }
    }

    fn write_record(&self, at: usize, written: Pattern) -> WriteRecord {
        let mut supports = Vec::new();
        for it in &self.intentions[..=at] {
            for r in &it.reads {
                let dir = match &r.var {
                    None => Some(Direction::Either),
                    Some(v) => {
                        let mut d: Option<Direction> = None;
                        for (op, l, rr) in &it.passed_tests {
                            let here = match (l, rr) {
                                (Term::Var(x), _) if x == v => Some(falsify(*op, false)),
                                (_, Term::Var(x)) if x == v => Some(falsify(*op, true)),
                                _ => None,
                            };
                            d = match (d, here) {
                                (None, h) => h,
                                (Some(a), Some(h)) if a != h => Some(Direction::Either),
                                (a, _) => a,
                            };
                        }
                        d
                    }
                };
                if let Some(dir) = dir {
                    if !supports.iter().any(|(k, _)| *k == r.key) {
                        supports.push((r.key.clone(), dir));
                    }
                }
            }
        }
        WriteRecord {
            cycle: self.cycle,
            agent: self.id.clone(),
            written,
            plan: self.intentions[at].plan.name.clone(),
            root_goal: self.intentions[0].goal.name.clone(),
            stack_goals: self.intentions[..=at].iter().map(|i| i.goal.name.clone()).collect(),
            supports,
        }
    }

    /// Runs control instructions, completions, and pending child failures
    /// until the top intention sits on an executable step.
    fn settle(&mut self) {
        loop {
            let Some(top) = self.intentions.len().checked_sub(1) else {
                return;
            };
            if self.intentions[top].child_failed {
                self.intentions[top].child_failed = false;
                self.intentions[top].awaiting_child = false;
                self.fail();
                continue;
            }
            if self.intentions[top].awaiting_child {
                // child was popped without notifying: treat as failure
                self.intentions[top].awaiting_child = false;
                self.fail();
                continue;
            }
            let it = &mut self.intentions[top];
            if it.pc >= it.plan.code.len() {
                self.complete();
                continue;
            }
            match it.plan.code[it.pc].clone() {
                Instr::Try(target) => {
                    let snap = (target, it.bindings.clone(), it.reads.len(), it.passed_tests.len());
                    it.handlers.push(snap);
                    it.pc += 1;
                }
                Instr::EndTry => {
                    it.handlers.pop();
                    it.pc += 1;
                }
                Instr::Jump(t) => it.pc = t,
                Instr::Do(_) => return,
            }
        }
    }

    fn complete(&mut self) {
        let top = self.intentions.len() - 1;
        let effects = self.intentions[top].plan.effects.clone();
        for e in &effects {
            self.write(top, e);
        }
        let done = self.intentions.pop().expect("non-empty");
        match self.intentions.last_mut() {
            Some(parent) => {
                parent.awaiting_child = false;
                parent.pc += 1;
            }
            None => {
                if done.goal.kind == GoalKind::Perform {
                    if let Some(i) = self
                        .goals
                        .iter()
                        .position(|g| g.name == done.goal.name && g.args == done.goal.args)
                    {
                        self.goals.remove(i);
                    }
                }
            }
        }
    }

    /// Fails the current step of the top intention: jump to the innermost
    /// OR handler, or fail the plan and propagate to the parent.
    fn fail(&mut self) {
        while let Some(top) = self.intentions.len().checked_sub(1) {
            let it = &mut self.intentions[top];
            if let Some((target, b, nreads, ntests)) = it.handlers.pop() {
                it.pc = target;
                it.bindings = b;
                it.reads.truncate(nreads);
                it.passed_tests.truncate(ntests);
                return;
            }
            self.intentions.pop();
            match self.intentions.last_mut() {
                Some(parent) => parent.awaiting_child = false,
                None => return,
            }
        }
    }
}

fn falsify(op: CmpOp, var_on_right: bool) -> Direction {
    let d = match op {
        CmpOp::Gt | CmpOp::Ge => Direction::Down,
        CmpOp::Lt | CmpOp::Le => Direction::Up,
        CmpOp::Eq | CmpOp::Ne => Direction::Either,
    };
    if var_on_right {
        match d {
            Direction::Down => Direction::Up,
            Direction::Up => Direction::Down,
            e => e,
        }
    } else {
        d
    }
}

#[cfg(test)]
mod tests;
