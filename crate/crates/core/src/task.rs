//! Symbolic task planning: a typed STRIPS fragment with an s-expression
//! input format, forward search (uniform-cost for shortest plans, greedy
//! best-first on an additive relaxation), plan validation, and a partition
//! of plans into navigation and manipulation steps.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum number of ground actions the planner will instantiate.
pub const GROUND_BUDGET: usize = 100_000;
/// Maximum number of state expansions per search.
pub const EXPANSION_BUDGET: usize = 1_000_000;

/// Root of the type hierarchy; every declared type descends from it.
pub const ROOT_TYPE: &str = "object";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TaskError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("cannot ground: {0}")]
    Ungroundable(String),
    #[error("no action sequence reaches the goal")]
    GoalUnreachable,
    #[error("search budget exceeded ({0} units)")]
    SearchBudgetExceeded(usize),
}

/// A ground fact: predicate applied to constant names.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.predicate, self.args.join(","))
    }
}

/// Either a schema variable (leading `?` stripped) or a constant name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Var(String),
    Const(String),
}

/// A predicate applied to variables and/or constants inside a schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomTemplate {
    pub predicate: String,
    pub args: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedName {
    pub name: String,
    pub ty: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    #[serde(rename = "nav")]
    Navigation,
    #[serde(rename = "manip")]
    Manipulation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: String,
    pub kind: ActionKind,
    pub parameters: Vec<TypedName>,
    pub preconditions: Vec<AtomTemplate>,
    pub add_effects: Vec<AtomTemplate>,
    pub del_effects: Vec<AtomTemplate>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateDecl {
    pub name: String,
    pub arg_types: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    pub name: String,
    /// Type name -> parent type name. [`ROOT_TYPE`] is implicit.
    pub types: Vec<(String, String)>,
    pub constants: Vec<TypedName>,
    pub predicates: Vec<PredicateDecl>,
    pub actions: Vec<ActionSchema>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub name: String,
    pub domain: String,
    pub objects: Vec<TypedName>,
    pub initial: BTreeSet<Atom>,
    pub goal: BTreeSet<Atom>,
}

/// One plan step: a schema bound to constants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
    pub kind: ActionKind,
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.args.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<GroundAction>,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// One JSON object per step, newline terminated:
    /// `{"step":0,"action":"pick","args":["cup","a"],"kind":"manip"}`.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.steps.iter().enumerate() {
            let line = serde_json::json!({
                "step": i,
                "action": s.name,
                "args": s.args,
                "kind": s.kind,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMode {
    /// Uniform-cost forward search; returned plans have minimal length.
    Optimal,
    /// Greedy best-first on the additive relaxation; valid but possibly
    /// longer than optimal.
    Greedy,
}

/// Result of checking a plan against a domain and problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Validation {
    pub valid: bool,
    /// Index of the first step whose precondition (or binding) fails;
    /// `None` when every step applies but the goal is unsatisfied.
    pub failed_step: Option<usize>,
    pub reason: Option<String>,
}

impl Validation {
    fn ok() -> Validation {
        Validation { valid: true, failed_step: None, reason: None }
    }

    fn step_failure(i: usize, reason: String) -> Validation {
        Validation { valid: false, failed_step: Some(i), reason: Some(reason) }
    }
}

// ---------------------------------------------------------------------------
// S-expression reader
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Sexp {
    Sym(String),
    List(Vec<Sexp>),
}

impl Sexp {
    fn sym(&self) -> Option<&str> {
        match self {
            Sexp::Sym(s) => Some(s),
            Sexp::List(_) => None,
        }
    }

    fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(items) => Some(items),
            Sexp::Sym(_) => None,
        }
    }
}

fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut in_comment = false;
    for c in text.chars() {
        if in_comment {
            if c == '\n' {
                in_comment = false;
            }
            continue;
        }
        match c {
            ';' => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
                in_comment = true;
            }
            '(' | ')' => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
                tokens.push(c.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c.to_ascii_lowercase()),
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

fn parse_sexp(tokens: &[String], pos: &mut usize) -> Result<Sexp, TaskError> {
    if *pos >= tokens.len() {
        return Err(TaskError::Parse("unexpected end of input".into()));
    }
    let tok = &tokens[*pos];
    *pos += 1;
    match tok.as_str() {
        "(" => {
            let mut items = Vec::new();
            loop {
                if *pos >= tokens.len() {
                    return Err(TaskError::Parse("unclosed parenthesis".into()));
                }
                if tokens[*pos] == ")" {
                    *pos += 1;
                    return Ok(Sexp::List(items));
                }
                items.push(parse_sexp(tokens, pos)?);
            }
        }
        ")" => Err(TaskError::Parse("unexpected ')'".into())),
        s => Ok(Sexp::Sym(s.to_string())),
    }
}

fn read_single(text: &str) -> Result<Sexp, TaskError> {
    let tokens = tokenize(text);
    let mut pos = 0;
    let sexp = parse_sexp(&tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(TaskError::Parse(format!(
            "trailing content after the top-level form (token {pos})"
        )));
    }
    Ok(sexp)
}

/// Parses `name name - type name - type ...` into typed names; names
/// without a trailing `- type` default to [`ROOT_TYPE`].
fn parse_typed_list(items: &[Sexp], what: &str) -> Result<Vec<TypedName>, TaskError> {
    let mut out = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let sym = items[i]
            .sym()
            .ok_or_else(|| TaskError::Parse(format!("{what}: expected a name, found a list")))?;
        if sym == "-" {
            i += 1;
            let ty = items
                .get(i)
                .and_then(Sexp::sym)
                .ok_or_else(|| TaskError::Parse(format!("{what}: '-' must be followed by a type")))?;
            if pending.is_empty() {
                return Err(TaskError::Parse(format!("{what}: type '{ty}' binds no names")));
            }
            for name in pending.drain(..) {
                out.push(TypedName { name, ty: ty.to_string() });
            }
        } else {
            pending.push(sym.to_string());
        }
        i += 1;
    }
    for name in pending {
        out.push(TypedName { name, ty: ROOT_TYPE.to_string() });
    }
    Ok(out)
}

fn parse_atom_template(sexp: &Sexp) -> Result<AtomTemplate, TaskError> {
    let items = sexp
        .list()
        .ok_or_else(|| TaskError::Parse("expected an atom list".into()))?;
    let predicate = items
        .first()
        .and_then(Sexp::sym)
        .ok_or_else(|| TaskError::Parse("atom must start with a predicate name".into()))?;
    let mut args = Vec::new();
    for item in &items[1..] {
        let sym = item
            .sym()
            .ok_or_else(|| TaskError::Parse(format!("atom '{predicate}': nested list argument")))?;
        if let Some(var) = sym.strip_prefix('?') {
            args.push(Term::Var(var.to_string()));
        } else {
            args.push(Term::Const(sym.to_string()));
        }
    }
    Ok(AtomTemplate { predicate: predicate.to_string(), args })
}

/// Accepts `(and a b c)`, a single atom, or `(not (atom))` entries when
/// `allow_not` is set; returns (positive, negated).
fn parse_condition(
    sexp: &Sexp,
    allow_not: bool,
) -> Result<(Vec<AtomTemplate>, Vec<AtomTemplate>), TaskError> {
    let items = sexp
        .list()
        .ok_or_else(|| TaskError::Parse("condition must be a list".into()))?;
    let entries: Vec<&Sexp> = if items.first().and_then(Sexp::sym) == Some("and") {
        items[1..].iter().collect()
    } else {
        vec![sexp]
    };
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for entry in entries {
        let inner = entry
            .list()
            .ok_or_else(|| TaskError::Parse("condition entries must be lists".into()))?;
        if inner.first().and_then(Sexp::sym) == Some("not") {
            if !allow_not {
                return Err(TaskError::Parse("negations are only allowed in effects".into()));
            }
            if inner.len() != 2 {
                return Err(TaskError::Parse("(not ...) takes exactly one atom".into()));
            }
            neg.push(parse_atom_template(&inner[1])?);
        } else {
            pos.push(parse_atom_template(entry)?);
        }
    }
    Ok((pos, neg))
}

fn parse_ground_atom(sexp: &Sexp) -> Result<Atom, TaskError> {
    let t = parse_atom_template(sexp)?;
    let mut args = Vec::new();
    for term in t.args {
        match term {
            Term::Const(c) => args.push(c),
            Term::Var(v) => {
                return Err(TaskError::Parse(format!(
                    "atom '{}' must be ground but contains variable ?{v}",
                    t.predicate
                )))
            }
        }
    }
    Ok(Atom { predicate: t.predicate, args })
}

// ---------------------------------------------------------------------------
// Domain / problem parsing
// ---------------------------------------------------------------------------

fn header_name<'a>(items: &'a [Sexp], expected: &str) -> Result<&'a str, TaskError> {
    let head = items
        .first()
        .and_then(Sexp::list)
        .ok_or_else(|| TaskError::Parse(format!("expected (define ({expected} name) ...)")))?;
    if head.first().and_then(Sexp::sym) != Some(expected) {
        return Err(TaskError::Parse(format!("expected a '{expected}' header")));
    }
    head.get(1)
        .and_then(Sexp::sym)
        .ok_or_else(|| TaskError::Parse(format!("{expected} header is missing a name")))
}

fn define_body(sexp: &Sexp) -> Result<&[Sexp], TaskError> {
    let items = sexp
        .list()
        .ok_or_else(|| TaskError::Parse("top-level form must be a list".into()))?;
    if items.first().and_then(Sexp::sym) != Some("define") {
        return Err(TaskError::Parse("top-level form must start with 'define'".into()));
    }
    Ok(&items[1..])
}

fn parse_action(items: &[Sexp]) -> Result<ActionSchema, TaskError> {
    let name = items
        .get(1)
        .and_then(Sexp::sym)
        .ok_or_else(|| TaskError::Parse("action is missing a name".into()))?
        .to_string();
    let mut kind = None;
    let mut parameters = Vec::new();
    let mut preconditions = Vec::new();
    let mut add_effects = Vec::new();
    let mut del_effects = Vec::new();
    let mut i = 2;
    while i < items.len() {
        let key = items[i]
            .sym()
            .ok_or_else(|| TaskError::Parse(format!("action '{name}': expected a keyword")))?;
        let value = items
            .get(i + 1)
            .ok_or_else(|| TaskError::Parse(format!("action '{name}': '{key}' has no value")))?;
        match key {
            ":kind" => {
                kind = Some(match value.sym() {
                    Some("nav") | Some("navigation") => ActionKind::Navigation,
                    Some("manip") | Some("manipulation") => ActionKind::Manipulation,
                    other => {
                        return Err(TaskError::Parse(format!(
                            "action '{name}': unknown kind {other:?}"
                        )))
                    }
                });
            }
            ":parameters" => {
                let list = value.list().ok_or_else(|| {
                    TaskError::Parse(format!("action '{name}': parameters must be a list"))
                })?;
                for tn in parse_typed_list(list, "parameters")? {
                    let var = tn.name.strip_prefix('?').ok_or_else(|| {
                        TaskError::Parse(format!(
                            "action '{name}': parameter '{}' must start with '?'",
                            tn.name
                        ))
                    })?;
                    parameters.push(TypedName { name: var.to_string(), ty: tn.ty });
                }
            }
            ":precondition" => {
                let (pos, _) = parse_condition(value, false)?;
                preconditions = pos;
            }
            ":effect" => {
                let (pos, neg) = parse_condition(value, true)?;
                add_effects = pos;
                del_effects = neg;
            }
            other => {
                return Err(TaskError::Parse(format!("action '{name}': unknown keyword '{other}'")))
            }
        }
        i += 2;
    }
    let kind = kind
        .ok_or_else(|| TaskError::Parse(format!("action '{name}' does not declare a :kind")))?;
    Ok(ActionSchema { name, kind, parameters, preconditions, add_effects, del_effects })
}

/// Checks arity against declarations, that schema variables are declared
/// parameters, that constants are declared, and that add/del never state
/// the same template.
fn validate_schema(schema: &ActionSchema, domain: &Domain) -> Result<(), TaskError> {
    let mut seen = BTreeSet::new();
    for p in &schema.parameters {
        if !seen.insert(&p.name) {
            return Err(TaskError::Parse(format!(
                "action '{}': duplicate parameter ?{}",
                schema.name, p.name
            )));
        }
    }
    let all = schema
        .preconditions
        .iter()
        .chain(&schema.add_effects)
        .chain(&schema.del_effects);
    for atom in all {
        let decl = domain
            .predicates
            .iter()
            .find(|p| p.name == atom.predicate)
            .ok_or_else(|| {
                TaskError::Parse(format!(
                    "action '{}': unknown predicate '{}'",
                    schema.name, atom.predicate
                ))
            })?;
        if decl.arg_types.len() != atom.args.len() {
            return Err(TaskError::Parse(format!(
                "action '{}': predicate '{}' takes {} arguments, found {}",
                schema.name,
                atom.predicate,
                decl.arg_types.len(),
                atom.args.len()
            )));
        }
        for term in &atom.args {
            match term {
                Term::Var(v) => {
                    if !schema.parameters.iter().any(|p| &p.name == v) {
                        return Err(TaskError::Parse(format!(
                            "action '{}': variable ?{v} is not a parameter",
                            schema.name
                        )));
                    }
                }
                Term::Const(c) => {
                    if !domain.constants.iter().any(|k| &k.name == c) {
                        return Err(TaskError::Parse(format!(
                            "action '{}': constant '{c}' is not declared in the domain",
                            schema.name
                        )));
                    }
                }
            }
        }
    }
    for add in &schema.add_effects {
        if schema.del_effects.contains(add) {
            return Err(TaskError::Parse(format!(
                "action '{}': effect '{}' is both added and deleted",
                schema.name, add.predicate
            )));
        }
    }
    Ok(())
}

pub fn parse_domain(text: &str) -> Result<Domain, TaskError> {
    let sexp = read_single(text)?;
    let body = define_body(&sexp)?;
    let name = header_name(body, "domain")?.to_string();
    let mut domain = Domain {
        name,
        types: Vec::new(),
        constants: Vec::new(),
        predicates: Vec::new(),
        actions: Vec::new(),
    };
    for clause in &body[1..] {
        let items = clause
            .list()
            .ok_or_else(|| TaskError::Parse("domain clauses must be lists".into()))?;
        match items.first().and_then(Sexp::sym) {
            Some(":types") => {
                for tn in parse_typed_list(&items[1..], "types")? {
                    domain.types.push((tn.name, tn.ty));
                }
            }
            Some(":constants") => {
                domain.constants = parse_typed_list(&items[1..], "constants")?;
            }
            Some(":predicates") => {
                for p in &items[1..] {
                    let t = parse_atom_template(p)?;
                    // Predicate declarations reuse atom syntax: the args are
                    // typed variables.
                    let list = p.list().unwrap();
                    let typed = parse_typed_list(&list[1..], "predicate arguments")?;
                    if typed.iter().any(|tn| !tn.name.starts_with('?')) {
                        return Err(TaskError::Parse(format!(
                            "predicate '{}': arguments must be ?variables",
                            t.predicate
                        )));
                    }
                    domain.predicates.push(PredicateDecl {
                        name: t.predicate,
                        arg_types: typed.into_iter().map(|tn| tn.ty).collect(),
                    });
                }
            }
            Some(":action") => {
                domain.actions.push(parse_action(items)?);
            }
            other => {
                return Err(TaskError::Parse(format!("unknown domain clause {other:?}")));
            }
        }
    }
    // Register parent types that were only mentioned on the right of '-'.
    let declared: BTreeSet<String> = domain.types.iter().map(|(t, _)| t.clone()).collect();
    let parents: BTreeSet<String> = domain.types.iter().map(|(_, p)| p.clone()).collect();
    for p in parents {
        if p != ROOT_TYPE && !declared.contains(&p) {
            domain.types.push((p, ROOT_TYPE.to_string()));
        }
    }
    check_type_cycles(&domain)?;
    let mut names = BTreeSet::new();
    for a in &domain.actions {
        if !names.insert(a.name.clone()) {
            return Err(TaskError::Parse(format!("duplicate action name '{}'", a.name)));
        }
    }
    let mut preds = BTreeSet::new();
    for p in &domain.predicates {
        if !preds.insert(p.name.clone()) {
            return Err(TaskError::Parse(format!("duplicate predicate '{}'", p.name)));
        }
    }
    for schema in &domain.actions {
        validate_schema(schema, &domain)?;
    }
    Ok(domain)
}

pub fn parse_problem(text: &str) -> Result<Problem, TaskError> {
    let sexp = read_single(text)?;
    let body = define_body(&sexp)?;
    let name = header_name(body, "problem")?.to_string();
    let mut problem = Problem {
        name,
        domain: String::new(),
        objects: Vec::new(),
        initial: BTreeSet::new(),
        goal: BTreeSet::new(),
    };
    for clause in &body[1..] {
        let items = clause
            .list()
            .ok_or_else(|| TaskError::Parse("problem clauses must be lists".into()))?;
        match items.first().and_then(Sexp::sym) {
            Some(":domain") => {
                problem.domain = items
                    .get(1)
                    .and_then(Sexp::sym)
                    .ok_or_else(|| TaskError::Parse(":domain needs a name".into()))?
                    .to_string();
            }
            Some(":objects") => {
                problem.objects = parse_typed_list(&items[1..], "objects")?;
            }
            Some(":init") => {
                for a in &items[1..] {
                    problem.initial.insert(parse_ground_atom(a)?);
                }
            }
            Some(":goal") => {
                let goal = items
                    .get(1)
                    .ok_or_else(|| TaskError::Parse(":goal needs a condition".into()))?;
                let (pos, _) = parse_condition(goal, false)?;
                for t in pos {
                    let mut args = Vec::new();
                    for term in t.args {
                        match term {
                            Term::Const(c) => args.push(c),
                            Term::Var(v) => {
                                return Err(TaskError::Parse(format!(
                                    "goal atoms must be ground, found ?{v}"
                                )))
                            }
                        }
                    }
                    problem.goal.insert(Atom { predicate: t.predicate, args });
                }
            }
            other => {
                return Err(TaskError::Parse(format!("unknown problem clause {other:?}")));
            }
        }
    }
    if problem.domain.is_empty() {
        return Err(TaskError::Parse("problem does not name its domain".into()));
    }
    Ok(problem)
}

// ---------------------------------------------------------------------------
// Typing
// ---------------------------------------------------------------------------

fn check_type_cycles(domain: &Domain) -> Result<(), TaskError> {
    let parent: HashMap<&str, &str> =
        domain.types.iter().map(|(t, p)| (t.as_str(), p.as_str())).collect();
    for start in parent.keys() {
        let mut cur = *start;
        for _ in 0..=parent.len() {
            match parent.get(cur) {
                Some(p) => cur = p,
                None => break,
            }
            if cur == *start {
                return Err(TaskError::Parse(format!("type hierarchy cycle through '{start}'")));
            }
        }
    }
    Ok(())
}

struct TypeTable<'a> {
    parent: HashMap<&'a str, &'a str>,
}

impl<'a> TypeTable<'a> {
    fn new(domain: &'a Domain) -> TypeTable<'a> {
        TypeTable {
            parent: domain.types.iter().map(|(t, p)| (t.as_str(), p.as_str())).collect(),
        }
    }

    fn known(&self, ty: &str) -> bool {
        ty == ROOT_TYPE || self.parent.contains_key(ty)
    }

    /// True when a value of type `ty` may be used where `required` is asked.
    fn satisfies(&self, ty: &str, required: &str) -> bool {
        if required == ROOT_TYPE {
            return true;
        }
        let mut cur = ty;
        loop {
            if cur == required {
                return true;
            }
            match self.parent.get(cur) {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Grounding
// ---------------------------------------------------------------------------

struct GAction {
    /// Display name, e.g. `move(a,b)`; ground actions are sorted by it.
    name: String,
    public: GroundAction,
    pre: Vec<u32>,
    add: Vec<u32>,
    del: Vec<u32>,
}

struct Grounded {
    actions: Vec<GAction>,
    init: Vec<u32>,
    goal: Vec<u32>,
    n_atoms: usize,
}

struct AtomTable {
    ids: HashMap<Atom, u32>,
}

impl AtomTable {
    fn intern(&mut self, atom: Atom) -> u32 {
        let next = self.ids.len() as u32;
        *self.ids.entry(atom).or_insert(next)
    }
}

/// Collects every usable constant (domain constants plus problem objects),
/// validates typing, and instantiates each schema over all well-typed
/// bindings, erroring past [`GROUND_BUDGET`] instantiations.
fn ground(domain: &Domain, problem: &Problem) -> Result<Grounded, TaskError> {
    let types = TypeTable::new(domain);

    let mut universe: Vec<&TypedName> = Vec::new();
    let mut seen = BTreeSet::new();
    for obj in domain.constants.iter().chain(&problem.objects) {
        if !types.known(&obj.ty) {
            return Err(TaskError::Ungroundable(format!(
                "'{}' has unknown type '{}'",
                obj.name, obj.ty
            )));
        }
        if !seen.insert(obj.name.as_str()) {
            return Err(TaskError::Ungroundable(format!("duplicate object name '{}'", obj.name)));
        }
        universe.push(obj);
    }
    universe.sort_by(|a, b| a.name.cmp(&b.name));
    let type_of: HashMap<&str, &str> =
        universe.iter().map(|o| (o.name.as_str(), o.ty.as_str())).collect();

    let check_ground_atom = |atom: &Atom, where_: &str| -> Result<(), TaskError> {
        let decl = domain
            .predicates
            .iter()
            .find(|p| p.name == atom.predicate)
            .ok_or_else(|| {
                TaskError::Ungroundable(format!("{where_}: unknown predicate '{}'", atom.predicate))
            })?;
        if decl.arg_types.len() != atom.args.len() {
            return Err(TaskError::Ungroundable(format!(
                "{where_}: '{}' takes {} arguments, found {}",
                atom.predicate,
                decl.arg_types.len(),
                atom.args.len()
            )));
        }
        for (arg, req) in atom.args.iter().zip(&decl.arg_types) {
            let ty = type_of.get(arg.as_str()).ok_or_else(|| {
                TaskError::Ungroundable(format!("{where_}: unknown object '{arg}'"))
            })?;
            if !types.satisfies(ty, req) {
                return Err(TaskError::Ungroundable(format!(
                    "{where_}: '{arg}' has type '{ty}' but '{}' requires '{req}'",
                    atom.predicate
                )));
            }
        }
        Ok(())
    };
    for atom in &problem.initial {
        check_ground_atom(atom, "initial state")?;
    }
    for atom in &problem.goal {
        check_ground_atom(atom, "goal")?;
    }

    let mut table = AtomTable { ids: HashMap::new() };
    let init: BTreeSet<u32> = problem.initial.iter().map(|a| table.intern(a.clone())).collect();
    let goal: BTreeSet<u32> = problem.goal.iter().map(|a| table.intern(a.clone())).collect();

    let mut actions = Vec::new();
    for schema in &domain.actions {
        // Candidate constants per parameter, in sorted-name order.
        let mut candidates: Vec<Vec<&TypedName>> = Vec::new();
        for param in &schema.parameters {
            if !types.known(&param.ty) {
                return Err(TaskError::Ungroundable(format!(
                    "action '{}': parameter ?{} has unknown type '{}'",
                    schema.name, param.name, param.ty
                )));
            }
            candidates
                .push(universe.iter().copied().filter(|o| types.satisfies(&o.ty, &param.ty)).collect());
        }
        if candidates.iter().any(|c| c.is_empty()) && !schema.parameters.is_empty() {
            continue; // schema can never be instantiated with these objects
        }
        let mut cursor = vec![0usize; candidates.len()];
        loop {
            let binding: HashMap<&str, &str> = schema
                .parameters
                .iter()
                .zip(&cursor)
                .map(|(p, &i)| (p.name.as_str(), candidates[p_index(schema, &p.name)][i].name.as_str()))
                .collect();
            // (p_index is identity here because parameters are unique and in
            // order; kept explicit for clarity.)
            let resolve = |t: &AtomTemplate| -> Atom {
                Atom {
                    predicate: t.predicate.clone(),
                    args: t
                        .args
                        .iter()
                        .map(|term| match term {
                            Term::Var(v) => binding[v.as_str()].to_string(),
                            Term::Const(c) => c.clone(),
                        })
                        .collect(),
                }
            };
            let args: Vec<String> = schema
                .parameters
                .iter()
                .map(|p| binding[p.name.as_str()].to_string())
                .collect();
            let mut pre: Vec<u32> =
                schema.preconditions.iter().map(|t| table.intern(resolve(t))).collect();
            let mut add: Vec<u32> =
                schema.add_effects.iter().map(|t| table.intern(resolve(t))).collect();
            let mut del: Vec<u32> =
                schema.del_effects.iter().map(|t| table.intern(resolve(t))).collect();
            pre.sort_unstable();
            pre.dedup();
            add.sort_unstable();
            add.dedup();
            del.sort_unstable();
            del.dedup();
            let name = format!("{}({})", schema.name, args.join(","));
            actions.push(GAction {
                name,
                public: GroundAction { name: schema.name.clone(), args, kind: schema.kind },
                pre,
                add,
                del,
            });
            if actions.len() > GROUND_BUDGET {
                return Err(TaskError::SearchBudgetExceeded(GROUND_BUDGET));
            }
            // Odometer increment over the candidate lists.
            let mut k = cursor.len();
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                cursor[k] += 1;
                if cursor[k] < candidates[k].len() {
                    break;
                }
                cursor[k] = 0;
                if k == 0 {
                    break;
                }
            }
            if cursor.iter().all(|&c| c == 0) {
                break;
            }
            if schema.parameters.is_empty() {
                break;
            }
        }
    }
    actions.sort_by(|a, b| a.name.cmp(&b.name));

    Ok(Grounded {
        actions,
        init: init.into_iter().collect(),
        goal: goal.into_iter().collect(),
        n_atoms: table.ids.len(),
    })
}

/// Index of a parameter by name; parameters are validated unique.
fn p_index(schema: &ActionSchema, name: &str) -> usize {
    schema.parameters.iter().position(|p| p.name == name).unwrap()
}

// ---------------------------------------------------------------------------
// Search
// ---------------------------------------------------------------------------

fn is_subset(sub: &[u32], sup: &[u32]) -> bool {
    let mut i = 0;
    for &x in sub {
        while i < sup.len() && sup[i] < x {
            i += 1;
        }
        if i >= sup.len() || sup[i] != x {
            return false;
        }
        i += 1;
    }
    true
}

/// Applies deletes then adds to a sorted state vector.
fn apply(state: &[u32], action: &GAction) -> Vec<u32> {
    let mut next: Vec<u32> = state.iter().copied().filter(|a| !action.del.contains(a)).collect();
    for &a in &action.add {
        if let Err(pos) = next.binary_search(&a) {
            next.insert(pos, a);
        }
    }
    next
}

/// Additive-relaxation cost of the goal from `state`; `None` when even the
/// delete-free relaxation cannot reach it.
fn h_add(grounded: &Grounded, state: &[u32]) -> Option<u64> {
    const INF: u64 = u64::MAX;
    let mut cost = vec![INF; grounded.n_atoms];
    for &a in state {
        cost[a as usize] = 0;
    }
    let mut changed = true;
    while changed {
        changed = false;
        for action in &grounded.actions {
            let mut total: u64 = 1;
            let mut reachable = true;
            for &p in &action.pre {
                match cost[p as usize] {
                    INF => {
                        reachable = false;
                        break;
                    }
                    c => total = total.saturating_add(c),
                }
            }
            if !reachable {
                continue;
            }
            for &a in &action.add {
                if total < cost[a as usize] {
                    cost[a as usize] = total;
                    changed = true;
                }
            }
        }
    }
    let mut sum: u64 = 0;
    for &g in &grounded.goal {
        match cost[g as usize] {
            INF => return None,
            c => sum = sum.saturating_add(c),
        }
    }
    Some(sum)
}

fn search(grounded: &Grounded, mode: PlanMode) -> Result<Vec<usize>, TaskError> {
    struct Node {
        state: Vec<u32>,
        parent: usize,
        action: usize,
    }

    if is_subset(&grounded.goal, &grounded.init) {
        return Ok(Vec::new());
    }
    if mode == PlanMode::Greedy && h_add(grounded, &grounded.init).is_none() {
        return Err(TaskError::GoalUnreachable);
    }

    let mut nodes = vec![Node { state: grounded.init.clone(), parent: usize::MAX, action: usize::MAX }];
    let mut best_g: HashMap<Vec<u32>, u64> = HashMap::new();
    best_g.insert(grounded.init.clone(), 0);
    // Reverse min-heap over (f, insertion sequence); successors are pushed
    // in lexicographic ground-action order, so FIFO sequence numbers give
    // the lexicographically first optimal plan in uniform-cost mode.
    let mut open: BinaryHeap<Reverse<(u64, u64, usize)>> = BinaryHeap::new();
    let mut seq: u64 = 0;
    let h0 = match mode {
        PlanMode::Optimal => 0,
        PlanMode::Greedy => h_add(grounded, &grounded.init).unwrap(),
    };
    open.push(Reverse((h0, seq, 0)));
    let mut g_of = vec![0u64];
    let mut expansions = 0usize;

    while let Some(Reverse((_, _, idx))) = open.pop() {
        let g = g_of[idx];
        let state = &nodes[idx].state;
        match best_g.get(state) {
            Some(&bg) if bg < g => continue, // stale queue entry
            _ => {}
        }
        expansions += 1;
        if expansions > EXPANSION_BUDGET {
            return Err(TaskError::SearchBudgetExceeded(EXPANSION_BUDGET));
        }
        let state = state.clone();
        for (ai, action) in grounded.actions.iter().enumerate() {
            if !is_subset(&action.pre, &state) {
                continue;
            }
            let next = apply(&state, action);
            let ng = g + 1;
            if let Some(&bg) = best_g.get(&next) {
                if bg <= ng {
                    continue;
                }
            }
            if is_subset(&grounded.goal, &next) {
                // Uniform-cost layers are explored in order, so the first
                // goal reached is already optimal in Optimal mode.
                let mut plan = vec![ai];
                let mut cur = idx;
                while nodes[cur].parent != usize::MAX {
                    plan.push(nodes[cur].action);
                    cur = nodes[cur].parent;
                }
                plan.reverse();
                return Ok(plan);
            }
            let h = match mode {
                PlanMode::Optimal => 0,
                PlanMode::Greedy => match h_add(grounded, &next) {
                    Some(h) => h,
                    None => continue,
                },
            };
            best_g.insert(next.clone(), ng);
            nodes.push(Node { state: next, parent: idx, action: ai });
            g_of.push(ng);
            seq += 1;
            open.push(Reverse((ng + h, seq, nodes.len() - 1)));
        }
    }
    Err(TaskError::GoalUnreachable)
}

/// Plans an action sequence from the initial state to the goal.
pub fn plan(domain: &Domain, problem: &Problem, mode: PlanMode) -> Result<Plan, TaskError> {
    let grounded = ground(domain, problem)?;
    let indices = search(&grounded, mode)?;
    Ok(Plan { steps: indices.into_iter().map(|i| grounded.actions[i].public.clone()).collect() })
}

// ---------------------------------------------------------------------------
// Validation and splitting
// ---------------------------------------------------------------------------

/// Replays a plan from the initial state. Failures are data, not errors:
/// the result names the first failing step, or carries `failed_step: None`
/// when all steps apply but the goal is unsatisfied.
pub fn validate_plan(domain: &Domain, problem: &Problem, plan: &Plan) -> Validation {
    let types = TypeTable::new(domain);
    let mut type_of: HashMap<&str, &str> = HashMap::new();
    for obj in domain.constants.iter().chain(&problem.objects) {
        type_of.insert(&obj.name, &obj.ty);
    }
    let mut state = problem.initial.clone();
    for (i, step) in plan.steps.iter().enumerate() {
        let schema = match domain.actions.iter().find(|a| a.name == step.name) {
            Some(s) => s,
            None => return Validation::step_failure(i, format!("unknown action '{}'", step.name)),
        };
        if schema.parameters.len() != step.args.len() {
            return Validation::step_failure(
                i,
                format!(
                    "'{}' takes {} arguments, found {}",
                    step.name,
                    schema.parameters.len(),
                    step.args.len()
                ),
            );
        }
        let mut binding: HashMap<&str, &str> = HashMap::new();
        for (param, arg) in schema.parameters.iter().zip(&step.args) {
            let ty = match type_of.get(arg.as_str()) {
                Some(t) => t,
                None => return Validation::step_failure(i, format!("unknown object '{arg}'")),
            };
            if !types.satisfies(ty, &param.ty) {
                return Validation::step_failure(
                    i,
                    format!("'{arg}' has type '{ty}' but ?{} requires '{}'", param.name, param.ty),
                );
            }
            binding.insert(&param.name, arg);
        }
        let resolve = |t: &AtomTemplate| -> Atom {
            Atom {
                predicate: t.predicate.clone(),
                args: t
                    .args
                    .iter()
                    .map(|term| match term {
                        Term::Var(v) => binding[v.as_str()].to_string(),
                        Term::Const(c) => c.clone(),
                    })
                    .collect(),
            }
        };
        for pre in &schema.preconditions {
            let atom = resolve(pre);
            if !state.contains(&atom) {
                return Validation::step_failure(i, format!("precondition {atom} does not hold"));
            }
        }
        for del in &schema.del_effects {
            state.remove(&resolve(del));
        }
        for add in &schema.add_effects {
            state.insert(resolve(add));
        }
    }
    for g in &problem.goal {
        if !state.contains(g) {
            return Validation {
                valid: false,
                failed_step: None,
                reason: Some(format!("goal {g} not satisfied after the final step")),
            };
        }
    }
    Validation::ok()
}

/// Partitions a plan into (navigation, manipulation) steps, each tagged with
/// its original index; concatenating by index recovers the plan.
pub fn split_actions(plan: &Plan) -> (Vec<(usize, GroundAction)>, Vec<(usize, GroundAction)>) {
    let mut nav = Vec::new();
    let mut manip = Vec::new();
    for (i, step) in plan.steps.iter().enumerate() {
        match step.kind {
            ActionKind::Navigation => nav.push((i, step.clone())),
            ActionKind::Manipulation => manip.push((i, step.clone())),
        }
    }
    (nav, manip)
}
