//! Canonical PDDL text for the STRIPS + typing + negative-preconditions
//! subset.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use super::{DomainSpec, GroundingError, GoalSpec, ProblemSpec};
use crate::logic::{atom_from_sexpr, literal_from_sexpr, ActionSchema, Atom, DomainElements, Literal, Param, PredicateSignature, TypeHierarchy, OBJECT};
use crate::sexpr::{self, Pos, Sexpr};

const SUPPORTED_REQUIREMENTS: [&str; 3] = [":strips", ":typing", ":negative-preconditions"];
const UNSUPPORTED_CONNECTIVES: [&str; 9] = ["or", "imply", "exists", "forall", "when", "either", "=", "increase", "decrease"];

fn params_text(params: &[Param]) -> String {
    params.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ")
}

fn conjunction(out: &mut String, indent: &str, lits: &[String]) {
    if lits.is_empty() {
        out.push_str("(and)");
        return;
    }
    out.push_str("(and");
    for l in lits {
        let _ = write!(out, "\n{indent}{l}");
    }
    out.push(')');
}

pub fn emit_domain(d: &DomainSpec) -> String {
    let e = &d.elements;
    let mut out = String::new();
    let _ = writeln!(out, "(define (domain {})", d.name);
    let _ = writeln!(out, "  (:requirements {})", d.requirements().join(" "));

    let mut by_parent: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (child, parent) in e.types.parents() {
        by_parent.entry(parent.as_str()).or_default().push(child.as_str());
    }
    out.push_str("  (:types");
    for (parent, children) in &by_parent {
        let _ = write!(out, "\n    {} - {parent}", children.join(" "));
    }
    out.push_str(")\n");

    out.push_str("  (:predicates");
    for p in e.predicates.values() {
        let _ = write!(out, "\n    {p}");
    }
    out.push(')');

    for a in e.actions.values() {
        let _ = write!(out, "\n  (:action {}\n    :parameters ({})\n    :precondition ", a.name, params_text(&a.params));
        let pre: Vec<String> = a.pre.iter().map(|l| l.to_string()).collect();
        conjunction(&mut out, "      ", &pre);
        out.push_str("\n    :effect ");
        let eff: Vec<String> = a
            .add
            .iter()
            .map(|x| x.to_string())
            .chain(a.del.iter().map(|x| format!("(not {x})")))
            .collect();
        conjunction(&mut out, "      ", &eff);
        out.push(')');
    }
    out.push_str(")\n");
    out
}

fn partition_header(role: &str, agent: &str) -> String {
    if agent.is_empty() {
        format!("; {role}")
    } else {
        format!("; {role} {agent}")
    }
}

pub fn emit_problem(p: &ProblemSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(define (problem {})", p.name);
    let _ = writeln!(out, "  (:domain {})", p.domain_name);
    out.push_str("  (:objects");
    for (o, ty) in &p.objects {
        let _ = write!(out, "\n    {o} - {ty}");
    }
    out.push_str(")\n  (:init");
    for a in &p.init {
        let _ = write!(out, "\n    {a}");
    }
    out.push_str(")\n  (:goal (and");
    for (role, agent, goal) in p.goal.partitions() {
        let role = match role {
            super::Role::Robot => "robot",
            super::Role::Human => "human",
        };
        let _ = write!(out, "\n    {}\n    ", partition_header(role, agent));
        let lits: Vec<String> = goal.iter().map(|l| l.to_string()).collect();
        conjunction(&mut out, "      ", &lits);
    }
    out.push_str(")))\n");
    out
}

fn unsupported(feature: &str, pos: Pos) -> GroundingError {
    GroundingError::UnsupportedFeature {
        feature: feature.to_string(),
        line: pos.line,
        column: pos.column,
    }
}

fn syntax(pos: Pos, message: impl Into<String>) -> GroundingError {
    GroundingError::Syntax(sexpr::parse_error(pos, message))
}

/// `(define (<kind> name) sections...)` header and sections.
fn define<'a>(top: &'a Sexpr, kind: &str) -> Result<(String, Vec<&'a Sexpr>), GroundingError> {
    let items = top.elements();
    if items.first().and_then(|s| s.as_symbol()) != Some("define") || items.len() < 2 {
        return Err(syntax(top.pos(), "expected (define ...)"));
    }
    let header = items[1].elements();
    match header.as_slice() {
        [k, name] if k.as_symbol() == Some(kind) => {
            let name = name.as_symbol().ok_or_else(|| syntax(name.pos(), "name expected"))?;
            Ok((name.to_string(), items[2..].to_vec()))
        }
        _ => Err(syntax(items[1].pos(), format!("expected ({kind} <name>)"))),
    }
}

fn section_head(s: &Sexpr) -> Result<(&str, Vec<&Sexpr>), GroundingError> {
    let items = s.elements();
    let head = items
        .first()
        .and_then(|h| h.as_symbol())
        .filter(|h| h.starts_with(':'))
        .ok_or_else(|| syntax(s.pos(), "expected a section such as (:predicates ...)"))?;
    Ok((head, items[1..].to_vec()))
}

fn check_requirements(items: &[&Sexpr]) -> Result<(), GroundingError> {
    for r in items {
        let name = r.as_symbol().ok_or_else(|| syntax(r.pos(), "requirement flag expected"))?;
        if !SUPPORTED_REQUIREMENTS.contains(&name) {
            return Err(unsupported(name, r.pos()));
        }
    }
    Ok(())
}

/// Reads `a b - t c` style lists into (name, type) pairs; untyped names
/// default to `object`.
fn typed_list(items: &[&Sexpr]) -> Result<Vec<(String, String, Pos)>, GroundingError> {
    let mut out = Vec::new();
    let mut pending: Vec<(String, Pos)> = Vec::new();
    let mut k = 0;
    while k < items.len() {
        let it = items[k];
        if let Some(list) = it.as_list() {
            let head = list.iter().find_map(|e| e.as_symbol()).unwrap_or("");
            return Err(if head == "either" { unsupported("either", it.pos()) } else { syntax(it.pos(), "unexpected list in typed list") });
        }
        let sym = it.as_symbol().ok_or_else(|| syntax(it.pos(), "symbol expected"))?;
        if sym == "-" {
            let ty = items.get(k + 1).ok_or_else(|| syntax(it.pos(), "type expected after '-'"))?;
            if ty.as_list().is_some() {
                return Err(unsupported("either", ty.pos()));
            }
            let ty = ty.as_symbol().ok_or_else(|| syntax(ty.pos(), "type expected"))?;
            if pending.is_empty() {
                return Err(syntax(it.pos(), "'-' without preceding names"));
            }
            out.extend(pending.drain(..).map(|(n, p)| (n, ty.to_string(), p)));
            k += 2;
        } else {
            pending.push((sym.to_string(), it.pos()));
            k += 1;
        }
    }
    out.extend(pending.into_iter().map(|(n, p)| (n, OBJECT.to_string(), p)));
    Ok(out)
}

fn params(items: &[&Sexpr]) -> Result<Vec<Param>, GroundingError> {
    typed_list(items)?
        .into_iter()
        .map(|(n, t, pos)| {
            if n.starts_with('?') && n.len() > 1 {
                Ok(Param::new(n, t))
            } else {
                Err(syntax(pos, format!("parameter `{n}` must start with '?'")))
            }
        })
        .collect()
}

fn reject_connective(e: &Sexpr) -> Result<(), GroundingError> {
    if let Some(head) = e.elements().first() {
        if let Some(h) = head.as_symbol() {
            if UNSUPPORTED_CONNECTIVES.contains(&h) {
                return Err(unsupported(h, head.pos()));
            }
        }
    }
    Ok(())
}

/// A literal or an `(and ...)` of literals.
fn literals(e: &Sexpr) -> Result<Vec<Literal>, GroundingError> {
    reject_connective(e)?;
    let items = e.elements();
    if items.first().and_then(|h| h.as_symbol()) == Some("and") {
        let mut out = Vec::new();
        for child in &items[1..] {
            reject_connective(child)?;
            if child.elements().first().and_then(|h| h.as_symbol()) == Some("and") {
                return Err(syntax(child.pos(), "nested (and ...) is not supported here"));
            }
            out.push(literal_from_sexpr(child)?);
        }
        Ok(out)
    } else {
        Ok(vec![literal_from_sexpr(e)?])
    }
}

fn action(items: &[&Sexpr], pos: Pos) -> Result<ActionSchema, GroundingError> {
    let name = items
        .first()
        .and_then(|n| n.as_symbol())
        .ok_or_else(|| syntax(pos, "action name expected"))?;
    let mut schema = ActionSchema {
        name: name.to_string(),
        params: Vec::new(),
        pre: BTreeSet::new(),
        add: BTreeSet::new(),
        del: BTreeSet::new(),
    };
    let mut k = 1;
    while k < items.len() {
        let key = items[k];
        let kw = key.as_symbol().ok_or_else(|| syntax(key.pos(), "action keyword expected"))?;
        let value = items.get(k + 1).ok_or_else(|| syntax(key.pos(), format!("value expected after {kw}")))?;
        match kw {
            ":parameters" => schema.params = params(&value.elements())?,
            ":precondition" => schema.pre = literals(value)?.into_iter().collect(),
            ":effect" => {
                for l in literals(value)? {
                    if l.negated {
                        schema.del.insert(l.atom);
                    } else {
                        schema.add.insert(l.atom);
                    }
                }
            }
            other => return Err(unsupported(other, key.pos())),
        }
        k += 2;
    }
    Ok(schema)
}

pub fn parse_domain(text: &str) -> Result<DomainSpec, GroundingError> {
    let top = sexpr::parse_one(text)?;
    let (name, sections) = define(&top, "domain")?;
    let mut types = BTreeMap::new();
    let mut predicates = Vec::new();
    let mut actions = Vec::new();
    for s in sections {
        let (head, body) = section_head(s)?;
        match head {
            ":requirements" => check_requirements(&body)?,
            ":types" => {
                for (child, parent, _) in typed_list(&body)? {
                    types.insert(child, parent);
                }
            }
            ":predicates" => {
                for p in body {
                    let items = p.elements();
                    let pname = items
                        .first()
                        .and_then(|h| h.as_symbol())
                        .ok_or_else(|| syntax(p.pos(), "predicate name expected"))?;
                    predicates.push(PredicateSignature {
                        name: pname.to_string(),
                        params: params(&items[1..])?,
                    });
                }
            }
            ":action" => actions.push(action(&body, s.pos())?),
            other => return Err(unsupported(other, s.pos())),
        }
    }
    let types = TypeHierarchy::new(types)?;
    let elements = DomainElements::from_parts(types, predicates, actions)?;
    Ok(DomainSpec::new(name, elements))
}

fn goal_spec(e: &Sexpr) -> Result<GoalSpec, GroundingError> {
    let items = match e {
        Sexpr::List(items, _) => items,
        _ => return Err(syntax(e.pos(), "goal must be a list")),
    };
    let annotated = items.iter().any(|x| matches!(x, Sexpr::Comment(..)));
    if !annotated {
        return Ok(GoalSpec {
            robot_goal: literals(e)?.into_iter().collect(),
            ..Default::default()
        });
    }
    if e.elements().first().and_then(|h| h.as_symbol()) != Some("and") {
        return Err(syntax(e.pos(), "partitioned goal must be an (and ...)"));
    }
    let mut goal = GoalSpec::default();
    let mut robot_seen = false;
    let mut header: Option<(String, String, Pos)> = None;
    for item in &items[1..] {
        match item {
            Sexpr::Comment(text, pos) => {
                let text = text.to_ascii_lowercase();
                let mut words = text.split_whitespace();
                match (words.next(), words.next(), words.next()) {
                    (Some(role @ ("robot" | "human")), agent, None) => {
                        header = Some((role.to_string(), agent.unwrap_or("").to_string(), *pos));
                    }
                    _ => return Err(syntax(*pos, format!("unrecognized goal annotation `{text}`"))),
                }
            }
            Sexpr::List(..) => {
                let (role, agent, pos) = header
                    .take()
                    .ok_or_else(|| syntax(item.pos(), "goal partition without a `; robot` or `; human` annotation"))?;
                let lits: BTreeSet<Literal> = literals(item)?.into_iter().collect();
                if role == "robot" {
                    if robot_seen {
                        return Err(syntax(pos, "more than one robot goal partition"));
                    }
                    robot_seen = true;
                    goal.robot = agent;
                    goal.robot_goal = lits;
                } else {
                    if agent.is_empty() || goal.humans.contains_key(&agent) {
                        return Err(syntax(pos, "human partitions need distinct agent ids"));
                    }
                    goal.humans.insert(agent, lits);
                }
            }
            Sexpr::Symbol(_, pos) => return Err(syntax(*pos, "unexpected symbol in goal")),
        }
    }
    if !robot_seen {
        return Err(syntax(e.pos(), "goal has no robot partition"));
    }
    Ok(goal)
}

/// Parses a problem; type-checking needs the domain, see
/// [`ProblemSpec::validate`].
pub fn parse_problem(text: &str) -> Result<ProblemSpec, GroundingError> {
    let top = sexpr::parse_one(text)?;
    let (name, sections) = define(&top, "problem")?;
    let mut p = ProblemSpec {
        name,
        ..Default::default()
    };
    let mut goal = None;
    for s in sections {
        let (head, body) = section_head(s)?;
        match head {
            ":domain" => {
                p.domain_name = body
                    .first()
                    .and_then(|d| d.as_symbol())
                    .ok_or_else(|| syntax(s.pos(), "domain name expected"))?
                    .to_string();
            }
            ":requirements" => check_requirements(&body)?,
            ":objects" => {
                for (o, ty, pos) in typed_list(&body)? {
                    if p.objects.insert(o.clone(), ty).is_some() {
                        return Err(syntax(pos, format!("object `{o}` declared twice")));
                    }
                }
            }
            ":init" => {
                for a in body {
                    reject_connective(a)?;
                    if a.elements().first().and_then(|h| h.as_symbol()) == Some("not") {
                        return Err(syntax(a.pos(), "negative literals are not allowed in :init (closed world)"));
                    }
                    let atom: Atom = atom_from_sexpr(a)?;
                    if !atom.is_ground() {
                        return Err(syntax(a.pos(), "init atoms must be ground"));
                    }
                    p.init.insert(atom);
                }
            }
            ":goal" => {
                let g = body.first().ok_or_else(|| syntax(s.pos(), "goal expected"))?;
                goal = Some(goal_spec(g)?);
            }
            other => return Err(unsupported(other, s.pos())),
        }
    }
    p.goal = goal.ok_or_else(|| syntax(top.pos(), "problem has no :goal"))?;
    if p.domain_name.is_empty() {
        return Err(syntax(top.pos(), "problem has no :domain"));
    }
    Ok(p)
}
