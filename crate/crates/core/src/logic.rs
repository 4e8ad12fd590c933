//! Typed STRIPS vocabulary: atoms, literals, the object-type hierarchy,
//! predicate signatures and action schemas.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sexpr::{self, Sexpr, SexprError};

/// Implicit root of every type hierarchy.
pub const OBJECT: &str = "object";
pub const AGENT: &str = "agent";
pub const ROOM: &str = "room";
pub const ITEM: &str = "item";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new<S: Into<String>>(predicate: impl Into<String>, args: impl IntoIterator<Item = S>) -> Self {
        Atom {
            predicate: predicate.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    pub fn is_ground(&self) -> bool {
        !self.args.iter().any(|a| a.starts_with('?'))
    }

    pub fn substitute(&self, binding: &BTreeMap<String, String>) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            args: self
                .args
                .iter()
                .map(|a| binding.get(a).cloned().unwrap_or_else(|| a.clone()))
                .collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub negated: bool,
    pub atom: Atom,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal { negated: false, atom }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal { negated: true, atom }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "(not {})", self.atom)
        } else {
            write!(f, "{}", self.atom)
        }
    }
}

pub(crate) fn atom_from_sexpr(e: &Sexpr) -> Result<Atom, SexprError> {
    let items = e.elements();
    let (head, rest) = items
        .split_first()
        .ok_or_else(|| sexpr::parse_error(e.pos(), "empty atom"))?;
    let predicate = head
        .as_symbol()
        .ok_or_else(|| sexpr::parse_error(head.pos(), "predicate name expected"))?;
    let mut args = Vec::with_capacity(rest.len());
    for a in rest {
        args.push(
            a.as_symbol()
                .ok_or_else(|| sexpr::parse_error(a.pos(), "atom arguments must be symbols"))?
                .to_string(),
        );
    }
    Ok(Atom::new(predicate, args))
}

pub(crate) fn literal_from_sexpr(e: &Sexpr) -> Result<Literal, SexprError> {
    let items = e.elements();
    if items.is_empty() {
        return Err(sexpr::parse_error(e.pos(), "empty literal"));
    }
    if items[0].as_symbol() == Some("not") {
        if items.len() != 2 || items[1].as_list().is_none() {
            return Err(sexpr::parse_error(e.pos(), "malformed negation"));
        }
        let atom = atom_from_sexpr(items[1])?;
        if atom.predicate == "not" {
            return Err(sexpr::parse_error(e.pos(), "nested negation"));
        }
        return Ok(Literal::neg(atom));
    }
    Ok(Literal::pos(atom_from_sexpr(e)?))
}

impl FromStr for Atom {
    type Err = SexprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lit: Literal = s.parse()?;
        if lit.negated {
            return Err(sexpr::parse_error(sexpr::Pos { line: 1, column: 1 }, "expected a positive atom"));
        }
        Ok(lit.atom)
    }
}

impl FromStr for Literal {
    type Err = SexprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let e = sexpr::parse_one(s)?;
        if e.as_list().is_none() {
            return Err(sexpr::parse_error(e.pos(), "literal must be parenthesized"));
        }
        literal_from_sexpr(&e)
    }
}

macro_rules! string_serde {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }
        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}
string_serde!(Atom);
string_serde!(Literal);
string_serde!(Param);

/// A typed parameter, written `?name - type`. Names keep their `?` prefix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Param {
    pub name: String,
    pub ty: String,
}

impl Param {
    pub fn new(name: impl Into<String>, ty: impl Into<String>) -> Self {
        Param {
            name: name.into(),
            ty: ty.into(),
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} - {}", self.name, self.ty)
    }
}

impl FromStr for Param {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        match parts.as_slice() {
            [name, "-", ty] if name.starts_with('?') && name.len() > 1 => {
                Ok(Param::new(name.to_ascii_lowercase(), ty.to_ascii_lowercase()))
            }
            [name] if name.starts_with('?') && name.len() > 1 => Ok(Param::new(name.to_ascii_lowercase(), OBJECT)),
            _ => Err(format!("malformed parameter {s:?}, expected \"?name - type\"")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("type cycle through `{0}`")]
    TypeCycle(String),
    #[error("unknown type `{ty}` used by {context}")]
    UnknownType { context: String, ty: String },
    #[error("type hierarchy lacks required type `{0}`")]
    MissingBaseType(String),
    #[error("`{0}` is an agent instance, not a type")]
    ReservedType(String),
    #[error("{context} uses undeclared predicate `{predicate}`")]
    UndeclaredPredicate { context: String, predicate: String },
    #[error("{context}: `{predicate}` expects {expected} arguments, found {found}")]
    Arity {
        context: String,
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("{context}: argument `{arg}` has type `{found}`, expected `{expected}`")]
    TypeMismatch {
        context: String,
        arg: String,
        expected: String,
        found: String,
    },
    #[error("action `{action}` uses unbound variable `{var}`")]
    UnboundVariable { action: String, var: String },
    #[error("action `{action}` must have exactly one agent parameter, found {count}")]
    AgentParams { action: String, count: usize },
    #[error("action `{action}` both adds and deletes {atom}")]
    AddDeleteOverlap { action: String, atom: String },
    #[error("duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("duplicate parameter `{var}` in `{context}`")]
    DuplicateParam { context: String, var: String },
}

/// Type name to supertype. `object` is the implicit root and is never a key.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeHierarchy {
    parents: BTreeMap<String, String>,
}

impl TypeHierarchy {
    pub fn new(parents: BTreeMap<String, String>) -> Result<Self, DomainError> {
        for (child, parent) in &parents {
            if child == OBJECT {
                return Err(DomainError::TypeCycle(OBJECT.into()));
            }
            if parent != OBJECT && !parents.contains_key(parent) {
                return Err(DomainError::UnknownType {
                    context: format!("type `{child}`"),
                    ty: parent.clone(),
                });
            }
        }
        for start in parents.keys() {
            let mut seen = BTreeSet::new();
            let mut cur = start.as_str();
            while cur != OBJECT {
                if !seen.insert(cur) {
                    return Err(DomainError::TypeCycle(start.clone()));
                }
                cur = &parents[cur];
            }
        }
        Ok(TypeHierarchy { parents })
    }

    /// The default `agent`, `room`, `item` hierarchy.
    pub fn base() -> Self {
        let parents = [AGENT, ROOM, ITEM]
            .into_iter()
            .map(|t| (t.to_string(), OBJECT.to_string()))
            .collect();
        TypeHierarchy { parents }
    }

    pub fn contains(&self, ty: &str) -> bool {
        ty == OBJECT || self.parents.contains_key(ty)
    }

    pub fn parent(&self, ty: &str) -> Option<&str> {
        self.parents.get(ty).map(String::as_str)
    }

    pub fn is_subtype(&self, ty: &str, of: &str) -> bool {
        let mut cur = ty;
        loop {
            if cur == of {
                return true;
            }
            match self.parents.get(cur) {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }

    /// Declared types, excluding the implicit root.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.parents.keys().map(String::as_str)
    }

    pub fn parents(&self) -> &BTreeMap<String, String> {
        &self.parents
    }

    pub fn insert(&mut self, ty: &str, parent: &str) -> Result<(), DomainError> {
        let mut next = self.parents.clone();
        next.insert(ty.to_string(), parent.to_string());
        *self = TypeHierarchy::new(next)?;
        Ok(())
    }

    pub(crate) fn require_base(&self) -> Result<(), DomainError> {
        for t in [AGENT, ROOM, ITEM] {
            if !self.parents.contains_key(t) {
                return Err(DomainError::MissingBaseType(t.into()));
            }
        }
        for t in ["robot", "human"] {
            if self.parents.contains_key(t) {
                return Err(DomainError::ReservedType(t.into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredicateSignature {
    pub name: String,
    #[serde(default)]
    pub params: Vec<Param>,
}

impl fmt::Display for PredicateSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for p in &self.params {
            write!(f, " {p}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<Param>,
    #[serde(default)]
    pub pre: BTreeSet<Literal>,
    #[serde(default)]
    pub add: BTreeSet<Atom>,
    #[serde(default)]
    pub del: BTreeSet<Atom>,
}

/// A schema with every parameter replaced by an object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstantiatedAction {
    pub schema: String,
    pub args: Vec<String>,
    pub pre: Vec<Literal>,
    pub add: Vec<Atom>,
    pub del: Vec<Atom>,
}

impl ActionSchema {
    pub fn agent_param_index(&self, types: &TypeHierarchy) -> Option<usize> {
        self.params.iter().position(|p| types.is_subtype(&p.ty, AGENT))
    }

    pub fn binding(&self, args: &[String]) -> Option<BTreeMap<String, String>> {
        if args.len() != self.params.len() {
            return None;
        }
        Some(
            self.params
                .iter()
                .zip(args)
                .map(|(p, a)| (p.name.clone(), a.clone()))
                .collect(),
        )
    }

    /// Grounds the schema. Atoms both added and deleted stay true, so they
    /// are dropped from the delete list.
    pub fn instantiate(&self, args: &[String]) -> Option<InstantiatedAction> {
        let b = self.binding(args)?;
        let add: BTreeSet<Atom> = self.add.iter().map(|a| a.substitute(&b)).collect();
        let del: BTreeSet<Atom> = self
            .del
            .iter()
            .map(|a| a.substitute(&b))
            .filter(|a| !add.contains(a))
            .collect();
        let pre: BTreeSet<Literal> = self
            .pre
            .iter()
            .map(|l| Literal {
                negated: l.negated,
                atom: l.atom.substitute(&b),
            })
            .collect();
        Some(InstantiatedAction {
            schema: self.name.clone(),
            args: args.to_vec(),
            pre: pre.into_iter().collect(),
            add: add.into_iter().collect(),
            del: del.into_iter().collect(),
        })
    }
}

/// Object types, predicates and action schemas of one planning domain.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DomainElements {
    pub types: TypeHierarchy,
    pub predicates: BTreeMap<String, PredicateSignature>,
    pub actions: BTreeMap<String, ActionSchema>,
}

impl DomainElements {
    pub fn from_parts(
        types: TypeHierarchy,
        predicates: Vec<PredicateSignature>,
        actions: Vec<ActionSchema>,
    ) -> Result<Self, DomainError> {
        let mut d = DomainElements {
            types,
            ..Default::default()
        };
        for p in predicates {
            if d.predicates.contains_key(&p.name) {
                return Err(DomainError::Duplicate {
                    kind: "predicate",
                    name: p.name,
                });
            }
            d.predicates.insert(p.name.clone(), p);
        }
        for a in actions {
            if d.actions.contains_key(&a.name) {
                return Err(DomainError::Duplicate {
                    kind: "action",
                    name: a.name,
                });
            }
            d.actions.insert(a.name.clone(), a);
        }
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        self.types.require_base()?;
        for p in self.predicates.values() {
            let ctx = format!("predicate `{}`", p.name);
            check_params(&self.types, &ctx, &p.params)?;
        }
        for a in self.actions.values() {
            self.validate_action(a)?;
        }
        Ok(())
    }

    fn validate_action(&self, a: &ActionSchema) -> Result<(), DomainError> {
        let ctx = format!("action `{}`", a.name);
        check_params(&self.types, &ctx, &a.params)?;
        let agents = a
            .params
            .iter()
            .filter(|p| self.types.is_subtype(&p.ty, AGENT))
            .count();
        if agents != 1 {
            return Err(DomainError::AgentParams {
                action: a.name.clone(),
                count: agents,
            });
        }
        let vars: BTreeMap<&str, &str> = a
            .params
            .iter()
            .map(|p| (p.name.as_str(), p.ty.as_str()))
            .collect();
        let all = a
            .pre
            .iter()
            .map(|l| &l.atom)
            .chain(a.add.iter())
            .chain(a.del.iter());
        for atom in all {
            let sig = self.predicates.get(&atom.predicate).ok_or_else(|| {
                DomainError::UndeclaredPredicate {
                    context: ctx.clone(),
                    predicate: atom.predicate.clone(),
                }
            })?;
            if sig.params.len() != atom.args.len() {
                return Err(DomainError::Arity {
                    context: ctx.clone(),
                    predicate: atom.predicate.clone(),
                    expected: sig.params.len(),
                    found: atom.args.len(),
                });
            }
            for (arg, sp) in atom.args.iter().zip(&sig.params) {
                let ty = vars.get(arg.as_str()).ok_or_else(|| DomainError::UnboundVariable {
                    action: a.name.clone(),
                    var: arg.clone(),
                })?;
                if !self.types.is_subtype(ty, &sp.ty) {
                    return Err(DomainError::TypeMismatch {
                        context: format!("{ctx} in {atom}"),
                        arg: arg.clone(),
                        expected: sp.ty.clone(),
                        found: ty.to_string(),
                    });
                }
            }
        }
        if let Some(atom) = a.add.intersection(&a.del).next() {
            return Err(DomainError::AddDeleteOverlap {
                action: a.name.clone(),
                atom: atom.to_string(),
            });
        }
        Ok(())
    }

    /// Checks a ground atom against its signature given object types.
    pub fn check_ground_atom(
        &self,
        context: &str,
        atom: &Atom,
        objects: &BTreeMap<String, String>,
    ) -> Result<(), DomainError> {
        let sig = self
            .predicates
            .get(&atom.predicate)
            .ok_or_else(|| DomainError::UndeclaredPredicate {
                context: context.to_string(),
                predicate: atom.predicate.clone(),
            })?;
        if sig.params.len() != atom.args.len() {
            return Err(DomainError::Arity {
                context: context.to_string(),
                predicate: atom.predicate.clone(),
                expected: sig.params.len(),
                found: atom.args.len(),
            });
        }
        for (arg, sp) in atom.args.iter().zip(&sig.params) {
            let ty = objects.get(arg).ok_or_else(|| DomainError::UnknownType {
                context: format!("{context} in {atom} (no such object)"),
                ty: arg.clone(),
            })?;
            if !self.types.is_subtype(ty, &sp.ty) {
                return Err(DomainError::TypeMismatch {
                    context: format!("{context} in {atom}"),
                    arg: arg.clone(),
                    expected: sp.ty.clone(),
                    found: ty.clone(),
                });
            }
        }
        Ok(())
    }

    /// Adds new predicates and actions; re-declaring an identical element is
    /// a no-op, a conflicting one is an error. Validates the result.
    pub fn extend(
        &mut self,
        predicates: &[PredicateSignature],
        actions: &[ActionSchema],
    ) -> Result<(), DomainError> {
        let mut next = self.clone();
        for p in predicates {
            match next.predicates.get(&p.name) {
                Some(existing) if existing == p => {}
                Some(_) => {
                    return Err(DomainError::Duplicate {
                        kind: "predicate",
                        name: p.name.clone(),
                    })
                }
                None => {
                    next.predicates.insert(p.name.clone(), p.clone());
                }
            }
        }
        for a in actions {
            match next.actions.get(&a.name) {
                Some(existing) if existing == a => {}
                Some(_) => {
                    return Err(DomainError::Duplicate {
                        kind: "action",
                        name: a.name.clone(),
                    })
                }
                None => {
                    next.actions.insert(a.name.clone(), a.clone());
                }
            }
        }
        next.validate()?;
        *self = next;
        Ok(())
    }
}

fn check_params(types: &TypeHierarchy, ctx: &str, params: &[Param]) -> Result<(), DomainError> {
    let mut seen = BTreeSet::new();
    for p in params {
        if !types.contains(&p.ty) {
            return Err(DomainError::UnknownType {
                context: ctx.to_string(),
                ty: p.ty.clone(),
            });
        }
        if !seen.insert(&p.name) {
            return Err(DomainError::DuplicateParam {
                context: ctx.to_string(),
                var: p.name.clone(),
            });
        }
    }
    Ok(())
}
