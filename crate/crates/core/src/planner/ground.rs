use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use super::PlanError;
use crate::grounding::{DomainSpec, ProblemSpec};
use crate::logic::{ActionSchema, Atom, Literal, TypeHierarchy};

pub const DEFAULT_ACTION_CAP: usize = 1_000_000;

/// Packed set of atom indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State(Vec<u64>);

impl State {
    pub fn empty(atoms: usize) -> Self {
        State(vec![0; atoms.div_ceil(64)])
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        self.0[i / 64] &= !(1 << (i % 64));
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &bits)| {
            (0..64).filter(move |b| bits & (1 << b) != 0).map(move |b| w * 64 + b)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundAction {
    pub agent: String,
    pub schema: String,
    pub args: Vec<String>,
    pub pre_pos: Vec<usize>,
    pub pre_neg: Vec<usize>,
    pub add: Vec<usize>,
    pub del: Vec<usize>,
}

impl GroundAction {
    pub fn applicable(&self, s: &State) -> bool {
        self.pre_pos.iter().all(|&i| s.contains(i)) && self.pre_neg.iter().all(|&i| !s.contains(i))
    }

    pub fn apply(&self, s: &State) -> State {
        let mut next = s.clone();
        for &i in &self.del {
            next.remove(i);
        }
        for &i in &self.add {
            next.insert(i);
        }
        next
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.schema)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

/// A propositional task over the atoms reachable from init under the
/// delete relaxation.
#[derive(Debug, Clone)]
pub struct GroundedTask {
    pub atoms: Vec<Atom>,
    pub index: HashMap<Atom, usize>,
    pub init: State,
    pub goal_pos: Vec<usize>,
    pub goal_neg: Vec<usize>,
    /// Positive goal literals no action sequence can reach.
    pub unreachable_goals: Vec<Literal>,
    pub actions: Vec<GroundAction>,
}

impl GroundedTask {
    pub fn is_goal(&self, s: &State) -> bool {
        self.goal_pos.iter().all(|&i| s.contains(i)) && self.goal_neg.iter().all(|&i| !s.contains(i))
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn state_atoms(&self, s: &State) -> BTreeSet<Atom> {
        s.iter().map(|i| self.atoms[i].clone()).collect()
    }

    pub fn find_action(&self, schema: &str, args: &[String]) -> Option<usize> {
        self.actions.iter().position(|a| a.schema == schema && a.args == args)
    }
}

struct Grounder<'a> {
    types: &'a TypeHierarchy,
    objects: &'a BTreeMap<String, String>,
}

impl Grounder<'_> {
    fn fits(&self, obj: &str, ty: &str) -> bool {
        self.objects.get(obj).is_some_and(|t| self.types.is_subtype(t, ty))
    }

    /// Every parameter tuple whose positive preconditions hold in `reached`.
    fn bindings(&self, schema: &ActionSchema, reached: &HashMap<&str, Vec<&Atom>>) -> Vec<Vec<String>> {
        let pos: Vec<&Atom> = schema.pre.iter().filter(|l| !l.negated).map(|l| &l.atom).collect();
        let ptype: HashMap<&str, &str> = schema.params.iter().map(|p| (p.name.as_str(), p.ty.as_str())).collect();
        let mut out = Vec::new();
        let mut binding: HashMap<String, String> = HashMap::new();
        self.join(schema, &pos, 0, reached, &ptype, &mut binding, &mut out);
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn join(
        &self,
        schema: &ActionSchema,
        pos: &[&Atom],
        k: usize,
        reached: &HashMap<&str, Vec<&Atom>>,
        ptype: &HashMap<&str, &str>,
        binding: &mut HashMap<String, String>,
        out: &mut Vec<Vec<String>>,
    ) {
        if k == pos.len() {
            self.free_params(schema, 0, binding, out);
            return;
        }
        let pattern = pos[k];
        let Some(candidates) = reached.get(pattern.predicate.as_str()) else { return };
        for fact in candidates {
            if fact.args.len() != pattern.args.len() {
                continue;
            }
            let mut added = Vec::new();
            let mut ok = true;
            for (p, v) in pattern.args.iter().zip(&fact.args) {
                if !p.starts_with('?') {
                    if p != v {
                        ok = false;
                        break;
                    }
                    continue;
                }
                match binding.get(p) {
                    Some(b) if b != v => {
                        ok = false;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        if !self.fits(v, ptype.get(p.as_str()).copied().unwrap_or("object")) {
                            ok = false;
                            break;
                        }
                        binding.insert(p.clone(), v.clone());
                        added.push(p.clone());
                    }
                }
            }
            if ok {
                self.join(schema, pos, k + 1, reached, ptype, binding, out);
            }
            for p in added {
                binding.remove(&p);
            }
        }
    }

    fn free_params(&self, schema: &ActionSchema, k: usize, binding: &mut HashMap<String, String>, out: &mut Vec<Vec<String>>) {
        if k == schema.params.len() {
            out.push(schema.params.iter().map(|p| binding[&p.name].clone()).collect());
            return;
        }
        let p = &schema.params[k];
        if binding.contains_key(&p.name) {
            self.free_params(schema, k + 1, binding, out);
            return;
        }
        let objs: Vec<String> = self
            .objects
            .iter()
            .filter(|(_, t)| self.types.is_subtype(t, &p.ty))
            .map(|(o, _)| o.clone())
            .collect();
        for o in objs {
            binding.insert(p.name.clone(), o);
            self.free_params(schema, k + 1, binding, out);
        }
        binding.remove(&p.name);
    }
}

/// Instantiates every schema over type-compatible objects, keeping only
/// actions whose positive preconditions are relaxed-reachable from init.
pub fn ground_task(d: &DomainSpec, p: &ProblemSpec, action_cap: usize) -> Result<GroundedTask, PlanError> {
    p.validate(d).map_err(PlanError::Spec)?;
    let g = Grounder {
        types: &d.elements.types,
        objects: &p.objects,
    };
    let mut reached: BTreeSet<Atom> = p.init.clone();
    let mut ground: BTreeMap<(String, Vec<String>), crate::logic::InstantiatedAction> = BTreeMap::new();
    loop {
        let by_pred: HashMap<&str, Vec<&Atom>> = reached.iter().fold(HashMap::new(), |mut m, a| {
            m.entry(a.predicate.as_str()).or_insert_with(Vec::new).push(a);
            m
        });
        let mut new_atoms = Vec::new();
        for schema in d.elements.actions.values() {
            for args in g.bindings(schema, &by_pred) {
                let key = (schema.name.clone(), args);
                if ground.contains_key(&key) {
                    continue;
                }
                let inst = schema.instantiate(&key.1).expect("arity matches");
                new_atoms.extend(inst.add.iter().filter(|a| !reached.contains(a)).cloned());
                ground.insert(key, inst);
                if ground.len() > action_cap {
                    return Err(PlanError::ExplosionGuard { cap: action_cap });
                }
            }
        }
        if new_atoms.is_empty() {
            break;
        }
        reached.extend(new_atoms);
    }

    let atoms: Vec<Atom> = reached.into_iter().collect();
    let index: HashMap<Atom, usize> = atoms.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
    let mut init = State::empty(atoms.len());
    for a in &p.init {
        init.insert(index[a]);
    }
    let types = &d.elements.types;
    let actions: Vec<GroundAction> = ground
        .into_values()
        .map(|inst| {
            let schema = &d.elements.actions[&inst.schema];
            let agent_idx = schema.agent_param_index(types).expect("validated domain");
            let mut pre_pos = Vec::new();
            let mut pre_neg = Vec::new();
            for l in &inst.pre {
                match (l.negated, index.get(&l.atom)) {
                    (false, Some(&i)) => pre_pos.push(i),
                    (true, Some(&i)) => pre_neg.push(i),
                    (false, None) => unreachable!("positive preconditions are reached"),
                    (true, None) => {}
                }
            }
            GroundAction {
                agent: inst.args[agent_idx].clone(),
                schema: inst.schema.clone(),
                args: inst.args.clone(),
                pre_pos,
                pre_neg,
                add: inst.add.iter().map(|a| index[a]).collect(),
                del: inst.del.iter().filter_map(|a| index.get(a).copied()).collect(),
            }
        })
        .collect();

    let mut goal_pos = Vec::new();
    let mut goal_neg = Vec::new();
    let mut unreachable_goals = Vec::new();
    let mut seen = HashSet::new();
    for lit in p.goal.all_literals() {
        if !seen.insert(lit.clone()) {
            continue;
        }
        match (lit.negated, index.get(&lit.atom)) {
            (false, Some(&i)) => goal_pos.push(i),
            (true, Some(&i)) => goal_neg.push(i),
            (false, None) => unreachable_goals.push(lit),
            (true, None) => {}
        }
    }
    Ok(GroundedTask {
        atoms,
        index,
        init,
        goal_pos,
        goal_neg,
        unreachable_goals,
        actions,
    })
}
