//! Seeded generators of valid specifications and small planning instances,
//! for property tests and benchmarking.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::grounding::{DomainSpec, GoalSpec, ProblemSpec};
use crate::logic::{ActionSchema, Atom, DomainElements, Literal, Param, PredicateSignature, TypeHierarchy, AGENT, ITEM, OBJECT, ROOM};

fn pick<'a, R: Rng>(rng: &mut R, xs: &'a [String]) -> &'a String {
    xs.choose(rng).expect("non-empty")
}

/// A domain with a few extra types under `item`/`room`, random predicates
/// and actions with positive and negative preconditions.
pub fn random_domain<R: Rng>(rng: &mut R) -> DomainSpec {
    let mut parents: BTreeMap<String, String> = [AGENT, ROOM, ITEM]
        .iter()
        .map(|t| (t.to_string(), OBJECT.to_string()))
        .collect();
    for k in 0..rng.gen_range(0..4) {
        let under: Vec<String> = parents.keys().filter(|t| t.as_str() != AGENT).cloned().collect();
        let parent = pick(rng, &under).clone();
        parents.insert(format!("t{k}"), parent);
    }
    let types = TypeHierarchy::new(parents.clone()).expect("acyclic by construction");
    let non_agent: Vec<String> = parents.keys().filter(|t| t.as_str() != AGENT).cloned().collect();

    let mut predicates = Vec::new();
    for k in 0..rng.gen_range(1..6) {
        let arity = rng.gen_range(0..3);
        let params = (0..arity)
            .map(|j| {
                let ty = if rng.gen_bool(0.3) { AGENT.to_string() } else { pick(rng, &non_agent).clone() };
                Param::new(format!("?x{j}"), ty)
            })
            .collect();
        predicates.push(PredicateSignature {
            name: format!("p{k}"),
            params,
        });
    }

    let mut actions = Vec::new();
    for k in 0..rng.gen_range(0..4) {
        let mut params = vec![Param::new("?a", AGENT)];
        let lit_for = |rng: &mut R, params: &mut Vec<Param>| -> Atom {
            let sig = predicates.choose(rng).expect("non-empty");
            let args = sig
                .params
                .iter()
                .map(|sp| {
                    if sp.ty == AGENT {
                        return "?a".to_string();
                    }
                    let fitting: Vec<String> = params
                        .iter()
                        .filter(|p| p.ty != AGENT && types.is_subtype(&p.ty, &sp.ty))
                        .map(|p| p.name.clone())
                        .collect();
                    if !fitting.is_empty() && rng.gen_bool(0.6) {
                        pick(rng, &fitting).clone()
                    } else {
                        let name = format!("?v{}", params.len());
                        params.push(Param::new(&name, &sp.ty));
                        name
                    }
                })
                .collect::<Vec<_>>();
            Atom::new(sig.name.clone(), args)
        };
        let mut pre = BTreeSet::new();
        for _ in 0..rng.gen_range(0..3) {
            let atom = lit_for(rng, &mut params);
            pre.insert(Literal {
                negated: rng.gen_bool(0.3),
                atom,
            });
        }
        let mut add = BTreeSet::new();
        let mut del = BTreeSet::new();
        for _ in 0..rng.gen_range(1..3) {
            let atom = lit_for(rng, &mut params);
            if rng.gen_bool(0.3) {
                if !add.contains(&atom) {
                    del.insert(atom);
                }
            } else {
                del.remove(&atom);
                add.insert(atom);
            }
        }
        actions.push(ActionSchema {
            name: format!("act{k}"),
            params,
            pre,
            add,
            del,
        });
    }
    let elements = DomainElements::from_parts(types, predicates, actions).expect("generated domain validates");
    DomainSpec::new(format!("dom{}", rng.gen_range(0..100)), elements)
}

/// A type-correct problem over `d` with one robot partition and up to two
/// human partitions.
pub fn random_problem<R: Rng>(rng: &mut R, d: &DomainSpec) -> ProblemSpec {
    let e = &d.elements;
    let types: Vec<String> = e.types.names().map(str::to_string).collect();
    let mut objects = BTreeMap::new();
    let agents: Vec<String> = (0..rng.gen_range(1..4)).map(|k| format!("ag{k}")).collect();
    for a in &agents {
        objects.insert(a.clone(), AGENT.to_string());
    }
    for k in 0..rng.gen_range(0..6) {
        objects.insert(format!("o{k}"), pick(rng, &types).clone());
    }
    let ground = |rng: &mut R, objects: &BTreeMap<String, String>| -> Option<Atom> {
        let sig: Vec<&PredicateSignature> = e.predicates.values().collect();
        let sig = sig.choose(rng)?;
        let mut args = Vec::new();
        for sp in &sig.params {
            let fits: Vec<String> = objects
                .iter()
                .filter(|(_, t)| e.types.is_subtype(t, &sp.ty))
                .map(|(o, _)| o.clone())
                .collect();
            args.push(fits.choose(rng)?.clone());
        }
        Some(Atom::new(sig.name.clone(), args))
    };
    let mut init = BTreeSet::new();
    for _ in 0..rng.gen_range(0..8) {
        if let Some(a) = ground(rng, &objects) {
            init.insert(a);
        }
    }
    let literals = |rng: &mut R| -> BTreeSet<Literal> {
        let mut out = BTreeSet::new();
        for _ in 0..rng.gen_range(0..3) {
            if let Some(atom) = ground(rng, &objects) {
                out.insert(Literal {
                    negated: rng.gen_bool(0.2),
                    atom,
                });
            }
        }
        out
    };
    let mut goal = GoalSpec {
        robot: agents[0].clone(),
        robot_goal: literals(rng),
        humans: BTreeMap::new(),
    };
    for h in agents.iter().skip(1) {
        goal.humans.insert(h.clone(), literals(rng));
    }
    let p = ProblemSpec {
        name: format!("prob{}", rng.gen_range(0..100)),
        domain_name: d.name.clone(),
        objects,
        init,
        goal,
    };
    debug_assert!(p.validate(d).is_ok());
    p
}

const FETCH_DOMAIN: &str = "(define (domain fetch)
  (:requirements :strips :typing :negative-preconditions)
  (:types agent room item - object)
  (:predicates (at-agent ?a - agent ?r - room) (at ?i - item ?r - room)
               (holding ?a - agent ?i - item) (free ?a - agent)
               (connected ?x ?y - room) (human-active-in ?r - room))
  (:action goto :parameters (?a - agent ?from ?to - room)
    :precondition (and (at-agent ?a ?from) (connected ?from ?to) (not (human-active-in ?to)))
    :effect (and (at-agent ?a ?to) (not (at-agent ?a ?from))))
  (:action pick :parameters (?a - agent ?i - item ?r - room)
    :precondition (and (at-agent ?a ?r) (at ?i ?r) (free ?a))
    :effect (and (holding ?a ?i) (not (at ?i ?r)) (not (free ?a))))
  (:action drop :parameters (?a - agent ?i - item ?r - room)
    :precondition (and (at-agent ?a ?r) (holding ?a ?i))
    :effect (and (at ?i ?r) (free ?a) (not (holding ?a ?i)))))";

/// Random fetch-and-carry instance: 2 to 5 rooms on a random connected
/// graph, 1 or 2 agents carrying one item at a time, 1 or 2 items, and
/// possibly a room blocked by human activity.
pub fn random_fetch_instance<R: Rng>(rng: &mut R) -> (DomainSpec, ProblemSpec) {
    let d = crate::grounding::pddl::parse_domain(FETCH_DOMAIN).expect("built-in domain parses");
    let n_rooms = rng.gen_range(2..=5);
    let rooms: Vec<String> = (0..n_rooms).map(|k| format!("room{k}")).collect();
    let mut objects: BTreeMap<String, String> = rooms.iter().map(|r| (r.clone(), ROOM.to_string())).collect();
    let mut init = BTreeSet::new();
    let connect = |init: &mut BTreeSet<Atom>, a: &str, b: &str| {
        init.insert(Atom::new("connected", [a, b]));
        init.insert(Atom::new("connected", [b, a]));
    };
    for k in 1..n_rooms {
        let j = rng.gen_range(0..k);
        connect(&mut init, &rooms[k], &rooms[j]);
    }
    for _ in 0..rng.gen_range(0..2) {
        let (a, b) = (pick(rng, &rooms).clone(), pick(rng, &rooms).clone());
        if a != b {
            connect(&mut init, &a, &b);
        }
    }
    let agents: Vec<String> = (0..rng.gen_range(1..=2)).map(|k| format!("r{k}")).collect();
    for a in &agents {
        objects.insert(a.clone(), AGENT.to_string());
        init.insert(Atom::new("at-agent", [a, pick(rng, &rooms)]));
        init.insert(Atom::new("free", [a]));
    }
    let items: Vec<String> = (0..rng.gen_range(1..=2)).map(|k| format!("x{k}")).collect();
    let mut robot_goal = BTreeSet::new();
    for i in &items {
        objects.insert(i.clone(), ITEM.to_string());
        init.insert(Atom::new("at", [i, pick(rng, &rooms)]));
        if rng.gen_bool(0.8) {
            robot_goal.insert(Literal::pos(Atom::new("at", [i, pick(rng, &rooms)])));
        }
    }
    if rng.gen_bool(0.3) {
        init.insert(Atom::new("human-active-in", [pick(rng, &rooms)]));
    }
    let p = ProblemSpec {
        name: "fetch".into(),
        domain_name: d.name.clone(),
        objects,
        init,
        goal: GoalSpec {
            robot: agents[0].clone(),
            robot_goal,
            humans: BTreeMap::new(),
        },
    };
    (d, p)
}
