use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::WorldError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub object: String,
    pub room: String,
}

/// A map file: rooms, undirected passages, object placements, start room
/// and the goal placement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiniEnvSpec {
    pub rooms: BTreeSet<String>,
    pub edges: Vec<(String, String)>,
    pub objects: BTreeMap<String, String>,
    pub start: String,
    pub goal: Goal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Room(String),
    Held,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "affordance", rename_all = "snake_case")]
pub enum Affordance {
    Go { room: String },
    Look,
    Take { object: String },
    Put { object: String, room: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiniEnv {
    spec: MiniEnvSpec,
    location: String,
    placements: BTreeMap<String, Placement>,
}

impl MiniEnv {
    pub fn new(spec: MiniEnvSpec) -> Result<Self, WorldError> {
        let known = |r: &String| spec.rooms.contains(r);
        let bad = |why: String| Err(WorldError::InvalidScenario(why));
        if !known(&spec.start) {
            return bad(format!("start room {} is not a room", spec.start));
        }
        if let Some((a, b)) = spec.edges.iter().find(|(a, b)| !known(a) || !known(b)) {
            return bad(format!("passage {a}-{b} names an unknown room"));
        }
        if let Some((o, r)) = spec.objects.iter().find(|(_, r)| !known(r)) {
            return bad(format!("object {o} placed in unknown room {r}"));
        }
        if !spec.objects.contains_key(&spec.goal.object) || !known(&spec.goal.room) {
            return bad("goal names an unknown object or room".into());
        }
        Ok(MiniEnv {
            location: spec.start.clone(),
            placements: spec
                .objects
                .iter()
                .map(|(o, r)| (o.clone(), Placement::Room(r.clone())))
                .collect(),
            spec,
        })
    }

    pub fn location(&self) -> &str {
        &self.location
    }

    pub fn placement(&self, object: &str) -> Option<&Placement> {
        self.placements.get(object)
    }

    pub fn goal_reached(&self) -> bool {
        self.placements.get(&self.spec.goal.object) == Some(&Placement::Room(self.spec.goal.room.clone()))
    }

    fn exits(&self) -> Vec<&str> {
        let mut exits: Vec<&str> = self
            .spec
            .edges
            .iter()
            .filter_map(|(a, b)| {
                if *a == self.location {
                    Some(b.as_str())
                } else if *b == self.location {
                    Some(a.as_str())
                } else {
                    None
                }
            })
            .collect();
        exits.sort_unstable();
        exits.dedup();
        exits
    }

    fn describe(&self) -> String {
        let here: Vec<&str> = self
            .placements
            .iter()
            .filter(|(_, p)| **p == Placement::Room(self.location.clone()))
            .map(|(o, _)| o.as_str())
            .collect();
        let held: Vec<&str> = self
            .placements
            .iter()
            .filter(|(_, p)| **p == Placement::Held)
            .map(|(o, _)| o.as_str())
            .collect();
        let list = |items: &[&str]| if items.is_empty() { "nothing".to_string() } else { items.join(", ") };
        format!(
            "you are in the {}. you see: {}. you hold: {}. exits: {}.",
            self.location,
            list(&here),
            list(&held),
            list(&self.exits())
        )
    }

    /// Applies one affordance and returns the observation. Invalid moves
    /// leave the state unchanged and say why.
    pub fn step(&mut self, action: &Affordance) -> String {
        match action {
            Affordance::Look => self.describe(),
            Affordance::Go { room } => {
                if !self.spec.rooms.contains(room) {
                    format!("invalid move: there is no room called {room}")
                } else if !self.exits().contains(&room.as_str()) {
                    format!("invalid move: no passage from the {} to the {room}", self.location)
                } else {
                    self.location = room.clone();
                    format!("you go to the {room}. {}", self.describe())
                }
            }
            Affordance::Take { object } => match self.placements.get(object) {
                Some(Placement::Room(r)) if *r == self.location => {
                    self.placements.insert(object.clone(), Placement::Held);
                    format!("you take the {object}")
                }
                Some(Placement::Held) => format!("invalid move: you already hold the {object}"),
                _ => format!("invalid move: there is no {object} here"),
            },
            Affordance::Put { object, room } => {
                if *room != self.location {
                    format!("invalid move: you are in the {}, not the {room}", self.location)
                } else if self.placements.get(object) != Some(&Placement::Held) {
                    format!("invalid move: you do not hold the {object}")
                } else {
                    self.placements.insert(object.clone(), Placement::Room(room.clone()));
                    let mut obs = format!("you put the {object} in the {room}");
                    if self.goal_reached() {
                        obs.push_str(". the goal is complete");
                    }
                    obs
                }
            }
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn fixture() -> MiniEnvSpec {
        MiniEnvSpec {
            rooms: ["hall", "kitchen", "study", "vault"].iter().map(|s| s.to_string()).collect(),
            edges: vec![
                ("hall".into(), "kitchen".into()),
                ("hall".into(), "study".into()),
                ("hall".into(), "vault".into()),
            ],
            objects: BTreeMap::from([("key".into(), "kitchen".into()), ("book".into(), "study".into())]),
            start: "hall".into(),
            goal: Goal {
                object: "key".into(),
                room: "vault".into(),
            },
        }
    }

    fn go(room: &str) -> Affordance {
        Affordance::Go { room: room.into() }
    }

    #[test]
    fn take_and_go() {
        let mut env = MiniEnv::new(fixture()).unwrap();
        env.step(&go("kitchen"));
        let obs = env.step(&Affordance::Take { object: "key".into() });
        assert!(obs.contains("you take the key"));
        assert_eq!(env.placement("key"), Some(&Placement::Held));
        let mut env = MiniEnv::new(fixture()).unwrap();
        env.step(&go("vault"));
        assert_eq!(env.location(), "vault");
    }

    #[test]
    fn reference_path_reaches_goal() {
        // hand-traced: hall -> kitchen, take key, -> hall -> vault, put key
        let mut env = MiniEnv::new(fixture()).unwrap();
        let path = [
            go("kitchen"),
            Affordance::Take { object: "key".into() },
            go("hall"),
            go("vault"),
            Affordance::Put {
                object: "key".into(),
                room: "vault".into(),
            },
        ];
        for (i, a) in path.iter().enumerate() {
            assert!(!env.goal_reached(), "goal early at {i}");
            env.step(a);
        }
        assert!(env.goal_reached());
    }

    #[test]
    fn invalid_moves_are_observations() {
        let mut env = MiniEnv::new(fixture()).unwrap();
        let before = env.clone();
        assert!(env.step(&go("attic")).starts_with("invalid move"));
        assert!(env.step(&Affordance::Take { object: "key".into() }).starts_with("invalid move"));
        env.step(&go("kitchen"));
        assert!(env.step(&go("study")).starts_with("invalid move"));
        assert_ne!(env, before);
    }

    #[test]
    fn replay_is_pure() {
        let actions = [go("study"), Affordance::Take { object: "book".into() }, go("hall"), Affordance::Look];
        let run = || {
            let mut env = MiniEnv::new(fixture()).unwrap();
            let obs: Vec<String> = actions.iter().map(|a| env.step(a)).collect();
            (env, obs)
        };
        assert_eq!(run(), run());
    }
}
