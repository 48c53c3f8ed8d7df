use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    CognitionError, CognitionState, CompositeAction, FailurePattern, Revision, RevisionEdit,
    RevisionTarget, SkillBody,
};
use crate::model::{ActionKind, StepRef};

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    TargetMissing(RevisionTarget),
    KindMismatch { target: RevisionTarget, edit: String },
    Duplicate(String),
    DanglingReference(String),
    NonForwardFlow { step: usize, reference: usize },
    UndeclaredPlaceholder(String),
    EmptyPayload,
    MissingProvenance,
    AlreadyApplied,
    AlreadyCommitted,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::TargetMissing(t) => write!(f, "{t} does not exist"),
            RejectReason::KindMismatch { target, edit } => write!(f, "{edit} cannot apply to {target}"),
            RejectReason::Duplicate(what) => write!(f, "duplicate {what}"),
            RejectReason::DanglingReference(name) => write!(f, "reference to unknown {name}"),
            RejectReason::NonForwardFlow { step, reference } => {
                write!(f, "non-forward flow: step {step} binds output[{reference}]")
            }
            RejectReason::UndeclaredPlaceholder(name) => write!(f, "undeclared placeholder {{{name}}}"),
            RejectReason::EmptyPayload => f.write_str("empty payload"),
            RejectReason::MissingProvenance => f.write_str("revision has no provenance"),
            RejectReason::AlreadyApplied => f.write_str("evidence already applied"),
            RejectReason::AlreadyCommitted => f.write_str("revision is already committed"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validation {
    Accepted,
    Rejected(RejectReason),
}

impl Validation {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Validation::Accepted)
    }
}

/// A read-only view of the store at one version.
#[derive(Debug, Clone)]
pub struct PinnedCognition {
    pub version: u64,
    pub state: Arc<CognitionState>,
}

/// Versioned cognition: a seed plus an append-only log of committed
/// revisions, with the current state kept materialized.
///
/// Readers take a [`PinnedCognition`]; commits copy-on-write the state, so
/// a pinned reader never observes a half-applied revision.
#[derive(Debug, Clone)]
pub struct CognitionStore {
    seed: Arc<CognitionState>,
    state: Arc<CognitionState>,
    revisions: Vec<Revision>,
    version: u64,
    reliability_evidence: BTreeSet<(RevisionTarget, String, StepRef)>,
}

fn case_fold(text: &str) -> String {
    text.trim().to_lowercase()
}

fn reject(reason: RejectReason) -> Validation {
    Validation::Rejected(reason)
}

impl CognitionStore {
    pub fn new(seed: CognitionState) -> Self {
        let seed = Arc::new(seed);
        CognitionStore {
            state: Arc::clone(&seed),
            seed,
            revisions: Vec::new(),
            version: 0,
            reliability_evidence: BTreeSet::new(),
        }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn state(&self) -> &CognitionState {
        &self.state
    }

    pub fn seed(&self) -> &CognitionState {
        &self.seed
    }

    pub fn revisions(&self) -> &[Revision] {
        &self.revisions
    }

    pub fn pin(&self) -> PinnedCognition {
        PinnedCognition {
            version: self.version,
            state: Arc::clone(&self.state),
        }
    }

    /// Whether reliability evidence for this step has already been folded in.
    pub fn has_reliability_evidence(&self, target: &RevisionTarget, tag: &str, step: &StepRef) -> bool {
        self.reliability_evidence
            .contains(&(target.clone(), tag.to_string(), step.clone()))
    }

    fn target_exists(&self, target: &RevisionTarget) -> bool {
        let s = &self.state;
        match target {
            RevisionTarget::Tool(n) => s.tools.contains_key(n),
            RevisionTarget::Skill(n) => s.skills.contains_key(n),
            RevisionTarget::Composite(n) => s.composites.contains_key(n),
            RevisionTarget::Peer(n) => s.peers.contains_key(n),
        }
    }

    fn action_exists(&self, kind: &ActionKind) -> Result<(), RejectReason> {
        let s = &self.state;
        let ok = match kind {
            ActionKind::EmicGenerate => true,
            ActionKind::EmicToolCall(t) => s.tools.contains_key(t),
            ActionKind::EmicSkillInvoke(id) => s.skills.contains_key(id),
            ActionKind::EmicCompositeInvoke(id) => s.composites.contains_key(id),
            ActionKind::EticAsk(p) | ActionKind::EticDelegate(p) => s.peers.contains_key(p),
            ActionKind::FinalAnswer => {
                return Err(RejectReason::KindMismatch {
                    target: RevisionTarget::Composite(String::new()),
                    edit: "FinalAnswer step".into(),
                })
            }
        };
        if ok {
            Ok(())
        } else {
            Err(RejectReason::DanglingReference(kind.name()))
        }
    }

    fn validate_composite(&self, composite: &CompositeAction) -> Result<(), RejectReason> {
        if composite.steps.is_empty() || composite.goal.trim().is_empty() {
            return Err(RejectReason::EmptyPayload);
        }
        for step in &composite.steps {
            self.action_exists(&step.kind)?;
            for binding in step.bindings.values() {
                if let super::Binding::Input(name) = binding {
                    if !composite.inputs.contains(name) {
                        return Err(RejectReason::UndeclaredPlaceholder(name.clone()));
                    }
                }
            }
        }
        if let Some((step, reference)) = composite.non_forward_reference() {
            return Err(RejectReason::NonForwardFlow { step, reference });
        }
        Ok(())
    }

    pub fn validate(&self, revision: &Revision) -> Validation {
        if revision.committed {
            return reject(RejectReason::AlreadyCommitted);
        }
        if revision.provenance.is_empty() {
            return reject(RejectReason::MissingProvenance);
        }
        let target = &revision.target;
        let mismatch = || {
            reject(RejectReason::KindMismatch {
                target: target.clone(),
                edit: format!("{:?}", revision.edit_kind()),
            })
        };

        // creation edits need an absent target, all others an existing one
        match (&revision.edit, target) {
            (RevisionEdit::AddSkill { skill }, RevisionTarget::Skill(id)) => {
                if &skill.skill_id != id {
                    return mismatch();
                }
                if self.target_exists(target) {
                    return reject(RejectReason::Duplicate(format!("skill {id}")));
                }
                if skill.body_is_empty() || skill.intent.trim().is_empty() {
                    return reject(RejectReason::EmptyPayload);
                }
                if let Some(name) = skill
                    .used_placeholders()
                    .into_iter()
                    .find(|p| !skill.parameters.contains(p))
                {
                    return reject(RejectReason::UndeclaredPlaceholder(name));
                }
                if let SkillBody::Actions { steps } = &skill.body {
                    for step in steps {
                        if let Err(reason) = self.action_exists(&step.kind) {
                            return reject(reason);
                        }
                    }
                }
                return Validation::Accepted;
            }
            (RevisionEdit::AddComposite { composite }, RevisionTarget::Composite(id)) => {
                if &composite.composite_id != id {
                    return mismatch();
                }
                if self.target_exists(target) {
                    return reject(RejectReason::Duplicate(format!("composite {id}")));
                }
                return match self.validate_composite(composite) {
                    Ok(()) => Validation::Accepted,
                    Err(reason) => reject(reason),
                };
            }
            (RevisionEdit::AddSkill { .. } | RevisionEdit::AddComposite { .. }, _) => return mismatch(),
            _ => {}
        }

        if !self.target_exists(target) {
            return reject(RejectReason::TargetMissing(target.clone()));
        }
        let s = &self.state;
        match (&revision.edit, target) {
            (RevisionEdit::AmendDescription { text, .. }, _) => {
                if text.trim().is_empty() {
                    return reject(RejectReason::EmptyPayload);
                }
                let current = match target {
                    RevisionTarget::Tool(n) => &s.tools[n].description,
                    RevisionTarget::Skill(n) => &s.skills[n].intent,
                    RevisionTarget::Composite(n) => &s.composites[n].goal,
                    RevisionTarget::Peer(_) => return mismatch(),
                };
                if current == text {
                    return reject(RejectReason::Duplicate("description".into()));
                }
            }
            (RevisionEdit::AddPrecondition { text }, RevisionTarget::Tool(_) | RevisionTarget::Composite(_)) => {
                if text.trim().is_empty() {
                    return reject(RejectReason::EmptyPayload);
                }
                let existing = match target {
                    RevisionTarget::Tool(n) => &s.tools[n].preconditions,
                    RevisionTarget::Composite(n) => &s.composites[n].preconditions,
                    _ => unreachable!(),
                };
                if existing.iter().any(|p| case_fold(p) == case_fold(text)) {
                    return reject(RejectReason::Duplicate("precondition".into()));
                }
            }
            (RevisionEdit::AddFailurePattern { text }, RevisionTarget::Tool(n)) => {
                if text.trim().is_empty() {
                    return reject(RejectReason::EmptyPayload);
                }
                if s.tools[n]
                    .failure_patterns
                    .iter()
                    .any(|p| case_fold(&p.text) == case_fold(text))
                {
                    return reject(RejectReason::Duplicate("failure pattern".into()));
                }
            }
            (RevisionEdit::AddExample { example }, RevisionTarget::Tool(n)) => {
                if example.outcome_summary.trim().is_empty() {
                    return reject(RejectReason::EmptyPayload);
                }
                if s.tools[n].usage_examples.contains(example) {
                    return reject(RejectReason::Duplicate("usage example".into()));
                }
            }
            (
                RevisionEdit::AdjustReliability { domain_tag, .. },
                RevisionTarget::Tool(_) | RevisionTarget::Peer(_) | RevisionTarget::Composite(_),
            ) => {
                if domain_tag.trim().is_empty() {
                    return reject(RejectReason::EmptyPayload);
                }
                if revision
                    .provenance
                    .iter()
                    .any(|step| self.has_reliability_evidence(target, domain_tag, step))
                {
                    return reject(RejectReason::AlreadyApplied);
                }
            }
            (RevisionEdit::AmendPeerExpertise { domain_tag, text, .. }, RevisionTarget::Peer(n)) => {
                if domain_tag.trim().is_empty() || text.trim().is_empty() {
                    return reject(RejectReason::EmptyPayload);
                }
                if s.peers[n].expertise.get(domain_tag) == Some(text) {
                    return reject(RejectReason::Duplicate("peer expertise".into()));
                }
            }
            _ => return mismatch(),
        }
        Validation::Accepted
    }

    /// Validates and applies `revision`, returning the new version.
    pub fn commit(&mut self, mut revision: Revision) -> Result<u64, CognitionError> {
        if let Validation::Rejected(reason) = self.validate(&revision) {
            return Err(CognitionError::NotValidated(reason));
        }
        let next = self.version + 1;
        revision.revision_id = format!("rev-{next:06}");
        revision.committed = true;
        self.apply(&mut revision);
        self.revisions.push(revision);
        self.version = next;
        Ok(next)
    }

    fn apply(&mut self, revision: &mut Revision) {
        let id = revision.revision_id.clone();
        let support = revision.provenance.len();
        let state = Arc::make_mut(&mut self.state);
        match (&mut revision.edit, &revision.target) {
            (RevisionEdit::AmendDescription { text, previous }, target) => {
                let field = match target {
                    RevisionTarget::Tool(n) => &mut state.tools.get_mut(n).unwrap().description,
                    RevisionTarget::Skill(n) => &mut state.skills.get_mut(n).unwrap().intent,
                    RevisionTarget::Composite(n) => &mut state.composites.get_mut(n).unwrap().goal,
                    RevisionTarget::Peer(_) => unreachable!("rejected by validation"),
                };
                *previous = Some(std::mem::replace(field, text.clone()));
            }
            (RevisionEdit::AddPrecondition { text }, RevisionTarget::Tool(n)) => {
                state.tools.get_mut(n).unwrap().preconditions.push(text.clone());
            }
            (RevisionEdit::AddPrecondition { text }, RevisionTarget::Composite(n)) => {
                state.composites.get_mut(n).unwrap().preconditions.push(text.clone());
            }
            (RevisionEdit::AddFailurePattern { text }, RevisionTarget::Tool(n)) => {
                state.tools.get_mut(n).unwrap().failure_patterns.push(FailurePattern {
                    text: text.clone(),
                    support,
                });
            }
            (RevisionEdit::AddExample { example }, RevisionTarget::Tool(n)) => {
                state.tools.get_mut(n).unwrap().usage_examples.push(example.clone());
            }
            (RevisionEdit::AdjustReliability { domain_tag, success }, target) => {
                let table = match target {
                    RevisionTarget::Tool(n) => &mut state.tools.get_mut(n).unwrap().reliability,
                    RevisionTarget::Peer(n) => &mut state.peers.get_mut(n).unwrap().reliability,
                    RevisionTarget::Composite(n) => &mut state.composites.get_mut(n).unwrap().reliability,
                    RevisionTarget::Skill(_) => unreachable!("rejected by validation"),
                };
                table.entry(domain_tag.clone()).or_default().record(*success);
                for step in &revision.provenance {
                    self.reliability_evidence
                        .insert((target.clone(), domain_tag.clone(), step.clone()));
                }
            }
            (RevisionEdit::AddSkill { skill }, _) => {
                skill.revision_log = Vec::new();
                let mut stored = skill.clone();
                stored.revision_log.push(id.clone());
                state.skills.insert(stored.skill_id.clone(), stored);
                return;
            }
            (RevisionEdit::AddComposite { composite }, _) => {
                composite.revision_log = Vec::new();
                let mut stored = composite.clone();
                stored.revision_log.push(id.clone());
                state.composites.insert(stored.composite_id.clone(), stored);
                return;
            }
            (RevisionEdit::AmendPeerExpertise { domain_tag, text, previous }, RevisionTarget::Peer(n)) => {
                let peer = state.peers.get_mut(n).unwrap();
                *previous = peer.expertise.insert(domain_tag.clone(), text.clone());
            }
            _ => unreachable!("rejected by validation"),
        }
        let log = match &revision.target {
            RevisionTarget::Tool(n) => &mut state.tools.get_mut(n).unwrap().revision_log,
            RevisionTarget::Skill(n) => &mut state.skills.get_mut(n).unwrap().revision_log,
            RevisionTarget::Composite(n) => &mut state.composites.get_mut(n).unwrap().revision_log,
            RevisionTarget::Peer(n) => &mut state.peers.get_mut(n).unwrap().revision_log,
        };
        log.push(id);
    }

    /// Rebuilds a store by re-committing `revisions` over `seed`.
    pub fn replay(seed: CognitionState, revisions: &[Revision]) -> Result<Self, CognitionError> {
        let mut store = CognitionStore::new(seed);
        for (index, committed) in revisions.iter().enumerate() {
            let mut proposal = committed.clone();
            proposal.revision_id = String::new();
            proposal.committed = false;
            match &mut proposal.edit {
                RevisionEdit::AmendDescription { previous, .. }
                | RevisionEdit::AmendPeerExpertise { previous, .. } => *previous = None,
                _ => {}
            }
            store
                .commit(proposal)
                .map_err(|e| CognitionError::ReplayDiverged {
                    index,
                    reason: e.to_string(),
                })?;
            if store.revisions[index] != *committed {
                return Err(CognitionError::ReplayDiverged {
                    index,
                    reason: "replayed revision differs from the logged one".into(),
                });
            }
        }
        Ok(store)
    }

    /// Canonical bytes of the materialized state.
    /// The store as it was after its first `version` commits.
    pub fn at_version(&self, version: u64) -> Result<Self, CognitionError> {
        let n = usize::try_from(version).unwrap_or(usize::MAX);
        if n > self.revisions.len() {
            return Err(CognitionError::ReplayDiverged {
                index: self.revisions.len(),
                reason: format!("store has no version {version}"),
            });
        }
        CognitionStore::replay((*self.seed).clone(), &self.revisions[..n])
    }

    pub fn state_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&*self.state).expect("state serializes")
    }

    /// Snapshot file: header line, seed line, one line per revision.
    pub fn export_snapshot(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let mut line = |value: serde_json::Value| {
            serde_json::to_writer(&mut out, &value).expect("snapshot serializes");
            out.push(b'\n');
        };
        line(serde_json::json!({
            "format_version": SNAPSHOT_FORMAT_VERSION,
            "kind": "cognition_store",
            "version": self.version,
        }));
        line(serde_json::json!({ "seed": &*self.seed }));
        for revision in &self.revisions {
            line(serde_json::to_value(revision).expect("revision serializes"));
        }
        out
    }

    pub fn import_snapshot(bytes: &[u8]) -> Result<Self, CognitionError> {
        let malformed = |line: usize, reason: String| CognitionError::MalformedSnapshot { line, reason };
        let text = std::str::from_utf8(bytes).map_err(|e| malformed(1, e.to_string()))?;
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < 2 {
            return Err(malformed(lines.len() + 1, "missing header or seed line".into()));
        }
        #[derive(Deserialize, Serialize)]
        struct Header {
            format_version: u32,
            kind: String,
            version: u64,
        }
        #[derive(Deserialize)]
        struct SeedLine {
            seed: CognitionState,
        }
        let header: Header = serde_json::from_str(lines[0]).map_err(|e| malformed(1, e.to_string()))?;
        if header.format_version != SNAPSHOT_FORMAT_VERSION || header.kind != "cognition_store" {
            return Err(malformed(1, "unsupported snapshot header".into()));
        }
        let seed: SeedLine = serde_json::from_str(lines[1]).map_err(|e| malformed(2, e.to_string()))?;
        let revisions = lines[2..]
            .iter()
            .enumerate()
            .map(|(i, l)| serde_json::from_str::<Revision>(l).map_err(|e| malformed(i + 3, e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let store = CognitionStore::replay(seed.seed, &revisions)?;
        if store.version != header.version {
            return Err(malformed(
                1,
                format!("header version {} but {} revisions", header.version, store.version),
            ));
        }
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cognition::{Binding, CompositeStep, PeerProfile, ToolProfile, UsageExample};
    use std::collections::BTreeMap;

    fn seed() -> CognitionState {
        let mut state = CognitionState::default();
        for name in ["web_search", "extract"] {
            state
                .tools
                .insert(name.into(), ToolProfile::new(name, format!("{name} seed description")));
        }
        state.peers.insert(
            "mathbot".into(),
            PeerProfile {
                peer_id: "mathbot".into(),
                expertise: BTreeMap::from([("math".to_string(), "arithmetic".to_string())]),
                reliability: Default::default(),
                response_pattern_notes: vec![],
                revision_log: vec![],
            },
        );
        state
    }

    fn prov(step: usize) -> Vec<StepRef> {
        vec![StepRef::new("t1", step)]
    }

    fn tool(name: &str) -> RevisionTarget {
        RevisionTarget::Tool(name.into())
    }

    fn composite(steps: Vec<CompositeStep>) -> Revision {
        Revision::propose(
            RevisionTarget::Composite("c".into()),
            RevisionEdit::AddComposite {
                composite: CompositeAction {
                    composite_id: "c".into(),
                    goal: "search then extract".into(),
                    preconditions: vec![],
                    steps,
                    expected_output_pattern: "text".into(),
                    inputs: vec!["q".into()],
                    reliability: Default::default(),
                    revision_log: vec![],
                },
            },
            prov(0),
        )
    }

    #[test]
    fn duplicate_precondition_rejected() {
        let mut store = CognitionStore::new(seed());
        let add = |text: &str| {
            Revision::propose(tool("web_search"), RevisionEdit::AddPrecondition { text: text.into() }, prov(0))
        };
        store.commit(add("needs network")).unwrap();
        assert_eq!(
            store.validate(&add("  Needs Network ")),
            Validation::Rejected(RejectReason::Duplicate("precondition".into()))
        );
    }

    #[test]
    fn non_forward_flow_rejected() {
        let store = CognitionStore::new(seed());
        let bad = composite(vec![
            CompositeStep {
                kind: ActionKind::EmicToolCall("web_search".into()),
                bindings: BTreeMap::from([("query".into(), Binding::Output(1))]),
            },
            CompositeStep {
                kind: ActionKind::EmicToolCall("extract".into()),
                bindings: BTreeMap::from([("text".into(), Binding::Input("q".into()))]),
            },
        ]);
        assert_eq!(
            store.validate(&bad),
            Validation::Rejected(RejectReason::NonForwardFlow { step: 0, reference: 1 })
        );
    }

    #[test]
    fn dangling_composite_rejected() {
        let store = CognitionStore::new(seed());
        let bad = composite(vec![CompositeStep {
            kind: ActionKind::EmicToolCall("teleport".into()),
            bindings: BTreeMap::new(),
        }]);
        assert!(matches!(
            store.validate(&bad),
            Validation::Rejected(RejectReason::DanglingReference(_))
        ));
    }

    #[test]
    fn amend_description_accepted_and_archived() {
        let mut store = CognitionStore::new(seed());
        let rev = Revision::propose(
            tool("web_search"),
            RevisionEdit::AmendDescription {
                text: "better description".into(),
                previous: None,
            },
            prov(1),
        );
        assert_eq!(store.validate(&rev), Validation::Accepted);
        store.commit(rev).unwrap();
        assert_eq!(store.state().tools["web_search"].description, "better description");
        match &store.revisions()[0].edit {
            RevisionEdit::AmendDescription { previous, .. } => {
                assert_eq!(previous.as_deref(), Some("web_search seed description"))
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(store.state().tools["web_search"].revision_log, vec!["rev-000001"]);
    }

    #[test]
    fn missing_target_and_provenance() {
        let store = CognitionStore::new(seed());
        let rev = Revision::propose(tool("nope"), RevisionEdit::AddPrecondition { text: "x".into() }, prov(0));
        assert!(matches!(store.validate(&rev), Validation::Rejected(RejectReason::TargetMissing(_))));
        let rev = Revision::propose(tool("extract"), RevisionEdit::AddPrecondition { text: "x".into() }, vec![]);
        assert_eq!(store.validate(&rev), Validation::Rejected(RejectReason::MissingProvenance));
        let rev = Revision::propose(tool("extract"), RevisionEdit::AddPrecondition { text: " ".into() }, prov(0));
        assert_eq!(store.validate(&rev), Validation::Rejected(RejectReason::EmptyPayload));
    }

    #[test]
    fn commit_of_rejected_is_not_validated() {
        let mut store = CognitionStore::new(seed());
        let rev = Revision::propose(tool("nope"), RevisionEdit::AddPrecondition { text: "x".into() }, prov(0));
        assert!(matches!(store.commit(rev), Err(CognitionError::NotValidated(_))));
        assert_eq!(store.version(), 0);
    }

    #[test]
    fn reliability_evidence_applies_once() {
        let mut store = CognitionStore::new(seed());
        let adjust = || {
            Revision::propose(
                tool("web_search"),
                RevisionEdit::AdjustReliability {
                    domain_tag: "qa".into(),
                    success: true,
                },
                prov(2),
            )
        };
        store.commit(adjust()).unwrap();
        assert_eq!(store.validate(&adjust()), Validation::Rejected(RejectReason::AlreadyApplied));
    }

    #[test]
    fn versions_and_replay() {
        let mut store = CognitionStore::new(seed());
        for i in 0..7 {
            store
                .commit(Revision::propose(
                    tool("extract"),
                    RevisionEdit::AdjustReliability {
                        domain_tag: "qa".into(),
                        success: i % 2 == 0,
                    },
                    prov(i),
                ))
                .unwrap();
        }
        assert_eq!(store.version(), 7);
        let v = store
            .commit(Revision::propose(
                tool("extract"),
                RevisionEdit::AddExample {
                    example: UsageExample {
                        parameters: BTreeMap::from([("text".into(), "a. b.".into())]),
                        outcome_summary: "a".into(),
                    },
                },
                prov(9),
            ))
            .unwrap();
        assert_eq!(v, 8);
        let replayed = CognitionStore::replay(store.seed().clone(), store.revisions()).unwrap();
        assert_eq!(replayed.state_bytes(), store.state_bytes());

        let imported = CognitionStore::import_snapshot(&store.export_snapshot()).unwrap();
        assert_eq!(imported.version(), 8);
        assert_eq!(imported.state_bytes(), store.state_bytes());
        assert_eq!(imported.export_snapshot(), store.export_snapshot());

        let earlier = store.at_version(7).unwrap();
        assert_eq!(earlier.version(), 7);
        assert!(earlier.state().tools["extract"].usage_examples.is_empty());
        assert!(store.at_version(9).is_err());
    }

    #[test]
    fn pinned_readers_keep_their_version() {
        let mut store = CognitionStore::new(seed());
        let pinned = store.pin();
        store
            .commit(Revision::propose(
                tool("extract"),
                RevisionEdit::AddPrecondition { text: "input must be prose".into() },
                prov(0),
            ))
            .unwrap();
        assert!(pinned.state.tools["extract"].preconditions.is_empty());
        assert_eq!(pinned.version, 0);
        assert_eq!(store.pin().state.tools["extract"].preconditions.len(), 1);
    }
}
