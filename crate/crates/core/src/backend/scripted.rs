use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{BackendError, CallSite, Completion, CompletionBackend, CompletionRequest, ScriptPolicy};
use crate::model::{token_count, Usage};

/// Scripted responses addressed by (call site, occurrence index).
///
/// Lookup order for the n-th call at a site: the explicit entry, the
/// site's policy, the site default, the global default. If none applies
/// the call fails with [`BackendError::ScenarioExhausted`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptedScenario {
    #[serde(default, deserialize_with = "entries_de")]
    pub entries: BTreeMap<CallSite, BTreeMap<usize, String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub policies: BTreeMap<CallSite, ScriptPolicy>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub site_defaults: BTreeMap<CallSite, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_response: Option<String>,
}

/// Occurrence keys arrive as JSON strings; inside internally tagged enums
/// serde no longer coerces them, so accept both forms.
struct Occurrence(usize);

impl<'de> Deserialize<'de> for Occurrence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = Occurrence;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("an occurrence index")
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Occurrence, E> {
                usize::try_from(v).map(Occurrence).map_err(E::custom)
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Occurrence, E> {
                v.parse().map(Occurrence).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

type Entries = BTreeMap<CallSite, BTreeMap<usize, String>>;

fn entries_de<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Entries, D::Error> {
    let raw: BTreeMap<CallSite, OccurrenceMap> = BTreeMap::deserialize(d)?;
    Ok(raw
        .into_iter()
        .map(|(site, m)| (site, m.0.into_iter().map(|(o, t)| (o.0, t)).collect()))
        .collect())
}

struct OccurrenceMap(Vec<(Occurrence, String)>);

impl<'de> Deserialize<'de> for OccurrenceMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> serde::de::Visitor<'de> for V {
            type Value = OccurrenceMap;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a map from occurrence index to response")
            }
            fn visit_map<A: serde::de::MapAccess<'de>>(self, mut map: A) -> Result<OccurrenceMap, A::Error> {
                let mut out = Vec::new();
                while let Some(entry) = map.next_entry()? {
                    out.push(entry);
                }
                Ok(OccurrenceMap(out))
            }
        }
        d.deserialize_map(V)
    }
}

impl ScriptedScenario {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_entry(mut self, site: CallSite, occurrence: usize, text: impl Into<String>) -> Self {
        self.entries
            .entry(site)
            .or_default()
            .insert(occurrence, text.into());
        self
    }

    /// Entries 0..n for `site`, in order.
    pub fn with_sequence<I, S>(mut self, site: CallSite, texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let slot = self.entries.entry(site).or_default();
        for (i, text) in texts.into_iter().enumerate() {
            slot.insert(i, text.into());
        }
        self
    }

    pub fn with_site_default(mut self, site: CallSite, text: impl Into<String>) -> Self {
        self.site_defaults.insert(site, text.into());
        self
    }

    pub fn with_policy(mut self, site: CallSite, policy: ScriptPolicy) -> Self {
        self.policies.insert(site, policy);
        self
    }

    pub fn with_default(mut self, text: impl Into<String>) -> Self {
        self.default_response = Some(text.into());
        self
    }

    /// `top` layered over `self`: a site scripted in `top` replaces that
    /// site's entries here; policies and defaults fall through per site.
    pub fn overlaid(&self, top: &ScriptedScenario) -> ScriptedScenario {
        let mut out = self.clone();
        for (site, entries) in &top.entries {
            out.entries.insert(*site, entries.clone());
        }
        for (site, policy) in &top.policies {
            if !top.entries.contains_key(site) {
                out.entries.remove(site);
            }
            out.policies.insert(*site, policy.clone());
        }
        out.site_defaults.extend(top.site_defaults.iter().map(|(k, v)| (*k, v.clone())));
        if top.default_response.is_some() {
            out.default_response = top.default_response.clone();
        }
        out
    }

    fn respond(&self, request: &CompletionRequest, occurrence: usize) -> Option<String> {
        let site = request.call_site;
        if let Some(text) = self.entries.get(&site).and_then(|e| e.get(&occurrence)) {
            return Some(text.clone());
        }
        if let Some(policy) = self.policies.get(&site) {
            return Some(policy.respond(request));
        }
        self.site_defaults
            .get(&site)
            .or(self.default_response.as_ref())
            .cloned()
    }
}

/// Deterministic backend: the response is a pure function of the scenario,
/// the call site, the occurrence index and (for policies) the prompt bytes.
#[derive(Debug)]
pub struct ScriptedBackend {
    scenario: ScriptedScenario,
    counters: Mutex<BTreeMap<CallSite, usize>>,
}

impl ScriptedBackend {
    pub fn new(scenario: ScriptedScenario) -> Self {
        ScriptedBackend {
            scenario,
            counters: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn calls(&self, site: CallSite) -> usize {
        self.counters
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .get(&site)
            .copied()
            .unwrap_or(0)
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<Completion, BackendError> {
        request.validate()?;
        let occurrence = {
            let mut counters = self.counters.lock().unwrap_or_else(|e| e.into_inner());
            let slot = counters.entry(request.call_site).or_insert(0);
            let current = *slot;
            *slot += 1;
            current
        };
        let text = self
            .scenario
            .respond(request, occurrence)
            .ok_or(BackendError::ScenarioExhausted {
                call_site: request.call_site,
                occurrence,
            })?;
        let usage = Usage {
            prompt_tokens: token_count(&request.prompt_text()).get(),
            completion_tokens: token_count(&text).get(),
        };
        Ok(Completion { text, usage })
    }
}
