use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::pool::MemoryPool;
use super::EmoError;
use crate::backend::{CallSite, CompletionBackend, CompletionRequest, GenerationLimits};
use crate::model::{token_count, truncate_to_tokens, TokenCount};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeSource {
    Summarizer,
    Fallback,
}

/// A folded contiguous range of steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub episode_id: usize,
    pub first_step: usize,
    pub last_step: usize,
    pub goal: String,
    pub key_actions: Vec<String>,
    pub resolution: String,
    /// What working memory shows for the episode.
    pub text: String,
    pub episode_tokens: TokenCount,
    pub source: EpisodeSource,
}

fn fold_prompt(pool: &MemoryPool, first: usize, last: usize) -> String {
    let mut prompt = String::from(
        "Fold the following consecutive agent steps into one episode. Answer with exactly three lines:\n\
         goal: <what the steps were trying to achieve>\n\
         actions: <key actions separated by semicolons>\n\
         resolution: <how the segment ended>\n\n",
    );
    for step in first..=last {
        let summary = pool.summary(step).expect("range checked");
        prompt.push_str(&format!("[step {step}] {}\n", summary.summary_text));
    }
    prompt
}

fn parse_fold(text: &str) -> Option<(String, Vec<String>, String)> {
    let mut goal = None;
    let mut actions = None;
    let mut resolution = None;
    for line in text.lines().map(str::trim) {
        if let Some(rest) = line.strip_prefix("goal:") {
            goal = Some(rest.trim().to_string());
        } else if let Some(rest) = line.strip_prefix("actions:") {
            actions = Some(
                rest.split(';')
                    .map(|a| a.trim().to_string())
                    .filter(|a| !a.is_empty())
                    .collect::<Vec<_>>(),
            );
        } else if let Some(rest) = line.strip_prefix("resolution:") {
            resolution = Some(rest.trim().to_string());
        }
    }
    match (goal, actions, resolution) {
        (Some(g), Some(a), Some(r)) if !g.is_empty() && !a.is_empty() && !r.is_empty() => Some((g, a, r)),
        _ => None,
    }
}

/// Folds steps `first..=last` into a new episode. Raw records stay in the
/// pool. The episode text is kept strictly below the summed summary tokens
/// of the range, truncating a verbose summarizer answer if needed.
pub fn mem_fold(
    pool: &mut MemoryPool,
    (first, last): (usize, usize),
    summarizer: Option<&dyn CompletionBackend>,
    limits: GenerationLimits,
) -> Result<Episode, EmoError> {
    if last < first + 1 {
        return Err(EmoError::RangeTooShort { first, last });
    }
    if let Some(e) = pool
        .episodes()
        .iter()
        .find(|e| first <= e.last_step && e.first_step <= last)
    {
        return Err(EmoError::RangeOverlap {
            first,
            last,
            episode: e.episode_id,
        });
    }
    if last >= pool.len() {
        return Err(EmoError::RangeOutOfBounds {
            first,
            last,
            len: pool.len(),
        });
    }

    let summaries: Vec<_> = (first..=last).map(|i| pool.summary(i).expect("in bounds")).collect();
    let budget: TokenCount = summaries.iter().map(|s| s.summary_tokens).sum();

    let answered = summarizer.and_then(|backend| {
        backend
            .complete(&CompletionRequest::new(CallSite::Fold, fold_prompt(pool, first, last), limits))
            .ok()
            .and_then(|c| parse_fold(&c.text))
    });
    let (goal, key_actions, resolution, text, source) = match answered {
        Some((goal, actions, resolution)) => {
            let mut text = format!("goal: {goal} | actions: {} | resolution: {resolution}", actions.join("; "));
            if token_count(&text) >= budget {
                text = truncate_to_tokens(&text, TokenCount(budget.get() - 1)).to_string();
            }
            (goal, actions, resolution, text, EpisodeSource::Summarizer)
        }
        None => {
            let joined = summaries
                .iter()
                .map(|s| s.summary_text.as_str())
                .collect::<Vec<_>>()
                .join(" | ");
            let half = TokenCount((budget.get() / 2).max(1));
            let text = truncate_to_tokens(&joined, half).to_string();
            let key_actions = (first..=last)
                .map(|i| pool.record(i).expect("in bounds").kind.name())
                .collect();
            let resolution = summaries.last().expect("non-empty").summary_text.clone();
            (format!("steps {first}-{last}"), key_actions, resolution, text, EpisodeSource::Fallback)
        }
    };
    let episode = Episode {
        episode_id: pool.next_episode_id(),
        first_step: first,
        last_step: last,
        goal,
        key_actions,
        resolution,
        episode_tokens: token_count(&text),
        text,
        source,
    };
    pool.push_episode(episode.clone());
    Ok(episode)
}

fn word_set(text: &str) -> BTreeSet<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Up to `k` episodes sharing at least one word with `query`, ranked by
/// overlap with goal and key actions; ties go to the later episode.
pub fn retrieve_episodes<'a>(pool: &'a MemoryPool, query: &str, k: usize) -> Vec<&'a Episode> {
    let query = word_set(query);
    let mut scored: Vec<(usize, &Episode)> = pool
        .episodes()
        .iter()
        .map(|e| {
            let words = word_set(&format!("{} {}", e.goal, e.key_actions.join(" ")));
            (query.intersection(&words).count(), e)
        })
        .filter(|(score, _)| *score > 0)
        .collect();
    scored.sort_by(|(sa, a), (sb, b)| sb.cmp(sa).then(b.last_step.cmp(&a.last_step)));
    scored.into_iter().take(k).map(|(_, e)| e).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{ScriptedBackend, ScriptedScenario};
    use crate::emo::pool::tests::lookup_record;
    use crate::emo::{assemble_working_memory, ingest_step, Representation, SelectorDecision};

    fn pool(n: usize) -> MemoryPool {
        let mut pool = MemoryPool::new();
        for i in 0..n {
            ingest_step(&mut pool, lookup_record(i, 12), None, GenerationLimits::default()).unwrap();
        }
        pool
    }

    #[test]
    fn fold_keeps_raw_records() {
        let mut p = pool(6);
        let before: Vec<_> = p.records().cloned().collect();
        let e = mem_fold(&mut p, (0, 3), None, GenerationLimits::default()).unwrap();
        assert_eq!((e.first_step, e.last_step), (0, 3));
        let after: Vec<_> = p.records().cloned().collect();
        assert_eq!(before, after);
        assert_eq!(p.unfolded_steps(), vec![4, 5]);
    }

    #[test]
    fn fold_then_assemble_shrinks() {
        let mut p = pool(6);
        let decision = SelectorDecision::uniform(&p, Representation::Summary);
        let before = assemble_working_memory(&p, &decision, TokenCount(100_000)).unwrap();
        mem_fold(&mut p, (0, 3), None, GenerationLimits::default()).unwrap();
        let after = assemble_working_memory(&p, &decision, TokenCount(100_000)).unwrap();
        assert_eq!(after.entries.len(), 3);
        assert!(after.total_tokens < before.total_tokens);
    }

    #[test]
    fn range_errors() {
        let mut p = pool(6);
        mem_fold(&mut p, (2, 4), None, GenerationLimits::default()).unwrap();
        assert!(matches!(
            mem_fold(&mut p, (3, 6), None, GenerationLimits::default()),
            Err(EmoError::RangeOverlap { episode: 0, .. })
        ));
        assert!(matches!(
            mem_fold(&mut p, (5, 5), None, GenerationLimits::default()),
            Err(EmoError::RangeTooShort { .. })
        ));
        assert!(matches!(
            mem_fold(&mut p, (5, 9), None, GenerationLimits::default()),
            Err(EmoError::RangeOutOfBounds { .. })
        ));
    }

    #[test]
    fn verbose_summarizer_is_truncated() {
        let mut p = pool(3);
        let long = format!("goal: {}\nactions: a; b\nresolution: done", "very ".repeat(300));
        let backend = ScriptedBackend::new(ScriptedScenario::new().with_default(long));
        let e = mem_fold(&mut p, (0, 1), Some(&backend), GenerationLimits::default()).unwrap();
        let sum = p.summary(0).unwrap().summary_tokens + p.summary(1).unwrap().summary_tokens;
        assert_eq!(e.source, EpisodeSource::Summarizer);
        assert!(e.episode_tokens < sum);
    }

    #[test]
    fn summarizer_fields_are_parsed() {
        let mut p = pool(3);
        let backend = ScriptedBackend::new(
            ScriptedScenario::new().with_default("goal: find it\nactions: lookup; lookup\nresolution: found"),
        );
        let e = mem_fold(&mut p, (0, 2), Some(&backend), GenerationLimits::default()).unwrap();
        assert_eq!(e.goal, "find it");
        assert_eq!(e.key_actions, vec!["lookup", "lookup"]);
        assert_eq!(e.text, "goal: find it | actions: lookup; lookup | resolution: found");
    }

    fn with_episodes(specs: &[(&str, &[&str])]) -> MemoryPool {
        let mut p = pool(specs.len() * 2);
        for (i, (goal, actions)) in specs.iter().enumerate() {
            p.push_episode(Episode {
                episode_id: i,
                first_step: 2 * i,
                last_step: 2 * i + 1,
                goal: goal.to_string(),
                key_actions: actions.iter().map(|a| a.to_string()).collect(),
                resolution: "done".into(),
                text: "t".into(),
                episode_tokens: TokenCount(1),
                source: EpisodeSource::Summarizer,
            });
        }
        p
    }

    #[test]
    fn retrieval_ranking() {
        assert!(retrieve_episodes(&pool(2), "anything", 3).is_empty());
        // A shares {capital, france, population}; B shares {capital}
        let p = with_episodes(&[
            ("Find the capital of France.", &["search population"]),
            ("compare capital cities", &["lookup"]),
        ]);
        let got = retrieve_episodes(&p, "capital France population today", 2);
        assert_eq!(got.iter().map(|e| e.episode_id).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn retrieval_tie_prefers_later() {
        let p = with_episodes(&[("open the vault", &[]), ("open the door", &[])]);
        let got = retrieve_episodes(&p, "open", 2);
        assert_eq!(got.iter().map(|e| e.episode_id).collect::<Vec<_>>(), vec![1, 0]);
    }
}
