#[path = "support/corpus_gen.rs"]
mod corpus_gen;
#[path = "support/miner_oracle.rs"]
mod miner_oracle;

use std::collections::BTreeMap;

use cogloop_core::evolution::mine_composites;

fn compare(seed: u64) -> Result<(), String> {
    let case = corpus_gen::case(seed);
    let mined = mine_composites(&case.corpus, &case.verdicts, case.min_support, case.min_success, case.max_len)
        .map_err(|e| e.to_string())?;
    let expected = miner_oracle::enumerate(&case.corpus, &case.verdicts, case.min_support, case.min_success, case.max_len);
    if mined.len() != expected.len() {
        return Err(format!("seed {seed}: {} mined vs {} expected", mined.len(), expected.len()));
    }
    for (m, e) in mined.iter().zip(&expected) {
        let names: Vec<String> = m.candidate.steps.iter().map(|s| s.kind.name()).collect();
        let bindings: BTreeMap<_, _> = m
            .candidate
            .steps
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.bindings.iter().map(move |(k, b)| ((i, k.clone()), b.clone())))
            .collect();
        if names != e.names
            || m.support != e.support
            || m.success_rate != e.success_rate
            || bindings != e.bindings
            || m.provenance != e.provenance
        {
            return Err(format!("seed {seed}: {names:?} differs from oracle {:?}", e.names));
        }
    }
    Ok(())
}

#[test]
fn miner_matches_brute_force() {
    let failures: Vec<String> = (0..400).filter_map(|seed| compare(seed).err()).collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn suite_exercises_nonempty_outputs() {
    let nonempty = (0..400)
        .filter(|&seed| {
            let case = corpus_gen::case(seed);
            !miner_oracle::enumerate(&case.corpus, &case.verdicts, case.min_support, case.min_success, case.max_len).is_empty()
        })
        .count();
    assert!(nonempty > 50, "only {nonempty} cases mined anything");
}
