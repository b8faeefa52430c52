//! Pairing natural and simulated dialogues for one evaluator.
//!
//! A pair joins a human-collected dialogue with a simulated one for the same
//! persona and goal. Within one evaluator's allocation every pair comes from
//! a distinct (collection user, goal) and no dialogue is used twice.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NaturalRef {
    pub id: String,
    /// The participant who produced the dialogue during collection.
    pub collection_user: String,
    pub persona_id: String,
    pub goal_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SimulatedRef {
    pub id: String,
    pub model_id: String,
    pub persona_id: String,
    pub goal_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PresentationOrder {
    NaturalLeft,
    SimulatedLeft,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationPair {
    pub pair_id: String,
    pub participant: String,
    pub natural_id: String,
    pub simulated_id: String,
    pub collection_user: String,
    pub persona_id: String,
    pub goal_id: String,
    pub model_id: String,
    pub order: PresentationOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BindingConstraint {
    /// Too few simulated dialogues share a persona and goal with a natural one.
    PersonaGoalMatch,
    /// Enough matches exist, but not across distinct (collection user, goal) keys.
    DistinctUserGoal,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AllocationError {
    #[error("cannot allocate {requested} pairs: at most {feasible} satisfy {binding:?}")]
    Infeasible { requested: usize, feasible: usize, binding: BindingConstraint },
}

/// Maximum bipartite matching by augmenting paths. `adj[l]` lists the right
/// vertices left vertex `l` may take. Left vertices are tried in order.
fn max_matching(adj: &[Vec<usize>], n_right: usize) -> Vec<Option<usize>> {
    fn augment(l: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &r in &adj[l] {
            if !seen[r] {
                seen[r] = true;
                if owner[r].is_none_or(|other| augment(other, adj, seen, owner)) {
                    owner[r] = Some(l);
                    return true;
                }
            }
        }
        false
    }
    let mut owner = vec![None; n_right];
    for l in 0..adj.len() {
        let mut seen = vec![false; n_right];
        augment(l, adj, &mut seen, &mut owner);
    }
    let mut matched = vec![None; adj.len()];
    for (r, l) in owner.iter().enumerate() {
        if let Some(l) = l {
            matched[*l] = Some(r);
        }
    }
    matched
}

/// Largest number of pairs one evaluator could receive from these pools.
pub fn max_feasible_pairs(natural: &[NaturalRef], simulated: &[SimulatedRef]) -> usize {
    let (_, adj) = class_graph(natural, simulated);
    max_matching(&adj, simulated.len()).iter().flatten().count()
}

/// Groups naturals by (collection user, goal) and links each group to the
/// simulated dialogues any of its members could pair with.
fn class_graph(natural: &[NaturalRef], simulated: &[SimulatedRef]) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let mut by_key: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
    for (i, n) in natural.iter().enumerate() {
        by_key.entry((n.collection_user.as_str(), n.goal_id.as_str())).or_default().push(i);
    }
    let classes: Vec<Vec<usize>> = by_key.into_values().collect();
    let adj = classes
        .iter()
        .map(|members| {
            let keys: BTreeSet<(&str, &str)> =
                members.iter().map(|&i| (natural[i].persona_id.as_str(), natural[i].goal_id.as_str())).collect();
            simulated
                .iter()
                .enumerate()
                .filter(|(_, s)| keys.contains(&(s.persona_id.as_str(), s.goal_id.as_str())))
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    (classes, adj)
}

/// Matches naturals to simulated dialogues one-to-one on persona and goal,
/// ignoring the distinct-(user, goal) rule. Used to name the binding constraint.
fn unconstrained_matches(natural: &[NaturalRef], simulated: &[SimulatedRef]) -> usize {
    let adj: Vec<Vec<usize>> = natural
        .iter()
        .map(|n| {
            simulated
                .iter()
                .enumerate()
                .filter(|(_, s)| s.persona_id == n.persona_id && s.goal_id == n.goal_id)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    max_matching(&adj, simulated.len()).iter().flatten().count()
}

fn participant_seed(participant: &str, seed: u64) -> u64 {
    let digest = Sha256::new().chain_update(seed.to_le_bytes()).chain_update(participant.as_bytes()).finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Allocates `k` pairs to `participant`. The same participant, pools and
/// seed always give the same allocation; either all `k` pairs are returned
/// or none.
pub fn allocate_pairs(
    participant: &str,
    natural: &[NaturalRef],
    simulated: &[SimulatedRef],
    k: usize,
    seed: u64,
) -> Result<Vec<EvaluationPair>, AllocationError> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(participant_seed(participant, seed));
    let (mut classes, mut adj) = class_graph(natural, simulated);
    // shuffle so that repeated allocations spread over the pools
    let mut perm: Vec<usize> = (0..classes.len()).collect();
    perm.shuffle(&mut rng);
    classes = perm.iter().map(|&i| std::mem::take(&mut classes[i])).collect();
    adj = perm.iter().map(|&i| std::mem::take(&mut adj[i])).collect();
    for (members, candidates) in classes.iter_mut().zip(adj.iter_mut()) {
        members.shuffle(&mut rng);
        candidates.shuffle(&mut rng);
    }
    let matched = max_matching(&adj, simulated.len());
    let mut pairs: Vec<(usize, usize)> = matched
        .iter()
        .enumerate()
        .filter_map(|(c, r)| {
            let r = (*r)?;
            let s = &simulated[r];
            let n = classes[c]
                .iter()
                .copied()
                .find(|&i| natural[i].persona_id == s.persona_id && natural[i].goal_id == s.goal_id)?;
            Some((n, r))
        })
        .collect();
    if pairs.len() < k {
        let binding = if unconstrained_matches(natural, simulated) < k {
            BindingConstraint::PersonaGoalMatch
        } else {
            BindingConstraint::DistinctUserGoal
        };
        return Err(AllocationError::Infeasible { requested: k, feasible: pairs.len(), binding });
    }
    pairs.shuffle(&mut rng);
    pairs.truncate(k);
    Ok(pairs
        .into_iter()
        .enumerate()
        .map(|(i, (n, s))| {
            let (n, s) = (&natural[n], &simulated[s]);
            let order = if rng.random_bool(0.5) { PresentationOrder::NaturalLeft } else { PresentationOrder::SimulatedLeft };
            EvaluationPair {
                pair_id: format!("{participant}-{i:03}"),
                participant: participant.to_string(),
                natural_id: n.id.clone(),
                simulated_id: s.id.clone(),
                collection_user: n.collection_user.clone(),
                persona_id: n.persona_id.clone(),
                goal_id: n.goal_id.clone(),
                model_id: s.model_id.clone(),
                order,
            }
        })
        .collect())
}
