use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roleplay_core::study::{allocate_pairs, AllocationError, EvaluationPair, NaturalRef, PresentationOrder, SimulatedRef};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::{ensure, CriterionResult, Outcome};

const ORACLE_POOLS: usize = 300;
const ALLOCATIONS: usize = 1_000;
const PAIRS_PER_ALLOCATION: usize = 40;

/// Most pairs obtainable by exhaustive search: each natural dialogue is
/// either skipped or paired with an unused simulated dialogue of the same
/// persona and goal, provided its (collection user, goal) is still free.
fn brute_force_max(natural: &[NaturalRef], simulated: &[SimulatedRef]) -> usize {
    fn go(
        i: usize,
        natural: &[NaturalRef],
        simulated: &[SimulatedRef],
        used_sim: &mut Vec<bool>,
        used_keys: &mut BTreeSet<(String, String)>,
    ) -> usize {
        if i == natural.len() {
            return 0;
        }
        let mut best = go(i + 1, natural, simulated, used_sim, used_keys);
        let n = &natural[i];
        let key = (n.collection_user.clone(), n.goal_id.clone());
        if used_keys.contains(&key) {
            return best;
        }
        for (j, s) in simulated.iter().enumerate() {
            if !used_sim[j] && s.persona_id == n.persona_id && s.goal_id == n.goal_id {
                used_sim[j] = true;
                used_keys.insert(key.clone());
                best = best.max(1 + go(i + 1, natural, simulated, used_sim, used_keys));
                used_keys.remove(&key);
                used_sim[j] = false;
            }
        }
        best
    }
    go(0, natural, simulated, &mut vec![false; simulated.len()], &mut BTreeSet::new())
}

/// A small random pool. Personas are shared between users now and then so
/// the persona/goal match and the (user, goal) rule can disagree.
fn random_pool(rng: &mut ChaCha8Rng) -> (Vec<NaturalRef>, Vec<SimulatedRef>) {
    let users = rng.random_range(1..=5);
    let goals = rng.random_range(1..=4);
    let personas = rng.random_range(1..=users);
    let n_nat = rng.random_range(0..=9);
    let n_sim = rng.random_range(0..=9);
    let natural = (0..n_nat)
        .map(|i| NaturalRef {
            id: format!("n{i}"),
            collection_user: format!("u{}", rng.random_range(0..users)),
            persona_id: format!("p{}", rng.random_range(0..personas)),
            goal_id: format!("g{}", rng.random_range(0..goals)),
        })
        .collect();
    let simulated = (0..n_sim)
        .map(|i| SimulatedRef {
            id: format!("s{i}"),
            model_id: "m".into(),
            persona_id: format!("p{}", rng.random_range(0..personas)),
            goal_id: format!("g{}", rng.random_range(0..goals)),
        })
        .collect();
    (natural, simulated)
}

fn check_valid(pairs: &[EvaluationPair], natural: &[NaturalRef], simulated: &[SimulatedRef]) -> Result<(), String> {
    let keys: BTreeSet<_> = pairs.iter().map(|p| (&p.collection_user, &p.goal_id)).collect();
    ensure!(keys.len() == pairs.len(), "duplicate (collection user, goal) in allocation");
    let nat_ids: BTreeSet<_> = pairs.iter().map(|p| &p.natural_id).collect();
    let sim_ids: BTreeSet<_> = pairs.iter().map(|p| &p.simulated_id).collect();
    ensure!(nat_ids.len() == pairs.len() && sim_ids.len() == pairs.len(), "a dialogue was used twice");
    for p in pairs {
        let n = natural.iter().find(|n| n.id == p.natural_id).ok_or("unknown natural id")?;
        let s = simulated.iter().find(|s| s.id == p.simulated_id).ok_or("unknown simulated id")?;
        ensure!(n.persona_id == s.persona_id && n.goal_id == s.goal_id, "pair {} mismatches persona/goal", p.pair_id);
        ensure!(n.collection_user == p.collection_user && n.goal_id == p.goal_id, "pair {} mislabelled", p.pair_id);
    }
    Ok(())
}

/// Every collection user wrote one dialogue per goal; one simulated
/// counterpart exists per natural dialogue.
fn full_pool(users: usize, goals: usize) -> (Vec<NaturalRef>, Vec<SimulatedRef>) {
    let mut natural = Vec::new();
    let mut simulated = Vec::new();
    for u in 0..users {
        for g in 0..goals {
            natural.push(NaturalRef {
                id: format!("n{u}-{g}"),
                collection_user: format!("u{u}"),
                persona_id: format!("u{u}"),
                goal_id: format!("g{g}"),
            });
            simulated.push(SimulatedRef {
                id: format!("s{u}-{g}"),
                model_id: "mixtral".into(),
                persona_id: format!("u{u}"),
                goal_id: format!("g{g}"),
            });
        }
    }
    (natural, simulated)
}

pub fn run() -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa110c);
    let mut infeasible_checked = 0;
    for pool in 0..ORACLE_POOLS {
        let (natural, simulated) = random_pool(&mut rng);
        let max = brute_force_max(&natural, &simulated);
        let participant = format!("e{pool}");
        for k in 0..=max {
            let pairs = allocate_pairs(&participant, &natural, &simulated, k, pool as u64)
                .map_err(|e| format!("pool {pool}: k={k} <= oracle max {max} rejected: {e}"))?;
            ensure!(pairs.len() == k, "pool {pool}: asked {k}, got {}", pairs.len());
            check_valid(&pairs, &natural, &simulated).map_err(|e| format!("pool {pool}, k={k}: {e}"))?;
        }
        match allocate_pairs(&participant, &natural, &simulated, max + 1, pool as u64) {
            Err(AllocationError::Infeasible { feasible, .. }) => {
                ensure!(feasible == max, "pool {pool}: allocator reports {feasible} feasible, oracle {max}");
                infeasible_checked += 1;
            }
            Ok(_) => return Err(format!("pool {pool}: allocated {} pairs, oracle max {max}", max + 1)),
        }
    }

    // largest pool shape: 20 collection users x 10 goals
    let (natural, simulated) = full_pool(20, 10);
    let mut natural_left = 0usize;
    let mut total = 0usize;
    for a in 0..ALLOCATIONS {
        let pairs = allocate_pairs(&format!("evaluator-{a}"), &natural, &simulated, PAIRS_PER_ALLOCATION, 2024)
            .map_err(|e| e.to_string())?;
        ensure!(pairs.len() == PAIRS_PER_ALLOCATION, "allocation {a} has {} pairs", pairs.len());
        check_valid(&pairs, &natural, &simulated).map_err(|e| format!("allocation {a}: {e}"))?;
        natural_left += pairs.iter().filter(|p| p.order == PresentationOrder::NaturalLeft).count();
        total += pairs.len();
    }
    let expected = total as f64 / 2.0;
    let simulated_left = total - natural_left;
    let chi2 = [natural_left, simulated_left].iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum::<f64>();
    let p = 1.0 - ChiSquared::new(1.0).map_err(|e| e.to_string())?.cdf(chi2);
    ensure!(p > 0.01, "presentation order unbalanced: {natural_left}/{total} natural-left, chi2 {chi2:.3}, p {p:.4}");

    Ok(Outcome::Pass(format!(
        "{ORACLE_POOLS} random pools match exhaustive search ({infeasible_checked} infeasible requests named); \
         {ALLOCATIONS} allocations x {PAIRS_PER_ALLOCATION}: {natural_left}/{total} natural-left, chi2 {chi2:.3}, p {p:.3}"
    )))
}
