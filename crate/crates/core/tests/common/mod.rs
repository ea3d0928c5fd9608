#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robusteam::instance::{generate_instance, generate_uncertainty, GenerationConfig, Instance, UncertaintySpec};
use robusteam::models::{ModelKind, Solution};

/// Generator settings with enough qualified staff that small instances have
/// nontrivial optima.
pub fn staffed() -> GenerationConfig {
    GenerationConfig {
        qualification_prob: 0.7,
        ..Default::default()
    }
}

pub fn tiny_instances(count: usize, seed: u64) -> Vec<(Instance, UncertaintySpec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let nj = rng.gen_range(2..=4);
            let ne = rng.gen_range(2..=4);
            let s = seed * 1000 + i as u64;
            let inst = generate_instance(nj, ne, s, &staffed()).unwrap();
            let unc = generate_uncertainty(&inst, s);
            (inst, unc)
        })
        .collect()
}

/// A random feasible plan: employees dropped into random teams, jobs handed
/// to random covering teams while the horizon allows.
pub fn random_plan(inst: &Instance, kind: ModelKind, rng: &mut ChaCha8Rng) -> Solution {
    let nt = inst.team_bound();
    let mut teams = vec![Vec::new(); nt];
    for m in 0..inst.n_employees() {
        if rng.gen_bool(0.9) {
            teams[rng.gen_range(0..nt)].push(m);
        }
    }
    let profiles: Vec<_> = teams.iter().map(|t| inst.team_profile(t)).collect();
    let mut routes = vec![Vec::new(); nt];
    let mut clock = vec![0.0; nt];
    let mut last = vec![0usize; nt];
    let mut jobs: Vec<usize> = inst.jobs().collect();
    jobs.shuffle(rng);
    for j in jobs {
        let fits: Vec<usize> = (0..nt)
            .filter(|&t| {
                !teams[t].is_empty()
                    && inst.profile_covers(&profiles[t], j)
                    && clock[t] + inst.travel(last[t], j) + inst.processing(j) <= inst.e_max()
            })
            .collect();
        if fits.is_empty() || rng.gen_bool(0.1) {
            continue;
        }
        let t = fits[rng.gen_range(0..fits.len())];
        clock[t] += inst.travel(last[t], j) + inst.processing(j);
        last[t] = j;
        routes[t].push(j);
    }
    let mut sol = Solution::from_plan(inst, kind, &teams, &routes);
    sol.verify(inst).expect("random plans are feasible by construction");
    sol
}
