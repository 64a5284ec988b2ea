//! Invariants over randomized inputs.

use proptest::prelude::*;
use tsmcts::gumbel_mcts::GumbelMctsConfig;
use tsmcts::mdp::{random_mdp, PolicyTable};
use tsmcts::operators::GmzConfig;
use tsmcts::planner::PlannerConfig;
use tsmcts::smc::{occupancy, select, Particle, ResamplingScheme, RootStatistic, SmcConfig};
use tsmcts::tsmcts::{compute_schedule, SurvivorRule, TsmctsConfig};
use tsmcts::{PlanContext, Planner, SearchValues, StreamKey};

fn particles(weights: Vec<f64>, actions: usize) -> Vec<Particle> {
    weights
        .into_iter()
        .enumerate()
        .map(|(i, weight)| Particle {
            state: i,
            root_action: i % actions,
            weight,
            ret: i as f64,
            depth: 1,
            alive: true,
        })
        .collect()
}

proptest! {
    #[test]
    fn selection_keeps_count_and_resets_weights(
        weights in proptest::collection::vec(0.0f64..5.0, 1..40),
        seed in any::<u64>(),
        systematic in any::<bool>(),
    ) {
        let n = weights.len();
        let mut ps = particles(weights, 3);
        let original = ps.clone();
        let scheme = if systematic { ResamplingScheme::Systematic } else { ResamplingScheme::Multinomial };
        select(&mut ps, scheme, &mut StreamKey::new(seed).rng());
        prop_assert_eq!(ps.len(), n);
        for p in &ps {
            prop_assert_eq!(p.weight, 1.0);
            // copies carry the whole particle state
            let src = &original[p.state];
            prop_assert_eq!(p.root_action, src.root_action);
            prop_assert_eq!(p.ret, src.ret);
            prop_assert!(src.weight > 0.0 || original.iter().all(|q| q.weight == 0.0));
        }
    }

    #[test]
    fn occupancy_is_a_distribution(weights in proptest::collection::vec(0.0f64..5.0, 1..40)) {
        let occ = occupancy(&particles(weights, 4), 4);
        prop_assert!((occ.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(occ.iter().all(|p| *p >= 0.0));
    }

    #[test]
    fn schedule_spends_exactly_n_per_iteration(n in 2usize..64, t in 1usize..32, k in 1u32..4) {
        let m1 = 1usize << k;
        prop_assume!(n >= m1 && t >= k as usize);
        let s = compute_schedule(n, t, m1).unwrap();
        prop_assert_eq!(s.num_iterations, k as usize);
        prop_assert_eq!(s.t_sh, (t / k as usize).max(1));
        for (i, per) in s.n_per_action.iter().enumerate() {
            prop_assert_eq!(per.len(), m1 >> i);
            prop_assert_eq!(per.iter().sum::<usize>(), n);
            prop_assert!(per.windows(2).all(|w| w[0] >= w[1]));
        }
        prop_assert!(s.particle_steps() <= (n * t) as u64);
        if t % k as usize == 0 {
            prop_assert_eq!(s.particle_steps(), (n * t) as u64);
        }
    }
}

fn planners(n: usize, t: usize, period: usize, beta: f64) -> Vec<PlannerConfig> {
    let smc = SmcConfig {
        num_particles: n,
        depth: t,
        resampling_period: period,
        search: GmzConfig::new(beta),
        ..Default::default()
    };
    vec![
        PlannerConfig::RlSmc(smc.clone()),
        PlannerConfig::RlSmc(SmcConfig {
            root_statistic: RootStatistic::LastReturn,
            ..smc.clone()
        }),
        PlannerConfig::RlSmc(SmcConfig {
            root_statistic: RootStatistic::MeanReturn,
            ..smc.clone()
        }),
        PlannerConfig::Smcts(SmcConfig {
            resampling: ResamplingScheme::Systematic,
            ..smc
        }),
        PlannerConfig::Tsmcts(TsmctsConfig {
            num_particles: n.max(4),
            depth: t.max(2),
            resampling_period: period,
            ..Default::default()
        }),
        PlannerConfig::Tsmcts(TsmctsConfig {
            num_particles: n.max(4),
            depth: t.max(2),
            survivor_rule: SurvivorRule::QValue,
            ..Default::default()
        }),
        PlannerConfig::GumbelMcts(GumbelMctsConfig {
            budget: (n * t).max(8),
            ..Default::default()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn planner_outputs_are_valid_and_reproducible(
        mdp_seed in 0u64..1000,
        key in any::<u64>(),
        n in 1usize..12,
        t in 1usize..10,
        period in 1usize..5,
        beta in 0.0f64..20.0,
    ) {
        let mdp = random_mdp(8, 4, 3, 0.9, mdp_seed).unwrap();
        let prior = PolicyTable::uniform(8, 4);
        let v: Vec<f64> = (0..8).map(|s| (s as f64 * 0.37).sin()).collect();
        let values = SearchValues::bootstrap(&mdp, &v).unwrap();
        let ctx = PlanContext::new(&mdp, &prior, &values).unwrap();
        for planner in planners(n, t, period, beta) {
            let a = planner.plan(&ctx, 0, StreamKey::new(key)).unwrap();
            let b = planner.plan(&ctx, 0, StreamKey::new(key)).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!((a.policy.iter().sum::<f64>() - 1.0).abs() < 1e-9, "{}", planner.name());
            prop_assert!(a.policy.iter().all(|p| *p >= 0.0));
            prop_assert!(a.v_search.is_finite());
            prop_assert_eq!(a.active_actions, a.policy.iter().filter(|p| **p > 0.0).count());
            match &planner {
                PlannerConfig::RlSmc(c) | PlannerConfig::Smcts(c) => {
                    prop_assert_eq!(a.counters.model_expansions, (c.num_particles * c.depth) as u64);
                }
                PlannerConfig::Tsmcts(_) => {
                    prop_assert_eq!(a.counters.model_expansions, a.schedule.as_ref().unwrap().expected_expansions());
                    prop_assert_eq!(a.active_actions, 4);
                }
                PlannerConfig::GumbelMcts(c) => {
                    prop_assert_eq!(a.counters.model_expansions, c.budget as u64);
                }
            }
        }
    }

    #[test]
    fn smcts_support_covers_sampled_root_actions(key in any::<u64>(), n in 1usize..16) {
        let mdp = random_mdp(6, 3, 2, 0.9, 5).unwrap();
        let prior = PolicyTable::uniform(6, 3);
        let values = SearchValues::bootstrap(&mdp, &[0.5; 6]).unwrap();
        let ctx = PlanContext::new(&mdp, &prior, &values).unwrap();
        let cfg = SmcConfig { num_particles: n, depth: 6, resampling_period: 1, ..Default::default() };
        let out = tsmcts::smcts::run_smcts(&ctx, 0, &cfg, StreamKey::new(key)).unwrap();
        let sampled = tsmcts::smc::init_particles(&ctx, 0, n, StreamKey::new(key));
        for p in sampled {
            prop_assert!(out.policy[p.root_action] > 0.0);
        }
    }
}
