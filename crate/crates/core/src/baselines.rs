//! Comparison policies: uniform random and ε-greedy alternating least
//! squares.

use rand::Rng;

use crate::alb::{ls_user_update, record_and_refit_item};
use crate::error::{AlbError, Result};
use crate::linalg::dot;
use crate::policy::{argmax_position, Policy, Selection};
use crate::seeding::Rng as StreamRng;
use crate::state::{init_model, FactorModel, Hyperparameters, InteractionLog, RidgeAnchor};

/// Uniform choice over `candidates`. Each candidate receives an independent
/// uniform score and the highest wins, so the scores double as a random
/// ranking.
pub fn random_policy_step<R: Rng + ?Sized>(candidates: &[usize], rng: &mut R) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(AlbError::EmptyCandidateSet);
    }
    let scores: Vec<f64> = candidates.iter().map(|_| rng.random::<f64>()).collect();
    let p = argmax_position(candidates, &scores);
    Ok(Selection {
        item: candidates[p],
        scores,
    })
}

#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: StreamRng,
}

impl RandomPolicy {
    pub fn new(rng: StreamRng) -> Self {
        Self { rng }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn select(&mut self, _user: usize, candidates: &[usize]) -> Result<Selection> {
        random_policy_step(candidates, &mut self.rng)
    }

    fn observe(&mut self, _user: usize, _item: usize, _rating: f64) -> Result<()> {
        Ok(())
    }
}

/// With probability ε a uniform candidate, otherwise `argmax_j A_i·B_j`.
/// Observations refit the item row and then the user row by ridge
/// regression over the logged snapshots, with no exploration bonus.
#[derive(Debug, Clone)]
pub struct EpsilonGreedyPolicy {
    model: FactorModel,
    log: InteractionLog,
    hp: Hyperparameters,
    epsilon: f64,
    rng: StreamRng,
    explorations: usize,
    steps: usize,
}

impl EpsilonGreedyPolicy {
    pub fn new<R: Rng + ?Sized>(
        n_users: usize,
        n_items: usize,
        hp: Hyperparameters,
        epsilon: f64,
        init: &mut R,
        rng: StreamRng,
    ) -> Result<Self> {
        hp.validate()?;
        let model = init_model(n_users, n_items, hp.rank, hp.init_sigma1, hp.init_sigma2, init)?;
        Self::from_model(model, hp, epsilon, rng)
    }

    pub fn from_model(model: FactorModel, hp: Hyperparameters, epsilon: f64, rng: StreamRng) -> Result<Self> {
        hp.validate()?;
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(AlbError::Config(format!("epsilon must lie in [0, 1], got {epsilon}")));
        }
        Ok(Self {
            log: InteractionLog::new(model.rank()),
            model,
            hp,
            epsilon,
            rng,
            explorations: 0,
            steps: 0,
        })
    }

    pub fn model(&self) -> &FactorModel {
        &self.model
    }

    pub fn log(&self) -> &InteractionLog {
        &self.log
    }

    /// Steps on which the random branch was taken.
    pub fn explorations(&self) -> usize {
        self.explorations
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// One ε-greedy decision against explicit state.
pub fn egreedy_mf_step<R: Rng + ?Sized>(
    model: &FactorModel,
    user: usize,
    candidates: &[usize],
    epsilon: f64,
    rng: &mut R,
) -> Result<(Selection, bool)> {
    if candidates.is_empty() {
        return Err(AlbError::EmptyCandidateSet);
    }
    let explore = epsilon >= 1.0 || (epsilon > 0.0 && rng.random::<f64>() < epsilon);
    if explore {
        return Ok((random_policy_step(candidates, rng)?, true));
    }
    let a = model.users.row(user);
    let mut scores = Vec::with_capacity(candidates.len());
    for &j in candidates {
        if j >= model.n_items() {
            return Err(AlbError::ItemOutOfRange {
                item: j,
                items: model.n_items(),
            });
        }
        scores.push(dot(a, model.items.row(j)));
    }
    let p = argmax_position(candidates, &scores);
    Ok((
        Selection {
            item: candidates[p],
            scores,
        },
        false,
    ))
}

impl Policy for EpsilonGreedyPolicy {
    fn name(&self) -> &str {
        "egreedy"
    }

    fn select(&mut self, user: usize, candidates: &[usize]) -> Result<Selection> {
        let (sel, explored) = egreedy_mf_step(&self.model, user, candidates, self.epsilon, &mut self.rng)?;
        self.steps += 1;
        self.explorations += usize::from(explored);
        Ok(sel)
    }

    fn observe(&mut self, user: usize, item: usize, rating: f64) -> Result<()> {
        record_and_refit_item(&mut self.model, &mut self.log, &self.hp, user, item, rating)?;
        let anchor = (self.hp.ridge_anchor == RidgeAnchor::CurrentEstimate).then(|| self.model.users.row(user).to_vec());
        let a = ls_user_update(&self.log, user, &self.hp, anchor.as_deref())?;
        self.model.users.set_row(user, &a);
        self.log.rewrite_user_rows(user, &a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alb::AlbPolicy;
    use crate::env::{make_gaussian_env, Environment};
    use crate::seeding::{stream, Stream};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_single_candidate() {
        let mut r = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(random_policy_step(&[7], &mut r).unwrap().item, 7);
        assert!(matches!(random_policy_step(&[], &mut r), Err(AlbError::EmptyCandidateSet)));
    }

    #[test]
    fn random_is_uniform_and_reproducible() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let first = (0..n).filter(|_| random_policy_step(&[3, 8], &mut r).unwrap().item == 3).count();
        let freq = first as f64 / n as f64;
        assert!((0.45..=0.55).contains(&freq), "{freq}");
        let mut a = RandomPolicy::new(stream(5, Stream::Policy));
        let mut b = RandomPolicy::new(stream(5, Stream::Policy));
        let cands: Vec<usize> = (0..10).collect();
        for _ in 0..100 {
            assert_eq!(a.select(0, &cands).unwrap(), b.select(0, &cands).unwrap());
        }
    }

    fn gaussian(seed: u64) -> Environment {
        make_gaussian_env(8, 12, 3, 1.0, 1.0, 0.5, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    fn hp3() -> Hyperparameters {
        Hyperparameters { rank: 3, lambda1: 0.1, lambda2: 0.1, ..Default::default() }
    }

    #[test]
    fn epsilon_one_matches_random() {
        let env = gaussian(2);
        let mut eg = EpsilonGreedyPolicy::new(8, 12, hp3(), 1.0, &mut ChaCha8Rng::seed_from_u64(3), stream(4, Stream::Policy)).unwrap();
        let mut rnd = RandomPolicy::new(stream(4, Stream::Policy));
        let mut noise = ChaCha8Rng::seed_from_u64(5);
        for t in 0..200 {
            let user = t % 8;
            let c = env.candidate_set(user);
            let a = eg.select(user, c).unwrap().item;
            let b = rnd.select(user, c).unwrap().item;
            assert_eq!(a, b);
            let y = env.observe(user, a, &mut noise).unwrap();
            eg.observe(user, a, y).unwrap();
        }
    }

    #[test]
    fn epsilon_zero_exact_factors_first_choice_is_best() {
        let env = gaussian(6);
        let (a, b) = env.true_factors().unwrap();
        let mut eg = EpsilonGreedyPolicy::from_model(
            FactorModel::new(a.clone(), b.clone()).unwrap(),
            hp3(),
            0.0,
            stream(0, Stream::Policy),
        )
        .unwrap();
        for user in 0..8 {
            let sel = eg.select(user, env.candidate_set(user)).unwrap();
            assert_eq!(sel.item, env.best_item(user).unwrap().0);
            let y = env.true_rating(user, sel.item).unwrap();
            assert_eq!(env.instantaneous_regret(user, y), 0.0);
        }
    }

    #[test]
    fn exploration_fraction() {
        let mut eg = EpsilonGreedyPolicy::new(1, 5, hp3(), 0.1, &mut ChaCha8Rng::seed_from_u64(7), stream(8, Stream::Policy)).unwrap();
        let cands: Vec<usize> = (0..5).collect();
        for _ in 0..10_000 {
            eg.select(0, &cands).unwrap();
        }
        let frac = eg.explorations() as f64 / eg.steps() as f64;
        assert!((0.08..=0.12).contains(&frac), "{frac}");
    }

    #[test]
    fn greedy_matches_alb_without_exploration_bonus() {
        // A single user keeps both policies' state in lockstep: the stored
        // ε-greedy user row equals the ALB ellipsoid center at every step.
        let env = make_gaussian_env(1, 20, 3, 1.0, 1.0, 0.5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let h = Hyperparameters { sigma: 0.0, s: 0.0, ..hp3() };
        let init = crate::state::init_model(1, 20, 3, 1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
        let mut zeroed = init.clone();
        zeroed.users.set_row(0, &[0.0; 3]);
        let mut eg = EpsilonGreedyPolicy::from_model(zeroed, h.clone(), 0.0, stream(0, Stream::Policy)).unwrap();
        let mut alb = AlbPolicy::from_model(init, h).unwrap();
        let mut noise = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let c = env.candidate_set(0);
            let a = alb.select(0, c).unwrap();
            let e = eg.select(0, c).unwrap();
            assert_eq!(a.item, e.item);
            let y = env.observe(0, a.item, &mut noise).unwrap();
            alb.observe(0, a.item, y).unwrap();
            eg.observe(0, e.item, y).unwrap();
        }
    }

    #[test]
    fn greedy_equivalence_on_shared_state() {
        // Run ε-greedy for a while, then give ALB (c = 0) the same state with
        // every user row replaced by its ellipsoid center.
        let env = gaussian(12);
        let h = Hyperparameters { sigma: 0.0, s: 0.0, ..hp3() };
        let mut eg = EpsilonGreedyPolicy::new(8, 12, h.clone(), 0.2, &mut ChaCha8Rng::seed_from_u64(13), stream(14, Stream::Policy)).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..150 {
            let user = r.random_range(0..8);
            let sel = eg.select(user, env.candidate_set(user)).unwrap();
            let y = env.observe(user, sel.item, &mut r).unwrap();
            eg.observe(user, sel.item, y).unwrap();
        }
        for user in 0..8 {
            let ell = crate::alb::build_confidence(eg.log(), user, &h).unwrap();
            let mut model = eg.model().clone();
            model.users.set_row(user, &ell.center);
            let greedy = egreedy_mf_step(&model, user, env.candidate_set(user), 0.0, &mut r).unwrap().0;
            let choice = crate::alb::oful_step(&ell, &model.items, env.candidate_set(user)).unwrap();
            assert_eq!(greedy.item, choice.item);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #[test]
            fn selections_stay_in_candidate_set(
                seed in 0u64..500,
                cands in proptest::collection::btree_set(0usize..12, 1..12),
                eps in 0.0f64..=1.0,
            ) {
                let cands: Vec<usize> = cands.into_iter().collect();
                let env = gaussian(seed);
                let mut rnd = RandomPolicy::new(stream(seed, Stream::Policy));
                let mut eg = EpsilonGreedyPolicy::new(8, 12, hp3(), eps, &mut ChaCha8Rng::seed_from_u64(seed), stream(seed, Stream::Policy)).unwrap();
                let mut alb = AlbPolicy::new(8, 12, hp3(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                let mut r = ChaCha8Rng::seed_from_u64(seed + 1);
                for _ in 0..20 {
                    let user = r.random_range(0..8);
                    for p in [&mut rnd as &mut dyn Policy, &mut eg, &mut alb] {
                        let sel = p.select(user, &cands).unwrap();
                        prop_assert!(cands.contains(&sel.item));
                        prop_assert_eq!(sel.scores.len(), cands.len());
                        let y = env.observe(user, sel.item, &mut r).unwrap();
                        p.observe(user, sel.item, y).unwrap();
                    }
                }
            }
        }
    }
}
