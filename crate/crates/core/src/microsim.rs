//! Individual-level simulation of the illness-death model with
//! time-inhomogeneous competing risks.
//!
//! Event times are sampled by inverting the cumulative hazard: draw
//! e ~ Exp(1) and solve ∫ λ = e. The hazard integrals of this rate family
//! are closed-form (Gompertz mortalities, piecewise-linear incidence), so
//! the only numerical step is a bisection on the event time. The first
//! event out of Non-diseased competes incidence against death; the event
//! type is decided by the hazard ratio at the sampled time.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rates::{background_mortality_integral, incidence_integral, RateModel, ThetaParams};

/// Absolute time tolerance of the event-time bisection.
const BISECT_TOL: f64 = 1e-10;

/// Rates together with their integrals, as the event-time sampler needs
/// them. The integrals must be exact (closed-form) for the inversion to
/// be bias-free.
pub trait HazardModel: RateModel {
    /// ∫_a^b c12
    fn incidence_cumhaz(&self, a: f64, b: f64) -> f64;
    /// ∫_a^b c13
    fn background_cumhaz(&self, a: f64, b: f64) -> f64;
    /// ∫_a^b c23
    fn diseased_cumhaz(&self, a: f64, b: f64) -> f64;
}

impl HazardModel for ThetaParams {
    fn incidence_cumhaz(&self, a: f64, b: f64) -> f64 {
        incidence_integral(self, a, b)
    }

    fn background_cumhaz(&self, a: f64, b: f64) -> f64 {
        background_mortality_integral(a, b)
    }

    fn diseased_cumhaz(&self, a: f64, b: f64) -> f64 {
        self.mortality_rate_ratio * background_mortality_integral(a, b)
    }
}

/// One of the three health states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum State {
    NonDiseased,
    Diseased,
    Dead,
}

impl State {
    /// Index 0/1/2 in the (Non-diseased, Diseased, Dead) ordering.
    pub fn index(&self) -> usize {
        match self {
            State::NonDiseased => 0,
            State::Diseased => 1,
            State::Dead => 2,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            State::NonDiseased => "Non-diseased",
            State::Diseased => "Diseased",
            State::Dead => "Dead",
        }
    }
}

/// One subject's simulated life course over `[0, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    onset_time: Option<f64>,
    death_time: Option<f64>,
    horizon: f64,
}

impl Trajectory {
    pub fn new(onset_time: Option<f64>, death_time: Option<f64>, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon must be > 0, got {horizon}")));
        }
        for t in [onset_time, death_time].into_iter().flatten() {
            if !(0.0..=horizon).contains(&t) {
                return Err(Error::InvalidParameter(format!(
                    "event time {t} outside [0, {horizon}]"
                )));
            }
        }
        if let (Some(onset), Some(death)) = (onset_time, death_time) {
            if onset >= death {
                return Err(Error::InvalidParameter(format!(
                    "onset {onset} must precede death {death}"
                )));
            }
        }
        Ok(Self { onset_time, death_time, horizon })
    }

    pub fn onset_time(&self) -> Option<f64> {
        self.onset_time
    }

    pub fn death_time(&self) -> Option<f64> {
        self.death_time
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// The state occupied at time `t`. Transitions take effect at their
    /// event time: at t equal to the onset time the subject is already
    /// Diseased, and a dead subject stays dead at all later times.
    pub fn state_at(&self, t: f64) -> Result<State> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::InvalidParameter(format!(
                "query time {t} outside [0, {}]",
                self.horizon
            )));
        }
        Ok(self.classify(t))
    }

    /// `state_at` without the range check; callers must validate `t`.
    pub(crate) fn classify(&self, t: f64) -> State {
        match (self.onset_time, self.death_time) {
            (_, Some(d)) if d <= t => State::Dead,
            (Some(o), _) if o <= t => State::Diseased,
            _ => State::NonDiseased,
        }
    }
}

/// Deterministic pseudo-random stream (ChaCha8, a fixed, portable
/// algorithm): the same seed yields the same draws on every platform.
/// Independent sub-streams for parallel work are obtained from
/// `substream`, keyed by (seed, index) so results do not depend on
/// scheduling order.
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Sub-stream `index` of the generator seeded with `seed`.
    pub fn substream(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self(rng)
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        // 53 random bits scaled to [0, 1)
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Bernoulli draw with success probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Standard exponential draw, −ln(1 − U) with U ∈ [0, 1).
    pub fn exp1(&mut self) -> f64 {
        -(-self.uniform()).ln_1p()
    }
}

/// Derives a child seed from `(master, index)` by a SplitMix64 finalizer.
/// Deterministic and stable; used to give replicates and helper streams
/// seeds that are independent of execution order.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Cumulative hazard of the first event (incidence + background death)
/// out of Non-diseased, integrated over [0, t].
fn first_event_cumhaz(model: &impl HazardModel, t: f64) -> f64 {
    model.incidence_cumhaz(0.0, t) + model.background_cumhaz(0.0, t)
}

/// Solves `cumhaz(t) = target` for t in `(lo, hi]` by bisection. The
/// cumulative hazard must be 0 at `lo`, nondecreasing, and ≥ `target` at
/// `hi` (checked by the caller).
fn invert_cumhaz(cumhaz: impl Fn(f64) -> f64, lo: f64, hi: f64, target: f64) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    if !(cumhaz(hi) - target >= 0.0) || !(target > 0.0) {
        return Err(Error::RootSolve(format!(
            "target {target} not bracketed on [{lo}, {hi}]"
        )));
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        if hi - lo < BISECT_TOL {
            return Ok(mid);
        }
        mid = 0.5 * (lo + hi);
        if cumhaz(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::RootSolve(format!("bisection failed to converge on [{lo}, {hi}]")))
}

/// Simulates one subject from Non-diseased at t = 0 through the model,
/// consuming draws from `rng`.
pub fn simulate_subject(
    model: &impl HazardModel,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be > 0, got {horizon}")));
    }

    let e1 = rng.exp1();
    if first_event_cumhaz(model, horizon) < e1 {
        // no event within the horizon: alive and disease-free
        return Trajectory::new(None, None, horizon);
    }
    let t1 = invert_cumhaz(|t| first_event_cumhaz(model, t), 0.0, horizon, e1)?;

    // competing risks: onset vs death, decided by the hazard ratio at t1
    let inc = model.incidence(t1);
    let total = inc + model.background_mortality(t1);
    let is_onset = rng.bernoulli(inc / total);
    if !is_onset {
        return Trajectory::new(None, Some(t1), horizon);
    }

    let e2 = rng.exp1();
    if model.diseased_cumhaz(t1, horizon) < e2 {
        return Trajectory::new(Some(t1), None, horizon);
    }
    let t2 = invert_cumhaz(|t| model.diseased_cumhaz(t1, t), t1, horizon, e2)?;
    Trajectory::new(Some(t1), Some(t2), horizon)
}

/// Simulates `n` independent subjects. Subject `i` draws from sub-stream
/// `i` of `seed`, so the result is a pure function of `(n, model,
/// horizon, seed)` regardless of iteration order or parallelism.
pub fn simulate_population(
    n: usize,
    model: &impl HazardModel,
    horizon: f64,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    if n == 0 {
        return Err(Error::InvalidParameter("population size must be >= 1".into()));
    }
    (0..n)
        .map(|i| {
            let mut rng = RngStream::substream(seed, i as u64);
            simulate_subject(model, horizon, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rates_yield_empty_trajectory() {
        // slope 0 kills incidence; a huge onset age would too, but the
        // background mortality is fixed, so emulate "all rates zero" by
        // checking the no-event branch directly with a tiny horizon where
        // the integrated hazard is far below any credible draw.
        let theta = ThetaParams::new(30.0, 0.0, 1.0).unwrap();
        let mut rng = RngStream::new(7);
        // P(first event by 1 year) = 1 - exp(-∫c13) ≈ 2.25e-5; with this
        // seed no event occurs.
        let traj = simulate_subject(&theta, 1.0, &mut rng).unwrap();
        assert_eq!(traj.onset_time(), None);
        assert_eq!(traj.death_time(), None);
    }

    #[test]
    fn zero_incidence_never_produces_onset() {
        let theta = ThetaParams::new(30.0, 0.0, 1.0).unwrap();
        for i in 0..500 {
            let mut rng = RngStream::substream(11, i);
            let traj = simulate_subject(&theta, 100.0, &mut rng).unwrap();
            assert_eq!(traj.onset_time(), None, "substream {i}");
        }
    }

    #[test]
    fn population_is_deterministic_in_seed() {
        let theta = ThetaParams::reference();
        let a = simulate_population(1, &theta, 100.0, 99).unwrap();
        let b = simulate_population(1, &theta, 100.0, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_seeds_decouple_trajectories() {
        let theta = ThetaParams::reference();
        let mut any_diff = false;
        for pair in 0..100u64 {
            let a = simulate_population(2, &theta, 100.0, 2 * pair).unwrap();
            let b = simulate_population(2, &theta, 100.0, 2 * pair + 1).unwrap();
            if a != b {
                any_diff = true;
            }
        }
        assert!(any_diff, "100 seed pairs all produced identical populations");
    }

    #[test]
    fn dead_count_near_table_scale() {
        // At the reference parameters nearly everyone sampled at t = 100
        // is dead; with n = 600 the dead count should sit near 600·p3(100).
        let theta = ThetaParams::reference();
        let trajs = simulate_population(600, &theta, 100.0, 424243).unwrap();
        let dead = trajs.iter().filter(|t| t.classify(100.0) == State::Dead).count();
        // p3(100) ≈ 0.993; binomial sd ≈ 2; allow a wide band
        assert!(dead > 580, "dead = {dead}");
    }

    #[test]
    fn state_classification_boundaries() {
        let traj = Trajectory::new(Some(45.2), Some(71.0), 100.0).unwrap();
        assert_eq!(traj.state_at(45.2).unwrap(), State::Diseased);
        assert_eq!(traj.state_at(45.1).unwrap(), State::NonDiseased);
        assert_eq!(traj.state_at(71.0).unwrap(), State::Dead);
        assert_eq!(traj.state_at(80.0).unwrap(), State::Dead);
        assert!(traj.state_at(-1.0).is_err());
        assert!(traj.state_at(100.5).is_err());
    }

    #[test]
    fn empty_trajectory_is_always_non_diseased() {
        let traj = Trajectory::new(None, None, 100.0).unwrap();
        for t in [0.0, 33.3, 100.0] {
            assert_eq!(traj.state_at(t).unwrap(), State::NonDiseased);
        }
    }

    #[test]
    fn trajectory_rejects_onset_after_death() {
        assert!(Trajectory::new(Some(50.0), Some(40.0), 100.0).is_err());
        assert!(Trajectory::new(Some(50.0), Some(50.0), 100.0).is_err());
    }

    #[test]
    fn irreversibility_over_many_subjects() {
        let theta = ThetaParams::reference();
        let trajs = simulate_population(2_000, &theta, 100.0, 5).unwrap();
        let order = |s: State| s.index();
        for traj in trajs {
            let mut prev = 0;
            for k in 0..=100 {
                let s = order(traj.classify(k as f64));
                assert!(s >= prev);
                prev = s;
            }
        }
    }

    #[test]
    fn onset_strictly_precedes_death_in_samples() {
        let theta = ThetaParams::reference();
        let trajs = simulate_population(20_000, &theta, 100.0, 17).unwrap();
        let mut both = 0;
        for traj in &trajs {
            if let (Some(o), Some(d)) = (traj.onset_time(), traj.death_time()) {
                assert!(o < d);
                both += 1;
            }
        }
        assert!(both > 100, "expected many onset+death paths, got {both}");
    }

    #[test]
    fn derive_seed_spreads_indices() {
        let s: Vec<u64> = (0..64).map(|i| derive_seed(42, i)).collect();
        let mut dedup = s.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), s.len());
    }

    #[test]
    fn rng_stream_uniform_range_and_determinism() {
        let mut a = RngStream::new(3);
        let mut b = RngStream::new(3);
        for _ in 0..1000 {
            let x = a.uniform();
            assert!((0.0..1.0).contains(&x));
            assert_eq!(x, b.uniform());
        }
    }
}
