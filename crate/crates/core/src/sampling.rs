//! Visit/participation schema and aggregation into count tables.
//!
//! A study invites `n` subjects to `K` examination visits; each subject
//! independently joins each visit with probability `p_part`. Participation
//! is independent of health state — in particular the vital status of a
//! dead subject is still observable (registry data), so dead subjects
//! remain sampleable at every later visit. Aggregating the participants'
//! current states per visit yields the count table.

use crate::error::{Error, Result};
use crate::microsim::{RngStream, Trajectory};
use crate::ode::StateFractions;

/// Which subjects attend which visits: an `n_subjects × K` Bernoulli mask
/// over a strictly increasing sequence of visit times.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitPlan {
    n_subjects: usize,
    visit_times: Vec<f64>,
    mask: Vec<bool>, // row-major: subject-major, visit-minor
}

impl VisitPlan {
    pub fn new(n_subjects: usize, visit_times: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        validate_visit_times(&visit_times)?;
        if mask.len() != n_subjects * visit_times.len() {
            return Err(Error::LengthMismatch(format!(
                "mask has {} cells, expected {} × {}",
                mask.len(),
                n_subjects,
                visit_times.len()
            )));
        }
        Ok(Self { n_subjects, visit_times, mask })
    }

    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    pub fn visit_times(&self) -> &[f64] {
        &self.visit_times
    }

    pub fn n_visits(&self) -> usize {
        self.visit_times.len()
    }

    pub fn participates(&self, subject: usize, visit: usize) -> bool {
        self.mask[subject * self.visit_times.len() + visit]
    }

    /// Participants per visit (the column sums of the mask).
    pub fn participants_per_visit(&self) -> Vec<u64> {
        let k = self.n_visits();
        let mut out = vec![0u64; k];
        for subject in 0..self.n_subjects {
            for (visit, slot) in out.iter_mut().enumerate() {
                if self.participates(subject, visit) {
                    *slot += 1;
                }
            }
        }
        out
    }
}

fn validate_visit_times(visit_times: &[f64]) -> Result<()> {
    if visit_times.is_empty() {
        return Err(Error::InvalidParameter("visit_times must be nonempty".into()));
    }
    if visit_times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidParameter("visit times must be finite and >= 0".into()));
    }
    if visit_times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("visit times must be strictly increasing".into()));
    }
    Ok(())
}

/// Draws a fresh participation mask: every cell is an independent
/// Bernoulli(`p_part`) draw, independent of health state.
pub fn draw_visit_plan(
    n: usize,
    visit_times: &[f64],
    p_part: f64,
    rng: &mut RngStream,
) -> Result<VisitPlan> {
    if !(0.0..=1.0).contains(&p_part) {
        return Err(Error::InvalidParameter(format!(
            "participation probability must be in [0, 1], got {p_part}"
        )));
    }
    validate_visit_times(visit_times)?;
    let mask = (0..n * visit_times.len()).map(|_| rng.bernoulli(p_part)).collect();
    VisitPlan::new(n, visit_times.to_vec(), mask)
}

/// Number of subjects attending exactly v visits, for v = 0..=K.
/// Entries sum to `n_subjects`.
pub fn visit_histogram(plan: &VisitPlan) -> Vec<u64> {
    let k = plan.n_visits();
    let mut hist = vec![0u64; k + 1];
    for subject in 0..plan.n_subjects() {
        let visits = (0..k).filter(|&v| plan.participates(subject, v)).count();
        hist[visits] += 1;
    }
    hist
}

/// Per-visit counts of participants in each state, with per-visit totals.
#[derive(Debug, Clone, PartialEq)]
pub struct AcsTable {
    visit_times: Vec<f64>,
    counts: Vec<[u64; 3]>, // one row of (Non-diseased, Diseased, Dead) per visit
}

impl AcsTable {
    pub fn new(visit_times: Vec<f64>, counts: Vec<[u64; 3]>) -> Result<Self> {
        validate_visit_times(&visit_times)?;
        if visit_times.len() != counts.len() {
            return Err(Error::LengthMismatch(format!(
                "{} visit times vs {} count rows",
                visit_times.len(),
                counts.len()
            )));
        }
        Ok(Self { visit_times, counts })
    }

    pub fn visit_times(&self) -> &[f64] {
        &self.visit_times
    }

    pub fn n_visits(&self) -> usize {
        self.visit_times.len()
    }

    /// Counts (Non-diseased, Diseased, Dead) at visit `k`.
    pub fn counts(&self, k: usize) -> [u64; 3] {
        self.counts[k]
    }

    /// Participants at visit `k`.
    pub fn total(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    pub fn totals(&self) -> Vec<u64> {
        (0..self.n_visits()).map(|k| self.total(k)).collect()
    }
}

/// Classifies every sampled subject at every attended visit and tallies
/// the per-visit state counts.
pub fn aggregate_acs(trajectories: &[Trajectory], plan: &VisitPlan) -> Result<AcsTable> {
    if trajectories.len() != plan.n_subjects() {
        return Err(Error::LengthMismatch(format!(
            "{} trajectories vs plan for {} subjects",
            trajectories.len(),
            plan.n_subjects()
        )));
    }
    let last_visit = *plan.visit_times().last().expect("visit_times nonempty");
    if let Some(short) = trajectories.iter().find(|traj| traj.horizon() < last_visit) {
        return Err(Error::InvalidParameter(format!(
            "visit time {last_visit} exceeds a trajectory horizon {}",
            short.horizon()
        )));
    }

    let mut counts = vec![[0u64; 3]; plan.n_visits()];
    for (subject, traj) in trajectories.iter().enumerate() {
        for (visit, &t) in plan.visit_times().iter().enumerate() {
            if plan.participates(subject, visit) {
                counts[visit][traj.state_at(t)?.index()] += 1;
            }
        }
    }
    AcsTable::new(plan.visit_times().to_vec(), counts)
}

/// Per-visit observed fractions counts/total. A visit with zero
/// participants has no fractions and is an error the caller must handle
/// (drop the visit or re-plan).
pub fn observed_fractions(table: &AcsTable) -> Result<Vec<StateFractions>> {
    (0..table.n_visits())
        .map(|k| {
            let total = table.total(k);
            if total == 0 {
                return Err(Error::ZeroTotalVisit { visit_index: k, time: table.visit_times()[k] });
            }
            let [x1, x2, x3] = table.counts(k);
            let n = total as f64;
            Ok(StateFractions {
                non_diseased: x1 as f64 / n,
                diseased: x2 as f64 / n,
                dead: x3 as f64 / n,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decade_times() -> Vec<f64> {
        (0..=10).map(|k| 10.0 * k as f64).collect()
    }

    #[test]
    fn full_participation_mask() {
        let mut rng = RngStream::new(1);
        let plan = draw_visit_plan(10, &decade_times(), 1.0, &mut rng).unwrap();
        assert!((0..10).all(|s| (0..11).all(|v| plan.participates(s, v))));
    }

    #[test]
    fn zero_participation_mask() {
        let mut rng = RngStream::new(1);
        let plan = draw_visit_plan(10, &decade_times(), 0.0, &mut rng).unwrap();
        assert!((0..10).all(|s| (0..11).all(|v| !plan.participates(s, v))));
    }

    #[test]
    fn rejects_bad_probability_and_empty_times() {
        let mut rng = RngStream::new(1);
        assert!(draw_visit_plan(10, &decade_times(), 1.5, &mut rng).is_err());
        assert!(draw_visit_plan(10, &decade_times(), f64::NAN, &mut rng).is_err());
        assert!(draw_visit_plan(10, &[], 0.5, &mut rng).is_err());
        assert!(draw_visit_plan(10, &[0.0, 0.0], 0.5, &mut rng).is_err());
    }

    #[test]
    fn histogram_all_absent() {
        let plan = VisitPlan::new(600, decade_times(), vec![false; 600 * 11]).unwrap();
        let hist = visit_histogram(&plan);
        assert_eq!(hist[0], 600);
        assert!(hist[1..].iter().all(|&c| c == 0));
    }

    #[test]
    fn histogram_partitions_subjects() {
        let mut rng = RngStream::new(8);
        let plan = draw_visit_plan(600, &decade_times(), 0.5, &mut rng).unwrap();
        let hist = visit_histogram(&plan);
        assert_eq!(hist.len(), 12);
        assert_eq!(hist.iter().sum::<u64>(), 600);
        // Binomial(11, 1/2) peaks at 5–6
        let peak = hist.iter().enumerate().max_by_key(|(_, &c)| c).unwrap().0;
        assert!((4..=7).contains(&peak), "peak at {peak}");
    }

    #[test]
    fn empty_mask_aggregates_to_zero_table() {
        let trajs = vec![Trajectory::new(None, None, 100.0).unwrap(); 5];
        let plan = VisitPlan::new(5, decade_times(), vec![false; 5 * 11]).unwrap();
        let table = aggregate_acs(&trajs, &plan).unwrap();
        assert!((0..11).all(|k| table.total(k) == 0));
    }

    #[test]
    fn single_subject_classification_rows() {
        let traj = Trajectory::new(Some(45.0), Some(71.0), 100.0).unwrap();
        let plan = VisitPlan::new(1, vec![0.0, 50.0, 80.0], vec![true; 3]).unwrap();
        let table = aggregate_acs(&[traj], &plan).unwrap();
        assert_eq!(table.counts(0), [1, 0, 0]);
        assert_eq!(table.counts(1), [0, 1, 0]);
        assert_eq!(table.counts(2), [0, 0, 1]);
    }

    #[test]
    fn totals_match_mask_column_sums() {
        let theta = crate::rates::ThetaParams::reference();
        let trajs = crate::microsim::simulate_population(200, &theta, 100.0, 31).unwrap();
        let mut rng = RngStream::new(32);
        let plan = draw_visit_plan(200, &decade_times(), 0.5, &mut rng).unwrap();
        let table = aggregate_acs(&trajs, &plan).unwrap();
        assert_eq!(table.totals(), plan.participants_per_visit());
    }

    #[test]
    fn aggregate_rejects_length_mismatch() {
        let trajs = vec![Trajectory::new(None, None, 100.0).unwrap(); 4];
        let plan = VisitPlan::new(5, decade_times(), vec![true; 5 * 11]).unwrap();
        assert!(matches!(aggregate_acs(&trajs, &plan), Err(Error::LengthMismatch(_))));
    }

    #[test]
    fn fractions_from_table_one_columns() {
        // columns t = 0 and t = 80 of the worked example table
        let table = AcsTable::new(vec![0.0, 80.0], vec![[325, 0, 0], [68, 41, 184]]).unwrap();
        let fr = observed_fractions(&table).unwrap();
        assert_eq!(fr[0].as_array(), [1.0, 0.0, 0.0]);
        assert!((fr[1].non_diseased - 68.0 / 293.0).abs() < 1e-15);
        assert!((fr[1].diseased - 41.0 / 293.0).abs() < 1e-15);
        assert!((fr[1].dead - 184.0 / 293.0).abs() < 1e-15);
        assert!((fr[1].non_diseased - 0.2321).abs() < 5e-5);
        assert!((fr[1].diseased - 0.1399).abs() < 5e-5);
        assert!((fr[1].dead - 0.6280).abs() < 5e-5);
    }

    #[test]
    fn fraction_rows_sum_to_one() {
        let table =
            AcsTable::new(vec![0.0, 10.0, 20.0], vec![[7, 5, 3], [1, 1, 1], [0, 2, 311]]).unwrap();
        for row in observed_fractions(&table).unwrap() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_total_visit_is_an_error() {
        let table = AcsTable::new(vec![0.0, 10.0], vec![[5, 0, 0], [0, 0, 0]]).unwrap();
        match observed_fractions(&table) {
            Err(Error::ZeroTotalVisit { visit_index, .. }) => assert_eq!(visit_index, 1),
            other => panic!("expected ZeroTotalVisit, got {other:?}"),
        }
    }
}
