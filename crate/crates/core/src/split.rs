//! Train/test partition of subjects with balanced demographics.
//!
//! Subjects are bucketed by gender, age decade and height quartile, ordered
//! stratum by stratum with a seeded shuffle inside each stratum, and assigned
//! systematically so every stratum contributes its share to the test side.
//! Greedy single swaps between the sides then lower the worst per-attribute
//! total-variation distance until it is within tolerance or no swap helps.
//!
//! Distractors are gallery-only and always land on the test side; they take
//! no part in the balance statistics.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::model::{Gender, Split, SubjectRecord, SubjectRole};
use crate::rng::{hash_str, unit, Purpose};

pub const DEFAULT_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Attribute {
    Gender,
    AgeDecade,
    HeightQuartile,
}

impl Attribute {
    pub const ALL: [Attribute; 3] = [
        Attribute::Gender,
        Attribute::AgeDecade,
        Attribute::HeightQuartile,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Gender => "gender",
            Attribute::AgeDecade => "age-decade",
            Attribute::HeightQuartile => "height-quartile",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitError {
    TooFewSubjects(usize),
    BadFraction,
}

impl fmt::Display for SplitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitError::TooFewSubjects(n) => {
                write!(f, "need at least 2 non-distractor subjects, got {n}")
            }
            SplitError::BadFraction => f.write_str("test fraction must lie strictly between 0 and 1"),
        }
    }
}

impl core::error::Error for SplitError {}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeDistance {
    pub attribute: Attribute,
    pub tv_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitReport {
    pub assignment: BTreeMap<String, Split>,
    pub distances: Vec<AttributeDistance>,
    pub test_fraction: f64,
    pub tolerance: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub n_distractors: usize,
    pub swaps: usize,
    /// False when the greedy search stalled above tolerance.
    pub within_tolerance: bool,
}

impl SplitReport {
    pub fn max_distance(&self) -> f64 {
        self.distances
            .iter()
            .map(|d| d.tv_distance)
            .fold(0.0, f64::max)
    }
}

/// Bucket labels of one subject, one per [`Attribute`].
pub type Buckets = [u32; 3];

/// Height cut points at the 25th, 50th and 75th percentile positions.
pub fn height_cuts(heights: &[u32]) -> [u32; 3] {
    let mut sorted: Vec<u32> = heights.to_vec();
    sorted.sort_unstable();
    if sorted.is_empty() {
        return [0; 3];
    }
    let n = sorted.len();
    [1, 2, 3].map(|k| sorted[(k * n / 4).min(n - 1)])
}

pub fn buckets(s: &SubjectRecord, cuts: &[u32; 3]) -> Buckets {
    let d = &s.demographics;
    let gender = match d.gender {
        Gender::Female => 0,
        Gender::Male => 1,
    };
    let quartile = cuts.iter().filter(|&&c| d.height_cm >= c).count() as u32;
    [gender, d.age_years / 10, quartile]
}

/// Total-variation distance between two count histograms over the same
/// labels: half the L1 distance of the normalized histograms.
pub fn tv_distance(a: &BTreeMap<u32, usize>, b: &BTreeMap<u32, usize>) -> f64 {
    let na: usize = a.values().sum();
    let nb: usize = b.values().sum();
    if na == 0 || nb == 0 {
        return if na == nb { 0.0 } else { 1.0 };
    }
    let mut labels: Vec<u32> = a.keys().chain(b.keys()).copied().collect();
    labels.sort_unstable();
    labels.dedup();
    let sum: f64 = labels
        .iter()
        .map(|l| {
            let pa = *a.get(l).unwrap_or(&0) as f64 / na as f64;
            let pb = *b.get(l).unwrap_or(&0) as f64 / nb as f64;
            (pa - pb).abs()
        })
        .sum();
    sum * 0.5
}

struct Histograms {
    train: [BTreeMap<u32, usize>; 3],
    test: [BTreeMap<u32, usize>; 3],
}

impl Histograms {
    fn new(buckets: &[Buckets], test: &[bool]) -> Self {
        let mut h = Histograms {
            train: Default::default(),
            test: Default::default(),
        };
        for (b, &t) in buckets.iter().zip(test) {
            h.add(b, t, 1);
        }
        h
    }

    fn add(&mut self, b: &Buckets, test: bool, delta: isize) {
        let side = if test { &mut self.test } else { &mut self.train };
        for (hist, &label) in side.iter_mut().zip(b) {
            let c = hist.entry(label).or_insert(0);
            *c = (*c as isize + delta) as usize;
        }
    }

    fn distances(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| tv_distance(&self.train[i], &self.test[i]))
    }
}

/// Lexicographic objective: worst attribute first, then the total.
fn objective(d: &[f64; 3]) -> (f64, f64) {
    (d.iter().copied().fold(0.0, f64::max), d.iter().sum())
}

fn better(a: (f64, f64), b: (f64, f64)) -> bool {
    const EPS: f64 = 1e-12;
    a.0 < b.0 - EPS || ((a.0 - b.0).abs() <= EPS && a.1 < b.1 - EPS)
}

/// Partitions subjects into train and test.
pub fn split_train_test(
    subjects: &[SubjectRecord],
    test_fraction: f64,
    tolerance: f64,
    seed: u64,
) -> Result<SplitReport, SplitError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(SplitError::BadFraction);
    }
    let mut pool: Vec<&SubjectRecord> = subjects
        .iter()
        .filter(|s| s.role == SubjectRole::ProbeSubject)
        .collect();
    let n = pool.len();
    if n < 2 {
        return Err(SplitError::TooFewSubjects(n));
    }

    let heights: Vec<u32> = pool.iter().map(|s| s.demographics.height_cm).collect();
    let cuts = height_cuts(&heights);

    // stratum order, then a seeded shuffle within each stratum
    pool.sort_by(|a, b| {
        let ka = (buckets(a, &cuts), unit(seed, Purpose::Split, &[hash_str(&a.subject_id)]));
        let kb = (buckets(b, &cuts), unit(seed, Purpose::Split, &[hash_str(&b.subject_id)]));
        ka.0.cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then_with(|| a.subject_id.cmp(&b.subject_id))
    });

    let k = (libm::round(n as f64 * test_fraction) as usize).clamp(1, n - 1);
    // systematic selection of exactly k out of n along the stratified order
    let mut is_test: Vec<bool> = (0..n)
        .map(|i| {
            let hi = (2 * (i + 1) * k + n) / (2 * n);
            let lo = (2 * i * k + n) / (2 * n);
            hi - lo == 1
        })
        .collect();
    let bucket_of: Vec<Buckets> = pool.iter().map(|s| buckets(s, &cuts)).collect();

    let mut hist = Histograms::new(&bucket_of, &is_test);
    let mut current = objective(&hist.distances());
    let mut swaps = 0;
    while current.0 > tolerance {
        let mut best: Option<(usize, usize, (f64, f64))> = None;
        for a in (0..n).filter(|&i| !is_test[i]) {
            for b in (0..n).filter(|&i| is_test[i]) {
                if bucket_of[a] == bucket_of[b] {
                    continue;
                }
                hist.add(&bucket_of[a], false, -1);
                hist.add(&bucket_of[b], true, -1);
                hist.add(&bucket_of[a], true, 1);
                hist.add(&bucket_of[b], false, 1);
                let obj = objective(&hist.distances());
                hist.add(&bucket_of[a], true, -1);
                hist.add(&bucket_of[b], false, -1);
                hist.add(&bucket_of[a], false, 1);
                hist.add(&bucket_of[b], true, 1);
                let incumbent = best.map_or(current, |x| x.2);
                if better(obj, incumbent) {
                    best = Some((a, b, obj));
                }
            }
        }
        let Some((a, b, obj)) = best else { break };
        hist.add(&bucket_of[a], false, -1);
        hist.add(&bucket_of[b], true, -1);
        hist.add(&bucket_of[a], true, 1);
        hist.add(&bucket_of[b], false, 1);
        is_test[a] = true;
        is_test[b] = false;
        current = obj;
        swaps += 1;
    }

    let mut assignment = BTreeMap::new();
    for (s, &t) in pool.iter().zip(&is_test) {
        assignment.insert(s.subject_id.clone(), if t { Split::Test } else { Split::Train });
    }
    let mut n_distractors = 0;
    for s in subjects.iter().filter(|s| s.role == SubjectRole::Distractor) {
        assignment.insert(s.subject_id.clone(), Split::Test);
        n_distractors += 1;
    }
    let d = hist.distances();
    Ok(SplitReport {
        assignment,
        distances: Attribute::ALL
            .iter()
            .zip(d)
            .map(|(&attribute, tv_distance)| AttributeDistance {
                attribute,
                tv_distance,
            })
            .collect(),
        test_fraction,
        tolerance,
        n_train: n - k,
        n_test: k,
        n_distractors,
        swaps,
        within_tolerance: current.0 <= tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Demographics;
    use alloc::format;

    fn subject(i: usize, gender: Gender, age: u32, height: u32) -> SubjectRecord {
        SubjectRecord {
            subject_id: format!("S{i:04}"),
            demographics: Demographics {
                age_years: age,
                gender,
                height_cm: height,
            },
            split: None,
            role: SubjectRole::ProbeSubject,
        }
    }

    fn uniform(n: usize) -> Vec<SubjectRecord> {
        (0..n)
            .map(|i| {
                let g = if i % 2 == 0 { Gender::Female } else { Gender::Male };
                subject(i, g, 20 + (i as u32 / 2 % 4) * 10, 150 + (i as u32 / 8 % 4) * 10)
            })
            .collect()
    }

    #[test]
    fn tv_of_identical_histograms_is_zero() {
        let a: BTreeMap<u32, usize> = [(0, 3), (1, 5)].into_iter().collect();
        let b: BTreeMap<u32, usize> = [(0, 6), (1, 10)].into_iter().collect();
        assert_eq!(tv_distance(&a, &b), 0.0);
        let c: BTreeMap<u32, usize> = [(2, 1)].into_iter().collect();
        assert_eq!(tv_distance(&a, &c), 1.0);
    }

    #[test]
    fn balanced_input_reaches_zero_distance() {
        let r = split_train_test(&uniform(100), 0.5, 0.0, 1).unwrap();
        assert_eq!(r.n_test, 50);
        assert_eq!(r.n_train, 50);
        assert_eq!(r.max_distance(), 0.0);
        assert!(r.within_tolerance);
    }

    #[test]
    fn test_share_within_one_subject() {
        for (n, f) in [(7, 0.3), (11, 0.5), (2, 0.1), (2, 0.9), (50, 0.25)] {
            let r = split_train_test(&uniform(n), f, DEFAULT_TOLERANCE, 9).unwrap();
            assert!((r.n_test as f64 - f * n as f64).abs() <= 1.0, "{n} {f}");
            assert_eq!(r.n_test + r.n_train, n);
            let tests = r.assignment.values().filter(|s| **s == Split::Test).count();
            assert_eq!(tests, r.n_test);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let s = uniform(40);
        let a = split_train_test(&s, 0.5, DEFAULT_TOLERANCE, 3).unwrap();
        let b = split_train_test(&s, 0.5, DEFAULT_TOLERANCE, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_gender_population() {
        let s: Vec<_> = (0..30)
            .map(|i| subject(i, Gender::Male, 18 + (i as u32 * 7) % 50, 160 + (i as u32 * 13) % 40))
            .collect();
        let r = split_train_test(&s, 0.5, DEFAULT_TOLERANCE, 5).unwrap();
        assert_eq!(r.distances[0].tv_distance, 0.0);
        assert_eq!(r.within_tolerance, r.max_distance() <= DEFAULT_TOLERANCE);
    }

    #[test]
    fn unreachable_tolerance_is_flagged() {
        // one subject per age decade: one side must miss each decade
        let s: Vec<_> = (0..4).map(|i| subject(i, Gender::Male, 20 + 10 * i as u32, 170)).collect();
        let r = split_train_test(&s, 0.5, DEFAULT_TOLERANCE, 5).unwrap();
        assert!(!r.within_tolerance);
        assert!(r.max_distance() > DEFAULT_TOLERANCE);
    }

    #[test]
    fn distractors_pinned_to_test() {
        let mut s = uniform(10);
        s[3].role = SubjectRole::Distractor;
        let r = split_train_test(&s, 0.5, DEFAULT_TOLERANCE, 5).unwrap();
        assert_eq!(r.assignment["S0003"], Split::Test);
        assert_eq!(r.n_distractors, 1);
        assert_eq!(r.n_train + r.n_test, 9);
    }

    #[test]
    fn errors() {
        assert_eq!(
            split_train_test(&uniform(1), 0.5, 0.05, 0),
            Err(SplitError::TooFewSubjects(1))
        );
        assert_eq!(split_train_test(&uniform(4), 1.0, 0.05, 0), Err(SplitError::BadFraction));
    }
}
