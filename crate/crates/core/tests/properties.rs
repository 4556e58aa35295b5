use mission_eval_core::curation::{segment_by_timestamps, ActivityLog, ActivityRecord, Recording};
use mission_eval_core::metrics::{roc, tar_at_far};
use mission_eval_core::model::{
    Activity, ClothingSet, Demographics, Gender, Point3, Split, SubjectRecord, SubjectRole, Timestamp,
};
use mission_eval_core::pose::{kabsch_umeyama, rotation_angles, rotation_from_angles, PoseAngles, RigidTransform};
use mission_eval_core::split::split_train_test;
use nalgebra::Matrix3;
use proptest::prelude::*;

fn scores() -> impl Strategy<Value = Vec<Option<f64>>> {
    // Coarse values so ties are common.
    prop::collection::vec(prop::option::weighted(0.9, (-20i32..20).prop_map(|x| f64::from(x) / 4.0)), 1..60)
}

fn angles() -> impl Strategy<Value = PoseAngles> {
    (-179.9f64..180.0, -85.0f64..85.0, -179.9f64..180.0).prop_map(|(y, p, r)| PoseAngles::new(y, p, r))
}

fn points(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Point3>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), n)
        .prop_map(|v| v.into_iter().map(|(x, y, z)| Point3 { x, y, z }).collect())
}

fn spread(ps: &[Point3]) -> f64 {
    let n = ps.len() as f64;
    let m = ps.iter().fold([0.0; 3], |a, p| [a[0] + p.x / n, a[1] + p.y / n, a[2] + p.z / n]);
    ps.iter().map(|p| (p.x - m[0]).powi(2) + (p.y - m[1]).powi(2) + (p.z - m[2]).powi(2)).sum()
}

proptest! {
    #[test]
    fn roc_counts_match_direct_counting(g in scores(), i in scores()) {
        let curve = roc(&g, &i).unwrap();
        let first = curve.points.first().unwrap();
        let last = curve.points.last().unwrap();
        prop_assert_eq!(first.accepted_genuine, g.iter().flatten().count());
        prop_assert_eq!(first.accepted_impostor, i.iter().flatten().count());
        prop_assert_eq!((last.accepted_genuine, last.accepted_impostor), (0, 0));
        for p in &curve.points {
            let count = |xs: &[Option<f64>]| xs.iter().flatten().filter(|&&s| s >= p.threshold).count();
            prop_assert_eq!(p.accepted_genuine, count(&g));
            prop_assert_eq!(p.accepted_impostor, count(&i));
        }
        for w in curve.points.windows(2) {
            prop_assert!(w[0].threshold < w[1].threshold);
            prop_assert!(w[0].tar >= w[1].tar && w[0].far >= w[1].far);
        }
    }

    #[test]
    fn complete_scores_span_the_unit_square(g in prop::collection::vec(-5.0f64..5.0, 1..40), i in prop::collection::vec(-5.0f64..5.0, 1..40)) {
        let wrap = |v: Vec<f64>| v.into_iter().map(Some).collect::<Vec<_>>();
        let curve = roc(&wrap(g), &wrap(i)).unwrap();
        let (first, last) = (curve.points[0], *curve.points.last().unwrap());
        prop_assert_eq!((first.far, first.tar), (1.0, 1.0));
        prop_assert_eq!((last.far, last.tar), (0.0, 0.0));
    }

    #[test]
    fn tar_at_far_is_monotone_in_far(g in scores(), i in scores(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let curve = roc(&g, &i).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(tar_at_far(&curve, lo) <= tar_at_far(&curve, hi));
        prop_assert!((0.0..=1.0).contains(&tar_at_far(&curve, lo)));
    }

    #[test]
    fn rotations_are_proper_and_angles_round_trip(a in angles()) {
        let r = rotation_from_angles(&a);
        let orth = (r.transpose() * r - Matrix3::identity()).abs().max();
        prop_assert!(orth <= 1e-9);
        prop_assert!((r.determinant() - 1.0).abs() <= 1e-9);
        let back = rotation_angles(&r);
        prop_assert!((rotation_from_angles(&back) - r).abs().max() <= 1e-9);
        prop_assert!(back.yaw_deg > -180.0 && back.yaw_deg <= 180.0);
    }

    #[test]
    fn alignment_recovers_similarity_transforms(
        src in points(4..30),
        a in angles(),
        t in (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0),
        scale in 0.2f64..4.0,
    ) {
        prop_assume!(spread(&src) > 0.3);
        let mut truth = RigidTransform::identity();
        truth.rotation = rotation_from_angles(&a);
        truth.translation.x = t.0;
        truth.translation.y = t.1;
        truth.translation.z = t.2;
        truth.scale = scale;
        let dst: Vec<Point3> = src.iter().map(|p| truth.apply(p)).collect();
        let est = kabsch_umeyama(&src, &dst, true).unwrap();
        prop_assert!(est.is_proper_rotation(1e-9));
        prop_assert!((est.rotation - truth.rotation).abs().max() <= 1e-6);
        prop_assert!((est.scale - scale).abs() <= 1e-6 * scale);
        prop_assert!(est.residual(&src, &dst) <= 1e-9 * scale * scale * src.len() as f64);
    }

    #[test]
    fn alignment_is_no_worse_than_the_generating_transform(
        src in points(4..20),
        noise in points(20..21),
        a in angles(),
    ) {
        prop_assume!(spread(&src) > 0.3);
        let mut truth = RigidTransform::identity();
        truth.rotation = rotation_from_angles(&a);
        let dst: Vec<Point3> = src
            .iter()
            .zip(&noise)
            .map(|(p, e)| {
                let q = truth.apply(p);
                Point3 { x: q.x + 0.1 * e.x, y: q.y + 0.1 * e.y, z: q.z + 0.1 * e.z }
            })
            .collect();
        let est = kabsch_umeyama(&src, &dst, true).unwrap();
        prop_assert!(est.residual(&src, &dst) <= truth.residual(&src, &dst) + 1e-12);
    }

    #[test]
    fn split_assigns_every_subject_once(
        people in prop::collection::vec((18u32..80, any::<bool>(), 150u32..200, prop::bool::weighted(0.2)), 2..60),
        seed in any::<u64>(),
    ) {
        let subjects: Vec<SubjectRecord> = people
            .iter()
            .enumerate()
            .map(|(k, &(age, female, height, distractor))| SubjectRecord {
                subject_id: format!("S{k:04}"),
                demographics: Demographics {
                    age_years: age,
                    gender: if female { Gender::Female } else { Gender::Male },
                    height_cm: height,
                },
                split: None,
                role: if distractor { SubjectRole::Distractor } else { SubjectRole::ProbeSubject },
            })
            .collect();
        let n_probe = subjects.iter().filter(|s| s.role == SubjectRole::ProbeSubject).count();
        let r = match split_train_test(&subjects, 0.5, 0.05, seed) {
            Ok(r) => r,
            Err(_) => {
                prop_assert!(n_probe < 2);
                return Ok(());
            }
        };
        prop_assert_eq!(r.assignment.len(), subjects.len());
        prop_assert_eq!(r.n_train + r.n_test, n_probe);
        for s in subjects.iter().filter(|s| s.role == SubjectRole::Distractor) {
            prop_assert_eq!(r.assignment[&s.subject_id], Split::Test);
        }
        let again = split_train_test(&subjects, 0.5, 0.05, seed).unwrap();
        prop_assert_eq!(again.assignment, r.assignment);
    }

    #[test]
    fn segmentation_covers_the_log(
        gaps in prop::collection::vec((0i64..30, 1i64..40), 0..25),
        rec_start in 0i64..200,
        rec_len in 1i64..800,
    ) {
        let mut t = 0;
        let mut records = Vec::new();
        for (k, (gap, len)) in gaps.iter().enumerate() {
            t += gap;
            records.push(ActivityRecord {
                subject_id: format!("S{k:04}"),
                activity: Activity::ALL[k % 4],
                clothing_set: ClothingSet::One,
                start: Timestamp(t),
                end: Timestamp(t + len),
                station_id: "st".into(),
            });
            t += len;
        }
        let log = ActivityLog { records };
        let rec = Recording {
            sensor_id: "cam".into(),
            station_id: "st".into(),
            start: Timestamp(rec_start),
            end: Timestamp(rec_start + rec_len),
        };
        let (cuts, skipped) = segment_by_timestamps(&rec, &log).unwrap();
        prop_assert_eq!(cuts.len() + skipped.len(), log.records.len());
        let covered: i64 = log
            .records
            .iter()
            .map(|r| (r.end.0.min(rec.end.0) - r.start.0.max(rec.start.0)).max(0))
            .sum();
        prop_assert_eq!(cuts.iter().map(|c| c.end.0 - c.start.0).sum::<i64>(), covered);
        for w in cuts.windows(2) {
            prop_assert!(w[0].end <= w[1].start);
        }
        for c in &cuts {
            prop_assert!(c.start >= rec.start && c.end <= rec.end && c.end > c.start);
        }
    }
}
