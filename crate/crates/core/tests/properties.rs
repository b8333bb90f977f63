use proptest::prelude::*;

use qslam::cli_io::tensor_file::{decode, encode};
use qslam::composition::{CompositionMode, CompositionTensor, Slot};
use qslam::geometry::{wrap_angle, PairFrame, Point2, Pose2, LANDMARK_A, LANDMARK_B};
use qslam::metrics::{dmse, entropy, gt_rating, information_score};
use qslam::partition::{SpacePartition, StateVector};

fn point() -> impl Strategy<Value = Point2> {
    (-10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y)| Point2::new(x, y))
}

fn state(d: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec(0.0..1.0f64, d).prop_map(|v| {
        let mut s = StateVector::new(v);
        s.normalize();
        s
    })
}

fn sparse_tensor(d: usize) -> impl Strategy<Value = CompositionTensor> {
    prop::collection::vec(prop_oneof![3 => Just(0.0), 1 => 0.001..1.0f64], d * d * d).prop_map(move |mut v| {
        v[0] += 1.0;
        let total: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= total);
        CompositionTensor::from_dense(d, "prop", CompositionMode::Probabilistic, 1, 0, v).unwrap()
    })
}

proptest! {
    #[test]
    fn wrapped_angles_stay_in_range(a in -100.0..100.0f64) {
        let w = wrap_angle(a);
        prop_assert!(w > -std::f64::consts::PI && w <= std::f64::consts::PI);
        prop_assert!(wrap_angle(w - a).abs() < 1e-9);
    }

    #[test]
    fn pair_frame_round_trips(a in point(), b in point(), p in point()) {
        prop_assume!(a.distance(b) > 1e-3);
        let f = PairFrame::new(a, b).unwrap();
        let q = f.to_world(f.to_local(p));
        prop_assert!(q.distance(p) < 1e-9 * (1.0 + p.norm() + a.norm()) / f.scale().min(1.0));
        prop_assert!(f.to_local(a).distance(LANDMARK_A) < 1e-12);
        prop_assert!(f.to_local(b).distance(LANDMARK_B) < 1e-9);
    }

    #[test]
    fn bearings_survive_the_frame_change(a in point(), b in point(), p in point(), c in point(), alpha in -3.0..3.0f64) {
        prop_assume!(a.distance(b) > 1e-2 && p.distance(c) > 1e-2);
        let f = PairFrame::new(a, b).unwrap();
        let pose = Pose2::from_point(p, alpha);
        let local = f.pose_to_local(&pose);
        prop_assert!(wrap_angle(local.bearing_to(f.to_local(c)) - pose.bearing_to(c)).abs() < 1e-9);
    }

    #[test]
    fn marginals_are_normalized_and_match_slot_order(t in sparse_tensor(4), a in state(4), b in state(4)) {
        for slot in Slot::ALL {
            let m = t.marginal_for(slot, &a, &b).unwrap();
            if m.informative {
                prop_assert!((m.state.sum() - 1.0).abs() < 1e-12);
            } else {
                prop_assert_eq!(&m.state, &StateVector::uniform(4));
            }
        }
        prop_assert_eq!(t.marginal(&a, &b).unwrap(), t.marginal_for(Slot::First, &a, &b).unwrap());
    }

    #[test]
    fn qct1_round_trips(t in sparse_tensor(3)) {
        prop_assert_eq!(decode("prop", &encode(&t)).unwrap(), t);
    }

    #[test]
    fn truncated_qct1_is_rejected(t in sparse_tensor(3), cut in 1usize..40) {
        let bytes = encode(&t);
        let cut = cut.min(bytes.len());
        prop_assert!(decode("prop", &bytes[..bytes.len() - cut]).is_err());
    }

    #[test]
    fn metric_ranges(s in state(20), gt in 1usize..=20) {
        prop_assert!((0.0..=2f64.sqrt() + 1e-12).contains(&dmse(&s, gt)));
        prop_assert!((0.0..=20f64.ln() + 1e-12).contains(&entropy(&s)));
        prop_assert!((0.0..=1.0).contains(&information_score(&s)));
        prop_assert!((1..=20).contains(&gt_rating(&s, gt)));
    }

    #[test]
    fn classify_returns_a_valid_region(p in point()) {
        let edc = SpacePartition::edc();
        let r = edc.classify(p);
        prop_assert!((1..=edc.d()).contains(&r));
    }
}
