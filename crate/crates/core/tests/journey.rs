use emoheal_core::journey::{plan_journey, StageRole, TargetPreset};
use emoheal_core::knowledge_graph::MusicalParameters;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = MusicalParameters> {
    proptest::array::uniform6(0.0f64..=1.0).prop_map(|a| MusicalParameters::from_array(a).unwrap())
}

proptest! {
    #[test]
    fn guide_lies_between_endpoints(m in params(), t in params(), blend in 0.0f64..=1.0) {
        let j = plan_journey(m, &TargetPreset { params: t }, blend).unwrap();
        let g = j.stage(StageRole::Guide).to_array();
        for ((gv, mv), tv) in g.iter().zip(m.to_array()).zip(t.to_array()) {
            prop_assert!(*gv >= mv.min(tv) && *gv <= mv.max(tv));
        }
        prop_assert_eq!(*j.stage(StageRole::Match), m);
        prop_assert_eq!(*j.stage(StageRole::Target), t);
    }

    #[test]
    fn identical_endpoints_are_a_fixed_point(x in params(), blend in 0.0f64..=1.0) {
        let j = plan_journey(x, &TargetPreset { params: x }, blend).unwrap();
        prop_assert_eq!(j.stages(), &[x, x, x]);
    }

    #[test]
    fn blend_endpoints_are_exact(m in params(), t in params()) {
        let target = TargetPreset { params: t };
        prop_assert_eq!(*plan_journey(m, &target, 0.0).unwrap().stage(StageRole::Guide), m);
        prop_assert_eq!(*plan_journey(m, &target, 1.0).unwrap().stage(StageRole::Guide), t);
    }
}
