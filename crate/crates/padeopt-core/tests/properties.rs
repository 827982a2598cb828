use num_complex::Complex64;
use padeopt_core::optimize::{derive, mirror};
use padeopt_core::stability::{stability_function, ButcherTableau, ShiftOperator};
use padeopt_core::stencil::{SchemeKind, StencilSpec};
use padeopt_core::weight::WeightFunction;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shift_apply_matches_matrix(np in 2usize..24, k in -30i64..30, seed in any::<u64>()) {
        let v: Vec<f64> = (0..np).map(|i| ((seed as f64) * 1e-3 + i as f64).sin()).collect();
        let s = ShiftOperator::new(np, k);
        let dense = s.matrix() * nalgebra::DVector::from_vec(v.clone());
        for (x, y) in s.apply(&v).iter().zip(dense.iter()) {
            prop_assert_eq!(x, y);
        }
    }

    #[test]
    fn erk4_matches_taylor(re in -3.0f64..0.5, im in -3.0f64..3.0) {
        let z = Complex64::new(re, im);
        let poly = 1.0 + z + z * z / 2.0 + z.powu(3) / 6.0 + z.powu(4) / 24.0;
        let r = stability_function(&ButcherTableau::erk4(), z).unwrap();
        prop_assert!((r - poly).norm() <= 1e-12 * poly.norm().max(1.0));
    }

    #[test]
    fn mirror_is_involution(d in 1usize..3, ml in 2usize..4, mr in 1usize..4) {
        let spec = StencilSpec::new(d, 4, [ml, mr, ml, mr], SchemeKind::Optimized).unwrap();
        if let Ok(c) = derive(&spec, &WeightFunction::default_unit()) {
            let back = mirror(&mirror(&c));
            prop_assert_eq!(&c.a, &back.a);
            prop_assert_eq!(&c.b, &back.b);
        }
    }
}
