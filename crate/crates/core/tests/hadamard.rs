use fraclab::hadamard::{unit_flux_constant, ExtensionSolution};
use fraclab::numkit::bessel_i_scaled;
use proptest::prelude::*;
use std::f64::consts::PI;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// `v / sin(nx)` depends on `y` only.
    #[test]
    fn solution_separates(
        s in 0.05f64..0.95,
        frequency in 1usize..30,
        y in 0.01f64..3.0,
        x1 in 0.05f64..1.5,
        x2 in 0.05f64..1.5,
    ) {
        let sol = ExtensionSolution::new(frequency as f64, s).unwrap();
        let n = frequency as f64;
        prop_assume!((n * x1).sin().abs() > 0.05 && (n * x2).sin().abs() > 0.05);
        let a = sol.eval(x1, y).unwrap() / (n * x1).sin();
        let b = sol.eval(x2, y).unwrap() / (n * x2).sin();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs());
        prop_assert!(sol.eval(x1, 0.0).unwrap() == 0.0);
    }

    /// The weighted normal derivative tends to `sin(nx)` at the boundary.
    #[test]
    fn flux_tends_to_the_boundary_data(s in 0.3f64..0.95, frequency in 1usize..20, x in 0.0f64..PI) {
        let sol = ExtensionSolution::new(frequency as f64, s).unwrap();
        let flux = sol.flux(x, 1e-10).unwrap();
        prop_assert!((flux - (frequency as f64 * x).sin()).abs() <= 1e-4);
    }
}

#[test]
fn bessel_large_argument_asymptotics() {
    for order in [0.25, 0.5, 0.75] {
        let z = 50.0;
        let ratio = bessel_i_scaled(order, z).unwrap() * (2.0 * PI * z).sqrt();
        assert!((ratio - 1.0).abs() < 1e-2, "ν={order}: {ratio}");
    }
}

#[test]
fn flux_constant_examples() {
    // `2^{−½} Γ(½) = √(π/2)`.
    assert!((unit_flux_constant(0.5) - (PI / 2.0).sqrt()).abs() < 1e-14);
    assert!(ExtensionSolution::new(0.5, 0.5).is_err());
    assert!(ExtensionSolution::new(4.0, 1.0).is_err());
    let sol = ExtensionSolution::new(4.0, 0.5).unwrap();
    assert!(sol.profile(-1.0).is_err());
    assert!(sol.log_abs(0.3, 0.0).is_err());
}
