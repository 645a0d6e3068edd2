use fraclab::numkit::harmonics::{harmonic_count, harmonic_indices};
use fraclab::numkit::{bessel_i, gauss_rule, SphereRule};
use fraclab::{Scalar, Wide};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// `I_s′(z) = I_{s+1}(z) + (s/z) I_s(z)` against a five-point difference.
    #[test]
    fn bessel_recurrence(order in 0.01f64..1.5, z in 0.2f64..40.0) {
        let h = 1e-3 * z.min(1.0);
        let i = |t: f64| bessel_i(order, t).unwrap();
        let fd = (i(z - 2.0 * h) - 8.0 * i(z - h) + 8.0 * i(z + h) - i(z + 2.0 * h)) / (12.0 * h);
        let exact = bessel_i(order + 1.0, z).unwrap() + order / z * bessel_i(order, z).unwrap();
        prop_assert!((fd - exact).abs() <= 1e-8 * exact.abs(), "fd {fd} exact {exact}");
    }

    /// Gauss rules with `count` nodes are exact for degree `2 count − 1`.
    #[test]
    fn gauss_rule_polynomial_exactness(count in 2usize..30, a in -3.0f64..0.0, len in 0.1f64..4.0) {
        let b = a + len;
        let rule = gauss_rule::<f64>(a, b, count).unwrap();
        let d = 2 * count - 1;
        let approx = rule.integrate(|x| x.powi(d as i32));
        let exact = (b.powi(d as i32 + 1) - a.powi(d as i32 + 1)) / (d as f64 + 1.0);
        let scale = a.abs().max(b.abs()).powi(d as i32 + 1) * len;
        prop_assert!((approx - exact).abs() <= 1e-12 * scale.max(1.0));
    }
}

#[test]
fn gauss_rule_closed_forms() {
    let rule = gauss_rule::<f64>(0.0, std::f64::consts::PI, 30).unwrap();
    assert!((rule.integrate(|x| x.sin()) - 2.0).abs() < 1e-14);
    let rule = gauss_rule::<f64>(0.0, 1.0, 40).unwrap();
    assert!((rule.integrate(|x| x.exp()) - (1f64.exp() - 1.0)).abs() < 1e-14);
    let wide = gauss_rule::<Wide>(0.0, 1.0, 60).unwrap();
    let exact = Wide::from_f64(1.0).exp() - Wide::from_f64(1.0);
    let err = (wide.integrate(|x| x.exp()) - exact).to_f64().abs();
    assert!(err < 1e-60, "{err:e}");
}

/// Harmonics of degree `≤ 15` are orthonormal under a rule exact to degree 30.
#[test]
fn harmonic_gram_is_identity() {
    for n in [2usize, 3] {
        let top = 15;
        let rule = SphereRule::<f64>::new(n, 2 * top).unwrap();
        let samples: Vec<Vec<f64>> = (0..=top)
            .flat_map(|m| harmonic_indices(n, m))
            .map(|idx| rule.sample(idx).unwrap())
            .collect();
        let expected: usize = (0..=top).map(|m| harmonic_count(n, m)).sum();
        assert_eq!(samples.len(), expected);
        let mut worst = 0.0f64;
        for (i, a) in samples.iter().enumerate() {
            for (j, b) in samples.iter().enumerate() {
                let ip: f64 = a
                    .iter()
                    .zip(b)
                    .zip(&rule.weights)
                    .map(|((x, y), w)| w * x * y)
                    .sum();
                worst = worst.max((ip - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        assert!(worst < 1e-12, "n={n}: {worst:e}");
    }
}

#[test]
fn harmonic_counts() {
    assert_eq!(harmonic_count(1, 0), 1);
    assert_eq!(harmonic_count(1, 1), 1);
    assert_eq!(harmonic_count(1, 2), 0);
    assert!((0..10).all(|m| harmonic_count(2, m) == if m == 0 { 1 } else { 2 }));
    assert!((0..10).all(|m| harmonic_count(3, m) == 2 * m + 1));
}
