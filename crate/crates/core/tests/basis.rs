use std::sync::{Arc, OnceLock};

use fraclab::fracpoisson::{
    apply_a0_general, AnnulusRule, BasisIndex, ExteriorBasis, InteriorGrid, Truncation,
};
use fraclab::numkit::ProblemParams;
use fraclab::radialbasis::RadialQuadrature;
use fraclab::{Scalar, Wide};
use proptest::prelude::*;

const CAP: usize = 5;

fn basis(n: usize) -> &'static ExteriorBasis<Wide> {
    static BASES: [OnceLock<ExteriorBasis<Wide>>; 2] = [OnceLock::new(), OnceLock::new()];
    BASES[n - 1].get_or_init(|| {
        let params = ProblemParams::new(n, 0.5).unwrap();
        ExteriorBasis::build(&params, Truncation::level(CAP)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// `‖Σ α u‖² ≤ c² Σ α²` for the images `u` of the basis.
    #[test]
    fn expansions_stay_bounded(
        n in 1usize..=2,
        coefficients in proptest::collection::vec(-1.0f64..1.0, 64),
    ) {
        let basis = basis(n);
        let indices = basis.indices();
        let mut total = fraclab::fracpoisson::InteriorField::zeros(basis.grid.clone());
        let mut energy = 0.0;
        for (idx, alpha) in indices.iter().zip(coefficients.iter().cycle()) {
            total.axpy(*alpha, &basis.apply_a0_basis(*idx).unwrap());
            energy += alpha * alpha;
        }
        let c = basis.decay_constant();
        prop_assert!(total.norm().powi(2) <= c * c * energy, "{} vs {}", total.norm().powi(2), c * c * energy);
    }
}

/// The Poisson integral of the sampled exterior function reproduces the closed-form image.
#[test]
fn general_poisson_integral_matches_images() {
    for n in [1usize, 2] {
        let basis = basis(n);
        let annulus = AnnulusRule::<Wide>::new(n, 48, 12 * CAP).unwrap();
        let points: Vec<Vec<f64>> = match n {
            1 => vec![vec![-0.7], vec![0.0], vec![0.35], vec![0.9]],
            _ => vec![
                vec![0.1, -0.2],
                vec![0.5, 0.5],
                vec![-0.8, 0.1],
                vec![0.0, 0.0],
            ],
        };
        let wide_points: Vec<Vec<Wide>> = points
            .iter()
            .map(|p| p.iter().map(|x| Wide::from_f64(*x)).collect())
            .collect();
        for idx in [
            BasisIndex::new(0, 0, 0),
            BasisIndex::new(1, 2, 0),
            BasisIndex::new(0, CAP, 0),
        ] {
            let samples = basis.annulus_samples(idx, &annulus).unwrap();
            let general = apply_a0_general(basis.space, &samples, &wide_points, &annulus).unwrap();
            let scale = basis.image_norm(idx.m, idx.k).unwrap();
            for (p, g) in points.iter().zip(&general) {
                let direct = basis.image_at(idx, p).unwrap();
                assert!(
                    (g.to_f64() - direct).abs() <= 1e-7 * scale,
                    "n={n} {idx:?} at {p:?}: {} vs {direct}",
                    g.to_f64()
                );
            }
        }
    }
}

/// Doubling the radial quadrature leaves the images unchanged.
#[test]
fn images_are_quadrature_converged() {
    let params = ProblemParams::new(2, 0.25).unwrap();
    let truncation = Truncation::level(4);
    let grid = Arc::new(InteriorGrid::for_truncation(&params, &truncation).unwrap());
    let nodes = RadialQuadrature::<Wide>::default_count();
    let base = ExteriorBasis::<Wide>::build_with(&params, truncation, grid.clone(), nodes).unwrap();
    let doubled = ExteriorBasis::<Wide>::build_with(&params, truncation, grid, 2 * nodes).unwrap();
    for idx in base.indices() {
        let (a, b) = (
            base.image_norm(idx.m, idx.k).unwrap(),
            doubled.image_norm(idx.m, idx.k).unwrap(),
        );
        assert!((a - b).abs() <= 1e-9 * a, "{idx:?}: {a} vs {b}");
    }
}

#[test]
fn truncations_select_the_right_indices() {
    let level = Truncation::level(3);
    assert!(level.contains(1, 2) && !level.contains(2, 2));
    let rectangle = Truncation::rectangle(1, 4);
    assert!(rectangle.contains(1, 4) && !rectangle.contains(2, 0));
    // One dimension only has degrees 0 and 1.
    assert!(basis(1)
        .indices()
        .iter()
        .all(|i| i.m <= 1 && i.level() <= CAP));
}
