use std::sync::OnceLock;

use fraclab::dtn::{
    count_tuples, tuple_bound, weighted_tuple_sum, FracOp1d, GammaSolver, HarmonicDimension, Mesh,
    Potential,
};
use fraclab::fracpoisson::{BasisIndex, ExteriorBasis, Truncation};
use fraclab::numkit::ProblemParams;
use fraclab::{Error, Wide};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const S: f64 = 0.5;
const CAP: usize = 5;

fn solver() -> &'static GammaSolver {
    static SOLVER: OnceLock<GammaSolver> = OnceLock::new();
    SOLVER.get_or_init(|| {
        let params = ProblemParams::new(1, S).unwrap();
        let basis = ExteriorBasis::<Wide>::build(&params, Truncation::level(CAP)).unwrap();
        let op = FracOp1d::assemble(Mesh::new(200).unwrap(), S).unwrap();
        GammaSolver::new(&basis, op, CAP).unwrap()
    })
}

fn r0() -> f64 {
    solver().op().admissible_radius()
}

#[test]
fn zero_potential_gives_zero_matrix() {
    let gamma = solver().gamma(&Potential::zero()).unwrap();
    assert_eq!(gamma.x_norm(), 0.0);
    assert_eq!(gamma.len(), solver().indices().len());
}

#[test]
fn single_entries_match_the_full_matrix() {
    let q = Potential::bump(-0.2, 0.5, 0.4 * r0());
    let gamma = solver().gamma(&q).unwrap();
    let idx = solver().indices();
    for (i, j) in [(0, 0), (1, 3), (4, 2), (idx.len() - 1, 0)] {
        let entry = solver().entry(&q, idx[j], idx[i]).unwrap();
        let full = gamma.values[(i, j)];
        assert!(
            (entry - full).abs() <= 1e-12 * full.abs().max(1e-300),
            "({i},{j}): {entry} vs {full}"
        );
    }
    assert!(matches!(
        solver().entry(&q, BasisIndex::new(0, CAP + 1, 0), idx[0]),
        Err(Error::Index(_))
    ));
}

/// The flux route converges to the variational entries at first order in `h`.
#[test]
fn kernel_route_converges_to_variational_entries() {
    let q = Potential::bump(0.1, 0.6, 0.5 * r0());
    let params = ProblemParams::new(1, S).unwrap();
    let basis = ExteriorBasis::<Wide>::build(&params, Truncation::level(2)).unwrap();
    let gaps = |elements: usize| -> Vec<f64> {
        let op = FracOp1d::assemble(Mesh::new(elements).unwrap(), S).unwrap();
        let fine = GammaSolver::new(&basis, op, 2).unwrap();
        let idx = fine.indices().to_vec();
        [(0, 0), (0, 1), (1, 1), (0, 2)]
            .iter()
            .map(|&(a, b)| {
                let variational = fine.entry(&q, idx[a], idx[b]).unwrap();
                let kernel = fine.kernel_entry(&q, idx[a], idx[b]).unwrap();
                (variational - kernel).abs() / variational.abs()
            })
            .collect()
    };
    let (coarse, fine) = (gaps(200), gaps(400));
    assert!(fine[0] < 1e-2, "{fine:?}");
    for (c, f) in coarse.iter().zip(&fine) {
        assert!(c / f > 1.8 && *f < 0.05, "{c:e} -> {f:e}");
    }
}

/// `Γ(tq) = t Γ′q + O(t²)`: the second difference stays small next to the first.
#[test]
fn small_potentials_act_linearly() {
    let q = Potential::bump(0.0, 0.7, 1.0);
    for t in [0.02, 0.05] {
        let t = t * r0();
        let single = solver().gamma(&q.scaled(t)).unwrap();
        let double = solver().gamma(&q.scaled(2.0 * t)).unwrap();
        let mut twice = single.clone();
        twice.values *= 2.0;
        let curvature =
            double.minus(&twice).unwrap().hilbert_schmidt_norm() / double.hilbert_schmidt_norm();
        assert!(curvature < 0.1, "t={t}: {curvature}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn gamma_is_symmetric(center in -0.5f64..0.5, radius in 0.1f64..0.5, fraction in -1.0f64..1.0) {
        let q = Potential::bump(center, radius, fraction * r0());
        prop_assume!(fraction.abs() > 1e-3);
        let gamma = solver().gamma(&q).unwrap();
        prop_assert!(gamma.asymmetry() < 1e-10, "{}", gamma.asymmetry());
    }

    /// `‖v‖ ≤ (2/λ) ‖g‖` whenever `q ≥ −r₀`.
    #[test]
    fn dirichlet_solution_is_bounded(seed in any::<u64>(), use_bump in any::<bool>()) {
        let op = solver().op();
        let q = if use_bump { Potential::bump(0.3, 0.4, -r0()) } else { Potential::constant(-r0()) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rhs = DVector::from_fn(op.mesh.dofs(), |_, _| rng.gen_range(-1.0..1.0));
        let v = op.solve_dirichlet(&q, &rhs).unwrap();
        prop_assert!(op.l2_norm(&v) <= 2.0 / op.lambda_min() * op.l2_norm(&rhs) * (1.0 + 1e-10));
    }
}

#[test]
fn dirichlet_solver_on_simple_data() {
    let op = solver().op();
    let zero = op
        .solve_dirichlet(&Potential::zero(), &DVector::zeros(op.mesh.dofs()))
        .unwrap();
    assert_eq!(zero.amax(), 0.0);
    let phi = op.ground_state();
    let v = op.solve_dirichlet(&Potential::zero(), phi).unwrap();
    let expected = phi / op.lambda_min();
    assert!((v - &expected).amax() <= 1e-9 * expected.amax());
    assert!(op
        .solve_dirichlet(&Potential::zero(), &DVector::zeros(3))
        .is_err());
}

#[test]
fn potentials_above_the_ground_energy_are_rejected() {
    let op = solver().op();
    let q = Potential::constant(-1.01 * op.lambda_min());
    let rhs = DVector::from_element(op.mesh.dofs(), 1.0);
    assert!(matches!(
        op.solve_dirichlet(&q, &rhs),
        Err(Error::Solvability { .. })
    ));
}

#[test]
fn ground_energy_is_mesh_stable() {
    for s in [0.25, 0.5, 0.75] {
        let coarse = FracOp1d::assemble(Mesh::new(100).unwrap(), s)
            .unwrap()
            .lambda_min();
        let fine = FracOp1d::assemble(Mesh::new(200).unwrap(), s)
            .unwrap()
            .lambda_min();
        assert!(
            (coarse - fine).abs() < 0.02 * fine,
            "s={s}: {coarse} vs {fine}"
        );
    }
}

#[test]
fn torsion_function_matches_closed_form() {
    for s in [0.25, 0.5, 0.75] {
        let residual = FracOp1d::assemble(Mesh::new(400).unwrap(), s)
            .unwrap()
            .closed_form_residual()
            .unwrap();
        assert!(residual < 5e-3, "s={s}: {residual:e}");
    }
}

#[test]
fn x_norm_examples() {
    let idx = vec![BasisIndex::new(0, 0, 0), BasisIndex::new(0, 1, 0)];
    let mut mat = fraclab::dtn::GammaMatrix::zeros(1, idx);
    assert_eq!(mat.x_norm(), 0.0);
    mat.values[(0, 0)] = 2.0;
    assert_eq!(mat.x_norm(), 2.0);
    mat.values[(1, 0)] = 1.0;
    // Level 1 carries the weight 2³.
    assert_eq!(mat.x_norm(), 8.0);
}

#[test]
fn tuple_counts_against_the_bound() {
    for n in 1..=3 {
        for dim in [HarmonicDimension::Exact, HarmonicDimension::Bound] {
            for p in 0..=20 {
                assert!(
                    count_tuples(p, n, dim) as f64 <= tuple_bound(p, n),
                    "n={n} p={p} {dim:?}"
                );
            }
            assert!(weighted_tuple_sum(n, dim, 200) <= 16.0);
        }
    }
}
