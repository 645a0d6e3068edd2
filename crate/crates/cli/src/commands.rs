use std::path::Path;

use fraclab::dtn::{
    count_tuples, fit_decay, indices_up_to, tuple_bound, FracOp1d, GammaMatrix, GammaSolver,
    HarmonicDimension, Mesh, Potential,
};
use fraclab::fracpoisson::{control_growth, decay_report, ExteriorBasis, Truncation};
use fraclab::hadamard::{
    asymptotic_ratio, boundary_flux, growth_check, residual_table, ExtensionSolution, ResidualGrid,
};
use fraclab::hilbert1d::{
    control_growth_1d, ht_frac_identity, ht_svd, quadratic_trend, singular_image_check,
    sturm_liouville_check, TruncatedHt,
};
use fraclab::mandache::{instability_search, BumpFamilySpec, SearchParams};
use fraclab::numkit::ProblemParams;
use fraclab::radialbasis::vanishing_order;
use fraclab::{Scalar, WideFloat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::report::{Report, ReportBuilder};
use crate::{CliError, Command};

type Outcome = Result<Report, CliError>;

/// Runs `$f::<T>(args)` with `T` chosen from the configured precision.
macro_rules! with_precision {
    ($bits:expr, $f:ident($($arg:expr),*)) => {
        match $bits {
            53 => $f::<f64>($($arg),*),
            128 => $f::<WideFloat<128>>($($arg),*),
            256 => $f::<WideFloat<256>>($($arg),*),
            320 => $f::<WideFloat<320>>($($arg),*),
            512 => $f::<WideFloat<512>>($($arg),*),
            other => Err(CliError::Config(format!("unsupported precision {other}"))),
        }
    };
}

pub fn dispatch(command: Command, config: &RunConfig) -> Outcome {
    let out = config.out.as_path();
    let bits = config.precision_bits;
    let result = match command {
        Command::Basis => with_precision!(bits, basis(config, out)),
        Command::Decay => with_precision!(bits, decay(config, out)),
        Command::Gamma => with_precision!(bits, gamma(config, out)),
        Command::Instability => with_precision!(bits, instability(config, out)),
        Command::Approx => with_precision!(bits, approx(config, out)),
        Command::Hilbert => hilbert(config, out),
        Command::Hadamard => hadamard(config, out),
        Command::All => all(config, out),
    };
    result.map_err(|e| match e {
        CliError::Library(source) => CliError::Command {
            command: command.name(),
            source,
        },
        other => other,
    })
}

fn all(config: &RunConfig, out: &Path) -> Outcome {
    let mut report = ReportBuilder::new(out, "all")?;
    for command in [
        Command::Basis,
        Command::Decay,
        Command::Gamma,
        Command::Instability,
        Command::Approx,
        Command::Hilbert,
        Command::Hadamard,
    ] {
        let sub = dispatch(command, config)?;
        let failed: Vec<&str> = sub
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        let detail = if failed.is_empty() {
            format!("{} checks passed", sub.checks.len())
        } else {
            format!("failed: {}", failed.join(", "))
        };
        report.check(command.name(), sub.passed, detail);
    }
    report.finish(config)
}

const SLOPE_MARGIN: f64 = 0.05;
const ORTHONORMALITY_TOL: f64 = 1e-10;

#[derive(Serialize)]
struct DecayCsvRow {
    n: usize,
    s: f64,
    m: usize,
    k: usize,
    l: usize,
    norm: f64,
    bound: f64,
}

#[derive(Serialize)]
struct RadialRow {
    m: usize,
    k_max: usize,
    condition: f64,
    gram_residual: f64,
    moment_residual: f64,
}

fn max_moment<T: Scalar>(basis: &ExteriorBasis<T>) -> Result<f64, CliError> {
    let mut worst = 0.0f64;
    for m in 0..=basis.m_top() {
        let radial = basis.radial_basis(m)?;
        for k in 0..=radial.k_max() {
            if let Some(k0) = vanishing_order(k) {
                for j in 0..=k0 {
                    worst = worst.max(radial.moment(k, j)?.to_f64().abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Decay rows plus the bound and slope checks for one `(n, s)`.
fn decay_checks<T: Scalar>(
    report: &mut ReportBuilder,
    basis: &ExteriorBasis<T>,
    rows: &mut Vec<DecayCsvRow>,
) -> Result<(), CliError> {
    let decay = decay_report(basis)?;
    let (n, s) = (decay.n, decay.s);
    let violations = decay.violations().len();
    let worst = decay
        .rows
        .iter()
        .map(|r| r.norm / r.bound)
        .fold(0.0, f64::max);
    report.check(
        &format!("decay bound n={n} s={s}"),
        violations == 0,
        format!(
            "{violations} of {} rows above c·2^(-m-k); max ratio {worst:.3e}",
            decay.rows.len()
        ),
    );
    let levels = decay.rows.iter().map(|r| r.m + r.k).max().unwrap_or(0);
    if levels >= 1 {
        let threshold = -(2f64.ln()) + SLOPE_MARGIN;
        report.check(
            &format!("decay slope n={n} s={s}"),
            decay.slope <= threshold,
            format!("fitted slope {:.4} against {threshold:.4}", decay.slope),
        );
    }
    rows.extend(decay.rows.iter().map(|r| DecayCsvRow {
        n,
        s,
        m: r.m,
        k: r.k,
        l: r.l,
        norm: r.norm,
        bound: r.bound,
    }));
    Ok(())
}

fn basis<T: Scalar>(config: &RunConfig, out: &Path) -> Outcome {
    let mut report = ReportBuilder::new(out, "basis")?;
    let params = config.problem()?;
    let basis = ExteriorBasis::<T>::build(&params, Truncation::level(config.basis.cap))?;
    let radial = (0..=basis.m_top())
        .map(|m| -> Result<RadialRow, CliError> {
            let r = basis.radial_basis(m)?;
            Ok(RadialRow {
                m,
                k_max: r.k_max(),
                condition: r.condition.iter().cloned().fold(0.0, f64::max),
                gram_residual: r.gram_residual,
                moment_residual: r.moment_residual,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    report.table("radial", radial)?;
    let gram = basis.gram_deviation(config.basis.gram_nodes)?;
    report.check(
        "exterior gram",
        gram < ORTHONORMALITY_TOL,
        format!("max |G − I| = {gram:.3e}"),
    );
    let moment = max_moment(&basis)?;
    report.check(
        "vanishing moments",
        moment < ORTHONORMALITY_TOL,
        format!("max |moment| = {moment:.3e}"),
    );
    let mut rows = Vec::new();
    decay_checks(&mut report, &basis, &mut rows)?;
    report.note("decay_constant", basis.decay_constant())?;
    report.note("indices", rows.len())?;
    report.table("decay", rows)?;
    report.finish(config)
}

fn decay<T: Scalar>(config: &RunConfig, out: &Path) -> Outcome {
    let mut report = ReportBuilder::new(out, "decay")?;
    let mut rows = Vec::new();
    for &n in &config.decay.dims {
        for &s in &config.decay.s_values {
            let mut params = ProblemParams::new(n, s)?;
            params.precision_bits = config.precision_bits;
            let basis = ExteriorBasis::<T>::build(&params, Truncation::level(config.decay.cap))?;
            decay_checks(&mut report, &basis, &mut rows)?;
        }
    }
    report.table("decay", rows)?;
    report.finish(config)
}

#[derive(Serialize)]
struct EntryRow {
    row_m: usize,
    row_k: usize,
    row_l: usize,
    col_m: usize,
    col_k: usize,
    col_l: usize,
    value: f64,
}

fn entry_rows(mat: &GammaMatrix) -> Vec<EntryRow> {
    mat.entries()
        .into_iter()
        .map(|e| EntryRow {
            row_m: e.row.m,
            row_k: e.row.k,
            row_l: e.row.l,
            col_m: e.col.m,
            col_k: e.col.k,
            col_l: e.col.l,
            value: e.value,
        })
        .collect()
}

#[derive(Serialize)]
struct LevelRow {
    level: usize,
    diagonal: f64,
    level_max: f64,
}

#[derive(Serialize)]
struct CountRow {
    n: usize,
    p: usize,
    count: u64,
    brute_force: Option<u64>,
    bound: f64,
    weighted: f64,
}

#[derive(Serialize)]
struct NormChainRow {
    trial: usize,
    n: usize,
    size: usize,
    operator_norm: f64,
    x_norm: f64,
    ratio: f64,
}

/// Largest level compared against brute-force enumeration.
const BRUTE_FORCE_LEVEL: usize = 6;

fn brute_force_count(n: usize, p: usize) -> u64 {
    let indices = indices_up_to(n, p);
    let mut count = 0;
    for a in &indices {
        for b in &indices {
            if a.level().max(b.level()) == p {
                count += 1;
            }
        }
    }
    count
}

/// `±u / weight` with `u` uniform or saturated at 1, so `‖T‖_X ≤ 1`.
fn random_admissible(n: usize, cap: usize, rng: &mut ChaCha8Rng) -> GammaMatrix {
    let mut mat = GammaMatrix::zeros(n, indices_up_to(n, cap));
    let saturated = rng.gen_bool(0.5);
    for i in 0..mat.len() {
        for j in 0..mat.len() {
            let size: f64 = if saturated {
                1.0
            } else {
                rng.gen_range(0.0..1.0)
            };
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            mat.values[(i, j)] = sign * size / mat.weight(i, j);
        }
    }
    mat
}

fn gamma<T: Scalar>(config: &RunConfig, out: &Path) -> Outcome {
    let mut report = ReportBuilder::new(out, "gamma")?;
    let g = &config.gamma;
    let params = config.problem()?;
    if params.n != 1 {
        return Err(CliError::Config(
            "the Γ computation is one-dimensional; set n = 1".into(),
        ));
    }
    let basis = ExteriorBasis::<T>::build(&params, Truncation::level(g.cap))?;
    let mut fits = Vec::new();
    let mut fine = None;
    for elements in [g.elements / 2, g.elements] {
        let op = FracOp1d::assemble(Mesh::new(elements)?, params.s)?;
        let r0 = op.admissible_radius();
        let solver = GammaSolver::new(&basis, op, g.cap)?;
        let q = Potential::bump(g.bump_center, g.bump_radius, g.amplitude_fraction * r0);
        let mat = solver.gamma(&q)?;
        fits.push(fit_decay(&mat, q.sup_norm(), solver.op().lambda_min())?);
        fine = Some((mat, r0, solver.op().lambda_min()));
    }
    let (mat, r0, lambda_min) = fine.expect("two meshes were evaluated");
    let fit = &fits[1];
    let asymmetry = mat.asymmetry();
    report.check(
        "symmetry",
        asymmetry < 1e-6,
        format!("max relative |a_ij − a_ji| = {asymmetry:.3e}"),
    );
    report.check(
        "diagonal decay",
        fit.diagonal_rate > 0.0,
        format!("fitted rate {:.4}", fit.diagonal_rate),
    );
    let drift = (fits[1].diagonal_rate - fits[0].diagonal_rate).abs() / fits[1].diagonal_rate.abs();
    report.check(
        "mesh stability",
        drift < 0.1,
        format!(
            "rate {:.4} at {} elements vs {:.4} at {}",
            fits[0].diagonal_rate,
            g.elements / 2,
            fits[1].diagonal_rate,
            g.elements
        ),
    );
    report.note("lambda_min", lambda_min)?;
    report.note("admissible_radius", r0)?;
    report.note("x_norm", mat.x_norm())?;
    report.note("operator_norm", mat.operator_norm()?)?;
    report.note("hilbert_schmidt_norm", mat.hilbert_schmidt_norm())?;
    report.note("decay", fit)?;
    report.table("entries", entry_rows(&mat))?;
    report.table(
        "levels",
        fit.levels
            .iter()
            .zip(fit.diagonal.iter().zip(&fit.level_maxima))
            .map(|(level, (d, m))| LevelRow {
                level: *level,
                diagonal: *d,
                level_max: *m,
            }),
    )?;

    let mut counts = Vec::new();
    let (mut brute_ok, mut bound_ok, mut sums) = (true, true, Vec::new());
    for n in 1..=3usize {
        let mut sum = 0.0;
        for p in 0..=g.p_max {
            let count = count_tuples(p, n, HarmonicDimension::Exact);
            let count = u64::try_from(count)
                .map_err(|_| CliError::Config("counting table overflows".into()))?;
            let brute_force = (p <= BRUTE_FORCE_LEVEL).then(|| brute_force_count(n, p));
            let weighted = count as f64 * (1.0 + p as f64).powi(-2 * (n as i32 + 2));
            sum += weighted;
            brute_ok &= brute_force.is_none_or(|b| b == count);
            bound_ok &= count as f64 <= tuple_bound(p, n);
            counts.push(CountRow {
                n,
                p,
                count,
                brute_force,
                bound: tuple_bound(p, n),
                weighted,
            });
        }
        sums.push(sum);
    }
    report.check(
        "counting brute force",
        brute_ok,
        format!("levels 0..={BRUTE_FORCE_LEVEL}, n = 1, 2, 3"),
    );
    report.check(
        "counting bound",
        bound_ok,
        format!("N_p ≤ 8(p+1)^(2n+1) for p ≤ {}", g.p_max),
    );
    report.check(
        "weighted count",
        sums.iter().all(|s| *s <= 16.0),
        format!("Σ(1+p)^(-2(n+2)) N_p = {sums:.4?}"),
    );
    report.table("counting", counts)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut chain = Vec::with_capacity(g.norm_samples);
    for trial in 0..g.norm_samples {
        let n = 1 + trial % 3;
        let sample = random_admissible(n, [12, 8, 6][n - 1], &mut rng);
        let (op, x) = (sample.operator_norm()?, sample.x_norm());
        chain.push(NormChainRow {
            trial,
            n,
            size: sample.len(),
            operator_norm: op,
            x_norm: x,
            ratio: op / x,
        });
    }
    let worst = chain.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let violations = chain.iter().filter(|r| r.ratio > 4.0).count();
    report.check(
        "norm chain",
        violations == 0,
        format!(
            "{violations} of {} random matrices exceed ‖T‖op ≤ 4‖T‖X; max ratio {worst:.4}",
            chain.len()
        ),
    );
    report.table("norm_chain", chain)?;
    report.finish(config)
}

#[derive(Serialize)]
struct PairRow {
    x: f64,
    first: f64,
    second: f64,
}

fn instability<T: Scalar>(config: &RunConfig, out: &Path) -> Outcome {
    let mut report = ReportBuilder::new(out, "instability")?;
    let c = &config.instability;
    let params = config.problem()?;
    if params.n != 1 {
        return Err(CliError::Config(
            "the instability search is one-dimensional; set n = 1".into(),
        ));
    }
    let basis = ExteriorBasis::<T>::build(&params, Truncation::level(c.cap))?;
    let op = FracOp1d::assemble(Mesh::new(c.elements)?, params.s)?;
    let r0 = op.admissible_radius();
    let solver = GammaSolver::new(&basis, op, c.cap)?;
    let g = &config.gamma;
    let probe = Potential::bump(g.bump_center, g.bump_radius, g.amplitude_fraction * r0);
    let fit = fit_decay(
        &solver.gamma(&probe)?,
        probe.sup_norm(),
        solver.op().lambda_min(),
    )?;
    let epsilon = c.epsilon_fraction * r0;
    let spec = BumpFamilySpec::with_subdivisions(params.n, c.smoothness, epsilon, c.subdivisions)?;
    let search = SearchParams {
        max_members: c.max_members,
        sampled_members: c.sampled_members,
        seed: config.seed,
        prefactor: fit.envelope,
        rate: fit.envelope_rate,
    };
    let (first, second, result) = instability_search(&Potential::zero(), &spec, &solver, &search)?;
    let gap = (result.potential_distance - epsilon).abs() / epsilon;
    report.check(
        "pair separation",
        gap < 1e-9,
        format!(
            "‖q₁ − q₂‖∞ = {:.6e} with ε = {epsilon:.6e}",
            result.potential_distance
        ),
    );
    report.check(
        "contraction",
        result.contraction_ratio < 1e-2,
        format!(
            "‖Γ(q₁) − Γ(q₂)‖X / ‖q₁ − q₂‖∞ = {:.3e}; relative to the single-member response {:.3e}",
            result.contraction_ratio, result.relative_contraction
        ),
    );
    report.note("search", &result)?;
    report.note("family", &spec)?;
    let samples = 201;
    report.table(
        "pair",
        (0..samples).map(|i| {
            let x = -1.0 + 2.0 * i as f64 / (samples - 1) as f64;
            PairRow {
                x,
                first: first.eval(x),
                second: second.eval(x),
            }
        }),
    )?;
    report.finish(config)
}

#[derive(Serialize)]
struct ControlRow {
    n: usize,
    p: usize,
    norm: f64,
    lower_bound: f64,
    residual: f64,
}

fn approx<T: Scalar>(config: &RunConfig, out: &Path) -> Outcome {
    let mut report = ReportBuilder::new(out, "approx")?;
    let a = &config.approx;
    let ps: Vec<usize> = (a.p_min..=a.p_max).collect();
    let threshold = 2f64.ln() - 0.1;
    let mut rows = Vec::new();
    for &n in &a.dims {
        let mut params = ProblemParams::new(n, config.s)?;
        params.precision_bits = config.precision_bits;
        let basis = ExteriorBasis::<T>::build(&params, Truncation::rectangle(a.k_max, a.k_max))?;
        let growth = control_growth(&basis, &ps)?;
        let below = growth
            .rows
            .iter()
            .filter(|r| r.norm < r.lower_bound)
            .count();
        report.check(
            &format!("lower bound n={n}"),
            below == 0,
            format!("{below} of {} controls below c₀2^p", growth.rows.len()),
        );
        if ps.len() >= 2 {
            report.check(
                &format!("growth slope n={n}"),
                growth.slope >= threshold,
                format!("log-slope {:.4} against {threshold:.4}", growth.slope),
            );
        }
        let feasible = growth
            .rows
            .iter()
            .all(|r| r.residual <= (1.0 + 1e-6) / r.p as f64);
        report.check(
            &format!("residual budget n={n}"),
            feasible,
            "residual ≤ 1/p for every target",
        );
        rows.extend(growth.rows.iter().map(|r| ControlRow {
            n,
            p: r.p,
            norm: r.norm,
            lower_bound: r.lower_bound,
            residual: r.residual,
        }));
    }
    report.table("control", rows)?;
    report.finish(config)
}

#[derive(Serialize)]
struct SigmaRow {
    l: usize,
    sigma: f64,
    forward_residual: f64,
    backward_residual: f64,
}

#[derive(Serialize)]
struct Control1dCsvRow {
    k: usize,
    sigma: f64,
    control_norm: f64,
    inverse_sigma: f64,
    ratio: f64,
    residual: f64,
}

fn hilbert(config: &RunConfig, out: &Path) -> Outcome {
    let mut report = ReportBuilder::new(out, "hilbert")?;
    let h = &config.hilbert;
    let s = config.s;
    let ht = TruncatedHt::build(h.nodes, h.nodes)?;
    let svd = ht_svd(&ht, h.count)?;
    let resolved = svd.triples.len();
    let (slope, _, rms) = svd.decay_fit();
    report.check(
        "σ decay",
        slope < 0.0 && rms < 0.05,
        format!("log σ_l slope {slope:.4}, normalized fit residual {rms:.4}"),
    );
    let residual = svd
        .triples
        .iter()
        .map(|t| t.forward_residual.max(t.backward_residual))
        .fold(0.0, f64::max);
    report.check(
        "singular triples",
        residual < 1e-8,
        format!("{resolved} resolved, max residual {residual:.3e}"),
    );
    report.table(
        "sigma",
        svd.triples.iter().map(|t| SigmaRow {
            l: t.index,
            sigma: t.sigma,
            forward_residual: t.forward_residual,
            backward_residual: t.backward_residual,
        }),
    )?;

    let sl = (0..resolved.min(9))
        .map(|l| sturm_liouville_check(&svd, l))
        .collect::<Result<Vec<_>, _>>()?;
    let sl_worst = sl.iter().map(|r| r.residual).fold(0.0, f64::max);
    report.check(
        "commuting differential operator",
        sl_worst < 5e-2,
        format!("max interior residual {sl_worst:.3e} for l < {}", sl.len()),
    );
    let trend = quadratic_trend(&sl)?;
    report.check(
        "eigenvalue trend",
        trend[2] > 0.0,
        format!(
            "λ_l ≈ {:.3} + {:.3} l + {:.3} l²",
            trend[0], trend[1], trend[2]
        ),
    );
    report.table("sturm_liouville", &sl)?;

    let mut discrepancy = 0.0f64;
    let mut collinearity = 1.0f64;
    let data: [&dyn Fn(f64) -> f64; 3] = [&|_| 1.0, &|y| y * y - 2.0 * y, &|y| (-y).exp()];
    for g in data {
        let r = ht_frac_identity(g, s, &ht)?;
        discrepancy = discrepancy.max(r.discrepancy);
        collinearity = collinearity.min(r.collinearity);
    }
    for t in svd.triples.iter().take_while(|t| t.sigma >= 1e-8) {
        let r = singular_image_check(&svd, s, t.index)?;
        discrepancy = discrepancy.max(r.discrepancy);
        collinearity = collinearity.min(r.collinearity);
    }
    report.check(
        "Poisson–Hilbert identity",
        discrepancy < 1e-8 && collinearity > 1.0 - 1e-10,
        format!("relative discrepancy {discrepancy:.3e}, collinearity {collinearity:.14}"),
    );

    let ks: Vec<usize> = (2..=h.k_max.min(resolved.saturating_sub(1))).collect();
    let control = control_growth_1d(&svd, s, &ks)?;
    let band = &control.band;
    let tracked = control.rows.iter().all(|r| {
        let target = 1.0 - 1.0 / r.k as f64;
        r.ratio >= band.lower * target && r.ratio <= band.upper * target
    });
    report.check(
        "control tracks 1/σ_k",
        tracked,
        format!(
            "c σ_k ‖f‖ within [{:.3}, {:.3}]·(1 − 1/k); log-slope {:.4} vs σ {:.4}",
            band.lower, band.upper, control.norm_slope, control.sigma_slope
        ),
    );
    report.note("norm_band", band)?;
    report.table(
        "control",
        control.rows.iter().map(|r| Control1dCsvRow {
            k: r.k,
            sigma: r.sigma,
            control_norm: r.control_norm,
            inverse_sigma: 1.0 / r.sigma,
            ratio: r.ratio,
            residual: r.residual,
        }),
    )?;
    report.finish(config)
}

#[derive(Serialize)]
struct ResidualCsvRow {
    h: f64,
    residual: f64,
    wrong_order_residual: f64,
}

#[derive(Serialize)]
struct GrowthCsvRow {
    n: usize,
    y0: f64,
    log_abs_v: f64,
    abs_v: f64,
    asymptotic_ratio: f64,
}

#[derive(Serialize)]
struct FluxRow {
    x: f64,
    y: f64,
    flux: f64,
}

const RESIDUAL_GRID: ResidualGrid = ResidualGrid {
    x_range: (0.1, 1.2),
    y_range: (0.2, 1.0),
    points: 9,
};
const FLUX_LEVELS: std::ops::Range<i32> = 2..12;

fn hadamard(config: &RunConfig, out: &Path) -> Outcome {
    let mut report = ReportBuilder::new(out, "hadamard")?;
    let d = &config.hadamard;
    let s = config.s;
    let sol = ExtensionSolution::new(d.frequency, s)?;
    let table = residual_table(&sol, &RESIDUAL_GRID, &d.steps)?;
    let wrong = residual_table(&sol.with_order_shift(0.1), &RESIDUAL_GRID, &d.steps)?;
    let order = table
        .windows(2)
        .map(|w| w[0].residual / w[1].residual)
        .fold(f64::INFINITY, f64::min);
    report.check(
        "second-order residual",
        order >= 3.5,
        format!("smallest refinement ratio {order:.3}"),
    );
    let (last, last_wrong) = (
        table[table.len() - 1].residual,
        wrong[wrong.len() - 1].residual,
    );
    report.check(
        "wrong order stalls",
        last_wrong > 10.0 * last,
        format!("finest residual {last_wrong:.3e} with I_(s+0.1) vs {last:.3e}"),
    );
    report.table(
        "residual",
        table.iter().zip(&wrong).map(|(a, b)| ResidualCsvRow {
            h: a.h,
            residual: a.residual,
            wrong_order_residual: b.residual,
        }),
    )?;

    let peak = boundary_flux(&sol, sol.peak_x(), FLUX_LEVELS)?;
    let zero = boundary_flux(&sol, 0.0, FLUX_LEVELS)?;
    report.check(
        "unit flux",
        (peak.limit - 1.0).abs() < 1e-6,
        format!("extrapolated flux {:.12} at x = π/(2n)", peak.limit),
    );
    report.check(
        "zero flux",
        zero.limit.abs() < 1e-12,
        format!("extrapolated flux {:.3e} at x = 0", zero.limit),
    );
    report.note("flux_constant", sol.constant)?;
    report.table(
        "flux",
        peak.heights.iter().zip(&peak.fluxes).map(|(y, f)| FluxRow {
            x: peak.x,
            y: *y,
            flux: *f,
        }),
    )?;

    let growth = growth_check(s, d.x0, d.y0, d.n_min..=d.n_max)?;
    report.check(
        "growth normalization",
        growth.spread <= 0.05,
        format!("max |exp(normalized − limit) − 1| = {:.4e}", growth.spread),
    );
    let far = ExtensionSolution::new(d.asymptotic_n, s)?;
    let ratio = asymptotic_ratio(&far, d.x0, d.y0)?;
    report.check(
        "asymptotic ratio",
        (ratio - 1.0).abs() < 0.03,
        format!("ratio {ratio:.5} at n = {}", d.asymptotic_n),
    );
    let rows = growth
        .rows
        .iter()
        .map(|r| -> Result<GrowthCsvRow, CliError> {
            let sol = ExtensionSolution::new(r.n as f64, s)?;
            Ok(GrowthCsvRow {
                n: r.n,
                y0: d.y0,
                log_abs_v: r.log_abs_v,
                abs_v: r.log_abs_v.exp(),
                asymptotic_ratio: asymptotic_ratio(&sol, d.x0, d.y0)?,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    report.table("growth", rows)?;

    let half = ExtensionSolution::new(3.0, 0.5)?;
    let mut classical = 0.0f64;
    for (x, y) in [(0.3f64, 0.2f64), (1.1, 0.7), (-0.4, 1.5), (0.9, 3.0)] {
        let exact = (3.0 * x).sin() * (3.0 * y).sinh() / 3.0;
        classical = classical.max((half.eval(x, y)? - exact).abs() / exact.abs());
    }
    report.check(
        "classical limit",
        classical < 1e-12,
        format!("s = 1/2 against sin(3x) sinh(3y)/3: relative gap {classical:.3e}"),
    );
    report.finish(config)
}
