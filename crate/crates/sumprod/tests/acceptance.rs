//! End-to-end acceptance battery.  Each test covers one numbered
//! criterion and prints a single `AC<k> PASS`/`AC<k> FAIL` line with the
//! measured quantities; tolerances are pinned here, next to the checks.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use std::time::Instant;

use sumprod::avg::{Kahan, KahanComplex, TruncationLadder};
use sumprod::catalog;
use sumprod::ineq::{
    dilation_transfer_gap, multiplicative_vdc, turan_kubilius_log, VdcFamily,
};
use sumprod::patterns::{
    density_report, dsharp_estimate, find_patterns, iterated_affine_correlation,
    valuation_obstruction_check, PatternConstraints, SetSpec,
};
use sumprod::poly::{IntPolynomial, RationalPoly};
use sumprod::primes::sieve_block;
use sumprod::ramsey::{
    mr_lower_bound, search_threshold, verify_coloring, SearchOutcome, DEFAULT_NODE_BUDGET,
};
use sumprod::seq::{Alpha, SequenceSpec};
use sumprod::spectral::{
    correlation_sequence, herglotz_psd_check, isometry_gap_tolerance, isometry_identity_gap,
    prime_exp_sum, rational_mass, AvgMode,
};
use sumprod::structure::{modulus_ladder_decompose, residue_projection};

/// Collects the subchecks of one criterion and prints its verdict line.
struct Criterion {
    tag: &'static str,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Criterion {
    fn new(tag: &'static str) -> Self {
        Criterion { tag, failures: Vec::new(), notes: Vec::new() }
    }

    fn check(&mut self, ok: bool, detail: String) {
        if ok {
            self.notes.push(detail);
        } else {
            self.failures.push(detail);
        }
    }

    fn finish(self) {
        if self.failures.is_empty() {
            println!("{} PASS  {}", self.tag, self.notes.join("; "));
        } else {
            println!("{} FAIL  {}", self.tag, self.failures.join("; "));
            panic!("{}: {}", self.tag, self.failures.join("; "));
        }
    }
}

fn unit_disk(rng: &mut ChaCha8Rng) -> Complex64 {
    let r = rng.gen_range(0.0..1.0f64).sqrt();
    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
    Complex64::from_polar(r, theta)
}

#[test]
fn ac01_logarithmic_turan_kubilius_is_unconditional() {
    let mut c = Criterion::new("AC1");
    let start = Instant::now();
    for n in [100u64, 1_000, 10_000, 100_000] {
        let block = sieve_block(1, n).unwrap();
        let report = turan_kubilius_log(&block, n).unwrap();
        c.check(
            report.holds,
            format!(
                "N={n}: lhs {:.6} vs 9/S {:.6}",
                report.lhs, report.rhs_main
            ),
        );
    }
    let elapsed = start.elapsed();
    c.check(elapsed.as_secs() < 60, format!("runtime {elapsed:.2?} (budget 60s)"));
    c.finish();
}

#[test]
fn ac02_dilation_gap_stays_under_budget() {
    let mut c = Criterion::new("AC2");
    let mut worst_ratio = 0.0f64;
    for (name, f) in catalog::one_bounded_functions() {
        for q in [2u64, 3, 5, 10] {
            for n in [10_000u64, 1_000_000] {
                let report = dilation_transfer_gap(&f, q, n).unwrap();
                let ratio = report.lhs / report.rhs_error_budget;
                worst_ratio = worst_ratio.max(ratio);
                c.check(
                    report.holds,
                    format!("{name} q={q} N={n}: gap {:.4}", report.lhs),
                );
            }
        }
    }
    c.notes.clear();
    c.notes.push(format!(
        "40 configurations, worst gap/budget ratio {worst_ratio:.3}"
    ));
    c.finish();
}

#[test]
fn ac03_multiplicative_vdc_holds_everywhere() {
    let mut c = Criterion::new("AC3");
    let n = 1_000_000u64;
    let block = sieve_block(1, 1_000).unwrap();

    let one = SequenceSpec::constant(1.0);
    let r = multiplicative_vdc(&VdcFamily::Uniform(one.clone()), &one, &block, n).unwrap();
    c.check(
        r.holds && r.lhs == 1.0 && r.rhs_main == 1.0,
        format!("constant: lhs {} rhs {}", r.lhs, r.rhs_main),
    );

    let lam = SequenceSpec::Liouville;
    let r = multiplicative_vdc(&VdcFamily::Uniform(lam.clone()), &lam, &block, n).unwrap();
    c.check(
        r.holds && (r.rhs_main - 1.0).abs() < 1e-9,
        format!("liouville: lhs {:.6} rhs {:.6}", r.lhs, r.rhs_main),
    );

    let fwd = SequenceSpec::linear_character(Alpha::sqrt(2).unwrap());
    let bwd = SequenceSpec::linear_character(Alpha::sqrt(2).unwrap().neg());
    let r = multiplicative_vdc(&VdcFamily::Uniform(fwd), &bwd, &block, n).unwrap();
    c.check(
        r.holds,
        format!("character: lhs {:.6} rhs {:.6}+{:.6}", r.lhs, r.rhs_main, r.rhs_error_budget),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut held = 0;
    for _ in 0..20 {
        let len = rng.gen_range(2..=12usize);
        let values: Vec<Complex64> = (0..len).map(|_| unit_disk(&mut rng)).collect();
        let f = SequenceSpec::PeriodicTable(Arc::new(values));
        let r = multiplicative_vdc(&VdcFamily::Uniform(f.clone()), &f, &block, n).unwrap();
        if r.holds {
            held += 1;
        }
    }
    c.check(held == 20, format!("{held}/20 random tables hold"));
    c.finish();
}

#[test]
fn ac04_spectral_side_behaves() {
    let mut c = Criterion::new("AC4");

    // Positivity at order 25 for every catalog function.
    for (name, f) in catalog::one_bounded_functions() {
        let corr = correlation_sequence(&f, 100_000, 24).unwrap();
        let report = herglotz_psd_check(&corr, 25).unwrap();
        c.check(
            report.psd,
            format!("{name}: min eig {:.2e} tol {:.2e}", report.min_eigenvalue, report.tolerance),
        );
    }

    // Isometry identity on 100 seeded draws, 20 per catalog function.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut in_tol = 0;
    for (_, f) in catalog::one_bounded_functions() {
        let corr = correlation_sequence(&f, 100_000, 40).unwrap();
        for _ in 0..20 {
            let l = rng.gen_range(1..=4usize);
            let lags: Vec<i64> = (0..l).map(|_| rng.gen_range(0..=20i64)).collect();
            let coeffs: Vec<Complex64> = (0..l).map(|_| unit_disk(&mut rng)).collect();
            let gap = isometry_identity_gap(&corr, &lags, &coeffs).unwrap();
            if gap <= isometry_gap_tolerance(&corr, &coeffs) {
                in_tol += 1;
            }
        }
    }
    c.check(in_tol == 100, format!("{in_tol}/100 isometry draws within tolerance"));

    // Full rational mass for the alternating sequence.
    let corr = correlation_sequence(&SequenceSpec::alternating(), 100_000, 100).unwrap();
    let mass = rational_mass(&corr, 2, 50).unwrap();
    c.check((mass - 1.0).abs() <= 1e-3, format!("alternating mass at q=2: {mass}"));

    // No rational mass for the sqrt2 character at small denominators.
    let f = SequenceSpec::linear_character(Alpha::sqrt(2).unwrap());
    let corr = correlation_sequence(&f, 1_000_000, 600).unwrap();
    let mut worst = 0.0f64;
    for q in 1..=6u64 {
        worst = worst.max(rational_mass(&corr, q, 100).unwrap().abs());
    }
    c.check(worst <= 0.05, format!("sqrt2 mass worst over q<=6: {worst:.4}"));
    c.finish();
}

#[test]
fn ac05_prime_exponential_sums_decay() {
    let mut c = Criterion::new("AC5");
    let q = RationalPoly::integer(IntPolynomial::new(vec![0, 0, 1]));
    let alpha = Alpha::sqrt(2).unwrap();
    // Cesaro weights are the classical (Vinogradov) normalization; log weights
    // keep ~17% of the mass on p = 2 even at M = 10^6 and stall near 0.14.
    let mut last = f64::INFINITY;
    let mut moduli = Vec::new();
    for m in [1_000u64, 10_000, 100_000, 1_000_000] {
        let v = prime_exp_sum(&q, &alpha, 1, 0, 1, m, AvgMode::Cesaro).unwrap();
        let modulus = v.norm();
        c.check(modulus < last, format!("M={m}: |avg| {modulus:.4}"));
        moduli.push(modulus);
        last = modulus;
    }
    c.check(last <= 0.1, format!("final modulus {last:.4} <= 0.1"));
    c.finish();
}

#[test]
fn ac06_structure_decomposition_contracts() {
    let mut c = Criterion::new("AC6");
    let n = 1_000_000u64;

    // Exactly periodic catalog functions project to themselves.
    for (name, f) in catalog::periodic_functions() {
        let d = residue_projection(&f, 6, n).unwrap();
        c.check(
            d.residual_energy <= 1e-12,
            format!("{name}: residual {:.2e}", d.residual_energy),
        );
    }

    // Residue-class orthogonality of the random part, all catalog.
    let q = 6u64;
    for (name, f) in catalog::one_bounded_functions() {
        let d = residue_projection(&f, q, n).unwrap();
        let mut nums = vec![KahanComplex::default(); q as usize];
        let mut den = Kahan::new();
        for k in 1..=n {
            let w = 1.0 / k as f64;
            nums[(k % q) as usize].add(d.f_rnd.eval(k) * w);
            den.add(w);
        }
        let worst = nums
            .iter()
            .map(|z| (z.value() / den.value()).norm())
            .fold(0.0f64, f64::max);
        c.check(
            worst <= 1e-10 * q as f64,
            format!("{name}: worst class inner product {worst:.2e}"),
        );
    }

    // Ladder monotonicity at K = 5.
    for (name, f) in catalog::one_bounded_functions() {
        let ladder = modulus_ladder_decompose(&f, 5, n).unwrap();
        let monotone = ladder
            .residuals
            .windows(2)
            .all(|p| p[1] <= p[0] + 1e-12);
        c.check(
            monotone,
            format!("{name}: residuals {:?}", ladder.residuals),
        );
    }
    c.finish();
}

#[test]
fn ac07_first_counterexample_set() {
    let mut c = Criterion::new("AC7");
    let set = SetSpec::DoubleExpBlocks;
    let q: IntPolynomial = "y-1".parse().unwrap();
    let report = find_patterns(
        &set,
        &q,
        (2, 50_000),
        (2, 50_000),
        100_000,
        PatternConstraints::default(),
    )
    .unwrap();
    c.check(
        report.total_hits == 0,
        format!("{} hits over {} pairs", report.total_hits, report.pairs_scanned),
    );

    let ladder = TruncationLadder::new(vec![92_681]).unwrap();
    let densities = density_report(&set, &ladder).unwrap();
    let (ces, log) = (densities.cesaro[0], densities.logarithmic[0]);
    c.check(ces >= 0.29, format!("cesaro density {ces:.4}"));
    c.check(log <= 0.1 * ces, format!("log density {log:.4} <= 0.1 * cesaro"));
    c.finish();
}

#[test]
fn ac08_second_counterexample_set() {
    let mut c = Criterion::new("AC8");
    let obstructed = valuation_obstruction_check(1_000).unwrap();
    c.check(obstructed, "2-adic valuation obstruction up to 10^3".into());

    let set = SetSpec::ValuationBlocks { k_max: 3 };
    let q: IntPolynomial = "y".parse().unwrap();
    let report = find_patterns(
        &set,
        &q,
        (1, 10_000),
        (1, 10_000),
        100_000_000,
        PatternConstraints { min_xy: 1, require_distinct: false },
    )
    .unwrap();
    c.check(
        report.total_hits == 0,
        format!("{} hits over {} pairs", report.total_hits, report.pairs_scanned),
    );
    c.finish();
}

#[test]
fn ac09_correlation_lower_bound_trend() {
    let mut c = Criterion::new("AC9");
    let start = Instant::now();

    let set = SetSpec::MultEven;
    let q: IntPolynomial = "y-1".parse().unwrap();
    let corr = iterated_affine_correlation(&set, &q, 2, 1, 1_000, 100_000, 1, 1).unwrap();
    let ladder = TruncationLadder::new(vec![100_000]).unwrap();
    let d = density_report(&set, &ladder).unwrap().logarithmic[0];
    c.check(
        corr.value >= d * d - 0.1,
        format!("estimator {:.4} vs density^2 - 0.1 = {:.4}", corr.value, d * d - 0.1),
    );

    // Two-path consistency: A = 3N with primes = 1 mod 3 is invariant
    // under the prime dilation, so the estimator collapses to the
    // logarithmic density.
    let a3 = SetSpec::Residue { modulus: 3, residue: 0 };
    let zero = IntPolynomial::zero();
    let corr3 = iterated_affine_correlation(&a3, &zero, 1, 3, 1_000, 100_000, 1, 1).unwrap();
    let d3 = density_report(&a3, &ladder).unwrap().logarithmic[0];
    c.check(
        (corr3.value - d3).abs() <= 1e-10,
        format!("two-path gap {:.2e}", (corr3.value - d3).abs()),
    );

    let elapsed = start.elapsed();
    c.check(elapsed.as_secs() < 600, format!("runtime {elapsed:.2?} (budget 600s)"));
    c.finish();
}

#[test]
fn ac10_coloring_threshold_engine() {
    let mut c = Criterion::new("AC10");
    let constraints = PatternConstraints::default();

    let r1 = mr_lower_bound(1, constraints, DEFAULT_NODE_BUDGET).unwrap();
    c.check(
        r1.forced_at == Some(6) && r1.best_n == 5,
        format!("one color: forced at {:?}, best {}", r1.forced_at, r1.best_n),
    );

    let certs = search_threshold(2, 1, 16, constraints, DEFAULT_NODE_BUDGET).unwrap();
    let mut verified = 0;
    let mut best_coloring = None;
    for cert in &certs {
        if let SearchOutcome::GoodColoring(coloring) = &cert.outcome {
            if verify_coloring(coloring, constraints).is_none() {
                verified += 1;
            }
            best_coloring = Some(coloring.clone());
        }
    }
    c.check(verified == 15, format!("{verified}/15 good colorings re-verified"));
    c.check(!certs[15].is_good(), "N = 16 exhausts two colors".into());

    // Restriction closure on the deepest certificate.
    let best = best_coloring.expect("two colors reach N = 15");
    let closed = (1..=best.n).all(|m| {
        verify_coloring(&best.restrict(m).unwrap(), constraints).is_none()
    });
    c.check(closed, format!("restrictions of [{}] all good", best.n));

    let r2 = mr_lower_bound(2, constraints, DEFAULT_NODE_BUDGET).unwrap();
    c.check(
        r2.best_n >= r1.best_n,
        format!("monotone in colors: best {} >= {}", r2.best_n, r1.best_n),
    );
    c.finish();
}

#[test]
fn ac11_multiplicative_density_sanity() {
    let mut c = Criterion::new("AC11");
    let ladder = TruncationLadder::new(vec![1_000]).unwrap();

    let full = dsharp_estimate(&SetSpec::All, &ladder, &[1, 2], 3).unwrap();
    c.check(full.value == 1.0, format!("full set: {}", full.value));

    let odds = SetSpec::Residue { modulus: 2, residue: 1 };
    let r = dsharp_estimate(&odds, &ladder, &[2, 4], 3).unwrap();
    c.check(r.value == 0.0, format!("odds along (2,4): {}", r.value));

    let lad2 = TruncationLadder::new(vec![2_000]).unwrap();
    let [(na, a), (nb, b), (nc, cset)] = catalog::nested_chain();
    let va = dsharp_estimate(&a, &lad2, &[2, 4], 4).unwrap().value;
    let vb = dsharp_estimate(&b, &lad2, &[2, 4], 4).unwrap().value;
    let vc = dsharp_estimate(&cset, &lad2, &[2, 4], 4).unwrap().value;
    c.check(
        va <= vb && vb <= vc,
        format!("monotone on {na} <= {nb} <= {nc}: {va} <= {vb} <= {vc}"),
    );
    c.finish();
}
