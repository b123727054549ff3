//! Structured/random splitting along residue classes.
//!
//! At scale N the log-weighted conditional expectation on residues mod q
//!
//! ```text
//!     f_str(r) = ( sum_{n <= N, n == r mod q} f(n)/n )
//!              / ( sum_{n <= N, n == r mod q} 1/n ),
//! ```
//!
//! is the orthogonal projection of f onto the q-periodic sequences under
//! the logarithmic inner product.  [`residue_projection`] returns the
//! split f = f_str + f_rnd together with the residual energy
//! `E^log |f_rnd|^2`; [`modulus_ladder_decompose`] walks the divisibility
//! chain q = lcm(1..k), along which the residuals are non-increasing;
//! [`aperiodicity_score`] measures how far f is from being q-periodic in
//! windows of length H without projecting at all.

use num_complex::Complex64;
use serde::Serialize;

use crate::avg::{Kahan, KahanComplex, EVAL_BUDGET};
use crate::error::{Error, Result};
use crate::seq::{lcm_u64, SequenceSpec};
use std::sync::Arc;

/// A structured/random split of one sequence at one scale.
///
/// f_str is realized as a periodic table of q residue values, so
/// f_str(n) depends only on n mod q exactly; f_rnd is the combination
/// f - f_str, so f = f_str + f_rnd holds pointwise by construction.
#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    pub modulus: u64,
    pub scale: u64,
    pub f_str: SequenceSpec,
    pub f_rnd: SequenceSpec,
    /// E^log_{n <= N} |f_rnd(n)|^2.
    pub residual_energy: f64,
}

impl Decomposition {
    /// Class means in residue order: entry r is the log-weighted mean of
    /// f over {n <= N : n == r mod q}.
    pub fn class_means(&self) -> Vec<Complex64> {
        let q = self.modulus as usize;
        match &self.f_str {
            // Table slot i holds the value at n == i+1 mod q.
            SequenceSpec::PeriodicTable(values) => {
                (0..q).map(|r| values[(r + q - 1) % q]).collect()
            }
            _ => unreachable!("f_str is always a periodic table"),
        }
    }
}

/// Projects f onto the q-periodic sequences at scale n and reports the
/// energy left over.
///
/// Requires q <= n/10, which keeps every residue class populated.  Both
/// passes share their harmonic denominators with the numerators, so a
/// sequence that is already q-periodic with exactly representable class
/// values (indicators, constants) comes back with residual exactly zero.
pub fn residue_projection(f: &SequenceSpec, q: u64, n: u64) -> Result<Decomposition> {
    if q == 0 {
        return Err(Error::param("modulus must be positive"));
    }
    if q > n / 10 {
        return Err(Error::param(format!("modulus {q} exceeds n/10 = {}", n / 10)));
    }
    f.validate_domain(n)?;
    if 2 * n > EVAL_BUDGET {
        return Err(Error::CostGuard {
            what: "projection evaluations",
            needed: 2 * n,
            budget: EVAL_BUDGET,
        });
    }

    let qu = q as usize;
    let mut num = vec![KahanComplex::default(); qu];
    let mut den = vec![Kahan::new(); qu];
    for k in 1..=n {
        let w = 1.0 / k as f64;
        let r = (k % q) as usize;
        num[r].add(f.eval(k) * w);
        den[r].add(w);
    }
    let means: Vec<Complex64> = num
        .iter()
        .zip(&den)
        .map(|(z, d)| z.value() / d.value())
        .collect();

    // Table slot i is the value at n == i+1 mod q.
    let table: Vec<Complex64> = (0..qu).map(|i| means[(i + 1) % qu]).collect();
    let f_str = SequenceSpec::PeriodicTable(Arc::new(table));
    let f_rnd = SequenceSpec::Combination(vec![
        (Complex64::new(1.0, 0.0), f.clone()),
        (Complex64::new(-1.0, 0.0), f_str.clone()),
    ]);

    let mut res_num = Kahan::new();
    let mut res_den = Kahan::new();
    for k in 1..=n {
        let w = 1.0 / k as f64;
        res_num.add(f_rnd.eval(k).norm_sqr() * w);
        res_den.add(w);
    }

    Ok(Decomposition {
        modulus: q,
        scale: n,
        f_str,
        f_rnd,
        residual_energy: res_num.value() / res_den.value(),
    })
}

/// E^log_{n <= N} | (1/H) sum_{h=1..H} f(n + q h) |^2.
///
/// Zero means f averages out along every arithmetic progression of step
/// q and length H; bound(f)^2 means it does not cancel at all.  Requires
/// q H <= N/10 so the windows stay inside the validated domain's bulk.
pub fn aperiodicity_score(f: &SequenceSpec, q: u64, h: u64, n: u64) -> Result<f64> {
    if q == 0 || h == 0 {
        return Err(Error::param("step and window length must be positive"));
    }
    let reach = q
        .checked_mul(h)
        .ok_or_else(|| Error::param("q * H overflows"))?;
    if reach > n / 10 {
        return Err(Error::param(format!("q * H = {reach} exceeds n/10 = {}", n / 10)));
    }
    f.validate_domain(n + reach)?;
    let cost = h.saturating_mul(n);
    if cost > EVAL_BUDGET {
        return Err(Error::CostGuard {
            what: "window evaluations",
            needed: cost,
            budget: EVAL_BUDGET,
        });
    }

    // Dividing by H (not multiplying by 1/H) keeps windows of identical
    // values exact: H c / H == c.
    let hf = h as f64;
    let mut num = Kahan::new();
    let mut den = Kahan::new();
    for k in 1..=n {
        let mut window = KahanComplex::default();
        for j in 1..=h {
            window.add(f.eval(k + q * j));
        }
        let w = 1.0 / k as f64;
        num.add((window.value() / hf).norm_sqr() * w);
        den.add(w);
    }
    Ok(num.value() / den.value())
}

/// Projections along the modulus chain lcm(1..k), k = 1..=K.
#[derive(Debug, Clone, Serialize)]
pub struct ModulusLadder {
    pub moduli: Vec<u64>,
    pub residuals: Vec<f64>,
    /// The split at the largest modulus lcm(1..K).
    pub decomposition: Decomposition,
}

/// Runs [`residue_projection`] at each modulus lcm(1..k) up to K.
///
/// The moduli are totally ordered by divisibility, so each projection
/// refines the previous one and the residual energies are non-increasing
/// up to rounding.  Requires lcm(1..K) <= n/10.
pub fn modulus_ladder_decompose(f: &SequenceSpec, k_max: u64, n: u64) -> Result<ModulusLadder> {
    if k_max == 0 {
        return Err(Error::param("ladder height must be positive"));
    }
    let mut moduli = Vec::with_capacity(k_max as usize);
    let mut q = 1u64;
    for k in 1..=k_max {
        q = lcm_u64(q, k).ok_or_else(|| Error::param("ladder modulus overflows"))?;
        moduli.push(q);
    }
    if q > n / 10 {
        return Err(Error::param(format!(
            "lcm(1..{k_max}) = {q} exceeds n/10 = {}",
            n / 10
        )));
    }

    let mut residuals = Vec::with_capacity(moduli.len());
    let mut last = None;
    for &modulus in &moduli {
        let d = residue_projection(f, modulus, n)?;
        residuals.push(d.residual_energy);
        last = Some(d);
    }
    Ok(ModulusLadder {
        moduli,
        residuals,
        decomposition: last.expect("k_max >= 1"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::avg::harmonic_value;
    use crate::seq::Alpha;
    use crate::spectral::{correlation_sequence, rational_mass};

    fn even_indicator() -> SequenceSpec {
        SequenceSpec::ResidueIndicator { modulus: 2, residue: 0 }
    }

    #[test]
    fn periodic_indicators_project_to_themselves() {
        let f = SequenceSpec::ResidueIndicator { modulus: 3, residue: 0 };
        let d = residue_projection(&f, 6, 600).unwrap();
        assert_eq!(d.residual_energy, 0.0);
        let means = d.class_means();
        for (r, mean) in means.iter().enumerate() {
            let expect = if r % 3 == 0 { 1.0 } else { 0.0 };
            assert_eq!(*mean, Complex64::new(expect, 0.0), "class {r}");
        }
        for n in 1..=60u64 {
            assert_eq!(d.f_rnd.eval(n), Complex64::new(0.0, 0.0), "n = {n}");
        }
    }

    #[test]
    fn constants_have_no_random_part() {
        let d = residue_projection(&SequenceSpec::constant(1.0), 5, 1_000).unwrap();
        assert_eq!(d.residual_energy, 0.0);
        for mean in d.class_means() {
            assert_eq!(mean, Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn irrational_character_sheds_residue_structure_slowly() {
        // The limit residual is 1 (no rational component), but the
        // approach is only logarithmic: class 1 keeps |mean| ~ 0.57 even
        // at N = 10^6 because n = 1 alone carries half that class's
        // harmonic weight.  Freeze the trend rather than a fantasy bound.
        let f = SequenceSpec::linear_character(Alpha::sqrt(2).unwrap());
        let mut last = 0.0f64;
        for n in [50_000u64, 200_000, 1_000_000] {
            let d = residue_projection(&f, 12, n).unwrap();
            assert!(d.residual_energy > last, "N = {n}: {}", d.residual_energy);
            assert!(d.residual_energy <= 1.0 + 1e-9);
            last = d.residual_energy;
        }
        assert!(last > 0.88, "{last}");
    }

    #[test]
    fn projection_is_idempotent() {
        for f in [
            SequenceSpec::Liouville,
            even_indicator(),
            SequenceSpec::linear_character(Alpha::sqrt(2).unwrap()),
        ] {
            let d = residue_projection(&f, 4, 50_000).unwrap();
            let again = residue_projection(&d.f_str, 4, 50_000).unwrap();
            assert!(again.residual_energy <= 1e-12, "{f}: {}", again.residual_energy);
        }
    }

    #[test]
    fn random_part_is_orthogonal_to_every_residue_class() {
        let n = 50_000u64;
        let q = 6u64;
        for f in [
            SequenceSpec::Liouville,
            even_indicator(),
            SequenceSpec::linear_character(Alpha::sqrt(2).unwrap()),
        ] {
            let d = residue_projection(&f, q, n).unwrap();
            for r in 0..q {
                let mut num = KahanComplex::default();
                let mut den = Kahan::new();
                for k in 1..=n {
                    let w = 1.0 / k as f64;
                    if k % q == r {
                        num.add(d.f_rnd.eval(k) * w);
                    }
                    den.add(w);
                }
                let inner = (num.value() / den.value()).norm();
                assert!(inner <= 1e-10 * q as f64, "{f} class {r}: {inner}");
            }
        }
    }

    #[test]
    fn class_means_of_indicators_stay_in_the_unit_interval() {
        for (name, set) in crate::catalog::named_sets() {
            let f = SequenceSpec::Indicator(set);
            let d = residue_projection(&f, 6, 20_000).unwrap();
            for (r, mean) in d.class_means().iter().enumerate() {
                assert_eq!(mean.im, 0.0, "{name} class {r}");
                assert!(
                    (-1e-12..=1.0 + 1e-12).contains(&mean.re),
                    "{name} class {r}: {}",
                    mean.re
                );
            }
        }
    }

    #[test]
    fn projection_rejects_bad_moduli() {
        let f = even_indicator();
        assert!(residue_projection(&f, 0, 100).is_err());
        assert!(residue_projection(&f, 11, 100).is_err());
        assert!(residue_projection(&f, 10, 100).is_ok());
    }

    #[test]
    fn aperiodicity_of_constants_is_one() {
        let score = aperiodicity_score(&SequenceSpec::constant(1.0), 3, 7, 1_000).unwrap();
        assert_eq!(score, 1.0);
    }

    #[test]
    fn alternating_windows_cancel_pairwise() {
        // Step 1, even window: consecutive values sum to zero in pairs,
        // exactly, for both realisations of (-1)^n.
        let table = SequenceSpec::PeriodicTable(Arc::new(vec![
            Complex64::new(-1.0, 0.0),
            Complex64::new(1.0, 0.0),
        ]));
        for f in [table, SequenceSpec::alternating()] {
            let score = aperiodicity_score(&f, 1, 10, 2_000).unwrap();
            assert_eq!(score, 0.0, "{f}");
        }
    }

    #[test]
    fn aperiodicity_sees_through_matching_steps() {
        // Step 2 windows of an even-periodic function never mix classes,
        // so the inner mean is f(n) itself and the score is the density.
        let f = even_indicator();
        let n = 10_000u64;
        let score = aperiodicity_score(&f, 2, 50, n).unwrap();
        let mut num = Kahan::new();
        for k in (2..=n).step_by(2) {
            num.add(1.0 / k as f64);
        }
        assert_eq!(score, num.value() / harmonic_value(n));
    }

    #[test]
    fn liouville_is_locally_aperiodic() {
        let score = aperiodicity_score(&SequenceSpec::Liouville, 1, 100, 1_000_000).unwrap();
        assert!(score < 0.05, "{score}");
    }

    #[test]
    fn aperiodicity_rejects_oversized_windows() {
        let f = even_indicator();
        assert!(aperiodicity_score(&f, 0, 5, 1_000).is_err());
        assert!(aperiodicity_score(&f, 5, 0, 1_000).is_err());
        assert!(aperiodicity_score(&f, 10, 11, 1_000).is_err());
        assert!(aperiodicity_score(&f, 10, 10, 1_000).is_ok());
    }

    #[test]
    fn ladder_resolves_divisor_chains() {
        // 4 divides lcm(1..4) = 12 but no earlier modulus.
        let f = SequenceSpec::ResidueIndicator { modulus: 4, residue: 0 };
        let ladder = modulus_ladder_decompose(&f, 4, 100_000).unwrap();
        assert_eq!(ladder.moduli, vec![1, 2, 6, 12]);
        assert_eq!(*ladder.residuals.last().unwrap(), 0.0);
        assert!(ladder.residuals[2] > 0.01, "q = 6 cannot resolve 4 | n");
        for pair in ladder.residuals.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
        assert_eq!(ladder.decomposition.modulus, 12);
    }

    #[test]
    fn ladder_resolves_indicator_combinations() {
        let f = SequenceSpec::Combination(vec![
            (Complex64::new(1.0, 0.0), SequenceSpec::ResidueIndicator { modulus: 2, residue: 0 }),
            (Complex64::new(1.0, 0.0), SequenceSpec::ResidueIndicator { modulus: 3, residue: 0 }),
        ]);
        let ladder = modulus_ladder_decompose(&f, 3, 10_000).unwrap();
        assert_eq!(ladder.moduli, vec![1, 2, 6]);
        assert_eq!(*ladder.residuals.last().unwrap(), 0.0);
    }

    #[test]
    fn aperiodic_input_defeats_the_whole_ladder() {
        let f = SequenceSpec::linear_character(Alpha::sqrt(2).unwrap());
        let ladder = modulus_ladder_decompose(&f, 4, 50_000).unwrap();
        for (q, r) in ladder.moduli.iter().zip(&ladder.residuals) {
            assert!(*r > 0.75, "q = {q}: residual {r}");
        }
    }

    #[test]
    fn ladder_rejects_oversized_heights() {
        let f = even_indicator();
        assert!(modulus_ladder_decompose(&f, 0, 1_000).is_err());
        // lcm(1..5) = 60 > 100/10.
        assert!(modulus_ladder_decompose(&f, 5, 100).is_err());
        assert!(modulus_ladder_decompose(&f, 5, 600).is_ok());
    }

    #[test]
    fn vanishing_residual_forces_rational_spectral_mass() {
        // Quasiperiodic at modulus q means the spectral measure sits on
        // q-th roots of unity: the mass average recovers nearly all of
        // E^log |f|^2.
        let n = 10_000u64;
        for (f, q) in [(even_indicator(), 2u64), (SequenceSpec::alternating(), 2)] {
            let d = residue_projection(&f, q, n).unwrap();
            assert!(d.residual_energy <= 1e-6, "{f}");
            let corr = correlation_sequence(&f, n, 40).unwrap();
            let mass = rational_mass(&corr, q, 20).unwrap();
            assert!(
                mass >= corr.phi(0).re - 1e-3,
                "{f}: mass {mass} vs energy {}",
                corr.phi(0).re
            );
        }
    }
}
