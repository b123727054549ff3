//! Built-in test families: the five 1-bounded functions every inequality and
//! spectral check runs against, plus a nested chain of sets for monotonicity
//! tests. Kept tiny and stable; acceptance tolerances are calibrated against
//! exactly these.

use crate::patterns::SetSpec;
use crate::seq::{Alpha, SequenceSpec};

/// The five named 1-bounded functions: constant one, the even indicator, the
/// alternating sign, a linear character with irrational base, and the
/// Liouville function. Order is stable.
pub fn one_bounded_functions() -> Vec<(&'static str, SequenceSpec)> {
    vec![
        ("one", SequenceSpec::constant(1.0)),
        ("even-indicator", SequenceSpec::ResidueIndicator { modulus: 2, residue: 0 }),
        ("alternating", SequenceSpec::alternating()),
        ("char-sqrt2", SequenceSpec::linear_character(Alpha::sqrt(2).unwrap())),
        ("liouville", SequenceSpec::Liouville),
    ]
}

/// Subset of the catalog with an exact period (structure decompositions must
/// reproduce these with zero residual).
pub fn periodic_functions() -> Vec<(&'static str, SequenceSpec)> {
    one_bounded_functions()
        .into_iter()
        .filter(|(_, f)| f.period().is_some())
        .collect()
}

/// Named sets, ordered by inclusion where marked: multiples of 6 lie inside
/// the evens, which lie inside everything.
pub fn named_sets() -> Vec<(&'static str, SetSpec)> {
    vec![
        ("all", SetSpec::All),
        ("evens", SetSpec::Residue { modulus: 2, residue: 0 }),
        ("odds", SetSpec::Residue { modulus: 2, residue: 1 }),
        ("multiples-of-6", SetSpec::Residue { modulus: 6, residue: 0 }),
        ("double-exp-blocks", SetSpec::DoubleExpBlocks),
        ("valuation-blocks", SetSpec::ValuationBlocks { k_max: 3 }),
        ("mult-even", SetSpec::MultEven),
        ("primes-minus-1", SetSpec::PrimesShifted { shift: -1 }),
    ]
}

/// A strictly nested chain A ⊂ B ⊂ C for monotonicity tests.
pub fn nested_chain() -> [(&'static str, SetSpec); 3] {
    [
        ("multiples-of-6", SetSpec::Residue { modulus: 6, residue: 0 }),
        ("evens", SetSpec::Residue { modulus: 2, residue: 0 }),
        ("all", SetSpec::All),
    ]
}

/// Per-run selftest data: each catalog function evaluated at a few points
/// must stay within its declared bound.
pub fn bound_check(max_n: u64) -> bool {
    one_bounded_functions().iter().all(|(_, f)| {
        let b = f.bound() + 1e-12;
        (1..=max_n.min(2000)).all(|n| f.eval(n).norm() <= b)
    })
}
