//! Fixtures shared by the benchmarks.

use timecomp_core::{CompactifiedField, DerivativeTable, ProbeOptions, SystemSpec, TransformSpec};

/// The van der Pol field under the arctan transform at `k = 2`.
pub fn vdp_field() -> CompactifiedField {
    CompactifiedField::build(&SystemSpec::van_der_pol(), &TransformSpec::arctan(4), 2, false, &ProbeOptions::default())
        .expect("van der Pol extends C^2")
}

/// A fixed table of `len` derivatives with a positive first entry.
pub fn sample_table(len: usize) -> DerivativeTable {
    DerivativeTable::new((0..len).map(|i| if i == 0 { 0.8 } else { 0.3 / (i as f64) - 0.1 }).collect())
}
