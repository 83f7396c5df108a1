//! Partition combinatorics and derivatives of compositions and inverses.
//!
//! `q(n, l)` is the set of multiplicity vectors `(λ_1, ..., λ_n)` with
//! `Σ λ_i = l` and `Σ i·λ_i = n`. The partial Bell-type sum
//!
//! ```text
//! S_n^l φ = Σ_{q(n,l)} n! Π_i (φ^(i))^{λ_i} / (λ_i! (i!)^{λ_i})
//! ```
//!
//! is the building block for everything else in this module.

use thiserror::Error;

use crate::jet::{Jet, Scalar};

/// Largest `n` for which `n!` fits the integer coefficient arithmetic.
pub const MAX_PARTITION_ORDER: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FdbError {
    #[error("partition arguments need 1 <= l <= n (got n = {n}, l = {l})")]
    Arguments { n: usize, l: usize },
    #[error("order {0} exceeds the supported maximum {MAX_PARTITION_ORDER}")]
    OrderTooLarge(usize),
    #[error("derivative table holds {have} entries, {need} required")]
    TableTooShort { have: usize, need: usize },
    #[error("first derivative {value:e} is numerically zero; the inverse is singular")]
    NearSingular { value: f64 },
}

/// A multiplicity vector in `q(n, l)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    multiplicities: Vec<usize>,
}

impl Partition {
    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    /// `n = Σ i·λ_i`.
    pub fn n(&self) -> usize {
        self.multiplicities
            .iter()
            .enumerate()
            .map(|(i, m)| (i + 1) * m)
            .sum()
    }

    /// `l = Σ λ_i`.
    pub fn l(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    /// The integer `n! / Π (λ_i! (i!)^{λ_i})`.
    pub fn coefficient(&self) -> u64 {
        let fact = |k: usize| -> u64 { (1..=k as u64).product() };
        let mut value = fact(self.n());
        for (i, &m) in self.multiplicities.iter().enumerate() {
            value /= fact(m);
            for _ in 0..m {
                value /= fact(i + 1);
            }
        }
        value
    }
}

/// Number of integer partitions of `n` into exactly `l` parts.
pub fn count_partitions(n: usize, l: usize) -> usize {
    // p(n, l) = p(n - 1, l - 1) + p(n - l, l)
    let mut table = vec![vec![0usize; l + 1]; n + 1];
    table[0][0] = 1;
    for nn in 1..=n {
        for ll in 1..=l.min(nn) {
            table[nn][ll] = table[nn - 1][ll - 1] + table[nn - ll][ll];
        }
    }
    table[n][l]
}

fn check_args(n: usize, l: usize) -> Result<(), FdbError> {
    if l < 1 || l > n {
        return Err(FdbError::Arguments { n, l });
    }
    if n > MAX_PARTITION_ORDER {
        return Err(FdbError::OrderTooLarge(n));
    }
    Ok(())
}

/// Every element of `q(n, l)`, once each, in lexicographic order.
pub fn enumerate_partitions(n: usize, l: usize) -> Result<Vec<Partition>, FdbError> {
    check_args(n, l)?;
    let mut out = Vec::with_capacity(count_partitions(n, l));
    let mut current = vec![0usize; n];
    descend(0, n, l, &mut current, &mut out);
    Ok(out)
}

fn descend(
    index: usize,
    weight_left: usize,
    parts_left: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<Partition>,
) {
    let part = index + 1;
    if index == current.len() {
        if weight_left == 0 && parts_left == 0 {
            out.push(Partition {
                multiplicities: current.clone(),
            });
        }
        return;
    }
    let max_mult = (weight_left / part).min(parts_left);
    for m in 0..=max_mult {
        current[index] = m;
        descend(index + 1, weight_left - m * part, parts_left - m, current, out);
    }
    current[index] = 0;
}

/// Raw derivatives `raw[i] = φ^(i+1)(point)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeTable<T = f64> {
    raw: Vec<T>,
}

impl<T: Scalar> DerivativeTable<T> {
    pub fn new(raw: Vec<T>) -> Self {
        Self { raw }
    }

    /// Derivatives `1..=order` of a jet (the value is dropped).
    pub fn from_jet(jet: &Jet<T>) -> Self {
        let mut d = jet.derivatives();
        d.remove(0);
        Self { raw: d }
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// `φ^(i)` for `1 <= i <= len`.
    pub fn get(&self, i: usize) -> &T {
        &self.raw[i - 1]
    }

    pub fn raw(&self) -> &[T] {
        &self.raw
    }

    fn require(&self, need: usize) -> Result<(), FdbError> {
        if self.raw.len() < need {
            return Err(FdbError::TableTooShort {
                have: self.raw.len(),
                need,
            });
        }
        Ok(())
    }
}

fn pow<T: Scalar>(x: &T, e: usize) -> T {
    (0..e).fold(T::one(), |acc, _| acc * x.clone())
}

/// `S_n^l` of the function whose derivatives are in `table`.
pub fn s_nl<T: Scalar>(table: &DerivativeTable<T>, n: usize, l: usize) -> Result<T, FdbError> {
    check_args(n, l)?;
    // only derivatives up to n - l + 1 can appear
    table.require(n - l + 1)?;
    let mut total = T::zero();
    for p in enumerate_partitions(n, l)? {
        let mut term = T::from_u64(p.coefficient()).expect("coefficient fits");
        for (i, &m) in p.multiplicities().iter().enumerate() {
            if m > 0 {
                term = term * pow(table.get(i + 1), m);
            }
        }
        total = total + term;
    }
    Ok(total)
}

/// `d^n/dt^n φ(ψ(t))` from the derivatives of `φ` (at `ψ(t0)`) and of `ψ` (at `t0`).
pub fn compose_derivative<T: Scalar>(
    outer: &DerivativeTable<T>,
    inner: &DerivativeTable<T>,
    n: usize,
) -> Result<T, FdbError> {
    if n == 0 {
        return Err(FdbError::Arguments { n, l: 0 });
    }
    outer.require(n)?;
    inner.require(n)?;
    let mut total = T::zero();
    for l in 1..=n {
        total = total + outer.get(l).clone() * s_nl(inner, n, l)?;
    }
    Ok(total)
}

/// Derivatives `h^(1..=n)` of the inverse function `h = φ^{-1}`.
///
/// Solves `Σ_{i<=m} h^(i) S_m^i φ = δ_{m,1}` for `m = 1..=n` by forward
/// substitution; the diagonal entries are `S_m^m φ = (φ')^m`.
pub fn inverse_jets<T: Scalar>(
    phi_table: &DerivativeTable<T>,
    n: usize,
) -> Result<DerivativeTable<T>, FdbError> {
    phi_table.require(n)?;
    let d1 = phi_table.get(1).clone();
    let tiny = T::from_f64(1e-300).expect("threshold representable");
    if d1.abs() <= tiny {
        return Err(FdbError::NearSingular {
            value: d1.to_f64().unwrap_or(0.0),
        });
    }
    let mut h: Vec<T> = Vec::with_capacity(n);
    for m in 1..=n {
        let mut rhs = if m == 1 { T::one() } else { T::zero() };
        for (i, hi) in h.iter().enumerate() {
            rhs = rhs - hi.clone() * s_nl(phi_table, m, i + 1)?;
        }
        h.push(rhs / pow(&d1, m));
    }
    Ok(DerivativeTable::new(h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mults(ps: &[Partition]) -> Vec<Vec<usize>> {
        ps.iter().map(|p| p.multiplicities().to_vec()).collect()
    }

    #[test]
    fn small_partition_sets() {
        assert_eq!(mults(&enumerate_partitions(2, 1).unwrap()), vec![vec![0, 1]]);
        assert_eq!(mults(&enumerate_partitions(3, 2).unwrap()), vec![vec![1, 1, 0]]);
        assert_eq!(mults(&enumerate_partitions(2, 2).unwrap()), vec![vec![2, 0]]);
        assert_eq!(
            mults(&enumerate_partitions(6, 3).unwrap()),
            vec![
                vec![0, 3, 0, 0, 0, 0],
                vec![1, 1, 1, 0, 0, 0],
                vec![2, 0, 0, 1, 0, 0]
            ]
        );
    }

    #[test]
    fn partition_argument_errors() {
        assert_eq!(
            enumerate_partitions(2, 3),
            Err(FdbError::Arguments { n: 2, l: 3 })
        );
        assert_eq!(
            enumerate_partitions(2, 0),
            Err(FdbError::Arguments { n: 2, l: 0 })
        );
    }

    #[test]
    fn counts_match_recurrence_oracle() {
        fn brute(n: usize, l: usize, max_part: usize) -> usize {
            if l == 0 {
                return usize::from(n == 0);
            }
            (1..=max_part.min(n)).map(|p| brute(n - p, l - 1, p)).sum()
        }
        for n in 1..=12 {
            for l in 1..=n {
                let ps = enumerate_partitions(n, l).unwrap();
                assert_eq!(ps.len(), brute(n, l, n), "n={n} l={l}");
                assert!(ps.iter().all(|p| p.n() == n && p.l() == l));
                assert!(ps.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn s_nl_closed_forms() {
        let t = DerivativeTable::new(vec![1.5, -0.7, 2.2, 0.3]);
        let (d1, d2, d3): (f64, f64, f64) = (1.5, -0.7, 2.2);
        for n in 1..=4 {
            assert_relative_eq!(s_nl(&t, n, n).unwrap(), d1.powi(n as i32), max_relative = 1e-15);
        }
        assert_relative_eq!(s_nl(&t, 3, 2).unwrap(), 3.0 * d1 * d2, max_relative = 1e-15);
        assert_relative_eq!(s_nl(&t, 2, 1).unwrap(), d2, max_relative = 1e-15);
        assert_relative_eq!(s_nl(&t, 3, 1).unwrap(), d3, max_relative = 1e-15);
    }

    #[test]
    fn compose_ln_of_one_plus_t_squared() {
        // ln at 1: 1, -1, 2, ...; (1 + t^2) at 0: 0, 2, 0
        let outer = DerivativeTable::new(vec![1.0, -1.0, 2.0]);
        let inner = DerivativeTable::new(vec![0.0, 2.0, 0.0]);
        assert_relative_eq!(compose_derivative(&outer, &inner, 2).unwrap(), 2.0);
    }

    #[test]
    fn compose_with_identity_and_linear() {
        let outer = DerivativeTable::new(vec![0.4, -1.2, 3.3, 7.0]);
        let identity = DerivativeTable::new(vec![1.0, 0.0, 0.0, 0.0]);
        for n in 1..=4 {
            assert_eq!(
                compose_derivative(&outer, &identity, n).unwrap(),
                *outer.get(n)
            );
        }
        let linear = DerivativeTable::new(vec![2.5, 0.0, 0.0, 0.0]);
        let inner = DerivativeTable::new(vec![0.3, 1.1, -4.0, 0.9]);
        for n in 1..=4 {
            assert_relative_eq!(
                compose_derivative(&linear, &inner, n).unwrap(),
                2.5 * inner.get(n),
                max_relative = 1e-15
            );
        }
    }

    #[test]
    fn inverse_closed_forms() {
        let (d1, d2): (f64, f64) = (0.8, -0.3);
        let phi = DerivativeTable::new(vec![d1, d2, 0.0]);
        let h = inverse_jets(&phi, 2).unwrap();
        assert_relative_eq!(*h.get(1), 1.0 / d1, max_relative = 1e-15);
        assert_relative_eq!(*h.get(2), -d2 / d1.powi(3), max_relative = 1e-15);
    }

    #[test]
    fn inverse_of_arctan_transform_at_zero() {
        let phi = DerivativeTable::new(vec![2.0 / std::f64::consts::PI, 0.0, -4.0 / std::f64::consts::PI]);
        let h = inverse_jets(&phi, 3).unwrap();
        // h(s) = tan(pi s / 2): h' = pi/2, h'' = 0, h''' = 2 (pi/2)^3
        let half_pi = std::f64::consts::FRAC_PI_2;
        assert_relative_eq!(*h.get(1), half_pi, max_relative = 1e-15);
        assert_relative_eq!(*h.get(2), 0.0, epsilon = 1e-15);
        assert_relative_eq!(*h.get(3), 2.0 * half_pi.powi(3), max_relative = 1e-14);
    }

    #[test]
    fn inverse_rejects_zero_slope() {
        let phi = DerivativeTable::new(vec![0.0, 1.0]);
        assert!(matches!(
            inverse_jets(&phi, 2),
            Err(FdbError::NearSingular { .. })
        ));
    }

    #[test]
    fn short_table_is_reported() {
        let t = DerivativeTable::new(vec![1.0]);
        assert_eq!(
            s_nl(&t, 3, 1),
            Err(FdbError::TableTooShort { have: 1, need: 3 })
        );
    }
}
