//! Faà di Bruno composition against exact polynomial algebra.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use proptest::prelude::*;
use timecomp_core::{compose_derivative, count_partitions, enumerate_partitions, s_nl, DerivativeTable};

type Poly = Vec<BigRational>;

fn eval(p: &Poly, x: &BigRational) -> BigRational {
    p.iter().rev().fold(BigRational::zero(), |acc, c| acc * x + c)
}

fn deriv(p: &Poly) -> Poly {
    let d: Poly = p
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| c * BigRational::from_integer(BigInt::from(i)))
        .collect();
    if d.is_empty() {
        vec![BigRational::zero()]
    } else {
        d
    }
}

fn mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn compose(outer: &Poly, inner: &Poly) -> Poly {
    outer.iter().rev().fold(vec![BigRational::zero()], |acc, c| {
        let mut next = mul(&acc, inner);
        next[0] += c;
        next
    })
}

fn derivatives(p: &Poly, x: &BigRational, n: usize) -> Vec<BigRational> {
    let mut cur = p.clone();
    (0..n)
        .map(|_| {
            cur = deriv(&cur);
            eval(&cur, x)
        })
        .collect()
}

fn rational() -> impl Strategy<Value = BigRational> {
    (-20i64..=20, 1i64..=9).prop_map(|(a, b)| BigRational::new(a.into(), b.into()))
}

fn poly(max_degree: usize) -> impl Strategy<Value = Poly> {
    prop::collection::vec(rational(), 1..=max_degree + 1)
}

fn brute_force(n: usize, l: usize, largest: usize) -> usize {
    if l == 0 {
        return usize::from(n == 0);
    }
    (1..=largest.min(n)).map(|p| brute_force(n - p, l - 1, p)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn composition_is_exact(outer in poly(7), inner in poly(4), t0 in rational()) {
        let want = derivatives(&compose(&outer, &inner), &t0, 6);
        let ot = DerivativeTable::new(derivatives(&outer, &eval(&inner, &t0), 6));
        let it = DerivativeTable::new(derivatives(&inner, &t0, 6));
        for n in 1..=6 {
            prop_assert_eq!(&compose_derivative(&ot, &it, n).unwrap(), &want[n - 1], "n = {}", n);
        }
    }

    #[test]
    fn s_nl_of_linear_inner_is_a_power(a in rational(), n in 1usize..=8) {
        // ψ(t) = a t: only the partition 1^n survives
        let mut raw = vec![BigRational::zero(); n];
        raw[0] = a.clone();
        let table = DerivativeTable::new(raw);
        for l in 1..=n {
            let want = if l == n { num_traits::pow(a.clone(), n) } else { BigRational::zero() };
            prop_assert_eq!(s_nl(&table, n, l).unwrap(), want);
        }
    }
}

#[test]
fn partition_counts_match_brute_force() {
    for n in 1..=12 {
        for l in 1..=n {
            let want = brute_force(n, l, n);
            assert_eq!(count_partitions(n, l), want, "count ({n}, {l})");
            let parts = enumerate_partitions(n, l).unwrap();
            assert_eq!(parts.len(), want, "enumerate ({n}, {l})");
            for p in &parts {
                assert_eq!((p.n(), p.l()), (n, l));
            }
        }
    }
}

#[test]
fn coefficients_sum_to_stirling_numbers() {
    // Σ over q(n,l) of the coefficient is the Stirling number S(n, l)
    let stirling = |n: usize, l: usize| -> u64 {
        let mut t = vec![vec![0u64; n + 1]; n + 1];
        t[0][0] = 1;
        for i in 1..=n {
            for j in 1..=i {
                t[i][j] = j as u64 * t[i - 1][j] + t[i - 1][j - 1];
            }
        }
        t[n][l]
    };
    for n in 1..=12 {
        for l in 1..=n {
            let sum: u64 = enumerate_partitions(n, l).unwrap().iter().map(|p| p.coefficient()).sum();
            assert_eq!(sum, stirling(n, l), "({n}, {l})");
        }
    }
}
