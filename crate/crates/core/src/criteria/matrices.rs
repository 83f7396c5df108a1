//! The matrices `M_n h`, `Q_n φ` and their column-replaced variants, with
//! the three routes to `g^(n)(s)` and the route to `μ̃^(n)(s)`.
//!
//! Near the boundary these determinants span hundreds of decades (for the
//! arctan transform `det Q_6 φ ~ φ'^21` with `φ' ~ 1e-16`), so every
//! determinant is carried as a sign and a log-magnitude.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::faa_di_bruno::{compose_derivative, s_nl, DerivativeTable};

use super::CriteriaError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MatrixVariant {
    /// `M_n h`, `(n+1)×(n+1)` with rows `S_j^i h`.
    M,
    /// `M_{n,i} h`: column `i` of `M_n h` replaced by `e_1`.
    MCol(usize),
    /// `M_n h` with its first row replaced by `(0, S_n^1 h, …, S_n^n h)`.
    MBordered,
    /// `Q_n φ`, `n×n`.
    Q,
    /// `Q_{n,i} φ`: column `i` replaced by `(φ^(2), …, φ^(n+1))`.
    QCol(usize),
    /// `Q̃_{n,i} φ`: column `i` replaced by `e_1`.
    QTildeCol(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriteriaMatrix {
    pub n: usize,
    pub variant: MatrixVariant,
    pub entries: DMatrix<f64>,
}

/// `sign · exp(ln_abs)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    pub sign: f64,
    pub ln_abs: f64,
}

impl LogDet {
    pub fn zero() -> Self {
        Self {
            sign: 0.0,
            ln_abs: f64::NEG_INFINITY,
        }
    }

    pub fn value(&self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.ln_abs.exp()
        }
    }

    /// `self / other`, evaluated without forming either magnitude.
    pub fn ratio(&self, other: &LogDet) -> Result<f64, CriteriaError> {
        if other.sign == 0.0 {
            return Err(CriteriaError::Singular);
        }
        if self.sign == 0.0 {
            return Ok(0.0);
        }
        Ok(self.sign * other.sign * (self.ln_abs - other.ln_abs).exp())
    }
}

/// Determinant of a general square matrix by row-equilibrated LU with
/// partial pivoting.
pub fn log_det(m: &DMatrix<f64>) -> LogDet {
    let n = m.nrows();
    let mut a = m.clone();
    let mut sign = 1.0;
    let mut ln_abs = 0.0;
    for r in 0..n {
        let scale = a.row(r).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if scale == 0.0 {
            return LogDet::zero();
        }
        for c in 0..n {
            a[(r, c)] /= scale;
        }
        ln_abs += scale.ln();
    }
    for col in 0..n {
        let (piv, best) = (col..n)
            .map(|r| (r, a[(r, col)].abs()))
            .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best == 0.0 {
            return LogDet::zero();
        }
        if piv != col {
            a.swap_rows(piv, col);
            sign = -sign;
        }
        let p = a[(col, col)];
        if p < 0.0 {
            sign = -sign;
        }
        ln_abs += p.abs().ln();
        for r in col + 1..n {
            let factor = a[(r, col)] / p;
            if factor != 0.0 {
                for c in col..n {
                    let v = a[(col, c)];
                    a[(r, c)] -= factor * v;
                }
            }
        }
    }
    LogDet { sign, ln_abs }
}

/// Determinant of a lower-triangular matrix as the product of its diagonal.
pub fn log_det_triangular(m: &DMatrix<f64>) -> LogDet {
    let mut sign = 1.0;
    let mut ln_abs = 0.0;
    for i in 0..m.nrows() {
        let d = m[(i, i)];
        if d == 0.0 {
            return LogDet::zero();
        }
        if d < 0.0 {
            sign = -sign;
        }
        ln_abs += d.abs().ln();
    }
    LogDet { sign, ln_abs }
}

fn s_rows(table: &DerivativeTable, rows: usize) -> Result<DMatrix<f64>, CriteriaError> {
    let mut m = DMatrix::zeros(rows, rows);
    for j in 1..=rows {
        for i in 1..=j {
            m[(j - 1, i - 1)] = s_nl(table, j, i)?;
        }
    }
    Ok(m)
}

fn e1_column(m: &mut DMatrix<f64>, col: usize) {
    for r in 0..m.nrows() {
        m[(r, col)] = if r == 0 { 1.0 } else { 0.0 };
    }
}

fn check_col(i: usize, size: usize) -> Result<(), CriteriaError> {
    if i == 0 || i > size {
        Err(CriteriaError::Column { i, size })
    } else {
        Ok(())
    }
}

/// `M_n h` for `n >= 0`; needs `h^(1..=n+1)`.
pub fn m_matrix(h: &DerivativeTable, n: usize) -> Result<CriteriaMatrix, CriteriaError> {
    Ok(CriteriaMatrix {
        n,
        variant: MatrixVariant::M,
        entries: s_rows(h, n + 1)?,
    })
}

/// `M_{n,i} h` for `1 <= i <= n+1`.
pub fn m_matrix_col(h: &DerivativeTable, n: usize, i: usize) -> Result<CriteriaMatrix, CriteriaError> {
    check_col(i, n + 1)?;
    let mut entries = s_rows(h, n + 1)?;
    e1_column(&mut entries, i - 1);
    Ok(CriteriaMatrix {
        n,
        variant: MatrixVariant::MCol(i),
        entries,
    })
}

/// `M_n h` with first row `(0, S_n^1 h, …, S_n^n h)`, for `n >= 1`.
pub fn m_matrix_bordered(h: &DerivativeTable, n: usize) -> Result<CriteriaMatrix, CriteriaError> {
    let mut entries = s_rows(h, n + 1)?;
    entries[(0, 0)] = 0.0;
    for i in 1..=n {
        entries[(0, i)] = s_nl(h, n, i)?;
    }
    Ok(CriteriaMatrix {
        n,
        variant: MatrixVariant::MBordered,
        entries,
    })
}

/// `Q_n φ` for `n >= 1`; needs `φ^(1..=n)`.
pub fn q_matrix(phi: &DerivativeTable, n: usize) -> Result<CriteriaMatrix, CriteriaError> {
    Ok(CriteriaMatrix {
        n,
        variant: MatrixVariant::Q,
        entries: s_rows(phi, n)?,
    })
}

/// `Q_{n,i} φ`; needs `φ^(1..=n+1)`.
pub fn q_matrix_col(phi: &DerivativeTable, n: usize, i: usize) -> Result<CriteriaMatrix, CriteriaError> {
    check_col(i, n)?;
    if phi.len() < n + 1 {
        return Err(CriteriaError::Fdb(crate::faa_di_bruno::FdbError::TableTooShort {
            have: phi.len(),
            need: n + 1,
        }));
    }
    let mut entries = s_rows(phi, n)?;
    for r in 0..n {
        entries[(r, i - 1)] = *phi.get(r + 2);
    }
    Ok(CriteriaMatrix {
        n,
        variant: MatrixVariant::QCol(i),
        entries,
    })
}

/// `Q̃_{n,i} φ`.
pub fn q_tilde_col(phi: &DerivativeTable, n: usize, i: usize) -> Result<CriteriaMatrix, CriteriaError> {
    check_col(i, n)?;
    let mut entries = s_rows(phi, n)?;
    e1_column(&mut entries, i - 1);
    Ok(CriteriaMatrix {
        n,
        variant: MatrixVariant::QTildeCol(i),
        entries,
    })
}

impl CriteriaMatrix {
    pub fn log_det(&self) -> LogDet {
        match self.variant {
            MatrixVariant::M | MatrixVariant::Q => log_det_triangular(&self.entries),
            _ => log_det(&self.entries),
        }
    }

    pub fn det(&self) -> f64 {
        self.log_det().value()
    }
}

fn nonsingular(d: LogDet) -> Result<LogDet, CriteriaError> {
    if d.sign == 0.0 || !d.ln_abs.is_finite() {
        Err(CriteriaError::Singular)
    } else {
        Ok(d)
    }
}

/// `g^(n)(s) = (1/det M_n h) Σ_{i=1}^n det(M_{n,i+1} h) S_n^i h`.
pub fn g_derivative_via_h(h: &DerivativeTable, n: usize) -> Result<f64, CriteriaError> {
    check_order(n)?;
    let det = nonsingular(m_matrix(h, n)?.log_det())?;
    let mut total = 0.0;
    for i in 1..=n {
        let num = m_matrix_col(h, n, i + 1)?.log_det();
        total += num.ratio(&det)? * s_nl(h, n, i)?;
    }
    Ok(total)
}

/// `g^(n)(s) = det(Q_{n,n} φ) / det(Q_n φ)` at `t = h(s)`.
pub fn g_derivative_via_phi(phi: &DerivativeTable, n: usize) -> Result<f64, CriteriaError> {
    check_order(n)?;
    let det = nonsingular(q_matrix(phi, n)?.log_det())?;
    q_matrix_col(phi, n, n)?.log_det().ratio(&det)
}

/// `g^(n)(s)` from the bordered matrix over `det M_n h`.
pub fn g_derivative_via_cofactors(h: &DerivativeTable, n: usize) -> Result<f64, CriteriaError> {
    check_order(n)?;
    let det = nonsingular(m_matrix(h, n)?.log_det())?;
    m_matrix_bordered(h, n)?.log_det().ratio(&det)
}

/// `φ_{n,i} = det(Q̃_{n,i} φ) / det(Q_n φ)` for `i = 1..=n`, the derivatives
/// of the inverse `h` at `s = φ(t)`.
pub fn inverse_by_determinants(phi: &DerivativeTable, n: usize) -> Result<DerivativeTable, CriteriaError> {
    check_order(n)?;
    let det = nonsingular(q_matrix(phi, n)?.log_det())?;
    let raw = (1..=n)
        .map(|i| q_tilde_col(phi, n, i)?.log_det().ratio(&det))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DerivativeTable::new(raw))
}

/// `μ̃^(n)(s) = Σ_l μ^(l)(t) S_n^l(φ_{n,·})` for one forcing component.
pub fn mu_tilde_derivative(mu: &DerivativeTable, phi: &DerivativeTable, n: usize) -> Result<f64, CriteriaError> {
    let h = inverse_by_determinants(phi, n)?;
    Ok(compose_derivative(mu, &h, n)?)
}

fn check_order(n: usize) -> Result<(), CriteriaError> {
    if n == 0 {
        Err(CriteriaError::Order(0))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::faa_di_bruno::inverse_jets;
    use approx::assert_relative_eq;

    fn table(v: &[f64]) -> DerivativeTable {
        DerivativeTable::new(v.to_vec())
    }

    #[test]
    fn intermediate_determinants_n2() {
        let (h1, h2, h3) = (1.3, -0.4, 0.9);
        let h = table(&[h1, h2, h3]);
        assert_relative_eq!(m_matrix_col(&h, 2, 2).unwrap().det(), -h1.powi(3) * h2, max_relative = 1e-14);
        assert_relative_eq!(
            m_matrix_col(&h, 2, 3).unwrap().det(),
            3.0 * h1 * h2 * h2 - h1 * h1 * h3,
            max_relative = 1e-14
        );
        assert_relative_eq!(m_matrix(&h, 2).unwrap().det(), h1.powi(6), max_relative = 1e-14);
    }

    #[test]
    fn closed_forms_h_route() {
        let (h1, h2, h3) = (1.3, -0.4, 0.9);
        let h = table(&[h1, h2, h3]);
        let want2 = 2.0 * h2 * h2 / h1.powi(3) - h3 / (h1 * h1);
        assert_relative_eq!(g_derivative_via_h(&h, 2).unwrap(), want2, max_relative = 1e-13);
        assert_relative_eq!(g_derivative_via_cofactors(&h, 2).unwrap(), want2, max_relative = 1e-13);
        assert_relative_eq!(g_derivative_via_cofactors(&h, 1).unwrap(), -h2 / (h1 * h1), max_relative = 1e-14);
    }

    #[test]
    fn closed_forms_phi_route() {
        let (p1, p2, p3) = (0.7, 0.25, -1.1);
        let phi = table(&[p1, p2, p3]);
        assert_relative_eq!(g_derivative_via_phi(&phi, 1).unwrap(), p2 / p1, max_relative = 1e-14);
        assert_relative_eq!(
            q_matrix_col(&phi, 2, 2).unwrap().det(),
            p1 * p3 - p2 * p2,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            g_derivative_via_phi(&phi, 2).unwrap(),
            (p1 * p3 - p2 * p2) / p1.powi(3),
            max_relative = 1e-13
        );
        let h = inverse_by_determinants(&phi, 2).unwrap();
        assert_relative_eq!(*h.get(1), 1.0 / p1, max_relative = 1e-14);
        assert_relative_eq!(*h.get(2), -p2 / p1.powi(3), max_relative = 1e-14);
    }

    #[test]
    fn mu_tilde_closed_forms_and_identity() {
        let phi = table(&[0.7, 0.25, -1.1]);
        let mu = table(&[0.3, -0.6, 2.0]);
        assert_relative_eq!(mu_tilde_derivative(&mu, &phi, 1).unwrap(), 0.3 / 0.7, max_relative = 1e-14);
        assert_relative_eq!(
            mu_tilde_derivative(&mu, &phi, 2).unwrap(),
            (-0.6 * 0.7 - 0.3 * 0.25) / 0.7f64.powi(3),
            max_relative = 1e-13
        );
        // μ = φ gives μ̃(s) = s
        assert_relative_eq!(mu_tilde_derivative(&phi, &phi, 1).unwrap(), 1.0, max_relative = 1e-15);
        assert!(mu_tilde_derivative(&phi, &phi, 2).unwrap().abs() < 1e-14);
    }

    #[test]
    fn identity_h_gives_zero() {
        let h = table(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        for n in 1..=6 {
            assert_eq!(g_derivative_via_h(&h, n).unwrap(), 0.0);
            assert_eq!(g_derivative_via_cofactors(&h, n).unwrap(), 0.0);
        }
    }

    #[test]
    fn determinant_inverse_matches_forward_substitution() {
        let phi = table(&[0.8, -0.3, 0.5, 1.2, -0.7, 0.2]);
        let a = inverse_by_determinants(&phi, 6).unwrap();
        let b = inverse_jets(&phi, 6).unwrap();
        for i in 1..=6 {
            assert_relative_eq!(*a.get(i), *b.get(i), max_relative = 1e-11);
        }
    }

    #[test]
    fn triangular_products() {
        let h = table(&[1.7, 0.3, -0.2, 0.5, 0.1, 0.9, -0.4]);
        let phi = table(&[0.6, 0.3, -0.2, 0.5, 0.1, 0.9, -0.4]);
        for n in 1..=6 {
            let want_m: f64 = (1..=n + 1).map(|i| 1.7f64.powi(i as i32)).product();
            let want_q: f64 = (1..=n).map(|i| 0.6f64.powi(i as i32)).product();
            assert_relative_eq!(m_matrix(&h, n).unwrap().det(), want_m, max_relative = 1e-12);
            assert_relative_eq!(q_matrix(&phi, n).unwrap().det(), want_q, max_relative = 1e-12);
            assert_relative_eq!(log_det(&m_matrix(&h, n).unwrap().entries).value(), want_m, max_relative = 1e-12);
        }
    }

    #[test]
    fn log_det_survives_underflow() {
        let phi = table(&[1e-16, -2e-24, 6e-32, 0.0, 0.0, 0.0, 0.0]);
        let d = q_matrix(&phi, 6).unwrap().log_det();
        assert_eq!(d.sign, 1.0);
        assert_relative_eq!(d.ln_abs, 21.0 * 1e-16f64.ln(), max_relative = 1e-14);
    }
}
