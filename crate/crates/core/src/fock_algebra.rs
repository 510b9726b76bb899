//! Dense operators on the first N Fock states: ladder operators, the
//! displacement operator D(α) = exp(αa† − α*a) in closed form, and a
//! scaling-and-squaring matrix exponential used as an independent oracle.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Displacement argument α of D(α).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentAmplitude(pub Complex64);

impl CoherentAmplitude {
    /// Mean occupation |α|² of the coherent state D(α)|0⟩.
    pub fn mean_occupation(&self) -> f64 {
        self.0.norm_sqr()
    }
}

/// Default truncation for a displacement of size |α|: max(32, ⌈8|α|² + 16⌉).
pub fn default_truncation(alpha: CoherentAmplitude) -> usize {
    let n = (8.0 * alpha.mean_occupation() + 16.0).ceil();
    if n.is_finite() {
        (n as usize).max(32)
    } else {
        usize::MAX
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationWarning {
    pub tail_estimate: f64,
    pub mean_occupation: f64,
    pub dimension: usize,
}

/// A dense N×N complex matrix acting on |0⟩…|N−1⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOperator {
    matrix: Array2<Complex64>,
    tail_estimate: f64,
    unitary_amplitude: Option<CoherentAmplitude>,
    warning: Option<TruncationWarning>,
}

fn tail_of(m: &Array2<Complex64>) -> f64 {
    let n = m.nrows();
    let mut tail = 0.0_f64;
    for idx in n.saturating_sub(2)..n {
        for j in 0..n {
            tail = tail.max(m[[idx, j]].norm()).max(m[[j, idx]].norm());
        }
    }
    tail
}

impl TruncatedOperator {
    pub fn from_matrix(matrix: Array2<Complex64>) -> Result<Self> {
        let (r, c) = matrix.dim();
        if r != c {
            return Err(Error::DimensionMismatch { expected: r, found: c });
        }
        if r < 2 {
            return Err(Error::InvalidArgument(format!("truncation must keep at least 2 states, got {r}")));
        }
        let tail_estimate = tail_of(&matrix);
        Ok(Self { matrix, tail_estimate, unitary_amplitude: None, warning: None })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let op = Self::from_matrix(Array2::eye(n))?;
        Ok(op.labelled_unitary(CoherentAmplitude(ZERO)))
    }

    fn labelled_unitary(mut self, alpha: CoherentAmplitude) -> Self {
        self.unitary_amplitude = Some(alpha);
        self
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<Complex64> {
        self.matrix
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.matrix[[m, n]]
    }

    /// Largest |element| in the last two rows and columns.
    pub fn tail_estimate(&self) -> f64 {
        self.tail_estimate
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary_amplitude.is_some()
    }

    pub fn unitary_amplitude(&self) -> Option<CoherentAmplitude> {
        self.unitary_amplitude
    }

    pub fn warning(&self) -> Option<&TruncationWarning> {
        self.warning.as_ref()
    }

    /// Leading block trusted for a displacement of amplitude α: at most
    /// N − ⌈4|α|² + 8⌉ states, and never past the first column whose norm
    /// has leaked beyond the truncation edge by more than 1e-10. Operators
    /// without a construction amplitude use the leading half.
    pub fn healthy_block(&self) -> usize {
        match self.unitary_amplitude {
            Some(a) => {
                let rule = self.dim().saturating_sub((4.0 * a.mean_occupation() + 8.0).ceil() as usize);
                let leaked = (0..rule).find(|&n| {
                    let norm: f64 = self.matrix.column(n).iter().map(|z| z.norm_sqr()).sum();
                    (1.0 - norm).abs() > 1e-10
                });
                leaked.unwrap_or(rule)
            }
            None => self.dim() / 2,
        }
    }

    pub fn adjoint(&self) -> Self {
        let m = self.matrix.t().mapv(|z| z.conj());
        Self {
            tail_estimate: tail_of(&m),
            matrix: m,
            unitary_amplitude: self.unitary_amplitude.map(|a| CoherentAmplitude(-a.0)),
            warning: self.warning,
        }
    }

    pub fn dot(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Self::from_matrix(self.matrix.dot(&other.matrix))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let m = self.matrix.mapv(|z| z * c);
        Self { tail_estimate: tail_of(&m), matrix: m, ..self.clone() }
    }

    /// max |(U†U − I)_{mn}| over the leading `block` states.
    pub fn unitarity_defect(&self, block: usize) -> f64 {
        let block = block.min(self.dim());
        let mut worst = 0.0_f64;
        for m in 0..block {
            for n in 0..block {
                let mut acc = ZERO;
                for j in 0..self.dim() {
                    acc += self.matrix[[j, m]].conj() * self.matrix[[j, n]];
                }
                if m == n {
                    acc -= ONE;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }
}

/// Annihilation and creation operators truncated to N states.
pub fn ladder_ops(n: usize) -> Result<(TruncatedOperator, TruncatedOperator)> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("truncation must keep at least 2 states, got {n}")));
    }
    let mut a = Array2::from_elem((n, n), ZERO);
    for j in 1..n {
        a[[j - 1, j]] = Complex64::new((j as f64).sqrt(), 0.0);
    }
    let a_dag = a.t().mapv(|z| z.conj());
    Ok((TruncatedOperator::from_matrix(a)?, TruncatedOperator::from_matrix(a_dag)?))
}

/// ln(j!) for j = 0..n by running sums of logarithms.
pub(crate) fn log_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for j in 1..=n {
        acc += (j as f64).ln();
        out.push(acc);
    }
    out
}

/// L_j^{(k)}(x) for j = 0..=n_max by the three-term recurrence
/// (j+1)L_{j+1} = (2j+1+k−x)L_j − (j+k)L_{j−1}.
pub fn laguerre_sequence(n_max: usize, k: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    if n_max == 0 {
        return out;
    }
    let k = k as f64;
    out.push(1.0 + k - x);
    for j in 1..n_max {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + k - x) * out[j] - (jf + k) * out[j - 1]) / (jf + 1.0);
        out.push(next);
    }
    out
}

/// Closed-form ⟨m|D(α)|n⟩ for m, n < N:
/// e^{−|α|²/2}·√(n!/m!)·α^{m−n}·L_n^{(m−n)}(|α|²) for m ≥ n and the
/// mirrored expression with −α* for m < n.
pub fn displacement_matrix(alpha: CoherentAmplitude, n: usize) -> Result<TruncatedOperator> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("truncation must keep at least 2 states, got {n}")));
    }
    let a = alpha.0;
    if !(a.re.is_finite() && a.im.is_finite()) {
        return Err(Error::InvalidArgument("displacement amplitude must be finite".into()));
    }
    let x = a.norm_sqr();
    let mut d = Array2::from_elem((n, n), ZERO);
    if x == 0.0 {
        d.diag_mut().fill(ONE);
    } else {
        let lf = log_factorials(n);
        let ln_r = x.sqrt().ln();
        let theta = a.arg();
        let theta_neg = (-a.conj()).arg();
        for k in 0..n {
            let lag = laguerre_sequence(n - 1 - k, k, x);
            for (low, &l) in lag.iter().enumerate() {
                let high = low + k;
                if l == 0.0 {
                    continue;
                }
                let log_mag = -0.5 * x + 0.5 * (lf[low] - lf[high]) + k as f64 * ln_r + l.abs().ln();
                let mag = log_mag.exp() * l.signum();
                // below the diagonal: α^k; above: (−α*)^k
                d[[high, low]] = Complex64::from_polar(mag, k as f64 * theta);
                if k > 0 {
                    d[[low, high]] = Complex64::from_polar(mag, k as f64 * theta_neg);
                }
            }
        }
    }
    let mut op = TruncatedOperator::from_matrix(d)?.labelled_unitary(alpha);
    if x > n as f64 / 4.0 {
        op.warning = Some(TruncationWarning { tail_estimate: op.tail_estimate, mean_occupation: x, dimension: n });
    }
    Ok(op)
}

fn one_norm(m: &Array2<Complex64>) -> f64 {
    m.columns().into_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// exp(A) by scaling and squaring around a Taylor core.
pub fn matrix_exponential(a: &TruncatedOperator) -> Result<TruncatedOperator> {
    let m = a.matrix();
    if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let norm = one_norm(m);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    if squarings > 1000 {
        return Err(Error::Accuracy { what: "matrix exponential".into(), achieved: norm, requested: 1e3 });
    }
    let scaled = m.mapv(|z| z / 2f64.powi(squarings));
    let n = a.dim();
    let mut result = Array2::<Complex64>::eye(n);
    let mut term = Array2::<Complex64>::eye(n);
    for j in 1..=40 {
        term = term.dot(&scaled).mapv(|z| z / j as f64);
        result += &term;
        if one_norm(&term) <= f64::EPSILON * 1e-2 * one_norm(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    if result.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Accuracy { what: "matrix exponential overflow".into(), achieved: f64::INFINITY, requested: norm });
    }
    TruncatedOperator::from_matrix(result)
}

/// U·ψ.
pub fn apply_operator(u: &TruncatedOperator, psi: &[Complex64]) -> Result<Vec<Complex64>> {
    if psi.len() != u.dim() {
        return Err(Error::DimensionMismatch { expected: u.dim(), found: psi.len() });
    }
    let v = Array1::from(psi.to_vec());
    Ok(u.matrix().dot(&v).to_vec())
}

/// The generator αa† − α*a on N states.
pub fn displacement_generator(alpha: CoherentAmplitude, n: usize) -> Result<TruncatedOperator> {
    let (a, a_dag) = ladder_ops(n)?;
    let g = a_dag.matrix().mapv(|z| z * alpha.0) - a.matrix().mapv(|z| z * alpha.0.conj());
    TruncatedOperator::from_matrix(g)
}

/// |n⟩ on N states.
pub fn basis_state(n: usize, dim: usize) -> Result<Vec<Complex64>> {
    if n >= dim {
        return Err(Error::DimensionMismatch { expected: dim, found: n + 1 });
    }
    let mut v = vec![ZERO; dim];
    v[n] = ONE;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_diff(a: &Array2<Complex64>, b: &Array2<Complex64>, block: usize) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..block {
            for j in 0..block {
                worst = worst.max((a[[i, j]] - b[[i, j]]).norm());
            }
        }
        worst
    }

    #[test]
    fn ladder_ops_small() {
        let (a, a_dag) = ladder_ops(2).unwrap();
        assert_eq!(a.matrix(), &ndarray::arr2(&[[ZERO, ONE], [ZERO, ZERO]]));
        assert_eq!(a_dag.matrix(), &a.matrix().t().mapv(|z| z.conj()));
        assert!(ladder_ops(1).is_err());
    }

    #[test]
    fn number_operator_and_commutator() {
        let n = 12;
        let (a, a_dag) = ladder_ops(n).unwrap();
        let num = a_dag.dot(&a).unwrap();
        for k in 0..n {
            assert!((num.get(k, k) - c(k as f64, 0.0)).norm() < 1e-14);
        }
        let comm = a.dot(&a_dag).unwrap().matrix() - num.matrix();
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                let expected = if i == j { ONE } else { ZERO };
                assert!((comm[[i, j]] - expected).norm() < 1e-14);
            }
        }
        // only the last diagonal entry is corrupted
        assert!((comm[[n - 1, n - 1]] - c(1.0 - n as f64, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn displacement_of_zero_is_identity() {
        let d = displacement_matrix(CoherentAmplitude(ZERO), 10).unwrap();
        assert_eq!(d.matrix(), &Array2::<Complex64>::eye(10));
        assert!(d.warning().is_none());
    }

    #[test]
    fn vacuum_element_and_coherent_state() {
        let alpha = c(0.7, -0.4);
        let d = displacement_matrix(CoherentAmplitude(alpha), 40).unwrap();
        let x = alpha.norm_sqr();
        assert!((d.get(0, 0) - c((-x / 2.0).exp(), 0.0)).norm() < 1e-15);
        let psi = apply_operator(&d, &basis_state(0, 40).unwrap()).unwrap();
        let lf = log_factorials(40);
        for (k, amp) in psi.iter().enumerate() {
            let expected = (-x / 2.0).exp() * alpha.powu(k as u32) / (lf[k].exp()).sqrt();
            assert!((amp - expected).norm() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn closed_form_matches_exponential_oracle() {
        let alpha = CoherentAmplitude(c(0.3, 0.4));
        let d = displacement_matrix(alpha, 64).unwrap();
        let e = matrix_exponential(&displacement_generator(alpha, 96).unwrap()).unwrap();
        assert!(max_diff(d.matrix(), e.matrix(), 32) < 1e-10);
    }

    #[test]
    fn exponential_of_diagonal() {
        let d = [c(0.5, 0.0), c(-1.0, 2.0), c(3.0, -0.5)];
        let mut m = Array2::from_elem((3, 3), ZERO);
        for (i, &v) in d.iter().enumerate() {
            m[[i, i]] = v;
        }
        let e = matrix_exponential(&TruncatedOperator::from_matrix(m).unwrap()).unwrap();
        for (i, &v) in d.iter().enumerate() {
            assert!((e.get(i, i) - v.exp()).norm() < 1e-12 * v.exp().norm());
        }
        let z = matrix_exponential(&TruncatedOperator::from_matrix(Array2::from_elem((4, 4), ZERO)).unwrap()).unwrap();
        assert_eq!(z.matrix(), &Array2::<Complex64>::eye(4));
    }

    #[test]
    fn truncation_warning_for_large_amplitude() {
        let d = displacement_matrix(CoherentAmplitude(c(3.0, 0.0)), 32).unwrap();
        let w = d.warning().expect("warning expected");
        assert_eq!(w.dimension, 32);
        assert!(displacement_matrix(CoherentAmplitude(c(2.0, 0.0)), 32).unwrap().warning().is_none());
    }

    #[test]
    fn apply_rejects_wrong_dimension() {
        let (a, _) = ladder_ops(4).unwrap();
        assert!(matches!(apply_operator(&a, &[ONE; 3]), Err(Error::DimensionMismatch { .. })));
        let psi = apply_operator(&a, &basis_state(1, 4).unwrap()).unwrap();
        assert_eq!(psi, basis_state(0, 4).unwrap());
    }

    #[test]
    fn default_truncation_rule() {
        assert_eq!(default_truncation(CoherentAmplitude(ZERO)), 32);
        assert_eq!(default_truncation(CoherentAmplitude(c(2.0, 0.0))), 48);
    }

    #[test]
    fn laguerre_known_values() {
        // L_2^{(1)}(x) = (x² − 6x + 6)/2
        let l = laguerre_sequence(3, 1, 1.5);
        assert!((l[2] - (1.5f64.powi(2) - 9.0 + 6.0) / 2.0).abs() < 1e-15);
        assert_eq!(laguerre_sequence(0, 4, 2.0), vec![1.0]);
    }
}
