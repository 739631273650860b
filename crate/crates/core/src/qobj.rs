//! Finite-dimensional operator algebra.
//!
//! Density operators are represented as dense complex matrices and, for the
//! inference engine, as real coordinate vectors in a Hilbert-Schmidt
//! orthonormal basis of Hermitian operators `{B_α}` with `B_0 = 𝟙/√D`.
//! Process hypotheses are handled through their Choi states `J(Λ)/D`, which
//! turns process tomography into state tomography on a `D²`-dimensional space.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Hermiticity and trace tolerance used when constructing states and effects.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Smallest eigenvalue accepted as positive semidefinite.
pub const PSD_FLOOR: f64 = -1e-10;
/// Tolerance on the partial-trace identity of a trace-preserving Choi state.
pub const TP_TOL: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Largest entrywise deviation `max |M − M†|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).unscale(2.0)
}

/// Eigendecomposition of a Hermitian matrix; eigenvalues ascending, eigenvectors
/// as matching columns.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    hermitian_eigen(m).0
}

/// Applies a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_function(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let mut scaled = vectors.clone();
    for (c, &v) in values.iter().enumerate() {
        let fv = f(v);
        scaled.column_mut(c).scale_mut(fv);
    }
    scaled * vectors.adjoint()
}

/// `|ψ⟩⟨ψ|/⟨ψ|ψ⟩`.
pub fn ket_projector(ket: &[Complex64]) -> CMatrix {
    let norm2: f64 = ket.iter().map(|z| z.norm_sqr()).sum();
    CMatrix::from_fn(ket.len(), ket.len(), |i, j| ket[i] * ket[j].conj() / norm2)
}

/// Single-qubit Pauli matrix by index: 0 = 𝟙, 1 = X, 2 = Y, 3 = Z.
pub fn pauli(index: usize) -> CMatrix {
    match index {
        0 => identity(2),
        1 => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        2 => CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        3 => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        _ => panic!("Pauli index {index} out of range"),
    }
}

/// Tensor product of single-qubit Paulis, first index acting on the most
/// significant qubit.
pub fn pauli_string(indices: &[usize]) -> CMatrix {
    indices
        .iter()
        .fold(identity(1), |acc, &i| kron(&acc, &pauli(i)))
}

pub fn hadamard() -> CMatrix {
    (pauli(1) + pauli(3)).unscale(std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Pauli { n_qubits: usize },
    GellMann { dim: usize },
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisKind::Pauli { n_qubits } => write!(f, "pauli({n_qubits})"),
            BasisKind::GellMann { dim } => write!(f, "gell-mann({dim})"),
        }
    }
}

/// Hilbert-Schmidt orthonormal Hermitian basis with `B_0 = 𝟙/√D`.
#[derive(Debug, Clone)]
pub struct OperatorBasis {
    kind: BasisKind,
    dim: usize,
    elements: Vec<CMatrix>,
    labels: Vec<String>,
}

impl OperatorBasis {
    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    /// Hilbert-space dimension `D`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of basis elements, `D²`.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Pauli basis for power-of-two dimensions, Gell-Mann otherwise.
    pub fn for_dim(dim: usize) -> Result<Arc<Self>> {
        if dim.is_power_of_two() && dim >= 2 {
            pauli_basis(dim.trailing_zeros() as usize)
        } else {
            gell_mann_basis(dim)
        }
    }

    /// Coordinates `Re Tr(B_α A)` of an operator, without a dimension check.
    pub fn coords_of(&self, op: &CMatrix) -> Vec<f64> {
        let d = self.dim;
        self.elements
            .iter()
            .map(|b| {
                let mut acc = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        let bij = b[(i, j)];
                        if bij != ZERO {
                            acc += (bij * op[(j, i)]).re;
                        }
                    }
                }
                acc
            })
            .collect()
    }

    /// `Σ_α x_α B_α`, without a length check.
    pub fn operator_of(&self, coords: &[f64]) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (b, &x) in self.elements.iter().zip(coords) {
            if x != 0.0 {
                out.zip_apply(b, |o, bij| *o += bij * x);
            }
        }
        out
    }

    fn same_as(&self, other: &OperatorBasis) -> bool {
        self.kind == other.kind
    }
}

/// Normalized Pauli strings `P/√(2^n)` with the identity string first.
pub fn pauli_basis(n_qubits: usize) -> Result<Arc<OperatorBasis>> {
    if n_qubits == 0 {
        return Err(Error::InvalidParameter("pauli basis needs at least one qubit".into()));
    }
    let dim = 1usize << n_qubits;
    let norm = (dim as f64).sqrt();
    let letters = ['I', 'X', 'Y', 'Z'];
    let count = dim * dim;
    let mut elements = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for code in 0..count {
        let digits: Vec<usize> = (0..n_qubits)
            .rev()
            .map(|q| (code >> (2 * q)) & 3)
            .collect();
        elements.push(pauli_string(&digits).unscale(norm));
        labels.push(digits.iter().map(|&i| letters[i]).collect());
    }
    Ok(Arc::new(OperatorBasis {
        kind: BasisKind::Pauli { n_qubits },
        dim,
        elements,
        labels,
    }))
}

/// Generalized Gell-Mann basis: `𝟙/√D`, then the symmetric, antisymmetric and
/// diagonal families, each normalized to unit Hilbert-Schmidt norm.
pub fn gell_mann_basis(dim: usize) -> Result<Arc<OperatorBasis>> {
    if dim < 2 {
        return Err(Error::InvalidParameter(format!(
            "Gell-Mann basis needs dimension at least 2, got {dim}"
        )));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut elements = vec![identity(dim).unscale((dim as f64).sqrt())];
    let mut labels = vec!["I".to_string()];
    for j in 0..dim {
        for k in (j + 1)..dim {
            let mut m = CMatrix::zeros(dim, dim);
            m[(j, k)] = Complex64::new(s, 0.0);
            m[(k, j)] = Complex64::new(s, 0.0);
            elements.push(m);
            labels.push(format!("S{j}{k}"));
        }
    }
    for j in 0..dim {
        for k in (j + 1)..dim {
            let mut m = CMatrix::zeros(dim, dim);
            m[(j, k)] = Complex64::new(0.0, -s);
            m[(k, j)] = Complex64::new(0.0, s);
            elements.push(m);
            labels.push(format!("A{j}{k}"));
        }
    }
    for l in 1..dim {
        let norm = ((l * (l + 1)) as f64).sqrt();
        let mut m = CMatrix::zeros(dim, dim);
        for i in 0..l {
            m[(i, i)] = Complex64::new(1.0 / norm, 0.0);
        }
        m[(l, l)] = Complex64::new(-(l as f64) / norm, 0.0);
        elements.push(m);
        labels.push(format!("D{l}"));
    }
    Ok(Arc::new(OperatorBasis {
        kind: BasisKind::GellMann { dim },
        dim,
        elements,
        labels,
    }))
}

/// Real coordinate vector `x_α = Tr(B_α† A)` of an operator in a given basis.
#[derive(Debug, Clone)]
pub struct VectorizedOperator {
    coords: Vec<f64>,
    basis: Arc<OperatorBasis>,
}

impl VectorizedOperator {
    pub fn from_coords(coords: Vec<f64>, basis: Arc<OperatorBasis>) -> Result<Self> {
        if coords.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: coords.len(),
            });
        }
        Ok(Self { coords, basis })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn basis(&self) -> &Arc<OperatorBasis> {
        &self.basis
    }

    pub fn devectorize(&self) -> CMatrix {
        self.basis.operator_of(&self.coords)
    }

    /// Real dot product of coordinates; equals `Tr(A B)` for Hermitian operands.
    pub fn dot(&self, other: &VectorizedOperator) -> Result<f64> {
        check_same_basis(&self.basis, &other.basis)?;
        Ok(dot(&self.coords, &other.coords))
    }
}

pub(crate) fn check_same_basis(a: &OperatorBasis, b: &OperatorBasis) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::BasisMismatch(a.kind.to_string(), b.kind.to_string()))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_square(op: &CMatrix, dim: usize) -> Result<()> {
    if op.nrows() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: op.nrows(),
        });
    }
    if op.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: op.ncols(),
        });
    }
    Ok(())
}

pub fn vectorize(op: &CMatrix, basis: &Arc<OperatorBasis>) -> Result<VectorizedOperator> {
    check_square(op, basis.dim())?;
    Ok(VectorizedOperator {
        coords: basis.coords_of(op),
        basis: Arc::clone(basis),
    })
}

pub fn devectorize(v: &VectorizedOperator) -> CMatrix {
    v.devectorize()
}

/// Hilbert-Schmidt inner product `Tr(A†B)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> Result<Complex64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum())
}

/// Which tensor factor survives a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    First,
    Second,
}

pub fn partial_trace(op: &CMatrix, dims: (usize, usize), keep: Keep) -> Result<CMatrix> {
    let (da, db) = dims;
    check_square(op, da * db)?;
    let out = match keep {
        Keep::First => CMatrix::from_fn(da, da, |i, j| {
            (0..db).map(|k| op[(i * db + k, j * db + k)]).sum()
        }),
        Keep::Second => CMatrix::from_fn(db, db, |k, l| {
            (0..da).map(|i| op[(i * db + k, i * db + l)]).sum()
        }),
    };
    Ok(out)
}

/// A validated density operator: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    matrix: CMatrix,
}

impl DensityOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        validate_density(&matrix)?;
        Ok(Self { matrix })
    }

    /// Trusts the caller; used where validity holds by construction.
    pub(crate) fn new_unchecked(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: identity(dim).unscale(dim as f64),
        }
    }

    pub fn pure(ket: &[Complex64]) -> Self {
        Self {
            matrix: ket_projector(ket),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        Self::new(CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(diag[i], 0.0)
            } else {
                ZERO
            }
        }))
    }

    pub fn from_vectorized(v: &VectorizedOperator) -> Result<Self> {
        Self::new(v.devectorize())
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn purity(&self) -> f64 {
        hs_inner(&self.matrix, &self.matrix).map(|z| z.re).unwrap_or(f64::NAN)
    }

    pub fn vectorize(&self, basis: &Arc<OperatorBasis>) -> Result<VectorizedOperator> {
        vectorize(&self.matrix, basis)
    }
}

pub(crate) fn validate_density(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::InvalidState(format!(
            "matrix is {}x{}, expected nonempty square",
            m.nrows(),
            m.ncols()
        )));
    }
    let herm = hermitian_deviation(m);
    if herm > HERMITIAN_TOL {
        return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:.3e})")));
    }
    let tr = trace(m);
    if (tr.re - 1.0).abs() > HERMITIAN_TOL || tr.im.abs() > HERMITIAN_TOL {
        return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
    }
    let min = hermitian_eigenvalues(m)[0];
    if min < PSD_FLOOR {
        return Err(Error::InvalidState(format!("minimum eigenvalue {min:.3e} is negative")));
    }
    Ok(())
}

/// A measurement effect `0 ≤ E ≤ c·𝟙`.
///
/// Measurement effects built with [`Effect::new`] have `c = 1`. Composite
/// process-tomography effects `P ⊗ E` from [`process_effect`] have `c = D`;
/// their Born probabilities against valid Choi states still lie in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Effect {
    matrix: CMatrix,
    bound: f64,
}

impl Effect {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::with_bound(matrix, 1.0)
    }

    fn with_bound(matrix: CMatrix, bound: f64) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidEffect("effect must be square".into()));
        }
        let herm = hermitian_deviation(&matrix);
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidEffect(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let spec = hermitian_eigenvalues(&matrix);
        let (lo, hi) = (spec[0], spec[spec.len() - 1]);
        if lo < PSD_FLOOR || hi > bound + HERMITIAN_TOL {
            return Err(Error::InvalidEffect(format!(
                "spectrum [{lo:.3e}, {hi:.3e}] outside [0, {bound}]"
            )));
        }
        Ok(Self { matrix, bound })
    }

    pub fn projector(ket: &[Complex64]) -> Self {
        Self {
            matrix: ket_projector(ket),
            bound: 1.0,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Operator-norm bound `c` with `E ≤ c·𝟙`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// `𝟙 − E`, the other outcome of a two-outcome measurement.
    pub fn complement(&self) -> Result<Self> {
        Self::with_bound(identity(self.dim()).scale(self.bound) - &self.matrix, self.bound)
    }

    pub fn vectorize(&self, basis: &Arc<OperatorBasis>) -> Result<VectorizedOperator> {
        vectorize(&self.matrix, basis)
    }
}

/// Choi state `J(Λ)/D` of a channel on `C^D`, input factor first.
#[derive(Debug, Clone)]
pub struct ChoiState {
    matrix: CMatrix,
    dim: usize,
}

impl ChoiState {
    pub fn new(matrix: CMatrix, dim: usize) -> Result<Self> {
        check_square(&matrix, dim * dim)?;
        validate_density(&matrix)?;
        let dev = tp_deviation(&matrix, dim);
        if dev > TP_TOL {
            return Err(Error::NotTracePreserving(dev));
        }
        Ok(Self { matrix, dim })
    }

    pub(crate) fn new_unchecked(matrix: CMatrix, dim: usize) -> Self {
        Self { matrix, dim }
    }

    /// The completely depolarizing channel, `𝟙/D²`.
    pub fn depolarizing(dim: usize) -> Self {
        let n = dim * dim;
        Self {
            matrix: identity(n).unscale(n as f64),
            dim,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Channel dimension `D` (both input and output).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_density(&self) -> DensityOperator {
        DensityOperator::new_unchecked(self.matrix.clone())
    }

    /// `Λ(X) = D·Tr_in[(Xᵀ ⊗ 𝟙) J/D]`.
    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        check_square(x, self.dim)?;
        let lifted = kron(&x.transpose(), &identity(self.dim)) * &self.matrix;
        Ok(partial_trace(&lifted, (self.dim, self.dim), Keep::Second)?.scale(self.dim as f64))
    }

    pub fn vectorize(&self, basis: &Arc<OperatorBasis>) -> Result<VectorizedOperator> {
        vectorize(&self.matrix, basis)
    }
}

/// `max |Tr_out(J/D) − 𝟙/D|`.
pub fn tp_deviation(choi: &CMatrix, dim: usize) -> f64 {
    match partial_trace(choi, (dim, dim), Keep::First) {
        Ok(reduced) => {
            let target = identity(dim).unscale(dim as f64);
            (reduced - target).iter().map(|z| z.norm()).fold(0.0, f64::max)
        }
        Err(_) => f64::INFINITY,
    }
}

/// Choi state of the channel `ρ ↦ Σ K ρ K†`, built by column-stacking each
/// Kraus operator: `J = Σ |K⟩⟩⟨⟨K|`.
pub fn choi_of_channel(kraus_ops: &[CMatrix]) -> Result<ChoiState> {
    let first = kraus_ops
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty Kraus set".into()))?;
    let d = first.nrows();
    let mut completeness = CMatrix::zeros(d, d);
    for k in kraus_ops {
        check_square(k, d)?;
        completeness += k.adjoint() * k;
    }
    let dev = (completeness - identity(d))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if dev > TP_TOL {
        return Err(Error::NotTracePreserving(dev));
    }
    let n = d * d;
    let mut j = CMatrix::zeros(n, n);
    for k in kraus_ops {
        let v = nalgebra::DVector::from_fn(n, |idx, _| k[(idx % d, idx / d)]);
        j += &v * v.adjoint();
    }
    ChoiState::new(j.unscale(d as f64), d)
}

/// Composite effect `P ⊗ E` with `P = D·ρᵀ`, so that
/// `Tr[E Λ(ρ)] = ⟨⟨P ⊗ E | J(Λ)/D⟩⟩`.
pub fn process_effect(prep: &DensityOperator, meas: &Effect) -> Result<Effect> {
    if prep.dim() != meas.dim() {
        return Err(Error::DimensionMismatch {
            expected: prep.dim(),
            found: meas.dim(),
        });
    }
    let d = prep.dim() as f64;
    let p = prep.matrix().transpose().scale(d);
    Effect::with_bound(kron(&p, meas.matrix()), d * meas.bound())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn assert_orthonormal(basis: &OperatorBasis) {
        for (a, ba) in basis.elements().iter().enumerate() {
            assert!(hermitian_deviation(ba) < 1e-14);
            for (b, bb) in basis.elements().iter().enumerate() {
                let ip = hs_inner(ba, bb).unwrap();
                let expected = if a == b { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(ip.re, expected, epsilon = 1e-12);
                assert_abs_diff_eq!(ip.im, 0.0, epsilon = 1e-12);
            }
            if a > 0 {
                assert!(trace(ba).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn pauli_basis_is_orthonormal_with_identity_first() {
        for n in 1..=3 {
            let b = pauli_basis(n).unwrap();
            assert_eq!(b.len(), 4usize.pow(n as u32));
            assert_orthonormal(&b);
            let d = b.dim() as f64;
            assert!(max_abs(&(&b.elements()[0] - identity(b.dim()).unscale(d.sqrt()))) < 1e-15);
        }
        assert_eq!(pauli_basis(2).unwrap().labels()[0], "II");
        assert!(pauli_basis(0).is_err());
    }

    #[test]
    fn vectorize_identity_plus_x() {
        let b = pauli_basis(1).unwrap();
        let op = (identity(2) + pauli(1)).unscale(2.0);
        let v = vectorize(&op, &b).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (x, e) in v.coords().iter().zip([s, s, 0.0, 0.0]) {
            assert_abs_diff_eq!(*x, e, epsilon = 1e-8);
        }
    }

    #[test]
    fn devectorize_to_ground_state() {
        let b = pauli_basis(1).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = VectorizedOperator::from_coords(vec![s, 0.0, 0.0, s], b).unwrap();
        let m = v.devectorize();
        let expected = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
        assert!(max_abs(&(m - expected)) < 1e-12);
    }

    #[test]
    fn zero_vector_round_trips() {
        let b = gell_mann_basis(3).unwrap();
        let v = vectorize(&CMatrix::zeros(3, 3), &b).unwrap();
        assert!(v.coords().iter().all(|&x| x == 0.0));
        assert!(max_abs(&v.devectorize()) == 0.0);
    }

    #[test]
    fn gell_mann_matches_pauli_for_qubits() {
        let gm = gell_mann_basis(2).unwrap();
        let pb = pauli_basis(1).unwrap();
        assert_orthonormal(&gm);
        // Same elements, same order: I, X, Y, Z.
        for (a, b) in gm.elements().iter().zip(pb.elements()) {
            assert!(max_abs(&(a - b)) < 1e-15);
        }
    }

    #[test]
    fn gell_mann_qutrit() {
        let gm = gell_mann_basis(3).unwrap();
        assert_eq!(gm.len(), 9);
        assert_orthonormal(&gm);
        let v = vectorize(&identity(3).unscale(3.0), &gm).unwrap();
        assert_abs_diff_eq!(v.coords()[0], 1.0 / 3f64.sqrt(), epsilon = 1e-14);
        assert!(v.coords()[1..].iter().all(|x| x.abs() < 1e-15));
        assert!(gell_mann_basis(1).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let b = pauli_basis(1).unwrap();
        assert!(matches!(
            vectorize(&identity(3), &b),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(VectorizedOperator::from_coords(vec![0.0; 3], b).is_err());
        assert!(hs_inner(&identity(2), &identity(3)).is_err());
    }

    #[test]
    fn hs_inner_examples() {
        assert_abs_diff_eq!(hs_inner(&identity(3), &identity(3)).unwrap().re, 3.0);
        assert_abs_diff_eq!(hs_inner(&pauli(1), &pauli(3)).unwrap().norm(), 0.0);
    }

    #[test]
    fn partial_trace_examples() {
        let rho = DensityOperator::from_diagonal(&[0.3, 0.7]).unwrap();
        let sigma = (identity(3) + identity(3)).unscale(1.0);
        let joint = kron(rho.matrix(), &sigma);
        let reduced = partial_trace(&joint, (2, 3), Keep::First).unwrap();
        assert!(max_abs(&(reduced - rho.matrix().scale(6.0))) < 1e-14);

        let mixed = identity(4).unscale(4.0);
        let second = partial_trace(&mixed, (2, 2), Keep::Second).unwrap();
        assert!(max_abs(&(second - identity(2).unscale(2.0))) < 1e-15);
        assert!(partial_trace(&mixed, (3, 2), Keep::First).is_err());
    }

    #[test]
    fn density_validation() {
        assert!(DensityOperator::from_diagonal(&[0.5, 0.5]).is_ok());
        assert!(DensityOperator::from_diagonal(&[1.2, -0.2]).is_err());
        assert!(DensityOperator::from_diagonal(&[0.5, 0.4]).is_err());
        let mut m = identity(2).unscale(2.0);
        m[(0, 1)] = c(0.1);
        assert!(DensityOperator::new(m).is_err());
    }

    #[test]
    fn identity_channel_choi_is_bell_state() {
        let j = choi_of_channel(&[identity(2)]).unwrap();
        let h = 0.5;
        let mut expected = CMatrix::zeros(4, 4);
        for &(r, col) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
            expected[(r, col)] = c(h);
        }
        assert!(max_abs(&(j.matrix() - expected)) < 1e-15);
    }

    #[test]
    fn depolarizing_channel_choi_is_maximally_mixed() {
        let kraus: Vec<CMatrix> = (0..4).map(|i| pauli(i).unscale(2.0)).collect();
        let j = choi_of_channel(&kraus).unwrap();
        assert!(max_abs(&(j.matrix() - identity(4).unscale(4.0))) < 1e-15);
    }

    #[test]
    fn hadamard_mixture_choi() {
        let kraus = vec![identity(2).scale(0.7f64.sqrt()), hadamard().scale(0.3f64.sqrt())];
        let j = choi_of_channel(&kraus).unwrap();
        let spec = hermitian_eigenvalues(j.matrix());
        let rank = spec.iter().filter(|&&l| l > 1e-10).count();
        assert_eq!(rank, 2);
        assert!(tp_deviation(j.matrix(), 2) < 1e-12);
    }

    #[test]
    fn non_trace_preserving_kraus_rejected() {
        let err = choi_of_channel(&[identity(2).scale(0.9)]).unwrap_err();
        assert!(matches!(err, Error::NotTracePreserving(_)));
    }

    fn ket(re: &[f64]) -> Vec<Complex64> {
        re.iter().map(|&x| c(x)).collect()
    }

    #[test]
    fn process_effect_examples() {
        let zero = DensityOperator::pure(&ket(&[1.0, 0.0]));
        let meas0 = Effect::projector(&ket(&[1.0, 0.0]));
        let plus = Effect::projector(&ket(&[1.0, 1.0]));

        let id = choi_of_channel(&[identity(2)]).unwrap();
        let e = process_effect(&zero, &meas0).unwrap();
        assert_abs_diff_eq!(hs_inner(e.matrix(), id.matrix()).unwrap().re, 1.0, epsilon = 1e-14);

        let dep = ChoiState::depolarizing(2);
        let e = process_effect(&zero, &plus).unwrap();
        assert_abs_diff_eq!(hs_inner(e.matrix(), dep.matrix()).unwrap().re, 0.5, epsilon = 1e-14);

        let kraus = vec![identity(2).scale(0.7f64.sqrt()), hadamard().scale(0.3f64.sqrt())];
        let had = choi_of_channel(&kraus).unwrap();
        // Direct evaluation: Tr[E Λ(ρ)] = 0.7·½ + 0.3·1.
        let direct = hs_inner(plus.matrix(), &had.apply(zero.matrix()).unwrap()).unwrap().re;
        assert_abs_diff_eq!(direct, 0.65, epsilon = 1e-14);
        let e = process_effect(&zero, &plus).unwrap();
        assert_abs_diff_eq!(hs_inner(e.matrix(), had.matrix()).unwrap().re, 0.65, epsilon = 1e-14);
        assert_abs_diff_eq!(e.bound(), 2.0);
    }

    #[test]
    fn effect_validation() {
        assert!(Effect::new(identity(2).scale(1.1)).is_err());
        assert!(Effect::new(pauli(3)).is_err());
        let e = Effect::new((identity(2) + pauli(3)).unscale(2.0)).unwrap();
        let comp = e.complement().unwrap();
        assert!(max_abs(&(comp.matrix() + e.matrix() - identity(2))) < 1e-15);
    }

    #[test]
    fn hermitian_function_inverse_sqrt() {
        let m = CMatrix::from_row_slice(2, 2, &[c(2.0), Complex64::new(0.5, 0.5), Complex64::new(0.5, -0.5), c(1.0)]);
        let inv_sqrt = hermitian_function(&m, |l| l.powf(-0.5));
        let back = &inv_sqrt * &m * &inv_sqrt;
        assert!(max_abs(&(back - identity(2))) < 1e-12);
    }
}
