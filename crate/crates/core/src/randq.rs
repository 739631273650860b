//! Seedable samplers for the default priors on states and channels.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::qobj::{
    hermitian_eigen, identity, kron, partial_trace, trace, CMatrix, ChoiState, DensityOperator, Keep,
};

/// Eigenvalue floor below which a BCSZ partial trace counts as singular.
pub const BCSZ_EIGEN_FLOOR: f64 = 1e-12;
/// Resampling attempts before a BCSZ draw gives up.
pub const BCSZ_MAX_RETRIES: usize = 100;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha20, whose stream parameter gives independent sequences for
/// the same key; [`RngStream::fork`] derives child streams deterministically so
/// parallel work can draw from its own stream regardless of scheduling.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Child stream keyed by this stream's identity and `label`; independent
    /// of how many values have been drawn from `self`.
    pub fn fork(&self, label: u64) -> RngStream {
        let key = splitmix64(self.seed ^ splitmix64(self.stream_id.wrapping_add(0xA076_1D64_78BD_642F)));
        RngStream::new(key, label)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Parameters of a Ginibre-induced state ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GinibreSpec {
    pub dim: usize,
    pub rank: usize,
    pub real_valued: bool,
}

impl GinibreSpec {
    pub fn new(dim: usize, rank: usize, real_valued: bool) -> Result<Self> {
        if dim == 0 || rank == 0 || rank > dim {
            return Err(Error::InvalidParameter(format!(
                "Ginibre rank must satisfy 1 <= rank <= dim, got rank {rank}, dim {dim}"
            )));
        }
        Ok(Self {
            dim,
            rank,
            real_valued,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DensityOperator {
        let a = if self.real_valued {
            real_ginibre_matrix(self.dim, self.rank, rng)
        } else {
            ginibre_matrix(self.dim, self.rank, rng)
        };
        normalized_gram(&a)
    }
}

/// `D×K` matrix with i.i.d. `N(0,1) + i·N(0,1)` entries.
pub fn ginibre_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    })
}

/// `D×K` matrix with i.i.d. real `N(0,1)` entries.
pub fn real_ginibre_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.sample(StandardNormal), 0.0))
}

/// `AA†/Tr(AA†)`, symmetrized against rounding.
fn normalized_gram(a: &CMatrix) -> DensityOperator {
    let g = a * a.adjoint();
    let tr = trace(&g).re;
    let g = (&g + g.adjoint()).unscale(2.0 * tr);
    DensityOperator::new_unchecked(g)
}

/// Haar-random unitary: QR of a Ginibre matrix with the phases of `diag(R)`
/// folded back into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let z = ginibre_matrix(dim, dim, rng);
    let qr = z.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = DVector::from_fn(dim, |i, _| {
        let rii = r[(i, i)];
        let n = rii.norm();
        if n > 0.0 {
            rii / n
        } else {
            Complex64::new(1.0, 0.0)
        }
    });
    q * CMatrix::from_diagonal(&phases)
}

pub fn ginibre_state<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> Result<DensityOperator> {
    Ok(GinibreSpec::new(dim, rank, false)?.sample(rng))
}

/// Real-Ginibre rebit state; its Pauli-Y coordinate is identically zero.
pub fn ginibre_rebit_state<R: Rng + ?Sized>(rank: usize, rng: &mut R) -> Result<DensityOperator> {
    Ok(GinibreSpec::new(2, rank, true)?.sample(rng))
}

/// Bures-measure state `(𝟙+U)AA†(𝟙+U†)/Tr(·)` with `U` Haar and `A` square Ginibre.
pub fn bures_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityOperator {
    let a = ginibre_matrix(dim, dim, rng);
    let u = haar_unitary(dim, rng);
    let b = (identity(dim) + u) * a;
    normalized_gram(&b)
}

/// BCSZ random channel of Kraus rank `K`, returned as the Choi state `J(Λ)/D`.
///
/// With `ρ = XX†` on input ⊗ output and `Y = Tr_out ρ`, the rescaled operator
/// `(Y^{-1/2} ⊗ 𝟙) ρ (Y^{-1/2} ⊗ 𝟙)` has output partial trace `𝟙`, which is the
/// trace-preservation condition for the input-first Choi convention.
pub fn bcsz_channel<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> Result<ChoiState> {
    let n = dim * dim;
    if dim == 0 || rank == 0 || rank > n {
        return Err(Error::InvalidParameter(format!(
            "BCSZ Kraus rank must satisfy 1 <= rank <= D², got rank {rank}, D {dim}"
        )));
    }
    for _ in 0..BCSZ_MAX_RETRIES {
        let x = ginibre_matrix(n, rank, rng);
        let rho = &x * x.adjoint();
        let y = partial_trace(&rho, (dim, dim), Keep::First)?;
        let (values, vectors) = hermitian_eigen(&y);
        if values[0] < BCSZ_EIGEN_FLOOR {
            continue;
        }
        let mut scaled = vectors.clone();
        for (c, &v) in values.iter().enumerate() {
            scaled.column_mut(c).scale_mut(v.powf(-0.5));
        }
        let y_inv_sqrt = scaled * vectors.adjoint();
        let lift = kron(&y_inv_sqrt, &identity(dim));
        let j = &lift * rho * &lift;
        let j = (&j + j.adjoint()).unscale(2.0 * dim as f64);
        return Ok(ChoiState::new_unchecked(j, dim));
    }
    Err(Error::SingularSample(BCSZ_MAX_RETRIES))
}
