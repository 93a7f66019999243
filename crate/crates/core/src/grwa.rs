//! Expansion in the B± displaced basis and the approximations built on it.
//!
//! After a spin rotation the Hamiltonian reads
//!
//! ```text
//! H₂ = ( a†a + α(a† + a)          −Δ/2 − γ(a† − a) )
//!      ( −Δ/2 + γ(a† − a)         a†a − α(a† + a)  )
//! ```
//!
//! with α = (g1 + g2)/2 and γ = (g1 − g2)/2. States of fixed parity are
//! expanded as `(Σ √n! c_n |n⟩_{B+}, ±Σ √n! (−1)ⁿ c_n |n⟩_{B−})` and projecting
//! on `|m⟩_{B+}` gives
//!
//! ```text
//! (m − α² − E) c_m ∓ (−1)^m Σ_n R_{m,n} c_n = 0
//! ```
//!
//! with the upper sign for even parity. Keeping only the diagonal gives the
//! adiabatic levels, keeping the 2×2 block that couples manifolds m and m + 1
//! gives the GRWA levels, and keeping `n_tr + 1` terms gives the truncated
//! problem, which converges to the exact spectrum.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, Parity};

/// Generalized Laguerre polynomial L_n^(k)(y) by upward recurrence in n.
pub fn laguerre(n: usize, k: usize, y: f64) -> f64 {
    let k = k as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + k - y;
    for j in 1..n {
        let j = j as f64;
        let next = ((2.0 * j + 1.0 + k - y) * cur - (j + k) * prev) / (j + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// D_{m,n} = ⟨m|_{B+} √(n!/m!) (−1)^{n−m} |n⟩_{B−}.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix {
    pub alpha: f64,
    pub size: usize,
    pub d: DMatrix<f64>,
}

impl OverlapMatrix {
    /// Entry with the convention D = 0 at negative indices.
    pub fn get(&self, m: isize, n: isize) -> f64 {
        if m < 0 || n < 0 {
            return 0.0;
        }
        self.d[(m as usize, n as usize)]
    }
}

/// Single overlap element from the two Laguerre closed forms.
pub fn overlap_element(alpha: f64, m: usize, n: usize) -> f64 {
    let y = 4.0 * alpha * alpha;
    let damp = (-2.0 * alpha * alpha).exp();
    if m <= n {
        (2.0 * alpha).powi((n - m) as i32) * damp * laguerre(m, n - m, y)
    } else {
        // n!/m! (−2α)^{m−n} accumulated factor by factor.
        let prefactor = (n + 1..=m).fold(1.0, |acc, j| acc * (-2.0 * alpha) / j as f64);
        prefactor * damp * laguerre(n, m - n, y)
    }
}

pub fn overlap_matrix(alpha: f64, size: usize) -> OverlapMatrix {
    let size = size.max(1);
    OverlapMatrix {
        alpha,
        size,
        d: DMatrix::from_fn(size, size, |m, n| overlap_element(alpha, m, n)),
    }
}

/// R_{m,n} = (Δ/2) D_{m,n} − γ (D_{m,n+1} − n D_{m,n−1}).
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    pub params: ModelParams,
    pub size: usize,
    pub r: DMatrix<f64>,
}

pub fn coupling_matrix(params: &ModelParams, size: usize) -> CouplingMatrix {
    let size = size.max(1);
    let d = params.derive();
    let overlap = overlap_matrix(d.alpha, size + 1);
    let half_delta = 0.5 * params.delta;
    let r = DMatrix::from_fn(size, size, |m, n| {
        let (mi, ni) = (m as isize, n as isize);
        half_delta * overlap.get(mi, ni) - d.gamma * (overlap.get(mi, ni + 1) - n as f64 * overlap.get(mi, ni - 1))
    });
    CouplingMatrix {
        params: *params,
        size,
        r,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ApproxMethod {
    Adiabatic,
    Grwa,
    Truncated(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxLevel {
    /// Manifold index for the closed forms, level index for the truncated solver.
    pub m: usize,
    pub branch: Option<Branch>,
    pub method: ApproxMethod,
    pub energy: f64,
    pub parity: Parity,
    /// c_n of the truncated expansion, unit Euclidean norm.
    pub coefficients: Option<Vec<f64>>,
}

/// Sorted energies of one parity sector.
pub fn sector_energies(levels: &[ApproxLevel], parity: Parity) -> Vec<f64> {
    let mut e: Vec<f64> = levels.iter().filter(|l| l.parity == parity).map(|l| l.energy).collect();
    e.sort_by(f64::total_cmp);
    e
}

fn alternating(m: usize) -> f64 {
    if m % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Zero-order levels E = m − α² ∓ (−1)^m R_{m,m}, two per manifold.
pub fn adiabatic_levels(params: &ModelParams, m_max: usize) -> Vec<ApproxLevel> {
    let alpha = params.derive().alpha;
    let coupling = coupling_matrix(params, m_max + 1);
    let mut out = Vec::with_capacity(2 * (m_max + 1));
    for m in 0..=m_max {
        let shift = alternating(m) * coupling.r[(m, m)];
        let even = m as f64 - alpha * alpha - shift;
        let odd = m as f64 - alpha * alpha + shift;
        let (even_branch, odd_branch) = if even <= odd {
            (Branch::Lower, Branch::Upper)
        } else {
            (Branch::Upper, Branch::Lower)
        };
        for (parity, energy, branch) in [(Parity::Even, even, even_branch), (Parity::Odd, odd, odd_branch)] {
            out.push(ApproxLevel {
                m,
                branch: Some(branch),
                method: ApproxMethod::Adiabatic,
                energy,
                parity,
                coefficients: None,
            });
        }
    }
    out
}

/// Parity sector described by the GRWA block starting at manifold m: the
/// block pairs the upper level of manifold m with the lower level of m + 1,
/// which is the odd sector for even m and the even sector for odd m.
pub fn grwa_block_parity(m: usize) -> Parity {
    if m % 2 == 0 {
        Parity::Odd
    } else {
        Parity::Even
    }
}

fn block_energies(alpha: f64, r: &DMatrix<f64>, m: usize) -> Result<[f64; 2]> {
    let (r00, r11) = (r[(m, m)], r[(m + 1, m + 1)]);
    let (r01, r10) = (r[(m, m + 1)], r[(m + 1, m)]);
    let disc = (1.0 - (r00 + r11)).powi(2) - 4.0 * r01 * r10;
    if disc < 0.0 {
        return Err(Error::ComplexBlock { m, discriminant: disc });
    }
    let centre = m as f64 + 0.5 - alpha * alpha + 0.5 * (r00 - r11);
    let half_width = 0.5 * disc.sqrt();
    Ok([centre - half_width, centre + half_width])
}

/// Both roots of the 2×2 GRWA determinant for the block starting at m,
/// lower root first.
pub fn grwa_block(params: &ModelParams, m: usize) -> Result<[f64; 2]> {
    let coupling = coupling_matrix(params, m + 2);
    block_energies(params.derive().alpha, &coupling.r, m)
}

/// The m = 0 block written out with R_{0,0}, R_{1,1}, R_{0,1}, R_{1,0}.
/// Under the parity convention used here (|0,↓⟩ even) these two levels
/// belong to the odd sector; see [`grwa_block_parity`].
pub fn grwa_lowest_block(params: &ModelParams) -> Result<[f64; 2]> {
    let alpha = params.derive().alpha;
    let r = coupling_matrix(params, 2).r;
    let disc = (1.0 - (r[(0, 0)] + r[(1, 1)])).powi(2) - 4.0 * r[(0, 1)] * r[(1, 0)];
    if disc < 0.0 {
        return Err(Error::ComplexBlock { m: 0, discriminant: disc });
    }
    let base = 0.5 - alpha * alpha + 0.5 * (r[(0, 0)] - r[(1, 1)]);
    Ok([base - 0.5 * disc.sqrt(), base + 0.5 * disc.sqrt()])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrwaSpectrum {
    pub levels: Vec<ApproxLevel>,
    /// Blocks with a negative discriminant, as (m, discriminant).
    pub complex_blocks: Vec<(usize, f64)>,
}

impl GrwaSpectrum {
    pub fn sector(&self, parity: Parity) -> Vec<f64> {
        sector_energies(&self.levels, parity)
    }
}

/// First-order levels: the blocks m = 0..=m_max plus the unpaired lowest
/// level of the even sector, E = −α² − R_{0,0}.
pub fn grwa_levels(params: &ModelParams, m_max: usize) -> GrwaSpectrum {
    let alpha = params.derive().alpha;
    let coupling = coupling_matrix(params, m_max + 2);
    let mut levels = vec![ApproxLevel {
        m: 0,
        branch: Some(Branch::Lower),
        method: ApproxMethod::Grwa,
        energy: -alpha * alpha - coupling.r[(0, 0)],
        parity: Parity::Even,
        coefficients: None,
    }];
    let mut complex_blocks = Vec::new();
    for m in 0..=m_max {
        match block_energies(alpha, &coupling.r, m) {
            Ok([lo, hi]) => {
                for (energy, branch) in [(lo, Branch::Lower), (hi, Branch::Upper)] {
                    levels.push(ApproxLevel {
                        m,
                        branch: Some(branch),
                        method: ApproxMethod::Grwa,
                        energy,
                        parity: grwa_block_parity(m),
                        coefficients: None,
                    });
                }
            }
            Err(Error::ComplexBlock { m, discriminant }) => complex_blocks.push((m, discriminant)),
            Err(_) => unreachable!(),
        }
    }
    GrwaSpectrum { levels, complex_blocks }
}

/// Largest imaginary part tolerated in the truncated spectrum.
pub const IMAG_TOL: f64 = 1e-10;

/// Matrix of the truncated problem, E c = M c.
pub fn truncated_matrix(params: &ModelParams, parity: Parity, n_tr: usize) -> DMatrix<f64> {
    let size = n_tr + 1;
    let alpha = params.derive().alpha;
    let coupling = coupling_matrix(params, size);
    let s = parity.sign();
    DMatrix::from_fn(size, size, |m, n| {
        let diag = if m == n { m as f64 - alpha * alpha } else { 0.0 };
        diag - s * alternating(m) * coupling.r[(m, n)]
    })
}

/// All eigenvalues of the (n_tr + 1)-term problem for one parity, ascending,
/// with their coefficient vectors.
pub fn truncated_solve(params: &ModelParams, parity: Parity, n_tr: usize) -> Result<Vec<ApproxLevel>> {
    let matrix = truncated_matrix(params, parity, n_tr);
    let size = matrix.nrows();

    // The c_n carry √n! weights, so the matrix spans many orders of magnitude.
    let mut balanced = matrix.clone();
    let scale = nalgebra::linalg::balancing::balance_parlett_reinsch(&mut balanced);

    let schur = nalgebra::linalg::Schur::try_new(balanced.clone(), f64::EPSILON, 100_000)
        .ok_or(Error::NonRealSpectrum { imag: f64::NAN })?;
    let eigen = schur.complex_eigenvalues();
    let worst = eigen.iter().fold(0.0f64, |acc, z| acc.max(z.im.abs()));
    if worst > IMAG_TOL {
        return Err(Error::NonRealSpectrum { imag: worst });
    }
    let mut energies: Vec<f64> = eigen.iter().map(|z| z.re).collect();
    energies.sort_by(f64::total_cmp);

    let mut out = Vec::with_capacity(size);
    for (index, &energy) in energies.iter().enumerate() {
        let y = null_vector(&balanced, energy);
        let mut c: DVector<f64> = y.component_mul(&scale);
        let norm = c.norm();
        if norm > 0.0 {
            c /= norm;
        }
        let pivot = c.iter().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { *v } else { acc });
        if pivot < 0.0 {
            c.neg_mut();
        }
        out.push(ApproxLevel {
            m: index,
            branch: None,
            method: ApproxMethod::Truncated(n_tr),
            energy,
            parity,
            coefficients: Some(c.iter().copied().collect()),
        });
    }
    Ok(out)
}

/// Right singular vector of the smallest singular value of (A − λI).
fn null_vector(a: &DMatrix<f64>, lambda: f64) -> DVector<f64> {
    let n = a.nrows();
    let shifted = a - DMatrix::<f64>::identity(n, n) * lambda;
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, s)| if *s < best.1 { (i, *s) } else { best });
    v_t.row(idx).transpose()
}
