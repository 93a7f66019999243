//! Reference spectra from dense diagonalization in a truncated Fock basis.
//!
//! Basis states are |n⟩ ⊗ |↑/↓⟩ with index `2n` for ↑ and `2n + 1` for ↓.
//! The parity Π = −σz (−1)^{a†a} is diagonal in this basis and commutes with
//! H, so the matrix splits into two blocks; [`spectrum`] diagonalizes them
//! separately, which makes every label exact.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, Parity};

/// Purity below which an eigenvector is treated as a parity mixture.
pub const MIX_THRESHOLD: f64 = 1e-6;

fn up(n: usize) -> usize {
    2 * n
}

fn down(n: usize) -> usize {
    2 * n + 1
}

/// Dimension 2(N + 1) matrix of H for photon numbers 0..=N.
pub fn build_hamiltonian(params: &ModelParams, fock_cutoff: usize) -> Result<DMatrix<f64>> {
    if fock_cutoff < 1 {
        return Err(Error::InvalidParameter("Fock cutoff must be at least 1".into()));
    }
    let dim = 2 * (fock_cutoff + 1);
    let half = 0.5 * params.delta;
    let mut h = DMatrix::zeros(dim, dim);
    for n in 0..=fock_cutoff {
        h[(up(n), up(n))] = n as f64 + half;
        h[(down(n), down(n))] = n as f64 - half;
        if n < fock_cutoff {
            let amp = ((n + 1) as f64).sqrt();
            // g1 (a†σ− + aσ+): |n,↑⟩ ↔ |n+1,↓⟩
            h[(up(n), down(n + 1))] = params.g1 * amp;
            h[(down(n + 1), up(n))] = params.g1 * amp;
            // g2 (a†σ+ + aσ−): |n,↓⟩ ↔ |n+1,↑⟩
            h[(down(n), up(n + 1))] = params.g2 * amp;
            h[(up(n + 1), down(n))] = params.g2 * amp;
        }
    }
    Ok(h)
}

/// Diagonal of Π in the product basis.
pub fn parity_diagonal(fock_cutoff: usize) -> Vec<f64> {
    let mut diag = Vec::with_capacity(2 * (fock_cutoff + 1));
    for n in 0..=fock_cutoff {
        let boson = if n % 2 == 0 { 1.0 } else { -1.0 };
        diag.push(-boson);
        diag.push(boson);
    }
    diag
}

/// Ascending eigenvalues with eigenvectors as matching columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn diagonalize(matrix: &DMatrix<f64>) -> Result<Eigensystem> {
    if !matrix.is_square() {
        return Err(Error::InvalidParameter("matrix is not square".into()));
    }
    let scale = matrix.amax().max(1.0);
    let asymmetry = (matrix - matrix.transpose()).amax();
    if asymmetry > 1e-12 * scale {
        return Err(Error::NonSymmetricInput { asymmetry });
    }
    let eig = SymmetricEigen::new(matrix.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(matrix.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Eigensystem { values, vectors })
}

/// ⟨Π⟩ of a state; slice length must be 2(N + 1).
pub fn parity_expectation(vector: &[f64]) -> f64 {
    let cutoff = vector.len() / 2 - 1;
    let diag = parity_diagonal(cutoff);
    let norm: f64 = vector.iter().map(|v| v * v).sum();
    vector.iter().zip(&diag).map(|(v, p)| v * v * p).sum::<f64>() / norm
}

/// Sector and purity |⟨Π⟩| of an eigenvector.
pub fn classify_parity(vector: &[f64]) -> Result<(Parity, f64)> {
    let expectation = parity_expectation(vector);
    let purity = expectation.abs();
    if purity < 1.0 - MIX_THRESHOLD {
        return Err(Error::DegenerateMix { purity });
    }
    let sector = if expectation > 0.0 { Parity::Even } else { Parity::Odd };
    Ok((sector, purity))
}

/// Rotates every cluster of eigenvalues closer than `tol` into eigenvectors
/// of Π restricted to the cluster, so each column has a definite parity.
pub fn resolve_degenerate(system: &mut Eigensystem, tol: f64) {
    let cutoff = system.vectors.nrows() / 2 - 1;
    let pdiag = nalgebra::DVector::from_vec(parity_diagonal(cutoff));
    let n = system.values.len();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && system.values[end] - system.values[end - 1] < tol {
            end += 1;
        }
        if end - start > 1 {
            let block = system.vectors.columns(start, end - start).into_owned();
            let weighted = DMatrix::from_fn(block.nrows(), block.ncols(), |r, c| block[(r, c)] * pdiag[r]);
            let projected = block.transpose() * weighted;
            let rot = SymmetricEigen::new(projected).eigenvectors;
            let rotated = block * rot;
            system.vectors.columns_mut(start, end - start).copy_from(&rotated);
        }
        start = end;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub fock_cutoff: usize,
    pub eigenvalues: Vec<f64>,
    pub parities: Vec<Parity>,
    pub parity_purity: Vec<f64>,
    /// Levels per sector that moved less than the tolerance in the final
    /// cutoff doubling (minimum over the two sectors).
    pub converged_count: usize,
}

impl OracleResult {
    /// Ascending energies of one sector.
    pub fn sector(&self, parity: Parity) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .zip(&self.parities)
            .filter(|(_, p)| **p == parity)
            .map(|(e, _)| *e)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    /// First cutoff tried.
    pub start_cutoff: usize,
    pub cutoff_cap: usize,
    /// Convergence target for the cutoff doubling.
    pub tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            start_cutoff: 32,
            cutoff_cap: 1024,
            tol: 1e-10,
        }
    }
}

/// Basis indices of one parity sector in ascending photon number.
fn sector_indices(fock_cutoff: usize, parity: Parity) -> Vec<usize> {
    parity_diagonal(fock_cutoff)
        .iter()
        .enumerate()
        .filter(|(_, p)| (**p > 0.0) == (parity == Parity::Even))
        .map(|(i, _)| i)
        .collect()
}

fn sector_block(h: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| h[(idx[r], idx[c])])
}

/// Eigenvalues of one sector at a fixed cutoff.
pub fn sector_eigenvalues(params: &ModelParams, fock_cutoff: usize, parity: Parity) -> Result<Vec<f64>> {
    let h = build_hamiltonian(params, fock_cutoff)?;
    let block = sector_block(&h, &sector_indices(fock_cutoff, parity));
    let mut values: Vec<f64> = block.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Full labeled spectrum at a fixed cutoff from the two parity blocks.
pub fn spectrum_at_cutoff(params: &ModelParams, fock_cutoff: usize) -> Result<OracleResult> {
    let h = build_hamiltonian(params, fock_cutoff)?;
    let dim = h.nrows();
    let mut entries: Vec<(f64, Parity, f64)> = Vec::with_capacity(dim);
    for parity in Parity::BOTH {
        let idx = sector_indices(fock_cutoff, parity);
        let system = diagonalize(&sector_block(&h, &idx))?;
        for (k, &value) in system.values.iter().enumerate() {
            let mut full = vec![0.0; dim];
            for (r, &i) in idx.iter().enumerate() {
                full[i] = system.vectors[(r, k)];
            }
            let (label, purity) = classify_parity(&full)?;
            debug_assert_eq!(label, parity);
            entries.push((value, label, purity));
        }
    }
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(OracleResult {
        fock_cutoff,
        eigenvalues: entries.iter().map(|e| e.0).collect(),
        parities: entries.iter().map(|e| e.1).collect(),
        parity_purity: entries.iter().map(|e| e.2).collect(),
        converged_count: 0,
    })
}

/// Same as [`spectrum_at_cutoff`] but from the undivided matrix, resolving
/// degenerate pairs into parity eigenstates before labeling.
pub fn spectrum_full_matrix(params: &ModelParams, fock_cutoff: usize, degeneracy_tol: f64) -> Result<OracleResult> {
    let h = build_hamiltonian(params, fock_cutoff)?;
    let mut system = diagonalize(&h)?;
    resolve_degenerate(&mut system, degeneracy_tol);
    let mut parities = Vec::with_capacity(system.values.len());
    let mut purity = Vec::with_capacity(system.values.len());
    for col in system.vectors.column_iter() {
        let v: Vec<f64> = col.iter().copied().collect();
        let (p, q) = classify_parity(&v)?;
        parities.push(p);
        purity.push(q);
    }
    Ok(OracleResult {
        fock_cutoff,
        eigenvalues: system.values,
        parities,
        parity_purity: purity,
        converged_count: 0,
    })
}

fn stable_prefix(a: &[f64], b: &[f64], tol: f64) -> usize {
    a.iter().zip(b).take_while(|(x, y)| (*x - *y).abs() < tol).count()
}

/// Lowest levels converged under cutoff doubling: the cutoff doubles until
/// the lowest `n_levels` of each sector move by less than `opts.tol`.
pub fn spectrum(params: &ModelParams, n_levels: usize, opts: &OracleOptions) -> Result<OracleResult> {
    let mut cutoff = opts.start_cutoff.max(n_levels + 4).max(1);
    if cutoff > opts.cutoff_cap {
        return Err(Error::CutoffExceeded {
            cap: opts.cutoff_cap,
            converged: 0,
            requested: n_levels,
        });
    }
    let mut previous = spectrum_at_cutoff(params, cutoff)?;
    loop {
        let next_cutoff = 2 * cutoff;
        if next_cutoff > opts.cutoff_cap {
            return Err(Error::CutoffExceeded {
                cap: opts.cutoff_cap,
                converged: previous.converged_count,
                requested: n_levels,
            });
        }
        let mut current = spectrum_at_cutoff(params, next_cutoff)?;
        current.converged_count = Parity::BOTH
            .iter()
            .map(|&p| stable_prefix(&previous.sector(p), &current.sector(p), opts.tol))
            .min()
            .unwrap_or(0);
        if current.converged_count >= n_levels {
            return Ok(current);
        }
        previous = current;
        cutoff = next_cutoff;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncoupled_matrix_is_diagonal() {
        let p = ModelParams::new(0.7, 0.0, 0.0).unwrap();
        let h = build_hamiltonian(&p, 5).unwrap();
        assert_eq!(h.nrows(), 12);
        for r in 0..12 {
            for c in 0..12 {
                if r != c {
                    assert_eq!(h[(r, c)], 0.0);
                }
            }
        }
        let s = spectrum_at_cutoff(&p, 5).unwrap();
        let even = s.sector(Parity::Even);
        assert!((even[0] + 0.35).abs() < 1e-15);
        assert!((even[1] - 1.35).abs() < 1e-15);
        assert!((s.sector(Parity::Odd)[0] - 0.35).abs() < 1e-15);
    }

    #[test]
    fn parity_commutes_with_h() {
        let p = ModelParams::new(0.9, 0.8, 0.3).unwrap();
        let h = build_hamiltonian(&p, 12).unwrap();
        let pd = parity_diagonal(12);
        for r in 0..h.nrows() {
            for c in 0..h.ncols() {
                if pd[r] != pd[c] {
                    assert_eq!(h[(r, c)], 0.0);
                }
            }
        }
    }

    #[test]
    fn basis_state_parities() {
        let mut v = vec![0.0; 8];
        v[down(0)] = 1.0;
        assert_eq!(classify_parity(&v).unwrap(), (Parity::Even, 1.0));
        let mut v = vec![0.0; 8];
        v[down(1)] = 1.0;
        assert_eq!(classify_parity(&v).unwrap(), (Parity::Odd, 1.0));
        let mut v = vec![0.0; 8];
        v[down(0)] = 1.0;
        v[up(0)] = 1.0;
        assert!(matches!(classify_parity(&v), Err(Error::DegenerateMix { .. })));
    }

    #[test]
    fn diagonalize_small_cases() {
        let (a, b, c) = (1.0, 0.5, -2.0);
        let m = DMatrix::from_row_slice(2, 2, &[a, b, b, c]);
        let sys = diagonalize(&m).unwrap();
        let mean = 0.5 * (a + c);
        let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        assert!((sys.values[0] - (mean - rad)).abs() < 1e-14);
        assert!((sys.values[1] - (mean + rad)).abs() < 1e-14);

        let id = diagonalize(&DMatrix::identity(4, 4)).unwrap();
        assert!(id.values.iter().all(|v| (*v - 1.0).abs() < 1e-15));

        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.2, 1.0]);
        assert!(matches!(diagonalize(&bad), Err(Error::NonSymmetricInput { .. })));
    }

    #[test]
    fn random_symmetric_reconstruction() {
        // Deterministic pseudo-random fill (LCG).
        let mut state: u64 = 0x2545_f491_4f6c_dd1d;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let n = 50;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = next();
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        let sys = diagonalize(&m).unwrap();
        let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(sys.values.clone()));
        let rebuilt = &sys.vectors * lambda * sys.vectors.transpose();
        assert!((rebuilt - &m).amax() < 1e-10);
        for k in 0..n {
            let v = sys.vectors.column(k);
            let resid = (&m * v - v * sys.values[k]).norm();
            assert!(resid <= 1e-10 * m.norm());
        }
    }

    #[test]
    fn jaynes_cummings_pairs() {
        let (delta, g) = (0.7, 0.8);
        let p = ModelParams::new(delta, g, 0.0).unwrap();
        let s = spectrum(&p, 8, &OracleOptions::default()).unwrap();
        let mut expected = vec![-0.5 * delta];
        for n in 0..20 {
            let centre = n as f64 + 0.5;
            let rad = (0.25 * (delta - 1.0) * (delta - 1.0) + g * g * (n + 1) as f64).sqrt();
            expected.push(centre - rad);
            expected.push(centre + rad);
        }
        expected.sort_by(f64::total_cmp);
        for (k, e) in expected.iter().take(12).enumerate() {
            assert!((s.eigenvalues[k] - e).abs() < 1e-10, "level {k}: {} vs {e}", s.eigenvalues[k]);
        }
    }

    #[test]
    fn displaced_oscillator_degeneracy() {
        let g = 0.5;
        let p = ModelParams::new(0.0, g, g).unwrap();
        let s = spectrum(&p, 6, &OracleOptions::default()).unwrap();
        for parity in Parity::BOTH {
            for (m, e) in s.sector(parity).iter().take(6).enumerate() {
                assert!((e - (m as f64 - g * g)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cutoff_doubling_converges() {
        let p = ModelParams::new(0.7, 0.8, 0.6).unwrap();
        let s = spectrum(&p, 8, &OracleOptions::default()).unwrap();
        assert!(s.converged_count >= 8);
        assert!(s.fock_cutoff <= 200);
        assert_eq!(s.eigenvalues.len(), 2 * (s.fock_cutoff + 1));
        assert!(s.parity_purity.iter().all(|q| *q >= 1.0 - 1e-8));
        assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));

        let tight = OracleOptions {
            cutoff_cap: 40,
            ..OracleOptions::default()
        };
        let strong = ModelParams::new(0.7, 2.5, 2.0).unwrap();
        assert!(matches!(spectrum(&strong, 8, &tight), Err(Error::CutoffExceeded { .. })));
    }

    #[test]
    fn variational_monotonicity() {
        let p = ModelParams::new(0.5, 1.1, 0.7).unwrap();
        let mut previous: Option<Vec<f64>> = None;
        for cutoff in [8, 12, 16, 24, 32, 48] {
            let s = spectrum_at_cutoff(&p, cutoff).unwrap();
            let low: Vec<f64> = s.eigenvalues[..6].to_vec();
            if let Some(prev) = &previous {
                for (a, b) in prev.iter().zip(&low) {
                    assert!(*b <= *a + 1e-12);
                }
            }
            previous = Some(low);
        }
    }

    #[test]
    fn spin_flip_symmetry() {
        let p = ModelParams::new(0.8, 0.9, 0.4).unwrap();
        let a = spectrum_at_cutoff(&p, 60).unwrap();
        let b = spectrum_at_cutoff(&p.spin_flipped(), 60).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues).take(20) {
            assert!((x - y).abs() < 1e-8);
        }
        // the flip also exchanges the parity labels
        assert_eq!(a.sector(Parity::Even)[..5].len(), 5);
        for (x, y) in a.sector(Parity::Even).iter().zip(b.sector(Parity::Odd)).take(10) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn degenerate_pair_at_first_crossing_is_resolved() {
        let g1 = (0.7f64 / 0.75).sqrt();
        let p = ModelParams::with_ratio(0.7, g1, 0.5).unwrap();
        let h = build_hamiltonian(&p, 80).unwrap();
        let mut sys = diagonalize(&h).unwrap();
        let lambda_plus = p.derive().lambda_plus;
        assert!((sys.values[0] + lambda_plus).abs() < 1e-10);
        assert!((sys.values[1] + lambda_plus).abs() < 1e-10);
        resolve_degenerate(&mut sys, 1e-8);
        let labels: Vec<Parity> = (0..2)
            .map(|k| {
                let v: Vec<f64> = sys.vectors.column(k).iter().copied().collect();
                classify_parity(&v).unwrap().0
            })
            .collect();
        assert!(labels.contains(&Parity::Even) && labels.contains(&Parity::Odd));

        let full = spectrum_full_matrix(&p, 80, 1e-8).unwrap();
        assert!(full.parity_purity.iter().all(|q| *q > 1.0 - 1e-8));
    }

    #[test]
    fn degenerate_mix_detected_for_rotated_pair() {
        let g1 = (0.7f64 / 0.75).sqrt();
        let p = ModelParams::with_ratio(0.7, g1, 0.5).unwrap();
        let s_even = {
            let h = build_hamiltonian(&p, 60).unwrap();
            diagonalize(&h).unwrap()
        };
        // an equal mixture of the degenerate pair is an equally valid eigenvector
        let mut sys = s_even;
        resolve_degenerate(&mut sys, 1e-8);
        let a = sys.vectors.column(0).into_owned();
        let b = sys.vectors.column(1).into_owned();
        let mix: Vec<f64> = ((a + b) / 2f64.sqrt()).iter().copied().collect();
        assert!(matches!(classify_parity(&mix), Err(Error::DegenerateMix { .. })));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn blocks_reproduce_full_matrix(delta in -1.5f64..1.5, g1 in 0.0f64..1.0, g2 in 0.0f64..1.0) {
            let p = ModelParams::new(delta, g1, g2).unwrap();
            let blocks = spectrum_at_cutoff(&p, 20).unwrap();
            let full = diagonalize(&build_hamiltonian(&p, 20).unwrap()).unwrap();
            for (a, b) in blocks.eigenvalues.iter().zip(&full.values) {
                proptest::prop_assert!((a - b).abs() < 1e-10);
            }
            proptest::prop_assert!(blocks.parity_purity.iter().all(|q| *q >= 1.0 - 1e-8));
            let n_even = blocks.parities.iter().filter(|p| **p == Parity::Even).count();
            proptest::prop_assert_eq!(n_even, 21);
        }
    }
}
