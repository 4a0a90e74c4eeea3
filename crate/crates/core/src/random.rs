//! Seeded random structures for property sweeps.

use std::collections::BTreeSet;

use indexmap::IndexMap;
use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{invalid, Result};
use crate::structure::{inner, norm_sq, QuantumStructure, SSet, Step};

/// Platform-stable generator used for every seeded sweep.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Array1<C64> {
    Array1::from_iter(
        (0..dim).map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))),
    )
}

/// Uniformly random unit vector.
pub fn random_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Array1<C64> {
    let v = gaussian_vector(dim, rng);
    let n = norm_sq(&v).sqrt();
    v / C64::from(n)
}

/// Haar-random unitary by Gram–Schmidt on complex Gaussian columns.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Array2<C64> {
    let mut u = Array2::<C64>::zeros((dim, dim));
    let mut j = 0;
    while j < dim {
        let mut v = gaussian_vector(dim, rng);
        // Two passes keep the columns orthogonal to machine precision.
        for _ in 0..2 {
            for i in 0..j {
                let col = u.column(i).to_owned();
                let c = inner(&col, &v);
                v.scaled_add(-c, &col);
            }
        }
        let n = norm_sq(&v).sqrt();
        if n < 1e-8 {
            continue;
        }
        u.column_mut(j).assign(&(v / C64::from(n)));
        j += 1;
    }
    u
}

/// Uniform draw from the probability simplex with `n` outcomes.
pub fn random_probs<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Random partition of `0..dim` into `n_cells` non-empty cells `c0, c1, …`.
pub fn random_partition<R: Rng + ?Sized>(
    dim: usize,
    n_cells: usize,
    rng: &mut R,
) -> Result<IndexMap<String, Vec<usize>>> {
    if n_cells == 0 || n_cells > dim {
        return Err(invalid(format!(
            "cannot split {dim} basis vectors into {n_cells} cells"
        )));
    }
    let mut order: Vec<usize> = (0..dim).collect();
    order.shuffle(rng);
    let mut cells: Vec<Vec<usize>> = order[..n_cells].iter().map(|&i| vec![i]).collect();
    for &i in &order[n_cells..] {
        cells[rng.random_range(0..n_cells)].push(i);
    }
    Ok(cells
        .into_iter()
        .enumerate()
        .map(|(k, mut c)| {
            c.sort_unstable();
            (format!("c{k}"), c)
        })
        .collect())
}

/// Random structure with dense Haar steps and a random partition.
pub fn random_structure<R: Rng + ?Sized>(
    dim: usize,
    n_steps: usize,
    n_cells: usize,
    rng: &mut R,
) -> Result<QuantumStructure> {
    let psi0 = random_state(dim, rng);
    let steps = (0..n_steps)
        .map(|_| Step::Dense(random_unitary(dim, rng)))
        .collect();
    let cells = random_partition(dim, n_cells, rng)?;
    QuantumStructure::new(psi0, steps, cells)
}

/// Random non-empty region of the structure's cells at a random time.
pub fn random_sset<R: Rng + ?Sized>(q: &QuantumStructure, rng: &mut R) -> SSet {
    let labels: Vec<&str> = q.cell_labels().collect();
    let time = rng.random_range(0..=q.final_time());
    let mut region: BTreeSet<String> = labels
        .iter()
        .filter(|_| rng.random_bool(0.5))
        .map(|s| s.to_string())
        .collect();
    if region.is_empty() {
        region.insert(labels[rng.random_range(0..labels.len())].to_string());
    }
    SSet { time, region }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unitary_is_unitary() {
        let mut r = rng(7);
        for dim in [1, 2, 5, 16] {
            let u = random_unitary(dim, &mut r);
            assert!(Step::Dense(u).unitarity_defect() < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_structure() {
        let a = random_structure(6, 3, 3, &mut rng(11)).unwrap();
        let b = random_structure(6, 3, 3, &mut rng(11)).unwrap();
        assert_eq!(a.psi0(), b.psi0());
        assert_eq!(a.cells(), b.cells());
    }

    #[test]
    fn partition_covers_basis() {
        let mut r = rng(3);
        let cells = random_partition(10, 4, &mut r).unwrap();
        let mut all: Vec<usize> = cells.values().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(cells.values().all(|c| !c.is_empty()));
        assert!(random_partition(3, 4, &mut r).is_err());
    }
}
