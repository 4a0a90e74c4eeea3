//! Concrete interferometer models.
//!
//! The multi-pass Mach-Zehnder setup has two photon modes, `U` (upper half)
//! and `D` (lower half), observed at times `t₁, t₂, t₃` after each of three
//! half-silvered mirrors. The phase convention is fixed by [`Convention`]:
//! a half-silvered mirror keeps the mode with amplitude `1/√2` and swaps it
//! with amplitude `i/√2`; the full mirrors between passes multiply both arms by
//! `i`; the source feeds the `D` mode. Under this convention the chained
//! projections reproduce the sign pattern
//!
//! ```text
//! U₃U₂U₁ = +Ψ_U   D₃U₂U₁ = +Ψ_D
//! U₃U₂D₁ = +Ψ_U   D₃U₂D₁ = +Ψ_D
//! U₃D₂U₁ = −Ψ_U   D₃D₂U₁ = +Ψ_D
//! U₃D₂D₁ = +Ψ_U   D₃D₂D₁ = −Ψ_D
//! ```
//!
//! exactly, so `Û₁Ψ₀ = D̂₃Ψ₀`, `D̂₁Ψ₀ = Û₃Ψ₀` and `Û₂Ψ₀ = Ψ₀`.

use std::f64::consts::FRAC_1_SQRT_2;

use indexmap::IndexMap;
use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::{NamedRegion, PartitionSchedule, Slice};
use crate::structure::{norm_sq, ProjectedVector, QuantumStructure, SSet, Step};

pub const UPPER: &str = "U";
pub const LOWER: &str = "D";
/// Counter placed in the `D` arm between the second and third mirror.
pub const CLICK: &str = "CLICK";
/// Absorber behind an obstacle.
pub const ABSORBED: &str = "ABSORBED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Convention {
    pub splitter_keep: [f64; 2],
    pub splitter_swap: [f64; 2],
    pub mirror_phase: [f64; 2],
    pub source_mode: String,
}

impl Default for Convention {
    fn default() -> Self {
        Convention {
            splitter_keep: [FRAC_1_SQRT_2, 0.0],
            splitter_swap: [0.0, FRAC_1_SQRT_2],
            mirror_phase: [0.0, 1.0],
            source_mode: LOWER.to_owned(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arm {
    U1,
    D1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnruhVariant {
    Plain,
    DetectorD2,
    Obstacle(Arm),
}

#[derive(Clone, Debug)]
pub struct UnruhModel {
    pub structure: QuantumStructure,
    pub convention: Convention,
    pub variant: UnruhVariant,
    /// `t₀ … t₃` as time indices.
    pub times: [usize; 4],
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Half-silvered mirror on `(U, D)` embedded in `dim` modes, optionally
/// followed by a full-mirror phase on both arms.
fn splitter(conv: &Convention, dim: usize, with_mirrors: bool) -> Array2<C64> {
    let keep = c(conv.splitter_keep[0], conv.splitter_keep[1]);
    let swap = c(conv.splitter_swap[0], conv.splitter_swap[1]);
    let phase = if with_mirrors {
        c(conv.mirror_phase[0], conv.mirror_phase[1])
    } else {
        c(1.0, 0.0)
    };
    let mut m = Array2::<C64>::eye(dim);
    m[[0, 0]] = phase * keep;
    m[[0, 1]] = phase * swap;
    m[[1, 0]] = phase * swap;
    m[[1, 1]] = phase * keep;
    m
}

/// Permutation exchanging modes `a` and `b`.
fn swap_modes(dim: usize, a: usize, b: usize) -> Array2<C64> {
    let mut p = Array2::<C64>::eye(dim);
    p[[a, a]] = c(0.0, 0.0);
    p[[b, b]] = c(0.0, 0.0);
    p[[a, b]] = c(1.0, 0.0);
    p[[b, a]] = c(1.0, 0.0);
    p
}

fn mode_cells(extra: Option<&str>) -> IndexMap<String, Vec<usize>> {
    let mut cells = IndexMap::new();
    cells.insert(UPPER.to_owned(), vec![0]);
    cells.insert(LOWER.to_owned(), vec![1]);
    if let Some(label) = extra {
        cells.insert(label.to_owned(), vec![2]);
    }
    cells
}

fn source(dim: usize) -> Array1<C64> {
    let mut psi = Array1::zeros(dim);
    psi[1] = c(1.0, 0.0);
    psi
}

impl UnruhModel {
    fn assemble(variant: UnruhVariant) -> Self {
        let conv = Convention::default();
        let extra = match &variant {
            UnruhVariant::Plain => None,
            UnruhVariant::DetectorD2 => Some(CLICK),
            UnruhVariant::Obstacle(_) => Some(ABSORBED),
        };
        let dim = if extra.is_some() { 3 } else { 2 };
        let first = splitter(&conv, dim, false);
        let mut second = splitter(&conv, dim, true);
        let mut third = splitter(&conv, dim, true);
        match &variant {
            UnruhVariant::Plain => {}
            // the D₂ amplitude is diverted into the counter before the third mirror
            UnruhVariant::DetectorD2 => third = third.dot(&swap_modes(dim, 1, 2)),
            UnruhVariant::Obstacle(arm) => {
                let blocked = match arm {
                    Arm::U1 => 0,
                    Arm::D1 => 1,
                };
                second = second.dot(&swap_modes(dim, blocked, 2));
            }
        }
        let structure = QuantumStructure::new(
            source(dim),
            vec![Step::Dense(first), Step::Dense(second), Step::Dense(third)],
            mode_cells(extra),
        )
        .expect("interferometer model is well formed");
        UnruhModel {
            structure,
            convention: conv,
            variant,
            times: [0, 1, 2, 3],
        }
    }

    pub fn upper(&self, i: usize) -> SSet {
        SSet::new(self.times[i], [UPPER])
    }

    pub fn lower(&self, i: usize) -> SSet {
        SSet::new(self.times[i], [LOWER])
    }

    /// `U₁ U₂ U₃ / D₁ D₂ D₃` slices. In the detector variant the counter cell
    /// belongs to the `D` arm region; after an obstacle the absorber gets a
    /// region of its own.
    pub fn partition_schedule(&self) -> PartitionSchedule {
        let slices = self.times[1..]
            .iter()
            .map(|&time| {
                let mut regions = vec![NamedRegion::new(UPPER, [UPPER])];
                match self.variant {
                    UnruhVariant::Plain => regions.push(NamedRegion::new(LOWER, [LOWER])),
                    UnruhVariant::DetectorD2 => {
                        regions.push(NamedRegion::new(LOWER, [LOWER, CLICK]))
                    }
                    UnruhVariant::Obstacle(_) => {
                        regions.push(NamedRegion::new(LOWER, [LOWER]));
                        regions.push(NamedRegion::new("A", [ABSORBED]));
                    }
                }
                Slice { time, regions }
            })
            .collect();
        PartitionSchedule { slices }
    }

    /// `Ψ_U := Û₃Û₂Û₁Ψ₀` and `Ψ_D := D̂₃Û₂Û₁Ψ₀` at time 0.
    pub fn reference_vectors(&self) -> Result<(ProjectedVector, ProjectedVector)> {
        let q = &self.structure;
        let psi_u = q.chain_project(&[self.upper(1), self.upper(2), self.upper(3)])?;
        let psi_d = q.chain_project(&[self.upper(1), self.upper(2), self.lower(3)])?;
        Ok((psi_u, psi_d))
    }
}

/// One row of the chained-projection table: `Ŷ₃X̂₂Ŵ₁Ψ₀ = coefficient · Ψ_ref`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignEntry {
    /// Operator product as written, e.g. `U3D2U1`.
    pub chain: String,
    /// `U` or `D`, the final mode.
    pub reference: String,
    pub coefficient: C64,
    /// `‖chain − coefficient · Ψ_ref‖`
    pub residual: f64,
}

impl UnruhModel {
    /// All eight three-pass chains expressed against `Ψ_U` and `Ψ_D`.
    pub fn sign_table(&self) -> Result<Vec<SignEntry>> {
        let (psi_u, psi_d) = self.reference_vectors()?;
        let q = &self.structure;
        let mut rows = Vec::with_capacity(8);
        for last in [UPPER, LOWER] {
            let reference = if last == UPPER { &psi_u } else { &psi_d };
            let ref_norm = reference.norm_sq();
            for middle in [UPPER, LOWER] {
                for first in [UPPER, LOWER] {
                    let v = q.chain_project(&[
                        SSet::new(self.times[1], [first]),
                        SSet::new(self.times[2], [middle]),
                        SSet::new(self.times[3], [last]),
                    ])?;
                    let coefficient = if ref_norm > 0.0 {
                        crate::structure::inner(&reference.amplitudes, &v.amplitudes) / ref_norm
                    } else {
                        C64::new(0.0, 0.0)
                    };
                    let residual =
                        norm_sq(&(&v.amplitudes - &(&reference.amplitudes * coefficient))).sqrt();
                    rows.push(SignEntry {
                        chain: format!("{last}3{middle}2{first}1"),
                        reference: last.to_owned(),
                        coefficient,
                        residual,
                    });
                }
            }
        }
        Ok(rows)
    }
}

pub fn build_unruh(with_detector_d2: bool) -> UnruhModel {
    UnruhModel::assemble(if with_detector_d2 {
        UnruhVariant::DetectorD2
    } else {
        UnruhVariant::Plain
    })
}

pub fn obstacle_variant(arm: Arm) -> UnruhModel {
    UnruhModel::assemble(UnruhVariant::Obstacle(arm))
}

/// Source, splitter, two pinholes at `t₁`, two detectors at `t₂`.
/// Cell `A` holds the reflected arm (pinhole `P_A`, detector `D_A`).
pub fn build_beamsplitter_fig1() -> QuantumStructure {
    let s = FRAC_1_SQRT_2;
    let split = ndarray::array![[c(0.0, s), c(s, 0.0)], [c(s, 0.0), c(0.0, s)]];
    let mut cells = IndexMap::new();
    cells.insert("A".to_owned(), vec![0]);
    cells.insert("B".to_owned(), vec![1]);
    QuantumStructure::new(
        ndarray::array![c(0.0, 0.0), c(1.0, 0.0)],
        vec![Step::Dense(split), Step::Dense(Array2::eye(2))],
        cells,
    )
    .expect("splitter model is well formed")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NonadditivityWitness {
    /// `‖Ŝ₂(Ŝ₁ + Ŝ′₁)Ψ₀‖²`
    pub combined: f64,
    /// `‖Ŝ₂Ŝ₁Ψ₀‖²`
    pub first: f64,
    /// `‖Ŝ₂Ŝ′₁Ψ₀‖²`
    pub second: f64,
}

impl NonadditivityWitness {
    pub fn interference(&self) -> f64 {
        self.combined - self.first - self.second
    }

    pub fn is_additive(&self, tol: f64) -> bool {
        self.interference().abs() <= tol
    }
}

/// Compares the chained norm over the union `S₁ ∪ S′₁` with the sum of the
/// chained norms over the parts. `s1` and `s1_prime` must share a time.
pub fn nonadditivity(
    q: &QuantumStructure,
    s1: &SSet,
    s1_prime: &SSet,
    s2: &SSet,
) -> Result<NonadditivityWitness> {
    if s1.time != s1_prime.time {
        return Err(invalid("S₁ and S′₁ must be equal-time s-sets"));
    }
    if !s1.region.is_disjoint(&s1_prime.region) {
        return Err(invalid("S₁ and S′₁ must be disjoint"));
    }
    let a = q.chain_project(&[s1.clone(), s2.clone()])?;
    let b = q.chain_project(&[s1_prime.clone(), s2.clone()])?;
    Ok(NonadditivityWitness {
        combined: norm_sq(&(&a.amplitudes + &b.amplitudes)),
        first: a.norm_sq(),
        second: b.norm_sq(),
    })
}

/// The witness for `S₁ = U₁`, `S′₁ = D₁`, `S₂ = U₂` on the plain interferometer.
pub fn nonadditivity_demo() -> NonadditivityWitness {
    let m = build_unruh(false);
    nonadditivity(&m.structure, &m.upper(1), &m.lower(1), &m.upper(2))
        .expect("interferometer s-sets are valid")
}
