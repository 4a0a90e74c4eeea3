//! Property tests over seeded random structures, chains and specs.

use std::collections::BTreeSet;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::Rng;

use qtypic::graph::{build_graph, PartitionSchedule};
use qtypic::random::{random_probs, random_sset, random_structure, rng};
use qtypic::scenarios::build_unruh;
use qtypic::stat::{tail_report, ExperimentSpec};
use qtypic::structure::{inner, norm_sq};
use qtypic::twin::StochasticProcessSpec;
use qtypic::typicality::{exclusion_measure, mutual_typicality, Verdict, DEFAULT_THRESHOLD};
use qtypic::{QuantumStructure, SSet};

const TOL: f64 = 1e-10;

fn structure(seed: u64) -> QuantumStructure {
    let mut r = rng(seed);
    let dim = r.random_range(2..=12);
    let cells = r.random_range(2..=dim.min(5));
    random_structure(dim, r.random_range(1..=3), cells, &mut r).unwrap()
}

fn same_time_pair(q: &QuantumStructure, seed: u64) -> (SSet, SSet) {
    let mut r = rng(seed);
    let s1 = random_sset(q, &mut r);
    let mut s2 = random_sset(q, &mut r);
    s2.time = s1.time;
    (s1, s2)
}

fn random_chain(seed: u64) -> StochasticProcessSpec {
    let mut r = rng(seed);
    let n = r.random_range(2..=4);
    let steps = r.random_range(1..=3);
    let states = (0..n).map(|i| format!("s{i}")).collect();
    let kernels = (0..steps)
        .map(|_| (0..n).map(|_| random_probs(n, &mut r)).collect())
        .collect();
    StochasticProcessSpec::new(states, random_probs(n, &mut r), kernels).unwrap()
}

fn chain_sset(c: &StochasticProcessSpec, r: &mut impl Rng) -> SSet {
    let time = r.random_range(0..=c.final_time());
    let mut region: BTreeSet<String> = c
        .states()
        .iter()
        .filter(|_| r.random_bool(0.5))
        .cloned()
        .collect();
    if region.is_empty() {
        region.insert(c.states()[0].clone());
    }
    SSet { time, region }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn occupations_are_complete(seed in any::<u64>()) {
        let q = structure(seed);
        for t in 0..=q.final_time() {
            let total: f64 = q.cell_labels().map(|c| q.occupation(&SSet::new(t, [c])).unwrap()).sum();
            prop_assert!((total - 1.0).abs() < TOL);
        }
    }

    #[test]
    fn equal_time_projections(seed in any::<u64>()) {
        let q = structure(seed);
        let (s1, s2) = same_time_pair(&q, seed ^ 0xabc);
        let psi = q.initial();
        let p = |s: &SSet, v: &qtypic::structure::ProjectedVector| q.heisenberg_project(s, v).unwrap();
        let (p2, p1) = (p(&s2, &psi), p(&s1, &psi));
        let a = p(&s1, &p2);
        let b = p(&s2, &p1);
        prop_assert!(a.max_abs_diff(&b) < TOL);
        let once = p(&s1, &psi);
        prop_assert!(p(&s1, &once).max_abs_diff(&once) < TOL);
        let only2 = SSet { time: s1.time, region: q.complement(&s1.region) };
        let v2 = p(&only2, &psi);
        prop_assert!(inner(&once.amplitudes, &v2.amplitudes).norm() < TOL);
    }

    #[test]
    fn evolution_round_trip(seed in any::<u64>()) {
        let q = structure(seed);
        let end = q.state_at(q.final_time()).unwrap();
        let back = q.evolve(&end, 0).unwrap();
        prop_assert!(back.max_abs_diff(&q.initial()) < TOL);
    }

    #[test]
    fn symmetry_and_reflexivity(seed in any::<u64>()) {
        let q = structure(seed);
        let mut r = rng(seed ^ 0x51);
        let (s1, s2) = (random_sset(&q, &mut r), random_sset(&q, &mut r));
        let ab = mutual_typicality(&q, &s1, &s2, DEFAULT_THRESHOLD).unwrap();
        let ba = mutual_typicality(&q, &s2, &s1, DEFAULT_THRESHOLD).unwrap();
        prop_assert_eq!(ab.m_big, ba.m_big);
        prop_assert_eq!(ab.verdict, ba.verdict);
        let own = mutual_typicality(&q, &s1, &s1, DEFAULT_THRESHOLD).unwrap();
        prop_assert_eq!(own.m_big, 0.0);
    }

    #[test]
    fn equal_time_reduces_to_symmetric_difference(seed in any::<u64>()) {
        let q = structure(seed);
        let (s1, s2) = same_time_pair(&q, seed);
        let rep = mutual_typicality(&q, &s1, &s2, DEFAULT_THRESHOLD).unwrap();
        prop_assume!(rep.verdict != Verdict::Degenerate);
        let sd: BTreeSet<String> = s1.region.symmetric_difference(&s2.region).cloned().collect();
        let mass = q.occupation(&SSet { time: s1.time, region: sd }).unwrap();
        let expected = mass / rep.norm1_sq.max(rep.norm2_sq);
        prop_assert!((rep.m_big - expected).abs() < TOL * expected.max(1.0));
        if s1.region.is_disjoint(&s2.region) {
            prop_assert!(rep.m_big >= 1.0 - TOL);
        }
    }

    #[test]
    fn inequality_chain(seed in any::<u64>()) {
        let q = structure(seed);
        let mut r = rng(seed ^ 0x77);
        let rep = mutual_typicality(&q, &random_sset(&q, &mut r), &random_sset(&q, &mut r), DEFAULT_THRESHOLD).unwrap();
        prop_assert!(rep.check_inequality_chain());
    }

    #[test]
    fn exclusion_identity(seed in any::<u64>()) {
        let q = structure(seed);
        let s = random_sset(&q, &mut rng(seed ^ 0x33));
        let all = SSet { time: s.time, region: q.all_cells() };
        let m = mutual_typicality(&q, &all, &s, DEFAULT_THRESHOLD).unwrap().m_big;
        prop_assert!((exclusion_measure(&q, &s).unwrap() - m).abs() < 1e-12);
    }

    #[test]
    fn global_phase_is_invisible(seed in any::<u64>(), theta in 0.0..std::f64::consts::TAU) {
        let q = structure(seed);
        let k = (seed % q.steps().len() as u64) as usize;
        let shifted = q.with_step_phase(k, C64::from_polar(1.0, theta)).unwrap();
        let mut r = rng(seed ^ 0x99);
        let (s1, s2) = (random_sset(&q, &mut r), random_sset(&q, &mut r));
        let a = mutual_typicality(&q, &s1, &s2, DEFAULT_THRESHOLD).unwrap();
        let b = mutual_typicality(&shifted, &s1, &s2, DEFAULT_THRESHOLD).unwrap();
        prop_assert!((a.m_big - b.m_big).abs() < TOL);
    }

    #[test]
    fn graph_monotone_in_thresholds(seed in any::<u64>(), lo in 1e-3..0.3f64, hi in 0.3..0.9f64) {
        let q = structure(seed);
        let times: Vec<usize> = (0..=q.final_time()).collect();
        let sched = PartitionSchedule::per_cell(&q, &times);
        let g = |eps, tau| build_graph(&q, &sched, eps, tau).unwrap();
        let (tight, loose) = (g(1e-9, lo), g(1e-9, hi));
        prop_assert!(tight.link_labels().is_subset(&loose.link_labels()));
        let few_links: BTreeSet<_> = tight.path_labels().into_iter().collect();
        let many_links: BTreeSet<_> = loose.path_labels().into_iter().collect();
        prop_assert!(many_links.is_subset(&few_links));

        let (kept, pruned) = (g(lo, lo), g(hi, lo));
        let few: BTreeSet<_> = kept.excluded_labels().into_iter().collect();
        let many: BTreeSet<_> = pruned.excluded_labels().into_iter().collect();
        prop_assert!(few.is_subset(&many));
        prop_assert!(pruned.link_labels().is_subset(&kept.link_labels()));
        // Exclusions drop links too, so only paths clear of the new exclusions must survive.
        let survivors: BTreeSet<_> = pruned.path_labels().into_iter().collect();
        for path in kept.path_labels() {
            if path.iter().all(|n| !many.contains(n)) {
                prop_assert!(survivors.contains(&path));
            }
        }
    }

    #[test]
    fn reversing_slices_reverses_paths(seed in any::<u64>()) {
        let q = structure(seed);
        let times: Vec<usize> = (0..=q.final_time()).collect();
        let sched = PartitionSchedule::per_cell(&q, &times);
        let forward = build_graph(&q, &sched, 1e-9, DEFAULT_THRESHOLD).unwrap();
        let backward = build_graph(&q, &sched.reversed(), 1e-9, DEFAULT_THRESHOLD).unwrap();
        let f: BTreeSet<Vec<String>> = forward.path_labels().into_iter().collect();
        let b: BTreeSet<Vec<String>> = backward
            .path_labels()
            .into_iter()
            .map(|mut p| { p.reverse(); p })
            .collect();
        prop_assert_eq!(f, b);
    }

    #[test]
    fn interferometer_paths_are_threshold_stable(tau in 1e-12..0.08f64, eps in 1e-12..0.01f64) {
        let m = build_unruh(false);
        let g = build_graph(&m.structure, &m.partition_schedule(), eps, tau).unwrap();
        let paths: BTreeSet<String> = g.path_labels().into_iter().map(|p| p.concat()).collect();
        prop_assert_eq!(paths, ["D1U2U3", "U1U2D3"].map(String::from).into());
    }

    #[test]
    fn interferometer_paths_ignore_step_phases(theta in 0.0..std::f64::consts::TAU, k in 0usize..3) {
        let m = build_unruh(false);
        let shifted = m.structure.with_step_phase(k, C64::from_polar(1.0, theta)).unwrap();
        let g = build_graph(&shifted, &m.partition_schedule(), 1e-9, DEFAULT_THRESHOLD).unwrap();
        prop_assert_eq!(g.paths.len(), 2);
    }

    #[test]
    fn tail_mass_monotone_and_bounded(seed in any::<u64>(), n in 2usize..=3, len in 1usize..=10) {
        let p = random_probs(n, &mut rng(seed));
        let mut last = f64::INFINITY;
        for eps in [0.02, 0.05, 0.1, 0.125, 0.25, 0.5] {
            let rep = tail_report(&ExperimentSpec::new(p.clone(), len, eps).unwrap()).unwrap();
            prop_assert!(rep.mass <= last + 1e-15);
            prop_assert!(rep.holds);
            last = rep.mass;
        }
    }

    #[test]
    fn chain_measure_is_additive(seed in any::<u64>()) {
        let c = random_chain(seed);
        let mut r = rng(seed ^ 0x11);
        let s = chain_sset(&c, &mut r);
        let other = chain_sset(&c, &mut r);
        let (a, b): (BTreeSet<String>, BTreeSet<String>) =
            s.region.iter().cloned().partition(|_| r.random_bool(0.5));
        let whole = c.cylinder_measure(&[s.clone(), other.clone()]).unwrap();
        let parts = c.cylinder_measure(&[SSet { time: s.time, region: a }, other.clone()]).unwrap()
            + c.cylinder_measure(&[SSet { time: s.time, region: b }, other]).unwrap();
        prop_assert!((whole - parts).abs() < 1e-14);
    }

    #[test]
    fn chain_measures_satisfy_their_chain(seed in any::<u64>()) {
        let c = random_chain(seed);
        let mut r = rng(seed ^ 0x22);
        let (s1, s2) = (chain_sset(&c, &mut r), chain_sset(&c, &mut r));
        let ab = c.typicality(&s1, &s2, DEFAULT_THRESHOLD).unwrap();
        let ba = c.typicality(&s2, &s1, DEFAULT_THRESHOLD).unwrap();
        prop_assert!(ab.check_measure_chain());
        prop_assert_eq!(ab.m_big, ba.m_big);
    }

    #[test]
    fn kolmogorov_consistency(seed in any::<u64>()) {
        let c = random_chain(seed);
        let mut r = rng(seed ^ 0x44);
        let s = chain_sset(&c, &mut r);
        let t = r.random_range(0..=c.final_time());
        let full = SSet { time: t, region: c.states().iter().cloned().collect() };
        let a = c.cylinder_measure(std::slice::from_ref(&s)).unwrap();
        let b = c.cylinder_measure(&[s, full]).unwrap();
        prop_assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn random_states_are_normalized(seed in any::<u64>(), dim in 1usize..16) {
        let v = qtypic::random::random_state(dim, &mut rng(seed));
        prop_assert!((norm_sq(&v) - 1.0).abs() < 1e-12);
    }
}
