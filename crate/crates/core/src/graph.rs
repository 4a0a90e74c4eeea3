//! Admissible trajectory reconstruction.
//!
//! A [`PartitionSchedule`] slices the process into time-indexed partitions of
//! the cell set. Each (slice, region) pair becomes a node; nodes with
//! negligible occupation are excluded, and every cross-slice pair whose
//! mutual typicality measure is below `tau_link` is tied by a forced link.
//! An admissible path visits one node per slice, avoids excluded nodes, and
//! visits either both or neither endpoint of every link.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::num::Num;
use crate::structure::{QuantumStructure, SSet};
use crate::typicality::{check_threshold, mutual_typicality, DEFAULT_THRESHOLD};

/// Largest slice product that will be enumerated.
pub const MAX_PATH_SPACE: u64 = 1_000_000;
const OCCUPATION_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedRegion {
    pub name: String,
    pub cells: BTreeSet<String>,
}

impl NamedRegion {
    pub fn new<I, S>(name: &str, cells: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        NamedRegion {
            name: name.to_owned(),
            cells: cells.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slice {
    pub time: usize,
    pub regions: Vec<NamedRegion>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSchedule {
    pub slices: Vec<Slice>,
}

impl PartitionSchedule {
    /// One slice per listed time, one region per cell.
    pub fn per_cell(structure: &QuantumStructure, times: &[usize]) -> Self {
        let slices = times
            .iter()
            .map(|&time| Slice {
                time,
                regions: structure
                    .cell_labels()
                    .map(|c| NamedRegion::new(c, [c]))
                    .collect(),
            })
            .collect();
        PartitionSchedule { slices }
    }

    /// Parses `T:NAME=CELL+CELL|NAME=CELL;T:...`. A bare `NAME` stands for the
    /// single cell of that name.
    pub fn parse(text: &str) -> Result<Self> {
        let mut slices = Vec::new();
        for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (time, regions) = part
                .split_once(':')
                .ok_or_else(|| invalid(format!("slice `{part}` must look like T:REGION|REGION")))?;
            let time = time
                .trim()
                .parse()
                .map_err(|_| invalid(format!("bad time index in slice `{part}`")))?;
            let regions = regions
                .split('|')
                .map(str::trim)
                .map(|r| match r.split_once('=') {
                    Some((name, cells)) => {
                        NamedRegion::new(name.trim(), cells.split('+').map(str::trim))
                    }
                    None => NamedRegion::new(r, [r]),
                })
                .collect();
            slices.push(Slice { time, regions });
        }
        Ok(PartitionSchedule { slices })
    }

    /// The same slices in reverse order.
    pub fn reversed(&self) -> Self {
        let mut slices = self.slices.clone();
        slices.reverse();
        PartitionSchedule { slices }
    }

    pub fn validate(&self, structure: &QuantumStructure) -> Result<()> {
        if self.slices.is_empty() {
            return Err(invalid("partition schedule has no slices"));
        }
        let all = structure.all_cells();
        for slice in &self.slices {
            structure.check_time(slice.time)?;
            let mut seen = BTreeSet::new();
            for region in &slice.regions {
                structure.check_region(&region.cells)?;
                for cell in &region.cells {
                    if !seen.insert(cell.clone()) {
                        return Err(invalid(format!(
                            "cell `{cell}` appears in two regions of the slice at t={}",
                            slice.time
                        )));
                    }
                }
            }
            if seen != all {
                return Err(invalid(format!(
                    "regions of the slice at t={} do not cover every cell",
                    slice.time
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Node {
    /// `NAME` followed by the time index, e.g. `U2`.
    pub label: String,
    pub slice: usize,
    pub time: usize,
    pub cells: BTreeSet<String>,
    pub occupation: f64,
    pub excluded: bool,
}

impl Node {
    pub fn sset(&self) -> SSet {
        SSet {
            time: self.time,
            region: self.cells.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Link {
    pub a: usize,
    pub b: usize,
    pub m_big: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryGraph {
    pub epsilon_exclude: f64,
    pub tau_link: f64,
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    /// Node indices, one per slice in schedule order.
    pub paths: Vec<Vec<usize>>,
}

impl TrajectoryGraph {
    pub fn path_labels(&self) -> Vec<Vec<String>> {
        self.paths
            .iter()
            .map(|p| p.iter().map(|&i| self.nodes[i].label.clone()).collect())
            .collect()
    }

    pub fn excluded_labels(&self) -> Vec<String> {
        self.nodes
            .iter()
            .filter(|n| n.excluded)
            .map(|n| n.label.clone())
            .collect()
    }

    /// Links as unordered label pairs, each pair sorted.
    pub fn link_labels(&self) -> BTreeSet<(String, String)> {
        self.links
            .iter()
            .map(|l| {
                let (a, b) = (&self.nodes[l.a].label, &self.nodes[l.b].label);
                if a <= b {
                    (a.clone(), b.clone())
                } else {
                    (b.clone(), a.clone())
                }
            })
            .collect()
    }

    /// Plot-ready edge list: path steps between consecutive slices and forced links.
    pub fn to_edge_csv(&self) -> String {
        let mut steps = BTreeSet::new();
        for path in &self.paths {
            for w in path.windows(2) {
                steps.insert((w[0], w[1]));
            }
        }
        let mut out = String::from("kind,from,to,from_time,to_time,value\n");
        for (a, b) in steps {
            let (na, nb) = (&self.nodes[a], &self.nodes[b]);
            let _ = writeln!(
                out,
                "path,{},{},{},{},",
                na.label, nb.label, na.time, nb.time
            );
        }
        for l in &self.links {
            let (na, nb) = (&self.nodes[l.a], &self.nodes[l.b]);
            let _ = writeln!(
                out,
                "link,{},{},{},{},{}",
                na.label,
                nb.label,
                na.time,
                nb.time,
                Num(l.m_big)
            );
        }
        out
    }

    fn admits(&self, path: &[usize]) -> bool {
        self.links
            .iter()
            .all(|l| path.contains(&l.a) == path.contains(&l.b))
    }
}

pub fn build_graph(
    structure: &QuantumStructure,
    schedule: &PartitionSchedule,
    epsilon_exclude: f64,
    tau_link: f64,
) -> Result<TrajectoryGraph> {
    check_threshold("epsilon_exclude", epsilon_exclude)?;
    check_threshold("tau_link", tau_link)?;
    schedule.validate(structure)?;

    let space = schedule
        .slices
        .iter()
        .try_fold(1u64, |acc, s| acc.checked_mul(s.regions.len() as u64))
        .filter(|&n| n <= MAX_PATH_SPACE)
        .ok_or_else(|| {
            Error::Resource(format!("path space exceeds {MAX_PATH_SPACE} trajectories"))
        })?;

    let mut nodes = Vec::new();
    let mut by_slice = Vec::with_capacity(schedule.slices.len());
    for (k, slice) in schedule.slices.iter().enumerate() {
        let mut ids = Vec::with_capacity(slice.regions.len());
        let mut total = 0.0;
        for region in &slice.regions {
            let sset = SSet {
                time: slice.time,
                region: region.cells.clone(),
            };
            let occupation = structure.occupation(&sset)?;
            total += occupation;
            ids.push(nodes.len());
            nodes.push(Node {
                label: format!("{}{}", region.name, slice.time),
                slice: k,
                time: slice.time,
                cells: region.cells.clone(),
                occupation,
                excluded: occupation <= epsilon_exclude,
            });
        }
        debug_assert!(
            (total - 1.0).abs() < OCCUPATION_TOL,
            "slice occupations sum to {total}"
        );
        by_slice.push(ids);
    }

    let mut links = Vec::new();
    for a in 0..nodes.len() {
        for b in a + 1..nodes.len() {
            let (na, nb) = (&nodes[a], &nodes[b]);
            if na.slice == nb.slice || na.excluded || nb.excluded {
                continue;
            }
            let report = mutual_typicality(structure, &na.sset(), &nb.sset(), DEFAULT_THRESHOLD)?;
            if report.m_big <= tau_link {
                links.push(Link {
                    a,
                    b,
                    m_big: report.m_big,
                });
            }
        }
    }

    let mut graph = TrajectoryGraph {
        epsilon_exclude,
        tau_link,
        nodes,
        links,
        paths: Vec::new(),
    };

    let choices: Vec<Vec<usize>> = by_slice
        .iter()
        .map(|ids| {
            ids.iter()
                .copied()
                .filter(|&i| !graph.nodes[i].excluded)
                .collect()
        })
        .collect();
    let mut paths = Vec::new();
    if choices.iter().all(|c| !c.is_empty()) {
        let mut odometer = vec![0usize; choices.len()];
        let mut visited = 0u64;
        'enumerate: loop {
            visited += 1;
            debug_assert!(visited <= space);
            let path: Vec<usize> = odometer.iter().zip(&choices).map(|(&i, c)| c[i]).collect();
            if graph.admits(&path) {
                paths.push(path);
            }
            // last slice varies fastest
            for k in (0..choices.len()).rev() {
                odometer[k] += 1;
                if odometer[k] < choices[k].len() {
                    continue 'enumerate;
                }
                odometer[k] = 0;
            }
            break;
        }
    }
    graph.paths = paths;
    Ok(graph)
}

/// Checks that a time-ordered list of s-sets follows one branch: every later
/// s-set is either mutually typical with each earlier one or contained in it
/// (`‖(1 − Ŝᵢ) Ŝⱼ Ψ₀‖² ≤ tau ‖Ŝⱼ Ψ₀‖²`).
pub fn branch_following_check(
    structure: &QuantumStructure,
    branch: &[SSet],
    tau: f64,
) -> Result<bool> {
    check_threshold("tau", tau)?;
    if branch.windows(2).any(|w| w[0].time > w[1].time) {
        return Err(invalid("branch s-sets must be time-ordered"));
    }
    for s in branch {
        structure.check_sset(s)?;
    }
    for (i, earlier) in branch.iter().enumerate() {
        for later in &branch[i + 1..] {
            let m = mutual_typicality(structure, earlier, later, DEFAULT_THRESHOLD)?;
            if m.m_big <= tau {
                continue;
            }
            let inside = structure.project_at(later)?;
            let leaked = SSet {
                time: earlier.time,
                region: structure.complement(&earlier.region),
            };
            let outside = structure.heisenberg_project(&leaked, &inside)?;
            if outside.norm_sq() > tau * inside.norm_sq() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
