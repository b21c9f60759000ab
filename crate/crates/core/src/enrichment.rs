//! Generalized Heaviside enrichment by unzipping background elements.
//!
//! For every background basis function, the subphases inside its support
//! are collected, the same-material graph `g_s` is pruned to them, and a
//! flood fill yields the disconnected groups. Each group becomes one
//! enriched basis function with a fresh single index. Background elements
//! are copied once per contained subphase ("unzipped") and their IENs
//! rewritten to enriched indices, so the enrichment is fully encoded in
//! the index arrays: assembly never sees an enrichment function.

use crate::bg_mesh::{BackgroundMesh, Ownership};
use crate::error::{Error, Result};
use crate::topology::{flood_fill, Topology};

#[derive(Debug, Clone)]
pub struct EnrichedBasis {
    /// Local background basis index.
    pub basis: usize,
    /// Enrichment level within that basis (0-based).
    pub level: usize,
    /// Connected subphase group supporting this function (sorted).
    pub subphases: Vec<usize>,
    pub owner_rank: u32,
    /// Parallel consistent ID; 0 until communicated.
    pub id: u64,
}

/// Copy of a background element for one subphase, with the IEN rewritten
/// to enriched indices.
#[derive(Debug, Clone)]
pub struct UnzippedElement {
    pub bg_elem: usize,
    pub local: usize,
    /// Per raw IEN slot: the local enriched index. `None` marks a slot
    /// not yet rewritten (the once-only replacement safeguard); aura
    /// elements have an empty vector until their IDs are communicated.
    pub enr_ien: Vec<Option<usize>>,
    /// Enriched IDs received from the owning rank (aura elements that
    /// participate in cross-rank cluster pairs).
    pub comm_ids: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnzipMode {
    Enriched,
    /// Ablation: a single enrichment level per basis regardless of the
    /// material layout (restores artificial coupling).
    SingleLevel,
}

#[derive(Debug, Clone)]
pub struct Enrichment {
    /// `unzipped[e][u]` is the copy of element `e` for subphase `u`.
    pub unzipped: Vec<Vec<UnzippedElement>>,
    pub table: Vec<EnrichedBasis>,
}

#[derive(Debug, Clone)]
pub struct PartitionReport {
    pub max_pu_error: f64,
    pub max_equivalence_error: f64,
    pub points: usize,
}

/// Induced subgraph of `graph` on `keep`, re-indexed by position in `keep`.
pub fn prune(graph: &[Vec<usize>], keep: &[usize]) -> Vec<Vec<usize>> {
    let pos: std::collections::HashMap<usize, usize> =
        keep.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    keep.iter()
        .map(|&s| {
            graph[s]
                .iter()
                .filter_map(|n| pos.get(n).copied())
                .collect()
        })
        .collect()
}

/// Unzip the background elements and build the enriched basis table.
///
/// Subphase IDs must already be assigned; enrichment levels are ordered
/// by the smallest subphase ID of each group so that the numbering is
/// identical on every rank holding the support.
pub fn unzip_interpolation_mesh(
    bg: &BackgroundMesh,
    topo: &Topology,
    ownership: &Ownership,
    mode: UnzipMode,
) -> Result<Enrichment> {
    let mut unzipped: Vec<Vec<UnzippedElement>> = Vec::with_capacity(bg.num_elems());
    for e in 0..bg.num_elems() {
        let slots = bg.elements[e].ien.len();
        let copies = (0..topo.n_u[e])
            .map(|u| UnzippedElement {
                bg_elem: e,
                local: u,
                enr_ien: vec![None; slots],
                comm_ids: None,
            })
            .collect();
        unzipped.push(copies);
    }

    // Subphases per element, ordered by local index u.
    let mut by_elem: Vec<Vec<usize>> = vec![Vec::new(); bg.num_elems()];
    for (s, sp) in topo.subphases.iter().enumerate() {
        by_elem[sp.bg_elem].push(s);
    }

    let mut table: Vec<EnrichedBasis> = Vec::new();
    for b in 0..bg.num_basis() {
        let mut in_support: Vec<usize> = Vec::new();
        for &e in &bg.basis_supports[b] {
            in_support.extend(&by_elem[e]);
        }
        if in_support.is_empty() {
            continue;
        }
        let mut groups: Vec<Vec<usize>> = match mode {
            UnzipMode::SingleLevel => vec![in_support.clone()],
            UnzipMode::Enriched => {
                let local = prune(&topo.g_s, &in_support);
                let labels = vec![0u32; local.len()];
                let comp = flood_fill(&local, &labels);
                let n = comp.iter().copied().max().map_or(0, |m| m + 1);
                let mut groups = vec![Vec::new(); n];
                for (i, &c) in comp.iter().enumerate() {
                    groups[c].push(in_support[i]);
                }
                groups
            }
        };
        // Deterministic, rank-invariant level ordering.
        groups.sort_by_key(|g| {
            g.iter()
                .map(|&s| topo.subphases[s].id)
                .min()
                .unwrap_or(u64::MAX)
        });

        let owner_rank = bg.basis_owner(b, ownership);
        for (level, mut group) in groups.into_iter().enumerate() {
            let l = table.len();
            group.sort_unstable();
            for &s in &group {
                let sp = &topo.subphases[s];
                let uz = &mut unzipped[sp.bg_elem][sp.local];
                if uz.enr_ien.is_empty() {
                    continue; // aura element: IEN arrives by communication
                }
                let slot = bg.elements[sp.bg_elem]
                    .ien
                    .iter()
                    .position(|&x| x == b)
                    .ok_or_else(|| {
                        Error::invariant(format!(
                            "basis {b} missing from IEN of support element {}",
                            sp.bg_elem
                        ))
                    })?;
                if let Some(prev) = uz.enr_ien[slot] {
                    if prev != l {
                        return Err(Error::invariant(format!(
                            "IEN slot of basis {b} in element {} already rewritten",
                            sp.bg_elem
                        )));
                    }
                } else {
                    uz.enr_ien[slot] = Some(l);
                }
            }
            table.push(EnrichedBasis {
                basis: b,
                level,
                subphases: group,
                owner_rank,
                id: 0,
            });
        }
    }

    Ok(Enrichment { unzipped, table })
}

impl Enrichment {
    pub fn num_enriched(&self) -> usize {
        self.table.len()
    }

    /// Every IEN slot of every owned unzipped element must be rewritten.
    pub fn check_complete(&self, bg: &BackgroundMesh) -> Result<()> {
        for copies in &self.unzipped {
            for uz in copies {
                if !bg.is_owned(uz.bg_elem) {
                    continue;
                }
                for (slot, l) in uz.enr_ien.iter().enumerate() {
                    if l.is_none() {
                        return Err(Error::invariant(format!(
                            "element {} copy {} IEN slot {slot} not enriched",
                            uz.bg_elem, uz.local
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Enriched local indices of an unzipped element (owned elements only).
    pub fn local_ien(&self, e: usize, u: usize) -> Result<Vec<usize>> {
        self.unzipped[e][u]
            .enr_ien
            .iter()
            .map(|l| {
                l.ok_or_else(|| {
                    Error::invariant(format!("element {e} copy {u} has an unrewritten IEN slot"))
                })
            })
            .collect()
    }

    /// Enriched IDs of an unzipped element; falls back to communicated
    /// IDs for aura elements.
    pub fn enriched_ids(&self, e: usize, u: usize) -> Result<Vec<u64>> {
        let uz = &self.unzipped[e][u];
        if let Some(ids) = &uz.comm_ids {
            return Ok(ids.clone());
        }
        uz.enr_ien
            .iter()
            .map(|l| {
                let l = l.ok_or_else(|| {
                    Error::invariant(format!("element {e} copy {u}: IEN not available"))
                })?;
                let id = self.table[l].id;
                if id == 0 {
                    return Err(Error::invariant(format!(
                        "enriched basis {l} has no ID assigned"
                    )));
                }
                Ok(id)
            })
            .collect()
    }

    /// Evaluate the enriched partition of unity and the equivalence of
    /// unzipped-IEN evaluation with the explicit indicator-function form
    /// at every bulk quadrature point, using a random coefficient vector.
    pub fn partition_of_unity_check(
        &self,
        bg: &BackgroundMesh,
        topo: &Topology,
        clusters: &crate::clusters::ClusterSet,
        seed: u64,
    ) -> Result<PartitionReport> {
        use rand::Rng;
        let mut rng = crate::seeded_rng(seed);
        let coeffs: Vec<f64> = (0..self.table.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        // (basis, subphase) -> enrichment level, the explicit indicator.
        let mut level_of: std::collections::HashMap<(usize, usize), usize> =
            std::collections::HashMap::new();
        for (l, t) in self.table.iter().enumerate() {
            for &s in &t.subphases {
                level_of.insert((t.basis, s), l);
            }
        }
        let subphase_of: std::collections::HashMap<(usize, usize), usize> = topo
            .subphases
            .iter()
            .enumerate()
            .map(|(s, sp)| ((sp.bg_elem, sp.local), s))
            .collect();

        let mut report = PartitionReport {
            max_pu_error: 0.0,
            max_equivalence_error: 0.0,
            points: 0,
        };
        for cs in clusters.bulk.values() {
            for cl in cs {
                let s = subphase_of[&(cl.bg_elem, cl.u)];
                let ien = self.local_ien(cl.bg_elem, cl.u)?;
                let raw = &bg.elements[cl.bg_elem].ien;
                for p in &cl.points {
                    let ev = bg.eval_basis(cl.bg_elem, p.xi, 0)?;
                    let sum: f64 = ev.values.iter().sum();
                    report.max_pu_error = report.max_pu_error.max((sum - 1.0).abs());
                    let mut via_ien = 0.0;
                    let mut via_psi = 0.0;
                    for (slot, &l) in ien.iter().enumerate() {
                        via_ien += ev.values[slot] * coeffs[l];
                        let lp = level_of.get(&(raw[slot], s)).copied().ok_or_else(|| {
                            Error::invariant(format!(
                                "no enrichment level for basis {} on subphase {s}",
                                raw[slot]
                            ))
                        })?;
                        via_psi += ev.values[slot] * coeffs[lp];
                    }
                    report.max_equivalence_error = report
                        .max_equivalence_error
                        .max((via_ien - via_psi).abs());
                    report.points += 1;
                }
            }
        }
        Ok(report)
    }

    /// Text export of the enriched index table: `l B eps owner id`.
    pub fn table_text(&self, bg: &BackgroundMesh) -> String {
        let mut out = String::new();
        for (l, e) in self.table.iter().enumerate() {
            out.push_str(&format!(
                "{l} {} {} {} {}\n",
                bg.basis_key(e.basis),
                e.level,
                e.owner_rank,
                e.id
            ));
        }
        out
    }
}
