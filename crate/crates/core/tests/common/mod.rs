//! Shared oracles and harness helpers for the integration and acceptance
//! suites. Everything here is deliberately independent of the library's
//! topology/enrichment code paths: connectivity is rebuilt from raw cell
//! data with a hand-rolled union-find.

#![allow(dead_code)]

use cutmesh::clusters::Cluster;
use cutmesh::parallel::{ParallelRun, RankState};
use std::collections::{BTreeMap, HashMap};

pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let r = self.find(self.parent[x]);
            self.parent[x] = r;
        }
        self.parent[x]
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }

    pub fn num_components(&mut self, nodes: &[usize]) -> usize {
        let mut roots = std::collections::BTreeSet::new();
        for &n in nodes {
            roots.insert(self.find(n));
        }
        roots.len()
    }
}

/// Facet-adjacency between cells rebuilt from sorted vertex tuples.
pub fn facet_adjacency(state: &RankState) -> Vec<(usize, usize)> {
    let fg = &state.fg;
    let dim = fg.dim;
    let mut by_key: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut pairs = Vec::new();
    for c in 0..fg.num_cells() {
        let verts = &fg.cells[c].verts;
        let ty = cutmesh::bg_mesh::CellType::from_dim_and_len(dim, verts.len());
        for o in 0..ty.num_facets() {
            let mut key: Vec<usize> = ty.facet_verts(o).iter().map(|&l| verts[l]).collect();
            key.sort_unstable();
            match by_key.insert(key, c) {
                None => {}
                Some(other) => pairs.push((other, c)),
            }
        }
    }
    pairs
}

/// Independent subphase decomposition: same-element, same-material,
/// facet-connected components of foreground cells.
pub fn brute_force_subphases(state: &RankState) -> Vec<Vec<usize>> {
    let fg = &state.fg;
    let mut uf = UnionFind::new(fg.num_cells());
    for (a, b) in facet_adjacency(state) {
        if fg.cells[a].bg_elem == fg.cells[b].bg_elem
            && fg.cells[a].material == fg.cells[b].material
        {
            uf.union(a, b);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for c in 0..fg.num_cells() {
        groups.entry(uf.find(c)).or_default().push(c);
    }
    groups.into_values().collect()
}

/// Independent per-basis enrichment level count: components of the
/// support's cells under same-material facet adjacency (2D meshes are
/// conformal everywhere, so facet adjacency is complete).
pub fn brute_force_level_counts(state: &RankState) -> Vec<usize> {
    let fg = &state.fg;
    let bg = &state.bg;
    let adj = facet_adjacency(state);
    let mut counts = Vec::with_capacity(bg.num_basis());
    for b in 0..bg.num_basis() {
        let mut cells: Vec<usize> = Vec::new();
        for &e in &bg.basis_supports[b] {
            cells.extend(fg.child_meshes[e].cells.iter().copied());
        }
        let inset: std::collections::BTreeSet<usize> = cells.iter().copied().collect();
        let mut uf = UnionFind::new(fg.num_cells());
        for &(a, c) in &adj {
            if inset.contains(&a)
                && inset.contains(&c)
                && fg.cells[a].material == fg.cells[c].material
            {
                uf.union(a, c);
            }
        }
        counts.push(uf.num_components(&cells));
    }
    counts
}

/// Map enriched IDs to rank-independent (basis key, level) labels.
pub fn id_to_label(run: &ParallelRun) -> BTreeMap<u64, (u64, usize)> {
    let mut map = BTreeMap::new();
    for rs in &run.ranks {
        for t in &rs.enr.table {
            let label = (rs.bg.basis_key(t.basis), t.level);
            if let Some(prev) = map.insert(t.id, label) {
                assert_eq!(prev, label, "conflicting labels for enriched id {}", t.id);
            }
        }
    }
    map
}

pub type ClusterKey = (
    &'static str,
    u64,
    Vec<(u64, u64, Vec<(u64, usize)>, usize)>,
);

/// Rank-independent multiset of every cluster a run produced.
pub fn cluster_multiset(run: &ParallelRun) -> Vec<ClusterKey> {
    let labels = id_to_label(run);
    let tag = |rs: &RankState, c: &Cluster| -> (u64, u64, Vec<(u64, usize)>, usize) {
        let ids = rs.enr.enriched_ids(c.bg_elem, c.u).unwrap();
        let mut lab: Vec<(u64, usize)> = ids.iter().map(|id| labels[id]).collect();
        lab.sort_unstable();
        (
            rs.bg.elements[c.bg_elem].id,
            c.u as u64,
            lab,
            c.points.len(),
        )
    };
    let mut out: Vec<ClusterKey> = Vec::new();
    for rs in &run.ranks {
        for (m, cs) in &rs.clusters.bulk {
            for c in cs {
                out.push(("bulk", *m as u64, vec![tag(rs, c)]));
            }
        }
        for (k, cs) in &rs.clusters.side {
            for c in cs {
                out.push(("side", *k as u64, vec![tag(rs, c)]));
            }
        }
        for ((m, side), cs) in &rs.clusters.boundary {
            for c in cs {
                out.push(("boundary", (*m as u64) * 16 + *side as u64, vec![tag(rs, c)]));
            }
        }
        for (k, pairs) in &rs.clusters.interface {
            for p in pairs {
                out.push(("interface", *k as u64, vec![tag(rs, &p.leader), tag(rs, &p.follower)]));
            }
        }
        for (m, pairs) in &rs.clusters.ghost {
            for p in pairs {
                out.push(("ghost", *m as u64, vec![tag(rs, &p.leader), tag(rs, &p.follower)]));
            }
        }
    }
    out.sort();
    out
}
