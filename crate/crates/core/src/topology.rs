//! Material topology of the foreground mesh: facet connectivity,
//! background-facet descendants, subphases, and the subphase graphs.
//!
//! A subphase is a facet-connected group of same-material foreground
//! cells inside one background element; it is the atomic unit for
//! enrichment and cluster generation. Two graphs over subphases are
//! built: `g_s` connects same-material subphases across background
//! facets, `g_i` connects adjacent but materially disconnected subphases
//! (including all within-element neighbors and coincident interfaces).
//! Everything here is integer arithmetic on ancestry and connectivity.

use crate::bg_mesh::{compute_entity_connectivity, BackgroundMesh, EntityConnectivity};
use crate::error::{Error, Result};
use crate::tessellation::ForegroundMesh;

#[derive(Debug, Clone)]
pub struct Subphase {
    /// Parallel consistent ID; 0 until communicated.
    pub id: u64,
    pub cells: Vec<usize>,
    pub bg_elem: usize,
    /// Position within the element: `u` in `0..n_u(bg_elem)`.
    pub local: usize,
    pub material: u32,
}

#[derive(Debug, Clone)]
pub struct Topology {
    /// Foreground facet connectivity (rank dim-1 over all fg cells).
    pub facets: EntityConnectivity,
    /// Interior background facet -> descendant fg facets lying on it.
    pub descendants: Vec<Vec<usize>>,
    /// Domain-boundary background facet -> descendant fg facets.
    pub boundary_descendants: Vec<Vec<usize>>,
    pub subphases: Vec<Subphase>,
    /// Subphase count per background element.
    pub n_u: Vec<usize>,
    /// Same-material cross-element adjacency.
    pub g_s: Vec<Vec<usize>>,
    /// Different-material (or coincident-interface) adjacency.
    pub g_i: Vec<Vec<usize>>,
}

/// Connected components over `adjacency` where edges only join nodes of
/// equal `labels` value. Component ids are dense from 0, ordered by each
/// component's smallest node index.
pub fn flood_fill(adjacency: &[Vec<usize>], labels: &[u32]) -> Vec<usize> {
    let n = adjacency.len();
    let mut comp = vec![usize::MAX; n];
    let mut next = 0usize;
    let mut stack = Vec::new();
    for seed in 0..n {
        if comp[seed] != usize::MAX {
            continue;
        }
        comp[seed] = next;
        stack.push(seed);
        while let Some(v) = stack.pop() {
            for &w in &adjacency[v] {
                if comp[w] == usize::MAX && labels[w] == labels[v] {
                    comp[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    comp
}

fn add_edge(graph: &mut [Vec<usize>], a: usize, b: usize) {
    if a == b {
        return;
    }
    if !graph[a].contains(&b) {
        graph[a].push(b);
    }
    if !graph[b].contains(&a) {
        graph[b].push(a);
    }
}

impl Topology {
    /// Run the full topology stage: facet connectivity, descendants,
    /// subphases, and subphase graphs.
    pub fn build(fg: &mut ForegroundMesh, bg: &BackgroundMesh) -> Result<Topology> {
        let dim = fg.dim;
        let cell_verts: Vec<&[usize]> =
            fg.cells.iter().map(|c| c.verts.as_slice()).collect();
        let facets = compute_entity_connectivity(cell_verts.iter().copied(), dim, dim - 1);

        let (descendants, boundary_descendants) = compute_bg_facet_descendants(fg, bg, &facets)?;

        let mut topo = Topology {
            facets,
            descendants,
            boundary_descendants,
            subphases: Vec::new(),
            n_u: vec![0; bg.num_elems()],
            g_s: Vec::new(),
            g_i: Vec::new(),
        };
        topo.generate_subphases(fg)?;
        topo.generate_subphase_graphs(fg, bg)?;
        Ok(topo)
    }

    /// Flood-fill the cell dual graph of each child mesh by material and
    /// create one subphase per connected group.
    fn generate_subphases(&mut self, fg: &mut ForegroundMesh) -> Result<()> {
        for cm in &fg.child_meshes {
            let local: Vec<usize> = cm.cells.clone();
            let pos: std::collections::HashMap<usize, usize> =
                local.iter().enumerate().map(|(i, &c)| (c, i)).collect();
            let mut adj = vec![Vec::new(); local.len()];
            for (i, &c) in local.iter().enumerate() {
                for &f in &self.facets.cte[c] {
                    for &other in &self.facets.etc[f] {
                        if other != c {
                            if let Some(&j) = pos.get(&other) {
                                if !adj[i].contains(&j) {
                                    adj[i].push(j);
                                }
                            }
                        }
                    }
                }
            }
            let labels: Vec<u32> = local.iter().map(|&c| fg.cells[c].material).collect();
            let comp = flood_fill(&adj, &labels);
            let n_u = comp.iter().copied().max().map_or(0, |m| m + 1);
            self.n_u[cm.bg_elem] = n_u;
            for u in 0..n_u {
                let cells: Vec<usize> = local
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| comp[*i] == u)
                    .map(|(_, &c)| c)
                    .collect();
                let s = self.subphases.len();
                let material = fg.cells[cells[0]].material;
                for &c in &cells {
                    fg.cells[c].subphase = s;
                }
                self.subphases.push(Subphase {
                    id: 0,
                    cells,
                    bg_elem: cm.bg_elem,
                    local: u,
                    material,
                });
            }
        }

        // Seed g_i with within-element neighbors (always materially
        // disconnected: same-material adjacency merges by flood fill).
        self.g_s = vec![Vec::new(); self.subphases.len()];
        self.g_i = vec![Vec::new(); self.subphases.len()];
        for (f, cells) in self.facets.etc.iter().enumerate() {
            if cells.len() != 2 {
                continue;
            }
            let (c1, c2) = (cells[0], cells[1]);
            if fg.cells[c1].bg_elem != fg.cells[c2].bg_elem {
                continue;
            }
            let (s1, s2) = (fg.cells[c1].subphase, fg.cells[c2].subphase);
            if s1 != s2 {
                debug_assert_ne!(
                    self.subphases[s1].material, self.subphases[s2].material,
                    "same-material neighbors must share a subphase (facet {f})"
                );
                add_edge(&mut self.g_i, s1, s2);
            }
        }
        Ok(())
    }

    /// Complete `g_s` and `g_i` with cross-element connections through
    /// the interior background facets.
    fn generate_subphase_graphs(
        &mut self,
        fg: &ForegroundMesh,
        bg: &BackgroundMesh,
    ) -> Result<()> {
        let dim = fg.dim;
        let bg_facets = bg.entity_conn(dim - 1);
        for (f, elems) in bg_facets.etc.iter().enumerate() {
            if elems.len() != 2 {
                continue; // exterior facet
            }
            let (e1, e2) = (elems[0], elems[1]);
            let uncut1 = fg.child_meshes[e1].cells.len() == 1;
            let uncut2 = fg.child_meshes[e2].cells.len() == 1;
            if uncut1 || uncut2 {
                // Any interface is some distance away: exactly one subphase
                // touches the facet on each side, and materials must match.
                let s1 = self.unique_subphase_at_facet(fg, f, e1)?;
                let s2 = self.unique_subphase_at_facet(fg, f, e2)?;
                if self.subphases[s1].material != self.subphases[s2].material {
                    return Err(Error::invariant(format!(
                        "background facet {f}: uncut neighbors with differing materials"
                    )));
                }
                add_edge(&mut self.g_s, s1, s2);
            } else {
                for &ff in &self.descendants[f] {
                    let cells = &self.facets.etc[ff];
                    if cells.len() != 2 {
                        return Err(Error::invariant(format!(
                            "descendant fg facet {ff} of bg facet {f} is not interior"
                        )));
                    }
                    let (s1, s2) = (fg.cells[cells[0]].subphase, fg.cells[cells[1]].subphase);
                    if self.subphases[s1].material == self.subphases[s2].material {
                        add_edge(&mut self.g_s, s1, s2);
                    } else {
                        // Coincident interface: record as disconnected.
                        add_edge(&mut self.g_i, s1, s2);
                    }
                }
            }
        }
        Ok(())
    }

    /// The unique subphase of element `e` whose cells touch background
    /// facet `f`.
    fn unique_subphase_at_facet(
        &self,
        fg: &ForegroundMesh,
        f: usize,
        e: usize,
    ) -> Result<usize> {
        let mut found: Option<usize> = None;
        for &ff in self.descendants[f].iter() {
            for &c in &self.facets.etc[ff] {
                if fg.cells[c].bg_elem != e {
                    continue;
                }
                let s = fg.cells[c].subphase;
                match found {
                    None => found = Some(s),
                    Some(prev) if prev == s => {}
                    Some(prev) => {
                        return Err(Error::invariant(format!(
                            "background facet {f}: multiple subphases ({prev}, {s}) touch the \
                             uncut-neighbor side of element {e}"
                        )))
                    }
                }
            }
        }
        found.ok_or_else(|| {
            Error::invariant(format!(
                "background facet {f}: no descendant facet touches element {e}"
            ))
        })
    }

    /// Foreground facets separating two subphases, each with the adjacent
    /// cell on either side, traversed in subphase-1 cell order. The order
    /// is stable across ranks because child-mesh cell order is.
    pub fn connecting_facets(
        &self,
        fg: &ForegroundMesh,
        s1: usize,
        s2: usize,
    ) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for &c in &self.subphases[s1].cells {
            for &f in &self.facets.cte[c] {
                let cells = &self.facets.etc[f];
                if cells.len() != 2 {
                    continue;
                }
                let other = if cells[0] == c { cells[1] } else { cells[0] };
                if fg.cells[other].subphase == s2 {
                    out.push((f, c, other));
                }
            }
        }
        out
    }

    /// Debug export of the subphase graphs as adjacency lists, one line
    /// per subphase: `id: neighbor,neighbor,...`.
    pub fn dump_graph(&self, which: &str) -> String {
        let g = if which == "g_s" { &self.g_s } else { &self.g_i };
        let mut out = String::new();
        for (s, nbrs) in g.iter().enumerate() {
            let mut sorted = nbrs.clone();
            sorted.sort_unstable();
            let list: Vec<String> = sorted.iter().map(|n| n.to_string()).collect();
            out.push_str(&format!("{s}: {}\n", list.join(",")));
        }
        out
    }
}

/// For every foreground facet, intersect the background cells containing
/// each vertex's ancestor. Exactly two cells mean the facet lies on an
/// interior background facet; one cell plus boundary containment means it
/// lies on the domain boundary.
fn compute_bg_facet_descendants(
    fg: &ForegroundMesh,
    bg: &BackgroundMesh,
    facets: &EntityConnectivity,
) -> Result<(Vec<Vec<usize>>, Vec<Vec<usize>>)> {
    let dim = fg.dim;
    let bg_facets = bg.entity_conn(dim - 1);
    let num_bg_facets = bg_facets.num_entities();
    let mut desc = vec![Vec::new(); num_bg_facets];
    let mut bdesc = vec![Vec::new(); num_bg_facets];

    for (ff, fverts) in facets.entity_verts.iter().enumerate() {
        let mut common: Option<Vec<usize>> = None;
        for &v in fverts {
            let (r, a) = fg.verts[v].ancestry;
            let cells = bg.cells_on_entity(r as usize, a);
            common = Some(match common {
                None => cells,
                Some(prev) => prev.into_iter().filter(|c| cells.contains(c)).collect(),
            });
            if common.as_ref().is_some_and(|c| c.is_empty()) {
                break;
            }
        }
        let common = common.unwrap_or_default();
        match common.len() {
            2 => {
                let shared: Vec<usize> = bg_facets.cte[common[0]]
                    .iter()
                    .filter(|f| bg_facets.cte[common[1]].contains(f))
                    .copied()
                    .collect();
                if shared.len() != 1 {
                    return Err(Error::invariant(format!(
                        "elements {} and {} share {} facets",
                        common[0],
                        common[1],
                        shared.len()
                    )));
                }
                desc[shared[0]].push(ff);
            }
            1 => {
                // Boundary descendant if every vertex ancestor lies in the
                // closure of one exterior facet of that element.
                let e = common[0];
                for &bf in &bg_facets.cte[e] {
                    if bg_facets.etc[bf].len() != 1 {
                        continue;
                    }
                    let on = fverts.iter().all(|&v| {
                        let (r, a) = fg.verts[v].ancestry;
                        bg_entity_contains(bg, dim - 1, bf, r as usize, a)
                    });
                    if on {
                        bdesc[bf].push(ff);
                        break;
                    }
                }
            }
            _ => {}
        }
    }
    Ok((desc, bdesc))
}

/// True if background entity `(re, ae)`'s closure contains `(rv, av)`.
pub(crate) fn bg_entity_contains(
    bg: &BackgroundMesh,
    re: usize,
    ae: usize,
    rv: usize,
    av: usize,
) -> bool {
    if rv > re {
        return false;
    }
    if re == rv {
        return ae == av;
    }
    let ev = &bg.entity_conn(re).entity_verts[ae];
    if rv == 0 {
        return ev.contains(&av);
    }
    bg.entity_conn(rv).entity_verts[av]
        .iter()
        .all(|v| ev.contains(v))
}
