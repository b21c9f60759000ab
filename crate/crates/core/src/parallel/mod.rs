//! Simulated distributed execution of the preprocessing pipeline.
//!
//! The background grid is block-partitioned over a rank grid; every rank
//! holds its owned block plus an aura of width `degree`, which guarantees
//! that the support of any basis function partially supported on owned
//! elements lies entirely inside the rank's window. Ranks then run the
//! serial pipeline stages independently and only exchange entity IDs
//! (and, at the very end, enriched IENs of referenced aura elements)
//! through the deterministic in-process transport. The serial run is the
//! special case of one rank.

pub mod ids;
pub mod overhead;
pub mod transport;

pub use overhead::{efficiency, memory_efficiency, OverheadReport};
pub use transport::{Rank, SimTransport};

use crate::bg_mesh::{BackgroundMesh, ElemBox, GridSpec, Ownership};
use crate::clusters::{ClusterSet, QuadratureSpec};
use crate::enrichment::{unzip_interpolation_mesh, Enrichment, UnzipMode};
use crate::error::{Error, Result};
use crate::geometry::{Geometry, MaterialMap};
use crate::tessellation::ForegroundMesh;
use crate::topology::Topology;
use ids::{communicate_ids, IdItem};
use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

/// Per-rank decomposition: owned block, held window, neighbor ranks.
#[derive(Debug, Clone)]
pub struct RankContext {
    pub rank: Rank,
    pub owned: ElemBox,
    pub window: ElemBox,
    pub neighbors: Vec<Rank>,
}

/// Block-partition the element grid and grow each block by the aura
/// width (= basis degree), clipped at the domain boundary.
pub fn decompose(spec: &GridSpec, rank_grid: [usize; 3]) -> Result<(Ownership, Vec<RankContext>)> {
    let ownership = Ownership::new(spec, rank_grid)?;
    let nr = ownership.num_ranks();
    let mut contexts = Vec::with_capacity(nr);
    for p in 0..nr as Rank {
        let owned = ownership.owned_box(p);
        let mut window = owned;
        for k in 0..spec.dim {
            window.lo[k] = owned.lo[k].saturating_sub(spec.degree);
            window.hi[k] = (owned.hi[k] + spec.degree).min(spec.elems[k]);
        }
        let mut neighbors = Vec::new();
        for q in 0..nr as Rank {
            if q == p {
                continue;
            }
            let other = ownership.owned_box(q);
            let overlaps = (0..spec.dim)
                .all(|k| other.hi[k] > window.lo[k] && other.lo[k] < window.hi[k]);
            if overlaps {
                neighbors.push(q);
            }
        }
        contexts.push(RankContext {
            rank: p,
            owned,
            window,
            neighbors,
        });
    }
    Ok((ownership, contexts))
}

/// Everything the pipeline needs besides the rank grid.
#[derive(Debug, Clone)]
pub struct PipelineInput {
    pub spec: GridSpec,
    pub geometries: Vec<Geometry>,
    pub material_map: MaterialMap,
    pub void: BTreeSet<u32>,
    pub quadrature: Option<QuadratureSpec>,
    pub unzip_mode: UnzipMode,
}

impl PipelineInput {
    pub fn new(spec: GridSpec, geometries: Vec<Geometry>) -> Result<Self> {
        let map = MaterialMap::identity(geometries.len())?;
        Ok(PipelineInput {
            spec,
            geometries,
            material_map: map,
            void: BTreeSet::new(),
            quadrature: None,
            unzip_mode: UnzipMode::Enriched,
        })
    }
}

/// Completed per-rank pipeline state.
#[derive(Debug)]
pub struct RankState {
    pub ctx: RankContext,
    pub bg: BackgroundMesh,
    pub fg: ForegroundMesh,
    pub topo: Topology,
    pub enr: Enrichment,
    pub clusters: ClusterSet,
}

#[derive(Debug, Clone)]
pub struct RunStats {
    pub num_ranks: usize,
    /// Global element count (problem size s).
    pub problem_size: u64,
    pub lambda_loc: f64,
    pub lambda_glob: f64,
    pub stage_seconds: Vec<(String, f64)>,
    pub memory_records: u64,
    /// Fraction of owned elements intersected by any geometry.
    pub intersected_fraction: f64,
    pub cells: u64,
    pub subphases: u64,
    pub enriched: u64,
    pub cluster_counts: Vec<(String, u64)>,
}

#[derive(Debug)]
pub struct ParallelRun {
    pub ranks: Vec<RankState>,
    pub stats: RunStats,
    pub transport_log: Vec<transport::LogEntry>,
}

// Identifying payloads (the `identify` operation per entity kind).

/// Foreground cell: (background element ID, local index in child mesh).
pub fn identify_cell(bg: &BackgroundMesh, fg: &ForegroundMesh, c: usize) -> Result<Vec<u64>> {
    let e = fg.cells[c].bg_elem;
    let li = fg.child_meshes[e].cell_local_index(c).ok_or_else(|| {
        Error::invariant(format!("cell {c} missing from its child mesh"))
    })?;
    Ok(vec![bg.elements[e].id, li as u64])
}

/// Foreground vertex: (canonical containing element ID, cell position in
/// that child mesh, vertex ordinal in the cell). The canonical element is
/// the lowest-global-index element containing the vertex's ancestor,
/// derived analytically from the grid; `None` when that element lies
/// outside this rank's window (fringe aura vertices, which need no ID).
pub fn identify_vertex(
    bg: &BackgroundMesh,
    fg: &ForegroundMesh,
    v: usize,
) -> Result<Option<(Vec<u64>, Rank)>> {
    let dim = bg.dim();
    let (r, a) = fg.verts[v].ancestry;
    // Global min corner and extent of the ancestor entity.
    let (gmin, ext) = if (r as usize) == dim {
        (bg.elements[a].global, [1usize; 3])
    } else {
        let verts = &bg.entity_conn(r as usize).entity_verts[a];
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        for &bv in verts {
            let g = bg.vert_global(bv);
            for k in 0..3 {
                lo[k] = lo[k].min(g[k]);
                hi[k] = hi[k].max(g[k]);
            }
        }
        let mut ext = [0usize; 3];
        for k in 0..dim {
            ext[k] = hi[k] - lo[k];
        }
        for k in dim..3 {
            lo[k] = 0;
            ext[k] = 1;
        }
        (lo, ext)
    };
    let mut canon = [0usize; 3];
    for k in 0..3 {
        canon[k] = if ext[k] == 1 {
            gmin[k].min(bg.spec.elems[k] - 1)
        } else {
            gmin[k].max(1) - 1
        };
    }
    let Some(e_local) = bg.elem_local(canon) else {
        return Ok(None);
    };
    let cm = &fg.child_meshes[e_local];
    for (pos, &c) in cm.cells.iter().enumerate() {
        if let Some(ord) = fg.cells[c].verts.iter().position(|&w| w == v) {
            let key = vec![bg.spec.elem_id(canon), pos as u64, ord as u64];
            let owner = bg.elements[e_local].owner_rank;
            return Ok(Some((key, owner)));
        }
    }
    Err(Error::invariant(format!(
        "vertex {v} not found in its canonical child mesh"
    )))
}

/// Subphase: the smallest member cell ID.
pub fn identify_subphase(fg: &ForegroundMesh, topo: &Topology, s: usize) -> Result<Vec<u64>> {
    let id = topo.subphases[s]
        .cells
        .iter()
        .map(|&c| fg.cells[c].id)
        .min()
        .ok_or_else(|| Error::invariant(format!("subphase {s} has no cells")))?;
    if id == 0 {
        return Err(Error::invariant("cell IDs not assigned yet".to_string()));
    }
    Ok(vec![id])
}

/// Enriched basis: (smallest support subphase ID, global basis key).
pub fn identify_enriched(
    bg: &BackgroundMesh,
    topo: &Topology,
    enr: &Enrichment,
    l: usize,
) -> Result<Vec<u64>> {
    let t = &enr.table[l];
    let sid = t
        .subphases
        .iter()
        .map(|&s| topo.subphases[s].id)
        .min()
        .ok_or_else(|| Error::invariant(format!("enriched basis {l} has no subphases")))?;
    if sid == 0 {
        return Err(Error::invariant("subphase IDs not assigned yet".to_string()));
    }
    Ok(vec![sid, bg.basis_key(t.basis)])
}

fn elem_local_by_id(bg: &BackgroundMesh, id: u64) -> Result<usize> {
    let flat = (id - 1) as usize;
    let e0 = bg.spec.elems[0];
    let e1 = bg.spec.elems[1];
    let c = [flat % e0, (flat / e0) % e1, flat / (e0 * e1)];
    bg.elem_local(c)
        .ok_or_else(|| Error::protocol(format!("element id {id} outside window")))
}

fn basis_local_by_key(bg: &BackgroundMesh, key: u64) -> Result<usize> {
    // Invert the global lexicographic flatten within the rank's basis box.
    let nb0 = bg.spec.basis_per_axis(0);
    let nb1 = bg.spec.basis_per_axis(1);
    let flat = key as usize;
    let g = [flat % nb0, (flat / nb0) % nb1, flat / (nb0 * nb1)];
    for li in 0..bg.num_basis() {
        if bg.basis_global(li) == g {
            return Ok(li);
        }
    }
    Err(Error::protocol(format!("basis key {key} outside window")))
}

struct StageClock {
    stages: Vec<(String, f64)>,
    current: Instant,
}

impl StageClock {
    fn new() -> Self {
        StageClock {
            stages: Vec::new(),
            current: Instant::now(),
        }
    }

    fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.stages
            .push((name.to_string(), (now - self.current).as_secs_f64()));
        self.current = now;
    }
}

/// Run the full pipeline on a rank grid. Stages execute per rank in rank
/// order; ID exchanges run between stages. Results are independent of
/// any scheduling since each stage consumes only prior-stage data.
pub fn run_pipeline(input: &PipelineInput, rank_grid: [usize; 3]) -> Result<ParallelRun> {
    let spec = input.spec.clone();
    if input.geometries.len() > 16 {
        return Err(Error::config("at most 16 geometries are supported"));
    }
    let (ownership, contexts) = decompose(&spec, rank_grid)?;
    let nr = contexts.len();
    let quad = input
        .quadrature
        .unwrap_or_else(|| QuadratureSpec::for_degree(spec.degree));
    let n_m = input.material_map.num_final();
    let mut transport = SimTransport::new();
    let mut clock = StageClock::new();

    // Tessellation.
    let mut bgs: Vec<BackgroundMesh> = Vec::with_capacity(nr);
    let mut fgs: Vec<ForegroundMesh> = Vec::with_capacity(nr);
    for ctx in &contexts {
        let bg = BackgroundMesh::build_window(
            spec.clone(),
            ctx.window,
            ctx.owned,
            &ownership,
            ctx.rank,
        )?;
        let mut fg = ForegroundMesh::initialize(&bg);
        fg.regular_subdivision(&bg, &input.geometries)?;
        for g in &input.geometries {
            fg.templated_subdivision(&bg, g)?;
        }
        bgs.push(bg);
        fgs.push(fg);
    }
    clock.lap("tessellation");

    // Cell IDs.
    let mut items: Vec<Vec<IdItem>> = Vec::with_capacity(nr);
    for p in 0..nr {
        let mut per = Vec::with_capacity(fgs[p].num_cells());
        for c in 0..fgs[p].num_cells() {
            let e = fgs[p].cells[c].bg_elem;
            per.push(IdItem {
                owner: bgs[p].elements[e].owner_rank,
                key: identify_cell(&bgs[p], &fgs[p], c)?,
            });
        }
        items.push(per);
    }
    let ids = communicate_ids(&items, &mut transport, |p, key| {
        let bg = &bgs[p as usize];
        let fg = &fgs[p as usize];
        let e = elem_local_by_id(bg, key[0])?;
        fg.child_meshes[e]
            .cells
            .get(key[1] as usize)
            .copied()
            .ok_or_else(|| Error::protocol(format!("no cell {} in element id {}", key[1], key[0])))
    })?;
    for p in 0..nr {
        for (c, id) in ids[p].iter().enumerate() {
            fgs[p].cells[c].id = *id;
        }
    }

    // Vertex IDs (skipping fringe aura vertices whose canonical element
    // lies outside the window).
    let mut items: Vec<Vec<IdItem>> = Vec::with_capacity(nr);
    let mut vert_slots: Vec<Vec<usize>> = Vec::with_capacity(nr);
    for p in 0..nr {
        let mut per = Vec::new();
        let mut slots = Vec::new();
        for v in 0..fgs[p].num_verts() {
            if let Some((key, owner)) = identify_vertex(&bgs[p], &fgs[p], v)? {
                per.push(IdItem { owner, key });
                slots.push(v);
            }
        }
        items.push(per);
        vert_slots.push(slots);
    }
    let vert_index: Vec<HashMap<(u64, u64, u64), usize>> = (0..nr)
        .map(|p| {
            items[p]
                .iter()
                .enumerate()
                .map(|(i, it)| ((it.key[0], it.key[1], it.key[2]), i))
                .collect()
        })
        .collect();
    let ids = communicate_ids(&items, &mut transport, |p, key| {
        vert_index[p as usize]
            .get(&(key[0], key[1], key[2]))
            .copied()
            .ok_or_else(|| Error::protocol(format!("no vertex item for key {key:?}")))
    })?;
    for p in 0..nr {
        for (i, id) in ids[p].iter().enumerate() {
            fgs[p].verts[vert_slots[p][i]].id = *id;
        }
    }

    // Material map, then topology.
    for fg in fgs.iter_mut() {
        fg.apply_material_map(&input.material_map)?;
    }
    let mut topos: Vec<Topology> = Vec::with_capacity(nr);
    for p in 0..nr {
        topos.push(Topology::build(&mut fgs[p], &bgs[p])?);
    }
    clock.lap("topology");

    // Subphase IDs.
    let cell_by_id: Vec<HashMap<u64, usize>> = (0..nr)
        .map(|p| {
            fgs[p]
                .cells
                .iter()
                .enumerate()
                .map(|(c, cell)| (cell.id, c))
                .collect()
        })
        .collect();
    let mut items: Vec<Vec<IdItem>> = Vec::with_capacity(nr);
    for p in 0..nr {
        let mut per = Vec::with_capacity(topos[p].subphases.len());
        for s in 0..topos[p].subphases.len() {
            let e = topos[p].subphases[s].bg_elem;
            per.push(IdItem {
                owner: bgs[p].elements[e].owner_rank,
                key: identify_subphase(&fgs[p], &topos[p], s)?,
            });
        }
        items.push(per);
    }
    let ids = communicate_ids(&items, &mut transport, |p, key| {
        let p = p as usize;
        let c = cell_by_id[p]
            .get(&key[0])
            .copied()
            .ok_or_else(|| Error::protocol(format!("no cell with id {}", key[0])))?;
        Ok(fgs[p].cells[c].subphase)
    })?;
    for p in 0..nr {
        for (s, id) in ids[p].iter().enumerate() {
            topos[p].subphases[s].id = *id;
        }
    }

    // Enrichment: unzip, then enriched-basis IDs.
    let mut enrs: Vec<Enrichment> = Vec::with_capacity(nr);
    for p in 0..nr {
        let enr = unzip_interpolation_mesh(&bgs[p], &topos[p], &ownership, input.unzip_mode)?;
        enr.check_complete(&bgs[p])?;
        enrs.push(enr);
    }
    clock.lap("enrichment");

    let subphase_by_id: Vec<HashMap<u64, usize>> = (0..nr)
        .map(|p| {
            topos[p]
                .subphases
                .iter()
                .enumerate()
                .map(|(s, sp)| (sp.id, s))
                .collect()
        })
        .collect();
    let level_by_pair: Vec<HashMap<(usize, usize), usize>> = (0..nr)
        .map(|p| {
            let mut m = HashMap::new();
            for (l, t) in enrs[p].table.iter().enumerate() {
                for &s in &t.subphases {
                    m.insert((t.basis, s), l);
                }
            }
            m
        })
        .collect();
    let mut items: Vec<Vec<IdItem>> = Vec::with_capacity(nr);
    for p in 0..nr {
        let mut per = Vec::with_capacity(enrs[p].table.len());
        for l in 0..enrs[p].table.len() {
            per.push(IdItem {
                owner: enrs[p].table[l].owner_rank,
                key: identify_enriched(&bgs[p], &topos[p], &enrs[p], l)?,
            });
        }
        items.push(per);
    }
    let ids = communicate_ids(&items, &mut transport, |p, key| {
        let p = p as usize;
        let s = subphase_by_id[p]
            .get(&key[0])
            .copied()
            .ok_or_else(|| Error::protocol(format!("no subphase with id {}", key[0])))?;
        let b = basis_local_by_key(&bgs[p], key[1])?;
        level_by_pair[p]
            .get(&(b, s))
            .copied()
            .ok_or_else(|| {
                Error::protocol(format!("no enrichment level for basis {b} subphase {s}"))
            })
    })?;
    for p in 0..nr {
        for (l, id) in ids[p].iter().enumerate() {
            enrs[p].table[l].id = *id;
        }
    }

    // Clusters, then IEN exchange for referenced aura elements.
    let mut cluster_sets: Vec<ClusterSet> = Vec::with_capacity(nr);
    for p in 0..nr {
        cluster_sets.push(ClusterSet::generate(
            &bgs[p],
            &fgs[p],
            &topos[p],
            &quad,
            &input.void,
            n_m,
        )?);
    }
    clock.lap("clusters");

    exchange_aura_iens(&bgs, &mut enrs, &cluster_sets, &mut transport)?;
    clock.lap("id_exchange");

    // Stats over owned data.
    let mut lambda_loc: f64 = 0.0;
    let (mut held, mut owned_total) = (0u64, 0u64);
    let mut memory_records = 0u64;
    let (mut cells, mut subph, mut enriched, mut cut_owned) = (0u64, 0u64, 0u64, 0u64);
    let mut cluster_counts: std::collections::BTreeMap<String, u64> = Default::default();
    for p in 0..nr {
        let w = contexts[p].window.count() as f64;
        let o = contexts[p].owned.count() as f64;
        lambda_loc = lambda_loc.max(w / o);
        held += w as u64;
        owned_total += o as u64;
        memory_records += (fgs[p].num_verts()
            + fgs[p].num_cells()
            + topos[p].subphases.len()
            + topos[p].g_s.iter().map(Vec::len).sum::<usize>()
            + topos[p].g_i.iter().map(Vec::len).sum::<usize>()
            + enrs[p].table.len()
            + enrs[p].unzipped.iter().map(Vec::len).sum::<usize>()) as u64;
        for (k, v) in cluster_sets[p].counts() {
            *cluster_counts.entry(k.to_string()).or_insert(0) += v as u64;
            memory_records += v as u64;
        }
        for (e, el) in bgs[p].elements.iter().enumerate() {
            if el.owner_rank == p as Rank {
                cells += fgs[p].child_meshes[e].cells.len() as u64;
                subph += topos[p].n_u[e] as u64;
                if fgs[p].intersected[e] {
                    cut_owned += 1;
                }
            }
        }
        enriched += enrs[p]
            .table
            .iter()
            .filter(|t| t.owner_rank == p as Rank)
            .count() as u64;
    }
    let stats = RunStats {
        num_ranks: nr,
        problem_size: spec.num_elems_total() as u64,
        lambda_loc,
        lambda_glob: held as f64 / owned_total as f64,
        stage_seconds: clock.stages,
        memory_records,
        intersected_fraction: cut_owned as f64 / spec.num_elems_total() as f64,
        cells,
        subphases: subph,
        enriched,
        cluster_counts: cluster_counts.into_iter().collect(),
    };

    let ranks = contexts
        .into_iter()
        .zip(bgs)
        .zip(fgs)
        .zip(topos)
        .zip(enrs)
        .zip(cluster_sets)
        .map(|(((((ctx, bg), fg), topo), enr), clusters)| RankState {
            ctx,
            bg,
            fg,
            topo,
            enr,
            clusters,
        })
        .collect();

    Ok(ParallelRun {
        ranks,
        stats,
        transport_log: transport.log,
    })
}

/// Serial convenience wrapper: one rank owning everything.
pub fn run_serial(input: &PipelineInput) -> Result<RankState> {
    let mut run = run_pipeline(input, [1, 1, 1])?;
    Ok(run.ranks.remove(0))
}

/// Fill the enriched-ID IENs of aura unzipped elements that appear in
/// cross-rank cluster pairs.
fn exchange_aura_iens(
    bgs: &[BackgroundMesh],
    enrs: &mut [Enrichment],
    clusters: &[ClusterSet],
    transport: &mut SimTransport,
) -> Result<()> {
    use transport::tag;
    let nr = bgs.len();
    // Collect referenced non-owned (element, u) pairs per rank.
    let mut wanted: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nr];
    for p in 0..nr {
        let mut seen = BTreeSet::new();
        let mut note = |e: usize, u: usize| {
            if !bgs[p].is_owned(e) {
                seen.insert((e, u));
            }
        };
        for pairs in clusters[p].interface.values().chain(clusters[p].ghost.values()) {
            for pair in pairs {
                note(pair.leader.bg_elem, pair.leader.u);
                note(pair.follower.bg_elem, pair.follower.u);
            }
        }
        for sides in clusters[p].side.values() {
            for c in sides {
                note(c.bg_elem, c.u);
            }
        }
        wanted[p] = seen.into_iter().collect();
    }

    // Requests: (element id, u) per entry, grouped by owner.
    let mut requested: Vec<Vec<Vec<(usize, usize)>>> = vec![vec![Vec::new(); nr]; nr];
    for p in 0..nr {
        let mut payload: Vec<Vec<u64>> = vec![Vec::new(); nr];
        for &(e, u) in &wanted[p] {
            let owner = bgs[p].elements[e].owner_rank as usize;
            requested[p][owner].push((e, u));
            payload[owner].extend([bgs[p].elements[e].id, u as u64]);
        }
        for o in 0..nr {
            if o != p {
                transport.send(
                    p as Rank,
                    o as Rank,
                    tag::IEN_REQUEST,
                    transport::encode_u64s(&payload[o]),
                );
            }
        }
    }
    for o in 0..nr {
        for p in 0..nr {
            if p == o {
                continue;
            }
            let req = transport::decode_u64s(&transport.recv(
                p as Rank,
                o as Rank,
                tag::IEN_REQUEST,
            )?)?;
            let mut answer = Vec::new();
            for chunk in req.chunks(2) {
                let e = elem_local_by_id(&bgs[o], chunk[0])?;
                let u = chunk[1] as usize;
                let ids = enrs[o].enriched_ids(e, u).map_err(|err| {
                    Error::protocol(format!(
                        "rank {o} cannot provide IEN for element id {} copy {u}: {err}",
                        chunk[0]
                    ))
                })?;
                answer.push(ids.len() as u64);
                answer.extend(ids);
            }
            transport.send(
                o as Rank,
                p as Rank,
                tag::IEN_ANSWER,
                transport::encode_u64s(&answer),
            );
        }
    }
    for p in 0..nr {
        for o in 0..nr {
            if p == o {
                continue;
            }
            let ans = transport::decode_u64s(&transport.recv(
                o as Rank,
                p as Rank,
                tag::IEN_ANSWER,
            )?)?;
            let mut cursor = 0usize;
            for &(e, u) in &requested[p][o] {
                let len = ans[cursor] as usize;
                cursor += 1;
                let ids = ans[cursor..cursor + len].to_vec();
                cursor += len;
                enrs[p].unzipped[e][u].comm_ids = Some(ids);
            }
            if cursor != ans.len() {
                return Err(Error::protocol("IEN answer length mismatch".to_string()));
            }
        }
    }
    transport.assert_drained()
}
