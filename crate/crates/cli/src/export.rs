//! Exporters: legacy VTK unstructured grids, cluster dumps, the
//! subphase-graph debug format, and the run statistics table.

use cutmesh::bg_mesh::CellType;
use cutmesh::clusters::Cluster;
use cutmesh::error::{Error, Result};
use cutmesh::parallel::{ParallelRun, RankState, RunStats};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Legacy VTK unstructured grid of the foreground mesh, merged over the
/// owned elements of every rank. Cell data: material, subphase ID, and
/// background element ID.
pub fn foreground_vtk(run: &ParallelRun) -> Result<String> {
    // Vertices keyed by parallel ID; cells sorted by cell ID.
    let mut points: BTreeMap<u64, [f64; 3]> = BTreeMap::new();
    let mut cells: Vec<(u64, u8, Vec<u64>, u32, u64, u64)> = Vec::new();
    for rs in &run.ranks {
        for (e, el) in rs.bg.elements.iter().enumerate() {
            if el.owner_rank != rs.ctx.rank {
                continue;
            }
            for &c in &rs.fg.child_meshes[e].cells {
                let cell = &rs.fg.cells[c];
                let ty = CellType::from_dim_and_len(rs.fg.dim, cell.verts.len());
                let vtk_type = match ty {
                    CellType::Tri3 => 5,
                    CellType::Quad4 => 9,
                    CellType::Tet4 => 10,
                    CellType::Hex8 => 12,
                };
                let mut ids = Vec::with_capacity(cell.verts.len());
                for &v in &cell.verts {
                    let vid = rs.fg.verts[v].id;
                    if vid == 0 {
                        return Err(Error::invariant(format!(
                            "vertex {v} of owned cell {c} has no parallel ID"
                        )));
                    }
                    points.insert(vid, rs.fg.verts[v].x);
                    ids.push(vid);
                }
                let sid = rs.topo.subphases[cell.subphase].id;
                cells.push((cell.id, vtk_type, ids, cell.material, sid, el.id));
            }
        }
    }
    cells.sort_by_key(|c| c.0);
    let index: BTreeMap<u64, usize> = points.keys().enumerate().map(|(i, &id)| (id, i)).collect();

    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("cutmesh foreground mesh\n");
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", points.len());
    for x in points.values() {
        let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", x[0], x[1], x[2]);
    }
    let list_len: usize = cells.iter().map(|c| c.2.len() + 1).sum();
    let _ = writeln!(out, "CELLS {} {}", cells.len(), list_len);
    for (_, _, ids, ..) in &cells {
        let mut line = format!("{}", ids.len());
        for id in ids {
            let _ = write!(line, " {}", index[id]);
        }
        out.push_str(&line);
        out.push('\n');
    }
    let _ = writeln!(out, "CELL_TYPES {}", cells.len());
    for (_, t, ..) in &cells {
        let _ = writeln!(out, "{t}");
    }
    let _ = writeln!(out, "CELL_DATA {}", cells.len());
    out.push_str("SCALARS material int 1\nLOOKUP_TABLE default\n");
    for (_, _, _, m, ..) in &cells {
        let _ = writeln!(out, "{m}");
    }
    out.push_str("SCALARS subphase int 1\nLOOKUP_TABLE default\n");
    for (_, _, _, _, s, _) in &cells {
        let _ = writeln!(out, "{s}");
    }
    out.push_str("SCALARS bg_element int 1\nLOOKUP_TABLE default\n");
    for (_, _, _, _, _, e) in &cells {
        let _ = writeln!(out, "{e}");
    }
    Ok(out)
}

fn write_cluster(
    out: &mut String,
    rs: &RankState,
    kind: &str,
    bucket: u64,
    c: &Cluster,
) -> Result<()> {
    let ids = rs.enr.enriched_ids(c.bg_elem, c.u)?;
    let mut head = format!(
        "cluster {kind} {bucket} {} {} {} ien",
        rs.bg.elements[c.bg_elem].id,
        c.u,
        c.points.len()
    );
    for id in ids {
        let _ = write!(head, " {id}");
    }
    out.push_str(&head);
    out.push('\n');
    let dim = rs.fg.dim;
    for p in &c.points {
        let mut line = String::from("point");
        for k in 0..dim {
            let _ = write!(line, " {:.16e}", p.xi[k]);
        }
        let _ = write!(line, " {:.16e}", p.w);
        if let Some(n) = p.n {
            for k in 0..dim {
                let _ = write!(line, " {:.16e}", n[k]);
            }
        }
        out.push_str(&line);
        out.push('\n');
    }
    Ok(())
}

/// Line-delimited cluster dump over all ranks, ordered by kind, bucket,
/// element ID, and copy index.
pub fn clusters_text(run: &ParallelRun) -> Result<String> {
    let mut out = String::new();
    out.push_str("# cutmesh clusters v1\n");
    out.push_str("# cluster <kind> <bucket> <element id> <u> <npoints> ien <enriched ids>\n");
    out.push_str("# point <xi...> <w> [<normal...>]   (bulk weights parametric, facet weights physical)\n");

    type Keyed<'a> = (u64, u64, u64, &'a RankState);
    let sort_key = |rs: &RankState, c: &Cluster, bucket: u64| -> (u64, u64, u64) {
        (bucket, rs.bg.elements[c.bg_elem].id, c.u as u64)
    };

    // Singles: bulk, side, boundary.
    for (kind, pick) in [
        ("bulk", 0usize),
        ("side", 1),
        ("boundary", 2),
    ] {
        let mut items: Vec<(Keyed, &Cluster)> = Vec::new();
        for rs in &run.ranks {
            match pick {
                0 => {
                    for (m, cs) in &rs.clusters.bulk {
                        for c in cs {
                            let k = sort_key(rs, c, *m as u64);
                            items.push(((k.0, k.1, k.2, rs), c));
                        }
                    }
                }
                1 => {
                    for (b, cs) in &rs.clusters.side {
                        for c in cs {
                            let k = sort_key(rs, c, *b as u64);
                            items.push(((k.0, k.1, k.2, rs), c));
                        }
                    }
                }
                _ => {
                    let n_m = rs.clusters.num_materials as u64;
                    for (&(m, side), cs) in &rs.clusters.boundary {
                        let bucket = side as u64 * n_m + m as u64 + 1;
                        for c in cs {
                            let k = sort_key(rs, c, bucket);
                            items.push(((k.0, k.1, k.2, rs), c));
                        }
                    }
                }
            }
        }
        items.sort_by_key(|((b, e, u, _), _)| (*b, *e, *u));
        for ((b, _, _, rs), c) in items {
            write_cluster(&mut out, rs, kind, b, c)?;
        }
    }

    // Pairs: interface and ghost.
    for kind in ["interface", "ghost"] {
        let mut items: Vec<((u64, u64, u64), &RankState, &cutmesh::clusters::ClusterPair)> =
            Vec::new();
        for rs in &run.ranks {
            let sets = if kind == "interface" {
                &rs.clusters.interface
            } else {
                &rs.clusters.ghost
            };
            for (b, pairs) in sets {
                for p in pairs {
                    let k = sort_key(rs, &p.leader, *b as u64);
                    items.push((k, rs, p));
                }
            }
        }
        items.sort_by_key(|(k, _, _)| *k);
        for ((b, _, _), rs, p) in items {
            let _ = writeln!(out, "pair {kind} {b}");
            write_cluster(&mut out, rs, kind, b, &p.leader)?;
            write_cluster(&mut out, rs, kind, b, &p.follower)?;
        }
    }
    Ok(out)
}

/// Foreground mesh with a solution field sampled at the vertices (legacy
/// VTK point data). Vertices on material interfaces take the value of
/// their first containing cell's side. Serial runs only.
pub fn solution_vtk(state: &RankState, solution: &[f64], components: usize) -> Result<String> {
    let fg = &state.fg;
    let mut values = vec![vec![0.0; components]; fg.num_verts()];
    let mut have = vec![false; fg.num_verts()];
    for (e, cm) in fg.child_meshes.iter().enumerate() {
        for &c in &cm.cells {
            let cell = &fg.cells[c];
            let ien = state.enr.local_ien(e, state.topo.subphases[cell.subphase].local)?;
            for &v in &cell.verts {
                if have[v] {
                    continue;
                }
                let xi = cm.param_of(v).ok_or_else(|| {
                    Error::invariant(format!("vertex {v} missing from child mesh {e}"))
                })?;
                let ev = state.bg.eval_basis(e, xi, 0)?;
                for (slot, &l) in ien.iter().enumerate() {
                    for k in 0..components {
                        values[v][k] += ev.values[slot] * solution[l * components + k];
                    }
                }
                have[v] = true;
            }
        }
    }

    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("cutmesh solution\n");
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", fg.num_verts());
    for v in &fg.verts {
        let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", v.x[0], v.x[1], v.x[2]);
    }
    let list_len: usize = fg.cells.iter().map(|c| c.verts.len() + 1).sum();
    let _ = writeln!(out, "CELLS {} {}", fg.num_cells(), list_len);
    for c in &fg.cells {
        let mut line = format!("{}", c.verts.len());
        for &v in &c.verts {
            let _ = write!(line, " {v}");
        }
        out.push_str(&line);
        out.push('\n');
    }
    let _ = writeln!(out, "CELL_TYPES {}", fg.num_cells());
    for c in &fg.cells {
        let ty = CellType::from_dim_and_len(fg.dim, c.verts.len());
        let t = match ty {
            CellType::Tri3 => 5,
            CellType::Quad4 => 9,
            CellType::Tet4 => 10,
            CellType::Hex8 => 12,
        };
        let _ = writeln!(out, "{t}");
    }
    let _ = writeln!(out, "POINT_DATA {}", fg.num_verts());
    if components == 1 {
        out.push_str("SCALARS u double 1\nLOOKUP_TABLE default\n");
        for v in &values {
            let _ = writeln!(out, "{:.16e}", v[0]);
        }
    } else {
        out.push_str("VECTORS u double\n");
        for v in &values {
            let _ = writeln!(out, "{:.16e} {:.16e} 0.0", v[0], v[1]);
        }
    }
    Ok(out)
}

/// Subphase graph adjacency dump (`g_s` then `g_i`), serial runs only.
pub fn graphs_text(state: &RankState) -> String {
    let mut out = String::new();
    out.push_str("# g_s\n");
    out.push_str(&state.topo.dump_graph("g_s"));
    out.push_str("# g_i\n");
    out.push_str(&state.topo.dump_graph("g_i"));
    out
}

/// Human-readable run statistics table.
pub fn stats_text(stats: &RunStats) -> String {
    let mut out = String::new();
    out.push_str("# cutmesh run statistics\n");
    out.push_str("# memory figures are retained record counts, not allocator bytes\n");
    let mut row = |k: &str, v: String| {
        let _ = writeln!(out, "{k:<24}: {v}");
    };
    row("ranks", stats.num_ranks.to_string());
    row("elements", stats.problem_size.to_string());
    row(
        "intersected_fraction",
        format!("{:.4}", stats.intersected_fraction),
    );
    row("fg_cells", stats.cells.to_string());
    row("subphases", stats.subphases.to_string());
    row("enriched_basis", stats.enriched.to_string());
    for (k, v) in &stats.cluster_counts {
        row(&format!("clusters_{k}"), v.to_string());
    }
    row("lambda_loc", format!("{:.4}", stats.lambda_loc));
    row("lambda_glob", format!("{:.4}", stats.lambda_glob));
    row("memory_records", stats.memory_records.to_string());
    for (name, secs) in &stats.stage_seconds {
        row(&format!("seconds_{name}"), format!("{secs:.4}"));
    }
    out
}
