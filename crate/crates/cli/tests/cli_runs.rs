//! End-to-end checks of the configured pipeline runs and exporters.

use cutmesh_cli::config::RunConfig;
use cutmesh_cli::{execute, export, stage_plan, CliOverrides};
use cutmesh::parallel::run_pipeline;
use std::path::Path;

const CIRCLE: &str = r#"
[mesh]
dim = 2
elements = [10, 10]
origin = [0.0, 0.0]
h = [0.2, 0.2]
degree = 2

[[geometry]]
kind = "circle"
center = [1.0, 1.0]
radius = 0.6

[materials]
void = [1]

[run]
ranks = [1]
seed = 3
"#;

const EMPTY_GEOMETRY: &str = r#"
[mesh]
dim = 2
elements = [2, 2]
origin = [0.0, 0.0]
h = [0.5, 0.5]
degree = 1
"#;

fn run_cfg(text: &str) -> (RunConfig, cutmesh::parallel::ParallelRun) {
    let cfg = RunConfig::parse(text).unwrap();
    let input = cfg.pipeline_input(Path::new(".")).unwrap();
    let run = run_pipeline(&input, cfg.rank_grid()).unwrap();
    (cfg, run)
}

#[test]
fn empty_geometry_list_copies_the_background_mesh() {
    let (_, run) = run_cfg(EMPTY_GEOMETRY);
    let rs = &run.ranks[0];
    assert_eq!(rs.fg.num_cells(), 4);
    assert_eq!(rs.topo.subphases.len(), 4);
    let bulk: usize = rs.clusters.bulk.values().map(Vec::len).sum();
    assert_eq!(bulk, 4);
    assert!(rs.clusters.interface.is_empty());
    assert!(rs.clusters.ghost.is_empty());
    // Exported mesh keeps the quad cells.
    let vtk = export::foreground_vtk(&run).unwrap();
    let types: Vec<&str> = vtk
        .lines()
        .skip_while(|l| !l.starts_with("CELL_TYPES"))
        .skip(1)
        .take(4)
        .collect();
    assert_eq!(types, vec!["9"; 4], "four VTK quad cells");
}

#[test]
fn circle_run_produces_all_cluster_kinds() {
    let (_, run) = run_cfg(CIRCLE);
    let rs = &run.ranks[0];
    assert!(!rs.clusters.bulk.is_empty());
    assert!(!rs.clusters.side.is_empty());
    assert!(!rs.clusters.ghost.is_empty());
    assert!(!rs.clusters.boundary.is_empty());
    // Solid/void pairing goes to side clusters, not interface pairs.
    assert!(rs.clusters.interface.is_empty());
}

#[test]
fn vtk_export_is_conformant_and_complete() {
    let (_, run) = run_cfg(CIRCLE);
    let vtk = export::foreground_vtk(&run).unwrap();
    let mut lines = vtk.lines();
    assert_eq!(lines.next().unwrap(), "# vtk DataFile Version 3.0");
    assert_eq!(lines.nth(1).unwrap(), "ASCII");
    assert_eq!(lines.next().unwrap(), "DATASET UNSTRUCTURED_GRID");
    let points_line = lines.next().unwrap();
    assert!(points_line.starts_with("POINTS ") && points_line.ends_with(" double"));
    let n_points: usize = points_line.split_whitespace().nth(1).unwrap().parse().unwrap();
    // Every foreground vertex is exported exactly once (serial run: all owned).
    assert_eq!(n_points, run.ranks[0].fg.num_verts());
    assert!(vtk.contains("CELL_TYPES"));
    assert!(vtk.contains("SCALARS material int 1"));
    assert!(vtk.contains("SCALARS subphase int 1"));
    assert!(vtk.contains("SCALARS bg_element int 1"));
    // Cell count consistency between sections.
    let n_cells: usize = vtk
        .lines()
        .find(|l| l.starts_with("CELLS "))
        .unwrap()
        .split_whitespace()
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(n_cells, run.ranks[0].fg.num_cells());
}

#[test]
fn exports_are_deterministic() {
    let (_, run1) = run_cfg(CIRCLE);
    let (_, run2) = run_cfg(CIRCLE);
    assert_eq!(
        export::foreground_vtk(&run1).unwrap(),
        export::foreground_vtk(&run2).unwrap()
    );
    assert_eq!(
        export::clusters_text(&run1).unwrap(),
        export::clusters_text(&run2).unwrap()
    );
    assert_eq!(
        export::stats_text(&run1.stats).replace(char::is_numeric, ""),
        export::stats_text(&run2.stats).replace(char::is_numeric, "")
    );
}

#[test]
fn cluster_dump_format() {
    let (_, run) = run_cfg(CIRCLE);
    let dump = export::clusters_text(&run).unwrap();
    let mut bulk_seen = 0;
    for line in dump.lines() {
        if line.starts_with("cluster bulk") {
            bulk_seen += 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            assert!(fields.len() > 7, "header: {line}");
            assert_eq!(fields[6], "ien");
        }
        if line.starts_with("point") {
            let fields: Vec<&str> = line.split_whitespace().collect();
            // 2D: xi0 xi1 w [nx ny]
            assert!(fields.len() == 4 || fields.len() == 6, "{line}");
            // 17 significant digits.
            assert!(fields[1].contains('e'));
        }
    }
    let total_bulk: usize = run.ranks[0].clusters.bulk.values().map(Vec::len).sum();
    assert_eq!(bulk_seen, total_bulk);
}

#[test]
fn parallel_export_matches_serial_geometry() {
    // IDs are assigned in rank order, so the files differ textually; the
    // geometric content (cells as coordinate multisets with materials)
    // must be identical.
    let cfg = RunConfig::parse(CIRCLE).unwrap();
    let input = cfg.pipeline_input(Path::new(".")).unwrap();
    let cells_of = |grid: [usize; 3]| -> Vec<String> {
        let run = run_pipeline(&input, grid).unwrap();
        let mut out = Vec::new();
        for rs in &run.ranks {
            for (e, el) in rs.bg.elements.iter().enumerate() {
                if el.owner_rank != rs.ctx.rank {
                    continue;
                }
                for &c in &rs.fg.child_meshes[e].cells {
                    let cell = &rs.fg.cells[c];
                    let mut coords: Vec<String> = cell
                        .verts
                        .iter()
                        .map(|&v| format!("{:?}", rs.fg.verts[v].x))
                        .collect();
                    coords.sort();
                    out.push(format!("{} {} {:?}", el.id, cell.material, coords));
                }
            }
        }
        out.sort();
        out
    };
    assert_eq!(cells_of([1, 1, 1]), cells_of([2, 1, 1]));
}

#[test]
fn stats_include_overhead_fields_and_cut_fraction() {
    let (_, run) = run_cfg(CIRCLE);
    let stats = export::stats_text(&run.stats);
    assert!(stats.contains("lambda_loc"));
    assert!(stats.contains("lambda_glob"));
    assert!(stats.contains("intersected_fraction"));
    assert!(stats.contains("seconds_tessellation"));
    // The circle cuts a plausible fraction of the mesh.
    assert!(run.stats.intersected_fraction > 0.05);
    assert!(run.stats.intersected_fraction < 0.6);
}

#[test]
fn sampled_grid_geometry_loads_from_file() {
    let dir = std::env::temp_dir().join("cutmesh_grid_test");
    std::fs::create_dir_all(&dir).unwrap();
    // 33x33 samples of a circle level set on [0,2]^2.
    let n = 33;
    let d = 2.0 / (n - 1) as f64;
    let mut text = format!("2 {n} {n} 0 0 {d} {d}\n");
    for j in 0..n {
        for i in 0..n {
            let (x, y) = (i as f64 * d, j as f64 * d);
            let phi = ((x - 1.0).powi(2) + (y - 1.0).powi(2)).sqrt() - 0.6;
            text.push_str(&format!("{phi} "));
        }
        text.push('\n');
    }
    std::fs::write(dir.join("phi.txt"), text).unwrap();
    let cfg = RunConfig::parse(
        r#"
[mesh]
dim = 2
elements = [10, 10]
origin = [0.0, 0.0]
h = [0.2, 0.2]
degree = 1

[[geometry]]
kind = "grid"
file = "phi.txt"
"#,
    )
    .unwrap();
    let input = cfg.pipeline_input(&dir).unwrap();
    let run = run_pipeline(&input, [1, 1, 1]).unwrap();
    // The sampled circle encloses roughly pi * 0.36 of area in material 0.
    let rs = &run.ranks[0];
    let jac = 0.1 * 0.1;
    let area: f64 = rs.clusters.bulk[&0]
        .iter()
        .map(|c| c.points.iter().map(|p| p.w).sum::<f64>() * jac)
        .sum();
    assert!((area - std::f64::consts::PI * 0.36).abs() < 0.05, "area {area}");
}

#[test]
fn scaffold_density_analog_reports_cut_fraction() {
    // A thin ring on a finer mesh cuts a scaffold-like fraction of the
    // elements (on the order of 13%).
    let text = r#"
[mesh]
dim = 2
elements = [28, 28]
origin = [0.0, 0.0]
h = [0.07142857142857142, 0.07142857142857142]
degree = 2

[[geometry]]
kind = "circle"
center = [1.0, 1.0]
radius = 0.6
"#;
    let (_, run) = run_cfg(text);
    assert!(
        run.stats.intersected_fraction > 0.08 && run.stats.intersected_fraction < 0.20,
        "fraction {}",
        run.stats.intersected_fraction
    );
    let stats = export::stats_text(&run.stats);
    assert!(stats.contains("intersected_fraction"));
}

#[test]
fn dry_run_prints_stage_plan_in_driver_order() {
    let cfg = RunConfig::parse(CIRCLE).unwrap();
    let plan = stage_plan(&cfg);
    let order = [
        "build background mesh",
        "initialize foreground",
        "regular subdivision",
        "templated subdivision",
        "communicate foreground cell",
        "material map",
        "facet connectivity",
        "subphases",
        "unzip",
        "clusters",
        "aura",
    ];
    let mut pos = 0;
    for key in order {
        let found = plan[pos..].find(key).unwrap_or_else(|| panic!("missing {key}"));
        pos += found;
    }
    // Dry run must not execute anything.
    let out = execute(
        &cfg,
        Path::new("."),
        &CliOverrides {
            dry_run: true,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(out.starts_with("plan:"));
}

#[test]
fn solution_export_is_point_data_vtk() {
    let (_, run) = run_cfg(CIRCLE);
    let rs = &run.ranks[0];
    // A constant coefficient vector samples to a constant field on the
    // solid and the export carries one value per foreground vertex.
    let u = vec![1.0; rs.enr.num_enriched()];
    let vtk = export::solution_vtk(rs, &u, 1).unwrap();
    assert!(vtk.contains(&format!("POINT_DATA {}", rs.fg.num_verts())));
    assert!(vtk.contains("SCALARS u double 1"));
    let values: Vec<f64> = vtk
        .lines()
        .skip_while(|l| !l.starts_with("LOOKUP_TABLE"))
        .skip(1)
        .take(rs.fg.num_verts())
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(values.len(), rs.fg.num_verts());
    for v in values {
        assert!((v - 1.0).abs() < 1e-12);
    }
}

#[test]
fn graph_export_and_enriched_table() {
    let (_, run) = run_cfg(CIRCLE);
    let rs = &run.ranks[0];
    let graphs = export::graphs_text(rs);
    assert!(graphs.starts_with("# g_s"));
    assert!(graphs.contains("# g_i"));
    let table = rs.enr.table_text(&rs.bg);
    let first = table.lines().next().unwrap();
    let fields: Vec<&str> = first.split_whitespace().collect();
    assert_eq!(fields.len(), 5, "l B eps owner id");
}
