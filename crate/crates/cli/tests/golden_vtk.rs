//! Golden-file conformance check for the VTK exporter.

use cutmesh_cli::config::RunConfig;
use cutmesh_cli::export;
use cutmesh::parallel::run_pipeline;
use std::path::Path;

const UNCUT: &str = r#"
[mesh]
dim = 2
elements = [2, 2]
origin = [0.0, 0.0]
h = [0.5, 0.5]
degree = 1
"#;

#[test]
fn uncut_mesh_matches_golden_file() {
    let cfg = RunConfig::parse(UNCUT).unwrap();
    let input = cfg.pipeline_input(Path::new(".")).unwrap();
    let run = run_pipeline(&input, [1, 1, 1]).unwrap();
    let vtk = export::foreground_vtk(&run).unwrap();
    let golden = include_str!("golden/uncut_2x2.vtk");
    assert_eq!(vtk, golden);
}
