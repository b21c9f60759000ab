//! Declarative run configuration: a TOML file with a mesh block, an
//! ordered geometry list, material map, quadrature, tolerances, and run
//! options. Parsing and serialization round-trip exactly.

use cutmesh::bg_mesh::GridSpec;
use cutmesh::clusters::QuadratureSpec;
use cutmesh::enrichment::UnzipMode;
use cutmesh::error::{Error, Result};
use cutmesh::geometry::{Geometry, GeometryKind, MaterialMap, SampledLevelSet};
use cutmesh::parallel::PipelineInput;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshConfig,
    #[serde(default, rename = "geometry")]
    pub geometries: Vec<GeometryConfig>,
    #[serde(default)]
    pub materials: MaterialsConfig,
    #[serde(default)]
    pub quadrature: Option<QuadratureConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub run: RunOptions,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub dim: usize,
    pub elements: Vec<usize>,
    pub origin: Vec<f64>,
    pub h: Vec<f64>,
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GeometryConfig {
    Plane { normal: Vec<f64>, offset: f64 },
    Circle { center: Vec<f64>, radius: f64 },
    Sphere { center: Vec<f64>, radius: f64 },
    Grid { file: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialsConfig {
    /// Raw index -> final material; identity when omitted.
    #[serde(default)]
    pub map: Option<Vec<u32>>,
    /// Final material indices treated as void.
    #[serde(default)]
    pub void: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    pub bulk_order: usize,
    pub facet_order: usize,
    pub ghost_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Proximity snap band, relative to the smallest element size.
    pub eps_proximity: f64,
    /// Interface root tolerance in the edge parameter.
    pub eps_root: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eps_proximity: 1e-6,
            eps_root: 1e-13,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    /// Rank grid, one entry per mesh axis (missing axes are 1).
    pub ranks: Vec<usize>,
    pub seed: u64,
    /// Disable the per-support enrichment (single level per basis).
    #[serde(default)]
    pub single_level: bool,
    #[serde(default)]
    pub experiment: Option<String>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            ranks: vec![1],
            seed: 0,
            single_level: false,
            experiment: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub mesh: Option<PathBuf>,
    #[serde(default)]
    pub clusters: Option<PathBuf>,
    #[serde(default)]
    pub stats: Option<PathBuf>,
    #[serde(default)]
    pub graphs: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("config parse error: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn serialize(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("config serialize error: {e}")))
    }

    /// Rank grid padded to three axes.
    pub fn rank_grid(&self) -> [usize; 3] {
        let mut g = [1usize; 3];
        for (k, &r) in self.run.ranks.iter().take(3).enumerate() {
            g[k] = r.max(1);
        }
        g
    }

    /// Materialize the pipeline input: build geometries with absolute
    /// tolerances and validate the material map against the geometry
    /// count.
    pub fn pipeline_input(&self, base_dir: &Path) -> Result<PipelineInput> {
        let m = &self.mesh;
        let spec = GridSpec::new(m.dim, &m.elements, &m.origin, &m.h, m.degree)?;
        let hmin = m.h.iter().cloned().fold(f64::INFINITY, f64::min);
        let snap = self.tolerances.eps_proximity * hmin;
        if snap <= 0.0 {
            return Err(Error::config("eps_proximity must be positive"));
        }
        let fix3 = |v: &[f64], what: &str| -> Result<[f64; 3]> {
            if v.len() != m.dim {
                return Err(Error::config(format!("{what} must have {} entries", m.dim)));
            }
            let mut a = [0.0; 3];
            a[..m.dim].copy_from_slice(v);
            Ok(a)
        };
        let mut geometries = Vec::with_capacity(self.geometries.len());
        for g in &self.geometries {
            let mut geom = match g {
                GeometryConfig::Plane { normal, offset } => {
                    Geometry::plane(fix3(normal, "plane normal")?, *offset, snap)
                }
                GeometryConfig::Circle { center, radius }
                | GeometryConfig::Sphere { center, radius } => {
                    Geometry::sphere(fix3(center, "center")?, *radius, snap)
                }
                GeometryConfig::Grid { file } => {
                    let path = if file.is_absolute() {
                        file.clone()
                    } else {
                        base_dir.join(file)
                    };
                    let ls = SampledLevelSet::load(&path)?;
                    Geometry::new(GeometryKind::Sampled(ls), snap)
                }
            };
            geom.root_tol = self.tolerances.eps_root;
            geometries.push(geom);
        }
        let material_map = match &self.materials.map {
            None => MaterialMap::identity(geometries.len())?,
            Some(table) => MaterialMap::from_table(table.clone(), geometries.len())?,
        };
        for v in &self.materials.void {
            if *v >= material_map.num_final() {
                return Err(Error::config(format!(
                    "void material {v} outside the final material range"
                )));
            }
        }
        let mut input = PipelineInput::new(spec, geometries)?;
        input.material_map = material_map;
        input.void = self.materials.void.iter().copied().collect();
        input.quadrature = self.quadrature.as_ref().map(|q| QuadratureSpec {
            bulk_order: q.bulk_order,
            facet_order: q.facet_order,
            ghost_points: q.ghost_points,
        });
        input.unzip_mode = if self.run.single_level {
            UnzipMode::SingleLevel
        } else {
            UnzipMode::Enriched
        };
        Ok(input)
    }
}

/// Parse a rank grid flag of the form `RX[xRY[xRZ]]`.
pub fn parse_rank_flag(s: &str) -> Result<Vec<usize>> {
    s.split('x')
        .map(|t| {
            t.parse::<usize>()
                .map_err(|e| Error::config(format!("bad rank grid '{s}': {e}")))
        })
        .collect()
}
