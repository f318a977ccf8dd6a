//! Polygonal mesh representation, generation, refinement and admissibility
//! checking.
//!
//! A mesh is a set of simple polygonal cells given by counter-clockwise
//! vertex loops. Construction deduplicates edges, computes measures,
//! barycentres, outward unit normals and the cell-to-edge distances
//! `d_{K,sigma}`, and verifies the local admissibility conditions
//! (`d_{K,sigma} > 0` for a cell point strictly inside each cell).
//!
//! Two exact geometric identities hold per cell and are re-verified by
//! [`check_admissibility`]:
//!
//! * `sum_sigma |sigma| d_{K,sigma} = d |K|`
//! * `sum_sigma |sigma| n_{K,sigma} = 0`

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::geometry::{Vec2, DIMF};

/// Relative tolerance for the exact-in-real-arithmetic cell identities.
pub const ADMISSIBILITY_RTOL: f64 = 1e-12;

/// One side of an edge: the incident cell and the edge's position in that
/// cell's edge list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeSide {
    pub cell: usize,
    pub local: usize,
}

/// A mesh edge (a segment in d = 2).
#[derive(Clone, Debug)]
pub struct Edge {
    pub vertices: [usize; 2],
    /// |sigma|, the (d-1)-dimensional measure.
    pub measure: f64,
    /// Barycentre of the edge.
    pub midpoint: Vec2,
    /// First incident cell (always present).
    pub side: EdgeSide,
    /// Second incident cell for interior edges sigma = K|L.
    pub other_side: Option<EdgeSide>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.other_side.is_none()
    }
}

/// A polygonal cell with its precomputed per-edge geometry.
#[derive(Clone, Debug)]
pub struct Cell {
    pub vertices: Vec<usize>,
    /// Edge ids, ordered along the vertex loop.
    pub edges: Vec<usize>,
    /// |K|, the d-dimensional measure.
    pub measure: f64,
    /// The cell point x_K (the barycentre).
    pub centre: Vec2,
    /// Outward unit normals n_{K,sigma}, aligned with `edges`.
    pub normals: Vec<Vec2>,
    /// Distances d_{K,sigma} from x_K to the edge lines, aligned with `edges`.
    pub distances: Vec<f64>,
    /// Cell diameter (largest vertex-to-vertex distance).
    pub diameter: f64,
}

/// Parameters of the structured generator that produced a mesh, kept so
/// [`refine_uniform`] can rebuild the next member of the family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Generator {
    Rect { nx: usize, ny: usize, domain: Rect },
    Perturbed { nx: usize, ny: usize, domain: Rect, amplitude: f64, seed: u64 },
    Tri { nx: usize, ny: usize, domain: Rect },
}

/// An axis-aligned rectangular domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 };

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// An admissible polygonal mesh.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<Vec2>,
    pub edges: Vec<Edge>,
    pub cells: Vec<Cell>,
    pub interior_edges: Vec<usize>,
    pub boundary_edges: Vec<usize>,
    /// Mesh size: the largest cell diameter.
    pub h: f64,
    /// Sum of cell measures.
    pub total_measure: f64,
    /// Prefix sums of the cells' edge counts; flat index of the (cell, edge)
    /// incidence used by flux fields and pyramid gradients.
    pub incidence_offsets: Vec<usize>,
    pub generator: Option<Generator>,
}

/// Computable mesh-regularity metrics.
#[derive(Clone, Copy, Debug)]
pub struct MeshQuality {
    /// max over (K, sigma) of diam(K) / d_{K,sigma}.
    pub max_diam_over_dist: f64,
    pub max_edges_per_cell: usize,
    pub min_dist: f64,
    pub h: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeshError {
    DegenerateCell { cell: usize },
    InconsistentOrientation { cell: usize },
    /// x_K not strictly inside K, or d_{K,sigma} <= 0.
    CentreOutside { cell: usize, local_edge: usize },
    CollapsedEdge { cell: usize, vertices: [usize; 2] },
    EdgeOverused { cell: usize, vertices: [usize; 2] },
    BadVertexId { cell: usize, vertex: usize },
    NonFiniteVertex { vertex: usize },
    InvariantViolation { cell: usize, detail: String },
    NotStructured,
    BadParameter(&'static str),
}

impl fmt::Display for MeshError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshError::DegenerateCell { cell } => write!(f, "cell {cell} has zero area"),
            MeshError::InconsistentOrientation { cell } => {
                write!(f, "cell {cell} is not counter-clockwise oriented")
            }
            MeshError::CentreOutside { cell, local_edge } => write!(
                f,
                "cell {cell}: centre not strictly inside (d_K,sigma <= 0 at local edge {local_edge})"
            ),
            MeshError::CollapsedEdge { cell, vertices } => {
                write!(f, "cell {cell}: collapsed edge between vertices {} and {}", vertices[0], vertices[1])
            }
            MeshError::EdgeOverused { cell, vertices } => write!(
                f,
                "cell {cell}: edge {}-{} already shared by two cells or repeated with the same orientation",
                vertices[0], vertices[1]
            ),
            MeshError::BadVertexId { cell, vertex } => {
                write!(f, "cell {cell} references unknown vertex {vertex}")
            }
            MeshError::NonFiniteVertex { vertex } => write!(f, "vertex {vertex} has non-finite coordinates"),
            MeshError::InvariantViolation { cell, detail } => {
                write!(f, "cell {cell}: admissibility violation: {detail}")
            }
            MeshError::NotStructured => {
                write!(f, "mesh has no generator metadata; uniform refinement needs a structured origin")
            }
            MeshError::BadParameter(what) => write!(f, "bad parameter: {what}"),
        }
    }
}

impl Mesh {
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Total number of (cell, edge) incidences.
    pub fn n_incidences(&self) -> usize {
        *self.incidence_offsets.last().unwrap()
    }

    /// Flat index of the (cell, local edge) incidence.
    pub fn incidence(&self, cell: usize, local: usize) -> usize {
        self.incidence_offsets[cell] + local
    }

    /// Measure |sigma| d_{K,sigma} / d of the pyramid with base sigma and
    /// apex x_K.
    pub fn pyramid_measure(&self, cell: usize, local: usize) -> f64 {
        let k = &self.cells[cell];
        self.edges[k.edges[local]].measure * k.distances[local] / DIMF
    }

    /// Barycentre of the pyramid (triangle in d = 2) with base sigma and
    /// apex x_K.
    pub fn pyramid_barycentre(&self, cell: usize, local: usize) -> Vec2 {
        let k = &self.cells[cell];
        let e = &self.edges[k.edges[local]];
        let a = self.vertices[e.vertices[0]];
        let b = self.vertices[e.vertices[1]];
        (k.centre + a + b).scale(1.0 / 3.0)
    }

    /// Index of the cell containing `p`, by point-in-polygon scan.
    pub fn locate(&self, p: Vec2) -> Option<usize> {
        self.cells.iter().position(|k| {
            // winding test against the CCW vertex loop, boundary-inclusive
            let m = k.vertices.len();
            (0..m).all(|i| {
                let a = self.vertices[k.vertices[i]];
                let b = self.vertices[k.vertices[(i + 1) % m]];
                (b - a).x * (p - a).y - (b - a).y * (p - a).x >= -1e-14 * self.h * self.h
            })
        })
    }
}

/// Build a mesh from vertex coordinates and counter-clockwise vertex loops.
pub fn build_mesh(vertices: &[Vec2], cell_vertices: &[Vec<usize>]) -> Result<Mesh, MeshError> {
    for (i, v) in vertices.iter().enumerate() {
        if !v.is_finite() {
            return Err(MeshError::NonFiniteVertex { vertex: i });
        }
    }

    let mut edges: Vec<Edge> = Vec::new();
    let mut edge_lookup: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut cells: Vec<Cell> = Vec::with_capacity(cell_vertices.len());

    for (ci, loop_ids) in cell_vertices.iter().enumerate() {
        if loop_ids.len() < 3 {
            return Err(MeshError::DegenerateCell { cell: ci });
        }
        for &vi in loop_ids {
            if vi >= vertices.len() {
                return Err(MeshError::BadVertexId { cell: ci, vertex: vi });
            }
        }
        let m = loop_ids.len();
        let pts: Vec<Vec2> = loop_ids.iter().map(|&i| vertices[i]).collect();

        // shoelace: positive for CCW loops
        let mut twice_area = 0.0;
        for i in 0..m {
            let a = pts[i];
            let b = pts[(i + 1) % m];
            twice_area += a.x * b.y - b.x * a.y;
        }
        let diameter = {
            let mut d = 0.0f64;
            for i in 0..m {
                for j in (i + 1)..m {
                    d = d.max((pts[i] - pts[j]).norm());
                }
            }
            d
        };
        if twice_area.abs() <= 1e-14 * diameter * diameter {
            return Err(MeshError::DegenerateCell { cell: ci });
        }
        if twice_area < 0.0 {
            return Err(MeshError::InconsistentOrientation { cell: ci });
        }
        let measure = 0.5 * twice_area;

        // polygon centroid
        let mut centre = Vec2::ZERO;
        for i in 0..m {
            let a = pts[i];
            let b = pts[(i + 1) % m];
            let cross = a.x * b.y - b.x * a.y;
            centre += (a + b).scale(cross);
        }
        centre = centre.scale(1.0 / (6.0 * measure));

        let mut cell = Cell {
            vertices: loop_ids.clone(),
            edges: Vec::with_capacity(m),
            measure,
            centre,
            normals: Vec::with_capacity(m),
            distances: Vec::with_capacity(m),
            diameter,
        };

        for i in 0..m {
            let va = loop_ids[i];
            let vb = loop_ids[(i + 1) % m];
            let a = vertices[va];
            let b = vertices[vb];
            let tangent = b - a;
            let len = tangent.norm();
            if len <= 1e-14 * diameter {
                return Err(MeshError::CollapsedEdge { cell: ci, vertices: [va, vb] });
            }
            let key = (va.min(vb), va.max(vb));
            let side = EdgeSide { cell: ci, local: i };
            let eid = match edge_lookup.get(&key) {
                None => {
                    let eid = edges.len();
                    edge_lookup.insert(key, eid);
                    edges.push(Edge {
                        vertices: [va, vb],
                        measure: len,
                        midpoint: (a + b).scale(0.5),
                        side,
                        other_side: None,
                    });
                    eid
                }
                Some(&eid) => {
                    let edge = &mut edges[eid];
                    if edge.other_side.is_some() {
                        return Err(MeshError::EdgeOverused { cell: ci, vertices: [va, vb] });
                    }
                    // a shared edge must be traversed in opposite directions
                    if edge.vertices == [va, vb] {
                        return Err(MeshError::InconsistentOrientation { cell: ci });
                    }
                    edge.other_side = Some(side);
                    eid
                }
            };

            let normal = tangent.rot_cw().scale(1.0 / len);
            let dist = (edges[eid].midpoint - centre).dot(normal);
            if dist <= 0.0 {
                return Err(MeshError::CentreOutside { cell: ci, local_edge: i });
            }
            cell.edges.push(eid);
            cell.normals.push(normal);
            cell.distances.push(dist);
        }
        cells.push(cell);
    }

    let mut interior_edges = Vec::new();
    let mut boundary_edges = Vec::new();
    for (ei, e) in edges.iter().enumerate() {
        if e.is_boundary() {
            boundary_edges.push(ei);
        } else {
            interior_edges.push(ei);
        }
    }

    let mut incidence_offsets = Vec::with_capacity(cells.len() + 1);
    incidence_offsets.push(0);
    for k in &cells {
        incidence_offsets.push(incidence_offsets.last().unwrap() + k.edges.len());
    }

    let h = cells.iter().map(|k| k.diameter).fold(0.0, f64::max);
    let total_measure: f64 = cells.iter().map(|k| k.measure).sum();

    Ok(Mesh {
        vertices: vertices.to_vec(),
        edges,
        cells,
        interior_edges,
        boundary_edges,
        h,
        total_measure,
        incidence_offsets,
        generator: None,
    })
}

fn grid_vertices(nx: usize, ny: usize, domain: Rect) -> Vec<Vec2> {
    let dx = (domain.x1 - domain.x0) / nx as f64;
    let dy = (domain.y1 - domain.y0) / ny as f64;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Vec2::new(domain.x0 + i as f64 * dx, domain.y0 + j as f64 * dy));
        }
    }
    vertices
}

fn quad_cells(nx: usize, ny: usize) -> Vec<Vec<usize>> {
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            cells.push(vec![vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]);
        }
    }
    cells
}

/// Uniform quadrilateral mesh of an axis-aligned rectangle.
pub fn generate_rect_mesh(nx: usize, ny: usize, domain: Rect) -> Result<Mesh, MeshError> {
    if nx == 0 || ny == 0 {
        return Err(MeshError::BadParameter("nx and ny must be at least 1"));
    }
    let mut mesh = build_mesh(&grid_vertices(nx, ny, domain), &quad_cells(nx, ny))?;
    mesh.generator = Some(Generator::Rect { nx, ny, domain });
    Ok(mesh)
}

/// Split-quad triangular mesh of an axis-aligned rectangle.
pub fn generate_tri_mesh(nx: usize, ny: usize, domain: Rect) -> Result<Mesh, MeshError> {
    if nx == 0 || ny == 0 {
        return Err(MeshError::BadParameter("nx and ny must be at least 1"));
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            cells.push(vec![vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)]);
            cells.push(vec![vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)]);
        }
    }
    let mut mesh = build_mesh(&grid_vertices(nx, ny, domain), &cells)?;
    mesh.generator = Some(Generator::Tri { nx, ny, domain });
    Ok(mesh)
}

// splitmix64: tiny deterministic generator, bit-stable across platforms.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn unit_interval(state: &mut u64) -> f64 {
    (splitmix64(state) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Quadrilateral mesh with interior vertices displaced by a deterministic
/// seeded perturbation of the given amplitude (a fraction of the grid step).
pub fn generate_perturbed_mesh(
    nx: usize,
    ny: usize,
    domain: Rect,
    amplitude: f64,
    seed: u64,
) -> Result<Mesh, MeshError> {
    if nx == 0 || ny == 0 {
        return Err(MeshError::BadParameter("nx and ny must be at least 1"));
    }
    if !(0.0..0.5).contains(&amplitude) {
        return Err(MeshError::BadParameter("amplitude must lie in [0, 0.5)"));
    }
    let dx = (domain.x1 - domain.x0) / nx as f64;
    let dy = (domain.y1 - domain.y0) / ny as f64;
    let mut vertices = grid_vertices(nx, ny, domain);
    let mut state = seed ^ 0xd1b54a32d192ed03;
    for j in 0..=ny {
        for i in 0..=nx {
            // one draw per coordinate and vertex, boundary included, so the
            // stream is independent of which vertices end up perturbed
            let ux = 2.0 * unit_interval(&mut state) - 1.0;
            let uy = 2.0 * unit_interval(&mut state) - 1.0;
            if i > 0 && i < nx && j > 0 && j < ny && amplitude > 0.0 {
                let v = &mut vertices[j * (nx + 1) + i];
                v.x += amplitude * dx * ux;
                v.y += amplitude * dy * uy;
            }
        }
    }
    let mut mesh = build_mesh(&vertices, &quad_cells(nx, ny))?;
    mesh.generator = Some(Generator::Perturbed { nx, ny, domain, amplitude, seed });
    check_admissibility(&mesh)?;
    Ok(mesh)
}

/// Next member of a structured refinement family: h halves, cell count x4.
pub fn refine_uniform(mesh: &Mesh) -> Result<Mesh, MeshError> {
    match mesh.generator {
        Some(Generator::Rect { nx, ny, domain }) => generate_rect_mesh(2 * nx, 2 * ny, domain),
        Some(Generator::Tri { nx, ny, domain }) => generate_tri_mesh(2 * nx, 2 * ny, domain),
        Some(Generator::Perturbed { nx, ny, domain, amplitude, seed }) => {
            generate_perturbed_mesh(2 * nx, 2 * ny, domain, amplitude, seed)
        }
        None => Err(MeshError::NotStructured),
    }
}

/// Verify the per-cell admissibility identities and return quality metrics.
pub fn check_admissibility(mesh: &Mesh) -> Result<MeshQuality, MeshError> {
    let mut max_ratio = 0.0f64;
    let mut max_edges = 0usize;
    let mut min_dist = f64::INFINITY;

    for (ci, k) in mesh.cells.iter().enumerate() {
        max_edges = max_edges.max(k.edges.len());
        let mut measure_sum = 0.0;
        let mut normal_sum = Vec2::ZERO;
        let mut edge_scale = 0.0;
        for (li, &ei) in k.edges.iter().enumerate() {
            let e = &mesh.edges[ei];
            if e.measure <= 0.0 {
                return Err(MeshError::CollapsedEdge { cell: ci, vertices: e.vertices });
            }
            let n = k.normals[li];
            if (n.norm() - 1.0).abs() > ADMISSIBILITY_RTOL {
                return Err(MeshError::InvariantViolation {
                    cell: ci,
                    detail: format!("normal at local edge {li} is not unit"),
                });
            }
            let d = k.distances[li];
            if d <= 0.0 {
                return Err(MeshError::CentreOutside { cell: ci, local_edge: li });
            }
            measure_sum += e.measure * d;
            normal_sum += n.scale(e.measure);
            edge_scale += e.measure;
            max_ratio = max_ratio.max(k.diameter / d);
            min_dist = min_dist.min(d);
        }
        let target = DIMF * k.measure;
        if (measure_sum - target).abs() > ADMISSIBILITY_RTOL * target {
            return Err(MeshError::InvariantViolation {
                cell: ci,
                detail: format!("sum |sigma| d_K,sigma = {measure_sum}, expected d|K| = {target}"),
            });
        }
        if normal_sum.norm() > ADMISSIBILITY_RTOL * edge_scale {
            return Err(MeshError::InvariantViolation {
                cell: ci,
                detail: format!("sum |sigma| n_K,sigma has norm {}", normal_sum.norm()),
            });
        }
    }

    // cell measures must partition the domain when the generator is known
    if let Some(gen) = mesh.generator {
        let area = match gen {
            Generator::Rect { domain, .. }
            | Generator::Perturbed { domain, .. }
            | Generator::Tri { domain, .. } => domain.area(),
        };
        if (mesh.total_measure - area).abs() > ADMISSIBILITY_RTOL * area {
            return Err(MeshError::InvariantViolation {
                cell: usize::MAX,
                detail: format!("cell measures sum to {}, domain area is {area}", mesh.total_measure),
            });
        }
    }

    Ok(MeshQuality { max_diam_over_dist: max_ratio, max_edges_per_cell: max_edges, min_dist, h: mesh.h })
}
