//! The discrete apparatus of the scheme: the hybrid unknown space (one value
//! per cell plus one per edge), flux space, reconstruction, stabilized
//! discrete gradient, interpolation, time grids and difference quotients,
//! norms and bilinear forms.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::geometry::{SymTensor2, Vec2, DIMF};
use crate::mesh::Mesh;

/// An element of the hybrid unknown space: one value per cell and one per
/// edge.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteField {
    pub cell: Vec<f64>,
    pub edge: Vec<f64>,
}

impl DiscreteField {
    pub fn zeros(mesh: &Mesh) -> Self {
        DiscreteField { cell: vec![0.0; mesh.n_cells()], edge: vec![0.0; mesh.n_edges()] }
    }

    pub fn constant(mesh: &Mesh, value: f64) -> Self {
        DiscreteField { cell: vec![value; mesh.n_cells()], edge: vec![value; mesh.n_edges()] }
    }

    pub fn assert_matches(&self, mesh: &Mesh) {
        assert_eq!(self.cell.len(), mesh.n_cells(), "cell value count mismatch");
        assert_eq!(self.edge.len(), mesh.n_edges(), "edge value count mismatch");
    }

    /// Componentwise a*x + y.
    pub fn axpy(&self, a: f64, other: &DiscreteField) -> DiscreteField {
        DiscreteField {
            cell: self.cell.iter().zip(&other.cell).map(|(x, y)| a * x + y).collect(),
            edge: self.edge.iter().zip(&other.edge).map(|(x, y)| a * x + y).collect(),
        }
    }

    pub fn scale(&self, a: f64) -> DiscreteField {
        DiscreteField {
            cell: self.cell.iter().map(|x| a * x).collect(),
            edge: self.edge.iter().map(|x| a * x).collect(),
        }
    }

    /// Shift every cell and edge value by the same constant.
    pub fn shift(&mut self, s: f64) {
        for v in &mut self.cell {
            *v += s;
        }
        for v in &mut self.edge {
            *v += s;
        }
    }
}

/// One value per (cell, edge) incidence; `values[mesh.incidence(cell, local)]`
/// is the flux through that cell's side of the edge.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxField {
    pub values: Vec<f64>,
}

impl FluxField {
    pub fn zeros(mesh: &Mesh) -> Self {
        FluxField { values: vec![0.0; mesh.n_incidences()] }
    }

    pub fn get(&self, mesh: &Mesh, cell: usize, local: usize) -> f64 {
        self.values[mesh.incidence(cell, local)]
    }
}

/// Strictly increasing time nodes 0 = t^0 < ... < t^N = T.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TimeGridError {
    TooFewNodes,
    NotIncreasing { index: usize },
    NonFinite { index: usize },
}

impl fmt::Display for TimeGridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeGridError::TooFewNodes => write!(f, "time grid needs at least two nodes"),
            TimeGridError::NotIncreasing { index } => {
                write!(f, "time nodes must be strictly increasing (node {index})")
            }
            TimeGridError::NonFinite { index } => write!(f, "time node {index} is not finite"),
        }
    }
}

impl TimeGrid {
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self, TimeGridError> {
        if steps == 0 {
            return Err(TimeGridError::TooFewNodes);
        }
        if !(horizon > 0.0) {
            return Err(TimeGridError::NonFinite { index: 1 });
        }
        let nodes = (0..=steps).map(|n| horizon * n as f64 / steps as f64).collect();
        Ok(TimeGrid { nodes })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self, TimeGridError> {
        if nodes.len() < 2 {
            return Err(TimeGridError::TooFewNodes);
        }
        for (i, &t) in nodes.iter().enumerate() {
            if !t.is_finite() {
                return Err(TimeGridError::NonFinite { index: i });
            }
            if i > 0 && t <= nodes[i - 1] {
                return Err(TimeGridError::NotIncreasing { index: i });
            }
        }
        Ok(TimeGrid { nodes })
    }

    pub fn n_steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn node(&self, n: usize) -> f64 {
        self.nodes[n]
    }

    /// delta t^(n-1/2) = t^n - t^(n-1), for n in 1..=N.
    pub fn step(&self, n: usize) -> f64 {
        self.nodes[n] - self.nodes[n - 1]
    }

    pub fn max_step(&self) -> f64 {
        (1..=self.n_steps()).map(|n| self.step(n)).fold(0.0, f64::max)
    }

    pub fn horizon(&self) -> f64 {
        *self.nodes.last().unwrap()
    }
}

/// A time grid together with one discrete field per time level, constant in
/// time on each slab [t^(n-1), t^n).
#[derive(Clone, Debug)]
pub struct SpaceTimeField {
    pub grid: TimeGrid,
    pub levels: Vec<DiscreteField>,
}

impl SpaceTimeField {
    /// Difference quotient (v^n - v^(n-1)) / delta t^(n-1/2), componentwise.
    pub fn time_quotient(&self, n: usize) -> Result<DiscreteField, &'static str> {
        if n == 0 || n > self.grid.n_steps() {
            return Err("time level out of range");
        }
        let dt = self.grid.step(n);
        Ok(self.levels[n].axpy(-1.0, &self.levels[n - 1]).scale(-1.0 / dt))
    }
}

/// Piecewise-constant gradient: one vector per (cell, edge) pyramid.
#[derive(Clone, Debug)]
pub struct PyramidGradient {
    pub values: Vec<Vec2>,
}

/// Integral of the piecewise-constant reconstruction: sum_K |K| v_K.
pub fn integrate_reconstruction(mesh: &Mesh, v: &DiscreteField) -> f64 {
    mesh.cells.iter().zip(&v.cell).map(|(k, &vk)| k.measure * vk).sum()
}

/// Value of the reconstruction at a point (the containing cell's value).
pub fn eval_reconstruction(mesh: &Mesh, v: &DiscreteField, p: Vec2) -> Result<f64, &'static str> {
    mesh.locate(p).map(|k| v.cell[k]).ok_or("point outside the meshed domain")
}

/// L2 norm of the reconstruction: (sum_K |K| v_K^2)^(1/2).
pub fn reconstruction_l2_norm(mesh: &Mesh, v: &DiscreteField) -> f64 {
    libm::sqrt(mesh.cells.iter().zip(&v.cell).map(|(k, &vk)| k.measure * vk * vk).sum())
}

/// Cell part of the discrete gradient: (1/|K|) sum_sigma |sigma| v_sigma
/// n_{K,sigma}.
pub fn cell_gradient(mesh: &Mesh, v: &DiscreteField, cell: usize) -> Vec2 {
    let k = &mesh.cells[cell];
    let mut g = Vec2::ZERO;
    for (li, &ei) in k.edges.iter().enumerate() {
        g += k.normals[li].scale(mesh.edges[ei].measure * v.edge[ei]);
    }
    g.scale(1.0 / k.measure)
}

/// The stabilized discrete gradient, per pyramid:
/// `grad_K v + (sqrt(d)/d_{K,sigma}) R_{K,sigma}(v) n_{K,sigma}` with residual
/// `R_{K,sigma}(v) = v_sigma - v_K - grad_K v . (xbar_sigma - x_K)`.
pub fn gradient(mesh: &Mesh, v: &DiscreteField) -> PyramidGradient {
    v.assert_matches(mesh);
    let sqrt_d = libm::sqrt(DIMF);
    let mut values = Vec::with_capacity(mesh.n_incidences());
    for (ci, k) in mesh.cells.iter().enumerate() {
        let gk = cell_gradient(mesh, v, ci);
        for (li, &ei) in k.edges.iter().enumerate() {
            let e = &mesh.edges[ei];
            let residual = v.edge[ei] - v.cell[ci] - gk.dot(e.midpoint - k.centre);
            values.push(gk + k.normals[li].scale(sqrt_d / k.distances[li] * residual));
        }
    }
    PyramidGradient { values }
}

/// Interpolation of a function onto the hybrid space: cell values by
/// barycentre evaluation, edge values by edge-midpoint evaluation. Exact for
/// affine functions.
pub fn interpolate(mesh: &Mesh, f: impl Fn(Vec2) -> f64) -> DiscreteField {
    DiscreteField {
        cell: mesh.cells.iter().map(|k| f(k.centre)).collect(),
        edge: mesh.edges.iter().map(|e| f(e.midpoint)).collect(),
    }
}

/// Interpolation with per-cell subdivision quadrature for rough data: each
/// cell is fanned into triangles around its centre and every triangle is
/// integrated by the (affine-exact) three-edge-midpoint rule; edges use
/// `subdivisions` equal segments with midpoint evaluation.
pub fn interpolate_subdivided(mesh: &Mesh, f: impl Fn(Vec2) -> f64, subdivisions: usize) -> DiscreteField {
    let nsub = subdivisions.max(1);
    let cell = mesh
        .cells
        .iter()
        .map(|k| {
            let m = k.vertices.len();
            let mut acc = 0.0;
            for i in 0..m {
                let a = mesh.vertices[k.vertices[i]];
                let b = mesh.vertices[k.vertices[(i + 1) % m]];
                let c = k.centre;
                let area = 0.5 * ((a - c).x * (b - c).y - (a - c).y * (b - c).x);
                let quad = (f((a + b).scale(0.5)) + f((b + c).scale(0.5)) + f((c + a).scale(0.5))) / 3.0;
                acc += area * quad;
            }
            acc / k.measure
        })
        .collect();
    let edge = mesh
        .edges
        .iter()
        .map(|e| {
            let a = mesh.vertices[e.vertices[0]];
            let b = mesh.vertices[e.vertices[1]];
            let mut acc = 0.0;
            for s in 0..nsub {
                let t = (s as f64 + 0.5) / nsub as f64;
                acc += f(a + (b - a).scale(t));
            }
            acc / nsub as f64
        })
        .collect();
    DiscreteField { cell, edge }
}

/// L^p norm of a pyramid-wise constant gradient.
pub fn gradient_lp_norm(mesh: &Mesh, g: &PyramidGradient, p: f64) -> Result<f64, &'static str> {
    if !(p >= 1.0) {
        return Err("exponent must be at least 1");
    }
    let mut acc = 0.0;
    for (ci, k) in mesh.cells.iter().enumerate() {
        for li in 0..k.edges.len() {
            let m = mesh.pyramid_measure(ci, li);
            acc += m * libm::pow(g.values[mesh.incidence(ci, li)].norm(), p);
        }
    }
    Ok(libm::pow(acc, 1.0 / p))
}

/// The hybrid-space norm: L2 norm of the reconstruction plus L2 norm of the
/// discrete gradient.
pub fn norm_xd(mesh: &Mesh, v: &DiscreteField) -> f64 {
    let g = gradient(mesh, v);
    reconstruction_l2_norm(mesh, v) + gradient_lp_norm(mesh, &g, 2.0).unwrap()
}

/// Weighted mass bilinear form: sum_K |K| Phi_K v_K w_K.
pub fn mass_form(mesh: &Mesh, phi: &[f64], v: &DiscreteField, w: &DiscreteField) -> f64 {
    mesh.cells
        .iter()
        .enumerate()
        .map(|(ci, k)| k.measure * phi[ci] * v.cell[ci] * w.cell[ci])
        .sum()
}

/// One symmetric tensor per (cell, edge) pyramid.
#[derive(Clone, Debug)]
pub struct PyramidTensors {
    pub values: Vec<SymTensor2>,
}

impl PyramidTensors {
    /// Sample a tensor function at pyramid barycentres with a per-cell
    /// argument (the cell-centred velocity magnitude argument is handled by
    /// the caller's closure).
    pub fn sample(mesh: &Mesh, f: impl Fn(Vec2, usize) -> SymTensor2) -> Result<Self, &'static str> {
        let mut values = Vec::with_capacity(mesh.n_incidences());
        for (ci, k) in mesh.cells.iter().enumerate() {
            for li in 0..k.edges.len() {
                let t = f(mesh.pyramid_barycentre(ci, li), ci);
                if !t.is_spd() {
                    return Err("non-SPD diffusion tensor sample");
                }
                values.push(t);
            }
        }
        Ok(PyramidTensors { values })
    }

    pub fn identity(mesh: &Mesh) -> Self {
        PyramidTensors { values: vec![SymTensor2::identity(); mesh.n_incidences()] }
    }
}

/// Diffusion bilinear form: sum over pyramids of
/// `(|sigma| d_{K,sigma}/d) D_{K,sigma} grad v . grad w`.
pub fn diffusion_form(mesh: &Mesh, tensors: &PyramidTensors, v: &DiscreteField, w: &DiscreteField) -> f64 {
    let gv = gradient(mesh, v);
    let gw = gradient(mesh, w);
    diffusion_form_gradients(mesh, tensors, &gv, &gw)
}

/// Add the diffusion stiffness entries over the stacked unknowns
/// (cells `0..n_cells`, then edges) to a sparse builder: per cell, the local
/// form `sum_q m_q D_q grad(basis_col) . grad(basis_row)` from the stabilized
/// pyramid gradients.
pub fn add_diffusion_entries(mesh: &Mesh, tensors: &PyramidTensors, builder: &mut crate::linalg::CsrBuilder) {
    let n_cells = mesh.n_cells();
    for (ci, cell) in mesh.cells.iter().enumerate() {
        let k = cell.edges.len();
        let grad = local_gradient_basis(mesh, ci);
        let dof = |j: usize| if j == 0 { ci } else { n_cells + cell.edges[j - 1] };
        for row in 0..=k {
            for col in 0..=k {
                let mut acc = 0.0;
                for q in 0..k {
                    let m = mesh.pyramid_measure(ci, q);
                    let d = tensors.values[mesh.incidence(ci, q)];
                    acc += m * d.apply(grad[q * (k + 1) + col]).dot(grad[q * (k + 1) + row]);
                }
                builder.add(dof(row), dof(col), acc);
            }
        }
    }
}

/// Gradient of each local basis function (dof 0 the cell value, dof 1 + s the
/// s-th edge value) on each pyramid of cell `ci`; row-major `[pyramid][dof]`.
pub fn local_gradient_basis(mesh: &Mesh, ci: usize) -> Vec<Vec2> {
    let cell = &mesh.cells[ci];
    let sqrt_d = libm::sqrt(DIMF);
    let k = cell.edges.len();
    let mut grad = vec![Vec2::ZERO; k * (k + 1)];
    for q in 0..k {
        let n_q = cell.normals[q];
        let d_q = cell.distances[q];
        let mid_q = mesh.edges[cell.edges[q]].midpoint;
        grad[q * (k + 1)] = n_q.scale(-sqrt_d / d_q);
        for s in 0..k {
            let e_s = &mesh.edges[cell.edges[s]];
            let gk = cell.normals[s].scale(e_s.measure / cell.measure);
            let mut residual = -gk.dot(mid_q - cell.centre);
            if s == q {
                residual += 1.0;
            }
            grad[q * (k + 1) + 1 + s] = gk + n_q.scale(sqrt_d / d_q * residual);
        }
    }
    grad
}

/// Adjoint of the discrete gradient: given one vector per pyramid, return
/// the field `w_j -> sum_q vecs[q] . (d grad_q / d w_j)`.
pub fn gradient_adjoint(mesh: &Mesh, vecs: &[Vec2]) -> DiscreteField {
    let mut out = DiscreteField::zeros(mesh);
    for (ci, cell) in mesh.cells.iter().enumerate() {
        let k = cell.edges.len();
        let grad = local_gradient_basis(mesh, ci);
        for q in 0..k {
            let v = vecs[mesh.incidence(ci, q)];
            out.cell[ci] += v.dot(grad[q * (k + 1)]);
            for s in 0..k {
                out.edge[cell.edges[s]] += v.dot(grad[q * (k + 1) + 1 + s]);
            }
        }
    }
    out
}

/// Diffusion form from precomputed gradients.
pub fn diffusion_form_gradients(
    mesh: &Mesh,
    tensors: &PyramidTensors,
    gv: &PyramidGradient,
    gw: &PyramidGradient,
) -> f64 {
    let mut acc = 0.0;
    for (ci, k) in mesh.cells.iter().enumerate() {
        for li in 0..k.edges.len() {
            let idx = mesh.incidence(ci, li);
            acc += mesh.pyramid_measure(ci, li) * tensors.values[idx].apply(gv.values[idx]).dot(gw.values[idx]);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CsrBuilder;
    use crate::mesh::{generate_perturbed_mesh, generate_rect_mesh, Rect};
    use alloc::vec;

    #[test]
    fn gradient_is_exact_on_affines() {
        let mesh = generate_perturbed_mesh(5, 4, Rect::UNIT, 0.2, 3).unwrap();
        let b = Vec2::new(0.7, -1.3);
        let v = interpolate(&mesh, |x| 2.0 + b.dot(x));
        let g = gradient(&mesh, &v);
        for gq in &g.values {
            assert!((*gq - b).norm() < 1e-12);
        }
        for ci in 0..mesh.n_cells() {
            assert!((cell_gradient(&mesh, &v, ci) - b).norm() < 1e-12);
        }
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let mesh = generate_perturbed_mesh(4, 4, Rect::UNIT, 0.25, 5).unwrap();
        let g = gradient(&mesh, &DiscreteField::constant(&mesh, 3.5));
        assert!(g.values.iter().all(|gq| gq.norm() < 1e-13));
    }

    #[test]
    fn reconstruction_integral_on_two_by_two() {
        let mesh = generate_rect_mesh(2, 2, Rect::UNIT).unwrap();
        let mut v = DiscreteField::zeros(&mesh);
        v.cell.copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        // four cells of measure 1/4: integral is the plain average
        assert!((integrate_reconstruction(&mesh, &v) - 2.5).abs() < 1e-15);
        assert!((reconstruction_l2_norm(&mesh, &v) - libm::sqrt(30.0 / 4.0)).abs() < 1e-15);
    }

    #[test]
    fn mass_form_is_the_weighted_cell_product() {
        let mesh = generate_rect_mesh(2, 2, Rect::UNIT).unwrap();
        let phi = vec![0.5, 1.0, 1.5, 2.0];
        let mut v = DiscreteField::zeros(&mesh);
        let mut w = DiscreteField::zeros(&mesh);
        v.cell.copy_from_slice(&[1.0, -1.0, 2.0, 0.5]);
        w.cell.copy_from_slice(&[3.0, 2.0, -1.0, 4.0]);
        let expected = 0.25 * (0.5 * 3.0 + 1.0 * -2.0 + 1.5 * -2.0 + 2.0 * 2.0);
        assert!((mass_form(&mesh, &phi, &v, &w) - expected).abs() < 1e-15);
        // symmetry
        assert_eq!(mass_form(&mesh, &phi, &v, &w), mass_form(&mesh, &phi, &w, &v));
    }

    #[test]
    fn diffusion_form_matches_affine_dirichlet_energy() {
        let mesh = generate_perturbed_mesh(6, 6, Rect::UNIT, 0.15, 9).unwrap();
        let b = Vec2::new(1.0, 2.0);
        let v = interpolate(&mesh, |x| b.dot(x));
        let a = diffusion_form(&mesh, &PyramidTensors::identity(&mesh), &v, &v);
        // grad v = b everywhere, so the energy is |Omega| |b|^2 = 5
        assert!((a - 5.0).abs() < 1e-11);
    }

    #[test]
    fn diffusion_matrix_reproduces_the_form() {
        let mesh = generate_perturbed_mesh(3, 3, Rect::UNIT, 0.2, 2).unwrap();
        let tensors = PyramidTensors::sample(&mesh, |x, _| {
            crate::geometry::SymTensor2::isotropic(1.0 + x.x)
        })
        .unwrap();
        let n = mesh.n_cells() + mesh.n_edges();
        let mut builder = CsrBuilder::new(n);
        add_diffusion_entries(&mesh, &tensors, &mut builder);
        let matrix = builder.build();

        let v = interpolate(&mesh, |x| libm::sin(x.x) + x.y * x.y);
        let w = interpolate(&mesh, |x| x.x * x.y);
        let mut stacked = v.cell.clone();
        stacked.extend_from_slice(&v.edge);
        let mut mv = vec![0.0; n];
        matrix.mul_vec(&stacked, &mut mv);
        let quadratic: f64 = mv[..mesh.n_cells()]
            .iter()
            .zip(&w.cell)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            + mv[mesh.n_cells()..].iter().zip(&w.edge).map(|(a, b)| a * b).sum::<f64>();
        let form = diffusion_form(&mesh, &tensors, &v, &w);
        assert!((quadratic - form).abs() < 1e-12 * form.abs().max(1.0));
    }

    #[test]
    fn gradient_adjoint_is_the_weighted_adjoint() {
        let mesh = generate_perturbed_mesh(3, 3, Rect::UNIT, 0.2, 4).unwrap();
        let v = interpolate(&mesh, |x| libm::cos(2.0 * x.x) * x.y + x.x);
        let g = gradient(&mesh, &v);
        // vecs_q = m_q y_q for an arbitrary smooth vector field y
        let mut vecs = Vec::new();
        for (ci, cell) in mesh.cells.iter().enumerate() {
            for li in 0..cell.edges.len() {
                let p = mesh.pyramid_barycentre(ci, li);
                let y = Vec2::new(p.y, libm::sin(p.x));
                vecs.push(y.scale(mesh.pyramid_measure(ci, li)));
            }
        }
        let lhs: f64 = g
            .values
            .iter()
            .zip(&vecs)
            .map(|(gq, yq)| gq.dot(*yq))
            .sum();
        let adj = gradient_adjoint(&mesh, &vecs);
        let rhs: f64 = adj.cell.iter().zip(&v.cell).map(|(a, b)| a * b).sum::<f64>()
            + adj.edge.iter().zip(&v.edge).map(|(a, b)| a * b).sum::<f64>();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn time_grid_uniform_and_nodes() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        assert_eq!(grid.n_steps(), 4);
        assert!((grid.node(0) - 0.0).abs() < 1e-15);
        assert!((grid.node(4) - 1.0).abs() < 1e-15);
        assert!((grid.step(2) - 0.25).abs() < 1e-15);
        assert!((grid.horizon() - 1.0).abs() < 1e-15);
        assert!(TimeGrid::uniform(0.0, 4).is_err());
        assert!(TimeGrid::uniform(1.0, 0).is_err());
        assert!(TimeGrid::from_nodes(vec![0.0, 0.5, 0.4]).is_err());
    }

    #[test]
    fn time_quotient_of_linear_history_is_the_slope() {
        let mesh = generate_rect_mesh(2, 2, Rect::UNIT).unwrap();
        let grid = TimeGrid::uniform(1.0, 2).unwrap();
        let levels = vec![
            DiscreteField::constant(&mesh, 0.0),
            DiscreteField::constant(&mesh, 1.5),
            DiscreteField::constant(&mesh, 3.0),
        ];
        let field = SpaceTimeField { grid, levels };
        let q = field.time_quotient(1).unwrap();
        assert!(q.cell.iter().all(|&x| (x - 3.0).abs() < 1e-13));
        assert!(field.time_quotient(0).is_err());
    }

    #[test]
    fn gradient_lp_norm_matches_affine_value() {
        let mesh = generate_rect_mesh(4, 4, Rect::UNIT).unwrap();
        let b = Vec2::new(3.0, 4.0);
        let v = interpolate(&mesh, |x| b.dot(x));
        let g = gradient(&mesh, &v);
        // |grad v| = 5 a.e., so the L^p norm is 5 for every p
        assert!((gradient_lp_norm(&mesh, &g, 2.0).unwrap() - 5.0).abs() < 1e-12);
        assert!((gradient_lp_norm(&mesh, &g, 4.0).unwrap() - 5.0).abs() < 1e-12);
    }
}
