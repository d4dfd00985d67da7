//! Spatial discretization of the clamped domain.
//!
//! Balls are reduced to a radial grid `r_i = i h`, `i = 0..=n`, with the
//! boundary at `r_n = R`. Rectangles use a tensor grid with `n` interior
//! nodes per direction plus one boundary layer on every side. Unknowns live on
//! interior nodes only; boundary values of clamped fields are zero.
//!
//! Both operators are stored in weighted form `W A`, where `W` is the diagonal
//! of interior quadrature weights, so every stored matrix is symmetric and the
//! operator is applied as `W^{-1} (W A) x`.
//!
//! The clamped bilaplacian is `K = G^T W_e G`, where `G` maps interior values
//! to the discrete Laplacian on interior *and* boundary nodes (ghost value =
//! mirror value, which encodes the zero normal derivative) and `W_e` are the
//! energy weights. `W^{-1} K` coincides with applying the Laplacian stencil to
//! `G u`, and `u^T K u` is the discrete `||Δu||_2^2`.

use alloc::vec;
use alloc::vec::Vec;

use crate::banded::SymBanded;
use crate::error::{Error, Result};

pub const MIN_RESOLUTION: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Ball { radius: f64 },
    Rectangle { lx: f64, ly: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainDescriptor {
    pub shape: Shape,
    pub dimension: usize,
    /// Interior nodes per direction (radial nodes `0..n` for balls).
    pub resolution: usize,
}

impl DomainDescriptor {
    pub fn ball(dimension: usize, radius: f64, resolution: usize) -> Self {
        Self {
            shape: Shape::Ball { radius },
            dimension,
            resolution,
        }
    }

    pub fn rectangle(lx: f64, ly: f64, resolution: usize) -> Self {
        Self {
            shape: Shape::Rectangle { lx, ly },
            dimension: 2,
            resolution,
        }
    }

    pub fn is_ball(&self) -> bool {
        matches!(self.shape, Shape::Ball { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension < 2 {
            return Err(Error::InvalidDomain("dimension must be at least 2"));
        }
        if self.resolution < MIN_RESOLUTION {
            return Err(Error::InvalidDomain("resolution must be at least 8"));
        }
        match self.shape {
            Shape::Ball { radius } => {
                if !(radius > 0.0) || !radius.is_finite() {
                    return Err(Error::InvalidDomain("ball radius must be positive"));
                }
            }
            Shape::Rectangle { lx, ly } => {
                if self.dimension != 2 {
                    return Err(Error::InvalidDomain(
                        "rectangles are only supported for N = 2",
                    ));
                }
                if !(lx > 0.0 && ly > 0.0) || !(lx.is_finite() && ly.is_finite()) {
                    return Err(Error::InvalidDomain("rectangle sides must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Closed-form `|Ω|`.
    pub fn exact_measure(&self) -> f64 {
        match self.shape {
            Shape::Ball { radius } => {
                let n = self.dimension as f64;
                libm::pow(core::f64::consts::PI, n / 2.0) * libm::pow(radius, n)
                    / libm::tgamma(n / 2.0 + 1.0)
            }
            Shape::Rectangle { lx, ly } => lx * ly,
        }
    }
}

/// Surface measure of the unit sphere in `R^N`.
pub fn unit_sphere_measure(dimension: usize) -> f64 {
    let n = dimension as f64;
    2.0 * libm::pow(core::f64::consts::PI, n / 2.0) / libm::tgamma(n / 2.0)
}

/// Node layout of a discretized domain.
#[derive(Debug, Clone)]
pub struct Grid {
    desc: DomainDescriptor,
    positions: Vec<[f64; 2]>,
    /// Node index of each unknown.
    interior: Vec<usize>,
    /// Unknown index of each node, `None` on the boundary.
    unknown_of: Vec<Option<usize>>,
    hx: f64,
    hy: f64,
}

impl Grid {
    pub fn descriptor(&self) -> &DomainDescriptor {
        &self.desc
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn unknown_count(&self) -> usize {
        self.interior.len()
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn unknown_of(&self, node: usize) -> Option<usize> {
        self.unknown_of[node]
    }

    /// `[r, 0]` on balls, `[x, y]` on rectangles.
    pub fn position(&self, node: usize) -> [f64; 2] {
        self.positions[node]
    }

    /// Mesh spacing (the larger one on anisotropic rectangles).
    pub fn spacing(&self) -> f64 {
        self.hx.max(self.hy)
    }

    pub fn spacings(&self) -> (f64, f64) {
        (self.hx, self.hy)
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> Field {
        Field {
            desc: self.desc,
            values: self.positions.iter().map(|&p| f(p)).collect(),
        }
    }

    /// Samples `f` at interior nodes; boundary values are set to zero.
    pub fn sample_clamped(&self, f: impl Fn([f64; 2]) -> f64) -> Field {
        let mut values = vec![0.0; self.node_count()];
        for &node in &self.interior {
            values[node] = f(self.positions[node]);
        }
        Field {
            desc: self.desc,
            values,
        }
    }

    pub fn field_from_interior(&self, interior: &[f64]) -> Result<Field> {
        if interior.len() != self.unknown_count() {
            return Err(Error::DimensionMismatch {
                expected: self.unknown_count(),
                got: interior.len(),
            });
        }
        let mut values = vec![0.0; self.node_count()];
        for (&node, &v) in self.interior.iter().zip(interior) {
            values[node] = v;
        }
        Ok(Field {
            desc: self.desc,
            values,
        })
    }

    pub fn interior_values(&self, field: &Field) -> Result<Vec<f64>> {
        self.check(field)?;
        Ok(self.interior.iter().map(|&n| field.values[n]).collect())
    }

    fn check(&self, field: &Field) -> Result<()> {
        if field.values.len() != self.node_count() {
            return Err(Error::DimensionMismatch {
                expected: self.node_count(),
                got: field.values.len(),
            });
        }
        Ok(())
    }
}

/// Nodal values over the full grid, boundary nodes included.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub desc: DomainDescriptor,
    pub values: Vec<f64>,
}

impl Field {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            desc: self.desc,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub weights: Vec<f64>,
    /// Sum of the weights, the discrete `|Ω|`.
    pub measure: f64,
}

impl Quadrature {
    fn from_weights(weights: Vec<f64>) -> Self {
        let measure = weights.iter().sum();
        Self { weights, measure }
    }

    fn check(&self, f: &Field) -> Result<()> {
        if f.values.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: f.values.len(),
            });
        }
        Ok(())
    }

    pub fn integrate(&self, f: &Field) -> Result<f64> {
        self.check(f)?;
        Ok(self.weights.iter().zip(&f.values).map(|(w, v)| w * v).sum())
    }

    pub fn inner(&self, f: &Field, g: &Field) -> Result<f64> {
        self.check(f)?;
        self.check(g)?;
        Ok(self
            .weights
            .iter()
            .zip(f.values.iter().zip(&g.values))
            .map(|(w, (a, b))| w * a * b)
            .sum())
    }

    /// `L^r` norm; `r = f64::INFINITY` gives the max norm.
    pub fn norm_lr(&self, f: &Field, r: f64) -> Result<f64> {
        self.check(f)?;
        lr_norm(&self.weights, &f.values, r)
    }
}

/// Weighted `L^r` norm of a plain vector.
pub(crate) fn lr_norm(weights: &[f64], values: &[f64], r: f64) -> Result<f64> {
    if !(r >= 1.0) {
        return Err(Error::InvalidArgument("norm exponent must be at least 1"));
    }
    if r.is_infinite() {
        return Ok(values.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    let s: f64 = weights
        .iter()
        .zip(values)
        .map(|(w, v)| w * libm::pow(v.abs(), r))
        .sum();
    Ok(libm::pow(s, 1.0 / r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Laplacian,
    Bilaplacian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssemblyMode {
    /// Second-order stencil with Dirichlet elimination.
    DirichletStencil,
    /// `G^T W_e G` with ghost reflection at the boundary.
    ClampedSquare,
}

/// A discrete operator stored as the symmetric matrix `W A`.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    kind: OperatorKind,
    assembly: AssemblyMode,
    weighted: SymBanded,
    mass: Vec<f64>,
    spacing: f64,
}

impl DiscreteOperator {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn assembly(&self) -> AssemblyMode {
        self.assembly
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// The symmetric matrix `W A`.
    pub fn weighted_matrix(&self) -> &SymBanded {
        &self.weighted
    }

    /// Interior quadrature weights `W`.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    /// `A x` on interior vectors.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.weighted.apply(x);
        for (yi, w) in y.iter_mut().zip(&self.mass) {
            *yi /= w;
        }
        y
    }

    /// Energy `x^T (W A) x`; equals `||Δ_h x||_2^2` for the bilaplacian.
    pub fn energy(&self, x: &[f64]) -> f64 {
        self.weighted.quad_form(x)
    }
}

/// Sparse rows of the extended Laplacian `G` (one per grid node, indexed by
/// unknown) and the energy weight of each node.
#[derive(Debug, Clone)]
pub struct ExtendedLaplacian {
    rows: Vec<Vec<(usize, f64)>>,
    energy_weights: Vec<f64>,
}

impl ExtendedLaplacian {
    /// `G u` on every node of the grid.
    pub fn apply(&self, interior: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(k, g)| g * interior[k]).sum())
            .collect()
    }

    pub fn energy_weights(&self) -> &[f64] {
        &self.energy_weights
    }

    /// `Σ w_e (G u)²`, the bilaplacian energy as a sum of squares.
    pub fn energy(&self, interior: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.energy_weights)
            .map(|(row, &we)| {
                let g: f64 = row.iter().map(|&(k, g)| g * interior[k]).sum();
                we * g * g
            })
            .sum()
    }
}

/// Builds node layout and quadrature.
pub fn build_domain(desc: &DomainDescriptor) -> Result<(Grid, Quadrature)> {
    desc.validate()?;
    let n = desc.resolution;
    match desc.shape {
        Shape::Ball { radius } => {
            let h = radius / n as f64;
            let positions = (0..=n).map(|i| [i as f64 * h, 0.0]).collect();
            let weights = ball_cell_volumes(desc.dimension, radius, n);
            let mut unknown_of = vec![None; n + 1];
            for (i, u) in unknown_of.iter_mut().take(n).enumerate() {
                *u = Some(i);
            }
            let grid = Grid {
                desc: *desc,
                positions,
                interior: (0..n).collect(),
                unknown_of,
                hx: h,
                hy: h,
            };
            Ok((grid, Quadrature::from_weights(weights)))
        }
        Shape::Rectangle { lx, ly } => {
            let m = n + 2;
            let hx = lx / (n + 1) as f64;
            let hy = ly / (n + 1) as f64;
            let mut positions = Vec::with_capacity(m * m);
            let mut weights = Vec::with_capacity(m * m);
            let mut unknown_of = vec![None; m * m];
            let mut interior = Vec::with_capacity(n * n);
            for j in 0..m {
                for i in 0..m {
                    positions.push([i as f64 * hx, j as f64 * hy]);
                    let edge = |k: usize| if k == 0 || k == m - 1 { 0.5 } else { 1.0 };
                    weights.push(hx * hy * edge(i) * edge(j));
                }
            }
            for j in 1..=n {
                for i in 1..=n {
                    let node = j * m + i;
                    unknown_of[node] = Some(interior.len());
                    interior.push(node);
                }
            }
            let grid = Grid {
                desc: *desc,
                positions,
                interior,
                unknown_of,
                hx,
                hy,
            };
            Ok((grid, Quadrature::from_weights(weights)))
        }
    }
}

/// Exact volumes of the radial cells `[r_i - h/2, r_i + h/2] ∩ [0, R]`; they
/// sum to `|B_R|`.
fn ball_cell_volumes(dimension: usize, radius: f64, n: usize) -> Vec<f64> {
    let h = radius / n as f64;
    let omega = unit_sphere_measure(dimension);
    let nf = dimension as f64;
    let shell = |a: f64, b: f64| omega * (libm::pow(b, nf) - libm::pow(a, nf)) / nf;
    (0..=n)
        .map(|i| {
            let r = i as f64 * h;
            let lo = (r - 0.5 * h).max(0.0);
            let hi = (r + 0.5 * h).min(radius);
            shell(lo, hi)
        })
        .collect()
}

/// Builds the extended Laplacian for the grid.
pub fn extended_laplacian(grid: &Grid, quad: &Quadrature) -> ExtendedLaplacian {
    match grid.desc.shape {
        Shape::Ball { radius } => ball_extended(grid, quad, radius),
        Shape::Rectangle { .. } => rect_extended(grid, quad),
    }
}

fn ball_extended(grid: &Grid, quad: &Quadrature, radius: f64) -> ExtendedLaplacian {
    let n = grid.desc.resolution;
    let dim = grid.desc.dimension;
    let h = grid.hx;
    let omega = unit_sphere_measure(dim);
    // flux coefficient through the face at r_{i+1/2}
    let face = |i: usize| omega * libm::pow((i as f64 + 0.5) * h, (dim - 1) as f64) / h;
    let vol = &quad.weights;
    let mut rows = Vec::with_capacity(n + 1);
    let mut energy_weights = Vec::with_capacity(n + 1);
    for i in 0..n {
        let mut row = Vec::with_capacity(3);
        let right = face(i);
        let left = if i == 0 { 0.0 } else { face(i - 1) };
        row.push((i, -(left + right) / vol[i]));
        if i > 0 {
            row.push((i - 1, left / vol[i]));
        }
        if i + 1 < n {
            row.push((i + 1, right / vol[i]));
        }
        rows.push(row);
        energy_weights.push(vol[i]);
    }
    // Boundary node: u_n = 0 and ghost u_{n+1} = u_{n-1}.
    let full = omega * libm::pow(radius, (dim - 1) as f64) * h;
    let g = (face(n - 1) + face(n)) / full;
    rows.push(vec![(n - 1, g)]);
    // chosen so that W^{-1} G^T W_e G is exactly the stencil applied to G u
    energy_weights.push(face(n - 1) / g);
    ExtendedLaplacian {
        rows,
        energy_weights,
    }
}

fn rect_extended(grid: &Grid, quad: &Quadrature) -> ExtendedLaplacian {
    let n = grid.desc.resolution;
    let m = n + 2;
    let (hx, hy) = (grid.hx, grid.hy);
    let cx = 1.0 / (hx * hx);
    let cy = 1.0 / (hy * hy);
    let unk = |i: usize, j: usize| grid.unknown_of[j * m + i];
    let mut rows = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            let mut row = Vec::new();
            let node = j * m + i;
            if let Some(k) = grid.unknown_of[node] {
                row.push((k, -2.0 * (cx + cy)));
                for (ni, nj, c) in [
                    (i - 1, j, cx),
                    (i + 1, j, cx),
                    (i, j - 1, cy),
                    (i, j + 1, cy),
                ] {
                    if let Some(kk) = unk(ni, nj) {
                        row.push((kk, c));
                    }
                }
            } else {
                // Edge node: the only nonzero contribution is the interior
                // neighbour along the normal, counted twice through its ghost.
                let corner = (i == 0 || i == m - 1) && (j == 0 || j == m - 1);
                if !corner {
                    let (ni, nj, c) = if j == 0 {
                        (i, 1, cy)
                    } else if j == m - 1 {
                        (i, m - 2, cy)
                    } else if i == 0 {
                        (1, j, cx)
                    } else {
                        (m - 2, j, cx)
                    };
                    if let Some(kk) = unk(ni, nj) {
                        row.push((kk, 2.0 * c));
                    }
                }
            }
            rows.push(row);
        }
    }
    ExtendedLaplacian {
        rows,
        energy_weights: quad.weights.clone(),
    }
}

fn bandwidth_of(grid: &Grid) -> usize {
    match grid.desc.shape {
        Shape::Ball { .. } => 2,
        Shape::Rectangle { .. } => 2 * grid.desc.resolution,
    }
}

fn interior_mass(grid: &Grid, quad: &Quadrature) -> Vec<f64> {
    grid.interior.iter().map(|&n| quad.weights[n]).collect()
}

/// Dirichlet Laplacian on interior unknowns.
pub fn assemble_laplacian(grid: &Grid, quad: &Quadrature) -> DiscreteOperator {
    let ext = extended_laplacian(grid, quad);
    let mass = interior_mass(grid, quad);
    let bw = match grid.desc.shape {
        Shape::Ball { .. } => 1,
        Shape::Rectangle { .. } => grid.desc.resolution,
    };
    let mut weighted = SymBanded::zeros(grid.unknown_count(), bw);
    for (k, &node) in grid.interior.iter().enumerate() {
        for &(col, g) in &ext.rows[node] {
            if col <= k {
                weighted.add(k, col, mass[k] * g);
            }
        }
    }
    DiscreteOperator {
        kind: OperatorKind::Laplacian,
        assembly: AssemblyMode::DirichletStencil,
        weighted,
        mass,
        spacing: grid.spacing(),
    }
}

/// Clamped bilaplacian `K = G^T W_e G`.
pub fn assemble_bilaplacian(grid: &Grid, quad: &Quadrature) -> DiscreteOperator {
    let ext = extended_laplacian(grid, quad);
    assemble_bilaplacian_from(grid, quad, &ext)
}

pub fn assemble_bilaplacian_from(
    grid: &Grid,
    quad: &Quadrature,
    ext: &ExtendedLaplacian,
) -> DiscreteOperator {
    let mut weighted = SymBanded::zeros(grid.unknown_count(), bandwidth_of(grid));
    for (row, &we) in ext.rows.iter().zip(&ext.energy_weights) {
        for &(a, ga) in row {
            for &(b, gb) in row {
                if b <= a {
                    weighted.add(a, b, ga * we * gb);
                }
            }
        }
    }
    DiscreteOperator {
        kind: OperatorKind::Bilaplacian,
        assembly: AssemblyMode::ClampedSquare,
        weighted,
        mass: interior_mass(grid, quad),
        spacing: grid.spacing(),
    }
}

/// Everything assembled once per domain.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub grid: Grid,
    pub quad: Quadrature,
    pub laplacian: DiscreteOperator,
    pub bilaplacian: DiscreteOperator,
    pub extended: ExtendedLaplacian,
}

impl Discretization {
    pub fn new(desc: &DomainDescriptor) -> Result<Self> {
        let (grid, quad) = build_domain(desc)?;
        let extended = extended_laplacian(&grid, &quad);
        let laplacian = assemble_laplacian(&grid, &quad);
        let bilaplacian = assemble_bilaplacian_from(&grid, &quad, &extended);
        Ok(Self {
            grid,
            quad,
            laplacian,
            bilaplacian,
            extended,
        })
    }

    pub fn mass(&self) -> &[f64] {
        self.bilaplacian.mass()
    }

    /// `Δ_h u` as a field on all nodes (boundary values included).
    pub fn laplacian_field(&self, interior: &[f64]) -> Field {
        Field {
            desc: *self.grid.descriptor(),
            values: self.extended.apply(interior),
        }
    }

    /// `||Δ_h u||_2^2`.
    pub fn laplacian_energy(&self, interior: &[f64]) -> f64 {
        self.extended.energy(interior)
    }

    /// Weighted inner product of interior vectors.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.mass()
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }

    /// `L^r` norm of an interior vector (boundary values are zero).
    pub fn norm_lr(&self, interior: &[f64], r: f64) -> Result<f64> {
        lr_norm(self.mass(), interior, r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn disk(n: usize) -> Discretization {
        Discretization::new(&DomainDescriptor::ball(2, 1.0, n)).unwrap()
    }

    #[test]
    fn rejects_bad_descriptors() {
        assert!(build_domain(&DomainDescriptor::ball(2, 1.0, 4)).is_err());
        assert!(build_domain(&DomainDescriptor::ball(1, 1.0, 16)).is_err());
        assert!(build_domain(&DomainDescriptor::ball(2, -1.0, 16)).is_err());
        let mut rect = DomainDescriptor::rectangle(1.0, 1.0, 16);
        rect.dimension = 3;
        assert!(build_domain(&rect).is_err());
    }

    #[test]
    fn measures() {
        let (_, q) = build_domain(&DomainDescriptor::rectangle(1.0, 1.0, 16)).unwrap();
        assert!((q.measure - 1.0).abs() < 1e-14);
        let (_, q) = build_domain(&DomainDescriptor::ball(2, 1.0, 64)).unwrap();
        assert!((q.measure - PI).abs() < 1e-12);
        let (_, q) = build_domain(&DomainDescriptor::ball(3, 2.0, 64)).unwrap();
        assert!((q.measure - 4.0 / 3.0 * PI * 8.0).abs() < 1e-10);
        assert!((DomainDescriptor::ball(3, 2.0, 64).exact_measure() - 33.5103).abs() < 1e-4);
        assert!(q.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn constant_field_norms() {
        let (g, q) = build_domain(&DomainDescriptor::rectangle(1.0, 1.0, 12)).unwrap();
        let one = g.sample(|_| 1.0);
        assert!((q.integrate(&one).unwrap() - 1.0).abs() < 1e-14);
        assert!((q.norm_lr(&one, 2.0).unwrap() - 1.0).abs() < 1e-14);
        let (g, q) = build_domain(&DomainDescriptor::ball(2, 1.0, 32)).unwrap();
        let c = g.sample(|_| 3.0);
        let expected = 3.0 * libm::pow(PI, 1.0 / 3.0);
        assert!((q.norm_lr(&c, 3.0).unwrap() - expected).abs() < 1e-12);
        assert_eq!(q.norm_lr(&c, f64::INFINITY).unwrap(), 3.0);
        assert!(q.norm_lr(&c, 0.5).is_err());
    }

    #[test]
    fn cone_integral_converges() {
        let err = |n| {
            let (g, q) = build_domain(&DomainDescriptor::ball(2, 1.0, n)).unwrap();
            (q.integrate(&g.sample(|p| 1.0 - p[0])).unwrap() - PI / 3.0).abs()
        };
        let (e1, e2) = (err(32), err(64));
        assert!(e2 < 1e-3);
        assert!(e1 / e2 > 3.0);
    }

    #[test]
    fn radial_laplacian_of_quadratic_is_exact() {
        for dim in [2usize, 3, 5] {
            let d = Discretization::new(&DomainDescriptor::ball(dim, 1.0, 16)).unwrap();
            let u: Vec<f64> = (0..16)
                .map(|i| 1.0 - libm::pow(i as f64 / 16.0, 2.0))
                .collect();
            let lu = d.laplacian.apply(&u);
            for v in lu {
                assert!((v + 2.0 * dim as f64).abs() < 1e-9, "dim {dim}: {v}");
            }
        }
    }

    #[test]
    fn laplacian_is_zero_on_constants_away_from_boundary() {
        let d = Discretization::new(&DomainDescriptor::rectangle(1.0, 1.0, 10)).unwrap();
        let u = vec![1.0; d.grid.unknown_count()];
        let lu = d.laplacian.apply(&u);
        for (k, &node) in d.grid.interior_nodes().iter().enumerate() {
            let (i, j) = (node % 12, node / 12);
            if (2..=9).contains(&i) && (2..=9).contains(&j) {
                assert!(lu[k].abs() < 1e-9);
            }
        }
    }

    #[test]
    fn bilaplacian_bands() {
        let d = disk(16);
        assert_eq!(d.bilaplacian.kind(), OperatorKind::Bilaplacian);
        assert_eq!(d.bilaplacian.assembly(), AssemblyMode::ClampedSquare);
        assert_eq!(d.bilaplacian.weighted_matrix().bandwidth(), 2);
        let r = Discretization::new(&DomainDescriptor::rectangle(1.0, 2.0, 9)).unwrap();
        assert_eq!(r.bilaplacian.weighted_matrix().bandwidth(), 18);
    }

    #[test]
    fn rectangle_bilaplacian_matches_thirteen_point_stencil() {
        let n = 9;
        let d = Discretization::new(&DomainDescriptor::rectangle(1.0, 1.0, n)).unwrap();
        let h = 1.0 / (n + 1) as f64;
        let k = d.bilaplacian.weighted_matrix();
        let at = |i: usize, j: usize| (j - 1) * n + (i - 1);
        let s = 1.0 / (h * h); // K = W A with W = h^2
        let c = at(5, 5);
        assert!((k.get(c, c) - 20.0 * s).abs() < 1e-9 * s);
        assert!((k.get(c, at(6, 5)) + 8.0 * s).abs() < 1e-9 * s);
        assert!((k.get(c, at(6, 6)) - 2.0 * s).abs() < 1e-9 * s);
        assert!((k.get(c, at(7, 5)) - 1.0 * s).abs() < 1e-9 * s);
        // node next to the boundary picks up the mirrored ghost: 20 + 1
        let e = at(1, 5);
        assert!((k.get(e, e) - 21.0 * s).abs() < 1e-9 * s);
        let corner = at(1, 1);
        assert!((k.get(corner, corner) - 22.0 * s).abs() < 1e-9 * s);
    }

    #[test]
    fn laplacian_field_at_clamped_boundary_uses_reflection() {
        let d = disk(32);
        let u: Vec<f64> = (0..32)
            .map(|i| libm::pow(1.0 - libm::pow(i as f64 / 32.0, 2.0), 2.0))
            .collect();
        let lu = d.laplacian_field(&u);
        // Δu(1) = 8 for (1 - r^2)^2; ghost reflection is first order there
        assert!((lu.values[32] - 8.0).abs() < 0.5);
        assert!((lu.values[0] + 8.0).abs() < 0.05);
    }
}
