//! Rasterized domains, the Dirichlet finite-difference Laplacian, discrete
//! gradients and weighted `L^p` norms.
//!
//! Every domain lives in the box `(0, L_1) × … × (0, L_n)`. Each axis carries
//! `N` lattice points `x_i = i·h`, `h = L/(N+1)`, `i = 1..N`; a lattice point is
//! kept iff it lies in the open domain. Values outside the kept set are zero
//! (Dirichlet extension), so stencil neighbours that fall outside are
//! [`Neighbor::Boundary`].

use std::collections::HashMap;
use std::sync::Arc;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::{weighted_lp, Exponent};

/// Largest spatial dimension the rasterizer supports.
pub const MAX_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Interval,
    Rectangle,
    LShape,
    DiskRaster,
    PuncturedSquare,
}

impl Shape {
    pub fn dim(self) -> usize {
        match self {
            Shape::Interval => 1,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Shape::Interval => "interval",
            Shape::Rectangle => "rectangle",
            Shape::LShape => "l_shape",
            Shape::DiskRaster => "disk_raster",
            Shape::PuncturedSquare => "punctured_square",
        }
    }

    /// The continuum domain class this raster stands in for. A raster cannot
    /// tell these classes apart; the tag is metadata only.
    pub fn intended_class(self) -> &'static str {
        match self {
            Shape::Interval => "bounded smooth (gradient bound for all t > 0)",
            Shape::Rectangle => "bounded convex Lipschitz",
            Shape::LShape => "bounded Lipschitz with reentrant corner",
            Shape::DiskRaster => "bounded C^{2,alpha} (raster approximation)",
            Shape::PuncturedSquare => "exterior-domain proxy (bounded)",
        }
    }

    pub const ALL: [Shape; 5] = [
        Shape::Interval,
        Shape::Rectangle,
        Shape::LShape,
        Shape::DiskRaster,
        Shape::PuncturedSquare,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    #[default]
    None,
    Constant,
    Well,
}

/// Sampled potential `V(x)`.
///
/// `constant` is `V ≡ amplitude`; `well` is `V = -amplitude` on the middle
/// third of the bounding box (every axis) and `0` elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    #[serde(default)]
    pub amplitude: f64,
}

impl PotentialSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn constant(amplitude: f64) -> Self {
        Self {
            kind: PotentialKind::Constant,
            amplitude,
        }
    }

    pub fn well(amplitude: f64) -> Self {
        Self {
            kind: PotentialKind::Well,
            amplitude,
        }
    }

    pub fn is_none(&self) -> bool {
        self.kind == PotentialKind::None
    }

    /// Evaluate the potential at `x` inside a box with the given extents.
    pub fn sample(&self, x: &[f64], extents: &[f64]) -> f64 {
        match self.kind {
            PotentialKind::None => 0.0,
            PotentialKind::Constant => self.amplitude,
            PotentialKind::Well => {
                let inside = x
                    .iter()
                    .zip(extents)
                    .all(|(&xi, &l)| xi > l / 3.0 && xi < 2.0 * l / 3.0);
                if inside {
                    -self.amplitude
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub shape: Shape,
    pub extents: Vec<f64>,
    pub resolution: usize,
    #[serde(default)]
    pub potential: PotentialSpec,
}

impl DomainSpec {
    pub fn interval(length: f64, resolution: usize) -> Self {
        Self {
            shape: Shape::Interval,
            extents: vec![length],
            resolution,
            potential: PotentialSpec::none(),
        }
    }

    pub fn planar(shape: Shape, width: f64, height: f64, resolution: usize) -> Self {
        Self {
            shape,
            extents: vec![width, height],
            resolution,
            potential: PotentialSpec::none(),
        }
    }

    pub fn with_potential(mut self, potential: PotentialSpec) -> Self {
        self.potential = potential;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.shape.dim();
        if self.extents.len() != dim {
            return Err(Error::Domain(format!(
                "{} needs {dim} extents, got {}",
                self.shape.name(),
                self.extents.len()
            )));
        }
        if let Some(bad) = self.extents.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::Domain(format!(
                "extent {bad} is not a positive length"
            )));
        }
        if self.resolution < 3 {
            return Err(Error::Domain(format!(
                "resolution {} below the minimum of 3",
                self.resolution
            )));
        }
        if !self.potential.amplitude.is_finite() {
            return Err(Error::Potential("potential amplitude is not finite".into()));
        }
        Ok(())
    }

    /// Open-set membership of a point of the bounding box.
    fn contains(&self, x: &[f64]) -> bool {
        let l = &self.extents;
        // Lattice points landing on an internal edge belong to that edge.
        let eps = 1e-12 * l.iter().cloned().fold(0.0, f64::max);
        match self.shape {
            Shape::Interval | Shape::Rectangle => true,
            Shape::LShape => !(x[0] >= l[0] / 2.0 - eps && x[1] >= l[1] / 2.0 - eps),
            Shape::DiskRaster => {
                let r = l[0].min(l[1]) / 2.0;
                let dx = x[0] - l[0] / 2.0;
                let dy = x[1] - l[1] / 2.0;
                dx * dx + dy * dy < r * r - eps
            }
            Shape::PuncturedSquare => {
                let in_block =
                    (0..2).all(|d| x[d] >= l[d] / 3.0 - eps && x[d] <= 2.0 * l[d] / 3.0 + eps);
                !in_block
            }
        }
    }
}

/// A stencil neighbour: another interior point, or the zero Dirichlet boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    Interior(usize),
    Boundary,
}

impl Neighbor {
    pub fn index(self) -> Option<usize> {
        match self {
            Neighbor::Interior(i) => Some(i),
            Neighbor::Boundary => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    spec: DomainSpec,
    dim: usize,
    spacing: Vec<f64>,
    cell_measure: f64,
    coords: Vec<f64>,
    lattice: Vec<[usize; MAX_DIM]>,
    /// `stencil[i][d] = [minus, plus]` neighbours of point `i` along axis `d`.
    stencil: Vec<[[Neighbor; 2]; MAX_DIM]>,
}

/// Rasterize a domain spec into a grid.
pub fn build_grid(spec: &DomainSpec) -> Result<Grid> {
    spec.validate()?;
    let dim = spec.shape.dim();
    let n = spec.resolution;
    let spacing: Vec<f64> = spec.extents.iter().map(|l| l / (n as f64 + 1.0)).collect();
    let cell_measure = spacing.iter().product();

    let mut coords = Vec::new();
    let mut lattice = Vec::new();
    let mut index = HashMap::new();
    let total = n.pow(dim as u32);
    for flat in 0..total {
        let mut idx = [0usize; MAX_DIM];
        let mut rest = flat;
        for slot in idx.iter_mut().take(dim) {
            *slot = rest % n + 1;
            rest /= n;
        }
        let x: Vec<f64> = (0..dim).map(|d| idx[d] as f64 * spacing[d]).collect();
        if spec.contains(&x) {
            index.insert(idx, lattice.len());
            lattice.push(idx);
            coords.extend_from_slice(&x);
        }
    }
    if lattice.is_empty() {
        return Err(Error::Domain(format!(
            "{} at resolution {n} has no interior points",
            spec.shape.name()
        )));
    }

    let lookup = |idx: [usize; MAX_DIM]| match index.get(&idx) {
        Some(&i) => Neighbor::Interior(i),
        None => Neighbor::Boundary,
    };
    let stencil = lattice
        .iter()
        .map(|&idx| {
            let mut s = [[Neighbor::Boundary; 2]; MAX_DIM];
            for (d, slot) in s.iter_mut().enumerate().take(dim) {
                let mut minus = idx;
                minus[d] -= 1;
                let mut plus = idx;
                plus[d] += 1;
                *slot = [lookup(minus), lookup(plus)];
            }
            s
        })
        .collect();

    Ok(Grid {
        spec: spec.clone(),
        dim,
        spacing,
        cell_measure,
        coords,
        lattice,
        stencil,
    })
}

impl Grid {
    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn shape(&self) -> Shape {
        self.spec.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Cell measure `w`, the quadrature weight of every point.
    pub fn weight(&self) -> f64 {
        self.cell_measure
    }

    /// Discrete measure of the domain, `len · w`.
    pub fn measure(&self) -> f64 {
        self.len() as f64 * self.cell_measure
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn lattice_index(&self, i: usize) -> &[usize] {
        &self.lattice[i][..self.dim]
    }

    pub fn neighbors(&self, i: usize, axis: usize) -> [Neighbor; 2] {
        self.stencil[i][axis]
    }

    /// Forward difference along `axis` with zero extension past the boundary.
    pub fn forward_difference(&self, values: &[f64], axis: usize) -> Vec<f64> {
        assert_eq!(values.len(), self.len(), "grid function length");
        let inv_h = 1.0 / self.spacing[axis];
        (0..self.len())
            .map(|i| {
                let next = match self.stencil[i][axis][1] {
                    Neighbor::Interior(k) => values[k],
                    Neighbor::Boundary => 0.0,
                };
                (next - values[i]) * inv_h
            })
            .collect()
    }

    /// Backward difference along `axis` with zero extension past the boundary.
    pub fn backward_difference(&self, values: &[f64], axis: usize) -> Vec<f64> {
        assert_eq!(values.len(), self.len(), "grid function length");
        let inv_h = 1.0 / self.spacing[axis];
        (0..self.len())
            .map(|i| {
                let prev = match self.stencil[i][axis][0] {
                    Neighbor::Interior(k) => values[k],
                    Neighbor::Boundary => 0.0,
                };
                (values[i] - prev) * inv_h
            })
            .collect()
    }
}

/// Real values attached to the interior points of a grid.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub(crate) fn from_parts(grid: &Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self::from_parts(grid, vec![0.0; grid.len()])
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        Self::from_parts(grid, vec![c; grid.len()])
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = grid.points().map(f).collect();
        Self::from_parts(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    fn check_grid(&self, other: &GridFunction) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::Grid("grid functions live on different grids".into()))
        }
    }

    fn zip_with(&self, other: &GridFunction, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| op(*a, *b))
            .collect();
        Ok(Self::from_parts(&self.grid, values))
    }

    /// Pointwise product.
    pub fn product(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn sum(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn difference(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_parts(&self.grid, self.values.iter().map(|v| c * v).collect())
    }

    pub(crate) fn add_assign_values(&mut self, other: &[f64]) {
        for (a, b) in self.values.iter_mut().zip(other) {
            *a += b;
        }
    }

    pub fn lp_norm(&self, p: Exponent) -> f64 {
        lp_norm(self, p)
    }
}

/// `(Σ_i |f_i|^p w)^{1/p}`, or `max |f_i|` for `p = ∞`.
pub fn lp_norm(f: &GridFunction, p: Exponent) -> f64 {
    weighted_lp(&f.values, f.grid.weight(), p)
}

/// Per-axis forward differences with Dirichlet zero extension.
pub fn gradient_apply(f: &GridFunction) -> Vec<GridFunction> {
    let grid = f.grid();
    (0..grid.dim())
        .map(|d| GridFunction::from_parts(grid, grid.forward_difference(f.values(), d)))
        .collect()
}

/// `½ Σ_d [(D⁺_d u)² + (D⁻_d u)²]`, the discrete `|∇u|²` for which
/// `H(u²) = 2 (Hu) u − 2 Γ(u)` holds exactly when `H` has no potential.
pub fn carre_du_champ(f: &GridFunction) -> Vec<f64> {
    let grid = f.grid();
    let mut out = vec![0.0; f.len()];
    for d in 0..grid.dim() {
        let fw = grid.forward_difference(f.values(), d);
        let bw = grid.backward_difference(f.values(), d);
        for ((o, a), b) in out.iter_mut().zip(&fw).zip(&bw) {
            *o += 0.5 * (a * a + b * b);
        }
    }
    out
}

/// Pointwise Euclidean dot product of two gradient fields.
pub fn gradient_dot(a: &[GridFunction], b: &[GridFunction]) -> Vec<f64> {
    let n = a[0].len();
    let mut out = vec![0.0; n];
    for (ga, gb) in a.iter().zip(b) {
        for (o, (x, y)) in out.iter_mut().zip(ga.values().iter().zip(gb.values())) {
            *o += x * y;
        }
    }
    out
}

/// Symmetric stencil matrix for `-Δ (+ V)` with zero Dirichlet extension.
#[derive(Debug, Clone)]
pub struct DirichletOperator {
    grid: Arc<Grid>,
    diagonal: Vec<f64>,
    potential: Option<Vec<f64>>,
}

/// Assemble `-Δ + V` on a grid. `potential` is sampled once per point.
pub fn assemble_operator(
    grid: &Arc<Grid>,
    potential: Option<&dyn Fn(&[f64]) -> f64>,
) -> Result<DirichletOperator> {
    let base: f64 = grid.spacing().iter().map(|h| 2.0 / (h * h)).sum();
    let potential = match potential {
        None => None,
        Some(v) => {
            let samples: Vec<f64> = grid.points().map(v).collect();
            if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
                return Err(Error::Potential(format!(
                    "non-finite potential sample {} at point {:?}",
                    samples[i],
                    grid.point(i)
                )));
            }
            Some(samples)
        }
    };
    let diagonal = match &potential {
        None => vec![base; grid.len()],
        Some(v) => v.iter().map(|vi| base + vi).collect(),
    };
    Ok(DirichletOperator {
        grid: Arc::clone(grid),
        diagonal,
        potential,
    })
}

impl DirichletOperator {
    /// Assemble with the potential described by the grid's own spec.
    pub fn from_grid(grid: &Arc<Grid>) -> Result<Self> {
        let potential = grid.spec().potential;
        if potential.is_none() {
            assemble_operator(grid, None)
        } else {
            let extents = grid.spec().extents.clone();
            let sampler = move |x: &[f64]| potential.sample(x, &extents);
            assemble_operator(grid, Some(&sampler))
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.diagonal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagonal.is_empty()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn potential(&self) -> Option<&[f64]> {
        self.potential.as_deref()
    }

    /// Off-diagonal coupling along `axis`, `-1/h²`.
    pub fn coupling(&self, axis: usize) -> f64 {
        let h = self.grid.spacing()[axis];
        -1.0 / (h * h)
    }

    /// Matrix-free product `A v`.
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.len(), "operator input length");
        let grid = &self.grid;
        (0..self.len())
            .map(|i| {
                let mut acc = self.diagonal[i] * values[i];
                for d in 0..grid.dim() {
                    let c = self.coupling(d);
                    for nb in grid.neighbors(i, d) {
                        if let Neighbor::Interior(k) = nb {
                            acc += c * values[k];
                        }
                    }
                }
                acc
            })
            .collect()
    }

    pub fn apply_to(&self, f: &GridFunction) -> GridFunction {
        GridFunction::from_parts(&self.grid, self.apply(f.values()))
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let n = self.len();
        let mut m = Mat::<f64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diagonal[i];
            for d in 0..self.grid.dim() {
                let c = self.coupling(d);
                for nb in self.grid.neighbors(i, d) {
                    if let Neighbor::Interior(k) = nb {
                        m[(i, k)] = c;
                    }
                }
            }
        }
        m
    }
}
