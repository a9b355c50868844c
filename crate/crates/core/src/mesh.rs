//! Discrete domains and nodal fields.
//!
//! Interior nodes are lattice sites strictly inside the domain; every
//! neighbour that is not an interior node is a homogeneous Dirichlet site.

use std::collections::VecDeque;
use std::fmt;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::real::Real;

/// Marker for "no interior node here".
pub const OUTSIDE: usize = usize::MAX;

/// Occupancy bitmap for masked 2D grids. Row `r` maps to lattice row `j = r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    cells: Vec<bool>,
}

impl Mask {
    pub fn new(rows: usize, cols: usize, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != rows * cols {
            return Err(Error::InvalidGrid(format!(
                "mask has {} cells, expected {}x{}",
                cells.len(),
                rows,
                cols
            )));
        }
        Ok(Mask { rows, cols, cells })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut cells = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                cells.push(f(r, c));
            }
        }
        Mask { rows, cols, cells }
    }

    /// Parses the text format: a `rows cols` header, then `rows` lines of `0`/`1`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidGrid("empty bitmap".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidGrid(format!("bad bitmap header {header:?}: {e}")))?;
        if dims.len() != 2 {
            return Err(Error::InvalidGrid(format!("bad bitmap header {header:?}")));
        }
        let (rows, cols) = (dims[0], dims[1]);
        let mut cells = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| Error::InvalidGrid(format!("bitmap truncated at row {r}")))?;
            if line.chars().count() != cols {
                return Err(Error::InvalidGrid(format!(
                    "bitmap row {r} has {} columns, expected {cols}",
                    line.chars().count()
                )));
            }
            for ch in line.chars() {
                match ch {
                    '0' => cells.push(false),
                    '1' => cells.push(true),
                    _ => return Err(Error::InvalidGrid(format!("bad bitmap character {ch:?}"))),
                }
            }
        }
        if lines.next().is_some() {
            return Err(Error::InvalidGrid("trailing rows in bitmap".into()));
        }
        Mask::new(rows, cols, cells)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.cells[r * self.cols + c]
    }
}

/// Two-dimensional domain descriptions accepted by [`Grid::masked_2d`].
#[derive(Debug, Clone, PartialEq)]
pub enum Shape<T> {
    Rectangle { width: T, height: T },
    /// Disk of the given radius, centred in the box `[0, 2R]²`.
    Disk { radius: T },
    /// Explicit occupancy mask; the lattice is the bitmap itself with
    /// spacing `1/(max(rows, cols) + 1)`.
    Bitmap(Mask),
}

/// A discretized domain with its interior-node numbering.
#[derive(Clone)]
pub struct Grid<T> {
    id: u64,
    dim: usize,
    extent: [T; 2],
    sites: [usize; 2],
    h: [T; 2],
    inv_h2: [T; 2],
    weight: T,
    site_node: Vec<usize>,
    node_site: Vec<usize>,
    nbr: Vec<[usize; 4]>,
    bandwidth: usize,
}

impl<T: fmt::Debug> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("id", &format_args!("{:016x}", self.id))
            .field("dim", &self.dim)
            .field("extent", &self.extent)
            .field("sites", &self.sites)
            .field("nodes", &self.node_site.len())
            .finish()
    }
}

impl<T: Real> Grid<T> {
    /// Uniform grid on `(0, L)` with `n` interior nodes.
    pub fn interval(length: T, n: usize) -> Result<Self> {
        if !(length > T::zero()) || !length.is_finite() {
            return Err(Error::InvalidGrid(format!("interval length must be positive, got {length}")));
        }
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 interior nodes, got {n}")));
        }
        let h = length / T::usize(n + 1);
        let mask = vec![true; n];
        let mut hasher = Fnv::new();
        hasher.write(b"interval");
        hasher.write_f64(length.f64());
        hasher.write_usize(n);
        Ok(Self::assemble(1, [length, T::zero()], [n, 1], [h, T::one()], &mask, hasher.finish()))
    }

    /// Masked lattice grid on a 2D shape with `resolution` sites per axis.
    pub fn masked_2d(shape: &Shape<T>, resolution: usize) -> Result<Self> {
        let mut hasher = Fnv::new();
        let (extent, sites, h, mask) = match shape {
            Shape::Rectangle { width, height } => {
                check_positive("width", *width)?;
                check_positive("height", *height)?;
                check_resolution(resolution)?;
                hasher.write(b"rectangle");
                hasher.write_f64(width.f64());
                hasher.write_f64(height.f64());
                let r1 = T::usize(resolution + 1);
                let mask = vec![true; resolution * resolution];
                ([*width, *height], [resolution, resolution], [*width / r1, *height / r1], mask)
            }
            Shape::Disk { radius } => {
                check_positive("radius", *radius)?;
                check_resolution(resolution)?;
                hasher.write(b"disk");
                hasher.write_f64(radius.f64());
                let side = *radius + *radius;
                let h = side / T::usize(resolution + 1);
                let mut mask = Vec::with_capacity(resolution * resolution);
                for j in 0..resolution {
                    for i in 0..resolution {
                        let x = T::usize(i + 1) * h - *radius;
                        let y = T::usize(j + 1) * h - *radius;
                        mask.push(x * x + y * y < *radius * *radius);
                    }
                }
                ([side, side], [resolution, resolution], [h, h], mask)
            }
            Shape::Bitmap(m) => {
                if m.rows() < 3 || m.cols() < 3 {
                    return Err(Error::InvalidGrid("bitmap must be at least 3x3".into()));
                }
                hasher.write(b"bitmap");
                let h = T::one() / T::usize(m.rows().max(m.cols()) + 1);
                let ext = [T::usize(m.cols() + 1) * h, T::usize(m.rows() + 1) * h];
                let mask = (0..m.rows())
                    .flat_map(|r| (0..m.cols()).map(move |c| (r, c)))
                    .map(|(r, c)| m.get(r, c))
                    .collect::<Vec<_>>();
                (ext, [m.cols(), m.rows()], [h, h], mask)
            }
        };
        hasher.write_usize(sites[0]);
        hasher.write_usize(sites[1]);
        for &b in &mask {
            hasher.write(&[b as u8]);
        }
        let grid = Self::assemble(2, extent, sites, h, &mask, hasher.finish());
        if grid.len() == 0 {
            return Err(Error::InvalidGrid("shape has no interior nodes".into()));
        }
        if !grid.is_connected() {
            return Err(Error::InvalidGrid("interior is not connected".into()));
        }
        Ok(grid)
    }

    fn assemble(dim: usize, extent: [T; 2], sites: [usize; 2], h: [T; 2], mask: &[bool], id: u64) -> Self {
        let nsites = sites[0] * sites[1];
        let mut site_node = vec![OUTSIDE; nsites];
        let mut node_site = Vec::new();
        for (s, &inside) in mask.iter().enumerate() {
            if inside {
                site_node[s] = node_site.len();
                node_site.push(s);
            }
        }
        let (nx, ny) = (sites[0], sites[1]);
        let lookup = |i: isize, j: isize| -> usize {
            if i < 0 || j < 0 || i >= nx as isize || j >= ny as isize {
                OUTSIDE
            } else {
                site_node[j as usize * nx + i as usize]
            }
        };
        let mut nbr = Vec::with_capacity(node_site.len());
        let mut bandwidth = 0usize;
        for (k, &s) in node_site.iter().enumerate() {
            let (i, j) = ((s % nx) as isize, (s / nx) as isize);
            let mut e = [lookup(i - 1, j), lookup(i + 1, j), OUTSIDE, OUTSIDE];
            if dim == 2 {
                e[2] = lookup(i, j - 1);
                e[3] = lookup(i, j + 1);
            }
            for &m in &e {
                if m != OUTSIDE {
                    bandwidth = bandwidth.max(m.abs_diff(k));
                }
            }
            nbr.push(e);
        }
        let weight = if dim == 1 { h[0] } else { h[0] * h[1] };
        let inv_h2 = [T::one() / (h[0] * h[0]), T::one() / (h[1] * h[1])];
        Grid { id, dim, extent, sites, h, inv_h2, weight, site_node, node_site, nbr, bandwidth }
    }

    fn is_connected(&self) -> bool {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(k) = queue.pop_front() {
            for &m in &self.nbr[k] {
                if m != OUTSIDE && !seen[m] {
                    seen[m] = true;
                    count += 1;
                    queue.push_back(m);
                }
            }
        }
        count == n
    }

    /// Stable 64-bit identity derived from the geometry description.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.node_site.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_site.is_empty()
    }

    pub fn extent(&self) -> [T; 2] {
        self.extent
    }

    /// Lattice sites per axis (`[n, 1]` in 1D).
    pub fn sites(&self) -> [usize; 2] {
        self.sites
    }

    pub fn h(&self) -> [T; 2] {
        self.h
    }

    pub(crate) fn inv_h2(&self) -> [T; 2] {
        self.inv_h2
    }

    /// Quadrature weight, identical for every node.
    pub fn weight(&self) -> T {
        self.weight
    }

    /// Sum of the weights.
    pub fn measure(&self) -> T {
        self.weight * T::usize(self.len())
    }

    /// Stencil neighbours `[-x, +x, -y, +y]`; [`OUTSIDE`] marks a boundary site.
    pub fn neighbors(&self, node: usize) -> &[usize; 4] {
        &self.nbr[node]
    }

    /// Largest index distance between stencil neighbours.
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Lattice coordinates `(i, j)` of an interior node.
    pub fn site(&self, node: usize) -> (usize, usize) {
        let s = self.node_site[node];
        (s % self.sites[0], s / self.sites[0])
    }

    pub fn node_at(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.sites[0] || j >= self.sites[1] {
            return None;
        }
        let k = self.site_node[j * self.sites[0] + i];
        (k != OUTSIDE).then_some(k)
    }

    /// Physical coordinates of a node; the second entry is zero in 1D.
    pub fn coords(&self, node: usize) -> [T; 2] {
        let (i, j) = self.site(node);
        let x = T::usize(i + 1) * self.h[0];
        let y = if self.dim == 2 { T::usize(j + 1) * self.h[1] } else { T::zero() };
        [x, y]
    }

    pub fn zeros(&self) -> ScalarField<T> {
        self.constant(T::zero())
    }

    pub fn constant(&self, c: T) -> ScalarField<T> {
        ScalarField { grid: self.id, values: vec![c; self.len()] }
    }

    /// Samples `f` at the node coordinates.
    pub fn sample(&self, f: impl Fn(T, T) -> T) -> ScalarField<T> {
        let values = (0..self.len())
            .map(|k| {
                let [x, y] = self.coords(k);
                f(x, y)
            })
            .collect();
        ScalarField { grid: self.id, values }
    }

    /// Wraps raw values, checking length and finiteness.
    pub fn field(&self, values: Vec<T>) -> Result<ScalarField<T>> {
        if values.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(ScalarField { grid: self.id, values })
    }

    pub(crate) fn wrap(&self, values: Vec<T>) -> ScalarField<T> {
        debug_assert_eq!(values.len(), self.len());
        ScalarField { grid: self.id, values }
    }

    pub fn check(&self, f: &ScalarField<T>) -> Result<()> {
        if f.grid != self.id {
            return Err(Error::GridMismatch);
        }
        if f.values.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got: f.values.len() });
        }
        Ok(())
    }

    /// Weighted inner product `Σ wᵢ fᵢ gᵢ`.
    pub fn inner(&self, f: &ScalarField<T>, g: &ScalarField<T>) -> Result<T> {
        self.check(f)?;
        self.check(g)?;
        Ok(self.dot(&f.values, &g.values))
    }

    pub fn norm(&self, f: &ScalarField<T>) -> Result<T> {
        self.inner(f, f).map(Float::sqrt)
    }

    pub(crate) fn dot(&self, a: &[T], b: &[T]) -> T {
        self.weight * a.iter().zip(b).map(|(&x, &y)| x * y).sum::<T>()
    }

    pub(crate) fn nrm(&self, a: &[T]) -> T {
        self.dot(a, a).sqrt()
    }

    /// Minimum of `u/h` over nodes adjacent to the boundary: a one-sided
    /// estimate of the smallest inward normal derivative.
    pub fn min_normal_derivative(&self, u: &ScalarField<T>) -> Result<T> {
        self.check(u)?;
        let mut best = T::infinity();
        for (k, e) in self.nbr.iter().enumerate() {
            let axes = if self.dim == 1 { 1 } else { 2 };
            for a in 0..axes {
                if e[2 * a] == OUTSIDE || e[2 * a + 1] == OUTSIDE {
                    best = best.min(u.values[k] / self.h[a]);
                }
            }
        }
        Ok(best)
    }
}



fn check_positive<T: Real>(what: &str, x: T) -> Result<()> {
    if x > T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidGrid(format!("{what} must be positive, got {x}")))
    }
}

fn check_resolution(r: usize) -> Result<()> {
    if r < 8 {
        Err(Error::InvalidGrid(format!("resolution must be at least 8, got {r}")))
    } else {
        Ok(())
    }
}

/// Nodal values on the interior of a particular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T> {
    grid: u64,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn grid_id(&self) -> u64 {
        self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        ScalarField { grid: self.grid, values: self.values.iter().map(|&x| f(x)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.grid != other.grid || self.len() != other.len() {
            return Err(Error::GridMismatch);
        }
        Ok(ScalarField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn min(&self) -> T {
        self.values.iter().fold(T::infinity(), |m, &x| m.min(x))
    }

    pub fn max(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |m, &x| m.max(x))
    }

    /// Index and value of the first node that is not strictly positive.
    pub fn first_nonpositive(&self) -> Option<(usize, T)> {
        self.values.iter().copied().enumerate().find(|&(_, x)| !(x > T::zero()))
    }
}

/// FNV-1a, used for grid identities that must be stable across runs.
struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    fn write_f64(&mut self, x: f64) {
        self.write(&x.to_bits().to_le_bytes());
    }

    fn write_usize(&mut self, n: usize) {
        self.write(&(n as u64).to_le_bytes());
    }

    fn finish(&self) -> u64 {
        self.0
    }
}
