//! Structured triangulations of rectangles with physical and computational
//! coordinates.
//!
//! Every mesh is built from an `nx × nz` grid of quads, each split along its
//! south-west/north-east diagonal unless the mirrored split is requested.
//! Node `(i, j)` has index `j * (nx + 1) + i` and cell `(i, j)` owns
//! triangles `2k` and `2k + 1` with `k = j * nx + i`.
//! The computational coordinates are the unit-square image of the initial
//! grid and never change; only the physical coordinates move.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Axis-aligned rectangle `[x0, x1] × [z0, z1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub z0: f64,
    pub z1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, z0: f64, z1: f64) -> Self {
        Rect { x0, x1, z0, z1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.z1 - self.z0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

/// Set of rectangle sides, used to select Dirichlet boundaries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SideSet {
    pub left: bool,
    pub right: bool,
    pub bottom: bool,
    pub top: bool,
}

impl SideSet {
    pub const NONE: SideSet = SideSet {
        left: false,
        right: false,
        bottom: false,
        top: false,
    };
    pub const ALL: SideSet = SideSet {
        left: true,
        right: true,
        bottom: true,
        top: true,
    };
    /// Bottom and top sides (`z = z0` and `z = z1`).
    pub const BOTTOM_TOP: SideSet = SideSet {
        left: false,
        right: false,
        bottom: true,
        top: true,
    };

    pub fn contains(&self, side: Side) -> bool {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
            Side::Bottom => self.bottom,
            Side::Top => self.top,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    Interior,
    Side(Side),
    Corner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Physical,
    Computational,
}

/// Area and constant gradients of the three barycentric basis functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    nodes_x: Vec<Point>,
    nodes_xi: Vec<Point>,
    tris: Vec<[usize; 3]>,
    tags: Vec<BoundaryTag>,
    dirichlet: Vec<bool>,
    nx: usize,
    nz: usize,
    bounds: Rect,
    version: u64,
}

/// Which diagonal splits each quad.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Diagonal {
    /// South-west to north-east.
    #[default]
    SwNe,
    /// South-east to north-west; the mirror image of `SwNe` under `x ↦ −x`.
    SeNw,
}

/// Builds the structured SW–NE triangulation of `bounds` with `nx × nz` cells.
pub fn generate_rect_mesh(nx: usize, nz: usize, bounds: Rect, dirichlet_sides: SideSet) -> Result<TriMesh> {
    generate_rect_mesh_with(nx, nz, bounds, dirichlet_sides, Diagonal::SwNe)
}

pub fn generate_rect_mesh_with(
    nx: usize,
    nz: usize,
    bounds: Rect,
    dirichlet_sides: SideSet,
    diagonal: Diagonal,
) -> Result<TriMesh> {
    if nx == 0 || nz == 0 {
        return Err(Error::InvalidArgument(format!(
            "cell counts must be positive (nx = {nx}, nz = {nz})"
        )));
    }
    if !(bounds.x1 > bounds.x0) || !(bounds.z1 > bounds.z0) {
        return Err(Error::InvalidArgument(format!("degenerate bounds {bounds:?}")));
    }

    let n_nodes = (nx + 1) * (nz + 1);
    let mut nodes_x = Vec::with_capacity(n_nodes);
    let mut nodes_xi = Vec::with_capacity(n_nodes);
    let mut tags = Vec::with_capacity(n_nodes);
    let mut dirichlet = Vec::with_capacity(n_nodes);
    let dx = bounds.width() / nx as f64;
    let dz = bounds.height() / nz as f64;

    for j in 0..=nz {
        for i in 0..=nx {
            // Boundary coordinates are set exactly so nodes lie on their sides.
            let x = if i == nx { bounds.x1 } else { bounds.x0 + i as f64 * dx };
            let z = if j == nz { bounds.z1 } else { bounds.z0 + j as f64 * dz };
            nodes_x.push([x, z]);
            nodes_xi.push([i as f64 / nx as f64, j as f64 / nz as f64]);

            let mut sides = Vec::with_capacity(2);
            if i == 0 {
                sides.push(Side::Left);
            }
            if i == nx {
                sides.push(Side::Right);
            }
            if j == 0 {
                sides.push(Side::Bottom);
            }
            if j == nz {
                sides.push(Side::Top);
            }
            tags.push(match sides.len() {
                0 => BoundaryTag::Interior,
                1 => BoundaryTag::Side(sides[0]),
                _ => BoundaryTag::Corner,
            });
            dirichlet.push(sides.iter().any(|s| dirichlet_sides.contains(*s)));
        }
    }

    let mut tris = Vec::with_capacity(2 * nx * nz);
    for j in 0..nz {
        for i in 0..nx {
            let a = j * (nx + 1) + i;
            let b = a + 1;
            let c = a + nx + 2;
            let d = a + nx + 1;
            match diagonal {
                Diagonal::SwNe => {
                    tris.push([a, b, c]);
                    tris.push([a, c, d]);
                }
                Diagonal::SeNw => {
                    tris.push([a, b, d]);
                    tris.push([b, c, d]);
                }
            }
        }
    }

    Ok(TriMesh {
        nodes_x,
        nodes_xi,
        tris,
        tags,
        dirichlet,
        nx,
        nz,
        bounds,
        version: 0,
    })
}

impl TriMesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes_x.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.tris.len()
    }

    pub fn nodes(&self, frame: Frame) -> &[Point] {
        match frame {
            Frame::Physical => &self.nodes_x,
            Frame::Computational => &self.nodes_xi,
        }
    }

    pub fn physical(&self) -> &[Point] {
        &self.nodes_x
    }

    pub fn computational(&self) -> &[Point] {
        &self.nodes_xi
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.tris
    }

    pub fn tags(&self) -> &[BoundaryTag] {
        &self.tags
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet
    }

    pub fn has_dirichlet(&self) -> bool {
        self.dirichlet.iter().any(|&d| d)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    /// Characteristic size `max(Δx, Δz)` of the initial grid.
    pub fn h(&self) -> f64 {
        (self.bounds.width() / self.nx as f64).max(self.bounds.height() / self.nz as f64)
    }

    /// Incremented every time the physical coordinates change; used to
    /// invalidate cached operators.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    /// Replaces the physical coordinates. Topology and computational
    /// coordinates are untouched.
    pub fn set_physical(&mut self, nodes_x: Vec<Point>) -> Result<()> {
        if nodes_x.len() != self.nodes_x.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} node positions, got {}",
                self.nodes_x.len(),
                nodes_x.len()
            )));
        }
        self.nodes_x = nodes_x;
        self.version += 1;
        Ok(())
    }

    pub fn vertices(&self, t: usize, frame: Frame) -> [Point; 3] {
        let nodes = self.nodes(frame);
        let [a, b, c] = self.tris[t];
        [nodes[a], nodes[b], nodes[c]]
    }

    pub fn signed_area(&self, t: usize, frame: Frame) -> f64 {
        signed_area(&self.vertices(t, frame))
    }

    pub fn element_geometry(&self, t: usize, frame: Frame) -> Result<ElementGeometry> {
        if t >= self.tris.len() {
            return Err(Error::InvalidArgument(format!("triangle index {t} out of range")));
        }
        triangle_geometry(&self.vertices(t, frame)).ok_or(Error::DegenerateElement {
            triangle: t,
            area: self.signed_area(t, frame),
        })
    }

    pub fn total_area(&self, frame: Frame) -> f64 {
        (0..self.tris.len()).map(|t| self.signed_area(t, frame)).sum()
    }

    /// Smallest signed triangle area in the given frame.
    pub fn min_area(&self, frame: Frame) -> f64 {
        (0..self.tris.len())
            .map(|t| self.signed_area(t, frame))
            .fold(f64::INFINITY, f64::min)
    }

    /// Area of structured cell `(i, j)` (sum of its two triangles).
    pub fn cell_area(&self, i: usize, j: usize, frame: Frame) -> f64 {
        let k = j * self.nx + i;
        self.signed_area(2 * k, frame) + self.signed_area(2 * k + 1, frame)
    }

    /// Checks that every edge belongs to one (boundary) or two (interior)
    /// triangles and that boundary edges lie on the rectangle boundary.
    pub fn check_conformity(&self) -> Result<()> {
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.tris {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if a >= self.num_nodes() || b >= self.num_nodes() {
                    return Err(Error::InvalidArgument(format!("triangle references node {}", a.max(b))));
                }
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        for (&(a, b), &count) in &edges {
            match count {
                2 => {}
                1 => {
                    if self.tags[a] == BoundaryTag::Interior || self.tags[b] == BoundaryTag::Interior {
                        return Err(Error::InvalidArgument(format!(
                            "edge ({a}, {b}) has one triangle but an interior endpoint"
                        )));
                    }
                }
                n => {
                    return Err(Error::InvalidArgument(format!("edge ({a}, {b}) shared by {n} triangles")));
                }
            }
        }
        Ok(())
    }

    /// Node-to-triangle adjacency.
    pub fn node_stars(&self) -> Vec<Vec<usize>> {
        let mut stars = vec![Vec::new(); self.num_nodes()];
        for (t, tri) in self.tris.iter().enumerate() {
            for &n in tri {
                stars[n].push(t);
            }
        }
        stars
    }

    /// Node indices along a side, ordered by increasing coordinate.
    pub fn side_nodes(&self, side: Side) -> Vec<usize> {
        let (nx, nz) = (self.nx, self.nz);
        match side {
            Side::Bottom => (0..=nx).map(|i| self.node_index(i, 0)).collect(),
            Side::Top => (0..=nx).map(|i| self.node_index(i, nz)).collect(),
            Side::Left => (0..=nz).map(|j| self.node_index(0, j)).collect(),
            Side::Right => (0..=nz).map(|j| self.node_index(nx, j)).collect(),
        }
    }
}

pub fn signed_area(v: &[Point; 3]) -> f64 {
    0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]))
}

/// Geometry of a single triangle, `None` when it is inverted or degenerate.
pub fn triangle_geometry(v: &[Point; 3]) -> Option<ElementGeometry> {
    let area = signed_area(v);
    if !(area > 0.0) {
        return None;
    }
    let inv = 1.0 / (2.0 * area);
    let mut grads = [[0.0; 2]; 3];
    for k in 0..3 {
        let p = v[(k + 1) % 3];
        let q = v[(k + 2) % 3];
        grads[k] = [(p[1] - q[1]) * inv, (q[0] - p[0]) * inv];
    }
    Some(ElementGeometry { area, grads })
}

/// Barycentric coordinates of `p` with respect to triangle `v`.
pub fn barycentric(v: &[Point; 3], p: Point) -> [f64; 3] {
    let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
    let l1 = ((p[0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (p[1] - v[0][1])) / det;
    let l2 = ((v[1][0] - v[0][0]) * (p[1] - v[0][1]) - (p[0] - v[0][0]) * (v[1][1] - v[0][1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

fn clip_barycentric(mut l: [f64; 3]) -> [f64; 3] {
    for v in &mut l {
        *v = v.clamp(0.0, 1.0);
    }
    let s: f64 = l.iter().sum();
    if s > 0.0 {
        for v in &mut l {
            *v /= s;
        }
    } else {
        l = [1.0 / 3.0; 3];
    }
    l
}

const INSIDE_TOL: f64 = 1e-12;
const BRUTE_FORCE_LIMIT: usize = 5000;

/// Result of a point query: containing (or nearest) triangle and clipped
/// barycentric coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub triangle: usize,
    pub bary: [f64; 3],
}

/// Point locator over a frozen snapshot of a mesh frame.
///
/// Below 5,000 triangles every query scans all triangles; above it a uniform
/// bin grid narrows the candidates. Both paths return the lowest-index
/// containing triangle, so results do not depend on the path taken.
pub struct PointLocator<'a> {
    mesh: &'a TriMesh,
    frame: Frame,
    bins: Option<BinGrid>,
}

struct BinGrid {
    origin: Point,
    cell: [f64; 2],
    dims: [usize; 2],
    items: Vec<Vec<usize>>,
}

impl BinGrid {
    fn build(mesh: &TriMesh, frame: Frame) -> Self {
        let nodes = mesh.nodes(frame);
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in nodes {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let side = (mesh.num_triangles() as f64).sqrt().ceil().max(1.0) as usize;
        let dims = [side, side];
        let cell = [
            ((hi[0] - lo[0]) / side as f64).max(f64::MIN_POSITIVE),
            ((hi[1] - lo[1]) / side as f64).max(f64::MIN_POSITIVE),
        ];
        let mut grid = BinGrid {
            origin: lo,
            cell,
            dims,
            items: vec![Vec::new(); side * side],
        };
        for t in 0..mesh.num_triangles() {
            let v = mesh.vertices(t, frame);
            let mut tlo = [f64::INFINITY; 2];
            let mut thi = [f64::NEG_INFINITY; 2];
            for p in &v {
                for d in 0..2 {
                    tlo[d] = tlo[d].min(p[d]);
                    thi[d] = thi[d].max(p[d]);
                }
            }
            let pad = [1e-9 * cell[0], 1e-9 * cell[1]];
            let (i0, j0) = grid.bin_of([tlo[0] - pad[0], tlo[1] - pad[1]]);
            let (i1, j1) = grid.bin_of([thi[0] + pad[0], thi[1] + pad[1]]);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    grid.items[j * dims[0] + i].push(t);
                }
            }
        }
        grid
    }

    fn bin_of(&self, p: Point) -> (usize, usize) {
        let clamp = |v: f64, n: usize| -> usize {
            if !(v > 0.0) {
                0
            } else {
                (v as usize).min(n - 1)
            }
        };
        (
            clamp((p[0] - self.origin[0]) / self.cell[0], self.dims[0]),
            clamp((p[1] - self.origin[1]) / self.cell[1], self.dims[1]),
        )
    }
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a TriMesh, frame: Frame) -> Self {
        let bins = (mesh.num_triangles() > BRUTE_FORCE_LIMIT).then(|| BinGrid::build(mesh, frame));
        PointLocator { mesh, frame, bins }
    }

    /// Forces the brute-force path regardless of mesh size.
    pub fn brute_force(mesh: &'a TriMesh, frame: Frame) -> Self {
        PointLocator {
            mesh,
            frame,
            bins: None,
        }
    }

    pub fn locate(&self, p: Point) -> Location {
        if let Some(bins) = &self.bins {
            let (i, j) = bins.bin_of(p);
            let inside = bins.items[j * bins.dims[0] + i].iter().copied().find(|&t| {
                let l = barycentric(&self.mesh.vertices(t, self.frame), p);
                l.iter().all(|&c| c >= -INSIDE_TOL)
            });
            if let Some(t) = inside {
                let l = barycentric(&self.mesh.vertices(t, self.frame), p);
                return Location {
                    triangle: t,
                    bary: clip_barycentric(l),
                };
            }
        }
        self.scan(p)
    }

    fn scan(&self, p: Point) -> Location {
        let mut best = (0usize, f64::NEG_INFINITY, [0.0; 3]);
        for t in 0..self.mesh.num_triangles() {
            let l = barycentric(&self.mesh.vertices(t, self.frame), p);
            let worst = l[0].min(l[1]).min(l[2]);
            if worst >= -INSIDE_TOL {
                return Location {
                    triangle: t,
                    bary: clip_barycentric(l),
                };
            }
            if worst > best.1 {
                best = (t, worst, l);
            }
        }
        Location {
            triangle: best.0,
            bary: clip_barycentric(best.2),
        }
    }
}

/// One-shot point location; builds a locator per call.
pub fn locate_point(mesh: &TriMesh, p: Point, frame: Frame) -> Location {
    PointLocator::new(mesh, frame).locate(p)
}

/// Evaluates a nodal (piecewise linear) field at a located point.
pub fn evaluate(mesh: &TriMesh, values: &[f64], loc: &Location) -> f64 {
    let tri = mesh.triangles()[loc.triangle];
    (0..3).map(|k| loc.bary[k] * values[tri[k]]).sum()
}
