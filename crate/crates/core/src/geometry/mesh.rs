//! Triangular meshes of a domain with electrode-labelled boundary edges.

use serde::{Deserialize, Serialize};
use spade::{
    handles::FixedVertexHandle, AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters,
    Triangulation,
};
use std::collections::{HashMap, HashSet};

use super::domain::Domain2D;
use super::polygon::{self, Point};
use crate::{Error, Result};

/// A boundary edge of the mesh, oriented counter-clockwise along the
/// boundary. `electrode` is `None` on gaps between electrodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub edge: [usize; 2],
    pub electrode: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshRaw {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    electrode_edges: Vec<BoundaryEdge>,
}

/// Conforming triangulation with counter-clockwise triangles.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "MeshRaw")]
pub struct Mesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    #[serde(rename = "electrode_edges")]
    boundary_edges: Vec<BoundaryEdge>,
}

impl TryFrom<MeshRaw> for Mesh {
    type Error = Error;
    fn try_from(r: MeshRaw) -> Result<Self> {
        Mesh::new(r.nodes, r.triangles, r.electrode_edges)
    }
}

impl Mesh {
    /// Validates indices, orientation and the boundary edge set.
    pub fn new(nodes: Vec<Point>, triangles: Vec<[usize; 3]>, boundary_edges: Vec<BoundaryEdge>) -> Result<Self> {
        let n = nodes.len();
        let mut edge_count: HashMap<(usize, usize), u32> = HashMap::new();
        for t in &triangles {
            if t.iter().any(|&i| i >= n) {
                return Err(Error::Meshing("triangle index out of range".into()));
            }
            let a = triangle_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
            if !(a > 0.0) {
                return Err(Error::Meshing("degenerate or clockwise triangle".into()));
            }
            for k in 0..3 {
                let (i, j) = (t[k], t[(k + 1) % 3]);
                *edge_count.entry((i.min(j), i.max(j))).or_default() += 1;
            }
        }
        if edge_count.values().any(|&c| c > 2) {
            return Err(Error::Meshing("edge shared by more than two triangles".into()));
        }
        let n_boundary = edge_count.values().filter(|&&c| c == 1).count();
        if n_boundary != boundary_edges.len() {
            return Err(Error::Meshing(format!(
                "boundary edge list has {} entries, mesh has {n_boundary}",
                boundary_edges.len()
            )));
        }
        for e in &boundary_edges {
            let [i, j] = e.edge;
            if edge_count.get(&(i.min(j), i.max(j))) != Some(&1) {
                return Err(Error::Meshing("listed edge is not on the boundary".into()));
            }
        }
        Ok(Self { nodes, triangles, boundary_edges })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn element_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        triangle_area(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t];
        (self.nodes[a] + self.nodes[b] + self.nodes[c]) * (1.0 / 3.0)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_elements()).map(|t| self.element_area(t)).sum()
    }

    /// Edges lying on electrode `l`.
    pub fn electrode_edges(&self, l: usize) -> impl Iterator<Item = [usize; 2]> + '_ {
        self.boundary_edges.iter().filter(move |e| e.electrode == Some(l)).map(|e| e.edge)
    }

    /// Total length of the edges labelled with electrode `l`.
    pub fn electrode_length(&self, l: usize) -> f64 {
        self.electrode_edges(l).map(|[a, b]| self.nodes[a].dist(self.nodes[b])).sum()
    }

    /// Number of distinct electrode labels (one past the largest label).
    pub fn n_electrodes(&self) -> usize {
        self.boundary_edges.iter().filter_map(|e| e.electrode).max().map_or(0, |m| m + 1)
    }
}

pub fn triangle_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * (b - a).cross(c - a)
}

/// Boundary vertices of the domain polyline with the electrode endpoints
/// inserted, as `(arclength, point)` pairs in increasing arclength.
fn boundary_with_endpoints(domain: &Domain2D) -> Vec<(f64, Point)> {
    let p = domain.perimeter();
    let cum = domain.vertex_arclength();
    let mut pts: Vec<(f64, Point)> = domain.boundary().iter().enumerate().map(|(i, &q)| (cum[i], q)).collect();
    // Endpoints closer than this to an existing vertex reuse that vertex.
    let tol = 1e-12 * p;
    for e in domain.electrodes() {
        for s in [e.start_s, e.end_s] {
            let s = s.rem_euclid(p);
            let s = if p - s <= tol { 0.0 } else { s };
            let near = pts.iter().any(|&(t, _)| (t - s).abs() <= tol);
            if !near {
                pts.push((s, domain.point_at(s)));
            }
        }
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts
}

/// Interior points on rings of geometrically growing radius around every
/// electrode endpoint, grading the mesh toward the edge singularities of the
/// electrode potential. At most `budget` points are returned.
fn grading_points(domain: &Domain2D, max_area: f64, budget: usize) -> Vec<Point> {
    const GROWTH: f64 = 1.5;
    let p = domain.perimeter();
    let h0 = p / domain.boundary().len() as f64;
    let h_int = (4.0 * max_area / 3f64.sqrt()).sqrt();
    let per_ring = (2.0 * std::f64::consts::PI / (GROWTH - 1.0)).ceil() as usize;
    let ends: Vec<Point> =
        domain.electrodes().iter().flat_map(|e| [domain.point_at(e.start_s), domain.point_at(e.end_s)]).collect();
    let mut out = Vec::new();
    let mut r = h0 * GROWTH;
    while r < h_int {
        let mut ring = Vec::new();
        for c in &ends {
            for i in 0..per_ring {
                let t = 2.0 * std::f64::consts::PI * i as f64 / per_ring as f64;
                let q = Point::new(c.x + r * t.cos(), c.y + r * t.sin());
                if domain.contains(q) && polygon::boundary_distance(domain.boundary(), q) > 0.5 * r * (GROWTH - 1.0) {
                    ring.push(q);
                }
            }
        }
        if out.len() + ring.len() > budget {
            break;
        }
        out.extend(ring);
        r *= GROWTH;
    }
    out
}

fn triangulate(
    boundary: &[(f64, Point)],
    extra: &[Point],
    max_area: f64,
    max_extra: usize,
) -> Result<(Vec<Point>, Vec<[usize; 3]>, HashMap<usize, f64>)> {
    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> = ConstrainedDelaunayTriangulation::new();
    let mut handles: Vec<FixedVertexHandle> = Vec::with_capacity(boundary.len());
    for &(_, q) in boundary {
        let h =
            cdt.insert(Point2::new(q.x, q.y)).map_err(|e| Error::Meshing(format!("vertex insertion failed: {e:?}")))?;
        handles.push(h);
    }
    for q in extra {
        cdt.insert(Point2::new(q.x, q.y)).map_err(|e| Error::Meshing(format!("vertex insertion failed: {e:?}")))?;
    }
    let n = handles.len();
    for i in 0..n {
        let (a, b) = (handles[i], handles[(i + 1) % n]);
        if !cdt.can_add_constraint(a, b) {
            return Err(Error::Meshing("boundary constraint intersects another".into()));
        }
        cdt.add_constraint(a, b);
    }
    let params = RefinementParameters::<f64>::new()
        .with_max_allowed_area(max_area)
        .with_angle_limit(AngleLimit::from_deg(25.0))
        .keep_constraint_edges()
        .exclude_outer_faces(true)
        .with_max_additional_vertices(max_extra);
    let result = cdt.refine(params);
    let excluded: HashSet<_> = result.excluded_faces.into_iter().collect();

    let arclen: HashMap<FixedVertexHandle, f64> = handles.iter().zip(boundary).map(|(&h, &(s, _))| (h, s)).collect();
    let mut index: HashMap<FixedVertexHandle, usize> = HashMap::new();
    let mut nodes = Vec::new();
    let mut s_of = HashMap::new();
    let mut tris = Vec::new();
    for f in cdt.inner_faces() {
        if excluded.contains(&f.fix()) {
            continue;
        }
        let mut t = [0usize; 3];
        for (k, v) in f.vertices().iter().enumerate() {
            let id = *index.entry(v.fix()).or_insert_with(|| {
                let p = v.position();
                nodes.push(Point::new(p.x, p.y));
                if let Some(&s) = arclen.get(&v.fix()) {
                    s_of.insert(nodes.len() - 1, s);
                }
                nodes.len() - 1
            });
            t[k] = id;
        }
        tris.push(t);
    }
    Ok((nodes, tris, s_of))
}

/// Meshes the domain with roughly `target_elements` triangles.
///
/// The boundary polyline plus the electrode endpoints are kept as mesh
/// edges, so electrode edge lengths sum exactly to the electrode lengths.
/// The element count lands within 25% of the target.
pub fn generate_mesh(domain: &Domain2D, target_elements: usize) -> Result<Mesh> {
    if target_elements < 2 {
        return Err(Error::InvalidParameter("target element count too small".into()));
    }
    let boundary = boundary_with_endpoints(domain);
    let area = domain.area();
    let target = target_elements as f64;
    let max_extra = 20 * target_elements + 1000;

    let mut max_area = 1.6 * area / target;
    let mut best: Option<(f64, (Vec<Point>, Vec<[usize; 3]>, HashMap<usize, f64>))> = None;
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    for _ in 0..30 {
        let extra = grading_points(domain, max_area, target_elements / 20);
        let out = triangulate(&boundary, &extra, max_area, max_extra)?;
        let count = out.1.len() as f64;
        let err = (count - target).abs() / target;
        if best.as_ref().is_none_or(|b| err < b.0) {
            best = Some((err, out));
        }
        if err < 0.03 {
            break;
        }
        // Element count decreases with the allowed area; bracket and bisect.
        if count > target {
            lo = max_area;
        } else {
            hi = max_area;
        }
        max_area =
            if hi.is_finite() && lo > 0.0 { 0.5 * (lo + hi) } else { max_area * (count / target).clamp(0.25, 4.0) };
    }
    let (err, (nodes, tris, s_of)) = best.expect("at least one triangulation");
    if err > 0.25 {
        return Err(Error::Meshing(format!("could not reach {target_elements} elements within 25%")));
    }
    label_boundary(domain, nodes, tris, &s_of)
}

fn label_boundary(
    domain: &Domain2D,
    nodes: Vec<Point>,
    tris: Vec<[usize; 3]>,
    s_of: &HashMap<usize, f64>,
) -> Result<Mesh> {
    let p = domain.perimeter();
    let mut count: HashMap<(usize, usize), (u32, [usize; 2])> = HashMap::new();
    for t in &tris {
        for k in 0..3 {
            let (i, j) = (t[k], t[(k + 1) % 3]);
            let e = count.entry((i.min(j), i.max(j))).or_insert((0, [i, j]));
            e.0 += 1;
        }
    }
    let arclength = |v: usize| -> f64 {
        s_of.get(&v).copied().unwrap_or_else(|| {
            // Fallback for vertices that do not come from the input boundary.
            let b = domain.boundary();
            let m = b.len();
            let i = (0..m)
                .min_by(|&i, &j| {
                    let di = polygon::segment_distance(nodes[v], b[i], b[(i + 1) % m]);
                    let dj = polygon::segment_distance(nodes[v], b[j], b[(j + 1) % m]);
                    di.total_cmp(&dj)
                })
                .unwrap_or(0);
            domain.arclength_on_segment(i, nodes[v])
        })
    };
    let mut edges: Vec<(f64, BoundaryEdge)> = Vec::new();
    for &(c, [i, j]) in count.values() {
        if c != 1 {
            continue;
        }
        let (si, mut sj) = (arclength(i), arclength(j));
        if sj <= si {
            sj += p;
        }
        let mid = 0.5 * (si + sj);
        edges.push((si, BoundaryEdge { edge: [i, j], electrode: domain.electrode_at(mid) }));
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mesh = Mesh::new(nodes, tris, edges.into_iter().map(|e| e.1).collect())?;
    for (l, e) in domain.electrodes().iter().enumerate() {
        let len = mesh.electrode_length(l);
        if (len - e.length()).abs() > 1e-9 * e.length().max(1.0) {
            return Err(Error::Meshing(format!("electrode {l} edges sum to {len}, expected {}", e.length())));
        }
    }
    Ok(mesh)
}
