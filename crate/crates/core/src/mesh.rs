//! Triangle meshes with an arclength-parametrized boundary, plus placement of
//! extended electrodes as arclength intervals on that boundary.
//!
//! The boundary loop always starts at the lowest-numbered boundary node and runs
//! counterclockwise, so arclength `0` sits at that node. Uniform refinement keeps
//! the original node numbering, hence the arclength origin survives refinement.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Triangulated 2D domain with its (single) boundary loop.
#[derive(Debug, Clone)]
pub struct TriMesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    /// Boundary nodes in counterclockwise order; edge `k` joins `loop[k]` and `loop[k + 1]`.
    boundary_loop: Vec<usize>,
    /// Arclength of `boundary_loop[k]` measured from `boundary_loop[0]`.
    arclength: Vec<f64>,
    perimeter: f64,
    /// Node id -> position in the boundary loop.
    boundary_pos: Vec<Option<usize>>,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Validates a raw node/triangle soup and indexes its boundary.
///
/// Clockwise triangles are silently flipped to counterclockwise.
pub fn build_boundary(nodes: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<TriMesh> {
    if nodes.is_empty() || triangles.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let n = nodes.len();
    let mut triangles = triangles;
    let mut used = vec![false; n];
    for (t, tri) in triangles.iter_mut().enumerate() {
        for &v in tri.iter() {
            if v >= n {
                return Err(Error::BadNodeIndex {
                    triangle: t,
                    node: v,
                    count: n,
                });
            }
            used[v] = true;
        }
        if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
            return Err(Error::DegenerateTriangle(t));
        }
        let area = signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
        if area == 0.0 || !area.is_finite() {
            return Err(Error::DegenerateTriangle(t));
        }
        if area < 0.0 {
            tri.swap(1, 2);
        }
    }
    if let Some(v) = used.iter().position(|u| !u) {
        return Err(Error::UnreferencedNode(v));
    }

    // Undirected edge -> (use count, directed edge as seen from the first triangle).
    let mut edges: BTreeMap<(usize, usize), (usize, (usize, usize))> = BTreeMap::new();
    for tri in &triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            let e = edges.entry(key).or_insert((0, (a, b)));
            e.0 += 1;
        }
    }
    let mut next: Vec<Option<usize>> = vec![None; n];
    let mut boundary_edges = 0usize;
    for (&(a, b), &(count, (from, to))) in &edges {
        match count {
            1 => {
                if next[from].is_some() {
                    // pinched vertex: two boundary cycles touch here
                    return Err(Error::MultipleBoundaryComponents);
                }
                next[from] = Some(to);
                boundary_edges += 1;
            }
            2 => {}
            c => return Err(Error::NonManifoldEdge(a, b, c)),
        }
    }

    let start = next
        .iter()
        .position(Option::is_some)
        .ok_or(Error::MultipleBoundaryComponents)?;
    let mut boundary_loop = vec![start];
    let mut cur = start;
    loop {
        let nx = next[cur].ok_or(Error::MultipleBoundaryComponents)?;
        if nx == start {
            break;
        }
        if boundary_loop.len() > boundary_edges {
            return Err(Error::MultipleBoundaryComponents);
        }
        boundary_loop.push(nx);
        cur = nx;
    }
    if boundary_loop.len() != boundary_edges {
        return Err(Error::MultipleBoundaryComponents);
    }
    // A disk has Euler characteristic 1; anything else has handles or holes.
    if n as isize - edges.len() as isize + triangles.len() as isize != 1 {
        return Err(Error::MultipleBoundaryComponents);
    }

    let mut arclength = Vec::with_capacity(boundary_loop.len());
    let mut s = 0.0;
    for k in 0..boundary_loop.len() {
        arclength.push(s);
        let a = nodes[boundary_loop[k]];
        let b = nodes[boundary_loop[(k + 1) % boundary_loop.len()]];
        s += dist(a, b);
    }
    let mut boundary_pos = vec![None; n];
    for (k, &v) in boundary_loop.iter().enumerate() {
        boundary_pos[v] = Some(k);
    }

    Ok(TriMesh {
        nodes,
        triangles,
        boundary_loop,
        arclength,
        perimeter: s,
        boundary_pos,
    })
}

impl TriMesh {
    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn boundary_loop(&self) -> &[usize] {
        &self.boundary_loop
    }

    /// Cumulative arclength per boundary-loop position.
    pub fn arclength(&self) -> &[f64] {
        &self.arclength
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    pub fn boundary_position(&self, node: usize) -> Option<usize> {
        self.boundary_pos.get(node).copied().flatten()
    }

    /// Boundary edge `k` as (start node, end node, length).
    pub fn boundary_edge(&self, k: usize) -> (usize, usize, f64) {
        let nb = self.boundary_loop.len();
        let k = k % nb;
        let a = self.boundary_loop[k];
        let b = self.boundary_loop[(k + 1) % nb];
        (a, b, dist(self.nodes[a], self.nodes[b]))
    }

    pub fn boundary_edge_count(&self) -> usize {
        self.boundary_loop.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Shoelace area of the boundary polygon.
    pub fn boundary_polygon_area(&self) -> f64 {
        let nb = self.boundary_loop.len();
        (0..nb)
            .map(|k| {
                let p = self.nodes[self.boundary_loop[k]];
                let q = self.nodes[self.boundary_loop[(k + 1) % nb]];
                0.5 * (p[0] * q[1] - q[0] * p[1])
            })
            .sum()
    }

    /// Shorter-arc distance along the boundary between two arclength positions.
    pub fn boundary_distance(&self, s: f64, t: f64) -> f64 {
        let d = (s - t).rem_euclid(self.perimeter);
        d.min(self.perimeter - d)
    }

    /// Position in the boundary loop whose arclength is closest to `s` (circularly).
    fn nearest_boundary_position(&self, s: f64) -> usize {
        let s = s.rem_euclid(self.perimeter);
        let idx = self.arclength.partition_point(|&a| a <= s);
        let nb = self.boundary_loop.len();
        let lo = idx.saturating_sub(1);
        let hi = idx % nb;
        let d_lo = self.boundary_distance(self.arclength[lo], s);
        let d_hi = self.boundary_distance(self.arclength[hi], s);
        if d_hi < d_lo {
            hi
        } else {
            lo
        }
    }
}

/// A boundary arc on which the contact conductance may be nonzero.
///
/// The arc is snapped to boundary nodes: it always consists of whole boundary edges.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedElectrode {
    /// 0-based electrode number.
    pub index: usize,
    /// The interval as requested, before snapping.
    pub requested: (f64, f64),
    /// Arclength of the first node, in `[0, perimeter)`.
    pub start: f64,
    pub length: f64,
    /// Boundary-loop positions of the nodes, in counterclockwise order (endpoints included).
    pub positions: Vec<usize>,
    pub node_ids: Vec<usize>,
    /// Normalized coordinate of every node: `0` at the first, `1` at the last.
    pub node_t: Vec<f64>,
    /// Physical length of each of the `node_ids.len() - 1` edges.
    pub edge_lengths: Vec<f64>,
}

impl ExtendedElectrode {
    pub fn end(&self) -> f64 {
        self.start + self.length
    }

    pub fn edge_count(&self) -> usize {
        self.edge_lengths.len()
    }

    /// Interior nodes (endpoints excluded).
    pub fn interior_nodes(&self) -> &[usize] {
        &self.node_ids[1..self.node_ids.len() - 1]
    }

    /// Arclength -> normalized coordinate, taking the boundary wrap into account.
    pub fn to_t(&self, s: f64, perimeter: f64) -> f64 {
        let rel = (s - self.start).rem_euclid(perimeter);
        rel / self.length
    }

    /// Normalized coordinate -> unwrapped arclength (may exceed the perimeter).
    pub fn arclength_at(&self, t: f64) -> f64 {
        self.start + t * self.length
    }

    pub fn midpoint(&self) -> f64 {
        self.start + 0.5 * self.length
    }
}

/// Places electrodes on the boundary. Intervals are `(a, b)` in arclength with
/// `a < b`; `a` may be negative or `b` exceed the perimeter for an electrode
/// straddling the arclength origin. Intervals must be listed counterclockwise.
pub fn locate_electrodes(mesh: &TriMesh, intervals: &[(f64, f64)]) -> Result<Vec<ExtendedElectrode>> {
    let p = mesh.perimeter();
    let nb = mesh.boundary_loop.len();
    if intervals.len() < 2 {
        return Err(Error::InvalidArgument(
            "at least two electrodes are required".into(),
        ));
    }
    for (m, &(a, b)) in intervals.iter().enumerate() {
        if !(a.is_finite() && b.is_finite()) || b <= a || b - a >= p {
            return Err(Error::InvalidInterval(m + 1, format!("({a}, {b})")));
        }
    }
    // Overlap check in unwrapped coordinates: starts normalized into [0, P).
    let normalized: Vec<(f64, f64)> = intervals
        .iter()
        .map(|&(a, b)| {
            let a0 = a.rem_euclid(p);
            (a0, a0 + (b - a))
        })
        .collect();
    let mm = normalized.len();
    let mut lifted = normalized.clone();
    for m in 1..mm {
        while lifted[m].0 < lifted[m - 1].0 {
            lifted[m].0 += p;
            lifted[m].1 += p;
        }
    }
    for m in 0..mm {
        let next = if m + 1 < mm {
            lifted[m + 1].0
        } else {
            lifted[0].0 + p
        };
        if lifted[m].1 > next {
            let other = if m + 1 < mm { m + 2 } else { 1 };
            return Err(Error::OverlappingIntervals(m + 1, other));
        }
    }

    let mut out = Vec::with_capacity(mm);
    for (m, &(a0, b0)) in normalized.iter().enumerate() {
        let pa = mesh.nearest_boundary_position(a0);
        let pb = mesh.nearest_boundary_position(b0);
        let edges = (pb + nb - pa) % nb;
        if edges < 2 {
            return Err(Error::NoInteriorNode(m + 1));
        }
        let mut positions = Vec::with_capacity(edges + 1);
        let mut node_ids = Vec::with_capacity(edges + 1);
        let mut edge_lengths = Vec::with_capacity(edges);
        for k in 0..=edges {
            let pos = (pa + k) % nb;
            positions.push(pos);
            node_ids.push(mesh.boundary_loop[pos]);
            if k < edges {
                edge_lengths.push(mesh.boundary_edge(pos).2);
            }
        }
        let length: f64 = edge_lengths.iter().sum();
        let mut node_t = Vec::with_capacity(edges + 1);
        let mut acc = 0.0;
        node_t.push(0.0);
        for &l in &edge_lengths[..edges - 1] {
            acc += l;
            node_t.push(acc / length);
        }
        node_t.push(1.0);
        out.push(ExtendedElectrode {
            index: m,
            requested: intervals[m],
            start: mesh.arclength[pa],
            length,
            positions,
            node_ids,
            node_t,
            edge_lengths,
        });
    }

    // Separation: at least one boundary node strictly between neighbours, and
    // the electrodes plus gaps must tile the loop exactly once.
    let mut total_edges = 0usize;
    for m in 0..mm {
        let cur = &out[m];
        let nxt = &out[(m + 1) % mm];
        let last = *cur.positions.last().unwrap();
        let gap = (nxt.positions[0] + nb - last) % nb;
        if gap < 2 {
            return Err(Error::MissingSeparatingNode(m + 1, (m + 1) % mm + 1));
        }
        total_edges += cur.edge_count() + gap;
    }
    if total_edges != nb {
        return Err(Error::MissingSeparatingNode(mm, 1));
    }
    Ok(out)
}

/// Splits every triangle into four through its edge midpoints.
///
/// Original node ids are kept; midpoint ids follow in order of first appearance.
pub fn refine_uniform(mesh: &TriMesh) -> TriMesh {
    let mut nodes = mesh.nodes.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, nodes: &mut Vec<Point>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoint.entry(key).or_insert_with(|| {
            let (p, q) = (nodes[a], nodes[b]);
            nodes.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            nodes.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    for &[a, b, c] in &mesh.triangles {
        let ab = mid(a, b, &mut nodes);
        let bc = mid(b, c, &mut nodes);
        let ca = mid(c, a, &mut nodes);
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
    }
    build_boundary(nodes, triangles).expect("refinement of a valid mesh is valid")
}
