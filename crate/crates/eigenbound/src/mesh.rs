//! Conforming 2-D finite element meshes: tri3/quad4 elements, boundary tags,
//! optional periodic vertex identification, free-DOF numbering and the
//! element patches (vertex stars) that the eigenvalue bounds operate on.
//!
//! Dirichlet DOFs are eliminated by exclusion from the numbering. Free DOFs
//! are numbered in increasing vertex order; a periodic slave vertex shares the
//! DOF of its master.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    Dirichlet,
    Robin,
    Neumann,
    Periodic,
}

impl BoundaryTag {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "DIRICHLET" => Some(Self::Dirichlet),
            "ROBIN" => Some(Self::Robin),
            "NEUMANN" => Some(Self::Neumann),
            "PERIODIC" => Some(Self::Periodic),
            _ => None,
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Dirichlet => "DIRICHLET",
            Self::Robin => "ROBIN",
            Self::Neumann => "NEUMANN",
            Self::Periodic => "PERIODIC",
        };
        f.write_str(s)
    }
}

/// Element connectivity, vertices counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Element {
    Tri([usize; 3]),
    Quad([usize; 4]),
}

impl Element {
    pub fn vertices(&self) -> &[usize] {
        match self {
            Element::Tri(v) => v,
            Element::Quad(v) => v,
        }
    }

    pub fn num_edges(&self) -> usize {
        self.vertices().len()
    }

    /// Local edge `k` runs from local vertex `k` to `k+1` (cyclic).
    pub fn edge(&self, local: usize) -> (usize, usize) {
        let v = self.vertices();
        (v[local], v[(local + 1) % v.len()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub element: usize,
    pub local_edge: usize,
    pub tag: BoundaryTag,
}

/// Per-vertex DOF resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofStatus {
    Free(usize),
    DirichletEliminated,
    /// Periodic slave; the index is the master vertex.
    SlaveOf(usize),
}

/// Axis-aligned rectangle (x0, y0)–(x1, y1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn square(lo: f64, hi: f64) -> Self {
        Self::new(lo, lo, hi, hi)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Boundary tags for the four sides of a generated rectangle mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SideTags {
    pub bottom: BoundaryTag,
    pub right: BoundaryTag,
    pub top: BoundaryTag,
    pub left: BoundaryTag,
}

impl SideTags {
    pub fn all(tag: BoundaryTag) -> Self {
        Self {
            bottom: tag,
            right: tag,
            top: tag,
            left: tag,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    elements: Vec<Element>,
    boundary_edges: Vec<BoundaryEdge>,
    dof_status: Vec<DofStatus>,
    /// DOF index -> master vertex carrying it.
    dof_vertex: Vec<usize>,
    /// DOF index -> sorted ids of incident elements (including those incident
    /// to periodic slave copies of the vertex).
    patches: Vec<Vec<usize>>,
}

impl Mesh {
    /// Builds a mesh from raw pieces, resolving periodic pairs, numbering the
    /// free DOFs and building the patch map.
    pub fn assemble(
        vertices: Vec<[f64; 2]>,
        elements: Vec<Element>,
        boundary_edges: Vec<BoundaryEdge>,
        periodic_pairs: &[(usize, usize)],
    ) -> Result<Self> {
        let nv = vertices.len();
        for (e, elem) in elements.iter().enumerate() {
            for &v in elem.vertices() {
                if v >= nv {
                    return Err(Error::IndexOutOfRange(format!(
                        "element {e} references vertex {v} of {nv}"
                    )));
                }
            }
            check_orientation(&vertices, elem)
                .map_err(|msg| Error::InvalidGeometry(format!("element {e}: {msg}")))?;
        }
        for be in &boundary_edges {
            if be.element >= elements.len() {
                return Err(Error::IndexOutOfRange(format!(
                    "boundary edge references element {} of {}",
                    be.element,
                    elements.len()
                )));
            }
            if be.local_edge >= elements[be.element].num_edges() {
                return Err(Error::IndexOutOfRange(format!(
                    "element {} has no local edge {}",
                    be.element, be.local_edge
                )));
            }
        }

        // periodic identification: pairs are equivalences (a corner of a fully
        // periodic square is slave to two chains), resolved by union-find with
        // the smallest vertex of each class as its master
        let mut parent: Vec<usize> = (0..nv).collect();
        fn find(parent: &mut [usize], mut v: usize) -> usize {
            while parent[v] != v {
                parent[v] = parent[parent[v]];
                v = parent[v];
            }
            v
        }
        for &(slave, m) in periodic_pairs {
            if slave >= nv || m >= nv {
                return Err(Error::IndexOutOfRange(format!(
                    "periodic pair ({slave}, {m}) out of range ({nv} vertices)"
                )));
            }
            let ra = find(&mut parent, slave);
            let rb = find(&mut parent, m);
            if ra != rb {
                let (lo, hi) = (ra.min(rb), ra.max(rb));
                parent[hi] = lo;
            }
        }
        let canon: Vec<usize> = (0..nv).map(|v| find(&mut parent, v)).collect();

        // Dirichlet vertices: endpoints of Dirichlet-tagged boundary edges.
        // The whole periodic equivalence class of such a vertex is eliminated,
        // so no DOF ends up both periodic and Dirichlet.
        let mut dirichlet = vec![false; nv];
        for be in &boundary_edges {
            if be.tag == BoundaryTag::Dirichlet {
                let (a, b) = elements[be.element].edge(be.local_edge);
                dirichlet[canon[a]] = true;
                dirichlet[canon[b]] = true;
            }
        }

        let mut dof_status = vec![DofStatus::DirichletEliminated; nv];
        let mut dof_vertex = Vec::new();
        for v in 0..nv {
            if canon[v] != v {
                dof_status[v] = DofStatus::SlaveOf(canon[v]);
            } else if dirichlet[v] {
                dof_status[v] = DofStatus::DirichletEliminated;
            } else {
                dof_status[v] = DofStatus::Free(dof_vertex.len());
                dof_vertex.push(v);
            }
        }

        // patches: union of elements incident to the master vertex or any of
        // its periodic slaves
        let mut patch_sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); dof_vertex.len()];
        for (e, elem) in elements.iter().enumerate() {
            for &v in elem.vertices() {
                let c = canon[v];
                if let DofStatus::Free(k) = dof_status[c] {
                    patch_sets[k].insert(e);
                }
            }
        }
        let patches: Vec<Vec<usize>> = patch_sets
            .into_iter()
            .map(|s| s.into_iter().collect())
            .collect();

        Ok(Self {
            vertices,
            elements,
            boundary_edges,
            dof_status,
            dof_vertex,
            patches,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    /// Number of free DOFs (N).
    pub fn num_dofs(&self) -> usize {
        self.dof_vertex.len()
    }

    pub fn vertex(&self, v: usize) -> [f64; 2] {
        self.vertices[v]
    }

    pub fn element(&self, e: usize) -> &Element {
        &self.elements[e]
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn dof_status(&self, vertex: usize) -> DofStatus {
        self.dof_status[vertex]
    }

    /// Free DOF carried by a vertex, following periodic identification.
    pub fn dof_of_vertex(&self, vertex: usize) -> Option<usize> {
        match self.dof_status[vertex] {
            DofStatus::Free(k) => Some(k),
            DofStatus::DirichletEliminated => None,
            DofStatus::SlaveOf(m) => match self.dof_status[m] {
                DofStatus::Free(k) => Some(k),
                _ => None,
            },
        }
    }

    pub fn vertex_of_dof(&self, dof: usize) -> usize {
        self.dof_vertex[dof]
    }

    /// Smallest patch of elements covering the support of basis function k.
    pub fn patch_elements(&self, k: usize) -> Result<&[usize]> {
        self.patches.get(k).map(|v| v.as_slice()).ok_or_else(|| {
            Error::IndexOutOfRange(format!("DOF {k} out of range ({})", self.num_dofs()))
        })
    }

    pub fn element_coords(&self, e: usize) -> Vec<[f64; 2]> {
        self.elements[e]
            .vertices()
            .iter()
            .map(|&v| self.vertices[v])
            .collect()
    }

    /// Endpoints of a local edge of an element.
    pub fn edge_endpoints(&self, element: usize, local_edge: usize) -> ([f64; 2], [f64; 2]) {
        let (a, b) = self.elements[element].edge(local_edge);
        (self.vertices[a], self.vertices[b])
    }

    pub fn element_area(&self, e: usize) -> f64 {
        shoelace(&self.element_coords(e))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_elements()).map(|e| self.element_area(e)).sum()
    }

    pub fn has_dirichlet(&self) -> bool {
        self.boundary_edges
            .iter()
            .any(|b| b.tag == BoundaryTag::Dirichlet)
    }

    pub fn num_periodic_slaves(&self) -> usize {
        self.dof_status
            .iter()
            .filter(|s| matches!(s, DofStatus::SlaveOf(_)))
            .count()
    }

    /// Boundary edges of one element, in local-edge order.
    pub fn boundary_edges_of_element(&self, e: usize) -> Vec<&BoundaryEdge> {
        self.boundary_edges
            .iter()
            .filter(|b| b.element == e)
            .collect()
    }
}

fn shoelace(coords: &[[f64; 2]]) -> f64 {
    let n = coords.len();
    let mut s = 0.0;
    for i in 0..n {
        let [x0, y0] = coords[i];
        let [x1, y1] = coords[(i + 1) % n];
        s += x0 * y1 - x1 * y0;
    }
    0.5 * s
}

/// Positive orientation check. For straight-edged quads the bilinear Jacobian
/// determinant is affine in each reference coordinate, so positivity at the
/// four corners implies positivity everywhere.
fn check_orientation(vertices: &[[f64; 2]], elem: &Element) -> std::result::Result<(), String> {
    let coords: Vec<[f64; 2]> = elem.vertices().iter().map(|&v| vertices[v]).collect();
    match elem {
        Element::Tri(_) => {
            let area = shoelace(&coords);
            if area <= 0.0 {
                return Err(format!("nonpositive area {area}"));
            }
        }
        Element::Quad(_) => {
            for i in 0..4 {
                let p = coords[i];
                let nxt = coords[(i + 1) % 4];
                let prv = coords[(i + 3) % 4];
                let e1 = [nxt[0] - p[0], nxt[1] - p[1]];
                let e2 = [prv[0] - p[0], prv[1] - p[1]];
                let cross = e1[0] * e2[1] - e1[1] * e2[0];
                if cross <= 0.0 {
                    return Err(format!("nonconvex or inverted corner {i}"));
                }
            }
        }
    }
    Ok(())
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a * (1.0 - t) + b * t
}

/// Uniform n×n quad mesh of an axis-aligned rectangle, with per-side boundary
/// tags. A PERIODIC tag must be set on both opposite sides of an axis.
pub fn build_uniform_quad_mesh(domain: Rect, n: usize, bc: SideTags) -> Result<Mesh> {
    if n < 1 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let nondegenerate = domain.x1 > domain.x0 && domain.y1 > domain.y0;
    if !nondegenerate {
        return Err(Error::InvalidGeometry(format!(
            "degenerate domain ({}, {}) x ({}, {})",
            domain.x0, domain.x1, domain.y0, domain.y1
        )));
    }
    let x_periodic = bc.left == BoundaryTag::Periodic || bc.right == BoundaryTag::Periodic;
    if x_periodic && bc.left != bc.right {
        return Err(Error::UnsupportedBoundary(
            "periodic tag must be set on both left and right sides".into(),
        ));
    }
    let y_periodic = bc.bottom == BoundaryTag::Periodic || bc.top == BoundaryTag::Periodic;
    if y_periodic && bc.bottom != bc.top {
        return Err(Error::UnsupportedBoundary(
            "periodic tag must be set on both bottom and top sides".into(),
        ));
    }

    let np = n + 1;
    let mut vertices = Vec::with_capacity(np * np);
    for j in 0..np {
        let y = lerp(domain.y0, domain.y1, j as f64 / n as f64);
        for i in 0..np {
            let x = lerp(domain.x0, domain.x1, i as f64 / n as f64);
            vertices.push([x, y]);
        }
    }
    let vid = |i: usize, j: usize| j * np + i;

    let mut elements = Vec::with_capacity(n * n);
    for ey in 0..n {
        for ex in 0..n {
            elements.push(Element::Quad([
                vid(ex, ey),
                vid(ex + 1, ey),
                vid(ex + 1, ey + 1),
                vid(ex, ey + 1),
            ]));
        }
    }
    let eid = |ex: usize, ey: usize| ey * n + ex;

    let mut boundary_edges = Vec::new();
    for ex in 0..n {
        boundary_edges.push(BoundaryEdge {
            element: eid(ex, 0),
            local_edge: 0,
            tag: bc.bottom,
        });
        boundary_edges.push(BoundaryEdge {
            element: eid(ex, n - 1),
            local_edge: 2,
            tag: bc.top,
        });
    }
    for ey in 0..n {
        boundary_edges.push(BoundaryEdge {
            element: eid(n - 1, ey),
            local_edge: 1,
            tag: bc.right,
        });
        boundary_edges.push(BoundaryEdge {
            element: eid(0, ey),
            local_edge: 3,
            tag: bc.left,
        });
    }

    let mut pairs = Vec::new();
    if x_periodic {
        for j in 0..np {
            pairs.push((vid(n, j), vid(0, j)));
        }
    }
    if y_periodic {
        for i in 0..np {
            pairs.push((vid(i, n), vid(i, 0)));
        }
    }

    Mesh::assemble(vertices, elements, boundary_edges, &pairs)
}

/// Uniform triangulation of a rectangle: the n×n quad grid with each cell
/// split along the (lower-left, upper-right) diagonal.
pub fn build_uniform_tri_mesh(domain: Rect, n: usize, bc: SideTags) -> Result<Mesh> {
    let quad = build_uniform_quad_mesh(domain, n, bc)?;
    let np = n + 1;
    let vid = |i: usize, j: usize| j * np + i;
    let vertices: Vec<[f64; 2]> = (0..np * np).map(|v| quad.vertex(v)).collect();

    let mut elements = Vec::with_capacity(2 * n * n);
    for ey in 0..n {
        for ex in 0..n {
            let (v00, v10) = (vid(ex, ey), vid(ex + 1, ey));
            let (v11, v01) = (vid(ex + 1, ey + 1), vid(ex, ey + 1));
            elements.push(Element::Tri([v00, v10, v11]));
            elements.push(Element::Tri([v00, v11, v01]));
        }
    }
    let lower = |ex: usize, ey: usize| 2 * (ey * n + ex);

    let mut boundary_edges = Vec::new();
    for ex in 0..n {
        boundary_edges.push(BoundaryEdge {
            element: lower(ex, 0),
            local_edge: 0,
            tag: bc.bottom,
        });
        boundary_edges.push(BoundaryEdge {
            element: lower(ex, n - 1) + 1,
            local_edge: 1,
            tag: bc.top,
        });
    }
    for ey in 0..n {
        boundary_edges.push(BoundaryEdge {
            element: lower(n - 1, ey),
            local_edge: 1,
            tag: bc.right,
        });
        boundary_edges.push(BoundaryEdge {
            element: lower(0, ey) + 1,
            local_edge: 2,
            tag: bc.left,
        });
    }

    let mut pairs = Vec::new();
    if bc.left == BoundaryTag::Periodic {
        for j in 0..np {
            pairs.push((vid(n, j), vid(0, j)));
        }
    }
    if bc.bottom == BoundaryTag::Periodic {
        for i in 0..np {
            pairs.push((vid(i, n), vid(i, 0)));
        }
    }

    Mesh::assemble(vertices, elements, boundary_edges, &pairs)
}

/// Parses the line-oriented mesh format:
///
/// ```text
/// meshfmt 1 2
/// v <x> <y>
/// e tri <i> <j> <k>       # 0-based, counter-clockwise
/// e quad <i> <j> <k> <l>
/// b <elem> <local-edge> <TAG>
/// p <slave-vertex> <master-vertex>
/// ```
pub fn parse_mesh(text: &str) -> Result<Mesh> {
    let mut vertices: Vec<[f64; 2]> = Vec::new();
    let mut elements: Vec<Element> = Vec::new();
    let mut element_lines: Vec<usize> = Vec::new();
    let mut boundary: Vec<(BoundaryEdge, usize)> = Vec::new();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut header_seen = false;

    let err = |line: usize, msg: String| Error::MeshParse { line, msg };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        if !header_seen {
            if tok.len() != 3 || tok[0] != "meshfmt" {
                return Err(err(line_no, "expected header `meshfmt 1 <d>`".into()));
            }
            if tok[1] != "1" {
                return Err(err(line_no, format!("unsupported format version {}", tok[1])));
            }
            if tok[2] != "2" {
                return Err(err(line_no, format!("unsupported dimension {}", tok[2])));
            }
            header_seen = true;
            continue;
        }
        match tok[0] {
            "v" => {
                if tok.len() != 3 {
                    return Err(err(line_no, "vertex line needs 2 coordinates".into()));
                }
                let x: f64 = tok[1]
                    .parse()
                    .map_err(|_| err(line_no, format!("bad coordinate `{}`", tok[1])))?;
                let y: f64 = tok[2]
                    .parse()
                    .map_err(|_| err(line_no, format!("bad coordinate `{}`", tok[2])))?;
                vertices.push([x, y]);
            }
            "e" => {
                if tok.len() < 2 {
                    return Err(err(line_no, "element line needs a shape".into()));
                }
                let parse_ids = |toks: &[&str]| -> Result<Vec<usize>> {
                    toks.iter()
                        .map(|t| {
                            t.parse::<usize>()
                                .map_err(|_| err(line_no, format!("bad vertex index `{t}`")))
                        })
                        .collect()
                };
                let elem = match tok[1] {
                    "tri" => {
                        if tok.len() != 5 {
                            return Err(err(line_no, "tri element needs 3 vertices".into()));
                        }
                        let ids = parse_ids(&tok[2..])?;
                        Element::Tri([ids[0], ids[1], ids[2]])
                    }
                    "quad" => {
                        if tok.len() != 6 {
                            return Err(err(line_no, "quad element needs 4 vertices".into()));
                        }
                        let ids = parse_ids(&tok[2..])?;
                        Element::Quad([ids[0], ids[1], ids[2], ids[3]])
                    }
                    other => {
                        return Err(err(line_no, format!("unknown element shape `{other}`")))
                    }
                };
                for &v in elem.vertices() {
                    if v >= vertices.len() {
                        return Err(err(
                            line_no,
                            format!("element references vertex {v} of {}", vertices.len()),
                        ));
                    }
                }
                elements.push(elem);
                element_lines.push(line_no);
            }
            "b" => {
                if tok.len() != 4 {
                    return Err(err(line_no, "boundary line is `b <elem> <edge> <TAG>`".into()));
                }
                let element: usize = tok[1]
                    .parse()
                    .map_err(|_| err(line_no, format!("bad element id `{}`", tok[1])))?;
                let local_edge: usize = tok[2]
                    .parse()
                    .map_err(|_| err(line_no, format!("bad edge id `{}`", tok[2])))?;
                let tag = BoundaryTag::parse(tok[3])
                    .ok_or_else(|| err(line_no, format!("unknown boundary tag `{}`", tok[3])))?;
                boundary.push((
                    BoundaryEdge {
                        element,
                        local_edge,
                        tag,
                    },
                    line_no,
                ));
            }
            "p" => {
                if tok.len() != 3 {
                    return Err(err(line_no, "periodic line is `p <slave> <master>`".into()));
                }
                let s: usize = tok[1]
                    .parse()
                    .map_err(|_| err(line_no, format!("bad vertex index `{}`", tok[1])))?;
                let m: usize = tok[2]
                    .parse()
                    .map_err(|_| err(line_no, format!("bad vertex index `{}`", tok[2])))?;
                pairs.push((s, m));
            }
            other => return Err(err(line_no, format!("unknown record `{other}`"))),
        }
    }
    if !header_seen {
        return Err(Error::MeshParse {
            line: 1,
            msg: "missing `meshfmt` header".into(),
        });
    }

    for (i, elem) in elements.iter().enumerate() {
        check_orientation(&vertices, elem).map_err(|msg| Error::MeshParse {
            line: element_lines[i],
            msg: format!("inconsistent orientation: {msg}"),
        })?;
    }
    for (be, line_no) in &boundary {
        if be.element >= elements.len() {
            return Err(Error::MeshParse {
                line: *line_no,
                msg: format!("boundary references element {} of {}", be.element, elements.len()),
            });
        }
        if be.local_edge >= elements[be.element].num_edges() {
            return Err(Error::MeshParse {
                line: *line_no,
                msg: format!("element {} has no local edge {}", be.element, be.local_edge),
            });
        }
    }

    Mesh::assemble(
        vertices,
        elements,
        boundary.into_iter().map(|(b, _)| b).collect(),
        &pairs,
    )
}
