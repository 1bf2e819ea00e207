//! Quadrilateral meshes: structured generation, seeded interior
//! perturbation, uniform refinement, oriented edge extraction, and named
//! node/edge tags for boundary and interior constraints.
//!
//! Every global edge is stored as a node pair `(lo, hi)` with `lo < hi`, and
//! its global direction runs from `lo` to `hi`. Elements record, per local
//! edge, the global edge index together with the sign `psi` that is `+1`
//! exactly when the local counterclockwise direction agrees with the global
//! one. This is the only orientation data the rest of the crate needs.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::piola::ElementGeometry;
use crate::refspaces::EDGE_VERTICES;

/// Name of the automatically maintained boundary tag. Rebuilt on every
/// construction; user entries under this name are overwritten.
pub const BOUNDARY_TAG: &str = "boundary";

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("grid must have at least one element in each direction")]
    EmptyGrid,
    #[error("domain must have positive width and height")]
    EmptyDomain,
    #[error("element {0} references node {1}, which does not exist")]
    NodeOutOfRange(usize, usize),
    #[error("element {0} repeats a node")]
    RepeatedNode(usize),
    #[error("element {0} is not counterclockwise")]
    NotCounterclockwise(usize),
    #[error("element {0} has a nonpositive Jacobian determinant")]
    NonPositiveJacobian(usize),
    #[error("edge ({0}, {1}) is shared by more than two elements")]
    NonManifold(usize, usize),
    #[error("perturbation magnitude must lie in [0, 0.5), got {0}")]
    InvalidMagnitude(f64),
    #[error("interior perturbation could not keep all Jacobians positive")]
    PerturbationFailed,
    #[error("tag references edge ({0}, {1}), which is not in the mesh")]
    UnknownEdge(usize, usize),
    #[error("tag \"{0}\" collected nothing: {1}")]
    EmptyTagRegion(String, String),
    #[error("mesh JSON is invalid: {0}")]
    Json(String),
}

/// Nodes and edges collected under one tag name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TagSet {
    pub nodes: Vec<usize>,
    /// Indices into [`EdgeTable::edges`].
    pub edges: Vec<usize>,
}

/// Global edge list plus the per-element connectivity into it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeTable {
    /// Node pairs `(lo, hi)` with `lo < hi`.
    pub edges: Vec<(usize, usize)>,
    /// Per element, in local edge order: `(edge index, psi)`.
    pub elem_edges: Vec<[(usize, f64); 4]>,
    /// Number of elements incident to each edge (1 on the boundary, 2 inside).
    pub incidence: Vec<u8>,
}

/// What [`QuadMesh::tag_region`] should collect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagKind {
    Nodes,
    /// Edges whose both endpoints satisfy the predicate.
    Edges,
}

/// A conforming mesh of bilinear quadrilaterals.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadMesh {
    pub nodes: Vec<[f64; 2]>,
    /// Corner node indices, counterclockwise.
    pub elems: Vec<[usize; 4]>,
    pub edge_table: EdgeTable,
    pub tags: BTreeMap<String, TagSet>,
    edge_lookup: BTreeMap<(usize, usize), usize>,
}

#[derive(Serialize, Deserialize)]
struct TagJson {
    nodes: Vec<usize>,
    edges: Vec<[usize; 2]>,
}

#[derive(Serialize, Deserialize)]
struct MeshJson {
    nodes: Vec<[f64; 2]>,
    elems: Vec<[usize; 4]>,
    tags: BTreeMap<String, TagJson>,
}

impl QuadMesh {
    /// Builds a mesh from raw nodes and counterclockwise elements, deriving
    /// the edge table and the boundary tag.
    pub fn from_parts(nodes: Vec<[f64; 2]>, elems: Vec<[usize; 4]>) -> Result<Self, MeshError> {
        Self::from_parts_tagged(nodes, elems, BTreeMap::new())
    }

    fn from_parts_tagged(
        nodes: Vec<[f64; 2]>,
        elems: Vec<[usize; 4]>,
        tag_pairs: BTreeMap<String, (Vec<usize>, Vec<(usize, usize)>)>,
    ) -> Result<Self, MeshError> {
        let mut mesh = Self {
            nodes,
            elems,
            edge_table: EdgeTable::default(),
            tags: BTreeMap::new(),
            edge_lookup: BTreeMap::new(),
        };
        mesh.validate_elements()?;
        mesh.rebuild_edges()?;
        for (name, (tag_nodes, pairs)) in tag_pairs {
            if name == BOUNDARY_TAG {
                continue;
            }
            let mut set = TagSet {
                nodes: tag_nodes,
                edges: Vec::with_capacity(pairs.len()),
            };
            for (a, b) in pairs {
                let key = (a.min(b), a.max(b));
                let idx = mesh
                    .edge_lookup
                    .get(&key)
                    .ok_or(MeshError::UnknownEdge(key.0, key.1))?;
                set.edges.push(*idx);
            }
            set.normalize();
            mesh.tags.insert(name, set);
        }
        Ok(mesh)
    }

    /// Uniform `nx` by `ny` grid of an axis-aligned rectangle spanned by
    /// `lower` and `upper`. Nodes run row by row, x fastest.
    pub fn generate_structured(
        nx: usize,
        ny: usize,
        lower: [f64; 2],
        upper: [f64; 2],
    ) -> Result<Self, MeshError> {
        if nx == 0 || ny == 0 {
            return Err(MeshError::EmptyGrid);
        }
        if upper[0] <= lower[0] || upper[1] <= lower[1] {
            return Err(MeshError::EmptyDomain);
        }
        let hx = (upper[0] - lower[0]) / nx as f64;
        let hy = (upper[1] - lower[1]) / ny as f64;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            let y = if j == ny { upper[1] } else { lower[1] + j as f64 * hy };
            for i in 0..=nx {
                let x = if i == nx { upper[0] } else { lower[0] + i as f64 * hx };
                nodes.push([x, y]);
            }
        }
        let at = |i: usize, j: usize| j * (nx + 1) + i;
        let mut elems = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                elems.push([at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)]);
            }
        }
        Self::from_parts(nodes, elems)
    }

    fn validate_elements(&self) -> Result<(), MeshError> {
        for (e, elem) in self.elems.iter().enumerate() {
            for &n in elem {
                if n >= self.nodes.len() {
                    return Err(MeshError::NodeOutOfRange(e, n));
                }
            }
            for i in 0..4 {
                for j in (i + 1)..4 {
                    if elem[i] == elem[j] {
                        return Err(MeshError::RepeatedNode(e));
                    }
                }
            }
            let c: Vec<[f64; 2]> = elem.iter().map(|&n| self.nodes[n]).collect();
            let mut area = 0.0;
            for i in 0..4 {
                let j = (i + 1) % 4;
                area += 0.5 * (c[i][0] * c[j][1] - c[j][0] * c[i][1]);
            }
            if area <= 0.0 {
                return Err(MeshError::NotCounterclockwise(e));
            }
            if !self.geometry(e).detj_positive() {
                return Err(MeshError::NonPositiveJacobian(e));
            }
        }
        Ok(())
    }

    /// Rebuilds the edge table, lookup map, and boundary tag from the
    /// element list. Edge indices follow first encounter in element order.
    fn rebuild_edges(&mut self) -> Result<(), MeshError> {
        let mut edges = Vec::new();
        let mut lookup = BTreeMap::new();
        let mut incidence: Vec<u8> = Vec::new();
        let mut elem_edges = Vec::with_capacity(self.elems.len());
        for elem in &self.elems {
            let mut entry = [(0usize, 1.0f64); 4];
            for (le, &(va, vb)) in EDGE_VERTICES.iter().enumerate() {
                let (a, b) = (elem[va], elem[vb]);
                let key = (a.min(b), a.max(b));
                let idx = *lookup.entry(key).or_insert_with(|| {
                    edges.push(key);
                    incidence.push(0);
                    edges.len() - 1
                });
                if incidence[idx] == 2 {
                    return Err(MeshError::NonManifold(key.0, key.1));
                }
                incidence[idx] += 1;
                entry[le] = (idx, if a < b { 1.0 } else { -1.0 });
            }
            elem_edges.push(entry);
        }
        let mut boundary = TagSet::default();
        for (idx, &count) in incidence.iter().enumerate() {
            if count == 1 {
                boundary.edges.push(idx);
                boundary.nodes.push(edges[idx].0);
                boundary.nodes.push(edges[idx].1);
            }
        }
        boundary.normalize();
        self.edge_table = EdgeTable {
            edges,
            elem_edges,
            incidence,
        };
        self.edge_lookup = lookup;
        self.tags.insert(BOUNDARY_TAG.to_string(), boundary);
        Ok(())
    }

    /// Bilinear geometry of one element.
    pub fn geometry(&self, e: usize) -> ElementGeometry {
        let el = self.elems[e];
        ElementGeometry::new([
            self.nodes[el[0]],
            self.nodes[el[1]],
            self.nodes[el[2]],
            self.nodes[el[3]],
        ])
    }

    pub fn tag(&self, name: &str) -> Option<&TagSet> {
        self.tags.get(name)
    }

    /// Global index of the edge joining two nodes, in either order.
    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&(a.min(b), a.max(b))).copied()
    }

    /// Length of the shortest edge.
    pub fn min_edge_length(&self) -> f64 {
        self.edge_table
            .edges
            .iter()
            .map(|&(a, b)| {
                let d = [
                    self.nodes[b][0] - self.nodes[a][0],
                    self.nodes[b][1] - self.nodes[a][1],
                ];
                d[0].hypot(d[1])
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Adds nodes (or edges with both endpoints) satisfying a coordinate
    /// predicate to the named tag. Returns how many entities were added, so
    /// callers can report empty selections.
    pub fn tag_region(
        &mut self,
        tag: &str,
        predicate: impl Fn(f64, f64) -> bool,
        kind: TagKind,
    ) -> usize {
        let set = self.tags.entry(tag.to_string()).or_default();
        let before = set.nodes.len() + set.edges.len();
        match kind {
            TagKind::Nodes => {
                for (n, p) in self.nodes.iter().enumerate() {
                    if predicate(p[0], p[1]) {
                        set.nodes.push(n);
                    }
                }
            }
            TagKind::Edges => {
                for (idx, &(a, b)) in self.edge_table.edges.iter().enumerate() {
                    let pa = self.nodes[a];
                    let pb = self.nodes[b];
                    if predicate(pa[0], pa[1]) && predicate(pb[0], pb[1]) {
                        set.edges.push(idx);
                    }
                }
            }
        }
        set.normalize();
        set.nodes.len() + set.edges.len() - before
    }

    /// Displaces interior nodes by a seeded pseudo-random offset of at most
    /// `magnitude` times the shortest edge length per coordinate. Nodes that
    /// belong to any tag, including the boundary, stay put, as do endpoints
    /// of tagged edges. Offsets of nodes whose elements would invert are
    /// halved and the check repeated, up to ten times.
    pub fn perturb_interior(&self, magnitude: f64, seed: u64) -> Result<Self, MeshError> {
        if !(0.0..0.5).contains(&magnitude) {
            return Err(MeshError::InvalidMagnitude(magnitude));
        }
        if magnitude == 0.0 {
            return Ok(self.clone());
        }
        let mut fixed = vec![false; self.nodes.len()];
        for set in self.tags.values() {
            for &n in &set.nodes {
                fixed[n] = true;
            }
            for &e in &set.edges {
                let (a, b) = self.edge_table.edges[e];
                fixed[a] = true;
                fixed[b] = true;
            }
        }
        let scale = magnitude * self.min_edge_length();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut offsets = vec![[0.0f64; 2]; self.nodes.len()];
        for (n, off) in offsets.iter_mut().enumerate() {
            if !fixed[n] {
                *off = [
                    scale * rng.random_range(-1.0..=1.0),
                    scale * rng.random_range(-1.0..=1.0),
                ];
            }
        }
        let mut damping = vec![1.0f64; self.nodes.len()];
        let mut out = self.clone();
        for attempt in 0..=10 {
            for (n, p) in out.nodes.iter_mut().enumerate() {
                p[0] = self.nodes[n][0] + damping[n] * offsets[n][0];
                p[1] = self.nodes[n][1] + damping[n] * offsets[n][1];
            }
            let mut ok = true;
            for e in 0..out.elems.len() {
                if !out.geometry(e).detj_positive() {
                    ok = false;
                    for &n in &out.elems[e] {
                        damping[n] *= 0.5;
                    }
                }
            }
            if ok {
                return Ok(out);
            }
            if attempt == 10 {
                break;
            }
        }
        Err(MeshError::PerturbationFailed)
    }

    /// Splits every element into four at edge midpoints and the bilinear
    /// center. Tags propagate: tagged edges contribute their two halves and
    /// their midpoint node.
    pub fn refine_uniform(&self) -> Result<Self, MeshError> {
        let n0 = self.nodes.len();
        let ne = self.edge_table.edges.len();
        let mut nodes = self.nodes.clone();
        for &(a, b) in &self.edge_table.edges {
            nodes.push([
                0.5 * (self.nodes[a][0] + self.nodes[b][0]),
                0.5 * (self.nodes[a][1] + self.nodes[b][1]),
            ]);
        }
        for elem in &self.elems {
            let mut c = [0.0f64; 2];
            for &n in elem {
                c[0] += 0.25 * self.nodes[n][0];
                c[1] += 0.25 * self.nodes[n][1];
            }
            nodes.push(c);
        }
        let mut elems = Vec::with_capacity(4 * self.elems.len());
        for (k, elem) in self.elems.iter().enumerate() {
            let m: Vec<usize> = (0..4)
                .map(|le| n0 + self.edge_table.elem_edges[k][le].0)
                .collect();
            let c = n0 + ne + k;
            elems.push([elem[0], m[0], c, m[3]]);
            elems.push([m[0], elem[1], m[1], c]);
            elems.push([c, m[1], elem[2], m[2]]);
            elems.push([m[3], c, m[2], elem[3]]);
        }
        let mut tag_pairs = BTreeMap::new();
        for (name, set) in &self.tags {
            if name == BOUNDARY_TAG {
                continue;
            }
            let mut tag_nodes = set.nodes.clone();
            let mut pairs = Vec::with_capacity(2 * set.edges.len());
            for &e in &set.edges {
                let (lo, hi) = self.edge_table.edges[e];
                let mid = n0 + e;
                tag_nodes.push(mid);
                pairs.push((lo, mid));
                pairs.push((mid, hi));
            }
            tag_pairs.insert(name.clone(), (tag_nodes, pairs));
        }
        Self::from_parts_tagged(nodes, elems, tag_pairs)
    }

    pub fn to_json(&self) -> String {
        let tags = self
            .tags
            .iter()
            .map(|(name, set)| {
                let edges = set
                    .edges
                    .iter()
                    .map(|&e| {
                        let (lo, hi) = self.edge_table.edges[e];
                        [lo, hi]
                    })
                    .collect();
                (
                    name.clone(),
                    TagJson {
                        nodes: set.nodes.clone(),
                        edges,
                    },
                )
            })
            .collect();
        let doc = MeshJson {
            nodes: self.nodes.clone(),
            elems: self.elems.clone(),
            tags,
        };
        serde_json::to_string_pretty(&doc).expect("mesh JSON serialization cannot fail")
    }

    /// Parses the JSON produced by [`QuadMesh::to_json`]. The edge table is
    /// rebuilt, so only nodes, elements, and tags are read.
    pub fn from_json(text: &str) -> Result<Self, MeshError> {
        let doc: MeshJson = serde_json::from_str(text).map_err(|e| MeshError::Json(e.to_string()))?;
        let tag_pairs = doc
            .tags
            .into_iter()
            .map(|(name, t)| {
                let pairs = t.edges.iter().map(|&[a, b]| (a, b)).collect();
                (name, (t.nodes, pairs))
            })
            .collect();
        Self::from_parts_tagged(doc.nodes, doc.elems, tag_pairs)
    }
}

impl TagSet {
    fn normalize(&mut self) {
        self.nodes.sort_unstable();
        self.nodes.dedup();
        self.edges.sort_unstable();
        self.edges.dedup();
    }
}
