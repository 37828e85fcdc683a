//! Directed navigation meshes and multi-step reachability.
//!
//! Vertices are 0-based internally. The edge-list text format and every
//! human-facing rendering use 1-based labels (`v1..vN`).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned block of grid cells removed from a grid mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRect {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

impl CellRect {
    pub fn cell(row: usize, col: usize) -> Self {
        Self { row, col, height: 1, width: 1 }
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row >= self.row && row < self.row + self.height && col >= self.col && col < self.col + self.width
    }
}

/// Directed graph of candidate sensor locations.
///
/// Arcs are stored sorted by `(from, to)`; an arc's position in that order is
/// its *arc id*, which is also the index of its transition parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct NavMesh {
    num_vertices: usize,
    arcs: Vec<(usize, usize)>,
    /// CSR offsets into `arcs`: the arcs leaving `i` are `arcs[offsets[i]..offsets[i + 1]]`.
    offsets: Vec<usize>,
    out_neighbors: Vec<Vec<usize>>,
    coordinates: Option<Vec<[f64; 2]>>,
    grid_cells: Option<Vec<(usize, usize)>>,
}

impl NavMesh {
    /// Builds a mesh from 0-based arcs. Duplicate arcs are rejected.
    pub fn new(num_vertices: usize, arcs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if num_vertices == 0 {
            return Err(Error::InvalidMesh("mesh must have at least one vertex".into()));
        }
        let mut arcs: Vec<(usize, usize)> = arcs.into_iter().collect();
        for &(i, j) in &arcs {
            if i >= num_vertices || j >= num_vertices {
                return Err(Error::InvalidMesh(format!(
                    "arc ({}, {}) out of range for {} vertices",
                    i + 1,
                    j + 1,
                    num_vertices
                )));
            }
            if i == j {
                return Err(Error::InvalidMesh(format!("self-loop at v{}", i + 1)));
            }
        }
        arcs.sort_unstable();
        if let Some(w) = arcs.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidMesh(format!("duplicate arc ({}, {})", w[0].0 + 1, w[0].1 + 1)));
        }

        let mut offsets = vec![0usize; num_vertices + 1];
        for &(i, _) in &arcs {
            offsets[i + 1] += 1;
        }
        for i in 0..num_vertices {
            offsets[i + 1] += offsets[i];
        }
        let out_neighbors =
            (0..num_vertices).map(|i| arcs[offsets[i]..offsets[i + 1]].iter().map(|&(_, j)| j).collect()).collect();

        Ok(Self { num_vertices, arcs, offsets, out_neighbors, coordinates: None, grid_cells: None })
    }

    pub fn with_coordinates(mut self, coordinates: Vec<[f64; 2]>) -> Result<Self> {
        if coordinates.len() != self.num_vertices {
            return Err(Error::InvalidMesh(format!(
                "{} coordinates given for {} vertices",
                coordinates.len(),
                self.num_vertices
            )));
        }
        self.coordinates = Some(coordinates);
        Ok(self)
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    pub fn arc(&self, id: usize) -> (usize, usize) {
        self.arcs[id]
    }

    pub fn out_neighbors(&self, vertex: usize) -> &[usize] {
        &self.out_neighbors[vertex]
    }

    /// Arc ids leaving `vertex`, in the same order as [`Self::out_neighbors`].
    pub fn out_arc_ids(&self, vertex: usize) -> std::ops::Range<usize> {
        self.offsets[vertex]..self.offsets[vertex + 1]
    }

    pub fn arc_id(&self, from: usize, to: usize) -> Option<usize> {
        self.out_neighbors.get(from)?.binary_search(&to).ok().map(|pos| self.offsets[from] + pos)
    }

    pub fn has_arc(&self, from: usize, to: usize) -> bool {
        self.arc_id(from, to).is_some()
    }

    pub fn coordinates(&self) -> Option<&[[f64; 2]]> {
        self.coordinates.as_deref()
    }

    /// `(row, col)` of each vertex when the mesh came from [`build_grid_mesh`].
    pub fn grid_cells(&self) -> Option<&[(usize, usize)]> {
        self.grid_cells.as_deref()
    }

    /// Renders the mesh in the edge-list format, arcs sorted lexicographically.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{}", self.num_vertices).unwrap();
        for &(i, j) in &self.arcs {
            writeln!(out, "{} {}", i + 1, j + 1).unwrap();
        }
        out
    }

    /// Number of walks with `len` vertices, counted by dynamic programming over
    /// adjacency powers. Saturates instead of overflowing.
    pub fn count_walks(&self, len: usize) -> u128 {
        if len == 0 {
            return 0;
        }
        let mut ending = vec![1u128; self.num_vertices];
        for _ in 1..len {
            let mut next = vec![0u128; self.num_vertices];
            for &(i, j) in &self.arcs {
                next[j] = next[j].saturating_add(ending[i]);
            }
            ending = next;
        }
        ending.into_iter().fold(0u128, |acc, c| acc.saturating_add(c))
    }
}

/// 4-connected grid with bidirectional arcs between orthogonal neighbours.
///
/// Vertices are numbered row-major over the cells that survive hole removal;
/// coordinates are cell centres scaled onto the unit square.
pub fn build_grid_mesh(rows: usize, cols: usize, holes: &[CellRect]) -> Result<NavMesh> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidMesh(format!("grid must be at least 1x1, got {rows}x{cols}")));
    }
    for h in holes {
        if h.height == 0 || h.width == 0 || h.row + h.height > rows || h.col + h.width > cols {
            return Err(Error::InvalidMesh(format!("hole {h:?} does not lie within the {rows}x{cols} grid")));
        }
    }

    let mut index = vec![None; rows * cols];
    let mut cells = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if !holes.iter().any(|h| h.contains(r, c)) {
                index[r * cols + c] = Some(cells.len());
                cells.push((r, c));
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::InvalidMesh("grid is empty after hole removal".into()));
    }

    let mut arcs = Vec::new();
    for (v, &(r, c)) in cells.iter().enumerate() {
        let mut neighbours = Vec::with_capacity(4);
        if r > 0 {
            neighbours.push((r - 1, c));
        }
        if r + 1 < rows {
            neighbours.push((r + 1, c));
        }
        if c > 0 {
            neighbours.push((r, c - 1));
        }
        if c + 1 < cols {
            neighbours.push((r, c + 1));
        }
        for (nr, nc) in neighbours {
            if let Some(u) = index[nr * cols + nc] {
                arcs.push((v, u));
            }
        }
    }

    let coordinates =
        cells.iter().map(|&(r, c)| [(c as f64 + 0.5) / cols as f64, (r as f64 + 0.5) / rows as f64]).collect();
    let mut mesh = NavMesh::new(cells.len(), arcs)?.with_coordinates(coordinates)?;
    mesh.grid_cells = Some(cells);
    Ok(mesh)
}

/// Parses the edge-list format: first non-comment line is the vertex count,
/// every further non-comment line is a 1-based arc `i j`. Lines starting
/// with `#` and blank lines are ignored.
pub fn load_mesh(text: &str) -> Result<NavMesh> {
    let mut num_vertices: Option<usize> = None;
    let mut arcs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: line_no, message };
        let fields: Vec<&str> = line.split_whitespace().collect();
        match num_vertices {
            None => {
                if fields.len() != 1 {
                    return Err(parse_err(format!("expected vertex count, found {line:?}")));
                }
                let n: usize =
                    fields[0].parse().map_err(|_| parse_err(format!("invalid vertex count {:?}", fields[0])))?;
                if n == 0 {
                    return Err(parse_err("vertex count must be positive".into()));
                }
                num_vertices = Some(n);
            }
            Some(n) => {
                if fields.len() != 2 {
                    return Err(parse_err(format!("expected \"i j\", found {line:?}")));
                }
                let mut ends = [0usize; 2];
                for (slot, f) in ends.iter_mut().zip(&fields) {
                    let v: usize = f.parse().map_err(|_| parse_err(format!("invalid vertex index {f:?}")))?;
                    if v == 0 || v > n {
                        return Err(parse_err(format!("vertex index {v} out of range 1..={n}")));
                    }
                    *slot = v - 1;
                }
                if ends[0] == ends[1] {
                    return Err(parse_err(format!("self-loop at v{}", ends[0] + 1)));
                }
                if arcs.contains(&(ends[0], ends[1])) {
                    return Err(parse_err(format!("duplicate arc {} {}", ends[0] + 1, ends[1] + 1)));
                }
                arcs.push((ends[0], ends[1]));
            }
        }
    }
    let n = num_vertices.ok_or(Error::Parse { line: 0, message: "missing vertex count".into() })?;
    NavMesh::new(n, arcs)
}

/// One stored reachable target together with every walk realizing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Reach {
    pub target: usize,
    /// Each walk is a sequence of arc ids of length `r`.
    pub walks: Vec<Vec<usize>>,
}

/// Explicit `r`-step walks for `r = 1..=order`, precomputed from connectivity.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachabilityIndex {
    order: usize,
    /// `steps[r - 1][i]` lists targets reachable from `i` in exactly `r` arcs, sorted.
    steps: Vec<Vec<Vec<Reach>>>,
}

impl ReachabilityIndex {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Targets reachable from `from` in exactly `r` arcs (1 ≤ r ≤ order).
    pub fn reach(&self, r: usize, from: usize) -> &[Reach] {
        &self.steps[r - 1][from]
    }

    pub fn reachable(&self, r: usize, from: usize) -> impl Iterator<Item = usize> + '_ {
        self.reach(r, from).iter().map(|x| x.target)
    }

    pub fn walks(&self, r: usize, from: usize, to: usize) -> &[Vec<usize>] {
        let row = self.reach(r, from);
        match row.binary_search_by_key(&to, |x| x.target) {
            Ok(pos) => &row[pos].walks,
            Err(_) => &[],
        }
    }
}

pub fn build_reachability(mesh: &NavMesh, order: usize) -> Result<ReachabilityIndex> {
    if order == 0 {
        return Err(Error::Contract("reachability order must be at least 1".into()));
    }
    let n = mesh.num_vertices();
    let mut steps: Vec<Vec<Vec<Reach>>> = Vec::with_capacity(order);

    let first: Vec<Vec<Reach>> = (0..n)
        .map(|i| mesh.out_arc_ids(i).map(|a| Reach { target: mesh.arc(a).1, walks: vec![vec![a]] }).collect())
        .collect();
    steps.push(first);

    for _ in 1..order {
        let prev = steps.last().unwrap();
        let next = (0..n)
            .map(|i| {
                let mut grouped: BTreeMap<usize, Vec<Vec<usize>>> = BTreeMap::new();
                for reach in &prev[i] {
                    for walk in &reach.walks {
                        for a in mesh.out_arc_ids(reach.target) {
                            let mut extended = walk.clone();
                            extended.push(a);
                            grouped.entry(mesh.arc(a).1).or_default().push(extended);
                        }
                    }
                }
                grouped.into_iter().map(|(target, walks)| Reach { target, walks }).collect()
            })
            .collect();
        steps.push(next);
    }
    Ok(ReachabilityIndex { order, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn grid_single_cell() {
        let m = build_grid_mesh(1, 1, &[]).unwrap();
        assert_eq!(m.num_vertices(), 1);
        assert_eq!(m.num_arcs(), 0);
        assert_eq!(m.coordinates().unwrap()[0], [0.5, 0.5]);
    }

    #[test]
    fn grid_two_by_two() {
        let m = build_grid_mesh(2, 2, &[]).unwrap();
        assert_eq!((m.num_vertices(), m.num_arcs()), (4, 8));
    }

    #[test]
    fn grid_ring_around_center_hole() {
        let m = build_grid_mesh(3, 3, &[CellRect::cell(1, 1)]).unwrap();
        assert_eq!((m.num_vertices(), m.num_arcs()), (8, 16));
        for v in 0..8 {
            assert_eq!(m.out_neighbors(v).len(), 2);
        }
    }

    #[test]
    fn grid_errors() {
        assert!(matches!(build_grid_mesh(0, 3, &[]), Err(Error::InvalidMesh(_))));
        let all = CellRect { row: 0, col: 0, height: 2, width: 2 };
        assert!(matches!(build_grid_mesh(2, 2, &[all]), Err(Error::InvalidMesh(_))));
        assert!(matches!(build_grid_mesh(2, 2, &[CellRect::cell(2, 0)]), Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn load_five_node_mesh() {
        let m = load_mesh(fixtures::FIVE_NODE_MESH).unwrap();
        assert_eq!((m.num_vertices(), m.num_arcs()), (5, 8));
        assert_eq!(m.out_neighbors(0), &[1, 2, 3]);
        assert_eq!(m.out_neighbors(4), &[1]);
    }

    #[test]
    fn load_isolated_vertices() {
        let m = load_mesh("# two nodes\n2\n").unwrap();
        assert_eq!((m.num_vertices(), m.num_arcs()), (2, 0));
    }

    #[test]
    fn load_errors_name_line() {
        assert_eq!(
            load_mesh("3\n1 2\n1 1\n").unwrap_err(),
            Error::Parse { line: 3, message: "self-loop at v1".into() }
        );
        assert!(matches!(load_mesh("3\n1 4\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(load_mesh("3\n1 x\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(load_mesh("3\n\n1 2 3\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(load_mesh("# only comments\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn edge_list_round_trip() {
        let m = build_grid_mesh(3, 4, &[CellRect::cell(1, 2)]).unwrap();
        let back = load_mesh(&m.to_edge_list()).unwrap();
        assert_eq!(back.num_vertices(), m.num_vertices());
        assert_eq!(back.arcs(), m.arcs());
    }

    #[test]
    fn five_node_two_step_reachability() {
        let m = fixtures::five_node_mesh();
        let idx = build_reachability(&m, 2).unwrap();
        assert_eq!(idx.reachable(2, 0).collect::<Vec<_>>(), vec![0, 2, 3]);
        assert_eq!(idx.reachable(2, 3).collect::<Vec<_>>(), vec![0]);
        // v1 -> v3 in two steps via v2 or v4
        assert_eq!(idx.walks(2, 0, 2).len(), 2);
        assert!(idx.walks(2, 0, 1).is_empty());
    }

    #[test]
    fn order_one_matches_out_neighbors() {
        let m = build_grid_mesh(3, 3, &[]).unwrap();
        let idx = build_reachability(&m, 1).unwrap();
        for v in 0..m.num_vertices() {
            assert_eq!(idx.reachable(1, v).collect::<Vec<_>>(), m.out_neighbors(v));
        }
        assert!(build_reachability(&m, 0).is_err());
    }

    #[test]
    fn walk_counts_match_enumeration() {
        let m = build_grid_mesh(3, 3, &[CellRect::cell(1, 1)]).unwrap();
        assert_eq!(m.count_walks(1), 8);
        assert_eq!(m.count_walks(4), 64);
    }
}
