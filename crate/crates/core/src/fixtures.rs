//! The five-node illustrative instance used throughout the test suites.
//!
//! Arcs: v1→v2, v1→v3, v1→v4, v2→v3, v2→v4, v3→v1, v4→v3, v5→v2. Every
//! parameter is 1/2 except the arc v1→v4, which is 4/5.

use crate::navmesh::{load_mesh, NavMesh};
use crate::policy::{LagMode, PolicyParams};

pub const FIVE_NODE_MESH: &str = "\
# five-node illustrative mesh
5
1 2
1 3
1 4
2 3
2 4
3 1
4 3
5 2
";

pub fn five_node_mesh() -> NavMesh {
    load_mesh(FIVE_NODE_MESH).expect("fixture mesh parses")
}

pub fn five_node_params(mesh: &NavMesh) -> PolicyParams {
    let mut transition = vec![0.5; mesh.num_arcs()];
    transition[mesh.arc_id(0, 3).expect("arc v1->v4")] = 0.8;
    PolicyParams::new(mesh, vec![0.5; 5], transition, None, LagMode::Optimized).expect("fixture params valid")
}

pub fn five_node_example() -> (NavMesh, PolicyParams) {
    let mesh = five_node_mesh();
    let params = five_node_params(&mesh);
    (mesh, params)
}
