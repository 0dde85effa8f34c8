use super::{NodeId, NodeKind, SceneGraph};

pub fn node_line(id: NodeId, tag: &str) -> String {
    format!("{id}: {tag}")
}

/// `"<id>: <tag>"` per entity, sorted by id, newline-separated.
pub fn textualize_layer(graph: &SceneGraph, kind: NodeKind) -> String {
    let lines: Vec<String> = match kind {
        NodeKind::Building => vec![node_line(super::BUILDING_ID, &graph.building.tag)],
        NodeKind::Floor => graph.floors.values().map(|n| node_line(n.id, &n.tag)).collect(),
        NodeKind::Room => graph.rooms.values().map(|n| node_line(n.id, &n.tag)).collect(),
        NodeKind::Location => graph.locations.values().map(|n| node_line(n.id, &n.tag)).collect(),
        NodeKind::Object => graph.objects.values().map(|n| node_line(n.id, &n.primary_tag)).collect(),
    };
    lines.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build::tests::{floor, object, room};
    use crate::graph::{build_graph, GraphInputs};

    #[test]
    fn layer_listings() {
        let mut o = object(0, [1.0, 1.0, 0.5], "sofa");
        o.tags.insert("couch".into(), 5);
        o.primary_tag = "couch".into();
        let g = build_graph(GraphInputs {
            floors: vec![floor()],
            rooms: vec![room(2, 20, 40, "bedroom"), room(1, 0, 20, "kitchen")],
            objects: vec![o],
            ..Default::default()
        })
        .unwrap();
        assert_eq!(textualize_layer(&g, NodeKind::Room), "1: kitchen\n2: bedroom");
        assert_eq!(textualize_layer(&g, NodeKind::Object), "0: couch");
        assert_eq!(textualize_layer(&g, NodeKind::Location), "");
    }
}
