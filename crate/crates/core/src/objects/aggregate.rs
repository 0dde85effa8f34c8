use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ObjectFragment;
use crate::geometry::box3d_iou;
use crate::graph::{NodeId, ObjectNode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregateParams {
    pub spatial_iou_min: f64,
    pub overlap_min: f64,
    /// When set, tags match if their normalized Levenshtein similarity
    /// reaches this value; otherwise only identical tags match.
    pub tag_similarity_min: Option<f64>,
}

impl Default for AggregateParams {
    fn default() -> Self {
        Self {
            spatial_iou_min: 0.25,
            overlap_min: 0.5,
            tag_similarity_min: None,
        }
    }
}

fn tag_matches(tag: &str, node: &ObjectNode, params: &AggregateParams) -> bool {
    if node.tags.is_empty() || node.tags.contains_key(tag) {
        return true;
    }
    match params.tag_similarity_min {
        Some(min) => node.tags.keys().any(|t| strsim::normalized_levenshtein(t, tag) >= min),
        None => false,
    }
}

/// Greedy sequential merge in fragment order. A fragment joins the
/// qualifying node with the highest box IoU, then the highest share of its
/// points inside the node box, then the lowest id; otherwise it starts a
/// new node.
pub fn aggregate_objects(fragments: &[ObjectFragment], params: &AggregateParams) -> Vec<ObjectNode> {
    let mut nodes: Vec<ObjectNode> = Vec::new();
    for frag in fragments {
        let mut best: Option<(usize, f64, f64)> = None;
        for (k, node) in nodes.iter().enumerate() {
            if !tag_matches(&frag.tag, node, params) {
                continue;
            }
            let iou = box3d_iou(&frag.bbox, &node.bbox).unwrap_or(0.0);
            let inside = frag.cloud.points().iter().filter(|p| node.bbox.contains(p)).count() as f64
                / frag.cloud.len().max(1) as f64;
            if iou < params.spatial_iou_min && inside < params.overlap_min {
                continue;
            }
            if best.is_none_or(|(_, bi, bo)| iou > bi || (iou == bi && inside > bo)) {
                best = Some((k, iou, inside));
            }
        }
        match best {
            Some((k, _, _)) => {
                let node = &mut nodes[k];
                node.cloud.extend(&frag.cloud);
                node.bbox = node.bbox.union(&frag.bbox);
                *node.tags.entry(frag.tag.clone()).or_insert(0) += 1;
                node.primary_tag = ObjectNode::modal_tag(&node.tags);
            }
            None => {
                let tags: BTreeMap<String, u32> = [(frag.tag.clone(), 1)].into();
                nodes.push(ObjectNode {
                    id: nodes.len() as NodeId,
                    cloud: frag.cloud.clone(),
                    bbox: frag.bbox,
                    primary_tag: frag.tag.clone(),
                    tags,
                    room_id: None,
                    location_id: None,
                });
            }
        }
    }
    nodes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PointCloud;
    use proptest::prelude::*;

    fn frag(frame_id: u32, tag: &str, min: [f64; 3], size: f64) -> ObjectFragment {
        let pts: Vec<[f64; 3]> = (0..27)
            .map(|i| {
                let s = [(i % 3) as f64, ((i / 3) % 3) as f64, (i / 9) as f64];
                [min[0] + s[0] * size / 2.0, min[1] + s[1] * size / 2.0, min[2] + s[2] * size / 2.0]
            })
            .collect();
        let cloud = PointCloud::new(pts).unwrap();
        ObjectFragment {
            frame_id,
            tag: tag.into(),
            bbox: cloud.bounding_box().unwrap(),
            cloud,
        }
    }

    #[test]
    fn three_views_one_node() {
        let f = [
            frag(0, "vase", [0.0, 0.0, 0.0], 0.4),
            frag(1, "vase", [0.05, 0.0, 0.0], 0.4),
            frag(2, "vase", [0.0, 0.05, 0.02], 0.4),
        ];
        let nodes = aggregate_objects(&f, &AggregateParams::default());
        assert_eq!(nodes.len(), 1);
        assert_eq!(nodes[0].tags["vase"], 3);
        assert_eq!(nodes[0].cloud.len(), 81);
    }

    #[test]
    fn distant_chairs_stay_apart() {
        let f = [frag(0, "chair", [0.0; 3], 0.5), frag(0, "chair", [2.0, 0.0, 0.0], 0.5)];
        assert_eq!(aggregate_objects(&f, &AggregateParams::default()).len(), 2);
    }

    #[test]
    fn synonyms_need_the_hook() {
        let f = [frag(0, "sofa", [0.0; 3], 1.0), frag(1, "couch", [0.0; 3], 1.0)];
        assert_eq!(aggregate_objects(&f, &AggregateParams::default()).len(), 2);
        let f = [frag(0, "armchair", [0.0; 3], 1.0), frag(1, "arm chair", [0.0; 3], 1.0)];
        let hook = AggregateParams {
            tag_similarity_min: Some(0.8),
            ..Default::default()
        };
        let nodes = aggregate_objects(&f, &hook);
        assert_eq!(nodes.len(), 1);
        assert_eq!(nodes[0].tags.len(), 2);
        assert_eq!(nodes[0].primary_tag, "arm chair");
    }

    proptest! {
        #[test]
        fn merging_conserves_points(specs in prop::collection::vec((0u8..3, 0.0f64..3.0, 0.0f64..3.0, 0.2f64..1.0), 0..30)) {
            let tags = ["chair", "table", "lamp"];
            let frags: Vec<_> = specs.iter().enumerate()
                .map(|(i, &(t, x, y, s))| frag(i as u32, tags[t as usize], [x, y, 0.0], s))
                .collect();
            let nodes = aggregate_objects(&frags, &AggregateParams::default());
            let total: usize = nodes.iter().map(|n| n.cloud.len()).sum();
            prop_assert_eq!(total, frags.len() * 27);
            let obs: u32 = nodes.iter().flat_map(|n| n.tags.values()).sum();
            prop_assert_eq!(obs as usize, frags.len());
            for (k, n) in nodes.iter().enumerate() {
                prop_assert_eq!(n.id as usize, k);
                prop_assert!(n.cloud.points().iter().all(|p| n.bbox.contains(p)));
            }
        }
    }
}
