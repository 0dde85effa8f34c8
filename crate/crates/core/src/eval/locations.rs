//! Location masks of a built graph against ground-truth polygons.

use serde::{Deserialize, Serialize};

use super::{f1_sweep, EvalError, MatchOrder, MatchReport};
use crate::geometry::Polygon2D;
use crate::graph::{NodeId, SceneGraph};

/// Ground-truth location outlines of one storey.
#[derive(Debug, Clone, PartialEq)]
pub struct GtFloor {
    pub z_floor: f64,
    pub polygons: Vec<Polygon2D>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorSweep {
    /// Graph floor paired with this storey, if any.
    pub floor_id: Option<NodeId>,
    pub storey: Option<usize>,
    pub predicted: usize,
    pub ground_truth: usize,
    pub sweep: Vec<MatchReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationEval {
    pub floors: Vec<FloorSweep>,
    /// Counts summed over floors at each threshold.
    pub overall: Vec<MatchReport>,
}

/// Storeys pair with the graph floor whose lower boundary is nearest their
/// floor height, within `max_offset` meters, one to one in storey order.
/// Ground truth is rasterized into the paired floor's frame. Unpaired
/// storeys count all their polygons as misses and unpaired floors all their
/// locations as false positives.
pub fn evaluate_locations(
    graph: &SceneGraph,
    gt: &[GtFloor],
    deltas: &[f64],
    order: MatchOrder,
    max_offset: f64,
) -> Result<LocationEval, EvalError> {
    let mut free: Vec<NodeId> = graph.floors.keys().copied().collect();
    let mut floors = Vec::new();
    for (s, g) in gt.iter().enumerate() {
        let pick = free
            .iter()
            .enumerate()
            .map(|(k, id)| (k, (graph.floors[id].z_low - g.z_floor).abs()))
            .filter(|&(_, d)| d <= max_offset)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match pick {
            Some((k, _)) => {
                let id = free.remove(k);
                floors.push(floor_sweep(graph, Some(id), Some(s), &g.polygons, deltas, order)?);
            }
            None => floors.push(floor_sweep(graph, None, Some(s), &g.polygons, deltas, order)?),
        }
    }
    for id in free {
        floors.push(floor_sweep(graph, Some(id), None, &[], deltas, order)?);
    }
    let overall = deltas
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let (tp, fp, fn_) = floors
                .iter()
                .fold((0, 0, 0), |(a, b, c), f| (a + f.sweep[k].tp, b + f.sweep[k].fp, c + f.sweep[k].fn_));
            MatchReport::from_counts(tp, fp, fn_, d)
        })
        .collect();
    Ok(LocationEval { floors, overall })
}

fn floor_sweep(
    graph: &SceneGraph,
    floor: Option<NodeId>,
    storey: Option<usize>,
    polygons: &[Polygon2D],
    deltas: &[f64],
    order: MatchOrder,
) -> Result<FloorSweep, EvalError> {
    let Some(id) = floor else {
        let sweep = deltas.iter().map(|&d| MatchReport::from_counts(0, 0, polygons.len(), d)).collect();
        return Ok(FloorSweep { floor_id: None, storey, predicted: 0, ground_truth: polygons.len(), sweep });
    };
    let frame = graph.floors[&id].frame;
    let pred: Vec<_> = graph
        .locations
        .values()
        .filter(|l| graph.rooms.get(&l.room_id).is_some_and(|r| r.floor_index == id))
        .map(|l| l.mask.clone())
        .collect();
    let truth: Vec<_> = polygons.iter().map(|p| p.rasterize(frame)).collect();
    Ok(FloorSweep {
        floor_id: Some(id),
        storey,
        predicted: pred.len(),
        ground_truth: truth.len(),
        sweep: f1_sweep(&pred, &truth, deltas, order)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Box3D, PointCloud};
    use crate::graph::build::tests::{floor, frame, room};
    use crate::graph::{build_graph, GraphInputs, LocationNode};

    fn square(x0: f64, y0: f64, s: f64) -> Polygon2D {
        Polygon2D::new(vec![[x0, y0], [x0 + s, y0], [x0 + s, y0 + s], [x0, y0 + s]]).unwrap()
    }

    fn graph_with(polys: &[Polygon2D]) -> SceneGraph {
        let locations = polys
            .iter()
            .enumerate()
            .map(|(i, p)| LocationNode {
                id: i as NodeId,
                room_id: 0,
                mask: p.rasterize(frame()),
                polygon: p.clone(),
                cloud: PointCloud::empty(),
                bbox: Box3D::new([0.0; 3], [1.0; 3]).unwrap(),
                tag: "area".into(),
            })
            .collect();
        build_graph(GraphInputs {
            floors: vec![floor()],
            rooms: vec![room(0, 0, 40, "room")],
            locations,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn exact_locations_score_one_and_a_missing_storey_counts_misses() {
        let polys = [square(0.5, 0.5, 0.6), square(2.5, 0.5, 0.6)];
        let g = graph_with(&polys);
        let gt = [GtFloor { z_floor: 0.0, polygons: polys.to_vec() }];
        let e = evaluate_locations(&g, &gt, &[0.5, 0.9], MatchOrder::BestIou, 0.5).unwrap();
        assert!(e.overall.iter().all(|r| r.f1 == 1.0 && r.tp == 2));

        let two = [gt[0].clone(), GtFloor { z_floor: 3.5, polygons: vec![square(1.0, 1.0, 0.5)] }];
        let e = evaluate_locations(&g, &two, &[0.5], MatchOrder::BestIou, 0.5).unwrap();
        assert_eq!((e.overall[0].tp, e.overall[0].fp, e.overall[0].fn_), (2, 0, 1));
        assert_eq!(e.floors[1].floor_id, None);
    }

    #[test]
    fn unpaired_floor_counts_false_positives() {
        let g = graph_with(&[square(0.5, 0.5, 0.6)]);
        let gt = [GtFloor { z_floor: 7.0, polygons: vec![] }];
        let e = evaluate_locations(&g, &gt, &[0.5], MatchOrder::Input, 0.5).unwrap();
        assert_eq!((e.overall[0].tp, e.overall[0].fp, e.overall[0].fn_), (0, 1, 0));
        assert_eq!(e.floors.len(), 2);
    }
}
