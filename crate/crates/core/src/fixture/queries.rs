//! Benchmark queries with a unique answer under the generator's ground truth.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scene::{GroundTruth, GtObject};
use super::spec::SpecError;

/// Nearest-anchor distances must beat the runner-up by this much.
const MARGIN: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPlan {
    pub text: String,
    /// Ground-truth object id of the answer.
    pub target: u32,
    pub anchor_tag: Option<String>,
}

fn center_dist(a: &GtObject, b: &GtObject) -> f64 {
    let (ca, cb) = (a.bbox.center(), b.bbox.center());
    ((ca[0] - cb[0]).powi(2) + (ca[1] - cb[1]).powi(2) + (ca[2] - cb[2]).powi(2)).sqrt()
}

/// Distance from `o` to the nearest `tag` object in its room.
fn nearest(gt: &GroundTruth, o: &GtObject, tag: &str) -> f64 {
    gt.objects
        .iter()
        .filter(|b| b.room == o.room && b.tag == tag && b.id != o.id)
        .map(|b| center_dist(o, b))
        .fold(f64::INFINITY, f64::min)
}

/// "the T near the A": `o` is the T closest to any A in the same room, by
/// a clear margin.
fn near_query(gt: &GroundTruth, o: &GtObject, article: &str) -> Option<QueryPlan> {
    let anchor = gt
        .objects
        .iter()
        .filter(|b| b.room == o.room && b.tag != o.tag)
        .min_by(|a, b| center_dist(o, a).total_cmp(&center_dist(o, b)).then(a.id.cmp(&b.id)))?;
    let d = nearest(gt, o, &anchor.tag);
    let rival = gt
        .objects
        .iter()
        .filter(|b| b.tag == o.tag && b.id != o.id)
        .map(|b| nearest(gt, b, &anchor.tag))
        .fold(f64::INFINITY, f64::min);
    (rival - d >= MARGIN).then(|| QueryPlan {
        text: format!("find {article} {} near the {}", o.tag, anchor.tag),
        target: o.id,
        anchor_tag: Some(anchor.tag.clone()),
    })
}

/// "the T in the R": `o` is the only T in its room.
fn room_query(gt: &GroundTruth, o: &GtObject) -> Option<QueryPlan> {
    let room = &gt.rooms[o.room as usize];
    let same_room_type = gt.rooms.iter().filter(|r| r.tag == room.tag).count();
    let unique = gt.objects.iter().filter(|b| b.room == o.room && b.tag == o.tag).count() == 1;
    (unique && same_room_type == 1).then(|| QueryPlan {
        text: format!("the {} in the {}", o.tag, room.tag),
        target: o.id,
        anchor_tag: None,
    })
}

/// `count` distinct queries. A vase near a window is always asked first
/// when the scene has one.
pub fn make_queries<R: Rng>(gt: &GroundTruth, count: usize, rng: &mut R) -> Result<Vec<QueryPlan>, SpecError> {
    let mut pool: Vec<QueryPlan> = Vec::new();
    let mut vases: Vec<&GtObject> = gt.objects.iter().filter(|o| o.tag == "vase").collect();
    vases.sort_by(|a, b| nearest(gt, a, "window").total_cmp(&nearest(gt, b, "window")));
    if let Some(v) = vases.first().filter(|v| nearest(gt, v, "window").is_finite()) {
        let d = nearest(gt, v, "window");
        let rival = vases.get(1).map_or(f64::INFINITY, |w| nearest(gt, w, "window"));
        if rival - d >= MARGIN {
            pool.push(QueryPlan {
                text: "find a vase near the window".into(),
                target: v.id,
                anchor_tag: Some("window".into()),
            });
        }
    }
    let mut rest: Vec<QueryPlan> = gt
        .objects
        .iter()
        .flat_map(|o| [near_query(gt, o, "the"), room_query(gt, o)])
        .flatten()
        .collect();
    rest.shuffle(rng);
    for q in rest {
        if pool.len() == count {
            break;
        }
        if !pool.iter().any(|p| p.text == q.text) {
            pool.push(q);
        }
    }
    if pool.len() < count {
        return Err(SpecError {
            path: "queries".into(),
            msg: format!("the scene supports only {} unambiguous queries", pool.len()),
        });
    }
    Ok(pool)
}
