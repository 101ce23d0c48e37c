//! The interactive table: two pickable disks and the sounds they trigger.
//!
//! Objects are picked and placed by touching: a primitive whose tip ends on a
//! free object grips it, and the next primitive carries the gripped object and
//! releases it at its own end point. Paths that merely pass over a single disk
//! leave it in place. A primitive whose path enters both disks, or enters the
//! other disk while carrying an object, blocks the table: its effects are
//! cancelled and the grip is lost.
//!
//! A path that starts inside a disk (the tip rests on the object it just
//! released) only enters that disk again after leaving it.

use serde::{Deserialize, Serialize};

use crate::arm::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TableGeometry {
    pub origin: Point,
    pub width: f64,
    pub height: f64,
    pub object_radius: f64,
}

impl Default for TableGeometry {
    fn default() -> Self {
        TableGeometry {
            origin: [0.0, 0.0],
            width: 1.0,
            height: 1.0,
            object_radius: 0.04,
        }
    }
}

impl TableGeometry {
    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }

    pub fn min_radius(&self) -> f64 {
        2.0 * self.object_radius
    }

    pub fn contains(&self, p: &Point) -> bool {
        p[0] >= self.origin[0]
            && p[0] <= self.origin[0] + self.width
            && p[1] >= self.origin[1]
            && p[1] <= self.origin[1] + self.height
    }

    pub fn clamp(&self, p: &Point) -> Point {
        [
            p[0].clamp(self.origin[0], self.origin[0] + self.width),
            p[1].clamp(self.origin[1], self.origin[1] + self.height),
        ]
    }

    pub fn corners(&self) -> [Point; 4] {
        let [x0, y0] = self.origin;
        let (x1, y1) = (x0 + self.width, y0 + self.height);
        [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
    }

    pub fn bounds(&self) -> [(f64, f64); 2] {
        [
            (self.origin[0], self.origin[0] + self.width),
            (self.origin[1], self.origin[1] + self.height),
        ]
    }

    /// Distance from `p` to the closest table corner.
    pub fn corner_distance(&self, p: &Point) -> f64 {
        self.corners()
            .iter()
            .map(|c| dist(c, p))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TableConfig {
    pub geometry: TableGeometry,
    pub blue: Point,
    pub green: Point,
}

impl Default for TableConfig {
    fn default() -> Self {
        TableConfig {
            geometry: TableGeometry::default(),
            blue: [0.35, 0.65],
            green: [0.65, 0.65],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectId {
    Blue,
    Green,
}

impl ObjectId {
    pub const ALL: [ObjectId; 2] = [ObjectId::Blue, ObjectId::Green];

    pub fn index(self) -> usize {
        match self {
            ObjectId::Blue => 0,
            ObjectId::Green => 1,
        }
    }
}

/// Normalized sound parameters; `t` is present only for maintained sounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoundParams {
    pub f: f64,
    pub l: f64,
    pub b: f64,
    pub t: Option<f64>,
}

/// Burst sound produced by the two objects at `blue` and `green`.
pub fn sound_from_positions(geometry: &TableGeometry, blue: &Point, green: &Point) -> SoundParams {
    let diag = geometry.diagonal();
    let r_min = geometry.min_radius();
    let d_min = geometry.corner_distance(blue);
    let f = (diag / 4.0 - d_min) * 4.0 / diag;

    let dx = green[0] - blue[0];
    let dy = green[1] - blue[1];
    let r = dx.hypot(dy).max(r_min);
    let l = 1.0 - 2.0 * (r.ln() - r_min.ln()) / (diag.ln() - r_min.ln());

    let phi = dy.atan2(dx);
    let b = (phi.abs() / std::f64::consts::PI) * 0.95 + 0.05;
    SoundParams { f, l, b, t: None }
}

/// Events observed after one primitive.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepEvents {
    pub blocked: bool,
    pub touch: Option<Point>,
    pub moved: Option<ObjectId>,
    pub burst: Option<SoundParams>,
    pub maintained: Option<SoundParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableState {
    pub geometry: TableGeometry,
    pub objects: [Point; 2],
    pub moved: [bool; 2],
    pub burst: Option<SoundParams>,
    pub gripped: Option<ObjectId>,
    pub touches: Vec<Point>,
}

pub fn dist(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl TableState {
    pub fn reset(config: &TableConfig) -> TableState {
        TableState {
            geometry: config.geometry,
            objects: [config.blue, config.green],
            moved: [false, false],
            burst: None,
            gripped: None,
            touches: Vec::new(),
        }
    }

    pub fn object(&self, id: ObjectId) -> Point {
        self.objects[id.index()]
    }

    /// Index of the first sample of `path` that contacts the free object `id`.
    fn first_contact(&self, id: ObjectId, path: &[Point]) -> Option<usize> {
        let centre = self.object(id);
        let r = self.geometry.object_radius;
        let inside = |p: &Point| dist(p, &centre) <= r;
        let mut armed = !inside(&path[0]);
        for (i, p) in path.iter().enumerate() {
            if inside(p) {
                if armed {
                    return Some(i);
                }
            } else {
                armed = true;
            }
        }
        None
    }

    /// Applies one primitive's tip path.
    pub fn step_primitive(&self, tip_path: &[Point]) -> (TableState, StepEvents) {
        assert!(!tip_path.is_empty(), "tip path must contain samples");
        let end = *tip_path.last().unwrap();
        let r = self.geometry.object_radius;

        let entered: Vec<ObjectId> = ObjectId::ALL
            .into_iter()
            .filter(|id| self.gripped != Some(*id))
            .filter(|id| self.first_contact(*id, tip_path).is_some())
            .collect();
        let blocked = entered.len() > 1 || (self.gripped.is_some() && !entered.is_empty());

        let mut next = self.clone();
        next.gripped = None;
        if blocked {
            return (
                next,
                StepEvents {
                    blocked: true,
                    ..Default::default()
                },
            );
        }

        let mut events = StepEvents::default();
        if let Some(id) = self.gripped {
            next.objects[id.index()] = self.geometry.clamp(&end);
            next.moved[id.index()] = true;
            events.moved = Some(id);
        } else {
            next.gripped = ObjectId::ALL
                .into_iter()
                .find(|id| dist(&end, &self.object(*id)) <= r);
        }

        let touched = self.geometry.contains(&end);
        if touched {
            events.touch = Some(end);
            next.touches.push(end);
        }

        let both_now = next.moved[0] && next.moved[1];
        let both_before = self.moved[0] && self.moved[1];
        if both_now && !both_before {
            let s = next.burst_sound();
            next.burst = Some(s);
            events.burst = Some(s);
        } else if self.burst.is_some() && touched && events.moved.is_none() {
            events.maintained = next.maintain_sound(&end);
        }
        (next, events)
    }

    /// Sound for the current object positions.
    pub fn burst_sound(&self) -> SoundParams {
        sound_from_positions(&self.geometry, &self.objects[0], &self.objects[1])
    }

    /// Burst sound extended with the maintain duration for a touch at `touch`;
    /// `None` when no burst has been emitted yet.
    pub fn maintain_sound(&self, touch: &Point) -> Option<SoundParams> {
        let burst = self.burst?;
        let d2 = dist(touch, &self.objects[1]);
        Some(SoundParams {
            t: Some(d2 / self.geometry.diagonal()),
            ..burst
        })
    }
}
