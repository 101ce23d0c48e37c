//! Typed outcome subspaces, normalized distances and the complexity-penalized
//! performance used for every nearest-neighbour query.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arm::Point;
use crate::error::{Error, Result};
use crate::table::{ObjectId, StepEvents, TableGeometry};

pub const MAX_DIM: usize = 4;
pub const SUBSPACES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubspaceId(pub u8);

impl SubspaceId {
    /// Positions touched on the table.
    pub const TOUCH: SubspaceId = SubspaceId(0);
    /// Position of the blue object.
    pub const BLUE: SubspaceId = SubspaceId(1);
    /// Position of the green object.
    pub const GREEN: SubspaceId = SubspaceId(2);
    /// Positions of both objects.
    pub const BOTH: SubspaceId = SubspaceId(3);
    /// Burst sound `(f, l, b)`.
    pub const BURST: SubspaceId = SubspaceId(4);
    /// Maintained sound `(f, l, b, t)`.
    pub const MAINTAINED: SubspaceId = SubspaceId(5);

    pub const ALL: [SubspaceId; SUBSPACES] = [
        SubspaceId(0),
        SubspaceId(1),
        SubspaceId(2),
        SubspaceId(3),
        SubspaceId(4),
        SubspaceId(5),
    ];

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn dim(self) -> usize {
        [2, 2, 2, 4, 3, 4][self.index()]
    }
}

impl fmt::Display for SubspaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "omega{}", self.0)
    }
}

/// A point of one outcome subspace, in raw (unnormalized) units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "OutcomeRepr", try_from = "OutcomeRepr")]
pub struct Outcome {
    pub space: SubspaceId,
    coords: [f64; MAX_DIM],
}

#[derive(Serialize, Deserialize)]
struct OutcomeRepr {
    space: SubspaceId,
    coords: Vec<f64>,
}

impl From<Outcome> for OutcomeRepr {
    fn from(o: Outcome) -> Self {
        OutcomeRepr {
            space: o.space,
            coords: o.coords().to_vec(),
        }
    }
}

impl TryFrom<OutcomeRepr> for Outcome {
    type Error = String;

    fn try_from(r: OutcomeRepr) -> std::result::Result<Self, String> {
        if r.space.index() >= SUBSPACES {
            return Err(format!("unknown subspace {}", r.space.0));
        }
        Outcome::new(r.space, &r.coords).ok_or_else(|| {
            format!(
                "{} expects {} finite coordinates, got {:?}",
                r.space,
                r.space.dim(),
                r.coords
            )
        })
    }
}

impl Outcome {
    pub fn new(space: SubspaceId, coords: &[f64]) -> Option<Outcome> {
        if coords.len() != space.dim() || coords.iter().any(|c| !c.is_finite()) {
            return None;
        }
        let mut c = [0.0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Some(Outcome { space, coords: c })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.space.dim()]
    }

    pub fn touch(p: Point) -> Outcome {
        Outcome::new(SubspaceId::TOUCH, &p).unwrap()
    }

    pub fn point(&self) -> Point {
        [self.coords[0], self.coords[1]]
    }
}

/// An ordered pair of outcomes: "reach `first`, then reach `second`".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Procedure {
    pub first: Outcome,
    pub second: Outcome,
}

impl Procedure {
    pub fn spaces(&self) -> (SubspaceId, SubspaceId) {
        (self.first.space, self.second.space)
    }
}

/// Normalization bounds and enabled flags for the six subspaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSpaces {
    bounds: Vec<Vec<(f64, f64)>>,
    enabled: [bool; SUBSPACES],
}

pub type Normalized = [f64; MAX_DIM];

impl OutcomeSpaces {
    /// Positions use the table rectangle; `f`, `l` in `[-1, 1]`, `b` in
    /// `[0.05, 1]`, `t` in `[0, 1]`.
    pub fn for_table(geometry: &TableGeometry, with_maintained: bool) -> OutcomeSpaces {
        let [bx, by] = geometry.bounds();
        let sound = vec![(-1.0, 1.0), (-1.0, 1.0), (0.05, 1.0)];
        let mut maintained = sound.clone();
        maintained.push((0.0, 1.0));
        OutcomeSpaces {
            bounds: vec![
                vec![bx, by],
                vec![bx, by],
                vec![bx, by],
                vec![bx, by, bx, by],
                sound,
                maintained,
            ],
            enabled: [true, true, true, true, true, with_maintained],
        }
    }

    pub fn is_enabled(&self, s: SubspaceId) -> bool {
        self.enabled[s.index()]
    }

    pub fn enabled(&self) -> impl Iterator<Item = SubspaceId> + '_ {
        SubspaceId::ALL.into_iter().filter(|s| self.is_enabled(*s))
    }

    pub fn bounds(&self, s: SubspaceId) -> &[(f64, f64)] {
        &self.bounds[s.index()]
    }

    pub fn normalize(&self, o: &Outcome) -> Normalized {
        let mut n = [0.0; MAX_DIM];
        for (i, (c, (lo, hi))) in o.coords().iter().zip(self.bounds(o.space)).enumerate() {
            n[i] = ((c - lo) / (hi - lo)).clamp(0.0, 1.0);
        }
        n
    }

    pub fn denormalize(&self, space: SubspaceId, n: &[f64]) -> Outcome {
        let coords: Vec<f64> = n
            .iter()
            .zip(self.bounds(space))
            .map(|(v, (lo, hi))| lo + v.clamp(0.0, 1.0) * (hi - lo))
            .collect();
        Outcome::new(space, &coords).expect("bounded coordinates are finite")
    }

    /// Euclidean distance between normalized coordinates.
    pub fn distance(&self, a: &Outcome, b: &Outcome) -> Result<f64> {
        if a.space != b.space {
            return Err(Error::SubspaceMismatch {
                left: a.space,
                right: b.space,
            });
        }
        Ok(normalized_distance(
            &self.normalize(a),
            &self.normalize(b),
            a.space.dim(),
        ))
    }

    /// `d(reached, goal) * gamma^n`.
    pub fn perf(&self, reached: &Outcome, goal: &Outcome, n: usize, gamma: f64) -> Result<f64> {
        Ok(perf_from_distance(self.distance(reached, goal)?, n, gamma))
    }

    pub fn sample<R: Rng + ?Sized>(&self, space: SubspaceId, rng: &mut R) -> Outcome {
        let coords: Vec<f64> = self
            .bounds(space)
            .iter()
            .map(|(lo, hi)| rng.random_range(*lo..=*hi))
            .collect();
        Outcome::new(space, &coords).unwrap()
    }

    /// Uniform goals per enabled subspace, deterministic in `seed`. Samples
    /// that coincide with any `exclude` outcome are redrawn.
    pub fn sample_testbench(
        &self,
        seed: u64,
        counts: &[usize; SUBSPACES],
        exclude: &[Outcome],
    ) -> Vec<Outcome> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for s in self.enabled() {
            let mut drawn = 0;
            while drawn < counts[s.index()] {
                let g = self.sample(s, &mut rng);
                let clash = exclude
                    .iter()
                    .filter(|e| e.space == s)
                    .any(|e| self.distance(e, &g).map(|d| d < 1e-9).unwrap_or(false));
                if !clash {
                    out.push(g);
                    drawn += 1;
                }
            }
        }
        out
    }
}

pub fn normalized_distance(a: &Normalized, b: &Normalized, dim: usize) -> f64 {
    a[..dim]
        .iter()
        .zip(&b[..dim])
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn perf_from_distance(d: f64, n: usize, gamma: f64) -> f64 {
    d * gamma.powi(n as i32)
}

/// Table observations at the end of one primitive.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    pub events: StepEvents,
    pub objects: [Point; 2],
    pub moved: [bool; 2],
}

/// An outcome with the 1-based count of primitives executed to reach it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reached {
    pub outcome: Outcome,
    pub primitives: usize,
}

/// Maps per-primitive table events to outcomes of the enabled subspaces.
pub fn extract_outcomes(boundaries: &[Boundary], spaces: &OutcomeSpaces) -> Vec<Reached> {
    let mut out = Vec::new();
    for (k, b) in boundaries.iter().enumerate() {
        if b.events.blocked {
            continue;
        }
        let n = k + 1;
        let mut push = |space: SubspaceId, coords: &[f64]| {
            if spaces.is_enabled(space) {
                if let Some(outcome) = Outcome::new(space, coords) {
                    out.push(Reached {
                        outcome,
                        primitives: n,
                    });
                }
            }
        };
        if let Some(p) = b.events.touch {
            push(SubspaceId::TOUCH, &p);
        }
        if let Some(id) = b.events.moved {
            let p = b.objects[id.index()];
            match id {
                ObjectId::Blue => push(SubspaceId::BLUE, &p),
                ObjectId::Green => push(SubspaceId::GREEN, &p),
            }
            if b.moved[0] && b.moved[1] {
                let [p1, p2] = b.objects;
                push(SubspaceId::BOTH, &[p1[0], p1[1], p2[0], p2[1]]);
            }
        }
        if let Some(s) = b.events.burst {
            push(SubspaceId::BURST, &[s.f, s.l, s.b]);
        }
        if let Some(s) = b.events.maintained {
            if let Some(t) = s.t {
                push(SubspaceId::MAINTAINED, &[s.f, s.l, s.b, t]);
            }
        }
    }
    out
}

/// Writes `subspace,c0,c1,c2,c3` rows; unused coordinates are left empty.
pub fn write_testbench_csv(path: &Path, goals: &[Outcome]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["subspace", "c0", "c1", "c2", "c3"])?;
    for g in goals {
        let mut row = vec![g.space.0.to_string()];
        for i in 0..MAX_DIM {
            row.push(g.coords().get(i).map(|c| c.to_string()).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_testbench_csv(path: &Path) -> Result<Vec<Outcome>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let space: u8 = rec
            .get(0)
            .unwrap_or("")
            .parse()
            .map_err(|e| parse_err(format!("bad subspace: {e}")))?;
        if space as usize >= SUBSPACES {
            return Err(parse_err(format!("unknown subspace {space}")));
        }
        let space = SubspaceId(space);
        let coords = (1..=space.dim())
            .map(|j| rec.get(j).unwrap_or("").parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(format!("bad coordinate: {e}")))?;
        out.push(
            Outcome::new(space, &coords)
                .ok_or_else(|| parse_err("non-finite coordinate".into()))?,
        );
    }
    Ok(out)
}
