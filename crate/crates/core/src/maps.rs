//! Piecewise-affine chaotic maps.
//!
//! Every map is a list of contiguous affine segments over a bounded interval.
//! Segments own their upper endpoint, so a point sitting exactly on a breakpoint
//! is evaluated by the segment to its left. Points slightly outside the domain
//! are evaluated by extrapolating the nearest boundary segment, which lets a
//! caller observe whether an orbit pushed over the edge comes back or runs away.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Fraction of the domain width used as the default guard band.
pub const DEFAULT_GUARD_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Zigzag,
    /// Three-branch zigzag family with slope parameter `m != -2`.
    GeneralizedZigzag,
    Tent,
    Bernoulli,
    /// Tent-form reduction of a zigzag map with perturbed slopes.
    NonIdealSymmetric,
    Custom,
}

impl MapKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MapKind::Zigzag => "zigzag",
            MapKind::GeneralizedZigzag => "generalized_zigzag",
            MapKind::Tent => "tent",
            MapKind::Bernoulli => "bernoulli",
            MapKind::NonIdealSymmetric => "non_ideal_symmetric",
            MapKind::Custom => "custom",
        }
    }
}

impl std::fmt::Display for MapKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `y = slope * x + intercept` on `(lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub lower: f64,
    pub upper: f64,
    pub slope: f64,
    pub intercept: f64,
}

impl Segment {
    pub fn new(lower: f64, upper: f64, slope: f64, intercept: f64) -> Self {
        Self {
            lower,
            upper,
            slope,
            intercept,
        }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// How a state is turned into an output bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BitRule {
    /// 0 iff `|x| < threshold`.
    MagnitudeBelow(f64),
    /// 0 iff `x < threshold`.
    Below(f64),
}

impl BitRule {
    #[inline]
    pub fn bit(&self, x: f64) -> u8 {
        match *self {
            BitRule::MagnitudeBelow(t) => u8::from(x.abs() >= t),
            BitRule::Below(t) => u8::from(x >= t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MapDocument", into = "MapDocument")]
pub struct PiecewiseAffineMap {
    kind: MapKind,
    lo: f64,
    hi: f64,
    segments: Vec<Segment>,
    guard: f64,
}

impl PiecewiseAffineMap {
    /// Builds a map after checking that the segments tile `(lo, hi]` exactly
    /// and that every slope is finite and nonzero.
    pub fn new(kind: MapKind, domain: (f64, f64), segments: Vec<Segment>) -> Result<Self> {
        let (lo, hi) = domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidMap(format!("bad domain ({lo}, {hi})")));
        }
        let first = segments
            .first()
            .ok_or_else(|| Error::InvalidMap("no segments".into()))?;
        let last = segments.last().unwrap();
        if first.lower != lo || last.upper != hi {
            return Err(Error::InvalidMap(format!(
                "segments span ({}, {}] but the domain is ({lo}, {hi})",
                first.lower, last.upper
            )));
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.lower < s.upper) {
                return Err(Error::InvalidMap(format!("segment {i} is empty or reversed")));
            }
            if !s.slope.is_finite() || s.slope == 0.0 || !s.intercept.is_finite() {
                return Err(Error::InvalidMap(format!(
                    "segment {i} has slope {} and intercept {}",
                    s.slope, s.intercept
                )));
            }
        }
        for (i, pair) in segments.windows(2).enumerate() {
            if pair[0].upper != pair[1].lower {
                return Err(Error::InvalidMap(format!(
                    "segments {i} and {} are not contiguous",
                    i + 1
                )));
            }
        }
        Ok(Self {
            kind,
            lo,
            hi,
            segments,
            guard: DEFAULT_GUARD_FRACTION * (hi - lo),
        })
    }

    /// Replaces the guard band width (absolute, in state units).
    pub fn with_guard_band(mut self, guard: f64) -> Result<Self> {
        if !(guard >= 0.0 && guard.is_finite()) {
            return invalid(format!("guard band must be finite and non-negative, got {guard}"));
        }
        self.guard = guard;
        Ok(self)
    }

    /// The zigzag map (`m = -2`).
    pub fn zigzag() -> Self {
        Self::generalized_zigzag(GeneralizedZigzagParams { m: -2.0 })
    }

    /// The three-branch zigzag family:
    /// `-m(x + 2/|m|)` on `(-1, -1/|m|]`, `m x` on `(-1/|m|, 1/|m|]`, `-m(x - 2/|m|)` on `(1/|m|, 1]`.
    /// For `|m| <= 1` the outer branches are empty and the map is linear.
    pub fn generalized_zigzag(params: GeneralizedZigzagParams) -> Self {
        let m = params.m;
        let b = 1.0 / m.abs();
        let outer_intercept = 2.0 * m.signum();
        let segments = if b >= 1.0 {
            vec![Segment::new(-1.0, 1.0, m, 0.0)]
        } else {
            vec![
                Segment::new(-1.0, -b, -m, -outer_intercept),
                Segment::new(-b, b, m, 0.0),
                Segment::new(b, 1.0, -m, outer_intercept),
            ]
        };
        let kind = if m == -2.0 {
            MapKind::Zigzag
        } else {
            MapKind::GeneralizedZigzag
        };
        Self::new(kind, (-1.0, 1.0), segments).expect("zigzag segments are valid by construction")
    }

    /// `2x` on `(0, 1/2]`, `2(1 - x)` on `(1/2, 1]`.
    pub fn tent() -> Self {
        Self::new(
            MapKind::Tent,
            (0.0, 1.0),
            vec![
                Segment::new(0.0, 0.5, 2.0, 0.0),
                Segment::new(0.5, 1.0, -2.0, 2.0),
            ],
        )
        .expect("tent segments are valid by construction")
    }

    /// Bernoulli shift on `(-1, 1)`: `2x + 1` left of zero, `2x - 1` right of it.
    pub fn bernoulli() -> Self {
        Self::new(
            MapKind::Bernoulli,
            (-1.0, 1.0),
            vec![
                Segment::new(-1.0, 0.0, 2.0, 1.0),
                Segment::new(0.0, 1.0, 2.0, -1.0),
            ],
        )
        .expect("bernoulli segments are valid by construction")
    }

    /// Tent-form map with rising slope `2(1 + dg1)` and falling slope `-2(1 + dg2)`,
    /// together with its derived geometry.
    pub fn nonideal(dg1: f64, dg2: f64) -> Result<(Self, NonIdealParams)> {
        let params = NonIdealParams::new(dg1, dg2)?;
        let rise = 2.0 * (1.0 + dg1);
        let fall = 2.0 * (1.0 + dg2);
        let map = Self::new(
            MapKind::NonIdealSymmetric,
            (0.0, 1.0),
            vec![
                Segment::new(0.0, params.x_b, rise, 0.0),
                Segment::new(params.x_b, 1.0, -fall, 1.0 + fall * params.x_b),
            ],
        )?;
        Ok((map, params))
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn guard_band(&self) -> f64 {
        self.guard
    }

    /// True when every branch stretches distances (`|slope| > 1`).
    pub fn is_expanding(&self) -> bool {
        self.segments.iter().all(|s| s.slope.abs() > 1.0)
    }

    /// Whether iteration reflects negative outputs back onto the positive axis.
    ///
    /// The non-ideal map is the magnitude picture of an odd-symmetric zigzag
    /// map: an output that undershoots zero is the zigzag state of the
    /// opposite sign, whose magnitude is what the next stage sees.
    pub fn folds_magnitude(&self) -> bool {
        self.kind == MapKind::NonIdealSymmetric
    }

    pub fn bit_rule(&self) -> BitRule {
        match self.kind {
            MapKind::Zigzag | MapKind::GeneralizedZigzag => BitRule::MagnitudeBelow(0.5),
            MapKind::NonIdealSymmetric => BitRule::Below(self.segments[0].upper),
            MapKind::Tent | MapKind::Bernoulli | MapKind::Custom => {
                BitRule::Below(0.5 * (self.lo + self.hi))
            }
        }
    }

    /// Index of the segment owning `x`, or `None` outside `[lo, hi]`.
    pub fn segment_index(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo && x <= self.hi) {
            return None;
        }
        let idx = self.segments.partition_point(|s| s.upper < x);
        Some(idx.min(self.segments.len() - 1))
    }

    /// Applies the affine rule owning `x`; within the guard band the nearest
    /// boundary segment is extrapolated.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if let Some(i) = self.segment_index(x) {
            return Ok(self.segments[i].apply(x));
        }
        let seg = if x < self.lo {
            (self.lo - x <= self.guard).then(|| &self.segments[0])
        } else {
            (x - self.hi <= self.guard).then(|| self.segments.last().unwrap())
        };
        seg.map(|s| s.apply(x)).ok_or(Error::OutOfDomain {
            x,
            lo: self.lo,
            hi: self.hi,
            guard: self.guard,
        })
    }

    /// One iteration of the dynamics: `eval`, followed by the magnitude fold
    /// for maps that carry it.
    #[inline]
    pub fn step(&self, x: f64) -> Result<f64> {
        let y = self.eval(x)?;
        Ok(if self.folds_magnitude() { y.abs() } else { y })
    }

    /// Compares segment tables within `tol`, ignoring the kind tag.
    pub fn same_segments(&self, other: &Self, tol: f64) -> bool {
        self.segments.len() == other.segments.len()
            && self.segments.iter().zip(&other.segments).all(|(a, b)| {
                (a.lower - b.lower).abs() <= tol
                    && (a.upper - b.upper).abs() <= tol
                    && (a.slope - b.slope).abs() <= tol
                    && (a.intercept - b.intercept).abs() <= tol
            })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// On-disk form: `{kind, domain: [lo, hi], segments: [[lower, upper, slope, intercept], ...]}`.
#[derive(Serialize, Deserialize)]
struct MapDocument {
    kind: MapKind,
    domain: [f64; 2],
    segments: Vec<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    guard_band: Option<f64>,
}

impl TryFrom<MapDocument> for PiecewiseAffineMap {
    type Error = Error;

    fn try_from(doc: MapDocument) -> Result<Self> {
        let segments = doc
            .segments
            .iter()
            .map(|&[l, u, s, i]| Segment::new(l, u, s, i))
            .collect();
        let map = Self::new(doc.kind, (doc.domain[0], doc.domain[1]), segments)?;
        match doc.guard_band {
            Some(g) => map.with_guard_band(g),
            None => Ok(map),
        }
    }
}

impl From<PiecewiseAffineMap> for MapDocument {
    fn from(map: PiecewiseAffineMap) -> Self {
        let default_guard = DEFAULT_GUARD_FRACTION * map.width();
        MapDocument {
            kind: map.kind,
            domain: [map.lo, map.hi],
            segments: map
                .segments
                .iter()
                .map(|s| [s.lower, s.upper, s.slope, s.intercept])
                .collect(),
            guard_band: (map.guard != default_guard).then_some(map.guard),
        }
    }
}

/// Slope parameter of the generalized zigzag, `m` in `(-3, 3)` and nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedZigzagParams {
    m: f64,
}

impl GeneralizedZigzagParams {
    pub fn new(m: f64) -> Result<Self> {
        if !(m > -3.0 && m < 3.0) || m == 0.0 {
            return invalid(format!("bifurcation parameter m must lie in (-3, 3) \\ {{0}}, got {m}"));
        }
        Ok(Self { m })
    }

    pub fn m(&self) -> f64 {
        self.m
    }
}

/// Largest slope deviation accepted by the first-order variability model.
pub const MAX_SLOPE_DELTA: f64 = 0.25;

/// Geometry of the non-ideal tent-form map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonIdealParams {
    pub dg1: f64,
    pub dg2: f64,
    /// Breakpoint between the rising and falling branches, `1 / (2(1 + dg1))`.
    pub x_b: f64,
    /// First-order ordinate of the map's right end point, `-(dg1 + dg2)`.
    pub delta_o: f64,
    /// Rising-branch preimage of `x_b`.
    pub x_t1: f64,
    /// Falling-branch preimage of `x_b`.
    pub x_t2: f64,
}

impl NonIdealParams {
    pub fn new(dg1: f64, dg2: f64) -> Result<Self> {
        for (name, d) in [("dg1", dg1), ("dg2", dg2)] {
            if !(d.abs() < MAX_SLOPE_DELTA) {
                return invalid(format!("{name} = {d} is outside (-{MAX_SLOPE_DELTA}, {MAX_SLOPE_DELTA})"));
            }
        }
        let x_b = 1.0 / (2.0 * (1.0 + dg1));
        Ok(Self {
            dg1,
            dg2,
            x_b,
            delta_o: -(dg1 + dg2),
            x_t1: x_b / (2.0 * (1.0 + dg1)),
            x_t2: x_b + (1.0 - x_b) / (2.0 * (1.0 + dg2)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let fa = f(a);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if (f(mid) > 0.0) == (fa > 0.0) {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn generalized_zigzag_branches() {
        let z = PiecewiseAffineMap::zigzag();
        assert_eq!(z.kind(), MapKind::Zigzag);
        assert_eq!(z.eval(0.25).unwrap(), -0.5);
        assert_eq!(z.eval(0.75).unwrap(), -0.5);
        let g = PiecewiseAffineMap::generalized_zigzag(GeneralizedZigzagParams::new(1.5).unwrap());
        assert_eq!(g.kind(), MapKind::GeneralizedZigzag);
        assert!((g.eval(0.5).unwrap() - 0.75).abs() < 1e-15);
        for m in [-2.9, -2.0, -1.2, -0.5, 0.3, 1.0, 2.5] {
            let g = PiecewiseAffineMap::generalized_zigzag(GeneralizedZigzagParams::new(m).unwrap());
            assert_eq!(g.eval(0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn generalized_zigzag_rejects_bad_m() {
        for m in [0.0, 3.0, -3.0, 7.0, f64::NAN] {
            assert!(GeneralizedZigzagParams::new(m).is_err(), "m = {m}");
        }
    }

    #[test]
    fn small_slope_zigzag_is_single_segment() {
        let g = PiecewiseAffineMap::generalized_zigzag(GeneralizedZigzagParams::new(0.5).unwrap());
        assert_eq!(g.segments().len(), 1);
        assert_eq!(g.eval(0.8).unwrap(), 0.4);
    }

    #[test]
    fn tent_and_bernoulli_values() {
        let t = PiecewiseAffineMap::tent();
        assert_eq!(t.eval(0.5).unwrap(), 1.0);
        assert_eq!(t.eval(0.25).unwrap(), 0.5);
        assert_eq!(t.eval(0.75).unwrap(), 0.5);
        assert!((t.eval(0.3).unwrap() - 0.6).abs() < 1e-15);
        let b = PiecewiseAffineMap::bernoulli();
        assert_eq!(b.eval(-0.5).unwrap(), 0.0);
        assert_eq!(b.eval(0.5).unwrap(), 0.0);
        assert!((b.eval(0.9).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn guard_band_extrapolation() {
        let z = PiecewiseAffineMap::zigzag();
        assert!((z.eval(1.02).unwrap() - 0.04).abs() < 1e-12);
        let t = PiecewiseAffineMap::tent();
        let y = t.eval(1.02).unwrap();
        assert!((y + 0.04).abs() < 1e-12);
        assert!((t.eval(y).unwrap() + 0.08).abs() < 1e-12);
        assert!(matches!(t.eval(1.2), Err(Error::OutOfDomain { .. })));
        assert!(matches!(t.eval(-0.11), Err(Error::OutOfDomain { .. })));
        let narrow = PiecewiseAffineMap::tent().with_guard_band(0.01).unwrap();
        assert!(narrow.eval(1.02).is_err());
    }

    #[test]
    fn segments_own_upper_endpoint() {
        let b = PiecewiseAffineMap::bernoulli();
        assert_eq!(b.segment_index(0.0), Some(0));
        assert_eq!(b.segment_index(-1.0), Some(0));
        assert_eq!(b.segment_index(1e-300), Some(1));
        assert_eq!(b.segment_index(1.5), None);
    }

    #[test]
    fn nonideal_ideal_case_is_tent() {
        let (n, p) = PiecewiseAffineMap::nonideal(0.0, 0.0).unwrap();
        assert!(n.same_segments(&PiecewiseAffineMap::tent(), 0.0));
        assert_eq!(p.x_b, 0.5);
        assert_eq!(p.delta_o, 0.0);
        assert_eq!(p.x_t1, 0.25);
        assert_eq!(p.x_t2, 0.75);
    }

    #[test]
    fn nonideal_geometry() {
        let (_, p) = PiecewiseAffineMap::nonideal(0.05, 0.0).unwrap();
        assert!((p.x_b - 1.0 / 2.1).abs() < 1e-15);
        assert!((p.x_b - 0.476190).abs() < 1e-6);
        assert!((p.delta_o + 0.05).abs() < 1e-15);

        let (n, p) = PiecewiseAffineMap::nonideal(0.02, 0.03).unwrap();
        assert!((p.delta_o + 0.05).abs() < 1e-15);
        // independent root finding on each branch
        let rise = |x: f64| 2.0 * 1.02 * x - p.x_b;
        let fall = |x: f64| 1.0 - 2.0 * 1.03 * (x - p.x_b) - p.x_b;
        assert!((bisect(rise, 0.0, p.x_b) - p.x_t1).abs() < 1e-12);
        assert!((bisect(fall, p.x_b, 1.0) - p.x_t2).abs() < 1e-12);
        assert!((n.eval(p.x_t1).unwrap() - p.x_b).abs() < 1e-12);
        assert!((n.eval(p.x_t2).unwrap() - p.x_b).abs() < 1e-12);
        assert!(0.0 < p.x_t1 && p.x_t1 < p.x_b && p.x_b < p.x_t2 && p.x_t2 < 1.0);
    }

    #[test]
    fn nonideal_rejects_large_deltas() {
        assert!(PiecewiseAffineMap::nonideal(0.25, 0.0).is_err());
        assert!(PiecewiseAffineMap::nonideal(0.0, -0.3).is_err());
    }

    #[test]
    fn nonideal_fold_reflects_undershoot() {
        let (n, _) = PiecewiseAffineMap::nonideal(0.05, 0.05).unwrap();
        let raw = n.eval(1.0).unwrap();
        assert!(raw < 0.0);
        assert_eq!(n.step(1.0).unwrap(), -raw);
    }

    #[test]
    fn bit_rules() {
        let z = PiecewiseAffineMap::zigzag();
        assert_eq!(z.bit_rule().bit(-0.3), 0);
        assert_eq!(z.bit_rule().bit(0.7), 1);
        assert_eq!(z.bit_rule().bit(-0.7), 1);
        let (n, _) = PiecewiseAffineMap::nonideal(0.05, 0.0).unwrap();
        assert_eq!(n.bit_rule().bit(0.48), 1);
        assert_eq!(n.bit_rule().bit(0.47), 0);
        assert_eq!(PiecewiseAffineMap::tent().bit_rule().bit(0.3), 0);
        assert_eq!(PiecewiseAffineMap::bernoulli().bit_rule().bit(-0.1), 0);
        assert_eq!(PiecewiseAffineMap::bernoulli().bit_rule().bit(0.1), 1);
    }

    #[test]
    fn rejects_malformed_segment_tables() {
        let gap = vec![Segment::new(0.0, 0.4, 2.0, 0.0), Segment::new(0.5, 1.0, -2.0, 2.0)];
        assert!(PiecewiseAffineMap::new(MapKind::Custom, (0.0, 1.0), gap).is_err());
        let flat = vec![Segment::new(0.0, 1.0, 0.0, 0.5)];
        assert!(PiecewiseAffineMap::new(MapKind::Custom, (0.0, 1.0), flat).is_err());
        let short = vec![Segment::new(0.0, 0.9, 2.0, 0.0)];
        assert!(PiecewiseAffineMap::new(MapKind::Custom, (0.0, 1.0), short).is_err());
        assert!(PiecewiseAffineMap::new(MapKind::Custom, (0.0, 1.0), vec![]).is_err());
    }

    #[test]
    fn json_document_shape() {
        let t = PiecewiseAffineMap::tent();
        let v: serde_json::Value = serde_json::from_str(&t.to_json().unwrap()).unwrap();
        assert_eq!(v["kind"], "tent");
        assert_eq!(v["domain"], serde_json::json!([0.0, 1.0]));
        assert_eq!(v["segments"][1], serde_json::json!([0.5, 1.0, -2.0, 2.0]));
        assert!(v.get("guard_band").is_none());
        let back = PiecewiseAffineMap::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
        let bad = r#"{"kind":"custom","domain":[0,1],"segments":[[0,0.5,2,0]]}"#;
        assert!(PiecewiseAffineMap::from_json(bad).is_err());
    }
}
