//! Nondecreasing C² maps of the real line that are exactly flat on some
//! intervals and the identity on another.
//!
//! The derivative profile is piecewise constant with values in `{0, 1}`;
//! every change of slope happens through a quintic smoothstep
//! `S(t) = 6t⁵ − 15t⁴ + 10t³` of width `w` centred in the gap between two
//! regions. Since `S'` and `S''` vanish at both ends, the map is C² (in fact
//! C³) and its derivative is exactly zero on flat segments.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "interval bounds out of order: {lo} > {hi}");
        Self { lo, hi }
    }

    pub fn everything() -> Self {
        Self::new(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Const(f64),
    Blend { from: f64, to: f64, width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Segment {
    start: f64,
    end: f64,
    kind: Kind,
    /// A finite point of the segment and the map's value there.
    anchor: f64,
    anchor_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothReparam {
    segments: Vec<Segment>,
}

fn smoothstep(t: f64) -> f64 {
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

fn smoothstep_prime(t: f64) -> f64 {
    30.0 * t * t * (1.0 - t) * (1.0 - t)
}

/// `∫_0^t S`.
fn smoothstep_integral(t: f64) -> f64 {
    t * t * t * t * (2.5 + t * (-3.0 + t))
}

/// Flat on every `flat_regions` interval, slope one on `identity_region` with
/// `φ(v) = v` there.
pub fn build_reparam(flat_regions: &[Interval], identity_region: Interval, blend_width: f64) -> Result<SmoothReparam> {
    if !(blend_width > 0.0 && blend_width.is_finite()) {
        return Err(Error::InvalidArgument(format!("blend width must be positive, got {blend_width}")));
    }
    let mut regions: Vec<(Interval, f64)> = flat_regions.iter().map(|r| (*r, 0.0)).collect();
    regions.push((identity_region, 1.0));
    regions.sort_by(|a, b| a.0.lo.total_cmp(&b.0.lo));
    for pair in regions.windows(2) {
        if pair[0].0.hi + blend_width > pair[1].0.lo - blend_width {
            return Err(Error::OverlappingRegions);
        }
    }

    // Slope profile left to right: a blend sits at the centre of each gap
    // between regions of different slope.
    let mut segments = Vec::new();
    let mut start = f64::NEG_INFINITY;
    let mut slope = regions[0].1;
    for pair in regions.windows(2) {
        let next = pair[1].1;
        if next == slope {
            continue;
        }
        let mid = 0.5 * (pair[0].0.hi + pair[1].0.lo);
        let (a, b) = (mid - 0.5 * blend_width, mid + 0.5 * blend_width);
        let anchor = if start.is_finite() { start } else { a };
        segments.push(Segment { start, end: a, kind: Kind::Const(slope), anchor, anchor_value: 0.0 });
        segments.push(Segment {
            start: a,
            end: b,
            kind: Kind::Blend { from: slope, to: next, width: blend_width },
            anchor: a,
            anchor_value: 0.0,
        });
        start = b;
        slope = next;
    }
    let tail_anchor = if start.is_finite() { start } else { 0.0 };
    segments.push(Segment {
        start,
        end: f64::INFINITY,
        kind: Kind::Const(slope),
        anchor: tail_anchor,
        anchor_value: 0.0,
    });

    // Integrate values left to right from an arbitrary origin.
    let mut value = 0.0;
    for seg in segments.iter_mut() {
        seg.anchor_value = value;
        if seg.end.is_finite() {
            value += seg.increment();
        }
    }
    let mut phi = SmoothReparam { segments };

    // Shift so that the map is the identity on its identity region.
    let p = [identity_region.lo, identity_region.hi].into_iter().find(|v| v.is_finite()).unwrap_or(0.0);
    let shift = p - phi.value(p);
    for seg in phi.segments.iter_mut() {
        seg.anchor_value += shift;
    }
    Ok(phi)
}

impl Segment {
    /// `φ(end) − φ(anchor)` for finite segments, anchors at the start.
    fn increment(&self) -> f64 {
        match self.kind {
            Kind::Const(s) => s * (self.end - self.anchor),
            Kind::Blend { from, to, width } => from * width + (to - from) * width * smoothstep_integral(1.0),
        }
    }

    fn eval(&self, v: f64) -> (f64, f64, f64) {
        match self.kind {
            Kind::Const(s) => (self.anchor_value + s * (v - self.anchor), s, 0.0),
            Kind::Blend { from, to, width } => {
                let t = ((v - self.anchor) / width).clamp(0.0, 1.0);
                let val = self.anchor_value + from * (v - self.anchor) + (to - from) * width * smoothstep_integral(t);
                (val, from + (to - from) * smoothstep(t), (to - from) * smoothstep_prime(t) / width)
            }
        }
    }
}

impl SmoothReparam {
    fn segment(&self, v: f64) -> &Segment {
        let idx = self.segments.partition_point(|s| s.end < v);
        &self.segments[idx.min(self.segments.len() - 1)]
    }

    /// `(φ(v), φ'(v), φ''(v))`.
    pub fn eval(&self, v: f64) -> (f64, f64, f64) {
        self.segment(v).eval(v)
    }

    pub fn value(&self, v: f64) -> f64 {
        self.eval(v).0
    }

    pub fn derivative(&self, v: f64) -> f64 {
        self.eval(v).1
    }

    pub fn second_derivative(&self, v: f64) -> f64 {
        self.eval(v).2
    }

    /// Limits at `∓∞`; infinite when the map keeps slope one on that side.
    pub fn limits(&self) -> (f64, f64) {
        let first = self.segments.first().expect("at least one segment");
        let last = self.segments.last().expect("at least one segment");
        let lo = match first.kind {
            Kind::Const(s) if s == 0.0 => first.anchor_value,
            _ => f64::NEG_INFINITY,
        };
        let hi = match last.kind {
            Kind::Const(s) if s == 0.0 => last.anchor_value,
            _ => f64::INFINITY,
        };
        (lo, hi)
    }

    /// Finite breakpoints where the slope profile changes.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.start).filter(|v| v.is_finite()).collect()
    }
}
