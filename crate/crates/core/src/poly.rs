//! Planar polygon helpers in pixel coordinates (x right, y down).
//!
//! Pixel `(i, j)` covers `[i, i+1) x [j, j+1)`; coverage decisions are made at
//! the pixel center `(i + 0.5, j + 0.5)`. Polygons are stored with positive
//! shoelace area, which reads as top-left, top-right, bottom-right,
//! bottom-left for an axis-aligned box.

use serde::{Deserialize, Serialize};

use crate::raster::Mask;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

pub type Polygon = Vec<Point>;

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Shoelace area; positive for the orientation used throughout the crate.
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    acc / 2.0
}

pub fn area(poly: &[Point]) -> f64 {
    signed_area(poly).abs()
}

/// Reverses the vertex order if needed so the signed area is non-negative.
pub fn orient_positive(poly: &mut [Point]) {
    if signed_area(poly) < 0.0 {
        poly.reverse();
    }
}

/// Even-odd crossing test with half-open edges.
pub fn contains_point(poly: &[Point], p: Point) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let a = poly[i];
        let b = poly[j];
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.dist(Point::new(a.x + t * dx, a.y + t * dy))
}

/// Distance from `p` to the polygon boundary.
pub fn boundary_distance(poly: &[Point], p: Point) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| segment_distance(p, poly[i], poly[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// Distance from `p` to the filled polygon (zero inside).
pub fn outside_distance(poly: &[Point], p: Point) -> f64 {
    if contains_point(poly, p) {
        0.0
    } else {
        boundary_distance(poly, p)
    }
}

pub fn bounds(points: &[Point]) -> (Point, Point) {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

/// Scanline fill of the pixels whose centers lie inside `poly`.
pub fn fill(poly: &[Point], width: usize, height: usize) -> Mask {
    let mut mask = Mask::new(width, height);
    fill_into(poly, &mut mask);
    mask
}

/// Sets every pixel of `mask` whose center lies inside `poly`.
pub fn fill_into(poly: &[Point], mask: &mut Mask) {
    let n = poly.len();
    if n < 3 {
        return;
    }
    let (w, h) = (mask.width(), mask.height());
    let (lo, hi) = bounds(poly);
    let row0 = (lo.y - 0.5).ceil().max(0.0) as usize;
    let row1 = ((hi.y - 0.5).floor() + 1.0).clamp(0.0, h as f64) as usize;
    let mut xs = Vec::with_capacity(n);
    for row in row0..row1 {
        let yc = row as f64 + 0.5;
        xs.clear();
        let mut j = n - 1;
        for i in 0..n {
            let a = poly[i];
            let b = poly[j];
            if (a.y > yc) != (b.y > yc) {
                xs.push(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
            }
            j = i;
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            // centers with pair[0] <= x + 0.5 < pair[1]
            let c0 = (pair[0] - 0.5).ceil().max(0.0);
            let c1 = (pair[1] - 0.5).ceil().min(w as f64);
            let mut col = c0 as usize;
            while (col as f64) < c1 {
                mask.set(col, row, true);
                col += 1;
            }
        }
    }
}

/// Convex hull (monotone chain), positive orientation, starting at the vertex
/// with the smallest `x + y`.
pub fn convex_hull(points: &[Point]) -> Polygon {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    orient_positive(&mut lower);
    rotate_to_top_left(&mut lower);
    lower
}

/// Rotates the vertex list so it starts at the vertex minimizing `x + y`.
pub fn rotate_to_top_left(poly: &mut [Point]) {
    if let Some(start) = (0..poly.len()).min_by(|&a, &b| {
        (poly[a].x + poly[a].y).total_cmp(&(poly[b].x + poly[b].y)).then(poly[a].y.total_cmp(&poly[b].y))
    }) {
        poly.rotate_left(start);
    }
}

/// Drops vertices that lie on the segment joining their neighbours.
pub fn simplify_collinear(poly: &[Point], eps: f64) -> Polygon {
    let mut out: Polygon = poly.to_vec();
    let mut changed = true;
    while changed && out.len() > 3 {
        changed = false;
        let n = out.len();
        for i in 0..n {
            let prev = out[(i + n - 1) % n];
            let next = out[(i + 1) % n];
            let cur = out[i];
            let span = prev.dist(next).max(f64::MIN_POSITIVE);
            if (cross(prev, cur, next) / span).abs() <= eps && segment_distance(cur, prev, next) <= eps {
                out.remove(i);
                changed = true;
                break;
            }
        }
    }
    out
}

/// Strict convexity: all turns have the same non-zero sign.
pub fn is_convex(poly: &[Point]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let mut sign = 0.0f64;
    for i in 0..n {
        let c = cross(poly[i], poly[(i + 1) % n], poly[(i + 2) % n]);
        if c == 0.0 || (sign != 0.0 && c.signum() != sign) {
            return false;
        }
        sign = c.signum();
    }
    true
}

/// Sutherland-Hodgman clip against `[0, w] x [0, h]`.
pub fn clip_to_rect(poly: &[Point], w: f64, h: f64) -> Polygon {
    // (normal axis, keep >= or <=, bound)
    let planes: [(bool, bool, f64); 4] = [(true, true, 0.0), (true, false, w), (false, true, 0.0), (false, false, h)];
    let mut out: Polygon = poly.to_vec();
    for (is_x, keep_ge, bound) in planes {
        if out.is_empty() {
            break;
        }
        let coord = |p: &Point| if is_x { p.x } else { p.y };
        let inside = |p: &Point| if keep_ge { coord(p) >= bound } else { coord(p) <= bound };
        let input = std::mem::take(&mut out);
        let n = input.len();
        for i in 0..n {
            let cur = input[i];
            let prev = input[(i + n - 1) % n];
            let intersect = || {
                let t = (bound - coord(&prev)) / (coord(&cur) - coord(&prev));
                let mut p = Point::new(prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y));
                if is_x {
                    p.x = bound;
                } else {
                    p.y = bound;
                }
                p
            };
            match (inside(&prev), inside(&cur)) {
                (true, true) => out.push(cur),
                (true, false) => out.push(intersect()),
                (false, true) => {
                    out.push(intersect());
                    out.push(cur);
                }
                (false, false) => {}
            }
        }
    }
    out
}

/// Checks that `inner` lies inside `outer` up to `tol` pixels. Every edge of
/// `inner` is sampled, so non-convex `outer` polygons are handled.
pub fn polygon_within(outer: &[Point], inner: &[Point], tol: f64) -> bool {
    const SAMPLES_PER_EDGE: usize = 8;
    let n = inner.len();
    (0..n).all(|i| {
        let a = inner[i];
        let b = inner[(i + 1) % n];
        (0..SAMPLES_PER_EDGE).all(|k| {
            let t = k as f64 / SAMPLES_PER_EDGE as f64;
            let p = Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
            outside_distance(outer, p) <= tol
        })
    })
}
