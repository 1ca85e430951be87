//! Scene planes from relative depth, and the homography that lays a flat
//! text patch onto such a plane in the image.
//!
//! Camera model: pinhole with focal `focal_factor * max(w, h)` and the
//! principal point at the image center. Pixel `(i, j)` has its center at
//! `(i + 0.5, j + 0.5)`.

use nalgebra::{Matrix3, SMatrix, Vector3};
use rand::Rng;
use thiserror::Error;

use crate::poly::{self, Point, Polygon};
use crate::raster::{Mask, Raster};
use crate::regions::Region;
use crate::render::{TextGeometry, TextPatch};

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("degenerate region: {0}")]
    DegenerateRegion(String),
    #[error("numerically singular: {0}")]
    NumericallySingular(String),
    #[error("depth map must have 1 channel, found {0}")]
    WrongChannelCount(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Camera {
    pub fn for_image(width: usize, height: usize, focal_factor: f64) -> Self {
        Self { focal: focal_factor * width.max(height) as f64, cx: width as f64 / 2.0, cy: height as f64 / 2.0 }
    }

    /// `K^-1 (x, y, 1)`.
    pub fn ray(&self, x: f64, y: f64) -> Vector3<f64> {
        Vector3::new((x - self.cx) / self.focal, (y - self.cy) / self.focal, 1.0)
    }

    pub fn back_project(&self, x: f64, y: f64, depth: f64) -> Vector3<f64> {
        self.ray(x, y) * depth
    }

    pub fn project(&self, p: &Vector3<f64>) -> Point {
        Point::new(self.focal * p.x / p.z + self.cx, self.focal * p.y / p.z + self.cy)
    }
}

/// `normal . X = offset` in camera coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub offset: f64,
    pub inlier_fraction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneFitConfig {
    pub focal_factor: f64,
    pub ransac_iters: usize,
    /// Inlier distance as a fraction of the region's depth range.
    pub inlier_tol: f64,
    /// Points beyond this are subsampled with a fixed stride.
    pub max_points: usize,
}

impl Default for PlaneFitConfig {
    fn default() -> Self {
        Self { focal_factor: 1.2, ransac_iters: 200, inlier_tol: 0.02, max_points: 4096 }
    }
}

fn plane_through(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> Option<(Vector3<f64>, f64)> {
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    let scale = (b - a).norm() * (c - a).norm();
    if !(len > 1e-12 * scale) || scale == 0.0 {
        return None;
    }
    let n = n / len;
    Some((n, n.dot(a)))
}

/// Total least squares plane through `pts`: the eigenvector of the smallest
/// scatter eigenvalue through the centroid.
pub fn tls_plane(pts: &[Vector3<f64>]) -> Result<(Vector3<f64>, f64), GeometryError> {
    if pts.len() < 3 {
        return Err(GeometryError::DegenerateRegion(format!("{} points", pts.len())));
    }
    let centroid = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
    let mut scatter = Matrix3::zeros();
    for p in pts {
        let d = p - centroid;
        scatter += d * d.transpose();
    }
    let eig = scatter.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (_, mid, large) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    if !(mid > 1e-12 * large) || large <= 0.0 {
        return Err(GeometryError::DegenerateRegion("points are collinear".into()));
    }
    let mut n: Vector3<f64> = eig.eigenvectors.column(order[0]).into_owned().normalize();
    if n.z < 0.0 {
        n = -n;
    }
    Ok((n, n.dot(&centroid)))
}

/// Back-projects the region's pixels through `depth` and fits a plane with
/// RANSAC followed by total least squares on the inliers.
pub fn fit_plane<R: Rng + ?Sized>(depth: &Raster, region: &Region, cfg: &PlaneFitConfig, rng: &mut R) -> Result<Plane, GeometryError> {
    if depth.channels() != 1 {
        return Err(GeometryError::WrongChannelCount(depth.channels()));
    }
    if region.area() < 3 {
        return Err(GeometryError::DegenerateRegion(format!("{} pixels", region.area())));
    }
    let cam = Camera::for_image(depth.width(), depth.height(), cfg.focal_factor);
    let stride = region.area().div_ceil(cfg.max_points.max(3));
    let pts: Vec<Vector3<f64>> = region
        .coords()
        .step_by(stride)
        .map(|(x, y)| cam.back_project(x as f64 + 0.5, y as f64 + 0.5, depth.get(x, y, 0) as f64))
        .collect();
    let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.z), hi.max(p.z)));
    let scale = pts.iter().map(|p| p.norm()).fold(0.0, f64::max).max(1e-12);
    let tol = (cfg.inlier_tol * (hi - lo)).max(1e-9 * scale);
    let inliers_of = |n: &Vector3<f64>, d: f64| -> Vec<usize> { (0..pts.len()).filter(|&i| (n.dot(&pts[i]) - d).abs() <= tol).collect() };

    let mut best: Option<Vec<usize>> = None;
    if pts.len() > 3 {
        for _ in 0..cfg.ransac_iters {
            let a = rng.gen_range(0..pts.len());
            let b = rng.gen_range(0..pts.len());
            let c = rng.gen_range(0..pts.len());
            if a == b || b == c || a == c {
                continue;
            }
            let Some((n, d)) = plane_through(&pts[a], &pts[b], &pts[c]) else { continue };
            let inl = inliers_of(&n, d);
            if best.as_ref().is_none_or(|b| inl.len() > b.len()) {
                best = Some(inl);
            }
        }
    }
    let fit_set: Vec<Vector3<f64>> = match best {
        Some(idx) if idx.len() >= 3 => idx.iter().map(|&i| pts[i]).collect(),
        _ => pts.clone(),
    };
    let (normal, offset) = match tls_plane(&fit_set) {
        Ok(p) => p,
        // inliers may be collinear even when the region is not
        Err(_) => tls_plane(&pts)?,
    };
    let inlier_fraction = inliers_of(&normal, offset).len() as f64 / pts.len() as f64;
    Ok(Plane { normal, offset, inlier_fraction })
}

/// Projective map normalized so `h[(2, 2)] == 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Homography {
    pub h: Matrix3<f64>,
}

impl Homography {
    pub fn identity() -> Self {
        Self { h: Matrix3::identity() }
    }

    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        let s = m[(2, 2)];
        if !(s.abs() > 1e-15 * m.norm()) {
            return Err(GeometryError::NumericallySingular("h33 is zero".into()));
        }
        let h = m / s;
        if !(h.determinant().abs() > 1e-9) {
            return Err(GeometryError::NumericallySingular(format!("det {}", h.determinant())));
        }
        Ok(Self { h })
    }

    pub fn apply(&self, p: Point) -> Point {
        let v = self.h * Vector3::new(p.x, p.y, 1.0);
        Point::new(v.x / v.z, v.y / v.z)
    }

    /// Homogeneous `w` of the image of `p`; positive on the patch side of the
    /// horizon.
    pub fn w(&self, p: Point) -> f64 {
        self.h[(2, 0)] * p.x + self.h[(2, 1)] * p.y + self.h[(2, 2)]
    }

    pub fn inverse(&self) -> Result<Self, GeometryError> {
        let inv = self.h.try_inverse().ok_or_else(|| GeometryError::NumericallySingular("not invertible".into()))?;
        Self::from_matrix(inv)
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &Homography) -> Result<Self, GeometryError> {
        Self::from_matrix(self.h * first.h)
    }

    pub fn transform(&self, poly: &[Point]) -> Polygon {
        poly.iter().map(|&p| self.apply(p)).collect()
    }
}

/// Similarity moving the points' centroid to the origin with mean distance
/// sqrt(2).
fn hartley(pts: &[Point; 4]) -> Matrix3<f64> {
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / 4.0;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / 4.0;
    let mean = pts.iter().map(|p| ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt()).sum::<f64>() / 4.0;
    let s = if mean > 0.0 { std::f64::consts::SQRT_2 / mean } else { 1.0 };
    Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0)
}

fn any_three_collinear(pts: &[Point; 4]) -> bool {
    let scale = pts.iter().flat_map(|p| [p.x.abs(), p.y.abs()]).fold(1.0, f64::max);
    (0..4).any(|skip| {
        let t: Vec<Point> = (0..4).filter(|&i| i != skip).map(|i| pts[i]).collect();
        let cross = (t[1].x - t[0].x) * (t[2].y - t[0].y) - (t[1].y - t[0].y) * (t[2].x - t[0].x);
        cross.abs() <= 1e-12 * scale * scale
    })
}

/// Four-point direct linear transform with Hartley normalization; the
/// solution is the right singular vector of the smallest singular value.
pub fn dlt(src: &[Point; 4], dst: &[Point; 4]) -> Result<Homography, GeometryError> {
    if any_three_collinear(src) || any_three_collinear(dst) {
        return Err(GeometryError::NumericallySingular("three collinear correspondences".into()));
    }
    let (ts, td) = (hartley(src), hartley(dst));
    let norm = |t: &Matrix3<f64>, p: Point| {
        let v = t * Vector3::new(p.x, p.y, 1.0);
        (v.x, v.y)
    };
    // 8 equations, padded with a zero row so the SVD yields a full V
    let mut a = SMatrix::<f64, 9, 9>::zeros();
    for i in 0..4 {
        let (x, y) = norm(&ts, src[i]);
        let (u, v) = norm(&td, dst[i]);
        let r = 2 * i;
        a.row_mut(r).copy_from_slice(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| GeometryError::NumericallySingular("svd failed".into()))?;
    let k = (0..9).min_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j])).unwrap_or(8);
    let h = v_t.row(k);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let td_inv = td.try_inverse().ok_or_else(|| GeometryError::NumericallySingular("normalization".into()))?;
    Homography::from_matrix(td_inv * hn * ts)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomographyConfig {
    pub focal_factor: f64,
    /// Reject planes with `|normal.z|` below this.
    pub min_normal_z: f64,
    /// The projected patch stays within this fraction of the region's bbox.
    pub max_bbox_fraction: f64,
}

impl Default for HomographyConfig {
    fn default() -> Self {
        Self { focal_factor: 1.2, min_normal_z: 0.15, max_bbox_fraction: 0.95 }
    }
}

pub fn patch_corners(w: f64, h: f64) -> [Point; 4] {
    [Point::new(0.0, 0.0), Point::new(w, 0.0), Point::new(w, h), Point::new(0.0, h)]
}

/// Places a `patch`-sized rectangle on `plane`, centered on the ray through
/// the region anchor and oriented along the plane's projection of the image
/// x-axis, scaled so its image covers about `area_fraction` of the region.
/// Returns the homography from patch pixel coordinates to image pixels.
pub fn region_homography(
    plane: &Plane,
    region: &Region,
    patch: (f64, f64),
    area_fraction: f64,
    cfg: &HomographyConfig,
) -> Result<Homography, GeometryError> {
    let n = plane.normal;
    if n.z.abs() < cfg.min_normal_z {
        return Err(GeometryError::NumericallySingular(format!("plane normal z {:.3}", n.z)));
    }
    let (iw, ih) = region.image_dims();
    let cam = Camera::for_image(iw, ih, cfg.focal_factor);
    let (ax, ay) = region.anchor();
    let ray = cam.ray(ax, ay);
    let denom = n.dot(&ray);
    let t = plane.offset / denom;
    if !(denom.abs() > 1e-12) || !(t > 0.0) {
        return Err(GeometryError::NumericallySingular("anchor ray misses the plane".into()));
    }
    let center = ray * t;
    let ex = Vector3::x();
    let u = (ex - n * n.dot(&ex)).normalize();
    let v = n.cross(&u);
    let (pw, ph) = patch;
    let corners_at = |s: f64| -> Result<[Point; 4], GeometryError> {
        let mut out = [Point::new(0.0, 0.0); 4];
        for (o, c) in out.iter_mut().zip(patch_corners(pw, ph)) {
            let x = center + (u * (c.x - pw / 2.0) + v * (c.y - ph / 2.0)) * s;
            if !(x.z > 1e-9) {
                return Err(GeometryError::NumericallySingular("patch corner behind camera".into()));
            }
            *o = cam.project(&x);
        }
        Ok(out)
    };
    let target = area_fraction * region.area() as f64;
    let mut s = center.z / cam.focal;
    for _ in 0..3 {
        let q = corners_at(s)?;
        let a = poly::area(&q);
        if !(a > 0.0) {
            return Err(GeometryError::NumericallySingular("projected patch has no area".into()));
        }
        s *= (target / a).sqrt();
    }
    let bb = region.bbox();
    for _ in 0..3 {
        let (lo, hi) = poly::bounds(&corners_at(s)?);
        let fx = cfg.max_bbox_fraction * bb.width() as f64 / (hi.x - lo.x);
        let fy = cfg.max_bbox_fraction * bb.height() as f64 / (hi.y - lo.y);
        let f = fx.min(fy);
        if f >= 1.0 {
            break;
        }
        s *= f;
    }
    let dst = corners_at(s)?;
    let h = dlt(&patch_corners(pw, ph), &dst)?;
    let err = patch_corners(pw, ph).iter().zip(&dst).map(|(&c, &q)| h.apply(c).dist(q)).fold(0.0, f64::max);
    if !(err < 1e-6) {
        return Err(GeometryError::NumericallySingular(format!("corner reprojection error {err:e}")));
    }
    Ok(h)
}

/// Whether the warped patch is a convex quad inside the image with at least
/// `min_coverage` of its pixels inside `region_mask`.
pub fn fits(patch: (f64, f64), region_mask: &Mask, h: &Homography, min_coverage: f64) -> bool {
    let corners = patch_corners(patch.0, patch.1);
    if corners.iter().any(|&c| !(h.w(c) > 0.0)) {
        return false;
    }
    let quad = h.transform(&corners);
    let (w, hgt) = (region_mask.width() as f64, region_mask.height() as f64);
    if quad.iter().any(|p| !(p.x >= 0.0 && p.x <= w && p.y >= 0.0 && p.y <= hgt)) {
        return false;
    }
    if !poly::is_convex(&quad) {
        return false;
    }
    coverage(&quad, region_mask) >= min_coverage
}

/// Fraction of the polygon's pixels (by center) that are set in `mask`.
pub fn coverage(quad: &[Point], mask: &Mask) -> f64 {
    let fill = poly::fill(quad, mask.width(), mask.height());
    let total = fill.count();
    if total == 0 {
        return 0.0;
    }
    let inside = fill.bits().iter().zip(mask.bits()).filter(|(a, b)| **a && **b).count();
    inside as f64 / total as f64
}

/// A text patch resampled into image space.
#[derive(Clone, Debug)]
pub struct WarpedPatch {
    pub color: Raster,
    pub alpha: Raster,
    pub geometry: TextGeometry,
    /// Image of the patch rectangle.
    pub quad: [Point; 4],
}

fn sample_zero_padded(r: &Raster, x: f64, y: f64) -> f32 {
    let fx = x - 0.5;
    let fy = y - 0.5;
    let x0 = fx.floor();
    let y0 = fy.floor();
    let tx = (fx - x0) as f32;
    let ty = (fy - y0) as f32;
    let at = |xi: f64, yi: f64| {
        if xi < 0.0 || yi < 0.0 || xi >= r.width() as f64 || yi >= r.height() as f64 {
            0.0
        } else {
            r.get(xi as usize, yi as usize, 0)
        }
    };
    let top = at(x0, y0) * (1.0 - tx) + at(x0 + 1.0, y0) * tx;
    let bottom = at(x0, y0 + 1.0) * (1.0 - tx) + at(x0 + 1.0, y0 + 1.0) * tx;
    top * (1.0 - ty) + bottom * ty
}

/// Inverse-maps every image pixel center through `h` and resamples the patch
/// bilinearly. Alpha is zero outside the patch; layout polygons are mapped
/// vertex by vertex.
pub fn warp_patch(patch: &TextPatch, h: &Homography, dims: (usize, usize)) -> Result<WarpedPatch, GeometryError> {
    let (w, hgt) = dims;
    let inv = h.inverse()?;
    let (pw, ph) = (patch.alpha.width(), patch.alpha.height());
    let quad_poly = h.transform(&patch_corners(pw as f64, ph as f64));
    let quad = [quad_poly[0], quad_poly[1], quad_poly[2], quad_poly[3]];
    let (lo, hi) = poly::bounds(&quad);
    let i0 = (lo.x.floor().max(0.0) as usize).min(w);
    let i1 = (hi.x.ceil().max(0.0) as usize).min(w);
    let j0 = (lo.y.floor().max(0.0) as usize).min(hgt);
    let j1 = (hi.y.ceil().max(0.0) as usize).min(hgt);
    let mut alpha = Raster::filled(w, hgt, 1, 0.0);
    let mut color = Raster::filled(w, hgt, 3, 0.0);
    for j in j0..j1 {
        for i in i0..i1 {
            let c = Point::new(i as f64 + 0.5, j as f64 + 0.5);
            if !(inv.w(c) > 0.0) {
                continue;
            }
            let p = inv.apply(c);
            if !(p.x >= 0.0 && p.y >= 0.0 && p.x <= pw as f64 && p.y <= ph as f64) {
                continue;
            }
            alpha.set(i, j, 0, sample_zero_padded(&patch.alpha, p.x, p.y));
            for ch in 0..3 {
                color.set(i, j, ch, patch.color.sample_bilinear(p.x, p.y, ch));
            }
        }
    }
    let b = patch.layout.bounds;
    let geometry = patch.layout.geometry().map_points(|q| h.apply(Point::new(q.x - b.x0, q.y - b.y0)));
    Ok(WarpedPatch { color, alpha, geometry, quad })
}
