//! Gradient-domain compositing.
//!
//! On the domain `omega` we solve the discrete Poisson equation with
//! Dirichlet boundary values from the base image:
//!
//! `4 f_p - sum_{q in N(p) & omega} f_q = sum_{q in N(p) \ omega} base_q + sum_{q in N(p)} v_pq`
//!
//! where `v_pq` is the guidance along the edge from `p` to `q`. The system is
//! symmetric positive definite and solved with conjugate gradients.

use thiserror::Error;

use crate::par::{self, Execution};
use crate::raster::{Mask, Raster};

/// Alpha above this belongs to the blend domain before dilation.
pub const DOMAIN_ALPHA: f32 = 0.05;

const NONE: u32 = u32::MAX;
/// Left, right, up, down.
const DIRS: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

#[derive(Debug, Error, PartialEq)]
pub enum BlendError {
    #[error("blend domain is empty")]
    EmptyDomain,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BlendMode {
    /// Per edge, the stronger of the base and composite gradients.
    #[default]
    Mixed,
    /// Gradients of the alpha composite.
    Replace,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Stop when `|r| / |b|` drops below this.
    pub tolerance: f64,
    /// Defaults to `max(500, 10 * sqrt(|omega|))`.
    pub max_iters: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tolerance: 1e-6, max_iters: None }
    }
}

#[derive(Clone, Debug)]
pub struct PoissonProblem {
    width: usize,
    height: usize,
    channels: usize,
    /// Row-major pixel indices of omega, ascending.
    cells: Vec<u32>,
    /// Per cell and direction: index of the neighbor cell, or `NONE`.
    links: Vec<[u32; 4]>,
    /// Per channel, per cell, per direction.
    guidance: Vec<Vec<[f64; 4]>>,
    /// Per channel right-hand side.
    rhs: Vec<Vec<f64>>,
    pub config: SolverConfig,
}

impl PoissonProblem {
    /// Builds the system for `domain` with guidance `v(channel, p, q)` on the
    /// edge from pixel `p` to its neighbor `q`. Domain pixels on the image
    /// border are dropped since they would lack boundary values.
    pub fn new(
        base: &Raster,
        domain: &Mask,
        config: SolverConfig,
        v: impl Fn(usize, (usize, usize), (usize, usize)) -> f64,
    ) -> Result<Self, BlendError> {
        let (w, h, nc) = (base.width(), base.height(), base.channels());
        if domain.width() != w || domain.height() != h {
            return Err(BlendError::ShapeMismatch(format!("domain {}x{} vs image {w}x{h}", domain.width(), domain.height())));
        }
        let interior = |x: usize, y: usize| x > 0 && y > 0 && x + 1 < w && y + 1 < h;
        let mut index = vec![NONE; w * h];
        let mut cells = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if domain.get(x, y) && interior(x, y) {
                    index[y * w + x] = cells.len() as u32;
                    cells.push((y * w + x) as u32);
                }
            }
        }
        if cells.is_empty() {
            return Err(BlendError::EmptyDomain);
        }
        let mut links = Vec::with_capacity(cells.len());
        let mut guidance = vec![Vec::with_capacity(cells.len()); nc];
        let mut rhs = vec![vec![0.0; cells.len()]; nc];
        for (k, &cell) in cells.iter().enumerate() {
            let (x, y) = (cell as usize % w, cell as usize / w);
            let mut link = [NONE; 4];
            let mut g = vec![[0.0; 4]; nc];
            for (d, (dx, dy)) in DIRS.iter().enumerate() {
                let (qx, qy) = ((x as i64 + dx) as usize, (y as i64 + dy) as usize);
                let qi = qy * w + qx;
                link[d] = index[qi];
                for c in 0..nc {
                    let vpq = v(c, (x, y), (qx, qy));
                    g[c][d] = vpq;
                    rhs[c][k] += vpq;
                    if index[qi] == NONE {
                        rhs[c][k] += base.get(qx, qy, c) as f64;
                    }
                }
            }
            links.push(link);
            for c in 0..nc {
                guidance[c].push(g[c]);
            }
        }
        Ok(Self { width: w, height: h, channels: nc, cells, links, guidance, rhs, config })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Pixel coordinates of the unknowns, in solver order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cells.iter().map(|&c| (c as usize % self.width, c as usize / self.width))
    }

    pub fn domain_mask(&self) -> Mask {
        let mut m = Mask::new(self.width, self.height);
        for (x, y) in self.cells() {
            m.set(x, y, true);
        }
        m
    }

    /// Guidance on the four edges (left, right, up, down) of cell `k`.
    pub fn guidance(&self, channel: usize, k: usize) -> [f64; 4] {
        self.guidance[channel][k]
    }

    pub fn rhs(&self, channel: usize) -> &[f64] {
        &self.rhs[channel]
    }

    /// `A x` for the 5-point Laplacian restricted to omega.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (k, link) in self.links.iter().enumerate() {
            let mut s = 4.0 * x[k];
            for &l in link {
                if l != NONE {
                    s -= x[l as usize];
                }
            }
            out[k] = s;
        }
    }

    pub fn max_iters(&self) -> usize {
        self.config.max_iters.unwrap_or_else(|| ((10.0 * (self.len() as f64).sqrt()).ceil() as usize).max(500))
    }

    /// `b - A x` in channel `c`.
    pub fn residual(&self, c: usize, x: &[f64]) -> Vec<f64> {
        let mut ax = vec![0.0; x.len()];
        self.apply(x, &mut ax);
        self.rhs[c].iter().zip(&ax).map(|(b, a)| b - a).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug)]
pub struct ChannelSolution {
    /// Unclamped solution in cell order.
    pub values: Vec<f64>,
    /// `|b - A x| / |b|` recomputed from the returned values.
    pub relative_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub channels: Vec<ChannelSolution>,
}

impl Solution {
    pub fn converged(&self) -> bool {
        self.channels.iter().all(|c| c.converged)
    }
}

/// Conjugate gradients for one channel from a zero start. Returns the best
/// iterate seen if the iteration cap is reached.
pub fn solve_channel(p: &PoissonProblem, c: usize) -> ChannelSolution {
    let n = p.len();
    let b = &p.rhs[c];
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return ChannelSolution { values: x, relative_residual: 0.0, iterations: 0, converged: true };
    }
    let tol = p.config.tolerance;
    let max_iters = p.max_iters();
    let mut r = b.clone();
    let mut d = r.clone();
    let mut ad = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let mut best = (rr.sqrt() / b_norm, x.clone());
    let mut iterations = 0;
    while iterations < max_iters && rr.sqrt() / b_norm >= tol {
        p.apply(&d, &mut ad);
        let dad = dot(&d, &ad);
        if !(dad > 0.0) {
            break;
        }
        let alpha = rr / dad;
        for i in 0..n {
            x[i] += alpha * d[i];
            r[i] -= alpha * ad[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            d[i] = r[i] + beta * d[i];
        }
        rr = rr_new;
        iterations += 1;
        if rr.sqrt() / b_norm < best.0 {
            best = (rr.sqrt() / b_norm, x.clone());
        }
    }
    // recursive residuals drift; judge convergence on the true one
    let true_rel = |v: &[f64]| {
        let r = p.residual(c, v);
        dot(&r, &r).sqrt() / b_norm
    };
    let (rel_x, rel_best) = (true_rel(&x), true_rel(&best.1));
    let (values, relative_residual) = if rel_x <= rel_best { (x, rel_x) } else { (best.1, rel_best) };
    ChannelSolution { values, relative_residual, iterations, converged: relative_residual < tol }
}

/// Solves every channel, in parallel when `exec` allows.
pub fn solve(p: &PoissonProblem, exec: Execution) -> Solution {
    let channels = par::map_range(exec, p.channels, |c| solve_channel(p, c));
    for (c, s) in channels.iter().enumerate() {
        if !s.converged {
            log::warn!("poisson channel {c} stopped at residual {:e} after {} iterations", s.relative_residual, s.iterations);
        }
    }
    Solution { channels }
}

/// Blend domain from patch alpha: `alpha > 0.05`, dilated by one pixel
/// (3x3), restricted to the image interior, without isolated pixels.
pub fn blend_domain(alpha: &Raster) -> Mask {
    let (w, h) = (alpha.width(), alpha.height());
    let seed = Mask::from_fn(w, h, |x, y| alpha.get(x, y, 0) > DOMAIN_ALPHA);
    let dilated = Mask::from_fn(w, h, |x, y| {
        if x == 0 || y == 0 || x + 1 >= w || y + 1 >= h {
            return false;
        }
        (y - 1..=y + 1).any(|yy| (x - 1..=x + 1).any(|xx| seed.get(xx, yy)))
    });
    Mask::from_fn(w, h, |x, y| {
        dilated.get(x, y)
            && DIRS.iter().any(|(dx, dy)| {
                let (qx, qy) = (x as i64 + dx, y as i64 + dy);
                qx >= 0 && qy >= 0 && (qx as usize) < w && (qy as usize) < h && dilated.get(qx as usize, qy as usize)
            })
    })
}

/// Naive composite `alpha * color + (1 - alpha) * base`.
pub fn alpha_blend(base: &Raster, color: &Raster, alpha: &Raster) -> Result<Raster, BlendError> {
    check_patch(base, color, alpha)?;
    let mut out = base.clone();
    for y in 0..base.height() {
        for x in 0..base.width() {
            let a = alpha.get(x, y, 0);
            if a == 0.0 {
                continue;
            }
            for c in 0..base.channels() {
                out.set(x, y, c, a * color.get(x, y, c) + (1.0 - a) * base.get(x, y, c));
            }
        }
    }
    Ok(out)
}

fn check_patch(base: &Raster, color: &Raster, alpha: &Raster) -> Result<(), BlendError> {
    let same = |r: &Raster| r.width() == base.width() && r.height() == base.height();
    if !same(color) || !same(alpha) || color.channels() != base.channels() || alpha.channels() != 1 {
        return Err(BlendError::ShapeMismatch("patch and base differ".into()));
    }
    Ok(())
}

/// Poisson problem pasting `color`/`alpha` (already in image space) into
/// `base`.
pub fn build_problem(base: &Raster, color: &Raster, alpha: &Raster, mode: BlendMode, config: SolverConfig) -> Result<PoissonProblem, BlendError> {
    let composite = alpha_blend(base, color, alpha)?;
    let domain = blend_domain(alpha);
    PoissonProblem::new(base, &domain, config, |c, (px, py), (qx, qy)| {
        let g = composite.get(px, py, c) as f64 - composite.get(qx, qy, c) as f64;
        match mode {
            BlendMode::Replace => g,
            BlendMode::Mixed => {
                let f = base.get(px, py, c) as f64 - base.get(qx, qy, c) as f64;
                if f.abs() > g.abs() {
                    f
                } else {
                    g
                }
            }
        }
    })
}

/// Writes the clamped solution into a copy of `base`; pixels outside the
/// domain are untouched.
pub fn compose(base: &Raster, solution: &Solution, p: &PoissonProblem) -> Raster {
    let mut out = base.clone();
    for (k, (x, y)) in p.cells().enumerate() {
        for (c, s) in solution.channels.iter().enumerate() {
            out.set(x, y, c, s.values[k].clamp(0.0, 1.0) as f32);
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rng::rng_from_key;
    use rand::Rng;

    /// Dense Gaussian elimination with partial pivoting.
    pub(crate) fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in col + 1..n {
                let f = a[row][col] / a[col][col];
                let pivot_row = a[col].clone();
                for (dst, src) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                    *dst -= f * src;
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
            x[row] = (b[row] - s) / a[row][row];
        }
        x
    }

    #[test]
    fn small_random_problem_matches_dense_solve() {
        let mut rng = rng_from_key(9);
        let (w, h) = (7, 7);
        let base = Raster::from_fn(w, h, 1, |_, _, _| rng.gen::<f32>());
        let domain = Mask::from_fn(w, h, |x, y| (1..6).contains(&x) && (1..6).contains(&y));
        let field: Vec<f64> = (0..w * h * 4).map(|_| rng.gen_range(-0.2..0.2)).collect();
        let v = |_: usize, p: (usize, usize), q: (usize, usize)| {
            let d = DIRS.iter().position(|&(dx, dy)| (p.0 as i64 + dx, p.1 as i64 + dy) == (q.0 as i64, q.1 as i64)).unwrap();
            field[(p.1 * w + p.0) * 4 + d]
        };
        let cfg = SolverConfig { tolerance: 1e-14, max_iters: Some(1000) };
        let p = PoissonProblem::new(&base, &domain, cfg, v).unwrap();
        let s = solve(&p, Execution::Sequential);
        // oracle assembles its own system
        let cells: Vec<(usize, usize)> = (1..6).flat_map(|y| (1..6).map(move |x| (x, y))).collect();
        let idx = |x: usize, y: usize| cells.iter().position(|&c| c == (x, y));
        let n = cells.len();
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![0.0; n];
        for (i, &(x, y)) in cells.iter().enumerate() {
            a[i][i] = 4.0;
            for (dx, dy) in DIRS {
                let (qx, qy) = ((x as i64 + dx) as usize, (y as i64 + dy) as usize);
                b[i] += v(0, (x, y), (qx, qy));
                match idx(qx, qy) {
                    Some(j) => a[i][j] -= 1.0,
                    None => b[i] += base.get(qx, qy, 0) as f64,
                }
            }
        }
        let x = dense_solve(a, b);
        for (k, cell) in p.cells().enumerate() {
            let j = idx(cell.0, cell.1).unwrap();
            assert!((s.channels[0].values[k] - x[j]).abs() < 1e-8);
        }
        let r = p.residual(0, &s.channels[0].values);
        let rel = dot(&r, &r).sqrt() / dot(p.rhs(0), p.rhs(0)).sqrt();
        assert!((rel - s.channels[0].relative_residual).abs() < 1e-12);
    }

    #[test]
    fn constant_boundary_gives_constant_interior() {
        let base = Raster::filled(12, 10, 3, 0.37);
        let domain = Mask::from_fn(12, 10, |x, y| (2..9).contains(&x) && (3..8).contains(&y));
        let p = PoissonProblem::new(&base, &domain, SolverConfig::default(), |_, _, _| 0.0).unwrap();
        let s = solve(&p, Execution::default());
        assert!(s.converged());
        for ch in &s.channels {
            assert!(ch.values.iter().all(|v| (v - 0.37).abs() < 1e-6));
        }
    }

    #[test]
    fn base_gradient_reproduces_base() {
        let mut rng = rng_from_key(4);
        let base = Raster::from_fn(20, 16, 3, |_, _, _| rng.gen::<f32>());
        let domain = Mask::from_fn(20, 16, |x, y| (x as i64 - 10).pow(2) + (y as i64 - 8).pow(2) < 30);
        let p = PoissonProblem::new(&base, &domain, SolverConfig::default(), |c, p, q| {
            base.get(p.0, p.1, c) as f64 - base.get(q.0, q.1, c) as f64
        })
        .unwrap();
        let out = compose(&base, &solve(&p, Execution::default()), &p);
        for (a, b) in out.data().iter().zip(base.data()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn empty_alpha_is_empty_domain() {
        let base = Raster::filled(8, 8, 3, 0.5);
        let color = Raster::filled(8, 8, 3, 0.1);
        let alpha = Raster::filled(8, 8, 1, 0.0);
        assert_eq!(build_problem(&base, &color, &alpha, BlendMode::Mixed, SolverConfig::default()).unwrap_err(), BlendError::EmptyDomain);
    }

    #[test]
    fn replace_with_identical_patch_uses_base_gradient() {
        let mut rng = rng_from_key(2);
        let base = Raster::from_fn(10, 10, 3, |_, _, _| rng.gen::<f32>());
        let alpha = Raster::from_fn(10, 10, 1, |x, y, _| if (3..7).contains(&x) && (3..7).contains(&y) { 1.0 } else { 0.0 });
        let p = build_problem(&base, &base, &alpha, BlendMode::Replace, SolverConfig::default()).unwrap();
        for (k, (x, y)) in p.cells().enumerate() {
            for c in 0..3 {
                let g = p.guidance(c, k);
                for (d, (dx, dy)) in DIRS.iter().enumerate() {
                    let (qx, qy) = ((x as i64 + dx) as usize, (y as i64 + dy) as usize);
                    let expect = base.get(x, y, c) as f64 - base.get(qx, qy, c) as f64;
                    assert!((g[d] - expect).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn mixed_on_constant_base_takes_composite_gradient() {
        let mut rng = rng_from_key(8);
        let base = Raster::filled(8, 8, 1, 0.5);
        let color = Raster::from_fn(8, 8, 1, |_, _, _| rng.gen::<f32>());
        let alpha = Raster::from_fn(8, 8, 1, |x, y, _| if (2..6).contains(&x) && (2..6).contains(&y) { 1.0 } else { 0.3 });
        let p = build_problem(&base, &color, &alpha, BlendMode::Mixed, SolverConfig::default()).unwrap();
        let comp = alpha_blend(&base, &color, &alpha).unwrap();
        for (k, (x, y)) in p.cells().enumerate() {
            let g = p.guidance(0, k);
            for (d, (dx, dy)) in DIRS.iter().enumerate() {
                let (qx, qy) = ((x as i64 + dx) as usize, (y as i64 + dy) as usize);
                let cg = comp.get(x, y, 0) as f64 - comp.get(qx, qy, 0) as f64;
                // brute-force max-magnitude choice; base gradient is zero
                let expect = if 0.0f64.abs() > cg.abs() { 0.0 } else { cg };
                assert_eq!(g[d], expect);
            }
        }
    }

    #[test]
    fn compose_leaves_outside_bit_identical() {
        let base = Raster::from_fn(24, 24, 3, |x, y, _| if (x / 3 + y / 3) % 2 == 0 { 0.9 } else { 0.1 });
        let color = Raster::filled(24, 24, 3, 0.3);
        let alpha = Raster::from_fn(24, 24, 1, |x, y, _| if (x as f64 - 12.0).hypot(y as f64 - 12.0) < 6.0 { 1.0 } else { 0.0 });
        let p = build_problem(&base, &color, &alpha, BlendMode::Mixed, SolverConfig::default()).unwrap();
        let out = compose(&base, &solve(&p, Execution::default()), &p);
        let dom = p.domain_mask();
        for y in 0..24 {
            for x in 0..24 {
                if !dom.get(x, y) {
                    assert_eq!(out.pixel(x, y), base.pixel(x, y));
                }
            }
        }
    }

    #[test]
    fn alpha_blend_examples() {
        let base = Raster::filled(3, 3, 3, 0.2);
        let color = Raster::filled(3, 3, 3, 0.6);
        let zero = alpha_blend(&base, &color, &Raster::filled(3, 3, 1, 0.0)).unwrap();
        assert_eq!(zero.data(), base.data());
        let one = alpha_blend(&base, &color, &Raster::filled(3, 3, 1, 1.0)).unwrap();
        assert_eq!(one.data(), color.data());
        let half = alpha_blend(&base, &color, &Raster::filled(3, 3, 1, 0.5)).unwrap();
        assert!(half.data().iter().all(|v| (v - 0.4).abs() < 1e-6));
    }

    #[test]
    fn domain_has_no_isolated_or_border_pixels() {
        let alpha = Raster::from_fn(9, 9, 1, |x, y, _| if (x, y) == (0, 4) || (x, y) == (4, 4) { 1.0 } else { 0.0 });
        let m = blend_domain(&alpha);
        assert_eq!(m.count(), 9 + 3);
        assert!(!m.get(0, 4) && m.get(1, 4) && m.get(3, 3));
    }
}
