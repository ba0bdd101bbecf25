//! Observation windows, point patterns and ball geometry.
//!
//! Points are stored as `[f64; 3]` with unused trailing coordinates set to
//! zero, so Euclidean distances are computed uniformly for d = 1, 2, 3.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type Point = [f64; 3];

pub fn check_dim(dim: usize) -> Result<()> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

#[inline]
pub fn dist2(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[inline]
pub fn dist(a: &Point, b: &Point) -> f64 {
    dist2(a, b).sqrt()
}

/// Axis-aligned box `[lower, upper]` in d = 1, 2 or 3 dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WindowRepr", into = "WindowRepr")]
pub struct Window {
    dim: usize,
    lower: Point,
    upper: Point,
}

#[derive(Serialize, Deserialize)]
struct WindowRepr {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<WindowRepr> for Window {
    type Error = Error;
    fn try_from(r: WindowRepr) -> Result<Self> {
        Window::new(&r.lower, &r.upper)
    }
}

impl From<Window> for WindowRepr {
    fn from(w: Window) -> Self {
        WindowRepr {
            lower: w.lower[..w.dim].to_vec(),
            upper: w.upper[..w.dim].to_vec(),
        }
    }
}

impl Window {
    pub fn new(lower: &[f64], upper: &[f64]) -> Result<Self> {
        if lower.len() != upper.len() {
            return invalid("window bounds have different lengths");
        }
        let dim = lower.len();
        check_dim(dim)?;
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for i in 0..dim {
            if !(lower[i].is_finite() && upper[i].is_finite()) || upper[i] <= lower[i] {
                return invalid(format!(
                    "window axis {i}: upper bound {} must exceed lower bound {}",
                    upper[i], lower[i]
                ));
            }
            lo[i] = lower[i];
            hi[i] = upper[i];
        }
        Ok(Window { dim, lower: lo, upper: hi })
    }

    /// `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Result<Self> {
        Window::new(&vec![0.0; dim], &vec![1.0; dim])
    }

    /// `[0, side]^dim`.
    pub fn cube(dim: usize, side: f64) -> Result<Self> {
        Window::new(&vec![0.0; dim], &vec![side; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower[..self.dim]
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper[..self.dim]
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn sides(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.side(i)).collect()
    }

    pub fn min_side(&self) -> f64 {
        (0..self.dim).map(|i| self.side(i)).fold(f64::INFINITY, f64::min)
    }

    /// Lebesgue measure |W|.
    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|i| self.side(i)).product()
    }

    /// Closed-box membership; boundary points are inside.
    pub fn contains(&self, p: &Point) -> bool {
        (0..self.dim).all(|i| p[i] >= self.lower[i] && p[i] <= self.upper[i])
    }

    /// The box enlarged by `by` on every side.
    pub fn dilate(&self, by: f64) -> Window {
        let mut w = self.clone();
        for i in 0..self.dim {
            w.lower[i] -= by;
            w.upper[i] += by;
        }
        w
    }

    pub fn translate(&self, shift: &[f64]) -> Window {
        let mut w = self.clone();
        for i in 0..self.dim {
            w.lower[i] += shift[i];
            w.upper[i] += shift[i];
        }
        w
    }

    /// Distance from `p` to the window boundary (0 outside the window).
    pub fn boundary_distance(&self, p: &Point) -> f64 {
        (0..self.dim)
            .map(|i| (p[i] - self.lower[i]).min(self.upper[i] - p[i]))
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    /// |W ∩ (W + z)| for a displacement `z`, the translation edge-correction weight.
    pub fn translation_overlap(&self, a: &Point, b: &Point) -> f64 {
        (0..self.dim)
            .map(|i| (self.side(i) - (a[i] - b[i]).abs()).max(0.0))
            .product()
    }

    /// Uniform point inside the window.
    pub fn uniform_point<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let mut p = [0.0; 3];
        for i in 0..self.dim {
            p[i] = self.lower[i] + rng.random::<f64>() * self.side(i);
        }
        p
    }
}

/// Finite point set observed in a window.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    window: Window,
    points: Vec<Point>,
}

impl PointPattern {
    /// Validates containment and distinctness of the points.
    pub fn new(window: Window, points: Vec<Point>) -> Result<Self> {
        let dim = window.dim();
        for (i, p) in points.iter().enumerate() {
            if p.iter().any(|c| !c.is_finite()) {
                return invalid(format!("point {i} has a non-finite coordinate"));
            }
            if p[dim..].iter().any(|&c| c != 0.0) {
                return invalid(format!("point {i} has coordinates beyond dimension {dim}"));
            }
            if !window.contains(p) {
                return invalid(format!("point {i} = {:?} lies outside the window", &p[..dim]));
            }
        }
        let mut sorted: Vec<&Point> = points.iter().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return invalid("point pattern contains duplicate points");
        }
        Ok(PointPattern { window, points })
    }

    /// Build from d-dimensional coordinate rows.
    pub fn from_coords(window: Window, coords: &[Vec<f64>]) -> Result<Self> {
        let dim = window.dim();
        let mut pts = Vec::with_capacity(coords.len());
        for (i, c) in coords.iter().enumerate() {
            if c.len() != dim {
                return invalid(format!("row {i} has {} coordinates, expected {dim}", c.len()));
            }
            let mut p = [0.0; 3];
            p[..dim].copy_from_slice(c);
            pts.push(p);
        }
        PointPattern::new(window, pts)
    }

    /// Simulators generate points inside the window with probability one distinct.
    pub(crate) fn from_trusted(window: Window, points: Vec<Point>) -> Self {
        debug_assert!(points.iter().all(|p| window.contains(p)));
        PointPattern { window, points }
    }

    pub fn empty(window: Window) -> Self {
        PointPattern { window, points: Vec::new() }
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// n / |W|.
    pub fn intensity(&self) -> f64 {
        self.len() as f64 / self.window.volume()
    }

    /// Points inside `w`, carried over to the new window.
    pub fn restrict(&self, w: &Window) -> PointPattern {
        let pts = self.points.iter().copied().filter(|p| w.contains(p)).collect();
        PointPattern { window: w.clone(), points: pts }
    }

    /// Multiply every coordinate (and the window) by `factor`.
    pub fn scale(&self, factor: f64) -> Result<PointPattern> {
        if !(factor > 0.0) {
            return invalid("scale factor must be positive");
        }
        let lo: Vec<f64> = self.window.lower().iter().map(|v| v * factor).collect();
        let hi: Vec<f64> = self.window.upper().iter().map(|v| v * factor).collect();
        let w = Window::new(&lo, &hi)?;
        let pts = self
            .points
            .iter()
            .map(|p| [p[0] * factor, p[1] * factor, p[2] * factor])
            .collect();
        Ok(PointPattern { window: w, points: pts })
    }

    pub fn coords(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        self.points.iter().map(|p| p[..d].to_vec()).collect()
    }
}

/// Retained pattern x_W and deleted pattern x̄_W = y_W \ x_W in a common window.
#[derive(Debug, Clone)]
pub struct ThinnedPair {
    retained: PointPattern,
    deleted: PointPattern,
}

impl ThinnedPair {
    pub fn new(retained: PointPattern, deleted: PointPattern) -> Result<Self> {
        if retained.window() != deleted.window() {
            return invalid("retained and deleted patterns must share one window");
        }
        let mut all: Vec<&Point> = retained.points().iter().chain(deleted.points()).collect();
        all.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
        if all.windows(2).any(|w| w[0] == w[1]) {
            return invalid("retained and deleted patterns overlap");
        }
        Ok(ThinnedPair { retained, deleted })
    }

    pub(crate) fn from_trusted(retained: PointPattern, deleted: PointPattern) -> Self {
        ThinnedPair { retained, deleted }
    }

    pub fn retained(&self) -> &PointPattern {
        &self.retained
    }

    pub fn deleted(&self) -> &PointPattern {
        &self.deleted
    }

    pub fn window(&self) -> &Window {
        self.retained.window()
    }

    /// y_W = x_W ∪ x̄_W with retained points first.
    pub fn union(&self) -> PointPattern {
        let mut pts = self.retained.points().to_vec();
        pts.extend_from_slice(self.deleted.points());
        PointPattern::from_trusted(self.window().clone(), pts)
    }
}

/// ω_d, volume of the unit ball.
pub fn unit_ball_volume(dim: usize) -> Result<f64> {
    match dim {
        1 => Ok(2.0),
        2 => Ok(PI),
        3 => Ok(4.0 * PI / 3.0),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// Surface area of the unit sphere, d·ω_d.
pub fn unit_sphere_area(dim: usize) -> Result<f64> {
    Ok(dim as f64 * unit_ball_volume(dim)?)
}

/// k_d(r, D): volume of the intersection of two d-balls of radius `radius`
/// whose centres are `r` apart.
pub fn ball_overlap_volume(r: f64, radius: f64, dim: usize) -> Result<f64> {
    check_dim(dim)?;
    if !(r >= 0.0) || !(radius > 0.0) {
        return invalid(format!("ball overlap needs r >= 0 and D > 0, got r={r}, D={radius}"));
    }
    Ok(overlap_unchecked(r, radius, dim))
}

/// k_d without argument validation; `dim` must be 1, 2 or 3.
#[inline]
pub(crate) fn overlap_unchecked(r: f64, d_: f64, dim: usize) -> f64 {
    if r >= 2.0 * d_ {
        return 0.0;
    }
    match dim {
        1 => 2.0 * d_ - r,
        2 => {
            let x = (r / (2.0 * d_)).min(1.0);
            2.0 * d_ * d_ * x.acos() - 0.5 * r * (4.0 * d_ * d_ - r * r).max(0.0).sqrt()
        }
        _ => {
            let u = r / d_;
            4.0 * PI / 3.0 * d_ * d_ * d_ * (1.0 - 0.75 * u + u * u * u / 16.0)
        }
    }
}

/// Minimum Euclidean distance over unordered pairs.
pub fn min_pairwise_distance(p: &PointPattern) -> Result<f64> {
    if p.len() < 2 {
        return Err(Error::Degenerate(format!(
            "minimum pairwise distance needs at least 2 points, got {}",
            p.len()
        )));
    }
    // Grid search with cell side chosen so that the expected nearest pair
    // lies within a cell or its neighbours; fall back to widening the radius.
    let w = p.window();
    let mut radius = (w.volume() / p.len() as f64).powf(1.0 / w.dim() as f64);
    loop {
        let grid = NeighborGrid::new(w, p.points(), radius);
        let mut best = f64::INFINITY;
        grid.for_each_pair_within(p.points(), radius, |_, _, d2| {
            if d2 < best {
                best = d2;
            }
        });
        if best.is_finite() {
            return Ok(best.sqrt());
        }
        radius *= 2.0;
    }
}

/// Uniform cell grid over a window for fixed-radius neighbour queries.
pub struct NeighborGrid {
    dim: usize,
    origin: Point,
    cell: f64,
    counts: [usize; 3],
    /// Cell start offsets into `order` (length = number of cells + 1).
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl NeighborGrid {
    /// `cell` is the query radius the grid is tuned for; points may extend
    /// outside `w` (they are clamped into the boundary cells).
    pub fn new(w: &Window, points: &[Point], cell: f64) -> Self {
        let dim = w.dim();
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for i in 0..dim {
            lo[i] = w.lower()[i];
            hi[i] = w.upper()[i];
        }
        for p in points {
            for i in 0..dim {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        // Cap the number of cells to a few per point.
        let max_cells = (4 * points.len()).max(1) as f64;
        let extent: f64 = (0..dim).map(|i| (hi[i] - lo[i]).max(1e-300)).product();
        let min_cell = (extent / max_cells).powf(1.0 / dim as f64);
        let cell = cell.max(min_cell).max(1e-300);
        let mut counts = [1usize; 3];
        for i in 0..dim {
            counts[i] = (((hi[i] - lo[i]) / cell).floor() as usize + 1).max(1);
        }
        let ncell: usize = counts.iter().product();
        let mut grid = NeighborGrid {
            dim,
            origin: lo,
            cell,
            counts,
            starts: vec![0; ncell + 1],
            order: vec![0; points.len()],
        };
        let ids: Vec<usize> = points.iter().map(|p| grid.cell_index(p)).collect();
        for &c in &ids {
            grid.starts[c + 1] += 1;
        }
        for c in 0..ncell {
            grid.starts[c + 1] += grid.starts[c];
        }
        let mut fill = grid.starts.clone();
        for (i, &c) in ids.iter().enumerate() {
            grid.order[fill[c]] = i;
            fill[c] += 1;
        }
        grid
    }

    fn coords_of(&self, p: &Point) -> [usize; 3] {
        let mut c = [0usize; 3];
        for i in 0..self.dim {
            let v = ((p[i] - self.origin[i]) / self.cell).floor();
            c[i] = (v.max(0.0) as usize).min(self.counts[i] - 1);
        }
        c
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        (c[2] * self.counts[1] + c[1]) * self.counts[0] + c[0]
    }

    fn cell_index(&self, p: &Point) -> usize {
        self.flat(self.coords_of(p))
    }

    /// Calls `f(j, d²)` for every indexed point j with ‖q − x_j‖ ≤ radius.
    pub fn for_each_near(&self, points: &[Point], q: &Point, radius: f64, mut f: impl FnMut(usize, f64)) {
        let reach = (radius / self.cell).ceil() as isize;
        let c = self.coords_of(q);
        let r2 = radius * radius;
        let range = |axis: usize| -> (usize, usize) {
            if axis >= self.dim {
                return (0, 0);
            }
            let lo = (c[axis] as isize - reach).max(0) as usize;
            let hi = ((c[axis] as isize + reach) as usize).min(self.counts[axis] - 1);
            (lo, hi)
        };
        let (x0, x1) = range(0);
        let (y0, y1) = range(1);
        let (z0, z1) = range(2);
        for cz in z0..=z1 {
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    let k = self.flat([cx, cy, cz]);
                    for &j in &self.order[self.starts[k]..self.starts[k + 1]] {
                        let d2 = dist2(q, &points[j]);
                        if d2 <= r2 {
                            f(j, d2);
                        }
                    }
                }
            }
        }
    }

    /// Calls `f(i, j, d²)` once for every unordered pair i < j within `radius`.
    pub fn for_each_pair_within(&self, points: &[Point], radius: f64, mut f: impl FnMut(usize, usize, f64)) {
        for (i, p) in points.iter().enumerate() {
            self.for_each_near(points, p, radius, |j, d2| {
                if j > i {
                    f(i, j, d2);
                }
            });
        }
    }
}

/// All unordered pairs (i, j, distance) closer than `radius`.
pub fn close_pairs(w: &Window, points: &[Point], radius: f64) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    if points.len() < 2 {
        return out;
    }
    let grid = NeighborGrid::new(w, points, radius);
    grid.for_each_pair_within(points, radius, |i, j, d2| out.push((i, j, d2.sqrt())));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn hit_or_miss(r: f64, d_: f64, dim: usize, n: usize, seed: u64) -> (f64, f64) {
        // Sample the bounding box of the first ball; count points in both balls.
        let mut rng = rng_from_seed(seed);
        let c2 = [r, 0.0, 0.0];
        let mut hits = 0usize;
        for _ in 0..n {
            let mut p = [0.0; 3];
            for v in p.iter_mut().take(dim) {
                *v = (2.0 * rng.random::<f64>() - 1.0) * d_;
            }
            if dist2(&p, &[0.0; 3]) <= d_ * d_ && dist2(&p, &c2) <= d_ * d_ {
                hits += 1;
            }
        }
        let boxv = (2.0 * d_).powi(dim as i32);
        let f = hits as f64 / n as f64;
        (f * boxv, (f * (1.0 - f) / n as f64).sqrt() * boxv)
    }

    #[test]
    fn volume_examples() {
        assert_eq!(Window::unit(2).unwrap().volume(), 1.0);
        let w = Window::cube(2, 120.0).unwrap();
        assert_eq!(w.volume(), 14400.0);
        assert!((108.0 / w.volume() - 0.0075).abs() < 1e-12);
        let w3 = Window::new(&[0.0, 0.0, 0.0], &[2.0, 3.0, 4.0]).unwrap();
        assert_eq!(w3.volume(), 24.0);
    }

    #[test]
    fn window_rejects_bad_bounds() {
        assert!(Window::new(&[0.0], &[0.0]).is_err());
        assert!(Window::new(&[0.0, 1.0], &[1.0, 0.5]).is_err());
        assert!(matches!(Window::new(&[0.0; 4], &[1.0; 4]), Err(Error::UnsupportedDimension(4))));
    }

    #[test]
    fn unit_ball_volumes() {
        assert_eq!(unit_ball_volume(1).unwrap(), 2.0);
        assert_eq!(unit_ball_volume(2).unwrap(), PI);
        assert!((unit_ball_volume(3).unwrap() - 4.0 * PI / 3.0).abs() < 1e-15);
        assert!(unit_ball_volume(4).is_err());
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(ball_overlap_volume(0.5, 1.0, 1).unwrap(), 1.5);
        for dim in 1..=3 {
            let full = unit_ball_volume(dim).unwrap() * 0.7f64.powi(dim as i32);
            assert!((ball_overlap_volume(0.0, 0.7, dim).unwrap() - full).abs() < 1e-14);
            assert_eq!(ball_overlap_volume(1.4, 0.7, dim).unwrap(), 0.0);
            assert_eq!(ball_overlap_volume(3.0, 0.7, dim).unwrap(), 0.0);
        }
        let v = ball_overlap_volume(1.0, 1.0, 2).unwrap();
        assert!((v - (2.0 * PI / 3.0 - 3f64.sqrt() / 2.0)).abs() < 1e-12);
        assert!(ball_overlap_volume(-0.1, 1.0, 2).is_err());
        assert!(ball_overlap_volume(0.1, 0.0, 2).is_err());
    }

    #[test]
    fn overlap_matches_hit_or_miss_at_r_equal_d() {
        // Oracle: 10^7 hit-or-miss samples, relative tolerance 1e-3.
        let (mc, _) = hit_or_miss(1.0, 1.0, 2, 10_000_000, 11);
        let exact = 2.0 * PI / 3.0 - 3f64.sqrt() / 2.0;
        assert!((mc - exact).abs() / exact < 1e-3, "mc {mc} exact {exact}");
    }

    #[test]
    fn min_distance_examples() {
        let w = Window::cube(2, 4.0).unwrap();
        let p = PointPattern::from_coords(w, &[vec![0.0, 0.0], vec![0.0, 1.0], vec![3.0, 0.0]]).unwrap();
        assert!((min_pairwise_distance(&p).unwrap() - 1.0).abs() < 1e-15);
        let w1 = Window::unit(1).unwrap();
        let p1 = PointPattern::from_coords(w1.clone(), &[vec![0.0], vec![0.2], vec![0.5]]).unwrap();
        assert!((min_pairwise_distance(&p1).unwrap() - 0.2).abs() < 1e-15);
        let single = PointPattern::from_coords(w1, &[vec![0.3]]).unwrap();
        assert!(min_pairwise_distance(&single).is_err());
    }

    #[test]
    fn pattern_validation() {
        let w = Window::unit(2).unwrap();
        assert!(PointPattern::from_coords(w.clone(), &[vec![1.0, 1.0]]).is_ok());
        assert!(PointPattern::from_coords(w.clone(), &[vec![1.1, 0.5]]).is_err());
        assert!(PointPattern::from_coords(w.clone(), &[vec![0.5, 0.5], vec![0.5, 0.5]]).is_err());
        assert!(PointPattern::from_coords(w, &[vec![0.5]]).is_err());
    }

    #[test]
    fn close_pairs_matches_brute_force() {
        let w = Window::unit(2).unwrap();
        let mut rng = rng_from_seed(3);
        let pts: Vec<Point> = (0..400).map(|_| w.uniform_point(&mut rng)).collect();
        let mut fast: Vec<(usize, usize)> = close_pairs(&w, &pts, 0.07).into_iter().map(|(i, j, _)| (i, j)).collect();
        fast.sort();
        let mut brute = Vec::new();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if dist(&pts[i], &pts[j]) <= 0.07 {
                    brute.push((i, j));
                }
            }
        }
        assert_eq!(fast, brute);
    }

    proptest! {
        #[test]
        fn overlap_non_increasing(d_ in 0.01f64..5.0, a in 0.0f64..1.0, b in 0.0f64..1.0, dim in 1usize..=3) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let k_lo = ball_overlap_volume(lo * 2.0 * d_, d_, dim).unwrap();
            let k_hi = ball_overlap_volume(hi * 2.0 * d_, d_, dim).unwrap();
            prop_assert!(k_hi <= k_lo + 1e-12 * k_lo.max(1.0));
        }

        #[test]
        fn volume_translation_invariant(x in -100.0f64..100.0, y in -100.0f64..100.0, a in 0.1f64..10.0, b in 0.1f64..10.0) {
            let w = Window::new(&[0.0, 0.0], &[a, b]).unwrap();
            let t = w.translate(&[x, y]);
            prop_assert!(t.volume() > 0.0);
            prop_assert!((t.volume() - w.volume()).abs() <= 1e-9 * w.volume());
        }
    }
}
