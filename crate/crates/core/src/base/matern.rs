use rand::Rng as _;

use super::poisson_count;
use crate::error::{invalid, Result};
use crate::geometry::{NeighborGrid, Point, PointPattern, Window};
use crate::rng::rng_from_seed;

/// Matérn I and II patterns thinned from one parent process and one set of
/// birth marks, so `type_i ⊆ type_ii`.
#[derive(Debug, Clone)]
pub struct MaternPair {
    pub type_i: PointPattern,
    pub type_ii: PointPattern,
}

/// Parent Poisson(ρ_Φ) on W ⊕ D with uniform birth marks. Type I keeps
/// points with no other parent within D; type II keeps points with no
/// older parent (smaller mark, ties broken by index) within D. Both are
/// clipped to W.
pub fn simulate_matern_coupled(parent_intensity: f64, hardcore: f64, w: &Window, seed: u64) -> Result<MaternPair> {
    if !(parent_intensity > 0.0 && hardcore > 0.0) {
        return invalid("Matérn parameters must be positive");
    }
    let mut rng = rng_from_seed(seed);
    let big = w.dilate(hardcore);
    let n = poisson_count(parent_intensity * big.volume(), &mut rng)?;
    let mut parents: Vec<Point> = Vec::with_capacity(n);
    let mut marks = Vec::with_capacity(n);
    for _ in 0..n {
        parents.push(big.uniform_point(&mut rng));
        marks.push(rng.random::<f64>());
    }
    let grid = NeighborGrid::new(&big, &parents, hardcore);
    let mut keep_i = Vec::new();
    let mut keep_ii = Vec::new();
    for (i, p) in parents.iter().enumerate() {
        if !w.contains(p) {
            continue;
        }
        let mut lonely = true;
        let mut eldest = true;
        grid.for_each_near(&parents, p, hardcore, |j, _| {
            if j != i {
                lonely = false;
                if marks[j] < marks[i] || (marks[j] == marks[i] && j < i) {
                    eldest = false;
                }
            }
        });
        if lonely {
            keep_i.push(*p);
        }
        if eldest {
            keep_ii.push(*p);
        }
    }
    Ok(MaternPair {
        type_i: PointPattern::from_trusted(w.clone(), keep_i),
        type_ii: PointPattern::from_trusted(w.clone(), keep_ii),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupled_inclusion() {
        let w = Window::unit(2).unwrap();
        for seed in 0..5 {
            let pair = simulate_matern_coupled(1736.0, 0.015, &w, seed).unwrap();
            assert!(pair.type_i.len() <= pair.type_ii.len());
            for p in pair.type_i.points() {
                assert!(pair.type_ii.points().contains(p));
            }
        }
    }

    #[test]
    fn no_edge_bias() {
        // Intensity within D of the border matches the interior.
        let w = Window::unit(2).unwrap();
        let d = 0.05;
        let (mut edge, mut inner) = (0usize, 0usize);
        for seed in 0..60 {
            let y = simulate_matern_coupled(300.0, d, &w, seed).unwrap().type_ii;
            for p in y.points() {
                if w.boundary_distance(p) < 0.1 {
                    edge += 1;
                } else {
                    inner += 1;
                }
            }
        }
        let edge_area = 1.0 - 0.8 * 0.8;
        let ratio = (edge as f64 / edge_area) / (inner as f64 / 0.64);
        assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
    }
}
