//! Connected-component labelling on voxel grids.

use std::collections::VecDeque;

use crate::volume::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    /// Face neighbours.
    Six,
    /// Face, edge and corner neighbours.
    TwentySix,
}

impl Connectivity {
    pub fn offsets(self) -> Vec<[i64; 3]> {
        let mut out = Vec::new();
        for dz in -1..=1i64 {
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    let manhattan = dx.abs() + dy.abs() + dz.abs();
                    let keep = match self {
                        Connectivity::Six => manhattan == 1,
                        Connectivity::TwentySix => manhattan > 0,
                    };
                    if keep {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

/// Components of voxels satisfying `member`, where two neighbouring members
/// join only if `same(a, b)` holds. Each component lists its voxel indices in
/// ascending order; components are ordered by their smallest index.
pub fn label(
    grid: &Grid,
    connectivity: Connectivity,
    member: impl Fn(usize) -> bool,
    same: impl Fn(usize, usize) -> bool,
) -> Vec<Vec<usize>> {
    let offsets = connectivity.offsets();
    let mut seen = vec![false; grid.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..grid.len() {
        if seen[start] || !member(start) {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(i) = queue.pop_front() {
            comp.push(i);
            let c = grid.coords(i);
            for &o in &offsets {
                if let Some(j) = grid.offset(c, o) {
                    if !seen[j] && member(j) && same(i, j) {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Breadth-first growth from `seeds` through 6-connected voxels accepted by `accept`.
/// Seeds are always included.
pub fn grow(grid: &Grid, seeds: &[usize], accept: impl Fn(usize) -> bool) -> Vec<bool> {
    let offsets = Connectivity::Six.offsets();
    let mut inside = vec![false; grid.len()];
    let mut queue = VecDeque::new();
    for &s in seeds {
        if !inside[s] {
            inside[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(i) = queue.pop_front() {
        let c = grid.coords(i);
        for &o in &offsets {
            if let Some(j) = grid.offset(c, o) {
                if !inside[j] && accept(j) {
                    inside[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    inside
}
