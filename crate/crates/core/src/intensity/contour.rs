//! Zero-level contours of a sampled field by marching squares.

use crate::scalar::Real;
use ndarray::Array2;
use std::collections::HashMap;

/// A grid edge: `(0, i, j)` joins `(i, j)`–`(i+1, j)`, `(1, i, j)` joins `(i, j)`–`(i, j+1)`.
type EdgeId = (u8, usize, usize);

fn crossing<T: Real>(v: &Array2<T>, xs: &[T], ys: &[T], e: EdgeId) -> (T, T) {
    let (kind, i, j) = e;
    let (i2, j2) = if kind == 0 { (i + 1, j) } else { (i, j + 1) };
    let (a, b) = (v[[i, j]], v[[i2, j2]]);
    let t = a / (a - b);
    let x = xs[i] + t * (xs[i2] - xs[i]);
    let y = ys[j] + t * (ys[j2] - ys[j]);
    (x, y)
}

/// Polylines separating negative samples from nonnegative ones.
///
/// Closed loops repeat their first point at the end.
pub fn zero_contours<T: Real>(v: &Array2<T>, xs: &[T], ys: &[T]) -> Vec<Vec<(T, T)>> {
    let (nx, ny) = v.dim();
    if nx < 2 || ny < 2 {
        return Vec::new();
    }
    let neg = |i: usize, j: usize| v[[i, j]] < T::zero();
    let mut segments: Vec<(EdgeId, EdgeId)> = Vec::new();
    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            let c = [neg(i, j), neg(i + 1, j), neg(i + 1, j + 1), neg(i, j + 1)];
            let edges: [EdgeId; 4] = [(0, i, j), (1, i + 1, j), (0, i, j + 1), (1, i, j)];
            let cut = [c[0] != c[1], c[1] != c[2], c[3] != c[2], c[0] != c[3]];
            let crossed: Vec<usize> = (0..4).filter(|&k| cut[k]).collect();
            match crossed.len() {
                2 => segments.push((edges[crossed[0]], edges[crossed[1]])),
                4 => {
                    let four = T::lit(4.0);
                    let centre = (v[[i, j]] + v[[i + 1, j]] + v[[i + 1, j + 1]] + v[[i, j + 1]]) / four;
                    if (centre < T::zero()) == c[0] {
                        segments.push((edges[0], edges[1]));
                        segments.push((edges[2], edges[3]));
                    } else {
                        segments.push((edges[0], edges[3]));
                        segments.push((edges[1], edges[2]));
                    }
                }
                _ => {}
            }
        }
    }

    let mut at: HashMap<EdgeId, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        at.entry(a).or_default().push(s);
        at.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();

    let walk = |start_seg: usize, start_edge: EdgeId, used: &mut Vec<bool>| -> Vec<EdgeId> {
        let mut chain = vec![start_edge];
        let mut seg = start_seg;
        let mut edge = start_edge;
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            let next = if a == edge { b } else { a };
            chain.push(next);
            edge = next;
            match at[&edge].iter().copied().find(|&s| !used[s]) {
                Some(s) => seg = s,
                None => break,
            }
        }
        chain
    };

    // open chains start at edges touched by a single segment, in a fixed order
    let mut ends: Vec<EdgeId> = at.iter().filter(|(_, s)| s.len() == 1).map(|(&e, _)| e).collect();
    ends.sort_unstable();
    for e in ends {
        let s = at[&e][0];
        if !used[s] {
            lines.push(walk(s, e, &mut used));
        }
    }
    for s in 0..segments.len() {
        if !used[s] {
            let start = segments[s].0;
            lines.push(walk(s, start, &mut used));
        }
    }
    lines
        .into_iter()
        .map(|chain| chain.into_iter().map(|e| crossing(v, xs, ys, e)).collect())
        .collect()
}
