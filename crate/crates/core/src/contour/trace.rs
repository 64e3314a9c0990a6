//! Suzuki–Abe border following (8-connected foreground, 4-connected background).

use crate::raster::BinaryImage;

/// A closed border as pixel coordinates `(x, y)`; the first point implicitly
/// follows the last. Hole borders run along the ink pixels around the hole.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    pub points: Vec<(i64, i64)>,
    pub is_outer: bool,
}

/// Neighbor offsets `(drow, dcol)` in clockwise order on screen, starting east.
const DIRS: [(i64, i64); 8] = [
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
];

fn dir_index(from: (i64, i64), to: (i64, i64)) -> usize {
    let d = (to.0 - from.0, to.1 - from.1);
    DIRS.iter().position(|&o| o == d).expect("pixels are 8-adjacent")
}

struct Grid {
    cols: i64,
    cells: Vec<i32>,
}

impl Grid {
    fn at(&self, p: (i64, i64)) -> i32 {
        self.cells[(p.0 * self.cols + p.1) as usize]
    }

    fn set(&mut self, p: (i64, i64), v: i32) {
        self.cells[(p.0 * self.cols + p.1) as usize] = v;
    }
}

/// Traces every outer border and hole border, in raster-scan order of their
/// starting pixels. An empty image yields no contours.
pub fn trace_contours(img: &BinaryImage) -> Vec<Contour> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    // One pixel of background padding so the frame never needs bounds checks.
    let mut grid = Grid {
        cols: w + 2,
        cells: vec![0; ((w + 2) * (h + 2)) as usize],
    };
    for y in 0..h {
        for x in 0..w {
            if img.get(x as usize, y as usize) {
                grid.set((y + 1, x + 1), 1);
            }
        }
    }

    let mut contours = Vec::new();
    let mut nbd: i32 = 1;
    for i in 1..=h {
        for j in 1..=w {
            let v = grid.at((i, j));
            if v == 0 {
                continue;
            }
            let (outer, from) = if v == 1 && grid.at((i, j - 1)) == 0 {
                (true, (i, j - 1))
            } else if v >= 1 && grid.at((i, j + 1)) == 0 {
                (false, (i, j + 1))
            } else {
                continue;
            };
            nbd += 1;
            let points = follow(&mut grid, (i, j), from, nbd);
            contours.push(Contour {
                points: points.into_iter().map(|(r, c)| (c - 1, r - 1)).collect(),
                is_outer: outer,
            });
        }
    }
    contours
}

fn follow(grid: &mut Grid, start: (i64, i64), from: (i64, i64), nbd: i32) -> Vec<(i64, i64)> {
    // Clockwise search around the start pixel, beginning at `from`.
    let d0 = dir_index(start, from);
    let first = (0..8)
        .map(|k| (d0 + k) % 8)
        .map(|d| (start.0 + DIRS[d].0, start.1 + DIRS[d].1))
        .find(|&p| grid.at(p) != 0);
    let Some(first) = first else {
        grid.set(start, -nbd);
        return vec![start];
    };

    let mut points = vec![start];
    let mut prev = first;
    let mut cur = start;
    loop {
        // Counter-clockwise search around `cur`, starting just after `prev`.
        let dp = dir_index(cur, prev);
        let mut east_zero_examined = false;
        let mut next = cur;
        for k in 1..=8 {
            let d = (dp + 8 - k) % 8;
            let p = (cur.0 + DIRS[d].0, cur.1 + DIRS[d].1);
            if grid.at(p) != 0 {
                next = p;
                break;
            }
            if d == 0 {
                east_zero_examined = true;
            }
        }
        if east_zero_examined {
            grid.set(cur, -nbd);
        } else if grid.at(cur) == 1 {
            grid.set(cur, nbd);
        }
        if next == start && cur == first {
            break;
        }
        points.push(next);
        prev = cur;
        cur = next;
    }
    points
}
