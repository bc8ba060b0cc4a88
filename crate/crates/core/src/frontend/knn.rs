//! Exact k-nearest-pixel queries over a boolean mask, by expanding square rings.

/// A read-only view of which pixels carry data.
pub(crate) struct MaskIndex<'a> {
    width: usize,
    height: usize,
    mask: &'a [bool],
}

impl<'a> MaskIndex<'a> {
    pub fn new(width: usize, height: usize, mask: &'a [bool]) -> Self {
        debug_assert_eq!(mask.len(), width * height);
        Self {
            width,
            height,
            mask,
        }
    }

    /// The `k` marked pixels closest to `(u, v)` as `(squared distance, index)`,
    /// ordered by distance then index. Returns fewer than `k` only when the mask
    /// has fewer marked pixels.
    pub fn nearest(&self, u: usize, v: usize, k: usize, out: &mut Vec<(i64, usize)>) {
        out.clear();
        if k == 0 {
            return;
        }
        let (u, v) = (u as i64, v as i64);
        let (w, h) = (self.width as i64, self.height as i64);
        let max_r = (w - 1 - u).max(u).max(h - 1 - v).max(v);
        let visit = |x: i64, y: i64, out: &mut Vec<(i64, usize)>| {
            if x < 0 || y < 0 || x >= w || y >= h {
                return;
            }
            let idx = (y * w + x) as usize;
            if self.mask[idx] {
                let (dx, dy) = (x - u, y - v);
                out.push((dx * dx + dy * dy, idx));
            }
        };
        for r in 0..=max_r {
            if r == 0 {
                visit(u, v, out);
            } else {
                for x in (u - r)..=(u + r) {
                    visit(x, v - r, out);
                    visit(x, v + r, out);
                }
                for y in (v - r + 1)..=(v + r - 1) {
                    visit(u - r, y, out);
                    visit(u + r, y, out);
                }
            }
            // Everything within Euclidean distance r has been seen once ring r is done.
            let settled = out.iter().filter(|(d2, _)| *d2 <= r * r).count();
            if settled >= k {
                break;
            }
        }
        out.sort_unstable();
        out.truncate(k);
    }
}
