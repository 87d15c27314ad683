/// A set of frame indices stored as sorted, disjoint, inclusive 1-based ranges.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct FrameSet {
    ranges: Vec<(u32, u32)>,
}

impl FrameSet {
    pub fn empty() -> Self {
        FrameSet::default()
    }

    /// Frames `start..=end`; empty when `start > end`.
    pub fn range(start: u32, end: u32) -> Self {
        if start > end {
            return FrameSet::empty();
        }
        FrameSet {
            ranges: vec![(start, end)],
        }
    }

    /// Every frame of a video with `n_frames` frames.
    pub fn all(n_frames: u32) -> Self {
        FrameSet::range(1, n_frames)
    }

    /// Builds a set from arbitrary inclusive ranges, merging overlaps and adjacency.
    pub fn from_ranges(ranges: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut v: Vec<(u32, u32)> = ranges.into_iter().filter(|(s, e)| s <= e).collect();
        v.sort_unstable();
        let mut merged: Vec<(u32, u32)> = Vec::with_capacity(v.len());
        for (s, e) in v {
            match merged.last_mut() {
                Some(last) if s <= last.1.saturating_add(1) => last.1 = last.1.max(e),
                _ => merged.push((s, e)),
            }
        }
        FrameSet { ranges: merged }
    }

    /// Frames of `[1, n_frames]` not in `self`.
    pub fn complement(&self, n_frames: u32) -> Self {
        let mut out = Vec::new();
        let mut next = 1u32;
        for &(s, e) in &self.ranges {
            if s > n_frames {
                break;
            }
            if s > next {
                out.push((next, s - 1));
            }
            next = next.max(e.saturating_add(1));
        }
        if next <= n_frames {
            out.push((next, n_frames));
        }
        FrameSet { ranges: out }
    }

    pub fn ranges(&self) -> &[(u32, u32)] {
        &self.ranges
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn len(&self) -> usize {
        self.ranges.iter().map(|&(s, e)| (e - s + 1) as usize).sum()
    }

    pub fn contains(&self, frame: u32) -> bool {
        let idx = self.ranges.partition_point(|&(_, e)| e < frame);
        self.ranges.get(idx).is_some_and(|&(s, _)| s <= frame)
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.ranges.iter().flat_map(|&(s, e)| s..=e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_of_middle_range() {
        let s = FrameSet::range(5, 10);
        assert_eq!(s.complement(20).ranges(), &[(1, 4), (11, 20)]);
        assert!(FrameSet::all(20).complement(20).is_empty());
        assert_eq!(FrameSet::empty().complement(3), FrameSet::all(3));
    }

    #[test]
    fn from_ranges_merges_adjacent() {
        let s = FrameSet::from_ranges([(11, 20), (1, 10), (30, 31), (31, 35)]);
        assert_eq!(s.ranges(), &[(1, 20), (30, 35)]);
        assert_eq!(s.len(), 26);
        assert!(s.contains(20) && !s.contains(21) && s.contains(35));
    }
}
