use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::MERGE_TOL;

/// z-score parameters of one feature; `scale > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub scale: f64,
}

impl Standardization {
    pub const IDENTITY: Standardization = Standardization { mean: 0.0, scale: 1.0 };

    pub fn to_original(&self, z: f64) -> f64 {
        self.mean + self.scale * z
    }
}

/// Half-open interval `[lower, upper)`; `None` bounds are infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Interval {
    pub const ALL: Interval = Interval { lower: None, upper: None };

    pub fn contains(&self, x: f64) -> bool {
        self.lower.map_or(true, |l| x >= l) && self.upper.map_or(true, |u| x < u)
    }

    /// Clamps infinite or out-of-range endpoints to physiological bounds for
    /// clinical display.
    pub fn clamped(&self, lo: f64, hi: f64) -> Interval {
        Interval {
            lower: Some(self.lower.map_or(lo, |l| l.clamp(lo, hi))),
            upper: Some(self.upper.map_or(hi, |u| u.clamp(lo, hi))),
        }
    }

    /// Plain-ASCII rendering (`-inf`/`inf`), used in CSV output.
    pub fn to_ascii(&self) -> String {
        let lo = self.lower.map_or_else(|| "(-inf".into(), |l| alloc::format!("[{}", fmt_bound(l)));
        let hi = self.upper.map_or_else(|| String::from("inf)"), |u| alloc::format!("{})", fmt_bound(u)));
        alloc::format!("{lo}, {hi}")
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.lower {
            None => write!(f, "(−∞, ")?,
            Some(l) => write!(f, "[{}, ", fmt_bound(l))?,
        }
        match self.upper {
            None => write!(f, "∞)"),
            Some(u) => write!(f, "{})", fmt_bound(u)),
        }
    }
}

/// Two decimals for values of magnitude ≥ 1, three significant digits
/// below that; trailing zeros trimmed.
pub fn fmt_bound(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let mag = libm::floor(libm::log10(libm::fabs(x))) as i32;
    let decimals = if mag >= 0 { 2 } else { (2 - mag) as usize };
    let mut s = alloc::format!("{x:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// Intervals of one feature in ascending order, plus the mapping from each
/// center (encoding slot) to its interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinIntervals {
    pub intervals: Vec<Interval>,
    pub slot_interval: Vec<usize>,
    /// Representative slot of each interval (first slot of a merged group).
    pub interval_slot: Vec<usize>,
    /// Some centers were closer than the merge tolerance.
    pub merged: bool,
}

impl BinIntervals {
    /// Slot whose interval contains `x` (original units).
    pub fn slot_of(&self, x: f64) -> usize {
        let mut i = 0;
        while i + 1 < self.intervals.len() && self.intervals[i + 1].lower.map_or(false, |l| x >= l) {
            i += 1;
        }
        self.interval_slot[i]
    }

    pub fn interval_of_slot(&self, slot: usize) -> Interval {
        self.intervals[self.slot_interval[slot]]
    }
}

/// Midpoint-bounded intervals of the sorted centers, mapped back to original
/// units. Centers within [`MERGE_TOL`] of each other share one interval.
pub fn intervals_from_centers(centers: &[f64], st: Standardization) -> BinIntervals {
    let mut order: Vec<usize> = (0..centers.len()).collect();
    order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]));

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &s in &order {
        match groups.last_mut() {
            Some(g) if centers[s] - centers[*g.last().expect("non-empty group")] < MERGE_TOL => g.push(s),
            _ => groups.push(alloc::vec![s]),
        }
    }

    let mut intervals = Vec::with_capacity(groups.len());
    let mut slot_interval = alloc::vec![0; centers.len()];
    let mut interval_slot = Vec::with_capacity(groups.len());
    for (gi, g) in groups.iter().enumerate() {
        let lower = (gi > 0).then(|| {
            let prev = *groups[gi - 1].last().expect("non-empty group");
            st.to_original(0.5 * (centers[prev] + centers[g[0]]))
        });
        let upper = (gi + 1 < groups.len()).then(|| {
            let last = *g.last().expect("non-empty group");
            st.to_original(0.5 * (centers[last] + centers[groups[gi + 1][0]]))
        });
        intervals.push(Interval { lower, upper });
        interval_slot.push(g[0]);
        for &s in g {
            slot_interval[s] = gi;
        }
    }
    BinIntervals { merged: groups.len() < centers.len(), intervals, slot_interval, interval_slot }
}
