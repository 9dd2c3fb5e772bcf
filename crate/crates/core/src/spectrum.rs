//! Per-link slot occupancy, slot arithmetic and first-fit search.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::num::{to_count, Scalar};
use crate::topology::Path;
use crate::traffic::Request;
use crate::{ConnId, Ghz, LinkId, Seconds};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("slot width {slot_width} GHz exceeds link bandwidth {bandwidth} GHz")]
    ZeroSlots { bandwidth: f64, slot_width: f64 },
    #[error("invalid spectrum parameter: {0}")]
    InvalidParam(String),
    #[error("grids along the path disagree: {0}")]
    GridMismatch(String),
    #[error("slot range {start}..{end} exceeds {total} slots")]
    OutOfRange { start: usize, end: usize, total: usize },
    #[error("link {link} slot {slot} already owned by connection {owner}")]
    OccupancyConflict { link: LinkId, slot: usize, owner: ConnId },
    #[error("link {link} slot {slot}: expected owner {expected:?}, found {found:?}")]
    OwnershipMismatch { link: LinkId, slot: usize, expected: Option<ConnId>, found: Option<ConnId> },
    #[error("link {link} slot {slot}: occupancy bit disagrees with owner map")]
    BitmapOwnerDisagree { link: LinkId, slot: usize },
    #[error("connection {conn}: {msg}")]
    BrokenConnection { conn: ConnId, msg: String },
}

/// Number of slots of width `slot_width` that fit in `bandwidth`
/// (the floor of their ratio). The remainder is unusable.
pub fn slot_count<T: Scalar>(bandwidth_ghz: T, slot_width_ghz: T) -> Result<usize, SpectrumError> {
    if !(bandwidth_ghz > T::zero() && slot_width_ghz > T::zero()) || !bandwidth_ghz.is_finite() {
        return Err(SpectrumError::InvalidParam(format!(
            "bandwidth {bandwidth_ghz} and slot width {slot_width_ghz} must be positive"
        )));
    }
    match to_count((bandwidth_ghz / slot_width_ghz).floor()) {
        Some(n) if n >= 1 => Ok(n),
        _ => Err(SpectrumError::ZeroSlots {
            bandwidth: bandwidth_ghz.to_f64().unwrap_or(f64::NAN),
            slot_width: slot_width_ghz.to_f64().unwrap_or(f64::NAN),
        }),
    }
}

/// Slots one connection occupies: data slots followed by guard slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SlotDemand {
    pub data_slots: usize,
    pub guard_slots: usize,
}

impl SlotDemand {
    pub fn total(&self) -> usize {
        self.data_slots + self.guard_slots
    }
}

/// `ceil(b_req / W)` data slots plus `ceil(guard / W)` guard slots.
pub fn slots_required<T: Scalar>(b_req_gbps: T, slot_width_ghz: T, guard_ghz: T) -> Result<SlotDemand, SpectrumError> {
    if !(b_req_gbps > T::zero() && slot_width_ghz > T::zero() && guard_ghz >= T::zero()) {
        return Err(SpectrumError::InvalidParam(format!(
            "demand {b_req_gbps} Gbps, slot width {slot_width_ghz} GHz, guard {guard_ghz} GHz"
        )));
    }
    let ceil = |v: T| to_count((v / slot_width_ghz).ceil());
    match (ceil(b_req_gbps), ceil(guard_ghz)) {
        (Some(data_slots), Some(guard_slots)) => Ok(SlotDemand { data_slots: data_slots.max(1), guard_slots }),
        _ => Err(SpectrumError::InvalidParam(format!("slot count overflow for {b_req_gbps} Gbps"))),
    }
}

/// Fixed-length bitmask. Bits at or beyond `len` are always clear.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SlotMask {
    words: Vec<u64>,
    len: usize,
}

impl SlotMask {
    pub fn zeros(len: usize) -> Self {
        SlotMask { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn ones(len: usize) -> Self {
        let mut m = SlotMask { words: vec![!0; len.div_ceil(64)], len };
        m.trim();
        m
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut m = SlotMask::zeros(len);
        for i in indices {
            m.set(i, true);
        }
        m
    }

    fn trim(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit {i} out of range for mask of {}", self.len);
        let bit = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= bit;
        } else {
            self.words[i / 64] &= !bit;
        }
    }

    pub fn set_range(&mut self, start: usize, end: usize, value: bool) {
        for i in start..end {
            self.set(i, value);
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(|&i| self.get(i))
    }

    /// Bitwise complement within `len`.
    pub fn complement(&self) -> SlotMask {
        let mut m = SlotMask { words: self.words.iter().map(|w| !w).collect(), len: self.len };
        m.trim();
        m
    }

    /// In-place intersection with the complement of `other`.
    pub fn and_not_assign(&mut self, other: &SlotMask) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    /// First set bit at index `>= from`.
    pub fn next_one(&self, from: usize) -> Option<usize> {
        if from >= self.len {
            return None;
        }
        let mut wi = from / 64;
        let mut word = self.words[wi] & (!0u64 << (from % 64));
        loop {
            if word != 0 {
                return Some(wi * 64 + word.trailing_zeros() as usize);
            }
            wi += 1;
            if wi >= self.words.len() {
                return None;
            }
            word = self.words[wi];
        }
    }

    /// First clear bit at index `>= from`, or `len` when there is none.
    pub fn next_zero(&self, from: usize) -> usize {
        if from >= self.len {
            return self.len;
        }
        let mut wi = from / 64;
        let mut word = !self.words[wi] & (!0u64 << (from % 64));
        loop {
            if word != 0 {
                return (wi * 64 + word.trailing_zeros() as usize).min(self.len);
            }
            wi += 1;
            if wi >= self.words.len() {
                return self.len;
            }
            word = !self.words[wi];
        }
    }

    /// One character per bit: `set` for ones, `clear` for zeros.
    pub fn raster(&self, set: char, clear: char) -> String {
        (0..self.len).map(|i| if self.get(i) { set } else { clear }).collect()
    }
}

/// Lowest `s` such that bits `s..s + need` are all set in `free`.
pub fn first_fit(free: &SlotMask, need: usize) -> Option<usize> {
    if need == 0 {
        return Some(0);
    }
    let mut pos = 0;
    loop {
        let start = free.next_one(pos)?;
        let end = free.next_zero(start);
        if end - start >= need {
            return Some(start);
        }
        pos = end;
    }
}

/// Spectrum state of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotGrid {
    slot_width_ghz: Ghz,
    occupied: SlotMask,
    owner: Vec<Option<ConnId>>,
}

impl SlotGrid {
    pub fn new(bandwidth_ghz: Ghz, slot_width_ghz: Ghz) -> Result<Self, SpectrumError> {
        let total = slot_count(bandwidth_ghz, slot_width_ghz)?;
        Ok(SlotGrid { slot_width_ghz, occupied: SlotMask::zeros(total), owner: vec![None; total] })
    }

    pub fn slot_width_ghz(&self) -> Ghz {
        self.slot_width_ghz
    }

    pub fn total_slots(&self) -> usize {
        self.occupied.len()
    }

    pub fn occupied(&self) -> &SlotMask {
        &self.occupied
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.count_ones()
    }

    pub fn free_mask(&self) -> SlotMask {
        self.occupied.complement()
    }

    pub fn owner(&self, slot: usize) -> Option<ConnId> {
        self.owner.get(slot).copied().flatten()
    }

    /// Slot-to-owner view for occupied slots.
    pub fn owners(&self) -> impl Iterator<Item = (usize, ConnId)> + '_ {
        self.owner.iter().enumerate().filter_map(|(i, o)| o.map(|c| (i, c)))
    }

    fn check_range(&self, start: usize, total: usize) -> Result<(), SpectrumError> {
        if start + total > self.total_slots() {
            return Err(SpectrumError::OutOfRange { start, end: start + total, total: self.total_slots() });
        }
        Ok(())
    }
}

/// Slots free on every link of `links` (intersection of free sets).
pub fn path_free_mask(grids: &[SlotGrid], links: &[LinkId]) -> Result<SlotMask, SpectrumError> {
    let first = links.first().ok_or_else(|| SpectrumError::GridMismatch("empty path".into()))?;
    let reference = &grids[*first];
    let mut mask = SlotMask::ones(reference.total_slots());
    for &l in links {
        let g = &grids[l];
        if g.total_slots() != reference.total_slots() || g.slot_width_ghz != reference.slot_width_ghz {
            return Err(SpectrumError::GridMismatch(format!(
                "link {l} has {} slots of {} GHz, link {first} has {} of {} GHz",
                g.total_slots(),
                g.slot_width_ghz,
                reference.total_slots(),
                reference.slot_width_ghz
            )));
        }
        mask.and_not_assign(&g.occupied);
    }
    Ok(mask)
}

/// Marks `start..start + demand.total()` as owned by `conn` on every link of
/// `path`. Nothing is modified unless the whole range is free everywhere.
pub fn allocate(
    grids: &mut [SlotGrid],
    path: &Path,
    start: usize,
    demand: SlotDemand,
    conn: ConnId,
) -> Result<(), SpectrumError> {
    let total = demand.total();
    for &l in &path.links {
        let g = &grids[l];
        g.check_range(start, total)?;
        if let Some(slot) = (start..start + total).find(|&s| g.owner[s].is_some()) {
            return Err(SpectrumError::OccupancyConflict { link: l, slot, owner: g.owner[slot].unwrap() });
        }
    }
    for &l in &path.links {
        let g = &mut grids[l];
        g.occupied.set_range(start, start + total, true);
        g.owner[start..start + total].fill(Some(conn));
    }
    Ok(())
}

/// An admitted request holding spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveConnection {
    pub request: Request,
    pub path: Path,
    pub start_slot: usize,
    pub demand: SlotDemand,
    pub departure_s: Seconds,
}

impl ActiveConnection {
    pub fn new(request: Request, path: Path, start_slot: usize, demand: SlotDemand) -> Self {
        let departure_s = request.departure_s();
        ActiveConnection { request, path, start_slot, demand, departure_s }
    }

    pub fn id(&self) -> ConnId {
        self.request.id
    }

    pub fn slot_range(&self) -> std::ops::Range<usize> {
        self.start_slot..self.start_slot + self.demand.total()
    }
}

/// Frees the slots held by `conn`. Nothing is modified unless `conn` owns its
/// whole range on every path link.
pub fn release(grids: &mut [SlotGrid], conn: &ActiveConnection) -> Result<(), SpectrumError> {
    let range = conn.slot_range();
    for &l in &conn.path.links {
        let g = &grids[l];
        g.check_range(range.start, range.len())?;
        if let Some(slot) = range.clone().find(|&s| g.owner[s] != Some(conn.id())) {
            return Err(SpectrumError::OwnershipMismatch {
                link: l,
                slot,
                expected: Some(conn.id()),
                found: g.owner[slot],
            });
        }
    }
    for &l in &conn.path.links {
        let g = &mut grids[l];
        g.occupied.set_range(range.start, range.end, false);
        g.owner[range.clone()].fill(None);
    }
    Ok(())
}

/// Placement of one connection recovered from owner maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OwnedRun {
    pub start: usize,
    pub len: usize,
    pub links: Vec<LinkId>,
}

/// Reconstructs every connection's placement from owner maps alone and checks
/// that each connection holds one contiguous run at identical indices on all
/// of its links, and that occupancy bits match owners.
pub fn owned_runs(grids: &[SlotGrid]) -> Result<BTreeMap<ConnId, OwnedRun>, SpectrumError> {
    let mut runs: BTreeMap<ConnId, OwnedRun> = BTreeMap::new();
    for (l, g) in grids.iter().enumerate() {
        for s in 0..g.total_slots() {
            if g.occupied.get(s) != g.owner[s].is_some() {
                return Err(SpectrumError::BitmapOwnerDisagree { link: l, slot: s });
            }
        }
        let mut per_link: BTreeMap<ConnId, (usize, usize)> = BTreeMap::new();
        for (s, c) in g.owners() {
            let entry = per_link.entry(c).or_insert((s, 0));
            if entry.0 + entry.1 != s {
                return Err(SpectrumError::BrokenConnection {
                    conn: c,
                    msg: format!("non-contiguous slots on link {l} (gap before slot {s})"),
                });
            }
            entry.1 += 1;
        }
        for (c, (start, len)) in per_link {
            match runs.get_mut(&c) {
                None => {
                    runs.insert(c, OwnedRun { start, len, links: vec![l] });
                }
                Some(run) if run.start == start && run.len == len => run.links.push(l),
                Some(run) => {
                    return Err(SpectrumError::BrokenConnection {
                        conn: c,
                        msg: format!(
                            "slots {start}..{} on link {l} differ from {}..{} on link {}",
                            start + len,
                            run.start,
                            run.start + run.len,
                            run.links[0]
                        ),
                    })
                }
            }
        }
    }
    Ok(runs)
}

/// Full consistency check of `grids` against the set of active connections:
/// every slot is owned by exactly the connection whose range covers it, so
/// occupied slot counts per link equal the demand totals routed over it.
pub fn check_consistency<'a>(
    grids: &[SlotGrid],
    active: impl IntoIterator<Item = &'a ActiveConnection>,
) -> Result<(), SpectrumError> {
    let mut expected: Vec<Vec<Option<ConnId>>> = grids.iter().map(|g| vec![None; g.total_slots()]).collect();
    for conn in active {
        for &l in &conn.path.links {
            grids[l].check_range(conn.start_slot, conn.demand.total())?;
            for s in conn.slot_range() {
                if let Some(other) = expected[l][s] {
                    return Err(SpectrumError::OccupancyConflict { link: l, slot: s, owner: other });
                }
                expected[l][s] = Some(conn.id());
            }
        }
    }
    for (l, g) in grids.iter().enumerate() {
        for s in 0..g.total_slots() {
            if g.owner[s] != expected[l][s] {
                return Err(SpectrumError::OwnershipMismatch {
                    link: l,
                    slot: s,
                    expected: expected[l][s],
                    found: g.owner[s],
                });
            }
            if g.occupied.get(s) != g.owner[s].is_some() {
                return Err(SpectrumError::BitmapOwnerDisagree { link: l, slot: s });
            }
        }
    }
    Ok(())
}

/// Text raster of all grids: one line per link, `X` occupied, `.` free.
pub fn occupancy_raster(grids: &[SlotGrid]) -> String {
    let mut out = String::new();
    for g in grids {
        let _ = writeln!(out, "{}", g.occupied.raster('X', '.'));
    }
    out
}
