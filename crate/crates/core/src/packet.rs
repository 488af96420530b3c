use std::fmt;

use serde::{Deserialize, Serialize};

/// Identity of packet `packet` of file `file` (both zero-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PacketId {
    pub file: usize,
    pub packet: usize,
}

impl PacketId {
    pub const fn new(file: usize, packet: usize) -> Self {
        PacketId { file, packet }
    }

    /// Builds an id from the one-based `(f,b)` notation used in text formats.
    pub fn from_one_based(file: usize, packet: usize) -> Option<Self> {
        if file == 0 || packet == 0 {
            return None;
        }
        Some(PacketId::new(file - 1, packet - 1))
    }

    #[inline]
    pub fn flat(self, packets_per_file: usize) -> usize {
        self.file * packets_per_file + self.packet
    }

    #[inline]
    pub fn from_flat(index: usize, packets_per_file: usize) -> Self {
        PacketId::new(index / packets_per_file, index % packets_per_file)
    }
}

/// One-based `(f,b)`.
impl fmt::Display for PacketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.file + 1, self.packet + 1)
    }
}

/// Dense bitset over the packets of an `m x B` library.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PacketSet {
    packets_per_file: usize,
    len: usize,
    words: Vec<u64>,
}

impl PacketSet {
    pub fn new(files: usize, packets_per_file: usize) -> Self {
        let universe = files * packets_per_file;
        PacketSet {
            packets_per_file,
            len: 0,
            words: vec![0; universe.div_ceil(64)],
        }
    }

    pub fn full(files: usize, packets_per_file: usize) -> Self {
        let mut set = PacketSet::new(files, packets_per_file);
        for f in 0..files {
            for b in 0..packets_per_file {
                set.insert(PacketId::new(f, b));
            }
        }
        set
    }

    pub fn universe(&self) -> usize {
        self.words.len() * 64
    }

    #[inline]
    pub fn contains(&self, p: PacketId) -> bool {
        let i = p.flat(self.packets_per_file);
        match self.words.get(i / 64) {
            Some(w) => w & (1 << (i % 64)) != 0,
            None => false,
        }
    }

    /// Returns `true` if the packet was not present.
    pub fn insert(&mut self, p: PacketId) -> bool {
        let i = p.flat(self.packets_per_file);
        let bit = 1u64 << (i % 64);
        let word = &mut self.words[i / 64];
        if *word & bit != 0 {
            return false;
        }
        *word |= bit;
        self.len += 1;
        true
    }

    pub fn remove(&mut self, p: PacketId) -> bool {
        let i = p.flat(self.packets_per_file);
        let bit = 1u64 << (i % 64);
        let word = &mut self.words[i / 64];
        if *word & bit == 0 {
            return false;
        }
        *word &= !bit;
        self.len -= 1;
        true
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn union_with(&mut self, other: &PacketSet) {
        debug_assert_eq!(self.words.len(), other.words.len());
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= *b;
        }
        self.len = self.words.iter().map(|w| w.count_ones() as usize).sum();
    }

    /// Packets in ascending `(file, packet)` order.
    pub fn iter(&self) -> impl Iterator<Item = PacketId> + '_ {
        let ppf = self.packets_per_file;
        self.words.iter().enumerate().flat_map(move |(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(PacketId::from_flat(wi * 64 + tz, ppf))
            })
        })
    }

    pub fn count_in_file(&self, file: usize) -> usize {
        (0..self.packets_per_file)
            .filter(|&b| self.contains(PacketId::new(file, b)))
            .count()
    }
}

/// Set of receivers, stored as a bitmask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ReceiverSet(u128);

impl ReceiverSet {
    pub const CAPACITY: usize = 128;

    pub const fn empty() -> Self {
        ReceiverSet(0)
    }

    pub fn singleton(u: usize) -> Self {
        ReceiverSet(1 << u)
    }

    pub fn all(n: usize) -> Self {
        if n >= 128 {
            ReceiverSet(u128::MAX)
        } else {
            ReceiverSet((1u128 << n) - 1)
        }
    }

    #[inline]
    pub fn contains(self, u: usize) -> bool {
        self.0 & (1 << u) != 0
    }

    #[inline]
    pub fn insert(&mut self, u: usize) {
        self.0 |= 1 << u;
    }

    #[inline]
    pub fn with(self, u: usize) -> Self {
        ReceiverSet(self.0 | (1 << u))
    }

    #[inline]
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let tz = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(tz)
        })
    }
}

impl FromIterator<usize> for ReceiverSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = ReceiverSet::empty();
        for u in iter {
            s.insert(u);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packet_set_basic_ops() {
        let mut s = PacketSet::new(3, 5);
        assert!(s.insert(PacketId::new(2, 4)));
        assert!(!s.insert(PacketId::new(2, 4)));
        assert!(s.insert(PacketId::new(0, 1)));
        assert_eq!(s.len(), 2);
        assert!(s.contains(PacketId::new(0, 1)));
        assert!(!s.contains(PacketId::new(1, 1)));
        let v: Vec<_> = s.iter().collect();
        assert_eq!(v, vec![PacketId::new(0, 1), PacketId::new(2, 4)]);
        assert!(s.remove(PacketId::new(0, 1)));
        assert_eq!(s.len(), 1);
        assert_eq!(PacketSet::full(3, 5).len(), 15);
    }

    #[test]
    fn one_based_display_roundtrip() {
        let p = PacketId::from_one_based(3, 1).unwrap();
        assert_eq!(p, PacketId::new(2, 0));
        assert_eq!(p.to_string(), "(3,1)");
        assert!(PacketId::from_one_based(0, 1).is_none());
    }

    #[test]
    fn receiver_set_iteration() {
        let s: ReceiverSet = [0, 5, 127].into_iter().collect();
        assert_eq!(s.len(), 3);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![0, 5, 127]);
        assert_eq!(ReceiverSet::all(3).len(), 3);
        assert!(ReceiverSet::singleton(2).with(4).contains(4));
    }
}
