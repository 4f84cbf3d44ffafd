//! Infectious→susceptible contact search on uniform grid buckets.
//!
//! One infectious node paired with several susceptibles is a multicast; one
//! susceptible paired with several infectious nodes is a multiple access.

use std::collections::HashMap;

use serde::Serialize;

use crate::geom::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Contact {
    pub infectious: u32,
    pub susceptible: u32,
    pub distance: f64,
}

/// Bucket grid with cell size equal to the query range.
pub struct ContactGrid {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl ContactGrid {
    /// Indexes `points`, typically positions of susceptible nodes. `range` must be positive.
    pub fn new(range: f64, points: impl IntoIterator<Item = (usize, Vec2)>) -> Self {
        let mut grid = Self {
            cell: range,
            buckets: HashMap::new(),
        };
        for (i, p) in points {
            grid.buckets.entry(grid.key(p)).or_default().push(i);
        }
        grid
    }

    fn key(&self, p: Vec2) -> (i64, i64) {
        (
            (p.x / self.cell).floor() as i64,
            (p.y / self.cell).floor() as i64,
        )
    }

    /// Indices whose bucket neighbours `p`'s bucket; callers filter by distance.
    pub fn candidates(&self, p: Vec2) -> impl Iterator<Item = usize> + '_ {
        let (cx, cy) = self.key(p);
        (-1..=1)
            .flat_map(move |dx| (-1..=1).map(move |dy| (cx + dx, cy + dy)))
            .filter_map(|k| self.buckets.get(&k))
            .flatten()
            .copied()
    }
}

/// All infectious→susceptible pairs within `contact_range`, sorted by
/// `(infectious, susceptible)`. A non-positive range yields no contacts.
///
/// `nodes` yields `(id, position, is_infectious, is_susceptible)`.
pub fn find_contacts(nodes: &[(u32, Vec2, bool, bool)], contact_range: f64) -> Vec<Contact> {
    if !(contact_range > 0.0) {
        return Vec::new();
    }
    let grid = ContactGrid::new(
        contact_range,
        nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.3)
            .map(|(i, n)| (i, n.1)),
    );
    let mut out = Vec::new();
    for &(id, p, infectious, _) in nodes {
        if !infectious {
            continue;
        }
        for j in grid.candidates(p) {
            let (sid, q, ..) = nodes[j];
            let distance = p.distance(q);
            if distance <= contact_range {
                out.push(Contact {
                    infectious: id,
                    susceptible: sid,
                    distance,
                });
            }
        }
    }
    out.sort_by_key(|c| (c.infectious, c.susceptible));
    out
}
