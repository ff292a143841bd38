// Copyright 2026 The joinsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Join graph of one query over alias-slot bitmasks.

use crate::catalog::Layout;
use crate::sql::Query;

/// Iterates the set bits of `mask`, lowest first.
pub fn bits(mut mask: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let i = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(i)
        }
    })
}

#[derive(Clone, Debug)]
pub struct QueryGraph {
    slots: Vec<usize>,
    full: u64,
    /// Indexed by global slot.
    adj: Vec<u64>,
}

impl QueryGraph {
    pub fn new(query: &Query, layout: &Layout) -> Self {
        let mut adj = vec![0u64; 64];
        for j in &query.joins {
            let a = layout.column(j.left).slot;
            let b = layout.column(j.right).slot;
            adj[a] |= 1 << b;
            adj[b] |= 1 << a;
        }
        Self {
            slots: query.tables.clone(),
            full: query.table_mask(),
            adj,
        }
    }

    /// Slots of `I`, ascending; position `k` is local index `k`.
    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn full_mask(&self) -> u64 {
        self.full
    }

    pub fn neighbors(&self, slot: usize) -> u64 {
        self.adj[slot]
    }

    /// Slots adjacent to any member of `mask` (members included when they
    /// have an internal edge).
    pub fn neighborhood(&self, mask: u64) -> u64 {
        bits(mask).fold(0, |acc, s| acc | self.adj[s])
    }

    pub fn connects(&self, a: u64, b: u64) -> bool {
        self.neighborhood(a) & b != 0
    }

    /// Connected components of the subgraph induced by `mask`, ordered by
    /// their lowest slot.
    pub fn components(&self, mask: u64) -> Vec<u64> {
        let mut out = Vec::new();
        let mut rest = mask;
        while rest != 0 {
            let mut comp = rest & rest.wrapping_neg();
            loop {
                let grown = comp | (self.neighborhood(comp) & mask);
                if grown == comp {
                    break;
                }
                comp = grown;
            }
            out.push(comp);
            rest &= !comp;
        }
        out
    }

    pub fn is_connected(&self, mask: u64) -> bool {
        mask != 0 && self.components(mask).len() == 1
    }

    /// Local (position-in-`I`) mask to global slot mask.
    pub fn to_global(&self, local: u32) -> u64 {
        let mut g = 0;
        let mut l = local;
        while l != 0 {
            let k = l.trailing_zeros() as usize;
            g |= 1 << self.slots[k];
            l &= l - 1;
        }
        g
    }

    /// Adjacency in local indices.
    pub fn local_adjacency(&self) -> Vec<u32> {
        self.slots
            .iter()
            .map(|&s| {
                self.slots
                    .iter()
                    .enumerate()
                    .filter(|&(_, &t)| self.adj[s] & (1 << t) != 0)
                    .fold(0u32, |m, (k, _)| m | (1 << k))
            })
            .collect()
    }
}
