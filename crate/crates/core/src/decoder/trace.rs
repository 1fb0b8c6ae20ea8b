use crate::lm::WordId;

/// Index into the trace arena; `ROOT` is the segment start.
pub type TraceRef = u32;
pub const ROOT: TraceRef = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEntry {
    pub word: WordId,
    pub start_frame: u64,
    /// exclusive
    pub end_frame: u64,
    pub parent: TraceRef,
    /// number of words from the root, this one included
    pub depth: u32,
}

/// Word-boundary back-pointers shared by all tokens of a segment.
#[derive(Debug, Clone, Default)]
pub(crate) struct TraceArena {
    nodes: Vec<TraceEntry>,
    // refs[i] counts children plus live holders; zero means free
    refs: Vec<u32>,
    free: Vec<TraceRef>,
}

impl TraceArena {
    pub fn push(&mut self, word: WordId, start_frame: u64, end_frame: u64, parent: TraceRef) -> TraceRef {
        let depth = if parent == ROOT { 1 } else { self.get(parent).depth + 1 };
        let entry = TraceEntry {
            word,
            start_frame,
            end_frame,
            parent,
            depth,
        };
        // placeholder count keeps fresh nodes alive until the next collection
        match self.free.pop() {
            Some(id) => {
                self.nodes[id as usize] = entry;
                self.refs[id as usize] = 1;
                id
            }
            None => {
                self.nodes.push(entry);
                self.refs.push(1);
                (self.nodes.len() - 1) as TraceRef
            }
        }
    }

    pub fn get(&self, id: TraceRef) -> &TraceEntry {
        debug_assert!(self.refs[id as usize] > 0, "trace entry {id} used after reclamation");
        &self.nodes[id as usize]
    }

    pub fn depth(&self, id: TraceRef) -> u32 {
        if id == ROOT {
            0
        } else {
            self.get(id).depth
        }
    }

    pub fn live(&self) -> usize {
        self.nodes.len() - self.free.len()
    }

    /// Entries from just below `stop` down to `from`, oldest first.
    /// `stop` must be an ancestor of `from` (or `ROOT`).
    pub fn path(&self, from: TraceRef, stop: TraceRef) -> Vec<TraceEntry> {
        let mut out = Vec::new();
        let mut at = from;
        while at != stop {
            debug_assert!(at != ROOT, "stop is not an ancestor");
            let e = *self.get(at);
            out.push(e);
            at = e.parent;
        }
        out.reverse();
        out
    }

    pub fn is_ancestor(&self, anc: TraceRef, mut node: TraceRef) -> bool {
        let target = self.depth(anc);
        while self.depth(node) > target {
            node = self.get(node).parent;
        }
        node == anc
    }

    pub fn common_ancestor(&self, mut a: TraceRef, mut b: TraceRef) -> TraceRef {
        while self.depth(a) > self.depth(b) {
            a = self.get(a).parent;
        }
        while self.depth(b) > self.depth(a) {
            b = self.get(b).parent;
        }
        while a != b {
            a = self.get(a).parent;
            b = self.get(b).parent;
        }
        a
    }

    /// Reference-counting sweep: recounts holders from `roots`, then frees
    /// every entry nobody reaches.
    pub fn collect(&mut self, roots: impl IntoIterator<Item = TraceRef>) {
        self.refs.iter_mut().for_each(|r| *r = 0);
        let mut stack: Vec<TraceRef> = Vec::new();
        for r in roots {
            if r != ROOT {
                self.refs[r as usize] += 1;
                if self.refs[r as usize] == 1 {
                    stack.push(r);
                }
            }
        }
        while let Some(id) = stack.pop() {
            let parent = self.nodes[id as usize].parent;
            if parent != ROOT {
                self.refs[parent as usize] += 1;
                if self.refs[parent as usize] == 1 {
                    stack.push(parent);
                }
            }
        }
        self.free.clear();
        for (i, &r) in self.refs.iter().enumerate() {
            if r == 0 {
                self.free.push(i as TraceRef);
            }
        }
        // pop lowest indices first
        self.free.reverse();
    }

    /// Every chain from `holders` reaches the root through live entries.
    pub fn audit(&self, holders: impl IntoIterator<Item = TraceRef>) -> bool {
        holders.into_iter().all(|mut at| {
            while at != ROOT {
                if self.refs[at as usize] == 0 {
                    return false;
                }
                at = self.nodes[at as usize].parent;
            }
            true
        })
    }
}
