//! Disjoint sets over accession nodes.
//!
//! Each set is labelled by its smallest node index, so the label of a set is
//! stable as sets grow: merging keeps the older label.

#[derive(Debug, Clone, Default)]
pub(crate) struct AccessionSets {
    parent: Vec<u32>,
    size: Vec<u32>,
    /// Smallest member, valid at roots.
    label: Vec<u32>,
    /// Members in insertion order, valid at roots.
    members: Vec<Vec<u32>>,
}

impl AccessionSets {
    pub(crate) fn len(&self) -> usize {
        self.parent.len()
    }

    pub(crate) fn push(&mut self) -> u32 {
        let node = self.parent.len() as u32;
        self.parent.push(node);
        self.size.push(1);
        self.label.push(node);
        self.members.push(vec![node]);
        node
    }

    /// Root lookup without path compression, for shared readers.
    pub(crate) fn root(&self, mut node: u32) -> u32 {
        while self.parent[node as usize] != node {
            node = self.parent[node as usize];
        }
        node
    }

    pub(crate) fn find(&mut self, node: u32) -> u32 {
        let root = self.root(node);
        let mut cur = node;
        while self.parent[cur as usize] != root {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = root;
            cur = next;
        }
        root
    }

    /// Label of the set containing `node`.
    pub(crate) fn label(&self, node: u32) -> u32 {
        self.label[self.root(node) as usize]
    }

    pub(crate) fn union(&mut self, a: u32, b: u32) -> u32 {
        let mut ra = self.find(a);
        let mut rb = self.find(b);
        if ra == rb {
            return ra;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
        self.label[ra as usize] = self.label[ra as usize].min(self.label[rb as usize]);
        let absorbed = std::mem::take(&mut self.members[rb as usize]);
        self.members[ra as usize].extend(absorbed);
        ra
    }

    pub(crate) fn members(&self, node: u32) -> &[u32] {
        &self.members[self.root(node) as usize]
    }

    /// Flattens every path so later read-only lookups are a single hop.
    pub(crate) fn compress_all(&mut self) {
        for node in 0..self.parent.len() as u32 {
            self.find(node);
        }
    }
}
