use std::rc::Rc;

use super::TokenSequence;

/// Row-major boolean attention visibility over a token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisibleMatrix {
    pub n: usize,
    pub visible: Rc<Vec<bool>>,
}

impl VisibleMatrix {
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.visible[i * self.n + j]
    }

    pub fn all_visible(n: usize) -> Self {
        Self { n, visible: Rc::new(vec![true; n * n]) }
    }
}

/// Same group, or either side is the visual token; padding sees only itself.
pub fn build_visible_matrix(seq: &TokenSequence) -> VisibleMatrix {
    let n = seq.len();
    let mut v = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            v[i * n + j] = i == j
                || (!seq.pad[i] && !seq.pad[j] && (seq.group_of[i] == seq.group_of[j] || i == 0 || j == 0));
        }
    }
    VisibleMatrix { n, visible: Rc::new(v) }
}
