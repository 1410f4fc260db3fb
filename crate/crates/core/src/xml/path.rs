use alloc::vec::Vec;
use core::fmt;

use super::{Element, QName};

/// One step of a [`NodePath`]: the element-child index under the parent
/// (ignoring text and comments) and the expected name at that position.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathStep {
    pub index: usize,
    pub name: QName,
}

/// Address of an element, starting at the document element.
///
/// The name stored with each step is checked during resolution, so a path
/// never silently resolves to a different element after an edit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodePath {
    steps: Vec<PathStep>,
}

impl NodePath {
    pub fn root(name: QName) -> Self {
        Self {
            steps: alloc::vec![PathStep { index: 0, name }],
        }
    }

    pub fn from_steps(steps: Vec<PathStep>) -> Option<Self> {
        (!steps.is_empty()).then_some(Self { steps })
    }

    pub fn steps(&self) -> &[PathStep] {
        &self.steps
    }

    pub fn depth(&self) -> usize {
        self.steps.len()
    }

    pub fn name(&self) -> &QName {
        &self.steps[self.steps.len() - 1].name
    }

    pub fn child(&self, index: usize, name: QName) -> Self {
        let mut steps = self.steps.clone();
        steps.push(PathStep { index, name });
        Self { steps }
    }

    pub fn parent(&self) -> Option<Self> {
        (self.steps.len() > 1).then(|| Self {
            steps: self.steps[..self.steps.len() - 1].to_vec(),
        })
    }

    /// Element-child index of the addressed node under its parent.
    pub fn last_index(&self) -> usize {
        self.steps[self.steps.len() - 1].index
    }

    /// True if `self` is a proper ancestor of `other`.
    pub fn is_ancestor_of(&self, other: &NodePath) -> bool {
        other.steps.len() > self.steps.len() && other.steps[..self.steps.len()] == self.steps[..]
    }

    pub fn resolve_in<'a>(&self, root: &'a Element) -> Option<&'a Element> {
        let (first, rest) = self.steps.split_first()?;
        if first.index != 0 || first.name != root.name {
            return None;
        }
        let mut cur = root;
        for step in rest {
            cur = cur.child_elements().nth(step.index)?;
            if cur.name != step.name {
                return None;
            }
        }
        Some(cur)
    }

    pub fn resolve_in_mut<'a>(&self, root: &'a mut Element) -> Option<&'a mut Element> {
        let (first, rest) = self.steps.split_first()?;
        if first.index != 0 || first.name != root.name {
            return None;
        }
        let mut cur = root;
        for step in rest {
            cur = cur.child_elements_mut().nth(step.index)?;
            if cur.name != step.name {
                return None;
            }
        }
        Some(cur)
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.steps {
            write!(f, "/{}[{}]", step.name.local_name(), step.index)?;
        }
        Ok(())
    }
}
