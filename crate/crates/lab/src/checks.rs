//! Direct verification of the shell properties on one realization.

use std::collections::{BTreeSet, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use fpp_core::lattice::neighbors;
use fpp_core::shells::{Shell, ShellBuilder};
use fpp_core::{EdgeWeights, LatticePoint, Weight, Window};

/// Nearest-neighbour flood from `from` inside `window`, never entering
/// `blocked`. Empty when `from` itself is blocked.
pub fn flood_avoiding(from: &LatticePoint, blocked: &BTreeSet<LatticePoint>, window: &Window) -> HashSet<LatticePoint> {
    let mut seen = HashSet::new();
    if blocked.contains(from) || !window.contains(from) {
        return seen;
    }
    seen.insert(*from);
    let mut queue = VecDeque::from([*from]);
    while let Some(a) = queue.pop_front() {
        for (_, b) in neighbors(&a) {
            if window.contains(&b) && !blocked.contains(&b) && seen.insert(b) {
                queue.push_back(b);
            }
        }
    }
    seen
}

pub fn nn_connected(set: &BTreeSet<LatticePoint>) -> bool {
    let Some(start) = set.iter().next() else { return true };
    let mut seen = HashSet::from([*start]);
    let mut queue = VecDeque::from([*start]);
    while let Some(a) = queue.pop_front() {
        for (_, b) in neighbors(&a) {
            if set.contains(&b) && seen.insert(b) {
                queue.push_back(b);
            }
        }
    }
    seen.len() == set.len()
}

/// Outcome of the single-shell properties.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShellChecks {
    /// Δ_z connected, white, and containing S_z.
    pub connected: bool,
    /// Every path from z to the window face meets Δ_z.
    pub separates: bool,
    /// Δ_z meets a boundary-reaching white cluster.
    pub infinite_white: bool,
}

impl ShellChecks {
    pub fn all(&self) -> bool {
        self.connected && self.separates && self.infinite_white
    }
}

/// A complete shell with the points its center reaches without crossing it.
pub struct CheckedShell {
    pub shell: Shell,
    pub delta: BTreeSet<LatticePoint>,
    pub inside: HashSet<LatticePoint>,
    pub checks: ShellChecks,
}

pub fn check_shell<W: Weight, F: EdgeWeights<W> + ?Sized>(builder: &ShellBuilder<'_, W, F>, shell: Shell) -> CheckedShell {
    let window = builder.window();
    let delta: BTreeSet<LatticePoint> = shell.delta.iter().copied().collect();
    let s: BTreeSet<LatticePoint> = shell.s.iter().copied().collect();
    let inside = flood_avoiding(&shell.center, &delta, window);
    let checks = ShellChecks {
        connected: nn_connected(&delta) && s.is_subset(&delta) && delta.iter().all(|p| builder.is_white(p)),
        separates: inside.iter().all(|q| !window.on_face(q)),
        infinite_white: delta.iter().any(|p| builder.in_infinite_white(p)),
    };
    CheckedShell {
        shell,
        delta,
        inside,
        checks,
    }
}

/// For shells with disjoint Δ, neither center reaches the other without
/// crossing its own shell. `None` when the shells intersect.
pub fn separated_pair(a: &CheckedShell, b: &CheckedShell) -> Option<bool> {
    if !a.delta.is_disjoint(&b.delta) {
        return None;
    }
    Some(!a.inside.contains(&b.shell.center) && !b.inside.contains(&a.shell.center))
}
