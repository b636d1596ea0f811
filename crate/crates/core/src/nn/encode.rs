//! Turning machine states into embedding ids.
//!
//! Every cell value becomes one id: values in `-128..=127` map to
//! `0..=255`, anything below the window to 256, anything above to 257.
//! A network input is the concatenation, pair by pair, of the current
//! state's cells followed by the target state's cells.

use alloc::vec::Vec;

use crate::machine::{MachineState, SpaceConfig};

/// Number of distinct cell ids (256 in-window values plus two overflow
/// buckets).
pub const VALUE_VOCAB: usize = 258;

/// The embedding id for one cell value.
pub fn value_token(v: i32) -> u16 {
    if v < -128 {
        256
    } else if v > 127 {
        257
    } else {
        (v + 128) as u16
    }
}

/// A network-ready view of where the machine is and where it should end up.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateEncoding {
    /// `pairs · 2 · cells` ids: for each pair, current cells then target
    /// cells.
    pub ids: Vec<u16>,
    pub pairs: usize,
    pub cells: usize,
}

/// Encodes current/target state pairs. The two slices must have the same
/// length and every state must match the space.
pub fn encode_state(
    currents: &[MachineState],
    targets: &[MachineState],
    space: SpaceConfig,
) -> StateEncoding {
    assert_eq!(currents.len(), targets.len(), "one target per current state");
    assert!(!currents.is_empty(), "need at least one pair");
    let cells = space.cells();
    let mut ids = Vec::with_capacity(currents.len() * 2 * cells);
    for (current, target) in currents.iter().zip(targets) {
        for state in [current, target] {
            let values = state.cells(space).expect("state matches the space");
            ids.extend(values.into_iter().map(value_token));
        }
    }
    StateEncoding { ids, pairs: currents.len(), cells }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_tokens_cover_the_window() {
        assert_eq!(value_token(-128), 0);
        assert_eq!(value_token(0), 128);
        assert_eq!(value_token(127), 255);
        assert_eq!(value_token(-129), 256);
        assert_eq!(value_token(i32::MIN), 256);
        assert_eq!(value_token(128), 257);
        assert_eq!(value_token(i32::MAX), 257);
    }

    #[test]
    fn layout_is_pair_major_current_first() {
        let space = SpaceConfig::new(2, false);
        let currents = [
            MachineState::regs_only([1, 2, 0, 0]),
            MachineState::regs_only([3, 4, 0, 0]),
        ];
        let targets = [
            MachineState::regs_only([5, 6, 0, 0]),
            MachineState::regs_only([7, 8, 0, 0]),
        ];
        let enc = encode_state(&currents, &targets, space);
        assert_eq!(enc.pairs, 2);
        assert_eq!(enc.cells, 2);
        let expect: Vec<u16> = [1, 2, 5, 6, 3, 4, 7, 8]
            .into_iter()
            .map(|v: i32| value_token(v))
            .collect();
        assert_eq!(enc.ids, expect);
    }

    #[test]
    fn ram_cells_follow_registers() {
        let space = SpaceConfig::new(1, true);
        let current = [MachineState::with_ram([9, 0, 0, 0], [1, 2, 3, 4])];
        let target = [MachineState::with_ram([8, 0, 0, 0], [4, 3, 2, 1])];
        let enc = encode_state(&current, &target, space);
        assert_eq!(enc.cells, 5);
        let expect: Vec<u16> = [9, 1, 2, 3, 4, 8, 4, 3, 2, 1]
            .into_iter()
            .map(|v: i32| value_token(v))
            .collect();
        assert_eq!(enc.ids, expect);
    }
}
