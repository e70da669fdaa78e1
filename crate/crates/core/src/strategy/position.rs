//! Static benchmarks: always long, always short, always cash.

use super::{ActionId, Decision, SizingParams, StrategyState};

pub(crate) fn decide(action: ActionId, state: &StrategyState, sizing: &SizingParams) -> Decision {
    if !state.is_flat() {
        return Decision::Hold;
    }
    match action {
        ActionId::LongOnly => Decision::open(1, 1.0, "enter_long"),
        ActionId::ShortOnly => Decision::open(-1, sizing.short_only_fraction, "enter_short"),
        _ => Decision::Hold,
    }
}
