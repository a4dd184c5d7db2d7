//! Shared inputs for the benchmarks.

use brace_forge::{corpus, Brace, Budget, PreLie, PullbackChoice};

/// Small enough that every check runs exhaustively in well under a second.
pub fn budget() -> Budget {
    Budget { exhaustive: 50_000_000, samples: 2_000, seed: 0 }
}

pub fn radical(p: u64, n: u32) -> Brace {
    corpus::radical_ring_brace(p, n, p).expect("p divides lambda").compact()
}

pub fn extracted(p: u64, n: u32) -> PreLie {
    brace_forge::prelie::extract_prelie(&radical(p, n), 1, PullbackChoice::Canonical, &budget()).expect("radical rings satisfy 1' and 1''")
}
