//! Small hand-built instances used by tests, docs and the CLI.

use crate::model::{Instance, InstanceBuilder};

/// One agent; ndd `1`, pairs `2`–`6`; arcs 1→2, 2→3, 2→4, 2→6, 3↔5, 4↔5, 6↔5. K = 3, L = 2.
pub fn single_agent_chain_pool() -> Instance {
    let mut b = InstanceBuilder::new(3, 2);
    let a = b.agent("a");
    b.labeled_ndd(a, "1");
    for l in ["2", "3", "4", "5", "6"] {
        b.labeled_pair(a, l);
    }
    for (u, v) in [
        ("1", "2"),
        ("2", "3"),
        ("2", "4"),
        ("2", "6"),
        ("3", "5"),
        ("5", "3"),
        ("4", "5"),
        ("5", "4"),
        ("6", "5"),
        ("5", "6"),
    ] {
        b.arc_by_label(u, v);
    }
    b.build().expect("fixture is valid")
}

/// Two agents. Red owns `b`, `c`; blue owns `a`, `1`–`4`.
/// Arcs a→1→2→a, c→3→4→c and b↔c. K = 3, L = 0.
pub fn red_blue_pool() -> Instance {
    let mut b = InstanceBuilder::new(3, 0);
    let red = b.agent("red");
    let blue = b.agent("blue");
    b.labeled_pair(red, "b");
    b.labeled_pair(red, "c");
    for l in ["a", "1", "2", "3", "4"] {
        b.labeled_pair(blue, l);
    }
    for (u, v) in [
        ("a", "1"),
        ("1", "2"),
        ("2", "a"),
        ("c", "3"),
        ("3", "4"),
        ("4", "c"),
        ("b", "c"),
        ("c", "b"),
    ] {
        b.arc_by_label(u, v);
    }
    b.build().expect("fixture is valid")
}

/// Agent A owns pairs `1`, `2` (1↔2), agent B owns pair `3` (2↔3). K = 3.
///
/// With `shared_first` the vertices are numbered B-first, which makes the
/// engine's deterministic social optimum pick the shared cycle (2,3).
pub fn withholding_example(shared_first: bool) -> Instance {
    let mut b = InstanceBuilder::new(3, 0);
    let (ag_a, ag_b) = if shared_first {
        let bb = b.agent("B");
        let aa = b.agent("A");
        b.labeled_pair(bb, "3");
        (aa, bb)
    } else {
        let aa = b.agent("A");
        let bb = b.agent("B");
        (aa, bb)
    };
    b.labeled_pair(ag_a, "1");
    b.labeled_pair(ag_a, "2");
    if !shared_first {
        b.labeled_pair(ag_b, "3");
    }
    for (u, v) in [("1", "2"), ("2", "1"), ("2", "3"), ("3", "2")] {
        b.arc_by_label(u, v);
    }
    b.build().expect("fixture is valid")
}
