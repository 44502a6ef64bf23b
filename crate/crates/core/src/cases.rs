//! Bundled test systems.

use crate::case::{parse_case, NetworkCase};

/// IEEE 14-bus system in MATPOWER format.
pub const IEEE14_M: &str = include_str!("../data/case14.m");
/// Slack feeding one PQ load of 0.1 p.u. over a lossless line.
pub const TWO_BUS_JSON: &str = include_str!("../data/two_bus.json");
/// Same two-bus line with no load at all.
pub const TWO_BUS_NO_LOAD_JSON: &str = include_str!("../data/two_bus_no_load.json");
/// Slack + PV + PQ triangle.
pub const THREE_BUS_JSON: &str = include_str!("../data/three_bus.json");
/// Published IEEE-14 voltages with bus 7 grounded (two solutions, 4 decimals;
/// bus 8 printed at 1.06 p.u.).
pub const IEEE14_GROUNDED_SOLUTIONS_JSON: &str = include_str!("../data/grounded_bus7_solutions.json");

pub fn ieee14() -> NetworkCase {
    parse_case(IEEE14_M).expect("bundled IEEE-14 case parses")
}

pub fn two_bus() -> NetworkCase {
    parse_case(TWO_BUS_JSON).expect("bundled two-bus case parses")
}

pub fn two_bus_no_load() -> NetworkCase {
    parse_case(TWO_BUS_NO_LOAD_JSON).expect("bundled two-bus case parses")
}

pub fn three_bus() -> NetworkCase {
    parse_case(THREE_BUS_JSON).expect("bundled three-bus case parses")
}
