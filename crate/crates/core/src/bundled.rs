//! The example domains shipped with the crate: the noisy wall robot, its
//! noise-free high-level abstraction, the refinement mapping between them,
//! and the example programs and nature script.

use crate::abstraction::RefinementMapping;
use crate::action::Bat;
use crate::logic::Value;
use crate::program::Program;
use crate::syntax::{parse_bat, parse_mapping, parse_nature, parse_program};

pub const MOVE_BAT: &str = include_str!("../data/move.bat");
pub const MOVE_CORRECTED_BAT: &str = include_str!("../data/move_corrected.bat");
pub const MOVE_LITERAL_BAT: &str = include_str!("../data/move_literal.bat");
pub const GOTO_BAT: &str = include_str!("../data/goto.bat");
pub const WALL_PROG: &str = include_str!("../data/wall.prog");
pub const FIRST_LOOP_PROG: &str = include_str!("../data/first_loop.prog");
pub const GOTO_PROG: &str = include_str!("../data/goto.prog");
pub const MAPPING: &str = include_str!("../data/m.map");
pub const Z_L_NATURE: &str = include_str!("../data/z_l.nature");
pub const Z_L_TEXT: &str = include_str!("../data/z_l.txt");
pub const Z_H_TEXT: &str = include_str!("../data/z_h.txt");

/// Every bundled source file with its name, for round-trip checks.
pub const FILES: &[(&str, &str)] = &[
    ("move.bat", MOVE_BAT),
    ("move_corrected.bat", MOVE_CORRECTED_BAT),
    ("move_literal.bat", MOVE_LITERAL_BAT),
    ("goto.bat", GOTO_BAT),
    ("wall.prog", WALL_PROG),
    ("first_loop.prog", FIRST_LOOP_PROG),
    ("goto.prog", GOTO_PROG),
    ("m.map", MAPPING),
    ("z_l.nature", Z_L_NATURE),
];

fn bat(text: &str, name: &str) -> Bat {
    parse_bat(text, name).unwrap_or_else(|d| panic!("bundled {name} does not parse: {d}"))
}

/// The wall robot, 3 m from the wall.
pub fn move_bat() -> Bat {
    bat(MOVE_BAT, "move.bat")
}

/// The wall robot, 2 m from the wall (consistent with the high-level start).
pub fn move_corrected_bat() -> Bat {
    bat(MOVE_CORRECTED_BAT, "move_corrected.bat")
}

/// The wall robot whose sonar overwrites the distance with the reading.
pub fn move_literal_bat() -> Bat {
    bat(MOVE_LITERAL_BAT, "move_literal.bat")
}

pub fn goto_bat() -> Bat {
    bat(GOTO_BAT, "goto.bat")
}

fn program(text: &str, bat: &Bat, name: &str) -> Program {
    parse_program(text, bat, name).unwrap_or_else(|d| panic!("bundled {name} does not parse: {d}"))
}

/// Move close to the wall, then away from it.
pub fn wall_program(bat: &Bat) -> Program {
    program(WALL_PROG, bat, "wall.prog")
}

/// The first half of the wall program.
pub fn first_loop_program(bat: &Bat) -> Program {
    program(FIRST_LOOP_PROG, bat, "first_loop.prog")
}

pub fn goto_program(bat: &Bat) -> Program {
    program(GOTO_PROG, bat, "goto.prog")
}

pub fn mapping(hl: &Bat, ll: &Bat) -> RefinementMapping {
    parse_mapping(MAPPING, hl, ll, "m.map").unwrap_or_else(|d| panic!("bundled m.map does not parse: {d}"))
}

/// Outcome values of the example run.
pub fn z_l_script() -> Vec<Value> {
    parse_nature(Z_L_NATURE, "z_l.nature").expect("bundled script parses")
}
