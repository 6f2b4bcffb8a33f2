//! Occupancy-grid construction from posed scans and the on-disk map format.

pub mod integrate;
pub mod map_io;
pub mod scan_match;

pub use integrate::{integrate_scan, L_FREE, L_OCC};
pub use map_io::{load_map, save_map, yaml_text};
pub use scan_match::scan_match;
