#![allow(dead_code)]

use std::path::PathBuf;

use erm_core::model::io::read_scenario;
use erm_core::model::Scenario;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// 20 × 10 m L-shaped room, BS at the origin, 35 interior UEs.
pub fn l_room() -> Scenario {
    read_scenario(data_dir().join("l_room.json")).expect("L-room fixture loads")
}

/// Route-1 east-building endpoints and the ten reflection points on it.
pub const EB_ENDPOINTS: [[f64; 2]; 2] = [[46.78, 46.57], [41.1, 106.57]];

pub const ROUTE1_RPS: [[f64; 2]; 10] = [
    [46.4, 36.35],
    [45.45, 42.91],
    [46.09, 50.36],
    [50.53, 47.11],
    [44.58, 64.38],
    [47.51, 65.90],
    [40.87, 75.03],
    [43.46, 82.92],
    [45.87, 83.43],
    [42.66, 89.26],
];

/// Route-2 corridor: sensed ordinates and the two wall ordinates they are
/// scored against.
pub const ROUTE2_ORDINATES: [f64; 8] = [53.94, 65.80, 65.73, 65.89, 65.90, 65.86, 65.31, 67.01];
pub const ROUTE2_WALLS: [f64; 2] = [53.38, 65.30];
