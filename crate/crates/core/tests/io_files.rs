use std::fs::File;

use dplab::io::{read_field_binary, read_field_csv, write_field_binary, write_field_csv, HEADER_BYTES};
use dplab::profile::{build_profile, WaveParams, DEFAULT_TOL};
use dplab::Grid;

#[test]
fn profile_survives_both_formats_on_disk() {
    let p = WaveParams::new(4.0, 0.5).unwrap();
    let w = build_profile(&p, &Grid::new(48.0, 1024).unwrap(), DEFAULT_TOL).unwrap();
    let dir = tempfile::tempdir().unwrap();

    let csv = dir.path().join("phi.csv");
    write_field_csv(&w.phi, &mut File::create(&csv).unwrap()).unwrap();
    let back = read_field_csv(&mut File::open(&csv).unwrap()).unwrap();
    assert_eq!(back.grid(), &w.grid);
    assert_eq!(back.values(), w.phi.values());

    let bin = dir.path().join("phi.bin");
    write_field_binary(&w.phi_x, &mut File::create(&bin).unwrap()).unwrap();
    assert_eq!(std::fs::metadata(&bin).unwrap().len() as usize, HEADER_BYTES + 8 * 1024);
    let back = read_field_binary(&mut File::open(&bin).unwrap()).unwrap();
    assert_eq!(back, w.phi_x);
}
