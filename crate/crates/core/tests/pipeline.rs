use std::f64::consts::FRAC_PI_2;

use dfsim_core::export::{merit_table, trajectory_table};
use dfsim_core::{
    evolve_lindblad, merit_curve_prep, prepare_b, readout_fluorescence, rotate_logical, DriveSpec, EvolveOptions,
    Geometry, ProtocolOptions, ReadoutTransition, StateVector,
};

fn parse(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(|x| x.parse().unwrap()).collect()).collect();
    (headers, rows)
}

#[test]
fn preparation_trajectory_round_trips_through_csv() {
    let opts = ProtocolOptions { samples: 51, ..Default::default() };
    let r = prepare_b(&Geometry::linear(0.5, 3, 0.0).unwrap(), 1.0, 20.0, &opts).unwrap();
    let text = trajectory_table(&r.trajectory).to_csv_string().unwrap();
    let (headers, rows) = parse(&text);
    assert_eq!(headers.len(), 2 + 2 * 8);
    assert_eq!(rows.len(), 51);
    assert_eq!(rows[0][0], 0.0);
    assert!((rows[50][0] - r.trajectory.times[50]).abs() == 0.0);
    assert!(rows.windows(2).all(|w| w[1][0] > w[0][0]));
    let b = headers.iter().position(|h| h == "renorm_b").unwrap();
    let peak = rows.iter().map(|row| row[b]).fold(0.0, f64::max);
    assert!(peak <= r.fidelity + 1e-6, "{peak} vs {}", r.fidelity);
    for row in &rows {
        let total: f64 = row[headers.len() - 8..].iter().sum();
        assert!((total - 1.0).abs() < 1e-6);
    }
}

#[test]
fn lindblad_table_has_no_jump_column() {
    let c = dfsim_core::coupling_matrices(&Geometry::linear(0.3, 3, 0.0).unwrap()).unwrap();
    let rho = StateVector::product("110").density();
    let t = evolve_lindblad(&rho, &c, &DriveSpec::none(3), 1.0, &EvolveOptions { samples: 5, ..Default::default() }).unwrap();
    let (headers, rows) = parse(&trajectory_table(&t).to_csv_string().unwrap());
    assert_eq!(headers[2], "no_jump_probability");
    assert!(rows.windows(2).all(|w| w[1][2] < w[0][2]));
    assert!(rows.iter().all(|row| (row[1] - 1.0).abs() < 1e-9));
}

#[test]
fn merit_rows_follow_inputs() {
    let points = merit_curve_prep(&[0.2, 0.4], &ProtocolOptions::default()).unwrap();
    let text = merit_table(&points).to_csv_string().unwrap();
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), 0.2);
    assert_eq!(&rows[1][7], "true");
    assert!(points[0].merit > points[1].merit);
    for p in &points {
        assert!((p.merit - 1.0 / (p.linewidth * p.t_pi)).abs() < 1e-9 * p.merit);
    }
}

#[test]
fn protocols_agree_on_shared_geometry() {
    let g = Geometry::linear(0.15, 3, FRAC_PI_2).unwrap();
    let opts = ProtocolOptions::default();
    let rot = rotate_logical(&g, 6.0, 15.0, 170.0, 60.0, &opts).unwrap();
    assert!(rot.fidelity > 0.98 && rot.leakage < 0.05);
    let dark = readout_fluorescence(&g, 1.0, 0, ReadoutTransition::default(), 2.0, &opts).unwrap();
    assert!(dark.emission.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    assert!(dark.final_emission() < 1.0);
}
