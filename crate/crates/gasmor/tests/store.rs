mod common;

use common::*;
use gasmor::gasmodel::Discretization;
use gasmor::reductors::{reduce, Method};
use gasmor::store::*;

fn header(series: &gasmor::reductors::ProjectorSeries<f64>) -> RomHeader {
    RomHeader {
        method: series.method.clone(),
        model_hash: "abc".into(),
        model: "ode_end".into(),
        solver: "imex1".into(),
        thetas: vec![(283.15, 530.0)],
        galerkin: series.galerkin,
        np: series.up.nrows(),
        nq: series.uq.nrows(),
        rank_p: series.rank_p(),
        rank_q: series.rank_q(),
        pbar: vec![60.0, 59.9],
        qbar: vec![15.0],
        offline_seconds: 1.5,
    }
}

#[test]
fn rom_files_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let bank = pipe_bank(Discretization::Endpoint);
    for method in [Method::all()[0], "ebt_wz".parse().unwrap()] {
        let series = reduce(method, &bank, 20).unwrap();
        let file = RomFile { header: header(&series), series };
        let path = dir.path().join(format!("{method}.rom"));
        save_rom(&path, &file).unwrap();
        let back = load_rom::<f64>(&path).unwrap();
        assert_eq!(back.header, file.header);
        assert_eq!(back.series, file.series);
    }
}

#[test]
fn corrupt_rom_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.rom");
    std::fs::write(&path, b"NOTAROM!\0\0\0\0\0\0\0\0").unwrap();
    assert!(load_rom::<f64>(&path).is_err());
    let bank = pipe_bank(Discretization::Endpoint);
    let series = reduce(Method::all()[0], &bank, 5).unwrap();
    let good = dir.path().join("good.rom");
    save_rom(&good, &RomFile { header: header(&series), series }).unwrap();
    let bytes = std::fs::read(&good).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
    assert!(load_rom::<f64>(&path).is_err());
    assert!(load_rom::<f64>(&dir.path().join("missing.rom")).is_err());
}

#[test]
fn digests_are_stable_hex() {
    let d = digest("gas");
    assert_eq!(d, digest("gas"));
    assert_ne!(d, digest("gas "));
    assert!(d.chars().all(|c| c.is_ascii_hexdigit()));
}
