use spm_dse::calibrate::{calibrate_from_files, reproduce, AnchorSet};
use spm_dse::costmodel::load_cost_table;
use spm_dse::memconfig::MemorySpec;
use spm_dse::units::{KIB, MIB};

fn anchors() -> std::path::PathBuf {
    spm_dse::data_dir().join("calibration_anchors.json")
}

#[test]
fn shipped_table_is_regenerated_exactly() {
    let cal = calibrate_from_files(&anchors()).unwrap();
    let shipped = std::fs::read_to_string(spm_dse::data_dir().join("cost32nm.json")).unwrap();
    assert_eq!(cal.table.to_json(), shipped);
}

#[test]
fn every_printed_cell_is_reproduced() {
    let set = AnchorSet::load(anchors()).unwrap();
    let workloads = set.load_workloads(&spm_dse::data_dir()).unwrap();
    let table = load_cost_table(spm_dse::data_dir().join("cost32nm.json")).unwrap();
    let cells = reproduce(&set, &workloads, &table).unwrap();
    assert_eq!(cells.len(), 140);
    for c in &cells {
        assert!(c.error() <= 0.001, "{c:?}");
    }
    // gated dynamic cells held to the printed value of their non-gated twin
    assert!(cells.iter().any(|c| c.reference != c.printed));
}

#[test]
fn selected_rows() {
    let table = load_cost_table(spm_dse::data_dir().join("cost32nm.json")).unwrap();
    let w = table.query(&MemorySpec::new(64 * KIB, 1, 1)).unwrap();
    assert!((w.area_mm2 - 0.314).abs() < 5e-4);
    let acc = table.query(&MemorySpec::new(8 * MIB, 16, 1)).unwrap();
    assert!(acc.area_mm2 > 0.0 && acc.wake_j > 0.0);
}
