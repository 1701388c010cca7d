//! Shadow files: a JSON header line followed by a CSV table with one row per
//! (snapshot, qubit).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::snapshot::{Shadow, ShadowMeta, Snapshot};
use crate::error::{OtocError, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    snapshot_index: usize,
    qubit_index: usize,
    clifford_index: u8,
    outcome_bit: u8,
}

pub fn write_shadow<W: Write>(shadow: &Shadow, mut out: W) -> Result<()> {
    serde_json::to_writer(&mut out, &shadow.meta)?;
    out.write_all(b"\n")?;
    let mut csv = csv::Writer::from_writer(out);
    for (i, s) in shadow.snapshots().iter().enumerate() {
        for q in 0..s.num_qubits() {
            csv.serialize(Row {
                snapshot_index: i,
                qubit_index: q,
                clifford_index: s.cliffords()[q],
                outcome_bit: s.outcomes()[q],
            })?;
        }
    }
    csv.flush()?;
    Ok(())
}

pub fn read_shadow<R: Read>(input: R) -> Result<Shadow> {
    let mut reader = BufReader::new(input);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let meta: ShadowMeta = serde_json::from_str(header.trim_end())?;
    let mut csv = csv::Reader::from_reader(reader);
    let mut cliffords: Vec<Vec<u8>> = Vec::new();
    let mut outcomes: Vec<Vec<u8>> = Vec::new();
    for row in csv.deserialize() {
        let row: Row = row?;
        if row.snapshot_index == cliffords.len() {
            cliffords.push(Vec::new());
            outcomes.push(Vec::new());
        }
        let i = row.snapshot_index;
        if i + 1 != cliffords.len() || row.qubit_index != cliffords[i].len() {
            return Err(OtocError::Parse(format!(
                "rows out of order at snapshot {i}, qubit {}",
                row.qubit_index
            )));
        }
        cliffords[i].push(row.clifford_index);
        outcomes[i].push(row.outcome_bit);
    }
    let snapshots = cliffords
        .into_iter()
        .zip(outcomes)
        .map(|(c, o)| Snapshot::new(c, o))
        .collect::<Result<Vec<_>>>()?;
    Shadow::new(meta, snapshots)
}

pub fn save_shadow(shadow: &Shadow, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_shadow(shadow, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_shadow(path: &Path) -> Result<Shadow> {
    read_shadow(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{HamiltonianSpectrum, IsingParams};
    use crate::rng::Seed;
    use crate::shadows::{build_shadow, StatePrep};

    #[test]
    fn round_trip_is_exact() {
        let spec = HamiltonianSpectrum::new(2, IsingParams::default()).unwrap();
        let prep = StatePrep::single_bell(&spec, 0.1 + 0.2, 2).unwrap();
        let sh = build_shadow(&prep, 37, Seed(3)).unwrap();
        let mut buf = Vec::new();
        write_shadow(&sh, &mut buf).unwrap();
        let back = read_shadow(buf.as_slice()).unwrap();
        assert_eq!(back, sh);
        assert_eq!(back.meta.t.to_bits(), sh.meta.t.to_bits());
        let mut again = Vec::new();
        write_shadow(&back, &mut again).unwrap();
        assert_eq!(buf, again);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap() == "snapshot_index,qubit_index,clifford_index,outcome_bit");
    }

    #[test]
    fn rejects_corrupt_input() {
        let bad = "{\"protocol\":\"x\",\"n\":1,\"t\":0.0,\"K\":1,\"seed\":0}\nsnapshot_index,qubit_index,clifford_index,outcome_bit\n0,0,30,0\n";
        assert!(read_shadow(bad.as_bytes()).is_err());
        let wrong_k = "{\"protocol\":\"x\",\"n\":1,\"t\":0.0,\"K\":2,\"seed\":0}\nsnapshot_index,qubit_index,clifford_index,outcome_bit\n0,0,3,0\n";
        assert!(read_shadow(wrong_k.as_bytes()).is_err());
    }
}
