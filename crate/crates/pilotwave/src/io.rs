//! On-disk formats: the binary grid dump (little-endian header + row-major
//! complex64 pairs with a JSON sidecar), trajectory CSV, and record
//! directories. All writers are deterministic: identical inputs produce
//! byte-identical files.

use std::io::{BufRead, BufReader, BufWriter, Read, Write as IoWrite};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::{Boundary, Grid};
use crate::polar::PhaseField;
use crate::solver::{EvolutionRecord, MagneticSpec, Method};
use crate::trajectory::{Ensemble, SampleFlag, Trajectory};
use crate::wavefunction::WaveFunction;

const MAGIC: &[u8; 4] = b"BOHM";
const VERSION: u32 = 1;

/// JSON sidecar carried next to every binary dump.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DumpSidecar {
    pub schema: u32,
    pub dims_per_particle: usize,
    pub particle_count: usize,
    pub masses: Vec<f64>,
    pub hbar: f64,
    pub boundary: Boundary,
}

fn write_header<W: IoWrite>(
    w: &mut W,
    grid: &Grid,
    components: u32,
) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    w.write_all(&components.to_le_bytes())?;
    for &n in grid.points() {
        w.write_all(&(n as u32).to_le_bytes())?;
    }
    for &e in grid.extents() {
        w.write_all(&e.to_le_bytes())?;
    }
    Ok(())
}

fn read_header<R: Read>(r: &mut R) -> Result<(u32, Vec<usize>, Vec<f64>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Config("not a grid dump (bad magic)".into()));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != VERSION {
        return Err(Error::Config(format!("unsupported dump version {version}")));
    }
    r.read_exact(&mut u32buf)?;
    let dim = u32::from_le_bytes(u32buf) as usize;
    r.read_exact(&mut u32buf)?;
    let components = u32::from_le_bytes(u32buf);
    let mut points = Vec::with_capacity(dim);
    for _ in 0..dim {
        r.read_exact(&mut u32buf)?;
        points.push(u32::from_le_bytes(u32buf) as usize);
    }
    let mut f64buf = [0u8; 8];
    let mut extents = Vec::with_capacity(dim);
    for _ in 0..dim {
        r.read_exact(&mut f64buf)?;
        extents.push(f64::from_le_bytes(f64buf));
    }
    Ok((components, points, extents))
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    p.into()
}

/// Write a wave function as `path` (binary) plus `path.json` (sidecar).
pub fn write_wavefunction(path: &Path, psi: &WaveFunction) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write_header(&mut w, psi.grid(), psi.components() as u32)?;
    for a in psi.amplitudes() {
        w.write_all(&a.re.to_le_bytes())?;
        w.write_all(&a.im.to_le_bytes())?;
    }
    w.flush()?;
    let sidecar = DumpSidecar {
        schema: VERSION,
        dims_per_particle: psi.grid().dims_per_particle(),
        particle_count: psi.grid().particle_count(),
        masses: psi.masses().to_vec(),
        hbar: psi.hbar(),
        boundary: psi.grid().boundary(),
    };
    std::fs::write(sidecar_path(path), serde_json::to_string(&sidecar)?)?;
    Ok(())
}

pub fn read_wavefunction(path: &Path) -> Result<WaveFunction> {
    let sidecar: DumpSidecar =
        serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let (components, points, extents) = read_header(&mut r)?;
    let grid = Arc::new(Grid::new(
        sidecar.dims_per_particle,
        sidecar.particle_count,
        points,
        extents,
        sidecar.boundary,
    )?);
    let total = grid.len() * components as usize;
    let mut amplitudes = Vec::with_capacity(total);
    let mut buf = [0u8; 16];
    for _ in 0..total {
        r.read_exact(&mut buf)?;
        let re = f64::from_le_bytes(buf[..8].try_into().expect("8 bytes"));
        let im = f64::from_le_bytes(buf[8..].try_into().expect("8 bytes"));
        amplitudes.push(Complex64::new(re, im));
    }
    WaveFunction::new(grid, components as usize, amplitudes, sidecar.masses, sidecar.hbar)
}

/// Real fields reuse the complex dump with zero imaginary parts; vector
/// fields store D components per point.
pub fn write_scalar_field(path: &Path, field: &ScalarField) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write_header(&mut w, field.grid(), 1)?;
    for &v in field.values() {
        w.write_all(&v.to_le_bytes())?;
        w.write_all(&0f64.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_vector_field(path: &Path, field: &VectorField) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    let dim = field.grid().dim();
    write_header(&mut w, field.grid(), dim as u32)?;
    for p in 0..field.grid().len() {
        for &v in field.at(p) {
            w.write_all(&v.to_le_bytes())?;
            w.write_all(&0f64.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Index JSON of a persisted evolution record directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecordIndex {
    pub schema: u32,
    pub times: Vec<f64>,
    pub method: Method,
    pub dt: f64,
    pub snapshots: Vec<String>,
    pub potential: crate::potential::PotentialSpec,
    pub magnetic: Option<MagneticSpec>,
}

/// Persist a record as a directory of dumps plus `index.json`. Tabulated
/// potentials are not serializable and are rejected.
pub fn write_record(dir: &Path, record: &EvolutionRecord) -> Result<()> {
    if matches!(record.potential(), crate::potential::PotentialSpec::CustomTable(_)) {
        return Err(Error::Config(
            "records with tabulated potentials cannot be persisted".into(),
        ));
    }
    std::fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    for (i, snap) in record.snapshots().iter().enumerate() {
        let name = format!("snapshot_{i:05}.bohm");
        write_wavefunction(&dir.join(&name), snap)?;
        names.push(name);
    }
    let index = RecordIndex {
        schema: VERSION,
        times: record.times().to_vec(),
        method: record.method(),
        dt: record.dt(),
        snapshots: names,
        potential: record.potential().clone(),
        magnetic: record.magnetic().cloned(),
    };
    std::fs::write(dir.join("index.json"), serde_json::to_string_pretty(&index)?)?;
    Ok(())
}

pub fn read_record(dir: &Path) -> Result<EvolutionRecord> {
    let index: RecordIndex =
        serde_json::from_str(&std::fs::read_to_string(dir.join("index.json"))?)?;
    let snapshots = index
        .snapshots
        .iter()
        .map(|name| read_wavefunction(&dir.join(name)))
        .collect::<Result<Vec<_>>>()?;
    EvolutionRecord::from_snapshots(
        index.times,
        snapshots,
        index.method,
        index.dt,
        index.potential,
        index.magnetic,
    )
}

fn write_csv_row<W: IoWrite>(w: &mut W, t: f64, q: &[f64], flag: SampleFlag) -> Result<()> {
    write!(w, "{t}")?;
    for v in q {
        write!(w, ",{v}")?;
    }
    writeln!(w, ",{}", flag.as_str())?;
    Ok(())
}

/// Single-trajectory CSV: `t,q1..qD,flag`.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write!(w, "t")?;
    for a in 1..=traj.dim {
        write!(w, ",q{a}")?;
    }
    writeln!(w, ",flag")?;
    for (ti, &t) in traj.times.iter().enumerate() {
        write_csv_row(&mut w, t, traj.position(ti), traj.flags[ti])?;
    }
    w.flush()?;
    Ok(())
}

/// Ensemble CSV with a leading trajectory id: `traj,t,q1..qD,flag`.
pub fn write_ensemble_csv(path: &Path, ensemble: &Ensemble) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write!(w, "traj,t")?;
    for a in 1..=ensemble.dim() {
        write!(w, ",q{a}")?;
    }
    writeln!(w, ",flag")?;
    for i in 0..ensemble.len() {
        for (ti, &t) in ensemble.times().iter().enumerate() {
            write!(w, "{i},")?;
            write_csv_row(&mut w, t, ensemble.position(ti, i), ensemble.flags_at(ti)[i])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// JSON manifest for an ensemble export.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub schema: u32,
    pub n: usize,
    pub dim: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    pub csv: String,
    pub flags_legend: Vec<String>,
}

pub fn write_ensemble(dir: &Path, name: &str, ensemble: &Ensemble) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let csv_name = format!("{name}.csv");
    write_ensemble_csv(&dir.join(&csv_name), ensemble)?;
    let manifest = EnsembleManifest {
        schema: VERSION,
        n: ensemble.len(),
        dim: ensemble.dim(),
        seed: ensemble.seed(),
        times: ensemble.times().to_vec(),
        csv: csv_name,
        flags_legend: vec!["ok".into(), "node".into(), "left".into()],
    };
    std::fs::write(
        dir.join(format!("{name}.json")),
        serde_json::to_string(&manifest)?,
    )?;
    Ok(())
}

/// Exported branch-cut ledger entry (the documented schema keeps only the
/// cell index and the turn count).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JumpLedgerEntry {
    pub index: usize,
    pub multiple: i64,
}

/// Phase dump: S as a scalar field plus the JSON jump ledger.
pub fn write_phase_field(path: &Path, phase: &PhaseField) -> Result<()> {
    write_scalar_field(path, phase.values())?;
    let ledger: Vec<JumpLedgerEntry> = phase
        .branch_jumps()
        .iter()
        .map(|j| JumpLedgerEntry {
            index: j.index,
            multiple: j.multiple,
        })
        .collect();
    std::fs::write(sidecar_path(path), serde_json::to_string(&ledger)?)?;
    Ok(())
}

/// Read back the raw complex samples of any dump (diagnostics, tests).
pub fn read_dump_raw(path: &Path) -> Result<(Vec<usize>, Vec<f64>, u32, Vec<Complex64>)> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let (components, points, extents) = read_header(&mut r)?;
    let total: usize = points.iter().product::<usize>() * components as usize;
    let mut data = Vec::with_capacity(total);
    let mut buf = [0u8; 16];
    for _ in 0..total {
        r.read_exact(&mut buf)?;
        data.push(Complex64::new(
            f64::from_le_bytes(buf[..8].try_into().expect("8 bytes")),
            f64::from_le_bytes(buf[8..].try_into().expect("8 bytes")),
        ));
    }
    Ok((points, extents, components, data))
}

/// Count data rows (excluding the header) of a CSV export.
pub fn csv_row_count(path: &Path) -> Result<usize> {
    let r = BufReader::new(std::fs::File::open(path)?);
    Ok(r.lines().skip(1).count())
}
