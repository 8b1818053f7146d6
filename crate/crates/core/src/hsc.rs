//! HSC v1 cube container and spectra CSV files.
//!
//! HSC v1 layout:
//!   line 1: `HSC1 <H> <W> <B> <kind>`      (kind: `raw` | `reflectance`)
//!   line 2: B ASCII wavelengths in nm, space separated
//!   then:   H*W*B little-endian IEEE-754 f32, band-sequential
//!
//! Spectra CSV: header `label,<nm>,<nm>,...`; one instance per data row.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::{CubeKind, Hypercube, Spectrum, WavelengthAxis};

pub fn write_cube(path: &Path, cube: &Hypercube) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "HSC1 {} {} {} {}",
        cube.height(),
        cube.width(),
        cube.bands(),
        cube.kind().as_str()
    )?;
    let wavelengths: Vec<String> = cube.axis().values().iter().map(|v| format!("{v}")).collect();
    writeln!(w, "{}", wavelengths.join(" "))?;
    let mut bytes = Vec::with_capacity(cube.data().len() * 4);
    for v in cube.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

pub fn read_cube(path: &Path) -> Result<Hypercube> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = String::new();
    r.read_line(&mut header)?;
    let fields: Vec<&str> = header.trim_end().split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "HSC1" {
        return Err(Error::data(format!(
            "{}: not an HSC v1 file (bad header)",
            path.display()
        )));
    }
    let parse_dim = |s: &str, what: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::data(format!("{}: bad {what} '{s}'", path.display())))
    };
    let height = parse_dim(fields[1], "height")?;
    let width = parse_dim(fields[2], "width")?;
    let bands = parse_dim(fields[3], "band count")?;
    let kind = CubeKind::parse(fields[4])?;

    let mut axis_line = String::new();
    r.read_line(&mut axis_line)?;
    let wavelengths: Vec<f64> = axis_line
        .trim_end()
        .split_whitespace()
        .map(|s| {
            s.parse()
                .map_err(|_| Error::data(format!("{}: bad wavelength '{s}'", path.display())))
        })
        .collect::<Result<_>>()?;
    if wavelengths.len() != bands {
        return Err(Error::data(format!(
            "{}: header says {bands} bands but axis line has {}",
            path.display(),
            wavelengths.len()
        )));
    }
    let axis = WavelengthAxis::new(wavelengths)?;

    let voxels = height * width * bands;
    let mut bytes = vec![0u8; voxels * 4];
    r.read_exact(&mut bytes).map_err(|e| {
        Error::data(format!(
            "{}: truncated voxel payload ({e})",
            path.display()
        ))
    })?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Hypercube::new(height, width, kind, axis, data)
}

/// Write labeled spectra as CSV (`label,<nm>,...` header).
pub fn write_spectra_csv(path: &Path, axis: &WavelengthAxis, rows: &[(String, Vec<f64>)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let header: Vec<String> = std::iter::once("label".to_string())
        .chain(axis.values().iter().map(|v| format!("{v}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (label, values) in rows {
        if values.len() != axis.len() {
            return Err(Error::shape(format!(
                "spectrum for '{label}' has {} values, axis has {}",
                values.len(),
                axis.len()
            )));
        }
        let cells: Vec<String> = std::iter::once(label.clone())
            .chain(values.iter().map(|v| format!("{v}")))
            .collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Read labeled spectra from CSV; returns the axis and (label, values) rows.
pub fn read_spectra_csv(path: &Path) -> Result<(WavelengthAxis, Vec<(String, Vec<f64>)>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::data(format!("{}: empty spectra CSV", path.display())))??;
    let mut cols = header.trim_end().split(',');
    match cols.next() {
        Some("label") => {}
        _ => {
            return Err(Error::data(format!(
                "{}: spectra CSV header must start with 'label'",
                path.display()
            )))
        }
    }
    let wavelengths: Vec<f64> = cols
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::data(format!("{}: bad wavelength '{s}'", path.display())))
        })
        .collect::<Result<_>>()?;
    let axis = WavelengthAxis::new(wavelengths)?;

    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let label = cells
            .next()
            .ok_or_else(|| Error::data(format!("{}: row {} missing label", path.display(), i + 2)))?
            .trim()
            .to_string();
        let values: Vec<f64> = cells
            .map(|s| {
                s.trim().parse().map_err(|_| {
                    Error::data(format!(
                        "{}: row {} has bad value '{s}'",
                        path.display(),
                        i + 2
                    ))
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != axis.len() {
            return Err(Error::data(format!(
                "{}: row {} has {} values, expected {}",
                path.display(),
                i + 2,
                values.len(),
                axis.len()
            )));
        }
        rows.push((label, values));
    }
    Ok((axis, rows))
}

/// Read only the wavelength axis of a spectra CSV or HSC cube file.
pub fn read_axis(path: &Path) -> Result<WavelengthAxis> {
    let name = path.to_string_lossy();
    if name.ends_with(".hsc") {
        return Ok(read_cube(path)?.axis().clone());
    }
    let reader = BufReader::new(File::open(path)?);
    let header = reader
        .lines()
        .next()
        .ok_or_else(|| Error::data(format!("{}: empty file", path.display())))??;
    let mut cols = header.trim_end().split(',');
    if cols.next() != Some("label") {
        return Err(Error::data(format!(
            "{}: expected a spectra CSV header",
            path.display()
        )));
    }
    let wavelengths: Vec<f64> = cols
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::data(format!("{}: bad wavelength '{s}'", path.display())))
        })
        .collect::<Result<_>>()?;
    WavelengthAxis::new(wavelengths)
}

/// Convenience: one spectrum as a single-row CSV.
pub fn write_spectrum_csv(path: &Path, label: &str, spectrum: &Spectrum) -> Result<()> {
    write_spectra_csv(
        path,
        spectrum.axis(),
        &[(label.to_string(), spectrum.values().to_vec())],
    )
}
