//! Particle fields: positions, quadrature weights and carried values.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::CartesianGrid;

/// First line of every particle snapshot file.
pub const SNAPSHOT_TAG: &str = "# partreg-particles v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Placement {
    CellCenter,
    /// Uniformly random inside each cell, from a ChaCha8 stream.
    RandomInCell { seed: u64 },
}

/// How particles are generated relative to the spline grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleLayout {
    pub placement: Placement,
    /// Ratio `h/σ` of particle spacing to spline mesh width.
    pub d: f64,
}

impl ParticleLayout {
    pub fn new(placement: Placement, d: f64) -> Result<Self> {
        if !(d > 0.0 && d < 1.0 + 1e-12) {
            return Err(Error::Config(format!("particle ratio d = {d} not in (0, 1]")));
        }
        Ok(Self { placement, d })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleField<const D: usize> {
    pub positions: Vec<[f64; D]>,
    pub weights: Vec<f64>,
    /// Carried values, `components` per particle.
    pub values: Vec<f64>,
    pub components: usize,
    pub h: f64,
    /// Box the particles live in; periodic axes wrap, others must not be left.
    pub tracking: CartesianGrid<D>,
    pub born: Vec<[f64; D]>,
}

/// One particle per cell of the `h`-grid of `tracking`, with weight `h^D` and
/// values from `initial(x, out)`.
pub fn init_particles<const D: usize, F>(
    tracking: &CartesianGrid<D>,
    h: f64,
    placement: Placement,
    components: usize,
    initial: F,
) -> Result<ParticleField<D>>
where
    F: Fn(&[f64; D], &mut [f64]),
{
    if components == 0 {
        return Err(Error::Config("particles need at least one value component".into()));
    }
    let grid = CartesianGrid::with_spacing(tracking.lo(), tracking.hi(), h, tracking.periodic())?;
    let count = grid.cell_count();
    let widths = grid.widths();
    let mut rng = match placement {
        Placement::RandomInCell { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        Placement::CellCenter => None,
    };
    let mut positions = Vec::with_capacity(count);
    for c in 0..count {
        let lo = grid.cell_lo(grid.cell_multi_index(c));
        let x: [f64; D] = match rng.as_mut() {
            Some(r) => std::array::from_fn(|k| lo[k] + r.random::<f64>() * widths[k]),
            None => std::array::from_fn(|k| lo[k] + 0.5 * widths[k]),
        };
        positions.push(x);
    }
    let mut values = vec![0.0; count * components];
    for (x, v) in positions.iter().zip(values.chunks_mut(components)) {
        initial(x, v);
    }
    Ok(ParticleField {
        born: positions.clone(),
        positions,
        weights: vec![grid.cell_volume(); count],
        values,
        components,
        h,
        tracking: *tracking,
    })
}

impl<const D: usize> ParticleField<D> {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.components..(i + 1) * self.components]
    }

    /// Keeps only particles whose birth position satisfies `keep`.
    pub fn retain_born(&mut self, keep: impl Fn(&[f64; D]) -> bool) {
        let c = self.components;
        let mask: Vec<bool> = self.born.iter().map(&keep).collect();
        let mut idx = 0;
        self.positions.retain(|_| {
            idx += 1;
            mask[idx - 1]
        });
        idx = 0;
        self.born.retain(|_| {
            idx += 1;
            mask[idx - 1]
        });
        idx = 0;
        self.weights.retain(|_| {
            idx += 1;
            mask[idx - 1]
        });
        idx = 0;
        self.values.retain(|_| {
            idx += 1;
            mask[(idx - 1) / c]
        });
    }

    /// `Σ_i w_i u_i` per component.
    pub fn weighted_sum(&self) -> Vec<f64> {
        (0..self.components)
            .map(|k| {
                let terms: Vec<f64> = (0..self.len()).map(|i| self.weights[i] * self.values[i * self.components + k]).collect();
                crate::quadrature::pairwise_sum(&terms)
            })
            .collect()
    }

    pub fn total_weight(&self) -> f64 {
        crate::quadrature::pairwise_sum(&self.weights)
    }

    /// Wraps periodic axes and checks the others stay inside the tracking box.
    pub fn wrap_and_check(&mut self) -> Result<()> {
        for (i, x) in self.positions.iter_mut().enumerate() {
            if !x.iter().all(|v| v.is_finite()) || !self.tracking.contains(x) {
                return Err(Error::ParticleEscaped { index: i, position: x.to_vec() });
            }
            self.tracking.wrap(x);
        }
        Ok(())
    }

    /// Writes a version-tagged CSV snapshot with header `id,x0..,w,u0..`.
    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        writeln!(out, "{SNAPSHOT_TAG}")?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["id".to_string()];
        header.extend((0..D).map(|k| format!("x{k}")));
        header.push("w".into());
        header.extend((0..self.components).map(|k| format!("u{k}")));
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..self.len() {
            let mut rec = vec![i.to_string()];
            rec.extend(self.positions[i].iter().map(|v| v.to_string()));
            rec.push(self.weights[i].to_string());
            rec.extend(self.value(i).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Contents of a snapshot file.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<const D: usize> {
    pub positions: Vec<[f64; D]>,
    pub weights: Vec<f64>,
    pub values: Vec<f64>,
    pub components: usize,
}

pub fn read_snapshot<const D: usize>(path: &Path) -> Result<Snapshot<D>> {
    let mut reader = BufReader::new(std::fs::File::open(path)?);
    let mut tag = String::new();
    reader.read_line(&mut tag)?;
    if tag.trim_end() != SNAPSHOT_TAG {
        return Err(Error::Io(format!("unsupported snapshot version line {:?}", tag.trim_end())));
    }
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.len() < D + 3 || &header[0] != "id" || &header[D + 1] != "w" {
        return Err(Error::Io(format!("snapshot header does not match dimension {D}")));
    }
    let components = header.len() - D - 2;
    let mut snap = Snapshot { positions: Vec::new(), weights: Vec::new(), values: Vec::new(), components };
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let num = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|e| Error::Io(format!("bad number {:?}: {e}", &rec[i])))
        };
        let mut x = [0.0; D];
        for (k, xk) in x.iter_mut().enumerate() {
            *xk = num(1 + k)?;
        }
        snap.positions.push(x);
        snap.weights.push(num(D + 1)?);
        for k in 0..components {
            snap.values.push(num(D + 2 + k)?);
        }
    }
    Ok(snap)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}
