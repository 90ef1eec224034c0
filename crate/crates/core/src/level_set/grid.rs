use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::BoxDomain;
use crate::error::{Error, FieldError, Result};
use crate::field_models::Field;
use crate::SCHEMA_VERSION;

/// Field values and Jacobians on the tensor lattice of a box.
///
/// Node `(i_0, …, i_{D-1})` sits at `domain.node(k, i_k, resolution)` and has
/// flat index `i_0 + resolution·i_1 + …`. Nodes where the field is singular
/// hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSample {
    pub domain: BoxDomain,
    pub resolution: usize,
    pub output_dim: usize,
    pub values: Vec<f64>,
    pub jacobians: Vec<f64>,
    /// Seed of the realization the lattice was taken from, if any.
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    schema_version: u32,
    input_dim: usize,
    output_dim: usize,
    resolution: usize,
    #[serde(rename = "box")]
    domain: BoxDomain,
    spacing: Vec<f64>,
    layout: String,
    seed: Option<u64>,
}

const LAYOUT: &str = "f64le values then jacobians, first axis fastest";

impl GridSample {
    pub fn sample<F: Field + ?Sized>(
        field: &F,
        domain: &BoxDomain,
        resolution: usize,
        seed: Option<u64>,
    ) -> Result<Self> {
        domain.validate()?;
        if resolution < 2 {
            return Err(Error::Config(format!("grid resolution must be ≥ 2, got {resolution}")));
        }
        let dim = domain.dim();
        if field.input_dim() != dim {
            return Err(FieldError::Dimension {
                expected: field.input_dim(),
                got: dim,
            }
            .into());
        }
        let d = field.output_dim();
        let axes: Vec<Vec<f64>> = (0..dim)
            .map(|k| (0..resolution).map(|i| domain.node(k, i, resolution)).collect())
            .collect();
        let total = resolution.pow(dim as u32);
        let mut values = vec![0.0; total * d];
        let mut jacobians = vec![0.0; total * d * dim];
        if let Err(e) = field.fill_lattice(&axes, &mut values, &mut jacobians) {
            if !matches!(e, FieldError::Singular(_)) {
                return Err(e.into());
            }
            // fall back node by node, marking singular nodes
            let mut t = vec![0.0; dim];
            for node in 0..total {
                let mut rem = node;
                for (k, axis) in axes.iter().enumerate() {
                    t[k] = axis[rem % resolution];
                    rem /= resolution;
                }
                let (v, j) = (
                    &mut values[node * d..(node + 1) * d],
                    &mut jacobians[node * d * dim..(node + 1) * d * dim],
                );
                match field.eval_into(&t, v, j) {
                    Ok(()) => {}
                    Err(FieldError::Singular(_)) => {
                        v.fill(f64::NAN);
                        j.fill(f64::NAN);
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
        Ok(Self {
            domain: domain.clone(),
            resolution,
            output_dim: d,
            values,
            jacobians,
            seed,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.domain.side(axis) / (self.resolution - 1) as f64
    }

    pub fn node_count(&self) -> usize {
        self.values.len() / self.output_dim
    }

    pub fn value(&self, node: usize) -> &[f64] {
        &self.values[node * self.output_dim..(node + 1) * self.output_dim]
    }

    pub fn jacobian(&self, node: usize) -> &[f64] {
        let s = self.output_dim * self.input_dim();
        &self.jacobians[node * s..(node + 1) * s]
    }

    pub fn coordinates(&self, node: usize) -> Vec<f64> {
        let mut rem = node;
        (0..self.input_dim())
            .map(|k| {
                let i = rem % self.resolution;
                rem /= self.resolution;
                self.domain.node(k, i, self.resolution)
            })
            .collect()
    }

    /// Writes the raw lattice to `path` and a JSON header to
    /// `path` + `.json`.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for x in self.values.iter().chain(&self.jacobians) {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()?;
        let header = Header {
            schema_version: SCHEMA_VERSION,
            input_dim: self.input_dim(),
            output_dim: self.output_dim,
            resolution: self.resolution,
            domain: self.domain.clone(),
            spacing: (0..self.input_dim()).map(|k| self.spacing(k)).collect(),
            layout: LAYOUT.to_string(),
            seed: self.seed,
        };
        std::fs::write(sidecar(path), serde_json::to_string_pretty(&header)?)?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let header: Header = serde_json::from_str(&std::fs::read_to_string(sidecar(path))?)?;
        if header.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported grid schema_version {}",
                header.schema_version
            )));
        }
        header.domain.validate()?;
        if header.domain.dim() != header.input_dim || header.resolution < 2 {
            return Err(Error::Config("inconsistent grid header".into()));
        }
        let total = header.resolution.pow(header.input_dim as u32);
        let nv = total * header.output_dim;
        let nj = nv * header.input_dim;
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        if bytes.len() != 8 * (nv + nj) {
            return Err(Error::Config(format!(
                "grid file holds {} bytes, header implies {}",
                bytes.len(),
                8 * (nv + nj)
            )));
        }
        let mut all = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));
        let values = all.by_ref().take(nv).collect();
        let jacobians = all.collect();
        Ok(Self {
            domain: header.domain,
            resolution: header.resolution,
            output_dim: header.output_dim,
            values,
            jacobians,
            seed: header.seed,
        })
    }
}

fn sidecar(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}
