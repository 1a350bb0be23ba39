//! Posterior draws: in memory, and on disk as long-format CSV plus a binary
//! sidecar that round-trips every value bit for bit.
//!
//! Directory layout: `params.csv` (id,parameter), `chain_<k>.csv`
//! (iteration,parameter,value), `chain_<k>.bin` (little-endian records of
//! u32 iteration, u32 parameter id, f64 value), `acceptance.csv` and
//! `store.toml`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::engine::{Acceptance, ChainConfig};
use crate::error::{Error, Result};
use crate::model::Variant;

const RECORD: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct DrawStore {
    pub names: Vec<String>,
    /// Per chain, row-major `n_draws × names.len()`.
    pub chains: Vec<Vec<f64>>,
    pub config: ChainConfig,
    pub variant: Variant,
    pub acceptance: Vec<Vec<Acceptance>>,
}

#[derive(Serialize, Deserialize)]
struct StoreMeta {
    format: u32,
    variant: Variant,
    n_chains: usize,
    iterations: usize,
    warmup: usize,
    thinning: usize,
    /// Kept as text: TOML integers are signed.
    seed: String,
    n_params: usize,
    n_draws: usize,
}

#[derive(Serialize, Deserialize)]
struct AcceptanceRow {
    chain: usize,
    block: String,
    joint: Option<f64>,
    scalar: f64,
}

impl DrawStore {
    pub fn n_params(&self) -> usize {
        self.names.len()
    }

    /// Draws per chain.
    pub fn n_draws(&self) -> usize {
        match self.chains.first() {
            Some(c) if !self.names.is_empty() => c.len() / self.names.len(),
            _ => 0,
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, chain: usize, param: usize) -> Vec<f64> {
        self.chains[chain].chunks(self.names.len()).map(|r| r[param]).collect()
    }

    /// One vector per chain.
    pub fn param_chains(&self, param: usize) -> Vec<Vec<f64>> {
        (0..self.chains.len()).map(|c| self.column(c, param)).collect()
    }

    /// All chains concatenated in chain order.
    pub fn pooled(&self, param: usize) -> Vec<f64> {
        self.param_chains(param).concat()
    }

    pub fn pooled_by_name(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .index_of(name)
            .ok_or_else(|| Error::parse("draws", format!("no parameter {name:?}")))?;
        Ok(self.pooled(j))
    }

    pub fn iterations(&self) -> Vec<u32> {
        self.config.retained_iterations()
    }

    /// Long-format CSV of one chain.
    pub fn write_csv<W: Write>(&self, chain: usize, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["iteration", "parameter", "value"])?;
        let p = self.names.len();
        for (row, it) in self.chains[chain].chunks(p).zip(self.iterations()) {
            let it = it.to_string();
            for (name, v) in self.names.iter().zip(row) {
                w.write_record([it.as_str(), name, &v.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io("draws csv", e))?;
        Ok(())
    }

    fn binary(&self, chain: usize) -> Vec<u8> {
        let p = self.names.len();
        let mut out = Vec::with_capacity(self.chains[chain].len() * RECORD);
        for (row, it) in self.chains[chain].chunks(p).zip(self.iterations()) {
            for (id, v) in row.iter().enumerate() {
                out.extend_from_slice(&it.to_le_bytes());
                out.extend_from_slice(&(id as u32).to_le_bytes());
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let create = |name: &str| {
            let path = dir.join(name);
            fs::File::create(&path)
                .map(BufWriter::new)
                .map_err(|e| Error::io(path, e))
        };
        let mut w = csv::Writer::from_writer(create("params.csv")?);
        w.write_record(["id", "parameter"])?;
        for (i, n) in self.names.iter().enumerate() {
            w.write_record([i.to_string().as_str(), n])?;
        }
        w.flush().map_err(|e| Error::io("params.csv", e))?;

        let mut w = csv::Writer::from_writer(create("acceptance.csv")?);
        for (chain, rows) in self.acceptance.iter().enumerate() {
            for a in rows {
                w.serialize(AcceptanceRow {
                    chain,
                    block: a.block.clone(),
                    joint: a.joint,
                    scalar: a.scalar,
                })?;
            }
        }
        w.flush().map_err(|e| Error::io("acceptance.csv", e))?;

        for c in 0..self.chains.len() {
            self.write_csv(c, create(&format!("chain_{c}.csv"))?)?;
            let path = dir.join(format!("chain_{c}.bin"));
            fs::write(&path, self.binary(c)).map_err(|e| Error::io(path, e))?;
        }
        let meta = StoreMeta {
            format: 1,
            variant: self.variant,
            n_chains: self.config.n_chains,
            iterations: self.config.iterations,
            warmup: self.config.warmup,
            thinning: self.config.thinning,
            seed: self.config.seed.to_string(),
            n_params: self.names.len(),
            n_draws: self.n_draws(),
        };
        let text = toml::to_string(&meta).map_err(|e| Error::parse("store.toml", e))?;
        let path = dir.join("store.toml");
        fs::write(&path, text).map_err(|e| Error::io(path, e))
    }

    /// Reads a directory written by [`DrawStore::write_dir`]; values come from the binary files.
    pub fn read_dir(dir: &Path) -> Result<Self> {
        let path = dir.join("store.toml");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: StoreMeta = toml::from_str(&text).map_err(|e| Error::parse("store.toml", e))?;
        let config = ChainConfig {
            n_chains: meta.n_chains,
            iterations: meta.iterations,
            warmup: meta.warmup,
            thinning: meta.thinning,
            seed: meta
                .seed
                .parse()
                .map_err(|e| Error::parse("store.toml", format!("seed: {e}")))?,
        };
        config.validate()?;

        let mut rdr = csv::Reader::from_path(dir.join("params.csv"))?;
        let mut names = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.get(0).and_then(|s| s.parse::<usize>().ok()) != Some(i) {
                return Err(Error::parse("params.csv", format!("row {i}: ids must run 0,1,2,...")));
            }
            names.push(rec.get(1).unwrap_or_default().to_string());
        }
        if names.len() != meta.n_params {
            return Err(Error::parse(
                "params.csv",
                format!("{} names, store.toml says {}", names.len(), meta.n_params),
            ));
        }

        let mut acceptance = vec![Vec::new(); meta.n_chains];
        let path = dir.join("acceptance.csv");
        if path.exists() {
            let mut rdr = csv::Reader::from_path(&path)?;
            for row in rdr.deserialize::<AcceptanceRow>() {
                let row = row?;
                if let Some(slot) = acceptance.get_mut(row.chain) {
                    slot.push(Acceptance {
                        block: row.block,
                        joint: row.joint,
                        scalar: row.scalar,
                    });
                }
            }
        }

        let expected = config.retained_iterations();
        let p = names.len();
        let mut chains = Vec::with_capacity(meta.n_chains);
        for c in 0..meta.n_chains {
            let path = dir.join(format!("chain_{c}.bin"));
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let context = path.display().to_string();
            if bytes.len() != meta.n_draws * p * RECORD || expected.len() != meta.n_draws {
                return Err(Error::parse(
                    context,
                    format!("expected {} draws of {p} parameters", meta.n_draws),
                ));
            }
            let mut values = Vec::with_capacity(meta.n_draws * p);
            for (k, rec) in bytes.chunks_exact(RECORD).enumerate() {
                let it = u32::from_le_bytes(rec[0..4].try_into().unwrap());
                let id = u32::from_le_bytes(rec[4..8].try_into().unwrap()) as usize;
                if it != expected[k / p] || id != k % p {
                    return Err(Error::parse(context, format!("record {k} out of order")));
                }
                values.push(f64::from_le_bytes(rec[8..16].try_into().unwrap()));
            }
            chains.push(values);
        }
        Ok(DrawStore {
            names,
            chains,
            config,
            variant: meta.variant,
            acceptance,
        })
    }
}
