use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const METRICS_HEADER: &str = "epoch,loss_pde,loss_bc,loss_ic,loss_data,rel_mse_val_mean,rel_mse_val_std,lr,wall_s";

/// One training epoch. Losses are means over the epoch's samples; relative
/// errors are ratios, `NaN` when no validation ran.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub loss_pde: f64,
    pub loss_bc: f64,
    pub loss_ic: f64,
    pub loss_data: f64,
    #[serde(with = "nan_as_null")]
    pub rel_mse_val_mean: f64,
    #[serde(with = "nan_as_null")]
    pub rel_mse_val_std: f64,
    pub lr: f64,
    pub wall_s: f64,
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

impl MetricsRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.epoch,
            self.loss_pde,
            self.loss_bc,
            self.loss_ic,
            self.loss_data,
            self.rel_mse_val_mean,
            self.rel_mse_val_std,
            self.lr,
            self.wall_s
        )
    }

    pub fn parse_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 9 {
            return Err(Error::Config(format!("metrics row has {} fields, expected 9", f.len())));
        }
        let x = |i: usize| -> Result<f64> {
            f[i].parse().map_err(|_| Error::Config(format!("bad metrics value `{}`", f[i])))
        };
        Ok(Self {
            epoch: f[0].parse().map_err(|_| Error::Config(format!("bad epoch `{}`", f[0])))?,
            loss_pde: x(1)?,
            loss_bc: x(2)?,
            loss_ic: x(3)?,
            loss_data: x(4)?,
            rel_mse_val_mean: x(5)?,
            rel_mse_val_std: x(6)?,
            lr: x(7)?,
            wall_s: x(8)?,
        })
    }
}

pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut s = String::with_capacity(64 * (records.len() + 1));
    let _ = writeln!(s, "{METRICS_HEADER}");
    for r in records {
        let _ = writeln!(s, "{}", r.csv_row());
    }
    s
}

pub fn write_metrics(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, metrics_csv(records))?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(Error::format(path, "unexpected metrics header"));
    }
    lines.filter(|l| !l.trim().is_empty()).map(MetricsRecord::parse_row).collect()
}
