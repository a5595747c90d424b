//! Diagonal Q-Wiener noise on the sine basis.
//!
//! `W(t) = Σ_{k ≤ K_W} √q_k e_k β_k(t)`, sampled as Brownian increments on a
//! dyadic master grid of `2^J` steps over `[0, T]`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{basis_value, grid_points, lambda, RealGrid};

/// Eigenvalues of `Q` on `e_1..e_K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    q: Vec<f64>,
    decay_exponent: Option<f64>,
}

impl NoiseModel {
    /// Smallest power-law exponent for which `Q^{1/2}` maps into `H²`.
    pub const MIN_DECAY_EXPONENT: f64 = 5.0;

    /// `q_k = k^{-r}`, `k = 1..=k_modes`; requires `r > 5`.
    pub fn power_law(k_modes: usize, r: f64) -> Result<Self> {
        if k_modes == 0 {
            return Err(Error::Domain("noise needs at least one mode".into()));
        }
        if !(r > Self::MIN_DECAY_EXPONENT) || !r.is_finite() {
            return Err(Error::Domain(format!(
                "decay exponent must exceed {} for an H²-valued noise, got {r}",
                Self::MIN_DECAY_EXPONENT
            )));
        }
        let q = (1..=k_modes).map(|k| (k as f64).powf(-r)).collect();
        Ok(Self {
            q,
            decay_exponent: Some(r),
        })
    }

    pub fn from_eigenvalues(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::Domain("noise needs at least one mode".into()));
        }
        if let Some(k) = q.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain(format!(
                "q_{} = {} must be finite and nonnegative",
                k + 1,
                q[k]
            )));
        }
        Ok(Self {
            q,
            decay_exponent: None,
        })
    }

    pub fn k_modes(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn decay_exponent(&self) -> Option<f64> {
        self.decay_exponent
    }

    /// `Tr Q = Σ q_k`.
    pub fn trace(&self) -> f64 {
        self.q.iter().sum()
    }

    /// `‖Q^{1/2}‖²_{L(H, H²)}` at the truncation: `Σ q_k (1 + λ_k²)`.
    pub fn h2_trace(&self) -> f64 {
        self.q
            .iter()
            .enumerate()
            .map(|(i, q)| q * (1.0 + lambda(i + 1).powi(2)))
            .sum()
    }

    /// `F_Q(x_j) = Σ_k q_k e_k(x_j)²`. Diagnostic only; the scheme never applies it.
    pub fn f_q_field(&self, n_grid: usize) -> RealGrid {
        let values = grid_points(n_grid)
            .into_iter()
            .map(|x| {
                self.q
                    .iter()
                    .enumerate()
                    .map(|(i, q)| {
                        let e = basis_value(i + 1, x);
                        q * e * e
                    })
                    .sum()
            })
            .collect();
        RealGrid::new(values)
    }
}

/// Rectangle-rule `∫F_Q` against the partial sum `Σ q_k` it should reproduce.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FqCheck {
    pub quadrature: f64,
    pub partial_sum: f64,
    pub abs_diff: f64,
}

pub fn check_f_q(model: &NoiseModel, n_grid: usize) -> FqCheck {
    let quadrature = model.f_q_field(n_grid).integral();
    let partial_sum = model.trace();
    FqCheck {
        quadrature,
        partial_sum,
        abs_diff: (quadrature - partial_sum).abs(),
    }
}

/// Cached `√q_k e_k(x_j)` table for turning Brownian increments into fields.
#[derive(Clone, Debug)]
pub struct NoiseProjector {
    n_grid: usize,
    k_modes: usize,
    // row k holds √q_k e_k(x_j) for all j
    table: Vec<f64>,
}

impl NoiseProjector {
    pub fn new(model: &NoiseModel, n_grid: usize) -> Self {
        let x = grid_points(n_grid);
        let mut table = Vec::with_capacity(model.k_modes() * n_grid);
        for (i, q) in model.q.iter().enumerate() {
            let s = q.sqrt();
            table.extend(x.iter().map(|&xj| s * basis_value(i + 1, xj)));
        }
        Self {
            n_grid,
            k_modes: model.k_modes(),
            table,
        }
    }

    pub fn n_grid(&self) -> usize {
        self.n_grid
    }

    /// `Σ_k √q_k e_k(x_j) db_k`.
    pub fn field(&self, db: &[f64]) -> RealGrid {
        assert_eq!(db.len(), self.k_modes, "increment vector length");
        let mut out = vec![0.0; self.n_grid];
        for (row, &b) in self.table.chunks_exact(self.n_grid).zip(db) {
            if b == 0.0 {
                continue;
            }
            for (o, r) in out.iter_mut().zip(row) {
                *o += r * b;
            }
        }
        RealGrid::new(out)
    }
}

/// Header of a dumped path, written as JSON next to the CSV body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathHeader {
    #[serde(rename = "J")]
    pub j_levels: u32,
    #[serde(rename = "K_W")]
    pub k_modes: usize,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub seed: u64,
    pub sample_index: u64,
}

/// Brownian increments on the master grid, row-major `(step, mode)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WienerPath {
    header: PathHeader,
    increments: Vec<f64>,
}

/// Largest supported master-grid exponent.
pub const MAX_LEVELS: u32 = 30;

fn check_dims(j_levels: u32, k_modes: usize, t_final: f64) -> Result<()> {
    if !(1..=MAX_LEVELS).contains(&j_levels) {
        return Err(Error::Domain(format!(
            "master grid exponent J must lie in 1..={MAX_LEVELS}, got {j_levels}"
        )));
    }
    if k_modes < 1 {
        return Err(Error::Domain("K_W must be at least 1".into()));
    }
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::Domain(format!("T must be positive and finite, got {t_final}")));
    }
    Ok(())
}

/// Generator for a `(seed, sample_index)` pair. ChaCha20 with the sample
/// index as stream id, so each sample is an independent, scheduling-free stream.
pub fn sample_rng(seed: u64, sample_index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(sample_index);
    rng
}

impl WienerPath {
    pub fn sample(
        seed: u64,
        sample_index: u64,
        j_levels: u32,
        k_modes: usize,
        t_final: f64,
    ) -> Result<Self> {
        check_dims(j_levels, k_modes, t_final)?;
        let n = 1usize << j_levels;
        let sd = (t_final / n as f64).sqrt();
        let mut rng = sample_rng(seed, sample_index);
        let increments = (0..n * k_modes)
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Ok(Self {
            header: PathHeader {
                j_levels,
                k_modes,
                t_final,
                seed,
                sample_index,
            },
            increments,
        })
    }

    /// All-zero path (noise switched off).
    pub fn zeros(j_levels: u32, k_modes: usize, t_final: f64) -> Result<Self> {
        check_dims(j_levels, k_modes, t_final)?;
        Ok(Self {
            header: PathHeader {
                j_levels,
                k_modes,
                t_final,
                seed: 0,
                sample_index: 0,
            },
            increments: vec![0.0; (1usize << j_levels) * k_modes],
        })
    }

    pub fn from_parts(header: PathHeader, increments: Vec<f64>) -> Result<Self> {
        check_dims(header.j_levels, header.k_modes, header.t_final)?;
        let want = (1usize << header.j_levels) * header.k_modes;
        if increments.len() != want {
            return Err(Error::Domain(format!(
                "path body has {} entries, header implies {want}",
                increments.len()
            )));
        }
        if increments.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("path increments must be finite".into()));
        }
        Ok(Self { header, increments })
    }

    pub fn header(&self) -> &PathHeader {
        &self.header
    }

    pub fn j_levels(&self) -> u32 {
        self.header.j_levels
    }

    pub fn k_modes(&self) -> usize {
        self.header.k_modes
    }

    pub fn t_final(&self) -> f64 {
        self.header.t_final
    }

    pub fn n_steps(&self) -> usize {
        1usize << self.header.j_levels
    }

    /// Master step `h = T / 2^J`.
    pub fn h(&self) -> f64 {
        self.header.t_final / self.n_steps() as f64
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Increments of master step `i` for every mode.
    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.header.k_modes;
        &self.increments[i * k..(i + 1) * k]
    }

    /// `β_k(t_{i_to}) − β_k(t_{i_from})` for every mode.
    pub fn brownian_increment(&self, i_from: usize, i_to: usize) -> Result<Vec<f64>> {
        if i_from >= i_to || i_to > self.n_steps() {
            return Err(Error::Domain(format!(
                "grid interval [{i_from}, {i_to}] invalid for {} steps",
                self.n_steps()
            )));
        }
        let mut acc = self.row(i_from).to_vec();
        for i in i_from + 1..i_to {
            for (a, v) in acc.iter_mut().zip(self.row(i)) {
                *a += v;
            }
        }
        Ok(acc)
    }

    /// `β_k(t_i)` for `i = 0..=2^J`, mode-major.
    pub fn partial_sums(&self, k: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_steps() + 1);
        let mut acc = 0.0;
        out.push(acc);
        for i in 0..self.n_steps() {
            acc += self.row(i)[k];
            out.push(acc);
        }
        out
    }

    /// Sums adjacent pairs of steps, giving the same path on `2^{J-1}` steps.
    pub fn coarsened(&self) -> Result<Self> {
        if self.header.j_levels < 2 {
            return Err(Error::Domain("cannot coarsen below J = 1".into()));
        }
        let k = self.header.k_modes;
        let mut increments = Vec::with_capacity(self.increments.len() / 2);
        for pair in self.increments.chunks_exact(2 * k) {
            increments.extend((0..k).map(|m| pair[m] + pair[k + m]));
        }
        Ok(Self {
            header: PathHeader {
                j_levels: self.header.j_levels - 1,
                ..self.header.clone()
            },
            increments,
        })
    }

    /// Writes `<stem>.json` (header) and `<stem>.csv` (one row per master step).
    pub fn write_dump(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        let head = dir.join(format!("{stem}.json"));
        let body = dir.join(format!("{stem}.csv"));
        let file = File::create(&head).map_err(|e| Error::io(&head, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, &self.header).map_err(|e| Error::format(&head, e))?;
        w.flush().map_err(|e| Error::io(&head, e))?;

        let mut csv = csv::Writer::from_path(&body).map_err(|e| Error::format(&body, e))?;
        let names: Vec<String> = (1..=self.k_modes()).map(|k| format!("dbeta_{k}")).collect();
        csv.write_record(&names).map_err(|e| Error::format(&body, e))?;
        for i in 0..self.n_steps() {
            csv.serialize(self.row(i)).map_err(|e| Error::format(&body, e))?;
        }
        csv.flush().map_err(|e| Error::io(&body, e))?;
        Ok((head, body))
    }

    pub fn read_dump(dir: &Path, stem: &str) -> Result<Self> {
        let head = dir.join(format!("{stem}.json"));
        let body = dir.join(format!("{stem}.csv"));
        let file = File::open(&head).map_err(|e| Error::io(&head, e))?;
        let header: PathHeader =
            serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::format(&head, e))?;
        let mut rdr = csv::Reader::from_path(&body).map_err(|e| Error::format(&body, e))?;
        let mut increments = Vec::new();
        for rec in rdr.deserialize::<Vec<f64>>() {
            let row = rec.map_err(|e| Error::format(&body, e))?;
            if row.len() != header.k_modes {
                return Err(Error::format(&body, format!("row has {} columns", row.len())));
            }
            increments.extend(row);
        }
        Self::from_parts(header, increments).map_err(|e| Error::format(&body, e))
    }
}
