use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{load_matrix, Matrix, MatrixFormat};
use crate::error::{Error, Result};

/// Side length of the diagonal blocks of `BlockDiagonal` instances.
pub const BLOCK_SIZE: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum InstanceClass {
    /// i.i.d. entries uniform on `[0, 1)`.
    Uniform,
    /// Independent 5x5 `Uniform` blocks on the diagonal, last block truncated.
    BlockDiagonal,
    /// i.i.d. 0/1 entries with `P(1) = p`.
    Bernoulli { p: f64 },
    /// `a_ij = 1` iff `i + j <= n + 2` (1-based).
    Staircase,
    /// Read from disk; format chosen by extension.
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    #[serde(flatten)]
    pub class: InstanceClass,
    #[serde(default)]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

impl InstanceSpec {
    pub fn new(class: InstanceClass, n: usize, seed: u64) -> Self {
        InstanceSpec { class, n, seed }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.class {
            InstanceClass::File { .. } => Ok(()),
            InstanceClass::Bernoulli { p } if !(0.0..=1.0).contains(p) => {
                Err(Error::Config(format!("bernoulli p = {p} outside [0, 1]")))
            }
            _ if self.n == 0 => Err(Error::Config("matrix order must be positive".into())),
            _ => Ok(()),
        }
    }

    /// Short label such as `bernoulli(0.25)-20-s7`.
    pub fn label(&self) -> String {
        match &self.class {
            InstanceClass::Uniform => format!("uniform-{}-s{}", self.n, self.seed),
            InstanceClass::BlockDiagonal => format!("block-diagonal-{}-s{}", self.n, self.seed),
            InstanceClass::Bernoulli { p } => format!("bernoulli({p})-{}-s{}", self.n, self.seed),
            InstanceClass::Staircase => format!("staircase-{}", self.n),
            InstanceClass::File { path } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
        }
    }
}

/// Builds the instance described by `spec`. A pure function of `spec`.
pub fn generate(spec: &InstanceSpec) -> Result<Matrix> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let m = match &spec.class {
        InstanceClass::Uniform => {
            let data = (0..n * n).map(|_| rng.random::<f64>()).collect();
            Matrix::new(n, n, data)?
        }
        InstanceClass::BlockDiagonal => {
            let mut m = Matrix::zeros(n, n);
            for start in (0..n).step_by(BLOCK_SIZE) {
                let end = (start + BLOCK_SIZE).min(n);
                for i in start..end {
                    for j in start..end {
                        m.set(i, j, rng.random::<f64>());
                    }
                }
            }
            m
        }
        InstanceClass::Bernoulli { p } => {
            let data = (0..n * n)
                .map(|_| if rng.random_bool(*p) { 1.0 } else { 0.0 })
                .collect();
            Matrix::new(n, n, data)?
        }
        InstanceClass::Staircase => {
            let mut m = Matrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    // 1-based: i + j <= n + 2  <=>  0-based: i + j <= n
                    if i + j <= n {
                        m.set(i, j, 1.0);
                    }
                }
            }
            m
        }
        InstanceClass::File { path } => load_matrix(path, MatrixFormat::from_path(path))?,
    };
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn staircase_three() {
        let m = generate(&InstanceSpec::new(InstanceClass::Staircase, 3, 0)).unwrap();
        let want = Matrix::from_rows(&[[1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [1.0, 1.0, 0.0]]).unwrap();
        assert_eq!(m, want);
    }

    #[test]
    fn staircase_row_counts() {
        for n in 1..12 {
            let m = generate(&InstanceSpec::new(InstanceClass::Staircase, n, 0)).unwrap();
            for i in 0..n {
                let ones = m.row(i).iter().filter(|&&v| v == 1.0).count();
                // row i (1-based) has min(n, n + 2 - i) ones
                let i1 = i + 1;
                assert_eq!(ones, n.min(n + 2 - i1), "n={n} row={i1}");
            }
        }
    }

    #[test]
    fn bernoulli_one_is_all_ones() {
        let m = generate(&InstanceSpec::new(InstanceClass::Bernoulli { p: 1.0 }, 2, 3)).unwrap();
        assert_eq!(m, Matrix::filled(2, 1.0));
        let spec = InstanceSpec::new(InstanceClass::Bernoulli { p: 1.5 }, 2, 3);
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn block_diagonal_zero_pattern() {
        let m = generate(&InstanceSpec::new(InstanceClass::BlockDiagonal, 7, 11)).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                let same_block = (i < 5) == (j < 5);
                assert_eq!(m.get(i, j) != 0.0, same_block, "({i},{j})");
            }
        }
    }

    #[test]
    fn same_seed_same_matrix() {
        let spec = InstanceSpec::new(InstanceClass::Uniform, 6, 42);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = InstanceSpec::new(InstanceClass::Uniform, 6, 43);
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn labels() {
        let spec = InstanceSpec::new(InstanceClass::Bernoulli { p: 0.25 }, 20, 1);
        assert_eq!(spec.label(), "bernoulli(0.25)-20-s1");
        assert_eq!(InstanceSpec::new(InstanceClass::Staircase, 30, 0).label(), "staircase-30");
    }
}
