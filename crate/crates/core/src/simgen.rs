//! Synthetic data for the five simulation models.
//!
//! * I: `X ~ N(0, I)`, binary `Y` from the logistic law in `β₁ᵀX`.
//! * II: `X ~ N(0, Σ)`, `Y = 1/(0.5 + (β₁ᵀX + 1)²) + ε`.
//! * III: `X ~ N(0, I)`, `Y = β₁ᵀX / ((β₂ᵀX)³ + 1) + ε`.
//! * IV: `X ~ N(0, Σ)`, `Y = sin(β₁ᵀX) exp(β₂ᵀX + ε)`.
//! * V: `Y ~ N(0, 1)`, `X = Γ (Y, Y²)ᵀ + ε` with `Γ = (β₁, β₂)`, `ε ~ N(0, I)`.
//!
//! `Σ_{ij} = 0.5^{|i−j|}`.

use serde::{Deserialize, Serialize};

use crate::data::{LabeledDataset, Slicing};
use crate::error::{invalid, Result};
use crate::numerics::{gaussian_matrix, sym_eig, Matrix, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    I,
    II,
    III,
    IV,
    V,
}

impl Model {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Some(Model::I),
            "II" | "2" => Some(Model::II),
            "III" | "3" => Some(Model::III),
            "IV" | "4" => Some(Model::IV),
            "V" | "5" => Some(Model::V),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::I => "I",
            Model::II => "II",
            Model::III => "III",
            Model::IV => "IV",
            Model::V => "V",
        }
    }

    pub fn structure_dim(self) -> usize {
        match self {
            Model::I | Model::II => 1,
            _ => 2,
        }
    }

    pub fn is_binary(self) -> bool {
        self == Model::I
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaStructure {
    Identity,
    /// `0.5^{|i−j|}`.
    Ar1,
}

/// Response law for model I.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model1Law {
    /// `Y ~ Bernoulli(1 / (1 + exp(−β₁ᵀX)))`.
    #[default]
    Bernoulli,
    /// `Y = 1(β₁ᵀX > 0)`.
    Threshold,
}

#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub model: Model,
    pub p: usize,
    pub sparse: bool,
    /// Active-set size; `None` in the dense regime.
    pub s: Option<usize>,
    pub sigma_structure: SigmaStructure,
    /// `p × d`, unit-norm columns.
    pub true_beta: Matrix,
    pub model1_law: Model1Law,
    /// Scales the model noise `ε`; 0 gives noiseless data.
    pub noise_scale: f64,
    sigma_sqrt: Option<Matrix>,
}

/// `s = 5` for `p ≤ 500`, else 10.
pub fn sparsity(p: usize) -> usize {
    if p <= 500 {
        5
    } else {
        10
    }
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Coefficient vectors for `model`, as columns of a `p × d` matrix.
pub fn make_beta(model: Model, p: usize, sparse: bool, rng: &mut SeededRng) -> Result<Matrix> {
    if sparse {
        let s = sparsity(p);
        if p < s {
            return invalid(format!("sparse design needs p ≥ {s}, got {p}"));
        }
    } else if p < 10 {
        return invalid(format!("dense design needs p ≥ 10, got {p}"));
    }
    let cols: Vec<Vec<f64>> = match model {
        Model::I | Model::II => {
            let support = if sparse { sparsity(p) } else { p };
            let b = (0..p)
                .map(|j| if j < support { 0.4 + 0.4 * rng.uniform() } else { 0.0 })
                .collect();
            vec![normalized(b)]
        }
        _ if sparse => {
            let s = sparsity(p);
            let s0 = s.div_ceil(2);
            // 1-based: β₁ on 1..=s0, β₂ on (s−s0)..=s
            let b1 = (1..=p).map(|j| if j <= s0 { 1.0 } else { 0.0 }).collect();
            let b2 = (1..=p).map(|j| if j >= s - s0 && j <= s { 1.0 } else { 0.0 }).collect();
            vec![normalized(b1), normalized(b2)]
        }
        _ => {
            let b1 = (0..p).map(|j| if j < 5 { 1.0 } else { 0.0 }).collect();
            let b2 = (0..p).map(|j| if j >= 5 { 1.0 } else { 0.0 }).collect();
            vec![normalized(b1), normalized(b2)]
        }
    };
    Ok(Matrix::from_fn(p, cols.len(), |i, k| cols[k][i]))
}

/// `Σ_{ij} = ρ^{|i−j|}`.
pub fn ar1_covariance(p: usize, rho: f64) -> Matrix {
    Matrix::from_fn(p, p, |i, j| rho.powi(i.abs_diff(j) as i32))
}

impl ModelSpec {
    pub fn new(model: Model, p: usize, sparse: bool, rng: &mut SeededRng) -> Result<Self> {
        let true_beta = make_beta(model, p, sparse, rng)?;
        let sigma_structure = match model {
            Model::II | Model::IV => SigmaStructure::Ar1,
            _ => SigmaStructure::Identity,
        };
        let sigma_sqrt = match sigma_structure {
            SigmaStructure::Identity => None,
            SigmaStructure::Ar1 => {
                let eig = sym_eig(&ar1_covariance(p, 0.5))?;
                let root = Matrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    p,
                    eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()),
                ));
                Some(&eig.eigenvectors * root * eig.eigenvectors.transpose())
            }
        };
        Ok(Self {
            model,
            p,
            sparse,
            s: sparse.then(|| sparsity(p)),
            sigma_structure,
            true_beta,
            model1_law: Model1Law::default(),
            noise_scale: 1.0,
            sigma_sqrt,
        })
    }

    pub fn with_model1_law(mut self, law: Model1Law) -> Self {
        self.model1_law = law;
        self
    }

    pub fn with_noise_scale(mut self, scale: f64) -> Self {
        self.noise_scale = scale;
        self
    }

    /// `n` draws of `(X, Y)`.
    pub fn sample(&self, n: usize, rng: &mut SeededRng) -> Result<(Matrix, Vec<f64>)> {
        if n == 0 {
            return invalid("sample count must be positive");
        }
        let p = self.p;
        let b1 = self.true_beta.column(0);
        if self.model == Model::V {
            let b2 = self.true_beta.column(1);
            let y: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
            let mut x = Matrix::zeros(n, p);
            for i in 0..n {
                for j in 0..p {
                    x[(i, j)] = b1[j] * y[i] + b2[j] * y[i] * y[i] + self.noise_scale * rng.standard_normal();
                }
            }
            return Ok((x, y));
        }

        let z = gaussian_matrix(rng, n, p, 0.0, 1.0)?;
        let x = match &self.sigma_sqrt {
            Some(root) => z * root,
            None => z,
        };
        let u1 = &x * b1;
        let y = match self.model {
            Model::I => (0..n)
                .map(|i| match self.model1_law {
                    Model1Law::Bernoulli => {
                        let prob = 1.0 / (1.0 + (-u1[i]).exp());
                        f64::from(rng.uniform() < prob)
                    }
                    Model1Law::Threshold => f64::from(u1[i] > 0.0),
                })
                .collect(),
            Model::II => (0..n)
                .map(|i| {
                    let t = u1[i] + 1.0;
                    1.0 / (0.5 + t * t) + self.noise_scale * rng.standard_normal()
                })
                .collect(),
            Model::III => {
                let u2 = &x * self.true_beta.column(1);
                (0..n)
                    .map(|i| u1[i] / (u2[i].powi(3) + 1.0) + self.noise_scale * rng.standard_normal())
                    .collect()
            }
            Model::IV => {
                let u2 = &x * self.true_beta.column(1);
                (0..n)
                    .map(|i| u1[i].sin() * (u2[i] + self.noise_scale * rng.standard_normal()).exp())
                    .collect()
            }
            Model::V => unreachable!(),
        };
        Ok((x, y))
    }

    /// `n` draws sliced into `h` local equal-frequency slices; model I always
    /// yields the two classes.
    pub fn generate(&self, n: usize, h: usize, rng: &mut SeededRng) -> Result<LabeledDataset> {
        let (x, y) = self.sample(n, rng)?;
        if self.model.is_binary() {
            LabeledDataset::from_binary(x, y)
        } else {
            LabeledDataset::from_continuous(x, y, h, &Slicing::Local)
        }
    }
}
