//! Config-level descriptions of chains, drivers, reactions, terminal data
//! and PDE problems, turned into library objects after validation.

use serde::{Deserialize, Serialize};

use crate::bsde::{Driver, ForwardModel, TerminalCondition};
use crate::error::{Error, Result};
use crate::markov_chain::{simulate_chain, ChainPath, GeneratorMatrix, StatePartition, TwoScaleGenerator};
use crate::pde::{PdeGrid, PdeProblem, Reaction};
use crate::rng::StreamKey;

fn invalid(msg: impl Into<String>) -> Error {
    Error::ConfigInvalid(msg.into())
}

pub(crate) fn default_epsilon() -> f64 {
    0.05
}

pub(crate) fn generator(rows: &[Vec<f64>], field: &str) -> Result<GeneratorMatrix> {
    GeneratorMatrix::from_rows(rows).map_err(|e| invalid(format!("{field}: {e}")))
}

/// Polynomial Σ a_j x^j given by its coefficients.
pub(crate) fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, a| acc * x + a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoScaleSpec {
    pub fast: Vec<Vec<f64>>,
    pub slow: Vec<Vec<f64>>,
    pub partition: Vec<Vec<usize>>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl TwoScaleSpec {
    pub fn build(&self) -> Result<TwoScaleGenerator> {
        let fast = generator(&self.fast, "two_scale.fast")?;
        let slow = generator(&self.slow, "two_scale.slow")?;
        let part = StatePartition::new(self.partition.clone()).map_err(|e| invalid(format!("two_scale.partition: {e}")))?;
        TwoScaleGenerator::new(fast, slow, self.epsilon, part).map_err(|e| invalid(format!("two_scale: {e}")))
    }
}

/// The chain path(s) a single-path experiment runs along.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChainSpec {
    /// No jumps.
    Constant { state: usize },
    /// Drawn from a generator; `count` independent paths.
    Sampled {
        generator: Vec<Vec<f64>>,
        initial_state: usize,
        #[serde(default = "one")]
        count: usize,
    },
    /// Given jump times and post-jump states.
    Explicit {
        initial_state: usize,
        jump_times: Vec<f64>,
        states: Vec<usize>,
    },
}

fn one() -> usize {
    1
}

impl Default for ChainSpec {
    fn default() -> Self {
        ChainSpec::Constant { state: 0 }
    }
}

impl ChainSpec {
    /// Paths on [0, horizon]; sampled paths keyed (seed, "config-chain", p).
    pub fn build(&self, horizon: f64, seed: u64) -> Result<Vec<ChainPath>> {
        match self {
            ChainSpec::Constant { state } => Ok(vec![ChainPath::constant(*state, 0.0, horizon)]),
            ChainSpec::Sampled {
                generator: rows,
                initial_state,
                count,
            } => {
                let q = generator(rows, "chain.generator")?;
                if *initial_state >= q.dim() {
                    return Err(invalid(format!("chain.initial_state {initial_state} out of range")));
                }
                if *count == 0 {
                    return Err(invalid("chain.count must be positive"));
                }
                let key = StreamKey::new(seed).label("config-chain");
                Ok((0..*count)
                    .map(|p| simulate_chain(&q, *initial_state, 0.0, horizon, &mut key.index(p as u64).rng()))
                    .collect())
            }
            ChainSpec::Explicit {
                initial_state,
                jump_times,
                states,
            } => ChainPath::new(0.0, horizon, *initial_state, jump_times.clone(), states.clone())
                .map(|p| vec![p])
                .map_err(|e| invalid(format!("chain: {e}"))),
        }
    }
}

/// Driver of a BSDE or reaction term of a PDE, per chain state i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    /// f ≡ 0 with k components.
    Zero {
        #[serde(default = "one")]
        k: usize,
    },
    /// f = c_i.
    StateConstant { values: Vec<f64> },
    /// f = c_i y.
    Linear { coeffs: Vec<f64> },
    /// f = a_i + b_i y + Σ_j g_ij z_j.
    Affine {
        constant: Vec<f64>,
        linear_y: Vec<f64>,
        #[serde(default)]
        linear_z: Option<Vec<Vec<f64>>>,
    },
}

impl FunctionSpec {
    pub fn k(&self) -> usize {
        match self {
            FunctionSpec::Zero { k } => *k,
            _ => 1,
        }
    }

    pub fn driver(&self, d: usize) -> Result<Driver> {
        match self {
            FunctionSpec::Zero { k } => Ok(Driver::zero(*k, d)),
            FunctionSpec::StateConstant { values } => Ok(Driver::state_constant(values.clone())),
            FunctionSpec::Linear { coeffs } => Ok(Driver::linear(coeffs.clone())),
            FunctionSpec::Affine {
                constant,
                linear_y,
                linear_z,
            } => {
                let lz = linear_z.clone().unwrap_or_else(|| vec![vec![0.0; d]; constant.len()]);
                Driver::affine(constant.clone(), linear_y.clone(), lz, d).map_err(|e| invalid(format!("driver: {e}")))
            }
        }
    }

    pub fn reaction(&self) -> Result<Reaction> {
        match self {
            FunctionSpec::Zero { k } => Ok(Reaction::zero(*k)),
            FunctionSpec::StateConstant { values } => {
                let v = values.clone();
                Ok(Reaction::new(1, 0.0, true, move |a, out| out[0] = v[a.state]))
            }
            FunctionSpec::Linear { coeffs } => Ok(Reaction::linear(coeffs.clone())),
            FunctionSpec::Affine {
                constant,
                linear_y,
                linear_z,
            } => {
                let n = constant.len();
                let lz: Vec<f64> = match linear_z {
                    None => vec![0.0; n],
                    Some(rows) => {
                        if rows.iter().any(|r| r.len() != 1) {
                            return Err(invalid("reaction.linear_z needs one gradient coefficient per state"));
                        }
                        rows.iter().map(|r| r[0]).collect()
                    }
                };
                if linear_y.len() != n || lz.len() != n {
                    return Err(invalid("reaction: one coefficient set per state"));
                }
                let lip = (0..n).map(|i| linear_y[i].abs().max(lz[i].abs())).fold(0.0, f64::max);
                let free = lz.iter().all(|&g| g == 0.0);
                let (a, b) = (constant.clone(), linear_y.clone());
                Ok(Reaction::new(1, lip, free, move |r, out| {
                    let i = r.state;
                    out[0] = a[i] + b[i] * r.u[0] + lz[i] * r.grad[0];
                }))
            }
        }
    }

    /// Largest state index the function knows about, if bounded.
    pub fn n_states(&self) -> Option<usize> {
        match self {
            FunctionSpec::Zero { .. } => None,
            FunctionSpec::StateConstant { values } => Some(values.len()),
            FunctionSpec::Linear { coeffs } => Some(coeffs.len()),
            FunctionSpec::Affine { constant, .. } => Some(constant.len()),
        }
    }
}

/// Terminal data as a function of the terminal forward state (first
/// coordinate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TerminalSpec {
    Constant { values: Vec<f64> },
    /// Σ_j a_j x^j.
    Polynomial { coeffs: Vec<f64> },
    /// amplitude · exp(−x² / (2 variance)).
    Gaussian {
        variance: f64,
        #[serde(default = "unit")]
        amplitude: f64,
    },
}

fn unit() -> f64 {
    1.0
}

impl TerminalSpec {
    pub fn k(&self) -> usize {
        match self {
            TerminalSpec::Constant { values } => values.len(),
            _ => 1,
        }
    }

    pub fn function(&self) -> Result<impl Fn(f64, &mut [f64]) + Send + Sync + Clone + 'static> {
        if let TerminalSpec::Gaussian { variance, .. } = self {
            if !(*variance > 0.0) {
                return Err(invalid("terminal.variance must be positive"));
            }
        }
        if let TerminalSpec::Constant { values } = self {
            if values.is_empty() {
                return Err(invalid("terminal.values must not be empty"));
            }
        }
        let spec = self.clone();
        Ok(move |x: f64, out: &mut [f64]| match &spec {
            TerminalSpec::Constant { values } => out.copy_from_slice(values),
            TerminalSpec::Polynomial { coeffs } => out[0] = poly_eval(coeffs, x),
            TerminalSpec::Gaussian { variance, amplitude } => out[0] = amplitude * (-x * x / (2.0 * variance)).exp(),
        })
    }

    pub fn condition(&self) -> Result<TerminalCondition> {
        if let TerminalSpec::Constant { values } = self {
            return Ok(TerminalCondition::constant(values.clone()));
        }
        let f = self.function()?;
        Ok(TerminalCondition::of_terminal(self.k(), &format!("{self:?}"), move |x, out| f(x[0], out)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForwardSpec {
    /// X = B from the origin.
    Brownian,
    /// dX = b(X) dt + σ(X) dB from x0, b and σ polynomials.
    Diffusion {
        x0: f64,
        #[serde(default = "zero_poly")]
        drift: Vec<f64>,
        #[serde(default = "unit_poly")]
        sigma: Vec<f64>,
    },
}

impl Default for ForwardSpec {
    fn default() -> Self {
        ForwardSpec::Brownian
    }
}

pub(crate) fn zero_poly() -> Vec<f64> {
    vec![0.0]
}

pub(crate) fn unit_poly() -> Vec<f64> {
    vec![1.0]
}

impl ForwardSpec {
    pub fn build(&self) -> ForwardModel {
        match self {
            ForwardSpec::Brownian => ForwardModel::Brownian,
            ForwardSpec::Diffusion { x0, drift, sigma } => {
                let (b, s) = (drift.clone(), sigma.clone());
                ForwardModel::diffusion(*x0, move |x| poly_eval(&b, x), move |x| poly_eval(&s, x))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSpec {
    pub grid: PdeGrid,
    #[serde(default = "zero_poly")]
    pub drift: Vec<f64>,
    #[serde(default = "unit_poly")]
    pub sigma: Vec<f64>,
    pub terminal: TerminalSpec,
    pub reaction: FunctionSpec,
}

impl PdeSpec {
    pub fn build(&self) -> Result<PdeProblem> {
        let reaction = self.reaction.reaction()?;
        if reaction.k() != self.terminal.k() {
            return Err(invalid(format!(
                "reaction has {} components, terminal data {}",
                reaction.k(),
                self.terminal.k()
            )));
        }
        let h = self.terminal.function()?;
        let (b, s) = (self.drift.clone(), self.sigma.clone());
        let p = PdeProblem::new(reaction, h, self.grid)
            .with_drift(move |x| poly_eval(&b, x))
            .with_sigma(move |x| poly_eval(&s, x));
        p.validate()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_horner() {
        assert_eq!(poly_eval(&[1.0, 2.0, 3.0], 2.0), 17.0);
        assert_eq!(poly_eval(&[], 2.0), 0.0);
    }

    #[test]
    fn unknown_fields_rejected() {
        let bad = r#"{"type": "linear", "coeffs": [1.0], "coefs": [2.0]}"#;
        assert!(serde_json::from_str::<FunctionSpec>(bad).is_err());
        let good = r#"{"type": "linear", "coeffs": [1.0]}"#;
        assert!(serde_json::from_str::<FunctionSpec>(good).is_ok());
    }

    #[test]
    fn explicit_chain_validated() {
        let c = ChainSpec::Explicit {
            initial_state: 0,
            jump_times: vec![0.5, 0.2],
            states: vec![1, 0],
        };
        assert!(c.build(1.0, 0).is_err());
    }
}
