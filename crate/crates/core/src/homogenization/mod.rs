//! Homogenization of chain-modulated BSDEs: the block-averaged driver and
//! ε-sweeps comparing the singularly perturbed problem with its limit.

mod averaged;
mod sweep;

pub use averaged::{averaged_ode_value, build_averaged_driver, AveragedDriver};
pub use sweep::{
    bound_verdict, epsilon_sweep, uniform_bound_check, BoundVerdict, EpsilonSweepReport, SweepOptions, SweepRung,
    DEFAULT_JUMP_CAP, DEFAULT_LADDER,
};

pub(crate) use sweep::{check_jumps, sample_chains};
