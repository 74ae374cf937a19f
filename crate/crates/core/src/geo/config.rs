use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// `γ̈^k = −Γ^k_ij γ̇^i γ̇^j`, classical fourth-order Runge–Kutta.
    #[default]
    ChristoffelRk4,
    /// `ẋ = ∂H/∂p`, `ṗ = −∂H/∂x` with `H = ½ pᵀ g⁻¹ p`: generalized
    /// (implicit) Störmer–Verlet steps in a fourth-order symmetric composition.
    HamiltonianLeapfrog,
}

/// Local squared distance used by the discrete-energy boundary solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BvpStencil {
    /// `Δᵀ g((x_k + x_{k+1})/2) Δ`
    #[default]
    Midpoint,
    /// `Δᵀ g(x_k) Δ`
    LeftEndpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub integrator: Integrator,
    /// Integration steps over unit time.
    pub steps: usize,
    /// Node count (endpoints included) of the discrete boundary solver.
    pub bvp_nodes: usize,
    pub bvp_stencil: BvpStencil,
    /// Iteration cap of the shooting and Fréchet-mean iterations.
    pub max_iter: usize,
    /// Iteration cap of the energy minimizers (boundary solver, curve regression).
    pub energy_max_iter: usize,
    /// Endpoint residual target for shooting.
    pub tol: f64,
    /// Mean-logarithm norm target for Fréchet means.
    pub mean_tol: f64,
    /// Gradient-norm target for the energy minimizers.
    pub grad_tol: f64,
    /// Initial step of the energy minimizers' line search.
    pub step_size: f64,
    /// Gauss–Legendre nodes for curve regression (also the export resolution).
    pub curve_nodes: usize,
    /// Randomized restarts before a shooting solve reports no convergence.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            integrator: Integrator::ChristoffelRk4,
            steps: 200,
            bvp_nodes: 64,
            bvp_stencil: BvpStencil::Midpoint,
            max_iter: 500,
            energy_max_iter: 20_000,
            tol: 1e-10,
            mean_tol: 1e-8,
            grad_tol: 1e-9,
            step_size: 1.0,
            curve_nodes: 64,
            restarts: 4,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidArgument("steps must be ≥ 1".into()));
        }
        if !(self.tol > 0.0) || !(self.grad_tol > 0.0) || !(self.mean_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if self.bvp_nodes < 2 {
            return Err(Error::InvalidArgument("bvp_nodes must be ≥ 2".into()));
        }
        if self.curve_nodes < 3 {
            return Err(Error::InvalidArgument("curve_nodes must be ≥ 3".into()));
        }
        Ok(())
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }
}
