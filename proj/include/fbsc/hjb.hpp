#pragma once

#include "fbsc/grid.hpp"
#include "fbsc/model.hpp"

namespace fbsc {

/// H(t, x, psi, q, Theta, u) = 1/2 tr(sigma sigma^T Theta) + <q, b>
///                             + f(t, x, psi, sigma^T q, u).
/// Theta must be symmetric within 1e-12 * ||Theta||_F.
double hamiltonian(const ControlProblem& problem, double t, const Vec& x, double psi,
                   const Vec& q, const Mat& theta, const Vec& u);

struct HamiltonianMin {
    double value = 0.0;
    std::size_t argmin_index = 0;
};

/// Minimum of the Hamiltonian over the problem's control set; ties go to the
/// first index in set order.
HamiltonianMin hamiltonian_min(const ControlProblem& problem, double t, const Vec& x,
                               double psi, const Vec& q, const Mat& theta);

/// Stability report for the explicit scheme: dt * bound <= 1 is required,
/// where bound = sum_i max(sigma sigma^T)_ii / h_i^2 + sum_i max|b_i| / h_i
/// + L_f, maxima taken over grid nodes x control set x time samples and L_f
/// is the generator's y-Lipschitz constant (declared, else probed).
struct CflReport {
    double bound = 0.0;
    double dt = 0.0;
    double dt_limit = 0.0;
    bool ok = false;
    double diffusion_term = 0.0;
    double drift_term = 0.0;
    double generator_y_lipschitz = 0.0;
    /// False when (sigma sigma^T) fails row diagonal dominance somewhere;
    /// mixed-derivative monotonicity is then not guaranteed.
    bool diagonally_dominant = true;
    std::string summary() const;
};

CflReport check_cfl(const ControlProblem& problem, const Grid& grid);

/// Smallest uniform time-step count satisfying the CFL bound on this
/// geometry (before the time mesh exists).
int cfl_time_steps(const ControlProblem& problem, const Vec& lo, const Vec& hi,
                   const std::vector<int>& nodes_per_axis);

/// Solves the dynamic-programming PDE dv/dt + min_u H = 0, v(T,.) = Phi,
/// with an explicit monotone backward recursion:
///   v_k = v_{k+1} + dt * min_u Hhat(t_{k+1}, x_j, v_{k+1}, u).
/// Hhat upwinds first derivatives by the sign of the drift, uses central
/// second differences (7-point sign-split cross stencil for mixed terms) and
/// feeds the generator the central-difference gradient times sigma. Boundary
/// nodes use one-sided stencils. Throws on CFL violation (with the violated
/// bound) and aborts on non-finite values (with the location).
ValueField solve_hjb(const ControlProblem& problem, const Grid& grid);

/// Feedback synthesis: at every (k, j) stores the hamiltonian_min argmin for
/// the field's discrete jet (central gradient and second differences).
FeedbackPolicy synthesize_policy(const ControlProblem& problem, const ValueField& field);

/// Discrete jet of a grid field at (k, j): p is the right-sided time
/// difference (left-sided on the terminal slice), q the central gradient,
/// theta the central second-difference matrix.
struct NodeJet {
    double p = 0.0;
    Vec q;
    Mat theta;
};
NodeJet node_jet(const ValueField& field, int k, std::size_t j);

/// Upwinded discrete Hamiltonian minimised over the control set, evaluated
/// on one time slice. Shared by the solver and the residual diagnostic.
double discrete_hamiltonian_min(const ControlProblem& problem, const Grid& grid,
                                const double* slice, double t, std::size_t j);

/// Same discretisation for a single control, used by feedback checks so the
/// residual is measured against the scheme's own stencils.
double discrete_hamiltonian_control(const ControlProblem& problem, const Grid& grid,
                                    const double* slice, double t, std::size_t j,
                                    const Vec& u);

}  // namespace fbsc
