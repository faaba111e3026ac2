#pragma once

#include "geomcont/constraints.hpp"
#include "geomcont/refine.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

namespace geomcont {

/// Continuation state: reference surface, reduced normal-displacement
/// unknowns, parameters with the active set (primary first), frozen
/// reference normals and optional periodic identification.
struct ProblemState {
  SurfaceMesh mesh;
  Vec u;    // reduced unknowns, nfields * np_red
  Vec up;   // last accepted displacement step (full vertex length, field 1)
  Vec pars;
  std::vector<int> ilam;  // active parameter slots, primary first
  Eigen::MatrixX3d N0;    // reference normal field
  int xcont_mode = 1;     // 1: update X after Newton convergence, 2: every step
  std::optional<PeriodicMaps> periodic;
  std::map<std::string, Vec> fields;  // per-vertex problem data (interpolated on refine)
  Vec tangent;                        // (u, active pars) continuation tangent
  bool has_tangent = false;

  int np_red() const { return periodic ? periodic->np_red : mesh.np(); }
};

struct EvalContext {
  SurfaceMesh mesh_n;  // displaced surface X0 + u1 N0
  Operators ops;       // operators on mesh_n
  Vec u1_full;         // full-length displacement
  Vec u2_full;         // second field (zero-length when nfields == 1)
  Eigen::MatrixX3d N0; // prepared reference normals (displacement direction)
  // reference-surface operators for phase-condition rows frozen per step
  SurfaceMesh mesh_ref;
  Operators ops_ref;
  bool has_ref = false;
};

struct ProblemDef {
  std::string name;
  int nfields = 1;
  std::vector<std::string> par_names;
  std::vector<Constraint> constraints;  // paired with ilam[1..]
  NormalSpec normal;
  bool volume_caps = false;  // report V with boundary-loop caps
  double stab_sign = -1.0;   // orient the linearization for eigenvalue counting
  bool mass_on_field2 = false;  // dynamical mass on the second field (default off)
  bool needs_grad_n = false;    // residual uses gradient operators on the displaced surface
  bool wants_ref = false;       // always build reference operators into the context
  bool ref_grads = false;       // reference operators carry gradient operators

  // PDE rows over the full (unreduced) vertices, all fields stacked,
  // boundary-condition rows replaced and PC multiplier terms included
  std::function<Vec(const ProblemDef&, const ProblemState&, const EvalContext&)> residual;
  // analytic d(residual)/du in the same convention; empty -> colored FD
  std::function<SpMat(const ProblemDef&, const ProblemState&, const EvalContext&)> jacobian;
  // re-apply parameter-dependent geometry (boundary pinning, axial rescale)
  std::function<void(ProblemState&)> prepare;
  // replace X0 <- X0 + u N0 and reset u; problems add boundary re-pinning.
  // Empty uses the default update.
  std::function<void(ProblemState&, const Vec& u1_full)> update;
  std::function<double(const ProblemState&, const EvalContext&)> energy;  // E column
  std::function<double(const ProblemState&, const EvalContext&)> error;   // e(X) for adaptation
  // periodic shift as a function of the current parameters (for map rebuilds)
  std::function<Eigen::Vector3d(const ProblemState&)> periodic_shift;
};

struct AdaptPolicy {
  enum class Trigger { None, EveryK, ErrorThreshold, MaxAreaThreshold, DistortionThreshold };
  enum class Action { Refine, Coarsen, Degcoarsen, MoveRetrig };
  Trigger trigger = Trigger::None;
  Action action = Action::Refine;
  int k = 5;
  double errbound = 0.05;
  double maxA = 0.3;
  double distbound = 100.0;
  ElementSelector selector;
  RefineStrategy strategy = RefineStrategy::RGB;
  double sigma = 0.5;  // degcoarsen fraction
  int iters = 5;       // degcoarsen iterations / move_points steps
  double dt = 0.1;     // move_points pseudo-time step
  bool keepbd = false;
};

struct ContSettings {
  double ds = 0.1, dsmin = 1e-6, dsmax = 0.5;
  double tol = 1e-8;
  int maxit = 12;
  bool spcalc = true;
  int neig = 24;
  int bisec_max = 10;
  double xi = -1.0;       // displacement weight in the arclength norm; <0: 1/np
  double eig_shift = 0.0; // 0: automatic
  // eigenvalues above -eig_zero_tol count as zero modes (discrete symmetry
  // kernels of the closed/symmetric demos land at ~ -1e-5)
  double eig_zero_tol = 1e-4;
  int verbose = 0;
};

/// One row of branch data; layout 6 + m + 8 columns.
struct BranchRecord {
  int count = 0;
  int type = 0;  // 0 regular, 1 BP, 2 fold, 3 reserved
  int ineg = 0;
  double lam = 0;
  double err = 0, l2 = 0;  // placeholders
  Vec pars;
  double V = 0, A = 0, E = 0;
  double delta_mesh = 0, a_max = 0, a_min = 0, h_max = 0, h_min = 0;
  std::vector<double> flat() const;
};

void write_branch_csv(const std::string& path, const std::vector<BranchRecord>& records,
                      const std::vector<std::string>& par_names);

struct BifPoint {
  int type = 1;  // 1 BP, 2 fold
  ProblemState state;
  double lam = 0;
  int ineg_before = 0, ineg_after = 0;
  int after_step = 0;
  bool localized = true;
};

struct ContResult {
  ProblemState state;
  std::vector<BranchRecord> records;
  std::vector<BifPoint> special;
  bool failed = false;
  std::string message;
};

struct NewtonReport {
  bool converged = false;
  int iterations = 0;
  double resnorm = 0;
};

EvalContext make_context(const ProblemDef& prob, const ProblemState& state);
EvalContext make_context(const ProblemDef& prob, const ProblemState& state, const Vec& u_red);

/// Sum of multiplier-weighted phase-condition fields, for use inside
/// residual hooks.
Vec pc_terms(const ProblemDef& prob, const ProblemState& state, const EvalContext& ctx);

/// Extended residual [PDE rows (reduced); constraint values].
Vec assemble_residual(const ProblemDef& prob, const ProblemState& state, const EvalContext& ctx);

struct ExtendedJacobian {
  SpMat Ju;            // (nu+nq) x nu
  Eigen::MatrixXd Jp;  // (nu+nq) x na, columns follow ilam
};
ExtendedJacobian assemble_jacobian(const ProblemDef& prob, const ProblemState& state,
                                   const EvalContext& ctx);

/// Graph-colored forward differences on the sparsity pattern of the full
/// mass matrix (vertex 1-ring coupling); step 1e-6 (1 + |u_i|).
SpMat fd_jacobian(const ProblemDef& prob, const ProblemState& state);
int fd_jacobian_colors(const ProblemDef& prob, const ProblemState& state);

/// Relative Frobenius difference between the analytic and finite-difference
/// d(residual)/du; negative when no analytic Jacobian is defined.
double jaccheck(const ProblemDef& prob, const ProblemState& state);

/// Relative error of constraint k's gradient against a centered difference
/// of its value along a pseudo-random direction (eps = 1e-6).
double qjaccheck(const ProblemDef& prob, const ProblemState& state, int k);

/// Damped Newton on the extended system at fixed primary parameter
/// (secondary active parameters free).
NewtonReport newton_correct(const ProblemDef& prob, ProblemState& state,
                            const ContSettings& settings);

/// Unstable-eigenvalue count of the pencil (stab_sign * J_ext, M_ext); -1 on
/// eigensolver failure.
int stability_index(const ProblemDef& prob, const ProblemState& state,
                    const ContSettings& settings);

ContResult cont(const ProblemDef& prob, ProblemState state, const ContSettings& settings,
                int nsteps, const AdaptPolicy& adapt = {});

/// Bisection localization between consecutive accepted steps with an index
/// change; fills a BifPoint typed BP or fold.
BifPoint locate_bp(const ProblemDef& prob, const ProblemState& state_a,
                   const ProblemState& state_b, const ContSettings& settings);

struct KernelInfo {
  std::vector<double> mu;       // eigenvalues sorted by |mu|
  Eigen::MatrixXd vectors;      // mass-orthonormalized u-block columns
};
KernelInfo kernel_at_bp(const ProblemDef& prob, const ProblemState& bp_state,
                        const ContSettings& settings, int m_small);

struct SwibraResult {
  ProblemState state;
  bool ok = false;
  std::string message;
};
/// Branch switching: predictor = bp + ds0 * direction with the primary
/// parameter frozen for the first corrector; fails when the corrector falls
/// back onto the old branch.
SwibraResult swibra(const ProblemDef& prob, const ProblemState& bp_state, const Vec& direction,
                    double ds0, const ContSettings& settings);

/// Evaluates the adaptation trigger and applies the action; u, up and the
/// tangent are carried through the interpolation map.
bool adaptation_hook(const ProblemDef& prob, ProblemState& state, const AdaptPolicy& policy,
                     int step, double err);

// point snapshots: mesh + parameter/metadata file pair
void save_point(const std::string& basename, const ProblemDef& prob, const ProblemState& state);
ProblemState load_point(const std::string& basename, const ProblemDef& prob);

Vec fill_field(const ProblemState& state, const Vec& reduced);   // one field
Vec drop_field(const ProblemState& state, const Vec& full);

}  // namespace geomcont
