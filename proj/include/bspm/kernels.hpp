#pragma once

#include <Eigen/Core>

#include <json.hpp>

#include <array>
#include <string>
#include <vector>

namespace bspm {

/// Declarative covariance composition tree. Sum/Product nodes combine
/// children elementwise; leaves act on their `dims` slice of the input
/// coordinates (empty dims = all input dimensions).
///
/// Leaf families:
///   SquaredExp          k = s2 * exp(-|d|^2 / (2 l^2))
///   RationalQuadratic   k = s2 * (1 + sum_d (d_d/l_d)^2 / (2 a))^(-a)
///   Matern52            k = s2 * (1 + sqrt5 r/l + 5 r^2/(3 l^2)) exp(-sqrt5 r/l)
///   SpectralMixture     k = sum_q w_q exp(-2 pi^2 tau^2 v_q) cos(2 pi tau mu_q), 1-D
///   WhiteNoise          k = s2 * [x == x' on active dims]
///   Linear              k = s2 * sum_d (x_d - c)(x'_d - c)
struct KernelSpec {
    enum class Kind {
        Sum,
        Product,
        SquaredExp,
        RationalQuadratic,
        Matern52,
        SpectralMixture,
        WhiteNoise,
        Linear,
    };

    Kind kind = Kind::SquaredExp;
    std::vector<KernelSpec> children; // Sum / Product only
    std::vector<int> dims;            // leaf active dims; empty = all

    double lengthscale = 1.0; // SquaredExp, Matern52
    double signal_var = 1.0;  // SquaredExp, Matern52, RationalQuadratic, WhiteNoise, Linear
    std::vector<double> ard_lengthscales; // RationalQuadratic, one per active dim
    double alpha = 1.0;                   // RationalQuadratic
    std::vector<double> sm_weights;       // SpectralMixture, size Q
    std::vector<double> sm_means;
    std::vector<double> sm_variances;
    double offset = 0.0; // Linear

    static KernelSpec se(double lengthscale, double signal_var, std::vector<int> dims = {});
    static KernelSpec rq_ard(std::vector<double> lengthscales, double alpha, double signal_var,
                             std::vector<int> dims = {});
    static KernelSpec matern52(double lengthscale, double signal_var, std::vector<int> dims = {});
    static KernelSpec spectral_mixture(std::vector<double> weights, std::vector<double> means,
                                       std::vector<double> variances, std::vector<int> dims = {});
    static KernelSpec white_noise(double variance, std::vector<int> dims = {});
    static KernelSpec linear(double variance, double offset, std::vector<int> dims = {});
    static KernelSpec sum(std::vector<KernelSpec> children);
    static KernelSpec product(std::vector<KernelSpec> children);

    bool is_leaf() const { return kind != Kind::Sum && kind != Kind::Product; }
};

/// Checks hyperparameter positivity, dims ranges, and array shapes against
/// an input dimensionality. Throws ParamError.
void validate_kernel(const KernelSpec& spec, int input_dim);

/// Pairwise covariance matrix between rows of A and rows of B.
Eigen::MatrixXd kernel_eval(const KernelSpec& spec, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// k(x, x) for each row of A (cheaper than the full Gram diagonal).
Eigen::VectorXd kernel_diag(const KernelSpec& spec, const Eigen::MatrixXd& A);

/// Evaluates the Gram K(A, B) and accumulates, for every packed parameter p,
///   grads[p] += sum_ij W(i,j) * dK(i,j)/dtheta_p
/// in the transformed (log where positive) parameter space. W must have the
/// Gram's shape. Returns K. This is the workhorse of the marginal-likelihood
/// gradient.
Eigen::MatrixXd kernel_eval_weighted_grads(const KernelSpec& spec, const Eigen::MatrixXd& A,
                                           const Eigen::MatrixXd& B, const Eigen::MatrixXd& W,
                                           std::vector<double>& grads);

/// Separable spatiotemporal composite: product of the three spatial kernels
/// (retargeted to dims {0}, {1}, {2}) and the temporal kernel (dim {3}).
KernelSpec st_kernel(const std::array<KernelSpec, 3>& spatial, const KernelSpec& temporal);

/// Copy of `spec` with every leaf's dims replaced.
KernelSpec retarget_dims(KernelSpec spec, const std::vector<int>& dims);

// --- hyperparameter vector ---------------------------------------------
// Depth-first over the tree. Positive parameters are packed as log(theta);
// the linear offset is packed as-is. Order per leaf:
//   SquaredExp         [log l, log s2]
//   RationalQuadratic  [log l_0.., log alpha, log s2]
//   Matern52           [log l, log s2]
//   SpectralMixture    [log w_0, log mu_0, log v_0, log w_1, ...]
//   WhiteNoise         [log s2]
//   Linear             [log s2, offset]

int n_params(const KernelSpec& spec);
std::vector<double> pack_params(const KernelSpec& spec);
void unpack_params(KernelSpec& spec, const std::vector<double>& packed);
std::vector<std::string> param_names(const KernelSpec& spec);

// --- serialization ------------------------------------------------------

nlohmann::json kernel_to_json(const KernelSpec& spec);
KernelSpec kernel_from_json(const nlohmann::json& j);

/// Structural and bitwise parameter equality (round-trip checks).
bool kernel_equal_bits(const KernelSpec& a, const KernelSpec& b);

/// Spectral-mixture initialization heuristic: means uniform on the Nyquist
/// band [0, 0.5/sample_period], variances from squared inverse uniform draws
/// over the time span, weights = target_variance / Q.
KernelSpec spectral_mixture_init(int q_components, double sample_period, double time_span,
                                 double target_variance, class Rng& rng, std::vector<int> dims = {});

} // namespace bspm
