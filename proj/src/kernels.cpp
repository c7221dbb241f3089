#include "bspm/kernels.hpp"

#include "bspm/errors.hpp"
#include "bspm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <set>
#include <utility>

namespace bspm {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kTwoPiSq = 19.739208802178717237668981999752;
constexpr double kSqrt5 = 2.2360679774997896964091736687747;

std::vector<int> effective_dims(const KernelSpec& spec, int input_dim) {
    if (spec.dims.empty()) {
        std::vector<int> all(input_dim);
        for (int d = 0; d < input_dim; ++d) all[d] = d;
        return all;
    }
    return spec.dims;
}

const char* kind_name(KernelSpec::Kind k) {
    switch (k) {
        case KernelSpec::Kind::Sum: return "sum";
        case KernelSpec::Kind::Product: return "product";
        case KernelSpec::Kind::SquaredExp: return "se";
        case KernelSpec::Kind::RationalQuadratic: return "rq_ard";
        case KernelSpec::Kind::Matern52: return "matern52";
        case KernelSpec::Kind::SpectralMixture: return "spectral_mixture";
        case KernelSpec::Kind::WhiteNoise: return "white_noise";
        case KernelSpec::Kind::Linear: return "linear";
    }
    return "?";
}

// sum of squared differences over the given dims, optionally scaled per dim
Eigen::MatrixXd sq_dist(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const std::vector<int>& dims,
                        const std::vector<double>* inv_ls2 = nullptr) {
    const Eigen::Index na = A.rows(), nb = B.rows();
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(na, nb);
    for (std::size_t k = 0; k < dims.size(); ++k) {
        const int d = dims[k];
        const double w = inv_ls2 ? (*inv_ls2)[k] : 1.0;
        for (Eigen::Index j = 0; j < nb; ++j) {
            const double bj = B(j, d);
            for (Eigen::Index i = 0; i < na; ++i) {
                const double diff = A(i, d) - bj;
                s(i, j) += w * diff * diff;
            }
        }
    }
    return s;
}

Eigen::MatrixXd eval_leaf(const KernelSpec& spec, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    const auto dims = effective_dims(spec, static_cast<int>(A.cols()));
    const Eigen::Index na = A.rows(), nb = B.rows();

    switch (spec.kind) {
        case KernelSpec::Kind::SquaredExp: {
            const double inv2l2 = 1.0 / (2.0 * spec.lengthscale * spec.lengthscale);
            Eigen::MatrixXd s = sq_dist(A, B, dims);
            return spec.signal_var * (-inv2l2 * s.array()).exp().matrix();
        }
        case KernelSpec::Kind::RationalQuadratic: {
            std::vector<double> inv_ls2(dims.size());
            for (std::size_t k = 0; k < dims.size(); ++k) {
                inv_ls2[k] = 1.0 / (spec.ard_lengthscales[k] * spec.ard_lengthscales[k]);
            }
            Eigen::MatrixXd s = sq_dist(A, B, dims, &inv_ls2);
            return spec.signal_var *
                   (1.0 + s.array() / (2.0 * spec.alpha)).pow(-spec.alpha).matrix();
        }
        case KernelSpec::Kind::Matern52: {
            Eigen::MatrixXd s = sq_dist(A, B, dims);
            const double l = spec.lengthscale;
            Eigen::MatrixXd k(na, nb);
            for (Eigen::Index j = 0; j < nb; ++j) {
                for (Eigen::Index i = 0; i < na; ++i) {
                    const double r = std::sqrt(s(i, j));
                    const double a = kSqrt5 * r / l;
                    const double b = 5.0 * s(i, j) / (3.0 * l * l);
                    k(i, j) = spec.signal_var * (1.0 + a + b) * std::exp(-a);
                }
            }
            return k;
        }
        case KernelSpec::Kind::SpectralMixture: {
            const int d = dims[0];
            Eigen::MatrixXd k(na, nb);
            for (Eigen::Index j = 0; j < nb; ++j) {
                const double bj = B(j, d);
                for (Eigen::Index i = 0; i < na; ++i) {
                    const double tau = A(i, d) - bj;
                    const double t2 = tau * tau;
                    double acc = 0.0;
                    for (std::size_t q = 0; q < spec.sm_weights.size(); ++q) {
                        acc += spec.sm_weights[q] * std::exp(-kTwoPiSq * spec.sm_variances[q] * t2) *
                               std::cos(kTwoPi * spec.sm_means[q] * tau);
                    }
                    k(i, j) = acc;
                }
            }
            return k;
        }
        case KernelSpec::Kind::WhiteNoise: {
            Eigen::MatrixXd k = Eigen::MatrixXd::Zero(na, nb);
            for (Eigen::Index j = 0; j < nb; ++j) {
                for (Eigen::Index i = 0; i < na; ++i) {
                    bool same = true;
                    for (int d : dims) {
                        if (A(i, d) != B(j, d)) {
                            same = false;
                            break;
                        }
                    }
                    if (same) k(i, j) = spec.signal_var;
                }
            }
            return k;
        }
        case KernelSpec::Kind::Linear: {
            Eigen::MatrixXd g = Eigen::MatrixXd::Zero(na, nb);
            for (int d : dims) {
                g.noalias() += (A.col(d).array() - spec.offset).matrix() *
                               (B.col(d).array() - spec.offset).matrix().transpose();
            }
            return spec.signal_var * g;
        }
        default:
            throw ParamError("eval_leaf: not a leaf");
    }
}

Eigen::MatrixXd eval_node(const KernelSpec& spec, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    switch (spec.kind) {
        case KernelSpec::Kind::Sum: {
            Eigen::MatrixXd k = eval_node(spec.children[0], A, B);
            for (std::size_t c = 1; c < spec.children.size(); ++c) k += eval_node(spec.children[c], A, B);
            return k;
        }
        case KernelSpec::Kind::Product: {
            Eigen::MatrixXd k = eval_node(spec.children[0], A, B);
            for (std::size_t c = 1; c < spec.children.size(); ++c) {
                k = k.cwiseProduct(eval_node(spec.children[c], A, B));
            }
            return k;
        }
        default:
            return eval_leaf(spec, A, B);
    }
}

// grads[cursor..] += sum_ij W_ij dK_ij/dtheta for this leaf's parameters, in
// the packed (log) space. Scalar loops on purpose: the fit path calls this at
// a few thousand points and per-parameter dK matrices would dominate memory.
void accumulate_leaf_grads(const KernelSpec& spec, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const Eigen::MatrixXd& W, std::vector<double>& grads, std::size_t& cursor) {
    const auto dims = effective_dims(spec, static_cast<int>(A.cols()));
    const Eigen::Index na = A.rows(), nb = B.rows();

    switch (spec.kind) {
        case KernelSpec::Kind::SquaredExp: {
            const double l2 = spec.lengthscale * spec.lengthscale;
            double gl = 0.0, gs = 0.0;
            for (Eigen::Index j = 0; j < nb; ++j) {
                for (Eigen::Index i = 0; i < na; ++i) {
                    double s = 0.0;
                    for (int d : dims) {
                        const double diff = A(i, d) - B(j, d);
                        s += diff * diff;
                    }
                    const double k = spec.signal_var * std::exp(-s / (2.0 * l2));
                    gl += W(i, j) * k * s / l2;
                    gs += W(i, j) * k;
                }
            }
            grads[cursor++] += gl;
            grads[cursor++] += gs;
            return;
        }
        case KernelSpec::Kind::RationalQuadratic: {
            const std::size_t nd = dims.size();
            std::vector<double> inv_ls2(nd);
            for (std::size_t k = 0; k < nd; ++k) {
                inv_ls2[k] = 1.0 / (spec.ard_lengthscales[k] * spec.ard_lengthscales[k]);
            }
            std::vector<double> gl(nd, 0.0);
            double galpha = 0.0, gs = 0.0;
            double sd[8]; // scaled squared differences per dim, nd <= input dim <= 8 here
            for (Eigen::Index j = 0; j < nb; ++j) {
                for (Eigen::Index i = 0; i < na; ++i) {
                    double s = 0.0;
                    for (std::size_t k = 0; k < nd; ++k) {
                        const double diff = A(i, dims[k]) - B(j, dims[k]);
                        sd[k] = diff * diff * inv_ls2[k];
                        s += sd[k];
                    }
                    const double u = s / (2.0 * spec.alpha);
                    const double t = 1.0 + u;
                    const double kv = spec.signal_var * std::pow(t, -spec.alpha);
                    const double base = spec.signal_var * std::pow(t, -spec.alpha - 1.0);
                    const double w = W(i, j);
                    for (std::size_t k = 0; k < nd; ++k) gl[k] += w * base * sd[k];
                    galpha += w * kv * spec.alpha * (-std::log(t) + u / t);
                    gs += w * kv;
                }
            }
            for (std::size_t k = 0; k < nd; ++k) grads[cursor++] += gl[k];
            grads[cursor++] += galpha;
            grads[cursor++] += gs;
            return;
        }
        case KernelSpec::Kind::Matern52: {
            const double l = spec.lengthscale;
            double gl = 0.0, gs = 0.0;
            for (Eigen::Index j = 0; j < nb; ++j) {
                for (Eigen::Index i = 0; i < na; ++i) {
                    double s = 0.0;
                    for (int d : dims) {
                        const double diff = A(i, d) - B(j, d);
                        s += diff * diff;
                    }
                    const double r = std::sqrt(s);
                    const double a = kSqrt5 * r / l;
                    const double b = 5.0 * s / (3.0 * l * l);
                    const double e = std::exp(-a);
                    const double w = W(i, j);
                    gl += w * spec.signal_var * e * b * (1.0 + a);
                    gs += w * spec.signal_var * (1.0 + a + b) * e;
                }
            }
            grads[cursor++] += gl;
            grads[cursor++] += gs;
            return;
        }
        case KernelSpec::Kind::SpectralMixture: {
            const int d = dims[0];
            const std::size_t nq = spec.sm_weights.size();
            std::vector<double> g(3 * nq, 0.0);
            for (Eigen::Index j = 0; j < nb; ++j) {
                const double bj = B(j, d);
                for (Eigen::Index i = 0; i < na; ++i) {
                    const double tau = A(i, d) - bj;
                    const double t2 = tau * tau;
                    const double w = W(i, j);
                    for (std::size_t q = 0; q < nq; ++q) {
                        const double wq = spec.sm_weights[q], mu = spec.sm_means[q],
                                     vq = spec.sm_variances[q];
                        const double e = std::exp(-kTwoPiSq * vq * t2);
                        const double phase = kTwoPi * mu * tau;
                        const double c = std::cos(phase);
                        g[3 * q] += w * wq * e * c;
                        g[3 * q + 1] += w * (-wq * mu * kTwoPi * tau * e * std::sin(phase));
                        g[3 * q + 2] += w * (wq * vq * (-kTwoPiSq) * t2 * e * c);
                    }
                }
            }
            for (double v : g) grads[cursor++] += v;
            return;
        }
        case KernelSpec::Kind::WhiteNoise: {
            double gs = 0.0;
            for (Eigen::Index j = 0; j < nb; ++j) {
                for (Eigen::Index i = 0; i < na; ++i) {
                    bool same = true;
                    for (int d : dims) {
                        if (A(i, d) != B(j, d)) {
                            same = false;
                            break;
                        }
                    }
                    if (same) gs += W(i, j) * spec.signal_var;
                }
            }
            grads[cursor++] += gs;
            return;
        }
        case KernelSpec::Kind::Linear: {
            double gs = 0.0, goff = 0.0;
            const double c = spec.offset;
            for (Eigen::Index j = 0; j < nb; ++j) {
                for (Eigen::Index i = 0; i < na; ++i) {
                    double prod = 0.0, dsum = 0.0;
                    for (int d : dims) {
                        prod += (A(i, d) - c) * (B(j, d) - c);
                        dsum += 2.0 * c - A(i, d) - B(j, d);
                    }
                    gs += W(i, j) * spec.signal_var * prod;
                    goff += W(i, j) * spec.signal_var * dsum;
                }
            }
            grads[cursor++] += gs;
            grads[cursor++] += goff;
            return;
        }
        default:
            throw ParamError("accumulate_leaf_grads: not a leaf");
    }
}

void accumulate_grads(const KernelSpec& spec, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                      const Eigen::MatrixXd& W, std::vector<double>& grads, std::size_t& cursor) {
    switch (spec.kind) {
        case KernelSpec::Kind::Sum: {
            for (const auto& c : spec.children) accumulate_grads(c, A, B, W, grads, cursor);
            return;
        }
        case KernelSpec::Kind::Product: {
            // Each child sees W times the product of its siblings' Grams.
            // Siblings are re-evaluated per child to keep at most two extra
            // n x m buffers alive.
            const std::size_t m = spec.children.size();
            for (std::size_t i = 0; i < m; ++i) {
                Eigen::MatrixXd wi = W;
                for (std::size_t j = 0; j < m; ++j) {
                    if (j != i) wi = wi.cwiseProduct(eval_node(spec.children[j], A, B));
                }
                accumulate_grads(spec.children[i], A, B, wi, grads, cursor);
            }
            return;
        }
        default:
            accumulate_leaf_grads(spec, A, B, W, grads, cursor);
            return;
    }
}

void validate_node(const KernelSpec& spec, int input_dim) {
    if (!spec.is_leaf()) {
        if (spec.children.empty()) {
            throw ParamError(std::string(kind_name(spec.kind)) + " node needs at least one child");
        }
        for (const auto& c : spec.children) validate_node(c, input_dim);
        return;
    }

    const auto dims = effective_dims(spec, input_dim);
    if (dims.empty()) throw ParamError("kernel leaf has no active dims");
    std::set<int> uniq;
    for (int d : dims) {
        if (d < 0 || d >= input_dim) {
            throw ParamError(std::string(kind_name(spec.kind)) + ": dim " + std::to_string(d) +
                             " out of range for input dim " + std::to_string(input_dim));
        }
        if (!uniq.insert(d).second) throw ParamError("kernel leaf has repeated dims");
    }

    auto require_pos = [&](double v, const char* what) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ParamError(std::string(kind_name(spec.kind)) + ": " + what + " must be > 0, got " +
                             std::to_string(v));
        }
    };

    switch (spec.kind) {
        case KernelSpec::Kind::SquaredExp:
        case KernelSpec::Kind::Matern52:
            require_pos(spec.lengthscale, "lengthscale");
            require_pos(spec.signal_var, "signal_var");
            break;
        case KernelSpec::Kind::RationalQuadratic:
            if (spec.ard_lengthscales.size() != dims.size()) {
                throw ParamError("rq_ard: lengthscales size " + std::to_string(spec.ard_lengthscales.size()) +
                                 " != active dims " + std::to_string(dims.size()));
            }
            for (double l : spec.ard_lengthscales) require_pos(l, "lengthscale");
            require_pos(spec.alpha, "alpha");
            require_pos(spec.signal_var, "signal_var");
            break;
        case KernelSpec::Kind::SpectralMixture: {
            const std::size_t q = spec.sm_weights.size();
            if (q == 0 || spec.sm_means.size() != q || spec.sm_variances.size() != q) {
                throw ParamError("spectral_mixture: weights/means/variances must share a nonzero size");
            }
            if (dims.size() != 1) throw ParamError("spectral_mixture: exactly one active dim required");
            for (double w : spec.sm_weights) {
                if (w < 0.0 || !std::isfinite(w)) throw ParamError("spectral_mixture: weights must be >= 0");
            }
            for (double v : spec.sm_variances) require_pos(v, "component variance");
            for (double m : spec.sm_means) {
                if (!std::isfinite(m)) throw ParamError("spectral_mixture: non-finite mean");
            }
            break;
        }
        case KernelSpec::Kind::WhiteNoise:
        case KernelSpec::Kind::Linear:
            require_pos(spec.signal_var, "variance");
            if (!std::isfinite(spec.offset)) throw ParamError("linear: non-finite offset");
            break;
        default:
            break;
    }
}

void check_inputs(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    if (A.cols() != B.cols()) {
        throw ParamError("kernel_eval: dimension mismatch, " + std::to_string(A.cols()) + " vs " +
                         std::to_string(B.cols()));
    }
}

} // namespace

KernelSpec KernelSpec::se(double lengthscale, double signal_var, std::vector<int> dims) {
    KernelSpec k;
    k.kind = Kind::SquaredExp;
    k.lengthscale = lengthscale;
    k.signal_var = signal_var;
    k.dims = std::move(dims);
    return k;
}

KernelSpec KernelSpec::rq_ard(std::vector<double> lengthscales, double alpha, double signal_var,
                              std::vector<int> dims) {
    KernelSpec k;
    k.kind = Kind::RationalQuadratic;
    k.ard_lengthscales = std::move(lengthscales);
    k.alpha = alpha;
    k.signal_var = signal_var;
    k.dims = std::move(dims);
    return k;
}

KernelSpec KernelSpec::matern52(double lengthscale, double signal_var, std::vector<int> dims) {
    KernelSpec k;
    k.kind = Kind::Matern52;
    k.lengthscale = lengthscale;
    k.signal_var = signal_var;
    k.dims = std::move(dims);
    return k;
}

KernelSpec KernelSpec::spectral_mixture(std::vector<double> weights, std::vector<double> means,
                                        std::vector<double> variances, std::vector<int> dims) {
    KernelSpec k;
    k.kind = Kind::SpectralMixture;
    k.sm_weights = std::move(weights);
    k.sm_means = std::move(means);
    k.sm_variances = std::move(variances);
    k.dims = std::move(dims);
    return k;
}

KernelSpec KernelSpec::white_noise(double variance, std::vector<int> dims) {
    KernelSpec k;
    k.kind = Kind::WhiteNoise;
    k.signal_var = variance;
    k.dims = std::move(dims);
    return k;
}

KernelSpec KernelSpec::linear(double variance, double offset, std::vector<int> dims) {
    KernelSpec k;
    k.kind = Kind::Linear;
    k.signal_var = variance;
    k.offset = offset;
    k.dims = std::move(dims);
    return k;
}

KernelSpec KernelSpec::sum(std::vector<KernelSpec> children) {
    KernelSpec k;
    k.kind = Kind::Sum;
    k.children = std::move(children);
    return k;
}

KernelSpec KernelSpec::product(std::vector<KernelSpec> children) {
    KernelSpec k;
    k.kind = Kind::Product;
    k.children = std::move(children);
    return k;
}

void validate_kernel(const KernelSpec& spec, int input_dim) {
    if (input_dim <= 0) throw ParamError("validate_kernel: input_dim must be positive");
    if (input_dim > 8) throw ParamError("validate_kernel: inputs above 8 dimensions are unsupported");
    validate_node(spec, input_dim);
}

Eigen::MatrixXd kernel_eval(const KernelSpec& spec, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    check_inputs(A, B);
    validate_kernel(spec, static_cast<int>(A.cols()));
    return eval_node(spec, A, B);
}

Eigen::VectorXd kernel_diag(const KernelSpec& spec, const Eigen::MatrixXd& A) {
    validate_kernel(spec, static_cast<int>(A.cols()));
    const Eigen::Index n = A.rows();

    std::function<Eigen::VectorXd(const KernelSpec&)> rec = [&](const KernelSpec& s) -> Eigen::VectorXd {
        switch (s.kind) {
            case KernelSpec::Kind::Sum: {
                Eigen::VectorXd d = rec(s.children[0]);
                for (std::size_t c = 1; c < s.children.size(); ++c) d += rec(s.children[c]);
                return d;
            }
            case KernelSpec::Kind::Product: {
                Eigen::VectorXd d = rec(s.children[0]);
                for (std::size_t c = 1; c < s.children.size(); ++c) {
                    d = d.cwiseProduct(rec(s.children[c]));
                }
                return d;
            }
            case KernelSpec::Kind::SquaredExp:
            case KernelSpec::Kind::Matern52:
            case KernelSpec::Kind::RationalQuadratic:
            case KernelSpec::Kind::WhiteNoise:
                return Eigen::VectorXd::Constant(n, s.signal_var);
            case KernelSpec::Kind::SpectralMixture: {
                double w = 0.0;
                for (double wq : s.sm_weights) w += wq;
                return Eigen::VectorXd::Constant(n, w);
            }
            case KernelSpec::Kind::Linear: {
                Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
                for (int dim : effective_dims(s, static_cast<int>(A.cols()))) {
                    d.array() += (A.col(dim).array() - s.offset).square();
                }
                return s.signal_var * d;
            }
        }
        throw ParamError("kernel_diag: unreachable");
    };
    return rec(spec);
}

Eigen::MatrixXd kernel_eval_weighted_grads(const KernelSpec& spec, const Eigen::MatrixXd& A,
                                           const Eigen::MatrixXd& B, const Eigen::MatrixXd& W,
                                           std::vector<double>& grads) {
    check_inputs(A, B);
    validate_kernel(spec, static_cast<int>(A.cols()));
    if (W.rows() != A.rows() || W.cols() != B.rows()) {
        throw ParamError("kernel_eval_weighted_grads: weight matrix shape mismatch");
    }
    const std::size_t p = static_cast<std::size_t>(n_params(spec));
    if (grads.size() < p) grads.resize(p, 0.0);
    std::size_t cursor = 0;
    accumulate_grads(spec, A, B, W, grads, cursor);
    if (cursor != p) throw NumericalError("kernel gradient cursor mismatch");
    return eval_node(spec, A, B);
}

KernelSpec retarget_dims(KernelSpec spec, const std::vector<int>& dims) {
    if (spec.is_leaf()) {
        spec.dims = dims;
    } else {
        for (auto& c : spec.children) c = retarget_dims(std::move(c), dims);
    }
    return spec;
}

KernelSpec st_kernel(const std::array<KernelSpec, 3>& spatial, const KernelSpec& temporal) {
    std::vector<KernelSpec> axes;
    axes.reserve(4);
    for (int d = 0; d < 3; ++d) axes.push_back(retarget_dims(spatial[d], {d}));
    axes.push_back(retarget_dims(temporal, {3}));
    return KernelSpec::product(std::move(axes));
}

namespace {

void pack_rec(const KernelSpec& s, std::vector<double>& out) {
    auto push_log = [&](double v, const char* what) {
        if (!(v > 0.0)) {
            throw ParamError(std::string("pack_params: ") + kind_name(s.kind) + " " + what +
                             " must be > 0 to optimize, got " + std::to_string(v));
        }
        out.push_back(std::log(v));
    };
    switch (s.kind) {
        case KernelSpec::Kind::Sum:
        case KernelSpec::Kind::Product:
            for (const auto& c : s.children) pack_rec(c, out);
            return;
        case KernelSpec::Kind::SquaredExp:
        case KernelSpec::Kind::Matern52:
            push_log(s.lengthscale, "lengthscale");
            push_log(s.signal_var, "signal_var");
            return;
        case KernelSpec::Kind::RationalQuadratic:
            for (double l : s.ard_lengthscales) push_log(l, "lengthscale");
            push_log(s.alpha, "alpha");
            push_log(s.signal_var, "signal_var");
            return;
        case KernelSpec::Kind::SpectralMixture:
            for (std::size_t q = 0; q < s.sm_weights.size(); ++q) {
                push_log(s.sm_weights[q], "weight");
                push_log(s.sm_means[q], "mean");
                push_log(s.sm_variances[q], "variance");
            }
            return;
        case KernelSpec::Kind::WhiteNoise:
            push_log(s.signal_var, "variance");
            return;
        case KernelSpec::Kind::Linear:
            push_log(s.signal_var, "variance");
            out.push_back(s.offset);
            return;
    }
}

void unpack_rec(KernelSpec& s, const std::vector<double>& in, std::size_t& cursor) {
    switch (s.kind) {
        case KernelSpec::Kind::Sum:
        case KernelSpec::Kind::Product:
            for (auto& c : s.children) unpack_rec(c, in, cursor);
            return;
        case KernelSpec::Kind::SquaredExp:
        case KernelSpec::Kind::Matern52:
            s.lengthscale = std::exp(in[cursor++]);
            s.signal_var = std::exp(in[cursor++]);
            return;
        case KernelSpec::Kind::RationalQuadratic:
            for (double& l : s.ard_lengthscales) l = std::exp(in[cursor++]);
            s.alpha = std::exp(in[cursor++]);
            s.signal_var = std::exp(in[cursor++]);
            return;
        case KernelSpec::Kind::SpectralMixture:
            for (std::size_t q = 0; q < s.sm_weights.size(); ++q) {
                s.sm_weights[q] = std::exp(in[cursor++]);
                s.sm_means[q] = std::exp(in[cursor++]);
                s.sm_variances[q] = std::exp(in[cursor++]);
            }
            return;
        case KernelSpec::Kind::WhiteNoise:
            s.signal_var = std::exp(in[cursor++]);
            return;
        case KernelSpec::Kind::Linear:
            s.signal_var = std::exp(in[cursor++]);
            s.offset = in[cursor++];
            return;
    }
}

void names_rec(const KernelSpec& s, const std::string& prefix, std::vector<std::string>& out) {
    const std::string base = prefix.empty() ? kind_name(s.kind) : prefix + "." + kind_name(s.kind);
    switch (s.kind) {
        case KernelSpec::Kind::Sum:
        case KernelSpec::Kind::Product:
            for (std::size_t c = 0; c < s.children.size(); ++c) {
                names_rec(s.children[c], base + "[" + std::to_string(c) + "]", out);
            }
            return;
        case KernelSpec::Kind::SquaredExp:
        case KernelSpec::Kind::Matern52:
            out.push_back(base + ".lengthscale");
            out.push_back(base + ".signal_var");
            return;
        case KernelSpec::Kind::RationalQuadratic:
            for (std::size_t k = 0; k < s.ard_lengthscales.size(); ++k) {
                out.push_back(base + ".lengthscale[" + std::to_string(k) + "]");
            }
            out.push_back(base + ".alpha");
            out.push_back(base + ".signal_var");
            return;
        case KernelSpec::Kind::SpectralMixture:
            for (std::size_t q = 0; q < s.sm_weights.size(); ++q) {
                out.push_back(base + ".weight[" + std::to_string(q) + "]");
                out.push_back(base + ".mean[" + std::to_string(q) + "]");
                out.push_back(base + ".variance[" + std::to_string(q) + "]");
            }
            return;
        case KernelSpec::Kind::WhiteNoise:
            out.push_back(base + ".variance");
            return;
        case KernelSpec::Kind::Linear:
            out.push_back(base + ".variance");
            out.push_back(base + ".offset");
            return;
    }
}

} // namespace

int n_params(const KernelSpec& spec) {
    switch (spec.kind) {
        case KernelSpec::Kind::Sum:
        case KernelSpec::Kind::Product: {
            int n = 0;
            for (const auto& c : spec.children) n += n_params(c);
            return n;
        }
        case KernelSpec::Kind::SquaredExp:
        case KernelSpec::Kind::Matern52:
            return 2;
        case KernelSpec::Kind::RationalQuadratic:
            return static_cast<int>(spec.ard_lengthscales.size()) + 2;
        case KernelSpec::Kind::SpectralMixture:
            return 3 * static_cast<int>(spec.sm_weights.size());
        case KernelSpec::Kind::WhiteNoise:
            return 1;
        case KernelSpec::Kind::Linear:
            return 2;
    }
    return 0;
}

std::vector<double> pack_params(const KernelSpec& spec) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n_params(spec)));
    pack_rec(spec, out);
    return out;
}

void unpack_params(KernelSpec& spec, const std::vector<double>& packed) {
    if (packed.size() != static_cast<std::size_t>(n_params(spec))) {
        throw ParamError("unpack_params: expected " + std::to_string(n_params(spec)) + " values, got " +
                         std::to_string(packed.size()));
    }
    std::size_t cursor = 0;
    unpack_rec(spec, packed, cursor);
}

std::vector<std::string> param_names(const KernelSpec& spec) {
    std::vector<std::string> out;
    names_rec(spec, "", out);
    return out;
}

nlohmann::json kernel_to_json(const KernelSpec& spec) {
    nlohmann::json j;
    j["type"] = kind_name(spec.kind);
    if (!spec.dims.empty()) j["dims"] = spec.dims;
    switch (spec.kind) {
        case KernelSpec::Kind::Sum:
        case KernelSpec::Kind::Product: {
            nlohmann::json cs = nlohmann::json::array();
            for (const auto& c : spec.children) cs.push_back(kernel_to_json(c));
            j["children"] = std::move(cs);
            break;
        }
        case KernelSpec::Kind::SquaredExp:
        case KernelSpec::Kind::Matern52:
            j["lengthscale"] = spec.lengthscale;
            j["signal_var"] = spec.signal_var;
            break;
        case KernelSpec::Kind::RationalQuadratic:
            j["lengthscales"] = spec.ard_lengthscales;
            j["alpha"] = spec.alpha;
            j["signal_var"] = spec.signal_var;
            break;
        case KernelSpec::Kind::SpectralMixture:
            j["weights"] = spec.sm_weights;
            j["means"] = spec.sm_means;
            j["variances"] = spec.sm_variances;
            break;
        case KernelSpec::Kind::WhiteNoise:
            j["variance"] = spec.signal_var;
            break;
        case KernelSpec::Kind::Linear:
            j["variance"] = spec.signal_var;
            j["offset"] = spec.offset;
            break;
    }
    return j;
}

KernelSpec kernel_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("type")) throw DataError("kernel JSON: missing type");
    const std::string type = j.at("type").get<std::string>();
    KernelSpec s;
    if (j.contains("dims")) s.dims = j.at("dims").get<std::vector<int>>();

    auto need = [&](const char* key) -> const nlohmann::json& {
        if (!j.contains(key)) throw DataError("kernel JSON: " + type + " missing '" + key + "'");
        return j.at(key);
    };

    if (type == "sum" || type == "product") {
        s.kind = type == "sum" ? KernelSpec::Kind::Sum : KernelSpec::Kind::Product;
        for (const auto& c : need("children")) s.children.push_back(kernel_from_json(c));
        if (s.children.empty()) throw DataError("kernel JSON: empty " + type);
    } else if (type == "se" || type == "matern52") {
        s.kind = type == "se" ? KernelSpec::Kind::SquaredExp : KernelSpec::Kind::Matern52;
        s.lengthscale = need("lengthscale").get<double>();
        s.signal_var = need("signal_var").get<double>();
    } else if (type == "rq_ard") {
        s.kind = KernelSpec::Kind::RationalQuadratic;
        s.ard_lengthscales = need("lengthscales").get<std::vector<double>>();
        s.alpha = need("alpha").get<double>();
        s.signal_var = need("signal_var").get<double>();
    } else if (type == "spectral_mixture") {
        s.kind = KernelSpec::Kind::SpectralMixture;
        s.sm_weights = need("weights").get<std::vector<double>>();
        s.sm_means = need("means").get<std::vector<double>>();
        s.sm_variances = need("variances").get<std::vector<double>>();
    } else if (type == "white_noise") {
        s.kind = KernelSpec::Kind::WhiteNoise;
        s.signal_var = need("variance").get<double>();
    } else if (type == "linear") {
        s.kind = KernelSpec::Kind::Linear;
        s.signal_var = need("variance").get<double>();
        s.offset = need("offset").get<double>();
    } else {
        throw DataError("kernel JSON: unknown type '" + type + "'");
    }
    return s;
}

bool kernel_equal_bits(const KernelSpec& a, const KernelSpec& b) {
    auto same = [](double x, double y) {
        return std::memcmp(&x, &y, sizeof(double)) == 0;
    };
    if (a.kind != b.kind || a.dims != b.dims) return false;
    if (a.children.size() != b.children.size()) return false;
    for (std::size_t c = 0; c < a.children.size(); ++c) {
        if (!kernel_equal_bits(a.children[c], b.children[c])) return false;
    }
    auto same_vec = [&](const std::vector<double>& x, const std::vector<double>& y) {
        if (x.size() != y.size()) return false;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (!same(x[i], y[i])) return false;
        }
        return true;
    };
    return same(a.lengthscale, b.lengthscale) && same(a.signal_var, b.signal_var) &&
           same_vec(a.ard_lengthscales, b.ard_lengthscales) && same(a.alpha, b.alpha) &&
           same_vec(a.sm_weights, b.sm_weights) && same_vec(a.sm_means, b.sm_means) &&
           same_vec(a.sm_variances, b.sm_variances) && same(a.offset, b.offset);
}

KernelSpec spectral_mixture_init(int q_components, double sample_period, double time_span,
                                 double target_variance, Rng& rng, std::vector<int> dims) {
    if (q_components < 1) throw ParamError("spectral_mixture_init: need at least one component");
    if (!(sample_period > 0.0) || !(time_span > 0.0)) {
        throw ParamError("spectral_mixture_init: sample_period and time_span must be > 0");
    }
    if (!(target_variance > 0.0)) throw ParamError("spectral_mixture_init: target_variance must be > 0");

    const double nyquist = 0.5 / sample_period;
    std::vector<double> w(q_components), mu(q_components), v(q_components);
    for (int q = 0; q < q_components; ++q) {
        mu[q] = rng.uniform(0.0, nyquist);
        const double u = rng.uniform(time_span * 1e-3, time_span);
        v[q] = 1.0 / (u * u);
        w[q] = target_variance / q_components;
    }
    return KernelSpec::spectral_mixture(std::move(w), std::move(mu), std::move(v), std::move(dims));
}

} // namespace bspm
