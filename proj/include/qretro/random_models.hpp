// random_models.hpp — seed-reproducible random models, states and devices for
// the verification suites.  Hamiltonians are Hermitian parts of matrices with
// entries uniform in the complex unit square; jump operators are similar
// matrices rescaled so the spectral norm of A^+A is at most one.
#pragma once

#include <qretro/devices.hpp>
#include <qretro/lindblad.hpp>
#include <qretro/opalg.hpp>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace qretro::shell {

class ModelRng {
  public:
    explicit ModelRng(std::uint64_t seed) : rng_(seed) {}

    double uniform() { return dist_(rng_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    Complex unit_square() { return {uniform(), uniform()}; }

    Operator raw(Eigen::Index d) {
        Operator m(d, d);
        for (Eigen::Index r = 0; r < d; ++r)
            for (Eigen::Index c = 0; c < d; ++c) m(r, c) = unit_square();
        return m;
    }

    Operator hermitian(Eigen::Index d) {
        const Operator r = raw(d);
        return 0.5 * (r + r.adjoint().eval());
    }

    Operator jump(Eigen::Index d) {
        Operator a = raw(d);
        Eigen::SelfAdjointEigenSolver<Operator> solver(Operator(a.adjoint() * a),
                                                       Eigen::EigenvaluesOnly);
        const double top = solver.eigenvalues().maxCoeff();
        if (top > 1.0) a /= std::sqrt(top);
        return a;
    }

    // Full-rank unit-trace state R^+R / tr(R^+R).
    Operator density(Eigen::Index d) {
        const Operator r = raw(d);
        Operator m = r.adjoint() * r;
        return m / m.trace().real();
    }

    // Unnormalised non-negative operator.
    Operator psd(Eigen::Index d) {
        const Operator r = raw(d);
        return r.adjoint() * r;
    }

    lindblad::LindbladModel model(Eigen::Index d, std::size_t n_jumps) {
        Operator h = hermitian(d);
        std::vector<Operator> jumps;
        jumps.reserve(n_jumps);
        for (std::size_t q = 0; q < n_jumps; ++q) jumps.push_back(jump(d));
        return lindblad::make_model(std::move(h), std::move(jumps));
    }

    // A generically biased device with n random non-negative operators.
    devices::DeviceSet device(devices::DeviceKind kind, Eigen::Index d, std::size_t n,
                              const std::string& prefix) {
        std::vector<std::string> labels;
        std::vector<Operator> ops;
        for (std::size_t k = 0; k < n; ++k) {
            labels.push_back(prefix + std::to_string(k));
            ops.push_back(psd(d));
        }
        return devices::build_device_set(kind, std::move(labels), std::move(ops));
    }

  private:
    std::mt19937_64 rng_;
    std::uniform_real_distribution<double> dist_{0.0, 1.0};
};

}  // namespace qretro::shell
