#pragma once

#include "fxted/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace fxted {

/// |x|^mu * sign(x); zero at the origin, odd in x.
inline double sgn_mu(double x, double mu) noexcept {
    if (x == 0.0) return 0.0;
    const double m = std::pow(std::abs(x), mu);
    return x > 0.0 ? m : -m;
}

/// sign(x), or the boundary-layer saturation clamp(x/eps, -1, 1) when eps > 0.
inline double sign_term(double x, double eps) noexcept {
    if (eps > 0.0) return std::clamp(x / eps, -1.0, 1.0);
    return static_cast<double>((x > 0.0) - (x < 0.0));
}

/// Protocol gains: consensus gain p, exponents mu1 < 1 < mu2 on the incremental-cost
/// coupling and nu1 < 1 < nu2 on the dispatch/cost consistency error.
struct Gains {
    double p = 1.0;
    double mu1 = 0.8;
    double mu2 = 1.2;
    double nu1 = 0.8;
    double nu2 = 1.2;
    double dt = 1e-4;
    double smoothing_eps = 0.0;

    friend bool operator==(const Gains&, const Gains&) = default;
};

inline void validate(const Gains& g) {
    if (!(g.p > 0.0)) throw ValidationError("gains: p must be positive");
    if (!(g.mu1 > 0.0 && g.mu1 < 1.0)) throw ValidationError("gains: mu1 must lie in (0,1)");
    if (!(g.mu2 > 1.0)) throw ValidationError("gains: mu2 must exceed 1");
    if (!(g.nu1 > 0.0 && g.nu1 < 1.0)) throw ValidationError("gains: nu1 must lie in (0,1)");
    if (!(g.nu2 > 1.0)) throw ValidationError("gains: nu2 must exceed 1");
    if (!(g.dt > 0.0)) throw ValidationError("gains: dt must be positive");
    if (!(g.smoothing_eps >= 0.0)) throw ValidationError("gains: smoothing_eps must be non-negative");
}

/// Per-bus additive disturbance. Both non-trivial kinds are symmetric about zero.
struct NoiseModel {
    enum class Kind { none, uniform, truncated_gaussian };

    Kind kind = Kind::none;
    double bound = 0.0;  // uniform: samples in [-bound, bound]
    double sigma = 0.0;  // truncated_gaussian: clipped at 3 sigma
    std::uint64_t seed = 0;

    static NoiseModel off() { return {}; }
    static NoiseModel uniform(double w, std::uint64_t seed) { return {Kind::uniform, w, 0.0, seed}; }
    static NoiseModel gaussian(double sigma, std::uint64_t seed) {
        return {Kind::truncated_gaussian, 0.0, sigma, seed};
    }

    bool enabled() const noexcept { return kind != Kind::none; }

    /// Largest |sample| the model can produce.
    double clip_bound() const noexcept {
        switch (kind) {
        case Kind::uniform: return bound;
        case Kind::truncated_gaussian: return 3.0 * sigma;
        case Kind::none: break;
        }
        return 0.0;
    }

    friend bool operator==(const NoiseModel&, const NoiseModel&) = default;
};

inline const char* to_string(NoiseModel::Kind k) {
    switch (k) {
    case NoiseModel::Kind::uniform: return "uniform";
    case NoiseModel::Kind::truncated_gaussian: return "truncated_gaussian";
    case NoiseModel::Kind::none: break;
    }
    return "none";
}

inline NoiseModel::Kind noise_kind_from_string(const std::string& s) {
    if (s == "none") return NoiseModel::Kind::none;
    if (s == "uniform") return NoiseModel::Kind::uniform;
    if (s == "truncated_gaussian") return NoiseModel::Kind::truncated_gaussian;
    throw ValidationError("unknown noise kind '" + s + "'");
}

inline void validate(const NoiseModel& n) {
    if (n.kind == NoiseModel::Kind::uniform && !(n.bound > 0.0))
        throw ValidationError("noise: uniform bound must be positive");
    if (n.kind == NoiseModel::Kind::truncated_gaussian && !(n.sigma > 0.0))
        throw ValidationError("noise: sigma must be positive");
}

/// Deterministic stream of disturbance vectors for one run.
class NoiseSampler {
public:
    explicit NoiseSampler(const NoiseModel& model) : model_(model), rng_(model.seed) {}

    /// One sample per generator, in generator order. Zeros when noise is off.
    void sample(std::vector<double>& out) {
        switch (model_.kind) {
        case NoiseModel::Kind::none:
            std::fill(out.begin(), out.end(), 0.0);
            return;
        case NoiseModel::Kind::uniform: {
            std::uniform_real_distribution<double> u(-model_.bound, model_.bound);
            for (double& w : out) w = u(rng_);
            return;
        }
        case NoiseModel::Kind::truncated_gaussian: {
            std::normal_distribution<double> g(0.0, model_.sigma);
            const double clip = model_.clip_bound();
            for (double& w : out) {
                do {
                    w = g(rng_);
                } while (std::abs(w) > clip);
            }
            return;
        }
        }
    }

private:
    NoiseModel model_;
    std::mt19937_64 rng_;
};

} // namespace fxted
