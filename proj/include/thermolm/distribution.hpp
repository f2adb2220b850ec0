// Probability vector over the vocabulary plus the end token; the element of
// the moduli space of distributions.
#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "thermolm/errors.hpp"

namespace thermolm {

inline constexpr double kDistributionSumTolerance = 1e-12;

// Dense probability vector indexed by token id; slot 0 is the end token.
class NextTokenDistribution {
public:
    explicit NextTokenDistribution(std::vector<double> probs)
        : p_(std::move(probs)) {
        if (p_.empty()) throw Error("distribution must have at least one slot");
        double sum = 0.0;
        for (double v : p_) {
            if (!(v >= 0.0) || !std::isfinite(v))
                throw Error("distribution entries must be finite and nonnegative");
            sum += v;
        }
        if (std::abs(sum - 1.0) > kDistributionSumTolerance)
            throw Error("distribution does not sum to 1");
    }

    std::size_t size() const { return p_.size(); }
    double operator[](std::size_t i) const { return p_[i]; }
    const std::vector<double>& probs() const { return p_; }
    double end_probability() const { return p_[0]; }

    bool operator==(const NextTokenDistribution& other) const { return p_ == other.p_; }

private:
    std::vector<double> p_;
};

}  // namespace thermolm
