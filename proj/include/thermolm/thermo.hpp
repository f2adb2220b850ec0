// Thermodynamic functions over next-token ensembles: entropy, Boltzmann
// distributions, partition function, internal energy, Helmholtz free energy,
// identity checks, singularity scanning and the maximum-entropy probe.
//
// Conventions: natural log everywhere (nats), 0*log 0 = 0, probabilities
// P ∝ exp(-β E).  Energies are dimensionless; β carries the inverse
// temperature.  The additive constant of an energy vector is a gauge choice
// and is recorded explicitly so round-trips stay well defined.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "thermolm/distribution.hpp"
#include "thermolm/errors.hpp"
#include "thermolm/lang.hpp"
#include "thermolm/rng.hpp"

namespace thermolm {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class EnergyGauge { MinZero, LogProb, RawPairing };

inline std::string_view energy_gauge_name(EnergyGauge g) {
    switch (g) {
        case EnergyGauge::MinZero: return "min-zero";
        case EnergyGauge::LogProb: return "log-prob";
        default: return "raw-pairing";
    }
}

// Per-token energies over W ∪ {∅}.  +inf marks an excluded state
// (probability exactly 0 at any temperature).
struct EnergyVector {
    std::vector<double> energies;
    EnergyGauge gauge = EnergyGauge::MinZero;
};

struct PartitionValue {
    double z;        // exp(log_z); +inf if overflowed
    double log_z;
    bool overflowed;  // z not representable as a finite double
};

// Snapshot of the ensemble at one prompt.
struct ThermoState {
    double beta;
    double z;
    double log_z;
    double internal_energy;
    double entropy;
    double free_energy;
};

// -log p with the 0*log 0 = 0 convention applied by callers.
inline double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

// Shannon entropy in nats; lies in [0, log n].
inline double shannon_entropy(const NextTokenDistribution& dist) {
    double s = 0.0;
    for (double p : dist.probs()) s -= xlogx(p);
    return s;
}

namespace detail {

inline double min_finite_energy(const std::vector<double>& e) {
    double m = kInf;
    for (double v : e) {
        if (std::isnan(v)) throw Error("energy vector contains NaN");
        if (v < m) m = v;
    }
    if (m == kInf) throw Error("all energies are +inf: empty ensemble");
    return m;
}

}  // namespace detail

// Z = Σ exp(-β E_i), evaluated in the min-shifted gauge so the log never
// overflows; `z` itself may still saturate to +inf for extreme inputs.
inline PartitionValue partition_function(const EnergyVector& energies, double beta) {
    if (beta < 0.0) throw Error("partition_function: beta must be >= 0");
    const double e_min = detail::min_finite_energy(energies.energies);
    double acc = 0.0;
    for (double e : energies.energies) {
        if (e == kInf) continue;
        acc += std::exp(-beta * (e - e_min));
    }
    const double log_z = std::log(acc) - beta * e_min;
    const double z = std::exp(log_z);
    return PartitionValue{z, log_z, !std::isfinite(z)};
}

// p_i = exp(-β E_i)/Z.  β = 0 yields the exact uniform distribution over the
// finite-energy support; +inf energies always map to probability 0.
inline NextTokenDistribution boltzmann(const EnergyVector& energies, double beta) {
    if (beta < 0.0) throw Error("boltzmann: beta must be >= 0");
    const auto& e = energies.energies;
    const double e_min = detail::min_finite_energy(e);
    std::vector<double> w(e.size(), 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (e[i] == kInf) continue;
        w[i] = std::exp(-beta * (e[i] - e_min));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return NextTokenDistribution(std::move(w));
}

// U = Σ p_i E_i; excluded states (p = 0, E = +inf) contribute 0.
inline double internal_energy(const NextTokenDistribution& dist,
                              const EnergyVector& energies) {
    if (dist.size() != energies.energies.size())
        throw Error("internal_energy: dimension mismatch");
    double u = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        const double p = dist[i];
        if (p > 0.0) u += p * energies.energies[i];
    }
    return u;
}

// F = U - S/β.
inline double free_energy(double internal_energy, double entropy, double beta) {
    if (beta <= 0.0) throw Error("free_energy: beta must be > 0");
    return internal_energy - entropy / beta;
}

// F = -(1/β) log Z.
inline double free_energy_from_log_z(double log_z, double beta) {
    if (beta <= 0.0) throw Error("free_energy: beta must be > 0");
    return -log_z / beta;
}

// Inverts P ∝ exp(-β E): E = -(1/β) log p up to the chosen gauge.  Zero
// probabilities map to +inf and survive the round-trip through boltzmann().
inline EnergyVector energies_from_distribution(const NextTokenDistribution& dist,
                                               double beta, EnergyGauge gauge) {
    if (beta <= 0.0) throw Error("energies_from_distribution: beta must be > 0");
    std::vector<double> e(dist.size(), kInf);
    double max_p = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) max_p = std::max(max_p, dist[i]);
    for (std::size_t i = 0; i < dist.size(); ++i) {
        const double p = dist[i];
        if (p <= 0.0) continue;
        if (gauge == EnergyGauge::MinZero) {
            // shift so the most probable state sits at energy 0
            e[i] = -(std::log(p) - std::log(max_p)) / beta;
        } else {
            e[i] = -std::log(p) / beta;
        }
    }
    return EnergyVector{std::move(e), gauge};
}

struct GibbsResidual {
    double gibbs;      // |S - βU - log Z|
    double helmholtz;  // |F - U + S/β|
};

// Residuals of S = βU + log Z and F = U - S/β for a (dist, energies, β)
// triple.  Consistent Boltzmann inputs stay within 1e-10; inconsistent pairs
// report their residual instead of throwing.
inline GibbsResidual gibbs_check(const NextTokenDistribution& dist,
                                 const EnergyVector& energies, double beta) {
    const double s = shannon_entropy(dist);
    const double u = internal_energy(dist, energies);
    const PartitionValue pv = partition_function(energies, beta);
    const double f = free_energy_from_log_z(pv.log_z, beta);
    return GibbsResidual{std::abs(s - beta * u - pv.log_z),
                         std::abs(f - u + s / beta)};
}

inline ThermoState thermo_state(const NextTokenDistribution& dist,
                                const EnergyVector& energies, double beta) {
    const PartitionValue pv = partition_function(energies, beta);
    return ThermoState{beta,
                       pv.z,
                       pv.log_z,
                       internal_energy(dist, energies),
                       shannon_entropy(dist),
                       free_energy_from_log_z(pv.log_z, beta)};
}

// Any predicative model reduced to its next-token map.
using PlmFn = std::function<NextTokenDistribution(const Sentence&)>;

struct SingularityHit {
    Sentence prompt;
    double entropy;
};

// Next-token entropy per prompt; returns those with entropy <= epsilon,
// sorted ascending.  epsilon = 0 returns exact singularities only.  Unseen
// contexts are the model's business: its exception propagates.
inline std::vector<SingularityHit> singularity_scan(const PlmFn& model,
                                                    const std::vector<Sentence>& prompts,
                                                    double epsilon) {
    if (epsilon < 0.0) throw Error("singularity_scan: epsilon must be >= 0");
    std::vector<SingularityHit> hits;
    for (const auto& prompt : prompts) {
        const double s = shannon_entropy(model(prompt));
        if (s <= epsilon) hits.push_back(SingularityHit{prompt, s});
    }
    std::stable_sort(hits.begin(), hits.end(),
                     [](const SingularityHit& a, const SingularityHit& b) {
                         return a.entropy < b.entropy;
                     });
    return hits;
}

struct MaxEntropyReport {
    int trials = 0;
    int feasible = 0;
    int violations = 0;
    double worst_margin = -kInf;  // max over trials of S(p+u) - S(p)
};

// Empirical check that the Boltzmann distribution maximizes entropy at fixed
// average energy: perturbs p by random directions u with Σu = 0 and
// Σ u_i E_i = 0, scaled to stay inside the simplex, and requires
// S(p+u) <= S(p) + 1e-12.
inline MaxEntropyReport max_entropy_probe(const EnergyVector& energies, double beta,
                                          int trials, std::uint64_t seed) {
    const NextTokenDistribution p = boltzmann(energies, beta);
    std::vector<std::size_t> support;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0.0) support.push_back(i);

    const double s_base = shannon_entropy(p);
    Rng rng(seed);
    MaxEntropyReport report;
    report.trials = trials;

    const std::size_t m = support.size();
    for (int t = 0; t < trials; ++t) {
        // Gaussian direction projected orthogonal to 1 and E on the support.
        std::vector<double> u(m);
        for (auto& v : u) v = rng.gaussian();

        std::vector<double> ones(m, 1.0), evec(m);
        for (std::size_t i = 0; i < m; ++i) evec[i] = energies.energies[support[i]];
        auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
            double d = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) d += a[i] * b[i];
            return d;
        };
        // Gram-Schmidt on {1, E}
        const double n1 = dot(ones, ones);
        const double e_mean = dot(evec, ones) / n1;
        for (std::size_t i = 0; i < m; ++i) evec[i] -= e_mean;
        const double proj1 = dot(u, ones) / n1;
        for (std::size_t i = 0; i < m; ++i) u[i] -= proj1;
        const double ne = dot(evec, evec);
        if (ne > 1e-24) {
            const double proje = dot(u, evec) / ne;
            for (std::size_t i = 0; i < m; ++i) u[i] -= proje * evec[i];
        }
        const double nu = std::sqrt(dot(u, u));
        if (nu < 1e-12) continue;  // no feasible direction, skipped trial
        for (auto& v : u) v /= nu;

        // largest step keeping p + t*u inside the simplex
        double t_max = kInf;
        for (std::size_t i = 0; i < m; ++i)
            if (u[i] < 0.0) t_max = std::min(t_max, p[support[i]] / -u[i]);
        if (!std::isfinite(t_max) || t_max <= 0.0) continue;
        const double step = rng.uniform() * 0.999 * t_max;

        std::vector<double> q(p.probs());
        for (std::size_t i = 0; i < m; ++i)
            q[support[i]] = std::max(0.0, q[support[i]] + step * u[i]);
        double qs = 0.0;
        for (double v : q) qs += v;
        for (double& v : q) v /= qs;  // renormalize away float dust

        double s_q = 0.0;
        for (double v : q) s_q -= xlogx(v);
        const double margin = s_q - s_base;
        ++report.feasible;
        report.worst_margin = std::max(report.worst_margin, margin);
        if (margin > 1e-12) ++report.violations;
    }
    return report;
}

}  // namespace thermolm
