// Exact order-k Markov predicative language model: the ground-truth oracle
// for every diagnostic.  Counts are the source of truth; probabilities are
// derived views (optionally add-α smoothed over W ∪ {∅}).
//
// Sentence starts are modeled by truncated contexts: the context of position
// i is the last min(k-1, i) tokens, which is equivalent to padding with the
// end token since the end token never occurs inside a sentence.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "thermolm/distribution.hpp"
#include "thermolm/errors.hpp"
#include "thermolm/lang.hpp"
#include "thermolm/thermo.hpp"

namespace thermolm {

using Context = std::vector<TokenId>;

struct ContextCounts {
    std::map<TokenId, std::uint64_t> counts;
    std::uint64_t total = 0;
};

class NGramModel {
public:
    // k >= 1; every training sentence is treated as ending with the end
    // token, so each context table row covers W ∪ {∅}.
    static NGramModel fit(const Corpus& corpus, int order, double alpha) {
        if (order < 1) throw Error("fit_ngram: order must be >= 1");
        if (alpha < 0.0) throw Error("fit_ngram: smoothing alpha must be >= 0");
        if (corpus.sentences.empty()) throw Error("fit_ngram: empty corpus");
        NGramModel model;
        model.order_ = order;
        model.alpha_ = alpha;
        model.vocab_ = corpus.vocabulary;
        for (const auto& sentence : corpus.sentences) {
            const auto& ids = sentence.ids();
            for (std::size_t i = 0; i <= ids.size(); ++i) {
                const TokenId next = (i < ids.size()) ? ids[i] : kEndId;
                auto& row = model.table_[model.context_at(ids, i)];
                ++row.counts[next];
                ++row.total;
            }
        }
        return model;
    }

    int order() const { return order_; }
    double alpha() const { return alpha_; }
    const std::shared_ptr<const Vocabulary>& vocabulary() const { return vocab_; }
    std::size_t context_count() const { return table_.size(); }
    const std::map<Context, ContextCounts>& contexts() const { return table_; }

    // Restores a model from (k, alpha, vocabulary, sparse counts).
    static NGramModel from_counts(int order, double alpha,
                                  std::shared_ptr<const Vocabulary> vocab,
                                  std::map<Context, ContextCounts> table) {
        NGramModel model;
        model.order_ = order;
        model.alpha_ = alpha;
        model.vocab_ = std::move(vocab);
        model.table_ = std::move(table);
        return model;
    }

    // Distribution keyed by the last k-1 tokens of the prompt.  Unseen
    // context: error when alpha = 0, uniform-smoothed row otherwise.
    NextTokenDistribution next_distribution(const Sentence& prompt) const {
        check_vocabulary(prompt);
        return distribution_for(context_of(prompt.ids()));
    }

    NextTokenDistribution distribution_for(const Context& ctx) const {
        const std::size_t v = vocab_->size();
        auto it = table_.find(ctx);
        if (it == table_.end()) {
            if (alpha_ <= 0.0)
                throw UnseenContextError(ctx, "unseen context \"" + context_string(ctx) +
                                                  "\" with alpha = 0");
            return NextTokenDistribution(std::vector<double>(v, 1.0 / double(v)));
        }
        const ContextCounts& row = it->second;
        std::vector<double> p(v, 0.0);
        const double denom = double(row.total) + alpha_ * double(v);
        for (std::size_t w = 0; w < v; ++w) {
            auto c = row.counts.find(static_cast<TokenId>(w));
            const double count = (c == row.counts.end()) ? 0.0 : double(c->second);
            p[w] = (count + alpha_) / denom;
        }
        return NextTokenDistribution(std::move(p));
    }

    // Chain-rule probability of the CLM event "output exactly this sentence,
    // then stop": ∏ P(w_i | prompt w_1..w_{i-1}) · P(∅ | prompt·output).
    // An unseen context at alpha = 0 contributes probability 0 by convention
    // and raises *unseen_context when provided.
    double sequence_probability(const Sentence& output, const Sentence& prompt,
                                bool* unseen_context = nullptr) const {
        check_vocabulary(prompt);
        check_vocabulary(output);
        if (unseen_context) *unseen_context = false;
        std::vector<TokenId> ids(prompt.ids());
        double p = 1.0;
        for (std::size_t i = 0; i <= output.length(); ++i) {
            const TokenId next =
                (i < output.length()) ? output.ids()[i] : kEndId;
            try {
                p *= distribution_for(context_of(ids))[next];
            } catch (const UnseenContextError&) {
                if (unseen_context) *unseen_context = true;
                return 0.0;
            }
            if (p == 0.0) return 0.0;
            ids.push_back(next);
        }
        return p;
    }

    Context context_of(const std::vector<TokenId>& ids) const {
        return context_at(ids, ids.size());
    }

    std::string context_string(const Context& ctx) const {
        if (ctx.empty()) return std::string(kEndGlyph);
        std::string out;
        for (std::size_t i = 0; i < ctx.size(); ++i) {
            if (i) out.push_back(' ');
            out += vocab_->token(ctx[i]);
        }
        return out;
    }

    void check_vocabulary(const Sentence& s) const {
        if (s.vocabulary() && !s.vocabulary()->same_as(*vocab_))
            throw VocabularyMismatchError("sentence vocabulary differs from model vocabulary");
    }

private:
    NGramModel() = default;

    // Last min(k-1, position) tokens before `position`.
    Context context_at(const std::vector<TokenId>& ids, std::size_t position) const {
        const std::size_t len = std::min<std::size_t>(order_ - 1, position);
        return Context(ids.begin() + (position - len), ids.begin() + position);
    }

    int order_ = 1;
    double alpha_ = 0.0;
    std::shared_ptr<const Vocabulary> vocab_;
    std::map<Context, ContextCounts> table_;
};

// ---------------------------------------------------------------------------
// CLM entropy
// ---------------------------------------------------------------------------

struct ClmEntropyPartial {
    double entropy;        // exact partial sum over terminating outputs
    double tail_mass;      // probability mass of outputs longer than L
    std::uint64_t states;  // nodes expanded
};

inline constexpr std::uint64_t kEnumerationBudget = 10'000'000;

namespace detail {

inline void entropy_walk(const NGramModel& model, Context ctx, std::size_t depth,
                         std::size_t max_len, double path_p, ClmEntropyPartial& out,
                         std::uint64_t budget) {
    if (++out.states > budget)
        throw EnumerationBudgetError(
            "enumeration budget exceeded; use clm_entropy_exact for Markov models");
    const NextTokenDistribution dist = model.distribution_for(ctx);
    const double p_end = path_p * dist[0];
    if (p_end > 0.0) out.entropy -= xlogx(p_end) / p_end * p_end;  // -P log P
    if (depth == max_len) {
        out.tail_mass += path_p * (1.0 - dist[0]);
        return;
    }
    const int k = model.order();
    for (std::size_t w = 1; w < dist.size(); ++w) {
        const double p = dist[w];
        if (p <= 0.0) continue;
        Context next = ctx;
        next.push_back(static_cast<TokenId>(w));
        if (static_cast<int>(next.size()) > k - 1)
            next.erase(next.begin(), next.end() - (k - 1));
        entropy_walk(model, std::move(next), depth + 1, max_len, path_p * p, out, budget);
    }
}

}  // namespace detail

// Truncated-sum entropy of the output distribution: exact over all
// terminating outputs of length <= max_len plus the unaccounted tail mass.
// Zero-probability branches are pruned; expanding more than `budget` nodes
// is an error advising the closed-form route.
inline ClmEntropyPartial clm_entropy_enumerate(const NGramModel& model,
                                               const Sentence& prompt,
                                               std::size_t max_len,
                                               std::uint64_t budget = kEnumerationBudget) {
    model.check_vocabulary(prompt);
    ClmEntropyPartial out{0.0, 0.0, 0};
    detail::entropy_walk(model, model.context_of(prompt.ids()), 0, max_len, 1.0, out,
                         budget);
    return out;
}

// Exact CLM entropy via the chain rule for the stopping process:
//   H(c) = h(c) + Σ_{w≠∅} P(w|c) H(c·w)
// a linear system over the reachable context set, solved directly.
// Requires the chain to reach the end token almost surely (spectral radius
// of the continuation matrix < 1).
inline double clm_entropy_exact(const NGramModel& model, const Sentence& prompt,
                                std::size_t max_states = 4000) {
    model.check_vocabulary(prompt);
    const Context start = model.context_of(prompt.ids());

    // reachable contexts through nonzero-probability continuations
    std::map<Context, std::size_t> state_index;
    std::vector<Context> states;
    std::vector<Context> frontier{start};
    state_index.emplace(start, 0);
    states.push_back(start);
    const int k = model.order();
    while (!frontier.empty()) {
        Context ctx = std::move(frontier.back());
        frontier.pop_back();
        const NextTokenDistribution dist = model.distribution_for(ctx);
        for (std::size_t w = 1; w < dist.size(); ++w) {
            if (dist[w] <= 0.0) continue;
            Context next = ctx;
            next.push_back(static_cast<TokenId>(w));
            if (static_cast<int>(next.size()) > k - 1)
                next.erase(next.begin(), next.end() - (k - 1));
            if (state_index.emplace(next, states.size()).second) {
                if (states.size() >= max_states)
                    throw EnumerationBudgetError(
                        "context state space exceeds the dense-solve budget");
                states.push_back(next);
                frontier.push_back(std::move(next));
            }
        }
    }

    const std::size_t n = states.size();
    Eigen::MatrixXd t_matrix = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd h_step(n);
    for (std::size_t i = 0; i < n; ++i) {
        const NextTokenDistribution dist = model.distribution_for(states[i]);
        h_step(i) = shannon_entropy(dist);
        for (std::size_t w = 1; w < dist.size(); ++w) {
            if (dist[w] <= 0.0) continue;
            Context next = states[i];
            next.push_back(static_cast<TokenId>(w));
            if (static_cast<int>(next.size()) > k - 1)
                next.erase(next.begin(), next.end() - (k - 1));
            t_matrix(i, state_index.at(next)) += dist[w];
        }
    }

    // power iteration estimate of the spectral radius of the nonnegative T
    Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
    double rho = 0.0;
    for (int iter = 0; iter < 500; ++iter) {
        Eigen::VectorXd next = t_matrix * v;
        const double norm = next.lpNorm<Eigen::Infinity>();
        if (norm == 0.0) {
            rho = 0.0;
            break;
        }
        rho = norm;
        v = next / norm;
    }
    if (rho >= 1.0 - 1e-9)
        throw NonTerminatingError(
            "generation chain does not reach the end token almost surely "
            "(spectral radius ≈ " +
            std::to_string(rho) + "); entropy may be infinite");

    Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(n, n) - t_matrix;
    Eigen::VectorXd h = lhs.partialPivLu().solve(h_step);
    return h(state_index.at(start));
}

// ---------------------------------------------------------------------------
// Exhaustive completion enumeration (small-instance oracle)
// ---------------------------------------------------------------------------

struct CompletionSet {
    std::vector<std::pair<Sentence, double>> outputs;  // terminating outputs, chain-rule prob
    double terminated_mass = 0.0;
    double frontier_mass = 0.0;  // mass of paths still alive at max_len
    // first emitted token -> (terminated, frontier) mass of its subtree
    std::map<TokenId, double> first_token_terminated;
    std::map<TokenId, double> first_token_frontier;
};

namespace detail {

inline void completion_walk(const PlmFn& model,
                            const std::shared_ptr<const Vocabulary>& vocab,
                            std::vector<TokenId>& full, std::size_t prompt_len,
                            std::size_t max_len, double path_p, CompletionSet& out,
                            std::uint64_t& nodes, std::uint64_t budget) {
    if (++nodes > budget)
        throw EnumerationBudgetError("completion enumeration budget exceeded");
    const Sentence current(vocab, full);
    const NextTokenDistribution dist = model(current);
    const std::size_t emitted = full.size() - prompt_len;
    const auto first_token = [&]() -> TokenId {
        return emitted == 0 ? kEndId : full[prompt_len];
    };
    const double p_stop = path_p * dist[0];
    if (p_stop > 0.0) {
        out.outputs.emplace_back(
            Sentence(vocab, std::vector<TokenId>(full.begin() + prompt_len, full.end())),
            p_stop);
        out.terminated_mass += p_stop;
        out.first_token_terminated[first_token()] += p_stop;
    }
    if (emitted == max_len) {
        const double alive = path_p * (1.0 - dist[0]);
        out.frontier_mass += alive;
        if (alive > 0.0) out.first_token_frontier[first_token()] += alive;
        return;
    }
    for (std::size_t w = 1; w < dist.size(); ++w) {
        const double p = dist[w];
        if (p <= 0.0) continue;
        full.push_back(static_cast<TokenId>(w));
        completion_walk(model, vocab, full, prompt_len, max_len, path_p * p, out, nodes,
                        budget);
        full.pop_back();
    }
}

}  // namespace detail

// Enumerates every output of length <= max_len with positive chain-rule
// probability, tracking terminated and still-alive mass per first token.
// Works for any PLM; exponential in max_len, so small instances only.
inline CompletionSet enumerate_completions(const PlmFn& model,
                                           const std::shared_ptr<const Vocabulary>& vocab,
                                           const Sentence& prompt, std::size_t max_len,
                                           std::uint64_t budget = kEnumerationBudget) {
    CompletionSet out;
    std::vector<TokenId> full(prompt.ids());
    std::uint64_t nodes = 0;
    detail::completion_walk(model, vocab, full, prompt.length(), max_len, 1.0, out,
                            nodes, budget);
    return out;
}

}  // namespace thermolm
