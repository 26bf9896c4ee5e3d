#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mimdm/errors.hpp"
#include "mimdm/mi_matrix.hpp"
#include "mimdm/rng.hpp"
#include "mimdm/sequence.hpp"

namespace mimdm {

// Base marginals plus, for every probed masked position i and token v, the
// model's conditionals with X_i pinned to v. Probing a state with fewer than
// two masked positions yields an empty probe set (only the base pass runs).
struct ProbedConditionals {
    int n = 0;
    int vocab = 0;
    Marginals base;
    std::vector<int> masked; // probed positions, ascending
    // cond[idx(i)][v] is an n x vocab table of P(X_j | X_i = v, C)
    std::vector<std::vector<std::vector<double>>> cond;

    bool empty() const { return masked.empty(); }

    int index_of(int position) const {
        for (std::size_t k = 0; k < masked.size(); ++k)
            if (masked[k] == position) return static_cast<int>(k);
        throw UsageError("probe: position " + std::to_string(position) + " was not probed");
    }
};

// 1 base pass plus |masked| * |V| conditional passes. Pinning X_i = v means
// committing the token and clearing the mask flag for that single pass; the
// caller's state is never touched.
inline ProbedConditionals probe_conditionals(const MarginalModel& model,
                                             const SequenceState& state) {
    ProbedConditionals out;
    out.n = model.seq_len();
    out.vocab = model.vocab_size();
    out.base = model.forward_marginals(state);

    const auto masked = state.masked_indices();
    if (masked.size() < 2) return out; // MI undefined without a pair

    out.masked = masked;
    out.cond.resize(masked.size());
    for (std::size_t k = 0; k < masked.size(); ++k) {
        out.cond[k].resize(static_cast<std::size_t>(out.vocab));
        for (int v = 0; v < out.vocab; ++v) {
            SequenceState pinned = state;
            pinned.commit(masked[k], v);
            out.cond[k][static_cast<std::size_t>(v)] = model.forward_marginals(pinned).probs;
        }
    }
    return out;
}

// H(X_j | C) - H(X_j | X_i, C), where the conditional entropy is the
// P(X_i = v | C)-weighted sum of pointwise entropies. Raw value; may be
// slightly negative or asymmetric when the model's conditionals are not
// consistent with any true joint.
inline double conditional_entropy_reduction(const ProbedConditionals& probes, int i, int j) {
    if (i == j) throw UsageError("entropy reduction needs i != j");
    const int ii = probes.index_of(i);
    (void)probes.index_of(j); // both must be masked

    const double h_base = entropy_nats(probes.base.row(j), probes.vocab);
    double h_cond = 0.0;
    for (int v = 0; v < probes.vocab; ++v) {
        const double w = probes.base.prob(i, v);
        if (w <= 0.0) continue;
        const double* row =
            probes.cond[static_cast<std::size_t>(ii)][static_cast<std::size_t>(v)].data() +
            static_cast<std::size_t>(j) * probes.vocab;
        h_cond += w * entropy_nats(row, probes.vocab);
    }
    return h_base - h_cond;
}

// Exact pairwise conditional MI over all masked pairs via conditional
// probing, then symmetrized and clamped to the MI invariants.
// Consumes exactly 1 + m*|V| model calls for m >= 2 masked positions.
inline MIMatrix ground_truth_mi(const MarginalModel& model, const SequenceState& state) {
    MIMatrix m(model.seq_len(), state.masked_indices());
    const ProbedConditionals probes = probe_conditionals(model, state);
    if (probes.empty()) return m;
    for (std::size_t a = 0; a < probes.masked.size(); ++a)
        for (std::size_t b = 0; b < probes.masked.size(); ++b) {
            if (a == b) continue;
            m.at(probes.masked[a], probes.masked[b]) =
                conditional_entropy_reduction(probes, probes.masked[a], probes.masked[b]);
        }
    m.symmetrize_clamp();
    return m;
}

// Explicit joint distribution over vocab^n outcomes (n small). Implements
// the model interface by exact marginalization, so probed conditionals are
// consistent with a true joint by construction.
class MockJointModel : public MarginalModel {
public:
    MockJointModel(int n, int vocab, std::vector<double> joint)
        : n_(n), vocab_(vocab), joint_(std::move(joint)) {
        if (n_ < 1 || n_ > 4 || vocab_ < 2 || vocab_ > 4)
            throw UsageError("mock joint: need 1 <= n <= 4 and 2 <= vocab <= 4");
        std::size_t expect = 1;
        for (int i = 0; i < n_; ++i) expect *= static_cast<std::size_t>(vocab_);
        if (joint_.size() != expect) throw ShapeError("mock joint: table size mismatch");
        double z = 0.0;
        for (double p : joint_) {
            if (p < 0.0) throw UsageError("mock joint: negative probability");
            z += p;
        }
        if (std::fabs(z - 1.0) > 1e-12)
            for (double& p : joint_) p /= z;
    }

    static MockJointModel random(int n, int vocab, Rng& rng) {
        std::size_t size = 1;
        for (int i = 0; i < n; ++i) size *= static_cast<std::size_t>(vocab);
        std::vector<double> table(size);
        double z = 0.0;
        for (double& p : table) {
            p = -std::log(1.0 - rng.uniform()); // Exp(1) draws -> Dirichlet(1)
            z += p;
        }
        for (double& p : table) p /= z;
        return MockJointModel(n, vocab, std::move(table));
    }

    // two positions forced equal, uniform over the vocabulary
    static MockJointModel copy_channel(int vocab) {
        std::vector<double> table(static_cast<std::size_t>(vocab) * vocab, 0.0);
        for (int v = 0; v < vocab; ++v)
            table[static_cast<std::size_t>(v) * vocab + v] = 1.0 / vocab;
        return MockJointModel(2, vocab, std::move(table));
    }

    static MockJointModel product(const std::vector<std::vector<double>>& marginals) {
        const int n = static_cast<int>(marginals.size());
        const int vocab = static_cast<int>(marginals.front().size());
        std::size_t size = 1;
        for (int i = 0; i < n; ++i) size *= static_cast<std::size_t>(vocab);
        std::vector<double> table(size, 1.0);
        for (std::size_t o = 0; o < size; ++o) {
            std::size_t rest = o;
            for (int pos = n - 1; pos >= 0; --pos) {
                table[o] *= marginals[static_cast<std::size_t>(pos)]
                                     [rest % static_cast<std::size_t>(vocab)];
                rest /= static_cast<std::size_t>(vocab);
            }
        }
        return MockJointModel(n, vocab, std::move(table));
    }

    // uniform over {(a, b, a xor b)}: pairwise independent, jointly dependent
    static MockJointModel xor_triple() {
        std::vector<double> table(8, 0.0);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                table[static_cast<std::size_t>(a) * 4 + static_cast<std::size_t>(b) * 2 +
                      static_cast<std::size_t>(a ^ b)] = 0.25;
        return MockJointModel(3, 2, std::move(table));
    }

    int seq_len() const override { return n_; }
    int vocab_size() const override { return vocab_; }

    Marginals forward_marginals(const SequenceState& state) const override {
        if (state.size() != n_ || state.mask_token != vocab_)
            throw ShapeError("mock joint: state shape mismatch");
        count_nfe();
        Marginals m;
        m.n = n_;
        m.vocab = vocab_;
        m.probs.assign(static_cast<std::size_t>(n_) * vocab_, 0.0);

        double z = 0.0;
        std::vector<int> outcome(static_cast<std::size_t>(n_));
        for (std::size_t o = 0; o < joint_.size(); ++o) {
            decode_outcome(o, outcome);
            if (!consistent(outcome, state)) continue;
            z += joint_[o];
            for (int i = 0; i < n_; ++i)
                m.probs[static_cast<std::size_t>(i) * vocab_ +
                        outcome[static_cast<std::size_t>(i)]] += joint_[o];
        }

        for (int i = 0; i < n_; ++i) {
            double* row = m.probs.data() + static_cast<std::size_t>(i) * vocab_;
            if (!state.mask_flags[static_cast<std::size_t>(i)]) {
                std::fill(row, row + vocab_, 0.0);
                row[state.tokens[static_cast<std::size_t>(i)]] = 1.0;
            } else if (z > 0.0) {
                for (int v = 0; v < vocab_; ++v) row[v] /= z;
            } else {
                // zero-probability context: weight in any MI sum is zero,
                // return uniform so downstream entropies stay finite
                std::fill(row, row + vocab_, 1.0 / vocab_);
            }
        }
        return m;
    }

    // P(X_i, X_j | C) as a vocab x vocab table; errors on impossible context
    std::vector<double> conditional_pair_joint(const SequenceState& state, int i, int j) const {
        std::vector<double> table(static_cast<std::size_t>(vocab_) * vocab_, 0.0);
        double z = 0.0;
        std::vector<int> outcome(static_cast<std::size_t>(n_));
        for (std::size_t o = 0; o < joint_.size(); ++o) {
            decode_outcome(o, outcome);
            if (!consistent(outcome, state)) continue;
            z += joint_[o];
            table[static_cast<std::size_t>(outcome[static_cast<std::size_t>(i)]) * vocab_ +
                  outcome[static_cast<std::size_t>(j)]] += joint_[o];
        }
        if (z <= 0.0) throw DataError("zero-probability context");
        for (double& p : table) p /= z;
        return table;
    }

private:
    int n_;
    int vocab_;
    std::vector<double> joint_;

    void decode_outcome(std::size_t o, std::vector<int>& outcome) const {
        for (int pos = n_ - 1; pos >= 0; --pos) {
            outcome[static_cast<std::size_t>(pos)] = static_cast<int>(o % static_cast<std::size_t>(vocab_));
            o /= static_cast<std::size_t>(vocab_);
        }
    }

    static bool consistent(const std::vector<int>& outcome, const SequenceState& state) {
        for (std::size_t i = 0; i < outcome.size(); ++i)
            if (!state.mask_flags[i] && outcome[i] != state.tokens[i]) return false;
        return true;
    }
};

// Independent oracle: brute-force the pair joints from the explicit table
// and apply the MI double sum directly.
inline MIMatrix enumerate_mi_exact(const MockJointModel& joint, const SequenceState& state) {
    const int vocab = joint.vocab_size();
    MIMatrix m(joint.seq_len(), state.masked_indices());
    const auto& masked = m.masked_set;
    for (std::size_t a = 0; a < masked.size(); ++a) {
        for (std::size_t b = a + 1; b < masked.size(); ++b) {
            const int i = masked[a], j = masked[b];
            const auto pair = joint.conditional_pair_joint(state, i, j);
            std::vector<double> pi(static_cast<std::size_t>(vocab), 0.0);
            std::vector<double> pj(static_cast<std::size_t>(vocab), 0.0);
            for (int x = 0; x < vocab; ++x)
                for (int y = 0; y < vocab; ++y) {
                    pi[static_cast<std::size_t>(x)] += pair[static_cast<std::size_t>(x) * vocab + y];
                    pj[static_cast<std::size_t>(y)] += pair[static_cast<std::size_t>(x) * vocab + y];
                }
            double mi = 0.0;
            for (int x = 0; x < vocab; ++x)
                for (int y = 0; y < vocab; ++y) {
                    const double p = pair[static_cast<std::size_t>(x) * vocab + y];
                    if (p <= 0.0) continue;
                    mi += p * std::log(p / (pi[static_cast<std::size_t>(x)] *
                                            pj[static_cast<std::size_t>(y)]));
                }
            const double v = mi > 0.0 ? mi : 0.0;
            m.at(i, j) = v;
            m.at(j, i) = v; // symmetric by construction
        }
    }
    return m;
}

// joint entropy of a masked pair given context, for chain-rule checks
inline double pair_joint_entropy(const MockJointModel& joint, const SequenceState& state,
                                 int i, int j) {
    const auto pair = joint.conditional_pair_joint(state, i, j);
    return entropy_nats(pair.data(), static_cast<int>(pair.size()));
}

} // namespace mimdm
