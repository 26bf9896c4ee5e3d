#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mimdm/errors.hpp"
#include "mimdm/rng.hpp"

namespace mimdm {

// Token sequence with mask flags. tokens[i] == mask_token iff mask_flags[i].
// Pinned positions (clues) are never masked and never resampled.
struct SequenceState {
    std::vector<int> tokens;
    std::vector<std::uint8_t> mask_flags;
    std::vector<std::uint8_t> pinned;
    int mask_token = 0;

    int size() const { return static_cast<int>(tokens.size()); }

    int masked_count() const {
        int m = 0;
        for (auto f : mask_flags) m += f ? 1 : 0;
        return m;
    }

    std::vector<int> masked_indices() const {
        std::vector<int> out;
        for (int i = 0; i < size(); ++i)
            if (mask_flags[static_cast<std::size_t>(i)]) out.push_back(i);
        return out;
    }

    // context C: currently unmasked positions
    std::vector<int> context_indices() const {
        std::vector<int> out;
        for (int i = 0; i < size(); ++i)
            if (!mask_flags[static_cast<std::size_t>(i)]) out.push_back(i);
        return out;
    }

    void set_masked(int i) {
        tokens[static_cast<std::size_t>(i)] = mask_token;
        mask_flags[static_cast<std::size_t>(i)] = 1;
    }

    void commit(int i, int token) {
        tokens[static_cast<std::size_t>(i)] = token;
        mask_flags[static_cast<std::size_t>(i)] = 0;
    }

    void validate() const {
        if (tokens.size() != mask_flags.size() || tokens.size() != pinned.size())
            throw ShapeError("SequenceState: field lengths disagree");
        for (int i = 0; i < size(); ++i) {
            const bool is_mask = tokens[static_cast<std::size_t>(i)] == mask_token;
            if (is_mask != (mask_flags[static_cast<std::size_t>(i)] != 0))
                throw ShapeError("SequenceState: mask flag / token mismatch");
            if (pinned[static_cast<std::size_t>(i)] && mask_flags[static_cast<std::size_t>(i)])
                throw ShapeError("SequenceState: pinned position is masked");
        }
    }
};

// Monotone noise schedule on [0,1] with gamma(0)=0, gamma(1)=1.
struct NoiseSchedule {
    enum class Kind { Linear };
    Kind kind = Kind::Linear;

    double gamma(double t) const {
        if (!(t >= 0.0 && t <= 1.0))
            throw UsageError("noise schedule: t outside [0,1]");
        return t; // linear
    }
};

// Each non-pinned position of a fully unmasked x0 is independently replaced
// by the mask token with probability gamma(t).
inline SequenceState apply_forward_mask(const SequenceState& x0, double t, Rng& rng,
                                        const NoiseSchedule& schedule = {}) {
    const double g = schedule.gamma(t);
    SequenceState out = x0;
    for (int i = 0; i < out.size(); ++i) {
        if (out.pinned[static_cast<std::size_t>(i)]) continue;
        if (rng.uniform() < g) out.set_masked(i);
    }
    return out;
}

// Per-position categorical beliefs p(x_i = v | context), paired with the
// final-layer hidden states that produced them. Rows at unmasked positions
// are one-hot on the observed token.
struct Marginals {
    int n = 0;
    int vocab = 0;
    int hidden_dim = 0;
    std::vector<double> probs;  // n x vocab
    std::vector<double> hidden; // n x hidden_dim (may be empty)

    double prob(int i, int v) const {
        return probs[static_cast<std::size_t>(i) * vocab + v];
    }

    const double* row(int i) const { return probs.data() + static_cast<std::size_t>(i) * vocab; }
};

inline double entropy_nats(const double* p, int n) {
    double h = 0.0;
    for (int i = 0; i < n; ++i)
        if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
    return h;
}

// Shannon entropy per row, in nats; one-hot rows give exactly 0.
inline std::vector<double> entropy_per_position(const Marginals& m) {
    std::vector<double> out(static_cast<std::size_t>(m.n), 0.0);
    for (int i = 0; i < m.n; ++i) out[static_cast<std::size_t>(i)] = entropy_nats(m.row(i), m.vocab);
    return out;
}

// Anything that can report per-position marginals for a partially masked
// sequence: the trained transformer or the enumerable mock joint model.
// forward_marginals costs exactly 1 NFE.
class MarginalModel {
public:
    virtual ~MarginalModel() = default;

    virtual int seq_len() const = 0;
    virtual int vocab_size() const = 0; // |V|, mask token excluded
    virtual int hidden_dim() const { return 0; }
    virtual Marginals forward_marginals(const SequenceState& state) const = 0;

    long nfe() const { return nfe_.load(std::memory_order_relaxed); }
    void reset_nfe() { nfe_.store(0, std::memory_order_relaxed); }

protected:
    void count_nfe() const { nfe_.fetch_add(1, std::memory_order_relaxed); }

private:
    mutable std::atomic<long> nfe_{0};
};

} // namespace mimdm
