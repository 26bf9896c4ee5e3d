#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mimdm/errors.hpp"
#include "mimdm/rng.hpp"
#include "mimdm/sequence.hpp"
#include "mimdm/sudoku.hpp"
#include "mimdm/tape.hpp"
#include "mimdm/tensor.hpp"

namespace mimdm {

// Pre-norm bidirectional transformer encoder with learned absolute position
// embeddings. Logits cover the digit vocabulary only; the mask token exists
// purely as input id |V|.
struct ModelConfig {
    int box_size = 2;
    int seq_len = 16;  // b^4
    int vocab = 4;     // b^2
    int embed_dim = 48;
    int layers = 3;
    int heads = 4;
    int ff_dim = 192;
    std::uint64_t seed = 1;

    static ModelConfig for_box(int b) {
        ModelConfig c;
        c.box_size = b;
        c.seq_len = b * b * b * b;
        c.vocab = b * b;
        if (b == 3) {
            c.embed_dim = 128;
            c.layers = 6;
            c.heads = 8;
            c.ff_dim = 512;
        }
        return c;
    }

    void validate() const {
        if (box_size != 2 && box_size != 3) throw UsageError("config: box_size must be 2 or 3");
        if (seq_len != box_size * box_size * box_size * box_size)
            throw UsageError("config: seq_len must equal box_size^4");
        if (vocab != box_size * box_size) throw UsageError("config: vocab must equal box_size^2");
        if (embed_dim <= 0 || layers <= 0 || heads <= 0 || ff_dim <= 0)
            throw UsageError("config: dimensions must be positive");
        if (embed_dim % heads != 0) throw UsageError("config: embed_dim must divide by heads");
    }
};

// sudoku <-> sequence adapters (token = digit - 1, mask id = |V|)

inline SequenceState state_from_clues(const Board& clues) {
    const int n = clues.cell_count();
    const int vocab = clues.side();
    SequenceState s;
    s.mask_token = vocab;
    s.tokens.resize(static_cast<std::size_t>(n));
    s.mask_flags.resize(static_cast<std::size_t>(n));
    s.pinned.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int d = clues.cells[static_cast<std::size_t>(i)];
        s.tokens[static_cast<std::size_t>(i)] = d > 0 ? d - 1 : vocab;
        s.mask_flags[static_cast<std::size_t>(i)] = d > 0 ? 0 : 1;
        s.pinned[static_cast<std::size_t>(i)] = d > 0 ? 1 : 0;
    }
    return s;
}

// fully unmasked x0 whose clue positions are pinned context
inline SequenceState state_from_record(const PuzzleRecord& rec) {
    const int n = rec.solution.cell_count();
    SequenceState s;
    s.mask_token = rec.solution.side();
    s.tokens.resize(static_cast<std::size_t>(n));
    s.mask_flags.assign(static_cast<std::size_t>(n), 0);
    s.pinned.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        s.tokens[static_cast<std::size_t>(i)] = rec.solution.cells[static_cast<std::size_t>(i)] - 1;
        s.pinned[static_cast<std::size_t>(i)] = rec.clues.cells[static_cast<std::size_t>(i)] > 0 ? 1 : 0;
    }
    return s;
}

inline Board board_from_state(const SequenceState& s, int box_size) {
    Board b = Board::empty(box_size);
    for (int i = 0; i < s.size(); ++i)
        b.cells[static_cast<std::size_t>(i)] =
            s.mask_flags[static_cast<std::size_t>(i)] ? 0 : s.tokens[static_cast<std::size_t>(i)] + 1;
    return b;
}

class TransformerMdm : public MarginalModel {
public:
    explicit TransformerMdm(const ModelConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        init_params();
    }

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    int seq_len() const override { return cfg_.seq_len; }
    int vocab_size() const override { return cfg_.vocab; }
    int hidden_dim() const override { return cfg_.embed_dim; }

    // One forward pass: probabilities plus final-layer hidden states.
    // Costs exactly 1 NFE.
    Marginals forward_marginals(const SequenceState& state) const override {
        check_state(state);
        count_nfe();

        Tape tape;
        Binder bind{tape, const_cast<ParamStore&>(params_), false, {}};
        const auto [logits, hidden] = build_forward(tape, bind, state.tokens);

        Marginals m;
        m.n = cfg_.seq_len;
        m.vocab = cfg_.vocab;
        m.hidden_dim = cfg_.embed_dim;
        m.hidden = tape.value(hidden);
        m.probs.assign(static_cast<std::size_t>(m.n) * m.vocab, 0.0);
        const auto& lv = tape.value(logits);
        for (int i = 0; i < m.n; ++i) {
            double* row = m.probs.data() + static_cast<std::size_t>(i) * m.vocab;
            if (!state.mask_flags[static_cast<std::size_t>(i)]) {
                row[state.tokens[static_cast<std::size_t>(i)]] = 1.0; // observed: one-hot
                continue;
            }
            const double* x = lv.data() + static_cast<std::size_t>(i) * m.vocab;
            double mx = x[0];
            for (int v = 1; v < m.vocab; ++v) mx = std::max(mx, x[v]);
            double sum = 0.0;
            for (int v = 0; v < m.vocab; ++v) {
                row[v] = std::exp(x[v] - mx);
                sum += row[v];
            }
            for (int v = 0; v < m.vocab; ++v) row[v] /= sum;
        }
        return m;
    }

    // Mean over the batch of the masked-position cross-entropy sum (Shannon
    // loss of the clean tokens at masked inputs). Gradients land in the
    // ParamStore when accumulate is true.
    double batch_loss(const std::vector<SequenceState>& corrupted,
                      const std::vector<SequenceState>& clean, bool accumulate) {
        if (corrupted.empty() || corrupted.size() != clean.size())
            throw UsageError("batch_loss: empty or mismatched batch");
        Tape tape;
        Binder bind{tape, params_, true, {}};
        int total = -1;
        for (std::size_t b = 0; b < corrupted.size(); ++b) {
            const auto [logits, hidden] = build_forward(tape, bind, corrupted[b].tokens);
            (void)hidden;
            std::vector<std::uint8_t> mask = corrupted[b].mask_flags;
            const int loss = tape.cross_entropy_masked(logits, clean[b].tokens, mask);
            total = total < 0 ? loss : tape.add(total, loss);
        }
        const int mean = tape.scale(total, 1.0 / static_cast<double>(corrupted.size()));
        if (accumulate) {
            tape.backward(mean);
            tape.accumulate_param_grads();
        }
        return tape.scalar_value(mean);
    }

private:
    struct Binder {
        Tape& tape;
        ParamStore& store;
        bool trainable;
        std::unordered_map<std::string, int> cache;

        int operator()(const std::string& name) {
            auto it = cache.find(name);
            if (it != cache.end()) return it->second;
            const int id = trainable ? tape.param(store[name]) : tape.input(store[name]);
            cache[name] = id;
            return id;
        }
    };

    ModelConfig cfg_;
    ParamStore params_;

    void check_state(const SequenceState& state) const {
        if (state.size() != cfg_.seq_len) throw ShapeError("state length != model seq_len");
        if (state.mask_token != cfg_.vocab) throw ShapeError("state mask token != |V|");
        for (int tok : state.tokens)
            if (tok < 0 || tok > cfg_.vocab) throw ShapeError("token id out of range");
    }

    void init_params() {
        Rng rng(splitmix64(cfg_.seed ^ 0x7ab1e5));
        const int D = cfg_.embed_dim, F = cfg_.ff_dim, V = cfg_.vocab;
        const double w0 = 0.02;
        auto randn = [&](std::vector<int> shape) { return Tensor::randn(std::move(shape), rng, w0); };

        params_.add("tok_emb", randn({V + 1, D}));
        params_.add("pos_emb", randn({cfg_.seq_len, D}));
        for (int l = 0; l < cfg_.layers; ++l) {
            const std::string p = "l" + std::to_string(l) + ".";
            params_.add(p + "ln1.g", Tensor::full({D}, 1.0));
            params_.add(p + "ln1.b", Tensor::zeros({D}));
            params_.add(p + "attn.wq", randn({D, D}));
            params_.add(p + "attn.bq", Tensor::zeros({D}));
            params_.add(p + "attn.wk", randn({D, D}));
            params_.add(p + "attn.bk", Tensor::zeros({D}));
            params_.add(p + "attn.wv", randn({D, D}));
            params_.add(p + "attn.bv", Tensor::zeros({D}));
            params_.add(p + "attn.wo", randn({D, D}));
            params_.add(p + "attn.bo", Tensor::zeros({D}));
            params_.add(p + "ln2.g", Tensor::full({D}, 1.0));
            params_.add(p + "ln2.b", Tensor::zeros({D}));
            params_.add(p + "ff.w1", randn({D, F}));
            params_.add(p + "ff.b1", Tensor::zeros({F}));
            params_.add(p + "ff.w2", randn({F, D}));
            params_.add(p + "ff.b2", Tensor::zeros({D}));
        }
        params_.add("lnf.g", Tensor::full({D}, 1.0));
        params_.add("lnf.b", Tensor::zeros({D}));
        params_.add("head.w", randn({D, V}));
        params_.add("head.b", Tensor::zeros({V}));
    }

    // returns (logits node N x |V|, final hidden node N x D)
    std::pair<int, int> build_forward(Tape& t, Binder& p, const std::vector<int>& tokens) const {
        const int D = cfg_.embed_dim;
        const int H = cfg_.heads;
        const int dh = D / H;
        const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

        int h = t.add(t.gather_rows(p("tok_emb"), tokens), p("pos_emb"));
        for (int l = 0; l < cfg_.layers; ++l) {
            const std::string pre = "l" + std::to_string(l) + ".";
            const int x = t.layer_norm(h, p(pre + "ln1.g"), p(pre + "ln1.b"));
            const int q = t.add_row_bias(t.matmul(x, p(pre + "attn.wq")), p(pre + "attn.bq"));
            const int k = t.add_row_bias(t.matmul(x, p(pre + "attn.wk")), p(pre + "attn.bk"));
            const int v = t.add_row_bias(t.matmul(x, p(pre + "attn.wv")), p(pre + "attn.bv"));
            std::vector<int> heads;
            heads.reserve(static_cast<std::size_t>(H));
            for (int hd = 0; hd < H; ++hd) {
                const int qh = t.slice_cols(q, hd * dh, dh);
                const int kh = t.slice_cols(k, hd * dh, dh);
                const int vh = t.slice_cols(v, hd * dh, dh);
                const int scores = t.scale(t.matmul(qh, t.transpose(kh)), inv_sqrt_dh);
                heads.push_back(t.matmul(t.softmax_rows(scores), vh));
            }
            const int ctx = t.concat_cols(heads);
            const int attn = t.add_row_bias(t.matmul(ctx, p(pre + "attn.wo")), p(pre + "attn.bo"));
            h = t.add(h, attn);
            const int x2 = t.layer_norm(h, p(pre + "ln2.g"), p(pre + "ln2.b"));
            const int f1 = t.gelu(t.add_row_bias(t.matmul(x2, p(pre + "ff.w1")), p(pre + "ff.b1")));
            const int f2 = t.add_row_bias(t.matmul(f1, p(pre + "ff.w2")), p(pre + "ff.b2"));
            h = t.add(h, f2);
        }
        const int hf = t.layer_norm(h, p("lnf.g"), p("lnf.b"));
        const int logits = t.add_row_bias(t.matmul(hf, p("head.w")), p("head.b"));
        return {logits, hf};
    }
};

struct TrainConfig {
    int epochs = 6;
    int batch_size = 32;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 1;
    int log_every = 25;
};

// Per step: sample t ~ U(0,1) per example, mask non-pinned positions, take
// one Adam step on the mean masked cross-entropy. Single-threaded and
// deterministic per seed. Returns the final step's loss.
inline double train_mdm(TransformerMdm& model, const std::vector<PuzzleRecord>& dataset,
                        const TrainConfig& tc,
                        const std::function<void(long, double)>& log_step = {}) {
    if (dataset.empty()) throw UsageError("train_mdm: empty dataset");
    Rng rng(splitmix64(tc.seed ^ 0x17a11));
    NoiseSchedule schedule;

    std::vector<int> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    double last = 0.0;
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
            std::vector<SequenceState> clean, corrupted;
            clean.reserve(end - start);
            corrupted.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) {
                SequenceState x0 = state_from_record(dataset[static_cast<std::size_t>(order[i])]);
                const double t = rng.uniform();
                clean.push_back(x0);
                corrupted.push_back(apply_forward_mask(x0, t, rng, schedule));
            }
            model.params().zero_grad();
            last = model.batch_loss(corrupted, clean, true);
            if (!std::isfinite(last)) throw NumericError("train_mdm: non-finite loss");
            model.params().adam_step(tc.lr, tc.beta1, tc.beta2, tc.adam_eps);
            if (log_step && (model.params().step() % tc.log_every == 0))
                log_step(model.params().step(), last);
        }
    }
    return last;
}

// Fraction of masked tokens whose argmax prediction matches x0, with
// t drawn uniformly from (0, t_max].
inline double masked_token_accuracy(const TransformerMdm& model,
                                    const std::vector<PuzzleRecord>& puzzles, double t_max,
                                    std::uint64_t seed) {
    Rng rng(splitmix64(seed ^ 0xacc));
    NoiseSchedule schedule;
    long correct = 0, total = 0;
    for (const auto& rec : puzzles) {
        const SequenceState x0 = state_from_record(rec);
        double t = rng.uniform() * t_max;
        SequenceState xt = apply_forward_mask(x0, t, rng, schedule);
        if (xt.masked_count() == 0) {
            // force at least one masked position so the draw counts
            for (int i = 0; i < xt.size(); ++i)
                if (!xt.pinned[static_cast<std::size_t>(i)]) {
                    xt.set_masked(i);
                    break;
                }
            if (xt.masked_count() == 0) continue;
        }
        const Marginals m = model.forward_marginals(xt);
        for (int i = 0; i < xt.size(); ++i) {
            if (!xt.mask_flags[static_cast<std::size_t>(i)]) continue;
            int best = 0;
            for (int v = 1; v < m.vocab; ++v)
                if (m.prob(i, v) > m.prob(i, best)) best = v;
            correct += best == x0.tokens[static_cast<std::size_t>(i)] ? 1 : 0;
            ++total;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

} // namespace mimdm
