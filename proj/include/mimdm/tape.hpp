#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mimdm/errors.hpp"
#include "mimdm/tensor.hpp"

namespace mimdm {

// Reverse-mode tape over a fixed op vocabulary. Nodes are evaluated eagerly
// on construction; backward() walks the tape in reverse and accumulates into
// per-node gradient buffers. Parameter leaves keep a pointer to the external
// Tensor so gradients can be flushed into a ParamStore.
class Tape {
public:
    enum class Op {
        Input,
        Param,
        MatMul,
        Transpose,
        Add,
        AddRowBias,
        AddScalar,
        Mul,
        Scale,
        SoftmaxRows,
        LayerNorm,
        GatherRows,
        Gelu,
        Softplus,
        CrossEntropyMasked,
        WeightedSum,
        ConcatCols,
        SliceCols,
    };

    struct Node {
        Op op;
        std::vector<int> in;
        int rows = 0, cols = 0;
        std::vector<double> val;
        std::vector<double> grad;
        double scalar = 0.0;          // Scale factor / LayerNorm eps
        int s0 = 0, s1 = 0;           // SliceCols start/len
        std::vector<int> indices;     // GatherRows ids, CrossEntropy targets
        std::vector<std::uint8_t> mask;
        std::vector<double> aux;      // saved stats / weights / probs
        Tensor* param = nullptr;
    };

    int input(int rows, int cols, const double* data) {
        Node n;
        n.op = Op::Input;
        n.rows = rows;
        n.cols = cols;
        n.val.assign(data, data + static_cast<std::size_t>(rows) * cols);
        return push(std::move(n));
    }

    int input(const Tensor& t) { return input(t.rows(), t.cols(), t.values.data()); }

    int constant_scalar(double v) { return input(1, 1, &v); }

    int param(Tensor& t) {
        Node n;
        n.op = Op::Param;
        n.rows = t.rows();
        n.cols = t.cols();
        n.val = t.values;
        n.param = &t;
        return push(std::move(n));
    }

    int matmul(int a, int b) {
        const Node& A = at(a);
        const Node& B = at(b);
        if (A.cols != B.rows)
            throw ShapeError("matmul: inner dimensions disagree (" +
                             std::to_string(A.cols) + " vs " + std::to_string(B.rows) + ")");
        Node n;
        n.op = Op::MatMul;
        n.in = {a, b};
        n.rows = A.rows;
        n.cols = B.cols;
        n.val.assign(static_cast<std::size_t>(n.rows) * n.cols, 0.0);
        matmul_acc(A.val.data(), B.val.data(), n.val.data(), A.rows, A.cols, B.cols);
        return push(std::move(n));
    }

    int transpose(int a) {
        const Node& A = at(a);
        Node n;
        n.op = Op::Transpose;
        n.in = {a};
        n.rows = A.cols;
        n.cols = A.rows;
        n.val.resize(A.val.size());
        for (int r = 0; r < A.rows; ++r)
            for (int c = 0; c < A.cols; ++c)
                n.val[static_cast<std::size_t>(c) * A.rows + r] =
                    A.val[static_cast<std::size_t>(r) * A.cols + c];
        return push(std::move(n));
    }

    int add(int a, int b) {
        const Node& A = at(a);
        const Node& B = at(b);
        if (A.rows != B.rows || A.cols != B.cols) throw ShapeError("add: shape mismatch");
        Node n;
        n.op = Op::Add;
        n.in = {a, b};
        n.rows = A.rows;
        n.cols = A.cols;
        n.val.resize(A.val.size());
        for (std::size_t i = 0; i < A.val.size(); ++i) n.val[i] = A.val[i] + B.val[i];
        return push(std::move(n));
    }

    // a: R x C, bias: 1 x C, broadcast over rows
    int add_row_bias(int a, int bias) {
        const Node& A = at(a);
        const Node& B = at(bias);
        if (B.rows != 1 || B.cols != A.cols) throw ShapeError("add_row_bias: bias shape mismatch");
        Node n;
        n.op = Op::AddRowBias;
        n.in = {a, bias};
        n.rows = A.rows;
        n.cols = A.cols;
        n.val.resize(A.val.size());
        for (int r = 0; r < A.rows; ++r)
            for (int c = 0; c < A.cols; ++c)
                n.val[static_cast<std::size_t>(r) * A.cols + c] =
                    A.val[static_cast<std::size_t>(r) * A.cols + c] + B.val[c];
        return push(std::move(n));
    }

    // b is a 1x1 node broadcast onto every entry of a
    int add_scalar(int a, int b) {
        const Node& A = at(a);
        const Node& B = at(b);
        if (B.rows != 1 || B.cols != 1) throw ShapeError("add_scalar: b must be 1x1");
        Node n;
        n.op = Op::AddScalar;
        n.in = {a, b};
        n.rows = A.rows;
        n.cols = A.cols;
        n.val.resize(A.val.size());
        for (std::size_t i = 0; i < A.val.size(); ++i) n.val[i] = A.val[i] + B.val[0];
        return push(std::move(n));
    }

    int mul(int a, int b) {
        const Node& A = at(a);
        const Node& B = at(b);
        if (A.rows != B.rows || A.cols != B.cols) throw ShapeError("mul: shape mismatch");
        Node n;
        n.op = Op::Mul;
        n.in = {a, b};
        n.rows = A.rows;
        n.cols = A.cols;
        n.val.resize(A.val.size());
        for (std::size_t i = 0; i < A.val.size(); ++i) n.val[i] = A.val[i] * B.val[i];
        return push(std::move(n));
    }

    int scale(int a, double s) {
        const Node& A = at(a);
        Node n;
        n.op = Op::Scale;
        n.in = {a};
        n.rows = A.rows;
        n.cols = A.cols;
        n.scalar = s;
        n.val.resize(A.val.size());
        for (std::size_t i = 0; i < A.val.size(); ++i) n.val[i] = s * A.val[i];
        return push(std::move(n));
    }

    // numerically stable row softmax (max subtraction)
    int softmax_rows(int a) {
        const Node& A = at(a);
        Node n;
        n.op = Op::SoftmaxRows;
        n.in = {a};
        n.rows = A.rows;
        n.cols = A.cols;
        n.val.resize(A.val.size());
        for (int r = 0; r < A.rows; ++r) {
            const double* x = A.val.data() + static_cast<std::size_t>(r) * A.cols;
            double* y = n.val.data() + static_cast<std::size_t>(r) * A.cols;
            double mx = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < A.cols; ++c) {
                if (!std::isfinite(x[c])) throw NumericError("softmax_rows: non-finite input");
                mx = std::max(mx, x[c]);
            }
            double sum = 0.0;
            for (int c = 0; c < A.cols; ++c) {
                y[c] = std::exp(x[c] - mx);
                sum += y[c];
            }
            for (int c = 0; c < A.cols; ++c) y[c] /= sum;
        }
        return push(std::move(n));
    }

    // per-row zero mean / unit variance, then affine with gain and bias (1 x D each)
    int layer_norm(int a, int gain, int bias, double eps = 1e-5) {
        const Node& A = at(a);
        const Node& G = at(gain);
        const Node& B = at(bias);
        if (G.rows != 1 || G.cols != A.cols || B.rows != 1 || B.cols != A.cols)
            throw ShapeError("layer_norm: gain/bias shape mismatch");
        Node n;
        n.op = Op::LayerNorm;
        n.in = {a, gain, bias};
        n.rows = A.rows;
        n.cols = A.cols;
        n.scalar = eps;
        n.val.resize(A.val.size());
        n.aux.resize(static_cast<std::size_t>(A.rows) * 2); // mu, 1/s per row
        const int D = A.cols;
        for (int r = 0; r < A.rows; ++r) {
            const double* x = A.val.data() + static_cast<std::size_t>(r) * D;
            double* y = n.val.data() + static_cast<std::size_t>(r) * D;
            double mu = 0.0;
            for (int c = 0; c < D; ++c) mu += x[c];
            mu /= D;
            double var = 0.0;
            for (int c = 0; c < D; ++c) var += (x[c] - mu) * (x[c] - mu);
            var /= D;
            const double inv_s = 1.0 / std::sqrt(var + eps);
            n.aux[static_cast<std::size_t>(r) * 2] = mu;
            n.aux[static_cast<std::size_t>(r) * 2 + 1] = inv_s;
            for (int c = 0; c < D; ++c) y[c] = (x[c] - mu) * inv_s * G.val[c] + B.val[c];
        }
        return push(std::move(n));
    }

    // table: V x D, ids: N row indices -> N x D
    int gather_rows(int table, std::vector<int> ids) {
        const Node& T = at(table);
        Node n;
        n.op = Op::GatherRows;
        n.in = {table};
        n.rows = static_cast<int>(ids.size());
        n.cols = T.cols;
        n.val.resize(static_cast<std::size_t>(n.rows) * n.cols);
        for (int r = 0; r < n.rows; ++r) {
            const int id = ids[static_cast<std::size_t>(r)];
            if (id < 0 || id >= T.rows) throw ShapeError("gather_rows: id out of range");
            std::copy_n(T.val.data() + static_cast<std::size_t>(id) * T.cols, T.cols,
                        n.val.data() + static_cast<std::size_t>(r) * T.cols);
        }
        n.indices = std::move(ids);
        return push(std::move(n));
    }

    // tanh-approximation GELU; constants fixed
    int gelu(int a) {
        const Node& A = at(a);
        Node n;
        n.op = Op::Gelu;
        n.in = {a};
        n.rows = A.rows;
        n.cols = A.cols;
        n.val.resize(A.val.size());
        for (std::size_t i = 0; i < A.val.size(); ++i) n.val[i] = gelu_fwd(A.val[i]);
        return push(std::move(n));
    }

    int softplus(int a) {
        const Node& A = at(a);
        Node n;
        n.op = Op::Softplus;
        n.in = {a};
        n.rows = A.rows;
        n.cols = A.cols;
        n.val.resize(A.val.size());
        for (std::size_t i = 0; i < A.val.size(); ++i) n.val[i] = softplus_fwd(A.val[i]);
        return push(std::move(n));
    }

    // Sum over masked rows of -log softmax(logits)[target]; unmasked rows
    // contribute exactly 0. Empty mask is a valid degenerate case.
    int cross_entropy_masked(int logits, std::vector<int> targets,
                             std::vector<std::uint8_t> row_mask) {
        const Node& L = at(logits);
        if (static_cast<int>(targets.size()) != L.rows ||
            static_cast<int>(row_mask.size()) != L.rows)
            throw ShapeError("cross_entropy_masked: targets/mask length mismatch");
        Node n;
        n.op = Op::CrossEntropyMasked;
        n.in = {logits};
        n.rows = 1;
        n.cols = 1;
        n.aux.assign(L.val.size(), 0.0); // softmax probs for masked rows
        double loss = 0.0;
        const int V = L.cols;
        for (int r = 0; r < L.rows; ++r) {
            if (!row_mask[static_cast<std::size_t>(r)]) continue;
            const int tgt = targets[static_cast<std::size_t>(r)];
            if (tgt < 0 || tgt >= V) throw ShapeError("cross_entropy_masked: target out of range");
            const double* x = L.val.data() + static_cast<std::size_t>(r) * V;
            double* p = n.aux.data() + static_cast<std::size_t>(r) * V;
            double mx = x[0];
            for (int c = 1; c < V; ++c) mx = std::max(mx, x[c]);
            double sum = 0.0;
            for (int c = 0; c < V; ++c) {
                p[c] = std::exp(x[c] - mx);
                sum += p[c];
            }
            for (int c = 0; c < V; ++c) p[c] /= sum;
            loss += std::log(sum) + mx - x[tgt];
        }
        n.val = {loss};
        n.indices = std::move(targets);
        n.mask = std::move(row_mask);
        return push(std::move(n));
    }

    // scalar = sum_i weights[i] * a[i]; weights are constants
    int weighted_sum(int a, std::vector<double> weights) {
        const Node& A = at(a);
        if (weights.size() != A.val.size()) throw ShapeError("weighted_sum: weight size mismatch");
        Node n;
        n.op = Op::WeightedSum;
        n.in = {a};
        n.rows = 1;
        n.cols = 1;
        double s = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * A.val[i];
        n.val = {s};
        n.aux = std::move(weights);
        return push(std::move(n));
    }

    int sum(int a) {
        const Node& A = at(a);
        return weighted_sum(a, std::vector<double>(A.val.size(), 1.0));
    }

    int concat_cols(const std::vector<int>& parts) {
        if (parts.empty()) throw ShapeError("concat_cols: no inputs");
        const int R = at(parts[0]).rows;
        int C = 0;
        for (int p : parts) {
            if (at(p).rows != R) throw ShapeError("concat_cols: row mismatch");
            C += at(p).cols;
        }
        Node n;
        n.op = Op::ConcatCols;
        n.in = parts;
        n.rows = R;
        n.cols = C;
        n.val.resize(static_cast<std::size_t>(R) * C);
        int off = 0;
        for (int p : parts) {
            const Node& P = at(p);
            for (int r = 0; r < R; ++r)
                std::copy_n(P.val.data() + static_cast<std::size_t>(r) * P.cols, P.cols,
                            n.val.data() + static_cast<std::size_t>(r) * C + off);
            off += P.cols;
        }
        return push(std::move(n));
    }

    int slice_cols(int a, int start, int len) {
        const Node& A = at(a);
        if (start < 0 || len <= 0 || start + len > A.cols)
            throw ShapeError("slice_cols: range out of bounds");
        Node n;
        n.op = Op::SliceCols;
        n.in = {a};
        n.rows = A.rows;
        n.cols = len;
        n.s0 = start;
        n.s1 = len;
        n.val.resize(static_cast<std::size_t>(A.rows) * len);
        for (int r = 0; r < A.rows; ++r)
            std::copy_n(A.val.data() + static_cast<std::size_t>(r) * A.cols + start, len,
                        n.val.data() + static_cast<std::size_t>(r) * len);
        return push(std::move(n));
    }

    const Node& at(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    const std::vector<double>& value(int id) const { return at(id).val; }
    const std::vector<double>& grad(int id) const { return at(id).grad; }
    double scalar_value(int id) const { return at(id).val.at(0); }

    // Reverse sweep from a scalar loss node. Gradients accumulate into every
    // node's grad buffer; call accumulate_param_grads() afterwards to flush
    // parameter gradients into their Tensors.
    void backward(int loss) {
        Node& L = nodes_[static_cast<std::size_t>(loss)];
        if (L.rows != 1 || L.cols != 1)
            throw UsageError("backward: loss must be scalar");
        for (auto& n : nodes_) n.grad.assign(n.val.size(), 0.0);
        L.grad[0] = 1.0;
        for (int id = loss; id >= 0; --id) backward_node(id);
    }

    // grads of bound parameters, scaled, added into Tensor::grad
    void accumulate_param_grads(double scale = 1.0) {
        for (auto& n : nodes_) {
            if (n.op != Op::Param || n.grad.empty()) continue;
            n.param->ensure_grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i)
                n.param->grad[i] += scale * n.grad[i];
        }
    }

    std::size_t node_count() const { return nodes_.size(); }

    static void matmul_acc(const double* A, const double* B, double* C, int M, int K, int P) {
        for (int i = 0; i < M; ++i) {
            const double* arow = A + static_cast<std::size_t>(i) * K;
            double* crow = C + static_cast<std::size_t>(i) * P;
            for (int k = 0; k < K; ++k) {
                const double a = arow[k];
                const double* brow = B + static_cast<std::size_t>(k) * P;
                for (int p = 0; p < P; ++p) crow[p] += a * brow[p];
            }
        }
    }

private:
    std::vector<Node> nodes_;

    int push(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    static double gelu_fwd(double x) {
        constexpr double kA = 0.7978845608028654; // sqrt(2/pi)
        constexpr double kB = 0.044715;
        return 0.5 * x * (1.0 + std::tanh(kA * (x + kB * x * x * x)));
    }

    static double gelu_grad(double x) {
        constexpr double kA = 0.7978845608028654;
        constexpr double kB = 0.044715;
        const double u = kA * (x + kB * x * x * x);
        const double t = std::tanh(u);
        const double sech2 = 1.0 - t * t;
        return 0.5 * (1.0 + t) + 0.5 * x * sech2 * kA * (1.0 + 3.0 * kB * x * x);
    }

    static double softplus_fwd(double x) {
        return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
    }

    static double sigmoid(double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
    }

    void backward_node(int id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad.empty()) return;
        bool any = false;
        for (double g : n.grad)
            if (g != 0.0) { any = true; break; }
        if (!any) return;

        switch (n.op) {
        case Op::Input:
        case Op::Param:
            break;
        case Op::MatMul: {
            Node& A = nodes_[static_cast<std::size_t>(n.in[0])];
            Node& B = nodes_[static_cast<std::size_t>(n.in[1])];
            // dA += dC * B^T
            for (int i = 0; i < A.rows; ++i) {
                const double* dc = n.grad.data() + static_cast<std::size_t>(i) * n.cols;
                double* da = A.grad.data() + static_cast<std::size_t>(i) * A.cols;
                for (int k = 0; k < A.cols; ++k) {
                    const double* brow = B.val.data() + static_cast<std::size_t>(k) * B.cols;
                    double acc = 0.0;
                    for (int p = 0; p < n.cols; ++p) acc += dc[p] * brow[p];
                    da[k] += acc;
                }
            }
            // dB += A^T * dC
            for (int k = 0; k < B.rows; ++k) {
                double* db = B.grad.data() + static_cast<std::size_t>(k) * B.cols;
                for (int i = 0; i < A.rows; ++i) {
                    const double a = A.val[static_cast<std::size_t>(i) * A.cols + k];
                    if (a == 0.0) continue;
                    const double* dc = n.grad.data() + static_cast<std::size_t>(i) * n.cols;
                    for (int p = 0; p < n.cols; ++p) db[p] += a * dc[p];
                }
            }
            break;
        }
        case Op::Transpose: {
            Node& A = nodes_[static_cast<std::size_t>(n.in[0])];
            for (int r = 0; r < n.rows; ++r)
                for (int c = 0; c < n.cols; ++c)
                    A.grad[static_cast<std::size_t>(c) * A.cols + r] +=
                        n.grad[static_cast<std::size_t>(r) * n.cols + c];
            break;
        }
        case Op::Add: {
            Node& A = nodes_[static_cast<std::size_t>(n.in[0])];
            Node& B = nodes_[static_cast<std::size_t>(n.in[1])];
            for (std::size_t i = 0; i < n.grad.size(); ++i) {
                A.grad[i] += n.grad[i];
                B.grad[i] += n.grad[i];
            }
            break;
        }
        case Op::AddRowBias: {
            Node& A = nodes_[static_cast<std::size_t>(n.in[0])];
            Node& B = nodes_[static_cast<std::size_t>(n.in[1])];
            for (int r = 0; r < n.rows; ++r)
                for (int c = 0; c < n.cols; ++c) {
                    const double g = n.grad[static_cast<std::size_t>(r) * n.cols + c];
                    A.grad[static_cast<std::size_t>(r) * n.cols + c] += g;
                    B.grad[static_cast<std::size_t>(c)] += g;
                }
            break;
        }
        case Op::AddScalar: {
            Node& A = nodes_[static_cast<std::size_t>(n.in[0])];
            Node& B = nodes_[static_cast<std::size_t>(n.in[1])];
            for (std::size_t i = 0; i < n.grad.size(); ++i) {
                A.grad[i] += n.grad[i];
                B.grad[0] += n.grad[i];
            }
            break;
        }
        case Op::Mul: {
            Node& A = nodes_[static_cast<std::size_t>(n.in[0])];
            Node& B = nodes_[static_cast<std::size_t>(n.in[1])];
            for (std::size_t i = 0; i < n.grad.size(); ++i) {
                A.grad[i] += n.grad[i] * B.val[i];
                B.grad[i] += n.grad[i] * A.val[i];
            }
            break;
        }
        case Op::Scale: {
            Node& A = nodes_[static_cast<std::size_t>(n.in[0])];
            for (std::size_t i = 0; i < n.grad.size(); ++i) A.grad[i] += n.scalar * n.grad[i];
            break;
        }
        case Op::SoftmaxRows: {
            Node& A = nodes_[static_cast<std::size_t>(n.in[0])];
            for (int r = 0; r < n.rows; ++r) {
                const double* y = n.val.data() + static_cast<std::size_t>(r) * n.cols;
                const double* dy = n.grad.data() + static_cast<std::size_t>(r) * n.cols;
                double* dx = A.grad.data() + static_cast<std::size_t>(r) * n.cols;
                double dot = 0.0;
                for (int c = 0; c < n.cols; ++c) dot += y[c] * dy[c];
                for (int c = 0; c < n.cols; ++c) dx[c] += y[c] * (dy[c] - dot);
            }
            break;
        }
        case Op::LayerNorm: {
            Node& A = nodes_[static_cast<std::size_t>(n.in[0])];
            Node& G = nodes_[static_cast<std::size_t>(n.in[1])];
            Node& B = nodes_[static_cast<std::size_t>(n.in[2])];
            const int D = n.cols;
            for (int r = 0; r < n.rows; ++r) {
                const double mu = n.aux[static_cast<std::size_t>(r) * 2];
                const double inv_s = n.aux[static_cast<std::size_t>(r) * 2 + 1];
                const double* x = A.val.data() + static_cast<std::size_t>(r) * D;
                const double* dy = n.grad.data() + static_cast<std::size_t>(r) * D;
                double* dx = A.grad.data() + static_cast<std::size_t>(r) * D;
                double mean_u = 0.0, mean_ux = 0.0;
                for (int c = 0; c < D; ++c) {
                    const double xc = (x[c] - mu) * inv_s;
                    const double u = G.val[c] * dy[c];
                    mean_u += u;
                    mean_ux += u * xc;
                    G.grad[static_cast<std::size_t>(c)] += dy[c] * xc;
                    B.grad[static_cast<std::size_t>(c)] += dy[c];
                }
                mean_u /= D;
                mean_ux /= D;
                for (int c = 0; c < D; ++c) {
                    const double xc = (x[c] - mu) * inv_s;
                    dx[c] += (G.val[c] * dy[c] - mean_u - xc * mean_ux) * inv_s;
                }
            }
            break;
        }
        case Op::GatherRows: {
            Node& T = nodes_[static_cast<std::size_t>(n.in[0])];
            for (int r = 0; r < n.rows; ++r) {
                const int id2 = n.indices[static_cast<std::size_t>(r)];
                for (int c = 0; c < n.cols; ++c)
                    T.grad[static_cast<std::size_t>(id2) * n.cols + c] +=
                        n.grad[static_cast<std::size_t>(r) * n.cols + c];
            }
            break;
        }
        case Op::Gelu: {
            Node& A = nodes_[static_cast<std::size_t>(n.in[0])];
            for (std::size_t i = 0; i < n.grad.size(); ++i)
                A.grad[i] += n.grad[i] * gelu_grad(A.val[i]);
            break;
        }
        case Op::Softplus: {
            Node& A = nodes_[static_cast<std::size_t>(n.in[0])];
            for (std::size_t i = 0; i < n.grad.size(); ++i)
                A.grad[i] += n.grad[i] * sigmoid(A.val[i]);
            break;
        }
        case Op::CrossEntropyMasked: {
            Node& L = nodes_[static_cast<std::size_t>(n.in[0])];
            const double g = n.grad[0];
            const int V = L.cols;
            for (int r = 0; r < L.rows; ++r) {
                if (!n.mask[static_cast<std::size_t>(r)]) continue;
                const double* p = n.aux.data() + static_cast<std::size_t>(r) * V;
                double* dl = L.grad.data() + static_cast<std::size_t>(r) * V;
                const int tgt = n.indices[static_cast<std::size_t>(r)];
                for (int c = 0; c < V; ++c) dl[c] += g * (p[c] - (c == tgt ? 1.0 : 0.0));
            }
            break;
        }
        case Op::WeightedSum: {
            Node& A = nodes_[static_cast<std::size_t>(n.in[0])];
            const double g = n.grad[0];
            for (std::size_t i = 0; i < n.aux.size(); ++i) A.grad[i] += g * n.aux[i];
            break;
        }
        case Op::ConcatCols: {
            int off = 0;
            for (int p : n.in) {
                Node& P = nodes_[static_cast<std::size_t>(p)];
                for (int r = 0; r < n.rows; ++r)
                    for (int c = 0; c < P.cols; ++c)
                        P.grad[static_cast<std::size_t>(r) * P.cols + c] +=
                            n.grad[static_cast<std::size_t>(r) * n.cols + off + c];
                off += P.cols;
            }
            break;
        }
        case Op::SliceCols: {
            Node& A = nodes_[static_cast<std::size_t>(n.in[0])];
            for (int r = 0; r < n.rows; ++r)
                for (int c = 0; c < n.cols; ++c)
                    A.grad[static_cast<std::size_t>(r) * A.cols + n.s0 + c] +=
                        n.grad[static_cast<std::size_t>(r) * n.cols + c];
            break;
        }
        }
    }
};

} // namespace mimdm
